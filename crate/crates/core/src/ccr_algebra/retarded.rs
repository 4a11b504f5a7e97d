//! Retarded products of local operators and the identities they satisfy.

use alloc::vec::Vec;

use num_complex::Complex;

use super::fields::{FieldEngine, FieldPoly};
use super::tables::AlgebraTables;
use crate::scalar::Real;

/// Polynomial in the in-field attached to a single lattice site.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalOp<R: Real> {
    pub site: u32,
    pub poly: FieldPoly<R>,
}

impl<R: Real> LocalOp<R> {
    pub fn field(site: u32) -> Self {
        Self { site, poly: FieldPoly::<R>::generator(site) }
    }

    /// Interaction density `phi^p / p`.
    pub fn lagrangian(site: u32, p: usize) -> Self {
        let c = Complex::new(R::one() / R::from_int(p as i64), R::zero());
        Self { site, poly: FieldPoly::<R>::power(site, p, c) }
    }
}

fn sign<R: Real>(n: usize) -> Complex<R> {
    let one = Complex::new(R::one(), R::zero());
    if n.is_multiple_of(2) {
        one
    } else {
        -one
    }
}

/// Strict total order on insertions: by time slice, ties broken by slot.
/// Equal-time generators commute on the lattice, so the tie-break does not
/// change any nested commutator.
fn later<R: Real>(tables: &AlgebraTables<R>, a: (u32, usize), b: (u32, usize)) -> bool {
    (tables.time(a.0), a.1) > (tables.time(b.0), b.1)
}

/// `R(b0 | b_1, ..., b_n)`: the signed sum over orderings of nested
/// commutators `[b_pi(n), [..., [b_pi(1), b0]]]`, restricted to orderings
/// that run backwards in time from `b0`.
///
/// The time-ordered indicator counts every configuration once. A chain of
/// closed-cone indicators would drop branching configurations (an insertion
/// related to an earlier-commuted site but spacelike to its predecessor) and
/// count coincident insertions twice. Causal support follows from the
/// commutators.
pub fn retarded_product<R: Real>(tables: &AlgebraTables<R>, b0: &LocalOp<R>, bs: &[LocalOp<R>]) -> FieldPoly<R> {
    fn chain<R: Real>(
        tables: &AlgebraTables<R>,
        acc: &FieldPoly<R>,
        last: (u32, usize),
        bs: &[LocalOp<R>],
        used: &mut Vec<bool>,
        depth: usize,
        out: &mut FieldPoly<R>,
    ) {
        if depth == bs.len() {
            out.add_assign(acc);
            return;
        }
        for j in 0..bs.len() {
            if used[j] || !later(tables, last, (bs[j].site, j)) {
                continue;
            }
            let next = bs[j].poly.commutator(acc, tables);
            if next.is_zero() {
                continue;
            }
            used[j] = true;
            chain(tables, &next, (bs[j].site, j), bs, used, depth + 1, out);
            used[j] = false;
        }
    }
    let mut out = FieldPoly::<R>::zero();
    let mut used = alloc::vec![false; bs.len()];
    chain(tables, &b0.poly, (b0.site, bs.len()), bs, &mut used, 0, &mut out);
    out.scale(&sign::<R>(bs.len()))
}

/// The same product from the recursion that peels off the outermost
/// commutator: `R_n = -[b_j, R_{n-1}(b0 | b without b_j)]` for the earliest
/// `b_j`, zero when any argument lies after `b0`.
pub fn retarded_product_recursive<R: Real>(tables: &AlgebraTables<R>, b0: &LocalOp<R>, bs: &[LocalOp<R>]) -> FieldPoly<R> {
    let Some(j) = (0..bs.len()).min_by_key(|&j| (tables.time(bs[j].site), j)) else {
        return b0.poly.clone();
    };
    if bs.iter().any(|b| tables.time(b.site) > tables.time(b0.site)) {
        return FieldPoly::<R>::zero();
    }
    let rest: Vec<LocalOp<R>> = bs.iter().enumerate().filter(|&(k, _)| k != j).map(|(_, b)| b.clone()).collect();
    let inner = retarded_product_recursive(tables, b0, &rest);
    bs[j].poly.commutator(&inner, tables).scale(&sign::<R>(1))
}

/// `R(a | c, b) - R(c | a, b) - sum_I [R(a | b_I), R(c | b_rest)]`, which
/// vanishes identically.
pub fn glz_residual<R: Real>(tables: &AlgebraTables<R>, a: &LocalOp<R>, c: &LocalOp<R>, bs: &[LocalOp<R>]) -> FieldPoly<R> {
    let with = |first: &LocalOp<R>| {
        let mut v = alloc::vec![first.clone()];
        v.extend_from_slice(bs);
        v
    };
    let mut res = retarded_product(tables, a, &with(c)).sub(&retarded_product(tables, c, &with(a)));
    let n = bs.len();
    for mask in 0u32..(1 << n) {
        let (inside, outside): (Vec<_>, Vec<_>) = bs.iter().enumerate().partition(|(k, _)| mask & (1 << k) != 0);
        let inside: Vec<LocalOp<R>> = inside.into_iter().map(|(_, b)| b.clone()).collect();
        let outside: Vec<LocalOp<R>> = outside.into_iter().map(|(_, b)| b.clone()).collect();
        let ra = retarded_product(tables, a, &inside);
        let rc = retarded_product(tables, c, &outside);
        res = res.sub(&ra.commutator(&rc, tables));
    }
    res
}

fn minus_i_power<R: Real>(n: usize) -> Complex<R> {
    let mut c = Complex::new(R::one(), R::zero());
    let minus_i = Complex::new(R::zero(), -R::one());
    for _ in 0..n {
        c = c * minus_i.clone();
    }
    c
}

fn factorial<R: Real>(n: usize) -> R {
    (1..=n).fold(R::one(), |acc, k| acc * R::from_int(k as i64))
}

/// `(-i)^n / n! * sum_{x_1..x_n} w(x_1)..w(x_n) R(b0 | fixed, L(x_1), ..., L(x_n))`
/// with `L = phi^p / p`. Sites outside the closed past of `b0` cannot
/// contribute and are skipped.
pub fn with_interaction_insertions<R: Real>(
    tables: &AlgebraTables<R>,
    p: usize,
    b0: &LocalOp<R>,
    fixed: &[LocalOp<R>],
    n: usize,
) -> FieldPoly<R> {
    let candidates: Vec<u32> = (0..tables.len() as u32).filter(|&s| tables.in_closed_past(s, b0.site)).collect();
    let mut out = FieldPoly::<R>::zero();
    let mut tuple = alloc::vec![0usize; n];
    let mut args: Vec<LocalOp<R>> = fixed.to_vec();
    loop {
        if candidates.is_empty() && n > 0 {
            break;
        }
        args.truncate(fixed.len());
        let mut weight = R::one();
        for &k in &tuple {
            let s = candidates[k];
            weight = weight * tables.weight(s).clone();
            args.push(LocalOp::lagrangian(s, p));
        }
        let r = retarded_product(tables, b0, &args);
        out.add_scaled(&r, &Complex::new(weight, R::zero()));
        // Advance the odometer.
        let mut i = 0;
        while i < n {
            tuple[i] += 1;
            if tuple[i] < candidates.len() {
                break;
            }
            tuple[i] = 0;
            i += 1;
        }
        if i == n {
            break;
        }
    }
    let norm = minus_i_power::<R>(n) * Complex::new(R::one() / factorial::<R>(n), R::zero());
    out.scale(&norm)
}

/// Order-`order` coefficient of the local field at `x` rebuilt from
/// retarded products of the in-field with interaction insertions.
pub fn retarded_expansion<R: Real>(tables: &AlgebraTables<R>, p: usize, x: u32, order: usize) -> FieldPoly<R> {
    with_interaction_insertions(tables, p, &LocalOp::field(x), &[], order)
}

/// Both sides of the two pull-through identities for
/// `(-i)^n/n! sum R(phi(x) | phi(y), L^n)`: the left side, the form with the
/// retarded propagator pulled out on the `x` side, and the form with it
/// pulled out on the `y` side.
#[derive(Debug, Clone)]
pub struct PullThrough<R: Real> {
    pub lhs: FieldPoly<R>,
    pub pulled_left: FieldPoly<R>,
    pub pulled_right: FieldPoly<R>,
}

pub fn pull_through<R: Real>(engine: &mut FieldEngine<'_, R>, x: u32, y: u32, n: usize) -> PullThrough<R> {
    assert!(n >= 1, "pull-through needs at least one insertion");
    let tables = engine.tables();
    let p = engine.degree();
    let lhs = with_interaction_insertions(tables, p, &LocalOp::field(x), &[LocalOp::field(y)], n);
    let mut left = FieldPoly::<R>::zero();
    let mut right = FieldPoly::<R>::zero();
    for z in 0..tables.len() as u32 {
        let w = tables.weight(z).clone();
        let gl = tables.gr(x, z).clone() * w.clone();
        let gr = tables.gr(z, y).clone() * w;
        if gl.is_zero() && gr.is_zero() {
            continue;
        }
        for s2 in 0..n {
            let mid_left =
                if gl.is_zero() { None } else { Some(with_interaction_insertions(tables, p, &LocalOp::field(z), &[LocalOp::field(y)], s2)) };
            let mid_right =
                if gr.is_zero() { None } else { Some(with_interaction_insertions(tables, p, &LocalOp::field(x), &[LocalOp::field(z)], s2)) };
            for s1 in 0..n - s2 {
                let s3 = n - 1 - s2 - s1;
                for j in 0..p - 1 {
                    let pre = engine.power(z, j, s1);
                    let post = engine.power(z, p - 2 - j, s3);
                    if let Some(m) = &mid_left {
                        let term = pre.mul(m, tables).mul(&post, tables);
                        left.add_scaled(&term, &Complex::new(gl.clone(), R::zero()));
                    }
                    if let Some(m) = &mid_right {
                        let term = pre.mul(m, tables).mul(&post, tables);
                        right.add_scaled(&term, &Complex::new(gr.clone(), R::zero()));
                    }
                }
            }
        }
    }
    PullThrough { lhs, pulled_left: left, pulled_right: right }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{LatticeParams, LatticeSpacetime};
    use num_rational::BigRational;

    type Rat = BigRational;

    fn tables(nt: usize, nx: usize) -> AlgebraTables<Rat> {
        AlgebraTables::exact(&LatticeSpacetime::new(LatticeParams::flat(nt, nx, 0.5, 1.0, 0.5)).unwrap())
    }

    #[test]
    fn single_argument_is_signed_commutator() {
        let t = tables(5, 3);
        let (a, b) = (LocalOp::<Rat>::field(13), LocalOp::<Rat>::lagrangian(4, 3));
        let r = retarded_product(&t, &a, core::slice::from_ref(&b));
        let expect = b.poly.commutator(&a.poly, &t).scale(&sign::<Rat>(1));
        assert_eq!(r, expect);
        assert!(!r.is_zero());
        // Future argument gives nothing.
        assert!(retarded_product(&t, &b, &[a]).is_zero());
    }

    #[test]
    fn chain_sum_matches_recursion() {
        let t = tables(6, 3);
        let b0 = LocalOp::<Rat>::field(16);
        let bs = [LocalOp::lagrangian(10, 3), LocalOp::lagrangian(4, 3), LocalOp::field(7), LocalOp::lagrangian(4, 3)];
        for k in 1..=bs.len() {
            let direct = retarded_product(&t, &b0, &bs[..k]);
            assert_eq!(direct, retarded_product_recursive(&t, &b0, &bs[..k]), "{k} arguments");
        }
        assert!(!retarded_product(&t, &b0, &bs[..3]).is_zero());
    }

    #[test]
    fn glz_holds_including_coincident_points() {
        let t = tables(6, 3);
        let a = LocalOp::<Rat>::field(15);
        let c = LocalOp::<Rat>::field(13);
        let bs = [LocalOp::lagrangian(7, 3), LocalOp::lagrangian(4, 3)];
        assert!(glz_residual(&t, &a, &c, &bs).is_zero());
        let same = [LocalOp::lagrangian(7, 3), LocalOp::lagrangian(7, 3)];
        assert!(glz_residual(&t, &a, &LocalOp::field(7), &same).is_zero());
    }

    #[test]
    fn retarded_expansion_reproduces_local_field() {
        let t = tables(5, 3);
        for p in [3, 4] {
            let mut e = FieldEngine::new(&t, p);
            for x in [9u32, 13] {
                for order in 0..3 {
                    assert_eq!(retarded_expansion(&t, p, x, order), *e.local(x, order), "p={p} x={x} order={order}");
                }
            }
        }
    }

    #[test]
    fn pull_through_first_order() {
        let t = tables(5, 3);
        let mut e = FieldEngine::new(&t, 3);
        let pt = pull_through(&mut e, 14, 4, 1);
        assert!(!pt.lhs.is_zero());
        assert_eq!(pt.lhs, pt.pulled_left);
        assert_eq!(pt.lhs, pt.pulled_right);
    }

    #[test]
    fn pull_through_second_order_all_pairs() {
        let t = tables(4, 3);
        for p in [3, 4] {
            let mut e = FieldEngine::new(&t, p);
            for x in 0..12u32 {
                for y in 0..12u32 {
                    let pt = pull_through(&mut e, x, y, 2);
                    assert_eq!(pt.lhs, pt.pulled_left, "p={p} x={x} y={y}");
                    assert_eq!(pt.lhs, pt.pulled_right, "p={p} x={x} y={y}");
                }
            }
        }
    }

    #[test]
    fn branching_configuration_is_counted() {
        // y is in the past of a but spacelike to b, with b before a before x:
        // the commutator with phi(y) hits the phi(a) left over from the first
        // step, so the term survives although y and b are unordered.
        let t = tables(6, 5);
        let (x, a, b, y) = (25u32, 20u32, 7u32, 0u32);
        assert!(t.is_spacelike(y, b) && t.in_closed_past(y, a) && t.in_closed_past(b, a));
        let args = [LocalOp::field(y), LocalOp::lagrangian(a, 3), LocalOp::lagrangian(b, 3)];
        let r = retarded_product(&t, &LocalOp::field(x), &args);
        let expect = args[0].poly.commutator(&args[2].poly.commutator(&args[1].poly.commutator(&LocalOp::field(x).poly, &t), &t), &t).scale(&sign::<Rat>(1));
        assert!(!expect.is_zero());
        assert_eq!(r, expect);
    }

    #[test]
    fn support_in_the_causal_past() {
        let t = tables(6, 5);
        let x = 27u32;
        for s in 0..30u32 {
            if t.is_spacelike(s, x) {
                let args = [LocalOp::lagrangian(s, 3), LocalOp::lagrangian(s.saturating_sub(5), 3)];
                assert!(retarded_product(&t, &LocalOp::field(x), &args).is_zero(), "site {s}");
            }
        }
    }
}
