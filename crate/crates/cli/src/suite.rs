//! Identity suite: free-field axioms, commutator identities, retarded
//! product identities, graph/operator agreement and a negative control.

use nalgebra::DMatrix;
use num_rational::BigRational;
use rand::Rng;
use rayon::prelude::*;
use yf_core::ccr_algebra::{
    glz_residual, local_commutator, out_commutator, pull_through, retarded_expansion, AlgebraTables, FieldEngine,
    LocalOp, OutCommutator,
};
use yf_core::graphs::{GraphContext, GraphError};
use yf_core::lattice::{KgMode, LatticeSpacetime};
use yf_core::propagators::{PropagatorError, PropagatorSet};
use yf_core::scalar::{Real, C64};

use crate::oracle::compare_class;
use crate::report::Check;

#[derive(Debug, thiserror::Error)]
pub enum SuiteError {
    #[error(transparent)]
    Propagator(#[from] PropagatorError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Residual tolerance of the float backend.
pub const FLOAT_TOL: f64 = 1e-9;

/// Every unordered pair of distinct sites.
pub fn all_pairs(n: usize) -> Vec<(u32, u32)> {
    let n = n as u32;
    (0..n).flat_map(|x| (x + 1..n).map(move |y| (x, y))).collect()
}

pub fn spacelike_pairs<R: Real>(tables: &AlgebraTables<R>) -> Vec<(u32, u32)> {
    all_pairs(tables.len()).into_iter().filter(|&(x, y)| tables.is_spacelike(x, y)).collect()
}

fn max_over<R, T, F>(tables: &AlgebraTables<R>, p: usize, items: &[T], f: F) -> f64
where
    R: Real,
    T: Sync,
    F: Fn(&mut FieldEngine<'_, R>, &T) -> f64 + Sync,
{
    items.par_iter().map_init(|| FieldEngine::new(tables, p), |engine, item| f(engine, item)).reduce(|| 0.0, f64::max)
}

/// `[phi_loc(x), phi_loc(y)]` at each order over the given pairs.
pub fn locality<R: Real>(tables: &AlgebraTables<R>, p: usize, orders: &[usize], pairs: &[(u32, u32)], tol: f64) -> Vec<Check> {
    orders
        .iter()
        .map(|&order| {
            let r = max_over(tables, p, pairs, |e, &(x, y)| local_commutator(e, x, y, order).max_coefficient());
            Check::within(format!("local fields commute at spacelike separation, p = {p}, order {order}"), pairs.len(), r, tol)
        })
        .collect()
}

/// Out-field commutator at each order, both from the outgoing trees and from
/// the four-piece split, against `i D` at order zero and zero above.
pub fn out_ccr<R: Real>(tables: &AlgebraTables<R>, p: usize, orders: &[usize], pairs: &[(u32, u32)], tol: f64) -> Vec<Check> {
    orders
        .iter()
        .map(|&order| {
            let r = max_over(tables, p, pairs, |e, &(x, y)| {
                let c = out_commutator(e, x, y, order);
                let expected = OutCommutator::expected(tables, x, y, order);
                c.direct.sub(&expected).max_coefficient().max(c.combined().sub(&expected).max_coefficient())
            });
            Check::within(format!("out-field commutator, p = {p}, order {order}"), pairs.len(), r, tol)
        })
        .collect()
}

fn random_op<R: Real>(rng: &mut impl Rng, sites: usize, p: usize) -> LocalOp<R> {
    let s = rng.random_range(0..sites) as u32;
    if rng.random_bool(0.5) {
        LocalOp::field(s)
    } else {
        LocalOp::lagrangian(s, p)
    }
}

/// Random instances `(a, c, b_1..b_n)` with `n` cycling through `0..=max_n`.
pub fn glz<R: Real>(tables: &AlgebraTables<R>, p: usize, instances: usize, max_n: usize, rng: &mut impl Rng, tol: f64) -> Check {
    let cases: Vec<(LocalOp<R>, LocalOp<R>, Vec<LocalOp<R>>)> = (0..instances)
        .map(|k| {
            let n = k % (max_n + 1);
            let a = random_op(rng, tables.len(), p);
            let c = random_op(rng, tables.len(), p);
            let bs = (0..n).map(|_| random_op(rng, tables.len(), p)).collect();
            (a, c, bs)
        })
        .collect();
    let r = cases.par_iter().map(|(a, c, bs)| glz_residual(tables, a, c, bs).max_coefficient()).reduce(|| 0.0, f64::max);
    Check::within(format!("retarded products satisfy the GLZ relation, p = {p}"), instances, r, tol)
}

/// Random `(x, y, n)` with `n` cycling through `1..=max_n`; both pulled-out
/// forms against the left side.
pub fn retpull<R: Real>(tables: &AlgebraTables<R>, p: usize, instances: usize, max_n: usize, rng: &mut impl Rng, tol: f64) -> Check {
    let cases: Vec<(u32, u32, usize)> = (0..instances)
        .map(|k| (rng.random_range(0..tables.len()) as u32, rng.random_range(0..tables.len()) as u32, 1 + k % max_n))
        .collect();
    let r = max_over(tables, p, &cases, |e, &(x, y, n)| {
        let pt = pull_through(e, x, y, n);
        pt.lhs.sub(&pt.pulled_left).max_coefficient().max(pt.lhs.sub(&pt.pulled_right).max_coefficient())
    });
    Check::within(format!("retarded propagator pulls through the retarded product, p = {p}"), instances, r, tol)
}

/// Local field from trees against the retarded-product expansion at every
/// root site and order `0..=sigma_max`.
pub fn tree_vs_retarded<R: Real>(tables: &AlgebraTables<R>, p: usize, sigma_max: usize, tol: f64) -> Check {
    let cases: Vec<(u32, usize)> =
        (0..tables.len() as u32).flat_map(|x| (0..=sigma_max).map(move |s| (x, s))).collect();
    let r = max_over(tables, p, &cases, |e, &(x, s)| e.local(x, s).sub(&retarded_expansion(tables, p, x, s)).max_coefficient());
    Check::within(format!("tree expansion equals retarded products, p = {p}, order <= {sigma_max}"), cases.len(), r, tol)
}

/// Free-field kernel axioms: `Im D+ = D/2`, positivity of `D+`, exact
/// spacelike vanishing of `D`, and `D+` solving the wave equation in both
/// arguments.
pub fn free_field_axioms(l: &LatticeSpacetime) -> Result<Vec<Check>, PropagatorError> {
    let props = PropagatorSet::build(l)?;
    let n = l.len();
    let scale = props.d.iter().fold(0.0f64, |m, v| m.max(v.abs()));

    let im_gap = (0..n)
        .flat_map(|x| (0..n).map(move |y| (x, y)))
        .map(|(x, y)| (props.dplus[[x, y]].im - 0.5 * props.d[[x, y]]).abs())
        .fold(0.0, f64::max)
        / scale;

    let herm = DMatrix::from_fn(n, n, |x, y| props.dplus[[x, y]]);
    let min_eig = herm.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min);

    let exact = AlgebraTables::<BigRational>::exact(l);
    let pairs = spacelike_pairs(&exact);
    let nonzero = pairs.iter().filter(|&&(x, y)| !num_traits::Zero::is_zero(exact.d(x, y))).count();

    let mut kg = 0.0f64;
    for y in 0..n {
        let col: Vec<C64> = (0..n).map(|x| props.dplus[[x, y]]).collect();
        let row: Vec<C64> = (0..n).map(|x| props.dplus[[y, x]]).collect();
        for r in [l.kg_apply(&col, KgMode::Full), l.kg_apply(&row, KgMode::Full)] {
            kg = r.iter().fold(kg, |m, v| m.max(v.norm()));
        }
    }
    let kg = kg * l.dt() * l.dt() / scale;

    Ok(vec![
        Check::within("imaginary part of the two-point function is half the commutator", n * n, im_gap, 1e-10),
        Check::at_least("smallest eigenvalue of the two-point function", n, min_eig, -1e-10),
        Check::within("commutator vanishes at spacelike separation (exact), nonzero entries", pairs.len(), nonzero as f64, 0.0),
        Check::within("two-point function solves the wave equation in both arguments", 2 * n, kg, 1e-10),
    ])
}

/// Graph engine against the operator-algebra reference for every
/// `n <= max_n`, `order <= sigma_max`, `p` in `ps`.
pub fn graph_vs_oracle(
    l: &LatticeSpacetime,
    ps: &[usize],
    max_n: usize,
    sigma_max: usize,
    samples: usize,
    rng: &mut impl Rng,
) -> Result<Check, SuiteError> {
    let props = PropagatorSet::build(l)?;
    let tables = AlgebraTables::float(l, &props);
    let mut worst = 0.0f64;
    let mut count = 0;
    let mut note = String::new();
    for &p in ps {
        let ctx = GraphContext::new(&props, l.volume_weights(), p);
        for n in 1..=max_n {
            for order in 0..=sigma_max {
                if p * order > ctx.budget {
                    continue;
                }
                let c = compare_class(&tables, &ctx, n, order, samples, rng)?;
                count += c.samples;
                if c.max_rel_error >= worst {
                    worst = c.max_rel_error;
                    note = format!("worst class n={n} order={order} p={p}");
                }
            }
        }
    }
    Ok(Check::within("graph expansion equals operator Wick values", count, worst, 1e-10).with_note(note))
}

/// Corrupts `D` at one site pair and requires the order-2 out-field
/// commutator to fail on the given pairs.
pub fn negative_control(l: &LatticeSpacetime, p: usize, corrupt: (u32, u32), pairs: &[(u32, u32)]) -> Check {
    let mut tables = AlgebraTables::<BigRational>::exact(l);
    tables.corrupt_commutator(corrupt.0, corrupt.1, BigRational::new(1.into(), 8.into()));
    let residuals: Vec<f64> = pairs
        .par_iter()
        .map_init(
            || FieldEngine::new(&tables, p),
            |e, &(x, y)| {
                let c = out_commutator(e, x, y, 2);
                c.combined().sub(&OutCommutator::expected(&tables, x, y, 2)).max_coefficient()
            },
        )
        .collect();
    let failures = residuals.iter().filter(|&&r| r > 0.0).count();
    let max = residuals.iter().copied().fold(0.0, f64::max);
    Check::expect_failure("corrupted commutator table breaks the out-field commutator", pairs.len(), failures, max)
}
