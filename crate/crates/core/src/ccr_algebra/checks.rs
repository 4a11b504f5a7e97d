//! Commutator identities of the perturbative fields.

use num_complex::Complex;

use super::fields::{FieldEngine, FieldPoly};
use crate::scalar::Real;

/// Order-`order` coefficient of `[phi_loc(x), phi_loc(y)]`.
pub fn local_commutator<R: Real>(engine: &mut FieldEngine<'_, R>, x: u32, y: u32, order: usize) -> FieldPoly<R> {
    let tables = engine.tables();
    let mut acc = FieldPoly::<R>::zero();
    for s in 0..=order {
        let a = engine.local(x, s);
        let b = engine.local(y, order - s);
        acc.add_assign(&a.commutator(&b, tables));
    }
    acc
}

/// First-order commutator predicted by the propagators:
/// `(p-1) i sum_z w(z) (Gr(x,z) Gr(z,y) - Ga(x,z) Ga(z,y)) phi(z)^{p-2}`.
pub fn first_order_commutator_prediction<R: Real>(engine: &FieldEngine<'_, R>, x: u32, y: u32) -> FieldPoly<R> {
    let t = engine.tables();
    let p = engine.degree();
    let mut acc = FieldPoly::<R>::zero();
    for z in 0..t.len() as u32 {
        let k = t.gr(x, z).clone() * t.gr(z, y).clone() - t.ga(x, z).clone() * t.ga(z, y).clone();
        if k.is_zero() {
            continue;
        }
        let c = Complex::new(R::zero(), k * t.weight(z).clone() * R::from_int(p as i64 - 1));
        acc.add_term(alloc::vec![z; p - 2], c);
    }
    acc
}

/// The four pieces of `[phi_out(x), phi_out(y)]` at one order, writing
/// `phi_out = phi_loc - A` with `A` the advanced integral of the vertex:
/// `[loc, loc]`, `[loc, A]`, `[A, loc]` and `[A, A]`.
#[derive(Debug, Clone)]
pub struct OutCommutator<R: Real> {
    pub loc_loc: FieldPoly<R>,
    pub loc_adv: FieldPoly<R>,
    pub adv_loc: FieldPoly<R>,
    pub adv_adv: FieldPoly<R>,
    /// `[phi_out(x), phi_out(y)]` from the outgoing trees directly.
    pub direct: FieldPoly<R>,
}

impl<R: Real> OutCommutator<R> {
    /// `I - II - III + IV`.
    pub fn combined(&self) -> FieldPoly<R> {
        let mut s = self.loc_loc.sub(&self.loc_adv).sub(&self.adv_loc);
        s.add_assign(&self.adv_adv);
        s
    }

    /// Expected value: `i D(x, y)` at order zero, zero above.
    pub fn expected(tables: &super::AlgebraTables<R>, x: u32, y: u32, order: usize) -> FieldPoly<R> {
        if order == 0 {
            FieldPoly::<R>::constant(Complex::new(R::zero(), tables.d(x, y).clone()))
        } else {
            FieldPoly::<R>::zero()
        }
    }
}

pub fn out_commutator<R: Real>(engine: &mut FieldEngine<'_, R>, x: u32, y: u32, order: usize) -> OutCommutator<R> {
    let tables = engine.tables();
    let mut parts = [FieldPoly::<R>::zero(), FieldPoly::<R>::zero(), FieldPoly::<R>::zero(), FieldPoly::<R>::zero()];
    let mut direct = FieldPoly::<R>::zero();
    for s in 0..=order {
        let lx = engine.local(x, s);
        let ly = engine.local(y, order - s);
        let ax = engine.advanced_tail(x, s);
        let ay = engine.advanced_tail(y, order - s);
        parts[0].add_assign(&lx.commutator(&ly, tables));
        parts[1].add_assign(&lx.commutator(&ay, tables));
        parts[2].add_assign(&ax.commutator(&ly, tables));
        parts[3].add_assign(&ax.commutator(&ay, tables));
        let ox = engine.outgoing(x, s);
        let oy = engine.outgoing(y, order - s);
        direct.add_assign(&ox.commutator(&oy, tables));
    }
    let [loc_loc, loc_adv, adv_loc, adv_adv] = parts;
    OutCommutator { loc_loc, loc_adv, adv_loc, adv_adv, direct }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ccr_algebra::AlgebraTables;
    use crate::lattice::{LatticeParams, LatticeSpacetime};
    use num_rational::BigRational;

    fn tables() -> AlgebraTables<BigRational> {
        AlgebraTables::exact(&LatticeSpacetime::new(LatticeParams::flat(6, 4, 0.5, 1.0, 0.5)).unwrap())
    }

    #[test]
    fn spacelike_local_fields_commute() {
        let t = tables();
        let mut e = FieldEngine::new(&t, 3);
        let (x, y) = (4 * 4 + 0, 4 * 4 + 2);
        assert!(t.is_spacelike(x, y));
        for order in 0..3 {
            assert!(local_commutator(&mut e, x, y, order).is_zero(), "order {order}");
        }
    }

    #[test]
    fn first_order_commutator_matches_prediction() {
        let t = tables();
        let mut e = FieldEngine::new(&t, 3);
        let (x, y) = (21, 6);
        let got = local_commutator(&mut e, x, y, 1);
        assert!(!got.is_zero());
        assert_eq!(got, first_order_commutator_prediction(&e, x, y));
    }

    #[test]
    fn outgoing_fields_are_free() {
        let t = tables();
        let mut e = FieldEngine::new(&t, 3);
        let (x, y) = (17, 10);
        for order in 0..3 {
            let oc = out_commutator(&mut e, x, y, order);
            let expect = OutCommutator::expected(&t, x, y, order);
            assert_eq!(oc.combined(), expect, "order {order}");
            assert_eq!(oc.direct, expect, "order {order}");
        }
    }

    #[test]
    fn corrupted_commutator_breaks_outgoing_ccr() {
        let mut t = tables();
        t.corrupt_commutator(17, 2, BigRational::new(1.into(), 8.into()));
        let mut e = FieldEngine::new(&t, 3);
        let oc = out_commutator(&mut e, 17, 10, 2);
        assert!(!oc.direct.is_zero());
    }
}
