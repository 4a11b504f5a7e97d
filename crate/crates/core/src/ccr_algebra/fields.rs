//! Order-by-order expansion of the interacting, local and outgoing fields
//! as polynomials in the in-field.

use alloc::collections::BTreeMap;
use alloc::rc::Rc;

use num_complex::Complex;

use super::poly::WickPolynomial;
use super::tables::AlgebraTables;
use crate::scalar::Real;
use crate::trees::FieldType;

pub type FieldPoly<R> = WickPolynomial<Complex<R>>;

/// Memoized expansion of `phi_loc = phi_in - lambda Gr phi_loc^{p-1}` and of
/// the matching outgoing field in powers of `-lambda`.
pub struct FieldEngine<'a, R: Real> {
    tables: &'a AlgebraTables<R>,
    p: usize,
    loc: BTreeMap<(u32, usize), Rc<FieldPoly<R>>>,
    powers: BTreeMap<(u32, usize, usize), Rc<FieldPoly<R>>>,
}

impl<'a, R: Real> FieldEngine<'a, R> {
    pub fn new(tables: &'a AlgebraTables<R>, p: usize) -> Self {
        assert!(p >= 2, "interaction degree must be at least 2");
        Self { tables, p, loc: BTreeMap::new(), powers: BTreeMap::new() }
    }

    pub fn tables(&self) -> &'a AlgebraTables<R> {
        self.tables
    }

    pub fn degree(&self) -> usize {
        self.p
    }

    fn weighted(&self, y: u32, kernel: &R) -> Complex<R> {
        Complex::new(self.tables.weight(y).clone() * kernel.clone(), R::zero())
    }

    /// Order-`order` coefficient of the local field at `x`.
    pub fn local(&mut self, x: u32, order: usize) -> Rc<FieldPoly<R>> {
        if let Some(p) = self.loc.get(&(x, order)) {
            return p.clone();
        }
        let value = if order == 0 {
            FieldPoly::<R>::generator(x)
        } else {
            let mut acc = FieldPoly::<R>::zero();
            for y in self.tables.retarded_support(x) {
                let vertex = self.power(y, self.p - 1, order - 1);
                acc.add_scaled(&vertex, &self.weighted(y, self.tables.gr(x, y)));
            }
            acc
        };
        let value = Rc::new(value);
        self.loc.insert((x, order), value.clone());
        value
    }

    /// Order-`order` coefficient of `phi_loc(x)^j`, an ordered product of
    /// coincident factors.
    pub fn power(&mut self, x: u32, j: usize, order: usize) -> Rc<FieldPoly<R>> {
        if j == 0 {
            return Rc::new(if order == 0 { FieldPoly::<R>::one() } else { FieldPoly::<R>::zero() });
        }
        if j == 1 {
            return self.local(x, order);
        }
        if let Some(p) = self.powers.get(&(x, j, order)) {
            return p.clone();
        }
        let mut acc = FieldPoly::<R>::zero();
        for s in 0..=order {
            let head = self.local(x, s);
            let tail = self.power(x, j - 1, order - s);
            acc.add_assign(&head.mul(&tail, self.tables));
        }
        let value = Rc::new(acc);
        self.powers.insert((x, j, order), value.clone());
        value
    }

    /// Order-`order` coefficient of `phi_loc(x) - phi_out(x)`, i.e. the
    /// advanced integral of the vertex.
    pub fn advanced_tail(&mut self, x: u32, order: usize) -> FieldPoly<R> {
        let mut acc = FieldPoly::<R>::zero();
        if order == 0 {
            return acc;
        }
        for y in 0..self.tables.len() as u32 {
            let ga = self.tables.ga(x, y).clone();
            if ga.is_zero() {
                continue;
            }
            let vertex = self.power(y, self.p - 1, order - 1);
            acc.add_scaled(&vertex, &self.weighted(y, &ga));
        }
        acc
    }

    /// Order-`order` coefficient of the outgoing field: the same trees as
    /// the local field with the commutator function on the trunk.
    pub fn outgoing(&mut self, x: u32, order: usize) -> FieldPoly<R> {
        if order == 0 {
            return FieldPoly::<R>::generator(x);
        }
        let mut acc = FieldPoly::<R>::zero();
        for y in self.tables.commutator_support(x) {
            let vertex = self.power(y, self.p - 1, order - 1);
            acc.add_scaled(&vertex, &self.weighted(y, self.tables.d(x, y)));
        }
        acc
    }

    pub fn field(&mut self, ty: FieldType, x: u32, order: usize) -> FieldPoly<R> {
        match ty {
            FieldType::In => {
                if order == 0 {
                    FieldPoly::<R>::generator(x)
                } else {
                    FieldPoly::<R>::zero()
                }
            }
            FieldType::Loc => (*self.local(x, order)).clone(),
            FieldType::Out => self.outgoing(x, order),
        }
    }
}
