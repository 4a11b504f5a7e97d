//! Propagator tables consumed by the operator algebra.

use alloc::vec::Vec;

use ndarray::Array2;
use num_complex::Complex;
use num_rational::BigRational;

use super::poly::Commutator;
use crate::lattice::{LatticeSpacetime, Site};
use crate::propagators::{green_retarded, PropagatorSet};
use crate::scalar::{Real, C64};

/// Retarded propagator, commutator function and vertex weights over a
/// common real field, plus the lattice for causal comparisons.
#[derive(Debug, Clone)]
pub struct AlgebraTables<R: Real> {
    lattice: LatticeSpacetime,
    gr: Array2<R>,
    d: Array2<R>,
    weights: Vec<R>,
    dplus: Option<Array2<C64>>,
}

impl<R: Real> AlgebraTables<R> {
    /// Builds `Gr` in the chosen field and sets `D = Gr - Ga`.
    pub fn build(lattice: &LatticeSpacetime) -> Self {
        let gr = green_retarded::<R>(lattice);
        let d = &gr - &gr.t();
        let dt = R::from_param(lattice.dt());
        let dx = R::from_param(lattice.dx());
        let eps = R::from_param(lattice.epsilon());
        let weights = lattice
            .h()
            .iter()
            .map(|&h| (R::one() + eps.clone() * R::from_param(h)) * dt.clone() * dx.clone())
            .collect();
        Self { lattice: lattice.clone(), gr, d, weights, dplus: None }
    }

    pub fn lattice(&self) -> &LatticeSpacetime {
        &self.lattice
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn gr(&self, x: u32, y: u32) -> &R {
        &self.gr[[x as usize, y as usize]]
    }

    pub fn ga(&self, x: u32, y: u32) -> &R {
        &self.gr[[y as usize, x as usize]]
    }

    pub fn d(&self, x: u32, y: u32) -> &R {
        &self.d[[x as usize, y as usize]]
    }

    pub fn weight(&self, x: u32) -> &R {
        &self.weights[x as usize]
    }

    pub fn weights(&self) -> &[R] {
        &self.weights
    }

    /// Multiplies every vertex weight by a site-dependent switch.
    pub fn with_vertex_switch(mut self, switch: &[R]) -> Self {
        assert_eq!(switch.len(), self.weights.len(), "switch length must match lattice");
        for (w, g) in self.weights.iter_mut().zip(switch) {
            *w = w.clone() * g.clone();
        }
        self
    }

    /// Adds `delta` to `D(a, b)` (and `-delta` to `D(b, a)`), breaking
    /// `D = Gr - Ga`. Used as a negative control.
    pub fn corrupt_commutator(&mut self, a: u32, b: u32, delta: R) {
        let (a, b) = (a as usize, b as usize);
        self.d[[a, b]] = self.d[[a, b]].clone() + delta.clone();
        self.d[[b, a]] = self.d[[b, a]].clone() - delta;
    }

    /// Time slice of a site.
    pub fn time(&self, s: u32) -> usize {
        self.lattice.coords(Site(s as usize)).0
    }

    /// `a` in the closed causal past of `b`.
    pub fn in_closed_past(&self, a: u32, b: u32) -> bool {
        self.lattice.in_closed_past(Site(a as usize), Site(b as usize))
    }

    pub fn is_spacelike(&self, a: u32, b: u32) -> bool {
        self.lattice.is_spacelike(Site(a as usize), Site(b as usize))
    }

    /// Sites `y` with `Gr(x, y) != 0`.
    pub fn retarded_support(&self, x: u32) -> Vec<u32> {
        self.gr.row(x as usize).iter().enumerate().filter(|(_, v)| !v.is_zero()).map(|(y, _)| y as u32).collect()
    }

    /// Sites `y` with `D(x, y) != 0`.
    pub fn commutator_support(&self, x: u32) -> Vec<u32> {
        self.d.row(x as usize).iter().enumerate().filter(|(_, v)| !v.is_zero()).map(|(y, _)| y as u32).collect()
    }
}

impl AlgebraTables<BigRational> {
    /// Exact tables. Lattice parameters are snapped to rationals.
    pub fn exact(lattice: &LatticeSpacetime) -> Self {
        Self::build(lattice)
    }
}

impl AlgebraTables<f64> {
    /// Float tables sharing `Gr` and the two-point function with a
    /// precomputed propagator set.
    pub fn float(lattice: &LatticeSpacetime, props: &PropagatorSet) -> Self {
        Self {
            lattice: lattice.clone(),
            gr: props.gr.clone(),
            d: props.d.clone(),
            weights: lattice.volume_weights(),
            dplus: Some(props.dplus.clone()),
        }
    }

    /// Positive-frequency two-point function, when attached.
    pub fn dplus(&self) -> Option<&Array2<C64>> {
        self.dplus.as_ref()
    }
}

impl<R: Real> Commutator<Complex<R>> for AlgebraTables<R> {
    fn commutator_value(&self, a: u32, b: u32) -> Complex<R> {
        Complex::new(R::zero(), self.d(a, b).clone())
    }
}
