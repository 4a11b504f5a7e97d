//! Particle content of a non-quasifree state that shares the commutation
//! relations of a quasifree reference state.
//!
//! Works on a two-slice lattice, where site functions are exactly Cauchy
//! data and the map from test functions to solutions is invertible. Mode
//! coordinates order the positive-frequency coefficients first, then the
//! negative-frequency ones.

use alloc::vec;
use alloc::vec::Vec;

use ndarray::Array2;
use num_bigint::BigInt;
use num_complex::ComplexFloat;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use thiserror::Error;

use crate::lattice::LatticeSpacetime;
use crate::propagators::{ModeBasis, PropagatorError, PropagatorSet, SolutionCoeffs};
use crate::scalar::C64;
use crate::star_calc::{permutations, set_partitions, Functional, StarError, Tensor};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReconstructError {
    #[error("reconstruction needs a two-slice lattice, got {0} slices")]
    NotTwoSlices(usize),
    #[error(transparent)]
    Propagator(#[from] PropagatorError),
    #[error(transparent)]
    Star(#[from] StarError),
    #[error("parity mismatch: s = {s}, r = {r}")]
    Parity { s: usize, r: usize },
    #[error("truncated component of degree {degree} violates the commutation constraints by {deviation:e}")]
    CcrIncompatible { degree: usize, deviation: f64 },
    #[error("all reconstructed components vanish")]
    Indistinguishable,
    #[error("leading nonzero component has odd degree {0}")]
    OddLeadingDegree(usize),
    #[error("no reference point above threshold")]
    NoReference,
}

/// Mode-space maps for a two-slice lattice.
#[derive(Debug, Clone)]
pub struct ModeSpace {
    modes: usize,
    weights: Vec<C64>,
    /// Site values of each basis solution, `sites x 2K`.
    eval: Array2<C64>,
    /// Inverse of `eval`, `2K x sites`.
    coeff: Array2<C64>,
    /// Positive-frequency test functions with unit coefficient, `sites x K`.
    lift: Array2<C64>,
    dplus: Array2<C64>,
    dtilde: Array2<C64>,
    /// `B(a, b) = sum_k (a_k^- b_k^+ + a_k^+ b_k^-)`, so that
    /// `B(Dtilde f, Dtilde g) = Dtilde(f, g)`.
    bilinear: Array2<C64>,
    basis: ModeBasis,
}

impl ModeSpace {
    pub fn new(lattice: &LatticeSpacetime) -> Result<Self, ReconstructError> {
        if lattice.nt() != 2 {
            return Err(ReconstructError::NotTwoSlices(lattice.nt()));
        }
        let basis = ModeBasis::new(lattice)?;
        let props = PropagatorSet::from_basis(lattice, &basis)?;
        let (k, n) = (basis.len(), lattice.len());
        let weights: Vec<C64> = lattice.volume_weights().into_iter().map(|w| C64::new(w, 0.0)).collect();
        let eval = Array2::from_shape_fn((n, 2 * k), |(s, i)| {
            if i < k {
                basis.mode(i)[s]
            } else {
                basis.mode(i - k)[s].conj()
            }
        });
        let mut coeff = Array2::zeros((2 * k, n));
        for s in 0..n {
            let mut e = vec![C64::zero(); n];
            e[s] = C64::one();
            let c = basis.coefficients(&e);
            for i in 0..2 * k {
                coeff[[i, s]] = c.0[i];
            }
        }
        let lift = Array2::from_shape_fn((n, k), |(s, i)| coeff[[i, s]].conj() / weights[s]);
        let bilinear = Array2::from_shape_fn((2 * k, 2 * k), |(a, b)| {
            if (a < k) != (b < k) && a % k == b % k {
                C64::one()
            } else {
                C64::zero()
            }
        });
        let dtilde = props.dtilde.mapv(|v| C64::new(v, 0.0));
        Ok(Self { modes: k, weights, eval, coeff, lift, dplus: props.dplus, dtilde, bilinear, basis })
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn sites(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[C64] {
        &self.weights
    }

    pub fn dplus(&self) -> &Array2<C64> {
        &self.dplus
    }

    pub fn dtilde(&self) -> &Array2<C64> {
        &self.dtilde
    }

    pub fn basis(&self) -> &ModeBasis {
        &self.basis
    }

    /// Test function whose smeared solution has positive-frequency
    /// coefficients `alpha` and no negative-frequency part.
    pub fn positive_test_function(&self, alpha: &[C64]) -> Vec<C64> {
        (0..self.sites()).map(|s| (0..self.modes).map(|i| self.lift[[s, i]] * alpha[i]).sum()).collect()
    }

    /// Coefficients of `Dtilde f`.
    pub fn smear(&self, f: &[C64]) -> SolutionCoeffs {
        self.basis.smear(f)
    }

    /// Site tensor to mode-coordinate tensor, slot by slot.
    pub fn to_modes(&self, t: &Tensor<C64>) -> Tensor<C64> {
        t.map_slots(&self.coeff)
    }

    /// Mode-coordinate tensor to site values, slot by slot.
    pub fn to_sites(&self, t: &Tensor<C64>) -> Tensor<C64> {
        t.map_slots(&self.eval)
    }

    fn embed(&self, t: &Tensor<C64>, negative: bool) -> Tensor<C64> {
        let k = self.modes;
        let m = Array2::from_shape_fn((2 * k, k), |(a, b)| {
            let hit = if negative { a == b + k } else { a == b };
            if hit {
                C64::one()
            } else {
                C64::zero()
            }
        });
        t.map_slots(&m)
    }

    /// Components of a mode tensor with slot `i` restricted to the negative
    /// part when `negative[i]`, positive otherwise.
    fn project(&self, t: &Tensor<C64>, negative: &[bool]) -> Tensor<C64> {
        let k = self.modes;
        let mut src = vec![0; t.rank()];
        Tensor::from_fn(k, t.rank(), |idx| {
            for (slot, (&i, &neg)) in idx.iter().zip(negative).enumerate() {
                src[slot] = if neg { i + k } else { i };
            }
            *t.get(&src)
        })
    }

    fn contract_loop(&self, t: &Tensor<C64>) -> Tensor<C64> {
        t.contract_first_pair(&self.bilinear)
    }
}

/// Vacuum amplitude and symmetric n-particle amplitudes in positive-frequency
/// mode coordinates, i.e. the solution parts of the state's test functions.
#[derive(Debug, Clone, PartialEq)]
pub struct StateAmplitudes {
    pub vacuum: C64,
    /// `particles[n - 1]` has rank `n` over the modes.
    pub particles: Vec<Tensor<C64>>,
}

impl StateAmplitudes {
    pub fn vacuum_state(modes: usize, max_particles: usize) -> Self {
        Self { vacuum: C64::one(), particles: (1..=max_particles).map(|n| Tensor::zeros(modes, n)).collect() }
    }

    pub fn max_particles(&self) -> usize {
        self.particles.len()
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { vacuum: self.vacuum * s, particles: self.particles.iter().map(|t| t.scale(&s)).collect() }
    }

    /// Amplitude of particle number `n` as a tensor (rank 0 for the vacuum).
    pub fn component(&self, n: usize) -> Tensor<C64> {
        if n == 0 {
            Tensor::scalar(self.vacuum)
        } else {
            self.particles[n - 1].clone()
        }
    }

    fn flat(&self) -> Vec<C64> {
        let mut v = vec![self.vacuum];
        for t in &self.particles {
            v.extend_from_slice(t.data());
        }
        v
    }

    /// Lattice test functions `f_n`, symmetric and purely positive frequency.
    pub fn test_functions(&self, space: &ModeSpace) -> Vec<Tensor<C64>> {
        let mut out = vec![Tensor::scalar(self.vacuum)];
        out.extend(self.particles.iter().map(|t| t.map_slots(&space.lift)));
        out
    }
}

/// `|b - e^{i theta} a| / |a|` with `theta = arg <a, b>`, over all components.
/// Both states must have the same particle cap.
pub fn aligned_relative_error(a: &StateAmplitudes, b: &StateAmplitudes) -> f64 {
    let (x, y) = (a.flat(), b.flat());
    assert_eq!(x.len(), y.len(), "states must share the particle cap");
    let overlap: C64 = x.iter().zip(&y).map(|(p, q)| p.conj() * q).sum();
    let phase = if overlap.norm() > 0.0 { overlap / overlap.norm() } else { C64::one() };
    let diff: f64 = x.iter().zip(&y).map(|(p, q)| (q - p * phase).norm_sqr()).sum();
    let norm: f64 = x.iter().map(|p| p.norm_sqr()).sum();
    (diff / norm).sqrt()
}

fn factorial(n: usize) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, k| acc * BigInt::from(k))
}

fn binomial(n: usize, k: usize) -> BigInt {
    factorial(n) / (factorial(k) * factorial(n - k))
}

/// All perfect matchings of `items`, each pair ordered `(smaller, larger)`.
pub fn pairings(items: &[usize]) -> Vec<Vec<(usize, usize)>> {
    if items.is_empty() {
        return vec![Vec::new()];
    }
    if items.len() % 2 == 1 {
        return Vec::new();
    }
    let first = items[0];
    let mut out = Vec::new();
    for k in 1..items.len() {
        let rest: Vec<usize> = items[1..].iter().enumerate().filter(|&(i, _)| i + 1 != k).map(|(_, &v)| v).collect();
        for mut tail in pairings(&rest) {
            tail.insert(0, (first, items[k]));
            out.push(tail);
        }
    }
    out
}

/// One term of the expanded smeared sum: pairs of integration variables
/// joined by a propagator, and legs joining variable `x` to external
/// point `y`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FockTerm {
    pub pairs: Vec<(usize, usize)>,
    pub legs: Vec<(usize, usize)>,
}

/// Every term produced for output degree `s` from a symmetric kernel of
/// degree `r`: a choice of `s` leg variables, a perfect matching of the
/// others, and an assignment of leg variables to external points.
pub fn fock_terms(s: usize, r: usize) -> Result<Vec<FockTerm>, ReconstructError> {
    if s > r || (r - s) % 2 == 1 {
        return Err(ReconstructError::Parity { s, r });
    }
    let mut out = Vec::new();
    for mask in 0u32..(1 << r) {
        if mask.count_ones() as usize != s {
            continue;
        }
        let legs: Vec<usize> = (0..r).filter(|&i| mask & (1 << i) != 0).collect();
        let rest: Vec<usize> = (0..r).filter(|&i| mask & (1 << i) == 0).collect();
        for pairs in pairings(&rest) {
            for perm in permutations(s) {
                let legs = legs.iter().zip(&perm).map(|(&x, &y)| (x, y)).collect();
                out.push(FockTerm { pairs: pairs.clone(), legs });
            }
        }
    }
    Ok(out)
}

/// Multiplicity of the canonical term (pairs `(0,1), (2,3), ...`, legs
/// `r-s+l -> l`) when the expanded sum is integrated against a symmetric
/// kernel with a symmetric propagator: the number of enumerated terms, each
/// of which relabels to the canonical one.
pub fn combinatorial_factor(s: usize, r: usize) -> Result<BigRational, ReconstructError> {
    let terms = fock_terms(s, r)?;
    debug_assert!(terms.iter().all(|t| {
        let mut seen = vec![false; r];
        let mut ys = vec![false; s];
        t.pairs.iter().all(|&(a, b)| a < b && !core::mem::replace(&mut seen[a], true) && !core::mem::replace(&mut seen[b], true))
            && t.legs.iter().all(|&(x, y)| !core::mem::replace(&mut seen[x], true) && !core::mem::replace(&mut ys[y], true))
    }));
    Ok(BigRational::from_integer(BigInt::from(terms.len())))
}

/// The closed-form product quoted for the same factor:
/// `s! * binom(r, s) * 2^(s-r) * (r-s)! / ((r-s)/2)!`.
pub fn quoted_closed_form(s: usize, r: usize) -> Result<BigRational, ReconstructError> {
    if s > r || (r - s) % 2 == 1 {
        return Err(ReconstructError::Parity { s, r });
    }
    let num = factorial(s) * binomial(r, s) * factorial(r - s);
    let den = factorial((r - s) / 2) * (BigInt::one() << (r - s));
    Ok(BigRational::new(num, den))
}

/// Upper triangular system relating the solution parts of the symmetrized
/// amplitude products to the components of the star exponential.
#[derive(Debug, Clone)]
pub struct TriangularSystem {
    rmax: usize,
    c: Vec<Vec<BigRational>>,
    d: Vec<Vec<BigRational>>,
}

impl TriangularSystem {
    pub fn new(rmax: usize) -> Self {
        let mut c = vec![vec![BigRational::zero(); rmax + 1]; rmax + 1];
        for s in 0..=rmax {
            for r in (s..=rmax).step_by(2) {
                c[s][r] = combinatorial_factor(s, r).expect("parity checked by construction");
            }
        }
        let mut d = vec![vec![BigRational::zero(); rmax + 1]; rmax + 1];
        for r in 0..=rmax {
            d[r][r] = BigRational::one() / c[r][r].clone();
            for s in (0..r).rev() {
                let acc = (s + 1..=r).fold(BigRational::zero(), |acc, t| acc + c[s][t].clone() * d[t][r].clone());
                d[s][r] = -acc / c[s][s].clone();
            }
        }
        Self { rmax, c, d }
    }

    pub fn rmax(&self) -> usize {
        self.rmax
    }

    pub fn c(&self, s: usize, r: usize) -> &BigRational {
        &self.c[s][r]
    }

    pub fn d(&self, s: usize, r: usize) -> &BigRational {
        &self.d[s][r]
    }

    /// `C * C^{-1} = 1` in exact arithmetic.
    pub fn inverse_is_exact(&self) -> bool {
        (0..=self.rmax).all(|i| {
            (0..=self.rmax).all(|j| {
                let v = (0..=self.rmax).fold(BigRational::zero(), |acc, k| acc + self.c[i][k].clone() * self.d[k][j].clone());
                v == if i == j { BigRational::one() } else { BigRational::zero() }
            })
        })
    }
}

fn to_c64(r: &BigRational) -> C64 {
    C64::new(r.to_f64().unwrap_or(f64::NAN), 0.0)
}

fn factorial_f64(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Quasifree reference functional: truncated part `D+` in degree two only,
/// exponentiated up to `cap`.
pub fn quasifree_functional(space: &ModeSpace, cap: usize) -> Result<Functional<C64>, ReconstructError> {
    let mut wt = Functional::zero(cap, space.weights.clone());
    if cap >= 2 {
        let n = space.sites();
        wt.set_component(2, Tensor::from_fn(n, 2, |i| space.dplus[[i[0], i[1]]]));
    }
    Ok(wt.exp()?)
}

/// Wightman functional of the state, normalized to unit degree-zero part,
/// together with the squared norm before normalization.
///
/// Uses the chain rule for the quasifree reference: only insertion blocks of
/// one or two points survive, so the cap needed is just the output degree.
pub fn wightman_from_state(
    space: &ModeSpace,
    state: &StateAmplitudes,
    cap: usize,
) -> Result<(Functional<C64>, f64), ReconstructError> {
    let n_sites = space.sites();
    let fs = state.test_functions(space);
    let w = &space.weights;
    let pair_kernel = Array2::from_shape_fn((n_sites, n_sites), |(a, b)| w[a] * w[b] * space.dplus[[a, b]]);
    let left_leg = Array2::from_shape_fn((n_sites, n_sites), |(y, x)| w[x] * space.dplus[[x, y]]);
    let right_leg = Array2::from_shape_fn((n_sites, n_sites), |(y, x)| w[x] * space.dplus[[y, x]]);

    let mut raw: Vec<Tensor<C64>> = (0..=cap).map(|s| Tensor::zeros(n_sites, s)).collect();
    for (n, fl) in fs.iter().enumerate() {
        let fl = fl.conj();
        for (j, fr) in fs.iter().enumerate() {
            let t = fl.outer(fr);
            for partition in set_partitions(n + j) {
                if partition.iter().any(|b| b.len() > 2) {
                    continue;
                }
                let singles: Vec<usize> = partition.iter().filter(|b| b.len() == 1).map(|b| b[0]).collect();
                if singles.len() > cap {
                    continue;
                }
                let pairs: Vec<(usize, usize)> = partition.iter().filter(|b| b.len() == 2).map(|b| (b[0], b[1])).collect();
                let mut order: Vec<usize> = pairs.iter().flat_map(|&(a, b)| [a, b]).collect();
                order.extend(&singles);
                let mut cur = t.permute(&order);
                for _ in &pairs {
                    cur = cur.contract_first_pair(&pair_kernel);
                }
                for (slot, &i) in singles.iter().enumerate() {
                    cur = cur.map_slot(slot, if i < n { &left_leg } else { &right_leg });
                }
                let s = singles.len();
                raw[s] = raw[s].add(&cur);
            }
        }
    }
    let mut g = Functional::zero(cap, space.weights.clone());
    for (s, t) in raw.into_iter().enumerate() {
        g.set_component(s, t.symmetrize().scale(&C64::new(factorial_f64(s), 0.0)));
    }
    let norm2 = g.scalar_part().re;
    let w_ref = quasifree_functional(space, cap)?;
    let w_prime = w_ref.star(&g)?.scale(&C64::new(1.0 / norm2, 0.0));
    Ok((w_prime, norm2))
}

/// `exp(log W' - log W)` after checking that the difference of truncated
/// functionals is real and symmetric in every degree.
pub fn lhs_functional(w_prime: &Functional<C64>, w: &Functional<C64>) -> Result<Functional<C64>, ReconstructError> {
    let delta = w_prime.truncate()?.sub(&w.truncate()?)?;
    let scale = delta.max_modulus().max(1.0);
    for n in 1..=delta.cap() {
        let t = delta.component(n);
        let imag = t.data().iter().map(|v| v.im.abs()).fold(0.0, f64::max);
        let deviation = imag.max(t.asymmetry());
        if deviation > 1e-9 * scale {
            return Err(ReconstructError::CcrIncompatible { degree: n, deviation });
        }
    }
    Ok(delta.exp()?)
}

/// Solution parts `Dtilde^{(r)} z_r` of the symmetrized amplitude products
/// `z_r = Sym sum_n conj(f_n) (x) f_{r-n}`, in mode coordinates.
pub fn amplitude_products(space: &ModeSpace, state: &StateAmplitudes) -> Vec<Tensor<C64>> {
    let nmax = state.max_particles();
    (0..=2 * nmax)
        .map(|r| {
            let mut acc = Tensor::zeros(2 * space.modes, r);
            for n in r.saturating_sub(nmax)..=r.min(nmax) {
                let neg = space.embed(&state.component(n).conj(), true);
                let pos = space.embed(&state.component(r - n), false);
                acc = acc.add(&neg.outer(&pos));
            }
            acc.symmetrize()
        })
        .collect()
}

/// Star exponential predicted from the amplitudes:
/// `E_s = sum_r c_{s,r} (loops)^{(r-s)/2} Dtilde^{(r)} z_r`, at sites.
pub fn forward_map(space: &ModeSpace, state: &StateAmplitudes, cap: usize) -> Functional<C64> {
    let z = amplitude_products(space, state);
    let system = TriangularSystem::new(z.len() - 1);
    let mut e = Functional::zero(cap, space.weights.clone());
    for s in 0..=cap.min(z.len() - 1) {
        let mut acc = Tensor::zeros(2 * space.modes, s);
        for r in (s..z.len()).step_by(2) {
            let mut t = z[r].clone();
            for _ in 0..(r - s) / 2 {
                t = space.contract_loop(&t);
            }
            acc = acc.add(&t.scale(&to_c64(system.c(s, r))));
        }
        e.set_component(s, space.to_sites(&acc));
    }
    e
}

/// Propagator on the external legs and loops of the expanded smeared sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LegKernel {
    /// `D+` on loops, `D+` on legs from the conjugated amplitude and `D-` on
    /// legs from the amplitude.
    Frequency,
    /// `Dtilde` everywhere.
    Symmetric,
}

/// Literal expansion: for every split `conj(f_n) (x) f_{r-n}`, every choice
/// of leg variables, matching of the rest and leg assignment, integrate the
/// propagator product against the amplitudes. Independent of the
/// combinatorial factor.
pub fn expanded_sum(space: &ModeSpace, state: &StateAmplitudes, cap: usize, kernel: LegKernel) -> Functional<C64> {
    let n_sites = space.sites();
    let w = &space.weights;
    let nmax = state.max_particles();
    let fs = state.test_functions(space);
    let (loop_kernel, plus_leg, minus_leg) = match kernel {
        LegKernel::Frequency => (
            Array2::from_shape_fn((n_sites, n_sites), |(a, b)| w[a] * w[b] * space.dplus[[a, b]]),
            Array2::from_shape_fn((n_sites, n_sites), |(y, x)| w[x] * space.dplus[[x, y]]),
            Array2::from_shape_fn((n_sites, n_sites), |(y, x)| w[x] * space.dplus[[y, x]]),
        ),
        LegKernel::Symmetric => {
            let leg = Array2::from_shape_fn((n_sites, n_sites), |(y, x)| w[x] * space.dtilde[[x, y]]);
            (Array2::from_shape_fn((n_sites, n_sites), |(a, b)| w[a] * w[b] * space.dtilde[[a, b]]), leg.clone(), leg)
        }
    };
    let mut raw: Vec<Tensor<C64>> = (0..=cap).map(|s| Tensor::zeros(n_sites, s)).collect();
    for r in 0..=2 * nmax {
        for n in r.saturating_sub(nmax)..=r.min(nmax) {
            let t = fs[n].conj().outer(&fs[r - n]);
            for s in (r % 2..=r.min(cap)).step_by(2) {
                for mask in 0u32..(1 << r) {
                    if mask.count_ones() as usize != s {
                        continue;
                    }
                    let legs: Vec<usize> = (0..r).filter(|&i| mask & (1 << i) != 0).collect();
                    let rest: Vec<usize> = (0..r).filter(|&i| mask & (1 << i) == 0).collect();
                    for pairs in pairings(&rest) {
                        let mut order: Vec<usize> = pairs.iter().flat_map(|&(a, b)| [a, b]).collect();
                        order.extend(&legs);
                        let mut cur = t.permute(&order);
                        for _ in &pairs {
                            cur = cur.contract_first_pair(&loop_kernel);
                        }
                        for (slot, &i) in legs.iter().enumerate() {
                            cur = cur.map_slot(slot, if i < n { &plus_leg } else { &minus_leg });
                        }
                        raw[s] = raw[s].add(&cur);
                    }
                }
            }
        }
    }
    let mut e = Functional::zero(cap, space.weights.clone());
    for (s, t) in raw.into_iter().enumerate() {
        // Summing over leg assignments is s! times the symmetrization.
        e.set_component(s, t.symmetrize().scale(&C64::new(factorial_f64(s), 0.0)));
    }
    e
}

/// Inverts the triangular system: `Dtilde^{(s)} z_s = sum_r d_{s,r}
/// (loops)^{(r-s)/2} E_r`, in mode coordinates.
pub fn solve_z(space: &ModeSpace, e: &Functional<C64>, system: &TriangularSystem) -> Vec<Tensor<C64>> {
    let rmax = e.cap().min(system.rmax());
    let modes: Vec<Tensor<C64>> = (0..=rmax).map(|r| space.to_modes(e.component(r))).collect();
    (0..=rmax)
        .map(|s| {
            let mut acc = Tensor::zeros(2 * space.modes, s);
            for r in (s..=rmax).step_by(2) {
                let mut t = modes[r].clone();
                for _ in 0..(r - s) / 2 {
                    t = space.contract_loop(&t);
                }
                acc = acc.add(&t.scale(&to_c64(system.d(s, r))));
            }
            acc
        })
        .collect()
}

/// Which extraction was used.
#[derive(Debug, Clone, PartialEq)]
pub enum Branch {
    /// Nonzero vacuum overlap; its amplitude is taken real positive.
    VacuumOverlap,
    /// Vanishing vacuum overlap; amplitudes are read off the mixed-frequency
    /// part of the first nonvanishing product of degree `leading`, with the
    /// phase fixed at `reference`.
    Shifted { leading: usize, reference: Vec<usize> },
}

#[derive(Debug, Clone)]
pub struct Recovery {
    pub state: StateAmplitudes,
    pub branch: Branch,
}

/// Relative threshold separating exact zeros from rounding noise.
pub const DETECTION_THRESHOLD: f64 = 1e-8;

/// Amplitudes up to `max_particles` from the solution parts of the
/// amplitude products.
pub fn recover_f(space: &ModeSpace, z: &[Tensor<C64>], max_particles: usize) -> Result<Recovery, ReconstructError> {
    let k = space.modes;
    let zmax = z.iter().map(Tensor::max_modulus).fold(0.0, f64::max);
    if zmax == 0.0 {
        return Err(ReconstructError::Indistinguishable);
    }
    let thr = DETECTION_THRESHOLD * zmax;
    let mut particles: Vec<Tensor<C64>> = (1..=max_particles).map(|n| Tensor::zeros(k, n)).collect();
    let z0 = z[0].data()[0].re;
    if z0 > thr {
        let f0 = z0.sqrt();
        for n in 1..=max_particles.min(z.len() - 1) {
            particles[n - 1] = space.project(&z[n], &vec![false; n]).scale(&C64::new(1.0 / f0, 0.0));
        }
        return Ok(Recovery { state: StateAmplitudes { vacuum: C64::new(f0, 0.0), particles }, branch: Branch::VacuumOverlap });
    }
    let leading = (1..z.len()).find(|&r| z[r].max_modulus() > thr).ok_or(ReconstructError::Indistinguishable)?;
    if leading % 2 == 1 {
        return Err(ReconstructError::OddLeadingDegree(leading));
    }
    let m = leading / 2;
    let mixed = |n: usize| {
        let mut pattern = vec![true; m];
        pattern.extend(vec![false; n]);
        space.project(&z[m + n], &pattern)
    };
    let ratio = |n: usize| factorial_f64(m + n) / (factorial_f64(m) * factorial_f64(n));
    let diag = mixed(m);
    let mut best = (0.0, vec![0; m]);
    let mut idx = vec![0; m];
    let mut full = vec![0; 2 * m];
    for flat in 0..k.pow(m as u32) {
        let mut rem = flat;
        for v in idx.iter_mut().rev() {
            *v = rem % k;
            rem /= k;
        }
        full[..m].copy_from_slice(&idx);
        full[m..].copy_from_slice(&idx);
        let v = diag.get(&full).re;
        if v > best.0 {
            best = (v, idx.clone());
        }
    }
    if best.0 <= DETECTION_THRESHOLD * diag.max_modulus().max(thr) {
        return Err(ReconstructError::NoReference);
    }
    let reference = best.1;
    let anchor = (best.0 * ratio(m)).sqrt();
    for n in m..=max_particles.min(z.len() - 1 - m) {
        let mx = mixed(n);
        let fixed = Tensor::from_fn(k, n, |x| {
            let mut i = reference.clone();
            i.extend_from_slice(x);
            *mx.get(&i)
        });
        particles[n - 1] = fixed.scale(&C64::new(ratio(n) / anchor, 0.0));
    }
    Ok(Recovery {
        state: StateAmplitudes { vacuum: C64::zero(), particles },
        branch: Branch::Shifted { leading, reference },
    })
}

/// Full pipeline from a state's Wightman functional back to its amplitudes.
pub fn reconstruct(space: &ModeSpace, w_prime: &Functional<C64>, max_particles: usize) -> Result<Recovery, ReconstructError> {
    let cap = w_prime.cap();
    let w = quasifree_functional(space, cap)?;
    let e = lhs_functional(w_prime, &w)?;
    let system = TriangularSystem::new(cap);
    let z = solve_z(space, &e, &system);
    recover_f(space, &z, max_particles)
}

/// Symmetric amplitude from a full tensor of samples.
pub fn symmetric_amplitude(modes: usize, rank: usize, mut sample: impl FnMut() -> C64) -> Tensor<C64> {
    Tensor::from_fn(modes, rank, |_| sample()).symmetrize()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{LatticeParams, LatticeSpacetime};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn space(nx: usize) -> ModeSpace {
        ModeSpace::new(&LatticeSpacetime::new(LatticeParams::flat(2, nx, 0.4, 1.0, 0.9)).unwrap()).unwrap()
    }

    fn rand_c(rng: &mut ChaCha8Rng) -> C64 {
        C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    }

    fn random_state(k: usize, present: &[usize], vacuum: C64, rng: &mut ChaCha8Rng) -> StateAmplitudes {
        let nmax = *present.iter().max().unwrap_or(&1);
        let mut st = StateAmplitudes { vacuum, particles: (1..=nmax).map(|n| Tensor::zeros(k, n)).collect() };
        for &n in present {
            st.particles[n - 1] = symmetric_amplitude(k, n, || rand_c(rng));
        }
        st
    }

    #[test]
    fn lift_is_positive_frequency_with_unit_coefficient() {
        let sp = space(3);
        for i in 0..3 {
            let mut a = vec![C64::zero(); 3];
            a[i] = C64::one();
            let c = sp.smear(&sp.positive_test_function(&a));
            for (j, v) in c.0.iter().enumerate() {
                let expect = if j == i { 1.0 } else { 0.0 };
                assert!((v - expect).norm() < 1e-12, "mode {i} coefficient {j}: {v}");
            }
        }
    }

    #[test]
    fn loop_bilinear_reproduces_dtilde() {
        let sp = space(2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f: Vec<C64> = (0..4).map(|_| rand_c(&mut rng)).collect();
        let g: Vec<C64> = (0..4).map(|_| rand_c(&mut rng)).collect();
        let (cf, cg) = (sp.smear(&f), sp.smear(&g));
        let via_modes: C64 = (0..4).flat_map(|a| (0..4).map(move |b| (a, b))).map(|(a, b)| cf.0[a] * sp.bilinear[[a, b]] * cg.0[b]).sum();
        let w = sp.weights();
        let direct: C64 = (0..4).flat_map(|a| (0..4).map(move |b| (a, b))).map(|(a, b)| f[a] * w[a] * sp.dtilde[[a, b]] * w[b] * g[b]).sum();
        assert!((via_modes - direct).norm() < 1e-12);
    }

    #[test]
    fn factor_golden_values() {
        let table = [(0, 0, 1), (2, 2, 2), (0, 2, 1), (2, 4, 12), (0, 4, 3), (4, 4, 24), (1, 3, 3), (1, 1, 1)];
        for (s, r, v) in table {
            assert_eq!(combinatorial_factor(s, r).unwrap(), BigRational::from_integer(v.into()), "c({s},{r})");
        }
        assert!(matches!(combinatorial_factor(1, 2), Err(ReconstructError::Parity { .. })));
        // The quoted closed form differs by 2^((r-s)/2) once loops appear.
        for (s, r) in [(0, 2), (2, 4), (0, 4), (1, 5)] {
            let ratio = combinatorial_factor(s, r).unwrap() / quoted_closed_form(s, r).unwrap();
            assert_eq!(ratio, BigRational::from_integer(BigInt::one() << ((r - s) / 2)));
        }
        assert_eq!(combinatorial_factor(3, 3).unwrap(), quoted_closed_form(3, 3).unwrap());
    }

    #[test]
    fn triangular_inverse_is_exact() {
        let sys = TriangularSystem::new(8);
        assert!(sys.inverse_is_exact());
        assert!(sys.c(1, 2).is_zero() && sys.c(3, 2).is_zero());
    }

    #[test]
    fn vacuum_maps_to_unit() {
        let sp = space(2);
        let st = StateAmplitudes::vacuum_state(2, 2);
        let e = forward_map(&sp, &st, 4);
        assert!(e.sub(&Functional::unit(4, sp.weights.clone())).unwrap().max_modulus() < 1e-14);
        let (w, norm2) = wightman_from_state(&sp, &st, 4).unwrap();
        assert!((norm2 - 1.0).abs() < 1e-14);
        let q = quasifree_functional(&sp, 4).unwrap();
        assert!(w.sub(&q).unwrap().max_modulus() < 1e-14);
        assert!(lhs_functional(&w, &q).unwrap().sub(&Functional::unit(4, sp.weights.clone())).unwrap().max_modulus() < 1e-12);
    }

    #[test]
    fn one_particle_forward_map_by_hand() {
        let sp = space(2);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let st = random_state(2, &[1], C64::zero(), &mut rng);
        let e = forward_map(&sp, &st, 2);
        let f = &st.particles[0];
        let norm: f64 = f.data().iter().map(|v| v.norm_sqr()).sum();
        assert!((e.component(0).data()[0] - norm).norm() < 1e-12);
        // E_2 = c_{2,2} Sym(Dtilde conj f (x) Dtilde f).
        let fl = sp.positive_test_function(f.data());
        let conj_fl: Vec<C64> = fl.iter().map(|v| v.conj()).collect();
        let a = sp.basis.evaluate(&sp.smear(&conj_fl));
        let b = sp.basis.evaluate(&sp.smear(&fl));
        let expect = Tensor::from_fn(4, 2, |i| a[i[0]] * b[i[1]]).symmetrize().scale(&C64::new(2.0, 0.0));
        assert!(e.component(2).sub(&expect).max_modulus() < 1e-12);
    }

    #[test]
    fn frequency_and_symmetric_expansions_agree_with_factor() {
        let sp = space(2);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let st = random_state(2, &[1, 2], rand_c(&mut rng), &mut rng);
        let fwd = forward_map(&sp, &st, 4);
        let freq = expanded_sum(&sp, &st, 4, LegKernel::Frequency);
        let sym = expanded_sum(&sp, &st, 4, LegKernel::Symmetric);
        let scale = fwd.max_modulus();
        assert!(freq.sub(&sym).unwrap().max_modulus() <= 1e-10 * scale);
        assert!(fwd.sub(&sym).unwrap().max_modulus() <= 1e-10 * scale);
    }

    #[test]
    fn state_functional_matches_direct_insertions() {
        let sp = space(2);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let st = random_state(2, &[1, 2], rand_c(&mut rng), &mut rng);
        let cap = 2;
        let (w_prime, norm2) = wightman_from_state(&sp, &st, cap).unwrap();
        let big = quasifree_functional(&sp, cap + 4).unwrap();
        let fs = st.test_functions(&sp);
        let mut direct = Functional::zero(cap, sp.weights.clone());
        for fl in &fs {
            let left = big.derive_left(&fl.conj()).unwrap();
            for fr in &fs {
                let both = left.derive_right(fr).unwrap();
                let lowered = both.restrict(both.cap().min(cap));
                let mut padded = Functional::zero(cap, sp.weights.clone());
                for s in 0..=lowered.cap() {
                    padded.set_component(s, lowered.component(s).clone());
                }
                direct = direct.add(&padded).unwrap();
            }
        }
        assert!((direct.scalar_part().re - norm2).abs() < 1e-12 * norm2);
        let direct = direct.scale(&C64::new(1.0 / norm2, 0.0));
        assert!(direct.sub(&w_prime).unwrap().max_modulus() < 1e-12);
        assert!(w_prime.is_hermitian(1e-12));
    }

    #[test]
    fn round_trip_both_branches() {
        let sp = space(2);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for (present, vac) in [(&[1usize, 2][..], 0.7), (&[2][..], 0.0), (&[1, 2][..], 0.0), (&[1][..], 0.0)] {
            let st = random_state(2, present, C64::new(vac, 0.0), &mut rng);
            let cap = 2 * st.max_particles();
            let (w_prime, norm2) = wightman_from_state(&sp, &st, cap).unwrap();
            let rec = reconstruct(&sp, &w_prime, st.max_particles()).unwrap();
            let err = aligned_relative_error(&st.scale(C64::new(1.0 / norm2.sqrt(), 0.0)), &rec.state);
            assert!(err < 1e-8, "{present:?} vacuum {vac}: {err}");
            assert_eq!(matches!(rec.branch, Branch::VacuumOverlap), vac > 0.0);
        }
    }

    #[test]
    fn even_states_have_no_odd_components() {
        let sp = space(2);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let st = random_state(2, &[2], C64::new(0.5, 0.0), &mut rng);
        let (w_prime, _) = wightman_from_state(&sp, &st, 4).unwrap();
        let e = lhs_functional(&w_prime, &quasifree_functional(&sp, 4).unwrap()).unwrap();
        assert!(e.component(1).max_modulus() < 1e-12 && e.component(3).max_modulus() < 1e-12);
    }

    #[test]
    fn asymmetric_truncation_is_rejected() {
        let sp = space(2);
        let q = quasifree_functional(&sp, 3).unwrap();
        let mut bad = q.truncate().unwrap();
        let mut t = Tensor::zeros(4, 3);
        *t.get_mut(&[0, 1, 2]) = C64::new(0.1, 0.0);
        bad.set_component(3, t);
        let w_bad = bad.exp().unwrap();
        assert!(matches!(lhs_functional(&w_bad, &q), Err(ReconstructError::CcrIncompatible { degree: 3, .. })));
    }
}
