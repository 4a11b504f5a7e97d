//! Fundamental solutions and two-point functions of the free field:
//! retarded/advanced Green functions, the commutator function `D`, the
//! quasifree two-point function `D+` built from a positive-frequency mode
//! basis, its symmetric part, and the first-order expansion of `D-` in the
//! metric perturbation.

use alloc::vec;
use alloc::vec::Vec;

use ndarray::Array2;
use num_traits::{Float, Zero};

use crate::lattice::{LatticeError, LatticeParams, LatticeSpacetime, Site};
use crate::scalar::{Real, C64};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PropagatorError {
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error("mode {0} has zero frequency; a positive mass is required")]
    ZeroFrequency(usize),
    #[error("Im D+ deviates from D/2 by {0:e} (relative)")]
    Inconsistent(f64),
}

/// Forward-steps the discrete field equation multiplied by the conformal
/// factor, `box_0 G + m^2 (1 + eps h) G = delta / (dt dx)`, from zero data
/// before the source slice. Column `y` of the result is `Gr(., y)`.
pub fn green_retarded<R: Real>(l: &LatticeSpacetime) -> Array2<R> {
    let (nt, nx, n) = (l.nt(), l.nx(), l.len());
    let dt = R::from_param(l.dt());
    let dx = R::from_param(l.dx());
    let mass = R::from_param(l.mass());
    let eps = R::from_param(l.epsilon());
    let ratio = dt.clone() / dx.clone();
    let courant2 = ratio.clone() * ratio.clone();
    let two = R::from_int(2);
    // dt^2 m^2 (1 + eps h) per site.
    let pot: Vec<R> = l
        .h()
        .iter()
        .map(|&h| {
            let conf = R::one() + eps.clone() * R::from_param(h);
            dt.clone() * dt.clone() * mass.clone() * mass.clone() * conf
        })
        .collect();

    let mut gr = Array2::<R>::zeros((n, n));
    let mut prev = vec![R::zero(); nx];
    let mut cur = vec![R::zero(); nx];
    let mut next = vec![R::zero(); nx];
    for y in 0..n {
        let (ts, xs) = (y / nx, y % nx);
        if ts + 1 >= nt {
            continue;
        }
        prev.iter_mut().for_each(|v| *v = R::zero());
        cur.iter_mut().for_each(|v| *v = R::zero());
        cur[xs] = ratio.clone();
        gr[[(ts + 1) * nx + xs, y]] = ratio.clone();
        for t in ts + 1..nt - 1 {
            // Only sites within `t - ts` of the source can be nonzero.
            let reach = (t - ts).min(nx);
            for (x, slot) in next.iter_mut().enumerate() {
                let dist = x.abs_diff(xs).min(nx - x.abs_diff(xs));
                if dist > reach {
                    *slot = R::zero();
                    continue;
                }
                let xp = (x + 1) % nx;
                let xm = (x + nx - 1) % nx;
                let lap = cur[xp].clone() - two.clone() * cur[x].clone() + cur[xm].clone();
                *slot = two.clone() * cur[x].clone() - prev[x].clone() + courant2.clone() * lap
                    - pot[t * nx + x].clone() * cur[x].clone();
            }
            for (x, v) in next.iter().enumerate() {
                gr[[(t + 1) * nx + x, y]] = v.clone();
            }
            core::mem::swap(&mut prev, &mut cur);
            core::mem::swap(&mut cur, &mut next);
        }
    }
    gr
}

/// Steps a solution forward from its values on slices 0 and 1.
fn evolve(l: &LatticeSpacetime, field: &mut [C64]) {
    let (nt, nx) = (l.nt(), l.nx());
    let courant2 = (l.dt() / l.dx()).powi(2);
    let m2dt2 = l.mass() * l.mass() * l.dt() * l.dt();
    for t in 1..nt - 1 {
        for x in 0..nx {
            let s = t * nx + x;
            let xp = t * nx + (x + 1) % nx;
            let xm = t * nx + (x + nx - 1) % nx;
            let lap = field[xp] - field[s] * 2.0 + field[xm];
            let pot = m2dt2 * l.conformal(Site(s));
            field[s + nx] = field[s] * 2.0 - field[s - nx] + lap * courant2 - field[s] * pot;
        }
    }
}

/// Coefficients of a solution `sum_k a_k u_k + b_k conj(u_k)`, stored as
/// `[a_0..a_{K-1}, b_0..b_{K-1}]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionCoeffs(pub Vec<C64>);

impl SolutionCoeffs {
    pub fn zeros(k: usize) -> Self {
        Self(vec![C64::zero(); 2 * k])
    }
    pub fn modes(&self) -> usize {
        self.0.len() / 2
    }
    pub fn positive(&self) -> &[C64] {
        &self.0[..self.modes()]
    }
    pub fn negative(&self) -> &[C64] {
        &self.0[self.modes()..]
    }
    /// Coefficients of the complex-conjugate solution.
    pub fn conj(&self) -> Self {
        let k = self.modes();
        let mut out = Self::zeros(k);
        for i in 0..k {
            out.0[i] = self.0[k + i].conj();
            out.0[k + i] = self.0[i].conj();
        }
        out
    }
}

/// Positive-frequency plane waves fixed on the flat initial slices and
/// evolved through the perturbed region.
#[derive(Debug, Clone)]
pub struct ModeBasis {
    nx: usize,
    dt: f64,
    frequencies: Vec<f64>,
    amplitudes: Vec<f64>,
    /// `modes[k][site]`.
    modes: Vec<Vec<C64>>,
    weights: Vec<f64>,
}

impl ModeBasis {
    pub fn new(l: &LatticeSpacetime) -> Result<Self, PropagatorError> {
        let nx = l.nx();
        let mut frequencies = Vec::with_capacity(nx);
        let mut amplitudes = Vec::with_capacity(nx);
        let mut modes = Vec::with_capacity(nx);
        for k in 0..nx {
            let w = l.frequency(k);
            if !(w > 0.0) {
                return Err(PropagatorError::ZeroFrequency(k));
            }
            // Normalized so that 2 Im D+ reproduces the retarded kernel.
            let amp = Float::sqrt(l.dt() / (2.0 * l.dx() * nx as f64 * Float::sin(w * l.dt())));
            let q = l.wave_number(k);
            let mut u = vec![C64::zero(); l.len()];
            for t in 0..2 {
                for x in 0..nx {
                    u[t * nx + x] = C64::from_polar(amp, w * t as f64 * l.dt() + q * x as f64 * l.dx());
                }
            }
            evolve(l, &mut u);
            frequencies.push(w);
            amplitudes.push(amp);
            modes.push(u);
        }
        Ok(Self { nx, dt: l.dt(), frequencies, amplitudes, modes, weights: l.volume_weights() })
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }
    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }
    pub fn mode(&self, k: usize) -> &[C64] {
        &self.modes[k]
    }
    pub fn frequency(&self, k: usize) -> f64 {
        self.frequencies[k]
    }

    /// Site values of a solution given by its coefficients.
    pub fn evaluate(&self, c: &SolutionCoeffs) -> Vec<C64> {
        let k = self.len();
        let n = self.weights.len();
        (0..n)
            .map(|s| (0..k).map(|i| c.0[i] * self.modes[i][s] + c.0[k + i] * self.modes[i][s].conj()).sum())
            .collect()
    }

    /// Coefficients of a solution from its Cauchy data on slices 0 and 1.
    /// Per momentum this is a 2x2 solve between `u_k` and `conj(u_{-k})`.
    pub fn coefficients(&self, values: &[C64]) -> SolutionCoeffs {
        let nx = self.nx;
        let mut out = SolutionCoeffs::zeros(nx);
        let dft = |t: usize, k: usize| -> C64 {
            (0..nx)
                .map(|x| values[t * nx + x] * C64::from_polar(1.0, -2.0 * core::f64::consts::PI * (k * x) as f64 / nx as f64))
                .sum::<C64>()
                / nx as f64
        };
        for k in 0..nx {
            let kk = (nx - k) % nx;
            // conj(u_kk) carries the same momentum as u_k.
            let (p0, p1) = (dft(0, k), dft(1, k));
            let (w, a) = (self.frequencies[k], self.amplitudes[k]);
            let (wm, am) = (self.frequencies[kk], self.amplitudes[kk]);
            let dt_w = w * self.dt;
            let dt_wm = wm * self.dt;
            // p0 = a_k A + b_kk Am ; p1 = a_k A e^{i dt_w} + b_kk Am e^{-i dt_wm}
            let (e1, e2) = (C64::from_polar(1.0, dt_w), C64::from_polar(1.0, -dt_wm));
            let det = e2 - e1;
            out.0[k] = (p0 * e2 - p1) / (det * a);
            out.0[nx + kk] = (p1 - p0 * e1) / (det * am);
        }
        out
    }

    /// `Dtilde f` for a test function `f`, as coefficients.
    pub fn smear(&self, f: &[C64]) -> SolutionCoeffs {
        let k = self.len();
        let mut out = SolutionCoeffs::zeros(k);
        for i in 0..k {
            let (mut plus, mut minus) = (C64::zero(), C64::zero());
            for ((u, w), v) in self.modes[i].iter().zip(&self.weights).zip(f) {
                plus += u.conj() * v * *w;
                minus += u * v * *w;
            }
            out.0[i] = plus;
            out.0[k + i] = minus;
        }
        out
    }

    /// Positive and negative frequency parts.
    pub fn split(&self, c: &SolutionCoeffs) -> (SolutionCoeffs, SolutionCoeffs) {
        let k = self.len();
        let mut pos = c.clone();
        let mut neg = c.clone();
        pos.0[k..].iter_mut().for_each(|v| *v = C64::zero());
        neg.0[..k].iter_mut().for_each(|v| *v = C64::zero());
        (pos, neg)
    }

    /// Inner product induced by `Dtilde`.
    pub fn inner(&self, a: &SolutionCoeffs, b: &SolutionCoeffs) -> C64 {
        a.0.iter().zip(&b.0).map(|(x, y)| x.conj() * y).sum()
    }

    /// Complex structure `J = i (K+ - K-)`.
    pub fn complex_structure(&self, c: &SolutionCoeffs) -> SolutionCoeffs {
        let k = self.len();
        let i = C64::i();
        SolutionCoeffs(c.0.iter().enumerate().map(|(n, v)| if n < k { v * i } else { -v * i }).collect())
    }

    /// Symplectic form `Sigma(a, b) = (conj a, J b)`. With `Dtilde` as the
    /// map to solutions, `Sigma(Dtilde f, Dtilde g) = -D(f, g)`.
    pub fn symplectic(&self, a: &SolutionCoeffs, b: &SolutionCoeffs) -> C64 {
        self.inner(&a.conj(), &self.complex_structure(b))
    }
}

/// All two-point kernels over site pairs, indexed `[x, y]`.
#[derive(Debug, Clone)]
pub struct PropagatorSet {
    pub gr: Array2<f64>,
    pub ga: Array2<f64>,
    pub d: Array2<f64>,
    pub dplus: Array2<C64>,
    pub dminus: Array2<C64>,
    pub dtilde: Array2<f64>,
}

/// Default relative tolerance for identities exact in exact arithmetic.
pub const IDENTITY_TOL: f64 = 1e-10;

fn max_abs<'a>(it: impl Iterator<Item = &'a f64>) -> f64 {
    it.fold(0.0, |m, v| m.max(v.abs()))
}

impl PropagatorSet {
    pub fn build(l: &LatticeSpacetime) -> Result<Self, PropagatorError> {
        let basis = ModeBasis::new(l)?;
        Self::from_basis(l, &basis)
    }

    pub fn from_basis(l: &LatticeSpacetime, basis: &ModeBasis) -> Result<Self, PropagatorError> {
        let gr = green_retarded::<f64>(l);
        let ga = gr.t().to_owned();
        let d = &gr - &ga;
        let dplus = quasifree_two_point(basis, l.len());
        let dminus = dplus.t().to_owned();
        let dtilde = dplus.mapv(|v| 2.0 * v.re);
        let scale = max_abs(d.iter()).max(f64::MIN_POSITIVE);
        let dev = dplus.iter().zip(d.iter()).fold(0.0, |m, (p, dd)| m.max((p.im - 0.5 * dd).abs()));
        if dev / scale > IDENTITY_TOL {
            return Err(PropagatorError::Inconsistent(dev / scale));
        }
        Ok(Self { gr, ga, d, dplus, dminus, dtilde })
    }

    pub fn len(&self) -> usize {
        self.gr.nrows()
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// `D+(x, y) = sum_k u_k(x) conj(u_k(y))`.
pub fn quasifree_two_point(basis: &ModeBasis, n: usize) -> Array2<C64> {
    Array2::from_shape_fn((n, n), |(x, y)| (0..basis.len()).map(|k| basis.mode(k)[x] * basis.mode(k)[y].conj()).sum())
}

/// First-order pieces of `D-(x, y) = sum_k conj(u_k(x)) u_k(y)` in the
/// metric perturbation. `d10` perturbs the first argument and `d01` the
/// second, so `d10` is built from flat modes in `y`.
#[derive(Debug, Clone)]
pub struct DminusExpansion {
    pub d00: Array2<C64>,
    pub d01: Array2<C64>,
    pub d10: Array2<C64>,
}

impl DminusExpansion {
    /// `d00 + eps (d01 + d10)`.
    pub fn first_order(&self, eps: f64) -> Array2<C64> {
        &self.d00 + &((&self.d01 + &self.d10) * C64::new(eps, 0.0))
    }
}

/// Expands `D-` to first order in `eps` about the flat lattice: each mode
/// gains `u1 = Gr0[-m^2 h u0]`, with `Gr0` and the weights of the flat lattice.
pub fn epsilon_expand_dminus(l: &LatticeSpacetime) -> Result<DminusExpansion, PropagatorError> {
    let flat = LatticeSpacetime::with_h(LatticeParams { epsilon: 0.0, ..l.params().clone() }, l.h().to_vec())?;
    let basis = ModeBasis::new(&flat)?;
    let gr0 = green_retarded::<f64>(&flat);
    let n = flat.len();
    let w = flat.dt() * flat.dx();
    let m2 = flat.mass() * flat.mass();
    let first: Vec<Vec<C64>> = (0..basis.len())
        .map(|k| {
            let src: Vec<C64> = basis.mode(k).iter().zip(l.h()).map(|(u, &h)| -u * (m2 * h * w)).collect();
            (0..n).map(|x| (0..n).map(|y| src[y] * gr0[[x, y]]).sum()).collect()
        })
        .collect();
    let build = |a: &dyn Fn(usize, usize) -> C64, b: &dyn Fn(usize, usize) -> C64| {
        Array2::from_shape_fn((n, n), |(x, y)| (0..basis.len()).map(|k| a(k, x).conj() * b(k, y)).sum())
    };
    let zero = |k: usize, s: usize| basis.mode(k)[s];
    let one = |k: usize, s: usize| first[k][s];
    Ok(DminusExpansion { d00: build(&zero, &zero), d01: build(&zero, &one), d10: build(&one, &zero) })
}

/// Element type tag of an exported matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u32)]
pub enum Dtype {
    F64 = 1,
    C64 = 2,
}

pub const EXPORT_MAGIC: [u8; 4] = *b"YFPM";

fn header(nt: usize, nx: usize, dtype: Dtype) -> Vec<u8> {
    let mut out = Vec::with_capacity(16);
    out.extend_from_slice(&EXPORT_MAGIC);
    out.extend_from_slice(&(nt as u32).to_le_bytes());
    out.extend_from_slice(&(nx as u32).to_le_bytes());
    out.extend_from_slice(&(dtype as u32).to_le_bytes());
    out
}

/// Row-major little-endian dump with a 16-byte header
/// (magic, nt, nx, dtype as `u32`).
pub fn export_real(m: &Array2<f64>, nt: usize, nx: usize) -> Vec<u8> {
    let mut out = header(nt, nx, Dtype::F64);
    m.iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes()));
    out
}

/// As [`export_real`], with real and imaginary parts interleaved.
pub fn export_complex(m: &Array2<C64>, nt: usize, nx: usize) -> Vec<u8> {
    let mut out = header(nt, nx, Dtype::C64);
    m.iter().for_each(|v| {
        out.extend_from_slice(&v.re.to_le_bytes());
        out.extend_from_slice(&v.im.to_le_bytes());
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{CausalRelation, HProfile, KgMode, ProfileShape};
    use num_rational::BigRational;

    fn flat() -> LatticeSpacetime {
        LatticeSpacetime::new(LatticeParams::flat(12, 6, 0.1, 0.2, 1.0)).unwrap()
    }

    fn bumped(eps: f64) -> LatticeSpacetime {
        let shape = ProfileShape { amplitude: 1.0, center: 0.6, width: 0.35, center_x: Some(0.5), width_x: Some(0.5) };
        let p = LatticeParams { epsilon: eps, profile: HProfile::Bump(shape), ..LatticeParams::flat(12, 6, 0.1, 0.2, 1.0) };
        LatticeSpacetime::new(p).unwrap()
    }

    /// Lattice form of `sin(w t)/w`: spectral sum over momenta on the flat lattice.
    fn spectral_gr(l: &LatticeSpacetime, dt_steps: usize, dx_steps: usize) -> f64 {
        let nx = l.nx();
        (0..nx)
            .map(|k| {
                let w = l.frequency(k) * l.dt();
                let phase = 2.0 * core::f64::consts::PI * (k * dx_steps) as f64 / nx as f64;
                (l.dt() / l.dx()) * (w * dt_steps as f64).sin() / w.sin() * phase.cos() / nx as f64
            })
            .sum()
    }

    #[test]
    fn retarded_matches_spectral_sum() {
        let l = flat();
        let gr = green_retarded::<f64>(&l);
        for x in l.sites() {
            for y in l.sites() {
                let ((tx, xx), (ty, xy)) = (l.coords(x), l.coords(y));
                let expect = if tx > ty { spectral_gr(&l, tx - ty, (xx + l.nx() - xy) % l.nx()) } else { 0.0 };
                assert!((gr[[x.0, y.0]] - expect).abs() < 1e-12, "{x} {y}");
            }
        }
    }

    #[test]
    fn retarded_has_causal_support_and_solves_kg() {
        let l = bumped(0.3);
        let gr = green_retarded::<f64>(&l);
        for y in l.sites() {
            let col: Vec<C64> = (0..l.len()).map(|x| C64::new(gr[[x, y.0]], 0.0)).collect();
            let r = l.kg_apply(&col, KgMode::Full);
            for x in l.sites() {
                if !l.in_closed_past(y, x) {
                    assert_eq!(gr[[x.0, y.0]], 0.0);
                }
                let (tx, _) = l.coords(x);
                if tx == 0 || tx + 1 == l.nt() {
                    continue;
                }
                let expect = if x == y { 1.0 / l.volume_weight(y) } else { 0.0 };
                assert!((r[x.0].re - expect).abs() < 1e-10 * (1.0 / l.volume_weight(y)));
            }
        }
    }

    #[test]
    fn last_slice_sources_have_no_forward_cone() {
        let l = flat();
        let gr = green_retarded::<f64>(&l);
        for y in l.slice(l.nt() - 1) {
            assert!(gr.column(y.0).iter().all(|&v| v == 0.0));
        }
        assert!(l.sites().all(|s| gr[[s.0, s.0]] == 0.0));
    }

    #[test]
    fn exact_backend_agrees_with_float() {
        let l = LatticeSpacetime::new(LatticeParams::flat(6, 3, 0.5, 1.0, 0.5)).unwrap();
        let exact = green_retarded::<BigRational>(&l);
        let float = green_retarded::<f64>(&l);
        for (a, b) in exact.iter().zip(float.iter()) {
            assert!((a.to_f64() - b).abs() < 1e-14);
        }
    }

    #[test]
    fn flat_two_point_matches_mode_sum() {
        let l = flat();
        let p = PropagatorSet::build(&l).unwrap();
        let nx = l.nx();
        for x in l.sites() {
            for y in l.sites() {
                let ((tx, xx), (ty, xy)) = (l.coords(x), l.coords(y));
                let expect: C64 = (0..nx)
                    .map(|k| {
                        let w = l.frequency(k);
                        let amp2 = l.dt() / (2.0 * l.dx() * nx as f64 * (w * l.dt()).sin());
                        let ph = w * l.dt() * (tx as f64 - ty as f64)
                            + 2.0 * core::f64::consts::PI * k as f64 * (xx as f64 - xy as f64) / nx as f64;
                        C64::from_polar(amp2, ph)
                    })
                    .sum();
                assert!((p.dplus[[x.0, y.0]] - expect).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn kernel_invariants_on_perturbed_lattice() {
        let l = bumped(0.2);
        let p = PropagatorSet::build(&l).unwrap();
        let n = l.len();
        for x in 0..n {
            for y in 0..n {
                assert_eq!(p.gr[[x, y]], p.ga[[y, x]]);
                assert_eq!(p.d[[x, y]], -p.d[[y, x]]);
                assert!((p.dplus[[x, y]] - p.dplus[[y, x]].conj()).norm() < 1e-14);
                assert_eq!(p.dtilde[[x, y]], p.dtilde[[y, x]]);
                if l.causal_order(Site(x), Site(y)) == CausalRelation::Spacelike {
                    assert_eq!(p.d[[x, y]], 0.0);
                }
            }
        }
        for y in 0..n {
            let col: Vec<C64> = (0..n).map(|x| p.dplus[[x, y]]).collect();
            let row: Vec<C64> = (0..n).map(|x| p.dplus[[y, x]]).collect();
            let scale = max_abs(p.d.iter());
            for r in [l.kg_apply(&col, KgMode::Full), l.kg_apply(&row, KgMode::Full)] {
                assert!(r.iter().all(|v| v.norm() < 1e-10 * scale / (l.dt() * l.dt())));
            }
        }
    }

    #[test]
    fn flat_kernels_are_translation_invariant() {
        let l = flat();
        let p = PropagatorSet::build(&l).unwrap();
        let (nt, nx) = (l.nt(), l.nx());
        for x in l.sites() {
            for y in l.sites() {
                let ((tx, xx), (ty, xy)) = (l.coords(x), l.coords(y));
                let (sx, sy) = (l.site(tx, (xx + 1) % nx), l.site(ty, (xy + 1) % nx));
                assert_eq!(p.gr[[x.0, y.0]], p.gr[[sx.0, sy.0]]);
                assert!((p.dplus[[x.0, y.0]] - p.dplus[[sx.0, sy.0]]).norm() < 1e-13);
                if tx + 1 < nt && ty + 1 < nt {
                    let (ux, uy) = (l.site(tx + 1, xx), l.site(ty + 1, xy));
                    if ty + 2 < nt || tx <= ty {
                        assert_eq!(p.gr[[x.0, y.0]], p.gr[[ux.0, uy.0]]);
                    }
                    assert!((p.dplus[[x.0, y.0]] - p.dplus[[ux.0, uy.0]]).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn coefficients_invert_evaluation() {
        let l = bumped(0.2);
        let basis = ModeBasis::new(&l).unwrap();
        let c = SolutionCoeffs((0..2 * basis.len()).map(|i| C64::new(i as f64 * 0.3 - 1.0, (i as f64).sin())).collect());
        let back = basis.coefficients(&basis.evaluate(&c));
        assert!(c.0.iter().zip(&back.0).all(|(a, b)| (a - b).norm() < 1e-10));
    }

    #[test]
    fn frequency_split_examples() {
        let l = flat();
        let basis = ModeBasis::new(&l).unwrap();
        let k = basis.len();
        let u = basis.coefficients(basis.mode(2));
        let (pos, neg) = basis.split(&u);
        assert!((pos.0[2] - 1.0).norm() < 1e-12 && neg.0.iter().all(|v| v.norm() < 1e-12));
        let ubar: Vec<C64> = basis.mode(2).iter().map(|v| v.conj()).collect();
        let (pos, neg) = basis.split(&basis.coefficients(&ubar));
        assert!(pos.0.iter().all(|v| v.norm() < 1e-12) && (neg.0[k + 2] - 1.0).norm() < 1e-12);
        let real: Vec<C64> = (0..l.len()).map(|s| C64::new((s as f64).cos(), 0.0)).collect();
        let (pos, neg) = basis.split(&basis.smear(&real));
        let pc = pos.conj();
        assert!(pc.0.iter().zip(&neg.0).all(|(a, b)| (a - b).norm() < 1e-12));
    }

    #[test]
    fn complex_structure_and_symplectic_form() {
        let l = bumped(0.2);
        let p = PropagatorSet::build(&l).unwrap();
        let basis = ModeBasis::new(&l).unwrap();
        let n = l.len();
        let w = l.volume_weights();
        let f: Vec<C64> = (0..n).map(|s| C64::new((s as f64 * 0.7).sin(), 0.0)).collect();
        let g: Vec<C64> = (0..n).map(|s| C64::new((s as f64 * 0.3).cos(), 0.0)).collect();
        let (sf, sg) = (basis.smear(&f), basis.smear(&g));
        let jj = basis.complex_structure(&basis.complex_structure(&sf));
        assert!(jj.0.iter().zip(&sf.0).all(|(a, b)| (a + b).norm() < 1e-14));
        let pair = |m: &Array2<f64>| -> f64 {
            (0..n).map(|x| (0..n).map(|y| w[x] * w[y] * f[x].re * m[[x, y]] * g[y].re).sum::<f64>()).sum()
        };
        let d_fg = pair(&p.d);
        let dt_fg = pair(&p.dtilde);
        assert!((basis.symplectic(&sf, &sg).re + d_fg).abs() < 1e-10 * d_fg.abs().max(1.0));
        assert!((basis.inner(&sf, &sg).re - dt_fg).abs() < 1e-10 * dt_fg.abs().max(1.0));
        let lhs = basis.symplectic(&sf.conj(), &sg);
        let rhs = basis.inner(&sf, &basis.complex_structure(&sg));
        assert!((lhs - rhs).norm() < 1e-14);
    }

    #[test]
    fn dminus_expansion_is_second_order_accurate() {
        let mut c = Vec::new();
        for eps in [1e-2, 1e-3] {
            let l = bumped(eps);
            let exact = PropagatorSet::build(&l).unwrap().dminus;
            let approx = epsilon_expand_dminus(&l).unwrap().first_order(eps);
            let err = exact.iter().zip(approx.iter()).fold(0.0, |m: f64, (a, b)| m.max((a - b).norm()));
            c.push(err / (eps * eps));
        }
        assert!(c[0] > 0.0 && (c[1] / c[0] - 1.0).abs() < 0.05, "{c:?}");
    }

    #[test]
    fn expansion_vanishes_without_perturbation() {
        let e = epsilon_expand_dminus(&flat()).unwrap();
        assert!(e.d01.iter().chain(e.d10.iter()).all(|v| v.norm() == 0.0));
    }

    #[test]
    fn export_header_layout() {
        let m = Array2::from_shape_fn((2, 2), |(a, b)| (a * 2 + b) as f64);
        let bytes = export_real(&m, 1, 2);
        assert_eq!(&bytes[..4], b"YFPM");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), Dtype::F64 as u32);
        assert_eq!(bytes.len(), 16 + 4 * 8);
        assert_eq!(f64::from_le_bytes(bytes[16 + 8..16 + 16].try_into().unwrap()), 1.0);
    }
}
