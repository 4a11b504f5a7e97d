//! Discretized (1+1)-dimensional spacetime with a conformally perturbed
//! metric `(1 + eps*h) * eta`, periodic space and finite time.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use num_traits::Float;

use crate::scalar::C64;

/// Spacetime dimension. The metric perturbation is conformal, so in two
/// dimensions `sqrt|g| g^{ab} = eta^{ab}` and no derivative-of-h term survives.
pub const DIM: usize = 2;

/// Flat slices required at each temporal end.
pub const FLAT_SLICES: usize = 2;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LatticeError {
    #[error("lattice needs at least 2 time slices and 1 spatial site (got nt={nt}, nx={nx})")]
    TooSmall { nt: usize, nx: usize },
    #[error("spacings must be positive (dt={dt}, dx={dx})")]
    NonPositiveSpacing { dt: f64, dx: f64 },
    #[error("mass must be finite and non-negative (got {0})")]
    BadMass(f64),
    #[error("CFL violated: dt/dx = {0} must be < 1")]
    Cfl(f64),
    #[error("explicit stepper unstable: (dt/dx)^2 + (m_eff dt/2)^2 = {0} must be < 1")]
    Unstable(f64),
    #[error("metric perturbation must vanish on the first and last {FLAT_SLICES} slices (nonzero at slice {0})")]
    BoundarySupport(usize),
    #[error("metric degenerate: 1 + eps*h = {value} at site {site}")]
    Degenerate { site: usize, value: f64 },
    #[error("h array has {got} entries, expected {expected}")]
    ShapeMismatch { got: usize, expected: usize },
}

/// Time-major site index: `t * nx + x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Site(pub usize);

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Built-in shapes for the metric perturbation `h`.
#[derive(Debug, Clone, PartialEq)]
pub enum HProfile {
    None,
    /// Smooth compactly supported bump `A exp(1 - 1/(1 - r^2))`, `r = (t - center)/width`.
    Bump(ProfileShape),
    /// Gaussian `A exp(-r^2/2)` cut off at `|r| > 3`.
    Gaussian(ProfileShape),
}

/// Amplitude and placement of a profile. Times and lengths are physical
/// (multiples of `dt` and `dx`). Without `center_x` the profile is
/// homogeneous in space.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileShape {
    pub amplitude: f64,
    pub center: f64,
    pub width: f64,
    pub center_x: Option<f64>,
    pub width_x: Option<f64>,
}

fn bump(r: f64) -> f64 {
    if r.abs() >= 1.0 {
        0.0
    } else {
        Float::exp(1.0 - 1.0 / (1.0 - r * r))
    }
}

fn gaussian(r: f64) -> f64 {
    if r.abs() > 3.0 {
        0.0
    } else {
        Float::exp(-0.5 * r * r)
    }
}

impl HProfile {
    fn sample(&self, t: f64, x: f64, length: f64) -> f64 {
        let (shape, kernel): (&ProfileShape, fn(f64) -> f64) = match self {
            HProfile::None => return 0.0,
            HProfile::Bump(s) => (s, bump),
            HProfile::Gaussian(s) => (s, gaussian),
        };
        let mut v = shape.amplitude * kernel((t - shape.center) / shape.width);
        if let (Some(cx), Some(wx)) = (shape.center_x, shape.width_x) {
            let mut d = (x - cx) % length;
            if d < 0.0 {
                d += length;
            }
            if d > 0.5 * length {
                d -= length;
            }
            v *= kernel(d / wx);
        }
        v
    }
}

/// Parameters accepted by [`LatticeSpacetime::new`].
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeParams {
    pub nt: usize,
    pub nx: usize,
    pub dt: f64,
    pub dx: f64,
    pub mass: f64,
    pub epsilon: f64,
    pub profile: HProfile,
}

impl LatticeParams {
    pub fn flat(nt: usize, nx: usize, dt: f64, dx: f64, mass: f64) -> Self {
        Self { nt, nx, dt, dx, mass, epsilon: 0.0, profile: HProfile::None }
    }
}

/// Relation of the first site to the second.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CausalRelation {
    /// First site lies in the closed causal past of the second.
    Precedes,
    Succeeds,
    Spacelike,
    Coincident,
}

/// Which operator [`LatticeSpacetime::kg_apply`] evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KgMode {
    /// Exact `box_eps + m^2` with `box_eps = box_0 / (1 + eps*h)`.
    Full,
    /// Flat `box_0 + m^2`.
    Flat,
    /// First-order piece `box_1 = -h box_0` of `box_eps = box_0 + eps*box_1 + O(eps^2)`.
    Perturbation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatticeSpacetime {
    params: LatticeParams,
    h: Vec<f64>,
}

impl LatticeSpacetime {
    pub fn new(params: LatticeParams) -> Result<Self, LatticeError> {
        let (nt, nx) = (params.nt, params.nx);
        let length = nx as f64 * params.dx;
        let h = (0..nt * nx)
            .map(|s| params.profile.sample((s / nx) as f64 * params.dt, (s % nx) as f64 * params.dx, length))
            .collect();
        Self::with_h(params, h)
    }

    /// Builds a lattice with an explicit perturbation array (time-major).
    pub fn with_h(params: LatticeParams, h: Vec<f64>) -> Result<Self, LatticeError> {
        let LatticeParams { nt, nx, dt, dx, mass, epsilon, .. } = params;
        if nt < 2 || nx < 1 {
            return Err(LatticeError::TooSmall { nt, nx });
        }
        if !(dt > 0.0 && dx > 0.0) {
            return Err(LatticeError::NonPositiveSpacing { dt, dx });
        }
        if !(mass.is_finite() && mass >= 0.0) {
            return Err(LatticeError::BadMass(mass));
        }
        if h.len() != nt * nx {
            return Err(LatticeError::ShapeMismatch { got: h.len(), expected: nt * nx });
        }
        if dt / dx >= 1.0 {
            return Err(LatticeError::Cfl(dt / dx));
        }
        for (s, &v) in h.iter().enumerate() {
            let t = s / nx;
            if v != 0.0 && (t < FLAT_SLICES || t + FLAT_SLICES >= nt) {
                return Err(LatticeError::BoundarySupport(t));
            }
            let c = 1.0 + epsilon * v;
            if c <= 0.0 {
                return Err(LatticeError::Degenerate { site: s, value: c });
            }
        }
        let conf_max = h.iter().map(|&v| 1.0 + epsilon * v).fold(1.0, f64::max);
        let stab = (dt / dx).powi(2) + 0.25 * mass * mass * dt * dt * conf_max;
        if stab >= 1.0 {
            return Err(LatticeError::Unstable(stab));
        }
        Ok(Self { params, h })
    }

    pub fn params(&self) -> &LatticeParams {
        &self.params
    }
    pub fn nt(&self) -> usize {
        self.params.nt
    }
    pub fn nx(&self) -> usize {
        self.params.nx
    }
    pub fn dt(&self) -> f64 {
        self.params.dt
    }
    pub fn dx(&self) -> f64 {
        self.params.dx
    }
    pub fn mass(&self) -> f64 {
        self.params.mass
    }
    pub fn epsilon(&self) -> f64 {
        self.params.epsilon
    }
    pub fn len(&self) -> usize {
        self.params.nt * self.params.nx
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
    pub fn h(&self) -> &[f64] {
        &self.h
    }
    pub fn is_flat(&self) -> bool {
        self.params.epsilon == 0.0 || self.h.iter().all(|&v| v == 0.0)
    }

    /// Same geometry and perturbation with a different `epsilon`.
    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self, LatticeError> {
        Self::with_h(LatticeParams { epsilon, ..self.params.clone() }, self.h.clone())
    }

    pub fn site(&self, t: usize, x: usize) -> Site {
        debug_assert!(t < self.nt() && x < self.nx());
        Site(t * self.nx() + x)
    }

    pub fn coords(&self, s: Site) -> (usize, usize) {
        (s.0 / self.nx(), s.0 % self.nx())
    }

    pub fn sites(&self) -> impl Iterator<Item = Site> + '_ {
        (0..self.len()).map(Site)
    }

    pub fn slice(&self, t: usize) -> impl Iterator<Item = Site> + '_ {
        (0..self.nx()).map(move |x| self.site(t, x))
    }

    /// Conformal factor `1 + eps*h`.
    pub fn conformal(&self, s: Site) -> f64 {
        1.0 + self.params.epsilon * self.h[s.0]
    }

    /// Metric volume element `(1 + eps*h)^{d/2} dt dx`.
    pub fn volume_weight(&self, s: Site) -> f64 {
        self.conformal(s).powi(DIM as i32 / 2) * self.params.dt * self.params.dx
    }

    pub fn volume_weights(&self) -> Vec<f64> {
        self.sites().map(|s| self.volume_weight(s)).collect()
    }

    /// Periodic spatial distance in sites.
    pub fn spatial_distance(&self, a: usize, b: usize) -> usize {
        let d = a.abs_diff(b);
        d.min(self.nx() - d)
    }

    /// Light-cone relation of `a` to `b` for the numerical cone of the
    /// stencil (one site per step, lightlike pairs included).
    pub fn causal_order(&self, a: Site, b: Site) -> CausalRelation {
        if a == b {
            return CausalRelation::Coincident;
        }
        let (ta, xa) = self.coords(a);
        let (tb, xb) = self.coords(b);
        if self.spatial_distance(xa, xb) > ta.abs_diff(tb) {
            CausalRelation::Spacelike
        } else if ta < tb {
            CausalRelation::Precedes
        } else if ta > tb {
            CausalRelation::Succeeds
        } else {
            // Equal time, distance zero only for a == b.
            CausalRelation::Spacelike
        }
    }

    /// `a` lies in the closed causal past of `b` (coincidence included).
    pub fn in_closed_past(&self, a: Site, b: Site) -> bool {
        matches!(self.causal_order(a, b), CausalRelation::Precedes | CausalRelation::Coincident)
    }

    pub fn is_spacelike(&self, a: Site, b: Site) -> bool {
        self.causal_order(a, b) == CausalRelation::Spacelike
    }

    fn flat_box(&self, field: &[C64], t: usize, x: usize) -> C64 {
        let nx = self.nx();
        let at = |tt: usize, xx: usize| field[tt * nx + xx];
        let (dt2, dx2) = (self.dt() * self.dt(), self.dx() * self.dx());
        let time = (at(t + 1, x) - at(t, x) * 2.0 + at(t - 1, x)) / dt2;
        let xp = (x + 1) % nx;
        let xm = (x + nx - 1) % nx;
        let space = (at(t, xp) - at(t, x) * 2.0 + at(t, xm)) / dx2;
        time - space
    }

    /// Applies the discrete Klein-Gordon operator on interior slices.
    /// Boundary slices of the output are zero.
    pub fn kg_apply(&self, field: &[C64], mode: KgMode) -> Vec<C64> {
        assert_eq!(field.len(), self.len(), "field length must match lattice");
        let (nt, nx) = (self.nt(), self.nx());
        let m2 = self.mass() * self.mass();
        let mut out = vec![C64::new(0.0, 0.0); self.len()];
        for t in 1..nt.saturating_sub(1) {
            for x in 0..nx {
                let s = t * nx + x;
                let b0 = self.flat_box(field, t, x);
                out[s] = match mode {
                    KgMode::Full => b0 / self.conformal(Site(s)) + field[s] * m2,
                    KgMode::Flat => b0 + field[s] * m2,
                    KgMode::Perturbation => -b0 * self.h[s],
                };
            }
        }
        out
    }

    /// Lattice dispersion: `4 sin^2(w dt/2)/dt^2 = 4 sin^2(k dx/2)/dx^2 + m^2`
    /// for momentum index `k` (`k dx = 2 pi k / nx`). Returns `w`.
    pub fn frequency(&self, k: usize) -> f64 {
        let (dt, dx, m) = (self.dt(), self.dx(), self.mass());
        let theta = core::f64::consts::PI * k as f64 / self.nx() as f64;
        let s2 = (dt / dx).powi(2) * Float::sin(theta).powi(2) + 0.25 * m * m * dt * dt;
        2.0 * Float::asin(Float::sqrt(s2)) / dt
    }

    /// Wave number `2 pi k / (nx dx)`.
    pub fn wave_number(&self, k: usize) -> f64 {
        2.0 * core::f64::consts::PI * k as f64 / (self.nx() as f64 * self.dx())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat() -> LatticeSpacetime {
        LatticeSpacetime::new(LatticeParams::flat(16, 8, 0.1, 0.2, 1.0)).unwrap()
    }

    fn bumped(eps: f64) -> LatticeSpacetime {
        let shape = ProfileShape { amplitude: 1.0, center: 0.8, width: 0.5, center_x: None, width_x: None };
        let p = LatticeParams { epsilon: eps, profile: HProfile::Bump(shape), ..LatticeParams::flat(16, 8, 0.1, 0.2, 1.0) };
        LatticeSpacetime::new(p).unwrap()
    }

    #[test]
    fn flat_lattice_has_128_sites_and_uniform_weights() {
        let l = flat();
        assert_eq!(l.len(), 128);
        assert!(l.sites().all(|s| l.volume_weight(s) == 0.1 * 0.2));
        let total: f64 = l.volume_weights().iter().sum();
        assert!((total - 128.0 * 0.02).abs() < 1e-12);
    }

    #[test]
    fn volume_weight_scales_with_conformal_factor() {
        let mut h = vec![0.0; 128];
        h[5 * 8 + 3] = 1.0;
        let p = LatticeParams { epsilon: 0.1, ..LatticeParams::flat(16, 8, 0.1, 0.2, 1.0) };
        let l = LatticeSpacetime::with_h(p, h).unwrap();
        assert!((l.volume_weight(l.site(5, 3)) - 1.1 * 0.02).abs() < 1e-15);
    }

    #[test]
    fn rejects_invalid_parameters() {
        let cfl = LatticeParams::flat(16, 8, 0.3, 0.2, 1.0);
        assert!(matches!(LatticeSpacetime::new(cfl), Err(LatticeError::Cfl(_))));
        let mut h = vec![0.0; 128];
        h[2] = 0.5;
        let p = LatticeParams { epsilon: 0.1, ..LatticeParams::flat(16, 8, 0.1, 0.2, 1.0) };
        assert_eq!(LatticeSpacetime::with_h(p, h), Err(LatticeError::BoundarySupport(0)));
        let neg = LatticeParams::flat(16, 8, -0.1, 0.2, 1.0);
        assert!(matches!(LatticeSpacetime::new(neg), Err(LatticeError::NonPositiveSpacing { .. })));
    }

    #[test]
    fn site_coordinates_round_trip() {
        let l = flat();
        for s in l.sites() {
            let (t, x) = l.coords(s);
            assert_eq!(l.site(t, x), s);
        }
    }

    #[test]
    fn causal_examples() {
        let l = flat();
        let a = l.site(4, 2);
        assert_eq!(l.causal_order(a, a), CausalRelation::Coincident);
        assert_eq!(l.causal_order(l.site(1, 2), l.site(4, 2)), CausalRelation::Precedes);
        assert_eq!(l.causal_order(l.site(4, 2), l.site(1, 2)), CausalRelation::Succeeds);
        assert_eq!(l.causal_order(l.site(4, 0), l.site(5, 5)), CausalRelation::Spacelike);
        // Periodic wrap: distance 7 -> 1.
        assert_eq!(l.causal_order(l.site(4, 0), l.site(5, 7)), CausalRelation::Precedes);
    }

    #[test]
    fn causal_order_is_antisymmetric_exhaustively() {
        let l = flat();
        for a in l.sites() {
            for b in l.sites() {
                let (ab, ba) = (l.causal_order(a, b), l.causal_order(b, a));
                let expect = match ab {
                    CausalRelation::Precedes => CausalRelation::Succeeds,
                    CausalRelation::Succeeds => CausalRelation::Precedes,
                    other => other,
                };
                assert_eq!(ba, expect);
            }
        }
    }

    #[test]
    fn plane_wave_with_lattice_dispersion_is_annihilated() {
        let l = flat();
        for k in 0..l.nx() {
            let (w, q) = (l.frequency(k), l.wave_number(k));
            let f: Vec<C64> = l
                .sites()
                .map(|s| {
                    let (t, x) = l.coords(s);
                    C64::from_polar(1.0, q * x as f64 * l.dx() - w * t as f64 * l.dt())
                })
                .collect();
            let r = l.kg_apply(&f, KgMode::Full);
            assert!(r.iter().all(|v| v.norm() < 1e-12), "k={k}");
        }
    }

    #[test]
    fn constant_field_gives_mass_term() {
        let l = flat();
        let f = vec![C64::new(2.0, -1.0); l.len()];
        let r = l.kg_apply(&f, KgMode::Full);
        for t in 1..l.nt() - 1 {
            for s in l.slice(t) {
                assert!((r[s.0] - f[s.0]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn perturbation_with_constant_h_is_minus_c_box() {
        let (c, nt, nx) = (0.7, 16, 8);
        let h: Vec<f64> = (0..nt * nx).map(|s| if (2..nt - 2).contains(&(s / nx)) { c } else { 0.0 }).collect();
        let p = LatticeParams { epsilon: 0.1, ..LatticeParams::flat(nt, nx, 0.1, 0.2, 1.0) };
        let l = LatticeSpacetime::with_h(p, h).unwrap();
        let f: Vec<C64> = (0..l.len()).map(|s| C64::new((s as f64 * 0.37).sin(), (s as f64 * 0.11).cos())).collect();
        let b1 = l.kg_apply(&f, KgMode::Perturbation);
        let mut b0 = l.kg_apply(&f, KgMode::Flat);
        let m2 = l.mass() * l.mass();
        b0.iter_mut().zip(&f).for_each(|(b, v)| *b -= v * m2);
        for t in 2..nt - 2 {
            for s in l.slice(t) {
                assert!((b1[s.0] + b0[s.0] * c).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn exact_operator_agrees_with_first_order_split_to_second_order() {
        let f: Vec<C64> = (0..128).map(|s| C64::new((s as f64 * 0.71).sin(), (s as f64 * 0.23).cos())).collect();
        let mut ratios = Vec::new();
        for eps in [1e-2, 1e-3, 1e-4] {
            let l = bumped(eps);
            let exact = l.kg_apply(&f, KgMode::Full);
            let flat = l.kg_apply(&f, KgMode::Flat);
            let pert = l.kg_apply(&f, KgMode::Perturbation);
            let err = exact
                .iter()
                .zip(flat.iter().zip(&pert))
                .map(|(e, (a, b))| (e - a - b * eps).norm())
                .fold(0.0, f64::max);
            ratios.push(err / (eps * eps));
        }
        let c = ratios[0];
        assert!(c > 0.0);
        assert!(ratios.iter().all(|r| (r / c - 1.0).abs() < 0.05), "{ratios:?}");
    }
}
