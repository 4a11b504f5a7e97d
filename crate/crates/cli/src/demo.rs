//! Four-point truncated out-field function at first order on a
//! conformally perturbed background, split into its `eps`-linear pieces.

use serde::Serialize;
use thiserror::Error;
use yf_core::graphs::{truncated_wightman, GraphContext, GraphError};
use yf_core::lattice::{LatticeError, LatticeSpacetime, Site};
use yf_core::propagators::{epsilon_expand_dminus, PropagatorError, PropagatorSet};
use yf_core::scalar::C64;
use yf_core::trees::FieldType;

use crate::config::{ConfigError, DemoConfig, LatticeConfig};

#[derive(Debug, Error)]
pub enum DemoError {
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Propagator(#[from] PropagatorError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("demo needs exactly four points, got {0}")]
    Points(usize),
    #[error("decay lattice with nt={nt} cannot hold the demo points")]
    DecayLattice { nt: usize },
}

/// Minimum early-over-late envelope ratio of the flat-background decay.
pub const DECAY_ENVELOPE_MIN: f64 = 2.0;

/// Interaction order of the demo amplitude.
pub const ORDER: usize = 1;
/// Interaction degree of the demo amplitude.
pub const DEGREE: usize = 4;
/// Expected ratio of the graph value to the single vertex integral.
pub const EXPECTED_MULTIPLICITY: f64 = -12.0;

/// Smooth step from 0 at `u <= 0` to 1 at `u >= 1`, flat to all orders at
/// both ends.
fn smooth_step(u: f64) -> f64 {
    if u <= 0.0 {
        return 0.0;
    }
    if u >= 1.0 {
        return 1.0;
    }
    let a = (-1.0 / u).exp();
    let b = (-1.0 / (1.0 - u)).exp();
    a / (a + b)
}

/// Per-slice coupling profile rising over the first `fraction` of the time
/// range and falling over the last.
pub fn coupling_switch(nt: usize, fraction: f64) -> Vec<f64> {
    let last = nt.saturating_sub(1) as f64;
    let ramp = (fraction * last).max(1.0);
    (0..nt).map(|t| smooth_step(t as f64 / ramp) * smooth_step((last - t as f64) / ramp)).collect()
}

fn switched_weights(l: &LatticeSpacetime, switch: &[f64]) -> Vec<f64> {
    l.volume_weights().iter().enumerate().map(|(s, w)| w * switch[s / l.nx()]).collect()
}

/// Imaginary parts of the single vertex integral `sum_y w(y) prod_j D-(x_j, y)`
/// and of its pieces linear in `eps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Decomposition {
    /// Flat background.
    pub flat: f64,
    /// Volume-element perturbation `h(y)`.
    pub volume: f64,
    /// Modes perturbed at the vertex.
    pub vertex_modes: f64,
    /// Modes perturbed at the external points.
    pub external_modes: f64,
    /// Full `eps` lattice.
    pub exact: f64,
    /// `flat + eps (volume + vertex_modes + external_modes)`.
    pub linear: f64,
}

impl Decomposition {
    /// Smaller of the two leading first-order pieces over the external one.
    pub fn suppression(&self) -> f64 {
        self.volume.abs().min(self.vertex_modes.abs()) / self.external_modes.abs()
    }
}

fn decompose(l: &LatticeSpacetime, switch: &[f64], points: &[Site]) -> Result<Decomposition, DemoError> {
    let eps = l.epsilon();
    let exp = epsilon_expand_dminus(l)?;
    let exact_props = PropagatorSet::build(l)?;
    let flat_w = l.dt() * l.dx();
    let h = l.h();
    let full_w = switched_weights(l, switch);
    let mut acc = [C64::new(0.0, 0.0); 5];
    for y in 0..l.len() {
        let base: Vec<C64> = points.iter().map(|x| exp.d00[[x.0, y]]).collect();
        let w0 = flat_w * switch[y / l.nx()];
        let prod: C64 = base.iter().product();
        acc[0] += prod * w0;
        acc[1] += prod * (w0 * h[y]);
        for j in 0..points.len() {
            let swap = |m: &ndarray::Array2<C64>| -> C64 {
                base.iter().enumerate().map(|(i, b)| if i == j { m[[points[i].0, y]] } else { *b }).product()
            };
            acc[2] += swap(&exp.d01) * w0;
            acc[3] += swap(&exp.d10) * w0;
        }
        let exact: C64 = points.iter().map(|x| exact_props.dminus[[x.0, y]]).product();
        acc[4] += exact * full_w[y];
    }
    let [flat, volume, vertex_modes, external_modes, exact] = acc.map(|c| c.im);
    Ok(Decomposition {
        flat,
        volume,
        vertex_modes,
        external_modes,
        exact,
        linear: flat + eps * (volume + vertex_modes + external_modes),
    })
}

fn graph_value(l: &LatticeSpacetime, switch: &[f64], points: &[Site]) -> Result<(C64, usize), DemoError> {
    let props = PropagatorSet::build(l)?;
    let ctx = GraphContext::new(&props, switched_weights(l, switch), DEGREE);
    let types = [FieldType::Out; 4];
    let sum = truncated_wightman(&types, points, ORDER, &ctx, false)?;
    Ok((sum.value, sum.graphs))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayPoint {
    pub nt: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DemoResult {
    /// Truncated four-point value on the perturbed background.
    pub perturbed: C64Json,
    /// Same on the flat background.
    pub baseline: C64Json,
    pub ratio: f64,
    pub graphs: usize,
    /// Graph value over the single vertex integral.
    pub multiplicity: f64,
    pub decomposition: Decomposition,
    pub suppression: f64,
    /// Relative gap between the exact integral and its linearization.
    pub linearization_gap: f64,
    /// Flat-background values for growing time extent.
    pub decay: Vec<DecayPoint>,
    /// Largest decay value in the first half of the scan over the largest
    /// in the second half.
    pub decay_envelope: Option<f64>,
    /// `|W(nt = 32)| / |W(nt = 16)|` on the flat background at the demo
    /// time step.
    pub pair_ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct C64Json {
    pub re: f64,
    pub im: f64,
}

impl From<C64> for C64Json {
    fn from(c: C64) -> Self {
        Self { re: c.re, im: c.im }
    }
}

/// `|W|` on a flat lattice of `nt` slices with the demo points kept at the
/// same distance from the final slice.
fn flat_value(lattice: &LatticeConfig, demo: &DemoConfig, nt: usize, dt: f64) -> Result<f64, DemoError> {
    if demo.points.iter().any(|&[t, _]| lattice.nt - t > nt) {
        return Err(DemoError::DecayLattice { nt });
    }
    let cfg = LatticeConfig { nt, dt, epsilon: 0.0, profile: None, ..lattice.clone() };
    let l = cfg.build()?;
    let pts: Vec<Site> = demo.points.iter().map(|&[t, x]| l.site(nt - (lattice.nt - t), x)).collect();
    let (v, _) = graph_value(&l, &coupling_switch(nt, demo.switch_fraction), &pts)?;
    Ok(v.norm())
}

pub fn run(lattice: &LatticeConfig, demo: &DemoConfig) -> Result<DemoResult, DemoError> {
    if demo.points.len() != 4 {
        return Err(DemoError::Points(demo.points.len()));
    }
    let l = lattice.build()?;
    let flat = l.with_epsilon(0.0)?;
    let points: Vec<Site> = demo.points.iter().map(|&[t, x]| l.site(t, x)).collect();
    let switch = coupling_switch(l.nt(), demo.switch_fraction);

    let (perturbed, graphs) = graph_value(&l, &switch, &points)?;
    let (baseline, _) = graph_value(&flat, &switch, &points)?;
    let decomposition = decompose(&l, &switch, &points)?;

    let decay_dt = demo.decay_dt.unwrap_or(lattice.dt);
    let decay = demo
        .decay_nt
        .iter()
        .map(|&nt| Ok(DecayPoint { nt, value: flat_value(lattice, demo, nt, decay_dt)? }))
        .collect::<Result<Vec<_>, DemoError>>()?;
    let pair_ratio = flat_value(lattice, demo, 32, lattice.dt)? / flat_value(lattice, demo, 16, lattice.dt)?;
    let decay_envelope = (decay.len() >= 2).then(|| {
        let (early, late) = decay.split_at(decay.len() / 2);
        let max = |d: &[DecayPoint]| d.iter().map(|p| p.value).fold(0.0, f64::max);
        max(early) / max(late)
    });

    Ok(DemoResult {
        perturbed: perturbed.into(),
        baseline: baseline.into(),
        ratio: perturbed.norm() / baseline.norm(),
        graphs,
        multiplicity: perturbed.re / decomposition.exact,
        suppression: decomposition.suppression(),
        linearization_gap: (decomposition.exact - decomposition.linear).abs() / decomposition.exact.abs(),
        decomposition,
        decay,
        decay_envelope,
        pair_ratio,
    })
}

/// Configuration of the reference demonstration.
pub fn reference_config() -> (LatticeConfig, DemoConfig) {
    use crate::config::{ProfileConfig, ProfileKind};
    let lattice = LatticeConfig {
        nt: 24,
        nx: 8,
        dt: 0.15,
        dx: 0.2,
        mass: 1.5,
        epsilon: 0.05,
        profile: Some(ProfileConfig {
            kind: ProfileKind::Bump,
            amplitude: 4.0,
            center: 12.0,
            width: 2.0,
            center_x: None,
            width_x: None,
        }),
    };
    let demo = DemoConfig {
        points: vec![[20, 0], [20, 2], [21, 4], [21, 6]],
        switch_fraction: 0.4,
        decay_nt: (12..=64).step_by(4).collect(),
        decay_dt: Some(0.1),
    };
    (lattice, demo)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn switch_is_smooth_and_bounded() {
        let g = coupling_switch(24, 0.4);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[23], 0.0);
        assert!(g.iter().all(|&v| (0.0..=1.0).contains(&v)));
        assert_eq!(g[12], 1.0);
        for t in 0..24 {
            assert!((g[t] - g[23 - t]).abs() < 1e-15);
        }
    }
}
