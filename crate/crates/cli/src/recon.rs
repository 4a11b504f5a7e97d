//! Reconstruction runs: synthetic round trips and the first-order
//! scattering chain on the out region of the demo lattice.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use yf_core::graphs::{truncated_wightman, GraphContext, GraphError};
use yf_core::lattice::{LatticeError, LatticeParams, LatticeSpacetime, Site};
use yf_core::propagators::{PropagatorError, PropagatorSet};
use yf_core::reconstruct::{
    aligned_relative_error, reconstruct, symmetric_amplitude, wightman_from_state, Branch, ModeSpace,
    ReconstructError, StateAmplitudes,
};
use yf_core::scalar::C64;
use yf_core::star_calc::{Functional, StarError, Tensor};
use yf_core::trees::FieldType;

use crate::config::{ConfigError, LatticeConfig};
use crate::demo::coupling_switch;
use crate::report::Check;

#[derive(Debug, Error)]
pub enum ReconError {
    #[error(transparent)]
    Reconstruct(#[from] ReconstructError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Propagator(#[from] PropagatorError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Star(#[from] StarError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("state file: {0}")]
    StateFile(String),
}

/// Relative tolerance of the round trip, up to a global phase.
pub const ROUND_TRIP_TOL: f64 = 1e-8;

/// Two-slice lattice with the spatial data of `lattice`.
pub fn two_slice(lattice: &LatticeConfig) -> Result<LatticeSpacetime, ReconError> {
    Ok(LatticeSpacetime::new(LatticeParams::flat(2, lattice.nx, lattice.dt, lattice.dx, lattice.mass))?)
}

fn norm(t: &Tensor<C64>) -> f64 {
    t.data().iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trial {
    pub particles: Vec<usize>,
    pub vacuum: bool,
    pub branch: String,
    pub error: f64,
}

fn branch_name(b: &Branch) -> String {
    match b {
        Branch::VacuumOverlap => "vacuum-overlap".into(),
        Branch::Shifted { leading, .. } => format!("shifted(leading degree {leading})"),
    }
}

/// Random states with random particle content; every other state has no
/// vacuum component so both recovery branches are used.
pub fn synthetic_round_trips(
    space: &ModeSpace,
    states: usize,
    max_particles: usize,
    rng: &mut impl Rng,
) -> Result<(Vec<Check>, Vec<Trial>), ReconError> {
    let k = space.modes();
    let mut trials = Vec::with_capacity(states);
    for i in 0..states {
        let with_vacuum = i % 2 == 0;
        let mut present: Vec<usize> = (1..=max_particles).filter(|_| rng.random_bool(0.5)).collect();
        if present.is_empty() {
            present.push(rng.random_range(1..=max_particles));
        }
        let vacuum = if with_vacuum { C64::new(rng.random_range(0.3..1.0), 0.0) } else { C64::new(0.0, 0.0) };
        let mut st = StateAmplitudes { vacuum, particles: (1..=max_particles).map(|n| Tensor::zeros(k, n)).collect() };
        for &n in &present {
            st.particles[n - 1] =
                symmetric_amplitude(k, n, || C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        }
        trials.push((present, st));
    }
    let results: Vec<Result<Trial, ReconError>> = trials
        .par_iter()
        .map(|(present, st)| {
            let cap = 2 * st.max_particles();
            let (w_prime, norm2) = wightman_from_state(space, st, cap)?;
            let rec = reconstruct(space, &w_prime, st.max_particles())?;
            let error = aligned_relative_error(&st.scale(C64::new(1.0 / norm2.sqrt(), 0.0)), &rec.state);
            Ok(Trial { particles: present.clone(), vacuum: st.vacuum.norm() > 0.0, branch: branch_name(&rec.branch), error })
        })
        .collect();
    let trials = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let worst = trials.iter().map(|t| t.error).fold(0.0, f64::max);
    let overlap = trials.iter().filter(|t| t.branch == "vacuum-overlap").count();
    let shifted = trials.len() - overlap;
    let checks = vec![
        Check::within("reconstructed amplitudes match up to a global phase", trials.len(), worst, ROUND_TRIP_TOL),
        Check::at_least("recovery branches exercised", trials.len(), [overlap, shifted].iter().filter(|&&c| c > 0).count() as f64, 2.0)
            .with_note(format!("{overlap} vacuum-overlap, {shifted} shifted")),
    ];
    Ok((checks, trials))
}

/// The vacuum reconstructs to itself.
pub fn vacuum_round_trip(space: &ModeSpace, max_particles: usize) -> Result<Check, ReconError> {
    let st = StateAmplitudes::vacuum_state(space.modes(), max_particles);
    let (w_prime, _) = wightman_from_state(space, &st, 2 * max_particles)?;
    let rec = reconstruct(space, &w_prime, max_particles)?;
    Ok(Check::within("vacuum reconstructs to the vacuum", 1, aligned_relative_error(&st, &rec.state), ROUND_TRIP_TOL))
}

/// Amplitudes in a JSON file: `vacuum` as `[re, im]`, `particles[n-1]` as
/// the row-major entries of the rank-`n` tensor over `modes`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateFile {
    pub modes: usize,
    pub vacuum: [f64; 2],
    pub particles: Vec<Vec<[f64; 2]>>,
}

impl StateFile {
    /// Symmetrized amplitudes.
    pub fn amplitudes(&self) -> Result<StateAmplitudes, ReconError> {
        let particles = self
            .particles
            .iter()
            .enumerate()
            .map(|(i, data)| {
                let n = i + 1;
                let expected = self.modes.pow(n as u32);
                if data.len() != expected {
                    return Err(ReconError::StateFile(format!("rank {n} needs {expected} entries, got {}", data.len())));
                }
                Ok(Tensor::from_data(self.modes, n, data.iter().map(|&[re, im]| C64::new(re, im)).collect()).symmetrize())
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(StateAmplitudes { vacuum: C64::new(self.vacuum[0], self.vacuum[1]), particles })
    }
}

/// Round trip of a user-supplied state.
pub fn state_round_trip(space: &ModeSpace, file: &StateFile) -> Result<(Check, Trial), ReconError> {
    if file.modes != space.modes() {
        return Err(ReconError::StateFile(format!("state has {} modes, lattice has {}", file.modes, space.modes())));
    }
    let st = file.amplitudes()?;
    let (w_prime, norm2) = wightman_from_state(space, &st, 2 * st.max_particles())?;
    let rec = reconstruct(space, &w_prime, st.max_particles())?;
    let error = aligned_relative_error(&st.scale(C64::new(1.0 / norm2.sqrt(), 0.0)), &rec.state);
    let present = (1..=st.max_particles()).filter(|&n| st.particles[n - 1].max_modulus() > 0.0).collect();
    let trial = Trial { particles: present, vacuum: st.vacuum.norm() > 0.0, branch: branch_name(&rec.branch), error };
    Ok((Check::within("supplied state reconstructs", 1, error, ROUND_TRIP_TOL), trial))
}

/// Norms of the amplitudes recovered from the first-order out-state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChainAmplitudes {
    pub epsilon: f64,
    pub f2: f64,
    pub f4: f64,
    /// `f4` of the quasifree state with the same two-point function.
    pub f4_gaussian: f64,
    /// `|f4 - f4_gaussian|`, carried by the truncated four-point function.
    pub f4_connected: f64,
}

fn out_wightman(
    l: &LatticeSpacetime,
    switch: &[f64],
    p: usize,
    lambda: f64,
    cap: usize,
) -> Result<(Functional<C64>, Functional<C64>), ReconError> {
    let props = PropagatorSet::build(l)?;
    let weights: Vec<f64> = l.volume_weights().iter().enumerate().map(|(s, w)| w * switch[s / l.nx()]).collect();
    let ctx = GraphContext::new(&props, weights, p);
    let nx = l.nx();
    let out_sites: Vec<Site> = (l.nt() - 2..l.nt()).flat_map(|t| (0..nx).map(move |x| (t, x))).map(|(t, x)| l.site(t, x)).collect();
    let n = out_sites.len();
    let site_weights: Vec<C64> = (0..n).map(|i| C64::new(l.volume_weight(out_sites[i]), 0.0)).collect();
    let coupling = C64::new(-lambda, 0.0);

    let tuple_value = |idx: &[usize], order: usize| -> Result<C64, GraphError> {
        let pts: Vec<Site> = idx.iter().map(|&i| out_sites[i]).collect();
        let types = vec![FieldType::Out; idx.len()];
        Ok(truncated_wightman(&types, &pts, order, &ctx, false)?.value)
    };
    let two = |order: usize| -> Result<Tensor<C64>, GraphError> {
        let data = (0..n * n).map(|f| tuple_value(&[f / n, f % n], order)).collect::<Result<Vec<_>, _>>()?;
        Ok(Tensor::from_data(n, 2, data))
    };
    let free2 = two(0)?;
    let loop2 = two(1)?;
    let four: Vec<C64> = (0..n.pow(4))
        .into_par_iter()
        .map(|f| tuple_value(&[f / (n * n * n), (f / (n * n)) % n, (f / n) % n, f % n], 1))
        .collect::<Result<Vec<_>, _>>()?;

    let mut gaussian = Functional::zero(cap, site_weights);
    gaussian.set_component(2, free2.add(&loop2.scale(&coupling)));
    let mut interacting = gaussian.clone();
    if cap >= 4 {
        interacting.set_component(4, Tensor::from_data(n, 4, four).scale(&coupling));
    }
    Ok((gaussian.exp()?, interacting.exp()?))
}

/// Out-state amplitudes at first order in the coupling, recovered from the
/// out-field Wightman functional on the last two slices against the flat
/// out-region vacuum.
pub fn scattering_chain(
    lattice: &LatticeConfig,
    switch_fraction: f64,
    p: usize,
    lambda: f64,
) -> Result<ChainAmplitudes, ReconError> {
    const CAP: usize = 4;
    let l = lattice.build()?;
    let space = ModeSpace::new(&two_slice(lattice)?)?;
    let switch = coupling_switch(l.nt(), switch_fraction);
    let (gaussian, interacting) = out_wightman(&l, &switch, p, lambda, CAP)?;
    let gaussian_state = reconstruct(&space, &gaussian, CAP)?.state;
    let state = reconstruct(&space, &interacting, CAP)?.state;
    Ok(ChainAmplitudes {
        epsilon: l.epsilon(),
        f2: norm(&state.particles[1]),
        f4: norm(&state.particles[3]),
        f4_gaussian: norm(&gaussian_state.particles[3]),
        f4_connected: norm(&state.particles[3].sub(&gaussian_state.particles[3])),
    })
}
