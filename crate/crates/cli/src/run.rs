//! Experiments: each turns an [`ExperimentConfig`] into a [`Report`].

use std::path::Path;

use num_rational::BigRational;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use thiserror::Error;
use yf_core::ccr_algebra::AlgebraTables;
use yf_core::lattice::{LatticeSpacetime, Site};
use yf_core::propagators::{PropagatorError, PropagatorSet};
use yf_core::reconstruct::ModeSpace;
use yf_core::scalar::Real;
use yf_core::trees::{FieldType, TreeError};

use crate::config::{Backend, CheckConfig, ConfigError, ExperimentConfig};
use crate::demo::{self, DemoError, DECAY_ENVELOPE_MIN, EXPECTED_MULTIPLICITY};
use crate::recon::{self, ReconError, StateFile};
use crate::report::{Check, Report};
use crate::suite::{self, SuiteError, FLOAT_TOL};
use crate::wightman;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("missing [{0}] section")]
    MissingSection(&'static str),
    #[error(transparent)]
    Propagator(#[from] PropagatorError),
    #[error(transparent)]
    Suite(#[from] SuiteError),
    #[error(transparent)]
    Demo(#[from] DemoError),
    #[error(transparent)]
    Recon(#[from] ReconError),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Graph(#[from] yf_core::graphs::GraphError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("state file: {0}")]
    StateJson(#[from] serde_json::Error),
    #[error("{0}")]
    Unsupported(String),
}

/// Minimum ratio of the connected four-particle amplitude on the perturbed
/// background to its flat-background value.
pub const CHAIN_RATIO_MIN: f64 = 10.0;

/// Minimum enhancement and suppression factor of the demo.
pub const DEMO_FACTOR_MIN: f64 = 10.0;

/// Relative tolerance of the graph multiplicity.
pub const MULTIPLICITY_TOL: f64 = 1e-9;

fn points(l: &LatticeSpacetime, pts: &[[usize; 2]]) -> Vec<Site> {
    pts.iter().map(|&[t, x]| l.site(t, x)).collect()
}

/// Truncated Wightman functions at every order up to `theory.sigma_max`.
pub fn wightman(cfg: &ExperimentConfig, dump: Option<&Path>) -> Result<Report, RunError> {
    let w = cfg.wightman.as_ref().ok_or(RunError::MissingSection("wightman"))?;
    let l = cfg.lattice.build()?;
    let props = PropagatorSet::build(&l)?;
    if let Some(dir) = dump {
        wightman::dump_propagators(dir, &l, &props)?;
    }
    let types = w.types.iter().map(|s| s.parse()).collect::<Result<Vec<FieldType>, _>>()?;
    let values = wightman::evaluate(&l, &props, cfg.theory.p, &types, &points(&l, &w.points), cfg.theory.sigma_max, w.oracle)?;
    let mut checks = Vec::new();
    if w.oracle {
        let worst = values.iter().filter_map(|v| v.rel_error).fold(0.0, f64::max);
        checks.push(Check::within("graph expansion equals operator Wick values", values.len(), worst, 1e-10));
    }
    let data = json!({ "types": w.types, "points": w.points, "orders": values });
    Ok(Report::new("wightman", cfg.hash(), checks, data))
}

fn algebra_checks<R: Real>(
    tables: &AlgebraTables<R>,
    cfg: &ExperimentConfig,
    counts: &CheckConfig,
    tol: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<Check> {
    let p = cfg.theory.p;
    let sigma = cfg.theory.sigma_max;
    let pairs = suite::all_pairs(tables.len());
    let orders: Vec<usize> = (1..=sigma).collect();
    let mut checks = suite::locality(tables, p, &orders, &suite::spacelike_pairs(tables), tol);
    checks.extend(suite::out_ccr(tables, p, &(0..=sigma).collect::<Vec<_>>(), &pairs, tol));
    checks.push(suite::glz(tables, p, counts.glz_instances, 2, rng, tol));
    checks.push(suite::retpull(tables, p, counts.retpull_instances, 2, rng, tol));
    checks.push(suite::tree_vs_retarded(tables, p, sigma, tol));
    checks
}

/// Identity suite on the configured lattice and backend.
pub fn check(cfg: &ExperimentConfig) -> Result<Report, RunError> {
    let l = cfg.lattice.build()?;
    let counts = cfg.check.clone().unwrap_or_default();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.run.seed);
    let mut checks = suite::free_field_axioms(&l)?;
    match cfg.run.backend {
        Backend::Exact => {
            let tables = AlgebraTables::<BigRational>::exact(&l);
            checks.extend(algebra_checks(&tables, cfg, &counts, 0.0, &mut rng));
        }
        Backend::Float => {
            let props = PropagatorSet::build(&l)?;
            let tables = AlgebraTables::float(&l, &props);
            checks.extend(algebra_checks(&tables, cfg, &counts, FLOAT_TOL, &mut rng));
        }
    }
    if counts.oracle_samples > 0 {
        let sigma = cfg.theory.sigma_max.min(2);
        checks.push(suite::graph_vs_oracle(&l, &[cfg.theory.p], 4, sigma, counts.oracle_samples, &mut rng)?);
    }
    if l.len() > 2 {
        let a = 17.min(l.len() as u32 - 1);
        let b = 2;
        let pairs: Vec<(u32, u32)> = (0..l.len() as u32).filter(|&y| y != a).map(|y| (a, y)).collect();
        checks.push(suite::negative_control(&l, cfg.theory.p, (a, b), &pairs));
    }
    let data = json!({ "backend": cfg.run.backend, "sites": l.len() });
    Ok(Report::new("check", cfg.hash(), checks, data))
}

/// The non-quasifree demonstration.
pub fn demo_nonquasifree(cfg: &ExperimentConfig) -> Result<Report, RunError> {
    let d = cfg.demo.as_ref().ok_or(RunError::MissingSection("demo"))?;
    if cfg.theory.p != demo::DEGREE {
        return Err(RunError::Unsupported(format!("the demo needs p = {}, got {}", demo::DEGREE, cfg.theory.p)));
    }
    if cfg.lattice.epsilon <= 0.0 || cfg.lattice.profile.is_none() {
        return Err(RunError::Unsupported("the demo needs eps > 0 and a profile".into()));
    }
    let r = demo::run(&cfg.lattice, d)?;
    let dec = &r.decomposition;
    let mut checks = vec![
        Check::at_least("perturbed amplitude over flat baseline", 1, r.ratio, DEMO_FACTOR_MIN),
        Check::at_least("volume and vertex-mode terms over external-mode term", 1, r.suppression, DEMO_FACTOR_MIN)
            .with_note(format!(
                "volume {:.3e}, vertex modes {:.3e}, external modes {:.3e}",
                dec.volume, dec.vertex_modes, dec.external_modes
            )),
        Check::within(
            "graph multiplicity is 12",
            1,
            (r.multiplicity.abs() - EXPECTED_MULTIPLICITY.abs()).abs() / EXPECTED_MULTIPLICITY.abs(),
            MULTIPLICITY_TOL,
        )
        .with_note(format!("signed multiplicity {:.12}", r.multiplicity)),
    ];
    if let Some(env) = r.decay_envelope {
        checks.push(
            Check::at_least("flat-background amplitude decay, early over late envelope", r.decay.len(), env, DECAY_ENVELOPE_MIN),
        );
    }
    let data = serde_json::to_value(&r).expect("demo result serializes");
    Ok(Report::new("demo-nonquasifree", cfg.hash(), checks, data))
}

/// Synthetic round trips on the two-slice version of `[lattice]`, an
/// optional user state, and the optional scattering chain.
pub fn reconstruct(cfg: &ExperimentConfig, state: Option<&Path>) -> Result<Report, RunError> {
    let rc = cfg.reconstruct.clone().unwrap_or(crate::config::ReconstructConfig {
        states: 20,
        max_particles: 3,
        scattering: None,
    });
    let space = ModeSpace::new(&recon::two_slice(&cfg.lattice)?).map_err(ReconError::from)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.run.seed);
    let mut checks = vec![recon::vacuum_round_trip(&space, rc.max_particles)?];
    let mut data = serde_json::Map::new();
    if rc.states > 0 {
        let (c, trials) = recon::synthetic_round_trips(&space, rc.states, rc.max_particles, &mut rng)?;
        checks.extend(c);
        data.insert("trials".into(), serde_json::to_value(trials).expect("serializes"));
    }
    if let Some(path) = state {
        let file: StateFile = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        let (c, trial) = recon::state_round_trip(&space, &file)?;
        checks.push(c);
        data.insert("state".into(), serde_json::to_value(trial).expect("serializes"));
    }
    if let Some(sc) = &rc.scattering {
        let lattice = sc.lattice.clone().unwrap_or_else(|| cfg.lattice.clone());
        if lattice.epsilon <= 0.0 {
            return Err(RunError::Unsupported("the scattering chain needs eps > 0".into()));
        }
        let perturbed = recon::scattering_chain(&lattice, sc.switch_fraction, cfg.theory.p, cfg.theory.lambda)?;
        let flat = crate::config::LatticeConfig { epsilon: 0.0, ..lattice };
        let baseline = recon::scattering_chain(&flat, sc.switch_fraction, cfg.theory.p, cfg.theory.lambda)?;
        let ratio = perturbed.f4_connected / baseline.f4_connected;
        checks.push(
            Check::at_least("connected four-particle amplitude over flat baseline", 1, ratio, CHAIN_RATIO_MIN),
        );
        data.insert("scattering".into(), json!({ "perturbed": perturbed, "flat": baseline, "ratio": ratio }));
    }
    Ok(Report::new("reconstruct", cfg.hash(), checks, serde_json::Value::Object(data)))
}
