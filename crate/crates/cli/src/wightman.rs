//! Truncated Wightman functions of chosen fields at chosen points.

use std::path::Path;

use serde::Serialize;
use yf_core::ccr_algebra::{AlgebraTables, FieldEngine};
use yf_core::graphs::{truncated_wightman, GraphContext, GraphError};
use yf_core::lattice::{LatticeSpacetime, Site};
use yf_core::propagators::{export_complex, export_real, PropagatorSet};
use yf_core::trees::FieldType;

use crate::demo::C64Json;
use crate::oracle::{relative_error, wick_truncated};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderValue {
    pub order: usize,
    pub value: C64Json,
    pub graphs: usize,
    pub integrands: usize,
    pub abs_sum: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<C64Json>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rel_error: Option<f64>,
}

/// Coefficients of `(-lambda)^order` for `order = 0..=sigma_max`.
pub fn evaluate(
    l: &LatticeSpacetime,
    props: &PropagatorSet,
    p: usize,
    types: &[FieldType],
    points: &[Site],
    sigma_max: usize,
    with_oracle: bool,
) -> Result<Vec<OrderValue>, GraphError> {
    let ctx = GraphContext::new(props, l.volume_weights(), p);
    let tables = with_oracle.then(|| AlgebraTables::float(l, props));
    let mut engine = tables.as_ref().map(|t| FieldEngine::new(t, p));
    (0..=sigma_max)
        .filter(|&order| p * order <= ctx.budget)
        .map(|order| {
            let sum = truncated_wightman(types, points, order, &ctx, false)?;
            let (oracle, rel_error) = match engine.as_mut() {
                Some(e) => {
                    let (w, scale) = wick_truncated(e, &props.dplus, types, points, order);
                    (Some(w.into()), Some(relative_error(sum.value, w, w.norm().max(sum.abs_sum).max(scale))))
                }
                None => (None, None),
            };
            Ok(OrderValue {
                order,
                value: sum.value.into(),
                graphs: sum.graphs,
                integrands: sum.integrands,
                abs_sum: sum.abs_sum,
                oracle,
                rel_error,
            })
        })
        .collect()
}

/// Writes `gr`, `d`, `dtilde` and `dplus` in the binary export format.
pub fn dump_propagators(dir: &Path, l: &LatticeSpacetime, props: &PropagatorSet) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let (nt, nx) = (l.nt(), l.nx());
    std::fs::write(dir.join("gr.bin"), export_real(&props.gr, nt, nx))?;
    std::fs::write(dir.join("d.bin"), export_real(&props.d, nt, nx))?;
    std::fs::write(dir.join("dtilde.bin"), export_real(&props.dtilde, nt, nx))?;
    std::fs::write(dir.join("dplus.bin"), export_complex(&props.dplus, nt, nx))?;
    Ok(())
}
