//! Truncated Wightman functions from the operator algebra, as an
//! independent reference for the graph engine.

use std::collections::BTreeMap;

use ndarray::Array2;
use rand::Rng;
use yf_core::ccr_algebra::{product_expectation, AlgebraTables, FieldEngine, FieldPoly};
use yf_core::graphs::{truncated_wightman, GraphContext, GraphError};
use yf_core::lattice::Site;
use yf_core::scalar::C64;
use yf_core::trees::FieldType;

type Series = Vec<C64>;

fn series_mul(a: &Series, b: &Series) -> Series {
    let n = a.len();
    (0..n).map(|k| (0..=k).map(|i| a[i] * b[k - i]).sum()).collect()
}

/// Coefficient of `(-lambda)^order` in the truncated Wightman function,
/// from vacuum expectations of products of field polynomials and the
/// cluster expansion over ordered subsequences. Also returns the same
/// expansion with every term replaced by its modulus, the scale against
/// which cancellations are judged.
pub fn wick_truncated(
    engine: &mut FieldEngine<'_, f64>,
    dplus: &Array2<C64>,
    types: &[FieldType],
    points: &[Site],
    order: usize,
) -> (C64, f64) {
    let n = types.len();
    let polys: Vec<Vec<FieldPoly<f64>>> = types
        .iter()
        .zip(points)
        .map(|(&ty, s)| (0..=order).map(|o| engine.field(ty, s.0 as u32, o)).collect())
        .collect();
    let members = |mask: usize| -> Vec<usize> { (0..n).filter(|i| mask & (1 << i) != 0).collect() };
    let mut full: Vec<Series> = Vec::with_capacity(1 << n);
    let mut full_abs: Vec<Series> = Vec::with_capacity(1 << n);
    for mask in 0..1usize << n {
        let idx = members(mask);
        let mut series = vec![C64::new(0.0, 0.0); order + 1];
        let mut abs = vec![C64::new(0.0, 0.0); order + 1];
        for o in 0..=order {
            for comp in yf_core::trees::compositions(o, idx.len()) {
                let factors: Vec<&FieldPoly<f64>> = idx.iter().zip(&comp).map(|(&i, &s)| &polys[i][s]).collect();
                let v = product_expectation(&factors, dplus);
                series[o] += v;
                abs[o] += v.norm();
            }
        }
        full.push(series);
        full_abs.push(abs);
    }
    let mut truncated: BTreeMap<usize, Series> = BTreeMap::new();
    let mut truncated_abs: BTreeMap<usize, Series> = BTreeMap::new();
    for mask in 1..1usize << n {
        let first = mask & mask.wrapping_neg();
        let rest = mask ^ first;
        let mut t = full[mask].clone();
        let mut t_abs = full_abs[mask].clone();
        // Blocks containing the first member, other than the whole set.
        let mut sub = rest;
        loop {
            let block = first | sub;
            if block != mask {
                let prod = series_mul(&truncated[&block], &full[mask ^ block]);
                t.iter_mut().zip(&prod).for_each(|(a, b)| *a -= b);
                let prod_abs = series_mul(&truncated_abs[&block], &full_abs[mask ^ block]);
                t_abs.iter_mut().zip(&prod_abs).for_each(|(a, b)| *a += b);
            }
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & rest;
        }
        truncated.insert(mask, t);
        truncated_abs.insert(mask, t_abs);
    }
    let top = (1 << n) - 1;
    (truncated[&top][order], truncated_abs[&top][order].re)
}

/// One sampled comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleSample {
    pub types: Vec<FieldType>,
    pub points: Vec<Site>,
    pub graph: C64,
    pub wick: C64,
    pub scale: f64,
    pub rel_error: f64,
}

/// Worst case over one `(n, order, p)` class.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleClass {
    pub n: usize,
    pub order: usize,
    pub p: usize,
    pub samples: usize,
    pub type_tuples: usize,
    pub max_rel_error: f64,
    pub worst: Option<OracleSample>,
}

/// All `3^n` tuples over {in, loc, out}.
pub fn type_tuples(n: usize) -> Vec<Vec<FieldType>> {
    let all = [FieldType::In, FieldType::Loc, FieldType::Out];
    (0..3usize.pow(n as u32))
        .map(|mut k| {
            (0..n)
                .map(|_| {
                    let t = all[k % 3];
                    k /= 3;
                    t
                })
                .collect()
        })
        .collect()
}

/// `|graph - wick| / scale`; absolute when the scale vanishes.
pub fn relative_error(graph: C64, wick: C64, scale: f64) -> f64 {
    if scale == 0.0 {
        (graph - wick).norm()
    } else {
        (graph - wick).norm() / scale
    }
}

/// Compares graph and operator values on `samples.max(3^n)` random point
/// tuples, cycling through every type tuple.
pub fn compare_class(
    tables: &AlgebraTables<f64>,
    ctx: &GraphContext<'_>,
    n: usize,
    order: usize,
    samples: usize,
    rng: &mut impl Rng,
) -> Result<OracleClass, GraphError> {
    let dplus = tables.dplus().expect("float tables carry D+");
    let mut engine = FieldEngine::new(tables, ctx.p);
    let tuples = type_tuples(n);
    let count = samples.max(tuples.len());
    let mut out = OracleClass { n, order, p: ctx.p, samples: count, type_tuples: tuples.len(), max_rel_error: 0.0, worst: None };
    for k in 0..count {
        let types = tuples[k % tuples.len()].clone();
        let points: Vec<Site> = (0..n).map(|_| Site(rng.random_range(0..tables.len()))).collect();
        let g = truncated_wightman(&types, &points, order, ctx, false)?;
        let (wick, wick_abs) = wick_truncated(&mut engine, dplus, &types, &points, order);
        // Largest of the value and both term scales.
        let scale = wick.norm().max(g.abs_sum).max(wick_abs);
        let rel_error = relative_error(g.value, wick, scale);
        if out.worst.is_none() || rel_error > out.max_rel_error {
            out.max_rel_error = rel_error;
            out.worst = Some(OracleSample { types, points, graph: g.value, wick, scale, rel_error });
        }
    }
    Ok(out)
}
