//! Error metrics on the evaluation grid, run statistics and result tables.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::loss::LossBreakdown;
use crate::network::{self, MlpParams};
use crate::problems::ProblemSpec;
use crate::sampling::make_grid;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("length mismatch: {pred} predictions vs {exact} exact values")]
    LengthMismatch { pred: usize, exact: usize },
    #[error("exact solution has zero norm")]
    ZeroNorm,
    #[error("{0} must be positive")]
    ZeroDenominator(&'static str),
}

/// `‖pred − exact‖₂ / ‖exact‖₂`.
pub fn l2_relative_error(pred: &[f64], exact: &[f64]) -> Result<f64, MetricsError> {
    if pred.len() != exact.len() {
        return Err(MetricsError::LengthMismatch {
            pred: pred.len(),
            exact: exact.len(),
        });
    }
    let norm = exact.iter().map(|e| e * e).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(MetricsError::ZeroNorm);
    }
    let diff = pred
        .iter()
        .zip(exact)
        .map(|(p, e)| (p - e) * (p - e))
        .sum::<f64>()
        .sqrt();
    Ok(diff / norm)
}

/// Error-reduction rate `(re_pinn − re_spinn) / re_pinn`; negative when the
/// symmetry-enhanced run is worse.
pub fn err_rate(re_pinn: f64, re_spinn: f64) -> Result<f64, MetricsError> {
    if re_pinn == 0.0 {
        return Err(MetricsError::ZeroDenominator("re_pinn"));
    }
    Ok((re_pinn - re_spinn) / re_pinn)
}

pub fn cost_ratio(spinn_seconds: f64, pinn_seconds: f64) -> Result<f64, MetricsError> {
    if !(pinn_seconds > 0.0) {
        return Err(MetricsError::ZeroDenominator("pinn_seconds"));
    }
    Ok(spinn_seconds / pinn_seconds)
}

pub fn percent_error(learned: f64, truth: f64) -> f64 {
    100.0 * (learned - truth).abs() / truth.abs()
}

/// Log-spaced histogram. `counts[0]` collects values below `edges[0]`
/// (including exact zeros) and the last entry values at or above the last
/// edge.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    /// Four bins per decade from 1e-16 to 1e2.
    pub fn log_spaced(values: &[f64]) -> Self {
        let edges: Vec<f64> = (0..=72).map(|k| 10f64.powf(-16.0 + k as f64 / 4.0)).collect();
        let mut counts = vec![0; edges.len() + 1];
        for &v in values {
            counts[edges.partition_point(|e| *e <= v)] += 1;
        }
        Self { edges, counts }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

/// `|prediction − exact|` on the full problem grid, one field per unknown.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorField {
    pub points: Vec<(f64, f64)>,
    pub abs_err: Vec<Vec<f64>>,
    pub histograms: Vec<Histogram>,
    /// L2 relative error per unknown.
    pub l2: Vec<f64>,
}

impl ErrorField {
    pub fn max_abs(&self, unknown: usize) -> f64 {
        self.abs_err[unknown].iter().fold(0.0, |m: f64, v| m.max(*v))
    }

    pub fn write_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["t", "x", "abs_err_u"];
        if self.abs_err.len() > 1 {
            header.push("abs_err_v");
        }
        out.write_record(&header)?;
        for (i, (t, x)) in self.points.iter().enumerate() {
            let mut row = vec![t.to_string(), x.to_string()];
            row.extend(self.abs_err.iter().map(|f| f[i].to_string()));
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Error field for an arbitrary predictor returning one vector per unknown.
pub fn abs_error_field_with(
    problem: &ProblemSpec,
    predict: impl Fn(&[(f64, f64)]) -> Vec<Vec<f64>>,
) -> Result<ErrorField, MetricsError> {
    let grid = make_grid(&problem.grid).expect("problem grids are validated");
    let pred = predict(&grid.points);
    let mut abs_err = Vec::new();
    let mut l2 = Vec::new();
    for k in 0..problem.unknowns {
        let exact: Vec<f64> = grid.points.iter().map(|&(t, x)| problem.exact(t, x)[k]).collect();
        l2.push(l2_relative_error(&pred[k], &exact)?);
        abs_err.push(pred[k].iter().zip(&exact).map(|(p, e)| (p - e).abs()).collect::<Vec<_>>());
    }
    let histograms = abs_err.iter().map(|f| Histogram::log_spaced(f)).collect();
    Ok(ErrorField {
        points: grid.points,
        abs_err,
        histograms,
        l2,
    })
}

pub fn abs_error_field(params: &MlpParams, problem: &ProblemSpec) -> Result<ErrorField, MetricsError> {
    abs_error_field_with(problem, |pts| network::evaluate(params, pts))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaResult {
    pub learned: [f64; 2],
    pub truth: [f64; 2],
    pub percent_error: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub config: serde_json::Value,
    pub config_hash: String,
    pub seed: u64,
    /// L2 relative error per unknown.
    pub errors: Vec<f64>,
    /// Sum over unknowns.
    pub combined_error: f64,
    pub lambda: Option<LambdaResult>,
    pub seconds: f64,
    pub final_loss: LossBreakdown,
    pub iterations: usize,
    pub termination: String,
    /// Set when training diverged.
    pub failure: Option<String>,
}

impl TrialResult {
    pub fn error_u(&self) -> f64 {
        self.errors.first().copied().unwrap_or(f64::NAN)
    }

    pub fn error_v(&self) -> Option<f64> {
        self.errors.get(1).copied()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

impl Stats {
    /// `None` for an empty slice.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        Some(Self {
            mean: mean.clamp(min, max),
            min,
            max,
            n: values.len(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub value: f64,
    pub pinn: Option<Stats>,
    pub spinn: Option<Stats>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub problem: String,
    pub sweep_var: String,
    pub cells: Vec<SweepCell>,
}

impl SweepSummary {
    /// Per-cell statistics of the combined error over successful rows.
    pub fn from_rows(problem: &str, sweep_var: &str, rows: &[SweepRow]) -> Self {
        let mut by_value: BTreeMap<u64, (f64, Vec<f64>, Vec<f64>)> = BTreeMap::new();
        let mut order = Vec::new();
        for r in rows {
            let key = r.value.to_bits();
            let e = by_value.entry(key).or_insert_with(|| {
                order.push(key);
                (r.value, Vec::new(), Vec::new())
            });
            let combined = r.error_u + r.error_v.unwrap_or(0.0);
            if !combined.is_finite() {
                continue;
            }
            match r.method.as_str() {
                "spinn" => e.2.push(combined),
                _ => e.1.push(combined),
            }
        }
        let cells = order
            .into_iter()
            .map(|k| {
                let (value, p, s) = &by_value[&k];
                SweepCell {
                    value: *value,
                    pinn: Stats::of(p),
                    spinn: Stats::of(s),
                }
            })
            .collect();
        Self {
            problem: problem.to_string(),
            sweep_var: sweep_var.to_string(),
            cells,
        }
    }
}

/// One line of `sweep.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub problem: String,
    pub method: String,
    pub sweep_var: String,
    pub value: f64,
    pub seed: u64,
    pub error_u: f64,
    pub error_v: Option<f64>,
    pub seconds: f64,
    pub config_hash: String,
}

/// One line of `inverse.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InverseRow {
    pub layers: usize,
    pub neurons: usize,
    pub n_u: usize,
    pub noise: f64,
    pub method: String,
    pub err_lambda1_pct: f64,
    pub err_lambda2_pct: f64,
    pub seconds: f64,
    pub config_hash: String,
}

pub fn write_rows<T: Serialize, W: Write>(w: W, rows: &[T]) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_rows<T: for<'de> Deserialize<'de>, R: std::io::Read>(r: R) -> csv::Result<Vec<T>> {
    csv::Reader::from_reader(r).deserialize().collect()
}
