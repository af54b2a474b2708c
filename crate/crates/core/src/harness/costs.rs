use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::metrics::{self, cost_ratio, SweepRow};

use super::HarnessError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellCost {
    pub problem: String,
    pub sweep_var: String,
    pub value: f64,
    pub pinn_seconds: f64,
    pub spinn_seconds: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyCost {
    pub problem: String,
    pub sweep_var: String,
    pub cells: usize,
    /// Mean of the per-cell ratios.
    pub mean_ratio: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub cells: Vec<CellCost>,
    pub families: Vec<FamilyCost>,
    pub skipped: usize,
}

/// Reference band for family-average SPINN/PINN training-time ratios.
pub const REFERENCE_BAND: (f64, f64) = (0.50, 1.26);

type CellKey = (String, String, u64);

/// Per-cell ratio of mean training times, and per-family means of those.
/// Cells missing either method are skipped with a warning.
pub fn report_costs(rows: &[SweepRow]) -> CostReport {
    let mut cells: BTreeMap<CellKey, (f64, Vec<f64>, Vec<f64>)> = BTreeMap::new();
    let mut order: Vec<CellKey> = Vec::new();
    for r in rows {
        let key = (r.problem.clone(), r.sweep_var.clone(), r.value.to_bits());
        let e = cells.entry(key.clone()).or_insert_with(|| {
            order.push(key);
            (r.value, Vec::new(), Vec::new())
        });
        match r.method.as_str() {
            "spinn" => e.2.push(r.seconds),
            _ => e.1.push(r.seconds),
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let mut report = CostReport::default();
    let mut fams: BTreeMap<(String, String), Vec<f64>> = BTreeMap::new();
    let mut fam_order = Vec::new();
    for key in order {
        let (value, pinn, spinn) = &cells[&key];
        if pinn.is_empty() || spinn.is_empty() {
            log::warn!("skipping unmatched cell {} {}={}", key.0, key.1, value);
            report.skipped += 1;
            continue;
        }
        let (p, s) = (mean(pinn), mean(spinn));
        let Ok(ratio) = cost_ratio(s, p) else {
            log::warn!("skipping cell {} {}={} with zero PINN time", key.0, key.1, value);
            report.skipped += 1;
            continue;
        };
        let fam = (key.0.clone(), key.1.clone());
        if !fams.contains_key(&fam) {
            fam_order.push(fam.clone());
        }
        fams.entry(fam).or_default().push(ratio);
        report.cells.push(CellCost {
            problem: key.0,
            sweep_var: key.1,
            value: *value,
            pinn_seconds: p,
            spinn_seconds: s,
            ratio,
        });
    }
    for fam in fam_order {
        let ratios = &fams[&fam];
        report.families.push(FamilyCost {
            problem: fam.0,
            sweep_var: fam.1,
            cells: ratios.len(),
            mean_ratio: mean(ratios),
        });
    }
    report
}

/// Every `sweep.csv` under `dir`, in path order.
pub fn find_sweep_csvs(dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    let mut found = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).map_err(|e| HarnessError::io(&d, e))? {
            let path = entry.map_err(|e| HarnessError::io(&d, e))?.path();
            if path.is_dir() {
                stack.push(path);
            } else if path.file_name().is_some_and(|n| n == "sweep.csv") {
                found.push(path);
            }
        }
    }
    found.sort();
    Ok(found)
}

pub fn load_rows(paths: &[PathBuf]) -> Result<Vec<SweepRow>, HarnessError> {
    let mut rows = Vec::new();
    for p in paths {
        let f = File::open(p).map_err(|e| HarnessError::io(p, e))?;
        rows.extend(metrics::read_rows::<SweepRow, _>(f)?);
    }
    Ok(rows)
}

impl fmt::Display for CostReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<20} {:<10} {:>10} {:>10} {:>10} {:>8}",
            "problem", "variable", "value", "pinn_s", "spinn_s", "ratio"
        )?;
        for c in &self.cells {
            writeln!(
                f,
                "{:<20} {:<10} {:>10} {:>10.2} {:>10.2} {:>8.3}",
                c.problem, c.sweep_var, c.value, c.pinn_seconds, c.spinn_seconds, c.ratio
            )?;
        }
        writeln!(f)?;
        for fam in &self.families {
            writeln!(
                f,
                "{:<20} {:<10} mean ratio {:.3} over {} cells",
                fam.problem, fam.sweep_var, fam.mean_ratio, fam.cells
            )?;
        }
        if self.skipped > 0 {
            writeln!(f, "{} unmatched cells skipped", self.skipped)?;
        }
        write!(
            f,
            "Reference family averages range from {:.2} to {:.2}; timings are hardware dependent.",
            REFERENCE_BAND.0, REFERENCE_BAND.1
        )
    }
}
