use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::optim::{AdamConfig, LbfgsConfig};
use crate::problems::{Mode, ProblemSpec};
use crate::sampling::GridSpec;

use super::HarnessError;

/// Optimizer settings. Adam runs first when `adam.iterations > 0`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub lbfgs: LbfgsConfig,
    pub adam: AdamConfig,
}

/// Everything needed to reproduce one training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub problem: String,
    pub hidden_layers: usize,
    pub neurons: usize,
    /// Initial/boundary points for forward problems, observations for the
    /// inverse problem.
    pub n_u: usize,
    /// Collocation points; unused by the inverse problem, whose residuals
    /// are evaluated on the observations.
    #[serde(default)]
    pub n_colloc: usize,
    pub spinn: bool,
    pub seed: u64,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    /// Relative noise on the observations (inverse problem only).
    #[serde(default)]
    pub noise: f64,
    /// Starting `(λ₁, λ₂)` for the inverse problem. Near `λ₁ = 0` the ISC
    /// residual barely depends on the network and drags both λ's negative.
    #[serde(default = "default_lambda_init")]
    pub lambda_init: [f64; 2],
    #[serde(default)]
    pub grid: Option<GridSpec>,
}

fn default_lambda_init() -> [f64; 2] {
    [1.0, 1.0]
}

impl TrainConfig {
    pub fn new(problem: &str, hidden_layers: usize, neurons: usize, n_u: usize, n_colloc: usize) -> Self {
        Self {
            problem: problem.to_string(),
            hidden_layers,
            neurons,
            n_u,
            n_colloc,
            spinn: false,
            seed: 0,
            optimizer: OptimizerConfig::default(),
            noise: 0.0,
            lambda_init: default_lambda_init(),
            grid: None,
        }
    }

    pub fn method(&self) -> &'static str {
        if self.spinn {
            "spinn"
        } else {
            "pinn"
        }
    }

    /// The registered problem with any grid override applied.
    pub fn problem_spec(&self) -> Result<ProblemSpec, HarnessError> {
        let p = ProblemSpec::by_name(&self.problem).map_err(|e| HarnessError::BadConfig(e.to_string()))?;
        Ok(match self.grid {
            Some(g) => p.with_grid(g),
            None => p,
        })
    }

    pub fn validate(&self) -> Result<ProblemSpec, HarnessError> {
        let bad = |m: String| Err(HarnessError::BadConfig(m));
        let p = self.problem_spec()?;
        if let Some(g) = &self.grid {
            g.validate().map_err(|e| HarnessError::BadConfig(e.to_string()))?;
        }
        if self.hidden_layers == 0 || self.neurons == 0 {
            return bad("hidden_layers and neurons must be at least 1".into());
        }
        if self.n_u == 0 {
            return bad("n_u must be at least 1".into());
        }
        let pool = p.ib_pool().map_err(|e| HarnessError::BadConfig(e.to_string()))?;
        if self.n_u > pool.len() {
            return bad(format!(
                "n_u = {} exceeds the {} available {} points",
                self.n_u,
                pool.len(),
                if p.mode == Mode::Inverse { "grid" } else { "initial/boundary" }
            ));
        }
        match p.mode {
            Mode::Forward => {
                if self.n_colloc == 0 {
                    return bad("n_colloc must be at least 1 for forward problems".into());
                }
                if self.noise != 0.0 {
                    return bad("noise is only supported for the inverse problem".into());
                }
            }
            Mode::Inverse => {
                if !(self.noise >= 0.0 && self.noise.is_finite()) {
                    return bad(format!("noise must be finite and non-negative, got {}", self.noise));
                }
                if !self.lambda_init.iter().all(|v| v.is_finite()) {
                    return bad("lambda_init must be finite".into());
                }
            }
        }
        self.optimizer
            .lbfgs
            .validate()
            .map_err(|e| HarnessError::BadConfig(e.to_string()))?;
        if self.optimizer.adam.iterations > 0 {
            self.optimizer
                .adam
                .validate()
                .map_err(|e| HarnessError::BadConfig(e.to_string()))?;
        }
        Ok(p)
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        config_hash(self)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        read_json(path)
    }
}

pub(crate) fn config_hash<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_vec(value).expect("configs serialize");
    let digest = Sha256::digest(&json);
    hex::encode(&digest[..8])
}

pub(crate) fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| HarnessError::BadConfig(format!("{}: {e}", path.display())))
}

/// Variable swept across cells.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVar {
    NColloc,
    Neurons,
    Layers,
    NU,
    Noise,
}

impl SweepVar {
    pub fn name(self) -> &'static str {
        match self {
            SweepVar::NColloc => "n_colloc",
            SweepVar::Neurons => "neurons",
            SweepVar::Layers => "layers",
            SweepVar::NU => "n_u",
            SweepVar::Noise => "noise",
        }
    }

    fn integral(self) -> bool {
        !matches!(self, SweepVar::Noise)
    }

    /// `base` with this variable set to `value`.
    pub fn apply(self, base: &TrainConfig, value: f64) -> TrainConfig {
        let mut c = base.clone();
        let n = value as usize;
        match self {
            SweepVar::NColloc => c.n_colloc = n,
            SweepVar::Neurons => c.neurons = n,
            SweepVar::Layers => c.hidden_layers = n,
            SweepVar::NU => c.n_u = n,
            SweepVar::Noise => c.noise = value,
        }
        c
    }
}

fn default_runs() -> usize {
    10
}

/// A one-dimensional sweep; every cell is run for both methods.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    #[serde(default)]
    pub description: String,
    pub base: TrainConfig,
    pub sweep_var: SweepVar,
    pub values: Vec<f64>,
    #[serde(default = "default_runs")]
    pub runs_per_cell: usize,
    /// Per-trial seeds are derived from this; `base.seed` is ignored.
    pub master_seed: u64,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::BadConfig(m));
        if self.runs_per_cell == 0 {
            return bad("runs_per_cell must be at least 1".into());
        }
        if self.values.is_empty() {
            return bad("sweep has no values".into());
        }
        for &v in &self.values {
            if !v.is_finite() || v < 0.0 || (self.sweep_var.integral() && v.fract() != 0.0) {
                return bad(format!("invalid {} value {v}", self.sweep_var.name()));
            }
            self.sweep_var.apply(&self.base, v).validate()?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        read_json(path)
    }

    /// Expands `start..=end` by `step`, e.g. 50 to 2050 by 100.
    pub fn range(start: f64, end: f64, step: f64) -> Vec<f64> {
        let n = ((end - start) / step + 1e-9).floor() as usize;
        (0..=n).map(|k| start + step * k as f64).collect()
    }
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for run `run` of cell `cell`: SplitMix64 applied to the master seed
/// plus the counter `cell·2³² + run`. Both methods of a pair share it.
pub fn derive_seed(master: u64, cell: usize, run: usize) -> u64 {
    let counter = ((cell as u64) << 32) | run as u64;
    splitmix64(splitmix64(master) ^ counter)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kdv() -> TrainConfig {
        TrainConfig::new("kdv", 2, 20, 100, 700)
    }

    #[test]
    fn json_roundtrip_and_defaults() {
        let text = r#"{"problem":"heat","hidden_layers":3,"neurons":40,"n_u":100,
                       "n_colloc":1000,"spinn":true,"seed":4}"#;
        let c: TrainConfig = serde_json::from_str(text).unwrap();
        assert_eq!(c.optimizer.lbfgs.memory, 50);
        assert_eq!(c.optimizer.lbfgs.max_iterations, 20_000);
        let back: TrainConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
        assert!(c.validate().is_ok());
    }

    #[test]
    fn hash_tracks_content() {
        let a = kdv();
        let mut b = kdv();
        b.seed = 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 16);
    }

    #[test]
    fn rejects_bad_configs() {
        let mut c = kdv();
        c.problem = "navier_stokes".into();
        assert!(c.validate().is_err());
        let mut c = kdv();
        c.n_u = 10_000;
        assert!(c.validate().is_err());
        let mut c = kdv();
        c.noise = 0.1;
        assert!(c.validate().is_err());
        let mut c = kdv();
        c.optimizer.lbfgs.wolfe_c2 = 1e-5;
        assert!(c.validate().is_err());
        let mut c = TrainConfig::new("inverse_burgers", 4, 40, 1000, 0);
        assert!(c.validate().is_ok());
        c.noise = -0.1;
        assert!(c.validate().is_err());
    }

    #[test]
    fn sweep_values_and_seeds() {
        let v = SweepConfig::range(50.0, 2050.0, 100.0);
        assert_eq!(v.len(), 21);
        assert_eq!(v[20], 2050.0);
        assert_eq!(SweepConfig::range(10.0, 100.0, 5.0).len(), 19);
        assert_eq!(derive_seed(7, 2, 3), derive_seed(7, 2, 3));
        assert_ne!(derive_seed(7, 2, 3), derive_seed(7, 3, 2));
        assert_ne!(derive_seed(7, 0, 0), derive_seed(8, 0, 0));
        let sweep = SweepConfig {
            description: String::new(),
            base: kdv(),
            sweep_var: SweepVar::Neurons,
            values: vec![10.0, 12.5],
            runs_per_cell: 1,
            master_seed: 0,
        };
        assert!(sweep.validate().is_err());
    }
}
