//! Grids, initial/boundary subsets, Latin hypercube collocation and noise.
//!
//! All randomness comes from ChaCha8 streams keyed by `(seed, stream)`, so a
//! trial is reproducible from its seed on any platform.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::problems::ProblemSpec;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SamplingError {
    #[error("degenerate grid: {0}")]
    DegenerateGrid(String),
    #[error("requested {requested} points but the pool only has {available}")]
    PoolTooSmall { requested: usize, available: usize },
}

/// Named stream ids so that e.g. changing the collocation count never
/// perturbs the initialization.
pub mod streams {
    pub const INIT: u64 = 0;
    pub const IB: u64 = 1;
    pub const COLLOCATION: u64 = 2;
    pub const NOISE: u64 = 3;
    pub const DATA: u64 = 4;
}

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub t_range: (f64, f64),
    pub x_range: (f64, f64),
    pub n_t: usize,
    pub n_x: usize,
}

impl GridSpec {
    pub fn new(t_range: (f64, f64), x_range: (f64, f64), n_t: usize, n_x: usize) -> Self {
        Self {
            t_range,
            x_range,
            n_t,
            n_x,
        }
    }

    pub fn validate(&self) -> Result<(), SamplingError> {
        if self.n_t < 2 || self.n_x < 2 {
            return Err(SamplingError::DegenerateGrid(format!(
                "need at least 2 points per axis, got {}x{}",
                self.n_t, self.n_x
            )));
        }
        let ok = |r: (f64, f64)| r.0.is_finite() && r.1.is_finite() && r.1 > r.0;
        if !ok(self.t_range) || !ok(self.x_range) {
            return Err(SamplingError::DegenerateGrid(format!(
                "ranges must be finite and increasing: t {:?}, x {:?}",
                self.t_range, self.x_range
            )));
        }
        Ok(())
    }

    pub fn t_values(&self) -> Vec<f64> {
        linspace(self.t_range, self.n_t)
    }

    pub fn x_values(&self) -> Vec<f64> {
        linspace(self.x_range, self.n_x)
    }

    pub fn len(&self) -> usize {
        self.n_t * self.n_x
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Closed-domain membership with a small tolerance for rounding.
    pub fn contains(&self, t: f64, x: f64) -> bool {
        let eps = 1e-12;
        t >= self.t_range.0 - eps
            && t <= self.t_range.1 + eps
            && x >= self.x_range.0 - eps
            && x <= self.x_range.1 + eps
    }
}

fn linspace((lo, hi): (f64, f64), n: usize) -> Vec<f64> {
    let step = (hi - lo) / (n - 1) as f64;
    let mut v: Vec<f64> = (0..n).map(|i| lo + step * i as f64).collect();
    v[n - 1] = hi;
    v
}

/// Points with optional attached targets.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PointSet {
    pub points: Vec<(f64, f64)>,
    pub u: Option<Vec<f64>>,
    pub v: Option<Vec<f64>>,
}

impl PointSet {
    pub fn unlabeled(points: Vec<(f64, f64)>) -> Self {
        Self {
            points,
            u: None,
            v: None,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Subset by index, carrying targets along.
    pub fn select(&self, idx: &[usize]) -> Self {
        let pick = |v: &Vec<f64>| idx.iter().map(|&i| v[i]).collect::<Vec<_>>();
        Self {
            points: idx.iter().map(|&i| self.points[i]).collect(),
            u: self.u.as_ref().map(pick),
            v: self.v.as_ref().map(pick),
        }
    }
}

/// Equidistant `n_t × n_x` grid including endpoints, `t`-major order.
pub fn make_grid(spec: &GridSpec) -> Result<PointSet, SamplingError> {
    spec.validate()?;
    let (ts, xs) = (spec.t_values(), spec.x_values());
    let points = ts
        .iter()
        .flat_map(|&t| xs.iter().map(move |&x| (t, x)))
        .collect();
    Ok(PointSet::unlabeled(points))
}

/// Uniform draw without replacement from the problem's initial/boundary pool.
pub fn sample_ib(problem: &ProblemSpec, n_u: usize, seed: u64) -> Result<PointSet, SamplingError> {
    let pool = problem.ib_pool()?;
    draw_without_replacement(&pool, n_u, seed, streams::IB)
}

pub(crate) fn draw_without_replacement(
    pool: &PointSet,
    n: usize,
    seed: u64,
    stream: u64,
) -> Result<PointSet, SamplingError> {
    if n > pool.len() {
        return Err(SamplingError::PoolTooSmall {
            requested: n,
            available: pool.len(),
        });
    }
    let mut rng = stream_rng(seed, stream);
    let idx = index::sample(&mut rng, pool.len(), n).into_vec();
    Ok(pool.select(&idx))
}

/// `n` points with exactly one per stratum on each axis.
pub fn latin_hypercube(n: usize, t_range: (f64, f64), x_range: (f64, f64), seed: u64) -> PointSet {
    let mut rng = stream_rng(seed, streams::COLLOCATION);
    let axis = |(lo, hi): (f64, f64), rng: &mut ChaCha8Rng| -> Vec<f64> {
        let perm = index::sample(rng, n, n).into_vec();
        perm.into_iter()
            .map(|k| {
                let u: f64 = rng.gen();
                lo + (hi - lo) * ((k as f64 + u) / n as f64)
            })
            .collect()
    };
    let ts = axis(t_range, &mut rng);
    let xs = axis(x_range, &mut rng);
    PointSet::unlabeled(ts.into_iter().zip(xs).collect())
}

/// Population standard deviation.
pub fn std_dev(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
}

/// `vᵢ + level · std(values) · ζᵢ` with standard normal `ζᵢ`.
pub fn corrupt(values: &[f64], noise_level: f64, seed: u64) -> Vec<f64> {
    let sd = std_dev(values);
    if noise_level == 0.0 || sd == 0.0 {
        return values.to_vec();
    }
    let mut rng = stream_rng(seed, streams::NOISE);
    values
        .iter()
        .map(|v| {
            let z: f64 = rng.sample(StandardNormal);
            v + noise_level * sd * z
        })
        .collect()
}
