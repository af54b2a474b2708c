//! Fully connected tanh networks `(t, x) ↦ (u[, v])`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::autodiff::{DualScalar, PartialSet, Tape, Tensor, Var};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NetworkError {
    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Layer sizes of the network. Input is always `(t, x)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Architecture {
    pub input_dim: usize,
    pub hidden_layers: usize,
    pub neurons_per_layer: usize,
    pub output_dim: usize,
}

/// Where one layer's weights and biases live in the flat vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LayerSlot {
    pub weight_offset: usize,
    pub bias_offset: usize,
    pub fan_in: usize,
    pub fan_out: usize,
}

impl Architecture {
    pub fn new(
        hidden_layers: usize,
        neurons_per_layer: usize,
        output_dim: usize,
    ) -> Result<Self, NetworkError> {
        let arch = Self {
            input_dim: 2,
            hidden_layers,
            neurons_per_layer,
            output_dim,
        };
        arch.validate()?;
        Ok(arch)
    }

    pub fn validate(&self) -> Result<(), NetworkError> {
        if self.input_dim != 2 {
            return Err(NetworkError::InvalidArchitecture(format!(
                "input_dim must be 2 (t, x), got {}",
                self.input_dim
            )));
        }
        if self.hidden_layers == 0 || self.neurons_per_layer == 0 {
            return Err(NetworkError::InvalidArchitecture(
                "need at least one hidden layer with at least one neuron".into(),
            ));
        }
        if !(1..=2).contains(&self.output_dim) {
            return Err(NetworkError::InvalidArchitecture(format!(
                "output_dim must be 1 or 2, got {}",
                self.output_dim
            )));
        }
        Ok(())
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.input_dim];
        sizes.extend(std::iter::repeat(self.neurons_per_layer).take(self.hidden_layers));
        sizes.push(self.output_dim);
        sizes
    }

    pub fn layers(&self) -> Vec<LayerSlot> {
        let sizes = self.layer_sizes();
        let mut off = 0;
        sizes
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let slot = LayerSlot {
                    weight_offset: off,
                    bias_offset: off + fan_in * fan_out,
                    fan_in,
                    fan_out,
                };
                off += fan_in * fan_out + fan_out;
                slot
            })
            .collect()
    }

    /// Σ_k (N_k·N_{k−1} + N_k).
    pub fn param_count(&self) -> usize {
        self.layer_sizes()
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }
}

/// Flat trainable vector: network weights and biases layer by layer
/// (row-major weights, then bias), followed by named extra scalars.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub arch: Architecture,
    pub flat: Vec<f64>,
    #[serde(default)]
    pub extra_names: Vec<String>,
}

impl MlpParams {
    pub fn zeros(arch: Architecture, extra_names: &[&str]) -> Self {
        let n = arch.param_count() + extra_names.len();
        Self {
            arch,
            flat: vec![0.0; n],
            extra_names: extra_names.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.flat.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flat.is_empty()
    }

    pub fn network_len(&self) -> usize {
        self.arch.param_count()
    }

    pub fn extra(&self) -> &[f64] {
        &self.flat[self.network_len()..]
    }

    pub fn extra_offset(&self, name: &str) -> Option<usize> {
        self.extra_names
            .iter()
            .position(|n| n == name)
            .map(|i| self.network_len() + i)
    }

    pub fn extra_value(&self, name: &str) -> Option<f64> {
        self.extra_offset(name).map(|i| self.flat[i])
    }

    /// Same shape, new values.
    pub fn with_flat(&self, flat: Vec<f64>) -> Result<Self, NetworkError> {
        if flat.len() != self.flat.len() {
            return Err(NetworkError::DimensionMismatch {
                expected: self.flat.len(),
                got: flat.len(),
            });
        }
        Ok(Self {
            flat,
            ..self.clone()
        })
    }

    /// Per-layer `(weights, bias)` copies; weights row-major `fan_out × fan_in`.
    pub fn to_layers(&self) -> Vec<(Vec<f64>, Vec<f64>)> {
        self.arch
            .layers()
            .iter()
            .map(|l| {
                (
                    self.flat[l.weight_offset..l.bias_offset].to_vec(),
                    self.flat[l.bias_offset..l.bias_offset + l.fan_out].to_vec(),
                )
            })
            .collect()
    }

    pub fn from_layers(
        arch: Architecture,
        layers: &[(Vec<f64>, Vec<f64>)],
        extra: &[(String, f64)],
    ) -> Result<Self, NetworkError> {
        let slots = arch.layers();
        if slots.len() != layers.len() {
            return Err(NetworkError::DimensionMismatch {
                expected: slots.len(),
                got: layers.len(),
            });
        }
        let mut flat = Vec::with_capacity(arch.param_count() + extra.len());
        for (slot, (w, b)) in slots.iter().zip(layers) {
            if w.len() != slot.fan_in * slot.fan_out || b.len() != slot.fan_out {
                return Err(NetworkError::DimensionMismatch {
                    expected: slot.fan_in * slot.fan_out + slot.fan_out,
                    got: w.len() + b.len(),
                });
            }
            flat.extend_from_slice(w);
            flat.extend_from_slice(b);
        }
        flat.extend(extra.iter().map(|(_, v)| *v));
        Ok(Self {
            arch,
            flat,
            extra_names: extra.iter().map(|(n, _)| n.clone()).collect(),
        })
    }
}

/// Glorot-normal weights (variance 2/(fan_in+fan_out)), zero biases, extra
/// scalars at zero.
pub fn init_xavier(
    arch: &Architecture,
    seed: u64,
    extra_names: &[&str],
) -> Result<MlpParams, NetworkError> {
    arch.validate()?;
    let mut params = MlpParams::zeros(arch.clone(), extra_names);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for l in arch.layers() {
        let std = (2.0 / (l.fan_in + l.fan_out) as f64).sqrt();
        let normal = Normal::new(0.0, std).expect("finite std");
        for w in &mut params.flat[l.weight_offset..l.bias_offset] {
            *w = normal.sample(&mut rng);
        }
    }
    Ok(params)
}

/// Records the network on `tape` (which must be bound to `params.flat`).
/// `input` is a `2 × P` tensor with rows `t` and `x`; the result is
/// `output_dim × P`.
pub fn forward(tape: &mut Tape, params: &MlpParams, input: Var) -> Result<Var, NetworkError> {
    let rows = tape.value(input).rows();
    if rows != params.arch.input_dim {
        return Err(NetworkError::DimensionMismatch {
            expected: params.arch.input_dim,
            got: rows,
        });
    }
    if tape.params().len() != params.len() {
        return Err(NetworkError::DimensionMismatch {
            expected: params.len(),
            got: tape.params().len(),
        });
    }
    let layers = params.arch.layers();
    let last = layers.len() - 1;
    let mut h = input;
    for (k, l) in layers.iter().enumerate() {
        h = tape.affine(h, l.weight_offset, l.bias_offset, l.fan_out);
        if k != last {
            h = tape.tanh(h);
        }
    }
    Ok(h)
}

/// Builds the `2 × P` input tensor seeded for `set`.
pub fn input_tensor(points: &[(f64, f64)], set: PartialSet) -> Tensor {
    let p = points.len();
    let mut t = Tensor::zeros(2, p, set);
    {
        let vals = t.slot_mut(0).unwrap();
        for (i, &(tt, xx)) in points.iter().enumerate() {
            vals[i] = tt;
            vals[p + i] = xx;
        }
    }
    if let Some(dt) = t.slot_mut(1) {
        dt[..p].fill(1.0);
    }
    if let Some(dx) = t.slot_mut(2) {
        dx[p..].fill(1.0);
    }
    t
}

/// Single-point forward pass on jets, without a tape.
pub fn forward_point(
    params: &MlpParams,
    t: DualScalar,
    x: DualScalar,
) -> Result<Vec<DualScalar>, NetworkError> {
    let set = t.set().union(x.set());
    let layers = params.arch.layers();
    let last = layers.len() - 1;
    let mut h = vec![t, x];
    for (k, l) in layers.iter().enumerate() {
        let w = &params.flat[l.weight_offset..l.bias_offset];
        let b = &params.flat[l.bias_offset..l.bias_offset + l.fan_out];
        let mut next = Vec::with_capacity(l.fan_out);
        for r in 0..l.fan_out {
            let mut z = DualScalar::constant_in(b[r], set);
            for (j, a) in h.iter().enumerate() {
                z = z + *a * w[r * l.fan_in + j];
            }
            next.push(if k != last { z.tanh() } else { z });
        }
        h = next;
    }
    Ok(h)
}

/// Derivative-free batched evaluation; returns one vector per output.
pub fn evaluate(params: &MlpParams, points: &[(f64, f64)]) -> Vec<Vec<f64>> {
    let layers = params.arch.layers();
    let last = layers.len() - 1;
    let p = points.len();
    let mut h: Vec<Vec<f64>> = vec![
        points.iter().map(|q| q.0).collect(),
        points.iter().map(|q| q.1).collect(),
    ];
    for (k, l) in layers.iter().enumerate() {
        let w = &params.flat[l.weight_offset..l.bias_offset];
        let b = &params.flat[l.bias_offset..l.bias_offset + l.fan_out];
        let mut next = Vec::with_capacity(l.fan_out);
        for r in 0..l.fan_out {
            let mut z = vec![b[r]; p];
            for (j, a) in h.iter().enumerate() {
                let wrj = w[r * l.fan_in + j];
                for (zi, ai) in z.iter_mut().zip(a) {
                    *zi += wrj * ai;
                }
            }
            if k != last {
                z.iter_mut().for_each(|v| *v = v.tanh());
            }
            next.push(z);
        }
        h = next;
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{seed_inputs, MultiIndex};

    #[test]
    fn param_count_formula() {
        let a = Architecture::new(2, 20, 1).unwrap();
        assert_eq!(a.param_count(), (2 * 20 + 20) + (20 * 20 + 20) + (20 + 1));
        assert_eq!(a.param_count(), 501);
        let p = init_xavier(&a, 1, &["lambda1", "lambda2"]).unwrap();
        assert_eq!(p.len(), 503);
        assert_eq!(p.extra(), &[0.0, 0.0]);
    }

    #[test]
    fn rejects_bad_architecture() {
        assert!(Architecture::new(0, 10, 1).is_err());
        assert!(Architecture::new(2, 0, 1).is_err());
        assert!(Architecture::new(2, 10, 3).is_err());
    }

    #[test]
    fn xavier_is_deterministic_with_zero_bias() {
        let a = Architecture::new(3, 7, 2).unwrap();
        let p1 = init_xavier(&a, 42, &[]).unwrap();
        let p2 = init_xavier(&a, 42, &[]).unwrap();
        assert_eq!(p1, p2);
        let p3 = init_xavier(&a, 43, &[]).unwrap();
        assert_ne!(p1, p3);
        for (_, b) in p1.to_layers() {
            assert!(b.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn xavier_variance() {
        // A 20→20 layer repeated gives 10⁴ weights at fan_in = fan_out = 20.
        let a = Architecture::new(26, 20, 1).unwrap();
        let p = init_xavier(&a, 9, &[]).unwrap();
        let mut w = Vec::new();
        for l in a.layers().iter().filter(|l| l.fan_in == 20 && l.fan_out == 20) {
            w.extend_from_slice(&p.flat[l.weight_offset..l.bias_offset]);
        }
        w.truncate(10_000);
        assert_eq!(w.len(), 10_000);
        let mean = w.iter().sum::<f64>() / w.len() as f64;
        let var = w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (w.len() - 1) as f64;
        assert!((var - 0.05).abs() < 0.005, "variance {var}");
    }

    #[test]
    fn layer_roundtrip() {
        let a = Architecture::new(2, 5, 2).unwrap();
        let mut p = init_xavier(&a, 3, &["lambda1"]).unwrap();
        *p.flat.last_mut().unwrap() = 0.25;
        let extra = vec![("lambda1".to_string(), 0.25)];
        let q = MlpParams::from_layers(a, &p.to_layers(), &extra).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn zero_network_is_zero() {
        let a = Architecture::new(2, 4, 1).unwrap();
        let p = MlpParams::zeros(a, &[]);
        let (t, x) = seed_inputs(0.3, 0.7, 1, 3).unwrap();
        let out = forward_point(&p, t, x).unwrap();
        assert!(out[0].coeffs().iter().all(|&c| c == 0.0));
    }

    #[test]
    fn single_neuron_is_tanh_x() {
        let a = Architecture::new(1, 1, 1).unwrap();
        let layers = vec![(vec![0.0, 1.0], vec![0.0]), (vec![1.0], vec![0.0])];
        let p = MlpParams::from_layers(a, &layers, &[]).unwrap();
        let (t, x) = seed_inputs(0.0, 0.0, 1, 3).unwrap();
        let u = &forward_point(&p, t, x).unwrap()[0];
        assert_eq!(u.value(), 0.0);
        assert_eq!(u.d(MultiIndex::X), 1.0);
        assert_eq!(u.d(MultiIndex::XXX), -2.0);
        assert_eq!(u.d(MultiIndex::T), 0.0);
    }

    #[test]
    fn value_channel_matches_plain_forward_bitwise() {
        let a = Architecture::new(3, 9, 2).unwrap();
        let p = init_xavier(&a, 11, &[]).unwrap();
        let pts: Vec<(f64, f64)> = (0..13)
            .map(|i| (0.07 * i as f64, 1.0 - 0.05 * i as f64))
            .collect();
        let plain = evaluate(&p, &pts);
        let set = PartialSet::FULL;
        let mut tape = Tape::new(p.flat.clone());
        let inp = tape.constant(input_tensor(&pts, set));
        let out = forward(&mut tape, &p, inp).unwrap();
        let vals = tape.value(out).values().to_vec();
        for (i, &(tt, xx)) in pts.iter().enumerate() {
            let (t, x) = seed_inputs(tt, xx, 1, 3).unwrap();
            let jet = forward_point(&p, t, x).unwrap();
            for k in 0..2 {
                assert_eq!(plain[k][i].to_bits(), vals[k * pts.len() + i].to_bits());
                assert_eq!(plain[k][i].to_bits(), jet[k].value().to_bits());
            }
        }
    }

    #[test]
    fn forward_rejects_wrong_input_rows() {
        let a = Architecture::new(1, 3, 1).unwrap();
        let p = init_xavier(&a, 0, &[]).unwrap();
        let mut tape = Tape::new(p.flat.clone());
        let inp = tape.constant(Tensor::from_values(3, 1, vec![0.0; 3]));
        assert!(matches!(
            forward(&mut tape, &p, inp),
            Err(NetworkError::DimensionMismatch { .. })
        ));
    }
}
