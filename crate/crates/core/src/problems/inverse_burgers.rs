//! Burgers equation in potential form `u_t − λ₁u_x² − λ₂u_xx = 0` on
//! `t ∈ [0.1, 1.1]`, `x ∈ [0, 2]`, with unknown `λ₁, λ₂` and ISC
//! `4λ₁t²u_t + 4λ₁txu_x + x² + 2λ₂t = 0`.

use super::{Equation, Fields, Mode, Ops, ProblemError, ProblemSpec};
use crate::autodiff::{MultiIndex, PartialSet, Tape, Var, SLOTS};
use crate::sampling::GridSpec;

const T_RANGE: (f64, f64) = (0.1, 1.1);
const X_RANGE: (f64, f64) = (0.0, 2.0);

/// True coefficients and integration constants of the exact solution.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InverseParams {
    pub lambda1: f64,
    pub lambda2: f64,
    pub c1: f64,
    pub c2: f64,
}

impl InverseParams {
    pub fn new(lambda1: f64, lambda2: f64, c1: f64, c2: f64) -> Result<Self, ProblemError> {
        if ![lambda1, lambda2, c1, c2].iter().all(|v| v.is_finite()) {
            return Err(ProblemError::InvalidConstants("non-finite constant".into()));
        }
        if lambda1 == 0.0 || lambda2 == 0.0 {
            return Err(ProblemError::InvalidConstants(
                "λ₁ and λ₂ must be non-zero".into(),
            ));
        }
        let p = Self {
            lambda1,
            lambda2,
            c1,
            c2,
        };
        // The log argument is monotone in x and in 1/t, so corners suffice.
        for t in [T_RANGE.0, T_RANGE.1] {
            for x in [X_RANGE.0, X_RANGE.1] {
                let arg = p.log_arg(t, x);
                if !(arg > 0.0) {
                    return Err(ProblemError::InvalidConstants(format!(
                        "log argument λ₁x/(λ₂t) + c₁ = {arg} ≤ 0 at (t={t}, x={x})"
                    )));
                }
            }
        }
        Ok(p)
    }

    fn log_arg(&self, t: f64, x: f64) -> f64 {
        self.lambda1 * x / (self.lambda2 * t) + self.c1
    }

    /// u = (λ₂/λ₁) ln(λ₁x/(λ₂t) + c₁) − (λ₂/(2λ₁)) ln t − x²/(4λ₁t) + c₂
    pub fn exact(&self, t: f64, x: f64) -> f64 {
        let (l1, l2) = (self.lambda1, self.lambda2);
        (l2 / l1) * self.log_arg(t, x).ln() - (l2 / (2.0 * l1)) * t.ln() - x * x / (4.0 * l1 * t)
            + self.c2
    }

    pub(super) fn exact_jet(&self, t: f64, x: f64) -> [f64; SLOTS] {
        let (l1, l2) = (self.lambda1, self.lambda2);
        let a = self.log_arg(t, x);
        let mut j = [0.0; SLOTS];
        j[MultiIndex::VALUE.slot()] = self.exact(t, x);
        j[MultiIndex::X.slot()] = 1.0 / (t * a) - x / (2.0 * l1 * t);
        j[MultiIndex::XX.slot()] = -(l1 / l2) / (t * t * a * a) - 1.0 / (2.0 * l1 * t);
        j[MultiIndex::T.slot()] =
            -x / (t * t * a) - l2 / (2.0 * l1 * t) + x * x / (4.0 * l1 * t * t);
        j
    }
}

pub(super) fn spec(params: InverseParams) -> Result<ProblemSpec, ProblemError> {
    Ok(ProblemSpec {
        name: "inverse_burgers",
        grid: GridSpec::new(T_RANGE, X_RANGE, 100, 256),
        unknowns: 1,
        required_partials: PartialSet::from_indices(&[MultiIndex::T, MultiIndex::XX]),
        mode: Mode::Inverse,
        equation: Equation::InverseBurgers(params),
    })
}

/// f := u_t − λ₁u_x² − λ₂u_xx
pub(super) fn pde(tape: &mut Tape, f: &Fields) -> Vec<(&'static str, Var)> {
    let [l1, l2] = f.lambda();
    let mut o = Ops(tape);
    let ux2 = o.sq(f.u.get(MultiIndex::X));
    let a = o.mul(l1, ux2);
    let b = o.mul(l2, f.u.get(MultiIndex::XX));
    let r = o.sub(f.u.get(MultiIndex::T), a);
    vec![("mse_f", o.sub(r, b))]
}

/// g := 4λ₁t²u_t + 4λ₁txu_x + x² + 2λ₂t
pub(super) fn isc(tape: &mut Tape, f: &Fields) -> Vec<(&'static str, Var)> {
    let [l1, l2] = f.lambda();
    let mut o = Ops(tape);
    let (t, x) = (f.t, f.x);
    let t2 = o.sq(t);
    let t2ut = o.mul(t2, f.u.get(MultiIndex::T));
    let xt = o.mul(x, t);
    let xtux = o.mul(xt, f.u.get(MultiIndex::X));
    let s = o.add(t2ut, xtux);
    let s = o.mul(l1, s);
    let s = o.scale(s, 4.0);
    let x2 = o.sq(x);
    let l2t = o.mul(l2, t);
    let l2t = o.scale(l2t, 2.0);
    let s = o.add(s, x2);
    vec![("mse_g", o.add(s, l2t))]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn substituted_closed_form() {
        let p = InverseParams::new(1.0, 2.0, 1.0, 0.0).unwrap();
        for &(t, x) in &[(0.1f64, 0.0f64), (0.5, 1.3), (1.1, 2.0)] {
            let want = 2.0 * (x / (2.0 * t) + 1.0).ln() - t.ln() - x * x / (4.0 * t);
            assert!((p.exact(t, x) - want).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_log_singularity() {
        assert!(InverseParams::new(1.0, 2.0, 0.0, 0.0).is_err());
        assert!(InverseParams::new(1.0, 2.0, -0.5, 0.0).is_err());
        assert!(InverseParams::new(-1.0, 2.0, 1.0, 0.0).is_err());
        assert!(InverseParams::new(0.0, 2.0, 1.0, 0.0).is_err());
        assert!(InverseParams::new(-1.0, 2.0, 12.0, 0.0).is_ok());
    }

    #[test]
    fn partials_match_finite_differences() {
        let p = InverseParams::new(1.0, 2.0, 1.0, 0.5).unwrap();
        let h = 1e-5;
        for &(t, x) in &[(0.2, 0.4), (0.8, 1.7)] {
            let j = p.exact_jet(t, x);
            let u = |t: f64, x: f64| p.exact(t, x);
            let ux = (u(t, x + h) - u(t, x - h)) / (2.0 * h);
            let ut = (u(t + h, x) - u(t - h, x)) / (2.0 * h);
            let uxx = (u(t, x + h) - 2.0 * u(t, x) + u(t, x - h)) / (h * h);
            assert!((ux - j[2]).abs() < 1e-6);
            assert!((ut - j[1]).abs() < 1e-6);
            assert!((uxx - j[3]).abs() < 1e-3);
        }
    }
}
