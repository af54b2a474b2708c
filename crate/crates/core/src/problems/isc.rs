//! Invariant surface conditions from symmetry generator coefficients.
//!
//! For `X = ξ∂x + τ∂t + η∂u + φ∂v` the conditions are
//! `η − τu_t − ξu_x = 0` and `φ − τv_t − ξv_x = 0`.

use std::sync::Arc;

use super::Fields;
use crate::autodiff::{MultiIndex, Tape, Var};

/// Point arguments a coefficient may depend on, as tape nodes.
#[derive(Clone, Copy, Debug)]
pub struct IscArgs {
    pub t: Var,
    pub x: Var,
    pub u: Var,
    pub v: Option<Var>,
}

/// A generator coefficient recorded on the tape as a function of `(t, x, u, v)`.
pub type Coeff = Arc<dyn Fn(&mut Tape, &IscArgs) -> Var + Send + Sync>;

#[derive(Clone)]
pub struct GeneratorCoeffs {
    pub xi: Coeff,
    pub tau: Coeff,
    pub eta: Coeff,
    pub phi: Option<Coeff>,
}

fn constant(c: f64) -> Coeff {
    Arc::new(move |tape: &mut Tape, _: &IscArgs| tape.scalar(c))
}

impl GeneratorCoeffs {
    pub fn constant(xi: f64, tau: f64, eta: f64) -> Self {
        Self {
            xi: constant(xi),
            tau: constant(tau),
            eta: constant(eta),
            phi: None,
        }
    }

    /// `∂t + c∂x`.
    pub fn traveling_wave(c: f64) -> Self {
        Self::constant(c, 1.0, 0.0)
    }

    /// `xt∂x + t²∂t − (x²/4 + t/2)u∂u`.
    pub fn heat_projective() -> Self {
        Self {
            xi: Arc::new(|tape, a| tape.mul(a.x, a.t)),
            tau: Arc::new(|tape, a| tape.square(a.t)),
            eta: Arc::new(|tape, a| {
                let x2 = tape.square(a.x);
                let x2 = tape.scale(x2, 0.25);
                let th = tape.scale(a.t, 0.5);
                let c = tape.add(x2, th);
                let cu = tape.mul(c, a.u);
                tape.neg(cu)
            }),
            phi: None,
        }
    }
}

/// Residual builder returned by [`build_isc`].
#[derive(Clone)]
pub struct IscResidual {
    coeffs: GeneratorCoeffs,
}

impl IscResidual {
    /// `[η − τu_t − ξu_x]`, plus `φ − τv_t − ξv_x` when `φ` is present.
    pub fn eval(&self, tape: &mut Tape, f: &Fields) -> Vec<Var> {
        let args = IscArgs {
            t: f.t,
            x: f.x,
            u: f.u.value(),
            v: f.v.map(|v| v.value()),
        };
        let xi = (self.coeffs.xi)(tape, &args);
        let tau = (self.coeffs.tau)(tape, &args);
        let mut out = Vec::with_capacity(2);
        let eta = (self.coeffs.eta)(tape, &args);
        out.push(condition(tape, eta, tau, xi, f.u.get(MultiIndex::T), f.u.get(MultiIndex::X)));
        if let (Some(phi), Some(v)) = (&self.coeffs.phi, f.v) {
            let phi = phi(tape, &args);
            out.push(condition(tape, phi, tau, xi, v.get(MultiIndex::T), v.get(MultiIndex::X)));
        }
        out
    }
}

fn condition(tape: &mut Tape, eta: Var, tau: Var, xi: Var, dt: Var, dx: Var) -> Var {
    let a = tape.mul(tau, dt);
    let b = tape.mul(xi, dx);
    let r = tape.sub(eta, a);
    tape.sub(r, b)
}

pub fn build_isc(g: GeneratorCoeffs) -> IscResidual {
    IscResidual { coeffs: g }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::ProblemSpec;
    use crate::sampling::latin_hypercube;

    fn compare(problem: &ProblemSpec, g: GeneratorCoeffs, sign: f64, on_exact: bool) {
        let pts = latin_hypercube(64, problem.grid.t_range, problem.grid.x_range, 3).points;
        let mut tape = Tape::default();
        let fields = if on_exact {
            problem.exact_fields(&mut tape, &pts)
        } else {
            // Arbitrary smooth non-solution: perturb the exact jets.
            let mut ten = problem.exact_tensor(&pts);
            for s in ten.set().slots() {
                for (i, v) in ten.slot_mut(s).unwrap().iter_mut().enumerate() {
                    *v += 0.1 * (i as f64 + s as f64).sin();
                }
            }
            let out = tape.constant(ten);
            crate::problems::Fields::from_output(&mut tape, &pts, out, problem.required_partials, None)
        };
        let built = build_isc(g).eval(&mut tape, &fields);
        let hard = problem.isc_residuals(&mut tape, &fields);
        let (a, b) = (tape.value(built[0]).values(), tape.value(hard[0].var).values());
        for (x, y) in a.iter().zip(b) {
            assert!((x - sign * y).abs() < 1e-12 * (1.0 + y.abs()), "{x} vs {y}");
        }
    }

    #[test]
    fn traveling_wave_matches_kdv_isc_up_to_sign() {
        let kdv = ProblemSpec::kdv();
        compare(&kdv, GeneratorCoeffs::traveling_wave(4.0), -1.0, false);
    }

    #[test]
    fn heat_generator_is_negated_printed_isc() {
        let heat = ProblemSpec::heat();
        compare(&heat, GeneratorCoeffs::heat_projective(), -1.0, false);
        compare(&heat, GeneratorCoeffs::heat_projective(), -1.0, true);
    }

    #[test]
    fn zero_generator_gives_zero_residual() {
        let kdv = ProblemSpec::kdv();
        let pts = vec![(0.2, 0.3), (0.9, 0.1)];
        let mut tape = Tape::default();
        let f = kdv.exact_fields(&mut tape, &pts);
        let r = build_isc(GeneratorCoeffs::constant(0.0, 0.0, 0.0)).eval(&mut tape, &f);
        assert!(tape.value(r[0]).values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn second_condition_with_phi() {
        let b = ProblemSpec::potential_burgers();
        let pts = vec![(0.2, 0.3)];
        let mut tape = Tape::default();
        let f = b.exact_fields(&mut tape, &pts);
        let mut g = GeneratorCoeffs::traveling_wave(1.0);
        g.phi = Some(Arc::new(|tape, _| tape.scalar(0.0)));
        let r = build_isc(g).eval(&mut tape, &f);
        assert_eq!(r.len(), 2);
        let [_, v] = b.exact_jet(0.2, 0.3)[..] else { unreachable!() };
        let want = -v[1] - v[2];
        assert!((tape.value(r[1]).values()[0] - want).abs() < 1e-12);
    }
}
