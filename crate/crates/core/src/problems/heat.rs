//! Heat equation `u_t − u_xx = 0` on `t ∈ [0.5, 1.5]`, `x ∈ [0, 1]` with
//! exact solution `u = x t^{−3/2} e^{−x²/(4t)}` and the ISC induced by
//! `xt∂x + t²∂t − (x²/4 + t/2)u∂u`.

use super::{Equation, Fields, IbSide, Mode, Ops, ProblemSpec};
use crate::autodiff::{MultiIndex, PartialSet, Tape, Var, SLOTS};
use crate::sampling::GridSpec;

pub(super) fn spec() -> ProblemSpec {
    ProblemSpec {
        name: "heat",
        grid: GridSpec::new((0.5, 1.5), (0.0, 1.0), 100, 256),
        unknowns: 1,
        required_partials: PartialSet::from_indices(&[MultiIndex::T, MultiIndex::XX]),
        mode: Mode::Forward,
        equation: Equation::Heat,
    }
}

pub(super) fn exact_jet(t: f64, x: f64) -> [f64; SLOTS] {
    let base = t.powf(-1.5) * (-x * x / (4.0 * t)).exp();
    let mut j = [0.0; SLOTS];
    j[MultiIndex::VALUE.slot()] = x * base;
    j[MultiIndex::X.slot()] = base * (1.0 - x * x / (2.0 * t));
    let uxx = base * (-1.5 * x / t + x * x * x / (4.0 * t * t));
    j[MultiIndex::XX.slot()] = uxx;
    j[MultiIndex::T.slot()] = uxx;
    j
}

pub(super) fn ib(side: IbSide, t: f64, x: f64) -> f64 {
    match side {
        IbSide::Initial => 2.0 * 2f64.sqrt() * x * (-x * x / 2.0).exp(),
        IbSide::Left => 0.0,
        IbSide::Right => t.powf(-1.5) * (-1.0 / (4.0 * t)).exp(),
    }
}

/// f := u_t − u_xx
pub(super) fn pde(tape: &mut Tape, f: &Fields) -> Vec<(&'static str, Var)> {
    let r = tape.sub(f.u.get(MultiIndex::T), f.u.get(MultiIndex::XX));
    vec![("mse_f", r)]
}

/// g := (x²/4 + t/2)u + xt u_x + t² u_t
pub(super) fn isc(tape: &mut Tape, f: &Fields) -> Vec<(&'static str, Var)> {
    let mut o = Ops(tape);
    let (t, x) = (f.t, f.x);
    let x2 = o.sq(x);
    let x2q = o.scale(x2, 0.25);
    let th = o.scale(t, 0.5);
    let coef = o.add(x2q, th);
    let a = o.mul(coef, f.u.value());
    let xt = o.mul(x, t);
    let b = o.mul(xt, f.u.get(MultiIndex::X));
    let t2 = o.sq(t);
    let c = o.mul(t2, f.u.get(MultiIndex::T));
    let ab = o.add(a, b);
    vec![("mse_isc", o.add(ab, c))]
}
