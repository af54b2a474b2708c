//! KdV `u_t + u u_x + u_xxx = 0` on `[0,1]×[0,1]` with the soliton
//! `u = 12 sech²(x − 4t)` and the traveling-wave ISC `u_t + 4u_x = 0`.

use super::{Equation, Fields, IbSide, Mode, Ops, ProblemSpec};
use crate::autodiff::{MultiIndex, PartialSet, Tape, Var, SLOTS};
use crate::sampling::GridSpec;

pub(crate) const SPEED: f64 = 4.0;

pub(super) fn spec() -> ProblemSpec {
    ProblemSpec {
        name: "kdv",
        grid: GridSpec::new((0.0, 1.0), (0.0, 1.0), 100, 256),
        unknowns: 1,
        required_partials: PartialSet::from_indices(&[MultiIndex::T, MultiIndex::X, MultiIndex::XXX]),
        mode: Mode::Forward,
        equation: Equation::Kdv,
    }
}

fn sech2(z: f64) -> f64 {
    let c = z.cosh();
    1.0 / (c * c)
}

/// `12 sech²(ξ)` and its ξ-derivatives up to third order.
fn profile(xi: f64) -> [f64; 4] {
    let s = sech2(xi);
    let th = xi.tanh();
    [
        12.0 * s,
        -24.0 * s * th,
        48.0 * s * th * th - 24.0 * s * s,
        -96.0 * s * th * th * th + 192.0 * s * s * th,
    ]
}

pub(super) fn exact_jet(t: f64, x: f64) -> [f64; SLOTS] {
    let [p0, p1, p2, p3] = profile(x - SPEED * t);
    let mut j = [0.0; SLOTS];
    j[MultiIndex::VALUE.slot()] = p0;
    j[MultiIndex::T.slot()] = -SPEED * p1;
    j[MultiIndex::X.slot()] = p1;
    j[MultiIndex::XX.slot()] = p2;
    j[MultiIndex::XXX.slot()] = p3;
    j
}

pub(super) fn ib(side: IbSide, t: f64, x: f64) -> f64 {
    match side {
        IbSide::Initial => 12.0 * sech2(x),
        IbSide::Left => 12.0 * sech2(-4.0 * t),
        IbSide::Right => 12.0 * sech2(1.0 - 4.0 * t),
    }
}

/// f := u_t + u u_x + u_xxx
pub(super) fn pde(tape: &mut Tape, f: &Fields) -> Vec<(&'static str, Var)> {
    let mut o = Ops(tape);
    let (u, ut, ux, uxxx) = (
        f.u.value(),
        f.u.get(MultiIndex::T),
        f.u.get(MultiIndex::X),
        f.u.get(MultiIndex::XXX),
    );
    let uux = o.mul(u, ux);
    let a = o.add(ut, uux);
    vec![("mse_f", o.add(a, uxxx))]
}

/// g := u_t + 4u_x
pub(super) fn isc(tape: &mut Tape, f: &Fields) -> Vec<(&'static str, Var)> {
    let mut o = Ops(tape);
    let ux4 = o.scale(f.u.get(MultiIndex::X), SPEED);
    vec![("mse_isc", o.add(f.u.get(MultiIndex::T), ux4))]
}
