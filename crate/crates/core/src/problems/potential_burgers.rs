//! Potential Burgers system `v_x − u = 0`, `v_t − u_x + u²/2 = 0` on
//! `t ∈ [0, 1]`, `x ∈ [0.1, 1.1]`, with ISCs `l` and `p` from a
//! non-classical symmetry.

use super::{Equation, Fields, IbSide, Mode, Ops, ProblemSpec};
use crate::autodiff::{MultiIndex, PartialSet, Tape, Var, SLOTS};
use crate::sampling::GridSpec;

pub(super) fn spec() -> ProblemSpec {
    ProblemSpec {
        name: "potential_burgers",
        grid: GridSpec::new((0.0, 1.0), (0.1, 1.1), 100, 256),
        unknowns: 2,
        required_partials: PartialSet::from_indices(&[MultiIndex::T, MultiIndex::X]),
        mode: Mode::Forward,
        equation: Equation::PotentialBurgers,
    }
}

/// `u = −4(x+2)/(2t+4x+x²)`, `v = −2 ln(t/6 + x/3 + x²/12)`.
pub(super) fn exact_jet(t: f64, x: f64) -> [[f64; SLOTS]; 2] {
    let s = (2.0 * t + 4.0 * x + x * x) / 12.0;
    let (s_t, s_x) = (1.0 / 6.0, (2.0 + x) / 6.0);
    let mut u = [0.0; SLOTS];
    let mut v = [0.0; SLOTS];
    u[MultiIndex::VALUE.slot()] = -4.0 * (x + 2.0) / (2.0 * t + 4.0 * x + x * x);
    u[MultiIndex::T.slot()] = (x + 2.0) * s_t / (3.0 * s * s);
    u[MultiIndex::X.slot()] = -(s - (x + 2.0) * s_x) / (3.0 * s * s);
    v[MultiIndex::VALUE.slot()] = -2.0 * s.ln();
    v[MultiIndex::T.slot()] = -2.0 * s_t / s;
    v[MultiIndex::X.slot()] = -2.0 * s_x / s;
    [u, v]
}

pub(super) fn ib(side: IbSide, t: f64, x: f64) -> [f64; 2] {
    match side {
        IbSide::Initial => [
            -4.0 * (x + 2.0) / (x * (4.0 + x)),
            -2.0 * (x / 3.0 + x * x / 12.0).ln(),
        ],
        IbSide::Left => [
            -840.0 / (200.0 * t + 41.0),
            -2.0 * (t / 6.0 + 41.0 / 1200.0).ln(),
        ],
        IbSide::Right => [
            -1240.0 / (200.0 * t + 561.0),
            -2.0 * (t / 6.0 + 187.0 / 400.0).ln(),
        ],
    }
}

/// f := v_x − u,  g := v_t − u_x + u²/2
pub(super) fn pde(tape: &mut Tape, f: &Fields) -> Vec<(&'static str, Var)> {
    let mut o = Ops(tape);
    let (u, v) = (f.u, *f.v());
    let rf = o.sub(v.get(MultiIndex::X), u.value());
    let a = o.sub(v.get(MultiIndex::T), u.get(MultiIndex::X));
    let u2 = o.sq(u.value());
    let half_u2 = o.scale(u2, 0.5);
    let rg = o.add(a, half_u2);
    vec![("mse_f", rf), ("mse_g", rg)]
}

/// l := v_t − v_x/(x+1) − e^{v/2}/(3(x+1))
/// p := u_t − u_x/(x+1) − [(x+1)u e^{v/2}/6 − u − e^{v/2}/3]/(x+1)²
pub(super) fn isc(tape: &mut Tape, f: &Fields) -> Vec<(&'static str, Var)> {
    let mut o = Ops(tape);
    let (u, v) = (f.u, *f.v());
    let xp1 = o.shift(f.x, 1.0);
    let inv = o.recip(xp1);
    let half_v = o.scale(v.value(), 0.5);
    let ev = o.exp(half_v);

    let vx_term = o.mul(v.get(MultiIndex::X), inv);
    let ev_term = o.mul(ev, inv);
    let ev_term = o.scale(ev_term, 1.0 / 3.0);
    let l0 = o.sub(v.get(MultiIndex::T), vx_term);
    let l = o.sub(l0, ev_term);

    let ux_term = o.mul(u.get(MultiIndex::X), inv);
    let xu = o.mul(xp1, u.value());
    let xuev = o.mul(xu, ev);
    let bracket = o.scale(xuev, 1.0 / 6.0);
    let bracket = o.sub(bracket, u.value());
    let ev3 = o.scale(ev, 1.0 / 3.0);
    let bracket = o.sub(bracket, ev3);
    let inv2 = o.sq(inv);
    let tail = o.mul(bracket, inv2);
    let p0 = o.sub(u.get(MultiIndex::T), ux_term);
    let p = o.sub(p0, tail);
    vec![("mse_l", l), ("mse_p", p)]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundary_constants() {
        for &t in &[0.0, 0.37, 1.0] {
            let e = exact_jet(t, 0.1);
            assert!((e[0][0] + 840.0 / (200.0 * t + 41.0)).abs() < 1e-12);
            assert!((e[1][0] - ib(IbSide::Left, t, 0.1)[1]).abs() < 1e-12);
        }
        for &x in &[0.1, 0.55, 1.1] {
            let e = exact_jet(0.0, x);
            let [iu, iv] = ib(IbSide::Initial, 0.0, x);
            assert!((e[0][0] - iu).abs() < 1e-12);
            assert!((e[1][0] - iv).abs() < 1e-12);
        }
    }

    #[test]
    fn partials_match_finite_differences() {
        let h = 1e-6;
        for &(t, x) in &[(0.1, 0.2), (0.9, 1.0)] {
            let j = exact_jet(t, x);
            let jt = |d: f64| exact_jet(t + d, x);
            let jx = |d: f64| exact_jet(t, x + d);
            for k in 0..2 {
                let dt = (jt(h)[k][0] - jt(-h)[k][0]) / (2.0 * h);
                let dx = (jx(h)[k][0] - jx(-h)[k][0]) / (2.0 * h);
                assert!((dt - j[k][1]).abs() < 1e-6 * (1.0 + dt.abs()));
                assert!((dx - j[k][2]).abs() < 1e-6 * (1.0 + dx.abs()));
            }
        }
    }
}
