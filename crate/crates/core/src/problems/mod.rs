//! Problem registry: domains, initial/boundary data, exact solutions and the
//! PDE and invariant-surface-condition (ISC) residuals of each problem.
//!
//! Residuals are written once against [`Fields`], a bundle of tape nodes for
//! `t`, `x`, the unknowns' partials and (for the inverse problem) `λ₁, λ₂`.
//! Training fills `Fields` from the network's output jets; the self-test
//! fills it from hand-derived closed-form derivatives.

mod heat;
mod inverse_burgers;
mod isc;
mod kdv;
mod potential_burgers;

pub use inverse_burgers::InverseParams;
pub use isc::{build_isc, Coeff, GeneratorCoeffs, IscArgs, IscResidual};

use serde::{Deserialize, Serialize};

use crate::autodiff::{MultiIndex, PartialSet, Tape, Tensor, Var, SLOTS};
use crate::sampling::{make_grid, GridSpec, PointSet, SamplingError};

/// Largest residual magnitude tolerated on the exact solution.
pub const SELF_TEST_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProblemError {
    #[error("unknown problem '{0}' (expected kdv, heat, potential_burgers or inverse_burgers)")]
    Unknown(String),
    #[error("invalid inverse-problem constants: {0}")]
    InvalidConstants(String),
    #[error("self-test failed for {problem}: residual {term} reaches {max_abs:e} at (t={t}, x={x})")]
    SelfTest {
        problem: String,
        term: String,
        max_abs: f64,
        t: f64,
        x: f64,
    },
    #[error(transparent)]
    Sampling(#[from] SamplingError),
}

/// Whether a residual enforces the equation or a symmetry condition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ResidualKind {
    Pde,
    Isc,
}

/// A named residual node.
#[derive(Clone, Copy, Debug)]
pub struct Residual {
    pub term: &'static str,
    pub kind: ResidualKind,
    pub var: Var,
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) enum Equation {
    Kdv,
    Heat,
    PotentialBurgers,
    InverseBurgers(InverseParams),
}

/// Whether the problem is trained from initial/boundary data (forward) or
/// from interior observations with unknown coefficients (inverse).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Forward,
    Inverse,
}

/// A registered PDE problem.
#[derive(Clone, Debug, PartialEq)]
pub struct ProblemSpec {
    pub name: &'static str,
    pub grid: GridSpec,
    pub unknowns: usize,
    pub required_partials: PartialSet,
    pub mode: Mode,
    pub(crate) equation: Equation,
}

/// Per-unknown partial-derivative nodes.
#[derive(Clone, Copy, Debug, Default)]
pub struct FieldPartials {
    slots: [Option<Var>; SLOTS],
}

impl FieldPartials {
    pub fn get(&self, idx: MultiIndex) -> Var {
        self.slots[idx.slot()].unwrap_or_else(|| panic!("{idx} not available"))
    }

    pub fn value(&self) -> Var {
        self.get(MultiIndex::VALUE)
    }
}

/// Everything a residual may read, as value-only `1 × P` tape nodes.
#[derive(Clone, Debug)]
pub struct Fields {
    pub t: Var,
    pub x: Var,
    pub u: FieldPartials,
    pub v: Option<FieldPartials>,
    /// Current `(λ₁, λ₂)` for the inverse problem, as 1×1 nodes.
    pub lambda: Option<[Var; 2]>,
}

impl Fields {
    /// Splits a `unknowns × P` jet tensor (network output or closed form)
    /// into per-partial nodes.
    pub fn from_output(
        tape: &mut Tape,
        points: &[(f64, f64)],
        output: Var,
        set: PartialSet,
        lambda: Option<[Var; 2]>,
    ) -> Self {
        let p = points.len();
        let t = tape.constant(Tensor::from_values(1, p, points.iter().map(|q| q.0).collect()));
        let x = tape.constant(Tensor::from_values(1, p, points.iter().map(|q| q.1).collect()));
        let rows = tape.value(output).rows();
        let mut per_unknown = Vec::with_capacity(rows);
        for k in 0..rows {
            let row = tape.row(output, k);
            let mut fp = FieldPartials::default();
            for idx in set.indices() {
                fp.slots[idx.slot()] = Some(tape.partial(row, idx));
            }
            per_unknown.push(fp);
        }
        Self {
            t,
            x,
            u: per_unknown[0],
            v: per_unknown.get(1).copied(),
            lambda,
        }
    }

    pub fn v(&self) -> &FieldPartials {
        self.v.as_ref().expect("problem has no second unknown")
    }

    pub fn lambda(&self) -> [Var; 2] {
        self.lambda.expect("residual needs λ₁, λ₂")
    }
}

impl ProblemSpec {
    pub fn kdv() -> Self {
        kdv::spec()
    }

    pub fn heat() -> Self {
        heat::spec()
    }

    pub fn potential_burgers() -> Self {
        potential_burgers::spec()
    }

    pub fn inverse_burgers(
        lambda1_true: f64,
        lambda2_true: f64,
        c1: f64,
        c2: f64,
    ) -> Result<Self, ProblemError> {
        inverse_burgers::spec(InverseParams::new(lambda1_true, lambda2_true, c1, c2)?)
    }

    /// Looks up a problem by CLI name with default constants and runs the
    /// exact-solution self-test.
    pub fn by_name(name: &str) -> Result<Self, ProblemError> {
        let spec = match name {
            "kdv" => Self::kdv(),
            "heat" => Self::heat(),
            "potential_burgers" => Self::potential_burgers(),
            "inverse_burgers" => Self::inverse_burgers(1.0, 2.0, 1.0, 0.0)?,
            other => return Err(ProblemError::Unknown(other.to_string())),
        };
        spec.self_test()?;
        Ok(spec)
    }

    pub fn names() -> [&'static str; 4] {
        ["kdv", "heat", "potential_burgers", "inverse_burgers"]
    }

    pub fn with_grid(mut self, grid: GridSpec) -> Self {
        self.grid = grid;
        self
    }

    /// True `(λ₁, λ₂)` for the inverse problem.
    pub fn lambda_true(&self) -> Option<(f64, f64)> {
        match &self.equation {
            Equation::InverseBurgers(p) => Some((p.lambda1, p.lambda2)),
            _ => None,
        }
    }

    /// Closed-form exact solution `(u, v)`; `v` is 0 for scalar problems.
    pub fn exact(&self, t: f64, x: f64) -> [f64; 2] {
        let jets = self.exact_jet(t, x);
        [jets[0][0], jets.get(1).map_or(0.0, |j| j[0])]
    }

    /// Hand-derived partials of the exact solution, one jet per unknown, for
    /// every slot in `required_partials` (other slots are zero).
    pub fn exact_jet(&self, t: f64, x: f64) -> Vec<[f64; SLOTS]> {
        match &self.equation {
            Equation::Kdv => vec![kdv::exact_jet(t, x)],
            Equation::Heat => vec![heat::exact_jet(t, x)],
            Equation::PotentialBurgers => potential_burgers::exact_jet(t, x).to_vec(),
            Equation::InverseBurgers(p) => vec![p.exact_jet(t, x)],
        }
    }

    /// Initial/boundary target at a grid point of the initial slice or a
    /// boundary edge, from the problem's printed IB formulas.
    pub fn ib_target(&self, t: f64, x: f64) -> Option<[f64; 2]> {
        let (t0, (x0, x1)) = (self.grid.t_range.0, self.grid.x_range);
        let on = |a: f64, b: f64| (a - b).abs() <= 1e-12;
        let side = if on(t, t0) {
            IbSide::Initial
        } else if on(x, x0) {
            IbSide::Left
        } else if on(x, x1) {
            IbSide::Right
        } else {
            return None;
        };
        match &self.equation {
            Equation::Kdv => Some([kdv::ib(side, t, x), 0.0]),
            Equation::Heat => Some([heat::ib(side, t, x), 0.0]),
            Equation::PotentialBurgers => Some(potential_burgers::ib(side, t, x)),
            Equation::InverseBurgers(_) => None,
        }
    }

    /// Pool that training targets are drawn from: the initial slice plus the
    /// two boundary edges of the grid (forward problems), or the whole grid
    /// with exact values (inverse problem).
    pub fn ib_pool(&self) -> Result<PointSet, SamplingError> {
        let grid = make_grid(&self.grid)?;
        let mut points = Vec::new();
        let mut u = Vec::new();
        let mut v = Vec::new();
        for &(t, x) in &grid.points {
            let target = match self.mode {
                Mode::Forward => self.ib_target(t, x),
                Mode::Inverse => Some(self.exact(t, x)),
            };
            if let Some([tu, tv]) = target {
                points.push((t, x));
                u.push(tu);
                v.push(tv);
            }
        }
        Ok(PointSet {
            points,
            u: Some(u),
            v: (self.unknowns == 2).then_some(v),
        })
    }

    pub fn pde_residuals(&self, tape: &mut Tape, f: &Fields) -> Vec<Residual> {
        let list = match &self.equation {
            Equation::Kdv => kdv::pde(tape, f),
            Equation::Heat => heat::pde(tape, f),
            Equation::PotentialBurgers => potential_burgers::pde(tape, f),
            Equation::InverseBurgers(_) => inverse_burgers::pde(tape, f),
        };
        tag(list, ResidualKind::Pde)
    }

    pub fn isc_residuals(&self, tape: &mut Tape, f: &Fields) -> Vec<Residual> {
        let list = match &self.equation {
            Equation::Kdv => kdv::isc(tape, f),
            Equation::Heat => heat::isc(tape, f),
            Equation::PotentialBurgers => potential_burgers::isc(tape, f),
            Equation::InverseBurgers(_) => inverse_burgers::isc(tape, f),
        };
        tag(list, ResidualKind::Isc)
    }

    /// Names of the loss terms with and without the ISC terms.
    pub fn loss_term_names(&self, spinn: bool) -> Vec<&'static str> {
        let (data, pde, isc): (&[&str], &[&str], &[&str]) = match &self.equation {
            Equation::Kdv | Equation::Heat => (&["mse_u"], &["mse_f"], &["mse_isc"]),
            Equation::PotentialBurgers => {
                (&["mse_u", "mse_v"], &["mse_f", "mse_g"], &["mse_l", "mse_p"])
            }
            Equation::InverseBurgers(_) => (&["mse_data"], &["mse_f"], &["mse_g"]),
        };
        let mut names: Vec<&'static str> = data.iter().chain(pde).copied().collect();
        if spinn {
            names.extend(isc);
        }
        names
    }

    /// Builds [`Fields`] from the closed-form partials at `points`.
    pub fn exact_fields(&self, tape: &mut Tape, points: &[(f64, f64)]) -> Fields {
        let out = tape.constant(self.exact_tensor(points));
        let lambda = self
            .lambda_true()
            .map(|(l1, l2)| [tape.scalar(l1), tape.scalar(l2)]);
        Fields::from_output(tape, points, out, self.required_partials, lambda)
    }

    /// `unknowns × P` jet tensor of closed-form partials.
    pub fn exact_tensor(&self, points: &[(f64, f64)]) -> Tensor {
        let p = points.len();
        let set = self.required_partials;
        let mut out = Tensor::zeros(self.unknowns, p, set);
        for (i, &(t, x)) in points.iter().enumerate() {
            for (k, jet) in self.exact_jet(t, x).iter().enumerate() {
                for s in set.slots() {
                    out.slot_mut(s).unwrap()[k * p + i] = jet[s];
                }
            }
        }
        out
    }

    /// Max |residual| of every PDE and ISC residual over the full grid,
    /// evaluated on closed-form derivatives.
    pub fn residual_extremes(&self) -> Result<Vec<(&'static str, f64, (f64, f64))>, ProblemError> {
        let grid = make_grid(&self.grid)?;
        let mut tape = Tape::default();
        let fields = self.exact_fields(&mut tape, &grid.points);
        let mut all = self.pde_residuals(&mut tape, &fields);
        all.extend(self.isc_residuals(&mut tape, &fields));
        Ok(all
            .into_iter()
            .map(|r| {
                let (i, m) = tape
                    .value(r.var)
                    .values()
                    .iter()
                    .map(|v| v.abs())
                    .enumerate()
                    .fold((0, 0.0f64), |acc, (i, v)| if v > acc.1 || v.is_nan() { (i, v) } else { acc });
                (r.term, m, grid.points[i])
            })
            .collect())
    }

    /// Registration self-test: every residual vanishes on the exact solution.
    pub fn self_test(&self) -> Result<(), ProblemError> {
        for (term, m, (t, x)) in self.residual_extremes()? {
            if !(m < SELF_TEST_TOL) {
                return Err(ProblemError::SelfTest {
                    problem: self.name.to_string(),
                    term: term.to_string(),
                    max_abs: m,
                    t,
                    x,
                });
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum IbSide {
    Initial,
    Left,
    Right,
}

fn tag(list: Vec<(&'static str, Var)>, kind: ResidualKind) -> Vec<Residual> {
    list.into_iter()
        .map(|(term, var)| Residual { term, kind, var })
        .collect()
}

/// Small helpers so residual code reads close to the formulas.
pub(crate) struct Ops<'a>(pub &'a mut Tape);

impl Ops<'_> {
    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.0.add(a, b)
    }
    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.0.sub(a, b)
    }
    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.0.mul(a, b)
    }
    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        self.0.scale(a, c)
    }
    pub fn shift(&mut self, a: Var, c: f64) -> Var {
        self.0.shift(a, c)
    }
    pub fn sq(&mut self, a: Var) -> Var {
        self.0.square(a)
    }
    pub fn exp(&mut self, a: Var) -> Var {
        self.0.exp(a)
    }
    pub fn recip(&mut self, a: Var) -> Var {
        self.0.recip(a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_names() {
        for name in ProblemSpec::names() {
            let p = ProblemSpec::by_name(name).unwrap();
            assert_eq!(p.name, name);
        }
        assert!(matches!(ProblemSpec::by_name("wave"), Err(ProblemError::Unknown(_))));
    }

    #[test]
    fn ib_pool_sizes() {
        let p = ProblemSpec::kdv();
        let pool = p.ib_pool().unwrap();
        assert_eq!(pool.len(), 256 + 2 * 99);
        for &(t, x) in &pool.points {
            assert!(t == 0.0 || x == 0.0 || x == 1.0);
        }
        let b = ProblemSpec::potential_burgers();
        assert!(b.ib_pool().unwrap().v.is_some());
    }

    #[test]
    fn ib_formulas_agree_with_exact() {
        for name in ["kdv", "heat", "potential_burgers"] {
            let p = ProblemSpec::by_name(name).unwrap();
            let pool = p.ib_pool().unwrap();
            for (i, &(t, x)) in pool.points.iter().enumerate() {
                let e = p.exact(t, x);
                let tu = pool.u.as_ref().unwrap()[i];
                assert!((tu - e[0]).abs() < 1e-12 * (1.0 + e[0].abs()), "{name} u at {t},{x}");
                if let Some(v) = &pool.v {
                    assert!((v[i] - e[1]).abs() < 1e-12 * (1.0 + e[1].abs()), "{name} v at {t},{x}");
                }
            }
        }
    }

    #[test]
    fn term_names_follow_flag() {
        let k = ProblemSpec::kdv();
        assert_eq!(k.loss_term_names(false), vec!["mse_u", "mse_f"]);
        assert_eq!(k.loss_term_names(true), vec!["mse_u", "mse_f", "mse_isc"]);
        let b = ProblemSpec::potential_burgers();
        assert_eq!(b.loss_term_names(true).len(), 6);
    }
}
