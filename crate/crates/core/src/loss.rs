//! Mean-squared-error objectives with unit weights.
//!
//! Forward problems: initial/boundary mismatch on the IB points, PDE
//! residuals on the collocation points and, with `spinn`, the ISC residuals
//! on the same collocation points. Inverse problems: data mismatch, PDE
//! residual and optional ISC, all on the observation points.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::autodiff::{AdError, MultiIndex, PartialSet, Tape, Tensor, Var};
use crate::network::{self, MlpParams, NetworkError};
use crate::problems::{Fields, Mode, ProblemSpec, Residual};
use crate::sampling::PointSet;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LossError {
    #[error("mse of an empty residual vector")]
    Empty,
    #[error("non-finite {term} residual at node {node}")]
    NonFiniteResidual { term: String, node: usize },
    #[error("point set is missing {0} targets")]
    MissingTargets(&'static str),
    #[error("network has {got} outputs, problem needs {expected}")]
    OutputMismatch { expected: usize, got: usize },
    #[error("inverse problem needs parameters named lambda1 and lambda2")]
    MissingLambda,
    #[error(transparent)]
    Ad(#[from] AdError),
    #[error(transparent)]
    Network(#[from] NetworkError),
}

/// Mean of squares.
pub fn mse(residuals: &[f64]) -> Result<f64, LossError> {
    if residuals.is_empty() {
        return Err(LossError::Empty);
    }
    Ok(residuals.iter().map(|r| r * r).sum::<f64>() / residuals.len() as f64)
}

/// Named loss terms and their sum.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub terms: BTreeMap<String, f64>,
    pub total: f64,
}

impl LossBreakdown {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.terms.get(name).copied()
    }
}

/// Names of the unknown-coefficient parameters in inverse mode.
pub const LAMBDA_NAMES: [&str; 2] = ["lambda1", "lambda2"];

/// Something that produces `(u[, v])` jets on a tape.
pub trait Surrogate {
    /// Parameter vector the tape is bound to.
    fn params(&self) -> &[f64];
    fn output_dim(&self) -> usize;
    /// Records a `output_dim × P` jet tensor at `points`, seeded for `set`.
    fn record(
        &self,
        tape: &mut Tape,
        points: &[(f64, f64)],
        set: PartialSet,
    ) -> Result<Var, LossError>;
    /// `(λ₁, λ₂)` nodes for inverse problems.
    fn lambda(&self, tape: &mut Tape) -> Result<Option<[Var; 2]>, LossError>;
}

/// The trainable network.
pub struct NetworkModel<'a> {
    pub params: &'a MlpParams,
}

impl Surrogate for NetworkModel<'_> {
    fn params(&self) -> &[f64] {
        &self.params.flat
    }

    fn output_dim(&self) -> usize {
        self.params.arch.output_dim
    }

    fn record(
        &self,
        tape: &mut Tape,
        points: &[(f64, f64)],
        set: PartialSet,
    ) -> Result<Var, LossError> {
        let input = tape.constant(network::input_tensor(points, set));
        Ok(network::forward(tape, self.params, input)?)
    }

    fn lambda(&self, tape: &mut Tape) -> Result<Option<[Var; 2]>, LossError> {
        match (
            self.params.extra_offset(LAMBDA_NAMES[0]),
            self.params.extra_offset(LAMBDA_NAMES[1]),
        ) {
            (Some(a), Some(b)) => Ok(Some([tape.param(a, 1, 1), tape.param(b, 1, 1)])),
            _ => Ok(None),
        }
    }
}

/// Closed-form exact solution standing in for the network; `lambda`
/// overrides the problem's true coefficients.
pub struct ExactModel<'a> {
    pub problem: &'a ProblemSpec,
    pub lambda: Option<(f64, f64)>,
}

impl Surrogate for ExactModel<'_> {
    fn params(&self) -> &[f64] {
        &[]
    }

    fn output_dim(&self) -> usize {
        self.problem.unknowns
    }

    fn record(
        &self,
        tape: &mut Tape,
        points: &[(f64, f64)],
        set: PartialSet,
    ) -> Result<Var, LossError> {
        let full = self.problem.exact_tensor(points);
        let mut t = Tensor::zeros(full.rows(), full.cols(), set);
        for s in set.slots() {
            if let Some(src) = full.slot(s) {
                t.slot_mut(s).unwrap().copy_from_slice(src);
            }
        }
        Ok(tape.constant(t))
    }

    fn lambda(&self, tape: &mut Tape) -> Result<Option<[Var; 2]>, LossError> {
        Ok(self
            .lambda
            .or(self.problem.lambda_true())
            .map(|(a, b)| [tape.scalar(a), tape.scalar(b)]))
    }
}

/// Recorded objective: the total node, per-term nodes and their values.
#[derive(Clone, Debug)]
pub struct AssembledLoss {
    pub total: Var,
    pub terms: BTreeMap<String, Var>,
    pub breakdown: LossBreakdown,
}

fn finish(tape: &mut Tape, terms: BTreeMap<String, Var>) -> AssembledLoss {
    let mut breakdown = LossBreakdown::default();
    let mut total: Option<Var> = None;
    let mut sum = 0.0;
    for (name, &var) in &terms {
        let v = tape.scalar_value(var);
        breakdown.terms.insert(name.clone(), v);
        sum += v;
        total = Some(match total {
            None => var,
            Some(acc) => tape.add(acc, var),
        });
    }
    breakdown.total = sum;
    AssembledLoss {
        total: total.expect("at least one loss term"),
        terms,
        breakdown,
    }
}

fn check_output(problem: &ProblemSpec, model: &dyn Surrogate) -> Result<(), LossError> {
    if model.output_dim() != problem.unknowns {
        return Err(LossError::OutputMismatch {
            expected: problem.unknowns,
            got: model.output_dim(),
        });
    }
    Ok(())
}

fn residual_terms(
    tape: &mut Tape,
    residuals: Vec<Residual>,
    terms: &mut BTreeMap<String, Var>,
) -> Result<(), LossError> {
    for r in residuals {
        if tape.check_finite(r.var).is_err() {
            return Err(LossError::NonFiniteResidual {
                term: r.term.to_string(),
                node: r.var.index(),
            });
        }
        let m = tape.mean_square(r.var);
        terms.insert(r.term.to_string(), m);
    }
    Ok(())
}

fn mismatch_term(
    tape: &mut Tape,
    output: Var,
    row: usize,
    targets: &[f64],
) -> Result<Var, LossError> {
    let pred = tape.row(output, row);
    let pred = if tape.value(pred).set().is_value_only() {
        pred
    } else {
        tape.partial(pred, MultiIndex::VALUE)
    };
    let target = tape.constant(Tensor::from_values(1, targets.len(), targets.to_vec()));
    let diff = tape.sub(pred, target);
    Ok(tape.mean_square(diff))
}

/// Forward-problem objective on `tape` (bound to `model.params()`).
pub fn assemble_forward(
    tape: &mut Tape,
    problem: &ProblemSpec,
    model: &dyn Surrogate,
    ib_points: &PointSet,
    colloc: &PointSet,
    spinn: bool,
) -> Result<AssembledLoss, LossError> {
    check_output(problem, model)?;
    let mut terms = BTreeMap::new();

    let out_ib = model.record(tape, &ib_points.points, PartialSet::VALUE_ONLY)?;
    let u = ib_points.u.as_ref().ok_or(LossError::MissingTargets("u"))?;
    terms.insert("mse_u".to_string(), mismatch_term(tape, out_ib, 0, u)?);
    if problem.unknowns == 2 {
        let v = ib_points.v.as_ref().ok_or(LossError::MissingTargets("v"))?;
        terms.insert("mse_v".to_string(), mismatch_term(tape, out_ib, 1, v)?);
    }

    let out = model.record(tape, &colloc.points, problem.required_partials)?;
    let lambda = model.lambda(tape)?;
    let fields = Fields::from_output(tape, &colloc.points, out, problem.required_partials, lambda);
    let pde = problem.pde_residuals(tape, &fields);
    residual_terms(tape, pde, &mut terms)?;
    if spinn {
        let isc = problem.isc_residuals(tape, &fields);
        residual_terms(tape, isc, &mut terms)?;
    }
    Ok(finish(tape, terms))
}

/// Inverse-problem objective; residuals are evaluated on the data points.
pub fn assemble_inverse(
    tape: &mut Tape,
    problem: &ProblemSpec,
    model: &dyn Surrogate,
    data: &PointSet,
    spinn: bool,
) -> Result<AssembledLoss, LossError> {
    check_output(problem, model)?;
    let lambda = model.lambda(tape)?.ok_or(LossError::MissingLambda)?;
    let mut terms = BTreeMap::new();
    let out = model.record(tape, &data.points, problem.required_partials)?;
    let u = data.u.as_ref().ok_or(LossError::MissingTargets("u"))?;
    terms.insert("mse_data".to_string(), mismatch_term(tape, out, 0, u)?);
    let fields = Fields::from_output(
        tape,
        &data.points,
        out,
        problem.required_partials,
        Some(lambda),
    );
    let pde = problem.pde_residuals(tape, &fields);
    residual_terms(tape, pde, &mut terms)?;
    if spinn {
        let isc = problem.isc_residuals(tape, &fields);
        residual_terms(tape, isc, &mut terms)?;
    }
    Ok(finish(tape, terms))
}

/// Loss-and-gradient closure state for the optimizers.
pub struct LossObjective<'a> {
    pub problem: &'a ProblemSpec,
    pub template: &'a MlpParams,
    pub ib_points: &'a PointSet,
    pub colloc: &'a PointSet,
    pub spinn: bool,
    tape: Tape,
    pub last: Option<LossBreakdown>,
}

impl<'a> LossObjective<'a> {
    /// For inverse problems `colloc` is ignored and `ib_points` are the data.
    pub fn new(
        problem: &'a ProblemSpec,
        template: &'a MlpParams,
        ib_points: &'a PointSet,
        colloc: &'a PointSet,
        spinn: bool,
    ) -> Self {
        Self {
            problem,
            template,
            ib_points,
            colloc,
            spinn,
            tape: Tape::default(),
            last: None,
        }
    }

    /// Loss breakdown and gradient at `flat`.
    pub fn evaluate(&mut self, flat: &[f64]) -> Result<(LossBreakdown, Vec<f64>), LossError> {
        let params = self.template.with_flat(flat.to_vec())?;
        self.tape.reset(flat);
        let model = NetworkModel { params: &params };
        let loss = match self.problem.mode {
            Mode::Forward => assemble_forward(
                &mut self.tape,
                self.problem,
                &model,
                self.ib_points,
                self.colloc,
                self.spinn,
            )?,
            Mode::Inverse => {
                assemble_inverse(&mut self.tape, self.problem, &model, self.ib_points, self.spinn)?
            }
        };
        let grad = self.tape.gradient(loss.total)?;
        self.last = Some(loss.breakdown.clone());
        Ok((loss.breakdown, grad))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mse_examples() {
        assert_eq!(mse(&[0.0, 0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(mse(&[1.0, -1.0]).unwrap(), 1.0);
        assert_eq!(mse(&[3.0, 4.0]).unwrap(), 12.5);
        assert_eq!(mse(&[]), Err(LossError::Empty));
    }
}
