//! Strong-Wolfe line search: bracketing followed by zoom with safeguarded
//! cubic interpolation.

use super::{dot, Objective};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WolfeParams {
    pub c1: f64,
    pub c2: f64,
    pub max_evals: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub enum LineSearchOutcome {
    Accepted {
        step: f64,
        loss: f64,
        grad: Vec<f64>,
        evals: usize,
    },
    Failed {
        reason: String,
        evals: usize,
    },
}

struct Sample {
    step: f64,
    loss: f64,
    slope: f64,
    grad: Option<Vec<f64>>,
}

impl Sample {
    fn finite(&self) -> bool {
        self.loss.is_finite() && self.slope.is_finite()
    }
}

/// Minimizer of the cubic through `(a, fa, da)` and `(b, fb, db)`, if real.
fn cubic_min(a: f64, fa: f64, da: f64, b: f64, fb: f64, db: f64) -> Option<f64> {
    let d1 = da + db - 3.0 * (fa - fb) / (a - b);
    let disc = d1 * d1 - da * db;
    if !(disc >= 0.0) {
        return None;
    }
    let d2 = (b - a).signum() * disc.sqrt();
    let m = b - (b - a) * ((db + d2 - d1) / (db - da + 2.0 * d2));
    m.is_finite().then_some(m)
}

/// Finds a step along `dir` from `x` satisfying
/// `f(x + αd) ≤ f(x) + c1·α·∇f·d` and `|∇f(x + αd)·d| ≤ c2·|∇f·d|`.
pub fn strong_wolfe(
    obj: &mut dyn Objective,
    x: &[f64],
    loss0: f64,
    grad0: &[f64],
    dir: &[f64],
    initial_step: f64,
    p: WolfeParams,
) -> LineSearchOutcome {
    let slope0 = dot(grad0, dir);
    if !(slope0 < 0.0) {
        return LineSearchOutcome::Failed {
            reason: format!("not a descent direction (slope {slope0:e})"),
            evals: 0,
        };
    }
    let mut evals = 0;
    let mut trial = vec![0.0; x.len()];
    let mut sample = |obj: &mut dyn Objective, step: f64, evals: &mut usize| -> Sample {
        for ((t, xi), di) in trial.iter_mut().zip(x).zip(dir) {
            *t = xi + step * di;
        }
        *evals += 1;
        match obj.eval(&trial) {
            Ok((loss, grad)) if loss.is_finite() => {
                let slope = dot(&grad, dir);
                Sample {
                    step,
                    loss,
                    slope,
                    grad: Some(grad),
                }
            }
            _ => Sample {
                step,
                loss: f64::INFINITY,
                slope: f64::NAN,
                grad: None,
            },
        }
    };
    let armijo = |s: &Sample| s.loss <= loss0 + p.c1 * s.step * slope0;
    let curvature = |s: &Sample| s.slope.abs() <= -p.c2 * slope0;
    let accept = |s: Sample, evals: usize| LineSearchOutcome::Accepted {
        step: s.step,
        loss: s.loss,
        grad: s.grad.expect("finite sample carries a gradient"),
        evals,
    };

    let mut prev = Sample {
        step: 0.0,
        loss: loss0,
        slope: slope0,
        grad: None,
    };
    let mut step = initial_step;
    let (mut lo, mut hi);
    loop {
        let cur = sample(obj, step, &mut evals);
        if !cur.finite() || !armijo(&cur) || (evals > 1 && cur.loss >= prev.loss) {
            lo = prev;
            hi = cur;
            break;
        }
        if curvature(&cur) {
            return accept(cur, evals);
        }
        if cur.slope >= 0.0 {
            lo = cur;
            hi = prev;
            break;
        }
        if evals >= p.max_evals {
            return LineSearchOutcome::Failed {
                reason: "bracketing exhausted the evaluation budget".into(),
                evals,
            };
        }
        let next = cubic_min(prev.step, prev.loss, prev.slope, cur.step, cur.loss, cur.slope)
            .filter(|m| *m > cur.step * 1.1)
            .map_or(cur.step * 2.0, |m| m.min(cur.step * 10.0));
        prev = cur;
        step = next;
    }

    // Zoom: `lo` satisfies Armijo and has the lowest loss seen so far.
    while evals < p.max_evals {
        let width = hi.step - lo.step;
        if width.abs() <= f64::EPSILON * lo.step.abs().max(1e-300) {
            break;
        }
        let (a, b) = (lo.step.min(hi.step), lo.step.max(hi.step));
        let guard = 0.1 * (b - a);
        let cand = if hi.finite() {
            cubic_min(lo.step, lo.loss, lo.slope, hi.step, hi.loss, hi.slope)
        } else {
            None
        };
        let step = match cand {
            Some(m) if m > a + guard && m < b - guard => m,
            _ => 0.5 * (lo.step + hi.step),
        };
        let cur = sample(obj, step, &mut evals);
        if !cur.finite() || !armijo(&cur) || cur.loss >= lo.loss {
            hi = cur;
        } else {
            if curvature(&cur) {
                return accept(cur, evals);
            }
            if cur.slope * (hi.step - lo.step) >= 0.0 {
                hi = lo;
            }
            lo = cur;
        }
    }
    LineSearchOutcome::Failed {
        reason: format!(
            "zoom did not satisfy the strong Wolfe conditions within {} evaluations",
            p.max_evals
        ),
        evals,
    }
}
