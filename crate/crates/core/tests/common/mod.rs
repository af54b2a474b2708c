#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spinn::loss::{LossObjective, LAMBDA_NAMES};
use spinn::network::{init_xavier, Architecture, MlpParams};
use spinn::problems::{Mode, ProblemSpec};
use spinn::sampling::{latin_hypercube, sample_ib, PointSet};

/// Small random setup for gradient checks: 2×10 network with perturbed
/// biases (and λ's in inverse mode), 5 boundary and 5 residual points.
pub struct GradCase {
    pub problem: ProblemSpec,
    pub params: MlpParams,
    pub ib: PointSet,
    pub colloc: PointSet,
}

pub fn grad_case(name: &str, seed: u64) -> GradCase {
    let problem = ProblemSpec::by_name(name).unwrap();
    let arch = Architecture::new(2, 10, problem.unknowns).unwrap();
    let extras: &[&str] = match problem.mode {
        Mode::Forward => &[],
        Mode::Inverse => &LAMBDA_NAMES,
    };
    let mut params = init_xavier(&arch, seed, extras).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    for l in arch.layers() {
        for b in &mut params.flat[l.bias_offset..l.bias_offset + l.fan_out] {
            *b = rng.gen_range(-0.5..0.5);
        }
    }
    let n = params.network_len();
    for v in &mut params.flat[n..] {
        *v = rng.gen_range(0.2..1.2);
    }
    let ib = sample_ib(&problem, 5, seed).unwrap();
    let colloc = latin_hypercube(5, problem.grid.t_range, problem.grid.x_range, seed);
    GradCase {
        problem,
        params,
        ib,
        colloc,
    }
}

/// Result of comparing the taped gradient with central differences.
#[derive(Debug)]
pub struct FdReport {
    pub checked: usize,
    pub worst_rel: f64,
    pub worst_index: usize,
}

pub const FD_STEP: f64 = 1e-5;
pub const FD_FLOOR: f64 = 1e-6;

pub fn fd_check(case: &GradCase, spinn: bool) -> FdReport {
    let mut obj = LossObjective::new(&case.problem, &case.params, &case.ib, &case.colloc, spinn);
    let (_, grad) = obj.evaluate(&case.params.flat).unwrap();
    let mut report = FdReport {
        checked: 0,
        worst_rel: 0.0,
        worst_index: 0,
    };
    let mut x = case.params.flat.clone();
    for i in 0..x.len() {
        if grad[i].abs() <= FD_FLOOR {
            continue;
        }
        let x0 = x[i];
        x[i] = x0 + FD_STEP;
        let plus = obj.evaluate(&x).unwrap().0.total;
        x[i] = x0 - FD_STEP;
        let minus = obj.evaluate(&x).unwrap().0.total;
        x[i] = x0;
        let fd = (plus - minus) / (2.0 * FD_STEP);
        let rel = (grad[i] - fd).abs() / grad[i].abs().max(fd.abs());
        report.checked += 1;
        if rel > report.worst_rel {
            report.worst_rel = rel;
            report.worst_index = i;
        }
    }
    report
}
