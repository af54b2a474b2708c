mod common;

use spinn::autodiff::{MultiIndex, Tape};
use spinn::loss::{assemble_forward, assemble_inverse, ExactModel, NetworkModel};
use spinn::network::{Architecture, MlpParams};
use spinn::problems::ProblemSpec;
use spinn::sampling::{latin_hypercube, make_grid, sample_ib, PointSet};

fn forward_sets(problem: &ProblemSpec, seed: u64) -> (PointSet, PointSet) {
    let ib = sample_ib(problem, 100, seed).unwrap();
    let colloc = latin_hypercube(300, problem.grid.t_range, problem.grid.x_range, seed);
    (ib, colloc)
}

fn inverse_data(problem: &ProblemSpec, n: usize) -> PointSet {
    let grid = make_grid(&problem.grid).unwrap();
    let idx: Vec<usize> = (0..grid.len()).step_by(grid.len() / n).take(n).collect();
    let mut data = grid.select(&idx);
    data.u = Some(data.points.iter().map(|&(t, x)| problem.exact(t, x)[0]).collect());
    data
}

#[test]
fn exact_surrogate_zeroes_forward_loss() {
    for name in ["kdv", "heat", "potential_burgers"] {
        let problem = ProblemSpec::by_name(name).unwrap();
        let (ib, colloc) = forward_sets(&problem, 3);
        let model = ExactModel {
            problem: &problem,
            lambda: None,
        };
        let mut tape = Tape::new(Vec::new());
        let loss = assemble_forward(&mut tape, &problem, &model, &ib, &colloc, true).unwrap();
        for (term, v) in &loss.breakdown.terms {
            assert!(*v < 1e-20, "{name} {term} = {v:e}");
        }
        assert!(loss.breakdown.total < 1e-19, "{name}");
    }
}

#[test]
fn flag_controls_isc_terms() {
    for name in ProblemSpec::names() {
        let problem = ProblemSpec::by_name(name).unwrap();
        let case = common::grad_case(name, 1);
        let model = NetworkModel {
            params: &case.params,
        };
        let run = |spinn: bool| {
            let mut tape = Tape::new(case.params.flat.clone());
            if name == "inverse_burgers" {
                assemble_inverse(&mut tape, &problem, &model, &case.ib, spinn).unwrap()
            } else {
                assemble_forward(&mut tape, &problem, &model, &case.ib, &case.colloc, spinn)
                    .unwrap()
            }
            .breakdown
        };
        let (pinn, spinn) = (run(false), run(true));
        let pinn_names: Vec<_> = pinn.terms.keys().map(String::as_str).collect();
        let mut expected = problem.loss_term_names(false);
        expected.sort_unstable();
        assert_eq!(pinn_names, expected, "{name}");

        let mut extra = 0.0;
        for (term, v) in &spinn.terms {
            match pinn.get(term) {
                Some(p) => assert_eq!(p, *v, "{name} {term}"),
                None => {
                    assert!(*v >= 0.0);
                    extra += v;
                }
            }
        }
        assert!(extra > 0.0, "{name}");
        let diff = spinn.total - pinn.total;
        assert!((diff - extra).abs() <= 1e-12 * spinn.total, "{name}");
    }
}

#[test]
fn zero_network_kdv_ib_term_is_mean_square_target() {
    let problem = ProblemSpec::kdv();
    let (ib, colloc) = forward_sets(&problem, 11);
    let params = MlpParams::zeros(Architecture::new(2, 20, 1).unwrap(), &[]);
    let model = NetworkModel { params: &params };
    let mut tape = Tape::new(params.flat.clone());
    let loss = assemble_forward(&mut tape, &problem, &model, &ib, &colloc, false).unwrap();
    let targets = ib.u.as_ref().unwrap();
    let direct: f64 = ib
        .points
        .iter()
        .map(|&(t, x)| problem.ib_target(t, x).unwrap()[0].powi(2))
        .sum::<f64>()
        / ib.len() as f64;
    let stored = targets.iter().map(|u| u * u).sum::<f64>() / targets.len() as f64;
    let mse_u = loss.breakdown.get("mse_u").unwrap();
    assert!(mse_u > 0.0);
    assert!((mse_u - direct).abs() <= 1e-14 * direct);
    assert!((mse_u - stored).abs() <= 1e-14 * stored);
}

#[test]
fn exact_inverse_loss_vanishes() {
    let problem = ProblemSpec::by_name("inverse_burgers").unwrap();
    let data = inverse_data(&problem, 500);
    let model = ExactModel {
        problem: &problem,
        lambda: None,
    };
    for spinn in [false, true] {
        let mut tape = Tape::new(Vec::new());
        let loss = assemble_inverse(&mut tape, &problem, &model, &data, spinn).unwrap();
        assert!(loss.breakdown.total < 1e-19);
        assert_eq!(loss.breakdown.get("mse_g").is_some(), spinn);
    }
}

#[test]
fn perturbed_lambda_residual() {
    let problem = ProblemSpec::by_name("inverse_burgers").unwrap();
    let (l1, l2) = problem.lambda_true().unwrap();
    let data = inverse_data(&problem, 400);
    let model = ExactModel {
        problem: &problem,
        lambda: Some((l1 + 0.1, l2)),
    };
    let mut tape = Tape::new(Vec::new());
    let loss = assemble_inverse(&mut tape, &problem, &model, &data, false).unwrap();
    let ux = MultiIndex::X.slot();
    let expected = data
        .points
        .iter()
        .map(|&(t, x)| (0.1 * problem.exact_jet(t, x)[0][ux].powi(2)).powi(2))
        .sum::<f64>()
        / data.len() as f64;
    let mse_f = loss.breakdown.get("mse_f").unwrap();
    assert!(mse_f > 0.0);
    assert!((mse_f - expected).abs() <= 1e-10 * expected, "{mse_f} vs {expected}");
    assert_eq!(loss.breakdown.get("mse_data"), Some(0.0));
}

#[test]
fn loss_is_permutation_invariant() {
    for name in ["kdv", "potential_burgers"] {
        let problem = ProblemSpec::by_name(name).unwrap();
        let case = common::grad_case(name, 4);
        let (ib, colloc) = forward_sets(&problem, 4);
        let model = NetworkModel {
            params: &case.params,
        };
        let total = |ib: &PointSet, colloc: &PointSet| {
            let mut tape = Tape::new(case.params.flat.clone());
            assemble_forward(&mut tape, &problem, &model, ib, colloc, true)
                .unwrap()
                .breakdown
                .total
        };
        let rev = |p: &PointSet| p.select(&(0..p.len()).rev().collect::<Vec<_>>());
        let a = total(&ib, &colloc);
        let b = total(&rev(&ib), &rev(&colloc));
        assert!((a - b).abs() <= 1e-13 * a, "{name}: {a} vs {b}");
    }
}

#[test]
fn total_gradient_is_sum_of_term_gradients() {
    for name in ProblemSpec::names() {
        let problem = ProblemSpec::by_name(name).unwrap();
        let case = common::grad_case(name, 2);
        let model = NetworkModel {
            params: &case.params,
        };
        let mut tape = Tape::new(case.params.flat.clone());
        let loss = if name == "inverse_burgers" {
            assemble_inverse(&mut tape, &problem, &model, &case.ib, true).unwrap()
        } else {
            assemble_forward(&mut tape, &problem, &model, &case.ib, &case.colloc, true).unwrap()
        };
        let total = tape.gradient(loss.total).unwrap();
        let mut summed = vec![0.0; total.len()];
        for &var in loss.terms.values() {
            for (s, g) in summed.iter_mut().zip(tape.gradient(var).unwrap()) {
                *s += g;
            }
        }
        let scale = total.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        for (a, b) in total.iter().zip(&summed) {
            assert!((a - b).abs() <= 1e-12 * scale, "{name}: {a} vs {b}");
        }
    }
}
