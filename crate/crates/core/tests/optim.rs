use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spinn::optim::{
    lbfgs_minimize, strong_wolfe, two_loop_direction, LbfgsConfig, LineSearchOutcome, WolfeParams,
};

type Mat = Vec<Vec<f64>>;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn matvec(m: &Mat, v: &[f64]) -> Vec<f64> {
    m.iter().map(|row| dot(row, v)).collect()
}

fn identity(n: usize) -> Mat {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

/// `H ← (I − ρsyᵀ) H (I − ρysᵀ) + ρssᵀ`.
fn bfgs_update(h: &Mat, s: &[f64], y: &[f64]) -> Mat {
    let n = s.len();
    let rho = 1.0 / dot(s, y);
    let hy = matvec(h, y);
    let yhy = dot(y, &hy);
    let mut out = h.clone();
    for i in 0..n {
        for j in 0..n {
            out[i][j] += -rho * (s[i] * hy[j] + hy[i] * s[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
        }
    }
    out
}

/// Random SPD matrix `QᵀDQ + I` and right-hand side.
fn quadratic(n: usize, seed: u64) -> (Mat, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b: Mat = (0..n).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let mut a = identity(n);
    for i in 0..n {
        for j in 0..n {
            a[i][j] += (0..n).map(|k| b[k][i] * b[k][j]).sum::<f64>();
        }
    }
    let rhs = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
    (a, rhs)
}

fn objective<'a>(a: &'a Mat, b: &'a [f64]) -> impl FnMut(&[f64]) -> Result<(f64, Vec<f64>), String> + 'a {
    move |x: &[f64]| {
        let ax = matvec(a, x);
        let g: Vec<f64> = ax.iter().zip(b).map(|(p, q)| p - q).collect();
        Ok((0.5 * dot(x, &ax) - dot(b, x), g))
    }
}

#[test]
fn two_loop_equals_dense_inverse_hessian() {
    let n = 7;
    let (a, _) = quadratic(n, 5);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut pairs = Vec::new();
    let mut h = identity(n);
    for _ in 0..5 {
        let s: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y = matvec(&a, &s);
        h = bfgs_update(&h, &s, &y);
        pairs.push((s, y));
    }
    let g: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let refs: Vec<(&[f64], &[f64])> = pairs.iter().map(|(s, y)| (&s[..], &y[..])).collect();
    let d = two_loop_direction(&g, &refs, 1.0);
    let dense = matvec(&h, &g);
    for (x, y) in d.iter().zip(&dense) {
        assert!((x + y).abs() < 1e-12, "{x} vs {}", -y);
    }
}

#[test]
fn unlimited_memory_matches_full_bfgs() {
    let n = 6;
    let (a, b) = quadratic(n, 1);
    let cfg = LbfgsConfig {
        memory: 1000,
        scale_initial_hessian: false,
        grad_tol: 1e-9,
        loss_tol: 0.0,
        ..Default::default()
    };
    let x0 = vec![1.5; n];
    let (x_lbfgs, trace) = lbfgs_minimize(&mut objective(&a, &b), &x0, &cfg).unwrap();

    let wolfe = WolfeParams {
        c1: cfg.wolfe_c1,
        c2: cfg.wolfe_c2,
        max_evals: cfg.max_linesearch_steps,
    };
    let mut f = objective(&a, &b);
    let mut x = x0.clone();
    let (mut loss, mut grad) = f(&x).unwrap();
    let mut h = identity(n);
    let mut first = true;
    for rec in &trace.records[1..] {
        let d: Vec<f64> = matvec(&h, &grad).iter().map(|v| -v).collect();
        let a0 = if first {
            1.0f64.min(1.0 / grad.iter().map(|g| g.abs()).sum::<f64>())
        } else {
            1.0
        };
        let LineSearchOutcome::Accepted {
            step,
            loss: new_loss,
            grad: new_grad,
            ..
        } = strong_wolfe(&mut f, &x, loss, &grad, &d, a0, wolfe)
        else {
            panic!("oracle line search failed");
        };
        let slope0 = dot(&grad, &d);
        assert!(new_loss <= loss + cfg.wolfe_c1 * step * slope0);
        assert!(dot(&new_grad, &d).abs() <= cfg.wolfe_c2 * slope0.abs());

        let s: Vec<f64> = d.iter().map(|v| step * v).collect();
        let y: Vec<f64> = new_grad.iter().zip(&grad).map(|(p, q)| p - q).collect();
        x.iter_mut().zip(&s).for_each(|(xi, si)| *xi += si);
        h = bfgs_update(&h, &s, &y);
        first = false;
        loss = new_loss;
        grad = new_grad;

        assert!((rec.step - step).abs() <= 1e-8 * step.abs(), "iteration {}", rec.iteration);
        assert!((rec.loss - loss).abs() <= 1e-10 * loss.abs().max(1.0));
    }
    for (p, q) in x_lbfgs.iter().zip(&x) {
        assert!((p - q).abs() < 1e-8);
    }
}
