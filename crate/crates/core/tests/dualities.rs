//! Cross-module identities between the process view (posterior means and
//! variances) and the function-space view (minimum-norm interpolants, ridge
//! estimates) on randomized instance batteries.

use kerndual::gp::{self, PriorMean};
use kerndual::kernels::{Kernel, Point};
use kerndual::linalg::{cholesky_with_jitter, JitterPolicy};
use kerndual::rkhs::{krr, min_norm_interpolant};
use kerndual::sampling::{standard_normals, RngSpec};
use ndarray::Array2;
use rand::Rng;

struct Instance {
    kernel: Kernel,
    xs: Vec<Point>,
    ys: Vec<f64>,
    probes: Vec<Point>,
}

fn sample_separated(
    rng: &mut impl Rng,
    n: usize,
    lo: f64,
    hi: f64,
    min_sep: f64,
    avoid: &[Point],
    avoid_sep: f64,
) -> Vec<Point> {
    let mut pts: Vec<Point> = Vec::with_capacity(n);
    let mut attempts = 0usize;
    // sequential placement saturates below the packing bound; callers size
    // the instance from what actually fit
    while pts.len() < n && attempts < 400_000 {
        attempts += 1;
        let c = rng.random_range(lo..hi);
        if pts.iter().all(|q| (q[0] - c).abs() >= min_sep)
            && avoid.iter().all(|q| (q[0] - c).abs() >= avoid_sep)
        {
            pts.push(vec![c]);
        }
    }
    assert!(pts.len() >= n.min(3), "separation {min_sep} left {} points", pts.len());
    pts
}

/// Cycles the closed-form families. Separations keep Gram conditioning well
/// inside the plain-Cholesky regime so no identity is polluted by jitter.
fn instances(seed: u64, count: usize) -> Vec<Instance> {
    let spec = RngSpec::new(seed);
    (0..count)
        .map(|i| {
            let mut rng = spec.replicate(i as u64);
            let (kernel, lo, hi, n_hi, sep) = match i % 6 {
                0 => (Kernel::se(rng.random_range(0.5..1.0)), -2.0, 2.0, 6, 0.35),
                1 => (
                    Kernel::matern(0, rng.random_range(0.5..1.5)),
                    -2.0,
                    2.0,
                    40,
                    0.01,
                ),
                2 => (
                    Kernel::matern(1, rng.random_range(0.5..1.5)),
                    -2.0,
                    2.0,
                    40,
                    0.08,
                ),
                3 => (
                    Kernel::matern(2, rng.random_range(0.5..1.5)),
                    -2.0,
                    2.0,
                    14,
                    0.25,
                ),
                4 => (Kernel::Brownian, 0.05, 1.0, 40, 1e-3),
                _ => (Kernel::periodic(1), 0.0, 0.995, 40, 5e-3),
            };
            let n = rng.random_range(3..=n_hi.max(3));
            let xs = sample_separated(&mut rng, n, lo, hi, sep, &[], 0.0);
            let ys = standard_normals(&mut rng, xs.len());
            let probes = sample_separated(&mut rng, 50, lo, hi, 0.0, &xs, 1e-4);
            Instance {
                kernel,
                xs,
                ys,
                probes,
            }
        })
        .collect()
}

fn sup_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

#[test]
fn noiseless_posterior_mean_is_the_minimum_norm_interpolant() {
    let mut worst: f64 = 0.0;
    for inst in instances(101, 100) {
        let scale = 1.0 + sup_abs(&inst.ys);
        let fit = gp::fit(&inst.kernel, &inst.xs, &inst.ys, 0.0, PriorMean::Zero).unwrap();
        let (span, rep) = min_norm_interpolant(&inst.kernel, &inst.xs, &inst.ys).unwrap();
        assert!(fit.jitter_rel() <= 1e-6 && rep.jitter_rel <= 1e-6);
        for q in &inst.probes {
            let dev = (fit.posterior_mean(q).unwrap() - span.eval(q).unwrap()).abs() / scale;
            worst = worst.max(dev);
        }
    }
    assert!(worst <= 1e-8, "worst normalized deviation {worst}");
}

#[test]
fn noisy_posterior_mean_is_ridge_regression_at_matched_penalty() {
    let noise = 0.1;
    let mut worst: f64 = 0.0;
    for inst in instances(103, 100) {
        let scale = 1.0 + sup_abs(&inst.ys);
        let fit = gp::fit(&inst.kernel, &inst.xs, &inst.ys, noise, PriorMean::Zero).unwrap();
        let (ridge, rep) = krr(
            &inst.kernel,
            &inst.xs,
            &inst.ys,
            noise / inst.xs.len() as f64,
        )
        .unwrap();
        assert!(fit.jitter_rel() <= 1e-6 && rep.jitter_rel <= 1e-6);
        for q in &inst.probes {
            let dev = (fit.posterior_mean(q).unwrap() - ridge.eval(q).unwrap()).abs() / scale;
            worst = worst.max(dev);
        }
    }
    assert!(worst <= 1e-8, "worst normalized deviation {worst}");
}

#[test]
fn observation_noise_equals_a_white_component_in_the_prior() {
    let noise = 0.09;
    let mut worst_mean: f64 = 0.0;
    let mut worst_var: f64 = 0.0;
    for inst in instances(107, 50) {
        let noisy = gp::fit(&inst.kernel, &inst.xs, &inst.ys, noise, PriorMean::Zero).unwrap();
        let white = Kernel::regularized(inst.kernel.clone(), noise);
        let latent = gp::fit(&white, &inst.xs, &inst.ys, 0.0, PriorMean::Zero).unwrap();
        let scale = 1.0 + sup_abs(&inst.ys);
        for q in &inst.probes {
            let dm =
                (noisy.posterior_mean(q).unwrap() - latent.posterior_mean(q).unwrap()).abs();
            worst_mean = worst_mean.max(dm / scale);
            let va = noisy.posterior_var(q).unwrap() + noise;
            let vb = latent.posterior_var(q).unwrap();
            worst_var = worst_var.max((va - vb).abs() / va.abs().max(vb.abs()));
        }
    }
    assert!(worst_mean <= 1e-9, "mean deviation {worst_mean}");
    assert!(worst_var <= 1e-9, "variance deviation {worst_var}");
}

#[test]
fn conditioning_on_more_points_never_increases_variance() {
    for inst in instances(109, 100) {
        let n = inst.xs.len();
        let smaller = gp::fit(
            &inst.kernel,
            &inst.xs[..n - 1],
            &inst.ys[..n - 1],
            0.0,
            PriorMean::Zero,
        )
        .unwrap();
        let larger = gp::fit(&inst.kernel, &inst.xs, &inst.ys, 0.0, PriorMean::Zero).unwrap();
        for q in &inst.probes {
            let before = smaller.posterior_var(q).unwrap();
            let after = larger.posterior_var(q).unwrap();
            assert!(
                after <= before + 1e-9,
                "{}: variance rose {before} -> {after} at {:?}",
                inst.kernel,
                q
            );
        }
    }
}

/// Draws from the joint posterior at four probes and compares the empirical
/// covariance against the closed form, entrywise within 5 standard errors.
#[test]
fn joint_posterior_draws_reproduce_the_posterior_covariance() {
    let kernel = Kernel::se(0.8);
    let xs: Vec<Point> = [-1.2, -0.3, 0.4, 1.1, 1.7].iter().map(|&v| vec![v]).collect();
    let ys = vec![0.3, -0.7, 1.1, 0.2, -0.4];
    let probes: Vec<Point> = [-0.8, 0.1, 0.75, 1.4].iter().map(|&v| vec![v]).collect();
    let fit = gp::fit(&kernel, &xs, &ys, 0.05, PriorMean::Zero).unwrap();

    let m = probes.len();
    let mut cov = Array2::<f64>::zeros((m, m));
    for i in 0..m {
        for j in 0..m {
            cov[[i, j]] = fit.posterior_cov(&probes[i], &probes[j]).unwrap();
        }
    }
    let chol = cholesky_with_jitter(&cov, JitterPolicy::default()).unwrap();

    let reps = 20_000usize;
    let spec = RngSpec::new(113);
    let mut acc = Array2::<f64>::zeros((m, m));
    for rep in 0..reps {
        let mut rng = spec.replicate(rep as u64);
        let z = standard_normals(&mut rng, m);
        let d = chol.mul_lower(&z);
        for i in 0..m {
            for j in 0..m {
                acc[[i, j]] += d[i] * d[j];
            }
        }
    }
    for i in 0..m {
        for j in 0..m {
            let emp = acc[[i, j]] / reps as f64;
            let se =
                ((cov[[i, i]] * cov[[j, j]] + cov[[i, j]] * cov[[i, j]]) / reps as f64).sqrt();
            assert!(
                (emp - cov[[i, j]]).abs() <= 5.0 * se,
                "entry ({i},{j}): empirical {emp} vs {} (se {se})",
                cov[[i, j]]
            );
        }
    }
}
