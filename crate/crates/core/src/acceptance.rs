//! The acceptance suite: thirteen pass/fail checks covering every identity
//! and rate experiment this library claims to get right. Each criterion is
//! deterministic given the seed and reports a one-line detail string with
//! its worst observed numbers, so a failure names the offending quantity.
//!
//! Tolerances are pinned here, not configurable: they define what "passes"
//! means for a build. Monte-Carlo gates use |z| <= 3 and are seed-dependent
//! by nature; the default seed is part of the contract.

use std::time::Instant;

use rand::Rng;

use crate::embeddings::{
    covariance_under_joint, discrepancy_sq_weighted, gpd_mc, gpic_mc, hsic_estimator,
    hsic_population, mmd_squared_exact, mmd_u_statistic, JointFiniteDistribution,
};
use crate::error::Result;
use crate::functionals::{apply_mc, master_equivalence_check, LinearFunctional, PwIntegrand};
use crate::gp::{self, PriorMean};
use crate::kernels::{Kernel, Point};
use crate::measure::Measure;
use crate::quadrature::bq_rule;
use crate::rkhs::{
    interpolation_weights, krr, min_norm_interpolant, power_function, worst_case_error,
    worst_case_error_regularized,
};
use crate::sampling::{standard_normals, KlSampler, RngSpec};
use crate::spectral::{
    nystrom_eigensystem, periodic_eigensystem, periodic_tail_bound, power_classification,
};
use crate::util::{ladder_slope, linspace, mean, median, midpoint_grid, rel_dev, sample_var};
use ndarray::Array2;

#[derive(Debug, Clone)]
pub struct CriterionOutcome {
    pub id: usize,
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
    pub millis: u128,
}

impl std::fmt::Display for CriterionOutcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "[{}] {:>2} {:<28} {:>6} ms  {}",
            if self.pass { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.millis,
            self.detail
        )
    }
}

/// The criteria in id order, for callers that want to run them one at a
/// time (progress reporting in the CLI).
pub fn criteria() -> Vec<fn(u64) -> CriterionOutcome> {
    vec![
        interpolation_duality,
        gpr_equals_krr,
        regularized_reductions,
        worst_case_identity,
        bq_variance_equals_mmd,
        master_equivalence,
        mercer_reconstruction,
        kl_expansion,
        sample_path_classification,
        contraction_slope,
        krr_rate,
        mmd_battery,
        hsic_identity,
    ]
}

/// Run every criterion in order. All thirteen must pass for a build to be
/// acceptable; `verify` in the CLI maps this to its exit status.
pub fn run_all(seed: u64) -> Vec<CriterionOutcome> {
    criteria().into_iter().map(|c| c(seed)).collect()
}

fn run(
    id: usize,
    name: &'static str,
    body: impl FnOnce() -> Result<(bool, String)>,
) -> CriterionOutcome {
    let t0 = Instant::now();
    let (pass, detail) = match body() {
        Ok((p, d)) => (p, d),
        Err(e) => (false, format!("error: {e}")),
    };
    CriterionOutcome {
        id,
        name,
        pass,
        detail,
        millis: t0.elapsed().as_millis(),
    }
}

// ====== shared random-instance battery ======

struct Instance {
    kernel: Kernel,
    xs: Vec<Point>,
    ys: Vec<f64>,
    probes: Vec<Point>,
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Uniform draws from [lo,hi]^d, keeping pairwise separation >= min_sep and
/// distance >= avoid_sep from every point in `avoid`. Gives up (returning
/// fewer points) only if the box cannot fit the request, which the battery
/// parameters never trigger.
fn sample_separated<R: Rng>(
    rng: &mut R,
    n: usize,
    d: usize,
    lo: f64,
    hi: f64,
    min_sep: f64,
    avoid: &[Point],
    avoid_sep: f64,
) -> Vec<Point> {
    let mut pts: Vec<Point> = Vec::with_capacity(n);
    let mut attempts = 0usize;
    while pts.len() < n && attempts < 400_000 {
        attempts += 1;
        let cand: Point = (0..d).map(|_| rng.random_range(lo..hi)).collect();
        if pts.iter().all(|p| dist(p, &cand) >= min_sep)
            && avoid.iter().all(|p| dist(p, &cand) >= avoid_sep)
        {
            pts.push(cand);
        }
    }
    pts
}

/// Random (kernel, points, values, probes) instances cycling five kernel
/// families. Separations are family-specific: the identities under test are
/// exact in arithmetic but compared across different summation orders, so
/// Gram conditioning must stay well clear of 1/eps; each family's minimum
/// separation keeps the smallest Gram eigenvalue macroscopic.
fn battery(seed: u64, tag: u64, count: usize) -> Vec<Instance> {
    let spec = RngSpec::new(seed).substream(tag);
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let mut rng = spec.replicate(i as u64);
        let cycle = (i / 5) % 2;
        let (kernel, d, lo, hi, n_lo, n_hi, min_sep) = match i % 5 {
            0 => {
                let gamma = rng.random_range(0.5..1.0);
                if cycle == 0 {
                    (Kernel::se(gamma), 1, -2.0, 2.0, 2usize, 6usize, 0.35)
                } else {
                    (Kernel::se(gamma), 2, -2.0, 2.0, 4, 14, 0.45)
                }
            }
            1 => {
                let h = rng.random_range(0.5..1.5);
                if cycle == 0 {
                    (Kernel::matern(1, h), 1, -2.0, 2.0, 2, 40, 0.08)
                } else {
                    (Kernel::matern(2, h), 1, -2.0, 2.0, 2, 14, 0.25)
                }
            }
            2 => {
                let h = rng.random_range(0.3..1.5);
                (Kernel::Laplace { h }, 1, -2.0, 2.0, 2, 40, 1e-3)
            }
            3 => (Kernel::Brownian, 1, 0.05, 1.0, 2, 40, 1e-3),
            _ => {
                let s = 1 + (cycle as u32);
                let sep = if s == 1 { 5e-3 } else { 0.02 };
                (Kernel::periodic(s), 1, 0.0, 0.995, 2, 40, sep)
            }
        };
        let n = rng.random_range(n_lo..=n_hi);
        let xs = sample_separated(&mut rng, n, d, lo, hi, min_sep, &[], 0.0);
        let ys = standard_normals(&mut rng, xs.len());
        let probes = sample_separated(&mut rng, 50, d, lo, hi, 0.0, &xs, 1e-4);
        out.push(Instance {
            kernel,
            xs,
            ys,
            probes,
        });
    }
    out
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

// ====== criterion 1 ======

/// Noiseless GP posterior mean == minimum-norm interpolant, probed off and
/// near the nodes, normalized by 1 + |y|_inf.
pub fn interpolation_duality(seed: u64) -> CriterionOutcome {
    run(1, "interpolation-duality", || {
        let instances = battery(seed, 1, 100);
        let mut max_dev = 0.0f64;
        let mut max_jitter = 0.0f64;
        let mut probes = 0usize;
        for inst in &instances {
            let fit = gp::fit(&inst.kernel, &inst.xs, &inst.ys, 0.0, PriorMean::Zero)?;
            let (span, rep) = min_norm_interpolant(&inst.kernel, &inst.xs, &inst.ys)?;
            max_jitter = max_jitter.max(fit.jitter_rel()).max(rep.jitter_rel);
            let scale = 1.0 + sup_norm(&inst.ys);
            for p in &inst.probes {
                let a = fit.posterior_mean(p)?;
                let b = span.eval(p)?;
                max_dev = max_dev.max((a - b).abs() / scale);
                probes += 1;
            }
        }
        let pass = max_dev <= 1e-8;
        Ok((
            pass,
            format!(
                "max normalized deviation {max_dev:.3e} over {} instances / {probes} probes (gate 1e-8), max jitter_rel {max_jitter:.1e}",
                instances.len()
            ),
        ))
    })
}

// ====== criterion 2 ======

/// GP regression with noise sigma^2 == kernel ridge regression at
/// lambda = sigma^2 / n, across three noise levels.
pub fn gpr_equals_krr(seed: u64) -> CriterionOutcome {
    run(2, "gpr-equals-krr", || {
        let instances = battery(seed, 2, 100);
        let mut max_dev = 0.0f64;
        let mut checks = 0usize;
        for inst in &instances {
            let scale = 1.0 + sup_norm(&inst.ys);
            for &noise in &[0.01, 0.1, 1.0] {
                let fit = gp::fit(&inst.kernel, &inst.xs, &inst.ys, noise, PriorMean::Zero)?;
                let lambda = noise / inst.xs.len() as f64;
                let (span, _) = krr(&inst.kernel, &inst.xs, &inst.ys, lambda)?;
                for p in &inst.probes {
                    let a = fit.posterior_mean(p)?;
                    let b = span.eval(p)?;
                    max_dev = max_dev.max((a - b).abs() / scale);
                    checks += 1;
                }
            }
        }
        let pass = max_dev <= 1e-8;
        Ok((
            pass,
            format!(
                "max normalized deviation {max_dev:.3e} over {} instances x 3 noise levels ({checks} probes, gate 1e-8)",
                instances.len()
            ),
        ))
    })
}

// ====== criterion 3 ======

/// Interpolating with the regularized kernel k + sigma^2 delta reduces to
/// ridge regression off the nodes, reproduces the data exactly at the nodes
/// (where ridge visibly does not), and shifts the posterior variance by
/// exactly sigma^2.
pub fn regularized_reductions(seed: u64) -> CriterionOutcome {
    run(3, "regularized-reductions", || {
        let instances = battery(seed, 3, 100);
        let mut max_mean_dev = 0.0f64;
        let mut max_node_dev = 0.0f64;
        let mut min_krr_gap = f64::INFINITY;
        let mut max_var_dev = 0.0f64;
        for (i, inst) in instances.iter().enumerate() {
            let noise = [0.01, 0.1, 1.0][i % 3];
            let n = inst.xs.len() as f64;
            let scale = 1.0 + sup_norm(&inst.ys);
            let reg = Kernel::regularized(inst.kernel.clone(), noise);
            let (f_reg, _) = min_norm_interpolant(&reg, &inst.xs, &inst.ys)?;
            let (f_krr, _) = krr(&inst.kernel, &inst.xs, &inst.ys, noise / n)?;
            for p in &inst.probes {
                let dev = (f_reg.eval(p)? - f_krr.eval(p)?).abs() / scale;
                max_mean_dev = max_mean_dev.max(dev);
            }
            let mut krr_gap = 0.0f64;
            for (x, y) in inst.xs.iter().zip(&inst.ys) {
                max_node_dev = max_node_dev.max((f_reg.eval(x)? - y).abs() / scale);
                krr_gap = krr_gap.max((f_krr.eval(x)? - y).abs() / scale);
            }
            min_krr_gap = min_krr_gap.min(krr_gap);
            let fit_noisy = gp::fit(&inst.kernel, &inst.xs, &inst.ys, noise, PriorMean::Zero)?;
            let fit_reg = gp::fit(&reg, &inst.xs, &inst.ys, 0.0, PriorMean::Zero)?;
            for p in &inst.probes {
                let a = fit_noisy.posterior_var(p)? + noise;
                let b = fit_reg.posterior_var(p)?;
                max_var_dev = max_var_dev.max(rel_dev(a, b, noise));
            }
        }
        let pass = max_mean_dev <= 1e-9
            && max_node_dev <= 1e-9
            && min_krr_gap > 1e-8
            && max_var_dev <= 1e-9;
        Ok((
            pass,
            format!(
                "off-node dev {max_mean_dev:.2e} (gate 1e-9), node reproduction dev {max_node_dev:.2e} (gate 1e-9), smallest krr node gap {min_krr_gap:.2e} (must exceed 1e-8), variance-shift dev {max_var_dev:.2e} (gate 1e-9)"
            ),
        ))
    })
}

// ====== criterion 4 ======

/// Worst-case prediction error under noise equals the noisy posterior sd
/// with the noise floor added back; the noiseless power function squared
/// equals the span norm of the residual of the optimal-weight rule.
pub fn worst_case_identity(seed: u64) -> CriterionOutcome {
    run(4, "worst-case-identity", || {
        let instances = battery(seed, 4, 100);
        let mut max_reg_dev = 0.0f64;
        let mut max_pow_dev = 0.0f64;
        for (i, inst) in instances.iter().enumerate() {
            let noise = [0.01, 0.1, 1.0][i % 3];
            let fit = gp::fit(&inst.kernel, &inst.xs, &inst.ys, noise, PriorMean::Zero)?;
            for p in inst.probes.iter().take(10) {
                let wce = worst_case_error_regularized(&inst.kernel, noise, &inst.xs, p)?;
                let v = fit.posterior_var(p)? + noise;
                max_reg_dev = max_reg_dev.max(rel_dev(wce * wce, v, noise));

                let w = interpolation_weights(&inst.kernel, &inst.xs, p)?;
                let wc = worst_case_error(&inst.kernel, &inst.xs, &w, p)?;
                let pf = power_function(&inst.kernel, &inst.xs, p)?;
                // the natural scale of power^2 is k(p,p); far below it both
                // sides sit at the quadratic-form noise floor
                let kpp = inst.kernel.eval(p, p)?;
                max_pow_dev = max_pow_dev.max(rel_dev(wc * wc, pf * pf, 1e-3 * kpp));
            }
        }
        let pass = max_reg_dev <= 1e-9 && max_pow_dev <= 1e-8;
        Ok((
            pass,
            format!(
                "regularized-identity dev {max_reg_dev:.2e} (gate 1e-9), power-vs-span-norm dev {max_pow_dev:.2e} (gate 1e-8)"
            ),
        ))
    })
}

// ====== criterion 5 ======

/// Bayesian-quadrature posterior variance equals the squared discrepancy
/// between the target and the weighted node measure, and the optimal weights
/// are a local minimum under +-1% perturbations.
pub fn bq_variance_equals_mmd(seed: u64) -> CriterionOutcome {
    run(5, "bq-variance-equals-mmd", || {
        let spec = RngSpec::new(seed).substream(5);
        let mut max_dev = 0.0f64;
        let mut min_var = f64::INFINITY;
        let mut worst_opt_gap = 0.0f64;
        for i in 0..100usize {
            let mut rng = spec.replicate(i as u64);
            let cfg = bq_config(i, &mut rng);
            let n_nodes = rng.random_range(1..=cfg.n_max);
            let nodes: Vec<Point> = if let Measure::IsotropicGaussian { .. } = cfg.measure {
                // rejection-sample from the target, keeping separation so
                // the Gram stays far from singular
                let mut pts: Vec<Point> = Vec::new();
                let mut tries = 0usize;
                while pts.len() < n_nodes && tries < 100_000 {
                    tries += 1;
                    let c = cfg.measure.sample(&mut rng);
                    if pts.iter().all(|p| dist(p, &c) >= cfg.sep) {
                        pts.push(c);
                    }
                }
                pts
            } else {
                sample_separated(&mut rng, n_nodes, cfg.d, cfg.lo, cfg.hi, cfg.sep, &[], 0.0)
            };
            let kernel = cfg.kernel;
            let measure = cfg.measure;
            let rule = bq_rule(&kernel, &measure, &nodes)?;
            let v = rule.posterior_variance();
            let m2 = rule.mmd_check()?;
            max_dev = max_dev.max(rel_dev(v, m2, 1e-12));
            min_var = min_var.min(v);
            if i % 2 == 0 {
                // perturbation optimality on half the battery
                let w = rule.weights().to_vec();
                let floor = sup_norm(&w).max(1e-6);
                for _ in 0..3 {
                    let pert: Vec<f64> = w
                        .iter()
                        .map(|&wi| {
                            let sign = if rng.random_range(0.0..1.0) < 0.5 {
                                -1.0
                            } else {
                                1.0
                            };
                            let base = if wi.abs() > 1e-12 { wi.abs() } else { floor };
                            wi + sign * 0.01 * base
                        })
                        .collect();
                    let d2 =
                        discrepancy_sq_weighted(&kernel, &measure, rule.nodes(), &pert)?;
                    worst_opt_gap = worst_opt_gap.max(v - d2);
                }
            }
        }
        let pass = max_dev <= 1e-10 && worst_opt_gap <= 1e-12;
        Ok((
            pass,
            format!(
                "variance-vs-mmd dev {max_dev:.2e} over 100 rules (gate 1e-10, smallest variance {min_var:.2e}), worst perturbation gain {worst_opt_gap:.2e} (gate 1e-12)"
            ),
        ))
    })
}

struct BqConfig {
    kernel: Kernel,
    measure: Measure,
    lo: f64,
    hi: f64,
    d: usize,
    sep: f64,
    n_max: usize,
}

/// Registered (kernel, measure) pair for battery index i, plus the node
/// sampling box. Separations and node caps are family-specific: the
/// variance-discrepancy identity is compared at 1e-10 relative, so the
/// smoother the kernel the larger the separation has to be to keep the
/// linear solve's residual out of the comparison.
fn bq_config<R: Rng>(i: usize, rng: &mut R) -> BqConfig {
    let c = |kernel, measure, lo, hi, d, sep, n_max| BqConfig {
        kernel,
        measure,
        lo,
        hi,
        d,
        sep,
        n_max,
    };
    match i % 10 {
        0 => c(Kernel::Brownian, Measure::uniform01(), 0.05, 1.0, 1, 0.05, 6),
        1 => c(Kernel::periodic(1), Measure::uniform01(), 0.0, 0.995, 1, 0.05, 6),
        2 => c(Kernel::periodic(2), Measure::uniform01(), 0.0, 0.995, 1, 0.1, 6),
        3 => {
            let gamma = rng.random_range(0.6..1.5);
            let m = Measure::IsotropicGaussian {
                mean: vec![rng.random_range(-0.5..0.5)],
                var: rng.random_range(0.3..1.2),
            };
            c(Kernel::se(gamma), m, 0.0, 0.0, 1, 0.5, 4)
        }
        4 => {
            let gamma = rng.random_range(0.6..1.5);
            let m = Measure::IsotropicGaussian {
                mean: vec![rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)],
                var: rng.random_range(0.3..1.2),
            };
            c(Kernel::se(gamma), m, 0.0, 0.0, 2, 0.5, 4)
        }
        5 => c(
            Kernel::se(rng.random_range(0.6..1.5)),
            finite_measure(rng, -1.0, 1.0, 1),
            -1.2,
            1.2,
            1,
            0.5,
            4,
        ),
        6 => c(
            Kernel::matern(1, rng.random_range(0.5..1.5)),
            finite_measure(rng, -1.0, 1.0, 1),
            -1.2,
            1.2,
            1,
            0.15,
            6,
        ),
        7 => c(
            Kernel::Laplace {
                h: rng.random_range(0.5..1.5),
            },
            finite_measure(rng, -1.0, 1.0, 1),
            -1.2,
            1.2,
            1,
            0.05,
            6,
        ),
        8 => c(
            Kernel::matern(2, rng.random_range(0.5..1.5)),
            finite_measure(rng, -1.0, 1.0, 1),
            -1.2,
            1.2,
            1,
            0.3,
            6,
        ),
        _ => c(
            Kernel::Brownian,
            finite_measure(rng, 0.05, 1.0, 1),
            0.05,
            1.0,
            1,
            0.05,
            6,
        ),
    }
}

/// Random finitely supported probability measure with 3..6 atoms.
fn finite_measure<R: Rng>(rng: &mut R, lo: f64, hi: f64, d: usize) -> Measure {
    let n = rng.random_range(3..=6usize);
    let points = sample_separated(rng, n, d, lo, hi, 0.01, &[], 0.0);
    let raw: Vec<f64> = (0..points.len())
        .map(|_| rng.random_range(0.05..1.0))
        .collect();
    let total: f64 = raw.iter().sum();
    let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
    Measure::finite(points, weights).expect("valid random finite measure")
}

// ====== criterion 6 ======

/// Root-mean-square of a linear functional applied to GP draws equals the
/// representer norm (|z| <= 3 with the grid-bias gate); the increment
/// integral recovers the L2 norms of its integrands.
pub fn master_equivalence(seed: u64) -> CriterionOutcome {
    run(6, "master-equivalence", || {
        let spec = RngSpec::new(seed).substream(6);
        let se = Kernel::se(1.0);
        let mut parts: Vec<String> = Vec::new();
        let mut pass = true;

        let ev = master_equivalence_check(
            &LinearFunctional::Evaluation { x: vec![0.3] },
            &se,
            &spec.substream(1),
            16,
            100_000,
        )?;
        pass &= ev.pass;
        parts.push(format!("eval z={:+.2}", ev.z));

        let centers = vec![vec![-0.5], vec![0.2], vec![0.9]];
        let weights = interpolation_weights(&se, &centers, &[0.45])?;
        let ef = master_equivalence_check(
            &LinearFunctional::ErrorFunctional {
                x: vec![0.45],
                centers,
                weights,
            },
            &se,
            &spec.substream(2),
            16,
            20_000,
        )?;
        pass &= ef.pass;
        parts.push(format!("error-functional z={:+.2}", ef.z));

        let grid = 2000usize;
        let reps = 20_000usize;
        for (tag, g, truth) in [
            (3u64, PwIntegrand::One, 1.0),
            (4, PwIntegrand::T, 1.0 / 3.0),
            (5, PwIntegrand::Sin2PiT, 0.5),
        ] {
            let a = LinearFunctional::PaleyWiener { g };
            let rep = master_equivalence_check(
                &a,
                &Kernel::Brownian,
                &spec.substream(tag),
                grid,
                reps,
            )?;
            pass &= rep.pass;
            let vals = apply_mc(&a, &Kernel::Brownian, &spec.substream(tag + 10), grid, reps)?;
            let squares: Vec<f64> = vals.iter().map(|v| v * v).collect();
            let ms = mean(&squares);
            let se_ms = (sample_var(&squares) / squares.len() as f64).sqrt();
            // discretization bias of the left-point sum is O(1/grid)
            let tol = 3.0 * se_ms + 2.0 / grid as f64;
            let ok = (ms - truth).abs() <= tol;
            pass &= ok;
            parts.push(format!(
                "increment[{g}] z={:+.2} ms={ms:.4} (target {truth:.4}, tol {tol:.1e})",
                rep.z
            ));
        }
        Ok((pass, parts.join("; ")))
    })
}

// ====== criterion 7 ======

/// Truncated spectral series reconstruct the periodic kernels within the
/// analytic tail bound, and quadrature eigenvalues for the first-passage
/// kernel match (pi (m - 1/2))^-2.
pub fn mercer_reconstruction(seed: u64) -> CriterionOutcome {
    run(7, "mercer-reconstruction", || {
        let _ = seed; // fully deterministic
        let grid = linspace(0.0, 1.0, 41);
        let mut max_excess = f64::NEG_INFINITY;
        for s in [1u32, 2] {
            let sys = periodic_eigensystem(s, 200)?;
            for &m in &[50usize, 200] {
                let bound = periodic_tail_bound(s, m);
                let mut sup = 0.0f64;
                for &x in &grid {
                    for &y in &grid {
                        sup = sup.max(sys.mercer_residual(x, y, m)?.abs());
                    }
                }
                max_excess = max_excess.max(sup - bound);
            }
        }
        let sys = nystrom_eigensystem(&Kernel::Brownian, &Measure::uniform01(), 450)?;
        let mut max_eig_err = 0.0f64;
        for m in 1..=5usize {
            let target = 4.0 / (std::f64::consts::PI.powi(2) * ((2 * m - 1) as f64).powi(2));
            max_eig_err = max_eig_err.max((sys.lambdas()[m - 1] - target).abs());
        }
        let pass = max_excess <= 0.0 && max_eig_err <= 1e-3;
        Ok((
            pass,
            format!(
                "sup residual minus tail bound {max_excess:.2e} (must be <= 0), quadrature eigenvalue error {max_eig_err:.2e} (gate 1e-3)"
            ),
        ))
    })
}

// ====== criterion 8 ======

/// Truncated spectral-expansion sampling reproduces the kernel as the
/// empirical covariance on a 9-point grid, within max(5 SE, truncation
/// bound) entrywise, and reruns are byte-identical.
pub fn kl_expansion(seed: u64) -> CriterionOutcome {
    run(8, "kl-expansion", || {
        let s = 2u32;
        let modes = 400usize;
        let reps = 20_000usize;
        let sys = periodic_eigensystem(s, modes)?;
        let grid = linspace(0.0, 1.0, 9);
        let sampler = KlSampler::new(&sys, modes, &grid)?;
        let spec = RngSpec::new(seed).substream(8);
        let kernel = Kernel::periodic(s);
        let trunc = periodic_tail_bound(s, modes);

        let draw_all = || -> Vec<Vec<f64>> {
            (0..reps)
                .map(|r| {
                    let mut rng = spec.replicate(r as u64);
                    sampler.draw(&mut rng)
                })
                .collect()
        };
        let draws = draw_all();
        let mut max_sigma = 0.0f64;
        let mut worst = (0usize, 0usize, 0.0f64, 0.0f64);
        let mut pass = true;
        for i in 0..9 {
            for j in i..9 {
                let prods: Vec<f64> = draws.iter().map(|f| f[i] * f[j]).collect();
                let c = mean(&prods);
                let kij = kernel.eval(&[grid[i]], &[grid[j]])?;
                let kii = kernel.eval(&[grid[i]], &[grid[i]])?;
                let kjj = kernel.eval(&[grid[j]], &[grid[j]])?;
                let se = ((kii * kjj + kij * kij) / reps as f64).sqrt();
                let tol = (5.0 * se).max(trunc);
                let sigmas = (c - kij).abs() / se;
                if sigmas > max_sigma {
                    max_sigma = sigmas;
                    worst = (i, j, c, kij);
                }
                pass &= (c - kij).abs() <= tol;
            }
        }
        let redraws = draw_all();
        let deterministic = draws
            .iter()
            .zip(&redraws)
            .all(|(a, b)| a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()));
        pass &= deterministic;
        Ok((
            pass,
            format!(
                "worst entry ({},{}) off by {:.2} SE (empirical {:.4} vs kernel {:.4}, gate 5 SE), rerun byte-identical: {deterministic}",
                worst.0, worst.1, max_sigma, worst.2, worst.3
            ),
        ))
    })
}

// ====== criterion 9 ======

/// Zero-one sample-path membership in powered spaces: threshold
/// (2s-1)/(2s), correct side classification, and partial sums that plateau
/// inside the space and grow outside it.
pub fn sample_path_classification(seed: u64) -> CriterionOutcome {
    run(9, "sample-path-classification", || {
        let _ = seed; // analytic
        let mut pass = true;
        let mut details = Vec::new();
        for s in [1u32, 2, 3] {
            let expected = (2.0 * s as f64 - 1.0) / (2.0 * s as f64);
            let below = power_classification(s, expected - 0.01)?;
            let above = power_classification(s, expected + 0.01)?;
            let at = power_classification(s, expected)?;
            pass &= (below.threshold - expected).abs() < 1e-15;
            pass &= below.in_space && !above.in_space && !at.in_space;
            details.push(format!("s={s} threshold {expected:.4}"));
        }
        // half-power example: exponent 1/2 sits inside for s >= 1 only when
        // the threshold exceeds it, i.e. never at s=1, always at s=2
        let s1 = power_classification(1, 0.5)?;
        let s2 = power_classification(2, 0.5)?;
        pass &= !s1.in_space && s2.in_space;

        // partial-sum diagnostics: plateau inside, growth outside
        let inside = power_classification(2, 0.5)?;
        let (_, s_mid) = inside.partial_sums[1];
        let (_, s_end) = inside.partial_sums[2];
        let plateau = (s_end - s_mid) / s_end;
        pass &= plateau < 1e-3;
        let outside = power_classification(1, 0.6)?;
        let (_, g_mid) = outside.partial_sums[1];
        let (_, g_end) = outside.partial_sums[2];
        let growth = g_end / g_mid;
        pass &= growth > 1.5;
        details.push(format!(
            "plateau tail fraction {plateau:.1e} (< 1e-3), divergent growth x{growth:.2} (> 1.5)"
        ));
        Ok((pass, details.join(", ")))
    })
}

// ====== criterion 10 ======

/// Posterior-variance contraction on uniform grids: log-log slope of the
/// variance at a mid-cell probe matches -2 alpha for the half-integer
/// families, within the stated windows.
pub fn contraction_slope(seed: u64) -> CriterionOutcome {
    run(10, "contraction-slope", || {
        let _ = seed; // deterministic grids
        let probe = [0.5];
        let mut pass = true;
        let mut parts = Vec::new();
        for (m, h, ns, target, tol) in [
            (1u32, 1.0, vec![16usize, 32, 64, 128, 256, 512], -3.0, 0.5),
            (2, 1.0, vec![8, 16, 32, 64, 128], -5.0, 0.8),
        ] {
            let kernel = Kernel::matern(m, h);
            let mut vars = Vec::new();
            let mut max_jitter = 0.0f64;
            for &n in &ns {
                let xs: Vec<Point> = linspace(0.0, 1.0, n).into_iter().map(|t| vec![t]).collect();
                let ys = vec![0.0; n];
                let fit = gp::fit(&kernel, &xs, &ys, 0.0, PriorMean::Zero)?;
                max_jitter = max_jitter.max(fit.jitter_rel());
                vars.push(fit.posterior_var(&probe)?);
            }
            let slope = ladder_slope(&ns, &vars);
            let ok = (slope - target).abs() <= tol && max_jitter <= 1e-6;
            pass &= ok;
            parts.push(format!(
                "order {m}: slope {slope:.2} (target {target} +- {tol}), jitter {max_jitter:.1e}"
            ));
        }
        Ok((pass, parts.join("; ")))
    })
}

// ====== criterion 11 ======

/// Ridge-regression risk decay for a Lipschitz target under iid noise:
/// median squared L2 error over seeds decreases monotonically along the
/// doubling ladder with fitted slope at most -0.45.
pub fn krr_rate(seed: u64) -> CriterionOutcome {
    run(11, "krr-rate", || {
        let kernel = Kernel::matern(1, 0.5);
        let sigma = 0.1f64;
        let ns = [64usize, 128, 256, 512, 1024, 2048, 4096];
        let n_max = 4096usize;
        let n_seeds = 10usize;
        let spec = RngSpec::new(seed).substream(11);
        let grid = midpoint_grid(0.0, 1.0, 1024);
        let fstar = |x: f64| x.min(1.0 - x);
        let mut errs = vec![Vec::with_capacity(n_seeds); ns.len()];
        let mut max_jitter = 0.0f64;
        for rep in 0..n_seeds {
            let mut rng = spec.replicate(rep as u64);
            // nested datasets: ladder point n uses the first n draws
            let xs_all: Vec<Point> = (0..n_max)
                .map(|_| vec![rng.random_range(0.0..1.0)])
                .collect();
            let noise = standard_normals(&mut rng, n_max);
            for (k, &n) in ns.iter().enumerate() {
                let xs = &xs_all[..n];
                let ys: Vec<f64> = xs
                    .iter()
                    .zip(&noise)
                    .map(|(x, e)| fstar(x[0]) + sigma * e)
                    .collect();
                let lambda = sigma * sigma / n as f64;
                let (span, rep_fit) = krr(&kernel, xs, &ys, lambda)?;
                max_jitter = max_jitter.max(rep_fit.jitter_rel);
                let mut sq = 0.0;
                for &g in &grid {
                    let d = span.eval(&[g])? - fstar(g);
                    sq += d * d;
                }
                errs[k].push(sq / grid.len() as f64);
            }
        }
        let medians: Vec<f64> = errs.iter().map(|e| median(e)).collect();
        let monotone = medians.windows(2).all(|w| w[1] < w[0]);
        let slope = ladder_slope(&ns, &medians);
        let pass = monotone && slope <= -0.45 && max_jitter <= 1e-6;
        Ok((
            pass,
            format!(
                "median squared L2 errors {} monotone: {monotone}, slope {slope:.3} (gate <= -0.45), jitter {max_jitter:.1e}",
                medians
                    .iter()
                    .map(|e| format!("{e:.1e}"))
                    .collect::<Vec<_>>()
                    .join(" > ")
            ),
        ))
    })
}

// ====== criterion 12 ======

/// Discrepancy battery: average-case (GP) and worst-case (kernel)
/// discrepancies agree by Monte Carlo, exact discrepancies behave as a
/// metric, the two-sample U-statistic is unbiased, and the empirical mean
/// embedding converges at the n^{-1/2} law.
pub fn mmd_battery(seed: u64) -> CriterionOutcome {
    run(12, "mmd-battery", || {
        let spec = RngSpec::new(seed).substream(12);
        let mut parts = Vec::new();
        let mut pass = true;

        // (a) GP-vs-kernel discrepancy by Monte Carlo on 20 random pairs
        let mut worst_z = 0.0f64;
        for i in 0..20usize {
            let mut rng = spec.substream(1).replicate(i as u64);
            let kernel = battery_kernel(i, &mut rng);
            let p = finite_measure(&mut rng, -1.0, 1.0, 1);
            let q = finite_measure(&mut rng, -1.0, 1.0, 1);
            let rep = gpd_mc(&kernel, &p, &q, &spec.substream(100 + i as u64), 20_000)?;
            pass &= rep.pass;
            if rep.z.abs() > worst_z.abs() {
                worst_z = rep.z;
            }
        }
        parts.push(format!("gp-discrepancy worst z={worst_z:+.2} over 20 pairs"));

        // (b) metric axioms on 100 random triples
        let mut max_violation = 0.0f64;
        for i in 0..100usize {
            let mut rng = spec.substream(2).replicate(i as u64);
            let kernel = battery_kernel(i, &mut rng);
            let p = finite_measure(&mut rng, -1.0, 1.0, 1);
            let q = finite_measure(&mut rng, -1.0, 1.0, 1);
            let r = finite_measure(&mut rng, -1.0, 1.0, 1);
            let dpq = mmd_squared_exact(&kernel, &p, &q)?.sqrt();
            let dqp = mmd_squared_exact(&kernel, &q, &p)?.sqrt();
            let dpp = mmd_squared_exact(&kernel, &p, &p)?;
            let dpr = mmd_squared_exact(&kernel, &p, &r)?.sqrt();
            let dqr = mmd_squared_exact(&kernel, &q, &r)?.sqrt();
            max_violation = max_violation
                .max((dpq - dqp).abs())
                .max(dpp.abs())
                .max(dpr - (dpq + dqr));
        }
        pass &= max_violation <= 1e-12;
        parts.push(format!(
            "metric-axiom violation {max_violation:.1e} on 100 triples (gate 1e-12)"
        ));

        // (c) unbiasedness of the U-statistic
        let kernel = Kernel::se(0.8);
        let p = Measure::finite(
            vec![vec![-0.7], vec![0.1], vec![0.9]],
            vec![0.3, 0.4, 0.3],
        )?;
        let q = Measure::finite(vec![vec![-0.2], vec![0.6]], vec![0.5, 0.5])?;
        let truth = mmd_squared_exact(&kernel, &p, &q)?;
        let resamples = 2000usize;
        let mut stats = Vec::with_capacity(resamples);
        for r in 0..resamples {
            let mut rng = spec.substream(3).replicate(r as u64);
            let xs: Vec<Point> = (0..14).map(|_| p.sample(&mut rng)).collect();
            let ys: Vec<Point> = (0..14).map(|_| q.sample(&mut rng)).collect();
            stats.push(mmd_u_statistic(&kernel, &xs, &ys)?);
        }
        let m = mean(&stats);
        let se = (sample_var(&stats) / resamples as f64).sqrt();
        let bias_sigmas = (m - truth).abs() / se;
        pass &= bias_sigmas <= 5.0;
        parts.push(format!(
            "u-statistic bias {bias_sigmas:.2} SE over {resamples} resamples (gate 5)"
        ));

        // (d) empirical mean embedding converges at the root-n law
        let atoms = vec![vec![-0.8], vec![-0.3], vec![0.1], vec![0.5], vec![0.9]];
        let weights = vec![0.1, 0.15, 0.2, 0.25, 0.3];
        let target = Measure::finite(atoms.clone(), weights.clone())?;
        let ns = [32usize, 64, 128, 256, 512, 1024, 2048, 4096];
        let n_top = *ns.last().unwrap();
        let embed_kernel = Kernel::se(0.7);
        // common random numbers: ladder point n reuses the first n draws of
        // each seed, so consecutive ratios concentrate at 2^{-1/2}
        let mut vals = vec![Vec::with_capacity(50); ns.len()];
        for s in 0..50usize {
            let mut rng = spec.substream(4).replicate(s as u64);
            let idxs: Vec<usize> = (0..n_top)
                .map(|_| {
                    let u: f64 = rng.random_range(0.0..1.0);
                    let mut acc = 0.0;
                    let mut idx = atoms.len() - 1;
                    for (j, w) in weights.iter().enumerate() {
                        acc += w;
                        if u < acc {
                            idx = j;
                            break;
                        }
                    }
                    idx
                })
                .collect();
            for (k, &n) in ns.iter().enumerate() {
                let mut counts = vec![0usize; atoms.len()];
                for &idx in &idxs[..n] {
                    counts[idx] += 1;
                }
                let mut pts = Vec::new();
                let mut ws = Vec::new();
                for (j, &c) in counts.iter().enumerate() {
                    if c > 0 {
                        pts.push(atoms[j].clone());
                        ws.push(c as f64 / n as f64);
                    }
                }
                let empirical = Measure::finite(pts, ws)?;
                vals[k].push(mmd_squared_exact(&embed_kernel, &target, &empirical)?.sqrt());
            }
        }
        let med: Vec<f64> = vals.iter().map(|v| median(v)).collect();
        let slope = ladder_slope(&ns, &med);
        let slope_ok = (-0.65..=-0.35).contains(&slope);
        pass &= slope_ok;
        parts.push(format!(
            "mean-embedding slope {slope:.3} (window [-0.65, -0.35])"
        ));

        Ok((pass, parts.join("; ")))
    })
}

fn battery_kernel<R: Rng>(i: usize, rng: &mut R) -> Kernel {
    match i % 5 {
        0 => Kernel::se(rng.random_range(0.5..1.5)),
        1 => Kernel::matern(1, rng.random_range(0.5..1.5)),
        2 => Kernel::Laplace {
            h: rng.random_range(0.5..1.5),
        },
        3 => Kernel::matern(2, rng.random_range(0.5..1.5)),
        _ => Kernel::se(rng.random_range(0.4..0.8)),
    }
}

// ====== criterion 13 ======

/// Dependence-measure identity: the expected squared covariance of
/// independent GP transforms equals the kernel independence criterion, which
/// equals the squared discrepancy between the joint and the product of
/// marginals under the product kernel.
pub fn hsic_identity(seed: u64) -> CriterionOutcome {
    run(13, "hsic-identity", || {
        let spec = RngSpec::new(seed).substream(13);
        let mut parts = Vec::new();
        let mut pass = true;

        // (a) population identity against the product-kernel discrepancy
        let mut max_dev = 0.0f64;
        for i in 0..50usize {
            let mut rng = spec.substream(1).replicate(i as u64);
            let k = battery_kernel(i, &mut rng);
            let l = battery_kernel(i + 3, &mut rng);
            let joint = random_joint(&mut rng);
            let a = hsic_population(&k, &l, &joint)?;
            let tensor = Kernel::tensor_pair(k.clone(), l.clone(), 1);
            let b = mmd_squared_exact(
                &tensor,
                &joint.stacked_measure()?,
                &joint.product_of_marginals().stacked_measure()?,
            )?;
            max_dev = max_dev.max((a - b).abs());
        }
        pass &= max_dev <= 1e-12;
        parts.push(format!(
            "population vs product-kernel discrepancy dev {max_dev:.1e} on 50 joints (gate 1e-12)"
        ));

        // (b) four-point indicator example: covariance exactly 1/4
        let joint = indicator_joint()?;
        let f_vals = [1.0, 0.0, 1.0];
        let g_vals = [0.0, 1.0, 0.0];
        let cov = covariance_under_joint(&joint, &f_vals, &g_vals)?;
        pass &= cov == 0.25;
        parts.push(format!("indicator covariance {cov} (must be exactly 0.25)"));

        // (c) Monte-Carlo dependence check on the indicator joint
        let rep = gpic_mc(
            &Kernel::se(1.0),
            &Kernel::se(1.0),
            &joint,
            &spec.substream(2),
            100_000,
        )?;
        pass &= rep.pass;
        parts.push(format!("gp-independence z={:+.2} at 1e5 reps", rep.z));

        // (d) estimator equals the spelled-out triple loop at n=3
        let k = Kernel::se(0.8);
        let l = Kernel::Laplace { h: 0.6 };
        let xs = vec![vec![0.2], vec![-0.4], vec![0.9]];
        let ys = vec![vec![1.1], vec![0.3], vec![-0.5]];
        let est = hsic_estimator(&k, &l, &xs, &ys)?;
        let n = 3usize;
        let nf = n as f64;
        let mut t1 = 0.0;
        let mut sk = 0.0;
        let mut sl = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    t1 += k.eval(&xs[i], &xs[j])? * l.eval(&ys[i], &ys[j])?;
                    sk += k.eval(&xs[i], &xs[j])?;
                    sl += l.eval(&ys[i], &ys[j])?;
                }
            }
        }
        let denom = nf * (nf - 1.0);
        let mut t3 = 0.0;
        for i in 0..n {
            let mut ki = 0.0;
            let mut li = 0.0;
            for j in 0..n {
                if i != j {
                    ki += k.eval(&xs[i], &xs[j])?;
                    li += l.eval(&ys[i], &ys[j])?;
                }
            }
            t3 += (ki / (nf - 1.0)) * (li / (nf - 1.0));
        }
        let brute = t1 / denom + (sk / denom) * (sl / denom) - 2.0 / nf * t3;
        let est_dev = (est - brute).abs();
        pass &= est_dev <= 1e-12;
        parts.push(format!("estimator vs brute force dev {est_dev:.1e} (gate 1e-12)"));

        Ok((pass, parts.join("; ")))
    })
}

/// Joint with 2..4 atoms per side and positive cell probabilities.
fn random_joint<R: Rng>(rng: &mut R) -> JointFiniteDistribution {
    let nx = rng.random_range(2..=4usize);
    let ny = rng.random_range(2..=4usize);
    let xs = sample_separated(rng, nx, 1, -1.0, 1.0, 0.05, &[], 0.0);
    let ys = sample_separated(rng, ny, 1, -1.0, 1.0, 0.05, &[], 0.0);
    let mut probs = Array2::<f64>::zeros((xs.len(), ys.len()));
    let mut total = 0.0;
    for i in 0..xs.len() {
        for j in 0..ys.len() {
            let v = rng.random_range(0.05..1.0);
            probs[[i, j]] = v;
            total += v;
        }
    }
    probs.mapv_inplace(|v| v / total);
    JointFiniteDistribution::new(xs, ys, probs).expect("valid random joint")
}

/// Uniform distribution on {(1,0), (-1,0), (0,-1), (0,1)} over the support
/// grid {-1,0,1} x {-1,0,1}.
fn indicator_joint() -> Result<JointFiniteDistribution> {
    let xs = vec![vec![-1.0], vec![0.0], vec![1.0]];
    let ys = vec![vec![-1.0], vec![0.0], vec![1.0]];
    let mut probs = Array2::<f64>::zeros((3, 3));
    probs[[0, 1]] = 0.25; // (-1, 0)
    probs[[2, 1]] = 0.25; // (1, 0)
    probs[[1, 0]] = 0.25; // (0, -1)
    probs[[1, 2]] = 0.25; // (0, 1)
    JointFiniteDistribution::new(xs, ys, probs)
}
