//! Probabilistic integration: the posterior of int F dP given node values.
//!
//! The optimal weights are c* = K_n^{-1} mu_n with mu_n the kernel mean at
//! the nodes, and the posterior variance of the integral equals the squared
//! discrepancy between P and the weighted node measure. The variance does
//! not depend on the observed values, only on the node set.

use crate::embeddings::{discrepancy_sq_weighted, double_integral, kernel_mean};
use crate::error::{Error, Result};
use crate::kernels::{Kernel, Point};
use crate::linalg::{cholesky_with_jitter, JitterPolicy};
use crate::measure::Measure;
use crate::util::tree_sum;

#[derive(Debug, Clone)]
pub struct QuadratureRule {
    kernel: Kernel,
    measure: Measure,
    nodes: Vec<Point>,
    weights: Vec<f64>,
    posterior_variance: f64,
    jitter_rel: f64,
}

impl QuadratureRule {
    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn measure(&self) -> &Measure {
        &self.measure
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn posterior_variance(&self) -> f64 {
        self.posterior_variance
    }

    pub fn jitter_rel(&self) -> f64 {
        self.jitter_rel
    }

    /// Squared discrepancy between the target measure and the weighted node
    /// measure, recomputed from scratch; equals posterior_variance up to
    /// roundoff and serves as the self-check residual in reports.
    pub fn mmd_check(&self) -> Result<f64> {
        discrepancy_sq_weighted(&self.kernel, &self.measure, &self.nodes, &self.weights)
    }
}

/// Build the optimally weighted rule on the given nodes. An empty node set
/// is allowed: the variance is then the full double integral.
pub fn bq_rule(kernel: &Kernel, measure: &Measure, nodes: &[Point]) -> Result<QuadratureRule> {
    let pp = double_integral(kernel, measure)?;
    for i in 0..nodes.len() {
        for j in (i + 1)..nodes.len() {
            if nodes[i] == nodes[j] {
                return Err(Error::Domain(format!(
                    "quadrature nodes must be pairwise distinct; {:?} repeats",
                    nodes[i]
                )));
            }
        }
    }
    if nodes.is_empty() {
        return Ok(QuadratureRule {
            kernel: kernel.clone(),
            measure: measure.clone(),
            nodes: Vec::new(),
            weights: Vec::new(),
            posterior_variance: pp.max(0.0),
            jitter_rel: 0.0,
        });
    }
    let mut mu = Vec::with_capacity(nodes.len());
    for x in nodes {
        mu.push(kernel_mean(kernel, measure, x)?);
    }
    let gram = kernel.gram(nodes)?;
    let chol = cholesky_with_jitter(&gram, JitterPolicy::default())?;
    let weights = chol.solve(&mu);
    let reduction: f64 = mu.iter().zip(&weights).map(|(m, c)| m * c).sum();
    let v = pp - reduction;
    if v < -1e-12 {
        return Err(Error::Numerical(format!(
            "posterior variance {v} negative beyond roundoff"
        )));
    }
    Ok(QuadratureRule {
        kernel: kernel.clone(),
        measure: measure.clone(),
        nodes: nodes.to_vec(),
        weights,
        posterior_variance: v.max(0.0),
        jitter_rel: chol.jitter_rel(),
    })
}

/// Posterior mean of the integral: sum_i c*_i f(x_i).
pub fn bq_estimate(rule: &QuadratureRule, values: &[f64]) -> Result<f64> {
    if values.len() != rule.nodes.len() {
        return Err(Error::Shape(format!(
            "{} values vs {} nodes",
            values.len(),
            rule.nodes.len()
        )));
    }
    let terms: Vec<f64> = rule
        .weights
        .iter()
        .zip(values)
        .map(|(w, v)| w * v)
        .collect();
    Ok(tree_sum(&terms))
}

/// Equal-weight average of f over n i.i.d. draws from the measure.
pub fn mc_baseline<R: rand::Rng, F: Fn(&[f64]) -> f64>(
    measure: &Measure,
    f: F,
    n: usize,
    rng: &mut R,
) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain("need at least one draw".into()));
    }
    measure.validate()?;
    let mut vals = Vec::with_capacity(n);
    for _ in 0..n {
        let x = measure.sample(rng);
        vals.push(f(&x));
    }
    Ok(tree_sum(&vals) / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::RngSpec;
    use crate::util::rel_dev;

    fn p(v: f64) -> Point {
        vec![v]
    }

    #[test]
    fn single_node_weight_closed_form() {
        // weight = mu(x)/k(x,x) = (x - x^2/2)/x = 1 - x/2
        for &x in &[0.3, 0.5, 1.0] {
            let rule = bq_rule(&Kernel::Brownian, &Measure::uniform01(), &[p(x)]).unwrap();
            assert!(
                (rule.weights()[0] - (1.0 - x / 2.0)).abs() < 1e-12,
                "x = {x}"
            );
        }
    }

    #[test]
    fn empty_rule_variance_is_double_integral() {
        let rule = bq_rule(&Kernel::Brownian, &Measure::uniform01(), &[]).unwrap();
        assert!((rule.posterior_variance() - 1.0 / 3.0).abs() < 1e-15);
        assert!((rule.mmd_check().unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn periodic_mean_vector_is_all_ones() {
        let k = Kernel::PeriodicSobolev { s: 1 };
        let rule = bq_rule(&k, &Measure::uniform01(), &[p(0.1), p(0.4), p(0.8)]).unwrap();
        // K c = mu = 1 at every node
        let gram = k.gram(rule.nodes()).unwrap();
        for i in 0..3 {
            let mut acc = 0.0;
            for j in 0..3 {
                acc += gram[[i, j]] * rule.weights()[j];
            }
            assert!((acc - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn estimate_exact_for_spanned_integrand() {
        // f(x) = x = k(x, 1) lies in the span of the node section at 1
        let rule = bq_rule(&Kernel::Brownian, &Measure::uniform01(), &[p(1.0)]).unwrap();
        assert!((rule.weights()[0] - 0.5).abs() < 1e-13);
        let est = bq_estimate(&rule, &[1.0]).unwrap();
        assert!((est - 0.5).abs() < 1e-13);
        assert!(bq_estimate(&rule, &[]).is_err());
        assert_eq!(bq_estimate(&rule, &[0.0]).unwrap(), 0.0);
    }

    #[test]
    fn variance_equals_weighted_discrepancy() {
        let cases: Vec<(Kernel, Measure, Vec<Point>)> = vec![
            (
                Kernel::Brownian,
                Measure::uniform01(),
                vec![p(0.2), p(0.55), p(0.95)],
            ),
            (
                Kernel::PeriodicSobolev { s: 2 },
                Measure::uniform01(),
                vec![p(0.1), p(0.35), p(0.6), p(0.85)],
            ),
            (
                Kernel::se(0.7),
                Measure::IsotropicGaussian {
                    mean: vec![0.2],
                    var: 0.5,
                },
                vec![p(-0.5), p(0.2), p(1.1)],
            ),
        ];
        for (k, m, nodes) in cases {
            let rule = bq_rule(&k, &m, &nodes).unwrap();
            let mmd = rule.mmd_check().unwrap();
            assert!(
                rel_dev(rule.posterior_variance(), mmd, 1e-12) <= 1e-10,
                "{k}: {} vs {mmd}",
                rule.posterior_variance()
            );
        }
    }

    #[test]
    fn weights_minimize_the_discrepancy() {
        let k = Kernel::Brownian;
        let m = Measure::uniform01();
        let nodes = vec![p(0.25), p(0.5), p(0.75)];
        let rule = bq_rule(&k, &m, &nodes).unwrap();
        let base = rule.posterior_variance();
        let spec = RngSpec::new(42);
        let mut rng = spec.rng();
        for _ in 0..50 {
            let perturbed: Vec<f64> = rule
                .weights()
                .iter()
                .map(|w| {
                    let eps: f64 = rand::Rng::random_range(&mut rng, -0.01..0.01);
                    w * (1.0 + eps)
                })
                .collect();
            let v = discrepancy_sq_weighted(&k, &m, &nodes, &perturbed).unwrap();
            assert!(v >= base - 1e-12, "perturbed {v} below optimum {base}");
        }
    }

    #[test]
    fn adding_a_node_never_hurts() {
        let k = Kernel::Brownian;
        let m = Measure::uniform01();
        let mut nodes = vec![p(0.5)];
        let mut prev = bq_rule(&k, &m, &nodes).unwrap().posterior_variance();
        for &x in &[0.25, 0.75, 0.1, 0.9] {
            nodes.push(p(x));
            let v = bq_rule(&k, &m, &nodes).unwrap().posterior_variance();
            assert!(v <= prev + 1e-10, "variance rose {prev} -> {v}");
            prev = v;
        }
    }

    #[test]
    fn integration_error_bound_for_spanned_functions() {
        let k = Kernel::Brownian;
        let m = Measure::uniform01();
        let nodes = vec![p(0.2), p(0.6), p(0.9)];
        let rule = bq_rule(&k, &m, &nodes).unwrap();
        let zs = vec![p(0.15), p(0.5), p(0.85)];
        let a = [1.2, -0.4, 0.9];
        let f = crate::rkhs::SpanElement::new(k.clone(), zs.clone(), a.to_vec()).unwrap();
        let values: Vec<f64> = nodes.iter().map(|x| f.eval(x).unwrap()).collect();
        let est = bq_estimate(&rule, &values).unwrap();
        let truth: f64 = a
            .iter()
            .zip(&zs)
            .map(|(ai, z)| ai * kernel_mean(&k, &m, z).unwrap())
            .sum();
        let bound = f.norm().unwrap() * rule.posterior_variance().sqrt() + 1e-9;
        assert!(
            (est - truth).abs() <= bound,
            "|{est} - {truth}| > {bound}"
        );
    }

    #[test]
    fn baseline_sampling() {
        let spec = RngSpec::new(7);
        let mut rng = spec.rng();
        let c = mc_baseline(&Measure::uniform01(), |_| 2.5, 100, &mut rng).unwrap();
        assert_eq!(c, 2.5);
        let m = mc_baseline(&Measure::uniform01(), |x| x[0], 10_000, &mut rng).unwrap();
        // se of a uniform mean at n = 1e4 is ~0.0029
        assert!((m - 0.5).abs() <= 5.0 * 0.0029, "mean {m}");
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(bq_rule(
            &Kernel::Brownian,
            &Measure::uniform01(),
            &[p(0.5), p(0.5)]
        )
        .is_err());
        assert!(bq_rule(
            &Kernel::Brownian,
            &Measure::UniformInterval { a: 0.0, b: 2.0 },
            &[p(0.5)]
        )
        .is_err());
    }
}
