//! Exact Gaussian process conditioning on finitely many observations.
//!
//! One factorization per fit: noiseless conditioning (interpolation) and
//! noisy regression differ only by the noise variance added to the Gram
//! diagonal. All posterior quantities flow through the stored factor and
//! dual coefficients (K + noise_var I)^{-1} (y - m(X)).

use crate::error::{Error, Result};
use crate::kernels::{Kernel, Point};
use crate::linalg::{cholesky_with_jitter, CholFactor, JitterPolicy};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PriorMean {
    Zero,
    Const(f64),
}

impl PriorMean {
    pub fn eval(&self, _x: &[f64]) -> f64 {
        match self {
            PriorMean::Zero => 0.0,
            PriorMean::Const(c) => *c,
        }
    }
}

#[derive(Debug)]
pub struct GpFit {
    kernel: Kernel,
    xs: Vec<Point>,
    ys: Vec<f64>,
    noise_var: f64,
    prior: PriorMean,
    chol: CholFactor,
    dual: Vec<f64>,
}

/// Condition a GP with covariance `kernel` and mean `prior` on observations
/// y_i = f(x_i) (+ noise of variance `noise_var` when positive).
pub fn fit(
    kernel: &Kernel,
    xs: &[Point],
    ys: &[f64],
    noise_var: f64,
    prior: PriorMean,
) -> Result<GpFit> {
    kernel.validate()?;
    if xs.is_empty() {
        return Err(Error::Shape("fit needs at least one observation".into()));
    }
    if xs.len() != ys.len() {
        return Err(Error::Shape(format!(
            "{} points vs {} observations",
            xs.len(),
            ys.len()
        )));
    }
    if !(noise_var >= 0.0) {
        return Err(Error::Domain(format!(
            "noise variance must be >= 0, got {noise_var}"
        )));
    }
    let mut gram = kernel.gram(xs)?;
    for i in 0..xs.len() {
        gram[[i, i]] += noise_var;
    }
    let chol = cholesky_with_jitter(&gram, JitterPolicy::default())?;
    let resid: Vec<f64> = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| y - prior.eval(x))
        .collect();
    let dual = chol.solve(&resid);
    Ok(GpFit {
        kernel: kernel.clone(),
        xs: xs.to_vec(),
        ys: ys.to_vec(),
        noise_var,
        prior,
        chol,
        dual,
    })
}

impl GpFit {
    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn xs(&self) -> &[Point] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn n(&self) -> usize {
        self.xs.len()
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    pub fn prior(&self) -> PriorMean {
        self.prior
    }

    /// Dual coefficients (K + noise_var I)^{-1} (y - m(X)).
    pub fn dual(&self) -> &[f64] {
        &self.dual
    }

    /// Jitter applied to the Gram, relative to its mean diagonal. Identity
    /// checks treat anything above 1e-6 as disqualifying for tight
    /// comparisons.
    pub fn jitter_rel(&self) -> f64 {
        self.chol.jitter_rel()
    }

    pub fn posterior_mean(&self, x: &[f64]) -> Result<f64> {
        let kv = self.kernel.kvec(&self.xs, x)?;
        let mut acc = self.prior.eval(x);
        for (k, d) in kv.iter().zip(&self.dual) {
            acc += k * d;
        }
        Ok(acc)
    }

    /// Posterior covariance k(x,x') - k_n(x)^T (K + noise_var I)^{-1} k_n(x').
    pub fn posterior_cov(&self, x: &[f64], x2: &[f64]) -> Result<f64> {
        let kx = self.kernel.kvec(&self.xs, x)?;
        let kx2 = self.kernel.kvec(&self.xs, x2)?;
        let sol = self.chol.solve(&kx2);
        let mut acc = self.kernel.eval(x, x2)?;
        for (k, s) in kx.iter().zip(&sol) {
            acc -= k * s;
        }
        Ok(acc)
    }

    /// Posterior variance with the roundoff clamp: mathematically nonnegative,
    /// tiny negatives go to zero, gross negatives are a numerical failure.
    pub fn posterior_var(&self, x: &[f64]) -> Result<f64> {
        let v = self.posterior_cov(x, x)?;
        let kxx = self.kernel.eval(x, x)?;
        if v < -1e-8 * kxx.abs().max(1e-10) {
            return Err(Error::Numerical(format!(
                "posterior variance {v} negative beyond roundoff"
            )));
        }
        Ok(v.max(0.0))
    }

    pub fn posterior_sd(&self, x: &[f64]) -> Result<f64> {
        Ok(self.posterior_var(x)?.sqrt())
    }

    /// Central credible interval mean +- z * sd (z = 1.96 for 95%).
    pub fn credible_interval(&self, x: &[f64], z: f64) -> Result<(f64, f64)> {
        let m = self.posterior_mean(x)?;
        let sd = self.posterior_sd(x)?;
        Ok((m - z * sd, m + z * sd))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(v: f64) -> Point {
        vec![v]
    }

    #[test]
    fn scalar_regression_shrinks() {
        // one SE observation y=1 at 0 with noise 0.25: dual = 1/(1+0.25)
        let f = fit(&Kernel::se(1.0), &[p(0.0)], &[1.0], 0.25, PriorMean::Zero).unwrap();
        assert!((f.dual()[0] - 0.8).abs() < 1e-14);
        assert!((f.posterior_mean(&[0.0]).unwrap() - 0.8).abs() < 1e-14);
        assert!((f.posterior_var(&[0.0]).unwrap() - 0.2).abs() < 1e-14);
    }

    #[test]
    fn brownian_interpolation_dual_and_mean() {
        let xs = vec![p(0.5), p(1.0)];
        let f = fit(&Kernel::Brownian, &xs, &[1.0, 0.0], 0.0, PriorMean::Zero).unwrap();
        assert!((f.dual()[0] - 4.0).abs() < 1e-12);
        assert!((f.dual()[1] + 2.0).abs() < 1e-12);
        // reproduces data at the nodes
        assert!((f.posterior_mean(&[0.5]).unwrap() - 1.0).abs() < 1e-12);
        assert!((f.posterior_mean(&[1.0]).unwrap() - 0.0).abs() < 1e-12);
        // linear in between for the min kernel
        assert!((f.posterior_mean(&[0.75]).unwrap() - 0.5).abs() < 1e-12);
        // posterior variance vanishes at the nodes
        assert!(f.posterior_var(&[0.5]).unwrap() < 1e-12);
    }

    #[test]
    fn constant_prior_dominates_far_away() {
        let f = fit(
            &Kernel::se(0.5),
            &[p(0.0)],
            &[3.0],
            0.0,
            PriorMean::Const(1.5),
        )
        .unwrap();
        let far = f.posterior_mean(&[50.0]).unwrap();
        assert!((far - 1.5).abs() < 1e-12);
        let near = f.posterior_mean(&[0.0]).unwrap();
        assert!((near - 3.0).abs() < 1e-12);
    }

    #[test]
    fn credible_interval_geometry() {
        let f = fit(&Kernel::se(1.0), &[p(0.0)], &[1.0], 0.25, PriorMean::Zero).unwrap();
        let (lo, hi) = f.credible_interval(&[2.0], 1.96).unwrap();
        let m = f.posterior_mean(&[2.0]).unwrap();
        let sd = f.posterior_sd(&[2.0]).unwrap();
        assert!((hi - m - 1.96 * sd).abs() < 1e-14);
        assert!((m - lo - 1.96 * sd).abs() < 1e-14);
        assert!(hi > lo);
    }

    #[test]
    fn posterior_cov_is_symmetric() {
        let xs = vec![p(0.1), p(0.6), p(0.9)];
        let f = fit(&Kernel::matern(1, 0.5), &xs, &[1.0, -0.5, 0.25], 0.01, PriorMean::Zero)
            .unwrap();
        let a = f.posterior_cov(&[0.3], &[0.7]).unwrap();
        let b = f.posterior_cov(&[0.7], &[0.3]).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn shape_errors() {
        assert!(fit(&Kernel::se(1.0), &[], &[], 0.0, PriorMean::Zero).is_err());
        assert!(fit(&Kernel::se(1.0), &[p(0.0)], &[1.0, 2.0], 0.0, PriorMean::Zero).is_err());
        assert!(fit(&Kernel::se(1.0), &[p(0.0)], &[1.0], -0.1, PriorMean::Zero).is_err());
    }
}
