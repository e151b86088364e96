//! The function-space side: finite kernel spans, minimum-norm interpolation,
//! kernel ridge regression, the power function, and fill distance.
//!
//! Ridge convention: the objective (1/n) sum of squared residuals plus
//! lambda * norm^2 gives coefficients (K + n*lambda*I)^{-1} y. The extra
//! factor n is deliberate and documented wherever lambda appears.

use crate::error::{Error, Result};
use crate::kernels::{Kernel, Point};
use crate::linalg::{cholesky_with_jitter, JitterPolicy};
use crate::util::tree_sum;

/// Finite span f = sum_i c_i k(., x_i). Immutable.
#[derive(Debug, Clone)]
pub struct SpanElement {
    kernel: Kernel,
    centers: Vec<Point>,
    coeffs: Vec<f64>,
}

impl SpanElement {
    pub fn new(kernel: Kernel, centers: Vec<Point>, coeffs: Vec<f64>) -> Result<SpanElement> {
        kernel.validate()?;
        if centers.len() != coeffs.len() {
            return Err(Error::Shape(format!(
                "{} centers vs {} coefficients",
                centers.len(),
                coeffs.len()
            )));
        }
        Ok(SpanElement {
            kernel,
            centers,
            coeffs,
        })
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn centers(&self) -> &[Point] {
        &self.centers
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        let mut terms = Vec::with_capacity(self.centers.len());
        for (c, center) in self.coeffs.iter().zip(&self.centers) {
            terms.push(c * self.kernel.eval(center, x)?);
        }
        Ok(tree_sum(&terms))
    }

    /// c^T K c. Mathematically >= 0; tiny negatives (within
    /// 1e-10 * |c|^2 * max diag) clamp to zero, anything worse errors.
    pub fn norm_sq(&self) -> Result<f64> {
        if self.centers.is_empty() {
            return Ok(0.0);
        }
        let gram = self.kernel.gram(&self.centers)?;
        let mut acc = 0.0;
        let mut max_diag: f64 = 0.0;
        for i in 0..self.coeffs.len() {
            max_diag = max_diag.max(gram[[i, i]].abs());
            for j in 0..self.coeffs.len() {
                acc += self.coeffs[i] * self.coeffs[j] * gram[[i, j]];
            }
        }
        let c2: f64 = self.coeffs.iter().map(|c| c * c).sum();
        if acc < -1e-10 * c2 * max_diag.max(1.0) {
            return Err(Error::Numerical(format!(
                "span norm^2 {acc} negative beyond roundoff"
            )));
        }
        Ok(acc.max(0.0))
    }

    pub fn norm(&self) -> Result<f64> {
        Ok(self.norm_sq()?.sqrt())
    }

    /// <f, g> = sum_ij c_i d_j k(x_i, z_j). Both spans must share a kernel.
    pub fn inner(&self, other: &SpanElement) -> Result<f64> {
        if self.kernel != other.kernel {
            return Err(Error::Unsupported(
                "inner product requires both spans over the same kernel".into(),
            ));
        }
        let cross = self.kernel.cross_gram(&self.centers, &other.centers)?;
        let mut acc = 0.0;
        for i in 0..self.coeffs.len() {
            for j in 0..other.coeffs.len() {
                acc += self.coeffs[i] * other.coeffs[j] * cross[[i, j]];
            }
        }
        Ok(acc)
    }

    pub fn scaled(&self, c: f64) -> SpanElement {
        let mut out = self.clone();
        for v in &mut out.coeffs {
            *v *= c;
        }
        out
    }

    /// f + g as one span over the concatenated centers.
    pub fn plus(&self, other: &SpanElement) -> Result<SpanElement> {
        if self.kernel != other.kernel {
            return Err(Error::Unsupported(
                "sum requires both spans over the same kernel".into(),
            ));
        }
        let mut centers = self.centers.clone();
        centers.extend(other.centers.iter().cloned());
        let mut coeffs = self.coeffs.clone();
        coeffs.extend(other.coeffs.iter().cloned());
        SpanElement::new(self.kernel.clone(), centers, coeffs)
    }
}

/// Conditioning report shared by the span fits.
#[derive(Debug, Clone, Copy)]
pub struct FitReport {
    /// Diagonal jitter relative to the mean Gram diagonal (0 when the plain
    /// factorization succeeded). Identity checks flag anything above 1e-6.
    pub jitter_rel: f64,
}

/// Minimum-norm interpolant: coefficients K^{-1} y.
pub fn min_norm_interpolant(
    kernel: &Kernel,
    xs: &[Point],
    ys: &[f64],
) -> Result<(SpanElement, FitReport)> {
    solve_span(kernel, xs, ys, 0.0)
}

/// Ridge regression estimate: coefficients (K + n*lambda*I)^{-1} y.
pub fn krr(
    kernel: &Kernel,
    xs: &[Point],
    ys: &[f64],
    lambda: f64,
) -> Result<(SpanElement, FitReport)> {
    if !(lambda > 0.0) {
        return Err(Error::Domain(format!(
            "ridge parameter must be > 0, got {lambda}"
        )));
    }
    solve_span(kernel, xs, ys, xs.len() as f64 * lambda)
}

fn solve_span(
    kernel: &Kernel,
    xs: &[Point],
    ys: &[f64],
    shift: f64,
) -> Result<(SpanElement, FitReport)> {
    kernel.validate()?;
    if xs.is_empty() {
        return Err(Error::Shape("need at least one data point".into()));
    }
    if xs.len() != ys.len() {
        return Err(Error::Shape(format!(
            "{} points vs {} values",
            xs.len(),
            ys.len()
        )));
    }
    let mut gram = kernel.gram(xs)?;
    for i in 0..xs.len() {
        gram[[i, i]] += shift;
    }
    let chol = cholesky_with_jitter(&gram, JitterPolicy::default())?;
    let coeffs = chol.solve(ys);
    let report = FitReport {
        jitter_rel: chol.jitter_rel(),
    };
    Ok((
        SpanElement::new(kernel.clone(), xs.to_vec(), coeffs)?,
        report,
    ))
}

/// Optimal interpolation weights w(x) = K^{-1} k_n(x).
pub fn interpolation_weights(kernel: &Kernel, xs: &[Point], x: &[f64]) -> Result<Vec<f64>> {
    if xs.is_empty() {
        return Ok(Vec::new());
    }
    let gram = kernel.gram(xs)?;
    let chol = cholesky_with_jitter(&gram, JitterPolicy::default())?;
    let kv = kernel.kvec(xs, x)?;
    Ok(chol.solve(&kv))
}

/// Power function sqrt(k(x,x) - k_n(x)^T K^{-1} k_n(x)): the worst-case
/// interpolation error at x over the unit ball, and the noiseless posterior
/// standard deviation. Empty node set gives sqrt(k(x,x)).
pub fn power_function(kernel: &Kernel, xs: &[Point], x: &[f64]) -> Result<f64> {
    let kxx = kernel.eval(x, x)?;
    if xs.is_empty() {
        return Ok(kxx.max(0.0).sqrt());
    }
    let gram = kernel.gram(xs)?;
    let chol = cholesky_with_jitter(&gram, JitterPolicy::default())?;
    let kv = kernel.kvec(xs, x)?;
    let half = chol.solve_lower(&kv);
    let quad: f64 = half.iter().map(|v| v * v).sum();
    let p2 = kxx - quad;
    if p2 < -1e-8 * kxx.abs().max(1e-10) {
        return Err(Error::Numerical(format!(
            "power function squared {p2} negative beyond roundoff"
        )));
    }
    Ok(p2.max(0.0).sqrt())
}

/// Worst-case error of the weighted rule x -> sum_i w_i f(x_i) as an estimate
/// of f(x), over the unit ball: the span norm of k(.,x) - sum w_i k(.,x_i).
pub fn worst_case_error(kernel: &Kernel, xs: &[Point], weights: &[f64], x: &[f64]) -> Result<f64> {
    if xs.len() != weights.len() {
        return Err(Error::Shape(format!(
            "{} points vs {} weights",
            xs.len(),
            weights.len()
        )));
    }
    let mut centers = vec![x.to_vec()];
    centers.extend(xs.iter().cloned());
    let mut coeffs = vec![1.0];
    coeffs.extend(weights.iter().map(|w| -w));
    let resid = SpanElement::new(kernel.clone(), centers, coeffs)?;
    resid.norm()
}

/// Worst-case error for predicting an RKHS function observed with noise of
/// variance noise_var, at a probe off the node set:
/// sqrt(k(x,x) - k_n^T (K + noise_var I)^{-1} k_n + noise_var).
pub fn worst_case_error_regularized(
    kernel: &Kernel,
    noise_var: f64,
    xs: &[Point],
    x: &[f64],
) -> Result<f64> {
    if !(noise_var > 0.0) {
        return Err(Error::Domain(format!(
            "noise variance must be > 0, got {noise_var}"
        )));
    }
    if xs.iter().any(|xi| xi.as_slice() == x) {
        return Err(Error::Domain(
            "worst-case identity is stated off the node set; probe coincides with a node".into(),
        ));
    }
    let kxx = kernel.eval(x, x)?;
    if xs.is_empty() {
        return Ok((kxx + noise_var).sqrt());
    }
    let mut gram = kernel.gram(xs)?;
    for i in 0..xs.len() {
        gram[[i, i]] += noise_var;
    }
    let chol = cholesky_with_jitter(&gram, JitterPolicy::default())?;
    let kv = kernel.kvec(xs, x)?;
    let half = chol.solve_lower(&kv);
    let quad: f64 = half.iter().map(|v| v * v).sum();
    let e2 = kxx - quad + noise_var;
    if e2 < 0.0 {
        return Err(Error::Numerical(format!(
            "worst-case error squared {e2} negative"
        )));
    }
    Ok(e2.sqrt())
}

/// |f(x) - interpolant(x)| <= f_norm * power_function(x).
pub fn error_bound(kernel: &Kernel, xs: &[Point], x: &[f64], f_norm: f64) -> Result<f64> {
    if !(f_norm >= 0.0) {
        return Err(Error::Domain(format!("norm must be >= 0, got {f_norm}")));
    }
    Ok(f_norm * power_function(kernel, xs, x)?)
}

#[derive(Debug, Clone, Copy)]
pub struct FillReport {
    /// Radius of the largest data-free hole inside the ball B(x, rho).
    pub value: f64,
    /// One-sided discretization error: true value <= value + grid_error.
    /// Zero in 1-D where the computation is exact.
    pub grid_error: f64,
    /// Set when the node set is empty and the whole ball is a hole.
    pub whole_ball: bool,
}

/// Largest hole sup_{z in B(x,rho)} min_i |z - x_i|. Exact in 1-D (the
/// distance-to-nearest-node function is piecewise linear with peaks only at
/// gap midpoints and window endpoints); probe-grid approximate in 2-D with
/// resolution^2 interior probes plus a boundary ring.
pub fn fill_distance(xs: &[Point], x: &[f64], rho: f64, resolution: usize) -> Result<FillReport> {
    if !(rho > 0.0) {
        return Err(Error::Domain(format!("radius must be > 0, got {rho}")));
    }
    let d = x.len();
    if d != 1 && d != 2 {
        return Err(Error::Unsupported(format!(
            "fill distance implemented for d in {{1,2}}, got d={d}"
        )));
    }
    for xi in xs {
        if xi.len() != d {
            return Err(Error::Shape(format!(
                "node dim {} vs probe dim {d}",
                xi.len()
            )));
        }
    }
    if xs.is_empty() {
        return Ok(FillReport {
            value: rho,
            grid_error: 0.0,
            whole_ball: true,
        });
    }
    if d == 1 {
        let lo = x[0] - rho;
        let hi = x[0] + rho;
        let mut pts: Vec<f64> = xs.iter().map(|p| p[0]).collect();
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut candidates = vec![lo, hi];
        for w in pts.windows(2) {
            let mid = 0.5 * (w[0] + w[1]);
            if mid > lo && mid < hi {
                candidates.push(mid);
            }
        }
        let mut best: f64 = 0.0;
        for c in candidates {
            let near = pts
                .iter()
                .map(|p| (p - c).abs())
                .fold(f64::INFINITY, f64::min);
            best = best.max(near);
        }
        return Ok(FillReport {
            value: best,
            grid_error: 0.0,
            whole_ball: false,
        });
    }
    if resolution < 2 {
        return Err(Error::Domain(format!(
            "2-D fill distance needs resolution >= 2, got {resolution}"
        )));
    }
    let spacing = 2.0 * rho / (resolution - 1) as f64;
    let mut probes: Vec<[f64; 2]> = Vec::new();
    for i in 0..resolution {
        for j in 0..resolution {
            let px = x[0] - rho + spacing * i as f64;
            let py = x[1] - rho + spacing * j as f64;
            if (px - x[0]).hypot(py - x[1]) <= rho {
                probes.push([px, py]);
            }
        }
    }
    let ring = ((2.0 * std::f64::consts::PI * rho / spacing).ceil() as usize).max(8);
    for m in 0..ring {
        let a = 2.0 * std::f64::consts::PI * m as f64 / ring as f64;
        probes.push([x[0] + rho * a.cos(), x[1] + rho * a.sin()]);
    }
    let mut best: f64 = 0.0;
    for p in &probes {
        let near = xs
            .iter()
            .map(|q| (q[0] - p[0]).hypot(q[1] - p[1]))
            .fold(f64::INFINITY, f64::min);
        best = best.max(near);
    }
    Ok(FillReport {
        value: best,
        grid_error: spacing,
        whole_ball: false,
    })
}
