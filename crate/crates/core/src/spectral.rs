//! Eigensystems of kernel integral operators: the analytic periodic family,
//! quadrature (Nystrom) approximations for everything else, truncated series
//! reconstruction of the kernel, powered kernels, inclusion/classification
//! diagnostics for sample-path smoothness.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::linalg::sym_eigen;
use crate::measure::Measure;
use crate::util::{midpoint_grid, ols_slope};

/// Eigenvalues below RETAIN_REL * lambda_1 are discarded: they carry no
/// usable information at double precision and break 1/lambda extensions.
pub const RETAIN_REL: f64 = 1e-12;

#[derive(Debug, Clone)]
enum Kind {
    /// Analytic eigensystem of the periodic kernel of order s on [0,1] with
    /// the uniform measure: constant mode, then cos/sin pairs.
    Periodic { s: u32 },
    /// Quadrature discretization: rows of `phi_nodes` hold eigenfunction
    /// values at the nodes; off-node evaluation extends through the kernel.
    Nystrom {
        kernel: Kernel,
        nodes: Vec<f64>,
        weights: Vec<f64>,
        phi_nodes: Array2<f64>,
    },
}

#[derive(Debug, Clone)]
pub struct EigenSystem {
    lambdas: Vec<f64>,
    kind: Kind,
}

impl EigenSystem {
    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    /// Eigenvalues, descending.
    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    /// The kernel whose integral operator this system diagonalizes.
    pub fn kernel(&self) -> Kernel {
        match &self.kind {
            Kind::Periodic { s } => Kernel::periodic(*s),
            Kind::Nystrom { kernel, .. } => kernel.clone(),
        }
    }

    /// i-th eigenfunction (0-based, matching `lambdas`) at scalar x.
    pub fn eigenfunction(&self, i: usize, x: f64) -> Result<f64> {
        if i >= self.lambdas.len() {
            return Err(Error::Shape(format!(
                "eigenfunction index {i} out of range ({} retained)",
                self.lambdas.len()
            )));
        }
        match &self.kind {
            Kind::Periodic { .. } => {
                // 1-based position: 1 -> constant, even -> sqrt(2) cos(i pi x),
                // odd >= 3 -> sqrt(2) sin((i-1) pi x).
                let pos = i + 1;
                let pi = std::f64::consts::PI;
                Ok(if pos == 1 {
                    1.0
                } else if pos % 2 == 0 {
                    2.0f64.sqrt() * (pos as f64 * pi * x).cos()
                } else {
                    2.0f64.sqrt() * ((pos - 1) as f64 * pi * x).sin()
                })
            }
            Kind::Nystrom {
                kernel,
                nodes,
                weights,
                phi_nodes,
            } => {
                // phi_i(x) = (1/lambda_i) sum_j w_j k(x, t_j) phi_i(t_j)
                let mut acc = 0.0;
                for (j, (&t, &w)) in nodes.iter().zip(weights).enumerate() {
                    acc += w * kernel.eval(&[x], &[t])? * phi_nodes[[i, j]];
                }
                Ok(acc / self.lambdas[i])
            }
        }
    }

    /// Truncated diagonal sum_{i<m} lambda_i phi_i(x)^2; the variance captured
    /// by the first m modes.
    pub fn diag_truncated(&self, x: f64, m: usize) -> Result<f64> {
        if m > self.lambdas.len() {
            return Err(Error::Shape(format!(
                "requested {m} modes, only {} retained",
                self.lambdas.len()
            )));
        }
        let mut acc = 0.0;
        for i in 0..m {
            let p = self.eigenfunction(i, x)?;
            acc += self.lambdas[i] * p * p;
        }
        Ok(acc)
    }

    /// k(x, x') - sum_{i<m} lambda_i phi_i(x) phi_i(x'): the truncation
    /// residual of the spectral series.
    pub fn mercer_residual(&self, x: f64, x2: f64, m: usize) -> Result<f64> {
        if m > self.lambdas.len() {
            return Err(Error::Shape(format!(
                "requested {m} modes, only {} retained",
                self.lambdas.len()
            )));
        }
        let k = self.kernel().eval(&[x], &[x2])?;
        let mut acc = 0.0;
        for i in 0..m {
            acc += self.lambdas[i] * self.eigenfunction(i, x)? * self.eigenfunction(i, x2)?;
        }
        Ok(k - acc)
    }

    /// Powered kernel sum_{i<m} lambda_i^theta phi_i(x) phi_i(x'), the
    /// reproducing kernel of the interpolation space of exponent theta.
    pub fn power_kernel_eval(&self, theta: f64, x: f64, x2: f64, m: usize) -> Result<f64> {
        if !(theta > 0.0 && theta <= 1.0) {
            return Err(Error::Domain(format!(
                "power kernel exponent must be in (0,1], got {theta}"
            )));
        }
        if m > self.lambdas.len() {
            return Err(Error::Shape(format!(
                "requested {m} modes, only {} retained",
                self.lambdas.len()
            )));
        }
        let mut acc = 0.0;
        for i in 0..m {
            acc += self.lambdas[i].powf(theta) * self.eigenfunction(i, x)? * self.eigenfunction(i, x2)?;
        }
        Ok(acc)
    }
}

/// Analytic eigensystem of the periodic kernel of order s with the uniform
/// measure on [0,1]: lambda_1 = 1 (constant), then pairs (m^-2s, m^-2s) for
/// the frequency-m cosine and sine.
pub fn periodic_eigensystem(s: u32, modes: usize) -> Result<EigenSystem> {
    Kernel::periodic(s).validate()?;
    if modes == 0 {
        return Err(Error::Shape("need at least one mode".into()));
    }
    let mut lambdas = Vec::with_capacity(modes);
    for pos in 1..=modes {
        let lam = if pos == 1 {
            1.0
        } else if pos % 2 == 0 {
            ((pos / 2) as f64).powi(-(2 * s as i32))
        } else {
            (((pos - 1) / 2) as f64).powi(-(2 * s as i32))
        };
        lambdas.push(lam);
    }
    Ok(EigenSystem {
        lambdas,
        kind: Kind::Periodic { s },
    })
}

/// Quadrature approximation of the kernel integral operator's eigensystem.
///
/// `measure` must be a scalar uniform interval (midpoint rule with equal
/// probability weights) or a finite measure (atoms as nodes). Eigenvalues
/// below RETAIN_REL * lambda_1 or <= 0 are dropped.
pub fn nystrom_eigensystem(kernel: &Kernel, measure: &Measure, n_nodes: usize) -> Result<EigenSystem> {
    kernel.validate()?;
    measure.validate()?;
    let (nodes, weights): (Vec<f64>, Vec<f64>) = match measure {
        Measure::UniformInterval { a, b } => {
            if n_nodes == 0 {
                return Err(Error::Shape("need at least one node".into()));
            }
            let nodes = midpoint_grid(*a, *b, n_nodes);
            let w = 1.0 / n_nodes as f64;
            (nodes, vec![w; n_nodes])
        }
        Measure::Finite { points, weights } => {
            if points.iter().any(|p| p.len() != 1) {
                return Err(Error::Unsupported(
                    "quadrature eigensystem is scalar-domain only".into(),
                ));
            }
            (points.iter().map(|p| p[0]).collect(), weights.clone())
        }
        _ => {
            return Err(Error::Unsupported(
                "quadrature eigensystem needs a uniform interval or finite measure".into(),
            ))
        }
    };

    let n = nodes.len();
    let mut b = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let v = kernel.eval(&[nodes[i]], &[nodes[j]])?
                * (weights[i] * weights[j]).sqrt();
            b[[i, j]] = v;
            b[[j, i]] = v;
        }
    }
    let (vals, vecs) = sym_eigen(&b)?;
    let lam1 = vals[0];
    if !(lam1 > 0.0) {
        return Err(Error::Numerical(
            "leading eigenvalue is not positive; kernel is not PSD on these nodes".into(),
        ));
    }
    let cutoff = RETAIN_REL * lam1;
    let kept = vals.iter().take_while(|&&v| v > cutoff).count();
    let lambdas: Vec<f64> = vals[..kept].to_vec();
    // phi_i(t_j) = v_ji / sqrt(w_j); rows indexed by eigenfunction.
    let mut phi_nodes = Array2::<f64>::zeros((kept, n));
    for i in 0..kept {
        for j in 0..n {
            phi_nodes[[i, j]] = vecs[[j, i]] / weights[j].sqrt();
        }
    }
    Ok(EigenSystem {
        lambdas,
        kind: Kind::Nystrom {
            kernel: kernel.clone(),
            nodes,
            weights,
            phi_nodes,
        },
    })
}

/// Upper bound on |mercer residual| for the periodic kernel of order s
/// truncated at `modes` terms: twice the eigenvalue tail by Cauchy-Schwarz
/// on the unit-bounded trig system (|phi| <= sqrt(2), product bounded by 2).
pub fn periodic_tail_bound(s: u32, modes: usize) -> f64 {
    let m0 = modes.saturating_sub(1) / 2; // complete frequencies included
    let p = 2 * s as i32;
    let mut tail = 0.0;
    let cut = 1_000_000usize;
    for m in (m0 + 1)..=cut {
        tail += (m as f64).powi(-p);
    }
    // integral remainder beyond the numeric cut
    tail += (cut as f64).powi(1 - p) / (p as f64 - 1.0);
    // a partially included frequency pair contributes at most one extra term
    let partial = if modes >= 2 && modes % 2 == 0 {
        ((modes / 2) as f64).powi(-p)
    } else {
        0.0
    };
    2.0 * tail + 2.0 * partial
}

// ====== inclusion diagnostics ======

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesClass {
    Convergent,
    Divergent,
}

#[derive(Debug, Clone)]
pub struct HsReport {
    /// Partial sum of lambda_i / gamma_i over the supplied indices.
    pub partial_sum: f64,
    /// Log-log slope of the ratio sequence fitted on the tail half.
    pub fitted_exponent: f64,
    pub classification: SeriesClass,
}

/// Diagnostic for sum_i lambda_i / gamma_i, the squared Hilbert-Schmidt-type
/// inclusion norm between two spectral scales. Classification fits the decay
/// exponent of the ratios on the tail half of the data: exponents below -1
/// summable, above not. Near-boundary exponents are inherently unreliable at
/// finite truncation; use `classify_exponents` when the true decays are known.
pub fn hs_inclusion_norm_sq(lambdas: &[f64], gammas: &[f64]) -> Result<HsReport> {
    if lambdas.len() != gammas.len() {
        return Err(Error::Shape(format!(
            "lambda/gamma length mismatch: {} vs {}",
            lambdas.len(),
            gammas.len()
        )));
    }
    if lambdas.len() < 8 {
        return Err(Error::Shape("need at least 8 terms to classify".into()));
    }
    if gammas.iter().any(|&g| !(g > 0.0)) {
        return Err(Error::Domain("gamma terms must be positive".into()));
    }
    if lambdas.iter().any(|&l| !(l >= 0.0)) {
        return Err(Error::Domain("lambda terms must be nonnegative".into()));
    }
    let ratios: Vec<f64> = lambdas.iter().zip(gammas).map(|(l, g)| l / g).collect();
    let partial_sum: f64 = ratios.iter().sum();
    let start = ratios.len() / 2;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (i, &r) in ratios.iter().enumerate().skip(start) {
        if r > 0.0 {
            xs.push(((i + 1) as f64).ln());
            ys.push(r.ln());
        }
    }
    if xs.len() < 2 {
        return Err(Error::Numerical(
            "too many zero ratios in the tail to fit a decay exponent".into(),
        ));
    }
    let fitted_exponent = ols_slope(&xs, &ys);
    let classification = if fitted_exponent < -1.0 {
        SeriesClass::Convergent
    } else {
        SeriesClass::Divergent
    };
    Ok(HsReport {
        partial_sum,
        fitted_exponent,
        classification,
    })
}

/// Analytic classification when both scales decay polynomially:
/// lambda_i ~ i^-p_lambda against gamma_i ~ i^-p_gamma is summable iff
/// p_lambda - p_gamma > 1.
pub fn classify_exponents(p_lambda: f64, p_gamma: f64) -> SeriesClass {
    if p_lambda - p_gamma > 1.0 {
        SeriesClass::Convergent
    } else {
        SeriesClass::Divergent
    }
}

#[derive(Debug, Clone)]
pub struct PowerClassReport {
    pub s: u32,
    pub theta: f64,
    /// Sample paths lie in the theta-powered space iff theta < threshold.
    pub threshold: f64,
    pub in_space: bool,
    /// Partial sums of sum_i lambda_i^(1-theta) at index checkpoints.
    pub partial_sums: Vec<(u64, f64)>,
}

/// Zero-one classification of sample-path membership in the theta-powered
/// space of the periodic kernel of order s: membership holds iff
/// sum_i lambda_i^(1-theta) < inf, i.e. theta < (2s-1)/(2s).
///
/// Partial sums at index checkpoints 1e2, 1e4, 1e6 are reported as a
/// numerical cross-check; their plateau/growth behavior is only decisive
/// away from the threshold.
pub fn power_classification(s: u32, theta: f64) -> Result<PowerClassReport> {
    Kernel::periodic(s).validate()?;
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::Domain(format!(
            "theta must be in (0,1], got {theta}"
        )));
    }
    let threshold = (2.0 * s as f64 - 1.0) / (2.0 * s as f64);
    let in_space = theta < threshold;
    let p = 2.0 * s as f64 * (1.0 - theta);
    let checkpoints = [100u64, 10_000, 1_000_000];
    let mut partial_sums = Vec::new();
    let mut acc = 0.0;
    let mut next = 0usize;
    for i in 1u64..=1_000_000 {
        let lam_pow = if i == 1 {
            1.0
        } else if i % 2 == 0 {
            ((i / 2) as f64).powf(-p)
        } else {
            (((i - 1) / 2) as f64).powf(-p)
        };
        acc += lam_pow;
        if next < checkpoints.len() && i == checkpoints[next] {
            partial_sums.push((i, acc));
            next += 1;
        }
    }
    Ok(PowerClassReport {
        s,
        theta,
        threshold,
        in_space,
        partial_sums,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn periodic_lambda_ladder() {
        let sys = periodic_eigensystem(1, 7).unwrap();
        let expect = [1.0, 1.0, 1.0, 0.25, 0.25, 1.0 / 9.0, 1.0 / 9.0];
        for (got, want) in sys.lambdas().iter().zip(expect) {
            assert!((got - want).abs() < 1e-15);
        }
        let sys2 = periodic_eigensystem(2, 5).unwrap();
        assert!((sys2.lambdas()[3] - 1.0 / 16.0).abs() < 1e-15);
    }

    #[test]
    fn periodic_eigenfunctions_orthonormal() {
        let sys = periodic_eigensystem(1, 6).unwrap();
        let grid = crate::util::midpoint_grid(0.0, 1.0, 4000);
        for a in 0..6 {
            for b in a..6 {
                let mut acc = 0.0;
                for &x in &grid {
                    acc += sys.eigenfunction(a, x).unwrap() * sys.eigenfunction(b, x).unwrap();
                }
                acc /= grid.len() as f64;
                let target = if a == b { 1.0 } else { 0.0 };
                assert!(
                    (acc - target).abs() < 1e-6,
                    "modes ({a},{b}): got {acc}, want {target}"
                );
            }
        }
    }

    #[test]
    fn mercer_residual_within_tail_bound() {
        for s in [1u32, 2] {
            let sys = periodic_eigensystem(s, 50).unwrap();
            let bound = periodic_tail_bound(s, 50);
            for &(x, y) in &[(0.0, 0.0), (0.3, 0.85), (0.5, 0.25), (0.99, 0.01)] {
                let r = sys.mercer_residual(x, y, 50).unwrap();
                assert!(
                    r.abs() <= bound,
                    "s={s}: residual {r} exceeds bound {bound}"
                );
            }
        }
    }

    #[test]
    fn nystrom_brownian_matches_analytic() {
        let sys = nystrom_eigensystem(&Kernel::Brownian, &Measure::uniform01(), 400).unwrap();
        for m in 1..=5 {
            let analytic = (PI * (m as f64 - 0.5)).powi(-2);
            let got = sys.lambdas()[m - 1];
            assert!(
                (got - analytic).abs() < 1e-5,
                "mode {m}: {got} vs {analytic}"
            );
        }
        // discrete orthonormality of the extended eigenfunctions at the nodes
        let nodes = crate::util::midpoint_grid(0.0, 1.0, 400);
        let w = 1.0 / 400.0;
        for a in 0..5 {
            for b in a..5 {
                let mut acc = 0.0;
                for &t in &nodes {
                    acc += w * sys.eigenfunction(a, t).unwrap() * sys.eigenfunction(b, t).unwrap();
                }
                let target = if a == b { 1.0 } else { 0.0 };
                assert!((acc - target).abs() < 1e-8, "({a},{b}): {acc}");
            }
        }
    }

    #[test]
    fn nystrom_finite_measure_diagonalizes_gram() {
        // For a finite measure the operator is the weighted Gram; the
        // truncated series must reproduce the kernel exactly on the atoms.
        let pts = vec![vec![0.2], vec![0.5], vec![0.9]];
        let meas = Measure::finite(pts.clone(), vec![0.2, 0.3, 0.5]).unwrap();
        let k = Kernel::se(1.0);
        let sys = nystrom_eigensystem(&k, &meas, 0).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let r = sys
                    .mercer_residual(pts[i][0], pts[j][0], sys.len())
                    .unwrap();
                assert!(r.abs() < 1e-10, "atoms ({i},{j}): residual {r}");
            }
        }
    }

    #[test]
    fn power_kernel_halves_order() {
        // sqrt of the order-2 eigenvalues is the order-1 ladder, so the
        // theta = 1/2 powered kernel of s=2 approximates the s=1 kernel.
        let sys = periodic_eigensystem(2, 400).unwrap();
        let k1 = Kernel::periodic(1);
        let tol = periodic_tail_bound(1, 400);
        for &(x, y) in &[(0.1, 0.7), (0.42, 0.42), (0.0, 0.6)] {
            let pk = sys.power_kernel_eval(0.5, x, y, 400).unwrap();
            let direct = k1.eval(&[x], &[y]).unwrap();
            assert!(
                (pk - direct).abs() <= tol,
                "({x},{y}): {pk} vs {direct}, tol {tol}"
            );
        }
    }

    #[test]
    fn hs_ratio_series() {
        let n = 1_000_000;
        let lambdas: Vec<f64> = (1..=n).map(|i| (i as f64).powi(-4)).collect();
        let gammas: Vec<f64> = (1..=n).map(|i| (i as f64).powi(-2)).collect();
        let rep = hs_inclusion_norm_sq(&lambdas, &gammas).unwrap();
        assert_eq!(rep.classification, SeriesClass::Convergent);
        assert!((rep.partial_sum - PI * PI / 6.0).abs() < 2e-6);
        assert!((rep.fitted_exponent + 2.0).abs() < 0.01);

        let same = hs_inclusion_norm_sq(&gammas[..1000], &gammas[..1000]).unwrap();
        assert_eq!(same.classification, SeriesClass::Divergent);
        assert!(same.fitted_exponent.abs() < 0.01);

        assert_eq!(classify_exponents(4.0, 2.0), SeriesClass::Convergent);
        assert_eq!(classify_exponents(2.0, 2.0), SeriesClass::Divergent);
    }

    #[test]
    fn power_classification_thresholds() {
        for (s, want) in [(1u32, 0.5), (2, 0.75), (3, 5.0 / 6.0)] {
            let rep = power_classification(s, 0.3).unwrap();
            assert!((rep.threshold - want).abs() < 1e-15, "s={s}");
        }
        // boundary-adjacent cases classify analytically
        assert!(power_classification(2, 0.74).unwrap().in_space);
        assert!(!power_classification(2, 0.76).unwrap().in_space);
        assert!(!power_classification(1, 0.5).unwrap().in_space);

        // interior diagnostics: plateau when summable, visible growth when not
        let inside = power_classification(2, 0.5).unwrap();
        let s4 = inside.partial_sums[1].1;
        let s6 = inside.partial_sums[2].1;
        assert!((s6 - s4) / s4 <= 0.05, "interior convergent plateau");

        let outside = power_classification(1, 0.6).unwrap();
        let s4 = outside.partial_sums[1].1;
        let s6 = outside.partial_sums[2].1;
        assert!((s6 - s4) / s4 >= 0.25, "interior divergent growth");
    }
}
