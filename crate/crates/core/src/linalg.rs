//! Dense symmetric linear algebra: Cholesky with a reported jitter ladder,
//! triangular solves, symmetric eigendecomposition.
//!
//! Factorization and eigendecomposition call LAPACK through ndarray-linalg;
//! the O(n^2) substitutions are local loops so only one copy of the factor
//! is kept. Jitter is always reported, never silent: downstream identity
//! checks must be able to flag instances where diagonal inflation is large
//! enough to masquerade as a noise variance or a ridge parameter.

use ndarray::{Array2, s};
use ndarray_linalg::{Cholesky, Eigh, UPLO};

use crate::error::{Error, Result};

/// Diagonal-inflation retry policy for near-singular Gram matrices.
///
/// The plain factorization runs first. On failure, retry j (1-based) adds
/// `initial_rel * growth^(j-1) * mean(diag)` to the diagonal, up to
/// `max_attempts` retries.
#[derive(Debug, Clone, Copy)]
pub struct JitterPolicy {
    pub initial_rel: f64,
    pub growth: f64,
    pub max_attempts: u32,
}

impl Default for JitterPolicy {
    fn default() -> Self {
        JitterPolicy {
            initial_rel: 1e-10,
            growth: 10.0,
            max_attempts: 8,
        }
    }
}

/// Lower Cholesky factor of A + jitter*I, with the jitter that was needed.
#[derive(Debug, Clone)]
pub struct CholFactor {
    l: Array2<f64>,
    jitter: f64,
    mean_diag: f64,
    attempts: u32,
}

impl CholFactor {
    pub fn l(&self) -> &Array2<f64> {
        &self.l
    }

    pub fn n(&self) -> usize {
        self.l.nrows()
    }

    /// Absolute diagonal inflation that was applied (0 when none was needed).
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Jitter relative to the mean diagonal of the input matrix.
    pub fn jitter_rel(&self) -> f64 {
        if self.mean_diag > 0.0 {
            self.jitter / self.mean_diag
        } else {
            self.jitter
        }
    }

    /// Number of factorization calls made (1 = no jitter needed).
    pub fn attempts(&self) -> u32 {
        self.attempts
    }

    /// Solve L y = b.
    pub fn solve_lower(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n();
        assert_eq!(b.len(), n, "solve_lower: length mismatch");
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for j in 0..i {
                s -= self.l[[i, j]] * y[j];
            }
            y[i] = s / self.l[[i, i]];
        }
        y
    }

    /// Solve L^T x = y.
    pub fn solve_lower_t(&self, y: &[f64]) -> Vec<f64> {
        let n = self.n();
        assert_eq!(y.len(), n, "solve_lower_t: length mismatch");
        let mut x = y.to_vec();
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in (i + 1)..n {
                s -= self.l[[j, i]] * x[j];
            }
            x[i] = s / self.l[[i, i]];
        }
        x
    }

    /// Solve (A + jitter*I) x = b via the two triangular substitutions.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        self.solve_lower_t(&self.solve_lower(b))
    }

    /// L z: maps iid standard normals to a draw with covariance A + jitter*I.
    pub fn mul_lower(&self, z: &[f64]) -> Vec<f64> {
        let n = self.n();
        assert_eq!(z.len(), n, "mul_lower: length mismatch");
        let mut out = vec![0.0; n];
        for i in 0..n {
            let mut s = 0.0;
            for j in 0..=i {
                s += self.l[[i, j]] * z[j];
            }
            out[i] = s;
        }
        out
    }
}

fn check_finite(a: &Array2<f64>) -> Result<()> {
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite matrix entry".into()));
    }
    Ok(())
}

/// Cholesky factorization with the diagonal-inflation ladder.
///
/// Reads the lower triangle of `a` (assumed symmetric). Fails with
/// `Error::Numerical` once the ladder is exhausted.
pub fn cholesky_with_jitter(a: &Array2<f64>, policy: JitterPolicy) -> Result<CholFactor> {
    if a.nrows() != a.ncols() {
        return Err(Error::Shape(format!(
            "cholesky: matrix is {}x{}, not square",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.nrows() == 0 {
        return Err(Error::Shape("cholesky: empty matrix".into()));
    }
    check_finite(a)?;
    let n = a.nrows();
    let mean_diag = a.diag().sum() / n as f64;
    // Jitter scale for degenerate all-zero diagonals falls back to 1 so the
    // ladder still terminates with positive inflation.
    let scale = if mean_diag > 0.0 { mean_diag } else { 1.0 };

    let mut jitter = 0.0;
    let mut attempts = 0u32;
    loop {
        attempts += 1;
        let mut work = a.clone();
        if jitter > 0.0 {
            for i in 0..n {
                work[[i, i]] += jitter;
            }
        }
        match work.cholesky(UPLO::Lower) {
            Ok(mut l) => {
                // LAPACK leaves the strict upper triangle unspecified.
                for i in 0..n {
                    for j in (i + 1)..n {
                        l[[i, j]] = 0.0;
                    }
                }
                return Ok(CholFactor {
                    l,
                    jitter,
                    mean_diag,
                    attempts,
                });
            }
            Err(_) => {
                let retries_done = attempts - 1;
                if retries_done >= policy.max_attempts {
                    return Err(Error::Numerical(format!(
                        "cholesky failed after {} attempts (final jitter {:.3e}, mean diag {:.3e})",
                        attempts, jitter, mean_diag
                    )));
                }
                jitter = if jitter == 0.0 {
                    policy.initial_rel * scale
                } else {
                    jitter * policy.growth
                };
            }
        }
    }
}

/// Full symmetric eigendecomposition, eigenvalues descending.
///
/// Returns (eigenvalues, V) with eigenvectors in the columns of V, so
/// A = V diag(w) V^T. Reads the lower triangle.
pub fn sym_eigen(a: &Array2<f64>) -> Result<(Vec<f64>, Array2<f64>)> {
    if a.nrows() != a.ncols() {
        return Err(Error::Shape(format!(
            "sym_eigen: matrix is {}x{}, not square",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.nrows() == 0 {
        return Err(Error::Shape("sym_eigen: empty matrix".into()));
    }
    check_finite(a)?;
    let (w, v) = a
        .eigh(UPLO::Lower)
        .map_err(|e| Error::Numerical(format!("symmetric eigendecomposition failed: {e}")))?;
    // LAPACK returns ascending order; flip to descending.
    let vals: Vec<f64> = w.iter().rev().copied().collect();
    let vecs = v.slice(s![.., ..;-1]).to_owned();
    Ok((vals, vecs))
}
