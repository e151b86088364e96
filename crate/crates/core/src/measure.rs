//! Probability measures used as integration targets, sampling distributions,
//! and discrepancy arguments.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::kernels::Point;

#[derive(Debug, Clone, PartialEq)]
pub enum Measure {
    /// Uniform on the interval [a, b], a < b (scalar domain).
    UniformInterval { a: f64, b: f64 },
    /// Uniform on the unit box [0,1]^d.
    UniformBox { d: usize },
    /// Isotropic Gaussian N(mean, var * I).
    IsotropicGaussian { mean: Point, var: f64 },
    /// Finitely supported measure sum_i w_i delta_{x_i}; weights are a
    /// probability vector.
    Finite { points: Vec<Point>, weights: Vec<f64> },
}

impl Measure {
    pub fn uniform01() -> Measure {
        Measure::UniformInterval { a: 0.0, b: 1.0 }
    }

    pub fn dirac(x: Point) -> Measure {
        Measure::Finite {
            points: vec![x],
            weights: vec![1.0],
        }
    }

    pub fn finite(points: Vec<Point>, weights: Vec<f64>) -> Result<Measure> {
        let m = Measure::Finite { points, weights };
        m.validate()?;
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        match self {
            Measure::UniformInterval { .. } => 1,
            Measure::UniformBox { d } => *d,
            Measure::IsotropicGaussian { mean, .. } => mean.len(),
            Measure::Finite { points, .. } => points.first().map_or(0, |p| p.len()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Measure::UniformInterval { a, b } => {
                if !(a < b) {
                    return Err(Error::Domain(format!(
                        "uniform interval needs a < b, got [{a}, {b}]"
                    )));
                }
            }
            Measure::UniformBox { d } => {
                if *d == 0 {
                    return Err(Error::Domain("uniform box needs d >= 1".into()));
                }
            }
            Measure::IsotropicGaussian { mean, var } => {
                if mean.is_empty() {
                    return Err(Error::Domain("gaussian needs at least 1 dimension".into()));
                }
                if !(*var > 0.0) {
                    return Err(Error::Domain(format!("gaussian needs var > 0, got {var}")));
                }
            }
            Measure::Finite { points, weights } => {
                if points.is_empty() {
                    return Err(Error::Shape("finite measure with no atoms".into()));
                }
                if points.len() != weights.len() {
                    return Err(Error::Shape(format!(
                        "finite measure: {} atoms vs {} weights",
                        points.len(),
                        weights.len()
                    )));
                }
                let d = points[0].len();
                if points.iter().any(|p| p.len() != d) {
                    return Err(Error::Shape("finite measure: mixed dimensions".into()));
                }
                if weights.iter().any(|w| !(*w >= 0.0)) {
                    return Err(Error::Domain("finite measure: negative weight".into()));
                }
                let total: f64 = weights.iter().sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::Domain(format!(
                        "finite measure: weights sum to {total}, expected 1 within 1e-12"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Draw one point.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Point {
        match self {
            Measure::UniformInterval { a, b } => vec![rng.random_range(*a..*b)],
            Measure::UniformBox { d } => (0..*d).map(|_| rng.random_range(0.0..1.0)).collect(),
            Measure::IsotropicGaussian { mean, var } => {
                let sd = var.sqrt();
                mean.iter()
                    .map(|m| {
                        let z: f64 = rng.sample(StandardNormal);
                        m + sd * z
                    })
                    .collect()
            }
            Measure::Finite { points, weights } => {
                // Inverse CDF walk; exact for the normalized weights.
                let u: f64 = rng.random_range(0.0..1.0);
                let mut acc = 0.0;
                for (p, w) in points.iter().zip(weights) {
                    acc += w;
                    if u < acc {
                        return p.clone();
                    }
                }
                points[points.len() - 1].clone()
            }
        }
    }
}
