//! Identities tying the discrepancy, dependence, and functional-norm
//! machinery together across modules.

use kerndual::embeddings::{hsic_population, mmd_squared_exact, JointFiniteDistribution};
use kerndual::functionals::{functional_norm, LinearFunctional};
use kerndual::kernels::{Kernel, Point};
use kerndual::measure::Measure;
use kerndual::rkhs::SpanElement;
use kerndual::sampling::RngSpec;
use ndarray::Array2;
use rand::Rng;

fn random_finite(rng: &mut impl Rng, n: usize) -> Measure {
    let points: Vec<Point> = (0..n).map(|_| vec![rng.random_range(-2.0..2.0)]).collect();
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
    let total: f64 = raw.iter().sum();
    Measure::finite(points, raw.iter().map(|w| w / total).collect()).unwrap()
}

#[test]
fn discrepancy_is_bit_exactly_symmetric() {
    let spec = RngSpec::new(41);
    let kernels = [
        Kernel::se(0.8),
        Kernel::matern(1, 0.6),
        Kernel::Laplace { h: 1.1 },
    ];
    for rep in 0..100u64 {
        let mut rng = spec.replicate(rep);
        let np = rng.random_range(2..=6);
        let p = random_finite(&mut rng, np);
        let nq = rng.random_range(2..=6);
        let q = random_finite(&mut rng, nq);
        for k in &kernels {
            let pq = mmd_squared_exact(k, &p, &q).unwrap();
            let qp = mmd_squared_exact(k, &q, &p).unwrap();
            assert_eq!(pq.to_bits(), qp.to_bits(), "{k}: {pq} vs {qp}");
        }
    }
}

fn random_joint(rng: &mut impl Rng) -> JointFiniteDistribution {
    let nx = rng.random_range(2..=5usize);
    let ny = rng.random_range(2..=5usize);
    let xs: Vec<Point> = (0..nx).map(|_| vec![rng.random_range(-2.0..2.0)]).collect();
    let ys: Vec<Point> = (0..ny).map(|_| vec![rng.random_range(-2.0..2.0)]).collect();
    let mut probs = Array2::<f64>::zeros((nx, ny));
    let mut total = 0.0;
    for i in 0..nx {
        for j in 0..ny {
            let v: f64 = rng.random_range(0.05..1.0);
            probs[[i, j]] = v;
            total += v;
        }
    }
    probs.mapv_inplace(|v| v / total);
    JointFiniteDistribution::new(xs, ys, probs).unwrap()
}

/// The dependence measure is the squared discrepancy of the coordinate
/// product kernel between the joint and the product of its marginals,
/// checked here across mixed kernel families.
#[test]
fn dependence_measure_equals_product_kernel_discrepancy() {
    let spec = RngSpec::new(43);
    let pairs = [
        (Kernel::se(1.0), Kernel::se(0.7)),
        (Kernel::matern(1, 0.8), Kernel::Laplace { h: 1.2 }),
        (Kernel::Laplace { h: 0.9 }, Kernel::matern(2, 1.1)),
    ];
    for rep in 0..50u64 {
        let mut rng = spec.replicate(rep);
        let joint = random_joint(&mut rng);
        let (k, l) = &pairs[rep as usize % pairs.len()];
        let h = hsic_population(k, l, &joint).unwrap();
        let tensor = Kernel::TensorPair {
            left: Box::new(k.clone()),
            right: Box::new(l.clone()),
            split: 1,
        };
        let stacked_joint = joint.stacked_measure().unwrap();
        let stacked_prod = joint.product_of_marginals().stacked_measure().unwrap();
        let mmd = mmd_squared_exact(&tensor, &stacked_joint, &stacked_prod).unwrap();
        assert!((h - mmd).abs() <= 1e-12, "rep {rep}: {h} vs {mmd}");
    }
}

/// Scaling a functional scales its norm by |c|; realized by scaling the
/// representer span of a rule-error functional.
#[test]
fn functional_norm_is_absolutely_homogeneous() {
    let spec = RngSpec::new(47);
    for rep in 0..50u64 {
        let mut rng = spec.replicate(rep);
        let kernel = Kernel::se(rng.random_range(0.5..1.5));
        let n = rng.random_range(1..=4usize);
        let centers: Vec<Point> = (0..n).map(|_| vec![rng.random_range(-1.5..1.5)]).collect();
        let weights: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x = vec![rng.random_range(1.6..2.0)];
        let a = LinearFunctional::ErrorFunctional {
            x: x.clone(),
            centers: centers.clone(),
            weights: weights.clone(),
        };
        let norm_a = functional_norm(&a, &kernel).unwrap();

        let mut span_centers = vec![x];
        span_centers.extend(centers);
        let mut coeffs = vec![1.0];
        coeffs.extend(weights.iter().map(|w| -w));
        let span = SpanElement::new(kernel, span_centers, coeffs).unwrap();
        let dev = (span.norm().unwrap() - norm_a).abs() / norm_a.max(1e-12);
        assert!(dev <= 1e-10, "rep {rep}: representer norm off by {dev}");

        for c in [-3.0, 0.5, 7.25] {
            let scaled = span.scaled(c).norm().unwrap();
            let want = c.abs() * norm_a;
            let rel = (scaled - want).abs() / want.max(1e-12);
            assert!(rel <= 1e-10, "rep {rep}, c={c}: {scaled} vs {want}");
        }
    }
}
