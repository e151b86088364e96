//! Family-level kernel contracts (symmetry, positive semidefiniteness,
//! smoothness limits, series truncation) and dense linear-algebra checks.

use kerndual::kernels::{Kernel, Point};
use kerndual::linalg::{cholesky_with_jitter, sym_eigen, JitterPolicy};
use kerndual::sampling::RngSpec;
use ndarray::Array2;
use proptest::prelude::*;
use rand::Rng;

fn p(v: f64) -> Point {
    vec![v]
}

/// Leaves valid on scalar inputs in [0,1], so arbitrary composites of them
/// evaluate without domain clashes.
fn scalar_leaf() -> impl Strategy<Value = Kernel> {
    prop_oneof![
        (0.1f64..5.0).prop_map(Kernel::se),
        (0u32..=5u32, 0.1f64..3.0).prop_map(|(m, h)| Kernel::matern(m, h)),
        (0.1f64..3.0).prop_map(|h| Kernel::Laplace { h }),
        Just(Kernel::Brownian),
        (1u32..=8u32).prop_map(Kernel::periodic),
        (0.0f64..2.0).prop_map(|var| Kernel::KroneckerDelta { var }),
        prop_oneof![Just(1.0), Just(2.0)]
            .prop_map(|coeff| Kernel::BrownianDistance { d: 1, coeff }),
    ]
}

fn scalar_tree() -> impl Strategy<Value = Kernel> {
    scalar_leaf().prop_recursive(3, 12, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone())
                .prop_map(|(a, b)| Kernel::Sum(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone())
                .prop_map(|(a, b)| Kernel::Product(Box::new(a), Box::new(b))),
            (inner, 0.0f64..1.0).prop_map(|(k, var)| Kernel::regularized(k, var)),
        ]
    })
}

proptest! {
    // Symmetry is a formula property, so it must hold to the last bit, not
    // merely within tolerance.
    #[test]
    fn eval_is_bit_exactly_symmetric(k in scalar_tree(), x in 0.0f64..1.0, y in 0.0f64..1.0) {
        let a = k.eval(&p(x), &p(y)).unwrap();
        let b = k.eval(&p(y), &p(x)).unwrap();
        prop_assert_eq!(a.to_bits(), b.to_bits(), "{} at ({}, {})", k, x, y);
    }

    #[test]
    fn grammar_round_trips_arbitrary_trees(k in scalar_tree()) {
        let s = k.to_string();
        let back: Kernel = s.parse().unwrap();
        prop_assert_eq!(&back, &k, "spec `{}`", s);
        prop_assert_eq!(back.to_string(), s);
    }
}

struct FamilyDomain {
    kernel: Kernel,
    dim: usize,
    lo: f64,
    hi: f64,
}

fn psd_families(rng: &mut impl Rng) -> Vec<FamilyDomain> {
    let d = rng.random_range(1..=3usize);
    vec![
        FamilyDomain {
            kernel: Kernel::se(rng.random_range(0.3..2.0)),
            dim: d,
            lo: -3.0,
            hi: 3.0,
        },
        FamilyDomain {
            kernel: Kernel::matern(rng.random_range(0..=3u32), rng.random_range(0.3..2.0)),
            dim: d,
            lo: -3.0,
            hi: 3.0,
        },
        FamilyDomain {
            kernel: Kernel::Laplace {
                h: rng.random_range(0.3..2.0),
            },
            dim: d,
            lo: -3.0,
            hi: 3.0,
        },
        FamilyDomain {
            kernel: Kernel::Brownian,
            dim: 1,
            lo: 0.0,
            hi: 5.0,
        },
        FamilyDomain {
            kernel: Kernel::periodic(rng.random_range(1..=4u32)),
            dim: 1,
            lo: 0.0,
            hi: 1.0,
        },
        FamilyDomain {
            kernel: Kernel::KroneckerDelta {
                var: rng.random_range(0.0..2.0),
            },
            dim: d,
            lo: -3.0,
            hi: 3.0,
        },
        // positive semidefinite only at unit coefficient
        FamilyDomain {
            kernel: Kernel::BrownianDistance { d, coeff: 1.0 },
            dim: d,
            lo: -3.0,
            hi: 3.0,
        },
        FamilyDomain {
            kernel: Kernel::Sum(
                Box::new(Kernel::se(rng.random_range(0.3..2.0))),
                Box::new(Kernel::Laplace {
                    h: rng.random_range(0.3..2.0),
                }),
            ),
            dim: d,
            lo: -3.0,
            hi: 3.0,
        },
        FamilyDomain {
            kernel: Kernel::Product(
                Box::new(Kernel::se(rng.random_range(0.3..2.0))),
                Box::new(Kernel::matern(1, rng.random_range(0.3..2.0))),
            ),
            dim: d,
            lo: -3.0,
            hi: 3.0,
        },
        FamilyDomain {
            kernel: Kernel::regularized(
                Kernel::se(rng.random_range(0.3..2.0)),
                rng.random_range(0.0..0.5),
            ),
            dim: d,
            lo: -3.0,
            hi: 3.0,
        },
    ]
}

#[test]
fn gram_matrices_are_positive_semidefinite() {
    let spec = RngSpec::new(11);
    let mut worst: f64 = f64::INFINITY;
    for set in 0..200u64 {
        let mut rng = spec.replicate(set);
        for fam in psd_families(&mut rng) {
            let n = rng.random_range(2..=20usize);
            let xs: Vec<Point> = (0..n)
                .map(|_| (0..fam.dim).map(|_| rng.random_range(fam.lo..fam.hi)).collect())
                .collect();
            let g = fam.kernel.gram(&xs).unwrap();
            let trace: f64 = (0..n).map(|i| g[[i, i]]).sum();
            let (w, _) = sym_eigen(&g).unwrap();
            let floor = -1e-10 * trace.max(1.0);
            let rel = w[0] / trace.max(1.0);
            worst = worst.min(rel);
            assert!(
                w[0] >= floor,
                "{}: min eigenvalue {} below {} (trace {})",
                fam.kernel,
                w[0],
                floor,
                trace
            );
        }
    }
    assert!(worst.is_finite());
}

#[test]
fn matern_error_to_squared_exponential_is_nonincreasing_in_order() {
    // radii stay below r = 2h, where the order-0 curve crosses the limit
    // and its error dips through zero
    for h in [0.7, 1.3] {
        for i in 1..=20 {
            let r = 0.07 * i as f64 * h;
            let x = p(0.0);
            let y = p(r);
            let limit = (-r * r / (2.0 * h * h)).exp();
            let errs: Vec<f64> = [0u32, 1, 2, 5, 10]
                .iter()
                .map(|&m| (Kernel::matern(m, h).eval(&x, &y).unwrap() - limit).abs())
                .collect();
            for w in errs.windows(2) {
                assert!(
                    w[1] <= w[0] + 1e-12,
                    "h={h} r={r}: errors {errs:?} not nonincreasing"
                );
            }
        }
    }
}

/// Truncating the cosine series at M leaves at most 2*sum_{m>M} m^(-2s).
/// The partial sums use pairwise accumulation; at s=2 the analytic tail
/// shrinks so fast that M must stay small for the bound to sit above
/// double-precision summation noise.
#[test]
fn periodic_kernel_matches_truncated_cosine_series() {
    let spec = RngSpec::new(7);
    let mut rng = spec.rng();
    for (s, m_max) in [(1u32, 100_000usize), (2, 2_000)] {
        let k = Kernel::periodic(s);
        // integral bound on the tail of sum m^(-2s)
        let tail = (m_max as f64).powi(1 - 2 * s as i32) / (2.0 * s as f64 - 1.0);
        let tol = 2.0 * tail;
        for _ in 0..50 {
            let x: f64 = rng.random_range(0.0..1.0);
            let y: f64 = rng.random_range(0.0..1.0);
            let exact = k.eval(&p(x), &p(y)).unwrap();
            let terms: Vec<f64> = (1..=m_max)
                .map(|m| {
                    let mf = m as f64;
                    2.0 * mf.powi(-2 * s as i32)
                        * (2.0 * std::f64::consts::PI * mf * (x - y)).cos()
                })
                .collect();
            let series = 1.0 + kerndual::util::tree_sum(&terms);
            assert!(
                (exact - series).abs() <= tol,
                "s={s} ({x}, {y}): |{exact} - {series}| > {tol}"
            );
        }
    }
}

fn random_spd(rng: &mut impl Rng, n: usize) -> Array2<f64> {
    let b = Array2::from_shape_fn((n, n), |_| rng.random_range(-1.0..1.0));
    let mut a = b.t().dot(&b);
    for i in 0..n {
        a[[i, i]] += 0.1;
    }
    a
}

#[test]
fn factorize_then_solve_has_small_residual() {
    let spec = RngSpec::new(23);
    for rep in 0..100u64 {
        let mut rng = spec.replicate(rep);
        let n = rng.random_range(1..=15usize);
        let a = random_spd(&mut rng, n);
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let chol = cholesky_with_jitter(&a, JitterPolicy::default()).unwrap();
        assert_eq!(chol.jitter(), 0.0, "SPD input must factor without jitter");
        let x = chol.solve(&b);
        let mut res: f64 = 0.0;
        let mut bn: f64 = 0.0;
        for i in 0..n {
            let ax: f64 = (0..n).map(|j| a[[i, j]] * x[j]).sum();
            res = res.max((ax - b[i]).abs());
            bn = bn.max(b[i].abs());
        }
        assert!(res <= 1e-10 * bn.max(1.0), "residual {res} for n={n}");
    }
}

#[test]
fn quadratic_form_via_triangular_solve_matches_direct() {
    let spec = RngSpec::new(29);
    for rep in 0..100u64 {
        let mut rng = spec.replicate(rep);
        let n = rng.random_range(1..=15usize);
        let a = random_spd(&mut rng, n);
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let chol = cholesky_with_jitter(&a, JitterPolicy::default()).unwrap();
        // b' A^-1 b = |L^-1 b|^2
        let half = chol.solve_lower(&b);
        let via_half: f64 = half.iter().map(|v| v * v).sum();
        let x = chol.solve(&b);
        let direct: f64 = b.iter().zip(&x).map(|(bi, xi)| bi * xi).sum();
        let dev = (via_half - direct).abs() / via_half.abs().max(direct.abs()).max(1e-30);
        assert!(dev <= 1e-9, "n={n}: {via_half} vs {direct}");
    }
}
