//! Small numeric helpers shared across modules.

/// Pairwise (tree) summation over a slice.
///
/// The reduction order depends only on the slice length, never on thread
/// scheduling, so replicate averages are bit-reproducible; it also carries
/// an O(log n) roundoff constant instead of O(n).
pub fn tree_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        2 => xs[0] + xs[1],
        n => {
            let mid = n / 2;
            tree_sum(&xs[..mid]) + tree_sum(&xs[mid..])
        }
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    tree_sum(xs) / xs.len() as f64
}

/// Unbiased sample variance (n-1 denominator).
pub fn sample_var(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return f64::NAN;
    }
    let m = mean(xs);
    let sq: Vec<f64> = xs.iter().map(|x| (x - m) * (x - m)).collect();
    tree_sum(&sq) / (n - 1) as f64
}

/// Median; sorts a copy. NaNs are rejected by debug assertion.
pub fn median(xs: &[f64]) -> f64 {
    assert!(!xs.is_empty(), "median of empty slice");
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("median: NaN in input"));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// `n` evenly spaced values from `a` to `b` inclusive. `n >= 2`.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2, "linspace needs n >= 2");
    let h = (b - a) / (n - 1) as f64;
    (0..n).map(|i| a + h * i as f64).collect()
}

/// Midpoints of `n` equal cells partitioning `[a, b]`.
pub fn midpoint_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    assert!(n >= 1, "midpoint grid needs n >= 1");
    let h = (b - a) / n as f64;
    (0..n).map(|i| a + h * (i as f64 + 0.5)).collect()
}

/// Ordinary least squares slope of y against x.
pub fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    assert!(x.len() >= 2, "slope needs at least 2 points");
    let mx = mean(x);
    let my = mean(y);
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (&xi, &yi) in x.iter().zip(y) {
        sxx += (xi - mx) * (xi - mx);
        sxy += (xi - mx) * (yi - my);
    }
    sxy / sxx
}

/// Fitted log2-log2 slope over the top half of a doubling ladder.
///
/// "Top half" = the ceil(len/2) largest n values; small-n rungs are
/// pre-asymptotic and would otherwise dominate the fit.
pub fn ladder_slope(ns: &[usize], metric: &[f64]) -> f64 {
    assert_eq!(ns.len(), metric.len());
    let start = ns.len() / 2;
    let xs: Vec<f64> = ns[start..].iter().map(|&n| (n as f64).log2()).collect();
    let ys: Vec<f64> = metric[start..].iter().map(|&m| m.log2()).collect();
    ols_slope(&xs, &ys)
}

/// Relative deviation |a-b| / max(|a|, |b|, floor).
///
/// The floor keeps comparisons of near-zero quantities from exploding;
/// callers pick a floor at the natural scale of the quantity.
pub fn rel_dev(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// Composite Simpson rule with `n` (even, >= 2) subintervals.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    assert!(n >= 2 && n % 2 == 0, "simpson needs an even n >= 2");
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + h * i as f64);
    }
    acc * h / 3.0
}

/// Adaptive Simpson quadrature with Richardson correction; `tol` is the
/// absolute error target. Depth capped at 50 halvings.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn rec<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
                + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    if a == b {
        return 0.0;
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 50)
}
