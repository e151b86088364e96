//! Subcommand implementations. Every command is a pure function of
//! (flags, seed): given the same invocation it emits byte-identical output.

use std::path::PathBuf;

use clap::Args;
use ndarray::Array2;
use rand::Rng;

use kerndual::embeddings::{
    gpd_mc, gpic_mc, hsic_estimator, hsic_population, mmd_squared_exact, mmd_u_statistic,
    JointFiniteDistribution,
};
use kerndual::functionals::{master_equivalence_check, apply_mc, LinearFunctional, PwIntegrand};
use kerndual::gp::{self, PriorMean};
use kerndual::kernels::Kernel;
use kerndual::measure::Measure;
use kerndual::quadrature::{bq_estimate, bq_rule};
use kerndual::rkhs::{fill_distance, krr, min_norm_interpolant, power_function};
use kerndual::sampling::{
    default_kl_modes, gp_sample_at, standard_normals, KlSampler, RngSpec,
};
use kerndual::spectral::{nystrom_eigensystem, periodic_eigensystem};
use kerndual::util::{adaptive_simpson, ladder_slope, linspace, mean, median, sample_var};
use kerndual::Point;

use crate::input::{
    format_point, parse_floats, parse_grid, parse_measure, parse_points, parse_usizes, read_xy,
    usage,
};
use crate::report::{Cell, Report};
use crate::CmdError;

pub struct CmdOutput {
    pub report: Report,
    /// false turns into exit code 1 after the report is written.
    pub pass: bool,
}

impl CmdOutput {
    fn ok(report: Report) -> CmdOutput {
        CmdOutput { report, pass: true }
    }
}

type CmdResult = Result<CmdOutput, CmdError>;

fn parse_kernel(spec: &str) -> Result<Kernel, CmdError> {
    spec.parse::<Kernel>().map_err(CmdError::Num)
}

fn sup_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

// ---- interpolate / regress ----

#[derive(Args, Debug)]
pub struct FitArgs {
    /// Kernel spec, e.g. se:gamma=1.0 or matern:m=1,h=0.5
    #[arg(long, default_value = "se:gamma=1.0")]
    pub kernel: String,
    /// Training data CSV with columns x[,x2,...],y
    #[arg(long)]
    pub data: PathBuf,
    /// Observation noise variance
    #[arg(long, default_value_t = 0.0)]
    pub noise_var: f64,
    /// Probe grid a:b:n (default: 201 points over the data range)
    #[arg(long)]
    pub probe_grid: Option<String>,
}

fn fit_report(name: &'static str, a: &FitArgs, seed: u64) -> CmdResult {
    let kernel = parse_kernel(&a.kernel)?;
    let (xs, ys) = read_xy(&a.data)?;
    let dim = xs[0].len();
    if dim != 1 {
        return Err(usage("probe grids are 1-d; data must have a single x column"));
    }
    let grid = match &a.probe_grid {
        Some(g) => parse_grid(g)?,
        None => {
            let lo = xs.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
            let hi = xs.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
            if !(hi > lo) {
                return Err(usage("data covers a single x; pass --probe-grid"));
            }
            linspace(lo, hi, 201)
        }
    };
    let fit = gp::fit(&kernel, &xs, &ys, a.noise_var, PriorMean::Zero).map_err(CmdError::Num)?;
    let mut rep = Report::new(name, seed);
    rep.config("kernel", &kernel);
    rep.config("data", a.data.display());
    rep.config("n", xs.len());
    rep.config("noise_var", a.noise_var);
    rep.config("credible_z", 1.96);
    rep.columns = vec!["x", "mean", "var", "lo", "hi"];
    for &x in &grid {
        let p = [x];
        let m = fit.posterior_mean(&p).map_err(CmdError::Num)?;
        let v = fit.posterior_var(&p).map_err(CmdError::Num)?;
        let (lo, hi) = fit.credible_interval(&p, 1.96).map_err(CmdError::Num)?;
        rep.rows
            .push(vec![Cell::F(x), Cell::F(m), Cell::F(v), Cell::F(lo), Cell::F(hi)]);
    }
    rep.note("jitter_rel", fit.jitter_rel());
    Ok(CmdOutput::ok(rep))
}

pub fn interpolate(a: &FitArgs, seed: u64) -> CmdResult {
    if a.noise_var != 0.0 {
        return Err(usage(
            "interpolate is noiseless (noise_var 0); use regress for noisy data",
        ));
    }
    fit_report("interpolate", a, seed)
}

pub fn regress(a: &FitArgs, seed: u64) -> CmdResult {
    if !(a.noise_var > 0.0) {
        return Err(usage("regress needs --noise-var > 0"));
    }
    fit_report("regress", a, seed)
}

// ---- equivalence ----

#[derive(Args, Debug)]
pub struct EquivalenceArgs {
    /// Random instances to draw
    #[arg(long, default_value_t = 30)]
    pub instances: usize,
    /// Append a single-point squared-exponential instance (scalar formulas)
    #[arg(long)]
    pub single_se: bool,
    /// Append an instance with two points 1e-6 apart (conditioning hazard)
    #[arg(long)]
    pub near_dup: bool,
}

struct EquivRow {
    id: String,
    kernel: Kernel,
    xs: Vec<Point>,
    ys: Vec<f64>,
    probes: Vec<Point>,
}

fn sample_separated<R: Rng>(
    rng: &mut R,
    n: usize,
    lo: f64,
    hi: f64,
    min_sep: f64,
    avoid: &[Point],
    avoid_sep: f64,
) -> Vec<Point> {
    let mut pts: Vec<Point> = Vec::with_capacity(n);
    let mut attempts = 0usize;
    while pts.len() < n && attempts < 200_000 {
        attempts += 1;
        let c = vec![rng.random_range(lo..hi)];
        let far = |p: &Point, s: f64| (p[0] - c[0]).abs() >= s;
        if pts.iter().all(|p| far(p, min_sep)) && avoid.iter().all(|p| far(p, avoid_sep)) {
            pts.push(c);
        }
    }
    pts
}

fn equiv_instances(a: &EquivalenceArgs, seed: u64) -> Vec<EquivRow> {
    let spec = RngSpec::new(seed);
    let mut out = Vec::new();
    for i in 0..a.instances {
        let mut rng = spec.replicate(i as u64);
        let (kernel, lo, hi, n_hi, sep) = match i % 5 {
            0 => (Kernel::se(rng.random_range(0.5..1.0)), -2.0, 2.0, 6, 0.35),
            1 => (
                Kernel::matern(1, rng.random_range(0.5..1.5)),
                -2.0,
                2.0,
                12,
                0.08,
            ),
            2 => (
                Kernel::Laplace {
                    h: rng.random_range(0.3..1.5),
                },
                -2.0,
                2.0,
                12,
                1e-3,
            ),
            3 => (Kernel::Brownian, 0.05, 1.0, 12, 1e-3),
            _ => (Kernel::periodic(1), 0.0, 0.995, 12, 5e-3),
        };
        let n = rng.random_range(2..=n_hi);
        let xs = sample_separated(&mut rng, n, lo, hi, sep, &[], 0.0);
        let ys = standard_normals(&mut rng, xs.len());
        let probes = sample_separated(&mut rng, 10, lo, hi, 0.0, &xs, 1e-4);
        out.push(EquivRow {
            id: i.to_string(),
            kernel,
            xs,
            ys,
            probes,
        });
    }
    if a.single_se {
        out.push(EquivRow {
            id: "single-se".into(),
            kernel: Kernel::se(1.0),
            xs: vec![vec![0.3]],
            ys: vec![1.7],
            probes: linspace(-1.0, 1.0, 10).into_iter().map(|t| vec![t]).collect(),
        });
    }
    if a.near_dup {
        let mut rng = spec.substream(99).rng();
        let xs = vec![vec![0.2], vec![0.5], vec![0.5 + 1e-6], vec![0.8]];
        let ys = standard_normals(&mut rng, 4);
        out.push(EquivRow {
            id: "near-dup".into(),
            kernel: Kernel::se(1.0),
            xs,
            ys,
            probes: sample_separated(&mut rng, 10, -1.0, 1.0, 0.0, &[], 0.0),
        });
    }
    out
}

/// Checks the three conditioning identities per instance: noiseless GP mean
/// vs minimum-norm interpolant, noisy GP mean vs ridge at lambda = var/n,
/// and regularized-kernel interpolation vs ridge off the nodes. Rows with a
/// conditioning hazard are flagged and excluded from the pass maxima.
pub fn equivalence(a: &EquivalenceArgs, seed: u64) -> CmdResult {
    const NOISE: f64 = 0.1;
    let mut rep = Report::new("equivalence", seed);
    rep.config("instances", a.instances);
    rep.config("noise_var", NOISE);
    rep.config("gate", 1e-8);
    rep.columns = vec![
        "instance",
        "kernel",
        "n",
        "dev_interp",
        "dev_gpr_krr",
        "dev_reg",
        "jitter_rel",
        "flagged",
    ];
    let mut maxima = [0.0f64; 3];
    let mut max_jitter = 0.0f64;
    let mut any_flagged = false;
    for inst in equiv_instances(a, seed) {
        let scale = 1.0 + sup_abs(&inst.ys);
        let n = inst.xs.len() as f64;
        let fit0 =
            gp::fit(&inst.kernel, &inst.xs, &inst.ys, 0.0, PriorMean::Zero).map_err(CmdError::Num)?;
        let (span, r1) =
            min_norm_interpolant(&inst.kernel, &inst.xs, &inst.ys).map_err(CmdError::Num)?;
        let fit_noisy = gp::fit(&inst.kernel, &inst.xs, &inst.ys, NOISE, PriorMean::Zero)
            .map_err(CmdError::Num)?;
        let (ridge, r2) =
            krr(&inst.kernel, &inst.xs, &inst.ys, NOISE / n).map_err(CmdError::Num)?;
        let regk = Kernel::regularized(inst.kernel.clone(), NOISE);
        let (reg_span, r3) =
            min_norm_interpolant(&regk, &inst.xs, &inst.ys).map_err(CmdError::Num)?;
        let mut dev = [0.0f64; 3];
        for p in &inst.probes {
            let gm = fit0.posterior_mean(p).map_err(CmdError::Num)?;
            let sm = span.eval(p).map_err(CmdError::Num)?;
            dev[0] = dev[0].max((gm - sm).abs() / scale);
            let nm = fit_noisy.posterior_mean(p).map_err(CmdError::Num)?;
            let rm = ridge.eval(p).map_err(CmdError::Num)?;
            dev[1] = dev[1].max((nm - rm).abs() / scale);
            let rg = reg_span.eval(p).map_err(CmdError::Num)?;
            dev[2] = dev[2].max((rg - rm).abs() / scale);
        }
        let jitter = fit0
            .jitter_rel()
            .max(fit_noisy.jitter_rel())
            .max(r1.jitter_rel)
            .max(r2.jitter_rel)
            .max(r3.jitter_rel);
        // hazard: applied jitter, or dual coefficients so large that
        // summation-order roundoff alone can exceed the gate
        let flagged = jitter > 1e-6 || sup_abs(fit0.dual()) > 1e8 * scale;
        max_jitter = max_jitter.max(jitter);
        any_flagged |= flagged;
        if !flagged {
            for k in 0..3 {
                maxima[k] = maxima[k].max(dev[k]);
            }
        }
        rep.rows.push(vec![
            Cell::S(inst.id),
            Cell::S(inst.kernel.to_string()),
            Cell::U(inst.xs.len() as u64),
            Cell::F(dev[0]),
            Cell::F(dev[1]),
            Cell::F(dev[2]),
            Cell::F(jitter),
            Cell::b(flagged),
        ]);
    }
    rep.rows.push(vec![
        Cell::S("max".into()),
        Cell::Empty,
        Cell::Empty,
        Cell::F(maxima[0]),
        Cell::F(maxima[1]),
        Cell::F(maxima[2]),
        Cell::F(max_jitter),
        Cell::b(any_flagged),
    ]);
    let pass = maxima.iter().all(|&m| m <= 1e-8);
    rep.note("pass", pass);
    Ok(CmdOutput { report: rep, pass })
}

// ---- sample ----

#[derive(Args, Debug)]
pub struct SampleArgs {
    /// Kernel spec; periodic kernels use the spectral sampler
    #[arg(long, default_value = "periodic:s=2")]
    pub kernel: String,
    /// Evaluation grid a:b:n
    #[arg(long, default_value = "0:1:129")]
    pub grid: String,
    /// Paths to draw
    #[arg(long, default_value_t = 5)]
    pub replicates: usize,
    /// Truncation order for the spectral sampler (periodic kernels only)
    #[arg(long)]
    pub modes: Option<usize>,
}

pub fn sample(a: &SampleArgs, seed: u64) -> CmdResult {
    let kernel = parse_kernel(&a.kernel)?;
    let grid = parse_grid(&a.grid)?;
    let spec = RngSpec::new(seed);
    let mut rep = Report::new("sample", seed);
    rep.config("kernel", &kernel);
    rep.config("grid", &a.grid);
    rep.config("replicates", a.replicates);
    rep.columns = vec!["replicate", "x", "value"];
    let draws: Vec<Vec<f64>> = match kernel {
        Kernel::PeriodicSobolev { s } => {
            let modes = a.modes.unwrap_or_else(|| default_kl_modes(s));
            rep.config("modes", modes);
            let sys = periodic_eigensystem(s, modes).map_err(CmdError::Num)?;
            let sampler = KlSampler::new(&sys, modes, &grid).map_err(CmdError::Num)?;
            (0..a.replicates)
                .map(|r| sampler.draw(&mut spec.replicate(r as u64)))
                .collect()
        }
        ref k => {
            if a.modes.is_some() {
                return Err(usage("--modes applies to periodic kernels only"));
            }
            rep.config("modes", "exact");
            let pts: Vec<Point> = grid.iter().map(|&t| vec![t]).collect();
            let mut out = Vec::with_capacity(a.replicates);
            for r in 0..a.replicates {
                out.push(
                    gp_sample_at(k, &pts, &mut spec.replicate(r as u64)).map_err(CmdError::Num)?,
                );
            }
            out
        }
    };
    for (r, path) in draws.iter().enumerate() {
        for (i, &x) in grid.iter().enumerate() {
            rep.rows
                .push(vec![Cell::U(r as u64), Cell::F(x), Cell::F(path[i])]);
        }
    }
    Ok(CmdOutput::ok(rep))
}

// ---- mercer ----

#[derive(Args, Debug)]
pub struct MercerArgs {
    /// Periodic smoothness order (analytic eigensystem)
    #[arg(long, default_value_t = 2)]
    pub s: u32,
    /// Eigenpair count
    #[arg(long, default_value_t = 64)]
    pub modes: usize,
    /// Kernel spec: switches to the quadrature eigensystem
    #[arg(long)]
    pub kernel: Option<String>,
    /// Reference measure for the quadrature eigensystem
    #[arg(long, default_value = "uniform01")]
    pub measure: String,
    /// Quadrature node count
    #[arg(long, default_value_t = 200)]
    pub nodes: usize,
    /// Residual evaluation grid a:b:n
    #[arg(long, default_value = "0:1:21")]
    pub residual_grid: String,
    /// Truncation orders for residual blocks (default: modes/2 and modes)
    #[arg(long)]
    pub truncations: Option<String>,
}

pub fn mercer(a: &MercerArgs, seed: u64) -> CmdResult {
    let mut rep = Report::new("mercer", seed);
    let sys = match &a.kernel {
        Some(spec) => {
            let kernel = parse_kernel(spec)?;
            let measure = parse_measure(&a.measure)?;
            rep.config("kernel", &kernel);
            rep.config("measure", &a.measure);
            rep.config("nodes", a.nodes);
            nystrom_eigensystem(&kernel, &measure, a.nodes).map_err(CmdError::Num)?
        }
        None => {
            rep.config("s", a.s);
            rep.config("modes", a.modes);
            periodic_eigensystem(a.s, a.modes).map_err(CmdError::Num)?
        }
    };
    let grid = parse_grid(&a.residual_grid)?;
    rep.config("residual_grid", &a.residual_grid);
    let truncations = match &a.truncations {
        Some(t) => parse_usizes(t)?,
        None => {
            let m = sys.len();
            let mut t = vec![(m / 2).max(1), m];
            t.dedup();
            t
        }
    };
    for &m in &truncations {
        if m == 0 || m > sys.len() {
            return Err(usage(format!(
                "truncation {m} outside 1..={}",
                sys.len()
            )));
        }
    }
    rep.config(
        "truncations",
        truncations
            .iter()
            .map(|m| m.to_string())
            .collect::<Vec<_>>()
            .join(","),
    );
    rep.columns = vec!["kind", "i", "lambda", "x", "xp", "m", "residual"];
    for (i, &l) in sys.lambdas().iter().enumerate() {
        rep.rows.push(vec![
            Cell::S("eigen".into()),
            Cell::U((i + 1) as u64),
            Cell::F(l),
            Cell::Empty,
            Cell::Empty,
            Cell::Empty,
            Cell::Empty,
        ]);
    }
    for &m in &truncations {
        for &x in &grid {
            for &xp in &grid {
                let r = sys.mercer_residual(x, xp, m).map_err(CmdError::Num)?;
                rep.rows.push(vec![
                    Cell::S("residual".into()),
                    Cell::Empty,
                    Cell::Empty,
                    Cell::F(x),
                    Cell::F(xp),
                    Cell::U(m as u64),
                    Cell::F(r),
                ]);
            }
        }
    }
    Ok(CmdOutput::ok(rep))
}

// ---- contraction ----

#[derive(Args, Debug)]
pub struct ContractionArgs {
    /// Kernel spec
    #[arg(long, default_value = "matern:m=1,h=1.0")]
    pub kernel: String,
    /// Grid sizes
    #[arg(long, default_value = "16,32,64,128,256,512")]
    pub ns: String,
    /// Probe location
    #[arg(long, default_value_t = 0.5)]
    pub probe: f64,
    /// Domain a:b (grids are uniform over it)
    #[arg(long, default_value = "0:1")]
    pub domain: String,
}

pub fn contraction(a: &ContractionArgs, seed: u64) -> CmdResult {
    let kernel = parse_kernel(&a.kernel)?;
    let ns = parse_usizes(&a.ns)?;
    if ns.len() < 2 || ns.iter().any(|&n| n < 2) {
        return Err(usage("--ns needs at least two sizes, each >= 2"));
    }
    let (lo, hi) = a
        .domain
        .split_once(':')
        .and_then(|(l, h)| Some((l.parse::<f64>().ok()?, h.parse::<f64>().ok()?)))
        .ok_or_else(|| usage(format!("domain must be a:b, got `{}`", a.domain)))?;
    if !(hi > lo) {
        return Err(usage("domain needs b > a"));
    }
    let probe = [a.probe];
    let mut rep = Report::new("contraction", seed);
    rep.config("kernel", &kernel);
    rep.config("probe", a.probe);
    rep.config("domain", &a.domain);
    rep.columns = vec!["n", "fill_distance", "posterior_var", "power_function"];
    let mut vars = Vec::with_capacity(ns.len());
    let mut max_jitter = 0.0f64;
    let center = [(lo + hi) / 2.0];
    let rho = (hi - lo) / 2.0;
    for &n in &ns {
        let xs: Vec<Point> = linspace(lo, hi, n).into_iter().map(|t| vec![t]).collect();
        let fill = fill_distance(&xs, &center, rho, 1024)
            .map_err(CmdError::Num)?
            .value;
        let fit = gp::fit(&kernel, &xs, &vec![0.0; n], 0.0, PriorMean::Zero)
            .map_err(CmdError::Num)?;
        max_jitter = max_jitter.max(fit.jitter_rel());
        let v = fit.posterior_var(&probe).map_err(CmdError::Num)?;
        let pf = power_function(&kernel, &xs, &probe).map_err(CmdError::Num)?;
        vars.push(v);
        rep.rows
            .push(vec![Cell::U(n as u64), Cell::F(fill), Cell::F(v), Cell::F(pf)]);
    }
    if ns.len() - ns.len() / 2 >= 2 {
        rep.note("slope", ladder_slope(&ns, &vars));
        rep.note("slope_window", "top half of the ladder");
    }
    rep.note("max_jitter_rel", max_jitter);
    Ok(CmdOutput::ok(rep))
}

// ---- rates ----

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum RateKind {
    Contraction,
    Krr,
    #[value(name = "mc_mean", alias = "mc-mean")]
    McMean,
}

#[derive(Args, Debug)]
pub struct RatesArgs {
    /// Which rate study to run
    #[arg(long, value_enum)]
    pub kind: RateKind,
    /// Ladder sizes (defaults depend on kind)
    #[arg(long)]
    pub ns: Option<String>,
    /// Seeds for median-of-seeds studies
    #[arg(long)]
    pub seeds: Option<usize>,
    /// Kernel spec (defaults depend on kind)
    #[arg(long)]
    pub kernel: Option<String>,
}

pub fn rates(a: &RatesArgs, seed: u64) -> CmdResult {
    let mut rep = Report::new("rates", seed);
    let (ns, metrics, metric_name): (Vec<usize>, Vec<f64>, &str) = match a.kind {
        RateKind::Contraction => {
            let kernel = parse_kernel(a.kernel.as_deref().unwrap_or("matern:m=1,h=1.0"))?;
            let ns = match &a.ns {
                Some(s) => parse_usizes(s)?,
                None => vec![16, 32, 64, 128, 256, 512],
            };
            rep.config("kind", "contraction");
            rep.config("kernel", &kernel);
            rep.config("probe", 0.5);
            let mut vars = Vec::with_capacity(ns.len());
            for &n in &ns {
                let xs: Vec<Point> = linspace(0.0, 1.0, n).into_iter().map(|t| vec![t]).collect();
                let fit = gp::fit(&kernel, &xs, &vec![0.0; n], 0.0, PriorMean::Zero)
                    .map_err(CmdError::Num)?;
                vars.push(fit.posterior_var(&[0.5]).map_err(CmdError::Num)?);
            }
            (ns, vars, "posterior_var")
        }
        RateKind::Krr => {
            let kernel = parse_kernel(a.kernel.as_deref().unwrap_or("matern:m=1,h=0.5"))?;
            let ns = match &a.ns {
                Some(s) => parse_usizes(s)?,
                None => vec![64, 128, 256, 512, 1024, 2048, 4096],
            };
            let n_seeds = a.seeds.unwrap_or(10);
            let sigma = 0.1f64;
            rep.config("kind", "krr");
            rep.config("kernel", &kernel);
            rep.config("target", "min(x, 1-x)");
            rep.config("noise_sd", sigma);
            rep.config("lambda", "noise_var / n");
            rep.config("seeds", n_seeds);
            let metrics = krr_study(&kernel, &ns, n_seeds, sigma, seed)?;
            (ns, metrics, "median_sq_l2_error")
        }
        RateKind::McMean => {
            let kernel = parse_kernel(a.kernel.as_deref().unwrap_or("se:gamma=0.7"))?;
            let ns = match &a.ns {
                Some(s) => parse_usizes(s)?,
                None => vec![32, 64, 128, 256, 512, 1024, 2048, 4096],
            };
            let n_seeds = a.seeds.unwrap_or(50);
            rep.config("kind", "mc_mean");
            rep.config("kernel", &kernel);
            rep.config("seeds", n_seeds);
            rep.config("target", "5-atom finite measure");
            let metrics = mc_mean_study(&kernel, &ns, n_seeds, seed)?;
            (ns, metrics, "median_discrepancy")
        }
    };
    rep.columns = vec!["n", "metric"];
    rep.config("metric", metric_name);
    for (i, &n) in ns.iter().enumerate() {
        rep.rows.push(vec![Cell::U(n as u64), Cell::F(metrics[i])]);
    }
    // the fit window is the top half; it needs at least two ladder points
    if ns.len() - ns.len() / 2 >= 2 {
        rep.note("slope", ladder_slope(&ns, &metrics));
        rep.note("slope_window", "top half of the ladder");
    }
    Ok(CmdOutput::ok(rep))
}

/// Median (over seeds) squared L2 error of ridge regression on noisy
/// observations of min(x, 1-x), with lambda = noise_var / n. Ladder points
/// share draws: size n uses the first n of each seed's stream.
fn krr_study(
    kernel: &Kernel,
    ns: &[usize],
    n_seeds: usize,
    sigma: f64,
    seed: u64,
) -> Result<Vec<f64>, CmdError> {
    let n_top = *ns.iter().max().unwrap();
    let spec = RngSpec::new(seed);
    let grid = kerndual::util::midpoint_grid(0.0, 1.0, 1024);
    let fstar = |x: f64| x.min(1.0 - x);
    let mut errs = vec![Vec::with_capacity(n_seeds); ns.len()];
    for rep in 0..n_seeds {
        let mut rng = spec.replicate(rep as u64);
        let xs_all: Vec<Point> = (0..n_top).map(|_| vec![rng.random_range(0.0..1.0)]).collect();
        let noise = standard_normals(&mut rng, n_top);
        for (k, &n) in ns.iter().enumerate() {
            let xs = &xs_all[..n];
            let ys: Vec<f64> = xs
                .iter()
                .zip(&noise)
                .map(|(x, e)| fstar(x[0]) + sigma * e)
                .collect();
            let (span, _) =
                krr(kernel, xs, &ys, sigma * sigma / n as f64).map_err(CmdError::Num)?;
            let mut sq = 0.0;
            for &g in &grid {
                let d = span.eval(&[g]).map_err(CmdError::Num)? - fstar(g);
                sq += d * d;
            }
            errs[k].push(sq / grid.len() as f64);
        }
    }
    Ok(errs.iter().map(|e| median(e)).collect())
}

/// Median (over seeds) exact discrepancy between a finite target and its
/// empirical counterpart at sample size n, with ladder points sharing draws.
fn mc_mean_study(
    kernel: &Kernel,
    ns: &[usize],
    n_seeds: usize,
    seed: u64,
) -> Result<Vec<f64>, CmdError> {
    let atoms: Vec<Point> = vec![vec![-0.8], vec![-0.3], vec![0.1], vec![0.5], vec![0.9]];
    let weights = vec![0.1, 0.15, 0.2, 0.25, 0.3];
    let target = Measure::finite(atoms.clone(), weights.clone()).map_err(CmdError::Num)?;
    let n_top = *ns.iter().max().unwrap();
    let spec = RngSpec::new(seed);
    let mut vals = vec![Vec::with_capacity(n_seeds); ns.len()];
    for s in 0..n_seeds {
        let mut rng = spec.replicate(s as u64);
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
            let empirical = Measure::finite(pts, ws).map_err(CmdError::Num)?;
            vals[k].push(
                mmd_squared_exact(kernel, &target, &empirical)
                    .map_err(CmdError::Num)?
                    .sqrt(),
            );
        }
    }
    Ok(vals.iter().map(|v| median(v)).collect())
}

// ---- mmd ----

#[derive(Args, Debug)]
pub struct MmdArgs {
    /// Kernel spec
    #[arg(long, default_value = "se:gamma=1.0")]
    pub kernel: String,
    /// First sample CSV (one point per row)
    #[arg(long, requires = "y")]
    pub x: Option<PathBuf>,
    /// Second sample CSV
    #[arg(long, requires = "x")]
    pub y: Option<PathBuf>,
    /// First measure spec (exact discrepancy mode)
    #[arg(long, requires = "q", conflicts_with = "x")]
    pub p: Option<String>,
    /// Second measure spec
    #[arg(long, requires = "p")]
    pub q: Option<String>,
    /// Also run the sampling-based check with this many replicates
    #[arg(long, default_value_t = 0)]
    pub mc_reps: usize,
}

pub fn mmd(a: &MmdArgs, seed: u64) -> CmdResult {
    let kernel = parse_kernel(&a.kernel)?;
    let mut rep = Report::new("mmd", seed);
    rep.config("kernel", &kernel);
    rep.columns = vec![
        "mode", "n_x", "n_y", "mmd_sq", "mmd", "rms_mc", "std_err", "z", "pass",
    ];
    let mut pass = true;
    if let (Some(px), Some(py)) = (&a.x, &a.y) {
        let xs = crate::input::read_points(px)?;
        let ys = crate::input::read_points(py)?;
        rep.config("x", px.display());
        rep.config("y", py.display());
        let u = mmd_u_statistic(&kernel, &xs, &ys).map_err(CmdError::Num)?;
        rep.rows.push(vec![
            Cell::S("samples".into()),
            Cell::U(xs.len() as u64),
            Cell::U(ys.len() as u64),
            Cell::F(u),
            Cell::F(u.max(0.0).sqrt()),
            Cell::Empty,
            Cell::Empty,
            Cell::Empty,
            Cell::Empty,
        ]);
    } else if let (Some(ps), Some(qs)) = (&a.p, &a.q) {
        let p = parse_measure(ps)?;
        let q = parse_measure(qs)?;
        rep.config("p", ps);
        rep.config("q", qs);
        let m2 = mmd_squared_exact(&kernel, &p, &q).map_err(CmdError::Num)?;
        let mut row = vec![
            Cell::S("exact".into()),
            Cell::Empty,
            Cell::Empty,
            Cell::F(m2),
            Cell::F(m2.max(0.0).sqrt()),
            Cell::Empty,
            Cell::Empty,
            Cell::Empty,
            Cell::Empty,
        ];
        if a.mc_reps > 0 {
            rep.config("mc_reps", a.mc_reps);
            let gpd =
                gpd_mc(&kernel, &p, &q, &RngSpec::new(seed), a.mc_reps).map_err(CmdError::Num)?;
            row[5] = Cell::F(gpd.rms);
            row[6] = Cell::F(gpd.std_err);
            row[7] = Cell::F(gpd.z);
            row[8] = Cell::b(gpd.pass);
            pass = gpd.pass;
        }
        rep.rows.push(row);
    } else {
        return Err(usage("pass either --x/--y sample files or --p/--q measures"));
    }
    Ok(CmdOutput { report: rep, pass })
}

// ---- hsic ----

#[derive(Args, Debug)]
pub struct HsicArgs {
    /// Kernel on the first coordinate block
    #[arg(long, default_value = "se:gamma=1.0")]
    pub kernel_x: String,
    /// Kernel on the second coordinate block
    #[arg(long, default_value = "se:gamma=1.0")]
    pub kernel_y: String,
    /// Paired-sample CSV; first --split columns are x, the rest y
    #[arg(long, conflicts_with = "joint")]
    pub samples: Option<PathBuf>,
    /// Columns belonging to x in --samples
    #[arg(long, default_value_t = 1)]
    pub split: usize,
    /// Joint finite distribution CSV with rows x,y,p
    #[arg(long)]
    pub joint: Option<PathBuf>,
    /// Also run the sampling-based dependence check
    #[arg(long, default_value_t = 0)]
    pub mc_reps: usize,
}

fn joint_from_rows(rows: Vec<Vec<f64>>) -> Result<JointFiniteDistribution, CmdError> {
    let mut xs: Vec<f64> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();
    for row in &rows {
        if row.len() != 3 {
            return Err(usage("--joint rows must be x,y,p"));
        }
        if !xs.contains(&row[0]) {
            xs.push(row[0]);
        }
        if !ys.contains(&row[1]) {
            ys.push(row[1]);
        }
    }
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let mut probs = Array2::<f64>::zeros((xs.len(), ys.len()));
    for row in &rows {
        let i = xs.iter().position(|&v| v == row[0]).unwrap();
        let j = ys.iter().position(|&v| v == row[1]).unwrap();
        probs[[i, j]] += row[2];
    }
    JointFiniteDistribution::new(
        xs.into_iter().map(|v| vec![v]).collect(),
        ys.into_iter().map(|v| vec![v]).collect(),
        probs,
    )
    .map_err(CmdError::Num)
}

pub fn hsic(a: &HsicArgs, seed: u64) -> CmdResult {
    let k = parse_kernel(&a.kernel_x)?;
    let l = parse_kernel(&a.kernel_y)?;
    let mut rep = Report::new("hsic", seed);
    rep.config("kernel_x", &k);
    rep.config("kernel_y", &l);
    rep.columns = vec![
        "mode",
        "n",
        "estimate",
        "population",
        "mean_sq_cov",
        "std_err",
        "z",
        "pass",
    ];
    let mut pass = true;
    if let Some(path) = &a.samples {
        let rows = crate::input::read_float_rows(path)?;
        rep.config("samples", path.display());
        rep.config("split", a.split);
        let mut xs = Vec::with_capacity(rows.len());
        let mut ys = Vec::with_capacity(rows.len());
        for row in rows {
            if row.len() <= a.split {
                return Err(usage(format!(
                    "--samples rows need more than {} columns",
                    a.split
                )));
            }
            let (x, y) = row.split_at(a.split);
            xs.push(x.to_vec());
            ys.push(y.to_vec());
        }
        let est = hsic_estimator(&k, &l, &xs, &ys).map_err(CmdError::Num)?;
        rep.rows.push(vec![
            Cell::S("samples".into()),
            Cell::U(xs.len() as u64),
            Cell::F(est),
            Cell::Empty,
            Cell::Empty,
            Cell::Empty,
            Cell::Empty,
            Cell::Empty,
        ]);
    } else if let Some(path) = &a.joint {
        let joint = joint_from_rows(crate::input::read_float_rows(path)?)?;
        rep.config("joint", path.display());
        let pop = hsic_population(&k, &l, &joint).map_err(CmdError::Num)?;
        let mut row = vec![
            Cell::S("joint".into()),
            Cell::Empty,
            Cell::Empty,
            Cell::F(pop),
            Cell::Empty,
            Cell::Empty,
            Cell::Empty,
            Cell::Empty,
        ];
        if a.mc_reps > 0 {
            rep.config("mc_reps", a.mc_reps);
            let gpic =
                gpic_mc(&k, &l, &joint, &RngSpec::new(seed), a.mc_reps).map_err(CmdError::Num)?;
            row[4] = Cell::F(gpic.mean_sq_cov);
            row[5] = Cell::F(gpic.std_err);
            row[6] = Cell::F(gpic.z);
            row[7] = Cell::b(gpic.pass);
            pass = gpic.pass;
        }
        rep.rows.push(row);
    } else {
        return Err(usage("pass either --samples or --joint"));
    }
    Ok(CmdOutput { report: rep, pass })
}

// ---- quadrature ----

#[derive(Args, Debug)]
pub struct QuadratureArgs {
    /// Kernel spec
    #[arg(long, default_value = "brownian")]
    pub kernel: String,
    /// Target measure spec
    #[arg(long, default_value = "uniform01")]
    pub measure: String,
    /// Inline node list, e.g. 0.1,0.5,0.9 (use ; inside multi-d points)
    #[arg(long, conflicts_with = "greedy")]
    pub nodes: Option<String>,
    /// Pick this many nodes greedily (sequential variance minimization)
    #[arg(long)]
    pub greedy: Option<usize>,
    /// Candidate grid a:b:n for the greedy search
    #[arg(long, default_value = "0:1:101")]
    pub grid: String,
    /// Integrand values at the nodes, for the integral estimate
    #[arg(long)]
    pub values: Option<String>,
}

pub fn quadrature(a: &QuadratureArgs, seed: u64) -> CmdResult {
    let kernel = parse_kernel(&a.kernel)?;
    let measure = parse_measure(&a.measure)?;
    let mut rep = Report::new("quadrature", seed);
    rep.config("kernel", &kernel);
    rep.config("measure", &a.measure);
    let nodes: Vec<Point> = match (&a.nodes, a.greedy) {
        (Some(spec), None) => parse_points(spec)?,
        (None, Some(count)) => {
            rep.config("greedy", count);
            rep.config("grid", &a.grid);
            let cands: Vec<Point> = parse_grid(&a.grid)?.into_iter().map(|t| vec![t]).collect();
            greedy_nodes(&kernel, &measure, &cands, count)?
        }
        (None, None) => return Err(usage("pass --nodes or --greedy")),
        _ => unreachable!("clap conflicts_with"),
    };
    let rule = bq_rule(&kernel, &measure, &nodes).map_err(CmdError::Num)?;
    rep.columns = vec![
        "kind",
        "x",
        "weight",
        "estimate",
        "posterior_variance",
        "mmd_residual",
    ];
    for (node, &w) in rule.nodes().iter().zip(rule.weights()) {
        rep.rows.push(vec![
            Cell::S("node".into()),
            Cell::S(format_point(node)),
            Cell::F(w),
            Cell::Empty,
            Cell::Empty,
            Cell::Empty,
        ]);
    }
    let estimate = match &a.values {
        Some(vs) => {
            let values = parse_floats(vs)?;
            if values.len() != rule.nodes().len() {
                return Err(usage(format!(
                    "{} values for {} nodes",
                    values.len(),
                    rule.nodes().len()
                )));
            }
            Cell::F(bq_estimate(&rule, &values).map_err(CmdError::Num)?)
        }
        None => Cell::Empty,
    };
    let v = rule.posterior_variance();
    let residual = (v - rule.mmd_check().map_err(CmdError::Num)?).abs();
    rep.rows.push(vec![
        Cell::S("summary".into()),
        Cell::Empty,
        Cell::Empty,
        estimate,
        Cell::F(v),
        Cell::F(residual),
    ]);
    rep.note("jitter_rel", rule.jitter_rel());
    Ok(CmdOutput::ok(rep))
}

/// Sequential variance minimization over a fixed candidate grid. No global
/// optimality claim; each step adds the candidate whose rule has the
/// smallest posterior variance.
fn greedy_nodes(
    kernel: &Kernel,
    measure: &Measure,
    cands: &[Point],
    count: usize,
) -> Result<Vec<Point>, CmdError> {
    if count == 0 || count > cands.len() {
        return Err(usage(format!(
            "greedy count must be in 1..={}",
            cands.len()
        )));
    }
    let mut nodes: Vec<Point> = Vec::with_capacity(count);
    for _ in 0..count {
        let mut best: Option<(f64, &Point)> = None;
        for c in cands {
            if nodes.contains(c) {
                continue;
            }
            let mut trial = nodes.clone();
            trial.push(c.clone());
            let v = bq_rule(kernel, measure, &trial)
                .map_err(CmdError::Num)?
                .posterior_variance();
            if best.map(|(bv, _)| v < bv).unwrap_or(true) {
                best = Some((v, c));
            }
        }
        let (_, pick) = best.expect("candidate grid exhausted");
        nodes.push(pick.clone());
    }
    Ok(nodes)
}

// ---- ito ----

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ItoIntegrand {
    One,
    T,
    Sin2pit,
    All,
}

#[derive(Args, Debug)]
pub struct ItoArgs {
    /// Integrand g
    #[arg(long, value_enum, default_value_t = ItoIntegrand::All)]
    pub g: ItoIntegrand,
    /// Discretization grid size
    #[arg(long, default_value_t = 2000)]
    pub grid: usize,
    /// Replicates
    #[arg(long, default_value_t = 20_000)]
    pub reps: usize,
}

/// The mean square of the increment integral recovers the L2 norm of the
/// integrand, with an O(1/grid) bias from the left-point sum.
pub fn ito(a: &ItoArgs, seed: u64) -> CmdResult {
    let gs: Vec<PwIntegrand> = match a.g {
        ItoIntegrand::One => vec![PwIntegrand::One],
        ItoIntegrand::T => vec![PwIntegrand::T],
        ItoIntegrand::Sin2pit => vec![PwIntegrand::Sin2PiT],
        ItoIntegrand::All => vec![PwIntegrand::One, PwIntegrand::T, PwIntegrand::Sin2PiT],
    };
    let spec = RngSpec::new(seed);
    let mut rep = Report::new("ito", seed);
    rep.config("grid", a.grid);
    rep.config("reps", a.reps);
    rep.columns = vec![
        "g", "grid", "reps", "mean_square", "target", "std_err", "tol", "pass",
    ];
    let mut all_pass = true;
    for (tag, g) in gs.into_iter().enumerate() {
        let target = adaptive_simpson(&|t: f64| g.eval(t) * g.eval(t), 0.0, 1.0, 1e-12);
        let vals = apply_mc(
            &LinearFunctional::PaleyWiener { g },
            &Kernel::Brownian,
            &spec.substream(tag as u64),
            a.grid,
            a.reps,
        )
        .map_err(CmdError::Num)?;
        let squares: Vec<f64> = vals.iter().map(|v| v * v).collect();
        let ms = mean(&squares);
        let se = (sample_var(&squares) / squares.len() as f64).sqrt();
        let tol = 3.0 * se + 2.0 / a.grid as f64;
        let ok = (ms - target).abs() <= tol;
        all_pass &= ok;
        rep.rows.push(vec![
            Cell::S(g.to_string()),
            Cell::U(a.grid as u64),
            Cell::U(a.reps as u64),
            Cell::F(ms),
            Cell::F(target),
            Cell::F(se),
            Cell::F(tol),
            Cell::b(ok),
        ]);
    }
    Ok(CmdOutput {
        report: rep,
        pass: all_pass,
    })
}

// ---- master ----

#[derive(Args, Debug)]
pub struct MasterArgs {
    /// Functional: all | eval | error | pw:1 | pw:t | pw:sin2pit | integral
    #[arg(long, default_value = "all")]
    pub functional: String,
    /// Discretization grid for grid-sensitive functionals
    #[arg(long, default_value_t = 2000)]
    pub grid: usize,
    /// Replicates (default depends on the functional)
    #[arg(long)]
    pub reps: Option<usize>,
}

struct MasterCase {
    name: &'static str,
    kernel: Kernel,
    functional: LinearFunctional,
    default_reps: usize,
}

fn master_cases(which: &str) -> Result<Vec<MasterCase>, CmdError> {
    let se = Kernel::se(1.0);
    let eval_case = || MasterCase {
        name: "eval",
        kernel: se.clone(),
        functional: LinearFunctional::Evaluation { x: vec![0.3] },
        default_reps: 100_000,
    };
    let error_case = || -> Result<MasterCase, CmdError> {
        let centers = vec![vec![-0.5], vec![0.2], vec![0.9]];
        let weights = kerndual::rkhs::interpolation_weights(&se, &centers, &[0.45])
            .map_err(CmdError::Num)?;
        Ok(MasterCase {
            name: "error",
            kernel: se.clone(),
            functional: LinearFunctional::ErrorFunctional {
                x: vec![0.45],
                centers,
                weights,
            },
            default_reps: 20_000,
        })
    };
    let pw = |name: &'static str, g: PwIntegrand| MasterCase {
        name,
        kernel: Kernel::Brownian,
        functional: LinearFunctional::PaleyWiener { g },
        default_reps: 20_000,
    };
    let integral_case = || MasterCase {
        name: "integral",
        kernel: Kernel::Brownian,
        functional: LinearFunctional::Integral {
            measure: Measure::uniform01(),
        },
        default_reps: 20_000,
    };
    Ok(match which {
        "all" => vec![
            eval_case(),
            error_case()?,
            pw("pw:1", PwIntegrand::One),
            pw("pw:t", PwIntegrand::T),
            pw("pw:sin2pit", PwIntegrand::Sin2PiT),
        ],
        "eval" => vec![eval_case()],
        "error" => vec![error_case()?],
        "pw:1" | "pw:one" => vec![pw("pw:1", PwIntegrand::One)],
        "pw:t" => vec![pw("pw:t", PwIntegrand::T)],
        "pw:sin2pit" => vec![pw("pw:sin2pit", PwIntegrand::Sin2PiT)],
        "integral" => vec![integral_case()],
        other => {
            return Err(usage(format!(
                "unknown functional `{other}` (all | eval | error | pw:1 | pw:t | pw:sin2pit | integral)"
            )))
        }
    })
}

/// Root-mean-square of the functional over prior draws vs the representer
/// norm, with the coupled grid-bias diagnostic for discretized functionals.
pub fn master(a: &MasterArgs, seed: u64) -> CmdResult {
    let cases = master_cases(a.functional.as_str())?;
    let spec = RngSpec::new(seed);
    let mut rep = Report::new("master", seed);
    rep.config("functional", &a.functional);
    rep.config("grid", a.grid);
    rep.columns = vec![
        "functional",
        "kernel",
        "grid",
        "reps",
        "rms_mc",
        "riesz_norm",
        "std_err",
        "z",
        "grid_bias",
        "grid_flag",
        "pass",
    ];
    let mut all_pass = true;
    for (tag, case) in cases.into_iter().enumerate() {
        let reps = a.reps.unwrap_or(case.default_reps);
        let r = master_equivalence_check(
            &case.functional,
            &case.kernel,
            &spec.substream(tag as u64),
            a.grid,
            reps,
        )
        .map_err(CmdError::Num)?;
        all_pass &= r.pass;
        rep.rows.push(vec![
            Cell::S(case.name.into()),
            Cell::S(case.kernel.to_string()),
            Cell::U(r.grid_size as u64),
            Cell::U(r.n_reps as u64),
            Cell::F(r.rms_mc),
            Cell::F(r.riesz_norm),
            Cell::F(r.mc_std_err),
            Cell::F(r.z),
            Cell::F(r.grid_bias),
            Cell::b(r.grid_flag),
            Cell::b(r.pass),
        ]);
    }
    Ok(CmdOutput {
        report: rep,
        pass: all_pass,
    })
}

// ---- verify ----

#[derive(Args, Debug)]
pub struct VerifyArgs {}

/// Runs the full acceptance suite; exit 0 only if every criterion passes.
/// Progress lines go to stderr as criteria finish; the report goes to --out.
pub fn verify(_a: &VerifyArgs, seed: u64) -> CmdResult {
    let mut rep = Report::new("verify", seed);
    rep.columns = vec!["id", "name", "pass", "millis", "detail"];
    let mut all_pass = true;
    for criterion in kerndual::acceptance::criteria() {
        let outcome = criterion(seed);
        eprintln!("{outcome}");
        all_pass &= outcome.pass;
        rep.rows.push(vec![
            Cell::U(outcome.id as u64),
            Cell::S(outcome.name.to_string()),
            Cell::b(outcome.pass),
            Cell::U(outcome.millis as u64),
            Cell::S(outcome.detail),
        ]);
    }
    rep.note("pass", all_pass);
    Ok(CmdOutput {
        report: rep,
        pass: all_pass,
    })
}
