//! Flag-value and data-file parsing shared by the subcommands.
//!
//! Conventions: grids are `a:b:n` (n inclusive endpoints); inline point
//! lists separate points with `,` and coordinates within a point with `;`;
//! measure specs are `uniform01`, `gauss:mu[;mu2;...],var`, or
//! `finite:<path>` where the CSV holds one atom per row, coordinates first
//! and the weight in the last column.

use std::path::Path;

use kerndual::measure::Measure;
use kerndual::Point;

use crate::CmdError;

pub fn usage(msg: impl Into<String>) -> CmdError {
    CmdError::Usage(msg.into())
}

pub fn parse_grid(spec: &str) -> Result<Vec<f64>, CmdError> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(usage(format!("grid must be a:b:n, got `{spec}`")));
    }
    let a: f64 = parts[0]
        .parse()
        .map_err(|_| usage(format!("bad grid start `{}`", parts[0])))?;
    let b: f64 = parts[1]
        .parse()
        .map_err(|_| usage(format!("bad grid end `{}`", parts[1])))?;
    let n: usize = parts[2]
        .parse()
        .map_err(|_| usage(format!("bad grid count `{}`", parts[2])))?;
    if n < 2 || !(b > a) {
        return Err(usage(format!("grid needs b > a and n >= 2, got `{spec}`")));
    }
    Ok(kerndual::util::linspace(a, b, n))
}

pub fn parse_floats(spec: &str) -> Result<Vec<f64>, CmdError> {
    spec.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| usage(format!("bad number `{t}`")))
        })
        .collect()
}

pub fn parse_usizes(spec: &str) -> Result<Vec<usize>, CmdError> {
    spec.split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| usage(format!("bad count `{t}`")))
        })
        .collect()
}

pub fn parse_points(spec: &str) -> Result<Vec<Point>, CmdError> {
    spec.split(',')
        .map(|p| {
            p.split(';')
                .map(|t| {
                    t.trim()
                        .parse::<f64>()
                        .map_err(|_| usage(format!("bad coordinate `{t}`")))
                })
                .collect()
        })
        .collect()
}

pub fn format_point(p: &[f64]) -> String {
    p.iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(";")
}

pub fn parse_measure(spec: &str) -> Result<Measure, CmdError> {
    if spec == "uniform01" {
        return Ok(Measure::uniform01());
    }
    if let Some(rest) = spec.strip_prefix("gauss:") {
        let (mean_s, var_s) = rest
            .rsplit_once(',')
            .ok_or_else(|| usage(format!("gauss needs mu,var, got `{spec}`")))?;
        let mean: Point = mean_s
            .split(';')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|_| usage(format!("bad gauss mean `{t}`")))
            })
            .collect::<Result<_, _>>()?;
        let var: f64 = var_s
            .trim()
            .parse()
            .map_err(|_| usage(format!("bad gauss variance `{var_s}`")))?;
        if !(var > 0.0) {
            return Err(usage("gauss variance must be > 0"));
        }
        return Ok(Measure::IsotropicGaussian { mean, var });
    }
    if let Some(path) = spec.strip_prefix("finite:") {
        let rows = read_float_rows(Path::new(path))?;
        let mut points = Vec::with_capacity(rows.len());
        let mut weights = Vec::with_capacity(rows.len());
        for row in rows {
            if row.len() < 2 {
                return Err(usage("finite measure rows need coordinates plus a weight"));
            }
            let (coords, w) = row.split_at(row.len() - 1);
            points.push(coords.to_vec());
            weights.push(w[0]);
        }
        return Ok(Measure::finite(points, weights).map_err(CmdError::Num)?);
    }
    Err(usage(format!(
        "unknown measure `{spec}` (expected uniform01 | gauss:mu,var | finite:<path>)"
    )))
}

/// All-numeric CSV rows. Lines starting with `#` are comments; a leading
/// header row whose first field is not numeric is skipped; any later
/// non-numeric field is an error.
pub fn read_float_rows(path: &Path) -> Result<Vec<Vec<f64>>, CmdError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)
        .map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (idx, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| usage(format!("{}: {e}", path.display())))?;
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        let first_numeric = rec
            .get(0)
            .map(|f| f.parse::<f64>().is_ok())
            .unwrap_or(false);
        if !first_numeric {
            if out.is_empty() && idx == 0 {
                continue; // header row
            }
            return Err(usage(format!(
                "{} row {}: non-numeric field `{}`",
                path.display(),
                idx + 1,
                rec.get(0).unwrap_or("")
            )));
        }
        let row: Result<Vec<f64>, CmdError> = rec
            .iter()
            .map(|f| {
                f.parse::<f64>().map_err(|_| {
                    usage(format!(
                        "{} row {}: non-numeric field `{f}`",
                        path.display(),
                        idx + 1
                    ))
                })
            })
            .collect();
        out.push(row?);
    }
    if out.is_empty() {
        return Err(usage(format!("{}: no data rows", path.display())));
    }
    Ok(out)
}

/// (x, y) training pairs: x takes every column but the last.
pub fn read_xy(path: &Path) -> Result<(Vec<Point>, Vec<f64>), CmdError> {
    let rows = read_float_rows(path)?;
    let mut xs = Vec::with_capacity(rows.len());
    let mut ys = Vec::with_capacity(rows.len());
    for row in rows {
        if row.len() < 2 {
            return Err(usage(format!(
                "{}: rows need at least x and y columns",
                path.display()
            )));
        }
        let (x, y) = row.split_at(row.len() - 1);
        xs.push(x.to_vec());
        ys.push(y[0]);
    }
    Ok((xs, ys))
}

/// One point per row, all columns coordinates.
pub fn read_points(path: &Path) -> Result<Vec<Point>, CmdError> {
    Ok(read_float_rows(path)?)
}
