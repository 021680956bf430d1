//! Cumulative productivity data: loading, least-squares fitting of the
//! exponential tail in log space, and overlay tables for plotting.
//!
//! Input CSV schema: header `a,p_gt` or `a,p_gt,weight`, one row per cut,
//! `#` starts a comment line. `a` is productivity in the data's own units and
//! `p_gt` the fraction of workers above it, in `(0, 1]`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::epi::EpiDistribution;
use crate::error::{Error, Result};
use crate::format::g17;

/// Points with a smaller tail probability are left out of the fit.
pub const MIN_FIT_TAIL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailPoint {
    pub a: f64,
    pub p_gt: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailDataset {
    pub points: Vec<TailPoint>,
    pub source_label: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub d_over_n: f64,
    pub a0: f64,
    /// Residual sum of squares of `ln p_gt`.
    pub rss_log: f64,
    pub points_used: usize,
}

fn check_point(p: &TailPoint, line: u64) -> Result<()> {
    let bad = |reason: &str| Error::Parse {
        line,
        reason: reason.to_string(),
    };
    if !p.a.is_finite() {
        return Err(bad("cut must be finite"));
    }
    if !(p.p_gt > 0.0 && p.p_gt <= 1.0) {
        return Err(bad(&format!("p_gt = {} is outside (0, 1]", p.p_gt)));
    }
    if let Some(w) = p.weight {
        if !(w.is_finite() && w > 0.0) {
            return Err(bad(&format!("weight = {w} must be positive")));
        }
    }
    Ok(())
}

impl TailDataset {
    /// Validates the points; line numbers in errors count data rows from 1.
    pub fn new(points: Vec<TailPoint>, source_label: impl Into<String>) -> Result<Self> {
        let lines: Vec<u64> = (1..=points.len() as u64).collect();
        Self::with_lines(points, &lines, source_label.into())
    }

    fn with_lines(points: Vec<TailPoint>, lines: &[u64], source_label: String) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyDataset);
        }
        for (p, &line) in points.iter().zip(lines) {
            check_point(p, line)?;
        }
        let weighted = points[0].weight.is_some();
        for (k, pair) in points.windows(2).enumerate() {
            if pair[1].weight.is_some() != weighted {
                return Err(Error::Parse {
                    line: lines[k + 1],
                    reason: "weights must be given for all rows or none".into(),
                });
            }
            if !(pair[1].a > pair[0].a) || pair[1].p_gt > pair[0].p_gt {
                return Err(Error::Monotonicity { line: lines[k + 1] });
            }
        }
        Ok(Self { points, source_label })
    }

    /// Noiseless tail of the exponential law at the given cuts.
    pub fn from_model(d_over_n: f64, a0: f64, cuts: &[f64], source_label: impl Into<String>) -> Result<Self> {
        let dist = EpiDistribution::new(d_over_n, a0)?;
        let points = cuts
            .iter()
            .map(|&a| TailPoint {
                a,
                p_gt: dist.tail(a),
                weight: None,
            })
            .collect();
        Self::new(points, source_label)
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse_csv(&text, path.display().to_string())
    }

    /// Parses CSV text; line numbers in errors refer to the physical line.
    pub fn parse_csv(text: &str, source_label: impl Into<String>) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .flexible(true)
            .from_reader(text.as_bytes());
        let headers = reader.headers().map_err(|e| csv_error(&e, 1))?.clone();
        let line_of_header = headers.position().map_or(1, |p| p.line());
        let columns: Vec<&str> = headers.iter().collect();
        let weighted = match columns.as_slice() {
            ["a", "p_gt"] => false,
            ["a", "p_gt", "weight"] => true,
            _ => {
                return Err(Error::Parse {
                    line: line_of_header,
                    reason: format!("expected header `a,p_gt` or `a,p_gt,weight`, found `{}`", columns.join(",")),
                })
            }
        };
        let width = columns.len();
        let mut points = Vec::new();
        let mut lines = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| csv_error(&e, 0))?;
            let line = record.position().map_or(0, |p| p.line());
            if record.len() != width {
                return Err(Error::Parse {
                    line,
                    reason: format!("expected {width} fields, found {}", record.len()),
                });
            }
            let field = |k: usize, name: &str| -> Result<f64> {
                record[k].parse::<f64>().map_err(|_| Error::Parse {
                    line,
                    reason: format!("{name} `{}` is not a decimal number", &record[k]),
                })
            };
            let point = TailPoint {
                a: field(0, "a")?,
                p_gt: field(1, "p_gt")?,
                weight: if weighted { Some(field(2, "weight")?) } else { None },
            };
            check_point(&point, line)?;
            points.push(point);
            lines.push(line);
        }
        Self::with_lines(points, &lines, source_label.into())
    }

    pub fn to_csv(&self) -> String {
        let weighted = self.points.first().is_some_and(|p| p.weight.is_some());
        let mut out = String::from(if weighted { "a,p_gt,weight\n" } else { "a,p_gt\n" });
        for p in &self.points {
            out.push_str(&g17(p.a));
            out.push(',');
            out.push_str(&g17(p.p_gt));
            if let Some(w) = p.weight {
                out.push(',');
                out.push_str(&g17(w));
            }
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv()).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn min_cut(&self) -> f64 {
        self.points[0].a
    }
}

fn csv_error(e: &csv::Error, fallback_line: u64) -> Error {
    Error::Parse {
        line: e.position().map_or(fallback_line, |p| p.line()),
        reason: e.to_string(),
    }
}

/// `(x, ln p, w)` triples used by the fit.
fn fit_points(data: &TailDataset) -> Vec<(f64, f64, f64)> {
    data.points
        .iter()
        .filter(|p| p.p_gt >= MIN_FIT_TAIL)
        .map(|p| (p.a, p.p_gt.ln(), p.weight.unwrap_or(1.0)))
        .collect()
}

/// Zero-intercept weighted slope of `ln p` against `a − a0`, and its RSS.
fn slope_fit(points: &[(f64, f64, f64)], a0: f64) -> (f64, f64) {
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &(a, y, w) in points {
        let x = a - a0;
        sxy += w * x * y;
        sxx += w * x * x;
    }
    let k = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let rss = points
        .iter()
        .map(|&(a, y, w)| w * (y - k * (a - a0)).powi(2))
        .sum();
    (k, rss)
}

fn result(points: &[(f64, f64, f64)], a0: f64) -> Result<FitResult> {
    let (k, rss) = slope_fit(points, a0);
    if !(k < 0.0) {
        return Err(Error::DegenerateFit(format!(
            "log-tail slope {k} is not negative, so no decay length exists"
        )));
    }
    Ok(FitResult {
        d_over_n: a0 - 1.0 / k,
        a0,
        rss_log: rss,
        points_used: points.len(),
    })
}

/// Fits `ln p_gt = −(a − a0)/(D/n − a0)`. With `a0_fixed` the slope has a
/// closed form; otherwise `a0` is searched over `[0, smallest cut]`.
pub fn fit_tail(data: &TailDataset, a0_fixed: Option<f64>) -> Result<FitResult> {
    let points = fit_points(data);
    if points.len() < 2 {
        return Err(Error::DegenerateFit(format!(
            "{} point(s) with p_gt >= {MIN_FIT_TAIL}, at least 2 are needed",
            points.len()
        )));
    }
    let first = points[0];
    if points.iter().all(|p| p.0 == first.0) {
        return Err(Error::DegenerateFit("all cuts are equal".into()));
    }
    if points.iter().all(|p| p.1 == first.1) {
        return Err(Error::DegenerateFit("p_gt is constant".into()));
    }
    let min_cut = points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    match a0_fixed {
        Some(a0) => {
            if !(a0.is_finite() && a0 >= 0.0) {
                return Err(Error::invalid("a0", "must be finite and non-negative"));
            }
            if a0 > min_cut {
                return Err(Error::invalid("a0", format!("{a0} exceeds the smallest cut {min_cut}")));
            }
            result(&points, a0)
        }
        None => {
            if min_cut < 0.0 {
                return Err(Error::invalid("a", "cuts must be non-negative when a0 is fitted"));
            }
            let a0 = search_a0(&points, min_cut);
            result(&points, a0)
        }
    }
}

/// Grid scan then golden-section refinement of the RSS over `[0, hi]`.
fn search_a0(points: &[(f64, f64, f64)], hi: f64) -> f64 {
    const SCAN: usize = 64;
    let rss = |a0: f64| slope_fit(points, a0).1;
    if hi == 0.0 {
        return 0.0;
    }
    let step = hi / SCAN as f64;
    let best = (0..=SCAN)
        .min_by(|&i, &j| rss(i as f64 * step).total_cmp(&rss(j as f64 * step)))
        .unwrap_or(0);
    let mut lo = (best.saturating_sub(1)) as f64 * step;
    let mut up = ((best + 1).min(SCAN)) as f64 * step;
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = up - phi * (up - lo);
    let mut d = lo + phi * (up - lo);
    let (mut fc, mut fd) = (rss(c), rss(d));
    while up - lo > 1e-12 * hi.max(1.0) {
        if fc <= fd {
            up = d;
            d = c;
            fd = fc;
            c = up - phi * (up - lo);
            fc = rss(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + phi * (up - lo);
            fd = rss(d);
        }
    }
    let mid = 0.5 * (lo + up);
    // The scan endpoints may beat the interior when the optimum is at a bound.
    [mid, 0.0, hi]
        .into_iter()
        .min_by(|&x, &y| rss(x).total_cmp(&rss(y)))
        .unwrap_or(mid)
}

/// Column name for a model tail, `tail_<value>`.
pub fn tail_column(d_over_n: f64) -> String {
    format!("tail_{}", g17(d_over_n))
}

/// Overlay table with columns `a`, `p_gt_data` (empty where the data has no
/// cut) and one model tail per entry of `d_over_n_values`. Rows are the
/// sorted union of `grid` and the data cuts.
pub fn emit_overlay(data: Option<&TailDataset>, d_over_n_values: &[f64], a0: f64, grid: &[f64]) -> Result<String> {
    let models = d_over_n_values
        .iter()
        .map(|&m| EpiDistribution::new(m, a0))
        .collect::<Result<Vec<_>>>()?;
    if let Some(bad) = grid.iter().find(|a| !a.is_finite()) {
        return Err(Error::invalid("grid", format!("{bad} is not finite")));
    }
    let mut cuts: Vec<f64> = grid.to_vec();
    if let Some(d) = data {
        cuts.extend(d.points.iter().map(|p| p.a));
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let mut out = String::from("a,p_gt_data");
    for &m in d_over_n_values {
        out.push(',');
        out.push_str(&tail_column(m));
    }
    out.push('\n');
    for a in cuts {
        out.push_str(&g17(a));
        out.push(',');
        if let Some(p) = data.and_then(|d| d.points.iter().find(|p| p.a == a)) {
            out.push_str(&g17(p.p_gt));
        }
        for model in &models {
            out.push(',');
            out.push_str(&g17(model.tail(a)));
        }
        out.push('\n');
    }
    Ok(out)
}

/// `count` evenly spaced values from `lo` to `hi` inclusive.
pub fn linear_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..count)
            .map(|k| lo + (hi - lo) * k as f64 / (count - 1) as f64)
            .collect(),
    }
}

/// `count` logarithmically spaced values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi >= lo) {
        return Err(Error::invalid("grid", "log spacing needs 0 < lo <= hi"));
    }
    Ok(linear_grid(lo.ln(), hi.ln(), count).into_iter().map(f64::exp).collect())
}
