//! Transmit-power statistics: population filtering, empirical CDFs,
//! baseline-vs-green comparison and CSV/SVG report files.
//!
//! Means and medians are taken over dBm values directly.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::powerctl::PowerControlResult;
use crate::scenario::{MobileStation, Point};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("no samples in {0}")]
    Empty(&'static str),
    #[error("failed to write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PopulationFilter {
    pub center: Point,
    pub radius_m: f64,
    pub indoor_only: bool,
}

/// Transmit powers of the mobiles passing `filter` (all of them when `None`).
/// Mobiles in outage are kept at their pinned power.
pub fn filter_population(
    mobiles: &[MobileStation],
    results: &PowerControlResult,
    filter: Option<&PopulationFilter>,
) -> Vec<f64> {
    assert_eq!(mobiles.len(), results.tx_power_dbm.len());
    mobiles
        .iter()
        .zip(&results.tx_power_dbm)
        .filter(|(m, _)| match filter {
            None => true,
            Some(f) => m.position.distance(&f.center) <= f.radius_m && (!f.indoor_only || m.indoor),
        })
        .map(|(_, p)| *p)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdfPoint {
    pub power_dbm: f64,
    pub cum_frac: f64,
}

/// Empirical CDF evaluated at each distinct sample, right-continuous.
pub fn tx_power_cdf(samples: &[f64]) -> Result<Vec<CdfPoint>, MetricsError> {
    if samples.is_empty() {
        return Err(MetricsError::Empty("CDF input"));
    }
    let sorted = sorted(samples);
    let n = sorted.len() as f64;
    let mut out = Vec::new();
    for (i, v) in sorted.iter().enumerate() {
        if i + 1 < sorted.len() && sorted[i + 1] == *v {
            continue;
        }
        out.push(CdfPoint {
            power_dbm: *v,
            cum_frac: if i + 1 == sorted.len() {
                1.0
            } else {
                (i + 1) as f64 / n
            },
        });
    }
    Ok(out)
}

fn sorted(samples: &[f64]) -> Vec<f64> {
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

pub fn mean(samples: &[f64]) -> f64 {
    samples.iter().sum::<f64>() / samples.len() as f64
}

pub fn median(samples: &[f64]) -> f64 {
    let v = sorted(samples);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn fraction_below(samples: &[f64], target_dbm: f64) -> f64 {
    samples.iter().filter(|p| **p < target_dbm).count() as f64 / samples.len() as f64
}

/// Statistics of a single campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub samples: usize,
    pub mean_dbm: f64,
    pub median_dbm: f64,
    pub target_dbm: f64,
    pub frac_below_target: f64,
    pub outage_fraction: f64,
    pub unconverged_snapshots: usize,
    pub snapshots: usize,
    pub filter: Option<PopulationFilter>,
}

impl RunSummary {
    pub fn from_samples(samples: &[f64], target_dbm: f64) -> Result<Self, MetricsError> {
        if samples.is_empty() {
            return Err(MetricsError::Empty("run"));
        }
        Ok(Self {
            samples: samples.len(),
            mean_dbm: mean(samples),
            median_dbm: median(samples),
            target_dbm,
            frac_below_target: fraction_below(samples, target_dbm),
            outage_fraction: 0.0,
            unconverged_snapshots: 0,
            snapshots: 0,
            filter: None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairFractions {
    pub baseline: f64,
    pub green: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    /// Baseline mean minus green mean; positive means the green run transmits less.
    pub mean_delta_db: f64,
    pub median_delta_db: f64,
    pub mean_dbm: PairFractions,
    pub median_dbm: PairFractions,
    pub frac_below_target: PairFractions,
    pub target_dbm: f64,
    pub samples: (usize, usize),
    pub cdf_baseline: Vec<CdfPoint>,
    pub cdf_green: Vec<CdfPoint>,
    pub snapshots: usize,
    pub filter: Option<PopulationFilter>,
}

pub fn compare_runs(
    baseline: &[f64],
    green: &[f64],
    target_dbm: f64,
) -> Result<ComparisonReport, MetricsError> {
    if baseline.is_empty() {
        return Err(MetricsError::Empty("baseline run"));
    }
    if green.is_empty() {
        return Err(MetricsError::Empty("green run"));
    }
    let mean_dbm = PairFractions {
        baseline: mean(baseline),
        green: mean(green),
    };
    let median_dbm = PairFractions {
        baseline: median(baseline),
        green: median(green),
    };
    Ok(ComparisonReport {
        mean_delta_db: mean_dbm.baseline - mean_dbm.green,
        median_delta_db: median_dbm.baseline - median_dbm.green,
        mean_dbm,
        median_dbm,
        frac_below_target: PairFractions {
            baseline: fraction_below(baseline, target_dbm),
            green: fraction_below(green, target_dbm),
        },
        target_dbm,
        samples: (baseline.len(), green.len()),
        cdf_baseline: tx_power_cdf(baseline)?,
        cdf_green: tx_power_cdf(green)?,
        snapshots: 0,
        filter: None,
    })
}

/// Anything that can be flattened into `metric,value` rows.
pub trait SummaryTable {
    fn summary_rows(&self) -> Vec<(String, String)>;
}

fn num(v: f64) -> String {
    format!("{v:.6}")
}

fn filter_rows(filter: &Option<PopulationFilter>, rows: &mut Vec<(String, String)>) {
    if let Some(f) = filter {
        rows.push(("filter_center_x_m".into(), num(f.center.x)));
        rows.push(("filter_center_y_m".into(), num(f.center.y)));
        rows.push(("filter_radius_m".into(), num(f.radius_m)));
        rows.push(("filter_indoor_only".into(), f.indoor_only.to_string()));
    }
}

impl SummaryTable for RunSummary {
    fn summary_rows(&self) -> Vec<(String, String)> {
        let mut rows = vec![
            ("snapshots".into(), self.snapshots.to_string()),
            ("samples".into(), self.samples.to_string()),
            ("mean_tx_dbm".into(), num(self.mean_dbm)),
            ("median_tx_dbm".into(), num(self.median_dbm)),
            ("target_dbm".into(), num(self.target_dbm)),
            ("frac_below_target".into(), num(self.frac_below_target)),
            ("outage_fraction".into(), num(self.outage_fraction)),
            (
                "unconverged_snapshots".into(),
                self.unconverged_snapshots.to_string(),
            ),
        ];
        filter_rows(&self.filter, &mut rows);
        rows
    }
}

impl SummaryTable for ComparisonReport {
    fn summary_rows(&self) -> Vec<(String, String)> {
        let mut rows = vec![
            ("snapshots".into(), self.snapshots.to_string()),
            ("samples_baseline".into(), self.samples.0.to_string()),
            ("samples_green".into(), self.samples.1.to_string()),
            ("mean_tx_baseline_dbm".into(), num(self.mean_dbm.baseline)),
            ("mean_tx_green_dbm".into(), num(self.mean_dbm.green)),
            (
                "median_tx_baseline_dbm".into(),
                num(self.median_dbm.baseline),
            ),
            ("median_tx_green_dbm".into(), num(self.median_dbm.green)),
            ("mean_delta_db".into(), num(self.mean_delta_db)),
            ("median_delta_db".into(), num(self.median_delta_db)),
            ("target_dbm".into(), num(self.target_dbm)),
            (
                "frac_below_target_baseline".into(),
                num(self.frac_below_target.baseline),
            ),
            (
                "frac_below_target_green".into(),
                num(self.frac_below_target.green),
            ),
        ];
        filter_rows(&self.filter, &mut rows);
        rows
    }
}

pub fn cdf_csv(cdfs: &[(&str, &[CdfPoint])]) -> String {
    let mut out = String::from("run,power_dbm,cum_frac\n");
    for (run, cdf) in cdfs {
        for p in *cdf {
            let _ = writeln!(out, "{run},{:.6},{:.6}", p.power_dbm, p.cum_frac);
        }
    }
    out
}

pub fn summary_csv(report: &dyn SummaryTable) -> String {
    let mut out = String::from("metric,value\n");
    for (k, v) in report.summary_rows() {
        let _ = writeln!(out, "{k},{v}");
    }
    out
}

const SVG_COLORS: [&str; 4] = ["#d62728", "#2ca02c", "#1f77b4", "#ff7f0e"];

/// Step plot of one or more CDFs.
pub fn cdf_svg(cdfs: &[(&str, &[CdfPoint])]) -> String {
    let (w, h, margin) = (640.0, 400.0, 50.0);
    let all = cdfs.iter().flat_map(|(_, c)| c.iter().map(|p| p.power_dbm));
    let (lo, hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    let (lo, hi) = if lo.is_finite() && hi > lo {
        (lo.floor(), hi.ceil())
    } else if lo.is_finite() {
        (lo - 1.0, lo + 1.0)
    } else {
        (0.0, 1.0)
    };
    let x = |v: f64| margin + (v - lo) / (hi - lo) * (w - 2.0 * margin);
    let y = |f: f64| h - margin - f * (h - 2.0 * margin);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<path d="M{:.2},{:.2} L{:.2},{:.2} L{:.2},{:.2}" stroke="black" fill="none"/>"#,
        margin,
        margin,
        margin,
        h - margin,
        w - margin,
        h - margin
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle">MS Tx power (dBm)</text>"#,
        w / 2.0,
        h - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" font-size="12">{lo:.0}</text><text x="{:.2}" y="{:.2}" font-size="12" text-anchor="end">{hi:.0}</text>"#,
        margin,
        h - margin + 16.0,
        w - margin,
        h - margin + 16.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="end">1</text><text x="{:.2}" y="{:.2}" font-size="12" text-anchor="end">0</text>"#,
        margin - 6.0,
        margin + 4.0,
        margin - 6.0,
        h - margin + 4.0
    );
    for (k, (run, cdf)) in cdfs.iter().enumerate() {
        let color = SVG_COLORS[k % SVG_COLORS.len()];
        let mut d = format!("M{:.2},{:.2}", x(lo), y(0.0));
        let mut prev = 0.0;
        for p in *cdf {
            let _ = write!(
                d,
                " L{:.2},{:.2} L{:.2},{:.2}",
                x(p.power_dbm),
                y(prev),
                x(p.power_dbm),
                y(p.cum_frac)
            );
            prev = p.cum_frac;
        }
        let _ = write!(d, " L{:.2},{:.2}", x(hi), y(prev));
        let _ = writeln!(
            s,
            r#"<path d="{d}" stroke="{color}" stroke-width="2" fill="none"/>"#
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-size="12" fill="{color}">{run}</text>"#,
            margin + 10.0,
            margin + 16.0 * (k as f64 + 1.0)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn write_file(path: PathBuf, contents: &str) -> Result<PathBuf, MetricsError> {
    fs::write(&path, contents).map_err(|source| MetricsError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(path)
}

pub fn prefixed(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Writes `<prefix>_cdf.csv`, `<prefix>_summary.csv` and optionally
/// `<prefix>_cdf.svg`. Returns the paths written.
pub fn emit_report(
    report: &dyn SummaryTable,
    cdfs: &[(&str, &[CdfPoint])],
    prefix: &Path,
    svg: bool,
) -> Result<Vec<PathBuf>, MetricsError> {
    let mut written = vec![
        write_file(prefixed(prefix, "_cdf.csv"), &cdf_csv(cdfs))?,
        write_file(prefixed(prefix, "_summary.csv"), &summary_csv(report))?,
    ];
    if svg {
        written.push(write_file(prefixed(prefix, "_cdf.svg"), &cdf_svg(cdfs))?);
    }
    Ok(written)
}
