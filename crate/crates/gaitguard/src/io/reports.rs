//! Identification reports, sweep tables and the sweep SVG chart.

use std::fmt::Write as _;

use serde::Serialize;

use gaitguard_core::identity::EvalReport;
use gaitguard_core::mitigate::{Approach, Distribution};
use gaitguard_core::privacy::PutCell;

use crate::error::{AppError, AppResult};

#[derive(Debug, Clone, Serialize)]
pub struct IdentifyReport {
    #[serde(flatten)]
    pub report: EvalReport,
    pub n_rows: usize,
    pub include_step_length: bool,
    pub folds: usize,
    pub repeats: usize,
    pub seed: u64,
    /// Scalar feature values present in the input rows.
    pub scalar_features: usize,
}

/// Averaged confusion matrix with true classes as rows.
pub fn format_confusion_csv(report: &EvalReport) -> AppResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec![String::from("true\\predicted")];
    header.extend(report.classes.iter().cloned());
    w.write_record(&header).map_err(|e| AppError::io("io", e.to_string()))?;
    for (class, row) in report.classes.iter().zip(&report.confusion_matrix) {
        let mut rec = vec![class.clone()];
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(|e| AppError::io("io", e.to_string()))?;
    }
    w.into_inner().map_err(|e| AppError::io("io", e.to_string()))
}

pub const SWEEP_COLUMNS: [&str; 8] = [
    "approach",
    "distribution",
    "lambda",
    "mean_jsd",
    "accuracy",
    "accuracy_reduction",
    "mean_snr_db",
    "flags",
];

fn approach_label(c: &PutCell) -> String {
    c.approach.map_or_else(|| "baseline".into(), |a| a.to_string())
}

fn distribution_label(c: &PutCell) -> String {
    c.distribution.map(|d| d.to_string()).unwrap_or_default()
}

pub fn format_sweep_csv(cells: &[PutCell]) -> AppResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SWEEP_COLUMNS).map_err(|e| AppError::io("io", e.to_string()))?;
    for c in cells {
        w.write_record([
            approach_label(c),
            distribution_label(c),
            c.lambda.to_string(),
            c.mean_jsd.to_string(),
            c.accuracy.to_string(),
            c.accuracy_reduction.to_string(),
            c.mean_snr_db.to_string(),
            c.flags.join(";"),
        ])
        .map_err(|e| AppError::io("io", e.to_string()))?;
    }
    w.into_inner().map_err(|e| AppError::io("io", e.to_string()))
}

const PALETTE: [(Distribution, &str); 4] = [
    (Distribution::Uniform, "#1b9e77"),
    (Distribution::Normal, "#d95f02"),
    (Distribution::Laplace, "#7570b3"),
    (Distribution::Exponential, "#e7298a"),
];

/// Two panels (mean JSD, accuracy) against lambda, one line per approach
/// and distribution. KPM lines are dashed.
pub fn sweep_svg(cells: &[PutCell]) -> String {
    const W: f64 = 360.0;
    const H: f64 = 260.0;
    const PAD: f64 = 40.0;
    let grid: Vec<&PutCell> = cells.iter().filter(|c| !c.is_baseline()).collect();
    let (lo, hi) = grid.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), c| {
        (a.min(c.lambda), b.max(c.lambda))
    });
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut svg = String::new();
    let _ = write!(
        svg,
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" font-family="sans-serif" font-size="11">"##,
        2.0 * W,
        H + 30.0
    );
    svg.push('\n');
    type Metric = fn(&PutCell) -> f64;
    let panels: [(&str, Metric); 2] = [("mean JSD", |c| c.mean_jsd), ("accuracy", |c| c.accuracy)];
    for (p, (title, metric)) in panels.iter().enumerate() {
        let ox = p as f64 * W;
        let x = |l: f64| ox + PAD + (l - lo) / span * (W - 2.0 * PAD);
        let y = |v: f64| H - PAD + 10.0 - v.clamp(0.0, 1.0) * (H - 2.0 * PAD);
        let _ = writeln!(
            svg,
            r##"<text x="{}" y="16" text-anchor="middle">{title}</text>"##,
            ox + W / 2.0
        );
        let _ = writeln!(
            svg,
            r##"<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="#999"/>"##,
            x(lo),
            y(1.0),
            x(hi) - x(lo),
            y(0.0) - y(1.0)
        );
        for tick in [0.0, 0.5, 1.0] {
            let _ = writeln!(
                svg,
                r##"<text x="{}" y="{}" text-anchor="end">{tick}</text>"##,
                x(lo) - 4.0,
                y(tick) + 4.0
            );
        }
        let mut lambdas: Vec<f64> = grid.iter().map(|c| c.lambda).collect();
        lambdas.sort_by(f64::total_cmp);
        lambdas.dedup();
        for l in &lambdas {
            let _ = writeln!(
                svg,
                r##"<text x="{}" y="{}" text-anchor="middle">{l}</text>"##,
                x(*l),
                y(0.0) + 14.0
            );
        }
        for a in Approach::ALL {
            for (d, color) in PALETTE {
                let mut pts: Vec<(f64, f64)> = grid
                    .iter()
                    .filter(|c| c.approach == Some(a) && c.distribution == Some(d))
                    .map(|c| (c.lambda, metric(c)))
                    .collect();
                if pts.is_empty() {
                    continue;
                }
                pts.sort_by(|u, v| u.0.total_cmp(&v.0));
                let coords: Vec<String> = pts.iter().map(|(l, v)| format!("{:.1},{:.1}", x(*l), y(*v))).collect();
                let dash = if a == Approach::Kpm { r#" stroke-dasharray="4 3""# } else { "" };
                let _ = writeln!(
                    svg,
                    r##"<polyline fill="none" stroke="{color}" stroke-width="1.5"{dash} points="{}"><title>{a} {d}</title></polyline>"##,
                    coords.join(" ")
                );
            }
        }
    }
    for (i, (d, color)) in PALETTE.iter().enumerate() {
        let _ = writeln!(
            svg,
            r##"<text x="{}" y="{}" fill="{color}">{d}</text>"##,
            PAD + i as f64 * 90.0,
            H + 22.0
        );
    }
    let _ = writeln!(
        svg,
        r##"<text x="{}" y="{}">solid: lbm, dashed: kpm</text>"##,
        PAD + 4.0 * 90.0,
        H + 22.0
    );
    svg.push_str("</svg>\n");
    svg
}
