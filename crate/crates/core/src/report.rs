//! Sweep outputs: CSV table, JSON summary envelope and an SVG chart of
//! point estimate against initial threshold.

use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::ingest::{DatasetSummary, IngestError, Provenance};
use crate::mapper::{summarize_sweep, Algorithm, EvaluationReport, SweepConfig, SweepRow};

pub const SWEEP_CSV_HEADER: [&str; 7] =
    ["init_c_dbhz", "algorithm", "converged", "point_m", "range_low_m", "range_high_m", "iterations"];

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub fn write_sweep_csv<W: Write>(writer: W, rows: &[SweepRow]) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(SWEEP_CSV_HEADER)?;
    for row in rows {
        let r = &row.result;
        w.write_record([
            row.init_c_dbhz.to_string(),
            r.algorithm.to_string(),
            r.converged.to_string(),
            opt(r.point),
            opt(r.range.map(|x| x.0)),
            opt(r.range.map(|x| x.1)),
            r.iterations.to_string(),
        ])?;
    }
    w.flush().map_err(|source| IngestError::Io { path: "<sweep csv>".into(), source })?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmSummary {
    pub algorithm: Algorithm,
    #[serde(flatten)]
    pub report: EvaluationReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEnvelope {
    pub config: SweepConfig,
    pub dataset: DatasetSummary,
    pub provenance: Provenance,
    /// RMSE figures are only present when a truth height was supplied.
    pub truth_height: Option<f64>,
    pub summary: Vec<AlgorithmSummary>,
}

impl SweepEnvelope {
    pub fn new(
        config: SweepConfig,
        dataset: DatasetSummary,
        provenance: Provenance,
        truth_height: Option<f64>,
        rows: &[SweepRow],
    ) -> Self {
        let summary = summarize_sweep(rows, truth_height.unwrap_or(0.0))
            .into_iter()
            .map(|(algorithm, mut report)| {
                if truth_height.is_none() {
                    report.rmse = None;
                }
                AlgorithmSummary { algorithm, report }
            })
            .collect();
        SweepEnvelope { config, dataset, provenance, truth_height, summary }
    }
}

const SERIES_COLOURS: [(Algorithm, &str); 4] = [
    (Algorithm::FourPlB, "#1b6ca8"),
    (Algorithm::FourPl, "#e07b00"),
    (Algorithm::Hinge, "#2a9d3c"),
    (Algorithm::Bayes, "#b8336a"),
];

/// Line chart, one polyline per algorithm through its converged estimates
/// and a dashed horizontal rule at the truth height when given.
pub fn sweep_svg(rows: &[SweepRow], truth_height: Option<f64>) -> String {
    let (width, height) = (720.0, 440.0);
    let (left, right, top, bottom) = (60.0, 130.0, 20.0, 50.0);
    let plot_w = width - left - right;
    let plot_h = height - top - bottom;

    let xs: Vec<f64> = rows.iter().map(|r| r.init_c_dbhz).collect();
    let mut ys: Vec<f64> = rows.iter().filter(|r| r.result.converged).filter_map(|r| r.result.point).collect();
    ys.extend(truth_height);
    let (x_min, x_max) = bounds(&xs);
    let (y_min, y_max) = bounds(&ys);
    let sx = |x: f64| left + (x - x_min) / (x_max - x_min) * plot_w;
    let sy = |y: f64| top + plot_h - (y - y_min) / (y_max - y_min) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(svg, r#"<rect width="{width}" height="{height}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<g class="axes" stroke="black" fill="none"><line x1="{left}" y1="{b}" x2="{r}" y2="{b}"/><line x1="{left}" y1="{top}" x2="{left}" y2="{b}"/></g>"#,
        b = top + plot_h,
        r = left + plot_w,
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="12">initial threshold (dB-Hz)</text>"#,
        left + plot_w / 2.0,
        height - 12.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{:.1}" text-anchor="middle" font-size="12" transform="rotate(-90 16 {:.1})">height estimate (m)</text>"#,
        top + plot_h / 2.0,
        top + plot_h / 2.0
    );
    for (v, label_y) in [(x_min, true), (x_max, true), (y_min, false), (y_max, false)] {
        if label_y {
            let _ = writeln!(
                svg,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="11">{v:.0}</text>"#,
                sx(v),
                top + plot_h + 16.0
            );
        } else {
            let _ = writeln!(
                svg,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="end" font-size="11">{v:.1}</text>"#,
                left - 6.0,
                sy(v) + 4.0
            );
        }
    }
    if let Some(t) = truth_height {
        let _ = writeln!(
            svg,
            r#"<line class="truth" x1="{left}" y1="{y:.2}" x2="{:.1}" y2="{y:.2}" stroke="black" stroke-dasharray="6 4"/>"#,
            left + plot_w,
            y = sy(t)
        );
    }
    for (i, (alg, colour)) in SERIES_COLOURS.iter().enumerate() {
        let points: Vec<String> = rows
            .iter()
            .filter(|r| r.result.algorithm == *alg && r.result.converged)
            .filter_map(|r| r.result.point.map(|p| format!("{:.2},{:.2}", sx(r.init_c_dbhz), sy(p))))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline class="series" data-algorithm="{alg}" points="{}" fill="none" stroke="{colour}" stroke-width="2"/>"#,
            points.join(" ")
        );
        let ly = top + 14.0 + 18.0 * i as f64;
        let lx = left + plot_w + 14.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{colour}" stroke-width="2"/><text x="{}" y="{}" font-size="12">{alg}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn bounds(values: &[f64]) -> (f64, f64) {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-9 {
        return (lo - 1.0, hi + 1.0);
    }
    (lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapper::AlgorithmResult;

    fn rows() -> Vec<SweepRow> {
        let mut out = Vec::new();
        for c in [20.0, 21.0] {
            for alg in Algorithm::ALL {
                let mut result = AlgorithmResult::from_height(alg, c - 1.0);
                if alg == Algorithm::FourPlB {
                    result.range = Some((c - 2.0, c));
                    result.iterations = 3;
                }
                out.push(SweepRow { init_c_dbhz: c, result });
            }
        }
        out
    }

    #[test]
    fn csv_layout() {
        let mut buf = Vec::new();
        write_sweep_csv(&mut buf, &rows()).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "init_c_dbhz,algorithm,converged,point_m,range_low_m,range_high_m,iterations");
        assert_eq!(lines[1], "20,4plb,true,19,18,20,3");
        assert_eq!(lines[3], "20,hinge,true,19,,,1");
        assert_eq!(lines.len(), 9);
    }

    #[test]
    fn svg_structure() {
        let svg = sweep_svg(&rows(), Some(20.0));
        assert_eq!(svg.matches("class=\"series\"").count(), 4);
        for alg in Algorithm::ALL {
            assert!(svg.contains(&format!("data-algorithm=\"{alg}\"")));
        }
        assert_eq!(svg.matches("class=\"truth\"").count(), 1);
        assert!(!sweep_svg(&rows(), None).contains("class=\"truth\""));
    }

    #[test]
    fn envelope_without_truth_has_no_rmse() {
        let env = SweepEnvelope::new(SweepConfig::default(), DatasetSummary::default(), Provenance::default(), None, &rows());
        assert_eq!(env.summary.len(), 4);
        assert!(env.summary.iter().all(|s| s.report.rmse.is_none()));
        let env =
            SweepEnvelope::new(SweepConfig::default(), DatasetSummary::default(), Provenance::default(), Some(20.0), &rows());
        let first = &env.summary[0];
        assert_eq!(first.algorithm, Algorithm::FourPlB);
        let expected = ((1.0f64 + 0.0) / 2.0).sqrt();
        assert!((first.report.rmse.unwrap() - expected).abs() < 1e-12);
    }
}
