//! Long-form CSV series for external plotting tools.

use std::io::Write;
use std::str::FromStr;

use serde::Serialize;

use crate::report::Report;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlotKind {
    /// `(group, feature, method, value)`, one row per score entry.
    Heatmap,
    /// `(id, outlier_score)`, one row per record.
    Timeline,
}

impl FromStr for PlotKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "heatmap" => Ok(PlotKind::Heatmap),
            "timeline" => Ok(PlotKind::Timeline),
            _ => Err(format!(
                "unknown plot kind `{s}`; expected heatmap or timeline"
            )),
        }
    }
}

#[derive(Serialize)]
struct HeatmapRow<'a> {
    group: &'a str,
    feature: &'a str,
    method: &'a str,
    value: f64,
}

#[derive(Serialize)]
struct TimelineRow<'a> {
    id: &'a str,
    outlier_score: f64,
}

/// Writes the series for `kind`. Grouped reports plot group records,
/// otherwise sample records. Rows follow record order, then feature order,
/// then the report's method order; failed entries are skipped.
pub fn emit_plot_series<W: Write>(report: &Report, kind: PlotKind, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let records: Vec<(
        &str,
        f64,
        &std::collections::BTreeMap<lcattr_core::Method, Vec<f64>>,
    )> = if report.grouped {
        report
            .groups
            .iter()
            .map(|g| (g.group.as_str(), g.outlier_score, &g.scores))
            .collect()
    } else {
        report
            .samples
            .iter()
            .map(|s| (s.id.as_str(), s.outlier_score, &s.scores))
            .collect()
    };
    match kind {
        PlotKind::Heatmap => {
            for (key, _, scores) in &records {
                for (j, feature) in report.feature_names.iter().enumerate() {
                    for m in &report.methods {
                        if let Some(v) = scores.get(m) {
                            w.serialize(HeatmapRow {
                                group: key,
                                feature,
                                method: m.as_str(),
                                value: v[j],
                            })?;
                        }
                    }
                }
            }
        }
        PlotKind::Timeline => {
            for (key, score, _) in &records {
                w.serialize(TimelineRow {
                    id: key,
                    outlier_score: *score,
                })?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
