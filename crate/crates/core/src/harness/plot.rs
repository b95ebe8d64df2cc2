use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::attack::AttackKind;
use crate::defense::DefenseKind;
use crate::error::{Error, Result};
use crate::regime::RegimeBoundaries;

use super::{FullyOnlineRunRecord, SemiOnlineReport};

/// One line chart: a curve per attack over the defense threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotData {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: BTreeMap<String, Vec<(f64, f64)>>,
    /// Shades `tau <= tau_hard` and `tau > tau_easy`.
    pub bands: Option<RegimeBoundaries>,
    /// Horizontal reference line.
    pub baseline: Option<f64>,
}

fn single_defense(mut kinds: impl Iterator<Item = DefenseKind>) -> Result<DefenseKind> {
    let first = kinds
        .next()
        .ok_or_else(|| Error::invalid("nothing to plot"))?;
    if kinds.any(|k| k != first) {
        return Err(Error::invalid("records mix several defenses"));
    }
    Ok(first)
}

/// Averages `y` over equal `(attack, x)` keys, skipping missing values.
fn mean_series(
    points: impl Iterator<Item = (AttackKind, f64, Option<f64>)>,
) -> BTreeMap<String, Vec<(f64, f64)>> {
    let mut acc: BTreeMap<AttackKind, Vec<(f64, f64, usize)>> = BTreeMap::new();
    for (a, x, y) in points {
        let Some(y) = y else { continue };
        let v = acc.entry(a).or_default();
        match v.iter_mut().find(|p| p.0 == x) {
            Some(p) => {
                p.1 += y;
                p.2 += 1;
            }
            None => v.push((x, y, 1)),
        }
    }
    acc.into_iter()
        .map(|(a, mut v)| {
            v.sort_by(|p, q| p.0.total_cmp(&q.0));
            (
                a.name().to_string(),
                v.into_iter().map(|(x, s, n)| (x, s / n as f64)).collect(),
            )
        })
        .collect()
}

/// Mean cosine to the target against the calibrated threshold.
pub fn semi_plot_data(report: &SemiOnlineReport) -> Result<PlotData> {
    let defense = single_defense(report.records.iter().map(|r| r.defense))?;
    Ok(PlotData {
        title: format!("{} / {}", report.records[0].dataset, defense),
        x_label: "tau".into(),
        y_label: "cos(theta_K, theta*)".into(),
        series: mean_series(
            report
                .records
                .iter()
                .filter_map(|r| r.tau.map(|t| (r.attack, t, r.cos_to_target))),
        ),
        bands: report.boundaries,
        baseline: None,
    })
}

/// Mean online error against the retention fraction, with the mean offline
/// optimum as the baseline.
pub fn fully_plot_data(records: &[FullyOnlineRunRecord]) -> Result<PlotData> {
    let defense = single_defense(records.iter().map(|r| r.defense))?;
    let offline: Vec<f64> = records
        .iter()
        .filter_map(|r| r.offline_optimal_error)
        .collect();
    Ok(PlotData {
        title: format!("{} / {}", records[0].dataset, defense),
        x_label: "retention".into(),
        y_label: "online error".into(),
        series: mean_series(
            records
                .iter()
                .map(|r| (r.attack, r.retention, r.online_error)),
        ),
        bands: None,
        baseline: (!offline.is_empty()).then(|| offline.iter().sum::<f64>() / offline.len() as f64),
    })
}

const W: f64 = 640.0;
const H: f64 = 400.0;
const PAD: f64 = 56.0;
const COLORS: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn range(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
        (a.min(v), b.max(v))
    });
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

/// Renders a self-contained SVG document.
pub fn render_svg(data: &PlotData) -> String {
    let pts = || data.series.values().flatten();
    let (x0, x1) = range(pts().map(|p| p.0));
    let (y0, y1) = range(pts().map(|p| p.1).chain(data.baseline));
    let sx = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);
    let (top, bottom) = (PAD, H - PAD);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(s, r#"<title>{}</title>"#, escape(&data.title));
    if let Some(b) = data.bands {
        if let Some(th) = b.tau_hard.filter(|&t| t >= x0) {
            let right = sx(th.min(x1));
            let _ = writeln!(
                s,
                r##"<rect class="hard-band" data-tau="{th}" x="{PAD}" y="{top}" width="{}" height="{}" fill="#d62728" fill-opacity="0.12"/>"##,
                right - PAD,
                bottom - top
            );
        }
        if let Some(te) = b.tau_easy.filter(|&t| t < x1) {
            let left = sx(te.max(x0));
            let _ = writeln!(
                s,
                r##"<rect class="easy-band" data-tau="{te}" x="{left}" y="{top}" width="{}" height="{}" fill="#2ca02c" fill-opacity="0.12"/>"##,
                W - PAD - left,
                bottom - top
            );
        }
    }
    let _ = writeln!(
        s,
        r#"<line class="axis" x1="{PAD}" y1="{bottom}" x2="{}" y2="{bottom}" stroke="black"/>"#,
        W - PAD
    );
    let _ = writeln!(
        s,
        r#"<line class="axis" x1="{PAD}" y1="{top}" x2="{PAD}" y2="{bottom}" stroke="black"/>"#
    );
    for (v, label) in [(x0, sx(x0)), (x1, sx(x1))] {
        let _ = writeln!(
            s,
            r#"<text class="tick" x="{label}" y="{}" text-anchor="middle" font-size="11">{v:.3}</text>"#,
            bottom + 16.0
        );
    }
    for (v, label) in [(y0, sy(y0)), (y1, sy(y1))] {
        let _ = writeln!(
            s,
            r#"<text class="tick" x="{}" y="{label}" text-anchor="end" font-size="11">{v:.3}</text>"#,
            PAD - 6.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        W / 2.0,
        H - 12.0,
        escape(&data.x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(&data.y_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle">{}</text>"#,
        W / 2.0,
        escape(&data.title)
    );
    if let Some(b) = data.baseline {
        let y = sy(b);
        let _ = writeln!(
            s,
            r#"<line class="baseline" data-value="{b}" x1="{PAD}" y1="{y}" x2="{}" y2="{y}" stroke="gray" stroke-dasharray="6 4"/>"#,
            W - PAD
        );
    }
    for (i, (name, points)) in data.series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let path: Vec<String> = points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline class="series" data-attack="{}" points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            escape(name),
            path.join(" ")
        );
        let _ = writeln!(
            s,
            r#"<text class="legend" x="{}" y="{}" fill="{color}" font-size="12">{}</text>"#,
            W - PAD - 120.0,
            PAD + 16.0 * (i as f64 + 1.0),
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    s
}

pub fn emit_plot(path: &Path, data: &PlotData) -> Result<()> {
    std::fs::write(path, render_svg(data)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::SemiOnlineRunRecord;

    fn rec(attack: AttackKind, tau: f64, cos: f64, defense: DefenseKind) -> SemiOnlineRunRecord {
        SemiOnlineRunRecord {
            dataset: "toy".into(),
            defense,
            percentile: 50.0,
            tau: Some(tau),
            attack,
            budget: 10,
            eta: 0.1,
            seed: 0,
            cos_to_target: Some(cos),
            test_error: None,
            inserted: Some(10),
            regime: None,
            error: None,
        }
    }

    #[test]
    fn svg_has_bands_series_and_baseline() {
        let report = SemiOnlineReport {
            records: vec![
                rec(AttackKind::Greedy, 1.0, -0.5, DefenseKind::Slab),
                rec(AttackKind::Greedy, 1.0, -0.3, DefenseKind::Slab),
                rec(AttackKind::Greedy, 3.0, 0.9, DefenseKind::Slab),
                rec(AttackKind::Simplistic, 3.0, 0.8, DefenseKind::Slab),
            ],
            boundaries: Some(RegimeBoundaries {
                tau_easy: Some(2.0),
                tau_hard: Some(1.5),
            }),
        };
        let mut data = semi_plot_data(&report).unwrap();
        assert_eq!(data.series["greedy"], vec![(1.0, -0.4), (3.0, 0.9)]);
        data.baseline = Some(0.0);
        let svg = render_svg(&data);
        let doc = roxmltree::Document::parse(&svg).unwrap();
        let class = |c: &str| {
            doc.descendants()
                .filter(|n| n.attribute("class") == Some(c))
                .count()
        };
        assert_eq!(class("hard-band"), 1);
        assert_eq!(class("easy-band"), 1);
        assert_eq!(class("series"), 2);
        let base = doc
            .descendants()
            .find(|n| n.attribute("class") == Some("baseline"))
            .unwrap();
        assert!(base.attribute("stroke-dasharray").is_some());
    }

    #[test]
    fn mixed_defenses_rejected() {
        let report = SemiOnlineReport {
            records: vec![
                rec(AttackKind::Greedy, 1.0, 0.0, DefenseKind::Slab),
                rec(AttackKind::Greedy, 1.0, 0.0, DefenseKind::Centroid),
            ],
            boundaries: None,
        };
        assert!(semi_plot_data(&report).is_err());
        assert!(fully_plot_data(&[]).is_err());
    }
}
