//! Report and figure writers. Every output is a pure function of its input
//! so reruns are byte-identical.

use std::fmt::Write as _;

use radview_core::archzoo::ArchName;
use radview_core::cam::CamMap;
use radview_core::dataset::{AuditStatus, SetAudit};
use radview_core::metrics::{ConfusionMatrix, MetricsReport};
use radview_core::stats::AssociationRow;
use radview_core::taxonomy::ViewLabel;
use radview_core::trainer::EpochRecord;

pub use radview_core::trainer::history_jsonl;

pub fn metrics_json(report: &MetricsReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("plain data");
    s.push('\n');
    s
}

fn labels(n: usize) -> Vec<String> {
    let all: Vec<String> = ViewLabel::all().map(|l| l.canonical()).collect();
    (0..n)
        .map(|i| all.get(i).cloned().unwrap_or_else(|| format!("class {i}")))
        .collect()
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Rows are true labels, columns predictions; first row and column hold
/// canonical labels.
pub fn confusion_csv(cm: &ConfusionMatrix) -> String {
    let names = labels(cm.classes());
    let mut out = String::from("truth\\predicted");
    for n in &names {
        out.push(',');
        out.push_str(&csv_field(n));
    }
    out.push('\n');
    for (t, n) in names.iter().enumerate() {
        out.push_str(&csv_field(n));
        for v in cm.row(t) {
            write!(out, ",{v}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn format_p_value(p: Option<f64>) -> String {
    match p {
        None => String::new(),
        Some(p) if p < 1e-300 => "<1e-300".into(),
        Some(p) => format!("{p:.3e}"),
    }
}

/// Columns `label,with_marker_pct,correct_pct,p_value`.
pub fn association_csv(rows: &[AssociationRow]) -> String {
    let mut out = String::from("label,with_marker_pct,correct_pct,p_value\n");
    for r in rows {
        writeln!(
            out,
            "{},{:.4},{:.4},{}",
            r.label,
            r.flag_fraction * 100.0,
            r.correct_fraction * 100.0,
            format_p_value(r.p_value)
        )
        .unwrap();
    }
    out
}

pub fn history_csv(history: &[EpochRecord]) -> String {
    let mut out = String::from("epoch,train_loss,train_acc,val_acc\n");
    for r in history {
        let val = r.val_acc.map_or(String::new(), |v| v.to_string());
        writeln!(out, "{},{},{},{}", r.epoch, r.train_loss, r.train_acc, val).unwrap();
    }
    out
}

pub fn arch_info_csv(rows: &[(ArchName, u64, f64)]) -> String {
    let mut out = String::from("architecture,parameters,relative\n");
    for (name, count, rel) in rows {
        writeln!(out, "{},{count},{rel:.2}", name.display_name()).unwrap();
    }
    out
}

pub fn audit_csv(audits: &[SetAudit]) -> String {
    let join = |v: &[ViewLabel]| v.iter().map(|l| l.canonical()).collect::<Vec<_>>().join(";");
    let mut out = String::from("set_id,status,missing,duplicated\n");
    for a in audits {
        let status = match a.status {
            AuditStatus::Complete => "COMPLETE",
            AuditStatus::Incomplete => "INCOMPLETE",
        };
        writeln!(
            out,
            "{},{status},{},{}",
            csv_field(&a.set_id),
            join(&a.missing),
            join(&a.duplicated)
        )
        .unwrap();
    }
    out
}

/// Native-resolution CAM grid, one CSV row per feature-map row.
pub fn cam_grid_csv(cam: &CamMap) -> String {
    let mut out = String::new();
    for row in cam.grid.chunks(cam.width.max(1)) {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.6e}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

fn polyline(points: &[(f64, f64)], color: &str) -> String {
    let pts: Vec<String> = points.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
    format!(
        "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"2\" points=\"{}\"/>\n",
        pts.join(" ")
    )
}

/// Training loss (left axis, scaled to its maximum) and accuracies
/// (right axis, 0 to 1) per epoch.
pub fn training_curve_svg(history: &[EpochRecord]) -> String {
    let (w, h, m) = (640.0, 360.0, 40.0);
    let n = history.len().max(2) as f64 - 1.0;
    let max_loss = history
        .iter()
        .map(|r| r.train_loss)
        .filter(|v| v.is_finite())
        .fold(0.0f64, f64::max)
        .max(1e-12);
    let x = |i: usize| m + (w - 2.0 * m) * i as f64 / n;
    let y = |v: f64| h - m - (h - 2.0 * m) * v.clamp(0.0, 1.0);
    let loss: Vec<_> = history
        .iter()
        .enumerate()
        .map(|(i, r)| (x(i), y(r.train_loss / max_loss)))
        .collect();
    let train: Vec<_> = history.iter().enumerate().map(|(i, r)| (x(i), y(r.train_acc))).collect();
    let val: Vec<_> = history
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.val_acc.map(|v| (x(i), y(v))))
        .collect();
    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" font-family=\"sans-serif\" font-size=\"12\">\n\
         <rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n\
         <line x1=\"{m}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n\
         <line x1=\"{m}\" y1=\"{m}\" x2=\"{m}\" y2=\"{b}\" stroke=\"black\"/>\n\
         <text x=\"{cx}\" y=\"{ty}\" text-anchor=\"middle\">epoch (1 to {e})</text>\n\
         <text x=\"{m}\" y=\"{lt}\">loss (max {max_loss:.4}) / accuracy</text>\n",
        b = h - m,
        r = w - m,
        cx = w / 2.0,
        ty = h - 10.0,
        e = history.len(),
        lt = m - 10.0,
    );
    out.push_str(&polyline(&loss, "#d62728"));
    out.push_str(&polyline(&train, "#1f77b4"));
    out.push_str(&polyline(&val, "#2ca02c"));
    let legend = [("#d62728", "train loss"), ("#1f77b4", "train acc"), ("#2ca02c", "val acc")];
    for (i, (c, name)) in legend.iter().enumerate() {
        let ly = m + 16.0 * i as f64 + 10.0;
        writeln!(
            out,
            "<rect x=\"{}\" y=\"{}\" width=\"10\" height=\"10\" fill=\"{c}\"/><text x=\"{}\" y=\"{}\">{name}</text>",
            w - m - 90.0,
            ly - 9.0,
            w - m - 75.0,
            ly
        )
        .unwrap();
    }
    out.push_str("</svg>\n");
    out
}

/// Heat map of row-normalised confusion counts.
pub fn confusion_svg(cm: &ConfusionMatrix) -> String {
    let n = cm.classes();
    let cell = 10.0;
    let m = 20.0;
    let side = m * 2.0 + cell * n as f64;
    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{side}\" height=\"{side}\">\n<rect width=\"{side}\" height=\"{side}\" fill=\"white\"/>\n"
    );
    for t in 0..n {
        let total = cm.row_total(t).max(1) as f64;
        for p in 0..n {
            let v = cm.get(t, p) as f64 / total;
            if v == 0.0 {
                continue;
            }
            let shade = (255.0 * (1.0 - v)).round() as u8;
            writeln!(
                out,
                "<rect x=\"{}\" y=\"{}\" width=\"{cell}\" height=\"{cell}\" fill=\"rgb({shade},{shade},255)\"/>",
                m + cell * p as f64,
                m + cell * t as f64
            )
            .unwrap();
        }
    }
    writeln!(
        out,
        "<rect x=\"{m}\" y=\"{m}\" width=\"{w}\" height=\"{w}\" fill=\"none\" stroke=\"black\"/>",
        w = cell * n as f64
    )
    .unwrap();
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn p_value_formatting() {
        assert_eq!(format_p_value(Some(0.0)), "<1e-300");
        assert_eq!(format_p_value(Some(5.4e-5)), "5.400e-5");
        assert_eq!(format_p_value(None), "");
    }

    #[test]
    fn confusion_csv_is_49_by_49() {
        let mut cm = ConfusionMatrix::new(48);
        cm.record(0, 24).unwrap();
        let text = confusion_csv(&cm);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 49);
        assert!(lines.iter().all(|l| l.split(',').count() == 49));
        assert!(lines[1].starts_with("L FORE "));
    }
}
