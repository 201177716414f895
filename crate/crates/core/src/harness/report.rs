use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{StudyResult, METRIC_NAMES};
use crate::error::{Error, Result};
use crate::metrics::MetricsReport;

fn write(path: PathBuf, body: &str) -> Result<PathBuf> {
    fs::write(&path, body).map_err(|source| Error::Io {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}

/// One row per (arm, metric): mean, std, delta, p-value, significance.
pub fn summary_csv(result: &StudyResult) -> String {
    let mut s = String::from("arm,series,x,metric,mean,std,delta,p_value,significant\n");
    for arm in &result.arms {
        for (name, m) in &arm.metrics {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{}",
                arm.label,
                arm.series.as_deref().unwrap_or(""),
                arm.x.map_or(String::new(), |x| x.to_string()),
                name,
                m.mean,
                m.std,
                m.delta,
                m.p_value.map_or(String::new(), |p| p.to_string()),
                m.significant
            );
        }
    }
    s
}

/// One row per (arm, repetition) with every metric.
pub fn trials_csv(result: &StudyResult) -> String {
    let mut s = format!("arm,repetition,{}\n", MetricsReport::CSV_HEADER);
    for arm in &result.arms {
        for (r, rep) in arm.reports.iter().enumerate() {
            let _ = writeln!(s, "{},{r},{}", arm.label, rep.csv_row());
        }
    }
    s
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

/// Line plot of `metric` against each arm's `x`, one line per series.
/// `None` when no arm has both a position and the metric.
pub fn metric_svg(result: &StudyResult, metric: &str) -> Option<String> {
    let mut series: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    for arm in &result.arms {
        let (Some(x), Some(y)) = (arm.x, arm.mean(metric)) else {
            continue;
        };
        let name = arm.series.clone().unwrap_or_default();
        match series.iter_mut().find(|(n, _)| *n == name) {
            Some((_, pts)) => pts.push((x, y)),
            None => series.push((name, vec![(x, y)])),
        }
    }
    if series.is_empty() {
        return None;
    }
    for (_, pts) in &mut series {
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    let all = series.iter().flat_map(|(_, p)| p.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if x1 - x0 < 1e-12 {
        x1 = x0 + 1.0;
    }
    let pad = ((y1 - y0) * 0.1).max(0.5);
    let (y0, y1) = (y0 - pad, y1 + pad);

    let (w, h, m) = (640.0, 400.0, 60.0);
    let px = |x: f64| m + (x - x0) / (x1 - x0) * (w - 2.0 * m);
    let py = |y: f64| h - m - (y - y0) / (y1 - y0) * (h - 2.0 * m);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<path d="M{m} {m} V{b} H{r}" fill="none" stroke="black"/>"#,
        b = h - m,
        r = w - m
    );
    for k in 0..=4 {
        let fx = x0 + (x1 - x0) * k as f64 / 4.0;
        let fy = y0 + (y1 - y0) * k as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{fx:.3}</text>"#,
            px(fx),
            h - m + 18.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{fy:.1}</text>"#,
            m - 6.0,
            py(fy) + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="20" text-anchor="middle" font-size="14">{metric}</text>"#,
        w / 2.0
    );
    for (i, (name, pts)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let path: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.1},{:.1}", px(x), py(y))).collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            path.join(" ")
        );
        for &(x, y) in pts {
            let _ = writeln!(s, r#"<circle cx="{:.1}" cy="{:.1}" r="3" fill="{color}"/>"#, px(x), py(y));
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" fill="{color}">{name}</text>"#,
            w - m + 4.0,
            m + 16.0 * i as f64
        );
    }
    s.push_str("</svg>\n");
    Some(s)
}

/// Writes `summary.csv`, `trials.csv` and one SVG per plottable metric
/// into `dir`. Returns the written paths.
pub fn write_report(result: &StudyResult, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut out = vec![
        write(dir.join("summary.csv"), &summary_csv(result))?,
        write(dir.join("trials.csv"), &trials_csv(result))?,
    ];
    for m in METRIC_NAMES {
        if let Some(svg) = metric_svg(result, m) {
            out.push(write(dir.join(format!("{m}.svg")), &svg)?);
        }
    }
    Ok(out)
}
