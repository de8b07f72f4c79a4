//! Static SVG charts rendered from the CSV tables.
//!
//! Both charts take CSV text as input so a plot can always be regenerated
//! from the table alone.

use std::fmt::Write as _;

use crate::confidence_analysis::{sorted_view, ConfidenceSeries};
use crate::error::{Error, Result};

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 360.0;
const MARGIN_LEFT: f64 = 56.0;
const MARGIN_RIGHT: f64 = 120.0;
const MARGIN_TOP: f64 = 36.0;
const MARGIN_BOTTOM: f64 = 40.0;

/// Marker color per model tag: full blue, upper green, lower red, baseline black.
pub fn tag_color(tag: &str) -> &'static str {
    match tag {
        "full" => "#1f4fd8",
        "upper" => "#2ca02c",
        "lower" => "#d62728",
        "baseline" => "#000000",
        _ => "#7f7f7f",
    }
}

struct Frame {
    y_min: f64,
    y_max: f64,
    n: usize,
}

impl Frame {
    fn x(&self, i: usize) -> f64 {
        let span = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
        if self.n <= 1 {
            MARGIN_LEFT + span / 2.0
        } else {
            MARGIN_LEFT + span * i as f64 / (self.n - 1) as f64
        }
    }

    fn y(&self, v: f64) -> f64 {
        let span = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
        MARGIN_TOP + span * (self.y_max - v) / (self.y_max - self.y_min)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn open(out: &mut String, title: &str, frame: &Frame, y_label: &str, ticks: &[f64]) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="20" text-anchor="middle" font-size="13">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    let right = WIDTH - MARGIN_RIGHT;
    for &t in ticks {
        let y = frame.y(t);
        let _ = writeln!(
            out,
            r##"<line x1="{MARGIN_LEFT:.2}" y1="{y:.2}" x2="{right:.2}" y2="{y:.2}" stroke="#dddddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">{t:.2}</text>"##,
            MARGIN_LEFT - 6.0,
            y + 4.0
        );
    }
    let bottom = HEIGHT - MARGIN_BOTTOM;
    let _ = writeln!(
        out,
        r#"<line x1="{MARGIN_LEFT:.2}" y1="{bottom:.2}" x2="{right:.2}" y2="{bottom:.2}" stroke="black"/><line x1="{MARGIN_LEFT:.2}" y1="{MARGIN_TOP:.2}" x2="{MARGIN_LEFT:.2}" y2="{bottom:.2}" stroke="black"/>"#
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">frame index ({} frames)</text>"#,
        MARGIN_LEFT + (right - MARGIN_LEFT) / 2.0,
        HEIGHT - 10.0,
        frame.n
    );
    let _ = writeln!(
        out,
        r#"<text x="14" y="{:.2}" text-anchor="middle" transform="rotate(-90 14 {:.2})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(y_label)
    );
}

fn legend(out: &mut String, entries: &[(&str, &str)]) {
    let x = WIDTH - MARGIN_RIGHT + 14.0;
    for (k, (label, color)) in entries.iter().enumerate() {
        let y = MARGIN_TOP + 10.0 + 18.0 * k as f64;
        let _ = writeln!(
            out,
            r#"<circle cx="{x:.2}" cy="{y:.2}" r="4" fill="{color}"/><text x="{:.2}" y="{:.2}">{}</text>"#,
            x + 10.0,
            y + 4.0,
            escape(label)
        );
    }
}

/// Scatter of every model's confidence per frame, frames sorted ascending by
/// `reference_tag`.
pub fn confidence_plot(series_csv: &str, reference_tag: &str, title: &str) -> Result<String> {
    let series = ConfidenceSeries::from_csv(series_csv)?;
    let (_, sorted) = sorted_view(&series, reference_tag, true)?;
    let frame = Frame {
        y_min: 0.0,
        y_max: 1.0,
        n: sorted.len(),
    };
    let mut out = String::new();
    open(
        &mut out,
        title,
        &frame,
        "inherent confidence",
        &[0.0, 0.25, 0.5, 0.75, 1.0],
    );
    // reference drawn last so it sits on top
    let mut order: Vec<&(String, Vec<f64>)> = sorted
        .columns
        .iter()
        .filter(|(t, _)| t != reference_tag)
        .collect();
    order.extend(sorted.columns.iter().filter(|(t, _)| t == reference_tag));
    for (tag, values) in order {
        let color = tag_color(tag);
        let _ = writeln!(out, r#"<g fill="{color}">"#);
        for (i, v) in values.iter().enumerate() {
            let _ = writeln!(
                out,
                r#"<circle cx="{:.2}" cy="{:.2}" r="2.5"/>"#,
                frame.x(i),
                frame.y(*v)
            );
        }
        out.push_str("</g>\n");
    }
    let entries: Vec<(&str, &str)> = sorted.tags().map(|t| (t, tag_color(t))).collect();
    legend(&mut out, &entries);
    out.push_str("</svg>\n");
    Ok(out)
}

/// Per-frame decrease table: `frame_id,baseline,variant,decrease`, in plot order.
pub fn difference_csv(frames: &[String], baseline: &[f64], variant: &[f64]) -> String {
    let mut out = String::from("frame_id,baseline,variant,decrease\n");
    for ((f, b), v) in frames.iter().zip(baseline).zip(variant) {
        let _ = writeln!(out, "{f},{b},{v},{}", b - v);
    }
    out
}

/// Markers of `baseline - variant` per frame in CSV order; negative values
/// (the variant did better) are red.
pub fn difference_plot(diff_csv: &str, title: &str) -> Result<String> {
    let mut values = Vec::new();
    for (n, line) in diff_csv
        .lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .enumerate()
    {
        let cell = line
            .rsplit(',')
            .next()
            .ok_or_else(|| Error::Config(format!("difference CSV row {} is empty", n + 2)))?;
        values.push(cell.parse::<f64>().map_err(|_| {
            Error::Config(format!("difference CSV row {}: bad value `{cell}`", n + 2))
        })?);
    }
    let frame = Frame {
        y_min: -1.0,
        y_max: 1.0,
        n: values.len(),
    };
    let mut out = String::new();
    open(
        &mut out,
        title,
        &frame,
        "confidence decrease",
        &[-1.0, -0.5, 0.0, 0.5, 1.0],
    );
    let zero = frame.y(0.0);
    for (i, v) in values.iter().enumerate() {
        let color = if *v < 0.0 { "#d62728" } else { "#1f4fd8" };
        let (x, y) = (frame.x(i), frame.y(*v));
        let _ = writeln!(
            out,
            r#"<line x1="{x:.2}" y1="{zero:.2}" x2="{x:.2}" y2="{y:.2}" stroke="{color}" stroke-width="1"/><circle cx="{x:.2}" cy="{y:.2}" r="2.5" fill="{color}"/>"#
        );
    }
    let lost = frame.y(0.5);
    let _ = writeln!(
        out,
        r##"<line x1="{MARGIN_LEFT:.2}" y1="{lost:.2}" x2="{:.2}" y2="{lost:.2}" stroke="#999999" stroke-dasharray="4 3"/>"##,
        WIDTH - MARGIN_RIGHT
    );
    legend(
        &mut out,
        &[("decrease", "#1f4fd8"), ("improvement", "#d62728")],
    );
    out.push_str("</svg>\n");
    Ok(out)
}
