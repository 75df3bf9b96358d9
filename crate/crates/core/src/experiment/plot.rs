//! Minimal SVG charts: learning curves, bar charts, sweeps and UAV paths.

use std::fmt::Write;

use crate::env::Area;

/// Smoothing window for learning curves.
pub const SMOOTH_WINDOW: usize = 50;

const W: f64 = 720.0;
const H: f64 = 440.0;
const MARGIN: f64 = 60.0;

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

/// Color for a series label. Depends only on the label, so a run keeps its
/// color across invocations and legend orderings.
pub fn color_for(label: &str) -> &'static str {
    let fixed = ["sacppv", "sac", "random", "greedy", "sac+pfam+per", "sac+pfam+vrc", "sac+per+vrc"];
    if let Some(i) = fixed.iter().position(|l| *l == label) {
        return PALETTE[i];
    }
    // FNV-1a
    let h = label.bytes().fold(0xcbf29ce484222325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100000001b3));
    PALETTE[(h % PALETTE.len() as u64) as usize]
}

/// Trailing moving average; early points average what is available.
pub fn smooth(values: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    let mut sum = 0.0;
    values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            sum += v;
            if i >= window {
                sum -= values[i - window];
            }
            sum / (i + 1).min(window) as f64
        })
        .collect()
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Maps data ranges onto the plotting frame.
struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        let pad = |a: f64, b: f64| if (b - a).abs() < 1e-12 { (a - 0.5, b + 0.5) } else { (a, b) };
        let (x0, x1) = pad(x0, x1);
        let (y0, y1) = pad(y0, y1);
        Self { x0, x1, y0, y1 }
    }

    fn fit(xs: impl Iterator<Item = f64> + Clone, ys: impl Iterator<Item = f64> + Clone) -> Self {
        let lo = |it: &mut dyn Iterator<Item = f64>| it.fold(f64::INFINITY, f64::min);
        let hi = |it: &mut dyn Iterator<Item = f64>| it.fold(f64::NEG_INFINITY, f64::max);
        let (x0, x1) = (lo(&mut xs.clone()), hi(&mut xs.clone()));
        let (y0, y1) = (lo(&mut ys.clone()), hi(&mut ys.clone()));
        if !x0.is_finite() || !y0.is_finite() {
            return Self::new(0.0, 1.0, 0.0, 1.0);
        }
        Self::new(x0, x1, y0, y1)
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x0) / (self.x1 - self.x0) * (W - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        H - MARGIN - (y - self.y0) / (self.y1 - self.y0) * (H - 2.0 * MARGIN)
    }
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, W / 2.0, escape(title));
}

fn axes(out: &mut String, f: &Frame, xlabel: &str, ylabel: &str) {
    let (l, r, t, b) = (MARGIN, W - MARGIN, MARGIN, H - MARGIN);
    let _ = writeln!(out, r#"<g class="axes" stroke="black" fill="none"><line x1="{l}" y1="{b}" x2="{r}" y2="{b}"/><line x1="{l}" y1="{t}" x2="{l}" y2="{b}"/></g>"#);
    for k in 0..=4 {
        let fx = f.x0 + (f.x1 - f.x0) * k as f64 / 4.0;
        let fy = f.y0 + (f.y1 - f.y0) * k as f64 / 4.0;
        let _ = writeln!(out, r#"<text x="{:.1}" y="{}" text-anchor="middle">{}</text>"#, f.px(fx), b + 16.0, tick(fx));
        let _ = writeln!(out, r#"<text x="{}" y="{:.1}" text-anchor="end">{}</text>"#, l - 6.0, f.py(fy) + 4.0, tick(fy));
    }
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, W / 2.0, H - 18.0, escape(xlabel));
    let _ = writeln!(
        out,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(ylabel)
    );
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e5 || v.abs() < 1e-2) {
        format!("{v:.2e}")
    } else {
        format!("{v:.2}")
    }
}

fn legend(out: &mut String, labels: &[&str]) {
    let _ = writeln!(out, r#"<g class="legend">"#);
    for (i, l) in labels.iter().enumerate() {
        let y = MARGIN + 8.0 + 18.0 * i as f64;
        let x = W - MARGIN - 150.0;
        let _ = writeln!(
            out,
            r#"<g class="legend-entry"><rect x="{x}" y="{}" width="12" height="12" fill="{}"/><text x="{}" y="{}">{}</text></g>"#,
            y - 10.0,
            color_for(l),
            x + 18.0,
            y,
            escape(l)
        );
    }
    let _ = writeln!(out, "</g>");
}

/// Return-vs-episode curves, one per `(label, returns)` series, each
/// smoothed with `window`.
pub fn learning_curve_svg(series: &[(String, Vec<f64>)], window: usize) -> String {
    let smoothed: Vec<Vec<f64>> = series.iter().map(|(_, v)| smooth(v, window)).collect();
    let n = smoothed.iter().map(Vec::len).max().unwrap_or(0);
    let f = Frame::fit([0.0, n.saturating_sub(1) as f64].into_iter(), smoothed.iter().flatten().copied());
    let mut out = String::new();
    header(&mut out, &format!("Learning curve (moving average, window {window})"));
    axes(&mut out, &f, "episode", "episode return");
    for ((label, _), ys) in series.iter().zip(&smoothed) {
        let pts: Vec<String> = ys.iter().enumerate().map(|(i, y)| format!("{:.2},{:.2}", f.px(i as f64), f.py(*y))).collect();
        let _ = writeln!(
            out,
            r#"<polyline class="curve" data-label="{}" fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#,
            escape(label),
            color_for(label),
            pts.join(" ")
        );
    }
    let labels: Vec<&str> = series.iter().map(|(l, _)| l.as_str()).collect();
    legend(&mut out, &labels);
    out.push_str("</svg>\n");
    out
}

/// Side-by-side bars of mean fair data and mean energy per `(label, fair,
/// energy)` row. Each panel has its own scale.
pub fn bar_chart_svg(rows: &[(String, f64, f64)]) -> String {
    let mut out = String::new();
    header(&mut out, "Fair data and energy per algorithm");
    let panel_w = (W - 3.0 * MARGIN) / 2.0;
    for (p, (name, pick)) in [("fair data (bits)", 0usize), ("energy (J)", 1)].iter().enumerate() {
        let vals: Vec<f64> = rows.iter().map(|r| if *pick == 0 { r.1 } else { r.2 }).collect();
        let top = vals.iter().fold(0.0f64, |m, v| m.max(*v)).max(1e-12);
        let left = MARGIN + p as f64 * (panel_w + MARGIN);
        let base = H - MARGIN;
        let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, left + panel_w / 2.0, MARGIN - 12.0, name);
        let _ = writeln!(out, r#"<line x1="{left}" y1="{base}" x2="{}" y2="{base}" stroke="black"/>"#, left + panel_w);
        let slot = panel_w / rows.len().max(1) as f64;
        for (i, (label, v)) in rows.iter().map(|r| &r.0).zip(&vals).enumerate() {
            let h = (v.max(0.0) / top) * (H - 2.0 * MARGIN - 20.0);
            let x = left + slot * i as f64 + slot * 0.15;
            let _ = writeln!(
                out,
                r#"<rect class="bar" data-label="{}" x="{x:.1}" y="{:.1}" width="{:.1}" height="{h:.1}" fill="{}"/>"#,
                escape(label),
                base - h,
                slot * 0.7,
                color_for(label)
            );
            let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="10">{}</text>"#, x + slot * 0.35, base - h - 4.0, tick(*v));
            let _ = writeln!(out, r#"<text x="{:.1}" y="{}" text-anchor="middle" font-size="10">{}</text>"#, x + slot * 0.35, base + 14.0, escape(label));
        }
    }
    out.push_str("</svg>\n");
    out
}

/// Mean fair data against sensor count, one line per algorithm label.
pub fn sweep_svg(series: &[(String, Vec<(usize, f64)>)]) -> String {
    let f = Frame::fit(
        series.iter().flat_map(|(_, p)| p.iter().map(|(n, _)| *n as f64)),
        series.iter().flat_map(|(_, p)| p.iter().map(|(_, v)| *v)).chain([0.0]),
    );
    let mut out = String::new();
    header(&mut out, "Fair data versus number of sensors");
    axes(&mut out, &f, "number of sensors", "mean fair data (bits)");
    for (label, pts) in series {
        let c = color_for(label);
        let coords: Vec<String> = pts.iter().map(|(n, v)| format!("{:.2},{:.2}", f.px(*n as f64), f.py(*v))).collect();
        let _ = writeln!(out, r#"<polyline class="curve" data-label="{}" fill="none" stroke="{c}" stroke-width="1.5" points="{}"/>"#, escape(label), coords.join(" "));
        for (n, v) in pts {
            let _ = writeln!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="4" fill="{c}"/>"#, f.px(*n as f64), f.py(*v));
        }
    }
    let labels: Vec<&str> = series.iter().map(|(l, _)| l.as_str()).collect();
    legend(&mut out, &labels);
    out.push_str("</svg>\n");
    out
}

/// UAV path over the sensor layout. The path polyline carries one vertex
/// per entry of `path`; every sensor gets one marker.
pub fn trajectory_svg(path: &[(f64, f64)], sensors: &[(f64, f64)], area: &Area, title: &str) -> String {
    let f = Frame::new(area.x_min, area.x_max, area.y_min, area.y_max);
    let mut out = String::new();
    header(&mut out, title);
    axes(&mut out, &f, "x (m)", "y (m)");
    let pts: Vec<String> = path.iter().map(|(x, y)| format!("{:.2},{:.2}", f.px(*x), f.py(*y))).collect();
    let _ = writeln!(out, r##"<polyline class="uav-path" fill="none" stroke="#1f77b4" stroke-width="1.5" points="{}"/>"##, pts.join(" "));
    if let Some((x, y)) = path.first() {
        let _ = writeln!(out, r##"<rect class="start" x="{:.2}" y="{:.2}" width="8" height="8" fill="#2ca02c"/>"##, f.px(*x) - 4.0, f.py(*y) - 4.0);
    }
    for (i, (x, y)) in sensors.iter().enumerate() {
        let _ = writeln!(
            out,
            r##"<circle class="sensor" data-id="{i}" cx="{:.2}" cy="{:.2}" r="5" fill="#d62728"/>"##,
            f.px(*x),
            f.py(*y)
        );
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn count(svg: &str, needle: &str) -> usize {
        svg.matches(needle).count()
    }

    #[test]
    fn smoothing_is_trailing_mean() {
        assert_eq!(smooth(&[1.0, 3.0, 5.0, 7.0], 2), vec![1.0, 2.0, 4.0, 6.0]);
        assert_eq!(smooth(&[2.0, 4.0], 50), vec![2.0, 3.0]);
        assert!(smooth(&[], 50).is_empty());
    }

    #[test]
    fn trajectory_counts() {
        let area = Area { x_min: 0.0, x_max: 100.0, y_min: 0.0, y_max: 100.0 };
        let path: Vec<(f64, f64)> = (0..51).map(|t| (t as f64, 50.0)).collect();
        let svg = trajectory_svg(&path, &[(10.0, 10.0), (50.0, 80.0), (90.0, 20.0)], &area, "UAV trajectory");
        let line = svg.lines().find(|l| l.contains("uav-path")).unwrap();
        let points = line.split("points=\"").nth(1).unwrap().trim_end_matches("\"/>");
        assert_eq!(points.split_whitespace().count(), 51);
        assert_eq!(count(&svg, "class=\"sensor\""), 3);
    }

    #[test]
    fn legend_and_stable_colors() {
        let s = vec![("sacppv".to_string(), vec![1.0, 2.0]), ("sac".to_string(), vec![0.5, 0.7])];
        let svg = learning_curve_svg(&s, SMOOTH_WINDOW);
        assert_eq!(count(&svg, "class=\"legend-entry\""), 2);
        assert_eq!(count(&svg, "class=\"curve\""), 2);
        let reversed: Vec<_> = s.iter().rev().cloned().collect();
        let again = learning_curve_svg(&reversed, SMOOTH_WINDOW);
        assert!(again.contains(&format!("data-label=\"sacppv\" fill=\"none\" stroke=\"{}\"", color_for("sacppv"))));
        assert_ne!(color_for("sacppv"), color_for("sac"));
        assert_eq!(color_for("my-run"), color_for("my-run"));
    }

    #[test]
    fn single_series_single_curve() {
        let svg = learning_curve_svg(&[("greedy".into(), vec![0.0; 10])], 5);
        assert_eq!(count(&svg, "class=\"curve\""), 1);
        let bars = bar_chart_svg(&[("a".into(), 1.0, 2.0), ("b".into(), 3.0, 4.0)]);
        assert_eq!(count(&bars, "class=\"bar\""), 4);
        let sweep = sweep_svg(&[("greedy".into(), vec![(3, 1.0), (6, 2.0), (9, 3.0)])]);
        assert_eq!(count(&sweep, "<circle"), 3);
    }
}
