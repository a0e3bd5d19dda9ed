use std::fmt::Write as _;
use std::path::Path;

use super::aggregate::{Curve, Metric};
use super::HarnessError;

const W: f64 = 800.0;
const H: f64 = 480.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 200.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;
const MAX_POINTS: usize = 600;
const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

fn thin(c: &Curve) -> Vec<usize> {
    let stride = c.steps.len().div_ceil(MAX_POINTS).max(1);
    let mut idx: Vec<usize> = (0..c.steps.len()).step_by(stride).collect();
    if idx.last() != Some(&(c.steps.len() - 1)) {
        idx.push(c.steps.len() - 1);
    }
    idx
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Renders mean curves with a shaded one-standard-deviation band as SVG.
pub fn render_svg(curves: &[Curve], metric: Metric) -> Result<String, HarnessError> {
    if curves.is_empty() || curves.iter().any(Curve::is_empty) {
        return Err(HarnessError::Aggregation("nothing to plot".into()));
    }
    let (mut x0, mut x1) = (u64::MAX, 0u64);
    let (mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY);
    for c in curves {
        x0 = x0.min(c.steps[0]);
        x1 = x1.max(*c.steps.last().unwrap());
        for (m, s) in c.mean.iter().zip(&c.std) {
            y0 = y0.min(m - s);
            y1 = y1.max(m + s);
        }
    }
    if !(y0.is_finite() && y1.is_finite()) {
        return Err(HarnessError::Numerical("non-finite curve values".into()));
    }
    if x1 == x0 {
        x1 = x0 + 1;
    }
    if y1 - y0 < 1e-12 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let pw = W - LEFT - RIGHT;
    let ph = H - TOP - BOTTOM;
    let px = |x: u64| LEFT + (x - x0) as f64 / (x1 - x0) as f64 * pw;
    let py = |y: f64| TOP + (1.0 - (y - y0) / (y1 - y0)) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for i in 0..=5 {
        let f = i as f64 / 5.0;
        let xv = x0 as f64 + f * (x1 - x0) as f64;
        let yv = y0 + f * (y1 - y0);
        let (gx, gy) = (LEFT + f * pw, TOP + (1.0 - f) * ph);
        let _ = writeln!(
            s,
            r##"<line x1="{gx:.1}" y1="{:.1}" x2="{gx:.1}" y2="{:.1}" stroke="black"/><text x="{gx:.1}" y="{:.1}" text-anchor="middle">{xv:.0}</text>"##,
            TOP + ph,
            TOP + ph + 5.0,
            TOP + ph + 20.0
        );
        let _ = writeln!(
            s,
            r##"<line x1="{:.1}" y1="{gy:.1}" x2="{LEFT}" y2="{gy:.1}" stroke="black"/><text x="{:.1}" y="{:.1}" text-anchor="end">{yv:.3}</text>"##,
            LEFT - 5.0,
            LEFT - 8.0,
            gy + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">step</text>"#,
        LEFT + pw / 2.0,
        H - 10.0
    );
    let _ = writeln!(
        s,
        r#"<text x="15" y="{:.1}" text-anchor="middle" transform="rotate(-90 15 {:.1})">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        metric.as_str()
    );

    for (k, c) in curves.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let idx = thin(c);
        let mut band = String::new();
        for &i in &idx {
            let _ = write!(band, "{:.2},{:.2} ", px(c.steps[i]), py(c.mean[i] + c.std[i]));
        }
        for &i in idx.iter().rev() {
            let _ = write!(band, "{:.2},{:.2} ", px(c.steps[i]), py(c.mean[i] - c.std[i]));
        }
        let _ = writeln!(
            s,
            r#"<polygon points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#,
            band.trim_end()
        );
        let line: Vec<String> = idx
            .iter()
            .map(|&i| format!("{:.2},{:.2}", px(c.steps[i]), py(c.mean[i])))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            line.join(" ")
        );
        let ly = TOP + 10.0 + 18.0 * k as f64;
        let lx = W - RIGHT + 15.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="3"/><text x="{}" y="{}">{}</text>"#,
            lx + 20.0,
            lx + 25.0,
            ly + 4.0,
            escape(&c.label)
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn emit_plot(curves: &[Curve], metric: Metric, path: &Path) -> Result<(), HarnessError> {
    let svg = render_svg(curves, metric)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, svg)?;
    Ok(())
}
