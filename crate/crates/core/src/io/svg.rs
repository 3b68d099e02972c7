//! Minimal static SVG plots. Output only; nothing reads them back.

use std::fmt::Write as _;

const W: f64 = 640.0;
const H: f64 = 480.0;
const M: f64 = 60.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn frame(out: &mut String, title: &str, xlabel: &str, ylabel: &str) {
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(out, r#"<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="24" text-anchor="middle" font-size="16">{}</text>"#, W / 2.0, escape(title));
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle" font-size="13">{}</text>"#, W / 2.0, H - 12.0, escape(xlabel));
    let _ = writeln!(
        out,
        r#"<text x="16" y="{}" text-anchor="middle" font-size="13" transform="rotate(-90 16 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(ylabel)
    );
    let _ = writeln!(out, r#"<rect x="{M}" y="{M}" width="{}" height="{}" fill="none" stroke="black"/>"#, W - 2.0 * M, H - 2.0 * M);
}

fn range(v: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = v.filter(|x| x.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, lo + 0.5)
    }
}

/// Polylines sharing one x axis.
pub fn line_plot(title: &str, xlabel: &str, ylabel: &str, x: &[f64], series: &[(&str, &[f64])]) -> String {
    let mut out = String::new();
    frame(&mut out, title, xlabel, ylabel);
    let (x0, x1) = range(x.iter().copied());
    let (y0, y1) = range(series.iter().flat_map(|(_, y)| y.iter().copied()));
    let px = |v: f64| M + (v - x0) / (x1 - x0) * (W - 2.0 * M);
    let py = |v: f64| H - M - (v - y0) / (y1 - y0) * (H - 2.0 * M);
    let colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];
    for (k, (name, y)) in series.iter().enumerate() {
        let pts: Vec<String> = x
            .iter()
            .zip(y.iter())
            .filter(|(a, b)| a.is_finite() && b.is_finite())
            .map(|(&a, &b)| format!("{:.2},{:.2}", px(a), py(b)))
            .collect();
        let c = colors[k % colors.len()];
        let _ = writeln!(out, r#"<polyline fill="none" stroke="{c}" stroke-width="1.5" points="{}"/>"#, pts.join(" "));
        let _ = writeln!(out, r#"<text x="{}" y="{}" font-size="12" fill="{c}">{}</text>"#, W - M - 120.0, M + 16.0 * (k + 1) as f64, escape(name));
    }
    let _ = writeln!(out, r#"<text x="{M}" y="{}" font-size="11">{x0:.4e}</text>"#, H - M + 14.0);
    let _ = writeln!(out, r#"<text x="{}" y="{}" font-size="11" text-anchor="end">{x1:.4e}</text>"#, W - M, H - M + 14.0);
    out.push_str("</svg>\n");
    out
}

/// Heatmap of `values` (row-major, `ny` rows of `nx`), colored by log10 when
/// `log` is set. NaN cells are drawn grey.
pub fn heatmap(title: &str, xlabel: &str, ylabel: &str, nx: usize, ny: usize, values: &[f64], log: bool) -> String {
    let mut out = String::new();
    frame(&mut out, title, xlabel, ylabel);
    let t = |v: f64| if log { v.log10() } else { v };
    let (lo, hi) = range(values.iter().map(|&v| if log && v <= 0.0 { f64::NAN } else { t(v) }));
    let cw = (W - 2.0 * M) / nx.max(1) as f64;
    let ch = (H - 2.0 * M) / ny.max(1) as f64;
    for j in 0..ny {
        for i in 0..nx {
            let v = values[j * nx + i];
            let fill = if v.is_finite() && (!log || v > 0.0) {
                let s = ((t(v) - lo) / (hi - lo)).clamp(0.0, 1.0);
                let r = (255.0 * s) as u8;
                let b = (255.0 * (1.0 - s)) as u8;
                let g = (255.0 * (1.0 - (2.0 * s - 1.0).abs())) as u8;
                format!("#{r:02x}{g:02x}{b:02x}")
            } else {
                "#bbbbbb".into()
            };
            let _ = writeln!(
                out,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{fill}"/>"#,
                M + i as f64 * cw,
                H - M - (j + 1) as f64 * ch,
                cw + 0.05,
                ch + 0.05
            );
        }
    }
    let scale = if log { "log10 " } else { "" };
    let _ = writeln!(out, r#"<text x="{}" y="{}" font-size="11" text-anchor="end">{scale}range {lo:.3} .. {hi:.3}</text>"#, W - M, M - 6.0);
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Tag balance and attribute quoting; enough to catch broken output.
    fn well_formed(s: &str) -> bool {
        let mut stack: Vec<String> = Vec::new();
        let mut rest = s;
        while let Some(start) = rest.find('<') {
            let end = match rest[start..].find('>') {
                Some(e) => start + e,
                None => return false,
            };
            let tag = &rest[start + 1..end];
            rest = &rest[end + 1..];
            if tag.starts_with('?') {
                continue;
            }
            if tag.matches('"').count() % 2 != 0 {
                return false;
            }
            if let Some(name) = tag.strip_prefix('/') {
                if stack.pop().as_deref() != Some(name.trim()) {
                    return false;
                }
            } else if !tag.ends_with('/') {
                stack.push(tag.split_whitespace().next().unwrap_or("").to_string());
            }
        }
        stack.is_empty()
    }

    #[test]
    fn heatmap_is_well_formed() {
        let v: Vec<f64> = (0..12).map(|k| if k == 5 { f64::NAN } else { 10f64.powi(k) }).collect();
        let s = heatmap("a < b & c", "x", "y", 4, 3, &v, true);
        assert!(well_formed(&s));
        assert!(s.contains("&lt;"));
    }

    #[test]
    fn line_plot_is_well_formed() {
        let x = [0.0, 1.0, 2.0];
        let s = line_plot("t", "x", "y", &x, &[("a", &[1.0, 2.0, f64::NAN]), ("b", &[0.0, 0.0, 0.0])]);
        assert!(well_formed(&s));
    }
}
