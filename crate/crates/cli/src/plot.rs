//! DD-plot separator curve and a minimal SVG rendering.

use std::fmt::Write as _;

use ddalpha::alpha::Separator;

pub const CURVE_SAMPLES: usize = 512;
const ROOT_SCAN: usize = 1024;

/// Zero set of a two-class separator inside the unit square: for each of
/// `CURVE_SAMPLES` abscissas in `[0, 1]`, all ordinates in `[0, 1]` where
/// the score changes sign. Rows are `(abscissa index, x, y)`.
pub fn zero_curve(sep: &Separator) -> Vec<(usize, f64, f64)> {
    let mut out = Vec::new();
    for i in 0..CURVE_SAMPLES {
        let x = i as f64 / (CURVE_SAMPLES - 1) as f64;
        let f = |y: f64| sep.eval_values(&[x, y]);
        let mut prev_y = 0.0;
        let mut prev = f(0.0);
        if prev == 0.0 && x > 0.0 {
            out.push((i, x, 0.0));
        }
        for s in 1..=ROOT_SCAN {
            let y = s as f64 / ROOT_SCAN as f64;
            let v = f(y);
            if v == 0.0 {
                out.push((i, x, y));
            } else if prev != 0.0 && (prev < 0.0) != (v < 0.0) {
                let (mut lo, mut hi) = (prev_y, y);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if (f(mid) < 0.0) == (prev < 0.0) {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                out.push((i, x, 0.5 * (lo + hi)));
            }
            prev = v;
            prev_y = y;
        }
    }
    out
}

const SIZE: f64 = 560.0;
const MARGIN: f64 = 48.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

fn px(v: f64) -> f64 {
    MARGIN + v * (SIZE - 2.0 * MARGIN)
}

fn py(v: f64) -> f64 {
    SIZE - MARGIN - v * (SIZE - 2.0 * MARGIN)
}

/// Scatter of `(dx, dy, class, outsider)` with the separator curve.
pub fn svg(
    points: &[(f64, f64, usize, bool)],
    curve: &[(usize, f64, f64)],
    axis_names: (&str, &str),
) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let (lo, hi) = (px(0.0), px(1.0));
    let _ = writeln!(
        s,
        r#"<rect x="{lo}" y="{}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        py(1.0),
        hi - lo,
        hi - lo
    );
    let _ = writeln!(
        s,
        r##"<line x1="{lo}" y1="{}" x2="{hi}" y2="{}" stroke="#bbbbbb" stroke-dasharray="4 4"/>"##,
        py(0.0),
        py(1.0)
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="14">depth w.r.t. {}</text>"#,
        SIZE / 2.0,
        SIZE - 12.0,
        escape(axis_names.0)
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" font-size="14" transform="rotate(-90 16 {})">depth w.r.t. {}</text>"#,
        SIZE / 2.0,
        SIZE / 2.0,
        escape(axis_names.1)
    );
    for &(x, y, class, outsider) in points {
        let color = COLORS[class % COLORS.len()];
        if outsider {
            let _ = writeln!(
                s,
                r##"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="none" stroke="#888888"/>"##,
                px(x),
                py(y)
            );
        } else {
            let _ = writeln!(
                s,
                r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{color}" fill-opacity="0.6"/>"#,
                px(x),
                py(y)
            );
        }
    }
    // One polyline per run of consecutive abscissas, following the lowest
    // root.
    let mut runs: Vec<Vec<(f64, f64)>> = Vec::new();
    let mut last: Option<usize> = None;
    for &(i, x, y) in curve {
        if last == Some(i) {
            continue;
        }
        if last.is_none_or(|l| l + 1 != i) {
            runs.push(Vec::new());
        }
        runs.last_mut().unwrap().push((x, y));
        last = Some(i);
    }
    for run in runs.iter().filter(|r| r.len() > 1) {
        let pts: Vec<String> = run
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="black" stroke-width="1.5"/>"#,
            pts.join(" ")
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use ddalpha::alpha::monomials;

    #[test]
    fn bisector_curve() {
        let sep = Separator {
            pair: (0, 1),
            degree: 1,
            monomials: monomials(2, 1),
            weights: vec![1.0, -1.0],
            steps: vec![],
        };
        let curve = zero_curve(&sep);
        assert!(curve.len() >= CURVE_SAMPLES - 1);
        for &(_, x, y) in &curve {
            assert!((x - y).abs() < 1e-9);
        }
        let out = svg(&[(0.2, 0.1, 0, false), (0.0, 0.0, 1, true)], &curve, ("a", "b<c"));
        assert!(out.contains("<polyline"));
        assert!(out.contains("b&lt;c"));
    }
}
