//! Minimal deterministic SVG phase portraits.

use std::fmt::Write as _;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 600.0;
const MARGIN_LEFT: f64 = 80.0;
const MARGIN_RIGHT: f64 = 30.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 60.0;
const COLORS: [&str; 4] = ["#1f5fa8", "#c8501e", "#2d8a3e", "#7a3d9a"];

pub struct Curve<'a> {
    pub label: &'a str,
    pub points: &'a [(f64, f64)],
}

#[derive(Debug, Clone, Copy)]
struct Range {
    lo: f64,
    hi: f64,
}

impl Range {
    fn of(values: impl Iterator<Item = f64>) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values.filter(|v| v.is_finite()) {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() {
            return Range { lo: -1.0, hi: 1.0 };
        }
        if hi - lo < 1e-12 {
            return Range { lo: lo - 1.0, hi: hi + 1.0 };
        }
        let pad = 0.05 * (hi - lo);
        Range { lo: lo - pad, hi: hi + pad }
    }
}

/// Step of roughly `span / 6` drawn from 1, 2, 5 times a power of ten.
fn tick_step(span: f64) -> f64 {
    let raw = span / 6.0;
    let base = 10f64.powf(raw.log10().floor());
    [1.0, 2.0, 5.0, 10.0]
        .into_iter()
        .map(|m| m * base)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * base)
}

fn ticks(r: Range) -> (Vec<f64>, usize) {
    let step = tick_step(r.hi - r.lo);
    let decimals = (-step.log10().floor()).max(0.0) as usize;
    let first = (r.lo / step).ceil() as i64;
    let last = (r.hi / step).floor() as i64;
    let values = (first..=last).map(|i| i as f64 * step).collect();
    (values, decimals)
}

/// `x` against `p` for every curve on shared axes.
pub fn phase_portrait(title: &str, curves: &[Curve]) -> String {
    let xr = Range::of(curves.iter().flat_map(|c| c.points.iter().map(|p| p.0)));
    let pr = Range::of(curves.iter().flat_map(|c| c.points.iter().map(|p| p.1)));
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let sx = |x: f64| MARGIN_LEFT + (x - xr.lo) / (xr.hi - xr.lo) * plot_w;
    let sy = |p: f64| MARGIN_TOP + (pr.hi - p) / (pr.hi - pr.lo) * plot_h;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 800 600" width="800" height="600" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect x="0" y="0" width="800" height="600" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="400" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        escape(title)
    );
    let _ = writeln!(
        out,
        r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
        MARGIN_LEFT, MARGIN_TOP, plot_w, plot_h
    );

    let (xt, xd) = ticks(xr);
    for t in xt {
        let x = sx(t);
        let _ = writeln!(
            out,
            r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            HEIGHT - MARGIN_BOTTOM,
            HEIGHT - MARGIN_BOTTOM + 6.0,
            HEIGHT - MARGIN_BOTTOM + 20.0,
            label(t, xd)
        );
    }
    let (pt, pd) = ticks(pr);
    for t in pt {
        let y = sy(t);
        let _ = writeln!(
            out,
            r#"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            MARGIN_LEFT - 6.0,
            MARGIN_LEFT,
            MARGIN_LEFT - 9.0,
            y + 4.0,
            label(t, pd)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">x</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 18.0
    );
    let _ = writeln!(
        out,
        r#"<text x="20" y="{:.2}" text-anchor="middle" transform="rotate(-90 20 {:.2})">p</text>"#,
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0
    );

    for (i, curve) in curves.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let mut pts = String::new();
        for (k, (x, p)) in curve.points.iter().enumerate() {
            if k > 0 {
                pts.push(' ');
            }
            let _ = write!(pts, "{:.2},{:.2}", sx(*x), sy(*p));
        }
        let dash = if i > 0 { r#" stroke-dasharray="6 4""# } else { "" };
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5"{dash} points="{pts}"/>"#
        );
        let ly = MARGIN_TOP + 16.0 + 16.0 * i as f64;
        let lx = WIDTH - MARGIN_RIGHT - 190.0;
        let _ = writeln!(
            out,
            r#"<line x1="{lx:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{color}" stroke-width="2"{dash}/><text x="{:.2}" y="{:.2}">{}</text>"#,
            ly - 4.0,
            lx + 24.0,
            ly - 4.0,
            lx + 30.0,
            ly,
            escape(curve.label)
        );
    }
    out.push_str("</svg>\n");
    out
}

fn label(v: f64, decimals: usize) -> String {
    let s = format!("{v:.decimals$}");
    // avoid "-0" and "-0.0"
    if s.trim_start_matches('-').chars().all(|c| c == '0' || c == '.') {
        s.trim_start_matches('-').to_string()
    } else {
        s
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
