//! Minimal deterministic SVG rendering: line/marker plots with error bars and the phase map.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2",
];

/// One plotted series; `err` is either empty or one half-width per point.
#[derive(Debug, Clone, Default)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    pub err: Vec<f64>,
}

impl Series {
    pub fn new(name: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Self {
            name: name.into(),
            points,
            err: Vec::new(),
        }
    }

    pub fn with_err(mut self, err: Vec<f64>) -> Self {
        self.err = err;
        self
    }
}

/// Plot layout options.
#[derive(Debug, Clone, Default)]
pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub log_y: bool,
    /// Horizontal reference lines `(y, label)`.
    pub hlines: Vec<(f64, String)>,
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn tick_label(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 {
        "0".into()
    } else if (1e-2..1e4).contains(&a) {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{v:.1e}")
    }
}

struct Scale {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Scale {
    fn fit(values: impl Iterator<Item = f64>, log: bool) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values {
            let t = if log { v.log10() } else { v };
            if t.is_finite() {
                lo = lo.min(t);
                hi = hi.max(t);
            }
        }
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if hi - lo < 1e-12 {
            lo -= 0.5;
            hi += 0.5;
        }
        let pad = 0.05 * (hi - lo);
        Self {
            lo: lo - pad,
            hi: hi + pad,
            log,
        }
    }

    fn frac(&self, v: f64) -> Option<f64> {
        let t = if self.log { v.log10() } else { v };
        t.is_finite().then(|| (t - self.lo) / (self.hi - self.lo))
    }

    fn ticks(&self) -> Vec<(f64, f64)> {
        (0..=4)
            .map(|i| {
                let t = self.lo + (self.hi - self.lo) * i as f64 / 4.0;
                let v = if self.log { 10f64.powf(t) } else { t };
                (i as f64 / 4.0, v)
            })
            .collect()
    }
}

/// Renders series as polylines with markers and optional error bars.
pub fn line_plot(plot: &Plot, series: &[Series]) -> String {
    let pw = W - LEFT - RIGHT;
    let ph = H - TOP - BOTTOM;
    let xs = Scale::fit(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)), plot.log_x);
    let ys = Scale::fit(
        series
            .iter()
            .flat_map(|s| {
                s.points.iter().enumerate().flat_map(move |(i, p)| {
                    let e = s.err.get(i).copied().unwrap_or(0.0);
                    [p.1, p.1 + e, if plot.log_y { p.1 } else { p.1 - e }]
                })
            })
            .chain(plot.hlines.iter().map(|h| h.0)),
        plot.log_y,
    );
    let px = |x: f64| xs.frac(x).map(|f| LEFT + f * pw);
    let py = |y: f64| ys.frac(y).map(|f| TOP + (1.0 - f) * ph);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        LEFT + pw / 2.0,
        esc(&plot.title)
    );
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for (f, v) in xs.ticks() {
        let x = LEFT + f * pw;
        let _ = writeln!(
            s,
            r#"<line x1="{x:.1}" y1="{:.1}" x2="{x:.1}" y2="{:.1}" stroke="black"/><text x="{x:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            TOP + ph,
            TOP + ph + 5.0,
            TOP + ph + 18.0,
            tick_label(v)
        );
    }
    for (f, v) in ys.ticks() {
        let y = TOP + (1.0 - f) * ph;
        let _ = writeln!(
            s,
            r#"<line x1="{:.1}" y1="{y:.1}" x2="{LEFT}" y2="{y:.1}" stroke="black"/><text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            LEFT - 5.0,
            LEFT - 8.0,
            y + 4.0,
            tick_label(v)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        H - 15.0,
        esc(&plot.x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{:.1}" text-anchor="middle" transform="rotate(-90 18 {:.1})">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        esc(&plot.y_label)
    );
    for (y, label) in &plot.hlines {
        if let Some(yy) = py(*y) {
            let _ = writeln!(
                s,
                r##"<line x1="{LEFT}" y1="{yy:.1}" x2="{:.1}" y2="{yy:.1}" stroke="#888" stroke-dasharray="4 3"/><text x="{:.1}" y="{:.1}" fill="#555">{}</text>"##,
                LEFT + pw,
                LEFT + pw + 4.0,
                yy + 4.0,
                esc(label)
            );
        }
    }
    for (k, ser) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let pts: Vec<(f64, f64)> = ser.points.iter().filter_map(|&(x, y)| Some((px(x)?, py(y)?))).collect();
        if pts.len() > 1 {
            let path: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.1},{y:.1}")).collect();
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
                path.join(" ")
            );
        }
        for (i, &(x, y)) in ser.points.iter().enumerate() {
            let (Some(cx), Some(cy)) = (px(x), py(y)) else { continue };
            if let Some(&e) = ser.err.get(i) {
                let lo = if plot.log_y && y - e <= 0.0 { None } else { py(y - e) };
                let y1 = lo.unwrap_or(TOP + ph);
                if let Some(y2) = py(y + e) {
                    let _ = writeln!(
                        s,
                        r#"<line x1="{cx:.1}" y1="{y1:.1}" x2="{cx:.1}" y2="{y2:.1}" stroke="{color}"/>"#
                    );
                }
            }
            let _ = writeln!(s, r#"<circle cx="{cx:.1}" cy="{cy:.1}" r="3" fill="{color}"/>"#);
        }
        let ly = TOP + 14.0 + 16.0 * k as f64;
        let _ = writeln!(
            s,
            r#"<rect x="{:.1}" y="{:.1}" width="10" height="10" fill="{color}"/><text x="{:.1}" y="{ly:.1}">{}</text>"#,
            LEFT + pw + 10.0,
            ly - 9.0,
            LEFT + pw + 24.0,
            esc(&ser.name)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn phase_color(label: &str) -> &'static str {
    match label {
        "L2_subcritical" => "#4c9be8",
        "subcritical_non_L2" => "#8fd18f",
        "phase_II_glassy" => "#f0a35e",
        "phase_III" => "#c792ea",
        _ => "#333333",
    }
}

/// Phase map from scan rows ordered by alpha, then beta; runs of equal labels share one rect.
pub fn phase_diagram(rows: &[(f64, f64, String)], n: usize, lo: f64, hi: f64) -> String {
    let side = H - TOP - BOTTOM;
    let cell = side / n as f64;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="14">phase diagram</text>"#,
        LEFT + side / 2.0
    );
    for (i, col) in rows.chunks(n).enumerate() {
        let x = LEFT + i as f64 * cell;
        let mut j = 0;
        while j < col.len() {
            let mut k = j;
            while k + 1 < col.len() && col[k + 1].2 == col[j].2 {
                k += 1;
            }
            // beta grows upwards
            let y = TOP + side - (k + 1) as f64 * cell;
            let _ = writeln!(
                s,
                r#"<rect x="{x:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                cell + 0.05,
                (k - j + 1) as f64 * cell + 0.05,
                phase_color(&col[j].2)
            );
            j = k + 1;
        }
    }
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{side}" height="{side}" fill="none" stroke="black"/>"#
    );
    for t in 0..=4 {
        let f = t as f64 / 4.0;
        let v = tick_label(lo + (hi - lo) * f);
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{v}</text><text x="{:.1}" y="{:.1}" text-anchor="end">{v}</text>"#,
            LEFT + f * side,
            TOP + side + 16.0,
            LEFT - 6.0,
            TOP + (1.0 - f) * side + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">alpha</text><text x="22" y="{:.1}" text-anchor="middle">beta</text>"#,
        LEFT + side / 2.0,
        H - 15.0,
        TOP + side / 2.0
    );
    let legend = [
        "L2_subcritical",
        "subcritical_non_L2",
        "phase_II_glassy",
        "phase_III",
        "boundary",
    ];
    for (k, label) in legend.iter().enumerate() {
        let y = TOP + 10.0 + 18.0 * k as f64;
        let _ = writeln!(
            s,
            r#"<rect x="{:.1}" y="{y:.1}" width="12" height="12" fill="{}"/><text x="{:.1}" y="{:.1}">{label}</text>"#,
            LEFT + side + 20.0,
            phase_color(label),
            LEFT + side + 38.0,
            y + 10.0
        );
    }
    s.push_str("</svg>\n");
    s
}
