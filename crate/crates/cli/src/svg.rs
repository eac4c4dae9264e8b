//! Minimal log-y line plot.

use std::fmt::Write as _;

pub struct Series {
    pub label: String,
    /// `(snr, ber)`; points with zero BER are dropped.
    pub points: Vec<(f64, f64)>,
}

const W: f64 = 640.0;
const H: f64 = 420.0;
const ML: f64 = 64.0;
const MR: f64 = 170.0;
const MT: f64 = 20.0;
const MB: f64 = 48.0;
const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

pub fn ber_plot(series: &[Series]) -> String {
    let pts = || series.iter().flat_map(|s| s.points.iter()).filter(|p| p.1 > 0.0 && p.0.is_finite());
    let (mut x0, mut x1) = pts().fold((f64::MAX, f64::MIN), |(a, b), p| (a.min(p.0), b.max(p.0)));
    let lo = pts().map(|p| p.1.log10().floor()).fold(0.0, f64::min).min(-1.0);
    if x0 > x1 {
        (x0, x1) = (0.0, 1.0);
    }
    if x0 == x1 {
        x1 = x0 + 1.0;
    }
    let (pw, ph) = (W - ML - MR, H - MT - MB);
    let sx = |x: f64| ML + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| MT + (y.log10() / lo) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let mut dec = 0.0;
    while dec >= lo {
        let y = MT + dec / lo * ph;
        let _ = writeln!(
            s,
            r##"<line x1="{ML}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#ddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">1e{dec}</text>"##,
            ML + pw,
            ML - 6.0,
            y + 4.0
        );
        dec -= 1.0;
    }
    for i in 0..=4 {
        let x = x0 + (x1 - x0) * i as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{x:.1}</text>"#,
            sx(x),
            MT + ph + 16.0
        );
    }
    let _ = writeln!(
        s,
        r#"<rect x="{ML}" y="{MT}" width="{pw}" height="{ph}" fill="none" stroke="black"/><text x="{:.1}" y="{:.1}" text-anchor="middle">SNR [dB]</text><text x="14" y="{:.1}" transform="rotate(-90 14 {:.1})" text-anchor="middle">BER</text>"#,
        ML + pw / 2.0,
        H - 10.0,
        MT + ph / 2.0,
        MT + ph / 2.0
    );
    for (i, se) in series.iter().enumerate() {
        let c = COLORS[i % COLORS.len()];
        let path: Vec<String> = se
            .points
            .iter()
            .filter(|p| p.1 > 0.0 && p.0.is_finite())
            .map(|&(x, y)| format!("{:.1},{:.1}", sx(x), sy(y)))
            .collect();
        if !path.is_empty() {
            let _ = writeln!(s, r#"<polyline fill="none" stroke="{c}" stroke-width="1.5" points="{}"/>"#, path.join(" "));
        }
        let ly = MT + 14.0 * (i as f64 + 1.0);
        let _ = writeln!(
            s,
            r#"<line x1="{:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{c}" stroke-width="2"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            W - MR + 10.0,
            W - MR + 30.0,
            W - MR + 34.0,
            ly + 4.0,
            se.label
        );
    }
    s.push_str("</svg>\n");
    s
}
