//! Gap and force plots. Output depends only on the inputs: fixed viewBox,
//! fixed number formatting, elements in particle order.

use std::fmt::Write;

use equilib::{CircleConfig, Configuration, LineConfig, ResidualReport};

const ARROW_HEAD: &str = r##"<defs><marker id="head" viewBox="0 0 10 10" refX="10" refY="5" markerWidth="6" markerHeight="6" orient="auto-start-reverse"><path d="M 0 0 L 10 5 L 0 10 z" fill="#c0392b"/></marker></defs>"##;

/// Net forces and the arrow scale. Lengths are relative to the largest
/// side force, so balanced particles get zero-length arrows.
fn forces(report: Option<&ResidualReport>, n: usize, max_len: f64) -> (Vec<f64>, f64) {
    match report {
        Some(r) if r.particles.len() == n => {
            let net = r.particles.iter().map(|p| p.net).collect();
            let m = r.particles.iter().fold(0.0f64, |a, p| a.max(p.f_minus).max(p.f_plus));
            (net, if m > 0.0 { max_len / m } else { 0.0 })
        }
        _ => (vec![0.0; n], 0.0),
    }
}

fn arrow(out: &mut String, x: f64, y: f64, dx: f64, dy: f64) {
    let head = if dx != 0.0 || dy != 0.0 { r#" marker-end="url(#head)""# } else { "" };
    let _ = writeln!(
        out,
        r##"<line class="force" x1="{x:.2}" y1="{y:.2}" x2="{:.2}" y2="{:.2}" stroke="#c0392b" stroke-width="2"{head}/>"##,
        x + dx,
        y + dy
    );
}

fn line_plot(c: &LineConfig, report: Option<&ResidualReport>) -> String {
    let (w, h, margin) = (800.0, 200.0, 40.0);
    let x = &c.window;
    let (lo, hi) = (x[0], x[x.len() - 1]);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let px = |v: f64| margin + (v - lo) / span * (w - 2.0 * margin);
    let base = 100.0;
    let (net, k) = forces(report, x.len(), 60.0);

    let mut out = String::new();
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {w} {h}" width="{w}" height="{h}">"#);
    let _ = writeln!(out, "{ARROW_HEAD}");
    let _ = writeln!(
        out,
        r##"<line class="axis" x1="{:.2}" y1="{base}" x2="{:.2}" y2="{base}" stroke="#999" stroke-width="1"/>"##,
        margin / 2.0,
        w - margin / 2.0
    );
    for p in x.windows(2) {
        let _ = writeln!(
            out,
            r#"<text class="gap" x="{:.2}" y="{:.2}" font-size="10" text-anchor="middle">{:.3}</text>"#,
            0.5 * (px(p[0]) + px(p[1])),
            base - 20.0,
            p[1] - p[0]
        );
    }
    for (i, &v) in x.iter().enumerate() {
        let _ = writeln!(out, r#"<circle class="particle" cx="{:.2}" cy="{base}" r="4" fill="black"/>"#, px(v));
        arrow(&mut out, px(v), base + 20.0, net[i] * k, 0.0);
    }
    out.push_str("</svg>\n");
    out
}

fn circle_plot(c: &CircleConfig, report: Option<&ResidualReport>) -> String {
    let (size, r) = (400.0, 150.0);
    let center = size / 2.0;
    let at = |t: f64, rad: f64| (center + rad * t.cos(), center - rad * t.sin());
    let (net, k) = forces(report, c.len(), 40.0);

    let mut out = String::new();
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {size} {size}" width="{size}" height="{size}">"#);
    let _ = writeln!(out, "{ARROW_HEAD}");
    let _ = writeln!(
        out,
        r##"<circle class="track" cx="{center}" cy="{center}" r="{r}" fill="none" stroke="#999" stroke-width="1"/>"##
    );
    let gaps = c.gaps();
    for (i, &t) in c.angles.iter().enumerate() {
        let (lx, ly) = at(t + 0.5 * gaps[i], r + 18.0);
        let _ = writeln!(
            out,
            r#"<text class="gap" x="{lx:.2}" y="{ly:.2}" font-size="10" text-anchor="middle">{:.3}</text>"#,
            gaps[i]
        );
    }
    for (i, &t) in c.angles.iter().enumerate() {
        let (x, y) = at(t, r);
        let _ = writeln!(out, r#"<circle class="particle" cx="{x:.2}" cy="{y:.2}" r="4" fill="black"/>"#);
        // counterclockwise tangent, screen y pointing down
        let len = net[i] * k;
        arrow(&mut out, x, y, -len * t.sin(), -len * t.cos());
    }
    out.push_str("</svg>\n");
    out
}

/// Particles as dots with gap labels and net-force arrows scaled so the
/// largest has a fixed length.
pub fn render_gap_plot(config: &Configuration, report: Option<&ResidualReport>) -> String {
    match config {
        Configuration::Line(c) => line_plot(c, report),
        Configuration::Circle(c) => circle_plot(c, report),
    }
}
