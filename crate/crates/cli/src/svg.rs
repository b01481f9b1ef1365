//! Polar plot of a planar sigma table, written as plain SVG.

use std::f64::consts::PI;
use std::fmt::Write;

use sigmacell::SigmaTable;

const SIZE: f64 = 560.0;
const RADIUS: f64 = 230.0;
const STEPS: usize = 16;

fn angle(v: &[f64]) -> f64 {
    v[1].atan2(v[0]).rem_euclid(2.0 * PI)
}

struct Sample {
    theta: f64,
    sigma: f64,
    err: f64,
}

/// Samples the angle-linear interpolant between neighbouring entries.
fn trace(table: &SigmaTable, closed: bool) -> Vec<Sample> {
    let e = table.entries();
    let k = e.len();
    let pairs = if closed { k } else { k - 1 };
    let mut out = Vec::new();
    for i in 0..pairs {
        let (a, b) = (&e[i], &e[(i + 1) % k]);
        let t0 = angle(&a.nu);
        let mut t1 = angle(&b.nu);
        if t1 <= t0 {
            t1 += 2.0 * PI;
        }
        for s in 0..STEPS {
            let w = s as f64 / STEPS as f64;
            out.push(Sample {
                theta: t0 + w * (t1 - t0),
                sigma: (1.0 - w) * a.sigma + w * b.sigma,
                err: (1.0 - w) * a.err + w * b.err,
            });
        }
    }
    if !closed {
        let last = &e[k - 1];
        out.push(Sample { theta: angle(&last.nu), sigma: last.sigma, err: last.err });
    }
    out
}

/// Whether the table reaches across the gap between its last and first entry.
fn wraps(table: &SigmaTable) -> bool {
    let e = table.entries();
    if e.len() < 3 {
        return false;
    }
    let t0 = angle(&e[e.len() - 1].nu);
    let mut t1 = angle(&e[0].nu);
    if t1 <= t0 {
        t1 += 2.0 * PI;
    }
    let mid = 0.5 * (t0 + t1);
    table.sigma_at(&[mid.cos(), mid.sin()]).is_ok()
}

struct Frame {
    scale: f64,
}

impl Frame {
    fn point(&self, theta: f64, r: f64) -> (f64, f64) {
        let c = SIZE / 2.0;
        (c + self.scale * r * theta.cos(), c - self.scale * r * theta.sin())
    }
}

fn path(frame: &Frame, pts: impl Iterator<Item = (f64, f64)>, close: bool) -> String {
    let mut d = String::new();
    for (i, (theta, r)) in pts.enumerate() {
        let (x, y) = frame.point(theta, r);
        let _ = write!(d, "{}{:.3},{:.3} ", if i == 0 { "M" } else { "L" }, x, y);
    }
    if close {
        d.push('Z');
    }
    d.trim_end().to_string()
}

/// Renders `sigma_hat(theta)` with its error band, per-entry error bars and
/// the unit circle.
pub fn polar_svg(table: &SigmaTable, title: &str) -> String {
    let closed = wraps(table);
    let samples = trace(table, closed);
    let rmax = table.entries().iter().map(|e| e.sigma + e.err).fold(1.0, f64::max);
    let frame = Frame { scale: RADIUS / (1.1 * rmax) };
    let c = SIZE / 2.0;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<title>{}</title>"#, escape(title));
    let ext = frame.scale * 1.1 * rmax;
    let _ = writeln!(
        s,
        r##"<g stroke="#bbbbbb" stroke-width="0.8"><line x1="{:.3}" y1="{c:.3}" x2="{:.3}" y2="{c:.3}"/><line x1="{c:.3}" y1="{:.3}" x2="{c:.3}" y2="{:.3}"/></g>"##,
        c - ext,
        c + ext,
        c - ext,
        c + ext
    );
    let _ = writeln!(
        s,
        r##"<circle cx="{c:.3}" cy="{c:.3}" r="{:.3}" fill="none" stroke="#888888" stroke-width="1" stroke-dasharray="4 3"/>"##,
        frame.scale
    );

    let outer = samples.iter().map(|p| (p.theta, p.sigma + p.err));
    let inner = samples.iter().map(|p| (p.theta, (p.sigma - p.err).max(0.0)));
    let band = if closed {
        format!("{} {}", path(&frame, outer, true), path(&frame, inner, true))
    } else {
        let back: Vec<(f64, f64)> = inner.collect::<Vec<_>>().into_iter().rev().collect();
        path(&frame, outer.chain(back), true)
    };
    let _ = writeln!(s, r##"<path d="{band}" fill="#4a7fb5" fill-opacity="0.25" fill-rule="evenodd" stroke="none"/>"##);
    let curve = path(&frame, samples.iter().map(|p| (p.theta, p.sigma)), closed);
    let _ = writeln!(s, r##"<path d="{curve}" fill="none" stroke="#1f4e79" stroke-width="1.6"/>"##);

    let _ = writeln!(s, r##"<g stroke="#b03a2e" stroke-width="1.2" fill="#b03a2e">"##);
    for e in table.entries() {
        let th = angle(&e.nu);
        let (x0, y0) = frame.point(th, (e.sigma - e.err).max(0.0));
        let (x1, y1) = frame.point(th, e.sigma + e.err);
        let (x, y) = frame.point(th, e.sigma);
        let _ = writeln!(s, r#"<line x1="{x0:.3}" y1="{y0:.3}" x2="{x1:.3}" y2="{y1:.3}"/><circle cx="{x:.3}" cy="{y:.3}" r="2.5"/>"#);
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(
        s,
        r##"<text x="12" y="22" font-family="sans-serif" font-size="14" fill="#222222">{}</text>"##,
        escape(title)
    );
    let _ = writeln!(
        s,
        r##"<text x="12" y="{:.0}" font-family="sans-serif" font-size="11" fill="#555555">dashed: unit circle; band: error bars; max radius {:.4}</text>"##,
        SIZE - 12.0,
        rmax
    );
    s.push_str("</svg>\n");
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
