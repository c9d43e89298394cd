//! Deterministic SVG rendering of a spectral portrait.

use std::fmt::Write;

use crate::spectral::{EigenClass, SpectralPortrait};

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const PAD: f64 = 40.0;

/// Plot rectangle in the complex plane.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Viewport {
    pub re: [f64; 2],
    pub im: [f64; 2],
}

impl Viewport {
    /// Thresholds and eigenvalues padded by 0.5 in `Re`; `Im` symmetric with
    /// half-height `1.1 · max(1, max |Im μ|)`.
    pub fn fit(p: &SpectralPortrait) -> Self {
        let mut lo = 0.0f64;
        let mut hi = 1.0f64;
        let mut h = 1.0f64;
        for &v in &p.nu {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        for e in &p.eigs {
            lo = lo.min(e.mu.re);
            hi = hi.max(e.mu.re);
            h = h.max(e.mu.im.abs());
        }
        Viewport { re: [lo - 0.5, hi + 0.5], im: [-1.1 * h, 1.1 * h] }
    }

    fn x(&self, re: f64) -> f64 {
        PAD + (re - self.re[0]) / (self.re[1] - self.re[0]) * (WIDTH - 2.0 * PAD)
    }

    fn y(&self, im: f64) -> f64 {
        HEIGHT - PAD - (im - self.im[0]) / (self.im[1] - self.im[0]) * (HEIGHT - 2.0 * PAD)
    }

    fn contains(&self, re: f64, im: f64) -> bool {
        (self.re[0]..=self.re[1]).contains(&re) && (self.im[0]..=self.im[1]).contains(&im)
    }
}

fn color(c: EigenClass) -> &'static str {
    match c {
        EigenClass::RayArtifact => "#888888",
        EigenClass::DiscreteCandidate => "#d62728",
        EigenClass::ThresholdAdjacent => "#ff7f0e",
    }
}

pub fn portrait_svg(p: &SpectralPortrait) -> String {
    let v = Viewport::fit(p);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(
        s,
        "<!-- viewport: Re [{:.6}, {:.6}] -> x [{PAD}, {}]; Im [{:.6}, {:.6}] -> y [{}, {PAD}]; lambda = {:.6}{:+.6}i -->",
        v.re[0],
        v.re[1],
        WIDTH - PAD,
        v.im[0],
        v.im[1],
        HEIGHT - PAD,
        p.lambda.re,
        p.lambda.im
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    // axes
    if v.contains(v.re[0], 0.0) {
        let y0 = v.y(0.0);
        let _ = writeln!(
            s,
            r##"<line x1="{PAD}" y1="{y0:.2}" x2="{:.2}" y2="{y0:.2}" stroke="#cccccc" stroke-width="1"/>"##,
            WIDTH - PAD
        );
    }
    if v.re[0] <= 0.0 && v.re[1] >= 0.0 {
        let x0 = v.x(0.0);
        let _ = writeln!(
            s,
            r##"<line x1="{x0:.2}" y1="{PAD}" x2="{x0:.2}" y2="{:.2}" stroke="#cccccc" stroke-width="1"/>"##,
            HEIGHT - PAD
        );
    }
    for r in &p.rays {
        // clip the ray to the viewport by stepping its parameter to the edge
        let d = r.direction();
        let mut t = f64::INFINITY;
        if d.re > 0.0 {
            t = t.min((v.re[1] - r.origin) / d.re);
        }
        if d.im > 0.0 {
            t = t.min(v.im[1] / d.im);
        } else if d.im < 0.0 {
            t = t.min(v.im[0] / d.im);
        }
        if !t.is_finite() || t <= 0.0 {
            continue;
        }
        let end = r.origin + d * t;
        let _ = writeln!(
            s,
            r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#1f77b4" stroke-width="1.5"/>"##,
            v.x(r.origin),
            v.y(0.0),
            v.x(end.re),
            v.y(end.im)
        );
    }
    for &nu in &p.nu {
        let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="4" fill="black"/>"#, v.x(nu), v.y(0.0));
    }
    for e in &p.eigs {
        let (cx, cy) = (v.x(e.mu.re), v.y(e.mu.im));
        let c = color(e.class);
        let _ = writeln!(
            s,
            r#"<path d="M{:.2} {:.2}L{:.2} {:.2}M{:.2} {:.2}L{:.2} {:.2}" stroke="{c}" stroke-width="1.5"/>"#,
            cx - 3.0,
            cy - 3.0,
            cx + 3.0,
            cy + 3.0,
            cx - 3.0,
            cy + 3.0,
            cx + 3.0,
            cy - 3.0
        );
    }
    s.push_str("</svg>\n");
    s
}
