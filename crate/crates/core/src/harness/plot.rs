//! Static SVG of the mean regret curves: log-log and linear panels.

use std::fmt::Write as _;
use std::path::Path;

use super::run::RegretCurve;
use crate::error::Result;

const PANEL_W: f64 = 420.0;
const PANEL_H: f64 = 300.0;
const MARGIN: f64 = 40.0;

fn polyline(points: &[(f64, f64)], x0: f64, colour: &str) -> String {
    if points.is_empty() {
        return String::new();
    }
    let (xmin, xmax) = points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| {
            (a.min(p.0), b.max(p.0))
        });
    let (ymin, ymax) = points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| {
            (a.min(p.1), b.max(p.1))
        });
    let sx = if xmax > xmin {
        (PANEL_W - 2.0 * MARGIN) / (xmax - xmin)
    } else {
        0.0
    };
    let sy = if ymax > ymin {
        (PANEL_H - 2.0 * MARGIN) / (ymax - ymin)
    } else {
        0.0
    };
    let mut out = String::new();
    for (x, y) in points {
        let px = x0 + MARGIN + (x - xmin) * sx;
        let py = PANEL_H - MARGIN - (y - ymin) * sy;
        let _ = write!(out, "{px:.2},{py:.2} ");
    }
    format!(
        "<polyline fill=\"none\" stroke=\"{colour}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
        out.trim_end()
    )
}

fn panel(x0: f64, title: &str) -> String {
    format!(
        "<rect x=\"{}\" y=\"{MARGIN}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#888\"/>\n\
         <text x=\"{}\" y=\"24\" font-family=\"sans-serif\" font-size=\"13\">{title}</text>\n",
        x0 + MARGIN,
        PANEL_W - 2.0 * MARGIN,
        PANEL_H - 2.0 * MARGIN,
        x0 + MARGIN,
    )
}

pub fn render_svg(curve: &RegretCurve) -> String {
    let scr = curve.mean_scr();
    let pref = curve.mean_pref();
    let linear = |c: &[f64]| {
        c.iter()
            .enumerate()
            .map(|(k, &r)| ((k + 1) as f64, r))
            .collect::<Vec<_>>()
    };
    let loglog = |c: &[f64]| {
        c.iter()
            .enumerate()
            .filter(|(_, &r)| r > 0.0)
            .map(|(k, &r)| (((k + 1) as f64).ln(), r.ln()))
            .collect::<Vec<_>>()
    };
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{PANEL_H}\">\n",
        2.0 * PANEL_W
    );
    svg += &panel(0.0, "log R_t vs log t (blue: score, red: preference)");
    svg += &polyline(&loglog(&scr), 0.0, "#1f5fbf");
    svg += &polyline(&loglog(&pref), 0.0, "#bf1f1f");
    svg += &panel(PANEL_W, "R_t vs t");
    svg += &polyline(&linear(&scr), PANEL_W, "#1f5fbf");
    svg += &polyline(&linear(&pref), PANEL_W, "#bf1f1f");
    svg += "</svg>\n";
    svg
}

pub fn write_svg(path: &Path, curve: &RegretCurve) -> Result<()> {
    std::fs::write(path, render_svg(curve))?;
    Ok(())
}
