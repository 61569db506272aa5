//! Deterministic SVG renderings of a finished run: the weighted total error
//! over time, the raw coordinates over time, and (in dimension three) the
//! planar projection of each path.
//!
//! Everything is hand-assembled text so that identical inputs produce
//! byte-identical files.

use std::fmt::Write as _;

use lohe_sync::dynamics::StateMatrix;
use lohe_sync::{Error, Result};

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 600.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 780.0;
const TOP: f64 = 20.0;
const BOTTOM: f64 = 550.0;
/// Polylines longer than this are thinned before rendering.
const MAX_POINTS: usize = 1000;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

fn stride_for(len: usize) -> usize {
    len.div_ceil(MAX_POINTS).max(1)
}

/// Indices kept when thinning a series of length `len`: every `stride`-th
/// sample plus the final one.
fn kept_indices(len: usize) -> Vec<usize> {
    let stride = stride_for(len);
    let mut idx: Vec<usize> = (0..len).step_by(stride).collect();
    if *idx.last().unwrap() != len - 1 {
        idx.push(len - 1);
    }
    idx
}

fn span(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if lo == hi {
        lo -= 0.5;
        hi += 0.5;
    }
    (lo, hi)
}

fn x_pix(v: f64, lo: f64, hi: f64) -> f64 {
    LEFT + (v - lo) / (hi - lo) * (RIGHT - LEFT)
}

fn y_pix(v: f64, lo: f64, hi: f64) -> f64 {
    BOTTOM - (v - lo) / (hi - lo) * (BOTTOM - TOP)
}

fn open_svg(title: &str) -> String {
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n\
         <rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"#ffffff\"/>\n"
    );
    let _ = writeln!(
        s,
        "<text x=\"{:.3}\" y=\"14\" font-family=\"monospace\" font-size=\"13\" \
         text-anchor=\"middle\">{title}</text>",
        (LEFT + RIGHT) / 2.0
    );
    s
}

fn frame() -> String {
    format!(
        "<rect x=\"{LEFT}\" y=\"{TOP}\" width=\"{:.3}\" height=\"{:.3}\" fill=\"none\" \
         stroke=\"#333333\" stroke-width=\"1\"/>\n",
        RIGHT - LEFT,
        BOTTOM - TOP
    )
}

fn axis_labels(out: &mut String, xlabel: &str, ylabel: &str) {
    let _ = writeln!(
        out,
        "<text x=\"{:.3}\" y=\"{:.3}\" font-family=\"monospace\" font-size=\"12\" \
         text-anchor=\"middle\">{xlabel}</text>",
        (LEFT + RIGHT) / 2.0,
        HEIGHT - 12.0
    );
    let _ = writeln!(
        out,
        "<text x=\"16\" y=\"{:.3}\" font-family=\"monospace\" font-size=\"12\" \
         text-anchor=\"middle\" transform=\"rotate(-90 16 {:.3})\">{ylabel}</text>",
        (TOP + BOTTOM) / 2.0,
        (TOP + BOTTOM) / 2.0
    );
}

fn ticks(
    out: &mut String,
    xlo: f64,
    xhi: f64,
    ylo: f64,
    yhi: f64,
    fmt_x: impl Fn(f64) -> String,
    fmt_y: impl Fn(f64) -> String,
) {
    const N: usize = 5;
    for i in 0..=N {
        let f = i as f64 / N as f64;
        let xv = xlo + f * (xhi - xlo);
        let xp = x_pix(xv, xlo, xhi);
        let _ = writeln!(
            out,
            "<line x1=\"{xp:.3}\" y1=\"{BOTTOM}\" x2=\"{xp:.3}\" y2=\"{:.3}\" \
             stroke=\"#333333\" stroke-width=\"1\"/>",
            BOTTOM + 5.0
        );
        let _ = writeln!(
            out,
            "<text x=\"{xp:.3}\" y=\"{:.3}\" font-family=\"monospace\" font-size=\"10\" \
             text-anchor=\"middle\">{}</text>",
            BOTTOM + 18.0,
            fmt_x(xv)
        );
        let yv = ylo + f * (yhi - ylo);
        let yp = y_pix(yv, ylo, yhi);
        let _ = writeln!(
            out,
            "<line x1=\"{:.3}\" y1=\"{yp:.3}\" x2=\"{LEFT}\" y2=\"{yp:.3}\" \
             stroke=\"#333333\" stroke-width=\"1\"/>",
            LEFT - 5.0
        );
        let _ = writeln!(
            out,
            "<text x=\"{:.3}\" y=\"{:.3}\" font-family=\"monospace\" font-size=\"10\" \
             text-anchor=\"end\">{}</text>",
            LEFT - 8.0,
            yp + 3.0,
            fmt_y(yv)
        );
    }
}

fn polyline(out: &mut String, points: &[(f64, f64)], color: &str) {
    let _ = write!(
        out,
        "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\""
    );
    for (i, (x, y)) in points.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        let _ = write!(out, "{x:.3},{y:.3}");
    }
    out.push_str("\"/>\n");
}

fn need_two(len: usize) -> Result<()> {
    if len < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 samples to plot, got {len}"
        )));
    }
    Ok(())
}

/// The weighted total error `v(t)`, drawn on a log10 ordinate when every
/// sample is positive and linearly (with a notice) otherwise.
pub fn total_error_svg(times: &[f64], values: &[f64]) -> Result<String> {
    need_two(times.len())?;
    let log_scale = values.iter().all(|&v| v > 0.0);
    let series: Vec<f64> = if log_scale {
        values.iter().map(|v| v.log10()).collect()
    } else {
        values.to_vec()
    };
    let (xlo, xhi) = span(times.iter().copied());
    let (ylo, yhi) = span(series.iter().copied());
    let mut out = open_svg("weighted total error");
    out.push_str(&frame());
    ticks(
        &mut out,
        xlo,
        xhi,
        ylo,
        yhi,
        |v| format!("{v:.3}"),
        |v| format!("{v:.3}"),
    );
    axis_labels(&mut out, "t", if log_scale { "log10 v" } else { "v" });
    if !log_scale {
        let _ = writeln!(
            out,
            "<text x=\"{:.3}\" y=\"40\" font-family=\"monospace\" font-size=\"11\" \
             fill=\"#aa3333\" text-anchor=\"middle\">linear scale: total error reaches \
             zero</text>",
            (LEFT + RIGHT) / 2.0
        );
    }
    let pts: Vec<(f64, f64)> = kept_indices(times.len())
        .into_iter()
        .map(|s| (x_pix(times[s], xlo, xhi), y_pix(series[s], ylo, yhi)))
        .collect();
    polyline(&mut out, &pts, PALETTE[0]);
    out.push_str("</svg>\n");
    Ok(out)
}

/// Every coordinate of every oscillator against time; unit rows keep the
/// ordinate inside `[-1, 1]`, so the range is fixed.
pub fn coordinates_svg(times: &[f64], states: &[StateMatrix]) -> Result<String> {
    need_two(times.len())?;
    if times.len() != states.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} times but {} states",
            times.len(),
            states.len()
        )));
    }
    let (m, n) = (states[0].m(), states[0].n());
    let (xlo, xhi) = span(times.iter().copied());
    let (ylo, yhi) = (-1.05, 1.05);
    let mut out = open_svg("state coordinates");
    out.push_str(&frame());
    ticks(
        &mut out,
        xlo,
        xhi,
        ylo,
        yhi,
        |v| format!("{v:.3}"),
        |v| format!("{v:.2}"),
    );
    axis_labels(&mut out, "t", "coordinate");
    let kept = kept_indices(times.len());
    for i in 0..m {
        for d in 0..n {
            let color = PALETTE[(i * n + d) % PALETTE.len()];
            let pts: Vec<(f64, f64)> = kept
                .iter()
                .map(|&s| {
                    (
                        x_pix(times[s], xlo, xhi),
                        y_pix(states[s].matrix()[(i, d)], ylo, yhi),
                    )
                })
                .collect();
            polyline(&mut out, &pts, color);
        }
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// For three-dimensional states: each oscillator's first two coordinates,
/// traced over time inside the projected unit circle, with a dot at the final
/// position.
pub fn projection_svg(states: &[StateMatrix]) -> Result<String> {
    need_two(states.len())?;
    if states[0].n() != 3 {
        return Err(Error::Validation(format!(
            "projection plot requires dimension 3, got {}",
            states[0].n()
        )));
    }
    let m = states[0].m();
    let (cx, cy, r) = (400.0, 300.0, 260.0);
    let to_px = |u: f64, v: f64| (cx + u * r, cy - v * r);
    let mut out = open_svg("projection onto the first two coordinates");
    let _ = writeln!(
        out,
        "<circle cx=\"{cx}\" cy=\"{cy}\" r=\"{r}\" fill=\"none\" stroke=\"#999999\" \
         stroke-width=\"1\" stroke-dasharray=\"4 4\"/>"
    );
    let kept = kept_indices(states.len());
    for i in 0..m {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<(f64, f64)> = kept
            .iter()
            .map(|&s| to_px(states[s].matrix()[(i, 0)], states[s].matrix()[(i, 1)]))
            .collect();
        polyline(&mut out, &pts, color);
        let (fx, fy) = *pts.last().unwrap();
        let _ = writeln!(
            out,
            "<circle cx=\"{fx:.3}\" cy=\"{fy:.3}\" r=\"4\" fill=\"{color}\"/>"
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}
