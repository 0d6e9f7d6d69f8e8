//! Three-panel SVG figure: B against t, B against H, and absolute error
//! against t (or the excitation when there are no predictions).

use std::fmt::Write as _;

use super::csv::SampleCurve;
use crate::datagen::HysteresisDataset;
use crate::error::{Error, Result};

const PANEL_W: f64 = 360.0;
const PANEL_H: f64 = 280.0;
const MARGIN: f64 = 56.0;
const WIDTH: f64 = 3.0 * (PANEL_W + MARGIN) + MARGIN;
const HEIGHT: f64 = PANEL_H + 2.0 * MARGIN;
pub const TARGET_COLOR: &str = "#000000";
pub const PREDICTION_COLOR: &str = "#d62728";
pub const AUX_COLOR: &str = "#1f77b4";

/// Curves for rows `indices` of a dataset, without predictions.
pub fn dataset_curves(ds: &HysteresisDataset, indices: &[usize]) -> Result<Vec<SampleCurve>> {
    indices
        .iter()
        .map(|&i| {
            if i >= ds.n_samples() {
                return Err(Error::Param(format!("sample {i} out of range 0..{}", ds.n_samples())));
            }
            Ok(SampleCurve {
                sample: i,
                t: ds.t.clone(),
                h: ds.h_row(i).to_vec(),
                target: ds.b_row(i).to_vec(),
                prediction: None,
            })
        })
        .collect()
}

struct Series<'a> {
    x: &'a [f64],
    y: Vec<f64>,
    color: &'static str,
    dashed: bool,
}

fn bounds(series: &[Series<'_>]) -> ((f64, f64), (f64, f64)) {
    let span = |it: &mut dyn Iterator<Item = f64>| {
        let (lo, hi) = it.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        if hi > lo {
            (lo, hi)
        } else {
            (lo - 0.5, hi + 0.5)
        }
    };
    (
        span(&mut series.iter().flat_map(|s| s.x.iter().copied())),
        span(&mut series.iter().flat_map(|s| s.y.iter().copied())),
    )
}

fn panel(out: &mut String, index: usize, title: &str, xlabel: &str, ylabel: &str, series: &[Series<'_>]) {
    let x0 = MARGIN + index as f64 * (PANEL_W + MARGIN);
    let y0 = MARGIN;
    let ((xl, xh), (yl, yh)) = bounds(series);
    let px = |x: f64| x0 + (x - xl) / (xh - xl) * PANEL_W;
    let py = |y: f64| y0 + PANEL_H - (y - yl) / (yh - yl) * PANEL_H;
    let _ = writeln!(
        out,
        r##"<rect x="{x0:.2}" y="{y0:.2}" width="{PANEL_W:.2}" height="{PANEL_H:.2}" fill="none" stroke="#444444"/>"#
    );
    let _ = writeln!(
        out,
        r##"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="14">{title}</text>"##,
        x0 + PANEL_W / 2.0,
        y0 - 12.0
    );
    let _ = writeln!(
        out,
        r##"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="12">{xlabel}</text>"##,
        x0 + PANEL_W / 2.0,
        y0 + PANEL_H + 36.0
    );
    let _ = writeln!(
        out,
        r##"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="12" transform="rotate(-90 {:.2} {:.2})">{ylabel}</text>"##,
        x0 - 40.0,
        y0 + PANEL_H / 2.0,
        x0 - 40.0,
        y0 + PANEL_H / 2.0
    );
    for (v, x, anchor) in [(xl, x0, "start"), (xh, x0 + PANEL_W, "end")] {
        let _ = writeln!(
            out,
            r##"<text x="{x:.2}" y="{:.2}" text-anchor="{anchor}" font-size="10">{v:.4}</text>"##,
            y0 + PANEL_H + 16.0
        );
    }
    for (v, y) in [(yl, y0 + PANEL_H), (yh, y0 + 10.0)] {
        let _ = writeln!(
            out,
            r##"<text x="{:.2}" y="{y:.2}" text-anchor="end" font-size="10">{v:.4}</text>"##,
            x0 - 4.0
        );
    }
    for s in series {
        let mut pts = String::new();
        for (&x, &y) in s.x.iter().zip(&s.y) {
            let _ = write!(pts, "{:.2},{:.2} ", px(x), py(y));
        }
        let dash = if s.dashed { r##" stroke-dasharray="6 3""## } else { "" };
        let _ = writeln!(
            out,
            r##"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.5"{dash}/>"##,
            pts.trim_end(),
            s.color
        );
    }
}

/// Render `curves` as a standalone SVG document. The output depends only
/// on the input values.
pub fn render(curves: &[SampleCurve]) -> Result<String> {
    if curves.is_empty() || curves.iter().any(|c| c.t.is_empty()) {
        return Err(Error::Format("nothing to plot: no samples".into()));
    }
    for c in curves {
        let n = c.t.len();
        if c.h.len() != n || c.target.len() != n || c.prediction.as_ref().is_some_and(|p| p.len() != n) {
            return Err(Error::Shape(format!("sample {}: series lengths differ", c.sample)));
        }
    }
    let with_pred = curves.iter().all(|c| c.prediction.is_some());

    let mut over_t = Vec::new();
    let mut loops = Vec::new();
    let mut third = Vec::new();
    for c in curves {
        over_t.push(Series {
            x: &c.t,
            y: c.target.clone(),
            color: TARGET_COLOR,
            dashed: false,
        });
        loops.push(Series {
            x: &c.h,
            y: c.target.clone(),
            color: TARGET_COLOR,
            dashed: false,
        });
        match (&c.prediction, with_pred) {
            (Some(p), true) => {
                over_t.push(Series {
                    x: &c.t,
                    y: p.clone(),
                    color: PREDICTION_COLOR,
                    dashed: true,
                });
                loops.push(Series {
                    x: &c.h,
                    y: p.clone(),
                    color: PREDICTION_COLOR,
                    dashed: true,
                });
                third.push(Series {
                    x: &c.t,
                    y: p.iter().zip(&c.target).map(|(a, b)| (a - b).abs()).collect(),
                    color: PREDICTION_COLOR,
                    dashed: false,
                });
            }
            _ => third.push(Series {
                x: &c.t,
                y: c.h.clone(),
                color: AUX_COLOR,
                dashed: false,
            }),
        }
    }

    let mut out = String::new();
    let _ = writeln!(
        out,
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH:.0}" height="{HEIGHT:.0}" viewBox="0 0 {WIDTH:.0} {HEIGHT:.0}">"#
    );
    let _ = writeln!(out, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##);
    panel(&mut out, 0, "B over time", "t", "B", &over_t);
    panel(&mut out, 1, "B-H loop", "H", "B", &loops);
    if with_pred {
        panel(&mut out, 2, "Absolute error", "t", "|B - B_ref|", &third);
    } else {
        panel(&mut out, 2, "Excitation", "t", "H", &third);
    }
    out.push_str("</svg>\n");
    Ok(out)
}
