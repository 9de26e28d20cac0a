//! Static SVG of predicted vs reference curves: the whole domain and a zoom
//! on the boundary layer `[x0, 2 x_j]`.

use std::fmt::Write as _;
use std::io::{Read, Write};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PlotError {
    #[error("no curves to plot")]
    MissingCurves,
    #[error("malformed curves file: {0}")]
    Malformed(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Reference and predicted values on a common abscissa.
#[derive(Debug, Clone, PartialEq)]
pub struct Curves {
    pub x: Vec<f64>,
    pub truth: Vec<f64>,
    pub prediction: Vec<f64>,
}

impl Curves {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), PlotError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "truth", "prediction"])?;
        for i in 0..self.x.len() {
            w.write_record([self.x[i], self.truth[i], self.prediction[i]].map(|v| format!("{v:.16e}")))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self, PlotError> {
        let mut c = Curves { x: Vec::new(), truth: Vec::new(), prediction: Vec::new() };
        for rec in csv::Reader::from_reader(input).records() {
            let rec = rec?;
            let num = |i: usize| -> Result<f64, PlotError> {
                rec.get(i)
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| PlotError::Malformed(format!("bad field {i} in {rec:?}")))
            };
            c.x.push(num(0)?);
            c.truth.push(num(1)?);
            c.prediction.push(num(2)?);
        }
        if c.x.is_empty() {
            return Err(PlotError::MissingCurves);
        }
        Ok(c)
    }
}

const PANEL_W: f64 = 420.0;
const PANEL_H: f64 = 300.0;
const MARGIN: f64 = 50.0;

struct Panel<'a> {
    title: &'a str,
    x_range: (f64, f64),
    left: f64,
}

fn polyline(out: &mut String, xs: &[f64], ys: &[f64], panel: &Panel, y_range: (f64, f64), class: &str, color: &str) {
    let (x0, x1) = panel.x_range;
    let (y0, y1) = y_range;
    let sx = |x: f64| panel.left + MARGIN + (x - x0) / (x1 - x0) * (PANEL_W - 2.0 * MARGIN);
    let sy = |y: f64| PANEL_H - MARGIN - (y - y0) / (y1 - y0) * (PANEL_H - 2.0 * MARGIN);
    let _ = write!(out, r#"<polyline class="{class}" fill="none" stroke="{color}" stroke-width="1.5" points=""#);
    for (&x, &y) in xs.iter().zip(ys) {
        if x >= x0 && x <= x1 {
            let _ = write!(out, "{:.2},{:.2} ", sx(x), sy(y));
        }
    }
    out.push_str("\"/>\n");
}

fn panel(out: &mut String, c: &Curves, p: &Panel) {
    let visible = |v: &[f64]| -> Vec<f64> {
        c.x.iter().zip(v).filter(|(x, _)| **x >= p.x_range.0 && **x <= p.x_range.1).map(|(_, y)| *y).collect()
    };
    let ys: Vec<f64> = visible(&c.truth).into_iter().chain(visible(&c.prediction)).filter(|v| v.is_finite()).collect();
    let lo = ys.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let pad = ((hi - lo) * 0.05).max(1e-9);
    let y_range = if lo.is_finite() { (lo - pad, hi + pad) } else { (0.0, 1.0) };

    let _ = writeln!(
        out,
        r#"<g class="panel"><rect x="{:.1}" y="{MARGIN}" width="{:.1}" height="{:.1}" fill="none" stroke="black"/>"#,
        p.left + MARGIN,
        PANEL_W - 2.0 * MARGIN,
        PANEL_H - 2.0 * MARGIN
    );
    let _ = writeln!(out, r#"<text x="{:.1}" y="30" text-anchor="middle">{}</text>"#, p.left + PANEL_W / 2.0, p.title);
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" font-size="11">x: [{:.4}, {:.4}]  u: [{:.4}, {:.4}]</text>"#,
        p.left + MARGIN,
        PANEL_H - 20.0,
        p.x_range.0,
        p.x_range.1,
        y_range.0,
        y_range.1
    );
    polyline(out, &c.x, &c.truth, p, y_range, "curve truth", "black");
    polyline(out, &c.x, &c.prediction, p, y_range, "curve prediction", "crimson");
    out.push_str("</g>\n");
}

/// Two panels side by side: `[x_min, x_max]` and the zoom `[x_min, 2 junction]`.
pub fn render_svg(curves: &Curves, junction: f64) -> Result<String, PlotError> {
    if curves.x.is_empty() || curves.truth.len() != curves.x.len() || curves.prediction.len() != curves.x.len() {
        return Err(PlotError::MissingCurves);
    }
    let x_min = curves.x.iter().copied().fold(f64::INFINITY, f64::min);
    let x_max = curves.x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{:.0}" height="{PANEL_H:.0}" font-family="sans-serif">"#,
        2.0 * PANEL_W
    );
    panel(&mut out, curves, &Panel { title: "solution", x_range: (x_min, x_max), left: 0.0 });
    panel(&mut out, curves, &Panel { title: "boundary layer", x_range: (0.0, 2.0 * junction), left: PANEL_W });
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" font-size="11">black: reference, red: prediction</text>"#,
        MARGIN,
        PANEL_H - 5.0
    );
    out.push_str("</svg>\n");
    Ok(out)
}
