//! CSV and SVG emitters.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use num_complex::Complex64;

/// CSV with a header row, LF line endings and floats written with 17
/// significant digits.
pub struct Table {
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Result<Self> {
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        writer.write_record(header)?;
        Ok(Table { writer })
    }

    pub fn row(&mut self, fields: &[String]) -> Result<()> {
        self.writer.write_record(fields)?;
        Ok(())
    }

    pub fn into_bytes(self) -> Result<Vec<u8>> {
        Ok(self.writer.into_inner().map_err(|e| e.into_error())?)
    }
}

pub fn num(x: f64) -> String {
    // no negative zero in the output
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x:.16e}")
}

/// Writes to `path`, or to stdout when there is none.
pub fn emit(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, bytes).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)?;
            Ok(out.flush()?)
        }
    }
}

#[derive(Debug, Clone)]
enum Element {
    Polyline {
        id: String,
        class: &'static str,
        points: Vec<Complex64>,
    },
    Marker {
        id: String,
        class: &'static str,
        at: Complex64,
    },
}

/// Layered drawing in the complex plane; element order is insertion order.
#[derive(Debug, Clone)]
pub struct Plot {
    /// `(re_min, re_max, im_min, im_max)`
    view: (f64, f64, f64, f64),
    width: f64,
    elements: Vec<Element>,
}

const STYLE: &str = "polyline{fill:none;vector-effect:non-scaling-stroke;stroke-width:1.5}\
.short{stroke:#c0392b;stroke-width:2.5}\
.infinite-critical{stroke:#2c3e50}\
.orthogonal{stroke:#7f8c8d;stroke-dasharray:4 3}\
.aborted{stroke:#e67e22;stroke-dasharray:2 2}\
.sigma{stroke:#8e44ad;stroke-width:2}\
.support{stroke:#27ae60;stroke-width:2.5}\
.zero{fill:#000}\
.pole{fill:#fff;stroke:#000;vector-effect:non-scaling-stroke}\
.root{fill:#2980b9}";

impl Plot {
    /// View window: bounding box of `anchors` padded by 20% of its larger
    /// side on every edge.
    pub fn around(anchors: &[Complex64]) -> Self {
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for z in anchors {
            x0 = x0.min(z.re);
            x1 = x1.max(z.re);
            y0 = y0.min(z.im);
            y1 = y1.max(z.im);
        }
        if !x0.is_finite() {
            (x0, x1, y0, y1) = (-1.0, 1.0, -1.0, 1.0);
        }
        let pad = 0.2 * (x1 - x0).max(y1 - y0).max(1e-3);
        Plot {
            view: (x0 - pad, x1 + pad, y0 - pad, y1 + pad),
            width: 800.0,
            elements: Vec::new(),
        }
    }

    pub fn polyline(&mut self, id: impl Into<String>, class: &'static str, points: Vec<Complex64>) {
        self.elements.push(Element::Polyline {
            id: id.into(),
            class,
            points,
        });
    }

    pub fn marker(&mut self, id: impl Into<String>, class: &'static str, at: Complex64) {
        self.elements.push(Element::Marker {
            id: id.into(),
            class,
            at,
        });
    }

    pub fn to_svg(&self) -> String {
        let (x0, x1, y0, y1) = self.view;
        let (w, h) = (x1 - x0, y1 - y0);
        let height = (self.width * h / w).round();
        let r = 0.006 * w.max(h);
        let mut s = String::new();
        // the y axis is flipped: a point z is drawn at (Re z, -Im z)
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{height}" viewBox="{} {} {} {}">"#,
            self.width,
            f(x0),
            f(-y1),
            f(w),
            f(h)
        );
        let _ = writeln!(s, "<style>{STYLE}</style>");
        for e in &self.elements {
            match e {
                Element::Polyline { id, class, points } => {
                    let pts: Vec<String> = points.iter().map(|z| format!("{},{}", f(z.re), f(-z.im))).collect();
                    let _ = writeln!(s, r#"<polyline id="{id}" class="{class}" points="{}"/>"#, pts.join(" "));
                }
                Element::Marker { id, class, at } => {
                    let _ = writeln!(
                        s,
                        r#"<circle id="{id}" class="{class}" cx="{}" cy="{}" r="{}"/>"#,
                        f(at.re),
                        f(-at.im),
                        f(r)
                    );
                }
            }
        }
        s.push_str("</svg>\n");
        s
    }
}

fn f(x: f64) -> String {
    let v = format!("{x:.6}");
    if v == "-0.000000" {
        "0.000000".into()
    } else {
        v
    }
}
