//! Figure data as CSV plus a minimal SVG rendering. Every plotted mark
//! carries `data-series`, `data-x` and `data-value` attributes holding the
//! exact CSV values.

use std::fmt::Write as _;
use std::path::Path;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FigureKind {
    Line,
    StackedBar,
    Bar,
    Step,
    Scatter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    /// `(x, value)`; x is a category label or a number rendered as text.
    pub points: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Figure {
    pub name: String,
    pub title: String,
    pub kind: FigureKind,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

/// Shortest text that parses back to the same `f64`.
pub fn fmt_num(v: f64) -> String {
    format!("{v}")
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

impl Figure {
    /// Rows `series,x,value`.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["series", "x", "value"])?;
        for s in &self.series {
            for (x, v) in &s.points {
                w.write_record([s.name.as_str(), x.as_str(), &fmt_num(*v)])?;
            }
        }
        Ok(
            String::from_utf8(w.into_inner().map_err(|e| Error::Io(e.into_error()))?)
                .expect("utf-8 csv"),
        )
    }

    fn x_categories(&self) -> Vec<String> {
        let mut xs: Vec<String> = Vec::new();
        for s in &self.series {
            for (x, _) in &s.points {
                if !xs.contains(x) {
                    xs.push(x.clone());
                }
            }
        }
        xs
    }

    fn numeric_x(&self) -> Option<Vec<f64>> {
        self.series
            .iter()
            .flat_map(|s| s.points.iter().map(|(x, _)| x.parse::<f64>().ok()))
            .collect()
    }

    pub fn to_svg(&self) -> String {
        const W: f64 = 640.0;
        const H: f64 = 400.0;
        const L: f64 = 60.0;
        const R: f64 = 20.0;
        const T: f64 = 40.0;
        const B: f64 = 50.0;
        const COLORS: [&str; 8] = [
            "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#9c755f",
        ];
        let pw = W - L - R;
        let ph = H - T - B;
        let cats = self.x_categories();
        let stacked = self.kind == FigureKind::StackedBar;
        let y_max = if stacked {
            cats.iter()
                .map(|c| {
                    self.series
                        .iter()
                        .flat_map(|s| {
                            s.points
                                .iter()
                                .filter(|(x, _)| x == c)
                                .map(|(_, v)| v.max(0.0))
                        })
                        .sum::<f64>()
                })
                .fold(0.0, f64::max)
        } else {
            self.series
                .iter()
                .flat_map(|s| s.points.iter().map(|p| p.1))
                .fold(0.0, f64::max)
        };
        let y_min = if stacked {
            0.0
        } else {
            self.series
                .iter()
                .flat_map(|s| s.points.iter().map(|p| p.1))
                .fold(0.0, f64::min)
        };
        let span = if y_max > y_min { y_max - y_min } else { 1.0 };
        let sy = |v: f64| T + ph - (v - y_min) / span * ph;
        let continuous = matches!(self.kind, FigureKind::Step | FigureKind::Scatter);
        let xnum = self.numeric_x().filter(|_| continuous);
        let (x_lo, x_hi) = xnum
            .as_ref()
            .map(|xs| {
                (
                    xs.iter().cloned().fold(f64::INFINITY, f64::min),
                    xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
                )
            })
            .unwrap_or((0.0, 1.0));
        let x_span = if x_hi > x_lo { x_hi - x_lo } else { 1.0 };
        let band = pw / cats.len().max(1) as f64;
        let sx = |x: &str| -> f64 {
            match (&xnum, x.parse::<f64>()) {
                (Some(_), Ok(v)) => L + (v - x_lo) / x_span * pw,
                _ => L + band * (cats.iter().position(|c| c == x).unwrap_or(0) as f64 + 0.5),
            }
        };

        let mut svg = String::new();
        let _ = writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" data-figure="{}">"#,
            escape(&self.name)
        );
        let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="18" text-anchor="middle" font-family="sans-serif" font-size="15">{}</text>"#,
            W / 2.0,
            escape(&self.title)
        );
        let _ = writeln!(
            svg,
            r#"<line x1="{L}" y1="{}" x2="{}" y2="{}" stroke="black"/><line x1="{L}" y1="{T}" x2="{L}" y2="{}" stroke="black"/>"#,
            T + ph,
            L + pw,
            T + ph,
            T + ph
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12">{}</text>"#,
            L + pw / 2.0,
            H - 12.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            svg,
            r#"<text x="14" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12" transform="rotate(-90 14 {})">{}</text>"#,
            T + ph / 2.0,
            T + ph / 2.0,
            escape(&self.y_label)
        );
        for (i, c) in cats.iter().enumerate().filter(|_| xnum.is_none()) {
            let _ = writeln!(
                svg,
                r#"<text x="{:.2}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="10">{}</text>"#,
                L + band * (i as f64 + 0.5),
                T + ph + 14.0,
                escape(c)
            );
        }
        let mut stack = vec![0.0; cats.len()];
        let n_series = self.series.len().max(1) as f64;
        for (k, s) in self.series.iter().enumerate() {
            let color = COLORS[k % COLORS.len()];
            let _ = writeln!(
                svg,
                r#"<g data-series-group="{}" fill="{color}" stroke="{color}">"#,
                escape(&s.name)
            );
            if matches!(self.kind, FigureKind::Line | FigureKind::Step) && s.points.len() > 1 {
                let mut d = String::new();
                for (j, (x, v)) in s.points.iter().enumerate() {
                    let (px, py) = (sx(x), sy(*v));
                    if j == 0 {
                        let _ = write!(d, "M{px:.2},{py:.2}");
                    } else if self.kind == FigureKind::Step {
                        let _ = write!(d, " H{px:.2} V{py:.2}");
                    } else {
                        let _ = write!(d, " L{px:.2},{py:.2}");
                    }
                }
                let _ = writeln!(svg, r#"<path d="{d}" fill="none" stroke-width="1.5"/>"#);
            }
            for (x, v) in &s.points {
                let attrs = format!(
                    r#"data-series="{}" data-x="{}" data-value="{}""#,
                    escape(&s.name),
                    escape(x),
                    fmt_num(*v)
                );
                match self.kind {
                    FigureKind::StackedBar => {
                        let i = cats.iter().position(|c| c == x).unwrap();
                        let (y0, y1) = (sy(stack[i]), sy(stack[i] + v.max(0.0)));
                        stack[i] += v.max(0.0);
                        let _ = writeln!(
                            svg,
                            r#"<rect x="{:.2}" y="{y1:.2}" width="{:.2}" height="{:.2}" {attrs}/>"#,
                            sx(x) - band * 0.35,
                            band * 0.7,
                            y0 - y1
                        );
                    }
                    FigureKind::Bar => {
                        let w = band * 0.8 / n_series;
                        let left = sx(x) - band * 0.4 + w * k as f64;
                        let (top, bottom) = (sy(v.max(0.0)), sy(v.min(0.0)));
                        let _ = writeln!(
                            svg,
                            r#"<rect x="{left:.2}" y="{top:.2}" width="{w:.2}" height="{:.2}" {attrs}/>"#,
                            bottom - top
                        );
                    }
                    _ => {
                        let _ = writeln!(
                            svg,
                            r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" {attrs}/>"#,
                            sx(x),
                            sy(*v)
                        );
                    }
                }
            }
            let _ = writeln!(svg, "</g>");
            let _ = writeln!(
                svg,
                r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" fill="{color}">{}</text>"#,
                L + 10.0 + 90.0 * (k % 6) as f64,
                T - 6.0 + 12.0 * (k / 6) as f64,
                escape(&s.name)
            );
        }
        svg.push_str("</svg>\n");
        svg
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::write(dir.join(format!("{}.csv", self.name)), self.to_csv()?)?;
        std::fs::write(dir.join(format!("{}.svg", self.name)), self.to_svg())?;
        Ok(())
    }
}

fn unescape(s: &str) -> String {
    s.replace("&quot;", "\"")
        .replace("&gt;", ">")
        .replace("&lt;", "<")
        .replace("&amp;", "&")
}

/// `(series, x, value)` triples read back from SVG mark attributes.
pub fn parse_svg_values(svg: &str) -> Result<Vec<(String, String, f64)>> {
    let re = Regex::new(r#"data-series="([^"]*)" data-x="([^"]*)" data-value="([^"]*)""#)?;
    re.captures_iter(svg)
        .map(|c| {
            let v: f64 = c[3]
                .parse()
                .map_err(|_| Error::InvalidInput(format!("data-value {:?}", &c[3])))?;
            Ok((unescape(&c[1]), unescape(&c[2]), v))
        })
        .collect()
}

/// `(series, x, value)` rows of a figure CSV.
pub fn parse_csv_values(text: &str) -> Result<Vec<(String, String, f64)>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    r.records()
        .map(|rec| {
            let rec = rec?;
            let v: f64 = rec[2]
                .parse()
                .map_err(|_| Error::InvalidInput(format!("value {:?}", &rec[2])))?;
            Ok((rec[0].to_string(), rec[1].to_string(), v))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig(kind: FigureKind) -> Figure {
        Figure {
            name: "f".into(),
            title: "T & <x>".into(),
            kind,
            x_label: "year".into(),
            y_label: "count".into(),
            series: vec![
                Series {
                    name: "a \"q\"".into(),
                    points: vec![("2013".into(), 0.1), ("2014".into(), 1.0 / 3.0)],
                },
                Series {
                    name: "b,c".into(),
                    points: vec![("2013".into(), 2.0), ("2014".into(), 1e-17)],
                },
            ],
        }
    }

    #[test]
    fn svg_and_csv_agree_for_every_kind() {
        for kind in [
            FigureKind::Line,
            FigureKind::StackedBar,
            FigureKind::Bar,
            FigureKind::Step,
            FigureKind::Scatter,
        ] {
            let f = fig(kind);
            let a = parse_csv_values(&f.to_csv().unwrap()).unwrap();
            let b = parse_svg_values(&f.to_svg()).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.len(), 4);
            assert_eq!(a[1].2, 1.0 / 3.0);
        }
    }
}
