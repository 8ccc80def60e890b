//! Deterministic SVG rendering of report tables.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::report::ExperimentReport;

pub const WIDTH: f64 = 800.0;
pub const HEIGHT: f64 = 600.0;
const MARGIN: f64 = 60.0;
/// Rays longer than this multiple of the median finite radius are clipped.
pub const VIEW_MULTIPLE: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlotKind {
    RatioCurve,
    SectionBoundary,
}

impl std::str::FromStr for PlotKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ratio-curve" => Ok(PlotKind::RatioCurve),
            "section-boundary" => Ok(PlotKind::SectionBoundary),
            other => Err(Error::InvalidParameter(format!("unknown plot kind '{other}'"))),
        }
    }
}

pub fn render(report: &ExperimentReport, kind: PlotKind) -> Result<String> {
    if report.rows.is_empty() {
        return Err(Error::EmptyTable);
    }
    match kind {
        PlotKind::RatioCurve => ratio_curve(report),
        PlotKind::SectionBoundary => section_boundary(report),
    }
}

fn cell(report: &ExperimentReport, row: usize, col: usize) -> f64 {
    report.rows[row]
        .values
        .get(col)
        .copied()
        .flatten()
        .map_or(f64::NAN, |r| r.0)
}

fn ratio_curve(report: &ExperimentReport) -> Result<String> {
    let ycol = report
        .columns
        .iter()
        .position(|c| c.starts_with("ratio") || c == "k_min")
        .ok_or_else(|| Error::InvalidParameter("no ratio or k_min column".into()))?;
    let mut pts: Vec<Option<(f64, f64)>> = (0..report.rows.len())
        .map(|i| {
            let (x, y) = (cell(report, i, 0), cell(report, i, ycol));
            (x.is_finite() && y.is_finite()).then_some((x, y))
        })
        .collect();
    pts.sort_by(|a, b| match (a, b) {
        (Some(a), Some(b)) => a.0.total_cmp(&b.0),
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, None) => std::cmp::Ordering::Equal,
    });
    let title = format!("{}: {} vs {}", report.function, report.columns[ycol], report.columns[0]);
    Canvas::new(&pts, &title)?.finish(&[pts], &report.columns[0], &report.columns[ycol])
}

fn param(report: &ExperimentReport, name: &str) -> f64 {
    report.parameters.get(name).map_or(0.0, |r| r.0)
}

fn section_boundary(report: &ExperimentReport) -> Result<String> {
    let col = |name: &str| {
        report
            .column(name)
            .ok_or_else(|| Error::InvalidParameter(format!("missing column '{name}'")))
    };
    let (c1, c2, cr) = (col("d1")?, col("d2")?, col("radius")?);
    let (bx, by) = (param(report, "x0_1"), param(report, "x0_2"));
    let rays: Vec<(f64, f64, f64)> = (0..report.rows.len())
        .map(|i| (cell(report, i, c1), cell(report, i, c2), cell(report, i, cr)))
        .collect();
    let mut finite: Vec<f64> = rays.iter().map(|r| r.2).filter(|r| r.is_finite()).collect();
    finite.sort_by(f64::total_cmp);
    let view = finite
        .get(finite.len() / 2)
        .map_or(1.0, |m| VIEW_MULTIPLE * m.max(f64::MIN_POSITIVE));
    // rays beyond the view break the polyline
    let mut pts: Vec<Option<(f64, f64)>> = rays
        .iter()
        .map(|&(d1, d2, r)| (r.is_finite() && r <= view).then_some((bx + r * d1, by + r * d2)))
        .collect();
    // directions go once around the circle, so the boundary is cyclic
    match pts.iter().position(Option::is_none) {
        None => {
            if let Some(first) = pts.first().copied() {
                pts.push(first);
            }
        }
        Some(i) => pts.rotate_left(i),
    }
    let mut frame = pts.clone();
    frame.push(Some((bx, by)));
    let title = format!("{}: section boundary, t = {}", report.function, param(report, "t"));
    let mut canvas = Canvas::new(&frame, &title)?;
    canvas.marker(bx, by);
    canvas.finish(&[pts], "x1", "x2")
}

struct Canvas {
    body: String,
    xr: (f64, f64),
    yr: (f64, f64),
}

fn fmt_num(v: f64) -> String {
    format!("{v:.4}")
}

impl Canvas {
    fn new(pts: &[Option<(f64, f64)>], title: &str) -> Result<Self> {
        let (mut xr, mut yr) = ((f64::INFINITY, f64::NEG_INFINITY), (f64::INFINITY, f64::NEG_INFINITY));
        for &(x, y) in pts.iter().flatten() {
            xr = (xr.0.min(x), xr.1.max(x));
            yr = (yr.0.min(y), yr.1.max(y));
        }
        if !xr.0.is_finite() {
            return Err(Error::EmptyTable);
        }
        let widen = |(lo, hi): (f64, f64)| {
            if hi - lo > 0.0 {
                (lo, hi)
            } else {
                (lo - 1.0, hi + 1.0)
            }
        };
        let mut body = String::new();
        writeln!(
            body,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
        )
        .unwrap();
        writeln!(body, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
        writeln!(
            body,
            r#"<text x="{}" y="30" font-family="sans-serif" font-size="16" text-anchor="middle">{}</text>"#,
            WIDTH / 2.0,
            escape(title)
        )
        .unwrap();
        Ok(Canvas {
            body,
            xr: widen(xr),
            yr: widen(yr),
        })
    }

    fn sx(&self, x: f64) -> f64 {
        MARGIN + (x - self.xr.0) / (self.xr.1 - self.xr.0) * (WIDTH - 2.0 * MARGIN)
    }

    fn sy(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - (y - self.yr.0) / (self.yr.1 - self.yr.0) * (HEIGHT - 2.0 * MARGIN)
    }

    fn marker(&mut self, x: f64, y: f64) {
        let (cx, cy) = (self.sx(x), self.sy(y));
        writeln!(self.body, r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="3" fill="black"/>"#).unwrap();
    }

    fn finish(mut self, series: &[Vec<Option<(f64, f64)>>], xlabel: &str, ylabel: &str) -> Result<String> {
        let (l, r, t, b) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
        writeln!(
            self.body,
            r#"<path d="M{l} {t} L{l} {b} L{r} {b}" fill="none" stroke="black"/>"#
        )
        .unwrap();
        let labels = [
            (l, b + 20.0, "start", fmt_num(self.xr.0)),
            (r, b + 20.0, "end", fmt_num(self.xr.1)),
            (l - 8.0, b, "end", fmt_num(self.yr.0)),
            (l - 8.0, t + 4.0, "end", fmt_num(self.yr.1)),
            ((l + r) / 2.0, b + 40.0, "middle", escape(xlabel)),
            (l, t - 12.0, "start", escape(ylabel)),
        ];
        for (x, y, anchor, text) in labels {
            writeln!(
                self.body,
                r#"<text x="{x}" y="{y}" font-family="sans-serif" font-size="12" text-anchor="{anchor}">{text}</text>"#
            )
            .unwrap();
        }
        for s in series {
            for run in s.split(Option::is_none) {
                let coords: Vec<String> = run
                    .iter()
                    .flatten()
                    .map(|&(x, y)| format!("{:.2},{:.2}", self.sx(x), self.sy(y)))
                    .collect();
                if coords.is_empty() {
                    continue;
                }
                writeln!(
                    self.body,
                    r#"<polyline points="{}" fill="none" stroke="steelblue" stroke-width="2"/>"#,
                    coords.join(" ")
                )
                .unwrap();
            }
        }
        self.body.push_str("</svg>\n");
        Ok(self.body)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::FunctionSpec;
    use crate::report::{run_exp_family, section_report};
    use crate::sections::directions_2d;

    #[test]
    fn ratio_curve_is_deterministic() {
        let r = run_exp_family(&[1.0, 2.0, 5.0]).unwrap();
        let a = render(&r, PlotKind::RatioCurve).unwrap();
        assert_eq!(a, render(&r, PlotKind::RatioCurve).unwrap());
        assert!(a.starts_with("<svg"));
        assert!(a.contains("polyline"));
    }

    #[test]
    fn empty_table_rejected() {
        let mut r = run_exp_family(&[1.0]).unwrap();
        r.rows.clear();
        assert_eq!(render(&r, PlotKind::RatioCurve), Err(Error::EmptyTable));
    }

    #[test]
    fn unbounded_rays_break_the_boundary() {
        let f = FunctionSpec::from_tag("strip2d").unwrap();
        let g = f.gradient(&[1.0, 0.0]).unwrap();
        let r = section_report(&f, &[1.0, 0.0], &g, 1.0, &directions_2d(16), 1e12).unwrap();
        let svg = render(&r, PlotKind::SectionBoundary).unwrap();
        assert!(svg.matches("<polyline").count() >= 2);
        assert!(render(&run_exp_family(&[1.0]).unwrap(), PlotKind::SectionBoundary).is_err());
    }
}
