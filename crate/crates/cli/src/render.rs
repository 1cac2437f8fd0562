//! Text, CSV and SVG renderings of diagrams and broken lines.

use std::fmt::Write;

use serde_json::Value;
use thetaforge::brokenlines::BrokenLine;
use thetaforge::lattice::{ray_hits_ray, Point};
use thetaforge::scattering::{approx, EEWall, Support};
use thetaforge::QDiagram;

use crate::error::CliResult;

pub fn json_text(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values serialize");
    s.push('\n');
    s
}

fn support_parts(s: &Support) -> (&'static str, [i64; 2]) {
    match s {
        Support::Ray(u) => ("ray", [u[0], u[1]]),
        Support::Line(u) => ("line", [u[0], u[1]]),
    }
}

/// One row per EE-factor: `support,ux,uy,a,b,incoming,j,p`.
pub fn diagram_csv(walls: &[EEWall]) -> String {
    let mut s = String::from("support,ux,uy,a,b,incoming,j,p\n");
    for w in walls {
        let (kind, u) = support_parts(&w.support);
        for (j, p) in &w.factors {
            let _ = writeln!(s, "{kind},{},{},{},{},{},{j},\"{p}\"", u[0], u[1], w.ab[0], w.ab[1], w.incoming);
        }
    }
    s
}

pub fn diagram_text(d: &QDiagram, walls: &[EEWall]) -> String {
    let mut s = format!("order {}, {} walls\n", d.max_order(), walls.len());
    for w in walls {
        let (kind, u) = support_parts(&w.support);
        let side = if w.incoming { "in " } else { "out" };
        let factors: Vec<String> = w
            .factors
            .iter()
            .map(|(j, p)| format!("EE(-({p}) z^{})", d.direction_vec([w.ab[0] * *j as i64, w.ab[1] * *j as i64])))
            .collect();
        let _ = writeln!(s, "{kind:<4} ({:>3},{:>3}) {side} {}", u[0], u[1], factors.join(" * "));
    }
    s
}

/// Bend points of a broken line, from far out along the initial segment to
/// its endpoint, reconstructed backward from the endpoint.
pub fn broken_line_path(d: &QDiagram, line: &BrokenLine, reach: f64) -> CliResult<Vec<(f64, f64)>> {
    let mut pts: Vec<Point> = vec![line.endpoint.clone()];
    let mut y = line.endpoint.clone();
    let mut tail = None;
    for seg in line.segments.iter().rev() {
        let w = d.chart().phi_point(&seg.monomial);
        match seg.wall {
            Some(u) => {
                let u = thetaforge::lattice::point_of(u);
                let Some((s, _)) = ray_hits_ray(&y, &w, &u) else {
                    return Err(thetaforge::Error::Internal("broken line does not reach its bending wall".into()).into());
                };
                y = [&y[0] + &s * &w[0], &y[1] + &s * &w[1]];
                pts.push(y.clone());
            }
            None => tail = Some(w),
        }
    }
    let mut out: Vec<(f64, f64)> = pts.iter().rev().map(|p| (approx(&p[0]), approx(&p[1]))).collect();
    if let Some(w) = tail {
        let (wx, wy) = (approx(&w[0]), approx(&w[1]));
        let norm = (wx * wx + wy * wy).sqrt().max(f64::MIN_POSITIVE);
        let (x, y) = out[0];
        out.insert(0, (x + wx / norm * reach, y + wy / norm * reach));
    }
    Ok(out)
}

/// The diagram drawing with broken lines overlaid as polylines.
pub fn theta_svg(d: &QDiagram, lines: &[BrokenLine], window: Option<[f64; 4]>) -> CliResult<String> {
    let base = d.svg(window);
    let [x0, y0, x1, y1] = window.unwrap_or([-10.0, -10.0, 10.0, 10.0]);
    let size = 600.0;
    let map = |x: f64, y: f64| ((x - x0) * size / (x1 - x0), (y1 - y) * size / (y1 - y0));
    let reach = (x1 - x0).abs().max((y1 - y0).abs()) * 2.0;
    let mut overlay = String::new();
    for l in lines {
        let pts: Vec<String> = broken_line_path(d, l, reach)?
            .into_iter()
            .map(|(x, y)| {
                let (u, v) = map(x, y);
                format!("{u:.2},{v:.2}")
            })
            .collect();
        let _ = writeln!(
            overlay,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"#2e8b57\" stroke-width=\"1\" stroke-dasharray=\"4 2\"/>",
            pts.join(" ")
        );
    }
    if let Some(q) = lines.first().map(|l| &l.endpoint) {
        let (u, v) = map(approx(&q[0]), approx(&q[1]));
        let _ = writeln!(overlay, "<circle cx=\"{u:.2}\" cy=\"{v:.2}\" r=\"3\" fill=\"black\"/>");
    }
    let cut = base.rfind("</svg>").unwrap_or(base.len());
    Ok(format!("{}{}</svg>\n", &base[..cut], overlay))
}
