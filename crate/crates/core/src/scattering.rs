//! Walls, two-dimensional scattering diagrams, path-ordered products and the
//! order-by-order consistent completion.
//!
//! A diagram lives in the planar chart of its two cone generators `v1, v2`
//! (see [`PlaneChart`]). Every wall passes through the origin. Internally each
//! wall is split into rays, and all functions on one ray are merged, so a ray
//! carries a single [`RayFunction`] in its unique direction.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::lattice::{angle_cmp, cross, point_of, ray_hits_ray, LatticeVec, PlaneChart, Point, QLattice};
use crate::laurent::{Coefficient, LaurentPoly};
use crate::qtorus::{log_from_action, Classical, Flavor, GroupElem, Quantum, RayFunction, Series};

pub use crate::cluster::mutate_diagram;

/// Support of a wall in chart coordinates: a ray `{lambda u}` or the full line through `u`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Support {
    Ray([i64; 2]),
    Line([i64; 2]),
}

impl Support {
    pub fn to_json(&self) -> Value {
        match self {
            Support::Ray(u) => json!({ "kind": "ray", "u": u }),
            Support::Line(u) => json!({ "kind": "line", "u": u }),
        }
    }
}

/// A wall: a support, a primitive direction `v_d` in the cone and a function
/// supported on positive multiples of `v_d`.
#[derive(Clone, Debug, PartialEq)]
pub struct Wall<F: Flavor> {
    pub direction: LatticeVec,
    pub support: Support,
    pub incoming: bool,
    pub func: RayFunction<F>,
}

/// One ray of a normalized diagram.
#[derive(Clone, Debug, PartialEq)]
pub struct RayWall<F: Flavor> {
    /// Primitive chart direction of the ray.
    pub ray: [i64; 2],
    /// Generator coordinates `(a, b)` of the primitive wall direction.
    pub ab: [i64; 2],
    pub func: RayFunction<F>,
}

impl<F: Flavor> RayWall<F> {
    pub fn point(&self) -> Point {
        point_of(self.ray)
    }
}

fn primitive2(u: [i64; 2]) -> [i64; 2] {
    let g = u[0].gcd(&u[1]);
    if g == 0 {
        u
    } else {
        [u[0] / g, u[1] / g]
    }
}

/// Result of a consistency check.
#[derive(Clone, Debug)]
pub struct ConsistencyReport<F: Flavor> {
    pub consistent: bool,
    /// Smallest order at which the loop product is nontrivial.
    pub first_failing_order: Option<u32>,
    /// Logarithm of the counterclockwise loop product.
    pub discrepancy: GroupElem<F>,
}

/// A scattering diagram truncated at order `max_order`, with all wall
/// directions in the plane of the two cone generators.
#[derive(Clone, Debug)]
pub struct ScatDiagram<F: Flavor> {
    lattice: Arc<QLattice>,
    chart: PlaneChart,
    max_order: u32,
    rays: Vec<RayWall<F>>,
    /// Rays that came from full lines of the initial data.
    lines: Vec<[i64; 2]>,
}

/// Quantum diagrams.
pub type QDiagram = ScatDiagram<Quantum>;
/// Classical diagrams.
pub type ClassicalDiagram = ScatDiagram<Classical>;

impl<F: Flavor> PartialEq for ScatDiagram<F> {
    fn eq(&self, other: &Self) -> bool {
        self.lattice == other.lattice && self.max_order == other.max_order && self.rays == other.rays
    }
}

impl<F: Flavor> ScatDiagram<F> {
    /// Empty diagram; the lattice must have exactly two cone generators.
    pub fn new(lattice: Arc<QLattice>, max_order: u32) -> Result<Self> {
        let gens = lattice.sigma_gens();
        if gens.len() != 2 {
            return Err(Error::EngineLimit(format!(
                "planar scattering needs exactly 2 cone generators, got {}",
                gens.len()
            )));
        }
        let chart = PlaneChart::new(&lattice, gens[0].clone(), gens[1].clone())?;
        Ok(ScatDiagram { lattice, chart, max_order, rays: Vec::new(), lines: Vec::new() })
    }

    pub fn lattice(&self) -> &Arc<QLattice> {
        &self.lattice
    }

    pub fn chart(&self) -> &PlaneChart {
        &self.chart
    }

    pub fn max_order(&self) -> u32 {
        self.max_order
    }

    /// Rays sorted counterclockwise from the positive first axis.
    pub fn rays(&self) -> &[RayWall<F>] {
        &self.rays
    }

    fn ab_of(func: &RayFunction<F>) -> [i64; 2] {
        [func.dir()[0], func.dir()[1]]
    }

    /// Absolute direction vector of `(a, b)`.
    pub fn direction_vec(&self, ab: [i64; 2]) -> LatticeVec {
        self.lattice.from_gen_coords(&ab)
    }

    /// Chart ray through `phi(v)` for `v = a v1 + b v2`.
    pub fn incoming_ray(&self, ab: [i64; 2]) -> [i64; 2] {
        let o = self.chart.outgoing_ray(ab);
        primitive2([-o[0], -o[1]])
    }

    /// Chart ray through `phi(-v)`.
    pub fn outgoing_ray(&self, ab: [i64; 2]) -> [i64; 2] {
        primitive2(self.chart.outgoing_ray(ab))
    }

    fn insert_ray(&mut self, ray: [i64; 2], func: &RayFunction<F>) -> Result<()> {
        let ab = Self::ab_of(func);
        let func = func.truncate(self.max_order);
        match self.rays.iter_mut().find(|r| r.ray == ray) {
            Some(r) => {
                if r.ab != ab {
                    return Err(Error::Internal(format!("ray {ray:?} carries two directions")));
                }
                r.func.merge(&func);
            }
            None => {
                let p = point_of(ray);
                let pos = self.rays.partition_point(|r| angle_cmp(&r.point(), &p) == Ordering::Less);
                self.rays.insert(pos, RayWall { ray, ab, func });
            }
        }
        Ok(())
    }

    /// Adds the full line `v^{omega perp}` with function `func`.
    pub fn add_line(&mut self, func: &RayFunction<F>) -> Result<()> {
        let ab = Self::ab_of(func);
        let (i, o) = (self.incoming_ray(ab), self.outgoing_ray(ab));
        self.insert_ray(i, func)?;
        self.insert_ray(o, func)?;
        self.lines.push(i);
        Ok(())
    }

    /// Adds a half-wall: the outgoing ray `phi(-v)` or the incoming ray `phi(v)`.
    pub fn add_ray(&mut self, func: &RayFunction<F>, outgoing: bool) -> Result<()> {
        let ab = Self::ab_of(func);
        let ray = if outgoing { self.outgoing_ray(ab) } else { self.incoming_ray(ab) };
        self.insert_ray(ray, func)
    }

    /// Entry on a chart ray, if any.
    pub fn ray_function(&self, ray: [i64; 2]) -> Option<&RayFunction<F>> {
        let ray = primitive2(ray);
        self.rays.iter().find(|r| r.ray == ray).map(|r| &r.func)
    }

    /// Function on the outgoing ray of direction `(a, b)`.
    pub fn outgoing_function(&self, ab: [i64; 2]) -> Option<&RayFunction<F>> {
        self.ray_function(self.outgoing_ray(ab))
    }

    /// Function on the incoming ray of direction `(a, b)`.
    pub fn incoming_function(&self, ab: [i64; 2]) -> Option<&RayFunction<F>> {
        self.ray_function(self.incoming_ray(ab))
    }

    /// Walls, with the two halves of a line merged whenever they carry the same function.
    pub fn walls(&self) -> Vec<Wall<F>> {
        let mut out = Vec::new();
        let mut skip = vec![false; self.rays.len()];
        for (i, r) in self.rays.iter().enumerate() {
            if skip[i] || r.func.is_trivial() {
                continue;
            }
            let incoming = r.ray == self.incoming_ray(r.ab);
            let opposite = [-r.ray[0], -r.ray[1]];
            let partner = self.rays.iter().position(|s| s.ray == opposite && s.ab == r.ab && s.func == r.func);
            let support = match partner {
                Some(j) => {
                    skip[j] = true;
                    Support::Line(self.incoming_ray(r.ab))
                }
                None => Support::Ray(r.ray),
            };
            out.push(Wall {
                direction: self.direction_vec(r.ab),
                support,
                incoming: incoming || matches!(support, Support::Line(_)),
                func: r.func.clone(),
            });
        }
        out
    }

    fn check_generic(&self, q: &Point) -> Result<()> {
        if q[0].is_zero() && q[1].is_zero() {
            return Err(Error::ThroughOrigin);
        }
        for r in &self.rays {
            let u = r.point();
            if cross(&u, q).is_zero() {
                return Err(Error::NonGeneric { point: fmt_point(q), line: format!("{:?}", r.ray) });
            }
        }
        Ok(())
    }

    /// True when `q` avoids every line carrying a ray of the diagram.
    pub fn is_generic(&self, q: &Point) -> bool {
        self.check_generic(q).is_ok()
    }

    /// Wall crossings `(ray index, sign)` of the straight segment from `q1` to
    /// `q2`, in order. Fails when the segment meets the origin.
    fn segment_crossings(&self, q1: &Point, q2: &Point) -> Result<Vec<(usize, i32)>> {
        let d: Point = [&q2[0] - &q1[0], &q2[1] - &q1[1]];
        if d[0].is_zero() && d[1].is_zero() {
            return Ok(Vec::new());
        }
        // the origin lies on the segment
        if cross(q1, q2).is_zero() && !(&q1[0] * &q2[0] + &q1[1] * &q2[1]).is_positive() {
            return Err(Error::ThroughOrigin);
        }
        let one = BigRational::from_integer(BigInt::from(1));
        let mut hits: Vec<(BigRational, usize, i32)> = Vec::new();
        for (i, r) in self.rays.iter().enumerate() {
            if let Some((s, lambda)) = ray_hits_ray(q1, &d, &r.point()) {
                if s >= one {
                    continue;
                }
                if lambda.is_zero() {
                    return Err(Error::ThroughOrigin);
                }
                hits.push((s, i, self.chart.crossing_sign(r.ab, &d)));
            }
        }
        hits.sort_by(|a, b| a.0.cmp(&b.0));
        Ok(hits.into_iter().map(|(_, i, s)| (i, s)).collect())
    }

    /// Crossings of a path from `q1` to `q2`: the straight segment, or a
    /// two-segment detour when the segment passes through the origin.
    pub fn path_crossings(&self, q1: &Point, q2: &Point) -> Result<Vec<(usize, i32)>> {
        self.check_generic(q1)?;
        self.check_generic(q2)?;
        match self.segment_crossings(q1, q2) {
            Err(Error::ThroughOrigin) => {}
            other => return other,
        }
        let perp: Point = [-q1[1].clone(), q1[0].clone()];
        for c in 0..8i64 {
            let f = BigRational::new(BigInt::from(c), BigInt::from(c + 3));
            let mid: Point = [&perp[0] + &q1[0] * &f, &perp[1] + &q1[1] * &f];
            if !self.is_generic(&mid) {
                continue;
            }
            if let (Ok(mut a), Ok(b)) = (self.segment_crossings(q1, &mid), self.segment_crossings(&mid, q2)) {
                a.extend(b);
                return Ok(a);
            }
        }
        Err(Error::ThroughOrigin)
    }

    /// Applies `Ad` of the path-ordered product along the given crossings.
    pub fn apply_crossings(&self, crossings: &[(usize, i32)], s: &Series<F>) -> Series<F> {
        crossings.iter().fold(s.clone(), |acc, &(i, sign)| self.rays[i].func.apply(&acc, sign))
    }

    /// `Ad_{theta_gamma}` for the path from `q1` to `q2`.
    pub fn transport_series(&self, q1: &Point, q2: &Point, s: &Series<F>) -> Result<Series<F>> {
        let c = self.path_crossings(q1, q2)?;
        Ok(self.apply_crossings(&c, s))
    }

    /// The path-ordered product along the path from `q1` to `q2`, as a group element.
    pub fn path_ordered_product(&self, q1: &Point, q2: &Point) -> Result<GroupElem<F>> {
        let c = self.path_crossings(q1, q2)?;
        log_from_action(self.lattice.clone(), self.max_order, |s| Ok(self.apply_crossings(&c, s)))
    }

    /// Counterclockwise crossings of a small loop around the origin, starting just below the positive first axis.
    fn loop_crossings(&self) -> Vec<(usize, i32)> {
        self.rays
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let tangent = point_of([-r.ray[1], r.ray[0]]);
                (i, self.chart.crossing_sign(r.ab, &tangent))
            })
            .collect()
    }

    /// Crossing sign of the counterclockwise loop at a chart ray.
    fn loop_sign(&self, ab: [i64; 2], ray: [i64; 2]) -> i32 {
        self.chart.crossing_sign(ab, &point_of([-ray[1], ray[0]]))
    }

    /// Logarithm of the counterclockwise loop product.
    pub fn loop_product(&self) -> Result<GroupElem<F>> {
        let c = self.loop_crossings();
        log_from_action(self.lattice.clone(), self.max_order, |s| Ok(self.apply_crossings(&c, s)))
    }

    /// Checks that the loop product around the origin is trivial to order `max_order`.
    pub fn check_consistent(&self) -> Result<ConsistencyReport<F>> {
        let g = self.loop_product()?;
        Ok(ConsistencyReport { consistent: g.is_identity(), first_failing_order: g.min_order(), discrepancy: g })
    }

    /// Order-`j` part of `ad_X` on the probe `z^e`, where `exp(ad_X)` is the
    /// loop action; lower orders must already vanish.
    fn loop_defect(&self, e: &LatticeVec, j: u32) -> Result<Series<F>> {
        let c = self.loop_crossings();
        let ze = Series::<F>::monomial(self.lattice.clone(), e.clone(), F::Coeff::one(), j);
        let img = self.apply_crossings(&c, &ze).sub(&ze)?;
        for key in img.keyed_terms().keys() {
            let o: i64 = key.iter().sum();
            if (o as u32) < j {
                return Err(Error::Inconsistent { order: o as u32, detail: format!("loop defect on z^{e} below order {j}") });
            }
        }
        Ok(img)
    }

    /// Order-`j` loop logarithm terms `c_w` keyed by generator coordinates.
    fn loop_log_at(&self, j: u32) -> Result<BTreeMap<Vec<i64>, F::Coeff>> {
        let den = self.lattice.denom();
        let mut found: BTreeMap<Vec<i64>, F::Coeff> = BTreeMap::new();
        for e in self.lattice.sigma_gens() {
            let img = self.loop_defect(e, j)?;
            for (key, c) in img.keyed_terms() {
                let w = self.lattice.from_gen_coords(key);
                let tot = self.lattice.omega_numerator(&w, e) / den;
                if tot == 0 {
                    return Err(Error::Internal(format!("loop defect at z^{{{e}+{w}}} with omega(w, e) = 0")));
                }
                let g = key.iter().fold(0i64, |a, b| a.gcd(b));
                let cw = c
                    .div_exact(&F::bracket(tot, g))
                    .ok_or_else(|| Error::Inexact(format!("loop defect at {w} is not a bracket multiple")))?;
                match found.get(key) {
                    Some(prev) if *prev != cw => {
                        return Err(Error::Inconsistent { order: j, detail: format!("probes disagree at {w}") });
                    }
                    Some(_) => {}
                    None => {
                        found.insert(key.clone(), cw);
                    }
                }
            }
        }
        Ok(found)
    }

    /// Consistent completion to order `k` of a diagram consisting of full
    /// incoming lines. Only outgoing rays are added.
    pub fn complete(&self, k: u32) -> Result<Self> {
        if self.rays.len() != 2 * self.lines.len() {
            return Err(Error::MalformedInput("initial walls must be full lines through the origin".into()));
        }
        let mut d = ScatDiagram {
            lattice: self.lattice.clone(),
            chart: self.chart.clone(),
            max_order: k,
            rays: Vec::new(),
            lines: Vec::new(),
        };
        for r in &self.rays {
            d.insert_ray(r.ray, &r.func)?;
        }
        d.lines = self.lines.clone();
        if !d.loop_log_at(1)?.is_empty() {
            return Err(Error::MalformedInput("initial data is inconsistent at order 1".into()));
        }
        for j in 2..=k {
            let log = d.loop_log_at(j)?;
            for (key, c) in log {
                let g = key.iter().fold(0i64, |a, b| a.gcd(b));
                let ab = [key[0] / g, key[1] / g];
                let ray = d.outgoing_ray(ab);
                let sigma = d.loop_sign(ab, ray);
                let mut f = RayFunction::<F>::new(ab.to_vec())?;
                let corr = if sigma > 0 { c.neg_ref() } else { c };
                f.add_log(g as u32, &corr);
                d.insert_ray(ray, &f)?;
            }
            if !d.loop_log_at(j)?.is_empty() {
                return Err(Error::Inconsistent { order: j, detail: "loop still nontrivial after correction".into() });
            }
        }
        d.rays.retain(|r| !r.func.is_trivial());
        Ok(d)
    }

    /// The initial lines of the diagram, rebuilt from their incoming halves.
    pub fn incoming_part(&self) -> Result<Self> {
        let mut d = ScatDiagram {
            lattice: self.lattice.clone(),
            chart: self.chart.clone(),
            max_order: self.max_order,
            rays: Vec::new(),
            lines: Vec::new(),
        };
        for l in &self.lines {
            if let Some(f) = self.ray_function(*l) {
                d.add_line(&f.clone())?;
            }
        }
        Ok(d)
    }

    /// The same walls over another lattice whose cone generators span a plane
    /// with the same form values, so that generator coordinates, functions and
    /// chart rays carry over unchanged.
    pub fn rehost(&self, lattice: Arc<QLattice>) -> Result<Self> {
        let mut d = Self::new(lattice, self.max_order)?;
        let (n_old, n_new) = (self.lattice.pair_omega(self.chart.v1(), self.chart.v2())?, d.lattice.pair_omega(d.chart.v1(), d.chart.v2())?);
        if n_old != n_new {
            return Err(Error::InvalidArgument(format!("generator planes differ: omega(v1,v2) = {n_old} vs {n_new}")));
        }
        for r in &self.rays {
            let outgoing = r.ray == self.outgoing_ray(r.ab);
            d.add_ray(&r.func, outgoing)?;
        }
        d.lines = self.lines.iter().map(|l| {
            let ab = self.rays.iter().find(|r| r.ray == *l).map(|r| r.ab).unwrap_or([0, 0]);
            d.incoming_ray(ab)
        }).collect();
        Ok(d)
    }

    /// Order of a generator-coordinate vector.
    pub fn order_of(ab: [i64; 2]) -> u32 {
        (ab[0] + ab[1]) as u32
    }

    pub fn to_json_with<G: Fn(&RayFunction<F>) -> Value>(&self, func_json: G) -> Value {
        let walls: Vec<Value> = self
            .walls()
            .iter()
            .map(|w| {
                let mut v = json!({
                    "direction": w.direction.to_json(),
                    "ab": [w.func.dir()[0], w.func.dir()[1]],
                    "support_ray": w.support.to_json(),
                    "incoming": w.incoming,
                });
                let extra = func_json(&w.func);
                if let (Some(o), Value::Object(e)) = (v.as_object_mut(), extra) {
                    o.extend(e);
                }
                v
            })
            .collect();
        json!({
            "flavor": F::NAME,
            "lattice": self.lattice.to_json(),
            "chart": self.chart.to_json(),
            "order": self.max_order,
            "walls": walls,
        })
    }

    /// SVG drawing of the rays inside the viewport `[x0, y0, x1, y1]`.
    pub fn to_svg(&self, window: Option<[f64; 4]>, label: impl Fn(&RayWall<F>) -> String) -> String {
        let [x0, y0, x1, y1] = window.unwrap_or([-10.0, -10.0, 10.0, 10.0]);
        let size = 600.0;
        let sx = size / (x1 - x0);
        let sy = size / (y1 - y0);
        let map = |x: f64, y: f64| ((x - x0) * sx, (y1 - y) * sy);
        let reach = (x1 - x0).abs().max((y1 - y0).abs()) * 2.0;
        let mut s = String::new();
        let _ = writeln!(
            s,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{size}\" height=\"{size}\" viewBox=\"0 0 {size} {size}\">"
        );
        let _ = writeln!(s, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>");
        let (ox, oy) = map(0.0, 0.0);
        for r in &self.rays {
            let (ux, uy) = (r.ray[0] as f64, r.ray[1] as f64);
            let norm = (ux * ux + uy * uy).sqrt();
            let (ex, ey) = map(ux / norm * reach, uy / norm * reach);
            let incoming = r.ray == self.incoming_ray(r.ab);
            let colour = if incoming { "#1f4e9c" } else { "#b22222" };
            let _ = writeln!(
                s,
                "<line x1=\"{ox:.2}\" y1=\"{oy:.2}\" x2=\"{ex:.2}\" y2=\"{ey:.2}\" stroke=\"{colour}\" stroke-width=\"1.5\"/>"
            );
            let lx = (ux / norm * reach).clamp(x0, x1) * 0.9;
            let ly = (uy / norm * reach).clamp(y0, y1) * 0.9;
            let (tx, ty) = map(lx, ly);
            let _ = writeln!(
                s,
                "<text x=\"{tx:.2}\" y=\"{ty:.2}\" font-size=\"10\" font-family=\"monospace\">{}</text>",
                xml_escape(&label(r))
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub(crate) fn fmt_point(q: &Point) -> String {
    format!("({}, {})", q[0], q[1])
}

/// EE-form of one wall: `prod_j EE(-p_j z^{j v})`.
#[derive(Clone, Debug, PartialEq)]
pub struct EEWall {
    pub support: Support,
    pub direction: LatticeVec,
    pub ab: [i64; 2],
    pub incoming: bool,
    pub factors: BTreeMap<u32, LaurentPoly>,
}

impl EEWall {
    /// `p_j`, zero when absent.
    pub fn factor(&self, j: u32) -> LaurentPoly {
        self.factors.get(&j).cloned().unwrap_or_else(LaurentPoly::zero)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "direction": self.direction.to_json(),
            "ab": self.ab,
            "support_ray": self.support.to_json(),
            "incoming": self.incoming,
            "ee_factors": self.factors.iter().map(|(j, p)| json!([j, p.to_json()])).collect::<Vec<_>>(),
        })
    }
}

impl QDiagram {
    /// Factors every wall as `prod_j EE(-p_j z^{j v})`.
    pub fn to_ee_form(&self) -> Result<Vec<EEWall>> {
        self.walls()
            .into_iter()
            .map(|w| {
                let max_j = self.max_order / w.func.dir_order().max(1);
                Ok(EEWall {
                    support: w.support,
                    ab: [w.func.dir()[0], w.func.dir()[1]],
                    direction: w.direction,
                    incoming: w.incoming,
                    factors: w.func.ee_factors(max_j)?,
                })
            })
            .collect()
    }

    /// EE-factors of the outgoing ray of direction `(a, b)`; empty if absent.
    pub fn outgoing_ee(&self, ab: [i64; 2]) -> Result<BTreeMap<u32, LaurentPoly>> {
        let o = ab[0] + ab[1];
        match self.outgoing_function(ab) {
            Some(f) => f.ee_factors(self.max_order / o.max(1) as u32),
            None => Ok(BTreeMap::new()),
        }
    }

    /// EE-factors of every nontrivial ray, keyed by chart ray.
    pub fn ray_ee_factors(&self) -> Result<Vec<(RayWall<Quantum>, BTreeMap<u32, LaurentPoly>)>> {
        self.rays
            .iter()
            .map(|r| {
                let o = r.func.dir_order().max(1);
                Ok((r.clone(), r.func.ee_factors(self.max_order / o)?))
            })
            .collect()
    }

    /// The `t -> 1` limit of every wall function.
    pub fn classical_limit(&self) -> ClassicalDiagram {
        ScatDiagram {
            lattice: self.lattice.clone(),
            chart: self.chart.clone(),
            max_order: self.max_order,
            rays: self
                .rays
                .iter()
                .map(|r| RayWall { ray: r.ray, ab: r.ab, func: r.func.classical_limit() })
                .collect(),
            lines: self.lines.clone(),
        }
    }

    pub fn to_json(&self) -> Result<Value> {
        let ee = self.to_ee_form()?;
        let mut v = self.to_json_with(|_| json!({}));
        v["walls"] = Value::Array(ee.iter().map(EEWall::to_json).collect());
        Ok(v)
    }

    /// SVG with each ray labelled by its leading EE-factor.
    pub fn svg(&self, window: Option<[f64; 4]>) -> String {
        self.to_svg(window, |r| {
            let o = r.func.dir_order().max(1);
            match r.func.ee_factors(self.max_order / o) {
                Ok(f) => match f.iter().next() {
                    Some((j, p)) => format!("EE(-({p}) z^{})", self.direction_vec([r.ab[0] * *j as i64, r.ab[1] * *j as i64])),
                    None => String::new(),
                },
                Err(_) => "?".into(),
            }
        })
    }

    /// Builds a diagram from initial-data JSON:
    /// `{"lattice": {...} | "omega": [[..]], "walls": [{"direction": [..], "p": laurent}]}`,
    /// each wall being the full line with function `EE(-p z^direction)`.
    pub fn from_init_json(v: &Value, k: u32) -> Result<Self> {
        let lattice = if let Some(l) = v.get("lattice") {
            QLattice::from_json(l)?
        } else if let Some(om) = v.get("omega") {
            let m: Vec<Vec<i64>> = serde_json::from_value(om.clone()).map_err(|e| Error::Parse(e.to_string()))?;
            QLattice::standard(m)?
        } else {
            return Err(Error::Parse("initial data needs \"lattice\" or \"omega\"".into()));
        };
        let lattice = Arc::new(lattice);
        let mut d = Self::new(lattice.clone(), k)?;
        let walls = v.get("walls").and_then(Value::as_array).ok_or_else(|| Error::Parse("missing \"walls\"".into()))?;
        for w in walls {
            let dir = LatticeVec::from_json(w.get("direction").ok_or_else(|| Error::Parse("wall without direction".into()))?)?;
            let p = match w.get("p") {
                Some(p) => LaurentPoly::from_json(p)?,
                None => LaurentPoly::one(),
            };
            let (dirk, s) = crate::qtorus::primitive_split(&lattice, &dir)?;
            d.add_line(&RayFunction::ee(dirk, s, &p, k)?)?;
        }
        Ok(d)
    }
}

impl ClassicalDiagram {
    /// Log coefficients `c_j` of `z^{jv}/j` per wall.
    pub fn to_json(&self) -> Value {
        self.to_json_with(|f| {
            json!({
                "log_terms": f.log().iter().map(|(j, c)| json!([j, c.to_json()])).collect::<Vec<_>>()
            })
        })
    }
}

/// Rational number as `f64`, for plotting only.
pub fn approx(x: &BigRational) -> f64 {
    x.numer().to_f64().unwrap_or(0.0) / x.denom().to_f64().unwrap_or(1.0)
}
