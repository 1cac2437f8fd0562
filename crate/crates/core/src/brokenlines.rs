//! Broken lines, theta functions, transport between chambers, structure
//! constants and triangular expansion in the theta basis.
//!
//! Broken lines are enumerated backwards from their endpoint `Q`: a line whose
//! last monomial is `z^v` arrives at `Q` travelling in chart direction
//! `-phi(v)`, so going back in time it moves along `Q + s phi(v)`. At every
//! wall it meets it may have bent, which going backwards means replacing `v`
//! by `v - m v_d` and multiplying by the `m`-th coefficient of the wall action.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Signed;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::lattice::{angle_cmp, cross, point_of, ray_hits_ray, LatticeVec, Point};
use crate::laurent::{Coefficient, LaurentPoly, QLaurent};
use crate::qtorus::{QSeries, Series};
use crate::scattering::{fmt_point, QDiagram};

/// One straight piece of a broken line.
#[derive(Clone, Debug, PartialEq)]
pub struct Segment {
    pub monomial: LatticeVec,
    pub coeff: LaurentPoly,
    /// Chart ray of the wall at whose crossing this segment starts (`None` for the initial segment).
    pub wall: Option<[i64; 2]>,
}

/// A broken line with ends `(p, Q)`, listed from the initial segment to the final one.
#[derive(Clone, Debug, PartialEq)]
pub struct BrokenLine {
    pub endpoint: Point,
    pub segments: Vec<Segment>,
}

impl BrokenLine {
    pub fn initial_monomial(&self) -> &LatticeVec {
        &self.segments[0].monomial
    }

    pub fn final_monomial(&self) -> &LatticeVec {
        &self.segments.last().expect("a broken line has a segment").monomial
    }

    pub fn final_coeff(&self) -> &LaurentPoly {
        &self.segments.last().expect("a broken line has a segment").coeff
    }

    pub fn bends(&self) -> usize {
        self.segments.len() - 1
    }

    pub fn to_json(&self) -> Value {
        json!({
            "endpoint": [self.endpoint[0].to_string(), self.endpoint[1].to_string()],
            "segments": self.segments.iter().map(|s| json!({
                "monomial": s.monomial.to_json(),
                "coeff": s.coeff.to_json(),
                "wall": s.wall,
            })).collect::<Vec<_>>(),
        })
    }
}

/// The chart expansion of a theta function at a generic point.
#[derive(Clone, Debug, PartialEq)]
pub struct ThetaExpansion {
    pub p: LatticeVec,
    pub q: Point,
    pub terms: QSeries,
}

impl ThetaExpansion {
    /// True when the expansion is `z^p (1 + higher cone terms)`.
    pub fn is_pointed(&self) -> bool {
        self.terms.base() == &self.p && self.terms.is_pointed()
    }

    pub fn to_json(&self) -> Value {
        json!({
            "p": self.p.to_json(),
            "Q": [self.q[0].to_string(), self.q[1].to_string()],
            "order": self.terms.max_order(),
            "terms": self.terms.to_json()["terms"].clone(),
        })
    }
}

struct Search<'a> {
    d: &'a QDiagram,
    p: &'a LatticeVec,
    q: &'a Point,
    k: u32,
    cache: HashMap<(usize, i64), Vec<QLaurent>>,
    out: Vec<BrokenLine>,
}

impl<'a> Search<'a> {
    /// Generator coordinates of `v - p` if it lies in the cone with order at most `k`.
    fn offset(&self, v: &LatticeVec) -> Option<Vec<i64>> {
        let c = self.d.lattice().gen_coords(&(v - self.p)).ok()??;
        (c.iter().all(|&x| x >= 0) && c.iter().sum::<i64>() <= self.k as i64).then_some(c)
    }

    fn coeffs(&mut self, wall: usize, b: i64) -> &Vec<QLaurent> {
        let d = self.d;
        let k = self.k;
        self.cache.entry((wall, b)).or_insert_with(|| {
            let f = &d.rays()[wall].func;
            f.action_coeffs(b, b.signum() as i32, k / f.dir_order().max(1))
        })
    }

    /// Extends a partial line backwards. `rev` lists segments from the final
    /// one backwards; each entry holds the monomial, the bend coefficient and
    /// wall at the end of that segment (`1` and `None` for the final segment).
    fn dfs(&mut self, y: Point, start_wall: Option<usize>, rev: &mut Vec<(LatticeVec, QLaurent, Option<usize>)>) -> Result<()> {
        let v = rev.last().expect("nonempty").0.clone();
        let dir = point_of(self.d.chart().phi(&v));
        if dir[0].is_zero() && dir[1].is_zero() {
            // stationary in the chart: this must already be the initial segment
            if &v == self.p {
                self.record(rev);
            }
            return Ok(());
        }
        let mut hit: Option<(BigRational, usize)> = None;
        for (i, r) in self.d.rays().iter().enumerate() {
            if Some(i) == start_wall {
                continue;
            }
            if let Some((s, lambda)) = ray_hits_ray(&y, &dir, &r.point()) {
                if lambda.is_zero() {
                    return Err(Error::ThroughOrigin);
                }
                if hit.as_ref().is_none_or(|(s0, _)| s < *s0) {
                    hit = Some((s, i));
                }
            }
        }
        let Some((s, wi)) = hit else {
            if &v == self.p {
                self.record(rev);
            }
            return Ok(());
        };
        let z: Point = [&y[0] + &s * &dir[0], &y[1] + &s * &dir[1]];
        // passing the wall without bending
        self.dfs(z.clone(), Some(wi), rev)?;
        // bending at the wall
        let lat = self.d.lattice().clone();
        let r = &self.d.rays()[wi];
        let w0 = lat.from_gen_coords(&r.ab);
        let b = lat.omega_numerator(&w0, &v) / lat.denom();
        if b == 0 {
            return Ok(());
        }
        let ord = r.func.dir_order() as i64;
        let room = self.offset(&v).map_or(0, |o| o.iter().sum::<i64>());
        let coeffs = self.coeffs(wi, b).clone();
        let mut m = 1i64;
        while m * ord <= room && (m as usize) < coeffs.len() {
            let a = &coeffs[m as usize];
            if !a.is_zero() {
                let prev = &v - &w0.scale(m);
                if self.offset(&prev).is_some() {
                    rev.push((prev, a.clone(), Some(wi)));
                    let res = self.dfs(z.clone(), Some(wi), rev);
                    rev.pop();
                    res?;
                }
            }
            m += 1;
        }
        Ok(())
    }

    fn record(&mut self, rev: &[(LatticeVec, QLaurent, Option<usize>)]) {
        let mut segs = Vec::with_capacity(rev.len());
        let mut coeff = QLaurent::one();
        let mut wall = None;
        for (v, a, w) in rev.iter().rev() {
            segs.push(Segment {
                monomial: v.clone(),
                coeff: coeff.to_integer().unwrap_or_else(LaurentPoly::zero),
                wall: wall.map(|i: usize| self.d.rays()[i].ray),
            });
            coeff = coeff.mul_ref(a);
            wall = *w;
        }
        self.out.push(BrokenLine { endpoint: self.q.clone(), segments: segs });
    }
}

fn order_key(key: &[i64]) -> i64 {
    key.iter().sum()
}

/// All broken lines with ends `(p, Q)` whose final monomial has order at most
/// `k` above `p`. `Q` must avoid every line of the diagram.
pub fn enumerate_broken_lines(d: &QDiagram, p: &LatticeVec, q: &Point, k: u32) -> Result<Vec<BrokenLine>> {
    if k > d.max_order() {
        return Err(Error::InvalidArgument(format!("order {k} exceeds the diagram order {}", d.max_order())));
    }
    check_generic(d, q)?;
    let lat = d.lattice();
    let ngens = lat.sigma_gens().len();
    let mut search = Search { d, p, q, k, cache: HashMap::new(), out: Vec::new() };
    for key in keys_up_to(ngens, k) {
        let v = p + &lat.from_gen_coords(&key);
        let mut rev = vec![(v, QLaurent::one(), None)];
        search.dfs(q.clone(), None, &mut rev)?;
    }
    for line in &search.out {
        if line.segments.iter().any(|s| s.coeff.is_zero()) {
            return Err(Error::Inexact("broken line coefficient is not an integer Laurent polynomial".into()));
        }
    }
    Ok(search.out)
}

/// Generator-coordinate vectors with nonnegative entries and sum at most `k`.
pub(crate) fn keys_up_to(ngens: usize, k: u32) -> Vec<Vec<i64>> {
    let mut out = vec![vec![]];
    for _ in 0..ngens {
        let mut next = Vec::new();
        for pre in &out {
            let used: i64 = pre.iter().sum();
            for x in 0..=(k as i64 - used) {
                let mut v = pre.clone();
                v.push(x);
                next.push(v);
            }
        }
        out = next;
    }
    out.sort_by_key(|v| (order_key(v), v.clone()));
    out
}

fn check_generic(d: &QDiagram, q: &Point) -> Result<()> {
    if q[0].is_zero() && q[1].is_zero() {
        return Err(Error::NonGeneric { point: fmt_point(q), line: "origin".into() });
    }
    for r in d.rays() {
        if cross(&r.point(), q).is_zero() {
            return Err(Error::NonGeneric { point: fmt_point(q), line: format!("{:?}", r.ray) });
        }
    }
    Ok(())
}

/// `theta_{p,Q}` to order `k`, as the sum of final monomials of broken lines.
pub fn theta(d: &QDiagram, p: &LatticeVec, q: &Point, k: u32) -> Result<ThetaExpansion> {
    let lines = enumerate_broken_lines(d, p, q, k)?;
    let terms = QSeries::from_terms(
        d.lattice().clone(),
        p.clone(),
        k,
        lines.iter().map(|l| (l.final_monomial().clone(), l.final_coeff().to_rational())),
    )?;
    let th = ThetaExpansion { p: p.clone(), q: q.clone(), terms };
    if !th.is_pointed() {
        return Err(Error::Internal(format!("theta_{p} is not pointed")));
    }
    Ok(th)
}

/// Moves a theta expansion from `Q1` to `Q2` by the path-ordered product.
pub fn transport(d: &QDiagram, th: &ThetaExpansion, q2: &Point) -> Result<ThetaExpansion> {
    let terms = d.transport_series(&th.q, q2, &th.terms)?;
    Ok(ThetaExpansion { p: th.p.clone(), q: q2.clone(), terms })
}

/// Index of the chamber (angular sector between consecutive rays) containing a generic point.
pub fn chamber_index(d: &QDiagram, q: &Point) -> usize {
    d.rays().iter().filter(|r| angle_cmp(&r.point(), q) == Ordering::Less).count() % d.rays().len().max(1)
}

/// A generic rational point strictly inside chamber `c` (between rays `c-1` and `c`).
pub fn chamber_point(d: &QDiagram, c: usize) -> Result<Point> {
    let rays = d.rays();
    let n = rays.len();
    if n == 0 {
        let q = point_of([3, 7]);
        return Ok(q);
    }
    let a = rays[(c + n - 1) % n].point();
    let b = rays[c % n].point();
    let rot = |p: &Point| -> Point { [-p[1].clone(), p[0].clone()] };
    // a direction strictly inside the sector from a to b (counterclockwise)
    let mid = if n == 1 {
        [-&a[0], -&a[1]]
    } else {
        let cr = cross(&a, &b);
        if cr.is_positive() {
            [&a[0] + &b[0], &a[1] + &b[1]]
        } else if cr.is_zero() {
            rot(&a)
        } else {
            [-(&a[0] + &b[0]), -(&a[1] + &b[1])]
        }
    };
    for j in 1..40i64 {
        for sign in [1i64, -1] {
            let t = BigRational::new(BigInt::from(sign), BigInt::from(j + 2));
            let r = rot(&mid);
            let q: Point = [&mid[0] + &t * &r[0] * BigRational::new(1.into(), 7.into()), &mid[1] + &t * &r[1] * BigRational::new(1.into(), 7.into())];
            if check_generic(d, &q).is_ok() && chamber_index(d, &q) == c % n {
                return Ok(q);
            }
        }
    }
    Err(Error::Internal(format!("no generic point found in chamber {c}")))
}

/// A generic point `Q` close to `phi(p)`, in a chamber whose closure contains
/// `phi(p)`. `None` when `phi(p) = 0`.
pub fn point_near(d: &QDiagram, p: &LatticeVec) -> Option<Point> {
    let y = d.chart().phi(p);
    if y == [0, 0] {
        return None;
    }
    let base = point_of(y);
    let perp: Point = point_of([-y[1], y[0]]);
    let on_ray = d.rays().iter().position(|r| cross(&r.point(), &base).is_zero() && angle_cmp(&r.point(), &base) == Ordering::Equal);
    let target = chamber_index(d, &base);
    let mut eps = BigRational::new(BigInt::from(1), BigInt::from(3));
    for _ in 0..60 {
        let q: Point = [&base[0] + &eps * &perp[0], &base[1] + &eps * &perp[1]];
        let ok_chamber = match on_ray {
            // phi(p) is on ray i; just counterclockwise of it is chamber i + 1
            Some(i) => chamber_index(d, &q) == (i + 1) % d.rays().len(),
            None => chamber_index(d, &q) == target,
        };
        if ok_chamber && check_generic(d, &q).is_ok() {
            return Some(q);
        }
        eps /= BigRational::from_integer(BigInt::from(2));
    }
    None
}

/// Theta expansions indexed by chamber, computed on demand.
pub struct ThetaCache<'a> {
    d: &'a QDiagram,
    k: u32,
    points: Vec<Point>,
    store: HashMap<(LatticeVec, usize), ThetaExpansion>,
}

impl<'a> ThetaCache<'a> {
    pub fn new(d: &'a QDiagram, k: u32) -> Result<Self> {
        let n = d.rays().len().max(1);
        let points = (0..n).map(|c| chamber_point(d, c)).collect::<Result<Vec<_>>>()?;
        Ok(ThetaCache { d, k, points, store: HashMap::new() })
    }

    pub fn chamber_point(&self, c: usize) -> &Point {
        &self.points[c]
    }

    pub fn chambers(&self) -> usize {
        self.points.len()
    }

    /// `theta_{p}` in chamber `c`, to order `k`.
    pub fn get(&mut self, p: &LatticeVec, c: usize) -> Result<&ThetaExpansion> {
        let key = (p.clone(), c);
        if !self.store.contains_key(&key) {
            let th = theta_retry(self.d, p, &self.points[c], c, self.k)?;
            self.store.insert(key.clone(), th);
        }
        Ok(&self.store[&key])
    }
}

/// Theta at `q`, or at a nearby point of the same chamber when a backward
/// ray from `q` meets the origin. Both give the same expansion.
pub fn theta_in_chamber(d: &QDiagram, p: &LatticeVec, q: &Point, k: u32) -> Result<ThetaExpansion> {
    theta_retry(d, p, q, chamber_index(d, q), k)
}

/// Theta at `q`, moving `q` within its chamber if a backward ray meets the origin.
fn theta_retry(d: &QDiagram, p: &LatticeVec, q: &Point, c: usize, k: u32) -> Result<ThetaExpansion> {
    match theta(d, p, q, k) {
        Err(Error::ThroughOrigin) => {}
        other => return other,
    }
    let rot: Point = [-q[1].clone(), q[0].clone()];
    for j in 3..60i64 {
        let t = BigRational::new(BigInt::from(1), BigInt::from(j * j));
        let q2: Point = [&q[0] + &t * &rot[0], &q[1] + &t * &rot[1]];
        if check_generic(d, &q2).is_err() || chamber_index(d, &q2) != c {
            continue;
        }
        match theta(d, p, &q2, k) {
            Err(Error::ThroughOrigin) => continue,
            other => return other,
        }
    }
    Err(Error::ThroughOrigin)
}

/// Expands a series `f` (in the chart of `Q`) in the theta basis by repeatedly
/// subtracting `c theta_q` for a lowest-order term `c z^q`.
pub fn expand_in_theta_basis(d: &QDiagram, f: &QSeries, q: &Point) -> Result<BTreeMap<LatticeVec, LaurentPoly>> {
    let mut rest = f.clone();
    let mut out = BTreeMap::new();
    let k = f.max_order();
    loop {
        let Some((key, c)) = rest.keyed_terms().iter().min_by_key(|(kk, _)| (order_key(kk), (*kk).clone())).map(|(a, b)| (a.clone(), b.clone())) else {
            break;
        };
        let qv = rest.exponent(&key);
        let room = k - order_key(&key) as u32;
        let th = theta(d, &qv, q, room)?;
        let sub = th.terms.scale(&c).rebase(rest.base())?.truncate(k);
        rest = rest.sub(&sub)?;
        if rest.keyed_terms().contains_key(&key) {
            return Err(Error::Internal(format!("triangular step did not clear z^{qv}")));
        }
        let ci = c.to_integer().ok_or_else(|| Error::Inexact(format!("theta coefficient {c} at {qv}")))?;
        out.insert(qv, ci);
    }
    Ok(out)
}

/// Structure constants `alpha(p1, p2; p)` for all `p` with `p - p1 - p2` in
/// the cone of order at most `k`: the `z^p` coefficient of
/// `theta_{p1,Q} theta_{p2,Q}` with `Q` close to `phi(p)`. When `phi(p) = 0`
/// the constant is read off the theta-basis expansion of the product instead.
pub fn structure_constants(d: &QDiagram, p1: &LatticeVec, p2: &LatticeVec, k: u32) -> Result<BTreeMap<LatticeVec, LaurentPoly>> {
    let lat = d.lattice().clone();
    let base = p1 + p2;
    let targets: Vec<LatticeVec> = keys_up_to(lat.sigma_gens().len(), k).iter().map(|key| &base + &lat.from_gen_coords(key)).collect();
    // group targets by chamber
    let mut by_chamber: BTreeMap<usize, Vec<LatticeVec>> = BTreeMap::new();
    let mut central: Vec<LatticeVec> = Vec::new();
    for p in &targets {
        match point_near(d, p) {
            Some(q) => by_chamber.entry(chamber_index(d, &q)).or_default().push(p.clone()),
            None => central.push(p.clone()),
        }
    }
    let chambers: Vec<(usize, Vec<LatticeVec>)> = by_chamber.into_iter().collect();
    let results: Vec<Result<Vec<(LatticeVec, LaurentPoly)>>> = chambers
        .par_iter()
        .map(|(c, ps)| {
            let q = chamber_point(d, *c)?;
            let t1 = theta_retry(d, p1, &q, *c, k)?;
            let t2 = theta_retry(d, p2, &q, *c, k)?;
            let prod = t1.terms.qmul(&t2.terms)?;
            ps.iter()
                .map(|p| {
                    let c = prod.coeff(p);
                    let ci = c.to_integer().ok_or_else(|| Error::Inexact(format!("structure constant at {p}: {c}")))?;
                    Ok((p.clone(), ci))
                })
                .collect()
        })
        .collect();
    let mut out = BTreeMap::new();
    for r in results {
        for (p, c) in r? {
            if !c.is_zero() {
                out.insert(p, c);
            }
        }
    }
    if !central.is_empty() {
        let q = chamber_point(d, 0)?;
        let t1 = theta_retry(d, p1, &q, 0, k)?;
        let t2 = theta_retry(d, p2, &q, 0, k)?;
        let prod = t1.terms.qmul(&t2.terms)?;
        let exp = expand_in_theta_basis(d, &prod, &q)?;
        for p in central {
            if let Some(c) = exp.get(&p) {
                if !c.is_zero() {
                    out.insert(p, c.clone());
                }
            }
        }
    }
    Ok(out)
}

/// Applies a linear map on exponents to every term of a series, rebasing at `new_base`.
pub fn map_exponents<F: crate::qtorus::Flavor>(
    s: &Series<F>,
    lattice: Arc<crate::lattice::QLattice>,
    new_base: LatticeVec,
    max_order: u32,
    f: impl Fn(&LatticeVec) -> LatticeVec,
) -> Result<Series<F>> {
    Series::from_terms(lattice, new_base, max_order, s.terms().map(|(v, c)| (f(&v), c.clone())))
}
