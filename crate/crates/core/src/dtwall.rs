//! Refined DT invariants read off completed two-wall diagrams, with the
//! positivity, parity, degree and Lefschetz verdicts evaluated per entry.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_integer::Integer;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::lattice::QLattice;
use crate::laurent::{LaurentPoly, Parity};
use crate::qtorus::RayFunction;
use crate::scattering::QDiagram;

/// The lattice `Z^2` with `omega(v1, v2) = n`.
pub fn kronecker_lattice(n: i64) -> Result<Arc<QLattice>> {
    if n <= 0 {
        return Err(Error::InvalidArgument(format!("Kronecker parameter must be positive, got {n}")));
    }
    Ok(Arc::new(QLattice::standard(vec![vec![0, n], vec![-n, 0]])?))
}

/// Initial data `EE(-t^{m1} z^{v1})`, `EE(-t^{m2} z^{v2})` on the lattice of
/// [`kronecker_lattice`], truncated at order `k` and not yet completed.
pub fn kronecker_setup(n: i64, shift1: i64, shift2: i64, k: u32) -> Result<QDiagram> {
    two_wall_setup(n, &LaurentPoly::t_pow(shift1, 1), &LaurentPoly::t_pow(shift2, 1), k)
}

/// Initial data `EE(-p1 z^{v1})`, `EE(-p2 z^{v2})` with `omega(v1, v2) = n`.
pub fn two_wall_setup(n: i64, p1: &LaurentPoly, p2: &LaurentPoly, k: u32) -> Result<QDiagram> {
    let mut d = QDiagram::new(kronecker_lattice(n)?, k)?;
    d.add_line(&RayFunction::ee(vec![1, 0], 1, p1, k)?)?;
    d.add_line(&RayFunction::ee(vec![0, 1], 1, p2, k)?)?;
    Ok(d)
}

/// `chi(v, v) = a^2 + b^2 - n a b` for the `n`-Kronecker quiver.
pub fn euler_form(n: i64, v: [i64; 2]) -> i64 {
    let [a, b] = v;
    a * a + b * b - n * a * b
}

/// Checks attached to one invariant.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Verdicts {
    pub positivity: bool,
    /// `Omega = 0`, or its parity is `1 + lambda(a, a)` mod 2.
    pub parity: bool,
    /// `Omega = t^{chi-1}(1 + g)`, `g` in `t Z>=0[t]` of degree at most
    /// `2(1 - chi)`; evaluated only for unshifted inputs.
    pub degree: Option<bool>,
    /// Lefschetz type; evaluated only for unshifted inputs.
    pub lefschetz: Option<bool>,
}

impl Verdicts {
    pub fn all_pass(&self) -> bool {
        self.positivity && self.parity && self.degree != Some(false) && self.lefschetz != Some(false)
    }
}

/// One dimension vector `(a, b)` with its invariant.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DTEntry {
    pub a: i64,
    pub b: i64,
    pub chi: i64,
    /// EE-factor of the wall on the outgoing ray of direction `a v1 + b v2`.
    pub omega: LaurentPoly,
    /// `omega * t^{-(a m1 + b m2)}` when both inputs are monomials `t^{m_i}`.
    pub unshifted: Option<LaurentPoly>,
    pub verdicts: Verdicts,
}

impl DTEntry {
    /// `chi < 0`: the vector lies strictly inside the cone where walls are dense.
    pub fn in_dense_region(&self) -> bool {
        self.chi < 0
    }
}

/// Invariants of a completed two-wall diagram, up to its truncation order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DTReport {
    pub n: i64,
    pub order: u32,
    /// Input factors on `v1` and `v2`.
    pub inputs: [LaurentPoly; 2],
    /// Nonzero invariants, sorted by `(a + b, a)`.
    pub entries: Vec<DTEntry>,
}

fn input_monomial_shift(p: &LaurentPoly) -> Option<i64> {
    let mut it = p.terms();
    let (e, c) = it.next()?;
    (it.next().is_none() && c == &1.into() && e % p.denom() == 0).then(|| e / p.denom())
}

/// `lambda(e_i, e_i)`: 1 for an even input, 0 for an odd one.
fn lambda_diag(p: &LaurentPoly) -> Result<i64> {
    match p.parity() {
        Parity::Even => Ok(1),
        Parity::Odd => Ok(0),
        Parity::Mixed => Err(Error::InvalidArgument(format!("input factor {p} is neither even nor odd"))),
    }
}

fn degree_bound_holds(omega: &LaurentPoly, chi: i64) -> bool {
    let p = omega.reduced();
    if p.denom() != 1 || !p.is_positive() {
        return false;
    }
    match p.exponent_range() {
        Some((lo, hi)) => lo == chi - 1 && p.coeff_int(lo) == 1.into() && hi <= 1 - chi,
        None => true,
    }
}

/// Reads every EE-factor of a completed diagram built on two initial lines in
/// the directions `v1`, `v2` and evaluates the verdicts.
pub fn extract_dt(d: &QDiagram) -> Result<DTReport> {
    let lat = d.lattice();
    let n = lat.pair_omega_int(d.chart().v1(), d.chart().v2())?;
    let first = |ab: [i64; 2]| -> Result<LaurentPoly> {
        Ok(d.outgoing_ee(ab)?.get(&1).cloned().unwrap_or_else(LaurentPoly::zero))
    };
    let inputs = [first([1, 0])?, first([0, 1])?];
    let lam = [lambda_diag(&inputs[0])?, lambda_diag(&inputs[1])?];
    let shifts = [input_monomial_shift(&inputs[0]), input_monomial_shift(&inputs[1])];
    let unshifted_input = shifts == [Some(0), Some(0)];
    // lambda(e1, e2) = max(0, n), lambda(e2, e1) = max(0, -n)
    let lam12 = n.max(0) + (-n).max(0);
    let per_ray: Vec<Result<Vec<DTEntry>>> = d
        .rays()
        .par_iter()
        .filter(|r| r.ray == d.outgoing_ray(r.ab))
        .map(|r| {
            let mut out = Vec::new();
            for (j, omega) in d.outgoing_ee(r.ab)? {
                if omega.is_zero() {
                    continue;
                }
                let (a, b) = (j as i64 * r.ab[0], j as i64 * r.ab[1]);
                let chi = euler_form(n, [a, b]);
                let lambda_aa = lam[0] * a * a + lam12 * a * b + lam[1] * b * b;
                let parity = omega.parity().bit() == Some((1 + lambda_aa).rem_euclid(2));
                let verdicts = Verdicts {
                    positivity: omega.is_positive(),
                    parity,
                    degree: unshifted_input.then(|| degree_bound_holds(&omega, chi)),
                    lefschetz: unshifted_input.then(|| omega.lefschetz_decomposition().is_some()),
                };
                let unshifted = match shifts {
                    [Some(m1), Some(m2)] => Some(omega.shift(-(a * m1 + b * m2), 1)),
                    _ => None,
                };
                out.push(DTEntry { a, b, chi, omega, unshifted, verdicts });
            }
            Ok(out)
        })
        .collect();
    let mut entries = Vec::new();
    for r in per_ray {
        entries.extend(r?);
    }
    entries.sort_by_key(|e| (e.a + e.b, e.a));
    Ok(DTReport { n, order: d.max_order(), inputs, entries })
}

impl DTReport {
    /// `Omega_v`; zero when `v` is within the order but carries no wall,
    /// `None` past the truncation order or outside the cone.
    pub fn omega(&self, v: [i64; 2]) -> Option<LaurentPoly> {
        if v[0] < 0 || v[1] < 0 || v[0] + v[1] == 0 || (v[0] + v[1]) as u32 > self.order {
            return None;
        }
        Some(
            self.entries
                .iter()
                .find(|e| [e.a, e.b] == v)
                .map(|e| e.omega.clone())
                .unwrap_or_else(LaurentPoly::zero),
        )
    }

    pub fn all_pass(&self) -> bool {
        self.entries.iter().all(|e| e.verdicts.all_pass())
    }

    /// Nonzero entries with `chi < 0`.
    pub fn dense_region_witnesses(&self) -> Vec<&DTEntry> {
        self.entries.iter().filter(|e| e.in_dense_region()).collect()
    }

    /// Entries grouped by primitive direction, for display.
    pub fn by_direction(&self) -> BTreeMap<[i64; 2], Vec<&DTEntry>> {
        let mut m: BTreeMap<[i64; 2], Vec<&DTEntry>> = BTreeMap::new();
        for e in &self.entries {
            let g = e.a.gcd(&e.b);
            m.entry([e.a / g, e.b / g]).or_default().push(e);
        }
        m
    }

    pub fn to_json(&self) -> Value {
        let verdict = |v: Option<bool>| v.map_or(Value::Null, Value::Bool);
        json!({
            "n": self.n,
            "order": self.order,
            "inputs": [self.inputs[0].to_json(), self.inputs[1].to_json()],
            "entries": self.entries.iter().map(|e| json!({
                "a": e.a,
                "b": e.b,
                "chi": e.chi,
                "omega": e.omega.to_json(),
                "omega_text": e.omega.to_string(),
                "unshifted": e.unshifted.as_ref().map(LaurentPoly::to_string),
                "verdicts": {
                    "positivity": e.verdicts.positivity,
                    "parity": e.verdicts.parity,
                    "degree": verdict(e.verdicts.degree),
                    "lefschetz": verdict(e.verdicts.lefschetz),
                },
            })).collect::<Vec<_>>(),
        })
    }

    pub fn to_csv(&self) -> String {
        let verdict = |v: Option<bool>| v.map_or("n/a".to_string(), |b| b.to_string());
        let mut s = String::from("a,b,chi,omega,positivity,parity,degree,lefschetz\n");
        for e in &self.entries {
            s.push_str(&format!(
                "{},{},{},\"{}\",{},{},{},{}\n",
                e.a,
                e.b,
                e.chi,
                e.omega,
                e.verdicts.positivity,
                e.verdicts.parity,
                verdict(e.verdicts.degree),
                verdict(e.verdicts.lefschetz)
            ));
        }
        s
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("Kronecker n = {}, order {}\n", self.n, self.order);
        for e in &self.entries {
            let mark = if e.verdicts.all_pass() { "ok" } else { "FAIL" };
            s.push_str(&format!("({:>2},{:>2})  chi={:>4}  {:<4} {}\n", e.a, e.b, e.chi, mark, e.omega));
        }
        s
    }
}
