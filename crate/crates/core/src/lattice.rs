//! Lattices with a skew-symmetric rational form, a simplicial positive cone and
//! an integrality sublattice, plus the planar chart used for every 2-plane
//! computation of the engine.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign, Index, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde_json::{json, Value};

use crate::error::{Error, Result};

/// An integer vector of an ambient lattice.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct LatticeVec(pub Vec<i64>);

impl LatticeVec {
    pub fn new(coords: Vec<i64>) -> Self {
        LatticeVec(coords)
    }

    pub fn zero(rank: usize) -> Self {
        LatticeVec(vec![0; rank])
    }

    /// The `i`-th standard basis vector of `Z^rank`.
    pub fn basis(rank: usize, i: usize) -> Self {
        let mut v = vec![0; rank];
        v[i] = 1;
        LatticeVec(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&x| x == 0)
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    pub fn scale(&self, k: i64) -> Self {
        LatticeVec(self.0.iter().map(|x| x * k).collect())
    }

    /// `self + k * other`.
    pub fn add_scaled(&self, k: i64, other: &Self) -> Self {
        LatticeVec(self.0.iter().zip(&other.0).map(|(a, b)| a + k * b).collect())
    }

    pub fn dot(&self, other: &Self) -> i64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    /// Index of the vector: the gcd of its coordinates.
    pub fn index(&self) -> Result<i64> {
        index(self)
    }

    pub fn to_json(&self) -> Value {
        json!(self.0)
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let arr = v.as_array().ok_or_else(|| Error::Parse(format!("expected an integer array, got {v}")))?;
        arr.iter()
            .map(|x| x.as_i64().ok_or_else(|| Error::Parse(format!("non-integer coordinate {x}"))))
            .collect::<Result<Vec<_>>>()
            .map(LatticeVec)
    }
}

impl fmt::Display for LatticeVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, x) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{x}")?;
        }
        write!(f, ")")
    }
}

impl Index<usize> for LatticeVec {
    type Output = i64;
    fn index(&self, i: usize) -> &i64 {
        &self.0[i]
    }
}

impl From<Vec<i64>> for LatticeVec {
    fn from(v: Vec<i64>) -> Self {
        LatticeVec(v)
    }
}

impl<const N: usize> From<[i64; N]> for LatticeVec {
    fn from(v: [i64; N]) -> Self {
        LatticeVec(v.to_vec())
    }
}

impl Add<&LatticeVec> for &LatticeVec {
    type Output = LatticeVec;
    fn add(self, rhs: &LatticeVec) -> LatticeVec {
        assert_eq!(self.len(), rhs.len(), "lattice vectors of different rank");
        LatticeVec(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl Add for LatticeVec {
    type Output = LatticeVec;
    fn add(self, rhs: LatticeVec) -> LatticeVec {
        &self + &rhs
    }
}

impl AddAssign<&LatticeVec> for LatticeVec {
    fn add_assign(&mut self, rhs: &LatticeVec) {
        for (a, b) in self.0.iter_mut().zip(&rhs.0) {
            *a += b;
        }
    }
}

impl Sub<&LatticeVec> for &LatticeVec {
    type Output = LatticeVec;
    fn sub(self, rhs: &LatticeVec) -> LatticeVec {
        assert_eq!(self.len(), rhs.len(), "lattice vectors of different rank");
        LatticeVec(self.0.iter().zip(&rhs.0).map(|(a, b)| a - b).collect())
    }
}

impl Sub for LatticeVec {
    type Output = LatticeVec;
    fn sub(self, rhs: LatticeVec) -> LatticeVec {
        &self - &rhs
    }
}

impl Neg for &LatticeVec {
    type Output = LatticeVec;
    fn neg(self) -> LatticeVec {
        LatticeVec(self.0.iter().map(|x| -x).collect())
    }
}

impl Neg for LatticeVec {
    type Output = LatticeVec;
    fn neg(self) -> LatticeVec {
        -&self
    }
}

impl Mul<&LatticeVec> for i64 {
    type Output = LatticeVec;
    fn mul(self, rhs: &LatticeVec) -> LatticeVec {
        rhs.scale(self)
    }
}

/// gcd of the coordinates of a nonzero vector.
pub fn index(v: &LatticeVec) -> Result<i64> {
    let g = v.0.iter().fold(0i64, |g, x| g.gcd(x));
    if g == 0 {
        Err(Error::InvalidArgument("the zero vector has no index".into()))
    } else {
        Ok(g)
    }
}

/// Exact rational matrix helpers used for small solves.
pub mod linalg {
    use super::*;

    pub type QMatrix = Vec<Vec<BigRational>>;

    pub fn to_q(m: &[Vec<i64>]) -> QMatrix {
        m.iter().map(|r| r.iter().map(|&x| BigRational::from_integer(x.into())).collect()).collect()
    }

    /// Reduced row echelon form in place; returns the pivot columns.
    pub fn rref(m: &mut QMatrix) -> Vec<usize> {
        let rows = m.len();
        let cols = if rows == 0 { 0 } else { m[0].len() };
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..cols {
            if r == rows {
                break;
            }
            let Some(p) = (r..rows).find(|&i| !m[i][c].is_zero()) else { continue };
            m.swap(r, p);
            let inv = m[r][c].recip();
            for x in m[r].iter_mut() {
                *x = &*x * &inv;
            }
            for i in 0..rows {
                if i != r && !m[i][c].is_zero() {
                    let f = m[i][c].clone();
                    for j in 0..cols {
                        let d = &m[r][j] * &f;
                        m[i][j] = &m[i][j] - d;
                    }
                }
            }
            pivots.push(c);
            r += 1;
        }
        pivots
    }

    pub fn rank(m: &[Vec<i64>]) -> usize {
        let mut q = to_q(m);
        rref(&mut q).len()
    }

    /// Solves `cols * x = target` where `cols` are the column vectors.
    /// Returns `None` when there is no solution; assumes the columns are independent.
    pub fn solve_columns(cols: &[LatticeVec], target: &LatticeVec) -> Option<Vec<BigRational>> {
        let r = target.len();
        let k = cols.len();
        let mut aug: QMatrix = (0..r)
            .map(|i| {
                let mut row: Vec<BigRational> =
                    cols.iter().map(|c| BigRational::from_integer(c[i].into())).collect();
                row.push(BigRational::from_integer(target[i].into()));
                row
            })
            .collect();
        let pivots = rref(&mut aug);
        if pivots.contains(&k) {
            return None;
        }
        let mut x = vec![BigRational::zero(); k];
        for (row, &c) in pivots.iter().enumerate() {
            x[c] = aug[row][k].clone();
        }
        Some(x)
    }

    pub fn identity(n: usize) -> QMatrix {
        (0..n)
            .map(|i| (0..n).map(|j| if i == j { BigRational::one() } else { BigRational::zero() }).collect())
            .collect()
    }

    pub fn transpose(m: &QMatrix) -> QMatrix {
        let cols = m.first().map_or(0, Vec::len);
        (0..cols).map(|j| m.iter().map(|r| r[j].clone()).collect()).collect()
    }

    pub fn matmul(a: &QMatrix, b: &QMatrix) -> QMatrix {
        let inner = b.len();
        let cols = b.first().map_or(0, Vec::len);
        a.iter()
            .map(|r| {
                (0..cols)
                    .map(|j| (0..inner).fold(BigRational::zero(), |acc, k| acc + &r[k] * &b[k][j]))
                    .collect()
            })
            .collect()
    }

    pub fn mat_vec(a: &QMatrix, x: &[BigRational]) -> Vec<BigRational> {
        a.iter().map(|r| r.iter().zip(x).fold(BigRational::zero(), |acc, (p, q)| acc + p * q)).collect()
    }

    /// Inverse of a square matrix, `None` when singular.
    pub fn inverse(m: &QMatrix) -> Option<QMatrix> {
        let n = m.len();
        let mut aug: QMatrix = m
            .iter()
            .zip(identity(n))
            .map(|(r, e)| r.iter().cloned().chain(e).collect())
            .collect();
        let pivots = rref(&mut aug);
        if pivots.len() < n || pivots[n - 1] != n - 1 {
            return None;
        }
        Some(aug.into_iter().map(|r| r[n..].to_vec()).collect())
    }

    pub fn det(m: &QMatrix) -> BigRational {
        let n = m.len();
        let mut a = m.clone();
        let mut d = BigRational::one();
        for c in 0..n {
            let Some(p) = (c..n).find(|&i| !a[i][c].is_zero()) else { return BigRational::zero() };
            if p != c {
                a.swap(p, c);
                d = -d;
            }
            d = &d * &a[c][c];
            for i in c + 1..n {
                if !a[i][c].is_zero() {
                    let f = &a[i][c] / &a[c][c];
                    for j in c..n {
                        let s = &a[c][j] * &f;
                        a[i][j] = &a[i][j] - s;
                    }
                }
            }
        }
        d
    }

    /// A basis of the right kernel `{x : m x = 0}`.
    pub fn nullspace(m: &QMatrix) -> Vec<Vec<BigRational>> {
        let cols = m.first().map_or(0, Vec::len);
        let mut a = m.clone();
        let pivots = rref(&mut a);
        (0..cols)
            .filter(|c| !pivots.contains(c))
            .map(|free| {
                let mut x = vec![BigRational::zero(); cols];
                x[free] = BigRational::one();
                for (row, &pc) in pivots.iter().enumerate() {
                    x[pc] = -a[row][free].clone();
                }
                x
            })
            .collect()
    }

    /// A basis of the subgroup of `Z^n` generated by `rows`, in echelon form.
    pub fn integer_row_basis(rows: &[Vec<i64>]) -> Vec<Vec<i64>> {
        let mut a: Vec<Vec<i64>> = rows.iter().filter(|r| r.iter().any(|&x| x != 0)).cloned().collect();
        let cols = a.first().map_or(0, Vec::len);
        let mut out = Vec::new();
        for c in 0..cols {
            // Euclid on column c among the remaining rows.
            loop {
                let nz: Vec<usize> = (0..a.len()).filter(|&i| a[i][c] != 0).collect();
                if nz.len() <= 1 {
                    break;
                }
                let p = *nz.iter().min_by_key(|&&i| a[i][c].abs()).expect("nonempty");
                for &i in &nz {
                    if i != p {
                        let f = a[i][c] / a[p][c];
                        let prow = a[p].clone();
                        for (x, y) in a[i].iter_mut().zip(&prow) {
                            *x -= f * y;
                        }
                    }
                }
            }
            if let Some(p) = (0..a.len()).find(|&i| a[i][c] != 0) {
                let mut row = a.remove(p);
                if row[c] < 0 {
                    row.iter_mut().for_each(|x| *x = -*x);
                }
                out.push(row);
            }
            a.retain(|r| r.iter().any(|&x| x != 0));
        }
        out
    }
}

/// A lattice `Z^rank` with skew form `omega = omega_num / denom`, a simplicial
/// cone generated by `sigma_gens`, and a sublattice `L0` on which the form pairs
/// integrally with the whole lattice.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QLattice {
    rank: usize,
    denom: i64,
    omega_num: Vec<Vec<i64>>,
    sigma_gens: Vec<LatticeVec>,
    l0_basis: Vec<LatticeVec>,
}

impl QLattice {
    pub fn new(
        omega_num: Vec<Vec<i64>>,
        denom: i64,
        sigma_gens: Vec<LatticeVec>,
        l0_basis: Vec<LatticeVec>,
    ) -> Result<Self> {
        let rank = omega_num.len();
        if denom < 1 {
            return Err(Error::Lattice(format!("form denominator {denom} must be positive")));
        }
        for row in &omega_num {
            if row.len() != rank {
                return Err(Error::DimensionMismatch { expected: rank, got: row.len() });
            }
        }
        for i in 0..rank {
            for j in 0..rank {
                if omega_num[i][j] != -omega_num[j][i] {
                    return Err(Error::Lattice(format!("form is not skew-symmetric at ({i},{j})")));
                }
            }
        }
        for v in sigma_gens.iter().chain(&l0_basis) {
            if v.len() != rank {
                return Err(Error::DimensionMismatch { expected: rank, got: v.len() });
            }
        }
        if sigma_gens.iter().any(LatticeVec::is_zero) {
            return Err(Error::Lattice("cone generators must be nonzero".into()));
        }
        // Independent generators give a simplicial, hence strongly convex, cone.
        let gens: Vec<Vec<i64>> = sigma_gens.iter().map(|v| v.0.clone()).collect();
        if linalg::rank(&gens) != sigma_gens.len() {
            return Err(Error::Lattice("cone generators must be linearly independent".into()));
        }
        let l0: Vec<Vec<i64>> = l0_basis.iter().map(|v| v.0.clone()).collect();
        if linalg::rank(&l0) != rank {
            return Err(Error::Lattice("L0 basis must have full rank".into()));
        }
        let lat = QLattice { rank, denom, omega_num, sigma_gens, l0_basis };
        for u in &lat.l0_basis {
            for j in 0..rank {
                if lat.omega_numerator(u, &LatticeVec::basis(rank, j)) % denom != 0 {
                    return Err(Error::Lattice(format!("omega({u}, e_{j}) is not an integer")));
                }
            }
        }
        for g in &lat.sigma_gens {
            if linalg::solve_columns(&lat.l0_basis, g).is_none_or(|x| !x.iter().all(BigRational::is_integer)) {
                return Err(Error::Lattice(format!("cone generator {g} is not in L0")));
            }
        }
        Ok(lat)
    }

    /// `Z^rank` with an integral form, the standard cone and `L0 = L`.
    pub fn standard(omega: Vec<Vec<i64>>) -> Result<Self> {
        let r = omega.len();
        let basis: Vec<LatticeVec> = (0..r).map(|i| LatticeVec::basis(r, i)).collect();
        Self::new(omega, 1, basis.clone(), basis)
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn denom(&self) -> i64 {
        self.denom
    }

    pub fn omega_matrix(&self) -> &[Vec<i64>] {
        &self.omega_num
    }

    pub fn sigma_gens(&self) -> &[LatticeVec] {
        &self.sigma_gens
    }

    pub fn l0_basis(&self) -> &[LatticeVec] {
        &self.l0_basis
    }

    fn check_dim(&self, v: &LatticeVec) -> Result<()> {
        if v.len() == self.rank {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected: self.rank, got: v.len() })
        }
    }

    /// `denom * omega(a, b)` (no dimension check).
    pub fn omega_numerator(&self, a: &LatticeVec, b: &LatticeVec) -> i64 {
        let mut s = 0;
        for (i, ai) in a.0.iter().enumerate() {
            if *ai == 0 {
                continue;
            }
            let row = &self.omega_num[i];
            for (j, bj) in b.0.iter().enumerate() {
                s += ai * row[j] * bj;
            }
        }
        s
    }

    /// Exact value of `omega(a, b)`.
    pub fn pair_omega(&self, a: &LatticeVec, b: &LatticeVec) -> Result<BigRational> {
        self.check_dim(a)?;
        self.check_dim(b)?;
        Ok(BigRational::new(self.omega_numerator(a, b).into(), self.denom.into()))
    }

    /// `omega(a, b)` as an integer, failing when it is not integral.
    pub fn pair_omega_int(&self, a: &LatticeVec, b: &LatticeVec) -> Result<i64> {
        self.check_dim(a)?;
        self.check_dim(b)?;
        let num = self.omega_numerator(a, b);
        if num % self.denom != 0 {
            return Err(Error::Inexact(format!("omega({a}, {b}) = {num}/{} is not an integer", self.denom)));
        }
        Ok(num / self.denom)
    }

    /// Rational coordinates of `v` in the cone generators, if `v` lies in their span.
    pub fn gen_coords_rational(&self, v: &LatticeVec) -> Result<Option<Vec<BigRational>>> {
        self.check_dim(v)?;
        Ok(linalg::solve_columns(&self.sigma_gens, v))
    }

    /// Integer coordinates of `v` in the cone generators, if it lies in the
    /// lattice they generate.
    pub fn gen_coords(&self, v: &LatticeVec) -> Result<Option<Vec<i64>>> {
        let Some(x) = self.gen_coords_rational(v)? else { return Ok(None) };
        if !x.iter().all(BigRational::is_integer) {
            return Ok(None);
        }
        Ok(Some(x.iter().map(|c| i64::try_from(c.to_integer()).expect("coordinate fits in i64")).collect()))
    }

    /// The vector `sum_i c_i g_i` for generator coordinates `c`.
    pub fn from_gen_coords(&self, c: &[i64]) -> LatticeVec {
        let mut v = LatticeVec::zero(self.rank);
        for (ci, g) in c.iter().zip(&self.sigma_gens) {
            if *ci != 0 {
                v = v.add_scaled(*ci, g);
            }
        }
        v
    }

    /// True when `v` lies in the real cone spanned by the generators.
    pub fn in_cone(&self, v: &LatticeVec) -> Result<bool> {
        Ok(self.gen_coords_rational(v)?.is_some_and(|x| x.iter().all(|c| !c.is_negative())))
    }

    /// Order of `v`: the generator-coordinate sum, defined for lattice points of the cone.
    pub fn order(&self, v: &LatticeVec) -> Result<u64> {
        match self.gen_coords(v)? {
            Some(c) if c.iter().all(|&x| x >= 0) => Ok(c.iter().map(|&x| x as u64).sum()),
            _ => Err(Error::NotInCone(v.to_string())),
        }
    }

    /// Builds the planar chart for a family of directions spanning a 2-plane.
    pub fn plane_reduce(&self, dirs: &[LatticeVec]) -> Result<PlaneChart> {
        for d in dirs {
            self.check_dim(d)?;
        }
        let m: Vec<Vec<i64>> = dirs.iter().map(|v| v.0.clone()).collect();
        let r = linalg::rank(&m);
        if r != 2 {
            return Err(Error::InvalidArgument(format!("directions span a space of dimension {r}, not 2")));
        }
        let v1 = dirs.iter().find(|d| !d.is_zero()).expect("rank 2 implies a nonzero direction").clone();
        let v2 = dirs
            .iter()
            .find(|d| linalg::rank(&[v1.0.clone(), d.0.clone()]) == 2)
            .expect("rank 2 implies a second independent direction")
            .clone();
        PlaneChart::new(self, v1, v2)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "rank": self.rank,
            "D": self.denom,
            "omega_numerators": self.omega_num,
            "sigma_gens": self.sigma_gens.iter().map(LatticeVec::to_json).collect::<Vec<_>>(),
            "L0_basis": self.l0_basis.iter().map(LatticeVec::to_json).collect::<Vec<_>>(),
        })
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let field = |k: &str| v.get(k).ok_or_else(|| Error::Parse(format!("lattice is missing `{k}`")));
        let denom = v.get("D").and_then(Value::as_i64).unwrap_or(1);
        let omega = field("omega_numerators")?
            .as_array()
            .ok_or_else(|| Error::Parse("omega_numerators must be a matrix".into()))?
            .iter()
            .map(|row| LatticeVec::from_json(row).map(|r| r.0))
            .collect::<Result<Vec<_>>>()?;
        let vecs = |k: &str| -> Result<Vec<LatticeVec>> {
            field(k)?
                .as_array()
                .ok_or_else(|| Error::Parse(format!("`{k}` must be a list of vectors")))?
                .iter()
                .map(LatticeVec::from_json)
                .collect()
        };
        let gens = vecs("sigma_gens")?;
        let l0 = if v.get("L0_basis").is_some() {
            vecs("L0_basis")?
        } else {
            (0..omega.len()).map(|i| LatticeVec::basis(omega.len(), i)).collect()
        };
        let lat = Self::new(omega, denom, gens, l0)?;
        if let Some(r) = v.get("rank").and_then(Value::as_u64) {
            if r as usize != lat.rank {
                return Err(Error::DimensionMismatch { expected: r as usize, got: lat.rank });
            }
        }
        Ok(lat)
    }
}

/// A point of the chart plane with exact rational coordinates.
pub type Point = [BigRational; 2];

pub fn point(x: i64, y: i64) -> Point {
    [BigRational::from_integer(x.into()), BigRational::from_integer(y.into())]
}

pub fn point_q(xn: i64, xd: i64, yn: i64, yd: i64) -> Point {
    [BigRational::new(xn.into(), xd.into()), BigRational::new(yn.into(), yd.into())]
}

pub fn point_of(v: [i64; 2]) -> Point {
    point(v[0], v[1])
}

/// `a.x * b.y - a.y * b.x`.
pub fn cross(a: &Point, b: &Point) -> BigRational {
    &a[0] * &b[1] - &a[1] * &b[0]
}

/// Upper half (angle in `[0, pi)`) versus lower half (angle in `[pi, 2 pi)`).
fn upper_half(p: &Point) -> bool {
    p[1].is_positive() || (p[1].is_zero() && p[0].is_positive())
}

/// Compares the counterclockwise angles of two nonzero vectors measured from
/// the positive first axis, in `[0, 2 pi)`.
pub fn angle_cmp(a: &Point, b: &Point) -> Ordering {
    match (upper_half(a), upper_half(b)) {
        (true, false) => Ordering::Less,
        (false, true) => Ordering::Greater,
        _ => BigRational::zero().cmp(&cross(a, b)),
    }
}

/// True when the two nonzero vectors point in the same direction.
pub fn same_ray(a: &Point, b: &Point) -> bool {
    cross(a, b).is_zero() && (&a[0] * &b[0] + &a[1] * &b[1]).is_positive()
}

/// Intersection of the ray `y + s w` (`s > 0`) with the ray `lambda u` (`lambda >= 0`).
/// Returns `(s, lambda)`, or `None` when they do not meet or are parallel.
pub fn ray_hits_ray(y: &Point, w: &Point, u: &Point) -> Option<(BigRational, BigRational)> {
    let den = cross(w, u);
    if den.is_zero() {
        return None;
    }
    // y + s w = lambda u  =>  s = cross(u, y)/cross(w, u), lambda = cross(y, w)/cross(u, w)
    let s = cross(u, y) / &den;
    let lambda = cross(y, w) / (-&den);
    (s.is_positive() && !lambda.is_negative()).then_some((s, lambda))
}

/// Rational coordinates of `v` in the basis `v1, v2` when it lies in their span.
fn plane_coords(v1: &LatticeVec, v2: &LatticeVec, v: &LatticeVec) -> Option<[BigRational; 2]> {
    linalg::solve_columns(&[v1.clone(), v2.clone()], v).map(|x| [x[0].clone(), x[1].clone()])
}

/// Planar chart `phi(x) = D * (omega(v1, x), omega(v2, x))` of a 2-plane spanned
/// by `v1, v2`. The wall of a direction `a v1 + b v2` is the line
/// `a y1 + b y2 = 0`; its outgoing ray is `phi(-v) = (-b n, a n)` with
/// `n = D * omega(v1, v2)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlaneChart {
    v1: LatticeVec,
    v2: LatticeVec,
    row1: Vec<i64>,
    row2: Vec<i64>,
    n: i64,
    integral: bool,
}

impl PlaneChart {
    pub fn new(lat: &QLattice, v1: LatticeVec, v2: LatticeVec) -> Result<Self> {
        lat.check_dim(&v1)?;
        lat.check_dim(&v2)?;
        let n = lat.omega_numerator(&v1, &v2);
        if n == 0 {
            return Err(Error::InvalidArgument(format!("omega vanishes on the plane spanned by {v1} and {v2}")));
        }
        let row = |v: &LatticeVec| -> Vec<i64> {
            (0..lat.rank).map(|j| lat.omega_numerator(v, &LatticeVec::basis(lat.rank, j))).collect()
        };
        let (row1, row2) = (row(&v1), row(&v2));
        let d = lat.denom;
        let integral = row1.iter().chain(&row2).all(|x| x % d == 0);
        // When both basis vectors pair integrally the chart is unscaled.
        let (row1, row2, n) = if integral {
            (row1.iter().map(|x| x / d).collect(), row2.iter().map(|x| x / d).collect(), n / d)
        } else {
            (row1, row2, n)
        };
        Ok(PlaneChart { v1, v2, row1, row2, n, integral })
    }

    pub fn v1(&self) -> &LatticeVec {
        &self.v1
    }

    pub fn v2(&self) -> &LatticeVec {
        &self.v2
    }

    /// `omega(v1, v2)` in chart units.
    pub fn n(&self) -> i64 {
        self.n
    }

    /// True when the chart coordinates are the literal values `omega(v_i, x)`.
    pub fn is_unscaled(&self) -> bool {
        self.integral
    }

    /// Chart image of a lattice vector.
    pub fn phi(&self, x: &LatticeVec) -> [i64; 2] {
        let dot = |r: &[i64]| r.iter().zip(&x.0).map(|(a, b)| a * b).sum::<i64>();
        [dot(&self.row1), dot(&self.row2)]
    }

    pub fn phi_point(&self, x: &LatticeVec) -> Point {
        point_of(self.phi(x))
    }

    /// Coordinates `(a, b)` of `v = a v1 + b v2`, if `v` lies in the plane.
    pub fn span_coords(&self, v: &LatticeVec) -> Option<[BigRational; 2]> {
        plane_coords(&self.v1, &self.v2, v)
    }

    /// Outgoing ray direction `phi(-v)` of a plane direction `v = a v1 + b v2`.
    pub fn outgoing_ray(&self, ab: [i64; 2]) -> [i64; 2] {
        [-ab[1] * self.n, ab[0] * self.n]
    }

    /// Sign of `omega(v, x)` for `v = a v1 + b v2`, read off the chart image of `x`.
    pub fn side(&self, ab: [i64; 2], y: &Point) -> i32 {
        let s = BigRational::from_integer(ab[0].into()) * &y[0] + BigRational::from_integer(ab[1].into()) * &y[1];
        sign_of(&s)
    }

    /// Crossing sign `sign omega(v, -gamma')` for a path with chart tangent `d`.
    pub fn crossing_sign(&self, ab: [i64; 2], d: &Point) -> i32 {
        -self.side(ab, d)
    }

    pub fn to_json(&self) -> Value {
        json!({ "v1": self.v1.to_json(), "v2": self.v2.to_json(), "n": self.n })
    }
}

pub(crate) fn sign_of(x: &BigRational) -> i32 {
    if x.is_positive() {
        1
    } else if x.is_negative() {
        -1
    } else {
        0
    }
}

/// Rational number `num/den` as a [`BigRational`].
pub fn q(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}
