//! Laurent polynomials in a fractional power `t^{1/D}`.
//!
//! A [`Laurent`] stores integer exponent numerators over a fixed denominator
//! `D`, so `t^{e/D}` is the key `e`. Operands with different denominators are
//! rescaled to the lcm before any arithmetic. Equality is semantic: `t^{2/2}`
//! equals `t`.
//!
//! [`LaurentPoly`] (integer coefficients) carries the quantum symbols
//! `(a)_t`, `[a]_t`, `pl_n(t)`, quantum binomials, and the positivity, parity,
//! Lefschetz and pre-Lefschetz classifications. [`QLaurent`] (rational
//! coefficients) is used for logarithms of wall functions.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde_json::{json, Value};

use crate::error::{Error, Result};

/// Minimal ring interface shared by the coefficient types of the engine.
pub trait Coefficient: Clone + PartialEq + fmt::Debug + fmt::Display + Send + Sync + 'static {
    fn zero() -> Self;
    fn one() -> Self;
    fn is_zero(&self) -> bool;
    fn from_i64(n: i64) -> Self;
    fn add_ref(&self, other: &Self) -> Self;
    fn sub_ref(&self, other: &Self) -> Self;
    fn mul_ref(&self, other: &Self) -> Self;
    fn neg_ref(&self) -> Self;
    /// Exact quotient, or `None` when `other` does not divide `self`.
    fn div_exact(&self, other: &Self) -> Option<Self>;
    /// True when every scalar making up `self` is `>= 0`.
    fn is_nonnegative(&self) -> bool;
    fn to_json(&self) -> Value;
    fn from_json(v: &Value) -> Option<Self>;
}

impl Coefficient for BigInt {
    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        One::one()
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn from_i64(n: i64) -> Self {
        BigInt::from(n)
    }
    fn add_ref(&self, other: &Self) -> Self {
        self + other
    }
    fn sub_ref(&self, other: &Self) -> Self {
        self - other
    }
    fn mul_ref(&self, other: &Self) -> Self {
        self * other
    }
    fn neg_ref(&self) -> Self {
        -self
    }
    fn div_exact(&self, other: &Self) -> Option<Self> {
        if Zero::is_zero(other) {
            return None;
        }
        let (q, r) = self.div_rem(other);
        Zero::is_zero(&r).then_some(q)
    }
    fn is_nonnegative(&self) -> bool {
        !self.is_negative()
    }
    fn to_json(&self) -> Value {
        match self.to_i64() {
            Some(n) => json!(n),
            None => json!(self.to_string()),
        }
    }
    fn from_json(v: &Value) -> Option<Self> {
        match v {
            Value::Number(n) => n.as_i64().map(BigInt::from),
            Value::String(s) => s.parse().ok(),
            _ => None,
        }
    }
}

impl Coefficient for BigRational {
    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        One::one()
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn from_i64(n: i64) -> Self {
        BigRational::from_integer(BigInt::from(n))
    }
    fn add_ref(&self, other: &Self) -> Self {
        self + other
    }
    fn sub_ref(&self, other: &Self) -> Self {
        self - other
    }
    fn mul_ref(&self, other: &Self) -> Self {
        self * other
    }
    fn neg_ref(&self) -> Self {
        -self
    }
    fn div_exact(&self, other: &Self) -> Option<Self> {
        if Zero::is_zero(other) {
            None
        } else {
            Some(self / other)
        }
    }
    fn is_nonnegative(&self) -> bool {
        !self.is_negative()
    }
    fn to_json(&self) -> Value {
        if self.is_integer() {
            self.numer().to_json()
        } else {
            json!(self.to_string())
        }
    }
    fn from_json(v: &Value) -> Option<Self> {
        match v {
            Value::Number(n) => n.as_i64().map(|k| BigRational::from_integer(k.into())),
            Value::String(s) => s.parse().ok(),
            _ => None,
        }
    }
}

/// Laurent polynomial in `t^{1/D}` with coefficients in `C`.
#[derive(Clone, Debug)]
pub struct Laurent<C> {
    denom: i64,
    terms: BTreeMap<i64, C>,
}

/// Integer Laurent polynomial, the coefficient ring of the quantum torus.
pub type LaurentPoly = Laurent<BigInt>;
/// Rational Laurent polynomial, used for log-coordinates of group elements.
pub type QLaurent = Laurent<BigRational>;

fn lcm_i64(a: i64, b: i64) -> i64 {
    a.lcm(&b)
}

impl<C: Coefficient> Laurent<C> {
    /// Builds a polynomial from `(exponent numerator, coefficient)` pairs over `denom`.
    /// Repeated exponents are summed and zero coefficients dropped.
    pub fn from_terms<I: IntoIterator<Item = (i64, C)>>(denom: i64, terms: I) -> Self {
        assert!(denom >= 1, "denominator must be positive");
        let mut map: BTreeMap<i64, C> = BTreeMap::new();
        for (e, c) in terms {
            add_into(&mut map, e, &c);
        }
        Laurent { denom, terms: map }
    }

    pub fn zero() -> Self {
        Laurent { denom: 1, terms: BTreeMap::new() }
    }

    pub fn one() -> Self {
        Self::constant(C::one())
    }

    pub fn constant(c: C) -> Self {
        Self::from_terms(1, [(0, c)])
    }

    /// `c * t^e` with an integer exponent.
    pub fn monomial(c: C, e: i64) -> Self {
        Self::from_terms(1, [(e, c)])
    }

    /// `t^{num/den}`.
    pub fn t_pow(num: i64, den: i64) -> Self {
        assert!(den != 0, "zero denominator");
        let (num, den) = if den < 0 { (-num, -den) } else { (num, den) };
        Self::from_terms(den, [(num, C::one())])
    }

    pub fn denom(&self) -> i64 {
        self.denom
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.terms.len() == 1 && self.terms.get(&0).is_some_and(|c| *c == C::one())
    }

    /// Number of nonzero terms.
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    /// Iterates `(exponent numerator, coefficient)` in increasing exponent order.
    pub fn terms(&self) -> impl Iterator<Item = (i64, &C)> {
        self.terms.iter().map(|(e, c)| (*e, c))
    }

    /// Coefficient of `t^{num/den}`.
    pub fn coeff(&self, num: i64, den: i64) -> C {
        let scaled = num * self.denom;
        if scaled % den != 0 {
            return C::zero();
        }
        self.terms.get(&(scaled / den)).cloned().unwrap_or_else(C::zero)
    }

    /// Coefficient of `t^e` for an integer exponent.
    pub fn coeff_int(&self, e: i64) -> C {
        self.coeff(e, 1)
    }

    /// True when every exponent is an integer.
    pub fn has_integer_exponents(&self) -> bool {
        self.terms.keys().all(|e| e % self.denom == 0)
    }

    /// Same polynomial written over the denominator `d` (a multiple of the current one).
    pub fn with_denom(&self, d: i64) -> Self {
        assert!(d % self.denom == 0, "new denominator must be a multiple");
        let f = d / self.denom;
        Laurent { denom: d, terms: self.terms.iter().map(|(e, c)| (e * f, c.clone())).collect() }
    }

    /// Representation with the smallest possible denominator.
    pub fn reduced(&self) -> Self {
        let mut g = self.denom;
        for e in self.terms.keys() {
            g = g.gcd(e);
        }
        if g <= 1 {
            return self.clone();
        }
        Laurent { denom: self.denom / g, terms: self.terms.iter().map(|(e, c)| (e / g, c.clone())).collect() }
    }

    fn aligned(&self, other: &Self) -> (Self, Self) {
        if self.denom == other.denom {
            return (self.clone(), other.clone());
        }
        let d = lcm_i64(self.denom, other.denom);
        (self.with_denom(d), other.with_denom(d))
    }

    pub fn add_ref(&self, other: &Self) -> Self {
        if other.is_zero() {
            return self.clone();
        }
        if self.is_zero() {
            return other.clone();
        }
        let (mut a, b) = self.aligned(other);
        for (e, c) in &b.terms {
            add_into(&mut a.terms, *e, c);
        }
        a
    }

    pub fn neg_ref(&self) -> Self {
        Laurent { denom: self.denom, terms: self.terms.iter().map(|(e, c)| (*e, c.neg_ref())).collect() }
    }

    pub fn sub_ref(&self, other: &Self) -> Self {
        self.add_ref(&other.neg_ref())
    }

    pub fn mul_ref(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        let (a, b) = self.aligned(other);
        let mut out = BTreeMap::new();
        for (ea, ca) in &a.terms {
            for (eb, cb) in &b.terms {
                add_into(&mut out, ea + eb, &ca.mul_ref(cb));
            }
        }
        Laurent { denom: a.denom, terms: out }
    }

    /// Multiplies every coefficient by the scalar `c`.
    pub fn scale(&self, c: &C) -> Self {
        if c.is_zero() {
            return Self::zero();
        }
        Laurent { denom: self.denom, terms: self.terms.iter().map(|(e, x)| (*e, x.mul_ref(c))).collect() }
    }

    /// Multiplies by `t^{num/den}`.
    pub fn shift(&self, num: i64, den: i64) -> Self {
        self.mul_ref(&Self::t_pow(num, den))
    }

    pub fn pow(&self, n: u32) -> Self {
        let mut out = Self::one();
        for _ in 0..n {
            out = out.mul_ref(self);
        }
        out
    }

    /// The bar involution `t -> t^{-1}`.
    pub fn bar(&self) -> Self {
        Laurent { denom: self.denom, terms: self.terms.iter().map(|(e, c)| (-e, c.clone())).collect() }
    }

    pub fn is_bar_invariant(&self) -> bool {
        *self == self.bar()
    }

    /// Value at `t = 1`.
    pub fn eval_one(&self) -> C {
        self.terms.values().fold(C::zero(), |acc, c| acc.add_ref(c))
    }

    /// Smallest and largest exponent numerators (over [`Self::denom`]).
    pub fn exponent_range(&self) -> Option<(i64, i64)> {
        let lo = *self.terms.keys().next()?;
        let hi = *self.terms.keys().next_back()?;
        Some((lo, hi))
    }

    /// Substitutes `t -> sign * t^k`. Requires integer exponents.
    pub fn subs_signed_power(&self, sign: i64, k: i64) -> Option<Self> {
        if !self.has_integer_exponents() {
            return None;
        }
        let terms = self.terms.iter().map(|(e, c)| {
            let e = e / self.denom;
            let c = if sign < 0 && e.rem_euclid(2) == 1 { c.neg_ref() } else { c.clone() };
            (e * k, c)
        });
        Some(Self::from_terms(1, terms))
    }

    /// Exact quotient `self / d`, or `None` if `d` does not divide `self`.
    pub fn div_exact(&self, d: &Self) -> Option<Self> {
        if d.is_zero() {
            return None;
        }
        if self.is_zero() {
            return Some(Self::zero());
        }
        let (a, b) = self.aligned(d);
        let (dmin, dmax) = b.exponent_range()?;
        let dlead = b.terms[&dmax].clone();
        let amin = a.exponent_range()?.0;
        let qmin = amin - dmin;
        let mut rem = a.terms;
        let mut quotient = BTreeMap::new();
        while let Some((&rmax, rlead)) = rem.iter().next_back() {
            let e = rmax - dmax;
            if e < qmin {
                return None;
            }
            let c = rlead.div_exact(&dlead)?;
            for (de, dc) in &b.terms {
                add_into(&mut rem, de + e, &dc.mul_ref(&c).neg_ref());
            }
            quotient.insert(e, c);
        }
        Some(Laurent { denom: b.denom, terms: quotient })
    }

    /// True when every coefficient is nonnegative.
    pub fn is_positive(&self) -> bool {
        self.terms.values().all(|c| c.is_nonnegative())
    }

    /// Maps coefficients through `f`, keeping exponents.
    pub fn map_coeffs<D: Coefficient, F: Fn(&C) -> D>(&self, f: F) -> Laurent<D> {
        Laurent::from_terms(self.denom, self.terms.iter().map(|(e, c)| (*e, f(c))))
    }

    /// JSON form `{"denom": D, "terms": [[e, c], ...]}`.
    pub fn to_json(&self) -> Value {
        let r = self.reduced();
        let terms: Vec<Value> = r.terms.iter().map(|(e, c)| json!([e, c.to_json()])).collect();
        json!({ "denom": r.denom, "terms": terms })
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let bad = || Error::Parse(format!("not a Laurent polynomial: {v}"));
        let denom = v.get("denom").and_then(Value::as_i64).unwrap_or(1);
        if denom < 1 {
            return Err(bad());
        }
        let arr = v.get("terms").and_then(Value::as_array).ok_or_else(bad)?;
        let mut terms = Vec::with_capacity(arr.len());
        for pair in arr {
            let p = pair.as_array().filter(|p| p.len() == 2).ok_or_else(bad)?;
            let e = p[0].as_i64().ok_or_else(bad)?;
            let c = C::from_json(&p[1]).ok_or_else(bad)?;
            terms.push((e, c));
        }
        Ok(Self::from_terms(denom, terms))
    }
}

fn add_into<C: Coefficient>(map: &mut BTreeMap<i64, C>, e: i64, c: &C) {
    if c.is_zero() {
        return;
    }
    match map.get_mut(&e) {
        Some(x) => {
            *x = x.add_ref(c);
            if x.is_zero() {
                map.remove(&e);
            }
        }
        None => {
            map.insert(e, c.clone());
        }
    }
}

impl<C: Coefficient> PartialEq for Laurent<C> {
    fn eq(&self, other: &Self) -> bool {
        if self.denom == other.denom {
            return self.terms == other.terms;
        }
        let (a, b) = self.aligned(other);
        a.terms == b.terms
    }
}

impl<C: Coefficient> Eq for Laurent<C> {}

impl<C: Coefficient> Default for Laurent<C> {
    fn default() -> Self {
        Self::zero()
    }
}

impl<C: Coefficient> Coefficient for Laurent<C> {
    fn zero() -> Self {
        Laurent::zero()
    }
    fn one() -> Self {
        Laurent::one()
    }
    fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }
    fn from_i64(n: i64) -> Self {
        Laurent::constant(C::from_i64(n))
    }
    fn add_ref(&self, other: &Self) -> Self {
        Laurent::add_ref(self, other)
    }
    fn sub_ref(&self, other: &Self) -> Self {
        Laurent::sub_ref(self, other)
    }
    fn mul_ref(&self, other: &Self) -> Self {
        Laurent::mul_ref(self, other)
    }
    fn neg_ref(&self) -> Self {
        Laurent::neg_ref(self)
    }
    fn div_exact(&self, other: &Self) -> Option<Self> {
        Laurent::div_exact(self, other)
    }
    fn is_nonnegative(&self) -> bool {
        self.is_positive()
    }
    fn to_json(&self) -> Value {
        Laurent::to_json(self)
    }
    fn from_json(v: &Value) -> Option<Self> {
        Laurent::from_json(v).ok()
    }
}

macro_rules! forward_binop {
    ($tr:ident, $method:ident, $inner:ident) => {
        impl<C: Coefficient> $tr<&Laurent<C>> for &Laurent<C> {
            type Output = Laurent<C>;
            fn $method(self, rhs: &Laurent<C>) -> Laurent<C> {
                self.$inner(rhs)
            }
        }
        impl<C: Coefficient> $tr<Laurent<C>> for Laurent<C> {
            type Output = Laurent<C>;
            fn $method(self, rhs: Laurent<C>) -> Laurent<C> {
                self.$inner(&rhs)
            }
        }
        impl<C: Coefficient> $tr<&Laurent<C>> for Laurent<C> {
            type Output = Laurent<C>;
            fn $method(self, rhs: &Laurent<C>) -> Laurent<C> {
                self.$inner(rhs)
            }
        }
    };
}

forward_binop!(Add, add, add_ref);
forward_binop!(Sub, sub, sub_ref);
forward_binop!(Mul, mul, mul_ref);

impl<C: Coefficient> Neg for Laurent<C> {
    type Output = Laurent<C>;
    fn neg(self) -> Laurent<C> {
        self.neg_ref()
    }
}

impl<C: Coefficient> Neg for &Laurent<C> {
    type Output = Laurent<C>;
    fn neg(self) -> Laurent<C> {
        self.neg_ref()
    }
}

/// Renders terms in increasing exponent, e.g. `t^-1 + t`, `2 - 3t^4`,
/// `t^(1/2)`, `(1/2)t^2`; the zero polynomial renders as `0`.
impl<C: Coefficient> fmt::Display for Laurent<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let r = self.reduced();
        for (i, (e, c)) in r.terms.iter().enumerate() {
            let s = c.to_string();
            let (neg, mag) = match s.strip_prefix('-') {
                Some(rest) => (true, rest.to_string()),
                None => (false, s.clone()),
            };
            let sep = match (i, neg) {
                (0, false) => "",
                (0, true) => "-",
                (_, true) => " - ",
                (_, false) => " + ",
            };
            let g = e.gcd(&r.denom);
            let (num, den) = (e / g, r.denom / g);
            let power = match (num, den) {
                (0, _) => String::new(),
                (1, 1) => "t".to_string(),
                (n, 1) => format!("t^{n}"),
                (n, d) => format!("t^({n}/{d})"),
            };
            let coeff = if mag == "1" && !power.is_empty() {
                String::new()
            } else if mag.contains('/') {
                format!("({mag})")
            } else {
                mag
            };
            write!(f, "{sep}{coeff}{power}")?;
        }
        Ok(())
    }
}

impl QLaurent {
    /// Multiplies by a rational scalar.
    pub fn scale_rational(&self, r: &BigRational) -> QLaurent {
        self.scale(r)
    }

    /// The same polynomial over the integers, if every coefficient is integral.
    pub fn to_integer(&self) -> Option<LaurentPoly> {
        if self.terms.values().all(BigRational::is_integer) {
            Some(self.map_coeffs(|c| c.to_integer()))
        } else {
            None
        }
    }
}

impl LaurentPoly {
    pub fn from_i64_terms(terms: &[(i64, i64)]) -> LaurentPoly {
        LaurentPoly::from_terms(1, terms.iter().map(|&(e, c)| (e, BigInt::from(c))))
    }

    pub fn to_rational(&self) -> QLaurent {
        self.map_coeffs(|c| BigRational::from_integer(c.clone()))
    }

    /// Parity of the exponents.
    pub fn parity(&self) -> Parity {
        if !self.has_integer_exponents() {
            return Parity::Mixed;
        }
        let mut even = false;
        let mut odd = false;
        for e in self.terms.keys() {
            if (e / self.denom).rem_euclid(2) == 0 {
                even = true;
            } else {
                odd = true;
            }
        }
        match (even, odd) {
            (_, false) => Parity::Even,
            (false, true) => Parity::Odd,
            (true, true) => Parity::Mixed,
        }
    }

    /// Peels `[n]_t` from the outermost exponent inward. Returns the multiset
    /// as `(n, multiplicity)` pairs in decreasing `n`, or `None` when the
    /// polynomial is not of Lefschetz type.
    pub fn lefschetz_decomposition(&self) -> Option<Vec<(i64, BigInt)>> {
        if !self.has_integer_exponents() {
            return None;
        }
        let mut rest = self.reduced();
        let mut out = Vec::new();
        while let Some((_, hi)) = rest.exponent_range() {
            let c = rest.terms[&hi].clone();
            if hi < 0 || c.is_negative() {
                return None;
            }
            let n = hi + 1;
            let q = quantum_int(n).ok()?;
            rest = rest.sub_ref(&q.scale(&c));
            out.push((n, c));
        }
        Some(out)
    }

    /// Peels `pl_n(t)` from the lowest exponent upward. Returns `(n, multiplicity)`
    /// pairs in increasing `n`, or `None` when the polynomial is not pre-Lefschetz.
    pub fn pl_decomposition(&self) -> Option<Vec<(i64, BigInt)>> {
        if !self.has_integer_exponents() {
            return None;
        }
        let mut rest = self.reduced();
        let mut out: Vec<(i64, BigInt)> = Vec::new();
        while let Some((lo, _)) = rest.exponent_range() {
            let c = rest.terms[&lo].clone();
            if c.is_negative() {
                return None;
            }
            let n = if lo.rem_euclid(2) == 0 { lo } else { lo + 2 };
            rest = rest.sub_ref(&pl_poly(n).scale(&c));
            out.push((n, c));
        }
        Some(out)
    }

    pub fn classify(&self) -> Classification {
        Classification {
            positive: self.is_positive(),
            bar_invariant: self.is_bar_invariant(),
            parity: self.parity(),
            lefschetz_decomp: self.lefschetz_decomposition(),
            pl_decomp: self.pl_decomposition(),
        }
    }
}

/// Parity of a Laurent polynomial: all exponents even, all odd, or neither.
/// The zero polynomial counts as even.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Parity {
    Even,
    Odd,
    Mixed,
}

impl Parity {
    /// `Some(0)` for even, `Some(1)` for odd, `None` for mixed.
    pub fn bit(self) -> Option<i64> {
        match self {
            Parity::Even => Some(0),
            Parity::Odd => Some(1),
            Parity::Mixed => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Parity::Even => "even",
            Parity::Odd => "odd",
            Parity::Mixed => "mixed",
        }
    }
}

/// Result of [`LaurentPoly::classify`].
#[derive(Clone, Debug, PartialEq)]
pub struct Classification {
    pub positive: bool,
    pub bar_invariant: bool,
    pub parity: Parity,
    pub lefschetz_decomp: Option<Vec<(i64, BigInt)>>,
    pub pl_decomp: Option<Vec<(i64, BigInt)>>,
}

/// `(a)_t = t^a - t^{-a}`.
pub fn t_number(a: i64) -> LaurentPoly {
    LaurentPoly::from_i64_terms(&[(a, 1), (-a, -1)])
}

/// `[a]_t = t^{-a+1} + t^{-a+3} + ... + t^{a-1}`.
pub fn quantum_int(a: i64) -> Result<LaurentPoly> {
    if a <= 0 {
        return Err(Error::InvalidArgument(format!("quantum integer [{a}]_t needs a >= 1")));
    }
    Ok(LaurentPoly::from_terms(1, (0..a).map(|k| (-a + 1 + 2 * k, BigInt::from(1)))))
}

/// `(c)_t / (a)_t` for `a | c`, a Laurent polynomial with `|c/a|` terms.
pub fn tquotient(c: i64, a: i64) -> Result<LaurentPoly> {
    if a == 0 || c % a != 0 {
        return Err(Error::InvalidArgument(format!("({c})_t/({a})_t is not a Laurent polynomial")));
    }
    let q = c / a;
    let sign = if q < 0 { -1 } else { 1 };
    let a_abs = if q < 0 { -a } else { a };
    let qa = q.abs();
    Ok(LaurentPoly::from_terms(
        1,
        (1..=qa).map(|k| (a_abs * (-qa + 2 * k - 1), BigInt::from(sign))),
    ))
}

/// `(a)_t! = (1)_t (2)_t ... (a)_t`.
pub fn t_factorial(a: i64) -> LaurentPoly {
    (1..=a).fold(LaurentPoly::one(), |acc, i| acc * t_number(i))
}

/// Quantum binomial `(a)_t! / ((k)_t! (a-k)_t!)`, computed by exact division.
pub fn quantum_binomial(a: i64, k: i64) -> Result<LaurentPoly> {
    if k < 0 || k > a {
        return Err(Error::InvalidArgument(format!("binomial ({a} choose {k}) needs 0 <= k <= a")));
    }
    let den = t_factorial(k) * t_factorial(a - k);
    t_factorial(a)
        .div_exact(&den)
        .ok_or_else(|| Error::Internal("quantum binomial division left a remainder".into()))
}

/// `pl_n(t)`: `t^n` for even `n`, `t^{n-2} + t^n` for odd `n`.
pub fn pl_poly(n: i64) -> LaurentPoly {
    if n.rem_euclid(2) == 0 {
        LaurentPoly::from_i64_terms(&[(n, 1)])
    } else {
        LaurentPoly::from_i64_terms(&[(n - 2, 1), (n, 1)])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lp(terms: &[(i64, i64)]) -> LaurentPoly {
        LaurentPoly::from_i64_terms(terms)
    }

    #[test]
    fn add_examples() {
        assert_eq!(lp(&[(1, 1), (-1, 1)]) + lp(&[(-1, -1)]), lp(&[(1, 1)]));
        let p = lp(&[(3, 2), (-2, 5)]);
        assert_eq!(&p + &LaurentPoly::zero(), p);
        assert_eq!(quantum_int(2).unwrap() + quantum_int(1).unwrap(), lp(&[(-1, 1), (0, 1), (1, 1)]));
    }

    #[test]
    fn mul_examples() {
        let q2 = quantum_int(2).unwrap();
        assert_eq!(&q2 * &q2, lp(&[(-2, 1), (0, 2), (2, 1)]));
        assert_eq!(&q2 * &LaurentPoly::one(), q2);
        assert_eq!(t_number(1) * quantum_int(3).unwrap(), t_number(3));
        assert_eq!(t_number(3), lp(&[(3, 1), (-3, -1)]));
    }

    #[test]
    fn quantum_int_examples() {
        assert_eq!(quantum_int(1).unwrap(), LaurentPoly::one());
        assert_eq!(quantum_int(3).unwrap(), lp(&[(-2, 1), (0, 1), (2, 1)]));
        assert!(quantum_int(0).is_err());
        assert!(quantum_int(-2).is_err());
        for a in 1..=20 {
            let bit = quantum_int(a).unwrap().parity().bit().unwrap();
            assert_eq!(bit, (a + 1).rem_euclid(2));
        }
    }

    #[test]
    fn fractional_exponents() {
        let half = LaurentPoly::t_pow(1, 2);
        assert_eq!(&half * &half, lp(&[(1, 1)]));
        assert_eq!(LaurentPoly::t_pow(2, 2), LaurentPoly::t_pow(1, 1));
        assert_eq!((&half + &lp(&[(1, 1)])).to_string(), "t^(1/2) + t");
        assert_eq!(half.parity(), Parity::Mixed);
    }

    #[test]
    fn display_and_json_roundtrip() {
        let p = lp(&[(-1, 2), (0, -3), (4, 1)]);
        assert_eq!(p.to_string(), "2t^-1 - 3 + t^4");
        assert_eq!(lp(&[(0, -1), (1, -1)]).to_string(), "-1 - t");
        assert_eq!(LaurentPoly::zero().to_string(), "0");
        let back = LaurentPoly::from_json(&p.to_json()).unwrap();
        assert_eq!(back, p);
        let q = LaurentPoly::t_pow(-3, 2);
        assert_eq!(LaurentPoly::from_json(&q.to_json()).unwrap(), q);
    }

    #[test]
    fn binomial_examples() {
        assert_eq!(quantum_binomial(2, 1).unwrap(), lp(&[(-1, 1), (1, 1)]));
        for a in 0..6 {
            assert_eq!(quantum_binomial(a, 0).unwrap(), LaurentPoly::one());
        }
        assert!(quantum_binomial(3, 4).is_err());
        assert!(quantum_binomial(3, -1).is_err());
    }

    /// Brute-force expansion of prod_{k=1}^{a} (1 + t^{eps(2k-1)} x) compared
    /// with sum_k t^{eps k a} binom(a,k)_t x^k.
    #[test]
    fn binomial_theorem_oracle() {
        for a in 1..=6i64 {
            for eps in [1i64, -1] {
                // polynomial in x with Laurent coefficients, as a vector indexed by power of x
                let mut prod: Vec<LaurentPoly> = vec![LaurentPoly::one()];
                for k in 1..=a {
                    let mut next = vec![LaurentPoly::zero(); prod.len() + 1];
                    for (i, c) in prod.iter().enumerate() {
                        next[i] = &next[i] + c;
                        next[i + 1] = &next[i + 1] + &c.shift(eps * (2 * k - 1), 1);
                    }
                    prod = next;
                }
                for k in 0..=a {
                    let rhs = quantum_binomial(a, k).unwrap().shift(eps * k * a, 1);
                    assert_eq!(prod[k as usize], rhs, "a={a} k={k} eps={eps}");
                }
            }
        }
    }

    #[test]
    fn binomial_pascal_and_symmetry() {
        for a in 1..=8 {
            for k in 1..a {
                let lhs = quantum_binomial(a, k).unwrap();
                let rhs = quantum_binomial(a - 1, k).unwrap().shift(k, 1)
                    + quantum_binomial(a - 1, k - 1).unwrap().shift(-(a - k), 1);
                assert_eq!(lhs, rhs);
                assert!(lhs.is_bar_invariant());
                assert!(lhs.is_positive());
                assert_eq!(lhs, quantum_binomial(a, a - k).unwrap());
            }
        }
    }

    #[test]
    fn pl_poly_examples() {
        assert_eq!(pl_poly(0), LaurentPoly::one());
        assert_eq!(pl_poly(3), lp(&[(1, 1), (3, 1)]));
        assert_eq!(pl_poly(-1), lp(&[(-3, 1), (-1, 1)]));
    }

    #[test]
    fn classify_examples() {
        let c = lp(&[(-1, 1), (0, 1), (1, 1)]).classify();
        assert_eq!(c.lefschetz_decomp, Some(vec![(2, BigInt::from(1)), (1, BigInt::from(1))]));
        assert_eq!(c.parity, Parity::Mixed);
        let c = lp(&[(-2, 1), (0, 1), (2, 1)]).classify();
        assert_eq!(c.lefschetz_decomp, Some(vec![(3, BigInt::from(1))]));
        assert_eq!(c.parity, Parity::Even);
        let c = lp(&[(1, 1), (3, 1)]).classify();
        assert!(!c.bar_invariant);
        assert_eq!(c.lefschetz_decomp, None);
        assert_eq!(c.pl_decomp, Some(vec![(3, BigInt::from(1))]));
        assert_eq!(c.parity, Parity::Odd);
        let c = lp(&[(0, 1), (2, -1)]).classify();
        assert!(!c.positive);
        assert_eq!(c.pl_decomp, None);
    }

    #[test]
    fn tquotient_matches_division() {
        for a in [-3i64, -2, -1, 1, 2, 3] {
            for m in -4i64..=4 {
                let c = a * m;
                let q = tquotient(c, a).unwrap();
                if c == 0 {
                    assert!(q.is_zero());
                    continue;
                }
                assert_eq!(t_number(c).div_exact(&t_number(a)).unwrap(), q, "c={c} a={a}");
            }
        }
        assert!(tquotient(3, 2).is_err());
    }

    #[test]
    fn division_detects_remainder() {
        let p = lp(&[(0, 1), (1, 1)]);
        assert!(lp(&[(0, 1)]).div_exact(&p).is_none());
        let prod = &p * &lp(&[(-2, 3), (5, -1)]);
        assert_eq!(prod.div_exact(&p).unwrap(), lp(&[(-2, 3), (5, -1)]));
    }

    #[test]
    fn adams_substitution() {
        let p = lp(&[(1, 1), (2, 3)]);
        assert_eq!(p.subs_signed_power(-1, 2).unwrap(), lp(&[(2, -1), (4, 3)]));
        assert!(LaurentPoly::t_pow(1, 2).subs_signed_power(1, 2).is_none());
    }

    fn arb_poly() -> impl Strategy<Value = LaurentPoly> {
        proptest::collection::vec((-8i64..=8, -5i64..=5), 0..6)
            .prop_map(|v| LaurentPoly::from_terms(1, v.into_iter().map(|(e, c)| (e, BigInt::from(c)))))
    }

    proptest! {
        #[test]
        fn ring_axioms(a in arb_poly(), b in arb_poly(), c in arb_poly()) {
            prop_assert_eq!(&(&a + &b) + &c, &a + &(&b + &c));
            prop_assert_eq!(&(&a * &b) * &c, &a * &(&b * &c));
            prop_assert_eq!(&a + &b, &b + &a);
            prop_assert_eq!(&a * &b, &b * &a);
            prop_assert_eq!(&a * &(&b + &c), &(&a * &b) + &(&a * &c));
        }

        #[test]
        fn bar_is_multiplicative(a in arb_poly(), b in arb_poly()) {
            prop_assert_eq!((&a * &b).bar(), a.bar() * b.bar());
        }

        #[test]
        fn exact_division_inverts_product(a in arb_poly(), b in arb_poly()) {
            prop_assume!(!b.is_zero());
            prop_assert_eq!((&a * &b).div_exact(&b), Some(a));
        }

        #[test]
        fn lefschetz_implies_pl_and_resums(mults in proptest::collection::vec(0i64..3, 1..6)) {
            let mut p = LaurentPoly::zero();
            for (i, m) in mults.iter().enumerate() {
                p = p + quantum_int(i as i64 + 1).unwrap().scale(&BigInt::from(*m));
            }
            let lef = p.lefschetz_decomposition().expect("sum of [n]_t is Lefschetz");
            let resum = lef.iter().fold(LaurentPoly::zero(), |acc, (n, c)| acc + quantum_int(*n).unwrap().scale(c));
            prop_assert_eq!(&resum, &p);
            let pl = p.pl_decomposition().expect("Lefschetz implies pL");
            let resum = pl.iter().fold(LaurentPoly::zero(), |acc, (n, c)| acc + pl_poly(*n).scale(c));
            prop_assert_eq!(&resum, &p);
            prop_assert!(p.is_positive());
        }

        #[test]
        fn pl_sums_are_positive(ns in proptest::collection::vec(-6i64..6, 0..6)) {
            let p = ns.iter().fold(LaurentPoly::zero(), |acc, n| acc + pl_poly(*n));
            prop_assert!(p.is_positive());
            let dec = p.pl_decomposition().expect("sum of pl_n is pL");
            let resum = dec.iter().fold(LaurentPoly::zero(), |acc, (n, c)| acc + pl_poly(*n).scale(c));
            prop_assert_eq!(resum, p);
        }
    }
}
