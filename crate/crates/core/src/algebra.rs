//! Exact rational arithmetic and rational functions in `Q = q^-1`, `T = q^-s`.
//!
//! A [`ZetaRat`] is a numerator polynomial over the rationals divided by a
//! multiset of factors `1 - Q^alpha T^beta`. Every local zeta function the
//! engine produces has this shape, so no bivariate gcd machinery is needed:
//! cancellation only tries exact division by a single factor.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde_json::{json, Value};

use crate::error::{Error, Result};

pub type Rat = BigRational;

pub fn rat(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

pub fn rint(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

/// Parses `"n"` or `"n/d"`.
pub fn parse_rat(s: &str) -> Option<Rat> {
    let s = s.trim();
    match s.split_once('/') {
        Some((n, d)) => {
            let n: BigInt = n.trim().parse().ok()?;
            let d: BigInt = d.trim().parse().ok()?;
            if d.is_zero() {
                return None;
            }
            Some(Rat::new(n, d))
        }
        None => Some(Rat::from_integer(s.parse().ok()?)),
    }
}

pub fn fmt_rat(r: &Rat) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

fn vp_int(n: &BigInt, p: u64) -> i64 {
    let p = BigInt::from(p);
    let mut n = n.abs();
    let mut v = 0;
    while (&n % &p).is_zero() {
        n /= &p;
        v += 1;
    }
    v
}

/// p-adic valuation; `None` for zero.
pub fn vp(r: &Rat, p: u64) -> Option<i64> {
    if r.is_zero() {
        return None;
    }
    Some(vp_int(r.numer(), p) - vp_int(r.denom(), p))
}

pub fn pow_mod(mut b: u64, mut e: u64, m: u64) -> u64 {
    let mut acc = 1 % m;
    b %= m;
    while e > 0 {
        if e & 1 == 1 {
            acc = (acc as u128 * b as u128 % m as u128) as u64;
        }
        b = (b as u128 * b as u128 % m as u128) as u64;
        e >>= 1;
    }
    acc
}

/// Inverse modulo `m` (not necessarily prime); `None` when not a unit.
pub fn inv_mod(a: u64, m: u64) -> Option<u64> {
    let e = i128::from(a as i64).extended_gcd(&(m as i128));
    if e.gcd != 1 {
        return None;
    }
    Some(e.x.rem_euclid(m as i128) as u64)
}

/// Residue of `r` modulo `modulus`, when the denominator is invertible.
pub fn residue(r: &Rat, modulus: u64) -> Option<u64> {
    let m = BigInt::from(modulus);
    let num = r.numer().mod_floor(&m).to_u64()?;
    let den = r.denom().mod_floor(&m).to_u64()?;
    let inv = inv_mod(den, modulus)?;
    Some((num as u128 * inv as u128 % modulus as u128) as u64)
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

/// Polynomial in `Q` and `T` with rational coefficients; keys are `(degQ, degT)`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct PolyQT {
    terms: BTreeMap<(u32, u32), Rat>,
}

impl PolyQT {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::constant(Rat::one())
    }

    pub fn constant(c: Rat) -> Self {
        Self::monomial(c, 0, 0)
    }

    pub fn monomial(c: Rat, q: u32, t: u32) -> Self {
        let mut p = Self::zero();
        p.add_term(q, t, c);
        p
    }

    /// `1 - Q^alpha T^beta`.
    pub fn one_minus(f: DenFactor) -> Self {
        let mut p = Self::one();
        p.add_term(f.alpha, f.beta, -Rat::one());
        p
    }

    pub fn from_terms<I: IntoIterator<Item = ((u32, u32), Rat)>>(it: I) -> Self {
        let mut p = Self::zero();
        for ((q, t), c) in it {
            p.add_term(q, t, c);
        }
        p
    }

    pub fn add_term(&mut self, q: u32, t: u32, c: Rat) {
        if c.is_zero() {
            return;
        }
        let e = self.terms.entry((q, t)).or_insert_with(Rat::zero);
        *e += c;
        if e.is_zero() {
            self.terms.remove(&(q, t));
        }
    }

    pub fn terms(&self) -> &BTreeMap<(u32, u32), Rat> {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, q: u32, t: u32) -> Rat {
        self.terms.get(&(q, t)).cloned().unwrap_or_else(Rat::zero)
    }

    pub fn scale(&self, c: &Rat) -> Self {
        if c.is_zero() {
            return Self::zero();
        }
        Self {
            terms: self.terms.iter().map(|(k, v)| (*k, v * c)).collect(),
        }
    }

    pub fn shift(&self, q: u32, t: u32) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .map(|(&(a, b), v)| ((a + q, b + t), v.clone()))
                .collect(),
        }
    }

    /// Exact division by `1 - Q^alpha T^beta`, or `None` when it does not divide.
    pub fn div_one_minus(&self, f: DenFactor) -> Option<Self> {
        let mut rem = self.clone();
        let mut quot = Self::zero();
        // lex order (degQ, degT): the leading term of the divisor is -Q^a T^b
        while let Some((&(i, j), c)) = rem.terms.iter().next_back() {
            if i < f.alpha || j < f.beta {
                return None;
            }
            let c = c.clone();
            let (qi, qj) = (i - f.alpha, j - f.beta);
            // quotient term -c Q^qi T^qj; subtract it times (1 - z)
            quot.add_term(qi, qj, -c.clone());
            rem.add_term(qi, qj, c.clone());
            rem.add_term(i, j, -c);
        }
        Some(quot)
    }

    /// Evaluates at `Q = q^-1`, returning the coefficients of `T^0..=T^order`.
    pub fn specialize(&self, q: u64, order: usize) -> Vec<Rat> {
        let mut out = vec![Rat::zero(); order + 1];
        let qinv = Rat::new(BigInt::one(), BigInt::from(q));
        for (&(a, b), c) in &self.terms {
            if (b as usize) <= order {
                out[b as usize] += c * num_traits::pow(qinv.clone(), a as usize);
            }
        }
        out
    }

    fn latex(&self) -> String {
        if self.is_zero() {
            return "0".into();
        }
        let mut s = String::new();
        for (i, (&(a, b), c)) in self.terms.iter().enumerate() {
            let neg = c.is_negative();
            let abs = c.abs();
            if i == 0 {
                if neg {
                    s.push('-');
                }
            } else {
                s.push_str(if neg { " - " } else { " + " });
            }
            let mono = latex_power(a, b);
            match (abs.is_one(), mono.is_empty()) {
                (true, true) => s.push('1'),
                (true, false) => s.push_str(&mono),
                (false, _) => {
                    s.push_str(&latex_rat(&abs));
                    s.push_str(&mono);
                }
            }
        }
        s
    }
}

fn latex_rat(r: &Rat) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("\\tfrac{{{}}}{{{}}}", r.numer(), r.denom())
    }
}

/// Renders `Q^a T^b` as `q^{-a-bs}`.
pub fn latex_power(a: u32, b: u32) -> String {
    match (a, b) {
        (0, 0) => String::new(),
        (a, 0) => format!("q^{{-{a}}}"),
        (0, 1) => "q^{-s}".into(),
        (0, b) => format!("q^{{-{b}s}}"),
        (a, 1) => format!("q^{{-{a}-s}}"),
        (a, b) => format!("q^{{-{a}-{b}s}}"),
    }
}

impl fmt::Display for PolyQT {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        for (i, (&(a, b), c)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({})", fmt_rat(c))?;
            if a > 0 {
                write!(f, "*Q^{a}")?;
            }
            if b > 0 {
                write!(f, "*T^{b}")?;
            }
        }
        Ok(())
    }
}

impl Add for &PolyQT {
    type Output = PolyQT;
    fn add(self, rhs: &PolyQT) -> PolyQT {
        let mut out = self.clone();
        for (&(a, b), c) in &rhs.terms {
            out.add_term(a, b, c.clone());
        }
        out
    }
}

impl Sub for &PolyQT {
    type Output = PolyQT;
    fn sub(self, rhs: &PolyQT) -> PolyQT {
        let mut out = self.clone();
        for (&(a, b), c) in &rhs.terms {
            out.add_term(a, b, -c.clone());
        }
        out
    }
}

impl Mul for &PolyQT {
    type Output = PolyQT;
    fn mul(self, rhs: &PolyQT) -> PolyQT {
        let mut out = PolyQT::zero();
        for (&(a, b), c) in &self.terms {
            for (&(x, y), d) in &rhs.terms {
                out.add_term(a + x, b + y, c * d);
            }
        }
        out
    }
}

impl Neg for &PolyQT {
    type Output = PolyQT;
    fn neg(self) -> PolyQT {
        self.scale(&-Rat::one())
    }
}

/// The factor `1 - Q^alpha T^beta`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DenFactor {
    pub alpha: u32,
    pub beta: u32,
}

impl DenFactor {
    /// Panics on `(0, 0)`, which would be the zero polynomial.
    pub fn new(alpha: u32, beta: u32) -> Self {
        assert!((alpha, beta) != (0, 0), "1 - Q^0 T^0 is not a valid factor");
        Self { alpha, beta }
    }

    /// Real part `-alpha/beta` of the associated poles, if the factor depends on `T`.
    pub fn pole_real_part(&self) -> Option<Rat> {
        (self.beta != 0).then(|| rat(-(self.alpha as i64), self.beta as i64))
    }
}

/// `num / prod (1 - Q^alpha T^beta)^mult`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ZetaRat {
    pub num: PolyQT,
    pub den: BTreeMap<DenFactor, u32>,
}

impl ZetaRat {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::from_poly(PolyQT::one())
    }

    pub fn from_poly(num: PolyQT) -> Self {
        Self {
            num,
            den: BTreeMap::new(),
        }
    }

    pub fn constant(c: Rat) -> Self {
        Self::from_poly(PolyQT::constant(c))
    }

    pub fn monomial(c: Rat, q: u32, t: u32) -> Self {
        Self::from_poly(PolyQT::monomial(c, q, t))
    }

    /// `num / (1 - Q^alpha T^beta)`.
    pub fn over(num: PolyQT, factors: &[(u32, u32)]) -> Self {
        let mut z = Self::from_poly(num);
        for &(a, b) in factors {
            *z.den.entry(DenFactor::new(a, b)).or_insert(0) += 1;
        }
        z
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn den_product(&self) -> PolyQT {
        let mut acc = PolyQT::one();
        for (&f, &k) in &self.den {
            for _ in 0..k {
                acc = &acc * &PolyQT::one_minus(f);
            }
        }
        acc
    }

    pub fn den_factors(&self) -> BTreeSet<DenFactor> {
        self.den.keys().copied().collect()
    }

    pub fn scale(&self, c: &Rat) -> Self {
        Self {
            num: self.num.scale(c),
            den: if c.is_zero() {
                BTreeMap::new()
            } else {
                self.den.clone()
            },
        }
    }

    pub fn mul_poly(&self, p: &PolyQT) -> Self {
        Self {
            num: &self.num * p,
            den: self.den.clone(),
        }
    }

    /// Numerator of `self` rewritten over `target`, which must contain `self.den`.
    fn num_over(&self, target: &BTreeMap<DenFactor, u32>) -> PolyQT {
        let mut num = self.num.clone();
        for (&f, &k) in target {
            let have = self.den.get(&f).copied().unwrap_or(0);
            for _ in have..k {
                num = &num * &PolyQT::one_minus(f);
            }
        }
        num
    }

    /// Exact equality of values by cross multiplication.
    pub fn value_eq(&self, other: &ZetaRat) -> bool {
        &self.num * &other.den_product() == &other.num * &self.den_product()
    }
}

/// Sum with the denominator taken as the multiset maximum of both sides.
pub fn zr_add(a: &ZetaRat, b: &ZetaRat) -> ZetaRat {
    if a.is_zero() {
        return b.clone();
    }
    if b.is_zero() {
        return a.clone();
    }
    let mut den = a.den.clone();
    for (&f, &k) in &b.den {
        let e = den.entry(f).or_insert(0);
        *e = (*e).max(k);
    }
    let num = &a.num_over(&den) + &b.num_over(&den);
    if num.is_zero() {
        return ZetaRat::zero();
    }
    ZetaRat { num, den }
}

pub fn zr_mul(a: &ZetaRat, b: &ZetaRat) -> ZetaRat {
    let num = &a.num * &b.num;
    if num.is_zero() {
        return ZetaRat::zero();
    }
    let mut den = a.den.clone();
    for (&f, &k) in &b.den {
        *den.entry(f).or_insert(0) += k;
    }
    ZetaRat { num, den }
}

/// Cancels every denominator factor that divides the numerator exactly.
pub fn zr_reduce(a: &ZetaRat) -> ZetaRat {
    if a.num.is_zero() {
        return ZetaRat::zero();
    }
    let mut num = a.num.clone();
    let mut den = BTreeMap::new();
    for (&f, &k) in &a.den {
        let mut left = k;
        while left > 0 {
            match num.div_one_minus(f) {
                Some(q) => {
                    num = q;
                    left -= 1;
                }
                None => break,
            }
        }
        if left > 0 {
            den.insert(f, left);
        }
    }
    ZetaRat { num, den }
}

impl Add for &ZetaRat {
    type Output = ZetaRat;
    fn add(self, rhs: &ZetaRat) -> ZetaRat {
        zr_add(self, rhs)
    }
}

impl Sub for &ZetaRat {
    type Output = ZetaRat;
    fn sub(self, rhs: &ZetaRat) -> ZetaRat {
        zr_add(self, &rhs.scale(&-Rat::one()))
    }
}

impl Mul for &ZetaRat {
    type Output = ZetaRat;
    fn mul(self, rhs: &ZetaRat) -> ZetaRat {
        zr_mul(self, rhs)
    }
}

impl fmt::Display for ZetaRat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}]", self.num)?;
        for (d, k) in &self.den {
            write!(f, " / (1 - Q^{} T^{})", d.alpha, d.beta)?;
            if *k > 1 {
                write!(f, "^{k}")?;
            }
        }
        Ok(())
    }
}

impl std::iter::Sum for ZetaRat {
    fn sum<I: Iterator<Item = ZetaRat>>(iter: I) -> ZetaRat {
        iter.fold(ZetaRat::zero(), |acc, z| zr_add(&acc, &z))
    }
}

/// Truncated power series in `T` of a [`ZetaRat`] with `Q` specialised to `1/q`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SeriesT {
    pub q: u64,
    pub coeffs: Vec<Rat>,
}

impl SeriesT {
    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }
}

fn series_mul(a: &[Rat], b: &[Rat]) -> Vec<Rat> {
    let n = a.len();
    let mut out = vec![Rat::zero(); n];
    for (i, x) in a.iter().enumerate() {
        if x.is_zero() {
            continue;
        }
        for (j, y) in b.iter().enumerate().take(n - i) {
            if !y.is_zero() {
                out[i + j] += x * y;
            }
        }
    }
    out
}

pub fn zr_series(a: &ZetaRat, q: u64, order: usize) -> Result<SeriesT> {
    let mut acc = a.num.specialize(q, order);
    let qinv = Rat::new(BigInt::one(), BigInt::from(q));
    for (&f, &k) in &a.den {
        let qa = num_traits::pow(qinv.clone(), f.alpha as usize);
        let mut geo = vec![Rat::zero(); order + 1];
        if f.beta == 0 {
            if f.alpha == 0 {
                return Err(Error::DivergentFactor);
            }
            geo[0] = Rat::one() / (Rat::one() - qa);
        } else {
            let mut c = Rat::one();
            let mut i = 0usize;
            while i <= order {
                geo[i] = c.clone();
                c *= &qa;
                i += f.beta as usize;
            }
        }
        for _ in 0..k {
            acc = series_mul(&acc, &geo);
        }
    }
    Ok(SeriesT { q, coeffs: acc })
}

/// `sum_{k=start}^{end} Q^{cq k} T^{ct k}`, with `end = None` for an infinite tail.
pub fn geometric_sum(start: u64, end: Option<u64>, factor: (u32, u32)) -> Result<ZetaRat> {
    let (cq, ct) = factor;
    let pow = |k: u64| -> Result<(u32, u32)> {
        let a = u32::try_from(cq as u64 * k)
            .map_err(|_| Error::NegativeExponent(format!("exponent overflow at k={k}")))?;
        let b = u32::try_from(ct as u64 * k)
            .map_err(|_| Error::NegativeExponent(format!("exponent overflow at k={k}")))?;
        Ok((a, b))
    };
    match end {
        Some(end) if end < start => Ok(ZetaRat::zero()),
        Some(end) if factor == (0, 0) => Ok(ZetaRat::constant(rint((end - start + 1) as i64))),
        Some(end) => {
            let (a0, b0) = pow(start)?;
            let (a1, b1) = pow(end + 1)?;
            let mut num = PolyQT::monomial(Rat::one(), a0, b0);
            num.add_term(a1, b1, -Rat::one());
            Ok(ZetaRat::over(num, &[(cq, ct)]))
        }
        None => {
            if factor == (0, 0) {
                return Err(Error::DivergentFactor);
            }
            let (a0, b0) = pow(start)?;
            Ok(ZetaRat::over(
                PolyQT::monomial(Rat::one(), a0, b0),
                &[(cq, ct)],
            ))
        }
    }
}

/// `floor(r)` for a rational `r`.
pub fn floor_rat(r: &Rat) -> BigInt {
    r.floor().to_integer()
}

/// `sum_{m >= m0} Q^{c1 m + c2 floor(m tau)} T^{c3 m + c4 floor(m tau)}`.
///
/// Splits `m` into residue classes modulo the denominator of `tau`; on each class
/// `floor(m tau)` is affine in the class index and the class sum is geometric.
pub fn floor_sum(m0: u64, tau: &Rat, lin: (i64, i64, i64, i64)) -> Result<ZetaRat> {
    if tau.is_negative() {
        return Err(Error::NonPositiveGrowth(format!(
            "negative slope {}",
            fmt_rat(tau)
        )));
    }
    let (c1, c2, c3, c4) = lin;
    let num = tau.numer().to_i64().ok_or_else(|| {
        Error::NonPositiveGrowth("slope numerator out of range".into())
    })?;
    let den = tau
        .denom()
        .to_i64()
        .ok_or_else(|| Error::NonPositiveGrowth("slope denominator out of range".into()))?;
    let growth_q = c1 * den + c2 * num;
    let growth_t = c3 * den + c4 * num;
    if growth_q <= 0 || growth_t < 0 {
        return Err(Error::NonPositiveGrowth(format!(
            "per-period growth Q^{growth_q} T^{growth_t}"
        )));
    }
    let factor = DenFactor::new(growth_q as u32, growth_t as u32);
    let mut num_poly = PolyQT::zero();
    for rho in 0..den as u64 {
        let m = (m0 + rho) as i64;
        let fl = floor_rat(&(tau * rint(m))).to_i64().unwrap_or(i64::MAX);
        let eq = c1 * m + c2 * fl;
        let et = c3 * m + c4 * fl;
        if eq < 0 || et < 0 {
            return Err(Error::NegativeExponent(format!(
                "Q^{eq} T^{et} at m={m}"
            )));
        }
        num_poly.add_term(eq as u32, et as u32, Rat::one());
    }
    let mut z = ZetaRat::from_poly(num_poly);
    z.den.insert(factor, 1);
    Ok(z)
}

/// Real parts `-alpha/beta` over the `T`-dependent denominator factors.
pub fn real_pole_parts(a: &ZetaRat) -> BTreeSet<Rat> {
    a.den.keys().filter_map(DenFactor::pole_real_part).collect()
}

pub fn zeta_to_json(a: &ZetaRat) -> Value {
    let num: Vec<Value> = a
        .num
        .terms()
        .iter()
        .map(|(&(q, t), c)| json!([q, t, fmt_rat(c)]))
        .collect();
    let den: Vec<Value> = a
        .den
        .iter()
        .map(|(f, k)| json!([f.alpha, f.beta, k]))
        .collect();
    json!({ "num": num, "den": den })
}

pub fn zeta_from_json(v: &Value) -> Result<ZetaRat> {
    let bad = |m: &str| Error::Schema(format!("ZetaRat: {m}"));
    let mut num = PolyQT::zero();
    for term in v["num"].as_array().ok_or_else(|| bad("missing num"))? {
        let t = term.as_array().ok_or_else(|| bad("num term"))?;
        if t.len() != 3 {
            return Err(bad("num term arity"));
        }
        let q = t[0].as_u64().ok_or_else(|| bad("degQ"))? as u32;
        let tt = t[1].as_u64().ok_or_else(|| bad("degT"))? as u32;
        let c = match &t[2] {
            Value::String(s) => parse_rat(s).ok_or_else(|| bad("coefficient"))?,
            Value::Number(n) => rint(n.as_i64().ok_or_else(|| bad("coefficient"))?),
            _ => return Err(bad("coefficient")),
        };
        num.add_term(q, tt, c);
    }
    let mut z = ZetaRat::from_poly(num);
    for f in v["den"].as_array().ok_or_else(|| bad("missing den"))? {
        let f = f.as_array().ok_or_else(|| bad("den factor"))?;
        if f.len() != 3 {
            return Err(bad("den factor arity"));
        }
        let a = f[0].as_u64().ok_or_else(|| bad("alpha"))? as u32;
        let b = f[1].as_u64().ok_or_else(|| bad("beta"))? as u32;
        let k = f[2].as_u64().ok_or_else(|| bad("multiplicity"))? as u32;
        if (a, b) == (0, 0) {
            return Err(bad("factor (0,0)"));
        }
        if k > 0 {
            z.den.insert(DenFactor::new(a, b), k);
        }
    }
    Ok(z)
}

/// LaTeX fraction with `Q^a T^b` rendered as `q^{-a-bs}`.
pub fn zeta_to_latex(a: &ZetaRat) -> String {
    if a.den.is_empty() {
        return a.num.latex();
    }
    let den: Vec<String> = a
        .den
        .iter()
        .map(|(f, k)| {
            let base = format!("(1 - {})", latex_power(f.alpha, f.beta));
            if *k > 1 {
                format!("{base}^{{{k}}}")
            } else {
                base
            }
        })
        .collect();
    format!("\\frac{{{}}}{{{}}}", a.num.latex(), den.join(""))
}
