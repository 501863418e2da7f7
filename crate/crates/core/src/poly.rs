//! Polynomials in `x, y`: expanded and factored semi-quasihomogeneous forms,
//! parsing, reduction modulo `p` and torus singularity detection.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde_json::{json, Value};

use crate::algebra::{fmt_rat, parse_rat, residue, rint, Rat};
use crate::error::{Error, Result};

/// `sum a_{ij} x^i y^j` with rational coefficients.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct IntPoly2 {
    terms: BTreeMap<(u32, u32), Rat>,
}

impl IntPoly2 {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn monomial(c: Rat, i: u32, j: u32) -> Self {
        let mut p = Self::zero();
        p.add_term(i, j, c);
        p
    }

    pub fn from_terms<I: IntoIterator<Item = ((u32, u32), Rat)>>(it: I) -> Self {
        let mut p = Self::zero();
        for ((i, j), c) in it {
            p.add_term(i, j, c);
        }
        p
    }

    /// From integer triples `(c, i, j)`.
    pub fn from_ints(terms: &[(i64, u32, u32)]) -> Self {
        Self::from_terms(terms.iter().map(|&(c, i, j)| ((i, j), rint(c))))
    }

    pub fn add_term(&mut self, i: u32, j: u32, c: Rat) {
        if c.is_zero() {
            return;
        }
        let e = self.terms.entry((i, j)).or_insert_with(Rat::zero);
        *e += c;
        if e.is_zero() {
            self.terms.remove(&(i, j));
        }
    }

    pub fn terms(&self) -> &BTreeMap<(u32, u32), Rat> {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, i: u32, j: u32) -> Rat {
        self.terms.get(&(i, j)).cloned().unwrap_or_else(Rat::zero)
    }

    pub fn support(&self) -> BTreeSet<(u32, u32)> {
        self.terms.keys().copied().collect()
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (&(i, j), c) in &other.terms {
            out.add_term(i, j, c.clone());
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zero();
        for (&(i, j), c) in &self.terms {
            for (&(k, l), d) in &other.terms {
                out.add_term(i + k, j + l, c * d);
            }
        }
        out
    }

    pub fn pow(&self, e: u32) -> Self {
        let mut acc = Self::monomial(Rat::one(), 0, 0);
        for _ in 0..e {
            acc = acc.mul(self);
        }
        acc
    }

    pub fn scale(&self, c: &Rat) -> Self {
        Self::from_terms(self.terms.iter().map(|(k, v)| (*k, v * c)))
    }

    /// Restriction to the given exponents.
    pub fn restrict(&self, keep: &BTreeSet<(u32, u32)>) -> Self {
        Self::from_terms(
            self.terms
                .iter()
                .filter(|(k, _)| keep.contains(k))
                .map(|(k, v)| (*k, v.clone())),
        )
    }

    /// `f(0,0) = 0` and both partials vanish at the origin.
    pub fn origin_singular(&self) -> bool {
        self.coeff(0, 0).is_zero() && self.coeff(1, 0).is_zero() && self.coeff(0, 1).is_zero()
    }

    pub fn to_json(&self) -> Value {
        Value::Array(
            self.terms
                .iter()
                .map(|(&(i, j), c)| json!([fmt_rat(c), i, j]))
                .collect(),
        )
    }
}

impl fmt::Display for IntPoly2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        for (n, (&(i, j), c)) in self.terms.iter().rev().enumerate() {
            let neg = c.is_negative();
            if n == 0 {
                if neg {
                    write!(f, "-")?;
                }
            } else {
                write!(f, "{}", if neg { " - " } else { " + " })?;
            }
            let abs = c.abs();
            let mut mono = Vec::new();
            match i {
                0 => {}
                1 => mono.push("x".to_string()),
                _ => mono.push(format!("x^{i}")),
            }
            match j {
                0 => {}
                1 => mono.push("y".to_string()),
                _ => mono.push(format!("y^{j}")),
            }
            if mono.is_empty() {
                write!(f, "{}", fmt_rat(&abs))?;
            } else if abs.is_one() {
                write!(f, "{}", mono.join("*"))?;
            } else {
                write!(f, "{}*{}", fmt_rat(&abs), mono.join("*"))?;
            }
        }
        Ok(())
    }
}

/// Univariate polynomial over the rationals, coefficients from degree 0 upward.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UniPoly(pub Vec<Rat>);

impl UniPoly {
    pub fn new(mut c: Vec<Rat>) -> Self {
        while c.last().is_some_and(Zero::is_zero) {
            c.pop();
        }
        Self(c)
    }

    pub fn degree(&self) -> Option<usize> {
        self.0.len().checked_sub(1)
    }

    pub fn eval(&self, z: &Rat) -> Rat {
        self.0
            .iter()
            .rev()
            .fold(Rat::zero(), |acc, c| acc * z + c)
    }

    pub fn derivative(&self) -> Self {
        Self::new(
            self.0
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, c)| c * rint(k as i64))
                .collect(),
        )
    }

    fn rem(&self, m: &Self) -> Self {
        let mut r = self.0.clone();
        let dm = m.0.len() - 1;
        let lc = m.0[dm].clone();
        while r.len() > dm && !r.is_empty() {
            let c = r.last().unwrap() / &lc;
            let shift = r.len() - 1 - dm;
            for (k, mc) in m.0.iter().enumerate() {
                r[shift + k] -= &c * mc;
            }
            r.pop();
            while r.last().is_some_and(Zero::is_zero) {
                r.pop();
            }
        }
        Self::new(r)
    }

    pub fn gcd(&self, other: &Self) -> Self {
        let (mut a, mut b) = (self.clone(), other.clone());
        while !b.0.is_empty() {
            let r = a.rem(&b);
            a = b;
            b = r;
        }
        a
    }

    pub fn is_squarefree(&self) -> bool {
        self.gcd(&self.derivative()).degree().unwrap_or(0) == 0
    }

    /// Synthetic division by `z - r`; the caller ensures `r` is a root.
    fn deflate(&self, r: &Rat) -> Self {
        let n = self.0.len();
        let mut out = vec![Rat::zero(); n - 1];
        let mut carry = Rat::zero();
        for k in (1..n).rev() {
            carry = &self.0[k] + carry * r;
            out[k - 1] = carry.clone();
        }
        Self::new(out)
    }

    /// Rational roots with multiplicities (sorted by root) and the degree left over.
    pub fn rational_roots(&self) -> (Vec<(Rat, u32)>, usize) {
        let mut poly = self.clone();
        let mut roots: BTreeMap<Rat, u32> = BTreeMap::new();
        while poly.0.len() > 1 && poly.0[0].is_zero() {
            poly = Self::new(poly.0[1..].to_vec());
            *roots.entry(Rat::zero()).or_insert(0) += 1;
        }
        let ints = integer_coeffs(&poly.0);
        let (Some(first), Some(last)) = (ints.first(), ints.last()) else {
            return (vec![], 0);
        };
        let nums = divisors(first);
        let dens = divisors(last);
        let mut cands = BTreeSet::new();
        for n in &nums {
            for d in &dens {
                let r = Rat::new(n.clone(), d.clone());
                cands.insert(r.clone());
                cands.insert(-r);
            }
        }
        for r in cands {
            while poly.degree().unwrap_or(0) > 0 && poly.eval(&r).is_zero() {
                poly = poly.deflate(&r);
                *roots.entry(r.clone()).or_insert(0) += 1;
            }
        }
        (roots.into_iter().collect(), poly.degree().unwrap_or(0))
    }
}

fn integer_coeffs(c: &[Rat]) -> Vec<BigInt> {
    let l = c
        .iter()
        .fold(BigInt::one(), |acc, r| acc.lcm(r.denom()));
    c.iter()
        .map(|r| (r * Rat::from_integer(l.clone())).to_integer())
        .collect()
}

fn divisors(n: &BigInt) -> Vec<BigInt> {
    let n = n.abs();
    if let Some(v) = n.to_u128() {
        let mut out = Vec::new();
        let mut d: u128 = 1;
        while d * d <= v {
            if v % d == 0 {
                out.push(BigInt::from(d));
                if d * d != v {
                    out.push(BigInt::from(v / d));
                }
            }
            d += 1;
        }
        out
    } else {
        vec![BigInt::one(), n]
    }
}

/// One quasihomogeneous part `c x^u y^v prod (y^a - alpha x^b)^e`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SqhPart {
    pub c: Rat,
    pub u: u32,
    pub v: u32,
    pub factors: Vec<(Rat, u32)>,
    pub d: u64,
}

impl SqhPart {
    pub fn factor_degree(&self) -> u32 {
        self.factors.iter().map(|f| f.1).sum()
    }

    /// Multiplicity of the factor with root `alpha`.
    pub fn multiplicity(&self, alpha: &Rat) -> u32 {
        self.factors
            .iter()
            .find(|(r, _)| r == alpha)
            .map_or(0, |f| f.1)
    }

    pub fn expand(&self, weight: (u32, u32)) -> IntPoly2 {
        let (a, b) = weight;
        let mut acc = IntPoly2::monomial(self.c.clone(), self.u, self.v);
        for (alpha, e) in &self.factors {
            let lin = IntPoly2::monomial(Rat::one(), 0, a)
                .add(&IntPoly2::monomial(-alpha.clone(), b, 0));
            acc = acc.mul(&lin.pow(*e));
        }
        acc
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SqhDecomposition {
    pub weight: (u32, u32),
    pub parts: Vec<SqhPart>,
}

impl SqhDecomposition {
    /// Builds a decomposition, filling in weighted degrees and checking the order.
    pub fn new(weight: (u32, u32), parts: Vec<SqhPart>) -> Result<Self> {
        let (a, b) = weight;
        if a == 0 || b == 0 || a.gcd(&b) != 1 {
            return Err(Error::NonCoprimeWeight(a as u64, b as u64));
        }
        if parts.is_empty() {
            return Err(Error::EmptyInput);
        }
        let mut parts = parts;
        for part in &mut parts {
            if part.c.is_zero() {
                return Err(Error::Schema("part with zero coefficient".into()));
            }
            part.factors.sort();
            let roots: BTreeSet<&Rat> = part.factors.iter().map(|f| &f.0).collect();
            if roots.len() != part.factors.len() {
                return Err(Error::Schema("repeated root within one part".into()));
            }
            if part.factors.iter().any(|f| f.0.is_zero() || f.1 == 0) {
                return Err(Error::Schema("factor roots and multiplicities must be nonzero".into()));
            }
            part.d = (a as u64 * b as u64) * part.factor_degree() as u64
                + a as u64 * part.u as u64
                + b as u64 * part.v as u64;
        }
        parts.sort_by_key(|p| p.d);
        if parts.windows(2).any(|w| w[0].d == w[1].d) {
            return Err(Error::Schema("parts must have distinct weighted degrees".into()));
        }
        Ok(Self { weight, parts })
    }

    pub fn expand(&self) -> IntPoly2 {
        self.parts
            .iter()
            .fold(IntPoly2::zero(), |acc, p| acc.add(&p.expand(self.weight)))
    }

    pub fn d0(&self) -> u64 {
        self.parts[0].d
    }

    pub fn to_json(&self) -> Value {
        let parts: Vec<Value> = self
            .parts
            .iter()
            .map(|p| {
                json!({
                    "c": fmt_rat(&p.c),
                    "u": p.u,
                    "v": p.v,
                    "d": p.d,
                    "factors": p.factors.iter().map(|(al, e)| json!({"alpha": fmt_rat(al), "e": e})).collect::<Vec<_>>(),
                })
            })
            .collect();
        json!({"weight": [self.weight.0, self.weight.1], "parts": parts})
    }
}

pub fn expand_sqh(d: &SqhDecomposition) -> IntPoly2 {
    d.expand()
}

/// Splits `f` into quasihomogeneous parts for `weight` and factors each over the rationals.
pub fn sqh_decompose(f: &IntPoly2, weight: (u32, u32)) -> Result<SqhDecomposition> {
    let (a, b) = weight;
    if a == 0 || b == 0 || a.gcd(&b) != 1 {
        return Err(Error::NonCoprimeWeight(a as u64, b as u64));
    }
    if f.is_zero() {
        return Err(Error::EmptyInput);
    }
    let mut groups: BTreeMap<u64, Vec<((u32, u32), Rat)>> = BTreeMap::new();
    for (&(i, j), c) in f.terms() {
        groups
            .entry(a as u64 * i as u64 + b as u64 * j as u64)
            .or_default()
            .push(((i, j), c.clone()));
    }
    let mut parts = Vec::new();
    for (d, terms) in groups {
        let j0 = terms.iter().map(|t| t.0 .1).min().unwrap();
        let i_max = terms.iter().find(|t| t.0 .1 == j0).unwrap().0 .0;
        let n = terms.iter().map(|t| (t.0 .1 - j0) / a).max().unwrap() as usize;
        let mut s = vec![Rat::zero(); n + 1];
        for ((_, j), c) in &terms {
            s[((j - j0) / a) as usize] = c.clone();
        }
        let s = UniPoly::new(s);
        let lc = s.0.last().unwrap().clone();
        let (roots, left) = s.rational_roots();
        if left > 0 {
            return Err(Error::IrrationalRoot { degree: d });
        }
        parts.push(SqhPart {
            c: lc,
            u: i_max - b * n as u32,
            v: j0,
            factors: roots,
            d,
        });
    }
    SqhDecomposition::new(weight, parts)
}

/// The univariate `s(z)` with `group(1, y) = y^j0 s(y^a)` for the terms of `f` of
/// weighted degree `d`.
pub fn weighted_group_poly(f: &IntPoly2, weight: (u32, u32), d: u64) -> Option<UniPoly> {
    let (a, b) = weight;
    let terms: Vec<_> = f
        .terms()
        .iter()
        .filter(|(&(i, j), _)| a as u64 * i as u64 + b as u64 * j as u64 == d)
        .collect();
    let j0 = terms.iter().map(|t| t.0 .1).min()?;
    let n = terms.iter().map(|t| (t.0 .1 - j0) / a).max()? as usize;
    let mut s = vec![Rat::zero(); n + 1];
    for (&(_, j), c) in terms {
        s[((j - j0) / a) as usize] = c.clone();
    }
    Some(UniPoly::new(s))
}

/// Polynomial over `F_p`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModPoly2 {
    pub p: u64,
    pub terms: BTreeMap<(u32, u32), u64>,
}

impl ModPoly2 {
    fn mulm(&self, a: u64, b: u64) -> u64 {
        (a as u128 * b as u128 % self.p as u128) as u64
    }

    fn powm(&self, x: u64, e: u32) -> u64 {
        crate::algebra::pow_mod(x, e as u64, self.p)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn eval(&self, x: u64, y: u64) -> u64 {
        let mut acc = 0u64;
        for (&(i, j), &c) in &self.terms {
            let t = self.mulm(c, self.mulm(self.powm(x, i), self.powm(y, j)));
            acc = (acc + t) % self.p;
        }
        acc
    }

    fn derivative(&self, wrt_x: bool) -> ModPoly2 {
        let mut terms = BTreeMap::new();
        for (&(i, j), &c) in &self.terms {
            let (k, ni, nj) = if wrt_x {
                (i, i.wrapping_sub(1), j)
            } else {
                (j, i, j.wrapping_sub(1))
            };
            if k == 0 {
                continue;
            }
            let nc = self.mulm(c, k as u64 % self.p);
            if nc != 0 {
                terms.insert((ni, nj), nc);
            }
        }
        ModPoly2 { p: self.p, terms }
    }

    pub fn dx(&self) -> ModPoly2 {
        self.derivative(true)
    }

    pub fn dy(&self) -> ModPoly2 {
        self.derivative(false)
    }

    /// Zeros with both coordinates nonzero.
    pub fn torus_zeros(&self) -> Vec<(u64, u64)> {
        let mut out = Vec::new();
        for x in 1..self.p {
            for y in 1..self.p {
                if self.eval(x, y) == 0 {
                    out.push((x, y));
                }
            }
        }
        out
    }
}

pub fn reduce_mod(f: &IntPoly2, p: u64) -> Result<ModPoly2> {
    let mut terms = BTreeMap::new();
    for (&k, c) in f.terms() {
        let r = residue(c, p).ok_or_else(|| Error::NonUnitDenominator(fmt_rat(c)))?;
        if r != 0 {
            terms.insert(k, r);
        }
    }
    Ok(ModPoly2 { p, terms })
}

pub fn singular_torus_points(g: &ModPoly2) -> BTreeSet<(u64, u64)> {
    let (gx, gy) = (g.dx(), g.dy());
    g.torus_zeros()
        .into_iter()
        .filter(|&(x, y)| gx.eval(x, y) == 0 && gy.eval(x, y) == 0)
        .collect()
}

/// Polynomial as supplied in an input document.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PolyInput {
    Expanded(IntPoly2),
    Sqh(SqhDecomposition),
}

impl PolyInput {
    pub fn expanded(&self) -> IntPoly2 {
        match self {
            PolyInput::Expanded(f) => f.clone(),
            PolyInput::Sqh(d) => d.expand(),
        }
    }

    pub fn sqh(&self) -> Option<&SqhDecomposition> {
        match self {
            PolyInput::Sqh(d) => Some(d),
            PolyInput::Expanded(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Problem {
    pub p: Option<u64>,
    pub poly: PolyInput,
    /// Canonical form of the document, used for hashing.
    pub canonical: Value,
}

fn value_rat(v: &Value, what: &str) -> Result<Rat> {
    match v {
        Value::Number(n) => n
            .as_i64()
            .map(rint)
            .ok_or_else(|| Error::Schema(format!("{what}: expected an integer"))),
        Value::String(s) => {
            parse_rat(s).ok_or_else(|| Error::Schema(format!("{what}: bad rational {s:?}")))
        }
        _ => Err(Error::Schema(format!("{what}: expected a number or \"num/den\""))),
    }
}

fn value_u32(v: &Value, what: &str) -> Result<u32> {
    v.as_u64()
        .and_then(|n| u32::try_from(n).ok())
        .ok_or_else(|| Error::Schema(format!("{what}: expected a non-negative integer")))
}

fn parse_expanded(v: &Value) -> Result<IntPoly2> {
    let arr = v
        .as_array()
        .ok_or_else(|| Error::Schema("expanded: expected an array".into()))?;
    let mut f = IntPoly2::zero();
    for t in arr {
        let t = t
            .as_array()
            .ok_or_else(|| Error::Schema("expanded term: expected an array".into()))?;
        let (c, i, j) = match t.len() {
            3 => (value_rat(&t[0], "coefficient")?, &t[1], &t[2]),
            4 => {
                let n = value_rat(&t[0], "coefficient numerator")?;
                let d = value_rat(&t[1], "coefficient denominator")?;
                if d.is_zero() {
                    return Err(Error::Schema("zero denominator".into()));
                }
                (n / d, &t[2], &t[3])
            }
            _ => return Err(Error::Schema("expanded term: expected 3 or 4 entries".into())),
        };
        f.add_term(value_u32(i, "exponent i")?, value_u32(j, "exponent j")?, c);
    }
    if f.is_zero() {
        return Err(Error::EmptyInput);
    }
    Ok(f)
}

fn parse_sqh(v: &Value) -> Result<SqhDecomposition> {
    let w = v["weight"]
        .as_array()
        .filter(|w| w.len() == 2)
        .ok_or_else(|| Error::Schema("sqh.weight: expected [a,b]".into()))?;
    let weight = (value_u32(&w[0], "weight")?, value_u32(&w[1], "weight")?);
    let parts = v["parts"]
        .as_array()
        .ok_or_else(|| Error::Schema("sqh.parts: expected an array".into()))?;
    let mut out = Vec::new();
    for p in parts {
        let factors = match &p["factors"] {
            Value::Null => vec![],
            Value::Array(fs) => fs
                .iter()
                .map(|f| Ok((value_rat(&f["alpha"], "alpha")?, value_u32(&f["e"], "e")?)))
                .collect::<Result<Vec<_>>>()?,
            _ => return Err(Error::Schema("factors: expected an array".into())),
        };
        out.push(SqhPart {
            c: value_rat(&p["c"], "c")?,
            u: value_u32(&p["u"], "u")?,
            v: value_u32(&p["v"], "v")?,
            factors,
            d: 0,
        });
    }
    SqhDecomposition::new(weight, out)
}

/// Parses an input document; the prime is optional here and validated by the caller.
pub fn parse_input(text: &str) -> Result<Problem> {
    let doc: Value = serde_json::from_str(text).map_err(|e| Error::Syntax(e.to_string()))?;
    if !doc.is_object() {
        return Err(Error::Schema("document must be a JSON object".into()));
    }
    let p = match &doc["p"] {
        Value::Null => None,
        v => Some(
            v.as_u64()
                .ok_or_else(|| Error::Schema("p: expected a positive integer".into()))?,
        ),
    };
    let body = if doc["polynomial"].is_object() {
        &doc["polynomial"]
    } else {
        &doc
    };
    let poly = if !body["expanded"].is_null() {
        PolyInput::Expanded(parse_expanded(&body["expanded"])?)
    } else if !body["sqh"].is_null() {
        PolyInput::Sqh(parse_sqh(&body["sqh"])?)
    } else {
        return Err(Error::Schema("expected \"expanded\" or \"sqh\"".into()));
    };
    let canonical = match &poly {
        PolyInput::Expanded(f) => json!({"p": p, "expanded": f.to_json()}),
        PolyInput::Sqh(d) => json!({"p": p, "sqh": d.to_json()}),
    };
    Ok(Problem { p, poly, canonical })
}
