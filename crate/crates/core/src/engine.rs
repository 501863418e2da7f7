//! Assembly of `Z(s, f, v)` from the unit torus, the cones of a subdivision and,
//! for degenerate facets, the arithmetic Newton polygons.
//!
//! The degenerate path works in coordinates `x = u^a w^s1`, `y = u^b w^t1` with
//! `a t1 - b s1 = 1`, where every part becomes `c_j u^{d_j} w^{B_j} P_j(w)`. Near a
//! root `theta` of `P_0` the valuation of `f^{(m)}` at `w = theta + pi^k w'` is the
//! envelope `min_j (d_j - d_0) m + e_{j,theta} k`, with a genuine integral only at
//! the vertices of the arithmetic polygon.

use std::collections::BTreeSet;

use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use serde_json::{json, Value};

use crate::algebra::{
    floor_rat, floor_sum, fmt_rat, geometric_sum, pow_mod, rat, real_pole_parts,
    residue, rint, vp, zeta_to_json, zeta_to_latex, zr_add, zr_reduce, DenFactor, PolyQT,
    Rat, ZetaRat,
};
use crate::arith::{arith_newton_data, arith_nondegeneracy_check, ArithPolygon, ThetaRoot};
use crate::error::{Error, Result};
use crate::geom::{
    conical_subdivision, face_function, geom_candidate_poles, geom_polygon, poles_json, Cone,
    FaceKind, GeomPolygon, Mode, Pt,
};
use crate::poly::{reduce_mod, singular_torus_points, IntPoly2, SqhDecomposition};

/// `(1 - Q)^2`.
fn unit_measure() -> PolyQT {
    let one_minus_q = PolyQT::one_minus(DenFactor::new(1, 0));
    &one_minus_q * &one_minus_q
}

fn mono(q: u64, t: u64) -> PolyQT {
    PolyQT::monomial(Rat::one(), q as u32, t as u32)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UnitIntegralResult {
    pub value: ZetaRat,
    /// Same value kept over `1 - QT` even when no torus zero exists.
    pub spf: ZetaRat,
    pub torus_count: u64,
    pub smooth: bool,
}

/// `int_{units^2} |f|^s` when every torus zero of the reduction is smooth.
pub fn unit_torus_integral(f: &IntPoly2, p: u64) -> Result<UnitIntegralResult> {
    let g = reduce_mod(f, p)?;
    if let Some(&(x, y)) = singular_torus_points(&g).iter().next() {
        return Err(Error::SingularReduction(x, y));
    }
    let n = g.torus_zeros().len() as u64;
    let nq = rint(n as i64);
    let mut head = unit_measure();
    head.add_term(2, 0, -nq.clone());
    // N Q^2 (1 - Q) T / (1 - QT)
    let mut tail = PolyQT::zero();
    tail.add_term(2, 1, nq.clone());
    tail.add_term(3, 1, -nq);
    let value = ZetaRat::over(&(&head * &PolyQT::one_minus(DenFactor::new(1, 1))) + &tail, &[(1, 1)]);
    Ok(UnitIntegralResult {
        value: zr_reduce(&value),
        spf: value,
        torus_count: n,
        smooth: true,
    })
}

fn cone_face_function(f: &IntPoly2, cone: &Cone) -> IntPoly2 {
    face_function(f, &cone.face)
}

/// `I(f_face) * sum over the half-open parallelepiped / prod (1 - Q^sigma T^m)`.
pub fn cone_contribution_2d(cone: &Cone, f: &IntPoly2, p: u64) -> Result<ZetaRat> {
    let FaceKind::Vertex(v) = cone.face.kind else {
        return Err(Error::NonMonomialFace(cone.label()));
    };
    if cone.face.points.len() != 1 {
        return Err(Error::NonMonomialFace(cone.label()));
    }
    let unit = unit_torus_integral(&cone_face_function(f, cone), p)?.value;
    let mut num = PolyQT::zero();
    for k in cone.parallelepiped() {
        num.add_term(
            k.0 + k.1,
            (v.0 as u64 * k.0 as u64 + v.1 as u64 * k.1 as u64) as u32,
            Rat::one(),
        );
    }
    let dens: Vec<(u32, u32)> = cone
        .m_values
        .iter()
        .map(|&(s, m)| (s as u32, m as u32))
        .collect();
    Ok(zr_reduce(&(&unit * &ZetaRat::over(num, &dens))))
}

/// `I(f_face) Q^sigma T^m / (1 - Q^sigma T^m)`; degenerate compact facets are
/// reported as [`Error::DegenerateFace`].
pub fn cone_contribution_ray_nondeg(
    cone: &Cone,
    poly: &GeomPolygon,
    f: &IntPoly2,
    p: u64,
) -> Result<ZetaRat> {
    let (sigma, m) = cone.m_values[0];
    let face = cone_face_function(f, cone);
    let unit = match unit_torus_integral(&face, p) {
        Ok(u) => u.value,
        Err(Error::SingularReduction(..)) => {
            return Err(match cone.face.kind {
                FaceKind::Facet(k) if poly.facets[k].compact => Error::DegenerateFace(cone.label()),
                _ => Error::UnsupportedClass(format!(
                    "degenerate face on non-compact ray {}",
                    cone.label()
                )),
            })
        }
        Err(e) => return Err(e),
    };
    let geo = geometric_sum(1, None, (sigma as u32, m as u32))?;
    Ok(zr_reduce(&(&unit * &geo)))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FamilyPart {
    pub c: Rat,
    /// `d_j - d_0`.
    pub gap: u64,
    /// Exponent of `w`.
    pub b_exp: u64,
    pub factors: Vec<(Rat, u32)>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransformedFamily {
    pub weight: (u32, u32),
    /// `x = u^a w^s1`, `y = u^b w^t1`.
    pub s1: u64,
    pub t1: u64,
    pub d0: u64,
    pub parts: Vec<FamilyPart>,
}

/// Solves `a t1 - b s1 = 1` with `0 <= s1 < a`, `1 <= t1 <= b`.
fn unimodular_completion(a: u32, b: u32) -> (u64, u64) {
    let (a, b) = (a as i64, b as i64);
    let e = a.extended_gcd(&b);
    let t1 = e.x.rem_euclid(b);
    let t1 = if t1 == 0 { b } else { t1 };
    let s1 = (a * t1 - 1) / b;
    debug_assert_eq!(a * t1 - b * s1, 1);
    (s1 as u64, t1 as u64)
}

pub fn phi_transform(d: &SqhDecomposition) -> TransformedFamily {
    let (a, b) = d.weight;
    let (s1, t1) = unimodular_completion(a, b);
    let d0 = d.d0();
    let parts = d
        .parts
        .iter()
        .map(|part| {
            let e = part.factor_degree() as u64;
            FamilyPart {
                c: part.c.clone(),
                gap: part.d - d0,
                b_exp: s1 * (part.u as u64 + b as u64 * e) + t1 * part.v as u64,
                factors: part.factors.clone(),
            }
        })
        .collect();
    TransformedFamily {
        weight: d.weight,
        s1,
        t1,
        d0,
        parts,
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ThetaExpansion {
    pub theta: ThetaRoot,
    pub l0: i64,
    /// `Const(j, theta)` per part.
    pub consts: Vec<i64>,
    pub m0: i64,
}

fn val(r: &Rat, p: u64) -> i64 {
    vp(r, p).unwrap_or(i64::MAX / 4)
}

/// Largest valuation of a difference of two distinct roots of the leading part.
pub fn l_f0(tf: &TransformedFamily, p: u64) -> i64 {
    let roots = &tf.parts[0].factors;
    let mut l = 0;
    for (i, (x, _)) in roots.iter().enumerate() {
        for (y, _) in &roots[i + 1..] {
            l = l.max(val(&(x - y), p));
        }
    }
    l
}

pub fn theta_expansion(tf: &TransformedFamily, theta: &ThetaRoot, p: u64) -> ThetaExpansion {
    let l0 = l_f0(tf, p);
    let vt = val(&theta.theta, p);
    let consts: Vec<i64> = tf
        .parts
        .iter()
        .map(|part| {
            let mut c = val(&part.c, p) + part.b_exp as i64 * vt;
            for (alpha, e) in &part.factors {
                if *alpha == theta.theta {
                    c += *e as i64 * (1 + l0);
                } else {
                    c += *e as i64 * val(&(&theta.theta - alpha), p);
                }
            }
            c
        })
        .collect();
    let m0 = consts[1..]
        .iter()
        .map(|cj| consts[0] + 1 - cj)
        .max()
        .unwrap_or(1)
        .max(1);
    ThetaExpansion {
        theta: theta.clone(),
        l0,
        consts,
        m0,
    }
}

/// Checks the class the closed form covers: unit coefficients, integral roots and
/// every other root incongruent to each unit root of the leading part.
fn check_engine_class(tf: &TransformedFamily, p: u64) -> Result<()> {
    for (j, part) in tf.parts.iter().enumerate() {
        if val(&part.c, p) != 0 {
            return Err(Error::UnsupportedClass(format!(
                "coefficient of part {j} is not a p-adic unit"
            )));
        }
        for (alpha, _) in &part.factors {
            if val(alpha, p) < 0 {
                return Err(Error::UnsupportedClass(format!(
                    "root {} of part {j} is not p-integral",
                    fmt_rat(alpha)
                )));
            }
        }
    }
    for (theta, _) in tf.parts[0].factors.iter().filter(|(t, _)| val(t, p) == 0) {
        let tbar = residue(theta, p).unwrap();
        for part in &tf.parts {
            for (alpha, _) in &part.factors {
                if alpha != theta && residue(alpha, p) == Some(tbar) {
                    return Err(Error::UnsupportedClass(format!(
                        "roots {} and {} are congruent mod {p}",
                        fmt_rat(theta),
                        fmt_rat(alpha)
                    )));
                }
            }
        }
    }
    Ok(())
}

/// Per-root data the level integrals need.
#[derive(Clone, Debug)]
struct RootBranch {
    poly: ArithPolygon,
    /// `U_i` per vertex.
    vertex_units: Vec<ZetaRat>,
}

fn vertex_unit(tf: &TransformedFamily, poly: &ArithPolygon, k: usize, p: u64) -> Result<ZetaRat> {
    let theta = &poly.theta.theta;
    let tbar = residue(theta, p).unwrap();
    let mut g = IntPoly2::zero();
    for &j in &poly.vertex_parts[k - 1] {
        let part = &tf.parts[j];
        let mut c = residue(&part.c, p).unwrap();
        c = c * pow_mod(tbar, part.b_exp, p) % p;
        let mut e_theta = 0;
        for (alpha, e) in &part.factors {
            if alpha == theta {
                e_theta = *e;
            } else {
                let diff = (tbar + p - residue(alpha, p).unwrap()) % p;
                c = c * pow_mod(diff, *e as u64, p) % p;
            }
        }
        g.add_term(part.gap as u32, e_theta, rint(c as i64));
    }
    Ok(unit_torus_integral(&g, p)?.spf)
}

fn branches(tf: &TransformedFamily, d: &SqhDecomposition, p: u64) -> Result<Vec<RootBranch>> {
    let mut out = Vec::new();
    for (theta, e0) in &tf.parts[0].factors {
        if val(theta, p) != 0 {
            continue;
        }
        let root = ThetaRoot {
            theta: theta.clone(),
            e0: *e0,
            excluded: false,
        };
        let poly = crate::arith::arith_polygon(d, &root);
        let vertex_units = (1..=poly.r())
            .map(|k| vertex_unit(tf, &poly, k, p))
            .collect::<Result<Vec<_>>>()?;
        out.push(RootBranch { poly, vertex_units });
    }
    Ok(out)
}

/// `(1 - Q)^2 - r0 Q (1 - Q)`, the measure of the classes off the unit roots.
fn off_root_constant(r0: usize) -> ZetaRat {
    let mut k = unit_measure();
    k.add_term(1, 0, -rint(r0 as i64));
    k.add_term(2, 0, rint(r0 as i64));
    ZetaRat::from_poly(k)
}

fn taus_with_zero(poly: &ArithPolygon) -> Vec<Rat> {
    let mut t = vec![Rat::zero()];
    t.extend(poly.taus.iter().cloned());
    t
}

fn floor_u64(r: &Rat) -> u64 {
    floor_rat(r).to_u64().expect("non-negative floor")
}

/// `J(s, m, theta)` evaluated for one level `m`.
/// `(1-Q)^2 sum_{k=lo}^{hi} Q^k T^{e k}`, kept polynomial when finite.
fn segment_sum(lo: u64, hi: Option<u64>, e: u32) -> Result<ZetaRat> {
    match hi {
        Some(hi) => {
            let mut poly = PolyQT::zero();
            for k in lo..=hi {
                poly.add_term(k as u32, e * k as u32, Rat::one());
            }
            Ok(ZetaRat::from_poly(&poly * &unit_measure()))
        }
        None if e == 0 => Ok(ZetaRat::from_poly(
            &mono(lo, 0) * &PolyQT::one_minus(DenFactor::new(1, 0)),
        )),
        None => Ok(geometric_sum(lo, None, (1, e))?.mul_poly(&unit_measure())),
    }
}

fn level_root_integral(b: &RootBranch, d0: u64, m: u64) -> Result<ZetaRat> {
    let poly = &b.poly;
    let taus = taus_with_zero(poly);
    let r = poly.r();
    let mm = rint(m as i64);
    let mut acc = ZetaRat::zero();
    for i in 0..=r {
        let (di, ei) = poly.segments[i];
        let lo = floor_u64(&(&taus[i] * &mm)) + 1;
        let hi = (i < r).then(|| floor_u64(&(&taus[i + 1] * &mm)));
        let term = segment_sum(lo, hi, ei)?.mul_poly(&mono(0, (di - d0) * m));
        acc = zr_add(&acc, &term);
    }
    let mut units = Vec::new();
    for k in 1..=r {
        let kt = &poly.taus[k - 1] * &mm;
        if !kt.is_integer() {
            continue;
        }
        let kk = kt.to_integer().to_u64().unwrap();
        let (dk, ek) = poly.segments[k - 1];
        let shift = mono(kk, (dk - d0) * m + ek as u64 * kk);
        acc = zr_add(&acc, &ZetaRat::from_poly(-&(&unit_measure() * &shift)));
        units.push(b.vertex_units[k - 1].mul_poly(&shift));
    }
    Ok(units.iter().fold(acc, |a, u| zr_add(&a, u)))
}

fn level_integral(branches: &[RootBranch], d0: u64, m: u64) -> Result<ZetaRat> {
    let mut acc = off_root_constant(branches.len());
    for b in branches {
        acc = zr_add(&acc, &level_root_integral(b, d0, m)?);
    }
    Ok(acc)
}

/// `sum_{m >= start}` of the level integrals times `Q^{(a+b)m} T^{d0 m}`, in closed form.
fn tail_sum(branches: &[RootBranch], ab: u64, d0: u64, start: u64) -> Result<ZetaRat> {
    let lin = |d: u64, e: u32| (ab as i64, 1, d as i64, e as i64);
    let mut acc =
        &geometric_sum(start, None, (ab as u32, d0 as u32))? * &off_root_constant(branches.len());
    let mut units = Vec::new();
    for b in branches {
        let poly = &b.poly;
        let taus = taus_with_zero(poly);
        let r = poly.r();
        for i in 0..=r {
            let (di, ei) = poly.segments[i];
            // (1-Q)^2 z/(1-z) [sum_m X_m z^{floor(m tau_i)} - sum_m X_m z^{floor(m tau_{i+1})}]
            let z = ZetaRat::over(mono(1, ei as u64), &[(1, ei)]);
            let lower = floor_sum(start, &taus[i], lin(di, ei))?;
            let inner = if i < r {
                &lower - &floor_sum(start, &taus[i + 1], lin(di, ei))?
            } else {
                lower
            };
            let term = if ei == 0 {
                // (1-Q)^2 Q/(1-Q) = Q(1-Q)
                inner.mul_poly(&(&mono(1, 0) * &PolyQT::one_minus(DenFactor::new(1, 0))))
            } else {
                (&z * &inner).mul_poly(&unit_measure())
            };
            acc = zr_add(&acc, &term);
        }
        for k in 1..=r {
            let tau = &poly.taus[k - 1];
            let n = tau.numer().to_u64().unwrap();
            let dd = tau.denom().to_u64().unwrap();
            let (dk, ek) = poly.segments[k - 1];
            let first = start.div_ceil(dd);
            let geo = geometric_sum(
                first,
                None,
                ((dd * ab + n) as u32, (dd * dk + ek as u64 * n) as u32),
            )?;
            acc = zr_add(&acc, &geo.mul_poly(&-&unit_measure()));
            units.push(&geo * &b.vertex_units[k - 1]);
        }
    }
    Ok(units.iter().fold(acc, |a, u| zr_add(&a, u)))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DegenerateRay {
    pub value: ZetaRat,
    pub expansions: Vec<ThetaExpansion>,
    pub m0: i64,
    pub c_f: i64,
    pub m_star: u64,
}

/// The contribution of the ray through a degenerate facet with normal `d.weight`.
pub fn degenerate_ray_contribution(d: &SqhDecomposition, p: u64) -> Result<DegenerateRay> {
    let tf = phi_transform(d);
    check_engine_class(&tf, p)?;
    let expansions: Vec<ThetaExpansion> = tf.parts[0]
        .factors
        .iter()
        .filter(|(t, _)| val(t, p) == 0)
        .map(|(t, e)| {
            let root = ThetaRoot { theta: t.clone(), e0: *e, excluded: false };
            theta_expansion(&tf, &root, p)
        })
        .collect();
    let m0 = expansions.iter().map(|e| e.m0).max().unwrap_or(1);
    let c_f = 1 + tf.parts.iter().map(|part| val(&part.c, p)).max().unwrap_or(0);
    let m_star = m0.max(c_f).max(1) as u64;
    let value = degenerate_ray_with_threshold(d, p, m_star)?;
    Ok(DegenerateRay {
        value,
        expansions,
        m0,
        c_f,
        m_star,
    })
}

/// Levels below `threshold` are summed one by one, the rest in closed form.
pub fn degenerate_ray_with_threshold(d: &SqhDecomposition, p: u64, threshold: u64) -> Result<ZetaRat> {
    let tf = phi_transform(d);
    check_engine_class(&tf, p)?;
    let br = branches(&tf, d, p)?;
    let ab = (d.weight.0 + d.weight.1) as u64;
    let d0 = tf.d0;
    let threshold = threshold.max(1);
    let mut acc = ZetaRat::zero();
    for m in 1..threshold {
        let lvl = level_integral(&br, d0, m)?;
        acc = zr_add(&acc, &lvl.mul_poly(&mono(ab * m, d0 * m)));
    }
    acc = zr_add(&acc, &tail_sum(&br, ab, d0, threshold)?);
    Ok(acc)
}

/// `Q^{(a+b)m} T^{d0 m} I(s, f^{(m)})` for each `m` in `1..=levels`, summed.
pub fn degenerate_ray_truncated(d: &SqhDecomposition, p: u64, levels: u64) -> Result<ZetaRat> {
    let tf = phi_transform(d);
    check_engine_class(&tf, p)?;
    let br = branches(&tf, d, p)?;
    let ab = (d.weight.0 + d.weight.1) as u64;
    let mut acc = ZetaRat::zero();
    for m in 1..=levels {
        let lvl = level_integral(&br, tf.d0, m)?;
        acc = zr_add(&acc, &lvl.mul_poly(&mono(ab * m, tf.d0 * m)));
    }
    Ok(acc)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConeEntry {
    pub label: String,
    pub generators: Vec<Pt>,
    pub route: &'static str,
    pub value: ZetaRat,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FacetDecision {
    pub normal: Pt,
    pub thetas: Vec<Rat>,
    pub m0: i64,
    pub c_f: i64,
    pub m_star: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ZetaResult {
    pub p: u64,
    pub mode: Mode,
    pub total: ZetaRat,
    pub unit_part: ZetaRat,
    pub per_cone: Vec<ConeEntry>,
    /// `{-1}`, geometric and arithmetic candidates, and `-sigma/m` of every ray.
    pub candidate_set: BTreeSet<Rat>,
    /// `{-1}` with the geometric and arithmetic candidates only.
    pub strict_set: BTreeSet<Rat>,
    pub actual_pole_parts: BTreeSet<Rat>,
    pub decisions: Vec<FacetDecision>,
}

pub fn assemble_zeta(f: &IntPoly2, p: u64, mode: Mode) -> Result<ZetaResult> {
    assemble_zeta_with(f, p, mode, None)
}

/// As [`assemble_zeta`], using `given` for the facet whose normal is its weight.
pub fn assemble_zeta_with(
    f: &IntPoly2,
    p: u64,
    mode: Mode,
    given: Option<&SqhDecomposition>,
) -> Result<ZetaResult> {
    if f.is_zero() {
        return Err(Error::EmptyInput);
    }
    if !f.coeff(0, 0).is_zero() {
        return Err(Error::UnsupportedClass("f(0,0) is not zero".into()));
    }
    let poly = geom_polygon(&f.support());
    let subdiv = conical_subdivision(&poly, mode);
    let arith = arith_newton_data(f, p, given)?;
    let unit_part = unit_torus_integral(f, p)?.value;

    let mut checked = false;
    let mut per_cone = Vec::new();
    let mut decisions = Vec::new();
    for cone in &subdiv.cones {
        let (route, value) = if cone.dim() == 2 {
            ("monomial", cone_contribution_2d(cone, f, p)?)
        } else {
            match cone_contribution_ray_nondeg(cone, &poly, f, p) {
                Ok(v) => ("nondegenerate", v),
                Err(Error::DegenerateFace(_)) => {
                    if !checked {
                        let check = arith_nondegeneracy_check(f, &arith, p)?;
                        if let Some(e) = check.first_failure() {
                            return Err(e);
                        }
                        checked = true;
                    }
                    let normal = cone.generators[0];
                    let fa = arith.facet(normal).ok_or_else(|| {
                        Error::UnsupportedClass(format!("no arithmetic data for {}", cone.label()))
                    })?;
                    let d = fa.decomposition.as_ref().ok_or_else(|| {
                        Error::UnsupportedClass(format!("facet {} is not factored", cone.label()))
                    })?;
                    let ray = degenerate_ray_contribution(d, p)?;
                    decisions.push(FacetDecision {
                        normal,
                        thetas: ray.expansions.iter().map(|e| e.theta.theta.clone()).collect(),
                        m0: ray.m0,
                        c_f: ray.c_f,
                        m_star: ray.m_star,
                    });
                    ("arithmetic", ray.value)
                }
                Err(e) => return Err(e),
            }
        };
        per_cone.push(ConeEntry {
            label: cone.label(),
            generators: cone.generators.clone(),
            route,
            value,
        });
    }
    let total = zr_reduce(
        &per_cone
            .iter()
            .fold(unit_part.clone(), |acc, c| zr_add(&acc, &c.value)),
    );

    let mut strict_set: BTreeSet<Rat> = [rint(-1)].into_iter().collect();
    strict_set.extend(geom_candidate_poles(&poly));
    strict_set.extend(arith.candidate_poles());
    let mut candidate_set = strict_set.clone();
    for cone in subdiv.cones.iter().filter(|c| c.dim() == 1) {
        let (sigma, m) = cone.m_values[0];
        if m != 0 {
            candidate_set.insert(rat(-(sigma as i64), m as i64));
        }
    }
    let actual_pole_parts = real_pole_parts(&total);
    Ok(ZetaResult {
        p,
        mode,
        total,
        unit_part,
        per_cone,
        candidate_set,
        strict_set,
        actual_pole_parts,
        decisions,
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Containment {
    pub offending: BTreeSet<Rat>,
    pub offending_strict: BTreeSet<Rat>,
}

impl Containment {
    pub fn contained(&self) -> bool {
        self.offending.is_empty()
    }

    pub fn contained_strict(&self) -> bool {
        self.offending_strict.is_empty()
    }
}

pub fn pole_containment(r: &ZetaResult) -> Containment {
    Containment {
        offending: r.actual_pole_parts.difference(&r.candidate_set).cloned().collect(),
        offending_strict: r.actual_pole_parts.difference(&r.strict_set).cloned().collect(),
    }
}

impl ZetaResult {
    pub fn to_json(&self) -> Value {
        let c = pole_containment(self);
        let per_cone: Vec<Value> = self
            .per_cone
            .iter()
            .map(|e| {
                json!({
                    "cone": e.label,
                    "generators": e.generators.iter().map(|g| json!([g.0, g.1])).collect::<Vec<_>>(),
                    "route": e.route,
                    "value": zeta_to_json(&e.value),
                })
            })
            .collect();
        json!({
            "p": self.p,
            "mode": self.mode.name(),
            "total": zeta_to_json(&self.total),
            "unit_part": zeta_to_json(&self.unit_part),
            "per_cone": per_cone,
            "candidate_set": poles_json(&self.candidate_set),
            "strict_set": poles_json(&self.strict_set),
            "actual_pole_parts": poles_json(&self.actual_pole_parts),
            "containment": {
                "operational": c.contained(),
                "strict": c.contained_strict(),
                "offending": poles_json(&c.offending),
                "offending_strict": poles_json(&c.offending_strict),
            },
            "decisions": self.decisions_json(),
        })
    }

    pub fn decisions_json(&self) -> Value {
        Value::Array(
            self.decisions
                .iter()
                .map(|d| {
                    json!({
                        "facet": [d.normal.0, d.normal.1],
                        "thetas": d.thetas.iter().map(fmt_rat).collect::<Vec<_>>(),
                        "M0": d.m0,
                        "c_f": d.c_f,
                        "M_star": d.m_star,
                    })
                })
                .collect(),
        )
    }

    pub fn to_latex(&self) -> String {
        let mut terms = vec![zeta_to_latex(&self.unit_part)];
        terms.extend(self.per_cone.iter().map(|c| zeta_to_latex(&c.value)));
        let list = |s: &BTreeSet<Rat>| s.iter().map(latex_rat_signed).collect::<Vec<_>>().join(", ");
        format!(
            "Z(s) = {}\n\\\\ = {}\n\\\\ \\text{{candidate real parts: }} \\{{{}\\}}\n\\\\ \\text{{real parts of poles: }} \\{{{}\\}}\n",
            terms.join(" + "),
            zeta_to_latex(&self.total),
            list(&self.strict_set),
            list(&self.actual_pole_parts)
        )
    }
}

fn latex_rat_signed(r: &Rat) -> String {
    if r.denom().is_one() {
        return r.numer().to_string();
    }
    let sign = if r < &Rat::zero() { "-" } else { "" };
    format!("{sign}\\frac{{{}}}{{{}}}", r.numer().magnitude(), r.denom())
}

/// Quick lookup of the per-cone value by generators.
pub fn cone_value<'a>(r: &'a ZetaResult, gens: &[Pt]) -> Option<&'a ZetaRat> {
    r.per_cone
        .iter()
        .find(|c| c.generators == gens)
        .map(|c| &c.value)
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{zr_series, DenFactor};
    use crate::poly::SqhPart;

    fn f31() -> IntPoly2 {
        IntPoly2::from_ints(&[(1, 0, 6), (-2, 2, 3), (1, 4, 0), (1, 4, 4)])
    }

    fn sqh(weight: (u32, u32), parts: &[(Rat, u32, u32, Vec<(Rat, u32)>)]) -> SqhDecomposition {
        let parts = parts
            .iter()
            .map(|(c, u, v, fs)| SqhPart { c: c.clone(), u: *u, v: *v, factors: fs.clone(), d: 0 })
            .collect();
        SqhDecomposition::new(weight, parts).unwrap()
    }

    fn f31_sqh() -> SqhDecomposition {
        sqh((3, 2), &[(rint(1), 0, 0, vec![(rint(1), 2)]), (rint(1), 4, 4, vec![])])
    }

    fn g_sqh(a: i64) -> SqhDecomposition {
        sqh(
            (3, 2),
            &[(rint(1), 0, 0, vec![(rint(1), 2), (rint(a), 1)]), (rint(1), 4, 4, vec![])],
        )
    }

    fn series(z: &ZetaRat, q: u64, order: usize) -> Vec<Rat> {
        zr_series(z, q, order).unwrap().coeffs
    }

    fn one_minus_q_pow(k: u32) -> PolyQT {
        let mut acc = PolyQT::one();
        for _ in 0..k {
            acc = &acc * &PolyQT::one_minus(DenFactor::new(1, 0));
        }
        acc
    }

    fn entry(k: u32, q: u32, t: u32, dens: &[(u32, u32)]) -> ZetaRat {
        ZetaRat::over(&one_minus_q_pow(k) * &mono(q as u64, t as u64), dens)
    }

    #[test]
    fn unit_integral_examples() {
        let r = unit_torus_integral(&IntPoly2::from_ints(&[(1, 1, 0)]), 3).unwrap();
        assert_eq!(r.torus_count, 0);
        assert_eq!(series(&r.value, 3, 0), vec![rat(4, 9)]);

        for p in [3u64, 5, 7] {
            let r = unit_torus_integral(&IntPoly2::from_ints(&[(1, 0, 1), (-1, 0, 0)]), p).unwrap();
            assert_eq!(r.torus_count, p - 1);
            // (1-Q)(1-2Q) + (1-Q)^2 Q T/(1-QT), by cosets of y - 1
            let head = &one_minus_q_pow(1) * &(&PolyQT::one() - &PolyQT::monomial(rint(2), 1, 0));
            let direct = zr_add(&ZetaRat::from_poly(head), &entry(2, 1, 1, &[(1, 1)]));
            assert_eq!(series(&r.value, p, 12), series(&direct, p, 12), "p={p}");
        }

        let r = unit_torus_integral(&f31(), 3).unwrap();
        assert_eq!(r.torus_count, 0);
        assert_eq!(series(&r.value, 3, 0), vec![rat(4, 9)]);

        let double = IntPoly2::from_ints(&[(1, 0, 2), (-2, 1, 1), (1, 2, 0)]);
        assert!(matches!(unit_torus_integral(&double, 5), Err(Error::SingularReduction(..))));
    }

    #[test]
    fn cone_examples() {
        let f = f31();
        let poly = geom_polygon(&f.support());
        let sub = conical_subdivision(&poly, Mode::Simple);
        let c = &sub.cones;
        assert!(cone_contribution_2d(&c[1], &f, 3).unwrap().value_eq(&entry(1, 3, 4, &[(2, 4)])));
        assert!(cone_contribution_2d(&c[3], &f, 3).unwrap().value_eq(&entry(2, 7, 16, &[(2, 4), (5, 12)])));
        assert!(cone_contribution_ray_nondeg(&c[0], &poly, &f, 3).unwrap().value_eq(&entry(1, 1, 0, &[])));
        assert!(cone_contribution_ray_nondeg(&c[6], &poly, &f, 3).unwrap().value_eq(&entry(2, 3, 6, &[(3, 6)])));
        assert!(matches!(
            cone_contribution_ray_nondeg(&c[4], &poly, &f, 3),
            Err(Error::DegenerateFace(_))
        ));

        let g = g_sqh(2).expand();
        let poly = geom_polygon(&g.support());
        let sub = conical_subdivision(&poly, Mode::Simple);
        let v = cone_contribution_ray_nondeg(&sub.cones[6], &poly, &g, 5).unwrap();
        assert!(v.value_eq(&entry(2, 3, 9, &[(3, 9)])));
    }

    #[test]
    fn minimal_cone_matches_simple_refinement() {
        let f = f31();
        let poly = geom_polygon(&f.support());
        let simple = conical_subdivision(&poly, Mode::Simple);
        let minimal = conical_subdivision(&poly, Mode::Minimal);
        let big = cone_contribution_2d(&minimal.cones[1], &f, 3).unwrap();
        let parts = [
            cone_contribution_2d(&simple.cones[1], &f, 3).unwrap(),
            cone_contribution_ray_nondeg(&simple.cones[2], &poly, &f, 3).unwrap(),
            cone_contribution_2d(&simple.cones[3], &f, 3).unwrap(),
        ];
        let sum = parts.iter().fold(ZetaRat::zero(), |a, z| zr_add(&a, z));
        assert_eq!(series(&big, 3, 40), series(&sum, 3, 40));
    }

    /// `f_j(u^a w^s1, u^b w^t1)` against `c u^{d_j} w^{B_j} P_j(w)`.
    fn check_family(d: &SqhDecomposition) {
        let tf = phi_transform(d);
        let (a, b) = d.weight;
        for (part, fp) in d.parts.iter().zip(&tf.parts) {
            let mut lhs = IntPoly2::zero();
            for (&(i, j), c) in part.expand(d.weight).terms() {
                lhs.add_term(a * i + b * j, (tf.s1 as u32) * i + (tf.t1 as u32) * j, c.clone());
            }
            let mut rhs = IntPoly2::monomial(fp.c.clone(), (part.d) as u32, fp.b_exp as u32);
            for (alpha, e) in &fp.factors {
                let lin = IntPoly2::monomial(Rat::one(), 0, 1).add(&IntPoly2::monomial(-alpha.clone(), 0, 0));
                rhs = rhs.mul(&lin.pow(*e));
            }
            assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn transform_examples() {
        let tf = phi_transform(&f31_sqh());
        assert_eq!(tf.parts.iter().map(|p| p.gap).collect::<Vec<_>>(), vec![0, 8]);
        assert_eq!(tf.parts[0].factors, vec![(rint(1), 2)]);
        assert_eq!(tf.parts[0].b_exp, 4);
        assert_eq!(tf.parts[1].b_exp, 8);
        check_family(&f31_sqh());

        let tf = phi_transform(&g_sqh(2));
        assert_eq!(tf.parts[1].gap, 2);
        assert_eq!(tf.parts[0].factors, vec![(rint(1), 2), (rint(2), 1)]);
        check_family(&g_sqh(2));

        let d = sqh((1, 1), &[(rint(1), 0, 0, vec![(rint(1), 2)]), (rint(1), 3, 0, vec![])]);
        let tf = phi_transform(&d);
        assert_eq!((tf.s1, tf.t1), (0, 1));
        check_family(&d);
        check_family(&sqh((5, 3), &[(rint(1), 0, 0, vec![(rint(1), 4), (rint(2), 1), (rint(3), 1)]), (rint(1), 20, 0, vec![])]));
    }

    #[test]
    fn theta_expansion_examples() {
        let tf = phi_transform(&f31_sqh());
        let root = ThetaRoot { theta: rint(1), e0: 2, excluded: false };
        let e = theta_expansion(&tf, &root, 3);
        assert_eq!((e.l0, e.consts.clone(), e.m0), (0, vec![2, 0], 3));

        let tf = phi_transform(&g_sqh(2));
        let e = theta_expansion(&tf, &root, 5);
        assert_eq!(e.l0, 0);
        assert_eq!(e.consts[0], 2);

        let d = sqh((3, 2), &[(rint(1), 0, 0, vec![(rint(1), 2), (rint(26), 1)]), (rint(1), 4, 4, vec![])]);
        assert_eq!(l_f0(&phi_transform(&d), 5), 2);
    }

    #[test]
    fn degenerate_ray_for_f() {
        for p in [3u64, 5] {
            let ray = degenerate_ray_contribution(&f31_sqh(), p).unwrap();
            assert_eq!(ray.m0, 3);
            assert_eq!(ray.m_star, 3);
            let dens: BTreeSet<(u32, u32)> = ray.value.den.keys().map(|f| (f.alpha, f.beta)).collect();
            assert_eq!(dens, [(5, 12), (1, 2), (9, 20), (1, 1)].into_iter().collect(), "p={p}");
            assert_eq!(
                real_pole_parts(&ray.value),
                [rint(-1), rat(-1, 2), rat(-5, 12), rat(-9, 20)].into_iter().collect()
            );
            // 1 - QT^2 divides out; 1 - QT survives only when -1 is a square mod p
            let reduced: BTreeSet<(u32, u32)> =
                zr_reduce(&ray.value).den.keys().map(|f| (f.alpha, f.beta)).collect();
            let mut expect: BTreeSet<(u32, u32)> = [(5, 12), (9, 20)].into_iter().collect();
            if p % 4 == 1 {
                expect.insert((1, 1));
            }
            assert_eq!(reduced, expect, "p={p}");
        }
    }

    #[test]
    fn degenerate_ray_for_g() {
        let ray = degenerate_ray_contribution(&g_sqh(2), 5).unwrap();
        let allowed: BTreeSet<Rat> =
            [rint(-1), rat(-1, 2), rat(-5, 18), rat(-3, 10), rat(-7, 20)].into_iter().collect();
        assert!(real_pole_parts(&ray.value).is_subset(&allowed));
    }

    #[test]
    fn modes_agree() {
        for (f, p) in [(f31(), 3u64), (f31(), 5), (g_sqh(2).expand(), 5), (g_sqh(3).expand(), 7)] {
            let s = assemble_zeta(&f, p, Mode::Simple).unwrap();
            let m = assemble_zeta(&f, p, Mode::Minimal).unwrap();
            assert_eq!(series(&s.total, p, 40), series(&m.total, p, 40));
        }
    }

    #[test]
    fn threshold_does_not_change_value() {
        for (d, p) in [(f31_sqh(), 3u64), (g_sqh(2), 5)] {
            let base = degenerate_ray_with_threshold(&d, p, 1).unwrap();
            for t in [2u64, 3, 7] {
                let v = degenerate_ray_with_threshold(&d, p, t).unwrap();
                assert!(v.value_eq(&base), "threshold {t}");
            }
        }
    }

    #[test]
    fn closed_form_matches_level_sums() {
        // T-degree of the level-m term is at least 12m, so three levels reach order 30
        let closed = degenerate_ray_contribution(&f31_sqh(), 3).unwrap().value;
        let trunc = degenerate_ray_truncated(&f31_sqh(), 3, 3).unwrap();
        assert_eq!(series(&closed, 3, 30), series(&trunc, 3, 30));
    }

    #[test]
    fn stable_under_unit_perturbation() {
        let base = degenerate_ray_contribution(&f31_sqh(), 3).unwrap().value;
        let d = sqh((3, 2), &[(rint(1), 0, 0, vec![(rint(1), 2)]), (rint(4), 4, 4, vec![])]);
        let moved = degenerate_ray_contribution(&d, 3).unwrap().value;
        assert_eq!(series(&base, 3, 30), series(&moved, 3, 30));

        let base = degenerate_ray_contribution(&g_sqh(2), 5).unwrap().value;
        let moved = degenerate_ray_contribution(&g_sqh(7), 5).unwrap().value;
        assert_eq!(series(&base, 5, 30), series(&moved, 5, 30));
    }

    #[test]
    fn class_conditions() {
        let d = sqh((3, 2), &[(rint(3), 0, 0, vec![(rint(1), 2)]), (rint(1), 4, 4, vec![])]);
        assert!(matches!(degenerate_ray_contribution(&d, 3), Err(Error::UnsupportedClass(_))));
        assert!(matches!(degenerate_ray_contribution(&g_sqh(6), 5), Err(Error::UnsupportedClass(_))));
    }

    #[test]
    fn assemble_examples() {
        let x = IntPoly2::from_ints(&[(1, 1, 0)]);
        for mode in [Mode::Simple, Mode::Minimal] {
            let r = assemble_zeta(&x, 3, mode).unwrap();
            assert_eq!(r.total, ZetaRat::over(one_minus_q_pow(1), &[(1, 1)]));
            assert_eq!(r.actual_pole_parts, [rint(-1)].into_iter().collect());
            assert!(pole_containment(&r).contained_strict());
        }

        let r = assemble_zeta(&f31(), 3, Mode::Simple).unwrap();
        let expected: BTreeSet<Rat> = [rint(-1), rat(-5, 12), rat(-1, 2), rat(-9, 20)].into_iter().collect();
        assert!(r.actual_pole_parts.is_subset(&expected));
        assert!(pole_containment(&r).contained_strict());
        assert_eq!(r.decisions[0].m_star, 3);
        let sum = r.per_cone.iter().fold(r.unit_part.clone(), |a, c| zr_add(&a, &c.value));
        assert_eq!(series(&sum, 3, 30), series(&r.total, 3, 30));

        let r = assemble_zeta(&g_sqh(2).expand(), 5, Mode::Simple).unwrap();
        let expected: BTreeSet<Rat> = [rint(-1), rat(-5, 18), rat(-1, 3), rat(-1, 2), rat(-3, 10), rat(-7, 20)]
            .into_iter()
            .collect();
        assert!(r.actual_pole_parts.is_subset(&expected));
        assert!(pole_containment(&r).contained());
    }

    #[test]
    fn degenerate_input_is_rejected() {
        let lin = IntPoly2::from_ints(&[(1, 0, 3), (-1, 2, 0)]);
        let g = lin
            .pow(5)
            .add(&lin.pow(3).mul(&IntPoly2::from_ints(&[(1, 6, 3)])))
            .add(&lin.pow(2).mul(&IntPoly2::from_ints(&[(1, 12, 0)])))
            .add(&IntPoly2::from_ints(&[(1, 24, 0)]));
        assert!(matches!(assemble_zeta(&g, 7, Mode::Simple), Err(Error::ArithmeticallyDegenerate(_))));
    }
}
