//! Arithmetic Newton polygons of degenerate facets and the arithmetic
//! non-degeneracy check.

use std::collections::BTreeSet;

use num_traits::Zero;
use serde_json::{json, Value};

use crate::algebra::{fmt_rat, rat, rint, vp, Rat};
use crate::error::{Error, Result};
use crate::geom::{geom_polygon, poles_json, Pt};
use crate::poly::{
    reduce_mod, singular_torus_points, sqh_decompose, weighted_group_poly, IntPoly2,
    SqhDecomposition,
};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ThetaRoot {
    pub theta: Rat,
    pub e0: u32,
    /// Negative valuation at `p`; such roots carry no polygon.
    pub excluded: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EnvelopeLine {
    pub intercept: u64,
    pub slope: u32,
    pub part: usize,
}

impl EnvelopeLine {
    pub fn at(&self, z: &Rat) -> Rat {
        rint(self.intercept as i64) + rint(self.slope as i64) * z
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ArithPolygon {
    pub theta: ThetaRoot,
    pub d0: u64,
    pub lines: Vec<EnvelopeLine>,
    /// `(D_k, E_k)` for `k = 1..=r+1`.
    pub segments: Vec<(u64, u32)>,
    /// Part index realising each segment.
    pub segment_parts: Vec<usize>,
    pub taus: Vec<Rat>,
    /// Parts whose line attains the envelope at each `tau_k`.
    pub vertex_parts: Vec<BTreeSet<usize>>,
}

impl ArithPolygon {
    pub fn r(&self) -> usize {
        self.taus.len()
    }

    pub fn envelope(&self, z: &Rat) -> Rat {
        self.lines.iter().map(|l| l.at(z)).min().unwrap()
    }

    /// Vertex `Q_k = (tau_k, w(tau_k))`, `k >= 1`.
    pub fn vertex(&self, k: usize) -> (Rat, Rat) {
        let tau = self.taus[k - 1].clone();
        let (dk, ek) = self.segments[k - 1];
        let w = rint((dk - self.d0) as i64) + rint(ek as i64) * &tau;
        (tau, w)
    }

    pub fn vertex_label(&self, k: usize) -> String {
        let (t, w) = self.vertex(k);
        format!("({},{})", fmt_rat(&t), fmt_rat(&w))
    }

    pub fn to_json(&self, weight: (u32, u32)) -> Value {
        json!({
            "theta": fmt_rat(&self.theta.theta),
            "e0": self.theta.e0,
            "lines": self.lines.iter().map(|l| json!({"part": l.part, "intercept": l.intercept, "slope": l.slope})).collect::<Vec<_>>(),
            "segments": self.segments.iter().map(|(d, e)| json!({"D": d, "E": e})).collect::<Vec<_>>(),
            "taus": self.taus.iter().map(fmt_rat).collect::<Vec<_>>(),
            "vertices": (1..=self.r()).map(|k| {
                let (t, w) = self.vertex(k);
                json!({"z": fmt_rat(&t), "w": fmt_rat(&w), "parts": self.vertex_parts[k - 1]})
            }).collect::<Vec<_>>(),
            "candidate_poles": poles_json(&arith_candidate_poles(self, weight)),
        })
    }

    /// Envelope polyline from `z = 0` to `tau_r + extent`.
    pub fn plot_points(&self, extent: u32) -> Value {
        let mut zs = vec![Rat::zero()];
        zs.extend(self.taus.iter().cloned());
        zs.push(self.taus.last().cloned().unwrap_or_else(Rat::zero) + rint(extent as i64));
        Value::Array(
            zs.iter()
                .map(|z| json!([fmt_rat(z), fmt_rat(&self.envelope(z))]))
                .collect(),
        )
    }
}

pub fn theta_roots(d: &SqhDecomposition, p: u64) -> Vec<ThetaRoot> {
    d.parts[0]
        .factors
        .iter()
        .map(|(alpha, e)| ThetaRoot {
            theta: alpha.clone(),
            e0: *e,
            excluded: vp(alpha, p).is_some_and(|v| v < 0),
        })
        .collect()
}

/// Lower envelope of `w_j(z) = (d_j - d_0) + e_{j,theta} z` over `z >= 0`.
pub fn arith_polygon(d: &SqhDecomposition, theta: &ThetaRoot) -> ArithPolygon {
    let d0 = d.d0();
    let lines: Vec<EnvelopeLine> = d
        .parts
        .iter()
        .enumerate()
        .map(|(j, part)| EnvelopeLine {
            intercept: part.d - d0,
            slope: part.multiplicity(&theta.theta),
            part: j,
        })
        .collect();
    let mut cur = 0usize;
    let mut segment_parts = vec![0usize];
    let mut taus: Vec<Rat> = Vec::new();
    loop {
        let c = &lines[cur];
        let mut best: Option<(Rat, u32, usize)> = None;
        for (j, l) in lines.iter().enumerate() {
            if l.slope >= c.slope {
                continue;
            }
            let z = rat(
                l.intercept as i64 - c.intercept as i64,
                (c.slope - l.slope) as i64,
            );
            let better = match &best {
                None => true,
                Some((bz, bs, _)) => z < *bz || (z == *bz && l.slope < *bs),
            };
            if better {
                best = Some((z, l.slope, j));
            }
        }
        match best {
            Some((z, _, j)) => {
                taus.push(z);
                segment_parts.push(j);
                cur = j;
            }
            None => break,
        }
    }
    let segments = segment_parts
        .iter()
        .map(|&j| (d.parts[j].d, lines[j].slope))
        .collect();
    let vertex_parts = taus
        .iter()
        .map(|t| {
            let env = lines.iter().map(|l| l.at(t)).min().unwrap();
            lines
                .iter()
                .filter(|l| l.at(t) == env)
                .map(|l| l.part)
                .collect()
        })
        .collect();
    ArithPolygon {
        theta: theta.clone(),
        d0,
        lines,
        segments,
        segment_parts,
        taus,
        vertex_parts,
    }
}

/// Sum of the parts whose line attains the envelope at `tau_k`.
pub fn vertex_face_function(d: &SqhDecomposition, poly: &ArithPolygon, k: usize) -> IntPoly2 {
    poly.vertex_parts[k - 1]
        .iter()
        .fold(IntPoly2::zero(), |acc, &j| acc.add(&d.parts[j].expand(d.weight)))
}

pub fn arith_candidate_poles(poly: &ArithPolygon, weight: (u32, u32)) -> BTreeSet<Rat> {
    let ab = rint((weight.0 + weight.1) as i64);
    let mut out = BTreeSet::new();
    for (i, tau) in poly.taus.iter().enumerate() {
        let (di, ei) = poly.segments[i];
        if ei != 0 {
            out.insert(rat(-1, ei as i64));
        }
        let den = rint(di as i64) + rint(ei as i64) * tau;
        out.insert(-(&ab + tau) / den);
    }
    let (_, last) = *poly.segments.last().unwrap();
    if last != 0 {
        out.insert(rat(-1, last as i64));
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FacetArith {
    pub facet: usize,
    pub normal: Pt,
    pub d: u64,
    pub decomposition: Option<SqhDecomposition>,
    /// Some root of the leading part is repeated.
    pub degenerate: bool,
    pub thetas: Vec<ThetaRoot>,
    pub polygons: Vec<ArithPolygon>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ArithNewtonData {
    pub facets: Vec<FacetArith>,
}

impl ArithNewtonData {
    /// `P(Gamma^A(f))`, over degenerate facets.
    pub fn candidate_poles(&self) -> BTreeSet<Rat> {
        let mut out = BTreeSet::new();
        for fa in self.facets.iter().filter(|fa| fa.degenerate) {
            for poly in &fa.polygons {
                out.extend(arith_candidate_poles(poly, fa.normal));
            }
        }
        out
    }

    pub fn facet(&self, normal: Pt) -> Option<&FacetArith> {
        self.facets.iter().find(|fa| fa.normal == normal)
    }

    pub fn to_json(&self) -> Value {
        let facets: Vec<Value> = self
            .facets
            .iter()
            .map(|fa| {
                json!({
                    "normal": [fa.normal.0, fa.normal.1],
                    "d": fa.d,
                    "degenerate": fa.degenerate,
                    "decomposition": fa.decomposition.as_ref().map(SqhDecomposition::to_json),
                    "thetas": fa.thetas.iter().map(|t| json!({"theta": fmt_rat(&t.theta), "e0": t.e0, "excluded": t.excluded})).collect::<Vec<_>>(),
                    "polygons": fa.polygons.iter().map(|p| p.to_json(fa.normal)).collect::<Vec<_>>(),
                })
            })
            .collect();
        json!({"facets": facets, "candidate_poles": poles_json(&self.candidate_poles())})
    }
}

/// Arithmetic polygons over every compact facet; `given` is used for the facet
/// whose normal equals its weight.
pub fn arith_newton_data(
    f: &IntPoly2,
    p: u64,
    given: Option<&SqhDecomposition>,
) -> Result<ArithNewtonData> {
    let geom = geom_polygon(&f.support());
    let mut facets = Vec::new();
    for (k, facet) in geom.compact_facets() {
        let weight = facet.normal;
        let decomposition = match given.filter(|g| g.weight == weight) {
            Some(g) => Ok(g.clone()),
            None => sqh_decompose(f, weight),
        };
        let decomposition = match decomposition {
            Ok(d) => d,
            Err(Error::IrrationalRoot { degree }) => {
                let s = weighted_group_poly(f, weight, facet.d).expect("facet has terms");
                if !s.is_squarefree() {
                    return Err(Error::IrrationalRoot { degree });
                }
                facets.push(FacetArith {
                    facet: k,
                    normal: weight,
                    d: facet.d,
                    decomposition: None,
                    degenerate: false,
                    thetas: vec![],
                    polygons: vec![],
                });
                continue;
            }
            Err(e) => return Err(e),
        };
        let thetas = theta_roots(&decomposition, p);
        let degenerate = thetas.iter().any(|t| t.e0 > 1);
        let polygons = thetas
            .iter()
            .filter(|t| !t.excluded)
            .map(|t| arith_polygon(&decomposition, t))
            .collect();
        facets.push(FacetArith {
            facet: k,
            normal: weight,
            d: facet.d,
            decomposition: Some(decomposition),
            degenerate,
            thetas,
            polygons,
        });
    }
    Ok(ArithNewtonData { facets })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CheckEntry {
    pub scope: String,
    pub condition: u8,
    pub ok: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ArithCheck {
    pub entries: Vec<CheckEntry>,
}

impl ArithCheck {
    pub fn nondegenerate(&self) -> bool {
        self.entries.iter().all(|e| e.ok)
    }

    /// First failing entry as an error.
    pub fn first_failure(&self) -> Option<Error> {
        self.entries
            .iter()
            .find(|e| !e.ok)
            .map(|e| Error::ArithmeticallyDegenerate(e.detail.clone()))
    }

    pub fn to_json(&self) -> Value {
        json!({
            "nondegenerate": self.nondegenerate(),
            "torus_conditions": "checked at reduction level",
            "entries": self.entries.iter().map(|e| json!({
                "scope": e.scope, "condition": e.condition, "ok": e.ok, "detail": e.detail,
            })).collect::<Vec<_>>(),
        })
    }
}

/// Origin singular in characteristic 0, and no singular torus points mod `p` for
/// `f` and for every vertex face function of every degenerate facet.
pub fn arith_nondegeneracy_check(
    f: &IntPoly2,
    data: &ArithNewtonData,
    p: u64,
) -> Result<ArithCheck> {
    let mut entries = Vec::new();
    let origin = f.origin_singular();
    entries.push(CheckEntry {
        scope: "f".into(),
        condition: 1,
        ok: origin,
        detail: if origin {
            "origin is a singular point".into()
        } else {
            "origin is not a singular point".into()
        },
    });
    let sing = singular_torus_points(&reduce_mod(f, p)?);
    entries.push(CheckEntry {
        scope: "f".into(),
        condition: 2,
        ok: sing.is_empty(),
        detail: match sing.iter().next() {
            None => "no singular torus point".into(),
            Some(pt) => format!("singular torus point {pt:?} of f"),
        },
    });
    for fa in data.facets.iter().filter(|fa| fa.degenerate) {
        let d = fa.decomposition.as_ref().expect("degenerate facets are factored");
        for poly in &fa.polygons {
            for k in 1..=poly.r() {
                let g = vertex_face_function(d, poly, k);
                let sing = singular_torus_points(&reduce_mod(&g, p)?);
                let label = poly.vertex_label(k);
                entries.push(CheckEntry {
                    scope: format!(
                        "facet ({},{}) theta {}",
                        fa.normal.0,
                        fa.normal.1,
                        fmt_rat(&poly.theta.theta)
                    ),
                    condition: 3,
                    ok: sing.is_empty(),
                    detail: if sing.is_empty() {
                        format!("vertex {label} non-degenerate")
                    } else {
                        format!("at vertex {label}")
                    },
                });
            }
        }
    }
    Ok(ArithCheck { entries })
}
