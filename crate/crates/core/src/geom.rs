//! Geometric Newton polygon, first meet loci and conical subdivisions of the
//! first quadrant.

use std::collections::BTreeSet;

use num_integer::Integer;
use serde_json::{json, Value};

use crate::algebra::{fmt_rat, rat, Rat};
use crate::error::Result;
use crate::poly::{reduce_mod, singular_torus_points, IntPoly2};

pub type Pt = (u32, u32);

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Facet {
    pub normal: Pt,
    pub d: u64,
    pub endpoints: (Pt, Pt),
    pub compact: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum FaceKind {
    Vertex(Pt),
    /// Index into [`GeomPolygon::facets`].
    Facet(usize),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Face {
    pub kind: FaceKind,
    /// Support points on the face.
    pub points: BTreeSet<Pt>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GeomPolygon {
    pub support: BTreeSet<Pt>,
    /// From the vertex nearest the `y`-axis to the one nearest the `x`-axis.
    pub vertices: Vec<Pt>,
    /// Vertical facet, compact facets in vertex order, horizontal facet.
    pub facets: Vec<Facet>,
}

pub fn dot(a: Pt, x: Pt) -> u64 {
    a.0 as u64 * x.0 as u64 + a.1 as u64 * x.1 as u64
}

pub fn det(a: Pt, b: Pt) -> i64 {
    a.0 as i64 * b.1 as i64 - a.1 as i64 * b.0 as i64
}

fn cross(o: Pt, a: Pt, b: Pt) -> i64 {
    (a.0 as i64 - o.0 as i64) * (b.1 as i64 - o.1 as i64)
        - (a.1 as i64 - o.1 as i64) * (b.0 as i64 - o.0 as i64)
}

/// Panics on an empty support.
pub fn geom_polygon(support: &BTreeSet<Pt>) -> GeomPolygon {
    assert!(!support.is_empty(), "empty support");
    let i_min = support.iter().map(|p| p.0).min().unwrap();
    let j_min = support.iter().map(|p| p.1).min().unwrap();
    let v0 = *support.iter().filter(|p| p.0 == i_min).min_by_key(|p| p.1).unwrap();
    let vl = *support.iter().filter(|p| p.1 == j_min).min_by_key(|p| p.0).unwrap();

    let mut lowest: Vec<Pt> = Vec::new();
    for &(i, j) in support.iter().filter(|p| p.0 <= vl.0) {
        match lowest.last_mut() {
            Some(last) if last.0 == i => last.1 = last.1.min(j),
            _ => lowest.push((i, j)),
        }
    }
    let mut hull: Vec<Pt> = Vec::new();
    for p in lowest {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0 {
            hull.pop();
        }
        hull.push(p);
    }
    debug_assert_eq!(hull.first(), Some(&v0));
    debug_assert_eq!(hull.last(), Some(&vl));

    let mut facets = vec![Facet {
        normal: (1, 0),
        d: i_min as u64,
        endpoints: (v0, v0),
        compact: false,
    }];
    for w in hull.windows(2) {
        let (p, q) = (w[0], w[1]);
        let dx = q.0 - p.0;
        let dy = p.1 - q.1;
        let g = dx.gcd(&dy);
        let normal = (dy / g, dx / g);
        facets.push(Facet {
            normal,
            d: dot(normal, p),
            endpoints: (p, q),
            compact: true,
        });
    }
    facets.push(Facet {
        normal: (0, 1),
        d: j_min as u64,
        endpoints: (vl, vl),
        compact: false,
    });
    GeomPolygon {
        support: support.clone(),
        vertices: hull,
        facets,
    }
}

impl GeomPolygon {
    pub fn compact_facets(&self) -> impl Iterator<Item = (usize, &Facet)> {
        self.facets.iter().enumerate().filter(|(_, f)| f.compact)
    }

    /// `m(a)` and the face it is attained on.
    pub fn face_data(&self, a: Pt) -> (u64, Face) {
        let m = self.support.iter().map(|&x| dot(a, x)).min().unwrap();
        let points: BTreeSet<Pt> = self
            .support
            .iter()
            .copied()
            .filter(|&x| dot(a, x) == m)
            .collect();
        let kind = match self.facets.iter().position(|f| f.normal == a) {
            Some(k) => FaceKind::Facet(k),
            None => {
                let v = *points.iter().next().unwrap();
                debug_assert_eq!(points.len(), 1);
                FaceKind::Vertex(v)
            }
        };
        (m, Face { kind, points })
    }

    pub fn facet_face(&self, k: usize) -> Face {
        self.face_data(self.facets[k].normal).1
    }

    pub fn vertex_face(&self, v: Pt) -> Face {
        Face {
            kind: FaceKind::Vertex(v),
            points: [v].into_iter().collect(),
        }
    }

    pub fn to_json(&self) -> Value {
        let facets: Vec<Value> = self
            .facets
            .iter()
            .map(|f| {
                json!({
                    "normal": [f.normal.0, f.normal.1],
                    "d": f.d,
                    "endpoints": [[f.endpoints.0 .0, f.endpoints.0 .1], [f.endpoints.1 .0, f.endpoints.1 .1]],
                    "compact": f.compact,
                })
            })
            .collect();
        json!({
            "support": self.support.iter().map(|p| json!([p.0, p.1])).collect::<Vec<_>>(),
            "vertices": self.vertices.iter().map(|p| json!([p.0, p.1])).collect::<Vec<_>>(),
            "facets": facets,
        })
    }

    /// Boundary segments for external plotting; axis facets are drawn `extent` units long.
    pub fn plot_segments(&self, extent: u32) -> Value {
        let mut segs = Vec::new();
        let v0 = self.vertices[0];
        let vl = *self.vertices.last().unwrap();
        segs.push(json!([[v0.0, v0.1 + extent], [v0.0, v0.1]]));
        for f in self.compact_facets().map(|x| x.1) {
            segs.push(json!([[f.endpoints.0 .0, f.endpoints.0 .1], [f.endpoints.1 .0, f.endpoints.1 .1]]));
        }
        segs.push(json!([[vl.0, vl.1], [vl.0 + extent, vl.1]]));
        Value::Array(segs)
    }
}

pub fn face_function(f: &IntPoly2, face: &Face) -> IntPoly2 {
    f.restrict(&face.points)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Minimal,
    Simple,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Minimal => "minimal",
            Mode::Simple => "simple",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cone {
    /// One ray, or two rays ordered counterclockwise (`det > 0`).
    pub generators: Vec<Pt>,
    pub face: Face,
    /// `(sigma, m)` per generator.
    pub m_values: Vec<(u64, u64)>,
}

impl Cone {
    pub fn dim(&self) -> usize {
        self.generators.len()
    }

    pub fn det(&self) -> i64 {
        match self.generators[..] {
            [g1, g2] => det(g1, g2),
            _ => 0,
        }
    }

    /// Membership of a lattice point in the relatively open cone.
    pub fn contains(&self, k: Pt) -> bool {
        match self.generators[..] {
            [g] => det(g, k) == 0 && dot(g, k) > 0,
            [g1, g2] => det(g1, k) > 0 && det(k, g2) > 0,
            _ => false,
        }
    }

    pub fn label(&self) -> String {
        self.generators
            .iter()
            .map(|g| format!("({},{})", g.0, g.1))
            .collect::<Vec<_>>()
            .join("+")
    }

    /// Lattice points `l1 g1 + l2 g2` with `0 < l1, l2 <= 1`.
    pub fn parallelepiped(&self) -> Vec<Pt> {
        let [g1, g2] = self.generators[..] else {
            return vec![];
        };
        let d = det(g1, g2);
        let mut out = Vec::new();
        for i in 0..=(g1.0 + g2.0) {
            for j in 0..=(g1.1 + g2.1) {
                let k = (i, j);
                let l1 = det(k, g2);
                let l2 = det(g1, k);
                if l1 > 0 && l1 <= d && l2 > 0 && l2 <= d {
                    out.push(k);
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConeSubdiv {
    pub mode: Mode,
    pub cones: Vec<Cone>,
}

impl ConeSubdiv {
    pub fn to_json(&self) -> Value {
        let cones: Vec<Value> = self
            .cones
            .iter()
            .map(|c| {
                json!({
                    "generators": c.generators.iter().map(|g| json!([g.0, g.1])).collect::<Vec<_>>(),
                    "dim": c.dim(),
                    "det": c.det(),
                    "face": face_json(&c.face),
                    "sigma_m": c.m_values.iter().map(|(s, m)| json!([s, m])).collect::<Vec<_>>(),
                })
            })
            .collect();
        json!({"mode": self.mode.name(), "cones": cones})
    }
}

pub fn face_json(face: &Face) -> Value {
    let kind = match face.kind {
        FaceKind::Vertex(v) => json!({"vertex": [v.0, v.1]}),
        FaceKind::Facet(k) => json!({"facet": k}),
    };
    json!({"kind": kind, "points": face.points.iter().map(|p| json!([p.0, p.1])).collect::<Vec<_>>()})
}

/// Rays strictly between `g1` and `g2` (`det(g1, g2) > 0`) making every cone simple.
fn hj_insert(g1: Pt, g2: Pt) -> Vec<Pt> {
    let d = det(g1, g2);
    if d <= 1 {
        return vec![];
    }
    for k in 1..d {
        let x = g2.0 as i64 + k * g1.0 as i64;
        let y = g2.1 as i64 + k * g1.1 as i64;
        if x % d == 0 && y % d == 0 {
            let v = ((x / d) as u32, (y / d) as u32);
            let mut out = vec![v];
            out.extend(hj_insert(v, g2));
            return out;
        }
    }
    unreachable!("no lattice point found between primitive generators")
}

fn ray_cone(poly: &GeomPolygon, g: Pt) -> Cone {
    let (m, face) = poly.face_data(g);
    Cone {
        generators: vec![g],
        face,
        m_values: vec![(g.0 as u64 + g.1 as u64, m)],
    }
}

fn plane_cone(poly: &GeomPolygon, g1: Pt, g2: Pt) -> Cone {
    let (_, face) = poly.face_data((g1.0 + g2.0, g1.1 + g2.1));
    let m_values = [g1, g2]
        .iter()
        .map(|&g| (g.0 as u64 + g.1 as u64, poly.face_data(g).0))
        .collect();
    Cone {
        generators: vec![g1, g2],
        face,
        m_values,
    }
}

/// Cones ordered from the ray `(0,1)` to the ray `(1,0)`.
pub fn conical_subdivision(poly: &GeomPolygon, mode: Mode) -> ConeSubdiv {
    // facet normals from (1,0) counterclockwise to (0,1)
    let normals: Vec<Pt> = poly.facets.iter().map(|f| f.normal).collect();
    let mut rays = vec![normals[0]];
    for w in normals.windows(2) {
        if mode == Mode::Simple {
            rays.extend(hj_insert(w[0], w[1]));
        }
        rays.push(w[1]);
    }
    rays.reverse();
    let mut cones = Vec::new();
    for (n, &r) in rays.iter().enumerate() {
        cones.push(ray_cone(poly, r));
        if let Some(&next) = rays.get(n + 1) {
            cones.push(plane_cone(poly, next, r));
        }
    }
    ConeSubdiv { mode, cones }
}

/// `-(a1 + a2)/d` over facets with `d != 0`.
pub fn geom_candidate_poles(poly: &GeomPolygon) -> BTreeSet<Rat> {
    poly.facets
        .iter()
        .filter(|f| f.d != 0)
        .map(|f| rat(-((f.normal.0 + f.normal.1) as i64), f.d as i64))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FaceReport {
    pub label: String,
    pub singular_points: BTreeSet<(u64, u64)>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KouchReport {
    pub faces: Vec<FaceReport>,
}

impl KouchReport {
    pub fn nondegenerate(&self) -> bool {
        self.faces.iter().all(|f| f.singular_points.is_empty())
    }

    pub fn to_json(&self) -> Value {
        json!({
            "nondegenerate": self.nondegenerate(),
            "faces": self.faces.iter().map(|f| json!({
                "face": f.label,
                "singular_torus_points": f.singular_points.iter().map(|p| json!([p.0, p.1])).collect::<Vec<_>>(),
            })).collect::<Vec<_>>(),
        })
    }
}

/// Singular torus points of every reduced face function, the whole polygon included.
pub fn kouch_check(f: &IntPoly2, p: u64) -> Result<KouchReport> {
    let poly = geom_polygon(&f.support());
    let mut faces = vec![("polygon".to_string(), f.clone())];
    for (k, facet) in poly.facets.iter().enumerate() {
        let label = format!("facet normal ({},{})", facet.normal.0, facet.normal.1);
        faces.push((label, face_function(f, &poly.facet_face(k))));
    }
    for &v in &poly.vertices {
        faces.push((format!("vertex ({},{})", v.0, v.1), face_function(f, &poly.vertex_face(v))));
    }
    let mut out = Vec::new();
    for (label, g) in faces {
        let singular_points = singular_torus_points(&reduce_mod(&g, p)?);
        out.push(FaceReport { label, singular_points });
    }
    Ok(KouchReport { faces: out })
}

pub fn poles_json(s: &BTreeSet<Rat>) -> Value {
    Value::Array(s.iter().map(|r| Value::String(fmt_rat(r))).collect())
}
