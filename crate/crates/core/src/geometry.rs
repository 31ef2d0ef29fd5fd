//! Planar geometry: the domain polygon, the Dirichlet region and its
//! measure-theoretic quantities (length, cardinality, curvature atoms,
//! normals).

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point or vector in the plane.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    #[inline]
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    #[inline]
    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3D cross product.
    #[inline]
    pub fn cross(self, other: Vec2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    #[inline]
    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> f64 {
        (self.x * self.x + self.y * self.y).sqrt()
    }

    /// Counterclockwise rotation by a right angle.
    #[inline]
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    #[inline]
    pub fn distance(self, other: Vec2) -> f64 {
        (self - other).norm()
    }

    /// Unit vector in the same direction; the zero vector maps to itself.
    #[inline]
    pub fn normalized(self) -> Vec2 {
        let n = self.norm();
        if n > 0.0 {
            self / n
        } else {
            self
        }
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn rotated(self, angle: f64) -> Vec2 {
        let (s, c) = angle.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }
}

impl From<[f64; 2]> for Vec2 {
    fn from(v: [f64; 2]) -> Self {
        Vec2::new(v[0], v[1])
    }
}

impl From<Vec2> for [f64; 2] {
    fn from(v: Vec2) -> Self {
        [v.x, v.y]
    }
}

impl fmt::Display for Vec2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    #[inline]
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    #[inline]
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    #[inline]
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Mul<Vec2> for f64 {
    type Output = Vec2;
    #[inline]
    fn mul(self, v: Vec2) -> Vec2 {
        v * self
    }
}

impl Div<f64> for Vec2 {
    type Output = Vec2;
    #[inline]
    fn div(self, s: f64) -> Vec2 {
        Vec2::new(self.x / s, self.y / s)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    #[inline]
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

impl AddAssign for Vec2 {
    #[inline]
    fn add_assign(&mut self, o: Vec2) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl SubAssign for Vec2 {
    #[inline]
    fn sub_assign(&mut self, o: Vec2) {
        self.x -= o.x;
        self.y -= o.y;
    }
}

impl std::iter::Sum for Vec2 {
    fn sum<I: Iterator<Item = Vec2>>(iter: I) -> Vec2 {
        iter.fold(Vec2::ZERO, |a, b| a + b)
    }
}

/// Distance from `p` to the segment `[a, b]` together with the parameter
/// `t ∈ [0, 1]` of the closest point `a + t (b - a)`.
pub fn segment_distance(p: Vec2, a: Vec2, b: Vec2) -> (f64, f64) {
    let d = b - a;
    let len2 = d.norm_squared();
    let t = if len2 > 0.0 {
        ((p - a).dot(d) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    ((a + d * t).distance(p), t)
}

fn orient(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    (b - a).cross(c - a)
}

fn on_segment(a: Vec2, b: Vec2, p: Vec2) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// Closed-segment intersection test (touching counts).
pub fn segments_intersect(a: Vec2, b: Vec2, c: Vec2, d: Vec2) -> bool {
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(c, d, a))
        || (d2 == 0.0 && on_segment(c, d, b))
        || (d3 == 0.0 && on_segment(a, b, c))
        || (d4 == 0.0 && on_segment(a, b, d))
}

/// Checks that consecutive segments of a chain do not fold back onto each
/// other and that non-adjacent segments are disjoint. `closed` adds the
/// segment from the last vertex back to the first.
fn check_simple_chain(vertices: &[Vec2], closed: bool) -> std::result::Result<(), String> {
    let n = vertices.len();
    let m = if closed { n } else { n - 1 };
    let seg = |i: usize| (vertices[i], vertices[(i + 1) % n]);
    for i in 0..m {
        let (a, b) = seg(i);
        if a == b {
            return Err(format!("repeated vertex {a}"));
        }
    }
    for i in 0..m {
        for j in (i + 1)..m {
            let adjacent = j == i + 1 || (closed && i == 0 && j == m - 1);
            let (a, b) = seg(i);
            let (c, d) = seg(j);
            if adjacent {
                // shared vertex: only a fold-back (collinear, opposite
                // direction) overlaps
                let (u, v) = if j == i + 1 {
                    (a - b, d - c)
                } else {
                    (b - a, c - d)
                };
                if u.cross(v) == 0.0 && u.dot(v) > 0.0 {
                    return Err(format!("segments {i} and {j} overlap"));
                }
            } else if segments_intersect(a, b, c, d) {
                return Err(format!("segments {i} and {j} intersect"));
            }
        }
    }
    Ok(())
}

fn signed_area(vertices: &[Vec2]) -> f64 {
    let n = vertices.len();
    0.5 * (0..n)
        .map(|i| vertices[i].cross(vertices[(i + 1) % n]))
        .sum::<f64>()
}

/// Even-odd point-in-polygon test.
pub(crate) fn point_in_polygon(vertices: &[Vec2], p: Vec2) -> bool {
    let n = vertices.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (vertices[i], vertices[j]);
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// A simple polygon with counterclockwise vertex order.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Polygon {
    vertices: Vec<Vec2>,
    #[serde(skip)]
    diameter: f64,
}

impl<'de> Deserialize<'de> for Polygon {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let vertices = Vec::<Vec2>::deserialize(d)?;
        Polygon::new(vertices).map_err(serde::de::Error::custom)
    }
}

impl Polygon {
    /// Validates the vertex list. Clockwise input is reversed so the
    /// stored orientation is always counterclockwise.
    pub fn new(mut vertices: Vec<Vec2>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::DegenerateGeometry(
                "polygon needs at least 3 vertices".into(),
            ));
        }
        if vertices.iter().any(|v| !v.is_finite()) {
            return Err(Error::DegenerateGeometry(
                "non-finite polygon vertex".into(),
            ));
        }
        check_simple_chain(&vertices, true)
            .map_err(|e| Error::DegenerateGeometry(format!("polygon is not simple: {e}")))?;
        let area = signed_area(&vertices);
        if area == 0.0 {
            return Err(Error::DegenerateGeometry("polygon has zero area".into()));
        }
        if area < 0.0 {
            vertices.reverse();
        }
        let mut diameter: f64 = 0.0;
        for (i, a) in vertices.iter().enumerate() {
            for b in &vertices[i + 1..] {
                diameter = diameter.max(a.distance(*b));
            }
        }
        Ok(Self { vertices, diameter })
    }

    /// Regular `sides`-gon inscribed in the circle of `radius` around
    /// `center`, with a vertex on the positive x axis.
    pub fn regular(center: Vec2, radius: f64, sides: usize) -> Result<Self> {
        if sides < 3 || !(radius > 0.0) {
            return Err(Error::DegenerateGeometry("invalid regular polygon".into()));
        }
        let vertices = (0..sides)
            .map(|k| {
                let th = std::f64::consts::TAU * k as f64 / sides as f64;
                center + Vec2::new(th.cos(), th.sin()) * radius
            })
            .collect();
        Self::new(vertices)
    }

    pub fn unit_square() -> Self {
        Self::new(vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(0.0, 1.0),
        ])
        .expect("unit square is valid")
    }

    /// The unit disk approximated by a regular polygon.
    pub fn unit_disk(sides: usize) -> Self {
        Self::regular(Vec2::ZERO, 1.0, sides).expect("regular polygon is valid")
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    pub fn edges(&self) -> impl Iterator<Item = (Vec2, Vec2)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.vertices)
    }

    pub fn centroid(&self) -> Vec2 {
        let n = self.vertices.len();
        let mut c = Vec2::ZERO;
        for i in 0..n {
            let (a, b) = (self.vertices[i], self.vertices[(i + 1) % n]);
            c += (a + b) * a.cross(b);
        }
        c / (6.0 * self.area())
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    pub fn contains(&self, p: Vec2) -> bool {
        point_in_polygon(&self.vertices, p)
    }

    pub fn distance_to_boundary(&self, p: Vec2) -> f64 {
        self.edges()
            .map(|(a, b)| segment_distance(p, a, b).0)
            .fold(f64::INFINITY, f64::min)
    }

    /// Inside and not within rounding distance of the boundary.
    pub fn contains_strictly(&self, p: Vec2) -> bool {
        self.contains(p) && self.distance_to_boundary(p) > 1e-12 * self.diameter()
    }

    pub(crate) fn boundary_tolerance(&self) -> f64 {
        1e-10 * self.diameter()
    }
}

/// Which Hausdorff measure penalizes the region.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegionKind {
    /// Connected chain of segments, penalized by length.
    #[serde(rename = "polyline")]
    Polyline,
    /// Finite point set, penalized by cardinality.
    #[serde(rename = "points")]
    PointSet,
}

/// The Dirichlet region Σ together with its penalization weight λ.
///
/// An empty point set stands for Σ = ∅.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DirichletRegion {
    kind: RegionKind,
    vertices: Vec<Vec2>,
    lambda: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RegionRepr {
    kind: RegionKind,
    vertices: Vec<Vec2>,
    #[serde(default)]
    lambda: f64,
}

impl<'de> Deserialize<'de> for DirichletRegion {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = RegionRepr::deserialize(d)?;
        DirichletRegion::new(r.kind, r.vertices, r.lambda).map_err(serde::de::Error::custom)
    }
}

impl DirichletRegion {
    pub fn new(kind: RegionKind, vertices: Vec<Vec2>, lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidInput(format!(
                "penalization weight must be nonnegative, got {lambda}"
            )));
        }
        if vertices.iter().any(|v| !v.is_finite()) {
            return Err(Error::DegenerateGeometry("non-finite region vertex".into()));
        }
        match kind {
            RegionKind::Polyline => {
                if vertices.len() < 2 {
                    return Err(Error::DegenerateGeometry(
                        "polyline needs at least 2 vertices".into(),
                    ));
                }
                check_simple_chain(&vertices, false).map_err(|e| {
                    Error::DegenerateGeometry(format!("polyline is not simple: {e}"))
                })?;
            }
            RegionKind::PointSet => {
                for (i, a) in vertices.iter().enumerate() {
                    if vertices[i + 1..].contains(a) {
                        return Err(Error::DegenerateGeometry(format!("duplicate point {a}")));
                    }
                }
            }
        }
        Ok(Self {
            kind,
            vertices,
            lambda,
        })
    }

    pub fn polyline(vertices: Vec<Vec2>, lambda: f64) -> Result<Self> {
        Self::new(RegionKind::Polyline, vertices, lambda)
    }

    pub fn points(vertices: Vec<Vec2>, lambda: f64) -> Result<Self> {
        Self::new(RegionKind::PointSet, vertices, lambda)
    }

    /// Σ = ∅.
    pub fn empty() -> Self {
        Self {
            kind: RegionKind::PointSet,
            vertices: Vec::new(),
            lambda: 0.0,
        }
    }

    pub fn kind(&self) -> RegionKind {
        self.kind
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Hausdorff dimension of Σ (`None` for the empty set).
    pub fn dimension(&self) -> Option<usize> {
        match (self.kind, self.vertices.is_empty()) {
            (_, true) => None,
            (RegionKind::Polyline, false) => Some(1),
            (RegionKind::PointSet, false) => Some(0),
        }
    }

    /// Same kind and weight, new vertex positions (validated).
    pub fn with_vertices(&self, vertices: Vec<Vec2>) -> Result<Self> {
        Self::new(self.kind, vertices, self.lambda)
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        Self::new(self.kind, self.vertices.clone(), lambda)
    }

    /// Polyline traversed backwards.
    pub fn reversed(&self) -> Self {
        let mut r = self.clone();
        r.vertices.reverse();
        r
    }

    /// Segments of a polyline in traversal order (empty for point sets).
    pub fn segments(&self) -> Vec<(Vec2, Vec2)> {
        match self.kind {
            RegionKind::Polyline => self.vertices.windows(2).map(|w| (w[0], w[1])).collect(),
            RegionKind::PointSet => Vec::new(),
        }
    }

    /// Checks that every point of Σ lies strictly inside `domain`.
    pub fn validate_in(&self, domain: &Polygon) -> Result<()> {
        for v in &self.vertices {
            if !domain.contains_strictly(*v) {
                return Err(Error::RegionOutsideDomain { x: v.x, y: v.y });
            }
        }
        for (a, b) in self.segments() {
            for (c, d) in domain.edges() {
                if segments_intersect(a, b, c, d) {
                    return Err(Error::RegionOutsideDomain {
                        x: 0.5 * (a.x + b.x),
                        y: 0.5 * (a.y + b.y),
                    });
                }
            }
        }
        Ok(())
    }

    /// Smallest distance from Σ to a point.
    pub fn distance_to(&self, p: Vec2) -> f64 {
        match self.kind {
            RegionKind::Polyline => self
                .segments()
                .iter()
                .map(|&(a, b)| segment_distance(p, a, b).0)
                .fold(f64::INFINITY, f64::min),
            RegionKind::PointSet => self
                .vertices
                .iter()
                .map(|v| v.distance(p))
                .fold(f64::INFINITY, f64::min),
        }
    }
}

/// H¹(Σ) for a polyline, H⁰(Σ) for a point set.
pub fn region_measure(region: &DirichletRegion) -> f64 {
    match region.kind {
        RegionKind::Polyline => region.segments().iter().map(|(a, b)| a.distance(*b)).sum(),
        RegionKind::PointSet => region.vertices.len() as f64,
    }
}

/// One atom of the generalized curvature of a polyline.
///
/// Interior vertices carry the sum of the two unit tangents pointing
/// towards the neighbours; chain endpoints carry the inward co-normal.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CurvatureAtom {
    pub location: Vec2,
    pub vector: Vec2,
    pub endpoint: bool,
}

/// Curvature atoms of a polyline, one per vertex. Point sets carry no
/// curvature (their tangent space is trivial), so the list is empty.
///
/// The pairing `Σ vector · X(location)` equals minus the first variation
/// of the length under the vertex displacement `X`.
pub fn discrete_curvature(region: &DirichletRegion) -> Vec<CurvatureAtom> {
    match region.kind {
        RegionKind::Polyline => chain_curvature(&region.vertices, false),
        RegionKind::PointSet => Vec::new(),
    }
}

pub(crate) fn chain_curvature(v: &[Vec2], closed: bool) -> Vec<CurvatureAtom> {
    let n = v.len();
    (0..n)
        .map(|i| {
            let prev = if i > 0 {
                Some(v[i - 1])
            } else if closed {
                Some(v[n - 1])
            } else {
                None
            };
            let next = if i + 1 < n {
                Some(v[i + 1])
            } else if closed {
                Some(v[0])
            } else {
                None
            };
            let towards = |w: Option<Vec2>| w.map_or(Vec2::ZERO, |w| (w - v[i]).normalized());
            CurvatureAtom {
                location: v[i],
                vector: towards(prev) + towards(next),
                endpoint: prev.is_none() || next.is_none(),
            }
        })
        .collect()
}

/// `Σ atom.vector · X(atom.location)`, i.e. ⟨H_Σ, X⟩.
pub fn curvature_pairing(atoms: &[CurvatureAtom], field: impl Fn(Vec2) -> Vec2) -> f64 {
    atoms.iter().map(|a| a.vector.dot(field(a.location))).sum()
}

/// Unit normal of a directed segment, pointing to the left of the
/// traversal direction.
#[inline]
pub fn left_normal(a: Vec2, b: Vec2) -> Vec2 {
    (b - a).normalized().perp()
}

/// Per-segment unit normals ν of a polyline (left of traversal).
pub fn normals(region: &DirichletRegion) -> Vec<Vec2> {
    region
        .segments()
        .iter()
        .map(|&(a, b)| left_normal(a, b))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: f64, y: f64) -> Vec2 {
        Vec2::new(x, y)
    }

    #[test]
    fn measure_examples() {
        let seg = DirichletRegion::polyline(vec![v(0.0, 0.0), v(1.0, 0.0)], 0.0).unwrap();
        assert_eq!(region_measure(&seg), 1.0);
        let pts = DirichletRegion::points(vec![v(0.3, 0.3), v(0.7, 0.7)], 0.0).unwrap();
        assert_eq!(region_measure(&pts), 2.0);
        let bent =
            DirichletRegion::polyline(vec![v(0.0, 0.0), v(1.0, 0.0), v(1.0, 1.0)], 0.0).unwrap();
        assert_eq!(region_measure(&bent), 2.0);
    }

    #[test]
    fn curvature_of_straight_chain() {
        let r =
            DirichletRegion::polyline(vec![v(0.0, 0.0), v(0.5, 0.0), v(1.0, 0.0)], 1.0).unwrap();
        let atoms = discrete_curvature(&r);
        assert_eq!(atoms.len(), 3);
        assert_eq!(atoms[0].vector, v(1.0, 0.0));
        assert!(atoms[0].endpoint);
        assert_eq!(atoms[1].vector, v(0.0, 0.0));
        assert!(!atoms[1].endpoint);
        assert_eq!(atoms[2].vector, v(-1.0, 0.0));
        let total: Vec2 = atoms.iter().map(|a| a.vector).sum();
        assert_eq!(total, Vec2::ZERO);
    }

    #[test]
    fn curvature_at_right_angle() {
        let r =
            DirichletRegion::polyline(vec![v(0.0, 0.0), v(1.0, 0.0), v(1.0, 1.0)], 1.0).unwrap();
        let atoms = discrete_curvature(&r);
        assert_eq!(atoms[1].vector, v(-1.0, 1.0));
        assert!((atoms[1].vector.norm() - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn translation_pairing_matches_length_derivative() {
        // Oracle: central difference of the length under a rigid shift.
        let r =
            DirichletRegion::polyline(vec![v(0.0, 0.0), v(0.5, 0.0), v(1.0, 0.0)], 1.0).unwrap();
        let c = v(0.3, -0.7);
        let eps = 1e-5;
        let shifted = |s: f64| {
            r.with_vertices(r.vertices().iter().map(|p| *p + c * s).collect())
                .unwrap()
        };
        let fd = (region_measure(&shifted(eps)) - region_measure(&shifted(-eps))) / (2.0 * eps);
        let pairing = curvature_pairing(&discrete_curvature(&r), |_| c);
        assert!((pairing + fd).abs() < 1e-9);
        assert!(pairing.abs() < 1e-15);
    }

    #[test]
    fn normal_convention() {
        let n = |a: Vec2, b: Vec2| normals(&DirichletRegion::polyline(vec![a, b], 0.0).unwrap())[0];
        assert_eq!(n(v(0.0, 0.0), v(1.0, 0.0)), v(0.0, 1.0));
        assert_eq!(n(v(0.0, 0.0), v(0.0, 1.0)), v(-1.0, 0.0));
        assert_eq!(n(v(1.0, 0.0), v(0.0, 0.0)), v(0.0, -1.0));
    }

    #[test]
    fn midpoint_split_is_measure_neutral() {
        let r =
            DirichletRegion::polyline(vec![v(0.1, 0.2), v(0.7, 0.4), v(0.9, 0.9)], 1.0).unwrap();
        let mut w = r.vertices().to_vec();
        w.insert(1, (w[0] + w[1]) * 0.5);
        let split = r.with_vertices(w).unwrap();
        assert!((region_measure(&split) - region_measure(&r)).abs() < 1e-12);
        let atoms = discrete_curvature(&split);
        assert_eq!(atoms.len(), 4);
        assert!(atoms[1].vector.norm() < 1e-12);
    }

    #[test]
    fn rejects_bad_regions() {
        assert!(matches!(
            DirichletRegion::polyline(vec![v(0.0, 0.0), v(0.0, 0.0)], 0.0),
            Err(Error::DegenerateGeometry(_))
        ));
        // self-intersecting bow tie
        assert!(DirichletRegion::polyline(
            vec![v(0.0, 0.0), v(1.0, 1.0), v(1.0, 0.0), v(0.0, 1.0)],
            0.0
        )
        .is_err());
        // fold back onto itself
        assert!(
            DirichletRegion::polyline(vec![v(0.0, 0.0), v(1.0, 0.0), v(0.5, 0.0)], 0.0).is_err()
        );
        assert!(DirichletRegion::points(vec![v(0.5, 0.5), v(0.5, 0.5)], 0.0).is_err());
        assert!(DirichletRegion::points(vec![v(0.5, 0.5)], -1.0).is_err());
        let sq = Polygon::unit_square();
        let outside = DirichletRegion::points(vec![v(1.5, 0.5)], 0.0).unwrap();
        assert!(matches!(
            outside.validate_in(&sq),
            Err(Error::RegionOutsideDomain { .. })
        ));
        let on_edge = DirichletRegion::points(vec![v(1.0, 0.5)], 0.0).unwrap();
        assert!(on_edge.validate_in(&sq).is_err());
    }

    #[test]
    fn polygon_orientation_and_simplicity() {
        let cw = Polygon::new(vec![v(0.0, 0.0), v(0.0, 1.0), v(1.0, 1.0), v(1.0, 0.0)]).unwrap();
        assert!(cw.area() > 0.0);
        assert!(Polygon::new(vec![v(0.0, 0.0), v(1.0, 1.0), v(1.0, 0.0), v(0.0, 1.0)]).is_err());
        assert!(Polygon::new(vec![v(0.0, 0.0), v(1.0, 0.0)]).is_err());
        let disk = Polygon::unit_disk(64);
        assert!((disk.area() - 32.0 * (std::f64::consts::TAU / 64.0).sin()).abs() < 1e-12);
        assert!(disk.centroid().norm() < 1e-12);
    }
}
