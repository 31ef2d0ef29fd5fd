//! Σ-conforming triangulations of polygonal domains.

use std::collections::BTreeMap;

use spade::{
    AngleLimit, ConstrainedDelaunayTriangulation, Point2, RefinementParameters, Triangulation,
};

use crate::error::{Error, Result};
use crate::fem::TriGeom;
use crate::geometry::{
    point_in_polygon, segment_distance, DirichletRegion, Polygon, RegionKind, Vec2,
};

/// Boundary tag of a mesh node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeTag {
    Interior,
    OuterBoundary,
    Region,
}

/// The zero set a mesh is fitted to, besides ∂Ω.
#[derive(Clone, Debug, PartialEq)]
pub enum SigmaSet {
    Region(DirichletRegion),
    /// Closed counterclockwise polygon whose interior is removed from the
    /// computational domain (the small circle Σ_r of the point probe).
    Loop(Vec<Vec2>),
}

impl SigmaSet {
    fn chain(&self) -> Option<(&[Vec2], bool)> {
        match self {
            SigmaSet::Region(r) if r.kind() == RegionKind::Polyline => Some((r.vertices(), false)),
            SigmaSet::Loop(v) => Some((v, true)),
            SigmaSet::Region(_) => None,
        }
    }

    fn vertices(&self) -> &[Vec2] {
        match self {
            SigmaSet::Region(r) => r.vertices(),
            SigmaSet::Loop(v) => v,
        }
    }

    fn segments(&self) -> Vec<(Vec2, Vec2)> {
        match self.chain() {
            Some((v, closed)) => {
                let n = v.len();
                let m = if closed { n } else { n - 1 };
                (0..m).map(|i| (v[i], v[(i + 1) % n])).collect()
            }
            None => Vec::new(),
        }
    }
}

/// A mesh edge lying on Σ, oriented along the traversal direction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SigmaEdge {
    /// Start and end node in traversal order.
    pub nodes: [usize; 2],
    /// Triangle to the left of the traversal direction (the side the
    /// normal points into).
    pub left: Option<usize>,
    /// Triangle to the right of the traversal direction.
    pub right: Option<usize>,
    /// Index of the Σ segment containing the edge.
    pub segment: usize,
    /// Arc-length coordinate of the start node along Σ.
    pub arc_start: f64,
    pub length: f64,
    /// Unit normal, left of traversal.
    pub normal: Vec2,
}

impl SigmaEdge {
    pub fn midpoint_arc(&self) -> f64 {
        self.arc_start + 0.5 * self.length
    }
}

/// Conforming P1 mesh of Ω∖Σ.
///
/// Nodes on Σ are shared by both sides; sidedness is carried by the
/// triangle references of [`SigmaEdge`]. For the linearized problem each
/// region node additionally owns one degree of freedom per sector (set of
/// incident triangles connected without crossing Σ), see
/// [`Mesh::corner_dofs`].
#[derive(Clone, Debug)]
pub struct Mesh {
    domain: Polygon,
    sigma: SigmaSet,
    h: f64,
    floor_h: f64,
    nodes: Vec<Vec2>,
    triangles: Vec<[usize; 3]>,
    tags: Vec<NodeTag>,
    sigma_edges: Vec<SigmaEdge>,
    vertex_nodes: Vec<usize>,
    geoms: Vec<TriGeom>,
    node_triangles: Vec<Vec<usize>>,
    corner_dofs: Vec<[usize; 3]>,
    dof_node: Vec<usize>,
}

/// Ratio between the refinement area bound and h²: the area of the
/// equilateral triangle with side h.
const AREA_FACTOR: f64 = 0.433_012_701_892_219_3;
const MIN_ANGLE_DEG: f64 = 25.0;
const AREA_FLOOR: f64 = 1e-3;

/// Triangulates `domain` so that every segment of a polyline `region` is a
/// union of mesh edges and every point of a point set is a node.
pub fn triangulate(domain: &Polygon, region: &DirichletRegion, h: f64) -> Result<Mesh> {
    region.validate_in(domain)?;
    MeshBuilder::new(domain, SigmaSet::Region(region.clone()), h).build()
}

pub(crate) struct MeshBuilder<'a> {
    domain: &'a Polygon,
    sigma: SigmaSet,
    h: f64,
    floor_h: f64,
    steiner: Vec<Vec2>,
    refine: bool,
}

impl<'a> MeshBuilder<'a> {
    pub(crate) fn new(domain: &'a Polygon, sigma: SigmaSet, h: f64) -> Self {
        Self {
            domain,
            sigma,
            h,
            floor_h: TIP_INNER * h,
            steiner: Vec::new(),
            refine: false,
        }
    }

    /// Use Delaunay refinement after inserting the Steiner points instead of
    /// the background lattice.
    pub(crate) fn refined(mut self) -> Self {
        self.refine = true;
        self
    }

    /// Extra interior vertices inserted before refinement.
    pub(crate) fn steiner(mut self, points: Vec<Vec2>) -> Self {
        self.steiner = points;
        self
    }

    /// Length scale of the sliver floor (defaults to `h`); locally refined
    /// meshes pass their smallest intended edge length.
    pub(crate) fn floor_scale(mut self, floor_h: f64) -> Self {
        self.floor_h = floor_h;
        self
    }

    pub(crate) fn build(self) -> Result<Mesh> {
        let h = self.h;
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::InvalidInput(format!(
                "mesh size must be positive, got {h}"
            )));
        }
        let domain = self.domain;
        let expected = domain.area() / (AREA_FACTOR * h * h);
        if expected > 5e6 {
            return Err(Error::MeshFailure(format!(
                "h = {h} would need about {expected:.0} triangles"
            )));
        }

        type Cdt = ConstrainedDelaunayTriangulation<Point2<f64>>;
        let mut cdt = Cdt::new();
        let insert = |cdt: &mut Cdt, p: Vec2| {
            cdt.insert(Point2::new(p.x, p.y))
                .map_err(|e| Error::MeshFailure(format!("cannot insert {p}: {e:?}")))
        };
        let grade = !self.refine;
        let add_chain = |cdt: &mut Cdt, pts: &[Vec2], closed: bool, subdivide: bool, tips: bool| {
            let n = pts.len();
            let m = if closed { n } else { n - 1 };
            let mut handles = Vec::with_capacity(n);
            let mut uniform = Vec::new();
            for p in pts {
                handles.push(insert(cdt, *p)?);
            }
            for i in 0..m {
                let (a, b) = (pts[i], pts[(i + 1) % n]);
                let len = a.distance(b);
                let mut ts: Vec<f64> = Vec::new();
                let (mut t0, mut t1) = (0.0, 1.0);
                if tips {
                    let cap = 0.5 * len;
                    if i == 0 {
                        for r in tip_radii(h, cap) {
                            t0 = r / len;
                            ts.push(t0);
                        }
                    }
                    if i + 1 == m {
                        for r in tip_radii(h, cap) {
                            t1 = 1.0 - r / len;
                            ts.push(t1);
                        }
                    }
                }
                if subdivide {
                    let k = subdivisions((t1 - t0) * len, h);
                    ts.extend((1..k).map(|j| t0 + (t1 - t0) * j as f64 / k as f64));
                }
                ts.sort_by(f64::total_cmp);
                let mut prev = handles[i];
                let mut prev_t = 0.0;
                for t in ts.into_iter().map(Some).chain([None]) {
                    let next = match t {
                        Some(t) => insert(cdt, a + (b - a) * t)?,
                        None => handles[(i + 1) % n],
                    };
                    let tt = t.unwrap_or(1.0);
                    if prev_t >= t0 && tt <= t1 {
                        uniform.push((a + (b - a) * prev_t, a + (b - a) * tt));
                    }
                    prev_t = tt;
                    if !cdt.can_add_constraint(prev, next) {
                        return Err(Error::MeshFailure("constraint edges cross".into()));
                    }
                    cdt.add_constraint(prev, next);
                    prev = next;
                }
            }
            Ok::<_, Error>((handles, uniform))
        };

        add_chain(&mut cdt, domain.vertices(), true, grade, false)?;
        let mut sub_edges = Vec::new();
        let sigma_handles = match self.sigma.chain() {
            // Insert open chains in a canonical direction so that reversing
            // the traversal yields the same triangulation.
            Some((v, false)) if reversed_is_smaller(v) => {
                let rev: Vec<Vec2> = v.iter().rev().copied().collect();
                let (mut hs, sub) = add_chain(&mut cdt, &rev, false, true, grade)?;
                hs.reverse();
                sub_edges = sub;
                hs
            }
            Some((v, closed)) => {
                let (hs, sub) = add_chain(&mut cdt, v, closed, true, grade && !closed)?;
                sub_edges = sub;
                hs
            }
            None => self
                .sigma
                .vertices()
                .iter()
                .map(|p| insert(&mut cdt, *p))
                .collect::<Result<Vec<_>>>()?,
        };
        for p in &self.steiner {
            insert(&mut cdt, *p)?;
        }

        if self.refine {
            let params = RefinementParameters::<f64>::new()
                .with_max_allowed_area(AREA_FACTOR * h * h)
                .with_angle_limit(AngleLimit::from_deg(MIN_ANGLE_DEG))
                .with_max_additional_vertices(20 * expected.ceil() as usize + 10_000);
            let result = cdt.refine(params);
            if !result.refinement_complete {
                return Err(Error::MeshFailure("refinement did not complete".into()));
            }
        } else {
            let rings = tip_rings(domain, &self.sigma, h);
            let layers = if matches!(self.sigma, SigmaSet::Region(_)) {
                offset_layers(domain, &self.sigma, &sub_edges, &rings)
            } else {
                Vec::new()
            };
            for p in rings.iter().chain(&layers) {
                insert(&mut cdt, *p)?;
            }
            let mut extra = rings;
            extra.extend_from_slice(&layers);
            extra.extend_from_slice(&self.steiner);
            for p in lattice_points(domain, &self.sigma, &extra, h) {
                insert(&mut cdt, p)?;
            }
            // gaps left where offset apexes were skipped: split what is too long
            for _ in 0..8 {
                let mut splits: Vec<Vec2> = Vec::new();
                for edge in cdt.undirected_edges() {
                    if cdt.is_constraint_edge(edge.fix()) {
                        continue;
                    }
                    let [a, b] = edge.positions().map(|q| Vec2::new(q.x, q.y));
                    let m = (a + b) * 0.5;
                    if a.distance(b) > 2.0 * h && domain.contains_strictly(m) {
                        splits.push(m);
                    }
                }
                if splits.is_empty() {
                    break;
                }
                splits.sort_by(|p, q| p.x.total_cmp(&q.x).then(p.y.total_cmp(&q.y)));
                for p in splits {
                    insert(&mut cdt, p)?;
                }
            }
        }

        // Keep faces inside Ω and outside the removed loop interior.
        let hole = match &self.sigma {
            SigmaSet::Loop(v) => Some(v.as_slice()),
            SigmaSet::Region(_) => None,
        };
        let mut faces: Vec<[usize; 3]> = Vec::new();
        for face in cdt.inner_faces() {
            let vs = face.vertices();
            let p = vs.map(|v| {
                let q = v.position();
                Vec2::new(q.x, q.y)
            });
            let c = (p[0] + p[1] + p[2]) / 3.0;
            if !domain.contains_strictly(c) || hole.is_some_and(|l| point_in_polygon(l, c)) {
                continue;
            }
            faces.push(vs.map(|v| v.fix().index()));
        }
        faces.sort_unstable();

        let mut compact = vec![usize::MAX; cdt.num_vertices()];
        for f in &faces {
            for &v in f {
                compact[v] = 0;
            }
        }
        let mut nodes = Vec::new();
        for (i, v) in cdt.vertices().enumerate() {
            debug_assert_eq!(v.fix().index(), i);
            if compact[i] == 0 {
                compact[i] = nodes.len();
                let q = v.position();
                nodes.push(Vec2::new(q.x, q.y));
            }
        }
        let triangles: Vec<[usize; 3]> = faces.iter().map(|f| f.map(|v| compact[v])).collect();
        let vertex_nodes: Vec<usize> = sigma_handles.iter().map(|hd| compact[hd.index()]).collect();
        if vertex_nodes.contains(&usize::MAX) {
            return Err(Error::MeshFailure(
                "region vertex lost in triangulation".into(),
            ));
        }

        let mut mesh = Mesh {
            domain: domain.clone(),
            sigma: self.sigma,
            h,
            floor_h: self.floor_h,
            nodes,
            triangles,
            tags: Vec::new(),
            sigma_edges: Vec::new(),
            vertex_nodes,
            geoms: Vec::new(),
            node_triangles: Vec::new(),
            corner_dofs: Vec::new(),
            dof_node: Vec::new(),
        };
        mesh.tag_nodes();
        mesh.finish(true)?;
        Ok(mesh)
    }
}

/// Number of pieces a constrained segment of length `len` is cut into.
/// The threshold sits off the integers so that segment lengths that are
/// round multiples of `h` do not sit on a jump of the mesh topology.
fn subdivisions(len: f64, h: f64) -> usize {
    ((len / h - 0.3).ceil() as usize).max(1)
}

/// Graded rings around chain endpoints and isolated points: radii grow
/// geometrically from `TIP_INNER·h` up to `TIP_OUTER·h`.
const TIP_INNER: f64 = 0.1;
const TIP_OUTER: f64 = 2.6;
const TIP_GROWTH: f64 = 1.5;

/// The outermost ring stays `0.15h` inside `cap`, so that the rings of the
/// two ends of a short segment cannot meet at its midpoint.
fn tip_radii(h: f64, cap: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut r = TIP_INNER * h;
    while r <= TIP_OUTER * h && r < cap - 0.15 * h {
        out.push(r);
        r *= TIP_GROWTH;
    }
    out
}

/// Rings of nodes around the endpoints of an open chain and around the
/// points of a point set. They move rigidly with the endpoint, so that the
/// mesh near the singularities is unchanged under small motions of Σ and
/// topology changes happen only where the solution is smooth.
fn tip_rings(domain: &Polygon, sigma: &SigmaSet, h: f64) -> Vec<Vec2> {
    // (centre, direction of the chain, radius cap, ring includes direction)
    let mut centres: Vec<(Vec2, Vec2, f64, bool)> = Vec::new();
    match sigma.chain() {
        Some((v, false)) => {
            let n = v.len();
            for (c, next) in [(v[0], v[1]), (v[n - 1], v[n - 2])] {
                centres.push((c, next - c, 0.5 * c.distance(next), false));
            }
        }
        Some((_, true)) => {}
        None => {
            let v = sigma.vertices();
            for (i, p) in v.iter().enumerate() {
                let nearest = v
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != i)
                    .map(|(_, q)| q.distance(*p))
                    .fold(f64::INFINITY, f64::min);
                centres.push((*p, Vec2::new(1.0, 0.0), 0.5 * nearest, true));
            }
        }
    }
    // independent of the traversal direction
    centres.sort_by(|a, b| a.0.x.total_cmp(&b.0.x).then(a.0.y.total_cmp(&b.0.y)));
    let segments = sigma.segments();
    let mut out = Vec::new();
    for (c, dir, cap, full) in centres {
        let a0 = dir.y.atan2(dir.x);
        let cap = cap.min(0.5 * domain.distance_to_boundary(c));
        for (k, r) in tip_radii(h, cap).into_iter().enumerate() {
            // Alternate rings are staggered by half a step, and every ring
            // has a node opposite the chain (even count unstaggered, odd
            // count staggered). Neighbouring rings then form no cocircular
            // quadrilaterals, whose diagonal the CDT would pick arbitrarily.
            let mut m = ((std::f64::consts::TAU * r / (0.7 * h)).ceil() as usize).max(8);
            if m % 2 != k % 2 {
                m += 1;
            }
            let spacing = std::f64::consts::TAU * r / m as f64;
            let shift = if k % 2 == 1 { 0.5 } else { 0.0 };
            for j in (if full || k % 2 == 1 { 0 } else { 1 })..m {
                let a = a0 + std::f64::consts::TAU * (j as f64 + shift) / m as f64;
                let p = c + Vec2::new(a.cos(), a.sin()) * r;
                let clear = segments
                    .iter()
                    .all(|&(s0, s1)| segment_distance(p, s0, s1).0 > 0.3 * spacing);
                if clear {
                    out.push(p);
                }
            }
        }
    }
    out
}

/// Apexes of equilateral triangles on both sides of the uniform Σ
/// sub-edges, so that the elements touching Σ mirror each other across it.
/// Apexes that would crowd ∂Ω, another part of Σ, a tip ring or an earlier
/// apex are skipped.
fn offset_layers(
    domain: &Polygon,
    sigma: &SigmaSet,
    sub_edges: &[(Vec2, Vec2)],
    rings: &[Vec2],
) -> Vec<Vec2> {
    let segments = sigma.segments();
    let mut out: Vec<Vec2> = Vec::new();
    for &(a, b) in sub_edges {
        let len = a.distance(b);
        let normal = (b - a).normalized().perp();
        let mid = (a + b) * 0.5;
        for side in [1.0, -1.0] {
            let p = mid + normal * (side * 0.75f64.sqrt() * len);
            let ok = domain.contains(p)
                && domain.distance_to_boundary(p) > 0.5 * len
                && segments
                    .iter()
                    .all(|&(s0, s1)| segment_distance(p, s0, s1).0 > 0.7 * len)
                && rings.iter().chain(&out).all(|q| q.distance(p) > 0.5 * len);
            if ok {
                out.push(p);
            }
        }
    }
    out
}

/// Clearance, in units of `h`, between lattice points and the constrained
/// boundaries.
const LATTICE_CLEARANCE: f64 = 0.55;
const SIGMA_CLEARANCE: f64 = 1.2;

/// Points of the triangular lattice of spacing `h` anchored at the corner
/// of the bounding box of Ω, keeping clear of ∂Ω, Σ and the given points.
///
/// The lattice does not depend on Σ, so nearby configurations get meshes
/// that differ only close to Σ.
fn lattice_points(domain: &Polygon, sigma: &SigmaSet, extra: &[Vec2], h: f64) -> Vec<Vec2> {
    let v = domain.vertices();
    let (mut lo, mut hi) = (v[0], v[0]);
    for p in v {
        lo = Vec2::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = Vec2::new(hi.x.max(p.x), hi.y.max(p.y));
    }
    let dy = h * 0.75f64.sqrt();
    let clear = LATTICE_CLEARANCE * h;
    // chains carry offset layers, which the lattice keeps clear of as well
    let sigma_clear = if sigma.chain().is_some() {
        SIGMA_CLEARANCE * h
    } else {
        clear
    };
    let segments = sigma.segments();
    let points = match sigma.chain() {
        Some(_) => &[][..],
        None => sigma.vertices(),
    };
    // centred on the bounding box, so that the lattice shares the mirror
    // symmetries of the domain
    let c = (lo + hi) * 0.5;
    let rows = ((hi.y - lo.y) / (2.0 * dy)).ceil() as i64;
    let cols = ((hi.x - lo.x) / (2.0 * h)).ceil() as i64 + 1;
    let mut out = Vec::new();
    for j in -rows..=rows {
        let shift = if j % 2 == 0 { 0.5 } else { 0.0 };
        for i in -cols..=cols {
            let p = Vec2::new(c.x + (i as f64 + shift) * h, c.y + j as f64 * dy);
            if !domain.contains(p) || domain.distance_to_boundary(p) < clear {
                continue;
            }
            let near_sigma = segments
                .iter()
                .any(|&(a, b)| segment_distance(p, a, b).0 < sigma_clear)
                || points.iter().chain(extra).any(|q| q.distance(p) < clear);
            if !near_sigma {
                out.push(p);
            }
        }
    }
    out
}

fn reversed_is_smaller(v: &[Vec2]) -> bool {
    let key = |p: &Vec2| (p.x, p.y);
    for (a, b) in v.iter().rev().zip(v.iter()) {
        match key(a).partial_cmp(&key(b)) {
            Some(std::cmp::Ordering::Less) => return true,
            Some(std::cmp::Ordering::Greater) => return false,
            _ => {}
        }
    }
    false
}

impl Mesh {
    fn tag_nodes(&mut self) {
        let tol = self.domain.boundary_tolerance();
        let segments = self.sigma.segments();
        let mut tags: Vec<NodeTag> = self
            .nodes
            .iter()
            .map(|&p| {
                if segments
                    .iter()
                    .any(|&(a, b)| segment_distance(p, a, b).0 <= tol)
                {
                    NodeTag::Region
                } else if self.domain.distance_to_boundary(p) <= tol {
                    NodeTag::OuterBoundary
                } else {
                    NodeTag::Interior
                }
            })
            .collect();
        for &n in &self.vertex_nodes {
            tags[n] = NodeTag::Region;
        }
        self.tags = tags;
    }

    /// Recomputes everything derived from node positions and topology.
    fn finish(&mut self, check_edges: bool) -> Result<()> {
        let floor = AREA_FLOOR * self.floor_h * self.floor_h;
        self.geoms = Vec::with_capacity(self.triangles.len());
        for (t, tri) in self.triangles.iter().enumerate() {
            let [a, b, c] = tri.map(|i| self.nodes[i]);
            let g = TriGeom::new(a, b, c);
            if !(g.area >= floor) {
                return Err(Error::MeshFailure(format!(
                    "triangle {t} ({a}, {b}, {c}) has area {:e} below the floor {floor:e}",
                    g.area
                )));
            }
            if check_edges {
                let longest = a.distance(b).max(b.distance(c)).max(c.distance(a));
                if longest > 2.0 * self.h {
                    return Err(Error::MeshFailure(format!(
                        "triangle {t} ({a}, {b}, {c}) has an edge of length {longest} > 2h"
                    )));
                }
            }
            self.geoms.push(g);
        }
        let mut node_triangles = vec![Vec::new(); self.nodes.len()];
        for (t, tri) in self.triangles.iter().enumerate() {
            for &n in tri {
                node_triangles[n].push(t);
            }
        }
        self.node_triangles = node_triangles;
        self.find_sigma_edges()?;
        self.assign_dofs();
        Ok(())
    }

    fn find_sigma_edges(&mut self) -> Result<()> {
        let segments = self.sigma.segments();
        if segments.is_empty() {
            self.sigma_edges.clear();
            return Ok(());
        }
        let tol = self.domain.boundary_tolerance();
        // (segment, smaller node, larger node) -> (left, right, start, end)
        let mut found: BTreeMap<(usize, usize, usize), [Option<usize>; 2]> = BTreeMap::new();
        let mut params: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (t, tri) in self.triangles.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                if self.tags[a] != NodeTag::Region || self.tags[b] != NodeTag::Region {
                    continue;
                }
                let (pa, pb) = (self.nodes[a], self.nodes[b]);
                let mid = (pa + pb) * 0.5;
                for (s, &(sa, sb)) in segments.iter().enumerate() {
                    let (da, ta) = segment_distance(pa, sa, sb);
                    let (db, tb) = segment_distance(pb, sa, sb);
                    if da > tol || db > tol || segment_distance(mid, sa, sb).0 > tol {
                        continue;
                    }
                    params.insert((s, a), ta);
                    params.insert((s, b), tb);
                    // the triangle lies to the left of its CCW edge a -> b
                    let forward = ta < tb;
                    let entry = found.entry((s, a.min(b), a.max(b))).or_default();
                    let slot = if forward { 0 } else { 1 };
                    if entry[slot].is_some() {
                        return Err(Error::MeshFailure(
                            "region edge shared by 3 triangles".into(),
                        ));
                    }
                    entry[slot] = Some(t);
                    break;
                }
            }
        }
        let mut edges: Vec<(usize, f64, SigmaEdge)> = found
            .into_iter()
            .map(|((s, a, b), [left, right])| {
                let (start, end) = if params[&(s, a)] < params[&(s, b)] {
                    (a, b)
                } else {
                    (b, a)
                };
                let (p, q) = (self.nodes[start], self.nodes[end]);
                let edge = SigmaEdge {
                    nodes: [start, end],
                    left,
                    right,
                    segment: s,
                    arc_start: 0.0,
                    length: p.distance(q),
                    normal: (q - p).normalized().perp(),
                };
                (s, params[&(s, start)], edge)
            })
            .collect();
        edges.sort_by(|x, y| x.0.cmp(&y.0).then(x.1.total_cmp(&y.1)));
        let mut arc = 0.0;
        self.sigma_edges = edges
            .into_iter()
            .map(|(_, _, mut e)| {
                e.arc_start = arc;
                arc += e.length;
                e
            })
            .collect();
        // coverage and continuity of the chain
        for w in self.sigma_edges.windows(2) {
            if w[0].nodes[1] != w[1].nodes[0] {
                return Err(Error::MeshFailure(
                    "region is not covered by mesh edges".into(),
                ));
            }
        }
        let two_sided = matches!(self.sigma, SigmaSet::Region(_));
        for (i, e) in self.sigma_edges.iter().enumerate() {
            if e.right.is_none() {
                return Err(Error::MissingSide {
                    edge: i,
                    side: "right",
                });
            }
            if two_sided && e.left.is_none() {
                return Err(Error::MissingSide {
                    edge: i,
                    side: "left",
                });
            }
        }
        Ok(())
    }

    fn is_sigma_edge(&self, a: usize, b: usize) -> bool {
        self.sigma_edges
            .iter()
            .any(|e| (e.nodes[0] == a && e.nodes[1] == b) || (e.nodes[0] == b && e.nodes[1] == a))
    }

    /// Splits every region node into one degree of freedom per sector.
    fn assign_dofs(&mut self) {
        let n = self.nodes.len();
        let mut corner_dofs: Vec<[usize; 3]> = self.triangles.clone();
        let mut dof_node: Vec<usize> = (0..n).collect();
        for node in 0..n {
            if self.tags[node] != NodeTag::Region {
                continue;
            }
            let incident = &self.node_triangles[node];
            let mut parent: Vec<usize> = (0..incident.len()).collect();
            fn root(parent: &mut [usize], mut i: usize) -> usize {
                while parent[i] != i {
                    parent[i] = parent[parent[i]];
                    i = parent[i];
                }
                i
            }
            for i in 0..incident.len() {
                for j in (i + 1)..incident.len() {
                    let (ti, tj) = (self.triangles[incident[i]], self.triangles[incident[j]]);
                    let shared = ti.iter().find(|&&m| m != node && tj.contains(&m)).copied();
                    if let Some(m) = shared {
                        if !self.is_sigma_edge(node, m) {
                            let (ri, rj) = (root(&mut parent, i), root(&mut parent, j));
                            parent[ri.max(rj)] = ri.min(rj);
                        }
                    }
                }
            }
            let mut class_dof: BTreeMap<usize, usize> = BTreeMap::new();
            for i in 0..incident.len() {
                let r = root(&mut parent, i);
                let dof = *class_dof.entry(r).or_insert_with(|| {
                    if r == 0 {
                        node
                    } else {
                        dof_node.push(node);
                        dof_node.len() - 1
                    }
                });
                let t = incident[i];
                let k = self.triangles[t].iter().position(|&m| m == node).unwrap();
                corner_dofs[t][k] = dof;
            }
        }
        self.corner_dofs = corner_dofs;
        self.dof_node = dof_node;
    }

    /// Copy of the mesh with every node moved by `displacement`, keeping the
    /// topology. The region is rebuilt from the moved Σ nodes unless
    /// `region` is given.
    pub fn morphed(&self, displacement: &[Vec2], region: Option<DirichletRegion>) -> Result<Mesh> {
        if displacement.len() != self.nodes.len() {
            return Err(Error::InvalidInput("displacement length mismatch".into()));
        }
        let mut m = self.clone();
        for (p, d) in m.nodes.iter_mut().zip(displacement) {
            *p += *d;
        }
        m.sigma = match (region, &self.sigma) {
            (Some(r), _) => SigmaSet::Region(r),
            (None, SigmaSet::Region(r)) => {
                let vertices: Vec<Vec2> = match r.kind() {
                    RegionKind::Polyline => {
                        let mut v: Vec<Vec2> = self
                            .sigma_edges
                            .iter()
                            .map(|e| m.nodes[e.nodes[0]])
                            .collect();
                        if let Some(last) = self.sigma_edges.last() {
                            v.push(m.nodes[last.nodes[1]]);
                        }
                        v
                    }
                    RegionKind::PointSet => self.vertex_nodes.iter().map(|&i| m.nodes[i]).collect(),
                };
                SigmaSet::Region(
                    r.with_vertices(vertices)
                        .map_err(|e| Error::GeometryBreakdown(e.to_string()))?,
                )
            }
            (None, SigmaSet::Loop(_)) => {
                SigmaSet::Loop(self.vertex_nodes.iter().map(|&i| m.nodes[i]).collect())
            }
        };
        // topology is kept, so only geometry and Σ edge data are refreshed
        m.geoms.clear();
        let floor = AREA_FLOOR * m.floor_h * m.floor_h;
        for (t, tri) in m.triangles.iter().enumerate() {
            let [a, b, c] = tri.map(|i| m.nodes[i]);
            let g = TriGeom::new(a, b, c);
            if !(g.area >= floor) {
                return Err(Error::GeometryBreakdown(format!(
                    "moved triangle {t} degenerates (area {:e})",
                    g.area
                )));
            }
            m.geoms.push(g);
        }
        let mut arc = 0.0;
        for e in &mut m.sigma_edges {
            let (p, q) = (m.nodes[e.nodes[0]], m.nodes[e.nodes[1]]);
            e.arc_start = arc;
            e.length = p.distance(q);
            e.normal = (q - p).normalized().perp();
            arc += e.length;
        }
        Ok(m)
    }

    pub fn domain(&self) -> &Polygon {
        &self.domain
    }

    pub fn sigma(&self) -> &SigmaSet {
        &self.sigma
    }

    /// The Dirichlet region the mesh was fitted to (`None` for probe loops).
    pub fn region(&self) -> Option<&DirichletRegion> {
        match &self.sigma {
            SigmaSet::Region(r) => Some(r),
            SigmaSet::Loop(_) => None,
        }
    }

    /// Whether the mesh was built for exactly this region geometry.
    pub fn conforms_to(&self, region: &DirichletRegion) -> bool {
        self.region()
            .is_some_and(|r| r.kind() == region.kind() && r.vertices() == region.vertices())
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn nodes(&self) -> &[Vec2] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn tags(&self) -> &[NodeTag] {
        &self.tags
    }

    pub fn sigma_edges(&self) -> &[SigmaEdge] {
        &self.sigma_edges
    }

    /// Node index of every Σ vertex (polyline vertices in order, points,
    /// or loop vertices).
    pub fn vertex_nodes(&self) -> &[usize] {
        &self.vertex_nodes
    }

    pub fn geoms(&self) -> &[TriGeom] {
        &self.geoms
    }

    pub fn node_triangles(&self, node: usize) -> &[usize] {
        &self.node_triangles[node]
    }

    /// Degree of freedom at each triangle corner. Equal to the node index
    /// except at region nodes that are split into several sectors.
    pub fn corner_dofs(&self) -> &[[usize; 3]] {
        &self.corner_dofs
    }

    pub fn n_dofs(&self) -> usize {
        self.dof_node.len()
    }

    pub fn dof_node(&self, dof: usize) -> usize {
        self.dof_node[dof]
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Whether a degree of freedom carries a Dirichlet condition.
    pub fn is_dirichlet(&self, dof: usize) -> bool {
        self.tags[self.dof_node[dof]] != NodeTag::Interior
    }

    pub fn min_area(&self) -> f64 {
        self.geoms
            .iter()
            .map(|g| g.area)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_edge(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| {
                let [a, b, c] = t.map(|i| self.nodes[i]);
                a.distance(b).max(b.distance(c)).max(c.distance(a))
            })
            .fold(0.0, f64::max)
    }

    /// Total length of the Σ edges.
    pub fn sigma_length(&self) -> f64 {
        self.sigma_edges.iter().map(|e| e.length).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn segment() -> DirichletRegion {
        DirichletRegion::polyline(vec![Vec2::new(0.25, 0.5), Vec2::new(0.75, 0.5)], 0.0).unwrap()
    }

    #[test]
    fn empty_region_mesh() {
        let m = triangulate(&Polygon::unit_square(), &DirichletRegion::empty(), 0.1).unwrap();
        assert!(m.min_area() > 0.0);
        assert!(m.tags().iter().all(|t| *t != NodeTag::Region));
        assert!(m.max_edge() <= 0.2);
        let total: f64 = m.geoms().iter().map(|g| g.area).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn segment_is_covered_by_edges() {
        let m = triangulate(&Polygon::unit_square(), &segment(), 0.05).unwrap();
        assert!((m.sigma_length() - 0.5).abs() < 1e-12);
        let edges = m.sigma_edges();
        assert!(edges.len() >= 10);
        for e in edges {
            for &n in &e.nodes {
                assert_eq!(m.tags()[n], NodeTag::Region);
                assert_eq!(m.nodes()[n].y, 0.5);
            }
            assert!(e.left.is_some() && e.right.is_some());
            assert_eq!(e.normal, Vec2::new(0.0, 1.0));
            let cl = m.geoms()[e.left.unwrap()].quad_points[0];
            let cr = m.geoms()[e.right.unwrap()].quad_points[0];
            assert!(cl.y > 0.5 && cr.y < 0.5);
        }
        for (n, tag) in m.tags().iter().enumerate() {
            if *tag == NodeTag::Region {
                let p = m.nodes()[n];
                assert!(p.y == 0.5 && p.x >= 0.25 && p.x <= 0.75);
            }
        }
    }

    #[test]
    fn interior_region_nodes_split_into_two_sectors() {
        let m = triangulate(&Polygon::unit_square(), &segment(), 0.1).unwrap();
        let region_nodes = m.tags().iter().filter(|t| **t == NodeTag::Region).count();
        // endpoints keep one dof, every other region node gets a second one
        assert_eq!(m.n_dofs(), m.n_nodes() + region_nodes - 2);
    }

    #[test]
    fn outside_point_is_rejected() {
        let r = DirichletRegion::points(vec![Vec2::new(1.5, 0.5)], 0.0).unwrap();
        assert!(matches!(
            triangulate(&Polygon::unit_square(), &r, 0.1),
            Err(Error::RegionOutsideDomain { .. })
        ));
    }

    #[test]
    fn point_is_a_node() {
        let p = Vec2::new(0.3, 0.7);
        let r = DirichletRegion::points(vec![p], 0.0).unwrap();
        let m = triangulate(&Polygon::unit_square(), &r, 0.1).unwrap();
        assert_eq!(m.nodes()[m.vertex_nodes()[0]], p);
        assert_eq!(
            m.tags().iter().filter(|t| **t == NodeTag::Region).count(),
            1
        );
        assert!(m.sigma_edges().is_empty());
    }

    #[test]
    fn triangulation_is_deterministic() {
        let a = triangulate(&Polygon::unit_square(), &segment(), 0.05).unwrap();
        let b = triangulate(&Polygon::unit_square(), &segment(), 0.05).unwrap();
        assert_eq!(a.nodes(), b.nodes());
        assert_eq!(a.triangles(), b.triangles());
    }

    #[test]
    fn reversed_region_swaps_sides() {
        let m = triangulate(&Polygon::unit_square(), &segment(), 0.1).unwrap();
        let r = triangulate(&Polygon::unit_square(), &segment().reversed(), 0.1).unwrap();
        assert_eq!(m.triangles(), r.triangles());
        let (e, f) = (m.sigma_edges()[0], r.sigma_edges().last().copied().unwrap());
        assert_eq!(e.left, f.right);
        assert_eq!(e.right, f.left);
        assert_eq!(e.normal, -f.normal);
    }
}
