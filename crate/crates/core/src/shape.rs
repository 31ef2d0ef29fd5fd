//! Shape derivatives of the penalized functional and the first-order
//! optimality residuals on curves and at points.
//!
//! Sign conventions: on every Σ edge the unit normal ν points to the left
//! of the traversal direction. The "+" side is the part of Ω∖Σ whose outer
//! normal on Σ is ν, i.e. the right of the traversal; the jump of a
//! quantity is `a⁺ − a⁻`. With these conventions the derivative of the
//! cost along `id + εX` is
//! `−λ⟨H_Σ, X⟩ − ∫_Σ (g⁺ − g⁻) X·ν`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{at_quad_points, par_map, QUAD_BARY, QUAD_WEIGHT};
use crate::functional::{CostBreakdown, CostIntegrand};
use crate::geometry::{
    curvature_pairing, discrete_curvature, region_measure, segment_distance, CurvatureAtom,
    DirichletRegion, RegionKind, Vec2,
};
use crate::mesh::{Mesh, NodeTag, SigmaEdge, SigmaSet};
use crate::problem::ShapeProblem;
use crate::solver::{Density, Field, FieldRole};

/// Smooth vector fields used as shape variations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum VectorField {
    Zero,
    /// `direction · exp(1 − 1/(1 − s²))` with `s = |x − center| / radius`.
    Bump {
        center: Vec2,
        radius: f64,
        direction: Vec2,
    },
    /// Equal to `direction` within `inner` of `center`, smoothly cut off to
    /// zero at distance `outer`.
    Plateau {
        center: Vec2,
        inner: f64,
        outer: f64,
        direction: Vec2,
    },
}

fn bump_profile(s: f64) -> f64 {
    if s >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - s * s)).exp()
    }
}

fn smooth_step(t: f64) -> f64 {
    let psi = |t: f64| if t > 0.0 { (-1.0 / t).exp() } else { 0.0 };
    let (a, b) = (psi(t), psi(1.0 - t));
    a / (a + b)
}

impl VectorField {
    pub fn eval(&self, x: Vec2) -> Vec2 {
        match *self {
            VectorField::Zero => Vec2::ZERO,
            VectorField::Bump {
                center,
                radius,
                direction,
            } => direction * bump_profile(x.distance(center) / radius),
            VectorField::Plateau {
                center,
                inner,
                outer,
                direction,
            } => {
                let d = x.distance(center);
                direction * (1.0 - smooth_step((d - inner) / (outer - inner)))
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            VectorField::Zero => true,
            VectorField::Bump {
                radius, direction, ..
            } => radius > 0.0 && direction.is_finite(),
            VectorField::Plateau {
                inner,
                outer,
                direction,
                ..
            } => inner >= 0.0 && outer > inner && direction.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "invalid vector field {self:?}"
            )))
        }
    }
}

/// Per-side density on one Σ edge.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SideDensity {
    /// `(∂u/∂ν)(F_z·ν) − (∂u/∂ν) ν·G_u(∇q)`, which reduces to
    /// `(∂u/∂ν)(F_z·ν) − (p−1)|∂u/∂ν|^{p−2}(∂u/∂ν)(∂q/∂ν)`.
    pub flux: f64,
    /// `flux − F(x, 0, ∇u)`: the flux part plus the transport of the
    /// integrand across the moving interface.
    pub total: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct JumpSample {
    pub edge: usize,
    pub arc: f64,
    pub midpoint: Vec2,
    pub normal: Vec2,
    pub length: f64,
    /// Right of traversal.
    pub plus: Option<SideDensity>,
    /// Left of traversal.
    pub minus: Option<SideDensity>,
    /// `total⁺ − total⁻` (a missing side counts as zero).
    pub jump: f64,
    /// `flux⁺ − flux⁻`.
    pub flux_jump: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct JumpDensity {
    pub samples: Vec<JumpSample>,
}

fn check_pair(u: &Field, q: &Field) -> Result<()> {
    if !u.same_mesh(q) {
        return Err(Error::MeshMismatch);
    }
    if u.role() != FieldRole::State || q.role() != FieldRole::Adjoint {
        return Err(Error::InvalidInput(
            "expected a state and an adjoint field".into(),
        ));
    }
    Ok(())
}

fn check_region(u: &Field, region: &DirichletRegion) -> Result<()> {
    if u.mesh().conforms_to(region) {
        Ok(())
    } else {
        Err(Error::MeshMismatch)
    }
}

fn side_density(
    cost: &CostIntegrand,
    w: Density,
    x: Vec2,
    normal: Vec2,
    z: Vec2,
    y: Vec2,
) -> SideDensity {
    let d = z.dot(normal);
    let fz = (cost.d_z)(x, 0.0, z);
    let flux = d * fz.dot(normal) - d * normal.dot(w.apply_second(z, y));
    SideDensity {
        flux,
        total: flux - (cost.value)(x, 0.0, z),
    }
}

/// Jump densities on every Σ edge from the one-sided gradients of `u`
/// and `q`.
pub fn jump_density(u: &Field, q: &Field, cost: &CostIntegrand) -> Result<JumpDensity> {
    check_pair(u, q)?;
    let mesh = u.mesh();
    let w = u.problem().energy_density();
    let samples = mesh
        .sigma_edges()
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let [a, b] = e.nodes.map(|n| mesh.nodes()[n]);
            let mid = (a + b) * 0.5;
            let side = |t: Option<usize>| {
                t.map(|t| side_density(cost, w, mid, e.normal, u.gradient(t), q.gradient(t)))
            };
            let (plus, minus) = (side(e.right), side(e.left));
            let val =
                |s: Option<SideDensity>, f: fn(&SideDensity) -> f64| s.as_ref().map_or(0.0, f);
            let sample = JumpSample {
                edge: i,
                arc: e.midpoint_arc(),
                midpoint: mid,
                normal: e.normal,
                length: e.length,
                plus,
                minus,
                jump: val(plus, |s| s.total) - val(minus, |s| s.total),
                flux_jump: val(plus, |s| s.flux) - val(minus, |s| s.flux),
            };
            if sample.jump.is_finite() {
                Ok(sample)
            } else {
                Err(Error::NonFinite("jump density"))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(JumpDensity { samples })
}

/// Derivative of the penalized cost along `id + εX` from the boundary
/// representation `−λ⟨H_Σ, X⟩ − ∫_Σ (g⁺ − g⁻) X·ν`, with the jump taken at
/// edge midpoints.
///
/// The boundary integral carries no contribution from the chain endpoints,
/// where the traces are singular, so the formula is only meaningful for
/// fields `X` that vanish near the endpoints. Point sets have no boundary
/// integral and are rejected.
pub fn boundary_shape_derivative(
    u: &Field,
    q: &Field,
    region: &DirichletRegion,
    cost: &CostIntegrand,
    x: &dyn Fn(Vec2) -> Vec2,
) -> Result<f64> {
    check_pair(u, q)?;
    check_region(u, region)?;
    if region.kind() == RegionKind::PointSet {
        return Err(Error::InvalidInput(
            "a point set has no boundary integral".into(),
        ));
    }
    let jumps = jump_density(u, q, cost)?;
    let boundary: f64 = jumps
        .samples
        .iter()
        .map(|s| s.jump * x(s.midpoint).dot(s.normal) * s.length)
        .sum();
    let length = curvature_pairing(&discrete_curvature(region), x);
    Ok(-region.lambda() * length - boundary)
}

/// Nodal configurational forces `G_n`: the derivative of the discrete
/// integral term with respect to the position of node `n`, the state being
/// re-solved (through the adjoint `q`). Nodes on ∂Ω are held fixed and get
/// zero.
///
/// Pairing with any nodal displacement `X` gives the exact derivative of
/// the discrete cost under the mesh motion `x_n ↦ x_n + εX(x_n)`.
pub fn configurational_forces(u: &Field, q: &Field, cost: &CostIntegrand) -> Result<Vec<Vec2>> {
    check_pair(u, q)?;
    let mesh = u.mesh();
    let problem = u.problem();
    let w = problem.energy_density();
    let f = problem.source().clone();
    let delta = 1e-6 * mesh.domain().diameter();
    let grad_x = |g: &dyn Fn(Vec2) -> f64, x: Vec2| {
        let (ex, ey) = (Vec2::new(delta, 0.0), Vec2::new(0.0, delta));
        Vec2::new(g(x + ex) - g(x - ex), g(x + ey) - g(x - ey)) / (2.0 * delta)
    };
    let threads = crate::solver::threads_from_env();
    let local = par_map(threads, mesh.n_triangles(), |t| {
        let g = &mesh.geoms()[t];
        let z = u.gradient(t);
        let y = q.gradient(t);
        let uq = at_quad_points(u.corner_values(t));
        let qq = at_quad_points(q.corner_values(t));
        let fq = problem.f_quad()[t];
        let mut mean_f = 0.0;
        let mut mean_fz = Vec2::ZERO;
        let mut mean_fq = 0.0;
        let mut point_terms = [Vec2::ZERO; 3];
        for k in 0..3 {
            let x = g.quad_points[k];
            mean_f += QUAD_WEIGHT * (cost.value)(x, uq[k], z);
            mean_fz += (cost.d_z)(x, uq[k], z) * QUAD_WEIGHT;
            mean_fq += QUAD_WEIGHT * fq[k] * qq[k];
            let dfx = grad_x(&|x| (cost.value)(x, uq[k], z), x);
            let dsrc = grad_x(&|x| f(x), x);
            point_terms[k] = (dfx + dsrc * qq[k]) * QUAD_WEIGHT;
        }
        let wp = w.first(z);
        let wpp_y = w.apply_second(z, y);
        let scalar = mean_f - wp.dot(y) + mean_fq;
        [0, 1, 2].map(|a| {
            let ga = g.grads[a];
            let mut v = ga * scalar;
            for k in 0..3 {
                v += point_terms[k] * QUAD_BARY[k][a];
            }
            v += z * (ga.dot(wpp_y) - mean_fz.dot(ga));
            v += y * ga.dot(wp);
            v * g.area
        })
    });
    let mut forces = vec![Vec2::ZERO; mesh.n_nodes()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        for k in 0..3 {
            forces[tri[k]] += local[t][k];
        }
    }
    for (n, tag) in mesh.tags().iter().enumerate() {
        if *tag == NodeTag::OuterBoundary {
            forces[n] = Vec2::ZERO;
        }
    }
    if forces.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("configurational forces"));
    }
    Ok(forces)
}

/// Derivative of the penalized cost along `id + εX`.
///
/// The integral term is differentiated in its volume form: the
/// configurational forces paired with `X` at the nodes. This is the exact
/// derivative of the discrete cost when the mesh is moved by `X`, and it
/// includes the contributions of chain endpoints and isolated points. The
/// length term is `−λ⟨H_Σ, X⟩` from the curvature atoms.
pub fn shape_derivative(
    u: &Field,
    q: &Field,
    region: &DirichletRegion,
    cost: &CostIntegrand,
    x: &dyn Fn(Vec2) -> Vec2,
) -> Result<f64> {
    check_region(u, region)?;
    let forces = configurational_forces(u, q, cost)?;
    let mut volume = 0.0;
    for (g, p) in forces.iter().zip(u.mesh().nodes()) {
        let xv = x(*p);
        if !xv.is_finite() {
            return Err(Error::NonFinite("vector field"));
        }
        volume += g.dot(xv);
    }
    let length = curvature_pairing(&discrete_curvature(region), x);
    Ok(volume - region.lambda() * length)
}

/// Magnitude of the one-sided boundary terms paired with `X`,
/// `∫_Σ (|flux⁺| + |flux⁻|) |X·ν|`: the natural scale against which the two
/// sides of [`verify_identity`] are compared.
pub fn identity_scale(
    u: &Field,
    q: &Field,
    cost: &CostIntegrand,
    x: &dyn Fn(Vec2) -> Vec2,
) -> Result<f64> {
    let jumps = jump_density(u, q, cost)?;
    Ok(jumps
        .samples
        .iter()
        .map(|s| {
            let side = |d: Option<SideDensity>| d.map_or(0.0, |d| d.flux.abs());
            (side(s.plus) + side(s.minus)) * x(s.midpoint).dot(s.normal).abs() * s.length
        })
        .sum())
}

/// Both sides of the identity
/// `∫ F_u u′ + F_z·∇u′ = −∫_Σ (flux⁺ − flux⁻) X·ν`.
///
/// Like [`boundary_shape_derivative`], the right-hand side has no endpoint
/// contribution: the identity holds for fields vanishing near the ends of
/// the chain.
pub fn verify_identity(
    u: &Field,
    u_lin: &Field,
    q: &Field,
    region: &DirichletRegion,
    cost: &CostIntegrand,
    x: &dyn Fn(Vec2) -> Vec2,
) -> Result<(f64, f64)> {
    check_pair(u, q)?;
    check_region(u, region)?;
    if !u.same_mesh(u_lin) {
        return Err(Error::MeshMismatch);
    }
    if u_lin.role() != FieldRole::Linearized {
        return Err(Error::InvalidInput("expected a linearized field".into()));
    }
    let mesh = u.mesh();
    let threads = crate::solver::threads_from_env();
    let parts = par_map(threads, mesh.n_triangles(), |t| {
        let g = &mesh.geoms()[t];
        let z = u.gradient(t);
        let dz = u_lin.gradient(t);
        let uq = at_quad_points(u.corner_values(t));
        let dq = at_quad_points(u_lin.corner_values(t));
        (0..3)
            .map(|k| {
                let x = g.quad_points[k];
                QUAD_WEIGHT
                    * g.area
                    * ((cost.d_u)(x, uq[k], z) * dq[k] + (cost.d_z)(x, uq[k], z).dot(dz))
            })
            .sum::<f64>()
    });
    let lhs: f64 = parts.iter().sum();
    let jumps = jump_density(u, q, cost)?;
    let rhs = -jumps
        .samples
        .iter()
        .map(|s| s.flux_jump * x(s.midpoint).dot(s.normal) * s.length)
        .sum::<f64>();
    Ok((lhs, rhs))
}

/// One sample of the curve optimality residual.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ResidualSample {
    pub edge: usize,
    pub arc: f64,
    pub midpoint: Vec2,
    /// `λ⟨H_Σ, ν⟩` as a density along Σ.
    pub curvature: f64,
    pub jump: f64,
    pub residual: f64,
    /// Whether the sample sits on an edge touching a chain endpoint.
    pub near_endpoint: bool,
}

/// Residual of the curvature/jump balance at a polyline vertex, tested
/// with the hat function of that vertex.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct VertexResidual {
    pub vertex: usize,
    pub location: Vec2,
    /// Vertex normal (average of the incident segment normals).
    pub normal: Vec2,
    /// `λ atom·ν̄ / w`, with `w` half the incident segment lengths.
    pub curvature: f64,
    /// `∫ hat·(g⁺ − g⁻) / w`.
    pub jump: f64,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CurveResidual {
    pub samples: Vec<ResidualSample>,
    pub vertices: Vec<VertexResidual>,
    /// Co-normal atoms at the chain endpoints, reported separately.
    pub endpoint_atoms: Vec<CurvatureAtom>,
    /// Sup norm over samples away from the chain endpoints.
    pub linf: f64,
    /// L² norm over Σ (all samples).
    pub l2: f64,
    pub curvature_linf: f64,
    pub jump_linf: f64,
    /// Sup norm over all samples, endpoint edges included.
    pub linf_all: f64,
}

/// Pointwise residual `R = λ⟨H_Σ, ν⟩ + (g⁺ − g⁻)` of the curve optimality
/// condition.
///
/// The curvature measure is turned into a density by spreading half of each
/// vertex atom uniformly over each incident segment. Samples are edge
/// midpoints; edges touching a chain endpoint are flagged and left out of
/// `linf`, since the pointwise condition concerns interior points of Σ and
/// the traces blow up at crack tips.
pub fn curve_residual(
    u: &Field,
    q: &Field,
    region: &DirichletRegion,
    cost: &CostIntegrand,
) -> Result<CurveResidual> {
    check_pair(u, q)?;
    check_region(u, region)?;
    if region.kind() != RegionKind::Polyline {
        return Err(Error::InvalidInput(
            "curve residual needs a polyline".into(),
        ));
    }
    let lambda = region.lambda();
    let atoms = discrete_curvature(region);
    let segs = region.segments();
    let seg_len: Vec<f64> = segs.iter().map(|(a, b)| a.distance(*b)).collect();
    let seg_normal: Vec<Vec2> = segs
        .iter()
        .map(|&(a, b)| (b - a).normalized().perp())
        .collect();
    let curvature_density: Vec<f64> = (0..segs.len())
        .map(|s| {
            lambda * 0.5 * (atoms[s].vector + atoms[s + 1].vector).dot(seg_normal[s]) / seg_len[s]
        })
        .collect();
    let jumps = jump_density(u, q, cost)?;
    let mesh = u.mesh();
    let edges = mesh.sigma_edges();
    let (first, last) = (
        edges.first().map(|e| e.nodes[0]),
        edges.last().map(|e| e.nodes[1]),
    );
    let samples: Vec<ResidualSample> = jumps
        .samples
        .iter()
        .map(|s| {
            let e: &SigmaEdge = &edges[s.edge];
            let curvature = curvature_density[e.segment];
            ResidualSample {
                edge: s.edge,
                arc: s.arc,
                midpoint: s.midpoint,
                curvature,
                jump: s.jump,
                residual: curvature + s.jump,
                near_endpoint: e
                    .nodes
                    .iter()
                    .any(|n| Some(*n) == first || Some(*n) == last),
            }
        })
        .collect();

    // hat-tested residual per vertex
    let n_vertices = region.vertices().len();
    let mut vertices = Vec::with_capacity(n_vertices);
    for i in 0..n_vertices {
        let mut weight = 0.0;
        let mut normal = Vec2::ZERO;
        for s in [i.wrapping_sub(1), i] {
            if s < segs.len() {
                weight += 0.5 * seg_len[s];
                normal += seg_normal[s];
            }
        }
        let normal = normal.normalized();
        let mut jump = 0.0;
        for s in &jumps.samples {
            let e = &edges[s.edge];
            let (a, b) = segs[e.segment];
            let t = segment_distance(s.midpoint, a, b).1;
            let hat = if e.segment == i {
                1.0 - t
            } else if e.segment + 1 == i {
                t
            } else {
                continue;
            };
            jump += hat * s.jump * s.normal.dot(normal) * s.length;
        }
        let curvature = lambda * atoms[i].vector.dot(normal) / weight;
        vertices.push(VertexResidual {
            vertex: i,
            location: region.vertices()[i],
            normal,
            curvature,
            jump: jump / weight,
            residual: curvature + jump / weight,
        });
    }

    let interior = || samples.iter().filter(|s| !s.near_endpoint);
    let sup = |it: &mut dyn Iterator<Item = f64>| it.fold(0.0f64, |m, v| m.max(v.abs()));
    let l2 = jumps
        .samples
        .iter()
        .zip(&samples)
        .map(|(j, s)| s.residual * s.residual * j.length)
        .sum::<f64>()
        .sqrt();
    Ok(CurveResidual {
        linf: sup(&mut interior().map(|s| s.residual)),
        curvature_linf: sup(&mut interior().map(|s| s.curvature)),
        jump_linf: sup(&mut interior().map(|s| s.jump)),
        linf_all: sup(&mut samples.iter().map(|s| s.residual)),
        l2,
        endpoint_atoms: atoms.iter().filter(|a| a.endpoint).copied().collect(),
        samples,
        vertices,
    })
}

/// How a finite-difference derivative perturbs the mesh.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FdMode {
    /// Move every node of one mesh by `±εX` (same topology on both sides).
    Morph,
    /// Move the region vertices by `±εX` and triangulate afresh.
    Remesh,
}

/// Central difference of the total cost along `id + εX`.
pub fn finite_difference_derivative(
    problem: &ShapeProblem,
    region: &DirichletRegion,
    x: &dyn Fn(Vec2) -> Vec2,
    eps: f64,
    mode: FdMode,
) -> Result<f64> {
    let cost_at = |s: f64| -> Result<f64> {
        match mode {
            FdMode::Morph => {
                let mesh = problem.mesh(region)?;
                let disp: Vec<Vec2> = mesh
                    .nodes()
                    .iter()
                    .zip(mesh.tags())
                    .map(|(p, tag)| {
                        if *tag == NodeTag::OuterBoundary {
                            Vec2::ZERO
                        } else {
                            x(*p) * s
                        }
                    })
                    .collect();
                let moved = Arc::new(mesh.morphed(&disp, None)?);
                Ok(problem.cost_on(moved)?.1.total)
            }
            FdMode::Remesh => {
                let moved = region
                    .with_vertices(region.vertices().iter().map(|p| *p + x(*p) * s).collect())?;
                Ok(problem.cost(&moved)?.total)
            }
        }
    };
    Ok((cost_at(eps)? - cost_at(-eps)?) / (2.0 * eps))
}

/// Result of the directional-constancy probe around a candidate point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PointProbe {
    pub center: Vec2,
    pub radii: Vec<f64>,
    pub directions: Vec<f64>,
    /// Raw exterior density `g⁺` per radius (rows) and direction.
    pub raw: Vec<Vec<f64>>,
    /// Raw samples divided by their angular mean, per radius.
    pub normalized: Vec<Vec<f64>>,
    /// Intercepts of the least-squares fit `E = E₀ + c r`, per direction.
    pub extrapolated: Vec<f64>,
    /// Standard deviation of `E₀` over its absolute mean.
    pub constancy_deviation: f64,
    /// Largest change of `E₀` when the smallest radius is dropped.
    pub drop_smallest_change: f64,
    /// Largest gap between `E₀` and the smallest-radius sample.
    pub last_increment: f64,
}

/// Settings of the point probe.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    /// Strictly decreasing radii, at least three.
    pub radii: Vec<f64>,
    /// Number of uniformly spaced directions, at least 16.
    pub directions: usize,
}

fn line_fit_intercept(r: &[f64], e: &[f64]) -> f64 {
    let n = r.len() as f64;
    let (mr, me) = (r.iter().sum::<f64>() / n, e.iter().sum::<f64>() / n);
    let sxx: f64 = r.iter().map(|v| (v - mr).powi(2)).sum();
    let sxy: f64 = r.iter().zip(e).map(|(a, b)| (a - mr) * (b - me)).sum();
    me - (sxy / sxx) * mr
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (
        m,
        (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n).sqrt(),
    )
}

/// Mesh of Ω minus the disk of radius `r` around `center`, with rings of
/// vertices grading the size from the circle out to `h`.
fn probe_mesh(problem: &ShapeProblem, center: Vec2, r: f64, directions: usize) -> Result<Mesh> {
    use std::f64::consts::TAU;
    // odd subdivision keeps an edge midpoint on every probe direction
    let mut k = 3;
    while TAU * r / (directions * k) as f64 > problem.h {
        k += 2;
    }
    let n = directions * k;
    let at = |radius: f64, phase: f64| -> Vec<Vec2> {
        (0..n)
            .map(|j| {
                let a = TAU * (j as f64 + phase) / n as f64;
                center + Vec2::new(a.cos(), a.sin()) * radius
            })
            .collect()
    };
    let ring0 = at(r, 0.5);
    let bound = problem.domain.distance_to_boundary(center);
    let mut rings = Vec::new();
    let mut radius = r;
    let mut i = 0;
    loop {
        let spacing = TAU * radius / n as f64;
        if spacing >= problem.h {
            break;
        }
        radius += spacing * 0.75f64.sqrt();
        i += 1;
        if radius > r + 0.5 * (bound - r) {
            break;
        }
        rings.extend(at(radius, 0.5 + 0.5 * (i % 2) as f64));
    }
    crate::mesh::MeshBuilder::new(&problem.domain, SigmaSet::Loop(ring0), problem.h)
        .steiner(rings)
        .floor_scale(TAU * r / n as f64)
        .refined()
        .build()
}

/// Directional constancy check at a candidate point `center`.
///
/// For every radius the disk `B_r(center)` is removed, state and adjoint
/// are solved on the rest of Ω, and the exterior density `g⁺` is sampled on
/// the circle in each direction. Since `g⁺` grows without bound as
/// `r → 0`, each angular profile is divided by its mean before the
/// linear extrapolation to `r = 0`.
pub fn point_residual(
    problem: &ShapeProblem,
    center: Vec2,
    config: &ProbeConfig,
) -> Result<PointProbe> {
    if problem.p <= 2.0 {
        return Err(Error::CapacityViolation {
            p: problem.p,
            bound: 2.0,
            dim: 0,
        });
    }
    if config.radii.len() < 3 {
        return Err(Error::InvalidInput(
            "the probe needs at least 3 radii".into(),
        ));
    }
    if config.directions < 16 {
        return Err(Error::InvalidInput(
            "the probe needs at least 16 directions".into(),
        ));
    }
    if config.radii.windows(2).any(|w| !(w[1] < w[0]))
        || !(config.radii[config.radii.len() - 1] > 0.0)
    {
        return Err(Error::InvalidInput(
            "probe radii must be positive and decreasing".into(),
        ));
    }
    if !problem.domain.contains_strictly(center) {
        return Err(Error::RegionOutsideDomain {
            x: center.x,
            y: center.y,
        });
    }
    let bound = problem.domain.distance_to_boundary(center) / 4.0;
    if config.radii[0] >= bound {
        return Err(Error::ProbeTooLarge {
            radius: config.radii[0],
            bound,
        });
    }
    let nd = config.directions;
    let directions: Vec<f64> = (0..nd)
        .map(|k| std::f64::consts::TAU * k as f64 / nd as f64)
        .collect();
    let mut raw = Vec::with_capacity(config.radii.len());
    for &r in &config.radii {
        let mesh = Arc::new(probe_mesh(problem, center, r, nd)?);
        let sol = problem.solve_on(mesh)?;
        let jumps = jump_density(&sol.u, &sol.q, &problem.cost)?;
        // length-weighted exterior density per loop segment
        let edges = sol.mesh().sigma_edges();
        let n_seg = edges.iter().map(|e| e.segment + 1).max().unwrap_or(0);
        let mut seg_sum = vec![0.0; n_seg];
        let mut seg_len = vec![0.0; n_seg];
        for s in &jumps.samples {
            let seg = edges[s.edge].segment;
            seg_sum[seg] += s.length * s.plus.map_or(0.0, |d| d.total);
            seg_len[seg] += s.length;
        }
        let per_dir = n_seg / nd;
        // segment j has its midpoint at angle 2π(j + 1)/N
        let mut row = vec![0.0; nd];
        for (k, value) in row.iter_mut().enumerate() {
            let centre = (k * per_dir + n_seg - 1) % n_seg;
            let mut sum = 0.0;
            for o in 0..per_dir {
                let j = (centre + n_seg + o - per_dir / 2) % n_seg;
                sum += seg_sum[j] / seg_len[j];
            }
            *value = sum / per_dir as f64;
        }
        raw.push(row);
    }
    let normalized: Vec<Vec<f64>> = raw
        .iter()
        .map(|row| {
            let (m, _) = mean_std(row);
            row.iter().map(|v| v / m).collect()
        })
        .collect();
    if normalized.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("probe densities"));
    }
    let fit = |rows: &[Vec<f64>], radii: &[f64]| -> Vec<f64> {
        (0..nd)
            .map(|k| {
                let e: Vec<f64> = rows.iter().map(|row| row[k]).collect();
                line_fit_intercept(radii, &e)
            })
            .collect()
    };
    let extrapolated = fit(&normalized, &config.radii);
    let m = config.radii.len();
    let dropped = if m >= 3 {
        fit(&normalized[..m - 1], &config.radii[..m - 1])
    } else {
        extrapolated.clone()
    };
    let (mean, std) = mean_std(&extrapolated);
    let max_gap = |a: &[f64], b: &[f64]| {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    };
    Ok(PointProbe {
        center,
        radii: config.radii.clone(),
        directions,
        drop_smallest_change: max_gap(&extrapolated, &dropped),
        last_increment: max_gap(&extrapolated, &normalized[m - 1]),
        constancy_deviation: std / mean.abs(),
        raw,
        normalized,
        extrapolated,
    })
}

/// Smooth radial cutoff `(1 − s²)²` on `s < 1`.
fn cutoff(s: f64) -> f64 {
    if s >= 1.0 {
        0.0
    } else {
        (1.0 - s * s).powi(2)
    }
}

/// Weight with which node `x` follows region vertex `i`.
///
/// Polylines: the hat function of vertex `i` evaluated at the closest
/// point of Σ, times a radial cutoff of width `rho` in the distance to Σ.
/// Points: a radial cutoff around the point.
pub(crate) fn vertex_weights(region: &DirichletRegion, x: Vec2, rho: f64) -> Vec<(usize, f64)> {
    let v = region.vertices();
    match region.kind() {
        RegionKind::PointSet => v
            .iter()
            .enumerate()
            .filter_map(|(i, p)| {
                let w = cutoff(p.distance(x) / rho);
                (w > 0.0).then_some((i, w))
            })
            .collect(),
        RegionKind::Polyline => {
            let mut best = (f64::INFINITY, 0, 0.0);
            for (s, w) in v.windows(2).enumerate() {
                let (d, t) = segment_distance(x, w[0], w[1]);
                if d < best.0 {
                    best = (d, s, t);
                }
            }
            let (d, s, t) = best;
            let c = cutoff(d / rho);
            if c == 0.0 {
                return Vec::new();
            }
            let mut out = Vec::with_capacity(2);
            if 1.0 - t > 0.0 {
                out.push((s, c * (1.0 - t)));
            }
            if t > 0.0 {
                out.push((s + 1, c * t));
            }
            out
        }
    }
}

/// Width of the extension of vertex motions into the bulk.
pub(crate) fn extension_width(mesh: &Mesh) -> f64 {
    3.0 * mesh.h()
}

/// Derivative of the penalized cost with respect to each region vertex.
///
/// Component `e` of entry `i` is the shape derivative along the field that
/// moves vertex `i` in direction `e`: the hat function of the vertex along
/// Σ, extended into the bulk by a radial cutoff. It is assembled from the
/// configurational forces and the curvature atoms, without further solves.
/// Point sets carry no length term (their cardinality is constant).
pub fn vertex_gradient(
    u: &Field,
    q: &Field,
    region: &DirichletRegion,
    cost: &CostIntegrand,
) -> Result<Vec<Vec2>> {
    check_pair(u, q)?;
    check_region(u, region)?;
    let mesh = u.mesh();
    let forces = configurational_forces(u, q, cost)?;
    let rho = extension_width(mesh);
    let mut grad = vec![Vec2::ZERO; region.vertices().len()];
    for (n, p) in mesh.nodes().iter().enumerate() {
        if forces[n] == Vec2::ZERO {
            continue;
        }
        for (i, w) in vertex_weights(region, *p, rho) {
            grad[i] += forces[n] * w;
        }
    }
    if region.kind() == RegionKind::Polyline {
        for (g, a) in grad.iter_mut().zip(discrete_curvature(region)) {
            *g -= a.vector * region.lambda();
        }
    }
    Ok(grad)
}

/// Total cost of a configuration and its measure term, for reports.
pub fn penalization(region: &DirichletRegion) -> f64 {
    region.lambda() * region_measure(region)
}

/// Adjoint derivative of the total cost along one field, next to its
/// re-meshed finite-difference counterpart.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DerivativeCheck {
    pub field: VectorField,
    pub analytic: f64,
    pub finite_difference: f64,
    pub eps: f64,
    pub relative_error: f64,
}

impl DerivativeCheck {
    pub fn new(field: VectorField, analytic: f64, finite_difference: f64, eps: f64) -> Self {
        let scale = analytic
            .abs()
            .max(finite_difference.abs())
            .max(f64::MIN_POSITIVE);
        Self {
            field,
            analytic,
            finite_difference,
            eps,
            relative_error: (analytic - finite_difference).abs() / scale,
        }
    }
}

/// Everything known about the optimality of one configuration.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShapeReport {
    pub region: DirichletRegion,
    pub cost: CostBreakdown,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub curve: Option<CurveResidual>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub point: Option<PointProbe>,
    pub derivatives: Vec<DerivativeCheck>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_is_smooth_and_compact() {
        let f = VectorField::Bump {
            center: Vec2::new(0.5, 0.5),
            radius: 0.2,
            direction: Vec2::new(0.0, 1.0),
        };
        assert_eq!(f.eval(Vec2::new(0.5, 0.5)), Vec2::new(0.0, 1.0));
        assert_eq!(f.eval(Vec2::new(0.71, 0.5)), Vec2::ZERO);
        assert!(f.eval(Vec2::new(0.69, 0.5)).y < 1e-3);
        let p = VectorField::Plateau {
            center: Vec2::ZERO,
            inner: 0.3,
            outer: 0.6,
            direction: Vec2::new(1.0, 0.0),
        };
        assert_eq!(p.eval(Vec2::new(0.2, 0.0)).x, 1.0);
        assert_eq!(p.eval(Vec2::new(0.6, 0.0)).x, 0.0);
        assert!((p.eval(Vec2::new(0.45, 0.0)).x - 0.5).abs() < 1e-12);
    }

    #[test]
    fn intercept_of_exact_line() {
        let r = [0.3, 0.2, 0.1];
        let e: Vec<f64> = r.iter().map(|v| 2.0 - 3.0 * v).collect();
        assert!((line_fit_intercept(&r, &e) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn polyline_weights_form_partition_on_sigma() {
        let r = DirichletRegion::polyline(
            vec![
                Vec2::new(0.2, 0.2),
                Vec2::new(0.5, 0.3),
                Vec2::new(0.8, 0.2),
            ],
            0.0,
        )
        .unwrap();
        let w = vertex_weights(&r, Vec2::new(0.35, 0.25), 0.1);
        let total: f64 = w.iter().map(|x| x.1).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(vertex_weights(&r, Vec2::new(0.5, 0.9), 0.1).is_empty());
    }
}
