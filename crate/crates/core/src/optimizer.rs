//! Gradient descent of the penalized functional over the vertices of the
//! Dirichlet region, with Armijo backtracking and geometric safeguards.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functional::CostBreakdown;
use crate::geometry::{DirichletRegion, RegionKind, Vec2};
use crate::mesh::{Mesh, NodeTag};
use crate::problem::ShapeProblem;
use crate::shape::{extension_width, vertex_gradient, vertex_weights};
use crate::solver::{solve_adjoint, Field};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DescentConfig {
    pub max_iters: usize,
    /// Largest vertex displacement of the first trial step.
    pub step0: f64,
    /// Armijo constant `c`: a step `α` is accepted when the cost drops by
    /// at least `c α |g|²`.
    pub armijo: f64,
    pub shrink: f64,
    /// Line search gives up when the largest vertex displacement of the
    /// trial step falls below this length.
    pub min_step: f64,
    /// A fresh triangulation every `remesh_every` iterations; in between,
    /// the previous mesh is moved along with the vertices.
    pub remesh_every: usize,
    pub min_vertex_separation: f64,
    /// Relative cost decrease (and gradient norm relative to the initial
    /// one) below which the descent counts as converged.
    pub stall_tol: f64,
}

impl Default for DescentConfig {
    fn default() -> Self {
        Self {
            max_iters: 40,
            step0: 0.05,
            armijo: 1e-4,
            shrink: 0.5,
            min_step: 1e-5,
            remesh_every: 1,
            min_vertex_separation: 1e-3,
            stall_tol: 1e-5,
        }
    }
}

impl DescentConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.step0,
            self.armijo,
            self.shrink,
            self.min_step,
            self.min_vertex_separation,
            self.stall_tol,
        ]
        .iter()
        .all(|v| *v > 0.0 && v.is_finite());
        if !positive || self.remesh_every == 0 || self.armijo >= 1.0 || self.shrink >= 1.0 {
            return Err(Error::InvalidInput(format!(
                "invalid descent settings {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    Stalled,
    MaxIters,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Iterate {
    pub iter: usize,
    pub region: DirichletRegion,
    pub cost: CostBreakdown,
    pub grad_norm: f64,
    /// Largest vertex displacement of the step that led here.
    pub step: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Trajectory {
    pub iterates: Vec<Iterate>,
    pub termination: Termination,
}

impl Trajectory {
    pub fn last(&self) -> &Iterate {
        self.iterates
            .last()
            .expect("a trajectory has at least one iterate")
    }
}

struct State {
    region: DirichletRegion,
    mesh: Arc<Mesh>,
    u: Field,
    cost: CostBreakdown,
}

fn norm(g: &[Vec2]) -> f64 {
    g.iter().map(|v| v.norm_squared()).sum::<f64>().sqrt()
}

fn sup(g: &[Vec2]) -> f64 {
    g.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

/// Merges polyline vertices closer than `sep`, shortest edge first; a
/// chain endpoint absorbs its neighbour, otherwise the pair collapses to
/// its midpoint. Point sets are left alone and fail validation instead.
fn merge_close(vertices: Vec<Vec2>, kind: RegionKind, sep: f64) -> Vec<Vec2> {
    if kind != RegionKind::Polyline {
        return vertices;
    }
    let mut v = vertices;
    loop {
        let shortest = v
            .windows(2)
            .enumerate()
            .map(|(i, w)| (w[0].distance(w[1]), i))
            .filter(|(d, _)| *d < sep)
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let Some((_, i)) = shortest else {
            return v;
        };
        if v.len() <= 2 {
            return v;
        }
        let last = v.len() - 1;
        let merged = if i == 0 {
            v[0]
        } else if i + 1 == last {
            v[last]
        } else {
            (v[i] + v[i + 1]) * 0.5
        };
        v[i] = merged;
        v.remove(i + 1);
    }
}

fn separated(region: &DirichletRegion, sep: f64) -> bool {
    let v = region.vertices();
    match region.kind() {
        RegionKind::Polyline => v.windows(2).all(|w| w[0].distance(w[1]) >= sep),
        RegionKind::PointSet => v
            .iter()
            .enumerate()
            .all(|(i, p)| v[i + 1..].iter().all(|q| q.distance(*p) >= sep)),
    }
}

impl ShapeProblem {
    fn evaluate(&self, region: DirichletRegion, mesh: Arc<Mesh>) -> Result<State> {
        let (u, cost) = self.cost_on(mesh.clone())?;
        Ok(State {
            region,
            mesh,
            u,
            cost,
        })
    }

    fn gradient(&self, state: &State) -> Result<Vec<Vec2>> {
        let q = solve_adjoint(&state.u, &self.cost, &self.solver)?;
        vertex_gradient(&state.u, &q, &state.region, &self.cost)
    }

    /// The current mesh carried along with a vertex displacement, through
    /// the same hat-and-cutoff extension the gradient is built from.
    fn moved_mesh(&self, state: &State, target: &DirichletRegion) -> Result<Mesh> {
        let old = state.region.vertices();
        let new = target.vertices();
        if old.len() != new.len() {
            return Err(Error::GeometryBreakdown("vertex count changed".into()));
        }
        let rho = extension_width(&state.mesh);
        let disp: Vec<Vec2> = state
            .mesh
            .nodes()
            .iter()
            .zip(state.mesh.tags())
            .map(|(p, tag)| {
                if *tag == NodeTag::OuterBoundary {
                    return Vec2::ZERO;
                }
                vertex_weights(&state.region, *p, rho)
                    .into_iter()
                    .map(|(i, w)| (new[i] - old[i]) * w)
                    .fold(Vec2::ZERO, |a, b| a + b)
            })
            .collect();
        state.mesh.morphed(&disp, Some(target.clone()))
    }

    fn trial(
        &self,
        state: &State,
        grad: &[Vec2],
        alpha: f64,
        remesh: bool,
        config: &DescentConfig,
    ) -> Result<State> {
        let moved: Vec<Vec2> = state
            .region
            .vertices()
            .iter()
            .zip(grad)
            .map(|(v, g)| *v - *g * alpha)
            .collect();
        let kind = state.region.kind();
        let vertices = merge_close(moved, kind, config.min_vertex_separation);
        let region = state
            .region
            .with_vertices(vertices)
            .map_err(|e| Error::GeometryBreakdown(e.to_string()))?;
        region
            .validate_in(&self.domain)
            .map_err(|e| Error::GeometryBreakdown(e.to_string()))?;
        if !separated(&region, config.min_vertex_separation) {
            return Err(Error::GeometryBreakdown("vertices too close".into()));
        }
        let mesh = if remesh {
            self.mesh(&region)?
        } else {
            match self.moved_mesh(state, &region) {
                Ok(m) => Arc::new(m),
                Err(_) => self.mesh(&region)?,
            }
        };
        self.evaluate(region, mesh)
    }
}

/// Steepest descent of the penalized cost over the region vertices.
///
/// Every iteration solves state and adjoint, forms the vertex gradient
/// `g`, and backtracks on `α` (starting from a largest vertex move of
/// at most `step0`) until `cost(v − αg) ≤ cost(v) − c α |g|²`. Trial
/// configurations are validated (inside Ω, simple, vertices separated)
/// and re-solved; invalid or unsolvable trials count as rejections.
pub fn descend(
    problem: &ShapeProblem,
    region0: &DirichletRegion,
    config: &DescentConfig,
) -> Result<Trajectory> {
    config.validate()?;
    region0.validate_in(&problem.domain)?;
    let mut state = problem.evaluate(region0.clone(), problem.mesh(region0)?)?;
    let mut grad = problem.gradient(&state)?;
    let g0 = norm(&grad);
    let mut iterates = vec![Iterate {
        iter: 0,
        region: region0.clone(),
        cost: state.cost,
        grad_norm: g0,
        step: 0.0,
    }];
    let mut length = config.step0;
    for k in 1..=config.max_iters {
        let g_sup = sup(&grad);
        let g2 = norm(&grad).powi(2);
        if g_sup == 0.0 {
            return Ok(Trajectory {
                iterates,
                termination: Termination::Converged,
            });
        }
        let remesh = k % config.remesh_every == 0;
        let mut accepted = None;
        while length >= config.min_step {
            let alpha = length / g_sup;
            if let Ok(next) = problem.trial(&state, &grad, alpha, remesh, config) {
                if next.cost.total <= state.cost.total - config.armijo * alpha * g2 {
                    accepted = Some(next);
                    break;
                }
            }
            length *= config.shrink;
        }
        let Some(next) = accepted else {
            return Ok(Trajectory {
                iterates,
                termination: Termination::Stalled,
            });
        };
        let decrease =
            (state.cost.total - next.cost.total) / state.cost.total.abs().max(f64::MIN_POSITIVE);
        state = next;
        grad = problem.gradient(&state)?;
        let grad_norm = norm(&grad);
        iterates.push(Iterate {
            iter: k,
            region: state.region.clone(),
            cost: state.cost,
            grad_norm,
            step: length,
        });
        if decrease <= config.stall_tol && grad_norm <= config.stall_tol.sqrt() * g0 {
            return Ok(Trajectory {
                iterates,
                termination: Termination::Converged,
            });
        }
        length = (2.0 * length).min(config.step0);
    }
    Ok(Trajectory {
        iterates,
        termination: Termination::MaxIters,
    })
}
