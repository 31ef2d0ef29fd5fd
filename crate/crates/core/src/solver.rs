//! p-Laplace state, linearized and adjoint solves on a Σ-conforming mesh,
//! and one-sided normal traces on Σ.
//!
//! The degenerate operator is regularized through the energy density
//! `W(z) = (|z|² + ε²)^{p/2} / p`, so that `W'(z) = s^{(p-2)/2} z` and
//! `W''(z) = s^{(p-2)/2} I + (p-2) s^{(p-4)/2} z zᵀ` with `s = |z|² + ε²`.

use std::sync::Arc;
use std::sync::OnceLock;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fem::{at_quad_points, par_map, SparsePattern, SpdFactor, QUAD_BARY, QUAD_WEIGHT};
use crate::functional::{CostIntegrand, ScalarFn};
use crate::geometry::{RegionKind, Vec2};
use crate::mesh::{Mesh, SigmaSet};

/// Tuning of the nonlinear and linear solves.
#[derive(Clone, Debug, PartialEq, Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    /// Relative tolerance on the sup norm of the discrete residual.
    pub tol: f64,
    pub max_newton_iters: usize,
    /// Number of initial fixed-point (frozen coefficient) iterations.
    pub picard_iters: usize,
    /// Gradient regularization ε; `None` selects the scaled default.
    pub regularization: Option<f64>,
    pub armijo: f64,
    /// Worker threads for element loops.
    pub threads: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_newton_iters: 100,
            picard_iters: 3,
            regularization: None,
            armijo: 1e-4,
            threads: threads_from_env(),
        }
    }
}

/// Thread count from `SIGMA_SHAPE_THREADS`, default 1.
pub fn threads_from_env() -> usize {
    std::env::var("SIGMA_SHAPE_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or(1)
}

/// The state problem `-Δ_p u = f` in Ω∖Σ, `u = 0` on ∂Ω ∪ Σ.
#[derive(Clone)]
pub struct PdeProblem {
    mesh: Arc<Mesh>,
    p: f64,
    source: ScalarFn,
    /// Source values at the quadrature points of every triangle.
    f_quad: Vec<[f64; 3]>,
    eps: f64,
}

impl std::fmt::Debug for PdeProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PdeProblem")
            .field("p", &self.p)
            .field("eps", &self.eps)
            .field("nodes", &self.mesh.n_nodes())
            .finish()
    }
}

impl PdeProblem {
    /// Checks the capacity constraint `p > 2 - dim Σ` and samples the
    /// source. `regularization` overrides the default ε.
    pub fn new(
        mesh: Arc<Mesh>,
        p: f64,
        source: ScalarFn,
        regularization: Option<f64>,
    ) -> Result<Self> {
        if !(p > 1.0) || !p.is_finite() {
            return Err(Error::InvalidInput(format!(
                "exponent p must exceed 1, got {p}"
            )));
        }
        let dim = match mesh.sigma() {
            SigmaSet::Region(r) => r.dimension(),
            SigmaSet::Loop(_) => Some(1),
        };
        if let Some(dim) = dim {
            let bound = 2.0 - dim as f64;
            if p <= bound {
                return Err(Error::CapacityViolation { p, bound, dim });
            }
        }
        let f_quad: Vec<[f64; 3]> = mesh
            .geoms()
            .iter()
            .map(|g| g.quad_points.map(|x| source(x)))
            .collect();
        if f_quad.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("source term"));
        }
        let f_max = f_quad.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        let eps = match regularization {
            Some(e) if e >= 0.0 && e.is_finite() => e,
            Some(e) => {
                return Err(Error::InvalidInput(format!("invalid regularization {e}")));
            }
            None => default_regularization(p, f_max, mesh.domain().diameter()),
        };
        Ok(Self {
            mesh,
            p,
            source,
            f_quad,
            eps,
        })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn source(&self) -> &ScalarFn {
        &self.source
    }

    pub fn regularization(&self) -> f64 {
        self.eps
    }

    pub(crate) fn f_quad(&self) -> &[[f64; 3]] {
        &self.f_quad
    }

    /// Same problem with another regularization.
    pub fn with_regularization(&self, eps: f64) -> Self {
        Self {
            eps,
            ..self.clone()
        }
    }

    #[inline]
    pub(crate) fn energy_density(&self) -> Density {
        Density {
            p: self.p,
            eps2: self.eps * self.eps,
        }
    }
}

/// `ε = 1e-4 · (‖f‖∞ · diam Ω)^{1/(p-1)}`: a fixed fraction of the
/// natural gradient scale of the solution.
pub fn default_regularization(p: f64, f_max: f64, diameter: f64) -> f64 {
    let scale = (f_max * diameter).powf(1.0 / (p - 1.0));
    if scale > 0.0 && scale.is_finite() {
        1e-4 * scale
    } else {
        1e-4
    }
}

/// The regularized energy density and its derivatives.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Density {
    pub p: f64,
    pub eps2: f64,
}

impl Density {
    #[inline]
    fn s(&self, z: Vec2) -> f64 {
        z.norm_squared() + self.eps2
    }

    #[inline]
    pub fn value(&self, z: Vec2) -> f64 {
        self.s(z).powf(0.5 * self.p) / self.p
    }

    /// `W(z + d) - W(z)` without cancellation.
    #[inline]
    pub fn increment(&self, z: Vec2, d: Vec2) -> f64 {
        let s = self.s(z);
        let ds = 2.0 * z.dot(d) + d.norm_squared();
        s.powf(0.5 * self.p) * (0.5 * self.p * (ds / s).ln_1p()).exp_m1() / self.p
    }

    /// Coefficient `s^{(p-2)/2}` with `W'(z) = coef · z`.
    #[inline]
    pub fn coefficient(&self, z: Vec2) -> f64 {
        self.s(z).powf(0.5 * (self.p - 2.0))
    }

    #[inline]
    pub fn first(&self, z: Vec2) -> Vec2 {
        z * self.coefficient(z)
    }

    /// `W''(z)` as `(a, b)` with `W'' = a I + b z zᵀ`.
    #[inline]
    pub fn second(&self, z: Vec2) -> (f64, f64) {
        let s = self.s(z);
        let a = s.powf(0.5 * (self.p - 2.0));
        (a, (self.p - 2.0) * a / s)
    }

    #[inline]
    pub fn apply_second(&self, z: Vec2, v: Vec2) -> Vec2 {
        let (a, b) = self.second(z);
        v * a + z * (b * z.dot(v))
    }
}

/// Which equation a [`Field`] solves.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldRole {
    State,
    Linearized,
    Adjoint,
}

/// Convergence record of a solve.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SolveInfo {
    pub iterations: usize,
    /// Final sup norm of the residual, relative to the load.
    pub residual: f64,
    /// p-Dirichlet energy of the initial guess and of every accepted iterate
    /// whose decrease is representable (state solves).
    pub energies: Vec<f64>,
}

/// A P1 function on the mesh, one value per degree of freedom.
#[derive(Clone, Debug)]
pub struct Field {
    problem: Arc<PdeProblem>,
    role: FieldRole,
    values: Vec<f64>,
    info: SolveInfo,
}

impl Field {
    pub fn problem(&self) -> &Arc<PdeProblem> {
        &self.problem
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.problem.mesh
    }

    pub fn role(&self) -> FieldRole {
        self.role
    }

    /// Values per degree of freedom; the first `n_nodes` entries are the
    /// nodal values (region nodes carry the value of their first sector).
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn nodal_values(&self) -> &[f64] {
        &self.values[..self.mesh().n_nodes()]
    }

    pub fn info(&self) -> &SolveInfo {
        &self.info
    }

    /// Corner values on triangle `t`.
    #[inline]
    pub fn corner_values(&self, t: usize) -> [f64; 3] {
        self.mesh().corner_dofs()[t].map(|d| self.values[d])
    }

    /// Constant gradient on triangle `t`.
    #[inline]
    pub fn gradient(&self, t: usize) -> Vec2 {
        self.mesh().geoms()[t].gradient(self.corner_values(t))
    }

    pub fn same_mesh(&self, other: &Field) -> bool {
        Arc::ptr_eq(self.mesh(), other.mesh())
    }

    /// Builds a field from raw values (used by tests and exports).
    pub fn from_values(
        problem: Arc<PdeProblem>,
        role: FieldRole,
        values: Vec<f64>,
    ) -> Result<Self> {
        if values.len() != problem.mesh.n_dofs() {
            return Err(Error::InvalidInput(
                "field length does not match the mesh".into(),
            ));
        }
        Ok(Self {
            problem,
            role,
            values,
            info: SolveInfo::default(),
        })
    }

    /// Value at an arbitrary point by locating the containing triangle
    /// (linear search; for diagnostics).
    pub fn eval(&self, x: Vec2) -> Option<f64> {
        let mesh = self.mesh();
        for (t, tri) in mesh.triangles().iter().enumerate() {
            let [a, b, c] = tri.map(|i| mesh.nodes()[i]);
            let det = (b - a).cross(c - a);
            let l1 = (x - a).cross(c - a) / det;
            let l2 = (b - a).cross(x - a) / det;
            let l0 = 1.0 - l1 - l2;
            let tol = -1e-12;
            if l0 >= tol && l1 >= tol && l2 >= tol {
                let v = self.corner_values(t);
                return Some(l0 * v[0] + l1 * v[1] + l2 * v[2]);
            }
        }
        None
    }
}

/// Index of the unknowns: `Some(k)` for free degrees of freedom.
fn free_index(mesh: &Mesh) -> (Vec<Option<usize>>, usize) {
    let mut n = 0;
    let index = (0..mesh.n_dofs())
        .map(|d| {
            if mesh.is_dirichlet(d) {
                None
            } else {
                n += 1;
                Some(n - 1)
            }
        })
        .collect();
    (index, n)
}

struct Assembler<'a> {
    problem: &'a PdeProblem,
    index: Vec<Option<usize>>,
    n_free: usize,
    threads: usize,
    pattern: OnceLock<SparsePattern>,
}

impl<'a> Assembler<'a> {
    fn new(problem: &'a PdeProblem, threads: usize) -> Self {
        let (index, n_free) = free_index(&problem.mesh);
        Self {
            problem,
            index,
            n_free,
            threads,
            pattern: OnceLock::new(),
        }
    }

    /// Free-dof entries of the element matrices, triangle by triangle.
    fn entries(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(9 * self.mesh().n_triangles());
        for dofs in self.mesh().corner_dofs() {
            for i in 0..3 {
                let Some(r) = self.index[dofs[i]] else {
                    continue;
                };
                for j in 0..3 {
                    if let Some(c) = self.index[dofs[j]] {
                        out.push((r, c));
                    }
                }
            }
        }
        out
    }

    fn mesh(&self) -> &Mesh {
        &self.problem.mesh
    }

    fn gradients(&self, values: &[f64]) -> Vec<Vec2> {
        let mesh = self.mesh();
        par_map(self.threads, mesh.n_triangles(), |t| {
            mesh.geoms()[t].gradient(mesh.corner_dofs()[t].map(|d| values[d]))
        })
    }

    /// Scatters per-triangle corner contributions into a free-dof vector.
    fn scatter(&self, local: &[[f64; 3]]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_free];
        for (t, dofs) in self.mesh().corner_dofs().iter().enumerate() {
            for k in 0..3 {
                if let Some(i) = self.index[dofs[k]] {
                    out[i] += local[t][k];
                }
            }
        }
        out
    }

    /// `∫ f φ_a` on the free dofs.
    fn load(&self) -> Vec<f64> {
        let mesh = self.mesh();
        let local: Vec<[f64; 3]> = (0..mesh.n_triangles())
            .map(|t| {
                let w = QUAD_WEIGHT * mesh.geoms()[t].area;
                let fq = self.problem.f_quad[t];
                let mut r = [0.0; 3];
                for (q, l) in QUAD_BARY.iter().enumerate() {
                    for k in 0..3 {
                        r[k] += w * fq[q] * l[k];
                    }
                }
                r
            })
            .collect();
        self.scatter(&local)
    }

    /// `∫ W'(∇u)·∇φ_a` on the free dofs.
    fn flux(&self, grads: &[Vec2]) -> Vec<f64> {
        let mesh = self.mesh();
        let w = self.problem.energy_density();
        let local = par_map(self.threads, mesh.n_triangles(), |t| {
            let g = &mesh.geoms()[t];
            let flux = w.first(grads[t]) * g.area;
            [0, 1, 2].map(|k| flux.dot(g.grads[k]))
        });
        self.scatter(&local)
    }

    /// Stiffness matrix `∫ A_T ∇φ_a·∇φ_b` restricted to free dofs, with
    /// the element tensor `A_T = a I + b z zᵀ` supplied per triangle.
    fn matrix(&self, tensors: &[(f64, f64, Vec2)]) -> Result<SpdFactor> {
        let mesh = self.mesh();
        let locals = par_map(self.threads, mesh.n_triangles(), |t| {
            element_matrix(&mesh.geoms()[t], tensors[t])
        });
        let mut values = Vec::with_capacity(9 * mesh.n_triangles());
        for (t, dofs) in mesh.corner_dofs().iter().enumerate() {
            for i in 0..3 {
                if self.index[dofs[i]].is_none() {
                    continue;
                }
                for j in 0..3 {
                    if self.index[dofs[j]].is_some() {
                        values.push(locals[t][i][j]);
                    }
                }
            }
        }
        let pattern = match self.pattern.get() {
            Some(p) => p,
            None => {
                let p = SparsePattern::new(self.n_free, &self.entries())?;
                self.pattern.get_or_init(|| p)
            }
        };
        pattern.factor(&values)
    }

    fn expand(&self, free: &[f64], base: &[f64]) -> Vec<f64> {
        let mut out = base.to_vec();
        for (d, idx) in self.index.iter().enumerate() {
            if let Some(i) = idx {
                out[d] = free[*i];
            }
        }
        out
    }

    /// Discrete energy `Σ |T| W(∇u) - ∫ f u`.
    fn energy(&self, grads: &[Vec2], values: &[f64]) -> f64 {
        let mesh = self.mesh();
        let w = self.problem.energy_density();
        let mut e = 0.0;
        for t in 0..mesh.n_triangles() {
            let g = &mesh.geoms()[t];
            let uq = at_quad_points(mesh.corner_dofs()[t].map(|d| values[d]));
            let fq = self.problem.f_quad[t];
            e += g.area * w.value(grads[t]);
            e -= QUAD_WEIGHT * g.area * (0..3).map(|q| fq[q] * uq[q]).sum::<f64>();
        }
        e
    }

    /// `J(u + t d) - J(u)` evaluated per element without cancellation.
    fn energy_change(&self, grads: &[Vec2], dgrads: &[Vec2], dvalues: &[f64], t: f64) -> f64 {
        let mesh = self.mesh();
        let w = self.problem.energy_density();
        let parts = par_map(self.threads, mesh.n_triangles(), |k| {
            let g = &mesh.geoms()[k];
            let dq = at_quad_points(mesh.corner_dofs()[k].map(|d| dvalues[d]));
            let fq = self.problem.f_quad[k];
            g.area * w.increment(grads[k], dgrads[k] * t)
                - t * QUAD_WEIGHT * g.area * (0..3).map(|q| fq[q] * dq[q]).sum::<f64>()
        });
        parts.iter().sum()
    }
}

fn element_matrix(g: &crate::fem::TriGeom, (a, b, z): (f64, f64, Vec2)) -> [[f64; 3]; 3] {
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        let ai = g.grads[i] * a + z * (b * z.dot(g.grads[i]));
        for j in 0..3 {
            m[i][j] = g.area * ai.dot(g.grads[j]);
        }
    }
    m
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Solves the regularized state equation by damped Newton iteration with
/// Armijo backtracking on the energy, started from the p = 2 solution.
pub fn solve_state(problem: Arc<PdeProblem>, opts: &SolverOptions) -> Result<Field> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidInput("tolerance must be positive".into()));
    }
    let threads = opts.threads.max(1);
    let asm = Assembler::new(&problem, threads);
    let mesh = asm.mesh();
    let n_dofs = mesh.n_dofs();
    let b = asm.load();
    let b_norm = sup_norm(&b);
    let zero = vec![0.0; n_dofs];
    let mut info = SolveInfo::default();
    if b_norm == 0.0 || asm.n_free == 0 {
        let field = Field {
            problem: problem.clone(),
            role: FieldRole::State,
            values: zero,
            info,
        };
        return Ok(field);
    }

    let ones = vec![(1.0, 0.0, Vec2::ZERO); mesh.n_triangles()];
    let lap = asm.matrix(&ones)?;
    let mut values = asm.expand(&lap.solve(&b)?, &zero);
    // W' is the identity at p = 2 whatever ε is
    let linear = problem.p == 2.0;

    let w = problem.energy_density();
    let mut grads = asm.gradients(&values);
    let mut energy = asm.energy(&grads, &values);
    info.energies.push(energy);
    let residual_of = |grads: &[Vec2]| -> Vec<f64> {
        let flux = asm.flux(grads);
        flux.iter().zip(&b).map(|(f, l)| f - l).collect()
    };
    let mut r = residual_of(&grads);
    let mut rel = sup_norm(&r) / b_norm;
    if linear {
        info.residual = rel;
        return Ok(Field {
            problem: problem.clone(),
            role: FieldRole::State,
            values,
            info,
        });
    }

    let mut it = 0;
    while rel > opts.tol {
        if it >= opts.max_newton_iters {
            return Err(Error::NoConvergence {
                iterations: it,
                residual: rel,
            });
        }
        let picard = it < opts.picard_iters;
        let tensors: Vec<(f64, f64, Vec2)> = grads
            .iter()
            .map(|&z| {
                if picard {
                    (w.coefficient(z), 0.0, Vec2::ZERO)
                } else {
                    let (a, bb) = w.second(z);
                    (a, bb, z)
                }
            })
            .collect();
        let k = asm.matrix(&tensors)?;
        let neg_r: Vec<f64> = r.iter().map(|v| -v).collect();
        let d_free = k.solve(&neg_r)?;
        let slope: f64 = r.iter().zip(&d_free).map(|(a, b)| a * b).sum();
        if !(slope < 0.0) {
            // the direction cannot decrease the energy; only rounding is left
            break;
        }
        let d = asm.expand(&d_free, &zero);
        let dgrads = asm.gradients(&d);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let change = asm.energy_change(&grads, &dgrads, &d, t);
            if change <= opts.armijo * t * slope {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
        for (v, dv) in values.iter_mut().zip(&d) {
            *v += t * dv;
        }
        grads = asm.gradients(&values);
        r = residual_of(&grads);
        rel = sup_norm(&r) / b_norm;
        let next = asm.energy(&grads, &values);
        // near convergence the decrease can fall below the rounding of the total
        if next < energy {
            energy = next;
            info.energies.push(energy);
        }
        it += 1;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("state iterate"));
        }
    }
    if rel > opts.tol {
        // Accept a stalled iteration only at the level of rounding.
        if rel > opts.tol.max(1e-8) {
            return Err(Error::NoConvergence {
                iterations: it,
                residual: rel,
            });
        }
    }
    info.iterations = it;
    info.residual = rel;
    Ok(Field {
        problem,
        role: FieldRole::State,
        values,
        info,
    })
}

/// Element tensors of the linearized operator `G_u = W''(∇u)`.
fn linearized_tensors(u: &Field) -> Vec<(f64, f64, Vec2)> {
    let w = u.problem.energy_density();
    (0..u.mesh().n_triangles())
        .map(|t| {
            let z = u.gradient(t);
            let (a, b) = w.second(z);
            (a, b, z)
        })
        .collect()
}

fn require_state(u: &Field) -> Result<()> {
    if u.role != FieldRole::State {
        return Err(Error::InvalidInput("expected a state field".into()));
    }
    Ok(())
}

/// Solves `-div(G_u ∇u') = 0` with `u' = 0` on ∂Ω and `u' = -∇u·X` on
/// every sector of every region node, where `∇u` is the area-weighted
/// average of the gradients of the triangles in that sector.
pub fn solve_linearized(
    u: &Field,
    x: &dyn Fn(Vec2) -> Vec2,
    opts: &SolverOptions,
) -> Result<Field> {
    require_state(u)?;
    let problem = u.problem.clone();
    let asm = Assembler::new(&problem, opts.threads.max(1));
    let mesh = asm.mesh();
    let n_dofs = mesh.n_dofs();

    // sector-averaged gradients
    let mut grad_sum = vec![Vec2::ZERO; n_dofs];
    let mut area_sum = vec![0.0; n_dofs];
    for (t, dofs) in mesh.corner_dofs().iter().enumerate() {
        let g = u.gradient(t);
        let a = mesh.geoms()[t].area;
        for &d in dofs {
            grad_sum[d] += g * a;
            area_sum[d] += a;
        }
    }
    let mut data = vec![0.0; n_dofs];
    for d in 0..n_dofs {
        let node = mesh.dof_node(d);
        if mesh.tags()[node] == crate::mesh::NodeTag::Region && area_sum[d] > 0.0 {
            let xv = x(mesh.nodes()[node]);
            if !xv.is_finite() {
                return Err(Error::NonFinite("vector field"));
            }
            data[d] = -(grad_sum[d] / area_sum[d]).dot(xv);
        }
    }
    let tensors = linearized_tensors(u);
    let values = solve_with_lift(&asm, &tensors, &data, None)?;
    Ok(Field {
        problem,
        role: FieldRole::Linearized,
        values,
        info: SolveInfo::default(),
    })
}

/// Solves `A x = rhs` on free dofs with Dirichlet data `data` lifted to
/// the right-hand side.
fn solve_with_lift(
    asm: &Assembler<'_>,
    tensors: &[(f64, f64, Vec2)],
    data: &[f64],
    rhs: Option<&[f64]>,
) -> Result<Vec<f64>> {
    let mesh = asm.mesh();
    let factor = asm.matrix(tensors)?;
    let mut b = rhs.map_or_else(|| vec![0.0; asm.n_free], <[f64]>::to_vec);
    let lift = par_map(asm.threads, mesh.n_triangles(), |t| {
        let dofs = mesh.corner_dofs()[t];
        let dv = dofs.map(|d| if asm.index[d].is_none() { data[d] } else { 0.0 });
        if dv.iter().all(|v| *v == 0.0) {
            return [0.0; 3];
        }
        let m = element_matrix(&mesh.geoms()[t], tensors[t]);
        [0, 1, 2].map(|i| -(0..3).map(|j| m[i][j] * dv[j]).sum::<f64>())
    });
    for (bi, li) in b.iter_mut().zip(asm.scatter(&lift)) {
        *bi += li;
    }
    let x = factor.solve(&b)?;
    Ok(asm.expand(&x, data))
}

/// Solves the adjoint equation `-div(G_u ∇q) = F_u - div F_z` with
/// `q = 0` on ∂Ω ∪ Σ, in weak form
/// `∫ G_u ∇q·∇v = ∫ F_u v + F_z·∇v`.
pub fn solve_adjoint(u: &Field, cost: &CostIntegrand, opts: &SolverOptions) -> Result<Field> {
    require_state(u)?;
    let problem = u.problem.clone();
    let asm = Assembler::new(&problem, opts.threads.max(1));
    let mesh = asm.mesh();
    let local = par_map(asm.threads, mesh.n_triangles(), |t| {
        let g = &mesh.geoms()[t];
        let z = u.gradient(t);
        let uq = at_quad_points(u.corner_values(t));
        let mut r = [0.0; 3];
        for q in 0..3 {
            let x = g.quad_points[q];
            let fu = (cost.d_u)(x, uq[q], z);
            let fz = (cost.d_z)(x, uq[q], z);
            for k in 0..3 {
                r[k] += QUAD_WEIGHT * g.area * (fu * QUAD_BARY[q][k] + fz.dot(g.grads[k]));
            }
        }
        r
    });
    if local.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("adjoint right-hand side"));
    }
    let rhs = asm.scatter(&local);
    let zero = vec![0.0; mesh.n_dofs()];
    let values = if rhs.iter().all(|v| *v == 0.0) {
        zero
    } else {
        let tensors = linearized_tensors(u);
        solve_with_lift(&asm, &tensors, &zero, Some(&rhs))?
    };
    Ok(Field {
        problem,
        role: FieldRole::Adjoint,
        values,
        info: SolveInfo::default(),
    })
}

/// Discrete weak residual `max_a |∫ W'(∇u)·∇φ_a - ∫ f φ_a|` over free
/// basis functions, relative to the sup norm of the load.
pub fn state_residual(u: &Field) -> f64 {
    let asm = Assembler::new(&u.problem, 1);
    let grads = asm.gradients(&u.values);
    let b = asm.load();
    let r: Vec<f64> = asm
        .flux(&grads)
        .iter()
        .zip(&b)
        .map(|(f, l)| f - l)
        .collect();
    sup_norm(&r) / sup_norm(&b).max(f64::MIN_POSITIVE)
}

/// Regularized p-Dirichlet energy `∫ W(∇u) - ∫ f u` of a field.
pub fn dirichlet_energy(u: &Field) -> f64 {
    let asm = Assembler::new(&u.problem, 1);
    asm.energy(&asm.gradients(&u.values), &u.values)
}

/// One-sided normal derivatives of a field on every Σ edge.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceSample {
    pub edge: usize,
    /// Arc coordinate of the edge midpoint.
    pub arc: f64,
    pub length: f64,
    pub midpoint: Vec2,
    /// Unit normal, left of traversal.
    pub normal: Vec2,
    /// `∂/∂ν` from the right side of the traversal (the "+" side: ν is
    /// its outer normal); `None` when that side was removed.
    pub plus: Option<f64>,
    /// `∂/∂ν` from the left side (the "−" side).
    pub minus: Option<f64>,
}

impl TraceSample {
    /// Derivative along the direction pointing away from Σ into the "+"
    /// side (that is, along −ν).
    pub fn away_plus(&self) -> Option<f64> {
        self.plus.map(|v| -v)
    }

    /// Derivative along the direction pointing away from Σ into the "−"
    /// side (along ν).
    pub fn away_minus(&self) -> Option<f64> {
        self.minus
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceSet {
    pub samples: Vec<TraceSample>,
}

/// Normal traces computed from the constant gradient of the triangle on
/// each side of every Σ edge.
pub fn normal_traces(field: &Field, mesh: &Mesh) -> Result<TraceSet> {
    if !std::ptr::eq(field.mesh().as_ref(), mesh) {
        return Err(Error::MeshMismatch);
    }
    let mut samples = Vec::with_capacity(mesh.sigma_edges().len());
    for (i, e) in mesh.sigma_edges().iter().enumerate() {
        let [a, b] = e.nodes.map(|n| mesh.nodes()[n]);
        let two_sided =
            matches!(mesh.sigma(), SigmaSet::Region(r) if r.kind() == RegionKind::Polyline);
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
        samples.push(TraceSample {
            edge: i,
            arc: e.midpoint_arc(),
            length: e.length,
            midpoint: (a + b) * 0.5,
            normal: e.normal,
            plus: e.right.map(|t| field.gradient(t).dot(e.normal)),
            minus: e.left.map(|t| field.gradient(t).dot(e.normal)),
        });
    }
    Ok(TraceSet { samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functional::constant;
    use crate::geometry::{DirichletRegion, Polygon};
    use crate::mesh::triangulate;

    fn disk_problem(p: f64, h: f64) -> Arc<PdeProblem> {
        let mesh = triangulate(&Polygon::unit_disk(64), &DirichletRegion::empty(), h).unwrap();
        Arc::new(PdeProblem::new(Arc::new(mesh), p, constant(1.0), None).unwrap())
    }

    fn radial_error(u: &Field, exact: impl Fn(f64) -> f64) -> f64 {
        u.mesh()
            .nodes()
            .iter()
            .zip(u.nodal_values())
            .map(|(x, v)| (v - exact(x.norm())).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn disk_p2_matches_radial_solution() {
        let u = solve_state(disk_problem(2.0, 0.05), &SolverOptions::default()).unwrap();
        let err = radial_error(&u, |r| (1.0 - r * r) / 4.0);
        assert!(err <= 2e-2, "error {err}");
        assert!(u.nodal_values().iter().all(|v| *v >= -1e-10));
    }

    #[test]
    fn disk_p3_matches_radial_solution() {
        let exact = |r: f64| 0.5f64.sqrt() * (2.0 / 3.0) * (1.0 - r.powf(1.5));
        let coarse = solve_state(disk_problem(3.0, 0.1), &SolverOptions::default()).unwrap();
        let fine = solve_state(disk_problem(3.0, 0.05), &SolverOptions::default()).unwrap();
        let (ec, ef) = (radial_error(&coarse, exact), radial_error(&fine, exact));
        assert!(ef <= 5e-2 && ef < ec, "errors {ec} {ef}");
        let e = &fine.info().energies;
        assert!(e.windows(2).all(|w| w[1] <= w[0]), "{e:?}");
        assert!(state_residual(&fine) <= 1e-10);
    }

    #[test]
    fn compliance_adjoint_equals_state_at_p2() {
        let u = solve_state(disk_problem(2.0, 0.05), &SolverOptions::default()).unwrap();
        let cost = CostIntegrand::compliance(constant(1.0), 2.0);
        let q = solve_adjoint(&u, &cost, &SolverOptions::default()).unwrap();
        let diff = u
            .values()
            .iter()
            .zip(q.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(diff <= 1e-8, "{diff}");
    }

    #[test]
    fn points_need_p_above_two() {
        let mesh = triangulate(
            &Polygon::unit_disk(32),
            &DirichletRegion::points(vec![Vec2::ZERO], 0.0).unwrap(),
            0.2,
        )
        .unwrap();
        let err = PdeProblem::new(Arc::new(mesh), 2.0, constant(1.0), None).unwrap_err();
        assert!(matches!(err, Error::CapacityViolation { .. }));
    }

    #[test]
    fn zero_data_gives_zero_fields() {
        let u = solve_state(disk_problem(3.0, 0.1), &SolverOptions::default()).unwrap();
        let q = solve_adjoint(&u, &CostIntegrand::zero(), &SolverOptions::default()).unwrap();
        assert!(q.values().iter().all(|v| *v == 0.0));
        let up = solve_linearized(&u, &|_| Vec2::ZERO, &SolverOptions::default()).unwrap();
        assert!(up.values().iter().all(|v| *v == 0.0));
    }
}
