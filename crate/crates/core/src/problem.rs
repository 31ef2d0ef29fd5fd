//! A complete shape-optimization setup: domain, data, exponent, cost and
//! discretization parameters.

use std::sync::Arc;

use crate::error::Result;
use crate::functional::{integral_term, CostBreakdown, CostIntegrand, ScalarFn};
use crate::geometry::{region_measure, DirichletRegion, Polygon};
use crate::mesh::{triangulate, Mesh};
use crate::solver::{solve_adjoint, solve_state, Field, PdeProblem, SolverOptions};

#[derive(Clone)]
pub struct ShapeProblem {
    pub domain: Polygon,
    pub source: ScalarFn,
    pub p: f64,
    pub cost: CostIntegrand,
    /// Target mesh edge length.
    pub h: f64,
    pub solver: SolverOptions,
}

impl std::fmt::Debug for ShapeProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ShapeProblem")
            .field("domain", &self.domain)
            .field("p", &self.p)
            .field("cost", &self.cost)
            .field("h", &self.h)
            .finish()
    }
}

/// State, adjoint and cost of one configuration.
#[derive(Clone, Debug)]
pub struct Solution {
    pub u: Field,
    pub q: Field,
    pub cost: CostBreakdown,
}

impl Solution {
    pub fn mesh(&self) -> &Arc<Mesh> {
        self.u.mesh()
    }

    pub fn region(&self) -> &DirichletRegion {
        self.u
            .mesh()
            .region()
            .expect("solutions are built on region meshes")
    }
}

impl ShapeProblem {
    pub fn new(domain: Polygon, source: ScalarFn, p: f64, cost: CostIntegrand, h: f64) -> Self {
        Self {
            domain,
            source,
            p,
            cost,
            h,
            solver: SolverOptions::default(),
        }
    }

    pub fn mesh(&self, region: &DirichletRegion) -> Result<Arc<Mesh>> {
        Ok(Arc::new(triangulate(&self.domain, region, self.h)?))
    }

    pub fn state(&self, mesh: Arc<Mesh>) -> Result<Field> {
        let problem = PdeProblem::new(
            mesh,
            self.p,
            self.source.clone(),
            self.solver.regularization,
        )?;
        solve_state(Arc::new(problem), &self.solver)
    }

    /// Cost of the discrete state on `mesh`, penalizing the measure of the
    /// region stored in the mesh.
    pub fn cost_on(&self, mesh: Arc<Mesh>) -> Result<(Field, CostBreakdown)> {
        let region = mesh
            .region()
            .cloned()
            .unwrap_or_else(DirichletRegion::empty);
        let u = self.state(mesh)?;
        let integral = integral_term(&u, &self.cost)?;
        let cost = CostBreakdown::new(integral, region.lambda() * region_measure(&region));
        Ok((u, cost))
    }

    pub fn cost(&self, region: &DirichletRegion) -> Result<CostBreakdown> {
        Ok(self.cost_on(self.mesh(region)?)?.1)
    }

    /// State and adjoint on a given mesh.
    pub fn solve_on(&self, mesh: Arc<Mesh>) -> Result<Solution> {
        let (u, cost) = self.cost_on(mesh)?;
        let q = solve_adjoint(&u, &self.cost, &self.solver)?;
        Ok(Solution { u, q, cost })
    }

    pub fn solve(&self, region: &DirichletRegion) -> Result<Solution> {
        self.solve_on(self.mesh(region)?)
    }
}
