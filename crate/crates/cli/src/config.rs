//! Run configuration: strict JSON, every key checked before any solve.

use std::sync::Arc;

use serde::Deserialize;
use sigma_shape_core::functional::{IntegrandFn, IntegrandGrad};
use sigma_shape_core::{
    CostIntegrand, DescentConfig, DirichletRegion, Polygon, ProbeConfig, RegionKind, ScalarFn,
    ShapeProblem, SolverOptions, Vec2, VectorField,
};

use crate::error::CliError;
use crate::expr::{parse, Env, Expr, Var};

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainSpec {
    /// Regular polygon approximating a disk.
    Disk {
        #[serde(default)]
        center: Vec2,
        #[serde(default = "one")]
        radius: f64,
        #[serde(default = "sixty_four")]
        sides: usize,
    },
    Rectangle {
        min: Vec2,
        max: Vec2,
    },
    UnitSquare,
    Polygon {
        vertices: Vec<Vec2>,
    },
}

fn one() -> f64 {
    1.0
}

fn sixty_four() -> usize {
    64
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionSpec {
    pub kind: RegionKind,
    pub vertices: Vec<Vec2>,
}

/// A built-in integrand name, tracking of a target, or a custom triple.
/// Missing derivatives of a custom integrand are derived symbolically.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum CostSpec {
    Builtin(String),
    Tracking(TrackingSpec),
    Custom(CustomSpec),
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackingSpec {
    pub tracking: String,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomSpec {
    pub integrand: String,
    #[serde(default)]
    pub d_u: Option<String>,
    #[serde(default)]
    pub d_z: Option<[String; 2]>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default)]
    pub max_newton_iters: Option<usize>,
    #[serde(default)]
    pub regularization: Option<f64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSpec {
    #[serde(default)]
    pub center: Option<Vec2>,
    pub radii: Vec<f64>,
    #[serde(default = "sixteen")]
    pub directions: usize,
}

fn sixteen() -> usize {
    16
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DerivativeSpec {
    pub fields: Vec<VectorField>,
    #[serde(default = "default_eps")]
    pub eps: f64,
}

fn default_eps() -> f64 {
    1e-3
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub domain: DomainSpec,
    #[serde(default)]
    pub region: Option<RegionSpec>,
    pub p: f64,
    #[serde(default = "default_source")]
    pub f: String,
    #[serde(default = "default_cost")]
    pub cost: CostSpec,
    #[serde(default)]
    pub lambda: f64,
    pub h: f64,
    #[serde(default)]
    pub solver: Option<SolverSpec>,
    #[serde(default)]
    pub descent: Option<DescentConfig>,
    #[serde(default)]
    pub probe: Option<ProbeSpec>,
    #[serde(default)]
    pub derivative: Option<DerivativeSpec>,
    /// Largest random displacement of the initial region vertices when a
    /// seed is given; defaults to `h/4`.
    #[serde(default)]
    pub jitter: Option<f64>,
}

fn default_source() -> String {
    "1".into()
}

fn default_cost() -> CostSpec {
    CostSpec::Builtin("compliance".into())
}

/// A validated configuration turned into core inputs.
pub struct Setup {
    pub problem: ShapeProblem,
    pub region: DirichletRegion,
    pub config: RunConfig,
}

fn invalid(at: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Validation(format!("{at}: {msg}"))
}

fn expression(at: &str, src: &str) -> Result<Arc<Expr>, CliError> {
    parse(src).map(Arc::new).map_err(|e| invalid(at, e))
}

fn env(x: Vec2, u: f64, z: Vec2) -> Env {
    Env {
        x: x.x,
        y: x.y,
        u,
        zx: z.x,
        zy: z.y,
    }
}

/// Evaluation errors surface as NaN, which the solvers reject.
fn integrand(e: Arc<Expr>) -> IntegrandFn {
    Arc::new(move |x, u, z| e.eval(&env(x, u, z)).unwrap_or(f64::NAN))
}

fn scalar(at: &str, src: &str) -> Result<ScalarFn, CliError> {
    let e = expression(at, src)?;
    for v in [Var::U, Var::Zx, Var::Zy] {
        if e.depends_on(v) {
            return Err(invalid(at, "may only depend on x and y"));
        }
    }
    Ok(Arc::new(move |x| {
        e.eval(&env(x, 0.0, Vec2::ZERO)).unwrap_or(f64::NAN)
    }))
}

fn derived(at: &str, e: &Expr, given: Option<&String>, var: Var) -> Result<Arc<Expr>, CliError> {
    match given {
        Some(src) => expression(at, src),
        None => e
            .derivative(var)
            .map(Arc::new)
            .map_err(|err| invalid(at, err)),
    }
}

impl CostSpec {
    fn build(&self, f: &ScalarFn, p: f64) -> Result<CostIntegrand, CliError> {
        match self {
            CostSpec::Builtin(name) => match name.as_str() {
                "compliance" => Ok(CostIntegrand::compliance(f.clone(), p)),
                "p_energy" => Ok(CostIntegrand::p_energy(p)),
                "zero" => Ok(CostIntegrand::zero()),
                other => Err(invalid(
                    "cost",
                    format!(
                        "unknown built-in `{other}` (compliance, p_energy, zero, or an object)"
                    ),
                )),
            },
            CostSpec::Tracking(t) => Ok(CostIntegrand::tracking(scalar(
                "cost.tracking",
                &t.tracking,
            )?)),
            CostSpec::Custom(c) => {
                let e = expression("cost.integrand", &c.integrand)?;
                let d_u = derived("cost.d_u", &e, c.d_u.as_ref(), Var::U)?;
                let (gx, gy) = match &c.d_z {
                    Some([a, b]) => (expression("cost.d_z[0]", a)?, expression("cost.d_z[1]", b)?),
                    None => (
                        derived("cost.d_z", &e, None, Var::Zx)?,
                        derived("cost.d_z", &e, None, Var::Zy)?,
                    ),
                };
                let d_z: IntegrandGrad = Arc::new(move |x, u, z| {
                    let en = env(x, u, z);
                    Vec2::new(
                        gx.eval(&en).unwrap_or(f64::NAN),
                        gy.eval(&en).unwrap_or(f64::NAN),
                    )
                });
                Ok(CostIntegrand::custom(
                    c.integrand.clone(),
                    integrand(e),
                    integrand(d_u),
                    d_z,
                ))
            }
        }
    }
}

impl DomainSpec {
    fn build(&self) -> Result<Polygon, CliError> {
        let at = "domain";
        match self {
            DomainSpec::Disk {
                center,
                radius,
                sides,
            } => Polygon::regular(*center, *radius, *sides).map_err(|e| invalid(at, e)),
            DomainSpec::Rectangle { min, max } => {
                if !(max.x > min.x && max.y > min.y) {
                    return Err(invalid(at, "rectangle needs min < max"));
                }
                Polygon::new(vec![
                    *min,
                    Vec2::new(max.x, min.y),
                    *max,
                    Vec2::new(min.x, max.y),
                ])
                .map_err(|e| invalid(at, e))
            }
            DomainSpec::UnitSquare => Ok(Polygon::unit_square()),
            DomainSpec::Polygon { vertices } => {
                Polygon::new(vertices.clone()).map_err(|e| invalid(at, e))
            }
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| invalid("config", e))
    }

    /// Builds and validates every module input. `h` overrides the mesh
    /// size of the file.
    pub fn setup(mut self, h: Option<f64>) -> Result<Setup, CliError> {
        if let Some(h) = h {
            self.h = h;
        }
        if !(self.h > 0.0) || !self.h.is_finite() {
            return Err(invalid("h", "mesh size must be positive"));
        }
        if !(self.p > 1.0) || !self.p.is_finite() {
            return Err(invalid("p", "exponent must exceed 1"));
        }
        let domain = self.domain.build()?;
        let region = match &self.region {
            Some(r) => DirichletRegion::new(r.kind, r.vertices.clone(), self.lambda),
            None => DirichletRegion::new(RegionKind::PointSet, Vec::new(), self.lambda),
        }
        .map_err(|e| invalid("region", e))?;
        region
            .validate_in(&domain)
            .map_err(|e| invalid("region", e))?;
        let f = scalar("f", &self.f)?;
        let cost = self.cost.build(&f, self.p)?;
        let mut problem = ShapeProblem::new(domain, f, self.p, cost, self.h);
        if let Some(s) = &self.solver {
            let mut opts = SolverOptions::default();
            if let Some(t) = s.tol {
                opts.tol = t;
            }
            if let Some(m) = s.max_newton_iters {
                opts.max_newton_iters = m;
            }
            opts.regularization = s.regularization;
            if !(opts.tol > 0.0) {
                return Err(invalid("solver.tol", "must be positive"));
            }
            problem.solver = opts;
        }
        if let Some(d) = &self.descent {
            d.validate().map_err(|e| invalid("descent", e))?;
        }
        if let Some(p) = &self.probe {
            if p.radii.len() < 3
                || p.radii.windows(2).any(|w| !(w[1] < w[0]))
                || p.radii.iter().any(|r| !(*r > 0.0))
            {
                return Err(invalid(
                    "probe.radii",
                    "need at least three strictly decreasing positive radii",
                ));
            }
            if p.directions < 16 {
                return Err(invalid("probe.directions", "need at least 16 directions"));
            }
        }
        if let Some(d) = &self.derivative {
            if !(d.eps > 0.0) {
                return Err(invalid("derivative.eps", "must be positive"));
            }
            for (i, x) in d.fields.iter().enumerate() {
                x.validate()
                    .map_err(|e| invalid(&format!("derivative.fields[{i}]"), e))?;
            }
        }
        if let Some(j) = self.jitter {
            if !(j >= 0.0) || !j.is_finite() {
                return Err(invalid("jitter", "must be nonnegative"));
            }
        }
        Ok(Setup {
            problem,
            region,
            config: self,
        })
    }
}

impl ProbeSpec {
    pub fn probe_config(&self) -> ProbeConfig {
        ProbeConfig {
            radii: self.radii.clone(),
            directions: self.directions,
        }
    }
}
