//! Cost integrands `F(x, u, ∇u)`, the penalized shape functional and the
//! average-distance comparison functional.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fem::{at_quad_points, par_map, TriGeom, QUAD_WEIGHT};
use crate::geometry::{region_measure, DirichletRegion, Polygon, Vec2};
use crate::solver::{Field, FieldRole};

/// Scalar function of position.
pub type ScalarFn = Arc<dyn Fn(Vec2) -> f64 + Send + Sync>;
/// `(x, u, z) ↦ F(x, u, z)`.
pub type IntegrandFn = Arc<dyn Fn(Vec2, f64, Vec2) -> f64 + Send + Sync>;
/// `(x, u, z) ↦ ∂F/∂z`.
pub type IntegrandGrad = Arc<dyn Fn(Vec2, f64, Vec2) -> Vec2 + Send + Sync>;

pub fn constant(c: f64) -> ScalarFn {
    Arc::new(move |_| c)
}

/// Envelope of the growth condition `F ≤ C (a(x) + |u|^p + |z|^p)`.
#[derive(Clone)]
pub struct Growth {
    pub envelope: ScalarFn,
    pub constant: f64,
}

/// The triple `(F, F_u, F_z)` together with its growth envelope.
#[derive(Clone)]
pub struct CostIntegrand {
    pub name: String,
    pub value: IntegrandFn,
    pub d_u: IntegrandFn,
    pub d_z: IntegrandGrad,
    /// `None` when no envelope is known (custom integrands).
    pub growth: Option<Growth>,
}

impl std::fmt::Debug for CostIntegrand {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CostIntegrand")
            .field("name", &self.name)
            .finish()
    }
}

impl CostIntegrand {
    /// `F = f u`.
    pub fn compliance(f: ScalarFn, p: f64) -> Self {
        let q = p / (p - 1.0);
        let (fv, fu, fa) = (f.clone(), f.clone(), f);
        Self {
            name: "compliance".into(),
            value: Arc::new(move |x, u, _| fv(x) * u),
            d_u: Arc::new(move |x, _, _| fu(x)),
            d_z: Arc::new(|_, _, _| Vec2::ZERO),
            // Young: f u ≤ |f|^{p'}/p' + |u|^p/p
            growth: Some(Growth {
                envelope: Arc::new(move |x| fa(x).abs().powf(q)),
                constant: 1.0,
            }),
        }
    }

    /// `F = |z|^p / p`.
    pub fn p_energy(p: f64) -> Self {
        Self {
            name: "p_energy".into(),
            value: Arc::new(move |_, _, z| z.norm().powf(p) / p),
            d_u: Arc::new(|_, _, _| 0.0),
            d_z: Arc::new(move |_, _, z| {
                let n = z.norm();
                if n == 0.0 {
                    Vec2::ZERO
                } else {
                    z * n.powf(p - 2.0)
                }
            }),
            growth: Some(Growth {
                envelope: constant(0.0),
                constant: 1.0,
            }),
        }
    }

    /// `F = (u - u_d)²`. The envelope `2 (u_d² + 1 + |u|^p)` is valid for
    /// `p ≥ 2`.
    pub fn tracking(u_d: ScalarFn) -> Self {
        let (a, b, c) = (u_d.clone(), u_d.clone(), u_d);
        Self {
            name: "tracking".into(),
            value: Arc::new(move |x, u, _| (u - a(x)).powi(2)),
            d_u: Arc::new(move |x, u, _| 2.0 * (u - b(x))),
            d_z: Arc::new(|_, _, _| Vec2::ZERO),
            growth: Some(Growth {
                envelope: Arc::new(move |x| c(x).powi(2) + 1.0),
                constant: 2.0,
            }),
        }
    }

    /// `F ≡ 0`.
    pub fn zero() -> Self {
        Self {
            name: "zero".into(),
            value: Arc::new(|_, _, _| 0.0),
            d_u: Arc::new(|_, _, _| 0.0),
            d_z: Arc::new(|_, _, _| Vec2::ZERO),
            growth: Some(Growth {
                envelope: constant(0.0),
                constant: 1.0,
            }),
        }
    }

    pub fn custom(
        name: impl Into<String>,
        value: IntegrandFn,
        d_u: IntegrandFn,
        d_z: IntegrandGrad,
    ) -> Self {
        Self {
            name: name.into(),
            value,
            d_u,
            d_z,
            growth: None,
        }
    }

    /// `α F₁ + β F₂`.
    pub fn combine(alpha: f64, a: &CostIntegrand, beta: f64, b: &CostIntegrand) -> Self {
        let (av, bv, au, bu, az, bz) = (
            a.value.clone(),
            b.value.clone(),
            a.d_u.clone(),
            b.d_u.clone(),
            a.d_z.clone(),
            b.d_z.clone(),
        );
        Self {
            name: format!("{alpha}*{}+{beta}*{}", a.name, b.name),
            value: Arc::new(move |x, u, z| alpha * av(x, u, z) + beta * bv(x, u, z)),
            d_u: Arc::new(move |x, u, z| alpha * au(x, u, z) + beta * bu(x, u, z)),
            d_z: Arc::new(move |x, u, z| az(x, u, z) * alpha + bz(x, u, z) * beta),
            growth: None,
        }
    }
}

/// A sampled triple at which a growth bound failed.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GrowthViolation {
    pub x: Vec2,
    pub u: f64,
    pub z: Vec2,
    pub value: f64,
    pub bound: f64,
}

/// Checks `F(x,u,z) ≤ C (a(x) + |u|^p + |z|^p)` on the given samples.
/// Integrands without an envelope pass vacuously.
pub fn check_growth(
    cost: &CostIntegrand,
    p: f64,
    samples: &[(Vec2, f64, Vec2)],
) -> std::result::Result<(), GrowthViolation> {
    let Some(growth) = &cost.growth else {
        return Ok(());
    };
    for &(x, u, z) in samples {
        let value = (cost.value)(x, u, z);
        let bound = growth.constant * ((growth.envelope)(x) + u.abs().powf(p) + z.norm().powf(p));
        if value > bound * (1.0 + 1e-12) {
            return Err(GrowthViolation {
                x,
                u,
                z,
                value,
                bound,
            });
        }
    }
    Ok(())
}

/// Largest relative mismatch between `(F_u, F_z)` and central differences
/// of `F`, measured as `|analytic - fd| / max(1, |analytic|)`.
pub fn check_consistency(cost: &CostIntegrand, samples: &[(Vec2, f64, Vec2)]) -> f64 {
    let mut worst: f64 = 0.0;
    let rel = |a: f64, fd: f64| (a - fd).abs() / a.abs().max(1.0);
    for &(x, u, z) in samples {
        let f = |u: f64, z: Vec2| (cost.value)(x, u, z);
        let hu = 1e-6 * u.abs().max(1.0);
        let fd_u = (f(u + hu, z) - f(u - hu, z)) / (2.0 * hu);
        worst = worst.max(rel((cost.d_u)(x, u, z), fd_u));
        let dz = (cost.d_z)(x, u, z);
        let hz = 1e-6 * z.norm().max(1.0);
        let ex = Vec2::new(hz, 0.0);
        let ey = Vec2::new(0.0, hz);
        let fd_x = (f(u, z + ex) - f(u, z - ex)) / (2.0 * hz);
        let fd_y = (f(u, z + ey) - f(u, z - ey)) / (2.0 * hz);
        worst = worst.max(rel(dz.x, fd_x)).max(rel(dz.y, fd_y));
    }
    worst
}

/// The shape functional split into its two parts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CostBreakdown {
    pub integral: f64,
    pub penalization: f64,
    pub total: f64,
}

impl CostBreakdown {
    pub fn new(integral: f64, penalization: f64) -> Self {
        Self {
            integral,
            penalization,
            total: integral + penalization,
        }
    }
}

/// `∫ F(x, u_h, ∇u_h)` by the 3-point rule on every triangle.
pub fn integral_term(u: &Field, cost: &CostIntegrand) -> Result<f64> {
    let mesh = u.mesh();
    let threads = crate::solver::threads_from_env();
    let parts = par_map(threads, mesh.n_triangles(), |t| {
        let g = &mesh.geoms()[t];
        let z = u.gradient(t);
        let uq = at_quad_points(u.corner_values(t));
        (0..3)
            .map(|q| QUAD_WEIGHT * g.area * (cost.value)(g.quad_points[q], uq[q], z))
            .sum::<f64>()
    });
    let total: f64 = parts.iter().sum();
    if !total.is_finite() {
        return Err(Error::NonFinite("cost integral"));
    }
    Ok(total)
}

/// `∫ F(x, u, ∇u) dx + λ · measure(Σ)`.
pub fn evaluate_cost(
    u: &Field,
    region: &DirichletRegion,
    cost: &CostIntegrand,
) -> Result<CostBreakdown> {
    if u.role() != FieldRole::State || !u.mesh().conforms_to(region) {
        return Err(Error::MeshMismatch);
    }
    let integral = integral_term(u, cost)?;
    Ok(CostBreakdown::new(
        integral,
        region.lambda() * region_measure(region),
    ))
}

/// Triangles covering a simple polygon: a fan from the centroid when the
/// polygon is star-shaped with respect to it, ear clipping otherwise.
fn cover_polygon(domain: &Polygon) -> Vec<[Vec2; 3]> {
    let v = domain.vertices();
    let n = v.len();
    let c = domain.centroid();
    let star = (0..n).all(|i| (v[i] - c).cross(v[(i + 1) % n] - c) > 0.0);
    if star {
        return (0..n).map(|i| [c, v[i], v[(i + 1) % n]]).collect();
    }
    let mut idx: Vec<usize> = (0..n).collect();
    let mut out = Vec::with_capacity(n - 2);
    while idx.len() > 3 {
        let m = idx.len();
        let ear = (0..m).find(|&k| {
            let (a, b, c) = (v[idx[(k + m - 1) % m]], v[idx[k]], v[idx[(k + 1) % m]]);
            if (b - a).cross(c - b) <= 0.0 {
                return false;
            }
            idx.iter().all(|&j| {
                let p = v[j];
                if p == a || p == b || p == c {
                    return true;
                }
                let inside = (b - a).cross(p - a) >= 0.0
                    && (c - b).cross(p - b) >= 0.0
                    && (a - c).cross(p - c) >= 0.0;
                !inside
            })
        });
        let k = ear.unwrap_or(0);
        out.push([v[idx[(k + m - 1) % m]], v[idx[k]], v[idx[(k + 1) % m]]]);
        idx.remove(k);
    }
    out.push([v[idx[0]], v[idx[1]], v[idx[2]]]);
    out
}

/// `∫_Ω dist(x, Σ ∪ ∂Ω) f(x) dx`, the large-p limit of the compliance
/// problem. Each covering triangle is split uniformly into `n²` pieces
/// with `n = ⌈longest edge / quad_h⌉`.
pub fn average_distance(
    region: &DirichletRegion,
    domain: &Polygon,
    f: &dyn Fn(Vec2) -> f64,
    quad_h: f64,
) -> Result<f64> {
    if !(quad_h > 0.0) {
        return Err(Error::InvalidInput(
            "quadrature size must be positive".into(),
        ));
    }
    region.validate_in(domain)?;
    let dist = |x: Vec2| domain.distance_to_boundary(x).min(region.distance_to(x));
    let mut total = 0.0;
    for [a, b, c] in cover_polygon(domain) {
        let longest = a.distance(b).max(b.distance(c)).max(c.distance(a));
        let n = ((longest / quad_h).ceil() as usize).max(1);
        let (e1, e2) = ((b - a) / n as f64, (c - a) / n as f64);
        let node = |i: usize, j: usize| a + e1 * i as f64 + e2 * j as f64;
        let mut add = |p: Vec2, q: Vec2, r: Vec2| {
            let g = TriGeom::new(p, q, r);
            for x in g.quad_points {
                total += QUAD_WEIGHT * g.area * f(x) * dist(x);
            }
        };
        for i in 0..n {
            for j in 0..(n - i) {
                add(node(i, j), node(i + 1, j), node(i, j + 1));
                if i + j + 1 < n {
                    add(node(i + 1, j), node(i + 1, j + 1), node(i, j + 1));
                }
            }
        }
    }
    if !total.is_finite() {
        return Err(Error::NonFinite("average distance"));
    }
    Ok(total)
}
