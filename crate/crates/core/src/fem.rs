//! P1 finite-element plumbing: element geometry, quadrature, sparse
//! assembly and the symmetric positive-definite solve.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, SymbolicLlt};
use faer::sparse::{Argsort, Pair, SparseColMat, SymbolicSparseColMat};
use faer::{Mat, Side};

use crate::error::{Error, Result};
use crate::geometry::Vec2;

/// Barycentric coordinates of the 3-point order-2 rule; the weight of
/// every point is one third of the triangle area.
pub const QUAD_BARY: [[f64; 3]; 3] = [
    [2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0],
    [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0],
    [1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0],
];

pub const QUAD_WEIGHT: f64 = 1.0 / 3.0;

/// Geometry of one P1 triangle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TriGeom {
    pub area: f64,
    /// Gradients of the three barycentric coordinates.
    pub grads: [Vec2; 3],
    pub quad_points: [Vec2; 3],
}

impl TriGeom {
    pub fn new(a: Vec2, b: Vec2, c: Vec2) -> Self {
        let twice = (b - a).cross(c - a);
        let inv = 1.0 / twice;
        let grads = [
            Vec2::new(b.y - c.y, c.x - b.x) * inv,
            Vec2::new(c.y - a.y, a.x - c.x) * inv,
            Vec2::new(a.y - b.y, b.x - a.x) * inv,
        ];
        let quad_points = QUAD_BARY.map(|l| a * l[0] + b * l[1] + c * l[2]);
        Self {
            area: 0.5 * twice,
            grads,
            quad_points,
        }
    }

    /// Gradient of the linear interpolant of corner values.
    #[inline]
    pub fn gradient(&self, v: [f64; 3]) -> Vec2 {
        self.grads[0] * v[0] + self.grads[1] * v[1] + self.grads[2] * v[2]
    }

    /// Divergence of the linear interpolant of corner vectors.
    #[inline]
    pub fn divergence(&self, v: [Vec2; 3]) -> f64 {
        (0..3).map(|k| self.grads[k].dot(v[k])).sum()
    }
}

/// Values of the linear interpolant of corner values at the quadrature
/// points.
#[inline]
pub fn at_quad_points(v: [f64; 3]) -> [f64; 3] {
    QUAD_BARY.map(|l| l[0] * v[0] + l[1] * v[1] + l[2] * v[2])
}

/// Maps `f` over `0..n`, in parallel on a dedicated pool when
/// `threads > 1`. Results are always returned in index order, so any
/// reduction done by the caller is deterministic.
pub fn par_map<T, F>(threads: usize, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    if threads <= 1 || n < 256 {
        return (0..n).map(f).collect();
    }
    use rayon::prelude::*;
    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(|| (0..n).into_par_iter().map(&f).collect()),
        Err(_) => (0..n).map(f).collect(),
    }
}

/// Sparsity pattern of an assembled matrix together with its symbolic
/// Cholesky factorization, reused across numeric factorizations.
pub struct SparsePattern {
    n: usize,
    symbolic: SymbolicSparseColMat<usize>,
    order: Argsort<usize>,
    llt: Option<SymbolicLlt<usize>>,
}

impl SparsePattern {
    /// Pattern of the `(row, col)` entries in assembly order; duplicates
    /// are summed.
    pub fn new(n: usize, entries: &[(usize, usize)]) -> Result<Self> {
        let pairs: Vec<Pair<usize, usize>> = entries
            .iter()
            .map(|&(row, col)| Pair { row, col })
            .collect();
        let (symbolic, order) = SymbolicSparseColMat::try_new_from_indices(n, n, &pairs)
            .map_err(|_| Error::InvalidInput("sparse assembly failed".into()))?;
        let llt = if n == 0 {
            None
        } else {
            Some(
                SymbolicLlt::try_new(symbolic.as_ref(), Side::Lower)
                    .map_err(|_| Error::InvalidInput("symbolic factorization failed".into()))?,
            )
        };
        Ok(Self {
            n,
            symbolic,
            order,
            llt,
        })
    }

    /// Sparse Cholesky factorization of the matrix with the given entry
    /// values, in the order the pattern was built from.
    pub fn factor(&self, values: &[f64]) -> Result<SpdFactor> {
        let Some(llt) = &self.llt else {
            return Ok(SpdFactor { inner: None, n: 0 });
        };
        let a = SparseColMat::new_from_argsort(self.symbolic.clone(), &self.order, values)
            .map_err(|_| Error::InvalidInput("sparse assembly failed".into()))?;
        let llt = Llt::try_new_with_symbolic(llt.clone(), a.as_ref(), Side::Lower)
            .map_err(|_| Error::SingularLinearization)?;
        Ok(SpdFactor {
            inner: Some(llt),
            n: self.n,
        })
    }
}

pub struct SpdFactor {
    inner: Option<Llt<usize, f64>>,
    n: usize,
}

impl SpdFactor {
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        debug_assert_eq!(rhs.len(), self.n);
        let Some(llt) = &self.inner else {
            return Ok(Vec::new());
        };
        let mut b = Mat::<f64>::from_fn(self.n, 1, |i, _| rhs[i]);
        llt.solve_in_place(b.as_mut());
        let x: Vec<f64> = (0..self.n).map(|i| b[(i, 0)]).collect();
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularLinearization);
        }
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn barycentric_gradients_sum_to_zero() {
        let g = TriGeom::new(
            Vec2::new(0.1, 0.2),
            Vec2::new(1.3, 0.1),
            Vec2::new(0.4, 0.9),
        );
        let s: Vec2 = g.grads.iter().copied().sum();
        assert!(s.norm() < 1e-14);
        // gradient of x and y
        let gx = g.gradient([0.1, 1.3, 0.4]);
        let gy = g.gradient([0.2, 0.1, 0.9]);
        assert!((gx - Vec2::new(1.0, 0.0)).norm() < 1e-14);
        assert!((gy - Vec2::new(0.0, 1.0)).norm() < 1e-14);
    }

    #[test]
    fn quadrature_is_exact_for_quadratics() {
        let (a, b, c) = (
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(0.0, 1.0),
        );
        let g = TriGeom::new(a, b, c);
        let integral: f64 = g
            .quad_points
            .iter()
            .map(|p| QUAD_WEIGHT * g.area * p.x * p.y)
            .sum();
        assert!((integral - 1.0 / 24.0).abs() < 1e-15);
    }

    #[test]
    fn solves_small_spd_system() {
        let pattern = SparsePattern::new(2, &[(0, 0), (0, 0), (1, 1), (1, 0), (0, 1)]).unwrap();
        let x = pattern
            .factor(&[1.0, 1.0, 4.0, 1.0, 1.0])
            .unwrap()
            .solve(&[3.0, 9.0])
            .unwrap();
        assert!((x[0] - 3.0 / 7.0).abs() < 1e-14);
        assert!((x[1] - 15.0 / 7.0).abs() < 1e-14);
    }

    #[test]
    fn par_map_preserves_order() {
        let serial = par_map(1, 1000, |i| (i as f64).sqrt());
        let parallel = par_map(4, 1000, |i| (i as f64).sqrt());
        assert_eq!(serial, parallel);
    }
}
