// NaN-rejecting checks are written as negated comparisons on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod fem;
pub mod functional;
pub mod geometry;
pub mod io;
pub mod mesh;
pub mod optimizer;
pub mod problem;
pub mod shape;
pub mod solver;

pub use error::{Error, Result};
pub use functional::{average_distance, evaluate_cost, CostBreakdown, CostIntegrand, ScalarFn};
pub use geometry::{
    discrete_curvature, normals, region_measure, CurvatureAtom, DirichletRegion, Polygon,
    RegionKind, Vec2,
};
pub use mesh::{triangulate, Mesh, NodeTag, SigmaEdge, SigmaSet};
pub use optimizer::{descend, DescentConfig, Iterate, Termination, Trajectory};
pub use problem::{ShapeProblem, Solution};
pub use shape::{
    boundary_shape_derivative, configurational_forces, curve_residual,
    finite_difference_derivative, identity_scale, jump_density, point_residual, shape_derivative,
    verify_identity, vertex_gradient, CurveResidual, DerivativeCheck, FdMode, JumpDensity,
    PointProbe, ProbeConfig, ShapeReport, VectorField,
};
pub use solver::{
    normal_traces, solve_adjoint, solve_linearized, solve_state, Field, FieldRole, PdeProblem,
    SolverOptions, TraceSet,
};
