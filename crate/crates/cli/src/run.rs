//! The commands: each reads a configuration, runs, and writes its files.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sigma_shape_core::io::{
    field_csv, field_json, field_vtk, format_f64, geometry_json, mesh_json, probe_csv,
    residual_csv, to_json, trajectory_jsonl,
};
use sigma_shape_core::{
    curve_residual, descend, finite_difference_derivative, point_residual, shape_derivative,
    DerivativeCheck, DirichletRegion, FdMode, ProbeConfig, RegionKind, ShapeReport, Vec2,
    VectorField,
};

use crate::config::{RunConfig, Setup};
use crate::error::CliError;
use crate::svg::{line_plot, Series};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Solve,
    Optimize,
    CheckCurve,
    CheckPoint,
    Derivative,
}

#[derive(Clone, Debug)]
pub struct RunArgs {
    pub command: Command,
    pub config: PathBuf,
    pub out: PathBuf,
    pub h: Option<f64>,
    pub seed: Option<u64>,
}

struct Output {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Output {
    fn new(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?;
        self.written.push(path);
        Ok(())
    }
}

fn json<T: serde::Serialize>(value: &T) -> Result<String, CliError> {
    to_json(value).map_err(CliError::core("serialization"))
}

/// Runs one command and returns the files written.
pub fn run(args: &RunArgs) -> Result<Vec<PathBuf>, CliError> {
    let text = fs::read_to_string(&args.config).map_err(|source| CliError::Io {
        path: args.config.clone(),
        source,
    })?;
    let setup = RunConfig::from_json(&text)?.setup(args.h)?;
    let mut out = Output::new(&args.out)?;
    match args.command {
        Command::Solve => solve(&setup, &mut out)?,
        Command::Optimize => optimize(&setup, args.seed, &mut out)?,
        Command::CheckCurve => check_curve(&setup, &mut out)?,
        Command::CheckPoint => check_point(&setup, &mut out)?,
        Command::Derivative => derivative(&setup, &mut out)?,
    }
    Ok(out.written)
}

fn report(region: &DirichletRegion, cost: sigma_shape_core::CostBreakdown) -> ShapeReport {
    ShapeReport {
        region: region.clone(),
        cost,
        curve: None,
        point: None,
        derivatives: Vec::new(),
    }
}

fn solve(s: &Setup, out: &mut Output) -> Result<(), CliError> {
    let sol = s
        .problem
        .solve(&s.region)
        .map_err(CliError::core("solve"))?;
    out.write("geometry.json", &geometry(s, &s.region)?)?;
    out.write(
        "mesh.json",
        &mesh_json(sol.mesh()).map_err(CliError::core("mesh export"))?,
    )?;
    out.write(
        "state.json",
        &field_json(&sol.u).map_err(CliError::core("field export"))?,
    )?;
    out.write("state.csv", &field_csv(&sol.u))?;
    out.write("state.vtk", &field_vtk(&sol.u, "u"))?;
    out.write("adjoint.csv", &field_csv(&sol.q))?;
    out.write("report.json", &json(&report(&s.region, sol.cost))?)?;
    Ok(())
}

fn geometry(s: &Setup, region: &DirichletRegion) -> Result<String, CliError> {
    geometry_json(&s.problem.domain, region).map_err(CliError::core("geometry export"))
}

fn jitter(
    region: &DirichletRegion,
    amplitude: f64,
    seed: u64,
) -> Result<DirichletRegion, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let moved: Vec<Vec2> = region
        .vertices()
        .iter()
        .map(|v| {
            let dx = rng.random_range(-amplitude..=amplitude);
            let dy = rng.random_range(-amplitude..=amplitude);
            *v + Vec2::new(dx, dy)
        })
        .collect();
    region
        .with_vertices(moved)
        .map_err(|e| CliError::Validation(format!("jittered region: {e}")))
}

fn curve_report(s: &Setup, region: &DirichletRegion) -> Result<ShapeReport, CliError> {
    let sol = s.problem.solve(region).map_err(CliError::core("solve"))?;
    let mut r = report(region, sol.cost);
    if region.kind() == RegionKind::Polyline {
        r.curve = Some(
            curve_residual(&sol.u, &sol.q, region, &s.problem.cost)
                .map_err(CliError::core("curve residual"))?,
        );
    }
    Ok(r)
}

fn optimize(s: &Setup, seed: Option<u64>, out: &mut Output) -> Result<(), CliError> {
    if s.region.vertices().is_empty() {
        return Err(CliError::Validation(
            "region: optimize needs a nonempty region".into(),
        ));
    }
    let region0 = match seed {
        Some(seed) => {
            let amplitude = s.config.jitter.unwrap_or(0.25 * s.problem.h);
            let r = jitter(&s.region, amplitude, seed)?;
            r.validate_in(&s.problem.domain)
                .map_err(|e| CliError::Validation(format!("jittered region: {e}")))?;
            r
        }
        None => s.region.clone(),
    };
    let config = s.config.descent.clone().unwrap_or_default();
    let traj = descend(&s.problem, &region0, &config).map_err(CliError::core("descent"))?;
    out.write(
        "trajectory.jsonl",
        &trajectory_jsonl(&traj).map_err(CliError::core("trajectory export"))?,
    )?;

    let mut csv = String::from("iter,total,integral,penalization,grad_norm\n");
    for it in &traj.iterates {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            it.iter,
            format_f64(it.cost.total),
            format_f64(it.cost.integral),
            format_f64(it.cost.penalization),
            format_f64(it.grad_norm)
        ));
    }
    out.write("cost.csv", &csv)?;
    let series = Series {
        label: "total cost".into(),
        points: traj
            .iterates
            .iter()
            .map(|it| (it.iter as f64, it.cost.total))
            .collect(),
    };
    out.write(
        "cost.svg",
        &line_plot("Cost per iteration", "iteration", "cost", &[series]),
    )?;

    let last = &traj.last().region;
    out.write("geometry.json", &geometry(s, last)?)?;
    let initial = curve_report(s, &region0)?;
    let fin = curve_report(s, last)?;
    out.write(
        "report.json",
        &json(&OptimizeReport {
            termination: traj.termination,
            iterations: traj.iterates.len() - 1,
            initial,
            final_: fin,
        })?,
    )?;
    Ok(())
}

#[derive(serde::Serialize)]
struct OptimizeReport {
    termination: sigma_shape_core::Termination,
    iterations: usize,
    initial: ShapeReport,
    #[serde(rename = "final")]
    final_: ShapeReport,
}

fn check_curve(s: &Setup, out: &mut Output) -> Result<(), CliError> {
    if s.region.kind() != RegionKind::Polyline {
        return Err(CliError::Validation(
            "region: check-curve needs a polyline".into(),
        ));
    }
    let r = curve_report(s, &s.region)?;
    let curve = r.curve.as_ref().expect("polyline reports carry a residual");
    out.write("residual.csv", &residual_csv(curve))?;
    let column = |f: fn(&sigma_shape_core::shape::ResidualSample) -> f64| -> Vec<(f64, f64)> {
        curve.samples.iter().map(|p| (p.arc, f(p))).collect()
    };
    let series = [
        Series {
            label: "residual".into(),
            points: column(|p| p.residual),
        },
        Series {
            label: "curvature".into(),
            points: column(|p| p.curvature),
        },
        Series {
            label: "jump".into(),
            points: column(|p| p.jump),
        },
    ];
    out.write(
        "residual.svg",
        &line_plot(
            "Optimality residual along the curve",
            "arc length",
            "density",
            &series,
        ),
    )?;
    out.write("report.json", &json(&r)?)?;
    Ok(())
}

fn check_point(s: &Setup, out: &mut Output) -> Result<(), CliError> {
    let h = s.problem.h;
    let spec = s.config.probe.as_ref();
    let center = match (spec.and_then(|p| p.center), s.region.vertices()) {
        (Some(c), _) => c,
        (None, [c]) => *c,
        _ => {
            return Err(CliError::Validation(
                "probe.center: give a center or a region with exactly one point".into(),
            ))
        }
    };
    let config = spec.map(|p| p.probe_config()).unwrap_or(ProbeConfig {
        radii: vec![2.4 * h, 1.8 * h, 1.2 * h],
        directions: 16,
    });
    let probe =
        point_residual(&s.problem, center, &config).map_err(CliError::core("point probe"))?;
    let region = DirichletRegion::points(vec![center], s.region.lambda())
        .map_err(|e| CliError::Validation(format!("probe.center: {e}")))?;
    let cost = s.problem.cost(&region).map_err(CliError::core("solve"))?;
    out.write("probe.csv", &probe_csv(&probe))?;
    let series = Series {
        label: "extrapolated".into(),
        points: probe
            .directions
            .iter()
            .copied()
            .zip(probe.extrapolated.iter().copied())
            .collect(),
    };
    out.write(
        "probe.svg",
        &line_plot(
            "Extrapolated density per direction",
            "theta",
            "E0",
            &[series],
        ),
    )?;
    let mut r = report(&region, cost);
    r.point = Some(probe);
    out.write("report.json", &json(&r)?)?;
    Ok(())
}

/// A bump of radius `4h` on the first vertex, pushing a chain outward
/// along its first segment (points move along x).
fn default_field(region: &DirichletRegion, h: f64) -> Result<VectorField, CliError> {
    let v = region.vertices();
    let direction = match (region.kind(), v.len()) {
        (_, 0) => {
            return Err(CliError::Validation(
                "region: derivative needs a nonempty region".into(),
            ))
        }
        (RegionKind::Polyline, _) => (v[0] - v[1]) / v[0].distance(v[1]),
        (RegionKind::PointSet, _) => Vec2::new(1.0, 0.0),
    };
    Ok(VectorField::Bump {
        center: v[0],
        radius: 4.0 * h,
        direction,
    })
}

fn derivative(s: &Setup, out: &mut Output) -> Result<(), CliError> {
    let (fields, eps) = match &s.config.derivative {
        Some(d) if !d.fields.is_empty() => (d.fields.clone(), d.eps),
        other => (
            vec![default_field(&s.region, s.problem.h)?],
            other.as_ref().map_or(1e-3, |d| d.eps),
        ),
    };
    let sol = s
        .problem
        .solve(&s.region)
        .map_err(CliError::core("solve"))?;
    let mut r = report(&s.region, sol.cost);
    let mut csv = String::from("field,analytic,finite_difference,relative_error\n");
    for (i, x) in fields.into_iter().enumerate() {
        let ctx = format!("derivative.fields[{i}]");
        let f = |p: Vec2| x.eval(p);
        let analytic = shape_derivative(&sol.u, &sol.q, &s.region, &s.problem.cost, &f)
            .map_err(CliError::core(ctx.clone()))?;
        let fd = finite_difference_derivative(&s.problem, &s.region, &f, eps, FdMode::Remesh)
            .map_err(CliError::core(ctx))?;
        let check = DerivativeCheck::new(x.clone(), analytic, fd, eps);
        csv.push_str(&format!(
            "{i},{},{},{}\n",
            format_f64(check.analytic),
            format_f64(check.finite_difference),
            format_f64(check.relative_error)
        ));
        r.derivatives.push(check);
    }
    out.write("derivative.csv", &csv)?;
    out.write("report.json", &json(&r)?)?;
    Ok(())
}
