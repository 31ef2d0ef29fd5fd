//! Export formats. Every float is written with 17 significant digits so
//! that repeated runs can be compared byte for byte.

use std::fmt::Write as _;
use std::io;

use serde::Serialize;
use serde_json::ser::{CompactFormatter, Formatter, PrettyFormatter};

use crate::error::{Error, Result};
use crate::geometry::{DirichletRegion, Polygon, Vec2};
use crate::mesh::{Mesh, NodeTag};
use crate::optimizer::Trajectory;
use crate::shape::{CurveResidual, PointProbe};
use crate::solver::Field;

/// `v` with 17 significant digits; non-finite values print as `NaN`/`inf`.
pub fn format_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

struct Digits17<F>(F);

impl<F: Formatter> Formatter for Digits17<F> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        w.write_all(format_f64(value).as_bytes())
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + io::Write>(
        &mut self,
        w: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + io::Write>(
        &mut self,
        w: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

fn serialize<T: Serialize + ?Sized, F: Formatter>(value: &T, formatter: F) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Digits17(formatter));
    value
        .serialize(&mut ser)
        .map_err(|e| Error::InvalidInput(format!("serialization failed: {e}")))?;
    String::from_utf8(buf).map_err(|e| Error::InvalidInput(e.to_string()))
}

/// Indented JSON with 17-digit floats.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut s = serialize(value, PrettyFormatter::new())?;
    s.push('\n');
    Ok(s)
}

/// Single-line JSON with 17-digit floats.
pub fn to_json_line<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    serialize(value, CompactFormatter)
}

#[derive(Serialize)]
struct GeometryRecord<'a> {
    polygon: &'a Polygon,
    region: &'a DirichletRegion,
}

pub fn geometry_json(domain: &Polygon, region: &DirichletRegion) -> Result<String> {
    to_json(&GeometryRecord {
        polygon: domain,
        region,
    })
}

#[derive(Serialize)]
struct MeshRecord<'a> {
    nodes: &'a [Vec2],
    triangles: &'a [[usize; 3]],
    tags: &'a [NodeTag],
}

pub fn mesh_json(mesh: &Mesh) -> Result<String> {
    to_json(&MeshRecord {
        nodes: mesh.nodes(),
        triangles: mesh.triangles(),
        tags: mesh.tags(),
    })
}

#[derive(Serialize)]
struct FieldRecord<'a> {
    nodes: usize,
    values: &'a [f64],
}

/// Nodal values; on Σ each node carries the value of its first sector.
pub fn field_json(field: &Field) -> Result<String> {
    to_json(&FieldRecord {
        nodes: field.mesh().n_nodes(),
        values: field.nodal_values(),
    })
}

pub fn field_csv(field: &Field) -> String {
    let mut out = String::from("node_id,x,y,value\n");
    for (i, (p, v)) in field
        .mesh()
        .nodes()
        .iter()
        .zip(field.nodal_values())
        .enumerate()
    {
        let _ = writeln!(
            out,
            "{i},{},{},{}",
            format_f64(p.x),
            format_f64(p.y),
            format_f64(*v)
        );
    }
    out
}

/// Legacy VTK unstructured grid with the field as point data.
pub fn field_vtk(field: &Field, name: &str) -> String {
    let mesh = field.mesh();
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# vtk DataFile Version 3.0\n{name}\nASCII\nDATASET UNSTRUCTURED_GRID"
    );
    let _ = writeln!(out, "POINTS {} double", mesh.n_nodes());
    for p in mesh.nodes() {
        let _ = writeln!(out, "{} {} 0", format_f64(p.x), format_f64(p.y));
    }
    let nt = mesh.n_triangles();
    let _ = writeln!(out, "CELLS {nt} {}", 4 * nt);
    for [a, b, c] in mesh.triangles() {
        let _ = writeln!(out, "3 {a} {b} {c}");
    }
    let _ = writeln!(out, "CELL_TYPES {nt}");
    for _ in 0..nt {
        out.push_str("5\n");
    }
    let _ = writeln!(
        out,
        "POINT_DATA {}\nSCALARS {name} double 1\nLOOKUP_TABLE default",
        mesh.n_nodes()
    );
    for v in field.nodal_values() {
        let _ = writeln!(out, "{}", format_f64(*v));
    }
    out
}

#[derive(Serialize)]
struct IterateRecord<'a> {
    iter: usize,
    cost: &'a crate::functional::CostBreakdown,
    grad_norm: f64,
    region: &'a DirichletRegion,
}

/// One JSON record per iterate.
pub fn trajectory_jsonl(trajectory: &Trajectory) -> Result<String> {
    let mut out = String::new();
    for it in &trajectory.iterates {
        out.push_str(&to_json_line(&IterateRecord {
            iter: it.iter,
            cost: &it.cost,
            grad_norm: it.grad_norm,
            region: &it.region,
        })?);
        out.push('\n');
    }
    Ok(out)
}

pub fn residual_csv(residual: &CurveResidual) -> String {
    let mut out = String::from("arc_coord,curvature,jump,residual,near_endpoint\n");
    for s in &residual.samples {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            format_f64(s.arc),
            format_f64(s.curvature),
            format_f64(s.jump),
            format_f64(s.residual),
            u8::from(s.near_endpoint)
        );
    }
    out
}

/// Extrapolated value and normalized samples per direction, one column
/// per probe radius.
pub fn probe_csv(probe: &PointProbe) -> String {
    let mut out = String::from("theta,extrapolated");
    for (k, _) in probe.radii.iter().enumerate() {
        let _ = write!(out, ",r{k}");
    }
    out.push('\n');
    for (j, theta) in probe.directions.iter().enumerate() {
        let _ = write!(
            out,
            "{},{}",
            format_f64(*theta),
            format_f64(probe.extrapolated[j])
        );
        for row in &probe.normalized {
            let _ = write!(out, ",{}", format_f64(row[j]));
        }
        out.push('\n');
    }
    out
}
