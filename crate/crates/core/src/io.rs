//! File formats: JSON for polygons, problems, solutions, partitions and
//! piecewise potentials; CSV for packings and histograms; a JSON header plus
//! little-endian `f64` samples for grids.
//!
//! Every parser validates its input and returns [`IoError`] instead of
//! panicking.

use serde::{Deserialize, Serialize};

use crate::alexandrov::{AlexandrovError, MassVelocity, MassVelocityData, PiecewiseAffinePotential};
use crate::breakflow::{Partition, Piece};
use crate::convexify::{Axis, GridError, GridFunction, Histogram2d, PiecewiseAffine1d, Potential1dError};
use crate::geom2d::{ConvexPolygon, Point, PolygonError, EPS_GEOM};
use crate::measure::{MeasureDecomposition, Support};
use crate::packings::Disk;

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("polygon: {0}")]
    Polygon(#[from] PolygonError),
    #[error(transparent)]
    Data(#[from] AlexandrovError),
    #[error("grid: {0}")]
    Grid(#[from] GridError),
    #[error("potential: {0}")]
    Potential(#[from] Potential1dError),
    #[error("{0}")]
    Invalid(String),
}

type Result<T> = std::result::Result<T, IoError>;

fn to_points(raw: &[[f64; 2]]) -> Vec<Point> {
    raw.iter().map(|p| Point::new(p[0], p[1])).collect()
}

fn from_points(p: &[Point]) -> Vec<[f64; 2]> {
    p.iter().map(|q| [q.x, q.y]).collect()
}

fn polygon(raw: &[[f64; 2]]) -> Result<ConvexPolygon> {
    let p = ConvexPolygon::try_new(to_points(raw), EPS_GEOM)?;
    if p.is_empty() {
        return Err(IoError::Invalid("polygon has no vertices".into()));
    }
    Ok(p)
}

/// `[[x, y], ...]`, convex, either orientation.
pub fn parse_polygon_json(s: &str) -> Result<ConvexPolygon> {
    let raw: Vec<[f64; 2]> = serde_json::from_str(s)?;
    polygon(&raw)
}

pub fn polygon_to_json(p: &ConvexPolygon) -> String {
    serde_json::to_string(&from_points(p.vertices())).expect("finite coordinates")
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPair {
    m: f64,
    v: [f64; 2],
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProblem {
    domain: Vec<[f64; 2]>,
    pairs: Vec<RawPair>,
}

/// `{"domain": [[x, y], ...], "pairs": [{"m": mass, "v": [vx, vy]}, ...]}`.
pub fn parse_problem_json(s: &str) -> Result<MassVelocityData> {
    let raw: RawProblem = serde_json::from_str(s)?;
    let domain = polygon(&raw.domain)?;
    let pairs = raw
        .pairs
        .iter()
        .map(|p| MassVelocity::new(p.m, Point::new(p.v[0], p.v[1])))
        .collect();
    Ok(MassVelocityData::new(domain, pairs)?)
}

pub fn problem_to_json(data: &MassVelocityData) -> String {
    let raw = RawProblem {
        domain: from_points(data.domain.vertices()),
        pairs: data
            .pairs
            .iter()
            .map(|p| RawPair {
                m: p.mass,
                v: [p.velocity.x, p.velocity.y],
            })
            .collect(),
    };
    serde_json::to_string_pretty(&raw).expect("finite data")
}

#[derive(Serialize, Deserialize)]
struct RawSolution {
    heights: Vec<f64>,
    cells: Vec<Vec<[f64; 2]>>,
    residual: f64,
    velocities: Vec<[f64; 2]>,
    domain: Vec<[f64; 2]>,
}

/// Solution file: heights, cells and residual, plus the velocities and the
/// domain so that the potential can be rebuilt.
pub fn solution_to_json(pot: &PiecewiseAffinePotential, residual: f64) -> String {
    let raw = RawSolution {
        heights: pot.heights.clone(),
        cells: pot.cells.iter().map(|c| from_points(c.vertices())).collect(),
        residual,
        velocities: from_points(&pot.velocities),
        domain: from_points(pot.domain.vertices()),
    };
    serde_json::to_string_pretty(&raw).expect("finite solution")
}

/// Rebuilds the potential from velocities and heights; the stored cells are
/// recomputed.
pub fn parse_solution_json(s: &str) -> Result<(PiecewiseAffinePotential, f64)> {
    let raw: RawSolution = serde_json::from_str(s)?;
    if raw.heights.len() != raw.velocities.len() || raw.heights.is_empty() {
        return Err(IoError::Invalid("heights and velocities differ in length".into()));
    }
    if raw.heights.iter().chain(raw.velocities.iter().flatten()).any(|x| !x.is_finite()) {
        return Err(IoError::Invalid("non-finite height or velocity".into()));
    }
    let domain = polygon(&raw.domain)?;
    Ok((
        PiecewiseAffinePotential::from_heights(domain, to_points(&raw.velocities), raw.heights),
        raw.residual,
    ))
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPiece {
    cell: Vec<[f64; 2]>,
    v: [f64; 2],
    h: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPartition {
    domain: Vec<[f64; 2]>,
    pieces: Vec<RawPiece>,
}

/// `{"domain": [...], "pieces": [{"cell": [...], "v": [vx, vy], "h": h}]}`.
pub fn parse_partition_json(s: &str) -> Result<Partition> {
    let raw: RawPartition = serde_json::from_str(s)?;
    let domain = polygon(&raw.domain)?;
    let pieces = raw
        .pieces
        .iter()
        .map(|p| {
            if !(p.v.iter().all(|x| x.is_finite()) && p.h.is_finite()) {
                return Err(IoError::Invalid("non-finite piece data".into()));
            }
            Ok(Piece {
                cell: polygon(&p.cell)?,
                velocity: Point::new(p.v[0], p.v[1]),
                height: p.h,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Partition { domain, pieces })
}

pub fn partition_to_json(p: &Partition) -> String {
    let raw = RawPartition {
        domain: from_points(p.domain.vertices()),
        pieces: p
            .pieces
            .iter()
            .map(|q| RawPiece {
                cell: from_points(q.cell.vertices()),
                v: [q.velocity.x, q.velocity.y],
                h: q.height,
            })
            .collect(),
    };
    serde_json::to_string_pretty(&raw).expect("finite partition")
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPieces1d {
    breaks: Vec<f64>,
    slopes: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    heights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    left_value: Option<f64>,
}

/// `{"breaks": [...], "slopes": [...]}` with either `"heights"` or an
/// optional `"left_value"` (default 0).
pub fn parse_pieces1d_json(s: &str) -> Result<PiecewiseAffine1d> {
    let raw: RawPieces1d = serde_json::from_str(s)?;
    Ok(match raw.heights {
        Some(h) => PiecewiseAffine1d::new(raw.breaks, raw.slopes, h)?,
        None => PiecewiseAffine1d::from_slopes(raw.breaks, raw.slopes, raw.left_value.unwrap_or(0.0))?,
    })
}

pub fn pieces1d_to_json(p: &PiecewiseAffine1d) -> String {
    serde_json::to_string_pretty(&RawPieces1d {
        breaks: p.breaks.clone(),
        slopes: p.slopes.clone(),
        heights: Some(p.heights.clone()),
        left_value: None,
    })
    .expect("finite pieces")
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGridHeader {
    origin: Vec<f64>,
    spacing: Vec<f64>,
    dims: Vec<usize>,
    /// One flag per node; `false` nodes read as `+∞`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mask: Option<Vec<bool>>,
}

/// Grid header `{"origin", "spacing", "dims", "mask"?}` plus `dims`-many
/// little-endian `f64` samples in row-major order.
pub fn parse_grid(header: &str, data: &[u8]) -> Result<GridFunction> {
    let h: RawGridHeader = serde_json::from_str(header)?;
    let nd = h.dims.len();
    if nd == 0 || nd > 2 || h.origin.len() != nd || h.spacing.len() != nd {
        return Err(IoError::Invalid("origin, spacing and dims need 1 or 2 matching entries".into()));
    }
    let total = h
        .dims
        .iter()
        .try_fold(1usize, |a, &d| a.checked_mul(d))
        .ok_or_else(|| IoError::Invalid("grid too large".into()))?;
    if total.checked_mul(8) != Some(data.len()) {
        return Err(IoError::Invalid(format!(
            "expected {total} samples, got {} bytes",
            data.len()
        )));
    }
    if let Some(m) = &h.mask {
        if m.len() != total {
            return Err(IoError::Invalid("mask length differs from node count".into()));
        }
    }
    let mut values: Vec<f64> = data
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    if let Some(m) = &h.mask {
        for (v, keep) in values.iter_mut().zip(m) {
            if !keep {
                *v = f64::INFINITY;
            }
        }
    }
    let axes: Vec<Axis> = (0..nd).map(|a| Axis::new(h.origin[a], h.spacing[a], h.dims[a])).collect();
    Ok(GridFunction::new(&axes, values)?)
}

/// Header JSON and sample bytes; `+∞` samples are recorded in the mask.
pub fn grid_to_bytes(g: &GridFunction) -> (String, Vec<u8>) {
    let masked = g.values.iter().any(|v| !v.is_finite());
    let header = RawGridHeader {
        origin: g.origin.clone(),
        spacing: g.spacing.clone(),
        dims: g.dims.clone(),
        mask: masked.then(|| g.values.iter().map(|v| v.is_finite()).collect()),
    };
    let data = g
        .values
        .iter()
        .flat_map(|v| if v.is_finite() { *v } else { 0.0 }.to_le_bytes())
        .collect();
    (serde_json::to_string(&header).expect("finite header"), data)
}

#[derive(Serialize, Deserialize)]
struct DiskRow {
    center_x: f64,
    center_y: f64,
    radius: f64,
    curvature: f64,
}

/// `center_x,center_y,radius,curvature` with a header row.
pub fn parse_packing_csv(s: &str) -> Result<Vec<Disk>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(s.as_bytes());
    let mut out = Vec::new();
    for row in rdr.deserialize() {
        let r: DiskRow = row?;
        if ![r.center_x, r.center_y, r.radius, r.curvature].iter().all(|x| x.is_finite()) || !(r.radius > 0.0) {
            return Err(IoError::Invalid(format!("invalid disk on row {}", out.len() + 1)));
        }
        if (r.radius * r.curvature.abs() - 1.0).abs() > 1e-9 {
            return Err(IoError::Invalid(format!(
                "radius and curvature disagree on row {}",
                out.len() + 1
            )));
        }
        out.push(Disk {
            center: Point::new(r.center_x, r.center_y),
            radius: r.radius,
            curvature: r.curvature,
        });
    }
    Ok(out)
}

pub fn packing_to_csv(disks: &[Disk]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for d in disks {
        w.serialize(DiskRow {
            center_x: d.center.x,
            center_y: d.center.y,
            radius: d.radius,
            curvature: d.curvature,
        })
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ASCII output")
}

#[derive(Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum RawSupport {
    Interval { lo: f64, hi: f64 },
    Polygon { vertices: Vec<[f64; 2]> },
}

#[derive(Serialize)]
struct RawAc {
    support: RawSupport,
    density: f64,
}

#[derive(Serialize)]
struct RawMeasure {
    ac_mass: f64,
    atom_mass: f64,
    singular_diffuse_mass: f64,
    total_mass: f64,
    ac_parts: Vec<RawAc>,
    atoms: Vec<([f64; 2], f64)>,
    diffuse_support: Vec<([f64; 2], f64)>,
}

pub fn measure_to_json(m: &MeasureDecomposition) -> String {
    let raw = RawMeasure {
        ac_mass: m.ac_mass(),
        atom_mass: m.atom_mass(),
        singular_diffuse_mass: m.singular_diffuse_mass,
        total_mass: m.total_mass(),
        ac_parts: m
            .ac_parts
            .iter()
            .map(|p| RawAc {
                support: match &p.support {
                    Support::Interval(lo, hi) => RawSupport::Interval { lo: *lo, hi: *hi },
                    Support::Polygon(poly) => RawSupport::Polygon {
                        vertices: from_points(poly.vertices()),
                    },
                },
                density: p.density,
            })
            .collect(),
        atoms: m.atoms.iter().map(|a| ([a.location.x, a.location.y], a.mass)).collect(),
        diffuse_support: m
            .diffuse_support
            .iter()
            .map(|a| ([a.location.x, a.location.y], a.mass))
            .collect(),
    };
    serde_json::to_string_pretty(&raw).expect("finite measure")
}

/// `center_x,center_y,mass` for every nonempty bin.
pub fn histogram_to_csv(h: &Histogram2d) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["center_x", "center_y", "mass"]).expect("in-memory write");
    for i in 0..h.bins[0] {
        for j in 0..h.bins[1] {
            let m = h.mass[i * h.bins[1] + j];
            if m > 0.0 {
                let c = h.bin_center(i, j);
                w.write_record([c.x.to_string(), c.y.to_string(), m.to_string()])
                    .expect("in-memory write");
            }
        }
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ASCII output")
}
