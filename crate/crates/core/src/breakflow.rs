//! Rigid breaking flows `X_t(z) = z + t·v(z)` of piecewise-constant velocity
//! fields, with geometric injectivity and convexity certificates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::alexandrov::PiecewiseAffinePotential;
use crate::geom2d::{polygons_overlap_tol, BBox, ConvexPolygon, Point, Tolerance, EPS_GEOM};
use crate::measure::{AcPart, MeasureDecomposition, Support};

pub const EPS_CONVEXITY: f64 = 1e-8;

/// A convex piece with its affine datum `v·x + h`.
#[derive(Clone, Debug, PartialEq)]
pub struct Piece {
    pub cell: ConvexPolygon,
    pub velocity: Point,
    pub height: f64,
}

/// Explicit finite partition of a domain into affine pieces. Unlike
/// [`PiecewiseAffinePotential`] it need not come from a convex max.
#[derive(Clone, Debug, PartialEq)]
pub struct Partition {
    pub domain: ConvexPolygon,
    pub pieces: Vec<Piece>,
}

impl From<&PiecewiseAffinePotential> for Partition {
    fn from(pot: &PiecewiseAffinePotential) -> Self {
        let pieces = pot
            .cells
            .iter()
            .zip(&pot.velocities)
            .zip(&pot.heights)
            .filter(|((c, _), _)| !c.is_empty())
            .map(|((c, v), h)| Piece {
                cell: c.clone(),
                velocity: *v,
                height: *h,
            })
            .collect();
        Self {
            domain: pot.domain.clone(),
            pieces,
        }
    }
}

impl Partition {
    /// Index of a piece containing `x`, if any.
    pub fn locate(&self, x: &Point) -> Option<usize> {
        self.pieces
            .iter()
            .position(|p| p.cell.contains(x, EPS_GEOM))
    }

    fn velocity_scale(&self) -> f64 {
        self.pieces
            .iter()
            .map(|p| p.velocity.norm())
            .fold(1.0, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BreakingScene {
    pub time: f64,
    pub shards: Vec<ConvexPolygon>,
    pub velocities: Vec<Point>,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum BreakflowError {
    #[error("pieces {0} and {1} disagree by {2:.3e} on a shared boundary")]
    InconsistentPartition(usize, usize, f64),
    #[error("shards {0} and {1} overlap; the potential is not convex")]
    OverlappingShards(usize, usize),
    #[error("negative time {0}")]
    NegativeTime(f64),
}

/// Translate every piece rigidly by `t·v_i`.
pub fn advance(partition: &Partition, t: f64) -> Result<BreakingScene, BreakflowError> {
    if t < 0.0 {
        return Err(BreakflowError::NegativeTime(t));
    }
    Ok(BreakingScene {
        time: t,
        shards: partition
            .pieces
            .iter()
            .map(|p| p.cell.translate(&(t * p.velocity)))
            .collect(),
        velocities: partition.pieces.iter().map(|p| p.velocity).collect(),
    })
}

pub fn advance_potential(
    pot: &PiecewiseAffinePotential,
    t: f64,
) -> Result<BreakingScene, BreakflowError> {
    advance(&Partition::from(pot), t)
}

impl BreakingScene {
    /// Further translation by `dt·v_i`; `advance(p, s).shift(t) == advance(p, s + t)`.
    pub fn shift(&self, dt: f64) -> Self {
        Self {
            time: self.time + dt,
            shards: self
                .shards
                .iter()
                .zip(&self.velocities)
                .map(|(s, v)| s.translate(&(dt * v)))
                .collect(),
            velocities: self.velocities.clone(),
        }
    }
}

/// Uniform point in a union of polygons (area-weighted piece choice).
pub(crate) struct UnionSampler<'a> {
    polys: Vec<&'a ConvexPolygon>,
    cumulative: Vec<f64>,
}

impl<'a> UnionSampler<'a> {
    pub(crate) fn new(polys: impl IntoIterator<Item = &'a ConvexPolygon>) -> Self {
        let polys: Vec<&ConvexPolygon> = polys.into_iter().filter(|p| p.area() > 0.0).collect();
        let mut acc = 0.0;
        let cumulative = polys
            .iter()
            .map(|p| {
                acc += p.area();
                acc
            })
            .collect();
        Self { polys, cumulative }
    }

    pub(crate) fn sample<R: Rng>(&self, rng: &mut R) -> (usize, Point) {
        let total = *self.cumulative.last().expect("nonempty union");
        let u = rng.gen_range(0.0..total);
        let i = self.cumulative.partition_point(|&c| c <= u).min(self.polys.len() - 1);
        (i, sample_polygon(self.polys[i], rng))
    }
}

/// Uniform point in a convex polygon via an area-weighted triangle fan.
pub(crate) fn sample_polygon<R: Rng>(poly: &ConvexPolygon, rng: &mut R) -> Point {
    let v = poly.vertices();
    let o = v[0];
    let tri: Vec<f64> = (1..v.len() - 1)
        .map(|k| 0.5 * crate::geom2d::cross(&(v[k] - o), &(v[k + 1] - o)))
        .collect();
    let total: f64 = tri.iter().sum();
    let mut u = rng.gen_range(0.0..total);
    let mut k = 0;
    while k + 1 < tri.len() && u >= tri[k] {
        u -= tri[k];
        k += 1;
    }
    let mut a: f64 = rng.gen_range(0.0..1.0);
    let mut b: f64 = rng.gen_range(0.0..1.0);
    if a + b > 1.0 {
        a = 1.0 - a;
        b = 1.0 - b;
    }
    o + a * (v[k + 1] - o) + b * (v[k + 2] - o)
}

/// Samples `samples` random pairs from the union of the pieces and checks
/// `|X_t(x) − X_t(y)| >= |x − y| − ε_geom` for each.
pub fn check_expansion(partition: &Partition, t: f64, samples: usize, seed: u64) -> bool {
    let sampler = UnionSampler::new(partition.pieces.iter().map(|p| &p.cell));
    let pieces: Vec<&Piece> = partition.pieces.iter().filter(|p| p.cell.area() > 0.0).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..samples).all(|_| {
        let (i, x) = sampler.sample(&mut rng);
        let (j, y) = sampler.sample(&mut rng);
        let xt = x + t * pieces[i].velocity;
        let yt = y + t * pieces[j].velocity;
        (xt - yt).norm() >= (x - y).norm() - EPS_GEOM
    })
}

/// First pair of shards whose interiors overlap, if any.
pub fn find_overlap(scene: &BreakingScene, tol: &Tolerance) -> Option<(usize, usize)> {
    let boxes: Vec<Option<BBox>> = scene.shards.iter().map(ConvexPolygon::bbox).collect();
    let mut order: Vec<usize> = (0..scene.shards.len())
        .filter(|&i| boxes[i].is_some())
        .collect();
    order.sort_by(|&a, &b| {
        boxes[a].unwrap().min.x.total_cmp(&boxes[b].unwrap().min.x).then(a.cmp(&b))
    });
    // Sweep over x: only boxes starting before the current one ends can meet it.
    order
        .par_iter()
        .enumerate()
        .filter_map(|(k, &i)| {
            let bi = boxes[i].unwrap();
            for &j in &order[k + 1..] {
                let bj = boxes[j].unwrap();
                if bj.min.x > bi.max.x {
                    break;
                }
                if bi.overlaps(&bj, 0.0)
                    && polygons_overlap_tol(&scene.shards[i], &scene.shards[j], tol)
                {
                    return Some((i.min(j), i.max(j)));
                }
            }
            None
        })
        .min()
}

/// True iff no two shard interiors overlap.
pub fn check_injectivity(scene: &BreakingScene) -> bool {
    find_overlap(scene, &Tolerance::default()).is_none()
}

/// Max-representation test: the partition is the graph of a convex function
/// iff on every piece `i` and at every vertex `x` of it,
/// `v_i·x + h_i >= v_j·x + h_j − ε` for all `j`. Vertices suffice because the
/// pieces are convex and the data affine. Continuity across shared
/// boundaries is checked first.
pub fn check_convexity(partition: &Partition) -> Result<bool, BreakflowError> {
    check_convexity_eps(partition, EPS_CONVEXITY)
}

pub fn check_convexity_eps(partition: &Partition, eps: f64) -> Result<bool, BreakflowError> {
    let eps = eps * partition.velocity_scale();
    let pieces = &partition.pieces;
    let affine = |k: usize, x: &Point| pieces[k].velocity.dot(x) + pieces[k].height;
    let boxes: Vec<Option<BBox>> = pieces.iter().map(|p| p.cell.bbox()).collect();
    let on_boundary_tol = 1e-9;
    for (i, pi) in pieces.iter().enumerate() {
        let Some(bi) = boxes[i] else { continue };
        for (j, pj) in pieces.iter().enumerate() {
            if i == j {
                continue;
            }
            let Some(bj) = boxes[j] else { continue };
            if !bi.overlaps(&bj, on_boundary_tol) {
                continue;
            }
            for x in pi.cell.vertices() {
                if pj.cell.contains(x, on_boundary_tol) {
                    let gap = (affine(i, x) - affine(j, x)).abs();
                    if gap > eps {
                        return Err(BreakflowError::InconsistentPartition(i, j, gap));
                    }
                }
            }
        }
    }
    for (i, pi) in pieces.iter().enumerate() {
        for x in pi.cell.vertices() {
            let own = affine(i, x);
            if (0..pieces.len()).any(|j| affine(j, x) > own + eps) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// `λ` restricted to the union of the shards, valid only when they are
/// pairwise interior-disjoint (the convex case).
pub fn transported_measure(scene: &BreakingScene) -> Result<MeasureDecomposition, BreakflowError> {
    if let Some((i, j)) = find_overlap(scene, &Tolerance::default()) {
        return Err(BreakflowError::OverlappingShards(i, j));
    }
    Ok(MeasureDecomposition {
        ac_parts: scene
            .shards
            .iter()
            .filter(|s| !s.is_empty())
            .map(|s| AcPart {
                support: Support::Polygon(s.clone()),
                density: 1.0,
            })
            .collect(),
        ..MeasureDecomposition::default()
    })
}
