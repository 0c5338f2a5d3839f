//! Disk packings and the potentials that break a domain into them.
//!
//! A packing `{B_i}` with centers `x_i` and radii `r_i` defines the convex
//! potential `φ = max_i (x_i·x + ½(r_i² − |x_i|²))`. Its pieces are the power
//! cells of the disks, each containing its disk, and under the flow every
//! disk moves to `(1 + t)·x_i`.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::alexandrov::PiecewiseAffinePotential;
use crate::geom2d::{ConvexPolygon, Point};

/// Vertices used when a disk enters the polygon pipeline.
pub const DISK_POLYGON_VERTICES: usize = 64;
/// Vertices of the polygon standing in for a circular container.
pub const CONTAINER_POLYGON_VERTICES: usize = 256;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum PackingError {
    #[error("seed violates the Descartes relation by {0:.3e}")]
    InvalidSeed(f64),
    #[error("seed must contain exactly one enclosing circle (negative curvature) and three disks")]
    InvalidSeedShape,
    #[error("disks {0} and {1} overlap")]
    Overlap(usize, usize),
    #[error("disk {0} leaves the container")]
    Escapes(usize),
    #[error("target fraction must lie in (0, 1), got {0}")]
    BadTarget(f64),
    #[error("reached only {reached:.4} of the target after {proposals} proposals")]
    Timeout { reached: f64, proposals: u64 },
    #[error("shape must contain the origin in its interior")]
    ShapeNotInterior,
    #[error("shape must lie inside the domain")]
    ShapeNotContained,
    #[error("domain must lie inside the unit ball")]
    DomainTooLarge,
    #[error("invalid disk: {0}")]
    InvalidDisk(String),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Disk {
    pub center: Point,
    pub radius: f64,
    /// `1/radius`, negative for an enclosing circle.
    pub curvature: f64,
}

impl Disk {
    pub fn new(center: Point, radius: f64) -> Self {
        Self {
            center,
            radius,
            curvature: 1.0 / radius,
        }
    }

    pub fn enclosing(center: Point, radius: f64) -> Self {
        Self {
            center,
            radius,
            curvature: -1.0 / radius,
        }
    }

    pub fn is_enclosing(&self) -> bool {
        self.curvature < 0.0
    }

    pub fn area(&self) -> f64 {
        std::f64::consts::PI * self.radius * self.radius
    }

    /// Inscribed regular polygon.
    pub fn polygon(&self, n: usize) -> ConvexPolygon {
        ConvexPolygon::regular(self.center, self.radius, n)
    }

    /// Distance between the circles along the line of centers: zero when
    /// tangent (internally if either encloses), positive when apart.
    pub fn tangency_gap(&self, other: &Disk) -> f64 {
        let d = (self.center - other.center).norm();
        match (self.is_enclosing(), other.is_enclosing()) {
            (true, false) => self.radius - other.radius - d,
            (false, true) => other.radius - self.radius - d,
            _ => d - self.radius - other.radius,
        }
    }
}

/// Region being packed.
#[derive(Clone, Debug, PartialEq)]
pub enum Container {
    Circle(Disk),
    Polygon(ConvexPolygon),
}

impl Container {
    pub fn area(&self) -> f64 {
        match self {
            Container::Circle(d) => d.area(),
            Container::Polygon(p) => p.area(),
        }
    }

    /// Distance from `x` to the container boundary, negative outside.
    pub fn clearance(&self, x: &Point) -> f64 {
        match self {
            Container::Circle(d) => d.radius - (x - d.center).norm(),
            Container::Polygon(p) => p.signed_clearance(x),
        }
    }

    /// Polygon used as the domain of packing potentials.
    pub fn polygon(&self) -> ConvexPolygon {
        match self {
            Container::Circle(d) => d.polygon(CONTAINER_POLYGON_VERTICES),
            Container::Polygon(p) => p.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiskPacking {
    pub container: Container,
    pub disks: Vec<Disk>,
}

impl DiskPacking {
    pub fn empty(container: Container) -> Self {
        Self {
            container,
            disks: Vec::new(),
        }
    }

    pub fn covered_fraction(&self) -> f64 {
        self.disks.iter().map(Disk::area).sum::<f64>() / self.container.area()
    }

    /// Clearance of `x` from the container boundary and all disks.
    pub fn clearance(&self, x: &Point) -> f64 {
        self.disks
            .iter()
            .map(|d| (x - d.center).norm() - d.radius)
            .fold(self.container.clearance(x), f64::min)
    }

    /// Pairwise disjointness and containment up to `eps`.
    pub fn validate(&self, eps: f64) -> Result<(), PackingError> {
        for (i, d) in self.disks.iter().enumerate() {
            if !(d.radius > 0.0) || !d.center.iter().all(|c| c.is_finite()) {
                return Err(PackingError::InvalidDisk(format!("disk {i}")));
            }
            if self.container.clearance(&d.center) < d.radius - eps {
                return Err(PackingError::Escapes(i));
            }
        }
        let mut order: Vec<usize> = (0..self.disks.len()).collect();
        order.sort_by(|&a, &b| {
            let (da, db) = (&self.disks[a], &self.disks[b]);
            (da.center.x - da.radius).total_cmp(&(db.center.x - db.radius))
        });
        for (k, &i) in order.iter().enumerate() {
            let di = &self.disks[i];
            for &j in &order[k + 1..] {
                let dj = &self.disks[j];
                if dj.center.x - dj.radius > di.center.x + di.radius + eps {
                    break;
                }
                if (di.center - dj.center).norm() < di.radius + dj.radius - eps {
                    return Err(PackingError::Overlap(i.min(j), i.max(j)));
                }
            }
        }
        Ok(())
    }
}

/// Three parents, the already known common neighbor, and the new child.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quadruple {
    pub parents: [usize; 3],
    pub known: usize,
    pub child: usize,
}

/// Apollonian gasket: all circles, including the enclosing one at index 0,
/// and the generating quadruples.
#[derive(Clone, Debug, PartialEq)]
pub struct Apollonian {
    pub circles: Vec<Disk>,
    pub quadruples: Vec<Quadruple>,
    /// Generation of each circle; seed circles are generation 0.
    pub generation: Vec<usize>,
}

impl Apollonian {
    /// Packing of the enclosing disk by all other circles.
    pub fn packing(&self) -> DiskPacking {
        DiskPacking {
            container: Container::Circle(self.circles[0]),
            disks: self.circles[1..].to_vec(),
        }
    }
}

/// Classic integral seed: curvatures (−1, 2, 2, 3) in the unit circle.
pub fn integral_seed() -> [Disk; 4] {
    [
        Disk::enclosing(Point::zeros(), 1.0),
        Disk::new(Point::new(-0.5, 0.0), 0.5),
        Disk::new(Point::new(0.5, 0.0), 0.5),
        Disk::new(Point::new(0.0, 2.0 / 3.0), 1.0 / 3.0),
    ]
}

/// Residual of `(Σb)² = 2Σb²`, relative to `Σb²`.
pub fn descartes_residual(b: [f64; 4]) -> f64 {
    let s: f64 = b.iter().sum();
    let q: f64 = b.iter().map(|x| x * x).sum();
    (s * s - 2.0 * q).abs() / q.max(1e-300)
}

/// Breadth-first Apollonian expansion. Each quadruple `(p₁, p₂, p₃, known)`
/// yields the other circle tangent to the three parents:
/// `b = 2(b₁+b₂+b₃) − b_known`, and the same for `b·z`.
pub fn apollonian(seed: [Disk; 4], generations: usize) -> Result<Apollonian, PackingError> {
    let enclosing = seed.iter().filter(|d| d.is_enclosing()).count();
    if enclosing != 1 || !seed[0].is_enclosing() {
        return Err(PackingError::InvalidSeedShape);
    }
    let res = descartes_residual(seed.map(|d| d.curvature));
    if res > 1e-9 {
        return Err(PackingError::InvalidSeed(res));
    }
    let mut circles = seed.to_vec();
    let mut generation = vec![0; 4];
    let mut quadruples = Vec::new();
    let mut frontier: VecDeque<([usize; 3], usize)> = VecDeque::new();
    for w in 0..4 {
        let p: Vec<usize> = (0..4).filter(|&k| k != w).collect();
        frontier.push_back(([p[0], p[1], p[2]], w));
    }
    for g in 1..=generations {
        let mut next = VecDeque::new();
        for (parents, known) in frontier.drain(..) {
            let b: f64 = parents.iter().map(|&k| circles[k].curvature).sum::<f64>() * 2.0
                - circles[known].curvature;
            let q: Point = parents
                .iter()
                .map(|&k| circles[k].center * circles[k].curvature)
                .sum::<Point>()
                * 2.0
                - circles[known].center * circles[known].curvature;
            let child = circles.len();
            circles.push(Disk {
                center: q / b,
                radius: 1.0 / b.abs(),
                curvature: b,
            });
            generation.push(g);
            quadruples.push(Quadruple {
                parents,
                known,
                child,
            });
            let [a, b_, c] = parents;
            next.push_back(([child, a, b_], c));
            next.push_back(([child, a, c], b_));
            next.push_back(([child, b_, c], a));
        }
        frontier = next;
    }
    Ok(Apollonian {
        circles,
        quadruples,
        generation,
    })
}

/// Options for the greedy largest-disk search.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OsculatoryOptions {
    /// Nodes per axis of the distance field.
    pub grid: usize,
    /// Local refinement passes around the best node.
    pub refinements: usize,
    /// Nodes per axis of each local refinement grid.
    pub local: usize,
    /// Radius safety margin.
    pub shrink: f64,
}

impl Default for OsculatoryOptions {
    fn default() -> Self {
        Self {
            grid: 512,
            refinements: 2,
            local: 21,
            shrink: 1e-9,
        }
    }
}

/// Append `count` disks, each of approximately largest radius in the part of
/// the container not yet covered.
pub fn osculatory(existing: &DiskPacking, count: usize) -> DiskPacking {
    osculatory_with(existing, count, &OsculatoryOptions::default())
}

pub fn osculatory_with(existing: &DiskPacking, count: usize, opts: &OsculatoryOptions) -> DiskPacking {
    let mut packing = existing.clone();
    let poly = packing.container.polygon();
    let Some(bb) = poly.bbox() else {
        return packing;
    };
    let n = opts.grid.max(2);
    let step = Point::new(
        (bb.max.x - bb.min.x) / (n - 1) as f64,
        (bb.max.y - bb.min.y) / (n - 1) as f64,
    );
    let node = |k: usize| bb.min + Point::new((k / n) as f64 * step.x, (k % n) as f64 * step.y);
    let mut field: Vec<f64> = (0..n * n)
        .into_par_iter()
        .map(|k| packing.clearance(&node(k)))
        .collect();
    let mut last_radius = packing
        .disks
        .iter()
        .map(|d| d.radius)
        .fold(f64::INFINITY, f64::min);
    for _ in 0..count {
        let (best_k, _) = field
            .par_iter()
            .enumerate()
            .map(|(k, v)| (k, *v))
            .reduce(|| (0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 || (b.1 == a.1 && b.0 < a.0) { b } else { a });
        let mut center = node(best_k);
        let mut clear = packing.clearance(&center);
        let mut h = step;
        for _ in 0..opts.refinements {
            let m = opts.local.max(3);
            let half = (m / 2) as f64;
            let cands: Vec<Point> = (0..m * m)
                .map(|k| {
                    center
                        + Point::new(
                            ((k / m) as f64 - half) * h.x / half,
                            ((k % m) as f64 - half) * h.y / half,
                        )
                })
                .collect();
            let (c, v) = cands
                .par_iter()
                .map(|p| (*p, packing.clearance(p)))
                .reduce(|| (center, clear), |a, b| if b.1 > a.1 { b } else { a });
            center = c;
            clear = v;
            h /= half;
        }
        let radius = (clear - opts.shrink).min(last_radius);
        if !(radius > 0.0) {
            break;
        }
        let disk = Disk::new(center, radius);
        packing.disks.push(disk);
        last_radius = radius;
        field.par_iter_mut().enumerate().for_each(|(k, f)| {
            let d = (node(k) - center).norm() - radius;
            if d < *f {
                *f = d;
            }
        });
    }
    packing
}

/// Proposal budget for [`vitali_random`].
pub const VITALI_BUDGET: u64 = 10_000_000;

/// Random disks until `target_fraction` of the container is covered: centers
/// uniform in the bounding box, radii uniform in `(0, clearance)`.
pub fn vitali_random(container: Container, target_fraction: f64, seed: u64) -> Result<DiskPacking, PackingError> {
    vitali_random_with_budget(container, target_fraction, seed, VITALI_BUDGET)
}

pub fn vitali_random_with_budget(
    container: Container,
    target_fraction: f64,
    seed: u64,
    budget: u64,
) -> Result<DiskPacking, PackingError> {
    if !(target_fraction > 0.0 && target_fraction < 1.0) {
        return Err(PackingError::BadTarget(target_fraction));
    }
    let bb = container
        .polygon()
        .bbox()
        .ok_or(PackingError::InvalidDisk("empty container".into()))?;
    let total = container.area();
    let mut packing = DiskPacking::empty(container);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut covered = 0.0;
    for _ in 0..budget {
        let c = Point::new(rng.gen_range(bb.min.x..bb.max.x), rng.gen_range(bb.min.y..bb.max.y));
        let clear = packing.clearance(&c);
        if clear <= 0.0 {
            continue;
        }
        let r = rng.gen_range(0.0..clear);
        if r <= 0.0 {
            continue;
        }
        let d = Disk::new(c, r);
        covered += d.area();
        packing.disks.push(d);
        if covered / total >= target_fraction {
            return Ok(packing);
        }
    }
    Err(PackingError::Timeout {
        reached: covered / total,
        proposals: budget,
    })
}

/// Potential with `v_i = x_i` and `h_i = ½(r_i² − |x_i|²)`, whose pieces are
/// the power cells of the disks in the container polygon.
pub fn packing_potential(packing: &DiskPacking) -> PiecewiseAffinePotential {
    let velocities = packing.disks.iter().map(|d| d.center).collect();
    let heights = packing
        .disks
        .iter()
        .map(|d| 0.5 * (d.radius * d.radius - d.center.norm_squared()))
        .collect();
    PiecewiseAffinePotential::from_heights(packing.container.polygon(), velocities, heights)
}

/// Convex potential vanishing exactly on a convex shape: the maximum of the
/// zero function and staged affine approximations of the distance to the
/// shape.
#[derive(Clone, Debug, PartialEq)]
pub struct ShardPotential {
    pub velocities: Vec<Point>,
    pub heights: Vec<f64>,
    /// Directions used at each level.
    pub level_sizes: Vec<usize>,
    pub coefficients: Vec<f64>,
}

impl ShardPotential {
    pub fn eval(&self, x: &Point) -> f64 {
        crate::alexandrov::eval_affine_max(&self.velocities, &self.heights, x)
    }

    pub fn to_potential(&self, domain: &ConvexPolygon) -> PiecewiseAffinePotential {
        PiecewiseAffinePotential::from_heights(domain.clone(), self.velocities.clone(), self.heights.clone())
    }
}

/// Directions needed so that the equispaced support-function maximum is
/// within `1/k` of the distance to the shape on the unit ball.
pub fn directions_for_level(k: usize) -> usize {
    let bound = |n: usize| {
        let a = std::f64::consts::PI / n as f64;
        2.0 * (1.0 - a.cos()) + 2.0 * a.sin()
    };
    (3..).find(|&n| bound(n) < 1.0 / k as f64).expect("bound decreases to zero")
}

/// Build `max(0, max_{k ≤ levels} a_k·Φ_{N_k})` with `a_k = 1/k!`, where
/// `Φ_N(x) = max_i σ_i·(x − x_i)` over `N` equispaced directions `σ_i` and
/// support points `x_i` of the shape.
pub fn arbitrary_shard_potential(
    domain: &ConvexPolygon,
    shape: &ConvexPolygon,
    levels: usize,
) -> Result<ShardPotential, PackingError> {
    if shape.signed_clearance(&Point::zeros()) <= 0.0 {
        return Err(PackingError::ShapeNotInterior);
    }
    if shape.vertices().iter().any(|v| domain.signed_clearance(v) < -1e-12) {
        return Err(PackingError::ShapeNotContained);
    }
    if domain.vertices().iter().any(|v| v.norm() > 1.0 + 1e-12) {
        return Err(PackingError::DomainTooLarge);
    }
    let mut velocities = vec![Point::zeros()];
    let mut heights = vec![0.0];
    let mut level_sizes = Vec::with_capacity(levels);
    let mut coefficients = Vec::with_capacity(levels);
    let mut a = 1.0;
    for k in 1..=levels {
        a /= k as f64;
        let n = directions_for_level(k);
        for i in 0..n {
            let ang = std::f64::consts::TAU * i as f64 / n as f64;
            let sigma = Point::new(ang.cos(), ang.sin());
            let xi = shape.support_point(&sigma).expect("nonempty shape");
            velocities.push(a * sigma);
            heights.push(-a * sigma.dot(&xi));
        }
        level_sizes.push(n);
        coefficients.push(a);
    }
    Ok(ShardPotential {
        velocities,
        heights,
        level_sizes,
        coefficients,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::breakflow::{advance_potential, check_injectivity};
    use approx::assert_abs_diff_eq;

    #[test]
    fn seed_second_child() {
        let g = apollonian(integral_seed(), 1).unwrap();
        assert_eq!(g.circles.len(), 8);
        // the triple (−1, 2, 2) with known child 3 yields the mirror disk
        let q = g.quadruples.iter().find(|q| q.known == 3).unwrap();
        let c = g.circles[q.child];
        assert_abs_diff_eq!(c.curvature, 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!((c.center - Point::new(0.0, -2.0 / 3.0)).norm(), 0.0, epsilon = 1e-12);
        assert_eq!(apollonian(integral_seed(), 0).unwrap().circles.len(), 4);
    }

    #[test]
    fn bad_seed_rejected() {
        let mut s = integral_seed();
        s[3].curvature = 4.0;
        assert!(matches!(apollonian(s, 2), Err(PackingError::InvalidSeed(_))));
    }

    #[test]
    fn gasket_integral_and_tangent() {
        let g = apollonian(integral_seed(), 5).unwrap();
        assert_eq!(g.circles.len(), 4 + 4 + 12 + 36 + 108 + 324);
        for c in &g.circles {
            assert!((c.curvature - c.curvature.round()).abs() < 1e-6);
        }
        for q in &g.quadruples {
            for &p in &q.parents {
                assert!(g.circles[q.child].tangency_gap(&g.circles[p]).abs() < 1e-9);
            }
        }
        g.packing().validate(1e-9).unwrap();
    }

    #[test]
    fn two_disks_radical_axis() {
        let p = DiskPacking {
            container: Container::Polygon(ConvexPolygon::rect(-1.0, -0.5, 1.0, 0.5)),
            disks: vec![Disk::new(Point::new(-0.5, 0.0), 0.5), Disk::new(Point::new(0.5, 0.0), 0.5)],
        };
        let pot = packing_potential(&p);
        assert_abs_diff_eq!(pot.cells[0].area(), 1.0, epsilon = 1e-12);
        for v in pot.cells[0].vertices() {
            assert!(v.x <= 1e-12);
        }
        let single = DiskPacking {
            container: Container::Polygon(ConvexPolygon::unit_square()),
            disks: vec![Disk::new(Point::zeros(), 0.3)],
        };
        let pot = packing_potential(&single);
        assert_eq!(pot.heights, vec![0.045]);
        assert_abs_diff_eq!(pot.cells[0].area(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn gasket_breaks_injectively() {
        let g = apollonian(integral_seed(), 4).unwrap();
        let pot = packing_potential(&g.packing());
        let scene = advance_potential(&pot, 0.5).unwrap();
        assert!(check_injectivity(&scene));
    }

    #[test]
    fn osculatory_first_disk_is_inscribed() {
        let p = osculatory(&DiskPacking::empty(Container::Polygon(ConvexPolygon::unit_square())), 1);
        let d = p.disks[0];
        assert!((d.radius - 0.5).abs() < 1e-6);
        assert!((d.center - Point::new(0.5, 0.5)).norm() < 1e-5);
    }

    #[test]
    fn osculatory_monotone() {
        let opts = OsculatoryOptions { grid: 128, ..Default::default() };
        let p = osculatory_with(&DiskPacking::empty(Container::Polygon(ConvexPolygon::unit_square())), 60, &opts);
        assert_eq!(p.disks.len(), 60);
        assert!(p.disks.windows(2).all(|w| w[1].radius <= w[0].radius));
        p.validate(0.0).unwrap();
    }

    #[test]
    fn vitali_is_deterministic() {
        let c = Container::Polygon(ConvexPolygon::unit_square());
        let a = vitali_random(c.clone(), 0.5, 11).unwrap();
        let b = vitali_random(c.clone(), 0.5, 11).unwrap();
        assert_eq!(a, b);
        assert!(a.covered_fraction() >= 0.5);
        a.validate(0.0).unwrap();
        assert_eq!(vitali_random(c, 1e-9, 1).unwrap().disks.len(), 1);
    }

    #[test]
    fn shard_potential_vanishes_on_shape() {
        let domain = ConvexPolygon::regular(Point::zeros(), 1.0, 32);
        let shape = ConvexPolygon::rect(-0.3, -0.2, 0.25, 0.3);
        let levels = 6;
        let pot = arbitrary_shard_potential(&domain, &shape, levels).unwrap();
        for v in shape.vertices() {
            assert_abs_diff_eq!(pot.eval(v), 0.0, epsilon = 1e-12);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..2000 {
            let x = Point::new(rng.gen_range(-0.7..0.7), rng.gen_range(-0.7..0.7));
            let d = shape.distance(&x);
            if d == 0.0 {
                assert_abs_diff_eq!(pot.eval(&x), 0.0, epsilon = 1e-12);
            } else if d > 2.0 / levels as f64 {
                assert!(pot.eval(&x) > 0.0);
            }
        }
        let same = arbitrary_shard_potential(&domain, &domain, 3).unwrap();
        assert_abs_diff_eq!(same.eval(&Point::new(0.5, 0.1)), 0.0, epsilon = 1e-12);
        assert!(matches!(
            arbitrary_shard_potential(&domain, &ConvexPolygon::rect(0.1, 0.1, 0.2, 0.2), 2),
            Err(PackingError::ShapeNotInterior)
        ));
    }
}
