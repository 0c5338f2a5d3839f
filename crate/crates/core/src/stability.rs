//! Truncations of countable mass-velocity data and an empirical check that
//! the transported measures converge as more pairs are kept.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::alexandrov::{solve_weights_with, AlexandrovError, MassVelocity, MassVelocityData, SolverOptions};
use crate::breakflow::{advance_potential, transported_measure, BreakflowError};
use crate::geom2d::{clip_halfplane, BBox, ConvexPolygon, HalfPlane, Point};
use crate::measure::{MeasureDecomposition, Support};

/// Rule producing the `i`-th pair of a countable family.
#[derive(Clone, Debug, PartialEq)]
pub enum Generator {
    /// `m_i ∝ ratioⁱ`, velocities on the Halton sequence in `[−1, 1]²`.
    Geometric { ratio: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct CountableDataSpec {
    pub domain: ConvexPolygon,
    pub generator: Generator,
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let (mut f, mut r) = (1.0, 0.0);
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// Point `i` (from 0) of the 2-3 Halton sequence, mapped to `[−1, 1]²`.
pub fn halton(i: usize) -> Point {
    let k = i as u64 + 1;
    Point::new(2.0 * radical_inverse(k, 2) - 1.0, 2.0 * radical_inverse(k, 3) - 1.0)
}

impl CountableDataSpec {
    pub fn geometric(domain: ConvexPolygon, ratio: f64) -> Self {
        Self {
            domain,
            generator: Generator::Geometric { ratio },
        }
    }

    /// Total mass the truncations are normalized to, `λ(Ω)`.
    pub fn normalization_total(&self) -> f64 {
        self.domain.area()
    }

    /// Unnormalized `i`-th pair.
    pub fn pair(&self, i: usize) -> (f64, Point) {
        match self.generator {
            Generator::Geometric { ratio } => (ratio.powi(i as i32), halton(i)),
        }
    }
}

/// First `n` pairs, masses rescaled to sum to `λ(Ω)`.
pub fn truncate(spec: &CountableDataSpec, n: usize) -> Result<MassVelocityData, AlexandrovError> {
    let n = n.max(1);
    let raw: Vec<(f64, Point)> = (0..n).map(|i| spec.pair(i)).collect();
    let sum: f64 = raw.iter().map(|p| p.0).sum();
    let scale = spec.normalization_total() / sum;
    MassVelocityData::new(
        spec.domain.clone(),
        raw.into_iter().map(|(m, v)| MassVelocity::new(m * scale, v)).collect(),
    )
}

/// Pyramid `f(x) = max(0, min_k (h − n_k·(x − c)))` with `|n_k| ≤ 1` and
/// `h ≤ 1`: 1-Lipschitz and bounded by 1.
#[derive(Clone, Debug, PartialEq)]
pub struct Bump {
    pub center: Point,
    pub height: f64,
    pub normals: Vec<Point>,
    /// Region where face `k` is active and positive.
    faces: Vec<ConvexPolygon>,
}

impl Bump {
    pub fn new(center: Point, height: f64, normals: Vec<Point>) -> Self {
        let reach = normals.iter().map(|n| height / n.norm()).fold(0.0, f64::max) * 4.0 + 1.0;
        let square = ConvexPolygon::rect(center.x - reach, center.y - reach, center.x + reach, center.y + reach);
        let faces = (0..normals.len())
            .map(|k| {
                let nk = normals[k];
                let mut p = clip_halfplane(&square, &HalfPlane::new(nk, height + nk.dot(&center)));
                for (j, nj) in normals.iter().enumerate() {
                    if j != k && (nj - nk).norm_squared() > 0.0 {
                        let d = nj - nk;
                        p = clip_halfplane(&p, &HalfPlane::new(d, d.dot(&center)));
                    }
                }
                p
            })
            .collect();
        Self {
            center,
            height,
            normals,
            faces,
        }
    }

    pub fn eval(&self, x: &Point) -> f64 {
        self.normals
            .iter()
            .map(|n| self.height - n.dot(&(x - self.center)))
            .fold(f64::INFINITY, f64::min)
            .max(0.0)
    }

    fn face_value(&self, k: usize, x: &Point) -> f64 {
        self.height - self.normals[k].dot(&(x - self.center))
    }

    /// `∫_P f` exactly: `f` is affine on each face region.
    pub fn integrate_polygon(&self, poly: &ConvexPolygon) -> f64 {
        self.faces
            .iter()
            .enumerate()
            .map(|(k, face)| {
                let piece = crate::geom2d::intersect(poly, face, &Default::default());
                match piece.centroid() {
                    Some(c) => piece.area() * self.face_value(k, &c),
                    None => 0.0,
                }
            })
            .sum()
    }

    /// `∫ f` along the segment `[a, b] × {0}`.
    pub fn integrate_interval(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        self.faces
            .iter()
            .enumerate()
            .map(|(k, face)| {
                let (mut lo, mut hi) = (a, b);
                for hp in face.halfplanes() {
                    // n·(x, 0) <= offset
                    let (nx, off) = (hp.normal.x, hp.offset);
                    if nx.abs() < 1e-300 {
                        if off < 0.0 {
                            return 0.0;
                        }
                    } else if nx > 0.0 {
                        hi = hi.min(off / nx);
                    } else {
                        lo = lo.max(off / nx);
                    }
                }
                if hi <= lo {
                    0.0
                } else {
                    (hi - lo) * self.face_value(k, &Point::new(0.5 * (lo + hi), 0.0))
                }
            })
            .sum()
    }

    pub fn integrate(&self, m: &MeasureDecomposition) -> f64 {
        let ac: f64 = m
            .ac_parts
            .iter()
            .map(|p| {
                p.density
                    * match &p.support {
                        Support::Interval(a, b) => self.integrate_interval(*a, *b),
                        Support::Polygon(poly) => self.integrate_polygon(poly),
                    }
            })
            .sum();
        ac + m.point_masses().map(|a| a.mass * self.eval(&a.location)).sum::<f64>()
    }
}

/// Fixed family of bumps with centers in a region.
#[derive(Clone, Debug, PartialEq)]
pub struct BlDictionary {
    pub bumps: Vec<Bump>,
}

impl BlDictionary {
    pub fn new(region: &BBox, count: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sample = |lo: f64, hi: f64, rng: &mut ChaCha8Rng| if hi > lo { rng.gen_range(lo..hi) } else { lo };
        let bumps = (0..count)
            .map(|_| {
                let c = Point::new(
                    sample(region.min.x, region.max.x, &mut rng),
                    sample(region.min.y, region.max.y, &mut rng),
                );
                let h = rng.gen_range(0.5..1.0);
                let faces = rng.gen_range(3..=6);
                let phase = rng.gen_range(0.0..std::f64::consts::TAU);
                let normals = (0..faces)
                    .map(|k| {
                        let a = phase
                            + std::f64::consts::TAU * k as f64 / faces as f64
                            + rng.gen_range(-0.25..0.25) / faces as f64;
                        rng.gen_range(0.5..1.0) * Point::new(a.cos(), a.sin())
                    })
                    .collect();
                Bump::new(c, h, normals)
            })
            .collect();
        Self { bumps }
    }

    pub fn distance(&self, a: &MeasureDecomposition, b: &MeasureDecomposition) -> f64 {
        self.bumps
            .par_iter()
            .map(|f| (f.integrate(a) - f.integrate(b)).abs())
            .reduce(|| 0.0, f64::max)
    }
}

/// Default dictionary size.
pub const BL_TEST_FUNCTIONS: usize = 64;

fn support_bbox(m: &MeasureDecomposition) -> Option<BBox> {
    let mut out: Option<BBox> = None;
    let mut add = |b: BBox| out = Some(out.map_or(b, |o| o.union(&b)));
    for p in &m.ac_parts {
        match &p.support {
            Support::Interval(a, b) => add(BBox {
                min: Point::new(*a, 0.0),
                max: Point::new(*b, 0.0),
            }),
            Support::Polygon(poly) => {
                if let Some(b) = poly.bbox() {
                    add(b)
                }
            }
        }
    }
    for a in m.point_masses() {
        add(BBox {
            min: a.location,
            max: a.location,
        });
    }
    out
}

/// Bounded-Lipschitz surrogate: largest gap between the integrals of `a`
/// and `b` over `test_functions` random pyramids centered near their joint
/// support. Deterministic given the seed.
pub fn bl_distance(a: &MeasureDecomposition, b: &MeasureDecomposition, test_functions: usize, seed: u64) -> f64 {
    let region = match (support_bbox(a), support_bbox(b)) {
        (Some(x), Some(y)) => x.union(&y),
        (Some(x), None) | (None, Some(x)) => x,
        (None, None) => return 0.0,
    };
    let region = BBox {
        min: region.min - Point::new(0.5, 0.5),
        max: region.max + Point::new(0.5, 0.5),
    };
    BlDictionary::new(&region, test_functions, seed).distance(a, b)
}

#[derive(Debug, thiserror::Error)]
pub enum StabilityError {
    #[error(transparent)]
    Solver(#[from] AlexandrovError),
    #[error(transparent)]
    Flow(#[from] BreakflowError),
    #[error("need at least one truncation size")]
    NoSizes,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StabilityRow {
    pub n: usize,
    pub distance: f64,
    pub solver_residual: f64,
    pub wall_time: f64,
}

#[derive(Clone, Debug)]
pub struct StabilityOptions {
    pub solver: SolverOptions,
    pub test_functions: usize,
    pub seed: u64,
}

impl Default for StabilityOptions {
    fn default() -> Self {
        Self {
            solver: SolverOptions::default(),
            test_functions: BL_TEST_FUNCTIONS,
            seed: 0,
        }
    }
}

/// For each `n`: solve the truncated problem, advance to `t`, and measure
/// the distance of `κₜⁿ` to the transported measure of the largest `n`.
pub fn stability_experiment(
    spec: &CountableDataSpec,
    ns: &[usize],
    t: f64,
    opts: &StabilityOptions,
) -> Result<Vec<StabilityRow>, StabilityError> {
    let n_ref = *ns.iter().max().ok_or(StabilityError::NoSizes)?;
    let mut distinct: Vec<usize> = ns.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    let mut solved = Vec::with_capacity(distinct.len());
    for &n in &distinct {
        let start = Instant::now();
        let data = truncate(spec, n)?;
        let report = solve_weights_with(&data, &opts.solver)?;
        let scene = advance_potential(&report.potential, t)?;
        let measure = transported_measure(&scene)?;
        solved.push((n, measure, report.residual, start.elapsed().as_secs_f64()));
    }
    let find = |n: usize| solved.iter().find(|s| s.0 == n).expect("solved");
    // region: the domain swept by the largest velocity
    let vmax = (0..n_ref).map(|i| spec.pair(i).1.norm()).fold(0.0, f64::max);
    let bb = spec.domain.bbox().expect("nonempty domain");
    let pad = Point::new(t * vmax, t * vmax);
    let dict = BlDictionary::new(
        &BBox {
            min: bb.min - pad,
            max: bb.max + pad,
        },
        opts.test_functions,
        opts.seed,
    );
    let reference = &find(n_ref).1;
    Ok(ns
        .iter()
        .map(|&n| {
            let s = find(n);
            StabilityRow {
                n,
                distance: if n == n_ref { 0.0 } else { dict.distance(&s.1, reference) },
                solver_residual: s.2,
                wall_time: s.3,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{AcPart, Atom};
    use approx::assert_abs_diff_eq;

    fn interval(a: f64, b: f64) -> MeasureDecomposition {
        MeasureDecomposition {
            ac_parts: vec![AcPart {
                support: Support::Interval(a, b),
                density: 1.0,
            }],
            ..Default::default()
        }
    }

    fn atom(x: f64) -> MeasureDecomposition {
        MeasureDecomposition {
            atoms: vec![Atom {
                location: Point::new(x, 0.0),
                mass: 1.0,
            }],
            ..Default::default()
        }
    }

    #[test]
    fn geometric_truncation() {
        let spec = CountableDataSpec::geometric(ConvexPolygon::unit_square(), 0.5);
        let d = truncate(&spec, 3).unwrap();
        let m = d.masses();
        assert_abs_diff_eq!(m[0], 4.0 / 7.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m[1], 2.0 / 7.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m[2], 1.0 / 7.0, epsilon = 1e-15);
        assert_eq!(truncate(&spec, 1).unwrap().masses(), vec![1.0]);
    }

    #[test]
    fn quadrature_matches_sampling() {
        let dict = BlDictionary::new(
            &BBox {
                min: Point::new(0.0, 0.0),
                max: Point::new(1.0, 1.0),
            },
            8,
            3,
        );
        let poly = ConvexPolygon::regular(Point::new(0.4, 0.5), 0.6, 7);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for f in &dict.bumps {
            let exact = f.integrate_polygon(&poly);
            let n = 200_000;
            let mc: f64 = (0..n)
                .map(|_| crate::breakflow::sample_polygon(&poly, &mut rng))
                .map(|x| f.eval(&x))
                .sum::<f64>()
                / n as f64
                * poly.area();
            assert!((exact - mc).abs() < 5e-3, "{exact} vs {mc}");
            // 1D: fine Riemann sum
            let m = 100_000;
            let riemann: f64 = (0..m)
                .map(|k| f.eval(&Point::new(-0.5 + 2.0 * (k as f64 + 0.5) / m as f64, 0.0)))
                .sum::<f64>()
                * 2.0
                / m as f64;
            assert_abs_diff_eq!(f.integrate_interval(-0.5, 1.5), riemann, epsilon = 1e-6);
        }
    }

    #[test]
    fn distance_basics() {
        let a = interval(0.0, 1.0);
        assert_eq!(bl_distance(&a, &a, 64, 0), 0.0);
        let delta = 0.01;
        let d = bl_distance(&a, &interval(delta, 1.0 + delta), 64, 0);
        assert!(d >= delta / 4.0 && d <= delta + 1e-12, "{d}");
        let d = bl_distance(&atom(0.0), &atom(delta), 64, 0);
        assert!(d > 0.0 && d <= delta + 1e-12);
    }

    #[test]
    fn duplicates_and_zero_time() {
        let spec = CountableDataSpec::geometric(ConvexPolygon::unit_square(), 0.8);
        let rows = stability_experiment(&spec, &[3, 3], 1.0, &StabilityOptions::default()).unwrap();
        assert!(rows.iter().all(|r| r.distance == 0.0));
        let rows = stability_experiment(&spec, &[2, 5, 9], 0.0, &StabilityOptions::default()).unwrap();
        assert!(rows.iter().all(|r| r.distance < 1e-12));
    }
}
