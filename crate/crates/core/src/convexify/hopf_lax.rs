use rayon::prelude::*;

use crate::geom2d::{ConvexPolygon, Point};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HopfLaxOptions {
    /// Coarse grid nodes per axis.
    pub coarse: usize,
    /// Pattern-search halvings after the coarse scan.
    pub refine_steps: usize,
}

impl Default for HopfLaxOptions {
    fn default() -> Self {
        Self {
            coarse: 256,
            refine_steps: 20,
        }
    }
}

/// `u(x, t) = min_{z ∈ Ω̄} |x − z|²/(2t) + φ(z)` with its minimizer, by a
/// coarse grid scan followed by a compass search. At `t = 0` returns `φ(x)`.
pub fn hopf_lax(
    phi: &(dyn Fn(&Point) -> f64 + Sync),
    domain: &ConvexPolygon,
    x: &Point,
    t: f64,
    opts: &HopfLaxOptions,
) -> Option<(f64, Point)> {
    if t <= 0.0 {
        return domain.contains(x, 1e-12).then(|| (phi(x), *x));
    }
    let bb = domain.bbox()?;
    let n = opts.coarse.max(2);
    let obj = |z: &Point| (x - z).norm_squared() / (2.0 * t) + phi(z);
    let step = Point::new(
        (bb.max.x - bb.min.x) / (n - 1) as f64,
        (bb.max.y - bb.min.y) / (n - 1) as f64,
    );
    let (mut best, mut z) = (0..n * n)
        .into_par_iter()
        .filter_map(|k| {
            let z = bb.min + Point::new((k / n) as f64 * step.x, (k % n) as f64 * step.y);
            domain.contains(&z, 1e-12).then(|| (obj(&z), z))
        })
        .min_by(|a, b| a.0.total_cmp(&b.0))?;
    let mut h = step;
    for _ in 0..opts.refine_steps {
        let mut moved = true;
        while moved {
            moved = false;
            for d in [Point::new(h.x, 0.0), Point::new(-h.x, 0.0), Point::new(0.0, h.y), Point::new(0.0, -h.y)] {
                let c = z + d;
                if !domain.contains(&c, 1e-12) {
                    continue;
                }
                let v = obj(&c);
                if v < best {
                    best = v;
                    z = c;
                    moved = true;
                }
            }
        }
        h *= 0.5;
    }
    Some((best, z))
}
