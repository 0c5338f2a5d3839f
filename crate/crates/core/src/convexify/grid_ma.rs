use std::collections::VecDeque;

use rayon::prelude::*;

use super::grid::{Axis, GridError, GridFunction};
use super::legendre::convexify_with;
use super::{touching_set, TouchingClassification};
use crate::geom2d::{ConvexPolygon, Point};
use crate::measure::{AcPart, Atom, MeasureDecomposition, Support};

#[derive(Clone, Debug, PartialEq)]
pub struct GridOptions {
    /// Nodes per axis.
    pub n: usize,
    /// Histogram bins per axis.
    pub bins: usize,
    /// Bins with density above this multiple of 1 carry singular mass.
    pub singular_threshold: f64,
    /// Singular components with at most this many bins become atoms.
    pub max_atom_bins: usize,
    /// Slope nodes per grid node in the Legendre transforms.
    pub slope_refine: usize,
    /// Touching tolerance for `ψ − ψ**`.
    pub eps_touch: f64,
}

impl Default for GridOptions {
    fn default() -> Self {
        Self {
            n: 512,
            bins: 128,
            singular_threshold: 8.0,
            max_atom_bins: 4,
            slope_refine: 2,
            eps_touch: 1e-7,
        }
    }
}

/// Mass histogram of `κ_t` on a uniform bin grid, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Histogram2d {
    pub origin: Point,
    pub width: [f64; 2],
    pub bins: [usize; 2],
    pub mass: Vec<f64>,
}

impl Histogram2d {
    pub fn bin_area(&self) -> f64 {
        self.width[0] * self.width[1]
    }

    pub fn bin_center(&self, i: usize, j: usize) -> Point {
        self.origin + Point::new((i as f64 + 0.5) * self.width[0], (j as f64 + 0.5) * self.width[1])
    }

    pub fn bin_rect(&self, i: usize, j: usize) -> ConvexPolygon {
        let lo = self.origin + Point::new(i as f64 * self.width[0], j as f64 * self.width[1]);
        ConvexPolygon::rect(lo.x, lo.y, lo.x + self.width[0], lo.y + self.width[1])
    }

    pub fn density(&self, i: usize, j: usize) -> f64 {
        self.mass[i * self.bins[1] + j] / self.bin_area()
    }

    fn locate(&self, x: &Point) -> (usize, usize) {
        let i = ((x.x - self.origin.x) / self.width[0]).floor().max(0.0) as usize;
        let j = ((x.y - self.origin.y) / self.width[1]).floor().max(0.0) as usize;
        (i.min(self.bins[0] - 1), j.min(self.bins[1] - 1))
    }
}

#[derive(Clone, Debug)]
pub struct GridMongeAmpere {
    pub decomposition: MeasureDecomposition,
    pub histogram: Histogram2d,
    pub psi: GridFunction,
    pub psi_cc: GridFunction,
    pub touching: TouchingClassification,
}

/// Finite-difference gradient at a mask node; `fallback` along axes with no
/// finite neighbor.
fn gradient(f: &GridFunction, idx: usize, fallback: Point) -> Point {
    let nb = f.neighbors(idx);
    let mut g = [fallback.x, fallback.y];
    for a in 0..2 {
        let (prev, next) = (nb[2 * a], nb[2 * a + 1]);
        let ok = |k: Option<usize>| k.filter(|&k| f.values[k].is_finite());
        let h = f.spacing[a];
        g[a] = match (ok(prev), ok(next)) {
            (Some(p), Some(n)) => (f.values[n] - f.values[p]) / (2.0 * h),
            (None, Some(n)) => (f.values[n] - f.values[idx]) / h,
            (Some(p), None) => (f.values[idx] - f.values[p]) / h,
            (None, None) => g[a],
        };
    }
    Point::new(g[0], g[1])
}

/// Monge-Ampère measure of `ψ_t = ½|y|² + t·φ` on a grid over `domain`:
/// convexify, push node masses forward by `∇ψ_t**`, and split the histogram
/// into a density part and singular mass above the density-1 background.
pub fn monge_ampere_grid(
    phi: &(dyn Fn(&Point) -> f64 + Sync),
    domain: &ConvexPolygon,
    t: f64,
    opts: &GridOptions,
) -> Result<GridMongeAmpere, GridError> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(GridError::Invalid(format!("time must be finite and >= 0, got {t}")));
    }
    if opts.n < 3 || opts.bins < 1 {
        return Err(GridError::Invalid("grid needs n >= 3 and bins >= 1".into()));
    }
    let bb = domain
        .bbox()
        .ok_or_else(|| GridError::Invalid("empty domain".into()))?;
    let axes = [
        Axis::spanning(bb.min.x, bb.max.x, opts.n),
        Axis::spanning(bb.min.y, bb.max.y, opts.n),
    ];
    let nodes: Vec<Point> = (0..opts.n * opts.n)
        .map(|k| Point::new(axes[0].node(k / opts.n), axes[1].node(k % opts.n)))
        .collect();
    let phis: Vec<f64> = nodes
        .par_iter()
        .map(|y| if domain.contains(y, 1e-12) { phi(y) } else { f64::INFINITY })
        .collect();
    let psi_vals = nodes
        .iter()
        .zip(&phis)
        .map(|(y, p)| if p.is_finite() { 0.5 * y.norm_squared() + t * p } else { f64::INFINITY })
        .collect();
    let psi = GridFunction::new(&axes, psi_vals)?;
    let phi_grid = GridFunction { values: phis, ..psi.clone() };
    let psi_cc = convexify_with(&psi, opts.slope_refine);
    let touching = touching_set(&psi, &psi_cc, opts.eps_touch)?;

    let mask: Vec<usize> = (0..nodes.len()).filter(|&k| psi.values[k].is_finite()).collect();
    if mask.is_empty() {
        return Err(GridError::Invalid("no grid node inside the domain".into()));
    }
    let grads: Vec<Point> = mask.par_iter().map(|&k| gradient(&psi_cc, k, psi_cc.coords(k))).collect();
    let (mut lo, mut hi) = (grads[0], grads[0]);
    for g in &grads {
        lo = lo.inf(g);
        hi = hi.sup(g);
    }
    let pad = 1e-9 * (1.0 + (hi - lo).amax());
    let span = [(hi.x - lo.x).max(0.0) + 2.0 * pad, (hi.y - lo.y).max(0.0) + 2.0 * pad];
    let width = [span[0] / opts.bins as f64, span[1] / opts.bins as f64];

    if t > 0.0 {
        // velocity spread from finite differences of φ
        let vel: Vec<Point> = mask
            .par_iter()
            .map(|&k| gradient(&phi_grid, k, Point::zeros()))
            .collect();
        let mut vlo = vel[0];
        let mut vhi = vel[0];
        for v in &vel {
            vlo = vlo.inf(v);
            vhi = vhi.sup(v);
        }
        let bins_spanned = (0..2)
            .map(|a| t * (vhi[a] - vlo[a]) / width[a])
            .fold(0.0, f64::max);
        if bins_spanned > 1e-9 && bins_spanned < 4.0 {
            return Err(GridError::GridTooCoarse(bins_spanned));
        }
    }

    let mut hist = Histogram2d {
        origin: lo - Point::new(pad, pad),
        width,
        bins: [opts.bins, opts.bins],
        mass: vec![0.0; opts.bins * opts.bins],
    };
    let scale = domain.area() / mask.len() as f64;
    let mut first_moment = vec![Point::zeros(); hist.mass.len()];
    for g in &grads {
        let (i, j) = hist.locate(g);
        hist.mass[i * opts.bins + j] += scale;
        first_moment[i * opts.bins + j] += g * scale;
    }

    let area = hist.bin_area();
    let nb = opts.bins;
    let singular: Vec<bool> = hist
        .mass
        .iter()
        .map(|m| *m > opts.singular_threshold * area)
        .collect();
    let mut dec = MeasureDecomposition::default();
    for i in 0..nb {
        for j in 0..nb {
            let m = hist.mass[i * nb + j];
            if m <= 0.0 {
                continue;
            }
            let ac = if singular[i * nb + j] { area } else { m };
            dec.ac_parts.push(AcPart {
                support: Support::Polygon(hist.bin_rect(i, j)),
                density: ac / area,
            });
        }
    }
    let mut seen = vec![false; nb * nb];
    for start in 0..nb * nb {
        if !singular[start] || seen[start] {
            continue;
        }
        let mut comp = Vec::new();
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(k) = queue.pop_front() {
            comp.push(k);
            let (i, j) = ((k / nb) as isize, (k % nb) as isize);
            for di in -1..=1 {
                for dj in -1..=1 {
                    let (a, b) = (i + di, j + dj);
                    if a < 0 || b < 0 || a >= nb as isize || b >= nb as isize {
                        continue;
                    }
                    let q = a as usize * nb + b as usize;
                    if singular[q] && !seen[q] {
                        seen[q] = true;
                        queue.push_back(q);
                    }
                }
            }
        }
        let excess = |k: usize| hist.mass[k] - area;
        let centroid = |k: usize| first_moment[k] / hist.mass[k];
        if comp.len() <= opts.max_atom_bins {
            let mass: f64 = comp.iter().map(|&k| excess(k)).sum();
            let loc = comp.iter().map(|&k| centroid(k) * excess(k)).sum::<Point>() / mass;
            dec.atoms.push(Atom { location: loc, mass });
        } else {
            for &k in &comp {
                dec.singular_diffuse_mass += excess(k);
                dec.diffuse_support.push(Atom {
                    location: centroid(k),
                    mass: excess(k),
                });
            }
        }
    }
    Ok(GridMongeAmpere {
        decomposition: dec,
        histogram: hist,
        psi,
        psi_cc,
        touching,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn square() -> ConvexPolygon {
        ConvexPolygon::rect(-1.0, -1.0, 1.0, 1.0)
    }

    #[test]
    fn ridge_collapses_strip() {
        let opts = GridOptions { n: 256, bins: 64, ..Default::default() };
        let t = 0.25;
        let r = monge_ampere_grid(&|y: &Point| -y.x.abs(), &square(), t, &opts).unwrap();
        let d = &r.decomposition;
        assert_abs_diff_eq!(d.total_mass(), 4.0, epsilon = 1e-9);
        assert!((d.singular_mass() - 4.0 * t).abs() < 0.05, "{}", d.singular_mass());
        for a in d.point_masses() {
            assert!(a.location.x.abs() < 0.05);
        }
    }

    #[test]
    fn zero_time_is_uniform() {
        let opts = GridOptions { n: 256, bins: 32, ..Default::default() };
        let r = monge_ampere_grid(&|y: &Point| -y.x.abs(), &square(), 0.0, &opts).unwrap();
        assert_eq!(r.decomposition.singular_mass(), 0.0);
        let h = &r.histogram;
        for i in 0..32 {
            for j in 0..32 {
                assert!((h.density(i, j) - 1.0).abs() < 0.3);
            }
        }
    }

    #[test]
    fn too_coarse_is_reported() {
        let opts = GridOptions { n: 64, bins: 16, ..Default::default() };
        let e = monge_ampere_grid(&|y: &Point| -y.x.abs(), &square(), 0.01, &opts);
        assert!(matches!(e, Err(GridError::GridTooCoarse(_))));
    }
}
