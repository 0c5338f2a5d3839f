use rayon::prelude::*;

use super::grid::{Axis, GridFunction};
use crate::geom2d::Point;

/// Discrete Legendre transform of one line of samples:
/// `out[m] = max_k x_m·z_k − f_k`, in `O(n + m)` via the lower convex hull.
///
/// `+∞` samples are ignored; an all-`+∞` line gives `−∞` everywhere and any
/// `−∞` sample gives `+∞` everywhere.
pub fn transform_line(z: Axis, f: &[f64], x: Axis) -> Vec<f64> {
    debug_assert_eq!(z.n, f.len());
    if f.contains(&f64::NEG_INFINITY) {
        return vec![f64::INFINITY; x.n];
    }
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(f.len());
    for (k, &fk) in f.iter().enumerate() {
        if !fk.is_finite() {
            continue;
        }
        let p = (z.node(k), fk);
        while hull.len() >= 2 {
            let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            // drop b when it lies on or above segment a-p
            if (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0) <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    if hull.is_empty() {
        return vec![f64::NEG_INFINITY; x.n];
    }
    let mut out = Vec::with_capacity(x.n);
    let mut j = 0;
    let step = if x.spacing >= 0.0 { 1 } else { -1 };
    let order: Vec<usize> = if step > 0 {
        (0..x.n).collect()
    } else {
        (0..x.n).rev().collect()
    };
    out.resize(x.n, 0.0);
    for m in order {
        let xm = x.node(m);
        while j + 1 < hull.len() {
            let (a, b) = (hull[j], hull[j + 1]);
            if xm * b.0 - b.1 >= xm * a.0 - a.1 {
                j += 1;
            } else {
                break;
            }
        }
        out[m] = xm * hull[j].0 - hull[j].1;
    }
    out
}

/// Range of the finite differences of `f` along axis `a`.
fn slope_range(f: &GridFunction, a: usize) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let h = f.spacing[a];
    let mut visit = |u: f64, v: f64| {
        if u.is_finite() && v.is_finite() {
            let s = (v - u) / h;
            lo = lo.min(s);
            hi = hi.max(s);
        }
    };
    match (f.ndim(), a) {
        (1, _) => f.values.windows(2).for_each(|w| visit(w[0], w[1])),
        (_, 0) => {
            let n1 = f.dims[1];
            for i in 0..f.dims[0].saturating_sub(1) {
                for j in 0..n1 {
                    visit(f.values[i * n1 + j], f.values[(i + 1) * n1 + j]);
                }
            }
        }
        _ => f
            .values
            .chunks(f.dims[1])
            .for_each(|row| row.windows(2).for_each(|w| visit(w[0], w[1]))),
    }
    if !lo.is_finite() {
        lo = -1.0;
        hi = 1.0;
    }
    if hi - lo < 1e-12 {
        lo -= 1.0;
        hi += 1.0;
    }
    (lo, hi)
}

/// Slope axis covering the finite differences of `f` along axis `a`.
fn slope_axis(f: &GridFunction, a: usize, n: usize) -> Axis {
    let (lo, hi) = slope_range(f, a);
    Axis::spanning(lo, hi, n.max(2))
}

/// Like [`slope_axis`] but with the ends rounded outward to a dyadic lattice
/// an eighth of the range wide, so nearby ranges share one axis.
fn snapped_slope_axis(f: &GridFunction, a: usize, n: usize) -> Axis {
    let (lo, hi) = slope_range(f, a);
    let q = 2f64.powi((hi - lo).log2().floor() as i32 - 3);
    Axis::spanning((lo / q).floor() * q, (hi / q).ceil() * q, n.max(2))
}

/// Legendre transform of a 1D grid function onto `out` (default: the
/// finite-difference slope range with as many nodes as the input).
pub fn legendre_1d(f: &GridFunction, out: Option<Axis>) -> GridFunction {
    assert_eq!(f.ndim(), 1, "legendre_1d needs a 1D grid");
    let x = out.unwrap_or_else(|| slope_axis(f, 0, f.dims[0]));
    let values = transform_line(f.axis(0), &f.values, x);
    GridFunction::new(&[x], values).expect("valid output axis")
}

/// Legendre transform of a 2D grid function as two nested 1D transforms.
pub fn legendre_2d(f: &GridFunction, out: Option<[Axis; 2]>) -> GridFunction {
    assert_eq!(f.ndim(), 2, "legendre_2d needs a 2D grid");
    let [x0, x1] = out.unwrap_or_else(|| [slope_axis(f, 0, f.dims[0]), slope_axis(f, 1, f.dims[1])]);
    legendre_2d_onto(f, x0, x1)
}

fn legendre_2d_onto(f: &GridFunction, x0: Axis, x1: Axis) -> GridFunction {
    let (z0, z1) = (f.axis(0), f.axis(1));
    // g[i][j] = sup_{z1} x1_j z1 − f(z0_i, z1)
    let g: Vec<Vec<f64>> = f
        .values
        .par_chunks(z1.n)
        .map(|row| transform_line(z1, row, x1))
        .collect();
    // out[m][j] = sup_{z0} x0_m z0 + g[z0][j]
    let cols: Vec<Vec<f64>> = (0..x1.n)
        .into_par_iter()
        .map(|j| {
            let col: Vec<f64> = g.iter().map(|r| -r[j]).collect();
            transform_line(z0, &col, x0)
        })
        .collect();
    let mut values = vec![0.0; x0.n * x1.n];
    for (j, col) in cols.iter().enumerate() {
        for (m, v) in col.iter().enumerate() {
            values[m * x1.n + j] = *v;
        }
    }
    GridFunction::new(&[x0, x1], values).expect("valid output axes")
}

/// Exact discrete Legendre transform at one point, `max_k x·z_k − f_k`.
pub fn legendre_at(f: &GridFunction, x: &Point) -> f64 {
    let x = if f.ndim() == 1 { Point::new(x.x, 0.0) } else { *x };
    (0..f.values.len())
        .filter(|&k| f.values[k].is_finite())
        .map(|k| x.dot(&f.coords(k)) - f.values[k])
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Exact discrete envelope of one line: lower hull interpolated at the nodes.
fn hull_line(z: Axis, f: &[f64]) -> Vec<f64> {
    let mut hull: Vec<(f64, f64)> = Vec::new();
    for (k, &fk) in f.iter().enumerate() {
        if !fk.is_finite() {
            continue;
        }
        let p = (z.node(k), fk);
        while hull.len() >= 2 {
            let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            if (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0) <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    let mut j = 0;
    (0..f.len())
        .map(|k| {
            let zk = z.node(k);
            while j + 1 < hull.len() && hull[j + 1].0 <= zk {
                j += 1;
            }
            match hull.get(j + 1) {
                Some(&(z1, f1)) if hull[j].0 < zk => {
                    let (z0, f0) = hull[j];
                    f0 + (f1 - f0) * (zk - z0) / (z1 - z0)
                }
                _ => hull.get(j).map_or(f64::INFINITY, |h| h.1),
            }
        })
        .collect()
}

/// Lower convex envelope `f**` on the grid of `f`, restricted to the mask.
/// One-dimensional grids use the exact hull; two-dimensional ones the double
/// discrete Legendre transform over a slope grid fitted to the result.
pub fn convexify(f: &GridFunction) -> GridFunction {
    convexify_with(f, 2)
}

/// Double transforms before giving up on a stable slope grid.
const MAX_SLOPE_PASSES: usize = 8;

/// [`convexify`] with `refine` slope nodes per grid node along each axis.
///
/// In 2D the double transform is repeated with the slope grid of the previous
/// result until that grid stops changing. The double transform over a fixed
/// slope grid is idempotent, so the output is a fixed point of this function.
pub fn convexify_with(f: &GridFunction, refine: usize) -> GridFunction {
    let refine = refine.max(1);
    if f.ndim() == 1 {
        return clamp_below(hull_line(f.axis(0), &f.values), f);
    }
    let slopes = |g: &GridFunction| {
        [
            snapped_slope_axis(g, 0, refine * g.dims[0]),
            snapped_slope_axis(g, 1, refine * g.dims[1]),
        ]
    };
    let mut axes = slopes(f);
    let mut current = f.clone();
    for _ in 0..MAX_SLOPE_PASSES {
        let fs = legendre_2d_onto(&current, axes[0], axes[1]);
        let back = legendre_2d_onto(&fs, f.axis(0), f.axis(1)).values;
        current = clamp_below(back, &current);
        let next = slopes(&current);
        if next == axes {
            break;
        }
        axes = next;
    }
    current
}

fn clamp_below(back: Vec<f64>, f: &GridFunction) -> GridFunction {
    let values = back
        .into_iter()
        .zip(&f.values)
        .map(|(c, &v)| if v.is_finite() { c.min(v) } else { f64::INFINITY })
        .collect();
    GridFunction {
        values,
        ..f.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn quadratic_is_self_dual() {
        let z = Axis::spanning(-2.0, 2.0, 2001);
        let f = GridFunction::sample_1d(z, |z| 0.5 * z * z);
        let fs = legendre_1d(&f, Some(Axis::spanning(-1.0, 1.0, 101)));
        for (k, v) in fs.values.iter().enumerate() {
            let x = fs.axis(0).node(k);
            assert_abs_diff_eq!(*v, 0.5 * x * x, epsilon = 1e-6);
        }
    }

    #[test]
    fn indicator_gives_abs() {
        let z = Axis::spanning(-1.0, 1.0, 201);
        let f = GridFunction::sample_1d(z, |_| 0.0);
        let fs = legendre_1d(&f, Some(Axis::spanning(-3.0, 3.0, 61)));
        for (k, v) in fs.values.iter().enumerate() {
            let x = fs.axis(0).node(k);
            assert_abs_diff_eq!(*v, x.abs(), epsilon = 1e-12);
        }
    }

    #[test]
    fn infinite_samples_are_ignored() {
        let z = Axis::spanning(-2.0, 2.0, 401);
        let f = GridFunction::sample_1d(z, |z| if z.abs() <= 1.0 { 0.0 } else { f64::INFINITY });
        let fs = legendre_1d(&f, Some(Axis::spanning(-2.0, 2.0, 41)));
        for (k, v) in fs.values.iter().enumerate() {
            assert_abs_diff_eq!(*v, fs.axis(0).node(k).abs(), epsilon = 1e-12);
        }
        let empty = GridFunction::sample_1d(z, |_| f64::INFINITY);
        assert!(legendre_1d(&empty, None).values.iter().all(|v| *v == f64::NEG_INFINITY));
    }

    #[test]
    fn two_dimensional_matches_brute_force() {
        let ax = [Axis::spanning(-1.0, 1.0, 41), Axis::spanning(-0.5, 1.5, 37)];
        let f = GridFunction::sample_2d(ax, |y| {
            if y.norm() > 1.1 {
                f64::INFINITY
            } else {
                0.5 * y.norm_squared() + (3.0 * y.x).sin() * 0.2 - y.y.abs() * 0.3
            }
        });
        let out = [Axis::spanning(-2.0, 2.0, 23), Axis::spanning(-1.0, 2.0, 19)];
        let fs = legendre_2d(&f, Some(out));
        for k in 0..fs.values.len() {
            let x = fs.coords(k);
            assert_abs_diff_eq!(fs.values[k], legendre_at(&f, &x), epsilon = 1e-12);
        }
    }

    #[test]
    fn convexify_is_below_and_idempotent() {
        let z = Axis::spanning(-1.0, 1.0, 301);
        let f = GridFunction::sample_1d(z, |z| (5.0 * z).sin() + 0.3 * z * z);
        let c = convexify(&f);
        assert!(c.values.iter().zip(&f.values).all(|(a, b)| a <= b));
        let cc = convexify(&c);
        for (a, b) in cc.values.iter().zip(&c.values) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
        // discrete convexity
        for w in c.values.windows(3) {
            assert!(w[0] + w[2] - 2.0 * w[1] >= -1e-9);
        }
    }

    #[test]
    fn two_dimensional_convexify_is_idempotent() {
        let ax = Axis::spanning(-1.0, 1.0, 64);
        let f = GridFunction::sample_2d([ax, ax], |y| (3.0 * y.x).sin() * (2.0 * y.y).cos());
        let cc = convexify(&f);
        assert!(cc.values.iter().zip(&f.values).all(|(c, v)| c <= v));
        for (a, b) in convexify(&cc).values.iter().zip(&cc.values) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }
}
