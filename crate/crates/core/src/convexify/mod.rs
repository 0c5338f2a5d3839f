//! Legendre transforms, convexification and Monge-Ampère measures.
//!
//! For a potential `φ` on Ω̄ and `t ≥ 0` the transported potential is
//! `ψ_t(y) = ½|y|² + t·φ(y)` on Ω̄ and `+∞` outside. Its convex envelope
//! `ψ_t**` pushes Lebesgue measure on Ω forward to the Monge-Ampère measure
//! `κ_t = (∇ψ_t**)_♯ λ`. Where `ψ_t = ψ_t**` mass moves rigidly by `t·∇φ`;
//! the rest collapses onto a null set.
//!
//! One-dimensional piecewise-affine potentials are handled exactly
//! ([`monge_ampere_1d`]); two-dimensional ones on a grid through the double
//! discrete Legendre transform ([`monge_ampere_grid`]).

mod grid;
mod grid_ma;
mod hopf_lax;
mod hull1d;
mod legendre;

pub use grid::{Axis, GridError, GridFunction};
pub use grid_ma::{monge_ampere_grid, GridMongeAmpere, GridOptions, Histogram2d};
pub use hopf_lax::{hopf_lax, HopfLaxOptions};
pub use hull1d::{hull_1d, monge_ampere_1d, Hull1d, HullSegment, PiecewiseAffine1d, Potential1dError};
pub use legendre::{convexify, convexify_with, legendre_1d, legendre_2d, legendre_at, transform_line};

/// Label of a grid node relative to the touching set `{ψ = ψ**}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Touch {
    /// Touching, and so are all of its grid neighbors.
    Interior,
    /// Touching, with at least one non-touching or outside neighbor.
    Boundary,
    NonTouching,
    /// Outside the domain mask (`ψ = +∞`).
    Outside,
}

impl Touch {
    pub fn is_touching(self) -> bool {
        matches!(self, Touch::Interior | Touch::Boundary)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TouchingClassification {
    pub labels: Vec<Touch>,
    pub dims: Vec<usize>,
}

impl TouchingClassification {
    pub fn count(&self, label: Touch) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    pub fn touching_count(&self) -> usize {
        self.labels.iter().filter(|l| l.is_touching()).count()
    }
}

/// Classify nodes by `ψ − ψ** <= eps_touch`; touching nodes whose axis
/// neighbors all touch are `Interior`.
pub fn touching_set(
    psi: &GridFunction,
    psi_cc: &GridFunction,
    eps_touch: f64,
) -> Result<TouchingClassification, GridError> {
    if psi.dims != psi_cc.dims {
        return Err(GridError::ShapeMismatch);
    }
    let touching: Vec<Option<bool>> = psi
        .values
        .iter()
        .zip(&psi_cc.values)
        .map(|(a, b)| {
            if !a.is_finite() {
                None
            } else {
                Some(a - b <= eps_touch)
            }
        })
        .collect();
    let labels = (0..touching.len())
        .map(|idx| match touching[idx] {
            None => Touch::Outside,
            Some(false) => Touch::NonTouching,
            Some(true) => {
                let all = psi
                    .neighbors(idx)
                    .into_iter()
                    .all(|n| matches!(n.map(|k| touching[k]), Some(Some(true))));
                if all {
                    Touch::Interior
                } else {
                    Touch::Boundary
                }
            }
        })
        .collect();
    Ok(TouchingClassification {
        labels,
        dims: psi.dims.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn convex_is_all_touching() {
        let f = GridFunction::sample_1d(Axis::new(-1.0, 2.0 / 400.0, 401), |z| 0.5 * z * z + 0.3 * z);
        let cc = convexify(&f);
        let tc = touching_set(&f, &cc, 1e-12).unwrap();
        assert_eq!(tc.touching_count(), 401);
        assert_eq!(tc.count(Touch::Boundary), 2);
    }

    #[test]
    fn double_well_non_touching_band() {
        let t = 0.3;
        let n = 801;
        let h = 2.0 / (n - 1) as f64;
        let f = GridFunction::sample_1d(Axis::new(-1.0, h, n), |z| 0.5 * z * z - t * z.abs());
        let cc = convexify(&f);
        let tc = touching_set(&f, &cc, 1e-12).unwrap();
        for (k, l) in tc.labels.iter().enumerate() {
            let z = -1.0 + k as f64 * h;
            if z.abs() < t - h {
                assert_eq!(*l, Touch::NonTouching, "z = {z}");
            } else if z.abs() > t + h {
                assert!(l.is_touching(), "z = {z}");
            }
        }
    }

    #[test]
    fn zero_time_touches_everywhere() {
        let f = GridFunction::sample_2d([Axis::new(0.0, 0.01, 101), Axis::new(0.0, 0.01, 101)], |y| {
            0.5 * y.norm_squared()
        });
        let cc = convexify(&f);
        let tc = touching_set(&f, &cc, 1e-12).unwrap();
        assert_eq!(tc.touching_count(), 101 * 101);
    }
}
