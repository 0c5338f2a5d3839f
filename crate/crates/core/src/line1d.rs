//! Cantor-function flows on the line.
//!
//! The velocity `c` (the Cantor function) is constant on each removed middle
//! third `A_i`, so `X_t(z) = z + t·c(z)` translates the gaps apart and
//! stretches the Cantor set into a fat Cantor set of measure `t`. Everything
//! here works with the depth-`n` truncation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::convexify::PiecewiseAffine1d;

/// Largest supported truncation depth.
pub const MAX_DEPTH: usize = 30;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum CantorError {
    #[error("argument {0} outside [0, 1]")]
    OutOfDomain(f64),
    #[error("depth {0} exceeds the supported maximum {MAX_DEPTH}")]
    DepthTooLarge(usize),
    #[error("time must be positive, got {0}")]
    NonPositiveTime(f64),
}

/// Depth-`n` Cantor function: constant on the gaps of depth ≤ `n`, linear on
/// the `2ⁿ` kept intervals. Within `2⁻ⁿ` of the Cantor function.
pub fn cantor_function(z: f64, depth: usize) -> Result<f64, CantorError> {
    if !(0.0..=1.0).contains(&z) {
        return Err(CantorError::OutOfDomain(z));
    }
    Ok(cantor_unchecked(z, depth))
}

fn cantor_unchecked(z: f64, depth: usize) -> f64 {
    let (mut x, mut value, mut scale) = (z, 0.0, 0.5);
    for _ in 0..depth {
        if x < 1.0 / 3.0 {
            x *= 3.0;
        } else if x <= 2.0 / 3.0 {
            return value + scale;
        } else {
            value += scale;
            x = 3.0 * x - 2.0;
        }
        scale *= 0.5;
    }
    value + 2.0 * scale * x.clamp(0.0, 1.0)
}

/// Removed middle third with its Cantor-function value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Gap {
    pub lo: f64,
    pub hi: f64,
    pub value: f64,
}

impl Gap {
    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }
}

/// The `2ⁿ` kept intervals and `2ⁿ − 1` gaps of the depth-`n` construction,
/// left to right.
#[derive(Clone, Debug, PartialEq)]
pub struct CantorApprox {
    pub depth: usize,
    pub kept_intervals: Vec<(f64, f64)>,
    pub gaps: Vec<Gap>,
}

impl CantorApprox {
    pub fn new(depth: usize) -> Result<Self, CantorError> {
        if depth > MAX_DEPTH {
            return Err(CantorError::DepthTooLarge(depth));
        }
        let denom = 3f64.powi(depth as i32);
        let two_n = 1u64 << depth;
        // left ends of kept intervals in units of 3^-n: digits 0/2 in base 3
        let lefts: Vec<u64> = (0..two_n)
            .map(|k| {
                (0..depth).fold(0u64, |acc, bit| {
                    let d = (k >> (depth - 1 - bit)) & 1;
                    acc * 3 + 2 * d
                })
            })
            .collect();
        let kept_intervals = lefts
            .iter()
            .map(|&l| (l as f64 / denom, (l + 1) as f64 / denom))
            .collect();
        let gaps = lefts
            .windows(2)
            .enumerate()
            .map(|(k, w)| Gap {
                lo: (w[0] + 1) as f64 / denom,
                hi: w[1] as f64 / denom,
                value: (k + 1) as f64 / two_n as f64,
            })
            .collect();
        Ok(Self {
            depth,
            kept_intervals,
            gaps,
        })
    }

    pub fn kept_length(&self) -> f64 {
        self.kept_intervals.iter().map(|(a, b)| b - a).sum()
    }

    pub fn gap_length(&self) -> f64 {
        self.gaps.iter().map(Gap::len).sum()
    }
}

/// Gaps translated by `t·vᵢ` and the measure of what remains of `[0, 1+t]`.
#[derive(Clone, Debug, PartialEq)]
pub struct CantorFlow {
    pub t: f64,
    pub approx: CantorApprox,
    pub translated_gaps: Vec<(f64, f64)>,
    pub fat_measure: f64,
}

impl CantorFlow {
    pub fn translated_gap_total(&self) -> f64 {
        self.translated_gaps.iter().map(|(a, b)| b - a).sum()
    }

    /// `λ(𝒞ₜ ∩ (0, x))` for the depth-`n` fat set: `(0, x)` minus the
    /// translated gaps minus the Lebesgue part `3⁻ⁿ` of every kept image
    /// lying wholly below `x`.
    pub fn fat_measure_below(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0 + self.t);
        let k = self.translated_gaps.partition_point(|g| g.1 <= x);
        let full: f64 = self.gap_prefix(k);
        let partial = self
            .translated_gaps
            .get(k)
            .map_or(0.0, |g| (x - g.0).max(0.0));
        let kept_below = self.kept_images_below(x);
        x - full - partial - kept_below as f64 * 3f64.powi(-(self.approx.depth as i32))
    }

    fn gap_prefix(&self, k: usize) -> f64 {
        // gaps are few enough at practical depths for a direct sum
        self.translated_gaps[..k].iter().map(|(a, b)| b - a).sum()
    }

    fn kept_images_below(&self, x: f64) -> usize {
        let n = self.approx.kept_intervals.len();
        let image_hi = |j: usize| {
            let (_, hi) = self.approx.kept_intervals[j];
            hi + self.t * (j + 1) as f64 / n as f64
        };
        let (mut lo, mut hi) = (0, n);
        while lo < hi {
            let mid = (lo + hi) / 2;
            if image_hi(mid) <= x {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        lo
    }
}

/// Translate every depth-`n` gap `Aᵢ` to `Aᵢ + t·vᵢ`.
pub fn cantor_flow(depth: usize, t: f64) -> Result<CantorFlow, CantorError> {
    let approx = CantorApprox::new(depth)?;
    let translated_gaps: Vec<(f64, f64)> = approx
        .gaps
        .iter()
        .map(|g| (g.lo + t * g.value, g.hi + t * g.value))
        .collect();
    let gap_total: f64 = translated_gaps.iter().map(|(a, b)| b - a).sum();
    Ok(CantorFlow {
        t,
        fat_measure: 1.0 + t - gap_total,
        approx,
        translated_gaps,
    })
}

/// Bisection tolerance in `z` for [`lax_velocity`].
pub const LAX_TOL: f64 = 1e-13;

/// Velocity `f(x, t) = c(z)` where `x = z + t·c(z)`, at depth `n`.
pub fn lax_velocity(x: f64, t: f64, depth: usize) -> Result<f64, CantorError> {
    if !(t > 0.0) {
        return Err(CantorError::NonPositiveTime(t));
    }
    if depth > MAX_DEPTH {
        return Err(CantorError::DepthTooLarge(depth));
    }
    if x <= 0.0 {
        return Ok(0.0);
    }
    if x >= 1.0 + t {
        return Ok(1.0);
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while hi - lo > LAX_TOL {
        let mid = 0.5 * (lo + hi);
        if mid + t * cantor_unchecked(mid, depth) < x {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(cantor_unchecked(0.5 * (lo + hi), depth))
}

/// Extreme difference quotients of `f(·, t)` over random pairs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OleinikStats {
    pub min_quotient: f64,
    pub max_quotient: f64,
}

pub fn oleinik_stats(depth: usize, t: f64, pairs: usize, seed: u64) -> Result<OleinikStats, CantorError> {
    lax_velocity(0.5, t, depth)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs: Vec<(f64, f64)> = (0..pairs)
        .map(|_| {
            let a = rng.gen_range(-0.1..1.1 + t);
            let b = rng.gen_range(-0.1..1.1 + t);
            if a < b { (a, b) } else { (b, a) }
        })
        .filter(|(a, b)| b > a)
        .collect();
    let q: Vec<f64> = xs
        .par_iter()
        .map(|&(a, b)| {
            let fa = lax_velocity(a, t, depth).expect("validated");
            let fb = lax_velocity(b, t, depth).expect("validated");
            (fb - fa) / (b - a)
        })
        .collect();
    Ok(OleinikStats {
        min_quotient: q.iter().copied().fold(f64::INFINITY, f64::min),
        max_quotient: q.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    })
}

/// `0 ≤ Δf/Δx ≤ 1/t` on `pairs` random pairs, up to bisection error.
pub fn oleinik_check(depth: usize, t: f64, pairs: usize, seed: u64) -> Result<bool, CantorError> {
    let s = oleinik_stats(depth, t, pairs, seed)?;
    Ok(s.min_quotient >= -1e-9 && s.max_quotient <= 1.0 / t + 1e-9)
}

/// Whether `values` are `delta`-dense in `[a, b]`: every point of the
/// interval lies within `delta` of a value.
pub fn continuity_classifier_1d(values: &[f64], interval: (f64, f64), delta: f64) -> bool {
    let (a, b) = interval;
    let mut v: Vec<f64> = values
        .iter()
        .copied()
        .filter(|x| x.is_finite() && (a - delta..=b + delta).contains(x))
        .collect();
    if v.is_empty() {
        return false;
    }
    v.sort_by(f64::total_cmp);
    v[0] - a <= delta && b - v[v.len() - 1] <= delta && v.windows(2).all(|w| w[1] - w[0] <= 2.0 * delta)
}

/// Depth-`n` Cantor potential `φ' = c` on `[0, 1]`, with each kept interval
/// replaced by one affine piece of the average slope. Convex.
pub fn cantor_potential(depth: usize) -> Result<PiecewiseAffine1d, CantorError> {
    let approx = CantorApprox::new(depth)?;
    let n = approx.kept_intervals.len() as f64;
    let mut breaks = vec![0.0];
    let mut slopes = Vec::new();
    for (j, &(_, hi)) in approx.kept_intervals.iter().enumerate() {
        slopes.push((j as f64 + 0.5) / n);
        breaks.push(hi);
        if let Some(g) = approx.gaps.get(j) {
            slopes.push(g.value);
            breaks.push(g.hi);
        }
    }
    Ok(PiecewiseAffine1d::from_slopes(breaks, slopes, 0.0).expect("valid Cantor pieces"))
}

/// Samples `(x, f(x, t))` on `[0, 1 + t_max]` for several times, as CSV
/// with one column per time.
pub fn expansion_wave_csv(depth: usize, ts: &[f64], samples: usize) -> Result<String, CantorError> {
    let t_max = ts.iter().copied().fold(0.0, f64::max);
    let rows = expansion_wave(depth, ts, samples, 0.0, 1.0 + t_max)?;
    let mut out = String::from("x");
    for t in ts {
        out.push_str(&format!(",f_t{t}"));
    }
    out.push('\n');
    for (x, fs) in rows {
        out.push_str(&format!("{x}"));
        for f in fs {
            out.push_str(&format!(",{f}"));
        }
        out.push('\n');
    }
    Ok(out)
}

pub(crate) fn expansion_wave(
    depth: usize,
    ts: &[f64],
    samples: usize,
    x0: f64,
    x1: f64,
) -> Result<Vec<(f64, Vec<f64>)>, CantorError> {
    for &t in ts {
        lax_velocity(0.0, t, depth)?;
    }
    let samples = samples.max(2);
    Ok((0..samples)
        .into_par_iter()
        .map(|k| {
            let x = x0 + (x1 - x0) * k as f64 / (samples - 1) as f64;
            let fs = ts.iter().map(|&t| lax_velocity(x, t, depth).expect("validated")).collect();
            (x, fs)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convexify::monge_ampere_1d;
    use approx::assert_abs_diff_eq;

    /// Cantor function from the ternary expansion: digits 0/2 contribute
    /// binary digits 0/1, the first digit 1 terminates.
    fn digit_oracle(num: u64, den: u64, digits: usize) -> f64 {
        if num == den {
            return 1.0;
        }
        let (mut r, mut value, mut scale) = (num, 0.0, 0.5);
        for _ in 0..digits {
            r *= 3;
            let d = r / den;
            r %= den;
            match d {
                0 => {}
                1 => return value + scale,
                _ => value += scale,
            }
            scale *= 0.5;
        }
        value
    }

    #[test]
    fn boundary_and_first_gap() {
        for n in [1, 5, 20] {
            assert_eq!(cantor_function(0.0, n).unwrap(), 0.0);
            assert_eq!(cantor_function(1.0, n).unwrap(), 1.0);
            assert_eq!(cantor_function(1.0 / 3.0, n).unwrap(), 0.5);
            assert_eq!(cantor_function(2.0 / 3.0, n).unwrap(), 0.5);
        }
        assert!(cantor_function(1.5, 3).is_err());
    }

    #[test]
    fn quarter_matches_digit_oracle() {
        let oracle = digit_oracle(1, 4, 40);
        assert_abs_diff_eq!(oracle, 1.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(cantor_function(0.25, 40).unwrap(), oracle, epsilon = 1e-12);
    }

    #[test]
    fn rational_points_match_oracle() {
        for den in [5u64, 7, 10, 13, 81] {
            for num in 0..=den {
                let z = num as f64 / den as f64;
                let c = cantor_function(z, 20).unwrap();
                let o = digit_oracle(num, den, 60);
                assert!((c - o).abs() <= 2f64.powi(-20) + 1e-12, "{num}/{den}: {c} vs {o}");
            }
        }
    }

    #[test]
    fn approx_structure() {
        let a = CantorApprox::new(5).unwrap();
        assert_eq!(a.kept_intervals.len(), 32);
        assert_eq!(a.gaps.len(), 31);
        assert_abs_diff_eq!(a.kept_length(), (2.0f64 / 3.0).powi(5), epsilon = 1e-14);
        assert!(a.gaps.windows(2).all(|w| w[0].hi < w[1].lo && w[0].value < w[1].value));
        for g in &a.gaps {
            let mid = 0.5 * (g.lo + g.hi);
            assert_eq!(cantor_function(mid, 5).unwrap(), g.value);
        }
    }

    #[test]
    fn flow_accounting() {
        let f = cantor_flow(12, 1.0).unwrap();
        let target = 1.0 - (2.0f64 / 3.0).powi(12);
        assert_abs_diff_eq!(f.translated_gap_total(), target, epsilon = 1e-12);
        assert_abs_diff_eq!(f.fat_measure, 1.0 + (2.0f64 / 3.0).powi(12), epsilon = 1e-12);
        assert!(f.translated_gaps.windows(2).all(|w| w[0].1 <= w[1].0));
        let f0 = cantor_flow(6, 0.0).unwrap();
        assert_abs_diff_eq!(f0.fat_measure, (2.0f64 / 3.0).powi(6), epsilon = 1e-14);
    }

    #[test]
    fn lax_profile() {
        let t = 1.0;
        assert_eq!(lax_velocity(-0.5, t, 8).unwrap(), 0.0);
        assert_eq!(lax_velocity(2.5, t, 8).unwrap(), 1.0);
        let mut prev = 0.0;
        for k in 0..=10_000 {
            let x = 2.0 * k as f64 / 10_000.0;
            let f = lax_velocity(x, t, 8).unwrap();
            assert!(f >= prev - 1e-12);
            prev = f;
        }
        let flow = cantor_flow(8, t).unwrap();
        for k in 1..200 {
            let x = 2.0 * k as f64 / 200.0;
            let lhs = t * lax_velocity(x, t, 8).unwrap();
            assert!((lhs - flow.fat_measure_below(x)).abs() <= 2.0 * 3f64.powi(-8));
        }
    }

    #[test]
    fn oleinik() {
        assert!(oleinik_check(10, 1.0, 2000, 3).unwrap());
        assert!(oleinik_check(10, 0.3, 2000, 4).unwrap());
        let flow = cantor_flow(6, 1.0).unwrap();
        let (a, b) = flow.translated_gaps[10];
        let (fa, fb) = (
            lax_velocity(a + 0.2 * (b - a), 1.0, 6).unwrap(),
            lax_velocity(a + 0.7 * (b - a), 1.0, 6).unwrap(),
        );
        assert_eq!(fa, fb);
    }

    #[test]
    fn density_classifier() {
        let dyadic: Vec<f64> = (0..=1024).map(|k| k as f64 / 1024.0).collect();
        assert!(continuity_classifier_1d(&dyadic, (0.0, 1.0), 2f64.powi(-9)));
        assert!(!continuity_classifier_1d(&[0.0, 1.0], (0.0, 1.0), 0.1));
        let gaps: Vec<f64> = CantorApprox::new(7).unwrap().gaps.iter().map(|g| g.value).collect();
        assert!(continuity_classifier_1d(&gaps, (0.0, 1.0), 2f64.powi(-7)));
    }

    #[test]
    fn cantor_potential_is_convex() {
        let phi = cantor_potential(8).unwrap();
        assert_eq!(phi.len(), 2 * 256 - 1);
        let m = monge_ampere_1d(&phi, 0.5);
        assert!(m.atoms.is_empty());
        assert_abs_diff_eq!(m.total_mass(), 1.0, epsilon = 1e-12);
    }
}
