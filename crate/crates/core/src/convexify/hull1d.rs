use crate::geom2d::Point;
use crate::measure::{AcPart, Atom, MeasureDecomposition, Support};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum Potential1dError {
    #[error("potential needs at least one piece")]
    Empty,
    #[error("expected {0} break points for {1} pieces")]
    LengthMismatch(usize, usize),
    #[error("break points must be finite and strictly increasing")]
    Unsorted,
    #[error("non-finite slope or height in piece {0}")]
    NonFinite(usize),
    #[error("potential jumps by {1:.3e} at break {0}")]
    Discontinuous(usize, f64),
}

/// Continuous piecewise-affine `φ` on `[breaks[0], breaks[n]]`, equal to
/// `slopes[i]·x + heights[i]` on `[breaks[i], breaks[i+1]]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewiseAffine1d {
    pub breaks: Vec<f64>,
    pub slopes: Vec<f64>,
    pub heights: Vec<f64>,
}

impl PiecewiseAffine1d {
    pub fn new(breaks: Vec<f64>, slopes: Vec<f64>, heights: Vec<f64>) -> Result<Self, Potential1dError> {
        let p = Self { breaks, slopes, heights };
        p.validate()?;
        Ok(p)
    }

    /// Build from break points and slopes, fixing `φ(breaks[0]) = left_value`.
    pub fn from_slopes(breaks: Vec<f64>, slopes: Vec<f64>, left_value: f64) -> Result<Self, Potential1dError> {
        if slopes.is_empty() {
            return Err(Potential1dError::Empty);
        }
        if breaks.len() != slopes.len() + 1 {
            return Err(Potential1dError::LengthMismatch(slopes.len() + 1, slopes.len()));
        }
        let mut heights = Vec::with_capacity(slopes.len());
        let mut value = left_value;
        for (i, &s) in slopes.iter().enumerate() {
            heights.push(value - s * breaks[i]);
            value += s * (breaks[i + 1] - breaks[i]);
        }
        Self::new(breaks, slopes, heights)
    }

    pub fn validate(&self) -> Result<(), Potential1dError> {
        let n = self.slopes.len();
        if n == 0 {
            return Err(Potential1dError::Empty);
        }
        if self.breaks.len() != n + 1 || self.heights.len() != n {
            return Err(Potential1dError::LengthMismatch(n + 1, n));
        }
        if self.breaks.iter().any(|b| !b.is_finite()) || self.breaks.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Potential1dError::Unsorted);
        }
        for i in 0..n {
            if !self.slopes[i].is_finite() || !self.heights[i].is_finite() {
                return Err(Potential1dError::NonFinite(i));
            }
        }
        for k in 1..n {
            let x = self.breaks[k];
            let (l, r) = (self.piece_value(k - 1, x), self.piece_value(k, x));
            let gap = (l - r).abs();
            if gap > 1e-9 * (1.0 + l.abs().max(r.abs())) {
                return Err(Potential1dError::Discontinuous(k, gap));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.slopes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slopes.is_empty()
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.breaks[0], self.breaks[self.len()])
    }

    fn piece_value(&self, i: usize, x: f64) -> f64 {
        self.slopes[i] * x + self.heights[i]
    }

    /// Index of the piece containing `x` (left-closed; the last piece is closed).
    pub fn piece_at(&self, x: f64) -> Option<usize> {
        let (a, b) = self.domain();
        if !(a..=b).contains(&x) {
            return None;
        }
        let k = self.breaks.partition_point(|&b| b <= x);
        Some(k.saturating_sub(1).min(self.len() - 1))
    }

    pub fn eval(&self, x: f64) -> Option<f64> {
        self.piece_at(x).map(|i| self.piece_value(i, x))
    }

    /// `ψ_t(y) = ½y² + t·φ(y)`; `+∞` outside the domain.
    pub fn psi(&self, t: f64, y: f64) -> f64 {
        self.eval(y).map_or(f64::INFINITY, |v| 0.5 * y * y + t * v)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Arc {
    b: f64,
    c: f64,
}

impl Arc {
    #[inline]
    fn val(&self, y: f64) -> f64 {
        0.5 * y * y + self.b * y + self.c
    }

    #[inline]
    fn der(&self, y: f64) -> f64 {
        y + self.b
    }
}

/// Part of piece `piece` on which `ψ_t = ψ_t**`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HullSegment {
    pub piece: usize,
    pub lo: f64,
    pub hi: f64,
}

/// Convex envelope of `ψ_t` for a piecewise-affine `φ`: contact segments on
/// the parabolic arcs joined by affine bridges.
#[derive(Clone, Debug, PartialEq)]
pub struct Hull1d {
    pub t: f64,
    pub segments: Vec<HullSegment>,
    arcs: Vec<Arc>,
}

impl Hull1d {
    fn arc(&self, s: &HullSegment) -> Arc {
        self.arcs[s.piece]
    }

    /// `ψ_t**(y)`, `+∞` outside the domain.
    pub fn eval(&self, y: f64) -> f64 {
        let first = self.segments[0];
        let last = self.segments[self.segments.len() - 1];
        if y < first.lo || y > last.hi {
            return f64::INFINITY;
        }
        for (k, s) in self.segments.iter().enumerate() {
            if y <= s.hi {
                let a = self.arc(s);
                if y >= s.lo {
                    return a.val(y);
                }
                let p = self.segments[k - 1];
                let (y1, v1) = (p.hi, self.arc(&p).val(p.hi));
                let v2 = a.val(s.lo);
                return v1 + (v2 - v1) * (y - y1) / (s.lo - y1);
            }
        }
        self.arc(&last).val(last.hi)
    }

    /// Whether `y` lies in a contact segment.
    pub fn touches(&self, y: f64) -> bool {
        self.segments.iter().any(|s| s.lo <= y && y <= s.hi)
    }

    /// Bridges `(y1, y2, slope)` between consecutive contact segments.
    pub fn bridges(&self) -> Vec<(f64, f64, f64)> {
        self.segments
            .windows(2)
            .filter(|w| w[1].lo > w[0].hi)
            .map(|w| {
                let (y1, y2) = (w[0].hi, w[1].lo);
                let s = (self.arc(&w[1]).val(y2) - self.arc(&w[0]).val(y1)) / (y2 - y1);
                (y1, y2, s)
            })
            .collect()
    }

    /// `κ_t`: contact segments translated by `t·v`, bridges collapsed to atoms.
    pub fn measure(&self) -> MeasureDecomposition {
        let ac_parts = self
            .segments
            .iter()
            .filter(|s| s.hi > s.lo)
            .map(|s| {
                let b = self.arc(s).b;
                AcPart {
                    support: Support::Interval(s.lo + b, s.hi + b),
                    density: 1.0,
                }
            })
            .collect();
        let mut atoms: Vec<Atom> = Vec::new();
        for (y1, y2, s) in self.bridges() {
            match atoms.last_mut() {
                Some(a) if (a.location.x - s).abs() <= 1e-12 * (1.0 + s.abs()) => a.mass += y2 - y1,
                _ => atoms.push(Atom {
                    location: Point::new(s, 0.0),
                    mass: y2 - y1,
                }),
            }
        }
        MeasureDecomposition {
            ac_parts,
            atoms,
            ..Default::default()
        }
    }
}

/// Minimum over `[lo, hi]` of `arc − line`, where `line(y) = v1 + s·(y − y1)`.
fn gap_below(a: &Arc, lo: f64, hi: f64, y1: f64, v1: f64, s: f64) -> f64 {
    let y = (s - a.b).clamp(lo, hi);
    a.val(y) - (v1 + s * (y - y1))
}

/// Common supporting line of two arcs restricted to disjoint ranges.
fn bridge(l: (&Arc, f64, f64), r: (&Arc, f64, f64), tol: f64) -> (f64, f64, f64) {
    let (la, llo, lhi) = l;
    let (ra, rlo, rhi) = r;
    let mut cands: Vec<(f64, f64)> = Vec::with_capacity(9);
    let d = la.b - ra.b;
    if d > 0.0 {
        let y1 = (ra.c - la.c) / d - 0.5 * d;
        cands.push((y1, y1 + d));
    }
    for p in [rlo, rhi] {
        let g = la.val(p) - ra.val(p);
        if g >= 0.0 {
            cands.push((p - (2.0 * g).sqrt(), p));
        }
    }
    for q in [llo, lhi] {
        let g = ra.val(q) - la.val(q);
        if g >= 0.0 {
            cands.push((q, q + (2.0 * g).sqrt()));
        }
    }
    for p in [llo, lhi] {
        for q in [rlo, rhi] {
            cands.push((p, q));
        }
    }
    let mut best: Option<(f64, (f64, f64, f64))> = None;
    for (y1, y2) in cands {
        if !(y1 >= llo - tol && y1 <= lhi + tol && y2 >= rlo - tol && y2 <= rhi + tol) {
            continue;
        }
        let (y1, y2) = (y1.clamp(llo, lhi), y2.clamp(rlo, rhi));
        if y2 <= y1 {
            continue;
        }
        let v1 = la.val(y1);
        let s = (ra.val(y2) - v1) / (y2 - y1);
        let viol = -(gap_below(la, llo, lhi, y1, v1, s).min(gap_below(ra, rlo, rhi, y1, v1, s)));
        if best.is_none_or(|(b, _)| viol < b) {
            best = Some((viol, (y1, y2, s)));
        }
        if viol <= tol {
            break;
        }
    }
    best.map(|(_, b)| b).unwrap_or((lhi, rlo, 0.0))
}

/// Exact convex envelope of `ψ_t` by a left-to-right stack sweep over the
/// parabolic arcs.
pub fn hull_1d(phi: &PiecewiseAffine1d, t: f64) -> Hull1d {
    let arcs: Vec<Arc> = phi
        .slopes
        .iter()
        .zip(&phi.heights)
        .map(|(v, h)| Arc { b: t * v, c: t * h })
        .collect();
    let scale = 1.0
        + phi.breaks.iter().map(|b| b.abs()).fold(0.0, f64::max).powi(2)
        + arcs.iter().map(|a| a.b.abs() + a.c.abs()).fold(0.0, f64::max);
    let tol = 1e-13 * scale;
    let val = |s: &HullSegment, y: f64| arcs[s.piece].val(y);
    // slope arriving at the left end of the top segment
    let incoming = |st: &[HullSegment]| -> f64 {
        let mut st = st;
        loop {
            match st {
                [.., p, q] if p.hi < q.lo => return (val(q, q.lo) - val(p, p.hi)) / (q.lo - p.hi),
                [.., p, _] if p.hi > p.lo => return arcs[p.piece].der(p.hi),
                [rest @ .., _] if !rest.is_empty() => st = rest,
                _ => return f64::NEG_INFINITY,
            }
        }
    };
    let mut st: Vec<HullSegment> = Vec::with_capacity(phi.len());
    for j in 0..phi.len() {
        let mut new = HullSegment {
            piece: j,
            lo: phi.breaks[j],
            hi: phi.breaks[j + 1],
        };
        loop {
            let Some(&top) = st.last() else {
                st.push(new);
                break;
            };
            if top.hi == new.lo {
                let left = if top.hi > top.lo {
                    arcs[top.piece].der(top.hi)
                } else {
                    incoming(&st)
                };
                if left <= arcs[j].der(new.lo) + tol {
                    st.push(new);
                    break;
                }
                // a lone point before a concave junction is above the chord
                if top.lo == top.hi && st.len() >= 2 {
                    st.pop();
                    if let Some(prev) = st.last_mut() {
                        prev.hi = phi.breaks[prev.piece + 1];
                    }
                    continue;
                }
            }
            let (y1, y2, s) = bridge(
                (&arcs[top.piece], top.lo, top.hi),
                (&arcs[j], new.lo, new.hi),
                tol,
            );
            if y1 <= top.lo + tol && st.len() >= 2 && s < incoming(&st) - tol {
                st.pop();
                // the discarded bridge no longer truncates the new top
                if let Some(prev) = st.last_mut() {
                    prev.hi = phi.breaks[prev.piece + 1];
                }
                continue;
            }
            let last = st.len() - 1;
            st[last].hi = y1.max(top.lo);
            new.lo = y2;
            st.push(new);
            break;
        }
    }
    Hull1d { t, segments: st, arcs }
}

/// Monge-Ampère measure `κ_t` of a piecewise-affine potential on an interval.
pub fn monge_ampere_1d(phi: &PiecewiseAffine1d, t: f64) -> MeasureDecomposition {
    hull_1d(phi, t).measure()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convexify::{convexify, Axis, GridFunction};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tent() -> PiecewiseAffine1d {
        PiecewiseAffine1d::from_slopes(vec![-1.0, 0.0, 1.0], vec![1.0, -1.0], -1.0).unwrap()
    }

    #[test]
    fn tent_has_single_atom() {
        for t in [0.1, 0.25, 0.5, 0.9] {
            let m = monge_ampere_1d(&tent(), t);
            assert_eq!(m.atoms.len(), 1);
            assert_abs_diff_eq!(m.atoms[0].location.x, 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!(m.atoms[0].mass, 2.0 * t, epsilon = 1e-12);
            assert_eq!(m.ac_parts.len(), 2);
            assert_eq!(m.ac_parts[0].support, Support::Interval(t - 1.0, 0.0));
            assert_abs_diff_eq!(m.total_mass(), 2.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn convex_potential_has_no_atoms() {
        let phi = PiecewiseAffine1d::from_slopes(vec![0.0, 0.3, 0.5, 1.0], vec![-1.0, 0.2, 2.0], 0.0).unwrap();
        let m = monge_ampere_1d(&phi, 0.7);
        assert!(m.atoms.is_empty());
        assert_eq!(m.ac_parts.len(), 3);
    }

    #[test]
    fn zero_time_is_identity() {
        let m = monge_ampere_1d(&tent(), 0.0);
        assert!(m.atoms.is_empty());
        assert_abs_diff_eq!(m.ac_mass(), 2.0, epsilon = 1e-15);
    }

    #[test]
    fn discontinuity_rejected() {
        let e = PiecewiseAffine1d::new(vec![0.0, 1.0, 2.0], vec![0.0, 0.0], vec![0.0, 1.0]);
        assert!(matches!(e, Err(Potential1dError::Discontinuous(1, _))));
    }

    #[test]
    fn random_hulls_match_grid_envelope() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..400 {
            let n = rng.gen_range(1..12);
            let mut breaks: Vec<f64> = (0..n - 1).map(|_| rng.gen_range(-1.0..1.0)).collect();
            breaks.push(-1.0);
            breaks.push(1.0);
            breaks.sort_by(f64::total_cmp);
            breaks.dedup();
            let slopes: Vec<f64> = (0..breaks.len() - 1).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let phi = PiecewiseAffine1d::from_slopes(breaks, slopes, 0.0).unwrap();
            let t = rng.gen_range(0.0..1.0);
            let hull = hull_1d(&phi, t);
            let axis = Axis::spanning(-1.0, 1.0, 4001);
            let g = GridFunction::sample_1d(axis, |y| phi.psi(t, y));
            let cc = convexify(&g);
            for k in 0..axis.n {
                let y = axis.node(k);
                assert!(hull.eval(y) <= phi.psi(t, y) + 1e-12);
                // the node envelope sits above the exact one by O(h)
                let gap = cc.values[k] - hull.eval(y);
                assert!((-1e-12..=2.0 * axis.spacing).contains(&gap), "y = {y}, gap = {gap} {phi:?} t={t} {:?}", hull.segments);
            }
            let m = hull.measure();
            assert_abs_diff_eq!(m.total_mass(), 2.0, epsilon = 1e-12);
            // atoms never inside ac supports
            for a in &m.atoms {
                for p in &m.ac_parts {
                    if let Support::Interval(lo, hi) = p.support {
                        assert!(!(lo + 1e-12 < a.location.x && a.location.x < hi - 1e-12));
                    }
                }
            }
        }
    }
}
