//! Convex polygon kernel in the plane.
//!
//! Everything here works on [`ConvexPolygon`], a counterclockwise vertex loop.
//! The operations are half-plane clipping, shoelace areas and centroids,
//! interior-overlap tests and power (Laguerre) cells.
//!
//! Conventions
//! - A half-plane is `normal · x <= offset`; the normal need not be unit length.
//! - Coordinate comparisons use `Tolerance::geom` (default 1e-12) measured as a
//!   signed distance to the cut line, area comparisons use `Tolerance::area`
//!   (default 1e-10).
//! - Clips that leave a sliver thinner than `Tolerance::geom` return the empty
//!   polygon.

use nalgebra::Vector2;
use rayon::prelude::*;

/// A point or vector in the plane.
pub type Point = Vector2<f64>;

pub const EPS_GEOM: f64 = 1e-12;
pub const EPS_AREA: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerance {
    pub geom: f64,
    pub area: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            geom: EPS_GEOM,
            area: EPS_AREA,
        }
    }
}

/// Closed half-plane `normal · x <= offset`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HalfPlane {
    pub normal: Point,
    pub offset: f64,
}

impl HalfPlane {
    pub fn new(normal: Point, offset: f64) -> Self {
        debug_assert!(normal.norm_squared() > 0.0, "half-plane normal must be nonzero");
        Self { normal, offset }
    }

    /// The closure of the complementary half-plane.
    pub fn complement(&self) -> Self {
        Self {
            normal: -self.normal,
            offset: -self.offset,
        }
    }

    /// Signed distance of `x` from the boundary line, positive outside.
    #[inline]
    pub fn signed_distance(&self, x: &Point) -> f64 {
        (self.normal.dot(x) - self.offset) / self.normal.norm()
    }
}

/// A generator of a power diagram: `site` with additive weight `weight`.
///
/// The power of `x` with respect to the site is `|x - site|² - weight`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerSite {
    pub site: Point,
    pub weight: f64,
}

impl PowerSite {
    pub fn new(site: Point, weight: f64) -> Self {
        Self { site, weight }
    }

    #[inline]
    pub fn power(&self, x: &Point) -> f64 {
        (x - self.site).norm_squared() - self.weight
    }
}

/// Counterclockwise convex vertex loop. The first vertex is not repeated.
/// Zero vertices is the empty polygon.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConvexPolygon {
    vertices: Vec<Point>,
}

/// Axis-aligned bounding box `[min, max]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BBox {
    pub min: Point,
    pub max: Point,
}

impl BBox {
    pub fn overlaps(&self, other: &BBox, slack: f64) -> bool {
        self.min.x <= other.max.x + slack
            && other.min.x <= self.max.x + slack
            && self.min.y <= other.max.y + slack
            && other.min.y <= self.max.y + slack
    }

    pub fn union(&self, other: &BBox) -> BBox {
        BBox {
            min: Point::new(self.min.x.min(other.min.x), self.min.y.min(other.min.y)),
            max: Point::new(self.max.x.max(other.max.x), self.max.y.max(other.max.y)),
        }
    }
}

impl ConvexPolygon {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Builds a polygon from a counterclockwise convex loop without checking it.
    /// Use [`ConvexPolygon::try_new`] for untrusted input.
    pub fn from_vertices_unchecked(vertices: Vec<Point>) -> Self {
        Self { vertices }
    }

    /// Validates convexity and orientation. Clockwise loops are reversed.
    pub fn try_new(vertices: Vec<Point>, tol: f64) -> Result<Self, PolygonError> {
        if vertices.iter().any(|v| !v.x.is_finite() || !v.y.is_finite()) {
            return Err(PolygonError::NonFinite);
        }
        if vertices.is_empty() {
            return Ok(Self::empty());
        }
        if vertices.len() < 3 {
            return Err(PolygonError::TooFewVertices(vertices.len()));
        }
        let mut vertices = vertices;
        if signed_area(&vertices) < 0.0 {
            vertices.reverse();
        }
        let n = vertices.len();
        let scale = vertices
            .iter()
            .map(|v| v.x.abs().max(v.y.abs()))
            .fold(1.0_f64, f64::max);
        for i in 0..n {
            let a = vertices[i];
            let b = vertices[(i + 1) % n];
            let c = vertices[(i + 2) % n];
            if (b - a).norm() <= tol * scale {
                return Err(PolygonError::RepeatedVertex(i));
            }
            let turn = cross(&(b - a), &(c - b));
            if turn < -tol * scale * scale {
                return Err(PolygonError::NotConvex(i));
            }
        }
        if signed_area(&vertices) <= 0.0 {
            return Err(PolygonError::Degenerate);
        }
        Ok(Self { vertices })
    }

    /// Axis-aligned rectangle `[x0, x1] × [y0, y1]`.
    pub fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self {
            vertices: vec![
                Point::new(x0, y0),
                Point::new(x1, y0),
                Point::new(x1, y1),
                Point::new(x0, y1),
            ],
        }
    }

    pub fn unit_square() -> Self {
        Self::rect(0.0, 0.0, 1.0, 1.0)
    }

    /// Regular `n`-gon inscribed in the circle of the given center and radius.
    pub fn regular(center: Point, radius: f64, n: usize) -> Self {
        assert!(n >= 3);
        let vertices = (0..n)
            .map(|k| {
                let a = std::f64::consts::TAU * k as f64 / n as f64;
                center + radius * Point::new(a.cos(), a.sin())
            })
            .collect();
        Self { vertices }
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn into_vertices(self) -> Vec<Point> {
        self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Iterator over directed edges `(a, b)`.
    pub fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// Shoelace area; zero for empty or degenerate loops.
    pub fn area(&self) -> f64 {
        if self.vertices.len() < 3 {
            return 0.0;
        }
        signed_area(&self.vertices).max(0.0)
    }

    /// Area centroid, `None` when the area vanishes.
    pub fn centroid(&self) -> Option<Point> {
        let n = self.vertices.len();
        if n < 3 {
            return None;
        }
        // Shift to the first vertex to reduce cancellation.
        let o = self.vertices[0];
        let mut a2 = 0.0;
        let mut c = Point::zeros();
        for i in 1..n - 1 {
            let p = self.vertices[i] - o;
            let q = self.vertices[i + 1] - o;
            let w = cross(&p, &q);
            a2 += w;
            c += w * (p + q);
        }
        if a2 <= 0.0 {
            return None;
        }
        Some(o + c / (3.0 * a2))
    }

    pub fn perimeter(&self) -> f64 {
        self.edges().map(|(a, b)| (b - a).norm()).sum()
    }

    pub fn bbox(&self) -> Option<BBox> {
        let first = *self.vertices.first()?;
        let mut b = BBox {
            min: first,
            max: first,
        };
        for v in &self.vertices[1..] {
            b.min.x = b.min.x.min(v.x);
            b.min.y = b.min.y.min(v.y);
            b.max.x = b.max.x.max(v.x);
            b.max.y = b.max.y.max(v.y);
        }
        Some(b)
    }

    pub fn translate(&self, by: &Point) -> Self {
        Self {
            vertices: self.vertices.iter().map(|v| v + by).collect(),
        }
    }

    /// Closed containment test with slack `tol` (distance units).
    pub fn contains(&self, x: &Point, tol: f64) -> bool {
        if self.vertices.len() < 3 {
            return false;
        }
        self.edges().all(|(a, b)| {
            let e = b - a;
            cross(&e, &(x - a)) >= -tol * e.norm()
        })
    }

    /// Distance from `x` to the boundary when `x` is inside, negative of the
    /// distance to the polygon when outside.
    pub fn signed_clearance(&self, x: &Point) -> f64 {
        if self.vertices.len() < 3 {
            return f64::NEG_INFINITY;
        }
        let mut inside = true;
        let mut min_line = f64::INFINITY;
        for (a, b) in self.edges() {
            let e = b - a;
            let d = cross(&e, &(x - a)) / e.norm();
            if d < 0.0 {
                inside = false;
            }
            min_line = min_line.min(d);
        }
        if inside {
            min_line
        } else {
            -self.distance_outside(x)
        }
    }

    /// Euclidean distance from `x` to the closed polygon (zero inside).
    pub fn distance(&self, x: &Point) -> f64 {
        if self.contains(x, 0.0) {
            0.0
        } else {
            self.distance_outside(x)
        }
    }

    fn distance_outside(&self, x: &Point) -> f64 {
        self.edges()
            .map(|(a, b)| segment_distance(x, &a, &b))
            .fold(f64::INFINITY, f64::min)
    }

    /// Outward edge half-planes; the polygon is their intersection.
    pub fn halfplanes(&self) -> Vec<HalfPlane> {
        self.edges()
            .map(|(a, b)| {
                let e = b - a;
                let n = Point::new(e.y, -e.x);
                HalfPlane::new(n, n.dot(&a))
            })
            .collect()
    }

    /// Vertex maximizing `dir · x`.
    pub fn support_point(&self, dir: &Point) -> Option<Point> {
        self.vertices
            .iter()
            .copied()
            .max_by(|a, b| dir.dot(a).total_cmp(&dir.dot(b)))
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PolygonError {
    #[error("polygon has {0} vertices, need 0 or at least 3")]
    TooFewVertices(usize),
    #[error("polygon vertex {0} repeats its successor")]
    RepeatedVertex(usize),
    #[error("polygon is not convex at vertex {0}")]
    NotConvex(usize),
    #[error("polygon has zero area")]
    Degenerate,
    #[error("polygon has non-finite coordinates")]
    NonFinite,
}

#[inline]
pub fn cross(a: &Point, b: &Point) -> f64 {
    a.x * b.y - a.y * b.x
}

fn signed_area(v: &[Point]) -> f64 {
    let n = v.len();
    let o = v[0];
    let mut s = 0.0;
    for i in 1..n.saturating_sub(1) {
        s += cross(&(v[i] - o), &(v[i + 1] - o));
    }
    0.5 * s
}

fn segment_distance(x: &Point, a: &Point, b: &Point) -> f64 {
    let e = b - a;
    let l2 = e.norm_squared();
    if l2 == 0.0 {
        return (x - a).norm();
    }
    let s = ((x - a).dot(&e) / l2).clamp(0.0, 1.0);
    (x - (a + s * e)).norm()
}

/// Where a polygon edge came from during repeated clipping.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EdgeTag {
    /// Edge of the original polygon.
    Boundary,
    /// Edge created by the half-plane with this label.
    Cut(usize),
}

/// Polygon whose edge `k` (from vertex `k` to `k + 1`) carries a tag.
#[derive(Clone, Debug, PartialEq)]
pub struct TaggedPolygon {
    pub vertices: Vec<Point>,
    pub tags: Vec<EdgeTag>,
}

impl TaggedPolygon {
    pub fn from_polygon(p: &ConvexPolygon) -> Self {
        Self {
            vertices: p.vertices.clone(),
            tags: vec![EdgeTag::Boundary; p.vertices.len()],
        }
    }

    pub fn to_polygon(&self) -> ConvexPolygon {
        ConvexPolygon {
            vertices: self.vertices.clone(),
        }
    }

    pub fn into_polygon(self) -> ConvexPolygon {
        ConvexPolygon {
            vertices: self.vertices,
        }
    }

    /// Total length of edges carrying `tag`.
    pub fn tagged_length(&self, tag: EdgeTag) -> f64 {
        let n = self.vertices.len();
        (0..n)
            .filter(|&k| self.tags[k] == tag)
            .map(|k| (self.vertices[(k + 1) % n] - self.vertices[k]).norm())
            .sum()
    }

    /// Clip in place; edges on the new cut line get `EdgeTag::Cut(label)`.
    pub fn clip(&mut self, hp: &HalfPlane, label: usize, tol: &Tolerance) {
        let n = self.vertices.len();
        if n == 0 {
            return;
        }
        let norm = hp.normal.norm();
        let d: Vec<f64> = self
            .vertices
            .iter()
            .map(|v| {
                let s = (hp.normal.dot(v) - hp.offset) / norm;
                if s.abs() <= tol.geom {
                    0.0
                } else {
                    s
                }
            })
            .collect();
        if d.iter().all(|&s| s <= 0.0) {
            return;
        }
        if d.iter().all(|&s| s >= 0.0) {
            self.vertices.clear();
            self.tags.clear();
            return;
        }
        let new = EdgeTag::Cut(label);
        let mut verts = Vec::with_capacity(n + 1);
        let mut tags = Vec::with_capacity(n + 1);
        for i in 0..n {
            let j = (i + 1) % n;
            let (a, b) = (self.vertices[i], self.vertices[j]);
            let (da, db) = (d[i], d[j]);
            let tag = self.tags[i];
            if da <= 0.0 {
                if db > 0.0 {
                    if da < 0.0 {
                        verts.push(a);
                        tags.push(tag);
                        verts.push(a + (b - a) * (da / (da - db)));
                        tags.push(new);
                    } else {
                        verts.push(a);
                        tags.push(new);
                    }
                } else {
                    verts.push(a);
                    tags.push(tag);
                }
            } else if db < 0.0 {
                verts.push(a + (b - a) * (da / (da - db)));
                tags.push(tag);
            }
        }
        self.vertices = verts;
        self.tags = tags;
        self.cleanup(tol);
    }

    fn cleanup(&mut self, tol: &Tolerance) {
        // Drop the first of any pair of coincident consecutive vertices.
        let mut k = 0;
        while self.vertices.len() >= 2 && k < self.vertices.len() {
            let n = self.vertices.len();
            let next = (k + 1) % n;
            if (self.vertices[next] - self.vertices[k]).norm() <= tol.geom {
                self.vertices.remove(k);
                self.tags.remove(k);
            } else {
                k += 1;
            }
        }
        if self.vertices.len() < 3 {
            self.vertices.clear();
            self.tags.clear();
            return;
        }
        let area = signed_area(&self.vertices);
        let longest = (0..self.vertices.len())
            .map(|k| {
                (self.vertices[(k + 1) % self.vertices.len()] - self.vertices[k]).norm()
            })
            .fold(0.0, f64::max);
        if area <= 0.0 || area / longest <= tol.geom {
            self.vertices.clear();
            self.tags.clear();
        }
    }
}

/// `poly ∩ hp` with default tolerances.
pub fn clip_halfplane(poly: &ConvexPolygon, hp: &HalfPlane) -> ConvexPolygon {
    clip_halfplane_tol(poly, hp, &Tolerance::default())
}

pub fn clip_halfplane_tol(poly: &ConvexPolygon, hp: &HalfPlane, tol: &Tolerance) -> ConvexPolygon {
    let mut t = TaggedPolygon::from_polygon(poly);
    t.clip(hp, 0, tol);
    t.into_polygon()
}

/// Intersection of two convex polygons.
pub fn intersect(p: &ConvexPolygon, q: &ConvexPolygon, tol: &Tolerance) -> ConvexPolygon {
    let mut t = TaggedPolygon::from_polygon(p);
    for hp in q.halfplanes() {
        t.clip(&hp, 0, tol);
        if t.vertices.is_empty() {
            break;
        }
    }
    t.into_polygon()
}

/// True iff the interiors intersect in more than `tol.area` of area.
pub fn polygons_overlap_tol(p: &ConvexPolygon, q: &ConvexPolygon, tol: &Tolerance) -> bool {
    match (p.bbox(), q.bbox()) {
        (Some(a), Some(b)) if a.overlaps(&b, 0.0) => intersect(p, q, tol).area() > tol.area,
        _ => false,
    }
}

pub fn polygons_overlap(p: &ConvexPolygon, q: &ConvexPolygon) -> bool {
    polygons_overlap_tol(p, q, &Tolerance::default())
}

/// Bisector half-plane of the power diagram: points at least as close (in
/// power) to `a` as to `b`: `2(v_b - v_a)·x <= |v_b|² - |v_a|² - w_b + w_a`.
pub fn power_halfplane(a: &PowerSite, b: &PowerSite) -> HalfPlane {
    HalfPlane {
        normal: 2.0 * (b.site - a.site),
        offset: b.site.norm_squared() - a.site.norm_squared() - b.weight + a.weight,
    }
}

/// Power cell of site `i` clipped to `domain`, with edges tagged by the
/// index of the neighboring site (or `Boundary` for domain edges).
pub fn power_cell_tagged(
    domain: &ConvexPolygon,
    i: usize,
    sites: &[PowerSite],
    tol: &Tolerance,
) -> TaggedPolygon {
    let mut cell = TaggedPolygon::from_polygon(domain);
    let si = &sites[i];
    // Nearest sites first: the cell shrinks quickly and later clips become
    // cheap non-binding checks.
    let mut order: Vec<usize> = (0..sites.len()).filter(|&j| j != i).collect();
    order.sort_by(|&a, &b| {
        let da = sites[a].power(&si.site);
        let db = sites[b].power(&si.site);
        da.total_cmp(&db).then(a.cmp(&b))
    });
    for j in order {
        cell.clip(&power_halfplane(si, &sites[j]), j, tol);
        if cell.vertices.is_empty() {
            break;
        }
    }
    cell
}

pub fn power_cell(domain: &ConvexPolygon, i: usize, sites: &[PowerSite]) -> ConvexPolygon {
    power_cell_tagged(domain, i, sites, &Tolerance::default()).into_polygon()
}

/// All power cells, computed in parallel with a stable output order.
pub fn power_diagram(
    domain: &ConvexPolygon,
    sites: &[PowerSite],
    tol: &Tolerance,
) -> Vec<TaggedPolygon> {
    (0..sites.len())
        .into_par_iter()
        .map(|i| power_cell_tagged(domain, i, sites, tol))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn p(x: f64, y: f64) -> Point {
        Point::new(x, y)
    }

    #[test]
    fn clip_axis_aligned() {
        let sq = ConvexPolygon::unit_square();
        let r = clip_halfplane(&sq, &HalfPlane::new(p(1.0, 0.0), 0.5));
        assert_abs_diff_eq!(r.area(), 0.5, epsilon = 1e-15);
        let bb = r.bbox().unwrap();
        assert_abs_diff_eq!(bb.max.x, 0.5);
        assert_abs_diff_eq!(bb.max.y, 1.0);
    }

    #[test]
    fn clip_non_binding() {
        let sq = ConvexPolygon::unit_square();
        let r = clip_halfplane(&sq, &HalfPlane::new(p(1.0, 0.0), 2.0));
        assert_eq!(r, sq);
    }

    #[test]
    fn clip_diagonal() {
        let sq = ConvexPolygon::unit_square();
        let r = clip_halfplane(&sq, &HalfPlane::new(p(1.0, 1.0), 1.0));
        assert_eq!(r.len(), 3);
        assert_abs_diff_eq!(r.area(), 0.5, epsilon = 1e-15);
        for v in [p(0.0, 0.0), p(1.0, 0.0), p(0.0, 1.0)] {
            assert!(r.vertices().iter().any(|w| (w - v).norm() < 1e-15));
        }
    }

    #[test]
    fn clip_everything_away() {
        let sq = ConvexPolygon::unit_square();
        let r = clip_halfplane(&sq, &HalfPlane::new(p(1.0, 0.0), -0.1));
        assert!(r.is_empty());
        assert_eq!(r.area(), 0.0);
    }

    #[test]
    fn sliver_collapses() {
        let sq = ConvexPolygon::unit_square();
        let r = clip_halfplane(&sq, &HalfPlane::new(p(1.0, 0.0), 1e-14));
        assert!(r.is_empty());
    }

    #[test]
    fn areas() {
        assert_eq!(ConvexPolygon::unit_square().area(), 1.0);
        let tri = ConvexPolygon::from_vertices_unchecked(vec![p(0.0, 0.0), p(1.0, 0.0), p(0.0, 1.0)]);
        assert_eq!(tri.area(), 0.5);
        assert_eq!(ConvexPolygon::empty().area(), 0.0);
        let c = tri.centroid().unwrap();
        assert_abs_diff_eq!(c.x, 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(c.y, 1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn try_new_validates() {
        let cw = vec![p(0.0, 0.0), p(0.0, 1.0), p(1.0, 1.0), p(1.0, 0.0)];
        let poly = ConvexPolygon::try_new(cw, EPS_GEOM).unwrap();
        assert_eq!(poly.area(), 1.0);
        let dart = vec![p(0.0, 0.0), p(2.0, 0.0), p(1.0, 0.2), p(1.0, 2.0)];
        assert!(matches!(
            ConvexPolygon::try_new(dart, EPS_GEOM),
            Err(PolygonError::NotConvex(_))
        ));
        assert!(ConvexPolygon::try_new(vec![p(0.0, 0.0), p(1.0, 0.0)], EPS_GEOM).is_err());
        assert!(ConvexPolygon::try_new(vec![p(0.0, 0.0), p(1.0, 0.0), p(2.0, 0.0)], EPS_GEOM).is_err());
    }

    #[test]
    fn power_cell_equal_weights_bisect() {
        let sq = ConvexPolygon::unit_square();
        let sites = [PowerSite::new(p(0.25, 0.5), 0.0), PowerSite::new(p(0.75, 0.5), 0.0)];
        let c0 = power_cell(&sq, 0, &sites);
        assert_abs_diff_eq!(c0.area(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(c0.bbox().unwrap().max.x, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn power_cell_weighted_boundary() {
        // |x|² - w1 = |x - e1|² - w2  <=>  x1 = (1 + w1 - w2) / 2
        let dom = ConvexPolygon::rect(-2.0, -1.0, 3.0, 1.0);
        for d in [-0.5, 0.0, 0.3, 1.2] {
            let sites = [PowerSite::new(p(0.0, 0.0), 0.7 + d), PowerSite::new(p(1.0, 0.0), 0.7)];
            let c0 = power_cell(&dom, 0, &sites);
            assert_abs_diff_eq!(c0.bbox().unwrap().max.x, (1.0 + d) / 2.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn single_site_cell_is_domain() {
        let sq = ConvexPolygon::unit_square();
        let c = power_cell(&sq, 0, &[PowerSite::new(p(5.0, 5.0), -3.0)]);
        assert_eq!(c, sq);
    }

    #[test]
    fn overlap_cases() {
        let a = ConvexPolygon::unit_square();
        assert!(!polygons_overlap(&a, &a.translate(&p(2.0, 0.0))));
        assert!(polygons_overlap(&a, &a));
        assert!(!polygons_overlap(&a, &a.translate(&p(1.0, 0.0))));
        assert!(polygons_overlap(&a, &a.translate(&p(0.5, 0.5))));
    }

    #[test]
    fn tagged_lengths_track_neighbors() {
        let sq = ConvexPolygon::unit_square();
        let sites = [PowerSite::new(p(0.25, 0.5), 0.0), PowerSite::new(p(0.75, 0.5), 0.0)];
        let c0 = power_cell_tagged(&sq, 0, &sites, &Tolerance::default());
        assert_abs_diff_eq!(c0.tagged_length(EdgeTag::Cut(1)), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(c0.tagged_length(EdgeTag::Boundary), 2.0, epsilon = 1e-15);
    }

    #[test]
    fn monte_carlo_cell_fractions() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let dom = ConvexPolygon::regular(p(0.0, 0.0), 1.0, 64);
        let sites: Vec<PowerSite> = (0..7)
            .map(|_| PowerSite::new(p(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)), rng.gen_range(0.0..0.3)))
            .collect();
        let cells = power_diagram(&dom, &sites, &Tolerance::default());
        let total: f64 = cells.iter().map(|c| c.to_polygon().area()).sum();
        assert_abs_diff_eq!(total, dom.area(), epsilon = 7.0 * EPS_AREA);
        let n = 100_000;
        let mut counts = vec![0usize; sites.len()];
        let mut inside = 0usize;
        while inside < n {
            let x = p(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            if !dom.contains(&x, 0.0) {
                continue;
            }
            inside += 1;
            let best = (0..sites.len())
                .min_by(|&a, &b| sites[a].power(&x).total_cmp(&sites[b].power(&x)))
                .unwrap();
            counts[best] += 1;
        }
        for (i, c) in cells.iter().enumerate() {
            let frac = c.to_polygon().area() / dom.area();
            let emp = counts[i] as f64 / n as f64;
            let se = (frac * (1.0 - frac) / n as f64).sqrt().max(1e-12);
            assert!((emp - frac).abs() <= 3.0 * se + 1e-9, "cell {i}: {emp} vs {frac}");
        }
    }
}
