//! Minimal deterministic SVG output.

use std::fmt::Write;

use crate::alexandrov::PiecewiseAffinePotential;
use crate::breakflow::BreakingScene;
use crate::geom2d::{BBox, ConvexPolygon, Point};
use crate::packings::DiskPacking;

const SIZE: f64 = 800.0;

/// Canvas mapping a world box onto an `800`-wide image, `y` up.
pub struct Svg {
    world: BBox,
    scale: f64,
    height: f64,
    body: String,
}

impl Svg {
    pub fn new(world: BBox) -> Self {
        let w = (world.max.x - world.min.x).max(1e-12);
        let h = (world.max.y - world.min.y).max(1e-12);
        let scale = SIZE / w;
        Self {
            world,
            scale,
            height: h * scale,
            body: String::new(),
        }
    }

    /// Box padded by a fraction of its larger side.
    pub fn padded(b: BBox, frac: f64) -> BBox {
        let pad = frac * (b.max.x - b.min.x).max(b.max.y - b.min.y);
        BBox {
            min: b.min - Point::new(pad, pad),
            max: b.max + Point::new(pad, pad),
        }
    }

    fn map(&self, p: &Point) -> (f64, f64) {
        (
            (p.x - self.world.min.x) * self.scale,
            self.height - (p.y - self.world.min.y) * self.scale,
        )
    }

    pub fn polygon(&mut self, poly: &ConvexPolygon, fill: &str, stroke: &str) {
        if poly.is_empty() {
            return;
        }
        let pts: Vec<String> = poly
            .vertices()
            .iter()
            .map(|v| {
                let (x, y) = self.map(v);
                format!("{x:.3},{y:.3}")
            })
            .collect();
        let _ = writeln!(
            self.body,
            r#"<polygon points="{}" fill="{fill}" stroke="{stroke}" stroke-width="0.5"/>"#,
            pts.join(" ")
        );
    }

    pub fn circle(&mut self, c: &Point, r: f64, fill: &str, stroke: &str) {
        let (x, y) = self.map(c);
        let _ = writeln!(
            self.body,
            r#"<circle cx="{x:.3}" cy="{y:.3}" r="{:.3}" fill="{fill}" stroke="{stroke}" stroke-width="0.5"/>"#,
            r * self.scale
        );
    }

    pub fn polyline(&mut self, pts: &[Point], stroke: &str) {
        let p: Vec<String> = pts
            .iter()
            .map(|v| {
                let (x, y) = self.map(v);
                format!("{x:.3},{y:.3}")
            })
            .collect();
        let _ = writeln!(
            self.body,
            r#"<polyline points="{}" fill="none" stroke="{stroke}" stroke-width="1.5"/>"#,
            p.join(" ")
        );
    }

    pub fn rect(&mut self, lo: &Point, hi: &Point, fill: &str) {
        let (x0, y1) = self.map(lo);
        let (x1, y0) = self.map(hi);
        let _ = writeln!(
            self.body,
            r#"<rect x="{x0:.3}" y="{y0:.3}" width="{:.3}" height="{:.3}" fill="{fill}"/>"#,
            x1 - x0,
            y1 - y0
        );
    }

    pub fn finish(self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SIZE:.0}\" height=\"{:.0}\" viewBox=\"0 0 {SIZE:.0} {:.3}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{}</svg>\n",
            self.height.ceil(),
            self.height,
            self.body
        )
    }
}

fn union_bbox<'a>(polys: impl Iterator<Item = &'a ConvexPolygon>) -> Option<BBox> {
    polys.filter_map(ConvexPolygon::bbox).reduce(|a, b| a.union(&b))
}

/// Gray-scale color for `u ∈ [0, 1]`.
fn gray(u: f64) -> String {
    let v = (255.0 * u.clamp(0.0, 1.0)).round() as u8;
    format!("rgb({v},{v},{v})")
}

/// Shards of a breaking scene, with the original domain outlined.
pub fn scene_svg(scene: &BreakingScene, domain: Option<&ConvexPolygon>) -> String {
    let bb = union_bbox(scene.shards.iter().chain(domain)).unwrap_or(BBox {
        min: Point::zeros(),
        max: Point::new(1.0, 1.0),
    });
    let mut svg = Svg::new(Svg::padded(bb, 0.02));
    if let Some(d) = domain {
        svg.polygon(d, "none", "#bbbbbb");
    }
    for s in &scene.shards {
        svg.polygon(s, "#4a7ab5", "#1d3557");
    }
    svg.finish()
}

/// Disks of a packing inside their container.
pub fn packing_svg(packing: &DiskPacking) -> String {
    let container = packing.container.polygon();
    let bb = container.bbox().unwrap_or(BBox {
        min: Point::zeros(),
        max: Point::new(1.0, 1.0),
    });
    let mut svg = Svg::new(Svg::padded(bb, 0.02));
    svg.polygon(&container, "none", "#000000");
    for d in &packing.disks {
        svg.circle(&d.center, d.radius, "#e9c46a", "#264653");
    }
    svg.finish()
}

/// Curves `(x, y)` on shared axes.
pub fn curves_svg(curves: &[Vec<Point>]) -> String {
    let pts: Vec<&Point> = curves.iter().flatten().collect();
    let (mut lo, mut hi) = (Point::new(0.0, 0.0), Point::new(1.0, 1.0));
    for p in &pts {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    let mut svg = Svg::new(Svg::padded(BBox { min: lo, max: hi }, 0.03));
    svg.polyline(&[Point::new(lo.x, 0.0), Point::new(hi.x, 0.0)], "#999999");
    svg.polyline(&[Point::new(0.0, lo.y), Point::new(0.0, hi.y)], "#999999");
    let colors = ["#1d3557", "#e63946", "#2a9d8f", "#f4a261", "#6a4c93"];
    for (k, c) in curves.iter().enumerate() {
        svg.polyline(c, colors[k % colors.len()]);
    }
    svg.finish()
}

/// Gray-scale height map of a potential on an `n × n` grid over its domain.
pub fn heightmap_svg(pot: &PiecewiseAffinePotential, n: usize) -> String {
    let Some(bb) = pot.domain.bbox() else {
        return Svg::new(BBox {
            min: Point::zeros(),
            max: Point::new(1.0, 1.0),
        })
        .finish();
    };
    let n = n.max(2);
    let d = Point::new((bb.max.x - bb.min.x) / n as f64, (bb.max.y - bb.min.y) / n as f64);
    let mut vals = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let c = bb.min + Point::new((i as f64 + 0.5) * d.x, (j as f64 + 0.5) * d.y);
            vals.push(pot.domain.contains(&c, 0.0).then(|| pot.eval(&c)));
        }
    }
    let (lo, hi) = vals
        .iter()
        .flatten()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut svg = Svg::new(bb);
    for i in 0..n {
        for j in 0..n {
            if let Some(v) = vals[i * n + j] {
                let lo_pt = bb.min + Point::new(i as f64 * d.x, j as f64 * d.y);
                svg.rect(&lo_pt, &(lo_pt + d), &gray((v - lo) / span));
            }
        }
    }
    svg.finish()
}
