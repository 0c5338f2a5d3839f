//! Finite measures split into absolutely continuous and singular parts.

use crate::geom2d::{ConvexPolygon, Point};

/// Support of an absolutely continuous piece: an interval on the line or a
/// convex polygon in the plane.
#[derive(Clone, Debug, PartialEq)]
pub enum Support {
    Interval(f64, f64),
    Polygon(ConvexPolygon),
}

impl Support {
    /// Length or area.
    pub fn size(&self) -> f64 {
        match self {
            Support::Interval(a, b) => (b - a).max(0.0),
            Support::Polygon(p) => p.area(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AcPart {
    pub support: Support,
    pub density: f64,
}

impl AcPart {
    pub fn mass(&self) -> f64 {
        self.density * self.support.size()
    }
}

/// Point mass. One-dimensional measures use `location.y == 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Atom {
    pub location: Point,
    pub mass: f64,
}

/// `κ = μ + ν`: uniform-density pieces plus singular mass.
///
/// `singular_diffuse_mass` is singular mass that is not attributed to isolated
/// atoms (grid mode only); `diffuse_support` holds the bins that carry it so
/// that the measure can still be integrated.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MeasureDecomposition {
    pub ac_parts: Vec<AcPart>,
    pub atoms: Vec<Atom>,
    pub singular_diffuse_mass: f64,
    pub diffuse_support: Vec<Atom>,
}

impl MeasureDecomposition {
    pub fn ac_mass(&self) -> f64 {
        self.ac_parts.iter().map(AcPart::mass).fold(0.0, |a, b| a + b)
    }

    pub fn atom_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.mass).fold(0.0, |a, b| a + b)
    }

    /// Atoms plus diffuse singular mass.
    pub fn singular_mass(&self) -> f64 {
        self.atom_mass() + self.singular_diffuse_mass
    }

    pub fn total_mass(&self) -> f64 {
        self.ac_mass() + self.singular_mass()
    }

    /// All point masses that enter integrals: atoms and diffuse bins.
    pub fn point_masses(&self) -> impl Iterator<Item = &Atom> {
        self.atoms.iter().chain(self.diffuse_support.iter())
    }
}
