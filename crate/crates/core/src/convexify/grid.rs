use crate::geom2d::Point;

/// Uniform grid along one axis: nodes `origin + k·spacing`, `k < n`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Axis {
    pub origin: f64,
    pub spacing: f64,
    pub n: usize,
}

impl Axis {
    pub fn new(origin: f64, spacing: f64, n: usize) -> Self {
        Self { origin, spacing, n }
    }

    /// `n` nodes spanning `[lo, hi]`.
    pub fn spanning(lo: f64, hi: f64, n: usize) -> Self {
        assert!(n >= 2);
        Self {
            origin: lo,
            spacing: (hi - lo) / (n - 1) as f64,
            n,
        }
    }

    #[inline]
    pub fn node(&self, k: usize) -> f64 {
        self.origin + k as f64 * self.spacing
    }

    pub fn last(&self) -> f64 {
        self.node(self.n - 1)
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(|k| self.node(k))
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum GridError {
    #[error("grid functions have different shapes")]
    ShapeMismatch,
    #[error("grid must be one- or two-dimensional, got {0} axes")]
    BadDimension(usize),
    #[error("{0}")]
    Invalid(String),
    #[error("velocity range spans {0:.2} histogram bins, need at least 4; increase --grid or the bin count")]
    GridTooCoarse(f64),
}

/// Samples of a function on a 1D or 2D uniform grid, row-major (last axis
/// fastest). `+∞` marks nodes outside the domain mask.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    pub origin: Vec<f64>,
    pub spacing: Vec<f64>,
    pub dims: Vec<usize>,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn new(axes: &[Axis], values: Vec<f64>) -> Result<Self, GridError> {
        if axes.is_empty() || axes.len() > 2 {
            return Err(GridError::BadDimension(axes.len()));
        }
        let total: usize = axes.iter().map(|a| a.n).product();
        if total != values.len() {
            return Err(GridError::Invalid(format!(
                "{} values for {total} nodes",
                values.len()
            )));
        }
        if axes.iter().any(|a| a.n == 0 || !(a.spacing > 0.0) || !a.origin.is_finite()) {
            return Err(GridError::Invalid("axis needs n > 0, spacing > 0".into()));
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(GridError::Invalid("NaN sample".into()));
        }
        Ok(Self {
            origin: axes.iter().map(|a| a.origin).collect(),
            spacing: axes.iter().map(|a| a.spacing).collect(),
            dims: axes.iter().map(|a| a.n).collect(),
            values,
        })
    }

    pub fn sample_1d(axis: Axis, f: impl Fn(f64) -> f64) -> Self {
        let values = axis.nodes().map(f).collect();
        Self::new(&[axis], values).expect("valid axis")
    }

    pub fn sample_2d(axes: [Axis; 2], f: impl Fn(&Point) -> f64) -> Self {
        let mut values = Vec::with_capacity(axes[0].n * axes[1].n);
        for i in 0..axes[0].n {
            for j in 0..axes[1].n {
                values.push(f(&Point::new(axes[0].node(i), axes[1].node(j))));
            }
        }
        Self::new(&axes, values).expect("valid axes")
    }

    pub fn ndim(&self) -> usize {
        self.dims.len()
    }

    pub fn axis(&self, a: usize) -> Axis {
        Axis::new(self.origin[a], self.spacing[a], self.dims[a])
    }

    pub fn axes(&self) -> Vec<Axis> {
        (0..self.ndim()).map(|a| self.axis(a)).collect()
    }

    /// Coordinates of node `idx`; 1D grids report `y = 0`.
    pub fn coords(&self, idx: usize) -> Point {
        match self.ndim() {
            1 => Point::new(self.axis(0).node(idx), 0.0),
            _ => {
                let (i, j) = (idx / self.dims[1], idx % self.dims[1]);
                Point::new(self.axis(0).node(i), self.axis(1).node(j))
            }
        }
    }

    /// Axis neighbors of node `idx`; `None` where the node lies on the grid edge.
    pub fn neighbors(&self, idx: usize) -> Vec<Option<usize>> {
        match self.ndim() {
            1 => vec![
                idx.checked_sub(1),
                (idx + 1 < self.dims[0]).then_some(idx + 1),
            ],
            _ => {
                let (n0, n1) = (self.dims[0], self.dims[1]);
                let (i, j) = (idx / n1, idx % n1);
                vec![
                    (i > 0).then(|| idx - n1),
                    (i + 1 < n0).then(|| idx + n1),
                    (j > 0).then(|| idx - 1),
                    (j + 1 < n1).then(|| idx + 1),
                ]
            }
        }
    }

    pub fn mask_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_finite()).count()
    }

    /// Multilinear interpolation; `None` outside the grid or next to `+∞`.
    pub fn interpolate(&self, x: &Point) -> Option<f64> {
        let locate = |a: usize, c: f64| -> Option<(usize, f64)> {
            let ax = self.axis(a);
            let s = (c - ax.origin) / ax.spacing;
            if s < -1e-9 || s > (ax.n - 1) as f64 + 1e-9 {
                return None;
            }
            if ax.n == 1 {
                return Some((0, 0.0));
            }
            let k = (s.floor().max(0.0) as usize).min(ax.n - 2);
            Some((k, (s - k as f64).clamp(0.0, 1.0)))
        };
        let v = match self.ndim() {
            1 => {
                let (k, u) = locate(0, x.x)?;
                if self.dims[0] == 1 {
                    self.values[0]
                } else {
                    (1.0 - u) * self.values[k] + u * self.values[k + 1]
                }
            }
            _ => {
                let (i, u) = locate(0, x.x)?;
                let (j, w) = locate(1, x.y)?;
                let n1 = self.dims[1];
                let at = |a: usize, b: usize| self.values[a * n1 + b];
                let (i1, j1) = ((i + 1).min(self.dims[0] - 1), (j + 1).min(n1 - 1));
                (1.0 - u) * ((1.0 - w) * at(i, j) + w * at(i, j1))
                    + u * ((1.0 - w) * at(i1, j) + w * at(i1, j1))
            }
        };
        v.is_finite().then_some(v)
    }
}
