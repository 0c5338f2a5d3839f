//! Finite Alexandrov problem as semi-discrete optimal transport.
//!
//! Given a convex domain Ω and pairs `(m_i, v_i)` with distinct velocities and
//! `Σ m_i = |Ω|`, find heights `h_i` such that the convex potential
//! `φ(x) = max_i (v_i·x + h_i)` has the piece `A_i = {∇φ = v_i}` of area `m_i`.
//!
//! The pieces are the power cells of sites `v_i` with weights
//! `w_i = 2 h_i + |v_i|²`. The heights minimize the convex dual
//!
//! ```text
//! Φ(h) = ∫_Ω max_i (v_i·x + h_i) dx − Σ_i h_i m_i,    ∂Φ/∂h_i = |A_i(h)| − m_i
//! ```
//!
//! which is solved by damped Newton. The Hessian is the weighted graph
//! Laplacian of the cell adjacency: `∂|A_i|/∂h_j = −ℓ_ij / |v_i − v_j|` for
//! neighbors, where `ℓ_ij` is the length of the shared edge.

use nalgebra::{DMatrix, DVector};

use crate::geom2d::{
    power_diagram, ConvexPolygon, EdgeTag, Point, PowerSite, TaggedPolygon, Tolerance,
};

pub const EPS_MASS: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MassVelocity {
    pub mass: f64,
    pub velocity: Point,
}

impl MassVelocity {
    pub fn new(mass: f64, velocity: Point) -> Self {
        Self { mass, velocity }
    }
}

/// Input of the Alexandrov problem; equivalently the pure point measure
/// `Σ m_i δ_{v_i}` together with the source domain.
#[derive(Clone, Debug, PartialEq)]
pub struct MassVelocityData {
    pub domain: ConvexPolygon,
    pub pairs: Vec<MassVelocity>,
}

#[derive(Debug, thiserror::Error)]
pub enum AlexandrovError {
    #[error("velocities {0} and {1} coincide")]
    DegenerateData(usize, usize),
    #[error("invalid mass-velocity data: {0}")]
    InvalidData(String),
    #[error("solver did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        best: Box<PiecewiseAffinePotential>,
    },
}

impl MassVelocityData {
    /// Checks positivity, distinctness and mass balance.
    pub fn new(domain: ConvexPolygon, pairs: Vec<MassVelocity>) -> Result<Self, AlexandrovError> {
        let data = Self { domain, pairs };
        data.validate(EPS_MASS)?;
        Ok(data)
    }

    pub fn validate(&self, eps_mass: f64) -> Result<(), AlexandrovError> {
        if self.pairs.is_empty() {
            return Err(AlexandrovError::InvalidData("no mass-velocity pairs".into()));
        }
        let area = self.domain.area();
        if area <= 0.0 {
            return Err(AlexandrovError::InvalidData("domain has zero area".into()));
        }
        for (i, p) in self.pairs.iter().enumerate() {
            if !(p.mass > 0.0) || !p.mass.is_finite() {
                return Err(AlexandrovError::InvalidData(format!("mass {i} is not positive")));
            }
            if !p.velocity.x.is_finite() || !p.velocity.y.is_finite() {
                return Err(AlexandrovError::InvalidData(format!("velocity {i} is not finite")));
            }
        }
        check_distinct(&self.velocities(), crate::geom2d::EPS_GEOM)?;
        let total: f64 = self.pairs.iter().map(|p| p.mass).sum();
        if (total - area).abs() > eps_mass * area.max(1.0) {
            return Err(AlexandrovError::InvalidData(format!(
                "masses sum to {total}, domain area is {area}"
            )));
        }
        Ok(())
    }

    pub fn velocities(&self) -> Vec<Point> {
        self.pairs.iter().map(|p| p.velocity).collect()
    }

    pub fn masses(&self) -> Vec<f64> {
        self.pairs.iter().map(|p| p.mass).collect()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

pub(crate) fn check_distinct(v: &[Point], eps: f64) -> Result<(), AlexandrovError> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].x.total_cmp(&v[b].x));
    for (k, &a) in order.iter().enumerate() {
        for &b in &order[k + 1..] {
            if v[b].x - v[a].x > eps {
                break;
            }
            if (v[a] - v[b]).norm() <= eps {
                return Err(AlexandrovError::DegenerateData(a.min(b), a.max(b)));
            }
        }
    }
    Ok(())
}

/// `φ(x) = max_i (v_i·x + h_i)` together with its realized pieces in Ω.
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewiseAffinePotential {
    pub velocities: Vec<Point>,
    pub heights: Vec<f64>,
    pub cells: Vec<ConvexPolygon>,
    pub domain: ConvexPolygon,
}

impl PiecewiseAffinePotential {
    /// Builds the pieces from velocities and heights.
    pub fn from_heights(domain: ConvexPolygon, velocities: Vec<Point>, heights: Vec<f64>) -> Self {
        let sites = power_sites(&velocities, &heights);
        let cells = power_diagram(&domain, &sites, &Tolerance::default())
            .into_iter()
            .map(TaggedPolygon::into_polygon)
            .collect();
        Self {
            velocities,
            heights,
            cells,
            domain,
        }
    }

    pub fn eval(&self, x: &Point) -> f64 {
        eval_affine_max(&self.velocities, &self.heights, x)
    }

    /// Index of the piece attaining the max at `x`.
    pub fn active_piece(&self, x: &Point) -> usize {
        let mut best = 0;
        let mut val = f64::NEG_INFINITY;
        for (i, (v, h)) in self.velocities.iter().zip(&self.heights).enumerate() {
            let s = v.dot(x) + h;
            if s > val {
                val = s;
                best = i;
            }
        }
        best
    }

    /// Power weights `w_i = 2h_i + |v_i|²`.
    pub fn weights(&self) -> Vec<f64> {
        self.velocities
            .iter()
            .zip(&self.heights)
            .map(|(v, h)| 2.0 * h + v.norm_squared())
            .collect()
    }

    pub fn areas(&self) -> Vec<f64> {
        self.cells.iter().map(ConvexPolygon::area).collect()
    }

    /// Shift heights so that `min h_i = 0`; the pieces do not change.
    pub fn normalize(&mut self) {
        let m = self.heights.iter().copied().fold(f64::INFINITY, f64::min);
        if m.is_finite() {
            for h in &mut self.heights {
                *h -= m;
            }
        }
    }

    pub fn len(&self) -> usize {
        self.velocities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.velocities.is_empty()
    }
}

pub fn eval_affine_max(velocities: &[Point], heights: &[f64], x: &Point) -> f64 {
    velocities
        .iter()
        .zip(heights)
        .map(|(v, h)| v.dot(x) + h)
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn eval_potential(pot: &PiecewiseAffinePotential, x: &Point) -> f64 {
    pot.eval(x)
}

fn power_sites(velocities: &[Point], heights: &[f64]) -> Vec<PowerSite> {
    velocities
        .iter()
        .zip(heights)
        .map(|(v, h)| PowerSite::new(*v, 2.0 * h + v.norm_squared()))
        .collect()
}

/// Power diagram at heights `h` with the quantities the solver needs.
struct Diagram {
    cells: Vec<TaggedPolygon>,
    areas: Vec<f64>,
}

impl Diagram {
    fn compute(domain: &ConvexPolygon, velocities: &[Point], h: &[f64], tol: &Tolerance) -> Self {
        let cells = power_diagram(domain, &power_sites(velocities, h), tol);
        let areas = cells.iter().map(|c| c.to_polygon().area()).collect();
        Self { cells, areas }
    }
}

/// Value and gradient of the dual functional at heights `h`.
pub fn dual_value_and_gradient(
    data: &MassVelocityData,
    h: &[f64],
) -> Result<(f64, Vec<f64>), AlexandrovError> {
    if h.len() != data.len() {
        return Err(AlexandrovError::InvalidData(format!(
            "{} heights for {} pairs",
            h.len(),
            data.len()
        )));
    }
    let velocities = data.velocities();
    check_distinct(&velocities, crate::geom2d::EPS_GEOM)?;
    let d = Diagram::compute(&data.domain, &velocities, h, &Tolerance::default());
    let mut value = 0.0;
    let mut grad = Vec::with_capacity(h.len());
    for (i, cell) in d.cells.iter().enumerate() {
        let poly = cell.to_polygon();
        let a = d.areas[i];
        if let Some(c) = poly.centroid() {
            // The integrand is affine on the cell: integral = area · value at centroid.
            value += a * (velocities[i].dot(&c) + h[i]);
        }
        value -= h[i] * data.pairs[i].mass;
        grad.push(a - data.pairs[i].mass);
    }
    Ok((value, grad))
}

/// Jacobian of the cell areas with respect to the heights.
pub fn area_jacobian(data: &MassVelocityData, h: &[f64]) -> DMatrix<f64> {
    let velocities = data.velocities();
    let d = Diagram::compute(&data.domain, &velocities, h, &Tolerance::default());
    jacobian_from(&d, &velocities)
}

fn jacobian_from(d: &Diagram, velocities: &[Point]) -> DMatrix<f64> {
    let k = velocities.len();
    let mut lens = DMatrix::<f64>::zeros(k, k);
    for (i, cell) in d.cells.iter().enumerate() {
        let n = cell.vertices.len();
        for e in 0..n {
            if let EdgeTag::Cut(j) = cell.tags[e] {
                lens[(i, j)] += (cell.vertices[(e + 1) % n] - cell.vertices[e]).norm();
            }
        }
    }
    let mut hess = DMatrix::<f64>::zeros(k, k);
    for i in 0..k {
        for j in (i + 1)..k {
            let l = 0.5 * (lens[(i, j)] + lens[(j, i)]);
            if l > 0.0 {
                let c = l / (velocities[i] - velocities[j]).norm();
                hess[(i, j)] -= c;
                hess[(j, i)] -= c;
                hess[(i, i)] += c;
                hess[(j, j)] += c;
            }
        }
    }
    hess
}

/// Starting heights for the Newton iteration.
#[derive(Clone, Debug, PartialEq)]
pub enum Init {
    /// `h = 0`; falls back to `Voronoi` at the domain centroid when a cell is empty.
    Zero,
    /// Explicit heights, with the same fallback.
    Heights(Vec<f64>),
    /// Heights whose power diagram is the Voronoi diagram of the velocities
    /// mapped affinely to `anchor + scale·(v_i − v̄)`. With `scale = None` the
    /// largest scale keeping every mapped site inside the domain at half its
    /// clearance is used; every cell is then nonempty.
    Voronoi { anchor: Point, scale: Option<f64> },
}

#[derive(Clone, Debug)]
pub struct SolverOptions {
    /// Target for `max_i |area(A_i) − m_i|`.
    pub tol: f64,
    pub max_iterations: usize,
    /// Line search rejects steps leaving a cell below `½·floor·min(m, a₀)`.
    pub damping_floor: f64,
    pub init: Init,
    pub geometry: Tolerance,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iterations: 100,
            damping_floor: 0.1,
            init: Init::Zero,
            geometry: Tolerance::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SolveReport {
    pub potential: PiecewiseAffinePotential,
    pub iterations: usize,
    pub residual: f64,
    /// `(iteration, max area residual)` after each accepted step, starting at 0.
    pub log: Vec<(usize, f64)>,
}

/// Solve with default options and the given residual tolerance.
pub fn solve_weights(
    data: &MassVelocityData,
    tol: f64,
) -> Result<PiecewiseAffinePotential, AlexandrovError> {
    let opts = SolverOptions {
        tol,
        ..SolverOptions::default()
    };
    solve_weights_with(data, &opts).map(|r| r.potential)
}

fn voronoi_heights(data: &MassVelocityData, anchor: Point, scale: Option<f64>) -> Vec<f64> {
    let v = data.velocities();
    let mean = v.iter().fold(Point::zeros(), |a, b| a + b) / v.len() as f64;
    let spread = v.iter().map(|p| (p - mean).norm()).fold(0.0, f64::max);
    let clearance = data.domain.signed_clearance(&anchor).max(0.0);
    let s = match scale {
        Some(s) => s,
        None if spread > 0.0 && clearance > 0.0 => 0.5 * clearance / spread,
        None => 1.0,
    };
    v.iter()
        .map(|p| {
            let q = anchor + s * (p - mean);
            -q.norm_squared() / (2.0 * s)
        })
        .collect()
}

fn max_abs(g: &[f64]) -> f64 {
    g.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn l2(g: &[f64]) -> f64 {
    g.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Newton direction with the last height pinned to remove the constant shift.
fn newton_direction(hess: &DMatrix<f64>, grad: &[f64]) -> Option<Vec<f64>> {
    let k = grad.len();
    if k == 1 {
        return Some(vec![0.0]);
    }
    let m = k - 1;
    let reduced = hess.view((0, 0), (m, m)).into_owned();
    let rhs = DVector::from_iterator(m, grad[..m].iter().map(|g| -g));
    let sol = match reduced.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => reduced.lu().solve(&rhs)?,
    };
    let mut d: Vec<f64> = sol.iter().copied().collect();
    d.push(0.0);
    if d.iter().all(|x| x.is_finite()) {
        Some(d)
    } else {
        None
    }
}

pub fn solve_weights_with(
    data: &MassVelocityData,
    opts: &SolverOptions,
) -> Result<SolveReport, AlexandrovError> {
    data.validate(EPS_MASS)?;
    let velocities = data.velocities();
    let masses = data.masses();
    let k = velocities.len();
    let tol = &opts.geometry;

    let centroid = data.domain.centroid().unwrap_or_else(Point::zeros);
    let mut h = match &opts.init {
        Init::Zero => vec![0.0; k],
        Init::Heights(h) if h.len() == k => h.clone(),
        Init::Heights(h) => {
            return Err(AlexandrovError::InvalidData(format!(
                "{} initial heights for {k} pairs",
                h.len()
            )))
        }
        Init::Voronoi { anchor, scale } => voronoi_heights(data, *anchor, *scale),
    };
    let mut diagram = Diagram::compute(&data.domain, &velocities, &h, tol);
    if diagram.areas.iter().any(|&a| a <= 0.0) {
        h = voronoi_heights(data, centroid, None);
        diagram = Diagram::compute(&data.domain, &velocities, &h, tol);
    }

    let min_mass = masses.iter().copied().fold(f64::INFINITY, f64::min);
    let min_area0 = diagram.areas.iter().copied().fold(f64::INFINITY, f64::min);
    let floor = 0.5 * opts.damping_floor * min_mass.min(min_area0);

    let residual_of = |d: &Diagram| -> Vec<f64> {
        d.areas.iter().zip(&masses).map(|(a, m)| a - m).collect()
    };
    let mut grad = residual_of(&diagram);
    let mut residual = max_abs(&grad);
    let mut log = vec![(0, residual)];
    let mut iterations = 0;

    let finish = |h: Vec<f64>, diagram: Diagram| {
        let mut pot = PiecewiseAffinePotential {
            velocities: velocities.clone(),
            heights: h,
            cells: diagram
                .cells
                .into_iter()
                .map(TaggedPolygon::into_polygon)
                .collect(),
            domain: data.domain.clone(),
        };
        pot.normalize();
        pot
    };

    while residual > opts.tol {
        if iterations >= opts.max_iterations {
            return Err(AlexandrovError::NonConvergence {
                iterations,
                residual,
                best: Box::new(finish(h, diagram)),
            });
        }
        iterations += 1;
        let hess = jacobian_from(&diagram, &velocities);
        let Some(dir) = newton_direction(&hess, &grad) else {
            return Err(AlexandrovError::NonConvergence {
                iterations,
                residual,
                best: Box::new(finish(h, diagram)),
            });
        };
        let norm0 = l2(&grad);
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let trial: Vec<f64> = h.iter().zip(&dir).map(|(a, d)| a + alpha * d).collect();
            let d = Diagram::compute(&data.domain, &velocities, &trial, tol);
            let g = residual_of(&d);
            let min_area = d.areas.iter().copied().fold(f64::INFINITY, f64::min);
            if min_area >= floor && l2(&g) <= (1.0 - 0.5 * alpha) * norm0 {
                accepted = Some((trial, d, g));
                break;
            }
            alpha *= 0.5;
        }
        let Some((trial, d, g)) = accepted else {
            return Err(AlexandrovError::NonConvergence {
                iterations,
                residual,
                best: Box::new(finish(h, diagram)),
            });
        };
        h = trial;
        diagram = d;
        grad = g;
        residual = max_abs(&grad);
        log.push((iterations, residual));
    }

    Ok(SolveReport {
        potential: finish(h, diagram),
        iterations,
        residual,
        log,
    })
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

    fn two_piece() -> MassVelocityData {
        MassVelocityData::new(
            ConvexPolygon::unit_square(),
            vec![MassVelocity::new(0.5, p(0.0, 0.0)), MassVelocity::new(0.5, p(1.0, 0.0))],
        )
        .unwrap()
    }

    pub(crate) fn random_instance(rng: &mut ChaCha8Rng, k: usize) -> MassVelocityData {
        let raw: Vec<f64> = (0..k).map(|_| rng.gen_range(0.2..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let pairs = raw
            .iter()
            .map(|m| MassVelocity::new(m / total, p(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))))
            .collect();
        MassVelocityData::new(ConvexPolygon::unit_square(), pairs).unwrap()
    }

    #[test]
    fn single_pair_gradient_vanishes() {
        let data = MassVelocityData::new(
            ConvexPolygon::unit_square(),
            vec![MassVelocity::new(1.0, p(0.3, -0.2))],
        )
        .unwrap();
        for h in [-3.0, 0.0, 5.5] {
            let (_, g) = dual_value_and_gradient(&data, &[h]).unwrap();
            assert_abs_diff_eq!(g[0], 0.0, epsilon = 1e-15);
        }
        let pot = solve_weights(&data, 1e-9).unwrap();
        assert_eq!(pot.heights, vec![0.0]);
        assert_eq!(pot.cells[0].area(), 1.0);
    }

    #[test]
    fn two_piece_symmetric_gradient() {
        let (_, g) = dual_value_and_gradient(&two_piece(), &[0.5, 0.0]).unwrap();
        assert_abs_diff_eq!(g[0], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g[1], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn two_piece_solution() {
        let pot = solve_weights(&two_piece(), 1e-12).unwrap();
        assert_abs_diff_eq!(pot.heights[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(pot.heights[1], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(pot.cells[0].bbox().unwrap().max.x, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn eval_two_piece() {
        let pot = PiecewiseAffinePotential::from_heights(
            ConvexPolygon::unit_square(),
            vec![p(0.0, 0.0), p(1.0, 0.0)],
            vec![0.5, 0.0],
        );
        assert_eq!(pot.eval(&p(0.25, 0.0)), 0.5);
        assert_eq!(pot.eval(&p(0.75, 0.0)), 0.75);
    }

    #[test]
    fn coincident_velocities_rejected() {
        let r = MassVelocityData::new(
            ConvexPolygon::unit_square(),
            vec![MassVelocity::new(0.5, p(0.1, 0.1)), MassVelocity::new(0.5, p(0.1, 0.1))],
        );
        assert!(matches!(r, Err(AlexandrovError::DegenerateData(0, 1))));
    }

    #[test]
    fn mass_imbalance_rejected() {
        let r = MassVelocityData::new(
            ConvexPolygon::unit_square(),
            vec![MassVelocity::new(0.5, p(0.0, 0.0)), MassVelocity::new(0.4, p(1.0, 0.0))],
        );
        assert!(matches!(r, Err(AlexandrovError::InvalidData(_))));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let data = random_instance(&mut rng, 5);
        let h = voronoi_heights(&data, p(0.5, 0.5), None);
        let (_, g) = dual_value_and_gradient(&data, &h).unwrap();
        let step = 1e-6;
        for i in 0..5 {
            let mut hp = h.clone();
            hp[i] += step;
            let mut hm = h.clone();
            hm[i] -= step;
            let fd = (dual_value_and_gradient(&data, &hp).unwrap().0
                - dual_value_and_gradient(&data, &hm).unwrap().0)
                / (2.0 * step);
            assert!((fd - g[i]).abs() <= 1e-6, "{i}: {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let data = random_instance(&mut rng, 6);
        let h = voronoi_heights(&data, p(0.5, 0.5), None);
        let jac = area_jacobian(&data, &h);
        let step = 1e-7;
        for j in 0..6 {
            let mut hp = h.clone();
            hp[j] += step;
            let mut hm = h.clone();
            hm[j] -= step;
            let gp = dual_value_and_gradient(&data, &hp).unwrap().1;
            let gm = dual_value_and_gradient(&data, &hm).unwrap().1;
            for i in 0..6 {
                let fd = (gp[i] - gm[i]) / (2.0 * step);
                assert!((fd - jac[(i, j)]).abs() <= 1e-5, "({i},{j}): {fd} vs {}", jac[(i, j)]);
            }
        }
    }

    #[test]
    fn corner_velocities_match_masses() {
        let data = MassVelocityData::new(
            ConvexPolygon::unit_square(),
            vec![
                MassVelocity::new(0.1, p(0.0, 0.0)),
                MassVelocity::new(0.2, p(1.0, 0.0)),
                MassVelocity::new(0.3, p(1.0, 1.0)),
                MassVelocity::new(0.4, p(0.0, 1.0)),
            ],
        )
        .unwrap();
        let report = solve_weights_with(&data, &SolverOptions::default()).unwrap();
        assert!(report.residual <= 1e-9);
        for (c, m) in report.potential.cells.iter().zip([0.1, 0.2, 0.3, 0.4]) {
            assert_abs_diff_eq!(c.area(), m, epsilon = 1e-9);
        }
        assert_eq!(report.potential.heights.iter().copied().fold(f64::INFINITY, f64::min), 0.0);
    }

    #[test]
    fn iteration_budget_reports_best() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let data = random_instance(&mut rng, 30);
        let opts = SolverOptions {
            max_iterations: 1,
            tol: 1e-14,
            ..SolverOptions::default()
        };
        match solve_weights_with(&data, &opts) {
            Err(AlexandrovError::NonConvergence { best, iterations, .. }) => {
                assert_eq!(iterations, 1);
                assert_eq!(best.len(), 30);
            }
            other => panic!("expected NonConvergence, got {other:?}"),
        }
    }
}
