//! The `shardflow` command line: argument parsing, configuration merging and
//! the subcommands. `run` returns instead of exiting so it can be tested.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::alexandrov::{solve_weights_with, AlexandrovError, MassVelocity, MassVelocityData, SolverOptions};
use crate::breakflow::{advance, check_convexity, check_injectivity, Partition};
use crate::convexify::{monge_ampere_1d, monge_ampere_grid, GridError, GridOptions, PiecewiseAffine1d};
use crate::geom2d::{BBox, ConvexPolygon, Point};
use crate::io;
use crate::line1d;
use crate::packings::{self, Container, DiskPacking};
use crate::stability::{self, CountableDataSpec, StabilityOptions};
use crate::svg;

#[derive(Parser, Debug)]
#[command(name = "shardflow", version, about = "Rigidly breaking potential flows")]
pub struct Cli {
    /// JSON run configuration; flags override its fields.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (default `out`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Solver tolerance.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Grid nodes per axis.
    #[arg(long, global = true)]
    pub grid: Option<usize>,
    /// Comma-separated times.
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    pub t: Option<Vec<f64>>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Solve for the heights of a mass-velocity problem.
    Solve(SolveArgs),
    /// Advance a solution, partition or packing and render the shards.
    Break(InputArgs),
    /// Monge-Ampère measure of a 1D or 2D potential.
    Ma(MaArgs),
    /// Cantor expansion wave.
    Cantor(CantorArgs),
    /// Generate a disk packing.
    Pack(PackArgs),
    /// Truncation stability experiment.
    Stability(StabilityArgs),
}

#[derive(Args, Debug, Default)]
pub struct SolveArgs {
    /// Problem JSON.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Solve a random problem with this many sites on the unit square instead.
    #[arg(long)]
    pub random: Option<usize>,
}

#[derive(Args, Debug, Default)]
pub struct InputArgs {
    /// Solution JSON, partition JSON or packing CSV.
    #[arg(long)]
    pub input: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
pub struct MaArgs {
    /// 1D pieces JSON or solution JSON.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Built-in potential: `tent1d` (−|x| on (−1, 1)) or `tent` (−|x₁| on (−1, 1)²).
    #[arg(long)]
    pub potential: Option<String>,
    /// Histogram bins per axis in grid mode.
    #[arg(long)]
    pub bins: Option<usize>,
}

#[derive(Args, Debug, Default)]
pub struct CantorArgs {
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long)]
    pub samples: Option<usize>,
}

#[derive(Args, Debug, Default)]
pub struct PackArgs {
    /// `apollonian`, `osculatory` or `vitali`.
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    pub generations: Option<usize>,
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long)]
    pub target: Option<f64>,
}

#[derive(Args, Debug, Default)]
pub struct StabilityArgs {
    #[arg(long, value_delimiter = ',')]
    pub ns: Option<Vec<usize>>,
    /// Mass ratio of the geometric data.
    #[arg(long)]
    pub ratio: Option<f64>,
    #[arg(long)]
    pub test_functions: Option<usize>,
}

/// Merged configuration: config file fields overridden by flags.
#[derive(Deserialize, Debug, Default, Clone, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub tol: Option<f64>,
    pub grid: Option<usize>,
    pub t: Option<Vec<f64>>,
    pub input: Option<PathBuf>,
    pub random: Option<usize>,
    pub potential: Option<String>,
    pub bins: Option<usize>,
    pub depth: Option<usize>,
    pub samples: Option<usize>,
    pub method: Option<String>,
    pub generations: Option<usize>,
    pub count: Option<usize>,
    pub target: Option<f64>,
    pub ns: Option<Vec<usize>>,
    pub ratio: Option<f64>,
    pub test_functions: Option<usize>,
    pub max_iterations: Option<usize>,
}

pub fn parse_config(s: &str) -> Result<RunConfig, CliError> {
    serde_json::from_str(s).map_err(|e| CliError::Input(format!("config: {e}")))
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("input error: {0}")]
    Input(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Numerical(_) => 1,
            CliError::Input(_) => 2,
        }
    }
}

impl From<io::IoError> for CliError {
    fn from(e: io::IoError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<AlexandrovError> for CliError {
    fn from(e: AlexandrovError) -> Self {
        match e {
            AlexandrovError::NonConvergence { .. } => CliError::Numerical(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

macro_rules! overlay {
    ($cfg:ident, $src:expr, $($field:ident),*) => {
        {$( if let Some(v) = $src.$field.clone() { $cfg.$field = Some(v); } )*}
    };
}

impl Cli {
    /// Config file (if any) with flags applied on top.
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(p) => parse_config(&read(p)?)?,
            None => RunConfig::default(),
        };
        overlay!(cfg, self, out, seed, tol, grid, t);
        match &self.command {
            Command::Solve(a) => overlay!(cfg, a, input, random),
            Command::Break(a) => overlay!(cfg, a, input),
            Command::Ma(a) => overlay!(cfg, a, input, potential, bins),
            Command::Cantor(a) => overlay!(cfg, a, depth, samples),
            Command::Pack(a) => overlay!(cfg, a, method, generations, count, target),
            Command::Stability(a) => overlay!(cfg, a, ns, ratio, test_functions),
        }
        validate(&cfg)?;
        Ok(cfg)
    }
}

fn validate(cfg: &RunConfig) -> Result<(), CliError> {
    let bad = |m: String| Err(CliError::Input(m));
    if let Some(t) = &cfg.t {
        if t.is_empty() || t.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return bad("--t needs finite non-negative times".into());
        }
    }
    if let Some(tol) = cfg.tol {
        if !(tol > 0.0 && tol.is_finite()) {
            return bad(format!("--tol must be positive, got {tol}"));
        }
    }
    if let Some(g) = cfg.grid {
        if !(8..=8192).contains(&g) {
            return bad(format!("--grid must lie in [8, 8192], got {g}"));
        }
    }
    if let Some(b) = cfg.bins {
        if !(1..=4096).contains(&b) {
            return bad(format!("--bins must lie in [1, 4096], got {b}"));
        }
    }
    if let Some(d) = cfg.depth {
        if d > 20 {
            return bad(format!("--depth must be at most 20, got {d}"));
        }
    }
    if let Some(ns) = &cfg.ns {
        if ns.is_empty() || ns.iter().any(|&n| n == 0 || n > 4096) {
            return bad("--ns needs sizes in [1, 4096]".into());
        }
    }
    if let Some(r) = cfg.ratio {
        if !(r > 0.0 && r <= 1.0) {
            return bad(format!("--ratio must lie in (0, 1], got {r}"));
        }
    }
    if let Some(k) = cfg.random {
        if !(1..=10_000).contains(&k) {
            return bad(format!("--random must lie in [1, 10000], got {k}"));
        }
    }
    Ok(())
}

fn read(p: &Path) -> Result<String, CliError> {
    fs::read_to_string(p).map_err(|e| CliError::Input(format!("{}: {e}", p.display())))
}

struct Output {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Output {
    fn new(cfg: &RunConfig) -> Result<Self, CliError> {
        let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("out"));
        fs::create_dir_all(&dir).map_err(|e| CliError::Input(format!("{}: {e}", dir.display())))?;
        Ok(Self {
            dir,
            written: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
        let p = self.dir.join(name);
        fs::write(&p, contents).map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?;
        self.written.push(p);
        Ok(())
    }
}

/// Outcome of a successful run: a human-readable summary and the files written.
#[derive(Debug)]
pub struct Report {
    pub summary: String,
    pub files: Vec<PathBuf>,
}

/// Parse arguments and run. Help and version requests come back as
/// `Ok` with the rendered text as summary.
pub fn run<I, T>(args: I) -> Result<Report, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => Ok(Report {
                    summary: e.to_string(),
                    files: vec![],
                }),
                _ => Err(CliError::Input(e.to_string())),
            };
        }
    };
    let cfg = cli.resolve()?;
    let mut out = Output::new(&cfg)?;
    let summary = match &cli.command {
        Command::Solve(_) => cmd_solve(&cfg, &mut out)?,
        Command::Break(_) => cmd_break(&cfg, &mut out)?,
        Command::Ma(_) => cmd_ma(&cfg, &mut out)?,
        Command::Cantor(_) => cmd_cantor(&cfg, &mut out)?,
        Command::Pack(_) => cmd_pack(&cfg, &mut out)?,
        Command::Stability(_) => cmd_stability(&cfg, &mut out)?,
    };
    Ok(Report {
        summary,
        files: out.written,
    })
}

fn times(cfg: &RunConfig, default: &[f64]) -> Vec<f64> {
    cfg.t.clone().unwrap_or_else(|| default.to_vec())
}

/// Random problem on the unit square: distinct velocities in `[−1, 1]²`,
/// masses uniform in `[0.1, 1]` normalized to total area 1.
pub fn random_problem(k: usize, seed: u64) -> MassVelocityData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v: Vec<Point> = (0..k)
        .map(|_| Point::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    let m: Vec<f64> = (0..k).map(|_| rng.gen_range(0.1..1.0)).collect();
    let total: f64 = m.iter().sum();
    MassVelocityData::new(
        ConvexPolygon::unit_square(),
        v.into_iter().zip(m).map(|(v, m)| MassVelocity::new(m / total, v)).collect(),
    )
    .expect("random data is valid with probability one")
}

fn cmd_solve(cfg: &RunConfig, out: &mut Output) -> Result<String, CliError> {
    let data = match (&cfg.input, cfg.random) {
        (Some(p), _) => io::parse_problem_json(&read(p)?)?,
        (None, Some(k)) => random_problem(k, cfg.seed.unwrap_or(0)),
        (None, None) => return Err(CliError::Input("solve needs --input or --random".into())),
    };
    let opts = SolverOptions {
        tol: cfg.tol.unwrap_or(1e-9),
        max_iterations: cfg.max_iterations.unwrap_or(100),
        ..SolverOptions::default()
    };
    let report = solve_weights_with(&data, &opts)?;
    let mut pot = report.potential;
    pot.normalize();
    out.write("solution.json", io::solution_to_json(&pot, report.residual))?;
    let mut log = String::from("iteration,residual\n");
    for (it, r) in &report.log {
        let _ = writeln!(log, "{it},{r:e}");
    }
    out.write("convergence.csv", log)?;
    Ok(format!(
        "solved {} sites in {} iterations, residual {:.3e}",
        data.len(),
        report.iterations,
        report.residual
    ))
}

/// Partition to advance and whether it is known to be convex.
fn load_breakable(cfg: &RunConfig) -> Result<(Partition, bool), CliError> {
    let path = cfg
        .input
        .as_ref()
        .ok_or_else(|| CliError::Input("break needs --input".into()))?;
    let text = read(path)?;
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        let disks = io::parse_packing_csv(&text)?;
        let packing = packing_from_disks(disks)?;
        packing
            .validate(1e-9)
            .map_err(|e| CliError::Input(e.to_string()))?;
        let pot = packings::packing_potential(&packing);
        return Ok((Partition::from(&pot), true));
    }
    if let Ok((pot, _)) = io::parse_solution_json(&text) {
        return Ok((Partition::from(&pot), true));
    }
    let partition = io::parse_partition_json(&text)?;
    let convex = check_convexity(&partition).map_err(|e| CliError::Input(e.to_string()))?;
    Ok((partition, convex))
}

/// Disks from CSV; an enclosing row becomes the container, otherwise the
/// bounding box of the disks.
fn packing_from_disks(disks: Vec<packings::Disk>) -> Result<DiskPacking, CliError> {
    let (enclosing, inner): (Vec<_>, Vec<_>) = disks.into_iter().partition(|d| d.is_enclosing());
    if inner.is_empty() {
        return Err(CliError::Input("packing has no disks".into()));
    }
    let container = match enclosing.as_slice() {
        [e] => Container::Circle(*e),
        [] => {
            let b = inner
                .iter()
                .map(|d| BBox {
                    min: d.center - Point::new(d.radius, d.radius),
                    max: d.center + Point::new(d.radius, d.radius),
                })
                .reduce(|a, b| a.union(&b))
                .expect("nonempty");
            Container::Polygon(ConvexPolygon::rect(b.min.x, b.min.y, b.max.x, b.max.y))
        }
        _ => return Err(CliError::Input("more than one enclosing circle".into())),
    };
    Ok(DiskPacking { container, disks: inner })
}

fn cmd_break(cfg: &RunConfig, out: &mut Output) -> Result<String, CliError> {
    let (partition, convex) = load_breakable(cfg)?;
    let ts = times(cfg, &[0.0, 0.5, 1.0]);
    let mut summary = String::new();
    for (k, &t) in ts.iter().enumerate() {
        let scene = advance(&partition, t).map_err(|e| CliError::Input(e.to_string()))?;
        let injective = check_injectivity(&scene);
        out.write(&format!("frame_{k:03}.svg"), svg::scene_svg(&scene, Some(&partition.domain)))?;
        let shards: Vec<Vec<[f64; 2]>> = scene
            .shards
            .iter()
            .map(|s| s.vertices().iter().map(|p| [p.x, p.y]).collect())
            .collect();
        let json = serde_json::json!({ "t": t, "injective": injective, "shards": shards });
        out.write(&format!("scene_{k:03}.json"), serde_json::to_string(&json).expect("finite scene"))?;
        let _ = writeln!(summary, "t = {t}: {} shards, injective = {injective}", scene.shards.len());
        if convex && !injective {
            return Err(CliError::Numerical(format!(
                "shards of a convex potential overlap at t = {t}"
            )));
        }
    }
    Ok(summary.trim_end().to_string())
}

fn cmd_ma(cfg: &RunConfig, out: &mut Output) -> Result<String, CliError> {
    let ts = times(cfg, &[0.25]);
    enum Pot {
        OneD(PiecewiseAffine1d),
        TwoD(Box<dyn Fn(&Point) -> f64 + Sync>, ConvexPolygon),
    }
    let pot = match (cfg.potential.as_deref(), &cfg.input) {
        (Some("tent1d"), _) => Pot::OneD(
            PiecewiseAffine1d::from_slopes(vec![-1.0, 0.0, 1.0], vec![1.0, -1.0], -1.0).expect("valid"),
        ),
        (Some("tent"), _) => Pot::TwoD(Box::new(|y: &Point| -y.x.abs()), ConvexPolygon::rect(-1.0, -1.0, 1.0, 1.0)),
        (Some(other), _) => return Err(CliError::Input(format!("unknown potential '{other}'"))),
        (None, Some(p)) => {
            let text = read(p)?;
            match io::parse_pieces1d_json(&text) {
                Ok(p) => Pot::OneD(p),
                Err(e1) => match io::parse_solution_json(&text) {
                    Ok((pot, _)) => {
                        let dom = pot.domain.clone();
                        Pot::TwoD(Box::new(move |y: &Point| pot.eval(y)), dom)
                    }
                    Err(_) => return Err(e1.into()),
                },
            }
        }
        (None, None) => return Err(CliError::Input("ma needs --input or --potential".into())),
    };
    let mut summary = String::new();
    for (k, &t) in ts.iter().enumerate() {
        let m = match &pot {
            Pot::OneD(p) => monge_ampere_1d(p, t),
            Pot::TwoD(f, dom) => {
                let opts = GridOptions {
                    n: cfg.grid.unwrap_or(512),
                    bins: cfg.bins.unwrap_or(128),
                    ..GridOptions::default()
                };
                let r = monge_ampere_grid(f.as_ref(), dom, t, &opts).map_err(|e| match e {
                    GridError::GridTooCoarse(_) => CliError::Input(e.to_string()),
                    other => CliError::Numerical(other.to_string()),
                })?;
                out.write(&format!("histogram_{k:03}.csv"), io::histogram_to_csv(&r.histogram))?;
                r.decomposition
            }
        };
        out.write(&format!("measure_{k:03}.json"), io::measure_to_json(&m))?;
        let _ = write!(
            summary,
            "t = {t}: ac mass {:.6}, atom mass {:.6}, singular diffuse mass {:.6}",
            m.ac_mass(),
            m.atom_mass(),
            m.singular_diffuse_mass
        );
        for a in m.atoms.iter().take(8) {
            let _ = write!(summary, "; atom ({:.6}, {:.6})", a.location.x, a.mass);
        }
        summary.push('\n');
    }
    Ok(summary.trim_end().to_string())
}

fn cmd_cantor(cfg: &RunConfig, out: &mut Output) -> Result<String, CliError> {
    let depth = cfg.depth.unwrap_or(12);
    let ts = times(cfg, &[0.5, 1.0, 2.0]);
    if ts.iter().any(|t| *t <= 0.0) {
        return Err(CliError::Input("cantor needs positive times".into()));
    }
    let samples = cfg.samples.unwrap_or(1001).clamp(2, 1_000_000);
    let err = |e: line1d::CantorError| CliError::Input(e.to_string());
    out.write("cantor.csv", line1d::expansion_wave_csv(depth, &ts, samples).map_err(err)?)?;
    let t_max = ts.iter().copied().fold(0.0, f64::max);
    let rows = line1d::expansion_wave(depth, &ts, samples, 0.0, 1.0 + t_max).map_err(err)?;
    let curves: Vec<Vec<Point>> = (0..ts.len())
        .map(|k| rows.iter().map(|(x, fs)| Point::new(*x, fs[k])).collect())
        .collect();
    out.write("cantor.svg", svg::curves_svg(&curves))?;
    let mut summary = String::new();
    for &t in &ts {
        let flow = line1d::cantor_flow(depth, t).map_err(err)?;
        let _ = writeln!(
            summary,
            "t = {t}: translated gaps {:.12}, fat set measure {:.12}",
            flow.translated_gap_total(),
            flow.fat_measure
        );
    }
    Ok(summary.trim_end().to_string())
}

fn cmd_pack(cfg: &RunConfig, out: &mut Output) -> Result<String, CliError> {
    let method = cfg.method.as_deref().unwrap_or("apollonian");
    let packing = match method {
        "apollonian" => packings::apollonian(packings::integral_seed(), cfg.generations.unwrap_or(6))
            .map_err(|e| CliError::Input(e.to_string()))?
            .packing(),
        "osculatory" => packings::osculatory_with(
            &DiskPacking::empty(Container::Polygon(ConvexPolygon::unit_square())),
            cfg.count.unwrap_or(500),
            &packings::OsculatoryOptions {
                grid: cfg.grid.unwrap_or(512),
                ..Default::default()
            },
        ),
        "vitali" => packings::vitali_random(
            Container::Polygon(ConvexPolygon::unit_square()),
            cfg.target.unwrap_or(0.5),
            cfg.seed.unwrap_or(0),
        )
        .map_err(|e| match e {
            packings::PackingError::Timeout { .. } => CliError::Numerical(e.to_string()),
            _ => CliError::Input(e.to_string()),
        })?,
        other => return Err(CliError::Input(format!("unknown packing method '{other}'"))),
    };
    let mut rows = packing.disks.clone();
    if let Container::Circle(c) = &packing.container {
        rows.insert(0, *c);
    }
    out.write("packing.csv", io::packing_to_csv(&rows))?;
    out.write("packing.svg", svg::packing_svg(&packing))?;
    let pot = packings::packing_potential(&packing);
    out.write("potential.svg", svg::heightmap_svg(&pot, 200))?;
    Ok(format!(
        "{method}: {} disks, covered fraction {:.6}",
        packing.disks.len(),
        packing.covered_fraction()
    ))
}

fn cmd_stability(cfg: &RunConfig, out: &mut Output) -> Result<String, CliError> {
    let ns = cfg.ns.clone().unwrap_or_else(|| vec![4, 16, 64, 256]);
    let t = times(cfg, &[1.0])[0];
    let spec = CountableDataSpec::geometric(ConvexPolygon::unit_square(), cfg.ratio.unwrap_or(0.95));
    let opts = StabilityOptions {
        solver: SolverOptions {
            tol: cfg.tol.unwrap_or(1e-9),
            ..SolverOptions::default()
        },
        test_functions: cfg.test_functions.unwrap_or(stability::BL_TEST_FUNCTIONS),
        seed: cfg.seed.unwrap_or(0),
    };
    let rows = stability::stability_experiment(&spec, &ns, t, &opts).map_err(|e| match e {
        stability::StabilityError::Solver(a) => CliError::from(a),
        other => CliError::Numerical(other.to_string()),
    })?;
    let mut csv = String::from("n,bl_distance,solver_residual,wall_time\n");
    let mut summary = String::new();
    for r in &rows {
        let _ = writeln!(csv, "{},{:e},{:e},{:.6}", r.n, r.distance, r.solver_residual, r.wall_time);
        let _ = writeln!(summary, "n = {}: distance {:.6e}", r.n, r.distance);
    }
    out.write("stability.csv", csv)?;
    Ok(summary.trim_end().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_config() {
        let dir = tempfile::tempdir().unwrap();
        let cfg_path = dir.path().join("run.json");
        fs::write(&cfg_path, r#"{"depth": 5, "t": [0.5], "samples": 11}"#).unwrap();
        let cli = Cli::try_parse_from([
            "shardflow",
            "cantor",
            "--config",
            cfg_path.to_str().unwrap(),
            "--depth",
            "7",
        ])
        .unwrap();
        let cfg = cli.resolve().unwrap();
        assert_eq!(cfg.depth, Some(7));
        assert_eq!(cfg.t, Some(vec![0.5]));
        assert!(parse_config(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Input(String::new()).exit_code(), 2);
        assert_eq!(CliError::Numerical(String::new()).exit_code(), 1);
        assert_eq!(run(["shardflow", "frobnicate"]).unwrap_err().exit_code(), 2);
        assert_eq!(run(["shardflow", "cantor", "--t", "-1"]).unwrap_err().exit_code(), 2);
    }
}
