//! Command-line front end.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::{
    self, levelset_config, preset, run_comparison, write_result, FluxKind, RhoMode, RunOptions, Scenario, SweepPlan,
    DEFAULT_SAMPLES,
};
use crate::io;
use crate::levelset::{self, extract_contour, ScalarField};
use crate::sheet::{aligned_initial_value, h_l_field};
use crate::spiral_ode::{EvolutionParams, FacetModel, DEFAULT_DT};
use crate::vec2::Vec2;
use crate::wulff::{dual, validate_sectors, SupportSpec};

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "CRYSTAL_SPIRAL_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "crystal-spiral",
    version,
    about = "Pinned polygonal spirals under crystalline eikonal-curvature flow"
)]
pub struct Cli {
    /// Print progress to stderr.
    #[arg(short, long, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate the facet-length ODE model.
    RunOde(RunOdeArgs),
    /// Run the level-set solver alone.
    RunLevelset(LevelSetArgs),
    /// Paired run: D(t) between the two models.
    Compare(LevelSetArgs),
    /// Run a JSON sweep plan.
    Sweep(SweepArgs),
    /// Print the density vectors dual to a support function.
    Dual(ShapeArgs),
    /// Check the sector conditions of a support function.
    Validate(ShapeArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ScenarioArgs {
    /// Preset name: square, diagonal or triangle.
    #[arg(long, default_value = "square")]
    pub scenario: String,
    /// Scenario file (JSON); flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, alias = "tmax", value_parser = parse_nonneg)]
    pub t_end: Option<f64>,
    #[arg(long, value_parser = parse_samples, default_value_t = DEFAULT_SAMPLES)]
    pub samples: usize,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct RunOdeArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long, value_parser = parse_positive, default_value_t = DEFAULT_DT)]
    pub dt: f64,
}

#[derive(Debug, Clone, Args)]
pub struct LevelSetArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Refinement level: Δx = 0.02/s.
    #[arg(long, value_parser = parse_s, default_value_t = 2)]
    pub s: u32,
    /// fixed:<ρ> (or a bare ρ) or scaled:<c> with ρ = (c − 1e-8)Δx.
    #[arg(long, alias = "rho", default_value = "scaled:2")]
    pub rho_mode: RhoMode,
    /// ε = eps_factor · Δx.
    #[arg(long, value_parser = parse_positive, default_value_t = 1.0)]
    pub eps_factor: f64,
    /// Level-set step (default 0.1Δx²).
    #[arg(long, value_parser = parse_positive)]
    pub dt: Option<f64>,
    /// ODE step of the discrete model.
    #[arg(long, value_parser = parse_positive, default_value_t = DEFAULT_DT)]
    pub ode_dt: f64,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub plan: PathBuf,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ShapeArgs {
    /// Preset name.
    #[arg(long, conflicts_with = "vectors")]
    pub preset: Option<String>,
    /// Support vectors m_j as "x,y;x,y;…".
    #[arg(long, allow_hyphen_values = true)]
    pub vectors: Option<String>,
}

fn parse_s(v: &str) -> std::result::Result<u32, String> {
    let s: i64 = v.parse().map_err(|_| format!("'{v}' is not an integer"))?;
    if s < 1 {
        return Err("s must be ≥ 1".into());
    }
    u32::try_from(s).map_err(|_| format!("s = {s} is too large"))
}

fn parse_positive(v: &str) -> std::result::Result<f64, String> {
    let x: f64 = v.parse().map_err(|_| format!("'{v}' is not a number"))?;
    if !(x > 0.0 && x.is_finite()) {
        return Err(format!("value must be positive, got {v}"));
    }
    Ok(x)
}

fn parse_nonneg(v: &str) -> std::result::Result<f64, String> {
    let x: f64 = v.parse().map_err(|_| format!("'{v}' is not a number"))?;
    if !(x >= 0.0 && x.is_finite()) {
        return Err(format!("value must be nonnegative, got {v}"));
    }
    Ok(x)
}

fn parse_samples(v: &str) -> std::result::Result<usize, String> {
    let n: usize = v.parse().map_err(|_| format!("'{v}' is not a count"))?;
    if n == 0 {
        return Err("samples must be ≥ 1".into());
    }
    Ok(n)
}

/// Scenario file: support vectors plus evolution parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioFile {
    pub name: String,
    pub support: Vec<[f64; 2]>,
    pub driving_force: f64,
    pub capillary: f64,
    #[serde(default = "one")]
    pub mobility: f64,
    pub t_end: f64,
    #[serde(default)]
    pub flux: Option<FluxKind>,
}

fn one() -> f64 {
    1.0
}

impl ScenarioFile {
    pub fn into_scenario(self) -> Result<Scenario> {
        let vectors: Vec<Vec2> = self.support.iter().map(|v| Vec2::new(v[0], v[1])).collect();
        let support = SupportSpec::from_vectors(&vectors)?;
        Scenario::new(
            &self.name,
            support,
            EvolutionParams::new(self.driving_force, self.capillary)?,
            self.mobility,
            self.t_end,
            self.flux.unwrap_or(FluxKind::Sectors),
        )
    }
}

impl ScenarioArgs {
    pub fn load(&self) -> Result<Scenario> {
        let mut sc = match &self.config {
            Some(path) => io::read_json::<ScenarioFile>(path)?.into_scenario()?,
            None => preset(&self.scenario).map_err(|e| Error::Usage(e.to_string()))?,
        };
        if let Some(t) = self.t_end {
            sc.t_end = t;
        }
        Ok(sc)
    }
}

impl LevelSetArgs {
    fn options(&self) -> RunOptions {
        RunOptions {
            ode_dt: self.ode_dt,
            eps_factor: self.eps_factor,
            levelset_dt: self.dt,
            samples: self.scenario.samples,
            t_end: self.scenario.t_end,
        }
    }
}

impl ShapeArgs {
    fn vectors(&self) -> Result<Vec<Vec2>> {
        match (&self.preset, &self.vectors) {
            (Some(name), None) => Ok(preset(name).map_err(|e| Error::Usage(e.to_string()))?.support.vectors()),
            (None, Some(list)) => parse_vectors(list),
            _ => Err(Error::Usage("give exactly one of --preset or --vectors".into())),
        }
    }
}

/// Parses `"x,y;x,y;…"`.
pub fn parse_vectors(list: &str) -> Result<Vec<Vec2>> {
    list.split(';')
        .filter(|s| !s.trim().is_empty())
        .map(|pair| {
            let (x, y) = pair
                .split_once(',')
                .ok_or_else(|| Error::Usage(format!("'{pair}' is not x,y")))?;
            let p = |v: &str| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Usage(format!("'{v}' is not a number")))
            };
            Ok(Vec2::new(p(x)?, p(y)?))
        })
        .collect()
}

/// Parses arguments; help and version requests surface as clap errors.
pub fn parse_args<I, T>(argv: I) -> std::result::Result<Cli, clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    Cli::try_parse_from(argv)
}

#[derive(Serialize)]
struct VertexRow {
    t: f64,
    j: usize,
    x: f64,
    y: f64,
}

#[derive(Serialize)]
struct FieldRow {
    i: i64,
    j: i64,
    x: f64,
    y: f64,
    u: f64,
}

#[derive(Serialize)]
struct ContourRow {
    t: f64,
    line: usize,
    x: f64,
    y: f64,
}

fn log(verbose: bool, msg: impl AsRef<str>) {
    if verbose {
        eprintln!("{}", msg.as_ref());
    }
}

/// Executes a parsed command; standard output carries the human-readable
/// report.
pub fn dispatch(cli: &Cli) -> Result<()> {
    let verbose = cli.verbose;
    match &cli.command {
        Command::RunOde(a) => {
            let sc = a.scenario.load()?;
            let model = FacetModel::new(sc.shape.clone(), sc.params)?;
            let times = sc.sample_times(a.scenario.samples);
            let tr = model.simulate(a.dt, sc.t_end, &times)?;
            let kmax = tr.samples.iter().map(|s| s.k()).max().unwrap_or(0);
            let mut header = vec!["t".to_string(), "k".to_string()];
            header.extend((1..=kmax).map(|j| format!("d_{j}")));
            let rows: Vec<Vec<String>> = tr
                .samples
                .iter()
                .map(|s| {
                    let mut r = vec![s.t.to_string(), s.k().to_string()];
                    r.extend(s.lengths.iter().map(|d| d.to_string()));
                    r
                })
                .collect();
            let path = a.scenario.out.join(format!("{}_ode.csv", sc.name));
            io::write_records(&path, &header, &rows)?;
            let vertices: Vec<VertexRow> = tr
                .polylines
                .iter()
                .flat_map(|p| {
                    p.vertices.iter().enumerate().map(|(j, v)| VertexRow {
                        t: p.t,
                        j,
                        x: v.x,
                        y: v.y,
                    })
                })
                .collect();
            io::write_csv(&a.scenario.out.join(format!("{}_polyline.csv", sc.name)), &vertices)?;
            let events: Vec<(usize, f64)> = tr
                .final_state
                .generation_times
                .iter()
                .copied()
                .enumerate()
                .map(|(j, t)| (j + 1, t))
                .collect();
            io::write_csv(
                &a.scenario.out.join(format!("{}_generation_times.csv", sc.name)),
                &events,
            )?;
            println!(
                "{}: k = {} at t = {}, {} generation events -> {}",
                sc.name,
                tr.final_state.k(),
                tr.final_state.t,
                tr.events,
                path.display()
            );
        }
        Command::RunLevelset(a) => {
            let sc = a.scenario.load()?;
            let opts = a.options();
            let cfg = levelset_config(&sc, a.s, a.rho_mode, &opts)?;
            let times = sc.sample_times(a.scenario.samples);
            let u0 = ScalarField::constant(&cfg.grid, aligned_initial_value(&sc.shape));
            log(
                verbose,
                format!(
                    "grid {}², Δx = {}, Δt = {:e}, ε = {}",
                    cfg.grid.n,
                    cfg.grid.dx,
                    cfg.dt,
                    cfg.epsilon()
                ),
            );
            let mut contour = Vec::new();
            let snaps = levelset::solve_with(&cfg, &u0, sc.t_end, &times, |u| {
                log(verbose, format!("t = {}", u.t));
                for (line, pts) in extract_contour(u, &cfg.grid).iter().enumerate() {
                    contour.extend(pts.iter().map(|p| ContourRow {
                        t: u.t,
                        line,
                        x: p.x,
                        y: p.y,
                    }));
                }
            })?;
            let stem = format!("{}_s{}_{}", sc.name, a.s, a.rho_mode.label());
            let out = &a.scenario.out;
            io::write_csv(&out.join(format!("{stem}_contour.csv")), &contour)?;
            let last = snaps.last().expect("at least one sample");
            let field: Vec<FieldRow> = cfg
                .grid
                .active_nodes()
                .map(|(i, j, x)| FieldRow {
                    i: i as i64 - cfg.grid.half,
                    j: j as i64 - cfg.grid.half,
                    x: x.x,
                    y: x.y,
                    u: last.values[cfg.grid.idx(i, j)],
                })
                .collect();
            io::write_csv(&out.join(format!("{stem}_field.csv")), &field)?;
            let mut dump = Vec::new();
            h_l_field(last, &cfg.grid).write_csv(&cfg.grid, &mut dump)?;
            io::write_atomic(&out.join(format!("{stem}_height.csv")), &dump)?;
            println!("{}: level set reached t = {} -> {}", sc.name, last.t, out.display());
        }
        Command::Compare(a) => {
            let sc = a.scenario.load()?;
            let r = run_comparison(&sc, a.s, a.rho_mode, &a.options())?;
            let path = write_result(&a.scenario.out, &r)?;
            io::write_csv(
                &a.scenario.out.join(format!("{}_summary.csv", sc.name)),
                &[experiments::SummaryRow::from(&r)],
            )?;
            for row in &r.rows {
                log(verbose, format!("t = {:.4}  D = {:.6}", row.t, row.d));
            }
            println!(
                "{} s={} {}: max D = {:.6} over {} samples ({:.1} s) -> {}",
                sc.name,
                a.s,
                a.rho_mode,
                r.max_d,
                r.rows.len(),
                r.runtime_s,
                path.display()
            );
            if let Some(e) = r.error {
                return Err(Error::Experiment(format!("run stopped early: {e}")));
            }
        }
        Command::Sweep(a) => {
            let plan: SweepPlan = io::read_json(&a.plan)?;
            let summary = experiments::sweep(&plan, &a.out)?;
            for r in &summary {
                println!(
                    "{} s={} {}: max D = {:.6} ({})",
                    r.scenario, r.s, r.rho_mode, r.max_d, r.status
                );
            }
            if summary.iter().any(|r| r.status != "ok") {
                return Err(Error::Experiment("some sweep entries failed".into()));
            }
        }
        Command::Dual(a) => {
            let v = a.vectors()?;
            let d = dual(&SupportSpec::from_vectors(&v)?)?;
            for (j, n) in d.vectors().iter().enumerate() {
                println!(
                    "n_{j} = ({}, {})  r = {}  θ = {}",
                    n.x,
                    n.y,
                    n.norm(),
                    crate::vec2::wrap_2pi(n.angle())
                );
            }
        }
        Command::Validate(a) => {
            let v = a.vectors()?;
            let report = validate_sectors(&v);
            for s in &report.sectors {
                println!(
                    "P_{}: {}{}",
                    s.index,
                    if s.nonempty { "nonempty" } else { "empty" },
                    if s.nonempty && !s.matches_neighbors {
                        ", differs from neighbor intersection"
                    } else {
                        ""
                    }
                );
            }
            if let Some(j) = report.first_failure() {
                return Err(Error::Assumption {
                    assumption: "gamma3",
                    index: j,
                    detail: format!("sector P_{j} fails (empty sectors: {:?})", report.empty_sectors()),
                });
            }
            println!("all sectors valid");
        }
    }
    Ok(())
}

/// Caps the global thread pool from the environment, if set.
pub fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::Usage(format!("{THREADS_ENV} must be a positive integer, got '{v}'")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Usage(e.to_string()))?;
    }
    Ok(())
}

/// Full entry point; returns the process exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match parse_args(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = init_threads().and_then(|_| dispatch(&cli));
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Output directory a command writes into, if any.
pub fn output_dir(cli: &Cli) -> Option<&Path> {
    match &cli.command {
        Command::RunOde(a) => Some(&a.scenario.out),
        Command::RunLevelset(a) | Command::Compare(a) => Some(&a.scenario.out),
        Command::Sweep(a) => Some(&a.out),
        Command::Dual(_) | Command::Validate(_) => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compare_args() {
        let c = parse_args([
            "crystal-spiral",
            "compare",
            "--scenario",
            "square",
            "--s",
            "2",
            "--rho-mode",
            "fixed:0.01999999",
        ])
        .unwrap();
        match c.command {
            Command::Compare(a) => {
                assert_eq!(a.s, 2);
                assert_eq!(a.rho_mode, RhoMode::Fixed(0.01999999));
                assert_eq!(a.scenario.scenario, "square");
            }
            _ => panic!("wrong subcommand"),
        }
    }

    #[test]
    fn s_must_be_positive() {
        let e = parse_args(["crystal-spiral", "compare", "--s", "0"]).unwrap_err();
        assert!(e.to_string().contains("s must be ≥ 1"), "{e}");
    }

    #[test]
    fn vector_lists() {
        let v = parse_vectors("3,0;1,1; 0,2;-1,-1").unwrap();
        assert_eq!(v.len(), 4);
        assert_eq!(v[3], Vec2::new(-1.0, -1.0));
        assert!(parse_vectors("1;2").is_err());
    }
}
