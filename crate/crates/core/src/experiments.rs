//! Scenario presets and paired discrete/level-set comparison runs.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;
use crate::levelset::{self, AnnularGrid, LevelSetConfig, RegularizedXi, ScalarField, XiModel, DOMAIN_HALF_WIDTH};
use crate::sheet::{aligned_initial_value, area_difference, h_d_field, h_l_field, DiffRow};
use crate::spiral_ode::{EvolutionParams, FacetModel, DEFAULT_DT};
use crate::wulff::{
    dual, normalization_check, wulff_shape_from_support, EnergyDensity, Mobility, SupportSpec, WulffShape,
};

/// Offset subtracted from every center radius.
pub const RHO_OFFSET: f64 = 1e-8;

/// Number of sample times `t_k = kT/20`.
pub const DEFAULT_SAMPLES: usize = 21;

/// Flux regularization used by the level-set solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FluxKind {
    Square,
    Diagonal,
    Sectors,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub support: SupportSpec,
    pub density: EnergyDensity,
    pub shape: WulffShape,
    pub params: EvolutionParams,
    pub mobility: f64,
    pub t_end: f64,
    pub flux: FluxKind,
}

impl Scenario {
    /// Assembles and checks a scenario from its support function.
    pub fn new(
        name: &str,
        support: SupportSpec,
        params: EvolutionParams,
        mobility: f64,
        t_end: f64,
        flux: FluxKind,
    ) -> Result<Self> {
        let density = dual(&support)?;
        let shape = wulff_shape_from_support(&support, &Mobility::Uniform(mobility))?;
        let report = normalization_check(&support, &shape);
        if !report.passed() {
            return Err(Error::Experiment(format!(
                "{name}: γ°(N_j) ≠ 1 at {:?}",
                report.failures()
            )));
        }
        if !(t_end >= 0.0 && t_end.is_finite()) {
            return Err(Error::Experiment(format!("{name}: invalid end time {t_end}")));
        }
        Ok(Scenario {
            name: name.to_string(),
            support,
            density,
            shape,
            params,
            mobility,
            t_end,
            flux,
        })
    }

    pub fn regularized_xi(&self, eps: f64) -> RegularizedXi {
        match self.flux {
            FluxKind::Square => RegularizedXi {
                model: XiModel::Square,
                eps,
            },
            FluxKind::Diagonal => RegularizedXi {
                model: XiModel::Diagonal,
                eps,
            },
            FluxKind::Sectors => RegularizedXi::sectors(&self.density, eps),
        }
    }

    /// `t_k = kT/(samples − 1)`.
    pub fn sample_times(&self, samples: usize) -> Vec<f64> {
        sample_times(self.t_end, samples)
    }
}

pub fn sample_times(t_end: f64, samples: usize) -> Vec<f64> {
    if samples <= 1 {
        return vec![t_end];
    }
    let m = (samples - 1) as f64;
    (0..samples).map(|k| k as f64 * t_end / m).collect()
}

pub const PRESETS: [&str; 3] = ["square", "diagonal", "triangle"];

pub fn preset(name: &str) -> Result<Scenario> {
    match name {
        "square" => Scenario::new(
            name,
            SupportSpec::square(),
            EvolutionParams::new(1.0, 0.02)?,
            1.0,
            1.0,
            FluxKind::Square,
        ),
        "diagonal" => Scenario::new(
            name,
            SupportSpec::diagonal(),
            EvolutionParams::new(1.0, 0.02)?,
            1.0,
            1.0,
            FluxKind::Diagonal,
        ),
        "triangle" => Scenario::new(
            name,
            SupportSpec::triangle(),
            EvolutionParams::new(1.0, 0.01)?,
            1.0,
            0.8,
            FluxKind::Sectors,
        ),
        _ => Err(Error::Experiment(format!(
            "unknown scenario '{name}' (expected one of {})",
            PRESETS.join(", ")
        ))),
    }
}

/// How the center radius is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RhoMode {
    /// `ρ = value`.
    Fixed(f64),
    /// `ρ = (c − 10⁻⁸)Δx`.
    Scaled(f64),
}

impl RhoMode {
    pub fn rho(&self, dx: f64) -> f64 {
        match *self {
            RhoMode::Fixed(v) => v,
            RhoMode::Scaled(c) => (c - RHO_OFFSET) * dx,
        }
    }

    /// File-name friendly label, e.g. `fixed-0.01999999` or `scaled-2`.
    pub fn label(&self) -> String {
        match *self {
            RhoMode::Fixed(v) => format!("fixed-{v}"),
            RhoMode::Scaled(c) => format!("scaled-{c}"),
        }
    }

    fn validate(&self) -> Result<()> {
        let v = match *self {
            RhoMode::Fixed(v) | RhoMode::Scaled(v) => v,
        };
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::Usage(format!("ρ-mode value must be positive, got {v}")));
        }
        Ok(())
    }
}

impl fmt::Display for RhoMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            RhoMode::Fixed(v) => write!(f, "fixed:{v}"),
            RhoMode::Scaled(c) => write!(f, "scaled:{c}"),
        }
    }
}

impl FromStr for RhoMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if let Ok(v) = s.parse::<f64>() {
            let mode = RhoMode::Fixed(v);
            mode.validate()?;
            return Ok(mode);
        }
        let (kind, value) = s
            .split_once(':')
            .ok_or_else(|| Error::Usage(format!("ρ-mode '{s}' is not fixed:<v> or scaled:<c>")))?;
        let v: f64 = value
            .parse()
            .map_err(|_| Error::Usage(format!("ρ-mode value '{value}' is not a number")))?;
        let mode = match kind {
            "fixed" => RhoMode::Fixed(v),
            "scaled" => RhoMode::Scaled(v),
            _ => return Err(Error::Usage(format!("unknown ρ-mode '{kind}'"))),
        };
        mode.validate()?;
        Ok(mode)
    }
}

impl Serialize for RhoMode {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for RhoMode {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Numerical settings shared by the runs of a comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunOptions {
    /// RK4 step of the discrete model.
    pub ode_dt: f64,
    /// `ε = eps_factor · Δx`.
    pub eps_factor: f64,
    /// Level-set step; `0.1Δx²` when absent.
    pub levelset_dt: Option<f64>,
    pub samples: usize,
    /// Overrides the scenario end time.
    pub t_end: Option<f64>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            ode_dt: DEFAULT_DT,
            eps_factor: 1.0,
            levelset_dt: None,
            samples: DEFAULT_SAMPLES,
            t_end: None,
        }
    }
}

/// Outcome of one paired run. `error` marks a run that stopped early;
/// `rows` then holds the samples completed before the failure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonResult {
    pub scenario: String,
    pub s: u32,
    pub rho_mode: RhoMode,
    pub rho: f64,
    pub dx: f64,
    pub eps: f64,
    pub levelset_dt: f64,
    pub ode_dt: f64,
    pub t_end: f64,
    pub generation_events: usize,
    pub rows: Vec<DiffRow>,
    pub max_d: f64,
    pub runtime_s: f64,
    pub error: Option<String>,
}

impl ComparisonResult {
    pub fn ok(&self) -> bool {
        self.error.is_none() && !self.rows.is_empty()
    }
}

/// Builds the level-set configuration of a scenario at refinement `s`.
pub fn levelset_config(scenario: &Scenario, s: u32, mode: RhoMode, opts: &RunOptions) -> Result<LevelSetConfig> {
    let dx = levelset::BASE_DX / s.max(1) as f64;
    let grid = AnnularGrid::new(s, mode.rho(dx))?;
    let eps = opts.eps_factor * grid.dx;
    let cfg = LevelSetConfig::new(grid, scenario.params, scenario.regularized_xi(eps), scenario.mobility)?;
    match opts.levelset_dt {
        Some(dt) => cfg.with_dt(dt),
        None => Ok(cfg),
    }
}

/// Runs the discrete model and the level-set solver on common sample times
/// and evaluates `D(t_k)`.
///
/// Configuration errors are returned as `Err`; a numerical failure inside
/// the level-set solver yields a result with `error` set and the rows
/// computed so far.
pub fn run_comparison(scenario: &Scenario, s: u32, mode: RhoMode, opts: &RunOptions) -> Result<ComparisonResult> {
    if s == 0 {
        return Err(Error::Usage("s must be ≥ 1".into()));
    }
    mode.validate()?;
    let start = Instant::now();
    let t_end = opts.t_end.unwrap_or(scenario.t_end);
    let times = sample_times(t_end, opts.samples);
    let cfg = levelset_config(scenario, s, mode, opts)?;

    let model = FacetModel::new(scenario.shape.clone(), scenario.params)?;
    let traj = model.simulate(opts.ode_dt, t_end, &times)?;
    for p in &traj.polylines {
        let outer = p.vertices[0];
        if outer.x.abs().max(outer.y.abs()) >= DOMAIN_HALF_WIDTH {
            return Err(Error::Experiment(format!(
                "{}: outer vertex {:?} left the domain at t = {}",
                scenario.name, outer, p.t
            )));
        }
    }

    let u0 = ScalarField::constant(&cfg.grid, aligned_initial_value(&scenario.shape));
    let mut rows = Vec::with_capacity(times.len());
    let mut failure: Option<Error> = None;
    let solved = levelset::solve_with(&cfg, &u0, t_end, &times, |u| {
        if failure.is_some() {
            return;
        }
        let k = rows.len();
        let row = h_d_field(&scenario.shape, &traj.polylines[k], &cfg.grid).and_then(|hd| {
            let hl = h_l_field(u, &cfg.grid);
            Ok(DiffRow {
                t: times[k],
                d: area_difference(&hd, &hl)?,
            })
        });
        match row {
            Ok(r) => rows.push(r),
            Err(e) => failure = Some(e),
        }
    });
    let error = match (solved, failure) {
        (_, Some(e)) | (Err(e), None) => Some(e.to_string()),
        (Ok(_), None) => None,
    };
    let max_d = rows.iter().map(|r| r.d).fold(f64::NAN, f64::max);
    Ok(ComparisonResult {
        scenario: scenario.name.clone(),
        s,
        rho_mode: mode,
        rho: cfg.grid.rho,
        dx: cfg.grid.dx,
        eps: cfg.epsilon(),
        levelset_dt: cfg.dt,
        ode_dt: opts.ode_dt,
        t_end,
        generation_events: traj.events,
        rows,
        max_d,
        runtime_s: start.elapsed().as_secs_f64(),
        error,
    })
}

/// A grid of runs for one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPlan {
    pub scenario: String,
    pub s_values: Vec<u32>,
    pub rho_modes: Vec<RhoMode>,
    #[serde(default)]
    pub options: RunOptions,
}

impl SweepPlan {
    pub fn validate(&self) -> Result<()> {
        if self.s_values.is_empty() || self.rho_modes.is_empty() {
            return Err(Error::Usage("sweep plan needs at least one s and one ρ-mode".into()));
        }
        if self.s_values.contains(&0) {
            return Err(Error::Usage("s must be ≥ 1".into()));
        }
        for m in &self.rho_modes {
            m.validate()?;
        }
        Ok(())
    }

    pub fn entries(&self) -> Vec<(u32, RhoMode)> {
        self.rho_modes
            .iter()
            .flat_map(|&m| self.s_values.iter().map(move |&s| (s, m)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub scenario: String,
    pub s: u32,
    pub rho_mode: String,
    pub rho: f64,
    #[serde(rename = "maxD")]
    pub max_d: f64,
    pub runtime_s: f64,
    pub status: String,
}

impl From<&ComparisonResult> for SummaryRow {
    fn from(r: &ComparisonResult) -> Self {
        SummaryRow {
            scenario: r.scenario.clone(),
            s: r.s,
            rho_mode: r.rho_mode.to_string(),
            rho: r.rho,
            max_d: r.max_d,
            runtime_s: r.runtime_s,
            status: r.error.clone().unwrap_or_else(|| "ok".into()),
        }
    }
}

/// Run metadata stored next to the CSV files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMetadata {
    pub scenario: String,
    pub s: u32,
    pub rho_mode: RhoMode,
    pub rho: f64,
    pub dx: f64,
    pub eps: f64,
    pub levelset_dt: f64,
    pub ode_dt: f64,
    pub t_end: f64,
    pub generation_events: usize,
    pub error: Option<String>,
}

impl From<&ComparisonResult> for RunMetadata {
    fn from(r: &ComparisonResult) -> Self {
        RunMetadata {
            scenario: r.scenario.clone(),
            s: r.s,
            rho_mode: r.rho_mode,
            rho: r.rho,
            dx: r.dx,
            eps: r.eps,
            levelset_dt: r.levelset_dt,
            ode_dt: r.ode_dt,
            t_end: r.t_end,
            generation_events: r.generation_events,
            error: r.error.clone(),
        }
    }
}

pub fn series_file_name(r: &ComparisonResult) -> String {
    format!("{}_s{}_{}.csv", r.scenario, r.s, r.rho_mode.label())
}

/// Writes `<name>.csv` with `(t, D)` rows and `<name>.json` with metadata.
pub fn write_result(dir: &Path, r: &ComparisonResult) -> Result<PathBuf> {
    let path = dir.join(series_file_name(r));
    io::write_csv(&path, &r.rows)?;
    io::write_json(&path.with_extension("json"), &RunMetadata::from(r))?;
    Ok(path)
}

/// Runs every entry of the plan concurrently. Failing entries are reported
/// in their summary row and do not stop the others.
pub fn sweep(plan: &SweepPlan, out_dir: &Path) -> Result<Vec<SummaryRow>> {
    plan.validate()?;
    let scenario = preset(&plan.scenario)?;
    let entries = plan.entries();
    let results: Vec<Result<ComparisonResult>> = entries
        .par_iter()
        .map(|&(s, m)| {
            let r = run_comparison(&scenario, s, m, &plan.options)?;
            write_result(out_dir, &r)?;
            Ok(r)
        })
        .collect();
    let summary: Vec<SummaryRow> = results
        .iter()
        .zip(&entries)
        .map(|(r, &(s, m))| match r {
            Ok(r) => SummaryRow::from(r),
            Err(e) => SummaryRow {
                scenario: scenario.name.clone(),
                s,
                rho_mode: m.to_string(),
                rho: m.rho(levelset::BASE_DX / s as f64),
                max_d: f64::NAN,
                runtime_s: 0.0,
                status: e.to_string(),
            },
        })
        .collect();
    io::write_csv(&out_dir.join(format!("{}_summary.csv", scenario.name)), &summary)?;
    io::write_json(&out_dir.join(format!("{}_plan.json", scenario.name)), plan)?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn presets() {
        let sq = preset("square").unwrap();
        assert_eq!(sq.params.capillary, 0.02);
        assert_eq!(sq.t_end, 1.0);
        for j in 0..4 {
            assert!((sq.shape.length(j) - 2.0).abs() < 1e-12);
            assert!((sq.shape.facet(j).phi - PI * j as f64 / 2.0).abs() < 1e-12);
        }
        let di = preset("diagonal").unwrap();
        assert!((di.shape.facet(0).phi - PI / 4.0).abs() < 1e-12);
        let tr = preset("triangle").unwrap();
        assert_eq!(tr.params.capillary, 0.01);
        assert_eq!(tr.t_end, 0.8);
        for j in 0..3 {
            assert!((tr.shape.length(j) - 2.0 * 3f64.sqrt()).abs() < 1e-12);
        }
        assert!(preset("hexagon").is_err());
    }

    #[test]
    fn rho_modes() {
        let m: RhoMode = "fixed:0.01999999".parse().unwrap();
        assert_eq!(m, RhoMode::Fixed(0.01999999));
        let c: RhoMode = "scaled:2".parse().unwrap();
        assert_eq!(c.rho(0.01), (2.0 - 1e-8) * 0.01);
        assert_eq!(c.to_string().parse::<RhoMode>().unwrap(), c);
        assert!("scaled:0".parse::<RhoMode>().is_err());
        assert!("foo:1".parse::<RhoMode>().is_err());
        assert!("fixed".parse::<RhoMode>().is_err());
        let json = serde_json::to_string(&m).unwrap();
        assert_eq!(json, "\"fixed:0.01999999\"");
    }

    #[test]
    fn sample_grid() {
        let t = sample_times(1.0, 21);
        assert_eq!(t.len(), 21);
        assert_eq!(t[0], 0.0);
        assert_eq!(t[20], 1.0);
        assert_eq!(sample_times(0.0, 1), vec![0.0]);
    }

    #[test]
    fn short_coarse_comparison() {
        let sc = preset("square").unwrap();
        let opts = RunOptions {
            t_end: Some(0.01),
            samples: 3,
            ..RunOptions::default()
        };
        let r = run_comparison(&sc, 1, RhoMode::Scaled(2.0), &opts).unwrap();
        assert!(r.ok(), "{:?}", r.error);
        assert_eq!(r.rows.len(), 3);
        assert!(r.rows[0].d < 0.01);
        assert!(r.max_d < 0.05);
        assert!(run_comparison(&sc, 0, RhoMode::Scaled(2.0), &opts).is_err());
    }

    #[test]
    fn plan_roundtrip() {
        let plan = SweepPlan {
            scenario: "square".into(),
            s_values: vec![2, 3],
            rho_modes: vec![RhoMode::Fixed(0.02 - 1e-8), RhoMode::Scaled(2.0)],
            options: RunOptions::default(),
        };
        let json = serde_json::to_string(&plan).unwrap();
        let back: SweepPlan = serde_json::from_str(&json).unwrap();
        assert_eq!(back, plan);
        assert_eq!(plan.entries().len(), 4);
        let minimal: SweepPlan =
            serde_json::from_str(r#"{"scenario":"square","s_values":[2],"rho_modes":["scaled:2"]}"#).unwrap();
        assert_eq!(minimal.options, RunOptions::default());
    }
}
