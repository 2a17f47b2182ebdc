//! Run configuration: a flat TOML file with dotted sections.
//!
//! ```toml
//! preset = "sech2_benchmark"
//! horizon = 2.0
//! solver.fp_tolerance = 1e-8
//! oracle.cells = 8000
//! ```

use std::path::{Path, PathBuf};
use std::sync::Arc;

use lsn_core::initial::InitialDensity;
use lsn_core::kinetics::{make_classical_ls, make_exp_detachment, make_power_law, make_tabulated, KineticModel, Nucleation};
use lsn_core::nonlinear_solver::SolverConfig;
use lsn_core::presets::{preset, Scenario};
use lsn_core::reference_oracle::GridConfig;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub preset: Option<String>,
    pub rho: Option<f64>,
    pub horizon: Option<f64>,
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    /// Times at which density profiles are written.
    pub snapshot_times: Option<Vec<f64>>,
    pub snapshot_points: Option<usize>,
    pub model: Option<ModelSpec>,
    pub nucleation: Option<NucleationSpec>,
    pub f_in: Option<DensitySpec>,
    #[serde(default)]
    pub solver: SolverOverrides,
    #[serde(default)]
    pub oracle: GridOverrides,
    #[serde(default)]
    pub compare: CompareSpec,
    #[serde(default)]
    pub diagnostics: DiagnosticsSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    PowerLaw { a0: f64, alpha: f64, b0: f64, beta: f64 },
    ExpDetachment { a0: f64, b0: f64, k: f64 },
    ClassicalLs,
    /// CSV with columns x, a, b.
    Tabulated { csv: PathBuf, phi0: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case", deny_unknown_fields)]
pub enum NucleationSpec {
    Constant { c: f64 },
    Power { n0: f64, p: f64 },
    LinearExcess {
        k: f64,
        #[serde(default)]
        u_crit: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DensitySpec {
    Zero,
    Indicator { c: f64, x1: f64, x2: f64 },
    Gamma { c: f64, p: f64, q: f64, cutoff: f64 },
    /// CSV with columns x, f.
    Table { csv: PathBuf },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverOverrides {
    pub delta: Option<f64>,
    pub window_length: Option<f64>,
    pub time_grid_step: Option<f64>,
    pub fp_tolerance: Option<f64>,
    pub fp_max_iters: Option<usize>,
    pub damping: Option<f64>,
    pub stop_margin: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridOverrides {
    pub x_max: Option<f64>,
    pub cells: Option<usize>,
    pub dt: Option<f64>,
    pub cfl_safety: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareSpec {
    pub times: Option<Vec<f64>>,
    pub u_gap_tol: Option<f64>,
    pub density_gap_tol: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsSpec {
    pub test_functions: Option<usize>,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub preset: Option<String>,
    pub out: Option<PathBuf>,
    pub cells: Option<usize>,
    pub horizon: Option<f64>,
}

/// Everything a command needs, with defaults filled in.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub scenario_name: String,
    pub model: KineticModel,
    pub rho: f64,
    pub f_in: Arc<InitialDensity>,
    pub horizon: f64,
    pub solver: SolverConfig,
    pub grid: GridConfig,
    pub out: PathBuf,
    pub seed: u64,
    pub snapshot_times: Vec<f64>,
    pub snapshot_points: usize,
    pub compare_times: Option<Vec<f64>>,
    pub u_gap_tol: f64,
    pub density_gap_tol: f64,
    pub test_functions: usize,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Merges preset, file and command line; relative CSV paths are taken
    /// from `base`.
    pub fn resolve(&self, cli: &Overrides, base: &Path) -> Result<Resolved, CliError> {
        let preset_name = cli.preset.as_ref().or(self.preset.as_ref());
        let from_preset: Option<Scenario> = match preset_name {
            Some(n) => Some(preset(n).map_err(|e| CliError::Parse(e.to_string()))?),
            None => None,
        };
        let nucleation = match (&self.nucleation, &from_preset) {
            (Some(n), _) => build_nucleation(n),
            (None, Some(s)) => s.model.nucleation_law().clone(),
            (None, None) => Nucleation::constant(0.0),
        };
        let model = match (&self.model, &from_preset) {
            (Some(m), _) => build_model(m, nucleation, base)?,
            (None, Some(s)) => s.model.with_nucleation(nucleation),
            (None, None) => return Err(CliError::Parse("no model given: set model.family or choose a preset".into())),
        };
        let f_in = match (&self.f_in, &from_preset) {
            (Some(d), _) => build_density(d, base)?,
            (None, Some(s)) => s.f_in.clone(),
            (None, None) => InitialDensity::zero(),
        };
        let rho = self
            .rho
            .or(from_preset.as_ref().map(|s| s.rho))
            .ok_or_else(|| CliError::Parse("rho is required without a preset".into()))?;
        let horizon = cli
            .horizon
            .or(self.horizon)
            .or(from_preset.as_ref().map(|s| s.horizon))
            .ok_or_else(|| CliError::Parse("horizon is required without a preset".into()))?;
        let mut solver = SolverConfig::new(rho, horizon);
        let so = &self.solver;
        solver.delta = so.delta;
        solver.window_length = so.window_length;
        solver.time_grid_step = so.time_grid_step;
        if let Some(v) = so.fp_tolerance {
            solver.fp_tolerance = v;
        }
        if let Some(v) = so.fp_max_iters {
            solver.fp_max_iters = v;
        }
        if let Some(v) = so.damping {
            solver.damping = v;
        }
        solver.stop_margin = so.stop_margin;
        let mut grid = GridConfig::default();
        grid.x_max = self.oracle.x_max;
        if let Some(c) = cli.cells.or(self.oracle.cells) {
            grid.cells = c;
        }
        grid.dt = self.oracle.dt;
        if let Some(c) = self.oracle.cfl_safety {
            grid.cfl_safety = c;
        }
        let scenario_name = from_preset.as_ref().map(|s| s.name.to_string()).unwrap_or_else(|| "custom".into());
        Ok(Resolved {
            scenario_name,
            model,
            rho,
            f_in: Arc::new(f_in),
            horizon,
            solver,
            grid,
            out: cli.out.clone().or(self.output_dir.clone()).unwrap_or_else(|| PathBuf::from("lsn_out")),
            seed: self.seed.unwrap_or(7),
            snapshot_times: self.snapshot_times.clone().unwrap_or_default(),
            snapshot_points: self.snapshot_points.unwrap_or(400),
            compare_times: self.compare.times.clone(),
            u_gap_tol: self.compare.u_gap_tol.unwrap_or(5e-3),
            density_gap_tol: self.compare.density_gap_tol.unwrap_or(5e-2),
            test_functions: self.diagnostics.test_functions.unwrap_or(8),
        })
    }
}

fn build_nucleation(n: &NucleationSpec) -> Nucleation {
    match *n {
        NucleationSpec::Constant { c } => Nucleation::constant(c),
        NucleationSpec::Power { n0, p } => Nucleation::power(n0, p),
        NucleationSpec::LinearExcess { k, u_crit } => Nucleation::linear_excess(k, u_crit),
    }
}

fn build_model(m: &ModelSpec, n: Nucleation, base: &Path) -> Result<KineticModel, CliError> {
    Ok(match m {
        ModelSpec::PowerLaw { a0, alpha, b0, beta } => make_power_law(*a0, *alpha, *b0, *beta, n)?,
        ModelSpec::ExpDetachment { a0, b0, k } => make_exp_detachment(*a0, *b0, *k, n)?,
        ModelSpec::ClassicalLs => make_classical_ls(n),
        ModelSpec::Tabulated { csv, phi0 } => {
            let cols = read_columns(&base.join(csv), &["x", "a", "b"])?;
            let mut it = cols.into_iter();
            let (xs, a, b) = (it.next().unwrap(), it.next().unwrap(), it.next().unwrap());
            make_tabulated(&csv.display().to_string(), xs, a, b, *phi0, n)?
        }
    })
}

fn build_density(d: &DensitySpec, base: &Path) -> Result<InitialDensity, CliError> {
    Ok(match d {
        DensitySpec::Zero => InitialDensity::zero(),
        DensitySpec::Indicator { c, x1, x2 } => InitialDensity::indicator(*c, *x1, *x2)?,
        DensitySpec::Gamma { c, p, q, cutoff } => InitialDensity::gamma(*c, *p, *q, *cutoff)?,
        DensitySpec::Table { csv } => {
            let mut cols = read_columns(&base.join(csv), &["x", "f"])?.into_iter();
            InitialDensity::tabulated(cols.next().unwrap(), cols.next().unwrap())?
        }
    })
}

/// Reads the named numeric columns of a headed CSV file.
fn read_columns(path: &Path, names: &[&str]) -> Result<Vec<Vec<f64>>, CliError> {
    let bad = |msg: String| CliError::Parse(format!("{}: {msg}", path.display()));
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path).map_err(|e| bad(e.to_string()))?;
    let headers = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
    let idx: Vec<usize> = names
        .iter()
        .map(|n| headers.iter().position(|h| h == *n).ok_or_else(|| bad(format!("missing column '{n}'"))))
        .collect::<Result<_, _>>()?;
    let mut cols = vec![Vec::new(); names.len()];
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        for (c, &i) in idx.iter().enumerate() {
            let field = rec.get(i).unwrap_or("");
            let v: f64 = field.parse().map_err(|_| bad(format!("row {}: '{field}' is not a number", line + 2)))?;
            cols[c].push(v);
        }
    }
    Ok(cols)
}
