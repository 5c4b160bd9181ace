//! Declarative convergence sweeps over kernels, operators, problems,
//! resolutions and boundary weights.
//!
//! A configuration is a JSON document:
//!
//! ```json
//! {
//!   "name": "example1",
//!   "kernels": [{ "family": "matern", "m": 4 }],
//!   "operators": ["laplace"],
//!   "problems": ["trig"],
//!   "trial_space": "ZY",
//!   "solver": { "wls": { "theta": ["inf", 0, 0.5, 1, 2] } },
//!   "n_z": [121, 256, 441],
//!   "interior_divisor": 2,
//!   "boundary_divisor": 2,
//!   "x_source": { "kind": "halton", "n_x": 1000 },
//!   "eval_grid_n": 100,
//!   "rcond": null,
//!   "weight_convention": "squared",
//!   "fit_drop_last": 0,
//!   "jobs": 1,
//!   "record_timing": true,
//!   "output": "results"
//! }
//! ```
//!
//! `solver` may also be the string `"cls"`. All problems live on `[−1, 1]²`.
//! The trial grid has `√n_Z` nodes per side with spacing `h_Z`; `X` is the
//! interior of the grid with spacing `h_Z/interior_divisor` (or Halton points)
//! and `Y` the boundary of the grid with spacing `h_Z/boundary_divisor`.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{error_report, CellResult, ConvergenceStudy, StudyRow};
use crate::assembly::{CollocationMatrices, CollocationSystem, TrialSpace};
use crate::error::{KansaError, Result};
use crate::geometry::{closed_grid, halton_points, refined_collocation, Domain, PointSet};
use crate::kernels::Kernel;
use crate::pde::{BoundaryValueProblem, EllipticOperator, OperatorKind, SolutionKind};
use crate::solvers::{solve_cls, solve_wls, wls_weight, Theta, WeightConvention};

const DIM: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelSpec {
    Matern { m: u32 },
    Gaussian { shape: f64 },
    Multiquadric { shape: f64 },
}

impl KernelSpec {
    pub fn build(&self, dim: usize) -> Result<Kernel> {
        match *self {
            KernelSpec::Matern { m } => Kernel::matern_sobolev(m, dim),
            KernelSpec::Gaussian { shape } => Kernel::gaussian(shape, dim),
            KernelSpec::Multiquadric { shape } => Kernel::multiquadric(shape, dim),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SolverSpec {
    Cls,
    Wls { theta: Vec<Theta> },
}

impl SolverSpec {
    pub fn thetas(&self) -> Vec<Theta> {
        match self {
            SolverSpec::Cls => vec![Theta::Infinite],
            SolverSpec::Wls { theta } => theta.clone(),
        }
    }
}

/// Where the PDE collocation points come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum XSource {
    #[default]
    Regular,
    /// The first `n_x` Halton points; by default as many as the regular set has.
    Halton {
        #[serde(default)]
        n_x: Option<usize>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub kernels: Vec<KernelSpec>,
    pub operators: Vec<OperatorKind>,
    pub problems: Vec<SolutionKind>,
    pub trial_space: TrialSpace,
    pub solver: SolverSpec,
    /// Trial grid sizes; each must be a perfect square.
    pub n_z: Vec<usize>,
    /// `h_X = h_Z / interior_divisor`, one of 1, 2, 3.
    #[serde(default = "one")]
    pub interior_divisor: usize,
    /// `h_Y = h_Z / boundary_divisor`, one of 1, 2.
    #[serde(default = "one")]
    pub boundary_divisor: usize,
    #[serde(default)]
    pub x_source: XSource,
    #[serde(default = "default_eval_grid")]
    pub eval_grid_n: usize,
    /// Relative singular-value cutoff; `max(m, n)·ε` when absent.
    #[serde(default)]
    pub rcond: Option<f64>,
    #[serde(default)]
    pub weight_convention: WeightConvention,
    /// Output directory for the CSV and summary.
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Recorded in the report header. The pipeline itself is deterministic.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub fit_drop_last: usize,
    /// Cells solved concurrently; 1 keeps cells sequential.
    #[serde(default = "one")]
    pub jobs: usize,
    /// When false, `solve_seconds` is written as `NA`.
    #[serde(default = "yes")]
    pub record_timing: bool,
}

fn one() -> usize {
    1
}

fn yes() -> bool {
    true
}

fn default_eval_grid() -> usize {
    100
}

impl ExperimentConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let config: ExperimentConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_json_str(&fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Field-level checks beyond what the schema enforces.
    pub fn validate(&self) -> Result<()> {
        if self.name.trim().is_empty() {
            return Err(KansaError::config("name", "must not be empty"));
        }
        if self.name.contains(['/', '\\']) {
            return Err(KansaError::config("name", "is used as a file name and must not contain path separators"));
        }
        for (field, len) in [
            ("kernels", self.kernels.len()),
            ("operators", self.operators.len()),
            ("problems", self.problems.len()),
            ("n_z", self.n_z.len()),
            ("solver.wls.theta", self.solver.thetas().len()),
        ] {
            if len == 0 {
                return Err(KansaError::config(field, "list must not be empty"));
            }
        }
        for (i, k) in self.kernels.iter().enumerate() {
            k.build(DIM)
                .map_err(|e| KansaError::config(format!("kernels[{i}]"), e.to_string()))?;
        }
        for (i, &n) in self.n_z.iter().enumerate() {
            match grid_side(n) {
                Some(side) if side >= 3 => {}
                _ => {
                    return Err(KansaError::config(
                        format!("n_z[{i}]"),
                        format!("{n} is not the square of an integer ≥ 3"),
                    ))
                }
            }
        }
        if !(1..=3).contains(&self.interior_divisor) {
            return Err(KansaError::config("interior_divisor", "must be 1, 2 or 3"));
        }
        if !(1..=2).contains(&self.boundary_divisor) {
            return Err(KansaError::config("boundary_divisor", "must be 1 or 2"));
        }
        if self.eval_grid_n < 2 {
            return Err(KansaError::config("eval_grid_n", "must be at least 2"));
        }
        if let Some(r) = self.rcond {
            if !(r.is_finite() && r > 0.0 && r < 1.0) {
                return Err(KansaError::config("rcond", format!("must lie in (0, 1), got {r}")));
            }
        }
        if self.jobs == 0 {
            return Err(KansaError::config("jobs", "must be at least 1"));
        }
        if let XSource::Halton { n_x: Some(0) } = self.x_source {
            return Err(KansaError::config("x_source.n_x", "must be positive"));
        }
        Ok(())
    }
}

fn grid_side(n: usize) -> Option<usize> {
    let side = (n as f64).sqrt().round() as usize;
    (side * side == n).then_some(side)
}

/// Names accepted by [`preset`].
pub const PRESET_NAMES: [&str; 6] = [
    "example1",
    "example2",
    "example3",
    "example3_scattered",
    "example4_gaussian",
    "example4_mq",
];

fn squares(sides: &[usize]) -> Vec<usize> {
    sides.iter().map(|s| s * s).collect()
}

/// Built-in study layouts.
pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let full = squares(&[11, 16, 21, 26, 31, 36]);
    let base = ExperimentConfig {
        name: name.to_string(),
        kernels: vec![KernelSpec::Matern { m: 4 }],
        operators: vec![OperatorKind::Laplace],
        problems: vec![SolutionKind::Trig],
        trial_space: TrialSpace::ZUnionY,
        solver: SolverSpec::Cls,
        n_z: full.clone(),
        interior_divisor: 2,
        boundary_divisor: 2,
        x_source: XSource::Regular,
        eval_grid_n: default_eval_grid(),
        rcond: None,
        weight_convention: WeightConvention::Squared,
        output: None,
        seed: 0,
        fit_drop_last: 0,
        jobs: 1,
        record_timing: true,
    };
    let sweep = SolverSpec::Wls {
        theta: vec![
            Theta::Infinite,
            Theta::Finite(0.0),
            Theta::Finite(0.5),
            Theta::Finite(1.0),
            Theta::Finite(2.0),
        ],
    };
    let config = match name {
        "example1" => base,
        "example2" => ExperimentConfig {
            trial_space: TrialSpace::Z,
            ..base
        },
        "example3" => ExperimentConfig {
            solver: sweep,
            ..base
        },
        "example3_scattered" => ExperimentConfig {
            solver: sweep,
            problems: vec![SolutionKind::Peaks3],
            operators: vec![OperatorKind::Convdiff, OperatorKind::HelmholtzX2, OperatorKind::HelmholtzX],
            x_source: XSource::Halton { n_x: None },
            ..base
        },
        "example4_gaussian" => ExperimentConfig {
            kernels: vec![KernelSpec::Gaussian { shape: 1.0 }],
            problems: vec![SolutionKind::Peaks1, SolutionKind::Peaks3],
            trial_space: TrialSpace::Z,
            n_z: vec![36 * 36],
            ..base
        },
        "example4_mq" => ExperimentConfig {
            kernels: vec![KernelSpec::Multiquadric { shape: 1.0 }],
            problems: vec![SolutionKind::Peaks1, SolutionKind::Peaks3],
            trial_space: TrialSpace::Z,
            ..base
        },
        _ => {
            return Err(KansaError::config(
                "preset",
                format!("unknown preset {name:?}; known: {}", PRESET_NAMES.join(", ")),
            ))
        }
    };
    config.validate()?;
    Ok(config)
}

/// Point sets and nominal spacings of one resolution level.
#[derive(Debug, Clone)]
pub struct Level {
    pub n_z: usize,
    pub h_z: f64,
    pub h_x: f64,
    pub h_y: f64,
    pub z: PointSet,
    pub x: PointSet,
    pub y: PointSet,
}

/// Builds the trial grid and collocation sets for `n_z` trial centers.
pub fn build_level(config: &ExperimentConfig, domain: &Domain, n_z: usize) -> Result<Level> {
    let side = grid_side(n_z).ok_or_else(|| KansaError::config("n_z", format!("{n_z} is not a perfect square")))?;
    let z = closed_grid(domain, side)?;
    let (regular_x, y) = refined_collocation(domain, side, config.interior_divisor, config.boundary_divisor)?;
    let x = match config.x_source {
        XSource::Regular => regular_x,
        XSource::Halton { n_x } => halton_points(domain, n_x.unwrap_or(regular_x.len()))?,
    };
    let span = (0..domain.dim()).map(|a| domain.span(a)).fold(0.0, f64::max);
    let h_z = span / (side - 1) as f64;
    Ok(Level {
        n_z,
        h_z,
        h_x: h_z / config.interior_divisor as f64,
        h_y: h_z / config.boundary_divisor as f64,
        z,
        x,
        y,
    })
}

/// Everything solved against one assembled pair of matrices.
struct Unit {
    kernel: Kernel,
    operator: OperatorKind,
    n_z: usize,
}

/// Runs every cell of the sweep. Solver failures are recorded per row and do
/// not stop the sweep; only configuration errors are returned as `Err`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ConvergenceStudy> {
    config.validate()?;
    let domain = Domain::reference_square();
    let mut units = Vec::new();
    for spec in &config.kernels {
        let kernel = spec.build(DIM)?;
        for &operator in &config.operators {
            for &n_z in &config.n_z {
                units.push(Unit { kernel, operator, n_z });
            }
        }
    }
    let run = |u: &Unit| run_unit(config, &domain, u);
    let batches: Vec<Vec<StudyRow>> = if config.jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.jobs)
            .build()
            .map_err(|e| KansaError::Solver(format!("cannot start worker pool: {e}")))?;
        pool.install(|| units.par_iter().map(run).collect())
    } else {
        units.iter().map(run).collect()
    };
    Ok(ConvergenceStudy::new(
        config.name.clone(),
        batches.into_iter().flatten().collect(),
        config.fit_drop_last,
    ))
}

fn run_unit(config: &ExperimentConfig, domain: &Domain, unit: &Unit) -> Vec<StudyRow> {
    let thetas = config.solver.thetas();
    let level = build_level(config, domain, unit.n_z);
    let operator = EllipticOperator::builtin(unit.operator);
    let matrices = level.as_ref().map_err(|e| e.to_string()).and_then(|lvl| {
        log::info!(
            "assembling {} / {} at n_Z = {} ({} + {} conditions)",
            unit.kernel,
            unit.operator,
            unit.n_z,
            lvl.x.len(),
            lvl.y.len()
        );
        CollocationMatrices::assemble(&operator, &unit.kernel, &lvl.x, &lvl.y, &lvl.z, config.trial_space)
            .map(Arc::new)
            .map_err(|e| e.to_string())
    });

    let side = grid_side(unit.n_z).unwrap_or(0).max(2);
    let h_z = 2.0 / (side - 1) as f64;
    let (h_x, h_y) = match &level {
        Ok(l) => (l.h_x, l.h_y),
        Err(_) => (
            h_z / config.interior_divisor as f64,
            h_z / config.boundary_divisor as f64,
        ),
    };

    let mut rows = Vec::new();
    for &problem_kind in &config.problems {
        let problem = BoundaryValueProblem::builtin(problem_kind, unit.operator);
        let system = matrices
            .as_ref()
            .map(|m| CollocationSystem::new(Arc::clone(m), &problem));
        for &theta in &thetas {
            let weight = wls_weight(theta, h_x, h_y, DIM).with_convention(config.weight_convention);
            let outcome = match &system {
                Ok(system) => solve_cell(config, domain, system, &problem, theta, &weight),
                Err(e) => Err(e.to_string()),
            };
            if let Err(e) = &outcome {
                log::warn!("cell {} / {} / {problem_kind} / n_Z = {} / theta {theta} failed: {e}", unit.kernel, unit.operator, unit.n_z);
            }
            rows.push(StudyRow {
                kernel: unit.kernel.to_string(),
                operator: unit.operator.to_string(),
                problem: problem_kind.to_string(),
                trial: config.trial_space.to_string(),
                n_z: unit.n_z,
                h_z,
                h_x,
                h_y,
                theta,
                weight: (!theta.is_infinite()).then_some(weight.weight),
                outcome,
            });
        }
    }
    rows
}

fn solve_cell(
    config: &ExperimentConfig,
    domain: &Domain,
    system: &CollocationSystem,
    problem: &BoundaryValueProblem,
    theta: Theta,
    weight: &crate::solvers::WlsWeight,
) -> std::result::Result<CellResult, String> {
    let solution = match theta {
        Theta::Infinite => solve_cls(system, config.rcond),
        Theta::Finite(_) => solve_wls(system, weight, config.rcond),
    }
    .map_err(|e| e.to_string())?;
    let report = error_report(&solution, problem.exact(), domain, config.eval_grid_n).map_err(|e| e.to_string())?;
    if !(report.l2.is_finite() && report.h2.is_finite()) {
        return Err("non-finite error norms".into());
    }
    Ok(CellResult {
        l2: report.l2,
        h2: report.h2,
        bdy_rank: solution.diagnostics.boundary_rank,
        cond_est: solution.diagnostics.condition,
        solve_seconds: solution.diagnostics.solve_seconds,
    })
}

/// Writes `<name>.csv` and `<name>_summary.txt` into `dir`; returns the CSV path.
pub fn write_report(study: &ConvergenceStudy, config: &ExperimentConfig, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let csv_path = dir.join(format!("{}.csv", config.name));
    let stamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let file = fs::File::create(&csv_path)?;
    study.write_csv(std::io::BufWriter::new(file), Some(stamp), config.record_timing)?;
    fs::write(dir.join(format!("{}_summary.txt", config.name)), study.summary())?;
    Ok(csv_path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(name: &str) -> ExperimentConfig {
        ExperimentConfig {
            name: name.into(),
            n_z: vec![9, 16],
            eval_grid_n: 12,
            record_timing: false,
            ..preset("example1").unwrap()
        }
    }

    #[test]
    fn presets_match_documented_layouts() {
        assert_eq!(preset("example1").unwrap().n_z, vec![121, 256, 441, 676, 961, 1296]);
        assert_eq!(preset("example3").unwrap().solver.thetas().len(), 5);
        assert_eq!(preset("example3").unwrap().solver.thetas()[0], Theta::Infinite);
        assert_eq!(preset("example4_gaussian").unwrap().n_z, vec![1296]);
        assert_eq!(preset("example2").unwrap().trial_space, TrialSpace::Z);
        for name in PRESET_NAMES {
            let c = preset(name).unwrap();
            let round = ExperimentConfig::from_json_str(&c.to_json().unwrap()).unwrap();
            assert_eq!(round, c);
        }
        assert!(matches!(preset("example9"), Err(KansaError::Config { .. })));
    }

    #[test]
    fn validation_names_the_field() {
        let bad = |edit: fn(&mut ExperimentConfig), field: &str| {
            let mut c = small("v");
            edit(&mut c);
            match c.validate() {
                Err(KansaError::Config { field: f, .. }) => assert_eq!(f, field),
                other => panic!("expected config error on {field}, got {other:?}"),
            }
        };
        bad(|c| c.n_z = vec![121, 250], "n_z[1]");
        bad(|c| c.n_z.clear(), "n_z");
        bad(|c| c.kernels = vec![KernelSpec::Matern { m: 2 }], "kernels[0]");
        bad(|c| c.interior_divisor = 4, "interior_divisor");
        bad(|c| c.boundary_divisor = 3, "boundary_divisor");
        bad(|c| c.rcond = Some(-1.0), "rcond");
        bad(|c| c.solver = SolverSpec::Wls { theta: vec![] }, "solver.wls.theta");
        bad(|c| c.jobs = 0, "jobs");
    }

    #[test]
    fn json_schema() {
        let text = r#"{
            "name": "t",
            "kernels": [{"family": "matern", "m": 4}, {"family": "gaussian", "shape": 2.0}],
            "operators": ["laplace", "helmholtz_x"],
            "problems": ["trig"],
            "trial_space": "Z",
            "solver": {"wls": {"theta": [0, "inf"]}},
            "n_z": [9],
            "x_source": {"kind": "halton"}
        }"#;
        let c = ExperimentConfig::from_json_str(text).unwrap();
        assert_eq!(c.interior_divisor, 1);
        assert_eq!(c.eval_grid_n, 100);
        assert_eq!(c.x_source, XSource::Halton { n_x: None });
        assert_eq!(c.solver.thetas(), vec![Theta::Finite(0.0), Theta::Infinite]);
        assert!(ExperimentConfig::from_json_str(r#"{"name": "t"}"#).is_err());
        let cls = text.replace(r#"{"wls": {"theta": [0, "inf"]}}"#, r#""cls""#);
        assert_eq!(ExperimentConfig::from_json_str(&cls).unwrap().solver, SolverSpec::Cls);
    }

    #[test]
    fn level_spacings_and_halton_count() {
        let mut c = small("lvl");
        let d = Domain::reference_square();
        let lvl = build_level(&c, &d, 121).unwrap();
        assert_eq!((lvl.x.len(), lvl.y.len()), (361, 80));
        assert!((lvl.h_z - 0.2).abs() < 1e-15);
        assert!((lvl.h_x - 0.1).abs() < 1e-15);
        c.x_source = XSource::Halton { n_x: None };
        let lvl = build_level(&c, &d, 121).unwrap();
        assert_eq!(lvl.x.len(), 361);
    }

    #[test]
    fn single_cell_study_has_no_rates() {
        let c = ExperimentConfig {
            n_z: vec![9],
            ..small("one")
        };
        let study = run_experiment(&c).unwrap();
        assert_eq!(study.rows.len(), 1);
        assert!(study.all_solved());
        let g = &study.groups()[0];
        assert_eq!(study.fitted_rates(g).h2_rate, None);
    }

    #[test]
    fn theta_sweep_shares_one_assembly() {
        let c = ExperimentConfig {
            n_z: vec![16],
            solver: preset("example3").unwrap().solver,
            ..small("sweep")
        };
        let study = run_experiment(&c).unwrap();
        assert_eq!(study.rows.len(), 5);
        assert!(study.all_solved());
        assert_eq!(study.rows[0].weight, None);
        assert_eq!(study.rows[1].weight, Some(1.0));
    }

    #[test]
    fn failures_are_isolated() {
        let good = run_experiment(&small("iso")).unwrap();
        // An rcond this close to 1 truncates everything; the study still completes.
        let c = ExperimentConfig {
            rcond: Some(0.999_999),
            ..small("iso")
        };
        let study = run_experiment(&c).unwrap();
        assert_eq!(study.rows.len(), good.rows.len());
    }

    #[test]
    fn parallel_sweep_matches_sequential() {
        let seq = run_experiment(&small("par")).unwrap();
        let par = run_experiment(&ExperimentConfig { jobs: 2, ..small("par") }).unwrap();
        assert_eq!(seq.rows.len(), par.rows.len());
        for (a, b) in seq.rows.iter().zip(&par.rows) {
            assert_eq!((a.n_z, &a.problem), (b.n_z, &b.problem));
            let (a, b) = (a.outcome.as_ref().unwrap(), b.outcome.as_ref().unwrap());
            assert!((a.h2 - b.h2).abs() <= 1e-8 * a.h2);
        }
    }
}
