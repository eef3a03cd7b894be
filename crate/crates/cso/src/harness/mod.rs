//! Experiment protocol: configuration, parallel macro-replication with
//! per-cell derived streams, aggregation, and derived analyses.
//!
//! A grid cell is one (objective, optimizer, sigma^2, n) combination; its
//! stream is derived by hashing the cell's identity from the master seed,
//! so adding cells never perturbs existing results and replications can be
//! scheduled in any order.

mod analysis;
mod emit;

pub use analysis::{
    detect_switch, fit_loglog_slope, normalized_errors, switch_table, NormalizedRow, SwitchRow,
};
pub use emit::{emit_outputs, parse_results_csv, read_run_dir, write_report, RunDir};

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::objectives::{
    family_c2, family_g1, family_g2, EnvelopeParams, InstanceFamily, Objective,
};
use crate::optimizers::{run_algorithm, OptimizerSpec};
use crate::simulation::{NoiseModel, RngStream, SimulationOracle};

/// Which objective a run drives, as written in config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ObjectiveSpec {
    Test1 {
        d: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        c: Option<Vec<f64>>,
    },
    Test2 {
        d: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        c: Option<Vec<f64>>,
    },
    Member {
        family: FamilySpec,
        member: u64,
    },
}

/// Family description shared by run configs and the `instances check`
/// subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilySpec {
    pub family: String,
    pub d: usize,
    pub alpha: f64,
    pub beta: f64,
    pub m: f64,
    pub m_tilde: f64,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma2: Option<f64>,
}

impl FamilySpec {
    pub fn envelope(&self) -> Result<EnvelopeParams> {
        EnvelopeParams::new(self.alpha, self.beta, self.m, self.m_tilde)
    }

    pub fn build(&self) -> Result<InstanceFamily> {
        let env = self.envelope()?;
        match self.family.as_str() {
            "g1" => {
                let sigma2 = self.sigma2.ok_or_else(|| {
                    Error::Config("family g1 requires a sigma2 field".into())
                })?;
                family_g1(self.n, sigma2, &env, self.d)
            }
            "g2" => family_g2(self.n, &env, self.d),
            "c2" => family_c2(self.n, self.d, &env),
            other => Err(Error::Config(format!("unknown family kind '{other}'"))),
        }
    }
}

impl ObjectiveSpec {
    pub fn build(&self) -> Result<Objective> {
        match self {
            ObjectiveSpec::Test1 { d, c } => {
                let c = c.clone().map(Point::new).transpose()?;
                crate::objectives::make_test1(*d, c)
            }
            ObjectiveSpec::Test2 { d, c } => {
                let c = c.clone().map(Point::new).transpose()?;
                crate::objectives::make_test2(*d, c)
            }
            ObjectiveSpec::Member { family, member } => family.build()?.member(*member),
        }
    }

    /// Shape parameters governing the effective dimension of the bound the
    /// objective is compared against.
    pub fn shape(&self) -> (usize, f64, f64) {
        match self {
            ObjectiveSpec::Test1 { d, .. } => (*d, 2.0, 2.0),
            ObjectiveSpec::Test2 { d, .. } => (*d, 1.0, 2.0),
            ObjectiveSpec::Member { family, .. } => (family.d, family.alpha, family.beta),
        }
    }

    pub fn effective_dimension(&self) -> f64 {
        let (d, alpha, beta) = self.shape();
        d as f64 * (1.0 / alpha - 1.0 / beta)
    }
}

/// Full description of one experiment sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub objective: ObjectiveSpec,
    pub optimizers: Vec<OptimizerSpec>,
    pub sigma2: Vec<f64>,
    pub budgets: Vec<usize>,
    pub replications: usize,
    pub seed: u64,
    /// 0 means use all available workers.
    #[serde(default)]
    pub workers: usize,
    /// Persist per-replication gaps under `raw/`.
    #[serde(default)]
    pub raw_dump: bool,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replications < 1 {
            return Err(Error::Config("replications must be >= 1".into()));
        }
        if self.optimizers.is_empty() {
            return Err(Error::Config("at least one optimizer is required".into()));
        }
        if self.budgets.is_empty() {
            return Err(Error::Config("at least one budget is required".into()));
        }
        if !self.budgets.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Config("budgets must be strictly ascending".into()));
        }
        if self.sigma2.iter().any(|&s| !(s >= 0.0) || !s.is_finite()) {
            return Err(Error::Config("sigma2 entries must be finite and >= 0".into()));
        }
        Ok(())
    }
}

/// One aggregated experiment record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub objective: String,
    pub optimizer: String,
    pub d: usize,
    pub sigma2: f64,
    pub n: usize,
    pub replications: usize,
    pub mean_gap: f64,
    pub stderr: f64,
    pub wall_ms: f64,
}

/// A grid cell that could not run (e.g. budget below the optimizer's
/// minimum); recorded, never fatal.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellFailure {
    pub objective: String,
    pub optimizer: String,
    pub sigma2: f64,
    pub n: usize,
    pub reason: String,
}

/// Conformance counters collected across every replication of a run.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct AuditSummary {
    pub replications: usize,
    pub budget_overruns: usize,
    pub foreign_recommendations: usize,
}

impl AuditSummary {
    pub fn clean(&self) -> bool {
        self.budget_overruns == 0 && self.foreign_recommendations == 0
    }
}

/// Per-replication gaps of one cell, kept only when `raw_dump` is set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawCell {
    pub objective: String,
    pub optimizer: String,
    pub sigma2: f64,
    pub n: usize,
    pub gaps: Vec<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct RunOutput {
    pub rows: Vec<ExperimentRow>,
    pub failures: Vec<CellFailure>,
    pub audit: AuditSummary,
    pub warnings: Vec<String>,
    pub raw: Vec<RawCell>,
}

/// Stream label identifying a grid cell.
fn cell_label(objective: &str, optimizer: &str, sigma2: f64, n: usize) -> String {
    format!("{objective}|{optimizer}|{sigma2:e}|{n}")
}

fn run_cell(
    objective: &Objective,
    opt: &OptimizerSpec,
    sigma2: f64,
    n: usize,
    reps: usize,
    master: &RngStream,
) -> Result<(Vec<f64>, AuditSummary)> {
    let noise = NoiseModel::from_sigma2(sigma2)?;
    let cell_stream = master.fork_label(&cell_label(objective.label(), opt.name(), sigma2, n));
    let outcomes: Vec<Result<(f64, bool, bool)>> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = cell_stream.fork(rep as u64);
            let oracle = SimulationOracle::new(objective, noise, n);
            let rec = run_algorithm(opt, oracle, &mut rng)?;
            let within_budget = rec.trajectory.len() <= n;
            let visited = rec.trajectory.contains_point(rec.x_hat.coords());
            let gap = objective.y_star() - objective.eval(&rec.x_hat);
            Ok((gap, within_budget, visited))
        })
        .collect();
    let mut gaps = Vec::with_capacity(reps);
    let mut audit = AuditSummary { replications: reps, ..Default::default() };
    for outcome in outcomes {
        let (gap, within_budget, visited) = outcome?;
        gaps.push(gap);
        if !within_budget {
            audit.budget_overruns += 1;
        }
        if !visited {
            audit.foreign_recommendations += 1;
        }
    }
    Ok((gaps, audit))
}

fn aggregate(gaps: &[f64]) -> (f64, f64) {
    let r = gaps.len() as f64;
    let mean = gaps.iter().sum::<f64>() / r;
    if gaps.len() < 2 {
        return (mean, 0.0);
    }
    let var = gaps.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / (r - 1.0);
    (mean, (var / r).sqrt())
}

/// Runs the whole grid. Deterministic for a fixed seed regardless of the
/// worker count; infeasible cells become recorded failures.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunOutput> {
    config.validate()?;
    let objective = config.objective.build()?;
    let body = || run_experiment_inner(config, &objective);
    if config.workers == 0 {
        body()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build()
            .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;
        pool.install(body)
    }
}

fn run_experiment_inner(config: &ExperimentConfig, objective: &Objective) -> Result<RunOutput> {
    let master = RngStream::from_master_seed(config.seed);
    let mut out = RunOutput::default();
    if config.replications == 1 {
        out.warnings.push(
            "replications = 1: standard errors are reported as 0".to_string(),
        );
    }
    for opt in &config.optimizers {
        for &sigma2 in &config.sigma2 {
            for &n in &config.budgets {
                if n < opt.min_budget(objective.dim()) {
                    out.failures.push(CellFailure {
                        objective: objective.label().to_string(),
                        optimizer: opt.name().to_string(),
                        sigma2,
                        n,
                        reason: format!(
                            "budget {n} below the optimizer minimum {}",
                            opt.min_budget(objective.dim())
                        ),
                    });
                    continue;
                }
                let started = Instant::now();
                match run_cell(objective, opt, sigma2, n, config.replications, &master) {
                    Ok((gaps, audit)) => {
                        let (mean_gap, stderr) = aggregate(&gaps);
                        out.audit.replications += audit.replications;
                        out.audit.budget_overruns += audit.budget_overruns;
                        out.audit.foreign_recommendations += audit.foreign_recommendations;
                        out.rows.push(ExperimentRow {
                            objective: objective.label().to_string(),
                            optimizer: opt.name().to_string(),
                            d: objective.dim(),
                            sigma2,
                            n,
                            replications: config.replications,
                            mean_gap,
                            stderr,
                            wall_ms: started.elapsed().as_secs_f64() * 1e3,
                        });
                        if config.raw_dump {
                            out.raw.push(RawCell {
                                objective: objective.label().to_string(),
                                optimizer: opt.name().to_string(),
                                sigma2,
                                n,
                                gaps,
                            });
                        }
                    }
                    Err(e) => out.failures.push(CellFailure {
                        objective: objective.label().to_string(),
                        optimizer: opt.name().to_string(),
                        sigma2,
                        n,
                        reason: e.to_string(),
                    }),
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn small_config() -> ExperimentConfig {
        ExperimentConfig {
            objective: ObjectiveSpec::Test1 { d: 1, c: None },
            optimizers: vec![OptimizerSpec::Uniform, OptimizerSpec::Stroquool],
            sigma2: vec![0.0, 0.01],
            budgets: vec![32, 64],
            replications: 8,
            seed: 77,
            workers: 0,
            raw_dump: true,
        }
    }

    #[test]
    fn config_validation() {
        let mut c = small_config();
        c.replications = 0;
        assert!(c.validate().is_err());
        let mut c = small_config();
        c.budgets = vec![64, 32];
        assert!(c.validate().is_err());
        let mut c = small_config();
        c.sigma2 = vec![-1.0];
        assert!(c.validate().is_err());
        assert!(small_config().validate().is_ok());
    }

    #[test]
    fn deterministic_across_worker_counts() {
        let mut c1 = small_config();
        c1.workers = 1;
        let mut c2 = small_config();
        c2.workers = 2;
        let r1 = run_experiment(&c1).unwrap();
        let r2 = run_experiment(&c2).unwrap();
        assert_eq!(r1.rows.len(), r2.rows.len());
        for (a, b) in r1.rows.iter().zip(r2.rows.iter()) {
            assert_eq!(a.mean_gap, b.mean_gap);
            assert_eq!(a.stderr, b.stderr);
        }
        // raw gaps identical replication by replication
        for (a, b) in r1.raw.iter().zip(r2.raw.iter()) {
            assert_eq!(a.gaps, b.gaps);
        }
    }

    #[test]
    fn deterministic_noise_gives_zero_stderr() {
        let mut c = small_config();
        c.optimizers = vec![OptimizerSpec::Stroquool];
        c.sigma2 = vec![0.0];
        let out = run_experiment(&c).unwrap();
        for row in &out.rows {
            assert_eq!(row.stderr, 0.0);
            assert!(row.mean_gap >= -1e-12);
        }
        assert!(out.audit.clean());
    }

    #[test]
    fn extending_replications_preserves_prefix() {
        let mut c = small_config();
        c.replications = 4;
        let short = run_experiment(&c).unwrap();
        c.replications = 8;
        let long = run_experiment(&c).unwrap();
        for (a, b) in short.raw.iter().zip(long.raw.iter()) {
            assert_eq!(a.gaps[..], b.gaps[..4]);
        }
    }

    #[test]
    fn infeasible_cells_are_recorded_not_fatal() {
        let mut c = small_config();
        c.optimizers = vec![OptimizerSpec::Stroquool];
        c.budgets = vec![8, 32]; // 8 < stroquool minimum of 16
        let out = run_experiment(&c).unwrap();
        assert_eq!(out.failures.len(), c.sigma2.len());
        assert_eq!(out.rows.len(), c.sigma2.len());
    }

    #[test]
    fn aggregation_matches_raw_dump() {
        let c = small_config();
        let out = run_experiment(&c).unwrap();
        for raw in &out.raw {
            let row = out
                .rows
                .iter()
                .find(|r| {
                    r.optimizer == raw.optimizer && r.sigma2 == raw.sigma2 && r.n == raw.n
                })
                .unwrap();
            let (mean, se) = aggregate(&raw.gaps);
            assert_relative_eq!(mean, row.mean_gap, max_relative = 1e-12);
            assert_relative_eq!(se, row.stderr, max_relative = 1e-12);
        }
    }

    #[test]
    fn single_replication_flags_warning() {
        let mut c = small_config();
        c.replications = 1;
        let out = run_experiment(&c).unwrap();
        assert!(!out.warnings.is_empty());
        for row in &out.rows {
            assert_eq!(row.stderr, 0.0);
        }
    }

    #[test]
    fn family_member_objective_spec_builds() {
        let spec = ObjectiveSpec::Member {
            family: FamilySpec {
                family: "g1".into(),
                d: 1,
                alpha: 1.0,
                beta: 2.0,
                m: 1.0,
                m_tilde: 1.0 / 512.0,
                n: 1_000_000,
                sigma2: Some(1.0),
            },
            member: 3,
        };
        let obj = spec.build().unwrap();
        assert_eq!(obj.dim(), 1);
        assert_eq!(spec.effective_dimension(), 0.5);
    }
}
