//! Command-line interface: experiment runs, report regeneration, bound
//! evaluation, lemma verification, and instance certification.
//!
//! Exit codes: 0 success, 2 config error, 3 assertion failure,
//! 4 infeasible instance.

use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::bounds::{effective_dimension, lower_bound, switching_budget, BoundSpec};
use crate::error::{Error, Result};
use crate::geometry::grid_partition;
use crate::harness::{
    emit_outputs, run_experiment, write_report, ExperimentConfig, FamilySpec, ObjectiveSpec,
};
use crate::objectives::{envelope_check, halton_points, SamplePlan};
use crate::optimizers::OptimizerSpec;
use crate::simulation::NoiseModel;
use crate::verification::{
    hitting_invariance_check, hitting_survival_ks, pigeonhole_check, transport_check, ProblemPair,
};

#[derive(Parser)]
#[command(name = "cso", version, about = "Continuous simulation optimization test bench")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment sweep from a JSON config.
    Run(RunArgs),
    /// Regenerate derived tables from a completed run directory.
    Report {
        /// Run directory containing results.csv and run_meta.json.
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Lower-bound formulas.
    Bounds {
        #[command(subcommand)]
        cmd: BoundsCmd,
    },
    /// Monte Carlo checks of the change-of-measure lemmas.
    Verify {
        #[command(subcommand)]
        cmd: VerifyCmd,
    },
    /// Instance-family certification.
    Instances {
        #[command(subcommand)]
        cmd: InstancesCmd,
    },
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Override the config's replication count.
    #[arg(long)]
    reps: Option<usize>,
    /// Override the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config's worker count (0 = all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Persist per-replication gaps under raw/.
    #[arg(long)]
    raw: bool,
}

#[derive(Subcommand)]
enum BoundsCmd {
    /// Print the lower bound and both of its terms for one grid point.
    Eval(BoundArgs),
    /// Print the switching budget where the two terms cross.
    Switch(BoundArgs),
}

#[derive(Args)]
struct BoundArgs {
    #[arg(long)]
    d: usize,
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    beta: f64,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    sigma2: f64,
    #[arg(long, default_value_t = 1.0)]
    b_poly: f64,
    #[arg(long, default_value_t = 1.0)]
    b_exp_scale: f64,
    #[arg(long, default_value_t = 1.0)]
    b_exp_rate: f64,
}

#[derive(Subcommand)]
enum VerifyCmd {
    /// Probability-transport inequality.
    Transport(ScenarioArgs),
    /// Hitting-time distribution invariance.
    Hitting(ScenarioArgs),
    /// Pigeonhole hitting bound.
    Pigeonhole(ScenarioArgs),
}

#[derive(Args)]
struct ScenarioArgs {
    /// JSON scenario file.
    #[arg(long)]
    scenario: PathBuf,
    /// Where to write the JSON report (defaults next to the scenario).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum InstancesCmd {
    /// Certify envelopes, family coherence, and maximizers.
    Check {
        /// JSON family spec: family kind, d, alpha, beta, m, m_tilde, n,
        /// sigma2.
        #[arg(long)]
        spec: PathBuf,
        /// Where to write the JSON report.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Scan points per member.
        #[arg(long, default_value_t = 10_000)]
        points: usize,
        /// Check at most this many members (evenly spaced).
        #[arg(long, default_value_t = 64)]
        max_members: u64,
    },
}

/// Scenario file shared by the three verify subcommands; `check` must
/// match the invoked subcommand.
#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "check", rename_all = "lowercase")]
enum Scenario {
    Transport {
        family: FamilySpec,
        member: u64,
        optimizer: OptimizerSpec,
        sigma2: f64,
        n: usize,
        reps: usize,
        seed: u64,
    },
    Hitting {
        family: FamilySpec,
        member: u64,
        optimizer: OptimizerSpec,
        sigma2: f64,
        n: usize,
        reps: usize,
        seed: u64,
        /// When set, the trajectory distribution is compared against this
        /// other member instead of the benchmark: a pair differing outside
        /// the claimed region, expected to fail.
        #[serde(default)]
        negative_control_member: Option<u64>,
    },
    Pigeonhole {
        objective: ObjectiveSpec,
        optimizer: OptimizerSpec,
        sigma2: f64,
        /// Cells per axis of the disjoint grid used as pigeonholes.
        cells_per_axis: u64,
        n2: usize,
        n: usize,
        reps: usize,
        seed: u64,
    },
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &PathBuf) -> Result<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    Ok(serde_json::from_str(&text)?)
}

fn write_json<T: Serialize>(value: &T, path: &PathBuf) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let mut config: ExperimentConfig = read_json(&args.config)?;
    if let Some(reps) = args.reps {
        config.replications = reps;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(workers) = args.workers {
        config.workers = workers;
    }
    if args.raw {
        config.raw_dump = true;
    }
    let output = run_experiment(&config)?;
    let dir = emit_outputs(&output, &config, &args.out)?;
    println!(
        "wrote {} rows ({} failures) to {}",
        output.rows.len(),
        output.failures.len(),
        dir.display()
    );
    for w in &output.warnings {
        eprintln!("warning: {w}");
    }
    if !output.audit.clean() {
        return Err(Error::AssertionFailed(format!(
            "conformance audit failed: {} budget overruns, {} foreign recommendations",
            output.audit.budget_overruns, output.audit.foreign_recommendations
        )));
    }
    Ok(())
}

fn bound_spec_from(args: &BoundArgs) -> Result<BoundSpec> {
    let d_eff = effective_dimension(args.d, args.alpha, args.beta)?;
    let regime = if args.alpha == args.beta {
        crate::bounds::Regime::AlphaEqBeta
    } else {
        crate::bounds::Regime::AlphaLtBeta
    };
    BoundSpec::with_constants(regime, d_eff, args.b_poly, args.b_exp_scale, args.b_exp_rate)
}

fn cmd_bounds(cmd: BoundsCmd) -> Result<()> {
    match cmd {
        BoundsCmd::Eval(args) => {
            let spec = bound_spec_from(&args)?;
            let n = args
                .n
                .ok_or_else(|| Error::Config("bounds eval requires --n".into()))?;
            let var = if args.sigma2 == 0.0 {
                0.0
            } else {
                spec.variance_term(n as f64, args.sigma2)
            };
            let det = spec.deterministic_term(n as f64);
            let bound = lower_bound(&spec, n, args.sigma2)?;
            println!("effective_dimension = {}", spec.d_eff);
            println!("variance_term = {var:.17e}");
            println!("deterministic_term = {det:.17e}");
            println!("lower_bound = {bound:.17e}");
        }
        BoundsCmd::Switch(args) => {
            let spec = bound_spec_from(&args)?;
            let n_star = switching_budget(&spec, args.sigma2)?;
            println!("switching_budget = {n_star:.17e}");
        }
    }
    Ok(())
}

fn report_path(args: &ScenarioArgs, name: &str) -> PathBuf {
    args.out
        .clone()
        .unwrap_or_else(|| args.scenario.with_file_name(format!("{name}_report.json")))
}

fn cmd_verify(cmd: VerifyCmd) -> Result<()> {
    match cmd {
        VerifyCmd::Transport(args) => {
            let Scenario::Transport { family, member, optimizer, sigma2, n, reps, seed } =
                read_json(&args.scenario)?
            else {
                return Err(Error::Config("scenario check kind must be 'transport'".into()));
            };
            let fam = family.build()?;
            let region = fam.member_cell(member)?;
            let pair = ProblemPair::new(
                fam.benchmark_for(member)?,
                fam.member(member)?,
                NoiseModel::from_sigma2(sigma2)?,
                region.clone(),
            )?;
            let report = transport_check(&optimizer, &pair, &region, reps, n, seed)?;
            write_json(&report, &report_path(&args, "transport"))?;
            println!(
                "transport: P1={:.4} P2={:.4} sqrt(E L/2)={:.4} margin={:.4} pass={}",
                report.p1,
                report.p2,
                (report.mean_llr / 2.0).sqrt(),
                report.margin,
                report.pass
            );
            if !report.pass {
                return Err(Error::AssertionFailed("transport inequality violated".into()));
            }
        }
        VerifyCmd::Hitting(args) => {
            let Scenario::Hitting {
                family,
                member,
                optimizer,
                sigma2,
                n,
                reps,
                seed,
                negative_control_member,
            } = read_json(&args.scenario)?
            else {
                return Err(Error::Config("scenario check kind must be 'hitting'".into()));
            };
            let fam = family.build()?;
            let region = fam.member_cell(member)?;
            let noise = NoiseModel::from_sigma2(sigma2)?;
            let report = match negative_control_member {
                None => {
                    let pair = ProblemPair::new(
                        fam.benchmark_for(member)?,
                        fam.member(member)?,
                        noise,
                        region.clone(),
                    )?;
                    hitting_invariance_check(&optimizer, &pair, reps, n, seed)?
                }
                Some(other) => hitting_survival_ks(
                    &optimizer,
                    &fam.member(member)?,
                    &fam.member(other)?,
                    noise,
                    &region,
                    reps,
                    n,
                    seed,
                )?,
            };
            write_json(&report, &report_path(&args, "hitting"))?;
            println!(
                "hitting: KS={:.4} critical={:.4} pass={}",
                report.ks_stat, report.ks_critical, report.pass
            );
            if !report.pass {
                return Err(Error::AssertionFailed(
                    "hitting-time survival curves differ".into(),
                ));
            }
        }
        VerifyCmd::Pigeonhole(args) => {
            let Scenario::Pigeonhole {
                objective,
                optimizer,
                sigma2,
                cells_per_axis,
                n2,
                n,
                reps,
                seed,
            } = read_json(&args.scenario)?
            else {
                return Err(Error::Config("scenario check kind must be 'pigeonhole'".into()));
            };
            let problem = objective.build()?;
            let cells = grid_partition(problem.dim(), cells_per_axis)?;
            let report = pigeonhole_check(
                &optimizer,
                &problem,
                NoiseModel::from_sigma2(sigma2)?,
                &cells,
                n2,
                n,
                reps,
                seed,
            )?;
            write_json(&report, &report_path(&args, "pigeonhole"))?;
            println!(
                "pigeonhole: best survival {:.4} (cell {}) threshold {:.4} pass={}",
                report.best_survival, report.best_cell, report.threshold, report.pass
            );
            if !report.pass {
                return Err(Error::AssertionFailed("pigeonhole bound violated".into()));
            }
        }
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct MemberCheck {
    member: u64,
    envelope_violations: usize,
    coherence_violations: usize,
    maximizer_ok: bool,
}

#[derive(Debug, Serialize)]
struct InstanceCheckReport {
    family: String,
    member_count: u64,
    points_per_member: usize,
    members_checked: Vec<u64>,
    checks: Vec<MemberCheck>,
    pass: bool,
}

fn cmd_instances_check(
    spec_path: PathBuf,
    out: Option<PathBuf>,
    points: usize,
    max_members: u64,
) -> Result<()> {
    let spec: FamilySpec = read_json(&spec_path)?;
    let fam = spec.build()?;
    let count = fam.member_count();
    let stride = (count / max_members.min(count)).max(1);
    let member_ids: Vec<u64> = (0..count).step_by(stride as usize).take(max_members as usize).collect();
    let env = spec.envelope()?;
    let plan = SamplePlan { points, ..SamplePlan::default() };
    let scan = halton_points(spec.d, points);

    let mut checks = Vec::new();
    let mut pass = true;
    for &i in &member_ids {
        let member = fam.member(i)?;
        let bench = fam.benchmark_for(i)?;
        let cell = fam.member_cell(i)?;
        let envelope = envelope_check(&member, &env, &plan)?;
        let mut coherence_violations = 0usize;
        let mut best_outside = f64::NEG_INFINITY;
        for x in &scan {
            if cell.contains_slice(x) {
                continue;
            }
            if (member.eval_slice(x) - bench.eval_slice(x)).abs() > 1e-12 {
                coherence_violations += 1;
            }
            best_outside = best_outside.max(member.eval_slice(x));
        }
        let maximizer_ok = (member.eval(member.x_star()) - member.y_star()).abs() <= 1e-12
            && best_outside < member.y_star();
        pass &= envelope.passed() && coherence_violations == 0 && maximizer_ok;
        checks.push(MemberCheck {
            member: i,
            envelope_violations: envelope.violation_count,
            coherence_violations,
            maximizer_ok,
        });
    }
    let report = InstanceCheckReport {
        family: spec.family.clone(),
        member_count: count,
        points_per_member: points,
        members_checked: member_ids,
        checks,
        pass,
    };
    let out = out.unwrap_or_else(|| spec_path.with_file_name("instances_report.json"));
    write_json(&report, &out)?;
    println!(
        "instances check: {} members of {} checked, pass={}",
        report.members_checked.len(),
        count,
        pass
    );
    if !pass {
        return Err(Error::AssertionFailed("instance certification failed".into()));
    }
    Ok(())
}

/// Entry point used by the binary; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Report { input } => write_report(&input),
        Command::Bounds { cmd } => cmd_bounds(cmd),
        Command::Verify { cmd } => cmd_verify(cmd),
        Command::Instances { cmd } => match cmd {
            InstancesCmd::Check { spec, out, points, max_members } => {
                cmd_instances_check(spec, out, points, max_members)
            }
        },
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
