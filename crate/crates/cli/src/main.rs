// `!(x > 0.0)` deliberately rejects NaN along with non-positive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod output;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use euler_ac::control_synth::pipeline::{synthesize, PipelineReport};
use euler_ac::control_synth::{ControlSchedule, StageId};
use euler_ac::galerkin_sim::{endpoint, integrate, SimOptions};
use euler_ac::harness::{self, Mutation};
use euler_ac::saturation::run_saturation;
use serde_json::json;

use config::ExperimentConfig;
use output::Output;

/// Replayed endpoint errors must match the logged ones this closely.
const REPLAY_TOL: f64 = 1e-10;

#[derive(Parser)]
#[command(
    name = "euler-ac",
    version,
    about = "Galerkin 2D Euler simulation and control synthesis"
)]
struct Cli {
    /// JSON experiment config; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Spectral cutoff override.
    #[arg(long, global = true)]
    cutoff: Option<usize>,
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Iterate bracket saturation of the generator set.
    Saturate,
    /// Synthesize a control steering the initial state to the target.
    Synthesize,
    /// Integrate the Galerkin system, optionally under a saved schedule.
    Simulate {
        #[arg(long)]
        schedule: Option<PathBuf>,
    },
    /// Run the identity and conservation checks.
    Verify,
    /// Re-simulate a saved schedule and compare with its logged error.
    Replay {
        #[arg(long)]
        schedule: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Aggregate saved results into CSV/JSON plot data.
    Report,
    /// Print the effective config as JSON.
    Config,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn load(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
        cfg.verify.seed = seed;
    }
    if let Some(n) = cli.cutoff {
        cfg.cutoff = n;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Returns whether every stage passed.
fn run(cli: Cli) -> Result<bool> {
    let cfg = load(&cli)?;
    let out = Output::new(&cfg, cli.quiet)?;
    match &cli.command {
        Command::Saturate => saturate(&cfg, &out),
        Command::Synthesize => synthesize_cmd(&cfg, &out),
        Command::Simulate { schedule } => simulate(&cfg, &out, schedule.as_deref()),
        Command::Verify => verify(&cfg, &out),
        Command::Replay { schedule, report } => replay(&cfg, &out, schedule.as_deref(), report.as_deref()),
        Command::Report => report(&cfg, &out),
        Command::Config => {
            let text = serde_json::to_string_pretty(&cfg)? + "\n";
            match std::io::stdout().write_all(text.as_bytes()) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
                _ => Ok(true),
            }
        }
    }
}

fn saturate(cfg: &ExperimentConfig, out: &Output) -> Result<bool> {
    let basis = cfg.basis()?;
    let g0 = cfg.generators(&basis)?;
    let run = run_saturation(&g0, cfg.synthesis.max_saturation_depth)?;
    out.json(
        "saturation.json",
        json!({ "level_dims": run.level_dims, "basis_dim": basis.len(), "report": run.report }),
    )?;
    let mut csv = String::from("level,dim,coverage\n");
    for (j, l) in run.report.levels.iter().enumerate() {
        csv += &format!("{j},{},{}\n", l.dim, l.coverage);
    }
    out.csv("coverage.csv", &csv)?;
    out.say(format!(
        "saturation: dims {:?} of {}, terminal level {}{}",
        run.level_dims,
        basis.len(),
        run.terminal_level(),
        if run.report.stalled { " (stalled)" } else { "" }
    ));
    Ok(true)
}

fn synthesize_cmd(cfg: &ExperimentConfig, out: &Output) -> Result<bool> {
    let setup = cfg.setup()?;
    let g0 = cfg.generators(&setup.basis)?;
    let run = synthesize(&setup.problem, &g0, &cfg.synthesis)?;
    let schedule: serde_json::Value = serde_json::from_str(&run.schedule.to_json()?)?;
    out.json("schedule.json", json!({ "schedule": schedule }))?;
    out.json("report.json", json!({ "report": run.report }))?;
    out.csv("stages.csv", &stages_csv(&run.report))?;
    let r = &run.report;
    out.say(format!(
        "synthesis {}: final error {:.3e} (ε = {}), ȷ̄ = {}, {} physical actuators",
        if r.pass { "passed" } else { "FAILED" },
        r.final_error,
        r.epsilon,
        r.jbar.unwrap_or(0),
        r.physical_actuators
    ));
    Ok(r.pass)
}

fn stages_csv(r: &PipelineReport) -> String {
    let mut csv = String::from("stage,level,step,m,mu,beta,k,error,budget,pass\n");
    let opt = |v: Option<String>| v.unwrap_or_default();
    for s in &r.stages {
        let (name, level, step) = stage_parts(&s.stage);
        csv += &format!(
            "{name},{},{},{},{},{},{},{},{},{}\n",
            opt(level.map(|v| v.to_string())),
            opt(step.map(|v| v.to_string())),
            opt(s.m.map(|v| v.to_string())),
            opt(s.mu.map(|v| v.to_string())),
            opt(s.beta.map(|v| v.to_string())),
            opt(s.k.map(|v| v.to_string())),
            s.error,
            s.budget,
            s.pass
        );
    }
    csv
}

fn stage_parts(id: &StageId) -> (&'static str, Option<usize>, Option<usize>) {
    match *id {
        StageId::FreeFlow => ("free_flow", None, None),
        StageId::StageA => ("stage_a", None, None),
        StageId::Imitation { level, step } => ("imitation", Some(level), Some(step)),
        StageId::Level { level } => ("level", Some(level), None),
        StageId::Final => ("final", None, None),
    }
}

fn load_schedule(
    out: &Output,
    basis: &std::sync::Arc<euler_ac::SpectralBasis>,
    path: &Path,
) -> Result<ControlSchedule> {
    let doc = out.read_json(path, "schedule")?;
    ControlSchedule::from_json_on(basis, &doc.to_string())
        .with_context(|| format!("schedule in {} does not match the configured basis", path.display()))
}

fn simulate(cfg: &ExperimentConfig, out: &Output, schedule: Option<&Path>) -> Result<bool> {
    let setup = cfg.setup()?;
    let control = schedule.map(|p| load_schedule(out, &setup.basis, p)).transpose()?;
    let opts = SimOptions {
        dt: cfg.simulation.dt,
        blowup_bound: cfg.simulation.blowup_bound,
        snapshot_stride: Some(cfg.simulation.snapshot_stride),
        target: Some(setup.problem.target.clone()),
        ..Default::default()
    };
    let p = &setup.problem;
    let traj = integrate(&p.y0, p.horizon, &p.forcing, control.as_ref(), &opts)?;
    out.csv("trajectory.csv", &traj.to_csv())?;
    let snaps: serde_json::Value = serde_json::from_str(&traj.snapshots_json()?)?;
    out.json(
        "snapshots.json",
        json!({ "dt": traj.dt, "steps": traj.steps, "trajectory": snaps }),
    )?;
    let distance = traj
        .distance
        .as_ref()
        .and_then(|d| d.last())
        .copied()
        .unwrap_or(f64::NAN);
    out.say(format!(
        "simulated {} steps of {:.3e}: energy {:.6e} -> {:.6e}, distance to target {:.3e}",
        traj.steps,
        traj.dt,
        traj.energy[0],
        traj.energy.last().unwrap(),
        distance
    ));
    Ok(true)
}

fn verify(cfg: &ExperimentConfig, out: &Output) -> Result<bool> {
    let results: Vec<_> = harness::run_suite(&cfg.verify, Mutation::None)?
        .into_iter()
        .map(|r| r.meta("config_hash", out.hash.clone()))
        .collect();
    out.text("checks.jsonl", &harness::to_json_lines(&results)?)?;
    out.csv("checks.csv", &harness::summary_csv(&results))?;
    let mut ok = true;
    for r in &results {
        ok &= r.pass;
        out.say(format!(
            "{} {}: {:.3e} (bound {:.1e})",
            if r.pass { "PASS" } else { "FAIL" },
            r.id,
            r.measured,
            r.bound
        ));
    }
    Ok(ok)
}

fn replay(cfg: &ExperimentConfig, out: &Output, schedule: Option<&Path>, report: Option<&Path>) -> Result<bool> {
    let setup = cfg.setup()?;
    let schedule_path = schedule
        .map(Path::to_path_buf)
        .unwrap_or_else(|| out.path("schedule.json"));
    let report_path = report.map(Path::to_path_buf).unwrap_or_else(|| out.path("report.json"));
    let control = load_schedule(out, &setup.basis, &schedule_path)?;
    let logged: PipelineReport = serde_json::from_value(out.read_json(&report_path, "report")?)?;
    let p = &setup.problem;
    if (control.horizon - p.horizon).abs() > 0.0 {
        bail!(
            "schedule horizon {} differs from the configured {}",
            control.horizon,
            p.horizon
        );
    }
    let y_t = endpoint(&p.y0, p.horizon, &p.forcing, Some(&control), logged.sim_dt)?;
    let error = y_t.sub(&p.target)?.norm_h();
    let difference = (error - logged.final_error).abs();
    let pass = difference <= REPLAY_TOL;
    out.json(
        "replay.json",
        json!({
            "logged_error": logged.final_error,
            "replayed_error": error,
            "difference": difference,
            "tolerance": REPLAY_TOL,
            "sim_dt": logged.sim_dt,
            "pass": pass,
        }),
    )?;
    out.say(format!(
        "replay {}: error {error:.12e}, logged {:.12e}, difference {difference:.1e}",
        if pass { "matches" } else { "MISMATCH" },
        logged.final_error
    ));
    Ok(pass)
}

fn report(cfg: &ExperimentConfig, out: &Output) -> Result<bool> {
    let setup = cfg.setup()?;
    let logged: PipelineReport = serde_json::from_value(out.read_json(&out.path("report.json"), "report")?)?;
    let control = load_schedule(out, &setup.basis, &out.path("schedule.json"))?;

    let p = &setup.problem;
    let opts = SimOptions {
        dt: logged.sim_dt,
        snapshot_stride: Some(cfg.simulation.snapshot_stride),
        target: Some(p.target.clone()),
        ..Default::default()
    };
    let traj = integrate(&p.y0, p.horizon, &p.forcing, Some(&control), &opts)?;
    let mut csv = String::from("t,distance,energy\n");
    for (i, t) in traj.times.iter().enumerate() {
        let d = traj.distance.as_ref().map_or(f64::NAN, |d| d[i]);
        csv += &format!("{t},{d},{}\n", traj.energy[i]);
    }
    out.csv("distance.csv", &csv)?;

    let mut csv = String::from("stage,level,step,beta,k,error\n");
    for s in &logged.stages {
        let (name, level, step) = stage_parts(&s.stage);
        for a in s.attempts.iter().filter(|a| a.k.is_some()) {
            csv += &format!(
                "{name},{},{},{},{},{}\n",
                level.unwrap_or(0),
                step.unwrap_or(0),
                a.beta.unwrap_or(f64::NAN),
                a.k.unwrap_or(0),
                a.error
            );
        }
    }
    out.csv("error_vs_k.csv", &csv)?;

    let basis = &setup.basis;
    let run = run_saturation(&cfg.generators(basis)?, cfg.synthesis.max_saturation_depth)?;
    let mut csv = String::from("level,dim,coverage\n");
    for (j, l) in run.report.levels.iter().enumerate() {
        csv += &format!("{j},{},{}\n", l.dim, l.coverage);
    }
    out.csv("coverage.csv", &csv)?;
    out.csv("stages.csv", &stages_csv(&logged))?;

    let final_distance = traj
        .distance
        .as_ref()
        .and_then(|d| d.last())
        .copied()
        .unwrap_or(f64::NAN);
    out.json(
        "summary.json",
        json!({
            "pass": logged.pass,
            "epsilon": logged.epsilon,
            "final_error": logged.final_error,
            "recomputed_distance": final_distance,
            "jbar": logged.jbar,
            "m": logged.m,
            "added_per_level": logged.added_per_level,
            "physical_actuators": logged.physical_actuators,
            "stages": logged.stages.len(),
            "level_dims": run.level_dims,
        }),
    )?;
    out.say(format!(
        "report written to {}: final distance {final_distance:.3e}",
        out.dir.display()
    ));
    Ok(logged.pass)
}
