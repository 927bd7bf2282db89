//! `bess`: battery sizing by lifetime simulation.

mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bess_core::data::Resolution;
use bess_core::degradation::initial_degradation_cost;
use bess_core::dispatch::{build_window_problem, greedy_self_consumption_dispatch, solve_window, DispatchError};
use bess_core::economics::{battery_capital_cost, evaluate, EconomicReport};
use bess_core::experiments::{
    compare_hems, resolution_sensitivity, size_sweep, termination_name, BatteryModel, LifetimeSummary, RunOutcome,
};
use bess_core::lifetime::{Checkpoint, LifetimeError, LifetimeSimulator, Policy};
use clap::{Parser, Subcommand};
use serde::Serialize;

use config::RunConfig;
use output::{Series, WindowLog};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Output(String),
    #[error("{0}")]
    Solver(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) | Self::Output(_) => 2,
            Self::Solver(_) => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "bess", version, about = "Size a home battery by simulating its whole life")]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Simulation step in minutes.
    #[arg(long, global = true, value_parser = ["5", "15", "30", "60"])]
    resolution: Option<String>,
    /// Dispatch policy used over the battery life.
    #[arg(long, global = true)]
    policy: Option<Policy>,
    /// Worker threads for independent simulations.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Seed of the synthetic data generator.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Battery by nominal capacity in kWh; must be in the catalog.
    #[arg(long, global = true)]
    model: Option<f64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Validate and print the resolved configuration without solving.
    #[arg(long, global = true)]
    dry_run: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Dispatch one window with a fresh battery and write its flows.
    Dispatch {
        /// Window index, from 0; data wraps around.
        #[arg(long, default_value_t = 0)]
        window: usize,
        /// Also write the window model in LP format.
        #[arg(long)]
        dump_lp: bool,
    },
    /// Simulate one battery until end of life.
    Simulate {
        /// Continue from a checkpoint file.
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Stop after this many windows in total, leaving a checkpoint.
        #[arg(long)]
        max_windows: Option<usize>,
        /// Windows between checkpoint writes.
        #[arg(long, default_value_t = 10)]
        checkpoint_every: usize,
    },
    /// Simulate every catalog entry and rank by NPV.
    Size {
        /// Skip the SVG plots.
        #[arg(long)]
        no_plots: bool,
    },
    /// Re-run one battery at each configured resolution.
    Sensitivity,
    /// Optimal dispatch against the greedy policy.
    Compare,
    /// Check the configuration and the input data.
    Validate,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn resolve(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(r) = &cli.resolution {
        cfg.resolution = Some(r.parse().expect("restricted by clap"));
    }
    if let Some(p) = cli.policy {
        cfg.lifetime.policy = p;
    }
    if let Some(s) = cli.seed {
        if !cfg.paths.data.starts_with(config::SYNTHETIC) {
            log::warn!("--seed only affects synthetic data");
        }
        cfg.seed = Some(s);
    }
    if let Some(m) = cli.model {
        cfg.model_kwh = m;
    }
    if let Some(out) = &cli.out {
        cfg.paths.output = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = resolve(&cli)?;
    if cli.dry_run {
        let text = toml::to_string(&cfg).map_err(|e| CliError::Config(e.to_string()))?;
        print!("{text}");
        return Ok(());
    }
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global()
            .map_err(|e| CliError::Config(format!("--jobs: {e}")))?;
    }
    match cli.command {
        Command::Validate => cmd_validate(&cfg),
        Command::Dispatch { window, dump_lp } => cmd_dispatch(&cfg, window, dump_lp),
        Command::Simulate {
            resume,
            max_windows,
            checkpoint_every,
        } => cmd_simulate(&cfg, resume.as_deref(), max_windows, checkpoint_every),
        Command::Size { no_plots } => cmd_size(&cfg, !no_plots),
        Command::Sensitivity => cmd_sensitivity(&cfg),
        Command::Compare => cmd_compare(&cfg),
    }
}

fn output_dir(cfg: &RunConfig) -> Result<&Path, CliError> {
    let dir = cfg.paths.output.as_path();
    std::fs::create_dir_all(dir).map_err(output::io_err(dir))?;
    Ok(dir)
}

fn cmd_validate(cfg: &RunConfig) -> Result<(), CliError> {
    let frame = cfg.load_frame()?;
    let model = cfg.model()?;
    let days = frame.len() as f64 / frame.resolution().steps_per_day() as f64;
    println!(
        "ok: {} steps of {} min ({days:.1} days), {} catalog entries, simulate model {} kWh / {} kW",
        frame.len(),
        frame.resolution().step_minutes(),
        cfg.catalog.models.len(),
        model.e_nominal,
        model.power
    );
    Ok(())
}

fn cmd_dispatch(cfg: &RunConfig, index: usize, dump_lp: bool) -> Result<(), CliError> {
    let frame = cfg.load_frame()?;
    let model = cfg.model()?;
    let study = cfg.study();
    let battery = study.template.spec(&model);
    let steps = cfg.lifetime.window_days as usize * frame.resolution().steps_per_day();
    if frame.len() < steps {
        return Err(CliError::Config(format!(
            "input covers {} steps, one window needs {steps}",
            frame.len()
        )));
    }
    let offset = ((index as u128 * steps as u128) % frame.len() as u128) as usize;
    let window = frame.window(offset, steps);
    let capital = battery_capital_cost(&battery, model.power, &cfg.costs);
    let c_bd = initial_degradation_cost(&battery, capital).map_err(|e| CliError::Config(e.to_string()))?;
    let soc = cfg.lifetime.initial_soc_frac * battery.e_nominal;
    let solver_err = |e: DispatchError| match e {
        DispatchError::InvalidSpec(_) | DispatchError::SocInitOutOfBounds { .. } | DispatchError::EmptyWindow => {
            CliError::Config(format!("window {index}: {e}"))
        }
        _ => CliError::Solver(format!("window {index}: {e}")),
    };
    let problem = build_window_problem(&window, &cfg.plant, &battery, battery.e_nominal, c_bd, soc).map_err(solver_err)?;
    let dir = output_dir(cfg)?;
    if dump_lp {
        let path = dir.join(format!("window_{index}.lp"));
        output::write_text(&path, &problem.to_milp().to_lp_string())?;
    }
    let solution = match cfg.lifetime.policy {
        Policy::Optimal => solve_window(&problem, &cfg.solver),
        Policy::Greedy => greedy_self_consumption_dispatch(&problem),
    }
    .map_err(solver_err)?;
    let path = dir.join(format!("dispatch_window_{index}.csv"));
    output::write_text(&path, &output::dispatch_csv(&window, &solution))?;
    log::info!(
        "window {index}: objective {:.4} EUR, gap {:.2e}, {:.3} s -> {}",
        solution.objective,
        solution.gap(),
        solution.solve_seconds,
        path.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct SimulationSummary {
    model: BatteryModel,
    resolution_minutes: u32,
    policy: Policy,
    lifetime: LifetimeSummary,
    economics: EconomicReport,
}

fn lifetime_error(e: LifetimeError) -> CliError {
    match e {
        LifetimeError::InvalidConfig(_) | LifetimeError::Checkpoint(_) => CliError::Config(e.to_string()),
        LifetimeError::Dispatch { .. } | LifetimeError::Verification { .. } => CliError::Solver(e.to_string()),
    }
}

fn write_checkpoint(path: &Path, checkpoint: &Checkpoint) -> Result<(), CliError> {
    let tmp = path.with_extension("json.tmp");
    output::write_json(&tmp, checkpoint)?;
    std::fs::rename(&tmp, path).map_err(output::io_err(path))
}

fn cmd_simulate(
    cfg: &RunConfig,
    resume: Option<&Path>,
    max_windows: Option<usize>,
    checkpoint_every: usize,
) -> Result<(), CliError> {
    let frame = cfg.load_frame()?;
    let model = cfg.model()?;
    let study = cfg.study();
    let battery = study.template.spec(&model);
    let capital = battery_capital_cost(&battery, model.power, &cfg.costs);
    let c_bd = initial_degradation_cost(&battery, capital).map_err(|e| CliError::Config(e.to_string()))?;
    let mut sim = LifetimeSimulator::new(
        &frame,
        cfg.plant,
        battery,
        cfg.degradation,
        cfg.lifetime,
        cfg.solver,
        capital,
        c_bd,
    )
    .map_err(lifetime_error)?;
    if let Some(path) = resume {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read checkpoint {}: {e}", path.display())))?;
        let checkpoint: Checkpoint = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("checkpoint {}: {e}", path.display())))?;
        sim.resume(checkpoint)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        log::info!("resuming at window {}", sim.state().next_window);
    }
    let dir = output_dir(cfg)?;
    let ckpt_path = dir.join("checkpoint.json");
    let mut log_file = WindowLog::create(&dir.join("window_log.csv"), &sim.state().windows)?;
    let every = checkpoint_every.max(1);
    loop {
        if max_windows.is_some_and(|m| sim.state().next_window >= m) {
            break;
        }
        let Some(w) = sim.step().map_err(lifetime_error)? else {
            break;
        };
        log::info!(
            "window {}: year {:.3}, capacity {:.4} kWh, loss {:.5}, cost {:.3} EUR",
            w.window,
            w.start_years,
            w.e_b,
            w.loss,
            w.objective
        );
        log_file.push(w)?;
        if sim.state().next_window % every == 0 {
            log_file.flush()?;
            write_checkpoint(&ckpt_path, &sim.checkpoint())?;
        }
    }
    log_file.flush()?;
    write_checkpoint(&ckpt_path, &sim.checkpoint())?;
    if !sim.is_done() {
        log::info!(
            "stopped after {} windows; continue with --resume {}",
            sim.state().next_window,
            ckpt_path.display()
        );
        return Ok(());
    }
    let result = sim.finish();
    let economics = evaluate(&result, &cfg.costs).map_err(|e| CliError::Solver(e.to_string()))?;
    let summary = SimulationSummary {
        model,
        resolution_minutes: frame.resolution().step_minutes(),
        policy: cfg.lifetime.policy,
        lifetime: LifetimeSummary::of(&result),
        economics,
    };
    output::write_json(&dir.join("summary.json"), &summary)?;
    output::write_text(
        &dir.join("dod_histogram.svg"),
        &output::dod_histogram("Cycles by depth of discharge", &summary.lifetime.cycles_by_dod),
    )?;
    log::info!(
        "{}: {:.3} years, NPV {:.2} EUR, payback {}",
        termination_name(result.termination),
        result.t_eol_years,
        summary.economics.npv,
        summary.economics.dpb
    );
    Ok(())
}

fn cmd_size(cfg: &RunConfig, plots: bool) -> Result<(), CliError> {
    let frame = cfg.load_frame()?;
    let report = size_sweep(&frame, &cfg.study(), &cfg.catalog).map_err(|e| CliError::Config(e.to_string()))?;
    let dir = output_dir(cfg)?;
    output::write_json(&dir.join("size_report.json"), &report)?;
    output::write_text(&dir.join("size_report.csv"), &report.csv())?;
    if plots {
        let points = |f: fn(&bess_core::experiments::ModelOutcome) -> f64| -> Vec<(f64, f64)> {
            report
                .entries
                .iter()
                .filter_map(|e| e.outcome.ok().map(|o| (e.model.e_nominal, f(o))))
                .collect()
        };
        output::write_text(
            &dir.join("npv_by_size.svg"),
            &output::line_plot(
                "NPV by battery capacity",
                "capacity, kWh",
                "NPV, EUR",
                &[Series { name: "NPV", points: points(|o| o.economics.npv) }],
            ),
        )?;
        output::write_text(
            &dir.join("lifetime_by_size.svg"),
            &output::line_plot(
                "Lifetime by battery capacity",
                "capacity, kWh",
                "years",
                &[Series { name: "lifetime", points: points(|o| o.lifetime.t_eol_years) }],
            ),
        )?;
    }
    match report.best {
        Some(i) => {
            let e = &report.entries[i];
            log::info!("best: {} kWh / {} kW", e.model.e_nominal, e.model.power);
        }
        None => log::warn!("no catalog entry completed"),
    }
    failures(report.entries.iter().map(|e| (&e.outcome, format!("{} kWh", e.model.e_nominal))))
}

fn failures<'a>(outcomes: impl Iterator<Item = (&'a RunOutcome, String)>) -> Result<(), CliError> {
    let failed: Vec<String> = outcomes
        .filter_map(|(o, name)| match o {
            RunOutcome::Failed { error } => Some(format!("{name}: {error}")),
            RunOutcome::Ok(_) => None,
        })
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Solver(failed.join("; ")))
    }
}

fn cmd_sensitivity(cfg: &RunConfig) -> Result<(), CliError> {
    let base = cfg.load_base_frame()?;
    let model = cfg.model()?;
    let resolutions: Vec<Resolution> = cfg.sensitivity_resolutions()?;
    let report = resolution_sensitivity(&base, &cfg.study(), &model, &resolutions)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let dir = output_dir(cfg)?;
    output::write_json(&dir.join("sensitivity.json"), &report)?;
    output::write_text(&dir.join("sensitivity.csv"), &report.csv())?;
    let points: Vec<(f64, f64)> = report
        .rows
        .iter()
        .filter_map(|r| r.outcome.ok().map(|o| (f64::from(r.resolution_minutes), o.lifetime.t_eol_years)))
        .collect();
    output::write_text(
        &dir.join("lifetime_by_resolution.svg"),
        &output::line_plot(
            "Lifetime by time resolution",
            "step, min",
            "years",
            &[Series { name: "lifetime", points }],
        ),
    )?;
    failures(report.rows.iter().map(|r| (&r.outcome, format!("{} min", r.resolution_minutes))))
}

fn cmd_compare(cfg: &RunConfig) -> Result<(), CliError> {
    let frame = cfg.load_frame()?;
    let model = cfg.model()?;
    let report = compare_hems(&frame, &cfg.study(), &model).map_err(|e| CliError::Config(e.to_string()))?;
    let dir = output_dir(cfg)?;
    output::write_json(&dir.join("compare.json"), &report)?;
    if let (Some(ext), Some(gain)) = (report.lifetime_extension_pct, report.npv_gain) {
        log::info!("optimal dispatch: lifetime {ext:+.2}%, NPV {gain:+.2} EUR against greedy");
    }
    if let Some(d) = &report.dominance {
        if d.violations > 0 {
            log::warn!("optimal cost above greedy in {} of {} windows", d.violations, d.windows_checked);
        }
    }
    failures(
        [(&report.optimal, "optimal".to_string()), (&report.greedy, "greedy".to_string())].into_iter(),
    )
}
