//! `iscap`: solve single instances, run Monte-Carlo sweeps and trace
//! tradeoff fronts from JSON configs.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use serde::Serialize;

use iscap_core::channel::build_scenario_channels;
use iscap_core::experiment::{
    emit_plot_data, load_config, load_instance, load_pareto_config, run_sweep, write_results, write_trial_dump,
    InstanceConfig, ParetoConfig,
};
use iscap_core::metrics::TargetModel;
use iscap_core::optimizer::{ao_solve, receiver_sinrs, SolveReport, SolveStatus};
use iscap_core::pareto::{budget_w, trace_front, write_front, ParetoInstance};
use iscap_core::protocol::ProtocolVariant;
use iscap_core::watts_to_dbm;

#[derive(Debug, Parser)]
#[command(name = "iscap", version, about = "Beamforming for self-powered sensor-aided RIS")]
struct Cli {
    /// Only print errors.
    #[arg(short, long, global = true, conflicts_with = "verbose")]
    quiet: bool,
    /// More log output on stderr (repeat for more).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Minimise the transmit power for one channel realisation.
    Solve(RunArgs),
    /// Monte-Carlo sweep over rho, N_r or N_t.
    Sweep(RunArgs),
    /// Trace a rate/sensing/harvesting tradeoff front under a power budget.
    Pareto(RunArgs),
    /// Parse and validate a config without running anything.
    ValidateConfig {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum, default_value_t = Kind::Sweep)]
        kind: Kind,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Kind {
    Solve,
    Sweep,
    Pareto,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// JSON config; `solve` and `pareto` fall back to defaults without one.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Overrides the scenario and solver seeds.
    #[arg(long)]
    seed: Option<u64>,
    /// Protocol(s) to run: ES, TS or PS. Repeatable for `sweep`.
    #[arg(long)]
    protocol: Vec<ProtocolVariant>,
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    jobs: Option<usize>,
    /// Also write per-trial records as JSON lines (`sweep` only).
    #[arg(long)]
    trial_dump: bool,
}

/// Exit code 1 vs 2.
enum Failure {
    Config(String),
    Run(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Run(_) => 1,
            Failure::Config(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Run(m) => m,
        }
    }
}

fn config_err(e: impl std::fmt::Display) -> Failure {
    Failure::Config(e.to_string())
}

fn run_err(e: impl std::fmt::Display) -> Failure {
    Failure::Run(e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet {
        log::LevelFilter::Error
    } else {
        match cli.verbose {
            0 => log::LevelFilter::Warn,
            1 => log::LevelFilter::Info,
            2 => log::LevelFilter::Debug,
            _ => log::LevelFilter::Trace,
        }
    };
    env_logger::Builder::new().filter_level(level).parse_default_env().init();
    match run_command(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

fn run_command(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Solve(args) => with_pool(args.jobs, || solve(args, cli.quiet)),
        Command::Sweep(args) => with_pool(args.jobs, || sweep(args, cli.quiet)),
        Command::Pareto(args) => with_pool(args.jobs, || pareto(args, cli.quiet)),
        Command::ValidateConfig { config, kind } => {
            match kind {
                Kind::Solve => load_instance(config).map(drop),
                Kind::Sweep => load_config(config).map(drop),
                Kind::Pareto => load_pareto_config(config).map(drop),
            }
            .map_err(config_err)?;
            if !cli.quiet {
                println!("{}: ok", config.display());
            }
            Ok(())
        }
    }
}

fn with_pool(jobs: Option<usize>, f: impl FnOnce() -> Result<(), Failure> + Send) -> Result<(), Failure> {
    match jobs {
        Some(0) => Err(Failure::Config("--jobs must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(run_err)?
            .install(f),
        None => f(),
    }
}

fn create_dir(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| Failure::Config(format!("cannot create {}: {e}", dir.display())))
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).map_err(run_err)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| run_err(format!("{}: {e}", path.display())))
}

fn single_protocol(args: &RunArgs) -> Result<Option<ProtocolVariant>, Failure> {
    match args.protocol.as_slice() {
        [] => Ok(None),
        [p] => Ok(Some(*p)),
        _ => Err(Failure::Config("this command takes a single --protocol".into())),
    }
}

#[derive(Serialize)]
struct SolveOutput<'a> {
    protocol: ProtocolVariant,
    rho: f64,
    n_tx: usize,
    n_ris: usize,
    seed: u64,
    power_dbm: f64,
    sinr: Vec<f64>,
    report: &'a SolveReport,
}

fn solve(args: &RunArgs, quiet: bool) -> Result<(), Failure> {
    let mut cfg = match &args.config {
        Some(p) => load_instance(p).map_err(config_err)?,
        None => InstanceConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.set_seed(seed);
    }
    if let Some(p) = single_protocol(args)? {
        cfg.protocol = p;
    }
    cfg.validate().map_err(config_err)?;
    create_dir(&args.out)?;
    let scenario = cfg.scenario();
    let protocol = cfg.protocol_config().map_err(config_err)?;
    let ch = build_scenario_channels(&scenario).map_err(run_err)?;
    let target = TargetModel::from_scenario(&scenario).map_err(run_err)?;
    let report = ao_solve(&ch, &protocol, &cfg.qos, &target, &cfg.solver).map_err(run_err)?;
    let out = SolveOutput {
        protocol: protocol.variant,
        rho: protocol.rho,
        n_tx: scenario.n_tx,
        n_ris: scenario.n_ris,
        seed: scenario.seed,
        power_dbm: watts_to_dbm(report.solution.objective_w),
        sinr: receiver_sinrs(&report.solution, &ch, &protocol).map_err(run_err)?,
        report: &report,
    };
    let path = args.out.join("solve.json");
    write_json(&out, &path)?;
    if !quiet {
        let s = &report.constraint_slacks;
        println!(
            "{} rho={} N_t={} N_r={} seed={}",
            protocol.variant, protocol.rho, scenario.n_tx, scenario.n_ris, scenario.seed
        );
        println!("status          {:?}", report.status);
        println!("transmit power  {:.3} dBm", out.power_dbm);
        println!("AO iterations   {} ({} SOCPs)", report.ao_iterations, report.socp_solves);
        println!("min slack       comm {:.3e}  sense {:.3e}  wpt {:.3e}  ris {:.3e}",
            s.comm.iter().copied().fold(f64::INFINITY, f64::min), s.sense, s.wpt, s.ris_power);
        println!("report          {}", path.display());
    }
    match report.status {
        SolveStatus::Converged => Ok(()),
        other => Err(Failure::Run(format!("solve ended with status {other:?}"))),
    }
}

fn sweep(args: &RunArgs, quiet: bool) -> Result<(), Failure> {
    let path = args
        .config
        .as_ref()
        .ok_or_else(|| Failure::Config("sweep needs --config".into()))?;
    let mut cfg = load_config(path).map_err(config_err)?;
    if let Some(seed) = args.seed {
        cfg.set_seed(seed);
    }
    if !args.protocol.is_empty() {
        cfg.protocol_variants = args.protocol.clone();
    }
    cfg.validate().map_err(config_err)?;
    create_dir(&args.out)?;
    info!("running sweep from {}", path.display());
    let res = run_sweep(&cfg).map_err(run_err)?;
    let csv = args.out.join("sweep.csv");
    write_results(&res, &csv).map_err(run_err)?;
    let series = emit_plot_data(&res, &args.out).map_err(run_err)?;
    if args.trial_dump {
        write_trial_dump(&res, &args.out.join("trials.jsonl")).map_err(run_err)?;
    }
    let failed = res.trials.iter().filter(|t| !t.converged()).count();
    if failed > 0 {
        warn!("{failed} of {} trials did not converge", res.trials.len());
    }
    if !quiet {
        println!("{:<4} {:>10} {:>12} {:>8} {:>10}", "", cfg.sweep_axis.name(), "power [dBm]", "std", "infeasible");
        for r in &res.rows {
            println!(
                "{:<4} {:>10} {:>12.3} {:>8.3} {:>10.2}",
                r.protocol, r.axis_value, r.mean_power_dbm, r.std_power_db, r.infeasible_rate
            );
        }
        println!("wrote {} and {} series files", csv.display(), series.len());
    }
    Ok(())
}

fn pareto(args: &RunArgs, quiet: bool) -> Result<(), Failure> {
    let mut cfg = match &args.config {
        Some(p) => load_pareto_config(p).map_err(config_err)?,
        None => ParetoConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.set_seed(seed);
    }
    if let Some(p) = single_protocol(args)? {
        cfg.protocol = p;
    }
    cfg.validate().map_err(config_err)?;
    create_dir(&args.out)?;
    let instance = cfg.instance();
    let scenario = instance.scenario();
    let protocol = instance.protocol_config().map_err(config_err)?;
    let ch = build_scenario_channels(&scenario).map_err(run_err)?;
    let target = TargetModel::from_scenario(&scenario).map_err(run_err)?;
    let inst = ParetoInstance {
        ch: &ch,
        protocol: &protocol,
        target: &target,
        budget_w: budget_w(cfg.budget_dbm),
        opts: &cfg.solver,
    };
    let front = trace_front(cfg.method, &cfg.grid, &inst).map_err(run_err)?;
    let path = args.out.join("front.csv");
    write_front(&front, &cfg.method, &path).map_err(run_err)?;
    if !quiet {
        println!("{} front, budget {} dBm, {} of {} nodes feasible", cfg.method.name(), cfg.budget_dbm, front.len(), cfg.grid.len());
        println!("{:>5} {:>12} {:>12} {:>10} {:>9}", "node", "comm", "sense", "wpt [mW]", "dominated");
        for p in &front {
            println!("{:>5} {:>12.4} {:>12.4} {:>10.4} {:>9}", p.grid_id, p.comm, p.sense, p.wpt * 1e3, p.dominated);
        }
        println!("wrote {}", path.display());
    }
    if front.is_empty() {
        return Err(Failure::Run("no grid node was feasible at this budget".into()));
    }
    Ok(())
}
