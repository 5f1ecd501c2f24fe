mod config;
mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::anyhow;
use clap::{Args, Parser, Subcommand};
use graphstab::example::{build_example, make_reference, track};
use graphstab::hypotheses::{check_all, lemma_probe, ChartSampler, CheckOptions, Direction, ProbeOptions};
use graphstab::metrics::{stability_sweep, SweepParams};
use graphstab::{simulate, Arc64, HypothesisReport64, State64};

use config::{Overrides, RunConfig};
use report::ReportDir;

#[derive(Parser)]
#[command(name = "graphstab", version, about = "Hybrid system simulation and graphical stability analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON run configuration; defaults apply to missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Dense-output step for closeness metrics.
    #[arg(long)]
    grid: Option<f64>,
    #[arg(long)]
    horizon: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the configured system from `x0`.
    Simulate(Common),
    /// Generate the uncontrolled reference solution of the impact example.
    Reference(Common),
    /// Track the reference from an offset initial state and measure closeness.
    Track(Common),
    /// Check the structural hypotheses on the configured system.
    Check {
        #[command(flatten)]
        common: Common,
        /// Exit with status 4 unless every condition passes.
        #[arg(long)]
        strict: bool,
    },
    /// Tabulate jump-time mismatch against distance to the jump set and its image.
    Probe(Common),
    /// Sweep random initial offsets and report closeness per radius.
    Sweep(Common),
    /// Reference, tracking, hypotheses, probes and sweep in one bundle.
    Example(Common),
}

/// Failure classes mapped to exit codes.
enum Failure {
    Config(anyhow::Error),
    Simulation(anyhow::Error),
    Strict(String),
    Other(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Self::Other(_) => 1,
            Self::Config(_) => 2,
            Self::Simulation(_) => 3,
            Self::Strict(_) => 4,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Config(e) => write!(f, "invalid configuration: {e:#}"),
            Self::Simulation(e) => write!(f, "simulation failed: {e:#}"),
            Self::Strict(m) => write!(f, "hypothesis check failed: {m}"),
            Self::Other(e) => write!(f, "{e:#}"),
        }
    }
}

type Outcome<T> = Result<T, Failure>;

fn sim<T, E: std::error::Error + Send + Sync + 'static>(r: Result<T, E>) -> Outcome<T> {
    r.map_err(|e| Failure::Simulation(e.into()))
}

fn io<T>(r: anyhow::Result<T>) -> Outcome<T> {
    r.map_err(Failure::Other)
}

fn load(common: &Common) -> Outcome<RunConfig> {
    let overrides = Overrides {
        seed: common.seed,
        grid: common.grid,
        horizon: common.horizon,
    };
    RunConfig::load(common.config.as_deref(), &overrides).map_err(Failure::Config)
}

fn needs_example(config: &RunConfig) -> Outcome<()> {
    config.system.example().map(|_| ()).map_err(Failure::Config)
}

fn write_arc(dir: &mut ReportDir, stem: &str, arc: &Arc64) -> Outcome<()> {
    io(dir.write(&format!("{stem}.csv"), &arc.to_csv()))?;
    io(dir.write(&format!("{stem}.json"), &arc.to_json()))
}

fn reference_arc(config: &RunConfig) -> Outcome<Arc64> {
    let params = config.system.example().map_err(Failure::Config)?;
    sim(make_reference(params, &State64::new(params.reference_x0.clone()), &config.integrator))
}

fn cmd_simulate(config: &RunConfig, dir: &mut ReportDir) -> Outcome<()> {
    let x0 = config.x0.clone().unwrap_or_else(|| config.system.default_x0());
    let integrator = config.integrator.with_horizon(config.horizon());
    let arc = sim(simulate(&config.system.plant(), &State64::new(x0), &integrator))?;
    println!(
        "simulated to t = {} with {} jumps ({:?})",
        arc.final_time(),
        arc.jump_count(),
        arc.flags.terminated_reason
    );
    write_arc(dir, "arc", &arc)
}

fn cmd_reference(config: &RunConfig, dir: &mut ReportDir) -> Outcome<Arc64> {
    let arc = reference_arc(config)?;
    println!(
        "reference: t = {}, {} jumps, max norm {:.6}",
        arc.final_time(),
        arc.jump_count(),
        arc.max_norm().0
    );
    write_arc(dir, "reference", &arc)?;
    io(dir.write("rho_trace.csv", "t,rho,euclid,branch\n"))?;
    Ok(arc)
}

fn cmd_track(config: &RunConfig, dir: &mut ReportDir, reference: &Arc64) -> Outcome<()> {
    let params = config.system.example().map_err(Failure::Config)?;
    let grid = graphstab::example::quarter_grid(params.horizon);
    let run = sim(track(params, reference, &config.offset, &config.integrator, &grid))?;
    println!(
        "tracking: graphical eps {:.6e}, rho eps {:.6e}, rho terminal {:.3e}",
        run.graphical.epsilon,
        run.rho.epsilon,
        run.trace.terminal()
    );
    write_arc(dir, "tracked", &run.arc)?;
    io(dir.write("rho_trace.csv", &run.trace.to_csv()))?;
    io(dir.write_json("closeness_graphical.json", &run.graphical))?;
    io(dir.write_json("closeness_rho.json", &run.rho))
}

fn hypothesis_report(config: &RunConfig) -> Outcome<HypothesisReport64> {
    let sampler = ChartSampler::default();
    match config.system.example() {
        Ok(params) => {
            // Time-varying closed loop: evaluate around the reference's jumps.
            let reference = reference_arc(config)?;
            let mut times = vec![0.0];
            for t in reference.jump_times() {
                times.extend([t - 0.1, t, t + 0.1]);
            }
            let options = CheckOptions {
                times,
                ..config.check.clone()
            };
            let closed = build_example(params, Some(Arc::new(reference.clone())));
            Ok(check_all(&closed, &sampler, Some(&reference), &options))
        }
        Err(_) => Ok(check_all(&config.system.plant(), &sampler, None, &config.check)),
    }
}

fn cmd_check(config: &RunConfig, dir: &mut ReportDir, strict: bool) -> Outcome<()> {
    let report = hypothesis_report(config)?;
    print!("{}", report.to_table());
    io(dir.write("hypotheses.json", &report.to_json()))?;
    if strict && !report.all_pass() {
        return Err(Failure::Strict("not every condition passed".into()));
    }
    Ok(())
}

fn cmd_probe(config: &RunConfig, dir: &mut ReportDir) -> Outcome<()> {
    let options = ProbeOptions {
        samples_per_eps: config.probe.samples_per_eps,
        seed: config.seed,
        config: config.integrator.with_horizon(config.probe.max_time),
        ..Default::default()
    };
    let system = config.system.plant();
    for (direction, name) in [(Direction::Forward, "forward"), (Direction::Backward, "backward")] {
        let table = sim(lemma_probe(&system, direction, &config.probe.eps, &ChartSampler::default(), &options))?;
        println!("{name} probe (eps_in -> max mismatch time):");
        for row in &table.rows {
            let t = row.max_mismatch_time.map_or("inf".to_string(), |t| format!("{t:.6e}"));
            println!("  {:<10} {t}  ({} samples, {} excluded)", row.eps_in, row.samples, row.excluded);
        }
        io(dir.write(&format!("probe_{name}.json"), &table.to_json()))?;
    }
    Ok(())
}

fn cmd_sweep(config: &RunConfig, dir: &mut ReportDir, reference: &Arc64) -> Outcome<()> {
    let params = config.system.example().map_err(Failure::Config)?;
    let t_grid = config
        .sweep
        .t_grid
        .clone()
        .unwrap_or_else(|| graphstab::example::quarter_grid(params.horizon));
    let sweep = SweepParams {
        grid_step: config.grid_step,
        ..SweepParams::new(
            config.sweep.radii.clone(),
            config.sweep.samples_per_radius,
            t_grid,
            config.integrator.with_horizon(params.horizon),
        )
        .with_seed(config.seed)
    };
    let closed = build_example(params, Some(Arc::new(reference.clone())));
    let report = sim(stability_sweep(&closed, reference, &sweep))?;
    for r in &report.radii {
        println!(
            "delta {:<8} graphical {:<12} rho {:<12} failures {}",
            r.radius,
            r.graphical_eps.map_or("-".into(), |v| format!("{v:.4e}")),
            r.rho_eps.map_or("-".into(), |v| format!("{v:.4e}")),
            r.failures
        );
    }
    println!(
        "monotone in delta: {}, decaying tail: {}, rho below graphical: {}",
        report.verdicts.monotone_in_delta, report.verdicts.decaying_tail, report.verdicts.rho_below_graphical
    );
    io(dir.write("stability.csv", &report.to_csv()))?;
    io(dir.write_json("stability.json", &report))
}

fn run(command: Command) -> Outcome<PathBuf> {
    let (name, common, strict) = match &command {
        Command::Simulate(c) => ("simulate", c, false),
        Command::Reference(c) => ("reference", c, false),
        Command::Track(c) => ("track", c, false),
        Command::Check { common, strict } => ("check", common, *strict),
        Command::Probe(c) => ("probe", c, false),
        Command::Sweep(c) => ("sweep", c, false),
        Command::Example(c) => ("example", c, false),
    };
    let config = load(common)?;
    if matches!(name, "reference" | "track" | "sweep" | "example") {
        needs_example(&config)?;
    }
    let mut dir = io(ReportDir::create(&common.out))?;
    match name {
        "simulate" => cmd_simulate(&config, &mut dir)?,
        "reference" => {
            cmd_reference(&config, &mut dir)?;
        }
        "track" => {
            let reference = reference_arc(&config)?;
            write_arc(&mut dir, "reference", &reference)?;
            cmd_track(&config, &mut dir, &reference)?;
        }
        "check" => cmd_check(&config, &mut dir, strict)?,
        "probe" => cmd_probe(&config, &mut dir)?,
        "sweep" => {
            let reference = reference_arc(&config)?;
            cmd_sweep(&config, &mut dir, &reference)?;
        }
        "example" => {
            let reference = reference_arc(&config)?;
            write_arc(&mut dir, "reference", &reference)?;
            cmd_track(&config, &mut dir, &reference)?;
            cmd_check(&config, &mut dir, false)?;
            cmd_probe(&config, &mut dir)?;
            cmd_sweep(&config, &mut dir, &reference)?;
        }
        _ => return Err(Failure::Other(anyhow!("unknown command {name}"))),
    }
    io(dir.finish(name, &config))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(out) => {
            println!("wrote {}", Path::new(&out).display());
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code())
        }
    }
}
