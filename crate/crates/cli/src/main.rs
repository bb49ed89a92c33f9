use std::path::{Path, PathBuf};
use std::process::{Child, Command, ExitCode, Stdio};
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{error, info, warn};

use simbridge::av::Verdict;
use simbridge::bench::{
    emit_report, parse_grid, run_bench_config, run_sweep, BenchOptions, BenchSetup, DEFAULT_WARMUP,
};
use simbridge::config::{load_scenario, validate_file, ConfigErrors};
use simbridge::run::{av_component, bridge_component, cmd_run, sim_component, RunError, RunSummary};
use simbridge::sim::LoadModel;

const LOG_ENV: &str = "SIMBRIDGE_LOG";

/// Lockstep simulator to AV-stack bridge with mock endpoints.
///
/// The log level is read from SIMBRIDGE_LOG (error, warn, info, debug,
/// trace); the default is info.
#[derive(Debug, Parser)]
#[command(name = "simbridge", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Run a closed-loop scenario and write its deviation trace. Exits 0
    /// only when the goal is reached.
    Run(RunArgs),
    /// Benchmark one sensor configuration, or a grid with `bench sweep`.
    Bench(BenchCmd),
    /// Benchmark every configuration of a grid file.
    Sweep(SweepArgs),
    /// Validate configuration files of any kind.
    Validate {
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    #[command(hide = true)]
    SimServer(ComponentArgs),
    #[command(hide = true)]
    Bridge(ComponentArgs),
    #[command(hide = true)]
    AvClient(ComponentArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Scenario file.
    scenario: PathBuf,
    /// Output directory for the trace.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Run simulator, bridge and AV client as separate processes on the
    /// scenario's endpoints.
    #[arg(long)]
    distributed: bool,
}

#[derive(Debug, Args)]
#[command(args_conflicts_with_subcommands = true)]
struct BenchCmd {
    #[command(subcommand)]
    sweep: Option<BenchSub>,
    #[command(flatten)]
    single: BenchArgs,
}

#[derive(Debug, Subcommand)]
enum BenchSub {
    /// Benchmark every configuration of a grid file.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Load {
    Zero,
    Calibrated,
}

impl From<Load> for LoadModel {
    fn from(l: Load) -> Self {
        match l {
            Load::Zero => LoadModel::ZERO,
            Load::Calibrated => LoadModel::CALIBRATED,
        }
    }
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Number of LiDARs.
    #[arg(long, default_value_t = 1)]
    lidars: u32,
    /// Points per second per LiDAR.
    #[arg(long, default_value_t = 100_000)]
    points_per_sec: u64,
    /// Number of cameras.
    #[arg(long, default_value_t = 0)]
    cameras: u32,
    /// Camera resolution as WxH.
    #[arg(long, default_value = "1280x720", value_parser = parse_resolution)]
    resolution: (u32, u32),
    /// Measured seconds after warm-up.
    #[arg(long, default_value_t = 30.0)]
    duration: f64,
    /// Seconds discarded at the start.
    #[arg(long, default_value_t = DEFAULT_WARMUP.as_secs_f64())]
    warmup: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "calibrated")]
    load_model: Load,
    /// Output directory for the CSV and histograms.
    #[arg(long, default_value = "bench_out")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// Grid file.
    #[arg(long)]
    grid: PathBuf,
    #[arg(long, default_value = "sweep_out")]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "calibrated")]
    load_model: Load,
}

#[derive(Debug, Args)]
struct ComponentArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn parse_resolution(s: &str) -> Result<(u32, u32), String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected WxH, got '{s}'"))?;
    let dim = |v: &str| match v.trim().parse::<u32>() {
        Ok(n) if n > 0 => Ok(n),
        _ => Err(format!("'{v}' is not a positive pixel count")),
    };
    Ok((dim(w)?, dim(h)?))
}

fn print_summary(s: &RunSummary) {
    println!("verdict: {}", s.verdict.as_str());
    println!("steps: {}", s.steps);
    println!("wall_time_s: {:.3}", s.wall_time.as_secs_f64());
    for p in &s.outputs {
        println!("output: {}", p.display());
    }
}

fn report_run_error(e: &RunError) {
    error!("{e}");
}

fn exit_for(summary: &RunSummary) -> ExitCode {
    if summary.success() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn spawn_component(exe: &Path, sub: &str, scenario: &Path, out: &Path) -> std::io::Result<Child> {
    Command::new(exe)
        .arg(sub)
        .arg("--scenario")
        .arg(scenario)
        .arg("--out")
        .arg(out)
        .stdin(Stdio::null())
        .stdout(if sub == "av-client" { Stdio::piped() } else { Stdio::null() })
        .spawn()
}

fn kill_all(children: &mut [(&str, Child)]) {
    for (_, c) in children.iter_mut() {
        let _ = c.kill();
        let _ = c.wait();
    }
}

/// Supervises the three component processes; any failure tears down the
/// rest.
fn run_distributed(args: &RunArgs) -> Result<RunSummary, String> {
    load_scenario(&args.scenario).map_err(|e| format!("invalid configuration:\n{e}"))?;
    let exe = std::env::current_exe().map_err(|e| e.to_string())?;
    let started = Instant::now();
    let mut children: Vec<(&str, Child)> = Vec::new();
    for sub in ["sim-server", "bridge", "av-client"] {
        match spawn_component(&exe, sub, &args.scenario, &args.out) {
            Ok(c) => children.push((sub, c)),
            Err(e) => {
                kill_all(&mut children);
                return Err(format!("could not start {sub}: {e}"));
            }
        }
    }
    let mut exited = [false; 3];
    let mut av_status = None;
    while exited.iter().any(|e| !e) {
        for (i, (name, c)) in children.iter_mut().enumerate() {
            if exited[i] {
                continue;
            }
            match c.try_wait() {
                Ok(Some(status)) => {
                    exited[i] = true;
                    info!("{name} exited with {status}");
                    if i == 2 {
                        av_status = Some(status);
                    } else if !status.success() {
                        let name = *name;
                        kill_all(&mut children);
                        return Err(format!("{name} failed with {status}"));
                    }
                }
                Ok(None) => {}
                Err(e) => warn!("cannot poll {name}: {e}"),
            }
        }
        std::thread::sleep(Duration::from_millis(20));
    }
    let (_, mut av) = children.pop().expect("three children");
    let mut text = String::new();
    if let Some(mut out) = av.stdout.take() {
        use std::io::Read;
        let _ = out.read_to_string(&mut text);
    }
    let field = |k: &str| {
        text.lines()
            .find_map(|l| l.strip_prefix(k).map(str::trim).map(str::to_owned))
    };
    let verdict = match field("verdict:").as_deref() {
        Some("goal-reached") => Verdict::GoalReached,
        Some("lane-departure") => Verdict::LaneDeparture,
        Some("stopped") => Verdict::Stopped,
        Some("timeout") => Verdict::Timeout,
        _ => Verdict::Error,
    };
    if av_status.is_some_and(|s| s.code() == Some(2)) {
        return Err("AV client failed".into());
    }
    Ok(RunSummary {
        verdict,
        steps: field("steps:").and_then(|s| s.parse().ok()).unwrap_or(0),
        wall_time: started.elapsed(),
        outputs: text
            .lines()
            .filter_map(|l| l.strip_prefix("output:"))
            .map(|p| PathBuf::from(p.trim()))
            .collect(),
    })
}

fn cmd_validate(files: &[PathBuf]) -> ExitCode {
    let mut ok = true;
    for f in files {
        match validate_file(f) {
            Ok(kind) => println!("{}: ok ({kind})", f.display()),
            Err(ConfigErrors(errors)) => {
                ok = false;
                println!("{}: {} error(s)", f.display(), errors.len());
                for e in errors {
                    println!("  {e}");
                }
            }
        }
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn cmd_sweep(args: &SweepArgs) -> ExitCode {
    let grid = match std::fs::read_to_string(&args.grid)
        .map_err(|e| e.to_string())
        .and_then(|t| parse_grid(&t).map_err(|e| e.to_string()))
    {
        Ok(g) => g,
        Err(e) => {
            error!("{}: {e}", args.grid.display());
            return ExitCode::FAILURE;
        }
    };
    info!("sweeping {} configurations", grid.setups.len());
    let reports = run_sweep(&grid, args.load_model.into());
    let failed = reports.iter().filter(|r| r.error.is_some()).count();
    match emit_report(&reports, &args.out) {
        Ok(files) => {
            println!("configurations: {} ({failed} with errors)", reports.len());
            for f in files {
                println!("output: {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            error!("cannot write report to {}: {e}", args.out.display());
            ExitCode::FAILURE
        }
    }
}

fn cmd_bench(a: &BenchArgs) -> ExitCode {
    if a.lidars == 0 && a.cameras == 0 {
        error!("at least one LiDAR or camera is required");
        return ExitCode::FAILURE;
    }
    if !(a.duration > 0.0) || !(a.warmup >= 0.0) {
        error!("duration must be positive and warm-up non-negative");
        return ExitCode::FAILURE;
    }
    let setup = BenchSetup::Sensors {
        lidars: a.lidars,
        points_per_second: a.points_per_sec,
        cameras: a.cameras,
        resolution: a.resolution,
    };
    let opts = BenchOptions {
        duration: Duration::from_secs_f64(a.duration),
        warmup: Duration::from_secs_f64(a.warmup),
        seed: a.seed,
        load_model: a.load_model.into(),
    };
    info!("benchmarking {setup}");
    let report = run_bench_config(&setup, &opts);
    let ok = report.error.is_none();
    if let Some(e) = &report.error {
        error!("{e}");
    }
    println!(
        "AFPS {:.1}, latency mean {:.3} ms, p99 {:.3} ms",
        report.fps.fps, report.summary_latency.mean, report.summary_latency.p99
    );
    match emit_report(&[report], &a.out) {
        Ok(files) => {
            for f in files {
                println!("output: {}", f.display());
            }
        }
        Err(e) => {
            error!("cannot write report to {}: {e}", a.out.display());
            return ExitCode::FAILURE;
        }
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

const PATIENCE: Duration = Duration::from_secs(10);

fn component(args: &ComponentArgs, which: &str) -> ExitCode {
    let scenario = match load_scenario(&args.scenario) {
        Ok(s) => s,
        Err(e) => {
            error!("invalid configuration:\n{e}");
            return ExitCode::from(2);
        }
    };
    let result = match which {
        "sim" => sim_component(&scenario).map(|r| info!("simulator finished after {} steps", r.steps)),
        "bridge" => bridge_component(&scenario, PATIENCE).map(|r| info!("bridge finished: {:?}", r.end)),
        _ => match av_component(&scenario, &args.out, PATIENCE) {
            Ok(s) => {
                print_summary(&s);
                return exit_for(&s);
            }
            Err(e) => Err(e),
        },
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            report_run_error(&e);
            ExitCode::from(2)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or(LOG_ENV, "info")).init();
    let cli = Cli::parse();
    match cli.command {
        Cmd::Run(args) => {
            let result = if args.distributed {
                run_distributed(&args)
            } else {
                cmd_run(&args.scenario, &args.out).map_err(|e| e.to_string())
            };
            match result {
                Ok(summary) => {
                    print_summary(&summary);
                    exit_for(&summary)
                }
                Err(e) => {
                    error!("{e}");
                    ExitCode::FAILURE
                }
            }
        }
        Cmd::Bench(BenchCmd {
            sweep: Some(BenchSub::Sweep(s)),
            ..
        }) => cmd_sweep(&s),
        Cmd::Bench(b) => cmd_bench(&b.single),
        Cmd::Sweep(s) => cmd_sweep(&s),
        Cmd::Validate { files } => cmd_validate(&files),
        Cmd::SimServer(a) => component(&a, "sim"),
        Cmd::Bridge(a) => component(&a, "bridge"),
        Cmd::AvClient(a) => component(&a, "av"),
    }
}
