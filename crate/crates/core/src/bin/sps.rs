use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sps_core::config::{parse_text, preset, split_assignment, ConfigError, ConfigMap, RunConfig, PRESETS};
use sps_core::runner::{run, validate_report, RunError, RunOptions};

#[derive(Parser)]
#[command(name = "sps", version, about = "Driven-dissipative emitter spectra and photon correlations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Steady-state density matrix.
    Steady(Common),
    /// Incoherent emission spectrum.
    Spectrum(Common),
    /// Normalized intensity correlation g²(τ) of the emitter.
    G2(Common),
    /// Zero-delay g² of the detector mode.
    DetectorG2(Common),
    /// Width holding a fraction of the incoherent weight.
    Bandwidth(Common),
    /// Scalar task over one or two parameter axes.
    Sweep(WithTask),
    /// Run the task named by the configuration or `--task` (`--task sweep`
    /// sweeps the configured task).
    Run(WithTask),
    /// Resolve a configuration and report its parameters and size.
    Validate(Common),
    /// List the built-in presets.
    Presets,
}

#[derive(Args)]
struct WithTask {
    #[arg(long)]
    task: Option<String>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Built-in parameter set.
    #[arg(long)]
    preset: Option<String>,
    /// Configuration file; output files with `# cfg` header lines are accepted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a parameter, `key=value`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Sweep axis, e.g. `kappa=logspace(1e-3,1,25)`; at most two.
    #[arg(long, value_name = "PARAM=VALUES")]
    sweep: Vec<String>,
    /// Grid override, e.g. `tau=linear(0,5e4,2000)` or `omega=logdense(1e-2,1e-7,60)`.
    #[arg(long, value_name = "AXIS=GRID")]
    grid: Vec<String>,
    /// Output file (default: standard output).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the header as JSON to this file.
    #[arg(long, value_name = "FILE")]
    json_header: Option<PathBuf>,
    /// Check cutoff and coupling convergence; exit with code 3 on failure.
    #[arg(long)]
    strict: bool,
    /// Add the wall-clock time to the header.
    #[arg(long)]
    stamp: bool,
}

enum Failure {
    Config(String),
    Run(RunError),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Run(e) => e.exit_code() as u8,
            Failure::Io(_) => 4,
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        Failure::Run(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let msg = match &f {
                Failure::Config(m) | Failure::Io(m) => m.clone(),
                Failure::Run(e) => e.to_string(),
            };
            eprintln!("sps: {msg}");
            ExitCode::from(f.code())
        }
    }
}

fn execute(cmd: Command) -> Result<(), Failure> {
    let (common, task, need_sweep) = match cmd {
        Command::Presets => {
            println!("{}", PRESETS.join("\n"));
            return Ok(());
        }
        Command::Validate(c) => {
            let cfg = RunConfig::resolve(&assemble(&c, None)?)?;
            return emit(&c, &validate_report(&cfg));
        }
        Command::Steady(c) => (c, Some("steady".to_string()), false),
        Command::Spectrum(c) => (c, Some("spectrum".to_string()), false),
        Command::G2(c) => (c, Some("g2".to_string()), false),
        Command::DetectorG2(c) => (c, Some("detector-g2".to_string()), false),
        Command::Bandwidth(c) => (c, Some("bandwidth".to_string()), false),
        Command::Sweep(w) => (w.common, w.task, true),
        Command::Run(w) if w.task.as_deref() == Some("sweep") => (w.common, None, true),
        Command::Run(w) => (w.common, w.task, false),
    };
    let map = assemble(&common, task.as_deref())?;
    let cfg = RunConfig::resolve(&map)?;
    if need_sweep && cfg.sweeps.is_empty() {
        return Err(Failure::Config("sweep needs at least one --sweep axis or sweep.param".into()));
    }
    let table = run(&cfg, RunOptions { strict: common.strict })?;
    let stamp = common.stamp.then(now_stamp);
    if let Some(path) = &common.json_header {
        let json = serde_json::to_string_pretty(&table.header_json(stamp.as_deref())).expect("serializable header");
        std::fs::write(path, json + "\n").map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    }
    emit(&common, &table.to_csv(stamp.as_deref()))
}

/// Preset or file, then `--set`, `--grid`, `--sweep` and the task, in that order.
fn assemble(c: &Common, task: Option<&str>) -> Result<ConfigMap, Failure> {
    let mut map = match (&c.preset, &c.config) {
        (Some(_), Some(_)) => return Err(Failure::Config("--preset and --config are exclusive".into())),
        (Some(p), None) => preset(p)?,
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
            parse_text(&text)?
        }
        (None, None) => ConfigMap::new(),
    };
    for s in &c.set {
        let (k, v) = split_assignment(s).map_err(Failure::Config)?;
        map.insert(k, v);
    }
    for g in &c.grid {
        let (axis, v) = split_assignment(g).map_err(Failure::Config)?;
        match axis.as_str() {
            "tau" | "omega" => map.insert(format!("grid.{axis}"), v),
            _ => return Err(Failure::Config(format!("unknown grid axis `{axis}`; expected tau or omega"))),
        };
    }
    if c.sweep.len() > 2 {
        return Err(Failure::Config("at most two sweep axes".into()));
    }
    for (s, prefix) in c.sweep.iter().zip(["sweep", "sweep2"]) {
        let (param, values) = split_assignment(s).map_err(Failure::Config)?;
        map.insert(format!("{prefix}.param"), param);
        map.insert(format!("{prefix}.values"), values);
    }
    if let Some(t) = task {
        map.insert("task".into(), t.to_string());
    }
    Ok(map)
}

fn emit(c: &Common, text: &str) -> Result<(), Failure> {
    match &c.out {
        Some(path) => std::fs::write(path, text).map_err(|e| Failure::Io(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn now_stamp() -> String {
    let secs = std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    format!("unix:{secs}")
}
