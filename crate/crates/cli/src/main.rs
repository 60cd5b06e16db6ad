//! Command-line front end: scenario runs, the Oldroyd-B reference and a
//! quick invariant check.

mod verify;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use micromacro::checkpoint::Checkpoint;
use micromacro::fem::MeshPair;
use micromacro::scenarios::cavity::run_cavity;
use micromacro::scenarios::config::{ScenarioKind, SimConfig};
use micromacro::scenarios::couette::{probe_locations, run_couette};
use micromacro::scenarios::extension::run_extension;
use micromacro::scenarios::oldroyd::{oldroyd_b_reference, OldroydConfig};
use micromacro::scenarios::run::{write_config_echo, RunControl};
use micromacro::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser)]
#[command(name = "micromacro", version, about = "Micro-macro dumbbell flow simulations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its outputs.
    Run(RunArgs),
    /// Closed-form-model reference solutions.
    Reference {
        #[command(subcommand)]
        which: Reference,
    },
    /// Run the quick invariant suite.
    Verify,
}

#[derive(Subcommand)]
enum Reference {
    /// Start-up Couette flow of an Oldroyd-B fluid on a fine grid.
    OldroydB(OldroydArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Startup,
    Constant,
}

#[derive(Args)]
struct RunArgs {
    /// couette-hookean, fene-extension, fene-shear or cavity
    scenario: String,
    /// Flat TOML file of configuration keys; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n_particles: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
    /// Extension rate.
    #[arg(long)]
    rate: Option<f64>,
    /// Cavity height.
    #[arg(long)]
    ly: Option<f64>,
    #[arg(long)]
    wi: Option<f64>,
    /// Extension protocol.
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    /// Any other configuration key, as `key=value` in TOML syntax.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Write a checkpoint every this many steps into `<out>/checkpoints`.
    #[arg(long)]
    checkpoint_every: Option<usize>,
    /// Continue from a checkpoint file.
    #[arg(long)]
    resume: Option<PathBuf>,
}

#[derive(Args)]
struct OldroydArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    re: Option<f64>,
    #[arg(long)]
    wi: Option<f64>,
    #[arg(long)]
    eta_s: Option<f64>,
    #[arg(long)]
    eps_p: Option<f64>,
    #[arg(long, default_value_t = 400)]
    m_fine: usize,
    #[arg(long, default_value_t = 1e-4)]
    dt_fine: f64,
    #[arg(long, default_value_t = 1.0)]
    t_end: f64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn config_error(msg: impl std::fmt::Display) -> Error {
    Error::Config(msg.to_string())
}

fn read_layer(path: &Path) -> Result<toml::Table, Error> {
    let text = fs::read_to_string(path).map_err(|e| config_error(format!("{}: {e}", path.display())))?;
    text.parse()
        .map_err(|e: toml::de::Error| config_error(format!("{}: {}", path.display(), e.message())))
}

fn flag_layer(a: &RunArgs) -> Result<toml::Table, Error> {
    let mut t = toml::Table::new();
    let mut put = |k: &str, v: Option<toml::Value>| {
        if let Some(v) = v {
            t.insert(k.into(), v);
        }
    };
    put("seed", a.seed.map(|v| toml::Value::Integer(v as i64)));
    put("n_particles", a.n_particles.map(|v| toml::Value::Integer(v as i64)));
    put("dt", a.dt.map(toml::Value::Float));
    put("t_end", a.t_end.map(toml::Value::Float));
    put("rate", a.rate.map(toml::Value::Float));
    put("ly", a.ly.map(toml::Value::Float));
    put("wi", a.wi.map(toml::Value::Float));
    put(
        "mode",
        a.mode.map(|m| {
            toml::Value::String(match m {
                Mode::Startup => "startup",
                Mode::Constant => "constant",
            }
            .into())
        }),
    );
    for kv in &a.set {
        let pair: toml::Table = kv
            .parse()
            .map_err(|e: toml::de::Error| config_error(format!("--set {kv}: {}", e.message())))?;
        t.extend(pair);
    }
    Ok(t)
}

fn effective_config(a: &RunArgs) -> Result<SimConfig, Error> {
    let kind = ScenarioKind::parse(&a.scenario)?;
    let mut layers = Vec::new();
    if let Some(p) = &a.config {
        let file = read_layer(p)?;
        if let Some(s) = file.get("scenario").and_then(|v| v.as_str()) {
            if ScenarioKind::parse(s)? != kind {
                return Err(config_error(format!("config file is for scenario `{s}`")));
            }
        }
        layers.push(file);
    }
    layers.push(flag_layer(a)?);
    SimConfig::build(Some(kind), &layers)
}

fn run(a: &RunArgs) -> Result<(), Error> {
    let cfg = effective_config(a)?;
    let resume = a.resume.as_deref().map(Checkpoint::load).transpose()?;
    if let Some(c) = &resume {
        c.check_compatible(&cfg)?;
    }
    fs::create_dir_all(&a.out)?;
    write_config_echo(&a.out, &cfg)?;
    let checkpoint_dir = a.checkpoint_every.map(|_| a.out.join("checkpoints"));
    if let Some(d) = &checkpoint_dir {
        fs::create_dir_all(d)?;
    }
    let ctl = RunControl {
        checkpoint_every: a.checkpoint_every,
        checkpoint_dir,
        resume,
    };
    let summary = match cfg.scenario {
        ScenarioKind::CouetteHookean | ScenarioKind::FeneShear => {
            let r = run_couette(&cfg, &ctl)?;
            r.write(&a.out, &cfg)?;
            r.summary
        }
        ScenarioKind::FeneExtension => {
            let r = run_extension(&cfg, &ctl)?;
            r.write(&a.out)?;
            r.summary
        }
        ScenarioKind::Cavity => {
            let mesh = MeshPair::new(cfg.nx, cfg.ny, cfg.lx, cfg.ly);
            mesh.export(std::io::BufWriter::new(fs::File::create(a.out.join("mesh.txt"))?))?;
            let r = run_cavity(&cfg, &ctl)?;
            r.write(&a.out, &cfg)?;
            r.summary
        }
    };
    eprintln!(
        "{}: {} steps, {} implicit micro steps, {} stability violations, outputs in {}",
        cfg.scenario.name(),
        summary.steps,
        summary.tally.steps,
        summary.tally.violations,
        a.out.display()
    );
    Ok(())
}

fn reference(a: &OldroydArgs) -> Result<(), Error> {
    let mut layers = Vec::new();
    if let Some(p) = &a.config {
        layers.push(read_layer(p)?);
    }
    let mut flags = toml::Table::new();
    for (k, v) in [("re", a.re), ("wi", a.wi), ("eta_s", a.eta_s), ("eps_p", a.eps_p)] {
        if let Some(v) = v {
            flags.insert(k.into(), toml::Value::Float(v));
        }
    }
    layers.push(flags);
    let cfg = SimConfig::build(Some(ScenarioKind::CouetteHookean), &layers)?;
    let mut oc = OldroydConfig::new(cfg.physics(), probe_locations(ScenarioKind::CouetteHookean));
    oc.lid = cfg.lid;
    oc.m_fine = a.m_fine;
    oc.dt_fine = a.dt_fine;
    oc.t_end = a.t_end;
    if !(a.m_fine >= 2 && a.dt_fine > 0.0 && a.t_end > 0.0) {
        return Err(config_error("m_fine, dt_fine and t_end must be positive"));
    }
    let series = oldroyd_b_reference(&oc)?;
    fs::create_dir_all(&a.out)?;
    series.write_csv(&a.out.join("probes.csv"))?;
    Ok(())
}

/// Writes the failing step and node next to the outputs.
fn write_diagnostics(out: &Path, e: &Error) {
    let (step, node) = e.location();
    let mut t = toml::Table::new();
    t.insert("error".into(), toml::Value::String(e.to_string()));
    if let Some(s) = step {
        t.insert("step".into(), toml::Value::Integer(s as i64));
    }
    if let Some(n) = node {
        t.insert("node".into(), toml::Value::Integer(n as i64));
    }
    let written = fs::create_dir_all(out).and_then(|_| fs::write(out.join("diagnostics.toml"), t.to_string()));
    if let Err(w) = written {
        eprintln!("could not write diagnostics: {w}");
    }
}

fn exit_for(e: &Error, out: Option<&Path>) -> ExitCode {
    eprintln!("error: {e}");
    if e.is_numerical() {
        if let Some(out) = out {
            write_diagnostics(out, e);
        }
        ExitCode::from(EXIT_NUMERICAL)
    } else if matches!(e, Error::Io(_)) {
        ExitCode::FAILURE
    } else {
        ExitCode::from(EXIT_CONFIG)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.command {
        Command::Run(a) => match run(a) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => exit_for(&e, Some(&a.out)),
        },
        Command::Reference {
            which: Reference::OldroydB(a),
        } => match reference(a) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => exit_for(&e, Some(&a.out)),
        },
        Command::Verify => {
            if verify::run_all() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_NUMERICAL)
            }
        }
    }
}
