//! `weakstat`: run configurations, θ-sweeps and Monte Carlo validation runs.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use weakstat::config::{Command, RunConfig, VariantName};
use weakstat::report::to_json;
use weakstat::single::run_single;
use weakstat::sweep::run_sweep;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Preset {
    Fig2a,
    Fig2b,
    Fig3,
    Fig4,
}

impl Preset {
    fn text(self) -> &'static str {
        match self {
            Preset::Fig2a => include_str!("../presets/fig2a.json"),
            Preset::Fig2b => include_str!("../presets/fig2b.json"),
            Preset::Fig3 => include_str!("../presets/fig3.json"),
            Preset::Fig4 => include_str!("../presets/fig4.json"),
        }
    }
}

/// Full counting statistics of weak measurements with post-selection.
///
/// The configuration is a JSON document read from --config, a built-in
/// --preset, or standard input. A previously written artifact (JSON or CSV)
/// is accepted as a configuration and reproduces itself.
#[derive(Debug, Parser)]
#[command(name = "weakstat", version)]
struct Args {
    /// Run configuration or artifact; `-` reads standard input.
    #[arg(long, value_name = "PATH", conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in configuration.
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    /// Output file (default: the config's `output`, else standard output).
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Worker threads for sweeps and Monte Carlo.
    #[arg(long, value_name = "N", value_parser = clap::value_parser!(u16).range(1..))]
    jobs: Option<u16>,
    /// Seed override for the `mc` command.
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Second-order variant override.
    #[arg(long, value_parser = parse_variant)]
    variant: Option<VariantName>,
}

fn parse_variant(s: &str) -> Result<VariantName, String> {
    s.parse().map_err(|e: weakstat::Error| e.to_string())
}

#[derive(Debug)]
enum Failure {
    Config(String),
    Numerical(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Numerical(_) => 3,
            Failure::Io(_) => 1,
        }
    }
}

impl From<weakstat::Error> for Failure {
    fn from(e: weakstat::Error) -> Self {
        if e.is_config() {
            Failure::Config(e.to_string())
        } else {
            Failure::Numerical(format!("numerical error: {e}"))
        }
    }
}

/// The configuration embedded in an artifact, or the text itself.
fn extract_config(text: &str) -> Result<String, Failure> {
    if text.trim_start().starts_with('#') {
        return text
            .lines()
            .take_while(|l| l.starts_with('#'))
            .find_map(|l| l.strip_prefix("# config: "))
            .map(str::to_owned)
            .ok_or_else(|| Failure::Config("configuration error: CSV input has no `# config:` line".into()));
    }
    if let Ok(serde_json::Value::Object(doc)) = serde_json::from_str::<serde_json::Value>(text) {
        if doc.get("tool").and_then(|t| t.as_str()) == Some("weakstat") {
            if let Some(c) = doc.get("config") {
                return Ok(c.to_string());
            }
        }
    }
    Ok(text.to_owned())
}

fn read_input(args: &Args) -> Result<String, Failure> {
    if let Some(p) = args.preset {
        return Ok(p.text().to_owned());
    }
    let mut text = String::new();
    match args.config.as_deref() {
        Some(p) if p != Path::new("-") => {
            text = std::fs::read_to_string(p).map_err(|e| Failure::Config(format!("configuration error: cannot read {}: {e}", p.display())))?;
        }
        _ => {
            std::io::stdin().read_to_string(&mut text).map_err(|e| Failure::Config(format!("configuration error: stdin: {e}")))?;
        }
    }
    Ok(text)
}

fn load_config(args: &Args) -> Result<RunConfig, Failure> {
    let mut cfg = RunConfig::from_json(&extract_config(&read_input(args)?)?)?;
    if let Some(v) = args.variant {
        cfg.variant = v;
    }
    if let Some(seed) = args.seed {
        match cfg.mc.as_mut() {
            Some(mc) => mc.seed = seed,
            None => return Err(Failure::Config("configuration error: --seed applies to the mc command only".into())),
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_file(path: &Path, body: &str) -> Result<(), Failure> {
    std::fs::write(path, body).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn run(args: &Args) -> Result<(), Failure> {
    let cfg = load_config(args)?;
    if let Some(n) = args.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(usize::from(n))
            .build_global()
            .map_err(|e| Failure::Io(format!("thread pool: {e}")))?;
    }
    let body = match cfg.command {
        Command::Sweep | Command::Scaling => {
            let comments = [
                format!("weakstat {}", env!("CARGO_PKG_VERSION")),
                format!("config: {}", cfg.resolved_json()),
            ];
            run_sweep(&cfg)?.to_csv(&comments)?
        }
        _ => {
            let out = run_single(&cfg)?;
            if let (Some(csv), Some(path)) = (&out.histogram_csv, cfg.mc.as_ref().and_then(|m| m.histogram_csv.as_ref())) {
                write_file(Path::new(path), csv)?;
            }
            to_json(&out.document)
        }
    };
    match args.out.clone().or_else(|| cfg.output.as_ref().map(PathBuf::from)) {
        Some(path) => write_file(&path, &body),
        None => std::io::stdout().write_all(body.as_bytes()).map_err(|e| Failure::Io(format!("stdout: {e}"))),
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Config(m) | Failure::Numerical(m) => eprintln!("weakstat: {m}"),
                Failure::Io(m) => eprintln!("weakstat: i/o error: {m}"),
            }
            ExitCode::from(f.code())
        }
    }
}
