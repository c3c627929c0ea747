use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use dqm::config::{apply_overrides, execute, parse_config, preset, replay, serialize_config, ConfigError, PRESETS};

#[derive(Parser)]
#[command(
    name = "dqm",
    version,
    about = "Repeated queueing game with deadlines, penalties and spillover"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a configuration and write its outputs.
    Run {
        #[command(flatten)]
        source: Source,
        /// Output directory; defaults to output.path, then `dqm-out`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
        /// Worker threads; 0 picks the number of cores.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        /// Skip the assertions enabled in the configuration.
        #[arg(long)]
        no_assert: bool,
    },
    /// Validate a configuration and print it with every default filled in.
    Show {
        #[command(flatten)]
        source: Source,
    },
    /// List the shipped presets, or print one.
    Presets { name: Option<String> },
    /// Regenerate an output from its embedded configuration and compare bytes.
    Replay {
        file: PathBuf,
        /// Directory for the regenerated files; a temporary one by default.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Source {
    /// Configuration file.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// Name of a shipped preset.
    #[arg(long)]
    preset: Option<String>,
    /// Override a key, e.g. `--set run.horizon=500`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

fn load(source: &Source, extra: &[String]) -> Result<String, ConfigError> {
    let text = match (&source.config, &source.preset) {
        (Some(path), _) => {
            std::fs::read_to_string(path).map_err(|e| ConfigError::Io(format!("{}: {e}", path.display())))?
        }
        (None, Some(name)) => preset(name)
            .ok_or_else(|| ConfigError::Invalid(vec![format!("unknown preset \"{name}\"")]))?
            .text
            .to_owned(),
        (None, None) => {
            return Err(ConfigError::Invalid(vec![
                "either --config or --preset is required".into()
            ]))
        }
    };
    let mut overrides = source.overrides.clone();
    overrides.extend_from_slice(extra);
    apply_overrides(&text, &overrides)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(command: Command) -> Result<u8, ConfigError> {
    match command {
        Command::Run {
            source,
            out,
            format,
            jobs,
            no_assert,
        } => {
            let extra: Vec<String> = format
                .map(|f| {
                    let name = match f {
                        FormatArg::Csv => "csv",
                        FormatArg::Json => "json",
                    };
                    vec![format!("output.format=\"{name}\"")]
                })
                .unwrap_or_default();
            let text = load(&source, &extra)?;
            let config = parse_config(&text)?;
            let text = serialize_config(&config);
            let out = out
                .or_else(|| config.output.path.as_ref().map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("dqm-out"));
            let report = execute(&config, &text, &out, jobs, !no_assert)?;
            println!(
                "{}: {} runs, {} files written to {}",
                config.task.name(),
                report.records.len().max(1),
                report.files.len(),
                out.display()
            );
            if !report.assertions_checked {
                println!("assertions: skipped");
                return Ok(0);
            }
            if report.passed() {
                println!("assertions: passed");
                Ok(0)
            } else {
                for f in &report.failures {
                    println!("assertion failed: {f}");
                }
                Ok(1)
            }
        }
        Command::Show { source } => {
            let text = load(&source, &[])?;
            print!("{}", serialize_config(&parse_config(&text)?));
            Ok(0)
        }
        Command::Presets { name: None } => {
            let width = PRESETS.iter().map(|p| p.name.len()).max().unwrap_or(0);
            for p in PRESETS {
                println!("{:width$}  {}", p.name, p.description());
            }
            Ok(0)
        }
        Command::Presets { name: Some(name) } => {
            let p = preset(&name).ok_or_else(|| ConfigError::Invalid(vec![format!("unknown preset \"{name}\"")]))?;
            print!("{}", p.text);
            Ok(0)
        }
        Command::Replay { file, out } => {
            let temp;
            let dir = match out {
                Some(d) => d,
                None => {
                    temp = tempfile::tempdir().map_err(|e| ConfigError::Io(e.to_string()))?;
                    temp.path().to_path_buf()
                }
            };
            let outcome = replay(&file, &dir)?;
            for (original, _, same) in &outcome.compared {
                println!("{} {}", if *same { "identical" } else { "DIFFERS" }, original.display());
            }
            Ok(if outcome.identical() { 0 } else { 1 })
        }
    }
}
