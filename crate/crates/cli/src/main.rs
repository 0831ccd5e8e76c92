use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use dppc_cli::report::VERSION;
use dppc_cli::{experiments, CliError, ExperimentConfig, KernelSpec, Result, Verb};
use serde_json::Value;

/// Experiments on marked and conditional determinantal point processes.
#[derive(Debug, Parser)]
#[command(name = "dppc", version = VERSION)]
struct Args {
    verb: Verb,
    /// JSON config; see schema/config.schema.json.
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the config kernel: sine, airy, cue:N, ope:N:<weight>, circle-ope:N:<weight>.
    #[arg(long)]
    kernel: Option<KernelSpec>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn load(args: &Args) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(&args.config).map_err(|source| CliError::Io {
        path: args.config.display().to_string(),
        source,
    })?;
    let mut value: Value = serde_json::from_str(&text)?;
    let obj = value
        .as_object_mut()
        .ok_or_else(|| CliError::config("config must be a JSON object"))?;
    match obj.get("experiment").and_then(Value::as_str) {
        Some(e) if e != args.verb.name() => {
            return Err(CliError::config(format!("config is for `{e}`, not `{}`", args.verb)));
        }
        Some(_) => {}
        None => {
            obj.insert("experiment".into(), Value::String(args.verb.name().into()));
        }
    }
    if let Some(k) = &args.kernel {
        obj.insert("kernel".into(), serde_json::to_value(k)?);
    }
    if let Some(s) = args.seed {
        obj.insert("seed".into(), s.into());
    }
    ExperimentConfig::from_json(&value)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let outcome = load(&args).and_then(|cfg| {
        let report = experiments::run(&cfg)?;
        std::fs::create_dir_all(&args.out).map_err(|source| CliError::Io {
            path: args.out.display().to_string(),
            source,
        })?;
        report.write(&args.out, &cfg.output)?;
        Ok(report)
    });
    match outcome {
        Ok(report) => {
            for c in &report.checks {
                println!("{c}");
            }
            if report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("dppc {}: {e}", args.verb);
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
