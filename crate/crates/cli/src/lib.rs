//! Command-line front end: synth, bake, lod, render, verify, serve, plan and
//! metrics.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde_json::Value;

mod bake;
mod error;
mod metrics;
mod render;
mod synth;
pub mod verify;

pub use error::{Failure, EXIT_IO, EXIT_OK, EXIT_USAGE, EXIT_VERIFY};

#[derive(Debug, Parser)]
#[command(name = "blockfield", version, about = "Block-partitioned radiance field baking, rendering and streaming")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic scene spec and optionally an analytic preview.
    Synth(synth::SynthArgs),
    /// Bake a scene spec into block assets.
    Bake(bake::BakeArgs),
    /// Add coarser levels of detail to a baked scene.
    Lod(bake::LodArgs),
    /// Render a frame from baked assets.
    Render(render::RenderArgs),
    /// Run the equivalence, opacity, skip and round-trip suites.
    Verify(verify::VerifyArgs),
    /// Serve baked assets over HTTP.
    Serve(ServeArgs),
    /// Print the render plan for a camera pose.
    Plan(render::PlanArgs),
    /// Measure fidelity, skipping and LOD size of a baked scene.
    Metrics(metrics::MetricsArgs),
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long)]
    root: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: String,
    #[command(flatten)]
    fmt: OutputArgs,
}

/// Flag shared by every command.
#[derive(Debug, Clone, Copy, Args)]
pub struct OutputArgs {
    /// Print machine-readable JSON instead of text.
    #[arg(long)]
    pub json: bool,
}

/// What a command reports on success.
pub struct Report {
    pub json: Value,
    pub text: String,
    /// Set when the command ran but its checks did not pass.
    pub failed: bool,
}

impl Report {
    pub fn ok(json: Value, text: String) -> Self {
        Report {
            json,
            text,
            failed: false,
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let (json, result) = dispatch(cli.command);
    match result {
        Ok(report) => {
            if json {
                emit(&serde_json::to_string_pretty(&report.json).unwrap_or_default());
            } else if !report.text.is_empty() {
                emit(&report.text);
            }
            if report.failed {
                EXIT_VERIFY
            } else {
                EXIT_OK
            }
        }
        Err(f) => {
            if json {
                let v = serde_json::json!({ "error": f.to_string(), "exit_code": f.code() });
                emit(&serde_json::to_string_pretty(&v).unwrap_or_default());
            }
            eprintln!("error: {f}");
            f.code()
        }
    }
}

/// Prints a line, ignoring a closed stdout.
fn emit(s: &str) {
    let _ = writeln!(std::io::stdout().lock(), "{s}");
}

fn dispatch(cmd: Command) -> (bool, Result<Report, Failure>) {
    match cmd {
        Command::Synth(a) => (a.fmt.json, synth::run(&a)),
        Command::Bake(a) => (a.fmt.json, bake::run_bake(&a)),
        Command::Lod(a) => (a.fmt.json, bake::run_lod(&a)),
        Command::Render(a) => (a.fmt.json, render::run_render(&a)),
        Command::Verify(a) => (a.fmt.json, verify::run(&a)),
        Command::Plan(a) => (true, render::run_plan(&a)),
        Command::Metrics(a) => (a.fmt.json, metrics::run(&a)),
        Command::Serve(a) => (a.fmt.json, serve(&a)),
    }
}

fn serve(args: &ServeArgs) -> Result<Report, Failure> {
    let rt = tokio::runtime::Runtime::new().map_err(|e| Failure::Io(e.to_string()))?;
    rt.block_on(blockfield_streamer::serve(&args.root, &args.addr))?;
    Ok(Report::ok(Value::Null, String::new()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn usage_errors_exit_with_two() {
        assert_eq!(run(["blockfield", "render", "--nope"]), EXIT_USAGE);
        assert_eq!(run(["blockfield"]), EXIT_USAGE);
        assert_eq!(run(["blockfield", "--version"]), EXIT_OK);
    }

    #[test]
    fn every_command_takes_json() {
        for cmd in ["synth", "bake", "lod", "render", "verify", "serve", "plan", "metrics"] {
            let err = Cli::try_parse_from(["blockfield", cmd, "--json"]).unwrap_err();
            assert_ne!(err.kind(), clap::error::ErrorKind::UnknownArgument, "{cmd}");
        }
    }
}
