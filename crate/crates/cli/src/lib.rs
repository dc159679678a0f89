//! The `blox` command line: design, redesign, eval, render, recognize and
//! list-objects, with run-directory bookkeeping.

pub mod commands;
pub mod config;
pub mod error;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::{ClientMode, RunConfig};
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "blox", version, about = "Generative block-assembly design from text prompts")]
pub struct Cli {
    /// TOML config file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Catalog JSON; defaults to the bundled catalog.
    #[arg(long, global = true)]
    pub catalog: Option<PathBuf>,
    /// `live` or `replay:<dir>`.
    #[arg(long, global = true)]
    pub client: Option<String>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Override any config key, e.g. `--set sim.com_margin_mm=0.5`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE", value_parser = config::parse_assignment)]
    pub set: Vec<(String, String)>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate candidates for a prompt and select a winner.
    Design(DesignArgs),
    /// Run perturbation redesign on a plan.
    Redesign(RedesignArgs),
    /// Noisy-assembly evaluation, with or without the redesign ablation.
    Eval(EvalArgs),
    /// Render orthographic views and optionally a mesh.
    Render(RenderArgs),
    /// Rank labels for rendered designs with the model.
    Recognize(RecognizeArgs),
    /// Ask the model for a list of object names.
    ListObjects(ListObjectsArgs),
}

#[derive(Debug, Args)]
pub struct DesignArgs {
    #[arg(long)]
    pub prompt: Option<String>,
    #[arg(long)]
    pub candidates: Option<usize>,
    /// Run directory to create.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// A plan path, or `bundled:<name>` for a shipped design.
#[derive(Debug, Args)]
pub struct RedesignArgs {
    #[arg(long)]
    pub plan: String,
    /// Where to write the redesigned plan.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Where to write the redesign report.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Plan paths or `bundled:<name>`; repeatable.
    #[arg(long)]
    pub plan: Vec<String>,
    /// Evaluate every bundled design.
    #[arg(long)]
    pub bundled: bool,
    /// Evaluate the plan as given only, without the redesign arm.
    #[arg(long)]
    pub single: bool,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Directory for the JSON and CSV results.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[arg(long)]
    pub plan: String,
    /// Comma-separated views: front, side, top.
    #[arg(long, value_delimiter = ',', default_value = "front,side")]
    pub views: Vec<blox_core::ViewAxis>,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write a Wavefront mesh.
    #[arg(long)]
    pub mesh: bool,
    /// `png` or `ppm`.
    #[arg(long, default_value = "png")]
    pub format: String,
}

#[derive(Debug, Args)]
pub struct RecognizeArgs {
    /// Plans to render and rank, labeled by their prompts; repeatable.
    #[arg(long, required = true)]
    pub plan: Vec<String>,
    /// Label pool, one per line.
    #[arg(long)]
    pub pool: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub n: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ListObjectsArgs {
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Cli {
    /// Folds the flags into config overrides, in precedence order.
    pub fn overrides(&self) -> Vec<(String, String)> {
        let mut o = Vec::new();
        let quoted = |s: &str| toml::Value::String(s.to_string()).to_string();
        if let Some(c) = &self.catalog {
            o.push(("catalog".into(), quoted(&c.to_string_lossy())));
        }
        if let Some(c) = &self.client {
            o.push(("client".into(), quoted(c)));
        }
        if let Some(s) = self.seed {
            o.push(("seed".into(), s.to_string()));
        }
        match &self.command {
            Command::Design(a) => {
                if let Some(p) = &a.prompt {
                    o.push(("prompt".into(), quoted(p)));
                }
                if let Some(n) = a.candidates {
                    o.push(("candidates".into(), n.to_string()));
                }
                if let Some(d) = &a.out {
                    o.push(("out".into(), quoted(&d.to_string_lossy())));
                }
            }
            Command::Eval(a) => {
                if let Some(s) = a.sigma {
                    o.push(("noise.xy_sigma_mm".into(), format!("{s:?}")));
                }
                if let Some(t) = a.trials {
                    o.push(("trials".into(), t.to_string()));
                }
            }
            _ => {}
        }
        o.extend(self.set.iter().cloned());
        o
    }
}

/// Runs a parsed command line, returning what to print on stdout.
pub fn run(cli: &Cli) -> Result<String, CliError> {
    let cfg = RunConfig::resolve(cli.config.as_deref(), &cli.overrides())?;
    match &cli.command {
        Command::Design(_) => commands::design(&cfg),
        Command::Redesign(a) => commands::redesign(&cfg, a),
        Command::Eval(a) => commands::eval(&cfg, a),
        Command::Render(a) => commands::render(&cfg, a),
        Command::Recognize(a) => commands::recognize(&cfg, a),
        Command::ListObjects(a) => commands::list_objects(&cfg, a),
    }
}

/// Parses `args` and runs; returns the exit code, writing stdout and
/// structured errors to the given sinks.
pub fn main_with<I, T>(args: I, stdout: &mut dyn std::io::Write, stderr: &mut dyn std::io::Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stdout, "{e}");
                return 0;
            }
            let err = CliError::Usage(e.render().to_string().trim().to_string());
            let _ = writeln!(stderr, "{}", err.to_json());
            return err.exit_code();
        }
    };
    match run(&cli) {
        Ok(out) => {
            let _ = write!(stdout, "{out}");
            0
        }
        Err(err) => {
            let _ = writeln!(stderr, "{}", err.to_json());
            err.exit_code()
        }
    }
}
