use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use cluster_game::experiment::{
    certify, execute_compare, execute_report, execute_run, io_error, render_certify_text,
    render_compare_text, render_run_text, render_trace_report, ConfigError, ExperimentConfig,
    ExperimentError, Instance, RateWindow,
};

#[derive(Debug, Parser)]
#[command(name = "cluster-game", version, about = "Distributed Nash equilibrium seeking for multi-cluster games")]
struct Cli {
    /// Experiment config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `outputs.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Replaces `x0_seed` in the config.
    #[arg(long, global = true)]
    seed_override: Option<u64>,
    /// Only errors are printed.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the solver and write trace, estimates and report.
    Run,
    /// Print the constants ledger and the certified step size.
    Certify,
    /// Iterations-to-epsilon on the dense and the leader-follower topology.
    Compare,
    /// Refit the rate of a stored trace and write its trajectory CSV.
    Report {
        /// Trace CSV written by `run`.
        trace: PathBuf,
    },
}

impl Cli {
    fn load_config(&self) -> Result<ExperimentConfig, ExperimentError> {
        let path = self.config.as_ref().ok_or_else(|| ConfigError::Field {
            field: "--config".into(),
            message: "required for this command".into(),
        })?;
        let mut config = ExperimentConfig::load(path)?;
        if let Some(seed) = self.seed_override {
            config.x0_seed = seed;
        }
        Ok(config)
    }

    fn out_dir(&self, config: &ExperimentConfig) -> PathBuf {
        self.out.clone().unwrap_or_else(|| config.outputs.dir.clone())
    }

    fn print(&self, text: &str) {
        if !self.quiet {
            print!("{text}");
        }
    }
}

fn write_file(dir: &Path, name: impl AsRef<Path>, contents: &str) -> Result<PathBuf, ExperimentError> {
    std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| io_error(&path, e))?;
    Ok(path)
}

fn cmd_run(cli: &Cli) -> Result<(), ExperimentError> {
    let config = cli.load_config()?;
    let dir = cli.out_dir(&config);
    let out = match execute_run(&config) {
        Ok(out) => out,
        Err(ExperimentError::Divergence { last_finite_k, trace }) => {
            let path = write_file(&dir, &config.outputs.trace, &trace.to_csv()?)?;
            eprintln!("partial trace written to {}", path.display());
            return Err(ExperimentError::Divergence { last_finite_k, trace });
        }
        Err(e) => return Err(e),
    };
    write_file(&dir, &config.outputs.trace, &out.trace.to_csv()?)?;
    write_file(&dir, &config.outputs.estimates, &out.estimates_csv)?;
    let report = render_run_text(&config, &out.summary);
    write_file(&dir, &config.outputs.report, &report)?;
    cli.print(&report);
    if !cli.quiet {
        eprintln!("outputs written to {}", dir.display());
    }
    Ok(())
}

fn cmd_certify(cli: &Cli) -> Result<(), ExperimentError> {
    let config = cli.load_config()?;
    let outcome = certify(&Instance::build(&config, config.global_graph.leader_follower)?)?;
    let text = render_certify_text(&config, &outcome);
    if cli.out.is_some() {
        write_file(&cli.out_dir(&config), "certify.txt", &text)?;
    }
    cli.print(&text);
    Ok(())
}

fn cmd_compare(cli: &Cli) -> Result<(), ExperimentError> {
    let config = cli.load_config()?;
    let outcome = execute_compare(&config)?;
    let text = render_compare_text(&config, &outcome);
    if cli.out.is_some() {
        write_file(&cli.out_dir(&config), "compare.txt", &text)?;
    }
    cli.print(&text);
    if outcome.ordering_holds() {
        Ok(())
    } else {
        Err(ExperimentError::CompareFailed(format!(
            "leader-follower needed fewer iterations than the dense graph ({:?} < {:?})",
            outcome.leader_follower, outcome.dense
        )))
    }
}

fn cmd_report(cli: &Cli, trace: &Path) -> Result<(), ExperimentError> {
    let window = match &cli.config {
        Some(_) => cli.load_config()?.rate_window,
        None => RateWindow::default(),
    };
    let text = std::fs::read_to_string(trace).map_err(|e| io_error(trace, e))?;
    let (report, trajectory) = execute_report(&text, window)?;
    let dir = match &cli.out {
        Some(d) => d.clone(),
        None => match trace.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        },
    };
    let path = write_file(&dir, "trajectory.csv", &trajectory)?;
    cli.print(&render_trace_report(&report));
    if !cli.quiet {
        eprintln!("trajectory written to {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run => cmd_run(&cli),
        Command::Certify => cmd_certify(&cli),
        Command::Compare => cmd_compare(&cli),
        Command::Report { trace } => cmd_report(&cli, trace),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
