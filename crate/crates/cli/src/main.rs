use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use twocrack::config::RunConfig;
use twocrack::output::{self, Command, RunOptions};
use twocrack_core::direct::GridSpec;

#[derive(Parser, Debug)]
#[command(name = "twocrack", version, about = "Lattice wave scattering by two staggered semi-infinite cracks")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides outputDir).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Use the large grid (Ngrid = 448, Npml = 270).
    #[arg(long, global = true)]
    paper_scale: bool,
    /// Node count on the unit circle (overrides nodeCount).
    #[arg(long, global = true)]
    nodes: Option<usize>,
    /// Suppress the stdout summary.
    #[arg(long, global = true)]
    quiet: bool,
    /// Also write the full direct-solver field as field.bin.
    #[arg(long, global = true)]
    dump: bool,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Cmd {
    /// Wavenumber, pole and branch points.
    Dispersion,
    /// Factorize the matrix kernel and report its residual.
    Factorize,
    /// Far field from the Wiener–Hopf solution.
    Semianalytic,
    /// Direct sparse solve on a finite grid.
    Direct,
    /// Both pipelines on the extraction circle.
    Compare,
    /// Compare over the Cartesian product of the `vary` lists.
    Sweep,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let Some(path) = cli.config.as_ref() else {
        eprintln!("error: --config PATH is required");
        return ExitCode::from(2);
    };
    let mut cfg = match RunConfig::load(path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if cli.paper_scale {
        let p = GridSpec::paper_scale();
        cfg.n_grid = p.n_grid;
        cfg.n_pml = p.n_pml;
    }
    if let Some(n) = cli.nodes {
        cfg.node_count = Some(n);
    }
    if let Some(o) = &cli.out {
        cfg.output_dir = o.clone();
    }
    if let Err(e) = cfg.validate() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    let command = match cli.command {
        Cmd::Dispersion => Command::Dispersion,
        Cmd::Factorize => Command::Factorize,
        Cmd::Semianalytic => Command::Semianalytic,
        Cmd::Direct => Command::Direct,
        Cmd::Compare => Command::Compare,
        Cmd::Sweep => Command::Sweep,
    };
    let opts = RunOptions { quiet: cli.quiet, dump: cli.dump, workers: 0 };
    let out = cfg.output_dir.clone();
    match output::run(command, &cfg, &out, &opts) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(output::error_exit(&e) as u8)
        }
    }
}
