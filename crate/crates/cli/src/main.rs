use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rte_cli::commands;
use rte_cli::config::Config;
use rte_cli::CliError;

#[derive(Parser)]
#[command(name = "rte", version, about = "Integral-equation radiative transfer solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML configuration file.
    #[arg(long, global = true, conflicts_with = "scenario")]
    config: Option<PathBuf>,
    /// Built-in scenario: kobayashi-test1, kobayashi-test2 or kobayashi-test3.
    #[arg(long, global = true)]
    scenario: Option<String>,
    /// Worker threads; all hardware threads by default.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, global = true)]
    eta: Option<f64>,
    #[arg(long, global = true)]
    eps: Option<f64>,
    #[arg(long, global = true)]
    leaf_size: Option<usize>,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Target vertex count of a built-in mesh.
    #[arg(long, global = true)]
    vertices: Option<usize>,
    /// Initial temperature.
    #[arg(long, global = true)]
    t0: Option<f64>,
    /// Comma-separated vertex counts for `bench` and `error-ladder`.
    #[arg(long, global = true, value_delimiter = ',')]
    ladder: Option<Vec<usize>>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Solve once and write fields, trace and probes.
    Solve,
    /// Compression and timing over the mesh ladder.
    Bench,
    /// Compare the mirrored run with a run on the doubled domain.
    CompareSym,
    /// Error against the finest ladder mesh.
    ErrorLadder,
}

fn config(cli: &Cli) -> Result<Config, CliError> {
    let mut cfg = match (&cli.config, &cli.scenario) {
        (Some(path), _) => Config::load(path)?,
        (None, Some(name)) => Config::builtin(name),
        (None, None) => return Err(CliError::Invalid(vec!["give --config or --scenario".into()])),
    };
    if let Some(v) = cli.eta {
        cfg.hmatrix.eta = v;
    }
    if let Some(v) = cli.eps {
        cfg.hmatrix.eps = v;
    }
    if let Some(v) = cli.leaf_size {
        cfg.hmatrix.leaf_size = v;
    }
    if let Some(v) = &cli.out_dir {
        cfg.output.dir = v.clone();
    }
    if let Some(v) = cli.vertices {
        cfg.scenario.vertices = v;
    }
    if let Some(v) = cli.t0 {
        cfg.solver.t0 = v;
    }
    if let Some(v) = &cli.ladder {
        cfg.ladder.vertices = v.clone();
    }
    Ok(cfg)
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    if let Some(w) = cli.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .map_err(|e| CliError::Run(e.to_string()))?;
    }
    let cfg = config(cli)?;
    let dir = cfg.output.dir.display();
    match cli.command {
        Command::Solve => {
            let sol = commands::solve(&cfg)?;
            for w in &sol.warnings {
                eprintln!("warning: {w}");
            }
            let last = sol.trace.records.last();
            println!(
                "{}: N = {}, {} iterations, converged = {}, T in [{:.6}, {:.6}]",
                sol.scenario.name,
                sol.vertices(),
                sol.trace.records.len(),
                sol.trace.converged,
                last.map_or(f64::NAN, |r| r.t_min),
                last.map_or(f64::NAN, |r| r.t_max),
            );
            println!(
                "assembly {:.2} s, solve {:.2} s, volume C.L. {:.3}, surface C.L. {:.3}; output in {dir}",
                sol.assembly_seconds, sol.solve_seconds, sol.volume.ratio, sol.surface.ratio
            );
        }
        Command::Bench => {
            let rows = commands::bench(&cfg)?;
            print!("{}", commands::bench_tsv(&rows));
        }
        Command::CompareSym => {
            let r = commands::compare_sym(&cfg)?;
            print!("{}", r.to_tsv());
        }
        Command::ErrorLadder => {
            let r = commands::error_ladder(&cfg)?;
            print!("{}", r.to_tsv());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
