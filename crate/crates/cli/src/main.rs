use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use vmot::lp::Mode;
use vmot_cli::{artifacts, pipeline, Overrides, RunConfig, RunError};

#[derive(Parser, Debug)]
#[command(name = "vmot", version, about = "Model-free price bounds via martingale optimal transport")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `outputs` in the config.
    #[arg(long, global = true)]
    outdir: Option<PathBuf>,
    /// Sets both solver tolerances.
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[arg(long, global = true, value_enum)]
    mode: Option<ModeArg>,
    /// Fixed-order reductions for bit-reproducible runs.
    #[arg(long, global = true)]
    deterministic: bool,
    /// Seed for random synthetic marginals and sampled verification.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Check convex order and irreducibility of the marginals.
    Validate,
    /// Assemble and export the LPs of both directions.
    Build,
    /// Solve the exported LPs.
    Solve,
    /// Re-verify stored certificates.
    Verify,
    /// Run everything and report the price bounds.
    Bounds,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum ModeArg {
    Exact,
    Relaxed,
}

fn run(cli: &Cli) -> Result<(), RunError> {
    let path = cli.config.as_ref().ok_or_else(|| RunError::Other(anyhow::anyhow!("--config is required")))?;
    let mut cfg = RunConfig::load(path)?;
    cfg.apply(&Overrides {
        outdir: cli.outdir.clone(),
        tol: cli.tol,
        mode: cli.mode.map(|m| match m {
            ModeArg::Exact => Mode::Exact,
            ModeArg::Relaxed => Mode::Relaxed,
        }),
        deterministic: cli.deterministic,
        seed: cli.seed,
    });
    if cli.outdir.is_some() {
        // Command-line paths are relative to the working directory.
        cfg.outputs = std::env::current_dir().map_err(anyhow::Error::from)?.join(&cfg.outputs);
    }
    match cli.command {
        Command::Validate => {
            let (_, table) = match pipeline::validate_stage(&cfg) {
                Ok(v) => v,
                Err(e) => {
                    let layout = artifacts::Layout::new(cfg.output_dir());
                    if let Ok(t) =
                        artifacts::read_json::<pipeline::ValidationTable>(&layout.file(artifacts::VALIDATION))
                    {
                        print!("{}", t.render());
                    }
                    return Err(e);
                }
            };
            print!("{}", table.render());
        }
        Command::Build => {
            let (_, lps) = pipeline::build_stage(&cfg)?;
            for lp in &lps {
                println!(
                    "{}: {} variables, {} rows, {} nonzeros",
                    lp.direction.as_str(),
                    lp.n_vars(),
                    lp.n_rows(),
                    lp.matrix.nnz()
                );
            }
        }
        Command::Solve => {
            let (min, max) = pipeline::solve_stage(&cfg)?;
            println!("lower {:.10}  upper {:.10}", min.value, max.value);
        }
        Command::Verify => {
            let [min, max] = pipeline::verify_stage(&cfg)?;
            for (name, v) in [("min", min), ("max", max)] {
                println!(
                    "{name}: max hedge violation {:e} (worst path {:?}), mean support gap {:e}",
                    v.subhedge.max_violation, v.subhedge.worst_path, v.support.mean_gap
                );
            }
        }
        Command::Bounds => {
            let r = pipeline::run_bounds(&cfg)?;
            let s = &r.summary;
            println!("lower {:.10}  upper {:.10}  width {:.10}", s.lower, s.upper, s.width);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
