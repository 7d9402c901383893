use std::path::PathBuf;
use std::process::ExitCode as ProcessExit;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use maxsurf::config::{load_config, parse_grid_size, ConfigError, Overrides, RunConfig};
use maxsurf::lie_group::ModelParams;
use maxsurf::model_spaces::classify;
use maxsurf::pipeline::{self, ExitCode, PipelineError};

#[derive(Parser)]
#[command(name = "maxsurf", version, about = "Maximal spacelike surfaces in G(mu1, mu2)")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Name the space G(mu1, mu2).
    Classify(ParamArgs),
    /// Sectional curvatures of G(mu1, mu2).
    Curvature(ParamArgs),
    /// Solve for Weierstrass data; writes pair_f.csv and pair_g.csv.
    Solve(RunArgs),
    /// Solve and synthesize; writes surface.obj and surface.csv.
    Synth(RunArgs),
    /// Solve, synthesize and verify; writes report.json.
    Verify(RunArgs),
    /// Solve, synthesize and write the configured products without verifying.
    Export(RunArgs),
    /// Full pipeline.
    Run(RunArgs),
}

#[derive(Args)]
struct ParamArgs {
    #[arg(long, allow_hyphen_values = true)]
    mu1: f64,
    #[arg(long, allow_hyphen_values = true)]
    mu2: f64,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    mu1: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    mu2: Option<f64>,
    /// Samples per axis as <nu>x<nv>.
    #[arg(long, value_parser = parse_grid_size)]
    grid: Option<(usize, usize)>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn load(&self) -> Result<RunConfig, ConfigError> {
        let o = Overrides { mu1: self.mu1, mu2: self.mu2, grid: self.grid, out: self.out.clone() };
        load_config(&self.config, &o)
    }
}

fn configure_threads() -> anyhow::Result<()> {
    let Ok(v) = std::env::var("MAXSURF_THREADS") else { return Ok(()) };
    let n: usize = v.trim().parse().with_context(|| format!("MAXSURF_THREADS={v}"))?;
    if n == 0 {
        bail!("MAXSURF_THREADS must be at least 1");
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn print_written(paths: &[PathBuf]) {
    for p in paths {
        eprintln!("wrote {}", p.display());
    }
}

fn pipeline_exit(e: PipelineError) -> ExitCode {
    eprintln!("error: {e}");
    e.exit_code()
}

fn dispatch(cmd: Command) -> ExitCode {
    let args = match cmd {
        Command::Classify(a) => {
            let c = classify(&ModelParams::new(a.mu1, a.mu2));
            println!("{}", c.name);
            println!("{}", c.description);
            return ExitCode::Success;
        }
        Command::Curvature(a) => {
            let k = ModelParams::new(a.mu1, a.mu2).sectional_curvatures();
            println!("K01 {:.16e}", k.k01);
            println!("K12 {:.16e}", k.k12);
            println!("K02 {:.16e}", k.k02);
            println!("constant_curvature {}", k.constant_curvature);
            println!("class {}", k.space_class);
            return ExitCode::Success;
        }
        Command::Solve(ref a)
        | Command::Synth(ref a)
        | Command::Verify(ref a)
        | Command::Export(ref a)
        | Command::Run(ref a) => a,
    };
    let cfg = match args.load() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}: {e}", args.config.display());
            return match e {
                ConfigError::Io { .. } => ExitCode::Io,
                _ => ExitCode::ConfigInvalid,
            };
        }
    };

    if matches!(cmd, Command::Verify(_) | Command::Run(_)) {
        let outcome = pipeline::execute(&cfg);
        eprint!("{}", pipeline::summary(&outcome.report));
        let written = if matches!(cmd, Command::Run(_)) {
            pipeline::write_outputs(&cfg, &outcome)
        } else {
            pipeline::write_report(&cfg.out_dir, &outcome.report).map(|p| vec![p])
        };
        return match written {
            Ok(paths) => {
                print_written(&paths);
                if let Some(err) = &outcome.report.solver.error {
                    eprintln!("error: solver: {err}");
                }
                outcome.exit
            }
            Err(e) => pipeline_exit(e),
        };
    }

    let sol = match pipeline::solve(&cfg) {
        Ok(s) => s,
        Err(e) => return pipeline_exit(e.into()),
    };
    eprintln!("solver converged in {} iterations, residual {:.3e}", sol.iterations, sol.final_residual);
    if sol.warnings.nonholomorphic {
        eprintln!("warning: seed is not holomorphic (defect {:.3e})", sol.warnings.holomorphy_defect);
    }
    let result = match cmd {
        Command::Solve(_) => pipeline::write_solution_fields(&cfg.out_dir, Some(&sol), None),
        Command::Synth(_) => {
            let phi = pipeline::synthesize_solution(&cfg, &sol);
            synth_outputs(&cfg, &phi)
        }
        Command::Export(_) => {
            let phi = pipeline::synthesize_solution(&cfg, &sol);
            export(&cfg, &sol, &phi)
        }
        _ => unreachable!("handled above"),
    };
    match result {
        Ok(paths) => {
            print_written(&paths);
            ExitCode::Success
        }
        Err(e) => pipeline_exit(e),
    }
}

fn synth_outputs(cfg: &RunConfig, phi: &maxsurf::synthesis::ImmersionField) -> Result<Vec<PathBuf>, PipelineError> {
    let mut written = vec![pipeline::write_mesh(&cfg.out_dir, phi)?];
    written.extend(pipeline::write_solution_fields(&cfg.out_dir, None, Some(phi))?);
    Ok(written)
}

fn export(
    cfg: &RunConfig,
    sol: &maxsurf::weierstrass::DbarSolution,
    phi: &maxsurf::synthesis::ImmersionField,
) -> Result<Vec<PathBuf>, PipelineError> {
    use maxsurf::config::Product;
    let mut written = Vec::new();
    for product in &cfg.outputs {
        match product {
            Product::Mesh => written.push(pipeline::write_mesh(&cfg.out_dir, phi)?),
            Product::Fields => written.extend(pipeline::write_solution_fields(&cfg.out_dir, Some(sol), Some(phi))?),
            Product::Quadric => written.extend(pipeline::write_quadric(&cfg.out_dir, &pipeline::params(cfg), phi)?),
            Product::Report => {}
        }
    }
    Ok(written)
}

fn main() -> ProcessExit {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e:#}");
        return ProcessExit::from(ExitCode::ConfigInvalid as u8);
    }
    ProcessExit::from(dispatch(cli.command) as u8)
}
