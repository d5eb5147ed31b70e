use clap::{Args, Parser, Subcommand};
use misfit_cli::{default_material, emit_outputs, run, CliError, Modes, RunConfig};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "misfit", version, about = "Misfit-interface energy experiments")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Subcommand, Clone, Copy)]
enum Verb {
    /// Corrector constant on three nested meshes
    Corrector,
    /// Optimal theta and energy split over a geometric R sweep
    Sweep,
    /// Threshold size above which dislocations lower the energy
    Crossover,
    /// Energy of the pyramid array construction against the side length
    Pyramid,
    /// Logarithmic blow-up of the quadratic transition energy
    Diverge,
    All,
}

#[derive(Args)]
struct Opts {
    /// Material parameter file (`key = value` lines)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Finest corrector mesh, a multiple of 4
    #[arg(long, global = true, default_value_t = 16)]
    mesh: usize,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads; all cores when omitted
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true)]
    r_min: Option<f64>,
    #[arg(long, global = true)]
    r_max: Option<f64>,
    #[arg(long, global = true)]
    points: Option<usize>,
    /// Growth exponent of the envelope density
    #[arg(long, global = true, default_value_t = 1.5)]
    p: f64,
    /// Mesh grading exponent toward the bottom edges
    #[arg(long, global = true, default_value_t = 2.0)]
    grading: f64,
    /// Bulk constant; the corrector constant when omitted
    #[arg(long, global = true)]
    k: Option<f64>,
}

fn modes(verb: Verb) -> Modes {
    let mut m = Modes::default();
    match verb {
        Verb::Corrector => m.corrector = true,
        Verb::Sweep => m.sweep = true,
        Verb::Crossover => m.crossover = true,
        Verb::Pyramid => m.pyramid = true,
        Verb::Diverge => m.diverge = true,
        Verb::All => m = Modes::all(),
    }
    m
}

fn build_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let o = &cli.opts;
    let mut cfg = match &o.config {
        Some(path) => RunConfig::from_file(path, &o.out)?,
        None => RunConfig::new(default_material(), &o.out),
    };
    cfg.modes = modes(cli.verb);
    cfg.mesh = o.mesh;
    cfg.seed = o.seed;
    cfg.p = o.p;
    cfg.grading = o.grading;
    cfg.k = o.k;
    if let Some(v) = o.r_min {
        cfg.sweep.r_min = v;
    }
    if let Some(v) = o.r_max {
        cfg.sweep.r_max = v;
    }
    if let Some(v) = o.points {
        cfg.sweep.points = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    let cfg = build_config(cli)?;
    if let Some(n) = cli.opts.threads {
        if n == 0 {
            return Err(CliError::Validation("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Validation(e.to_string()))?;
    }
    let outputs = run(&cfg)?;
    for path in emit_outputs(&outputs, &cfg.out_dir)? {
        println!("wrote {}", path.display());
    }
    outputs.summary().write(std::io::stdout()).map_err(|e| CliError::Io {
        path: "<stdout>".into(),
        source: e,
    })?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
