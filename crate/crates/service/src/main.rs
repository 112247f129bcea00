use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lvam_core::amm::Phase;
use lvam_core::detectors::SweepConfig;
use lvam_core::geometry::LongAxisFitConfig;
use lvam_core::heatmap::LossConfig;
use lvam_core::metrics::sdr_thresholds;
use lvam_core::{Config, Phantom};
use lvam_service::api::{router, AppState};
use lvam_service::bundle::{discover, load_bundle};
use lvam_service::runner::{materialize_phantom, run_batch, BatchOptions, ContourKind, DetectorKind, RunOptions};

#[derive(Parser)]
#[command(name = "lvam", version)]
#[command(about = "LV linear measurements from virtual anatomical M-mode images")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write synthetic phantom study bundles
    Phantom(PhantomArgs),
    /// Run the pipeline over study bundles and write results and reports
    Run(RunArgs),
    /// Serve the review API over HTTP
    Serve(ServeArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    /// Fixed textbook geometry (192x192)
    Default,
    /// Randomized geometry and dimensions derived from the seed (256x256)
    Random,
}

#[derive(Args)]
struct PhantomArgs {
    /// Directory receiving one bundle per phantom
    #[arg(long)]
    out: PathBuf,
    /// Seed of the first phantom; later ones use seed+1, seed+2, ...
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    count: u64,
    #[arg(long, value_enum, default_value = "random")]
    preset: Preset,
    /// Gaussian intensity noise (intensities are in [0, 1])
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Frames per cycle (even)
    #[arg(long)]
    frames: Option<usize>,
    /// Swept scanlines used for the ground-truth contour
    #[arg(long, default_value_t = 20)]
    n_lv: usize,
}

#[derive(Args, Clone)]
struct PipelineArgs {
    #[arg(long, value_enum, default_value = "profile")]
    detector: DetectorKind,
    #[arg(long, value_enum, default_value = "weak")]
    contour: ContourKind,
    /// Swept scanlines for weak contours
    #[arg(long, default_value_t = 20)]
    n_lv: usize,
    /// Fraction of the base-to-border distance covered by the sweep
    #[arg(long, default_value_t = 0.6)]
    sweep_fraction: f64,
    /// Samples along the scanline (AMM height)
    #[arg(long, default_value_t = 64)]
    samples: usize,
    /// Ridge penalty of the long-axis fit
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Coordinate-loss weight recorded with weak labels
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// ERE stabilizer (px) for loss weights
    #[arg(long, default_value_t = 1.0)]
    epsilon: f64,
    /// Scanline half length in px (default 1.2x the basal LVID)
    #[arg(long)]
    half_length: Option<f64>,
    /// Oracle detector landmark noise (px)
    #[arg(long, default_value_t = 0.0)]
    oracle_noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl PipelineArgs {
    fn options(&self) -> RunOptions {
        RunOptions {
            pipeline: Config {
                samples: self.samples,
                fit: LongAxisFitConfig { alpha: self.alpha },
                sweep: SweepConfig { n_lv: self.n_lv, fraction: self.sweep_fraction },
                half_length: self.half_length,
                loss: LossConfig { lambda: self.lambda, epsilon: self.epsilon },
            },
            detector: self.detector,
            contour: self.contour,
            oracle_noise_px: self.oracle_noise,
            seed: self.seed,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum PhaseArg {
    Ed,
    Es,
    Both,
}

#[derive(Args)]
struct RunArgs {
    /// Bundle directories, or directories containing bundles
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "both")]
    phase: PhaseArg,
    /// Largest SDR threshold (cm)
    #[arg(long, default_value_t = 0.2)]
    sdr_max: f64,
    /// Number of SDR thresholds from 0 to --sdr-max
    #[arg(long, default_value_t = 21)]
    sdr_steps: usize,
    #[command(flatten)]
    pipeline: PipelineArgs,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long, env = "LVAM_PORT", default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    #[command(flatten)]
    pipeline: PipelineArgs,
}

fn phantom(args: PhantomArgs) -> Result<(), String> {
    let sweep = SweepConfig { n_lv: args.n_lv, ..SweepConfig::default() };
    for seed in args.seed..args.seed + args.count {
        let mut cfg = match args.preset {
            Preset::Default => Phantom { seed, ..Phantom::default() },
            Preset::Random => Phantom::random(seed),
        };
        cfg.noise_sigma = args.noise;
        if let Some(frames) = args.frames {
            cfg.frames = frames;
        }
        let dir = args.out.join(format!("phantom_{seed:04}"));
        materialize_phantom(&dir, &cfg, &sweep).map_err(|e| e.to_string())?;
        println!("{}", dir.display());
    }
    Ok(())
}

fn run(args: RunArgs) -> Result<bool, String> {
    let phases = match args.phase {
        PhaseArg::Ed => vec![Phase::Ed],
        PhaseArg::Es => vec![Phase::Es],
        PhaseArg::Both => Phase::ALL.to_vec(),
    };
    let batch = BatchOptions { phases, thresholds: sdr_thresholds(args.sdr_max, args.sdr_steps) };
    let summary = run_batch(&args.inputs, &args.out, &args.pipeline.options(), &batch).map_err(|e| e.to_string())?;
    for f in &summary.failures {
        let phase = f.phase.map(|p| p.to_string()).unwrap_or_else(|| "-".into());
        let stage = f.stage.map(|s| s.to_string()).unwrap_or_else(|| "-".into());
        eprintln!("failed: {} [{phase}] stage={stage}: {}", f.study, f.message);
    }
    println!("{} studies, {} results, {} failures", summary.studies, summary.results, summary.failures.len());
    if let Some(r) = &summary.report {
        print!("{}", r.to_csv());
    }
    Ok(summary.failures.is_empty())
}

fn serve(args: ServeArgs) -> Result<(), String> {
    let dirs = discover(&args.inputs).map_err(|e| e.to_string())?;
    if dirs.is_empty() {
        return Err("no study bundles found".into());
    }
    let studies = dirs.iter().map(|d| load_bundle(d)).collect::<Result<Vec<_>, _>>().map_err(|e| e.to_string())?;
    let state = AppState::new(studies, args.pipeline.options()).map_err(|e| e.to_string())?;
    let rt = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    rt.block_on(async {
        let addr = format!("{}:{}", args.host, args.port);
        let listener = tokio::net::TcpListener::bind(&addr).await.map_err(|e| format!("{addr}: {e}"))?;
        eprintln!("listening on http://{addr}");
        axum::serve(listener, router(state)).await.map_err(|e| e.to_string())
    })
}

fn main() -> ExitCode {
    let outcome = match Cli::parse().command {
        Command::Phantom(a) => phantom(a).map(|_| true),
        Command::Run(a) => run(a),
        Command::Serve(a) => serve(a).map(|_| true),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
