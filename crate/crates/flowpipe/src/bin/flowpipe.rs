use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use flowpipe::cli::{self, StageError, EXIT_CONFIG};
use flowpipe::config::RunConfig;
use flowpipe::synth::{Motion, ObjectSpec, SceneSpec, Shape};

#[derive(Parser)]
#[command(name = "flowpipe", version, about = "Motion propagation and flow calibration pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct StageArgs {
    /// Path to a TOML run configuration
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Override the configured output directory
    #[arg(long, value_name = "DIR")]
    output: Option<PathBuf>,
    /// Override the configured master seed
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Print stage progress to stderr
    #[arg(long)]
    verbose: bool,
}

#[derive(Args)]
struct SynthArgs {
    /// Output directory for the generated sequence
    #[arg(long, value_name = "DIR")]
    output: PathBuf,
    /// Scene kind: disk | square | two-object
    #[arg(long, default_value = "disk")]
    kind: String,
    #[arg(long, default_value_t = 64)]
    width: usize,
    #[arg(long, default_value_t = 64)]
    height: usize,
    /// Number of frames (>= 2)
    #[arg(long, default_value_t = 8)]
    frames: usize,
    /// Scale applied to the first-frame mask to form the edited mask
    #[arg(long, default_value_t = 1.5)]
    edit_scale: f64,
    /// Object center x (defaults to a quarter of the width)
    #[arg(long)]
    center_x: Option<f64>,
    /// Object center y (defaults to half the height)
    #[arg(long)]
    center_y: Option<f64>,
    /// Disk radius or square half-width in pixels
    #[arg(long, default_value_t = 8.0)]
    size: f64,
    /// Translation per frame, x component
    #[arg(long, default_value_t = 2.0)]
    vx: f64,
    /// Translation per frame, y component
    #[arg(long, default_value_t = 0.0)]
    vy: f64,
    /// Rotation per frame in degrees (square scenes)
    #[arg(long, default_value_t = 5.0)]
    omega: f64,
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    #[arg(long)]
    verbose: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic sequence with ground-truth flow and masks
    Synth(SynthArgs),
    /// Propagate an edited first-frame mask and build pseudo flows
    Propagate(StageArgs),
    /// Calibrate pseudo flows over shape-inconsistent regions
    Calibrate(StageArgs),
    /// Compute warping error and companion metrics
    Metrics(StageArgs),
    /// Run synth (if configured), propagate, calibrate, metrics in order
    Pipeline(StageArgs),
}

fn load_config(args: &StageArgs) -> Result<RunConfig, StageError> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(out) = &args.output {
        cfg.output_root = out.clone();
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    cfg.validate().map_err(StageError::from)?;
    Ok(cfg)
}

fn synth_spec(args: &SynthArgs) -> Result<SceneSpec, StageError> {
    let seed = args.seed.unwrap_or(0);
    let center = (
        args.center_x.unwrap_or(args.width as f64 / 4.0),
        args.center_y.unwrap_or(args.height as f64 / 2.0),
    );
    let spec = match args.kind.as_str() {
        "disk" => SceneSpec::translating_disk(
            args.width,
            args.height,
            args.frames,
            center,
            args.size,
            (args.vx, args.vy),
            seed,
        ),
        "square" => SceneSpec::rotating_square(
            args.width,
            args.height,
            args.frames,
            center,
            args.size,
            args.omega.to_radians(),
            seed,
        ),
        "two-object" => SceneSpec::two_object(
            args.width,
            args.height,
            args.frames,
            ObjectSpec {
                shape: Shape::Disk,
                center,
                size: args.size,
                motion: Motion::Translate { vx: args.vx, vy: args.vy },
                intensity: [200, 60, 60],
            },
            ObjectSpec {
                shape: Shape::Square,
                center: (args.width as f64 * 0.75, args.height as f64 / 2.0),
                size: args.size,
                motion: Motion::Rotate { omega: args.omega.to_radians() },
                intensity: [60, 200, 60],
            },
            seed,
        ),
        other => {
            return Err(StageError::Config(format!(
                "unknown scene kind '{other}' (expected disk, square, or two-object)"
            )))
        }
    };
    spec.validate().map_err(StageError::from)?;
    Ok(spec)
}

fn run(command: &Command) -> Result<(), StageError> {
    match command {
        Command::Synth(args) => {
            let spec = synth_spec(args)?;
            if args.verbose {
                eprintln!(
                    "synth: {}x{} x{} frames -> {}",
                    args.width,
                    args.height,
                    args.frames,
                    args.output.display()
                );
            }
            cli::run_synth(&spec, args.edit_scale, &args.output)?;
            println!("synth: wrote sequence to {}", args.output.display());
            Ok(())
        }
        Command::Propagate(args) => {
            let cfg = load_config(args)?;
            if args.verbose {
                eprintln!("propagate: output {}", cfg.output_root.display());
            }
            cli::run_propagate(&cfg)?;
            println!("propagate: wrote pseudo flows to {}", cfg.output_root.display());
            Ok(())
        }
        Command::Calibrate(args) => {
            let cfg = load_config(args)?;
            if args.verbose {
                eprintln!("calibrate: output {}", cfg.output_root.display());
            }
            cli::run_calibrate(&cfg)?;
            println!("calibrate: wrote calibrated flows to {}", cfg.output_root.display());
            Ok(())
        }
        Command::Metrics(args) => {
            let cfg = load_config(args)?;
            if args.verbose {
                eprintln!("metrics: output {}", cfg.output_root.display());
            }
            cli::run_metrics(&cfg)?;
            println!("metrics: wrote report to {}", cfg.output_root.display());
            Ok(())
        }
        Command::Pipeline(args) => {
            let cfg = load_config(args)?;
            if args.verbose {
                eprintln!("pipeline: output {}", cfg.output_root.display());
            }
            cli::run_pipeline(&cfg)?;
            println!("pipeline: complete under {}", cfg.output_root.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help/--version are not errors
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            eprint!("{e}");
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    };
    match run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
