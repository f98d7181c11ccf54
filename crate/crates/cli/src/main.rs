//! Pipeline command line: `track`, `fuse`, `eval` and `synth` subcommands.
//!
//! Exit codes: 0 success, 3 tracking failure (odometry terminated early),
//! 4 configuration error, 5 I/O or data error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use photovo_core::eval::ScaleMode;
use photovo_core::pipeline::{self, ErrorKind, PipelineConfig, PipelineError, ReportUnits};

const EXIT_TRACKING_FAILURE: u8 = 3;
const EXIT_CONFIG_ERROR: u8 = 4;
const EXIT_IO_ERROR: u8 = 5;

#[derive(Parser)]
#[command(
    name = "photovo",
    about = "Dense photometric odometry, TSDF fusion and depth evaluation for pseudo-RGBD sequences",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Track a sequence and write trajectory, keyframes and diagnostics.
    Track {
        /// Sequence manifest JSON.
        #[arg(long)]
        manifest: PathBuf,
        /// Pipeline configuration JSON; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory; falls back to the config's output_dir.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fuse tracked keyframes into a TSDF volume and extract a mesh.
    Fuse {
        /// Sequence manifest JSON.
        #[arg(long)]
        manifest: PathBuf,
        /// Keyframe index written by `track`.
        #[arg(long)]
        keyframes: PathBuf,
        /// TUM trajectory covering the keyframes.
        #[arg(long)]
        trajectory: PathBuf,
        /// Pipeline configuration JSON; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output mesh path (ASCII PLY).
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate predicted depth maps against ground truth.
    Eval {
        /// Directory of predicted 16-bit depth PNGs.
        #[arg(long)]
        pred: PathBuf,
        /// Directory of ground-truth 16-bit depth PNGs.
        #[arg(long)]
        gt: PathBuf,
        /// Per-image scale alignment: none, median_ratio or ratio_median.
        #[arg(long, default_value = "none")]
        scale: ScaleMode,
        /// Report units: mm or m.
        #[arg(long, default_value = "mm")]
        units: String,
        /// Depth scale of the prediction PNGs (meters per stored unit);
        /// falls back to pred/intrinsics.json.
        #[arg(long)]
        pred_scale: Option<f64>,
        /// Depth scale of the ground-truth PNGs; falls back to
        /// gt/intrinsics.json.
        #[arg(long)]
        gt_scale: Option<f64>,
        /// Output report path (JSON; a CSV sibling is written alongside).
        #[arg(long)]
        out: PathBuf,
    },
    /// Render a synthetic pseudo-RGBD sequence with exact ground truth.
    Synth {
        /// Scene description JSON.
        #[arg(long)]
        scene: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Noise seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn verbosity() -> u8 {
    match std::env::var("PHOTOVO_LOG").as_deref() {
        Ok("0") | Ok("quiet") => 0,
        Ok("2") | Ok("debug") => 2,
        _ => 1,
    }
}

fn info(msg: &str) {
    if verbosity() >= 1 {
        eprintln!("{msg}");
    }
}

fn load_config(path: &Option<PathBuf>) -> Result<PipelineConfig, PipelineError> {
    match path {
        Some(p) => PipelineConfig::load(p),
        None => Ok(PipelineConfig::default()),
    }
}

fn exit_for(err: &PipelineError) -> ExitCode {
    eprintln!("error: {err}");
    match err.kind() {
        ErrorKind::Config => ExitCode::from(EXIT_CONFIG_ERROR),
        ErrorKind::Io => ExitCode::from(EXIT_IO_ERROR),
    }
}

fn parse_units(units: &str) -> Result<ReportUnits, PipelineError> {
    match units {
        "mm" => Ok(ReportUnits::Millimeters),
        "m" => Ok(ReportUnits::Meters),
        other => Err(PipelineError::Config(format!(
            "unknown units {other:?}; expected mm or m"
        ))),
    }
}

fn run(cli: Cli) -> Result<ExitCode, PipelineError> {
    match cli.command {
        Command::Track {
            manifest,
            config,
            out,
        } => {
            let config = load_config(&config)?;
            let out = out
                .or_else(|| config.output_dir.clone())
                .ok_or_else(|| {
                    PipelineError::Config(
                        "no output directory: pass --out or set output_dir in the config".into(),
                    )
                })?;
            let summary = pipeline::run_track(&manifest, &config, &out)?;
            info(&format!(
                "tracked {} frames, {} keyframes, {:.1} ms/frame ({:.2} s total)",
                summary.frames_tracked,
                summary.keyframe_count,
                summary.mean_frame_ms,
                summary.total_seconds
            ));
            if let Some(frame) = summary.failure_frame {
                info(&format!("tracking FAILED at frame {frame}"));
                return Ok(ExitCode::from(EXIT_TRACKING_FAILURE));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Fuse {
            manifest,
            keyframes,
            trajectory,
            config,
            out,
        } => {
            let config = load_config(&config)?;
            let summary = pipeline::run_fuse(&manifest, &keyframes, &trajectory, &config, &out)?;
            info(&format!(
                "fused {} views into {:?} voxels ({} total): {} vertices, {} triangles, {:.2} s integration",
                summary.views_integrated,
                summary.voxel_dims,
                summary.voxel_count,
                summary.vertex_count,
                summary.triangle_count,
                summary.integrate_seconds
            ));
            Ok(ExitCode::SUCCESS)
        }
        Command::Eval {
            pred,
            gt,
            scale,
            units,
            pred_scale,
            gt_scale,
            out,
        } => {
            let units = parse_units(&units)?;
            let summary = pipeline::run_eval(&pred, &gt, scale, units, pred_scale, gt_scale, &out)?;
            let m = &summary.aggregate;
            info(&format!(
                "evaluated {} images: abs_rel {:.4}, sq_rel {:.4}, rmse {:.4}, rmse_log {:.4}, d1 {:.4}, d2 {:.4}, d3 {:.4}",
                summary.images, m.abs_rel, m.sq_rel, m.rmse, m.rmse_log, m.delta1, m.delta2, m.delta3
            ));
            Ok(ExitCode::SUCCESS)
        }
        Command::Synth { scene, out, seed } => {
            let summary = pipeline::run_synth(&scene, &out, seed)?;
            info(&format!(
                "wrote {} synthetic frames to {}",
                summary.frames,
                summary.out_dir.display()
            ));
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Help and version requests are not errors.
            use clap::error::ErrorKind as ClapKind;
            let _ = err.print();
            return match err.kind() {
                ClapKind::DisplayHelp | ClapKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_CONFIG_ERROR),
            };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(err) => exit_for(&err),
    }
}
