use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use safedrive_cli::{batch_exit_code, execute, find_cases, load_params, run_batch, CliError, EXIT_OK};
use safedrive_core::pipeline::{MetricsReport, RunConfig};
use safedrive_synth::{write_case, SceneSpec};

#[derive(Parser)]
#[command(
    name = "safedrive",
    version,
    about = "Project lane markers from a street-image database into the current frame"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the pipeline on one current image.
    Run {
        /// Tab-separated database manifest: id, latitude, longitude, image path.
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        image: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        lat: f64,
        #[arg(long, allow_negative_numbers = true)]
        lon: f64,
        /// Candidate search radius in metres.
        #[arg(long)]
        radius: Option<f64>,
        /// Ground-truth lane segment sidecar (`u1 v1 u2 v2`).
        #[arg(long)]
        truth: Option<PathBuf>,
        /// TOML file of pipeline thresholds.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Seed for both RANSAC stages.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run every `case.toml` below a directory, concurrently.
    Batch {
        #[arg(long)]
        cases: PathBuf,
    },
    /// Write a synthetic street scene as a runnable case directory.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// RMS geometric pixel noise of every rendered view.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        /// Facade panel coverage on the left and right side, in [0, 1].
        #[arg(long, num_args = 2, value_names = ["LEFT", "RIGHT"])]
        density: Option<Vec<f64>>,
    },
}

fn summarize(label: &str, report: &MetricsReport) {
    let offset = report
        .projection
        .average_offset_px
        .map_or_else(|| "n/a".to_string(), |o| format!("{o:.3} px"));
    println!(
        "{label}: pair {} + {}, {} lane points in frame, average offset {offset}",
        report.selected_pair[0], report.selected_pair[1], report.projection.in_frame_points
    );
    for w in &report.warnings {
        eprintln!("{label}: warning: {w:?}");
    }
}

fn report_error(label: &str, e: &CliError) -> i32 {
    match e {
        CliError::Pipeline(p) => eprintln!("{label}: pipeline failed at stage `{}`: {}", p.stage, p.source),
        CliError::Config(m) => eprintln!("{label}: {m}"),
    }
    e.exit_code()
}

#[allow(clippy::too_many_arguments)]
fn run(
    manifest: PathBuf,
    image: PathBuf,
    lat: f64,
    lon: f64,
    radius: Option<f64>,
    truth: Option<PathBuf>,
    config: Option<PathBuf>,
    out: &Path,
    seed: Option<u64>,
) -> Result<MetricsReport, CliError> {
    let mut params = load_params(config.as_deref())?;
    if let Some(r) = radius {
        params.search_radius_m = r;
    }
    if let Some(s) = seed {
        params = params.with_seed(s);
    }
    let config = RunConfig {
        manifest,
        image,
        latitude: lat,
        longitude: lon,
        truth,
        params,
    };
    execute(&config, out)
}

fn synth(out: &Path, seed: u64, noise: f64, density: Option<Vec<f64>>) -> Result<(), CliError> {
    let mut spec = SceneSpec::street(seed);
    spec.noise.pixel_sigma = noise;
    if let Some(d) = density {
        spec.facades.density = [d[0], d[1]];
    }
    let files = write_case(out, &spec).map_err(|e| CliError::Config(e.to_string()))?;
    println!("wrote {}", files.dir.join(safedrive_cli::CASE_FILE).display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run {
            manifest,
            image,
            lat,
            lon,
            radius,
            truth,
            config,
            out,
            seed,
        } => match run(manifest, image, lat, lon, radius, truth, config, &out, seed) {
            Ok(report) => {
                summarize("run", &report);
                EXIT_OK
            }
            Err(e) => report_error("run", &e),
        },
        Command::Batch { cases } => match find_cases(&cases) {
            Ok(found) => {
                let outcomes = run_batch(&found);
                for o in &outcomes {
                    let label = o.case.parent().unwrap_or(&o.case).display().to_string();
                    match &o.result {
                        Ok(report) => summarize(&label, report),
                        Err(e) => {
                            report_error(&label, e);
                        }
                    }
                }
                batch_exit_code(&outcomes)
            }
            Err(e) => report_error("batch", &e),
        },
        Command::Synth {
            out,
            seed,
            noise,
            density,
        } => match synth(&out, seed, noise, density) {
            Ok(()) => EXIT_OK,
            Err(e) => report_error("synth", &e),
        },
    };
    ExitCode::from(code as u8)
}
