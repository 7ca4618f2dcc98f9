use std::path::Path;
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use safedrive_cli::{batch_exit_code, find_cases, load_case, CaseOutcome, CliError, EXIT_CONFIG, EXIT_PIPELINE};
use safedrive_core::image::ColorImage;
use safedrive_core::pipeline::{MetricsReport, PipelineError};
use safedrive_core::Error;

fn safedrive(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_safedrive"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn noise_image(path: &Path, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (320, 240);
    let data = (0..w * h).map(|_| [rng.random::<f32>(); 3]).collect();
    ColorImage::new(w, h, data).unwrap().save(path).unwrap();
}

/// A database of blank, overexposed captures next to a textured current frame.
fn unrelated_database(dir: &Path) {
    let mut manifest = String::new();
    for i in 0..3 {
        let name = format!("db_{i}.png");
        ColorImage::new(320, 240, vec![[0.97; 3]; 320 * 240])
            .unwrap()
            .save(&dir.join(&name))
            .unwrap();
        manifest.push_str(&format!("db_{i}\t45.0\t{:.6}\t{name}\n", -93.0 + 1e-5 * i as f64));
    }
    std::fs::write(dir.join("manifest.tsv"), manifest).unwrap();
    noise_image(&dir.join("current.png"), 99);
}

#[test]
fn invalid_threshold_file_exits_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("params.toml");
    std::fs::write(&config, "max_reprojection_px = -1.0\n").unwrap();
    let out = safedrive(&[
        "run",
        "--manifest",
        "missing.tsv",
        "--image",
        "missing.png",
        "--lat",
        "45",
        "--lon",
        "-93",
        "--config",
        config.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(EXIT_CONFIG), "{}", stderr(&out));
    assert!(stderr(&out).contains("max_reprojection_px"));
}

#[test]
fn unknown_flag_exits_with_config_code() {
    let out = safedrive(&["run", "--bogus"]);
    assert_eq!(out.status.code(), Some(EXIT_CONFIG));
}

#[test]
fn missing_manifest_names_ingest_stage() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("nope.tsv");
    let out = safedrive(&[
        "run",
        "--manifest",
        manifest.to_str().unwrap(),
        "--image",
        "x.png",
        "--lat",
        "45",
        "--lon",
        "-93",
    ]);
    assert_eq!(out.status.code(), Some(EXIT_PIPELINE));
    assert!(stderr(&out).contains("`ingest`"), "{}", stderr(&out));
}

#[test]
fn unrelated_database_fails_weak_overlap_at_pair_selection() {
    let dir = tempfile::tempdir().unwrap();
    unrelated_database(dir.path());
    let p = |name: &str| dir.path().join(name).to_str().unwrap().to_string();
    let out = safedrive(&[
        "run",
        "--manifest",
        &p("manifest.tsv"),
        "--image",
        &p("current.png"),
        "--lat",
        "45",
        "--lon",
        "-93",
        "--out",
        &p("out"),
    ]);
    let err = stderr(&out);
    assert_eq!(out.status.code(), Some(EXIT_PIPELINE), "{err}");
    assert!(
        err.contains("`select_best_pair`") && err.contains("weak overlap"),
        "{err}"
    );
    assert!(!dir.path().join("out").exists());
}

#[test]
fn synthetic_case_runs_through_batch() {
    let dir = tempfile::tempdir().unwrap();
    let case = dir.path().join("street_1");
    let out = safedrive(&["synth", "--out", case.to_str().unwrap(), "--seed", "1"]);
    assert!(out.status.success(), "{}", stderr(&out));

    let out = safedrive(&["batch", "--cases", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("average offset"), "{stdout}");

    let results = case.join("out");
    for name in ["overlay.png", "report.toml", "timing.toml"] {
        assert!(results.join(name).is_file(), "{name} missing");
    }
    let report: MetricsReport = toml::from_str(&std::fs::read_to_string(results.join("report.toml")).unwrap()).unwrap();
    assert_eq!(report.schema_version, safedrive_core::pipeline::REPORT_SCHEMA_VERSION);
    assert!(report.projection.average_offset_px.is_some());
}

#[test]
fn case_paths_resolve_against_the_case_directory() {
    let dir = tempfile::tempdir().unwrap();
    let case_dir = dir.path().join("c");
    std::fs::create_dir(&case_dir).unwrap();
    std::fs::write(
        case_dir.join("case.toml"),
        "manifest = \"manifest.tsv\"\nimage = \"/abs/current.png\"\nlatitude = 45.0\nlongitude = -93.0\ntruth = \"truth.txt\"\n\n[params]\n",
    )
    .unwrap();
    let config = load_case(&case_dir.join("case.toml")).unwrap();
    assert_eq!(config.manifest, case_dir.join("manifest.tsv"));
    assert_eq!(config.image, Path::new("/abs/current.png"));
    assert_eq!(config.truth.as_deref(), Some(case_dir.join("truth.txt").as_path()));

    assert_eq!(find_cases(dir.path()).unwrap(), vec![case_dir.join("case.toml")]);
    assert_eq!(find_cases(&case_dir).unwrap(), vec![case_dir.join("case.toml")]);
}

#[test]
fn case_with_invalid_thresholds_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("case.toml");
    std::fs::write(
        &path,
        "manifest = \"m.tsv\"\nimage = \"c.png\"\nlatitude = 0.0\nlongitude = 0.0\n\n[params.fundamental]\nconfidence = 1.5\n",
    )
    .unwrap();
    let err = load_case(&path).unwrap_err();
    assert_eq!(err.exit_code(), EXIT_CONFIG);
}

#[test]
fn batch_code_prefers_config_errors() {
    let outcome = |result| CaseOutcome {
        case: "x".into(),
        result,
    };
    let pipeline = || {
        Err(CliError::Pipeline(PipelineError {
            stage: "relative_pose",
            source: Error::DegenerateRays,
        }))
    };
    assert_eq!(batch_exit_code(&[outcome(pipeline())]), EXIT_PIPELINE);
    assert_eq!(
        batch_exit_code(&[outcome(pipeline()), outcome(Err(CliError::Config("bad".into())))]),
        EXIT_CONFIG
    );
    assert_eq!(batch_exit_code(&[]), 0);
}
