//! End-to-end run: retrieval, two-view reconstruction, registration and
//! lane projection, plus the offset evaluation and overlay.

use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::{Matrix2, SymmetricEigen, Vector2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::database::{
    rank_candidates, NearbyRecord, RankedCandidate, SceneIndex, DEFAULT_MIN_OVERLAP, DEFAULT_SEARCH_RADIUS_M,
};
use crate::epipolar::{
    estimate_fundamental, estimate_relative_pose, fundamental_from_pose, FundamentalMatrix, FundamentalRansac,
};
use crate::error::{Error, Result};
use crate::features::{extract_features, match_bidirectional, FeatureParams, ViewFeatures};
use crate::geometry::{parallax_angle, reprojection_error, triangulate_point, CameraIntrinsics, Pixel, RigidPose};
use crate::image::{ColorImage, Dims};
use crate::lane_matching::{match_lane_pixels, triangulate_lane_markers, LaneMatchParams};
use crate::lanes::{detect_lane_pixels, LaneDetectionParams};
use crate::polar::build_polar_maps_oriented;
use crate::registration::{
    feature_distribution_metrics, match_to_model, project_lane_markers, solve_pnp, DispersityThresholds, ModelPoint,
    PnpParams, ProjectedLanePoint, RegistrationResult, StreetModel,
};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Every tunable threshold of a run. Loadable from TOML; missing keys take defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineParams {
    pub search_radius_m: f64,
    /// Second-best candidate needs at least this many matches.
    pub min_overlap: usize,
    /// Below this second-best count a WeakOverlap warning is recorded.
    pub weak_overlap_warning: usize,
    /// Reprojection bound for both feature and lane triangulation.
    pub max_reprojection_px: f64,
    /// Fraction of feature matches with sub-pixel parallax that triggers NarrowBaseline.
    pub narrow_baseline_fraction: f64,
    /// Feature points seen under a smaller ray angle stay out of the model;
    /// their depth is too uncertain to anchor registration.
    pub min_triangulation_angle_deg: f64,
    pub intrinsics: CameraIntrinsics,
    pub features: FeatureParams,
    pub fundamental: FundamentalRansac,
    pub lanes: LaneDetectionParams,
    pub lane_matching: LaneMatchParams,
    pub pnp: PnpParams,
    pub dispersity: DispersityThresholds,
}

impl Default for PipelineParams {
    fn default() -> Self {
        Self {
            search_radius_m: DEFAULT_SEARCH_RADIUS_M,
            min_overlap: DEFAULT_MIN_OVERLAP,
            weak_overlap_warning: 2 * DEFAULT_MIN_OVERLAP,
            max_reprojection_px: 2.0,
            narrow_baseline_fraction: 0.5,
            min_triangulation_angle_deg: 0.5,
            intrinsics: CameraIntrinsics::reference_phone(),
            features: FeatureParams::default(),
            fundamental: FundamentalRansac::default(),
            lanes: LaneDetectionParams::default(),
            lane_matching: LaneMatchParams::default(),
            pnp: PnpParams::default(),
            dispersity: DispersityThresholds::default(),
        }
    }
}

fn ensure(ok: bool, message: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Config(message()))
    }
}

impl PipelineParams {
    pub fn from_toml(text: &str) -> Result<Self> {
        let params: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        self.intrinsics.validate()?;
        ensure(self.search_radius_m > 0.0, || "search_radius_m must be positive".into())?;
        ensure(self.max_reprojection_px > 0.0, || {
            "max_reprojection_px must be positive".into()
        })?;
        ensure((0.0..=1.0).contains(&self.narrow_baseline_fraction), || {
            "narrow_baseline_fraction must lie in [0, 1]".into()
        })?;
        ensure(
            self.min_triangulation_angle_deg >= 0.0 && self.min_triangulation_angle_deg < 90.0,
            || "min_triangulation_angle_deg must lie in [0, 90)".into(),
        )?;
        let f = &self.features;
        ensure(f.max_features >= 1, || {
            "features.max_features must be at least 1".into()
        })?;
        ensure(f.min_spacing >= 0.0, || {
            "features.min_spacing must be non-negative".into()
        })?;
        ensure(f.max_hamming <= 256, || {
            "features.max_hamming must be at most 256".into()
        })?;
        let r = &self.fundamental;
        ensure(r.threshold > 0.0, || "fundamental.threshold must be positive".into())?;
        ensure(r.confidence > 0.0 && r.confidence < 1.0, || {
            "fundamental.confidence must lie in (0, 1)".into()
        })?;
        ensure(r.max_iterations >= 1, || {
            "fundamental.max_iterations must be at least 1".into()
        })?;
        let h = &self.lanes.hsv;
        ensure(h.yellow_hue_min <= h.yellow_hue_max, || {
            "lanes.hsv yellow hue range is empty".into()
        })?;
        for (name, v) in [
            ("yellow_saturation_min", h.yellow_saturation_min),
            ("yellow_value_min", h.yellow_value_min),
            ("white_saturation_max", h.white_saturation_max),
            ("white_value_min", h.white_value_min),
            ("exposure_percentile", h.exposure_percentile),
            ("exposure_floor", h.exposure_floor),
        ] {
            ensure((0.0..=1.0).contains(&v), || {
                format!("lanes.hsv.{name} must lie in [0, 1]")
            })?;
        }
        let c = &self.lanes.canny;
        ensure(c.sigma > 0.0, || "lanes.canny.sigma must be positive".into())?;
        if !(c.low_ratio >= 0.0 && c.low_ratio < c.high_ratio && c.high_ratio <= 1.0) {
            return Err(Error::InvalidThresholds {
                low: c.low_ratio,
                high: c.high_ratio,
            });
        }
        let m = &self.lane_matching;
        ensure(m.row_band >= 0.0, || {
            "lane_matching.row_band must be non-negative".into()
        })?;
        ensure((0.0..=2.0).contains(&m.max_score), || {
            "lane_matching.max_score must lie in [0, 2]".into()
        })?;
        let p = &self.pnp;
        ensure(p.threshold > 0.0, || "pnp.threshold must be positive".into())?;
        ensure(p.confidence > 0.0 && p.confidence < 1.0, || {
            "pnp.confidence must lie in (0, 1)".into()
        })?;
        ensure(p.max_iterations >= 1, || "pnp.max_iterations must be at least 1".into())?;
        let d = &self.dispersity;
        ensure(
            d.min_dispersity >= 0.0 && d.max_center_offset >= 0.0 && (0.0..=0.5).contains(&d.min_side_fraction),
            || "dispersity thresholds must be non-negative and min_side_fraction at most 0.5".into(),
        )?;
        Ok(())
    }

    /// Uses `seed` for both RANSAC stages.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.fundamental.seed = seed;
        self.pnp.seed = seed;
        self
    }
}

/// Inputs of one run from disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub manifest: PathBuf,
    pub image: PathBuf,
    pub latitude: f64,
    pub longitude: f64,
    pub truth: Option<PathBuf>,
    pub params: PipelineParams,
}

/// Ground-truth lane segment in the current image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruthLine {
    pub start: Pixel,
    pub end: Pixel,
}

impl TruthLine {
    /// Parses the sidecar format: one line `u1 v1 u2 v2`.
    pub fn parse(text: &str) -> Result<Self> {
        let line = text
            .lines()
            .map(str::trim)
            .find(|l| !l.is_empty() && !l.starts_with('#'))
            .ok_or_else(|| Error::Config("truth file has no segment line".into()))?;
        let values: Vec<f64> = line
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|e| Error::Config(format!("truth value `{t}`: {e}")))
            })
            .collect::<Result<_>>()?;
        if values.len() != 4 || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config(format!(
                "truth line needs 4 finite numbers, got `{line}`"
            )));
        }
        Ok(Self {
            start: Pixel::new(values[0], values[1]),
            end: Pixel::new(values[2], values[3]),
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Self::parse(&text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Warning {
    WeakOverlap,
    NarrowBaseline,
    LowDispersity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMetrics {
    pub current_features: usize,
    pub pair_matches: usize,
    pub fundamental_inliers: usize,
    pub model_points: usize,
    pub mean_reprojection_error_px: f64,
    pub narrow_parallax_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaneMetrics {
    pub pixels_a: usize,
    pub pixels_b: usize,
    pub matches: usize,
    pub retained: usize,
    pub discarded: usize,
    pub mean_reprojection_error_px: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistrationMetrics {
    pub correspondences: usize,
    pub inliers: usize,
    pub mean_projection_error_px: f64,
    pub dispersity: f64,
    pub horizontal_center: f64,
    pub minority_side_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionMetrics {
    pub projected_points: usize,
    pub in_frame_points: usize,
    /// `None` without a truth line or with fewer than two in-frame points.
    pub average_offset_px: Option<f64>,
}

/// Deterministic run metrics. Wall-clock timings are kept out of the
/// serialized report (see [`MetricsReport::timing_toml`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub schema_version: u32,
    pub selected_pair: [String; 2],
    pub warnings: Vec<Warning>,
    pub features: FeatureMetrics,
    pub lanes: LaneMetrics,
    pub registration: RegistrationMetrics,
    pub projection: ProjectionMetrics,
    pub candidates: Vec<RankedCandidate>,
    #[serde(skip)]
    pub timings: Vec<StageTiming>,
}

impl MetricsReport {
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("serializing report: {e}")))
    }

    pub fn timing_toml(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Timing<'a> {
            stage: &'a [StageTiming],
        }
        toml::to_string(&Timing { stage: &self.timings })
            .map_err(|e| Error::Config(format!("serializing timings: {e}")))
    }
}

/// An error tagged with the stage that produced it.
#[derive(Debug, thiserror::Error)]
#[error("stage `{stage}` failed: {source}")]
pub struct PipelineError {
    pub stage: &'static str,
    #[source]
    pub source: Error,
}

impl PipelineError {
    pub fn is_config(&self) -> bool {
        matches!(self.source, Error::Config(_) | Error::InvalidThresholds { .. })
    }
}

trait StageExt<T> {
    fn stage(self, stage: &'static str) -> std::result::Result<T, PipelineError>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> std::result::Result<T, PipelineError> {
        self.map_err(|source| PipelineError { stage, source })
    }
}

struct Clock {
    timings: Vec<StageTiming>,
    started: Instant,
}

impl Clock {
    fn new() -> Self {
        Self {
            timings: Vec::new(),
            started: Instant::now(),
        }
    }

    fn lap(&mut self, stage: &str) {
        let now = Instant::now();
        self.timings.push(StageTiming {
            stage: stage.to_string(),
            seconds: (now - self.started).as_secs_f64(),
        });
        self.started = now;
    }
}

/// A database view handed to [`run_views`].
#[derive(Debug, Clone)]
pub struct CandidateView {
    pub record: NearbyRecord,
    pub image: ColorImage,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub overlay: ColorImage,
    pub report: MetricsReport,
    pub model: StreetModel,
    pub registration: RegistrationResult,
    pub projected: Vec<ProjectedLanePoint>,
    /// Pose of the second selected view relative to the first (unit baseline).
    pub relative_pose: RigidPose,
    pub fundamental: FundamentalMatrix,
    /// Indices of the selected views in the candidate list.
    pub selected: (usize, usize),
    pub fitted_line: Option<FittedLine>,
}

/// Loads the database and current image from disk and runs the pipeline.
pub fn run_safedrive(config: &RunConfig) -> std::result::Result<RunOutput, PipelineError> {
    config.params.validate().stage("config")?;
    let index = SceneIndex::ingest(&config.manifest).stage("ingest")?;
    let nearby = index
        .candidates_near(config.latitude, config.longitude, config.params.search_radius_m)
        .stage("candidates_near")?;
    let current = ColorImage::load(&config.image).stage("load_images")?;
    let candidates: Vec<CandidateView> = nearby
        .into_par_iter()
        .map(|record| {
            let image = ColorImage::load(&record.record.image_path)?;
            Ok(CandidateView { record, image })
        })
        .collect::<Result<_>>()
        .stage("load_images")?;
    let truth = config
        .truth
        .as_deref()
        .map(TruthLine::read)
        .transpose()
        .stage("load_truth")?;
    run_views(&current, &candidates, truth.as_ref(), &config.params)
}

/// Runs every stage on in-memory images.
pub fn run_views(
    current: &ColorImage,
    candidates: &[CandidateView],
    truth: Option<&TruthLine>,
    params: &PipelineParams,
) -> std::result::Result<RunOutput, PipelineError> {
    params.validate().stage("config")?;
    let k = params.intrinsics;
    let mut clock = Clock::new();
    let mut warnings = Vec::new();

    if candidates.len() < 2 {
        return Err(Error::InsufficientCandidates(candidates.len())).stage("select_best_pair");
    }
    let current_gray = current.to_gray();
    let current_features = extract_features(&current_gray, &params.features).stage("features")?;
    let grays: Vec<_> = candidates.par_iter().map(|c| c.image.to_gray()).collect();
    let described: Vec<ViewFeatures> = grays
        .par_iter()
        .map(|g| extract_features(g, &params.features))
        .collect::<Result<_>>()
        .stage("features")?;
    clock.lap("features");

    let pairs: Vec<(&NearbyRecord, &ViewFeatures)> = candidates.iter().map(|c| &c.record).zip(&described).collect();
    let ranking = rank_candidates(
        &current_features,
        &pairs,
        params.features.max_hamming,
        params.min_overlap,
    )
    .stage("select_best_pair")?;
    let (first, second) = ranking.best_pair();
    let (ia, ib) = (first.index, second.index);
    if second.match_count < params.weak_overlap_warning {
        warnings.push(Warning::WeakOverlap);
    }
    clock.lap("select_best_pair");

    let (fa, fb) = (&described[ia], &described[ib]);
    let matches = match_bidirectional(&fa.descriptors, &fb.descriptors, params.features.max_hamming);
    let pa: Vec<Pixel> = matches.iter().map(|m| fa.points[m.index_a].position).collect();
    let pb: Vec<Pixel> = matches.iter().map(|m| fb.points[m.index_b].position).collect();
    let estimate = estimate_fundamental(&pa, &pb, &params.fundamental).stage("estimate_fundamental")?;
    clock.lap("estimate_fundamental");

    let pose_a = RigidPose::identity();
    let relative =
        estimate_relative_pose(&estimate, &k, &pa, &pb, params.fundamental.threshold).stage("relative_pose")?;
    let pose_b = relative.pose;
    let in_a: Vec<Pixel> = relative.inlier_indices.iter().map(|&i| pa[i]).collect();
    let in_b: Vec<Pixel> = relative.inlier_indices.iter().map(|&i| pb[i]).collect();
    let fundamental = fundamental_from_pose(&pose_b, &k, &k).stage("relative_pose")?;
    clock.lap("relative_pose");

    let narrow = in_a
        .iter()
        .zip(&in_b)
        .filter(|(a, b)| parallax_angle(a, b, &pose_a, &pose_b, &k) < 1.0 / k.fx.max(k.fy))
        .count();
    let narrow_fraction = narrow as f64 / in_a.len() as f64;
    if narrow_fraction > params.narrow_baseline_fraction {
        warnings.push(Warning::NarrowBaseline);
    }
    let mut model = StreetModel {
        source_image_ids: vec![first.id.clone(), second.id.clone()],
        ..StreetModel::default()
    };
    let min_angle = params.min_triangulation_angle_deg.to_radians();
    let mut feature_error_sum = 0.0;
    for &i in &relative.inlier_indices {
        let (a, b) = (pa[i], pb[i]);
        if parallax_angle(&a, &b, &pose_a, &pose_b, &k) < min_angle {
            continue;
        }
        let Ok(t) = triangulate_point(&a, &b, &pose_a, &pose_b, &k) else {
            continue;
        };
        if !t.in_front {
            continue;
        }
        let (Ok(ea), Ok(eb)) = (
            reprojection_error(&t.point, &a, &pose_a, &k),
            reprojection_error(&t.point, &b, &pose_b, &k),
        ) else {
            continue;
        };
        if ea > params.max_reprojection_px || eb > params.max_reprojection_px {
            continue;
        }
        feature_error_sum += 0.5 * (ea + eb);
        let m = matches[i];
        model.feature_points.push(ModelPoint {
            position: t.point,
            descriptors: vec![fa.descriptors[m.index_a], fb.descriptors[m.index_b]],
            observations: vec![a, b],
        });
    }
    if model.feature_points.is_empty() {
        return Err(Error::TooFewPoints { needed: 1, got: 0 }).stage("triangulate_features");
    }
    let mean_feature_error = feature_error_sum / model.feature_points.len() as f64;
    clock.lap("triangulate_features");

    let (img_a, img_b) = (&candidates[ia].image, &candidates[ib].image);
    let (lanes_a, lanes_b) = rayon::join(
        || detect_lane_pixels(img_a, &params.lanes),
        || detect_lane_pixels(img_b, &params.lanes),
    );
    let (lanes_a, lanes_b) = (lanes_a.stage("lane_detection")?, lanes_b.stage("lane_detection")?);
    clock.lap("lane_detection");

    let (map_a, map_b) = build_polar_maps_oriented(&fundamental, img_a.dims(), img_b.dims(), &in_a, &in_b)
        .stage("polar_rectification")?;
    clock.lap("polar_rectification");

    let lane_corrs = match_lane_pixels(
        &lanes_a,
        &lanes_b,
        (&map_a, &map_b),
        (&grays[ia], &grays[ib]),
        &params.lane_matching,
    );
    clock.lap("lane_matching");

    let lane_tri = triangulate_lane_markers(&lane_corrs, &pose_a, &pose_b, &k, params.max_reprojection_px)
        .stage("lane_triangulation")?;
    let lane_error = lane_tri.mean_reprojection_error().unwrap_or(0.0);
    model.lane_points = lane_tri.points.clone();
    clock.lap("lane_triangulation");

    let corrs = match_to_model(
        &model,
        &current_features.descriptors,
        &current_features.pixels(),
        params.features.max_hamming,
    )
    .stage("match_to_model")?;
    let pnp_input: Vec<_> = corrs.iter().map(|c| (c.point, c.pixel)).collect();
    let registration = solve_pnp(&pnp_input, &k, &params.pnp).stage("solve_pnp")?;
    clock.lap("solve_pnp");

    let dims = current.dims();
    let inlier_pixels: Vec<Pixel> = registration.inlier_indices.iter().map(|&i| corrs[i].pixel).collect();
    let distribution = feature_distribution_metrics(&inlier_pixels, dims)
        .ok_or(Error::TooFewPoints {
            needed: 2,
            got: inlier_pixels.len(),
        })
        .stage("solve_pnp")?;
    if distribution.is_low(&params.dispersity) {
        warnings.push(Warning::LowDispersity);
    }

    let projected = project_lane_markers(&model, &registration, &k, dims);
    let in_frame: Vec<Pixel> = projected.iter().filter(|p| p.in_frame).map(|p| p.pixel).collect();
    let fitted_line = fit_line(&in_frame);
    clock.lap("project_lanes");

    let average_offset_px = match truth {
        Some(t) if in_frame.len() >= 2 => Some(evaluate_offset(&in_frame, t, dims).stage("evaluate")?),
        _ => None,
    };
    let overlay = draw_overlay(current, &in_frame, fitted_line.as_ref());
    clock.lap("evaluate");

    let report = MetricsReport {
        schema_version: REPORT_SCHEMA_VERSION,
        selected_pair: [first.id.clone(), second.id.clone()],
        warnings,
        features: FeatureMetrics {
            current_features: current_features.points.len(),
            pair_matches: matches.len(),
            fundamental_inliers: relative.inlier_indices.len(),
            model_points: model.feature_points.len(),
            mean_reprojection_error_px: mean_feature_error,
            narrow_parallax_fraction: narrow_fraction,
        },
        lanes: LaneMetrics {
            pixels_a: lanes_a.len(),
            pixels_b: lanes_b.len(),
            matches: lane_corrs.len(),
            retained: lane_tri.points.len(),
            discarded: lane_tri.discarded,
            mean_reprojection_error_px: lane_error,
        },
        registration: RegistrationMetrics {
            correspondences: corrs.len(),
            inliers: registration.inlier_count,
            mean_projection_error_px: registration.mean_projection_error,
            dispersity: distribution.dispersity,
            horizontal_center: distribution.horizontal_center,
            minority_side_fraction: distribution.minority_side_fraction,
        },
        projection: ProjectionMetrics {
            projected_points: projected.len(),
            in_frame_points: in_frame.len(),
            average_offset_px,
        },
        candidates: ranking.ranking.clone(),
        timings: clock.timings,
    };
    Ok(RunOutput {
        overlay,
        report,
        model,
        registration,
        projected,
        relative_pose: pose_b,
        fundamental,
        selected: (ia, ib),
        fitted_line,
    })
}

/// Writes `overlay.png`, `report.toml` and `timing.toml` into `dir`.
pub fn write_outputs(output: &RunOutput, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    output.overlay.save(&dir.join("overlay.png"))?;
    let write = |name: &str, text: String| {
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))
    };
    write("report.toml", output.report.to_toml()?)?;
    write("timing.toml", output.report.timing_toml()?)?;
    Ok(())
}

/// Total-least-squares line through a point set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FittedLine {
    pub point: Vector2<f64>,
    /// Unit direction.
    pub direction: Vector2<f64>,
}

impl FittedLine {
    pub fn distance(&self, p: &Vector2<f64>) -> f64 {
        let normal = Vector2::new(-self.direction.y, self.direction.x);
        normal.dot(&(p - self.point)).abs()
    }
}

/// `None` for fewer than two distinct points.
pub fn fit_line(points: &[Pixel]) -> Option<FittedLine> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mean = points.iter().map(Pixel::to_vector).sum::<Vector2<f64>>() / n;
    let cov = points.iter().fold(Matrix2::zeros(), |acc, p| {
        let d = p.to_vector() - mean;
        acc + d * d.transpose()
    });
    let eig = SymmetricEigen::new(cov);
    let major = if eig.eigenvalues[0] >= eig.eigenvalues[1] { 0 } else { 1 };
    if eig.eigenvalues[major] <= 0.0 {
        return None;
    }
    let mut direction: Vector2<f64> = eig.eigenvectors.column(major).into();
    // Fixed orientation keeps downstream output deterministic.
    if direction.y < 0.0 || (direction.y == 0.0 && direction.x < 0.0) {
        direction = -direction;
    }
    Some(FittedLine { point: mean, direction })
}

/// Mean distance from 100 samples along the truth segment to the
/// least-squares line through the in-frame projected pixels.
pub fn evaluate_offset(projected: &[Pixel], truth: &TruthLine, dims: Dims) -> Result<f64> {
    let inside: Vec<Pixel> = projected.iter().copied().filter(|p| dims.contains(p.u, p.v)).collect();
    let line = fit_line(&inside).ok_or(Error::TooFewPoints {
        needed: 2,
        got: inside.len(),
    })?;
    let (s, e) = (truth.start.to_vector(), truth.end.to_vector());
    const SAMPLES: usize = 100;
    let total: f64 = (0..SAMPLES)
        .map(|i| line.distance(&(s + (e - s) * (i as f64 / (SAMPLES - 1) as f64))))
        .sum();
    Ok(total / SAMPLES as f64)
}

const POINT_COLOR: [f32; 3] = [1.0, 0.0, 0.0];
const LINE_COLOR: [f32; 3] = [0.0, 1.0, 0.0];

/// Current image with projected lane pixels as 3-px disks and the fitted line.
pub fn draw_overlay(current: &ColorImage, points: &[Pixel], line: Option<&FittedLine>) -> ColorImage {
    let mut out = current.clone();
    let (w, h) = (out.width as isize, out.height as isize);
    let mut put = |x: isize, y: isize, c: [f32; 3]| {
        if x >= 0 && y >= 0 && x < w && y < h {
            out.set(x as usize, y as usize, c);
        }
    };
    if let Some(l) = line {
        let reach = (w as f64).hypot(h as f64);
        let steps = (4.0 * reach) as isize;
        for i in -steps..=steps {
            let p = l.point + l.direction * (i as f64 * 0.5);
            put(p.x.round() as isize, p.y.round() as isize, LINE_COLOR);
        }
    }
    for p in points {
        let (cx, cy) = (p.u.round() as isize, p.v.round() as isize);
        for dy in -1..=1 {
            for dx in -1..=1 {
                put(cx + dx, cy + dy, POINT_COLOR);
            }
        }
    }
    out
}
