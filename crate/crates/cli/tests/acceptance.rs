//! End-to-end acceptance suite. Every criterion prints one PASS/FAIL line;
//! the test fails if any criterion fails.

use std::path::PathBuf;
use std::time::Instant;

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use safedrive_cli::load_case;
use safedrive_core::database::{haversine_m, GeoImageRecord, NearbyRecord};
use safedrive_core::epipolar::{
    estimate_fundamental, estimate_relative_pose, fundamental_from_pose, FundamentalMatrix, FundamentalRansac,
};
use safedrive_core::geometry::{project, reprojection_error, triangulate_point};
use safedrive_core::image::{ColorImage, Dims, Mask};
use safedrive_core::lane_matching::{triangulate_lane_markers, LaneCorrespondence, LanePoint3D};
use safedrive_core::lanes::{detect_lane_pixels, LaneDetectionParams};
use safedrive_core::pipeline::{
    run_safedrive, run_views, CandidateView, MetricsReport, PipelineParams, TruthLine, Warning,
};
use safedrive_core::polar::build_polar_maps_oriented;
use safedrive_core::registration::{project_lane_markers, solve_pnp, PnpParams, RegistrationResult, StreetModel};
use safedrive_core::{CameraIntrinsics, Pixel, Point3D, RigidPose};
use safedrive_synth::case::geo_position;
use safedrive_synth::correspondences::{pair_sample, registration_sample, MIN_OUTLIER_DISPLACEMENT};
use safedrive_synth::{generate_scene, write_case, Scene, SceneSpec};

const DIMS: Dims = Dims {
    width: 1280,
    height: 720,
};

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn k() -> CameraIntrinsics {
    CameraIntrinsics::reference_phone()
}

fn angle_between(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    a.cross(b).norm().atan2(a.dot(b))
}

fn random_pixel(rng: &mut impl Rng) -> Pixel {
    Pixel::new(
        rng.random_range(0.0..DIMS.width as f64 - 1.0),
        rng.random_range(0.0..DIMS.height as f64 - 1.0),
    )
}

fn scale_invariance() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let k = k();
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let rotvec = Vector3::new(
            rng.random_range(-0.2..0.2),
            rng.random_range(-0.2..0.2),
            rng.random_range(-0.2..0.2),
        );
        let translation = Vector3::new(
            rng.random_range(-3.0..3.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-5.0..5.0),
        );
        let pose = RigidPose::from_rotation_vector(rotvec, translation);
        let lambda = 10f64.powf(rng.random_range(-3.0..3.0));
        let lane_points: Vec<LanePoint3D> = (0..200)
            .map(|source| {
                let cam = Point3D::from(k.unproject(&random_pixel(&mut rng)) * rng.random_range(2.0..80.0));
                LanePoint3D {
                    position: Point3D::from(pose.inverse().transform(&cam)),
                    reproj_error_a: 0.0,
                    reproj_error_b: 0.0,
                    source,
                }
            })
            .collect();
        let model = StreetModel {
            lane_points,
            ..StreetModel::default()
        };
        let registered = |pose: RigidPose| RegistrationResult {
            pose,
            inlier_count: 0,
            inlier_indices: Vec::new(),
            mean_projection_error: 0.0,
        };
        let plain = project_lane_markers(&model, &registered(pose), &k, DIMS);
        let scaled = project_lane_markers(
            &model.scaled(lambda),
            &registered(pose.with_scaled_translation(lambda)),
            &k,
            DIMS,
        );
        if plain.len() != scaled.len() {
            return outcome(false, format!("visible point count changed under scale {lambda}"));
        }
        for (p, q) in plain.iter().zip(&scaled) {
            let rel = p.pixel.distance(&q.pixel) / p.pixel.to_vector().norm().max(1.0);
            worst = worst.max(rel);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-9 && secs < 5.0,
        format!("max relative pixel deviation {worst:.2e} over 100 scenes, {secs:.2} s"),
    )
}

fn triangulation() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let k = k();
    let mean_error = |sigma: f64, rng: &mut ChaCha8Rng| -> (f64, f64) {
        let s = pair_sample(rng, &k, DIMS, 1000, sigma, 0.0);
        let errors: Vec<f64> = s
            .observed_a
            .iter()
            .zip(&s.observed_b)
            .map(|(a, b)| {
                let x = triangulate_point(a, b, &s.pose_a, &s.pose_b, &k)
                    .expect("triangulates")
                    .point;
                let ea = reprojection_error(&x, a, &s.pose_a, &k).expect("projects");
                let eb = reprojection_error(&x, b, &s.pose_b, &k).expect("projects");
                0.5 * (ea + eb)
            })
            .collect();
        let max = errors.iter().copied().fold(0.0, f64::max);
        (errors.iter().sum::<f64>() / errors.len() as f64, max)
    };
    let (_, clean_max) = mean_error(0.0, &mut rng);
    let (noisy_mean, _) = mean_error(0.5, &mut rng);
    let secs = start.elapsed().as_secs_f64();
    outcome(
        clean_max < 1e-6 && noisy_mean < 1.5 && secs < 10.0,
        format!("noiseless max {clean_max:.2e} px, 0.5 px noise mean {noisy_mean:.3} px over 1000 points, {secs:.2} s"),
    )
}

/// The fundamental matrix printed for the paper's main test case, with its
/// intrinsics and recovered rotation and translation.
fn printed_fixture() -> (Matrix3<f64>, CameraIntrinsics, Matrix3<f64>, Vector3<f64>) {
    let f = Matrix3::new(
        3.7989e-07, -0.0005, 0.2287, 0.0005, 1.3512e-06, -0.2502, -0.2294, 0.2476, 1.0,
    );
    let k = CameraIntrinsics::new(1261.46807, 1259.44016, 619.89385, 356.46599).expect("valid intrinsics");
    let r = Matrix3::new(
        0.999996, 0.002211, -0.001646, -0.002212, 0.999997, -0.000380, 0.001645, 0.000383, 0.999999,
    );
    let t = Vector3::new(-0.069823, 0.096280, 0.992902);
    (f, k, r, t)
}

fn singular_ratio(m: &Matrix3<f64>) -> f64 {
    let s = m.singular_values();
    s.min() / s.max()
}

fn fundamental() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let k = k();
    let (mut rank_worst, mut sampson_worst, mut rot_worst, mut dir_worst): (f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0);
    let params = FundamentalRansac::default();
    for _ in 0..50 {
        let s = pair_sample(&mut rng, &k, DIMS, 300, 0.5, 0.1);
        let est = match estimate_fundamental(&s.observed_a, &s.observed_b, &params) {
            Ok(e) => e,
            Err(e) => return outcome(false, format!("estimation failed: {e}")),
        };
        rank_worst = rank_worst.max(singular_ratio(est.f.matrix()));
        for &i in &est.inlier_indices {
            sampson_worst = sampson_worst.max(est.residuals[i]);
        }
        let pose = match estimate_relative_pose(&est, &k, &s.observed_a, &s.observed_b, params.threshold) {
            Ok(r) => r.pose,
            Err(e) => return outcome(false, format!("pose recovery failed: {e}")),
        };
        rot_worst = rot_worst.max(pose.rotation_angle_to(&s.pose_b).to_degrees());
        dir_worst = dir_worst.max(angle_between(&pose.translation, &s.pose_b.translation).to_degrees());
    }

    let (printed, pk, pr, pt) = printed_fixture();
    let printed_ratio = singular_ratio(&printed);
    let projected_ratio = FundamentalMatrix::new(printed)
        .map(|f| singular_ratio(f.matrix()))
        .unwrap_or(f64::NAN);
    let consistency = RigidPose::new(RigidPose::orthonormalize(&pr), pt)
        .and_then(|pose| fundamental_from_pose(&pose, &pk, &pk))
        .map(|f| f.cosine_similarity(&printed))
        .unwrap_or(0.0);

    outcome(
        rank_worst < 1e-12
            && sampson_worst <= params.threshold
            && rot_worst <= 0.5
            && dir_worst <= 0.5
            && printed_ratio < 1e-6
            && projected_ratio < 1e-12
            && consistency > 0.999,
        format!(
            "50 pairs: sigma3/sigma1 <= {rank_worst:.1e}, inlier Sampson <= {sampson_worst:.3} px, \
             rotation <= {rot_worst:.3} deg, direction <= {dir_worst:.3} deg; printed F sigma3/sigma1 \
             {printed_ratio:.1e} ({projected_ratio:.1e} after projection), cosine to K^-T [t]x R K^-1 {consistency:.4}"
        ),
    )
}

fn polar_rectification() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let k = k();
    let (mut worst_round_trip, mut round_trips, mut worst_aligned): (f64, usize, f64) = (0.0, 0, 1.0);
    for _ in 0..10 {
        let s = pair_sample(&mut rng, &k, DIMS, 500, 0.0, 0.0);
        let f = fundamental_from_pose(&s.pose_b, &k, &k).expect("valid pose");
        let (ma, mb) = match build_polar_maps_oriented(&f, DIMS, DIMS, &s.clean_a, &s.clean_b) {
            Ok(m) => m,
            Err(e) => return outcome(false, format!("map construction failed: {e}")),
        };
        for map in [&ma, &mb] {
            for _ in 0..500 {
                let p = random_pixel(&mut rng);
                let err = map
                    .to_polar(&p)
                    .map(|q| map.from_polar(&q).distance(&p))
                    .unwrap_or(f64::INFINITY);
                worst_round_trip = worst_round_trip.max(err);
                round_trips += 1;
            }
        }
        let aligned = s
            .clean_a
            .iter()
            .zip(&s.clean_b)
            .filter(|(a, b)| match (ma.to_polar(a), mb.to_polar(b)) {
                (Ok(qa), Ok(qb)) => (qa.angle_row - qb.angle_row).abs() <= 1.0,
                _ => false,
            })
            .count() as f64
            / s.clean_a.len() as f64;
        worst_aligned = worst_aligned.min(aligned);
    }
    outcome(
        worst_round_trip <= 0.5 && round_trips >= 10_000 && worst_aligned >= 0.99,
        format!(
            "round trip <= {worst_round_trip:.1e} px over {round_trips} pixels; worst scene aligns {:.1}% of 500 truth pairs within 1 row",
            100.0 * worst_aligned
        ),
    )
}

fn within(mask: &Mask, x: usize, y: usize, r: usize) -> bool {
    (y.saturating_sub(r)..=(y + r).min(mask.height - 1))
        .any(|yy| (x.saturating_sub(r)..=(x + r).min(mask.width - 1)).any(|xx| mask.get(xx, yy)))
}

/// Painted pixels with an unpainted 4-neighbour, and the reverse.
fn paint_boundary(paint: &Mask) -> Mask {
    let mut out = Mask::new(paint.width, paint.height);
    for y in 0..paint.height {
        for x in 0..paint.width {
            let v = paint.get(x, y);
            let differs = (x > 0 && paint.get(x - 1, y) != v)
                || (x + 1 < paint.width && paint.get(x + 1, y) != v)
                || (y > 0 && paint.get(x, y - 1) != v)
                || (y + 1 < paint.height && paint.get(x, y + 1) != v);
            out.set(x, y, differs);
        }
    }
    out
}

fn lane_detection() -> Outcome {
    let (mut detected, mut correct, mut labelled, mut found) = (0usize, 0usize, 0usize, 0usize);
    for seed in [1, 2] {
        let spec = SceneSpec::street(seed);
        let scene = Scene::new(spec.clone()).expect("valid spec");
        for view in 0..spec.database_poses.len() {
            let r = scene.render(view);
            let paint = Mask {
                width: spec.width,
                height: spec.height,
                data: r.paint.iter().map(Option::is_some).collect(),
            };
            let boundary = paint_boundary(&paint);
            let set = detect_lane_pixels(&r.image, &LaneDetectionParams::default()).expect("detection runs");
            let mut hits = Mask::new(spec.width, spec.height);
            for p in &set.pixels {
                let (x, y) = (p.u as usize, p.v as usize);
                hits.set(x, y, true);
                detected += 1;
                correct += usize::from(within(&boundary, x, y, 1));
            }
            for (x, y) in boundary.iter_set().filter(|&(x, y)| paint.get(x, y)) {
                labelled += 1;
                found += usize::from(within(&hits, x, y, 1));
            }
        }
    }
    let precision = correct as f64 / detected.max(1) as f64;
    let recall = found as f64 / labelled.max(1) as f64;
    outcome(
        precision >= 0.9 && recall >= 0.95,
        format!("precision {precision:.3} ({detected} detections), recall {recall:.3} ({labelled} boundary pixels), 1 px tolerance"),
    )
}

fn lane_triangulation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let k = k();
    let spec = SceneSpec::street(1);
    let scene = Scene::new(spec.clone()).expect("valid spec");
    let segments = scene.lane_segments();
    let (pose_a, pose_b) = (spec.database_poses[2], spec.database_poses[3]);
    let mut corrs = Vec::new();
    let mut mismatched = Vec::new();
    let noise = Normal::new(0.0, 0.5).expect("finite sigma");
    while corrs.len() < 1000 {
        let seg = &segments[rng.random_range(0..segments.len())];
        let t: f64 = rng.random_range(0.0..1.0);
        let mut p = seg.start + (seg.end - seg.start) * t;
        p.x += rng.random_range(-0.5..0.5) * seg.width_m;
        let (Ok(a), Ok(b)) = (project(&p, &pose_a, &k), project(&p, &pose_b, &k)) else {
            continue;
        };
        if !(a.in_front() && b.in_front() && DIMS.contains(a.pixel.u, a.pixel.v) && DIMS.contains(b.pixel.u, b.pixel.v))
        {
            continue;
        }
        let jitter = |q: Pixel, rng: &mut ChaCha8Rng| Pixel::new(q.u + noise.sample(rng), q.v + noise.sample(rng));
        let bad = rng.random_bool(0.2);
        let pixel_b = if bad {
            loop {
                let q = random_pixel(&mut rng);
                if q.distance(&b.pixel) >= MIN_OUTLIER_DISPLACEMENT {
                    break q;
                }
            }
        } else {
            jitter(b.pixel, &mut rng)
        };
        corrs.push(LaneCorrespondence {
            pixel_a: jitter(a.pixel, &mut rng),
            pixel_b,
            angle_row: 0.0,
            score: 0.0,
            color: seg.color,
        });
        mismatched.push(bad);
    }
    let tri = match triangulate_lane_markers(&corrs, &pose_a, &pose_b, &k, 2.0) {
        Ok(t) => t,
        Err(e) => return outcome(false, format!("triangulation failed: {e}")),
    };
    let injected = mismatched.iter().filter(|&&m| m).count();
    let kept_bad = tri.points.iter().filter(|p| mismatched[p.source]).count();
    let rejected = 1.0 - kept_bad as f64 / injected as f64;
    let mean = tri.mean_reprojection_error().unwrap_or(f64::INFINITY);
    outcome(
        rejected >= 0.95 && mean < 1.5,
        format!(
            "{:.1}% of {injected} injected mismatches rejected, {} points retained with mean reprojection {mean:.3} px",
            100.0 * rejected,
            tri.points.len()
        ),
    )
}

fn pnp() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let k = k();
    let params = PnpParams::default();
    let (mut clean_worst, mut noisy_worst, mut leaked, mut mean_err): (f64, f64, usize, f64) = (0.0, 0.0, 0, 0.0);
    for _ in 0..50 {
        let s = registration_sample(&mut rng, &k, DIMS, 100, 0.0, 0.0);
        match solve_pnp(&s.correspondences(), &k, &params) {
            Ok(r) => clean_worst = clean_worst.max(r.pose.rotation_angle_to(&s.pose).to_degrees()),
            Err(e) => return outcome(false, format!("noiseless PnP failed: {e}")),
        }
        let s = registration_sample(&mut rng, &k, DIMS, 100, 0.5, 0.3);
        match solve_pnp(&s.correspondences(), &k, &params) {
            Ok(r) => {
                noisy_worst = noisy_worst.max(r.pose.rotation_angle_to(&s.pose).to_degrees());
                leaked += r.inlier_indices.iter().filter(|&&i| s.outlier[i]).count();
                mean_err += r.mean_projection_error / 50.0;
            }
            Err(e) => return outcome(false, format!("noisy PnP failed: {e}")),
        }
    }
    outcome(
        clean_worst < 0.1 && noisy_worst < 0.5 && leaked == 0,
        format!(
            "noiseless rotation <= {clean_worst:.2e} deg; 0.5 px + 30% outliers: rotation <= {noisy_worst:.3} deg, \
             {leaked} outliers accepted, mean projection error {mean_err:.3} px over 50 trials"
        ),
    )
}

/// In-memory inputs of one synthetic case, with database records placed
/// at the cameras' geographic positions.
fn scene_inputs(spec: &SceneSpec) -> (ColorImage, Vec<CandidateView>, Option<TruthLine>) {
    let (mut images, truth) = generate_scene(spec).expect("scene renders");
    let current = images.pop().expect("current view");
    let (lat, lon) = geo_position(spec.origin, &spec.current_pose);
    let candidates = images
        .into_iter()
        .zip(&spec.database_poses)
        .enumerate()
        .map(|(i, (image, pose))| {
            let (la, lo) = geo_position(spec.origin, pose);
            CandidateView {
                record: NearbyRecord {
                    record: GeoImageRecord {
                        id: format!("db_{i:02}"),
                        latitude: la,
                        longitude: lo,
                        image_path: PathBuf::from(format!("db_{i:02}.png")),
                        capture_meta: String::new(),
                    },
                    distance_m: haversine_m(lat, lon, la, lo),
                },
                image,
            }
        })
        .collect();
    (current, candidates, truth.truth_line)
}

fn run_scene(spec: &SceneSpec) -> Result<MetricsReport, String> {
    let (current, candidates, truth) = scene_inputs(spec);
    let params = PipelineParams {
        intrinsics: spec.intrinsics,
        ..PipelineParams::default()
    };
    run_views(&current, &candidates, truth.as_ref(), &params)
        .map(|o| o.report)
        .map_err(|e| e.to_string())
}

const END_TO_END_SEEDS: std::ops::RangeInclusive<u64> = 1..=8;

fn end_to_end() -> Outcome {
    let mut lines = Vec::new();
    let mut pass = true;
    for (sigma, bound) in [(0.0, 2.0), (0.5, 8.0)] {
        let offsets: Vec<f64> = END_TO_END_SEEDS
            .map(|seed| {
                let mut spec = SceneSpec::street(seed);
                spec.noise.pixel_sigma = sigma;
                run_scene(&spec)
                    .ok()
                    .and_then(|r| r.projection.average_offset_px)
                    .unwrap_or(f64::INFINITY)
            })
            .collect();
        let mean = offsets.iter().sum::<f64>() / offsets.len() as f64;
        let max = offsets.iter().copied().fold(0.0, f64::max);
        let under = offsets.iter().filter(|&&o| o < bound).count();
        pass &= mean < bound;
        lines.push(format!(
            "noise {sigma} px: mean offset {mean:.3} px (bound {bound}), max {max:.3}, {under}/{} cases under the bound",
            offsets.len()
        ));
    }
    outcome(pass, lines.join("; "))
}

/// Spearman correlation with average ranks for ties.
fn spearman(x: &[f64], y: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            for &k in &idx[i..=j] {
                r[k] = 0.5 * (i + j) as f64 + 1.0;
            }
            i = j + 1;
        }
        r
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

/// Facade coverage (left, right) of the ensemble; each runs on three seeds.
const COVERAGE: [[f64; 2]; 10] = [
    [0.7, 0.7],
    [0.5, 0.5],
    [0.3, 0.3],
    [0.15, 0.15],
    [0.7, 0.3],
    [0.3, 0.7],
    [0.7, 0.1],
    [0.1, 0.7],
    [0.7, 0.0],
    [0.0, 0.7],
];

fn dispersity_trend() -> Outcome {
    let (mut dispersity, mut offset) = (Vec::new(), Vec::new());
    let (mut failed, mut one_sided, mut one_sided_flagged) = (0, 0, 0);
    for seed in 1..=3 {
        for coverage in COVERAGE {
            let mut spec = SceneSpec::street(seed);
            spec.noise.pixel_sigma = 0.5;
            spec.facades.density = coverage;
            let result = run_scene(&spec);
            let is_one_sided = coverage.contains(&0.0);
            one_sided += usize::from(is_one_sided);
            match result {
                Ok(report) => {
                    dispersity.push(report.registration.dispersity);
                    offset.push(report.projection.average_offset_px.unwrap_or(f64::INFINITY));
                    one_sided_flagged += usize::from(is_one_sided && report.warnings.contains(&Warning::LowDispersity));
                }
                Err(_) => {
                    failed += 1;
                    one_sided_flagged += usize::from(is_one_sided);
                }
            }
        }
    }
    let rho = spearman(&dispersity, &offset);
    outcome(
        rho <= -0.5 && one_sided_flagged == one_sided && dispersity.len() >= 24,
        format!(
            "Spearman {rho:.3} over {} of 30 scenes ({failed} stopped with a pipeline error); \
             {one_sided_flagged}/{one_sided} one-sided scenes warned LowDispersity or stopped",
            dispersity.len()
        ),
    )
}

fn performance_and_determinism() -> (Outcome, Outcome) {
    let dir = tempfile::tempdir().expect("temp dir");
    let mut spec = SceneSpec::street(1);
    spec.noise.pixel_sigma = 0.5;
    write_case(dir.path(), &spec).expect("case written");
    let config = load_case(&dir.path().join(safedrive_cli::CASE_FILE)).expect("case loads");

    let start = Instant::now();
    let first = run_safedrive(&config);
    let secs = start.elapsed().as_secs_f64();
    let second = run_safedrive(&config);
    match (first, second) {
        (Ok(a), Ok(b)) => {
            let features = a.report.features.current_features;
            let perf = outcome(
                secs <= 5.0 && features <= 2000,
                format!("{secs:.2} s for one case from disk with {features} current-frame features"),
            );
            let (ta, tb) = (
                a.report.to_toml().expect("serializes"),
                b.report.to_toml().expect("serializes"),
            );
            let same_overlay = a.overlay.data == b.overlay.data;
            let det = outcome(
                ta == tb && same_overlay,
                format!(
                    "reports {} ({} bytes), overlays {}",
                    if ta == tb { "identical" } else { "differ" },
                    ta.len(),
                    if same_overlay { "identical" } else { "differ" }
                ),
            );
            (perf, det)
        }
        (Err(e), _) | (_, Err(e)) => (
            outcome(false, format!("run failed: {e}")),
            outcome(false, format!("run failed: {e}")),
        ),
    }
}

#[test]
fn acceptance() {
    let criteria: [Criterion; 9] = [
        ("scale invariance", scale_invariance),
        ("triangulation", triangulation),
        ("fundamental matrix", fundamental),
        ("polar rectification", polar_rectification),
        ("lane detection", lane_detection),
        ("lane triangulation", lane_triangulation),
        ("PnP", pnp),
        ("end-to-end offset", end_to_end),
        ("dispersity trend", dispersity_trend),
    ];
    let mut results: Vec<(String, Outcome)> = criteria
        .into_iter()
        .map(|(name, check)| {
            let start = Instant::now();
            let o = check();
            println!("  ({name} took {:.1} s)", start.elapsed().as_secs_f64());
            (name.to_string(), o)
        })
        .collect();
    let (perf, det) = performance_and_determinism();
    results.push(("performance".into(), perf));
    results.push(("determinism".into(), det));

    for (i, (name, o)) in results.iter().enumerate() {
        println!(
            "{} [{:>2}] {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            i + 1,
            o.detail
        );
    }
    let failed: Vec<&str> = results
        .iter()
        .filter(|(_, o)| !o.pass)
        .map(|(n, _)| n.as_str())
        .collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
