//! Registration of a current view against the sparse street model.

use nalgebra::{DMatrix, Matrix3, Matrix3x4, Matrix6, Rotation3, SymmetricEigen, Vector3, Vector6};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::epipolar::iterations_needed;
use crate::error::{Error, Result};
use crate::features::{mutual_nearest, BinaryDescriptor};
use crate::geometry::{project, skew, CameraIntrinsics, Pixel, Point3D, RigidPose};
use crate::image::Dims;
use crate::lane_matching::LanePoint3D;

pub const MIN_PNP_CORRESPONDENCES: usize = 6;

/// A reconstructed feature with the descriptors (and pixels) it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelPoint {
    pub position: Point3D,
    pub descriptors: Vec<BinaryDescriptor>,
    pub observations: Vec<Pixel>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StreetModel {
    pub feature_points: Vec<ModelPoint>,
    pub lane_points: Vec<LanePoint3D>,
    pub source_image_ids: Vec<String>,
}

impl StreetModel {
    pub fn validate(&self) -> Result<()> {
        for (i, p) in self.feature_points.iter().enumerate() {
            if p.descriptors.is_empty() {
                return Err(Error::Config(format!("model point {i} has no descriptor")));
            }
            if !p.position.iter().all(|c| c.is_finite()) {
                return Err(Error::Config(format!("model point {i} is not finite")));
            }
        }
        if self
            .lane_points
            .iter()
            .any(|l| !l.position.iter().all(|c| c.is_finite()))
        {
            return Err(Error::Config("lane point is not finite".into()));
        }
        Ok(())
    }

    /// Same model with every 3D coordinate multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for p in &mut out.feature_points {
            p.position *= factor;
        }
        for l in &mut out.lane_points {
            l.position *= factor;
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelCorrespondence {
    pub point: Point3D,
    pub pixel: Pixel,
    pub model_index: usize,
    pub current_index: usize,
    pub distance: u32,
}

/// Mutual nearest neighbours between model points and current descriptors.
/// A model point's distance is the best over all of its descriptors.
pub fn match_to_model(
    model: &StreetModel,
    current_descs: &[BinaryDescriptor],
    current_pixels: &[Pixel],
    max_distance: u32,
) -> Result<Vec<ModelCorrespondence>> {
    assert_eq!(current_descs.len(), current_pixels.len());
    let points = &model.feature_points;
    let matches = mutual_nearest(points.len(), current_descs.len(), max_distance, |i, j| {
        points[i]
            .descriptors
            .iter()
            .map(|d| d.hamming(&current_descs[j]))
            .min()
            .unwrap_or(u32::MAX)
    });
    if matches.len() < MIN_PNP_CORRESPONDENCES {
        return Err(Error::NoCorrespondence { got: matches.len() });
    }
    Ok(matches
        .into_iter()
        .map(|m| ModelCorrespondence {
            point: points[m.index_a].position,
            pixel: current_pixels[m.index_b],
            model_index: m.index_a,
            current_index: m.index_b,
            distance: m.distance,
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PnpParams {
    pub threshold: f64,
    pub min_inliers: usize,
    pub confidence: f64,
    pub max_iterations: usize,
    pub seed: u64,
}

impl Default for PnpParams {
    fn default() -> Self {
        Self {
            threshold: 3.0,
            min_inliers: MIN_PNP_CORRESPONDENCES,
            confidence: 0.999,
            max_iterations: 1000,
            seed: 11,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegistrationResult {
    /// Maps model coordinates to current-camera coordinates.
    pub pose: RigidPose,
    pub inlier_count: usize,
    pub inlier_indices: Vec<usize>,
    pub mean_projection_error: f64,
}

struct Problem<'a> {
    points: Vec<Vector3<f64>>,
    rays: Vec<Vector3<f64>>,
    pixels: &'a [Pixel],
    k: &'a CameraIntrinsics,
}

impl Problem<'_> {
    fn error(&self, pose: &RigidPose, i: usize) -> f64 {
        let xc = pose.rotation * self.points[i] + pose.translation;
        if xc.z <= 1e-12 {
            return f64::INFINITY;
        }
        let km = self.k.matrix();
        let h = km * xc;
        Pixel::new(h.x / h.z, h.y / h.z).distance(&self.pixels[i])
    }

    fn inliers(&self, pose: &RigidPose, threshold: f64) -> (Vec<usize>, f64) {
        let mut idx = Vec::new();
        let mut cost = 0.0;
        for i in 0..self.points.len() {
            let e = self.error(pose, i);
            if e <= threshold {
                idx.push(i);
                cost += e;
            } else {
                cost += threshold;
            }
        }
        (idx, cost)
    }

    fn mean_error(&self, pose: &RigidPose, idx: &[usize]) -> f64 {
        idx.iter().map(|&i| self.error(pose, i)).sum::<f64>() / idx.len() as f64
    }

    fn linear_pose(&self, idx: &[usize]) -> Option<RigidPose> {
        let pts: Vec<Vector3<f64>> = idx.iter().map(|&i| self.points[i]).collect();
        let rays: Vec<Vector3<f64>> = idx.iter().map(|&i| self.rays[i]).collect();
        linear_pose(&pts, &rays)
    }
}

/// RANSAC over minimal linear solves (DLT, or a homography for planar
/// samples), a linear re-fit on the consensus set and Levenberg-Marquardt
/// refinement of the reprojection error. The refined pose is kept only if it
/// lowers the mean inlier error.
pub fn solve_pnp(corrs: &[(Point3D, Pixel)], k: &CameraIntrinsics, params: &PnpParams) -> Result<RegistrationResult> {
    let n = corrs.len();
    if n < MIN_PNP_CORRESPONDENCES {
        return Err(Error::InsufficientCorrespondences {
            needed: MIN_PNP_CORRESPONDENCES,
            got: n,
        });
    }
    // Work in units of the point cloud's spread so results are scale-free.
    let centroid = corrs.iter().map(|c| c.0.coords).sum::<Vector3<f64>>() / n as f64;
    let spread = (corrs
        .iter()
        .map(|c| (c.0.coords - centroid).norm_squared())
        .sum::<f64>()
        / n as f64)
        .sqrt();
    if !(spread > 0.0 && spread.is_finite()) {
        return Err(Error::DegenerateConfiguration("3D points coincide"));
    }
    let kinv = k.inverse_matrix();
    let pixels: Vec<Pixel> = corrs.iter().map(|c| c.1).collect();
    let problem = Problem {
        points: corrs.iter().map(|c| c.0.coords / spread).collect(),
        rays: pixels.iter().map(|p| kinv * p.homogeneous()).collect(),
        pixels: &pixels,
        k,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut best: Option<(RigidPose, usize, f64)> = None;
    let mut needed = params.max_iterations;
    let mut iteration = 0;
    while iteration < needed {
        iteration += 1;
        let subset = sample(&mut rng, n, MIN_PNP_CORRESPONDENCES).into_vec();
        let Some(pose) = problem.linear_pose(&subset) else {
            continue;
        };
        let (idx, cost) = problem.inliers(&pose, params.threshold);
        let improves = best
            .as_ref()
            .is_none_or(|(_, c, bc)| idx.len() > *c || (idx.len() == *c && cost < *bc));
        if improves {
            let w = idx.len() as f64 / n as f64;
            needed = iterations_needed(w, MIN_PNP_CORRESPONDENCES, params.confidence).min(params.max_iterations);
            best = Some((pose, idx.len(), cost));
        }
    }
    let (mut pose, _, _) = best.ok_or(Error::DegenerateConfiguration("no non-degenerate PnP sample"))?;
    let (mut inliers, _) = problem.inliers(&pose, params.threshold);

    for _ in 0..3 {
        if inliers.len() < MIN_PNP_CORRESPONDENCES {
            break;
        }
        let Some(refit) = problem.linear_pose(&inliers) else {
            break;
        };
        let (idx, _) = problem.inliers(&refit, params.threshold);
        if idx.len() < inliers.len() {
            break;
        }
        let grew = idx.len() > inliers.len();
        pose = refit;
        inliers = idx;
        if !grew {
            break;
        }
    }
    if inliers.len() < params.min_inliers.max(MIN_PNP_CORRESPONDENCES) {
        return Err(Error::PoseUnstable {
            inliers: inliers.len(),
            needed: params.min_inliers.max(MIN_PNP_CORRESPONDENCES),
        });
    }

    let mut mean_projection_error = problem.mean_error(&pose, &inliers);
    for _ in 0..3 {
        let refined = refine(&problem, &pose, &inliers);
        if problem.mean_error(&refined, &inliers) > mean_projection_error {
            break;
        }
        // The linear fit can reject points the refined pose explains.
        let (idx, _) = problem.inliers(&refined, params.threshold);
        let grew = idx.len() > inliers.len();
        if idx.len() >= inliers.len() {
            inliers = idx;
        }
        pose = refined;
        mean_projection_error = problem.mean_error(&pose, &inliers);
        if !grew {
            break;
        }
    }
    Ok(RegistrationResult {
        pose: pose.with_scaled_translation(spread),
        inlier_count: inliers.len(),
        inlier_indices: inliers,
        mean_projection_error,
    })
}

fn linear_pose(points: &[Vector3<f64>], rays: &[Vector3<f64>]) -> Option<RigidPose> {
    let n = points.len() as f64;
    let c = points.iter().sum::<Vector3<f64>>() / n;
    let cov = points.iter().fold(Matrix3::zeros(), |acc, p| {
        let d = p - c;
        acc + d * d.transpose()
    }) / n;
    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let largest = eig.eigenvalues[order[0]];
    if largest <= 0.0 {
        return None;
    }
    if eig.eigenvalues[order[2]] < 1e-8 * largest {
        if eig.eigenvalues[order[1]] < 1e-8 * largest {
            return None;
        }
        let e1: Vector3<f64> = eig.eigenvectors.column(order[0]).into();
        let e2: Vector3<f64> = eig.eigenvectors.column(order[1]).into();
        planar_pose(points, rays, &c, &e1, &e2)
    } else {
        dlt_pose(points, rays, &c)
    }
}

fn smallest_right_singular(a: DMatrix<f64>, cols: usize) -> Option<Vec<f64>> {
    let a = if a.nrows() < cols {
        a.resize_vertically(cols, 0.0)
    } else {
        a
    };
    let svd = a.svd(false, true);
    let v_t = svd.v_t?;
    let (idx, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|x, y| x.1.total_cmp(y.1))?;
    Some(v_t.row(idx).iter().copied().collect())
}

fn dlt_pose(points: &[Vector3<f64>], rays: &[Vector3<f64>], c: &Vector3<f64>) -> Option<RigidPose> {
    let mut a = DMatrix::zeros(2 * points.len(), 12);
    for (i, (p, r)) in points.iter().zip(rays).enumerate() {
        let x = [p.x - c.x, p.y - c.y, p.z - c.z, 1.0];
        let (u, v) = (r.x / r.z, r.y / r.z);
        for j in 0..4 {
            a[(2 * i, j)] = x[j];
            a[(2 * i, 8 + j)] = -u * x[j];
            a[(2 * i + 1, 4 + j)] = x[j];
            a[(2 * i + 1, 8 + j)] = -v * x[j];
        }
    }
    let h = smallest_right_singular(a, 12)?;
    let mut p = Matrix3x4::from_row_slice(&h);
    let mut m: Matrix3<f64> = p.fixed_view::<3, 3>(0, 0).into();
    if m.determinant() < 0.0 {
        p = -p;
        m = -m;
    }
    let scale = m.svd(false, false).singular_values.mean();
    if !(scale > 0.0 && scale.is_finite()) {
        return None;
    }
    let rotation = RigidPose::orthonormalize(&m);
    let t_centered: Vector3<f64> = p.column(3) / scale;
    Some(RigidPose {
        rotation,
        translation: t_centered - rotation * c,
    })
}

fn planar_pose(
    points: &[Vector3<f64>],
    rays: &[Vector3<f64>],
    c: &Vector3<f64>,
    e1: &Vector3<f64>,
    e2: &Vector3<f64>,
) -> Option<RigidPose> {
    let mut a = DMatrix::zeros(2 * points.len(), 9);
    for (i, (p, r)) in points.iter().zip(rays).enumerate() {
        let d = p - c;
        let x = [d.dot(e1), d.dot(e2), 1.0];
        let (u, v) = (r.x / r.z, r.y / r.z);
        for j in 0..3 {
            a[(2 * i, j)] = x[j];
            a[(2 * i, 6 + j)] = -u * x[j];
            a[(2 * i + 1, 3 + j)] = x[j];
            a[(2 * i + 1, 6 + j)] = -v * x[j];
        }
    }
    let h = smallest_right_singular(a, 9)?;
    let mut hm = Matrix3::from_row_slice(&h);
    if hm[(2, 2)] < 0.0 {
        hm = -hm;
    }
    let (h1, h2, h3) = (
        hm.column(0).into_owned(),
        hm.column(1).into_owned(),
        hm.column(2).into_owned(),
    );
    let scale = 0.5 * (h1.norm() + h2.norm());
    if !(scale > 0.0 && scale.is_finite()) {
        return None;
    }
    let (r1, r2) = (h1 / scale, h2 / scale);
    let q = RigidPose::orthonormalize(&Matrix3::from_columns(&[r1, r2, r1.cross(&r2)]));
    let basis = Matrix3::from_columns(&[*e1, *e2, e1.cross(e2)]);
    let rotation = q * basis.transpose();
    Some(RigidPose {
        rotation,
        translation: h3 / scale - rotation * c,
    })
}

fn refine(problem: &Problem<'_>, initial: &RigidPose, idx: &[usize]) -> RigidPose {
    let k = problem.k;
    let cost = |pose: &RigidPose| idx.iter().map(|&i| problem.error(pose, i).powi(2)).sum::<f64>();
    let mut pose = *initial;
    let mut current = cost(&pose);
    let mut mu = 1e-3;
    for _ in 0..100 {
        let mut jtj = Matrix6::<f64>::zeros();
        let mut jtr = Vector6::<f64>::zeros();
        for &i in idx {
            let rx = pose.rotation * problem.points[i];
            let xc = rx + pose.translation;
            if xc.z <= 1e-12 {
                continue;
            }
            let z = xc.z;
            let u = k.fx * xc.x / z + k.skew * xc.y / z + k.cx;
            let v = k.fy * xc.y / z + k.cy;
            let r = [u - problem.pixels[i].u, v - problem.pixels[i].v];
            let dproj = nalgebra::Matrix2x3::new(
                k.fx / z,
                k.skew / z,
                -(k.fx * xc.x + k.skew * xc.y) / (z * z),
                0.0,
                k.fy / z,
                -k.fy * xc.y / (z * z),
            );
            let mut dx = nalgebra::Matrix3x6::<f64>::zeros();
            dx.fixed_view_mut::<3, 3>(0, 0).copy_from(&(-skew(&rx)));
            dx.fixed_view_mut::<3, 3>(0, 3).copy_from(&Matrix3::identity());
            let j = dproj * dx;
            jtj += j.transpose() * j;
            jtr += j.transpose() * nalgebra::Vector2::new(r[0], r[1]);
        }
        let mut improved = false;
        while mu < 1e12 {
            let mut a = jtj;
            for d in 0..6 {
                a[(d, d)] += mu * jtj[(d, d)].max(1e-12);
            }
            let Some(chol) = a.cholesky() else {
                mu *= 10.0;
                continue;
            };
            let delta = -chol.solve(&jtr);
            let omega = Vector3::new(delta[0], delta[1], delta[2]);
            let candidate = RigidPose {
                rotation: Rotation3::new(omega).into_inner() * pose.rotation,
                translation: pose.translation + Vector3::new(delta[3], delta[4], delta[5]),
            };
            let c = cost(&candidate);
            if c < current {
                let gain = current - c;
                pose = candidate;
                current = c;
                mu = (mu / 10.0).max(1e-12);
                improved = gain > 1e-14 * current.max(1e-30);
                break;
            }
            mu *= 10.0;
        }
        if !improved {
            break;
        }
    }
    pose
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectedLanePoint {
    pub pixel: Pixel,
    pub depth: f64,
    pub in_frame: bool,
    /// Index into the model's lane points.
    pub source: usize,
}

/// Projects every lane point that lies in front of the registered camera.
pub fn project_lane_markers(
    model: &StreetModel,
    result: &RegistrationResult,
    k: &CameraIntrinsics,
    dims: Dims,
) -> Vec<ProjectedLanePoint> {
    model
        .lane_points
        .iter()
        .enumerate()
        .filter_map(|(source, l)| {
            let p = project(&l.position, &result.pose, k).ok()?;
            p.in_front().then_some(ProjectedLanePoint {
                pixel: p.pixel,
                depth: p.depth,
                in_frame: dims.contains(p.pixel.u, p.pixel.v),
                source,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistributionMetrics {
    /// RMS distance of the pixels from their mean, over the image diagonal.
    pub dispersity: f64,
    /// Mean column over the image width.
    pub horizontal_center: f64,
    /// Share of pixels on the less populated side of the vertical centre line.
    pub minority_side_fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DispersityThresholds {
    pub min_dispersity: f64,
    pub max_center_offset: f64,
    pub min_side_fraction: f64,
}

impl Default for DispersityThresholds {
    fn default() -> Self {
        Self {
            min_dispersity: 0.12,
            max_center_offset: 0.25,
            min_side_fraction: 0.15,
        }
    }
}

impl DistributionMetrics {
    pub fn is_low(&self, t: &DispersityThresholds) -> bool {
        self.dispersity < t.min_dispersity
            || (self.horizontal_center - 0.5).abs() > t.max_center_offset
            || self.minority_side_fraction < t.min_side_fraction
    }
}

/// `None` for fewer than two pixels.
pub fn feature_distribution_metrics(pixels: &[Pixel], dims: Dims) -> Option<DistributionMetrics> {
    if pixels.len() < 2 {
        return None;
    }
    let n = pixels.len() as f64;
    let mu = pixels.iter().map(|p| p.to_vector()).sum::<nalgebra::Vector2<f64>>() / n;
    let var = pixels.iter().map(|p| (p.to_vector() - mu).norm_squared()).sum::<f64>() / n;
    let centre = 0.5 * (dims.width as f64 - 1.0);
    let left: f64 = pixels
        .iter()
        .map(|p| match p.u.total_cmp(&centre) {
            std::cmp::Ordering::Less => 1.0,
            std::cmp::Ordering::Equal => 0.5,
            std::cmp::Ordering::Greater => 0.0,
        })
        .sum();
    Some(DistributionMetrics {
        dispersity: var.sqrt() / dims.diagonal(),
        horizontal_center: mu.x / dims.width as f64,
        minority_side_fraction: left.min(n - left) / n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scene(n: usize) -> Vec<Point3D> {
        (0..n)
            .map(|i| {
                let a = i as f64;
                Point3D::new(
                    (a * 1.7).sin() * 6.0,
                    (a * 0.9).cos() * 2.0,
                    10.0 + (a * 2.3).sin().abs() * 20.0,
                )
            })
            .collect()
    }

    fn observe(points: &[Point3D], pose: &RigidPose, k: &CameraIntrinsics) -> Vec<(Point3D, Pixel)> {
        points
            .iter()
            .map(|p| (*p, project(p, pose, k).unwrap().pixel))
            .collect()
    }

    #[test]
    fn too_few_correspondences() {
        let k = CameraIntrinsics::reference_phone();
        let corrs = observe(&scene(5), &RigidPose::identity(), &k);
        assert!(matches!(
            solve_pnp(&corrs, &k, &PnpParams::default()),
            Err(Error::InsufficientCorrespondences { needed: 6, got: 5 })
        ));
    }

    #[test]
    fn noiseless_pose_is_exact() {
        let k = CameraIntrinsics::reference_phone();
        let truth = RigidPose::from_rotation_vector(Vector3::new(0.02, -0.05, 0.01), Vector3::new(0.4, -0.1, 1.2));
        let corrs = observe(&scene(50), &truth, &k);
        let r = solve_pnp(&corrs, &k, &PnpParams::default()).unwrap();
        assert_eq!(r.inlier_count, 50);
        assert!(r.pose.rotation_angle_to(&truth).to_degrees() < 1e-6);
        assert!((r.pose.translation - truth.translation).norm() < 1e-6);
        assert!(r.mean_projection_error < 1e-6);
    }

    #[test]
    fn planar_scene_uses_homography() {
        let k = CameraIntrinsics::reference_phone();
        let truth = RigidPose::from_rotation_vector(Vector3::new(0.0, 0.1, 0.0), Vector3::new(0.5, 0.0, 0.3));
        let pts: Vec<Point3D> = (0..30)
            .map(|i| Point3D::new(7.5, -2.0 + (i % 5) as f64, 8.0 + 2.0 * (i / 5) as f64))
            .collect();
        let r = solve_pnp(&observe(&pts, &truth, &k), &k, &PnpParams::default()).unwrap();
        assert!(r.pose.rotation_angle_to(&truth).to_degrees() < 1e-6);
        assert!((r.pose.translation - truth.translation).norm() < 1e-6);
    }

    #[test]
    fn empty_model_has_no_correspondence() {
        let r = match_to_model(&StreetModel::default(), &[], &[], 64);
        assert!(matches!(r, Err(Error::NoCorrespondence { got: 0 })));
    }

    #[test]
    fn centred_points_metrics() {
        let dims = Dims {
            width: 640,
            height: 480,
        };
        let m = feature_distribution_metrics(&[Pixel::new(320.0, 240.0); 4], dims).unwrap();
        assert_eq!(m.dispersity, 0.0);
        assert_eq!(m.horizontal_center, 0.5);
        assert!(m.is_low(&DispersityThresholds::default()));
        assert!(feature_distribution_metrics(&[Pixel::new(1.0, 1.0)], dims).is_none());
    }

    #[test]
    fn one_sided_points_are_flagged() {
        let dims = Dims {
            width: 640,
            height: 480,
        };
        let left: Vec<Pixel> = (0..100)
            .map(|i| Pixel::new((i % 10) as f64 * 14.0, (i / 10) as f64 * 48.0))
            .collect();
        let m = feature_distribution_metrics(&left, dims).unwrap();
        assert!(m.horizontal_center < 0.25 && m.is_low(&DispersityThresholds::default()));
        assert_eq!(m.minority_side_fraction, 0.0);
    }

    #[test]
    fn half_frame_near_the_centre_is_still_one_sided() {
        let dims = Dims {
            width: 640,
            height: 480,
        };
        let pts: Vec<Pixel> = (0..200)
            .map(|i| Pixel::new(180.0 + (i % 20) as f64 * 6.0, (i / 20) as f64 * 48.0))
            .collect();
        let m = feature_distribution_metrics(&pts, dims).unwrap();
        let t = DispersityThresholds::default();
        assert!(m.dispersity >= t.min_dispersity && (m.horizontal_center - 0.5).abs() <= t.max_center_offset);
        assert!(m.is_low(&t));
    }

    #[test]
    fn balanced_spread_is_not_low() {
        let dims = Dims {
            width: 640,
            height: 480,
        };
        let pts: Vec<Pixel> = (0..400)
            .map(|i| Pixel::new((i % 20) as f64 * 33.0 + 5.0, (i / 20) as f64 * 24.0))
            .collect();
        let m = feature_distribution_metrics(&pts, dims).unwrap();
        assert!((m.horizontal_center - 0.5).abs() < 0.02);
        assert_eq!(m.minority_side_fraction, 0.5);
        assert!(!m.is_low(&DispersityThresholds::default()));
    }
}
