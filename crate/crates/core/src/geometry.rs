//! Pinhole camera model, rigid transforms and two-view DLT triangulation.
//!
//! Poses map world coordinates into the camera frame: `X_cam = R * X_world + t`.
//! The camera looks down +Z with +X to the right and +Y down, so pixel
//! coordinates grow right and down from the top-left corner.

use nalgebra::{Matrix3, Matrix3x4, Matrix6x4, Point3, Rotation3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point3D = Point3<f64>;

const ORTHONORMAL_TOL: f64 = 1e-9;
const MIN_DEPTH: f64 = 1e-12;
const MIN_RAY_ANGLE: f64 = 1e-6;

/// Image-plane location in pixels. Pixel centers sit at integer coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pixel {
    pub u: f64,
    pub v: f64,
}

impl Pixel {
    pub const fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }

    pub fn homogeneous(&self) -> Vector3<f64> {
        Vector3::new(self.u, self.v, 1.0)
    }

    pub fn to_vector(&self) -> Vector2<f64> {
        Vector2::new(self.u, self.v)
    }

    pub fn from_vector(v: &Vector2<f64>) -> Self {
        Self::new(v.x, v.y)
    }

    pub fn distance(&self, other: &Pixel) -> f64 {
        (self.u - other.u).hypot(self.v - other.v)
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.v.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    #[serde(default)]
    pub skew: f64,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64) -> Result<Self> {
        let k = Self {
            fx,
            fy,
            cx,
            cy,
            skew: 0.0,
        };
        k.validate()?;
        Ok(k)
    }

    /// Calibration of the windshield phone camera used for the 1280x720 recordings.
    pub fn reference_phone() -> Self {
        Self {
            fx: 1261.46807,
            fy: 1259.44016,
            cx: 619.89385,
            cy: 356.46599,
            skew: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.fx, self.fy, self.cx, self.cy, self.skew]
            .iter()
            .all(|x| x.is_finite());
        if !finite || self.fx <= 0.0 || self.fy <= 0.0 {
            return Err(Error::Config(format!("invalid intrinsics {self:?}")));
        }
        Ok(())
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(
            self.fx, self.skew, self.cx, //
            0.0, self.fy, self.cy, //
            0.0, 0.0, 1.0,
        )
    }

    pub fn inverse_matrix(&self) -> Matrix3<f64> {
        let ifx = 1.0 / self.fx;
        let ify = 1.0 / self.fy;
        Matrix3::new(
            ifx,
            -self.skew * ifx * ify,
            (self.skew * self.cy - self.cx * self.fy) * ifx * ify,
            0.0,
            ify,
            -self.cy * ify,
            0.0,
            0.0,
            1.0,
        )
    }

    /// Direction of the camera-frame ray through `p` (not normalized, z = 1).
    pub fn unproject(&self, p: &Pixel) -> Vector3<f64> {
        self.inverse_matrix() * p.homogeneous()
    }
}

/// World-to-camera rigid transform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidPose {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl RigidPose {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        let orth = (rotation.transpose() * rotation - Matrix3::identity()).abs().max();
        let det = rotation.determinant();
        if orth > ORTHONORMAL_TOL || (det - 1.0).abs() > ORTHONORMAL_TOL {
            return Err(Error::Config(format!(
                "rotation is not orthonormal (|RtR-I| = {orth:e}, det = {det})"
            )));
        }
        if !translation.iter().all(|x| x.is_finite()) {
            return Err(Error::Config("translation is not finite".into()));
        }
        Ok(Self { rotation, translation })
    }

    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Builds a pose from a rotation vector (axis * angle, radians).
    pub fn from_rotation_vector(rotvec: Vector3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation: *Rotation3::new(rotvec).matrix(),
            translation,
        }
    }

    /// Camera placed at world position `center` with world-to-camera rotation `rotation`.
    pub fn from_center(rotation: Matrix3<f64>, center: Vector3<f64>) -> Self {
        Self {
            rotation,
            translation: -rotation * center,
        }
    }

    /// Projects an arbitrary 3x3 matrix onto the nearest rotation.
    pub fn orthonormalize(m: &Matrix3<f64>) -> Matrix3<f64> {
        let svd = m.svd(true, true);
        let u = svd.u.expect("svd u");
        let v_t = svd.v_t.expect("svd v_t");
        let mut r = u * v_t;
        if r.determinant() < 0.0 {
            let mut d = Matrix3::identity();
            d[(2, 2)] = -1.0;
            r = u * d * v_t;
        }
        r
    }

    pub fn center(&self) -> Vector3<f64> {
        -(self.rotation.transpose() * self.translation)
    }

    pub fn transform(&self, p: &Point3D) -> Vector3<f64> {
        self.rotation * p.coords + self.translation
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// `self` applied after `first`.
    pub fn compose(&self, first: &RigidPose) -> Self {
        Self {
            rotation: self.rotation * first.rotation,
            translation: self.rotation * first.translation + self.translation,
        }
    }

    /// Pose of this camera expressed in the frame of `reference`.
    pub fn relative_to(&self, reference: &RigidPose) -> Self {
        self.compose(&reference.inverse())
    }

    pub fn with_scaled_translation(&self, scale: f64) -> Self {
        Self {
            rotation: self.rotation,
            translation: self.translation * scale,
        }
    }

    pub fn projection_matrix(&self, k: &CameraIntrinsics) -> Matrix3x4<f64> {
        let mut rt = Matrix3x4::zeros();
        rt.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        rt.set_column(3, &self.translation);
        k.matrix() * rt
    }

    /// Angle of the relative rotation between two poses, in radians.
    pub fn rotation_angle_to(&self, other: &RigidPose) -> f64 {
        rotation_angle(&(self.rotation.transpose() * other.rotation))
    }
}

pub fn rotation_angle(r: &Matrix3<f64>) -> f64 {
    ((r.trace() - 1.0) / 2.0).clamp(-1.0, 1.0).acos()
}

pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Pixel location plus the camera-frame depth it was divided by.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub pixel: Pixel,
    pub depth: f64,
}

impl Projection {
    pub fn in_front(&self) -> bool {
        self.depth > 0.0
    }
}

pub fn project(point: &Point3D, pose: &RigidPose, k: &CameraIntrinsics) -> Result<Projection> {
    project_camera_point(&pose.transform(point), k)
}

pub fn project_camera_point(xc: &Vector3<f64>, k: &CameraIntrinsics) -> Result<Projection> {
    if xc.z.abs() < MIN_DEPTH {
        return Err(Error::DegenerateProjection { depth: xc.z });
    }
    let x = xc.x / xc.z;
    let y = xc.y / xc.z;
    Ok(Projection {
        pixel: Pixel::new(k.fx * x + k.skew * y + k.cx, k.fy * y + k.cy),
        depth: xc.z,
    })
}

/// Result of two-view triangulation. `in_front` is false when the point has
/// non-positive depth in either camera.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triangulation {
    pub point: Point3D,
    pub in_front: bool,
}

/// Linear (DLT) triangulation from the stacked cross-product constraints
/// `[u_i]x K [R_i | t_i] X = 0`, all three rows per view, solved by SVD.
pub fn triangulate_point(
    u1: &Pixel,
    u2: &Pixel,
    pose1: &RigidPose,
    pose2: &RigidPose,
    k: &CameraIntrinsics,
) -> Result<Triangulation> {
    triangulate_homogeneous(&u1.homogeneous(), &u2.homogeneous(), pose1, pose2, k)
}

/// Same as [`triangulate_point`] but accepts pixels in any homogeneous scaling.
pub fn triangulate_homogeneous(
    u1: &Vector3<f64>,
    u2: &Vector3<f64>,
    pose1: &RigidPose,
    pose2: &RigidPose,
    k: &CameraIntrinsics,
) -> Result<Triangulation> {
    let baseline = pose1.center() - pose2.center();
    let scene_scale = 1.0f64.max(pose1.center().norm()).max(pose2.center().norm());
    if baseline.norm() <= 1e-12 * scene_scale {
        return Err(Error::DegenerateRays);
    }
    let kinv = k.inverse_matrix();
    let d1 = pose1.rotation.transpose() * (kinv * u1);
    let d2 = pose2.rotation.transpose() * (kinv * u2);
    let cos = d1.dot(&d2) / (d1.norm() * d2.norm());
    let sin = d1.cross(&d2).norm() / (d1.norm() * d2.norm());
    if sin.atan2(cos).abs() < MIN_RAY_ANGLE {
        return Err(Error::DegenerateRays);
    }

    // Unit rays and a rescaled translation keep the linear system well conditioned.
    let rows = |d: &Vector3<f64>, pose: &RigidPose| {
        let mut rt = Matrix3x4::zeros();
        rt.fixed_view_mut::<3, 3>(0, 0).copy_from(&pose.rotation);
        rt.set_column(3, &(pose.translation / scene_scale));
        skew(&(pose.rotation * d).normalize()) * rt
    };
    let mut a = Matrix6x4::zeros();
    a.fixed_view_mut::<3, 4>(0, 0).copy_from(&rows(&d1, pose1));
    a.fixed_view_mut::<3, 4>(3, 0).copy_from(&rows(&d2, pose2));

    let svd = a.svd(false, true);
    let v_t = svd.v_t.ok_or(Error::DegenerateRays)?;
    let (idx, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("four singular values");
    let x = v_t.row(idx);
    let w = x[3] / scene_scale;
    if w.abs() < 1e-12 * x.norm() {
        return Err(Error::PointAtInfinity);
    }
    let point = Point3D::new(x[0] / w, x[1] / w, x[2] / w);
    let in_front = pose1.transform(&point).z > 0.0 && pose2.transform(&point).z > 0.0;
    Ok(Triangulation { point, in_front })
}

/// Pixel distance between the projection of `point` and `observed`.
pub fn reprojection_error(point: &Point3D, observed: &Pixel, pose: &RigidPose, k: &CameraIntrinsics) -> Result<f64> {
    let proj = project(point, pose, k)?;
    Ok(proj.pixel.distance(observed))
}

/// Angle between the two viewing rays of a correspondence, radians.
pub fn parallax_angle(u1: &Pixel, u2: &Pixel, pose1: &RigidPose, pose2: &RigidPose, k: &CameraIntrinsics) -> f64 {
    let d1 = pose1.rotation.transpose() * k.unproject(u1);
    let d2 = pose2.rotation.transpose() * k.unproject(u2);
    d1.cross(&d2).norm().atan2(d1.dot(&d2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit_k() -> CameraIntrinsics {
        CameraIntrinsics::new(1.0, 1.0, 0.0, 0.0).unwrap()
    }

    fn second_pose() -> RigidPose {
        RigidPose::from_rotation_vector(Vector3::new(0.02, -0.05, 0.01), Vector3::new(-1.0, 0.1, 0.3))
    }

    #[test]
    fn optical_axis_hits_principal_point() {
        let p = Point3D::new(0.0, 0.0, 5.0);
        let px = project(&p, &RigidPose::identity(), &unit_k()).unwrap().pixel;
        assert_eq!(px, Pixel::new(0.0, 0.0));

        let k = CameraIntrinsics::reference_phone();
        let px = project(&p, &RigidPose::identity(), &k).unwrap().pixel;
        assert_relative_eq!(px.u, 619.89385, epsilon = 1e-12);
        assert_relative_eq!(px.v, 356.46599, epsilon = 1e-12);
    }

    #[test]
    fn projection_is_scale_free() {
        let k = CameraIntrinsics::reference_phone();
        let pose = second_pose();
        let p = Point3D::new(1.5, -0.7, 9.0);
        let base = project(&p, &pose, &k).unwrap().pixel;
        for lambda in [0.5, 2.0, 10.0] {
            let scaled = project(
                &Point3D::from(p.coords * lambda),
                &pose.with_scaled_translation(lambda),
                &k,
            )
            .unwrap()
            .pixel;
            assert_relative_eq!(scaled.u, base.u, max_relative = 1e-9);
            assert_relative_eq!(scaled.v, base.v, max_relative = 1e-9);
        }
    }

    #[test]
    fn zero_depth_is_rejected() {
        let p = Point3D::new(1.0, 1.0, 0.0);
        assert!(matches!(
            project(&p, &RigidPose::identity(), &unit_k()),
            Err(Error::DegenerateProjection { .. })
        ));
    }

    #[test]
    fn noiseless_triangulation_round_trips() {
        let k = CameraIntrinsics::reference_phone();
        let pose1 = RigidPose::identity();
        let pose2 = second_pose();
        let x = Point3D::new(1.0, -0.5, 8.0);
        let u1 = project(&x, &pose1, &k).unwrap().pixel;
        let u2 = project(&x, &pose2, &k).unwrap().pixel;
        let tri = triangulate_point(&u1, &u2, &pose1, &pose2, &k).unwrap();
        assert!(tri.in_front);
        assert!((tri.point - x).norm() / x.coords.norm() < 1e-9);
        assert!(reprojection_error(&tri.point, &u1, &pose1, &k).unwrap() < 1e-6);
        assert!(reprojection_error(&tri.point, &u2, &pose2, &k).unwrap() < 1e-6);
    }

    #[test]
    fn homogeneous_rescaling_does_not_move_the_point() {
        let k = CameraIntrinsics::reference_phone();
        let pose2 = second_pose();
        let u1 = Pixel::new(700.3, 400.1);
        let u2 = Pixel::new(760.8, 395.2);
        let base = triangulate_point(&u1, &u2, &RigidPose::identity(), &pose2, &k).unwrap();
        for s in [0.01, 3.0, 250.0] {
            let t = triangulate_homogeneous(
                &(u1.homogeneous() * s),
                &(u2.homogeneous() * s),
                &RigidPose::identity(),
                &pose2,
                &k,
            )
            .unwrap();
            assert!((t.point - base.point).norm() / base.point.coords.norm() < 1e-9);
        }
    }

    #[test]
    fn zero_baseline_is_degenerate() {
        let k = CameraIntrinsics::reference_phone();
        let pose = second_pose();
        let r = triangulate_point(&Pixel::new(600.0, 300.0), &Pixel::new(610.0, 305.0), &pose, &pose, &k);
        assert!(matches!(r, Err(Error::DegenerateRays)));
    }

    #[test]
    fn point_behind_camera_is_flagged() {
        let k = CameraIntrinsics::reference_phone();
        let pose1 = RigidPose::identity();
        let pose2 = RigidPose::from_center(Matrix3::identity(), Vector3::new(1.0, 0.0, 0.0));
        // Rays from both cameras meet behind them.
        let x = Point3D::new(0.5, 0.2, -6.0);
        let u1 = project(&x, &pose1, &k).unwrap().pixel;
        let u2 = project(&x, &pose2, &k).unwrap().pixel;
        let tri = triangulate_point(&u1, &u2, &pose1, &pose2, &k).unwrap();
        assert!(!tri.in_front);
    }

    #[test]
    fn pythagorean_reprojection_error() {
        let k = CameraIntrinsics::reference_phone();
        let x = Point3D::new(0.3, 0.2, 4.0);
        let p = project(&x, &RigidPose::identity(), &k).unwrap().pixel;
        let e = reprojection_error(&x, &Pixel::new(p.u + 3.0, p.v + 4.0), &RigidPose::identity(), &k).unwrap();
        assert_relative_eq!(e, 5.0, epsilon = 1e-9);
    }

    #[test]
    fn pose_inverse_and_relative() {
        let a = second_pose();
        let b = RigidPose::from_rotation_vector(Vector3::new(-0.1, 0.2, 0.0), Vector3::new(0.3, 0.0, 2.0));
        let id = a.compose(&a.inverse());
        assert!((id.rotation - Matrix3::identity()).abs().max() < 1e-12);
        assert!(id.translation.norm() < 1e-12);
        let rel = b.relative_to(&a);
        let back = rel.compose(&a);
        assert!((back.rotation - b.rotation).abs().max() < 1e-12);
        assert!((back.translation - b.translation).norm() < 1e-12);
    }

    #[test]
    fn rejects_non_rotation() {
        let mut r = Matrix3::identity();
        r[(0, 0)] = 1.01;
        assert!(RigidPose::new(r, Vector3::zeros()).is_err());
        assert!(RigidPose::new(Matrix3::identity(), Vector3::new(0.0, 1.0, 0.0)).is_ok());
    }
}
