//! Random point correspondences with known poses, noise and gross outliers.

use nalgebra::Vector3;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use safedrive_core::geometry::project;
use safedrive_core::image::Dims;
use safedrive_core::{CameraIntrinsics, Pixel, Point3D, RigidPose};

/// Outliers are displaced at least this far from their true position.
pub const MIN_OUTLIER_DISPLACEMENT: f64 = 20.0;

fn random_rotation(rng: &mut impl Rng, max_deg: f64) -> nalgebra::Matrix3<f64> {
    let axis = Vector3::new(
        rng.random_range(-1.0..=1.0),
        rng.random_range(-1.0..=1.0),
        rng.random_range(-1.0..=1.0),
    );
    let axis = if axis.norm() < 1e-6 {
        Vector3::y()
    } else {
        axis.normalize()
    };
    let angle = rng.random_range(-max_deg..=max_deg).to_radians();
    RigidPose::from_rotation_vector(axis * angle, Vector3::zeros()).rotation
}

fn add_noise(rng: &mut impl Rng, p: &Pixel, noise: &Normal<f64>) -> Pixel {
    Pixel::new(p.u + noise.sample(rng), p.v + noise.sample(rng))
}

fn random_outlier(rng: &mut impl Rng, truth: &Pixel, dims: Dims) -> Pixel {
    loop {
        let p = Pixel::new(
            rng.random_range(0.0..dims.width as f64 - 1.0),
            rng.random_range(0.0..dims.height as f64 - 1.0),
        );
        if p.distance(truth) >= MIN_OUTLIER_DISPLACEMENT {
            return p;
        }
    }
}

/// Forward driving motion: mostly +z translation with small lateral drift
/// and a rotation of at most `max_rotation_deg`.
pub fn forward_motion(rng: &mut impl Rng, max_rotation_deg: f64) -> RigidPose {
    let center = Vector3::new(
        rng.random_range(-0.3..=0.3),
        rng.random_range(-0.1..=0.1),
        rng.random_range(1.5..=3.0),
    );
    RigidPose::from_center(random_rotation(rng, max_rotation_deg), center)
}

#[derive(Debug, Clone)]
pub struct PairSample {
    pub pose_a: RigidPose,
    pub pose_b: RigidPose,
    pub points: Vec<Point3D>,
    pub clean_a: Vec<Pixel>,
    pub clean_b: Vec<Pixel>,
    pub observed_a: Vec<Pixel>,
    pub observed_b: Vec<Pixel>,
    /// True where `observed_b` was replaced by an unrelated pixel.
    pub outlier: Vec<bool>,
}

/// `n` points visible in both views of a forward-moving pair (first camera
/// at the origin), 4 to 60 m deep. Both observations get Gaussian noise of
/// `sigma` px; a fraction of the second observations become gross outliers.
pub fn pair_sample(
    rng: &mut impl Rng,
    k: &CameraIntrinsics,
    dims: Dims,
    n: usize,
    sigma: f64,
    outlier_fraction: f64,
) -> PairSample {
    let pose_a = RigidPose::identity();
    let pose_b = forward_motion(rng, 2.0);
    let noise = Normal::new(0.0, sigma.max(0.0)).expect("finite sigma");
    let mut s = PairSample {
        pose_a,
        pose_b,
        points: Vec::with_capacity(n),
        clean_a: Vec::with_capacity(n),
        clean_b: Vec::with_capacity(n),
        observed_a: Vec::with_capacity(n),
        observed_b: Vec::with_capacity(n),
        outlier: Vec::with_capacity(n),
    };
    while s.points.len() < n {
        let a = Pixel::new(
            rng.random_range(0.0..dims.width as f64 - 1.0),
            rng.random_range(0.0..dims.height as f64 - 1.0),
        );
        let depth = rng.random_range(4.0..60.0);
        let x = Point3D::from(k.unproject(&a) * depth);
        let Ok(pb) = project(&x, &pose_b, k) else { continue };
        if !pb.in_front() || !dims.contains(pb.pixel.u, pb.pixel.v) {
            continue;
        }
        let is_outlier = rng.random_bool(outlier_fraction.clamp(0.0, 1.0));
        let ob = if is_outlier {
            random_outlier(rng, &pb.pixel, dims)
        } else {
            add_noise(rng, &pb.pixel, &noise)
        };
        s.points.push(x);
        s.clean_a.push(a);
        s.clean_b.push(pb.pixel);
        s.observed_a.push(add_noise(rng, &a, &noise));
        s.observed_b.push(ob);
        s.outlier.push(is_outlier);
    }
    s
}

#[derive(Debug, Clone)]
pub struct RegistrationSample {
    pub pose: RigidPose,
    pub points: Vec<Point3D>,
    pub clean: Vec<Pixel>,
    pub observed: Vec<Pixel>,
    pub outlier: Vec<bool>,
}

impl RegistrationSample {
    pub fn correspondences(&self) -> Vec<(Point3D, Pixel)> {
        self.points.iter().copied().zip(self.observed.iter().copied()).collect()
    }
}

/// 3D points spread over a street-like volume seen by a camera near the origin.
pub fn registration_sample(
    rng: &mut impl Rng,
    k: &CameraIntrinsics,
    dims: Dims,
    n: usize,
    sigma: f64,
    outlier_fraction: f64,
) -> RegistrationSample {
    let pose = RigidPose::from_center(
        random_rotation(rng, 3.0),
        Vector3::new(
            rng.random_range(-0.5..=0.5),
            rng.random_range(-0.1..=0.1),
            rng.random_range(-1.0..=1.0),
        ),
    );
    let noise = Normal::new(0.0, sigma.max(0.0)).expect("finite sigma");
    let mut s = RegistrationSample {
        pose,
        points: Vec::with_capacity(n),
        clean: Vec::with_capacity(n),
        observed: Vec::with_capacity(n),
        outlier: Vec::with_capacity(n),
    };
    while s.points.len() < n {
        let u = Pixel::new(
            rng.random_range(0.0..dims.width as f64 - 1.0),
            rng.random_range(0.0..dims.height as f64 - 1.0),
        );
        let depth = rng.random_range(5.0..50.0);
        let x = Point3D::from(pose.inverse().transform(&Point3D::from(k.unproject(&u) * depth)));
        let Ok(p) = project(&x, &pose, k) else { continue };
        let is_outlier = rng.random_bool(outlier_fraction.clamp(0.0, 1.0));
        let obs = if is_outlier {
            random_outlier(rng, &p.pixel, dims)
        } else {
            add_noise(rng, &p.pixel, &noise)
        };
        s.points.push(x);
        s.clean.push(p.pixel);
        s.observed.push(obs);
        s.outlier.push(is_outlier);
    }
    s
}
