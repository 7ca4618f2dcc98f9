use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use safedrive_core::lanes::LaneColor;
use safedrive_core::{CameraIntrinsics, RigidPose};
use serde::{Deserialize, Serialize};

use crate::SynthError;

/// Latitude and longitude of the world origin used by the default street.
pub const DEFAULT_ORIGIN: [f64; 2] = [44.979238, -93.266568];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LinePattern {
    Solid,
    Dashed { dash_m: f64, gap_m: f64, phase_m: f64 },
}

/// A painted line on the ground plane, running along +z at lateral offset `offset_x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaneLineSpec {
    pub offset_x: f64,
    pub width_m: f64,
    pub color: LaneColor,
    pub pattern: LinePattern,
    pub z_start: f64,
    pub z_end: f64,
}

impl LaneLineSpec {
    pub fn contains(&self, x: f64, z: f64) -> bool {
        if (x - self.offset_x).abs() > 0.5 * self.width_m || z < self.z_start || z > self.z_end {
            return false;
        }
        match self.pattern {
            LinePattern::Solid => true,
            LinePattern::Dashed { dash_m, gap_m, phase_m } => (z - phase_m).rem_euclid(dash_m + gap_m) < dash_m,
        }
    }

    /// Painted intervals `[z0, z1]` along the line.
    pub fn segments(&self) -> Vec<(f64, f64)> {
        match self.pattern {
            LinePattern::Solid => vec![(self.z_start, self.z_end)],
            LinePattern::Dashed { dash_m, gap_m, phase_m } => {
                let period = dash_m + gap_m;
                let mut out = Vec::new();
                let mut z = phase_m + ((self.z_start - phase_m) / period).floor() * period;
                while z < self.z_end {
                    let (a, b) = (z.max(self.z_start), (z + dash_m).min(self.z_end));
                    if b > a {
                        out.push((a, b));
                    }
                    z += period;
                }
                out
            }
        }
    }
}

/// Building fronts on both sides of the road, covered by textured panels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FacadeSpec {
    /// Lateral distance of both facade planes from the road axis.
    pub distance_m: f64,
    /// Probability that a panel slot is filled, left then right.
    pub density: [f64; 2],
    pub z_start: f64,
    pub z_end: f64,
    pub height_m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// RMS displacement of the per-view image warp, in pixels.
    pub pixel_sigma: f64,
    /// Fraction of gross outliers for the correspondence generators.
    pub outlier_fraction: f64,
}

/// Applied to the current frame only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Degradation {
    pub erase_paint: bool,
    /// Multiplier on all RGB values.
    pub gain: f64,
    /// Standard deviation of additive per-channel noise.
    pub intensity_noise: f64,
}

impl Default for Degradation {
    fn default() -> Self {
        Self {
            erase_paint: true,
            gain: 0.6,
            intensity_noise: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub seed: u64,
    pub width: usize,
    pub height: usize,
    pub intrinsics: CameraIntrinsics,
    pub camera_height: f64,
    pub lane_width: f64,
    pub lane_lines: Vec<LaneLineSpec>,
    pub facades: FacadeSpec,
    /// Probability of a dark patch per 2 m ground cell.
    pub ground_patch_density: f64,
    pub database_poses: Vec<RigidPose>,
    pub current_pose: RigidPose,
    pub noise: NoiseSpec,
    pub degradation: Degradation,
    pub origin: [f64; 2],
}

fn small_rotation(rng: &mut ChaCha8Rng, yaw_deg: f64, pitch_deg: f64, roll_deg: f64) -> nalgebra::Matrix3<f64> {
    let v = Vector3::new(
        rng.random_range(-pitch_deg..=pitch_deg).to_radians(),
        rng.random_range(-yaw_deg..=yaw_deg).to_radians(),
        rng.random_range(-roll_deg..=roll_deg).to_radians(),
    );
    RigidPose::from_rotation_vector(v, Vector3::zeros()).rotation
}

impl SceneSpec {
    /// A straight two-lane street: eight database frames 2.5 m apart along
    /// the road and a current frame among them, a dashed yellow centre line
    /// on the driver's left and panel-covered facades on both sides.
    pub fn street(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x05EE_D0F5_7EE7);
        let database_poses = (0..8)
            .map(|i| {
                let center = Vector3::new(
                    rng.random_range(-0.3..=0.3),
                    rng.random_range(-0.05..=0.05),
                    -7.5 + 2.5 * i as f64 + rng.random_range(-0.3..=0.3),
                );
                RigidPose::from_center(small_rotation(&mut rng, 1.5, 0.5, 0.3), center)
            })
            .collect();
        let current_center = Vector3::new(rng.random_range(-0.3..=0.3), 0.0, rng.random_range(0.5..=1.5));
        let current_pose = RigidPose::from_center(small_rotation(&mut rng, 1.5, 0.5, 0.3), current_center);
        Self {
            seed,
            width: 1280,
            height: 720,
            intrinsics: CameraIntrinsics::reference_phone(),
            camera_height: 1.4,
            lane_width: 3.7,
            lane_lines: vec![LaneLineSpec {
                offset_x: -1.85,
                width_m: 0.15,
                color: LaneColor::Yellow,
                pattern: LinePattern::Dashed {
                    dash_m: 3.0,
                    gap_m: 6.0,
                    phase_m: 0.0,
                },
                z_start: -20.0,
                z_end: 150.0,
            }],
            facades: FacadeSpec {
                distance_m: 7.5,
                density: [0.7, 0.7],
                z_start: -20.0,
                z_end: 150.0,
                height_m: 9.4,
            },
            ground_patch_density: 0.12,
            database_poses,
            current_pose,
            noise: NoiseSpec {
                pixel_sigma: 0.0,
                outlier_fraction: 0.0,
            },
            degradation: Degradation::default(),
            origin: DEFAULT_ORIGIN,
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let fail = |m: &str| Err(SynthError::SpecInvalid(m.to_string()));
        if self.database_poses.len() < 2 {
            return fail("need at least two database poses");
        }
        if self.width < 32 || self.height < 32 {
            return fail("image must be at least 32x32");
        }
        if self.intrinsics.validate().is_err() {
            return fail("invalid intrinsics");
        }
        if !(self.camera_height > 0.0 && self.lane_width > 0.0) {
            return fail("camera height and lane width must be positive");
        }
        if self.facades.density.iter().any(|d| !(0.0..=1.0).contains(d))
            || !(0.0..=1.0).contains(&self.ground_patch_density)
        {
            return fail("densities must lie in [0, 1]");
        }
        if !(self.facades.distance_m > 0.0 && self.facades.height_m > 0.0 && self.facades.z_end > self.facades.z_start)
        {
            return fail("invalid facade geometry");
        }
        if self.lane_lines.iter().any(|l| {
            !(l.width_m > 0.0 && l.z_end > l.z_start)
                || matches!(l.pattern, LinePattern::Dashed { dash_m, gap_m, .. } if !(dash_m > 0.0 && gap_m >= 0.0))
        }) {
            return fail("invalid lane line");
        }
        if !(self.noise.pixel_sigma >= 0.0 && (0.0..1.0).contains(&self.noise.outlier_fraction)) {
            return fail("invalid noise levels");
        }
        let d = &self.degradation;
        if !(d.gain > 0.0 && d.gain <= 1.0 && d.intensity_noise >= 0.0) {
            return fail("invalid degradation");
        }
        Ok(())
    }

    /// Camera poses in output order: database views, then the current view.
    pub fn all_poses(&self) -> Vec<RigidPose> {
        let mut v = self.database_poses.clone();
        v.push(self.current_pose);
        v
    }
}
