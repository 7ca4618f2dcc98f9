//! Synthetic street scenes with exact ground truth.
//!
//! A [`SceneSpec`] describes a straight road with painted lane lines,
//! panel-covered facades and a set of camera poses. [`generate_scene`]
//! renders every view and returns the ground truth (poses, 3D features,
//! lane geometry, paint labels and the current view's lane segment).

use std::path::PathBuf;

use safedrive_core::epipolar::{fundamental_from_pose, FundamentalMatrix};
use safedrive_core::geometry::project;
use safedrive_core::image::{ColorImage, Dims, Mask};
use safedrive_core::lanes::LaneColor;
use safedrive_core::pipeline::TruthLine;
use safedrive_core::{CameraIntrinsics, Pixel, Point3D, RigidPose};

pub mod case;
pub mod correspondences;
pub mod render;
pub mod spec;
pub mod world;

pub use case::{write_case, CaseFiles};
pub use render::{degrade, pixel_ray, render_view, RenderedView, WarpField};
pub use spec::{Degradation, FacadeSpec, LaneLineSpec, LinePattern, NoiseSpec, SceneSpec};
pub use world::{Hit, Surface, World};

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("invalid scene spec: {0}")]
    SpecInvalid(String),
    #[error(transparent)]
    Core(#[from] safedrive_core::Error),
    #[error("writing {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("serializing case description: {0}")]
    Serialize(String),
}

/// A painted interval of a lane line's centre, on the ground plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaneSegment {
    pub color: LaneColor,
    pub start: Point3D,
    pub end: Point3D,
    pub width_m: f64,
}

impl LaneSegment {
    /// Outline corners, counter-clockwise seen from above.
    pub fn outline(&self) -> [Point3D; 4] {
        let h = 0.5 * self.width_m;
        [
            Point3D::new(self.start.x - h, self.start.y, self.start.z),
            Point3D::new(self.start.x + h, self.start.y, self.start.z),
            Point3D::new(self.end.x + h, self.end.y, self.end.z),
            Point3D::new(self.end.x - h, self.end.y, self.end.z),
        ]
    }
}

#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub intrinsics: CameraIntrinsics,
    pub dims: Dims,
    /// Database poses followed by the current pose.
    pub poses: Vec<RigidPose>,
    pub database_count: usize,
    /// Exact 3D panel-cell corners.
    pub feature_points: Vec<Point3D>,
    pub lane_segments: Vec<LaneSegment>,
    /// Per view, the paint class of each pixel (row-major).
    pub paint_labels: Vec<Vec<Option<LaneColor>>>,
    /// First lane line's centre projected into the current view.
    pub truth_line: Option<TruthLine>,
}

impl GroundTruth {
    pub fn current_view(&self) -> usize {
        self.poses.len() - 1
    }

    pub fn current_pose(&self) -> &RigidPose {
        &self.poses[self.current_view()]
    }

    /// F with `b^T F a = 0` for pixel `a` in view `i` and `b` in view `j`.
    pub fn fundamental(&self, i: usize, j: usize) -> Result<FundamentalMatrix, SynthError> {
        let rel = self.poses[j].relative_to(&self.poses[i]);
        Ok(fundamental_from_pose(&rel, &self.intrinsics, &self.intrinsics)?)
    }

    /// Projections of the feature points into a view; `None` when behind the
    /// camera or outside the frame.
    pub fn projections(&self, view: usize) -> Vec<Option<Pixel>> {
        self.feature_points
            .iter()
            .map(|p| {
                let proj = project(p, &self.poses[view], &self.intrinsics).ok()?;
                (proj.in_front() && self.dims.contains(proj.pixel.u, proj.pixel.v)).then_some(proj.pixel)
            })
            .collect()
    }

    pub fn paint_mask(&self, view: usize, color: LaneColor) -> Mask {
        Mask {
            width: self.dims.width,
            height: self.dims.height,
            data: self.paint_labels[view].iter().map(|l| *l == Some(color)).collect(),
        }
    }
}

/// Generated world plus the spec that produced it.
#[derive(Debug, Clone)]
pub struct Scene {
    pub spec: SceneSpec,
    pub world: World,
}

impl Scene {
    pub fn new(spec: SceneSpec) -> Result<Self, SynthError> {
        spec.validate()?;
        let world = World::generate(&spec);
        Ok(Self { spec, world })
    }

    pub fn dims(&self) -> Dims {
        Dims {
            width: self.spec.width,
            height: self.spec.height,
        }
    }

    pub fn view_count(&self) -> usize {
        self.spec.database_poses.len() + 1
    }

    pub fn pose(&self, view: usize) -> RigidPose {
        self.spec.all_poses()[view]
    }

    /// Renders one view; the last view is the current frame and receives the degradation.
    pub fn render(&self, view: usize) -> RenderedView {
        let current = view + 1 == self.view_count();
        let warp = WarpField::new(
            self.spec.seed ^ (view as u64 + 1).wrapping_mul(0xD1B5_4A32_D192_ED03),
            self.spec.noise.pixel_sigma,
        );
        let erase = current && self.spec.degradation.erase_paint;
        let mut out = render_view(
            &self.world,
            &self.spec.intrinsics,
            self.spec.width,
            self.spec.height,
            &self.pose(view),
            &warp,
            erase,
        );
        if current {
            out.image = degrade(&out.image, &self.spec.degradation, self.spec.seed ^ 0xDE6_2ADE);
        }
        out
    }

    /// Noise-free surface hit through a pixel of an arbitrary camera.
    pub fn raycast(&self, pose: &RigidPose, pixel: &Pixel) -> Hit {
        let (o, d) = pixel_ray(&self.spec.intrinsics, pose, pixel);
        self.world.trace(&o, &d, false)
    }

    pub fn lane_segments(&self) -> Vec<LaneSegment> {
        let y = self.world.ground_y();
        self.spec
            .lane_lines
            .iter()
            .flat_map(|l| {
                l.segments().into_iter().map(move |(z0, z1)| LaneSegment {
                    color: l.color,
                    start: Point3D::new(l.offset_x, y, z0),
                    end: Point3D::new(l.offset_x, y, z1),
                    width_m: l.width_m,
                })
            })
            .collect()
    }

    /// Centre of the first lane line in the current view, from where it
    /// enters the frame up to 40 m ahead of the camera.
    pub fn truth_line(&self) -> Option<TruthLine> {
        let line = self.spec.lane_lines.first()?;
        let pose = self.spec.current_pose;
        let k = &self.spec.intrinsics;
        let dims = self.dims();
        let z_cam = pose.center().z;
        let (z0, z1) = ((z_cam + 0.5).max(line.z_start), (z_cam + 40.0).min(line.z_end));
        let steps = ((z1 - z0) / 0.01).ceil() as usize;
        let visible: Vec<Pixel> = (0..=steps)
            .filter_map(|i| {
                let z = z0 + (z1 - z0) * i as f64 / steps as f64;
                let p = project(&Point3D::new(line.offset_x, self.world.ground_y(), z), &pose, k).ok()?;
                (p.in_front() && dims.contains(p.pixel.u, p.pixel.v)).then_some(p.pixel)
            })
            .collect();
        if visible.len() < 2 {
            return None;
        }
        Some(TruthLine {
            start: visible[0],
            end: *visible.last()?,
        })
    }

    pub fn ground_truth(&self, paint_labels: Vec<Vec<Option<LaneColor>>>) -> GroundTruth {
        GroundTruth {
            intrinsics: self.spec.intrinsics,
            dims: self.dims(),
            poses: self.spec.all_poses(),
            database_count: self.spec.database_poses.len(),
            feature_points: self.world.panel_corners(),
            lane_segments: self.lane_segments(),
            paint_labels,
            truth_line: self.truth_line(),
        }
    }
}

/// Renders all views (database first, current last) with their ground truth.
pub fn generate_scene(spec: &SceneSpec) -> Result<(Vec<ColorImage>, GroundTruth), SynthError> {
    let scene = Scene::new(spec.clone())?;
    let (images, labels): (Vec<_>, Vec<_>) = (0..scene.view_count())
        .map(|v| {
            let r = scene.render(v);
            (r.image, r.paint)
        })
        .unzip();
    let truth = scene.ground_truth(labels);
    Ok((images, truth))
}
