//! Writes a scene to disk in the layout the CLI consumes.

use std::fs;
use std::path::{Path, PathBuf};

use safedrive_core::database::EARTH_RADIUS_M;
use safedrive_core::pipeline::{PipelineParams, RunConfig};
use safedrive_core::RigidPose;

use crate::{generate_scene, GroundTruth, SceneSpec, SynthError};

pub const CASE_FILE: &str = "case.toml";
pub const MANIFEST_FILE: &str = "manifest.tsv";
pub const CURRENT_IMAGE: &str = "current.png";
pub const TRUTH_FILE: &str = "truth.txt";
pub const SPEC_FILE: &str = "scene.toml";

#[derive(Debug, Clone)]
pub struct CaseFiles {
    pub dir: PathBuf,
    pub config: RunConfig,
    pub truth: GroundTruth,
}

/// Latitude and longitude of a camera, treating +z as north and +x as east.
pub fn geo_position(origin: [f64; 2], pose: &RigidPose) -> (f64, f64) {
    let c = pose.center();
    let lat = origin[0] + (c.z / EARTH_RADIUS_M).to_degrees();
    let lon = origin[1] + (c.x / (EARTH_RADIUS_M * origin[0].to_radians().cos())).to_degrees();
    (lat, lon)
}

fn write(path: &Path, text: &str) -> Result<(), SynthError> {
    fs::write(path, text).map_err(|source| SynthError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Renders the scene into `dir`: database images plus manifest, the degraded
/// current image, the ground-truth lane segment, the scene spec and a
/// `case.toml` run description with paths relative to `dir`.
pub fn write_case(dir: &Path, spec: &SceneSpec) -> Result<CaseFiles, SynthError> {
    fs::create_dir_all(dir).map_err(|source| SynthError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let (images, truth) = generate_scene(spec)?;
    let db_count = spec.database_poses.len();

    let mut manifest = String::from("# id\tlatitude\tlongitude\timage\n");
    for (i, (img, pose)) in images.iter().zip(&spec.database_poses).enumerate() {
        let name = format!("db_{i:02}.png");
        img.save(&dir.join(&name))?;
        let (lat, lon) = geo_position(spec.origin, pose);
        manifest.push_str(&format!("db_{i:02}\t{lat:.9}\t{lon:.9}\t{name}\n"));
    }
    write(&dir.join(MANIFEST_FILE), &manifest)?;
    images[db_count].save(&dir.join(CURRENT_IMAGE))?;

    let truth_path = match &truth.truth_line {
        Some(t) => {
            write(
                &dir.join(TRUTH_FILE),
                &format!("{} {} {} {}\n", t.start.u, t.start.v, t.end.u, t.end.v),
            )?;
            Some(PathBuf::from(TRUTH_FILE))
        }
        None => None,
    };

    let (latitude, longitude) = geo_position(spec.origin, &spec.current_pose);
    let config = RunConfig {
        manifest: PathBuf::from(MANIFEST_FILE),
        image: PathBuf::from(CURRENT_IMAGE),
        latitude,
        longitude,
        truth: truth_path,
        params: PipelineParams {
            intrinsics: spec.intrinsics,
            ..PipelineParams::default()
        },
    };
    let case_text = toml::to_string(&config).map_err(|e| SynthError::Serialize(e.to_string()))?;
    write(&dir.join(CASE_FILE), &case_text)?;
    let spec_text = toml::to_string(spec).map_err(|e| SynthError::Serialize(e.to_string()))?;
    write(&dir.join(SPEC_FILE), &spec_text)?;

    Ok(CaseFiles {
        dir: dir.to_path_buf(),
        config,
        truth,
    })
}
