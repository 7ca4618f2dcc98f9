use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point projects with near-zero depth ({depth:e})")]
    DegenerateProjection { depth: f64 },
    #[error("viewing rays are parallel or the baseline is zero")]
    DegenerateRays,
    #[error("homogeneous solution has vanishing scale")]
    PointAtInfinity,

    #[error("image is {width}x{height}, need at least {min}x{min}")]
    ImageTooSmall { width: usize, height: usize, min: usize },
    #[error("image data length {len} does not match {width}x{height}")]
    ImageShape { width: usize, height: usize, len: usize },

    #[error("need at least {needed} correspondences, got {got}")]
    InsufficientMatches { needed: usize, got: usize },
    #[error("degenerate point configuration: {0}")]
    DegenerateConfiguration(&'static str),
    #[error("epipole lies at infinity (direction {direction:?})")]
    EpipoleAtInfinity { direction: [f64; 2] },
    #[error("cheirality vote inconclusive: best candidate has {best} of {total} votes")]
    CheiralityAmbiguous { best: usize, total: usize },

    #[error("pixel coincides with the epipole")]
    AtEpipole,

    #[error("invalid thresholds: low {low} must be below high {high}")]
    InvalidThresholds { low: f64, high: f64 },

    #[error("model is empty or only {got} 3D-2D correspondences found")]
    NoCorrespondence { got: usize },
    #[error("need at least {needed} 3D-2D correspondences, got {got}")]
    InsufficientCorrespondences { needed: usize, got: usize },
    #[error("pose unstable: {inliers} inliers after RANSAC, need {needed}")]
    PoseUnstable { inliers: usize, needed: usize },

    #[error("manifest line {line}: {message}")]
    ManifestParse { line: usize, message: String },
    #[error("duplicate record id `{0}`")]
    DuplicateId(String),
    #[error("image for record `{id}` not found at {}", path.display())]
    MissingImage { id: String, path: PathBuf },
    #[error("need at least 2 candidate images, got {0}")]
    InsufficientCandidates(usize),
    #[error("weak overlap: second-best candidate has {count} matches, need {minimum}")]
    WeakOverlap { count: usize, minimum: usize },

    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("image codec error for {}: {source}", path.display())]
    Codec {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
}

impl Error {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }
}
