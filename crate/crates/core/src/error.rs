use std::io;

use thiserror::Error;

/// Errors raised by the toolkit. Each variant corresponds to one failure
/// class a caller can act on; diagnostics that are not failures (graph
/// validation) are reported as values instead.
#[derive(Debug, Error)]
pub enum Error {
    #[error("ambiguous correspondence: predicted nodes {first} and {second} both map to ground-truth node {target}")]
    AmbiguousCorrespondence { first: u32, second: u32, target: u32 },

    #[error("bad calibration for camera {camera}: {reason}")]
    BadCalibration { camera: String, reason: String },

    #[error("invalid point at index {index}: non-finite coordinate")]
    InvalidPoints { index: usize },

    #[error("no such instance: {0}")]
    NoSuchInstance(u32),

    #[error("relation pair needs two distinct instances, got {0} twice")]
    SelfPair(u32),

    #[error("relation point set carries no provenance ({points} points, {tags} tags)")]
    NoProvenance { points: usize, tags: usize },

    #[error("crop-to-hands fired but no poses were supplied")]
    NoHands,

    #[error("bad logits: {0}")]
    BadLogits(String),

    #[error("bad cost matrix: {0}")]
    BadCost(String),

    #[error("track {0} references no scene graph")]
    EmptyTrack(u32),

    #[error("bad role scores: {0}")]
    BadScores(String),

    #[error("unknown role name {0:?}")]
    BadRole(String),

    #[error("misaligned takes: {0}")]
    MisalignedTakes(String),

    #[error("bad scenario script: {0}")]
    BadScript(String),

    #[error("invalid take: {0}")]
    InvalidTake(String),

    #[error("unsupported ply: {0}")]
    UnsupportedPly(String),

    #[error("format_version mismatch: expected {expected}, found {found}")]
    BadVersion { expected: u32, found: u64 },

    #[error("bad schema: {0}")]
    BadSchema(String),

    #[error("bad config: {0}")]
    BadConfig(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
