//! Crate-wide error type.

use std::path::PathBuf;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    // --- corpus ---
    #[error("duplicate paper_id `{0}` in corpus")]
    DuplicatePaperId(String),
    #[error(
        "insufficient venue data for `{venue_id}`: {papers} paper(s) with scores, need at least 2"
    )]
    InsufficientVenueData { venue_id: String, papers: usize },
    #[error("degenerate venue score distribution for `{0}`: std of per-paper means is 0")]
    DegenerateVenueScores(String),
    #[error("sample of {requested} requested but only {available} pairs available")]
    SampleTooLarge { requested: usize, available: usize },
    #[error("unsupported corpus schema version `{0}` (supported: {1})")]
    UnsupportedSchemaVersion(String, String),

    // --- judge ---
    #[error("no binding provided for placeholder `{{{0}}}`")]
    MissingPlaceholder(String),
    #[error("transport failure for request {request_key}: {message}")]
    Transport {
        request_key: String,
        message: String,
    },
    #[error("cache entry {path} is corrupt: {reason}")]
    CacheCorrupt { path: PathBuf, reason: String },
    #[error("scripted judge: unknown paper `{0}`")]
    UnknownPaper(String),
    #[error("scripted judge: prompt carries no parseable paper features")]
    UnreadablePrompt,

    // --- search ---
    #[error("expected exactly {expected} votes, got {got}")]
    WrongVoteCount { expected: usize, got: usize },
    #[error("coverage matrix incomplete: {0} missing cell(s), first few: {1:?}")]
    IncompleteMatrix(usize, Vec<(String, String)>),
    #[error("generation underfilled: wanted {wanted} distinct hypotheses, got {got}")]
    GenerationUnderfilled {
        wanted: usize,
        got: usize,
        partial: Vec<String>,
    },
    #[error("paper `{0}` has no usable extended abstract")]
    MissingAbstract(String),
    #[error("checkpoint does not match the vote log on disk: {0}")]
    CheckpointMismatch(String),
    #[error("resume conflict: {0} (pass --force to override)")]
    ResumeConflict(String),

    // --- stats ---
    #[error("degenerate series: zero variance")]
    DegenerateSeries,
    #[error("design matrix is rank deficient; dependent column indices: {0:?}")]
    RankDeficient(Vec<usize>),
    #[error("too few observations: n = {n}, predictors = {p}")]
    TooFewObservations { n: usize, p: usize },
    #[error("too few rows: have {have}, need at least {need}")]
    TooFewRows { have: usize, need: usize },
    #[error("hypothesis id mismatch; missing from one input: {0:?}")]
    IdMismatch(Vec<String>),
    #[error("fewer than 2 nonzero coverage columns")]
    TooFewColumns,
    #[error("series length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    // --- annotate ---
    #[error("annotation response malformed after retry: {0}")]
    AnnotationMalformed(String),
    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    // --- ingest ---
    #[error("duplicate sidecar paper_id `{0}`")]
    DuplicateSidecarId(String),

    // --- cli / artifacts ---
    #[error("missing upstream artifact {path}: run `{producer}` first")]
    MissingArtifact { path: PathBuf, producer: String },
    #[error("output directory is locked by another process: {0}")]
    DirectoryLocked(PathBuf),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    // --- plumbing ---
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("TOML parse error: {0}")]
    Toml(String),
}

impl Error {
    /// Process exit code for the CLI: 2 validation, 3 transport, 4 resume conflict.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Transport { .. } => 3,
            Error::ResumeConflict(_) | Error::CheckpointMismatch(_) => 4,
            _ => 2,
        }
    }
}
