use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure the pipeline can report.
///
/// Each variant carries a stable snake_case code (see [`Error::code`]) that
/// the command-line surface prints alongside the message.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("truncated header: file holds {found} bytes, header needs {needed}")]
    HeaderTruncated { needed: usize, found: usize },
    #[error("bad magic: expected \"CFT1\", found {found:?}")]
    BadMagic { found: [u8; 4] },
    #[error("unsupported dtype code {code} (expected {expected})")]
    UnsupportedDtype { code: u8, expected: u8 },
    #[error("unsupported rank {0} (expected 2 or 3)")]
    BadRank(usize),
    #[error("axis {axis} has extent 0")]
    ZeroExtent { axis: usize },
    #[error("truncated payload: expected {expected} bytes, found {found}")]
    PayloadTruncated { expected: usize, found: usize },
    #[error("{extra} trailing bytes after the payload")]
    TrailingBytes { extra: usize },
    #[error("non-finite value at flat index {index}")]
    NonFinite { index: usize },
    #[error("{0}")]
    ShapeMismatch(String),

    #[error("no class lines found")]
    EmptyPromptFile,
    #[error("line {line}: empty canonical name")]
    EmptyCanonical { line: usize },
    #[error("line {line} has {count} distinct tokens (max {max})")]
    TooManySynonyms { line: usize, count: usize, max: usize },
    #[error("{name:?} on line {line} already names class {first}")]
    DuplicateCanonical {
        line: usize,
        name: String,
        first: usize,
    },

    #[error("prompt bank has {expected} synonyms, embedding file has {found} rows")]
    RowCountMismatch { expected: usize, found: usize },
    #[error("embedding row {row} has zero norm")]
    ZeroNormEmbedding { row: usize },
    #[error("class index {index} out of range for {classes} classes")]
    ClassOutOfRange { index: usize, classes: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("class has no synonyms")]
    EmptySynonymSet,

    #[error("background index {index} lies inside the {classes} foreground labels")]
    BackgroundCollision { index: u32, classes: usize },
    #[error("label {label} at pixel {pixel} out of range for {classes} classes")]
    LabelOutOfRange {
        label: u32,
        pixel: usize,
        classes: usize,
    },
    #[error("every class has an empty union")]
    NoDefinedClasses,

    #[error("{0}")]
    InvalidArgument(String),
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io_error",
            Error::HeaderTruncated { .. } => "header_truncated",
            Error::BadMagic { .. } => "bad_magic",
            Error::UnsupportedDtype { .. } => "unsupported_dtype",
            Error::BadRank(_) => "bad_rank",
            Error::ZeroExtent { .. } => "zero_extent",
            Error::PayloadTruncated { .. } => "payload_truncated",
            Error::TrailingBytes { .. } => "trailing_bytes",
            Error::NonFinite { .. } => "non_finite_value",
            Error::ShapeMismatch(_) => "shape_mismatch",
            Error::EmptyPromptFile => "empty_prompt_file",
            Error::EmptyCanonical { .. } => "empty_canonical",
            Error::TooManySynonyms { .. } => "too_many_synonyms",
            Error::DuplicateCanonical { .. } => "duplicate_canonical",
            Error::RowCountMismatch { .. } => "row_count_mismatch",
            Error::ZeroNormEmbedding { .. } => "zero_norm_embedding",
            Error::ClassOutOfRange { .. } => "class_out_of_range",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::EmptySynonymSet => "empty_synonym_set",
            Error::BackgroundCollision { .. } => "background_collision",
            Error::LabelOutOfRange { .. } => "label_out_of_range",
            Error::NoDefinedClasses => "no_defined_classes",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Config { .. } => "config_error",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
