use std::path::PathBuf;

/// Errors produced by the detection pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("corrupt image: {0}")]
    CorruptImage(String),
    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),
    #[error("color images are not supported; supply a single-channel grayscale image")]
    ColorImage,
    #[error("invalid image: {0}")]
    InvalidImage(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("degenerate histogram: image has a single gray level")]
    DegenerateHistogram,
    #[error("empty breast mask")]
    EmptyMask,
    #[error("image has no mass annotation")]
    NoMassAnnotation,
    #[error("empty region: {0}")]
    EmptyRegion(&'static str),
    #[error("undefined TPF: no positive units under the chosen criterion")]
    UndefinedTpf,
    #[error("no normal views to compute false markers per image")]
    NoNormalViews,
    #[error("lesion {0} lies outside the breast")]
    LesionOutsideBreast(String),
    #[error("invalid annotation: {0}")]
    Annotation(String),
    #[error("invalid model file: {0}")]
    ModelFormat(String),
    #[error("invalid manifest: {0}")]
    Manifest(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
