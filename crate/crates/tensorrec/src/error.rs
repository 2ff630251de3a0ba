use std::io;
use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    File { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {0}: malformed record")]
    MalformedLine(usize),
    #[error("input contains no records")]
    EmptyInput,
    #[error("feature file header: {0}")]
    HeaderMismatch(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("checkpoint was trained on a different user or item vocabulary")]
    VocabMismatch,
    #[error("unknown user `{0}`")]
    UnknownUser(String),
    #[error("unknown interval {interval} (the grid has {intervals})")]
    UnknownInterval { interval: usize, intervals: usize },
    #[error("config: {0}")]
    Config(String),
    #[error("variant `{variant}` requires --{flag}")]
    MissingFlag { variant: &'static str, flag: &'static str },
    #[error(transparent)]
    Core(#[from] tensorrec_core::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn open(path: &std::path::Path) -> Result<std::fs::File> {
    std::fs::File::open(path).map_err(|source| Error::File {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn create(path: &std::path::Path) -> Result<std::fs::File> {
    std::fs::File::create(path).map_err(|source| Error::File {
        path: path.to_path_buf(),
        source,
    })
}
