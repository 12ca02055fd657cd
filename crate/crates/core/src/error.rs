use thiserror::Error;

/// Errors produced while loading inputs, building indexes, or running models.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("invalid document {doc_id}: {msg}")]
    Document { doc_id: String, msg: String },

    #[error("invalid query {query_id}: {msg}")]
    Query { query_id: String, msg: String },

    #[error("qrels error: {0}")]
    Qrels(String),

    #[error("index error: {0}")]
    Index(String),

    #[error("training error: {0}")]
    Training(String),

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("benchmark error: {0}")]
    Benchmark(String),
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<String>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
