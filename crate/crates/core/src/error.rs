use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("tensor of {dims:?} exceeds addressable size")]
    Size { dims: Vec<usize> },

    #[error("format error at byte {offset}: {msg}")]
    Format { offset: u64, msg: String },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("config error{}: {msg}", location(.layer, .field))]
    Config { layer: Option<usize>, field: Option<String>, msg: String },

    #[error("layer {index}: {source}")]
    Layer {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] io::Error),
}

fn location(layer: &Option<usize>, field: &Option<String>) -> String {
    match (layer, field) {
        (Some(l), Some(f)) => format!(" in layer {l}, field `{f}`"),
        (Some(l), None) => format!(" in layer {l}"),
        (None, Some(f)) => format!(" in field `{f}`"),
        (None, None) => String::new(),
    }
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn at_layer(self, index: usize) -> Self {
        match self {
            e @ (Error::Layer { .. } | Error::Config { layer: Some(_), .. }) => e,
            Error::Config { layer: None, field, msg } => Error::Config { layer: Some(index), field, msg },
            e => Error::Layer { index, source: Box::new(e) },
        }
    }
}

pub(crate) fn shape_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Shape(msg.into()))
}
