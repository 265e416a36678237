// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid topology: {0}")]
    Topology(String),

    #[error("topology is disconnected: switch {0} unreachable")]
    Disconnected(usize),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}:{line}: {msg}")]
    Trace {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("slot allocation infeasible: {0}")]
    Allocation(String),

    #[error("slot information packet: {0}")]
    Codec(String),

    #[error("training set: {0}")]
    Training(String),

    #[error("optimization diverged: {0}")]
    Diverged(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("config parse error: {0}")]
    Toml(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
