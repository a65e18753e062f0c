// Copyright (c) The dmsb Authors
// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

/// Errors produced anywhere in the embedding pipeline.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Compressed stream was truncated, overran, or decoded to an impossible pixel.
    #[error("corrupt stream: {0}")]
    Corrupt(String),

    /// The requested payload (or displaced bitstream) does not fit.
    #[error("capacity exceeded: requested {requested} bits, maximum is {max_payload} bits")]
    Capacity { requested: usize, max_payload: usize },

    /// The image compresses so poorly that the displaced bitstream cannot be
    /// stored even with an empty watermark.
    #[error("image is incompressible: {displaced} displaced bits exceed gap capacity {gap_capacity}")]
    Incompressible { displaced: usize, gap_capacity: usize },

    #[error("header integrity check failed: {0}")]
    Integrity(String),

    #[error("watermark extraction failed: {0}")]
    ExtractFailure(String),

    #[error("image restoration failed: {0}")]
    RestoreFailure(String),
}

pub type Result<T> = std::result::Result<T, Error>;
