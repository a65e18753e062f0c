// Copyright (c) The dmsb Authors
// SPDX-License-Identifier: Apache-2.0

//! Command-line front end and experiment harness for `dmsb-core`.

pub mod config;
pub mod experiment;
pub mod summary;

use dmsb_core::Error;

/// Process exit statuses of the `dmsb` binary.
pub mod exit {
    pub const OK: i32 = 0;
    /// Any failure without a dedicated status below.
    pub const OTHER: i32 = 1;
    /// Command-line usage error (reported by the argument parser).
    pub const USAGE: i32 = 2;
    pub const CAPACITY: i32 = 3;
    pub const INTEGRITY: i32 = 4;
    pub const EXTRACT_FAILURE: i32 = 5;
    pub const RESTORE_FAILURE: i32 = 6;
    /// The compressed image does not fit beside the header and watermark.
    pub const INCOMPRESSIBLE: i32 = 7;
}

/// Maps an error chain to the exit status of its first library error.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    match err.chain().find_map(|e| e.downcast_ref::<Error>()) {
        Some(Error::Capacity { .. }) => exit::CAPACITY,
        Some(Error::Integrity(_)) => exit::INTEGRITY,
        Some(Error::ExtractFailure(_)) => exit::EXTRACT_FAILURE,
        Some(Error::RestoreFailure(_)) => exit::RESTORE_FAILURE,
        Some(Error::Incompressible { .. }) => exit::INCOMPRESSIBLE,
        _ => exit::OTHER,
    }
}
