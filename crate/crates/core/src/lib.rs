// Copyright (c) The dmsb Authors
// SPDX-License-Identifier: Apache-2.0

//! Robust reversible watermarking in encrypted grayscale images.
//!
//! An image is compressed to free room, encrypted, and stored so that its two
//! most significant bit-planes can carry three Reed–Solomon coded copies of a
//! watermark, each written identically into planes 7 and 8. The watermark
//! survives noise, JPEG and cropping; without attack the original image is
//! recovered bit for bit.

pub mod attack;
pub mod bits;
pub mod cipher;
pub mod codec;
pub mod compress;
pub mod error;
pub mod image;
pub mod metrics;
pub mod rs;
pub mod spiral;
pub mod synth;

pub use cipher::{Key128, KeyBundle};
pub use codec::{
    embed_watermark, extract_watermark, max_capacity, owner_prepare, restore_image, Codec, Extracted, Prepared,
};
pub use error::{Error, Result};
pub use image::{bitplane_merge, bitplane_split, pgm_load, pgm_save, BitPlane, GrayImage};
