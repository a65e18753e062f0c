// Copyright (c) The dmsb Authors
// SPDX-License-Identifier: Apache-2.0

//! Owner, embedder and receiver sides of the protocol.
//!
//! The owner compresses the image, encrypts and shuffles the resulting buffer
//! and writes it into planes 1–6 (spilling into the plane 7/8 gaps when it
//! does not fit), then writes plaintext headers. The embedder, holding only
//! the watermark key, writes three RS-coded copies of the encrypted payload
//! into planes 7 and 8 with identical bits in both planes. The receiver can
//! extract the payload from an attacked image with the watermark key, or
//! restore the exact original from an intact image with the image keys.

pub mod crop;
pub mod header;

use crate::cipher::{
    block_permute, keystream, xor_bits, Direction, Key128, KeyBundle, STREAM_FILLER, STREAM_IMAGE, STREAM_WATERMARK,
};
use crate::compress::{compress_image, decompress_bits};
use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::rs::{bits_to_symbols, RsCode, CODEWORD_BITS};
use crate::spiral::{build_layout_with, displace_bits, max_payload, restore_bits, Layout, MAX_PAYLOAD_BITS};

pub use crop::{detect_crop_map, fuse, CropMap};
pub use header::{read_header, write_header, Header};

/// Planes 1–6 carry the leading part of the encrypted buffer.
pub const LOW_PLANES: usize = 6;

/// Result of the owner's preparation.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub image: GrayImage,
    pub header: Header,
    /// Length of the compressed stream before padding.
    pub compressed_bits: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Extracted {
    pub payload: Vec<bool>,
    pub len: usize,
    pub flag: bool,
    /// Codewords that fell back to their raw systematic symbols.
    pub failed_codewords: usize,
    pub trusted_fraction: f64,
}

/// Protocol parameters shared by all parties: the payload code rate.
#[derive(Debug, Clone, Default)]
pub struct Codec {
    code: RsCode,
}

impl Codec {
    pub fn new(k: usize) -> Result<Self> {
        Ok(Self { code: RsCode::new(k)? })
    }

    pub fn code(&self) -> &RsCode {
        &self.code
    }

    fn layout(&self, image: &GrayImage, len: usize, displaced: usize) -> Result<Layout> {
        build_layout_with(image.height(), image.width(), len, &self.code, displaced)
    }

    /// Headers sit at positions that depend only on the image size.
    fn frame(&self, image: &GrayImage) -> Result<Layout> {
        self.layout(image, 0, 0)
    }

    pub fn prepare(&self, image: &GrayImage, keys: &KeyBundle, requested_payload: usize) -> Result<Prepared> {
        let (h, w) = (image.height(), image.width());
        let n = h * w;
        let low = LOW_PLANES * n;
        let pkg = compress_image(image)?;
        let compressed_bits = pkg.total_bits();
        let mut buffer = pkg.stream;
        let displaced = compressed_bits.saturating_sub(low);
        if buffer.len() < low {
            buffer.resize(low, false);
        }
        let max = max_payload(h, w, &self.code, displaced)?.ok_or(Error::Incompressible {
            displaced,
            gap_capacity: 2 * (n - crate::spiral::HEADER_BITS),
        })?;
        let len = requested_payload.min(max);
        let layout = self.layout(image, len, displaced)?;

        let buffer = block_permute(
            &xor_bits(&buffer, &keys.image, STREAM_IMAGE),
            &keys.shuffle,
            Direction::Forward,
        );
        let mut out = GrayImage::filled(h, w, 0);
        for (i, &b) in buffer[..low].iter().enumerate() {
            out.set_bit(i % n, (i / n) as u8 + 1, b);
        }
        // every non-header plane 7/8 position starts as filler
        let filler = keystream(&keys.image, STREAM_FILLER, 2 * layout.gaps.len() + 6 * layout.copy_len);
        let mut filler = filler.into_iter();
        for &p in layout.copies.iter().flatten().chain(&layout.gaps) {
            let px = layout.order[p];
            out.set_bit(px, 7, filler.next().unwrap());
            out.set_bit(px, 8, filler.next().unwrap());
        }
        displace_bits(&layout, &mut out, &buffer[low..])?;
        let header = Header {
            len,
            flag: displaced > 0,
            displaced,
        };
        write_header(&layout, &mut out, &header);
        Ok(Prepared {
            image: out,
            header,
            compressed_bits,
        })
    }

    /// Payload allowance recorded by the owner.
    pub fn max_capacity(&self, carrier: &GrayImage) -> Result<usize> {
        Ok(read_header(&self.frame(carrier)?, carrier)?.len)
    }

    /// Largest payload whose coded copy fits the copy length reserved for `cap` bits.
    fn payload_limit(&self, cap: usize) -> usize {
        let codewords = self.code.codewords_for(cap);
        (codewords * self.code.payload_bits_per_codeword()).min(MAX_PAYLOAD_BITS)
    }

    pub fn embed(&self, carrier: &GrayImage, payload: &[bool], watermark_key: &Key128) -> Result<GrayImage> {
        if payload.is_empty() {
            return Err(Error::InvalidInput("payload must be non-empty".into()));
        }
        let header = read_header(&self.frame(carrier)?, carrier)?;
        let limit = self.payload_limit(header.len);
        if payload.len() > limit {
            return Err(Error::Capacity {
                requested: payload.len(),
                max_payload: limit,
            });
        }
        let old = self.layout(carrier, header.len, header.displaced)?;
        let new = self.layout(carrier, payload.len(), header.displaced)?;
        let mut out = carrier.clone();
        let spilled = restore_bits(&old, carrier, header.displaced)?;

        let coded = self.code.pack(&xor_bits(payload, watermark_key, STREAM_WATERMARK))?;
        for copy in &new.copies {
            for (&p, &b) in copy.iter().zip(&coded) {
                let px = new.order[p];
                out.set_bit(px, 7, b);
                out.set_bit(px, 8, b);
            }
        }
        displace_bits(&new, &mut out, &spilled)?;
        header::write_len(&new, &mut out, payload.len());
        Ok(out)
    }

    pub fn extract(&self, attacked: &GrayImage, watermark_key: &Key128) -> Result<Extracted> {
        let frame = self.frame(attacked)?;
        let map = detect_crop_map(attacked);
        let sample = |p: usize| {
            let px = frame.order[p];
            (attacked.bit(px, 8), map.is_trusted(px))
        };
        let fused_field = |start: [usize; 3], len: usize| -> (Vec<bool>, usize) {
            let mut trusted_bits = 0;
            let bits = (0..len)
                .map(|j| {
                    let (b, s): (Vec<bool>, Vec<bool>) = start.iter().map(|&a| sample(a + j)).unzip();
                    trusted_bits += s.iter().filter(|&&t| t).count();
                    fuse([b[0], b[1], b[2]], [s[0], s[1], s[2]])
                })
                .collect();
            (bits, trusted_bits)
        };

        let len_starts = [0, 1, 2].map(|s| frame.len_field(s).start);
        let (len_bits, trusted) = fused_field(len_starts, CODEWORD_BITS);
        if trusted == 0 {
            return Err(Error::ExtractFailure("every LEN copy is cropped".into()));
        }
        let len = header::decode_len_or_raw(&len_bits);
        if len == 0 {
            return Err(Error::ExtractFailure("payload length is zero".into()));
        }
        let layout = self
            .layout(attacked, len, 0)
            .map_err(|e| Error::ExtractFailure(format!("length {len} does not fit: {e}")))?;

        let (mut ones, mut votes) = (0usize, 0usize);
        for s in 0..3 {
            for p in frame.flag_field(s) {
                let (b, t) = sample(p);
                if t {
                    votes += 1;
                    ones += b as usize;
                }
            }
        }
        let flag = 2 * ones > votes;

        let mut coded = Vec::with_capacity(layout.copy_len);
        for j in 0..layout.copy_len {
            let mut b = [false; 3];
            let mut s = [false; 3];
            for c in 0..3 {
                (b[c], s[c]) = sample(layout.copies[c][j]);
            }
            coded.push(fuse(b, s));
        }
        let mut failed = 0;
        let messages: Vec<Vec<u8>> = coded
            .chunks(CODEWORD_BITS)
            .map(|cw| {
                let (msg, ok) = self.code.decode_or_raw(&bits_to_symbols(cw));
                failed += !ok as usize;
                msg
            })
            .collect();
        let encrypted = self.code.unpack(&messages, len)?;
        Ok(Extracted {
            payload: xor_bits(&encrypted, watermark_key, STREAM_WATERMARK),
            len,
            flag,
            failed_codewords: failed,
            trusted_fraction: map.trusted_fraction(),
        })
    }

    /// Recovers the original image from an unattacked carrier (marked or not).
    pub fn restore(&self, marked: &GrayImage, image_key: &Key128, shuffle_key: &Key128) -> Result<GrayImage> {
        let (h, w) = (marked.height(), marked.width());
        let n = h * w;
        let frame = self.frame(marked)?;
        let header = read_header(&frame, marked).map_err(|e| Error::RestoreFailure(e.to_string()))?;
        let layout = self
            .layout(marked, header.len, header.displaced)
            .map_err(|e| Error::RestoreFailure(e.to_string()))?;
        let mut buffer = Vec::with_capacity(LOW_PLANES * n + header.displaced);
        for k in 1..=LOW_PLANES as u8 {
            buffer.extend((0..n).map(|i| marked.bit(i, k)));
        }
        buffer.extend(restore_bits(&layout, marked, header.displaced)?);
        let plain = xor_bits(
            &block_permute(&buffer, shuffle_key, Direction::Inverse),
            image_key,
            STREAM_IMAGE,
        );
        let (image, _) = decompress_bits(&plain, h, w).map_err(|e| Error::RestoreFailure(e.to_string()))?;
        Ok(image)
    }
}

pub fn owner_prepare(image: &GrayImage, keys: &KeyBundle, requested_payload: usize) -> Result<Prepared> {
    Codec::default().prepare(image, keys, requested_payload)
}

pub fn max_capacity(carrier: &GrayImage) -> Result<usize> {
    Codec::default().max_capacity(carrier)
}

pub fn embed_watermark(carrier: &GrayImage, payload: &[bool], watermark_key: &Key128) -> Result<GrayImage> {
    Codec::default().embed(carrier, payload, watermark_key)
}

pub fn extract_watermark(attacked: &GrayImage, watermark_key: &Key128) -> Result<Extracted> {
    Codec::default().extract(attacked, watermark_key)
}

pub fn restore_image(marked: &GrayImage, image_key: &Key128, shuffle_key: &Key128) -> Result<GrayImage> {
    Codec::default().restore(marked, image_key, shuffle_key)
}
