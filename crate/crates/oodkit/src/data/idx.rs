//! IDX binary format (the MNIST container): big-endian magic, big-endian
//! dimension sizes, then raw unsigned bytes. Magic 2051 marks 3-D image
//! files, 2049 marks 1-D label files.

use std::path::Path;

use crate::error::{Error, Result};

use super::ImageBatch;

const MAGIC_IMAGES: u32 = 2051;
const MAGIC_LABELS: u32 = 2049;

/// Contents of one IDX file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IdxFile {
    /// Grayscale images (channels = 1).
    Images(ImageBatch),
    Labels(Vec<u8>),
}

fn read_be_u32(bytes: &[u8], offset: usize, what: &str) -> Result<u32> {
    if offset + 4 > bytes.len() {
        return Err(Error::MalformedFile {
            offset,
            message: format!("truncated while reading {what}"),
        });
    }
    Ok(u32::from_be_bytes([
        bytes[offset],
        bytes[offset + 1],
        bytes[offset + 2],
        bytes[offset + 3],
    ]))
}

/// Parses IDX bytes into images or labels.
pub fn parse_idx(bytes: &[u8]) -> Result<IdxFile> {
    let magic = read_be_u32(bytes, 0, "magic")?;
    match magic {
        MAGIC_IMAGES => {
            let count = read_be_u32(bytes, 4, "image count")? as usize;
            let height = read_be_u32(bytes, 8, "image height")? as usize;
            let width = read_be_u32(bytes, 12, "image width")? as usize;
            let payload_len = count
                .checked_mul(height)
                .and_then(|v| v.checked_mul(width))
                .ok_or(Error::MalformedFile {
                    offset: 4,
                    message: format!("dimension overflow: {count} x {height} x {width}"),
                })?;
            let expected_end = 16 + payload_len;
            if bytes.len() < expected_end {
                return Err(Error::MalformedFile {
                    offset: bytes.len(),
                    message: format!(
                        "payload ends early: need {payload_len} bytes from offset 16"
                    ),
                });
            }
            if bytes.len() > expected_end {
                return Err(Error::MalformedFile {
                    offset: expected_end,
                    message: format!("{} trailing bytes", bytes.len() - expected_end),
                });
            }
            let batch = ImageBatch::new(count, 1, height, width, bytes[16..].to_vec())?;
            Ok(IdxFile::Images(batch))
        }
        MAGIC_LABELS => {
            let count = read_be_u32(bytes, 4, "label count")? as usize;
            let expected_end = 8 + count;
            if bytes.len() < expected_end {
                return Err(Error::MalformedFile {
                    offset: bytes.len(),
                    message: format!("payload ends early: need {count} bytes from offset 8"),
                });
            }
            if bytes.len() > expected_end {
                return Err(Error::MalformedFile {
                    offset: expected_end,
                    message: format!("{} trailing bytes", bytes.len() - expected_end),
                });
            }
            Ok(IdxFile::Labels(bytes[8..].to_vec()))
        }
        other => Err(Error::MalformedFile {
            offset: 0,
            message: format!("bad magic {other} (expected 2051 for images or 2049 for labels)"),
        }),
    }
}

/// Loads an IDX file from disk.
pub fn load_idx(path: &Path) -> Result<IdxFile> {
    let bytes = std::fs::read(path)?;
    parse_idx(&bytes)
}

/// Serializes a grayscale batch to IDX image bytes. Exact inverse of
/// parsing: load-then-write reproduces the input byte for byte.
pub fn write_idx_images(batch: &ImageBatch) -> Result<Vec<u8>> {
    if batch.channels != 1 {
        return Err(Error::InvalidParameter(format!(
            "IDX image files are single-channel, got {} channels",
            batch.channels
        )));
    }
    let mut out = Vec::with_capacity(16 + batch.pixels.len());
    out.extend_from_slice(&MAGIC_IMAGES.to_be_bytes());
    out.extend_from_slice(&(batch.count as u32).to_be_bytes());
    out.extend_from_slice(&(batch.height as u32).to_be_bytes());
    out.extend_from_slice(&(batch.width as u32).to_be_bytes());
    out.extend_from_slice(&batch.pixels);
    Ok(out)
}

/// Serializes labels to IDX label bytes.
pub fn write_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&MAGIC_LABELS.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}
