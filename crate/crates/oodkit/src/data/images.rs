//! Raw image folder ingestion: one file per sample, 8-bit grayscale or
//! RGB, all images required to share shape. Files are read in filename
//! order so a folder always produces the same batch.

use std::path::Path;

use crate::error::{Error, Result};

use super::ImageBatch;

const EXTENSIONS: [&str; 4] = ["png", "jpg", "jpeg", "bmp"];

/// Loads every supported image in `dir` (sorted by filename) into one
/// batch. Grayscale files stay single-channel; everything else is decoded
/// to RGB. Mixed shapes or channel counts are rejected.
pub fn load_image_folder(dir: &Path) -> Result<ImageBatch> {
    if !dir.is_dir() {
        return Err(Error::InvalidParameter(format!(
            "not a directory: {}",
            dir.display()
        )));
    }
    let mut files: Vec<_> = std::fs::read_dir(dir)?
        .collect::<std::io::Result<Vec<_>>>()?
        .into_iter()
        .map(|e| e.path())
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .map(|e| EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
                .unwrap_or(false)
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "no image files in {}",
            dir.display()
        )));
    }

    let mut shape: Option<(usize, usize, usize)> = None; // (channels, h, w)
    let mut pixels = Vec::new();
    let mut count = 0;
    for path in &files {
        let img = image::open(path).map_err(|e| {
            Error::InvalidParameter(format!("cannot decode {}: {e}", path.display()))
        })?;
        let (channels, h, w, planar) = match img {
            image::DynamicImage::ImageLuma8(gray) => {
                let (w, h) = (gray.width() as usize, gray.height() as usize);
                (1, h, w, gray.into_raw())
            }
            other => {
                let rgb = other.to_rgb8();
                let (w, h) = (rgb.width() as usize, rgb.height() as usize);
                let interleaved = rgb.into_raw();
                // interleaved RGBRGB... -> planar RRR...GGG...BBB...
                let plane = h * w;
                let mut planar = vec![0u8; 3 * plane];
                for i in 0..plane {
                    planar[i] = interleaved[3 * i];
                    planar[plane + i] = interleaved[3 * i + 1];
                    planar[2 * plane + i] = interleaved[3 * i + 2];
                }
                (3, h, w, planar)
            }
        };
        match shape {
            None => shape = Some((channels, h, w)),
            Some(s) if s != (channels, h, w) => {
                return Err(Error::InvalidParameter(format!(
                    "{} is {channels}x{h}x{w} but the folder started with {}x{}x{}",
                    path.display(),
                    s.0,
                    s.1,
                    s.2
                )));
            }
            _ => {}
        }
        pixels.extend_from_slice(&planar);
        count += 1;
    }
    let (channels, h, w) = shape.expect("at least one file");
    ImageBatch::new(count, channels, h, w, pixels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loads_sorted_grayscale_folder() {
        let dir = tempfile::tempdir().unwrap();
        // write two tiny PNGs out of name order
        let b = image::GrayImage::from_raw(2, 1, vec![30, 40]).unwrap();
        b.save(dir.path().join("b.png")).unwrap();
        let a = image::GrayImage::from_raw(2, 1, vec![10, 20]).unwrap();
        a.save(dir.path().join("a.png")).unwrap();

        let batch = load_image_folder(dir.path()).unwrap();
        assert_eq!((batch.count, batch.channels, batch.height, batch.width), (2, 1, 1, 2));
        assert_eq!(batch.sample(0), &[10, 20]);
        assert_eq!(batch.sample(1), &[30, 40]);
    }

    #[test]
    fn rgb_images_become_planar() {
        let dir = tempfile::tempdir().unwrap();
        let img = image::RgbImage::from_raw(1, 2, vec![1, 2, 3, 4, 5, 6]).unwrap();
        img.save(dir.path().join("x.png")).unwrap();
        let batch = load_image_folder(dir.path()).unwrap();
        assert_eq!(batch.channels, 3);
        // planar: R plane [1,4], G plane [2,5], B plane [3,6]
        assert_eq!(batch.sample(0), &[1, 4, 2, 5, 3, 6]);
    }

    #[test]
    fn mixed_shapes_rejected() {
        let dir = tempfile::tempdir().unwrap();
        image::GrayImage::from_raw(2, 1, vec![0, 0])
            .unwrap()
            .save(dir.path().join("a.png"))
            .unwrap();
        image::GrayImage::from_raw(1, 1, vec![0])
            .unwrap()
            .save(dir.path().join("b.png"))
            .unwrap();
        assert!(load_image_folder(dir.path()).is_err());
    }

    #[test]
    fn empty_or_missing_folder_rejected() {
        let dir = tempfile::tempdir().unwrap();
        assert!(load_image_folder(dir.path()).is_err());
        assert!(load_image_folder(&dir.path().join("nope")).is_err());
    }
}
