//! Dataset ingestion, image reformatting and synthetic data generation.

mod csv;
mod idx;
mod images;
mod synth;

pub use csv::{load_csv_features, parse_csv_features};
pub use idx::{load_idx, write_idx_images, write_idx_labels, IdxFile};
pub use images::load_image_folder;
pub use synth::{synth_gaussian_mixture, synth_outliers, MixtureComponent};

use crate::error::{Error, Result};
use crate::linalg::FeatureMatrix;

/// A batch of equally-sized 8-bit images.
///
/// Pixel layout is sample-major, then channel-major, then row-major:
/// `pixels[s*C*H*W + c*H*W + y*W + x]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageBatch {
    pub count: usize,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub pixels: Vec<u8>,
}

impl ImageBatch {
    pub fn new(
        count: usize,
        channels: usize,
        height: usize,
        width: usize,
        pixels: Vec<u8>,
    ) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidParameter(format!(
                "channels must be 1 or 3, got {channels}"
            )));
        }
        let expected = count
            .checked_mul(channels)
            .and_then(|v| v.checked_mul(height))
            .and_then(|v| v.checked_mul(width))
            .ok_or_else(|| Error::InvalidParameter("image batch size overflows".into()))?;
        if pixels.len() != expected {
            return Err(Error::DimensionMismatch {
                context: "image batch pixel count",
                expected,
                got: pixels.len(),
            });
        }
        Ok(Self {
            count,
            channels,
            height,
            width,
            pixels,
        })
    }

    /// Pixels of one sample, all channels.
    pub fn sample(&self, s: usize) -> &[u8] {
        let stride = self.channels * self.height * self.width;
        &self.pixels[s * stride..(s + 1) * stride]
    }

    pub fn sample_len(&self) -> usize {
        self.channels * self.height * self.width
    }
}

/// Feature dimensionality spec for generators: either a flat vector length
/// or an image shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureShape {
    Flat(usize),
    Image {
        channels: usize,
        height: usize,
        width: usize,
    },
}

impl FeatureShape {
    pub fn dim(&self) -> usize {
        match *self {
            FeatureShape::Flat(d) => d,
            FeatureShape::Image {
                channels,
                height,
                width,
            } => channels * height * width,
        }
    }
}

/// What kind of outliers to generate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutlierKind {
    UniformNoise,
    GaussianNoise,
    ExternalDataset,
}

impl std::str::FromStr for OutlierKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform_noise" => Ok(OutlierKind::UniformNoise),
            "gaussian_noise" => Ok(OutlierKind::GaussianNoise),
            "external_dataset" => Ok(OutlierKind::ExternalDataset),
            other => Err(Error::InvalidParameter(format!(
                "unknown outlier kind '{other}' (expected uniform_noise|gaussian_noise|external_dataset)"
            ))),
        }
    }
}

/// Outlier-set recipe.
#[derive(Debug, Clone)]
pub struct OutlierSpec {
    pub kind: OutlierKind,
    pub count: usize,
    pub seed: u64,
    /// Source path, required for the external kind.
    pub source: Option<std::path::PathBuf>,
}

/// Flattens each image to a feature row scaled into [0,1] (divide by 255).
pub fn to_features(b: &ImageBatch) -> FeatureMatrix {
    let data: Vec<f64> = b.pixels.iter().map(|&p| p as f64 / 255.0).collect();
    FeatureMatrix::new(b.count.max(1), b.sample_len(), data)
        .expect("valid batch flattens to a valid matrix")
}

/// Inverse of [`to_features`]: scale by 255, round to nearest, clamp.
pub fn from_features(
    m: &FeatureMatrix,
    channels: usize,
    height: usize,
    width: usize,
) -> Result<ImageBatch> {
    if m.cols() != channels * height * width {
        return Err(Error::DimensionMismatch {
            context: "feature columns vs image shape",
            expected: channels * height * width,
            got: m.cols(),
        });
    }
    let pixels: Vec<u8> = m
        .as_slice()
        .iter()
        .map(|&v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
        .collect();
    ImageBatch::new(m.rows(), channels, height, width, pixels)
}

/// Converts channel count and resizes every image.
///
/// RGB to gray uses BT.601 luma (0.299 R + 0.587 G + 0.114 B, rounded to
/// nearest); gray to RGB replicates. The spatial resize is bilinear with
/// corner-aligned sampling. Channel conversion happens before the resize.
pub fn reformat(
    b: &ImageBatch,
    target_channels: usize,
    target_h: usize,
    target_w: usize,
) -> Result<ImageBatch> {
    if target_channels != 1 && target_channels != 3 {
        return Err(Error::InvalidParameter(format!(
            "target channels must be 1 or 3, got {target_channels}"
        )));
    }
    if target_h == 0 || target_w == 0 {
        return Err(Error::InvalidParameter("target size must be positive".into()));
    }

    let converted = convert_channels(b, target_channels);
    if converted.height == target_h && converted.width == target_w {
        return Ok(converted);
    }

    let plane = converted.height * converted.width;
    let out_plane = target_h * target_w;
    let stride_in = converted.channels * plane;
    let stride_out = target_channels * out_plane;
    let mut pixels = vec![0u8; converted.count * stride_out];

    // corner-aligned source coordinate for each destination index
    let coord = |dst: usize, dst_len: usize, src_len: usize| -> f64 {
        if dst_len == 1 {
            (src_len - 1) as f64 / 2.0
        } else {
            dst as f64 * (src_len - 1) as f64 / (dst_len - 1) as f64
        }
    };
    let xs: Vec<f64> = (0..target_w).map(|x| coord(x, target_w, converted.width)).collect();
    let ys: Vec<f64> = (0..target_h).map(|y| coord(y, target_h, converted.height)).collect();

    for s in 0..converted.count {
        for c in 0..converted.channels {
            let src = &converted.pixels[s * stride_in + c * plane..s * stride_in + (c + 1) * plane];
            let dst_base = s * stride_out + c * out_plane;
            for (yi, &sy) in ys.iter().enumerate() {
                let y0 = sy.floor() as usize;
                let y1 = (y0 + 1).min(converted.height - 1);
                let fy = sy - y0 as f64;
                for (xi, &sx) in xs.iter().enumerate() {
                    let x0 = sx.floor() as usize;
                    let x1 = (x0 + 1).min(converted.width - 1);
                    let fx = sx - x0 as f64;
                    let p00 = src[y0 * converted.width + x0] as f64;
                    let p01 = src[y0 * converted.width + x1] as f64;
                    let p10 = src[y1 * converted.width + x0] as f64;
                    let p11 = src[y1 * converted.width + x1] as f64;
                    let top = p00 + (p01 - p00) * fx;
                    let bottom = p10 + (p11 - p10) * fx;
                    let v = top + (bottom - top) * fy;
                    pixels[dst_base + yi * target_w + xi] =
                        v.round().clamp(0.0, 255.0) as u8;
                }
            }
        }
    }
    ImageBatch::new(converted.count, target_channels, target_h, target_w, pixels)
}

fn convert_channels(b: &ImageBatch, target_channels: usize) -> ImageBatch {
    if b.channels == target_channels {
        return b.clone();
    }
    let plane = b.height * b.width;
    let mut pixels = Vec::with_capacity(b.count * target_channels * plane);
    match (b.channels, target_channels) {
        (3, 1) => {
            for s in 0..b.count {
                let sample = b.sample(s);
                let (r, rest) = sample.split_at(plane);
                let (g, bl) = rest.split_at(plane);
                for i in 0..plane {
                    let luma =
                        0.299 * r[i] as f64 + 0.587 * g[i] as f64 + 0.114 * bl[i] as f64;
                    pixels.push(luma.round().clamp(0.0, 255.0) as u8);
                }
            }
        }
        (1, 3) => {
            for s in 0..b.count {
                let sample = b.sample(s);
                for _ in 0..3 {
                    pixels.extend_from_slice(sample);
                }
            }
        }
        _ => unreachable!("channel counts validated to 1 or 3"),
    }
    ImageBatch::new(b.count, target_channels, b.height, b.width, pixels)
        .expect("converted batch is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn features_scale_to_unit_interval() {
        let b = ImageBatch::new(2, 1, 1, 2, vec![255, 255, 0, 0]).unwrap();
        let f = to_features(&b);
        assert_eq!(f.row(0), &[1.0, 1.0]);
        assert_eq!(f.row(1), &[0.0, 0.0]);
    }

    #[test]
    fn features_roundtrip_exactly() {
        let pixels: Vec<u8> = (0..=255).collect();
        let b = ImageBatch::new(1, 1, 16, 16, pixels.clone()).unwrap();
        let f = to_features(&b);
        assert!(f.as_slice().iter().all(|v| (0.0..=1.0).contains(v)));
        let back = from_features(&f, 1, 16, 16).unwrap();
        assert_eq!(back.pixels, pixels);
    }

    #[test]
    fn reformat_constant_image_stays_constant() {
        let b = ImageBatch::new(1, 1, 5, 7, vec![123; 35]).unwrap();
        let r = reformat(&b, 1, 11, 3).unwrap();
        assert!(r.pixels.iter().all(|&p| p == 123));
        assert_eq!((r.height, r.width), (11, 3));
    }

    #[test]
    fn luma_weights_sum_to_one_on_white() {
        let b = ImageBatch::new(1, 3, 1, 1, vec![255, 255, 255]).unwrap();
        let r = reformat(&b, 1, 1, 1).unwrap();
        assert_eq!(r.pixels, vec![255]);
    }

    #[test]
    fn luma_of_pure_red() {
        let b = ImageBatch::new(1, 3, 1, 1, vec![255, 0, 0]).unwrap();
        let r = reformat(&b, 1, 1, 1).unwrap();
        // 0.299 * 255 = 76.245 rounds to 76
        assert_eq!(r.pixels, vec![76]);
    }

    #[test]
    fn gray_to_rgb_replicates() {
        let b = ImageBatch::new(1, 1, 1, 2, vec![10, 20]).unwrap();
        let r = reformat(&b, 3, 1, 2).unwrap();
        assert_eq!(r.pixels, vec![10, 20, 10, 20, 10, 20]);
    }

    #[test]
    fn cifar_shape_to_mnist_shape() {
        let b = ImageBatch::new(2, 3, 32, 32, vec![50; 2 * 3 * 32 * 32]).unwrap();
        let r = reformat(&b, 1, 28, 28).unwrap();
        let f = to_features(&r);
        assert_eq!(f.cols(), 784);
        assert_eq!(f.rows(), 2);
    }

    #[test]
    fn reformat_interpolates_within_source_extremes() {
        let pixels: Vec<u8> = (0..16).map(|i| 40 + (i * 10) as u8).collect();
        let b = ImageBatch::new(1, 1, 4, 4, pixels.clone()).unwrap();
        let r = reformat(&b, 1, 9, 9).unwrap();
        assert_eq!(r.pixels.len(), 81);
        let src_min = *pixels.iter().min().unwrap();
        let src_max = *pixels.iter().max().unwrap();
        assert!(r.pixels.iter().all(|&p| p >= src_min && p <= src_max));
        // corner alignment keeps the corners exact
        assert_eq!(r.pixels[0], pixels[0]);
        assert_eq!(r.pixels[80], pixels[15]);
    }

    #[test]
    fn batch_validates_shape() {
        assert!(ImageBatch::new(1, 2, 2, 2, vec![0; 8]).is_err());
        assert!(ImageBatch::new(1, 1, 2, 2, vec![0; 3]).is_err());
    }
}
