//! Seeded synthetic data: Gaussian mixtures for in-distribution sets and
//! noise / external-dataset outliers. Every generator is a pure function
//! of (spec, seed) and reruns bit-identically.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::FeatureMatrix;

use super::{
    load_csv_features, load_idx, load_image_folder, reformat, to_features, FeatureShape, IdxFile,
    ImageBatch, OutlierKind, OutlierSpec,
};

/// One mixture component: a center, per-axis standard deviations and a
/// row count.
#[derive(Debug, Clone)]
pub struct MixtureComponent {
    pub mean: Vec<f64>,
    pub deviation: Vec<f64>,
    pub count: usize,
}

impl MixtureComponent {
    pub fn new(mean: Vec<f64>, deviation: Vec<f64>, count: usize) -> Self {
        Self {
            mean,
            deviation,
            count,
        }
    }

    /// Same deviation on every axis.
    pub fn isotropic(mean: Vec<f64>, deviation: f64, count: usize) -> Self {
        let dim = mean.len();
        Self {
            mean,
            deviation: vec![deviation; dim],
            count,
        }
    }
}

/// Draws all components in order (component order = row order) with one
/// seeded stream.
pub fn synth_gaussian_mixture(
    components: &[MixtureComponent],
    seed: u64,
) -> Result<FeatureMatrix> {
    if components.is_empty() {
        return Err(Error::InvalidParameter("no mixture components".into()));
    }
    let dim = components[0].mean.len();
    let mut total = 0usize;
    for (i, c) in components.iter().enumerate() {
        if c.count == 0 {
            return Err(Error::InvalidParameter(format!(
                "component {i} has count 0"
            )));
        }
        if c.mean.len() != dim || c.deviation.len() != dim {
            return Err(Error::InvalidParameter(format!(
                "component {i} dimensionality disagrees with component 0 ({dim})"
            )));
        }
        if c.deviation.iter().any(|d| !(*d > 0.0) || !d.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "component {i} deviations must be finite and > 0"
            )));
        }
        total += c.count;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(total * dim);
    for c in components {
        for _ in 0..c.count {
            for (mu, dev) in c.mean.iter().zip(&c.deviation) {
                let z: f64 = StandardNormal.sample(&mut rng);
                data.push(mu + dev * z);
            }
        }
    }
    FeatureMatrix::new(total, dim, data)
}

/// Component indices matching the row order of [`synth_gaussian_mixture`].
pub fn mixture_component_labels(components: &[MixtureComponent]) -> Vec<u8> {
    let mut labels = Vec::new();
    for (i, c) in components.iter().enumerate() {
        labels.extend(std::iter::repeat(i as u8).take(c.count));
    }
    labels
}

/// Generates an outlier feature set.
///
/// * `uniform_noise`: every entry drawn from [0,1)
/// * `gaussian_noise`: standard normal draws clamped into [0,1]
/// * `external_dataset`: loads the source (IDX file, image folder, or
///   feature CSV), reformats image data to the target shape, scales to
///   [0,1], and keeps the first `count` rows
pub fn synth_outliers(spec: &OutlierSpec, shape: FeatureShape) -> Result<FeatureMatrix> {
    if spec.count == 0 {
        return Err(Error::InvalidParameter("outlier count must be >= 1".into()));
    }
    let dim = shape.dim();
    if dim == 0 {
        return Err(Error::InvalidParameter("outlier shape has zero size".into()));
    }
    match spec.kind {
        OutlierKind::UniformNoise => {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            let data: Vec<f64> = (0..spec.count * dim)
                .map(|_| rng.gen_range(0.0..1.0))
                .collect();
            FeatureMatrix::new(spec.count, dim, data)
        }
        OutlierKind::GaussianNoise => {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            let data: Vec<f64> = (0..spec.count * dim)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    z.clamp(0.0, 1.0)
                })
                .collect();
            FeatureMatrix::new(spec.count, dim, data)
        }
        OutlierKind::ExternalDataset => {
            let source = spec.source.as_ref().ok_or_else(|| {
                Error::InvalidParameter("external_dataset outliers need a source path".into())
            })?;
            let features = load_external_features(source, shape)?;
            if features.rows() < spec.count {
                return Err(Error::InvalidParameter(format!(
                    "external source has {} samples, need {}",
                    features.rows(),
                    spec.count
                )));
            }
            let rows: Vec<Vec<f64>> = (0..spec.count)
                .map(|r| features.row(r).to_vec())
                .collect();
            FeatureMatrix::from_rows(&rows)
        }
    }
}

fn load_external_features(
    source: &std::path::Path,
    shape: FeatureShape,
) -> Result<FeatureMatrix> {
    if source.is_dir() {
        let batch = load_image_folder(source)?;
        return reformat_to_shape(&batch, shape);
    }
    if source.extension().and_then(|e| e.to_str()) == Some("csv") {
        let features = load_csv_features(source)?;
        if features.cols() != shape.dim() {
            return Err(Error::DimensionMismatch {
                context: "external CSV feature width",
                expected: shape.dim(),
                got: features.cols(),
            });
        }
        return Ok(features);
    }
    match load_idx(source)? {
        IdxFile::Images(batch) => reformat_to_shape(&batch, shape),
        IdxFile::Labels(_) => Err(Error::InvalidParameter(format!(
            "{} is an IDX label file, not images",
            source.display()
        ))),
    }
}

fn reformat_to_shape(batch: &ImageBatch, shape: FeatureShape) -> Result<FeatureMatrix> {
    match shape {
        FeatureShape::Image {
            channels,
            height,
            width,
        } => Ok(to_features(&reformat(batch, channels, height, width)?)),
        FeatureShape::Flat(dim) => {
            // no target image geometry: accept only if the source already
            // matches the flat width
            if batch.sample_len() != dim {
                return Err(Error::DimensionMismatch {
                    context: "image sample size vs flat feature width",
                    expected: dim,
                    got: batch.sample_len(),
                });
            }
            Ok(to_features(batch))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::write_idx_images;

    fn two_blobs() -> Vec<MixtureComponent> {
        vec![
            MixtureComponent::isotropic(vec![0.0, 0.0], 0.1, 30),
            MixtureComponent::isotropic(vec![5.0, 5.0], 0.2, 20),
        ]
    }

    #[test]
    fn mixture_reruns_bit_identically() {
        let a = synth_gaussian_mixture(&two_blobs(), 42).unwrap();
        let b = synth_gaussian_mixture(&two_blobs(), 42).unwrap();
        assert_eq!(a.as_slice(), b.as_slice());
        let c = synth_gaussian_mixture(&two_blobs(), 43).unwrap();
        assert_ne!(a.as_slice(), c.as_slice());
    }

    #[test]
    fn mixture_preserves_component_order() {
        let m = synth_gaussian_mixture(&two_blobs(), 1).unwrap();
        assert_eq!(m.rows(), 50);
        // first 30 rows near (0,0), next 20 near (5,5)
        for r in 0..30 {
            assert!(m.get(r, 0).abs() < 2.0);
        }
        for r in 30..50 {
            assert!((m.get(r, 0) - 5.0).abs() < 3.0);
        }
        let labels = mixture_component_labels(&two_blobs());
        assert_eq!(labels.len(), 50);
        assert_eq!(labels[29], 0);
        assert_eq!(labels[30], 1);
    }

    #[test]
    fn tiny_deviation_collapses_to_mean() {
        let comps = vec![MixtureComponent::isotropic(vec![0.25, 0.75], 1e-12, 10)];
        let m = synth_gaussian_mixture(&comps, 9).unwrap();
        for r in 0..10 {
            assert!((m.get(r, 0) - 0.25).abs() < 1e-9);
            assert!((m.get(r, 1) - 0.75).abs() < 1e-9);
        }
    }

    #[test]
    fn sample_mean_matches_spec_mean() {
        let n = 10_000;
        let dev = 0.5;
        let comps = vec![MixtureComponent::isotropic(vec![1.0, -2.0, 0.3], dev, n)];
        let m = synth_gaussian_mixture(&comps, 7).unwrap();
        let se = dev / (n as f64).sqrt();
        for (c, mu) in [1.0, -2.0, 0.3].iter().enumerate() {
            let mean: f64 = (0..n).map(|r| m.get(r, c)).sum::<f64>() / n as f64;
            assert!(
                (mean - mu).abs() < 5.0 * se,
                "axis {c}: {mean} vs {mu} (se {se})"
            );
        }
    }

    #[test]
    fn mixture_validates_inputs() {
        assert!(synth_gaussian_mixture(&[], 0).is_err());
        let zero_count = vec![MixtureComponent::isotropic(vec![0.0], 0.1, 0)];
        assert!(synth_gaussian_mixture(&zero_count, 0).is_err());
        let zero_dev = vec![MixtureComponent::isotropic(vec![0.0], 0.0, 5)];
        assert!(synth_gaussian_mixture(&zero_dev, 0).is_err());
        let ragged = vec![
            MixtureComponent::isotropic(vec![0.0, 0.0], 0.1, 5),
            MixtureComponent::isotropic(vec![0.0], 0.1, 5),
        ];
        assert!(synth_gaussian_mixture(&ragged, 0).is_err());
    }

    #[test]
    fn uniform_noise_reproducible_in_unit_cube() {
        let spec = OutlierSpec {
            kind: OutlierKind::UniformNoise,
            count: 40,
            seed: 3,
            source: None,
        };
        let a = synth_outliers(&spec, FeatureShape::Flat(8)).unwrap();
        let b = synth_outliers(&spec, FeatureShape::Flat(8)).unwrap();
        assert_eq!(a.as_slice(), b.as_slice());
        assert!(a.as_slice().iter().all(|v| (0.0..=1.0).contains(v)));
        assert_eq!((a.rows(), a.cols()), (40, 8));
    }

    #[test]
    fn gaussian_noise_clamped_to_unit_interval() {
        let spec = OutlierSpec {
            kind: OutlierKind::GaussianNoise,
            count: 100,
            seed: 4,
            source: None,
        };
        let m = synth_outliers(&spec, FeatureShape::Flat(4)).unwrap();
        assert!(m.as_slice().iter().all(|v| (0.0..=1.0).contains(v)));
        // clamping leaves plenty of mass at exactly zero
        assert!(m.as_slice().iter().filter(|&&v| v == 0.0).count() > 0);
    }

    #[test]
    fn zero_count_rejected() {
        let spec = OutlierSpec {
            kind: OutlierKind::UniformNoise,
            count: 0,
            seed: 0,
            source: None,
        };
        assert!(synth_outliers(&spec, FeatureShape::Flat(4)).is_err());
    }

    #[test]
    fn external_idx_reformatted_to_target_shape() {
        let dir = tempfile::tempdir().unwrap();
        let batch = ImageBatch::new(3, 1, 28, 28, vec![128; 3 * 28 * 28]).unwrap();
        let path = dir.path().join("digits.idx");
        std::fs::write(&path, write_idx_images(&batch).unwrap()).unwrap();

        let spec = OutlierSpec {
            kind: OutlierKind::ExternalDataset,
            count: 2,
            seed: 0,
            source: Some(path),
        };
        let target = FeatureShape::Image {
            channels: 3,
            height: 32,
            width: 32,
        };
        let m = synth_outliers(&spec, target).unwrap();
        assert_eq!((m.rows(), m.cols()), (2, 3072));
        assert!(m.as_slice().iter().all(|&v| (v - 128.0 / 255.0).abs() < 1e-12));
    }

    #[test]
    fn external_requires_source() {
        let spec = OutlierSpec {
            kind: OutlierKind::ExternalDataset,
            count: 1,
            seed: 0,
            source: None,
        };
        assert!(synth_outliers(&spec, FeatureShape::Flat(4)).is_err());
    }
}
