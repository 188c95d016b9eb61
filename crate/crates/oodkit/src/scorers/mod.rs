//! The five OOD scoring measures.
//!
//! Each scorer is fit on training features and maps every query row to a
//! scalar with the uniform orientation "higher = more out-of-distribution":
//!
//! * `kd`  — negated mean Gaussian-kernel density against the training set
//! * `md`  — Mahalanobis distance to the training mean
//! * `knn` — mean squared distance to the k nearest training rows
//! * `lof` — local outlier factor (simplified local reachability density)
//! * `lcp` — squared error of reconstructing the query from its neighbors
//!           with per-point Gaussian weights (see [`lcp`])

mod lcp;

pub use lcp::{
    default_perplexity, lcp_fit, lcp_weights, sigma_binary_search, LcpWeightMode, SigmaSearch,
    LCP_SIGMA_MAX_ITER, LCP_SIGMA_TOL, MIN_SIGMA,
};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::binio::{self, Reader};
use crate::error::{Error, Result};
use crate::linalg::{
    covariance, mean_vector, pairwise_sq_distances, quadratic_form, regularized_inverse,
    sq_distance, FeatureMatrix, RealVector,
};
use crate::neighbors::knn_query;

const SCORER_MAGIC: &[u8] = b"OODKIT-SC";
const SCORER_VERSION: u32 = 1;

/// Floor applied to neighbor-distance sums so duplicate points cannot
/// produce infinite reachability densities.
pub const LRD_DISTANCE_FLOOR: f64 = 1e-12;

/// Which of the five measures a report came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScorerKind {
    Kd,
    Md,
    Knn,
    Lof,
    Lcp,
}

impl ScorerKind {
    pub const ALL: [ScorerKind; 5] = [
        ScorerKind::Kd,
        ScorerKind::Md,
        ScorerKind::Knn,
        ScorerKind::Lof,
        ScorerKind::Lcp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScorerKind::Kd => "kd",
            ScorerKind::Md => "md",
            ScorerKind::Knn => "knn",
            ScorerKind::Lof => "lof",
            ScorerKind::Lcp => "lcp",
        }
    }
}

impl std::fmt::Display for ScorerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ScorerKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kd" => Ok(ScorerKind::Kd),
            "md" => Ok(ScorerKind::Md),
            "knn" => Ok(ScorerKind::Knn),
            "lof" => Ok(ScorerKind::Lof),
            "lcp" => Ok(ScorerKind::Lcp),
            other => Err(Error::InvalidParameter(format!(
                "unknown scorer kind '{other}' (expected kd|md|knn|lof|lcp)"
            ))),
        }
    }
}

/// Scores for a batch of queries plus an echo of the fit parameters, so a
/// report is reproducible from its own metadata.
#[derive(Debug, Clone)]
pub struct ScoreReport {
    pub kind: ScorerKind,
    pub scores: Vec<f64>,
    pub params: Vec<(String, String)>,
}

/// A trained scoring model. Immutable once fit; scoring never mutates.
#[derive(Debug, Clone, PartialEq)]
pub enum FittedScorer {
    Kd {
        train: FeatureMatrix,
        sigma: f64,
    },
    Md {
        mean: RealVector,
        inv_cov: FeatureMatrix,
    },
    Knn {
        train: FeatureMatrix,
        k: usize,
    },
    Lof {
        train: FeatureMatrix,
        k: usize,
        train_lrd: Vec<f64>,
    },
    Lcp {
        train: FeatureMatrix,
        k: usize,
        per_point_sigma: Vec<f64>,
        perplexity: f64,
        weight_mode: LcpWeightMode,
    },
}

/// Stores the training set and the kernel bandwidth. With `sigma: None`
/// the bandwidth comes from the median heuristic: the median pairwise
/// Euclidean distance over a seeded subsample of up to 1000 rows.
pub fn kd_fit(train: FeatureMatrix, sigma: Option<f64>) -> Result<FittedScorer> {
    let sigma = match sigma {
        Some(s) => {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "kd sigma must be finite and > 0, got {s}"
                )));
            }
            s
        }
        None => median_heuristic_sigma(&train)?,
    };
    Ok(FittedScorer::Kd { train, sigma })
}

const MEDIAN_SUBSAMPLE: usize = 1000;
const MEDIAN_SUBSAMPLE_SEED: u64 = 0x0DD1_7000;

fn median_heuristic_sigma(train: &FeatureMatrix) -> Result<f64> {
    let n = train.rows();
    if n < 2 {
        // no pairs to take a median over
        return Ok(1.0);
    }
    let sub = if n > MEDIAN_SUBSAMPLE {
        let mut rng = ChaCha8Rng::seed_from_u64(MEDIAN_SUBSAMPLE_SEED);
        let mut idx = rand::seq::index::sample(&mut rng, n, MEDIAN_SUBSAMPLE).into_vec();
        idx.sort_unstable();
        let rows: Vec<Vec<f64>> = idx.iter().map(|&i| train.row(i).to_vec()).collect();
        FeatureMatrix::from_rows(&rows)?
    } else {
        train.clone()
    };
    let d = pairwise_sq_distances(&sub, &sub)?;
    let m = sub.rows();
    let mut dists = Vec::with_capacity(m * (m - 1) / 2);
    for i in 0..m {
        for j in (i + 1)..m {
            dists.push(d.get(i, j).sqrt());
        }
    }
    dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mid = dists.len() / 2;
    let median = if dists.len() % 2 == 1 {
        dists[mid]
    } else {
        0.5 * (dists[mid - 1] + dists[mid])
    };
    Ok(median.max(1e-12))
}

/// Fits the Gaussian model: training mean and regularized inverse
/// covariance. The inverse is attempted without jitter first, escalating
/// only if the covariance is rank-deficient.
pub fn md_fit(train: &FeatureMatrix) -> Result<FittedScorer> {
    let mean = mean_vector(train);
    let cov = covariance(train)?;
    let inv_cov = regularized_inverse(&cov, 0.0)?;
    Ok(FittedScorer::Md { mean, inv_cov })
}

/// Plain kNN scorer: no real fitting beyond validating k.
pub fn knn_fit(train: FeatureMatrix, k: usize) -> Result<FittedScorer> {
    if k == 0 || k > train.rows() {
        return Err(Error::InvalidParameter(format!(
            "knn k must be in 1..={}, got {k}",
            train.rows()
        )));
    }
    Ok(FittedScorer::Knn { train, k })
}

/// Mean squared Euclidean distance to the k nearest training rows.
pub fn knn_score(train: &FeatureMatrix, queries: &FeatureMatrix, k: usize) -> Result<ScoreReport> {
    knn_fit(train.clone(), k)?.score(queries)
}

/// Precomputes every training row's local reachability density
/// lrd(x) = k / sum of plain Euclidean distances to its k neighbors
/// (self excluded, sum floored so duplicates stay finite).
pub fn lof_fit(train: FeatureMatrix, k: usize) -> Result<FittedScorer> {
    if k < 2 || k + 1 > train.rows() {
        return Err(Error::InvalidParameter(format!(
            "lof k must be in 2..={}, got {k}",
            train.rows().saturating_sub(1)
        )));
    }
    let mut train_lrd = Vec::with_capacity(train.rows());
    for i in 0..train.rows() {
        let nn = knn_query(&train, train.row(i), k, Some(i))?;
        let sum: f64 = nn.sq_distances.iter().map(|d| d.sqrt()).sum();
        train_lrd.push(k as f64 / sum.max(LRD_DISTANCE_FLOOR));
    }
    Ok(FittedScorer::Lof { train, k, train_lrd })
}

impl FittedScorer {
    pub fn kind(&self) -> ScorerKind {
        match self {
            FittedScorer::Kd { .. } => ScorerKind::Kd,
            FittedScorer::Md { .. } => ScorerKind::Md,
            FittedScorer::Knn { .. } => ScorerKind::Knn,
            FittedScorer::Lof { .. } => ScorerKind::Lof,
            FittedScorer::Lcp { .. } => ScorerKind::Lcp,
        }
    }

    /// Feature dimensionality the scorer expects.
    pub fn dim(&self) -> usize {
        match self {
            FittedScorer::Kd { train, .. }
            | FittedScorer::Knn { train, .. }
            | FittedScorer::Lof { train, .. }
            | FittedScorer::Lcp { train, .. } => train.cols(),
            FittedScorer::Md { mean, .. } => mean.dim(),
        }
    }

    /// Echo of the fit parameters, included in every report.
    pub fn params(&self) -> Vec<(String, String)> {
        match self {
            FittedScorer::Kd { sigma, .. } => vec![("sigma".into(), format!("{sigma}"))],
            FittedScorer::Md { mean, .. } => vec![("dim".into(), format!("{}", mean.dim()))],
            FittedScorer::Knn { k, .. } => vec![("k".into(), format!("{k}"))],
            FittedScorer::Lof { k, .. } => vec![("k".into(), format!("{k}"))],
            FittedScorer::Lcp {
                k,
                perplexity,
                weight_mode,
                ..
            } => vec![
                ("k".into(), format!("{k}")),
                ("perplexity".into(), format!("{perplexity}")),
                ("weight_mode".into(), weight_mode.name().into()),
            ],
        }
    }

    /// Scores every query row, higher = more OOD.
    pub fn score(&self, queries: &FeatureMatrix) -> Result<ScoreReport> {
        if queries.cols() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "query dimensionality",
                expected: self.dim(),
                got: queries.cols(),
            });
        }
        let scores = match self {
            FittedScorer::Kd { train, sigma } => score_kd(train, *sigma, queries),
            FittedScorer::Md { mean, inv_cov } => score_md(mean, inv_cov, queries),
            FittedScorer::Knn { train, k } => score_knn(train, *k, queries)?,
            FittedScorer::Lof { train, k, train_lrd } => score_lof(train, *k, train_lrd, queries)?,
            FittedScorer::Lcp {
                train,
                k,
                per_point_sigma,
                weight_mode,
                ..
            } => lcp::score_lcp(train, *k, per_point_sigma, *weight_mode, queries)?,
        };
        Ok(ScoreReport {
            kind: self.kind(),
            scores,
            params: self.params(),
        })
    }

    /// Serializes to the versioned OODKIT-SC byte layout.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(SCORER_MAGIC);
        binio::put_u32(&mut out, SCORER_VERSION);
        let put_matrix = |out: &mut Vec<u8>, m: &FeatureMatrix| {
            binio::put_u32(out, m.rows() as u32);
            binio::put_u32(out, m.cols() as u32);
            binio::put_f64s(out, m.as_slice());
        };
        match self {
            FittedScorer::Kd { train, sigma } => {
                out.push(0);
                binio::put_f64(&mut out, *sigma);
                put_matrix(&mut out, train);
            }
            FittedScorer::Md { mean, inv_cov } => {
                out.push(1);
                binio::put_u32(&mut out, mean.dim() as u32);
                binio::put_f64s(&mut out, mean.as_slice());
                put_matrix(&mut out, inv_cov);
            }
            FittedScorer::Knn { train, k } => {
                out.push(2);
                binio::put_u32(&mut out, *k as u32);
                put_matrix(&mut out, train);
            }
            FittedScorer::Lof { train, k, train_lrd } => {
                out.push(3);
                binio::put_u32(&mut out, *k as u32);
                put_matrix(&mut out, train);
                binio::put_f64s(&mut out, train_lrd);
            }
            FittedScorer::Lcp {
                train,
                k,
                per_point_sigma,
                perplexity,
                weight_mode,
            } => {
                out.push(4);
                binio::put_u32(&mut out, *k as u32);
                binio::put_f64(&mut out, *perplexity);
                out.push(weight_mode.tag());
                put_matrix(&mut out, train);
                binio::put_f64s(&mut out, per_point_sigma);
            }
        }
        out
    }

    /// Parses the OODKIT-SC layout, rejecting unknown versions and kinds.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        r.magic(SCORER_MAGIC)?;
        let version = r.u32("version")?;
        if version != SCORER_VERSION {
            return Err(Error::UnsupportedVersion {
                found: version,
                expected: SCORER_VERSION,
            });
        }
        let kind_at = r.offset();
        let kind = r.u8("kind tag")?;
        let read_matrix = |r: &mut Reader| -> Result<FeatureMatrix> {
            let rows = r.u32("matrix rows")? as usize;
            let cols = r.u32("matrix cols")? as usize;
            if rows.checked_mul(cols).is_none() || rows * cols > 100_000_000 {
                return Err(Error::MalformedFile {
                    offset: r.offset(),
                    message: format!("implausible matrix shape {rows}x{cols}"),
                });
            }
            let data = r.f64s(rows * cols, "matrix data")?;
            FeatureMatrix::new(rows, cols, data)
        };
        let scorer = match kind {
            0 => {
                let sigma = r.f64("sigma")?;
                let train = read_matrix(&mut r)?;
                FittedScorer::Kd { train, sigma }
            }
            1 => {
                let dim = r.u32("mean dim")? as usize;
                let mean = RealVector::new(r.f64s(dim, "mean")?)?;
                let inv_cov = read_matrix(&mut r)?;
                FittedScorer::Md { mean, inv_cov }
            }
            2 => {
                let k = r.u32("k")? as usize;
                let train = read_matrix(&mut r)?;
                FittedScorer::Knn { train, k }
            }
            3 => {
                let k = r.u32("k")? as usize;
                let train = read_matrix(&mut r)?;
                let train_lrd = r.f64s(train.rows(), "lrd")?;
                FittedScorer::Lof { train, k, train_lrd }
            }
            4 => {
                let k = r.u32("k")? as usize;
                let perplexity = r.f64("perplexity")?;
                let mode_at = r.offset();
                let mode_tag = r.u8("weight mode")?;
                let weight_mode =
                    LcpWeightMode::from_tag(mode_tag).ok_or_else(|| Error::MalformedFile {
                        offset: mode_at,
                        message: format!("unknown weight mode tag {mode_tag}"),
                    })?;
                let train = read_matrix(&mut r)?;
                let per_point_sigma = r.f64s(train.rows(), "per-point sigma")?;
                FittedScorer::Lcp {
                    train,
                    k,
                    per_point_sigma,
                    perplexity,
                    weight_mode,
                }
            }
            other => {
                return Err(Error::MalformedFile {
                    offset: kind_at,
                    message: format!("unknown scorer kind tag {other}"),
                })
            }
        };
        r.expect_eof()?;
        Ok(scorer)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        Self::from_bytes(&bytes)
    }
}

fn score_kd(train: &FeatureMatrix, sigma: f64, queries: &FeatureMatrix) -> Vec<f64> {
    let inv_two_sigma_sq = 1.0 / (2.0 * sigma * sigma);
    let n = train.rows() as f64;
    queries
        .row_iter()
        .map(|q| {
            let mut acc = 0.0;
            for row in train.row_iter() {
                acc += (-sq_distance(q, row) * inv_two_sigma_sq).exp();
            }
            -(acc / n)
        })
        .collect()
}

fn score_md(mean: &RealVector, inv_cov: &FeatureMatrix, queries: &FeatureMatrix) -> Vec<f64> {
    queries
        .row_iter()
        .map(|q| quadratic_form(q, mean.as_slice(), inv_cov))
        .collect()
}

fn score_knn(train: &FeatureMatrix, k: usize, queries: &FeatureMatrix) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(queries.rows());
    for q in queries.row_iter() {
        let nn = knn_query(train, q, k, None)?;
        let sum: f64 = nn.sq_distances.iter().sum();
        out.push(sum / k as f64);
    }
    Ok(out)
}

fn score_lof(
    train: &FeatureMatrix,
    k: usize,
    train_lrd: &[f64],
    queries: &FeatureMatrix,
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(queries.rows());
    for q in queries.row_iter() {
        let nn = knn_query(train, q, k, None)?;
        let sum: f64 = nn.sq_distances.iter().map(|d| d.sqrt()).sum();
        let lrd_q = k as f64 / sum.max(LRD_DISTANCE_FLOOR);
        let mut ratio_acc = 0.0;
        for &i in &nn.indices {
            ratio_acc += train_lrd[i] / lrd_q;
        }
        out.push(ratio_acc / k as f64);
    }
    Ok(out)
}
