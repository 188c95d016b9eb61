//! The LCP reconstruction measure.
//!
//! A query is reconstructed as a convex combination of its k nearest
//! training rows; the squared reconstruction error is the OOD score. The
//! combination weights are normalized Gaussian kernel values
//! `exp(-d^2 / (2 sigma_i^2))` with one bandwidth per training point,
//! each solved at fit time so that the point's neighborhood weights hit a
//! target perplexity.
//!
//! The raw-distance weight variant (distance in the numerator instead of a
//! kernel value) is kept behind [`LcpWeightMode::LiteralDistance`] for
//! ablation; it up-weights far neighbors and is not the default.

use crate::error::{Error, Result};
use crate::linalg::{sq_distance, FeatureMatrix};
use crate::neighbors::knn_query;

use super::FittedScorer;

/// Smallest bandwidth the search will return; also the value used for
/// fully degenerate (all-zero-distance) neighborhoods.
pub const MIN_SIGMA: f64 = 1e-8;

/// How neighborhood weights are formed before normalization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LcpWeightMode {
    /// Gaussian kernel similarity: `exp(-d^2 / (2 sigma_i^2))`.
    #[default]
    GaussianKernel,
    /// Raw scaled squared distance `d^2 / (2 sigma_i^2)` (ablation only).
    LiteralDistance,
}

impl LcpWeightMode {
    pub fn name(self) -> &'static str {
        match self {
            LcpWeightMode::GaussianKernel => "gaussian_kernel",
            LcpWeightMode::LiteralDistance => "literal_distance",
        }
    }

    pub(crate) fn tag(self) -> u8 {
        match self {
            LcpWeightMode::GaussianKernel => 0,
            LcpWeightMode::LiteralDistance => 1,
        }
    }

    pub(crate) fn from_tag(t: u8) -> Option<Self> {
        match t {
            0 => Some(LcpWeightMode::GaussianKernel),
            1 => Some(LcpWeightMode::LiteralDistance),
            _ => None,
        }
    }
}

/// Outcome of one bandwidth search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaSearch {
    pub sigma: f64,
    /// Perplexity actually achieved at `sigma`.
    pub perplexity: f64,
    /// Whether the achieved perplexity is within tolerance of the target.
    pub converged: bool,
    /// Set when every neighbor distance was zero and the floor sigma was
    /// returned without searching.
    pub degenerate: bool,
}

/// Perplexity (exp of Shannon entropy) of the normalized Gaussian weights
/// over `sq_dists` at bandwidth `sigma`.
///
/// Weights are shifted by the minimum distance before exponentiation, which
/// leaves the normalized distribution unchanged but avoids underflowing the
/// whole neighborhood at small sigma.
fn perplexity_at(sq_dists: &[f64], sigma: f64) -> f64 {
    let d_min = sq_dists.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    let inv = 1.0 / (2.0 * sigma * sigma);
    let mut sum = 0.0;
    let mut weighted = 0.0; // sum of w * (shifted distance scaled)
    for &d in sq_dists {
        let z = (d - d_min) * inv;
        let w = (-z).exp();
        sum += w;
        weighted += w * z;
    }
    // H = ln(sum) + E[z]; exp(H) is the perplexity
    let entropy = sum.ln() + weighted / sum;
    entropy.exp()
}

/// Finds `sigma` so that the perplexity of the normalized Gaussian weights
/// over `sq_dists_to_neighbors` is within `tol` of `target_perplexity`.
///
/// Brackets by doubling/halving (at most `max_iter` steps), then bisects
/// (again at most `max_iter` steps), returning the closest sigma achieved.
/// An all-zero distance list short-circuits to the floor sigma with the
/// degenerate flag set.
pub fn sigma_binary_search(
    sq_dists_to_neighbors: &[f64],
    target_perplexity: f64,
    tol: f64,
    max_iter: usize,
) -> Result<SigmaSearch> {
    let n = sq_dists_to_neighbors.len();
    if n == 0 {
        return Err(Error::InvalidParameter("empty distance list".into()));
    }
    if sq_dists_to_neighbors.iter().any(|d| !d.is_finite() || *d < 0.0) {
        return Err(Error::InvalidParameter(
            "distances must be finite and nonnegative".into(),
        ));
    }
    if !(target_perplexity > 1.0 && target_perplexity <= n as f64) {
        return Err(Error::InvalidParameter(format!(
            "target perplexity must be in (1, {n}], got {target_perplexity}"
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "tolerance must be > 0, got {tol}"
        )));
    }
    if max_iter == 0 {
        return Err(Error::InvalidParameter("max_iter must be >= 1".into()));
    }

    let d_max = sq_dists_to_neighbors.iter().fold(0.0f64, |a, &b| a.max(b));
    if d_max == 0.0 {
        // uniform weights regardless of sigma
        let perplexity = n as f64;
        return Ok(SigmaSearch {
            sigma: MIN_SIGMA,
            perplexity,
            converged: (perplexity - target_perplexity).abs() <= tol,
            degenerate: true,
        });
    }

    let mean_d: f64 = sq_dists_to_neighbors.iter().sum::<f64>() / n as f64;
    let mut sigma = (mean_d / 2.0).sqrt().max(MIN_SIGMA);

    let mut best = SigmaSearch {
        sigma,
        perplexity: perplexity_at(sq_dists_to_neighbors, sigma),
        converged: false,
        degenerate: false,
    };
    let consider = |s: f64, p: f64, best: &mut SigmaSearch| {
        if (p - target_perplexity).abs() < (best.perplexity - target_perplexity).abs() {
            best.sigma = s;
            best.perplexity = p;
        }
    };

    // bracket: perplexity is nondecreasing in sigma
    let mut lo = sigma;
    let mut hi = sigma;
    let mut p = best.perplexity;
    if p < target_perplexity {
        for _ in 0..max_iter {
            if p >= target_perplexity {
                break;
            }
            lo = hi;
            hi *= 2.0;
            p = perplexity_at(sq_dists_to_neighbors, hi);
            consider(hi, p, &mut best);
        }
    } else {
        for _ in 0..max_iter {
            if p <= target_perplexity || lo <= MIN_SIGMA {
                break;
            }
            hi = lo;
            lo = (lo / 2.0).max(MIN_SIGMA);
            p = perplexity_at(sq_dists_to_neighbors, lo);
            consider(lo, p, &mut best);
        }
    }

    for _ in 0..max_iter {
        if (best.perplexity - target_perplexity).abs() <= tol {
            break;
        }
        sigma = 0.5 * (lo + hi);
        if sigma <= lo || sigma >= hi {
            break; // interval exhausted at f64 resolution
        }
        let p = perplexity_at(sq_dists_to_neighbors, sigma);
        consider(sigma, p, &mut best);
        if p < target_perplexity {
            lo = sigma;
        } else {
            hi = sigma;
        }
    }

    best.converged = (best.perplexity - target_perplexity).abs() <= tol;
    Ok(best)
}

/// Tolerance and iteration budget used for the per-point searches in
/// [`lcp_fit`].
pub const LCP_SIGMA_TOL: f64 = 1e-3;
pub const LCP_SIGMA_MAX_ITER: usize = 100;

/// Fits the LCP scorer: finds each training row's k neighbors (itself
/// excluded) and solves its bandwidth by perplexity binary search.
pub fn lcp_fit(
    train: FeatureMatrix,
    k: usize,
    target_perplexity: f64,
    weight_mode: LcpWeightMode,
) -> Result<FittedScorer> {
    if k == 0 || k + 1 > train.rows() {
        return Err(Error::InvalidParameter(format!(
            "lcp k must be in 1..={}, got {k}",
            train.rows().saturating_sub(1)
        )));
    }
    if !(target_perplexity > 1.0 && target_perplexity <= k as f64) {
        return Err(Error::InvalidParameter(format!(
            "lcp target perplexity must be in (1, {k}], got {target_perplexity}"
        )));
    }
    let mut per_point_sigma = Vec::with_capacity(train.rows());
    for i in 0..train.rows() {
        let nn = knn_query(&train, train.row(i), k, Some(i))?;
        let search = sigma_binary_search(
            &nn.sq_distances,
            target_perplexity,
            LCP_SIGMA_TOL,
            LCP_SIGMA_MAX_ITER,
        )?;
        per_point_sigma.push(search.sigma);
    }
    Ok(FittedScorer::Lcp {
        train,
        k,
        per_point_sigma,
        perplexity: target_perplexity,
        weight_mode,
    })
}

/// Default target perplexity for a neighborhood of size k (a third of the
/// neighborhood, kept inside the searchable range).
pub fn default_perplexity(k: usize) -> f64 {
    let k_f = k as f64;
    (k_f / 3.0).clamp(1.5_f64.min(k_f), k_f)
}

/// Neighborhood weights for one query: Gaussian kernel values (or raw
/// scaled distances in literal mode) normalized to sum to 1, with a
/// uniform fallback when everything underflows to zero.
fn neighborhood_weights(
    train: &FeatureMatrix,
    k: usize,
    per_point_sigma: &[f64],
    weight_mode: LcpWeightMode,
    query: &[f64],
) -> Result<(Vec<usize>, Vec<f64>)> {
    let nn = knn_query(train, query, k, None)?;
    let mut weights = Vec::with_capacity(k);
    let mut sum = 0.0;
    for (&d, &i) in nn.sq_distances.iter().zip(&nn.indices) {
        let sigma = per_point_sigma[i];
        let z = d / (2.0 * sigma * sigma);
        let w = match weight_mode {
            LcpWeightMode::GaussianKernel => (-z).exp(),
            LcpWeightMode::LiteralDistance => z,
        };
        sum += w;
        weights.push(w);
    }
    if sum > 0.0 {
        for w in &mut weights {
            *w /= sum;
        }
    } else {
        weights.fill(1.0 / k as f64);
    }
    Ok((nn.indices, weights))
}

pub(super) fn score_lcp(
    train: &FeatureMatrix,
    k: usize,
    per_point_sigma: &[f64],
    weight_mode: LcpWeightMode,
    queries: &FeatureMatrix,
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(queries.rows());
    let mut recon = vec![0.0; train.cols()];
    for q in queries.row_iter() {
        let (indices, weights) = neighborhood_weights(train, k, per_point_sigma, weight_mode, q)?;
        recon.fill(0.0);
        for (&w, &i) in weights.iter().zip(&indices) {
            for (r, &v) in recon.iter_mut().zip(train.row(i)) {
                *r += w * v;
            }
        }
        out.push(sq_distance(q, &recon));
    }
    Ok(out)
}

/// Normalized LCP weights for one query, exposed for inspection and the
/// worked examples. Returns (training indices, weights summing to 1).
pub fn lcp_weights(scorer: &FittedScorer, query: &[f64]) -> Result<(Vec<usize>, Vec<f64>)> {
    let FittedScorer::Lcp {
        train,
        k,
        per_point_sigma,
        weight_mode,
        ..
    } = scorer
    else {
        return Err(Error::InvalidParameter(
            "lcp_weights needs an lcp scorer".into(),
        ));
    };
    neighborhood_weights(train, *k, per_point_sigma, *weight_mode, query)
}
