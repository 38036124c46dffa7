//! Two-nearest-neighbour intrinsic dimension estimator.
//!
//! For each point the ratio `mu = r2 / r1` of its second- to first-neighbour
//! distance is Pareto-distributed with shape equal to the intrinsic
//! dimension, which gives the maximum-likelihood estimate
//! `d = N' / sum(ln mu)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::index::NeighborIndex;
use super::points::PointCloud;

pub const TWONN_MIN_POINTS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoNnEstimate {
    pub dimension: f64,
    /// Points that contributed (first-neighbour distance > 0).
    pub n_valid: usize,
    /// Per-point ratios in input order; `None` for dropped points.
    pub ratios: Vec<Option<f64>>,
}

/// Estimate from precomputed ratios. Ratios must be `>= 1`.
pub fn twonn_from_ratios(ratios: &[f64]) -> Result<f64> {
    if ratios.len() < TWONN_MIN_POINTS {
        return Err(Error::Data(format!(
            "TwoNN needs at least {TWONN_MIN_POINTS} valid points, got {}",
            ratios.len()
        )));
    }
    let log_sum: f64 = ratios.iter().map(|m| m.ln()).sum();
    if !(log_sum > 0.0) {
        return Err(Error::Data("all neighbour ratios are 1; dimension is unbounded".into()));
    }
    Ok(ratios.len() as f64 / log_sum)
}

pub fn twonn_estimate(points: &PointCloud) -> Result<TwoNnEstimate> {
    if points.len() < TWONN_MIN_POINTS {
        return Err(Error::Data(format!(
            "TwoNN needs at least {TWONN_MIN_POINTS} points, got {}",
            points.len()
        )));
    }
    let index = NeighborIndex::build(points.clone())?;
    let mut ratios = Vec::with_capacity(points.len());
    for i in 0..points.len() {
        let nn = index.knn_of(i, 2)?;
        let (r1, r2) = (nn[0].distance, nn[1].distance);
        ratios.push((r1 > 0.0).then(|| r2 / r1));
    }
    let valid: Vec<f64> = ratios.iter().flatten().copied().collect();
    let dimension = twonn_from_ratios(&valid)?;
    Ok(TwoNnEstimate {
        dimension,
        n_valid: valid.len(),
        ratios,
    })
}
