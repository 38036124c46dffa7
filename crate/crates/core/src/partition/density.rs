//! Density-core labeling of the 2D map: which documents sit inside some
//! density cluster and which are density noise.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::{NeighborIndex, PointCloud};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DensityCoreLabel {
    pub doc_id: String,
    pub is_core_member: bool,
}

/// Anything that can split points into cluster members and noise.
pub trait DensityCoreLabeler {
    fn label(&self, points: &PointCloud) -> Result<Vec<bool>>;
}

/// DBSCAN membership: core points have at least `min_pts` points (themselves
/// included) within `eps`; points within `eps` of a core point are members.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DbscanLabeler {
    pub eps: f64,
    pub min_pts: usize,
}

impl Default for DbscanLabeler {
    fn default() -> Self {
        Self { eps: 0.5, min_pts: 15 }
    }
}

impl DensityCoreLabeler for DbscanLabeler {
    fn label(&self, points: &PointCloud) -> Result<Vec<bool>> {
        density_core_label(points, self.eps, self.min_pts)
    }
}

pub fn density_core_label(points: &PointCloud, eps: f64, min_pts: usize) -> Result<Vec<bool>> {
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::Parameter(format!("eps {eps} must be positive")));
    }
    if min_pts == 0 {
        return Err(Error::Parameter("min_pts must be at least 1".into()));
    }
    if points.is_empty() {
        return Ok(Vec::new());
    }
    let index = NeighborIndex::for_radius(points.clone(), eps)?;
    let mut neighborhoods = Vec::with_capacity(points.len());
    let mut buf = Vec::new();
    for i in 0..points.len() {
        index.within(points.row(i), eps, true, &mut buf);
        neighborhoods.push(buf.clone());
    }
    let core: Vec<bool> = neighborhoods.iter().map(|n| n.len() >= min_pts).collect();
    Ok(neighborhoods
        .iter()
        .enumerate()
        .map(|(i, n)| core[i] || n.iter().any(|&j| core[j]))
        .collect())
}

/// Attaches doc ids to raw membership flags.
pub fn label_documents(doc_ids: &[String], members: &[bool]) -> Vec<DensityCoreLabel> {
    doc_ids
        .iter()
        .zip(members)
        .map(|(id, &m)| DensityCoreLabel {
            doc_id: id.clone(),
            is_core_member: m,
        })
        .collect()
}
