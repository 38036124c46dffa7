//! Projection of full-dimension embeddings onto the 5D structural manifold
//! and the 2D map.
//!
//! Production runs load coordinates produced by an external nonlinear reducer
//! from CSV. The built-in reducer is a deterministic linear one (centre, then
//! project onto the top-k variance directions) so the pipeline also runs
//! with no external tooling.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{csv_bytes, write_atomic};
use crate::model::EmbeddingVector;

use super::points::PointCloud;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ProjectorKind {
    ExternalFile { path: PathBuf },
    ReferenceReducer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectorSpec {
    #[serde(flatten)]
    pub kind: ProjectorKind,
    pub target_dims: usize,
    /// Free-form parameters. The reference reducer reads `target_spread`
    /// (rescale so the RMS distance to the origin equals this value).
    #[serde(default)]
    pub params: BTreeMap<String, String>,
    #[serde(default)]
    pub seed: u64,
}

impl ProjectorSpec {
    pub fn reference(target_dims: usize, seed: u64) -> Self {
        Self {
            kind: ProjectorKind::ReferenceReducer,
            target_dims,
            params: BTreeMap::new(),
            seed,
        }
    }

    pub fn external(path: impl Into<PathBuf>, target_dims: usize) -> Self {
        Self {
            kind: ProjectorKind::ExternalFile { path: path.into() },
            target_dims,
            params: BTreeMap::new(),
            seed: 0,
        }
    }

    pub fn with_param(mut self, key: &str, value: impl ToString) -> Self {
        self.params.insert(key.to_owned(), value.to_string());
        self
    }

    fn param_f64(&self, key: &str) -> Result<Option<f64>> {
        self.params
            .get(key)
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| Error::Parameter(format!("projector param {key}={v:?} is not a number")))
            })
            .transpose()
    }
}

/// Projected coordinates aligned with `doc_ids`.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub doc_ids: Vec<String>,
    pub points: PointCloud,
}

pub fn project(embeddings: &[EmbeddingVector], spec: &ProjectorSpec) -> Result<Projection> {
    if spec.target_dims == 0 {
        return Err(Error::Parameter("target_dims must be positive".into()));
    }
    if embeddings.is_empty() {
        return Err(Error::Parameter("no embeddings to project".into()));
    }
    let doc_ids: Vec<String> = embeddings.iter().map(|e| e.doc_id().to_owned()).collect();
    match &spec.kind {
        ProjectorKind::ExternalFile { path } => {
            let table = read_projection_csv(path)?;
            if table.points.dim() != spec.target_dims {
                return Err(Error::Ingestion(format!(
                    "{} has {} coordinate columns, expected {}",
                    path.display(),
                    table.points.dim(),
                    spec.target_dims
                )));
            }
            let pos: HashMap<&str, usize> = table
                .doc_ids
                .iter()
                .enumerate()
                .map(|(i, id)| (id.as_str(), i))
                .collect();
            let rows = doc_ids
                .iter()
                .map(|id| {
                    pos.get(id.as_str()).copied().ok_or_else(|| {
                        Error::Ingestion(format!("{} has no row for {id}", path.display()))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Projection {
                points: table.points.subset(&rows),
                doc_ids,
            })
        }
        ProjectorKind::ReferenceReducer => {
            let dim = embeddings[0].dim();
            if let Some(e) = embeddings.iter().find(|e| e.dim() != dim) {
                return Err(Error::Parameter(format!(
                    "embedding {} has dimension {}, expected {dim}",
                    e.doc_id(),
                    e.dim()
                )));
            }
            if dim < spec.target_dims {
                return Err(Error::Parameter(format!(
                    "embedding dimension {dim} is below target dimension {}",
                    spec.target_dims
                )));
            }
            let rows: Vec<Vec<f64>> = embeddings
                .iter()
                .map(|e| e.values().iter().map(|&v| f64::from(v)).collect())
                .collect();
            let mut points = principal_projection(&PointCloud::from_rows(&rows)?, spec.target_dims, spec.seed)?;
            if let Some(spread) = spec.param_f64("target_spread")? {
                if !(spread.is_finite() && spread > 0.0) {
                    return Err(Error::Parameter(format!("target_spread {spread} must be positive")));
                }
                let rms = (points.coords().iter().map(|c| c * c).sum::<f64>() / points.len() as f64).sqrt();
                if rms > 0.0 {
                    points = points.scaled(spread / rms);
                }
            }
            Ok(Projection { doc_ids, points })
        }
    }
}

/// Dimension above which the covariance matrix is not formed explicitly.
const DENSE_EIGEN_MAX_DIM: usize = 256;

/// Centres `data` and projects it onto its top-`k` principal axes.
///
/// Axes are ordered by decreasing variance (ties by solver order) and each
/// is sign-fixed so its largest-magnitude entry is positive.
pub fn principal_projection(data: &PointCloud, k: usize, seed: u64) -> Result<PointCloud> {
    let (n, d) = (data.len(), data.dim());
    if k > d {
        return Err(Error::Parameter(format!("cannot take {k} components of {d}D data")));
    }
    let mut mean = vec![0.0; d];
    for r in data.rows() {
        for (m, x) in mean.iter_mut().zip(r) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let centered = DMatrix::from_fn(n, d, |i, j| data.row(i)[j] - mean[j]);

    let axes = if d <= DENSE_EIGEN_MAX_DIM {
        let cov = centered.transpose() * &centered;
        top_eigenvectors(cov, k)
    } else {
        subspace_iteration(&centered, k, seed)
    };
    let axes = canonical_signs(axes);
    let scores = &centered * &axes;
    let mut coords = Vec::with_capacity(n * k);
    for i in 0..n {
        for j in 0..k {
            coords.push(scores[(i, j)]);
        }
    }
    PointCloud::new(k, coords)
}

fn top_eigenvectors(sym: DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    DMatrix::from_fn(eig.eigenvectors.nrows(), k, |i, j| eig.eigenvectors[(i, order[j])])
}

/// Block power iteration on XᵀX without forming it, followed by a
/// Rayleigh–Ritz step. Start block is seeded.
fn subspace_iteration(x: &DMatrix<f64>, k: usize, seed: u64) -> DMatrix<f64> {
    let d = x.ncols();
    let block = (k + 8).min(d);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q = DMatrix::from_fn(d, block, |_, _| rng.random::<f64>() - 0.5);
    q = q.qr().q();
    let mut prev: Option<DMatrix<f64>> = None;
    for _ in 0..300 {
        let y = x.transpose() * (x * &q);
        q = y.qr().q();
        let lead = q.columns(0, k).into_owned();
        if let Some(p) = &prev {
            // principal angles between successive leading subspaces
            let overlap = (p.transpose() * &lead).singular_values();
            if overlap.iter().all(|s| (1.0 - s).abs() < 1e-13) {
                break;
            }
        }
        prev = Some(lead);
    }
    let xq = x * &q;
    let small = xq.transpose() * &xq;
    let w = top_eigenvectors(small, k);
    q * w
}

fn canonical_signs(mut axes: DMatrix<f64>) -> DMatrix<f64> {
    for j in 0..axes.ncols() {
        let mut best = 0;
        for i in 0..axes.nrows() {
            if axes[(i, j)].abs() > axes[(best, j)].abs() {
                best = i;
            }
        }
        if axes[(best, j)] < 0.0 {
            axes.column_mut(j).neg_mut();
        }
    }
    axes
}

/// Reads `doc_id,c1,...,ck`.
pub fn read_projection_csv(path: &Path) -> Result<Projection> {
    let mut rdr = csv::Reader::from_path(path)
        .map_err(|e| Error::Ingestion(format!("{}: {e}", path.display())))?;
    let header = rdr.headers()?.clone();
    if header.get(0) != Some("doc_id") || header.len() < 2 {
        return Err(Error::Ingestion(format!(
            "{}: header must be doc_id,c1,...,ck",
            path.display()
        )));
    }
    let k = header.len() - 1;
    let mut ids = Vec::new();
    let mut coords = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        ids.push(rec[0].to_owned());
        for c in rec.iter().skip(1) {
            coords.push(c.parse::<f64>().map_err(|_| {
                Error::Ingestion(format!("{}: row {}: bad coordinate {c:?}", path.display(), line + 2))
            })?);
        }
    }
    if ids.is_empty() {
        return Err(Error::Ingestion(format!("{}: no rows", path.display())));
    }
    Ok(Projection {
        doc_ids: ids,
        points: PointCloud::new(k, coords)?,
    })
}

pub fn write_projection_csv(path: &Path, proj: &Projection) -> Result<()> {
    let k = proj.points.dim();
    let mut header = vec!["doc_id".to_owned()];
    header.extend((1..=k).map(|i| format!("c{i}")));
    let bytes = csv_bytes(&header, |w| {
        for (id, row) in proj.doc_ids.iter().zip(proj.points.rows()) {
            let mut rec = vec![id.clone()];
            rec.extend(row.iter().map(f64::to_string));
            w.write_record(&rec)?;
        }
        Ok(())
    })?;
    write_atomic(path, &bytes)
}
