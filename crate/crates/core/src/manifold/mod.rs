//! Projections, spatial indexes and intrinsic-dimension estimation.

mod index;
mod points;
mod project;
mod twonn;

pub use index::{epsilon_edges, GridIndex, KdTree, Neighbor, NeighborIndex};
pub use points::{euclidean, squared_euclidean, PointCloud};
pub use project::{
    principal_projection, project, read_projection_csv, write_projection_csv, Projection, ProjectorKind,
    ProjectorSpec,
};
pub use twonn::{twonn_estimate, twonn_from_ratios, TwoNnEstimate, TWONN_MIN_POINTS};
