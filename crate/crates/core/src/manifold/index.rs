//! Exact nearest-neighbour and fixed-radius search.
//!
//! 2D point sets use a uniform hash grid; any other dimension uses a k-d tree.
//! Results are ordered by `(distance, index)` so ties resolve identically to
//! an exhaustive scan.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use crate::error::{Error, Result};

use super::points::{euclidean, PointCloud};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub distance: f64,
}

impl Neighbor {
    fn key_cmp(&self, other: &Self) -> Ordering {
        self.distance
            .total_cmp(&other.distance)
            .then(self.index.cmp(&other.index))
    }
}

// Max-heap entry ordered by (distance, index).
struct HeapItem(Neighbor);

impl PartialEq for HeapItem {
    fn eq(&self, other: &Self) -> bool {
        self.0.key_cmp(&other.0) == Ordering::Equal
    }
}
impl Eq for HeapItem {}
impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.key_cmp(&other.0)
    }
}

/// Keeps the `k` smallest neighbours seen so far.
struct KBest {
    k: usize,
    heap: BinaryHeap<HeapItem>,
}

impl KBest {
    fn new(k: usize) -> Self {
        Self {
            k,
            heap: BinaryHeap::with_capacity(k + 1),
        }
    }

    fn offer(&mut self, n: Neighbor) {
        if self.heap.len() < self.k {
            self.heap.push(HeapItem(n));
        } else if let Some(top) = self.heap.peek() {
            if n.key_cmp(&top.0) == Ordering::Less {
                self.heap.pop();
                self.heap.push(HeapItem(n));
            }
        }
    }

    fn full(&self) -> bool {
        self.heap.len() >= self.k
    }

    fn worst(&self) -> f64 {
        self.heap.peek().map_or(f64::INFINITY, |t| t.0.distance)
    }

    fn into_sorted(self) -> Vec<Neighbor> {
        let mut v: Vec<Neighbor> = self.heap.into_iter().map(|h| h.0).collect();
        v.sort_by(Neighbor::key_cmp);
        v
    }
}

/// Uniform hash grid over 2D points.
#[derive(Debug, Clone)]
pub struct GridIndex {
    points: PointCloud,
    cell: f64,
    cells: HashMap<(i64, i64), Vec<usize>>,
    min_cell: (i64, i64),
    max_cell: (i64, i64),
}

impl GridIndex {
    /// Builds a grid with the given cell edge length.
    pub fn with_cell(points: PointCloud, cell: f64) -> Result<Self> {
        if points.dim() != 2 {
            return Err(Error::Parameter(format!("grid index needs 2D points, got {}D", points.dim())));
        }
        if !(cell.is_finite() && cell > 0.0) {
            return Err(Error::Parameter(format!("grid cell size {cell} must be positive")));
        }
        let mut cells: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        let mut min_cell = (i64::MAX, i64::MAX);
        let mut max_cell = (i64::MIN, i64::MIN);
        for (i, p) in points.rows().enumerate() {
            let c = Self::cell_of(cell, p);
            min_cell = (min_cell.0.min(c.0), min_cell.1.min(c.1));
            max_cell = (max_cell.0.max(c.0), max_cell.1.max(c.1));
            cells.entry(c).or_default().push(i);
        }
        Ok(Self {
            points,
            cell,
            cells,
            min_cell,
            max_cell,
        })
    }

    /// Builds a grid sized for roughly four points per occupied cell.
    pub fn new(points: PointCloud) -> Result<Self> {
        let n = points.len().max(1) as f64;
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in points.rows() {
            for d in 0..2 {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        let (w, h) = ((hi[0] - lo[0]).max(0.0), (hi[1] - lo[1]).max(0.0));
        let cell = if w * h > 0.0 {
            (4.0 * w * h / n).sqrt()
        } else if w.max(h) > 0.0 {
            4.0 * w.max(h) / n
        } else {
            1.0
        };
        Self::with_cell(points, cell)
    }

    fn cell_of(cell: f64, p: &[f64]) -> (i64, i64) {
        ((p[0] / cell).floor() as i64, (p[1] / cell).floor() as i64)
    }

    pub fn points(&self) -> &PointCloud {
        &self.points
    }

    fn knn_impl(&self, q: &[f64], k: usize, exclude: Option<usize>) -> Vec<Neighbor> {
        let mut best = KBest::new(k);
        let (cx, cy) = Self::cell_of(self.cell, q);
        let max_ring = [
            (cx - self.min_cell.0).abs(),
            (self.max_cell.0 - cx).abs(),
            (cy - self.min_cell.1).abs(),
            (self.max_cell.1 - cy).abs(),
        ]
        .into_iter()
        .max()
        .unwrap_or(0);
        for ring in 0..=max_ring {
            self.for_ring(cx, cy, ring, |idx| {
                for &i in idx {
                    if Some(i) != exclude {
                        best.offer(Neighbor {
                            index: i,
                            distance: euclidean(q, self.points.row(i)),
                        });
                    }
                }
            });
            // Unvisited cells are at least (ring) cells away; keep one cell of slack
            // for floor() rounding at cell borders.
            if best.full() && best.worst() < (ring as f64 - 1.0) * self.cell {
                break;
            }
        }
        best.into_sorted()
    }

    fn for_ring(&self, cx: i64, cy: i64, ring: i64, mut f: impl FnMut(&[usize])) {
        let mut visit = |x: i64, y: i64| {
            if let Some(v) = self.cells.get(&(x, y)) {
                f(v);
            }
        };
        if ring == 0 {
            visit(cx, cy);
            return;
        }
        for x in (cx - ring)..=(cx + ring) {
            visit(x, cy - ring);
            visit(x, cy + ring);
        }
        for y in (cy - ring + 1)..=(cy + ring - 1) {
            visit(cx - ring, y);
            visit(cx + ring, y);
        }
    }

    fn within_impl(&self, q: &[f64], radius: f64, inclusive: bool, out: &mut Vec<usize>) {
        out.clear();
        let lo = Self::cell_of(self.cell, &[q[0] - radius, q[1] - radius]);
        let hi = Self::cell_of(self.cell, &[q[0] + radius, q[1] + radius]);
        for x in (lo.0 - 1)..=(hi.0 + 1) {
            for y in (lo.1 - 1)..=(hi.1 + 1) {
                if let Some(v) = self.cells.get(&(x, y)) {
                    for &i in v {
                        let d = euclidean(q, self.points.row(i));
                        if d < radius || (inclusive && d == radius) {
                            out.push(i);
                        }
                    }
                }
            }
        }
        out.sort_unstable();
    }
}

#[derive(Debug, Clone)]
enum KdNode {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

/// k-d tree over points of any dimension.
#[derive(Debug, Clone)]
pub struct KdTree {
    points: PointCloud,
    order: Vec<usize>,
    nodes: Vec<KdNode>,
}

const LEAF_SIZE: usize = 12;

impl KdTree {
    pub fn new(points: PointCloud) -> Self {
        let mut tree = Self {
            order: (0..points.len()).collect(),
            points,
            nodes: Vec::new(),
        };
        if !tree.order.is_empty() {
            tree.build(0, tree.order.len());
        }
        tree
    }

    pub fn points(&self) -> &PointCloud {
        &self.points
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(KdNode::Leaf { start, end });
        if end - start <= LEAF_SIZE {
            return id;
        }
        let dim = self.points.dim();
        let mut axis = 0;
        let mut widest = -1.0;
        for a in 0..dim {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for &i in &self.order[start..end] {
                let v = self.points.row(i)[a];
                lo = lo.min(v);
                hi = hi.max(v);
            }
            if hi - lo > widest {
                widest = hi - lo;
                axis = a;
            }
        }
        if widest <= 0.0 {
            // all points coincide
            return id;
        }
        let mid = start + (end - start) / 2;
        let points = &self.points;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            points.row(a)[axis]
                .total_cmp(&points.row(b)[axis])
                .then(a.cmp(&b))
        });
        let value = self.points.row(self.order[mid])[axis];
        let left = self.build(start, mid);
        let right = self.build(mid, end);
        self.nodes[id] = KdNode::Split {
            axis,
            value,
            left,
            right,
        };
        id
    }

    // Left subtree holds coordinates <= value, right holds >= value.
    fn search(&self, node: usize, q: &[f64], best: &mut KBest, exclude: Option<usize>) {
        match self.nodes[node] {
            KdNode::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    if Some(i) != exclude {
                        best.offer(Neighbor {
                            index: i,
                            distance: euclidean(q, self.points.row(i)),
                        });
                    }
                }
            }
            KdNode::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis] - value;
                let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, best, exclude);
                if !best.full() || diff.abs() <= best.worst() {
                    self.search(far, q, best, exclude);
                }
            }
        }
    }

    fn within(&self, node: usize, q: &[f64], radius: f64, inclusive: bool, out: &mut Vec<usize>) {
        match self.nodes[node] {
            KdNode::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let d = euclidean(q, self.points.row(i));
                    if d < radius || (inclusive && d == radius) {
                        out.push(i);
                    }
                }
            }
            KdNode::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis] - value;
                if diff <= radius {
                    self.within(left, q, radius, inclusive, out);
                }
                if -diff <= radius {
                    self.within(right, q, radius, inclusive, out);
                }
            }
        }
    }
}

/// Exact spatial index; grid-backed for 2D points, k-d tree otherwise.
#[derive(Debug, Clone)]
pub enum NeighborIndex {
    Grid(GridIndex),
    Kd(KdTree),
}

impl NeighborIndex {
    pub fn build(points: PointCloud) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Parameter("cannot index an empty point set".into()));
        }
        Ok(if points.dim() == 2 {
            NeighborIndex::Grid(GridIndex::new(points)?)
        } else {
            NeighborIndex::Kd(KdTree::new(points))
        })
    }

    /// A 2D grid whose cells match a query radius; best for repeated ε-queries.
    pub fn for_radius(points: PointCloud, radius: f64) -> Result<Self> {
        if points.dim() == 2 {
            Ok(NeighborIndex::Grid(GridIndex::with_cell(points, radius)?))
        } else {
            Self::build(points)
        }
    }

    pub fn points(&self) -> &PointCloud {
        match self {
            NeighborIndex::Grid(g) => g.points(),
            NeighborIndex::Kd(t) => t.points(),
        }
    }

    pub fn len(&self) -> usize {
        self.points().len()
    }

    pub fn is_empty(&self) -> bool {
        self.points().is_empty()
    }

    fn knn_inner(&self, q: &[f64], k: usize, exclude: Option<usize>) -> Result<Vec<Neighbor>> {
        if k == 0 {
            return Err(Error::Parameter("k must be positive".into()));
        }
        if q.len() != self.points().dim() {
            return Err(Error::Parameter(format!(
                "query has dimension {}, index has {}",
                q.len(),
                self.points().dim()
            )));
        }
        Ok(match self {
            NeighborIndex::Grid(g) => g.knn_impl(q, k, exclude),
            NeighborIndex::Kd(t) => {
                let mut best = KBest::new(k);
                t.search(0, q, &mut best, exclude);
                best.into_sorted()
            }
        })
    }

    /// The `min(k, N)` nearest indexed points to an arbitrary query point.
    pub fn knn(&self, q: &[f64], k: usize) -> Result<Vec<Neighbor>> {
        self.knn_inner(q, k, None)
    }

    /// The `min(k, N - 1)` nearest neighbours of member `i`, excluding itself.
    pub fn knn_of(&self, i: usize, k: usize) -> Result<Vec<Neighbor>> {
        if i >= self.len() {
            return Err(Error::Parameter(format!("member {i} out of range")));
        }
        let q = self.points().row(i).to_vec();
        self.knn_inner(&q, k, Some(i))
    }

    /// Indices within `radius` of `q`, ascending. Strict `<` unless `inclusive`.
    pub fn within(&self, q: &[f64], radius: f64, inclusive: bool, out: &mut Vec<usize>) {
        match self {
            NeighborIndex::Grid(g) => g.within_impl(q, radius, inclusive, out),
            NeighborIndex::Kd(t) => {
                out.clear();
                t.within(0, q, radius, inclusive, out);
                out.sort_unstable();
            }
        }
    }
}

/// All pairs `(i, j)`, `i < j`, with `‖p_i − p_j‖ < eps`, sorted.
pub fn epsilon_edges(points: &PointCloud, eps: f64) -> Result<Vec<(usize, usize)>> {
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::Parameter(format!("eps {eps} must be positive")));
    }
    let mut edges = Vec::new();
    if points.is_empty() {
        return Ok(edges);
    }
    let index = NeighborIndex::for_radius(points.clone(), eps)?;
    let mut buf = Vec::new();
    for i in 0..points.len() {
        index.within(points.row(i), eps, false, &mut buf);
        edges.extend(buf.iter().filter(|&&j| j > i).map(|&j| (i, j)));
    }
    Ok(edges)
}
