//! Exact k-nearest-neighbor search over labeled 2D points.
//!
//! The index answers two queries: the distance to the k-th nearest data
//! point, and per-label counts of points within a radius (inclusive). Both
//! are exact: results equal a brute-force scan bit for bit, because pruning
//! bounds are always true lower bounds of the leaf-scan arithmetic. There is
//! no approximate mode.

use thiserror::Error;

use crate::ingest::ProjectedPoint;

const LEAF_SIZE: usize = 16;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum IndexError {
    #[error("k = {k} out of range for {n} points (need 1 <= k <= n)")]
    KOutOfRange { k: usize, n: usize },
    #[error("point {index} has label {label}, outside the declared {n_labels} labels")]
    LabelOutOfRange {
        index: usize,
        label: u32,
        n_labels: usize,
    },
    #[error("cannot index an empty point set")]
    Empty,
}

/// Squared Euclidean distance. Every distance comparison in this crate goes
/// through this one function so alternative search paths agree bitwise.
#[inline]
pub fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy
}

enum Node {
    Split {
        axis: usize,
        value: f64,
        left: u32,
        right: u32,
    },
    Leaf {
        start: u32,
        end: u32,
    },
}

/// Immutable kd-tree over labeled points.
pub struct SpatialIndex {
    pts: Vec<[f64; 2]>,
    labels: Vec<u32>,
    n_labels: usize,
    /// Point indices arranged so each leaf owns a contiguous range.
    order: Vec<u32>,
    nodes: Vec<Node>,
    root: usize,
}

impl SpatialIndex {
    pub fn build(
        points: &[ProjectedPoint],
        labels: &[u32],
        n_labels: usize,
    ) -> Result<Self, IndexError> {
        assert_eq!(points.len(), labels.len());
        if points.is_empty() {
            return Err(IndexError::Empty);
        }
        for (index, &label) in labels.iter().enumerate() {
            if label as usize >= n_labels {
                return Err(IndexError::LabelOutOfRange {
                    index,
                    label,
                    n_labels,
                });
            }
        }
        let pts: Vec<[f64; 2]> = points.iter().map(|p| [p.x, p.y]).collect();
        let mut order: Vec<u32> = (0..pts.len() as u32).collect();
        let mut nodes = Vec::new();
        let root = build_node(&pts, &mut order, 0, &mut nodes);
        Ok(SpatialIndex {
            pts,
            labels: labels.to_vec(),
            n_labels,
            order,
            nodes,
            root,
        })
    }

    pub fn len(&self) -> usize {
        self.pts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pts.is_empty()
    }

    pub fn n_labels(&self) -> usize {
        self.n_labels
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.pts
    }

    /// Axis-aligned extent of the data as (x_min, y_min, x_max, y_max).
    pub fn extent(&self) -> (f64, f64, f64, f64) {
        let mut e = (
            f64::INFINITY,
            f64::INFINITY,
            f64::NEG_INFINITY,
            f64::NEG_INFINITY,
        );
        for p in &self.pts {
            e.0 = e.0.min(p[0]);
            e.1 = e.1.min(p[1]);
            e.2 = e.2.max(p[0]);
            e.3 = e.3.max(p[1]);
        }
        e
    }

    /// Squared distance from `q` to its k-th nearest data point (a query on
    /// a data point counts that point itself at distance 0).
    pub fn kth_dist2(&self, q: ProjectedPoint, k: usize) -> Result<f64, IndexError> {
        if k == 0 || k > self.pts.len() {
            return Err(IndexError::KOutOfRange {
                k,
                n: self.pts.len(),
            });
        }
        let q = [q.x, q.y];
        // Max-heap over the k smallest squared distances; nonnegative f64
        // order equals the integer order of the bit patterns.
        let mut heap: std::collections::BinaryHeap<u64> =
            std::collections::BinaryHeap::with_capacity(k + 1);
        self.knn_visit(self.root, q, k, &mut heap);
        Ok(f64::from_bits(*heap.peek().expect("k >= 1")))
    }

    /// Distance in meters to the k-th nearest data point.
    pub fn knn_radius(&self, q: ProjectedPoint, k: usize) -> Result<f64, IndexError> {
        Ok(self.kth_dist2(q, k)?.sqrt())
    }

    fn knn_visit(
        &self,
        node: usize,
        q: [f64; 2],
        k: usize,
        heap: &mut std::collections::BinaryHeap<u64>,
    ) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start as usize..end as usize] {
                    let d2 = dist2(q, self.pts[i as usize]);
                    if heap.len() < k {
                        heap.push(d2.to_bits());
                    } else if d2.to_bits() < *heap.peek().expect("nonempty") {
                        heap.pop();
                        heap.push(d2.to_bits());
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let delta = q[axis] - value;
                let (near, far) = if delta < 0.0 { (left, right) } else { (right, left) };
                self.knn_visit(near as usize, q, k, heap);
                // The plane distance lower-bounds every far-side point
                // distance, so skipping here can never change the k-th value.
                if heap.len() < k
                    || (delta * delta).to_bits() <= *heap.peek().expect("nonempty")
                {
                    self.knn_visit(far as usize, q, k, heap);
                }
            }
        }
    }

    /// Per-label counts of data points at distance <= `radius` (inclusive).
    pub fn count_within(&self, q: ProjectedPoint, radius: f64) -> Vec<u64> {
        let mut counts = vec![0u64; self.n_labels];
        self.count_visit(self.root, [q.x, q.y], radius, &mut counts);
        counts
    }

    fn count_visit(&self, node: usize, q: [f64; 2], radius: f64, counts: &mut [u64]) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start as usize..end as usize] {
                    if dist2(q, self.pts[i as usize]).sqrt() <= radius {
                        counts[self.labels[i as usize] as usize] += 1;
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let delta = q[axis] - value;
                let (near, far) = if delta < 0.0 { (left, right) } else { (right, left) };
                self.count_visit(near as usize, q, radius, counts);
                if delta.abs() <= radius {
                    self.count_visit(far as usize, q, radius, counts);
                }
            }
        }
    }
}

fn build_node(pts: &[[f64; 2]], order: &mut [u32], offset: usize, nodes: &mut Vec<Node>) -> usize {
    if order.len() <= LEAF_SIZE {
        nodes.push(Node::Leaf {
            start: offset as u32,
            end: (offset + order.len()) as u32,
        });
        return nodes.len() - 1;
    }
    // Split the axis with the larger spread at the median.
    let (mut min, mut max) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for &i in order.iter() {
        for a in 0..2 {
            min[a] = min[a].min(pts[i as usize][a]);
            max[a] = max[a].max(pts[i as usize][a]);
        }
    }
    let axis = usize::from(max[1] - min[1] > max[0] - min[0]);
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| {
        pts[a as usize][axis].total_cmp(&pts[b as usize][axis])
    });
    let value = pts[order[mid] as usize][axis];

    let slot = nodes.len();
    nodes.push(Node::Leaf { start: 0, end: 0 }); // placeholder
    let (left_order, right_order) = order.split_at_mut(mid);
    let left = build_node(pts, left_order, offset, nodes) as u32;
    let right = build_node(pts, right_order, offset + mid, nodes) as u32;
    nodes[slot] = Node::Split {
        axis,
        value,
        left,
        right,
    };
    slot
}
