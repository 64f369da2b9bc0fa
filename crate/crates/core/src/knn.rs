//! Exact k-nearest-neighbor search over points of any fixed dimension.
//!
//! Used for 3D neighborhoods (eigen-features, octant attributes) and for
//! nearest-neighbor matching in feature space. Ties are broken by point index
//! so queries are fully deterministic.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

const LEAF_SIZE: usize = 16;

/// Scalar types a [`KdTree`] can index. Distances are always accumulated in
/// `f64`, one coordinate at a time in index order.
pub trait Coord: Copy + Send + Sync {
    fn to_f64(self) -> f64;
}

impl Coord for f64 {
    #[inline]
    fn to_f64(self) -> f64 {
        self
    }
}

impl Coord for f32 {
    #[inline]
    fn to_f64(self) -> f64 {
        self as f64
    }
}

/// Squared Euclidean distance, accumulated in `f64`.
#[inline]
pub fn squared_distance<T: Coord>(a: &[T], b: &[T]) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x.to_f64() - y.to_f64();
        s += d * d;
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub distance_squared: f64,
}

impl Neighbor {
    fn key_cmp(&self, other: &Self) -> Ordering {
        self.distance_squared
            .total_cmp(&other.distance_squared)
            .then(self.index.cmp(&other.index))
    }
}

impl Eq for Neighbor {}

impl PartialOrd for Neighbor {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Neighbor {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key_cmp(other)
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf { start: usize, end: usize },
    Split { dim: usize, value: f64, left: usize, right: usize },
}

#[derive(Debug, Clone)]
pub struct KdTree<T: Coord> {
    dim: usize,
    data: Vec<T>,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

impl<T: Coord> KdTree<T> {
    /// `data` holds `data.len() / dim` points laid out row by row.
    ///
    /// # Panics
    /// If `dim == 0` or `data.len()` is not a multiple of `dim`.
    pub fn new(data: Vec<T>, dim: usize) -> Self {
        assert!(dim > 0, "dimension must be positive");
        assert_eq!(data.len() % dim, 0, "data length not a multiple of dim");
        let n = data.len() / dim;
        let mut tree = KdTree {
            dim,
            data,
            order: (0..n).collect(),
            nodes: Vec::new(),
        };
        if n > 0 {
            tree.build(0, n);
        }
        tree
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, index: usize) -> &[T] {
        &self.data[index * self.dim..(index + 1) * self.dim]
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let dim = self.widest_dimension(start, end);
        let mid = start + (end - start) / 2;
        {
            let (data, d) = (&self.data, self.dim);
            self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
                data[a * d + dim]
                    .to_f64()
                    .total_cmp(&data[b * d + dim].to_f64())
                    .then(a.cmp(&b))
            });
        }
        let value = self.data[self.order[mid] * self.dim + dim].to_f64();
        self.nodes.push(Node::Leaf { start: 0, end: 0 });
        let left = self.build(start, mid);
        let right = self.build(mid, end);
        self.nodes[id] = Node::Split {
            dim,
            value,
            left,
            right,
        };
        id
    }

    fn widest_dimension(&self, start: usize, end: usize) -> usize {
        let mut best = (0, f64::NEG_INFINITY);
        for d in 0..self.dim {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for &i in &self.order[start..end] {
                let v = self.data[i * self.dim + d].to_f64();
                lo = lo.min(v);
                hi = hi.max(v);
            }
            if hi - lo > best.1 {
                best = (d, hi - lo);
            }
        }
        best.0
    }

    /// The `k` nearest points to `query`, sorted by `(distance, index)`.
    /// Returns fewer than `k` only when the tree holds fewer points.
    pub fn knn(&self, query: &[T], k: usize) -> Vec<Neighbor> {
        assert_eq!(query.len(), self.dim, "query dimension mismatch");
        if k == 0 || self.is_empty() {
            return Vec::new();
        }
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.search(0, query, k, &mut heap);
        let mut out = heap.into_vec();
        out.sort_unstable();
        out
    }

    pub fn nearest(&self, query: &[T]) -> Option<Neighbor> {
        self.knn(query, 1).into_iter().next()
    }

    fn search(&self, node: usize, query: &[T], k: usize, heap: &mut BinaryHeap<Neighbor>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let cand = Neighbor {
                        index: i,
                        distance_squared: squared_distance(query, self.point(i)),
                    };
                    if heap.len() < k {
                        heap.push(cand);
                    } else if cand < *heap.peek().expect("heap is full") {
                        heap.pop();
                        heap.push(cand);
                    }
                }
            }
            Node::Split {
                dim,
                value,
                left,
                right,
            } => {
                let diff = query[dim].to_f64() - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, query, k, heap);
                let bound = diff * diff;
                if heap.len() < k || bound <= heap.peek().expect("heap is full").distance_squared {
                    self.search(far, query, k, heap);
                }
            }
        }
    }
}

/// Builds a 3D tree over a point cloud's coordinates.
pub fn cloud_tree(points: &[crate::types::Point3]) -> KdTree<f64> {
    let data = points.iter().flat_map(|p| p.as_array()).collect();
    KdTree::new(data, 3)
}
