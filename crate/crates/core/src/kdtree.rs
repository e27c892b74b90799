//! Exact k-nearest-neighbor search over a 3D point cloud.
//!
//! The tree splits at the median of the axis with the widest extent. Results
//! are ordered by `(squared distance, original index)`, so ties always resolve
//! to the lower index and every query is reproducible.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geom::{Point3, PointCloud};

const LEAF_SIZE: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub dist_sq: f64,
}

impl Neighbor {
    fn key_cmp(&self, other: &Self) -> Ordering {
        self.dist_sq.total_cmp(&other.dist_sq).then(self.index.cmp(&other.index))
    }
}

// Max-heap on (dist_sq, index): the root is the current worst candidate.
#[derive(Debug, Clone, Copy)]
struct Candidate(Neighbor);

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.key_cmp(&other.0)
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: f64, left: usize, right: usize },
}

#[derive(Debug, Clone)]
pub struct KdTree3 {
    points: Vec<Point3>,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

impl KdTree3 {
    pub fn build(cloud: &PointCloud) -> Result<Self> {
        Self::from_points(cloud.points())
    }

    pub fn from_points(points: &[Point3]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyCloud);
        }
        if let Some(index) = points.iter().position(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(Error::NonFinitePoint { index });
        }
        let mut tree = KdTree3 {
            points: points.to_vec(),
            order: (0..points.len()).collect(),
            nodes: Vec::with_capacity(2 * points.len() / LEAF_SIZE + 1),
        };
        tree.build_node(0, points.len());
        Ok(tree)
    }

    fn build_node(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let axis = self.widest_axis(start, end);
        let mid = start + (end - start) / 2;
        let points = &self.points;
        self.order[start..end]
            .select_nth_unstable_by(mid - start, |&a, &b| points[a][axis].total_cmp(&points[b][axis]).then(a.cmp(&b)));
        let value = self.points[self.order[mid]][axis];
        self.nodes.push(Node::Leaf { start, end });
        let left = self.build_node(start, mid);
        let right = self.build_node(mid, end);
        self.nodes[id] = Node::Split { axis, value, left, right };
        id
    }

    fn widest_axis(&self, start: usize, end: usize) -> usize {
        let mut lo = Point3::repeat(f64::INFINITY);
        let mut hi = Point3::repeat(f64::NEG_INFINITY);
        for &i in &self.order[start..end] {
            lo = lo.inf(&self.points[i]);
            hi = hi.sup(&self.points[i]);
        }
        (hi - lo).imax()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, index: usize) -> &Point3 {
        &self.points[index]
    }

    /// The `k` nearest indexed points to `query`, ascending by distance.
    pub fn knn(&self, query: &Point3, k: usize) -> Result<Vec<Neighbor>> {
        if k == 0 {
            return Err(Error::InvalidArgument("k must be at least 1".into()));
        }
        if k > self.len() {
            return Err(Error::TooFewPoints { requested: k, available: self.len() });
        }
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.search(0, query, k, &mut heap);
        let mut out: Vec<Neighbor> = heap.into_iter().map(|c| c.0).collect();
        out.sort_by(Neighbor::key_cmp);
        Ok(out)
    }

    /// Nearest neighbor of `query`.
    pub fn nearest(&self, query: &Point3) -> Neighbor {
        let mut heap = BinaryHeap::with_capacity(2);
        self.search(0, query, 1, &mut heap);
        heap.pop().expect("tree is never empty").0
    }

    /// Neighborhoods of every indexed point (each includes the point itself).
    pub fn knn_all(&self, k: usize, parallel: bool) -> Result<Vec<Vec<Neighbor>>> {
        if parallel {
            self.points.par_iter().map(|p| self.knn(p, k)).collect()
        } else {
            self.points.iter().map(|p| self.knn(p, k)).collect()
        }
    }

    fn search(&self, node: usize, query: &Point3, k: usize, heap: &mut BinaryHeap<Candidate>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &index in &self.order[start..end] {
                    let cand = Neighbor { index, dist_sq: (self.points[index] - query).norm_squared() };
                    if heap.len() < k {
                        heap.push(Candidate(cand));
                    } else if cand.key_cmp(&heap.peek().unwrap().0) == Ordering::Less {
                        heap.pop();
                        heap.push(Candidate(cand));
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let diff = query[axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, query, k, heap);
                // `<=` keeps equal-distance candidates with lower indices reachable.
                if heap.len() < k || diff * diff <= heap.peek().unwrap().0.dist_sq {
                    self.search(far, query, k, heap);
                }
            }
        }
    }

    /// Calls `visit` for every indexed point within `radius_sq` of `query`.
    pub(crate) fn for_each_within(&self, query: &Point3, radius_sq: f64, mut visit: impl FnMut(Neighbor)) {
        let mut stack = vec![0usize];
        while let Some(node) = stack.pop() {
            match self.nodes[node] {
                Node::Leaf { start, end } => {
                    for &index in &self.order[start..end] {
                        let dist_sq = (self.points[index] - query).norm_squared();
                        if dist_sq <= radius_sq {
                            visit(Neighbor { index, dist_sq });
                        }
                    }
                }
                Node::Split { axis, value, left, right } => {
                    let diff = query[axis] - value;
                    if diff < 0.0 || diff * diff <= radius_sq {
                        stack.push(left);
                    }
                    if diff >= 0.0 || diff * diff <= radius_sq {
                        stack.push(right);
                    }
                }
            }
        }
    }
}
