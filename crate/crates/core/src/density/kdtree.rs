//! Exact k-nearest-neighbor index.
//!
//! Neighbors are ordered by `(squared distance, index)`, so results are
//! identical to a brute-force scan including ties and duplicate points.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::linalg::{dist2, Vec3};

const LEAF_SIZE: usize = 8;

#[derive(Debug, Clone, Copy)]
struct Cand {
    d2: f64,
    idx: usize,
}

impl PartialEq for Cand {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Cand {}
impl PartialOrd for Cand {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Cand {
    fn cmp(&self, o: &Self) -> Ordering {
        self.d2.total_cmp(&o.d2).then(self.idx.cmp(&o.idx))
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: f64, left: usize, right: usize },
}

#[derive(Debug, Clone)]
pub struct KdTree<'a> {
    points: &'a [Vec3],
    perm: Vec<usize>,
    nodes: Vec<Node>,
}

impl<'a> KdTree<'a> {
    pub fn new(points: &'a [Vec3]) -> Self {
        let mut tree = Self {
            points,
            perm: (0..points.len()).collect(),
            nodes: Vec::new(),
        };
        if !points.is_empty() {
            tree.build(0, points.len());
        }
        tree
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn build(&mut self, lo: usize, hi: usize) -> usize {
        let id = self.nodes.len();
        if hi - lo <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start: lo, end: hi });
            return id;
        }
        let pts = self.points;
        let mut min = [f64::INFINITY; 3];
        let mut max = [f64::NEG_INFINITY; 3];
        for &i in &self.perm[lo..hi] {
            for a in 0..3 {
                min[a] = min[a].min(pts[i][a]);
                max[a] = max[a].max(pts[i][a]);
            }
        }
        let axis = (0..3)
            .max_by(|&a, &b| (max[a] - min[a]).total_cmp(&(max[b] - min[b])).then(b.cmp(&a)))
            .unwrap();
        let mid = lo + (hi - lo) / 2;
        self.perm[lo..hi].select_nth_unstable_by(mid - lo, |&a, &b| {
            pts[a][axis].total_cmp(&pts[b][axis]).then(a.cmp(&b))
        });
        let value = pts[self.perm[mid]][axis];
        self.nodes.push(Node::Leaf { start: 0, end: 0 });
        let left = self.build(lo, mid);
        let right = self.build(mid, hi);
        self.nodes[id] = Node::Split {
            axis,
            value,
            left,
            right,
        };
        id
    }

    /// The `k` nearest points to `q` as `(squared distance, index)`, nearest
    /// first. `exclude` removes one index (a query point's own entry).
    pub fn knn(&self, q: &Vec3, k: usize, exclude: Option<usize>) -> Vec<(f64, usize)> {
        if k == 0 || self.nodes.is_empty() {
            return Vec::new();
        }
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.search(0, q, k, exclude, &mut heap);
        heap.into_sorted_vec().into_iter().map(|c| (c.d2, c.idx)).collect()
    }

    /// Nearest point to `q` as `(squared distance, index)`.
    pub fn nearest(&self, q: &Vec3) -> Option<(f64, usize)> {
        self.knn(q, 1, None).into_iter().next()
    }

    fn search(&self, node: usize, q: &Vec3, k: usize, exclude: Option<usize>, heap: &mut BinaryHeap<Cand>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.perm[start..end] {
                    if Some(i) == exclude {
                        continue;
                    }
                    let c = Cand {
                        d2: dist2(q, &self.points[i]),
                        idx: i,
                    };
                    if heap.len() < k {
                        heap.push(c);
                    } else if c < *heap.peek().unwrap() {
                        heap.pop();
                        heap.push(c);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, k, exclude, heap);
                let bound = diff * diff;
                if heap.len() < k || bound <= heap.peek().unwrap().d2 {
                    self.search(far, q, k, exclude, heap);
                }
            }
        }
    }
}

/// Reference O(n) scan with the same ordering as [`KdTree::knn`].
pub fn brute_force_knn(points: &[Vec3], q: &Vec3, k: usize, exclude: Option<usize>) -> Vec<(f64, usize)> {
    let mut all: Vec<(f64, usize)> = points
        .iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != exclude)
        .map(|(i, p)| (dist2(q, p), i))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    all.truncate(k);
    all
}
