//! Exact k-nearest-neighbor search over planar points.
//!
//! Results are ordered by `(squared distance, insertion index)`, so equal
//! distances resolve to the earlier sample in every query path.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::geo::PlanarPoint;

const LEAF_SIZE: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub distance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    dist_sq: f64,
    index: usize,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist_sq
            .total_cmp(&other.dist_sq)
            .then(self.index.cmp(&other.index))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: u8,
        value: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

/// Static 2-d tree built once over a sample set.
#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<PlanarPoint>,
    order: Vec<usize>,
    root: Node,
}

impl KdTree {
    pub fn new(points: &[PlanarPoint]) -> Self {
        let mut order: Vec<usize> = (0..points.len()).collect();
        let root = build(points, &mut order, 0, points.len());
        Self {
            points: points.to_vec(),
            order,
            root,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn nearest(&self, q: PlanarPoint, k: usize) -> Result<Vec<Neighbor>> {
        if k > self.points.len() {
            return Err(Error::KTooLarge {
                k,
                n: self.points.len(),
            });
        }
        if k == 0 {
            return Ok(Vec::new());
        }
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.search(&self.root, q, k, &mut heap);
        let mut out: Vec<Candidate> = heap.into_vec();
        out.sort();
        Ok(out
            .into_iter()
            .map(|c| Neighbor {
                index: c.index,
                distance: c.dist_sq.sqrt(),
            })
            .collect())
    }

    fn search(&self, node: &Node, q: PlanarPoint, k: usize, heap: &mut BinaryHeap<Candidate>) {
        match node {
            Node::Leaf { start, end } => {
                for &index in &self.order[*start..*end] {
                    let c = Candidate {
                        dist_sq: q.distance_sq(&self.points[index]),
                        index,
                    };
                    if heap.len() < k {
                        heap.push(c);
                    } else if c < *heap.peek().expect("heap is full") {
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
                let coord = if *axis == 0 { q.x } else { q.y };
                let diff = coord - value;
                let (near, far) = if diff <= 0.0 {
                    (left, right)
                } else {
                    (right, left)
                };
                self.search(near, q, k, heap);
                // Equal plane distance can still hide a tie with a smaller index.
                if heap.len() < k || diff * diff <= heap.peek().expect("nonempty").dist_sq {
                    self.search(far, q, k, heap);
                }
            }
        }
    }
}

fn build(points: &[PlanarPoint], order: &mut [usize], start: usize, end: usize) -> Node {
    if end - start <= LEAF_SIZE {
        return Node::Leaf { start, end };
    }
    let slice = &order[start..end];
    let (mut min_x, mut max_x, mut min_y, mut max_y) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &i in slice {
        min_x = min_x.min(points[i].x);
        max_x = max_x.max(points[i].x);
        min_y = min_y.min(points[i].y);
        max_y = max_y.max(points[i].y);
    }
    let axis = u8::from(max_y - min_y > max_x - min_x);
    let key = |i: usize| if axis == 0 { points[i].x } else { points[i].y };
    let mid = (end - start) / 2;
    order[start..end].select_nth_unstable_by(mid, |&a, &b| key(a).total_cmp(&key(b)));
    let value = key(order[start + mid]);
    // Everything left of `mid` is <= value and everything right is >= value.
    let left = build(points, order, start, start + mid);
    let right = build(points, order, start + mid, end);
    Node::Split {
        axis,
        value,
        left: Box::new(left),
        right: Box::new(right),
    }
}

/// Exact k nearest samples to `q` by linear scan.
pub fn brute_force(points: &[PlanarPoint], q: PlanarPoint, k: usize) -> Result<Vec<Neighbor>> {
    if k > points.len() {
        return Err(Error::KTooLarge { k, n: points.len() });
    }
    let mut all: Vec<Candidate> = points
        .iter()
        .enumerate()
        .map(|(index, p)| Candidate {
            dist_sq: q.distance_sq(p),
            index,
        })
        .collect();
    all.sort();
    Ok(all
        .into_iter()
        .take(k)
        .map(|c| Neighbor {
            index: c.index,
            distance: c.dist_sq.sqrt(),
        })
        .collect())
}
