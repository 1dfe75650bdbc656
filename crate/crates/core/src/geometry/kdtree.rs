use super::{dist2, Point};
use crate::error::GeometryError;

const LEAF_SIZE: usize = 12;

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

/// Static kd-tree over a fixed point list.
///
/// Query results are identical to a brute-force scan ordered by
/// `(squared distance, index)`, so equidistant points come back lowest
/// index first. Immutable after construction and `Sync`.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    dim: usize,
    coords: Vec<f64>,
    order: Vec<usize>,
    nodes: Vec<KdNode>,
}

impl SpatialIndex {
    pub fn build(points: &[Point]) -> Result<Self, GeometryError> {
        let first = points.first().ok_or(GeometryError::EmptyIndex)?;
        let dim = first.dim();
        let mut coords = Vec::with_capacity(points.len() * dim);
        for p in points {
            if p.dim() != dim {
                return Err(GeometryError::DimensionMismatch {
                    expected: dim,
                    got: p.dim(),
                });
            }
            coords.extend_from_slice(p.coords());
        }
        let mut index = SpatialIndex {
            dim,
            coords,
            order: (0..points.len()).collect(),
            nodes: Vec::new(),
        };
        index.build_node(0, points.len());
        Ok(index)
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

    fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    fn build_node(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(KdNode::Leaf { start, end });
            return id;
        }
        // Split along the widest extent at the median.
        let axis = (0..self.dim)
            .map(|a| {
                let (lo, hi) = self.order[start..end].iter().fold(
                    (f64::INFINITY, f64::NEG_INFINITY),
                    |(lo, hi), &i| {
                        let x = self.coords[i * self.dim + a];
                        (lo.min(x), hi.max(x))
                    },
                );
                (a, hi - lo)
            })
            .fold((0, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best })
            .0;
        let mid = start + (end - start) / 2;
        let (dim, coords) = (self.dim, &self.coords);
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            coords[a * dim + axis].total_cmp(&coords[b * dim + axis])
        });
        let value = self.coords[self.order[mid] * self.dim + axis];
        self.nodes.push(KdNode::Leaf { start, end });
        let left = self.build_node(start, mid);
        let right = self.build_node(mid, end);
        self.nodes[id] = KdNode::Split {
            axis,
            value,
            left,
            right,
        };
        id
    }

    /// The `k` nearest indexed points to `query`, sorted by nondecreasing
    /// distance with ties broken by lower index.
    pub fn knn(&self, query: &Point, k: usize) -> Result<Vec<usize>, GeometryError> {
        if query.dim() != self.dim {
            return Err(GeometryError::DimensionMismatch {
                expected: self.dim,
                got: query.dim(),
            });
        }
        if k == 0 || k > self.len() {
            return Err(GeometryError::KOutOfRange { k, len: self.len() });
        }
        let mut best = Vec::with_capacity(k + 1);
        self.search(0, query.coords(), k, &mut best);
        Ok(best.into_iter().map(|(_, i)| i).collect())
    }

    fn search(&self, node: usize, q: &[f64], k: usize, best: &mut Vec<(f64, usize)>) {
        match self.nodes[node] {
            KdNode::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let d2 = dist2(self.point(i), q);
                    push_bounded(best, k, (d2, i));
                }
            }
            KdNode::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, k, best);
                // `<=` keeps equidistant candidates reachable for the tie-break.
                if best.len() < k || diff * diff <= best[best.len() - 1].0 {
                    self.search(far, q, k, best);
                }
            }
        }
    }
}

fn push_bounded(best: &mut Vec<(f64, usize)>, k: usize, cand: (f64, usize)) {
    let less = |a: &(f64, usize), b: &(f64, usize)| a.0 < b.0 || (a.0 == b.0 && a.1 < b.1);
    if best.len() == k && !less(&cand, &best[k - 1]) {
        return;
    }
    let pos = best.partition_point(|e| less(e, &cand));
    best.insert(pos, cand);
    best.truncate(k);
}
