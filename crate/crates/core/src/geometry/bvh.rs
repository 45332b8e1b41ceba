//! Bounding volume hierarchy for closest-primitive queries.
//!
//! The tree only knows primitive bounding boxes; the exact point-to-primitive
//! distance is supplied by the caller at query time. Pruning is by squared
//! box distance, so the result equals a brute-force minimum over all
//! primitives evaluated with the same callback.

use crate::vector::{Aabb, Vector};

const LEAF_SIZE: usize = 4;

#[derive(Debug, Clone)]
struct Node<const D: usize> {
    bounds: Aabb<D>,
    /// Leaf: range into `order`. Interior: `start` is the right child index
    /// (left child is always `self + 1`) and `count == 0`.
    start: u32,
    count: u32,
}

#[derive(Debug, Clone)]
pub struct Bvh<const D: usize> {
    nodes: Vec<Node<D>>,
    order: Vec<u32>,
}

/// Closest primitive found by [`Bvh::closest`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Closest<const D: usize> {
    pub primitive: usize,
    pub point: Vector<D>,
    pub dist2: f64,
}

impl<const D: usize> Bvh<D> {
    pub fn build(boxes: &[Aabb<D>]) -> Self {
        let mut order: Vec<u32> = (0..boxes.len() as u32).collect();
        let centers: Vec<Vector<D>> = boxes.iter().map(|b| b.center()).collect();
        let mut nodes = Vec::with_capacity(2 * boxes.len() / LEAF_SIZE + 1);
        if !boxes.is_empty() {
            build_rec(boxes, &centers, &mut order, 0, boxes.len(), &mut nodes);
        }
        Self { nodes, order }
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Closest primitive to `p`. `primitive_closest(i)` must return the closest
    /// point on primitive `i` and its squared distance to `p`.
    pub fn closest<F>(&self, p: &Vector<D>, mut primitive_closest: F) -> Option<Closest<D>>
    where
        F: FnMut(usize) -> (Vector<D>, f64),
    {
        if self.nodes.is_empty() {
            return None;
        }
        let mut best: Option<Closest<D>> = None;
        let mut best_d2 = f64::INFINITY;
        let mut stack: Vec<(u32, f64)> = Vec::with_capacity(64);
        stack.push((0, self.nodes[0].bounds.dist2(p)));
        while let Some((idx, box_d2)) = stack.pop() {
            if box_d2 > best_d2 {
                continue;
            }
            let node = &self.nodes[idx as usize];
            if node.count > 0 {
                let s = node.start as usize;
                for &prim in &self.order[s..s + node.count as usize] {
                    let (q, d2) = primitive_closest(prim as usize);
                    if d2 < best_d2
                        || (d2 == best_d2 && best.is_some_and(|b| (prim as usize) < b.primitive))
                    {
                        best_d2 = d2;
                        best = Some(Closest {
                            primitive: prim as usize,
                            point: q,
                            dist2: d2,
                        });
                    }
                }
            } else {
                let left = idx + 1;
                let right = node.start;
                let dl = self.nodes[left as usize].bounds.dist2(p);
                let dr = self.nodes[right as usize].bounds.dist2(p);
                // Push the farther child first so the nearer one is popped next.
                if dl <= dr {
                    stack.push((right, dr));
                    stack.push((left, dl));
                } else {
                    stack.push((left, dl));
                    stack.push((right, dr));
                }
            }
        }
        best
    }
}

fn build_rec<const D: usize>(
    boxes: &[Aabb<D>],
    centers: &[Vector<D>],
    order: &mut [u32],
    start: usize,
    end: usize,
    nodes: &mut Vec<Node<D>>,
) -> u32 {
    let idx = nodes.len();
    let bounds = order[start..end]
        .iter()
        .fold(Aabb::empty(), |b, &i| b.union(&boxes[i as usize]));
    nodes.push(Node {
        bounds,
        start: start as u32,
        count: (end - start) as u32,
    });
    if end - start <= LEAF_SIZE {
        return idx as u32;
    }
    let cbox = Aabb::from_points(order[start..end].iter().map(|&i| &centers[i as usize]));
    let axis = cbox.largest_axis();
    let mid = (end - start) / 2;
    order[start..end].select_nth_unstable_by(mid, |&a, &b| {
        centers[a as usize][axis].total_cmp(&centers[b as usize][axis])
    });
    build_rec(boxes, centers, order, start, start + mid, nodes);
    let right = build_rec(boxes, centers, order, start + mid, end, nodes);
    nodes[idx].start = right;
    nodes[idx].count = 0;
    idx as u32
}
