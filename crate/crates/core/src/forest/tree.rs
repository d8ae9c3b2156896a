use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::forest::params::Mode;
use crate::scalar::{dot, Scalar};

/// Draws attempted before a node gives up on finding a split that leaves
/// both children non-empty.
const MAX_SPLIT_ATTEMPTS: usize = 64;

/// Oblique split `normal · x > normal · intercept` (points satisfying it go
/// left).
#[derive(Clone, Debug, PartialEq)]
pub struct Split<T> {
    pub(crate) normal: Vec<T>,
    pub(crate) intercept: Vec<T>,
    /// Cached `normal · intercept`.
    pub(crate) offset: T,
    pub(crate) left: usize,
    pub(crate) right: usize,
    pub(crate) n_left: usize,
    pub(crate) n_right: usize,
}

impl<T: Scalar> Split<T> {
    pub fn new(
        normal: Vec<T>,
        intercept: Vec<T>,
        left: usize,
        right: usize,
        n_left: usize,
        n_right: usize,
    ) -> Self {
        let offset = dot(&normal, &intercept);
        Split {
            normal,
            intercept,
            offset,
            left,
            right,
            n_left,
            n_right,
        }
    }

    pub fn normal(&self) -> &[T] {
        &self.normal
    }

    pub fn intercept(&self) -> &[T] {
        &self.intercept
    }

    /// Arena index of the child holding `normal · x > normal · intercept`.
    pub fn left(&self) -> usize {
        self.left
    }

    pub fn right(&self) -> usize {
        self.right
    }

    pub fn n_left(&self) -> usize {
        self.n_left
    }

    pub fn n_right(&self) -> usize {
        self.n_right
    }

    #[inline]
    pub fn goes_left(&self, x: &[T]) -> bool {
        dot(&self.normal, x) > self.offset
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Node<T> {
    pub(crate) depth: usize,
    /// Training rows that reached this node (`leaf_size` for leaves).
    pub(crate) n_node: usize,
    pub(crate) split: Option<Split<T>>,
}

impl<T: Scalar> Node<T> {
    pub fn leaf(depth: usize, leaf_size: usize) -> Self {
        Node {
            depth,
            n_node: leaf_size,
            split: None,
        }
    }

    pub fn internal(depth: usize, n_node: usize, split: Split<T>) -> Self {
        Node {
            depth,
            n_node,
            split: Some(split),
        }
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn n_node(&self) -> usize {
        self.n_node
    }

    pub fn split(&self) -> Option<&Split<T>> {
        self.split.as_ref()
    }

    pub fn is_leaf(&self) -> bool {
        self.split.is_none()
    }
}

/// One isolation tree stored as a node arena; the root is node 0.
#[derive(Clone, Debug, PartialEq)]
pub struct Tree<T> {
    pub(crate) nodes: Vec<Node<T>>,
    /// Training-set row indices this tree was grown from.
    pub(crate) subsample: Vec<usize>,
}

impl<T: Scalar> Tree<T> {
    /// Assembles a tree from an arena (root first), checking topology and
    /// split counts: children come after their parent, sit one level deeper,
    /// are referenced once, and carry the parent's `n_left` / `n_right`.
    pub fn from_nodes(nodes: Vec<Node<T>>, subsample: Vec<usize>, n_features: usize) -> Result<Self> {
        let bad = |msg: String| Err(Error::Corruption(msg));
        if nodes.is_empty() {
            return bad("tree has no nodes".into());
        }
        if nodes[0].depth != 0 {
            return bad("root depth is not 0".into());
        }
        let mut referenced = vec![false; nodes.len()];
        referenced[0] = true;
        for (i, node) in nodes.iter().enumerate() {
            let Some(s) = &node.split else { continue };
            if s.normal.len() != n_features || s.intercept.len() != n_features {
                return bad(format!("node {i}: hyperplane has wrong dimension"));
            }
            if s.n_left == 0 || s.n_right == 0 || s.n_left + s.n_right != node.n_node {
                return bad(format!("node {i}: inconsistent split counts"));
            }
            for (child, count) in [(s.left, s.n_left), (s.right, s.n_right)] {
                if child <= i || child >= nodes.len() || referenced[child] {
                    return bad(format!("node {i}: invalid child index {child}"));
                }
                referenced[child] = true;
                if nodes[child].n_node != count || nodes[child].depth != node.depth + 1 {
                    return bad(format!("node {i}: child {child} disagrees with split"));
                }
            }
        }
        if referenced.iter().any(|r| !r) {
            return bad("unreachable node in tree".into());
        }
        Ok(Tree { nodes, subsample })
    }

    pub fn nodes(&self) -> &[Node<T>] {
        &self.nodes
    }

    pub fn root(&self) -> &Node<T> {
        &self.nodes[0]
    }

    pub fn subsample(&self) -> &[usize] {
        &self.subsample
    }

    /// Leaf reached by `x`.
    #[inline]
    pub fn leaf(&self, x: &[T]) -> &Node<T> {
        let mut node = &self.nodes[0];
        while let Some(s) = &node.split {
            node = &self.nodes[if s.goes_left(x) { s.left } else { s.right }];
        }
        node
    }

    /// Nodes visited by `x` from the root to its leaf, inclusive.
    pub fn path<'a>(&'a self, x: &'a [T]) -> impl Iterator<Item = &'a Node<T>> + 'a {
        let mut next = Some(0usize);
        std::iter::from_fn(move || {
            let node = &self.nodes[next?];
            next = node
                .split
                .as_ref()
                .map(|s| if s.goes_left(x) { s.left } else { s.right });
            Some(node)
        })
    }

    pub(crate) fn grow(
        data: &Dataset<T>,
        subsample: Vec<usize>,
        mode: Mode,
        max_depth: usize,
        eta: f64,
        rng: &mut ChaCha8Rng,
    ) -> Tree<T> {
        let mut builder = Builder {
            data,
            mode,
            max_depth,
            eta,
            nodes: Vec::new(),
            proj: Vec::new(),
        };
        builder.grow(subsample.clone(), 0, rng);
        Tree {
            nodes: builder.nodes,
            subsample,
        }
    }
}

struct Builder<'a, T> {
    data: &'a Dataset<T>,
    mode: Mode,
    max_depth: usize,
    eta: f64,
    nodes: Vec<Node<T>>,
    proj: Vec<T>,
}

impl<T: Scalar> Builder<'_, T> {
    /// Grows the subtree for `rows` in pre-order and returns its arena index.
    fn grow(&mut self, rows: Vec<usize>, depth: usize, rng: &mut ChaCha8Rng) -> usize {
        let idx = self.nodes.len();
        self.nodes.push(Node {
            depth,
            n_node: rows.len(),
            split: None,
        });
        if depth >= self.max_depth || rows.len() <= 1 {
            return idx;
        }
        let Some((normal, intercept, left_rows, right_rows)) = self.choose_split(&rows, rng) else {
            return idx;
        };
        let (n_left, n_right) = (left_rows.len(), right_rows.len());
        let left = self.grow(left_rows, depth + 1, rng);
        let right = self.grow(right_rows, depth + 1, rng);
        self.nodes[idx].split = Some(Split::new(normal, intercept, left, right, n_left, n_right));
        idx
    }

    #[allow(clippy::type_complexity)]
    fn choose_split(
        &mut self,
        rows: &[usize],
        rng: &mut ChaCha8Rng,
    ) -> Option<(Vec<T>, Vec<T>, Vec<usize>, Vec<usize>)> {
        let p = self.data.n_features();
        let (lo, hi) = self.bounding_box(rows);
        let varying: Vec<usize> = (0..p).filter(|&j| lo[j] < hi[j]).collect();
        if varying.is_empty() {
            // all rows identical
            return None;
        }

        let normal = match self.mode {
            Mode::If => {
                let mut v = vec![T::zero(); p];
                v[varying[rng.random_range(0..varying.len())]] = T::one();
                v
            }
            Mode::Eif | Mode::EifPlus => self.oblique_normal(rows, rng)?,
        };

        self.proj.clear();
        for &r in rows {
            self.proj.push(dot(&normal, self.data.row(r)));
        }
        let pmin = self.proj.iter().copied().fold(T::infinity(), T::min);
        let pmax = self.proj.iter().copied().fold(T::neg_infinity(), T::max);
        if !(pmin < pmax) {
            return None;
        }

        for attempt in 0..=MAX_SPLIT_ATTEMPTS {
            let intercept = if attempt == MAX_SPLIT_ATTEMPTS {
                let t = rng.random_range(pmin.as_f64()..pmax.as_f64());
                self.point_on_plane(rows, &normal, t)
            } else {
                match self.mode {
                    Mode::If | Mode::Eif => lo
                        .iter()
                        .zip(&hi)
                        .map(|(&a, &b)| {
                            if a < b {
                                T::from_f64_lossy(rng.random_range(a.as_f64()..b.as_f64()))
                            } else {
                                a
                            }
                        })
                        .collect(),
                    Mode::EifPlus => {
                        let (mean, std) = mean_std(&self.proj);
                        let z: f64 = StandardNormal.sample(rng);
                        self.point_on_plane(rows, &normal, mean + self.eta * std * z)
                    }
                }
            };
            let offset = dot(&normal, &intercept);
            let n_left = self.proj.iter().filter(|&&v| v > offset).count();
            if n_left == 0 || n_left == rows.len() {
                continue;
            }
            let (left, right): (Vec<(usize, T)>, Vec<(usize, T)>) = rows
                .iter()
                .copied()
                .zip(self.proj.iter().copied())
                .partition(|&(_, v)| v > offset);
            let left = left.into_iter().map(|(r, _)| r).collect();
            let right = right.into_iter().map(|(r, _)| r).collect();
            return Some((normal, intercept, left, right));
        }
        None
    }

    /// Unit normal with i.i.d. Gaussian components, redrawn while the node
    /// has zero spread along it.
    fn oblique_normal(&self, rows: &[usize], rng: &mut ChaCha8Rng) -> Option<Vec<T>> {
        let p = self.data.n_features();
        for _ in 0..MAX_SPLIT_ATTEMPTS {
            let raw: Vec<f64> = (0..p).map(|_| StandardNormal.sample(rng)).collect();
            let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 {
                continue;
            }
            let v: Vec<T> = raw.iter().map(|&c| T::from_f64_lossy(c / norm)).collect();
            let first = dot(&v, self.data.row(rows[0]));
            if rows.iter().any(|&r| dot(&v, self.data.row(r)) != first) {
                return Some(v);
            }
        }
        None
    }

    /// Point `mean + (t - normal·mean) normal` of the node sample, which lies
    /// on the hyperplane at projected position `t`.
    fn point_on_plane(&self, rows: &[usize], normal: &[T], t: f64) -> Vec<T> {
        let p = self.data.n_features();
        let mut mean = vec![0.0f64; p];
        for &r in rows {
            for (m, &v) in mean.iter_mut().zip(self.data.row(r)) {
                *m += v.as_f64();
            }
        }
        let n = rows.len() as f64;
        mean.iter_mut().for_each(|m| *m /= n);
        let along: f64 = mean.iter().zip(normal).map(|(&m, &v)| m * v.as_f64()).sum();
        let shift = t - along;
        mean.iter()
            .zip(normal)
            .map(|(&m, &v)| T::from_f64_lossy(m + shift * v.as_f64()))
            .collect()
    }

    fn bounding_box(&self, rows: &[usize]) -> (Vec<T>, Vec<T>) {
        let p = self.data.n_features();
        let mut lo = vec![T::infinity(); p];
        let mut hi = vec![T::neg_infinity(); p];
        for &r in rows {
            for (j, &v) in self.data.row(r).iter().enumerate() {
                lo[j] = lo[j].min(v);
                hi[j] = hi[j].max(v);
            }
        }
        (lo, hi)
    }
}

fn mean_std<T: Scalar>(values: &[T]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().map(|v| v.as_f64()).sum::<f64>() / n;
    let var = values
        .iter()
        .map(|v| (v.as_f64() - mean).powi(2))
        .sum::<f64>()
        / n;
    (mean, var.sqrt())
}
