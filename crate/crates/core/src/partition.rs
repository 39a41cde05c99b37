//! Binary space-partitioning trees over points in R^d with two split rules
//! (axis-aligned largest-spread and random-projection, both median-split),
//! exact k-NN via branch-and-bound backtracking, and a two-hyperplane
//! convex-difference classifier that handles XOR-style labelings.

use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::numerics::{dot, l2_norm, normalized, DenseMatrix, SeededRng};

/// Oriented hyperplane `{x : normal·x = offset}` with unit-norm normal.
/// The "positive side" is `normal·x > offset`; routing sends
/// `normal·x ≤ offset` to the left child.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperplane {
    normal: Vec<f64>,
    offset: f64,
}

impl Hyperplane {
    pub fn new(normal: Vec<f64>, offset: f64) -> Result<Self> {
        if normal.iter().any(|v| !v.is_finite()) || !offset.is_finite() {
            return Err(Error::NonFinite("Hyperplane::new"));
        }
        let n = l2_norm(&normal);
        if (n - 1.0).abs() > 1e-12 {
            return Err(Error::param(format!(
                "Hyperplane normal must be unit length, got ‖n‖ = {n}"
            )));
        }
        Ok(Hyperplane { normal, offset })
    }

    /// Builds from an arbitrary nonzero direction, normalizing it (the offset
    /// is interpreted against the normalized direction and is not rescaled).
    pub fn from_direction(direction: Vec<f64>, offset: f64) -> Result<Self> {
        let normal = normalized(&direction)
            .ok_or_else(|| Error::param("Hyperplane direction must be nonzero"))?;
        Hyperplane::new(normal, offset)
    }

    pub fn normal(&self) -> &[f64] {
        &self.normal
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// Signed distance proxy `normal·x − offset` (exact signed distance since
    /// the normal is unit length).
    pub fn side(&self, x: &[f64]) -> f64 {
        dot(&self.normal, x) - self.offset
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitRule {
    /// Split on the coordinate of largest spread (ties to the smaller index).
    AxisAligned,
    /// Split along a seeded random unit direction.
    RandomProjection,
}

/// Distance used for exact search. `Lp` is the power-sum form Σ|a_i−b_i|^p,
/// which ranks identically to the (quasi-)norm and avoids the final root.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Metric {
    L2,
    Lp(f64),
}

impl Metric {
    pub fn validate(&self) -> Result<()> {
        match self {
            Metric::L2 => Ok(()),
            Metric::Lp(p) if p.is_finite() && *p > 0.0 => Ok(()),
            Metric::Lp(p) => Err(Error::param(format!("Lp metric needs p > 0, got {p}"))),
        }
    }

    /// Comparison key: squared distance for L2, power sum for Lp.
    pub fn key(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Metric::L2 => a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum(),
            Metric::Lp(p) => a.iter().zip(b).map(|(x, y)| (x - y).abs().powf(*p)).sum(),
        }
    }

    /// Lower bound on the key for any point at Euclidean distance ≥ `h` from
    /// the query (the far side of a split at gap `h`). For axis-aligned
    /// splits the gap is along one coordinate, so |Δ_c| ≥ h gives |h|^p
    /// directly; for oblique normals and p > 2 the ℓ2→ℓp norm comparison
    /// costs a dimension factor.
    fn far_bound(&self, h: f64, dim: usize, axis_aligned: bool) -> f64 {
        let h = h.abs();
        match self {
            Metric::L2 => h * h,
            Metric::Lp(p) => {
                if axis_aligned || *p <= 2.0 {
                    h.powf(*p)
                } else {
                    h.powf(*p) / (dim as f64).powf(p / 2.0 - 1.0)
                }
            }
        }
    }
}

/// Arena node. Children always carry larger arena indices than their parent,
/// which rules out cycles and makes single-pass validation possible.
#[derive(Debug, Clone, PartialEq)]
pub enum PartitionNode {
    Internal {
        split: Hyperplane,
        left: usize,
        right: usize,
    },
    Leaf {
        point_ids: Vec<u32>,
    },
}

/// Binary space-partitioning tree. Owns its points (one row per id); leaves
/// hold sorted id lists and together partition the full id set.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionTree {
    dim: usize,
    rule: SplitRule,
    leaf_capacity: usize,
    seed: u64,
    points: DenseMatrix,
    nodes: Vec<PartitionNode>,
    root: usize,
    /// Number of split directions drawn so far; persisted so that splits
    /// triggered by later insertions keep drawing fresh deterministic
    /// directions.
    split_counter: u64,
}

impl PartitionTree {
    pub fn build(
        points: DenseMatrix,
        rule: SplitRule,
        leaf_capacity: usize,
        seed: u64,
    ) -> Result<Self> {
        if leaf_capacity == 0 {
            return Err(Error::param("leaf_capacity must be at least 1"));
        }
        if points.rows() == 0 {
            return Err(Error::EmptyInput("PartitionTree::build"));
        }
        let dim = points.cols();
        let mut tree = PartitionTree {
            dim,
            rule,
            leaf_capacity,
            seed,
            points,
            nodes: Vec::new(),
            root: 0,
            split_counter: 0,
        };
        let all_ids: Vec<u32> = (0..tree.points.rows() as u32).collect();
        tree.root = tree.build_node(all_ids);
        Ok(tree)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rule(&self) -> SplitRule {
        self.rule
    }

    pub fn leaf_capacity(&self) -> usize {
        self.leaf_capacity
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn num_points(&self) -> usize {
        self.points.rows()
    }

    pub fn point(&self, id: u32) -> &[f64] {
        self.points.row(id as usize)
    }

    pub fn nodes(&self) -> &[PartitionNode] {
        &self.nodes
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub(crate) fn split_counter(&self) -> u64 {
        self.split_counter
    }

    /// Rebuilds a tree from its serialized parts, re-validating every
    /// structural invariant (used by the index-file loader, which must not
    /// trust its input).
    pub(crate) fn from_parts(
        dim: usize,
        rule: SplitRule,
        leaf_capacity: usize,
        seed: u64,
        split_counter: u64,
        points: DenseMatrix,
        nodes: Vec<PartitionNode>,
        root: usize,
    ) -> Result<Self> {
        if points.cols() != dim {
            return Err(Error::dim("PartitionTree::from_parts", dim, points.cols()));
        }
        if leaf_capacity == 0 {
            return Err(Error::format("leaf_capacity must be at least 1"));
        }
        let tree = PartitionTree {
            dim,
            rule,
            leaf_capacity,
            seed,
            points,
            nodes,
            root,
            split_counter,
        };
        tree.validate()?;
        Ok(tree)
    }

    /// Full structural audit: arena indices in range and forward-pointing,
    /// every node reachable exactly once, leaves partition the id set, and
    /// hyperplane dims match.
    pub fn validate(&self) -> Result<()> {
        let n_nodes = self.nodes.len();
        if self.root >= n_nodes {
            return Err(Error::format("tree root out of range"));
        }
        let mut visited = vec![false; n_nodes];
        let mut seen_ids = vec![false; self.points.rows()];
        let mut stack = vec![self.root];
        let mut visit_count = 0usize;
        while let Some(idx) = stack.pop() {
            if visited[idx] {
                return Err(Error::format("tree node visited twice"));
            }
            visited[idx] = true;
            visit_count += 1;
            match &self.nodes[idx] {
                PartitionNode::Internal { split, left, right } => {
                    if split.normal.len() != self.dim {
                        return Err(Error::format("hyperplane dim mismatch"));
                    }
                    for &child in [left, right] {
                        if child <= idx || child >= n_nodes {
                            return Err(Error::format("tree child index invalid"));
                        }
                        stack.push(child);
                    }
                }
                PartitionNode::Leaf { point_ids } => {
                    for &id in point_ids {
                        let Some(slot) = seen_ids.get_mut(id as usize) else {
                            return Err(Error::format("leaf references unknown point id"));
                        };
                        if *slot {
                            return Err(Error::format("point id appears in two leaves"));
                        }
                        *slot = true;
                    }
                }
            }
        }
        if visit_count != n_nodes {
            return Err(Error::format("tree has orphan nodes"));
        }
        if seen_ids.iter().any(|&s| !s) {
            return Err(Error::format("leaves do not cover all point ids"));
        }
        Ok(())
    }

    fn push_leaf(&mut self, mut ids: Vec<u32>) -> usize {
        ids.sort_unstable();
        self.nodes.push(PartitionNode::Leaf { point_ids: ids });
        self.nodes.len() - 1
    }

    fn build_node(&mut self, ids: Vec<u32>) -> usize {
        if ids.len() <= self.leaf_capacity {
            return self.push_leaf(ids);
        }
        let Some((split, left_ids, right_ids)) = self.choose_split(&ids) else {
            // All projections equal (duplicate-heavy data): keep an
            // oversized leaf so the build always terminates.
            return self.push_leaf(ids);
        };
        let idx = self.nodes.len();
        self.nodes.push(PartitionNode::Leaf {
            point_ids: Vec::new(),
        });
        let left = self.build_node(left_ids);
        let right = self.build_node(right_ids);
        self.nodes[idx] = PartitionNode::Internal { split, left, right };
        idx
    }

    /// Picks a split direction per the rule and partitions `ids` at the
    /// median projection. Returns `None` when the projections carry no
    /// spread. Both returned sides are nonempty.
    fn choose_split(&mut self, ids: &[u32]) -> Option<(Hyperplane, Vec<u32>, Vec<u32>)> {
        let raw_direction: Vec<f64> = match self.rule {
            SplitRule::AxisAligned => {
                let mut best_coord = 0;
                let mut best_spread = -1.0;
                for c in 0..self.dim {
                    let mut lo = f64::INFINITY;
                    let mut hi = f64::NEG_INFINITY;
                    for &id in ids {
                        let v = self.points.get(id as usize, c);
                        lo = lo.min(v);
                        hi = hi.max(v);
                    }
                    if hi - lo > best_spread {
                        best_spread = hi - lo;
                        best_coord = c;
                    }
                }
                let mut e = vec![0.0; self.dim];
                e[best_coord] = 1.0;
                e
            }
            SplitRule::RandomProjection => {
                let mut rng = SeededRng::new(self.seed).derive(self.split_counter);
                self.split_counter += 1;
                rng.unit_vector(self.dim)
            }
        };
        // Projections must use the exact unit normal that later routes
        // queries, or points sitting on the median could route to the wrong
        // side after renormalization rounding.
        let direction = normalized(&raw_direction)?;
        let projections: Vec<f64> = ids
            .iter()
            .map(|&id| dot(self.points.row(id as usize), &direction))
            .collect();
        let lo = projections.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = projections.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if hi - lo < 1e-12 {
            return None;
        }
        let mut sorted = projections.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mid = sorted.len() / 2;
        let mut threshold = if sorted.len() % 2 == 1 {
            sorted[mid]
        } else {
            0.5 * (sorted[mid - 1] + sorted[mid])
        };
        if threshold >= hi {
            // Median collides with the maximum (duplicates at the top);
            // fall back to the largest strictly smaller value so that both
            // sides stay nonempty.
            threshold = sorted.iter().copied().filter(|&p| p < hi).fold(lo, f64::max);
        }
        let mut left = Vec::new();
        let mut right = Vec::new();
        for (&id, &p) in ids.iter().zip(&projections) {
            if p <= threshold {
                left.push(id);
            } else {
                right.push(id);
            }
        }
        let split = Hyperplane {
            normal: direction,
            offset: threshold,
        };
        Some((split, left, right))
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::dim("PartitionTree query", self.dim, x.len()));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("PartitionTree query"));
        }
        Ok(())
    }

    fn locate_leaf(&self, x: &[f64]) -> usize {
        let mut idx = self.root;
        loop {
            match &self.nodes[idx] {
                PartitionNode::Internal { split, left, right } => {
                    idx = if split.side(x) <= 0.0 { *left } else { *right };
                }
                PartitionNode::Leaf { .. } => return idx,
            }
        }
    }

    /// Routes `x` to its leaf; returns the leaf's arena id and members.
    pub fn query_leaf(&self, x: &[f64]) -> Result<(usize, &[u32])> {
        self.check_dim(x)?;
        let idx = self.locate_leaf(x);
        match &self.nodes[idx] {
            PartitionNode::Leaf { point_ids } => Ok((idx, point_ids)),
            PartitionNode::Internal { .. } => unreachable!("locate_leaf returns a leaf"),
        }
    }

    /// Node ids on the routing path from the root down to (and including)
    /// the leaf.
    pub fn query_path(&self, x: &[f64]) -> Result<Vec<usize>> {
        self.check_dim(x)?;
        let mut path = Vec::new();
        let mut idx = self.root;
        loop {
            path.push(idx);
            match &self.nodes[idx] {
                PartitionNode::Internal { split, left, right } => {
                    idx = if split.side(x) <= 0.0 { *left } else { *right };
                }
                PartitionNode::Leaf { .. } => return Ok(path),
            }
        }
    }

    /// All point ids under `node`, sorted ascending.
    pub fn subtree_members(&self, node: usize) -> Vec<u32> {
        let mut out = Vec::new();
        let mut stack = vec![node];
        while let Some(idx) = stack.pop() {
            match &self.nodes[idx] {
                PartitionNode::Internal { left, right, .. } => {
                    stack.push(*left);
                    stack.push(*right);
                }
                PartitionNode::Leaf { point_ids } => out.extend_from_slice(point_ids),
            }
        }
        out.sort_unstable();
        out
    }

    pub fn leaves(&self) -> impl Iterator<Item = (usize, &[u32])> {
        self.nodes.iter().enumerate().filter_map(|(i, n)| match n {
            PartitionNode::Leaf { point_ids } => Some((i, point_ids.as_slice())),
            PartitionNode::Internal { .. } => None,
        })
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[PartitionNode], idx: usize) -> usize {
            match &nodes[idx] {
                PartitionNode::Leaf { .. } => 1,
                PartitionNode::Internal { left, right, .. } => {
                    1 + walk(nodes, *left).max(walk(nodes, *right))
                }
            }
        }
        walk(&self.nodes, self.root)
    }

    /// Exact k-nearest-neighbor search with branch-and-bound backtracking.
    /// Matches a brute-force scan under the tie rule "smaller id wins".
    pub fn nn_exact(&self, q: &[f64], k: usize, metric: Metric) -> Result<Vec<u32>> {
        self.check_dim(q)?;
        metric.validate()?;
        if k == 0 {
            return Err(Error::param("nn_exact: k must be at least 1"));
        }
        if k > self.points.rows() {
            return Err(Error::param(format!(
                "nn_exact: k = {k} exceeds database size {}",
                self.points.rows()
            )));
        }
        let axis_aligned = self.rule == SplitRule::AxisAligned;
        let mut heap: BinaryHeap<HeapEntry> = BinaryHeap::with_capacity(k + 1);
        self.search(self.root, q, k, metric, axis_aligned, &mut heap);
        let mut out: Vec<HeapEntry> = heap.into_vec();
        out.sort();
        Ok(out.into_iter().map(|e| e.id).collect())
    }

    fn search(
        &self,
        idx: usize,
        q: &[f64],
        k: usize,
        metric: Metric,
        axis_aligned: bool,
        heap: &mut BinaryHeap<HeapEntry>,
    ) {
        match &self.nodes[idx] {
            PartitionNode::Leaf { point_ids } => {
                for &id in point_ids {
                    let key = metric.key(q, self.points.row(id as usize));
                    let entry = HeapEntry { key, id };
                    if heap.len() < k {
                        heap.push(entry);
                    } else if entry < *heap.peek().expect("heap nonempty") {
                        heap.pop();
                        heap.push(entry);
                    }
                }
            }
            PartitionNode::Internal { split, left, right } => {
                let h = split.side(q);
                let (near, far) = if h <= 0.0 {
                    (*left, *right)
                } else {
                    (*right, *left)
                };
                self.search(near, q, k, metric, axis_aligned, heap);
                let must_descend = heap.len() < k || {
                    let bound = metric.far_bound(h, self.dim, axis_aligned);
                    // Non-strict: an equal-key point with a smaller id on the
                    // far side must still be found for the tie rule to hold.
                    bound <= heap.peek().expect("heap nonempty").key
                };
                if must_descend {
                    self.search(far, q, k, metric, axis_aligned, heap);
                }
            }
        }
    }

    /// Appends a point, routes it to its leaf, and splits the leaf when it
    /// overflows its capacity (same median rule as the build). Returns the
    /// new point's id.
    pub fn insert(&mut self, point: &[f64]) -> Result<u32> {
        self.check_dim(point)?;
        let id = self.points.rows() as u32;
        self.points.push_row(point)?;
        let leaf_idx = self.locate_leaf(point);
        let overflow = match &mut self.nodes[leaf_idx] {
            PartitionNode::Leaf { point_ids } => {
                let pos = point_ids.partition_point(|&existing| existing < id);
                point_ids.insert(pos, id);
                point_ids.len() > self.leaf_capacity
            }
            PartitionNode::Internal { .. } => unreachable!("locate_leaf returns a leaf"),
        };
        if overflow {
            self.split_leaf(leaf_idx);
        }
        Ok(id)
    }

    fn split_leaf(&mut self, leaf_idx: usize) {
        let ids = match &self.nodes[leaf_idx] {
            PartitionNode::Leaf { point_ids } => point_ids.clone(),
            PartitionNode::Internal { .. } => return,
        };
        let Some((split, left_ids, right_ids)) = self.choose_split(&ids) else {
            return; // duplicates: the oversized leaf stays
        };
        let left = self.push_leaf(left_ids);
        let right = self.push_leaf(right_ids);
        self.nodes[leaf_idx] = PartitionNode::Internal { split, left, right };
    }
}

/// Max-heap entry ordered by (key, id): the heap top is the current worst
/// candidate, and equal keys favor the smaller id.
#[derive(Debug, Clone, Copy, PartialEq)]
struct HeapEntry {
    key: f64,
    id: u32,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.key
            .partial_cmp(&other.key)
            .expect("distance keys are finite")
            .then(self.id.cmp(&other.id))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Two-hyperplane classifier: `predict(x) = outer-positive AND NOT
/// inner-positive`, i.e. the difference of two half-space-separable sets.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexDiffClassifier {
    dim: usize,
    outer: Hyperplane,
    inner: Hyperplane,
}

impl ConvexDiffClassifier {
    pub fn outer(&self) -> &Hyperplane {
        &self.outer
    }

    pub fn inner(&self) -> &Hyperplane {
        &self.inner
    }

    /// Boundary points (side exactly 0) count as the negative side of each
    /// hyperplane, so the decision at ties is deterministic.
    pub fn predict(&self, x: &[f64]) -> Result<bool> {
        if x.len() != self.dim {
            return Err(Error::dim("ConvexDiffClassifier::predict", self.dim, x.len()));
        }
        Ok(self.outer.side(x) > 0.0 && self.inner.side(x) <= 0.0)
    }
}

pub fn convex_diff_predict(classifier: &ConvexDiffClassifier, x: &[f64]) -> Result<bool> {
    classifier.predict(x)
}

const PERCEPTRON_MAX_EPOCHS: usize = 10_000;

/// Margin perceptron (learning rate 1, functional margin target 1). Returns
/// a normalized separating hyperplane with every positive strictly on the
/// positive side, or `None` when no update-free epoch is reached.
fn train_margin_perceptron(
    points: &DenseMatrix,
    labels: &[bool],
    max_epochs: usize,
) -> Option<Hyperplane> {
    let d = points.cols();
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    for _ in 0..max_epochs {
        let mut updated = false;
        for (row, &label) in points.iter_rows().zip(labels) {
            let y = if label { 1.0 } else { -1.0 };
            if y * (dot(&w, row) + b) <= 1.0 {
                for (wi, &xi) in w.iter_mut().zip(row) {
                    *wi += y * xi;
                }
                b += y;
                updated = true;
            }
        }
        if !updated {
            // side(x) = (w·x + b)/‖w‖, so positives sit strictly positive.
            let norm = l2_norm(&w);
            if norm < 1e-12 {
                return None;
            }
            return Hyperplane::from_direction(w, -b / norm).ok();
        }
    }
    None
}

/// A plane that puts every training point on one fixed side: positive side
/// for `accept`, negative otherwise. Calibrated one unit beyond the training
/// projections along the first coordinate.
fn calibrated_constant_plane(points: &DenseMatrix, accept: bool) -> Hyperplane {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for row in points.iter_rows() {
        lo = lo.min(row[0]);
        hi = hi.max(row[0]);
    }
    let mut normal = vec![0.0; points.cols()];
    normal[0] = 1.0;
    let offset = if accept { lo - 1.0 } else { hi + 1.0 };
    Hyperplane { normal, offset }
}

fn training_accuracy(
    classifier: &ConvexDiffClassifier,
    points: &DenseMatrix,
    labels: &[bool],
) -> Result<bool> {
    for (row, &label) in points.iter_rows().zip(labels) {
        if classifier.predict(row)? != label {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Fits a convex-difference classifier to a binary labeling.
///
/// First tries a single separating hyperplane (then the inner plane is a
/// degenerate reject-all). If that fails, booleanizes each coordinate at its
/// midrange and trains the outer plane on the per-point OR of the bits and
/// the inner plane on the AND, so XOR-style labelings resolve as
/// "union minus intersection". Errors with `NotSeparable` when neither form
/// reproduces the labels exactly.
pub fn xor_decompose(points: &DenseMatrix, labels: &[bool]) -> Result<ConvexDiffClassifier> {
    if points.rows() != labels.len() {
        return Err(Error::dim("xor_decompose labels", points.rows(), labels.len()));
    }
    let dim = points.cols();
    let n_pos = labels.iter().filter(|&&l| l).count();
    if n_pos == 0 {
        return Ok(ConvexDiffClassifier {
            dim,
            outer: calibrated_constant_plane(points, false),
            inner: calibrated_constant_plane(points, false),
        });
    }
    if n_pos == labels.len() {
        return Ok(ConvexDiffClassifier {
            dim,
            outer: calibrated_constant_plane(points, true),
            inner: calibrated_constant_plane(points, false),
        });
    }

    if let Some(outer) = train_margin_perceptron(points, labels, PERCEPTRON_MAX_EPOCHS) {
        let classifier = ConvexDiffClassifier {
            dim,
            outer,
            inner: calibrated_constant_plane(points, false),
        };
        if training_accuracy(&classifier, points, labels)? {
            return Ok(classifier);
        }
    }

    // Midrange booleanization: bit c of x is set iff x_c is in the upper
    // half of that coordinate's training range.
    let mut mid = vec![0.0; dim];
    for c in 0..dim {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for row in points.iter_rows() {
            lo = lo.min(row[c]);
            hi = hi.max(row[c]);
        }
        mid[c] = 0.5 * (lo + hi);
    }
    let bits: Vec<Vec<bool>> = points
        .iter_rows()
        .map(|row| row.iter().zip(&mid).map(|(x, m)| x > m).collect())
        .collect();
    let or_labels: Vec<bool> = bits.iter().map(|b| b.iter().any(|&x| x)).collect();
    let and_labels: Vec<bool> = bits.iter().map(|b| b.iter().all(|&x| x)).collect();

    let outer = if or_labels.iter().all(|&l| l) {
        calibrated_constant_plane(points, true)
    } else {
        train_margin_perceptron(points, &or_labels, PERCEPTRON_MAX_EPOCHS)
            .ok_or(Error::NotSeparable)?
    };
    let inner = if and_labels.iter().any(|&l| l) {
        train_margin_perceptron(points, &and_labels, PERCEPTRON_MAX_EPOCHS)
            .ok_or(Error::NotSeparable)?
    } else {
        calibrated_constant_plane(points, false)
    };
    let classifier = ConvexDiffClassifier { dim, outer, inner };
    if training_accuracy(&classifier, points, labels)? {
        Ok(classifier)
    } else {
        Err(Error::NotSeparable)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xor_points() -> DenseMatrix {
        DenseMatrix::from_rows(vec![
            vec![0.0, 0.0],
            vec![0.0, 1.0],
            vec![1.0, 0.0],
            vec![1.0, 1.0],
        ])
        .unwrap()
    }

    fn gaussian_points(n: usize, d: usize, seed: u64) -> DenseMatrix {
        let mut rng = SeededRng::new(seed);
        DenseMatrix::from_vec(n, d, rng.normal_vec(n * d)).unwrap()
    }

    /// Independent exhaustive-scan oracle with the same (key, id) tie rule.
    fn brute_knn(points: &DenseMatrix, q: &[f64], k: usize, metric: Metric) -> Vec<u32> {
        let mut scored: Vec<(f64, u32)> = points
            .iter_rows()
            .enumerate()
            .map(|(i, row)| {
                let key = match metric {
                    Metric::L2 => row.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum(),
                    Metric::Lp(p) => row.iter().zip(q).map(|(a, b)| (a - b).abs().powf(p)).sum(),
                };
                (key, i as u32)
            })
            .collect();
        scored.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        scored.into_iter().take(k).map(|(_, i)| i).collect()
    }

    fn audit_partition(tree: &PartitionTree) {
        let mut seen = vec![false; tree.num_points()];
        for (_, members) in tree.leaves() {
            for &id in members {
                assert!(!seen[id as usize], "id {id} in two leaves");
                seen[id as usize] = true;
            }
        }
        assert!(seen.iter().all(|&s| s), "some id missing from all leaves");
        tree.validate().unwrap();
    }

    #[test]
    fn single_point_builds_single_leaf() {
        let pts = DenseMatrix::from_rows(vec![vec![1.0, 2.0]]).unwrap();
        let tree = PartitionTree::build(pts, SplitRule::AxisAligned, 4, 0).unwrap();
        assert_eq!(tree.nodes().len(), 1);
        assert_eq!(tree.depth(), 1);
        let (_, members) = tree.query_leaf(&[100.0, -5.0]).unwrap();
        assert_eq!(members, &[0]);
    }

    #[test]
    fn xor_build_has_four_singleton_leaves_at_depth_two() {
        // Hand-run of the median rule: both coordinates tie on spread 1, so
        // coordinate 0 splits first at (0+1)/2 = 0.5, then each side splits
        // coordinate 1 at 0.5, leaving four singleton leaves.
        let tree = PartitionTree::build(xor_points(), SplitRule::AxisAligned, 1, 0).unwrap();
        assert_eq!(tree.depth(), 3); // root + internal + leaf level
        let leaves: Vec<_> = tree.leaves().collect();
        assert_eq!(leaves.len(), 4);
        for (_, members) in &leaves {
            assert_eq!(members.len(), 1);
        }
        match &tree.nodes()[tree.root()] {
            PartitionNode::Internal { split, .. } => {
                assert_eq!(split.normal(), &[1.0, 0.0]);
                assert!((split.offset() - 0.5).abs() < 1e-12);
            }
            PartitionNode::Leaf { .. } => panic!("root must be internal"),
        }
        audit_partition(&tree);
    }

    #[test]
    fn xor_query_routes_to_expected_leaf() {
        let tree = PartitionTree::build(xor_points(), SplitRule::AxisAligned, 1, 0).unwrap();
        // (0.9, 0.1): right of the x-split, low side of the y-split → (1,0).
        let (_, members) = tree.query_leaf(&[0.9, 0.1]).unwrap();
        assert_eq!(members, &[2]);
    }

    #[test]
    fn leaf_capacity_respected_on_gaussian_data() {
        for rule in [SplitRule::AxisAligned, SplitRule::RandomProjection] {
            let tree = PartitionTree::build(gaussian_points(1000, 5, 42), rule, 16, 7).unwrap();
            for (_, members) in tree.leaves() {
                assert!(members.len() <= 16, "leaf of size {}", members.len());
            }
            audit_partition(&tree);
        }
    }

    #[test]
    fn every_database_point_routes_to_its_own_leaf() {
        for rule in [SplitRule::AxisAligned, SplitRule::RandomProjection] {
            let tree = PartitionTree::build(gaussian_points(300, 4, 3), rule, 8, 11).unwrap();
            for id in 0..tree.num_points() as u32 {
                let (_, members) = tree.query_leaf(tree.point(id)).unwrap();
                assert!(members.contains(&id));
            }
        }
    }

    #[test]
    fn duplicate_points_terminate_in_oversized_leaf() {
        let pts = DenseMatrix::from_rows(vec![vec![1.0, 1.0]; 10]).unwrap();
        let tree = PartitionTree::build(pts, SplitRule::AxisAligned, 2, 0).unwrap();
        assert_eq!(tree.nodes().len(), 1);
        assert_eq!(tree.nn_exact(&[1.0, 1.0], 3, Metric::L2).unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn nn_query_at_database_point_returns_it() {
        let pts = gaussian_points(200, 6, 5);
        let tree = PartitionTree::build(pts.clone(), SplitRule::AxisAligned, 8, 1).unwrap();
        for id in [0u32, 57, 199] {
            assert_eq!(
                tree.nn_exact(pts.row(id as usize), 1, Metric::L2).unwrap(),
                vec![id]
            );
        }
    }

    #[test]
    fn nn_exact_matches_brute_force() {
        let pts = gaussian_points(400, 8, 21);
        let queries = gaussian_points(50, 8, 22);
        for rule in [SplitRule::AxisAligned, SplitRule::RandomProjection] {
            let tree = PartitionTree::build(pts.clone(), rule, 10, 9).unwrap();
            for metric in [Metric::L2, Metric::Lp(0.5), Metric::Lp(3.0)] {
                for q in queries.iter_rows() {
                    for k in [1, 5] {
                        assert_eq!(
                            tree.nn_exact(q, k, metric).unwrap(),
                            brute_knn(&pts, q, k, metric),
                            "rule {rule:?} metric {metric:?} k {k}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn nn_tie_break_prefers_smaller_id() {
        // Two points equidistant from the query on either side.
        let pts = DenseMatrix::from_rows(vec![vec![1.0], vec![-1.0], vec![5.0]]).unwrap();
        let tree = PartitionTree::build(pts, SplitRule::AxisAligned, 1, 0).unwrap();
        assert_eq!(tree.nn_exact(&[0.0], 1, Metric::L2).unwrap(), vec![0]);
        assert_eq!(tree.nn_exact(&[0.0], 2, Metric::L2).unwrap(), vec![0, 1]);
    }

    #[test]
    fn rp_trees_with_equal_seeds_are_identical() {
        let pts = gaussian_points(300, 6, 8);
        let a = PartitionTree::build(pts.clone(), SplitRule::RandomProjection, 8, 77).unwrap();
        let b = PartitionTree::build(pts.clone(), SplitRule::RandomProjection, 8, 77).unwrap();
        assert_eq!(a.nodes(), b.nodes());
        let c = PartitionTree::build(pts, SplitRule::RandomProjection, 8, 78).unwrap();
        assert_ne!(a.nodes(), c.nodes());
    }

    #[test]
    fn invalid_queries_are_rejected() {
        let tree = PartitionTree::build(gaussian_points(10, 3, 0), SplitRule::AxisAligned, 4, 0)
            .unwrap();
        assert!(tree.query_leaf(&[1.0, 2.0]).is_err());
        assert!(tree.nn_exact(&[1.0, 2.0, 3.0], 0, Metric::L2).is_err());
        assert!(tree.nn_exact(&[1.0, 2.0, 3.0], 11, Metric::L2).is_err());
        assert!(tree.nn_exact(&[1.0, 2.0, 3.0], 1, Metric::Lp(0.0)).is_err());
        assert!(tree
            .nn_exact(&[f64::NAN, 0.0, 0.0], 1, Metric::L2)
            .is_err());
        assert!(
            PartitionTree::build(gaussian_points(5, 2, 0), SplitRule::AxisAligned, 0, 0).is_err()
        );
    }

    #[test]
    fn insert_routes_and_splits_leaves() {
        let mut tree =
            PartitionTree::build(gaussian_points(64, 3, 2), SplitRule::AxisAligned, 4, 0).unwrap();
        let mut rng = SeededRng::new(99);
        for _ in 0..100 {
            let p = rng.normal_vec(3);
            let id = tree.insert(&p).unwrap();
            let (_, members) = tree.query_leaf(&p).unwrap();
            assert!(members.contains(&id));
        }
        assert_eq!(tree.num_points(), 164);
        for (_, members) in tree.leaves() {
            assert!(members.len() <= 4);
        }
        audit_partition(&tree);
    }

    #[test]
    fn inserted_duplicates_may_overflow_but_stay_consistent() {
        let pts = DenseMatrix::from_rows(vec![vec![0.0, 0.0], vec![2.0, 2.0]]).unwrap();
        let mut tree = PartitionTree::build(pts, SplitRule::AxisAligned, 1, 0).unwrap();
        for _ in 0..5 {
            tree.insert(&[2.0, 2.0]).unwrap();
        }
        audit_partition(&tree);
    }

    #[test]
    fn xor_decomposition_classifies_all_four_points() {
        let labels = vec![false, true, true, false];
        let c = xor_decompose(&xor_points(), &labels).unwrap();
        for (row, &want) in xor_points().iter_rows().zip(&labels) {
            assert_eq!(c.predict(row).unwrap(), want, "point {row:?}");
        }
        assert!(convex_diff_predict(&c, &[0.0, 1.0]).unwrap());
        assert!(!convex_diff_predict(&c, &[1.0, 1.0]).unwrap());
    }

    #[test]
    fn midpoint_prediction_is_deterministic() {
        let labels = vec![false, true, true, false];
        let c = xor_decompose(&xor_points(), &labels).unwrap();
        let first = c.predict(&[0.5, 0.5]).unwrap();
        for _ in 0..3 {
            assert_eq!(c.predict(&[0.5, 0.5]).unwrap(), first);
        }
    }

    #[test]
    fn all_positive_labels_degenerate_inner() {
        let c = xor_decompose(&xor_points(), &[true; 4]).unwrap();
        for row in xor_points().iter_rows() {
            assert!(c.predict(row).unwrap());
        }
    }

    #[test]
    fn all_negative_labels_reject_everything() {
        let c = xor_decompose(&xor_points(), &[false; 4]).unwrap();
        for row in xor_points().iter_rows() {
            assert!(!c.predict(row).unwrap());
        }
    }

    #[test]
    fn jittered_xor_still_separates() {
        let mut rng = SeededRng::new(123);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..5 {
            for (corner, label) in [
                ([0.0, 0.0], false),
                ([0.0, 1.0], true),
                ([1.0, 0.0], true),
                ([1.0, 1.0], false),
            ] {
                rows.push(vec![
                    corner[0] + rng.uniform(-0.05, 0.05),
                    corner[1] + rng.uniform(-0.05, 0.05),
                ]);
                labels.push(label);
            }
        }
        let points = DenseMatrix::from_rows(rows).unwrap();
        let c = xor_decompose(&points, &labels).unwrap();
        for (row, &want) in points.iter_rows().zip(&labels) {
            assert_eq!(c.predict(row).unwrap(), want);
        }
    }

    #[test]
    fn linearly_separable_labels_use_single_plane() {
        // AND labeling is separable outright; inner must reject everything.
        let labels = vec![false, false, false, true];
        let c = xor_decompose(&xor_points(), &labels).unwrap();
        for (row, &want) in xor_points().iter_rows().zip(&labels) {
            assert_eq!(c.predict(row).unwrap(), want);
        }
    }
}
