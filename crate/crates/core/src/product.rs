//! Product-composed index: partition trees built per coordinate block, whose
//! per-block leaves form product cells. Candidate retrieval intersects the
//! per-block leaf memberships, widening deterministically (one tree level at
//! a time, round-robin across blocks) when the intersection is too small.
//! Forests repeat the construction under seeded coordinate permutations and
//! union the candidates.

use crate::error::{Error, Result};
use crate::numerics::{DenseMatrix, SeededRng};
use crate::partition::{Metric, PartitionTree, SplitRule};

/// Contiguous coordinate range `[offset, offset + width)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Block {
    pub offset: usize,
    pub width: usize,
}

/// Ordered tiling of `0..dim` into contiguous blocks (the factor spaces of
/// the product construction).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockPartition {
    blocks: Vec<Block>,
    dim: usize,
}

impl BlockPartition {
    pub fn new(blocks: Vec<Block>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::EmptyInput("BlockPartition::new"));
        }
        let mut cursor = 0;
        for b in &blocks {
            if b.width == 0 {
                return Err(Error::param("block width must be positive"));
            }
            if b.offset != cursor {
                return Err(Error::param(format!(
                    "blocks must tile contiguously: expected offset {cursor}, got {}",
                    b.offset
                )));
            }
            cursor += b.width;
        }
        Ok(BlockPartition { blocks, dim: cursor })
    }

    /// Splits `dim` into `num_blocks` contiguous blocks of near-equal width
    /// (earlier blocks absorb the remainder).
    pub fn equal_width(dim: usize, num_blocks: usize) -> Result<Self> {
        if num_blocks == 0 || num_blocks > dim {
            return Err(Error::param(format!(
                "need 1 ≤ num_blocks ≤ dim, got {num_blocks} blocks for dim {dim}"
            )));
        }
        let base = dim / num_blocks;
        let extra = dim % num_blocks;
        let mut blocks = Vec::with_capacity(num_blocks);
        let mut offset = 0;
        for i in 0..num_blocks {
            let width = base + usize::from(i < extra);
            blocks.push(Block { offset, width });
            offset += width;
        }
        BlockPartition::new(blocks)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn slice<'a>(&self, x: &'a [f64], block: usize) -> &'a [f64] {
        let b = self.blocks[block];
        &x[b.offset..b.offset + b.width]
    }
}

/// Per-block tree parameters shared by every subtree of a product index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PmParams {
    pub rule: SplitRule,
    pub leaf_capacity: usize,
    pub seed: u64,
}

impl Default for PmParams {
    fn default() -> Self {
        PmParams {
            rule: SplitRule::AxisAligned,
            leaf_capacity: 16,
            seed: 0,
        }
    }
}

/// One leaf id per block: the product cell containing a point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProductCell {
    leaf_ids: Vec<usize>,
}

impl ProductCell {
    pub fn leaf_ids(&self) -> &[usize] {
        &self.leaf_ids
    }
}

/// Product of per-block partition trees over a shared database.
///
/// Coordinates may be permuted before blocking (identity by default); all
/// public queries take ambient-space vectors and the permutation stays an
/// internal detail.
#[derive(Debug, Clone, PartialEq)]
pub struct PMTree {
    partition: BlockPartition,
    params: PmParams,
    permutation: Vec<usize>,
    database: DenseMatrix,
    subtrees: Vec<PartitionTree>,
}

fn validate_permutation(perm: &[usize], dim: usize) -> Result<()> {
    if perm.len() != dim {
        return Err(Error::dim("coordinate permutation", dim, perm.len()));
    }
    let mut seen = vec![false; dim];
    for &p in perm {
        if p >= dim || seen[p] {
            return Err(Error::param("invalid coordinate permutation"));
        }
        seen[p] = true;
    }
    Ok(())
}

impl PMTree {
    pub fn build(points: DenseMatrix, partition: BlockPartition, params: &PmParams) -> Result<Self> {
        let dim = points.cols();
        Self::build_permuted(points, partition, params, (0..dim).collect())
    }

    pub fn build_permuted(
        points: DenseMatrix,
        partition: BlockPartition,
        params: &PmParams,
        permutation: Vec<usize>,
    ) -> Result<Self> {
        if partition.dim() != points.cols() {
            return Err(Error::dim(
                "PMTree::build partition",
                points.cols(),
                partition.dim(),
            ));
        }
        if points.rows() == 0 {
            return Err(Error::EmptyInput("PMTree::build"));
        }
        validate_permutation(&permutation, points.cols())?;

        let mut subtrees = Vec::with_capacity(partition.num_blocks());
        for (b, block) in partition.blocks().iter().enumerate() {
            let mut sliced = Vec::with_capacity(points.rows() * block.width);
            for row in points.iter_rows() {
                for j in 0..block.width {
                    sliced.push(row[permutation[block.offset + j]]);
                }
            }
            let sliced = DenseMatrix::from_vec(points.rows(), block.width, sliced)?;
            let seed = SeededRng::new(params.seed).derive(b as u64).seed();
            subtrees.push(PartitionTree::build(
                sliced,
                params.rule,
                params.leaf_capacity,
                seed,
            )?);
        }
        let tree = PMTree {
            partition,
            params: *params,
            permutation,
            database: points,
            subtrees,
        };
        tree.assert_dimensional_bookkeeping();
        Ok(tree)
    }

    /// The dimension of every product cell: the sum of block widths.
    pub fn cell_dim(&self) -> usize {
        self.partition.blocks().iter().map(|b| b.width).sum()
    }

    /// The product of per-block cells must recover exactly the ambient
    /// dimension; violation means the block bookkeeping is corrupt.
    pub fn assert_dimensional_bookkeeping(&self) {
        assert_eq!(
            self.cell_dim(),
            self.database.cols(),
            "product-cell dimension must equal the ambient dimension"
        );
        for (tree, block) in self.subtrees.iter().zip(self.partition.blocks()) {
            assert_eq!(tree.dim(), block.width, "subtree dim must match its block");
        }
    }

    pub(crate) fn from_parts(
        partition: BlockPartition,
        params: PmParams,
        permutation: Vec<usize>,
        database: DenseMatrix,
        subtrees: Vec<PartitionTree>,
    ) -> Result<Self> {
        if partition.dim() != database.cols() {
            return Err(Error::format("PMTree parts: partition does not tile ambient dim"));
        }
        validate_permutation(&permutation, database.cols())
            .map_err(|e| Error::format(e.to_string()))?;
        if subtrees.len() != partition.num_blocks() {
            return Err(Error::format("PMTree parts: one subtree required per block"));
        }
        for (tree, block) in subtrees.iter().zip(partition.blocks()) {
            if tree.dim() != block.width || tree.num_points() != database.rows() {
                return Err(Error::format("PMTree parts: subtree shape mismatch"));
            }
        }
        let tree = PMTree {
            partition,
            params,
            permutation,
            database,
            subtrees,
        };
        tree.assert_dimensional_bookkeeping();
        Ok(tree)
    }

    pub fn partition(&self) -> &BlockPartition {
        &self.partition
    }

    pub fn params(&self) -> &PmParams {
        &self.params
    }

    pub fn permutation(&self) -> &[usize] {
        &self.permutation
    }

    pub fn database(&self) -> &DenseMatrix {
        &self.database
    }

    pub fn subtrees(&self) -> &[PartitionTree] {
        &self.subtrees
    }

    pub fn num_points(&self) -> usize {
        self.database.rows()
    }

    fn check_query(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.database.cols() {
            return Err(Error::dim("PMTree query", self.database.cols(), x.len()));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("PMTree query"));
        }
        Ok(())
    }

    fn apply_permutation(&self, x: &[f64]) -> Vec<f64> {
        self.permutation.iter().map(|&p| x[p]).collect()
    }

    /// The tuple of per-block leaf ids containing `x`.
    pub fn product_cell(&self, x: &[f64]) -> Result<ProductCell> {
        self.check_query(x)?;
        let px = self.apply_permutation(x);
        let leaf_ids = self
            .subtrees
            .iter()
            .enumerate()
            .map(|(b, tree)| {
                let (leaf, _) = tree.query_leaf(self.partition.slice(&px, b))?;
                Ok(leaf)
            })
            .collect::<Result<Vec<usize>>>()?;
        Ok(ProductCell { leaf_ids })
    }

    /// Ids whose every block slice shares a leaf with the query's slice,
    /// i.e. the intersection of per-block leaf memberships.
    ///
    /// When fewer than `min_candidates` ids survive, neighborhoods widen one
    /// tree level at a time, round-robin across blocks, until the bound is
    /// met or every block has reached its root (whole database). With
    /// `min_candidates == 0` no widening happens and the result equals the
    /// brute-force co-membership set. Returned ids are sorted ascending.
    pub fn intersect_candidates(&self, q: &[f64], min_candidates: usize) -> Result<Vec<u32>> {
        self.check_query(q)?;
        let px = self.apply_permutation(q);
        let nb = self.partition.num_blocks();
        let mut paths = Vec::with_capacity(nb);
        for (b, tree) in self.subtrees.iter().enumerate() {
            paths.push(tree.query_path(self.partition.slice(&px, b))?);
        }
        let mut depths: Vec<usize> = paths.iter().map(|p| p.len() - 1).collect();
        let mut members: Vec<Vec<u32>> = self
            .subtrees
            .iter()
            .zip(&paths)
            .zip(&depths)
            .map(|((tree, path), &d)| tree.subtree_members(path[d]))
            .collect();
        let mut candidates = intersect_all(&members);
        let mut b = 0;
        while candidates.len() < min_candidates && depths.iter().any(|&d| d > 0) {
            if depths[b] > 0 {
                depths[b] -= 1;
                members[b] = self.subtrees[b].subtree_members(paths[b][depths[b]]);
                candidates = intersect_all(&members);
            }
            b = (b + 1) % nb;
        }
        Ok(candidates)
    }

    /// k-NN by candidate intersection (budget `max(4k, 32)`) plus exact
    /// re-rank in the ambient metric. Ties break toward the smaller id.
    pub fn pm_knn(&self, q: &[f64], k: usize, metric: Metric) -> Result<Vec<u32>> {
        metric.validate()?;
        if k == 0 {
            return Err(Error::param("pm_knn: k must be at least 1"));
        }
        if k > self.num_points() {
            return Err(Error::param(format!(
                "pm_knn: k = {k} exceeds database size {}",
                self.num_points()
            )));
        }
        let min_candidates = (4 * k).max(32);
        let candidates = self.intersect_candidates(q, min_candidates)?;
        Ok(rerank(&self.database, q, &candidates, k, metric))
    }

    /// Appends a point to the database and to every subtree (splitting
    /// overfull leaves). Requires exclusive access. Returns the new id.
    pub fn insert(&mut self, x: &[f64]) -> Result<u32> {
        self.check_query(x)?;
        let id = self.database.rows() as u32;
        self.database.push_row(x)?;
        let px = self.apply_permutation(x);
        for (b, tree) in self.subtrees.iter_mut().enumerate() {
            let block = self.partition.blocks()[b];
            let sub_id = tree.insert(&px[block.offset..block.offset + block.width])?;
            debug_assert_eq!(sub_id, id, "subtree ids must stay aligned");
        }
        Ok(id)
    }
}

/// Intersection of sorted ascending id lists.
fn intersect_all(lists: &[Vec<u32>]) -> Vec<u32> {
    let Some(first) = lists.first() else {
        return Vec::new();
    };
    let mut acc = first.clone();
    for list in &lists[1..] {
        let mut out = Vec::with_capacity(acc.len().min(list.len()));
        let (mut i, mut j) = (0, 0);
        while i < acc.len() && j < list.len() {
            match acc[i].cmp(&list[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    out.push(acc[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
        acc = out;
        if acc.is_empty() {
            break;
        }
    }
    acc
}

/// Exact re-rank of candidate ids by the metric key, ties to the smaller id.
fn rerank(database: &DenseMatrix, q: &[f64], ids: &[u32], k: usize, metric: Metric) -> Vec<u32> {
    let mut scored: Vec<(f64, u32)> = ids
        .iter()
        .map(|&id| (metric.key(q, database.row(id as usize)), id))
        .collect();
    scored.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    scored.into_iter().take(k).map(|(_, id)| id).collect()
}

const FOREST_PERMUTE_SALT: u64 = 0x7065_726d_7574_6531;

/// Ensemble of product trees over one database. Tree 0 always uses the
/// identity permutation and the base seed, so a one-tree forest behaves
/// exactly like the corresponding `PMTree`.
#[derive(Debug, Clone, PartialEq)]
pub struct PMForest {
    trees: Vec<PMTree>,
}

impl PMForest {
    pub fn build(
        points: &DenseMatrix,
        num_blocks: usize,
        num_trees: usize,
        params: &PmParams,
    ) -> Result<Self> {
        if num_trees == 0 {
            return Err(Error::param("forest needs at least one tree"));
        }
        let dim = points.cols();
        let mut trees = Vec::with_capacity(num_trees);
        for t in 0..num_trees {
            let partition = BlockPartition::equal_width(dim, num_blocks)?;
            let tree = if t == 0 {
                PMTree::build(points.clone(), partition, params)?
            } else {
                let tree_seed = SeededRng::new(params.seed).derive(t as u64).seed();
                let mut perm: Vec<usize> = (0..dim).collect();
                SeededRng::new(tree_seed)
                    .derive(FOREST_PERMUTE_SALT)
                    .shuffle(&mut perm);
                let tree_params = PmParams {
                    seed: tree_seed,
                    ..*params
                };
                PMTree::build_permuted(points.clone(), partition, &tree_params, perm)?
            };
            trees.push(tree);
        }
        Ok(PMForest { trees })
    }

    pub fn trees(&self) -> &[PMTree] {
        &self.trees
    }

    pub fn num_points(&self) -> usize {
        self.trees[0].num_points()
    }

    /// Union of per-tree candidate sets, sorted ascending.
    pub fn candidates(&self, q: &[f64], min_candidates_per_tree: usize) -> Result<Vec<u32>> {
        let mut union: Vec<u32> = Vec::new();
        for tree in &self.trees {
            union.extend(tree.intersect_candidates(q, min_candidates_per_tree)?);
        }
        union.sort_unstable();
        union.dedup();
        Ok(union)
    }

    /// k-NN over the union of every tree's candidates, exact re-rank.
    pub fn forest_knn(&self, q: &[f64], k: usize, metric: Metric) -> Result<Vec<u32>> {
        metric.validate()?;
        if k == 0 {
            return Err(Error::param("forest_knn: k must be at least 1"));
        }
        if k > self.num_points() {
            return Err(Error::param(format!(
                "forest_knn: k = {k} exceeds database size {}",
                self.num_points()
            )));
        }
        let candidates = self.candidates(q, (4 * k).max(32))?;
        Ok(rerank(self.trees[0].database(), q, &candidates, k, metric))
    }
}
