//! Binary on-disk format for a built index and everything needed to query
//! it: the dataset, the product tree, the dictionary, packed sign codes, and
//! the novelty calibration. The layout is canonical (fixed section order, no
//! gaps), so `encode(decode(bytes)) == bytes` for every input that decodes
//! successfully, and `decode` never trusts a length field before checking it
//! against the bytes actually present.
//!
//! Layout, all integers little-endian, floats as raw IEEE-754 bits:
//!
//! ```text
//! magic    8 bytes  "PMTIDX01"
//! version  u32      currently 1
//! table    6 × (tag: 4 bytes, offset: u64, len: u64)
//! payloads           concatenated in table order, no padding
//! ```
//!
//! Sections, in fixed order (`len == 0` means absent, `DSET` is mandatory):
//!
//! - `DSET` rows, cols, labels flag, row-major values, optional labels.
//! - `PMST` block layout, split rule, leaf capacity, seed, permutation.
//! - `PTRE` per-block tree arenas (nodes and roots); the per-block point
//!   slices are rebuilt from `DSET`, never stored twice.
//! - `DICT` dictionary atoms, one unit row per atom.
//! - `ACOD` packed ±1 sign codes of the dataset under `DICT`.
//! - `NOVC` residual calibration quantiles and decision thresholds.

use std::path::Path;

use crate::antisparse::AnnIndex;
use crate::error::{Error, Result};
use crate::novelty::{NoveltyModel, NUM_QUANTILES};
use crate::numerics::DenseMatrix;
use crate::partition::{Hyperplane, PartitionNode, PartitionTree, SplitRule};
use crate::product::{Block, BlockPartition, PMTree, PmParams};
use crate::sparse::Dictionary;

pub const INDEX_MAGIC: [u8; 8] = *b"PMTIDX01";
pub const INDEX_VERSION: u32 = 1;

const SECTION_TAGS: [&[u8; 4]; 6] = [b"DSET", b"PMST", b"PTRE", b"DICT", b"ACOD", b"NOVC"];
const HEADER_LEN: usize = 8 + 4 + SECTION_TAGS.len() * 20;

/// Everything the novelty scorer needs beyond the tree and dictionary:
/// the residual scale, the calibrated quantile curve, and the two decision
/// cutoffs.
#[derive(Debug, Clone, PartialEq)]
pub struct NoveltyCalibration {
    pub lambda: f64,
    pub threshold_quantile: f64,
    pub atom_add_quantile: f64,
    pub quantiles: Vec<f64>,
}

/// A dataset plus any subset of the structures built over it. The dataset is
/// stored once; the tree and the code index reference it by construction, so
/// `validate` insists their copies match it exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle {
    pub dataset: DenseMatrix,
    pub labels: Option<Vec<usize>>,
    pub pm: Option<PMTree>,
    pub dictionary: Option<Dictionary>,
    pub ann: Option<AnnIndex>,
    pub novelty: Option<NoveltyCalibration>,
}

impl ModelBundle {
    pub fn new(dataset: DenseMatrix) -> Self {
        ModelBundle {
            dataset,
            labels: None,
            pm: None,
            dictionary: None,
            ann: None,
            novelty: None,
        }
    }

    /// Decomposes a fitted novelty model into its bundle form (the model owns
    /// copies of the tree and dictionary, so this is the inverse of
    /// [`ModelBundle::novelty_model`]).
    pub fn from_novelty_model(model: &NoveltyModel, labels: Option<Vec<usize>>) -> Self {
        ModelBundle {
            dataset: model.pm().database().clone(),
            labels,
            pm: Some(model.pm().clone()),
            dictionary: Some(model.dictionary().clone()),
            ann: None,
            novelty: Some(NoveltyCalibration {
                lambda: model.lambda(),
                threshold_quantile: model.threshold_quantile(),
                atom_add_quantile: model.atom_add_quantile(),
                quantiles: model.calibration().to_vec(),
            }),
        }
    }

    /// Reassembles the novelty scorer from the stored parts.
    pub fn novelty_model(&self) -> Result<NoveltyModel> {
        let novelty = self
            .novelty
            .as_ref()
            .ok_or_else(|| Error::format("bundle has no novelty calibration"))?;
        let pm = self
            .pm
            .as_ref()
            .ok_or_else(|| Error::format("novelty calibration requires a tree section"))?;
        let dictionary = self
            .dictionary
            .as_ref()
            .ok_or_else(|| Error::format("novelty calibration requires a dictionary section"))?;
        NoveltyModel::from_parts(
            pm.clone(),
            dictionary.clone(),
            novelty.lambda,
            novelty.quantiles.clone(),
            novelty.threshold_quantile,
            novelty.atom_add_quantile,
        )
    }

    /// Cross-section consistency: every optional structure must agree with
    /// the dataset it was built from and with its prerequisite sections.
    pub fn validate(&self) -> Result<()> {
        if let Some(labels) = &self.labels {
            if labels.len() != self.dataset.rows() {
                return Err(Error::format("label count does not match dataset rows"));
            }
        }
        if let Some(pm) = &self.pm {
            if pm.database() != &self.dataset {
                return Err(Error::format("tree database does not match dataset"));
            }
        }
        if let Some(ann) = &self.ann {
            let dictionary = self
                .dictionary
                .as_ref()
                .ok_or_else(|| Error::format("code index requires a dictionary section"))?;
            if ann.dictionary() != dictionary {
                return Err(Error::format("code index dictionary does not match"));
            }
            if ann.originals() != &self.dataset {
                return Err(Error::format("code index originals do not match dataset"));
            }
        }
        if let Some(novelty) = &self.novelty {
            if self.pm.is_none() || self.dictionary.is_none() {
                return Err(Error::format(
                    "novelty calibration requires tree and dictionary sections",
                ));
            }
            if novelty.quantiles.len() != NUM_QUANTILES {
                return Err(Error::format("novelty calibration has wrong quantile count"));
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// encoding

fn put_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_u64(buf: &mut Vec<u8>, v: u64) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_usize(buf: &mut Vec<u8>, v: usize) {
    put_u64(buf, v as u64);
}

fn put_f64(buf: &mut Vec<u8>, v: f64) {
    buf.extend_from_slice(&v.to_bits().to_le_bytes());
}

fn encode_dataset(dataset: &DenseMatrix, labels: Option<&[usize]>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    put_usize(&mut buf, dataset.rows());
    put_usize(&mut buf, dataset.cols());
    buf.push(u8::from(labels.is_some()));
    for &v in dataset.as_slice() {
        put_f64(&mut buf, v);
    }
    if let Some(labels) = labels {
        for &label in labels {
            let label = u32::try_from(label)
                .map_err(|_| Error::format("label too large for index file"))?;
            put_u32(&mut buf, label);
        }
    }
    Ok(buf)
}

fn rule_tag(rule: SplitRule) -> u8 {
    match rule {
        SplitRule::AxisAligned => 0,
        SplitRule::RandomProjection => 1,
    }
}

fn encode_pm_settings(pm: &PMTree) -> Vec<u8> {
    let mut buf = Vec::new();
    put_usize(&mut buf, pm.partition().num_blocks());
    for block in pm.partition().blocks() {
        put_usize(&mut buf, block.offset);
        put_usize(&mut buf, block.width);
    }
    buf.push(rule_tag(pm.params().rule));
    put_usize(&mut buf, pm.params().leaf_capacity);
    put_u64(&mut buf, pm.params().seed);
    put_usize(&mut buf, pm.permutation().len());
    for &p in pm.permutation() {
        put_u32(&mut buf, p as u32);
    }
    buf
}

fn encode_trees(pm: &PMTree) -> Vec<u8> {
    let mut buf = Vec::new();
    put_usize(&mut buf, pm.subtrees().len());
    for tree in pm.subtrees() {
        put_usize(&mut buf, tree.dim());
        put_u64(&mut buf, tree.seed());
        put_u64(&mut buf, tree.split_counter());
        put_usize(&mut buf, tree.root());
        put_usize(&mut buf, tree.nodes().len());
        for node in tree.nodes() {
            match node {
                PartitionNode::Internal { split, left, right } => {
                    buf.push(0);
                    for &v in split.normal() {
                        put_f64(&mut buf, v);
                    }
                    put_f64(&mut buf, split.offset());
                    put_usize(&mut buf, *left);
                    put_usize(&mut buf, *right);
                }
                PartitionNode::Leaf { point_ids } => {
                    buf.push(1);
                    put_usize(&mut buf, point_ids.len());
                    for &id in point_ids {
                        put_u32(&mut buf, id);
                    }
                }
            }
        }
    }
    buf
}

fn encode_dictionary(dictionary: &Dictionary) -> Vec<u8> {
    let mut buf = Vec::new();
    put_usize(&mut buf, dictionary.num_atoms());
    put_usize(&mut buf, dictionary.signal_dim());
    for &v in dictionary.atoms_matrix().as_slice() {
        put_f64(&mut buf, v);
    }
    buf
}

fn encode_codes(ann: &AnnIndex) -> Vec<u8> {
    let mut buf = Vec::new();
    put_f64(&mut buf, ann.lambda());
    put_usize(&mut buf, ann.words_per_code());
    put_usize(&mut buf, ann.num_points());
    for &word in ann.raw_codes() {
        put_u64(&mut buf, word);
    }
    buf
}

fn encode_novelty(novelty: &NoveltyCalibration) -> Vec<u8> {
    let mut buf = Vec::new();
    put_f64(&mut buf, novelty.lambda);
    put_f64(&mut buf, novelty.threshold_quantile);
    put_f64(&mut buf, novelty.atom_add_quantile);
    put_usize(&mut buf, novelty.quantiles.len());
    for &q in &novelty.quantiles {
        put_f64(&mut buf, q);
    }
    buf
}

/// Serializes a validated bundle to the canonical byte layout.
pub fn encode_index(bundle: &ModelBundle) -> Result<Vec<u8>> {
    bundle.validate()?;
    let sections: [Option<Vec<u8>>; 6] = [
        Some(encode_dataset(&bundle.dataset, bundle.labels.as_deref())?),
        bundle.pm.as_ref().map(encode_pm_settings),
        bundle.pm.as_ref().map(encode_trees),
        bundle.dictionary.as_ref().map(encode_dictionary),
        bundle.ann.as_ref().map(encode_codes),
        bundle.novelty.as_ref().map(encode_novelty),
    ];

    let mut out = Vec::new();
    out.extend_from_slice(&INDEX_MAGIC);
    put_u32(&mut out, INDEX_VERSION);
    let mut offset = HEADER_LEN as u64;
    for (tag, section) in SECTION_TAGS.iter().zip(&sections) {
        out.extend_from_slice(*tag);
        match section {
            Some(payload) => {
                put_u64(&mut out, offset);
                put_u64(&mut out, payload.len() as u64);
                offset += payload.len() as u64;
            }
            None => {
                put_u64(&mut out, 0);
                put_u64(&mut out, 0);
            }
        }
    }
    for payload in sections.into_iter().flatten() {
        out.extend_from_slice(&payload);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// decoding

/// Bounds-checked reader over untrusted bytes. Every length is verified
/// against the remaining input before any allocation sized by it.
struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(data: &'a [u8]) -> Self {
        Cursor { data, pos: 0 }
    }

    fn remaining(&self) -> usize {
        self.data.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if n > self.remaining() {
            return Err(Error::format("unexpected end of index data"));
        }
        let slice = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::format("index value overflows usize"))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_bits(self.u64()?))
    }

    fn finite_f64(&mut self, what: &'static str) -> Result<f64> {
        let v = self.f64()?;
        if !v.is_finite() {
            return Err(Error::format(format!("non-finite value in {what}")));
        }
        Ok(v)
    }

    /// Reads a u64 element count and rejects it unless `count * item_size`
    /// bytes are actually present, so hostile counts cannot drive huge
    /// allocations.
    fn count(&mut self, item_size: usize) -> Result<usize> {
        let count = self.usize()?;
        let bytes = count
            .checked_mul(item_size)
            .ok_or_else(|| Error::format("element count overflows"))?;
        if bytes > self.remaining() {
            return Err(Error::format("element count exceeds section size"));
        }
        Ok(count)
    }

    fn f64_array(&mut self, count: usize) -> Result<Vec<f64>> {
        let bytes = self.take(count.checked_mul(8).ok_or_else(|| {
            Error::format("array length overflows")
        })?)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_bits(u64::from_le_bytes(c.try_into().unwrap())))
            .collect())
    }

    fn finish(self, what: &'static str) -> Result<()> {
        if self.remaining() != 0 {
            return Err(Error::format(format!("trailing bytes in {what}")));
        }
        Ok(())
    }
}

fn decode_dataset(bytes: &[u8]) -> Result<(DenseMatrix, Option<Vec<usize>>)> {
    let mut cur = Cursor::new(bytes);
    let rows = cur.usize()?;
    let cols = cur.usize()?;
    let has_labels = match cur.u8()? {
        0 => false,
        1 => true,
        other => return Err(Error::format(format!("bad label flag {other}"))),
    };
    let n_values = rows
        .checked_mul(cols)
        .ok_or_else(|| Error::format("dataset size overflows"))?;
    let need = n_values
        .checked_mul(8)
        .and_then(|b| b.checked_add(if has_labels { rows * 4 } else { 0 }))
        .ok_or_else(|| Error::format("dataset size overflows"))?;
    if need != cur.remaining() {
        return Err(Error::format("dataset section size mismatch"));
    }
    let data = cur.f64_array(n_values)?;
    let dataset = DenseMatrix::from_vec(rows, cols, data)
        .map_err(|e| Error::format(format!("bad dataset: {e}")))?;
    let labels = if has_labels {
        let mut labels = Vec::with_capacity(rows);
        for _ in 0..rows {
            labels.push(cur.u32()? as usize);
        }
        Some(labels)
    } else {
        None
    };
    cur.finish("dataset section")?;
    Ok((dataset, labels))
}

struct PmSettings {
    partition: BlockPartition,
    params: PmParams,
    permutation: Vec<usize>,
}

fn decode_pm_settings(bytes: &[u8]) -> Result<PmSettings> {
    let mut cur = Cursor::new(bytes);
    let num_blocks = cur.count(16)?;
    let mut blocks = Vec::with_capacity(num_blocks);
    for _ in 0..num_blocks {
        let offset = cur.usize()?;
        let width = cur.usize()?;
        blocks.push(Block { offset, width });
    }
    let partition =
        BlockPartition::new(blocks).map_err(|e| Error::format(format!("bad block layout: {e}")))?;
    let rule = match cur.u8()? {
        0 => SplitRule::AxisAligned,
        1 => SplitRule::RandomProjection,
        other => return Err(Error::format(format!("unknown split rule {other}"))),
    };
    let leaf_capacity = cur.usize()?;
    let seed = cur.u64()?;
    let perm_len = cur.count(4)?;
    let mut permutation = Vec::with_capacity(perm_len);
    for _ in 0..perm_len {
        permutation.push(cur.u32()? as usize);
    }
    cur.finish("tree settings section")?;
    Ok(PmSettings {
        partition,
        params: PmParams {
            rule,
            leaf_capacity,
            seed,
        },
        permutation,
    })
}

fn decode_trees(bytes: &[u8], settings: &PmSettings, dataset: &DenseMatrix) -> Result<PMTree> {
    let mut cur = Cursor::new(bytes);
    let num_subtrees = cur.count(1)?;
    if num_subtrees != settings.partition.num_blocks() {
        return Err(Error::format("subtree count does not match block count"));
    }
    if settings.permutation.len() != dataset.cols() {
        return Err(Error::format("permutation length does not match dataset"));
    }
    let mut subtrees = Vec::with_capacity(num_subtrees);
    for block in settings.partition.blocks() {
        let dim = cur.usize()?;
        if dim != block.width {
            return Err(Error::format("subtree dim does not match its block"));
        }
        let seed = cur.u64()?;
        let split_counter = cur.u64()?;
        let root = cur.usize()?;
        let node_count = cur.count(1)?;
        let mut nodes = Vec::with_capacity(node_count);
        for _ in 0..node_count {
            match cur.u8()? {
                0 => {
                    let normal = cur.f64_array(dim)?;
                    let offset = cur.f64()?;
                    let left = cur.usize()?;
                    let right = cur.usize()?;
                    let split = Hyperplane::new(normal, offset)
                        .map_err(|e| Error::format(format!("bad hyperplane: {e}")))?;
                    nodes.push(PartitionNode::Internal { split, left, right });
                }
                1 => {
                    let n_ids = cur.count(4)?;
                    let mut point_ids = Vec::with_capacity(n_ids);
                    for _ in 0..n_ids {
                        point_ids.push(cur.u32()?);
                    }
                    nodes.push(PartitionNode::Leaf { point_ids });
                }
                other => return Err(Error::format(format!("unknown node tag {other}"))),
            }
        }
        // The per-block point slices are reconstructed from the dataset the
        // same way the builder sliced them, so they are never stored twice.
        let mut sliced = Vec::with_capacity(dataset.rows() * block.width);
        for row in dataset.iter_rows() {
            for j in 0..block.width {
                sliced.push(row[settings.permutation[block.offset + j]]);
            }
        }
        let points = DenseMatrix::from_vec(dataset.rows(), block.width, sliced)
            .map_err(|e| Error::format(format!("bad subtree points: {e}")))?;
        subtrees.push(PartitionTree::from_parts(
            dim,
            settings.params.rule,
            settings.params.leaf_capacity,
            seed,
            split_counter,
            points,
            nodes,
            root,
        )?);
    }
    cur.finish("tree section")?;
    PMTree::from_parts(
        settings.partition.clone(),
        settings.params,
        settings.permutation.clone(),
        dataset.clone(),
        subtrees,
    )
}

fn decode_dictionary(bytes: &[u8]) -> Result<Dictionary> {
    let mut cur = Cursor::new(bytes);
    let num_atoms = cur.usize()?;
    let signal_dim = cur.usize()?;
    let n_values = num_atoms
        .checked_mul(signal_dim)
        .ok_or_else(|| Error::format("dictionary size overflows"))?;
    if n_values.checked_mul(8) != Some(cur.remaining()) {
        return Err(Error::format("dictionary section size mismatch"));
    }
    let data = cur.f64_array(n_values)?;
    cur.finish("dictionary section")?;
    let atoms = DenseMatrix::from_vec(num_atoms, signal_dim, data)
        .map_err(|e| Error::format(format!("bad dictionary matrix: {e}")))?;
    Dictionary::from_atom_rows(atoms).map_err(|e| Error::format(format!("bad dictionary: {e}")))
}

fn decode_codes(bytes: &[u8], dictionary: &Dictionary, dataset: &DenseMatrix) -> Result<AnnIndex> {
    let mut cur = Cursor::new(bytes);
    let lambda = cur.finite_f64("code lambda")?;
    let words_per_code = cur.usize()?;
    let num_points = cur.usize()?;
    if num_points != dataset.rows() {
        return Err(Error::format("code count does not match dataset rows"));
    }
    let n_words = num_points
        .checked_mul(words_per_code)
        .ok_or_else(|| Error::format("code size overflows"))?;
    if n_words.checked_mul(8) != Some(cur.remaining()) {
        return Err(Error::format("code section size mismatch"));
    }
    let mut codes = Vec::with_capacity(n_words);
    for _ in 0..n_words {
        codes.push(cur.u64()?);
    }
    cur.finish("code section")?;
    AnnIndex::from_parts(
        dictionary.clone(),
        lambda,
        dataset.clone(),
        codes,
        words_per_code,
    )
}

fn decode_novelty(bytes: &[u8]) -> Result<NoveltyCalibration> {
    let mut cur = Cursor::new(bytes);
    let lambda = cur.finite_f64("novelty lambda")?;
    let threshold_quantile = cur.finite_f64("novelty threshold")?;
    let atom_add_quantile = cur.finite_f64("novelty atom-add cutoff")?;
    let n_quantiles = cur.count(8)?;
    if n_quantiles != NUM_QUANTILES {
        return Err(Error::format("novelty calibration has wrong quantile count"));
    }
    let quantiles = cur.f64_array(n_quantiles)?;
    cur.finish("novelty section")?;
    if quantiles.iter().any(|q| !q.is_finite()) {
        return Err(Error::format("non-finite novelty quantile"));
    }
    Ok(NoveltyCalibration {
        lambda,
        threshold_quantile,
        atom_add_quantile,
        quantiles,
    })
}

/// Parses and fully validates index bytes. Rejects any non-canonical layout
/// (wrong section order, gaps, overlaps, trailing bytes), so every accepted
/// input re-encodes to identical bytes.
pub fn decode_index(bytes: &[u8]) -> Result<ModelBundle> {
    let mut cur = Cursor::new(bytes);
    if cur.take(8)? != INDEX_MAGIC {
        return Err(Error::format("bad magic: not an index file"));
    }
    let version = cur.u32()?;
    if version != INDEX_VERSION {
        return Err(Error::UnsupportedVersion {
            found: version,
            expected: INDEX_VERSION,
        });
    }
    let mut sections: [Option<&[u8]>; 6] = [None; 6];
    let mut expected_offset = HEADER_LEN as u64;
    for (i, tag) in SECTION_TAGS.iter().enumerate() {
        if cur.take(4)? != *tag {
            return Err(Error::format("section table out of order"));
        }
        let offset = cur.u64()?;
        let len = cur.u64()?;
        if len == 0 {
            if offset != 0 {
                return Err(Error::format("absent section with nonzero offset"));
            }
            continue;
        }
        if offset != expected_offset {
            return Err(Error::format("non-canonical section offset"));
        }
        let start = usize::try_from(offset)
            .map_err(|_| Error::format("section offset overflows"))?;
        let end = offset
            .checked_add(len)
            .and_then(|e| usize::try_from(e).ok())
            .ok_or_else(|| Error::format("section extent overflows"))?;
        if end > bytes.len() {
            return Err(Error::format("section extends past end of file"));
        }
        sections[i] = Some(&bytes[start..end]);
        expected_offset = end as u64;
    }
    if expected_offset != bytes.len() as u64 {
        return Err(Error::format("trailing bytes after last section"));
    }

    let [dset, pmst, ptre, dict, acod, novc] = sections;
    let dset = dset.ok_or_else(|| Error::format("missing dataset section"))?;
    let (dataset, labels) = decode_dataset(dset)?;

    let pm = match (pmst, ptre) {
        (Some(pmst), Some(ptre)) => {
            let settings = decode_pm_settings(pmst)?;
            Some(decode_trees(ptre, &settings, &dataset)?)
        }
        (None, None) => None,
        _ => {
            return Err(Error::format(
                "tree settings and tree sections must be present together",
            ))
        }
    };
    let dictionary = dict.map(decode_dictionary).transpose()?;
    let ann = match acod {
        Some(acod) => {
            let dictionary = dictionary
                .as_ref()
                .ok_or_else(|| Error::format("code section requires a dictionary section"))?;
            Some(decode_codes(acod, dictionary, &dataset)?)
        }
        None => None,
    };
    let novelty = novc.map(decode_novelty).transpose()?;

    let bundle = ModelBundle {
        dataset,
        labels,
        pm,
        dictionary,
        ann,
        novelty,
    };
    bundle.validate()?;
    Ok(bundle)
}

// ---------------------------------------------------------------------------
// file I/O

/// Writes the bundle atomically: encode to a scratch file in the same
/// directory, then rename over the target, so a crash mid-write never leaves
/// a partial index behind.
pub fn save_index(path: &Path, bundle: &ModelBundle) -> Result<()> {
    let bytes = encode_index(bundle)?;
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::format("index path has no file name"))?;
    let mut tmp_name = file_name.to_os_string();
    tmp_name.push(format!(".tmp-{}", std::process::id()));
    let tmp_path = match dir {
        Some(dir) => dir.join(&tmp_name),
        None => tmp_name.into(),
    };
    let write_result = std::fs::write(&tmp_path, &bytes)
        .and_then(|()| std::fs::rename(&tmp_path, path));
    if let Err(e) = write_result {
        let _ = std::fs::remove_file(&tmp_path);
        return Err(e.into());
    }
    Ok(())
}

/// Reads and fully validates an index file.
pub fn load_index(path: &Path) -> Result<ModelBundle> {
    decode_index(&std::fs::read(path)?)
}
