//! Anti-sparse (ℓ∞-minimal) coding and binarized search: an exact
//! equality-constrained solver, a Lagrangian proximal-gradient encoder whose
//! updates are odd-symmetric, sign binarization with bit-packed codes, and
//! Hamming-scored shortlist + exact re-rank search, flat or per coordinate
//! block.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numerics::{
    dot, gram_cols, l2_norm, linf_norm, prox_linf, squared_distance, Cholesky, DenseMatrix,
};
use crate::product::BlockPartition;
use crate::sparse::Dictionary;

/// Relative tolerance for calling a coordinate saturated (at ±‖α‖∞).
pub const EPSILON_SATURATION: f64 = 1e-6;

pub const ANTISPARSE_DEFAULT_MAX_ITERS: usize = 5000;
pub const ANTISPARSE_DEFAULT_TOL: f64 = 1e-8;
pub const EXACT_DEFAULT_MAX_ITERS: usize = 50_000;
pub const EXACT_DEFAULT_TOL: f64 = 1e-10;

/// Spread representation: coefficients whose magnitudes concentrate at the
/// shared limit ‖α‖∞, the set of saturated coordinates, and the ±1 sign code
/// (sign(0) := +1).
#[derive(Debug, Clone, PartialEq)]
pub struct SpreadCode {
    alpha: Vec<f64>,
    linf: f64,
    saturated: Vec<usize>,
    sign_code: Vec<i8>,
}

impl SpreadCode {
    pub fn from_alpha(alpha: Vec<f64>) -> Self {
        let linf = linf_norm(&alpha);
        let cut = (1.0 - EPSILON_SATURATION) * linf;
        let saturated = alpha
            .iter()
            .enumerate()
            .filter(|(_, &a)| linf > 0.0 && a.abs() >= cut)
            .map(|(i, _)| i)
            .collect();
        let sign_code = alpha.iter().map(|&a| sign_plus(a)).collect();
        SpreadCode {
            alpha,
            linf,
            saturated,
            sign_code,
        }
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn linf(&self) -> f64 {
        self.linf
    }

    /// Indices with |α_i| ≥ (1−ε)·‖α‖∞, ascending.
    pub fn saturated(&self) -> &[usize] {
        &self.saturated
    }

    pub fn sign_code(&self) -> &[i8] {
        &self.sign_code
    }
}

/// Componentwise sign with the documented tie rule sign(0) := +1.
fn sign_plus(x: f64) -> i8 {
    if x >= 0.0 {
        1
    } else {
        -1
    }
}

/// The ±1 sign vector of a spread code.
pub fn binarize(code: &SpreadCode) -> Vec<i8> {
    code.sign_code().to_vec()
}

/// Exact ℓ∞-minimal coefficients subject to `Dα = x`, via ADMM splitting
/// (affine projection / ℓ∞ prox / dual ascent). Requires a full-row-rank
/// dictionary. The returned α is feasible to the projection accuracy and its
/// ‖·‖∞ sits within solver tolerance of the optimum.
pub fn linf_encode_exact(
    dictionary: &Dictionary,
    x: &[f64],
    max_iters: usize,
    tol: f64,
) -> Result<SpreadCode> {
    let n = dictionary.signal_dim();
    let m = dictionary.num_atoms();
    if x.len() != n {
        return Err(Error::dim("linf_encode_exact", n, x.len()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("linf_encode_exact"));
    }
    if tol <= 0.0 {
        return Err(Error::param("linf_encode_exact: tol must be positive"));
    }
    // DDᵀ (n×n) for the projection onto {α : Dα = x}; Cholesky fails
    // exactly when D lacks full row rank.
    let gram = gram_cols(dictionary.atoms_matrix());
    let chol = Cholesky::factor(&gram).map_err(|_| {
        Error::RankDeficient("dictionary does not span its signal space".into())
    })?;

    let project = |v: &[f64]| -> Result<Vec<f64>> {
        let dv = dictionary.apply(v)?;
        let defect: Vec<f64> = dv.iter().zip(x).map(|(a, b)| a - b).collect();
        let correction = dictionary.analyze(&chol.solve(&defect))?;
        Ok(v.iter().zip(&correction).map(|(a, c)| a - c).collect())
    };

    let rho = 1.0;
    let mut alpha = project(&vec![0.0; m])?;
    let mut z = alpha.clone();
    let mut u = vec![0.0; m];
    let mut converged = false;
    for _ in 0..max_iters {
        let v: Vec<f64> = z.iter().zip(&u).map(|(zi, ui)| zi - ui).collect();
        alpha = project(&v)?;
        let w: Vec<f64> = alpha.iter().zip(&u).map(|(ai, ui)| ai + ui).collect();
        let z_prev = std::mem::replace(&mut z, prox_linf(&w, 1.0 / rho)?);
        for ((ui, ai), zi) in u.iter_mut().zip(&alpha).zip(&z) {
            *ui += ai - zi;
        }
        let primal: f64 = alpha
            .iter()
            .zip(&z)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let dual = rho
            * z.iter()
                .zip(&z_prev)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
        if primal <= tol * (1.0 + l2_norm(&alpha)) && dual <= tol * (1.0 + l2_norm(&z)) {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence(format!(
            "linf_encode_exact: no convergence within {max_iters} iterations"
        )));
    }
    let feasibility = squared_distance(&dictionary.apply(&alpha)?, x).sqrt();
    if feasibility > 1e-8 {
        return Err(Error::NoConvergence(format!(
            "linf_encode_exact: feasibility residual {feasibility:.3e}"
        )));
    }
    Ok(SpreadCode::from_alpha(alpha))
}

/// Lagrangian anti-sparse encoder minimizing
/// `J(α) = ½‖Dα−y‖² + λ‖α‖∞` by proximal gradient descent.
///
/// Initialized at 0 with odd-symmetric updates, so `y → −y` mirrors every
/// iterate exactly. `J` is non-increasing across iterations.
pub fn antisparse_encode(
    dictionary: &Dictionary,
    y: &[f64],
    lambda: f64,
    max_iters: usize,
    tol: f64,
) -> Result<SpreadCode> {
    antisparse_encode_trace(dictionary, y, lambda, max_iters, tol).map(|(code, _)| code)
}

/// Same as [`antisparse_encode`] but also returns the objective after every
/// iterate (index 0 = initial) for monotonicity audits.
pub fn antisparse_encode_trace(
    dictionary: &Dictionary,
    y: &[f64],
    lambda: f64,
    max_iters: usize,
    tol: f64,
) -> Result<(SpreadCode, Vec<f64>)> {
    let bound = gram_upper_bound(dictionary);
    antisparse_encode_inner(dictionary, y, lambda, max_iters, tol, bound)
}

/// Step-size bound λ_max(DᵀD); unit atoms force it ≥ 1.
fn gram_upper_bound(dictionary: &Dictionary) -> f64 {
    crate::numerics::spectral_norm_sq(dictionary.atoms_matrix(), 60).max(1e-12)
}

fn antisparse_encode_inner(
    dictionary: &Dictionary,
    y: &[f64],
    lambda: f64,
    max_iters: usize,
    tol: f64,
    gram_bound: f64,
) -> Result<(SpreadCode, Vec<f64>)> {
    if lambda <= 0.0 || !lambda.is_finite() {
        return Err(Error::param("antisparse_encode: lambda must be positive"));
    }
    if y.len() != dictionary.signal_dim() {
        return Err(Error::dim(
            "antisparse_encode",
            dictionary.signal_dim(),
            y.len(),
        ));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("antisparse_encode"));
    }
    let m = dictionary.num_atoms();
    let objective = |alpha: &[f64]| -> Result<f64> {
        let residual: Vec<f64> = dictionary
            .apply(alpha)?
            .iter()
            .zip(y)
            .map(|(r, t)| r - t)
            .collect();
        Ok(0.5 * dot(&residual, &residual) + lambda * linf_norm(alpha))
    };

    let mut alpha = vec![0.0; m];
    let mut prev = objective(&alpha)?;
    let mut trace = vec![prev];
    let base_step = 1.0 / gram_bound;
    for _ in 0..max_iters {
        let residual: Vec<f64> = dictionary
            .apply(&alpha)?
            .iter()
            .zip(y)
            .map(|(r, t)| r - t)
            .collect();
        let gradient = dictionary.analyze(&residual)?;
        let mut step = base_step;
        let mut next;
        let mut next_obj;
        loop {
            let v: Vec<f64> = alpha
                .iter()
                .zip(&gradient)
                .map(|(a, g)| a - step * g)
                .collect();
            next = prox_linf(&v, lambda * step)?;
            next_obj = objective(&next)?;
            // Descent holds at step 1/L in exact arithmetic; the halving
            // branch only absorbs rounding. Both the objective and the
            // halving test are even under (y, α) → (−y, −α), so the
            // odd-symmetry of iterates survives backtracking.
            if next_obj <= prev || step < 1e-18 {
                break;
            }
            step *= 0.5;
        }
        alpha = next;
        trace.push(next_obj);
        let decrease = prev - next_obj;
        if decrease <= tol * prev.max(f64::MIN_POSITIVE) {
            break;
        }
        prev = next_obj;
    }
    Ok((SpreadCode::from_alpha(alpha), trace))
}

/// Checks e(−y) == −e(y) for the Lagrangian encoder. Meaningful only when
/// the encoding has no exactly-zero coefficients (the sign tie rule is not
/// odd at 0).
pub fn negation_symmetry_check(
    dictionary: &Dictionary,
    y: &[f64],
    lambda: f64,
) -> Result<bool> {
    let pos = antisparse_encode(
        dictionary,
        y,
        lambda,
        ANTISPARSE_DEFAULT_MAX_ITERS,
        ANTISPARSE_DEFAULT_TOL,
    )?;
    let neg_y: Vec<f64> = y.iter().map(|v| -v).collect();
    let neg = antisparse_encode(
        dictionary,
        &neg_y,
        lambda,
        ANTISPARSE_DEFAULT_MAX_ITERS,
        ANTISPARSE_DEFAULT_TOL,
    )?;
    Ok(pos
        .sign_code()
        .iter()
        .zip(neg.sign_code())
        .all(|(a, b)| *a == -*b))
}

/// Packs a ±1 sign vector into 64-bit words: bit `i` of word `i/64` at
/// position `i % 64`, set iff the sign is +1. Trailing pad bits are zero.
pub fn pack_signs(signs: &[i8]) -> Vec<u64> {
    let words = signs.len().div_ceil(64);
    let mut out = vec![0u64; words];
    for (i, &s) in signs.iter().enumerate() {
        if s > 0 {
            out[i / 64] |= 1u64 << (i % 64);
        }
    }
    out
}

/// Inner product of two ±1 codes from their packed forms:
/// `e(a)ᵀe(b) = m − 2·Hamming(a, b)`.
pub fn code_score(a: &[u64], b: &[u64], m: usize) -> i64 {
    debug_assert_eq!(a.len(), b.len());
    let hamming: u32 = a.iter().zip(b).map(|(x, y)| (x ^ y).count_ones()).sum();
    m as i64 - 2 * i64::from(hamming)
}

/// Binarized ANN index: one packed sign code per database point plus the
/// original vectors for exact re-ranking.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnIndex {
    dictionary: Dictionary,
    lambda: f64,
    originals: DenseMatrix,
    codes: Vec<u64>,
    words_per_code: usize,
}

impl AnnIndex {
    /// Encodes every database row (in parallel, results in id order) and
    /// packs the sign codes.
    pub fn build(dictionary: Dictionary, database: DenseMatrix, lambda: f64) -> Result<Self> {
        if database.cols() != dictionary.signal_dim() {
            return Err(Error::dim(
                "AnnIndex::build",
                dictionary.signal_dim(),
                database.cols(),
            ));
        }
        if database.rows() == 0 {
            return Err(Error::EmptyInput("AnnIndex::build"));
        }
        let bound = gram_upper_bound(&dictionary);
        let words_per_code = dictionary.num_atoms().div_ceil(64);
        let rows: Vec<&[f64]> = database.iter_rows().collect();
        let packed: Vec<Vec<u64>> = rows
            .par_iter()
            .map(|row| {
                let (code, _) = antisparse_encode_inner(
                    &dictionary,
                    row,
                    lambda,
                    ANTISPARSE_DEFAULT_MAX_ITERS,
                    ANTISPARSE_DEFAULT_TOL,
                    bound,
                )?;
                Ok(pack_signs(code.sign_code()))
            })
            .collect::<Result<Vec<Vec<u64>>>>()?;
        let mut codes = Vec::with_capacity(packed.len() * words_per_code);
        for code in packed {
            debug_assert_eq!(code.len(), words_per_code);
            codes.extend(code);
        }
        Ok(AnnIndex {
            dictionary,
            lambda,
            originals: database,
            codes,
            words_per_code,
        })
    }

    pub(crate) fn from_parts(
        dictionary: Dictionary,
        lambda: f64,
        originals: DenseMatrix,
        codes: Vec<u64>,
        words_per_code: usize,
    ) -> Result<Self> {
        if words_per_code != dictionary.num_atoms().div_ceil(64) {
            return Err(Error::format("AnnIndex parts: word count mismatch"));
        }
        if codes.len() != originals.rows() * words_per_code {
            return Err(Error::format("AnnIndex parts: code block size mismatch"));
        }
        if originals.cols() != dictionary.signal_dim() {
            return Err(Error::format("AnnIndex parts: signal dim mismatch"));
        }
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::format("AnnIndex parts: invalid lambda"));
        }
        Ok(AnnIndex {
            dictionary,
            lambda,
            originals,
            codes,
            words_per_code,
        })
    }

    pub fn dictionary(&self) -> &Dictionary {
        &self.dictionary
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn originals(&self) -> &DenseMatrix {
        &self.originals
    }

    pub fn num_points(&self) -> usize {
        self.originals.rows()
    }

    pub fn code_bits(&self) -> usize {
        self.dictionary.num_atoms()
    }

    pub fn words_per_code(&self) -> usize {
        self.words_per_code
    }

    pub fn code(&self, id: u32) -> &[u64] {
        let start = id as usize * self.words_per_code;
        &self.codes[start..start + self.words_per_code]
    }

    pub(crate) fn raw_codes(&self) -> &[u64] {
        &self.codes
    }

    /// Encodes and packs a query vector with the index parameters.
    pub fn encode_query(&self, z: &[f64]) -> Result<Vec<u64>> {
        let code = antisparse_encode(
            &self.dictionary,
            z,
            self.lambda,
            ANTISPARSE_DEFAULT_MAX_ITERS,
            ANTISPARSE_DEFAULT_TOL,
        )?;
        Ok(pack_signs(code.sign_code()))
    }

    /// Code-space scores (sign inner products) of the query against every
    /// database point, in id order.
    pub fn scores_for_code(&self, query_code: &[u64]) -> Result<Vec<i64>> {
        if query_code.len() != self.words_per_code {
            return Err(Error::dim(
                "AnnIndex::scores_for_code",
                self.words_per_code,
                query_code.len(),
            ));
        }
        let m = self.code_bits();
        Ok(self
            .codes
            .chunks_exact(self.words_per_code)
            .map(|code| code_score(query_code, code, m))
            .collect())
    }

    /// Shortlists `shortlist_size` ids by code score (descending, ties to
    /// smaller id), then re-ranks the shortlist exactly by ℓ2 and returns
    /// the top `k`.
    pub fn query(&self, z: &[f64], k: usize, shortlist_size: usize) -> Result<Vec<u32>> {
        if k == 0 || k > shortlist_size || shortlist_size > self.num_points() {
            return Err(Error::param(format!(
                "need 1 ≤ k ≤ shortlist ≤ N, got k={k} shortlist={shortlist_size} N={}",
                self.num_points()
            )));
        }
        let query_code = self.encode_query(z)?;
        let scores = self.scores_for_code(&query_code)?;
        let shortlist = shortlist_by_score(&scores, shortlist_size);
        Ok(rerank_l2(&self.originals, z, &shortlist, k))
    }
}

/// Top ids by (score descending, id ascending).
fn shortlist_by_score(scores: &[i64], shortlist_size: usize) -> Vec<u32> {
    let mut ids: Vec<u32> = (0..scores.len() as u32).collect();
    ids.sort_by(|&a, &b| {
        scores[b as usize]
            .cmp(&scores[a as usize])
            .then(a.cmp(&b))
    });
    ids.truncate(shortlist_size);
    ids
}

/// Exact squared-ℓ2 re-rank, ties to the smaller id.
fn rerank_l2(originals: &DenseMatrix, z: &[f64], ids: &[u32], k: usize) -> Vec<u32> {
    let mut scored: Vec<(f64, u32)> = ids
        .iter()
        .map(|&id| (squared_distance(z, originals.row(id as usize)), id))
        .collect();
    scored.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    scored.into_iter().take(k).map(|(_, id)| id).collect()
}

/// Block-decomposed binarized index: an independent `AnnIndex` per
/// coordinate block. Total score of a candidate is the sum of its per-block
/// code scores, which equals the concatenated-code inner product exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductAnnIndex {
    blocks: BlockPartition,
    per_block: Vec<AnnIndex>,
}

impl ProductAnnIndex {
    /// Builds one per-block index. `dictionaries[b]` must match block b's
    /// width; `lambdas[b]` is that block's encoder parameter.
    pub fn build(
        blocks: BlockPartition,
        database: &DenseMatrix,
        dictionaries: Vec<Dictionary>,
        lambdas: &[f64],
    ) -> Result<Self> {
        if blocks.dim() != database.cols() {
            return Err(Error::dim(
                "ProductAnnIndex::build",
                database.cols(),
                blocks.dim(),
            ));
        }
        if dictionaries.len() != blocks.num_blocks() || lambdas.len() != blocks.num_blocks() {
            return Err(Error::param(
                "one dictionary and one lambda required per block",
            ));
        }
        let mut per_block = Vec::with_capacity(blocks.num_blocks());
        for ((b, dict), &lambda) in dictionaries.into_iter().enumerate().zip(lambdas) {
            let block = blocks.blocks()[b];
            if dict.signal_dim() != block.width {
                return Err(Error::dim(
                    "ProductAnnIndex block dictionary",
                    block.width,
                    dict.signal_dim(),
                ));
            }
            let mut sliced = Vec::with_capacity(database.rows() * block.width);
            for row in database.iter_rows() {
                sliced.extend_from_slice(&row[block.offset..block.offset + block.width]);
            }
            let sliced = DenseMatrix::from_vec(database.rows(), block.width, sliced)?;
            per_block.push(AnnIndex::build(dict, sliced, lambda)?);
        }
        Ok(ProductAnnIndex { blocks, per_block })
    }

    pub fn blocks(&self) -> &BlockPartition {
        &self.blocks
    }

    pub fn per_block(&self) -> &[AnnIndex] {
        &self.per_block
    }

    pub fn num_points(&self) -> usize {
        self.per_block[0].num_points()
    }

    fn check_query(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.blocks.dim() {
            return Err(Error::dim("ProductAnnIndex query", self.blocks.dim(), z.len()));
        }
        Ok(())
    }

    /// Per-block packed codes of the query.
    pub fn encode_query(&self, z: &[f64]) -> Result<Vec<Vec<u64>>> {
        self.check_query(z)?;
        self.per_block
            .iter()
            .enumerate()
            .map(|(b, index)| index.encode_query(self.blocks.slice(z, b)))
            .collect()
    }

    /// Summed per-block scores for precomputed block codes (the memoizable
    /// score tables: each block's table depends only on that block's code).
    pub fn scores_for_codes(&self, block_codes: &[Vec<u64>]) -> Result<Vec<i64>> {
        if block_codes.len() != self.per_block.len() {
            return Err(Error::param("one code required per block"));
        }
        let mut totals = vec![0i64; self.num_points()];
        for (index, code) in self.per_block.iter().zip(block_codes) {
            for (total, score) in totals.iter_mut().zip(index.scores_for_code(code)?) {
                *total += score;
            }
        }
        Ok(totals)
    }

    fn exact_squared_distance(&self, z: &[f64], id: u32) -> f64 {
        // Blocks tile the coordinates, so ambient squared ℓ2 is the sum of
        // the per-block squared distances over the sliced originals.
        self.per_block
            .iter()
            .enumerate()
            .map(|(b, index)| {
                squared_distance(self.blocks.slice(z, b), index.originals().row(id as usize))
            })
            .sum()
    }

    pub fn query(&self, z: &[f64], k: usize, shortlist_size: usize) -> Result<Vec<u32>> {
        if k == 0 || k > shortlist_size || shortlist_size > self.num_points() {
            return Err(Error::param(format!(
                "need 1 ≤ k ≤ shortlist ≤ N, got k={k} shortlist={shortlist_size} N={}",
                self.num_points()
            )));
        }
        let block_codes = self.encode_query(z)?;
        let totals = self.scores_for_codes(&block_codes)?;
        let shortlist = shortlist_by_score(&totals, shortlist_size);
        let mut scored: Vec<(f64, u32)> = shortlist
            .iter()
            .map(|&id| (self.exact_squared_distance(z, id), id))
            .collect();
        scored.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        Ok(scored.into_iter().take(k).map(|(_, id)| id).collect())
    }

    /// Batch querying that memoizes per-block score tables across queries
    /// sharing a block code (the reusable substructure of the block
    /// decomposition). Results are identical to per-query [`Self::query`].
    pub fn query_batch(
        &self,
        queries: &DenseMatrix,
        k: usize,
        shortlist_size: usize,
    ) -> Result<Vec<Vec<u32>>> {
        use std::collections::HashMap;
        if k == 0 || k > shortlist_size || shortlist_size > self.num_points() {
            return Err(Error::param(format!(
                "need 1 ≤ k ≤ shortlist ≤ N, got k={k} shortlist={shortlist_size} N={}",
                self.num_points()
            )));
        }
        let mut tables: Vec<HashMap<Vec<u64>, Vec<i64>>> =
            vec![HashMap::new(); self.per_block.len()];
        let mut out = Vec::with_capacity(queries.rows());
        for q in queries.iter_rows() {
            let block_codes = self.encode_query(q)?;
            let mut totals = vec![0i64; self.num_points()];
            for ((b, index), code) in self.per_block.iter().enumerate().zip(&block_codes) {
                let scores = match tables[b].get(code) {
                    Some(cached) => cached,
                    None => {
                        let fresh = index.scores_for_code(code)?;
                        tables[b].entry(code.clone()).or_insert(fresh)
                    }
                };
                for (total, score) in totals.iter_mut().zip(scores) {
                    *total += score;
                }
            }
            let shortlist = shortlist_by_score(&totals, shortlist_size);
            let mut scored: Vec<(f64, u32)> = shortlist
                .iter()
                .map(|&id| (self.exact_squared_distance(q, id), id))
                .collect();
            scored.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            out.push(scored.into_iter().take(k).map(|(_, id)| id).collect());
        }
        Ok(out)
    }
}
