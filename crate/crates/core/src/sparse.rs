//! Sparse coding: overcomplete dictionaries with unit-norm atoms, layered
//! soft/hard thresholding encoders, an iterative-shrinkage basis-pursuit
//! solver with a monotone objective, and composite dictionaries built either
//! as a direct sum (block diagonal) or as normalized atom pairs with
//! usage-based pruning.

use crate::error::{Error, Result};
use crate::numerics::{
    dot, hard_threshold, l2_norm, soft_threshold, soft_threshold_scalar, spectral_norm_sq,
    DenseMatrix, SeededRng,
};

pub const BP_DEFAULT_MAX_ITERS: usize = 5000;
pub const BP_DEFAULT_TOL: f64 = 1e-8;

const ATOM_NORM_TOL: f64 = 1e-10;

/// Dictionary of `m` unit-ℓ2 atoms in R^n (columns of the n×m map, stored
/// internally one atom per row for contiguous access). `m > n` is the
/// typical overcomplete regime; square and undercomplete are allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    /// m×n matrix, one atom per row.
    atoms: DenseMatrix,
}

impl Dictionary {
    /// Builds from an m×n matrix with one unit-norm atom per row.
    pub fn from_atom_rows(atoms: DenseMatrix) -> Result<Self> {
        for (i, row) in atoms.iter_rows().enumerate() {
            let norm = l2_norm(row);
            if (norm - 1.0).abs() > ATOM_NORM_TOL {
                return Err(Error::param(format!(
                    "atom {i} must have unit norm, got {norm}"
                )));
            }
        }
        Ok(Dictionary { atoms })
    }

    /// Builds from the conventional n×m columns-as-atoms layout.
    pub fn from_columns(matrix: &DenseMatrix) -> Result<Self> {
        Self::from_atom_rows(matrix.transpose())
    }

    pub fn identity(n: usize) -> Self {
        Dictionary {
            atoms: DenseMatrix::identity(n),
        }
    }

    /// Random dictionary with independently drawn, normalized Gaussian atoms.
    pub fn random_gaussian(n: usize, m: usize, rng: &mut SeededRng) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::param("dictionary dims must be positive"));
        }
        let mut data = Vec::with_capacity(m * n);
        for _ in 0..m {
            data.extend(rng.unit_vector(n));
        }
        Ok(Dictionary {
            atoms: DenseMatrix::from_vec(m, n, data)?,
        })
    }

    /// Random orthonormal square dictionary via Gram–Schmidt on Gaussian
    /// draws.
    pub fn random_orthonormal(n: usize, rng: &mut SeededRng) -> Result<Self> {
        if n == 0 {
            return Err(Error::param("dictionary dims must be positive"));
        }
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
        while rows.len() < n {
            let mut v = rng.normal_vec(n);
            for prev in &rows {
                let proj = dot(&v, prev);
                for (vi, pi) in v.iter_mut().zip(prev) {
                    *vi -= proj * pi;
                }
            }
            let norm = l2_norm(&v);
            if norm < 1e-8 {
                continue; // numerically dependent draw; redraw
            }
            v.iter_mut().for_each(|x| *x /= norm);
            rows.push(v);
        }
        Ok(Dictionary {
            atoms: DenseMatrix::from_rows(rows)?,
        })
    }

    /// Atoms sampled (without replacement) from normalized data rows.
    pub fn from_sampled_rows(
        data: &DenseMatrix,
        m: usize,
        rng: &mut SeededRng,
    ) -> Result<Self> {
        if m == 0 || m > data.rows() {
            return Err(Error::param(format!(
                "need 1 ≤ m ≤ {} sampled atoms, got {m}",
                data.rows()
            )));
        }
        let mut ids: Vec<usize> = (0..data.rows()).collect();
        rng.shuffle(&mut ids);
        let mut rows = Vec::with_capacity(m);
        for &i in &ids {
            let norm = l2_norm(data.row(i));
            if norm < 1e-10 {
                continue; // zero rows cannot become atoms
            }
            rows.push(data.row(i).iter().map(|x| x / norm).collect::<Vec<f64>>());
            if rows.len() == m {
                break;
            }
        }
        if rows.len() < m {
            return Err(Error::param("not enough nonzero rows to sample atoms"));
        }
        Ok(Dictionary {
            atoms: DenseMatrix::from_rows(rows)?,
        })
    }

    pub fn signal_dim(&self) -> usize {
        self.atoms.cols()
    }

    pub fn num_atoms(&self) -> usize {
        self.atoms.rows()
    }

    pub fn atom(&self, i: usize) -> &[f64] {
        self.atoms.row(i)
    }

    pub fn atoms_matrix(&self) -> &DenseMatrix {
        &self.atoms
    }

    /// `D·α`: superposition of atoms weighted by the coefficients.
    pub fn apply(&self, alpha: &[f64]) -> Result<Vec<f64>> {
        self.atoms.transpose_vec(alpha).map_err(|_| {
            Error::dim("Dictionary::apply", self.num_atoms(), alpha.len())
        })
    }

    /// `Dᵀ·x`: correlation of the signal with every atom.
    pub fn analyze(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.atoms.mat_vec(x).map_err(|_| {
            Error::dim("Dictionary::analyze", self.signal_dim(), x.len())
        })
    }

    /// Appends a new atom (normalized); returns its index.
    pub fn push_atom(&mut self, atom: &[f64]) -> Result<usize> {
        if atom.len() != self.signal_dim() {
            return Err(Error::dim("Dictionary::push_atom", self.signal_dim(), atom.len()));
        }
        let norm = l2_norm(atom);
        if norm < 1e-10 {
            return Err(Error::param("cannot add a zero atom"));
        }
        let normalized: Vec<f64> = atom.iter().map(|x| x / norm).collect();
        self.atoms.push_row(&normalized)?;
        Ok(self.num_atoms() - 1)
    }

    /// Upper bound on λ_max(DᵀD) (= squared spectral norm of the atom
    /// matrix), used for gradient step sizes.
    pub(crate) fn gram_bound(&self) -> f64 {
        spectral_norm_sq(&self.atoms, 60)
    }
}

/// Coefficient vector produced by an encoder; zeros are exact.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseCode {
    coefficients: Vec<f64>,
}

impl SparseCode {
    pub fn new(coefficients: Vec<f64>) -> Self {
        SparseCode { coefficients }
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn into_coefficients(self) -> Vec<f64> {
        self.coefficients
    }

    /// Indices of the nonzero coefficients, ascending.
    pub fn support(&self) -> Vec<usize> {
        self.coefficients
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != 0.0)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn sparsity(&self) -> usize {
        self.coefficients.iter().filter(|&&c| c != 0.0).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThresholdVariant {
    Soft,
    Hard,
}

/// One thresholding layer: `P_beta(Dᵀx)`.
pub fn encode_threshold(
    dictionary: &Dictionary,
    x: &[f64],
    beta: f64,
    variant: ThresholdVariant,
) -> Result<SparseCode> {
    let correlations = dictionary.analyze(x)?;
    let coefficients = match variant {
        ThresholdVariant::Soft => soft_threshold(&correlations, beta)?,
        ThresholdVariant::Hard => hard_threshold(&correlations, beta)?,
    };
    Ok(SparseCode::new(coefficients))
}

/// Chain of dictionaries with per-layer scalar thresholds. Layer k maps the
/// previous layer's coefficients through `P_{β_k}(D_kᵀ ·)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MLCSCStack {
    dictionaries: Vec<Dictionary>,
    thresholds: Vec<f64>,
    variant: ThresholdVariant,
}

impl MLCSCStack {
    pub fn new(
        dictionaries: Vec<Dictionary>,
        thresholds: Vec<f64>,
        variant: ThresholdVariant,
    ) -> Result<Self> {
        if dictionaries.is_empty() {
            return Err(Error::EmptyInput("MLCSCStack::new"));
        }
        if dictionaries.len() != thresholds.len() {
            return Err(Error::dim(
                "MLCSCStack thresholds",
                dictionaries.len(),
                thresholds.len(),
            ));
        }
        if thresholds.iter().any(|&b| b < 0.0 || !b.is_finite()) {
            return Err(Error::param("thresholds must be finite and nonnegative"));
        }
        for pair in dictionaries.windows(2) {
            if pair[1].signal_dim() != pair[0].num_atoms() {
                return Err(Error::dim(
                    "MLCSCStack chain",
                    pair[0].num_atoms(),
                    pair[1].signal_dim(),
                ));
            }
        }
        Ok(MLCSCStack {
            dictionaries,
            thresholds,
            variant,
        })
    }

    pub fn depth(&self) -> usize {
        self.dictionaries.len()
    }

    pub fn dictionaries(&self) -> &[Dictionary] {
        &self.dictionaries
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn variant(&self) -> ThresholdVariant {
        self.variant
    }

    /// Runs the layered recursion and returns the codes of every layer,
    /// shallow to deep.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<SparseCode>> {
        let mut codes = Vec::with_capacity(self.depth());
        let mut current = x.to_vec();
        for (dict, &beta) in self.dictionaries.iter().zip(&self.thresholds) {
            let code = encode_threshold(dict, &current, beta, self.variant)?;
            current = code.coefficients().to_vec();
            codes.push(code);
        }
        Ok(codes)
    }

    /// Maps a deepest-layer code back to signal space: `D_1·D_2·…·D_K·Γ_K`.
    pub fn reconstruct(&self, deepest: &[f64]) -> Result<Vec<f64>> {
        let mut current = deepest.to_vec();
        for dict in self.dictionaries.iter().rev() {
            current = dict.apply(&current)?;
        }
        Ok(current)
    }
}

/// Consecutive sub-`tol` iterations required before the solver stops. The
/// accelerated loop interleaves momentum steps whose accepted objective can
/// tie the incumbent mid-run, so a single small decrease is not evidence of
/// convergence the way it is for plain gradient descent.
const LASSO_STALL_ITERS: usize = 8;

/// Monotone accelerated proximal-gradient loop for ½‖Dα−x‖² + λ‖α‖₁ with
/// fixed step 1/L. Each iteration shrinks from a momentum look-ahead point;
/// a candidate that improves the incumbent is accepted and extrapolated,
/// while an overshooting one restarts the momentum at the incumbent. The
/// accepted objective is therefore non-increasing by construction, and the
/// momentum keeps the fast rate on coherent dictionaries, where unaccelerated
/// shrinkage needs orders of magnitude more iterations to push the residual
/// down to its optimality bound. Returns the coefficients and the objective
/// value after every accepted iterate (index 0 = initial).
pub(crate) fn accelerated_lasso(
    dictionary: &Dictionary,
    x: &[f64],
    lambda: f64,
    max_iters: usize,
    tol: f64,
    gram_bound: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let m = dictionary.num_atoms();
    let objective = |alpha: &[f64]| -> Result<f64> {
        let residual: Vec<f64> = dictionary
            .apply(alpha)?
            .iter()
            .zip(x)
            .map(|(r, t)| r - t)
            .collect();
        Ok(0.5 * dot(&residual, &residual)
            + lambda * alpha.iter().map(|a| a.abs()).sum::<f64>())
    };

    // Unit atoms force λ_max(DᵀD) ≥ 1; guard anyway.
    let step = 1.0 / gram_bound.max(1e-12);
    let mut accepted = vec![0.0; m];
    let mut lookahead = accepted.clone();
    let mut momentum = 1.0_f64;
    let mut prev = objective(&accepted)?;
    let mut trace = vec![prev];
    let mut stall = 0usize;
    for _ in 0..max_iters {
        let residual: Vec<f64> = dictionary
            .apply(&lookahead)?
            .iter()
            .zip(x)
            .map(|(r, t)| r - t)
            .collect();
        let gradient = dictionary.analyze(&residual)?;
        let candidate: Vec<f64> = lookahead
            .iter()
            .zip(&gradient)
            .map(|(a, g)| soft_threshold_scalar(a - step * g, lambda * step))
            .collect();
        let candidate_obj = objective(&candidate)?;
        let next_obj;
        if candidate_obj <= prev {
            let momentum_next = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
            let weight = (momentum - 1.0) / momentum_next;
            for i in 0..m {
                lookahead[i] = candidate[i] + weight * (candidate[i] - accepted[i]);
            }
            accepted = candidate;
            momentum = momentum_next;
            next_obj = candidate_obj;
        } else {
            // Momentum overshot: restart the look-ahead at the incumbent so
            // the next candidate is a plain descent step, which cannot fail
            // again under the 1/L majorization.
            lookahead.copy_from_slice(&accepted);
            momentum = 1.0;
            next_obj = prev;
        }
        trace.push(next_obj);
        let decrease = prev - next_obj;
        if decrease <= tol * prev.max(f64::MIN_POSITIVE) {
            stall += 1;
        } else {
            stall = 0;
        }
        prev = next_obj;
        if stall >= LASSO_STALL_ITERS {
            break;
        }
    }
    Ok((accepted, trace))
}

/// ℓ1-regularized sparse coding (basis pursuit denoising form) by monotone
/// accelerated iterative shrinkage. The objective is non-increasing across
/// iterations.
pub fn basis_pursuit(
    dictionary: &Dictionary,
    x: &[f64],
    lambda: f64,
    max_iters: usize,
    tol: f64,
) -> Result<SparseCode> {
    basis_pursuit_trace(dictionary, x, lambda, max_iters, tol).map(|(code, _)| code)
}

/// Same as [`basis_pursuit`] but also returns the per-iteration objective
/// values so callers can audit monotonicity.
pub fn basis_pursuit_trace(
    dictionary: &Dictionary,
    x: &[f64],
    lambda: f64,
    max_iters: usize,
    tol: f64,
) -> Result<(SparseCode, Vec<f64>)> {
    if lambda <= 0.0 || !lambda.is_finite() {
        return Err(Error::param("basis_pursuit: lambda must be positive"));
    }
    if x.len() != dictionary.signal_dim() {
        return Err(Error::dim(
            "basis_pursuit",
            dictionary.signal_dim(),
            x.len(),
        ));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("basis_pursuit"));
    }
    let bound = dictionary.gram_bound();
    let (alpha, trace) = accelerated_lasso(dictionary, x, lambda, max_iters, tol, bound)?;
    Ok((SparseCode::new(alpha), trace))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompositionMode {
    DirectSum,
    ProductAtoms,
}

/// Dictionary over the stacked space R^{n_x+n_y} assembled from two parents.
///
/// `DirectSum` lays the parents out block-diagonally (m_x + m_y atoms), so
/// encoding splits into independent per-block problems. `ProductAtoms`
/// stacks one atom from each parent, `[d_x; d_y]/√2`, keeping at most
/// `max_atoms` pairs; `provenance` records each kept pair.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeDictionary {
    mode: CompositionMode,
    dictionary: Dictionary,
    provenance: Vec<(usize, usize)>,
    x_dim: usize,
    y_dim: usize,
    x_atoms: usize,
    y_atoms: usize,
}

impl CompositeDictionary {
    pub fn mode(&self) -> CompositionMode {
        self.mode
    }

    pub fn dictionary(&self) -> &Dictionary {
        &self.dictionary
    }

    /// Parent-pair indices per atom (`ProductAtoms` only; empty otherwise).
    pub fn provenance(&self) -> &[(usize, usize)] {
        &self.provenance
    }

    pub fn x_dim(&self) -> usize {
        self.x_dim
    }

    pub fn y_dim(&self) -> usize {
        self.y_dim
    }
}

/// Block-diagonal composition: atoms `[d_x; 0]` and `[0; d_y]`.
pub fn compose_direct_sum(dx: &Dictionary, dy: &Dictionary) -> Result<CompositeDictionary> {
    let (nx, ny) = (dx.signal_dim(), dy.signal_dim());
    let dim = nx + ny;
    let mut rows = Vec::with_capacity(dx.num_atoms() + dy.num_atoms());
    for i in 0..dx.num_atoms() {
        let mut row = vec![0.0; dim];
        row[..nx].copy_from_slice(dx.atom(i));
        rows.push(row);
    }
    for j in 0..dy.num_atoms() {
        let mut row = vec![0.0; dim];
        row[nx..].copy_from_slice(dy.atom(j));
        rows.push(row);
    }
    Ok(CompositeDictionary {
        mode: CompositionMode::DirectSum,
        dictionary: Dictionary::from_atom_rows(DenseMatrix::from_rows(rows)?)?,
        provenance: Vec::new(),
        x_dim: nx,
        y_dim: ny,
        x_atoms: dx.num_atoms(),
        y_atoms: dy.num_atoms(),
    })
}

/// Paired composition: atoms `[d_{x,i}; d_{y,j}]/√2` for selected pairs.
///
/// With `m_x·m_y ≤ max_atoms` every pair is kept (row-major pair order).
/// Otherwise pairs are ranked by co-activation mass — Σ over training
/// signals of |α_x,i|·|α_y,j| from independent per-half basis-pursuit
/// encodings — and the top `max_atoms` survive (ties toward the smaller
/// pair). Pruning therefore requires a nonempty training sample.
pub fn compose_product_atoms(
    dx: &Dictionary,
    dy: &Dictionary,
    max_atoms: usize,
    training: Option<&DenseMatrix>,
    lambda: f64,
) -> Result<CompositeDictionary> {
    if max_atoms == 0 {
        return Err(Error::param("max_atoms must be at least 1"));
    }
    let (nx, ny) = (dx.signal_dim(), dy.signal_dim());
    let (mx, my) = (dx.num_atoms(), dy.num_atoms());
    let total = mx * my;

    let kept: Vec<(usize, usize)> = if total <= max_atoms {
        (0..mx).flat_map(|i| (0..my).map(move |j| (i, j))).collect()
    } else {
        let training = training
            .filter(|t| t.rows() > 0)
            .ok_or(Error::EmptyInput("compose_product_atoms pruning sample"))?;
        if training.cols() != nx + ny {
            return Err(Error::dim(
                "compose_product_atoms training",
                nx + ny,
                training.cols(),
            ));
        }
        let mut usage = vec![0.0f64; total];
        for row in training.iter_rows() {
            let ax = basis_pursuit(dx, &row[..nx], lambda, BP_DEFAULT_MAX_ITERS, BP_DEFAULT_TOL)?;
            let ay = basis_pursuit(dy, &row[nx..], lambda, BP_DEFAULT_MAX_ITERS, BP_DEFAULT_TOL)?;
            for (i, &cx) in ax.coefficients().iter().enumerate() {
                if cx == 0.0 {
                    continue;
                }
                for (j, &cy) in ay.coefficients().iter().enumerate() {
                    if cy != 0.0 {
                        usage[i * my + j] += cx.abs() * cy.abs();
                    }
                }
            }
        }
        let mut ranked: Vec<usize> = (0..total).collect();
        ranked.sort_by(|&a, &b| {
            usage[b]
                .partial_cmp(&usage[a])
                .unwrap()
                .then(a.cmp(&b))
        });
        let mut kept: Vec<(usize, usize)> =
            ranked[..max_atoms].iter().map(|&p| (p / my, p % my)).collect();
        kept.sort_unstable();
        kept
    };

    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    let rows: Vec<Vec<f64>> = kept
        .iter()
        .map(|&(i, j)| {
            let mut row = Vec::with_capacity(nx + ny);
            row.extend(dx.atom(i).iter().map(|v| v * inv_sqrt2));
            row.extend(dy.atom(j).iter().map(|v| v * inv_sqrt2));
            row
        })
        .collect();
    Ok(CompositeDictionary {
        mode: CompositionMode::ProductAtoms,
        dictionary: Dictionary::from_atom_rows(DenseMatrix::from_rows(rows)?)?,
        provenance: kept,
        x_dim: nx,
        y_dim: ny,
        x_atoms: mx,
        y_atoms: my,
    })
}

/// Basis pursuit against a composite dictionary. Deeper hierarchies come
/// from composing composites (each level re-normalizes its stacked atoms).
pub fn hierarchical_csc_encode(
    signal: &[f64],
    composite: &CompositeDictionary,
    lambda: f64,
) -> Result<SparseCode> {
    basis_pursuit(
        composite.dictionary(),
        signal,
        lambda,
        BP_DEFAULT_MAX_ITERS,
        BP_DEFAULT_TOL,
    )
}
