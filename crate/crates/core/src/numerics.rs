//! Stateless numerical kernels shared by every other module: validated dense
//! containers, thresholding and proximal operators, ℓ1-ball projection, and a
//! seeded, platform-stable random generator.

use std::ops::Deref;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// A finite-valued vector of `f64`. Construction validates every entry, so
/// downstream code can assume the absence of NaN/inf.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
#[serde(transparent)]
pub struct DenseVector(Vec<f64>);

impl DenseVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput("DenseVector::new"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("DenseVector::new"));
        }
        Ok(DenseVector(values))
    }

    pub fn zeros(dim: usize) -> Self {
        DenseVector(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for DenseVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl AsRef<[f64]> for DenseVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Row-major matrix of finite `f64` values.
///
/// Rows are the natural unit of access throughout the crate (points of a
/// dataset, atoms of a dictionary), so the layout keeps each row contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if cols == 0 {
            return Err(Error::param("DenseMatrix must have at least one column"));
        }
        if data.len() != rows * cols {
            return Err(Error::dim("DenseMatrix::from_vec", rows * cols, data.len()));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("DenseMatrix::from_vec"));
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let nrows = rows.len();
        if nrows == 0 {
            return Err(Error::EmptyInput("DenseMatrix::from_rows"));
        }
        let ncols = rows[0].len();
        let mut data = Vec::with_capacity(nrows * ncols);
        for row in &rows {
            if row.len() != ncols {
                return Err(Error::dim("DenseMatrix::from_rows", ncols, row.len()));
            }
            data.extend_from_slice(row);
        }
        Self::from_vec(nrows, ncols, data)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.data[i * self.cols + j]).collect()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Appends a row; the matrix grows by one row in O(cols).
    pub fn push_row(&mut self, row: &[f64]) -> Result<()> {
        if row.len() != self.cols {
            return Err(Error::dim("DenseMatrix::push_row", self.cols, row.len()));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("DenseMatrix::push_row"));
        }
        self.data.extend_from_slice(row);
        self.rows += 1;
        Ok(())
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    /// `A · x` for `x` of length `cols`.
    pub fn mat_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::dim("mat_vec", self.cols, x.len()));
        }
        Ok(self.iter_rows().map(|row| dot(row, x)).collect())
    }

    /// `Aᵀ · x` for `x` of length `rows`, computed without materializing the
    /// transpose (row-wise axpy keeps the access pattern contiguous).
    pub fn transpose_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.rows {
            return Err(Error::dim("transpose_vec", self.rows, x.len()));
        }
        let mut out = vec![0.0; self.cols];
        for (row, &xi) in self.iter_rows().zip(x) {
            if xi != 0.0 {
                for (o, &r) in out.iter_mut().zip(row) {
                    *o += xi * r;
                }
            }
        }
        Ok(out)
    }

    pub fn mat_mul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.rows {
            return Err(Error::dim("mat_mul", self.cols, other.rows));
        }
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let orow = other.row(k);
                let dst = out.row_mut(i);
                for (d, &b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }
}

/// Seeded ChaCha8-based generator. The algorithm is fixed so that a given
/// seed yields the identical stream on every platform and build.
#[derive(Debug, Clone)]
pub struct SeededRng {
    seed: u64,
    rng: ChaCha8Rng,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        SeededRng {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Derives an independent generator keyed by `salt`. Derivation depends
    /// only on the original seed, not on how much of this stream was consumed.
    pub fn derive(&self, salt: u64) -> SeededRng {
        SeededRng::new(mix_seed(self.seed, salt))
    }

    /// Standard normal draw.
    pub fn normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    pub fn normal_vec(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.normal()).collect()
    }

    /// Uniformly random direction on the unit sphere in R^n.
    pub fn unit_vector(&mut self, n: usize) -> Vec<f64> {
        loop {
            let v = self.normal_vec(n);
            if let Some(u) = normalized(&v) {
                return u;
            }
        }
    }

    pub fn uniform(&mut self, low: f64, high: f64) -> f64 {
        self.rng.random_range(low..high)
    }

    pub fn index(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    pub fn shuffle<T>(&mut self, slice: &mut [T]) {
        slice.shuffle(&mut self.rng);
    }
}

/// SplitMix64 finalizer; decorrelates derived seeds from sequential salts.
fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn l1_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

pub fn l2_norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

pub fn linf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Returns `v / ‖v‖₂`, or `None` when the norm is too small to divide by.
pub fn normalized(v: &[f64]) -> Option<Vec<f64>> {
    let n = l2_norm(v);
    if n < 1e-12 {
        None
    } else {
        Some(v.iter().map(|x| x / n).collect())
    }
}

/// Soft-thresholding of a scalar: `sign(x)·max(|x|−beta, 0)`.
pub fn soft_threshold_scalar(x: f64, beta: f64) -> f64 {
    debug_assert!(beta >= 0.0);
    if x > beta {
        x - beta
    } else if x < -beta {
        x + beta
    } else {
        0.0
    }
}

/// Hard-thresholding of a scalar: keeps `x` verbatim when `|x| > beta`.
pub fn hard_threshold_scalar(x: f64, beta: f64) -> f64 {
    debug_assert!(beta >= 0.0);
    if x.abs() > beta {
        x
    } else {
        0.0
    }
}

pub fn soft_threshold(v: &[f64], beta: f64) -> Result<Vec<f64>> {
    if beta < 0.0 {
        return Err(Error::param("soft_threshold: beta must be nonnegative"));
    }
    Ok(v.iter().map(|&x| soft_threshold_scalar(x, beta)).collect())
}

pub fn hard_threshold(v: &[f64], beta: f64) -> Result<Vec<f64>> {
    if beta < 0.0 {
        return Err(Error::param("hard_threshold: beta must be nonnegative"));
    }
    Ok(v.iter().map(|&x| hard_threshold_scalar(x, beta)).collect())
}

/// Euclidean projection onto the ℓ1 ball `{u : Σ|u_i| ≤ radius}`.
///
/// Sort-based exact algorithm: find the simplex threshold θ from the sorted
/// magnitudes, then shrink every coordinate by θ.
pub fn project_l1_ball(v: &[f64], radius: f64) -> Result<Vec<f64>> {
    if radius <= 0.0 {
        return Err(Error::param("project_l1_ball: radius must be positive"));
    }
    if l1_norm(v) <= radius {
        return Ok(v.to_vec());
    }
    let mut mags: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    mags.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &m) in mags.iter().enumerate() {
        cumsum += m;
        let candidate = (cumsum - radius) / (j + 1) as f64;
        if m - candidate > 0.0 {
            theta = candidate;
        } else {
            break;
        }
    }
    Ok(v.iter().map(|&x| soft_threshold_scalar(x, theta)).collect())
}

/// Proximal operator of `lambda·‖·‖∞` via the Moreau identity:
/// `prox(v) = v − Π_{ℓ1-ball(lambda)}(v)`.
pub fn prox_linf(v: &[f64], lambda: f64) -> Result<Vec<f64>> {
    if lambda <= 0.0 {
        return Err(Error::param("prox_linf: lambda must be positive"));
    }
    if l1_norm(v) <= lambda {
        // Projection returns v itself, so the prox collapses to the origin.
        return Ok(vec![0.0; v.len()]);
    }
    let proj = project_l1_ball(v, lambda)?;
    Ok(v.iter().zip(&proj).map(|(x, p)| x - p).collect())
}

/// Cholesky factorization of a symmetric positive-definite matrix, kept for
/// repeated right-hand-side solves.
#[derive(Debug, Clone)]
pub(crate) struct Cholesky {
    n: usize,
    /// Lower-triangular factor, row-major, full storage.
    l: Vec<f64>,
}

impl Cholesky {
    pub(crate) fn factor(a: &DenseMatrix) -> Result<Self> {
        if a.rows() != a.cols() {
            return Err(Error::dim("Cholesky::factor", a.rows(), a.cols()));
        }
        let n = a.rows();
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut s = a.get(i, j);
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                if i == j {
                    if s <= 1e-14 {
                        return Err(Error::RankDeficient(format!(
                            "non-positive pivot {s:.3e} at row {i}"
                        )));
                    }
                    l[i * n + i] = s.sqrt();
                } else {
                    l[i * n + j] = s / l[j * n + j];
                }
            }
        }
        Ok(Cholesky { n, l })
    }

    /// Solves `A x = b` via forward and back substitution.
    pub(crate) fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        debug_assert_eq!(b.len(), n);
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s -= self.l[i * n + k] * y[k];
            }
            y[i] = s / self.l[i * n + i];
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s -= self.l[k * n + i] * x[k];
            }
            x[i] = s / self.l[i * n + i];
        }
        x
    }
}

/// Squared spectral norm σ_max(A)² = λ_max(AᵀA) by power iteration with a
/// deterministic start vector. Used for gradient step sizes, where the
/// downstream solvers also carry a backtracking safeguard.
pub(crate) fn spectral_norm_sq(a: &DenseMatrix, iters: usize) -> f64 {
    let n = a.cols();
    // Deterministic, dense start so results never depend on an RNG stream.
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 1e-3 * (i as f64 + 1.0)).collect();
    let inv = 1.0 / l2_norm(&v);
    v.iter_mut().for_each(|x| *x *= inv);
    let mut lambda = 0.0;
    for _ in 0..iters {
        let av = a.mat_vec(&v).expect("spectral_norm_sq: internal dims");
        lambda = dot(&av, &av);
        let atav = a.transpose_vec(&av).expect("spectral_norm_sq: internal dims");
        match normalized(&atav) {
            Some(u) => v = u,
            None => return 0.0,
        }
    }
    lambda
}

/// Gram matrix AᵀA (cols × cols).
pub(crate) fn gram_cols(a: &DenseMatrix) -> DenseMatrix {
    let n = a.cols();
    let mut g = DenseMatrix::zeros(n, n);
    for row in a.iter_rows() {
        for i in 0..n {
            let ri = row[i];
            if ri == 0.0 {
                continue;
            }
            for j in 0..n {
                let v = g.get(i, j) + ri * row[j];
                g.set(i, j, v);
            }
        }
    }
    g
}
