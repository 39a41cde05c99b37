//! Deterministic synthetic datasets plus file-backed loading. The torus and
//! product-manifold generators exist because their factor structure lines
//! up with the per-block partition trees: each factor occupies a contiguous
//! coordinate block.

use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::io::vectors::read_vectors_file;
use crate::numerics::{DenseMatrix, SeededRng};

/// One factor of a product-manifold dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FactorCurve {
    /// Unit circle, two coordinates (cos t, sin t).
    Circle,
    /// Uniform draw from [−1, 1], one coordinate.
    Segment,
}

impl FactorCurve {
    pub fn width(&self) -> usize {
        match self {
            FactorCurve::Circle => 2,
            FactorCurve::Segment => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DatasetKind {
    /// Isotropic Gaussian blobs around randomly placed centers; points are
    /// assigned to clusters round-robin and labeled.
    GaussianClusters { num_clusters: usize },
    /// The interleaved half-circles in the first two coordinates (labeled
    /// by moon); extra coordinates carry only noise.
    TwoMoons,
    /// Circle × circle embedded in R⁴: (cos θ, sin θ, cos φ, sin φ).
    Torus,
    /// Configurable product of factor curves laid out block by block.
    ProductManifold { factors: Vec<FactorCurve> },
    /// Points loaded verbatim from an fvecs or CSV file; `noise_sigma` and
    /// `seed` are ignored, and nonzero `n_points`/`dim` act as checks.
    FromFile { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSpec {
    pub kind: DatasetKind,
    pub n_points: usize,
    pub dim: usize,
    pub noise_sigma: f64,
    pub seed: u64,
}

/// Generated points plus per-point labels where the kind defines them.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub points: DenseMatrix,
    pub labels: Option<Vec<usize>>,
}

/// Deterministic generation: equal specs produce identical datasets.
pub fn generate(spec: &DatasetSpec) -> Result<Dataset> {
    if !spec.noise_sigma.is_finite() || spec.noise_sigma < 0.0 {
        return Err(Error::param("noise_sigma must be finite and nonnegative"));
    }
    if let DatasetKind::FromFile { path } = &spec.kind {
        let points = read_vectors_file(path)?;
        if spec.n_points != 0 && spec.n_points != points.rows() {
            return Err(Error::param(format!(
                "file holds {} points, spec expects {}",
                points.rows(),
                spec.n_points
            )));
        }
        if spec.dim != 0 && spec.dim != points.cols() {
            return Err(Error::dim("FromFile", spec.dim, points.cols()));
        }
        return Ok(Dataset {
            points,
            labels: None,
        });
    }
    if spec.n_points == 0 {
        return Err(Error::param("n_points must be positive"));
    }
    let mut rng = SeededRng::new(spec.seed);
    match &spec.kind {
        DatasetKind::GaussianClusters { num_clusters } => {
            gaussian_clusters(spec, *num_clusters, &mut rng)
        }
        DatasetKind::TwoMoons => two_moons(spec, &mut rng),
        DatasetKind::Torus => torus(spec, &mut rng),
        DatasetKind::ProductManifold { factors } => product_manifold(spec, factors, &mut rng),
        DatasetKind::FromFile { .. } => unreachable!("handled above"),
    }
}

fn gaussian_clusters(
    spec: &DatasetSpec,
    num_clusters: usize,
    rng: &mut SeededRng,
) -> Result<Dataset> {
    if spec.dim == 0 {
        return Err(Error::param("GaussianClusters needs dim ≥ 1"));
    }
    if num_clusters == 0 || num_clusters > spec.n_points {
        return Err(Error::param(format!(
            "need 1 ≤ num_clusters ≤ n_points, got {num_clusters}"
        )));
    }
    let centers: Vec<Vec<f64>> = (0..num_clusters)
        .map(|_| rng.normal_vec(spec.dim).iter().map(|v| 4.0 * v).collect())
        .collect();
    let mut data = Vec::with_capacity(spec.n_points * spec.dim);
    let mut labels = Vec::with_capacity(spec.n_points);
    for i in 0..spec.n_points {
        let cluster = i % num_clusters;
        for c in 0..spec.dim {
            data.push(centers[cluster][c] + spec.noise_sigma * rng.normal());
        }
        labels.push(cluster);
    }
    Ok(Dataset {
        points: DenseMatrix::from_vec(spec.n_points, spec.dim, data)?,
        labels: Some(labels),
    })
}

fn two_moons(spec: &DatasetSpec, rng: &mut SeededRng) -> Result<Dataset> {
    if spec.dim < 2 {
        return Err(Error::param("TwoMoons needs dim ≥ 2"));
    }
    let mut data = Vec::with_capacity(spec.n_points * spec.dim);
    let mut labels = Vec::with_capacity(spec.n_points);
    for i in 0..spec.n_points {
        let moon = i % 2;
        let t = rng.uniform(0.0, std::f64::consts::PI);
        let (x, y) = if moon == 0 {
            (t.cos(), t.sin())
        } else {
            (1.0 - t.cos(), 0.5 - t.sin())
        };
        data.push(x + spec.noise_sigma * rng.normal());
        data.push(y + spec.noise_sigma * rng.normal());
        for _ in 2..spec.dim {
            data.push(spec.noise_sigma * rng.normal());
        }
        labels.push(moon);
    }
    Ok(Dataset {
        points: DenseMatrix::from_vec(spec.n_points, spec.dim, data)?,
        labels: Some(labels),
    })
}

fn torus(spec: &DatasetSpec, rng: &mut SeededRng) -> Result<Dataset> {
    if spec.dim != 4 {
        return Err(Error::dim("Torus", 4, spec.dim));
    }
    let tau = std::f64::consts::TAU;
    let mut data = Vec::with_capacity(spec.n_points * 4);
    for _ in 0..spec.n_points {
        let theta = rng.uniform(0.0, tau);
        let phi = rng.uniform(0.0, tau);
        for base in [theta.cos(), theta.sin(), phi.cos(), phi.sin()] {
            data.push(base + spec.noise_sigma * rng.normal());
        }
    }
    Ok(Dataset {
        points: DenseMatrix::from_vec(spec.n_points, 4, data)?,
        labels: None,
    })
}

fn product_manifold(
    spec: &DatasetSpec,
    factors: &[FactorCurve],
    rng: &mut SeededRng,
) -> Result<Dataset> {
    if factors.is_empty() {
        return Err(Error::EmptyInput("ProductManifold factors"));
    }
    let width: usize = factors.iter().map(FactorCurve::width).sum();
    if spec.dim != width {
        return Err(Error::dim("ProductManifold", width, spec.dim));
    }
    let tau = std::f64::consts::TAU;
    let mut data = Vec::with_capacity(spec.n_points * width);
    for _ in 0..spec.n_points {
        for factor in factors {
            match factor {
                FactorCurve::Circle => {
                    let t = rng.uniform(0.0, tau);
                    data.push(t.cos() + spec.noise_sigma * rng.normal());
                    data.push(t.sin() + spec.noise_sigma * rng.normal());
                }
                FactorCurve::Segment => {
                    data.push(rng.uniform(-1.0, 1.0) + spec.noise_sigma * rng.normal());
                }
            }
        }
    }
    Ok(Dataset {
        points: DenseMatrix::from_vec(spec.n_points, width, data)?,
        labels: None,
    })
}

/// Uniform draws over the axis-aligned bounding box of `reference`, expanded
/// by `margin` times each coordinate's range on both sides. The standard
/// background distribution that novelty scores are evaluated against:
/// overwhelmingly off-manifold, yet overlapping the data's scale.
pub fn uniform_background(
    reference: &DenseMatrix,
    n_points: usize,
    margin: f64,
    seed: u64,
) -> Result<DenseMatrix> {
    if reference.rows() == 0 {
        return Err(Error::EmptyInput("uniform_background"));
    }
    if n_points == 0 {
        return Err(Error::param("n_points must be positive"));
    }
    if !margin.is_finite() || margin < 0.0 {
        return Err(Error::param("margin must be finite and nonnegative"));
    }
    let dim = reference.cols();
    let mut bounds = Vec::with_capacity(dim);
    for c in 0..dim {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for row in reference.iter_rows() {
            lo = lo.min(row[c]);
            hi = hi.max(row[c]);
        }
        let pad = margin * (hi - lo);
        bounds.push((lo - pad, hi + pad));
    }
    let mut rng = SeededRng::new(seed);
    let mut data = Vec::with_capacity(n_points * dim);
    for _ in 0..n_points {
        for &(lo, hi) in &bounds {
            // A constant coordinate gives an empty range; emit the constant.
            data.push(if hi > lo { rng.uniform(lo, hi) } else { lo });
        }
    }
    DenseMatrix::from_vec(n_points, dim, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::vectors::write_vectors_file;

    fn spec(kind: DatasetKind, n: usize, dim: usize, noise: f64, seed: u64) -> DatasetSpec {
        DatasetSpec {
            kind,
            n_points: n,
            dim,
            noise_sigma: noise,
            seed,
        }
    }

    #[test]
    fn torus_without_noise_lies_on_both_circles() {
        let ds = generate(&spec(DatasetKind::Torus, 200, 4, 0.0, 7)).unwrap();
        for row in ds.points.iter_rows() {
            assert!((row[0] * row[0] + row[1] * row[1] - 1.0).abs() <= 1e-12);
            assert!((row[2] * row[2] + row[3] * row[3] - 1.0).abs() <= 1e-12);
        }
        assert!(ds.labels.is_none());
    }

    #[test]
    fn equal_seeds_reproduce_equal_datasets() {
        for kind in [
            DatasetKind::GaussianClusters { num_clusters: 3 },
            DatasetKind::TwoMoons,
            DatasetKind::Torus,
        ] {
            let dim = if kind == DatasetKind::Torus { 4 } else { 6 };
            let a = generate(&spec(kind.clone(), 50, dim, 0.1, 42)).unwrap();
            let b = generate(&spec(kind.clone(), 50, dim, 0.1, 42)).unwrap();
            let c = generate(&spec(kind, 50, dim, 0.1, 43)).unwrap();
            assert_eq!(a, b);
            assert_ne!(a.points, c.points);
        }
    }

    #[test]
    fn clusters_emit_balanced_labels() {
        let ds = generate(&spec(
            DatasetKind::GaussianClusters { num_clusters: 3 },
            300,
            8,
            0.2,
            1,
        ))
        .unwrap();
        assert_eq!(ds.points.rows(), 300);
        let labels = ds.labels.unwrap();
        assert_eq!(labels.len(), 300);
        for cluster in 0..3 {
            assert_eq!(labels.iter().filter(|&&l| l == cluster).count(), 100);
        }
        // Same-cluster points huddle around a shared center.
        let p0 = ds.points.row(0);
        let p3 = ds.points.row(3);
        let dist: f64 = p0
            .iter()
            .zip(p3)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        assert!(dist < 3.0, "same-cluster distance {dist}");
    }

    #[test]
    fn moons_embed_in_higher_dimensions_with_noise_only() {
        let ds = generate(&spec(DatasetKind::TwoMoons, 100, 5, 0.01, 3)).unwrap();
        assert_eq!(ds.points.cols(), 5);
        let labels = ds.labels.unwrap();
        assert_eq!(labels.iter().filter(|&&l| l == 0).count(), 50);
        for row in ds.points.iter_rows() {
            assert!(row[2].abs() <= 0.06 && row[3].abs() <= 0.06 && row[4].abs() <= 0.06);
        }
    }

    #[test]
    fn product_manifold_respects_factor_layout() {
        let kind = DatasetKind::ProductManifold {
            factors: vec![FactorCurve::Circle, FactorCurve::Segment],
        };
        let ds = generate(&spec(kind, 120, 3, 0.0, 9)).unwrap();
        for row in ds.points.iter_rows() {
            assert!((row[0] * row[0] + row[1] * row[1] - 1.0).abs() <= 1e-12);
            assert!(row[2] >= -1.0 && row[2] <= 1.0);
        }
    }

    #[test]
    fn from_file_round_trips_and_checks_shape() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.fvecs");
        let original = generate(&spec(DatasetKind::Torus, 30, 4, 0.05, 5)).unwrap();
        write_vectors_file(&path, &original.points).unwrap();
        let loaded = generate(&spec(
            DatasetKind::FromFile { path: path.clone() },
            30,
            4,
            0.0,
            0,
        ))
        .unwrap();
        assert_eq!(loaded.points.rows(), 30);
        assert_eq!(loaded.points.cols(), 4);
        // fvecs stores f32, so values match only to single precision.
        for (a, b) in original.points.as_slice().iter().zip(loaded.points.as_slice()) {
            assert!((a - b).abs() <= 1e-6);
        }
        assert!(generate(&spec(
            DatasetKind::FromFile { path: path.clone() },
            31,
            4,
            0.0,
            0
        ))
        .is_err());
        assert!(generate(&spec(DatasetKind::FromFile { path }, 30, 5, 0.0, 0)).is_err());
    }

    #[test]
    fn background_fills_expanded_bounding_box() {
        let reference =
            DenseMatrix::from_rows(vec![vec![0.0, 10.0], vec![2.0, 10.0], vec![1.0, 10.0]])
                .unwrap();
        let bg = uniform_background(&reference, 500, 0.25, 3).unwrap();
        assert_eq!(bg.rows(), 500);
        let mut lo0 = f64::INFINITY;
        let mut hi0 = f64::NEG_INFINITY;
        for row in bg.iter_rows() {
            assert!(row[0] >= -0.5 && row[0] <= 2.5, "x = {}", row[0]);
            // Constant coordinate: the degenerate box collapses to the value.
            assert_eq!(row[1], 10.0);
            lo0 = lo0.min(row[0]);
            hi0 = hi0.max(row[0]);
        }
        // The padding is actually used, not just permitted.
        assert!(lo0 < 0.0 && hi0 > 2.0, "drawn range [{lo0}, {hi0}]");
        assert_eq!(bg, uniform_background(&reference, 500, 0.25, 3).unwrap());
        assert!(uniform_background(&reference, 0, 0.25, 3).is_err());
        assert!(uniform_background(&reference, 5, -0.1, 3).is_err());
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(generate(&spec(DatasetKind::Torus, 10, 3, 0.0, 0)).is_err());
        assert!(generate(&spec(DatasetKind::Torus, 0, 4, 0.0, 0)).is_err());
        assert!(generate(&spec(DatasetKind::Torus, 10, 4, -0.1, 0)).is_err());
        assert!(generate(&spec(DatasetKind::Torus, 10, 4, f64::NAN, 0)).is_err());
        assert!(generate(&spec(DatasetKind::TwoMoons, 10, 1, 0.0, 0)).is_err());
        assert!(generate(&spec(
            DatasetKind::GaussianClusters { num_clusters: 11 },
            10,
            2,
            0.0,
            0
        ))
        .is_err());
        assert!(generate(&spec(
            DatasetKind::ProductManifold {
                factors: vec![FactorCurve::Circle]
            },
            10,
            3,
            0.0,
            0
        ))
        .is_err());
        assert!(generate(&spec(
            DatasetKind::ProductManifold { factors: vec![] },
            10,
            0,
            0.0,
            0
        ))
        .is_err());
    }
}
