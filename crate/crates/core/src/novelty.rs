//! Novelty detection over the product-manifold index plus a continual
//! escape mechanism: a novel input is inserted into the index (and, for
//! large reconstruction residuals, the dictionary) so that re-presenting it
//! scores as normal.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{normalized, squared_distance, DenseMatrix, DenseVector};
use crate::product::{BlockPartition, PmParams, PMTree};
use crate::sparse::{basis_pursuit, Dictionary, BP_DEFAULT_MAX_ITERS, BP_DEFAULT_TOL};

/// Number of stored calibration quantiles (1% resolution, levels 0..=100).
pub const NUM_QUANTILES: usize = 101;

/// Added to the residual percentile when the query's product cell holds no
/// database point, then clamped at 1.0.
pub const EMPTY_CELL_BONUS: f64 = 0.5;

/// Default residual-percentile cutoff above which an escape also appends a
/// dictionary atom. The effective cutoff never exceeds the novelty
/// threshold; see [`escape_insert`]. The default sits well below typical
/// thresholds on purpose: an escaped sample's future percentile is bounded
/// by the cutoff, and calibration quantiles pack tightly enough that a
/// percentile parked just under the threshold could wobble across it as
/// later escapes reshape the dictionary and with it the solved residuals.
pub const DEFAULT_ATOM_ADD_QUANTILE: f64 = 0.5;

/// Inlier model: index over the training data, reconstruction dictionary,
/// and the empirical residual distribution the scores are calibrated
/// against. Calibration is computed from the training data once and never
/// changes afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct NoveltyModel {
    pm: PMTree,
    dictionary: Dictionary,
    lambda: f64,
    calibration: Vec<f64>,
    threshold_quantile: f64,
    atom_add_quantile: f64,
}

/// Score components for one input.
#[derive(Debug, Clone, PartialEq)]
pub struct NoveltyReport {
    /// ℓ2 reconstruction residual of the sparse coding of the input.
    pub residual: f64,
    /// Number of database points sharing the input's exact product cell
    /// (no widening).
    pub cell_occupancy: usize,
    /// Calibrated residual percentile, plus the empty-cell bonus when
    /// `cell_occupancy == 0`, clamped at 1.0.
    pub score: f64,
    /// `score > threshold_quantile`.
    pub is_novel: bool,
}

/// What an escape did to the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EscapeAction {
    InsertedIntoTree,
    AddedAtom,
}

/// Audit record of one escape attempt. An empty action list means the input
/// was not novel and the call was a guarded no-op.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EscapeEvent {
    sample: DenseVector,
    pre_score: f64,
    actions: Vec<EscapeAction>,
    post_score: f64,
}

impl EscapeEvent {
    pub fn sample(&self) -> &[f64] {
        &self.sample
    }

    pub fn pre_score(&self) -> f64 {
        self.pre_score
    }

    pub fn actions(&self) -> &[EscapeAction] {
        &self.actions
    }

    pub fn post_score(&self) -> f64 {
        self.post_score
    }

    pub fn was_noop(&self) -> bool {
        self.actions.is_empty()
    }

    /// One JSON record, suitable for a line-delimited audit log.
    pub fn to_json_line(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::format(format!("escape log: {e}")))
    }
}

impl NoveltyModel {
    pub fn pm(&self) -> &PMTree {
        &self.pm
    }

    pub fn dictionary(&self) -> &Dictionary {
        &self.dictionary
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// The 101 stored residual quantiles, non-decreasing.
    pub fn calibration(&self) -> &[f64] {
        &self.calibration
    }

    pub fn threshold_quantile(&self) -> f64 {
        self.threshold_quantile
    }

    pub fn atom_add_quantile(&self) -> f64 {
        self.atom_add_quantile
    }

    pub fn with_atom_add_quantile(mut self, quantile: f64) -> Result<Self> {
        if !(quantile > 0.0 && quantile < 1.0) {
            return Err(Error::param("atom_add_quantile must lie in (0, 1)"));
        }
        self.atom_add_quantile = quantile;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.pm.partition().dim()
    }

    pub(crate) fn from_parts(
        pm: PMTree,
        dictionary: Dictionary,
        lambda: f64,
        calibration: Vec<f64>,
        threshold_quantile: f64,
        atom_add_quantile: f64,
    ) -> Result<Self> {
        if dictionary.signal_dim() != pm.partition().dim() {
            return Err(Error::format("novelty parts: dictionary dim mismatch"));
        }
        if calibration.len() != NUM_QUANTILES {
            return Err(Error::format("novelty parts: calibration size"));
        }
        if calibration.windows(2).any(|w| !(w[0] <= w[1])) {
            return Err(Error::format("novelty parts: calibration not sorted"));
        }
        if !(threshold_quantile > 0.0 && threshold_quantile < 1.0)
            || !(atom_add_quantile > 0.0 && atom_add_quantile < 1.0)
            || !(lambda.is_finite() && lambda > 0.0)
        {
            return Err(Error::format("novelty parts: parameter out of range"));
        }
        Ok(NoveltyModel {
            pm,
            dictionary,
            lambda,
            calibration,
            threshold_quantile,
            atom_add_quantile,
        })
    }

    /// Percentile of a residual under the stored calibration, by piecewise
    /// linear interpolation between quantiles. Values at or below the
    /// minimum map to 0.0; values above the maximum map to 1.0. Within a
    /// flat run of equal quantiles the lowest level wins, so a residual
    /// exactly matching a common calibration value is not inflated.
    pub fn residual_percentile(&self, residual: f64) -> f64 {
        let q = &self.calibration;
        let hi = q.partition_point(|&v| v < residual);
        if hi == 0 {
            return 0.0;
        }
        if hi == NUM_QUANTILES {
            return 1.0;
        }
        let frac = (residual - q[hi - 1]) / (q[hi] - q[hi - 1]);
        ((hi - 1) as f64 + frac) / 100.0
    }
}

fn reconstruction_residual(dictionary: &Dictionary, lambda: f64, x: &[f64]) -> Result<f64> {
    let code = basis_pursuit(dictionary, x, lambda, BP_DEFAULT_MAX_ITERS, BP_DEFAULT_TOL)?;
    let recon = dictionary.apply(code.coefficients())?;
    Ok(squared_distance(x, &recon).sqrt())
}

/// Builds the index on the training set, computes every training point's
/// in-sample reconstruction residual, and stores the residual quantiles at
/// 1% resolution. In-sample calibration is optimistic; evaluation should
/// score held-out draws.
pub fn fit_novelty_model(
    train: DenseMatrix,
    num_blocks: usize,
    params: PmParams,
    dictionary: Dictionary,
    lambda: f64,
    threshold_quantile: f64,
) -> Result<NoveltyModel> {
    if train.rows() == 0 {
        return Err(Error::EmptyInput("fit_novelty_model"));
    }
    if !(threshold_quantile > 0.0 && threshold_quantile < 1.0) {
        return Err(Error::param("threshold_quantile must lie in (0, 1)"));
    }
    if dictionary.signal_dim() != train.cols() {
        return Err(Error::dim(
            "fit_novelty_model",
            train.cols(),
            dictionary.signal_dim(),
        ));
    }
    let rows: Vec<&[f64]> = train.iter_rows().collect();
    let mut residuals: Vec<f64> = rows
        .par_iter()
        .map(|row| reconstruction_residual(&dictionary, lambda, row))
        .collect::<Result<Vec<f64>>>()?;
    residuals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let calibration = quantiles_from_sorted(&residuals);
    let partition = BlockPartition::equal_width(train.cols(), num_blocks)?;
    let pm = PMTree::build(train, partition, &params)?;
    Ok(NoveltyModel {
        pm,
        dictionary,
        lambda,
        calibration,
        threshold_quantile,
        atom_add_quantile: DEFAULT_ATOM_ADD_QUANTILE,
    })
}

/// Linear-interpolation quantiles at levels 0, 0.01, …, 1.00 of an
/// ascending sample. A single observation yields all-equal quantiles.
fn quantiles_from_sorted(sorted: &[f64]) -> Vec<f64> {
    let n = sorted.len();
    (0..NUM_QUANTILES)
        .map(|level| {
            let pos = level as f64 / 100.0 * (n - 1) as f64;
            let lo = pos.floor() as usize;
            let frac = pos - lo as f64;
            if lo + 1 < n {
                sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac
            } else {
                sorted[n - 1]
            }
        })
        .collect()
}

/// Scores one input: reconstruction residual percentile plus the empty-cell
/// bonus. Read-only and deterministic.
pub fn novelty_score(model: &NoveltyModel, x: &[f64]) -> Result<NoveltyReport> {
    if x.len() != model.dim() {
        return Err(Error::dim("novelty_score", model.dim(), x.len()));
    }
    let residual = reconstruction_residual(&model.dictionary, model.lambda, x)?;
    let cell_occupancy = model.pm.intersect_candidates(x, 0)?.len();
    let percentile = model.residual_percentile(residual);
    let score = if cell_occupancy == 0 {
        (percentile + EMPTY_CELL_BONUS).min(1.0)
    } else {
        percentile
    };
    Ok(NoveltyReport {
        residual,
        cell_occupancy,
        score,
        is_novel: score > model.threshold_quantile,
    })
}

/// Makes a novel input normal: appends it to the index database (routing
/// into every subtree, splitting full leaves), and appends the normalized
/// sample as a dictionary atom when the residual percentile exceeds the
/// atom-add cutoff. Requires exclusive access to the model.
///
/// The effective atom-add cutoff is `min(atom_add_quantile,
/// threshold_quantile)`: whenever the residual percentile alone exceeds the
/// novelty threshold, insertion cannot lower the score below the threshold
/// (the residual is unchanged), so the dictionary must grow for the
/// closed-loop guarantee `post_score ≤ threshold` to hold.
///
/// The new atom is the sample direction `x/‖x‖`, which carries a proof:
/// with that atom present, the re-solved reconstruction residual is at most
/// λ (compare the optimum against the single-atom solution with coefficient
/// ‖x‖−λ, and use that every unit atom correlates with `x/‖x‖` by at most
/// 1). Since every calibration residual with an active coefficient is at
/// least λ, the re-scored percentile lands at the bottom of the
/// calibration. A residual-direction atom has no such bound: the re-solve
/// may park mass in other weakly covered directions instead of paying the
/// ℓ1 price to cancel it.
///
/// Calling this on a non-novel input leaves the model untouched and
/// returns a no-op event (empty action list).
pub fn escape_insert(model: &mut NoveltyModel, x: &[f64]) -> Result<EscapeEvent> {
    let pre = novelty_score(model, x)?;
    let sample = DenseVector::new(x.to_vec())?;
    if !pre.is_novel {
        return Ok(EscapeEvent {
            sample,
            pre_score: pre.score,
            actions: Vec::new(),
            post_score: pre.score,
        });
    }
    let mut actions = vec![EscapeAction::InsertedIntoTree];
    model.pm.insert(x)?;
    let cutoff = model.atom_add_quantile.min(model.threshold_quantile);
    if model.residual_percentile(pre.residual) > cutoff {
        if let Some(unit) = normalized(x) {
            model.dictionary.push_atom(&unit)?;
            actions.push(EscapeAction::AddedAtom);
        }
    }
    let post = novelty_score(model, x)?;
    assert!(
        post.score <= model.threshold_quantile,
        "escape failed to normalize its input: post score {} > threshold {}",
        post.score,
        model.threshold_quantile
    );
    Ok(EscapeEvent {
        sample,
        pre_score: pre.score,
        actions,
        post_score: post.score,
    })
}

/// Scores a finite stream in order, escaping on each novel input. Returns
/// every report plus one event per executed escape.
pub fn continual_loop(
    model: &mut NoveltyModel,
    stream: &DenseMatrix,
) -> Result<(Vec<NoveltyReport>, Vec<EscapeEvent>)> {
    let mut reports = Vec::with_capacity(stream.rows());
    let mut events = Vec::new();
    for row in stream.iter_rows() {
        let report = novelty_score(model, row)?;
        if report.is_novel {
            events.push(escape_insert(model, row)?);
        }
        reports.push(report);
    }
    Ok((reports, events))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::SeededRng;
    use crate::partition::SplitRule;

    /// Noisy circle embedded in the first two of four coordinates.
    fn circle_cloud(n: usize, seed: u64) -> DenseMatrix {
        let mut rng = SeededRng::new(seed);
        let mut data = Vec::with_capacity(n * 4);
        for i in 0..n {
            let theta = i as f64 / n as f64 * std::f64::consts::TAU;
            data.push(theta.cos() + 0.02 * rng.normal());
            data.push(theta.sin() + 0.02 * rng.normal());
            data.push(0.02 * rng.normal());
            data.push(0.02 * rng.normal());
        }
        DenseMatrix::from_vec(n, 4, data).unwrap()
    }

    /// Atoms sampled from the data concentrate on the manifold, so
    /// off-manifold directions reconstruct poorly and the residual carries
    /// signal. A spanning Gaussian dictionary would reconstruct any input
    /// with a residual of order λ regardless of its distance to the data.
    fn circle_model(seed: u64) -> NoveltyModel {
        let train = circle_cloud(100, seed);
        let mut rng = SeededRng::new(seed ^ 0xabcd);
        let dictionary = Dictionary::from_sampled_rows(&train, 12, &mut rng).unwrap();
        fit_novelty_model(train, 2, PmParams::default(), dictionary, 0.02, 0.99).unwrap()
    }

    #[test]
    fn fit_produces_finite_sorted_calibration() {
        let model = circle_model(1);
        assert_eq!(model.calibration().len(), NUM_QUANTILES);
        assert!(model.calibration().iter().all(|q| q.is_finite() && *q >= 0.0));
        for pair in model.calibration().windows(2) {
            assert!(pair[0] <= pair[1]);
        }
    }

    #[test]
    fn single_training_point_degenerates_to_residual_threshold() {
        let train = DenseMatrix::from_rows(vec![vec![1.0, 2.0, 3.0]]).unwrap();
        let mut rng = SeededRng::new(2);
        let dictionary = Dictionary::random_gaussian(3, 6, &mut rng).unwrap();
        let model =
            fit_novelty_model(train, 1, PmParams::default(), dictionary, 0.1, 0.99).unwrap();
        let q0 = model.calibration()[0];
        assert!(model.calibration().iter().all(|&q| q == q0));
        // The lone stored residual acts as the cutoff: at or below it maps
        // to percentile 0, strictly above to 1.
        assert_eq!(model.residual_percentile(q0), 0.0);
        assert_eq!(model.residual_percentile(q0 * 0.5), 0.0);
        assert_eq!(model.residual_percentile(q0 + 1e-9), 1.0);
    }

    #[test]
    fn equal_seeds_give_identical_models() {
        assert_eq!(circle_model(3), circle_model(3));
    }

    #[test]
    fn rejects_empty_training_and_bad_quantile() {
        let mut rng = SeededRng::new(4);
        let dictionary = Dictionary::random_gaussian(4, 8, &mut rng).unwrap();
        let empty = DenseMatrix::from_vec(0, 4, vec![]).unwrap();
        assert!(matches!(
            fit_novelty_model(
                empty,
                2,
                PmParams::default(),
                dictionary.clone(),
                0.1,
                0.99
            ),
            Err(Error::EmptyInput(_))
        ));
        let train = circle_cloud(10, 4);
        assert!(fit_novelty_model(
            train,
            2,
            PmParams::default(),
            dictionary,
            0.1,
            1.0
        )
        .is_err());
    }

    #[test]
    fn training_points_mostly_score_normal() {
        let model = circle_model(5);
        let mut below = 0;
        let n = model.pm().num_points();
        for id in 0..n {
            let report = novelty_score(&model, model.pm().database().row(id)).unwrap();
            assert!(report.cell_occupancy >= 1, "point {id} lost its own cell");
            if report.score <= model.threshold_quantile() {
                below += 1;
            }
        }
        assert!(below * 100 >= n * 95, "only {below}/{n} in-sample normals");
    }

    #[test]
    fn far_outlier_is_novel_and_escape_normalizes_it() {
        let mut model = circle_model(6);
        // Data diameter is about 2; offset by 10× that.
        let outlier = [20.0, 20.0, 20.0, 20.0];
        let before = novelty_score(&model, &outlier).unwrap();
        assert!(before.is_novel);
        let event = escape_insert(&mut model, &outlier).unwrap();
        assert!(event.actions().contains(&EscapeAction::InsertedIntoTree));
        assert!(event.actions().contains(&EscapeAction::AddedAtom));
        assert!(event.post_score() <= model.threshold_quantile());
        let after = novelty_score(&model, &outlier).unwrap();
        assert!(!after.is_novel);
        assert!(after.cell_occupancy >= 1);
    }

    #[test]
    fn unseen_block_combination_gets_the_empty_cell_bonus() {
        // Two tight clusters whose block profiles never mix: probing with
        // cluster A's first block and cluster B's second block reaches a
        // product cell no training point occupies, even though each half is
        // familiar (so the reconstruction residual stays small).
        let mut rng = SeededRng::new(30);
        let mut points = Vec::new();
        for _ in 0..30 {
            points.push(vec![
                2.0 + 0.01 * rng.normal(),
                2.0 + 0.01 * rng.normal(),
                0.1 + 0.01 * rng.normal(),
                0.1 + 0.01 * rng.normal(),
            ]);
        }
        for _ in 0..30 {
            points.push(vec![
                0.1 + 0.01 * rng.normal(),
                0.1 + 0.01 * rng.normal(),
                2.0 + 0.01 * rng.normal(),
                2.0 + 0.01 * rng.normal(),
            ]);
        }
        let train = DenseMatrix::from_rows(points).unwrap();
        let dictionary = Dictionary::from_sampled_rows(&train, 10, &mut rng).unwrap();
        let params = PmParams {
            leaf_capacity: 8,
            ..PmParams::default()
        };
        let model = fit_novelty_model(train, 2, params, dictionary, 0.02, 0.99).unwrap();
        let probe = [2.0, 2.0, 2.0, 2.0];
        let report = novelty_score(&model, &probe).unwrap();
        assert_eq!(report.cell_occupancy, 0);
        let percentile = model.residual_percentile(report.residual);
        assert_eq!(report.score, (percentile + EMPTY_CELL_BONUS).min(1.0));
        assert!(report.score >= EMPTY_CELL_BONUS);
    }

    #[test]
    fn same_outlier_twice_escapes_once() {
        let mut model = circle_model(7);
        let stream =
            DenseMatrix::from_rows(vec![vec![15.0, -12.0, 8.0, 9.0]; 2]).unwrap();
        let (reports, events) = continual_loop(&mut model, &stream).unwrap();
        assert_eq!(reports.len(), 2);
        assert_eq!(events.len(), 1);
        assert!(reports[0].is_novel);
        assert!(!reports[1].is_novel);
    }

    #[test]
    fn empty_stream_yields_empty_output() {
        let mut model = circle_model(8);
        let stream = DenseMatrix::from_vec(0, 4, vec![]).unwrap();
        let (reports, events) = continual_loop(&mut model, &stream).unwrap();
        assert!(reports.is_empty());
        assert!(events.is_empty());
    }

    #[test]
    fn training_stream_escape_rate_is_low() {
        let mut model = circle_model(9);
        let stream = circle_cloud(100, 99);
        let (_, events) = continual_loop(&mut model, &stream).unwrap();
        assert!(events.len() <= 10, "{} escapes on in-distribution stream", events.len());
    }

    #[test]
    fn non_novel_input_is_a_guarded_noop() {
        let mut model = circle_model(10);
        let inlier = model.pm().database().row(0).to_vec();
        assert!(!novelty_score(&model, &inlier).unwrap().is_novel);
        let snapshot = model.clone();
        let event = escape_insert(&mut model, &inlier).unwrap();
        assert!(event.was_noop());
        assert_eq!(event.pre_score(), event.post_score());
        assert_eq!(model, snapshot);
    }

    #[test]
    fn insertion_never_raises_own_score() {
        let mut rng = SeededRng::new(11);
        let mut model = circle_model(11);
        for _ in 0..10 {
            let x: Vec<f64> = (0..4).map(|_| rng.uniform(-6.0, 6.0)).collect();
            let before = novelty_score(&model, &x).unwrap();
            if !before.is_novel {
                continue;
            }
            let event = escape_insert(&mut model, &x).unwrap();
            assert!(event.post_score() <= event.pre_score() + 1e-12);
        }
    }

    #[test]
    fn escapes_preserve_subtree_partitions() {
        // Circle in the first two of twelve coordinates. The high ambient
        // dimension keeps each probe direction poorly covered until its
        // own escape adds an atom, so every probe below actually escapes.
        let mut rng = SeededRng::new(12);
        let n_train = 40;
        let mut data = Vec::with_capacity(n_train * 12);
        for i in 0..n_train {
            let theta = i as f64 / n_train as f64 * std::f64::consts::TAU;
            data.push(theta.cos() + 0.02 * rng.normal());
            data.push(theta.sin() + 0.02 * rng.normal());
            for _ in 2..12 {
                data.push(0.02 * rng.normal());
            }
        }
        let train = DenseMatrix::from_vec(n_train, 12, data).unwrap();
        let dictionary = Dictionary::from_sampled_rows(&train, 12, &mut rng).unwrap();
        let params = PmParams {
            rule: SplitRule::AxisAligned,
            leaf_capacity: 4,
            seed: 12,
        };
        let mut model = fit_novelty_model(train, 3, params, dictionary, 0.05, 0.99).unwrap();
        let mut escapes = 0;
        for k in 0..8usize {
            // Dominant coordinates drawn from the ten pure-noise axes
            // (2..11), distinct per probe, away from the circle plane.
            let mut x = vec![0.0; 12];
            x[2 + k] = 25.0;
            x[2 + (k + 5) % 10] = -8.0;
            let report = novelty_score(&model, &x).unwrap();
            assert!(report.is_novel, "probe {k} should be novel");
            escape_insert(&mut model, &x).unwrap();
            escapes += 1;
        }
        assert_eq!(escapes, 8);
        let n = model.pm().num_points();
        assert_eq!(n, n_train + 8);
        for subtree in model.pm().subtrees() {
            let mut seen: Vec<u32> = subtree.leaves().flat_map(|(_, ids)| ids.to_vec()).collect();
            seen.sort_unstable();
            assert_eq!(seen, (0..n as u32).collect::<Vec<u32>>());
        }
        model.pm().assert_dimensional_bookkeeping();
    }

    #[test]
    fn perfect_atom_gives_minimal_score() {
        let train = circle_cloud(50, 13);
        let x = train.row(7).to_vec();
        let mut atoms = vec![normalized(&x).unwrap()];
        let mut rng = SeededRng::new(13);
        for _ in 0..7 {
            atoms.push(rng.unit_vector(4));
        }
        let dictionary = Dictionary::from_atom_rows(DenseMatrix::from_rows(atoms).unwrap()).unwrap();
        let lambda = 1e-4;
        let model =
            fit_novelty_model(train, 2, PmParams::default(), dictionary, lambda, 0.99).unwrap();
        let report = novelty_score(&model, &x).unwrap();
        assert!(report.residual <= 0.05, "residual {}", report.residual);
        assert!(report.score <= 0.2, "score {}", report.score);
        assert!(!report.is_novel);
    }

    #[test]
    fn escape_event_serializes_to_json_line() {
        let mut model = circle_model(14);
        let event = escape_insert(&mut model, &[18.0, 17.0, -16.0, 15.0]).unwrap();
        let line = event.to_json_line().unwrap();
        assert!(!line.contains('\n'));
        let value: serde_json::Value = serde_json::from_str(&line).unwrap();
        assert!(value["sample"].is_array());
        assert!(value["pre_score"].is_number());
        assert!(value["post_score"].is_number());
        assert_eq!(value["actions"][0], "InsertedIntoTree");
    }

    #[test]
    fn percentile_interpolates_between_quantiles() {
        let train = circle_cloud(100, 15);
        let mut rng = SeededRng::new(15);
        let dictionary = Dictionary::random_gaussian(4, 12, &mut rng).unwrap();
        let model =
            fit_novelty_model(train, 2, PmParams::default(), dictionary, 0.05, 0.99).unwrap();
        let q = model.calibration();
        let mid = 0.5 * (q[40] + q[41]);
        if q[41] > q[40] {
            let p = model.residual_percentile(mid);
            assert!((p - 0.405).abs() <= 1e-9, "percentile {p}");
        }
        assert_eq!(model.residual_percentile(q[0] * 0.5), 0.0);
        assert_eq!(model.residual_percentile(q[100] * 2.0 + 1.0), 1.0);
    }
}
