//! Oracle-anchored evaluation: exhaustive nearest neighbors, recall,
//! tie-aware Spearman rank correlation, and Mann–Whitney AUC, plus the
//! result table the benchmark pipeline emits.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::numerics::dot;
use crate::partition::Metric;

/// Exhaustive k-nearest-neighbor scan; the reference every candidate
/// retrieval is measured against. Ties break toward the smaller id.
pub fn brute_force_knn(
    points: &crate::numerics::DenseMatrix,
    q: &[f64],
    k: usize,
    metric: Metric,
) -> Result<Vec<u32>> {
    metric.validate()?;
    if points.rows() == 0 {
        return Err(Error::EmptyInput("brute_force_knn"));
    }
    if q.len() != points.cols() {
        return Err(Error::dim("brute_force_knn", points.cols(), q.len()));
    }
    if k == 0 || k > points.rows() {
        return Err(Error::param(format!(
            "need 1 ≤ k ≤ {}, got {k}",
            points.rows()
        )));
    }
    let mut scored: Vec<(f64, u32)> = points
        .iter_rows()
        .enumerate()
        .map(|(id, row)| (metric.key(q, row), id as u32))
        .collect();
    scored.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    Ok(scored.into_iter().take(k).map(|(_, id)| id).collect())
}

/// Mean over queries of |candidate ∩ oracle| / k. The oracle lists must
/// hold exactly k ids each; candidates may hold fewer.
pub fn recall_at_k(oracle: &[Vec<u32>], candidate: &[Vec<u32>], k: usize) -> Result<f64> {
    if oracle.len() != candidate.len() {
        return Err(Error::param(format!(
            "recall: {} oracle queries vs {} candidate queries",
            oracle.len(),
            candidate.len()
        )));
    }
    if oracle.is_empty() {
        return Err(Error::EmptyInput("recall_at_k"));
    }
    if k == 0 {
        return Err(Error::param("recall: k must be positive"));
    }
    let mut total = 0.0;
    for (want, got) in oracle.iter().zip(candidate) {
        if want.len() != k {
            return Err(Error::param(format!(
                "recall: oracle list holds {} ids, expected {k}",
                want.len()
            )));
        }
        let hits = got.iter().filter(|id| want.contains(id)).count();
        total += hits as f64 / k as f64;
    }
    Ok(total / oracle.len() as f64)
}

/// Average ranks (1-based), ties sharing the mean rank of their run.
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let shared = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = shared;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation with tie-averaged ranks. Needs at least two
/// pairs and nonzero rank variance on both sides.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::param(format!(
            "spearman: {} vs {} samples",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::param("spearman needs at least two pairs"));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("spearman"));
    }
    let rx = average_ranks(x);
    let ry = average_ranks(y);
    let n = x.len() as f64;
    let mean = (n + 1.0) / 2.0;
    let cx: Vec<f64> = rx.iter().map(|r| r - mean).collect();
    let cy: Vec<f64> = ry.iter().map(|r| r - mean).collect();
    let vx = dot(&cx, &cx);
    let vy = dot(&cy, &cy);
    if vx <= 0.0 || vy <= 0.0 {
        return Err(Error::param("spearman: constant input has no rank order"));
    }
    Ok(dot(&cx, &cy) / (vx * vy).sqrt())
}

/// Mann–Whitney AUC: the probability that a random outlier scores above a
/// random inlier, ties counting half. 1.0 means perfect separation.
pub fn auc(inlier_scores: &[f64], outlier_scores: &[f64]) -> Result<f64> {
    if inlier_scores.is_empty() || outlier_scores.is_empty() {
        return Err(Error::EmptyInput("auc"));
    }
    if inlier_scores
        .iter()
        .chain(outlier_scores)
        .any(|v| !v.is_finite())
    {
        return Err(Error::NonFinite("auc"));
    }
    let mut wins = 0.0;
    for out in outlier_scores {
        for inl in inlier_scores {
            if out > inl {
                wins += 1.0;
            } else if out == inl {
                wins += 0.5;
            }
        }
    }
    Ok(wins / (inlier_scores.len() as f64 * outlier_scores.len() as f64))
}

/// Benchmark outputs. The primary table excludes wall times so that equal
/// seeds produce byte-identical tables; timings are reported separately.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchResult {
    pub recall_at_k: BTreeMap<usize, f64>,
    pub spearman_code_vs_true: f64,
    pub auc_novelty: f64,
    pub wall_times: BTreeMap<String, f64>,
}

impl BenchResult {
    /// Deterministic tab-separated metric table with a header row.
    pub fn render_tsv(&self) -> String {
        let mut out = String::from("metric\tvalue\n");
        for (k, recall) in &self.recall_at_k {
            out.push_str(&format!("recall@{k}\t{recall:.6}\n"));
        }
        out.push_str(&format!(
            "spearman_code_vs_true\t{:.6}\n",
            self.spearman_code_vs_true
        ));
        out.push_str(&format!("auc_novelty\t{:.6}\n", self.auc_novelty));
        out
    }

    /// Wall-clock phases, for stderr reporting; excluded from the primary
    /// table because timings are not reproducible.
    pub fn render_wall_times(&self) -> String {
        let mut out = String::from("phase\tseconds\n");
        for (phase, secs) in &self.wall_times {
            out.push_str(&format!("{phase}\t{secs:.3}\n"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{DenseMatrix, SeededRng};

    #[test]
    fn member_query_returns_itself_first() {
        let mut rng = SeededRng::new(1);
        let points = DenseMatrix::from_vec(40, 5, rng.normal_vec(200)).unwrap();
        for id in [0usize, 17, 39] {
            let got = brute_force_knn(&points, points.row(id), 1, Metric::L2).unwrap();
            assert_eq!(got, vec![id as u32]);
        }
    }

    #[test]
    fn k_equals_n_sorts_every_id_by_distance() {
        let points =
            DenseMatrix::from_rows(vec![vec![0.0], vec![3.0], vec![1.0], vec![2.0]]).unwrap();
        let got = brute_force_knn(&points, &[0.1], 4, Metric::L2).unwrap();
        assert_eq!(got, vec![0, 2, 3, 1]);
    }

    #[test]
    fn equidistant_points_break_ties_to_smaller_id() {
        let points =
            DenseMatrix::from_rows(vec![vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let got = brute_force_knn(&points, &[0.0, 0.0], 3, Metric::L2).unwrap();
        assert_eq!(got, vec![0, 1, 2]);
    }

    #[test]
    fn knn_validates_inputs() {
        let points = DenseMatrix::from_rows(vec![vec![0.0, 0.0]]).unwrap();
        assert!(brute_force_knn(&points, &[0.0, 0.0], 0, Metric::L2).is_err());
        assert!(brute_force_knn(&points, &[0.0, 0.0], 2, Metric::L2).is_err());
        assert!(brute_force_knn(&points, &[0.0], 1, Metric::L2).is_err());
        assert!(brute_force_knn(&points, &[0.0, 0.0], 1, Metric::Lp(-1.0)).is_err());
        let empty = DenseMatrix::from_vec(0, 2, vec![]).unwrap();
        assert!(brute_force_knn(&empty, &[0.0, 0.0], 1, Metric::L2).is_err());
    }

    #[test]
    fn identical_result_sets_give_recall_one() {
        let oracle = vec![vec![1, 2, 3], vec![4, 5, 6]];
        assert_eq!(recall_at_k(&oracle, &oracle, 3).unwrap(), 1.0);
        let disjoint = vec![vec![7, 8, 9], vec![10, 11, 12]];
        assert_eq!(recall_at_k(&oracle, &disjoint, 3).unwrap(), 0.0);
        let half = vec![vec![1, 9, 3], vec![4, 6, 11]];
        assert!((recall_at_k(&oracle, &half, 3).unwrap() - 4.0 / 6.0).abs() <= 1e-12);
    }

    #[test]
    fn recall_rejects_mismatched_queries() {
        let oracle = vec![vec![1, 2]];
        assert!(recall_at_k(&oracle, &[], 2).is_err());
        assert!(recall_at_k(&oracle, &oracle, 3).is_err());
        assert!(recall_at_k(&[], &[], 2).is_err());
    }

    #[test]
    fn spearman_monotone_and_reversed() {
        let x = [1.0f64, 2.0, 3.0, 4.0, 5.0];
        let exp: Vec<f64> = x.iter().map(|v| v.exp()).collect();
        assert!((spearman(&x, &exp).unwrap() - 1.0).abs() <= 1e-12);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((spearman(&x, &neg).unwrap() + 1.0).abs() <= 1e-12);
    }

    #[test]
    fn spearman_matches_hand_computed_tied_case() {
        // Ranks of x: [1.5, 1.5, 3]; ranks of y: [1, 2, 3].
        // Centered: x → [-0.5, -0.5, 1], y → [-1, 0, 1];
        // ρ = (0.5 + 0 + 1)/√(1.5·2) = 1.5/√3.
        let x = [2.0, 2.0, 5.0];
        let y = [1.0, 3.0, 9.0];
        let want = 1.5 / (1.5f64 * 2.0).sqrt();
        assert!((spearman(&x, &y).unwrap() - want).abs() <= 1e-12);
    }

    #[test]
    fn independent_codes_have_near_zero_spearman() {
        let mut rng = SeededRng::new(2);
        let n = 10_000;
        let x: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
        let rho = spearman(&x, &y).unwrap();
        assert!(rho.abs() <= 0.1, "null draw gave ρ = {rho}");
    }

    #[test]
    fn spearman_rejects_degenerate_input() {
        assert!(spearman(&[1.0], &[2.0]).is_err());
        assert!(spearman(&[1.0, 2.0], &[3.0]).is_err());
        assert!(spearman(&[1.0, 1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn separated_scores_give_auc_one() {
        assert_eq!(auc(&[0.1, 0.2, 0.3], &[0.9, 1.0]).unwrap(), 1.0);
        assert_eq!(auc(&[0.9, 1.0], &[0.1, 0.2]).unwrap(), 0.0);
        assert_eq!(auc(&[0.5], &[0.5]).unwrap(), 0.5);
        assert!(auc(&[], &[0.5]).is_err());
    }

    #[test]
    fn auc_matches_rank_sum_on_random_scores() {
        let mut rng = SeededRng::new(3);
        let inl: Vec<f64> = (0..200).map(|_| rng.normal()).collect();
        let out: Vec<f64> = (0..150).map(|_| rng.normal() + 0.8).collect();
        let direct = auc(&inl, &out).unwrap();
        // Independent route: Mann–Whitney U from the rank-sum formula.
        let mut all: Vec<(f64, bool)> = inl
            .iter()
            .map(|&s| (s, false))
            .chain(out.iter().map(|&s| (s, true)))
            .collect();
        all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let rank_sum: f64 = all
            .iter()
            .enumerate()
            .filter(|(_, (_, is_out))| *is_out)
            .map(|(i, _)| (i + 1) as f64)
            .sum();
        let n_out = out.len() as f64;
        let u = rank_sum - n_out * (n_out + 1.0) / 2.0;
        let want = u / (n_out * inl.len() as f64);
        assert!((direct - want).abs() <= 1e-12);
    }

    #[test]
    fn bench_table_is_deterministic_and_excludes_timings() {
        let mut recall = BTreeMap::new();
        recall.insert(10, 0.91);
        recall.insert(1, 0.75);
        let mut wall = BTreeMap::new();
        wall.insert("build".to_string(), 1.25);
        let result = BenchResult {
            recall_at_k: recall,
            spearman_code_vs_true: 0.62,
            auc_novelty: 0.97,
            wall_times: wall,
        };
        let table = result.render_tsv();
        assert_eq!(
            table,
            "metric\tvalue\nrecall@1\t0.750000\nrecall@10\t0.910000\n\
             spearman_code_vs_true\t0.620000\nauc_novelty\t0.970000\n"
        );
        assert!(!table.contains("build"));
        assert!(result.render_wall_times().contains("build\t1.250"));
    }
}
