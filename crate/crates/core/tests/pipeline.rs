//! End-to-end library usage: the way a consumer wires the pieces together,
//! from dataset generation through product-cell search, sign-code retrieval,
//! novelty scoring, and finally index persistence.

use pmtree::antisparse::ProductAnnIndex;
use pmtree::dataset::{generate, uniform_background, DatasetKind, DatasetSpec, FactorCurve};
use pmtree::io::index_file::{load_index, save_index, ModelBundle};
use pmtree::metrics::{brute_force_knn, recall_at_k};
use pmtree::novelty::{escape_insert, fit_novelty_model, novelty_score};
use pmtree::partition::{Metric, SplitRule};
use pmtree::product::{Block, BlockPartition, PMTree, PmParams};
use pmtree::sparse::Dictionary;
use pmtree::SeededRng;

#[test]
fn product_search_tracks_brute_force_on_factored_data() {
    // A circle x segment manifold in R^3: the circle takes two coordinates
    // and the segment one, so the blocks mirror the factor widths exactly.
    let data = generate(&DatasetSpec {
        kind: DatasetKind::ProductManifold {
            factors: vec![FactorCurve::Circle, FactorCurve::Segment],
        },
        n_points: 1500,
        dim: 3,
        noise_sigma: 0.05,
        seed: 42,
    })
    .unwrap()
    .points;
    let queries = generate(&DatasetSpec {
        kind: DatasetKind::ProductManifold {
            factors: vec![FactorCurve::Circle, FactorCurve::Segment],
        },
        n_points: 60,
        dim: 3,
        noise_sigma: 0.05,
        seed: 43,
    })
    .unwrap()
    .points;

    let partition = BlockPartition::new(vec![
        Block {
            offset: 0,
            width: 2,
        },
        Block {
            offset: 2,
            width: 1,
        },
    ])
    .unwrap();
    let params = PmParams {
        rule: SplitRule::AxisAligned,
        leaf_capacity: 48,
        seed: 9,
    };
    let pm = PMTree::build(data.clone(), partition, &params).unwrap();
    pm.assert_dimensional_bookkeeping();

    // pm_knn floors its shortlist at max(4k, 32) candidates; a consumer who
    // wants more recall widens the intersection and re-ranks by hand.
    let k = 5;
    let wide = 300;
    let mut oracle = Vec::new();
    let mut fast = Vec::new();
    let mut thorough = Vec::new();
    for i in 0..queries.rows() {
        let q = queries.row(i);
        oracle.push(brute_force_knn(&data, q, k, Metric::L2).unwrap());
        fast.push(pm.pm_knn(q, k, Metric::L2).unwrap());

        let candidates = pm.intersect_candidates(q, wide).unwrap();
        assert!(candidates.len() >= wide);
        let mut scored: Vec<(f64, u32)> = candidates
            .into_iter()
            .map(|id| {
                let row = data.row(id as usize);
                let d2: f64 = row.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum();
                (d2, id)
            })
            .collect();
        scored.sort_by(|a, b| a.partial_cmp(b).unwrap());
        thorough.push(scored.iter().take(k).map(|&(_, id)| id).collect::<Vec<_>>());
    }
    let fast_recall = recall_at_k(&oracle, &fast, k).unwrap();
    let wide_recall = recall_at_k(&oracle, &thorough, k).unwrap();
    assert!(fast_recall >= 0.75, "default shortlist recall@{k} = {fast_recall}");
    assert!(wide_recall >= 0.95, "widened shortlist recall@{k} = {wide_recall}");
    assert!(wide_recall > fast_recall, "widening must buy recall here");

    // A freshly inserted point is its own nearest neighbor.
    let mut pm = pm;
    let probe: Vec<f64> = queries.row(0).to_vec();
    let new_id = pm.insert(&probe).unwrap();
    assert_eq!(pm.pm_knn(&probe, 1, Metric::L2).unwrap(), vec![new_id]);
}

#[test]
fn sign_code_retrieval_finds_most_exact_neighbors() {
    let data = generate(&DatasetSpec {
        kind: DatasetKind::GaussianClusters { num_clusters: 5 },
        n_points: 1200,
        dim: 8,
        noise_sigma: 0.3,
        seed: 7,
    })
    .unwrap()
    .points;

    let blocks = BlockPartition::equal_width(8, 2).unwrap();
    let mut rng = SeededRng::new(70);
    let dictionaries: Vec<Dictionary> = (0..2)
        .map(|_| Dictionary::random_gaussian(4, 24, &mut rng).unwrap())
        .collect();
    let index = ProductAnnIndex::build(blocks, &data, dictionaries, &[0.3, 0.3]).unwrap();

    let mut hits = 0;
    let trials = 50;
    for t in 0..trials {
        let q: Vec<f64> = data.row(t * 7).iter().map(|x| x + 0.01).collect();
        let exact = brute_force_knn(&data, &q, 1, Metric::L2).unwrap();
        let approx = index.query(&q, 1, 100).unwrap();
        if exact == approx {
            hits += 1;
        }
    }
    assert!(
        hits >= trials * 8 / 10,
        "code shortlist found {hits}/{trials} exact top-1s"
    );
}

#[test]
fn novelty_model_flags_background_and_persists() {
    let train = generate(&DatasetSpec {
        kind: DatasetKind::Torus,
        n_points: 800,
        dim: 4,
        noise_sigma: 0.02,
        seed: 3,
    })
    .unwrap()
    .points;
    let background = uniform_background(&train, 40, 0.5, 4).unwrap();

    let mut rng = SeededRng::new(30);
    let dict = Dictionary::from_sampled_rows(&train, 96, &mut rng).unwrap();
    let params = PmParams {
        rule: SplitRule::AxisAligned,
        leaf_capacity: 64,
        seed: 3,
    };
    let mut model = fit_novelty_model(train, 2, params, dict, 0.1, 0.95).unwrap();

    // Well off the manifold: flagged, then absorbed by a single escape.
    let far = background.row(0);
    let before = novelty_score(&model, far).unwrap();
    if before.is_novel {
        let event = escape_insert(&mut model, far).unwrap();
        assert!(!event.was_noop());
        assert!(event.post_score() <= model.threshold_quantile());
        let after = novelty_score(&model, far).unwrap();
        assert!(!after.is_novel, "absorbed sample stays quiet");
    }

    // The fitted model survives a save/load round trip intact.
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.pmt");
    let bundle = ModelBundle::from_novelty_model(&model, None);
    save_index(&path, &bundle).unwrap();
    let restored = load_index(&path).unwrap();
    assert_eq!(restored, bundle);
    let recovered = restored.novelty_model().unwrap();
    let q = background.row(1);
    assert_eq!(
        novelty_score(&recovered, q).unwrap().score,
        novelty_score(&model, q).unwrap().score,
        "scores are identical after the round trip"
    );
}
