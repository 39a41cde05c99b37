//! `pmtree bench`: generate, build, search, code, and score in one run,
//! then print the metric table.
//!
//! The primary table (stdout or `--out`) is deterministic for fixed flags;
//! wall-clock phase timings go to stderr only. Held-out draws reuse the
//! data seed with fixed offsets. For the gaussian kind the cluster centers
//! themselves depend on the seed, so its held-out sets come from fresh
//! clusters; the manifold kinds (moons, torus, product) redraw from the
//! same surface, which is what the recall and novelty phases assume.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use pmtree::antisparse::{
    antisparse_encode, code_score, pack_signs, ANTISPARSE_DEFAULT_MAX_ITERS,
    ANTISPARSE_DEFAULT_TOL,
};
use pmtree::dataset::{generate, uniform_background, DatasetSpec};
use pmtree::metrics::{auc, brute_force_knn, recall_at_k, spearman, BenchResult};
use pmtree::novelty::{fit_novelty_model, novelty_score};
use pmtree::partition::{Metric, SplitRule};
use pmtree::product::{BlockPartition, PMTree, PmParams};
use pmtree::sparse::Dictionary;
use pmtree::{Error, Result, SeededRng};
use rayon::prelude::*;

use crate::settings::{self, Config, DataArgs, UsizeList};

/// Seed salts keeping the auxiliary draws apart from the tree seed.
const BENCH_DICT_SALT: u64 = 0x6265_6e31;
const BENCH_PAIR_SALT: u64 = 0x6265_6e32;
const BENCH_NOVELTY_SALT: u64 = 0x6265_6e33;

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub data: DataArgs,

    /// Held-out query count.
    #[arg(long)]
    pub queries: Option<usize>,

    /// Comma-separated recall depths, e.g. 1,10.
    #[arg(long, value_parser = settings::parse_usize_list)]
    pub k: Option<UsizeList>,

    /// Split rule: axis | rp.
    #[arg(long, value_parser = settings::parse_rule)]
    pub rule: Option<SplitRule>,

    /// Number of equal-width coordinate blocks.
    #[arg(long)]
    pub blocks: Option<usize>,

    /// Leaf capacity of every block tree.
    #[arg(long)]
    pub leaf_capacity: Option<usize>,

    /// Gaussian-dictionary atoms for the code-similarity phase.
    #[arg(long)]
    pub atoms: Option<usize>,

    /// Code penalty for the code-similarity phase.
    #[arg(long)]
    pub lambda: Option<f64>,

    /// Cap on database rows encoded in the code-similarity phase.
    #[arg(long)]
    pub code_samples: Option<usize>,

    /// Scored pairs in the code-similarity phase.
    #[arg(long)]
    pub pairs: Option<usize>,

    /// Sampled-atom count for the novelty phase.
    #[arg(long)]
    pub novelty_atoms: Option<usize>,

    /// Reconstruction penalty for the novelty phase.
    #[arg(long)]
    pub novelty_lambda: Option<f64>,

    /// Novelty decision quantile.
    #[arg(long)]
    pub threshold_quantile: Option<f64>,

    /// Held-out count per side (inliers and background outliers) for the AUC.
    #[arg(long)]
    pub outliers: Option<usize>,

    /// Bounding-box expansion fraction for background outliers.
    #[arg(long)]
    pub margin: Option<f64>,

    /// Metric-table file; stdout when omitted.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,

    /// Raw per-sample series (TSV: series, x, y) for plotting.
    #[arg(long, value_name = "FILE")]
    pub plot_data: Option<PathBuf>,
}

pub fn run(args: BenchArgs, cfg: &Config) -> Result<()> {
    let spec = settings::dataset_spec(&args.data, cfg)?;
    let num_queries = settings::resolve(args.queries, cfg, "queries", 100)?;
    let ks = settings::resolve_with(
        args.k.clone(),
        cfg,
        "k",
        UsizeList(vec![1, 10]),
        settings::parse_usize_list,
    )?
    .0;
    let rule = settings::resolve_with(
        args.rule,
        cfg,
        "rule",
        SplitRule::AxisAligned,
        settings::parse_rule,
    )?;
    let blocks = settings::resolve(args.blocks, cfg, "blocks", 2)?;
    let leaf_capacity = settings::resolve(args.leaf_capacity, cfg, "leaf-capacity", 16)?;
    let atoms = settings::resolve(args.atoms, cfg, "atoms", 4 * spec.dim.max(2))?;
    let lambda = settings::resolve(args.lambda, cfg, "lambda", 0.3)?;
    let code_samples = settings::resolve(args.code_samples, cfg, "code-samples", 256)?;
    let pairs = settings::resolve(args.pairs, cfg, "pairs", 2000)?;
    let novelty_atoms = settings::resolve(args.novelty_atoms, cfg, "novelty-atoms", 32)?;
    let novelty_lambda = settings::resolve(args.novelty_lambda, cfg, "novelty-lambda", 0.05)?;
    let threshold_quantile =
        settings::resolve(args.threshold_quantile, cfg, "threshold-quantile", 0.95)?;
    let outliers = settings::resolve(args.outliers, cfg, "outliers", 200)?;
    let margin = settings::resolve(args.margin, cfg, "margin", 0.25)?;

    let mut wall = BTreeMap::new();

    let t = Instant::now();
    let train = generate(&spec)?.points;
    let query_spec = DatasetSpec {
        n_points: num_queries,
        seed: spec.seed.wrapping_add(1),
        ..spec.clone()
    };
    let queries = generate(&query_spec)?.points;
    wall.insert("generate".to_string(), t.elapsed().as_secs_f64());

    let params = PmParams {
        rule,
        leaf_capacity,
        seed: spec.seed,
    };
    let t = Instant::now();
    let partition = BlockPartition::equal_width(train.cols(), blocks)?;
    let pm = PMTree::build(train.clone(), partition, &params)?;
    wall.insert("build".to_string(), t.elapsed().as_secs_f64());

    let t = Instant::now();
    let mut recall_at = BTreeMap::new();
    for &k in &ks {
        let oracle: Vec<Vec<u32>> = queries
            .iter_rows()
            .map(|q| brute_force_knn(&train, q, k, Metric::L2))
            .collect::<Result<_>>()?;
        let got: Vec<Vec<u32>> = (0..queries.rows())
            .into_par_iter()
            .map(|i| pm.pm_knn(queries.row(i), k, Metric::L2))
            .collect::<Result<_>>()?;
        recall_at.insert(k, recall_at_k(&oracle, &got, k)?);
    }
    wall.insert("search".to_string(), t.elapsed().as_secs_f64());

    // Code phase: encode a sample of database rows against one shared
    // Gaussian dictionary and rank-correlate packed-code scores with
    // cosine similarities.
    let t = Instant::now();
    let mut dict_rng = SeededRng::new(spec.seed).derive(BENCH_DICT_SALT);
    let dict = Dictionary::random_gaussian(train.cols(), atoms, &mut dict_rng)?;
    let sample_count = code_samples.min(train.rows());
    if sample_count < 2 {
        return Err(Error::InvalidParameter(
            "code phase needs at least two encoded samples".into(),
        ));
    }
    let mut pair_rng = SeededRng::new(spec.seed).derive(BENCH_PAIR_SALT);
    let mut sample_ids: Vec<usize> = (0..train.rows()).collect();
    pair_rng.shuffle(&mut sample_ids);
    sample_ids.truncate(sample_count);
    let codes: Vec<Vec<u64>> = sample_ids
        .par_iter()
        .map(|&id| {
            let code = antisparse_encode(
                &dict,
                train.row(id),
                lambda,
                ANTISPARSE_DEFAULT_MAX_ITERS,
                ANTISPARSE_DEFAULT_TOL,
            )?;
            Ok(pack_signs(code.sign_code()))
        })
        .collect::<Result<_>>()?;
    let mut code_sims = Vec::with_capacity(pairs);
    let mut true_sims = Vec::with_capacity(pairs);
    for _ in 0..pairs {
        let a = pair_rng.index(sample_count);
        let mut b = pair_rng.index(sample_count);
        while b == a {
            b = pair_rng.index(sample_count);
        }
        code_sims.push(code_score(&codes[a], &codes[b], atoms) as f64);
        true_sims.push(crate::commands::cosine(
            train.row(sample_ids[a]),
            train.row(sample_ids[b]),
        ));
    }
    let rho = spearman(&code_sims, &true_sims)?;
    wall.insert("codes".to_string(), t.elapsed().as_secs_f64());

    // Novelty phase: calibrate residual quantiles with a sampled-atom
    // dictionary, then score held-out on-manifold inliers against uniform
    // background outliers.
    let t = Instant::now();
    let mut novelty_rng = SeededRng::new(spec.seed).derive(BENCH_NOVELTY_SALT);
    let sampled = Dictionary::from_sampled_rows(
        &train,
        novelty_atoms.min(train.rows()),
        &mut novelty_rng,
    )?;
    let model = fit_novelty_model(
        train.clone(),
        blocks,
        params,
        sampled,
        novelty_lambda,
        threshold_quantile,
    )?;
    let inlier_spec = DatasetSpec {
        n_points: outliers,
        seed: spec.seed.wrapping_add(2),
        ..spec.clone()
    };
    let inliers = generate(&inlier_spec)?.points;
    let background = uniform_background(&train, outliers, margin, spec.seed.wrapping_add(3))?;
    let inlier_scores: Vec<f64> = inliers
        .iter_rows()
        .map(|x| Ok(novelty_score(&model, x)?.score))
        .collect::<Result<_>>()?;
    let outlier_scores: Vec<f64> = background
        .iter_rows()
        .map(|x| Ok(novelty_score(&model, x)?.score))
        .collect::<Result<_>>()?;
    let auc_novelty = auc(&inlier_scores, &outlier_scores)?;
    wall.insert("novelty".to_string(), t.elapsed().as_secs_f64());

    let result = BenchResult {
        recall_at_k: recall_at,
        spearman_code_vs_true: rho,
        auc_novelty,
        wall_times: wall,
    };
    crate::commands::write_output(args.out.as_deref(), &result.render_tsv())?;
    eprint!("{}", result.render_wall_times());

    if let Some(path) = &args.plot_data {
        let mut plot = String::from("series\tx\ty\n");
        for (code_sim, true_sim) in code_sims.iter().zip(&true_sims) {
            plot.push_str(&format!("code_vs_cosine\t{true_sim:.6}\t{code_sim:.6}\n"));
        }
        for (i, score) in inlier_scores.iter().enumerate() {
            plot.push_str(&format!("novelty_inlier\t{i}\t{score:.6}\n"));
        }
        for (i, score) in outlier_scores.iter().enumerate() {
            plot.push_str(&format!("novelty_outlier\t{i}\t{score:.6}\n"));
        }
        std::fs::write(path, plot)?;
    }
    Ok(())
}
