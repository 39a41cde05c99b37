//! `pmtree build`: construct an index file from a vector file.
//!
//! The index always carries the dataset and (unless building failed) the
//! block trees; `--dict` adds a dictionary, `--codes` packs per-point sign
//! codes, and `--novelty` calibrates residual quantiles for scoring. Writes
//! are atomic (tmp sibling + rename), so a failed build leaves no partial
//! index behind.

use std::path::{Path, PathBuf};

use clap::Args;
use pmtree::antisparse::AnnIndex;
use pmtree::io::index_file::{save_index, ModelBundle};
use pmtree::io::vectors::read_vectors_file;
use pmtree::novelty::fit_novelty_model;
use pmtree::partition::SplitRule;
use pmtree::product::{BlockPartition, PMTree, PmParams};
use pmtree::sparse::Dictionary;
use pmtree::{DenseMatrix, Error, Result, SeededRng};

use crate::settings::{self, Config, DictKind};

/// Seed salt separating dictionary draws from tree split draws.
const DICT_SEED_SALT: u64 = 0x6469_6374;

#[derive(Debug, Args)]
pub struct BuildArgs {
    /// Input vector file (.fvecs or .csv).
    #[arg(long, value_name = "FILE")]
    pub data: PathBuf,

    /// Optional labels file, one integer per line in row order.
    #[arg(long, value_name = "FILE")]
    pub labels: Option<PathBuf>,

    /// Split rule: axis | rp.
    #[arg(long, value_parser = settings::parse_rule)]
    pub rule: Option<SplitRule>,

    /// Number of equal-width coordinate blocks.
    #[arg(long)]
    pub blocks: Option<usize>,

    /// Leaf capacity of every block tree.
    #[arg(long)]
    pub leaf_capacity: Option<usize>,

    /// Build seed (tree splits and dictionary draws).
    #[arg(long)]
    pub seed: Option<u64>,

    /// Dictionary source: none | gaussian | orthonormal | sampled.
    #[arg(long, value_parser = settings::parse_dict)]
    pub dict: Option<DictKind>,

    /// Atom count for gaussian/sampled dictionaries.
    #[arg(long)]
    pub atoms: Option<usize>,

    /// Coding penalty for codes and novelty calibration.
    #[arg(long)]
    pub lambda: Option<f64>,

    /// Pack a ±1 sign code per point (requires a dictionary).
    #[arg(long)]
    pub codes: bool,

    /// Calibrate residual quantiles for novelty scoring (requires a dictionary).
    #[arg(long)]
    pub novelty: bool,

    /// Novelty decision quantile in (0, 1).
    #[arg(long)]
    pub threshold_quantile: Option<f64>,

    /// Output index file.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

pub fn run(args: BuildArgs, cfg: &Config) -> Result<()> {
    let points = read_vectors_file(&args.data)?;
    let labels = match &args.labels {
        Some(path) => Some(read_labels(path)?),
        None => None,
    };
    let rule = settings::resolve_with(
        args.rule,
        cfg,
        "rule",
        SplitRule::AxisAligned,
        settings::parse_rule,
    )?;
    let blocks = settings::resolve(args.blocks, cfg, "blocks", 2)?;
    let leaf_capacity = settings::resolve(args.leaf_capacity, cfg, "leaf-capacity", 16)?;
    let seed = settings::resolve(args.seed, cfg, "seed", 0)?;
    let dict_kind =
        settings::resolve_with(args.dict, cfg, "dict", DictKind::None, settings::parse_dict)?;
    let atoms = settings::resolve(args.atoms, cfg, "atoms", 32)?;
    let lambda = settings::resolve(args.lambda, cfg, "lambda", 0.1)?;
    let threshold_quantile =
        settings::resolve(args.threshold_quantile, cfg, "threshold-quantile", 0.95)?;

    let params = PmParams {
        rule,
        leaf_capacity,
        seed,
    };
    let dictionary = make_dictionary(dict_kind, &points, atoms, seed)?;
    if (args.codes || args.novelty) && dictionary.is_none() {
        return Err(Error::InvalidParameter(
            "--codes and --novelty require --dict gaussian|orthonormal|sampled".into(),
        ));
    }

    let mut bundle = if args.novelty {
        let model = fit_novelty_model(
            points,
            blocks,
            params,
            dictionary.expect("dictionary presence checked above"),
            lambda,
            threshold_quantile,
        )?;
        ModelBundle::from_novelty_model(&model, labels)
    } else {
        let partition = BlockPartition::equal_width(points.cols(), blocks)?;
        let pm = PMTree::build(points.clone(), partition, &params)?;
        ModelBundle {
            dataset: points,
            labels,
            pm: Some(pm),
            dictionary,
            ann: None,
            novelty: None,
        }
    };
    if args.codes {
        let dict = bundle
            .dictionary
            .clone()
            .expect("dictionary presence checked above");
        bundle.ann = Some(AnnIndex::build(dict, bundle.dataset.clone(), lambda)?);
    }
    save_index(&args.out, &bundle)?;
    eprintln!(
        "indexed {} points (dim {}) into {}",
        bundle.dataset.rows(),
        bundle.dataset.cols(),
        args.out.display()
    );
    Ok(())
}

fn make_dictionary(
    kind: DictKind,
    points: &DenseMatrix,
    atoms: usize,
    seed: u64,
) -> Result<Option<Dictionary>> {
    let mut rng = SeededRng::new(seed).derive(DICT_SEED_SALT);
    Ok(match kind {
        DictKind::None => None,
        DictKind::Gaussian => Some(Dictionary::random_gaussian(points.cols(), atoms, &mut rng)?),
        DictKind::Orthonormal => Some(Dictionary::random_orthonormal(points.cols(), &mut rng)?),
        DictKind::Sampled => Some(Dictionary::from_sampled_rows(points, atoms, &mut rng)?),
    })
}

fn read_labels(path: &Path) -> Result<Vec<usize>> {
    let text = std::fs::read_to_string(path)?;
    let mut labels = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        labels.push(trimmed.parse::<usize>().map_err(|_| {
            Error::Format(format!(
                "labels line {}: expected an integer, got `{trimmed}`",
                i + 1
            ))
        })?);
    }
    Ok(labels)
}
