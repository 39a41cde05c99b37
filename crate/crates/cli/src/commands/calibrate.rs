//! `pmtree calibrate-lambda`: sweep the anti-sparse penalty and report,
//! per value, the rank correlation between packed-code scores and cosine
//! similarities plus the mean saturation fraction of the codes.
//!
//! The same Gaussian draws and the same sampled pairs are reused across
//! the sweep so the rows are directly comparable.

use std::path::PathBuf;

use clap::Args;
use pmtree::antisparse::{
    antisparse_encode, code_score, pack_signs, ANTISPARSE_DEFAULT_MAX_ITERS,
    ANTISPARSE_DEFAULT_TOL,
};
use pmtree::metrics::spearman;
use pmtree::sparse::Dictionary;
use pmtree::{DenseMatrix, Error, Result, SeededRng};
use rayon::prelude::*;

use crate::settings::{self, Config, F64List};

const CALIBRATE_PAIR_SALT: u64 = 0x6361_6c31;

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// Signal dimension.
    #[arg(long)]
    pub dim: Option<usize>,

    /// Dictionary atom count.
    #[arg(long)]
    pub atoms: Option<usize>,

    /// Number of Gaussian samples to encode.
    #[arg(long)]
    pub samples: Option<usize>,

    /// Scored pairs per penalty value.
    #[arg(long)]
    pub pairs: Option<usize>,

    /// Comma-separated penalty values to sweep.
    #[arg(long, value_parser = settings::parse_f64_list)]
    pub lambdas: Option<F64List>,

    /// Draw seed.
    #[arg(long)]
    pub seed: Option<u64>,

    /// Output file; stdout when omitted.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

pub fn run(args: CalibrateArgs, cfg: &Config) -> Result<()> {
    let dim = settings::resolve(args.dim, cfg, "dim", 16)?;
    let atoms = settings::resolve(args.atoms, cfg, "atoms", 64)?;
    let samples = settings::resolve(args.samples, cfg, "samples", 150)?;
    let pairs = settings::resolve(args.pairs, cfg, "pairs", 2000)?;
    let lambdas = settings::resolve_with(
        args.lambdas.clone(),
        cfg,
        "lambdas",
        F64List(vec![0.05, 0.1, 0.2, 0.4, 0.8]),
        settings::parse_f64_list,
    )?
    .0;
    let seed = settings::resolve(args.seed, cfg, "seed", 0)?;
    if samples < 2 {
        return Err(Error::InvalidParameter(
            "need at least two samples to form pairs".into(),
        ));
    }

    let mut rng = SeededRng::new(seed);
    let data = DenseMatrix::from_vec(samples, dim, rng.normal_vec(samples * dim))?;
    let dict = Dictionary::random_gaussian(dim, atoms, &mut rng)?;

    let mut pair_rng = SeededRng::new(seed).derive(CALIBRATE_PAIR_SALT);
    let mut pair_ids = Vec::with_capacity(pairs);
    for _ in 0..pairs {
        let a = pair_rng.index(samples);
        let mut b = pair_rng.index(samples);
        while b == a {
            b = pair_rng.index(samples);
        }
        pair_ids.push((a, b));
    }
    let true_sims: Vec<f64> = pair_ids
        .iter()
        .map(|&(a, b)| crate::commands::cosine(data.row(a), data.row(b)))
        .collect();

    let mut table = String::from("lambda\tspearman\tsaturated_frac\n");
    for &lambda in &lambdas {
        let encoded: Vec<(Vec<u64>, usize)> = (0..samples)
            .into_par_iter()
            .map(|i| {
                let code = antisparse_encode(
                    &dict,
                    data.row(i),
                    lambda,
                    ANTISPARSE_DEFAULT_MAX_ITERS,
                    ANTISPARSE_DEFAULT_TOL,
                )?;
                Ok((pack_signs(code.sign_code()), code.saturated().len()))
            })
            .collect::<Result<_>>()?;
        let saturated_frac = encoded.iter().map(|(_, s)| *s as f64).sum::<f64>()
            / (samples as f64 * atoms as f64);
        let code_sims: Vec<f64> = pair_ids
            .iter()
            .map(|&(a, b)| code_score(&encoded[a].0, &encoded[b].0, atoms) as f64)
            .collect();
        let rho = spearman(&code_sims, &true_sims)?;
        table.push_str(&format!("{lambda}\t{rho:.6}\t{saturated_frac:.6}\n"));
    }
    crate::commands::write_output(args.out.as_deref(), &table)
}
