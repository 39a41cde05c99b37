//! `pmtree query`: batch nearest-neighbor queries against a saved index.
//!
//! Output is a TSV table `query  rank  id` with ranks starting at 1. The
//! loaded index is immutable here, so the query batch fans out across
//! threads without coordination.

use std::path::PathBuf;

use clap::Args;
use pmtree::io::index_file::load_index;
use pmtree::io::vectors::read_vectors_file;
use pmtree::partition::Metric;
use pmtree::{Error, Result};
use rayon::prelude::*;

use crate::settings::{self, Config};

#[derive(Debug, Args)]
pub struct QueryArgs {
    /// Index file produced by `build`.
    #[arg(long, value_name = "FILE")]
    pub index: PathBuf,

    /// Query vector file (.fvecs or .csv).
    #[arg(long, value_name = "FILE")]
    pub queries: PathBuf,

    /// Neighbors per query.
    #[arg(long)]
    pub k: Option<usize>,

    /// Tree-search metric: l2 | lp:<p>.
    #[arg(long, value_parser = settings::parse_metric)]
    pub metric: Option<Metric>,

    /// Search packed sign codes with exact re-ranking instead of the tree.
    #[arg(long)]
    pub codes: bool,

    /// Code-score shortlist size before re-ranking (codes mode).
    #[arg(long)]
    pub shortlist: Option<usize>,

    /// Output file; stdout when omitted.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

pub fn run(args: QueryArgs, cfg: &Config) -> Result<()> {
    let bundle = load_index(&args.index)?;
    let queries = read_vectors_file(&args.queries)?;
    let k = settings::resolve(args.k, cfg, "k", 1)?;
    let metric = settings::resolve_with(
        args.metric,
        cfg,
        "metric",
        Metric::L2,
        settings::parse_metric,
    )?;

    let ids: Vec<Vec<u32>> = if args.codes {
        let ann = bundle.ann.as_ref().ok_or_else(|| {
            Error::InvalidParameter("index carries no sign codes; rebuild with --codes".into())
        })?;
        if metric != Metric::L2 {
            return Err(Error::InvalidParameter(
                "code search re-ranks in l2; drop --metric or query the tree".into(),
            ));
        }
        let default_shortlist = (4 * k)
            .max(32)
            .max(ann.num_points() / 50)
            .min(ann.num_points());
        let shortlist = settings::resolve(args.shortlist, cfg, "shortlist", default_shortlist)?;
        (0..queries.rows())
            .into_par_iter()
            .map(|i| ann.query(queries.row(i), k, shortlist))
            .collect::<Result<_>>()?
    } else {
        let pm = bundle.pm.as_ref().ok_or_else(|| {
            Error::InvalidParameter("index carries no tree section".into())
        })?;
        (0..queries.rows())
            .into_par_iter()
            .map(|i| pm.pm_knn(queries.row(i), k, metric))
            .collect::<Result<_>>()?
    };

    let mut table = String::from("query\trank\tid\n");
    for (qi, neighbors) in ids.iter().enumerate() {
        for (rank, id) in neighbors.iter().enumerate() {
            table.push_str(&format!("{qi}\t{}\t{id}\n", rank + 1));
        }
    }
    crate::commands::write_output(args.out.as_deref(), &table)
}
