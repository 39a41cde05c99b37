//! `pmtree gen`: draw a synthetic dataset and write it to disk.

use std::path::PathBuf;

use clap::Args;
use pmtree::dataset::generate;
use pmtree::io::vectors::write_vectors_file;
use pmtree::{Error, Result};

use crate::settings::{self, Config, DataArgs};

#[derive(Debug, Args)]
pub struct GenArgs {
    #[command(flatten)]
    pub data: DataArgs,

    /// Output vector file; format chosen by extension (.fvecs or .csv).
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,

    /// Also write labels, one integer per line in row order.
    #[arg(long, value_name = "FILE")]
    pub labels_out: Option<PathBuf>,
}

pub fn run(args: GenArgs, cfg: &Config) -> Result<()> {
    let spec = settings::dataset_spec(&args.data, cfg)?;
    let dataset = generate(&spec)?;
    write_vectors_file(&args.out, &dataset.points)?;
    if let Some(path) = &args.labels_out {
        let labels = dataset.labels.as_ref().ok_or_else(|| {
            Error::InvalidParameter("this dataset kind carries no labels".into())
        })?;
        let mut text = String::new();
        for label in labels {
            text.push_str(&format!("{label}\n"));
        }
        std::fs::write(path, text)?;
    }
    eprintln!(
        "wrote {} points of dimension {} to {}",
        dataset.points.rows(),
        dataset.points.cols(),
        args.out.display()
    );
    Ok(())
}
