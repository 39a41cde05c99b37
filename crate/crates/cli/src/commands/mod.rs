//! One module per subcommand, plus small shared output helpers.

pub mod bench;
pub mod build;
pub mod calibrate;
pub mod demo_xor;
pub mod gen;
pub mod novelty;
pub mod query;

use std::path::Path;

use pmtree::numerics::{dot, l2_norm};
use pmtree::Result;

/// Writes to the file when a path is given, otherwise to stdout.
pub fn write_output(path: Option<&Path>, content: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, content)?,
        None => print!("{content}"),
    }
    Ok(())
}

/// Cosine similarity; 0 when either vector is zero.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let na = l2_norm(a);
    let nb = l2_norm(b);
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot(a, b) / (na * nb)
}
