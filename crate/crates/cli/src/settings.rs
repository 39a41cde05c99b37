//! Flag/config/default resolution shared by the subcommands.
//!
//! Every tunable reads from three layers: an explicit flag wins, then a
//! `key=value` entry from `--config`, then the built-in default. Parsing is
//! shared between the two sources, so a bad flag and a bad config entry
//! report the same message; the difference is only where it surfaces (clap
//! rejects bad flags at usage-error exit 2, config entries fail at runtime
//! exit 1).

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use clap::Args;
use pmtree::config::load_config;
use pmtree::dataset::{DatasetKind, DatasetSpec, FactorCurve};
use pmtree::partition::{Metric, SplitRule};
use pmtree::{Error, Result};

pub type Config = BTreeMap<String, String>;

pub fn load(path: Option<&Path>) -> Result<Config> {
    match path {
        Some(p) => load_config(p),
        None => Ok(Config::new()),
    }
}

/// Flag value if present, else the parsed config entry, else the default.
pub fn resolve<T>(flag: Option<T>, cfg: &Config, key: &str, default: T) -> Result<T>
where
    T: FromStr,
    <T as FromStr>::Err: Display,
{
    resolve_with(flag, cfg, key, default, |s| {
        s.parse::<T>().map_err(|e| e.to_string())
    })
}

/// [`resolve`] with an explicit parser, for values whose flag syntax is
/// custom (split rules, metrics, comma lists).
pub fn resolve_with<T>(
    flag: Option<T>,
    cfg: &Config,
    key: &str,
    default: T,
    parse: impl FnOnce(&str) -> std::result::Result<T, String>,
) -> Result<T> {
    if let Some(value) = flag {
        return Ok(value);
    }
    match cfg.get(key) {
        Some(raw) => {
            parse(raw).map_err(|e| Error::InvalidParameter(format!("config key `{key}`: {e}")))
        }
        None => Ok(default),
    }
}

/// Dataset family selector. File-backed data enters through `build --data`
/// rather than through a generation flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KindArg {
    Gaussian,
    Moons,
    Torus,
    Product,
}

pub fn parse_kind(s: &str) -> std::result::Result<KindArg, String> {
    match s {
        "gaussian" => Ok(KindArg::Gaussian),
        "moons" => Ok(KindArg::Moons),
        "torus" => Ok(KindArg::Torus),
        "product" => Ok(KindArg::Product),
        _ => Err(format!(
            "unknown dataset kind `{s}` (expected gaussian|moons|torus|product)"
        )),
    }
}

pub fn parse_rule(s: &str) -> std::result::Result<SplitRule, String> {
    match s {
        "axis" => Ok(SplitRule::AxisAligned),
        "rp" => Ok(SplitRule::RandomProjection),
        _ => Err(format!("unknown split rule `{s}` (expected axis|rp)")),
    }
}

pub fn parse_metric(s: &str) -> std::result::Result<Metric, String> {
    if s == "l2" {
        return Ok(Metric::L2);
    }
    if let Some(raw) = s.strip_prefix("lp:") {
        let p: f64 = raw.parse().map_err(|_| format!("bad exponent `{raw}`"))?;
        if !p.is_finite() || p <= 0.0 {
            return Err(format!("exponent must be positive and finite, got {p}"));
        }
        return Ok(Metric::Lp(p));
    }
    Err(format!("unknown metric `{s}` (expected l2 or lp:<p>)"))
}

/// Dictionary source for coding layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DictKind {
    None,
    Gaussian,
    Orthonormal,
    Sampled,
}

pub fn parse_dict(s: &str) -> std::result::Result<DictKind, String> {
    match s {
        "none" => Ok(DictKind::None),
        "gaussian" => Ok(DictKind::Gaussian),
        "orthonormal" => Ok(DictKind::Orthonormal),
        "sampled" => Ok(DictKind::Sampled),
        _ => Err(format!(
            "unknown dictionary source `{s}` (expected none|gaussian|orthonormal|sampled)"
        )),
    }
}

/// Newtype so clap treats a comma list as one value, not repeated flags.
#[derive(Debug, Clone)]
pub struct Factors(pub Vec<FactorCurve>);

pub fn parse_factors(s: &str) -> std::result::Result<Factors, String> {
    let mut factors = Vec::new();
    for part in s.split(',') {
        match part.trim() {
            "circle" => factors.push(FactorCurve::Circle),
            "segment" => factors.push(FactorCurve::Segment),
            other => return Err(format!("unknown factor `{other}` (expected circle|segment)")),
        }
    }
    Ok(Factors(factors))
}

#[derive(Debug, Clone)]
pub struct UsizeList(pub Vec<usize>);

pub fn parse_usize_list(s: &str) -> std::result::Result<UsizeList, String> {
    let mut out = Vec::new();
    for part in s.split(',') {
        let trimmed = part.trim();
        out.push(
            trimmed
                .parse::<usize>()
                .map_err(|_| format!("bad integer `{trimmed}`"))?,
        );
    }
    Ok(UsizeList(out))
}

#[derive(Debug, Clone)]
pub struct F64List(pub Vec<f64>);

pub fn parse_f64_list(s: &str) -> std::result::Result<F64List, String> {
    let mut out = Vec::new();
    for part in s.split(',') {
        let trimmed = part.trim();
        let v: f64 = trimmed
            .parse()
            .map_err(|_| format!("bad number `{trimmed}`"))?;
        if !v.is_finite() {
            return Err(format!("non-finite value `{trimmed}`"));
        }
        out.push(v);
    }
    Ok(F64List(out))
}

/// Synthetic-dataset flags shared by `gen` and `bench`.
#[derive(Debug, Args)]
pub struct DataArgs {
    /// Dataset family: gaussian | moons | torus | product.
    #[arg(long, value_parser = parse_kind)]
    pub kind: Option<KindArg>,

    /// Number of points to draw.
    #[arg(long)]
    pub n: Option<usize>,

    /// Ambient dimension.
    #[arg(long)]
    pub dim: Option<usize>,

    /// Isotropic Gaussian noise level added per coordinate.
    #[arg(long)]
    pub noise: Option<f64>,

    /// Generator seed.
    #[arg(long)]
    pub seed: Option<u64>,

    /// Cluster count (gaussian kind only).
    #[arg(long)]
    pub clusters: Option<usize>,

    /// Comma-separated factor curves for the product kind: circle | segment.
    #[arg(long, value_parser = parse_factors)]
    pub factors: Option<Factors>,
}

/// Defaults: a 4-D torus of 1000 points with noise 0.05 at seed 0.
pub fn dataset_spec(args: &DataArgs, cfg: &Config) -> Result<DatasetSpec> {
    let kind_arg = resolve_with(args.kind, cfg, "kind", KindArg::Torus, parse_kind)?;
    let n_points = resolve(args.n, cfg, "n", 1000)?;
    let dim = resolve(args.dim, cfg, "dim", 4)?;
    let noise_sigma = resolve(args.noise, cfg, "noise", 0.05)?;
    let seed = resolve(args.seed, cfg, "seed", 0)?;
    let kind = match kind_arg {
        KindArg::Gaussian => DatasetKind::GaussianClusters {
            num_clusters: resolve(args.clusters, cfg, "clusters", 3)?,
        },
        KindArg::Moons => DatasetKind::TwoMoons,
        KindArg::Torus => DatasetKind::Torus,
        KindArg::Product => DatasetKind::ProductManifold {
            factors: resolve_with(
                args.factors.clone(),
                cfg,
                "factors",
                Factors(vec![FactorCurve::Circle, FactorCurve::Circle]),
                parse_factors,
            )?
            .0,
        },
    };
    Ok(DatasetSpec {
        kind,
        n_points,
        dim,
        noise_sigma,
        seed,
    })
}
