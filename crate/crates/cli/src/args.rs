use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use robustprice::DistributionClass;
use serde::Serialize;

/// Robust pricing from historical conversion data.
#[derive(Debug, Parser)]
#[command(name = "robustprice", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a dataset against both distribution classes.
    Validate {
        /// Information set JSON: {"v_lo", "v_hi", "points": [[p, q], ...]}.
        dataset: PathBuf,
    },
    /// Worst-case ratio of a given pricing mechanism.
    Evaluate {
        dataset: PathBuf,
        /// Mechanism JSON: {"atoms": [[price, weight], ...]}.
        #[arg(long)]
        mechanism: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Maximin ratio and the mechanism attaining it.
    Maximin {
        dataset: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
        /// Write the JSON result here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the linear program as text next to the output.
        #[arg(long)]
        lp_dump: bool,
    },
    /// Experiment-design studies; each writes `<study>.csv` and a manifest.
    Study {
        #[command(subcommand)]
        study: Study,
    },
}

#[derive(Debug, Clone, Copy, Args)]
pub struct ModelArgs {
    #[arg(long, default_value = "general", value_parser = parse_class)]
    pub class: DistributionClass,
    /// Grid resolution of the maximin program.
    #[arg(long = "M", default_value_t = 200, value_parser = parse_m)]
    pub m: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct StudyArgs {
    #[arg(long, default_value = "regular", value_parser = parse_class)]
    pub class: DistributionClass,
    #[arg(long = "M", default_value_t = 200, value_parser = parse_m)]
    pub m: usize,
    #[arg(long, default_value = "1,100", value_parser = parse_bounds)]
    pub bounds: (f64, f64),
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory; defaults to $ROBUSTPRICE_OUT_DIR, then the working directory.
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FirstPoint {
    #[arg(long, default_value_t = 10.0)]
    pub p1: f64,
    /// Comma-separated first-point conversion rates.
    #[arg(long, default_value = "0.01,0.1,0.25,0.5,0.75,0.9,0.99", value_delimiter = ',')]
    pub q1: Vec<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Study {
    /// Value of a finite-difference gradient measurement next to the first point.
    Gradient {
        #[command(flatten)]
        common: StudyArgs,
        #[command(flatten)]
        first: FirstPoint,
        /// Relative price increment of the second measurement.
        #[arg(long, default_value_t = 0.01, value_parser = parse_eps)]
        eps: f64,
        /// Rates swept across the consistent band at the second price.
        #[arg(long, default_value_t = 41)]
        points: usize,
    },
    /// Value of knowing only the sign of the revenue gradient.
    GradientSign {
        #[command(flatten)]
        common: StudyArgs,
        #[command(flatten)]
        first: FirstPoint,
    },
    /// Best price for a second experiment.
    SecondPrice {
        #[command(flatten)]
        common: StudyArgs,
        #[command(flatten)]
        first: FirstPoint,
        #[arg(long, default_value_t = 40)]
        p2_count: usize,
        #[arg(long, default_value_t = 64)]
        q2_count: usize,
    },
    /// Queries used by ternary search and by the two stopping criteria.
    Ternary {
        #[command(flatten)]
        common: StudyArgs,
        /// Instances per demand family.
        #[arg(long, default_value_t = 100)]
        instances: usize,
        #[arg(long, default_value_t = 0.01, value_parser = parse_eps)]
        eps: f64,
        /// Query budget; by default the bracket shrinks below `eps · v_hi`.
        #[arg(long)]
        budget: Option<usize>,
    },
}

fn parse_class(s: &str) -> Result<DistributionClass, String> {
    s.parse().map_err(|e: robustprice::PricingError| e.to_string())
}

fn parse_m(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(m) if m >= 1 => Ok(m),
        _ => Err(format!("M must be an integer ≥ 1, got '{s}'")),
    }
}

fn parse_eps(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(e) if e > 0.0 && e < 1.0 => Ok(e),
        _ => Err(format!("eps must lie in (0, 1), got '{s}'")),
    }
}

fn parse_bounds(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(',').ok_or_else(|| format!("bounds must be 'lo,hi', got '{s}'"))?;
    let lo: f64 = lo.trim().parse().map_err(|_| format!("bad lower bound '{lo}'"))?;
    let hi: f64 = hi.trim().parse().map_err(|_| format!("bad upper bound '{hi}'"))?;
    robustprice::Bounds::new(lo, hi).map_err(|e| e.to_string())?;
    Ok((lo, hi))
}
