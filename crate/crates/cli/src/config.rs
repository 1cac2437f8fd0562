//! Job configuration and the parsers behind the command-line flags.

use std::path::{Path, PathBuf};

use num_bigint::BigInt;
use num_rational::BigRational;
use serde_json::Value;
use thetaforge::cluster::ClusterFlavor;
use thetaforge::lattice::{LatticeVec, Point};

use crate::error::{CliError, CliResult};

pub const ORDER_CAP_VAR: &str = "THETAFORGE_ORDER_CAP";
pub const DEFAULT_ORDER_CAP: u32 = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Svg,
    Text,
}

impl Format {
    pub fn name(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
            Format::Svg => "svg",
            Format::Text => "text",
        }
    }
}

/// Where the diagram comes from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Source {
    /// Initial-data JSON: a lattice and a list of full lines.
    Init(PathBuf),
    /// Seed JSON, turned into the diagram of the chosen flavor.
    Seed(PathBuf),
    None,
}

#[derive(Clone, Debug)]
pub struct JobConfig {
    pub command: &'static str,
    pub source: Source,
    pub order: u32,
    pub flavor: ClusterFlavor,
    pub format: Format,
    pub q: Option<Point>,
    /// Mutation indices, 0-based.
    pub jseq: Vec<usize>,
    /// Arithmetic is exact throughout; kept so configurations stay stable.
    pub exact: bool,
    pub out: Option<PathBuf>,
    pub window: Option<[f64; 4]>,
}

/// The order cap from the environment, or the default.
pub fn order_cap() -> CliResult<u32> {
    match std::env::var(ORDER_CAP_VAR) {
        Ok(s) => s
            .trim()
            .parse::<u32>()
            .ok()
            .filter(|&c| c >= 1)
            .ok_or_else(|| CliError::Usage(format!("{ORDER_CAP_VAR}={s:?} is not a positive integer"))),
        Err(_) => Ok(DEFAULT_ORDER_CAP),
    }
}

/// Checks `1 <= k <= cap`.
pub fn check_order(k: u32, cap: u32) -> CliResult<u32> {
    if k == 0 {
        return Err(CliError::Usage("--order must be at least 1".into()));
    }
    if k > cap {
        return Err(CliError::Usage(format!("--order {k} exceeds the order cap {cap} (set {ORDER_CAP_VAR} to raise it)")));
    }
    Ok(k)
}

pub fn parse_rational(s: &str) -> Result<BigRational, String> {
    let s = s.trim();
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s, "1"),
    };
    let num: BigInt = num.parse().map_err(|_| format!("bad numerator in {s:?}"))?;
    let den: BigInt = den.parse().map_err(|_| format!("bad denominator in {s:?}"))?;
    if den == BigInt::from(0) {
        return Err(format!("zero denominator in {s:?}"));
    }
    Ok(BigRational::new(num, den))
}

/// A chart point written `num/den,num/den`.
pub fn parse_point(s: &str) -> Result<Point, String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err(format!("expected two coordinates \"x,y\", got {s:?}"));
    }
    Ok([parse_rational(parts[0])?, parse_rational(parts[1])?])
}

pub fn parse_ints(s: &str) -> Result<Vec<i64>, String> {
    s.split(',')
        .map(|x| x.trim().parse::<i64>().map_err(|_| format!("bad integer {x:?} in {s:?}")))
        .collect()
}

/// A lattice vector written `a,b,...`.
pub fn parse_vec(s: &str) -> Result<LatticeVec, String> {
    parse_ints(s).map(LatticeVec)
}

/// A 1-based mutation sequence `1,2,1`, returned 0-based. The empty string is the empty sequence.
pub fn parse_jseq(s: &str) -> Result<Jseq, String> {
    if s.trim().is_empty() {
        return Ok(Jseq(Vec::new()));
    }
    parse_ints(s)?
        .into_iter()
        .map(|j| if j >= 1 { Ok(j as usize - 1) } else { Err(format!("mutation indices start at 1, got {j}")) })
        .collect::<Result<Vec<_>, _>>()
        .map(Jseq)
}

pub fn parse_pair(s: &str) -> Result<[i64; 2], String> {
    match parse_ints(s)?.as_slice() {
        [a, b] => Ok([*a, *b]),
        _ => Err(format!("expected two integers, got {s:?}")),
    }
}

pub fn parse_window(s: &str) -> Result<[f64; 4], String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|_| format!("bad number {x:?}")))
        .collect::<Result<_, _>>()?;
    match v.as_slice() {
        [x0, y0, x1, y1] if x1 > x0 && y1 > y0 => Ok([*x0, *y0, *x1, *y1]),
        [_, _, _, _] => Err("window must satisfy x0 < x1 and y0 < y1".into()),
        _ => Err(format!("expected x0,y0,x1,y1, got {s:?}")),
    }
}

pub fn parse_flavor(s: &str) -> Result<ClusterFlavor, String> {
    s.parse().map_err(|e: thetaforge::Error| e.to_string())
}

/// 0-based mutation sequence.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Jseq(pub Vec<usize>);

pub fn read_json(path: &Path) -> CliResult<Value> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.display().to_string(), source })?;
    serde_json::from_str(&text).map_err(|source| CliError::Json { path: path.display().to_string(), source })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rationals_and_points() {
        assert_eq!(parse_rational("-3/6").unwrap(), BigRational::new((-1).into(), 2.into()));
        assert_eq!(parse_rational(" 4 ").unwrap(), BigRational::from_integer(4.into()));
        assert!(parse_rational("1/0").is_err());
        let q = parse_point("1/2,-7/3").unwrap();
        assert_eq!(q[1], BigRational::new((-7).into(), 3.into()));
        assert!(parse_point("1,2,3").is_err());
    }

    #[test]
    fn jseq_is_one_based() {
        assert_eq!(parse_jseq("1,2,1").unwrap(), Jseq(vec![0, 1, 0]));
        assert_eq!(parse_jseq("").unwrap(), Jseq(vec![]));
        assert!(parse_jseq("0").is_err());
    }

    #[test]
    fn order_bounds() {
        assert!(check_order(0, 12).is_err());
        assert_eq!(check_order(12, 12).unwrap(), 12);
        assert_eq!(check_order(13, 12).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn windows() {
        assert_eq!(parse_window("-5,-5,5,5").unwrap(), [-5.0, -5.0, 5.0, 5.0]);
        assert!(parse_window("5,0,1,1").is_err());
        assert!(parse_window("1,2").is_err());
    }
}
