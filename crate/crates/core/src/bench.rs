//! Benchmark circuit generators.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, Gate};
use crate::error::{ResizeError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Bv,
    Dj,
    QaoaRing,
    Ghz,
}

impl FromStr for Family {
    type Err = ResizeError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bv" => Ok(Family::Bv),
            "dj" => Ok(Family::Dj),
            "qaoa-ring" | "qaoa" => Ok(Family::QaoaRing),
            "ghz" => Ok(Family::Ghz),
            other => Err(ResizeError::UnsupportedFamily(other.to_string())),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Bv => "bv",
            Family::Dj => "dj",
            Family::QaoaRing => "qaoa-ring",
            Family::Ghz => "ghz",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BenchOptions {
    /// BV secret over the `n − 1` data wires, wire 0 first. Defaults to all ones.
    pub secret: Option<Vec<bool>>,
    /// DJ balanced-function mask: data wires flipped around the oracle.
    /// Defaults to every other wire starting at 0.
    pub mask: Option<Vec<bool>>,
    /// Seed for QAOA angles.
    pub seed: u64,
}

/// The instance a generator actually built, for reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchInstance {
    pub family: Family,
    pub n: usize,
    pub secret: Option<String>,
    pub mask: Option<String>,
    pub angles: Option<(f64, f64)>,
    pub seed: u64,
}

pub fn parse_bits(s: &str) -> Result<Vec<bool>> {
    s.chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            other => Err(ResizeError::InvalidArgument(format!("bit string contains {other:?}"))),
        })
        .collect()
}

fn bits_to_string(bits: &[bool]) -> String {
    bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

pub fn generate_benchmark(family: Family, n: usize, opts: &BenchOptions) -> Result<Circuit> {
    generate_benchmark_with_instance(family, n, opts).map(|(c, _)| c)
}

pub fn generate_benchmark_with_instance(
    family: Family,
    n: usize,
    opts: &BenchOptions,
) -> Result<(Circuit, BenchInstance)> {
    if n < 2 {
        return Err(ResizeError::InvalidArgument(format!("benchmarks need n >= 2, got {n}")));
    }
    let mut inst = BenchInstance { family, n, secret: None, mask: None, angles: None, seed: opts.seed };
    let mut c = Circuit::new(n);
    let data = n - 1;
    let anc = n - 1;
    let fixed_len = |bits: Option<&Vec<bool>>, default: Vec<bool>, what: &str| -> Result<Vec<bool>> {
        match bits {
            Some(b) if b.len() != data => Err(ResizeError::InvalidArgument(format!(
                "{what} has {} bits, expected {data}",
                b.len()
            ))),
            Some(b) => Ok(b.clone()),
            None => Ok(default),
        }
    };
    match family {
        Family::Bv => {
            let secret = fixed_len(opts.secret.as_ref(), vec![true; data], "secret")?;
            for w in 0..data {
                c.push(Gate::h(w))?;
            }
            c.push(Gate::x(anc))?;
            c.push(Gate::h(anc))?;
            for (w, _) in secret.iter().enumerate().filter(|(_, b)| **b) {
                c.push(Gate::cnot(w, anc))?;
            }
            for w in 0..data {
                c.push(Gate::h(w))?;
            }
            inst.secret = Some(bits_to_string(&secret));
        }
        Family::Dj => {
            let mask = fixed_len(opts.mask.as_ref(), (0..data).map(|i| i % 2 == 0).collect(), "mask")?;
            for w in 0..data {
                c.push(Gate::h(w))?;
            }
            c.push(Gate::x(anc))?;
            c.push(Gate::h(anc))?;
            for (w, _) in mask.iter().enumerate().filter(|(_, b)| **b) {
                c.push(Gate::x(w))?;
            }
            for w in 0..data {
                c.push(Gate::cnot(w, anc))?;
            }
            for (w, _) in mask.iter().enumerate().filter(|(_, b)| **b) {
                c.push(Gate::x(w))?;
            }
            for w in 0..data {
                c.push(Gate::h(w))?;
            }
            inst.mask = Some(bits_to_string(&mask));
        }
        Family::QaoaRing => {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            let gamma = rng.gen_range(0.0..std::f64::consts::PI);
            let beta = rng.gen_range(0.0..std::f64::consts::PI);
            for w in 0..n {
                c.push(Gate::h(w))?;
            }
            let edges: Vec<(usize, usize)> = if n == 2 {
                vec![(0, 1)]
            } else {
                (0..n).map(|i| (i, (i + 1) % n)).collect()
            };
            for (a, b) in edges {
                c.push(Gate::cnot(a, b))?;
                c.push(Gate::rz(b, 2.0 * gamma))?;
                c.push(Gate::cnot(a, b))?;
            }
            for w in 0..n {
                c.push(Gate::rx(w, 2.0 * beta))?;
            }
            inst.angles = Some((gamma, beta));
        }
        Family::Ghz => {
            c.push(Gate::h(0))?;
            for w in 1..n {
                c.push(Gate::cnot(w - 1, w))?;
            }
        }
    }
    Ok((c, inst))
}
