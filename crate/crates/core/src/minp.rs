//! Empirical check of the minP-property, and the adversarial mixture that
//! violates it.
//!
//! The check uses a split-half protocol: randomized datasets `1..=n/2` are
//! treated as if each were the original, and the p-value of its most extreme
//! pattern is computed against datasets `n/2+1..=n` (plus itself, which always
//! ties). With `q_i = |A(D_i)| * min p`, the property requires
//! `|{i : q_i <= t}| / (n/2) <= t` for every `t` in `[0, 1]`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::BinaryDataset;
use crate::error::{Error, Result};
use crate::mining::{run_miner, MinerSpec, PatternOutput};
use crate::randomize::RandomizerSpec;
use crate::rng;
use crate::stats::StatisticKind;

pub const DEFAULT_GRID_POINTS: usize = 1000;

/// What is kept from a first-half output: its size and its extreme pattern.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extreme {
    pub size: usize,
    pub max_statistic: f64,
    /// Patterns of the same output tying with the maximum (at least 1).
    pub ties: usize,
}

impl Extreme {
    pub fn of(output: &PatternOutput) -> Option<Self> {
        let max = output
            .patterns
            .iter()
            .map(|p| p.statistic)
            .max_by(f64::total_cmp)?;
        let ties = output
            .patterns
            .iter()
            .filter(|p| p.statistic >= max)
            .count();
        Some(Self {
            size: output.len(),
            max_statistic: max,
            ties,
        })
    }
}

/// Reference outputs (the second half), kept as sorted statistics.
#[derive(Debug, Clone)]
pub struct Reference {
    sorted: Vec<Vec<f64>>,
    pool_total: u64,
}

impl Reference {
    pub fn new(outputs: Vec<Vec<f64>>) -> Self {
        let sorted: Vec<Vec<f64>> = outputs
            .into_iter()
            .map(|mut v| {
                v.sort_by(f64::total_cmp);
                v
            })
            .collect();
        let pool_total = sorted.iter().map(|v| v.len() as u64).sum();
        Self { sorted, pool_total }
    }

    fn count_at_least(v: &[f64], x: f64) -> usize {
        v.len() - v.partition_point(|&s| s < x)
    }

    /// Sample-based p-value of a dataset's extreme pattern.
    pub fn p_sample(&self, e: &Extreme) -> f64 {
        let h: f64 = self
            .sorted
            .iter()
            .filter(|v| !v.is_empty())
            .map(|v| Self::count_at_least(v, e.max_statistic) as f64 / v.len() as f64)
            .sum();
        (h + e.ties as f64 / e.size as f64) / (self.sorted.len() + 1) as f64
    }

    /// Pool-based p-value of a dataset's extreme pattern.
    pub fn p_pool(&self, e: &Extreme) -> f64 {
        let hits: u64 = self
            .sorted
            .iter()
            .map(|v| Self::count_at_least(v, e.max_statistic) as u64)
            .sum();
        (hits + e.ties as u64) as f64 / (self.pool_total + e.size as u64) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinPCurve {
    /// Sorted `|A(D_i)| * min p` values of the non-empty first-half outputs.
    pub p_hats: Vec<f64>,
    pub grid: Vec<f64>,
    /// `|{i : q_i <= t}| / n_half` at each grid point.
    pub empirical: Vec<f64>,
    /// `empirical - t`.
    pub exceedance: Vec<f64>,
    pub max_exceedance: f64,
    /// Number of first-half datasets used.
    pub n_half: usize,
    /// First-half datasets skipped because their output was empty.
    pub skipped_empty: usize,
    /// True when `empirical - t <= 2 sqrt(t (1 - t) / n_half)` at every grid point.
    pub pass: bool,
}

pub fn uniform_grid(points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![1.0],
        _ => (0..points)
            .map(|j| j as f64 / (points - 1) as f64)
            .collect(),
    }
}

/// Two-standard-error allowance for the empirical fraction at `t`.
pub fn tolerance(t: f64, n_half: usize) -> f64 {
    if n_half == 0 {
        return 0.0;
    }
    2.0 * (t * (1.0 - t) / n_half as f64).sqrt()
}

impl MinPCurve {
    pub fn from_p_hats(mut p_hats: Vec<f64>, grid: Vec<f64>, skipped_empty: usize) -> Self {
        p_hats.sort_by(f64::total_cmp);
        let n = p_hats.len();
        let empirical: Vec<f64> = grid
            .iter()
            .map(|&t| {
                if n == 0 {
                    0.0
                } else {
                    p_hats.partition_point(|&q| q <= t) as f64 / n as f64
                }
            })
            .collect();
        let exceedance: Vec<f64> = empirical.iter().zip(&grid).map(|(f, t)| f - t).collect();
        let max_exceedance = exceedance.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let pass = exceedance
            .iter()
            .zip(&grid)
            .all(|(e, &t)| *e <= tolerance(t, n));
        Self {
            p_hats,
            grid,
            empirical,
            exceedance,
            max_exceedance: if max_exceedance.is_finite() {
                max_exceedance
            } else {
                0.0
            },
            n_half: n,
            skipped_empty,
            pass,
        }
    }

    /// Empirical fraction at an arbitrary `t`.
    pub fn fraction_at(&self, t: f64) -> f64 {
        if self.p_hats.is_empty() {
            return 0.0;
        }
        self.p_hats.partition_point(|&q| q <= t) as f64 / self.p_hats.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinPResult {
    pub sample: MinPCurve,
    pub pool: MinPCurve,
}

/// Split-half minP check over any source of randomized outputs.
/// `output(i)` must return the mined output of randomized dataset `i`.
pub fn minp_check<F>(output: F, n_total: usize, grid_points: usize) -> Result<MinPResult>
where
    F: Fn(u64) -> Result<PatternOutput> + Sync,
{
    if n_total < 2 || !n_total.is_multiple_of(2) {
        return Err(Error::invalid(format!(
            "n_total must be even and >= 2, got {n_total}"
        )));
    }
    let half = n_total / 2;
    let first: Vec<Option<Extreme>> = (0..half as u64)
        .into_par_iter()
        .map(|i| output(i).map(|o| Extreme::of(&o)))
        .collect::<Result<_>>()?;
    let second: Vec<Vec<f64>> = (half as u64..n_total as u64)
        .into_par_iter()
        .map(|i| output(i).map(|o| o.statistics()))
        .collect::<Result<_>>()?;
    let reference = Reference::new(second);
    let skipped = first.iter().filter(|e| e.is_none()).count();
    let extremes: Vec<Extreme> = first.into_iter().flatten().collect();
    let q = |p: f64, e: &Extreme| e.size as f64 * p;
    let sample = extremes
        .iter()
        .map(|e| q(reference.p_sample(e), e))
        .collect();
    let pool = extremes.iter().map(|e| q(reference.p_pool(e), e)).collect();
    let grid = uniform_grid(grid_points);
    Ok(MinPResult {
        sample: MinPCurve::from_p_hats(sample, grid.clone(), skipped),
        pool: MinPCurve::from_p_hats(pool, grid, skipped),
    })
}

/// minP check for a binary-data pipeline.
pub fn minp_test(
    d: &BinaryDataset,
    randomizer: &RandomizerSpec,
    miner: &MinerSpec,
    stat: StatisticKind,
    n_total: usize,
) -> Result<MinPResult> {
    randomizer.validate()?;
    miner.validate()?;
    minp_check(
        |i| {
            let r = randomizer.randomize(d, i)?;
            run_miner(&r, miner, stat, Some(i))
        },
        n_total,
        DEFAULT_GRID_POINTS,
    )
}

/// Writes `t,empirical_fraction,diagonal` rows. Numbers use the shortest
/// decimal form that parses back to the same `f64`.
pub fn curve_to_csv(c: &MinPCurve) -> String {
    let mut out = String::from("t,empirical_fraction,diagonal\n");
    for (t, f) in c.grid.iter().zip(&c.empirical) {
        writeln!(out, "{t:?},{f:?},{t:?}").unwrap();
    }
    out
}

pub fn curve_export(c: &MinPCurve, path: &Path) -> Result<()> {
    fs::write(path, curve_to_csv(c)).map_err(|e| Error::io(path, e))
}

/// Parses a curve CSV back into `(t, empirical_fraction)` pairs.
pub fn parse_curve_csv(text: &str) -> Result<Vec<(f64, f64)>> {
    let mut lines = text.lines();
    match lines.next() {
        Some("t,empirical_fraction,diagonal") => {}
        _ => {
            return Err(Error::Parse {
                line: 1,
                message: "missing curve header".into(),
            })
        }
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let f: Vec<&str> = line.split(',').collect();
            let num = |s: &str| {
                s.parse::<f64>().map_err(|_| Error::Parse {
                    line: i + 2,
                    message: format!("invalid number {s:?}"),
                })
            };
            if f.len() != 3 {
                return Err(Error::Parse {
                    line: i + 2,
                    message: "expected 3 fields".into(),
                });
            }
            Ok((num(f[0])?, num(f[1])?))
        })
        .collect()
}

/// Exact `Pr(m * p' <= t)` for the adversarial mixture: with probability 4/5
/// one pattern with `p ~ U(1/10, 1)`, otherwise two patterns whose smaller
/// p-value is `U(0, 1/10)`.
pub fn adversarial_exact(t: f64) -> f64 {
    let one = ((t - 0.1) / 0.9).clamp(0.0, 1.0);
    let two = (t / 2.0 / 0.1).clamp(0.0, 1.0);
    0.8 * one + 0.2 * two
}

const ADVERSARIAL_BATCH: usize = 10_000;

/// Monte Carlo estimate of `Pr(m * p' <= t)` for the adversarial mixture.
pub fn adversarial_probability(runs: usize, t: f64, seed: u64) -> Result<f64> {
    if runs == 0 {
        return Err(Error::invalid("runs must be >= 1"));
    }
    let batches = runs.div_ceil(ADVERSARIAL_BATCH);
    let hits: usize = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = rng::stream(seed, b as u64);
            let len = ADVERSARIAL_BATCH.min(runs - b * ADVERSARIAL_BATCH);
            (0..len)
                .filter(|_| {
                    let scaled = if rng.random_bool(0.8) {
                        rng.random_range(0.1..1.0)
                    } else {
                        let small: f64 = rng.random_range(0.0..0.1);
                        let _large: f64 = rng.random_range(0.1..1.0);
                        2.0 * small
                    };
                    scaled <= t
                })
                .count()
        })
        .sum();
    Ok(hits as f64 / runs as f64)
}

/// Estimate at the reference threshold `t = 3/5` (exact value 29/45).
pub fn adversarial_simulation(runs: usize, seed: u64) -> Result<f64> {
    adversarial_probability(runs, 0.6, seed)
}
