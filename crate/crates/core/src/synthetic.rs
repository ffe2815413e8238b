//! Controlled experiments on equicorrelated Gaussian vectors.
//!
//! A dataset is one vector of length `k` drawn from `N(mu, C)` with unit
//! variances and common correlation `sigma`. Coordinates `0..m0` are null
//! (mean 0); the rest have mean `alt_mean`. The null distribution used for
//! p-values always has mean 0. The "mined patterns" are coordinates selected by
//! one of three toy algorithms, with the coordinate value as the statistic.

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mining::{Pattern, PatternOutput, ScoredPattern};
use crate::rng::{self, StreamRng};
use crate::significance::{holm_unsorted, NullEnsemble};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianConfig {
    pub k: usize,
    pub sigma: f64,
    pub m0: usize,
    pub alt_mean: f64,
    pub runs: usize,
    pub n_null: usize,
    pub seed: u64,
}

impl Default for GaussianConfig {
    fn default() -> Self {
        Self {
            k: 100,
            sigma: 0.0,
            m0: 100,
            alt_mean: 4.0,
            runs: 1000,
            n_null: 1000,
            seed: 0,
        }
    }
}

impl GaussianConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::invalid("k must be >= 1"));
        }
        let lower = if self.k > 1 {
            -1.0 / (self.k - 1) as f64
        } else {
            0.0
        };
        if !(self.sigma >= lower && self.sigma <= 1.0) {
            return Err(Error::invalid(format!(
                "sigma {} outside [{lower}, 1]: covariance not positive semi-definite",
                self.sigma
            )));
        }
        if self.m0 > self.k {
            return Err(Error::invalid("m0 must be <= k"));
        }
        if self.runs == 0 {
            return Err(Error::invalid("runs must be >= 1"));
        }
        Ok(())
    }

    pub fn m1(&self) -> usize {
        self.k - self.m0
    }
}

/// Draws vectors with covariance `(1 - sigma) I + sigma 11^T`.
///
/// For `sigma >= 0`: `x = sqrt(sigma) z0 1 + sqrt(1 - sigma) z`. For
/// `sigma < 0`: `x = a z + b (sum z) 1` with `a = sqrt(1 - sigma)` and
/// `k b^2 + 2 a b = sigma`, which is real exactly when `sigma >= -1/(k-1)`.
#[derive(Debug, Clone, Copy)]
pub struct GaussianSampler {
    k: usize,
    own: f64,
    shared: f64,
    negative: bool,
}

impl GaussianSampler {
    pub fn new(k: usize, sigma: f64) -> Self {
        if sigma >= 0.0 {
            Self {
                k,
                own: (1.0 - sigma).sqrt(),
                shared: sigma.sqrt(),
                negative: false,
            }
        } else {
            let a = (1.0 - sigma).sqrt();
            let disc = (1.0 + (k as f64 - 1.0) * sigma).max(0.0);
            Self {
                k,
                own: a,
                shared: (disc.sqrt() - a) / k as f64,
                negative: true,
            }
        }
    }

    /// Zero-mean draw.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        if self.negative {
            let z: Vec<f64> = (0..self.k).map(|_| rng.sample(StandardNormal)).collect();
            let common = self.shared * z.iter().sum::<f64>();
            z.into_iter().map(|zi| self.own * zi + common).collect()
        } else {
            let z0: f64 = rng.sample(StandardNormal);
            let common = self.shared * z0;
            (0..self.k)
                .map(|_| common + self.own * rng.sample::<f64, _>(StandardNormal))
                .collect()
        }
    }
}

/// One vector with the configured means (alternative coordinates shifted).
pub fn sample_gaussian<R: Rng + ?Sized>(cfg: &GaussianConfig, rng: &mut R) -> Vec<f64> {
    let mut v = GaussianSampler::new(cfg.k, cfg.sigma).draw(rng);
    for x in &mut v[cfg.m0..] {
        *x += cfg.alt_mean;
    }
    v
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    /// Every coordinate with value >= 1.
    Ge1,
    /// The 10 largest values, ties to the lower index.
    Max10,
    /// 10 distinct coordinates uniformly at random.
    Rnd10,
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ge1" => Ok(Self::Ge1),
            "max10" => Ok(Self::Max10),
            "rnd10" => Ok(Self::Rnd10),
            other => Err(Error::invalid(format!("unknown algorithm {other:?}"))),
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Ge1 => "ge1",
            Algorithm::Max10 => "max10",
            Algorithm::Rnd10 => "rnd10",
        })
    }
}

fn coordinates(v: &[f64], idx: impl IntoIterator<Item = usize>) -> PatternOutput {
    PatternOutput {
        patterns: idx
            .into_iter()
            .map(|i| ScoredPattern {
                pattern: Pattern::Coordinate { index: i },
                statistic: v[i],
            })
            .collect(),
        source: None,
    }
}

pub fn alg_ge1(v: &[f64]) -> PatternOutput {
    coordinates(v, (0..v.len()).filter(|&i| v[i] >= 1.0))
}

pub fn alg_max10(v: &[f64]) -> Result<PatternOutput> {
    if v.len() < 10 {
        return Err(Error::invalid(format!(
            "max10 needs k >= 10, got {}",
            v.len()
        )));
    }
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[b].total_cmp(&v[a]).then(a.cmp(&b)));
    idx.truncate(10);
    idx.sort_unstable();
    Ok(coordinates(v, idx))
}

pub fn alg_rnd10<R: Rng + ?Sized>(v: &[f64], rng: &mut R) -> Result<PatternOutput> {
    if v.len() < 10 {
        return Err(Error::invalid(format!(
            "rnd10 needs k >= 10, got {}",
            v.len()
        )));
    }
    let mut idx = index::sample(rng, v.len(), 10).into_vec();
    idx.sort_unstable();
    Ok(coordinates(v, idx))
}

impl Algorithm {
    pub fn apply<R: Rng + ?Sized>(self, v: &[f64], rng: &mut R) -> Result<PatternOutput> {
        match self {
            Algorithm::Ge1 => Ok(alg_ge1(v)),
            Algorithm::Max10 => alg_max10(v),
            Algorithm::Rnd10 => alg_rnd10(v, rng),
        }
    }
}

/// Everything computed in one simulation run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub original: PatternOutput,
    pub p_sample: Vec<f64>,
    pub p_pool: Vec<f64>,
    pub holm_sample: Vec<f64>,
    pub holm_pool: Vec<f64>,
}

impl RunOutcome {
    fn is_null(&self, i: usize, m0: usize) -> bool {
        matches!(self.original.patterns[i].pattern, Pattern::Coordinate { index } if index < m0)
    }

    /// Smallest Holm-adjusted p-value among null coordinates, per method.
    /// `None` when no null coordinate was output.
    pub fn min_null_adjusted(&self, m0: usize) -> (Option<f64>, Option<f64>) {
        let pick = |adj: &[f64]| {
            adj.iter()
                .enumerate()
                .filter(|&(i, _)| self.is_null(i, m0))
                .map(|(_, &a)| a)
                .min_by(f64::total_cmp)
        };
        (pick(&self.holm_sample), pick(&self.holm_pool))
    }
}

const DATA_SALT: u64 = 0x00da_7a00;
const ALG_SALT: u64 = 0x0a19_0000;

/// Runs simulation `run`: draws the original vector, mines it, draws
/// `n_null` null vectors, mines those, and computes both p-values and their
/// Holm adjustments for the original patterns.
pub fn simulate_run(cfg: &GaussianConfig, alg: Algorithm, run: u64) -> Result<RunOutcome> {
    let run_seed = rng::derive(cfg.seed, run);
    let data_seed = rng::derive(run_seed, DATA_SALT);
    let alg_seed = rng::derive(run_seed, ALG_SALT);
    let alg_rng = |i: u64| -> StreamRng { rng::stream(alg_seed, i) };

    let original_vec = sample_gaussian(cfg, &mut rng::stream(data_seed, 0));
    let original = alg.apply(&original_vec, &mut alg_rng(0))?;
    let null_sampler = GaussianSampler::new(cfg.k, cfg.sigma);
    let mut null_stats = Vec::with_capacity(cfg.n_null);
    for i in 1..=cfg.n_null as u64 {
        let v = null_sampler.draw(&mut rng::stream(data_seed, i));
        null_stats.push(alg.apply(&v, &mut alg_rng(i))?.statistics());
    }
    if original.is_empty() {
        return Ok(RunOutcome {
            original,
            p_sample: Vec::new(),
            p_pool: Vec::new(),
            holm_sample: Vec::new(),
            holm_pool: Vec::new(),
        });
    }
    let ens = NullEnsemble::from_statistics(original.clone(), null_stats)?;
    let stats = original.statistics();
    let pv: Vec<_> = stats
        .iter()
        .map(|&s| ens.p_values_for(s))
        .collect::<Result<_>>()?;
    let p_sample: Vec<f64> = pv.iter().map(|p| p.sample).collect();
    let p_pool: Vec<f64> = pv.iter().map(|p| p.pool).collect();
    Ok(RunOutcome {
        holm_sample: holm_unsorted(&p_sample),
        holm_pool: holm_unsorted(&p_pool),
        original,
        p_sample,
        p_pool,
    })
}

/// `0.00, 0.01, ..., 1.00`.
pub fn default_alpha_grid() -> Vec<f64> {
    (0..=100).map(|i| i as f64 / 100.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FwerCurve {
    pub alphas: Vec<f64>,
    /// Fraction of runs with at least one null coordinate declared significant.
    pub sample: Vec<f64>,
    pub pool: Vec<f64>,
    pub runs: usize,
    /// Runs whose original output was empty.
    pub empty_runs: usize,
}

/// Per run: smallest null adjusted p (sample, pool) and whether the output was empty.
type RunMins = (Option<f64>, Option<f64>, bool);

/// Empirical `Pr(V > 0)` over the alpha grid for both p-value methods.
pub fn fwer_experiment(cfg: &GaussianConfig, alg: Algorithm, alphas: &[f64]) -> Result<FwerCurve> {
    cfg.validate()?;
    let mins: Vec<RunMins> = (0..cfg.runs as u64)
        .into_par_iter()
        .map(|r| {
            let out = simulate_run(cfg, alg, r)?;
            let (s, p) = out.min_null_adjusted(cfg.m0);
            Ok((s, p, out.original.is_empty()))
        })
        .collect::<Result<_>>()?;
    let curve = |pick: fn(&RunMins) -> Option<f64>| -> Vec<f64> {
        alphas
            .iter()
            .map(|&a| {
                mins.iter()
                    .filter(|m| pick(m).is_some_and(|v| v <= a))
                    .count() as f64
                    / cfg.runs as f64
            })
            .collect()
    };
    Ok(FwerCurve {
        alphas: alphas.to_vec(),
        sample: curve(|m| m.0),
        pool: curve(|m| m.1),
        runs: cfg.runs,
        empty_runs: mins.iter().filter(|m| m.2).count(),
    })
}

/// Confusion counts for one run at one alpha.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ExperimentTally {
    /// Null coordinates not declared significant.
    pub u: usize,
    /// Null coordinates declared significant (Type I errors).
    pub v: usize,
    /// Alternative coordinates not declared significant (Type II errors).
    pub t: usize,
    /// Alternative coordinates declared significant.
    pub s: usize,
    pub r: usize,
}

impl ExperimentTally {
    /// Tally from Holm-adjusted values of the output patterns. Coordinates not
    /// output count as not declared significant.
    pub fn from_run(
        outcome: &RunOutcome,
        adjusted: &[f64],
        alpha: f64,
        m0: usize,
        m1: usize,
    ) -> Self {
        let mut v = 0;
        let mut s = 0;
        for (i, &a) in adjusted.iter().enumerate() {
            if a <= alpha {
                if outcome.is_null(i, m0) {
                    v += 1;
                } else {
                    s += 1;
                }
            }
        }
        Self {
            u: m0 - v,
            v,
            t: m1 - s,
            s,
            r: v + s,
        }
    }

    pub fn identities_hold(&self, m0: usize, m1: usize) -> bool {
        self.u + self.v == m0 && self.t + self.s == m1 && self.r == self.v + self.s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub alphas: Vec<f64>,
    /// `(false positive rate, true positive rate)` per alpha.
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

impl RocCurve {
    /// Trapezoid-rule AUC over the points sorted by FPR, closed with
    /// `(0, 0)` and `(1, 1)`.
    pub fn new(alphas: Vec<f64>, points: Vec<(f64, f64)>) -> Self {
        let mut pts = points.clone();
        pts.push((0.0, 0.0));
        pts.push((1.0, 1.0));
        pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        let auc = pts
            .windows(2)
            .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
            .sum();
        Self {
            alphas,
            points,
            auc,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodPower {
    pub roc: RocCurve,
    /// `Pr(V > 0)` per alpha.
    pub fwer: Vec<f64>,
    /// Mean `T / m1` per alpha.
    pub type2_fraction: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerResult {
    pub alphas: Vec<f64>,
    pub sample: MethodPower,
    pub pool: MethodPower,
    pub runs: usize,
}

#[derive(Default, Clone)]
struct Sums {
    v: Vec<u64>,
    s: Vec<u64>,
    any_v: Vec<u64>,
}

impl Sums {
    fn new(n: usize) -> Self {
        Self {
            v: vec![0; n],
            s: vec![0; n],
            any_v: vec![0; n],
        }
    }

    fn add(&mut self, other: &Sums) {
        for (a, b) in [
            (&mut self.v, &other.v),
            (&mut self.s, &other.s),
            (&mut self.any_v, &other.any_v),
        ] {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }

    fn finish(&self, alphas: &[f64], runs: usize, m0: usize, m1: usize) -> MethodPower {
        let runs_f = runs as f64;
        let rate = |x: u64, m: usize| {
            if m == 0 {
                0.0
            } else {
                x as f64 / (runs_f * m as f64)
            }
        };
        let points = (0..alphas.len())
            .map(|j| (rate(self.v[j], m0), rate(self.s[j], m1)))
            .collect();
        MethodPower {
            roc: RocCurve::new(alphas.to_vec(), points),
            fwer: self.any_v.iter().map(|&c| c as f64 / runs_f).collect(),
            type2_fraction: self.s.iter().map(|&s| 1.0 - rate(s, m1)).collect(),
        }
    }
}

/// Mean FPR/TPR per alpha for both methods, with Type I/II summaries. Rates
/// over an empty class (`m0 = 0` or `m0 = k`) are reported as 0.
pub fn power_experiment(
    cfg: &GaussianConfig,
    alg: Algorithm,
    alphas: &[f64],
) -> Result<PowerResult> {
    cfg.validate()?;
    let (m0, m1) = (cfg.m0, cfg.m1());
    let per_run: Vec<(Sums, Sums)> = (0..cfg.runs as u64)
        .into_par_iter()
        .map(|r| {
            let out = simulate_run(cfg, alg, r)?;
            let mut sums = (Sums::new(alphas.len()), Sums::new(alphas.len()));
            for (j, &a) in alphas.iter().enumerate() {
                for (adj, acc) in [
                    (&out.holm_sample, &mut sums.0),
                    (&out.holm_pool, &mut sums.1),
                ] {
                    let tally = ExperimentTally::from_run(&out, adj, a, m0, m1);
                    debug_assert!(tally.identities_hold(m0, m1));
                    acc.v[j] += tally.v as u64;
                    acc.s[j] += tally.s as u64;
                    acc.any_v[j] += u64::from(tally.v > 0);
                }
            }
            Ok(sums)
        })
        .collect::<Result<_>>()?;
    let mut sample = Sums::new(alphas.len());
    let mut pool = Sums::new(alphas.len());
    for (s, p) in &per_run {
        sample.add(s);
        pool.add(p);
    }
    Ok(PowerResult {
        alphas: alphas.to_vec(),
        sample: sample.finish(alphas, cfg.runs, m0, m1),
        pool: pool.finish(alphas, cfg.runs, m0, m1),
        runs: cfg.runs,
    })
}
