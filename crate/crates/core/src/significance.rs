//! Empirical p-values for mined patterns and their multiplicity adjustment.
//!
//! With randomized datasets `D_1..D_n` and the original `D_{n+1} = D`:
//!
//! * sample-based: `p(x) = sum_i h(x, D_i) / (n + 1)` where `h` is the fraction
//!   of `A(D_i)` whose statistic is `>= f(x, D)` (0 for an empty output);
//! * pool-based: `p(x) = sum_i |{y in A(D_i): f(y) >= f(x)}| / sum_i |A(D_i)|`.
//!
//! Only statistic values are compared; patterns are never matched across
//! datasets. Because the original output is part of the ensemble, every
//! pattern ties with itself and all p-values are strictly positive.
//!
//! The sample-based sum is accumulated per distinct output size as an integer
//! count divided once by `size * (n + 1)`. When all outputs have the same size
//! the two methods therefore agree bit for bit.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mining::{MinerSpec, Pattern, PatternOutput};
use crate::randomize::RandomizerSpec;
use crate::stats::StatisticKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PValueMethod {
    Sample,
    Pool,
    Both,
}

impl PValueMethod {
    pub fn wants_sample(self) -> bool {
        matches!(self, PValueMethod::Sample | PValueMethod::Both)
    }

    pub fn wants_pool(self) -> bool {
        matches!(self, PValueMethod::Pool | PValueMethod::Both)
    }
}

impl FromStr for PValueMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sample" => Ok(Self::Sample),
            "pool" => Ok(Self::Pool),
            "both" => Ok(Self::Both),
            other => Err(Error::invalid(format!("unknown p-value method {other:?}"))),
        }
    }
}

impl fmt::Display for PValueMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PValueMethod::Sample => "sample",
            PValueMethod::Pool => "pool",
            PValueMethod::Both => "both",
        })
    }
}

/// Fraction of `target` whose statistic is at least `x_stat`; 0 if empty.
pub fn h_fraction(x_stat: f64, target: &PatternOutput) -> f64 {
    if target.is_empty() {
        return 0.0;
    }
    let count = target
        .patterns
        .iter()
        .filter(|p| x_stat <= p.statistic)
        .count();
    count as f64 / target.len() as f64
}

/// Number of entries of ascending `sorted` that are `>= x`.
fn count_at_least(sorted: &[f64], x: f64) -> usize {
    sorted.len() - sorted.partition_point(|&v| v < x)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PValues {
    pub sample: f64,
    pub pool: f64,
}

/// Outputs of `n` randomized datasets plus the original one.
///
/// Randomized outputs are kept only as sorted statistic vectors; the original
/// output is kept whole so that reports can name its patterns.
#[derive(Debug, Clone)]
pub struct NullEnsemble {
    original: PatternOutput,
    /// Ascending statistics of every output; the original is last.
    sorted: Vec<Vec<f64>>,
    /// Output size -> indices into `sorted`, for exact sample-based sums.
    by_size: BTreeMap<usize, Vec<usize>>,
    pool_total: u64,
}

fn sorted_stats(mut v: Vec<f64>) -> Result<Vec<f64>> {
    if let Some(&bad) = v.iter().find(|s| !s.is_finite()) {
        return Err(Error::NonFiniteStatistic(bad));
    }
    v.sort_by(f64::total_cmp);
    Ok(v)
}

impl NullEnsemble {
    pub fn new(original: PatternOutput, randomized: &[PatternOutput]) -> Result<Self> {
        let stats = randomized.iter().map(PatternOutput::statistics).collect();
        Self::from_statistics(original, stats)
    }

    /// Builds the ensemble from the statistic values of each randomized output.
    pub fn from_statistics(original: PatternOutput, randomized: Vec<Vec<f64>>) -> Result<Self> {
        let mut sorted = randomized
            .into_iter()
            .map(sorted_stats)
            .collect::<Result<Vec<_>>>()?;
        sorted.push(sorted_stats(original.statistics())?);
        let mut by_size: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (i, s) in sorted.iter().enumerate() {
            if !s.is_empty() {
                by_size.entry(s.len()).or_default().push(i);
            }
        }
        let pool_total = sorted.iter().map(|s| s.len() as u64).sum();
        Ok(Self {
            original,
            sorted,
            by_size,
            pool_total,
        })
    }

    /// Number of randomized datasets.
    pub fn n(&self) -> usize {
        self.sorted.len() - 1
    }

    pub fn original(&self) -> &PatternOutput {
        &self.original
    }

    pub fn output_sizes(&self) -> Vec<usize> {
        self.sorted.iter().map(Vec::len).collect()
    }

    pub fn pool_size(&self) -> u64 {
        self.pool_total
    }

    /// Both p-values for a statistic value observed on the original data.
    pub fn p_values_for(&self, x_stat: f64) -> Result<PValues> {
        if self.pool_total == 0 {
            return Err(Error::NoPatterns);
        }
        let n1 = self.sorted.len() as u64;
        let mut sample = 0.0;
        let mut pooled = 0u64;
        for (&size, members) in &self.by_size {
            let hits: u64 = members
                .iter()
                .map(|&i| count_at_least(&self.sorted[i], x_stat) as u64)
                .sum();
            pooled += hits;
            sample += hits as f64 / (size as u64 * n1) as f64;
        }
        Ok(PValues {
            sample,
            pool: pooled as f64 / self.pool_total as f64,
        })
    }

    pub fn p_sample_stat(&self, x_stat: f64) -> f64 {
        let n1 = self.sorted.len() as u64;
        self.by_size
            .iter()
            .map(|(&size, members)| {
                let hits: u64 = members
                    .iter()
                    .map(|&i| count_at_least(&self.sorted[i], x_stat) as u64)
                    .sum();
                hits as f64 / (size as u64 * n1) as f64
            })
            .sum()
    }

    pub fn p_pool_stat(&self, x_stat: f64) -> Result<f64> {
        if self.pool_total == 0 {
            return Err(Error::NoPatterns);
        }
        let hits: u64 = self
            .sorted
            .iter()
            .map(|s| count_at_least(s, x_stat) as u64)
            .sum();
        Ok(hits as f64 / self.pool_total as f64)
    }

    fn stat_of(&self, x: &Pattern) -> Result<f64> {
        self.original
            .statistic_of(x)
            .ok_or(Error::PatternNotInOriginal)
    }

    /// Sample-based p-value of a pattern of the original output.
    pub fn p_sample(&self, x: &Pattern) -> Result<f64> {
        Ok(self.p_sample_stat(self.stat_of(x)?))
    }

    /// Pool-based p-value of a pattern of the original output.
    pub fn p_pool(&self, x: &Pattern) -> Result<f64> {
        self.p_pool_stat(self.stat_of(x)?)
    }

    /// p-values of every original pattern, in original output order.
    pub fn p_values(&self) -> Vec<PValues> {
        let stats = self.original.statistics();
        stats
            .par_iter()
            .map(|&s| self.p_values_for(s).expect("original output is nonempty"))
            .collect()
    }
}

/// `min(1, m * p_i)` elementwise.
pub fn adjust_bonferroni(p: &[f64], m: usize) -> Vec<f64> {
    p.iter().map(|&x| (m as f64 * x).min(1.0)).collect()
}

/// Holm step-down adjustment of ascending raw p-values:
/// `q_1 = min(1, m p_1)`, `q_i = min(1, max(q_{i-1}, (m - i + 1) p_i))`.
pub fn adjust_holm(p: &[f64]) -> Result<Vec<f64>> {
    if let Some(i) = p.windows(2).position(|w| w[1] < w[0]) {
        return Err(Error::Unsorted(i + 1));
    }
    let m = p.len();
    let mut out = Vec::with_capacity(m);
    let mut prev = 0.0f64;
    for (i, &pi) in p.iter().enumerate() {
        let q = ((m - i) as f64 * pi).max(prev).min(1.0);
        out.push(q);
        prev = q;
    }
    Ok(out)
}

/// Order that sorts `p` ascending, ties kept in input order.
pub fn ascending_order(p: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..p.len()).collect();
    idx.sort_by(|&a, &b| p[a].total_cmp(&p[b]));
    idx
}

/// Holm adjustment of p-values in arbitrary order; result is aligned with `p`.
pub fn holm_unsorted(p: &[f64]) -> Vec<f64> {
    let order = ascending_order(p);
    let sorted: Vec<f64> = order.iter().map(|&i| p[i]).collect();
    let adjusted = adjust_holm(&sorted).expect("sorted above");
    let mut out = vec![0.0; p.len()];
    for (rank, &i) in order.iter().enumerate() {
        out[i] = adjusted[rank];
    }
    out
}

/// Per-method outcome for one pattern.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    pub p: f64,
    /// Monte Carlo standard error `sqrt(p (1 - p) / n)`.
    pub std_error: f64,
    pub adjusted_holm: f64,
    pub adjusted_bonferroni: f64,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternRecord {
    pub pattern: Pattern,
    pub statistic: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sample: Option<MethodResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pool: Option<MethodResult>,
}

/// How the ensemble behind a report was produced.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Provenance {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub randomizer: Option<RandomizerSpec>,
    /// Swap attempts actually used when the randomizer default applied.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub effective_attempts: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub miner: Option<MinerSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub statistic: Option<StatisticKind>,
    pub seed: u64,
    /// Conventions that affect the numbers, stated in plain words.
    pub conventions: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceReport {
    pub alpha: f64,
    pub method: PValueMethod,
    /// Randomized datasets in the ensemble.
    pub n: usize,
    /// Patterns in the original output.
    pub m: usize,
    /// Sizes of the randomized outputs (mean, standard deviation).
    pub null_output_mean: f64,
    pub null_output_sd: f64,
    pub significant_sample: Option<usize>,
    pub significant_pool: Option<usize>,
    pub provenance: Provenance,
    /// Sorted by the primary method's raw p-value, ties by pattern order.
    pub records: Vec<PatternRecord>,
}

impl SignificanceReport {
    pub fn significant_patterns(&self) -> impl Iterator<Item = &PatternRecord> {
        let primary = self.method;
        self.records.iter().filter(move |r| match primary {
            PValueMethod::Pool => r.pool.is_some_and(|m| m.significant),
            _ => r.sample.is_some_and(|m| m.significant),
        })
    }
}

fn method_results(p: &[f64], n: usize, alpha: f64) -> Vec<MethodResult> {
    let m = p.len();
    let holm = holm_unsorted(p);
    let bonf = adjust_bonferroni(p, m);
    p.iter()
        .zip(holm.iter().zip(&bonf))
        .map(|(&p, (&h, &b))| MethodResult {
            p,
            std_error: if n == 0 {
                0.0
            } else {
                (p * (1.0 - p) / n as f64).sqrt()
            },
            adjusted_holm: h,
            adjusted_bonferroni: b,
            significant: h <= alpha,
        })
        .collect()
}

/// Computes p-values for every original pattern, adjusts them and flags those
/// with Holm-adjusted p-value `<= alpha`.
pub fn significant(
    ens: &NullEnsemble,
    method: PValueMethod,
    alpha: f64,
    provenance: Provenance,
) -> Result<SignificanceReport> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!(
            "alpha must be in (0, 1), got {alpha}"
        )));
    }
    let n = ens.n();
    let original = ens.original();
    let pv = ens.p_values();
    let sample: Vec<f64> = pv.iter().map(|v| v.sample).collect();
    let pool: Vec<f64> = pv.iter().map(|v| v.pool).collect();
    let sample_res = method
        .wants_sample()
        .then(|| method_results(&sample, n, alpha));
    let pool_res = method.wants_pool().then(|| method_results(&pool, n, alpha));

    let mut records: Vec<PatternRecord> = original
        .patterns
        .iter()
        .enumerate()
        .map(|(i, sp)| PatternRecord {
            pattern: sp.pattern.clone(),
            statistic: sp.statistic,
            sample: sample_res.as_ref().map(|r| r[i]),
            pool: pool_res.as_ref().map(|r| r[i]),
        })
        .collect();
    let key = |r: &PatternRecord| match method {
        PValueMethod::Pool => r.pool.map(|m| m.p),
        _ => r.sample.map(|m| m.p),
    };
    records.sort_by(|a, b| {
        key(a)
            .unwrap_or(0.0)
            .total_cmp(&key(b).unwrap_or(0.0))
            .then_with(|| a.pattern.cmp(&b.pattern))
    });

    let sizes: Vec<f64> = ens.output_sizes()[..n].iter().map(|&s| s as f64).collect();
    let (mean, sd) = mean_sd(&sizes);
    let count = |res: &Option<Vec<MethodResult>>| {
        res.as_ref()
            .map(|r| r.iter().filter(|m| m.significant).count())
    };
    Ok(SignificanceReport {
        alpha,
        method,
        n,
        m: original.len(),
        null_output_mean: mean,
        null_output_sd: sd,
        significant_sample: count(&sample_res),
        significant_pool: count(&pool_res),
        provenance,
        records,
    })
}

pub(crate) fn mean_sd(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mining::ScoredPattern;

    fn output(stats: &[f64]) -> PatternOutput {
        PatternOutput::new(
            stats
                .iter()
                .enumerate()
                .map(|(i, &s)| ScoredPattern {
                    pattern: Pattern::Coordinate { index: i },
                    statistic: s,
                })
                .collect(),
            None,
        )
        .unwrap()
    }

    #[test]
    fn h_fraction_cases() {
        assert_eq!(h_fraction(10.0, &output(&[1.0, 2.0, 3.0])), 0.0);
        assert_eq!(h_fraction(2.0, &output(&[2.0])), 1.0);
        assert_eq!(h_fraction(2.0, &output(&[1.0, 2.0, 3.0])), 2.0 / 3.0);
        assert_eq!(h_fraction(0.0, &output(&[])), 0.0);
    }

    #[test]
    fn only_original() {
        let ens = NullEnsemble::new(output(&[4.0]), &[]).unwrap();
        let x = Pattern::Coordinate { index: 0 };
        assert_eq!(ens.n(), 0);
        assert_eq!(ens.p_sample(&x).unwrap(), 1.0);
        assert_eq!(ens.p_pool(&x).unwrap(), 1.0);
    }

    #[test]
    fn one_random_dataset() {
        let ens = NullEnsemble::new(output(&[5.0]), &[output(&[1.0, 2.0])]).unwrap();
        let x = Pattern::Coordinate { index: 0 };
        assert_eq!(ens.p_sample(&x).unwrap(), 0.5);
        // Pool: only the self-tie out of three patterns.
        assert_eq!(ens.p_pool(&x).unwrap(), 1.0 / 3.0);
        assert!(matches!(
            ens.p_sample(&Pattern::Coordinate { index: 7 }),
            Err(Error::PatternNotInOriginal)
        ));
    }

    #[test]
    fn globally_largest_statistic() {
        let randomized = [output(&[1.0, 2.0]), output(&[0.5]), output(&[])];
        let ens = NullEnsemble::new(output(&[9.0, 1.0, 0.0, -1.0]), &randomized).unwrap();
        let p = ens.p_values_for(9.0).unwrap();
        assert_eq!(p.sample, 0.25 / 4.0);
        assert_eq!(p.pool, 1.0 / 7.0);
    }

    #[test]
    fn pool_over_mixed_sizes() {
        // Outputs of sizes 1 and 3 (plus the original of size 1); x = 2.
        let randomized = [output(&[3.0]), output(&[1.0, 2.0, 4.0])];
        let ens = NullEnsemble::new(output(&[2.0]), &randomized).unwrap();
        let p = ens.p_values_for(2.0).unwrap();
        // >= 2: {3}, {2, 4}, {2}  -> 4 of 5.
        assert_eq!(p.pool, 4.0 / 5.0);
        assert!((p.sample - (1.0 + 2.0 / 3.0 + 1.0) / 3.0).abs() < 1e-15);
    }

    #[test]
    fn empty_ensemble_has_no_pool() {
        let ens = NullEnsemble::new(output(&[]), &[output(&[])]).unwrap();
        assert!(matches!(ens.p_pool_stat(1.0), Err(Error::NoPatterns)));
        assert!(matches!(ens.p_values_for(1.0), Err(Error::NoPatterns)));
        assert_eq!(ens.p_sample_stat(1.0), 0.0);
    }

    #[test]
    fn constant_size_methods_agree() {
        let randomized: Vec<PatternOutput> = (0..7)
            .map(|i| output(&[i as f64 * 0.3, 1.0 / (i + 1) as f64, 2.5 - i as f64]))
            .collect();
        let ens = NullEnsemble::new(output(&[0.7, 1.2, -3.0]), &randomized).unwrap();
        for p in ens.p_values() {
            assert_eq!(p.sample.to_bits(), p.pool.to_bits());
        }
    }

    #[test]
    fn bonferroni_cases() {
        assert_eq!(adjust_bonferroni(&[0.05], 1000), vec![1.0]);
        assert_eq!(adjust_bonferroni(&[0.37], 1), vec![0.37]);
        let b = adjust_bonferroni(&[0.01, 0.02, 0.4], 3);
        for (x, y) in b.iter().zip([0.03, 0.06, 1.0]) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn holm_cases() {
        let h = adjust_holm(&[0.01, 0.02, 0.05]).unwrap();
        for (x, y) in h.iter().zip([0.03, 0.04, 0.05]) {
            assert!((x - y).abs() < 1e-15);
        }
        assert_eq!(adjust_holm(&[1.0, 1.0]).unwrap(), vec![1.0, 1.0]);
        assert_eq!(adjust_holm(&[0.2]).unwrap(), vec![0.2]);
        assert!(matches!(adjust_holm(&[0.2, 0.1]), Err(Error::Unsorted(1))));
        assert!(adjust_holm(&[]).unwrap().is_empty());
    }

    #[test]
    fn holm_unsorted_maps_back() {
        let h = holm_unsorted(&[0.05, 0.01, 0.02]);
        let want = [0.05, 0.03, 0.04];
        for (x, y) in h.iter().zip(want) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn report_thresholds() {
        let randomized: Vec<PatternOutput> = (0..19).map(|i| output(&[i as f64 / 100.0])).collect();
        let ens = NullEnsemble::new(output(&[10.0, 0.05, -1.0]), &randomized).unwrap();
        assert!(significant(&ens, PValueMethod::Both, 0.0, Provenance::default()).is_err());
        assert!(significant(&ens, PValueMethod::Both, 1.0, Provenance::default()).is_err());
        let r = significant(&ens, PValueMethod::Both, 0.2, Provenance::default()).unwrap();
        assert_eq!(r.m, 3);
        assert_eq!(r.n, 19);
        // Top pattern: only the self-tie, p = (1/3)/20; Holm 3 * p = 0.05.
        let top = &r.records[0];
        assert_eq!(top.statistic, 10.0);
        let s = top.sample.unwrap();
        assert_eq!(s.p, 1.0 / 60.0);
        assert!((s.adjusted_holm - 0.05).abs() < 1e-15);
        assert_eq!(top.pool.unwrap().p, 1.0 / 22.0);
        assert!(s.significant);
        assert_eq!(r.significant_sample, Some(1));
        assert_eq!(r.significant_patterns().count(), 1);
        for rec in &r.records {
            for m in [rec.sample.unwrap(), rec.pool.unwrap()] {
                assert!(m.p > 0.0 && m.p <= 1.0);
                assert!(m.p <= m.adjusted_holm && m.adjusted_holm <= m.adjusted_bonferroni);
            }
        }
    }
}
