//! Test statistics. Larger values are more interesting.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{AssociationRule, BinaryDataset, Itemset};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StatisticKind {
    Frequency,
    Lift,
    /// `-ln p` of the one-sided (over-representation) Fisher exact test.
    Fisher,
    /// `freq * ln(#nodes)` for subgraph patterns.
    Graph,
}

impl StatisticKind {
    pub fn name(self) -> &'static str {
        match self {
            StatisticKind::Frequency => "frequency",
            StatisticKind::Lift => "lift",
            StatisticKind::Fisher => "fisher",
            StatisticKind::Graph => "graph",
        }
    }
}

impl fmt::Display for StatisticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StatisticKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "frequency" => Ok(Self::Frequency),
            "lift" => Ok(Self::Lift),
            "fisher" => Ok(Self::Fisher),
            "graph" | "graph-size-weighted" => Ok(Self::Graph),
            other => Err(Error::invalid(format!("unknown statistic {other:?}"))),
        }
    }
}

/// Relative frequency of `x` in `d`.
pub fn stat_frequency(x: &Itemset, d: &BinaryDataset) -> f64 {
    if d.n_rows() == 0 {
        return 0.0;
    }
    d.support(x.items()) as f64 / d.n_rows() as f64
}

/// `freq(x) / prod_{A in x} freq(A)`.
pub fn stat_lift(x: &Itemset, d: &BinaryDataset) -> Result<f64> {
    let singles: Vec<usize> = x
        .items()
        .iter()
        .map(|&i| d.col_margins()[i as usize])
        .collect();
    if let Some(pos) = singles.iter().position(|&s| s == 0) {
        return Err(Error::UnsupportedSingleton {
            item: x.items()[pos],
        });
    }
    Ok(lift_from_supports(
        d.support(x.items()),
        &singles,
        d.n_rows(),
    ))
}

/// Lift from absolute counts: `supp(x) * rows^(k-1) / prod supp(A)`.
///
/// Evaluated in integers when it fits, so equal ratios give bit-identical
/// results regardless of which itemset produced them.
pub fn lift_from_supports(support: usize, singles: &[usize], rows: usize) -> f64 {
    debug_assert!(singles.iter().all(|&s| s > 0));
    let k = singles.len();
    let exact = (|| {
        let mut num = support as u128;
        for _ in 1..k {
            num = num.checked_mul(rows as u128)?;
        }
        let mut den = 1u128;
        for &s in singles {
            den = den.checked_mul(s as u128)?;
        }
        Some((num, den))
    })();
    match exact {
        Some((num, den)) => {
            let g = gcd(num, den);
            (num / g) as f64 / (den / g) as f64
        }
        None => {
            let n = rows as f64;
            let log = (support as f64 / n).ln()
                - singles.iter().map(|&s| (s as f64 / n).ln()).sum::<f64>();
            log.exp()
        }
    }
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a.max(1)
}

/// `freq * ln(nodes)`.
pub fn stat_graph(pattern_nodes: usize, support: f64) -> Result<f64> {
    if pattern_nodes == 0 {
        return Err(Error::invalid("graph pattern must have at least one node"));
    }
    Ok(support * (pattern_nodes as f64).ln())
}

/// Table of `ln(k!)` for `k <= n`.
#[derive(Debug, Clone)]
pub struct LogFactorials(Vec<f64>);

impl LogFactorials {
    pub fn new(n: usize) -> Self {
        let mut t = Vec::with_capacity(n + 1);
        t.push(0.0);
        let mut acc = 0.0f64;
        for k in 1..=n {
            acc += (k as f64).ln();
            t.push(acc);
        }
        Self(t)
    }

    pub fn max(&self) -> usize {
        self.0.len() - 1
    }

    pub fn ln_fact(&self, k: usize) -> f64 {
        self.0[k]
    }

    pub fn ln_choose(&self, n: usize, k: usize) -> f64 {
        self.0[n] - self.0[k] - self.0[n - k]
    }
}

/// Largest table total evaluated with exact integer tails. Every binomial
/// coefficient and tail sum up to this total fits in a `u128`.
pub const EXACT_FISHER_MAX_TOTAL: usize = 120;

/// One-sided Fisher exact test on 2x2 tables with a fixed grand total.
///
/// Small tables use exact rational tails reduced to lowest terms, so tables
/// with the same p-value score bit-identically. Larger ones use log-space sums.
#[derive(Debug, Clone)]
pub struct FisherScorer {
    lf: LogFactorials,
    pascal: Vec<Vec<u128>>,
}

impl FisherScorer {
    pub fn new(total: usize) -> Self {
        let mut pascal: Vec<Vec<u128>> = Vec::new();
        if total <= EXACT_FISHER_MAX_TOTAL {
            for n in 0..=total {
                let row = (0..=n)
                    .map(|k| {
                        if k == 0 || k == n {
                            1
                        } else {
                            pascal[n - 1][k - 1] + pascal[n - 1][k]
                        }
                    })
                    .collect();
                pascal.push(row);
            }
        }
        Self {
            lf: LogFactorials::new(total),
            pascal,
        }
    }

    fn exact_tail(&self, joint: usize, small: usize, large: usize, total: usize) -> f64 {
        let c = &self.pascal;
        let den = c[total][large];
        let num: u128 = (joint..=small)
            .map(|k| c[small][k] * c[total - small][large - k])
            .sum();
        let g = gcd(num, den);
        let (num, den) = (num / g, den / g);
        if num >= den {
            0.0
        } else if 2 * num >= den {
            -(-((den - num) as f64 / den as f64)).ln_1p()
        } else {
            -(num as f64 / den as f64).ln()
        }
    }

    /// `-ln P(X >= joint)` where `X` is hypergeometric with margins
    /// `row_margin`, `col_margin` out of `total`. Symmetric in the margins.
    pub fn neg_ln_p(
        &self,
        joint: usize,
        row_margin: usize,
        col_margin: usize,
        total: usize,
    ) -> f64 {
        assert!(
            total <= self.lf.max(),
            "table total exceeds factorial table"
        );
        debug_assert!(joint <= row_margin.min(col_margin) && row_margin.max(col_margin) <= total);
        let small = row_margin.min(col_margin);
        let large = row_margin.max(col_margin);
        let lo = (small + large).saturating_sub(total);
        let hi = small;
        if joint <= lo {
            return 0.0;
        }
        if total < self.pascal.len() {
            return self.exact_tail(joint, small, large, total);
        }
        let ln_denom = self.lf.ln_choose(total, large);
        let ln_pmf = |k: usize| {
            self.lf.ln_choose(small, k) + self.lf.ln_choose(total - small, large - k) - ln_denom
        };

        let upper: Vec<f64> = (joint..=hi).map(ln_pmf).collect();
        let lower: Vec<f64> = (lo..joint).map(ln_pmf).collect();
        let ln_upper = log_sum_exp(&upper);
        let ln_lower = log_sum_exp(&lower);
        let stat = if ln_upper <= ln_lower {
            -ln_upper
        } else {
            // Upper tail holds most of the mass: use the complement.
            -(-ln_lower.exp()).ln_1p()
        };
        stat.max(0.0)
    }

    /// Statistic for a rule, counting over the transactions of `d`.
    pub fn score_rule(&self, rule: &AssociationRule, d: &BinaryDataset) -> f64 {
        let joint = d.support(rule.antecedent.union(&rule.consequent).items());
        let ante = d.support(rule.antecedent.items());
        let cons = d.support(rule.consequent.items());
        self.neg_ln_p(joint, ante, cons, d.n_rows())
    }
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// `-ln` of the one-sided Fisher p-value for `rule` on `d`.
pub fn stat_fisher(rule: &AssociationRule, d: &BinaryDataset) -> f64 {
    FisherScorer::new(d.n_rows()).score_rule(rule, d)
}
