//! Pattern miners and the [`PatternOutput`] they produce.
//!
//! Frequent itemsets are found level-wise (Apriori) over column bitsets.
//! Association rules take every frequent itemset of size >= 2 and emit one
//! rule per single-item consequent.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{AssociationRule, BinaryDataset, Itemset};
use crate::error::{Error, Result};
use crate::stats::{self, FisherScorer, StatisticKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MinerKind {
    FrequentItemsets,
    AssociationRules,
}

impl MinerKind {
    pub fn name(self) -> &'static str {
        match self {
            MinerKind::FrequentItemsets => "itemsets",
            MinerKind::AssociationRules => "rules",
        }
    }
}

impl fmt::Display for MinerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MinerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "itemsets" | "frequent-itemsets" => Ok(Self::FrequentItemsets),
            "rules" | "association-rules" => Ok(Self::AssociationRules),
            other => Err(Error::invalid(format!("unknown miner {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MinerSpec {
    pub kind: MinerKind,
    /// Absolute transaction count.
    pub min_support: usize,
    /// Smallest itemset size reported (itemset miner only).
    pub min_size: usize,
}

impl MinerSpec {
    pub fn itemsets(min_support: usize, min_size: usize) -> Self {
        Self {
            kind: MinerKind::FrequentItemsets,
            min_support,
            min_size,
        }
    }

    pub fn rules(min_support: usize) -> Self {
        Self {
            kind: MinerKind::AssociationRules,
            min_support,
            min_size: 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_support == 0 {
            return Err(Error::invalid("min_support must be >= 1"));
        }
        if self.min_size == 0 {
            return Err(Error::invalid("min_size must be >= 1"));
        }
        Ok(())
    }
}

/// A pattern from any miner. Ordering is used only to make reports
/// deterministic; patterns are never matched across datasets.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Pattern {
    Itemset { items: Itemset },
    Rule { rule: AssociationRule },
    External { id: String },
    Coordinate { index: usize },
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Pattern::Itemset { items } => write!(f, "{items}"),
            Pattern::Rule { rule } => write!(f, "{rule}"),
            Pattern::External { id } => f.write_str(id),
            Pattern::Coordinate { index } => write!(f, "#{index}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredPattern {
    pub pattern: Pattern,
    pub statistic: f64,
}

/// `A(D)` together with `f(x, D)` for each pattern.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PatternOutput {
    pub patterns: Vec<ScoredPattern>,
    /// Ensemble index of the dataset; `None` for the original data.
    pub source: Option<u64>,
}

impl PatternOutput {
    pub fn new(patterns: Vec<ScoredPattern>, source: Option<u64>) -> Result<Self> {
        if let Some(p) = patterns.iter().find(|p| !p.statistic.is_finite()) {
            return Err(Error::NonFiniteStatistic(p.statistic));
        }
        Ok(Self { patterns, source })
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    pub fn statistics(&self) -> Vec<f64> {
        self.patterns.iter().map(|p| p.statistic).collect()
    }

    pub fn statistic_of(&self, pattern: &Pattern) -> Option<f64> {
        self.patterns
            .iter()
            .find(|p| &p.pattern == pattern)
            .map(|p| p.statistic)
    }
}

/// A frequent itemset with its absolute support.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrequentItemset {
    pub itemset: Itemset,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MinedRule {
    pub rule: AssociationRule,
    pub support: usize,
    pub antecedent_support: usize,
    pub consequent_support: usize,
}

type Bits = Vec<u64>;

fn and_count(a: &[u64], b: &[u64], out: &mut Bits) -> usize {
    out.clear();
    let mut n = 0;
    for (x, y) in a.iter().zip(b) {
        let w = x & y;
        n += w.count_ones() as usize;
        out.push(w);
    }
    n
}

/// All itemsets with support >= `min_support`, every size, with supports.
/// Levels are returned in order; each level is sorted lexicographically.
fn apriori_levels(d: &BinaryDataset, min_support: usize) -> Vec<Vec<(Vec<u32>, Bits, usize)>> {
    let words = d.n_rows().div_ceil(64);
    let mut level: Vec<(Vec<u32>, Bits, usize)> = Vec::new();
    for (c, rows) in d.column_rows().into_iter().enumerate() {
        if rows.len() >= min_support {
            let mut bits = vec![0u64; words];
            for r in &rows {
                bits[*r as usize / 64] |= 1 << (r % 64);
            }
            level.push((vec![c as u32], bits, rows.len()));
        }
    }
    let mut levels = Vec::new();
    let mut scratch = Vec::with_capacity(words);
    while !level.is_empty() {
        let k = level[0].0.len();
        let index: HashMap<&[u32], usize> = level
            .iter()
            .enumerate()
            .map(|(i, (items, _, _))| (items.as_slice(), i))
            .collect();
        let mut next = Vec::new();
        let mut start = 0;
        while start < level.len() {
            // Block of itemsets sharing the first k-1 items.
            let prefix = &level[start].0[..k - 1];
            let mut end = start + 1;
            while end < level.len() && &level[end].0[..k - 1] == prefix {
                end += 1;
            }
            for i in start..end {
                for j in i + 1..end {
                    let mut cand = level[i].0.clone();
                    cand.push(*level[j].0.last().unwrap());
                    // Apriori prune: drop each of the first k-1 items in turn.
                    let all_frequent = (0..k - 1).all(|skip| {
                        let sub: Vec<u32> = cand
                            .iter()
                            .enumerate()
                            .filter(|&(p, _)| p != skip)
                            .map(|(_, &x)| x)
                            .collect();
                        index.contains_key(sub.as_slice())
                    });
                    if !all_frequent {
                        continue;
                    }
                    let support = and_count(&level[i].1, &level[j].1, &mut scratch);
                    if support >= min_support {
                        next.push((cand, scratch.clone(), support));
                    }
                }
            }
            start = end;
        }
        drop(index);
        levels.push(level);
        level = next;
    }
    levels
}

/// Frequent itemsets of size >= `min_size` with their supports, sorted
/// lexicographically.
pub fn mine_frequent(
    d: &BinaryDataset,
    min_support: usize,
    min_size: usize,
) -> Result<Vec<FrequentItemset>> {
    MinerSpec::itemsets(min_support, min_size).validate()?;
    let mut out: Vec<FrequentItemset> = apriori_levels(d, min_support)
        .into_iter()
        .flatten()
        .filter(|(items, _, _)| items.len() >= min_size)
        .map(|(items, _, support)| FrequentItemset {
            itemset: Itemset::from_sorted(items),
            support,
        })
        .collect();
    out.sort_by(|a, b| a.itemset.cmp(&b.itemset));
    Ok(out)
}

/// Itemsets of size >= `min_size` with absolute support >= `min_support`.
pub fn mine_itemsets(
    d: &BinaryDataset,
    min_support: usize,
    min_size: usize,
) -> Result<Vec<Itemset>> {
    Ok(mine_frequent(d, min_support, min_size)?
        .into_iter()
        .map(|f| f.itemset)
        .collect())
}

/// Single-consequent rules from all frequent itemsets of size >= 2, with the
/// counts needed for the contingency table.
pub fn mine_rules_with_counts(d: &BinaryDataset, min_support: usize) -> Result<Vec<MinedRule>> {
    let all = mine_frequent(d, min_support, 1)?;
    let support: HashMap<&[u32], usize> =
        all.iter().map(|f| (f.itemset.items(), f.support)).collect();
    let mut rules = Vec::new();
    for f in all.iter().filter(|f| f.itemset.len() >= 2) {
        let items = f.itemset.items();
        for (pos, &c) in items.iter().enumerate() {
            let ante: Vec<u32> = items
                .iter()
                .enumerate()
                .filter(|&(p, _)| p != pos)
                .map(|(_, &x)| x)
                .collect();
            // Subsets of a frequent itemset are frequent, so both lookups hit.
            let antecedent_support = support[ante.as_slice()];
            let consequent_support = support[&[c][..]];
            rules.push(MinedRule {
                rule: AssociationRule {
                    antecedent: Itemset::from_sorted(ante),
                    consequent: Itemset::from_sorted(vec![c]),
                },
                support: f.support,
                antecedent_support,
                consequent_support,
            });
        }
    }
    Ok(rules)
}

pub fn mine_rules(d: &BinaryDataset, min_support: usize) -> Result<Vec<AssociationRule>> {
    Ok(mine_rules_with_counts(d, min_support)?
        .into_iter()
        .map(|r| r.rule)
        .collect())
}

/// Mines `d` and attaches `f(x, d)` to every pattern.
pub fn run_miner(
    d: &BinaryDataset,
    spec: &MinerSpec,
    stat: StatisticKind,
    source: Option<u64>,
) -> Result<PatternOutput> {
    spec.validate()?;
    let patterns = match (spec.kind, stat) {
        (MinerKind::FrequentItemsets, StatisticKind::Frequency | StatisticKind::Lift) => {
            let rows = d.n_rows();
            mine_frequent(d, spec.min_support, spec.min_size)?
                .into_iter()
                .map(|f| {
                    let statistic = match stat {
                        StatisticKind::Frequency => f.support as f64 / rows as f64,
                        _ => {
                            let singles: Vec<usize> = f
                                .itemset
                                .items()
                                .iter()
                                .map(|&i| d.col_margins()[i as usize])
                                .collect();
                            stats::lift_from_supports(f.support, &singles, rows)
                        }
                    };
                    ScoredPattern {
                        pattern: Pattern::Itemset { items: f.itemset },
                        statistic,
                    }
                })
                .collect()
        }
        (MinerKind::AssociationRules, StatisticKind::Fisher) => {
            let fisher = FisherScorer::new(d.n_rows());
            mine_rules_with_counts(d, spec.min_support)?
                .into_iter()
                .map(|r| ScoredPattern {
                    statistic: fisher.neg_ln_p(
                        r.support,
                        r.antecedent_support,
                        r.consequent_support,
                        d.n_rows(),
                    ),
                    pattern: Pattern::Rule { rule: r.rule },
                })
                .collect()
        }
        (miner, statistic) => {
            return Err(Error::KindMismatch {
                statistic: statistic.name(),
                miner: miner.name(),
            })
        }
    };
    PatternOutput::new(patterns, source)
}

/// One externally mined pattern. Either `statistic` is given directly, or
/// `nodes` and relative `support` are given and the graph statistic is used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalPattern {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub statistic: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub support: Option<f64>,
}

pub fn parse_external_output(json: &str, source: Option<u64>) -> Result<PatternOutput> {
    let entries: Vec<ExternalPattern> = serde_json::from_str(json)?;
    let patterns = entries
        .into_iter()
        .map(|e| {
            let statistic = match (e.statistic, e.nodes, e.support) {
                (Some(s), _, _) => s,
                (None, Some(n), Some(freq)) => stats::stat_graph(n, freq)?,
                _ => {
                    return Err(Error::invalid(format!(
                        "pattern {:?} needs `statistic` or both `nodes` and `support`",
                        e.id
                    )))
                }
            };
            Ok(ScoredPattern {
                pattern: Pattern::External { id: e.id },
                statistic,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    PatternOutput::new(patterns, source)
}

/// Reads a JSON list of `{id, statistic}` (or `{id, nodes, support}`) records.
pub fn load_external_output(path: &Path, source: Option<u64>) -> Result<PatternOutput> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_external_output(&text, source)
}
