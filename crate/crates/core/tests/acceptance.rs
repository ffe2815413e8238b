//! Acceptance suite. Each test prints one `PASS`/`FAIL` line; run with
//! `cargo test -p sigpat-core --test acceptance -- --nocapture` to see them.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use rand::Rng;
use sigpat_core::dataset::{
    load_transactions, BinaryDataset, Graph, GraphTransactionSet, TransactionFormat,
};
use sigpat_core::mining::{mine_frequent, run_miner, MinerSpec, PatternOutput};
use sigpat_core::minp::{
    adversarial_simulation, minp_check, tolerance, MinPCurve, DEFAULT_GRID_POINTS,
};
use sigpat_core::randomize::{
    randomize_col, randomize_graph, randomize_swap, RandomizerKind, RandomizerSpec,
};
use sigpat_core::rng;
use sigpat_core::significance::{
    adjust_bonferroni, adjust_holm, ascending_order, holm_unsorted, NullEnsemble,
};
use sigpat_core::stats::{stat_fisher, StatisticKind};
use sigpat_core::synthetic::{
    alg_max10, fwer_experiment, simulate_run, Algorithm, GaussianConfig, GaussianSampler,
};
use sigpat_core::{AssociationRule, Itemset};

fn report(id: u32, name: &str, pass: bool, elapsed: Duration, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    println!(
        "criterion {id:>2} {verdict} {name} ({:.2?}) {detail}",
        elapsed
    );
    assert!(pass, "criterion {id} ({name}) failed: {detail}");
}

fn random_dataset<R: Rng>(
    rng: &mut R,
    max_rows: usize,
    max_cols: usize,
    density: f64,
) -> BinaryDataset {
    let rows = rng.random_range(1..=max_rows);
    let cols = rng.random_range(1..=max_cols);
    let data = (0..rows)
        .map(|_| {
            (0..cols as u32)
                .filter(|_| rng.random_bool(density))
                .collect()
        })
        .collect();
    BinaryDataset::from_rows(data, cols).unwrap()
}

fn random_graphs<R: Rng>(rng: &mut R) -> GraphTransactionSet {
    let count = rng.random_range(1..=4);
    let graphs = (0..count)
        .map(|g| {
            let n = rng.random_range(2..=9u32);
            let labels = (0..n).map(|i| format!("n{}", i % 3)).collect();
            let mut edges = Vec::new();
            for u in 0..n {
                for v in u + 1..n {
                    if rng.random_bool(0.4) {
                        edges.push((u, v, format!("e{}", (u + v) % 2)));
                    }
                }
            }
            Graph::new(g.to_string(), labels, edges).unwrap()
        })
        .collect();
    GraphTransactionSet { graphs }
}

#[test]
fn adversarial_probability() {
    let start = Instant::now();
    let estimate = adversarial_simulation(100_000, 2024).unwrap();
    let elapsed = start.elapsed();
    let exact = 29.0 / 45.0;
    let pass = (estimate - exact).abs() <= 0.01 && elapsed < Duration::from_secs(5);
    report(
        1,
        "adversarial probability",
        pass,
        elapsed,
        &format!("estimate={estimate:.4} exact={exact:.4}"),
    );
}

#[test]
fn constant_output_equivalence() {
    let start = Instant::now();
    let cfg = GaussianConfig {
        k: 100,
        m0: 100,
        n_null: 500,
        runs: 100,
        seed: 11,
        ..Default::default()
    };
    let mut compared = 0;
    let mut mismatches = 0;
    for r in 0..cfg.runs as u64 {
        let out = simulate_run(&cfg, Algorithm::Max10, r).unwrap();
        assert_eq!(out.p_sample.len(), 10);
        for (s, p) in out.p_sample.iter().zip(&out.p_pool) {
            compared += 1;
            if s.to_bits() != p.to_bits() {
                mismatches += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    let pass = mismatches == 0 && elapsed < Duration::from_secs(60);
    report(
        2,
        "constant-output equivalence",
        pass,
        elapsed,
        &format!("{compared} pairs, {mismatches} differ"),
    );
}

#[test]
fn fwer_under_complete_null() {
    let start = Instant::now();
    let alphas = [0.01, 0.05, 0.1, 0.2, 0.5];
    let mut worst = Vec::new();
    let mut pass = true;
    for sigma in [-0.0099, 0.0, 0.5] {
        let cfg = GaussianConfig {
            k: 100,
            m0: 100,
            sigma,
            runs: 1000,
            n_null: 1000,
            seed: 7,
            ..Default::default()
        };
        let curve = fwer_experiment(&cfg, Algorithm::Ge1, &alphas).unwrap();
        for (j, &a) in alphas.iter().enumerate() {
            let bound = a + 3.0 * (a * (1.0 - a) / 1000.0).sqrt();
            for (name, v) in [("sample", curve.sample[j]), ("pool", curve.pool[j])] {
                if v > bound {
                    pass = false;
                    worst.push(format!("sigma={sigma} alpha={a} {name}={v} > {bound:.4}"));
                }
            }
        }
        worst.push(format!(
            "sigma={sigma}: sample={:?} pool={:?}",
            curve.sample, curve.pool
        ));
    }
    let elapsed = start.elapsed();
    pass &= elapsed < Duration::from_secs(15 * 60);
    report(
        3,
        "FWER control under complete null",
        pass,
        elapsed,
        &worst.join("; "),
    );
}

#[test]
fn margin_and_degree_preservation() {
    let start = Instant::now();
    let mut failures = Vec::new();
    for seed in 0..1000u64 {
        let mut fuzz = rng::stream(seed, 0);
        let d = random_dataset(&mut fuzz, 30, 15, fuzz_density(seed));
        let mut r = rng::stream(seed, 1);

        let col = randomize_col(&d, &mut r);
        if col.col_margins() != d.col_margins() || col.n_rows() != d.n_rows() {
            failures.push(format!("col seed {seed}"));
        }
        let (swap, _) = randomize_swap(&d, 4 * d.n_cells().max(1), &mut r);
        if swap.col_margins() != d.col_margins() || swap.row_margins() != d.row_margins() {
            failures.push(format!("swap seed {seed}"));
        }
        let g = random_graphs(&mut fuzz);
        let (rg, _) = randomize_graph(&g, 50, &mut r);
        let simple = rg.graphs.iter().all(|x| x.is_simple());
        let labels_kept =
            rg.graphs.iter().zip(&g.graphs).all(|(a, b)| {
                a.node_labels() == b.node_labels() && a.edges().len() == b.edges().len()
            });
        if rg.degree_sequences() != g.degree_sequences() || !simple || !labels_kept {
            failures.push(format!("graph seed {seed}"));
        }
    }
    let elapsed = start.elapsed();
    let pass = failures.is_empty() && elapsed < Duration::from_secs(60);
    report(
        4,
        "margin/degree preservation",
        pass,
        elapsed,
        &failures.join(", "),
    );
}

fn fuzz_density(seed: u64) -> f64 {
    [0.05, 0.2, 0.5, 0.8, 0.95][(seed % 5) as usize]
}

fn binomial(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

/// `-ln P(X >= a)` computed from the exact rational tail.
fn fisher_oracle(a: u128, b: u128, c: u128, d: u128) -> f64 {
    let n = a + b + c + d;
    let r = a + b;
    let col = a + c;
    let den = binomial(n, col);
    let num: u128 = (a..=r.min(col))
        .map(|k| binomial(r, k) * binomial(n - r, col - k))
        .sum();
    if num == den {
        0.0
    } else if 2 * num >= den {
        -(-((den - num) as f64 / den as f64)).ln_1p()
    } else {
        -(num as f64 / den as f64).ln()
    }
}

#[test]
fn fisher_oracle_exhaustive() {
    let start = Instant::now();
    let rule = AssociationRule::new(
        Itemset::new(vec![0]).unwrap(),
        Itemset::new(vec![1]).unwrap(),
    )
    .unwrap();
    let mut tables = 0;
    let mut worst = 0.0f64;
    let mut bad = Vec::new();
    for n in 0..=30usize {
        for a in 0..=n {
            for b in 0..=n - a {
                for c in 0..=n - a - b {
                    let d = n - a - b - c;
                    let mut rows = vec![vec![0, 1]; a];
                    rows.extend(std::iter::repeat_n(vec![0], b));
                    rows.extend(std::iter::repeat_n(vec![1], c));
                    rows.extend(std::iter::repeat_n(vec![], d));
                    let data = BinaryDataset::from_rows(rows, 2).unwrap();
                    let got = stat_fisher(&rule, &data);
                    let want = fisher_oracle(a as u128, b as u128, c as u128, d as u128);
                    let err = if want == 0.0 {
                        got.abs()
                    } else {
                        (got - want).abs() / want
                    };
                    worst = worst.max(err);
                    if err > 1e-12 && bad.len() < 5 {
                        bad.push(format!("({a},{b},{c},{d}) got={got} want={want}"));
                    }
                    tables += 1;
                }
            }
        }
    }
    let elapsed = start.elapsed();
    let pass = bad.is_empty() && elapsed < Duration::from_secs(60);
    report(
        5,
        "Fisher oracle",
        pass,
        elapsed,
        &format!("{tables} tables, max rel err {worst:.2e} {}", bad.join(" ")),
    );
}

#[test]
fn holm_properties() {
    let start = Instant::now();
    let hand = adjust_holm(&[0.01, 0.02, 0.05]).unwrap();
    let expected = [0.03, 0.04, 0.05];
    let mut pass = hand
        .iter()
        .zip(expected)
        .all(|(h, e)| (h - e).abs() < 1e-15);
    let mut r = rng::stream(6, 0);
    for _ in 0..10_000 {
        let len = r.random_range(1..=200);
        let p: Vec<f64> = (0..len)
            .map(|_| {
                if r.random_bool(0.1) {
                    1.0
                } else {
                    r.random::<f64>().powi(3)
                }
            })
            .collect();
        let holm = holm_unsorted(&p);
        let bonf = adjust_bonferroni(&p, len);
        let order = ascending_order(&p);
        let monotone = order.windows(2).all(|w| holm[w[0]] <= holm[w[1]]);
        let bounded = (0..len).all(|i| p[i] <= holm[i] && holm[i] <= bonf[i] && holm[i] <= 1.0);
        pass &= monotone && bounded;
    }
    let elapsed = start.elapsed();
    pass &= elapsed < Duration::from_secs(10);
    report(
        6,
        "Holm properties",
        pass,
        elapsed,
        &format!("hand example -> {hand:?}"),
    );
}

fn brute_force_itemsets(
    d: &BinaryDataset,
    min_support: usize,
    min_size: usize,
) -> BTreeSet<(Vec<u32>, usize)> {
    let cols = d.n_cols();
    let mut out = BTreeSet::new();
    for mask in 1u32..(1 << cols) {
        let items: Vec<u32> = (0..cols as u32).filter(|i| mask >> i & 1 == 1).collect();
        if items.len() < min_size {
            continue;
        }
        let support = d
            .rows()
            .iter()
            .filter(|row| items.iter().all(|i| row.contains(i)))
            .count();
        if support >= min_support {
            out.insert((items, support));
        }
    }
    out
}

#[test]
fn miner_oracle() {
    let start = Instant::now();
    let mut failures = Vec::new();
    for seed in 0..500u64 {
        let mut r = rng::stream(seed, 7);
        let d = random_dataset(&mut r, 40, 12, fuzz_density(seed));
        let min_support = r.random_range(1..=d.n_rows().clamp(1, 8));
        let min_size = r.random_range(1..=3);
        let mined: BTreeSet<(Vec<u32>, usize)> = mine_frequent(&d, min_support, min_size)
            .unwrap()
            .into_iter()
            .map(|f| (f.itemset.items().to_vec(), f.support))
            .collect();
        if mined != brute_force_itemsets(&d, min_support, min_size) {
            failures.push(format!("seed {seed}"));
        }
    }
    let elapsed = start.elapsed();
    let pass = failures.is_empty() && elapsed < Duration::from_secs(60);
    report(7, "miner oracle", pass, elapsed, &failures.join(", "));
}

fn transformed(o: &PatternOutput, f: fn(f64) -> f64) -> PatternOutput {
    let mut t = o.clone();
    for p in &mut t.patterns {
        p.statistic = f(p.statistic);
    }
    t
}

#[test]
fn monotone_transform_invariance() {
    let start = Instant::now();
    let transforms: [fn(f64) -> f64; 2] = [|f| 2.0 * f + 7.0, f64::exp];
    let mut pipelines = 0;
    let mut failures = Vec::new();
    let mut seed = 0u64;
    while pipelines < 100 {
        seed += 1;
        let mut r = rng::stream(seed, 8);
        let d = random_dataset(&mut r, 40, 10, 0.35);
        let (miner, stat) = match seed % 3 {
            0 => (MinerSpec::itemsets(2, 1), StatisticKind::Frequency),
            1 => (MinerSpec::itemsets(2, 2), StatisticKind::Lift),
            _ => (MinerSpec::rules(2), StatisticKind::Fisher),
        };
        let kind = if seed.is_multiple_of(2) {
            RandomizerKind::Col
        } else {
            RandomizerKind::Swap
        };
        let randomizer = RandomizerSpec::new(kind, None, seed).unwrap();
        let original = run_miner(&d, &miner, stat, None).unwrap();
        if original.is_empty() {
            continue;
        }
        let nulls: Vec<PatternOutput> = (0..50)
            .map(|i| {
                run_miner(&randomizer.randomize(&d, i).unwrap(), &miner, stat, Some(i)).unwrap()
            })
            .collect();
        let base = NullEnsemble::new(original.clone(), &nulls)
            .unwrap()
            .p_values();
        for (t, f) in transforms.iter().enumerate() {
            let tn: Vec<PatternOutput> = nulls.iter().map(|o| transformed(o, *f)).collect();
            let got = NullEnsemble::new(transformed(&original, *f), &tn)
                .unwrap()
                .p_values();
            if got != base {
                failures.push(format!("seed {seed} transform {t}"));
            }
        }
        pipelines += 1;
    }
    let elapsed = start.elapsed();
    let pass = failures.is_empty() && elapsed < Duration::from_secs(60);
    report(
        8,
        "monotone-transform invariance",
        pass,
        elapsed,
        &failures.join(", "),
    );
}

/// Runs only when `SIGPAT_PALEO` names the Paleo item-list file.
#[test]
fn paleo_reference_counts() {
    let Some(path) = std::env::var_os("SIGPAT_PALEO").map(PathBuf::from) else {
        println!(
            "criterion  9 SKIPPED Paleo reference counts (set SIGPAT_PALEO to the item-list file)"
        );
        return;
    };
    let start = Instant::now();
    let d = load_transactions(&path, TransactionFormat::ItemList).unwrap();
    let miner = MinerSpec::itemsets(7, 2);
    let count = run_miner(&d, &miner, StatisticKind::Frequency, None)
        .unwrap()
        .len();
    let mut detail = format!("itemsets={count}");
    let mut pass = count == 2828;
    for (kind, mean_ref) in [(RandomizerKind::Col, 227.4), (RandomizerKind::Swap, 266.9)] {
        let spec = RandomizerSpec::new(kind, None, 5).unwrap();
        let sizes: Vec<f64> = (0..500u64)
            .map(|i| {
                let r = spec.randomize(&d, i).unwrap();
                run_miner(&r, &miner, StatisticKind::Frequency, Some(i))
                    .unwrap()
                    .len() as f64
            })
            .collect();
        let mean = sizes.iter().sum::<f64>() / sizes.len() as f64;
        let sd = (sizes.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (sizes.len() - 1) as f64)
            .sqrt();
        pass &= (mean - mean_ref).abs() <= 5.0 * sd.max(f64::MIN_POSITIVE);
        detail.push_str(&format!(" {kind}: mean={mean:.1} sd={sd:.1}"));
    }
    report(9, "Paleo reference counts", pass, start.elapsed(), &detail);
}

#[test]
fn minp_constant_output() {
    let start = Instant::now();
    let sampler = GaussianSampler::new(100, 0.0);
    let result = minp_check(
        |i| alg_max10(&sampler.draw(&mut rng::stream(99, i))),
        1000,
        DEFAULT_GRID_POINTS,
    )
    .unwrap();
    let elapsed = start.elapsed();
    let pass = result.sample.pass && result.pool.pass && elapsed < Duration::from_secs(300);
    report(
        10,
        "minP constant-output curve",
        pass,
        elapsed,
        &format!(
            "sample: {} pool: {}",
            violations(&result.sample),
            violations(&result.pool)
        ),
    );
}

fn violations(c: &MinPCurve) -> String {
    let bad: Vec<usize> = (0..c.grid.len())
        .filter(|&j| c.exceedance[j] > tolerance(c.grid[j], c.n_half))
        .collect();
    match bad.first() {
        None => format!("max exceedance {:.4}, within tolerance", c.max_exceedance),
        Some(&j) => format!(
            "max exceedance {:.4}; {} grid points outside tolerance, first t={:.4} F={:.4} allowed={:.4}",
            c.max_exceedance,
            bad.len(),
            c.grid[j],
            c.empirical[j],
            c.grid[j] + tolerance(c.grid[j], c.n_half)
        ),
    }
}
