use std::collections::BTreeSet;

use proptest::prelude::*;
use sigpat_core::dataset::{load_transactions, BinaryDataset, TransactionFormat};
use sigpat_core::mining::{mine_frequent, Pattern, PatternOutput, ScoredPattern};
use sigpat_core::randomize::{randomize_col, randomize_swap};
use sigpat_core::rng;
use sigpat_core::significance::{adjust_bonferroni, adjust_holm, holm_unsorted, NullEnsemble};

fn dataset() -> impl Strategy<Value = BinaryDataset> {
    (1usize..8, 1usize..25).prop_flat_map(|(cols, rows)| {
        prop::collection::vec(prop::collection::btree_set(0..cols as u32, 0..=cols), rows).prop_map(
            move |rows| {
                BinaryDataset::from_rows(
                    rows.into_iter().map(|r| r.into_iter().collect()).collect(),
                    cols,
                )
                .unwrap()
            },
        )
    })
}

fn output(stats: Vec<i32>) -> PatternOutput {
    PatternOutput::new(
        stats
            .into_iter()
            .enumerate()
            .map(|(i, s)| ScoredPattern {
                pattern: Pattern::Coordinate { index: i },
                statistic: f64::from(s),
            })
            .collect(),
        None,
    )
    .unwrap()
}

fn outputs(max_len: usize) -> impl Strategy<Value = Vec<Vec<i32>>> {
    prop::collection::vec(prop::collection::vec(-20i32..20, 0..max_len), 1..20)
}

proptest! {
    #[test]
    fn col_preserves_column_margins(d in dataset(), seed in any::<u64>()) {
        let r = randomize_col(&d, &mut rng::stream(seed, 0));
        prop_assert_eq!(r.col_margins(), d.col_margins());
        prop_assert_eq!(r.n_rows(), d.n_rows());
    }

    #[test]
    fn swap_preserves_both_margins(d in dataset(), seed in any::<u64>(), attempts in 1usize..200) {
        let (r, stats) = randomize_swap(&d, attempts, &mut rng::stream(seed, 0));
        prop_assert_eq!(r.col_margins(), d.col_margins());
        prop_assert_eq!(r.row_margins(), d.row_margins());
        prop_assert_eq!(stats.attempted, attempts);
        prop_assert!(stats.accepted <= attempts);
    }

    #[test]
    fn holm_is_monotone_and_bounded(mut p in prop::collection::vec(0.0f64..=1.0, 1..60)) {
        let shuffled = holm_unsorted(&p);
        let bonf = adjust_bonferroni(&p, p.len());
        for i in 0..p.len() {
            prop_assert!(p[i] <= shuffled[i] && shuffled[i] <= bonf[i]);
        }
        p.sort_by(f64::total_cmp);
        let holm = adjust_holm(&p).unwrap();
        prop_assert!(holm.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(holm.iter().all(|&q| q <= 1.0));
    }

    #[test]
    fn p_values_lie_in_unit_interval(orig in prop::collection::vec(-20i32..20, 1..10), nulls in outputs(12)) {
        let ens = NullEnsemble::new(output(orig), &nulls.into_iter().map(output).collect::<Vec<_>>()).unwrap();
        for p in ens.p_values() {
            prop_assert!(p.sample > 0.0 && p.sample <= 1.0);
            prop_assert!(p.pool > 0.0 && p.pool <= 1.0);
        }
    }

    #[test]
    fn constant_size_outputs_agree(size in 1usize..8, orig_seed in any::<u64>(), n in 1usize..30) {
        let draw = |i: u64| {
            let mut r = rng::stream(orig_seed, i);
            (0..size).map(|_| rand::Rng::random_range(&mut r, -50i32..50)).collect::<Vec<_>>()
        };
        let orig = output(draw(0));
        let nulls: Vec<PatternOutput> = (1..=n as u64).map(|i| output(draw(i))).collect();
        let ens = NullEnsemble::new(orig, &nulls).unwrap();
        for p in ens.p_values() {
            prop_assert_eq!(p.sample.to_bits(), p.pool.to_bits());
        }
    }

    #[test]
    fn strictly_increasing_transforms_keep_p_values(orig in prop::collection::vec(-20i32..20, 1..10), nulls in outputs(12)) {
        let base = NullEnsemble::new(output(orig.clone()), &nulls.iter().cloned().map(output).collect::<Vec<_>>())
            .unwrap()
            .p_values();
        let cube = |o: PatternOutput| {
            let mut o = o;
            o.patterns.iter_mut().for_each(|p| p.statistic = p.statistic.powi(3) - 4.0);
            o
        };
        let moved = NullEnsemble::new(cube(output(orig)), &nulls.into_iter().map(|v| cube(output(v))).collect::<Vec<_>>())
            .unwrap()
            .p_values();
        prop_assert_eq!(base, moved);
    }

    #[test]
    fn miner_matches_enumeration(d in dataset(), min_support in 1usize..5, min_size in 1usize..3) {
        let mined: BTreeSet<Vec<u32>> = mine_frequent(&d, min_support, min_size)
            .unwrap()
            .into_iter()
            .map(|f| f.itemset.items().to_vec())
            .collect();
        let cols = d.n_cols() as u32;
        let expected: BTreeSet<Vec<u32>> = (1u32..1 << cols)
            .map(|mask| (0..cols).filter(|i| mask >> i & 1 == 1).collect::<Vec<_>>())
            .filter(|items| items.len() >= min_size && d.support(items) >= min_support)
            .collect();
        prop_assert_eq!(mined, expected);
    }

    #[test]
    fn dense_csv_round_trip(d in dataset()) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        d.write(&path, TransactionFormat::DenseCsv).unwrap();
        let back = load_transactions(&path, TransactionFormat::DenseCsv).unwrap();
        prop_assert_eq!(back.rows(), d.rows());
        prop_assert_eq!(back.n_cols(), d.n_cols());
    }

    #[test]
    fn item_list_round_trip_keeps_labelled_rows(d in dataset()) {
        prop_assume!(d.n_cells() > 0);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.txt");
        d.write(&path, TransactionFormat::ItemList).unwrap();
        let back = load_transactions(&path, TransactionFormat::ItemList).unwrap();
        let named = |x: &BinaryDataset| -> Vec<BTreeSet<String>> {
            x.rows().iter().map(|r| r.iter().map(|&c| x.labels()[c as usize].clone()).collect()).collect()
        };
        prop_assert_eq!(named(&back), named(&d));
    }
}
