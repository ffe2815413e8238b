//! Subcommand implementations. Heavy work runs on the rayon pool; all files
//! are written from the calling thread.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use sigpat_core::dataset::{load_graphs, load_transactions, BinaryDataset};
use sigpat_core::mining::{load_external_output, run_miner, Pattern, ScoredPattern};
use sigpat_core::minp::{self, curve_to_csv};
use sigpat_core::randomize::RandomizerSpec;
use sigpat_core::significance::{self, NullEnsemble, PValueMethod, Provenance, SignificanceReport};
use sigpat_core::synthetic::{self, GaussianConfig};
use sigpat_core::{Error, MinerKind, MinerSpec, RandomizerKind, StatisticKind, TransactionFormat};

use crate::manifest::{InputFile, RunManifest};
use crate::{
    AdversarialArgs, Cli, CliError, Command, MineArgs, MinpArgs, RandomizeArgs, SynthArgs, TestArgs,
};

type Result<T> = std::result::Result<T, CliError>;

/// Randomized datasets generated per batch by `randomize`, bounding memory.
const WRITE_BATCH: usize = 64;

pub fn run(cli: &Cli) -> Result<()> {
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Randomize(a) => randomize(a, cli.seed, out),
        Command::Mine(a) => mine(a, cli.seed, out),
        Command::Test(a) => test(a, cli.seed, out),
        Command::MinpCheck(a) => minp_check(a, cli.seed, out),
        Command::Synth(a) => synth(a, cli.seed, out),
        Command::Adversarial(a) => adversarial(a, cli.seed),
    }
}

/// Argument errors detected by the library are usage errors for the CLI.
fn usage(e: Error) -> CliError {
    match e {
        Error::InvalidArgument(msg) => CliError::Usage(msg),
        Error::KindMismatch { statistic, miner } => CliError::Usage(format!(
            "--stat {statistic} cannot be used with --miner {miner}"
        )),
        other => CliError::Core(other),
    }
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(path) => fs::write(path, bytes).map_err(|e| CliError::io(path, e)),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(bytes)
                .and_then(|_| stdout.flush())
                .map_err(|e| CliError::io(Path::new("<stdout>"), e))
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Writes `<out>.manifest.json` next to a CSV output.
fn sidecar(out: Option<&Path>, manifest: &RunManifest) -> Result<()> {
    if let Some(path) = out {
        let mut name = path.as_os_str().to_owned();
        name.push(".manifest.json");
        let side = PathBuf::from(name);
        fs::write(&side, to_json(manifest)?).map_err(|e| CliError::io(&side, e))?;
    }
    Ok(())
}

fn miner_spec(kind: MinerKind, min_support: usize, min_size: usize) -> Result<MinerSpec> {
    let spec = MinerSpec {
        kind,
        min_support,
        min_size,
    };
    spec.validate().map_err(usage)?;
    Ok(spec)
}

fn binary_randomizer(
    kind: RandomizerKind,
    attempts: Option<usize>,
    seed: u64,
) -> Result<RandomizerSpec> {
    if kind == RandomizerKind::GraphEdgeSwap {
        return Err(CliError::usage(
            "--randomizer graph needs graph transactions: write them with `randomize --method graph`, \
             mine them externally and pass the outputs with --external/--external-null",
        ));
    }
    RandomizerSpec::new(kind, attempts, seed).map_err(usage)
}

fn conventions(
    miner: Option<&MinerSpec>,
    stat: Option<StatisticKind>,
    randomizer: Option<&RandomizerSpec>,
) -> Vec<String> {
    let mut c = vec![
        "p_sample counts the original dataset as sample n+1; p_pool adds its patterns to the pool"
            .to_string(),
        "a pattern is significant when its Holm-adjusted p-value is <= alpha".to_string(),
    ];
    if miner.is_some_and(|m| m.kind == MinerKind::AssociationRules) {
        c.push("association rules have a single-item consequent".into());
    }
    if stat == Some(StatisticKind::Fisher) {
        c.push(
            "fisher statistic is -ln of the one-sided (over-representation) Fisher exact p-value"
                .into(),
        );
    }
    if let Some(r) = randomizer {
        if r.kind == RandomizerKind::Swap && r.attempts.is_none() {
            c.push(format!(
                "swap randomizer makes {} attempts per one-entry of the matrix",
                sigpat_core::randomize::DEFAULT_SWAPS_PER_CELL
            ));
        }
    }
    c
}

/// Item ids in place of internal column indices.
fn named(p: &Pattern, labels: &[String]) -> String {
    let set = |items: &[u32]| {
        let names: Vec<&str> = items.iter().map(|&i| labels[i as usize].as_str()).collect();
        format!("{{{}}}", names.join(","))
    };
    match p {
        Pattern::Itemset { items } => set(items.items()),
        Pattern::Rule { rule } => format!(
            "{} -> {}",
            set(rule.antecedent.items()),
            set(rule.consequent.items())
        ),
        other => other.to_string(),
    }
}

fn randomize(a: &RandomizeArgs, seed: u64, out: Option<&Path>) -> Result<()> {
    let dir = out.ok_or_else(|| CliError::usage("randomize needs --out <directory>"))?;
    if a.n == 0 {
        return Err(CliError::usage("--n must be >= 1"));
    }
    let spec = RandomizerSpec::new(a.method, a.attempts, seed).map_err(usage)?;
    let mut manifest = RunManifest::start("randomize", seed);
    manifest.inputs.push(InputFile::hash(&a.input)?);
    manifest.randomizer = Some(spec);
    manifest.n = Some(a.n);
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;

    if a.method == RandomizerKind::GraphEdgeSwap {
        let g = load_graphs(&a.input)?;
        manifest.effective_attempts = Some(spec.graph_attempts());
        for start in (0..a.n).step_by(WRITE_BATCH) {
            let end = (start + WRITE_BATCH).min(a.n);
            let batch: Vec<_> = (start as u64..end as u64)
                .into_par_iter()
                .map(|i| spec.randomize_graphs(&g, i))
                .collect::<std::result::Result<_, _>>()?;
            for (i, r) in (start..end).zip(batch) {
                r.write(&dir.join(format!("random_{i:05}.graph")))?;
            }
        }
    } else {
        let d = load_transactions(&a.input, a.format)?;
        manifest.format = Some(a.format);
        if a.method == RandomizerKind::Swap {
            manifest.effective_attempts = Some(spec.swap_attempts(&d));
        }
        let ext = match a.format {
            TransactionFormat::ItemList => "txt",
            TransactionFormat::DenseCsv => "csv",
        };
        for start in (0..a.n).step_by(WRITE_BATCH) {
            let end = (start + WRITE_BATCH).min(a.n);
            let batch: Vec<BinaryDataset> = (start as u64..end as u64)
                .into_par_iter()
                .map(|i| spec.randomize(&d, i))
                .collect::<std::result::Result<_, _>>()?;
            for (i, r) in (start..end).zip(batch) {
                r.write(&dir.join(format!("random_{i:05}.{ext}")), a.format)?;
            }
        }
    }
    let path = dir.join("manifest.json");
    fs::write(&path, to_json(&manifest.finish())?).map_err(|e| CliError::io(&path, e))
}

#[derive(Serialize)]
struct NamedPattern<'a> {
    name: String,
    #[serde(flatten)]
    scored: &'a ScoredPattern,
}

#[derive(Serialize)]
struct MineOutput<'a> {
    manifest: RunManifest,
    /// External item id of each internal column index.
    labels: &'a [String],
    patterns: Vec<NamedPattern<'a>>,
}

fn mine(a: &MineArgs, seed: u64, out: Option<&Path>) -> Result<()> {
    let spec = miner_spec(a.miner.miner, a.miner.min_support, a.miner.min_size)?;
    let mut manifest = RunManifest::start("mine", seed);
    manifest.inputs.push(InputFile::hash(&a.data.input)?);
    manifest.format = Some(a.data.format);
    manifest.miner = Some(spec);
    manifest.statistic = Some(a.miner.stat);
    let d = load_transactions(&a.data.input, a.data.format)?;
    let output = run_miner(&d, &spec, a.miner.stat, None).map_err(usage)?;
    eprintln!("{} patterns", output.len());
    let doc = MineOutput {
        manifest: manifest.finish(),
        labels: d.labels(),
        patterns: output
            .patterns
            .iter()
            .map(|p| NamedPattern {
                name: named(&p.pattern, d.labels()),
                scored: p,
            })
            .collect(),
    };
    emit(out, &to_json(&doc)?)
}

#[derive(Serialize)]
struct TestOutput<'a> {
    manifest: RunManifest,
    #[serde(skip_serializing_if = "<[String]>::is_empty")]
    labels: &'a [String],
    /// Significant patterns under the primary method, by increasing adjusted p-value.
    significant: Vec<String>,
    report: SignificanceReport,
}

fn test(a: &TestArgs, seed: u64, out: Option<&Path>) -> Result<()> {
    let mut manifest = RunManifest::start("test", seed);
    manifest.alpha = Some(a.alpha);
    manifest.method = Some(a.method);
    let (ensemble, labels, provenance) = if let Some(ext) = &a.external {
        manifest.inputs.push(InputFile::hash(ext)?);
        let original = load_external_output(ext, None)?;
        let mut nulls = Vec::with_capacity(a.external_null.len());
        for (i, path) in a.external_null.iter().enumerate() {
            manifest.inputs.push(InputFile::hash(path)?);
            nulls.push(load_external_output(path, Some(i as u64))?);
        }
        manifest.n = Some(nulls.len());
        let provenance = Provenance {
            seed,
            conventions: conventions(None, None, None),
            ..Default::default()
        };
        (NullEnsemble::new(original, &nulls)?, Vec::new(), provenance)
    } else {
        let input = a.input.as_deref().expect("clap requires --in");
        let miner = miner_spec(
            a.miner.expect("clap requires --miner"),
            a.min_support.expect("required"),
            a.min_size,
        )?;
        let stat = a.stat.expect("clap requires --stat");
        let n = a.n.expect("clap requires --n");
        if n == 0 {
            return Err(CliError::usage("--n must be >= 1"));
        }
        let randomizer = binary_randomizer(
            a.randomizer.expect("clap requires --randomizer"),
            a.attempts,
            seed,
        )?;
        manifest.inputs.push(InputFile::hash(input)?);
        manifest.format = Some(a.format);
        manifest.miner = Some(miner);
        manifest.statistic = Some(stat);
        manifest.randomizer = Some(randomizer);
        manifest.n = Some(n);

        let d = load_transactions(input, a.format)?;
        let original = run_miner(&d, &miner, stat, None).map_err(usage)?;
        let nulls: Vec<Vec<f64>> = (0..n as u64)
            .into_par_iter()
            .map(|i| {
                let r = randomizer.randomize(&d, i)?;
                Ok(run_miner(&r, &miner, stat, Some(i))?.statistics())
            })
            .collect::<std::result::Result<_, Error>>()?;
        let effective =
            (randomizer.kind == RandomizerKind::Swap).then(|| randomizer.swap_attempts(&d));
        manifest.effective_attempts = effective;
        let provenance = Provenance {
            randomizer: Some(randomizer),
            effective_attempts: effective,
            miner: Some(miner),
            statistic: Some(stat),
            seed,
            conventions: conventions(Some(&miner), Some(stat), Some(&randomizer)),
        };
        (
            NullEnsemble::from_statistics(original, nulls)?,
            d.labels().to_vec(),
            provenance,
        )
    };
    let report =
        significance::significant(&ensemble, a.method, a.alpha, provenance).map_err(usage)?;
    let significant: Vec<String> = report
        .significant_patterns()
        .map(|r| {
            if labels.is_empty() {
                r.pattern.to_string()
            } else {
                named(&r.pattern, &labels)
            }
        })
        .collect();
    eprintln!(
        "{} patterns, {} significant at alpha = {} ({})",
        report.m,
        significant.len(),
        a.alpha,
        a.method
    );
    let doc = TestOutput {
        manifest: manifest.finish(),
        labels: &labels,
        significant,
        report,
    };
    emit(out, &to_json(&doc)?)
}

fn minp_check(a: &MinpArgs, seed: u64, out: Option<&Path>) -> Result<()> {
    if a.method == PValueMethod::Both {
        return Err(CliError::usage(
            "--method must be `sample` or `pool` for minp-check",
        ));
    }
    if a.n < 2 || !a.n.is_multiple_of(2) {
        return Err(CliError::usage(format!(
            "--n must be even and >= 2, got {}",
            a.n
        )));
    }
    let miner = miner_spec(a.miner.miner, a.miner.min_support, a.miner.min_size)?;
    let randomizer = binary_randomizer(a.randomizer.randomizer, a.randomizer.attempts, seed)?;
    let mut manifest = RunManifest::start("minp-check", seed);
    manifest.inputs.push(InputFile::hash(&a.data.input)?);
    manifest.format = Some(a.data.format);
    manifest.miner = Some(miner);
    manifest.statistic = Some(a.miner.stat);
    manifest.randomizer = Some(randomizer);
    manifest.n = Some(a.n);
    manifest.method = Some(a.method);

    let d = load_transactions(&a.data.input, a.data.format)?;
    if randomizer.kind == RandomizerKind::Swap {
        manifest.effective_attempts = Some(randomizer.swap_attempts(&d));
    }
    let result = minp::minp_test(&d, &randomizer, &miner, a.miner.stat, a.n).map_err(usage)?;
    let curve = match a.method {
        PValueMethod::Pool => &result.pool,
        _ => &result.sample,
    };
    eprintln!(
        "minP {} curve: {} (max exceedance {:.4}, {} datasets used, {} with empty output skipped)",
        a.method,
        if curve.pass { "PASS" } else { "FAIL" },
        curve.max_exceedance,
        curve.n_half,
        curve.skipped_empty
    );
    emit(out, curve_to_csv(curve).as_bytes())?;
    sidecar(out, &manifest.finish())
}

fn synth(a: &SynthArgs, seed: u64, out: Option<&Path>) -> Result<()> {
    let cfg = GaussianConfig {
        k: a.k,
        sigma: a.sigma,
        m0: a.m0.unwrap_or(a.k),
        alt_mean: a.alt_mean,
        runs: a.runs,
        n_null: a.n,
        seed,
    };
    cfg.validate().map_err(usage)?;
    if a.alg != synthetic::Algorithm::Ge1 && a.k < 10 {
        return Err(CliError::usage(format!("--alg {} needs --k >= 10", a.alg)));
    }
    let mut manifest = RunManifest::start("synth", seed);
    manifest.algorithm = Some(a.alg);
    manifest.synthetic = Some(cfg);
    manifest.method = Some(a.method);

    let alphas = synthetic::default_alpha_grid();
    let result = synthetic::power_experiment(&cfg, a.alg, &alphas)?;
    let methods: Vec<(&str, &synthetic::MethodPower)> = [
        (a.method.wants_sample(), "sample", &result.sample),
        (a.method.wants_pool(), "pool", &result.pool),
    ]
    .into_iter()
    .filter(|(want, _, _)| *want)
    .map(|(_, name, m)| (name, m))
    .collect();

    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["alpha".to_string()];
    for (name, _) in &methods {
        for col in ["fwer", "fpr", "tpr", "type2_fraction"] {
            header.push(format!("{col}_{name}"));
        }
    }
    w.write_record(&header)?;
    let rate = |x: f64, defined: bool| {
        if defined {
            x.to_string()
        } else {
            String::new()
        }
    };
    for (j, alpha) in alphas.iter().enumerate() {
        let mut row = vec![alpha.to_string()];
        for (_, m) in &methods {
            let (fpr, tpr) = m.roc.points[j];
            row.push(m.fwer[j].to_string());
            row.push(rate(fpr, cfg.m0 > 0));
            row.push(rate(tpr, cfg.m1() > 0));
            row.push(rate(m.type2_fraction[j], cfg.m1() > 0));
        }
        w.write_record(&row)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| CliError::io(Path::new("<csv>"), e.into_error()))?;
    for (name, m) in &methods {
        eprintln!(
            "{name}: FWER at alpha 0.05 = {}, ROC AUC = {:.4}",
            m.fwer[5], m.roc.auc
        );
    }
    emit(out, &bytes)?;
    sidecar(out, &manifest.finish())
}

fn adversarial(a: &AdversarialArgs, seed: u64) -> Result<()> {
    let estimate = minp::adversarial_simulation(a.runs, seed).map_err(usage)?;
    println!("estimate {estimate}");
    println!("exact 29/45 = {}", 29.0 / 45.0);
    Ok(())
}
