//! `appcast bound`: evaluate the online AUC regret bound on a recorded run.
//!
//! The bound is per device-run: each device's trace is checked against each
//! requested comparator, and every row reports LHS, RHS, slack, and whether
//! the run sits inside the theorem's λ ≤ 1 hypothesis.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use clap::Args;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use appcast_core::eval::{regret_bound_check, BoundError, BoundReport, Comparator, RoundRecord};
use appcast_core::features::hashing::fnv1a64;
use appcast_core::predictors::{AucPaModel, ModelSnapshot};
use appcast_core::AppId;

use crate::out::write_atomic;
use crate::run::{device_file_stem, load_run};

#[derive(Debug, Clone)]
enum CompSpec {
    Zero,
    Final,
    Random(usize),
}

impl FromStr for CompSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "zero" => Ok(CompSpec::Zero),
            "final" => Ok(CompSpec::Final),
            _ => match s.strip_prefix("random:") {
                Some(n) => n
                    .parse::<usize>()
                    .map(CompSpec::Random)
                    .map_err(|e| format!("random count {n:?}: {e}")),
                None => Err(format!("unknown comparator {s:?} (zero, final, random:N)")),
            },
        }
    }
}

#[derive(Args)]
pub struct BoundArgs {
    /// Finished aucpa run directory (needs --record-pairs at run time).
    #[arg(long)]
    run: PathBuf,
    /// Comparator u: zero, final (the run's final weights), or random:N
    /// (N unit-norm draws). Repeatable.
    #[arg(long = "comparator", default_values_t = [String::from("zero")])]
    comparators: Vec<String>,
    /// Regularizer λ; defaults to the run's own.
    #[arg(long)]
    lambda: Option<f64>,
    /// Seed for random comparators.
    #[arg(long)]
    seed: Option<u64>,
    /// Report destination; defaults to bound.json inside the run directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct BoundRow {
    device: String,
    #[serde(flatten)]
    report: BoundReport,
}

pub fn exec(args: BoundArgs) -> Result<()> {
    let specs: Vec<CompSpec> = args
        .comparators
        .iter()
        .map(|s| s.parse().map_err(|e: String| anyhow!(e)))
        .collect::<Result<_>>()?;
    let run = load_run(&args.run)?;
    let lambda = match args.lambda.or(run.config.lambda) {
        Some(l) if l.is_finite() && l > 0.0 => l,
        Some(l) => bail!("lambda must be positive and finite, got {l}"),
        None => bail!("run has no λ on record; pass --lambda"),
    };
    let seed = crate::resolve_seed(args.seed, None)?;

    let mut by_device: BTreeMap<&str, Vec<RoundRecord>> = BTreeMap::new();
    for r in &run.trace.rounds {
        by_device.entry(r.device_id.as_str()).or_default().push(r.clone());
    }
    if by_device.is_empty() {
        bail!("run {} holds no prediction rounds", args.run.display());
    }

    let mut rows: Vec<BoundRow> = Vec::new();
    for (device, rounds) in &by_device {
        for spec in &specs {
            let comparators = materialize(spec, device, rounds, &args.run, seed)?;
            for u in &comparators {
                let report = regret_bound_check(rounds, u, lambda).map_err(|e| match e {
                    BoundError::MissingPairs { .. } => anyhow!(
                        "{e}; rerun with `appcast run --algo aucpa --record-pairs`"
                    ),
                    other => anyhow!(other),
                })?;
                println!(
                    "{device} {:<12} lhs={:.6} rhs={:.6} slack={:+.6} {}",
                    report.comparator,
                    report.lhs,
                    report.rhs,
                    report.slack,
                    if report.holds { "holds" } else { "VIOLATED" },
                );
                rows.push(BoundRow { device: device.to_string(), report });
            }
        }
    }

    let holding = rows.iter().filter(|r| r.report.holds).count();
    println!("bound holds on {holding}/{} rows (λ = {lambda})", rows.len());
    if !rows.iter().all(|r| r.report.within_hypothesis) {
        println!("note: λ > 1 falls outside the theorem's hypothesis");
    }
    if holding < rows.len() {
        eprintln!("warning: {} rows violate the bound", rows.len() - holding);
    }

    let out = args.out.unwrap_or_else(|| args.run.join("bound.json"));
    let text = serde_json::to_string_pretty(&rows).context("serializing bound report")?;
    write_atomic(&out, text.as_bytes())?;
    Ok(())
}

/// Expands one comparator spec for one device.
fn materialize(
    spec: &CompSpec,
    device: &str,
    rounds: &[RoundRecord],
    run_dir: &std::path::Path,
    seed: u64,
) -> Result<Vec<Comparator>> {
    match spec {
        CompSpec::Zero => Ok(vec![Comparator::zero()]),
        CompSpec::Final => {
            let path = run_dir.join("models").join(format!("{}.json", device_file_stem(device)));
            let text = fs::read_to_string(&path).with_context(|| {
                format!("final comparator needs the model snapshot {}", path.display())
            })?;
            let snap: ModelSnapshot = serde_json::from_str(&text)
                .with_context(|| format!("parsing {}", path.display()))?;
            let model = AucPaModel::restore(snap)
                .with_context(|| format!("restoring {}", path.display()))?;
            Ok(vec![Comparator::from_model(&model)])
        }
        CompSpec::Random(n) => {
            // The draw space spans every app the trace ever scored.
            let mut apps: BTreeSet<AppId> = BTreeSet::new();
            for r in rounds {
                if let Some(pair) = &r.pair {
                    apps.insert(pair.pos_app.clone());
                    for neg in &pair.negatives {
                        apps.insert(neg.app.clone());
                    }
                }
            }
            let apps: Vec<AppId> = apps.into_iter().collect();
            let mut rng = ChaCha20Rng::seed_from_u64(seed ^ fnv1a64(device.as_bytes(), 0));
            Ok((0..*n).map(|i| Comparator::random_unit(&apps, i, &mut rng)).collect())
        }
    }
}
