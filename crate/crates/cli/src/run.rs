//! `appcast run`: strictly online replay of an event log through one policy.
//!
//! The out-dir receives trace.jsonl (one prediction round per line, stream
//! order), metrics.csv, effective_config.json, and for the learner a final
//! model snapshot per device under models/. With --snapshot-every N a
//! checkpoint per device is kept under checkpoints/, from which --resume
//! reproduces the uninterrupted run byte for byte.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use appcast_core::event::{read_events, ClickEvent};
use appcast_core::eval::{
    compute_metrics, write_metrics_csv, DeviceReplay, MetricsReport, ReplayConfig, ReplayState,
    RoundRecord, RunTrace,
};
use appcast_core::features::frecency::{DEFAULT_P, DEFAULT_WINDOW_DAYS};
use appcast_core::features::hashing::fnv1a64;
use appcast_core::predictors::{
    AucPaModel, AucPaParams, FrecencyPredictor, KmfuPredictor, ModelSnapshot, Predictor,
    PredictorKind, UpdateReport,
};
use appcast_core::{AppId, ContextSnapshot, PredictionSet};

use crate::out::{fmt_opt, sha256_hex, write_atomic};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Algo {
    Kmfu,
    Frecency,
    Aucpa,
}

impl Algo {
    fn kind(self) -> PredictorKind {
        match self {
            Algo::Kmfu => PredictorKind::Kmfu,
            Algo::Frecency => PredictorKind::Frecency,
            Algo::Aucpa => PredictorKind::AucPa,
        }
    }
}

#[derive(Args)]
pub struct RunArgs {
    /// Prediction policy to replay.
    #[arg(long, value_enum)]
    algo: Algo,
    /// Event log (JSONL) to replay.
    #[arg(long)]
    events: PathBuf,
    /// Output directory; created if missing.
    #[arg(long)]
    out_dir: PathBuf,
    /// Prediction set size k.
    #[arg(long)]
    k: Option<usize>,
    /// Aggressiveness C (aucpa); λ = 1/C.
    #[arg(long, conflicts_with = "lambda")]
    c: Option<f64>,
    /// Regularizer λ (aucpa); C = 1/λ.
    #[arg(long)]
    lambda: Option<f64>,
    /// Frecency decay base p.
    #[arg(long)]
    frecency_p: Option<f64>,
    /// Frecency characteristic window T in days.
    #[arg(long)]
    frecency_days: Option<f64>,
    /// Days excluded from headline metrics at each device's stream start.
    #[arg(long)]
    warmup_days: Option<u32>,
    /// Seed for the learner's negative sampling.
    #[arg(long)]
    seed: Option<u64>,
    /// Device-level parallelism; 1 replays serially.
    #[arg(long)]
    jobs: Option<usize>,
    /// Write a per-device checkpoint every N events (aucpa only).
    #[arg(long)]
    snapshot_every: Option<u64>,
    /// Store each round's loss instance in the trace for bound checks
    /// (aucpa only).
    #[arg(long)]
    record_pairs: bool,
    /// JSON config file; flags override its fields.
    #[arg(long, conflicts_with = "resume")]
    config: Option<PathBuf>,
    /// Resume from another run's checkpoints; its settings fill in for
    /// absent flags.
    #[arg(long)]
    resume: Option<PathBuf>,
}

/// Tunables a --config file may set; flags win field by field. Fields
/// irrelevant to the chosen algorithm are ignored.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    k: Option<usize>,
    c: Option<f64>,
    lambda: Option<f64>,
    frecency_p: Option<f64>,
    frecency_days: Option<f64>,
    warmup_days: Option<u32>,
    seed: Option<u64>,
    jobs: Option<usize>,
    snapshot_every: Option<u64>,
    record_pairs: Option<bool>,
}

/// Fully resolved run settings, echoed into the out-dir for provenance and
/// read back by `report` and `bound`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EffectiveConfig {
    pub algo: String,
    pub k: usize,
    pub c: Option<f64>,
    pub lambda: Option<f64>,
    pub frecency_p: Option<f64>,
    pub frecency_days: Option<f64>,
    pub warmup_days: u32,
    pub seed: u64,
    pub jobs: usize,
    pub snapshot_every: Option<u64>,
    pub record_pairs: bool,
    pub events: String,
    pub events_sha256: String,
}

struct Resolved {
    algo: Algo,
    k: usize,
    c: f64,
    frecency_p: f64,
    frecency_days: f64,
    warmup_days: u32,
    seed: u64,
    jobs: usize,
    snapshot_every: Option<u64>,
    record_pairs: bool,
}

fn resolve(args: &RunArgs, file: FileConfig) -> Result<Resolved> {
    if args.algo != Algo::Aucpa {
        if args.c.is_some() || args.lambda.is_some() {
            bail!("--c/--lambda apply only to --algo aucpa");
        }
        if args.record_pairs {
            bail!("--record-pairs applies only to --algo aucpa");
        }
        if args.snapshot_every.is_some() || args.resume.is_some() {
            bail!("--snapshot-every/--resume apply only to --algo aucpa");
        }
    }
    if args.algo != Algo::Frecency && (args.frecency_p.is_some() || args.frecency_days.is_some()) {
        bail!("--frecency-p/--frecency-days apply only to --algo frecency");
    }

    let c = match (args.c, args.lambda) {
        (Some(c), _) => c,
        (None, Some(l)) => 1.0 / l,
        (None, None) => match (file.c, file.lambda) {
            (Some(_), Some(_)) => bail!("config sets both c and lambda; give exactly one"),
            (Some(c), None) => c,
            (None, Some(l)) => 1.0 / l,
            (None, None) => AucPaParams::default().c,
        },
    };
    if !(c.is_finite() && c > 0.0) {
        bail!("C must be positive and finite, got {c}");
    }

    let k = args.k.or(file.k).unwrap_or(ReplayConfig::default().k);
    if k == 0 {
        bail!("k must be at least 1");
    }
    let frecency_p = args.frecency_p.or(file.frecency_p).unwrap_or(DEFAULT_P);
    if !(frecency_p > 0.0 && frecency_p < 1.0) {
        bail!("frecency p must lie in (0,1), got {frecency_p}");
    }
    let frecency_days = args.frecency_days.or(file.frecency_days).unwrap_or(DEFAULT_WINDOW_DAYS);
    if !(frecency_days.is_finite() && frecency_days > 0.0) {
        bail!("frecency window must be positive, got {frecency_days} days");
    }
    let warmup_days =
        args.warmup_days.or(file.warmup_days).unwrap_or(ReplayConfig::default().warmup_days);
    let seed = crate::resolve_seed(args.seed, file.seed)?;
    let jobs = args.jobs.or(file.jobs).unwrap_or(1);
    if jobs == 0 {
        bail!("jobs must be at least 1");
    }
    let snapshot_every = args.snapshot_every.or(file.snapshot_every);
    if snapshot_every == Some(0) {
        bail!("snapshot cadence must be at least 1 event");
    }
    let record_pairs = args.record_pairs || file.record_pairs.unwrap_or(false);

    Ok(Resolved {
        algo: args.algo,
        k,
        c,
        frecency_p,
        frecency_days,
        warmup_days,
        seed,
        jobs,
        snapshot_every,
        record_pairs,
    })
}

/// The three policies behind one concrete type, so replay stays monomorphic
/// and the learner keeps its concrete type for snapshotting.
enum Policy {
    Kmfu(KmfuPredictor),
    Frecency(FrecencyPredictor),
    AucPa(AucPaModel),
}

impl Predictor for Policy {
    fn kind(&self) -> PredictorKind {
        match self {
            Policy::Kmfu(p) => p.kind(),
            Policy::Frecency(p) => p.kind(),
            Policy::AucPa(p) => p.kind(),
        }
    }

    fn predict(&self, ctx: &ContextSnapshot, candidates: &[AppId], k: usize) -> PredictionSet {
        match self {
            Policy::Kmfu(p) => p.predict(ctx, candidates, k),
            Policy::Frecency(p) => p.predict(ctx, candidates, k),
            Policy::AucPa(p) => p.predict(ctx, candidates, k),
        }
    }

    fn observe(&mut self, click: &ClickEvent) -> UpdateReport {
        match self {
            Policy::Kmfu(p) => p.observe(click),
            Policy::Frecency(p) => p.observe(click),
            Policy::AucPa(p) => p.observe(click),
        }
    }
}

fn build_policy(cfg: &Resolved, device_id: &str) -> Policy {
    match cfg.algo {
        Algo::Kmfu => Policy::Kmfu(KmfuPredictor::new()),
        Algo::Frecency => {
            Policy::Frecency(FrecencyPredictor::new(cfg.frecency_p, cfg.frecency_days))
        }
        Algo::Aucpa => {
            let params = AucPaParams {
                c: cfg.c,
                record_pairs: cfg.record_pairs,
                ..AucPaParams::default()
            };
            Policy::AucPa(AucPaModel::new(params, cfg.seed ^ fnv1a64(device_id.as_bytes(), 0)))
        }
    }
}

/// Mid-stream state of one device: replay progress, model, and the rounds
/// already emitted, enough to finish the run with no access to the past.
#[derive(Serialize, Deserialize)]
struct Checkpoint {
    replay: ReplayState,
    model: ModelSnapshot,
    rounds: Vec<RoundRecord>,
}

/// Device ids become file names for models and checkpoints; anything outside
/// a conservative character set is replaced. Collisions are rejected before
/// the run starts.
pub fn device_file_stem(device_id: &str) -> String {
    device_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' })
        .collect()
}

struct DeviceTask<'a> {
    device_id: String,
    /// The device's events with their indices in the merged stream.
    events: Vec<(usize, &'a ClickEvent)>,
    checkpoint: Option<Checkpoint>,
}

struct DeviceDone {
    device_id: String,
    rounds: Vec<(usize, RoundRecord)>,
    policy: Policy,
}

fn write_checkpoint(
    dir: &Path,
    replay: &DeviceReplay<Policy>,
    emitted: &[(usize, RoundRecord)],
) -> Result<()> {
    let Policy::AucPa(model) = replay.predictor() else {
        bail!("checkpoints exist only for aucpa runs");
    };
    let ck = Checkpoint {
        replay: replay.state().clone(),
        model: model.snapshot(),
        rounds: emitted.iter().map(|(_, r)| r.clone()).collect(),
    };
    let path = dir.join(format!("{}.json", device_file_stem(&ck.replay.device_id)));
    write_atomic(&path, serde_json::to_string(&ck).context("serializing checkpoint")?.as_bytes())
}

fn replay_device(task: DeviceTask<'_>, cfg: &Resolved, ckpt_dir: Option<&Path>) -> Result<DeviceDone> {
    let rcfg = ReplayConfig { k: cfg.k, warmup_days: cfg.warmup_days };
    let mut emitted: Vec<(usize, RoundRecord)> = Vec::new();
    let mut replay = match task.checkpoint {
        Some(ck) => {
            let model = AucPaModel::restore(ck.model)
                .with_context(|| format!("restoring checkpoint model for {}", task.device_id))?;
            let seen = ck.replay.events_seen as usize;
            if seen > task.events.len() {
                bail!(
                    "checkpoint for {} covers {seen} events but the log holds only {}",
                    task.device_id,
                    task.events.len()
                );
            }
            // Re-emit the checkpointed rounds against the already-consumed
            // prefix, so the final trace is identical to an unbroken run.
            let mut stored = ck.rounds.into_iter();
            for (idx, ev) in &task.events[..seen] {
                if !ev.slot.is_first_tier() {
                    let r = stored.next().with_context(|| {
                        format!("checkpoint for {} stores too few rounds for its event count", task.device_id)
                    })?;
                    emitted.push((*idx, r));
                }
            }
            if stored.next().is_some() {
                bail!("checkpoint for {} stores more rounds than its event count implies", task.device_id);
            }
            DeviceReplay::resume(ck.replay, &rcfg, Policy::AucPa(model))
        }
        None => DeviceReplay::new(&task.device_id, &rcfg, build_policy(cfg, &task.device_id)),
    };

    let start = replay.state().events_seen as usize;
    for (idx, ev) in &task.events[start..] {
        if let Some(r) = replay.step(*idx, ev)? {
            emitted.push((*idx, r));
        }
        if let (Some(every), Some(dir)) = (cfg.snapshot_every, ckpt_dir) {
            if replay.state().events_seen % every == 0 {
                write_checkpoint(dir, &replay, &emitted)?;
            }
        }
    }
    let (_, policy) = replay.into_parts();
    Ok(DeviceDone { device_id: task.device_id, rounds: emitted, policy })
}

fn read_effective_config(dir: &Path) -> Result<EffectiveConfig> {
    let path = dir.join("effective_config.json");
    let text =
        fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn exec(args: RunArgs) -> Result<()> {
    let bytes = fs::read(&args.events)
        .with_context(|| format!("reading events from {}", args.events.display()))?;
    let events_sha256 = sha256_hex(&bytes);
    let events = read_events(&bytes[..])
        .with_context(|| format!("parsing events from {}", args.events.display()))?;

    // Config layers under the flags: a --config file, or on resume the
    // source run's effective config so unspecified settings carry over.
    let file_cfg = match (&args.config, &args.resume) {
        (Some(path), _) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            serde_json::from_str(&text)
                .with_context(|| format!("parsing config {}", path.display()))?
        }
        (None, Some(dir)) => {
            let meta = read_effective_config(dir)?;
            if meta.algo != args.algo.kind().as_str() {
                bail!("resume run was {} but --algo is {}", meta.algo, args.algo.kind());
            }
            if meta.events_sha256 != events_sha256 {
                bail!(
                    "resume checkpoints in {} were taken on a different event log",
                    dir.display()
                );
            }
            FileConfig {
                k: Some(meta.k),
                c: meta.c,
                lambda: None,
                frecency_p: meta.frecency_p,
                frecency_days: meta.frecency_days,
                warmup_days: Some(meta.warmup_days),
                seed: Some(meta.seed),
                jobs: Some(meta.jobs),
                snapshot_every: meta.snapshot_every,
                record_pairs: Some(meta.record_pairs),
            }
        }
        (None, None) => FileConfig::default(),
    };
    let cfg = resolve(&args, file_cfg)?;

    let mut checkpoints: BTreeMap<String, Checkpoint> = BTreeMap::new();
    if let Some(res_dir) = &args.resume {
        let ckdir = res_dir.join("checkpoints");
        let entries = fs::read_dir(&ckdir)
            .with_context(|| format!("reading checkpoints from {}", ckdir.display()))?;
        for entry in entries {
            let path = entry?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("json") {
                continue;
            }
            let text = fs::read_to_string(&path)
                .with_context(|| format!("reading {}", path.display()))?;
            let ck: Checkpoint = serde_json::from_str(&text)
                .with_context(|| format!("parsing {}", path.display()))?;
            checkpoints.insert(ck.replay.device_id.clone(), ck);
        }
        if checkpoints.is_empty() {
            bail!("{} holds no checkpoints to resume from", ckdir.display());
        }
    }

    let mut by_device: BTreeMap<String, Vec<(usize, &ClickEvent)>> = BTreeMap::new();
    for (i, ev) in events.iter().enumerate() {
        by_device.entry(ev.device_id.clone()).or_default().push((i, ev));
    }
    if cfg.algo == Algo::Aucpa {
        let mut stems: BTreeMap<String, &str> = BTreeMap::new();
        for id in by_device.keys() {
            if let Some(other) = stems.insert(device_file_stem(id), id) {
                bail!("device ids {other:?} and {id:?} collide as file names");
            }
        }
    }
    let tasks: Vec<DeviceTask> = by_device
        .into_iter()
        .map(|(device_id, events)| {
            let checkpoint = checkpoints.remove(&device_id);
            DeviceTask { device_id, events, checkpoint }
        })
        .collect();
    if let Some(stray) = checkpoints.keys().next() {
        bail!("checkpoint for {stray:?} matches no device in the event log");
    }

    let ckpt_dir = cfg.snapshot_every.map(|_| args.out_dir.join("checkpoints"));
    if let Some(dir) = &ckpt_dir {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let results: Vec<Result<DeviceDone>> = if cfg.jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.jobs)
            .build()
            .context("building worker pool")?;
        pool.install(|| {
            tasks
                .into_par_iter()
                .map(|t| replay_device(t, &cfg, ckpt_dir.as_deref()))
                .collect()
        })
    } else {
        tasks.into_iter().map(|t| replay_device(t, &cfg, ckpt_dir.as_deref())).collect()
    };
    let dones: Vec<DeviceDone> = results.into_iter().collect::<Result<_>>()?;

    // Stitch per-device rounds back into merged-stream order.
    let mut indexed: Vec<(usize, RoundRecord)> =
        dones.iter().flat_map(|d| d.rounds.iter().cloned()).collect();
    indexed.sort_unstable_by_key(|(i, _)| *i);
    let rounds: Vec<RoundRecord> = indexed.into_iter().map(|(_, r)| r).collect();
    let trace =
        RunTrace { kind: cfg.algo.kind(), k: cfg.k, warmup_days: cfg.warmup_days, rounds };
    let report = compute_metrics(&trace);

    let mut trace_text = String::new();
    for r in &trace.rounds {
        trace_text.push_str(&serde_json::to_string(r).context("serializing round")?);
        trace_text.push('\n');
    }
    write_atomic(&args.out_dir.join("trace.jsonl"), trace_text.as_bytes())?;

    let mut csv = Vec::new();
    write_metrics_csv(&mut csv, &[&report]).context("rendering metrics.csv")?;
    write_atomic(&args.out_dir.join("metrics.csv"), &csv)?;

    if cfg.algo == Algo::Aucpa {
        for done in &dones {
            let Policy::AucPa(model) = &done.policy else { unreachable!() };
            let path = args
                .out_dir
                .join("models")
                .join(format!("{}.json", device_file_stem(&done.device_id)));
            let snap = serde_json::to_string(&model.snapshot())
                .context("serializing model snapshot")?;
            write_atomic(&path, snap.as_bytes())?;
        }
    }

    let echoed = EffectiveConfig {
        algo: cfg.algo.kind().as_str().to_string(),
        k: cfg.k,
        c: (cfg.algo == Algo::Aucpa).then_some(cfg.c),
        lambda: (cfg.algo == Algo::Aucpa).then(|| 1.0 / cfg.c),
        frecency_p: (cfg.algo == Algo::Frecency).then_some(cfg.frecency_p),
        frecency_days: (cfg.algo == Algo::Frecency).then_some(cfg.frecency_days),
        warmup_days: cfg.warmup_days,
        seed: cfg.seed,
        jobs: cfg.jobs,
        snapshot_every: cfg.snapshot_every,
        record_pairs: cfg.record_pairs && cfg.algo == Algo::Aucpa,
        events: args.events.display().to_string(),
        events_sha256,
    };
    let echo_text =
        serde_json::to_string_pretty(&echoed).context("serializing effective config")?;
    write_atomic(&args.out_dir.join("effective_config.json"), echo_text.as_bytes())?;

    print_summary(&echoed, events.len(), &report);
    Ok(())
}

fn print_summary(cfg: &EffectiveConfig, events: usize, report: &MetricsReport) {
    let headline: u64 = report.devices.iter().map(|d| d.rounds_headline).sum();
    let total: u64 = report.devices.iter().map(|d| d.rounds_total).sum();
    println!("algo: {}", cfg.algo);
    println!("events: {events} across {} devices", report.fleet.devices);
    println!("rounds: {total} ({headline} after warm-up)");
    println!("precision: {}", fmt_opt(report.fleet.precision));
    println!("per-app precision: {}", fmt_opt(report.fleet.per_app_precision));
    println!("cumulative AUC: {}", fmt_opt(report.fleet.cumulative_auc));
}

/// A finished run read back from its out-dir.
pub struct LoadedRun {
    pub config: EffectiveConfig,
    pub trace: RunTrace,
}

pub fn load_run(dir: &Path) -> Result<LoadedRun> {
    let config = read_effective_config(dir)?;
    let kind: PredictorKind = config
        .algo
        .parse()
        .map_err(|e: String| anyhow::anyhow!("{}: {e}", dir.display()))?;
    let trace_path = dir.join("trace.jsonl");
    let text = fs::read_to_string(&trace_path)
        .with_context(|| format!("reading {}", trace_path.display()))?;
    let mut rounds = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let r: RoundRecord = serde_json::from_str(line)
            .with_context(|| format!("{}:{}", trace_path.display(), i + 1))?;
        rounds.push(r);
    }
    Ok(LoadedRun {
        trace: RunTrace { kind, k: config.k, warmup_days: config.warmup_days, rounds },
        config,
    })
}
