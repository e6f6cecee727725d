//! Stream replay and the metrics read off it: precision, per-app precision,
//! cumulative AUC, sliding-window series, usage-rank curves, and the online
//! regret bound check.
//!
//! Replay is strictly online: for every second-tier click the predictor is
//! queried with its pre-click state, the hit is recorded, and only then does
//! the click become training data. Home-screen and dock clicks are fed to the
//! predictor as usage evidence but are not prediction rounds.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::event::{AppId, ClickEvent};
use crate::predictors::{PairRecord, Predictor, PredictorKind, SkipReason};
use crate::time::{Timestamp, SECS_PER_DAY};

mod bound;
mod oracle;

pub use bound::{regret_bound_check, BoundError, BoundReport, Comparator};
pub use oracle::OraclePredictor;

/// Windows with fewer rounds than this are flagged low-support.
pub const LOW_SUPPORT_ROUNDS: u64 = 10;
/// Default sliding window span: one week.
pub const WINDOW_SECS: i64 = 7 * SECS_PER_DAY;
/// Default sliding window step: one day.
pub const WINDOW_STEP_SECS: i64 = SECS_PER_DAY;

/// One prediction round: a second-tier click scored against the predictor's
/// pre-click state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub device_id: String,
    /// 0-based round index within the device.
    pub idx: u64,
    pub ts: Timestamp,
    pub clicked: AppId,
    pub predicted: Vec<AppId>,
    /// clicked ∈ predicted.
    pub hit: bool,
    /// Inside the device's warm-up span; excluded from headline metrics.
    pub warmup: bool,
    pub loss: f64,
    pub tau: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub auc_indicator: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub skipped: Option<SkipReason>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub pair: Option<PairRecord>,
}

/// A full replay: every round, in stream order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub kind: PredictorKind,
    pub k: usize,
    pub warmup_days: u32,
    pub rounds: Vec<RoundRecord>,
}

impl RunTrace {
    /// Rounds grouped per device, stream order preserved.
    pub fn by_device(&self) -> BTreeMap<&str, Vec<&RoundRecord>> {
        let mut map: BTreeMap<&str, Vec<&RoundRecord>> = BTreeMap::new();
        for r in &self.rounds {
            map.entry(r.device_id.as_str()).or_default().push(r);
        }
        map
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplayConfig {
    pub k: usize,
    /// Days from each device's first event excluded from headline metrics.
    pub warmup_days: u32,
}

impl Default for ReplayConfig {
    fn default() -> Self {
        Self { k: 4, warmup_days: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReplayError {
    /// Event `index` moved backwards in time for `device_id`.
    OutOfOrder { index: usize, device_id: String },
}

impl fmt::Display for ReplayError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReplayError::OutOfOrder { index, device_id } => {
                write!(f, "event {index} precedes an earlier event for device {device_id}")
            }
        }
    }
}

impl std::error::Error for ReplayError {}

/// Serializable progress of one device's replay, everything but the
/// predictor itself. Together with a predictor snapshot this resumes a run
/// mid-stream with no drift from an uninterrupted one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayState {
    pub device_id: String,
    /// Events fed so far, both tiers; a resumed run skips this many.
    pub events_seen: u64,
    /// Second-tier apps seen so far, sorted; the candidate set.
    pub candidates: Vec<AppId>,
    pub first_ts: Option<i64>,
    pub last_ts: i64,
    pub rounds_emitted: u64,
}

impl ReplayState {
    fn fresh(device_id: &str) -> Self {
        Self {
            device_id: device_id.to_string(),
            events_seen: 0,
            candidates: Vec::new(),
            first_ts: None,
            last_ts: i64::MIN,
            rounds_emitted: 0,
        }
    }
}

/// One device's online replay loop: feed events in order, collect rounds.
pub struct DeviceReplay<P> {
    predictor: P,
    state: ReplayState,
    k: usize,
    warmup_days: u32,
}

impl<P: Predictor> DeviceReplay<P> {
    pub fn new(device_id: &str, cfg: &ReplayConfig, predictor: P) -> Self {
        Self::resume(ReplayState::fresh(device_id), cfg, predictor)
    }

    /// Continues from a saved state; the predictor must be restored to the
    /// matching point.
    pub fn resume(state: ReplayState, cfg: &ReplayConfig, predictor: P) -> Self {
        Self { predictor, state, k: cfg.k, warmup_days: cfg.warmup_days }
    }

    pub fn state(&self) -> &ReplayState {
        &self.state
    }

    pub fn predictor(&self) -> &P {
        &self.predictor
    }

    pub fn into_parts(self) -> (ReplayState, P) {
        (self.state, self.predictor)
    }

    /// Feeds one event. Second-tier clicks produce a round; `index` is the
    /// event's position in the surrounding stream, used in error reports.
    pub fn step(&mut self, index: usize, ev: &ClickEvent) -> Result<Option<RoundRecord>, ReplayError> {
        debug_assert_eq!(ev.device_id, self.state.device_id);
        let ts = ev.ctx.ts.seconds;
        if self.state.first_ts.is_none() {
            self.state.first_ts = Some(ts);
            self.state.last_ts = ts;
        }
        if ts < self.state.last_ts {
            return Err(ReplayError::OutOfOrder { index, device_id: ev.device_id.clone() });
        }
        self.state.last_ts = ts;
        self.state.events_seen += 1;

        if ev.slot.is_first_tier() {
            self.predictor.observe(ev);
            return Ok(None);
        }

        let prediction = self.predictor.predict(&ev.ctx, &self.state.candidates, self.k);
        let hit = prediction.contains(&ev.app);
        let report = self.predictor.observe(ev);
        if let Err(pos) = self.state.candidates.binary_search(&ev.app) {
            self.state.candidates.insert(pos, ev.app.clone());
        }

        let warmup = ts
            < self.state.first_ts.unwrap() + i64::from(self.warmup_days) * SECS_PER_DAY;
        let record = RoundRecord {
            device_id: ev.device_id.clone(),
            idx: self.state.rounds_emitted,
            ts: ev.ctx.ts,
            clicked: ev.app.clone(),
            predicted: prediction.apps().cloned().collect(),
            hit,
            warmup,
            loss: report.loss,
            tau: report.tau,
            auc_indicator: report.auc_indicator,
            skipped: report.skipped,
            pair: report.pair,
        };
        self.state.rounds_emitted += 1;
        Ok(Some(record))
    }
}

/// A finished replay: the trace plus each device's final predictor state,
/// for snapshotting or plugging final weights into the bound.
pub struct ReplayOutcome<P> {
    pub trace: RunTrace,
    pub predictors: BTreeMap<String, P>,
}

impl<P> fmt::Debug for ReplayOutcome<P> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ReplayOutcome")
            .field("trace", &self.trace)
            .field("devices", &self.predictors.len())
            .finish()
    }
}

/// Replays `events` through one predictor per device, built by `make`.
///
/// Events must be non-decreasing in time within each device; interleaving
/// across devices is fine. An empty stream still probes `make` once (empty
/// device id) so the trace can carry the predictor kind.
pub fn replay<P, F>(
    events: &[ClickEvent],
    cfg: &ReplayConfig,
    mut make: F,
) -> Result<ReplayOutcome<P>, ReplayError>
where
    P: Predictor,
    F: FnMut(&str) -> P,
{
    let mut devices: BTreeMap<String, DeviceReplay<P>> = BTreeMap::new();
    let mut rounds = Vec::new();
    let mut kind = None;

    for (index, ev) in events.iter().enumerate() {
        let device = devices
            .entry(ev.device_id.clone())
            .or_insert_with(|| DeviceReplay::new(&ev.device_id, cfg, make(&ev.device_id)));
        if kind.is_none() {
            kind = Some(device.predictor.kind());
        }
        if let Some(record) = device.step(index, ev)? {
            rounds.push(record);
        }
    }

    let kind = kind.unwrap_or_else(|| make("").kind());
    let predictors =
        devices.into_iter().map(|(id, d)| (id, d.into_parts().1)).collect();
    Ok(ReplayOutcome {
        trace: RunTrace { kind, k: cfg.k, warmup_days: cfg.warmup_days, rounds },
        predictors,
    })
}

/// Mean hit rate. Empty input → None.
pub fn precision<'a, I>(rounds: I) -> Option<f64>
where
    I: IntoIterator<Item = &'a RoundRecord>,
{
    let (mut n, mut hits) = (0u64, 0u64);
    for r in rounds {
        n += 1;
        hits += u64::from(r.hit);
    }
    (n > 0).then(|| hits as f64 / n as f64)
}

/// Hit rate per (device, clicked app) group, averaged unweighted across
/// groups. Call sites feed it one device at a time, matching the per-device,
/// per-app averaging order.
pub fn per_app_precision<'a, I>(rounds: I) -> Option<f64>
where
    I: IntoIterator<Item = &'a RoundRecord>,
{
    let mut groups: BTreeMap<(&str, &AppId), (u64, u64)> = BTreeMap::new();
    for r in rounds {
        let slot = groups.entry((r.device_id.as_str(), &r.clicked)).or_insert((0, 0));
        slot.0 += 1;
        slot.1 += u64::from(r.hit);
    }
    if groups.is_empty() {
        return None;
    }
    let sum: f64 = groups.values().map(|(n, h)| *h as f64 / *n as f64).sum();
    Some(sum / groups.len() as f64)
}

/// Mean of the AUC indicator over rounds that formed a pair. Rounds with no
/// pair (skips, baselines) are excluded; none at all → None.
pub fn cumulative_auc<'a, I>(rounds: I) -> Option<f64>
where
    I: IntoIterator<Item = &'a RoundRecord>,
{
    let (mut n, mut ordered) = (0u64, 0u64);
    for r in rounds {
        if let Some(ind) = r.auc_indicator {
            n += 1;
            ordered += u64::from(ind);
        }
    }
    (n > 0).then(|| ordered as f64 / n as f64)
}

/// One sliding-window sample for one device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowPoint {
    /// UTC second at the window's midpoint.
    pub center_seconds: i64,
    pub rounds: u64,
    pub low_support: bool,
    pub precision: Option<f64>,
    pub per_app_precision: Option<f64>,
}

/// Windowed series for one device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSeries {
    pub device_id: String,
    pub points: Vec<WindowPoint>,
}

/// Tiles `[t0 + i·step, t0 + i·step + window)` over one device's rounds
/// (time-sorted), starting at its first round. With `step == window` the
/// windows partition the stream, so per-window counts re-sum to totals.
/// Warm-up rounds are included: the series exists to show the ramp.
pub fn sliding_window(rounds: &[&RoundRecord], window_secs: i64, step_secs: i64) -> Vec<WindowPoint> {
    assert!(window_secs > 0 && step_secs > 0, "window and step must be positive");
    let Some(first) = rounds.first() else {
        return Vec::new();
    };
    let t0 = first.ts.seconds;
    let t_end = rounds.last().unwrap().ts.seconds;
    let mut points = Vec::new();
    let mut i = 0i64;
    while t0 + i * step_secs <= t_end {
        let start = t0 + i * step_secs;
        let end = start + window_secs;
        let lo = rounds.partition_point(|r| r.ts.seconds < start);
        let hi = rounds.partition_point(|r| r.ts.seconds < end);
        let slice = &rounds[lo..hi];
        let n = slice.len() as u64;
        points.push(WindowPoint {
            center_seconds: start + window_secs / 2,
            rounds: n,
            low_support: n < LOW_SUPPORT_ROUNDS,
            precision: precision(slice.iter().copied()),
            per_app_precision: per_app_precision(slice.iter().copied()),
        });
        i += 1;
    }
    points
}

/// Precision at one usage rank, macro-averaged over the devices that have
/// rounds at that rank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankPoint {
    /// 0 = the device's most clicked app.
    pub rank: usize,
    pub precision: f64,
    /// Post-warm-up rounds at this rank, summed over devices.
    pub support: u64,
    pub devices: u64,
}

/// Rank of each app a device clicked, by total rounds over the full stream:
/// 0 = most used, ties broken lexically.
fn app_ranks<'a>(rounds: &[&'a RoundRecord]) -> BTreeMap<&'a AppId, usize> {
    let mut counts: BTreeMap<&AppId, u64> = BTreeMap::new();
    for r in rounds {
        *counts.entry(&r.clicked).or_default() += 1;
    }
    let mut order: Vec<(&AppId, u64)> = counts.into_iter().collect();
    order.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    order.into_iter().enumerate().map(|(rank, (app, _))| (app, rank)).collect()
}

/// Usage-rank curve: each device ranks its apps by total rounds over the full
/// stream (rank 0 = most used, ties broken lexically), then per-rank hit
/// rates over post-warm-up rounds are averaged across devices.
pub fn usage_rank_curve(rounds: &[RoundRecord]) -> Vec<RankPoint> {
    let mut by_device: BTreeMap<&str, Vec<&RoundRecord>> = BTreeMap::new();
    for r in rounds {
        by_device.entry(r.device_id.as_str()).or_default().push(r);
    }

    // rank → (Σ per-device precision, devices, Σ support)
    let mut merged: BTreeMap<usize, (f64, u64, u64)> = BTreeMap::new();
    for rounds in by_device.values() {
        let rank_of = app_ranks(rounds);
        let mut stats: BTreeMap<usize, (u64, u64)> = BTreeMap::new();
        for r in rounds.iter().filter(|r| !r.warmup) {
            let slot = stats.entry(rank_of[&r.clicked]).or_insert((0, 0));
            slot.0 += 1;
            slot.1 += u64::from(r.hit);
        }
        for (rank, (n, hits)) in stats {
            let slot = merged.entry(rank).or_insert((0.0, 0, 0));
            slot.0 += hits as f64 / n as f64;
            slot.1 += 1;
            slot.2 += n;
        }
    }

    merged
        .into_iter()
        .map(|(rank, (sum, devices, support))| RankPoint {
            rank,
            precision: sum / devices as f64,
            support,
            devices,
        })
        .collect()
}

/// Hit rate over post-warm-up rounds whose clicked app sits in the given
/// usage-rank band, pooled within each device and then macro-averaged across
/// the devices that have any such rounds.
pub fn pooled_rank_precision(
    rounds: &[RoundRecord],
    ranks: std::ops::RangeInclusive<usize>,
) -> Option<f64> {
    let mut by_device: BTreeMap<&str, Vec<&RoundRecord>> = BTreeMap::new();
    for r in rounds {
        by_device.entry(r.device_id.as_str()).or_default().push(r);
    }
    let mut sum = 0.0;
    let mut devices = 0u64;
    for rounds in by_device.values() {
        let rank_of = app_ranks(rounds);
        let (mut n, mut hits) = (0u64, 0u64);
        for r in rounds.iter().filter(|r| !r.warmup) {
            if ranks.contains(&rank_of[&r.clicked]) {
                n += 1;
                hits += u64::from(r.hit);
            }
        }
        if n > 0 {
            sum += hits as f64 / n as f64;
            devices += 1;
        }
    }
    (devices > 0).then(|| sum / devices as f64)
}

/// Headline (post-warm-up) and full-stream metrics for one device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceMetrics {
    pub device_id: String,
    pub rounds_total: u64,
    pub rounds_headline: u64,
    pub precision: Option<f64>,
    pub per_app_precision: Option<f64>,
    pub cumulative_auc: Option<f64>,
    pub precision_full: Option<f64>,
    pub per_app_precision_full: Option<f64>,
    pub cumulative_auc_full: Option<f64>,
}

/// Unweighted means across devices (macro-averaged, missing values skipped).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FleetMetrics {
    pub devices: u64,
    pub precision: Option<f64>,
    pub per_app_precision: Option<f64>,
    pub cumulative_auc: Option<f64>,
    pub precision_full: Option<f64>,
    pub per_app_precision_full: Option<f64>,
    pub cumulative_auc_full: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub kind: PredictorKind,
    pub k: usize,
    pub warmup_days: u32,
    pub devices: Vec<DeviceMetrics>,
    pub fleet: FleetMetrics,
    pub windows: Vec<WindowSeries>,
    pub usage_rank_curve: Vec<RankPoint>,
}

fn macro_mean<I: IntoIterator<Item = Option<f64>>>(values: I) -> Option<f64> {
    let (mut n, mut sum) = (0u64, 0.0);
    for v in values.into_iter().flatten() {
        n += 1;
        sum += v;
    }
    (n > 0).then(|| sum / n as f64)
}

/// Every metric the replay supports, over one trace.
pub fn compute_metrics(trace: &RunTrace) -> MetricsReport {
    let by_device = trace.by_device();
    let mut devices = Vec::with_capacity(by_device.len());
    let mut windows = Vec::with_capacity(by_device.len());

    for (device_id, rounds) in &by_device {
        let headline: Vec<&RoundRecord> =
            rounds.iter().copied().filter(|r| !r.warmup).collect();
        devices.push(DeviceMetrics {
            device_id: (*device_id).to_string(),
            rounds_total: rounds.len() as u64,
            rounds_headline: headline.len() as u64,
            precision: precision(headline.iter().copied()),
            per_app_precision: per_app_precision(headline.iter().copied()),
            cumulative_auc: cumulative_auc(headline.iter().copied()),
            precision_full: precision(rounds.iter().copied()),
            per_app_precision_full: per_app_precision(rounds.iter().copied()),
            cumulative_auc_full: cumulative_auc(rounds.iter().copied()),
        });
        windows.push(WindowSeries {
            device_id: (*device_id).to_string(),
            points: sliding_window(rounds, WINDOW_SECS, WINDOW_STEP_SECS),
        });
    }

    let fleet = FleetMetrics {
        devices: devices.len() as u64,
        precision: macro_mean(devices.iter().map(|d| d.precision)),
        per_app_precision: macro_mean(devices.iter().map(|d| d.per_app_precision)),
        cumulative_auc: macro_mean(devices.iter().map(|d| d.cumulative_auc)),
        precision_full: macro_mean(devices.iter().map(|d| d.precision_full)),
        per_app_precision_full: macro_mean(devices.iter().map(|d| d.per_app_precision_full)),
        cumulative_auc_full: macro_mean(devices.iter().map(|d| d.cumulative_auc_full)),
    };

    MetricsReport {
        kind: trace.kind,
        k: trace.k,
        warmup_days: trace.warmup_days,
        devices,
        fleet,
        windows,
        usage_rank_curve: usage_rank_curve(&trace.rounds),
    }
}

fn write_metric(
    out: &mut impl Write,
    device: &str,
    algo: &str,
    metric: &str,
    value: Option<f64>,
) -> io::Result<()> {
    if let Some(v) = value {
        writeln!(out, "{device},{algo},{metric},{v}")?;
    }
    Ok(())
}

/// `device,algorithm,metric,value` rows; fleet aggregates use device `fleet`.
pub fn write_metrics_csv(mut out: impl Write, reports: &[&MetricsReport]) -> io::Result<()> {
    writeln!(out, "device,algorithm,metric,value")?;
    for report in reports {
        let algo = report.kind.as_str();
        for d in &report.devices {
            writeln!(out, "{},{algo},rounds_total,{}", d.device_id, d.rounds_total)?;
            writeln!(out, "{},{algo},rounds_headline,{}", d.device_id, d.rounds_headline)?;
            write_metric(&mut out, &d.device_id, algo, "precision", d.precision)?;
            write_metric(&mut out, &d.device_id, algo, "per_app_precision", d.per_app_precision)?;
            write_metric(&mut out, &d.device_id, algo, "cumulative_auc", d.cumulative_auc)?;
            write_metric(&mut out, &d.device_id, algo, "precision_full", d.precision_full)?;
            write_metric(
                &mut out,
                &d.device_id,
                algo,
                "per_app_precision_full",
                d.per_app_precision_full,
            )?;
            write_metric(&mut out, &d.device_id, algo, "cumulative_auc_full", d.cumulative_auc_full)?;
        }
        let f = &report.fleet;
        writeln!(out, "fleet,{algo},devices,{}", f.devices)?;
        write_metric(&mut out, "fleet", algo, "precision", f.precision)?;
        write_metric(&mut out, "fleet", algo, "per_app_precision", f.per_app_precision)?;
        write_metric(&mut out, "fleet", algo, "cumulative_auc", f.cumulative_auc)?;
        write_metric(&mut out, "fleet", algo, "precision_full", f.precision_full)?;
        write_metric(&mut out, "fleet", algo, "per_app_precision_full", f.per_app_precision_full)?;
        write_metric(&mut out, "fleet", algo, "cumulative_auc_full", f.cumulative_auc_full)?;
    }
    Ok(())
}

/// One row per device × window; empty metric cells when a window has no rounds.
pub fn write_windows_csv(mut out: impl Write, reports: &[&MetricsReport]) -> io::Result<()> {
    writeln!(out, "device,algorithm,center_seconds,rounds,low_support,precision,per_app_precision")?;
    for report in reports {
        let algo = report.kind.as_str();
        for series in &report.windows {
            for p in &series.points {
                let prec = p.precision.map(|v| v.to_string()).unwrap_or_default();
                let pap = p.per_app_precision.map(|v| v.to_string()).unwrap_or_default();
                writeln!(
                    out,
                    "{},{algo},{},{},{},{prec},{pap}",
                    series.device_id, p.center_seconds, p.rounds, p.low_support
                )?;
            }
        }
    }
    Ok(())
}

/// One row per algorithm × usage rank.
pub fn write_ranks_csv(mut out: impl Write, reports: &[&MetricsReport]) -> io::Result<()> {
    writeln!(out, "algorithm,rank,precision,support,devices")?;
    for report in reports {
        let algo = report.kind.as_str();
        for p in &report.usage_rank_curve {
            writeln!(out, "{algo},{},{},{},{}", p.rank, p.precision, p.support, p.devices)?;
        }
    }
    Ok(())
}
