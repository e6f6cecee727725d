//! Feature extraction: the 151-dimensional contextual vector ψ(x) and the
//! 9-dimensional app-dependent vector φ(x,a).
//!
//! The ψ index layout is frozen and documented in FEATURES.md; changing it
//! invalidates saved models.

pub mod appfeat;
pub mod frecency;
pub mod hashing;
pub mod history;
pub mod locations;

use serde::{Deserialize, Serialize};

use crate::event::{AppId, ContextSnapshot, SignalKind};

pub use appfeat::{app_features, AppFeatureVector, D_PHI};
pub use hashing::{bucket32, DEFAULT_HASH_SEED, HASH_BUCKETS};
pub use history::{AppHistories, AppHistory};
pub use locations::{KnownLocationStore, LocationState};

// ψ layout. Hashed blocks are HASH_BUCKETS (32) wide.
pub const HOUR_START: u32 = 0; // 24 one-hot
pub const DOW_START: u32 = 24; // 7 one-hot, Monday first
pub const POD_START: u32 = 31; // 6 one-hot parts of day
pub const WEEKEND: u32 = 37;
pub const LOC_ID_START: u32 = 38; // 32 hashed one-hot
pub const LOC_KNOWN: u32 = 70;
pub const LOC_JUST_ENTERED: u32 = 71;
pub const LOC_JUST_LEFT: u32 = 72;
pub const HP_CONN: u32 = 73;
pub const HP_JUST_CONN: u32 = 74;
pub const HP_JUST_DISC: u32 = 75;
pub const WIFI_CONN: u32 = 76;
pub const WIFI_SSID_START: u32 = 77; // 32 hashed one-hot
pub const WIFI_JUST_CONN: u32 = 109;
pub const WIFI_JUST_DISC: u32 = 110;
pub const BT_CONN: u32 = 111;
pub const BT_ID_START: u32 = 112; // 32 hashed one-hot
pub const BT_JUST_CONN: u32 = 144;
pub const BT_JUST_DISC: u32 = 145;
pub const FRECENT_START: u32 = 146; // 5 scores
pub const D_PSI: usize = 151;

/// Knobs for feature extraction. Defaults reproduce the published setup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureParams {
    pub hash_seed: u64,
    /// Local weekdays counted as weekend, Monday = 0. Country-specific.
    pub weekend_days: Vec<u32>,
    pub frecency_p: f64,
    pub frecency_window_days: f64,
    pub history_time_cap: usize,
    pub history_geo_cap: usize,
}

impl Default for FeatureParams {
    fn default() -> Self {
        Self {
            hash_seed: DEFAULT_HASH_SEED,
            weekend_days: vec![5, 6],
            frecency_p: frecency::DEFAULT_P,
            frecency_window_days: frecency::DEFAULT_WINDOW_DAYS,
            history_time_cap: history::DEFAULT_TIME_CAP,
            history_geo_cap: history::DEFAULT_GEO_CAP,
        }
    }
}

/// Sparse vector with strictly increasing indices. ψ(x) has at most ~15
/// nonzeros out of 151, so sparse dot products carry the hot loop.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseVec {
    idx: Vec<u32>,
    val: Vec<f64>,
}

impl SparseVec {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a coordinate; indices must arrive in strictly increasing
    /// order and values must be finite.
    pub fn push(&mut self, idx: u32, val: f64) {
        debug_assert!(self.idx.last().map_or(true, |last| *last < idx), "indices out of order");
        debug_assert!(val.is_finite());
        self.idx.push(idx);
        self.val.push(val);
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (u32, f64)>) -> Self {
        let mut v = Self::new();
        for (i, x) in pairs {
            v.push(i, x);
        }
        v
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.idx.iter().copied().zip(self.val.iter().copied())
    }

    pub fn len(&self) -> usize {
        self.idx.len()
    }

    pub fn is_empty(&self) -> bool {
        self.idx.is_empty()
    }

    /// Coordinate lookup, 0 when absent.
    pub fn get(&self, idx: u32) -> f64 {
        match self.idx.binary_search(&idx) {
            Ok(pos) => self.val[pos],
            Err(_) => 0.0,
        }
    }

    pub fn dot_dense(&self, dense: &[f64]) -> f64 {
        let mut sum = 0.0;
        for (i, v) in self.iter() {
            sum += dense[i as usize] * v;
        }
        sum
    }

    pub fn norm_sq(&self) -> f64 {
        self.val.iter().map(|v| v * v).sum()
    }

    /// dense += scale · self
    pub fn add_scaled_into(&self, scale: f64, dense: &mut [f64]) {
        for (i, v) in self.iter() {
            dense[i as usize] += scale * v;
        }
    }
}

/// decay(t) = 10^(−t/15) for t in minutes, clamped to t ≥ 0.
pub fn decay(minutes: f64) -> f64 {
    10f64.powf(-minutes.max(0.0) / 15.0)
}

/// Part-of-day bucket for a local hour: dawn 04–07, morning 07–12,
/// noon 12–14, afternoon 14–18, evening 18–22, night 22–04.
pub fn part_of_day(hour: u32) -> u32 {
    match hour {
        4..=6 => 0,
        7..=11 => 1,
        12..=13 => 2,
        14..=17 => 3,
        18..=21 => 4,
        _ => 5,
    }
}

fn push_decay(out: &mut SparseVec, idx: u32, minutes: Option<f64>) {
    if let Some(m) = minutes {
        let v = decay(m);
        if v > 0.0 {
            out.push(idx, v);
        }
    }
}

/// Builds ψ(x). `loc` must describe the store's verdict for exactly this
/// context (`KnownLocationStore::state_for`), and `frecent5` the current
/// 1-hour frecency top-5.
pub fn contextual_features(
    ctx: &ContextSnapshot,
    loc: &LocationState,
    frecent5: &[(AppId, f64)],
    params: &FeatureParams,
) -> SparseVec {
    let mut psi = SparseVec::new();
    let hour = ctx.ts.local_hour();
    let dow = ctx.ts.local_weekday();
    psi.push(HOUR_START + hour, 1.0);
    psi.push(DOW_START + dow, 1.0);
    psi.push(POD_START + part_of_day(hour), 1.0);
    if params.weekend_days.contains(&dow) {
        psi.push(WEEKEND, 1.0);
    }

    if loc.is_known {
        if let Some(id) = loc.cluster_id {
            psi.push(LOC_ID_START + bucket32(&format!("loc:{id}"), params.hash_seed), 1.0);
        }
        psi.push(LOC_KNOWN, 1.0);
    }
    let entered = loc
        .entered
        .map(|t| ctx.ts.seconds_since(t).max(0) as f64 / 60.0)
        .or_else(|| ctx.minutes_since_change(SignalKind::LocationEntry));
    if loc.is_known {
        push_decay(&mut psi, LOC_JUST_ENTERED, entered);
    }
    let left = loc
        .prev_known_left
        .map(|t| ctx.ts.seconds_since(t).max(0) as f64 / 60.0)
        .or_else(|| ctx.minutes_since_change(SignalKind::LocationExit));
    push_decay(&mut psi, LOC_JUST_LEFT, left);

    let hp_change = ctx.minutes_since_change(SignalKind::Headphones);
    if ctx.headphones {
        psi.push(HP_CONN, 1.0);
        push_decay(&mut psi, HP_JUST_CONN, hp_change);
    } else {
        push_decay(&mut psi, HP_JUST_DISC, hp_change);
    }

    let wifi_change = ctx.minutes_since_change(SignalKind::Wifi);
    if ctx.wifi_connected {
        psi.push(WIFI_CONN, 1.0);
        if let Some(ssid) = &ctx.wifi_ssid {
            psi.push(WIFI_SSID_START + bucket32(&format!("ssid:{ssid}"), params.hash_seed), 1.0);
        }
        push_decay(&mut psi, WIFI_JUST_CONN, wifi_change);
    } else {
        push_decay(&mut psi, WIFI_JUST_DISC, wifi_change);
    }

    let bt_change = ctx.minutes_since_change(SignalKind::Bt);
    if ctx.bt_connected {
        psi.push(BT_CONN, 1.0);
        if let Some(id) = &ctx.bt_id {
            psi.push(BT_ID_START + bucket32(&format!("bt:{id}"), params.hash_seed), 1.0);
        }
        push_decay(&mut psi, BT_JUST_CONN, bt_change);
    } else {
        push_decay(&mut psi, BT_JUST_DISC, bt_change);
    }

    for (i, (_, score)) in frecent5.iter().take(5).enumerate() {
        if *score > 0.0 {
            psi.push(FRECENT_START + i as u32, *score);
        }
    }
    psi
}
