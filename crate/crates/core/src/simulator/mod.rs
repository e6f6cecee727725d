//! Seeded synthetic click-stream generator. Each device gets a persona:
//! installed apps with a stationary popularity base, a handful of
//! context-bound habits, anchor locations with a weekly timetable, and
//! episodic demand spikes. Streams are pure functions of (persona, seed).

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::event::{AppId, ClickEvent, ContextSnapshot, SignalKind, Slot};
use crate::features::hashing::fnv1a64;
use crate::geo::{offset_m, GeoPoint};
use crate::time::{Timestamp, SECS_PER_DAY, SECS_PER_HOUR, TZ_OFFSET_MAX, TZ_OFFSET_MIN};

/// Stream epoch: 2021-03-01 00:00 UTC, a Monday, so local day d has
/// weekday d mod 7 once midnights are aligned to the device timezone.
pub const STREAM_EPOCH: i64 = 1_614_556_800;

/// Relative click volume per local hour of day.
const HOURLY_ACTIVITY: [f64; 24] = [
    0.15, 0.08, 0.05, 0.04, 0.05, 0.12, 0.50, 1.20, 1.60, 1.30, 1.20, 1.30,
    1.50, 1.30, 1.20, 1.25, 1.40, 1.70, 2.00, 2.10, 1.90, 1.50, 0.90, 0.40,
];

const CATALOG_SIZE: usize = 240;
const HOME_SLOT_SHARE: f64 = 0.35;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trigger {
    Headphones,
    Wifi,
    Bt,
}

/// A recurring context-bound usage boost: inside the window (and with the
/// anchor/trigger satisfied, when present) the app's draw weight is
/// multiplied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HabitRule {
    pub app: AppId,
    /// Local weekdays, Monday = 0.
    pub days: BTreeSet<u8>,
    /// Local hour window, start inclusive, end exclusive.
    pub hour_start: u32,
    pub hour_end: u32,
    /// Index into the persona's anchor list.
    pub anchor: Option<usize>,
    pub anchor_radius_m: Option<f64>,
    pub trigger: Option<Trigger>,
    pub multiplier: f64,
}

impl HabitRule {
    pub fn window_contains(&self, weekday: u8, hour: u32) -> bool {
        self.days.contains(&weekday) && hour >= self.hour_start && hour < self.hour_end
    }

    fn active(&self, weekday: u8, hour: u32, anchor: Option<usize>, state: &HourState) -> bool {
        if !self.window_contains(weekday, hour) {
            return false;
        }
        if let Some(a) = self.anchor {
            if anchor != Some(a) {
                return false;
            }
        }
        match self.trigger {
            None => true,
            Some(Trigger::Headphones) => state.headphones,
            Some(Trigger::Wifi) => state.wifi.is_some(),
            Some(Trigger::Bt) => state.bt.is_some(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Persona {
    pub device_id: String,
    /// Role layout by position, with h = |home_screen_set|: [0,h) home
    /// screen, [h,h+3) strong tray head, h+3 soft fourth head, [h+4,h+7)
    /// daily-habit targets, h+7 the weekly-habit target, rest long tail
    /// (with burst apps at h+11.. and risers at h+18..).
    pub installed: Vec<AppId>,
    pub home_screen_set: Vec<AppId>,
    pub habits: Vec<HabitRule>,
    /// Stationary habit-free click probability per installed app (same
    /// order); sums to 1. Home and tray shares are 0.35 / 0.65.
    pub base_popularity: Vec<f64>,
    pub zipf_exponent: f64,
    /// Anchor 0 is home, 1 is work; later entries are errand spots.
    pub locations: Vec<GeoPoint>,
    /// 7×24 local-hour timetable of anchor indices; None = in transit.
    pub schedule: Vec<Option<u8>>,
    /// Mean clicks per day.
    pub daily_rate: f64,
    pub tz_offset_minutes: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Clicks-per-day mean is drawn uniformly from this range.
    pub daily_rate_min: f64,
    pub daily_rate_max: f64,
    /// Fraction of clicks landing on home-screen/dock shortcuts.
    pub first_tier_prob: f64,
    /// Probability a click carries no location fix.
    pub geo_missing_prob: f64,
    /// Installed-app count range; the uniform midpoint is the fleet mean.
    pub installed_min: usize,
    pub installed_max: usize,
    /// Episodic-spike apps per device.
    pub burst_apps: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            daily_rate_min: 26.0,
            daily_rate_max: 32.0,
            first_tier_prob: HOME_SLOT_SHARE,
            geo_missing_prob: 0.07,
            installed_min: 48,
            installed_max: 72,
            burst_apps: 6,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("config out of range: {0}")]
    Config(String),
}

impl SimConfig {
    fn validate(&self) -> Result<(), SimError> {
        if self.installed_min < 20 || self.installed_max > 120 || self.installed_min > self.installed_max {
            return Err(SimError::Config(format!(
                "installed range {}..={} outside 20..=120",
                self.installed_min, self.installed_max
            )));
        }
        if !(0.0..=1.0).contains(&self.first_tier_prob) || !(0.0..=1.0).contains(&self.geo_missing_prob) {
            return Err(SimError::Config("probabilities must lie in [0,1]".into()));
        }
        if self.daily_rate_min <= 0.0 || self.daily_rate_min > self.daily_rate_max {
            return Err(SimError::Config("daily rate range is empty".into()));
        }
        Ok(())
    }
}

fn catalog_app(i: usize) -> AppId {
    AppId::new(format!("app{i:03}"))
}

/// First long-tail position, after home screen, head, and habit targets.
fn tail_start(home_n: usize) -> usize {
    home_n + 8
}

pub fn generate_persona(device_id: &str, seed: u64, cfg: &SimConfig) -> Result<Persona, SimError> {
    cfg.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);

    let n = rng.gen_range(cfg.installed_min..=cfg.installed_max);
    let mut pool: Vec<usize> = (0..CATALOG_SIZE).collect();
    pool.shuffle(&mut rng);
    let installed: Vec<AppId> = pool[..n].iter().map(|i| catalog_app(*i)).collect();

    let home_n = rng.gen_range(4..=6usize);
    let home_screen_set: Vec<AppId> = installed[..home_n].to_vec();
    let daily0 = home_n + 4;
    let weekly_idx = home_n + 7;

    // Anchors: home, work, then 0-3 errand spots.
    let lat = rng.gen_range(25.0..60.0) * if rng.gen_bool(0.2) { -1.0 } else { 1.0 };
    let lon = rng.gen_range(-125.0..135.0);
    let home = GeoPoint::new(lat, lon);
    let bearing = rng.gen_range(0.0..std::f64::consts::TAU);
    let dist = rng.gen_range(2_000.0..9_000.0);
    let work = offset_m(home, dist * bearing.cos(), dist * bearing.sin());
    let extras = *[0usize, 1, 1, 2, 2, 2, 3, 3].choose(&mut rng).unwrap();
    let mut locations = vec![home, work];
    for _ in 0..extras {
        let b = rng.gen_range(0.0..std::f64::consts::TAU);
        let d = rng.gen_range(600.0..6_000.0);
        locations.push(offset_m(home, d * b.cos(), d * b.sin()));
    }
    let tz_offset_minutes =
        (((lon / 15.0).round() as i32) * 60).clamp(TZ_OFFSET_MIN, TZ_OFFSET_MAX);

    // Weekly timetable.
    let work_start = rng.gen_range(8..=10u32);
    let work_end = work_start + 8;
    let market: Option<u8> = (locations.len() > 2).then_some(2);
    let outing: Option<u8> = (locations.len() > 3).then_some(3);
    let mut schedule: Vec<Option<u8>> = vec![Some(0); 7 * 24];
    for dow in 0..7u32 {
        for hour in 0..24u32 {
            let slot = &mut schedule[(dow * 24 + hour) as usize];
            if dow < 5 {
                if hour == work_start - 1 || hour == work_end {
                    *slot = None; // commuting
                } else if hour >= work_start && hour < work_end {
                    *slot = Some(1);
                }
            } else if dow == 5 {
                if (8..11).contains(&hour) {
                    *slot = market.or(Some(0));
                } else if (14..17).contains(&hour) {
                    *slot = outing;
                }
            } else if (14..17).contains(&hour) {
                *slot = None; // Sunday outing, off the map
            }
        }
    }

    // Habits: breakfast and evening rituals daily, a podcast on the
    // headphone commute, errands on Saturday morning.
    let wake = rng.gen_range(6..=7u32);
    let all_week: BTreeSet<u8> = (0..7).collect();
    let workdays: BTreeSet<u8> = (0..5).collect();
    let habits = vec![
        HabitRule {
            app: installed[daily0].clone(),
            days: all_week.clone(),
            hour_start: wake,
            hour_end: wake + 2,
            anchor: None,
            anchor_radius_m: None,
            trigger: None,
            multiplier: rng.gen_range(26.0..36.0),
        },
        HabitRule {
            app: installed[daily0 + 1].clone(),
            days: workdays,
            hour_start: work_start - 1,
            hour_end: work_start + 1,
            anchor: None,
            anchor_radius_m: None,
            trigger: Some(Trigger::Headphones),
            multiplier: rng.gen_range(26.0..36.0),
        },
        HabitRule {
            app: installed[daily0 + 2].clone(),
            days: all_week,
            hour_start: 19,
            hour_end: 22,
            anchor: Some(0),
            anchor_radius_m: Some(150.0),
            trigger: Some(Trigger::Wifi),
            multiplier: rng.gen_range(26.0..36.0),
        },
        HabitRule {
            app: installed[weekly_idx].clone(),
            days: [5u8].into_iter().collect(),
            hour_start: 8,
            hour_end: 11,
            anchor: market.map(|m| m as usize),
            anchor_radius_m: market.map(|_| 150.0),
            trigger: None,
            multiplier: rng.gen_range(250.0..400.0),
        },
    ];

    // Base weights, in expected-clicks-per-day scale; normalized below.
    let zipf_exponent = rng.gen_range(1.2..1.45);
    let mut w = vec![0.0f64; n];
    for (i, v) in w.iter_mut().take(home_n).enumerate() {
        // Mildly skewed so the launcher favorites keep a clear head without
        // letting one app dominate the device's click mass.
        *v = rng.gen_range(5.5..6.5) / ((i + 1) as f64).powf(0.3);
    }
    // Three strong tray heads plus a softer fourth: the count gap below the
    // fourth keeps a frequency ranking stable, while its modest rate leaves
    // the fourth slot within reach of decay-weighted scores.
    for v in w.iter_mut().take(home_n + 3).skip(home_n) {
        *v = rng.gen_range(2.7..3.2);
    }
    w[home_n + 3] = rng.gen_range(1.28..1.45);
    for v in w.iter_mut().take(weekly_idx).skip(daily0) {
        *v = rng.gen_range(0.11..0.15);
    }
    w[weekly_idx] = rng.gen_range(0.03..0.04);
    for (i, v) in w.iter_mut().skip(tail_start(home_n)).enumerate() {
        *v = 2.2 / ((i + 2) as f64).powf(zipf_exponent);
    }
    // Normalize to overall probabilities: home 0.35, tray 0.65.
    let home_sum: f64 = w[..home_n].iter().sum();
    let tray_sum: f64 = w[home_n..].iter().sum();
    for v in w[..home_n].iter_mut() {
        *v *= HOME_SLOT_SHARE / home_sum;
    }
    for v in w[home_n..].iter_mut() {
        *v *= (1.0 - HOME_SLOT_SHARE) / tray_sum;
    }

    Ok(Persona {
        device_id: device_id.to_string(),
        installed,
        home_screen_set,
        habits,
        base_popularity: w,
        zipf_exponent,
        locations,
        schedule,
        daily_rate: rng.gen_range(cfg.daily_rate_min..=cfg.daily_rate_max),
        tz_offset_minutes,
    })
}

/// Device state over one local hour; pure in (day table, schedule, hour).
#[derive(Debug, Clone, PartialEq)]
struct HourState {
    anchor: Option<usize>,
    wifi: Option<String>,
    bt: Option<String>,
    headphones: bool,
}

/// Per-day coin flips that keep hardware state coherent within a day.
#[derive(Debug, Clone, Copy)]
struct DayState {
    wifi_home: bool,
    wifi_work: bool,
    commute_bt: bool,
    commute_headphones: bool,
    evening_headphones: bool,
}

struct DeviceWorld<'a> {
    persona: &'a Persona,
    days: Vec<DayState>,
    ssid_home: String,
    ssid_work: String,
    bt_car: String,
}

impl DeviceWorld<'_> {
    fn anchor_at(&self, day: usize, hour: u32) -> Option<usize> {
        let dow = (day % 7) as u32;
        self.persona.schedule[(dow * 24 + hour) as usize].map(|a| a as usize)
    }

    fn state_at(&self, day: usize, hour: u32) -> HourState {
        let d = &self.days[day];
        let anchor = self.anchor_at(day, hour);
        let wifi = match anchor {
            Some(0) if d.wifi_home => Some(self.ssid_home.clone()),
            Some(1) if d.wifi_work => Some(self.ssid_work.clone()),
            _ => None,
        };
        let commuting = anchor.is_none() && (day % 7) < 5;
        let bt = (commuting && d.commute_bt).then(|| self.bt_car.clone());
        let headphones = (commuting && d.commute_headphones)
            || (anchor == Some(0) && (19..22).contains(&hour) && d.evening_headphones);
        HourState { anchor, wifi, bt, headphones }
    }
}

/// Episodic spikes: a mid-tail app runs hot for a couple of days.
#[derive(Debug, Clone, PartialEq)]
pub struct Burst {
    /// Position in the persona's installed list.
    pub app_idx: usize,
    pub multiplier: f64,
    /// Per-day activity flags, index = day since stream start.
    pub active: Vec<bool>,
}

/// A usage-level change: a quiet tail app surges for about two weeks, then
/// settles at a moderate permanent rate (new-app adoption with novelty
/// wear-off).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Riser {
    /// Position in the persona's installed list.
    pub app_idx: usize,
    /// First surge day (inclusive) and first settled day.
    pub surge_start: usize,
    pub settle_start: usize,
    /// Draw weights replacing the base popularity during each phase, on the
    /// normalized base_popularity scale.
    pub surge_weight: f64,
    pub settle_weight: f64,
}

impl Riser {
    /// The weight override in force on `day`, if any.
    pub fn weight_on(&self, day: usize) -> Option<f64> {
        if day >= self.settle_start {
            Some(self.settle_weight)
        } else if day >= self.surge_start {
            Some(self.surge_weight)
        } else {
            None
        }
    }
}

/// The day-indexed usage dynamics layered over a persona's base weights.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamDynamics {
    pub bursts: Vec<Burst>,
    pub risers: Vec<Riser>,
}

fn burst_plan(persona: &Persona, days: u32, cfg: &SimConfig, rng: &mut ChaCha20Rng) -> Vec<Burst> {
    let tail0 = tail_start(persona.home_screen_set.len());
    let n_tail = persona.installed.len().saturating_sub(tail0);
    let take = cfg.burst_apps.min(n_tail.saturating_sub(3));
    // Episode rates are pinned above the soft fourth head so a spike stands
    // out on the days it runs, while the short duty cycle keeps lifetime and
    // decay-window totals far below every head.
    let unit = persona.base_popularity[persona.home_screen_set.len() + 3];
    (0..take)
        .map(|b| {
            let app_idx = tail0 + 3 + b;
            let multiplier = unit * rng.gen_range(1.6..2.4) / persona.base_popularity[app_idx];
            let mut active = vec![false; days as usize];
            let mut d = rng.gen_range(6..16usize);
            while d < days as usize {
                let dur = rng.gen_range(2..=3usize);
                for k in d..(d + dur).min(days as usize) {
                    active[k] = true;
                }
                d += dur + rng.gen_range(9..17usize);
            }
            Burst { app_idx, multiplier, active }
        })
        .collect()
}

fn riser_plan(persona: &Persona, rng: &mut ChaCha20Rng) -> Vec<Riser> {
    let tail0 = tail_start(persona.home_screen_set.len());
    // Deep-tail position: near-silent before its surge. Weights are pinned to
    // the soft fourth head's popularity so the adoption rate tracks each
    // persona's scale: well above it while the novelty lasts, then settling
    // at rough parity, late enough that lifetime counts never catch up.
    let unit = persona.base_popularity[persona.home_screen_set.len() + 3];
    [tail0 + 10]
        .into_iter()
        .filter(|idx| *idx < persona.installed.len())
        .map(|app_idx| {
            let surge_start = rng.gen_range(68..75usize);
            let surge_days = rng.gen_range(8..=10usize);
            Riser {
                app_idx,
                surge_start,
                settle_start: surge_start + surge_days,
                surge_weight: unit * rng.gen_range(2.6..3.0),
                settle_weight: unit * rng.gen_range(0.96..1.08),
            }
        })
        .collect()
}

fn draw_day_states(days: usize, rng: &mut ChaCha20Rng) -> Vec<DayState> {
    (0..days)
        .map(|_| DayState {
            wifi_home: rng.gen_bool(0.93),
            wifi_work: rng.gen_bool(0.90),
            commute_bt: rng.gen_bool(0.80),
            commute_headphones: rng.gen_bool(0.70),
            evening_headphones: rng.gen_bool(0.15),
        })
        .collect()
}

/// Reproduces the burst and riser schedule `simulate` uses for this persona,
/// days, and seed. Ground truth for oracle evaluation.
pub fn stream_dynamics(persona: &Persona, days: u32, seed: u64) -> StreamDynamics {
    let mut rng = ChaCha20Rng::seed_from_u64(seed ^ fnv1a64(persona.device_id.as_bytes(), 0));
    // Consume the same draws simulate makes ahead of the plans.
    let _ = draw_day_states(days as usize, &mut rng);
    let bursts = burst_plan(persona, days, &SimConfig::default(), &mut rng);
    let risers = riser_plan(persona, &mut rng);
    StreamDynamics { bursts, risers }
}

pub fn simulate(persona: &Persona, days: u32, seed: u64) -> Vec<ClickEvent> {
    let mut rng =
        ChaCha20Rng::seed_from_u64(seed ^ fnv1a64(persona.device_id.as_bytes(), 0));
    let cfg = SimConfig::default();
    let n_days = days as usize;
    if n_days == 0 {
        return Vec::new();
    }

    let world = DeviceWorld {
        persona,
        days: draw_day_states(n_days, &mut rng),
        ssid_home: format!("wl-{}-home", persona.device_id),
        ssid_work: format!("wl-{}-office", persona.device_id),
        bt_car: format!("bt-{}-car", persona.device_id),
    };
    let bursts = burst_plan(persona, days, &cfg, &mut rng);
    let risers = riser_plan(persona, &mut rng);

    let home_n = persona.home_screen_set.len();
    let tz_secs = i64::from(persona.tz_offset_minutes) * 60;
    let geo_noise = Normal::new(0.0, 10.0).unwrap();
    let hour_total: f64 = HOURLY_ACTIVITY.iter().sum();

    let mut events = Vec::new();
    let mut tray_weights = vec![0.0f64; persona.installed.len()];
    let mut prev_state = world.state_at(0, 0);
    let mut prev_abs_hour: i64 = 0;
    let mut transitions: std::collections::BTreeMap<SignalKind, Timestamp> =
        std::collections::BTreeMap::new();

    for day in 0..n_days {
        let dow = (day % 7) as u8;
        let n_clicks = Poisson::new(persona.daily_rate).unwrap().sample(&mut rng) as usize;
        let mut seconds: Vec<i64> = (0..n_clicks)
            .map(|_| {
                let mut r = rng.gen_range(0.0..hour_total);
                let mut hour = 0usize;
                while r >= HOURLY_ACTIVITY[hour] && hour < 23 {
                    r -= HOURLY_ACTIVITY[hour];
                    hour += 1;
                }
                hour as i64 * SECS_PER_HOUR + rng.gen_range(0..SECS_PER_HOUR)
            })
            .collect();
        seconds.sort_unstable();

        for local_sec in seconds {
            let hour = (local_sec / SECS_PER_HOUR) as u32;
            let utc = STREAM_EPOCH + day as i64 * SECS_PER_DAY + local_sec - tz_secs;
            let ts = Timestamp::new(utc, persona.tz_offset_minutes);

            // Advance the state walk hour by hour, logging signal flips at
            // the boundary they happened on.
            let abs_hour = day as i64 * 24 + i64::from(hour);
            while prev_abs_hour < abs_hour {
                prev_abs_hour += 1;
                let d = (prev_abs_hour / 24) as usize;
                let h = (prev_abs_hour % 24) as u32;
                let state = world.state_at(d, h);
                let boundary = Timestamp::new(
                    STREAM_EPOCH + prev_abs_hour * SECS_PER_HOUR - tz_secs,
                    persona.tz_offset_minutes,
                );
                if state.anchor != prev_state.anchor {
                    if prev_state.anchor.is_some() {
                        transitions.insert(SignalKind::LocationExit, boundary);
                    }
                    if state.anchor.is_some() {
                        transitions.insert(SignalKind::LocationEntry, boundary);
                    }
                }
                if state.wifi != prev_state.wifi {
                    transitions.insert(SignalKind::Wifi, boundary);
                }
                if state.bt != prev_state.bt {
                    transitions.insert(SignalKind::Bt, boundary);
                }
                if state.headphones != prev_state.headphones {
                    transitions.insert(SignalKind::Headphones, boundary);
                }
                prev_state = state;
            }
            let state = &prev_state;

            let first_tier = rng.gen_bool(cfg.first_tier_prob);
            let app_idx = if first_tier {
                weighted_draw(&persona.base_popularity[..home_n], &mut rng)
            } else {
                tray_weights.clear();
                tray_weights.extend_from_slice(&persona.base_popularity);
                for v in tray_weights[..home_n].iter_mut() {
                    *v = 0.0;
                }
                for rule in &persona.habits {
                    if rule.active(dow, hour, state.anchor, state) {
                        let idx = persona.installed.iter().position(|a| *a == rule.app);
                        if let Some(i) = idx {
                            tray_weights[i] *= rule.multiplier;
                        }
                    }
                }
                for burst in &bursts {
                    if burst.active[day] {
                        tray_weights[burst.app_idx] *= burst.multiplier;
                    }
                }
                for riser in &risers {
                    if let Some(w) = riser.weight_on(day) {
                        tray_weights[riser.app_idx] = w;
                    }
                }
                weighted_draw(&tray_weights, &mut rng)
            };

            let slot = if first_tier {
                if rng.gen_bool(0.75) { Slot::HomeScreen } else { Slot::AppDock }
            } else {
                let r: f64 = rng.gen();
                if r < 0.85 {
                    Slot::AppTray
                } else if r < 0.94 {
                    Slot::Search
                } else {
                    Slot::Folder
                }
            };

            let geo = match state.anchor {
                Some(a) if !rng.gen_bool(cfg.geo_missing_prob) => {
                    let north = geo_noise.sample(&mut rng);
                    let east = geo_noise.sample(&mut rng);
                    Some(offset_m(persona.locations[a], north, east))
                }
                _ => None,
            };

            let mut ctx = ContextSnapshot::bare(ts);
            ctx.geo = geo;
            ctx.headphones = state.headphones;
            ctx.wifi_ssid = state.wifi.clone();
            ctx.wifi_connected = ctx.wifi_ssid.is_some();
            ctx.bt_id = state.bt.clone();
            ctx.bt_connected = ctx.bt_id.is_some();
            // Old flips decay to nothing; keep the context lean.
            ctx.transitions = transitions
                .iter()
                .filter(|(_, t)| ts.seconds_since(**t) <= 4 * SECS_PER_HOUR)
                .map(|(k, t)| (*k, *t))
                .collect();

            events.push(ClickEvent {
                device_id: persona.device_id.clone(),
                ctx,
                app: persona.installed[app_idx].clone(),
                slot,
            });
        }
    }
    events
}

/// Index draw proportional to non-negative weights.
fn weighted_draw(weights: &[f64], rng: &mut ChaCha20Rng) -> usize {
    let total: f64 = weights.iter().sum();
    let mut r = rng.gen_range(0.0..total);
    for (i, w) in weights.iter().enumerate() {
        if r < *w {
            return i;
        }
        r -= w;
    }
    weights.len() - 1
}

/// Generates `devices` personas and their merged, time-sorted stream.
pub fn generate_stream(
    master_seed: u64,
    devices: usize,
    days: u32,
    cfg: &SimConfig,
) -> Result<(Vec<ClickEvent>, Vec<Persona>), SimError> {
    let mut personas = Vec::with_capacity(devices);
    let mut events = Vec::new();
    for i in 0..devices {
        let device_id = format!("dev{i:04}");
        let seed = master_seed ^ fnv1a64(device_id.as_bytes(), 0);
        let persona = generate_persona(&device_id, seed, cfg)?;
        events.extend(simulate(&persona, days, master_seed));
        personas.push(persona);
    }
    // Stable by instant; equal timestamps keep device order.
    events.sort_by_key(|e| e.ctx.ts.seconds);
    Ok((events, personas))
}
