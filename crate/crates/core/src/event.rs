//! Domain types and the event-log schema.
//!
//! The on-disk log is UTF-8 JSONL: one click event per line. Connection
//! state rides on id presence (`wifi_ssid` present means connected), unknown
//! fields are ignored, and absent optional fields stay unknown rather than
//! being filled with values that could alias real measurements.

use std::collections::BTreeMap;
use std::fmt;
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::geo::GeoPoint;
use crate::time::{Timestamp, TZ_OFFSET_MAX, TZ_OFFSET_MIN};

/// Opaque app identifier (package-name-like). Non-empty.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AppId(String);

impl AppId {
    pub fn new(id: impl Into<String>) -> Self {
        let id = id.into();
        debug_assert!(!id.is_empty(), "empty app id");
        Self(id)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for AppId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for AppId {
    fn from(s: &str) -> Self {
        AppId::new(s)
    }
}

/// Where on the screen the clicked icon lived.
///
/// Home-screen and dock shortcuts are "1st tier": always visible, excluded
/// from the prediction task. Everything else is 2nd tier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Slot {
    HomeScreen,
    AppDock,
    PredictionBar,
    AppTray,
    Folder,
    Search,
}

impl Slot {
    /// True for clicks on home-screen/dock shortcuts, which are outside the
    /// prediction task.
    pub fn is_first_tier(&self) -> bool {
        matches!(self, Slot::HomeScreen | Slot::AppDock)
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Slot::HomeScreen => "home_screen",
            Slot::AppDock => "app_dock",
            Slot::PredictionBar => "prediction_bar",
            Slot::AppTray => "app_tray",
            Slot::Folder => "folder",
            Slot::Search => "search",
        }
    }

    fn from_str(s: &str) -> Option<Slot> {
        Some(match s {
            "home_screen" => Slot::HomeScreen,
            "app_dock" => Slot::AppDock,
            "prediction_bar" => Slot::PredictionBar,
            "app_tray" => Slot::AppTray,
            "folder" => Slot::Folder,
            "search" => Slot::Search,
            _ => return None,
        })
    }
}

/// Hardware/location signals that can report a last-change time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalKind {
    Headphones,
    Wifi,
    Bt,
    LocationEntry,
    LocationExit,
}

impl SignalKind {
    pub fn as_key(&self) -> &'static str {
        match self {
            SignalKind::Headphones => "headphones",
            SignalKind::Wifi => "wifi",
            SignalKind::Bt => "bt",
            SignalKind::LocationEntry => "location_entry",
            SignalKind::LocationExit => "location_exit",
        }
    }

    fn from_key(s: &str) -> Option<SignalKind> {
        Some(match s {
            "headphones" => SignalKind::Headphones,
            "wifi" => SignalKind::Wifi,
            "bt" => SignalKind::Bt,
            "location_entry" => SignalKind::LocationEntry,
            "location_exit" => SignalKind::LocationExit,
            _ => return None,
        })
    }
}

/// Raw feature primitives at one moment: time, an optional fix, and the
/// hardware state, plus last-change times for signals the device reported.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextSnapshot {
    pub ts: Timestamp,
    pub geo: Option<GeoPoint>,
    pub headphones: bool,
    pub wifi_connected: bool,
    pub wifi_ssid: Option<String>,
    pub bt_connected: bool,
    pub bt_id: Option<String>,
    /// Last state-change time per signal. Entries are optional; a missing
    /// entry means "unknown", and features derived from it contribute nothing.
    pub transitions: BTreeMap<SignalKind, Timestamp>,
}

impl ContextSnapshot {
    /// A snapshot with nothing connected and no fix, for building contexts
    /// programmatically.
    pub fn bare(ts: Timestamp) -> Self {
        Self {
            ts,
            geo: None,
            headphones: false,
            wifi_connected: false,
            wifi_ssid: None,
            bt_connected: false,
            bt_id: None,
            transitions: BTreeMap::new(),
        }
    }

    /// Minutes since the given signal last changed, if known. Clamped at zero.
    pub fn minutes_since_change(&self, kind: SignalKind) -> Option<f64> {
        self.transitions
            .get(&kind)
            .map(|t| (self.ts.seconds_since(*t).max(0)) as f64 / 60.0)
    }
}

/// One app click with the context it happened in.
#[derive(Debug, Clone, PartialEq)]
pub struct ClickEvent {
    pub device_id: String,
    pub ctx: ContextSnapshot,
    pub app: AppId,
    pub slot: Slot,
}

/// The Prediction Bar: up to `k` apps ordered best-first with their scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSet {
    entries: Vec<(AppId, f64)>,
}

impl PredictionSet {
    pub fn empty() -> Self {
        Self { entries: Vec::new() }
    }

    /// Builds a set, debug-checking the ordering and distinctness invariants.
    pub fn new(entries: Vec<(AppId, f64)>) -> Self {
        debug_assert!(
            entries.windows(2).all(|w| w[0].1 >= w[1].1),
            "prediction scores must be non-increasing"
        );
        debug_assert!(
            {
                let mut ids: Vec<_> = entries.iter().map(|(a, _)| a).collect();
                ids.sort();
                ids.windows(2).all(|w| w[0] != w[1])
            },
            "prediction apps must be distinct"
        );
        Self { entries }
    }

    pub fn contains(&self, app: &AppId) -> bool {
        self.entries.iter().any(|(a, _)| a == app)
    }

    pub fn apps(&self) -> impl Iterator<Item = &AppId> {
        self.entries.iter().map(|(a, _)| a)
    }

    pub fn entries(&self) -> &[(AppId, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EventError {
    #[error("line {line}: malformed JSON: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("line {line}: {msg}")]
    Schema { line: usize, msg: String },
    #[error("I/O error reading event log")]
    Io(#[from] std::io::Error),
}

fn schema_err(line: usize, msg: impl Into<String>) -> EventError {
    EventError::Schema { line, msg: msg.into() }
}

/// Wire shape of one log line. Output order doubles as the canonical field
/// order; optional fields are omitted when absent or equal to their default.
#[derive(Serialize, Deserialize)]
struct WireEvent {
    device_id: String,
    ts: i64,
    #[serde(default, skip_serializing_if = "is_zero")]
    tz_offset_minutes: i32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lat: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lon: Option<f64>,
    #[serde(default, skip_serializing_if = "is_false")]
    headphones: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    wifi_ssid: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bt_id: Option<String>,
    app: String,
    slot: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    transitions: BTreeMap<String, i64>,
}

fn is_zero(v: &i32) -> bool {
    *v == 0
}

fn is_false(v: &bool) -> bool {
    !*v
}

/// Parses one JSONL record. `line_no` is 1-based and only used in errors.
pub fn parse_event_line(line: &str, line_no: usize) -> Result<ClickEvent, EventError> {
    // serde reports missing `device_id`/`ts`/`app`/`slot` as errors; surface
    // those as schema errors rather than generic JSON failures.
    let wire: WireEvent = match serde_json::from_str(line) {
        Ok(w) => w,
        Err(e) => {
            if e.is_data() {
                return Err(schema_err(line_no, e.to_string()));
            }
            return Err(EventError::Json { line: line_no, source: e });
        }
    };

    if wire.device_id.is_empty() {
        return Err(schema_err(line_no, "empty device_id"));
    }
    if wire.app.is_empty() {
        return Err(schema_err(line_no, "empty app id"));
    }
    if !(TZ_OFFSET_MIN..=TZ_OFFSET_MAX).contains(&wire.tz_offset_minutes) {
        return Err(schema_err(
            line_no,
            format!("tz_offset_minutes {} out of [-840, 840]", wire.tz_offset_minutes),
        ));
    }
    let slot = Slot::from_str(&wire.slot)
        .ok_or_else(|| schema_err(line_no, format!("unknown slot {:?}", wire.slot)))?;

    let geo = match (wire.lat, wire.lon) {
        (Some(lat), Some(lon)) => {
            let p = GeoPoint::new(lat, lon);
            if !p.is_valid() {
                return Err(schema_err(line_no, format!("invalid coordinates ({lat}, {lon})")));
            }
            Some(p)
        }
        (None, None) => None,
        _ => return Err(schema_err(line_no, "lat and lon must be given together")),
    };

    let ts = Timestamp::new(wire.ts, wire.tz_offset_minutes);
    let mut transitions = BTreeMap::new();
    for (key, secs) in &wire.transitions {
        // Unknown signal names are ignored, like unknown fields.
        if let Some(kind) = SignalKind::from_key(key) {
            if *secs > wire.ts {
                return Err(schema_err(
                    line_no,
                    format!("transition {key} at {secs} is after the event time {}", wire.ts),
                ));
            }
            transitions.insert(kind, Timestamp::new(*secs, wire.tz_offset_minutes));
        }
    }

    Ok(ClickEvent {
        device_id: wire.device_id,
        ctx: ContextSnapshot {
            ts,
            geo,
            headphones: wire.headphones,
            wifi_connected: wire.wifi_ssid.is_some(),
            wifi_ssid: wire.wifi_ssid,
            bt_connected: wire.bt_id.is_some(),
            bt_id: wire.bt_id,
            transitions,
        },
        app: AppId::new(wire.app),
        slot,
    })
}

/// Serializes an event to its canonical single-line JSON form.
pub fn serialize_event(event: &ClickEvent) -> String {
    let wire = WireEvent {
        device_id: event.device_id.clone(),
        ts: event.ctx.ts.seconds,
        tz_offset_minutes: event.ctx.ts.tz_offset_minutes,
        lat: event.ctx.geo.map(|g| g.lat),
        lon: event.ctx.geo.map(|g| g.lon),
        headphones: event.ctx.headphones,
        wifi_ssid: event.ctx.wifi_ssid.clone(),
        bt_id: event.ctx.bt_id.clone(),
        app: event.app.as_str().to_owned(),
        slot: event.slot.as_str().to_owned(),
        transitions: event
            .ctx
            .transitions
            .iter()
            .map(|(k, t)| (k.as_key().to_owned(), t.seconds))
            .collect(),
    };
    serde_json::to_string(&wire).expect("event serialization cannot fail")
}

/// Streaming reader over a JSONL event log. Blank lines are skipped.
pub struct EventLogReader<R: BufRead> {
    reader: R,
    line_no: usize,
    buf: String,
}

impl<R: BufRead> EventLogReader<R> {
    pub fn new(reader: R) -> Self {
        Self { reader, line_no: 0, buf: String::new() }
    }

    /// 1-based number of the last line yielded.
    pub fn line_no(&self) -> usize {
        self.line_no
    }
}

impl<R: BufRead> Iterator for EventLogReader<R> {
    type Item = Result<ClickEvent, EventError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            self.buf.clear();
            match self.reader.read_line(&mut self.buf) {
                Ok(0) => return None,
                Ok(_) => {
                    self.line_no += 1;
                    let line = self.buf.trim_end_matches(['\n', '\r']);
                    if line.trim().is_empty() {
                        continue;
                    }
                    return Some(parse_event_line(line, self.line_no));
                }
                Err(e) => return Some(Err(e.into())),
            }
        }
    }
}

/// Reads a whole log into memory.
pub fn read_events<R: BufRead>(reader: R) -> Result<Vec<ClickEvent>, EventError> {
    EventLogReader::new(reader).collect()
}
