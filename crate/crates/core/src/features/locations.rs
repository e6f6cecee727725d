//! Known-location tracking: clusters of fixes within 50 m, with a location
//! counting as "known" once it recurs (two visits at least an hour apart
//! within the last 30 days).

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::geo::{haversine_m, GeoPoint};
use crate::time::{Timestamp, SECS_PER_DAY, SECS_PER_HOUR};

pub const CLUSTER_RADIUS_M: f64 = 50.0;
pub const VISIT_RETENTION_DAYS: i64 = 30;
pub const KNOWN_MIN_SEPARATION_S: i64 = SECS_PER_HOUR;

/// One spatial cluster. The center is the running mean over every fix ever
/// assigned; `visits` holds only the retained (last 30 days) visit times,
/// oldest-first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub id: u32,
    pub center: GeoPoint,
    pub visits: VecDeque<Timestamp>,
    assigned: u64,
}

impl Cluster {
    /// Known means recurring: at least two retained visits with the newest
    /// and oldest at least an hour apart.
    pub fn is_known(&self) -> bool {
        match (self.visits.front(), self.visits.back()) {
            (Some(a), Some(b)) if self.visits.len() >= 2 => {
                b.seconds_since(*a) >= KNOWN_MIN_SEPARATION_S
            }
            _ => false,
        }
    }

    fn absorb(&mut self, fix: GeoPoint, ts: Timestamp) {
        self.assigned += 1;
        let n = self.assigned as f64;
        self.center.lat += (fix.lat - self.center.lat) / n;
        self.center.lon += (fix.lon - self.center.lon) / n;
        self.visits.push_back(ts);
    }

    fn evict_before(&mut self, cutoff_s: i64) {
        while matches!(self.visits.front(), Some(t) if t.seconds < cutoff_s) {
            self.visits.pop_front();
        }
    }
}

/// What the store says about the device's whereabouts at one event.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocationState {
    pub is_known: bool,
    pub cluster_id: Option<u32>,
    /// Start of the current contiguous stay, when the current cluster is known.
    pub entered: Option<Timestamp>,
    /// Last fix inside the previously occupied known cluster.
    pub prev_known_left: Option<Timestamp>,
}

impl LocationState {
    pub fn unknown() -> Self {
        Self { is_known: false, cluster_id: None, entered: None, prev_known_left: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnownLocationStore {
    clusters: Vec<Cluster>,
    next_id: u32,
    /// Current contiguous stay: cluster, first and last fix time in it.
    stay_cluster: Option<u32>,
    stay_entered: Option<Timestamp>,
    stay_last_seen: Option<Timestamp>,
    prev_known_left: Option<Timestamp>,
    /// Fingerprint of the last processed event, so feature extraction can
    /// tell whether the store has already seen the context it is encoding.
    last_event: Option<(i64, Option<GeoPoint>)>,
    last_state: LocationState,
}

impl KnownLocationStore {
    pub fn new() -> Self {
        Self {
            clusters: Vec::new(),
            next_id: 0,
            stay_cluster: None,
            stay_entered: None,
            stay_last_seen: None,
            prev_known_left: None,
            last_event: None,
            last_state: LocationState::unknown(),
        }
    }

    pub fn clusters(&self) -> &[Cluster] {
        &self.clusters
    }

    /// Nearest retained cluster within the radius; ties break to the lowest
    /// id for determinism.
    fn nearest_within(&self, fix: GeoPoint, cutoff_s: i64) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, c) in self.clusters.iter().enumerate() {
            // A cluster whose visits all predate the cutoff is treated as
            // gone, exactly as update's eviction would leave it.
            if !matches!(c.visits.back(), Some(t) if t.seconds >= cutoff_s) {
                continue;
            }
            let d = haversine_m(c.center, fix);
            if d <= CLUSTER_RADIUS_M && best.map_or(true, |(_, bd)| d < bd) {
                best = Some((i, d));
            }
        }
        best.map(|(i, _)| i)
    }

    /// Folds one event into the store and reports the resulting state.
    /// Events must arrive in time order per device.
    pub fn update(&mut self, geo: Option<GeoPoint>, ts: Timestamp) -> LocationState {
        let state = match geo {
            None => LocationState {
                is_known: false,
                cluster_id: None,
                entered: None,
                prev_known_left: self.prev_known_left,
            },
            Some(fix) => {
                let cutoff = ts.seconds - VISIT_RETENTION_DAYS * SECS_PER_DAY;
                for c in &mut self.clusters {
                    c.evict_before(cutoff);
                }
                self.clusters.retain(|c| !c.visits.is_empty());
                if !self.clusters.iter().any(|c| Some(c.id) == self.stay_cluster) {
                    self.stay_cluster = None;
                }

                let idx = match self.nearest_within(fix, cutoff) {
                    Some(i) => i,
                    None => {
                        let id = self.next_id;
                        self.next_id += 1;
                        self.clusters.push(Cluster {
                            id,
                            center: fix,
                            visits: VecDeque::new(),
                            assigned: 0,
                        });
                        self.clusters.len() - 1
                    }
                };
                let id = self.clusters[idx].id;

                if self.stay_cluster != Some(id) {
                    // Stay transition: remember when we were last seen in the
                    // previous cluster, if it had become known.
                    if let Some(prev) = self.stay_cluster {
                        if let Some(pc) = self.clusters.iter().find(|c| c.id == prev) {
                            if pc.is_known() {
                                self.prev_known_left = self.stay_last_seen;
                            }
                        }
                    }
                    self.stay_cluster = Some(id);
                    self.stay_entered = Some(ts);
                }
                self.stay_last_seen = Some(ts);

                self.clusters[idx].absorb(fix, ts);
                let known = self.clusters[idx].is_known();
                LocationState {
                    is_known: known,
                    cluster_id: Some(id),
                    entered: if known { self.stay_entered } else { None },
                    prev_known_left: self.prev_known_left,
                }
            }
        };
        self.last_event = Some((ts.seconds, geo));
        self.last_state = state;
        state
    }

    /// Pure preview: the state `update(geo, ts)` would return, without
    /// mutating anything. Lets prediction read features before the observe
    /// step commits the event.
    pub fn probe(&self, geo: Option<GeoPoint>, ts: Timestamp) -> LocationState {
        let fix = match geo {
            None => {
                return LocationState {
                    is_known: false,
                    cluster_id: None,
                    entered: None,
                    prev_known_left: self.prev_known_left,
                }
            }
            Some(f) => f,
        };
        let cutoff = ts.seconds - VISIT_RETENTION_DAYS * SECS_PER_DAY;
        let stay_cluster = self
            .clusters
            .iter()
            .find(|c| Some(c.id) == self.stay_cluster)
            .filter(|c| matches!(c.visits.back(), Some(t) if t.seconds >= cutoff))
            .map(|c| c.id);

        let (id, known, is_new_stay) = match self.nearest_within(fix, cutoff) {
            Some(i) => {
                let c = &self.clusters[i];
                // Knownness after the hypothetical insert of `ts`.
                let oldest = c
                    .visits
                    .iter()
                    .find(|t| t.seconds >= cutoff)
                    .copied()
                    .unwrap_or(ts);
                let retained = c.visits.iter().filter(|t| t.seconds >= cutoff).count() + 1;
                let known = retained >= 2 && ts.seconds_since(oldest) >= KNOWN_MIN_SEPARATION_S;
                (c.id, known, stay_cluster != Some(c.id))
            }
            None => (self.next_id, false, true),
        };

        let mut prev_known_left = self.prev_known_left;
        if is_new_stay {
            if let Some(prev) = stay_cluster {
                if let Some(pc) = self.clusters.iter().find(|c| c.id == prev) {
                    let retained: Vec<_> =
                        pc.visits.iter().filter(|t| t.seconds >= cutoff).collect();
                    let was_known = retained.len() >= 2
                        && retained.last().unwrap().seconds_since(**retained.first().unwrap())
                            >= KNOWN_MIN_SEPARATION_S;
                    if was_known {
                        prev_known_left = self.stay_last_seen;
                    }
                }
            }
        }
        let entered = if is_new_stay { Some(ts) } else { self.stay_entered };
        LocationState {
            is_known: known,
            cluster_id: Some(id),
            entered: if known { entered } else { None },
            prev_known_left,
        }
    }

    /// State matching a context: the stored answer when the store's last
    /// update was exactly this event, otherwise a pure probe.
    pub fn state_for(&self, geo: Option<GeoPoint>, ts: Timestamp) -> LocationState {
        if self.last_event == Some((ts.seconds, geo)) {
            self.last_state
        } else {
            self.probe(geo, ts)
        }
    }
}

impl Default for KnownLocationStore {
    fn default() -> Self {
        Self::new()
    }
}
