//! Per-app click histories: the time samples T_a and location samples L_a
//! behind the app-dependent features, plus lifetime click counts.

use std::collections::{BTreeMap, VecDeque};
use std::collections::btree_map;

use serde::{Deserialize, Serialize};

use crate::event::AppId;
use crate::geo::GeoPoint;
use crate::time::Timestamp;

pub const DEFAULT_TIME_CAP: usize = 512;
pub const DEFAULT_GEO_CAP: usize = 256;

/// History for one app. Lists are time-ordered oldest-first; caps evict FIFO.
/// Location samples carry their click time so features evaluated at a past
/// timestamp can ignore everything recorded after it.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AppHistory {
    pub times: VecDeque<Timestamp>,
    pub locs: VecDeque<(Timestamp, GeoPoint)>,
    /// Lifetime clicks n^a, which keeps counting past the caps.
    pub total: u64,
}

/// All per-app histories of one device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppHistories {
    apps: BTreeMap<AppId, AppHistory>,
    time_cap: usize,
    geo_cap: usize,
}

impl AppHistories {
    pub fn new(time_cap: usize, geo_cap: usize) -> Self {
        Self { apps: BTreeMap::new(), time_cap, geo_cap }
    }

    pub fn record(&mut self, app: &AppId, ts: Timestamp, geo: Option<GeoPoint>) {
        let h = self.apps.entry(app.clone()).or_default();
        h.times.push_back(ts);
        if h.times.len() > self.time_cap {
            h.times.pop_front();
        }
        if let Some(g) = geo {
            h.locs.push_back((ts, g));
            if h.locs.len() > self.geo_cap {
                h.locs.pop_front();
            }
        }
        h.total += 1;
    }

    pub fn get(&self, app: &AppId) -> Option<&AppHistory> {
        self.apps.get(app)
    }

    pub fn iter(&self) -> btree_map::Iter<'_, AppId, AppHistory> {
        self.apps.iter()
    }

    pub fn len(&self) -> usize {
        self.apps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.apps.is_empty()
    }
}

impl Default for AppHistories {
    fn default() -> Self {
        Self::new(DEFAULT_TIME_CAP, DEFAULT_GEO_CAP)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ts(s: i64) -> Timestamp {
        Timestamp::utc(s)
    }

    #[test]
    fn records_in_order_and_counts() {
        let mut h = AppHistories::default();
        let app = AppId::new("a.mail");
        h.record(&app, ts(10), None);
        h.record(&app, ts(20), Some(GeoPoint::new(1.0, 2.0)));
        let hist = h.get(&app).unwrap();
        assert_eq!(hist.times.len(), 2);
        assert_eq!(hist.locs.len(), 1);
        assert_eq!(hist.total, 2);
        assert!(hist.times[0].seconds < hist.times[1].seconds);
    }

    #[test]
    fn caps_evict_oldest_but_total_keeps_counting() {
        let mut h = AppHistories::new(3, 2);
        let app = AppId::new("a");
        for i in 0..10 {
            h.record(&app, ts(i), Some(GeoPoint::new(0.0, f64::from(i as i32))));
        }
        let hist = h.get(&app).unwrap();
        assert_eq!(hist.times.len(), 3);
        assert_eq!(hist.times.front().unwrap().seconds, 7);
        assert_eq!(hist.locs.len(), 2);
        assert_eq!(hist.locs.front().unwrap().1.lon, 8.0);
        assert_eq!(hist.locs.front().unwrap().0.seconds, 8);
        assert_eq!(hist.total, 10);
        assert!(hist.total >= hist.times.len() as u64);
    }

    #[test]
    fn missing_geo_does_not_pad_locations() {
        let mut h = AppHistories::default();
        let app = AppId::new("a");
        h.record(&app, ts(1), None);
        h.record(&app, ts(2), None);
        assert!(h.get(&app).unwrap().locs.is_empty());
    }
}
