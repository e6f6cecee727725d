//! Wall-clock timestamps with per-event timezone offsets.
//!
//! Devices travel, so local time is derived from an offset carried on every
//! event rather than from a global zone. All of-day computations (hour,
//! weekday, second-of-day) use local time.

use serde::{Deserialize, Serialize};

pub const SECS_PER_DAY: i64 = 86_400;
pub const SECS_PER_HOUR: i64 = 3_600;

/// Smallest/largest legal timezone offsets (UTC-14:00 .. UTC+14:00).
pub const TZ_OFFSET_MIN: i32 = -840;
pub const TZ_OFFSET_MAX: i32 = 840;

/// A point in time: UTC seconds since the epoch plus the timezone offset the
/// device reported at that moment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Timestamp {
    /// Seconds since the Unix epoch, UTC.
    pub seconds: i64,
    /// Minutes east of UTC, in `[-840, 840]`.
    pub tz_offset_minutes: i32,
}

impl Timestamp {
    pub fn new(seconds: i64, tz_offset_minutes: i32) -> Self {
        Self { seconds, tz_offset_minutes }
    }

    pub fn utc(seconds: i64) -> Self {
        Self { seconds, tz_offset_minutes: 0 }
    }

    /// Local seconds since the epoch (UTC seconds shifted by the offset).
    pub fn local_seconds(&self) -> i64 {
        self.seconds + 60 * self.tz_offset_minutes as i64
    }

    /// Second of the local day, always in `[0, 86400)`.
    pub fn local_second_of_day(&self) -> u32 {
        self.local_seconds().rem_euclid(SECS_PER_DAY) as u32
    }

    /// Local hour of day in `[0, 24)`.
    pub fn local_hour(&self) -> u32 {
        self.local_second_of_day() / SECS_PER_HOUR as u32
    }

    /// Local day of week, Monday = 0 .. Sunday = 6.
    pub fn local_weekday(&self) -> u32 {
        // The epoch (1970-01-01) was a Thursday, index 3.
        let days = self.local_seconds().div_euclid(SECS_PER_DAY);
        (days + 3).rem_euclid(7) as u32
    }

    /// Seconds elapsed since `earlier` (negative if `earlier` is later).
    pub fn seconds_since(&self, earlier: Timestamp) -> i64 {
        self.seconds - earlier.seconds
    }
}

/// Circular distance between the local seconds-of-day of two timestamps,
/// in seconds; wraps around midnight, so the result is in `[0, 43200]`.
pub fn second_of_day_distance(a: Timestamp, b: Timestamp) -> u32 {
    let da = a.local_second_of_day() as i64;
    let db = b.local_second_of_day() as i64;
    let d = (da - db).abs();
    d.min(SECS_PER_DAY - d) as u32
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn second_of_day_basics() {
        assert_eq!(Timestamp::new(0, 0).local_second_of_day(), 0);
        assert_eq!(Timestamp::new(0, 60).local_second_of_day(), 3600);
        // 86399 UTC + 2 minutes east wraps past midnight.
        assert_eq!(Timestamp::new(86_399, 2).local_second_of_day(), 119);
    }

    #[test]
    fn weekday_of_epoch_is_thursday() {
        assert_eq!(Timestamp::new(0, 0).local_weekday(), 3);
        // 2020-09-14 00:00 UTC was a Monday.
        assert_eq!(Timestamp::new(1_600_041_600, 0).local_weekday(), 0);
    }

    #[test]
    fn negative_offsets_wrap_backwards() {
        // 00:30 UTC at UTC-1 is 23:30 the previous local day.
        let ts = Timestamp::new(1800, -60);
        assert_eq!(ts.local_second_of_day(), 84_600);
    }

    #[test]
    fn circular_distance_wraps() {
        // 23:59:00 vs 00:01:00 is 120 s around midnight.
        let a = Timestamp::new(86_340, 0);
        let b = Timestamp::new(86_460, 0);
        assert_eq!(second_of_day_distance(a, b), 120);
        assert_eq!(second_of_day_distance(b, a), 120);
    }

    proptest! {
        #[test]
        fn second_of_day_in_range(secs in -4_000_000_000i64..4_000_000_000i64,
                                  off in TZ_OFFSET_MIN..=TZ_OFFSET_MAX) {
            let s = Timestamp::new(secs, off).local_second_of_day();
            prop_assert!(s < SECS_PER_DAY as u32);
        }

        #[test]
        fn circular_distance_bounded(a in 0i64..200_000, b in 0i64..200_000) {
            let d = second_of_day_distance(Timestamp::utc(a), Timestamp::utc(b));
            prop_assert!(d <= 43_200);
        }
    }
}
