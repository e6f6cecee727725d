//! App-dependent features φ(x,a): recency (φ1), time-of-day affinity (φ2),
//! and location affinity (φ3), each at three bandwidths. All are means over
//! the app's history, so an unseen app scores 0 everywhere.
//!
//! φ(x,a) is a function of the history *as of* x's timestamp: clicks
//! recorded after it are invisible. Stored negative contexts get re-scored
//! long after capture, and letting later clicks leak in would mark the
//! then-future heaviest apps as "recent" on every negative side, driving the
//! shared recency weights negative.

use crate::event::ContextSnapshot;
use crate::geo::{haversine_m, GeoPoint};
use crate::time::{second_of_day_distance, Timestamp};

use super::history::AppHistory;

pub const D_PHI: usize = 9;
pub const PHI1_BANDWIDTHS_DAYS: [f64; 3] = [1.0, 1.5, 3.0];
pub const PHI2_BANDWIDTHS_SECS: [f64; 3] = [60.0, 600.0, 1500.0];
pub const PHI3_BANDWIDTHS_M: [f64; 3] = [50.0, 200.0, 1000.0];

const SECS_PER_DAY_F: f64 = 86_400.0;
/// exp(-x) for x beyond this underflows to 0 well inside f64 range.
const EXP_CUTOFF: f64 = 80.0;

pub type AppFeatureVector = [f64; D_PHI];

/// φ_{1,h}: mean of 0.5·(1 + exp(−Δ²/2h²)) over past click ages Δ in days.
/// Ranges over {0} ∪ (0.5, 1]: recent clicks pull toward 1, ancient history
/// floors at 0.5, no history at all scores 0.
pub fn app_recency_feature(times: &[Timestamp], now: Timestamp, h_days: f64) -> f64 {
    debug_assert!(h_days > 0.0);
    if times.is_empty() {
        return 0.0;
    }
    let denom = 2.0 * h_days * h_days;
    let mut sum = 0.0;
    for t in times {
        let age_days = now.seconds_since(*t).max(0) as f64 / SECS_PER_DAY_F;
        let arg = age_days * age_days / denom;
        sum += if arg > EXP_CUTOFF { 0.5 } else { 0.5 * (1.0 + (-arg).exp()) };
    }
    sum / times.len() as f64
}

/// φ_{2,h}: mean of exp(−Δ²/2h²) over circular second-of-day distances.
pub fn app_time_of_day_feature(times: &[Timestamp], now: Timestamp, h_secs: f64) -> f64 {
    debug_assert!(h_secs > 0.0);
    if times.is_empty() {
        return 0.0;
    }
    let denom = 2.0 * h_secs * h_secs;
    let mut sum = 0.0;
    for t in times {
        let delta = f64::from(second_of_day_distance(now, *t));
        let arg = delta * delta / denom;
        if arg <= EXP_CUTOFF {
            sum += (-arg).exp();
        }
    }
    sum / times.len() as f64
}

/// φ_{3,h}: mean of exp(−d²/2h²) over haversine distances to past click
/// locations.
pub fn app_location_feature(locs: &[GeoPoint], geo: Option<GeoPoint>, h_m: f64) -> f64 {
    debug_assert!(h_m > 0.0);
    let here = match geo {
        Some(g) if !locs.is_empty() => g,
        _ => return 0.0,
    };
    let denom = 2.0 * h_m * h_m;
    let mut sum = 0.0;
    for l in locs {
        let d = haversine_m(here, *l);
        let arg = d * d / denom;
        if arg <= EXP_CUTOFF {
            sum += (-arg).exp();
        }
    }
    sum / locs.len() as f64
}

/// Assembles the 9-dimensional φ(x,a) for one app against one context,
/// using only the history recorded at or before `ctx.ts`. Missing history
/// (or a missing fix for φ3) yields zero coordinates.
pub fn app_features(hist: Option<&AppHistory>, ctx: &ContextSnapshot) -> AppFeatureVector {
    let mut phi = [0.0; D_PHI];
    let hist = match hist {
        Some(h) => h,
        None => return phi,
    };

    // Histories are stream-ordered, so "as of ctx.ts" is a prefix.
    let n = hist.times.partition_point(|t| t.seconds <= ctx.ts.seconds);
    if n > 0 {
        // φ1 walks newest-first: once a click is old enough that even the
        // widest bandwidth underflows, every older click contributes 0.5.
        let mut sums = [0.0f64; 3];
        let mut seen = 0usize;
        let h_max = PHI1_BANDWIDTHS_DAYS[2];
        for t in hist.times.range(..n).rev() {
            let age_days = ctx.ts.seconds_since(*t).max(0) as f64 / SECS_PER_DAY_F;
            if age_days * age_days / (2.0 * h_max * h_max) > EXP_CUTOFF {
                let rest = (n - seen) as f64;
                for s in &mut sums {
                    *s += 0.5 * rest;
                }
                seen = n;
                break;
            }
            for (i, h) in PHI1_BANDWIDTHS_DAYS.iter().enumerate() {
                let arg = age_days * age_days / (2.0 * h * h);
                sums[i] += if arg > EXP_CUTOFF { 0.5 } else { 0.5 * (1.0 + (-arg).exp()) };
            }
            seen += 1;
        }
        debug_assert_eq!(seen, n);
        for i in 0..3 {
            phi[i] = sums[i] / n as f64;
        }

        let mut sums2 = [0.0f64; 3];
        for t in hist.times.range(..n) {
            let delta = f64::from(second_of_day_distance(ctx.ts, *t));
            for (i, h) in PHI2_BANDWIDTHS_SECS.iter().enumerate() {
                let arg = delta * delta / (2.0 * h * h);
                if arg <= EXP_CUTOFF {
                    sums2[i] += (-arg).exp();
                }
            }
        }
        for i in 0..3 {
            phi[3 + i] = sums2[i] / n as f64;
        }
    }

    if let Some(here) = ctx.geo {
        let m = hist.locs.partition_point(|(t, _)| t.seconds <= ctx.ts.seconds);
        if m > 0 {
            let mut sums3 = [0.0f64; 3];
            for (_, l) in hist.locs.range(..m) {
                let d = haversine_m(here, *l);
                for (i, h) in PHI3_BANDWIDTHS_M.iter().enumerate() {
                    let arg = d * d / (2.0 * h * h);
                    if arg <= EXP_CUTOFF {
                        sums3[i] += (-arg).exp();
                    }
                }
            }
            for i in 0..3 {
                phi[6 + i] = sums3[i] / m as f64;
            }
        }
    }
    phi
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::AppId;
    use crate::features::history::AppHistories;
    use crate::geo::offset_m;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn ts(s: i64) -> Timestamp {
        Timestamp::utc(s)
    }

    #[test]
    fn recency_single_click_now_is_one() {
        assert_abs_diff_eq!(app_recency_feature(&[ts(500)], ts(500), 1.0), 1.0);
    }

    #[test]
    fn recency_ancient_click_floors_at_half() {
        let old = ts(0);
        let now = ts(1000 * 86_400);
        assert_abs_diff_eq!(app_recency_feature(&[old], now, 1.0), 0.5);
    }

    #[test]
    fn recency_one_day_at_one_day_bandwidth() {
        // 0.5·(1 + e^{-1/2}) evaluated independently: e^{-0.5} =
        // 0.6065306597126334, so the feature is 0.8032653298563167.
        let v = app_recency_feature(&[ts(0)], ts(86_400), 1.0);
        assert_abs_diff_eq!(v, 0.803_265_329_856_316_7, epsilon = 1e-12);
        assert!((v - 0.80327).abs() <= 1e-5);
    }

    #[test]
    fn time_of_day_same_second_is_one() {
        let a = ts(9 * 3600);
        let b = ts(86_400 * 5 + 9 * 3600);
        assert_abs_diff_eq!(app_time_of_day_feature(&[a], b, 60.0), 1.0);
    }

    #[test]
    fn time_of_day_opposite_ends_vanishes() {
        let a = ts(0);
        let b = ts(12 * 3600);
        assert_eq!(app_time_of_day_feature(&[a], b, 60.0), 0.0);
    }

    #[test]
    fn time_of_day_wraps_midnight() {
        // 23:59:00 vs 00:01:00 is 120 s around midnight; e^{-120²/(2·600²)}
        // = e^{-0.02} = 0.9801986733067553.
        let before = ts(23 * 3600 + 59 * 60);
        let after = ts(86_400 + 60);
        let v = app_time_of_day_feature(&[before], after, 600.0);
        assert_abs_diff_eq!(v, 0.980_198_673_306_755_3, epsilon = 1e-12);
        assert!((v - 0.98020).abs() <= 1e-5);
    }

    #[test]
    fn location_same_point_is_one() {
        let p = GeoPoint::new(52.52, 13.405);
        assert_abs_diff_eq!(app_location_feature(&[p], Some(p), 50.0), 1.0);
    }

    #[test]
    fn location_at_bandwidth_distance() {
        // 50 m at h=50 m gives e^{-1/2} = 0.6065306597126334; the offset
        // helper is accurate to well under a millimeter at this scale.
        let p = GeoPoint::new(52.52, 13.405);
        let q = offset_m(p, 50.0, 0.0);
        let d = haversine_m(p, q);
        let v = app_location_feature(&[p], Some(q), 50.0);
        assert_abs_diff_eq!(v, (-d * d / 5000.0).exp(), epsilon = 1e-12);
        assert!((v - 0.60653).abs() <= 1e-4);
    }

    #[test]
    fn location_far_away_vanishes() {
        let p = GeoPoint::new(52.52, 13.405);
        let q = offset_m(p, 100_000.0, 0.0);
        assert_eq!(app_location_feature(&[p], Some(q), 1000.0), 0.0);
    }

    #[test]
    fn clicks_after_the_context_timestamp_are_invisible() {
        let mut hists = AppHistories::default();
        let app = AppId::new("a");
        let p = GeoPoint::new(40.0, -74.0);
        let q = offset_m(p, 30_000.0, 0.0);
        hists.record(&app, ts(86_400), Some(p));
        hists.record(&app, ts(3 * 86_400), Some(q));

        // Evaluated between the two clicks: identical to a one-click history.
        let mut mid = crate::event::ContextSnapshot::bare(ts(2 * 86_400));
        mid.geo = Some(p);
        let phi = app_features(hists.get(&app), &mid);
        assert_abs_diff_eq!(phi[0], app_recency_feature(&[ts(86_400)], mid.ts, 1.0), epsilon = 1e-15);
        assert_abs_diff_eq!(phi[6], 1.0); // only the co-located sample exists yet
        // Evaluated before any click: no history at all.
        let early = crate::event::ContextSnapshot::bare(ts(100));
        assert_eq!(app_features(hists.get(&app), &early), [0.0; D_PHI]);
        // At the second click's own timestamp both samples count.
        let mut late = crate::event::ContextSnapshot::bare(ts(3 * 86_400));
        late.geo = Some(p);
        let phi_late = app_features(hists.get(&app), &late);
        assert_abs_diff_eq!(phi_late[6], 0.5, epsilon = 1e-12); // far sample dilutes the mean
    }

    #[test]
    fn empty_history_and_missing_fix_are_zero() {
        let now = ts(100);
        assert_eq!(app_recency_feature(&[], now, 1.0), 0.0);
        assert_eq!(app_time_of_day_feature(&[], now, 60.0), 0.0);
        assert_eq!(app_location_feature(&[], Some(GeoPoint::new(0.0, 0.0)), 50.0), 0.0);
        assert_eq!(app_location_feature(&[GeoPoint::new(0.0, 0.0)], None, 50.0), 0.0);
    }

    // The assembled vector must agree coordinate-by-coordinate with the
    // single-bandwidth reference functions applied to the prefix of history
    // at or before the context timestamp. The now range overlaps the click
    // range so later-recorded clicks genuinely occur and must be ignored.
    proptest! {
        #[test]
        fn assembled_matches_reference(
            clicks in prop::collection::vec((0i64..40 * 86_400, prop::option::of((0..20i32, 0..20i32))), 0..60),
            now_s in 20i64 * 86_400..50 * 86_400,
            here in prop::option::of((0..20i32, 0..20i32)),
        ) {
            let base = GeoPoint::new(40.0, -74.0);
            let mut sorted = clicks;
            sorted.sort_by_key(|(s, _)| *s);
            let mut hists = AppHistories::default();
            let app = AppId::new("a");
            for (s, cell) in &sorted {
                let geo = cell.map(|(i, j)| offset_m(base, f64::from(i) * 25.0, f64::from(j) * 25.0));
                hists.record(&app, ts(*s), geo);
            }
            let mut ctx = crate::event::ContextSnapshot::bare(ts(now_s));
            ctx.geo = here.map(|(i, j)| offset_m(base, f64::from(i) * 25.0, f64::from(j) * 25.0));

            let phi = app_features(hists.get(&app), &ctx);
            let (times, locs) = match hists.get(&app) {
                Some(h) => (
                    h.times.iter().copied().filter(|t| t.seconds <= now_s).collect::<Vec<_>>(),
                    h.locs
                        .iter()
                        .filter(|(t, _)| t.seconds <= now_s)
                        .map(|(_, g)| *g)
                        .collect::<Vec<_>>(),
                ),
                None => {
                    prop_assert_eq!(phi, [0.0; D_PHI]);
                    return Ok(());
                }
            };
            for (i, h) in PHI1_BANDWIDTHS_DAYS.iter().enumerate() {
                prop_assert!((phi[i] - app_recency_feature(&times, ctx.ts, *h)).abs() < 1e-12);
            }
            for (i, h) in PHI2_BANDWIDTHS_SECS.iter().enumerate() {
                prop_assert!((phi[3 + i] - app_time_of_day_feature(&times, ctx.ts, *h)).abs() < 1e-12);
            }
            for (i, h) in PHI3_BANDWIDTHS_M.iter().enumerate() {
                prop_assert!((phi[6 + i] - app_location_feature(&locs, ctx.geo, *h)).abs() < 1e-12);
            }
            // Range invariants. The exact-math lower bound is open (exp is
            // never 0), but under f64 the exp underflows and φ1 saturates at
            // exactly 0.5 for ancient histories.
            for i in 0..3 {
                prop_assert!(phi[i] == 0.0 || (phi[i] >= 0.5 && phi[i] <= 1.0));
            }
            for i in 3..9 {
                prop_assert!((0.0..=1.0).contains(&phi[i]));
            }
        }

        #[test]
        fn permutation_and_duplication_invariant(
            times in prop::collection::vec(0i64..10 * 86_400, 1..30),
            now_s in 10i64 * 86_400..11 * 86_400,
            seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let now = ts(now_s);
            let tss: Vec<_> = times.iter().map(|s| ts(*s)).collect();
            let mut shuffled = tss.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha20Rng::seed_from_u64(seed));
            let mut doubled = tss.clone();
            doubled.extend_from_slice(&tss);
            for h in PHI1_BANDWIDTHS_DAYS {
                let base = app_recency_feature(&tss, now, h);
                prop_assert!((base - app_recency_feature(&shuffled, now, h)).abs() < 1e-12);
                prop_assert!((base - app_recency_feature(&doubled, now, h)).abs() < 1e-12);
            }
            for h in PHI2_BANDWIDTHS_SECS {
                let base = app_time_of_day_feature(&tss, now, h);
                prop_assert!((base - app_time_of_day_feature(&shuffled, now, h)).abs() < 1e-12);
                prop_assert!((base - app_time_of_day_feature(&doubled, now, h)).abs() < 1e-12);
            }
        }

        // Shifting every clock by a whole day changes nothing for φ2.
        #[test]
        fn time_of_day_is_circular(
            times in prop::collection::vec(0i64..86_400, 1..20),
            now_s in 0i64..86_400,
        ) {
            let tss: Vec<_> = times.iter().map(|s| ts(*s)).collect();
            let shifted: Vec<_> = times.iter().map(|s| ts(*s + 86_400)).collect();
            for h in PHI2_BANDWIDTHS_SECS {
                let a = app_time_of_day_feature(&tss, ts(now_s), h);
                let b = app_time_of_day_feature(&shifted, ts(now_s + 86_400), h);
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
