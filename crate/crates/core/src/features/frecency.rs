//! Frecency: frequency discounted by recency. Each click contributes
//! p^(age/T); clicks older than the window T are out of scope entirely.

use crate::event::AppId;
use crate::time::Timestamp;

use super::history::AppHistories;

pub const DEFAULT_P: f64 = 0.1;
pub const DEFAULT_WINDOW_DAYS: f64 = 60.0;
/// Window for the ψ frecent-5 block: one hour.
pub const TOP5_WINDOW_DAYS: f64 = 1.0 / 24.0;

const SECS_PER_DAY_F: f64 = 86_400.0;

/// Σ p^((now − t_i)/T) over clicks aged at most T days (inclusive).
/// Callers pass click times newest-first (for a history deque,
/// `.iter().rev()`); the scan stops at the first click outside the window.
pub fn frecency<'a, I>(times_newest_first: I, now: Timestamp, p: f64, t_days: f64) -> f64
where
    I: IntoIterator<Item = &'a Timestamp>,
{
    debug_assert!(p > 0.0 && p < 1.0);
    debug_assert!(t_days > 0.0);
    let mut sum = 0.0;
    for t in times_newest_first {
        let age_days = now.seconds_since(*t).max(0) as f64 / SECS_PER_DAY_F;
        if age_days > t_days {
            break;
        }
        sum += p.powf(age_days / t_days);
    }
    sum
}

/// The up-to-5 most frecent apps under the 1-hour window, best first.
/// Apps scoring zero are left out; ties break by app id for determinism.
pub fn frecent_top5(histories: &AppHistories, now: Timestamp, p: f64) -> Vec<(AppId, f64)> {
    let mut scored: Vec<(AppId, f64)> = Vec::new();
    for (app, hist) in histories.iter() {
        let s = frecency(hist.times.iter().rev(), now, p, TOP5_WINDOW_DAYS);
        if s > 0.0 {
            scored.push((app.clone(), s));
        }
    }
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
    scored.truncate(5);
    scored
}
