//! Frecency ranking: frequency discounted by recency, 60-day window.

use serde::{Deserialize, Serialize};

use crate::event::{AppId, ClickEvent, ContextSnapshot, PredictionSet};
use crate::features::frecency::{frecency, DEFAULT_P, DEFAULT_WINDOW_DAYS};
use crate::features::AppHistories;

use super::{Predictor, PredictorKind, UpdateReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrecencyPredictor {
    histories: AppHistories,
    pub p: f64,
    pub window_days: f64,
}

impl FrecencyPredictor {
    pub fn new(p: f64, window_days: f64) -> Self {
        Self { histories: AppHistories::default(), p, window_days }
    }

    pub fn score(&self, app: &AppId, now: crate::time::Timestamp) -> f64 {
        match self.histories.get(app) {
            Some(h) => frecency(h.times.iter().rev(), now, self.p, self.window_days),
            None => 0.0,
        }
    }
}

impl Default for FrecencyPredictor {
    fn default() -> Self {
        Self::new(DEFAULT_P, DEFAULT_WINDOW_DAYS)
    }
}

impl Predictor for FrecencyPredictor {
    fn kind(&self) -> PredictorKind {
        PredictorKind::Frecency
    }

    fn predict(&self, ctx: &ContextSnapshot, candidates: &[AppId], k: usize) -> PredictionSet {
        let mut ranked: Vec<(&AppId, f64)> = candidates
            .iter()
            .filter_map(|a| {
                let s = self.score(a, ctx.ts);
                (s > 0.0).then_some((a, s))
            })
            .collect();
        ranked.sort_by(|(a1, s1), (a2, s2)| {
            s2.partial_cmp(s1).unwrap().then_with(|| a1.cmp(a2))
        });
        ranked.truncate(k);
        PredictionSet::new(ranked.into_iter().map(|(a, s)| (a.clone(), s)).collect())
    }

    fn observe(&mut self, click: &ClickEvent) -> UpdateReport {
        // Only click times matter here; locations are not recorded.
        self.histories.record(&click.app, click.ctx.ts, None);
        UpdateReport::inert()
    }
}
