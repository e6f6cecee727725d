//! A predictor that reads the simulator's ground truth instead of learning.
//! Its precision is an upper reference line for the real policies: it ranks
//! candidates by the exact draw weights the stream was sampled from.

use std::collections::BTreeMap;

use crate::event::{AppId, ClickEvent, ContextSnapshot, PredictionSet};
use crate::geo::haversine_m;
use crate::predictors::{Predictor, PredictorKind, UpdateReport};
use crate::simulator::{Persona, StreamDynamics, Trigger, STREAM_EPOCH};
use crate::time::SECS_PER_DAY;

pub struct OraclePredictor {
    persona: Persona,
    dynamics: StreamDynamics,
    index_of: BTreeMap<AppId, usize>,
}

impl OraclePredictor {
    pub fn new(persona: Persona, dynamics: StreamDynamics) -> Self {
        let index_of = persona
            .installed
            .iter()
            .enumerate()
            .map(|(i, app)| (app.clone(), i))
            .collect();
        Self { persona, dynamics, index_of }
    }

    /// The stream's true draw weight for `app` in this context. Habit
    /// activation is reconstructed from the snapshot: window from local time,
    /// anchor from the geo fix (anchors are hundreds of meters apart, so a
    /// radius test is equivalent to schedule equality), trigger from the
    /// hardware flags.
    fn weight(&self, ctx: &ContextSnapshot, app: &AppId) -> f64 {
        let Some(&pos) = self.index_of.get(app) else {
            return 0.0;
        };
        let mut w = self.persona.base_popularity[pos];

        let weekday = ctx.ts.local_weekday() as u8;
        let hour = ctx.ts.local_hour();
        for rule in &self.persona.habits {
            if rule.app != *app || !rule.window_contains(weekday, hour) {
                continue;
            }
            if let (Some(anchor), Some(radius)) = (rule.anchor, rule.anchor_radius_m) {
                let at_anchor = ctx
                    .geo
                    .map(|g| haversine_m(g, self.persona.locations[anchor]) <= radius)
                    .unwrap_or(false);
                if !at_anchor {
                    continue;
                }
            }
            let triggered = match rule.trigger {
                None => true,
                Some(Trigger::Headphones) => ctx.headphones,
                Some(Trigger::Wifi) => ctx.wifi_connected,
                Some(Trigger::Bt) => ctx.bt_connected,
            };
            if triggered {
                w *= rule.multiplier;
            }
        }

        let day = (ctx.ts.local_seconds() - STREAM_EPOCH).div_euclid(SECS_PER_DAY);
        if day >= 0 {
            let day = day as usize;
            for burst in &self.dynamics.bursts {
                if burst.app_idx == pos && burst.active.get(day).copied().unwrap_or(false) {
                    w *= burst.multiplier;
                }
            }
            for riser in &self.dynamics.risers {
                if riser.app_idx == pos {
                    if let Some(v) = riser.weight_on(day) {
                        w = v;
                    }
                }
            }
        }
        w
    }
}

impl Predictor for OraclePredictor {
    fn kind(&self) -> PredictorKind {
        PredictorKind::Oracle
    }

    fn predict(&self, ctx: &ContextSnapshot, candidates: &[AppId], k: usize) -> PredictionSet {
        let mut scored: Vec<(AppId, f64)> =
            candidates.iter().map(|a| (a.clone(), self.weight(ctx, a))).collect();
        scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
        scored.truncate(k);
        PredictionSet::new(scored)
    }

    fn observe(&mut self, _click: &ClickEvent) -> UpdateReport {
        UpdateReport::inert()
    }
}
