//! kMFU: the k most frequently used candidates, by lifetime click count.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::event::{AppId, ClickEvent, ContextSnapshot, PredictionSet};

use super::{Predictor, PredictorKind, UpdateReport};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct KmfuPredictor {
    counts: BTreeMap<AppId, u64>,
}

impl KmfuPredictor {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn counts(&self) -> &BTreeMap<AppId, u64> {
        &self.counts
    }
}

impl Predictor for KmfuPredictor {
    fn kind(&self) -> PredictorKind {
        PredictorKind::Kmfu
    }

    fn predict(&self, _ctx: &ContextSnapshot, candidates: &[AppId], k: usize) -> PredictionSet {
        let mut ranked: Vec<(&AppId, u64)> = candidates
            .iter()
            .filter_map(|a| {
                let n = self.counts.get(a).copied().unwrap_or(0);
                (n > 0).then_some((a, n))
            })
            .collect();
        ranked.sort_by(|(a1, n1), (a2, n2)| n2.cmp(n1).then_with(|| a1.cmp(a2)));
        ranked.truncate(k);
        // Membership is all that matters for a count ranking; every slot
        // reports the same unit score.
        PredictionSet::new(ranked.into_iter().map(|(a, _)| (a.clone(), 1.0)).collect())
    }

    fn observe(&mut self, click: &ClickEvent) -> UpdateReport {
        *self.counts.entry(click.app.clone()).or_insert(0) += 1;
        UpdateReport::inert()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::Slot;
    use crate::time::Timestamp;

    fn click(app: &str, ts: i64) -> ClickEvent {
        ClickEvent {
            device_id: "d".into(),
            ctx: ContextSnapshot::bare(Timestamp::utc(ts)),
            app: AppId::new(app),
            slot: Slot::AppTray,
        }
    }

    fn apps(ids: &[&str]) -> Vec<AppId> {
        ids.iter().map(|s| AppId::new(*s)).collect()
    }

    #[test]
    fn ranks_by_count() {
        let mut p = KmfuPredictor::new();
        for (app, n) in [("A", 10), ("B", 5), ("C", 3), ("D", 2), ("E", 1)] {
            for i in 0..n {
                p.observe(&click(app, i));
            }
        }
        let set = p.predict(&click("A", 0).ctx, &apps(&["A", "B", "C", "D", "E"]), 4);
        let got: Vec<&str> = set.apps().map(|a| a.as_str()).collect();
        assert_eq!(got, ["A", "B", "C", "D"]);
    }

    #[test]
    fn empty_before_any_click() {
        let p = KmfuPredictor::new();
        assert!(p.predict(&click("A", 0).ctx, &apps(&["A", "B"]), 4).is_empty());
    }

    #[test]
    fn fourth_place_tie_breaks_lexicographically() {
        let mut p = KmfuPredictor::new();
        for (app, n) in [("A", 10), ("B", 5), ("C", 3), ("E", 2), ("D", 2)] {
            for i in 0..n {
                p.observe(&click(app, i));
            }
        }
        let set = p.predict(&click("A", 0).ctx, &apps(&["A", "B", "C", "D", "E"]), 4);
        let got: Vec<&str> = set.apps().map(|a| a.as_str()).collect();
        assert_eq!(got, ["A", "B", "C", "D"]);
    }

    #[test]
    fn candidate_filter_applies() {
        let mut p = KmfuPredictor::new();
        for _ in 0..10 {
            p.observe(&click("home_app", 0));
        }
        p.observe(&click("B", 0));
        let set = p.predict(&click("B", 0).ctx, &apps(&["B"]), 4);
        let got: Vec<&str> = set.apps().map(|a| a.as_str()).collect();
        assert_eq!(got, ["B"]);
    }
}
