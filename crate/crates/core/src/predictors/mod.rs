//! The three prediction policies behind one interface: count-based kMFU,
//! Frecency, and the AUC-PA online learner.

pub mod aucpa;
pub mod frecency;
pub mod kmfu;
pub mod negatives;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::event::{AppId, ClickEvent, ContextSnapshot, PredictionSet};
use crate::features::{SparseVec, D_PHI};

pub use aucpa::{AucPaModel, AucPaParams, ModelSnapshot};
pub use frecency::FrecencyPredictor;
pub use kmfu::KmfuPredictor;
pub use negatives::{NegContext, NegativeStore, RESERVOIR_CAPACITY};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictorKind {
    Kmfu,
    Frecency,
    AucPa,
    /// Simulator ground truth; an evaluation ceiling, not a real policy.
    Oracle,
}

impl PredictorKind {
    /// The three deployable policies; the oracle is excluded on purpose.
    pub const ALL: [PredictorKind; 3] =
        [PredictorKind::Kmfu, PredictorKind::Frecency, PredictorKind::AucPa];

    pub fn as_str(&self) -> &'static str {
        match self {
            PredictorKind::Kmfu => "kmfu",
            PredictorKind::Frecency => "frecency",
            PredictorKind::AucPa => "aucpa",
            PredictorKind::Oracle => "oracle",
        }
    }
}

impl fmt::Display for PredictorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PredictorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "kmfu" => Ok(PredictorKind::Kmfu),
            "frecency" => Ok(PredictorKind::Frecency),
            "aucpa" => Ok(PredictorKind::AucPa),
            "oracle" => Ok(PredictorKind::Oracle),
            other => Err(format!("unknown predictor {other:?} (kmfu, frecency, aucpa)")),
        }
    }
}

/// Why an observe call performed no weight update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipReason {
    /// Home-screen/dock click: usage evidence only, outside the prediction
    /// task.
    FirstTier,
    /// No negative context stored yet for the clicked app.
    EmptyNegatives,
    /// diff norm is exactly zero with positive loss; update undefined.
    DegenerateDiff,
}

/// One candidate app evaluated on the stored negative context: its uncapped
/// φ(x⁻,a) and the norm cap its joint vector received.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NegSide {
    pub app: AppId,
    pub cap: f64,
    pub phi: [f64; D_PHI],
}

/// One round's full loss instance: both contexts' features and every
/// installed app's φ on the negative side, so the round's hinge loss can be
/// re-evaluated for an arbitrary comparator, including the comparator's own
/// argmax over negative apps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub loss: f64,
    pub indicator: bool,
    pub pos_app: AppId,
    pub pos_cap: f64,
    pub pos_phi: [f64; D_PHI],
    pub pos_psi: SparseVec,
    pub neg_psi: SparseVec,
    /// All installed apps at this round, the argmax domain.
    pub negatives: Vec<NegSide>,
    /// Index into `negatives` of the â⁻ the algorithm itself picked.
    pub chosen: usize,
}

impl PairRecord {
    fn side_score(
        w: &[f64],
        w_a: &BTreeMap<AppId, Vec<f64>>,
        app: &AppId,
        cap: f64,
        phi: &[f64; D_PHI],
        psi: &SparseVec,
    ) -> f64 {
        let mut s: f64 = w.iter().zip(phi.iter()).map(|(a, b)| a * b).sum();
        if let Some(block) = w_a.get(app) {
            s += psi.dot_dense(block);
        }
        cap * s
    }

    /// f_u(x⁺, a_t) for comparator weights u.
    pub fn pos_score(&self, w: &[f64], w_a: &BTreeMap<AppId, Vec<f64>>) -> f64 {
        Self::side_score(w, w_a, &self.pos_app, self.pos_cap, &self.pos_phi, &self.pos_psi)
    }

    /// f_u(x⁻, negatives[i]) for comparator weights u.
    pub fn neg_score(&self, i: usize, w: &[f64], w_a: &BTreeMap<AppId, Vec<f64>>) -> f64 {
        let n = &self.negatives[i];
        Self::side_score(w, w_a, &n.app, n.cap, &n.phi, &self.neg_psi)
    }

    /// ℓ(u) on this round: max{0, 1 − f_u(x⁺,a_t) + max_a f_u(x⁻,a)}, the
    /// max running over the comparator's own choice of negative app.
    pub fn comparator_loss(&self, w: &[f64], w_a: &BTreeMap<AppId, Vec<f64>>) -> f64 {
        let pos = self.pos_score(w, w_a);
        let neg = (0..self.negatives.len())
            .map(|i| self.neg_score(i, w, w_a))
            .fold(f64::NEG_INFINITY, f64::max);
        (1.0 - pos + neg).max(0.0)
    }

    /// ‖Δ_t‖² of the algorithm's own update direction (its chosen â⁻).
    pub fn delta_norm_sq(&self) -> f64 {
        let n = &self.negatives[self.chosen];
        let mut sq = 0.0;
        for i in 0..D_PHI {
            let d = self.pos_cap * self.pos_phi[i] - n.cap * n.phi[i];
            sq += d * d;
        }
        if n.app == self.pos_app {
            // Same app on both sides: the ψ blocks overlap coordinate-wise.
            let mut merged: BTreeMap<u32, f64> = BTreeMap::new();
            for (i, v) in self.pos_psi.iter() {
                *merged.entry(i).or_insert(0.0) += self.pos_cap * v;
            }
            for (i, v) in self.neg_psi.iter() {
                *merged.entry(i).or_insert(0.0) -= n.cap * v;
            }
            sq += merged.values().map(|v| v * v).sum::<f64>();
        } else {
            sq += self.pos_cap * self.pos_cap * self.pos_psi.norm_sq();
            sq += n.cap * n.cap * self.neg_psi.norm_sq();
        }
        sq
    }
}

/// What one observe call did.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateReport {
    pub loss: f64,
    pub tau: f64,
    pub negative_app: Option<AppId>,
    /// Pre-update I[f(x⁺,a_t) > f(x⁻,a_t)]; None when no pair was formed.
    pub auc_indicator: Option<bool>,
    pub skipped: Option<SkipReason>,
    /// Hinge loss on the same pair recomputed after the update, when
    /// verification is enabled.
    pub post_loss: Option<f64>,
    /// The round's loss instance, when pair recording is enabled.
    pub pair: Option<PairRecord>,
}

impl UpdateReport {
    /// Nothing happened beyond bookkeeping (baselines, passive rounds).
    pub fn inert() -> Self {
        Self {
            loss: 0.0,
            tau: 0.0,
            negative_app: None,
            auc_indicator: None,
            skipped: None,
            post_loss: None,
            pair: None,
        }
    }

    pub fn skipped(reason: SkipReason) -> Self {
        Self { skipped: Some(reason), ..Self::inert() }
    }
}

/// Uniform surface over the three policies. `predict` must not mutate;
/// `observe` is the only mutator.
pub trait Predictor: Send {
    fn kind(&self) -> PredictorKind;

    /// Top-k apps for this context out of `candidates`. An empty candidate
    /// set yields an empty prediction.
    fn predict(&self, ctx: &ContextSnapshot, candidates: &[AppId], k: usize) -> PredictionSet;

    fn observe(&mut self, click: &ClickEvent) -> UpdateReport;
}

impl<T: Predictor + ?Sized> Predictor for Box<T> {
    fn kind(&self) -> PredictorKind {
        (**self).kind()
    }

    fn predict(&self, ctx: &ContextSnapshot, candidates: &[AppId], k: usize) -> PredictionSet {
        (**self).predict(ctx, candidates, k)
    }

    fn observe(&mut self, click: &ClickEvent) -> UpdateReport {
        (**self).observe(click)
    }
}
