//! Post-hoc check of the online AUC regret bound
//! 1 − ÂUC ≤ (λ/T)‖u‖² + (2/T)·Σ_t ℓ_t(u)
//! against an arbitrary comparator u, using the loss instances recorded in
//! the trace. Each round's ℓ_t(u) re-runs the max over negative apps under
//! u's own weights, not the argmax the learner picked.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::RoundRecord;
use crate::event::AppId;
use crate::features::{D_PHI, D_PSI};
use crate::predictors::AucPaModel;

/// A fixed weight vector u = (w, w^a ...) to plug into the bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparator {
    pub label: String,
    pub w: Vec<f64>,
    pub w_a: BTreeMap<AppId, Vec<f64>>,
}

impl Comparator {
    pub fn zero() -> Self {
        Self { label: "zero".to_string(), w: vec![0.0; D_PHI], w_a: BTreeMap::new() }
    }

    /// The learner's own final weights.
    pub fn from_model(model: &AucPaModel) -> Self {
        Self {
            label: "final".to_string(),
            w: model.w().to_vec(),
            w_a: model.w_a().clone(),
        }
    }

    /// Gaussian direction over the shared block plus one ψ block per app,
    /// scaled to ‖u‖ = 1.
    pub fn random_unit(apps: &[AppId], index: usize, rng: &mut ChaCha20Rng) -> Self {
        let mut w: Vec<f64> = (0..D_PHI).map(|_| rng.sample(StandardNormal)).collect();
        let mut w_a: BTreeMap<AppId, Vec<f64>> = apps
            .iter()
            .map(|a| {
                let block: Vec<f64> = (0..D_PSI).map(|_| rng.sample(StandardNormal)).collect();
                (a.clone(), block)
            })
            .collect();
        let norm = {
            let mut sq: f64 = w.iter().map(|v| v * v).sum();
            sq += w_a.values().flatten().map(|v| v * v).sum::<f64>();
            sq.sqrt()
        };
        if norm > 0.0 {
            for v in w.iter_mut() {
                *v /= norm;
            }
            for block in w_a.values_mut() {
                for v in block.iter_mut() {
                    *v /= norm;
                }
            }
        }
        Self { label: format!("random:{index}"), w, w_a }
    }

    pub fn norm_sq(&self) -> f64 {
        self.w.iter().map(|v| v * v).sum::<f64>()
            + self.w_a.values().flatten().map(|v| v * v).sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BoundError {
    /// No round in the trace formed a positive/negative pair.
    Empty,
    /// Pairs were not recorded for some rounds; rerun with pair recording on.
    MissingPairs { rounds: u64, missing: u64 },
}

impl fmt::Display for BoundError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundError::Empty => write!(f, "trace has no paired rounds to bound"),
            BoundError::MissingPairs { rounds, missing } => write!(
                f,
                "{missing} of {rounds} paired rounds lack stored loss instances; \
                 rerun with pair recording enabled"
            ),
        }
    }
}

impl std::error::Error for BoundError {}

/// One comparator's evaluation of the bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub comparator: String,
    pub lambda: f64,
    /// The theorem assumes λ ≤ 1; outside that the numbers are still
    /// reported but carry no guarantee.
    pub within_hypothesis: bool,
    /// T: rounds that formed a pair.
    pub rounds: u64,
    pub cumulative_auc: f64,
    /// 1 − ÂUC.
    pub lhs: f64,
    pub comparator_norm_sq: f64,
    pub total_comparator_loss: f64,
    /// (λ/T)‖u‖² + (2/T)Σℓ.
    pub rhs: f64,
    pub slack: f64,
    pub holds: bool,
}

/// Tolerance soaking up float accumulation across a long loss sum.
const BOUND_EPS: f64 = 1e-9;

pub fn regret_bound_check(
    rounds: &[RoundRecord],
    u: &Comparator,
    lambda: f64,
) -> Result<BoundReport, BoundError> {
    let mut t = 0u64;
    let mut ordered = 0u64;
    let mut missing = 0u64;
    let mut total_loss = 0.0f64;
    for r in rounds {
        let Some(indicator) = r.auc_indicator else {
            continue;
        };
        t += 1;
        ordered += u64::from(indicator);
        match &r.pair {
            Some(pair) => total_loss += pair.comparator_loss(&u.w, &u.w_a),
            None => missing += 1,
        }
    }
    if t == 0 {
        return Err(BoundError::Empty);
    }
    if missing > 0 {
        return Err(BoundError::MissingPairs { rounds: t, missing });
    }

    let tf = t as f64;
    let cumulative_auc = ordered as f64 / tf;
    let lhs = 1.0 - cumulative_auc;
    let norm_sq = u.norm_sq();
    let rhs = lambda * norm_sq / tf + 2.0 * (total_loss / tf);
    Ok(BoundReport {
        comparator: u.label.clone(),
        lambda,
        within_hypothesis: lambda <= 1.0,
        rounds: t,
        cumulative_auc,
        lhs,
        comparator_norm_sq: norm_sq,
        total_comparator_loss: total_loss,
        rhs,
        slack: rhs - lhs,
        holds: lhs <= rhs + BOUND_EPS,
    })
}
