//! The AUC-PA online learner: a passive-aggressive update on
//! positive/negative context pairs that directly targets per-app AUC.
//!
//! Score: f_θ(x,a) = w·φ(x,a) + w^a·ψ(x), evaluated on the norm-capped
//! stacked joint vector. One click is one round: sample a stored negative
//! context for the clicked app, find the hardest competing app on it, and
//! close the margin with the minimal weight change.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::FRAC_1_SQRT_2;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::event::{AppId, ClickEvent, ContextSnapshot, PredictionSet};
use crate::features::frecency::frecent_top5;
use crate::features::{
    app_features, contextual_features, AppFeatureVector, AppHistories, FeatureParams,
    KnownLocationStore, SparseVec, D_PHI, D_PSI,
};

use super::negatives::{NegContext, NegativeStore};
use super::{NegSide, PairRecord, Predictor, PredictorKind, SkipReason, UpdateReport};

pub const DEFAULT_C: f64 = 0.02;
pub const DEFAULT_K: usize = 4;
pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AucPaParams {
    /// Aggressiveness C; the regularizer is λ = 1/C, capping τ at 1/λ = C.
    pub c: f64,
    pub features: FeatureParams,
    /// Recompute the hinge on the same pair after each update.
    pub verify_updates: bool,
    /// Return each round's loss instance for post-hoc regret checks.
    pub record_pairs: bool,
}

impl AucPaParams {
    pub fn lambda(&self) -> f64 {
        1.0 / self.c
    }
}

impl Default for AucPaParams {
    fn default() -> Self {
        Self {
            c: DEFAULT_C,
            features: FeatureParams::default(),
            verify_updates: false,
            record_pairs: false,
        }
    }
}

/// max{0, 1 − f(x⁺,a) + f(x⁻,â⁻)}
pub fn hinge_loss(f_pos: f64, f_neg: f64) -> f64 {
    (1.0 - f_pos + f_neg).max(0.0)
}

/// τ = min{1/λ, ℓ/‖Δ‖²}. A zero-norm diff with positive loss caps at 1/λ;
/// the caller decides whether to apply it (we skip and flag).
pub fn compute_tau(loss: f64, diff_sq_norm: f64, lambda: f64) -> f64 {
    if diff_sq_norm == 0.0 {
        return if loss == 0.0 { 0.0 } else { 1.0 / lambda };
    }
    (loss / diff_sq_norm).min(1.0 / lambda)
}

/// Scale putting the stacked (φ ⊕ ψ) vector inside the 1/√2 ball.
fn joint_cap(norm_sq: f64) -> f64 {
    let n = norm_sq.sqrt();
    if n > FRAC_1_SQRT_2 {
        FRAC_1_SQRT_2 / n
    } else {
        1.0
    }
}

fn dot_phi(w: &[f64], phi: &AppFeatureVector) -> f64 {
    w.iter().zip(phi.iter()).map(|(a, b)| a * b).sum()
}

/// The update direction Δ = z⁺(a_t) − z⁻(â⁻) in stacked weight space.
struct JointDelta {
    phi: [f64; D_PHI],
    psi: BTreeMap<AppId, Vec<(u32, f64)>>,
}

impl JointDelta {
    fn norm_sq(&self) -> f64 {
        let mut n: f64 = self.phi.iter().map(|v| v * v).sum();
        for block in self.psi.values() {
            n += block.iter().map(|(_, v)| v * v).sum::<f64>();
        }
        n
    }
}

#[derive(Debug, Clone)]
pub struct AucPaModel {
    params: AucPaParams,
    w: Vec<f64>,
    w_a: BTreeMap<AppId, Vec<f64>>,
    installed: BTreeSet<AppId>,
    histories: AppHistories,
    locations: KnownLocationStore,
    negatives: NegativeStore,
    rng: ChaCha20Rng,
    /// Prediction rounds processed (first-tier clicks excluded).
    round: u64,
}

/// Full model state as one JSON-serializable document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSnapshot {
    pub version: u32,
    pub lambda: f64,
    pub hash_seed: u64,
    pub params: AucPaParams,
    pub w: Vec<f64>,
    pub w_a: BTreeMap<AppId, Vec<f64>>,
    pub installed: BTreeSet<AppId>,
    pub reservoirs: NegativeStore,
    pub histories: AppHistories,
    pub locations: KnownLocationStore,
    pub rng: ChaCha20Rng,
    pub round: u64,
}

#[derive(Debug, thiserror::Error)]
pub enum SnapshotError {
    #[error("unsupported snapshot version {0}, expected {SNAPSHOT_VERSION}")]
    Version(u32),
    #[error("snapshot field {0} is inconsistent: {1}")]
    Invalid(&'static str, String),
}

impl AucPaModel {
    pub fn new(params: AucPaParams, seed: u64) -> Self {
        let caps = (params.features.history_time_cap, params.features.history_geo_cap);
        Self {
            params,
            w: vec![0.0; D_PHI],
            w_a: BTreeMap::new(),
            installed: BTreeSet::new(),
            histories: AppHistories::new(caps.0, caps.1),
            locations: KnownLocationStore::new(),
            negatives: NegativeStore::new(),
            rng: ChaCha20Rng::seed_from_u64(seed),
            round: 0,
        }
    }

    pub fn params(&self) -> &AucPaParams {
        &self.params
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn w(&self) -> &[f64] {
        &self.w
    }

    pub fn w_a(&self) -> &BTreeMap<AppId, Vec<f64>> {
        &self.w_a
    }

    pub fn installed(&self) -> &BTreeSet<AppId> {
        &self.installed
    }

    /// ‖θ‖² over the full stacked space.
    pub fn weight_norm_sq(&self) -> f64 {
        let mut n: f64 = self.w.iter().map(|v| v * v).sum();
        for block in self.w_a.values() {
            n += block.iter().map(|v| v * v).sum::<f64>();
        }
        n
    }

    /// ψ(x) for a context, consistent between predict (pure probe) and
    /// observe (store already updated).
    fn psi(&self, ctx: &ContextSnapshot) -> SparseVec {
        let loc = self.locations.state_for(ctx.geo, ctx.ts);
        let frecent5 = frecent_top5(&self.histories, ctx.ts, self.params.features.frecency_p);
        contextual_features(ctx, &loc, &frecent5, &self.params.features)
    }

    /// (score, cap) for one app against prepared (φ, ψ) features.
    fn score_joint(&self, app: &AppId, phi: &AppFeatureVector, psi: &SparseVec, psi_norm_sq: f64) -> (f64, f64) {
        let phi_norm_sq: f64 = phi.iter().map(|v| v * v).sum();
        let cap = joint_cap(phi_norm_sq + psi_norm_sq);
        let mut s = dot_phi(&self.w, phi);
        if let Some(wa) = self.w_a.get(app) {
            s += psi.dot_dense(wa);
        }
        (cap * s, cap)
    }

    /// Standalone score f_θ(x,a); recomputes features, intended for tests
    /// and oracles rather than hot paths.
    pub fn score(&self, ctx: &ContextSnapshot, app: &AppId) -> f64 {
        let psi = self.psi(ctx);
        let psi_norm_sq = psi.norm_sq();
        let phi = app_features(self.histories.get(app), ctx);
        self.score_joint(app, &phi, &psi, psi_norm_sq).0
    }

    fn frecency_of(&self, app: &AppId, now: crate::time::Timestamp) -> f64 {
        match self.histories.get(app) {
            Some(h) => crate::features::frecency::frecency(
                h.times.iter().rev(),
                now,
                self.params.features.frecency_p,
                self.params.features.frecency_window_days,
            ),
            None => 0.0,
        }
    }

    pub fn snapshot(&self) -> ModelSnapshot {
        ModelSnapshot {
            version: SNAPSHOT_VERSION,
            lambda: self.params.lambda(),
            hash_seed: self.params.features.hash_seed,
            params: self.params.clone(),
            w: self.w.clone(),
            w_a: self.w_a.clone(),
            installed: self.installed.clone(),
            reservoirs: self.negatives.clone(),
            histories: self.histories.clone(),
            locations: self.locations.clone(),
            rng: self.rng.clone(),
            round: self.round,
        }
    }

    pub fn restore(snap: ModelSnapshot) -> Result<Self, SnapshotError> {
        if snap.version != SNAPSHOT_VERSION {
            return Err(SnapshotError::Version(snap.version));
        }
        if (snap.lambda - snap.params.lambda()).abs() > 1e-9 {
            return Err(SnapshotError::Invalid(
                "lambda",
                format!("{} does not match 1/C = {}", snap.lambda, snap.params.lambda()),
            ));
        }
        if snap.hash_seed != snap.params.features.hash_seed {
            return Err(SnapshotError::Invalid("hash_seed", "differs from params".into()));
        }
        if snap.w.len() != D_PHI {
            return Err(SnapshotError::Invalid("w", format!("length {}", snap.w.len())));
        }
        if !snap.w.iter().all(|v| v.is_finite()) {
            return Err(SnapshotError::Invalid("w", "non-finite weight".into()));
        }
        for (app, block) in &snap.w_a {
            if block.len() != D_PSI || !block.iter().all(|v| v.is_finite()) {
                return Err(SnapshotError::Invalid(
                    "w_a",
                    format!("block for {app} has length {} or non-finite entries", block.len()),
                ));
            }
        }
        Ok(Self {
            params: snap.params,
            w: snap.w,
            w_a: snap.w_a,
            installed: snap.installed,
            histories: snap.histories,
            locations: snap.locations,
            negatives: snap.reservoirs,
            rng: snap.rng,
            round: snap.round,
        })
    }

    /// The learning step for one second-tier click. ψ⁺ is precomputed by
    /// observe. Returns the report; weight mutation happens in here.
    fn learn(&mut self, click: &ClickEvent, psi_pos: &SparseVec) -> UpdateReport {
        let app = &click.app;
        let neg = match self
            .negatives
            .reservoir(app)
            .and_then(|r| r.sample(&mut self.rng))
        {
            Some(n) => Arc::clone(n),
            None => return UpdateReport::skipped(SkipReason::EmptyNegatives),
        };

        let psi_pos_norm_sq = psi_pos.norm_sq();
        let phi_pos = app_features(self.histories.get(app), &click.ctx);
        let (f_pos, cap_pos) = self.score_joint(app, &phi_pos, psi_pos, psi_pos_norm_sq);

        // â⁻ = argmax over installed apps of f(x⁻,a); strict comparison keeps
        // the lexicographically first app on ties. φ(x⁻,·) is evaluated
        // against current histories; ψ(x⁻) was frozen at capture.
        let mut neg_ctx = ContextSnapshot::bare(neg.ts);
        neg_ctx.geo = neg.geo;
        let psi_neg_norm_sq = neg.psi.norm_sq();
        let mut best: Option<(AppId, f64, f64, AppFeatureVector)> = None;
        let mut best_idx = 0;
        let mut f_neg_at = 0.0;
        let mut sides: Vec<NegSide> = Vec::new();
        for (idx, a) in self.installed.iter().enumerate() {
            let phi = app_features(self.histories.get(a), &neg_ctx);
            let (s, cap) = self.score_joint(a, &phi, &neg.psi, psi_neg_norm_sq);
            if a == app {
                f_neg_at = s;
            }
            if best.as_ref().map_or(true, |(_, bs, _, _)| s > *bs) {
                best = Some((a.clone(), s, cap, phi));
                best_idx = idx;
            }
            if self.params.record_pairs {
                sides.push(NegSide { app: a.clone(), cap, phi });
            }
        }
        let (neg_app, f_neg, cap_neg, phi_neg) =
            best.expect("installed set contains at least the clicked app");

        let loss = hinge_loss(f_pos, f_neg);
        let indicator = f_pos > f_neg_at;

        // Δ = joint⁺(a_t) − joint⁻(â⁻) in stacked space.
        let mut delta = JointDelta { phi: [0.0; D_PHI], psi: BTreeMap::new() };
        for i in 0..D_PHI {
            delta.phi[i] = cap_pos * phi_pos[i] - cap_neg * phi_neg[i];
        }
        {
            let pos_block = delta.psi.entry(app.clone()).or_default();
            for (i, v) in psi_pos.iter() {
                pos_block.push((i, cap_pos * v));
            }
        }
        {
            let neg_block = delta.psi.entry(neg_app.clone()).or_default();
            if neg_app == *app {
                // Same app on both sides: merge the two sparse blocks.
                let mut merged: BTreeMap<u32, f64> =
                    neg_block.iter().copied().collect();
                for (i, v) in neg.psi.iter() {
                    *merged.entry(i).or_insert(0.0) -= cap_neg * v;
                }
                *neg_block = merged.into_iter().collect();
            } else {
                for (i, v) in neg.psi.iter() {
                    neg_block.push((i, -cap_neg * v));
                }
            }
        }

        let norm_sq = delta.norm_sq();
        let tau = compute_tau(loss, norm_sq, self.params.lambda());

        let mut report = UpdateReport {
            loss,
            tau,
            negative_app: Some(neg_app.clone()),
            auc_indicator: Some(indicator),
            skipped: None,
            post_loss: None,
            pair: None,
        };

        if loss > 0.0 && norm_sq == 0.0 {
            report.skipped = Some(SkipReason::DegenerateDiff);
        } else if loss > 0.0 {
            // θ ← θ + τ·Δ. Zero-loss rounds skip this entirely so passive
            // steps leave weights bit-identical.
            for i in 0..D_PHI {
                self.w[i] += tau * delta.phi[i];
            }
            for (a, block) in &delta.psi {
                let wa = self.w_a.entry(a.clone()).or_insert_with(|| vec![0.0; D_PSI]);
                for (i, v) in block {
                    wa[*i as usize] += tau * v;
                }
            }
        }

        if self.params.verify_updates && report.skipped.is_none() {
            // Honest recompute of the margin against the mutated weights.
            let mut dot = dot_phi(&self.w, &delta.phi);
            for (a, block) in &delta.psi {
                if let Some(wa) = self.w_a.get(a) {
                    dot += block.iter().map(|(i, v)| wa[*i as usize] * v).sum::<f64>();
                }
            }
            report.post_loss = Some((1.0 - dot).max(0.0));
        }
        if self.params.record_pairs {
            report.pair = Some(PairRecord {
                loss,
                indicator,
                pos_app: app.clone(),
                pos_cap: cap_pos,
                pos_phi: phi_pos,
                pos_psi: psi_pos.clone(),
                neg_psi: neg.psi.clone(),
                negatives: sides,
                chosen: best_idx,
            });
        }
        report
    }
}

impl Predictor for AucPaModel {
    fn kind(&self) -> PredictorKind {
        PredictorKind::AucPa
    }

    fn predict(&self, ctx: &ContextSnapshot, candidates: &[AppId], k: usize) -> PredictionSet {
        if candidates.is_empty() || k == 0 {
            return PredictionSet::empty();
        }
        let psi = self.psi(ctx);
        let psi_norm_sq = psi.norm_sq();
        let mut scored: Vec<(&AppId, f64)> = candidates
            .iter()
            .map(|a| {
                let phi = app_features(self.histories.get(a), ctx);
                (a, self.score_joint(a, &phi, &psi, psi_norm_sq).0)
            })
            .collect();
        scored.sort_by(|(a1, s1), (a2, s2)| s2.partial_cmp(s1).unwrap().then_with(|| a1.cmp(a2)));

        // Ties among positive scores break by higher frecency first; resolve
        // lazily so the common tie-free case pays nothing.
        let mut i = 0;
        while i < scored.len() {
            let mut j = i + 1;
            while j < scored.len() && scored[j].1 == scored[i].1 {
                j += 1;
            }
            if j - i > 1 && scored[i].1 > 0.0 {
                let mut group: Vec<(&AppId, f64, f64)> = scored[i..j]
                    .iter()
                    .map(|(a, s)| (*a, *s, self.frecency_of(a, ctx.ts)))
                    .collect();
                group.sort_by(|(a1, _, f1), (a2, _, f2)| {
                    f2.partial_cmp(f1).unwrap().then_with(|| a1.cmp(a2))
                });
                for (slot, (a, s, _)) in scored[i..j].iter_mut().zip(group) {
                    *slot = (a, s);
                }
            }
            i = j;
        }

        let mut entries: Vec<(AppId, f64)> = scored
            .iter()
            .take(k)
            .filter(|(_, s)| *s > 0.0)
            .map(|(a, s)| ((*a).clone(), *s))
            .collect();

        // Cold-start fallback: remaining slots go to the most frecent
        // leftover candidates, reported at score 0 (they carry rank order,
        // not model confidence).
        if entries.len() < k {
            let chosen: BTreeSet<&AppId> = scored
                .iter()
                .take(entries.len())
                .map(|(a, _)| *a)
                .collect();
            let mut rest: Vec<(&AppId, f64)> = candidates
                .iter()
                .filter(|a| !chosen.contains(a))
                .filter_map(|a| {
                    let f = self.frecency_of(a, ctx.ts);
                    (f > 0.0).then_some((a, f))
                })
                .collect();
            rest.sort_by(|(a1, f1), (a2, f2)| f2.partial_cmp(f1).unwrap().then_with(|| a1.cmp(a2)));
            for (a, _) in rest.into_iter().take(k - entries.len()) {
                entries.push((a.clone(), 0.0));
            }
        }
        PredictionSet::new(entries)
    }

    fn observe(&mut self, click: &ClickEvent) -> UpdateReport {
        let ctx = &click.ctx;
        // New installs are legal mid-stream; first sighting registers.
        self.installed.insert(click.app.clone());
        self.locations.update(ctx.geo, ctx.ts);
        let psi = self.psi(ctx);

        let report = if click.slot.is_first_tier() {
            UpdateReport::skipped(SkipReason::FirstTier)
        } else {
            self.round += 1;
            self.learn(click, &psi)
        };

        // Every click, first-tier included, is context/usage evidence: store
        // the context as a negative for the apps not clicked, then append
        // histories.
        let neg_ctx = Arc::new(NegContext { psi, ts: ctx.ts, geo: ctx.geo });
        let installed = std::mem::take(&mut self.installed);
        self.negatives.offer_all(installed.iter(), &click.app, &neg_ctx, &mut self.rng);
        self.installed = installed;
        self.histories.record(&click.app, ctx.ts, ctx.geo);
        report
    }
}
