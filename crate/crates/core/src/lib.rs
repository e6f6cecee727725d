//! Online, per-device app-usage prediction.
//!
//! A device emits a stream of app-click events, each carrying the context in
//! which the click happened (time, location, hardware state). The crates in
//! this workspace learn from that stream and predict, at every moment, the
//! small set of apps the user is most likely to open next.
//!
//! The library is organized around five pieces:
//!
//! * [`event`] — domain types and the JSONL event-log schema shared by
//!   everything else (plus [`time`] and [`geo`] primitives).
//! * [`features`] — the contextual feature vector `psi(x)` and the
//!   app-dependent affinity features `phi(x, a)` built from per-app usage
//!   histories, known-location tracking and frecency scoring.
//! * [`predictors`] — three policies behind one trait: the kMFU and Frecency
//!   baselines and the AUC-PA online learner (a Passive-Aggressive update
//!   driven by a pairwise ranking hinge loss over sampled negative contexts).
//! * [`simulator`] — a seeded generator of multi-device click streams with
//!   context-dependent habits, used in place of proprietary device logs.
//! * [`eval`] — stream replay, metrics (precision, per-app precision,
//!   cumulative AUC, sliding windows, usage-rank curves) and an empirical
//!   check of the online learner's regret bound.

pub mod event;
pub mod eval;
pub mod features;
pub mod geo;
pub mod predictors;
pub mod simulator;
pub mod time;

pub use event::{AppId, ClickEvent, ContextSnapshot, PredictionSet, Slot};
pub use geo::GeoPoint;
pub use time::Timestamp;
