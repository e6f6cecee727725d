//! Per-app negative-context reservoirs. A context is negative for app `a`
//! when it was captured at a click on some other app; each reservoir keeps a
//! uniform sample (capacity 64) of every qualifying context it was offered.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::event::AppId;
use crate::features::SparseVec;
use crate::geo::GeoPoint;
use crate::time::Timestamp;

pub const RESERVOIR_CAPACITY: usize = 64;

/// A captured context: the frozen ψ(x) plus the raw primitives needed to
/// recompute φ(x,·) later against whatever the histories hold by then.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NegContext {
    pub psi: SparseVec,
    pub ts: Timestamp,
    pub geo: Option<GeoPoint>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Reservoir {
    items: Vec<Arc<NegContext>>,
    /// Qualifying contexts offered so far, for Algorithm R.
    seen: u64,
}

impl Reservoir {
    pub fn items(&self) -> &[Arc<NegContext>] {
        &self.items
    }

    pub fn seen(&self) -> u64 {
        self.seen
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    fn offer(&mut self, ctx: &Arc<NegContext>, capacity: usize, rng: &mut impl Rng) {
        self.seen += 1;
        if self.items.len() < capacity {
            self.items.push(Arc::clone(ctx));
        } else {
            let j = rng.gen_range(0..self.seen);
            if (j as usize) < capacity {
                self.items[j as usize] = Arc::clone(ctx);
            }
        }
    }

    /// Uniform draw; the reservoir itself is a uniform sample of everything
    /// seen, so this is uniform over qualifying history.
    pub fn sample(&self, rng: &mut impl Rng) -> Option<&Arc<NegContext>> {
        if self.items.is_empty() {
            None
        } else {
            let i = rng.gen_range(0..self.items.len());
            Some(&self.items[i])
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct NegativeStore {
    reservoirs: BTreeMap<AppId, Reservoir>,
}

impl NegativeStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Offers `ctx` (captured at a click on `clicked`) to every app in
    /// `installed` except the clicked one. Iterates in sorted app order so
    /// the RNG consumption is deterministic.
    pub fn offer_all<'a>(
        &mut self,
        installed: impl Iterator<Item = &'a AppId>,
        clicked: &AppId,
        ctx: &Arc<NegContext>,
        rng: &mut impl Rng,
    ) {
        for app in installed {
            if app != clicked {
                self.reservoirs
                    .entry(app.clone())
                    .or_default()
                    .offer(ctx, RESERVOIR_CAPACITY, rng);
            }
        }
    }

    pub fn reservoir(&self, app: &AppId) -> Option<&Reservoir> {
        self.reservoirs.get(app)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&AppId, &Reservoir)> {
        self.reservoirs.iter()
    }
}

// Snapshots dedupe shared contexts through an explicit pool: every Arc is
// serialized once and reservoirs store indices. Pool order is first
// occurrence during a sorted walk, so byte output is deterministic.
#[derive(Serialize, Deserialize)]
struct StoreWire {
    pool: Vec<NegContext>,
    reservoirs: BTreeMap<AppId, ReservoirWire>,
}

#[derive(Serialize, Deserialize)]
struct ReservoirWire {
    items: Vec<u32>,
    seen: u64,
}

impl Serialize for NegativeStore {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut pool: Vec<NegContext> = Vec::new();
        let mut index: BTreeMap<usize, u32> = BTreeMap::new();
        let mut reservoirs = BTreeMap::new();
        for (app, res) in &self.reservoirs {
            let mut items = Vec::with_capacity(res.items.len());
            for ctx in &res.items {
                let key = Arc::as_ptr(ctx) as usize;
                let id = *index.entry(key).or_insert_with(|| {
                    pool.push((**ctx).clone());
                    (pool.len() - 1) as u32
                });
                items.push(id);
            }
            reservoirs.insert(app.clone(), ReservoirWire { items, seen: res.seen });
        }
        StoreWire { pool, reservoirs }.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for NegativeStore {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let wire = StoreWire::deserialize(deserializer)?;
        let pool: Vec<Arc<NegContext>> = wire.pool.into_iter().map(Arc::new).collect();
        let mut reservoirs = BTreeMap::new();
        for (app, res) in wire.reservoirs {
            let mut items = Vec::with_capacity(res.items.len());
            for id in res.items {
                let ctx = pool.get(id as usize).ok_or_else(|| {
                    serde::de::Error::custom(format!("reservoir references missing pool entry {id}"))
                })?;
                items.push(Arc::clone(ctx));
            }
            reservoirs.insert(app, Reservoir { items, seen: res.seen });
        }
        Ok(NegativeStore { reservoirs })
    }
}

impl PartialEq for NegativeStore {
    fn eq(&self, other: &Self) -> bool {
        if self.reservoirs.len() != other.reservoirs.len() {
            return false;
        }
        self.reservoirs.iter().zip(other.reservoirs.iter()).all(|((a1, r1), (a2, r2))| {
            a1 == a2
                && r1.seen == r2.seen
                && r1.items.len() == r2.items.len()
                && r1.items.iter().zip(r2.items.iter()).all(|(c1, c2)| c1 == c2)
        })
    }
}
