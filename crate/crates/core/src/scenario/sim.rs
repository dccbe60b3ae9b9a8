//! Simulated Things and the in-process delivery network they sit on.

use std::collections::{BTreeMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::gateway::delivery::{Delivery, DeliveryError, Outbound, OutboundKind};
use crate::gateway::journal::EventKey;
use crate::hash::Hash;
use crate::stdlib::Milli;

/// A device producing a seeded random walk of measurements and recording
/// the actuations it receives, once per event.
#[derive(Debug, Clone)]
pub struct SimThing {
    pub thing_id: String,
    pub unit: String,
    rng: ChaCha8Rng,
    current: Milli,
    /// Largest step, in milli-units.
    step: i64,
    seen: HashSet<EventKey>,
    pub actuations: Vec<(EventKey, String)>,
    pub duplicates: usize,
}

impl SimThing {
    pub fn new(thing_id: &str, seed: u64, start: Milli, step: Milli, unit: &str) -> SimThing {
        let mut material = seed.to_be_bytes().to_vec();
        material.extend_from_slice(thing_id.as_bytes());
        let digest = Hash::of(&material);
        SimThing {
            thing_id: thing_id.to_string(),
            unit: unit.to_string(),
            rng: ChaCha8Rng::from_seed(digest.0),
            current: start,
            step: step.0.abs(),
            seen: HashSet::new(),
            actuations: Vec::new(),
            duplicates: 0,
        }
    }

    pub fn next_measurement(&mut self) -> Milli {
        let delta = self.rng.gen_range(-self.step..=self.step);
        self.current = Milli(self.current.0.saturating_add(delta));
        self.current
    }

    fn receive(&mut self, key: EventKey, action: &str) {
        if self.seen.insert(key) {
            self.actuations.push((key, action.to_string()));
        } else {
            self.duplicates += 1;
        }
    }
}

/// Routes outbound gateway messages to simulated Things by sink URI and
/// collects notifications for every other sink.
#[derive(Debug, Default)]
pub struct SimNetwork {
    pub things: BTreeMap<String, SimThing>,
    /// sink URI -> thing id
    pub sinks: BTreeMap<String, String>,
    pub notifications: BTreeMap<String, Vec<(EventKey, String, Vec<u8>)>>,
    pub unreachable: HashSet<String>,
}

impl Delivery for SimNetwork {
    fn deliver(&mut self, msg: &Outbound) -> Result<(), DeliveryError> {
        if self.unreachable.contains(&msg.target) {
            return Err(DeliveryError(format!("{} unreachable", msg.target)));
        }
        match &msg.kind {
            OutboundKind::Actuate { action, .. } => {
                let id = self
                    .sinks
                    .get(&msg.target)
                    .ok_or_else(|| DeliveryError(format!("no device at {}", msg.target)))?;
                self.things.get_mut(id).expect("sink maps to a thing").receive(msg.key, action);
            }
            OutboundKind::Notify { path, payload, .. } => {
                let inbox = self.notifications.entry(msg.target.clone()).or_default();
                if !inbox.iter().any(|(k, _, _)| *k == msg.key) {
                    inbox.push((msg.key, path.clone(), payload.clone()));
                }
            }
        }
        Ok(())
    }
}
