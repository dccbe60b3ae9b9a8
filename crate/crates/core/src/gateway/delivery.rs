//! Outbound delivery of chain events to devices and off-chain sinks.

use std::collections::HashSet;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use super::journal::EventKey;
use crate::hash::AccountId;

/// What the watcher sends out for one on-chain event.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Outbound {
    /// Receivers deduplicate on this.
    pub key: EventKey,
    /// Thing endpoint or subscriber URI.
    pub target: String,
    pub kind: OutboundKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum OutboundKind {
    Actuate {
        thing_id: String,
        action: String,
        args: Vec<u8>,
        requester: AccountId,
    },
    Notify {
        sub_id: u64,
        path: String,
        payload: Vec<u8>,
    },
}

impl Outbound {
    /// Request path used when the message goes out as a datagram.
    pub fn wire_path(&self) -> String {
        let (h, t, e) = self.key;
        match &self.kind {
            OutboundKind::Actuate { thing_id, .. } => format!("/things/{thing_id}/actuations/{h}.{t}.{e}"),
            OutboundKind::Notify { sub_id, .. } => format!("/subscriptions/{sub_id}/{h}.{t}.{e}"),
        }
    }

    /// Datagram payload: `action[ args]` for actuations, the raw publish
    /// payload for notifications.
    pub fn wire_payload(&self) -> Vec<u8> {
        match &self.kind {
            OutboundKind::Actuate { action, args, .. } => {
                let mut out = action.as_bytes().to_vec();
                if !args.is_empty() {
                    out.push(b' ');
                    out.extend_from_slice(args);
                }
                out
            }
            OutboundKind::Notify { payload, .. } => payload.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{0}")]
pub struct DeliveryError(pub String);

pub trait Delivery {
    fn deliver(&mut self, msg: &Outbound) -> Result<(), DeliveryError>;
}

/// Logical time source for retry backoff.
pub trait Clock: Send + Sync {
    fn now(&self) -> u64;
    fn sleep(&self, ticks: u64);
}

/// A clock that advances only when slept on.
#[derive(Debug, Clone, Default)]
pub struct SimClock(Arc<AtomicU64>);

impl Clock for SimClock {
    fn now(&self) -> u64 {
        self.0.load(Ordering::SeqCst)
    }

    fn sleep(&self, ticks: u64) {
        self.0.fetch_add(ticks, Ordering::SeqCst);
    }
}

/// Real time, one tick per `tick` duration.
#[derive(Debug, Clone)]
pub struct WallClock {
    pub tick: std::time::Duration,
    start: std::time::Instant,
}

impl WallClock {
    pub fn new(tick: std::time::Duration) -> Self {
        WallClock {
            tick,
            start: std::time::Instant::now(),
        }
    }
}

impl Clock for WallClock {
    fn now(&self) -> u64 {
        (self.start.elapsed().as_nanos() / self.tick.as_nanos().max(1)) as u64
    }

    fn sleep(&self, ticks: u64) {
        std::thread::sleep(self.tick * ticks as u32);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub base: u64,
    pub cap: u64,
    pub max_attempts: u32,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            base: 1,
            cap: 32,
            max_attempts: 5,
        }
    }
}

impl RetryPolicy {
    /// Wait before retry number `retry` (1 for the first retry).
    pub fn backoff(&self, retry: u32) -> u64 {
        let exp = retry.saturating_sub(1).min(63);
        self.base.saturating_mul(1u64 << exp).min(self.cap)
    }
}

/// Outcome of delivering one message under a retry policy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Attempted {
    Delivered { attempts: u32 },
    Failed { attempts: u32, last_error: String },
}

pub fn deliver_with_retry(
    delivery: &mut dyn Delivery,
    clock: &dyn Clock,
    policy: &RetryPolicy,
    msg: &Outbound,
) -> Attempted {
    let mut last_error = String::new();
    for attempt in 1..=policy.max_attempts {
        if attempt > 1 {
            clock.sleep(policy.backoff(attempt - 1));
        }
        match delivery.deliver(msg) {
            Ok(()) => return Attempted::Delivered { attempts: attempt },
            Err(e) => last_error = e.0,
        }
    }
    Attempted::Failed {
        attempts: policy.max_attempts,
        last_error,
    }
}

/// In-process receiver that records messages and drops repeats of the same
/// event key, the way a device deduplicates at-least-once delivery.
#[derive(Debug, Default)]
pub struct RecordingDelivery {
    seen: HashSet<(String, EventKey)>,
    pub accepted: Vec<Outbound>,
    pub duplicates: usize,
    /// Targets that refuse every delivery.
    pub unreachable: HashSet<String>,
}

impl Delivery for RecordingDelivery {
    fn deliver(&mut self, msg: &Outbound) -> Result<(), DeliveryError> {
        if self.unreachable.contains(&msg.target) {
            return Err(DeliveryError(format!("{} unreachable", msg.target)));
        }
        if self.seen.insert((msg.target.clone(), msg.key)) {
            self.accepted.push(msg.clone());
        } else {
            self.duplicates += 1;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Flaky(u32);

    impl Delivery for Flaky {
        fn deliver(&mut self, _: &Outbound) -> Result<(), DeliveryError> {
            if self.0 == 0 {
                Ok(())
            } else {
                self.0 -= 1;
                Err(DeliveryError("down".into()))
            }
        }
    }

    fn msg() -> Outbound {
        Outbound {
            key: (1, 0, 0),
            target: "t".into(),
            kind: OutboundKind::Notify {
                sub_id: 0,
                path: "a".into(),
                payload: vec![],
            },
        }
    }

    #[test]
    fn backoff_doubles_up_to_cap() {
        let p = RetryPolicy::default();
        let waits: Vec<u64> = (1..=8).map(|r| p.backoff(r)).collect();
        assert_eq!(waits, [1, 2, 4, 8, 16, 32, 32, 32]);
    }

    #[test]
    fn gives_up_after_max_attempts() {
        let clock = SimClock::default();
        let out = deliver_with_retry(&mut Flaky(10), &clock, &RetryPolicy::default(), &msg());
        assert!(matches!(out, Attempted::Failed { attempts: 5, .. }));
        assert_eq!(clock.now(), 1 + 2 + 4 + 8);
        let clock = SimClock::default();
        let out = deliver_with_retry(&mut Flaky(2), &clock, &RetryPolicy::default(), &msg());
        assert_eq!(out, Attempted::Delivered { attempts: 3 });
        assert_eq!(clock.now(), 3);
    }
}
