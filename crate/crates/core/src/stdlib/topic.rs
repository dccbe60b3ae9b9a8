//! Publish-subscribe topic contract with hierarchical wildcard patterns.
//!
//! Topic paths are `/`-separated non-empty segments. Patterns may use `+` for
//! exactly one segment and a terminal `#` for any number of trailing
//! segments, including none (`a/#` matches `a`, `a/b` and `a/b/c`).
//!
//! A publish emits one `Notify` event per matching subscription, in
//! subscription-id order. Sinks are opaque to the chain: either a contract
//! address or an off-chain URI that the gateway delivers to.

use std::fmt;
use std::str::FromStr;

use super::{next_seq, seq_key, MemberList};
use crate::codec::{Args, Canonical, Value};
use crate::hash::{AccountId, ContractAddress};
use crate::runtime::{Behavior, ContractError, Ctx};

pub struct Topic;

const PUBLISHERS: MemberList = MemberList("publisher");
const NEXT_SUB: &[u8] = b"next_sub";
pub const NOTIFY_EVENT: &str = "Notify";

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Segment {
    Label(String),
    /// `+`
    Single,
    /// `#`, terminal only
    Multi,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TopicPattern {
    segments: Vec<Segment>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TopicPath {
    segments: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("malformed topic {0:?}")]
pub struct TopicError(pub String);

impl From<TopicError> for ContractError {
    fn from(_: TopicError) -> Self {
        ContractError::BadPattern
    }
}

impl FromStr for TopicPattern {
    type Err = TopicError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let raw: Vec<&str> = s.split('/').collect();
        let mut segments = Vec::with_capacity(raw.len());
        for (i, seg) in raw.iter().enumerate() {
            segments.push(match *seg {
                "" => return Err(TopicError(s.to_string())),
                "+" => Segment::Single,
                "#" if i + 1 == raw.len() => Segment::Multi,
                _ if seg.contains(['+', '#']) => return Err(TopicError(s.to_string())),
                _ => Segment::Label(seg.to_string()),
            });
        }
        Ok(TopicPattern { segments })
    }
}

impl FromStr for TopicPath {
    type Err = TopicError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let segments: Vec<String> = s.split('/').map(str::to_string).collect();
        if segments.iter().any(|seg| seg.is_empty() || seg.contains(['+', '#'])) {
            return Err(TopicError(s.to_string()));
        }
        Ok(TopicPath { segments })
    }
}

impl TopicPattern {
    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn matches(&self, path: &TopicPath) -> bool {
        let mut levels = path.segments.iter();
        for seg in &self.segments {
            match seg {
                Segment::Multi => return true,
                Segment::Single => {
                    if levels.next().is_none() {
                        return false;
                    }
                }
                Segment::Label(l) => {
                    if levels.next() != Some(l) {
                        return false;
                    }
                }
            }
        }
        levels.next().is_none()
    }
}

impl fmt::Display for TopicPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, seg) in self.segments.iter().enumerate() {
            if i > 0 {
                f.write_str("/")?;
            }
            match seg {
                Segment::Label(l) => f.write_str(l)?,
                Segment::Single => f.write_str("+")?,
                Segment::Multi => f.write_str("#")?,
            }
        }
        Ok(())
    }
}

impl fmt::Display for TopicPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.segments.join("/"))
    }
}

/// Where notifications for a subscription go.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum SubscriberSink {
    Contract(ContractAddress),
    Uri(String),
}

impl SubscriberSink {
    pub fn to_value(&self) -> Value {
        match self {
            SubscriberSink::Contract(a) => Value::address(*a),
            SubscriberSink::Uri(u) => Value::Str(u.clone()),
        }
    }

    pub fn from_value(v: &Value) -> Option<SubscriberSink> {
        match v {
            Value::Id(h) => Some(SubscriberSink::Contract(ContractAddress(*h))),
            Value::Str(s) if !s.is_empty() => Some(SubscriberSink::Uri(s.clone())),
            _ => None,
        }
    }
}

/// Decoded payload of a `Notify` event.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Notification {
    pub sub_id: u64,
    pub sink: SubscriberSink,
    pub path: String,
    pub payload: Vec<u8>,
}

impl Notification {
    pub fn to_value(&self) -> Value {
        Value::List(vec![
            Value::U64(self.sub_id),
            self.sink.to_value(),
            Value::Str(self.path.clone()),
            Value::Bytes(self.payload.clone()),
        ])
    }

    pub fn from_bytes(bytes: &[u8]) -> Option<Notification> {
        let v = Value::from_bytes(bytes).ok()?;
        let [id, sink, path, payload] = v.as_list()? else {
            return None;
        };
        Some(Notification {
            sub_id: id.as_u64()?,
            sink: SubscriberSink::from_value(sink)?,
            path: path.as_str()?.to_string(),
            payload: payload.as_bytes()?.to_vec(),
        })
    }
}

struct Subscription {
    pattern: TopicPattern,
    sink: SubscriberSink,
    subscriber: AccountId,
}

fn load_sub(bytes: &[u8]) -> Option<Subscription> {
    let v = Value::from_bytes(bytes).ok()?;
    let [pattern, sink, subscriber] = v.as_list()? else {
        return None;
    };
    Some(Subscription {
        pattern: pattern.as_str()?.parse().ok()?,
        sink: SubscriberSink::from_value(sink)?,
        subscriber: AccountId(subscriber.as_id()?),
    })
}

fn sub_id_from_key(key: &[u8]) -> Option<u64> {
    u64::from_str_radix(std::str::from_utf8(key.strip_prefix(b"sub/")?).ok()?, 16).ok()
}

impl Behavior for Topic {
    fn code_id(&self) -> &'static str {
        "topic"
    }

    fn methods(&self) -> &'static [&'static str] {
        &[
            "subscribe",
            "unsubscribe",
            "publish",
            "subscriptions",
            "add_publisher",
            "remove_publisher",
        ]
    }

    fn call(&self, ctx: &mut Ctx<'_, '_>, method: &str, args: &Args) -> Result<Value, ContractError> {
        match method {
            // subscribe(pattern: str, sink: id | str) -> sub_id
            "subscribe" => {
                let pattern: TopicPattern = args.str_at(0)?.parse()?;
                let sink = SubscriberSink::from_value(args.get(1).ok_or(ContractError::BadArgs)?)
                    .ok_or(ContractError::BadArgs)?;
                let id = next_seq(ctx, NEXT_SUB);
                let record = Value::List(vec![
                    Value::Str(pattern.to_string()),
                    sink.to_value(),
                    Value::account(ctx.caller()),
                ]);
                ctx.set_value(&seq_key("sub", id), &record);
                Ok(Value::U64(id))
            }
            // unsubscribe(sub_id), by the subscriber or the owner
            "unsubscribe" => {
                let key = seq_key("sub", args.u64_at(0)?);
                let sub = ctx
                    .get(&key)
                    .and_then(load_sub)
                    .ok_or(ContractError::UnknownSub)?;
                if ctx.caller() != sub.subscriber && ctx.caller() != ctx.owner() {
                    return Err(ContractError::NotAuthorized);
                }
                ctx.remove(&key);
                Ok(Value::Unit)
            }
            // publish(path: str, payload: bytes) -> number notified
            "publish" => {
                PUBLISHERS.require(ctx)?;
                let path: TopicPath = args.str_at(0)?.parse()?;
                let payload = args.bytes_at(1)?.to_vec();
                let mut notified = 0u64;
                for (key, bytes) in ctx.scan_prefix(b"sub/") {
                    let (Some(id), Some(sub)) = (sub_id_from_key(&key), load_sub(&bytes)) else {
                        continue;
                    };
                    if sub.pattern.matches(&path) {
                        let n = Notification {
                            sub_id: id,
                            sink: sub.sink,
                            path: path.to_string(),
                            payload: payload.clone(),
                        };
                        ctx.emit(NOTIFY_EVENT, n.to_value().to_bytes());
                        notified += 1;
                    }
                }
                Ok(Value::U64(notified))
            }
            "subscriptions" => Ok(Value::List(
                ctx.scan_prefix(b"sub/")
                    .into_iter()
                    .filter_map(|(k, v)| {
                        let sub = load_sub(&v)?;
                        Some(Value::List(vec![
                            Value::U64(sub_id_from_key(&k)?),
                            Value::Str(sub.pattern.to_string()),
                            sub.sink.to_value(),
                        ]))
                    })
                    .collect(),
            )),
            "add_publisher" => PUBLISHERS.add(ctx, &args.account_at(0)?),
            "remove_publisher" => PUBLISHERS.remove(ctx, &args.account_at(0)?),
            _ => Err(ContractError::MethodNotFound),
        }
    }
}
