//! Protocol gateway between constrained devices and the ledger.
//!
//! The gateway holds every Thing's signing key, derived from its master seed
//! and the thing id, and signs on the Thing's behalf. Devices speak the
//! datagram protocol in [`wire`]; the gateway turns writes into transactions
//! and watches the chain for `Actuate` and `Notify` events to push back out.
//!
//! Routes:
//!
//! | request                              | effect                                    |
//! |--------------------------------------|-------------------------------------------|
//! | `GET /things/{id}/last`              | `feed.last` read                          |
//! | `GET /things/{id}/stats?from=a&to=b` | `feed.stats` read over ticks `a..=b`      |
//! | `PUT /things/{id}/data`              | `feed.push` signed by the Thing           |
//! | `POST /things/{id}/actuate`          | `actuation.request` signed by requester   |
//! | `GET /names/{name}`                  | resolve `name` from the configured roots  |
//!
//! PUT payloads are `"<value>[ <unit>]"` with up to three decimals; POST
//! payloads are `"<action>[ <args>]"`. Write replies are Acks whose payload
//! is `"Ok <height>.<tx_index> <return value>"`.

pub mod delivery;
pub mod journal;
pub mod server;
pub mod wire;

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;
use std::sync::{Arc, Mutex, RwLock};

use delivery::{deliver_with_retry, Attempted, Clock, Delivery, Outbound, OutboundKind, RetryPolicy};
use journal::{DeadLetter, Journal, JournalRecord, ThingRecord};
use wire::{Code, ErrorReason, Message, MsgType, WireError};

use crate::codec::{Args, Value};
use crate::crypto::Signer;
use crate::hash::{AccountId, ContractAddress};
use crate::ledger::{Ledger, LedgerError, Receipt, Status, Target, TxPosition};
use crate::resolver::{self, Name};
use crate::runtime::ContractError;
use crate::stdlib::actuation::{ActuationRequest, ACTUATE_EVENT};
use crate::stdlib::feed::{Measurement, Stats};
use crate::stdlib::topic::{Notification, SubscriberSink, NOTIFY_EVENT};
use crate::stdlib::zone::NameRecord;
use crate::stdlib::Milli;

pub const MAX_THING_ID_LEN: usize = 63;

#[derive(Debug, thiserror::Error)]
pub enum GatewayError {
    #[error("thing {0:?} already registered")]
    DuplicateThing(String),
    #[error("unknown thing {0:?}")]
    UnknownThing(String),
    #[error("invalid thing id {0:?}")]
    BadThingId(String),
    #[error("journal registration for {0:?} does not match the master seed")]
    SeedMismatch(String),
    #[error("call reverted: {0}")]
    Reverted(ContractError),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error("journal: {0}")]
    Journal(#[from] std::io::Error),
}

/// An external requester allowed to POST actuations, identified by its
/// source endpoint. The gateway signs for it with the account derived from
/// `account_seed`.
#[derive(Debug, Clone, PartialEq, Eq, serde::Deserialize)]
pub struct Requester {
    pub endpoint: String,
    pub account_seed: String,
}

#[derive(Debug, Clone)]
pub struct GatewayConfig {
    pub master_seed: Vec<u8>,
    pub roots: Vec<ContractAddress>,
    pub requesters: Vec<Requester>,
    pub retry: RetryPolicy,
}

impl GatewayConfig {
    pub fn new(master_seed: &[u8]) -> Self {
        GatewayConfig {
            master_seed: master_seed.to_vec(),
            roots: Vec::new(),
            requesters: Vec::new(),
            retry: RetryPolicy::default(),
        }
    }
}

/// Seed from which a Thing's key is derived.
pub fn thing_seed(master: &[u8], thing_id: &str) -> Vec<u8> {
    let mut seed = master.to_vec();
    seed.extend_from_slice(b"/thing/");
    seed.extend_from_slice(thing_id.as_bytes());
    seed
}

fn valid_thing_id(id: &str) -> bool {
    !id.is_empty()
        && id.len() <= MAX_THING_ID_LEN
        && id
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || matches!(b, b'-' | b'_' | b'.'))
}

struct Thing {
    record: ThingRecord,
    signer: Signer,
}

#[derive(Debug, Default)]
struct Watcher {
    cursor: Option<TxPosition>,
    dead_letters: Vec<DeadLetter>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WatchReport {
    pub delivered: usize,
    pub dead_lettered: usize,
    /// Stopped early because the delivery budget ran out, before the
    /// cursor for the transaction in progress was saved.
    pub interrupted: bool,
    pub cursor: Option<TxPosition>,
}

pub struct Gateway {
    ledger: Arc<RwLock<Ledger>>,
    master_seed: Vec<u8>,
    roots: Vec<ContractAddress>,
    retry: RetryPolicy,
    requesters: RwLock<HashMap<String, Signer>>,
    things: RwLock<BTreeMap<String, Thing>>,
    journal: Mutex<Journal>,
    watcher: Mutex<Watcher>,
}

impl std::fmt::Debug for Gateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Gateway")
            .field("things", &self.thing_ids())
            .field("roots", &self.roots)
            .finish_non_exhaustive()
    }
}

impl Gateway {
    /// A gateway whose state lives only in memory.
    pub fn new(ledger: Arc<RwLock<Ledger>>, config: GatewayConfig) -> Result<Gateway, GatewayError> {
        Gateway::restore(ledger, config, Journal::in_memory(), Vec::new())
    }

    /// Opens (or creates) the journal at `path` and restores registrations,
    /// cursor and dead letters from it.
    pub fn open(ledger: Arc<RwLock<Ledger>>, config: GatewayConfig, path: &Path) -> Result<Gateway, GatewayError> {
        let (journal, records) = Journal::open(path)?;
        Gateway::restore(ledger, config, journal, records)
    }

    fn restore(
        ledger: Arc<RwLock<Ledger>>,
        config: GatewayConfig,
        journal: Journal,
        records: Vec<JournalRecord>,
    ) -> Result<Gateway, GatewayError> {
        let mut requesters = HashMap::new();
        {
            let mut l = ledger.write().unwrap();
            for r in &config.requesters {
                let (_, signer) = l.create_account(r.account_seed.as_bytes())?;
                requesters.insert(r.endpoint.clone(), signer);
            }
            if l.has_pending() {
                l.seal_block();
            }
        }
        let mut things = BTreeMap::new();
        let mut watcher = Watcher::default();
        for rec in records {
            match rec {
                JournalRecord::Register(record) => {
                    let signer = Signer::from_seed(&thing_seed(&config.master_seed, &record.thing_id))
                        .expect("seed is non-empty");
                    if signer.account_id() != record.account {
                        return Err(GatewayError::SeedMismatch(record.thing_id));
                    }
                    things.insert(record.thing_id.clone(), Thing { record, signer });
                }
                JournalRecord::Cursor(pos) => watcher.cursor = Some(pos),
                JournalRecord::DeadLetter(d) => watcher.dead_letters.push(d),
            }
        }
        Ok(Gateway {
            ledger,
            master_seed: config.master_seed,
            roots: config.roots,
            retry: config.retry,
            requesters: RwLock::new(requesters),
            things: RwLock::new(things),
            journal: Mutex::new(journal),
            watcher: Mutex::new(watcher),
        })
    }

    pub fn ledger(&self) -> &Arc<RwLock<Ledger>> {
        &self.ledger
    }

    pub fn thing_ids(&self) -> Vec<String> {
        self.things.read().unwrap().keys().cloned().collect()
    }

    pub fn thing(&self, id: &str) -> Option<ThingRecord> {
        self.things.read().unwrap().get(id).map(|t| t.record.clone())
    }

    pub fn requester_account(&self, endpoint: &str) -> Option<AccountId> {
        self.requesters.read().unwrap().get(endpoint).map(Signer::account_id)
    }

    /// Maps `endpoint` to the account derived from `account_seed`,
    /// registering the account if needed.
    pub fn add_requester(&self, endpoint: &str, account_seed: &[u8]) -> Result<AccountId, GatewayError> {
        let (id, signer) = self.ledger.write().unwrap().create_account(account_seed)?;
        self.requesters.write().unwrap().insert(endpoint.to_string(), signer);
        Ok(id)
    }

    pub fn cursor(&self) -> Option<TxPosition> {
        self.watcher.lock().unwrap().cursor
    }

    pub fn dead_letters(&self) -> Vec<DeadLetter> {
        self.watcher.lock().unwrap().dead_letters.clone()
    }

    /// Creates the Thing's account, deploys its feed and actuation
    /// contracts from that account and persists the registration.
    pub fn register_thing(&self, thing_id: &str, sink_uri: &str) -> Result<ThingRecord, GatewayError> {
        if !valid_thing_id(thing_id) {
            return Err(GatewayError::BadThingId(thing_id.to_string()));
        }
        let mut things = self.things.write().unwrap();
        if things.contains_key(thing_id) {
            return Err(GatewayError::DuplicateThing(thing_id.to_string()));
        }
        let (account, signer) = {
            let mut ledger = self.ledger.write().unwrap();
            let (account, signer) = ledger.create_account(&thing_seed(&self.master_seed, thing_id))?;
            (account, signer)
        };
        let feed = self.deploy(&signer, "feed")?;
        let actuation = self.deploy(&signer, "actuation")?;
        let record = ThingRecord {
            thing_id: thing_id.to_string(),
            account,
            feed,
            actuation,
            sink_uri: sink_uri.to_string(),
        };
        self.journal
            .lock()
            .unwrap()
            .append(&JournalRecord::Register(record.clone()))?;
        things.insert(thing_id.to_string(), Thing { record: record.clone(), signer });
        Ok(record)
    }

    fn deploy(&self, signer: &Signer, code: &str) -> Result<ContractAddress, GatewayError> {
        let (_, receipt) = self.submit(signer, Target::Deploy(code.into()), "", Args::empty())?;
        match receipt.status {
            Status::Ok => Ok(ContractAddress(
                receipt.value().and_then(|v| v.as_id()).expect("deploy returns an address"),
            )),
            Status::Reverted(e) => Err(GatewayError::Reverted(e)),
        }
    }

    /// Submits one transaction and seals it so it is immediately readable.
    fn submit(
        &self,
        signer: &Signer,
        target: Target,
        method: &str,
        args: Args,
    ) -> Result<(TxPosition, Receipt), LedgerError> {
        let mut ledger = self.ledger.write().unwrap();
        let receipt = ledger.submit_call(signer, target, method, &args, 0)?;
        let pos = (ledger.height() + 1, ledger.pending_len() as u32 - 1);
        ledger.seal_block();
        Ok((pos, receipt))
    }

    /// Signs with the Thing's key. Used for owner-only setup such as
    /// granting actuation rights.
    pub fn call_as_thing(
        &self,
        thing_id: &str,
        target: ContractAddress,
        method: &str,
        args: Args,
    ) -> Result<Receipt, GatewayError> {
        let things = self.things.read().unwrap();
        let thing = things
            .get(thing_id)
            .ok_or_else(|| GatewayError::UnknownThing(thing_id.to_string()))?;
        Ok(self.submit(&thing.signer, Target::Contract(target), method, args)?.1)
    }

    /// Adds `actor` to the Thing's actuation actor list.
    pub fn authorize(&self, thing_id: &str, actor: AccountId) -> Result<(), GatewayError> {
        let actuation = self
            .thing(thing_id)
            .ok_or_else(|| GatewayError::UnknownThing(thing_id.to_string()))?
            .actuation;
        let r = self.call_as_thing(thing_id, actuation, "add_actor", Args::new(vec![Value::account(actor)]))?;
        match r.status {
            Status::Ok => Ok(()),
            Status::Reverted(e) => Err(GatewayError::Reverted(e)),
        }
    }

    /// Decodes a datagram, handles it and encodes the reply. Every input,
    /// malformed or not, gets a reply.
    pub fn handle_datagram(&self, buf: &[u8], source: &str) -> Vec<u8> {
        let reply = match Message::decode(buf) {
            Ok(msg) => self.handle(&msg, source),
            Err(e) => {
                let reason = match e {
                    WireError::BadVersion(_) => ErrorReason::BadVersion,
                    _ => ErrorReason::Malformed,
                };
                Message::error(
                    wire::salvage_code(buf),
                    wire::salvage_message_id(buf),
                    reason,
                    None,
                    &e.to_string(),
                )
            }
        };
        reply.encode().expect("replies fit in a datagram")
    }

    pub fn handle(&self, msg: &Message, source: &str) -> Message {
        let fail = |reason, ce: Option<ContractError>, detail: &str| {
            Message::error(msg.code, msg.message_id, reason, ce, detail)
        };
        if msg.msg_type != MsgType::Request {
            return fail(ErrorReason::Malformed, None, "expected a request");
        }
        let (path, query) = msg.path.split_once('?').unwrap_or((&msg.path, ""));
        let segments: Vec<&str> = path.strip_prefix('/').unwrap_or(path).split('/').collect();
        let outcome = match (msg.code, segments.as_slice()) {
            (Code::Get, ["names", name]) => self.get_name(name),
            (code, ["things", id, action]) => {
                let things = self.things.read().unwrap();
                let Some(thing) = things.get(*id) else {
                    return fail(ErrorReason::UnknownThing, None, id);
                };
                match (code, *action) {
                    (Code::Get, "last") => self.get_last(thing),
                    (Code::Get, "stats") => self.get_stats(thing, query),
                    (Code::Put, "data") => self.put_data(thing, &msg.payload),
                    (Code::Post, "actuate") => self.post_actuate(thing, &msg.payload, source),
                    _ => Err((ErrorReason::NotFound, None, format!("no route for {} {}", code, msg.path))),
                }
            }
            _ => Err((ErrorReason::NotFound, None, format!("no route for {} {}", msg.code, msg.path))),
        };
        match outcome {
            Ok(payload) => Message::ack(msg.code, msg.message_id, payload.into_bytes()),
            Err((reason, ce, detail)) => fail(reason, ce, &detail),
        }
    }

    fn query(&self, addr: &ContractAddress, method: &str, args: Args) -> Result<Value, Failure> {
        self.ledger
            .read()
            .unwrap()
            .query(addr, method, &args)
            .map_err(reverted)
    }

    fn get_last(&self, thing: &Thing) -> Result<String, Failure> {
        let v = self.query(&thing.record.feed, "last", Args::empty())?;
        let m = Measurement::from_value(&v).ok_or_else(internal)?;
        Ok(if m.unit.is_empty() {
            m.value.to_string()
        } else {
            format!("{} {}", m.value, m.unit)
        })
    }

    fn get_stats(&self, thing: &Thing, query: &str) -> Result<String, Failure> {
        let (mut from, mut to) = (0u64, u64::MAX);
        for pair in query.split('&').filter(|p| !p.is_empty()) {
            let bad = || (ErrorReason::BadPayload, None, format!("bad query parameter {pair:?}"));
            let (k, v) = pair.split_once('=').ok_or_else(bad)?;
            let n: u64 = v.parse().map_err(|_| bad())?;
            match k {
                "from" => from = n,
                "to" => to = n,
                _ => return Err(bad()),
            }
        }
        let v = self.query(
            &thing.record.feed,
            "stats",
            Args::new(vec![Value::U64(from), Value::U64(to)]),
        )?;
        Ok(Stats::from_value(&v).ok_or_else(internal)?.to_string())
    }

    fn put_data(&self, thing: &Thing, payload: &[u8]) -> Result<String, Failure> {
        let text = std::str::from_utf8(payload)
            .map_err(|_| (ErrorReason::BadPayload, None, "payload is not UTF-8".to_string()))?;
        let (value, unit) = text.trim().split_once(' ').unwrap_or((text.trim(), ""));
        let value: Milli = value
            .parse()
            .map_err(|e| (ErrorReason::BadPayload, None, format!("{e}")))?;
        let tick = self.ledger.read().unwrap().next_tick();
        let args = Args::new(vec![Value::I64(value.0), Value::str(unit.trim()), Value::U64(tick)]);
        self.write(&thing.signer, thing.record.feed, "push", args)
    }

    fn post_actuate(&self, thing: &Thing, payload: &[u8], source: &str) -> Result<String, Failure> {
        let requesters = self.requesters.read().unwrap();
        let signer = requesters.get(source).ok_or_else(|| {
            (ErrorReason::UnknownRequester, None, format!("no account for endpoint {source}"))
        })?;
        let (action, args) = payload
            .iter()
            .position(|b| *b == b' ')
            .map_or((payload, &[][..]), |i| (&payload[..i], &payload[i + 1..]));
        let action = std::str::from_utf8(action)
            .ok()
            .filter(|a| !a.is_empty())
            .ok_or_else(|| (ErrorReason::BadPayload, None, "missing action".to_string()))?;
        let args = Args::new(vec![Value::str(action), Value::Bytes(args.to_vec())]);
        self.write(signer, thing.record.actuation, "request", args)
    }

    fn write(&self, signer: &Signer, addr: ContractAddress, method: &str, args: Args) -> Result<String, Failure> {
        let ((height, tx), receipt) = self
            .submit(signer, Target::Contract(addr), method, args)
            .map_err(|e| (ErrorReason::Internal, None, e.to_string()))?;
        match receipt.status {
            Status::Ok => {
                let mut out = format!("Ok {height}.{tx}");
                if let Some(v) = receipt.value().filter(|v| !v.is_unit()) {
                    let _ = write!(out, " {v}");
                }
                Ok(out)
            }
            Status::Reverted(e) => Err(reverted(e)),
        }
    }

    fn get_name(&self, name: &str) -> Result<String, Failure> {
        let name: Name = name
            .parse()
            .map_err(|e: resolver::ResolveError| (ErrorReason::BadPayload, None, e.to_string()))?;
        let ledger = self.ledger.read().unwrap();
        let r = resolver::resolve_any(ledger.state(), &name, &self.roots)
            .map_err(|e| (ErrorReason::NotFound, None, e.to_string()))?;
        Ok(render_record(&r.record))
    }

    /// Delivers every new `Actuate` event for a registered Thing and every
    /// `Notify` event with an off-chain sink, then advances the cursor.
    ///
    /// `budget` caps the number of successful deliveries; when it runs out
    /// the poll stops without saving the cursor for the transaction in
    /// progress, which is what a crash at that point looks like.
    pub fn poll_events(
        &self,
        delivery: &mut dyn Delivery,
        clock: &dyn Clock,
        mut budget: Option<usize>,
    ) -> Result<WatchReport, GatewayError> {
        let mut watcher = self.watcher.lock().unwrap();
        let batches = self.pending_outbound(watcher.cursor);
        let mut report = WatchReport {
            cursor: watcher.cursor,
            ..WatchReport::default()
        };
        let start = watcher.cursor;
        for (pos, messages) in batches {
            for msg in &messages {
                if budget == Some(0) {
                    report.interrupted = true;
                    return Ok(report);
                }
                match deliver_with_retry(delivery, clock, &self.retry, msg) {
                    Attempted::Delivered { .. } => {
                        report.delivered += 1;
                        if let Some(b) = budget.as_mut() {
                            *b -= 1;
                        }
                    }
                    Attempted::Failed { attempts, last_error } => {
                        let dead = DeadLetter {
                            key: msg.key,
                            target: msg.target.clone(),
                            attempts,
                            reason: last_error,
                        };
                        self.journal
                            .lock()
                            .unwrap()
                            .append(&JournalRecord::DeadLetter(dead.clone()))?;
                        watcher.dead_letters.push(dead);
                        report.dead_lettered += 1;
                    }
                }
            }
            watcher.cursor = Some(pos);
            report.cursor = watcher.cursor;
            if !messages.is_empty() {
                self.journal.lock().unwrap().append(&JournalRecord::Cursor(pos))?;
            }
        }
        if watcher.cursor != start {
            if let Some(pos) = watcher.cursor {
                self.journal.lock().unwrap().append(&JournalRecord::Cursor(pos))?;
            }
        }
        Ok(report)
    }

    /// Outbound messages for each sealed transaction after `cursor`.
    fn pending_outbound(&self, cursor: Option<TxPosition>) -> Vec<(TxPosition, Vec<Outbound>)> {
        let things = self.things.read().unwrap();
        let by_actuation: HashMap<ContractAddress, &ThingRecord> =
            things.values().map(|t| (t.record.actuation, &t.record)).collect();
        let ledger = self.ledger.read().unwrap();
        ledger
            .receipts_after(cursor)
            .map(|((height, tx), _, receipt)| {
                let messages = receipt
                    .events
                    .iter()
                    .enumerate()
                    .filter_map(|(i, event)| {
                        let key = (height, tx, i as u32);
                        match event.name.as_str() {
                            ACTUATE_EVENT => {
                                let thing = by_actuation.get(&event.source)?;
                                let req = ActuationRequest::from_bytes(&event.payload)?;
                                Some(Outbound {
                                    key,
                                    target: thing.sink_uri.clone(),
                                    kind: OutboundKind::Actuate {
                                        thing_id: thing.thing_id.clone(),
                                        action: req.action,
                                        args: req.args,
                                        requester: req.caller,
                                    },
                                })
                            }
                            NOTIFY_EVENT => {
                                let n = Notification::from_bytes(&event.payload)?;
                                let SubscriberSink::Uri(uri) = n.sink else {
                                    return None;
                                };
                                Some(Outbound {
                                    key,
                                    target: uri,
                                    kind: OutboundKind::Notify {
                                        sub_id: n.sub_id,
                                        path: n.path,
                                        payload: n.payload,
                                    },
                                })
                            }
                            _ => None,
                        }
                    })
                    .collect();
                ((height, tx), messages)
            })
            .collect()
    }
}

type Failure = (ErrorReason, Option<ContractError>, String);

fn reverted(e: ContractError) -> Failure {
    (ErrorReason::Reverted, Some(e), e.name().to_string())
}

fn internal() -> Failure {
    (ErrorReason::Internal, None, "undecodable contract state".to_string())
}

/// One-line rendering of a record set, e.g. `key=0a0b uri=coap://x`.
pub fn render_record(r: &NameRecord) -> String {
    let mut parts = Vec::new();
    if let Some(d) = &r.delegation {
        parts.push(format!("delegation={d}"));
    }
    if let Some(k) = &r.service_key {
        parts.push(format!("key={}", hex::encode(k)));
    }
    if let Some(u) = &r.uri {
        parts.push(format!("uri={u}"));
    }
    if let Some(t) = &r.text {
        parts.push(format!("text={}", String::from_utf8_lossy(t)));
    }
    parts.join(" ")
}
