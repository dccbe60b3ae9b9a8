//! Scenario driver: runs a script against an in-process ledger, gateway and
//! simulated Things, and produces a run report.
//!
//! Verbs (keys in brackets are optional):
//!
//! | verb             | keys                                                         |
//! |------------------|--------------------------------------------------------------|
//! | `genesis`        | [seed] [tx_cap] [fund=name:amount,...]                       |
//! | `account`        | name (repeatable)                                            |
//! | `transfer`       | from to amount [expect]                                      |
//! | `deploy`         | as code name [arg...] [tokens] [expect]                      |
//! | `call`           | as contract method [arg...] [tokens] [expect] [save]         |
//! | `query`          | contract method [arg...] [save] [eq]                         |
//! | `kill`           | as contract [expect]                                         |
//! | `seal`           | [blocks]                                                     |
//! | `gateway`        | seed                                                         |
//! | `requester`      | name                                                         |
//! | `register`       | thing [unit] [start] [step]                                  |
//! | `authorize`      | thing actor                                                  |
//! | `push`           | thing value [expect]                                         |
//! | `simulate`       | thing count                                                  |
//! | `get`            | thing (`last` or `stats`) [from] [to] [eq] [expect]          |
//! | `actuate`        | thing from action [args] [expect]                            |
//! | `watch`          | [fail=sink] [delivered]                                      |
//! | `subscribe`      | as topic pattern sink [save]                                 |
//! | `publish`        | as topic path [payload] [expect]                             |
//! | `escrow-commit`  | as escrow provider amount deadline(+N = relative) [save]     |
//! | `escrow-confirm` | as escrow deal [expect]                                      |
//! | `escrow-refund`  | as escrow deal [expect]                                      |
//! | `resolve`        | name root [key] [error]                                      |
//! | `assert`         | a kind word, see [`Runner::assert`]                          |
//!
//! Argument literals are those of [`Value`]'s `FromStr`, plus `@name` for a
//! bound account or contract id, `$var` for a saved result, `milli:21.5`
//! for a fixed-point `i64`, `ints:1,2,3` for a list of `i64` and
//! `list:a;b` for a list of other literals.

pub mod script;
pub mod sim;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};

use crate::codec::{Args, Value};
use crate::crypto::Signer;
use crate::gateway::delivery::SimClock;
use crate::gateway::wire::{Code, Message, MsgType};
use crate::gateway::{Gateway, GatewayConfig};
use crate::hash::{AccountId, ContractAddress, Hash};
use crate::ledger::{export_chain, ChainParams, Ledger, Receipt, Target};
use crate::resolver::{self, Name};
use crate::runtime::CodeRegistry;
use crate::stdlib::feed::Measurement;
use crate::stdlib::Milli;
use script::{ParseError, Step};
use sim::{SimNetwork, SimThing};

/// The bundled smart-building scenario.
pub const SMART_BUILDING: &str = include_str!("../../scenarios/smart_building.scn");

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("parse error at {0}")]
    Parse(#[from] ParseError),
    #[error("step {index} (line {line}) failed: {reason}")]
    StepFailed { index: usize, line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Ledger(#[from] crate::ledger::LedgerError),
}

#[derive(Debug, Clone, Default)]
pub struct Options {
    /// Overrides the script's `genesis seed=`.
    pub seed: Option<u64>,
    pub export: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, PartialEq, Eq)]
pub struct StepReport {
    pub index: usize,
    pub line: usize,
    pub verb: String,
    pub status: String,
    pub receipt_digest: Option<Hash>,
    pub events: usize,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize, PartialEq, Eq)]
pub struct Report {
    pub seed: u64,
    pub steps: Vec<StepReport>,
    pub height: u64,
    pub transactions: u64,
    pub state_digest: Hash,
    pub chain_export: Option<PathBuf>,
    pub actuations_delivered: usize,
    pub dead_letters: usize,
}

impl Report {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for s in &self.steps {
            out.push_str(&format!("{:>4} L{:<4} {:<15} {:<24} events={}", s.index, s.line, s.verb, s.status, s.events));
            if !s.detail.is_empty() {
                out.push_str("  ");
                out.push_str(&s.detail);
            }
            out.push('\n');
        }
        out.push_str(&format!(
            "seed={} height={} transactions={} actuations={} dead_letters={}\nstate digest {}\n",
            self.seed, self.height, self.transactions, self.actuations_delivered, self.dead_letters, self.state_digest
        ));
        if let Some(p) = &self.chain_export {
            out.push_str(&format!("chain exported to {}\n", p.display()));
        }
        out
    }
}

/// Names bound during a run, saved next to an exported chain so later
/// commands can refer to accounts and contracts by name.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bindings {
    pub accounts: BTreeMap<String, AccountId>,
    pub contracts: BTreeMap<String, ContractAddress>,
}

impl Bindings {
    pub fn contract(&self, name: &str) -> Option<ContractAddress> {
        self.contracts.get(name).copied().or_else(|| name.parse().ok())
    }

    pub fn account(&self, name: &str) -> Option<AccountId> {
        self.accounts.get(name).copied().or_else(|| name.parse().ok())
    }

    /// Binding name of `addr`, if it has one.
    pub fn contract_name(&self, addr: &ContractAddress) -> Option<&str> {
        self.contracts.iter().find(|(_, a)| *a == addr).map(|(n, _)| n.as_str())
    }

    /// Resolves `@name` to an account id or contract address.
    pub fn lookup(&self, lit: &str) -> Option<Value> {
        let name = lit.strip_prefix('@')?;
        if let Some(a) = self.accounts.get(name) {
            return Some(Value::account(*a));
        }
        self.contract(name).map(Value::address)
    }
}

/// Everything a finished run leaves behind.
pub struct Outcome {
    pub report: Report,
    pub ledger: Arc<RwLock<Ledger>>,
    pub gateway: Option<Gateway>,
    pub network: SimNetwork,
    pub bindings: Bindings,
}

pub fn run_script(text: &str, options: &Options) -> Result<Outcome, ScenarioError> {
    let steps = script::parse(text)?;
    let mut runner = Runner::new(options.seed);
    for (index, step) in steps.iter().enumerate() {
        let report = runner.step(index, step).map_err(|reason| ScenarioError::StepFailed {
            index,
            line: step.line,
            reason,
        })?;
        runner.reports.push(report);
    }
    runner.finish(options.export.as_deref())
}

pub fn run_file(path: &Path, options: &Options) -> Result<Outcome, ScenarioError> {
    run_script(&std::fs::read_to_string(path)?, options)
}

/// Parses an argument literal. `@name` and `$var` are handed to `lookup`
/// with their sigil.
pub fn parse_literal(lit: &str, lookup: &dyn Fn(&str) -> Option<Value>) -> Result<Value, String> {
    if lit.starts_with('@') || lit.starts_with('$') {
        return lookup(lit).ok_or_else(|| format!("unbound name {lit}"));
    }
    if let Some(m) = lit.strip_prefix("milli:") {
        return m.parse::<Milli>().map(|m| Value::I64(m.0)).map_err(|e| e.to_string());
    }
    if let Some(items) = lit.strip_prefix("list:") {
        return items
            .split(';')
            .filter(|s| !s.is_empty())
            .map(|s| parse_literal(s, lookup))
            .collect::<Result<Vec<_>, _>>()
            .map(Value::List);
    }
    if let Some(list) = lit.strip_prefix("ints:") {
        return list
            .split(',')
            .filter(|s| !s.is_empty())
            .map(|s| s.trim().parse::<i64>().map(Value::I64).map_err(|_| format!("bad int {s:?}")))
            .collect::<Result<Vec<_>, _>>()
            .map(Value::List);
    }
    lit.parse().map_err(|e: crate::codec::ParseValueError| e.to_string())
}

type StepResult = Result<StepReport, String>;

enum Reply {
    Ack(String),
    Error(String),
}

struct Runner {
    seed_override: Option<u64>,
    seed: u64,
    ledger: Option<Arc<RwLock<Ledger>>>,
    gateway: Option<Gateway>,
    signers: BTreeMap<String, Signer>,
    accounts: BTreeMap<String, AccountId>,
    contracts: BTreeMap<String, ContractAddress>,
    vars: BTreeMap<String, Value>,
    network: SimNetwork,
    clock: SimClock,
    next_message_id: u16,
    reports: Vec<StepReport>,
    index: usize,
    line: usize,
    verb: String,
}

fn normalize_status(s: &str) -> &str {
    s.strip_prefix("Reverted(")
        .and_then(|r| r.strip_suffix(')'))
        .unwrap_or(s)
}

fn parse_u64(step: &Step, key: &str) -> Result<u64, String> {
    let v = step.get(key).ok_or_else(|| format!("missing {key}="))?;
    v.parse().map_err(|_| format!("{key}={v} is not an integer"))
}

fn required<'s>(step: &'s Step, key: &str) -> Result<&'s str, String> {
    step.get(key).ok_or_else(|| format!("missing {key}="))
}

impl Runner {
    fn new(seed_override: Option<u64>) -> Runner {
        Runner {
            seed_override,
            seed: seed_override.unwrap_or(DEFAULT_SEED),
            ledger: None,
            gateway: None,
            signers: BTreeMap::new(),
            accounts: BTreeMap::new(),
            contracts: BTreeMap::new(),
            vars: BTreeMap::new(),
            network: SimNetwork::default(),
            clock: SimClock::default(),
            next_message_id: 1,
            reports: Vec::new(),
            index: 0,
            line: 0,
            verb: String::new(),
        }
    }

    fn ledger(&mut self) -> Arc<RwLock<Ledger>> {
        Arc::clone(self.ledger.get_or_insert_with(|| {
            Arc::new(RwLock::new(Ledger::new(
                Arc::new(CodeRegistry::standard()),
                ChainParams::default(),
                &[],
            )))
        }))
    }

    /// Reads see sealed state only, so read steps seal pending work first.
    fn seal_pending(&mut self) {
        let ledger = self.ledger();
        let mut l = ledger.write().unwrap();
        if l.has_pending() {
            l.seal_block();
        }
    }

    fn gw(&self) -> Result<&Gateway, String> {
        self.gateway.as_ref().ok_or_else(|| "no gateway; add a `gateway` step".to_string())
    }

    fn report(&self, status: impl Into<String>, detail: impl Into<String>) -> StepReport {
        StepReport {
            index: self.index,
            line: self.line,
            verb: self.verb.clone(),
            status: status.into(),
            receipt_digest: None,
            events: 0,
            detail: detail.into(),
        }
    }

    fn signer(&self, name: &str) -> Result<&Signer, String> {
        self.signers.get(name).ok_or_else(|| format!("unknown account {name:?}"))
    }

    fn contract(&self, name: &str) -> Result<ContractAddress, String> {
        if let Some(a) = self.contracts.get(name) {
            return Ok(*a);
        }
        name.parse::<ContractAddress>()
            .map_err(|_| format!("unknown contract {name:?}"))
    }

    fn account(&self, name: &str) -> Result<AccountId, String> {
        self.accounts
            .get(name)
            .copied()
            .ok_or_else(|| format!("unknown account {name:?}"))
    }

    fn value(&self, lit: &str) -> Result<Value, String> {
        parse_literal(lit, &|name| {
            if let Some(var) = name.strip_prefix('$') {
                return self.vars.get(var).cloned();
            }
            let name = name.strip_prefix('@')?;
            if let Some(a) = self.accounts.get(name) {
                return Some(Value::account(*a));
            }
            self.contract(name).ok().map(Value::address)
        })
    }

    fn args(&self, step: &Step) -> Result<Args, String> {
        step.all("arg").map(|a| self.value(a)).collect::<Result<_, _>>().map(Args::new)
    }

    fn check_expect(step: &Step, status: &str) -> Result<(), String> {
        let want = step.get("expect").unwrap_or("Ok");
        if normalize_status(want) != normalize_status(status) {
            return Err(format!("expected {want}, got {status}"));
        }
        Ok(())
    }

    /// Submits a signed transaction, checks `expect=` and saves the return
    /// value under `save=`.
    fn submit(&mut self, step: &Step, who: &str, target: Target, method: &str, args: Args, tokens: u64) -> StepResult {
        let ledger = self.ledger();
        let receipt: Receipt = {
            let signer = self.signer(who)?;
            let mut l = ledger.write().unwrap();
            l.submit_call(signer, target, method, &args, tokens)
                .map_err(|e| format!("rejected: {e}"))?
        };
        let status = receipt.status.to_string();
        Self::check_expect(step, &status)?;
        let value = receipt.value();
        if let (Some(var), Some(v)) = (step.get("save"), &value) {
            self.vars.insert(var.to_string(), v.clone());
        }
        let mut r = self.report(status, value.filter(|v| !v.is_unit()).map(|v| v.to_string()).unwrap_or_default());
        r.receipt_digest = Some(receipt.digest());
        r.events = receipt.events.len();
        Ok(r)
    }

    fn datagram(&mut self, code: Code, path: &str, payload: &[u8], from: &str) -> Result<Reply, String> {
        let id = self.next_message_id;
        self.next_message_id = self.next_message_id.wrapping_add(1);
        let req = Message::request(code, id, path, payload).encode().map_err(|e| e.to_string())?;
        let reply = Message::decode(&self.gw()?.handle_datagram(&req, from)).map_err(|e| e.to_string())?;
        if reply.message_id != id {
            return Err(format!("reply id {} does not echo {id}", reply.message_id));
        }
        Ok(match reply.msg_type {
            MsgType::Ack => Reply::Ack(String::from_utf8_lossy(&reply.payload).into_owned()),
            _ => {
                let (reason, ce, detail) = reply.error_parts().ok_or("malformed error reply")?;
                Reply::Error(match ce {
                    Some(e) => format!("Reverted({})", e.name()),
                    None => format!("{reason}: {detail}"),
                })
            }
        })
    }

    /// Sends a gateway request and checks the outcome against `expect=`.
    fn gateway_step(&mut self, step: &Step, code: Code, path: &str, payload: &[u8], from: &str) -> StepResult {
        let (status, detail) = match self.datagram(code, path, payload, from)? {
            Reply::Ack(body) => ("Ok".to_string(), body),
            Reply::Error(e) => (e.split(':').next().unwrap_or_default().to_string(), e),
        };
        Self::check_expect(step, &status)?;
        Ok(self.report(status, detail))
    }

    fn thing_endpoint(thing: &str) -> String {
        format!("sim://thing/{thing}")
    }

    fn requester_endpoint(name: &str) -> String {
        format!("sim://{name}")
    }

    fn step(&mut self, index: usize, step: &Step) -> StepResult {
        self.index = index;
        self.line = step.line;
        self.verb = step.verb.clone();
        match step.verb.as_str() {
            "genesis" => self.genesis(step),
            "account" => {
                let ledger = self.ledger();
                let mut names = Vec::new();
                for name in step.all("name") {
                    let (id, signer) = ledger
                        .write()
                        .unwrap()
                        .create_account(name.as_bytes())
                        .map_err(|e| e.to_string())?;
                    self.accounts.insert(name.to_string(), id);
                    self.signers.insert(name.to_string(), signer);
                    names.push(name);
                }
                Ok(self.report("ok", names.join(" ")))
            }
            "transfer" => {
                let to = self.account(required(step, "to")?)?;
                let amount = parse_u64(step, "amount")?;
                self.submit(step, required(step, "from")?, Target::Transfer(to), "", Args::empty(), amount)
            }
            "deploy" => {
                let name = required(step, "name")?.to_string();
                let args = self.args(step)?;
                let tokens = step.get("tokens").map_or(Ok(0), |_| parse_u64(step, "tokens"))?;
                let code = required(step, "code")?;
                let r = self.submit(step, required(step, "as")?, Target::Deploy(code.into()), "", args, tokens)?;
                if r.status == "Ok" {
                    let addr: Hash = r.detail.trim_start_matches("id:").parse().map_err(|_| "deploy returned no address")?;
                    self.contracts.insert(name, ContractAddress(addr));
                }
                Ok(r)
            }
            "call" => {
                let addr = self.contract(required(step, "contract")?)?;
                let args = self.args(step)?;
                let tokens = step.get("tokens").map_or(Ok(0), |_| parse_u64(step, "tokens"))?;
                self.submit(step, required(step, "as")?, Target::Contract(addr), required(step, "method")?, args, tokens)
            }
            "query" => {
                self.seal_pending();
                let addr = self.contract(required(step, "contract")?)?;
                let args = self.args(step)?;
                let result = self.ledger().read().unwrap().query(&addr, required(step, "method")?, &args);
                let v = match result {
                    Ok(v) => {
                        Self::check_expect(step, "Ok")?;
                        v
                    }
                    Err(e) => {
                        Self::check_expect(step, e.name())?;
                        return Ok(self.report(e.name(), ""));
                    }
                };
                if let Some(eq) = step.get("eq") {
                    let want = self.value(eq)?;
                    if want != v {
                        return Err(format!("expected {want}, got {v}"));
                    }
                }
                if let Some(var) = step.get("save") {
                    self.vars.insert(var.to_string(), v.clone());
                }
                Ok(self.report("ok", v.to_string()))
            }
            "kill" => {
                let addr = self.contract(required(step, "contract")?)?;
                self.submit(step, required(step, "as")?, Target::Contract(addr), "kill", Args::empty(), 0)
            }
            "seal" => {
                let blocks = step.get("blocks").map_or(Ok(1), |_| parse_u64(step, "blocks"))?;
                let ledger = self.ledger();
                let mut l = ledger.write().unwrap();
                for _ in 0..blocks {
                    l.seal_block();
                }
                Ok(self.report("ok", format!("height {}", l.height())))
            }
            "gateway" => {
                let seed = required(step, "seed")?;
                let gw = Gateway::new(self.ledger(), GatewayConfig::new(seed.as_bytes())).map_err(|e| e.to_string())?;
                self.gateway = Some(gw);
                Ok(self.report("ok", ""))
            }
            "requester" => {
                let name = required(step, "name")?;
                let id = self
                    .gw()?
                    .add_requester(&Self::requester_endpoint(name), name.as_bytes())
                    .map_err(|e| e.to_string())?;
                self.accounts.insert(name.to_string(), id);
                Ok(self.report("ok", Self::requester_endpoint(name)))
            }
            "register" => self.register(step),
            "authorize" => {
                let thing = required(step, "thing")?;
                let actor = self.account(required(step, "actor")?)?;
                self.gw()?.authorize(thing, actor).map_err(|e| e.to_string())?;
                Ok(self.report("ok", ""))
            }
            "push" => {
                let thing = required(step, "thing")?.to_string();
                let value: Milli = required(step, "value")?.parse().map_err(|e| format!("{e}"))?;
                let unit = self.network.things.get(&thing).map(|t| t.unit.clone()).unwrap_or_default();
                let body = format!("{value} {unit}");
                let path = format!("/things/{thing}/data");
                self.gateway_step(step, Code::Put, &path, body.trim().as_bytes(), &Self::thing_endpoint(&thing))
            }
            "simulate" => {
                let thing = required(step, "thing")?.to_string();
                let count = parse_u64(step, "count")?;
                let path = format!("/things/{thing}/data");
                let mut last = String::new();
                for _ in 0..count {
                    let sim = self
                        .network
                        .things
                        .get_mut(&thing)
                        .ok_or_else(|| format!("no simulated thing {thing:?}"))?;
                    let body = format!("{} {}", sim.next_measurement(), sim.unit);
                    match self.datagram(Code::Put, &path, body.trim().as_bytes(), &Self::thing_endpoint(&thing))? {
                        Reply::Ack(_) => last = body,
                        Reply::Error(e) => return Err(format!("push {body:?} failed: {e}")),
                    }
                }
                Ok(self.report("ok", format!("{count} pushes, last {last}")))
            }
            "get" => {
                let thing = required(step, "thing")?.to_string();
                let path = match step.word(0) {
                    Some("last") | None => format!("/things/{thing}/last"),
                    Some("stats") => format!(
                        "/things/{thing}/stats?from={}&to={}",
                        step.get("from").unwrap_or("0"),
                        step.get("to").unwrap_or(&u64::MAX.to_string())
                    ),
                    Some(other) => return Err(format!("unknown get target {other:?}")),
                };
                let r = self.gateway_step(step, Code::Get, &path, b"", &Self::thing_endpoint(&thing))?;
                if let Some(eq) = step.get("eq") {
                    if r.detail != eq {
                        return Err(format!("expected {eq:?}, got {:?}", r.detail));
                    }
                }
                Ok(r)
            }
            "actuate" => {
                let thing = required(step, "thing")?;
                let from = required(step, "from")?;
                let mut body = required(step, "action")?.to_string();
                if let Some(a) = step.get("args") {
                    body.push(' ');
                    body.push_str(a);
                }
                let path = format!("/things/{thing}/actuate");
                self.gateway_step(step, Code::Post, &path, body.as_bytes(), &Self::requester_endpoint(from))
            }
            "watch" => {
                let failing: Vec<String> = step
                    .all("fail")
                    .map(|f| {
                        if f.contains("://") {
                            f.to_string()
                        } else {
                            Self::thing_endpoint(f)
                        }
                    })
                    .collect();
                self.seal_pending();
                self.network.unreachable.extend(failing.iter().cloned());
                let gw = self.gateway.as_ref().ok_or("no gateway")?;
                let report = gw.poll_events(&mut self.network, &self.clock, None);
                for f in &failing {
                    self.network.unreachable.remove(f);
                }
                let report = report.map_err(|e| e.to_string())?;
                if let Some(n) = step.get("delivered") {
                    if n != report.delivered.to_string() {
                        return Err(format!("expected {n} deliveries, got {}", report.delivered));
                    }
                }
                Ok(self.report(
                    "ok",
                    format!("delivered={} dead_lettered={}", report.delivered, report.dead_lettered),
                ))
            }
            "subscribe" => {
                let topic = self.contract(required(step, "topic")?)?;
                let sink = required(step, "sink")?;
                let sink = if sink.starts_with('@') { self.value(sink)? } else { Value::str(sink) };
                let args = Args::new(vec![Value::str(required(step, "pattern")?), sink]);
                self.submit(step, required(step, "as")?, Target::Contract(topic), "subscribe", args, 0)
            }
            "publish" => {
                let topic = self.contract(required(step, "topic")?)?;
                let payload = step.get("payload").unwrap_or_default().as_bytes().to_vec();
                let args = Args::new(vec![Value::str(required(step, "path")?), Value::Bytes(payload)]);
                self.submit(step, required(step, "as")?, Target::Contract(topic), "publish", args, 0)
            }
            "escrow-commit" => {
                let escrow = self.contract(required(step, "escrow")?)?;
                let provider = self.account(required(step, "provider")?)?;
                let amount = parse_u64(step, "amount")?;
                let deadline = required(step, "deadline")?;
                let deadline = match deadline.strip_prefix('+') {
                    Some(rel) => {
                        let rel: u64 = rel.parse().map_err(|_| "bad deadline")?;
                        self.ledger().read().unwrap().height() + rel
                    }
                    None => deadline.parse().map_err(|_| "bad deadline")?,
                };
                let args = Args::new(vec![Value::account(provider), Value::U64(amount), Value::U64(deadline)]);
                self.submit(step, required(step, "as")?, Target::Contract(escrow), "commit", args, amount)
            }
            "escrow-confirm" | "escrow-refund" => {
                let escrow = self.contract(required(step, "escrow")?)?;
                let deal = self.value(required(step, "deal")?)?;
                let method = if step.verb == "escrow-confirm" { "confirm" } else { "refund" };
                self.submit(step, required(step, "as")?, Target::Contract(escrow), method, Args::new(vec![deal]), 0)
            }
            "resolve" => {
                self.seal_pending();
                self.resolve(step)
            }
            "assert" => {
                self.seal_pending();
                self.assert(step)
            }
            other => Err(format!("unknown verb {other:?}")),
        }
    }

    fn genesis(&mut self, step: &Step) -> StepResult {
        if self.ledger.is_some() {
            return Err("genesis must come first".into());
        }
        if self.seed_override.is_none() && step.get("seed").is_some() {
            self.seed = parse_u64(step, "seed")?;
        }
        let mut params = ChainParams::default();
        if step.get("tx_cap").is_some() {
            params.tx_cap = parse_u64(step, "tx_cap")? as u32;
        }
        let mut allocations = Vec::new();
        for entry in step.all("fund").flat_map(|f| f.split(',')).filter(|e| !e.is_empty()) {
            let (name, amount) = entry.split_once(':').ok_or_else(|| format!("bad fund entry {entry:?}"))?;
            let amount: u64 = amount.parse().map_err(|_| format!("bad amount in {entry:?}"))?;
            let signer = Signer::from_seed(name.as_bytes()).ok_or("empty account name")?;
            allocations.push((signer.public_key(), amount));
            self.accounts.insert(name.to_string(), signer.account_id());
            self.signers.insert(name.to_string(), signer);
        }
        self.ledger = Some(Arc::new(RwLock::new(Ledger::new(
            Arc::new(CodeRegistry::standard()),
            params,
            &allocations,
        ))));
        Ok(self.report("ok", format!("seed={} accounts={}", self.seed, allocations.len())))
    }

    fn register(&mut self, step: &Step) -> StepResult {
        let thing = required(step, "thing")?;
        let sink = Self::thing_endpoint(thing);
        let rec = self.gw()?.register_thing(thing, &sink).map_err(|e| e.to_string())?;
        let start: Milli = step.get("start").unwrap_or("20.000").parse().map_err(|e| format!("{e}"))?;
        let walk: Milli = step.get("step").unwrap_or("0.250").parse().map_err(|e| format!("{e}"))?;
        let sim = SimThing::new(thing, self.seed, start, walk, step.get("unit").unwrap_or(""));
        self.network.things.insert(thing.to_string(), sim);
        self.network.sinks.insert(sink, thing.to_string());
        self.accounts.insert(thing.to_string(), rec.account);
        self.contracts.insert(format!("{thing}.feed"), rec.feed);
        self.contracts.insert(format!("{thing}.actuation"), rec.actuation);
        Ok(self.report("ok", format!("feed={} actuation={}", rec.feed, rec.actuation)))
    }

    fn resolve(&mut self, step: &Step) -> StepResult {
        let name: Name = required(step, "name")?.parse().map_err(|e: resolver::ResolveError| e.to_string())?;
        let root = self.contract(required(step, "root")?)?;
        let ledger = self.ledger();
        let l = ledger.read().unwrap();
        match resolver::resolve(l.state(), &name, root) {
            Ok(r) => {
                if let Some(e) = step.get("error") {
                    return Err(format!("expected {e}, resolved instead"));
                }
                let key = r.record.service_key.as_deref().map(hex::encode).unwrap_or_default();
                if let Some(want) = step.get("key") {
                    if want != key {
                        return Err(format!("expected key {want}, got {key}"));
                    }
                }
                Ok(self.report("ok", format!("key={key} depth={}", r.depth)))
            }
            Err(e) => {
                let kind = format!("{e:?}");
                match step.get("error") {
                    Some(want) if kind.starts_with(want) => Ok(self.report("ok", e.to_string())),
                    _ => Err(format!("resolve failed: {e}")),
                }
            }
        }
    }

    /// `assert <kind> ...`:
    ///
    /// - `last thing=T eq=21.000`
    /// - `balance of=N eq=AMOUNT`
    /// - `supply eq=N`
    /// - `history contract=C key=K len=N`
    /// - `actuations thing=T count=N`
    /// - `notifications sink=URI count=N`
    /// - `killed contract=C`
    /// - `audit name=N root=R len=N`
    fn assert(&mut self, step: &Step) -> StepResult {
        let ledger = self.ledger();
        let l = ledger.read().unwrap();
        let check = |got: String, want: &str| {
            if got == want {
                Ok(())
            } else {
                Err(format!("expected {want}, got {got}"))
            }
        };
        let kind = step.word(0).ok_or("assert needs a kind")?;
        match kind {
            "last" => {
                let thing = required(step, "thing")?;
                let feed = self.contract(&format!("{thing}.feed"))?;
                let v = l
                    .read_value(&feed, crate::stdlib::feed::LAST)
                    .map_err(|e| e.to_string())?
                    .ok_or("feed is empty")?;
                let m = Measurement::from_value(&v).ok_or("bad measurement")?;
                let want: Milli = required(step, "eq")?.parse().map_err(|e| format!("{e}"))?;
                check(m.value.to_string(), &want.to_string())?;
            }
            "balance" => {
                let id = self.account(required(step, "of")?)?;
                check(l.balance(&id).unwrap_or(0).to_string(), required(step, "eq")?)?;
            }
            "supply" => check(l.total_supply().to_string(), required(step, "eq")?)?,
            "history" => {
                let addr = self.contract(required(step, "contract")?)?;
                let h = l.history(&addr, required(step, "key")?.as_bytes()).map_err(|e| e.to_string())?;
                check(h.len().to_string(), required(step, "len")?)?;
            }
            "actuations" => {
                let thing = required(step, "thing")?;
                let n = self.network.things.get(thing).map_or(0, |t| t.actuations.len());
                check(n.to_string(), required(step, "count")?)?;
            }
            "notifications" => {
                let n = self.network.notifications.get(required(step, "sink")?).map_or(0, Vec::len);
                check(n.to_string(), required(step, "count")?)?;
            }
            "killed" => {
                let addr = self.contract(required(step, "contract")?)?;
                let info = l.contract(&addr).ok_or("unknown contract")?;
                check(info.killed.to_string(), "true")?;
            }
            "audit" => {
                let name: Name = required(step, "name")?.parse().map_err(|e: resolver::ResolveError| e.to_string())?;
                let root = self.contract(required(step, "root")?)?;
                let trail = resolver::audit_trail(l.state(), &name, root).map_err(|e| e.to_string())?;
                check(trail.len().to_string(), required(step, "len")?)?;
            }
            other => return Err(format!("unknown assertion {other:?}")),
        }
        Ok(self.report("ok", kind))
    }

    fn finish(mut self, export: Option<&Path>) -> Result<Outcome, ScenarioError> {
        let ledger = self.ledger();
        let report = {
            let mut l = ledger.write().unwrap();
            if l.has_pending() {
                l.seal_block();
            }
            if let Some(path) = export {
                export_chain(path, l.blocks())?;
            }
            Report {
                seed: self.seed,
                steps: std::mem::take(&mut self.reports),
                height: l.height(),
                transactions: l.blocks().iter().map(|b| b.txs.len() as u64).sum(),
                state_digest: l.state_digest(),
                chain_export: export.map(Path::to_path_buf),
                actuations_delivered: self.network.things.values().map(|t| t.actuations.len()).sum(),
                dead_letters: self.gateway.as_ref().map_or(0, |g| g.dead_letters().len()),
            }
        };
        Ok(Outcome {
            report,
            ledger,
            gateway: self.gateway,
            network: self.network,
            bindings: Bindings {
                accounts: self.accounts,
                contracts: self.contracts,
            },
        })
    }
}

#[cfg(test)]
mod tests;
