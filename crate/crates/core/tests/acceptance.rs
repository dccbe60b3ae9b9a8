//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits nonzero if any failed.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::{Arc, RwLock};
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use thingledger_core::crypto::derive_secret;
use thingledger_core::gateway::delivery::{OutboundKind, RecordingDelivery, SimClock};
use thingledger_core::gateway::journal::EventKey;
use thingledger_core::gateway::wire::{salvage_message_id, Code, Message, MsgType, MAX_DATAGRAM};
use thingledger_core::gateway::{thing_seed, Gateway, GatewayConfig, Requester};
use thingledger_core::ledger::{decode_chain, encode_chain, LedgerError};
use thingledger_core::resolver::{self, Name, ResolveError};
use thingledger_core::scenario::{run_script, Options, SMART_BUILDING};
use thingledger_core::stdlib::stats::mean_truncating;
use thingledger_core::stdlib::topic::{Notification, NOTIFY_EVENT};
use thingledger_core::{
    Args, Canonical, CodeRegistry, ContractAddress, ContractError, Ledger, Milli, Receipt, Signer, Status, Target,
    Value,
};

type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn signer(name: &str) -> Signer {
    Signer::from_seed(name.as_bytes()).unwrap()
}

fn call(l: &mut Ledger, who: &Signer, addr: ContractAddress, method: &str, args: Vec<Value>, tokens: u64) -> Receipt {
    l.submit_call(who, Target::Contract(addr), method, &Args::new(args), tokens)
        .expect("valid transaction")
}

fn deploy(l: &mut Ledger, who: &Signer, code: &str, args: Vec<Value>, tokens: u64) -> ContractAddress {
    let r = l
        .submit_call(who, Target::Deploy(code.into()), "", &Args::new(args), tokens)
        .expect("valid transaction");
    assert!(r.is_ok(), "deploy {code}: {:?}", r.status);
    ContractAddress(r.value().and_then(|v| v.as_id()).unwrap())
}

// 1 ------------------------------------------------------------------------

fn determinism() -> Check {
    let mut digests = Vec::new();
    let mut slowest = Duration::ZERO;
    let mut txs = 0;
    for _ in 0..3 {
        let start = Instant::now();
        let out = run_script(SMART_BUILDING, &Options { seed: Some(42), export: None }).map_err(|e| e.to_string())?;
        let took = start.elapsed();
        ensure!(took < Duration::from_secs(10), "run took {took:?}");
        slowest = slowest.max(took);
        txs = out.report.transactions;
        digests.push((out.report.state_digest, out.report));
    }
    ensure!(txs >= 200, "only {txs} transactions");
    ensure!(
        digests.windows(2).all(|w| w[0] == w[1]),
        "digests differ: {:?}",
        digests.iter().map(|d| d.0).collect::<Vec<_>>()
    );
    Ok(format!("3 runs, {txs} txs, digest {}, slowest {slowest:?}", digests[0].0.short()))
}

// 2 ------------------------------------------------------------------------

fn export_replay() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("smart.chain");
    let out = run_script(SMART_BUILDING, &Options { seed: None, export: Some(path.clone()) }).map_err(|e| e.to_string())?;
    let registry = CodeRegistry::standard();
    let blocks = thingledger_core::ledger::import_chain(&path).map_err(|e| e.to_string())?;
    let replayed = Ledger::replay(&blocks, &registry).map_err(|e| e.to_string())?;
    ensure!(replayed == out.report.state_digest, "replay {replayed} != live {}", out.report.state_digest);

    let bytes = std::fs::read(&path).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut detected = 0;
    for trial in 0..100 {
        let mut bad = bytes.clone();
        let i = rng.gen_range(0..bad.len());
        bad[i] ^= rng.gen_range(1..=255u8);
        match decode_chain(&bad).and_then(|b| Ledger::replay(&b, &registry)) {
            Err(LedgerError::BrokenChain(_)) => detected += 1,
            other => return Err(format!("trial {trial}: byte {i} corrupted, got {other:?}")),
        }
    }
    Ok(format!("replay matches live digest; {detected}/100 corruptions detected"))
}

// 3 ------------------------------------------------------------------------

const LABELS: [&str; 6] = ["a", "b", "c", "gr", "aueb", "lab"];

enum Expect {
    Key(Option<Vec<u8>>),
    Loop(ContractAddress),
    Dangling(String),
}

/// Builds one random tree and returns the oracle's expectation per name.
fn random_zone_tree(rng: &mut ChaCha8Rng) -> (Ledger, ContractAddress, BTreeMap<String, Expect>) {
    let owner = signer("council");
    let mut l = Ledger::with_seeded_genesis(&[("council", 1)]);
    let root = deploy(&mut l, &owner, "zone", vec![], 0);
    // zone for each delegated name, keyed by dotted name ("" = root)
    let mut zones: HashMap<String, ContractAddress> = HashMap::from([(String::new(), root)]);
    let mut flat: BTreeMap<String, Vec<u8>> = BTreeMap::new();
    let names = rng.gen_range(1..=50);
    for _ in 0..names {
        let depth = rng.gen_range(1..=4);
        let labels: Vec<&str> = (0..depth).map(|_| *LABELS.choose(rng).unwrap()).collect();
        // labels are root-most first here
        let mut parent = String::new();
        for label in &labels[..depth - 1] {
            let child = if parent.is_empty() { label.to_string() } else { format!("{label}.{parent}") };
            if !zones.contains_key(&child) {
                let z = deploy(&mut l, &owner, "zone", vec![], 0);
                let r = call(&mut l, &owner, zones[&parent], "delegate", vec![Value::str(*label), Value::address(z)], 0);
                assert!(r.is_ok());
                zones.insert(child.clone(), z);
            }
            parent = child;
        }
        let leaf = labels[depth - 1];
        let full = if parent.is_empty() { leaf.to_string() } else { format!("{leaf}.{parent}") };
        let key: Vec<u8> = (0..4).map(|_| rng.gen()).collect();
        let r = call(
            &mut l,
            &owner,
            zones[&parent],
            "set_mapping",
            vec![Value::str(leaf), Value::Bytes(key.clone()), Value::Unit, Value::Unit],
            0,
        );
        assert!(r.is_ok());
        flat.insert(full, key);
    }
    let mut expect: BTreeMap<String, Expect> = BTreeMap::new();
    // A loop back to the root and a delegation to a killed zone, hung off
    // random existing zones.
    let mut zone_names: Vec<String> = zones.keys().cloned().collect();
    zone_names.sort();
    if rng.gen_bool(0.5) {
        let at = zone_names.choose(rng).unwrap().clone();
        call(&mut l, &owner, zones[&at], "delegate", vec![Value::str("loop"), Value::address(root)], 0);
        let via = if at.is_empty() { "loop".to_string() } else { format!("loop.{at}") };
        let first = LABELS.choose(rng).unwrap();
        expect.insert(format!("{first}.{via}"), Expect::Loop(root));
    }
    if rng.gen_bool(0.5) {
        let at = zone_names.choose(rng).unwrap().clone();
        let dead = deploy(&mut l, &owner, "zone", vec![], 0);
        call(&mut l, &owner, dead, "set_mapping", vec![Value::str("x"), Value::Bytes(vec![9]), Value::Unit, Value::Unit], 0);
        call(&mut l, &owner, zones[&at], "delegate", vec![Value::str("gone"), Value::address(dead)], 0);
        call(&mut l, &owner, dead, "kill", vec![], 0);
        let via = if at.is_empty() { "gone".to_string() } else { format!("gone.{at}") };
        expect.insert(format!("x.{via}"), Expect::Dangling("gone".into()));
    }
    l.seal_block();
    // Every present name, every intermediate name, and random absent names.
    for (name, key) in &flat {
        expect.insert(name.clone(), Expect::Key(Some(key.clone())));
    }
    for z in zone_names.iter().filter(|z| !z.is_empty()) {
        expect.entry(z.clone()).or_insert(Expect::Key(None));
    }
    for _ in 0..20 {
        let depth = rng.gen_range(1..=4);
        let name: Vec<&str> = (0..depth).map(|_| *LABELS.choose(rng).unwrap()).collect();
        let name = name.join(".");
        expect.entry(name).or_insert(Expect::Key(None));
    }
    (l, root, expect)
}

fn resolution_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut checked, mut loops, mut dangling) = (0, 0, 0);
    for tree in 0..200 {
        let (l, root, expect) = random_zone_tree(&mut rng);
        for (name, want) in &expect {
            let parsed: Name = name.parse().map_err(|e| format!("tree {tree}: {name}: {e}"))?;
            let got = resolver::resolve(l.state(), &parsed, root);
            match want {
                Expect::Key(key) => {
                    let got_key = match &got {
                        Ok(r) => r.record.service_key.clone(),
                        Err(ResolveError::NameNotFound(_)) => None,
                        Err(e) => return Err(format!("tree {tree}: {name}: unexpected {e}")),
                    };
                    ensure!(&got_key == key, "tree {tree}: {name}: got {got_key:?}, oracle {key:?}");
                    if let (None, Ok(r)) = (key, &got) {
                        // Only delegating records may resolve without a leaf.
                        ensure!(r.record.delegation.is_some(), "tree {tree}: {name}: empty record");
                    }
                }
                Expect::Loop(at) => {
                    ensure!(matches!(&got, Err(ResolveError::LoopDetected(a)) if a == at), "tree {tree}: {name}: {got:?}");
                    loops += 1;
                }
                Expect::Dangling(label) => {
                    ensure!(
                        matches!(&got, Err(ResolveError::DanglingDelegation { label: l, .. }) if l == label),
                        "tree {tree}: {name}: {got:?}"
                    );
                    dangling += 1;
                }
            }
            checked += 1;
        }
    }
    Ok(format!("200 trees, {checked} names, {loops} loops, {dangling} dangling delegations"))
}

// 4 ------------------------------------------------------------------------

fn brute_match(pattern: &[&str], path: &[&str]) -> bool {
    match pattern.split_first() {
        None => path.is_empty(),
        Some((&"#", _)) => true,
        Some((&"+", rest)) => !path.is_empty() && brute_match(rest, &path[1..]),
        Some((label, rest)) => path.first() == Some(label) && brute_match(rest, &path[1..]),
    }
}

fn random_pattern(rng: &mut ChaCha8Rng) -> Vec<&'static str> {
    let len = rng.gen_range(1..=4);
    let mut segs: Vec<&str> = (0..len)
        .map(|_| *["building", "room", "temp", "hum", "+"].choose(rng).unwrap())
        .collect();
    if rng.gen_bool(0.3) {
        *segs.last_mut().unwrap() = "#";
    }
    segs
}

fn pubsub_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let owner = signer("council");
    let tenant = signer("tenant");
    let mut l = Ledger::with_seeded_genesis(&[("council", 1), ("tenant", 1)]);
    let mut notified = 0;
    for case in 0..500 {
        let topic = deploy(&mut l, &owner, "topic", vec![], 0);
        let mut live: BTreeMap<u64, Vec<&str>> = BTreeMap::new();
        for _ in 0..rng.gen_range(0..8) {
            let pat = random_pattern(&mut rng);
            let r = call(&mut l, &tenant, topic, "subscribe", vec![Value::str(pat.join("/")), Value::str("udp://s:1")], 0);
            let id = r.value().and_then(|v| v.as_u64()).ok_or(format!("case {case}: subscribe {:?}", r.status))?;
            live.insert(id, pat);
        }
        if !live.is_empty() && rng.gen_bool(0.3) {
            let id = *live.keys().collect::<Vec<_>>().choose(&mut rng).unwrap();
            let id = *id;
            call(&mut l, &tenant, topic, "unsubscribe", vec![Value::U64(id)], 0);
            live.remove(&id);
        }
        let path: Vec<&str> = (0..rng.gen_range(1..=4))
            .map(|_| *["building", "room", "temp", "hum"].choose(&mut rng).unwrap())
            .collect();
        let r = call(&mut l, &owner, topic, "publish", vec![Value::str(path.join("/")), Value::Bytes(b"x".to_vec())], 0);
        ensure!(r.is_ok(), "case {case}: publish {:?}", r.status);
        let got: BTreeSet<u64> = r
            .events
            .iter()
            .filter(|e| e.name == NOTIFY_EVENT)
            .map(|e| Notification::from_bytes(&e.payload).unwrap().sub_id)
            .collect();
        let want: BTreeSet<u64> = live
            .iter()
            .filter(|(_, p)| brute_match(p, &path))
            .map(|(id, _)| *id)
            .collect();
        ensure!(got == want, "case {case}: path {path:?}, subs {live:?}: got {got:?}, want {want:?}");
        notified += got.len();
        if case % 50 == 49 {
            l.seal_block();
        }
    }
    Ok(format!("500 cases, {notified} notifications, all equal to brute force"))
}

// 5 ------------------------------------------------------------------------

#[derive(Clone, Copy, PartialEq)]
enum Deal {
    Open { customer: usize, amount: u64, deadline: u64 },
    Settled { customer: usize },
}

fn escrow_conservation() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let names = ["c0", "c1", "c2", "c3", "p0", "p1", "p2"];
    let alloc: Vec<(&str, u64)> = names.iter().map(|n| (*n, 100_000)).collect();
    let mut l = Ledger::with_seeded_genesis(&alloc);
    let signers: Vec<Signer> = names.iter().map(|n| signer(n)).collect();
    let escrow = deploy(&mut l, &signers[0], "escrow", vec![], 0);
    l.seal_block();
    let supply = l.total_supply();
    let mut deals: Vec<Deal> = Vec::new();
    let mut settle_events: HashMap<u64, usize> = HashMap::new();
    let (mut ops, mut early_refunds) = (0, 0);
    while ops < 1200 {
        let height = l.height() + 1;
        let who = rng.gen_range(0..names.len());
        let op = rng.gen_range(0..3);
        let (r, expected) = if op == 0 || deals.is_empty() {
            let amount = rng.gen_range(0..500);
            let attach = if rng.gen_bool(0.9) { amount } else { amount + 1 };
            let provider = rng.gen_range(4..7);
            let deadline = height + rng.gen_range(0..25);
            let r = call(
                &mut l,
                &signers[who],
                escrow,
                "commit",
                vec![Value::account(signers[provider].account_id()), Value::U64(amount), Value::U64(deadline)],
                attach,
            );
            let expected = if amount == 0 {
                Status::Reverted(ContractError::BadArgs)
            } else if attach != amount {
                Status::Reverted(ContractError::InsufficientTokens)
            } else {
                deals.push(Deal::Open { customer: who, amount, deadline });
                Status::Ok
            };
            (r, expected)
        } else {
            let id = rng.gen_range(0..deals.len());
            let refund = op == 2;
            let who = match deals[id] {
                Deal::Open { customer, .. } | Deal::Settled { customer } if rng.gen_bool(0.7) => customer,
                _ => who,
            };
            let r = call(
                &mut l,
                &signers[who],
                escrow,
                if refund { "refund" } else { "confirm" },
                vec![Value::U64(id as u64)],
                0,
            );
            let expected = match deals[id] {
                Deal::Open { customer, .. } | Deal::Settled { customer } if customer != who => {
                    Status::Reverted(ContractError::NotCustomer)
                }
                Deal::Settled { .. } => Status::Reverted(ContractError::AlreadySettled),
                Deal::Open { deadline, .. } if refund && height <= deadline => {
                    early_refunds += 1;
                    Status::Reverted(ContractError::TooEarly)
                }
                Deal::Open { amount, customer, .. } => {
                    ensure!(r.value() == Some(Value::U64(amount)), "deal {id}: paid {:?}", r.value());
                    deals[id] = Deal::Settled { customer };
                    Status::Ok
                }
            };
            (r, expected)
        };
        ensure!(r.status == expected, "op {ops}: got {:?}, expected {:?}", r.status, expected);
        for e in r.events.iter().filter(|e| e.name == "Released" || e.name == "Refunded") {
            let id = Value::from_bytes(&e.payload).ok().and_then(|v| v.as_list().and_then(|l| l[0].as_u64()));
            *settle_events.entry(id.ok_or("bad settle event")?).or_default() += 1;
        }
        if rng.gen_bool(0.5) {
            l.seal_block();
            ensure!(l.total_supply() == supply, "supply changed after op {ops}");
        }
        ops += 1;
    }
    l.seal_block();
    ensure!(l.total_supply() == supply, "supply changed");
    ensure!(settle_events.values().all(|n| *n == 1), "a deal settled twice");
    let held: u64 = deals
        .iter()
        .map(|d| match d {
            Deal::Open { amount, .. } => *amount,
            Deal::Settled { .. } => 0,
        })
        .sum();
    let balance = l.contract(&escrow).unwrap().balance;
    ensure!(balance == held, "escrow holds {balance}, open deals {held}");
    Ok(format!(
        "{ops} ops, {} deals, {} settled, {early_refunds} early refunds rejected, supply {supply}",
        deals.len(),
        settle_events.len()
    ))
}

// 6 ------------------------------------------------------------------------

fn skeleton_upgrade() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let owner = signer("company");
    let mut l = Ledger::with_seeded_genesis(&[("company", 1)]);
    let v1 = deploy(&mut l, &owner, "stats-v1", vec![], 0);
    let v2 = deploy(&mut l, &owner, "stats-v2", vec![], 0);
    let skel = deploy(&mut l, &owner, "skeleton", vec![], 0);
    call(&mut l, &owner, skel, "update", vec![Value::str("mean"), Value::address(v1)], 0);
    l.seal_block();
    let forward = |l: &Ledger, values: &[i64]| {
        let list = Value::List(values.iter().map(|v| Value::I64(*v)).collect());
        l.query(&skel, "forward", &Args::new(vec![Value::str("mean"), Value::List(vec![list])]))
    };
    let direct = |l: &Ledger, addr: ContractAddress, values: &[i64]| {
        l.query(&addr, "mean", &Args::new(vec![Value::List(values.iter().map(|v| Value::I64(*v)).collect())]))
    };
    let inputs: Vec<Vec<i64>> = (0..100)
        .map(|_| (0..rng.gen_range(1..20)).map(|_| rng.gen_range(-1_000_000..1_000_000)).collect())
        .collect();
    let before = forward(&l, &[1, 2]).map_err(|e| e.to_string())?;
    ensure!(before == Value::I64(1), "v1 mean of [1,2] = {before}");
    for v in &inputs {
        let routed = forward(&l, v).map_err(|e| e.to_string())?;
        ensure!(routed == direct(&l, v1, v).unwrap(), "v1 routed != direct for {v:?}");
        ensure!(routed == Value::I64(mean_truncating(v).unwrap()), "v1 mismatch for {v:?}");
    }
    let r = call(&mut l, &owner, skel, "update", vec![Value::str("mean"), Value::address(v2)], 0);
    ensure!(r.is_ok(), "update: {:?}", r.status);
    l.seal_block();
    let after = forward(&l, &[1, 2]).map_err(|e| e.to_string())?;
    ensure!(after == Value::I64(2), "v2 mean of [1,2] = {after}");
    for v in &inputs {
        let routed = forward(&l, v).map_err(|e| e.to_string())?;
        let want = Milli::mean_half_up(v.iter().map(|x| Milli(*x))).unwrap().0;
        ensure!(routed == direct(&l, v2, v).unwrap(), "v2 routed != direct for {v:?}");
        ensure!(routed == Value::I64(want), "v2 mismatch for {v:?}");
    }
    let hist = l.history(&skel, b"impl/mean").map_err(|e| e.to_string())?;
    let pointers: Vec<Option<Value>> = hist
        .iter()
        .map(|(_, b)| b.as_ref().and_then(|b| Value::from_bytes(b).ok()))
        .collect();
    ensure!(
        pointers == vec![Some(Value::address(v1)), Some(Value::address(v2))],
        "history {pointers:?}"
    );
    Ok("v1 then v2 behavior, both pointers in history, 100/100 routed == direct".into())
}

// 7 ------------------------------------------------------------------------

fn kill_switch() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (owner, customer, eve) = (signer("owner"), signer("customer"), signer("eve"));
    let mut l = Ledger::with_seeded_genesis(&[("owner", 1000), ("customer", 10_000), ("eve", 100)]);
    let escrow = deploy(&mut l, &owner, "escrow", vec![], 0);
    let provider = Value::account(owner.account_id());
    for amount in [100, 250, 400] {
        let r = call(&mut l, &customer, escrow, "commit", vec![provider.clone(), Value::U64(amount), Value::U64(99)], amount);
        ensure!(r.is_ok(), "commit {:?}", r.status);
    }
    l.seal_block();
    let held = l.contract(&escrow).unwrap().balance;
    let deal_key = b"deal/0000000000000001".to_vec();
    let before_state = l.read_state(&escrow, &deal_key).map_err(|e| e.to_string())?;
    let owner_before = l.balance(&owner.account_id()).unwrap();

    let r = call(&mut l, &eve, escrow, "kill", vec![], 0);
    ensure!(r.status == Status::Reverted(ContractError::NotOwner), "non-owner kill: {:?}", r.status);
    let r = call(&mut l, &owner, escrow, "kill", vec![], 0);
    ensure!(r.is_ok(), "kill: {:?}", r.status);
    l.seal_block();
    ensure!(l.contract(&escrow).unwrap().balance == 0, "contract balance not drained");
    ensure!(l.balance(&owner.account_id()).unwrap() == owner_before + held, "owner did not receive {held}");

    let methods = ["commit", "confirm", "refund", "deal", "kill", "nope"];
    let callers = [&owner, &customer, &eve];
    let mut rejected = 0;
    for i in 0..100 {
        let who = callers[rng.gen_range(0..3)];
        let method = methods.choose(&mut rng).unwrap();
        let tokens = if *method == "commit" { 10 } else { 0 };
        let args = vec![provider.clone(), Value::U64(10), Value::U64(5)];
        let r = call(&mut l, who, escrow, method, args, tokens);
        let want = if *method == "kill" { ContractError::AlreadyKilled } else { ContractError::ContractKilled };
        ensure!(r.status == Status::Reverted(want), "call {i} {method}: {:?}", r.status);
        rejected += 1;
    }
    l.seal_block();
    ensure!(l.contract(&escrow).unwrap().balance == 0, "killed contract accepted tokens");
    ensure!(
        l.read_state(&escrow, &deal_key).map_err(|e| e.to_string())? == before_state,
        "pre-kill state not readable"
    );
    let hist = l.history(&escrow, &deal_key).map_err(|e| e.to_string())?;
    ensure!(hist.len() == 1, "history has {} entries", hist.len());
    Ok(format!("{rejected}/100 post-kill calls rejected, {held} tokens returned, state and history readable"))
}

// 8 ------------------------------------------------------------------------

const COMPANY: &str = "10.0.0.2:5683";
const STRANGER: &str = "10.0.0.9:5683";
const THINGS: [&str; 3] = ["thing-17", "thing-18", "valve-1"];

fn gw_config() -> GatewayConfig {
    let mut c = GatewayConfig::new(b"acceptance-gw");
    for (endpoint, seed) in [(COMPANY, "company"), (STRANGER, "stranger")] {
        c.requesters.push(Requester {
            endpoint: endpoint.into(),
            account_seed: seed.into(),
        });
    }
    c
}

enum Sent {
    Valid { write: bool },
    Malformed,
}

fn random_datagram(rng: &mut ChaCha8Rng, id: u16) -> (Vec<u8>, Sent, &'static str) {
    let thing = *THINGS.choose(rng).unwrap();
    let from = if rng.gen_bool(0.7) { COMPANY } else { STRANGER };
    let valid = |code, path: String, body: &[u8]| Message::request(code, id, &path, body).encode().unwrap();
    match rng.gen_range(0..10) {
        0..=2 => {
            let v = Milli(rng.gen_range(-50_000..50_000));
            (valid(Code::Put, format!("/things/{thing}/data"), format!("{v} C").as_bytes()), Sent::Valid { write: true }, from)
        }
        3 => (valid(Code::Get, format!("/things/{thing}/last"), b""), Sent::Valid { write: false }, from),
        4 => (valid(Code::Get, format!("/things/{thing}/stats?from=0"), b""), Sent::Valid { write: false }, from),
        5 | 6 => {
            let action = *["valve_open", "valve_close", "reset"].choose(rng).unwrap();
            (valid(Code::Post, format!("/things/{thing}/actuate"), action.as_bytes()), Sent::Valid { write: true }, from)
        }
        7 => (valid(Code::Get, "/names/thermo.aueb.gr".into(), b""), Sent::Valid { write: false }, from),
        _ => {
            let mut buf = valid(Code::Put, format!("/things/{thing}/data"), b"1.000");
            match rng.gen_range(0..6) {
                0 => buf[0] = rng.gen_range(2..=255),
                1 => buf[1] = rng.gen_range(3..=255),
                2 => buf.truncate(rng.gen_range(0..buf.len())),
                3 => buf.extend_from_slice(&[0xAA; 3]),
                4 => buf = (0..rng.gen_range(0..40)).map(|_| rng.gen()).collect(),
                _ => buf.resize(MAX_DATAGRAM + 1 + rng.gen_range(0..100), 0),
            }
            (buf, Sent::Malformed, from)
        }
    }
}

struct GatewayRun {
    traffic: Vec<u8>,
    gateway_debug: String,
}

fn gateway_soundness(run: &mut GatewayRun) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let journal = dir.path().join("gw.journal");
    let ledger = Arc::new(RwLock::new(Ledger::with_seeded_genesis(&[])));
    let mut gw = Gateway::open(Arc::clone(&ledger), gw_config(), &journal).map_err(|e| e.to_string())?;
    for t in THINGS {
        gw.register_thing(t, &format!("udp://{t}:5683")).map_err(|e| e.to_string())?;
    }
    let company = gw.requester_account(COMPANY).unwrap();
    for t in THINGS {
        gw.authorize(t, company).map_err(|e| e.to_string())?;
    }
    let setup_height = ledger.read().unwrap().height();

    let mut rx = RecordingDelivery::default();
    let (mut accepted, mut malformed, mut crashes) = (Vec::new(), 0, 0);
    for i in 0..1000u32 {
        let id = rng.gen();
        let (buf, sent, from) = random_datagram(&mut rng, id);
        let reply_bytes = gw.handle_datagram(&buf, from);
        run.traffic.extend_from_slice(&buf);
        run.traffic.extend_from_slice(&reply_bytes);
        let reply = Message::decode(&reply_bytes).map_err(|e| format!("datagram {i}: undecodable reply {e}"))?;
        match sent {
            Sent::Malformed => {
                ensure!(reply.msg_type == MsgType::Error, "datagram {i}: malformed input accepted");
                ensure!(reply.message_id == salvage_message_id(&buf), "datagram {i}: id not echoed");
                malformed += 1;
            }
            Sent::Valid { write } => {
                ensure!(reply.message_id == id, "datagram {i}: id {} != {id}", reply.message_id);
                if write && reply.msg_type == MsgType::Ack {
                    let body = String::from_utf8(reply.payload.clone()).unwrap();
                    let pos = body.split(' ').nth(1).ok_or(format!("datagram {i}: ack {body:?}"))?;
                    let (h, tx) = pos.split_once('.').unwrap();
                    accepted.push((h.parse::<u64>().unwrap(), tx.parse::<u32>().unwrap()));
                }
            }
        }
        // Periodically poll with a small budget and then "crash".
        if i % 97 == 96 {
            let budget = rng.gen_range(0..4);
            gw.poll_events(&mut rx, &SimClock::default(), Some(budget)).map_err(|e| e.to_string())?;
            drop(gw);
            gw = Gateway::open(Arc::clone(&ledger), gw_config(), &journal).map_err(|e| e.to_string())?;
            crashes += 1;
        }
    }
    gw.poll_events(&mut rx, &SimClock::default(), None).map_err(|e| e.to_string())?;

    let l = ledger.read().unwrap();
    let accepted_set: BTreeSet<_> = accepted.iter().copied().collect();
    ensure!(accepted_set.len() == accepted.len(), "two writes acknowledged at one position");
    let things: Vec<_> = THINGS.iter().map(|t| gw.thing(t).unwrap()).collect();
    let write_targets: BTreeSet<ContractAddress> = things.iter().flat_map(|t| [t.feed, t.actuation]).collect();
    let mut on_chain_ok = BTreeSet::new();
    let mut actuate_events: BTreeSet<EventKey> = BTreeSet::new();
    let actuations: BTreeSet<ContractAddress> = things.iter().map(|t| t.actuation).collect();
    for ((h, tx), t, r) in l.receipts_after(None) {
        if h <= setup_height {
            continue;
        }
        if let Target::Contract(addr) = t.target {
            if write_targets.contains(&addr) && r.is_ok() {
                on_chain_ok.insert((h, tx));
            }
        }
        for (i, e) in r.events.iter().enumerate() {
            if e.name == "Actuate" && actuations.contains(&e.source) {
                actuate_events.insert((h, tx, i as u32));
            }
        }
    }
    ensure!(
        on_chain_ok == accepted_set,
        "{} accepted writes vs {} on-chain receipts",
        accepted_set.len(),
        on_chain_ok.len()
    );
    let delivered: BTreeSet<EventKey> = rx
        .accepted
        .iter()
        .filter(|o| matches!(o.kind, OutboundKind::Actuate { .. }))
        .map(|o| o.key)
        .collect();
    ensure!(gw.dead_letters().is_empty(), "unexpected dead letters");
    ensure!(
        delivered == actuate_events,
        "delivered {} actuations, chain has {}",
        delivered.len(),
        actuate_events.len()
    );
    run.gateway_debug = format!("{gw:?}");
    Ok(format!(
        "1000 datagrams ({malformed} malformed), {} writes = receipts, {} actuations delivered across {crashes} crashes, {} duplicates dropped",
        accepted.len(),
        delivered.len(),
        rx.duplicates
    ))
}

// 9 ------------------------------------------------------------------------

fn contains(hay: &[u8], needle: &[u8]) -> bool {
    hay.windows(needle.len()).any(|w| w == needle)
}

fn no_secrets(run: &GatewayRun) -> Check {
    let mut secrets: Vec<(String, [u8; 32])> = Vec::new();
    for t in THINGS {
        secrets.push((t.into(), derive_secret(&thing_seed(b"acceptance-gw", t)).unwrap()));
    }
    for t in ["thing-17", "thing-18", "valve-1"] {
        secrets.push((format!("scenario {t}"), derive_secret(&thing_seed(b"building-gw-master", t)).unwrap()));
    }
    for r in ["company", "stranger", "eve"] {
        secrets.push((r.into(), derive_secret(r.as_bytes()).unwrap()));
    }
    let out = run_script(SMART_BUILDING, &Options::default()).map_err(|e| e.to_string())?;
    let l = out.ledger.read().unwrap();
    let mut haystacks: Vec<(&str, Vec<u8>)> = vec![
        ("gateway traffic", run.traffic.clone()),
        ("gateway debug output", run.gateway_debug.clone().into_bytes()),
        ("chain export", encode_chain(l.blocks())),
    ];
    let mut storage = Vec::new();
    for c in l.state().contracts.values() {
        for (k, v) in &c.storage {
            storage.extend_from_slice(k);
            storage.extend_from_slice(v);
        }
        for (k, entries) in &c.history {
            storage.extend_from_slice(k);
            for (_, v) in entries {
                storage.extend(v.iter().flatten());
            }
        }
    }
    let storage_len = storage.len();
    haystacks.push(("contract state", storage));
    haystacks.push(("scenario report", serde_json::to_vec(&out.report).unwrap()));
    let mut scanned = 0;
    for (what, hay) in &haystacks {
        for (owner, secret) in &secrets {
            ensure!(!contains(hay, secret), "{owner}'s key bytes found in {what}");
            ensure!(!contains(hay, hex::encode(secret).as_bytes()), "{owner}'s key hex found in {what}");
        }
        scanned += hay.len();
    }
    Ok(format!("{} keys, {scanned} bytes scanned ({storage_len} of contract state)", secrets.len()))
}

fn main() {
    let mut run = GatewayRun {
        traffic: Vec::new(),
        gateway_debug: String::new(),
    };
    let results: Vec<(&str, Check)> = vec![
        ("1 determinism", determinism()),
        ("2 export/replay and corruption", export_replay()),
        ("3 resolution oracle", resolution_oracle()),
        ("4 pub-sub oracle", pubsub_oracle()),
        ("5 escrow conservation", escrow_conservation()),
        ("6 skeleton upgrade", skeleton_upgrade()),
        ("7 kill switch", kill_switch()),
        ("8 gateway soundness", gateway_soundness(&mut run)),
        ("9 no secrets", no_secrets(&run)),
    ];
    let mut failed = 0;
    for (name, result) in &results {
        match result {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
        }
    }
    println!("{} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
