//! Fixture builders shared by the benchmarks.

use std::sync::{Arc, RwLock};

use thingledger_core::gateway::{Gateway, GatewayConfig, Requester};
use thingledger_core::hash::ContractAddress;
use thingledger_core::{Args, Ledger, Signer, Target, Value};

/// A ledger with one funded account and its signer, after one sealed block
/// of up to `prefill` self-transfers.
pub fn funded_ledger(prefill: usize) -> (Ledger, Signer) {
    let mut ledger = Ledger::with_seeded_genesis(&[("bench", 1_000_000_000)]);
    let signer = Signer::from_seed(b"bench").expect("non-empty seed");
    for _ in 0..prefill {
        ledger
            .submit_call(&signer, Target::Transfer(signer.account_id()), "", &Args::empty(), 1)
            .expect("valid transfer");
    }
    ledger.seal_block();
    (ledger, signer)
}

/// A chain of `depth` zones, each delegating `l<i>` to the next, with a
/// leaf `leaf` in the last one. Returns the ledger, the root and the name.
pub fn zone_chain(depth: usize) -> (Ledger, ContractAddress, String) {
    let (mut ledger, signer) = funded_ledger(0);
    let mut zones = Vec::new();
    for _ in 0..depth {
        let r = ledger
            .submit_call(&signer, Target::Deploy("zone".into()), "", &Args::empty(), 0)
            .expect("deploy");
        zones.push(ContractAddress(r.value().and_then(|v| v.as_id()).expect("address")));
    }
    for (i, pair) in zones.windows(2).enumerate() {
        let args = Args::new(vec![Value::str(format!("l{i}")), Value::address(pair[1])]);
        ledger
            .submit_call(&signer, Target::Contract(pair[0]), "delegate", &args, 0)
            .expect("delegate");
    }
    let leaf = Args::new(vec![Value::str("leaf"), Value::Bytes(vec![1, 2, 3]), Value::Unit, Value::Unit]);
    ledger
        .submit_call(&signer, Target::Contract(*zones.last().unwrap()), "set_mapping", &leaf, 0)
        .expect("set_mapping");
    ledger.seal_block();
    let mut labels: Vec<String> = (0..depth.saturating_sub(1)).map(|i| format!("l{i}")).collect();
    labels.push("leaf".into());
    labels.reverse();
    (ledger, zones[0], labels.join("."))
}

/// A gateway with `things` registered Things and one authorized requester
/// at endpoint `bench:1`.
pub fn gateway(things: usize) -> Gateway {
    let ledger = Arc::new(RwLock::new(Ledger::with_seeded_genesis(&[])));
    let mut config = GatewayConfig::new(b"bench-gw");
    config.requesters.push(Requester {
        endpoint: "bench:1".into(),
        account_seed: "bench-requester".into(),
    });
    let gw = Gateway::new(ledger, config).expect("gateway");
    let requester = gw.requester_account("bench:1").expect("configured");
    for i in 0..things {
        let id = format!("thing-{i}");
        gw.register_thing(&id, &format!("udp://127.0.0.1:{}", 20000 + i)).expect("register");
        gw.authorize(&id, requester).expect("authorize");
    }
    gw
}
