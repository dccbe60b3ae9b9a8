//! Standard contract behaviors.
//!
//! | code id      | purpose                                                    |
//! |--------------|------------------------------------------------------------|
//! | `identity`   | certificate-style attribute list bound to a subject key    |
//! | `zone`       | label -> record mappings with delegation to child zones    |
//! | `feed`       | on-chain measurements with last/min/max/avg queries        |
//! | `pointer`    | off-chain data pointers anchored by content hash           |
//! | `topic`      | pub-sub subscriptions with `+` / `#` wildcards             |
//! | `actuation`  | authorized actuation requests surfaced as events           |
//! | `escrow`     | customer/provider payments held until confirm or refund    |
//! | `skeleton`   | method -> implementation-contract indirection              |
//! | `access`     | authorization tokens with holder, scope and expiry         |
//! | `thing-stub` | manufacturer device description                            |
//! | `thing-ext`  | third-party extension of `thing-stub`                      |
//! | `stats-v1`   | pure mean over values (truncating; kept for upgrade demos) |
//! | `stats-v2`   | pure mean over values, rounded half-up                     |
//!
//! Method signatures are listed in `docs/cookbook.md`.

pub mod access;
pub mod actuation;
pub mod escrow;
pub mod feed;
mod fixed;
pub mod identity;
pub mod pointer;
pub mod skeleton;
pub mod stats;
pub mod thing;
pub mod topic;
pub mod zone;

pub use fixed::{Milli, ParseMilliError};

use crate::codec::Value;
use crate::hash::AccountId;
use crate::runtime::{CodeRegistry, ContractError, Ctx};

pub fn register_all(reg: &mut CodeRegistry) {
    reg.register(identity::Identity)
        .register(zone::Zone)
        .register(feed::Feed)
        .register(pointer::Pointer)
        .register(topic::Topic)
        .register(actuation::Actuation)
        .register(escrow::Escrow)
        .register(skeleton::Skeleton)
        .register(access::Access)
        .register(thing::ThingStub)
        .register(thing::ThingExt)
        .register(stats::StatsV1)
        .register(stats::StatsV2);
}

/// Storage key for item `n` of a sequence, ordered by `n`.
pub(crate) fn seq_key(prefix: &str, n: u64) -> Vec<u8> {
    format!("{prefix}/{n:016x}").into_bytes()
}

pub(crate) fn named_key(prefix: &str, name: &str) -> Vec<u8> {
    format!("{prefix}/{name}").into_bytes()
}

/// Reads and bumps a counter cell, returning the value before the bump.
pub(crate) fn next_seq(ctx: &mut Ctx<'_, '_>, counter: &[u8]) -> u64 {
    let n = ctx.get_value(counter).and_then(|v| v.as_u64()).unwrap_or(0);
    ctx.set_value(counter, &Value::U64(n + 1));
    n
}

/// Owner-managed list of accounts, stored as `<prefix>/<hex id>` cells. The
/// owner is always a member.
pub(crate) struct MemberList(pub &'static str);

impl MemberList {
    fn key(&self, id: &AccountId) -> Vec<u8> {
        named_key(self.0, &id.to_string())
    }

    pub fn contains(&self, ctx: &Ctx<'_, '_>, id: &AccountId) -> bool {
        *id == ctx.owner() || ctx.get(&self.key(id)).is_some()
    }

    pub fn add(&self, ctx: &mut Ctx<'_, '_>, id: &AccountId) -> Result<Value, ContractError> {
        ctx.require_owner()?;
        ctx.set_value(&self.key(id), &Value::Bool(true));
        Ok(Value::Unit)
    }

    pub fn remove(&self, ctx: &mut Ctx<'_, '_>, id: &AccountId) -> Result<Value, ContractError> {
        ctx.require_owner()?;
        ctx.remove(&self.key(id));
        Ok(Value::Unit)
    }

    pub fn require(&self, ctx: &Ctx<'_, '_>) -> Result<(), ContractError> {
        if self.contains(ctx, &ctx.caller()) {
            Ok(())
        } else {
            Err(ContractError::NotAuthorized)
        }
    }
}

#[cfg(test)]
pub(crate) mod testkit {
    //! Small harness for driving behaviors through a real ledger.

    use crate::codec::{Args, Value};
    use crate::crypto::Signer;
    use crate::hash::ContractAddress;
    use crate::ledger::{Ledger, Receipt, Target};

    pub struct Kit {
        pub ledger: Ledger,
    }

    pub fn signer(name: &str) -> Signer {
        Signer::from_seed(name.as_bytes()).unwrap()
    }

    impl Kit {
        pub fn new(funded: &[(&str, u64)], others: &[&str]) -> Kit {
            let mut ledger = Ledger::with_seeded_genesis(funded);
            for name in others {
                ledger.create_account(name.as_bytes()).unwrap();
            }
            ledger.seal_block();
            Kit { ledger }
        }

        pub fn deploy(&mut self, by: &str, code: &str, args: Vec<Value>) -> ContractAddress {
            let r = self.deploy_with(by, code, args, 0);
            assert!(r.is_ok(), "deploy {code} failed: {:?}", r.status);
            ContractAddress(r.value().unwrap().as_id().unwrap())
        }

        pub fn deploy_with(&mut self, by: &str, code: &str, args: Vec<Value>, tokens: u64) -> Receipt {
            let r = self
                .ledger
                .submit_call(&signer(by), Target::Deploy(code.into()), "", &Args::new(args), tokens)
                .unwrap();
            self.ledger.seal_block();
            r
        }

        pub fn call(&mut self, by: &str, addr: ContractAddress, method: &str, args: Vec<Value>) -> Receipt {
            self.call_with(by, addr, method, args, 0)
        }

        pub fn call_with(
            &mut self,
            by: &str,
            addr: ContractAddress,
            method: &str,
            args: Vec<Value>,
            tokens: u64,
        ) -> Receipt {
            let r = self
                .ledger
                .submit_call(&signer(by), Target::Contract(addr), method, &Args::new(args), tokens)
                .unwrap();
            self.ledger.seal_block();
            r
        }

        pub fn ok(&mut self, by: &str, addr: ContractAddress, method: &str, args: Vec<Value>) -> Value {
            let r = self.call(by, addr, method, args);
            assert!(r.is_ok(), "{method} reverted: {:?}", r.status);
            r.value().unwrap()
        }

        pub fn id(name: &str) -> Value {
            Value::account(signer(name).account_id())
        }
    }
}
