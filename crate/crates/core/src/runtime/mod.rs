//! Contract runtime: deployment, dispatch, nested calls and the kill switch.
//!
//! Contract code is a registry of native behaviors keyed by `code_id`. A
//! behavior only sees the world through [`Ctx`], which exposes its own
//! storage, the authenticated caller, block height and tick, attached tokens,
//! event emission and synchronous calls into other contracts. Every
//! invocation runs against a snapshot; a failed invocation restores the
//! snapshot, so reverts leave no trace besides audit events.

mod error;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

pub use error::ContractError;

use crate::codec::{Args, Canonical, Encoder, Value};
use crate::hash::{AccountId, ContractAddress, Hash};
use crate::ledger::Event;
use crate::state::{ContractInstance, WorldState};

/// Maximum nesting of contract-to-contract calls, counting the outermost call.
pub const MAX_CALL_DEPTH: u8 = 8;

/// Method name reserved by the runtime for the owner-only kill switch.
pub const KILL_METHOD: &str = "kill";

/// A registered contract behavior. Implementations must be pure functions of
/// the state and call they are given.
pub trait Behavior: Send + Sync {
    fn code_id(&self) -> &'static str;

    /// Methods accepted by [`Behavior::call`]. Anything else is rejected with
    /// `MethodNotFound` before the behavior runs.
    fn methods(&self) -> &'static [&'static str];

    fn init(&self, _ctx: &mut Ctx<'_, '_>, _args: &Args) -> Result<(), ContractError> {
        Ok(())
    }

    fn call(&self, ctx: &mut Ctx<'_, '_>, method: &str, args: &Args) -> Result<Value, ContractError>;
}

/// Static table of behaviors available for deployment.
#[derive(Clone, Default)]
pub struct CodeRegistry {
    behaviors: BTreeMap<&'static str, Arc<dyn Behavior>>,
}

impl CodeRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registry with every standard-library behavior.
    pub fn standard() -> Self {
        let mut reg = Self::new();
        crate::stdlib::register_all(&mut reg);
        reg
    }

    pub fn register(&mut self, behavior: impl Behavior + 'static) -> &mut Self {
        self.behaviors.insert(behavior.code_id(), Arc::new(behavior));
        self
    }

    pub fn get(&self, code_id: &str) -> Option<&Arc<dyn Behavior>> {
        self.behaviors.get(code_id)
    }

    pub fn code_ids(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.behaviors.keys().copied()
    }
}

impl fmt::Debug for CodeRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.behaviors.keys()).finish()
    }
}

/// Block-level execution environment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Env {
    pub height: u64,
    pub tick: u64,
    pub tx_index: u32,
}

/// Contract address for a deployment by `deployer` at transaction `nonce`.
pub fn contract_address(deployer: &AccountId, nonce: u64) -> ContractAddress {
    let mut enc = Encoder::new();
    enc.raw(b"thingledger/contract/v1").put(deployer).u64(nonce);
    ContractAddress(Hash::of(&enc.finish()))
}

/// Where attached tokens come from.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Payer {
    Account(AccountId),
    Contract(ContractAddress),
}

/// One transaction's execution: the world it mutates plus the events it
/// has produced so far.
pub(crate) struct Exec<'w> {
    pub world: &'w mut WorldState,
    pub registry: &'w CodeRegistry,
    pub env: Env,
    /// Emitted events in order. Durable events (the flag) survive a revert;
    /// they carry access-decision logs.
    pub events: Vec<(Event, bool)>,
}

impl<'w> Exec<'w> {
    pub fn new(world: &'w mut WorldState, registry: &'w CodeRegistry, env: Env) -> Self {
        Self {
            world,
            registry,
            env,
            events: Vec::new(),
        }
    }

    fn move_tokens(&mut self, from: Payer, to: &ContractAddress, amount: u64) -> Result<(), ContractError> {
        if amount == 0 {
            return Ok(());
        }
        match from {
            Payer::Account(id) => {
                let acct = self.world.accounts.get_mut(&id).ok_or(ContractError::UnknownAccount)?;
                acct.balance = acct
                    .balance
                    .checked_sub(amount)
                    .ok_or(ContractError::InsufficientTokens)?;
            }
            Payer::Contract(addr) => {
                let c = self.world.contract_mut(&addr).ok_or(ContractError::UnknownContract)?;
                c.balance = c.balance.checked_sub(amount).ok_or(ContractError::InsufficientTokens)?;
            }
        }
        let target = self.world.contract_mut(to).ok_or(ContractError::UnknownContract)?;
        target.balance = target
            .balance
            .checked_add(amount)
            .ok_or(ContractError::InsufficientTokens)?;
        Ok(())
    }

    /// Runs `f` against a snapshot; on error the world and event list are
    /// restored.
    fn atomically<T>(
        &mut self,
        f: impl FnOnce(&mut Self) -> Result<T, ContractError>,
    ) -> Result<T, ContractError> {
        let snapshot = self.world.clone();
        let events_len = self.events.len();
        let result = f(self);
        if result.is_err() {
            *self.world = snapshot;
            let mut kept = 0;
            for i in events_len..self.events.len() {
                if self.events[i].1 {
                    self.events.swap(events_len + kept, i);
                    kept += 1;
                }
            }
            self.events.truncate(events_len + kept);
        }
        result
    }

    pub fn deploy(
        &mut self,
        deployer: AccountId,
        nonce: u64,
        code_id: &str,
        init_args: &Args,
        tokens: u64,
    ) -> Result<ContractAddress, ContractError> {
        let behavior = self.registry.get(code_id).ok_or(ContractError::UnknownCode)?.clone();
        let address = contract_address(&deployer, nonce);
        self.atomically(|exec| {
            if exec.world.contracts.contains_key(&address) {
                return Err(ContractError::BadArgs);
            }
            let instance = ContractInstance::new(address, behavior.code_id(), deployer, exec.env.height);
            exec.world.contracts.insert(address, Arc::new(instance));
            exec.move_tokens(Payer::Account(deployer), &address, tokens)?;
            let mut ctx = Ctx {
                exec,
                this: address,
                caller: deployer,
                owner: deployer,
                attached: tokens,
                depth: 1,
            };
            behavior.init(&mut ctx, init_args)?;
            Ok(address)
        })
    }

    #[allow(clippy::too_many_arguments)]
    pub fn invoke(
        &mut self,
        depth: u8,
        caller: AccountId,
        payer: Payer,
        address: ContractAddress,
        method: &str,
        args: &Args,
        tokens: u64,
    ) -> Result<Value, ContractError> {
        if depth > MAX_CALL_DEPTH {
            return Err(ContractError::ReentrancyLimit);
        }
        let (code_id, owner, killed) = {
            let c = self.world.contract(&address).ok_or(ContractError::UnknownContract)?;
            (c.code_id.clone(), c.owner, c.killed)
        };
        if method == KILL_METHOD {
            if killed {
                return Err(ContractError::AlreadyKilled);
            }
            if caller != owner {
                return Err(ContractError::NotOwner);
            }
            return self.atomically(|exec| {
                exec.move_tokens(payer, &address, tokens)?;
                exec.kill(address, owner)
            });
        }
        if killed {
            return Err(ContractError::ContractKilled);
        }
        let behavior = self.registry.get(&code_id).ok_or(ContractError::UnknownCode)?.clone();
        if !behavior.methods().contains(&method) {
            return Err(ContractError::MethodNotFound);
        }
        self.atomically(|exec| {
            exec.move_tokens(payer, &address, tokens)?;
            let mut ctx = Ctx {
                exec,
                this: address,
                caller,
                owner,
                attached: tokens,
                depth,
            };
            behavior.call(&mut ctx, method, args)
        })
    }

    pub fn transfer(&mut self, from: AccountId, to: AccountId, amount: u64) -> Result<Value, ContractError> {
        if !self.world.accounts.contains_key(&to) {
            return Err(ContractError::UnknownAccount);
        }
        let src = self.world.accounts.get_mut(&from).ok_or(ContractError::UnknownAccount)?;
        src.balance = src.balance.checked_sub(amount).ok_or(ContractError::InsufficientTokens)?;
        let dst = self.world.accounts.get_mut(&to).expect("checked above");
        dst.balance = dst.balance.checked_add(amount).ok_or(ContractError::InsufficientTokens)?;
        Ok(Value::Unit)
    }

    fn kill(&mut self, address: ContractAddress, owner: AccountId) -> Result<Value, ContractError> {
        let c = self.world.contract_mut(&address).ok_or(ContractError::UnknownContract)?;
        let refund = std::mem::take(&mut c.balance);
        c.killed = true;
        let owner_acct = self.world.accounts.get_mut(&owner).ok_or(ContractError::UnknownAccount)?;
        owner_acct.balance = owner_acct
            .balance
            .checked_add(refund)
            .ok_or(ContractError::InsufficientTokens)?;
        let event = self.event(address, "Killed", Value::U64(refund).to_bytes());
        self.events.push((event, false));
        Ok(Value::U64(refund))
    }

    fn event(&self, source: ContractAddress, name: &str, payload: Vec<u8>) -> Event {
        Event {
            source,
            name: name.to_string(),
            payload,
            height: self.env.height,
            tx_index: self.env.tx_index,
        }
    }
}

/// Read-only invocation against a throwaway copy of `world`.
pub fn view(
    world: &WorldState,
    registry: &CodeRegistry,
    env: Env,
    caller: AccountId,
    address: ContractAddress,
    method: &str,
    args: &Args,
) -> Result<Value, ContractError> {
    let mut scratch = world.clone();
    let mut exec = Exec::new(&mut scratch, registry, env);
    exec.invoke(1, caller, Payer::Account(caller), address, method, args, 0)
}

/// A behavior's handle on the executing call.
pub struct Ctx<'c, 'w> {
    exec: &'c mut Exec<'w>,
    this: ContractAddress,
    caller: AccountId,
    owner: AccountId,
    attached: u64,
    depth: u8,
}

impl Ctx<'_, '_> {
    /// The authenticated caller: the transaction sender for top-level calls,
    /// the calling contract for nested ones.
    pub fn caller(&self) -> AccountId {
        self.caller
    }

    pub fn this(&self) -> ContractAddress {
        self.this
    }

    pub fn owner(&self) -> AccountId {
        self.owner
    }

    pub fn height(&self) -> u64 {
        self.exec.env.height
    }

    pub fn tick(&self) -> u64 {
        self.exec.env.tick
    }

    pub fn attached_tokens(&self) -> u64 {
        self.attached
    }

    pub fn balance(&self) -> u64 {
        self.instance().balance
    }

    pub fn require_owner(&self) -> Result<(), ContractError> {
        if self.caller == self.owner {
            Ok(())
        } else {
            Err(ContractError::NotOwner)
        }
    }

    fn instance(&self) -> &ContractInstance {
        self.exec.world.contract(&self.this).expect("executing contract exists")
    }

    pub fn get(&self, key: &[u8]) -> Option<&[u8]> {
        self.instance().storage.get(key).map(Vec::as_slice)
    }

    /// Decodes a stored [`Value`]. Undecodable cells read as absent.
    pub fn get_value(&self, key: &[u8]) -> Option<Value> {
        self.get(key).and_then(|b| Value::from_bytes(b).ok())
    }

    pub fn set(&mut self, key: &[u8], value: Vec<u8>) {
        let height = self.exec.env.height;
        self.exec
            .world
            .contract_mut(&self.this)
            .expect("executing contract exists")
            .write(key, Some(value), height);
    }

    pub fn set_value(&mut self, key: &[u8], value: &Value) {
        self.set(key, value.to_bytes());
    }

    pub fn remove(&mut self, key: &[u8]) -> bool {
        if self.get(key).is_none() {
            return false;
        }
        let height = self.exec.env.height;
        self.exec
            .world
            .contract_mut(&self.this)
            .expect("executing contract exists")
            .write(key, None, height);
        true
    }

    /// All storage cells whose key starts with `prefix`, in key order.
    pub fn scan_prefix(&self, prefix: &[u8]) -> Vec<(Vec<u8>, Vec<u8>)> {
        self.instance()
            .storage
            .range(prefix.to_vec()..)
            .take_while(|(k, _)| k.starts_with(prefix))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect()
    }

    /// Reads another contract's storage. All state is public.
    pub fn read_other(&self, address: &ContractAddress, key: &[u8]) -> Option<Vec<u8>> {
        self.exec.world.contract(address)?.storage.get(key).cloned()
    }

    pub fn emit(&mut self, name: &str, payload: Vec<u8>) {
        let event = self.exec.event(self.this, name, payload);
        self.exec.events.push((event, false));
    }

    /// Emits an event that is kept even if the call reverts.
    pub fn audit(&mut self, name: &str, payload: Vec<u8>) {
        let event = self.exec.event(self.this, name, payload);
        self.exec.events.push((event, true));
    }

    /// Pays `amount` from this contract's balance to an account.
    pub fn pay(&mut self, to: AccountId, amount: u64) -> Result<(), ContractError> {
        if !self.exec.world.accounts.contains_key(&to) {
            return Err(ContractError::UnknownAccount);
        }
        let c = self.exec.world.contract_mut(&self.this).expect("executing contract exists");
        c.balance = c.balance.checked_sub(amount).ok_or(ContractError::InsufficientTokens)?;
        let acct = self.exec.world.accounts.get_mut(&to).expect("checked above");
        acct.balance = acct
            .balance
            .checked_add(amount)
            .ok_or(ContractError::InsufficientTokens)?;
        Ok(())
    }

    /// Synchronously calls another contract with this contract as caller.
    /// A failed nested call leaves no state behind; the error is returned to
    /// the calling behavior.
    pub fn call(
        &mut self,
        address: ContractAddress,
        method: &str,
        args: &Args,
        tokens: u64,
    ) -> Result<Value, ContractError> {
        let caller = AccountId::from(self.this);
        self.exec.invoke(
            self.depth + 1,
            caller,
            Payer::Contract(self.this),
            address,
            method,
            args,
            tokens,
        )
    }
}

impl Args {
    fn arg(&self, i: usize) -> Result<&Value, ContractError> {
        self.get(i).ok_or(ContractError::BadArgs)
    }

    pub fn str_at(&self, i: usize) -> Result<&str, ContractError> {
        self.arg(i)?.as_str().ok_or(ContractError::BadArgs)
    }

    pub fn u64_at(&self, i: usize) -> Result<u64, ContractError> {
        self.arg(i)?.as_u64().ok_or(ContractError::BadArgs)
    }

    pub fn i64_at(&self, i: usize) -> Result<i64, ContractError> {
        self.arg(i)?.as_i64().ok_or(ContractError::BadArgs)
    }

    pub fn bytes_at(&self, i: usize) -> Result<&[u8], ContractError> {
        self.arg(i)?.as_bytes().ok_or(ContractError::BadArgs)
    }

    pub fn id_at(&self, i: usize) -> Result<Hash, ContractError> {
        self.arg(i)?.as_id().ok_or(ContractError::BadArgs)
    }

    pub fn account_at(&self, i: usize) -> Result<AccountId, ContractError> {
        self.id_at(i).map(AccountId)
    }

    pub fn address_at(&self, i: usize) -> Result<ContractAddress, ContractError> {
        self.id_at(i).map(ContractAddress)
    }

    pub fn list_at(&self, i: usize) -> Result<&[Value], ContractError> {
        self.arg(i)?.as_list().ok_or(ContractError::BadArgs)
    }

    /// The argument at `i`, with `Unit` or a missing argument read as `None`.
    pub fn opt_at(&self, i: usize) -> Option<&Value> {
        self.get(i).filter(|v| !v.is_unit())
    }

    pub fn expect_len(&self, n: usize) -> Result<(), ContractError> {
        if self.len() == n {
            Ok(())
        } else {
            Err(ContractError::BadArgs)
        }
    }
}
