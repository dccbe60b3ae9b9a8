//! Append-only, hash-chained ledger with a single deterministic sequencer.
//!
//! Transactions are validated and executed on arrival against a working copy
//! of the state, so [`Ledger::submit`] can hand back the receipt right away.
//! Readers only ever see the sealed state: the working copy replaces it when
//! [`Ledger::seal_block`] packs pending transactions into the next block.

mod chain_file;
mod types;

use std::sync::Arc;

pub use chain_file::{decode_chain, encode_chain, export_chain, import_chain, CHAIN_MAGIC};
pub use types::{Block, ChainParams, Event, Receipt, Registration, Status, Target, Transaction};

use crate::codec::{Args, Canonical, Value};
use crate::crypto::{PublicKey, Signer};
use crate::hash::{AccountId, ContractAddress, Hash};
use crate::runtime::{self, CodeRegistry, ContractError, Env, Exec, Payer};
use crate::state::{Account, ContractInstance, HistoryEntry, WorldState};

#[derive(Debug, thiserror::Error)]
pub enum LedgerError {
    #[error("empty seed")]
    EmptySeed,
    #[error("signature does not verify")]
    BadSignature,
    #[error("bad nonce: expected {expected}, got {got}")]
    BadNonce { expected: u64, got: u64 },
    #[error("unknown sender {0}")]
    UnknownSender(AccountId),
    #[error("insufficient tokens: balance {balance}, attached {attached}")]
    InsufficientTokens { balance: u64, attached: u64 },
    #[error("unknown contract {0}")]
    UnknownContract(ContractAddress),
    #[error("two keys derive the same account id {0}")]
    KeyCollision(AccountId),
    #[error("chain broken at height {0}")]
    BrokenChain(u64),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Position of a transaction in the chain: (height, tx_index).
pub type TxPosition = (u64, u32);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContractInfo {
    pub address: ContractAddress,
    pub code_id: String,
    pub owner: AccountId,
    pub balance: u64,
    pub killed: bool,
    pub deployed_at: u64,
}

impl From<&ContractInstance> for ContractInfo {
    fn from(c: &ContractInstance) -> Self {
        ContractInfo {
            address: c.address,
            code_id: c.code_id.clone(),
            owner: c.owner,
            balance: c.balance,
            killed: c.killed,
            deployed_at: c.deployed_at,
        }
    }
}

#[derive(Debug)]
pub struct Ledger {
    registry: Arc<CodeRegistry>,
    params: ChainParams,
    blocks: Vec<Block>,
    sealed: WorldState,
    /// Sealed state plus the effects of pending registrations and txs.
    working: Option<WorldState>,
    pending_regs: Vec<Registration>,
    pending_txs: Vec<Transaction>,
    pending_receipts: Vec<Receipt>,
}

fn apply_registration(world: &mut WorldState, reg: &Registration) -> Result<AccountId, LedgerError> {
    let id = reg.key.account_id();
    match world.accounts.get(&id) {
        Some(existing) if existing.key != reg.key => Err(LedgerError::KeyCollision(id)),
        Some(_) => Ok(id),
        None => {
            world.accounts.insert(
                id,
                Account {
                    key: reg.key,
                    balance: reg.balance,
                    nonce: 0,
                },
            );
            Ok(id)
        }
    }
}

fn validate_tx(world: &WorldState, tx: &Transaction) -> Result<(), LedgerError> {
    let acct = world
        .account(&tx.sender)
        .ok_or(LedgerError::UnknownSender(tx.sender))?;
    if !tx.verify(&acct.key) {
        return Err(LedgerError::BadSignature);
    }
    let expected = acct.nonce + 1;
    if tx.nonce != expected {
        return Err(LedgerError::BadNonce {
            expected,
            got: tx.nonce,
        });
    }
    if tx.tokens > acct.balance {
        return Err(LedgerError::InsufficientTokens {
            balance: acct.balance,
            attached: tx.tokens,
        });
    }
    Ok(())
}

/// Executes a validated transaction. The nonce is consumed whether or not the
/// call succeeds.
fn execute_tx(world: &mut WorldState, registry: &CodeRegistry, env: Env, tx: &Transaction) -> Receipt {
    world
        .accounts
        .get_mut(&tx.sender)
        .expect("validated sender")
        .nonce = tx.nonce;
    let mut exec = Exec::new(world, registry, env);
    let result = match tx.decoded_args() {
        Err(_) => Err(ContractError::BadArgs),
        Ok(args) => match &tx.target {
            Target::Deploy(code_id) => exec
                .deploy(tx.sender, tx.nonce, code_id, &args, tx.tokens)
                .map(Value::address),
            Target::Contract(addr) => exec.invoke(
                1,
                tx.sender,
                Payer::Account(tx.sender),
                *addr,
                &tx.method,
                &args,
                tx.tokens,
            ),
            Target::Transfer(to) => exec.transfer(tx.sender, *to, tx.tokens),
        },
    };
    let events = exec.events.into_iter().map(|(e, _)| e).collect();
    match result {
        Ok(value) => Receipt {
            status: Status::Ok,
            return_value: value.to_bytes(),
            events,
        },
        Err(e) => Receipt {
            status: Status::Reverted(e),
            return_value: Vec::new(),
            events,
        },
    }
}

impl Ledger {
    /// Creates a chain whose genesis block mints `allocations`.
    pub fn new(registry: Arc<CodeRegistry>, params: ChainParams, allocations: &[(PublicKey, u64)]) -> Self {
        let registrations: Vec<Registration> = allocations
            .iter()
            .map(|(key, balance)| Registration {
                key: *key,
                balance: *balance,
            })
            .collect();
        let mut sealed = WorldState::default();
        for reg in &registrations {
            apply_registration(&mut sealed, reg).expect("genesis keys collide");
        }
        let genesis = Block {
            height: 0,
            prev_hash: Hash::ZERO,
            timestamp: 0,
            params: Some(params.clone()),
            registrations,
            txs: Vec::new(),
            receipts: Vec::new(),
            block_hash: Hash::ZERO,
        }
        .seal();
        Ledger {
            registry,
            params,
            blocks: vec![genesis],
            sealed,
            working: None,
            pending_regs: Vec::new(),
            pending_txs: Vec::new(),
            pending_receipts: Vec::new(),
        }
    }

    /// Standard behaviors, default parameters, genesis balances keyed by seed.
    pub fn with_seeded_genesis(allocations: &[(&str, u64)]) -> Self {
        let keys: Vec<(PublicKey, u64)> = allocations
            .iter()
            .map(|(seed, bal)| {
                let signer = Signer::from_seed(seed.as_bytes()).expect("non-empty genesis seed");
                (signer.public_key(), *bal)
            })
            .collect();
        Ledger::new(Arc::new(CodeRegistry::standard()), ChainParams::default(), &keys)
    }

    pub fn registry(&self) -> &Arc<CodeRegistry> {
        &self.registry
    }

    pub fn params(&self) -> &ChainParams {
        &self.params
    }

    fn working(&mut self) -> &mut WorldState {
        self.working.get_or_insert_with(|| self.sealed.clone())
    }

    fn pending_view(&self) -> &WorldState {
        self.working.as_ref().unwrap_or(&self.sealed)
    }

    /// Derives an account from `seed` and registers it with zero balance.
    /// The registration lands in the next sealed block; the account can sign
    /// transactions immediately.
    pub fn create_account(&mut self, seed: &[u8]) -> Result<(AccountId, Signer), LedgerError> {
        let signer = Signer::from_seed(seed).ok_or(LedgerError::EmptySeed)?;
        self.register_key(signer.public_key())?;
        Ok((signer.account_id(), signer))
    }

    /// Registers a verification key; a no-op if it is already known.
    pub fn register_key(&mut self, key: PublicKey) -> Result<AccountId, LedgerError> {
        let id = key.account_id();
        match self.pending_view().account(&id) {
            Some(a) if a.key == key => return Ok(id),
            Some(_) => return Err(LedgerError::KeyCollision(id)),
            None => {}
        }
        let reg = Registration { key, balance: 0 };
        apply_registration(self.working(), &reg)?;
        self.pending_regs.push(reg);
        Ok(id)
    }

    fn next_env(&self) -> Env {
        let tip = self.tip();
        Env {
            height: tip.height + 1,
            tick: tip.timestamp + 1,
            tx_index: self.pending_txs.len() as u32,
        }
    }

    /// Validates and executes `tx` into the pending block. Invalid
    /// transactions are rejected and leave no trace; a reverted call is still
    /// included, with a `Reverted` receipt.
    pub fn submit(&mut self, tx: Transaction) -> Result<Receipt, LedgerError> {
        if self.pending_txs.len() >= self.params.tx_cap as usize {
            self.seal_block();
        }
        validate_tx(self.pending_view(), &tx)?;
        let env = self.next_env();
        let registry = Arc::clone(&self.registry);
        let receipt = execute_tx(self.working(), &registry, env, &tx);
        self.pending_txs.push(tx);
        self.pending_receipts.push(receipt.clone());
        Ok(receipt)
    }

    /// Signs with `signer` at its next nonce and submits.
    pub fn submit_call(
        &mut self,
        signer: &Signer,
        target: Target,
        method: &str,
        args: &Args,
        tokens: u64,
    ) -> Result<Receipt, LedgerError> {
        let nonce = self.next_nonce(&signer.account_id())?;
        let tx = Transaction::signed(signer, nonce, target, method, args, tokens);
        self.submit(tx)
    }

    /// Seals pending registrations and transactions into the next block.
    pub fn seal_block(&mut self) -> &Block {
        let tip = self.tip();
        let block = Block {
            height: tip.height + 1,
            prev_hash: tip.block_hash,
            timestamp: tip.timestamp + 1,
            params: None,
            registrations: std::mem::take(&mut self.pending_regs),
            txs: std::mem::take(&mut self.pending_txs),
            receipts: std::mem::take(&mut self.pending_receipts),
            block_hash: Hash::ZERO,
        }
        .seal();
        if let Some(w) = self.working.take() {
            self.sealed = w;
        }
        self.blocks.push(block);
        self.blocks.last().expect("just pushed")
    }

    pub fn pending_len(&self) -> usize {
        self.pending_txs.len()
    }

    pub fn has_pending(&self) -> bool {
        !self.pending_txs.is_empty() || !self.pending_regs.is_empty()
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn tip(&self) -> &Block {
        self.blocks.last().expect("genesis always present")
    }

    pub fn height(&self) -> u64 {
        self.tip().height
    }

    /// Tick the next sealed block will carry.
    pub fn next_tick(&self) -> u64 {
        self.tip().timestamp + 1
    }

    /// Nonce the account's next transaction must carry, counting pending ones.
    pub fn next_nonce(&self, id: &AccountId) -> Result<u64, LedgerError> {
        self.pending_view()
            .account(id)
            .map(|a| a.nonce + 1)
            .ok_or(LedgerError::UnknownSender(*id))
    }

    /// Sealed world state.
    pub fn state(&self) -> &WorldState {
        &self.sealed
    }

    pub fn state_digest(&self) -> Hash {
        self.sealed.digest()
    }

    pub fn total_supply(&self) -> u128 {
        self.sealed.total_supply()
    }

    pub fn balance(&self, id: &AccountId) -> Option<u64> {
        self.sealed.account(id).map(|a| a.balance)
    }

    pub fn contract(&self, addr: &ContractAddress) -> Option<ContractInfo> {
        self.sealed.contract(addr).map(ContractInfo::from)
    }

    fn instance(&self, addr: &ContractAddress) -> Result<&ContractInstance, LedgerError> {
        self.sealed
            .contract(addr)
            .ok_or(LedgerError::UnknownContract(*addr))
    }

    /// Unauthenticated read of a storage cell; works on killed contracts.
    pub fn read_state(&self, addr: &ContractAddress, key: &[u8]) -> Result<Option<Vec<u8>>, LedgerError> {
        Ok(self.instance(addr)?.storage.get(key).cloned())
    }

    pub fn read_value(&self, addr: &ContractAddress, key: &[u8]) -> Result<Option<Value>, LedgerError> {
        Ok(self
            .read_state(addr, key)?
            .and_then(|b| Value::from_bytes(&b).ok()))
    }

    /// Every committed write to `key`, in height order.
    pub fn history(&self, addr: &ContractAddress, key: &[u8]) -> Result<Vec<HistoryEntry>, LedgerError> {
        Ok(self
            .instance(addr)?
            .history
            .get(key)
            .cloned()
            .unwrap_or_default())
    }

    /// Runs a method against the sealed state without committing anything.
    pub fn query(&self, addr: &ContractAddress, method: &str, args: &Args) -> Result<Value, ContractError> {
        let env = Env {
            height: self.height() + 1,
            tick: self.next_tick(),
            tx_index: 0,
        };
        runtime::view(
            &self.sealed,
            &self.registry,
            env,
            AccountId::default(),
            *addr,
            method,
            args,
        )
    }

    /// Sealed transactions strictly after `after`, in chain order.
    pub fn receipts_after(
        &self,
        after: Option<TxPosition>,
    ) -> impl Iterator<Item = (TxPosition, &Transaction, &Receipt)> + '_ {
        let start_height = after.map_or(0, |(h, _)| h);
        self.blocks
            .iter()
            .skip(start_height as usize)
            .flat_map(|b| {
                b.txs
                    .iter()
                    .zip(&b.receipts)
                    .enumerate()
                    .map(move |(i, (tx, r))| ((b.height, i as u32), tx, r))
            })
            .filter(move |(pos, _, _)| !matches!(after, Some(a) if *pos <= a))
    }

    /// All sealed events emitted by `source`, in chain order, including
    /// durable events from reverted receipts.
    pub fn events_from(&self, source: &ContractAddress) -> Vec<Event> {
        self.receipts_after(None)
            .flat_map(|(_, _, r)| r.events.iter())
            .filter(|e| &e.source == source)
            .cloned()
            .collect()
    }

    /// Verifies and re-executes `chain` from genesis, returning the state
    /// digest it produces.
    pub fn replay(chain: &[Block], registry: &CodeRegistry) -> Result<Hash, LedgerError> {
        replay_state(chain, registry).map(|w| w.digest())
    }

    /// Rebuilds a live ledger from a verified chain.
    pub fn from_chain(chain: Vec<Block>, registry: Arc<CodeRegistry>) -> Result<Ledger, LedgerError> {
        let sealed = replay_state(&chain, &registry)?;
        let params = chain[0].params.clone().expect("verified genesis");
        Ok(Ledger {
            registry,
            params,
            blocks: chain,
            sealed,
            working: None,
            pending_regs: Vec::new(),
            pending_txs: Vec::new(),
            pending_receipts: Vec::new(),
        })
    }
}

fn replay_state(chain: &[Block], registry: &CodeRegistry) -> Result<WorldState, LedgerError> {
    let genesis = chain.first().ok_or(LedgerError::BrokenChain(0))?;
    let broken = |h: u64| LedgerError::BrokenChain(h);
    let params = match &genesis.params {
        Some(p) if p.scheme == crate::crypto::SCHEME => p,
        _ => return Err(broken(0)),
    };
    if genesis.height != 0
        || genesis.prev_hash != Hash::ZERO
        || genesis.timestamp != 0
        || !genesis.txs.is_empty()
        || !genesis.receipts.is_empty()
        || genesis.compute_hash() != genesis.block_hash
    {
        return Err(broken(0));
    }
    let mut world = WorldState::default();
    for reg in &genesis.registrations {
        if world.accounts.contains_key(&reg.key.account_id()) {
            return Err(broken(0));
        }
        apply_registration(&mut world, reg).map_err(|_| broken(0))?;
    }
    for (i, pair) in chain.windows(2).enumerate() {
        let (prev, block) = (&pair[0], &pair[1]);
        let h = i as u64 + 1;
        if block.height != h
            || block.prev_hash != prev.block_hash
            || block.timestamp != prev.timestamp + 1
            || block.params.is_some()
            || block.txs.len() != block.receipts.len()
            || block.txs.len() > params.tx_cap as usize
            || block.compute_hash() != block.block_hash
        {
            return Err(broken(h));
        }
        for reg in &block.registrations {
            if reg.balance != 0 || world.accounts.contains_key(&reg.key.account_id()) {
                return Err(broken(h));
            }
            apply_registration(&mut world, reg).map_err(|_| broken(h))?;
        }
        for (idx, (tx, recorded)) in block.txs.iter().zip(&block.receipts).enumerate() {
            validate_tx(&world, tx).map_err(|_| broken(h))?;
            let env = Env {
                height: h,
                tick: block.timestamp,
                tx_index: idx as u32,
            };
            if &execute_tx(&mut world, registry, env, tx) != recorded {
                return Err(broken(h));
            }
        }
    }
    Ok(world)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ledger() -> (Ledger, Signer, Signer) {
        let mut l = Ledger::with_seeded_genesis(&[("alice", 10)]);
        let alice = Signer::from_seed(b"alice").unwrap();
        let (_, bob) = l.create_account(b"bob").unwrap();
        (l, alice, bob)
    }

    #[test]
    fn create_account_is_deterministic() {
        let mut l = Ledger::with_seeded_genesis(&[]);
        let (a1, _) = l.create_account(b"alice").unwrap();
        let (a2, _) = l.create_account(b"alice").unwrap();
        let (b, _) = l.create_account(b"bob").unwrap();
        assert_eq!(a1, a2);
        assert_ne!(a1, b);
        assert!(matches!(l.create_account(b""), Err(LedgerError::EmptySeed)));
        l.seal_block();
        assert_eq!(l.balance(&a1), Some(0));
        assert_eq!(l.next_nonce(&a1).unwrap(), 1);
        // duplicate create recorded once
        assert_eq!(l.tip().registrations.len(), 2);
    }

    #[test]
    fn transfer_moves_tokens() {
        let (mut l, alice, bob) = ledger();
        let r = l
            .submit_call(&alice, Target::Transfer(bob.account_id()), "", &Args::empty(), 5)
            .unwrap();
        assert!(r.is_ok());
        l.seal_block();
        assert_eq!(l.balance(&alice.account_id()), Some(5));
        assert_eq!(l.balance(&bob.account_id()), Some(5));
    }

    #[test]
    fn altered_args_fail_signature() {
        let (mut l, alice, bob) = ledger();
        let mut tx = Transaction::signed(&alice, 1, Target::Transfer(bob.account_id()), "", &Args::empty(), 5);
        tx.args = Args::new(vec![Value::U64(1)]).to_bytes();
        let before = l.height();
        assert!(matches!(l.submit(tx), Err(LedgerError::BadSignature)));
        l.seal_block();
        assert!(l.tip().txs.is_empty());
        assert_eq!(l.height(), before + 1);
    }

    #[test]
    fn nonce_gap_rejected() {
        let (mut l, alice, bob) = ledger();
        let tx = Transaction::signed(&alice, 2, Target::Transfer(bob.account_id()), "", &Args::empty(), 1);
        assert!(matches!(
            l.submit(tx),
            Err(LedgerError::BadNonce { expected: 1, got: 2 })
        ));
    }

    #[test]
    fn unknown_sender_and_overdraft_rejected() {
        let (mut l, alice, bob) = ledger();
        let carol = Signer::from_seed(b"carol").unwrap();
        let tx = Transaction::signed(&carol, 1, Target::Transfer(bob.account_id()), "", &Args::empty(), 0);
        assert!(matches!(l.submit(tx), Err(LedgerError::UnknownSender(_))));
        let tx = Transaction::signed(&alice, 1, Target::Transfer(bob.account_id()), "", &Args::empty(), 11);
        assert!(matches!(l.submit(tx), Err(LedgerError::InsufficientTokens { .. })));
    }

    #[test]
    fn empty_block_links_to_previous() {
        let (mut l, _, _) = ledger();
        let prev = l.tip().block_hash;
        let b = l.seal_block().clone();
        assert_eq!(b.prev_hash, prev);
        assert_eq!(b.compute_hash(), b.block_hash);
        let b2 = l.seal_block().clone();
        assert!(b2.txs.is_empty());
        assert_eq!(b2.prev_hash, b.block_hash);
    }

    #[test]
    fn receipts_follow_submission_order() {
        let (mut l, alice, bob) = ledger();
        for amount in [1, 2, 3] {
            l.submit_call(&alice, Target::Transfer(bob.account_id()), "", &Args::empty(), amount)
                .unwrap();
        }
        let block = l.seal_block().clone();
        let nonces: Vec<u64> = block.txs.iter().map(|t| t.nonce).collect();
        assert_eq!(nonces, vec![1, 2, 3]);
        assert_eq!(block.receipts.len(), 3);
    }

    #[test]
    fn reads_see_only_sealed_state() {
        let (mut l, alice, bob) = ledger();
        l.seal_block();
        l.submit_call(&alice, Target::Transfer(bob.account_id()), "", &Args::empty(), 4)
            .unwrap();
        assert_eq!(l.balance(&bob.account_id()), Some(0));
        l.seal_block();
        assert_eq!(l.balance(&bob.account_id()), Some(4));
    }

    #[test]
    fn tx_cap_seals_automatically() {
        let mut l = Ledger::new(
            Arc::new(CodeRegistry::standard()),
            ChainParams {
                tx_cap: 2,
                ..ChainParams::default()
            },
            &[(Signer::from_seed(b"alice").unwrap().public_key(), 10)],
        );
        let alice = Signer::from_seed(b"alice").unwrap();
        for _ in 0..5 {
            l.submit_call(&alice, Target::Transfer(alice.account_id()), "", &Args::empty(), 1)
                .unwrap();
        }
        l.seal_block();
        assert!(l.blocks().iter().all(|b| b.txs.len() <= 2));
        assert_eq!(l.blocks().iter().map(|b| b.txs.len()).sum::<usize>(), 5);
        assert!(Ledger::replay(l.blocks(), l.registry()).is_ok());
    }

    #[test]
    fn genesis_replay_matches() {
        let l = Ledger::with_seeded_genesis(&[("alice", 10)]);
        assert_eq!(Ledger::replay(l.blocks(), l.registry()).unwrap(), l.state_digest());
        assert!(matches!(
            Ledger::replay(&[], l.registry()),
            Err(LedgerError::BrokenChain(0))
        ));
    }

    #[test]
    fn corrupted_prev_hash_reported_at_its_height() {
        let (mut l, alice, bob) = ledger();
        for _ in 0..9 {
            l.submit_call(&alice, Target::Transfer(bob.account_id()), "", &Args::empty(), 1)
                .unwrap();
            l.seal_block();
        }
        assert_eq!(Ledger::replay(l.blocks(), l.registry()).unwrap(), l.state_digest());
        let mut chain = l.blocks().to_vec();
        chain[7].prev_hash.0[0] ^= 1;
        assert!(matches!(
            Ledger::replay(&chain, l.registry()),
            Err(LedgerError::BrokenChain(7))
        ));
    }

    #[test]
    fn positions_after_cursor() {
        let (mut l, alice, bob) = ledger();
        for _ in 0..2 {
            for _ in 0..2 {
                l.submit_call(&alice, Target::Transfer(bob.account_id()), "", &Args::empty(), 1)
                    .unwrap();
            }
            l.seal_block();
        }
        let all: Vec<TxPosition> = l.receipts_after(None).map(|(p, _, _)| p).collect();
        assert_eq!(all, vec![(1, 0), (1, 1), (2, 0), (2, 1)]);
        let rest: Vec<TxPosition> = l.receipts_after(Some((1, 1))).map(|(p, _, _)| p).collect();
        assert_eq!(rest, vec![(2, 0), (2, 1)]);
    }
}
