use crate::codec::{Args, Canonical, DecodeError, Decoder, Encoder};
use crate::crypto::{PublicKey, Signature, Signer};
use crate::hash::{AccountId, ContractAddress, Hash};
use crate::runtime::ContractError;

/// What a transaction acts on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Target {
    /// Deploy a new instance of the named behavior; `args` are init args.
    Deploy(String),
    Contract(ContractAddress),
    /// Plain token transfer to another account.
    Transfer(AccountId),
}

impl Canonical for Target {
    fn encode(&self, enc: &mut Encoder) {
        match self {
            Target::Deploy(code) => enc.u8(0).str(code),
            Target::Contract(addr) => enc.u8(1).put(addr),
            Target::Transfer(to) => enc.u8(2).put(to),
        };
    }

    fn decode(dec: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        Ok(match dec.u8()? {
            0 => Target::Deploy(dec.str()?),
            1 => Target::Contract(dec.get()?),
            2 => Target::Transfer(dec.get()?),
            tag => return Err(DecodeError::BadTag { what: "target", tag }),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transaction {
    pub sender: AccountId,
    pub nonce: u64,
    pub target: Target,
    pub method: String,
    /// Canonically encoded [`Args`].
    pub args: Vec<u8>,
    pub tokens: u64,
    pub signature: Signature,
}

impl Transaction {
    /// Builds and signs a transaction.
    pub fn signed(
        signer: &Signer,
        nonce: u64,
        target: Target,
        method: &str,
        args: &Args,
        tokens: u64,
    ) -> Transaction {
        let mut tx = Transaction {
            sender: signer.account_id(),
            nonce,
            target,
            method: method.to_string(),
            args: args.to_bytes(),
            tokens,
            signature: Signature([0u8; 64]),
        };
        tx.signature = signer.sign(&tx.signing_bytes());
        tx
    }

    /// Canonical encoding of every field before the signature.
    pub fn signing_bytes(&self) -> Vec<u8> {
        let mut enc = Encoder::new();
        enc.raw(b"thingledger/tx/v1")
            .put(&self.sender)
            .u64(self.nonce)
            .put(&self.target)
            .str(&self.method)
            .bytes(&self.args)
            .u64(self.tokens);
        enc.finish()
    }

    pub fn verify(&self, key: &PublicKey) -> bool {
        key.account_id() == self.sender && key.verify(&self.signing_bytes(), &self.signature)
    }

    pub fn hash(&self) -> Hash {
        Hash::of(&self.to_bytes())
    }

    pub fn decoded_args(&self) -> Result<Args, DecodeError> {
        Args::from_bytes(&self.args)
    }
}

impl Canonical for Transaction {
    fn encode(&self, enc: &mut Encoder) {
        enc.put(&self.sender)
            .u64(self.nonce)
            .put(&self.target)
            .str(&self.method)
            .bytes(&self.args)
            .u64(self.tokens)
            .put(&self.signature);
    }

    fn decode(dec: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        Ok(Transaction {
            sender: dec.get()?,
            nonce: dec.u64()?,
            target: dec.get()?,
            method: dec.str()?,
            args: dec.bytes()?,
            tokens: dec.u64()?,
            signature: dec.get()?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event {
    pub source: ContractAddress,
    pub name: String,
    pub payload: Vec<u8>,
    pub height: u64,
    pub tx_index: u32,
}

impl Canonical for Event {
    fn encode(&self, enc: &mut Encoder) {
        enc.put(&self.source)
            .str(&self.name)
            .bytes(&self.payload)
            .u64(self.height)
            .u32(self.tx_index);
    }

    fn decode(dec: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        Ok(Event {
            source: dec.get()?,
            name: dec.str()?,
            payload: dec.bytes()?,
            height: dec.u64()?,
            tx_index: dec.u32()?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    Reverted(ContractError),
}

impl Status {
    pub fn is_ok(&self) -> bool {
        matches!(self, Status::Ok)
    }
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Status::Ok => f.write_str("Ok"),
            Status::Reverted(e) => write!(f, "Reverted({})", e.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Receipt {
    pub status: Status,
    /// Encoded return [`crate::codec::Value`]; empty when reverted.
    pub return_value: Vec<u8>,
    pub events: Vec<Event>,
}

impl Receipt {
    pub fn is_ok(&self) -> bool {
        self.status.is_ok()
    }

    pub fn error(&self) -> Option<ContractError> {
        match self.status {
            Status::Ok => None,
            Status::Reverted(e) => Some(e),
        }
    }

    pub fn value(&self) -> Option<crate::codec::Value> {
        crate::codec::Value::from_bytes(&self.return_value).ok()
    }

    pub fn digest(&self) -> Hash {
        Hash::of(&self.to_bytes())
    }
}

impl Canonical for Receipt {
    fn encode(&self, enc: &mut Encoder) {
        match self.status {
            Status::Ok => enc.u8(0),
            Status::Reverted(e) => enc.u8(1).u16(e.code()),
        };
        enc.bytes(&self.return_value);
        enc.seq(&self.events, |e, ev| ev.encode(e));
    }

    fn decode(dec: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        let status = match dec.u8()? {
            0 => Status::Ok,
            1 => Status::Reverted(
                ContractError::from_code(dec.u16()?).ok_or(DecodeError::Invalid("reason code"))?,
            ),
            tag => return Err(DecodeError::BadTag { what: "status", tag }),
        };
        Ok(Receipt {
            status,
            return_value: dec.bytes()?,
            events: dec.seq(Event::decode)?,
        })
    }
}

/// Chain-wide constants recorded in the genesis block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainParams {
    pub scheme: String,
    pub tx_cap: u32,
}

impl Default for ChainParams {
    fn default() -> Self {
        Self {
            scheme: crate::crypto::SCHEME.to_string(),
            tx_cap: 1024,
        }
    }
}

/// An account's verification key, registered in a block. Only genesis
/// registrations may carry a non-zero balance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Registration {
    pub key: PublicKey,
    pub balance: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub height: u64,
    pub prev_hash: Hash,
    /// Logical tick; advances by one per block.
    pub timestamp: u64,
    /// Present on the genesis block only.
    pub params: Option<ChainParams>,
    pub registrations: Vec<Registration>,
    pub txs: Vec<Transaction>,
    pub receipts: Vec<Receipt>,
    pub block_hash: Hash,
}

impl Block {
    fn encode_body(&self, enc: &mut Encoder) {
        enc.u64(self.height).hash(&self.prev_hash).u64(self.timestamp);
        match &self.params {
            None => enc.u8(0),
            Some(p) => enc.u8(1).str(&p.scheme).u32(p.tx_cap),
        };
        enc.seq(&self.registrations, |e, r| {
            e.put(&r.key).u64(r.balance);
        });
        enc.seq(&self.txs, |e, tx| tx.encode(e));
        enc.seq(&self.receipts, |e, r| r.encode(e));
    }

    /// Recomputes the block hash from every field except `block_hash`.
    pub fn compute_hash(&self) -> Hash {
        let mut enc = Encoder::new();
        enc.raw(b"thingledger/block/v1");
        self.encode_body(&mut enc);
        Hash::of(&enc.finish())
    }

    pub fn seal(mut self) -> Block {
        self.block_hash = self.compute_hash();
        self
    }
}

impl Canonical for Block {
    fn encode(&self, enc: &mut Encoder) {
        self.encode_body(enc);
        enc.hash(&self.block_hash);
    }

    fn decode(dec: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        let height = dec.u64()?;
        let prev_hash = dec.hash()?;
        let timestamp = dec.u64()?;
        let params = match dec.u8()? {
            0 => None,
            1 => Some(ChainParams {
                scheme: dec.str()?,
                tx_cap: dec.u32()?,
            }),
            tag => return Err(DecodeError::BadTag { what: "params", tag }),
        };
        let registrations = dec.seq(|d| {
            Ok(Registration {
                key: d.get()?,
                balance: d.u64()?,
            })
        })?;
        Ok(Block {
            height,
            prev_hash,
            timestamp,
            params,
            registrations,
            txs: dec.seq(Transaction::decode)?,
            receipts: dec.seq(Receipt::decode)?,
            block_hash: dec.hash()?,
        })
    }
}
