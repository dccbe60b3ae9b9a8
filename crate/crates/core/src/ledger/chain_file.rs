//! Chain export format: an 8-byte magic followed by one frame per block,
//! each frame a big-endian `u32` length and the block's canonical encoding.

use std::fs;
use std::path::Path;

use super::{Block, LedgerError};
use crate::codec::Canonical;

pub const CHAIN_MAGIC: &[u8; 8] = b"TLCHAIN\x01";

pub fn encode_chain(blocks: &[Block]) -> Vec<u8> {
    let mut out = CHAIN_MAGIC.to_vec();
    for block in blocks {
        let bytes = block.to_bytes();
        out.extend_from_slice(&(bytes.len() as u32).to_be_bytes());
        out.extend_from_slice(&bytes);
    }
    out
}

/// Parses an export. Any framing or decoding failure is reported as
/// `BrokenChain` at the index of the frame being read. Link and signature
/// checks happen in [`super::Ledger::replay`].
pub fn decode_chain(bytes: &[u8]) -> Result<Vec<Block>, LedgerError> {
    let rest = bytes
        .strip_prefix(CHAIN_MAGIC.as_slice())
        .ok_or(LedgerError::BrokenChain(0))?;
    let mut blocks = Vec::new();
    let mut pos = 0usize;
    while pos < rest.len() {
        let index = blocks.len() as u64;
        let broken = || LedgerError::BrokenChain(index);
        let len_bytes: [u8; 4] = rest
            .get(pos..pos + 4)
            .ok_or_else(broken)?
            .try_into()
            .expect("slice of 4");
        let len = u32::from_be_bytes(len_bytes) as usize;
        pos += 4;
        let frame = rest.get(pos..pos + len).ok_or_else(broken)?;
        pos += len;
        let block = Block::from_bytes(frame).map_err(|_| broken())?;
        if block.height != index {
            return Err(broken());
        }
        blocks.push(block);
    }
    Ok(blocks)
}

pub fn export_chain(path: &Path, blocks: &[Block]) -> Result<(), LedgerError> {
    fs::write(path, encode_chain(blocks))?;
    Ok(())
}

pub fn import_chain(path: &Path) -> Result<Vec<Block>, LedgerError> {
    decode_chain(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::Args;
    use crate::ledger::{Ledger, Target};

    #[test]
    fn export_import_preserves_blocks() {
        let mut l = Ledger::with_seeded_genesis(&[("alice", 10)]);
        let (bob, _) = l.create_account(b"bob").unwrap();
        let alice = crate::crypto::Signer::from_seed(b"alice").unwrap();
        l.submit_call(&alice, Target::Transfer(bob), "", &Args::empty(), 3)
            .unwrap();
        l.seal_block();
        let bytes = encode_chain(l.blocks());
        assert_eq!(decode_chain(&bytes).unwrap(), l.blocks());
    }

    #[test]
    fn bad_magic_and_truncation_detected() {
        let l = Ledger::with_seeded_genesis(&[("alice", 10)]);
        let mut bytes = encode_chain(l.blocks());
        assert!(matches!(
            decode_chain(&bytes[..bytes.len() - 1]),
            Err(LedgerError::BrokenChain(0))
        ));
        bytes[0] = b'X';
        assert!(matches!(decode_chain(&bytes), Err(LedgerError::BrokenChain(0))));
    }
}
