//! Append-only journal for gateway state: thing registrations, the event
//! cursor and dead letters.
//!
//! Each record is framed as `len: u32 BE | crc32: u32 BE | body`. On open,
//! records are read until the first short or corrupt frame; anything after
//! it is a torn write from a crash and is cut off.

use std::fs::{File, OpenOptions};
use std::io::{self, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use crate::codec::{Decoder, DecodeError, Encoder};
use crate::hash::{AccountId, ContractAddress};
use crate::ledger::TxPosition;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ThingRecord {
    pub thing_id: String,
    pub account: AccountId,
    pub feed: ContractAddress,
    pub actuation: ContractAddress,
    pub sink_uri: String,
}

/// Identifies one event: (height, tx_index, event_index).
pub type EventKey = (u64, u32, u32);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeadLetter {
    pub key: EventKey,
    pub target: String,
    pub attempts: u32,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum JournalRecord {
    Register(ThingRecord),
    Cursor(TxPosition),
    DeadLetter(DeadLetter),
}

impl JournalRecord {
    fn encode(&self) -> Vec<u8> {
        let mut enc = Encoder::new();
        match self {
            JournalRecord::Register(t) => {
                enc.u8(1)
                    .str(&t.thing_id)
                    .put(&t.account)
                    .put(&t.feed)
                    .put(&t.actuation)
                    .str(&t.sink_uri);
            }
            JournalRecord::Cursor((h, i)) => {
                enc.u8(2).u64(*h).u32(*i);
            }
            JournalRecord::DeadLetter(d) => {
                enc.u8(3)
                    .u64(d.key.0)
                    .u32(d.key.1)
                    .u32(d.key.2)
                    .str(&d.target)
                    .u32(d.attempts)
                    .str(&d.reason);
            }
        }
        enc.finish()
    }

    fn decode(body: &[u8]) -> Result<JournalRecord, DecodeError> {
        let mut dec = Decoder::new(body);
        let rec = match dec.u8()? {
            1 => JournalRecord::Register(ThingRecord {
                thing_id: dec.str()?,
                account: dec.get()?,
                feed: dec.get()?,
                actuation: dec.get()?,
                sink_uri: dec.str()?,
            }),
            2 => JournalRecord::Cursor((dec.u64()?, dec.u32()?)),
            3 => JournalRecord::DeadLetter(DeadLetter {
                key: (dec.u64()?, dec.u32()?, dec.u32()?),
                target: dec.str()?,
                attempts: dec.u32()?,
                reason: dec.str()?,
            }),
            tag => return Err(DecodeError::BadTag { what: "journal record", tag }),
        };
        dec.finish()?;
        Ok(rec)
    }
}

fn frame(body: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(body.len() + 8);
    out.extend_from_slice(&(body.len() as u32).to_be_bytes());
    out.extend_from_slice(&crc32fast::hash(body).to_be_bytes());
    out.extend_from_slice(body);
    out
}

/// Parses frames from `buf`, returning the records and the length of the
/// valid prefix.
pub fn parse(buf: &[u8]) -> (Vec<JournalRecord>, usize) {
    let mut records = Vec::new();
    let mut pos = 0;
    while buf.len() - pos >= 8 {
        let len = u32::from_be_bytes(buf[pos..pos + 4].try_into().unwrap()) as usize;
        let crc = u32::from_be_bytes(buf[pos + 4..pos + 8].try_into().unwrap());
        let Some(body) = buf.get(pos + 8..pos + 8 + len) else {
            break;
        };
        if crc32fast::hash(body) != crc {
            break;
        }
        let Ok(rec) = JournalRecord::decode(body) else {
            break;
        };
        records.push(rec);
        pos += 8 + len;
    }
    (records, pos)
}

#[derive(Debug)]
pub struct Journal {
    file: Option<File>,
    path: Option<PathBuf>,
}

impl Journal {
    /// A journal that keeps nothing.
    pub fn in_memory() -> Journal {
        Journal { file: None, path: None }
    }

    /// Opens or creates the journal at `path`, returning the intact records.
    pub fn open(path: &Path) -> io::Result<(Journal, Vec<JournalRecord>)> {
        let mut file = OpenOptions::new()
            .read(true)
            .write(true)
            .create(true)
            .truncate(false)
            .open(path)?;
        let mut buf = Vec::new();
        file.read_to_end(&mut buf)?;
        let (records, valid) = parse(&buf);
        if valid < buf.len() {
            file.set_len(valid as u64)?;
        }
        file.seek(SeekFrom::Start(valid as u64))?;
        Ok((
            Journal {
                file: Some(file),
                path: Some(path.to_path_buf()),
            },
            records,
        ))
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn append(&mut self, rec: &JournalRecord) -> io::Result<()> {
        if let Some(file) = &mut self.file {
            file.write_all(&frame(&rec.encode()))?;
            file.flush()?;
        }
        Ok(())
    }
}
