//! Iterative name resolution over zone contracts.
//!
//! Resolution starts at a well-known root zone and consumes labels from the
//! most significant end, following delegations from zone to zone. The
//! resolver only reads committed state, so any number of resolutions can run
//! against a shared snapshot.
//!
//! When a label carries both a delegation and leaf records, the delegation
//! is followed if labels remain and the leaf records are returned otherwise.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use crate::codec::{Canonical, Value};
use crate::hash::ContractAddress;
use crate::state::WorldState;
use crate::stdlib::zone::{label_key, normalize_label, NameRecord};

pub const MAX_LABELS: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ResolveError {
    #[error("malformed name {0:?}")]
    BadName(String),
    #[error("no mapping for label {0:?}")]
    NameNotFound(String),
    #[error("delegation for {label:?} points at {target}, which is not a live zone")]
    DanglingDelegation { label: String, target: ContractAddress },
    #[error("zone {0} visited twice")]
    LoopDetected(ContractAddress),
    #[error("name has more than {MAX_LABELS} labels")]
    DepthExceeded,
    #[error("no root zone configured")]
    NoRoot,
}

/// A validated domain name. Labels are stored least significant first, so
/// `aueb.gr` is `["aueb", "gr"]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Name {
    labels: Vec<String>,
}

impl Name {
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Labels in walk order, top-level label first.
    pub fn walk_order(&self) -> impl Iterator<Item = &str> {
        self.labels.iter().rev().map(String::as_str)
    }

    pub fn from_labels(labels: Vec<String>) -> Result<Name, ResolveError> {
        if labels.is_empty() {
            return Err(ResolveError::BadName(String::new()));
        }
        if labels.len() > MAX_LABELS {
            return Err(ResolveError::DepthExceeded);
        }
        let labels = labels
            .iter()
            .map(|l| normalize_label(l).map_err(|_| ResolveError::BadName(l.clone())))
            .collect::<Result<_, _>>()?;
        Ok(Name { labels })
    }
}

impl FromStr for Name {
    type Err = ResolveError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.strip_suffix('.').unwrap_or(s);
        if s.is_empty() {
            return Err(ResolveError::BadName(s.to_string()));
        }
        Name::from_labels(s.split('.').map(str::to_string).collect())
    }
}

impl fmt::Display for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.labels.join("."))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResolutionResult {
    pub record: NameRecord,
    /// Each zone visited with the label looked up in it; starts at the root.
    pub path: Vec<(ContractAddress, String)>,
    pub depth: usize,
}

/// One committed change to a label along a resolution path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuditEntry {
    pub height: u64,
    pub zone: ContractAddress,
    pub label: String,
    pub old: Option<NameRecord>,
    pub new: Option<NameRecord>,
}

fn live_zone(world: &WorldState, addr: &ContractAddress) -> bool {
    world
        .contract(addr)
        .is_some_and(|c| !c.killed && c.code_id == "zone")
}

fn record_at(world: &WorldState, zone: &ContractAddress, label: &str) -> Option<NameRecord> {
    let bytes = world.contract(zone)?.storage.get(&label_key(label))?;
    NameRecord::from_value(&Value::from_bytes(bytes).ok()?)
}

/// Walk outcome: the zones visited and, if the walk completed, the record.
struct Walk {
    path: Vec<(ContractAddress, String)>,
    result: Result<NameRecord, ResolveError>,
}

fn walk(world: &WorldState, name: &Name, root: ContractAddress) -> Walk {
    let mut path = Vec::new();
    if !live_zone(world, &root) {
        return Walk {
            path,
            result: Err(ResolveError::DanglingDelegation {
                label: String::new(),
                target: root,
            }),
        };
    }
    let mut visited = HashSet::from([root]);
    let mut zone = root;
    let labels: Vec<&str> = name.walk_order().collect();
    for (i, label) in labels.iter().enumerate() {
        path.push((zone, label.to_string()));
        let Some(record) = record_at(world, &zone, label) else {
            return Walk {
                path,
                result: Err(ResolveError::NameNotFound(label.to_string())),
            };
        };
        let remaining = i + 1 < labels.len();
        if !remaining {
            return Walk {
                path,
                result: Ok(record),
            };
        }
        let Some(next) = record.delegation else {
            return Walk {
                path,
                result: Err(ResolveError::NameNotFound(labels[i + 1].to_string())),
            };
        };
        if !live_zone(world, &next) {
            return Walk {
                path,
                result: Err(ResolveError::DanglingDelegation {
                    label: label.to_string(),
                    target: next,
                }),
            };
        }
        if !visited.insert(next) {
            return Walk {
                path,
                result: Err(ResolveError::LoopDetected(next)),
            };
        }
        zone = next;
    }
    unreachable!("names have at least one label")
}

pub fn resolve(world: &WorldState, name: &Name, root: ContractAddress) -> Result<ResolutionResult, ResolveError> {
    let w = walk(world, name, root);
    let record = w.result?;
    Ok(ResolutionResult {
        depth: w.path.len(),
        path: w.path,
        record,
    })
}

/// Tries each root in order and returns the first successful resolution,
/// or the first root's error if none succeeds.
pub fn resolve_any(
    world: &WorldState,
    name: &Name,
    roots: &[ContractAddress],
) -> Result<ResolutionResult, ResolveError> {
    let mut first_err = None;
    for root in roots {
        match resolve(world, name, *root) {
            Ok(r) => return Ok(r),
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    Err(first_err.unwrap_or(ResolveError::NoRoot))
}

/// Every committed change to the labels along `name`'s current path,
/// ordered by height. A name whose final label was removed still yields its
/// trail.
pub fn audit_trail(world: &WorldState, name: &Name, root: ContractAddress) -> Result<Vec<AuditEntry>, ResolveError> {
    let w = walk(world, name, root);
    let complete = w.path.len() == name.labels().len();
    if let Err(e) = &w.result {
        let removed_leaf = complete
            && matches!(e, ResolveError::NameNotFound(_))
            && w.path.last().is_some_and(|(zone, label)| has_history(world, zone, label));
        if !removed_leaf {
            return Err(e.clone());
        }
    }
    let mut trail = Vec::new();
    for (zone, label) in &w.path {
        let Some(entries) = world.contract(zone).and_then(|c| c.history.get(&label_key(label))) else {
            continue;
        };
        let mut old: Option<NameRecord> = None;
        for (height, bytes) in entries {
            let new = bytes
                .as_deref()
                .and_then(|b| Value::from_bytes(b).ok())
                .and_then(|v| NameRecord::from_value(&v));
            trail.push(AuditEntry {
                height: *height,
                zone: *zone,
                label: label.clone(),
                old: old.clone(),
                new: new.clone(),
            });
            old = new;
        }
    }
    trail.sort_by_key(|e| e.height);
    Ok(trail)
}

fn has_history(world: &WorldState, zone: &ContractAddress, label: &str) -> bool {
    world
        .contract(zone)
        .is_some_and(|c| c.history.contains_key(&label_key(label)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::Args;
    use crate::ledger::{Ledger, Target};
    use crate::stdlib::testkit::signer;

    struct Zones {
        ledger: Ledger,
    }

    impl Zones {
        fn new() -> Zones {
            let mut ledger = Ledger::with_seeded_genesis(&[]);
            ledger.create_account(b"op").unwrap();
            Zones { ledger }
        }

        fn zone(&mut self) -> ContractAddress {
            let r = self
                .ledger
                .submit_call(&signer("op"), Target::Deploy("zone".into()), "", &Args::empty(), 0)
                .unwrap();
            ContractAddress(r.value().unwrap().as_id().unwrap())
        }

        fn call(&mut self, zone: ContractAddress, method: &str, args: Vec<Value>) {
            let r = self
                .ledger
                .submit_call(&signer("op"), Target::Contract(zone), method, &Args::new(args), 0)
                .unwrap();
            assert!(r.is_ok(), "{method}: {:?}", r.status);
        }

        fn delegate(&mut self, zone: ContractAddress, label: &str, to: ContractAddress) {
            self.call(zone, "delegate", vec![Value::str(label), Value::address(to)]);
        }

        fn leaf(&mut self, zone: ContractAddress, label: &str, key: &[u8]) {
            self.call(
                zone,
                "set_mapping",
                vec![Value::str(label), Value::Bytes(key.to_vec()), Value::Unit, Value::Unit],
            );
        }

        fn resolve(&mut self, name: &str, root: ContractAddress) -> Result<ResolutionResult, ResolveError> {
            self.ledger.seal_block();
            resolve(self.ledger.state(), &name.parse().unwrap(), root)
        }
    }

    #[test]
    fn name_parsing() {
        let n: Name = "AUEB.gr".parse().unwrap();
        assert_eq!(n.labels(), ["aueb", "gr"]);
        assert_eq!(n.walk_order().collect::<Vec<_>>(), ["gr", "aueb"]);
        assert_eq!(n.to_string(), "aueb.gr");
        assert_eq!("a.b.c.d.e.f.g.h.i.j.k".parse::<Name>(), Err(ResolveError::DepthExceeded));
        assert!("a..b".parse::<Name>().is_err());
        assert!("".parse::<Name>().is_err());
    }

    #[test]
    fn resolves_two_level_name() {
        let mut z = Zones::new();
        let root = z.zone();
        let gr = z.zone();
        z.delegate(root, "gr", gr);
        z.leaf(gr, "aueb", b"K");
        let r = z.resolve("aueb.gr", root).unwrap();
        assert_eq!(r.record.service_key.as_deref(), Some(b"K".as_slice()));
        assert_eq!(r.depth, 2);
        assert_eq!(r.path, vec![(root, "gr".into()), (gr, "aueb".into())]);
        assert_eq!(z.resolve("x.gr", root), Err(ResolveError::NameNotFound("x".into())));
    }

    #[test]
    fn loops_and_dangling_delegations() {
        let mut z = Zones::new();
        let a = z.zone();
        let b = z.zone();
        z.delegate(a, "c", b);
        z.delegate(b, "b", a);
        assert_eq!(z.resolve("x.b.c", a), Err(ResolveError::LoopDetected(a)));
        let ghost = ContractAddress(crate::hash::Hash::of(b"ghost"));
        z.delegate(a, "d", ghost);
        assert!(matches!(z.resolve("x.d", a), Err(ResolveError::DanglingDelegation { .. })));
        let killed = z.zone();
        z.call(killed, "kill", vec![]);
        z.delegate(a, "e", killed);
        assert!(matches!(z.resolve("x.e", a), Err(ResolveError::DanglingDelegation { .. })));
    }

    #[test]
    fn delegation_preferred_only_when_labels_remain() {
        let mut z = Zones::new();
        let root = z.zone();
        let gr = z.zone();
        z.delegate(root, "gr", gr);
        z.leaf(root, "gr", b"TLD");
        z.leaf(gr, "aueb", b"K");
        assert_eq!(z.resolve("gr", root).unwrap().record.service_key.as_deref(), Some(b"TLD".as_slice()));
        assert_eq!(z.resolve("aueb.gr", root).unwrap().record.service_key.as_deref(), Some(b"K".as_slice()));
    }

    #[test]
    fn audit_trail_records_every_transition() {
        let mut z = Zones::new();
        let root = z.zone();
        let gr = z.zone();
        z.delegate(root, "gr", gr);
        z.leaf(gr, "aueb", b"K1");
        z.ledger.seal_block();
        z.leaf(gr, "aueb", b"K2");
        let current = z.resolve("aueb.gr", root).unwrap().record;
        let name: Name = "aueb.gr".parse().unwrap();
        let trail = audit_trail(z.ledger.state(), &name, root).unwrap();
        assert_eq!(trail.len(), 3);
        let aueb: Vec<_> = trail.iter().filter(|e| e.label == "aueb").collect();
        assert_eq!(aueb[0].old, None);
        assert_eq!(aueb[1].old, aueb[0].new);
        assert_eq!(aueb[1].new.as_ref(), Some(&current));
        assert!(trail.windows(2).all(|w| w[0].height <= w[1].height));

        z.call(gr, "remove", vec![Value::str("aueb")]);
        z.ledger.seal_block();
        let trail = audit_trail(z.ledger.state(), &name, root).unwrap();
        assert_eq!(trail.last().unwrap().new, None);
    }
}
