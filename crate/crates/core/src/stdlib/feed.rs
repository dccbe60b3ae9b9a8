//! On-chain measurement feed with aggregation over tick windows.

use super::{next_seq, seq_key, Milli, MemberList};
use crate::codec::{Args, Value};
use crate::runtime::{Behavior, ContractError, Ctx};

pub struct Feed;

pub const LAST: &[u8] = b"last";
pub const COUNT: &[u8] = b"count";
const WRITERS: MemberList = MemberList("writer");

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Measurement {
    pub value: Milli,
    pub unit: String,
    pub tick: u64,
}

impl Measurement {
    pub fn to_value(&self) -> Value {
        Value::List(vec![
            Value::I64(self.value.0),
            Value::Str(self.unit.clone()),
            Value::U64(self.tick),
        ])
    }

    pub fn from_value(v: &Value) -> Option<Measurement> {
        let [value, unit, tick] = v.as_list()? else {
            return None;
        };
        Some(Measurement {
            value: Milli(value.as_i64()?),
            unit: unit.as_str()?.to_string(),
            tick: tick.as_u64()?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Stats {
    pub min: Milli,
    pub max: Milli,
    pub avg: Milli,
    pub count: u64,
}

impl Stats {
    pub fn to_value(&self) -> Value {
        Value::List(vec![
            Value::I64(self.min.0),
            Value::I64(self.max.0),
            Value::I64(self.avg.0),
            Value::U64(self.count),
        ])
    }

    pub fn from_value(v: &Value) -> Option<Stats> {
        let [min, max, avg, count] = v.as_list()? else {
            return None;
        };
        Some(Stats {
            min: Milli(min.as_i64()?),
            max: Milli(max.as_i64()?),
            avg: Milli(avg.as_i64()?),
            count: count.as_u64()?,
        })
    }

    /// Min, max, half-up mean and count of `values`; `None` when empty.
    pub fn compute(values: &[Milli]) -> Option<Stats> {
        Some(Stats {
            min: *values.iter().min()?,
            max: *values.iter().max()?,
            avg: Milli::mean_half_up(values.iter().copied())?,
            count: values.len() as u64,
        })
    }
}

impl std::fmt::Display for Stats {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "min={} max={} avg={} count={}",
            self.min, self.max, self.avg, self.count
        )
    }
}

fn measurements(ctx: &Ctx<'_, '_>) -> impl Iterator<Item = Measurement> {
    ctx.scan_prefix(b"m/").into_iter().filter_map(|(_, v)| {
        let v: Value = crate::codec::Canonical::from_bytes(&v).ok()?;
        Measurement::from_value(&v)
    })
}

impl Behavior for Feed {
    fn code_id(&self) -> &'static str {
        "feed"
    }

    fn methods(&self) -> &'static [&'static str] {
        &["push", "last", "stats", "count", "add_writer", "remove_writer"]
    }

    fn call(&self, ctx: &mut Ctx<'_, '_>, method: &str, args: &Args) -> Result<Value, ContractError> {
        match method {
            // push(value: i64 milli, unit: str, tick: u64)
            "push" => {
                WRITERS.require(ctx)?;
                let m = Measurement {
                    value: Milli(args.i64_at(0)?),
                    unit: args.str_at(1)?.to_string(),
                    tick: args.u64_at(2)?,
                };
                if let Some(prev) = ctx.get_value(LAST).and_then(|v| Measurement::from_value(&v)) {
                    if m.tick < prev.tick {
                        return Err(ContractError::NonMonotonicTick);
                    }
                }
                let n = next_seq(ctx, COUNT);
                let v = m.to_value();
                ctx.set_value(&seq_key("m", n), &v);
                ctx.set_value(LAST, &v);
                Ok(Value::U64(n))
            }
            "last" => ctx.get_value(LAST).ok_or(ContractError::EmptyWindow),
            // stats(from: u64, to: u64), inclusive tick window
            "stats" => {
                let (from, to) = (args.u64_at(0)?, args.u64_at(1)?);
                let values: Vec<Milli> = measurements(ctx)
                    .filter(|m| (from..=to).contains(&m.tick))
                    .map(|m| m.value)
                    .collect();
                Stats::compute(&values)
                    .map(|s| s.to_value())
                    .ok_or(ContractError::EmptyWindow)
            }
            "count" => Ok(Value::U64(
                ctx.get_value(COUNT).and_then(|v| v.as_u64()).unwrap_or(0),
            )),
            "add_writer" => WRITERS.add(ctx, &args.account_at(0)?),
            "remove_writer" => WRITERS.remove(ctx, &args.account_at(0)?),
            _ => Err(ContractError::MethodNotFound),
        }
    }
}
