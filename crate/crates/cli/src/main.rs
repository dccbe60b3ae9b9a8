use std::io::BufRead;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use thingledger_core::gateway::delivery::WallClock;
use thingledger_core::gateway::server::{FileConfig, Server};
use thingledger_core::gateway::{render_record, Gateway, GatewayError};
use thingledger_core::ledger::{export_chain, import_chain};
use thingledger_core::resolver::{self, Name};
use thingledger_core::scenario::{self, Bindings, Options, Report};
use thingledger_core::stdlib::feed::Measurement;
use thingledger_core::{Args, Canonical, CodeRegistry, ContractAddress, Ledger, Receipt, Signer, Target, Value};

/// Drives the thingledger simulator: scenarios, contracts, names and the
/// datagram gateway.
#[derive(Parser)]
#[command(name = "thingledger", version)]
struct Cli {
    /// Chain file to operate on. Without it, commands work on the bundled
    /// smart-building fixture, in memory.
    #[arg(long, global = true)]
    chain: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Runs a scenario script (the bundled one by default) and writes its
    /// chain and name bindings to OUT.
    Init {
        out: PathBuf,
        #[arg(long)]
        script: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Runs a scenario script and prints its report. Exits nonzero on the
    /// first failing step.
    Run {
        script: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Also export the resulting chain here.
        #[arg(long)]
        export: Option<PathBuf>,
    },
    /// Deploys a contract from the account derived from `--as`.
    Deploy {
        #[arg(long = "as")]
        signer: String,
        code: String,
        /// Init arguments as literals (`u64:5`, `str:x`, `@name`, ...).
        args: Vec<String>,
        /// Binds the new address to this name.
        #[arg(long)]
        name: Option<String>,
        #[arg(long, default_value_t = 0)]
        tokens: u64,
    },
    /// Submits a contract call.
    Call {
        #[arg(long = "as")]
        signer: String,
        contract: String,
        method: String,
        args: Vec<String>,
        #[arg(long, default_value_t = 0)]
        tokens: u64,
    },
    /// Read-only: runs a query method, reads a raw storage key, or shows the
    /// contract's metadata when neither is given.
    Read {
        contract: String,
        method: Option<String>,
        args: Vec<String>,
        #[arg(long, conflicts_with = "method")]
        key: Option<String>,
    },
    /// Every committed value of one storage key, oldest first.
    History { contract: String, key: String },
    /// Resolves a dotted name from a root zone.
    Resolve {
        name: String,
        #[arg(long, default_value = "root")]
        root: String,
    },
    /// Committed changes to every label on a name's resolution path.
    Audit {
        name: String,
        #[arg(long, default_value = "root")]
        root: String,
    },
    /// Kills a contract, returning its balance to the owner.
    Kill {
        #[arg(long = "as")]
        signer: String,
        contract: String,
    },
    /// Writes the current chain to OUT and prints its state digest.
    ExportChain { out: PathBuf },
    /// Verifies and re-executes an exported chain and prints the digest.
    Replay { file: PathBuf },
    /// Runs the datagram gateway until stdin closes or `--duration` ends.
    Gateway {
        /// TOML gateway configuration.
        #[arg(long)]
        config: PathBuf,
        /// Overrides the listen address from the config file.
        #[arg(long)]
        listen: Option<String>,
        /// Export the chain here on shutdown.
        #[arg(long)]
        chain_export: Option<PathBuf>,
        /// Overrides the master seed from the config file.
        #[arg(long)]
        seed: Option<String>,
        /// Stop after this many seconds.
        #[arg(long)]
        duration: Option<u64>,
    },
}

fn names_path(chain: &Path) -> PathBuf {
    let mut p = chain.as_os_str().to_owned();
    p.push(".names.json");
    PathBuf::from(p)
}

fn write_chain(path: &Path, ledger: &Ledger, bindings: &Bindings) -> Result<()> {
    export_chain(path, ledger.blocks()).with_context(|| format!("writing {}", path.display()))?;
    std::fs::write(names_path(path), serde_json::to_string_pretty(bindings)?)?;
    Ok(())
}

struct Session {
    ledger: Ledger,
    bindings: Bindings,
    chain: Option<PathBuf>,
}

impl Session {
    fn open(chain: Option<&Path>) -> Result<Session> {
        let Some(path) = chain else {
            let out = scenario::run_script(scenario::SMART_BUILDING, &Options::default())?;
            drop(out.gateway);
            let ledger = Arc::try_unwrap(out.ledger)
                .map_err(|_| anyhow!("fixture ledger still shared"))?
                .into_inner()
                .map_err(|_| anyhow!("fixture ledger poisoned"))?;
            return Ok(Session {
                ledger,
                bindings: out.bindings,
                chain: None,
            });
        };
        let blocks = import_chain(path).with_context(|| format!("reading {}", path.display()))?;
        let ledger = Ledger::from_chain(blocks, Arc::new(CodeRegistry::standard()))?;
        let names = names_path(path);
        let bindings = if names.exists() {
            serde_json::from_str(&std::fs::read_to_string(&names)?)
                .with_context(|| format!("reading {}", names.display()))?
        } else {
            Bindings::default()
        };
        Ok(Session {
            ledger,
            bindings,
            chain: Some(path.to_path_buf()),
        })
    }

    fn contract(&self, name: &str) -> Result<ContractAddress> {
        self.bindings
            .contract(name)
            .ok_or_else(|| anyhow!("unknown contract {name:?}"))
    }

    fn args(&self, lits: &[String]) -> Result<Args> {
        lits.iter()
            .map(|l| scenario::parse_literal(l, &|n| self.bindings.lookup(n)).map_err(|e| anyhow!(e)))
            .collect::<Result<_>>()
            .map(Args::new)
    }

    fn signer(&mut self, name: &str) -> Result<Signer> {
        let signer = Signer::from_seed(name.as_bytes()).ok_or_else(|| anyhow!("empty account name"))?;
        if self.ledger.balance(&signer.account_id()).is_none() {
            self.ledger.create_account(name.as_bytes())?;
        }
        self.bindings.accounts.insert(name.to_string(), signer.account_id());
        Ok(signer)
    }

    /// Submits, seals, and writes the chain back when it came from a file.
    fn submit(&mut self, who: &str, target: Target, method: &str, args: &Args, tokens: u64) -> Result<(Receipt, u64)> {
        let signer = self.signer(who)?;
        let receipt = self.ledger.submit_call(&signer, target, method, args, tokens)?;
        let height = self.ledger.seal_block().height;
        if let Some(path) = &self.chain {
            write_chain(path, &self.ledger, &self.bindings)?;
        }
        Ok((receipt, height))
    }
}

fn render_value(v: &Value) -> String {
    match Measurement::from_value(v) {
        Some(m) => format!("{} {} tick={}", m.value, m.unit, m.tick),
        None => v.to_string(),
    }
}

fn receipt_json(r: &Receipt, height: u64) -> serde_json::Value {
    json!({
        "height": height,
        "status": r.status.to_string(),
        "value": r.value().map(|v| v.to_string()),
        "events": r.events.iter().map(|e| json!({"name": e.name, "source": e.source.to_string()})).collect::<Vec<_>>(),
        "receipt_digest": r.digest().to_string(),
    })
}

fn receipt_text(r: &Receipt, height: u64) -> String {
    let mut out = format!("{} at height {height}", r.status);
    if let Some(v) = r.value().filter(|v| !v.is_unit()) {
        out.push_str(&format!("\nvalue  {v}"));
    }
    for e in &r.events {
        out.push_str(&format!("\nevent  {} from {}", e.name, e.source));
    }
    out
}

fn emit(format: Format, text: String, value: serde_json::Value) -> Result<()> {
    match format {
        Format::Text => println!("{text}"),
        Format::Json => println!("{}", serde_json::to_string_pretty(&value)?),
    }
    Ok(())
}

fn print_report(format: Format, report: &Report) -> Result<()> {
    match format {
        Format::Text => print!("{}", report.to_text()),
        Format::Json => println!("{}", serde_json::to_string_pretty(report)?),
    }
    Ok(())
}

fn run_gateway(
    session: Session,
    config: &Path,
    listen: Option<String>,
    chain_export: Option<PathBuf>,
    seed: Option<String>,
    duration: Option<u64>,
) -> Result<()> {
    let mut cfg = FileConfig::load(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(l) = listen {
        cfg.listen = l;
    }
    let mut gw_config = cfg.gateway_config();
    if gw_config.roots.is_empty() {
        gw_config.roots.extend(session.bindings.contract("root"));
    }
    let ledger = Arc::new(RwLock::new(session.ledger));
    let gateway = match &cfg.journal {
        Some(p) => Gateway::open(Arc::clone(&ledger), gw_config, p)?,
        None => Gateway::new(Arc::clone(&ledger), gw_config)?,
    };
    for t in &cfg.things {
        match gateway.register_thing(&t.id, &t.sink) {
            Ok(_) | Err(GatewayError::DuplicateThing(_)) => {}
            Err(e) => bail!("registering {}: {e}", t.id),
        }
    }
    let tick = Duration::from_millis(cfg.tick_ms);
    let server = Server::start(Arc::new(gateway), &cfg.listen, 4, tick, Arc::new(WallClock::new(tick)))?;
    eprintln!("listening on {}", server.local_addr);
    match duration {
        Some(secs) => std::thread::sleep(Duration::from_secs(secs)),
        None => for _ in std::io::stdin().lock().lines() {},
    }
    server.stop();
    if let Some(path) = chain_export {
        let l = ledger.read().unwrap();
        write_chain(&path, &l, &session.bindings)?;
        eprintln!("chain exported to {} (state {})", path.display(), l.state_digest());
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let format = cli.format;
    match cli.command {
        Command::Init { out, script, seed } => {
            let options = Options {
                seed,
                export: Some(out.clone()),
            };
            let outcome = match script {
                Some(p) => scenario::run_file(&p, &options)?,
                None => scenario::run_script(scenario::SMART_BUILDING, &options)?,
            };
            std::fs::write(names_path(&out), serde_json::to_string_pretty(&outcome.bindings)?)?;
            let r = &outcome.report;
            emit(
                format,
                format!("wrote {} (height {}, state {})", out.display(), r.height, r.state_digest),
                json!({"chain": out, "height": r.height, "state_digest": r.state_digest}),
            )
        }
        Command::Run { script, seed, export } => {
            let options = Options { seed, export };
            let outcome = match script {
                Some(p) => scenario::run_file(&p, &options)?,
                None => scenario::run_script(scenario::SMART_BUILDING, &options)?,
            };
            print_report(format, &outcome.report)
        }
        Command::Deploy {
            signer,
            code,
            args,
            name,
            tokens,
        } => {
            let mut s = Session::open(cli.chain.as_deref())?;
            let args = s.args(&args)?;
            let (r, h) = s.submit(&signer, Target::Deploy(code), "", &args, tokens)?;
            if let (Some(n), Some(Value::Id(addr))) = (name, r.value()) {
                s.bindings.contracts.insert(n, ContractAddress(addr));
                if let Some(path) = &s.chain {
                    std::fs::write(names_path(path), serde_json::to_string_pretty(&s.bindings)?)?;
                }
            }
            emit(format, receipt_text(&r, h), receipt_json(&r, h))
        }
        Command::Call {
            signer,
            contract,
            method,
            args,
            tokens,
        } => {
            let mut s = Session::open(cli.chain.as_deref())?;
            let addr = s.contract(&contract)?;
            let args = s.args(&args)?;
            let (r, h) = s.submit(&signer, Target::Contract(addr), &method, &args, tokens)?;
            emit(format, receipt_text(&r, h), receipt_json(&r, h))
        }
        Command::Kill { signer, contract } => {
            let mut s = Session::open(cli.chain.as_deref())?;
            let addr = s.contract(&contract)?;
            let (r, h) = s.submit(&signer, Target::Contract(addr), "kill", &Args::empty(), 0)?;
            emit(format, receipt_text(&r, h), receipt_json(&r, h))
        }
        Command::Read {
            contract,
            method,
            args,
            key,
        } => {
            let s = Session::open(cli.chain.as_deref())?;
            let addr = s.contract(&contract)?;
            if let Some(method) = method {
                let v = s
                    .ledger
                    .query(&addr, &method, &s.args(&args)?)
                    .map_err(|e| anyhow!("{e}"))?;
                return emit(format, render_value(&v), json!({"value": v.to_string()}));
            }
            if let Some(key) = key {
                let v = s.ledger.read_value(&addr, key.as_bytes())?;
                let text = v.as_ref().map_or("(unset)".to_string(), render_value);
                return emit(format, text, json!({"key": key, "value": v.map(|v| v.to_string())}));
            }
            let info = s.ledger.contract(&addr).ok_or_else(|| anyhow!("no contract at {addr}"))?;
            emit(
                format,
                format!(
                    "address  {}\ncode     {}\nowner    {}\nbalance  {}\nkilled   {}\ndeployed {}",
                    info.address, info.code_id, info.owner, info.balance, info.killed, info.deployed_at
                ),
                json!({
                    "address": info.address, "code_id": info.code_id, "owner": info.owner,
                    "balance": info.balance, "killed": info.killed, "deployed_at": info.deployed_at,
                }),
            )
        }
        Command::History { contract, key } => {
            let s = Session::open(cli.chain.as_deref())?;
            let addr = s.contract(&contract)?;
            let entries: Vec<(u64, Option<Value>)> = s
                .ledger
                .history(&addr, key.as_bytes())?
                .into_iter()
                .map(|(h, bytes)| (h, bytes.and_then(|b| Value::from_bytes(&b).ok())))
                .collect();
            let text = entries
                .iter()
                .map(|(h, v)| format!("{h:>6}  {}", v.as_ref().map_or("(removed)".into(), render_value)))
                .collect::<Vec<_>>()
                .join("\n");
            let rows: Vec<_> = entries
                .iter()
                .map(|(h, v)| json!({"height": h, "value": v.as_ref().map(|v| v.to_string())}))
                .collect();
            emit(format, text, json!(rows))
        }
        Command::Resolve { name, root } => {
            let s = Session::open(cli.chain.as_deref())?;
            let root_addr = s.contract(&root)?;
            let parsed: Name = name.parse()?;
            let r = resolver::resolve(s.ledger.state(), &parsed, root_addr)?;
            let mut path = vec![s.bindings.contract_name(&root_addr).unwrap_or(&root).to_string()];
            path.extend(r.path.iter().map(|(_, label)| label.clone()));
            let key = r.record.service_key.as_deref().map(hex::encode);
            let mut text = format!("name   {parsed}\n");
            if let Some(k) = &key {
                text.push_str(&format!("key    {k}\n"));
            }
            if let Some(u) = &r.record.uri {
                text.push_str(&format!("uri    {u}\n"));
            }
            text.push_str(&format!("path   {}", path.join(" -> ")));
            emit(
                format,
                text,
                json!({
                    "name": parsed.to_string(), "service_key": key, "uri": r.record.uri,
                    "path": path, "depth": r.depth, "record": render_record(&r.record),
                }),
            )
        }
        Command::Audit { name, root } => {
            let s = Session::open(cli.chain.as_deref())?;
            let root_addr = s.contract(&root)?;
            let parsed: Name = name.parse()?;
            let trail = resolver::audit_trail(s.ledger.state(), &parsed, root_addr)?;
            let zone = |a: &ContractAddress| s.bindings.contract_name(a).map_or(a.to_string(), str::to_string);
            let show = |r: &Option<_>| r.as_ref().map_or("(none)".to_string(), render_record);
            let text = trail
                .iter()
                .map(|e| format!("{:>6}  {}/{}  {} => {}", e.height, zone(&e.zone), e.label, show(&e.old), show(&e.new)))
                .collect::<Vec<_>>()
                .join("\n");
            let rows: Vec<_> = trail
                .iter()
                .map(|e| {
                    json!({
                        "height": e.height, "zone": e.zone, "label": e.label,
                        "old": e.old.as_ref().map(render_record), "new": e.new.as_ref().map(render_record),
                    })
                })
                .collect();
            emit(format, text, json!(rows))
        }
        Command::ExportChain { out } => {
            let s = Session::open(cli.chain.as_deref())?;
            write_chain(&out, &s.ledger, &s.bindings)?;
            let d = s.ledger.state_digest();
            emit(
                format,
                format!("{d}"),
                json!({"chain": out, "height": s.ledger.height(), "state_digest": d}),
            )
        }
        Command::Replay { file } => {
            let blocks = import_chain(&file).with_context(|| format!("reading {}", file.display()))?;
            let d = Ledger::replay(&blocks, &CodeRegistry::standard())?;
            emit(
                format,
                format!("{d}"),
                json!({"chain": file, "blocks": blocks.len(), "state_digest": d}),
            )
        }
        Command::Gateway {
            config,
            listen,
            chain_export,
            seed,
            duration,
        } => {
            let s = Session::open(cli.chain.as_deref())?;
            run_gateway(s, &config, listen, chain_export, seed, duration)
        }
    }
}
