//! `carbid`: key management, node launch, transaction authoring and
//! simulation runs. Every command prints one JSON document on stdout.

mod client;
mod keyfile;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use carbid_core::netsim::{double_spend_experiment, Scenario};
use carbid_core::{Address, GenesisConfig, Keypair, TxPayload, UnsignedTx};
use carbid_node::{serve, Node, NodeConfig, SystemClock};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use client::NodeClient;
use keyfile::Keyfile;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or unusable local input (exit 2).
    Input(String),
    /// The node could not be reached (exit 3).
    Unreachable(String),
    /// The node refused the transaction (exit 4); body printed as-is.
    Rejected(Value),
    /// Any other non-success answer from the node, e.g. 404.
    Node(Value),
    Timeout(String),
    Sim(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Unreachable(_) => 3,
            CliError::Rejected(_) => 4,
            CliError::Node(_) => 5,
            CliError::Timeout(_) => 6,
            CliError::Sim(_) => 7,
        }
    }

    fn body(&self) -> Value {
        let err = |code: &str, m: &str| json!({ "code": code, "message": m });
        match self {
            CliError::Input(m) => err("Usage", m),
            CliError::Unreachable(m) => err("Unreachable", m),
            CliError::Rejected(v) | CliError::Node(v) => v.clone(),
            CliError::Timeout(m) => err("Timeout", m),
            CliError::Sim(m) => err("SimError", m),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "carbid", version, about = "Vehicle auction ledger: keys, node, transactions, simulations")]
struct Cli {
    /// Node base URL.
    #[arg(long, global = true, env = "NODE_URL", default_value = "http://127.0.0.1:8545")]
    node: String,
    /// Indent JSON output.
    #[arg(long, global = true)]
    pretty: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct TxOpts {
    /// Keyfile of the signing account.
    #[arg(long)]
    key: PathBuf,
    /// Use this nonce instead of asking the node for the next one.
    #[arg(long)]
    nonce: Option<u64>,
    #[arg(long, default_value_t = carbid_core::state::DEFAULT_GAS_FEE)]
    fee: u64,
    /// Block until the transaction is mined and print its receipt.
    #[arg(long)]
    wait: bool,
    #[arg(long, default_value_t = 60)]
    wait_timeout_secs: u64,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a keypair and write it to a permission-restricted keyfile.
    Keygen {
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long)]
        force: bool,
    },
    /// Run a node service until interrupted.
    RunNode {
        #[arg(long, env = "CARBID_GENESIS")]
        genesis: PathBuf,
        #[arg(long, env = "CARBID_LISTEN", default_value = "127.0.0.1:8545")]
        listen: String,
        /// Append-only block log; replayed on start.
        #[arg(long, env = "CARBID_BLOCK_LOG")]
        block_log: Option<PathBuf>,
        /// Overrides the genesis block interval.
        #[arg(long, env = "CARBID_BLOCK_INTERVAL_MS")]
        block_interval_ms: Option<u64>,
        /// Address credited with fees and rewards (default: the agent).
        #[arg(long)]
        miner: Option<Address>,
    },
    AddCar {
        #[arg(long)]
        owner: Address,
        #[arg(long)]
        price: u64,
        #[arg(long, default_value_t = 0)]
        age: u64,
        #[arg(long, default_value_t = 0)]
        miles: u64,
        #[command(flatten)]
        tx: TxOpts,
    },
    UploadAccident {
        #[arg(long)]
        car: u64,
        #[arg(long)]
        cost: u64,
        #[command(flatten)]
        tx: TxOpts,
    },
    /// Estimated price of a car at the current head.
    Price {
        #[arg(long)]
        car: u64,
    },
    /// Full car record.
    Car {
        #[arg(long)]
        car: u64,
    },
    /// Auction snapshot with remaining time.
    Auction {
        #[arg(long)]
        auction: u64,
    },
    /// Balance and nonces of an address (or of --key).
    Account {
        #[arg(long, conflicts_with = "key")]
        address: Option<Address>,
        #[arg(long)]
        key: Option<PathBuf>,
    },
    StartAuction {
        #[arg(long)]
        car: u64,
        #[arg(long)]
        duration: u64,
        #[command(flatten)]
        tx: TxOpts,
    },
    Bid {
        #[arg(long)]
        auction: u64,
        #[arg(long)]
        amount: u64,
        #[command(flatten)]
        tx: TxOpts,
    },
    Withdraw {
        #[arg(long)]
        auction: u64,
        #[command(flatten)]
        tx: TxOpts,
    },
    EndAuction {
        #[arg(long)]
        auction: u64,
        #[command(flatten)]
        tx: TxOpts,
    },
    Transfer {
        #[arg(long)]
        to: Address,
        #[arg(long)]
        amount: u64,
        #[command(flatten)]
        tx: TxOpts,
    },
    /// Run a network simulation scenario file.
    RunSim {
        #[arg(long)]
        scenario: PathBuf,
        /// Also write reorg and latency samples as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Monte-Carlo private-branch double-spend race.
    DoubleSpend {
        #[arg(long)]
        q: f64,
        #[arg(long)]
        z: u64,
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

fn print(value: &Value, pretty: bool) {
    let text = if pretty {
        serde_json::to_string_pretty(value)
    } else {
        serde_json::to_string(value)
    }
    .expect("json value serializes");
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{text}");
    let _ = out.flush();
}

fn send_tx(cli: &Cli, opts: &TxOpts, payload: TxPayload) -> Result<Value, CliError> {
    let key = Keyfile::load(&opts.key)?;
    let client = NodeClient::new(&cli.node);
    let nonce = match opts.nonce {
        Some(n) => n,
        None => {
            let acct = client.get(&format!("/accounts/{}", key.address()))?;
            acct["pending_nonce"]
                .as_u64()
                .ok_or_else(|| CliError::Node(acct.clone()))?
        }
    };
    let tx = UnsignedTx::new(key.address(), nonce, opts.fee, payload).sign(&key);
    let mut result = client.submit(&serde_json::to_value(&tx).expect("tx serializes"))?;
    if opts.wait {
        let hash = result["tx_hash"].as_str().unwrap_or_default().to_string();
        let receipt = client.wait_receipt(&hash, Duration::from_secs(opts.wait_timeout_secs))?;
        result["receipt"] = receipt;
    }
    Ok(result)
}

fn run_node(
    genesis: &PathBuf,
    listen: &str,
    block_log: Option<PathBuf>,
    interval_ms: Option<u64>,
    miner: Option<Address>,
    pretty: bool,
) -> Result<Value, CliError> {
    let genesis = GenesisConfig::load(genesis).map_err(|e| CliError::Input(e.to_string()))?;
    let mut cfg = NodeConfig::new(genesis);
    cfg.block_log = block_log;
    if let Some(ms) = interval_ms {
        cfg.block_interval = Duration::from_millis(ms.max(1));
    }
    if let Some(m) = miner {
        cfg.miner = m;
    }
    let node = Node::start(cfg, Arc::new(SystemClock)).map_err(|e| CliError::Input(e.to_string()))?;
    let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::Input(e.to_string()))?;
    let listener = rt
        .block_on(tokio::net::TcpListener::bind(listen))
        .map_err(|e| CliError::Input(format!("binding {listen}: {e}")))?;
    let local = listener.local_addr().map_err(|e| CliError::Input(e.to_string()))?;
    let head = node.handle().snapshot().head;
    print(&json!({ "listening": format!("http://{local}"), "head": head }), pretty);

    let handle = node.handle();
    let served = rt.block_on(async move {
        tokio::select! {
            r = serve(listener, handle) => r,
            _ = tokio::signal::ctrl_c() => Ok(()),
        }
    });
    node.shutdown();
    served.map_err(|e| CliError::Unreachable(e.to_string()))?;
    Ok(json!({ "stopped": true }))
}

fn run(cli: &Cli) -> Result<Value, CliError> {
    let query = |path: String| NodeClient::new(&cli.node).get(&path);
    match &cli.command {
        Command::Keygen { output, force } => {
            let key = Keypair::generate(&mut rand::rng());
            let file = Keyfile::from_keypair(&key);
            file.write(output, *force)?;
            Ok(json!({ "address": file.address, "public_key": file.public_key, "path": output }))
        }
        Command::RunNode {
            genesis,
            listen,
            block_log,
            block_interval_ms,
            miner,
        } => run_node(genesis, listen, block_log.clone(), *block_interval_ms, *miner, cli.pretty),
        Command::AddCar {
            owner,
            price,
            age,
            miles,
            tx,
        } => send_tx(
            cli,
            tx,
            TxPayload::AddCar {
                owner: *owner,
                initial_price: *price,
                age_years: *age,
                miles: *miles,
            },
        ),
        Command::UploadAccident { car, cost, tx } => {
            send_tx(cli, tx, TxPayload::UploadAccidentCost { car_id: *car, cost: *cost })
        }
        Command::Price { car } => query(format!("/cars/{car}/price")),
        Command::Car { car } => query(format!("/cars/{car}")),
        Command::Auction { auction } => query(format!("/auctions/{auction}")),
        Command::Account { address, key } => {
            let addr = match (address, key) {
                (Some(a), _) => *a,
                (None, Some(k)) => Keyfile::load(k)?.address(),
                (None, None) => return Err(CliError::Input("pass --address or --key".into())),
            };
            query(format!("/accounts/{addr}"))
        }
        Command::StartAuction { car, duration, tx } => send_tx(
            cli,
            tx,
            TxPayload::StartAuction {
                car_id: *car,
                duration_seconds: *duration,
            },
        ),
        Command::Bid {
            auction,
            amount,
            tx,
        } => send_tx(
            cli,
            tx,
            TxPayload::Bid {
                auction_id: *auction,
                amount: *amount,
            },
        ),
        Command::Withdraw { auction, tx } => {
            send_tx(cli, tx, TxPayload::Withdraw { auction_id: *auction })
        }
        Command::EndAuction { auction, tx } => {
            send_tx(cli, tx, TxPayload::EndAuction { auction_id: *auction })
        }
        Command::Transfer { to, amount, tx } => send_tx(
            cli,
            tx,
            TxPayload::Transfer {
                to: *to,
                amount: *amount,
            },
        ),
        Command::RunSim { scenario, csv } => {
            let text = std::fs::read_to_string(scenario)
                .map_err(|e| CliError::Input(format!("reading {}: {e}", scenario.display())))?;
            let scenario: Scenario = serde_json::from_str(&text)
                .map_err(|e| CliError::Input(format!("parsing {}: {e}", scenario.display())))?;
            let report = scenario.run().map_err(|e| CliError::Sim(e.to_string()))?;
            if let Some(path) = csv {
                std::fs::write(path, report.to_csv())
                    .map_err(|e| CliError::Input(format!("writing {}: {e}", path.display())))?;
            }
            Ok(serde_json::to_value(report).expect("report serializes"))
        }
        Command::DoubleSpend { q, z, trials, seed } => {
            let r = double_spend_experiment(*q, *z, *trials, *seed)
                .map_err(|e| CliError::Sim(e.to_string()))?;
            Ok(serde_json::to_value(r).expect("result serializes"))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(v) => {
            print(&v, cli.pretty);
            ExitCode::SUCCESS
        }
        Err(e) => {
            let body = e.body();
            if matches!(e, CliError::Rejected(_)) {
                print(&body, cli.pretty);
            } else {
                let _ = writeln!(std::io::stderr(), "{body}");
            }
            ExitCode::from(e.exit_code())
        }
    }
}
