use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Duration, Instant};

use carbid_core::{Address, GenesisConfig, Hash32, Keypair, Target, Transaction, TxPayload, UnsignedTx};
use carbid_node::{serve, ManualClock, Node, NodeConfig};
use serde_json::{json, Value};

struct TestNode {
    rt: tokio::runtime::Runtime,
    node: Node,
    base: String,
    clock: ManualClock,
    http: ureq::Agent,
}

struct Keys {
    agent: Keypair,
    owner: Keypair,
    b1: Keypair,
    b2: Keypair,
}

fn keys() -> Keys {
    Keys {
        agent: Keypair::from_label("demo-agent"),
        owner: Keypair::from_label("demo-owner"),
        b1: Keypair::from_label("demo-buyer-1"),
        b2: Keypair::from_label("demo-buyer-2"),
    }
}

fn genesis() -> GenesisConfig {
    let k = keys();
    GenesisConfig::new(k.agent.address(), Target::pow2(248))
        .with_balance(k.agent.address(), 1_000_000)
        .with_balance(k.owner.address(), 10_000)
        .with_balance(k.b1.address(), 100_000)
        .with_balance(k.b2.address(), 100_000)
}

fn start(log: Option<PathBuf>, interval: Duration) -> TestNode {
    let clock = ManualClock::new(1000);
    let mut cfg = NodeConfig::new(genesis());
    cfg.block_log = log;
    cfg.block_interval = interval;
    let node = Node::start(cfg, Arc::new(clock.clone())).unwrap();
    let rt = tokio::runtime::Builder::new_multi_thread()
        .worker_threads(2)
        .enable_all()
        .build()
        .unwrap();
    let listener = rt
        .block_on(tokio::net::TcpListener::bind("127.0.0.1:0"))
        .unwrap();
    let base = format!("http://{}", listener.local_addr().unwrap());
    rt.spawn(serve(listener, node.handle()));
    let http = ureq::Agent::config_builder()
        .http_status_as_error(false)
        .build()
        .into();
    TestNode { rt, node, base, clock, http }
}

fn manual() -> TestNode {
    start(None, Duration::from_secs(3600))
}

impl TestNode {
    fn get(&self, path: &str) -> (u16, Value) {
        let mut r = self.http.get(format!("{}{path}", self.base)).call().unwrap();
        (r.status().as_u16(), r.body_mut().read_json().unwrap())
    }

    fn post_raw(&self, body: &str) -> (u16, Value) {
        let mut r = self
            .http
            .post(format!("{}/tx", self.base))
            .header("content-type", "application/json")
            .send(body)
            .unwrap();
        (r.status().as_u16(), r.body_mut().read_json().unwrap())
    }

    fn post(&self, tx: &Transaction) -> (u16, Value) {
        self.post_raw(&serde_json::to_string(tx).unwrap())
    }

    /// Signs with the pending nonce reported by the node and expects acceptance.
    fn send(&self, key: &Keypair, payload: TxPayload) -> Hash32 {
        let (_, acct) = self.get(&format!("/accounts/{}", key.address()));
        let nonce = acct["pending_nonce"].as_u64().unwrap();
        let tx = UnsignedTx::new(key.address(), nonce, 10, payload).sign(key);
        let (status, body) = self.post(&tx);
        assert_eq!(status, 200, "{body}");
        assert_eq!(body["accepted"], true);
        body["tx_hash"].as_str().unwrap().parse().unwrap()
    }

    fn mine(&self) -> Option<Hash32> {
        self.rt.block_on(self.node.handle().mine_now())
    }
}

fn owner_of(n: &TestNode, car: u64) -> Address {
    let (_, c) = n.get(&format!("/cars/{car}"));
    c["owner"].as_str().unwrap().parse().unwrap()
}

/// add → accident → auction → two bids → end: the car changes hands and
/// the re-priced car reflects one trade.
fn run_auction_flow(n: &TestNode) {
    let k = keys();
    n.send(&k.agent, TxPayload::AddCar { owner: k.owner.address(), initial_price: 10_000, age_years: 2, miles: 50_000 });
    n.send(&k.agent, TxPayload::UploadAccidentCost { car_id: 1, cost: 500 });
    n.mine().unwrap();
    assert_eq!(n.get("/cars/1/price").1, json!({"car_id": 1, "tprice": 5575}));
    n.send(&k.agent, TxPayload::StartAuction { car_id: 1, duration_seconds: 60 });
    n.mine().unwrap();
    let (_, a) = n.get("/auctions/1");
    assert_eq!(a["tprice"], 5575);
    assert_eq!(a["remaining_seconds"], 60);
    n.clock.advance(10);
    n.send(&k.b1, TxPayload::Bid { auction_id: 1, amount: 6000 });
    n.send(&k.b2, TxPayload::Bid { auction_id: 1, amount: 6500 });
    n.mine().unwrap();
    let (_, a) = n.get("/auctions/1");
    assert_eq!(a["highest_bid"], 6500);
    assert_eq!(a["highest_bidder"], json!(k.b2.address()));
    assert_eq!(a["remaining_seconds"], 50);
    n.clock.advance(60);
    n.send(&k.b1, TxPayload::EndAuction { auction_id: 1 });
    n.mine().unwrap();
    assert_eq!(owner_of(n, 1), k.b2.address());
}

#[test]
fn auction_round_trip_changes_owner() {
    let n = manual();
    let k = keys();
    run_auction_flow(&n);
    let (_, car) = n.get("/cars/1");
    assert_eq!(car["trade_times"], 1);
    assert_eq!(car["accident_costs"], json!([500]));
    assert_eq!(n.get("/cars/1/price").1["tprice"], 5296);
    let (_, owner) = n.get(&format!("/accounts/{}", k.owner.address()));
    assert_eq!(owner["balance"], 10_000 + 6500);
    let (_, b1) = n.get(&format!("/accounts/{}", k.b1.address()));
    assert_eq!(b1["balance"], 100_000 - 6000 - 20);
    n.send(&k.b1, TxPayload::Withdraw { auction_id: 1 });
    n.mine().unwrap();
    let (_, b1) = n.get(&format!("/accounts/{}", k.b1.address()));
    assert_eq!(b1["balance"], 100_000 - 30);
}

#[test]
fn head_matches_ledger() {
    let n = manual();
    let (_, head) = n.get("/chain/head");
    assert_eq!(head["height"], 0);
    assert_eq!(head["hash"], json!(genesis().block().hash()));
    assert_eq!(head["state_root"], json!(genesis().state().state_root()));
    let k = keys();
    n.send(&k.b1, TxPayload::Transfer { to: k.b2.address(), amount: 5 });
    let h = n.mine().unwrap();
    let (_, head) = n.get("/chain/head");
    assert_eq!(head["height"], 1);
    assert_eq!(head["hash"], json!(h));
    assert_eq!(head["timestamp"], 1000);
    assert!(n.mine().is_none(), "empty blocks are skipped");
}

#[test]
fn submission_errors() {
    let n = manual();
    let k = keys();
    let (status, body) = n.post_raw("{not json");
    assert_eq!(status, 400);
    assert_eq!(body["code"], "Malformed");
    assert!(body["message"].is_string());

    let tx = UnsignedTx::new(k.b1.address(), 0, 10, TxPayload::Transfer { to: k.b2.address(), amount: 1 }).sign(&k.b1);
    assert_eq!(n.post(&tx).0, 200);
    n.mine().unwrap();
    let (status, body) = n.post(&tx);
    assert_eq!(status, 422);
    assert_eq!(body["accepted"], false);
    assert_eq!(body["code"], "BadNonce");
    assert_eq!(body["tx_hash"], json!(tx.hash()));

    let mut forged = UnsignedTx::new(k.b1.address(), 1, 10, TxPayload::Transfer { to: k.b2.address(), amount: 1 }).sign(&k.b1);
    forged.fee = 11;
    assert_eq!(n.post(&forged).1["code"], "BadSignature");

    let cheap = UnsignedTx::new(k.b1.address(), 1, 9, TxPayload::Transfer { to: k.b2.address(), amount: 1 }).sign(&k.b1);
    assert_eq!(n.post(&cheap).1["code"], "FeeTooLow");

    let broke = UnsignedTx::new(k.owner.address(), 0, 10, TxPayload::Transfer { to: k.b2.address(), amount: 10_000 }).sign(&k.owner);
    assert_eq!(n.post(&broke).1["code"], "InsufficientFunds");
}

#[test]
fn reverted_bid_visible_in_receipt() {
    let n = manual();
    let k = keys();
    n.send(&k.agent, TxPayload::AddCar { owner: k.owner.address(), initial_price: 10_000, age_years: 0, miles: 0 });
    n.send(&k.agent, TxPayload::StartAuction { car_id: 1, duration_seconds: 100 });
    n.mine().unwrap();
    let low = n.send(&k.b1, TxPayload::Bid { auction_id: 1, amount: 5000 });
    let (_, pending) = n.get(&format!("/tx/{low}"));
    assert_eq!(pending["status"], "pending");
    n.mine().unwrap();
    let (status, r) = n.get(&format!("/tx/{low}"));
    assert_eq!(status, 200);
    assert_eq!(r["status"], "reverted");
    assert_eq!(r["revert"]["code"], "BelowReserve");
    assert_eq!(r["block_height"], 2);
    let (status, _) = n.get(&format!("/tx/{}", Hash32([7; 32])));
    assert_eq!(status, 404);
}

#[test]
fn not_found_and_bad_ids() {
    let n = manual();
    let (status, body) = n.get("/auctions/999");
    assert_eq!(status, 404);
    assert_eq!(body["code"], "UnknownAuction");
    assert_eq!(n.get("/cars/3").0, 404);
    assert_eq!(n.get("/cars/3/price").0, 404);
    assert_eq!(n.get("/cars/abc").1["code"], "BadId");
    assert_eq!(n.get("/accounts/xyz").0, 400);
    assert_eq!(n.get("/tx/00").0, 400);
    let (status, acct) = n.get(&format!("/accounts/{}", Address([9; 20])));
    assert_eq!(status, 200);
    assert_eq!(acct["balance"], 0);
}

#[test]
fn pending_nonce_tracks_mempool() {
    let n = manual();
    let k = keys();
    for _ in 0..3 {
        n.send(&k.b1, TxPayload::Transfer { to: k.b2.address(), amount: 1 });
    }
    let (_, a) = n.get(&format!("/accounts/{}", k.b1.address()));
    assert_eq!((a["nonce"].as_u64(), a["pending_nonce"].as_u64()), (Some(0), Some(3)));
    n.mine().unwrap();
    let (_, a) = n.get(&format!("/accounts/{}", k.b1.address()));
    assert_eq!((a["nonce"].as_u64(), a["pending_nonce"].as_u64()), (Some(3), Some(3)));
}

#[test]
fn event_feed_contract() {
    let n = manual();
    run_auction_flow(&n);
    let (_, all) = n.get("/events?since=0");
    let events = all["events"].as_array().unwrap();
    let kinds: Vec<&str> = events.iter().map(|e| e["kind"].as_str().unwrap()).collect();
    assert_eq!(
        kinds,
        ["CarAdded", "AccidentRecorded", "AuctionStarted", "BidPlaced", "BidPlaced", "AuctionEnded", "OwnerChanged"]
    );
    let seqs: Vec<u64> = events.iter().map(|e| e["seq"].as_u64().unwrap()).collect();
    assert_eq!(seqs, (1..=7).collect::<Vec<_>>());
    assert_eq!(events[3]["payload"]["amount"], 6000);
    assert_eq!(events[4]["payload"]["amount"], 6500);
    assert_eq!(all["next"], 7);

    // paginated polls concatenate to the single full poll
    let mut paged = Vec::new();
    let mut cursor = 0;
    loop {
        let (_, page) = n.get(&format!("/events?since={cursor}&limit=2"));
        let batch = page["events"].as_array().unwrap().clone();
        if batch.is_empty() {
            break;
        }
        cursor = page["next"].as_u64().unwrap();
        paged.extend(batch);
    }
    assert_eq!(&paged, events);

    let started = Instant::now();
    let (_, empty) = n.get("/events?since=7&timeout_ms=300");
    assert!(empty["events"].as_array().unwrap().is_empty());
    assert_eq!(empty["next"], 7);
    assert!(started.elapsed() >= Duration::from_millis(250));

    assert_eq!(n.get("/events?since=abc").1["code"], "BadCursor");
    assert_eq!(n.get("/events?since=8").0, 400);
    assert_eq!(n.get("/events?since=-1").0, 400);
}

#[test]
fn long_poll_wakes_on_new_block() {
    let n = manual();
    let k = keys();
    let handle = n.node.handle();
    n.send(&k.agent, TxPayload::AddCar { owner: k.owner.address(), initial_price: 1, age_years: 0, miles: 0 });
    let miner = n.rt.spawn(async move {
        tokio::time::sleep(Duration::from_millis(200)).await;
        handle.mine_now().await
    });
    let started = Instant::now();
    let (_, got) = n.get("/events?since=0&timeout_ms=10000");
    assert!(started.elapsed() < Duration::from_secs(5));
    assert_eq!(got["events"][0]["kind"], "CarAdded");
    assert!(n.rt.block_on(miner).unwrap().is_some());
}

#[test]
fn concurrent_pollers_see_gapless_feed() {
    let n = manual();
    let k = keys();
    let base = n.base.clone();
    let pollers: Vec<_> = (0..4)
        .map(|_| {
            let base = base.clone();
            std::thread::spawn(move || {
                let http: ureq::Agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();
                let mut seen = Vec::new();
                let mut cursor = 0;
                while seen.len() < 12 {
                    let mut r = http
                        .get(format!("{base}/events?since={cursor}&limit=3&timeout_ms=5000"))
                        .call()
                        .unwrap();
                    let v: Value = r.body_mut().read_json().unwrap();
                    for e in v["events"].as_array().unwrap() {
                        seen.push(e["seq"].as_u64().unwrap());
                    }
                    cursor = v["next"].as_u64().unwrap();
                }
                seen
            })
        })
        .collect();
    for i in 0..12 {
        n.send(&k.agent, TxPayload::AddCar { owner: k.owner.address(), initial_price: 100 + i, age_years: 0, miles: 0 });
        if i % 3 == 2 {
            n.mine().unwrap();
        }
    }
    for p in pollers {
        assert_eq!(p.join().unwrap(), (1..=12).collect::<Vec<_>>());
    }
}

#[test]
fn restart_replays_block_log() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("blocks.jsonl");
    let (head, events) = {
        let n = start(Some(path.clone()), Duration::from_secs(3600));
        run_auction_flow(&n);
        let out = (n.get("/chain/head").1, n.get("/events").1);
        n.node.shutdown();
        out
    };
    let n = start(Some(path.clone()), Duration::from_secs(3600));
    assert_eq!(n.get("/chain/head").1, head);
    assert_eq!(n.get("/events").1, events);
    assert_eq!(owner_of(&n, 1), keys().b2.address());
    n.node.shutdown();

    // a torn final record is dropped on reopen
    let mut text = std::fs::read_to_string(&path).unwrap();
    let lines = text.lines().count();
    text.push_str("{\"parent_hash\":");
    std::fs::write(&path, text).unwrap();
    let n = start(Some(path.clone()), Duration::from_secs(3600));
    assert_eq!(n.get("/chain/head").1, head);
    n.node.shutdown();
    assert_eq!(std::fs::read_to_string(&path).unwrap().lines().count(), lines);
}

#[test]
fn auto_mines_on_interval() {
    let n = start(None, Duration::from_millis(100));
    let k = keys();
    let h = n.send(&k.b1, TxPayload::Transfer { to: k.b2.address(), amount: 3 });
    let deadline = Instant::now() + Duration::from_secs(10);
    loop {
        let (_, r) = n.get(&format!("/tx/{h}"));
        if r["status"] == "applied" {
            break;
        }
        assert!(Instant::now() < deadline, "not mined: {r}");
        std::thread::sleep(Duration::from_millis(50));
    }
    std::thread::sleep(Duration::from_millis(300));
    assert_eq!(n.get("/chain/head").1["height"], 1, "no empty blocks");
}

#[test]
fn cors_headers_present() {
    let n = manual();
    let r = n
        .http
        .get(format!("{}/chain/head", n.base))
        .header("origin", "http://localhost:5173")
        .call()
        .unwrap();
    assert_eq!(r.headers().get("access-control-allow-origin").unwrap(), "*");
}
