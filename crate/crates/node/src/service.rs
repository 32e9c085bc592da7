use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;
use std::sync::mpsc::{self, RecvTimeoutError};
use std::sync::{Arc, Mutex, RwLock};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use carbid_core::state::BlockContext;
use carbid_core::{
    mine_block, Address, Block, Chain, ChainError, Event, GenesisConfig, Hash32, Mempool,
    Receipt, Transaction, TxError, WorldState,
};
use serde::Serialize;
use tokio::sync::{oneshot, watch};

use crate::blocklog::{BlockLog, LogError};
use crate::clock::Clock;

#[derive(Debug, Clone)]
pub struct NodeConfig {
    pub genesis: GenesisConfig,
    pub block_log: Option<PathBuf>,
    /// Wall-clock period between mining attempts.
    pub block_interval: Duration,
    pub miner: Address,
    pub max_txs_per_block: usize,
}

impl NodeConfig {
    /// Mines every `block_interval_seconds` from genesis, rewarding the agent.
    pub fn new(genesis: GenesisConfig) -> Self {
        NodeConfig {
            block_log: None,
            block_interval: Duration::from_secs(genesis.block_interval_seconds.max(1)),
            miner: genesis.agent,
            max_txs_per_block: 500,
            genesis,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum NodeError {
    #[error(transparent)]
    Log(#[from] LogError),
    #[error("replaying block {index} from log: {source}")]
    Replay {
        index: usize,
        #[source]
        source: ChainError,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SubmitError {
    #[error(transparent)]
    Rejected(#[from] TxError),
    #[error("node is shutting down")]
    Stopped,
}

/// One contract event on the canonical chain, numbered from 1 without gaps.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EventRecord {
    pub seq: u64,
    pub block_height: u64,
    pub tx_hash: Hash32,
    #[serde(flatten)]
    pub event: Event,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct HeadInfo {
    pub height: u64,
    pub hash: Hash32,
    pub state_root: Hash32,
    pub timestamp: u64,
}

/// Immutable view published after every state change.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub head: HeadInfo,
    pub state: Arc<WorldState>,
    /// Next usable nonce per sender with transactions in the mempool.
    pub pending_nonces: BTreeMap<Address, u64>,
    pub pending: Arc<Vec<Hash32>>,
}

impl Snapshot {
    pub fn pending_nonce(&self, who: &Address) -> u64 {
        self.pending_nonces
            .get(who)
            .copied()
            .unwrap_or_else(|| self.state.nonce(who))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TxLookup {
    Pending,
    Included(Receipt),
}

#[derive(Default)]
struct Logs {
    receipts: HashMap<Hash32, Receipt>,
    events: Vec<EventRecord>,
}

struct Shared {
    logs: RwLock<Logs>,
    snapshot: watch::Sender<Arc<Snapshot>>,
}

enum Command {
    Submit(Transaction, oneshot::Sender<Result<Hash32, TxError>>),
    MineNow(oneshot::Sender<Option<Hash32>>),
    Shutdown,
}

/// Cheap, cloneable access to a running node.
#[derive(Clone)]
pub struct NodeHandle {
    commands: mpsc::Sender<Command>,
    shared: Arc<Shared>,
}

/// Owns the writer thread; dropping it stops the node.
pub struct Node {
    handle: NodeHandle,
    thread: Mutex<Option<JoinHandle<()>>>,
}

impl Node {
    pub fn start(config: NodeConfig, clock: Arc<dyn Clock>) -> Result<Node, NodeError> {
        let mut chain = Chain::new(config.genesis.clone());
        let log = match &config.block_log {
            Some(path) => {
                let (log, blocks) = BlockLog::open(path)?;
                for (index, b) in blocks.into_iter().enumerate() {
                    chain
                        .insert(b)
                        .map_err(|source| NodeError::Replay { index, source })?;
                }
                Some(log)
            }
            None => None,
        };

        let mut logs = Logs::default();
        for entry in chain.canonical() {
            index_receipts(&mut logs, &entry.receipts);
        }
        let pending = entry_state(&chain);
        let (snapshot, _) = watch::channel(Arc::new(make_snapshot(&chain, &Mempool::new(), &pending)));
        let shared = Arc::new(Shared {
            logs: RwLock::new(logs),
            snapshot,
        });

        let (tx, rx) = mpsc::channel();
        let writer = Writer {
            chain,
            mempool: Mempool::new(),
            pending,
            config,
            clock,
            log,
            shared: shared.clone(),
        };
        let thread = std::thread::Builder::new()
            .name("carbid-writer".into())
            .spawn(move || writer.run(rx))
            .expect("spawn writer thread");
        Ok(Node {
            handle: NodeHandle {
                commands: tx,
                shared,
            },
            thread: Mutex::new(Some(thread)),
        })
    }

    pub fn handle(&self) -> NodeHandle {
        self.handle.clone()
    }

    /// Stops the writer thread after it finishes the current command.
    pub fn shutdown(&self) {
        let _ = self.handle.commands.send(Command::Shutdown);
        if let Some(t) = self.thread.lock().unwrap().take() {
            let _ = t.join();
        }
    }
}

impl Drop for Node {
    fn drop(&mut self) {
        self.shutdown();
    }
}

impl NodeHandle {
    /// Admits `tx` to the mempool if it would apply after everything already
    /// pending. Contract reverts are admitted; they surface in the receipt.
    pub async fn submit(&self, tx: Transaction) -> Result<Hash32, SubmitError> {
        let (reply, rx) = oneshot::channel();
        self.commands
            .send(Command::Submit(tx, reply))
            .map_err(|_| SubmitError::Stopped)?;
        Ok(rx.await.map_err(|_| SubmitError::Stopped)??)
    }

    /// Mines a block now if anything is pending. Returns its hash.
    pub async fn mine_now(&self) -> Option<Hash32> {
        let (reply, rx) = oneshot::channel();
        self.commands.send(Command::MineNow(reply)).ok()?;
        rx.await.ok().flatten()
    }

    pub fn snapshot(&self) -> Arc<Snapshot> {
        self.shared.snapshot.borrow().clone()
    }

    pub fn lookup_tx(&self, hash: &Hash32) -> Option<TxLookup> {
        if let Some(r) = self.shared.logs.read().unwrap().receipts.get(hash) {
            return Some(TxLookup::Included(r.clone()));
        }
        self.snapshot()
            .pending
            .contains(hash)
            .then_some(TxLookup::Pending)
    }

    /// Events with `seq > since`, at most `limit` of them.
    pub fn events_since(&self, since: u64, limit: usize) -> Vec<EventRecord> {
        let logs = self.shared.logs.read().unwrap();
        let start = (since as usize).min(logs.events.len());
        logs.events[start..].iter().take(limit).cloned().collect()
    }

    pub fn event_count(&self) -> u64 {
        self.shared.logs.read().unwrap().events.len() as u64
    }

    /// Like [`events_since`](Self::events_since), but waits up to `timeout`
    /// for the first new event when there is none yet.
    pub async fn wait_events(&self, since: u64, limit: usize, timeout: Duration) -> Vec<EventRecord> {
        let deadline = tokio::time::Instant::now() + timeout;
        let mut rx = self.shared.snapshot.subscribe();
        loop {
            let events = self.events_since(since, limit);
            if !events.is_empty() {
                return events;
            }
            match tokio::time::timeout_at(deadline, rx.changed()).await {
                Ok(Ok(())) => continue,
                _ => return Vec::new(),
            }
        }
    }
}

fn index_receipts(logs: &mut Logs, receipts: &[Receipt]) {
    for r in receipts {
        for ev in &r.events {
            let seq = logs.events.len() as u64 + 1;
            logs.events.push(EventRecord {
                seq,
                block_height: r.block_height,
                tx_hash: r.tx_hash,
                event: ev.clone(),
            });
        }
        logs.receipts.insert(r.tx_hash, r.clone());
    }
}

fn entry_state(chain: &Chain) -> WorldState {
    chain.head().state.as_ref().clone()
}

fn make_snapshot(chain: &Chain, mempool: &Mempool, pending: &WorldState) -> Snapshot {
    let head = chain.head();
    let pending_nonces = mempool
        .iter()
        .map(|tx| (tx.sender, pending.nonce(&tx.sender)))
        .collect();
    Snapshot {
        head: HeadInfo {
            height: head.block.height(),
            hash: head.hash,
            state_root: head.state.state_root(),
            timestamp: head.block.timestamp(),
        },
        state: head.state.clone(),
        pending_nonces,
        pending: Arc::new(mempool.iter().map(Transaction::hash).collect()),
    }
}

struct Writer {
    chain: Chain,
    mempool: Mempool,
    /// Head state with every mempool transaction applied, for admission.
    pending: WorldState,
    config: NodeConfig,
    clock: Arc<dyn Clock>,
    log: Option<BlockLog>,
    shared: Arc<Shared>,
}

impl Writer {
    fn run(mut self, rx: mpsc::Receiver<Command>) {
        let mut next_tick = Instant::now() + self.config.block_interval;
        loop {
            let wait = next_tick.saturating_duration_since(Instant::now());
            match rx.recv_timeout(wait) {
                Ok(Command::Submit(tx, reply)) => {
                    let _ = reply.send(self.admit(tx));
                }
                Ok(Command::MineNow(reply)) => {
                    let _ = reply.send(self.mine());
                }
                Ok(Command::Shutdown) | Err(RecvTimeoutError::Disconnected) => return,
                Err(RecvTimeoutError::Timeout) => {
                    self.mine();
                    next_tick = Instant::now() + self.config.block_interval;
                }
            }
        }
    }

    fn next_context(&self) -> BlockContext {
        let head = &self.chain.head().block;
        BlockContext {
            height: head.height() + 1,
            timestamp: self.clock.now().max(head.timestamp()),
            miner: self.config.miner,
        }
    }

    fn admit(&mut self, tx: Transaction) -> Result<Hash32, TxError> {
        let hash = tx.hash();
        if self.mempool.contains(&hash) {
            return Ok(hash);
        }
        let ctx = self.next_context();
        self.pending.apply_transaction(&tx, &ctx)?;
        self.mempool.insert(tx);
        self.publish();
        Ok(hash)
    }

    fn mine(&mut self) -> Option<Hash32> {
        if self.mempool.is_empty() {
            return None;
        }
        let ctx = self.next_context();
        let head = self.chain.head();
        let txs = self
            .mempool
            .select(&head.state, &ctx, self.config.max_txs_per_block);
        if txs.is_empty() {
            self.rebuild_pending();
            self.publish();
            return None;
        }
        let block = mine_block(
            &head.block.header,
            txs,
            self.config.genesis.target,
            ctx.timestamp,
            ctx.miner,
        )
        .expect("genesis target is minable");
        self.commit(block)
    }

    fn commit(&mut self, block: Block) -> Option<Hash32> {
        if let Some(log) = &mut self.log {
            // A block we cannot persist is not applied; its transactions stay pending.
            if let Err(e) = log.append(&block) {
                eprintln!("carbid-node: {e}");
                return None;
            }
        }
        let out = self.chain.insert(block).expect("self-mined block is valid");
        let receipts = self.chain.head().receipts.clone();
        index_receipts(&mut self.shared.logs.write().unwrap(), &receipts);
        self.rebuild_pending();
        self.publish();
        Some(out.hash)
    }

    /// Re-admits leftover mempool transactions on top of the new head,
    /// dropping any that no longer apply.
    fn rebuild_pending(&mut self) {
        let ctx = self.next_context();
        let mut state = entry_state(&self.chain);
        let mut kept = Mempool::new();
        for tx in self.mempool.iter() {
            if state.apply_transaction(tx, &ctx).is_ok() {
                kept.insert(tx.clone());
            }
        }
        self.mempool = kept;
        self.pending = state;
    }

    fn publish(&self) {
        let snap = make_snapshot(&self.chain, &self.mempool, &self.pending);
        self.shared.snapshot.send_replace(Arc::new(snap));
    }
}
