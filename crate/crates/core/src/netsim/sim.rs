//! Discrete-event simulation of a complete-graph PoW network.
//!
//! Block production is a Poisson process with the configured mean interval;
//! each block's producer is drawn in proportion to hash share. Every message
//! crosses each link with an independent exponential delay. Honest nodes mine
//! on their fork-choice head and relay every new block and transaction to all
//! peers on first receipt. The optional attacker mines a private branch and
//! publishes it only once it is strictly longer than the public chain.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, HashMap, HashSet};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{sim_node_address, Horizon, SimConfig, SimError};
use super::workload::ScheduledTx;
use crate::block::{mine_block, Block};
use crate::chain::{Chain, ChainError};
use crate::crypto::Address;
use crate::hash::Hash32;
use crate::mempool::Mempool;
use crate::state::BlockContext;
use crate::tx::Transaction;

const MICROS: f64 = 1_000_000.0;
const MICROS_PER_SECOND: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Honest,
    Attacker,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeReport {
    pub node: usize,
    pub role: Role,
    pub hash_share: f64,
    pub head_height: u64,
    pub head_hash: Hash32,
    pub state_root: Hash32,
    pub reorgs: u64,
    pub max_reorg_depth: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TxLatency {
    pub tx_hash: Hash32,
    pub submitted_at: f64,
    /// Seconds from submission to the creation of the including block on the
    /// reference node's final chain.
    pub inclusion_latency: Option<f64>,
    /// Seconds until that block is buried under `confirmations` more blocks.
    pub confirmation_latency: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub seed: u64,
    pub blocks_mined: u64,
    pub end_time: f64,
    pub nodes: Vec<NodeReport>,
    /// Whether every honest node ends on the same head.
    pub heads_equal: bool,
    /// Whether every honest node ends with the same state root.
    pub state_roots_equal: bool,
    pub max_reorg_depth: u64,
    pub reorg_depth_histogram: BTreeMap<u64, u64>,
    /// Seconds from the last mined block until the last honest head change.
    pub time_to_agreement: f64,
    pub messages_delivered: u64,
    pub attacker_releases: u64,
    pub tx_latencies: Vec<TxLatency>,
    pub event_log_hash: Hash32,
}

impl SimReport {
    /// Long-format CSV: `series,key,value` rows for reorg depths and tx latencies.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("series,key,value\n");
        for (depth, count) in &self.reorg_depth_histogram {
            out.push_str(&format!("reorg_depth,{depth},{count}\n"));
        }
        for l in &self.tx_latencies {
            if let Some(v) = l.inclusion_latency {
                out.push_str(&format!("inclusion_latency,{},{v}\n", l.tx_hash));
            }
            if let Some(v) = l.confirmation_latency {
                out.push_str(&format!("confirmation_latency,{},{v}\n", l.tx_hash));
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
enum Message {
    Block(Arc<Block>),
    Tx(Arc<Transaction>),
}

#[derive(Debug)]
enum SimEvent {
    Mine,
    Submit(usize, Arc<Transaction>),
    Deliver {
        from: usize,
        to: usize,
        msg: Message,
    },
}

struct Node {
    role: Role,
    share: f64,
    miner: Address,
    chain: Chain,
    mempool: Mempool,
    orphans: HashMap<Hash32, Vec<Arc<Block>>>,
    reorgs: u64,
    max_reorg: u64,
    // attacker-only bookkeeping
    private_tip: Hash32,
    /// Public height the private branch forked from.
    fork_height: u64,
    public_tip: Hash32,
    published: HashSet<Hash32>,
}

struct Sim<'a> {
    cfg: &'a SimConfig,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
    queue: BinaryHeap<Reverse<(u64, u64)>>,
    pending: HashMap<u64, SimEvent>,
    seq: u64,
    now: u64,
    latency: Option<Exp<f64>>,
    block_gap: Exp<f64>,
    blocks_mined: u64,
    last_mine: u64,
    last_head_change: u64,
    mined_at: HashMap<Hash32, u64>,
    histogram: BTreeMap<u64, u64>,
    delivered: u64,
    releases: u64,
    log: Sha256,
}

impl<'a> Sim<'a> {
    fn new(cfg: &'a SimConfig) -> Self {
        let genesis = cfg.genesis();
        let chain = Chain::new(genesis);
        let gh = chain.genesis_hash();
        let honest_share = (1.0 - cfg.attacker_share) / cfg.num_honest as f64;
        let nodes: Vec<Node> = (0..cfg.num_honest)
            .map(|i| (Role::Honest, honest_share, i))
            .chain(cfg.has_attacker().then_some((Role::Attacker, cfg.attacker_share, cfg.num_honest)))
            .map(|(role, share, i)| Node {
                role,
                share,
                miner: sim_node_address(i),
                chain: chain.clone(),
                mempool: Mempool::new(),
                orphans: HashMap::new(),
                reorgs: 0,
                max_reorg: 0,
                private_tip: gh,
                fork_height: 0,
                public_tip: gh,
                published: HashSet::from([gh]),
            })
            .collect();
        let latency = (cfg.latency.mean_seconds > 0.0)
            .then(|| Exp::new(1.0 / cfg.latency.mean_seconds).expect("validated"));
        Sim {
            cfg,
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            nodes,
            queue: BinaryHeap::new(),
            pending: HashMap::new(),
            seq: 0,
            now: 0,
            latency,
            block_gap: Exp::new(1.0 / cfg.mean_block_interval).expect("validated"),
            blocks_mined: 0,
            last_mine: 0,
            last_head_change: 0,
            mined_at: HashMap::new(),
            histogram: BTreeMap::new(),
            delivered: 0,
            releases: 0,
            log: Sha256::new(),
        }
    }

    fn schedule(&mut self, at: u64, ev: SimEvent) {
        self.seq += 1;
        self.queue.push(Reverse((at, self.seq)));
        self.pending.insert(self.seq, ev);
    }

    fn sample_delay(&mut self) -> u64 {
        match &self.latency {
            Some(d) => (d.sample(&mut self.rng) * MICROS) as u64,
            None => 0,
        }
    }

    fn schedule_next_block(&mut self) {
        let gap = (self.block_gap.sample(&mut self.rng) * MICROS) as u64;
        let at = self.now + gap.max(1);
        let more = match self.cfg.horizon {
            Horizon::Blocks(n) => self.blocks_mined < n,
            Horizon::Seconds(s) => (at as f64) < s * MICROS,
        };
        if more {
            self.schedule(at, SimEvent::Mine);
        }
    }

    fn broadcast(&mut self, from: usize, msg: Message, except: Option<usize>) {
        for to in 0..self.nodes.len() {
            if to == from || Some(to) == except {
                continue;
            }
            let at = self.now + self.sample_delay();
            self.schedule(
                at,
                SimEvent::Deliver {
                    from,
                    to,
                    msg: msg.clone(),
                },
            );
        }
    }

    fn record(&mut self, tag: u8, node: usize, hash: &Hash32) {
        self.log.update(self.now.to_be_bytes());
        self.log.update([tag]);
        self.log.update((node as u64).to_be_bytes());
        self.log.update(hash.0);
    }

    fn pick_producer(&mut self) -> usize {
        let x: f64 = self.rng.random();
        let mut acc = 0.0;
        for (i, n) in self.nodes.iter().enumerate() {
            acc += n.share;
            if x < acc {
                return i;
            }
        }
        self.nodes.len() - 1
    }

    fn on_mine(&mut self) {
        let id = self.pick_producer();
        let target = self.nodes[id].chain.genesis().target;
        let node = &self.nodes[id];
        let parent_hash = match node.role {
            Role::Honest => node.chain.head_hash(),
            Role::Attacker => node.private_tip,
        };
        let parent = node.chain.get(&parent_hash).expect("known parent");
        let timestamp = (self.now / MICROS_PER_SECOND).max(parent.block.timestamp());
        let txs = match node.role {
            Role::Honest => {
                let ctx = BlockContext {
                    height: parent.block.height() + 1,
                    timestamp,
                    miner: node.miner,
                };
                node.mempool
                    .select(&parent.state, &ctx, self.cfg.max_txs_per_block)
            }
            Role::Attacker => Vec::new(),
        };
        let block = mine_block(&parent.block.header, txs, target, timestamp, node.miner)
            .expect("nonce search over u64 space");
        let hash = block.hash();
        self.blocks_mined += 1;
        self.last_mine = self.now;
        self.mined_at.insert(hash, self.now);
        self.record(0, id, &hash);

        let block = Arc::new(block);
        match self.nodes[id].role {
            Role::Honest => {
                self.accept_block(id, block.clone());
                self.broadcast(id, Message::Block(block), None);
            }
            Role::Attacker => {
                let n = &mut self.nodes[id];
                n.chain.insert((*block).clone()).expect("own block valid");
                n.private_tip = hash;
                self.maybe_release(id);
            }
        }
        self.schedule_next_block();
    }

    /// Publishes the private branch once it is strictly longer than the public
    /// chain and the public chain has buried the fork point under
    /// `confirmations` blocks (the merchant has accepted the payment).
    fn maybe_release(&mut self, id: usize) {
        let n = &self.nodes[id];
        let private_h = n.chain.get(&n.private_tip).unwrap().block.height();
        let public_h = n.chain.get(&n.public_tip).unwrap().block.height();
        if private_h <= public_h || public_h < n.fork_height + self.cfg.confirmations {
            return;
        }
        let mut branch = Vec::new();
        let mut cursor = n.private_tip;
        while !n.published.contains(&cursor) {
            let e = n.chain.get(&cursor).unwrap();
            branch.push(Arc::new(e.block.clone()));
            cursor = e.block.parent_hash();
        }
        branch.reverse();
        let n = &mut self.nodes[id];
        for b in &branch {
            n.published.insert(b.hash());
        }
        n.public_tip = n.private_tip;
        n.fork_height = private_h;
        if !branch.is_empty() {
            self.releases += 1;
        }
        for b in branch {
            self.record(3, id, &b.hash());
            self.broadcast(id, Message::Block(b), None);
        }
    }

    /// Inserts a block (and any orphans waiting on it). Returns whether it was new.
    fn accept_block(&mut self, id: usize, block: Arc<Block>) -> bool {
        let mut work = vec![block];
        let mut first = true;
        let mut any_new = false;
        while let Some(b) = work.pop() {
            let hash = b.hash();
            let node = &mut self.nodes[id];
            match node.chain.insert((*b).clone()) {
                Ok(out) => {
                    any_new |= first;
                    if out.head_changed && node.role == Role::Honest {
                        self.last_head_change = self.now;
                    }
                    if let Some(depth) = out.reorg_depth {
                        node.reorgs += 1;
                        node.max_reorg = node.max_reorg.max(depth);
                        if node.role == Role::Honest {
                            *self.histogram.entry(depth).or_insert(0) += 1;
                        }
                    }
                    if node.role == Role::Attacker {
                        node.published.insert(hash);
                        let tip = node.chain.get(&node.public_tip).unwrap();
                        if (b.height(), Reverse(hash)) > (tip.block.height(), Reverse(tip.hash)) {
                            node.public_tip = hash;
                        }
                    }
                    if let Some(children) = node.orphans.remove(&hash) {
                        work.extend(children);
                    }
                }
                Err(ChainError::UnknownParent(parent)) => {
                    let entry = node.orphans.entry(parent).or_default();
                    if !entry.iter().any(|o| o.hash() == hash) {
                        entry.push(b.clone());
                        any_new |= first;
                    }
                }
                Err(ChainError::Duplicate(_)) => {}
                Err(ChainError::Invalid(e)) => {
                    // Honest producers never emit invalid blocks.
                    panic!("invalid block in simulation: {e}");
                }
            }
            first = false;
        }
        if self.nodes[id].role == Role::Attacker {
            self.nodes[id].retarget_private_tip(self.cfg.attacker_give_up_lag);
        }
        any_new
    }

    fn on_deliver(&mut self, from: usize, to: usize, msg: Message) {
        self.delivered += 1;
        match msg {
            Message::Block(b) => {
                self.record(1, to, &b.hash());
                if self.accept_block(to, b.clone()) && self.nodes[to].role == Role::Honest {
                    self.broadcast(to, Message::Block(b), Some(from));
                }
            }
            Message::Tx(tx) => {
                self.record(2, to, &tx.hash());
                self.receive_tx(to, tx, Some(from));
            }
        }
    }

    fn receive_tx(&mut self, id: usize, tx: Arc<Transaction>, from: Option<usize>) {
        if self.nodes[id].mempool.insert((*tx).clone()) && self.nodes[id].role == Role::Honest {
            self.broadcast(id, Message::Tx(tx), from);
        }
    }

    fn run(mut self, workload: &[ScheduledTx]) -> SimReport {
        for s in workload {
            let node = s.node % self.nodes.len();
            self.schedule(
                s.at_seconds * MICROS_PER_SECOND,
                SimEvent::Submit(node, Arc::new(s.tx.clone())),
            );
        }
        self.schedule_next_block();

        while let Some(Reverse((at, seq))) = self.queue.pop() {
            self.now = at;
            match self.pending.remove(&seq).expect("scheduled event") {
                SimEvent::Mine => self.on_mine(),
                SimEvent::Submit(node, tx) => {
                    self.record(4, node, &tx.hash());
                    self.receive_tx(node, tx, None);
                }
                SimEvent::Deliver { from, to, msg } => self.on_deliver(from, to, msg),
            }
        }
        self.report(workload)
    }

    fn report(self, workload: &[ScheduledTx]) -> SimReport {
        let nodes: Vec<NodeReport> = self
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| {
                let head = n.chain.head();
                NodeReport {
                    node: i,
                    role: n.role,
                    hash_share: n.share,
                    head_height: head.block.height(),
                    head_hash: head.hash,
                    state_root: head.state.state_root(),
                    reorgs: n.reorgs,
                    max_reorg_depth: n.max_reorg,
                }
            })
            .collect();
        let honest: Vec<&NodeReport> = nodes.iter().filter(|n| n.role == Role::Honest).collect();
        let heads_equal = honest.windows(2).all(|w| w[0].head_hash == w[1].head_hash);
        let state_roots_equal = honest.windows(2).all(|w| w[0].state_root == w[1].state_root);
        let max_reorg_depth = self.histogram.keys().next_back().copied().unwrap_or(0);

        // Latencies measured against node 0's final canonical chain.
        let canonical = self.nodes[0].chain.canonical();
        let mut included: HashMap<Hash32, u64> = HashMap::new();
        for e in &canonical {
            for tx in &e.block.transactions {
                included.insert(tx.hash(), e.block.height());
            }
        }
        let z = self.cfg.confirmations;
        let tx_latencies = workload
            .iter()
            .map(|s| {
                let hash = s.tx.hash();
                let submitted = s.at_seconds as f64;
                let created = |h: u64| {
                    canonical
                        .get(h as usize)
                        .map(|e| self.mined_at[&e.hash] as f64 / MICROS - submitted)
                };
                let height = included.get(&hash).copied();
                TxLatency {
                    tx_hash: hash,
                    submitted_at: submitted,
                    inclusion_latency: height.and_then(created),
                    confirmation_latency: height.and_then(|h| created(h + z)),
                }
            })
            .collect();

        SimReport {
            seed: self.cfg.seed,
            blocks_mined: self.blocks_mined,
            end_time: self.now as f64 / MICROS,
            nodes,
            heads_equal,
            state_roots_equal,
            max_reorg_depth,
            reorg_depth_histogram: self.histogram,
            time_to_agreement: self.last_head_change.saturating_sub(self.last_mine) as f64 / MICROS,
            messages_delivered: self.delivered,
            attacker_releases: self.releases,
            tx_latencies,
            event_log_hash: Hash32(self.log.finalize().into()),
        }
    }
}

impl Node {
    /// Attacker: follow the public tip while holding no private lead, and
    /// abandon the private branch once the public chain is `lag` blocks ahead.
    fn retarget_private_tip(&mut self, lag: u64) {
        let private_h = self.chain.get(&self.private_tip).unwrap().block.height();
        let public_h = self.chain.get(&self.public_tip).unwrap().block.height();
        let no_private_lead = self.published.contains(&self.private_tip);
        if no_private_lead || public_h >= private_h + lag {
            self.private_tip = self.public_tip;
            self.fork_height = public_h;
        }
    }
}

/// Runs the network to its horizon, then drains all in-flight messages.
pub fn run_simulation(config: &SimConfig, workload: &[ScheduledTx]) -> Result<SimReport, SimError> {
    config.validate()?;
    Ok(Sim::new(config).run(workload))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub max_reorg_depth: u64,
    pub heads_equal: bool,
    pub state_roots_equal: bool,
    pub time_to_agreement: f64,
    pub report: SimReport,
}

/// All-honest run reporting whether the network agrees at quiescence.
pub fn convergence_experiment(
    config: &SimConfig,
    workload: &[ScheduledTx],
) -> Result<ConvergenceReport, SimError> {
    if config.has_attacker() {
        return Err(SimError::InvalidConfig(
            "convergence experiment requires an all-honest network".into(),
        ));
    }
    let report = run_simulation(config, workload)?;
    Ok(ConvergenceReport {
        max_reorg_depth: report.max_reorg_depth,
        heads_equal: report.heads_equal,
        state_roots_equal: report.state_roots_equal,
        time_to_agreement: report.time_to_agreement,
        report,
    })
}
