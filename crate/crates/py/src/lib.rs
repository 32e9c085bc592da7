//! Python module `carbid`: keys, an in-process ledger, price estimation and
//! the network / double-spend simulators. Structured values cross the
//! boundary as plain dicts and lists.

use carbid_core::netsim::{self, Scenario};
use carbid_core::state::{BlockContext, WorldState};
use carbid_core::{
    estimate_price, mine_block, Address, Chain, GenesisConfig, Hash32, Keypair, Mempool,
    Transaction, TxPayload, UnsignedTx,
};
use pyo3::exceptions::{PyKeyError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::de::DeserializeOwned;
use serde::Serialize;

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

/// Accepts a dict/list or a JSON string.
fn from_py<T: DeserializeOwned>(obj: &Bound<'_, PyAny>) -> PyResult<T> {
    let text: String = match obj.extract::<String>() {
        Ok(s) => s,
        Err(_) => obj.py().import("json")?.call_method1("dumps", (obj,))?.extract()?,
    };
    serde_json::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn parse<T: std::str::FromStr>(s: &str, what: &str) -> PyResult<T>
where
    T::Err: std::fmt::Display,
{
    s.parse().map_err(|e| PyValueError::new_err(format!("bad {what} {s:?}: {e}")))
}

fn contract_err(e: carbid_core::ContractError) -> PyErr {
    PyKeyError::new_err(format!("{}: {e}", e.code()))
}

#[pyclass(name = "Keypair", frozen)]
struct PyKeypair(Keypair);

#[pymethods]
impl PyKeypair {
    #[staticmethod]
    fn generate() -> Self {
        PyKeypair(Keypair::generate(&mut rand::rng()))
    }

    /// Deterministic key derived from a label; for tests and demos only.
    #[staticmethod]
    fn from_label(label: &str) -> Self {
        PyKeypair(Keypair::from_label(label))
    }

    #[staticmethod]
    fn from_secret_hex(secret: &str) -> PyResult<Self> {
        Keypair::from_secret_hex(secret)
            .map(PyKeypair)
            .map_err(|e| PyValueError::new_err(e.to_string()))
    }

    #[getter]
    fn address(&self) -> String {
        self.0.address().to_string()
    }

    #[getter]
    fn public_key(&self) -> String {
        self.0.public_key().to_string()
    }

    #[getter]
    fn secret_key(&self) -> String {
        self.0
            .secret_bytes()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    /// Signs `{"kind": ..., "payload": {...}}` and returns the wire-format transaction.
    #[pyo3(signature = (payload, nonce, fee = carbid_core::state::DEFAULT_GAS_FEE))]
    fn sign<'py>(
        &self,
        py: Python<'py>,
        payload: &Bound<'py, PyAny>,
        nonce: u64,
        fee: u64,
    ) -> PyResult<Bound<'py, PyAny>> {
        let payload: TxPayload = from_py(payload)?;
        let tx = UnsignedTx::new(self.0.address(), nonce, fee, payload).sign(&self.0);
        to_py(py, &tx)
    }

    fn __repr__(&self) -> String {
        format!("Keypair(address='{}')", self.0.address())
    }
}

/// Hex of the bytes a transaction's signature covers.
#[pyfunction]
fn signing_bytes(tx: &Bound<'_, PyAny>) -> PyResult<String> {
    let tx: Transaction = from_py(tx)?;
    Ok(tx.signing_bytes().iter().map(|b| format!("{b:02x}")).collect())
}

#[pyfunction]
fn verify_tx(tx: &Bound<'_, PyAny>) -> PyResult<bool> {
    Ok(from_py::<Transaction>(tx)?.verify())
}

#[pyfunction]
fn tx_hash(tx: &Bound<'_, PyAny>) -> PyResult<String> {
    Ok(from_py::<Transaction>(tx)?.hash().to_string())
}

#[pyfunction]
#[pyo3(signature = (initial_price, age_years = 0, miles = 0, accident_total = 0, trade_times = 0))]
fn calculate_price(
    initial_price: u64,
    age_years: u64,
    miles: u64,
    accident_total: u128,
    trade_times: u64,
) -> u64 {
    estimate_price(initial_price, age_years, miles, accident_total, trade_times)
}

#[pyfunction]
#[pyo3(signature = (q, z, trials = 100_000, seed = 7))]
fn double_spend_experiment<'py>(
    py: Python<'py>,
    q: f64,
    z: u64,
    trials: u64,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let r = py
        .detach(|| netsim::double_spend_experiment(q, z, trials, seed))
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
    to_py(py, &r)
}

/// Runs a scenario (same shape as the `run-sim` file) and returns the report.
#[pyfunction]
fn run_simulation<'py>(py: Python<'py>, scenario: &Bound<'py, PyAny>) -> PyResult<Bound<'py, PyAny>> {
    let scenario: Scenario = from_py(scenario)?;
    let report = py
        .detach(|| scenario.run())
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
    to_py(py, &report)
}

/// A single-process chain with a mempool. `submit` checks admissibility
/// against head plus pending transactions; `mine` seals the pool into a block.
#[pyclass(name = "Ledger")]
struct PyLedger {
    chain: Chain,
    pool: Mempool,
    pending: WorldState,
}

impl PyLedger {
    fn next_ctx(&self, timestamp: Option<u64>, miner: Option<&str>) -> PyResult<BlockContext> {
        let head = &self.chain.head().block;
        let miner = match miner {
            Some(m) => parse::<Address>(m, "address")?,
            None => self.chain.genesis().agent,
        };
        Ok(BlockContext {
            height: head.height() + 1,
            timestamp: timestamp
                .unwrap_or(head.timestamp() + self.chain.genesis().block_interval_seconds),
            miner,
        })
    }

    fn rebuild_pending(&mut self) {
        let head = self.chain.head();
        let ctx = BlockContext {
            height: head.block.height() + 1,
            timestamp: head.block.timestamp(),
            miner: self.chain.genesis().agent,
        };
        self.pool.prune(&head.state);
        let mut pending = head.state.as_ref().clone();
        for tx in self.pool.iter() {
            let _ = pending.apply_transaction(tx, &ctx);
        }
        self.pending = pending;
    }
}

#[pymethods]
impl PyLedger {
    #[new]
    fn new(genesis: &Bound<'_, PyAny>) -> PyResult<Self> {
        let genesis: GenesisConfig = from_py(genesis)?;
        genesis.validate().map_err(|e| PyValueError::new_err(e.to_string()))?;
        let pending = genesis.state();
        Ok(PyLedger {
            chain: Chain::new(genesis),
            pool: Mempool::new(),
            pending,
        })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let genesis = GenesisConfig::load(path).map_err(|e| PyValueError::new_err(e.to_string()))?;
        let pending = genesis.state();
        Ok(PyLedger {
            chain: Chain::new(genesis),
            pool: Mempool::new(),
            pending,
        })
    }

    /// Queues a signed transaction and returns its hash. Raises `ValueError`
    /// with the rejection code if it is inadmissible.
    fn submit(&mut self, tx: &Bound<'_, PyAny>) -> PyResult<String> {
        let tx: Transaction = from_py(tx)?;
        let ctx = self.next_ctx(None, None)?;
        let mut scratch = self.pending.clone();
        scratch
            .apply_transaction(&tx, &ctx)
            .map_err(|e| PyValueError::new_err(format!("{}: {e}", e.code())))?;
        let hash = tx.hash();
        if self.pool.insert(tx) {
            self.pending = scratch;
        }
        Ok(hash.to_string())
    }

    #[getter]
    fn pending_count(&self) -> usize {
        self.pool.len()
    }

    /// Mines the pending pool into the next block; returns the new head.
    #[pyo3(signature = (timestamp = None, miner = None, max_txs = 500))]
    fn mine<'py>(
        &mut self,
        py: Python<'py>,
        timestamp: Option<u64>,
        miner: Option<&str>,
        max_txs: usize,
    ) -> PyResult<Bound<'py, PyAny>> {
        let ctx = self.next_ctx(timestamp, miner)?;
        let head = self.chain.head();
        let txs = self.pool.select(&head.state, &ctx, max_txs);
        let parent = head.block.header.clone();
        let target = self.chain.genesis().target;
        let block = py
            .detach(|| mine_block(&parent, txs, target, ctx.timestamp, ctx.miner))
            .map_err(|e| PyValueError::new_err(e.to_string()))?;
        self.chain
            .insert(block)
            .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
        self.rebuild_pending();
        self.head(py)
    }

    fn head<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        let h = self.chain.head();
        to_py(
            py,
            &serde_json::json!({
                "height": h.block.height(),
                "hash": h.hash,
                "state_root": h.state.state_root(),
                "timestamp": h.block.timestamp(),
                "transactions": h.block.transactions.len(),
            }),
        )
    }

    fn balance(&self, address: &str) -> PyResult<u64> {
        Ok(self.chain.head().state.balance(&parse(address, "address")?))
    }

    fn nonce(&self, address: &str) -> PyResult<u64> {
        Ok(self.chain.head().state.nonce(&parse(address, "address")?))
    }

    /// Next nonce for `address` counting queued transactions.
    fn pending_nonce(&self, address: &str) -> PyResult<u64> {
        Ok(self.pending.nonce(&parse(address, "address")?))
    }

    fn car<'py>(&self, py: Python<'py>, car_id: u64) -> PyResult<Bound<'py, PyAny>> {
        let state = &self.chain.head().state;
        let car = state.registry.get_car_info(car_id).map_err(contract_err)?;
        let obj = to_py(py, car)?;
        obj.set_item("tprice", car.estimated_price())?;
        Ok(obj)
    }

    fn price(&self, car_id: u64) -> PyResult<u64> {
        self.chain
            .head()
            .state
            .registry
            .calculate_price(car_id)
            .map_err(contract_err)
    }

    fn auction<'py>(&self, py: Python<'py>, auction_id: u64) -> PyResult<Bound<'py, PyAny>> {
        let h = self.chain.head();
        let view = h
            .state
            .query_auction(auction_id, h.block.timestamp())
            .map_err(contract_err)?;
        to_py(py, &view)
    }

    /// Receipt of a mined transaction on the canonical chain, or None.
    fn receipt<'py>(&self, py: Python<'py>, tx_hash: &str) -> PyResult<Option<Bound<'py, PyAny>>> {
        let want: Hash32 = parse(tx_hash, "hash")?;
        for entry in self.chain.canonical() {
            if let Some(r) = entry.receipts.iter().find(|r| r.tx_hash == want) {
                return Ok(Some(to_py(py, r)?));
            }
        }
        Ok(None)
    }

    /// Every event on the canonical chain, oldest first.
    fn events<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        let events: Vec<_> = self
            .chain
            .canonical()
            .iter()
            .flat_map(|e| e.receipts.iter().flat_map(|r| r.events.iter().cloned()))
            .collect();
        to_py(py, &events)
    }

    fn state_root(&self) -> String {
        self.chain.head().state.state_root().to_string()
    }

    /// Balances plus escrowed bids.
    fn total_value(&self) -> u128 {
        self.chain.head().state.total_value()
    }

    /// Genesis supply plus block rewards to date.
    fn expected_value(&self) -> u128 {
        let g = self.chain.genesis();
        g.supply() + g.block_reward as u128 * self.chain.head().block.height() as u128
    }
}

#[pymodule]
fn carbid(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyKeypair>()?;
    m.add_class::<PyLedger>()?;
    m.add_function(wrap_pyfunction!(calculate_price, m)?)?;
    m.add_function(wrap_pyfunction!(double_spend_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(run_simulation, m)?)?;
    m.add_function(wrap_pyfunction!(signing_bytes, m)?)?;
    m.add_function(wrap_pyfunction!(verify_tx, m)?)?;
    m.add_function(wrap_pyfunction!(tx_hash, m)?)?;
    Ok(())
}
