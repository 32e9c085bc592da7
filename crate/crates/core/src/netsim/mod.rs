//! Seeded simulation of the peer-to-peer network and the double-spend race.

pub mod config;
pub mod double_spend;
pub mod sim;
pub mod workload;

pub use config::{
    default_sim_genesis, sim_agent, sim_user, Horizon, LatencyModel, MiningBackend, SimConfig,
    SimError,
};
pub use double_spend::{double_spend_experiment, DoubleSpendResult};
pub use sim::{
    convergence_experiment, run_simulation, ConvergenceReport, NodeReport, Role, SimReport,
    TxLatency,
};
pub use workload::{generate_workload, ScheduledTx, WorkloadSpec};

/// A `run-sim` scenario file: a [`SimConfig`] plus an optional generated workload.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Scenario {
    #[serde(flatten)]
    pub config: SimConfig,
    #[serde(default)]
    pub workload: Option<WorkloadSpec>,
}

impl Scenario {
    pub fn run(&self) -> Result<SimReport, SimError> {
        let workload = self
            .workload
            .map(|spec| generate_workload(&spec, self.config.num_honest, self.config.seed))
            .unwrap_or_default();
        run_simulation(&self.config, &workload)
    }
}
