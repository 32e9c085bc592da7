//! Single-node HTTP service over a carbid chain.
//!
//! All mutations (admission, mining) go through one writer thread; HTTP
//! handlers read immutable snapshots. Blocks are appended to a JSON-lines
//! log and replayed on startup.

mod api;
mod blocklog;
mod clock;
mod service;

pub use api::{router, serve};
pub use blocklog::{BlockLog, LogError};
pub use clock::{Clock, ManualClock, SystemClock};
pub use service::{
    EventRecord, HeadInfo, Node, NodeConfig, NodeError, NodeHandle, Snapshot, SubmitError,
    TxLookup,
};
