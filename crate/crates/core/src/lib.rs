//! Joint routing and bandwidth allocation for datacenter coflows.

pub mod baselines;
pub mod coflow;
pub mod corba;
pub mod lpcore;
pub mod netgraph;
pub mod optba;
pub mod sim;
pub mod tol;
pub mod verify;

pub use baselines::{mincct, mincct_variant, Variant};
pub use coflow::{random_coflow, Coflow, Flow, Schedule, ScheduledFlow};
pub use corba::{corba, corba_fast};
pub use netgraph::{fat_tree, LinkId, Network, NodeId, Path};
pub use optba::{optba_schedule, RoutingPlan};
pub use sim::{
    run_offline, run_online, Algorithm, MetricsRecord, OfflineConfig, OnlineConfig, SimError,
};
