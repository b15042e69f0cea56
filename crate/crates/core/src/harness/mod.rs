//! Campaign configuration, Monte Carlo trials, sweeps and table output.

mod campaign;
mod config;
pub mod synthetic;
mod tables;
mod trial;

pub use campaign::{
    aggregate, final_iteration, is_unimodal, optimal_power, read_records, run_campaign, write_records,
    CampaignResults, CellAggregate, CellFailure, OptimumRow,
};
pub use config::{CampaignConfig, DspConfig, ReceiverMode};
pub use tables::{emit_tables, Figure, Tables};
pub use trial::{cell_seed, link_seed, static_pilot_ls, TrialSetup, Transmitted};
