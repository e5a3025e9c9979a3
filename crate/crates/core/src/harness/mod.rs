//! Scenario configuration, seeded channels, sweep drivers and output.

pub mod channel;
pub mod config;
pub mod emit;
pub mod sweeps;

pub use channel::{generate_channel, generate_channel_for};
pub use config::{ChannelModel, ChannelSection, OutputFormat, ScenarioConfig};
pub use emit::{write_outputs, Cell, Table};
pub use sweeps::{
    bins_to_meters, channel_table, edge_center_ratio, run_allocate, run_alpha_sweep, run_capacity_surface,
    run_psl_sweep, AllocationRun, AlphaPoint, AlphaSweep, Baseline, BlendDirection, CapacitySurface, PslPoint,
    PslSweep, Scheme, SurfaceCell,
};
