//! Exact event-driven simulation of the finite network.

pub mod aux;
pub mod coupling;
pub mod extinction;
pub mod integrated;
pub mod io;
pub mod noise;
pub mod sim;
pub mod state;

pub use aux::{AuxParams, AuxPath, AuxVariant};
pub use coupling::{CouplingDiagnostics, SyncPair};
pub use extinction::{simulate_until_extinction, ExtinctionRun};
pub use integrated::residual_integrated_rate;
pub use noise::PoissonField;
pub use sim::{Backend, Simulator, Step};
pub use state::{SpikeEvent, SystemState};
