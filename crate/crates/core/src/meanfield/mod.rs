//! The mean-field limit: the auxiliary limit ODE, the invariant density and
//! its self-consistent rate, the non-linear neuron, and Wasserstein
//! diagnostics.

pub mod density;
pub mod gamma;
pub mod limit;
pub mod particles;
pub mod path;
pub mod picard;
pub mod wasserstein;

pub use density::{solve_pstar, DensityTable};
pub use gamma::gamma_of_a;
pub use limit::{limit_ode, LimitOdeConfig};
pub use path::RatePath;
pub use wasserstein::w1_empirical;
