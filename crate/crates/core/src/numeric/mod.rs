//! Small numerical kernels shared by the analysis modules.

pub mod ode;
pub mod quad;
pub mod roots;
