//! Branching processes in a varying environment with generation-dependent
//! immigration.

pub mod analysis;
pub mod environment;
pub mod error;
pub mod exact;
pub mod laws;
pub mod limitlab;
pub mod montecarlo;
pub mod pgf;
pub mod special;

pub use environment::{build_model, preset, BpveiModel, GenerationSchedule, LawTable, Role, Stage};
pub use error::{Error, Result};
pub use laws::{Law, LawInstance, LawSpec, ParamSchedule};
