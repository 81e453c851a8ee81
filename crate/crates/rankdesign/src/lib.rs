//! Strategic ranking: equilibria, welfare and policy design for step reward
//! functions over post-effort rank.

pub mod cli;
pub mod design;
pub mod equilibrium;
pub mod error;
pub mod groups;
pub mod multidim;
pub mod oracle;
pub mod policy;
pub mod primitives;
pub mod quadrature;
pub mod welfare;

pub use equilibrium::{solve, EquilibriumSchedule};
pub use error::{Error, Result};
pub use policy::{two_level, PolicySpec, RewardPolicy, TwoLevelPolicy};
pub use primitives::{FunctionSpec, PopulationSpec};
pub use welfare::WelfareReport;
