pub mod analysis;
pub mod cli;
pub mod dependency;
pub mod dsl;
pub mod finiteness;
pub mod linalg;
pub mod normalizer;
pub mod oracle;
pub mod pipeline;
pub mod recurrence;
pub mod reduction;
pub mod solver;
pub mod symbolic;
