//! Metrics and reports.

mod importance;
mod metrics;
mod report;
mod subgroups;

pub use importance::*;
pub use metrics::*;
pub use report::*;
pub use subgroups::*;
