//! Model inputs: CCS one-hot sequences and the static domain vector.

mod ccs;
mod domain;
mod scores;
mod sequence;

pub use ccs::CcsMap;
pub use domain::*;
pub use scores::*;
pub use sequence::*;

/// Maps, rule sets and options shared by every featurized event.
#[derive(Debug, Clone)]
pub struct FeatureContext {
    pub ccs: CcsMap,
    pub charlson: CharlsonWeights,
    pub lace: LaceTables,
    pub hac: HacRules,
    pub spec: DomainFeatureSpec,
    pub lookback_days: i32,
}

impl FeatureContext {
    /// Bundled rule sets and the default domain spec.
    pub fn new(ccs: CcsMap) -> Self {
        FeatureContext {
            ccs,
            charlson: CharlsonWeights::default(),
            lace: LaceTables::default(),
            hac: HacRules::default(),
            spec: DomainFeatureSpec::default(),
            lookback_days: 365,
        }
    }
}
