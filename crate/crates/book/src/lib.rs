//! The riskfuse guide. Each chapter under `book/src` is included here so its
//! snippets run as doc-tests.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/cohort.md")]
pub mod cohort {}
#[doc = include_str!("../../../book/src/features.md")]
pub mod features {}
#[doc = include_str!("../../../book/src/autodiff.md")]
pub mod autodiff {}
#[doc = include_str!("../../../book/src/model.md")]
pub mod model {}
#[doc = include_str!("../../../book/src/training.md")]
pub mod training {}
#[doc = include_str!("../../../book/src/calibration.md")]
pub mod calibration {}
#[doc = include_str!("../../../book/src/evaluation.md")]
pub mod evaluation {}
#[doc = include_str!("../../../book/src/baseline.md")]
pub mod baseline {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
#[doc = include_str!("../../../book/src/ablations.md")]
pub mod ablations {}
