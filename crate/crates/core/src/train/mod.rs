//! Patient split, training loop and hyperparameter search.

mod data;
mod grid;
mod smote;
mod split;
mod trainer;

pub use data::*;
pub use grid::*;
pub use smote::*;
pub use split::*;
pub use trainer::*;
