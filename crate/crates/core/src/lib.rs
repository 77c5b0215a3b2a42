//! Toolkit for no-signaling correlations ("boxes"): validation, Bell
//! functionals, exact local and no-signaling polytope geometry, quantum
//! two-qubit correlations, seeded simulation models and key-rate analysis.

pub mod boxes;
pub mod corr;
pub mod crypto;
pub mod error;
pub mod lp;
pub mod num;
pub mod polytope;
pub mod quantum;
pub mod rng;
pub mod sim;

pub use corr::{AnyBox, Correlation, ExactBox, FloatBox, Party, Scenario};
pub use error::{Error, Result};
pub use num::{Mode, Rational};
