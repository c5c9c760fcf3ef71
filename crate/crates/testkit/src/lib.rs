//! Reference implementations written independently of the library code
//! paths, plus hand-tallied fixtures. Shared by the unit-level oracle tests
//! and the acceptance suite.

pub mod cnn;
pub mod metrics;
pub mod rules;
pub mod triggers;
pub mod ttest;
