//! End-to-end models and evaluation.

pub mod lp;
pub mod nc;
pub mod report;
