//! Command-line frontend: runs analyses over program files and reports
//! points-to facts, assertion outcomes, call graphs and metrics.

pub mod app;
pub mod mode;
pub mod run;
