//! Multilingual visual reasoning over image pairs.
//!
//! Four strategies ([`pipelines`]) turn a [`dataset::VisualReasoningExample`]
//! into a verdict through pluggable model backends ([`clients`]): direct
//! end-to-end prompting, translate-test, generated visual programs
//! ([`dsl`], [`interp`]) and caption-then-reason. [`eval`] scores the results
//! per language and renders reports.

pub mod cli;
pub mod clients;
pub mod dataset;
pub mod dsl;
pub mod eval;
pub mod interp;
pub mod pipelines;
pub mod template;
