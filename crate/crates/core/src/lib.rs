//! Lightweight static analysis for packaged HTML5/JS applications.

pub mod ast;
pub mod jsvalue;
pub mod package;
pub mod span;
pub mod catalog;
pub mod dataflow;
pub mod rules;
pub mod report;
pub mod scan;
