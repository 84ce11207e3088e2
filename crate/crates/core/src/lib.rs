//! Manipulation-action classification from grasp and motion-constraint
//! annotations: ingestion, encoding, classifiers, one-vs-one assembly and
//! the experiment grid.

pub mod bench;
pub mod cli;
pub mod domain;
pub mod encode;
pub mod ingest;
pub mod learn;
pub mod matrix;
pub mod ovo;
pub mod report;
