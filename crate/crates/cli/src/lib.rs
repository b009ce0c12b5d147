//! Command-line harness around the engines: model references shared by
//! every subcommand, seeded experiment batches with medians, and CSV
//! reporting with a fixed schema.

pub mod harness;
pub mod modelref;
