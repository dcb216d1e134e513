//! Library side of the `sparse-mut` command line tool: measurement
//! ingestion, the end-to-end analysis pipeline and report emission.

pub mod ingest;
pub mod pipeline;
pub mod report;
