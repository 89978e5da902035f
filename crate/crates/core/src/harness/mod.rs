//! Instance generation and I/O, benchmark measurements and the suite runner.

pub mod generate;
pub mod io;
pub mod measure;
pub mod suite;

pub use generate::{generate, GeneratorSpec};
pub use io::{energy_from_json, energy_to_json, read_instance, write_instance, InstanceFile};
pub use measure::{aggregate, energy_change, measure, BenchRecord, MethodSummary};
pub use suite::{run_suite, write_report, write_trace_csv, InstanceEntry, InstanceSource, Manifest, MethodEntry, SuiteReport};

pub use crate::inference::precision_recall;
