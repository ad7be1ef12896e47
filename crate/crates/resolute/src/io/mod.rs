//! Configuration files and CSV/JSON output.

mod config;
mod table;

pub use config::{
    linspace, ChirpSection, Config, NoiseSection, RayleighKind, RunSection, SensorSection, SequenceSection,
    SimKind, SweepSection, ToneSection, SECTIONS,
};
pub use table::{
    read_table, read_trace, report_json, write_atomic, write_report, write_table, write_trace, Format, Table,
    SCHEMA_VERSION,
};
