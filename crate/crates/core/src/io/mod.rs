//! File formats and run orchestration: layouts, CSV/JSON tables, binary
//! grids, subcommands and the manifests that make every run repeatable.

pub mod commands;
pub mod emit;
pub mod grid;
pub mod layout;
pub mod manifest;

pub use commands::{execute, Command};
pub use emit::{format_float, Table};
pub use grid::GridFile;
pub use layout::{parse_layout, LayoutFile};
pub use manifest::{rerun, run, RunManifest, MANIFEST_FILE};
