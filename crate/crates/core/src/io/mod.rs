//! On-disk formats: versioned JSON documents for every pipeline artifact,
//! binary PLY point clouds, DOT graph export and the TOML run config.

pub mod config;
pub mod docs;
pub mod dot;
pub mod layout;
pub mod ply;

pub use config::RunConfig;
pub use docs::{read_doc, write_doc, Document, FORMAT_VERSION};
pub use dot::export_dot;
pub use ply::{read_ply, read_ply_file, write_ply, write_ply_file};
