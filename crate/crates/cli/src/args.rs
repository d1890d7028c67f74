use std::path::PathBuf;

use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "or-graph-kit", version, about = "Operating-room scene graph pipeline")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Run configuration (TOML); required.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Take id under `paths.data_root`; defaults to `paths.take`.
    #[arg(long, global = true, value_name = "ID")]
    pub take: Option<String>,

    #[arg(long, global = true, default_value_t = 0, value_name = "N")]
    pub seed: u64,

    /// Output directory; nothing is written outside it.
    #[arg(long, global = true, default_value = "out", value_name = "DIR")]
    pub out: PathBuf,

    /// Worker threads for frame-level stages; defaults to the core count.
    #[arg(long, global = true, value_name = "N", value_parser = clap::value_parser!(u32).range(1..))]
    pub jobs: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Merge per-camera clouds into world-frame clouds.
    Fuse,
    /// Assign instance labels to fused points.
    Label,
    /// Build per-frame scene graphs from upstream scores and geometry.
    Predict,
    /// Associate human nodes across frames.
    Track,
    /// Score and assign clinical roles to tracks.
    Roles,
    /// Compare run outputs against ground truth.
    Eval,
    /// Generate a synthetic take with ground truth and upstream predictions.
    Synth,
    /// Write predicted graphs as Graphviz.
    ExportDot,
    /// fuse, label, predict, track, roles, eval and export-dot in order.
    RunAll,
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn definition_is_consistent() {
        Cli::command().debug_assert();
    }
}
