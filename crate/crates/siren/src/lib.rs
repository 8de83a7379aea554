//! File formats, the parallel comparison driver and the `siren` command
//! line on top of `siren-core`.

pub mod checkpoint;
pub mod cli;
pub mod compare;
pub mod config;
pub mod gbn;
pub mod hexfloat;
pub mod tsv;

/// The bundled 12-node network used by the comparison experiment.
pub const DESK_GBN: &str = include_str!("../data/desk12.gbn");
