//! Semantic importance maps, the oracles producing them and the map
//! distortion measures the reward is built from.

mod map;
mod oracle;

pub use map::{instances_in, map_diff, mask_ratio, InstanceLayout, SemanticMap, Semantics};
pub use oracle::{
    write_semantics, FileOracle, FileOracleMode, OracleQuery, ProxyOracle, SemanticOracle, View,
};

/// Importance level at or above which a pixel counts as masked.
pub const MASK_THRESHOLD: f64 = 0.5;
