//! Multivalued maps on grids, Morse graphs and regions of attraction.

mod analysis;
mod graph;
mod map;
mod retract;

pub use analysis::{parse_cell_labels, CellAnalysis};
pub use graph::{
    regions_of_attraction, strongly_connected_components, Condensation, MorseDecomposition,
    MorseGraph, RoaLabel,
};
pub use map::{
    build_map, build_map_with_bounds, compose, containment_rate, estimate_cell_lipschitz,
    estimate_lipschitz, Enclosure, MapParams, MultivaluedMap,
};
pub use retract::{
    is_order_preserving, retract, retract_avoiding, BistableGraph, CellClass, NodeClass,
};
