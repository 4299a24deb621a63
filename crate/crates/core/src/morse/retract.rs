//! Collapse of a Morse graph onto the success / failure / undecided graph.

use std::fmt;

use super::graph::{MorseDecomposition, RoaLabel};
use crate::error::{Error, Result};

/// Class of a Morse node in the three-node graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NodeClass {
    /// Minimal node holding an encoded successful final state.
    G,
    /// Node that cannot reach any `G` node.
    U,
    /// Node above some `G` node.
    R,
}

/// Classification of a grid cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CellClass {
    RoaG,
    G,
    RoaU,
    U,
    Undecided,
    Invalid,
}

impl CellClass {
    pub fn as_str(self) -> &'static str {
        match self {
            CellClass::RoaG => "ROA_G",
            CellClass::G => "G",
            CellClass::RoaU => "ROA_U",
            CellClass::U => "U",
            CellClass::Undecided => "UNDECIDED",
            CellClass::Invalid => "INVALID",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "ROA_G" => CellClass::RoaG,
            "G" => CellClass::G,
            "ROA_U" => CellClass::RoaU,
            "U" => CellClass::U,
            "UNDECIDED" => CellClass::Undecided,
            "INVALID" => CellClass::Invalid,
            _ => return None,
        })
    }

    /// Cells predicted to reach the desired attractor.
    pub fn is_success(self) -> bool {
        matches!(self, CellClass::RoaG | CellClass::G)
    }
}

impl fmt::Display for CellClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BistableGraph {
    /// Class of every Morse node.
    pub node_class: Vec<NodeClass>,
    /// Class of every graph vertex.
    pub vertex_class: Vec<CellClass>,
}

impl BistableGraph {
    fn nodes(&self, class: NodeClass) -> Vec<usize> {
        (0..self.node_class.len())
            .filter(|&n| self.node_class[n] == class)
            .collect()
    }

    pub fn g(&self) -> Vec<usize> {
        self.nodes(NodeClass::G)
    }

    pub fn u(&self) -> Vec<usize> {
        self.nodes(NodeClass::U)
    }

    pub fn r(&self) -> Vec<usize> {
        self.nodes(NodeClass::R)
    }
}

/// `G` = minimal Morse nodes containing one of `success_vertices`,
/// `R` = nodes above some `G` node, `U` = the rest. Vertices are classified
/// through their region of attraction.
///
/// When no minimal node contains a success vertex, `G` falls back to the
/// minimal nodes whose basins do.
pub fn retract(
    decomp: &MorseDecomposition,
    success_vertices: impl IntoIterator<Item = usize>,
) -> Result<BistableGraph> {
    retract_avoiding(decomp, success_vertices, None)
}

/// As [`retract`], but the basin fallback never picks `avoid` (the
/// out-of-domain node).
pub fn retract_avoiding(
    decomp: &MorseDecomposition,
    success_vertices: impl IntoIterator<Item = usize>,
    avoid: Option<usize>,
) -> Result<BistableGraph> {
    let mg = &decomp.morse_graph;
    let success: Vec<usize> = success_vertices.into_iter().collect();
    let mut is_g = vec![false; mg.len()];
    for &v in &success {
        if let Some(n) = decomp.morse_node_of(v) {
            if mg.is_minimal(n) {
                is_g[n] = true;
            }
        }
    }
    if !is_g.iter().any(|&g| g) {
        for &v in &success {
            if let Some(&RoaLabel::Basin(m)) = decomp.roa.get(v) {
                if Some(m) != avoid {
                    is_g[m] = true;
                }
            }
        }
    }
    if !is_g.iter().any(|&g| g) {
        return Err(Error::DesiredAttractorNotFound);
    }
    let node_class: Vec<NodeClass> = (0..mg.len())
        .map(|n| {
            if is_g[n] {
                NodeClass::G
            } else if mg.below[n].ones().any(|b| is_g[b]) {
                NodeClass::R
            } else {
                NodeClass::U
            }
        })
        .collect();
    let vertex_class = decomp
        .roa
        .iter()
        .map(|label| match *label {
            RoaLabel::Attractor(a) if is_g[a] => CellClass::G,
            RoaLabel::Attractor(_) => CellClass::U,
            RoaLabel::Basin(a) if is_g[a] => CellClass::RoaG,
            RoaLabel::Basin(_) => CellClass::RoaU,
            RoaLabel::Undecided => CellClass::Undecided,
        })
        .collect();
    Ok(BistableGraph {
        node_class,
        vertex_class,
    })
}

/// Checks that the node classes define an order-preserving map onto
/// `G < R > U`: whenever `b` lies below `a`, either both share a class or `a`
/// is in `R` and `b` is not. Also checks that `G` nodes are minimal.
pub fn is_order_preserving(decomp: &MorseDecomposition, bistable: &BistableGraph) -> bool {
    let mg = &decomp.morse_graph;
    (0..mg.len()).all(|a| {
        let ca = bistable.node_class[a];
        let minimal_ok = ca != NodeClass::G || mg.is_minimal(a);
        minimal_ok
            && mg.below[a].ones().all(|b| {
                let cb = bistable.node_class[b];
                ca == cb || (ca == NodeClass::R && cb != NodeClass::R)
            })
    })
}
