//! Map plus decomposition over grid cells, and their text exports.

use std::fmt::Write as _;
use std::path::Path;

use super::graph::{MorseDecomposition, RoaLabel};
use super::map::MultivaluedMap;
use super::retract::{BistableGraph, CellClass};
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct CellAnalysis {
    pub map: MultivaluedMap,
    pub decomposition: MorseDecomposition,
}

impl CellAnalysis {
    pub fn new(map: MultivaluedMap) -> Self {
        let decomposition = MorseDecomposition::new(map.adjacency());
        Self { map, decomposition }
    }

    /// Morse node holding the out-of-domain vertex.
    pub fn out_of_domain_node(&self) -> Option<usize> {
        self.map
            .out_of_domain()
            .and_then(|v| self.decomposition.morse_node_of(v))
    }

    /// Minimal Morse nodes other than the out-of-domain node.
    pub fn attractors(&self) -> Vec<usize> {
        let ood = self.out_of_domain_node();
        self.decomposition
            .morse_graph
            .minimal
            .iter()
            .copied()
            .filter(|&m| Some(m) != ood)
            .collect()
    }

    /// Grid cells making up a Morse node (the out-of-domain vertex is skipped).
    pub fn cells_of(&self, node: usize) -> Vec<usize> {
        self.decomposition
            .vertices_of(node)
            .iter()
            .filter_map(|&v| self.map.cell_of(v))
            .collect()
    }

    /// RoA label of a grid cell, `None` for invalid cells.
    pub fn roa_of_cell(&self, cell: usize) -> Option<RoaLabel> {
        self.map.vertex_of(cell).map(|v| self.decomposition.roa[v])
    }

    /// Class of every grid cell, in linear index order.
    pub fn cell_labels(&self, bistable: &BistableGraph) -> Vec<CellClass> {
        (0..self.map.grid().num_cells())
            .map(|c| {
                self.map
                    .vertex_of(c)
                    .map_or(CellClass::Invalid, |v| bistable.vertex_class[v])
            })
            .collect()
    }

    /// Class of the cell containing `z`; `Invalid` outside the valid region.
    pub fn classify_point(&self, bistable: &BistableGraph, z: &[f64]) -> CellClass {
        self.map
            .vertex_of_point(z)
            .map_or(CellClass::Invalid, |v| bistable.vertex_class[v])
    }

    fn vertex_name(&self, v: usize) -> String {
        match self.map.cell_of(v) {
            Some(c) => c.to_string(),
            None => "ood".into(),
        }
    }

    /// Edges of `F` between grid cells; `ood` names the out-of-domain node.
    pub fn map_edges_text(&self) -> String {
        let mut s = String::from(
            "# multivalued map over grid cells; ood is the out-of-domain node\nsrc dst\n",
        );
        for (v, ts) in self.map.adjacency().iter().enumerate() {
            let src = self.vertex_name(v);
            for &t in ts {
                writeln!(s, "{src} {}", self.vertex_name(t)).unwrap();
            }
        }
        s
    }

    /// Condensation edges between component ids.
    pub fn condensation_edges_text(&self) -> String {
        let cg = &self.decomposition.condensation;
        let mut s = format!("# condensation graph, {} components\nsrc dst\n", cg.len());
        for (a, b) in cg.edges() {
            writeln!(s, "{a} {b}").unwrap();
        }
        s
    }

    /// Reduced Morse graph edges between Morse node indices.
    pub fn morse_edges_text(&self) -> String {
        let mg = &self.decomposition.morse_graph;
        let mut s = format!(
            "# morse graph, {} nodes, transitively reduced\nsrc dst\n",
            mg.len()
        );
        for (a, b) in &mg.edges {
            writeln!(s, "{a} {b}").unwrap();
        }
        s
    }

    pub fn labels_csv(&self, bistable: &BistableGraph) -> String {
        let mut s = String::from("linear_index,label\n");
        for (c, l) in self.cell_labels(bistable).iter().enumerate() {
            writeln!(s, "{c},{l}").unwrap();
        }
        s
    }

    pub fn summary(&self, bistable: Option<&BistableGraph>) -> String {
        let mg = &self.decomposition.morse_graph;
        let list = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join(" ");
        let mut s = String::new();
        writeln!(s, "cells {}", self.map.num_cells()).unwrap();
        writeln!(s, "edges {}", self.map.num_edges()).unwrap();
        writeln!(s, "lipschitz {}", self.map.params.lipschitz).unwrap();
        writeln!(s, "radius {}", self.map.radius).unwrap();
        writeln!(s, "steps {}", self.map.params.steps).unwrap();
        writeln!(s, "non_finite_images {}", self.map.non_finite_images).unwrap();
        writeln!(s, "components {}", self.decomposition.condensation.len()).unwrap();
        writeln!(s, "morse_nodes {}", mg.len()).unwrap();
        writeln!(s, "minimal_nodes {}", list(&mg.minimal)).unwrap();
        writeln!(
            s,
            "out_of_domain_node {}",
            self.out_of_domain_node()
                .map_or("none".into(), |n| n.to_string())
        )
        .unwrap();
        writeln!(s, "attractors {}", self.attractors().len()).unwrap();
        if let Some(b) = bistable {
            let (g, u, r) = (b.g(), b.u(), b.r());
            writeln!(s, "G {} : {}", g.len(), list(&g)).unwrap();
            writeln!(s, "U {} : {}", u.len(), list(&u)).unwrap();
            writeln!(s, "R {} : {}", r.len(), list(&r)).unwrap();
        }
        for n in 0..mg.len() {
            writeln!(
                s,
                "node {n} cells {} minimal {}",
                self.cells_of(n).len(),
                mg.is_minimal(n)
            )
            .unwrap();
        }
        s
    }
}

/// Reads a `linear_index,label` table covering every cell of the grid.
pub fn parse_cell_labels(text: &str, path: &Path, num_cells: usize) -> Result<Vec<CellClass>> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("linear_index,label") {
        return Err(Error::parse(
            path,
            "header",
            "expected `linear_index,label`",
        ));
    }
    let mut out = Vec::with_capacity(num_cells);
    for (row, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (idx, label) = line
            .split_once(',')
            .ok_or_else(|| Error::parse(path, format!("row {row}"), "expected two columns"))?;
        let idx: usize = idx
            .trim()
            .parse()
            .map_err(|_| Error::parse(path, format!("row {row}.linear_index"), idx))?;
        if idx != out.len() {
            return Err(Error::parse(
                path,
                format!("row {row}.linear_index"),
                "indices must be 0, 1, 2, ...",
            ));
        }
        let label = CellClass::parse(label.trim())
            .ok_or_else(|| Error::parse(path, format!("row {row}.label"), label))?;
        out.push(label);
    }
    if out.len() != num_cells {
        return Err(Error::parse(
            path,
            "rows",
            format!("expected {num_cells} cells, found {}", out.len()),
        ));
    }
    Ok(out)
}
