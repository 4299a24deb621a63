//! Cubical decompositions of a box.
//!
//! Cells are products of half-open intervals `[e_i, e_{i+1})`, except that the
//! last interval on each axis is closed, so every point of the box lies in
//! exactly one cell. Linear indices are mixed-radix with axis 0 varying fastest.

use std::fmt::Write as _;
use std::path::Path;

use fixedbitset::FixedBitSet;

use crate::error::{Error, Result};
use crate::systems::BoxDomain;

#[derive(Clone, Debug, PartialEq)]
pub struct CubicalGrid {
    /// Breakpoints per axis, strictly increasing, `counts[i] + 1` of them.
    edges: Vec<Vec<f64>>,
    counts: Vec<usize>,
    /// Subdivision exponents when the grid is uniform with power-of-two counts.
    exponents: Option<Vec<u32>>,
    valid: FixedBitSet,
    diameter: f64,
}

/// Cell coordinates together with the linear index.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CellId {
    pub coords: Vec<usize>,
    pub index: usize,
}

/// Outcome of [`CubicalGrid::validate`].
#[derive(Clone, Debug, PartialEq)]
pub struct Validation {
    pub valid_cells: usize,
    /// No sample point fell inside the box.
    pub degenerate: bool,
}

impl CubicalGrid {
    /// Uniform grid with `2^k_i` intervals on axis `i`. All cells start valid.
    pub fn uniform(domain: &BoxDomain, exponents: &[u32]) -> Result<Self> {
        if exponents.len() != domain.dim() {
            return Err(Error::DimensionMismatch {
                expected: domain.dim(),
                found: exponents.len(),
            });
        }
        if exponents.iter().any(|&k| k > 24) {
            return Err(Error::InvalidInput(format!(
                "subdivision exponents {exponents:?} too large"
            )));
        }
        let edges = exponents
            .iter()
            .zip(domain.lower().iter().zip(domain.upper()))
            .map(|(&k, (&lo, &hi))| {
                let n = 1usize << k;
                (0..=n)
                    .map(|i| {
                        if i == n {
                            hi
                        } else {
                            lo + (hi - lo) * i as f64 / n as f64
                        }
                    })
                    .collect()
            })
            .collect();
        let mut g = Self::from_edges(edges)?;
        g.exponents = Some(exponents.to_vec());
        Ok(g)
    }

    /// The latent cube `[-1, 1]^D` with `2^k_i` intervals per axis.
    pub fn latent(exponents: &[u32]) -> Result<Self> {
        Self::uniform(&BoxDomain::cube(exponents.len(), -1.0, 1.0)?, exponents)
    }

    /// Rectilinear grid from explicit breakpoints. All cells start valid.
    pub fn from_edges(edges: Vec<Vec<f64>>) -> Result<Self> {
        if edges.is_empty() {
            return Err(Error::InvalidInput("grid needs at least one axis".into()));
        }
        for (i, e) in edges.iter().enumerate() {
            let ok = e.len() >= 2
                && e.iter().all(|v| v.is_finite())
                && e.windows(2).all(|w| w[0] < w[1]);
            if !ok {
                return Err(Error::InvalidInput(format!(
                    "axis {i}: breakpoints must be finite and strictly increasing"
                )));
            }
        }
        let counts: Vec<usize> = edges.iter().map(|e| e.len() - 1).collect();
        let total = counts
            .iter()
            .try_fold(1usize, |acc, &n| acc.checked_mul(n))
            .filter(|&t| t <= 1 << 28)
            .ok_or_else(|| {
                Error::InvalidInput(format!("grid with {counts:?} cells is too large"))
            })?;
        let diameter = edges
            .iter()
            .map(|e| {
                let w = e.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
                w * w
            })
            .sum::<f64>()
            .sqrt();
        let mut valid = FixedBitSet::with_capacity(total);
        valid.insert_range(..);
        Ok(Self {
            edges,
            counts,
            exponents: None,
            valid,
            diameter,
        })
    }

    pub fn dim(&self) -> usize {
        self.edges.len()
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn edges(&self) -> &[Vec<f64>] {
        &self.edges
    }

    pub fn exponents(&self) -> Option<&[u32]> {
        self.exponents.as_deref()
    }

    pub fn lower(&self) -> Vec<f64> {
        self.edges.iter().map(|e| e[0]).collect()
    }

    pub fn upper(&self) -> Vec<f64> {
        self.edges.iter().map(|e| *e.last().unwrap()).collect()
    }

    pub fn num_cells(&self) -> usize {
        self.valid.len()
    }

    /// Largest cell diagonal; every cell's diagonal for uniform grids.
    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    pub fn is_valid(&self, cell: usize) -> bool {
        self.valid.contains(cell)
    }

    pub fn valid_mask(&self) -> &FixedBitSet {
        &self.valid
    }

    pub fn valid_cells(&self) -> impl Iterator<Item = usize> + '_ {
        self.valid.ones()
    }

    pub fn num_valid(&self) -> usize {
        self.valid.count_ones(..)
    }

    pub fn set_valid_mask(&mut self, mask: FixedBitSet) -> Result<()> {
        if mask.len() != self.num_cells() {
            return Err(Error::DimensionMismatch {
                expected: self.num_cells(),
                found: mask.len(),
            });
        }
        self.valid = mask;
        Ok(())
    }

    pub fn linear_index(&self, coords: &[usize]) -> usize {
        coords
            .iter()
            .zip(&self.counts)
            .rev()
            .fold(0, |acc, (&c, &n)| acc * n + c)
    }

    pub fn coords(&self, mut index: usize) -> Vec<usize> {
        self.counts
            .iter()
            .map(|&n| {
                let c = index % n;
                index /= n;
                c
            })
            .collect()
    }

    pub fn cell_id(&self, index: usize) -> CellId {
        CellId {
            coords: self.coords(index),
            index,
        }
    }

    fn locate_axis(&self, axis: usize, x: f64) -> Option<usize> {
        let e = &self.edges[axis];
        if !(x >= e[0] && x <= e[e.len() - 1]) {
            return None;
        }
        let n = e.len() - 1;
        Some((e.partition_point(|&b| b <= x) - 1).min(n - 1))
    }

    /// Linear index of the cell containing `point`, or `None` outside the box.
    pub fn locate(&self, point: &[f64]) -> Option<usize> {
        if point.len() != self.dim() {
            return None;
        }
        let mut coords = Vec::with_capacity(self.dim());
        for (axis, &x) in point.iter().enumerate() {
            coords.push(self.locate_axis(axis, x)?);
        }
        Some(self.linear_index(&coords))
    }

    /// Closed bounds `(lower, upper)` of a cell.
    pub fn cell_bounds(&self, cell: usize) -> (Vec<f64>, Vec<f64>) {
        let c = self.coords(cell);
        let lo = c.iter().zip(&self.edges).map(|(&i, e)| e[i]).collect();
        let hi = c.iter().zip(&self.edges).map(|(&i, e)| e[i + 1]).collect();
        (lo, hi)
    }

    /// Membership under the half-open convention (closed on the top face).
    pub fn cell_contains(&self, cell: usize, point: &[f64]) -> bool {
        let c = self.coords(cell);
        c.iter().zip(&self.edges).zip(point).all(|((&i, e), &x)| {
            let top = i + 2 == e.len();
            x >= e[i] && (x < e[i + 1] || (top && x == e[i + 1]))
        })
    }

    /// The `2^D` vertices of a cell's closed box.
    pub fn corners(&self, cell: usize) -> Vec<Vec<f64>> {
        let (lo, hi) = self.cell_bounds(cell);
        let d = self.dim();
        (0..1usize << d)
            .map(|mask| {
                (0..d)
                    .map(|i| if mask >> i & 1 == 1 { hi[i] } else { lo[i] })
                    .collect()
            })
            .collect()
    }

    /// Number of points in the global corner lattice `V(Z)`.
    pub fn num_vertices(&self) -> usize {
        self.counts.iter().map(|n| n + 1).product()
    }

    /// Coordinates of lattice vertex `v` (mixed radix over `counts[i] + 1`).
    pub fn vertex(&self, mut v: usize) -> Vec<f64> {
        self.edges
            .iter()
            .map(|e| {
                let i = v % e.len();
                v /= e.len();
                e[i]
            })
            .collect()
    }

    /// Lattice indices of a cell's corners, in the same order as [`corners`](Self::corners).
    pub fn corner_vertices(&self, cell: usize) -> Vec<usize> {
        let c = self.coords(cell);
        let d = self.dim();
        (0..1usize << d)
            .map(|mask| {
                let mut idx = 0;
                for i in (0..d).rev() {
                    let ci = c[i] + (mask >> i & 1);
                    idx = idx * (self.counts[i] + 1) + ci;
                }
                idx
            })
            .collect()
    }

    /// Cells sharing at least a vertex with `cell`, excluding `cell` itself.
    pub fn neighbors(&self, cell: usize) -> Vec<usize> {
        let c = self.coords(cell);
        let d = self.dim();
        let mut out = Vec::new();
        let mut offset = vec![-1i64; d];
        loop {
            if offset.iter().any(|&o| o != 0) {
                let nc: Option<Vec<usize>> = c
                    .iter()
                    .zip(&offset)
                    .zip(&self.counts)
                    .map(|((&ci, &o), &n)| {
                        let v = ci as i64 + o;
                        (v >= 0 && v < n as i64).then_some(v as usize)
                    })
                    .collect();
                if let Some(nc) = nc {
                    out.push(self.linear_index(&nc));
                }
            }
            let mut axis = 0;
            loop {
                if axis == d {
                    return out;
                }
                if offset[axis] < 1 {
                    offset[axis] += 1;
                    break;
                }
                offset[axis] = -1;
                axis += 1;
            }
        }
    }

    /// Marks as valid exactly the cells containing a sample point and their
    /// vertex neighbors.
    pub fn validate<'a>(&mut self, points: impl IntoIterator<Item = &'a [f64]>) -> Validation {
        let mut mask = FixedBitSet::with_capacity(self.num_cells());
        let mut hit = FixedBitSet::with_capacity(self.num_cells());
        for p in points {
            if let Some(c) = self.locate(p) {
                hit.insert(c);
            }
        }
        for c in hit.ones() {
            mask.insert(c);
            for n in self.neighbors(c) {
                mask.insert(n);
            }
        }
        let degenerate = hit.count_ones(..) == 0;
        self.valid = mask;
        Validation {
            valid_cells: self.num_valid(),
            degenerate,
        }
    }

    /// Range of cells on `axis` whose closed interval meets `[lo, hi]`.
    fn axis_range(&self, axis: usize, lo: f64, hi: f64) -> Option<(usize, usize)> {
        let e = &self.edges[axis];
        let n = e.len() - 1;
        if !(hi >= e[0] && lo <= e[n]) {
            return None;
        }
        // First cell whose upper edge reaches lo; last cell whose lower edge is <= hi.
        let first = e[1..].partition_point(|&b| b < lo).min(n - 1);
        let last = e[..n]
            .partition_point(|&b| b <= hi)
            .saturating_sub(1)
            .max(first);
        Some((first, last))
    }

    fn for_each_in_ranges(&self, ranges: &[(usize, usize)], mut f: impl FnMut(&[usize])) {
        let d = self.dim();
        let mut coords: Vec<usize> = ranges.iter().map(|r| r.0).collect();
        loop {
            f(&coords);
            let mut axis = 0;
            loop {
                if axis == d {
                    return;
                }
                if coords[axis] < ranges[axis].1 {
                    coords[axis] += 1;
                    break;
                }
                coords[axis] = ranges[axis].0;
                axis += 1;
            }
        }
    }

    /// All cells (valid or not) whose closed box meets the closed ball, sorted.
    pub fn cells_meeting_ball(&self, center: &[f64], radius: f64) -> Vec<usize> {
        let ranges: Option<Vec<_>> = (0..self.dim())
            .map(|axis| self.axis_range(axis, center[axis] - radius, center[axis] + radius))
            .collect();
        let Some(ranges) = ranges else {
            return Vec::new();
        };
        let r2 = radius * radius;
        let mut out = Vec::new();
        self.for_each_in_ranges(&ranges, |coords| {
            let dist2: f64 = coords
                .iter()
                .enumerate()
                .map(|(axis, &c)| {
                    let (a, b) = (self.edges[axis][c], self.edges[axis][c + 1]);
                    let x = center[axis];
                    let gap = if x < a {
                        a - x
                    } else if x > b {
                        x - b
                    } else {
                        0.0
                    };
                    gap * gap
                })
                .sum();
            if dist2 <= r2 {
                out.push(self.linear_index(coords));
            }
        });
        out.sort_unstable();
        out
    }

    /// All cells (valid or not) whose closed box meets the closed box `[lo, hi]`, sorted.
    pub fn cells_meeting_box(&self, lo: &[f64], hi: &[f64]) -> Vec<usize> {
        let ranges: Option<Vec<_>> = (0..self.dim())
            .map(|axis| self.axis_range(axis, lo[axis], hi[axis]))
            .collect();
        let Some(ranges) = ranges else {
            return Vec::new();
        };
        let mut out = Vec::new();
        self.for_each_in_ranges(&ranges, |coords| out.push(self.linear_index(coords)));
        out.sort_unstable();
        out
    }

    /// Text export of the valid mask: a `#` header describing the grid, then
    /// one valid linear index per line.
    pub fn valid_mask_text(&self) -> String {
        let mut s = String::from("# morals valid cells\n");
        writeln!(s, "# dim {}", self.dim()).unwrap();
        match &self.exponents {
            Some(k) => {
                let join = |v: &[f64]| {
                    v.iter()
                        .map(|x| format!("{x:?}"))
                        .collect::<Vec<_>>()
                        .join(" ")
                };
                writeln!(
                    s,
                    "# k {}",
                    k.iter().map(u32::to_string).collect::<Vec<_>>().join(" ")
                )
                .unwrap();
                writeln!(s, "# lower {}", join(&self.lower())).unwrap();
                writeln!(s, "# upper {}", join(&self.upper())).unwrap();
            }
            None => {
                for (axis, e) in self.edges.iter().enumerate() {
                    let v: Vec<String> = e.iter().map(|x| format!("{x:?}")).collect();
                    writeln!(s, "# edges {axis} {}", v.join(" ")).unwrap();
                }
            }
        }
        writeln!(s, "# valid {} of {}", self.num_valid(), self.num_cells()).unwrap();
        for c in self.valid.ones() {
            writeln!(s, "{c}").unwrap();
        }
        s
    }

    pub fn parse_valid_mask(text: &str, path: &Path) -> Result<Self> {
        let mut dim = None;
        let mut k: Option<Vec<u32>> = None;
        let mut lower = None;
        let mut upper = None;
        let mut edges: Vec<(usize, Vec<f64>)> = Vec::new();
        let mut cells = Vec::new();
        let floats = |field: &str, rest: &[&str]| -> Result<Vec<f64>> {
            rest.iter()
                .map(|t| t.parse::<f64>().map_err(|_| Error::parse(path, field, *t)))
                .collect()
        };
        for line in text.lines() {
            if let Some(h) = line.strip_prefix('#') {
                let toks: Vec<&str> = h.split_whitespace().collect();
                match toks.first().copied() {
                    Some("dim") => {
                        dim = Some(
                            toks.get(1)
                                .and_then(|t| t.parse::<usize>().ok())
                                .ok_or_else(|| Error::parse(path, "dim", "missing or malformed"))?,
                        )
                    }
                    Some("k") => {
                        k = Some(
                            toks[1..]
                                .iter()
                                .map(|t| t.parse::<u32>().map_err(|_| Error::parse(path, "k", *t)))
                                .collect::<Result<_>>()?,
                        )
                    }
                    Some("lower") => lower = Some(floats("lower", &toks[1..])?),
                    Some("upper") => upper = Some(floats("upper", &toks[1..])?),
                    Some("edges") => {
                        let axis = toks
                            .get(1)
                            .and_then(|t| t.parse::<usize>().ok())
                            .ok_or_else(|| Error::parse(path, "edges", "missing axis"))?;
                        edges.push((axis, floats("edges", &toks[2..])?));
                    }
                    _ => {}
                }
            } else if !line.trim().is_empty() {
                cells.push(
                    line.trim()
                        .parse::<usize>()
                        .map_err(|_| Error::parse(path, "cell index", line))?,
                );
            }
        }
        let dim = dim.ok_or_else(|| Error::parse(path, "dim", "missing"))?;
        let mut grid = if let Some(k) = k {
            let lower = lower.ok_or_else(|| Error::parse(path, "lower", "missing"))?;
            let upper = upper.ok_or_else(|| Error::parse(path, "upper", "missing"))?;
            if k.len() != dim {
                return Err(Error::parse(path, "k", format!("expected {dim} exponents")));
            }
            Self::uniform(&BoxDomain::new(lower, upper)?, &k)?
        } else {
            edges.sort_by_key(|e| e.0);
            if edges.len() != dim || edges.iter().enumerate().any(|(i, e)| e.0 != i) {
                return Err(Error::parse(
                    path,
                    "edges",
                    format!("expected one line per axis 0..{dim}"),
                ));
            }
            Self::from_edges(edges.into_iter().map(|e| e.1).collect())?
        };
        let mut mask = FixedBitSet::with_capacity(grid.num_cells());
        for c in cells {
            if c >= grid.num_cells() {
                return Err(Error::parse(
                    path,
                    "cell index",
                    format!("{c} out of range"),
                ));
            }
            mask.insert(c);
        }
        grid.valid = mask;
        Ok(grid)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit_1d(k: u32) -> CubicalGrid {
        CubicalGrid::latent(&[k]).unwrap()
    }

    #[test]
    fn locate_boundary_convention() {
        let g = unit_1d(1);
        assert_eq!(g.locate(&[-1.0]), Some(0));
        assert_eq!(g.locate(&[0.0]), Some(1));
        assert_eq!(g.locate(&[1.0]), Some(1));
        assert_eq!(g.locate(&[1.5]), None);
        assert_eq!(g.locate(&[f64::NAN]), None);
    }

    #[test]
    fn corners_of_cell() {
        let g = CubicalGrid::latent(&[2, 2]).unwrap();
        // Cell [0, 0.5] x [0, 0.5] has coordinates (2, 2).
        let c = g.linear_index(&[2, 2]);
        let mut got = g.corners(c);
        got.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(
            got,
            vec![
                vec![0.0, 0.0],
                vec![0.0, 0.5],
                vec![0.5, 0.0],
                vec![0.5, 0.5]
            ]
        );
        assert_eq!(unit_1d(3).corners(0).len(), 2);
    }

    #[test]
    fn corner_union_is_lattice() {
        let g = CubicalGrid::latent(&[2, 3]).unwrap();
        let mut all: Vec<Vec<u64>> = (0..g.num_cells())
            .flat_map(|c| g.corners(c))
            .map(|p| p.iter().map(|v| v.to_bits()).collect())
            .collect();
        all.sort();
        all.dedup();
        assert_eq!(all.len(), 5 * 9);
        assert_eq!(g.num_vertices(), 45);
        for c in 0..g.num_cells() {
            let by_vertex: Vec<Vec<f64>> = g
                .corner_vertices(c)
                .into_iter()
                .map(|v| g.vertex(v))
                .collect();
            assert_eq!(by_vertex, g.corners(c));
        }
    }

    #[test]
    fn diameter_of_uniform_grid() {
        let g = CubicalGrid::latent(&[6, 6]).unwrap();
        assert!((g.diameter() - (2.0f64 / 64.0) * 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(g.num_cells(), 4096);
    }

    #[test]
    fn validate_single_point() {
        let mut g = CubicalGrid::latent(&[3, 3]).unwrap();
        let v = g.validate([[0.1, 0.1].as_slice()]);
        assert_eq!(v.valid_cells, 9);
        assert!(!v.degenerate);
        let v = g.validate([[-1.0, -1.0].as_slice()]);
        assert_eq!(v.valid_cells, 4);
        let v = g.validate([[5.0, 0.0].as_slice()]);
        assert!(v.degenerate);
        assert_eq!(v.valid_cells, 0);
    }

    #[test]
    fn validate_full_cover() {
        let mut g = CubicalGrid::latent(&[2, 2]).unwrap();
        let pts: Vec<Vec<f64>> = (0..g.num_cells())
            .map(|c| {
                let (lo, hi) = g.cell_bounds(c);
                lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect()
            })
            .collect();
        g.validate(pts.iter().map(Vec::as_slice));
        assert_eq!(g.num_valid(), g.num_cells());
    }

    #[test]
    fn neighbors_count() {
        let g = CubicalGrid::latent(&[2, 2, 2]).unwrap();
        assert_eq!(g.neighbors(g.linear_index(&[1, 1, 1])).len(), 26);
        assert_eq!(g.neighbors(0).len(), 7);
    }

    #[test]
    fn ball_of_radius_zero_hits_touching_cells() {
        let g = CubicalGrid::latent(&[2, 2]).unwrap();
        assert_eq!(g.cells_meeting_ball(&[0.0, 0.0], 0.0).len(), 4);
        assert_eq!(
            g.cells_meeting_ball(&[0.25, 0.25], 0.0),
            vec![g.linear_index(&[2, 2])]
        );
        assert_eq!(g.cells_meeting_ball(&[3.0, 0.0], 0.5), Vec::<usize>::new());
        // Corner cells excluded by the Euclidean test.
        let hits = g.cells_meeting_ball(&[0.25, 0.25], 0.3);
        assert!(!hits.contains(&g.linear_index(&[1, 1])));
        assert_eq!(g.cells_meeting_ball(&[0.25, 0.25], 0.36).len(), 9);
    }

    #[test]
    fn box_query() {
        let g = CubicalGrid::latent(&[2, 2]).unwrap();
        assert_eq!(
            g.cells_meeting_box(&[0.1, 0.1], &[0.2, 0.2]),
            vec![g.linear_index(&[2, 2])]
        );
        assert_eq!(g.cells_meeting_box(&[-0.5, 0.0], &[0.0, 0.0]).len(), 6);
        assert!(g.cells_meeting_box(&[1.5, 0.0], &[2.0, 0.0]).is_empty());
        assert_eq!(g.cells_meeting_box(&[-9.0, -9.0], &[9.0, 9.0]).len(), 16);
    }

    #[test]
    fn rectilinear_locate() {
        let g = CubicalGrid::from_edges(vec![vec![-3.0, -2.0, -0.5, 0.5, 2.0, 3.0]]).unwrap();
        assert_eq!(g.locate(&[-2.0]), Some(1));
        assert_eq!(g.locate(&[0.4999]), Some(2));
        assert_eq!(g.locate(&[3.0]), Some(4));
        assert!((g.diameter() - 1.5).abs() < 1e-15);
    }

    #[test]
    fn mask_text_round_trip() {
        let mut g = CubicalGrid::latent(&[3, 2]).unwrap();
        g.validate([[0.3, -0.7].as_slice(), [-0.9, 0.9].as_slice()]);
        let text = g.valid_mask_text();
        let back = CubicalGrid::parse_valid_mask(&text, Path::new("m")).unwrap();
        assert_eq!(back, g);
        let r = CubicalGrid::from_edges(vec![vec![0.0, 1.0, 3.0], vec![-1.0, 1.0]]).unwrap();
        let back = CubicalGrid::parse_valid_mask(&r.valid_mask_text(), Path::new("m")).unwrap();
        assert_eq!(back, r);
    }

    proptest! {
        #[test]
        fn locate_agrees_with_membership(x in -1.0f64..=1.0, y in -1.0f64..=1.0, k1 in 0u32..6, k2 in 0u32..6) {
            let g = CubicalGrid::latent(&[k1, k2]).unwrap();
            let c = g.locate(&[x, y]).unwrap();
            prop_assert!(g.cell_contains(c, &[x, y]));
            let owners = (0..g.num_cells()).filter(|&o| g.cell_contains(o, &[x, y])).count();
            prop_assert_eq!(owners, 1);
        }

        #[test]
        fn interior_corner_locates_to_min_vertex_cell(i in 0usize..8, j in 0usize..8) {
            let g = CubicalGrid::latent(&[3, 3]).unwrap();
            let p = [g.edges()[0][i], g.edges()[1][j]];
            prop_assert_eq!(g.locate(&p), Some(g.linear_index(&[i, j])));
        }

        #[test]
        fn validation_is_monotone(pts in prop::collection::vec((-1.0f64..=1.0, -1.0f64..=1.0), 1..20), extra in prop::collection::vec((-1.0f64..=1.0, -1.0f64..=1.0), 0..10)) {
            let small: Vec<[f64; 2]> = pts.iter().map(|&(a, b)| [a, b]).collect();
            let mut big = small.clone();
            big.extend(extra.iter().map(|&(a, b)| [a, b]));
            let mut g1 = CubicalGrid::latent(&[4, 4]).unwrap();
            let mut g2 = g1.clone();
            g1.validate(small.iter().map(|p| p.as_slice()));
            g2.validate(big.iter().map(|p| p.as_slice()));
            prop_assert!(g1.valid_mask().is_subset(g2.valid_mask()));
        }
    }
}
