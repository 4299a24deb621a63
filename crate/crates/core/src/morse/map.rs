//! Combinatorial outer approximation of a point map on the valid cells of a grid.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::CubicalGrid;

/// How the images of a cell's corners are turned into target cells.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Enclosure {
    /// Cells meeting a closed ball of radius `L d / 2` around each corner image.
    #[default]
    Corners,
    /// Cells meeting the bounding box of all corner images, grown by `L d / 2`.
    /// Encloses the true image when the map is monotone in every coordinate.
    Hull,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MapParams {
    /// Lipschitz bound `L` of the composed map.
    pub lipschitz: f64,
    /// Number of applications of the one-step map.
    pub steps: usize,
    pub enclosure: Enclosure,
}

impl Default for MapParams {
    fn default() -> Self {
        Self {
            lipschitz: 1.0,
            steps: 5,
            enclosure: Enclosure::Corners,
        }
    }
}

/// Cell-to-cells relation on the valid cells of a grid. Vertices `0..n` are
/// valid cells in ascending order; vertex `n`, when present, is the absorbing
/// out-of-domain node.
#[derive(Clone, Debug, PartialEq)]
pub struct MultivaluedMap {
    grid: CubicalGrid,
    cells: Vec<usize>,
    vertex_of_cell: Vec<usize>,
    targets: Vec<Vec<usize>>,
    has_out_of_domain: bool,
    pub params: MapParams,
    /// Largest enclosure radius over all cells.
    pub radius: f64,
    /// Corner images that came out NaN or infinite.
    pub non_finite_images: usize,
}

const NO_VERTEX: usize = usize::MAX;

/// Applies `step` `steps` times; stops early on a non-finite value.
pub fn compose<F>(step: &F, x: &[f64], steps: usize) -> Vec<f64>
where
    F: Fn(&[f64]) -> Vec<f64> + ?Sized,
{
    let mut x = x.to_vec();
    for _ in 0..steps {
        x = step(&x);
        if x.iter().any(|v| !v.is_finite()) {
            break;
        }
    }
    x
}

pub fn build_map<F>(grid: &CubicalGrid, step: &F, params: MapParams) -> Result<MultivaluedMap>
where
    F: Fn(&[f64]) -> Vec<f64> + Sync + ?Sized,
{
    let n = grid.valid_cells().count();
    build_map_with_bounds(grid, step, params, &vec![params.lipschitz; n])
}

/// Like [`build_map`], but valid cell `i` (in ascending order) uses its own
/// Lipschitz bound `bounds[i]`; `params.lipschitz` is only recorded.
pub fn build_map_with_bounds<F>(
    grid: &CubicalGrid,
    step: &F,
    params: MapParams,
    bounds: &[f64],
) -> Result<MultivaluedMap>
where
    F: Fn(&[f64]) -> Vec<f64> + Sync + ?Sized,
{
    if let Some(l) = bounds.iter().find(|l| !(**l >= 0.0 && l.is_finite())) {
        return Err(Error::InvalidInput(format!(
            "Lipschitz bound must be finite and non-negative, got {l}"
        )));
    }
    if params.steps == 0 {
        return Err(Error::InvalidInput("map needs at least one step".into()));
    }
    let cells: Vec<usize> = grid.valid_cells().collect();
    if bounds.len() != cells.len() {
        return Err(Error::InvalidInput(format!(
            "expected {} cell bounds, got {}",
            cells.len(),
            bounds.len()
        )));
    }
    let mut vertex_of_cell = vec![NO_VERTEX; grid.num_cells()];
    for (v, &c) in cells.iter().enumerate() {
        vertex_of_cell[c] = v;
    }
    let ood = cells.len();

    // Images of every lattice vertex used by a valid cell, each computed once.
    let mut used = vec![false; grid.num_vertices()];
    for &c in &cells {
        for v in grid.corner_vertices(c) {
            used[v] = true;
        }
    }
    let lattice: Vec<usize> = (0..used.len()).filter(|&v| used[v]).collect();
    let images: Vec<Vec<f64>> = lattice
        .par_iter()
        .map(|&v| compose(step, &grid.vertex(v), params.steps))
        .collect();
    let mut image_of = vec![NO_VERTEX; used.len()];
    for (i, &v) in lattice.iter().enumerate() {
        image_of[v] = i;
    }
    let non_finite_images = images
        .iter()
        .filter(|p| p.iter().any(|x| !x.is_finite()))
        .count();

    let half = grid.diameter() / 2.0;
    let radius = bounds.iter().fold(0.0, |m: f64, l| m.max(l * half));
    let dim = grid.dim();
    let lands_outside = |p: &[f64]| {
        p.len() != dim
            || p.iter().any(|x| !x.is_finite())
            || grid.locate(p).is_none_or(|c| !grid.is_valid(c))
    };

    let mut targets: Vec<Vec<usize>> = cells
        .par_iter()
        .zip(bounds)
        .map(|(&c, &l)| {
            let radius = l * half;
            let corners: Vec<&[f64]> = grid
                .corner_vertices(c)
                .into_iter()
                .map(|v| images[image_of[v]].as_slice())
                .collect();
            let mut out = Vec::new();
            let mut outside = false;
            for p in &corners {
                if lands_outside(p) {
                    outside = true;
                }
            }
            let finite: Vec<&[f64]> = corners
                .iter()
                .copied()
                .filter(|p| p.len() == dim && p.iter().all(|x| x.is_finite()))
                .collect();
            match params.enclosure {
                Enclosure::Corners => {
                    for p in &finite {
                        out.extend(grid.cells_meeting_ball(p, radius));
                    }
                }
                Enclosure::Hull => {
                    if !finite.is_empty() {
                        let lo: Vec<f64> = (0..dim)
                            .map(|i| {
                                finite.iter().map(|p| p[i]).fold(f64::INFINITY, f64::min) - radius
                            })
                            .collect();
                        let hi: Vec<f64> = (0..dim)
                            .map(|i| {
                                finite
                                    .iter()
                                    .map(|p| p[i])
                                    .fold(f64::NEG_INFINITY, f64::max)
                                    + radius
                            })
                            .collect();
                        let met = grid.cells_meeting_box(&lo, &hi);
                        // Hull reaching out of the box or into invalid cells.
                        let in_box = lo.iter().zip(grid.lower()).all(|(a, b)| *a >= b)
                            && hi.iter().zip(grid.upper()).all(|(a, b)| *a <= b);
                        if !in_box || met.iter().any(|&t| !grid.is_valid(t)) {
                            outside = true;
                        }
                        out.extend(met);
                    }
                }
            }
            let mut t: Vec<usize> = out
                .into_iter()
                .filter(|&t| grid.is_valid(t))
                .map(|t| vertex_of_cell[t])
                .collect();
            t.sort_unstable();
            t.dedup();
            if outside {
                t.push(ood);
            }
            t
        })
        .collect();

    let has_out_of_domain = targets.iter().any(|t| t.last() == Some(&ood));
    if has_out_of_domain {
        targets.push(vec![ood]);
    }
    Ok(MultivaluedMap {
        grid: grid.clone(),
        cells,
        vertex_of_cell,
        targets,
        has_out_of_domain,
        params,
        radius,
        non_finite_images,
    })
}

impl MultivaluedMap {
    pub fn grid(&self) -> &CubicalGrid {
        &self.grid
    }

    /// Number of graph vertices, counting the out-of-domain node when present.
    pub fn num_vertices(&self) -> usize {
        self.targets.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    /// Vertex id of the out-of-domain node, if any image left the valid region.
    pub fn out_of_domain(&self) -> Option<usize> {
        self.has_out_of_domain.then_some(self.cells.len())
    }

    /// Grid cell of a vertex; `None` for the out-of-domain node.
    pub fn cell_of(&self, vertex: usize) -> Option<usize> {
        self.cells.get(vertex).copied()
    }

    /// Vertex of a valid grid cell.
    pub fn vertex_of(&self, cell: usize) -> Option<usize> {
        self.vertex_of_cell
            .get(cell)
            .copied()
            .filter(|&v| v != NO_VERTEX)
    }

    /// Vertex whose cell contains `point`, if that cell is valid.
    pub fn vertex_of_point(&self, point: &[f64]) -> Option<usize> {
        self.grid.locate(point).and_then(|c| self.vertex_of(c))
    }

    /// Adjacency lists over vertices, sorted.
    pub fn adjacency(&self) -> &[Vec<usize>] {
        &self.targets
    }

    pub fn targets(&self, vertex: usize) -> &[usize] {
        &self.targets[vertex]
    }

    pub fn num_edges(&self) -> usize {
        self.targets.iter().map(Vec::len).sum()
    }

    /// Does the image of `point` under the composed map lie in `F` of the
    /// point's cell? Images leaving the valid region count when the cell maps
    /// to the out-of-domain node.
    pub fn contains_image(&self, point: &[f64], image: &[f64]) -> Option<bool> {
        let src = self.vertex_of_point(point)?;
        let dst = if image.iter().all(|x| x.is_finite()) {
            self.vertex_of_point(image)
        } else {
            None
        };
        let t = &self.targets[src];
        Some(match dst {
            Some(d) => t.binary_search(&d).is_ok(),
            None => self.out_of_domain().is_some_and(|o| t.last() == Some(&o)),
        })
    }
}

fn sample_in_cell(grid: &CubicalGrid, cell: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let (lo, hi) = grid.cell_bounds(cell);
    lo.iter()
        .zip(&hi)
        .map(|(&a, &b)| a + (b - a) * rng.gen::<f64>())
        .collect()
}

/// Largest ratio `|phi(z) - phi(z')| / |z - z'|` over pairs of random points
/// sharing a valid cell, times 1.2. `phi` is `step` applied `steps` times.
pub fn estimate_lipschitz<F>(
    grid: &CubicalGrid,
    step: &F,
    steps: usize,
    samples_per_cell: usize,
    seed: u64,
) -> Result<f64>
where
    F: Fn(&[f64]) -> Vec<f64> + Sync + ?Sized,
{
    let per_cell = estimate_cell_lipschitz(grid, step, steps, samples_per_cell, seed)?;
    Ok(per_cell.into_iter().fold(0.0, f64::max))
}

/// The same estimate kept separately for each valid cell, in ascending cell order.
pub fn estimate_cell_lipschitz<F>(
    grid: &CubicalGrid,
    step: &F,
    steps: usize,
    samples_per_cell: usize,
    seed: u64,
) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Vec<f64> + Sync + ?Sized,
{
    if samples_per_cell < 2 {
        return Err(Error::InvalidInput(
            "need at least 2 samples per cell".into(),
        ));
    }
    let cells: Vec<usize> = grid.valid_cells().collect();
    if cells.is_empty() {
        return Err(Error::InvalidInput("grid has no valid cells".into()));
    }
    let ratios: Vec<f64> = cells
        .par_iter()
        .map(|&c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let pts: Vec<Vec<f64>> = (0..samples_per_cell)
                .map(|_| sample_in_cell(grid, c, &mut rng))
                .collect();
            let imgs: Vec<Vec<f64>> = pts.iter().map(|p| compose(step, p, steps)).collect();
            let mut best: f64 = 0.0;
            for i in 0..pts.len() {
                for j in i + 1..pts.len() {
                    let dx = dist(&pts[i], &pts[j]);
                    let dy = dist(&imgs[i], &imgs[j]);
                    if dx > 1e-12 && dy.is_finite() {
                        best = best.max(dy / dx);
                    }
                }
            }
            1.2 * best
        })
        .collect();
    Ok(ratios)
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Fraction of `samples` random points (uniform over a random valid cell)
/// whose image lies in `F` of their own cell.
pub fn containment_rate<F>(map: &MultivaluedMap, step: &F, samples: usize, seed: u64) -> f64
where
    F: Fn(&[f64]) -> Vec<f64> + Sync + ?Sized,
{
    let grid = map.grid();
    let n = map.num_cells();
    if n == 0 || samples == 0 {
        return 1.0;
    }
    const CHUNK: usize = 1024;
    let chunks = samples.div_ceil(CHUNK);
    let hits: usize = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let count = CHUNK.min(samples - k * CHUNK);
            (0..count)
                .filter(|_| {
                    let cell = map.cells[rng.gen_range(0..n)];
                    let z = sample_in_cell(grid, cell, &mut rng);
                    let img = compose(step, &z, map.params.steps);
                    map.contains_image(&z, &img).unwrap_or(false)
                })
                .count()
        })
        .sum();
    hits as f64 / samples as f64
}
