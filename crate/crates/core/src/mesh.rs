//! Per-slab geometry adapted to the discrete turning curve.
//!
//! The uniform grid has nodes `x_j = j/J` on `[−b, b]`. In each slab the grid
//! nodes lying within one cell width of ξⁿ are dropped and ξⁿ itself becomes a
//! node; the two cells sharing it are the interface trapezoids. Their common
//! edge runs from ξⁿ (bottom) to ξⁿ⁺¹ (top), every other edge is vertical.

use std::ops::Range;

use crate::error::{invalid, Error, Result};

/// Relative slack on the node-removal radius. A grid node closer than
/// `Δx (1 − MERGE_SLACK)` to ξ is replaced; a turning point sitting on a node
/// (up to round-off) leaves the grid uniform.
pub const MERGE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UniformGrid {
    cells_per_unit: usize,
    half_cells: usize,
}

impl UniformGrid {
    pub fn new(cells_per_unit: usize, half_width: f64) -> Result<Self> {
        if cells_per_unit == 0 {
            return Err(invalid("cells", "must be positive"));
        }
        let half = half_width * cells_per_unit as f64;
        if (half - half.round()).abs() > 1e-9 || half.round() < cells_per_unit as f64 {
            return Err(invalid(
                "half_width",
                "half_width * cells must be an integer and half_width >= 1",
            ));
        }
        Ok(Self {
            cells_per_unit,
            half_cells: half.round() as usize,
        })
    }

    pub fn cells_per_unit(&self) -> usize {
        self.cells_per_unit
    }

    pub fn dx(&self) -> f64 {
        1.0 / self.cells_per_unit as f64
    }

    pub fn half_width(&self) -> f64 {
        self.half_cells as f64 / self.cells_per_unit as f64
    }

    pub fn cell_count(&self) -> usize {
        2 * self.half_cells
    }

    pub fn node_count(&self) -> usize {
        2 * self.half_cells + 1
    }

    /// Node `i` (0-based from the left end). Division keeps ±1 and the mirror
    /// symmetry exact.
    #[inline]
    pub fn node(&self, i: usize) -> f64 {
        (i as i64 - self.half_cells as i64) as f64 / self.cells_per_unit as f64
    }

    /// Grid node index of the integer coordinate `x = m` (m = ±1 for the exits).
    pub fn node_index_of_unit(&self, m: i64) -> usize {
        (self.half_cells as i64 + m * self.cells_per_unit as i64) as usize
    }

    /// Cells covering [−1, 1].
    pub fn corridor_cells(&self) -> Range<usize> {
        self.half_cells - self.cells_per_unit..self.half_cells + self.cells_per_unit
    }

    /// Index j with x_j ≤ x < x_{j+1}.
    pub fn locate(&self, x: f64) -> usize {
        let guess = (x * self.cells_per_unit as f64).floor() as i64 + self.half_cells as i64;
        let mut j = guess.clamp(0, self.node_count() as i64 - 2) as usize;
        while j > 0 && self.node(j) > x {
            j -= 1;
        }
        while j + 2 < self.node_count() && self.node(j + 1) <= x {
            j += 1;
        }
        j
    }

    pub fn partition(&self) -> Partition {
        Partition {
            nodes: (0..self.node_count()).map(|i| self.node(i)).collect(),
        }
    }

    /// Grid nodes replaced by a turning point at `xi`.
    pub fn interface_layout(&self, xi: f64) -> Result<InterfaceLayout> {
        let dx = self.dx();
        let hw = self.half_width();
        if !(xi > -hw + 2.0 * dx && xi < hw - 2.0 * dx) {
            return Err(invalid(
                "xi",
                format!("turning point {xi} too close to the domain boundary"),
            ));
        }
        let j = self.locate(xi);
        let radius = dx * (1.0 - MERGE_SLACK);
        let drop_left = xi - self.node(j) < radius;
        let drop_right = self.node(j + 1) - xi < radius;
        let removed = match (drop_left, drop_right) {
            (true, true) => j..j + 2,
            (true, false) => j..j + 1,
            (false, true) => j + 1..j + 2,
            (false, false) => unreachable!("a node always lies within half a cell"),
        };
        Ok(InterfaceLayout { removed })
    }
}

/// Which grid nodes the interface node replaces.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InterfaceLayout {
    pub removed: Range<usize>,
}

impl InterfaceLayout {
    /// Index of the interface node in the adapted partition.
    pub fn interface_node(&self) -> usize {
        self.removed.start
    }

    /// Position of grid node `i` in the adapted partition, if kept.
    pub fn map_grid_node(&self, i: usize) -> Option<usize> {
        if i < self.removed.start {
            Some(i)
        } else if i < self.removed.end {
            None
        } else {
            Some(i + 1 - self.removed.len())
        }
    }

    pub fn partition(&self, grid: &UniformGrid, xi: f64) -> Partition {
        let mut nodes = Vec::with_capacity(grid.node_count());
        nodes.extend((0..self.removed.start).map(|i| grid.node(i)));
        nodes.push(xi);
        nodes.extend((self.removed.end..grid.node_count()).map(|i| grid.node(i)));
        Partition { nodes }
    }
}

/// Strictly increasing node list; cell j is [nodes[j], nodes[j+1]].
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    nodes: Vec<f64>,
}

impl Partition {
    pub fn new(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 || nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("nodes", "partition nodes must be strictly increasing"));
        }
        Ok(Self { nodes })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn cell_count(&self) -> usize {
        self.nodes.len() - 1
    }

    #[inline]
    pub fn length(&self, j: usize) -> f64 {
        self.nodes[j + 1] - self.nodes[j]
    }

    #[inline]
    pub fn bounds(&self, j: usize) -> (f64, f64) {
        (self.nodes[j], self.nodes[j + 1])
    }

    pub fn lengths(&self) -> impl Iterator<Item = f64> + '_ {
        self.nodes.windows(2).map(|w| w[1] - w[0])
    }

    pub fn span(&self) -> (f64, f64) {
        (self.nodes[0], self.nodes[self.nodes.len() - 1])
    }
}

/// Discrete turning curve: ξⁿ at tⁿ = nΔt and slab slopes sⁿ.
#[derive(Debug, Clone, PartialEq)]
pub struct TurningPath {
    pub dt: f64,
    pub xi: Vec<f64>,
    pub slopes: Vec<f64>,
}

impl TurningPath {
    pub fn from_values(dt: f64, xi: Vec<f64>) -> Self {
        let slopes = xi.windows(2).map(|w| (w[1] - w[0]) / dt).collect();
        Self { dt, xi, slopes }
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.dt
    }

    pub fn slabs(&self) -> usize {
        self.slopes.len()
    }

    /// Continuous piecewise-linear interpolant ξ_Δ(t).
    pub fn eval(&self, t: f64) -> f64 {
        if t <= 0.0 || self.slopes.is_empty() {
            return self.xi[0];
        }
        let n = ((t / self.dt).floor() as usize).min(self.slopes.len() - 1);
        self.xi[n] + (t - self.time(n)) * self.slopes[n]
    }

    pub fn max_abs_slope(&self) -> f64 {
        self.slopes.iter().map(|s| s.abs()).fold(0.0, f64::max)
    }
}

/// Sample a Lipschitz curve at tⁿ = nΔt, n = 0..=steps. The slab slopes are the
/// exact slab averages of ξ̇.
pub fn discretize_path(curve: impl Fn(f64) -> f64, dt: f64, steps: usize, half_width: f64) -> Result<TurningPath> {
    let xi: Vec<f64> = (0..=steps).map(|n| curve(n as f64 * dt)).collect();
    if let Some(bad) = xi.iter().find(|x| !(x.abs() < half_width)) {
        return Err(invalid(
            "xi",
            format!("path value {bad} outside the computational domain"),
        ));
    }
    Ok(TurningPath::from_values(dt, xi))
}

/// Geometry of one time slab.
#[derive(Debug, Clone)]
pub struct StepMesh {
    pub slab: usize,
    pub layout: InterfaceLayout,
    pub bottom: Partition,
    pub top: Partition,
    pub xi_bottom: f64,
    pub xi_top: f64,
    pub slope: f64,
}

impl StepMesh {
    pub fn new(grid: &UniformGrid, slab: usize, xi_bottom: f64, xi_top: f64, slope: f64) -> Result<Self> {
        let layout = grid.interface_layout(xi_bottom)?;
        let bottom = layout.partition(grid, xi_bottom);
        let k = layout.interface_node();
        let lo = bottom.nodes[k - 1];
        let hi = bottom.nodes[k + 1];
        if !(xi_top > lo && xi_top < hi) {
            return Err(Error::CflViolation {
                slab,
                from: xi_bottom,
                to: xi_top,
                lo,
                hi,
            });
        }
        let mut top = bottom.clone();
        top.nodes[k] = xi_top;
        Ok(Self {
            slab,
            layout,
            bottom,
            top,
            xi_bottom,
            xi_top,
            slope,
        })
    }

    pub fn interface_node(&self) -> usize {
        self.layout.interface_node()
    }

    pub fn cell_count(&self) -> usize {
        self.bottom.cell_count()
    }
}

/// Mesh of slab `n` for a discretised path.
pub fn build_step_mesh(path: &TurningPath, n: usize, grid: &UniformGrid) -> Result<StepMesh> {
    if n >= path.slabs() {
        return Err(invalid(
            "n",
            format!("slab {n} beyond the path ({} slabs)", path.slabs()),
        ));
    }
    StepMesh::new(grid, n, path.xi[n], path.xi[n + 1], path.slopes[n])
}

/// Sparse matrix of intersection lengths |target_j ∩ source_i|, one row per
/// target cell.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlapMatrix {
    row_start: Vec<usize>,
    cols: Vec<usize>,
    lens: Vec<f64>,
    /// Row j is a single source cell with exactly the same bounds.
    identical: Vec<bool>,
}

impl OverlapMatrix {
    pub fn rows(&self) -> usize {
        self.identical.len()
    }

    pub fn row(&self, j: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_start[j]..self.row_start[j + 1];
        self.cols[r.clone()].iter().copied().zip(self.lens[r].iter().copied())
    }

    pub fn row_nnz(&self, j: usize) -> usize {
        self.row_start[j + 1] - self.row_start[j]
    }

    /// Length-weighted averages of `source_values` on the target cells.
    pub fn average(&self, source_values: &[f64]) -> Vec<f64> {
        (0..self.rows())
            .map(|j| {
                if self.identical[j] {
                    return source_values[self.cols[self.row_start[j]]];
                }
                let (num, den) = self
                    .row(j)
                    .fold((0.0, 0.0), |(n, d), (i, len)| (n + len * source_values[i], d + len));
                num / den
            })
            .collect()
    }
}

pub fn overlap_lengths(source: &Partition, target: &Partition) -> Result<OverlapMatrix> {
    if source.span() != target.span() {
        return Err(Error::GridMismatch(format!(
            "partitions cover {:?} and {:?}",
            source.span(),
            target.span()
        )));
    }
    let (ns, nt) = (source.cell_count(), target.cell_count());
    let mut row_start = Vec::with_capacity(nt + 1);
    let mut cols = Vec::with_capacity(nt + 4);
    let mut lens = Vec::with_capacity(nt + 4);
    let mut identical = Vec::with_capacity(nt);
    let mut i = 0;
    for j in 0..nt {
        row_start.push(cols.len());
        let (tl, tr) = target.bounds(j);
        while i < ns && source.nodes[i + 1] <= tl {
            i += 1;
        }
        let first = i;
        let mut k = i;
        while k < ns && source.nodes[k] < tr {
            let (sl, sr) = source.bounds(k);
            let len = sr.min(tr) - sl.max(tl);
            if len > 0.0 {
                cols.push(k);
                lens.push(len);
            }
            k += 1;
        }
        let single = cols.len() - row_start[j] == 1;
        identical.push(single && source.bounds(first) == (tl, tr));
    }
    row_start.push(cols.len());
    Ok(OverlapMatrix {
        row_start,
        cols,
        lens,
        identical,
    })
}
