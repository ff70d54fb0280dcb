//! Dyadic Hausdorff content of cell sets.
//!
//! The content `H^delta(S)` is the minimum of `sum side(Q)^delta` over covers
//! of `S` by dyadic cubes. Dyadic cubes are nested or disjoint, so the optimum
//! satisfies a tree recursion:
//!
//! ```text
//! cost(Q) = 0                                   if Q misses S
//! cost(Q) = min(side(Q)^delta, sum cost(child)) otherwise
//! ```
//!
//! Cubes larger than the root cost at least as much as the root, and for
//! `delta <= dim` splitting a fully occupied cube never helps, so the
//! recursion over the grid's own tree is exact. On ties the coarser cube is
//! kept.
//!
//! [`ContentTree`] stores the recursion in level arrays ordered by Morton
//! code, where the children of node `j` are `j * 2^dim + c`. Toggling a leaf
//! recomputes only its root path with the same arithmetic as a full build, so
//! incremental and from-scratch values agree bit for bit.

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::grid::{CellSet, DyadicCube, DyadicGrid};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContentParams {
    pub delta: f64,
}

impl ContentParams {
    pub fn new(delta: f64) -> Self {
        ContentParams { delta }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        check_delta(self.delta, dim)
    }
}

pub(crate) fn check_delta(delta: f64, dim: usize) -> Result<()> {
    if delta.is_finite() && delta > 0.0 && delta <= dim as f64 {
        Ok(())
    } else {
        Err(param("delta", delta, &format!("0 < delta <= {dim}")))
    }
}

/// An optimal dyadic cover and its cost.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoverSolution {
    pub delta: f64,
    pub value: f64,
    pub cover: Vec<DyadicCube>,
}

impl CoverSolution {
    /// `sum side(Q)^delta` over the cover, recomputed from the cubes.
    pub fn cover_cost(&self, grid: &DyadicGrid) -> f64 {
        self.cover
            .iter()
            .map(|q| q.side(grid).powf(self.delta))
            .sum()
    }

    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Doc<'a> {
            delta: String,
            value: String,
            cover: &'a [DyadicCube],
        }
        Ok(serde_json::to_string(&Doc {
            delta: crate::grid::format_exact(self.delta),
            value: crate::grid::format_exact(self.value),
            cover: &self.cover,
        })?)
    }
}

/// Dynamic-programming state of the content recursion for one grid and one
/// `delta`, supporting single-cell updates.
#[derive(Clone, Debug)]
pub struct ContentTree {
    grid: DyadicGrid,
    delta: f64,
    /// `side_at(k)^delta` for every level.
    side_pow: Vec<f64>,
    /// `cost[k][morton]` for levels `0..=depth`.
    cost: Vec<Vec<f64>>,
}

impl ContentTree {
    pub fn new(set: &CellSet, delta: f64) -> Result<Self> {
        let grid = set.grid().clone();
        check_delta(delta, grid.dim())?;
        let depth = grid.depth() as usize;
        let dim = grid.dim();
        let side_pow: Vec<f64> = (0..=depth)
            .map(|k| grid.side_at(k as u32).powf(delta))
            .collect();
        let mut cost: Vec<Vec<f64>> = (0..=depth).map(|k| vec![0.0; 1usize << (k * dim)]).collect();
        let leaf = side_pow[depth];
        for cell in set.cells() {
            cost[depth][morton(&grid, cell)] = leaf;
        }
        let mut tree = ContentTree {
            grid,
            delta,
            side_pow,
            cost,
        };
        for k in (0..depth).rev() {
            for j in 0..tree.cost[k].len() {
                tree.cost[k][j] = tree.combine(k, j);
            }
        }
        Ok(tree)
    }

    pub fn grid(&self) -> &DyadicGrid {
        &self.grid
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Current content of the tracked set.
    pub fn value(&self) -> f64 {
        self.cost[0][0]
    }

    fn children_sum(&self, level: usize, j: usize) -> f64 {
        let fan = 1usize << self.grid.dim();
        self.cost[level + 1][j * fan..(j + 1) * fan].iter().sum()
    }

    fn combine(&self, level: usize, j: usize) -> f64 {
        let sum = self.children_sum(level, j);
        if sum == 0.0 {
            0.0
        } else if self.side_pow[level] <= sum {
            self.side_pow[level]
        } else {
            sum
        }
    }

    /// Mark a leaf cell as occupied or empty and update its root path.
    pub fn set_cell(&mut self, cell: usize, occupied: bool) {
        let depth = self.grid.depth() as usize;
        let dim = self.grid.dim();
        let mut j = morton(&self.grid, cell);
        self.cost[depth][j] = if occupied { self.side_pow[depth] } else { 0.0 };
        for k in (0..depth).rev() {
            j >>= dim;
            self.cost[k][j] = self.combine(k, j);
        }
    }

    pub fn remove(&mut self, cell: usize) {
        self.set_cell(cell, false);
    }

    pub fn insert(&mut self, cell: usize) {
        self.set_cell(cell, true);
    }

    /// An optimal cover: cubes where the recursion chose to stop.
    pub fn cover(&self) -> Vec<DyadicCube> {
        let depth = self.grid.depth() as usize;
        let fan = 1usize << self.grid.dim();
        let mut out = Vec::new();
        let mut stack = vec![(0usize, 0usize)];
        while let Some((k, j)) = stack.pop() {
            if self.cost[k][j] == 0.0 {
                continue;
            }
            if k == depth || self.side_pow[k] <= self.children_sum(k, j) {
                out.push(cube_from_morton(&self.grid, k as u32, j));
            } else {
                // reversed so that children pop in Morton order
                for c in (0..fan).rev() {
                    stack.push((k + 1, j * fan + c));
                }
            }
        }
        out
    }

    pub fn solution(&self) -> CoverSolution {
        CoverSolution {
            delta: self.delta,
            value: self.value(),
            cover: self.cover(),
        }
    }
}

/// Morton code of a leaf cell: per level, one bit from each axis, axis 0
/// most significant.
fn morton(grid: &DyadicGrid, cell: usize) -> usize {
    let mut idx = [0usize; 3];
    grid.multi_index_into(cell, &mut idx);
    let dim = grid.dim();
    let depth = grid.depth() as usize;
    let mut code = 0usize;
    for b in (0..depth).rev() {
        for &i in &idx[..dim] {
            code = (code << 1) | ((i >> b) & 1);
        }
    }
    code
}

fn cube_from_morton(grid: &DyadicGrid, level: u32, code: usize) -> DyadicCube {
    let dim = grid.dim();
    let mut index = vec![0usize; dim];
    for b in 0..level as usize {
        for (a, slot) in index.iter_mut().enumerate() {
            let bit = (code >> (b * dim + (dim - 1 - a))) & 1;
            *slot |= bit << b;
        }
    }
    DyadicCube { level, index }
}

/// Exact dyadic content of `set` with an optimal cover.
pub fn dyadic_content(set: &CellSet, params: &ContentParams) -> Result<CoverSolution> {
    Ok(ContentTree::new(set, params.delta)?.solution())
}

/// Exact dyadic content of `set`, without cover extraction.
pub fn content_value(set: &CellSet, delta: f64) -> Result<f64> {
    Ok(ContentTree::new(set, delta)?.value())
}

/// Largest grid the brute-force enumerator accepts.
pub const ORACLE_MAX_CELLS: usize = 1 << 12;
/// Largest number of covers the brute-force enumerator will visit.
pub const ORACLE_MAX_COVERS: f64 = 1e7;

/// Exhaustive minimum over all dyadic covers of `set`.
///
/// Every antichain of the tree that covers the set is visited explicitly, so
/// the result does not rely on the optimal-substructure argument. Intended
/// for small instances.
pub fn content_oracle(set: &CellSet, params: &ContentParams) -> Result<f64> {
    Ok(content_oracle_multi(set, &[params.delta])?[0])
}

/// [`content_oracle`] for several exponents in one enumeration.
pub fn content_oracle_multi(set: &CellSet, deltas: &[f64]) -> Result<Vec<f64>> {
    let grid = set.grid();
    for &d in deltas {
        check_delta(d, grid.dim())?;
    }
    if grid.num_cells() > ORACLE_MAX_CELLS {
        return Err(Error::TooLarge(format!(
            "oracle limited to {ORACLE_MAX_CELLS} cells, grid has {}",
            grid.num_cells()
        )));
    }
    let words = grid.num_cells().div_ceil(64);
    let mut target = vec![0u64; words];
    for c in set.cells() {
        target[c / 64] |= 1 << (c % 64);
    }
    let root = DyadicCube {
        level: 0,
        index: vec![0; grid.dim()],
    };
    let covers = count_covers(grid, &root, &target);
    if covers > ORACLE_MAX_COVERS {
        return Err(Error::TooLarge(format!(
            "{covers:.3e} covers exceed the oracle budget of {ORACLE_MAX_COVERS:.0e}"
        )));
    }
    let mut search = OracleSearch {
        grid,
        deltas,
        target: &target,
        best: vec![f64::INFINITY; deltas.len()],
        chosen: vec![0u64; words],
        acc: vec![0.0; deltas.len()],
    };
    let mut pending = vec![root];
    search.run(&mut pending);
    Ok(search
        .best
        .into_iter()
        .map(|b| if b.is_finite() { b } else { 0.0 })
        .collect())
}

fn children(grid: &DyadicGrid, q: &DyadicCube) -> Vec<DyadicCube> {
    let dim = grid.dim();
    (0..1usize << dim)
        .map(|c| DyadicCube {
            level: q.level + 1,
            index: (0..dim)
                .map(|a| 2 * q.index[a] + ((c >> (dim - 1 - a)) & 1))
                .collect(),
        })
        .collect()
}

fn meets(grid: &DyadicGrid, q: &DyadicCube, target: &[u64]) -> bool {
    q.leaf_cells(grid)
        .into_iter()
        .any(|c| target[c / 64] >> (c % 64) & 1 == 1)
}

/// Number of covers the enumerator will visit below `q`.
fn count_covers(grid: &DyadicGrid, q: &DyadicCube, target: &[u64]) -> f64 {
    if !meets(grid, q, target) || q.level == grid.depth() {
        return 1.0;
    }
    1.0 + children(grid, q)
        .iter()
        .map(|c| count_covers(grid, c, target))
        .product::<f64>()
}

struct OracleSearch<'a> {
    grid: &'a DyadicGrid,
    deltas: &'a [f64],
    target: &'a [u64],
    best: Vec<f64>,
    chosen: Vec<u64>,
    acc: Vec<f64>,
}

impl OracleSearch<'_> {
    fn run(&mut self, pending: &mut Vec<DyadicCube>) {
        let Some(q) = pending.pop() else {
            self.finish();
            return;
        };
        if !meets(self.grid, &q, self.target) {
            self.run(pending);
        } else {
            // take q whole
            let cells = q.leaf_cells(self.grid);
            let saved = self.chosen.clone();
            for &c in &cells {
                self.chosen[c / 64] |= 1 << (c % 64);
            }
            let side = q.side(self.grid);
            let saved_acc = self.acc.clone();
            for (acc, &d) in self.acc.iter_mut().zip(self.deltas) {
                *acc += side.powf(d);
            }
            self.run(pending);
            self.acc = saved_acc;
            self.chosen = saved;

            // or split it
            if q.level < self.grid.depth() {
                let kids = children(self.grid, &q);
                let n = kids.len();
                pending.extend(kids);
                self.run(pending);
                pending.truncate(pending.len() - n);
            }
        }
        pending.push(q);
    }

    fn finish(&mut self) {
        let covered = self
            .target
            .iter()
            .zip(&self.chosen)
            .all(|(t, c)| t & !c == 0);
        assert!(covered, "enumerated family does not cover the set");
        for (b, &a) in self.best.iter_mut().zip(&self.acc) {
            *b = b.min(a);
        }
    }
}

/// Bounds on the ball content derived from a dyadic solution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bracket {
    pub lower: f64,
    pub upper: f64,
}

/// `lower / upper` for any bracket in dimension `dim` with exponent `delta`:
/// `1 / (2^dim * (2 sqrt(dim))^delta)`.
pub fn bracket_ratio(dim: usize, delta: f64) -> f64 {
    let n = dim as f64;
    1.0 / (n.exp2() * (2.0 * n.sqrt()).powf(delta))
}

/// Bracket the ball content `inf sum r_i^delta` of the covered set.
///
/// Upper: the circumscribed balls of the cover, radius `side * sqrt(dim) / 2`.
/// Lower: a ball of radius `r` meets at most `2^dim` dyadic cubes of the
/// smallest dyadic side `l >= 2r`, and `l < 4r` (or `l` is the root side,
/// which is cheaper still), so `H_dyadic <= 2^dim 4^delta H_ball`.
pub fn ball_cover_bracket(solution: &CoverSolution, grid: &DyadicGrid) -> Bracket {
    let n = grid.dim() as f64;
    let d = solution.delta;
    let upper = (n.sqrt() / 2.0).powf(d) * solution.cover_cost(grid);
    let lower = solution.value / (n.exp2() * 4f64.powf(d));
    Bracket { lower, upper }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubadditivityReport {
    pub content_a: f64,
    pub content_b: f64,
    pub content_union: f64,
    pub content_intersection: f64,
    /// `H(A) + H(B) - H(A u B) - H(A n B)`.
    pub slack: f64,
}

pub fn strong_subadditivity_check(
    a: &CellSet,
    b: &CellSet,
    params: &ContentParams,
) -> Result<SubadditivityReport> {
    let union = a.union(b)?;
    let inter = a.intersection(b)?;
    let content_a = content_value(a, params.delta)?;
    let content_b = content_value(b, params.delta)?;
    let content_union = content_value(&union, params.delta)?;
    let content_intersection = content_value(&inter, params.delta)?;
    Ok(SubadditivityReport {
        content_a,
        content_b,
        content_union,
        content_intersection,
        slack: content_a + content_b - content_union - content_intersection,
    })
}
