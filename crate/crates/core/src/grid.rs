//! Dyadic grids, cell sets, grid functions and samplers.
//!
//! A [`DyadicGrid`] tiles a root cube `origin + [0, root_side)^dim` by
//! `2^(depth * dim)` half-open leaf cells. Leaf cells are addressed by a flat
//! row-major index: the last axis varies fastest.
//!
//! Functions live on leaves as one value per cell, interpreted as constant on
//! the cell and sampled at the cell center.

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};

/// Default cap on the number of leaf cells of a grid.
pub const DEFAULT_MAX_CELLS: usize = 1 << 24;

/// Significant digits used when values are written as decimal strings.
const JSON_DIGITS: usize = 17;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DyadicGrid {
    dim: usize,
    depth: u32,
    root_side: f64,
    origin: Vec<f64>,
}

/// Build a grid with the default memory cap.
pub fn make_grid(dim: usize, depth: u32, root_side: f64, origin: &[f64]) -> Result<DyadicGrid> {
    make_grid_with_cap(dim, depth, root_side, origin, DEFAULT_MAX_CELLS)
}

pub fn make_grid_with_cap(
    dim: usize,
    depth: u32,
    root_side: f64,
    origin: &[f64],
    max_cells: usize,
) -> Result<DyadicGrid> {
    if !(1..=3).contains(&dim) {
        return Err(Error::Dimension(dim));
    }
    if depth == 0 || depth > 60 {
        return Err(Error::Depth(depth));
    }
    if !(root_side.is_finite() && root_side > 0.0) {
        return Err(param("root_side", root_side, "root_side > 0"));
    }
    if origin.len() != dim || origin.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidGrid(format!(
            "origin must hold {dim} finite coordinates, got {origin:?}"
        )));
    }
    let cells = 1u128 << (u128::from(depth) * dim as u128).min(127);
    if cells > max_cells as u128 {
        return Err(Error::MemoryCap {
            cells,
            cap: max_cells,
        });
    }
    Ok(DyadicGrid {
        dim,
        depth,
        root_side,
        origin: origin.to_vec(),
    })
}

impl DyadicGrid {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn root_side(&self) -> f64 {
        self.root_side
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    /// Side length of a dyadic cube at `level` (0 is the root).
    pub fn side_at(&self, level: u32) -> f64 {
        self.root_side * (-(level as f64)).exp2()
    }

    pub fn leaf_side(&self) -> f64 {
        self.side_at(self.depth)
    }

    /// Lebesgue measure of one leaf cell.
    pub fn cell_volume(&self) -> f64 {
        self.leaf_side().powi(self.dim as i32)
    }

    pub fn cells_per_axis(&self) -> usize {
        1usize << self.depth
    }

    pub fn num_cells(&self) -> usize {
        1usize << (self.depth as usize * self.dim)
    }

    /// Euclidean diameter of the root cube.
    pub fn diameter(&self) -> f64 {
        self.root_side * (self.dim as f64).sqrt()
    }

    pub fn multi_index(&self, flat: usize) -> Vec<usize> {
        let mut idx = [0usize; 3];
        self.multi_index_into(flat, &mut idx);
        idx[..self.dim].to_vec()
    }

    pub(crate) fn multi_index_into(&self, flat: usize, idx: &mut [usize; 3]) {
        let n = self.cells_per_axis();
        let mut rest = flat;
        for a in (0..self.dim).rev() {
            idx[a] = rest % n;
            rest /= n;
        }
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        let n = self.cells_per_axis();
        idx.iter().fold(0, |acc, &i| acc * n + i)
    }

    /// Center of leaf cell `flat`.
    pub fn cell_center(&self, flat: usize) -> Vec<f64> {
        let mut c = [0.0; 3];
        self.cell_center_into(flat, &mut c);
        c[..self.dim].to_vec()
    }

    pub(crate) fn cell_center_into(&self, flat: usize, out: &mut [f64; 3]) {
        let mut idx = [0usize; 3];
        self.multi_index_into(flat, &mut idx);
        let h = self.leaf_side();
        for a in 0..self.dim {
            out[a] = self.origin[a] + (idx[a] as f64 + 0.5) * h;
        }
    }

    /// Leaf cell containing `point`, if the point lies in the root cube.
    pub fn locate(&self, point: &[f64]) -> Option<usize> {
        let n = self.cells_per_axis();
        let h = self.leaf_side();
        let mut idx = [0usize; 3];
        for a in 0..self.dim {
            let t = ((point[a] - self.origin[a]) / h).floor();
            if !(t >= 0.0 && t < n as f64) {
                return None;
            }
            idx[a] = t as usize;
        }
        Some(self.flat_index(&idx[..self.dim]))
    }

    /// Same frame (dimension, root, origin) at another depth.
    pub fn with_depth(&self, depth: u32) -> Result<DyadicGrid> {
        make_grid(self.dim, depth, self.root_side, &self.origin)
    }

    /// Same frame at another depth, with an explicit memory cap.
    pub fn with_depth_capped(&self, depth: u32, max_cells: usize) -> Result<DyadicGrid> {
        make_grid_with_cap(self.dim, depth, self.root_side, &self.origin, max_cells)
    }
}

#[derive(Deserialize)]
struct GridRepr {
    dim: usize,
    depth: u32,
    root_side: f64,
    origin: Vec<f64>,
}

impl<'de> Deserialize<'de> for DyadicGrid {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = GridRepr::deserialize(d)?;
        make_grid(r.dim, r.depth, r.root_side, &r.origin).map_err(serde::de::Error::custom)
    }
}

/// A dyadic cube of the grid's tree: `level` 0 is the root, `level == depth`
/// are the leaf cells. `index` is the per-axis position among the
/// `2^level` cubes of that level.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DyadicCube {
    pub level: u32,
    pub index: Vec<usize>,
}

impl DyadicCube {
    pub fn side(&self, grid: &DyadicGrid) -> f64 {
        grid.side_at(self.level)
    }

    /// Whether `other` is contained in `self` (cubes are nested or disjoint).
    pub fn contains(&self, other: &DyadicCube) -> bool {
        if other.level < self.level {
            return false;
        }
        let shift = other.level - self.level;
        self.index
            .iter()
            .zip(&other.index)
            .all(|(&a, &b)| b >> shift == a)
    }

    /// Flat indices of the leaf cells inside this cube.
    pub fn leaf_cells(&self, grid: &DyadicGrid) -> Vec<usize> {
        let shift = grid.depth() - self.level;
        let span = 1usize << shift;
        let dim = grid.dim();
        let total = span.pow(dim as u32);
        let mut out = Vec::with_capacity(total);
        let mut idx = [0usize; 3];
        for k in 0..total {
            let mut rest = k;
            for a in (0..dim).rev() {
                idx[a] = (self.index[a] << shift) + rest % span;
                rest /= span;
            }
            out.push(grid.flat_index(&idx[..dim]));
        }
        out
    }
}

/// A finite union of leaf cells.
#[derive(Clone, Debug, PartialEq)]
pub struct CellSet {
    grid: DyadicGrid,
    occupancy: Vec<bool>,
}

impl CellSet {
    pub fn empty(grid: &DyadicGrid) -> Self {
        CellSet {
            grid: grid.clone(),
            occupancy: vec![false; grid.num_cells()],
        }
    }

    pub fn full(grid: &DyadicGrid) -> Self {
        CellSet {
            grid: grid.clone(),
            occupancy: vec![true; grid.num_cells()],
        }
    }

    pub fn from_occupancy(grid: &DyadicGrid, occupancy: Vec<bool>) -> Result<Self> {
        if occupancy.len() != grid.num_cells() {
            return Err(Error::Invalid(format!(
                "occupancy has {} entries, grid has {} cells",
                occupancy.len(),
                grid.num_cells()
            )));
        }
        Ok(CellSet {
            grid: grid.clone(),
            occupancy,
        })
    }

    pub fn from_cells(grid: &DyadicGrid, cells: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut set = CellSet::empty(grid);
        for c in cells {
            if c >= set.occupancy.len() {
                return Err(Error::Invalid(format!("cell {c} outside the grid")));
            }
            set.occupancy[c] = true;
        }
        Ok(set)
    }

    /// Cells whose center satisfies `pred`.
    pub fn from_predicate(grid: &DyadicGrid, pred: impl Fn(&[f64]) -> bool) -> Self {
        let mut c = [0.0; 3];
        let occupancy = (0..grid.num_cells())
            .map(|i| {
                grid.cell_center_into(i, &mut c);
                pred(&c[..grid.dim()])
            })
            .collect();
        CellSet {
            grid: grid.clone(),
            occupancy,
        }
    }

    pub fn grid(&self) -> &DyadicGrid {
        &self.grid
    }

    pub fn occupancy(&self) -> &[bool] {
        &self.occupancy
    }

    pub fn contains(&self, cell: usize) -> bool {
        self.occupancy[cell]
    }

    pub fn insert(&mut self, cell: usize) {
        self.occupancy[cell] = true;
    }

    pub fn remove(&mut self, cell: usize) {
        self.occupancy[cell] = false;
    }

    pub fn count(&self) -> usize {
        self.occupancy.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.occupancy.iter().any(|&b| b)
    }

    pub fn cells(&self) -> impl Iterator<Item = usize> + '_ {
        self.occupancy
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
    }

    /// Lebesgue measure of the union of cells.
    pub fn measure(&self) -> f64 {
        self.count() as f64 * self.grid.cell_volume()
    }

    pub fn is_subset(&self, other: &CellSet) -> Result<bool> {
        self.check_grid(other)?;
        Ok(self
            .occupancy
            .iter()
            .zip(&other.occupancy)
            .all(|(&a, &b)| !a || b))
    }

    fn check_grid(&self, other: &CellSet) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    fn zip_with(&self, other: &CellSet, op: impl Fn(bool, bool) -> bool) -> Result<CellSet> {
        self.check_grid(other)?;
        Ok(CellSet {
            grid: self.grid.clone(),
            occupancy: self
                .occupancy
                .iter()
                .zip(&other.occupancy)
                .map(|(&a, &b)| op(a, b))
                .collect(),
        })
    }

    pub fn union(&self, other: &CellSet) -> Result<CellSet> {
        self.zip_with(other, |a, b| a || b)
    }

    pub fn intersection(&self, other: &CellSet) -> Result<CellSet> {
        self.zip_with(other, |a, b| a && b)
    }

    pub fn difference(&self, other: &CellSet) -> Result<CellSet> {
        self.zip_with(other, |a, b| a && !b)
    }

    /// Complement within the root cube.
    pub fn complement(&self) -> CellSet {
        CellSet {
            grid: self.grid.clone(),
            occupancy: self.occupancy.iter().map(|&b| !b).collect(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = CellSetDoc {
            grid: self.grid.clone(),
            cells: self.occupancy.iter().map(|&b| u8::from(b)).collect(),
        };
        Ok(serde_json::to_string(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<CellSet> {
        let doc: CellSetDoc = serde_json::from_str(text)?;
        if doc.cells.iter().any(|&c| c > 1) {
            return Err(Error::Invalid("cell flags must be 0 or 1".into()));
        }
        CellSet::from_occupancy(&doc.grid, doc.cells.iter().map(|&c| c == 1).collect())
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CellSetDoc {
    grid: DyadicGrid,
    cells: Vec<u8>,
}

/// Nonnegative values on leaf cells.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    grid: DyadicGrid,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: &DyadicGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.num_cells() {
            return Err(Error::Invalid(format!(
                "{} values for a grid of {} cells",
                values.len(),
                grid.num_cells()
            )));
        }
        for (cell, &value) in values.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::NonFinite { cell, value });
            }
            if value < 0.0 {
                return Err(Error::Negative { cell, value });
            }
        }
        Ok(GridFunction {
            grid: grid.clone(),
            values,
        })
    }

    pub fn zeros(grid: &DyadicGrid) -> Self {
        GridFunction {
            grid: grid.clone(),
            values: vec![0.0; grid.num_cells()],
        }
    }

    /// `|values|`, for callers holding signed samples.
    pub fn from_abs(grid: &DyadicGrid, values: &[f64]) -> Result<Self> {
        GridFunction::new(grid, values.iter().map(|v| v.abs()).collect())
    }

    /// Indicator of a cell set, scaled by `height`.
    pub fn indicator(set: &CellSet, height: f64) -> Result<Self> {
        GridFunction::new(
            set.grid(),
            set.occupancy()
                .iter()
                .map(|&b| if b { height } else { 0.0 })
                .collect(),
        )
    }

    pub fn grid(&self) -> &DyadicGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// `{cells : value > 0}`.
    pub fn support(&self) -> CellSet {
        self.superlevel(0.0)
    }

    /// `{cells : value > lambda}` (strict).
    pub fn superlevel(&self, lambda: f64) -> CellSet {
        CellSet {
            grid: self.grid.clone(),
            occupancy: self.values.iter().map(|&v| v > lambda).collect(),
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<GridFunction> {
        GridFunction::new(&self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn scale(&self, c: f64) -> Result<GridFunction> {
        self.map(|v| c * v)
    }

    pub fn powf(&self, nu: f64) -> Result<GridFunction> {
        self.map(|v| if v == 0.0 { 0.0 } else { v.powf(nu) })
    }

    pub fn add(&self, other: &GridFunction) -> Result<GridFunction> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        GridFunction::new(
            &self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + b)
                .collect(),
        )
    }

    /// Zero the function outside `set`.
    pub fn restrict(&self, set: &CellSet) -> Result<GridFunction> {
        if set.grid() != &self.grid {
            return Err(Error::GridMismatch);
        }
        Ok(GridFunction {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(set.occupancy())
                .map(|(&v, &b)| if b { v } else { 0.0 })
                .collect(),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = GridFunctionDoc {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| format_exact(v)).collect(),
        };
        Ok(serde_json::to_string(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<GridFunction> {
        let doc: GridFunctionDoc = serde_json::from_str(text)?;
        let values = doc
            .values
            .iter()
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|e| Error::Invalid(format!("bad value {s:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        GridFunction::new(&doc.grid, values)
    }
}

/// Decimal string with 17 significant digits; parses back to the same bits.
pub fn format_exact(v: f64) -> String {
    format!("{:.*e}", JSON_DIGITS - 1, v)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridFunctionDoc {
    grid: DyadicGrid,
    values: Vec<String>,
}

/// Restriction of a closed-form profile to `inner <= |x - center| < outer`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Truncation {
    pub center: Vec<f64>,
    pub inner: f64,
    pub outer: f64,
}

impl Truncation {
    fn admits(&self, x: &[f64]) -> bool {
        let r = distance(x, &self.center);
        r >= self.inner && r < self.outer
    }
}

/// Closed-form or tabulated function descriptors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Profile {
    /// `coeff * |x - center|^exponent`.
    RadialPower {
        center: Vec<f64>,
        exponent: f64,
        #[serde(default = "one")]
        coeff: f64,
    },
    Constant { value: f64 },
    /// Indicator of the open ball `B(center, radius)`.
    BallIndicator { center: Vec<f64>, radius: f64 },
    /// `offset + coeffs . x`.
    Affine {
        coeffs: Vec<f64>,
        #[serde(default)]
        offset: f64,
    },
    /// `height * (1 - |x - center|^2 / radius^2)_+^2`.
    Bump {
        center: Vec<f64>,
        radius: f64,
        #[serde(default = "one")]
        height: f64,
    },
    /// One value per leaf cell of `grid`; `domain` limits the cells used by
    /// finite differences.
    Tabulated {
        grid: DyadicGrid,
        values: Vec<f64>,
        #[serde(default)]
        domain: Option<Vec<u8>>,
    },
}

fn one() -> f64 {
    1.0
}

/// A profile with an optional truncation annulus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sampler {
    pub profile: Profile,
    #[serde(default)]
    pub truncation: Option<Truncation>,
}

impl Sampler {
    pub fn new(profile: Profile) -> Self {
        Sampler {
            profile,
            truncation: None,
        }
    }

    pub fn truncated(mut self, center: Vec<f64>, inner: f64, outer: f64) -> Self {
        self.truncation = Some(Truncation {
            center,
            inner,
            outer,
        });
        self
    }

    pub fn constant(value: f64) -> Self {
        Sampler::new(Profile::Constant { value })
    }

    pub fn radial_power(center: Vec<f64>, exponent: f64) -> Self {
        Sampler::new(Profile::RadialPower {
            center,
            exponent,
            coeff: 1.0,
        })
    }

    pub fn ball_indicator(center: Vec<f64>, radius: f64) -> Self {
        Sampler::new(Profile::BallIndicator { center, radius })
    }

    pub fn affine(coeffs: Vec<f64>, offset: f64) -> Self {
        Sampler::new(Profile::Affine { coeffs, offset })
    }

    pub fn bump(center: Vec<f64>, radius: f64) -> Self {
        Sampler::new(Profile::Bump {
            center,
            radius,
            height: 1.0,
        })
    }

    pub fn tabulated(grid: &DyadicGrid, values: Vec<f64>, domain: Option<&CellSet>) -> Self {
        Sampler::new(Profile::Tabulated {
            grid: grid.clone(),
            values,
            domain: domain.map(|d| d.occupancy().iter().map(|&b| u8::from(b)).collect()),
        })
    }

    fn admits(&self, x: &[f64]) -> bool {
        self.truncation.as_ref().is_none_or(|t| t.admits(x))
    }

    /// Signed value of a closed-form profile at `x`, truncation applied.
    /// Tabulated profiles have no pointwise value; use [`sample_signed`].
    pub fn value_at(&self, x: &[f64]) -> Result<f64> {
        if !self.admits(x) {
            return Ok(0.0);
        }
        Ok(match &self.profile {
            Profile::RadialPower {
                center,
                exponent,
                coeff,
            } => coeff * distance(x, center).powf(*exponent),
            Profile::Constant { value } => *value,
            Profile::BallIndicator { center, radius } => {
                if distance(x, center) < *radius {
                    1.0
                } else {
                    0.0
                }
            }
            Profile::Affine { coeffs, offset } => {
                offset + coeffs.iter().zip(x).map(|(c, xi)| c * xi).sum::<f64>()
            }
            Profile::Bump {
                center,
                radius,
                height,
            } => {
                let t = 1.0 - distance2(x, center) / (radius * radius);
                if t > 0.0 {
                    height * t * t
                } else {
                    0.0
                }
            }
            Profile::Tabulated { .. } => {
                return Err(Error::Invalid(
                    "tabulated profiles are only defined on their own grid".into(),
                ))
            }
        })
    }

    /// `|grad u|(x)` of a closed-form profile, truncation applied.
    pub fn gradient_norm_at(&self, x: &[f64]) -> Result<f64> {
        if !self.admits(x) {
            return Ok(0.0);
        }
        match &self.profile {
            Profile::RadialPower {
                center,
                exponent,
                coeff,
            } => {
                if *exponent == 0.0 {
                    return Ok(0.0);
                }
                Ok((coeff * exponent).abs() * distance(x, center).powf(exponent - 1.0))
            }
            Profile::Constant { .. } => Ok(0.0),
            Profile::Affine { coeffs, .. } => Ok(coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()),
            Profile::Bump {
                center,
                radius,
                height,
            } => {
                let r2 = radius * radius;
                let t = 1.0 - distance2(x, center) / r2;
                if t > 0.0 {
                    Ok(4.0 * height.abs() * t * distance(x, center) / r2)
                } else {
                    Ok(0.0)
                }
            }
            Profile::BallIndicator { .. } => Err(Error::NotDifferentiable(
                "ball indicators have no classical gradient".into(),
            )),
            Profile::Tabulated { .. } => Err(Error::Invalid(
                "tabulated profiles are only defined on their own grid".into(),
            )),
        }
    }
}

pub(crate) fn distance2(x: &[f64], c: &[f64]) -> f64 {
    x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum()
}

pub(crate) fn distance(x: &[f64], c: &[f64]) -> f64 {
    distance2(x, c).sqrt()
}

fn check_finite(values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(cell) => Err(Error::NonFinite {
            cell,
            value: values[cell],
        }),
        None => Ok(()),
    }
}

fn tabulated_parts<'a>(
    grid: &DyadicGrid,
    tab_grid: &DyadicGrid,
    values: &'a [f64],
) -> Result<&'a [f64]> {
    if tab_grid != grid {
        return Err(Error::GridMismatch);
    }
    if values.len() != grid.num_cells() {
        return Err(Error::Invalid("tabulated value count does not match its grid".into()));
    }
    Ok(values)
}

/// Signed midpoint samples of `sampler` on every leaf cell.
pub fn sample_signed(sampler: &Sampler, grid: &DyadicGrid) -> Result<Vec<f64>> {
    let values = match &sampler.profile {
        Profile::Tabulated {
            grid: tg, values, ..
        } => {
            let vals = tabulated_parts(grid, tg, values)?;
            let mut c = [0.0; 3];
            vals.iter()
                .enumerate()
                .map(|(i, &v)| {
                    grid.cell_center_into(i, &mut c);
                    if sampler.admits(&c[..grid.dim()]) {
                        v
                    } else {
                        0.0
                    }
                })
                .collect()
        }
        _ => {
            let mut c = [0.0; 3];
            (0..grid.num_cells())
                .map(|i| {
                    grid.cell_center_into(i, &mut c);
                    sampler.value_at(&c[..grid.dim()])
                })
                .collect::<Result<Vec<_>>>()?
        }
    };
    check_finite(&values)?;
    Ok(values)
}

/// Midpoint samples of `|u|`.
pub fn sample(sampler: &Sampler, grid: &DyadicGrid) -> Result<GridFunction> {
    GridFunction::from_abs(grid, &sample_signed(sampler, grid)?)
}

/// `|grad u|` at cell centers: closed form where available, central finite
/// differences (one-sided at the edge of the tabulated domain) otherwise.
pub fn gradient_magnitude(sampler: &Sampler, grid: &DyadicGrid) -> Result<GridFunction> {
    let values = match &sampler.profile {
        Profile::Tabulated {
            grid: tg,
            values,
            domain,
        } => {
            let vals = tabulated_parts(grid, tg, values)?;
            let inside: Vec<bool> = match domain {
                Some(d) if d.len() == vals.len() => d.iter().map(|&b| b != 0).collect(),
                Some(_) => {
                    return Err(Error::Invalid(
                        "tabulated domain mask does not match its grid".into(),
                    ))
                }
                None => vec![true; vals.len()],
            };
            let mut c = [0.0; 3];
            let mut out = finite_difference_gradient(grid, vals, &inside);
            for (i, g) in out.iter_mut().enumerate() {
                grid.cell_center_into(i, &mut c);
                if !sampler.admits(&c[..grid.dim()]) {
                    *g = 0.0;
                }
            }
            out
        }
        _ => {
            let mut c = [0.0; 3];
            (0..grid.num_cells())
                .map(|i| {
                    grid.cell_center_into(i, &mut c);
                    sampler.gradient_norm_at(&c[..grid.dim()])
                })
                .collect::<Result<Vec<_>>>()?
        }
    };
    check_finite(&values)?;
    GridFunction::new(grid, values)
}

fn finite_difference_gradient(grid: &DyadicGrid, values: &[f64], inside: &[bool]) -> Vec<f64> {
    let n = grid.cells_per_axis();
    let h = grid.leaf_side();
    let dim = grid.dim();
    let mut idx = [0usize; 3];
    (0..values.len())
        .map(|i| {
            if !inside[i] {
                return 0.0;
            }
            grid.multi_index_into(i, &mut idx);
            let mut sq = 0.0;
            for a in 0..dim {
                let stride = n.pow((dim - 1 - a) as u32);
                let lo = (idx[a] > 0 && inside[i - stride]).then(|| values[i - stride]);
                let hi = (idx[a] + 1 < n && inside[i + stride]).then(|| values[i + stride]);
                let d = match (lo, hi) {
                    (Some(l), Some(u)) => (u - l) / (2.0 * h),
                    (None, Some(u)) => (u - values[i]) / h,
                    (Some(l), None) => (values[i] - l) / h,
                    (None, None) => 0.0,
                };
                sq += d * d;
            }
            sq.sqrt()
        })
        .collect()
}
