//! Fractional maximal operator, Riesz potential and Hedberg diagnostics.
//!
//! All operators extend `f` by zero outside its grid and evaluate at cell
//! centers. Distances between centers are `h * sqrt(m)` for an integer
//! `m = |k|^2`, `k` the index offset, so kernels and ball memberships are
//! tabulated by `m`.

use rustfft::num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::choquet::{choquet_integral, distribution, LorentzQ};
use crate::content::check_delta;
use crate::error::{param, Error, Result};
use crate::grid::{DyadicGrid, GridFunction};

/// Relative shrink applied to `(r/h)^2` so that a center at distance
/// exactly `r` counts as outside the open ball.
const BALL_RTOL: f64 = 1e-12;
/// Ratio of the geometric radius tail beyond the grid.
const TAIL_RATIO: f64 = 1.25;

/// Volume of the unit ball in dimension `dim`.
pub fn unit_ball_volume(dim: usize) -> f64 {
    let n = dim as f64;
    std::f64::consts::PI.powf(n / 2.0) / gamma(n / 2.0 + 1.0)
}

/// Surface area of the unit sphere in dimension `dim`.
pub fn unit_sphere_area(dim: usize) -> f64 {
    dim as f64 * unit_ball_volume(dim)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaximalParams {
    pub mu: f64,
    /// Radii of the supremum; `None` selects [`default_radii`].
    #[serde(default)]
    pub radii: Option<Vec<f64>>,
}

impl MaximalParams {
    pub fn new(mu: f64) -> Self {
        MaximalParams { mu, radii: None }
    }

    pub fn with_radii(mu: f64, radii: Vec<f64>) -> Self {
        MaximalParams {
            mu,
            radii: Some(radii),
        }
    }

    fn validate(&self, grid: &DyadicGrid) -> Result<()> {
        let n = grid.dim() as f64;
        if !(self.mu >= 0.0 && self.mu < n) {
            return Err(param("mu", self.mu, &format!("0 <= mu < {n}")));
        }
        if let Some(r) = &self.radii {
            let Some(&last) = r.last() else {
                return Err(Error::Invalid("radius set is empty".into()));
            };
            if r[0] <= 0.0 || r.windows(2).any(|w| !(w[0] < w[1])) || !last.is_finite() {
                return Err(Error::Invalid(
                    "radii must be positive, finite and strictly increasing".into(),
                ));
            }
            if last < grid.diameter() {
                return Err(param(
                    "radii",
                    last,
                    &format!("largest radius >= grid diameter {}", grid.diameter()),
                ));
            }
        }
        Ok(())
    }
}

/// Squared index distances between cells of one grid, deduplicated.
struct DistanceBins {
    /// Sorted distinct `m` realised by some pair of cells.
    values: Vec<u64>,
    /// `bin[m]` is the position of `m` in `values`.
    bin: Vec<u32>,
}

impl DistanceBins {
    fn new(grid: &DyadicGrid) -> Self {
        let n = grid.cells_per_axis() as u64;
        let dim = grid.dim();
        let max_m = dim as u64 * (n - 1) * (n - 1);
        let mut seen = vec![false; max_m as usize + 1];
        // sums of `dim` squares from 0..n
        let mut sums = vec![0u64];
        for _ in 0..dim {
            let mut next = Vec::with_capacity(sums.len() * n as usize);
            for &s in &sums {
                for k in 0..n {
                    next.push(s + k * k);
                }
            }
            next.sort_unstable();
            next.dedup();
            sums = next;
        }
        for s in sums {
            seen[s as usize] = true;
        }
        let mut values = Vec::new();
        let mut bin = vec![u32::MAX; seen.len()];
        for (m, &s) in seen.iter().enumerate() {
            if s {
                bin[m] = values.len() as u32;
                values.push(m as u64);
            }
        }
        DistanceBins { values, bin }
    }
}

/// Number of `k` in `Z^dim` with `|k|^2 < t`.
pub fn lattice_count(dim: usize, t: f64) -> u64 {
    if t <= 0.0 {
        return 0;
    }
    let mut k = t.sqrt().floor() as i64;
    while k > 0 && (k * k) as f64 >= t {
        k -= 1;
    }
    while (((k + 1) * (k + 1)) as f64) < t {
        k += 1;
    }
    if dim == 1 {
        return 2 * k as u64 + 1;
    }
    (-k..=k)
        .map(|j| lattice_count(dim - 1, t - (j * j) as f64))
        .sum()
}

fn squared_ratio(r: f64, h: f64) -> f64 {
    let s = r / h;
    s * s * (1.0 - BALL_RTOL)
}

/// Radii at which the discrete ball averages can attain their supremum:
/// `h sqrt(m)` for every squared center distance `m > 0` realised on the
/// grid, then a geometric tail up to twice the grid diameter.
pub fn default_radii(grid: &DyadicGrid) -> Vec<f64> {
    let bins = DistanceBins::new(grid);
    let h = grid.leaf_side();
    let mut radii: Vec<f64> = bins
        .values
        .iter()
        .filter(|&&m| m > 0)
        .map(|&m| h * (m as f64).sqrt())
        .collect();
    let stop = 2.0 * grid.diameter();
    let mut r = radii.last().copied().unwrap_or(h);
    while r < stop {
        r *= TAIL_RATIO;
        radii.push(r);
    }
    radii
}

/// `M_mu f(x) = sup_r r^mu (1/|B(x,r)|) int_B(x,r) f` at every cell center.
///
/// A cell lies in `B(x, r)` when its center does. The ball is measured by
/// the number of lattice cells it contains, counting cells outside the grid
/// where `f` vanishes, so averages of constants are exact.
pub fn maximal(f: &GridFunction, params: &MaximalParams) -> Result<GridFunction> {
    let grid = f.grid();
    params.validate(grid)?;
    let radii = match &params.radii {
        Some(r) => r.clone(),
        None => default_radii(grid),
    };
    let h = grid.leaf_side();
    let dim = grid.dim();
    let bins = DistanceBins::new(grid);
    // per radius: number of bins inside, lattice count, r^mu
    let plan: Vec<(usize, f64, f64)> = radii
        .iter()
        .map(|&r| {
            let t = squared_ratio(r, h);
            let inside = bins.values.partition_point(|&m| (m as f64) < t);
            (inside, lattice_count(dim, t) as f64, r.powf(params.mu))
        })
        .filter(|&(_, count, _)| count > 0.0)
        .collect();
    let support: Vec<(usize, f64)> = f
        .values()
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > 0.0)
        .map(|(i, &v)| (i, v))
        .collect();
    let positions: Vec<[i64; 3]> = (0..grid.num_cells()).map(|i| index_of(grid, i)).collect();
    let support_pos: Vec<([i64; 3], f64)> =
        support.iter().map(|&(i, v)| (positions[i], v)).collect();

    let values: Vec<f64> = (0..grid.num_cells())
        .into_par_iter()
        .map_init(
            || vec![0.0f64; bins.values.len() + 1],
            |acc, x| {
                if support_pos.is_empty() {
                    return 0.0;
                }
                acc.iter_mut().for_each(|a| *a = 0.0);
                let px = positions[x];
                for (py, v) in &support_pos {
                    let m = sq_dist(&px, py, dim);
                    acc[bins.bin[m as usize] as usize + 1] += v;
                }
                // acc[b] becomes the sum over bins below b
                for b in 1..acc.len() {
                    acc[b] += acc[b - 1];
                }
                plan.iter()
                    .map(|&(inside, count, rmu)| rmu * acc[inside] / count)
                    .fold(0.0, f64::max)
            },
        )
        .collect();
    GridFunction::new(grid, values)
}

fn index_of(grid: &DyadicGrid, cell: usize) -> [i64; 3] {
    let mut idx = [0usize; 3];
    grid.multi_index_into(cell, &mut idx);
    [idx[0] as i64, idx[1] as i64, idx[2] as i64]
}

fn sq_dist(a: &[i64; 3], b: &[i64; 3], dim: usize) -> u64 {
    (0..dim).map(|k| ((a[k] - b[k]) * (a[k] - b[k])) as u64).sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RieszParams {
    pub alpha: f64,
    pub c_alpha: f64,
}

/// `pi^(n/2) 2^alpha Gamma(alpha/2) / Gamma((n - alpha)/2)`.
pub fn c_alpha(dim: usize, alpha: f64) -> f64 {
    let n = dim as f64;
    std::f64::consts::PI.powf(n / 2.0) * alpha.exp2() * gamma(alpha / 2.0)
        / gamma((n - alpha) / 2.0)
}

impl RieszParams {
    pub fn new(dim: usize, alpha: f64) -> Result<Self> {
        check_alpha(dim, alpha)?;
        Ok(RieszParams {
            alpha,
            c_alpha: c_alpha(dim, alpha),
        })
    }
}

pub(crate) fn check_alpha(dim: usize, alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < dim as f64 {
        Ok(())
    } else {
        Err(param("alpha", alpha, &format!("0 < alpha < {dim}")))
    }
}

/// Kernel weight `int_cell |x - y|^(alpha - n) dy` by squared index distance.
///
/// Distinct cells use the midpoint value `h^n d^s`, `s = alpha - n`,
/// `d = h sqrt(m)`, with the second-order term of the midpoint rule added:
/// the cell average of `|z|^s` is `d^s (1 + s (s + n - 2) / (24 m))` up to
/// `O(m^-2)`. The self cell is replaced by the ball of equal volume centred
/// at `x`, whose integral is `sigma rho^alpha / alpha`.
fn kernel_table(grid: &DyadicGrid, alpha: f64) -> Vec<f64> {
    let n = grid.cells_per_axis() as u64;
    let dim = grid.dim();
    let h = grid.leaf_side();
    let vol = grid.cell_volume();
    let s = alpha - dim as f64;
    let curvature = s * (s + dim as f64 - 2.0) / 24.0;
    let max_m = dim as u64 * (n - 1) * (n - 1);
    let mut table: Vec<f64> = (0..=max_m)
        .map(|m| {
            let m = m as f64;
            vol * (h * m.sqrt()).powf(s) * (1.0 + curvature / m)
        })
        .collect();
    let rho = h * unit_ball_volume(dim).powf(-1.0 / dim as f64);
    table[0] = unit_sphere_area(dim) * rho.powf(alpha) / alpha;
    table
}

/// Grids at or below this many source-target pairs use direct summation.
pub const DIRECT_PAIR_LIMIT: f64 = 2e8;

/// `int f(y) |x - y|^(alpha - n) dy` at every cell center, without the
/// normalising constant.
pub fn fractional_integral(f: &GridFunction, alpha: f64) -> Result<GridFunction> {
    let support = f.values().iter().filter(|&&v| v > 0.0).count() as f64;
    if support * f.grid().num_cells() as f64 <= DIRECT_PAIR_LIMIT {
        fractional_integral_direct(f, alpha)
    } else {
        fractional_integral_fft(f, alpha)
    }
}

/// Direct summation over all source cells, in a fixed order.
pub fn fractional_integral_direct(f: &GridFunction, alpha: f64) -> Result<GridFunction> {
    let grid = f.grid();
    check_alpha(grid.dim(), alpha)?;
    let dim = grid.dim();
    let table = kernel_table(grid, alpha);
    let positions: Vec<[i64; 3]> = (0..grid.num_cells()).map(|i| index_of(grid, i)).collect();
    let sources: Vec<([i64; 3], f64)> = f
        .values()
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > 0.0)
        .map(|(i, &v)| (positions[i], v))
        .collect();
    let values: Vec<f64> = positions
        .par_iter()
        .map(|px| {
            sources
                .iter()
                .map(|(py, v)| v * table[sq_dist(px, py, dim) as usize])
                .sum()
        })
        .collect();
    GridFunction::new(grid, values)
}

/// The same discrete convolution as [`fractional_integral_direct`],
/// evaluated by zero-padded FFT.
pub fn fractional_integral_fft(f: &GridFunction, alpha: f64) -> Result<GridFunction> {
    let grid = f.grid();
    check_alpha(grid.dim(), alpha)?;
    let dim = grid.dim();
    let n = grid.cells_per_axis();
    let p = 2 * n;
    let total = p.pow(dim as u32);
    let table = kernel_table(grid, alpha);

    let padded_index = |idx: &[usize]| idx.iter().fold(0, |acc, &i| acc * p + i);
    let mut src = vec![Complex64::new(0.0, 0.0); total];
    let mut idx = [0usize; 3];
    for (i, &v) in f.values().iter().enumerate() {
        if v > 0.0 {
            grid.multi_index_into(i, &mut idx);
            src[padded_index(&idx[..dim])] = Complex64::new(v, 0.0);
        }
    }
    let mut ker = vec![Complex64::new(0.0, 0.0); total];
    for (j, slot) in ker.iter_mut().enumerate() {
        let mut rest = j;
        let mut m = 0usize;
        let mut valid = true;
        for _ in 0..dim {
            let k = rest % p;
            rest /= p;
            let off = if k < n {
                k
            } else if k > n {
                p - k
            } else {
                valid = false;
                0
            };
            m += off * off;
        }
        if valid {
            *slot = Complex64::new(table[m], 0.0);
        }
    }
    let mut planner = FftPlanner::<f64>::new();
    fft_nd(&mut planner, &mut src, p, dim, false);
    fft_nd(&mut planner, &mut ker, p, dim, false);
    for (a, b) in src.iter_mut().zip(&ker) {
        *a *= b;
    }
    fft_nd(&mut planner, &mut src, p, dim, true);
    let scale = 1.0 / total as f64;
    let values: Vec<f64> = (0..grid.num_cells())
        .map(|i| {
            grid.multi_index_into(i, &mut idx);
            (src[padded_index(&idx[..dim])].re * scale).max(0.0)
        })
        .collect();
    GridFunction::new(grid, values)
}

/// In-place transform of a `p^dim` row-major array along every axis.
fn fft_nd(planner: &mut FftPlanner<f64>, data: &mut [Complex64], p: usize, dim: usize, inverse: bool) {
    let fft = if inverse {
        planner.plan_fft_inverse(p)
    } else {
        planner.plan_fft_forward(p)
    };
    let mut line = vec![Complex64::new(0.0, 0.0); p];
    for axis in 0..dim {
        let stride = p.pow((dim - 1 - axis) as u32);
        let block = stride * p;
        for start in (0..data.len()).step_by(block) {
            for offset in 0..stride {
                let base = start + offset;
                for (k, slot) in line.iter_mut().enumerate() {
                    *slot = data[base + k * stride];
                }
                fft.process(&mut line);
                for (k, v) in line.iter().enumerate() {
                    data[base + k * stride] = *v;
                }
            }
        }
    }
}

/// `I_alpha f = (1 / c_alpha) int f(y) |x - y|^(alpha - n) dy`.
pub fn riesz(f: &GridFunction, params: &RieszParams) -> Result<GridFunction> {
    fractional_integral(f, params.alpha)?.scale(1.0 / params.c_alpha)
}

/// Exponents of the Hedberg estimate
/// `int |f| |x-y|^(alpha-n) <= C M_mu f(x)^theta ||f||^kappa`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HedbergParams {
    pub alpha: f64,
    pub mu: f64,
    pub p: f64,
    pub q: LorentzQ,
    pub delta: f64,
}

/// Which form of the estimate applies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HedbergBranch {
    /// `delta/n < p < delta/alpha`, Lorentz norm with second index
    /// `q (delta - p alpha)/(delta - mu p)`.
    Lorentz,
    /// `p = delta/n`, plain Choquet `L^p` norm.
    Endpoint,
}

impl HedbergParams {
    /// Check every constraint, naming the first violated one.
    pub fn branch(&self, dim: usize) -> Result<HedbergBranch> {
        let n = dim as f64;
        check_alpha(dim, self.alpha)?;
        check_delta(self.delta, dim)?;
        if !(self.mu >= 0.0 && self.mu < self.alpha) {
            return Err(param("mu", self.mu, "0 <= mu < alpha"));
        }
        let endpoint = self.delta / n;
        if (self.p - endpoint).abs() <= 1e-12 * endpoint {
            return Ok(HedbergBranch::Endpoint);
        }
        if !(self.p > endpoint && self.p < self.delta / self.alpha) {
            return Err(param(
                "p",
                self.p,
                &format!("delta/n < p < delta/alpha, i.e. {endpoint} < p < {}, or p = delta/n", self.delta / self.alpha),
            ));
        }
        if let LorentzQ::Finite(q) = self.q {
            if !(q > 0.0 && q.is_finite()) {
                return Err(param("q", q, "0 < q <= inf"));
            }
        }
        Ok(HedbergBranch::Lorentz)
    }

    /// `(delta - p alpha) / (delta - mu p)`.
    pub fn theta(&self) -> f64 {
        (self.delta - self.p * self.alpha) / (self.delta - self.mu * self.p)
    }

    /// `p (alpha - mu) / (delta - mu p)`.
    pub fn kappa(&self) -> f64 {
        self.p * (self.alpha - self.mu) / (self.delta - self.mu * self.p)
    }

    /// Norm of `f` in the denominator of the estimate.
    pub fn norm(&self, f: &GridFunction) -> Result<f64> {
        let dist = distribution(f, self.delta)?;
        match self.branch(f.grid().dim())? {
            HedbergBranch::Lorentz => dist.lorentz(self.p, self.q.scale(self.theta())),
            HedbergBranch::Endpoint => dist.p_norm(self.p),
        }
    }
}

/// Hedberg ratios at every cell center.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HedbergField {
    pub branch: HedbergBranch,
    pub norm: f64,
    pub ratios: Vec<f64>,
    /// Largest ratio and the cell attaining it.
    pub sup: f64,
    pub argmax: usize,
}

/// Ratio of the fractional integral to `M_mu f^theta ||f||^kappa` at every
/// cell. Cells where both sides vanish get ratio 0.
pub fn hedberg_field(f: &GridFunction, params: &HedbergParams) -> Result<HedbergField> {
    let grid = f.grid();
    let branch = params.branch(grid.dim())?;
    let norm = params.norm(f)?;
    let lhs = fractional_integral(f, params.alpha)?;
    let max = maximal(f, &MaximalParams::new(params.mu))?;
    let (theta, kappa) = (params.theta(), params.kappa());
    let scale = norm.powf(kappa);
    let ratios: Vec<f64> = lhs
        .values()
        .iter()
        .zip(max.values())
        .map(|(&l, &m)| {
            if l == 0.0 {
                0.0
            } else {
                assert!(m > 0.0, "maximal function vanishes where the potential does not");
                l / (m.powf(theta) * scale)
            }
        })
        .collect();
    let (argmax, sup) = ratios
        .iter()
        .copied()
        .enumerate()
        .fold((0, 0.0), |best, (i, r)| if r > best.1 { (i, r) } else { best });
    Ok(HedbergField {
        branch,
        norm,
        ratios,
        sup,
        argmax,
    })
}

/// Hedberg ratio at the cell containing `x`.
pub fn hedberg_ratio(f: &GridFunction, x: &[f64], params: &HedbergParams) -> Result<f64> {
    let cell = f
        .grid()
        .locate(x)
        .ok_or_else(|| Error::Invalid(format!("point {x:?} outside the grid")))?;
    Ok(hedberg_field(f, params)?.ratios[cell])
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct L1BoundReport {
    /// `int f dx`.
    pub lhs: f64,
    /// `[int f^(delta/n) dH^delta]^(n/delta)`.
    pub rhs: f64,
    pub ratio: f64,
    /// Proven bound on the ratio, `n / delta`.
    pub constant: f64,
}

/// Compare `int f dx` with `[int f^(delta/n) dH^delta]^(n/delta)`.
///
/// From `|S| <= H^delta(S)^(n/delta)` the ratio is at most `n/delta`.
pub fn l1_content_bound_check(f: &GridFunction, delta: f64) -> Result<L1BoundReport> {
    let grid = f.grid();
    check_delta(delta, grid.dim())?;
    let n = grid.dim() as f64;
    let lhs = f.values().iter().sum::<f64>() * grid.cell_volume();
    let rhs = choquet_integral(&f.powf(delta / n)?, delta)?.powf(n / delta);
    let ratio = if lhs == 0.0 { 0.0 } else { lhs / rhs };
    Ok(L1BoundReport {
        lhs,
        rhs,
        ratio,
        constant: n / delta,
    })
}
