//! Experiment runners: inequality checks under grid refinement, sharpness
//! sweeps, the interpolation family and a quick self test.
//!
//! Every runner takes a serializable config, embeds it in the report and
//! hashes it, so a report can be replayed from its own `params.config`.
//! Inequality checks pass when the ratio of the two sides is finite and grows
//! by less than [`GROWTH_LIMIT`] per refinement step; an unbounded constant
//! would instead grow geometrically in `1/h`.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::choquet::{choquet_integral, distribution, LorentzQ};
use crate::content::{
    check_delta, content_oracle_multi, content_value, strong_subadditivity_check, ContentParams,
};
use crate::domains::{make_john_domain, mean_value, JohnDomain, Shape, DEFAULT_C_BALL};
use crate::error::{param, Error, Result};
use crate::grid::{
    gradient_magnitude, make_grid, sample, sample_signed, CellSet, DyadicGrid, GridFunction,
    Profile, Sampler,
};
use crate::interp::{indicator_ratio, interpolation_norm, InterpPair};
use crate::operators::{check_alpha, hedberg_field, maximal, riesz, HedbergParams, MaximalParams, RieszParams};

/// Largest admissible ratio growth per refinement step.
pub const GROWTH_LIMIT: f64 = 1.2;
/// Minimum number of depths in a refinement check.
pub const MIN_DEPTHS: usize = 3;
/// Absolute slope tolerance of the sharpness fits.
pub const SLOPE_TOL: f64 = 0.05;
/// Largest relative variation `max/min - 1` of a norm that should stay bounded.
pub const VARIATION_LIMIT: f64 = 0.1;
/// The `b` scan may beat `b = u_B` by at most this factor.
pub const B_SCAN_LIMIT: f64 = 2.0;
/// Hedberg constants must stay within this factor in both directions.
pub const HEDBERG_BAND: f64 = 1.2;
/// Largest `max/min` of the interpolation ratio across a family.
pub const INTERP_SPREAD_LIMIT: f64 = 100.0;
/// Largest relative change of an interpolation ratio per refinement.
pub const INTERP_REFINE_TOL: f64 = 0.2;
const ENDPOINT_RTOL: f64 = 1e-12;

// ---------------------------------------------------------------------------
// reports

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesPoint {
    pub label: String,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Verdict {
    pub pass: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    pub version: String,
    /// SHA-256 of the experiment name and its config.
    pub config_hash: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentReport {
    pub experiment: String,
    /// `{"config": ..., "derived": ...}`; `config` alone reproduces the run.
    pub params: Value,
    pub series: Vec<SeriesPoint>,
    pub verdict: Verdict,
    pub provenance: Provenance,
}

/// Hex SHA-256 of `{"experiment": name, "config": config}` in compact JSON.
pub fn config_hash(experiment: &str, config: &Value) -> String {
    let doc = json!({ "experiment": experiment, "config": config });
    hex::encode(Sha256::digest(doc.to_string().as_bytes()))
}

impl ExperimentReport {
    fn new(
        experiment: &str,
        config: Value,
        derived: Value,
        series: Vec<SeriesPoint>,
        verdict: Verdict,
    ) -> Self {
        let config_hash = config_hash(experiment, &config);
        ExperimentReport {
            experiment: experiment.to_string(),
            params: json!({ "config": config, "derived": derived }),
            series,
            verdict,
            provenance: Provenance {
                version: env!("CARGO_PKG_VERSION").to_string(),
                config_hash,
            },
        }
    }

    /// First series value with this label.
    pub fn value(&self, label: &str) -> Option<f64> {
        self.series.iter().find(|s| s.label == label).map(|s| s.value)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// `label,value` rows with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("label,value\n");
        for s in &self.series {
            out.push_str(&format!("{},{}\n", s.label, s.value));
        }
        out
    }
}

fn point(label: impl Into<String>, value: f64) -> SeriesPoint {
    SeriesPoint {
        label: label.into(),
        value,
    }
}

// ---------------------------------------------------------------------------
// slopes and exponent windows

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Least-squares line through `(ln x, ln y)`.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> Result<SlopeFit> {
    if xs.len() != ys.len() {
        return Err(Error::Invalid(format!(
            "{} abscissae for {} ordinates",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 4 {
        return Err(Error::Invalid(format!(
            "slope fit needs at least 4 points, got {}",
            xs.len()
        )));
    }
    if let Some(v) = xs.iter().chain(ys).find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::Invalid(format!("slope fit needs positive finite data, got {v}")));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Invalid("slope fit needs distinct abscissae".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0)
    };
    Ok(SlopeFit {
        xs: xs.to_vec(),
        ys: ys.to_vec(),
        slope,
        intercept,
        r_squared,
    })
}

/// Interval open at `lo`, open or closed at `hi`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub lo: f64,
    pub hi: f64,
    pub hi_closed: bool,
}

impl Window {
    pub fn contains(&self, x: f64) -> bool {
        x > self.lo && (x < self.hi || (self.hi_closed && x == self.hi))
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let close = if self.hi_closed { ']' } else { ')' };
        write!(f, "({:.4}, {:.4}{close}", self.lo, self.hi)
    }
}

/// First Lorentz index of the Poincaré–Sobolev left side,
/// `p (delta - mu p) / (delta - p)`.
pub fn poincare_sobolev_exponent(delta: f64, mu: f64, p: f64) -> f64 {
    riesz_exponent(delta, mu, p, 1.0)
}

/// Lower bound `delta (delta - mu p) / (n (delta - p))` for its second index.
pub fn poincare_sobolev_q_floor(dim: usize, delta: f64, mu: f64, p: f64) -> f64 {
    riesz_q_floor(dim, delta, mu, p, 1.0)
}

/// Second index on the gradient side, `q (delta - p) / (delta - mu p)`.
pub fn poincare_sobolev_second_index(delta: f64, mu: f64, p: f64, q: f64) -> f64 {
    riesz_second_index(delta, mu, p, 1.0, q)
}

/// `p (delta - mu p) / (delta - p alpha)`.
pub fn riesz_exponent(delta: f64, mu: f64, p: f64, alpha: f64) -> f64 {
    p * (delta - mu * p) / (delta - p * alpha)
}

/// `delta (delta - mu p) / (n (delta - p alpha))`.
pub fn riesz_q_floor(dim: usize, delta: f64, mu: f64, p: f64, alpha: f64) -> f64 {
    delta * (delta - mu * p) / (dim as f64 * (delta - p * alpha))
}

/// `q (delta - p alpha) / (delta - mu p)`.
pub fn riesz_second_index(delta: f64, mu: f64, p: f64, alpha: f64, q: f64) -> f64 {
    q * (delta - p * alpha) / (delta - mu * p)
}

/// Admissible `eta` for the gradient sharpness family:
/// `(1 - delta/p, -(delta - mu p)/s]`.
pub fn sharpness_poincare_window(delta: f64, mu: f64, p: f64, s: f64) -> Window {
    Window {
        lo: 1.0 - delta / p,
        hi: -(delta - mu * p) / s,
        hi_closed: true,
    }
}

/// Predicted decay exponent `eta + (delta - mu p)/s`.
pub fn sharpness_poincare_slope(delta: f64, mu: f64, p: f64, s: f64, eta: f64) -> f64 {
    eta + (delta - mu * p) / s
}

/// Admissible `eta` for the potential sharpness family:
/// `(-delta/p, -(delta - mu p)/s - alpha)`.
pub fn sharpness_riesz_window(delta: f64, mu: f64, p: f64, s: f64, alpha: f64) -> Window {
    Window {
        lo: -delta / p,
        hi: -(delta - mu * p) / s - alpha,
        hi_closed: false,
    }
}

/// Predicted blow-up exponent `eta + alpha + (delta - mu p)/s`.
pub fn sharpness_riesz_slope(delta: f64, mu: f64, p: f64, s: f64, alpha: f64, eta: f64) -> f64 {
    eta + alpha + (delta - mu * p) / s
}

// ---------------------------------------------------------------------------
// shared pieces

/// Root cube of the grids used at every depth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Frame {
    pub origin: Vec<f64>,
    pub root_side: f64,
}

impl Frame {
    /// `[-half, half)^dim`.
    pub fn centered(dim: usize, half: f64) -> Self {
        Frame {
            origin: vec![-half; dim],
            root_side: 2.0 * half,
        }
    }

    pub fn dim(&self) -> usize {
        self.origin.len()
    }

    pub fn grid(&self, depth: u32) -> Result<DyadicGrid> {
        make_grid(self.dim(), depth, self.root_side, &self.origin)
    }

    fn contains_ball(&self, radius: f64) -> bool {
        self.origin
            .iter()
            .all(|&o| o <= -radius && o + self.root_side >= radius)
    }
}

impl Default for Frame {
    fn default() -> Self {
        Frame::centered(2, 1.0)
    }
}

/// A Choquet–Lorentz quasi-norm or a plain Choquet `L^p` norm.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NormSpec {
    Lorentz { p: f64, q: LorentzQ, delta: f64 },
    Strong { p: f64, delta: f64 },
}

impl NormSpec {
    pub fn eval(&self, f: &GridFunction) -> Result<f64> {
        match *self {
            NormSpec::Lorentz { p, q, delta } => distribution(f, delta)?.lorentz(p, q),
            NormSpec::Strong { p, delta } => distribution(f, delta)?.p_norm(p),
        }
    }
}

/// Which form of a two-branch inequality applies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Lorentz,
    Endpoint,
}

fn is_endpoint(p: f64, dim: usize, delta: f64) -> bool {
    let e = delta / dim as f64;
    (p - e).abs() <= ENDPOINT_RTOL * e
}

fn finite_q(q: LorentzQ) -> Result<f64> {
    match q {
        LorentzQ::Finite(v) if v.is_finite() && v > 0.0 => Ok(v),
        LorentzQ::Finite(v) => Err(param("q", v, "0 < q < inf")),
        LorentzQ::Infinity => Err(param("q", f64::INFINITY, "q finite")),
    }
}

/// Left and right norms of the order-`order` potential estimates: the
/// Poincaré–Sobolev form is `order = 1`.
fn fractional_specs(
    dim: usize,
    order: f64,
    mu: f64,
    delta: f64,
    p: f64,
    q: LorentzQ,
) -> Result<(Branch, NormSpec, NormSpec)> {
    check_delta(delta, dim)?;
    if !(mu >= 0.0 && mu < order) {
        return Err(param("mu", mu, format!("0 <= mu < {order}")));
    }
    let n = dim as f64;
    if !(p > 0.0 && p < delta / order) {
        return Err(param("p", p, format!("0 < p < delta/{order} = {}", delta / order)));
    }
    let left_p = riesz_exponent(delta, mu, p, order);
    let left_delta = delta - mu * p;
    if is_endpoint(p, dim, delta) {
        return Ok((
            Branch::Endpoint,
            NormSpec::Lorentz {
                p: left_p,
                q: LorentzQ::Infinity,
                delta: left_delta,
            },
            NormSpec::Strong { p, delta },
        ));
    }
    if !(p > delta / n) {
        return Err(param(
            "p",
            p,
            format!("delta/n < p < delta/{order}, i.e. ({}, {}), or p = delta/n", delta / n, delta / order),
        ));
    }
    let qv = finite_q(q)?;
    let floor = riesz_q_floor(dim, delta, mu, p, order);
    if !(qv > floor) {
        return Err(param("q", qv, format!("q > delta (delta - mu p) / (n (delta - p alpha)) = {floor}")));
    }
    Ok((
        Branch::Lorentz,
        NormSpec::Lorentz {
            p: left_p,
            q,
            delta: left_delta,
        },
        NormSpec::Lorentz {
            p,
            q: LorentzQ::Finite(riesz_second_index(delta, mu, p, order, qv)),
            delta,
        },
    ))
}

/// Same `L^{p,q}(H^delta)` norm on both sides, weak form at `p = delta/n`.
fn plain_specs(dim: usize, delta: f64, p: f64, q: LorentzQ) -> Result<(Branch, NormSpec, NormSpec)> {
    check_delta(delta, dim)?;
    if is_endpoint(p, dim, delta) {
        return Ok((
            Branch::Endpoint,
            NormSpec::Lorentz {
                p,
                q: LorentzQ::Infinity,
                delta,
            },
            NormSpec::Strong { p, delta },
        ));
    }
    let floor = delta / dim as f64;
    if !(p > floor && p.is_finite()) {
        return Err(param("p", p, format!("delta/n = {floor} < p < inf, or p = delta/n")));
    }
    let qv = finite_q(q)?;
    if !(qv > floor) {
        return Err(param("q", qv, format!("delta/n = {floor} < q < inf")));
    }
    let spec = NormSpec::Lorentz { p, q, delta };
    Ok((Branch::Lorentz, spec, spec))
}

fn check_depths(depths: &[u32]) -> Result<()> {
    if depths.len() < MIN_DEPTHS {
        return Err(Error::Invalid(format!(
            "need at least {MIN_DEPTHS} depths, got {}",
            depths.len()
        )));
    }
    if depths[0] == 0 || depths.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Invalid(format!(
            "depths {depths:?} must be positive and strictly increasing"
        )));
    }
    Ok(())
}

fn check_frame(frame: &Frame, sampler_dim: Option<usize>) -> Result<()> {
    let dim = frame.dim();
    if !(1..=3).contains(&dim) {
        return Err(Error::Dimension(dim));
    }
    if !(frame.root_side > 0.0 && frame.root_side.is_finite()) {
        return Err(Error::InvalidGrid(format!("root side {}", frame.root_side)));
    }
    if let Some(d) = sampler_dim {
        if d != dim {
            return Err(Error::Invalid(format!(
                "sampler has dimension {d}, frame has {dim}"
            )));
        }
    }
    Ok(())
}

/// Dimension implied by a sampler's coordinates, where it has any.
fn sampler_dim(s: &Sampler) -> Option<usize> {
    match &s.profile {
        Profile::RadialPower { center, .. }
        | Profile::BallIndicator { center, .. }
        | Profile::Bump { center, .. } => Some(center.len()),
        Profile::Affine { coeffs, .. } => Some(coeffs.len()),
        Profile::Tabulated { grid, .. } => Some(grid.dim()),
        Profile::Constant { .. } => s.truncation.as_ref().map(|t| t.center.len()),
    }
}

/// `lhs / (scale rhs)`, with `0` when the left side vanishes.
fn side_ratio(lhs: f64, rhs: f64, scale: f64) -> Result<f64> {
    if lhs == 0.0 {
        return Ok(0.0);
    }
    if !(rhs > 0.0) {
        return Err(Error::Invalid(format!(
            "right side vanishes while the left side is {lhs}"
        )));
    }
    Ok(lhs / (scale * rhs))
}

/// One refinement level of an inequality check.
struct Row {
    depth: u32,
    lhs: f64,
    rhs: f64,
    ratio: f64,
    extra: Vec<(&'static str, f64)>,
}

fn growth_verdict(depths: &[u32], ratios: &[f64], band: bool, series: &mut Vec<SeriesPoint>) -> Verdict {
    let mut failures = Vec::new();
    for (d, r) in depths.iter().zip(ratios) {
        if !r.is_finite() {
            failures.push(format!("ratio at depth {d} is not finite"));
        }
    }
    let mut worst: f64 = 0.0;
    for k in 1..ratios.len() {
        let (a, b) = (ratios[k - 1], ratios[k]);
        let (da, db) = (depths[k - 1], depths[k]);
        if a == 0.0 && b == 0.0 {
            series.push(point(format!("growth.d{da}_d{db}"), 1.0));
            continue;
        }
        if a == 0.0 || b == 0.0 {
            failures.push(format!("ratio jumps between 0 and nonzero from depth {da} to {db}"));
            continue;
        }
        let g = b / a;
        series.push(point(format!("growth.d{da}_d{db}"), g));
        worst = worst.max(g);
        if g >= GROWTH_LIMIT {
            failures.push(format!("growth {g:.4} >= {GROWTH_LIMIT} from depth {da} to {db}"));
        }
        if band && g <= 1.0 / HEDBERG_BAND {
            failures.push(format!("drop {g:.4} <= 1/{HEDBERG_BAND} from depth {da} to {db}"));
        }
    }
    if failures.is_empty() {
        Verdict {
            pass: true,
            detail: format!("finite ratios, largest growth per refinement {worst:.4}"),
        }
    } else {
        Verdict {
            pass: false,
            detail: failures.join("; "),
        }
    }
}

fn refinement_report(
    name: &str,
    config: Value,
    derived: Value,
    rows: Vec<Row>,
    band: bool,
) -> ExperimentReport {
    let mut series = Vec::new();
    for r in &rows {
        series.push(point(format!("d{}.lhs", r.depth), r.lhs));
        series.push(point(format!("d{}.rhs", r.depth), r.rhs));
        series.push(point(format!("d{}.ratio", r.depth), r.ratio));
        for (k, v) in &r.extra {
            series.push(point(format!("d{}.{k}", r.depth), *v));
        }
    }
    let depths: Vec<u32> = rows.iter().map(|r| r.depth).collect();
    let ratios: Vec<f64> = rows.iter().map(|r| r.ratio).collect();
    let verdict = growth_verdict(&depths, &ratios, band, &mut series);
    ExperimentReport::new(name, config, derived, series, verdict)
}

fn to_value<T: Serialize>(v: &T) -> Result<Value> {
    Ok(serde_json::to_value(v)?)
}

/// A domain sampled at one depth.
struct DomainSample {
    domain: JohnDomain,
    values: Vec<f64>,
    grad: GridFunction,
}

fn sample_domain(frame: &Frame, shape: &Shape, u: &Sampler, depth: u32) -> Result<DomainSample> {
    let grid = frame.grid(depth)?;
    let domain = make_john_domain(shape, &grid)?;
    let values = sample_signed(u, &grid)?;
    let grad = gradient_magnitude(u, &grid)?.restrict(&domain.cells)?;
    Ok(DomainSample {
        domain,
        values,
        grad,
    })
}

/// `|u - b|` on the domain, zero elsewhere.
fn deviation(values: &[f64], cells: &CellSet, b: f64) -> Result<GridFunction> {
    let mut w = vec![0.0; values.len()];
    for i in cells.cells() {
        w[i] = (values[i] - b).abs();
    }
    GridFunction::new(cells.grid(), w)
}

fn john_derived(shape: &Shape, dim: usize, c_ball: f64) -> Value {
    let (a, b, x0) = shape.john_constants();
    json!({
        "alpha_john": a,
        "beta_john": b,
        "center_x0": x0,
        "c_ball": c_ball,
        "mean_value_radius": c_ball * a * a / b,
        "poincare_scale": b * (b / a).powi(2 * dim as i32),
        "diameter": shape.diameter(),
    })
}

/// Golden-section search for the `b` minimizing `||u - b||` over the range
/// of `u` on the domain. Returns `(b, norm)` of the best point evaluated.
fn b_scan(values: &[f64], cells: &CellSet, spec: &NormSpec, seed_b: f64) -> Result<(f64, f64)> {
    let eval = |b: f64| -> Result<f64> { spec.eval(&deviation(values, cells, b)?) };
    let (mut lo, mut hi) = cells
        .cells()
        .map(|i| values[i])
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let mut best = (seed_b, eval(seed_b)?);
    let mut consider = |b: f64, v: f64| {
        if v < best.1 {
            best = (b, v);
        }
    };
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let mut f1 = eval(x1)?;
    let mut f2 = eval(x2)?;
    consider(x1, f1);
    consider(x2, f2);
    for _ in 0..60 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = eval(x1)?;
            consider(x1, f1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = eval(x2)?;
            consider(x2, f2);
        }
    }
    Ok(best)
}

// ---------------------------------------------------------------------------
// Poincaré checks

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoincareConfig {
    pub frame: Frame,
    pub shape: Shape,
    pub u: Sampler,
    pub p: f64,
    pub q: LorentzQ,
    pub delta: f64,
    pub depths: Vec<u32>,
    pub c_ball: f64,
    /// Run the golden-section scan over constants `b` at the finest depth.
    pub b_scan: bool,
}

impl Default for PoincareConfig {
    fn default() -> Self {
        PoincareConfig {
            frame: Frame::default(),
            shape: Shape::ball(vec![0.0, 0.0], 1.0),
            u: Sampler::affine(vec![1.0, 0.0], 0.0),
            p: 1.5,
            q: LorentzQ::Finite(1.5),
            delta: 2.0,
            depths: vec![4, 5, 6],
            c_ball: DEFAULT_C_BALL,
            b_scan: true,
        }
    }
}

/// `||u - u_B||_{L^{p,q}(H^delta)} / (beta (beta/alpha)^(2n) ||grad u||_{L^{p,q}(H^delta)})`
/// per depth, with an optional scan over constants at the finest depth.
pub fn poincare_check(cfg: &PoincareConfig) -> Result<ExperimentReport> {
    check_frame(&cfg.frame, sampler_dim(&cfg.u))?;
    check_depths(&cfg.depths)?;
    let dim = cfg.frame.dim();
    let (branch, spec, _) = plain_specs(dim, cfg.delta, cfg.p, cfg.q)?;
    if branch == Branch::Endpoint {
        return Err(param(
            "p",
            cfg.p,
            format!("p > delta/n = {}; use the weak check at the endpoint", cfg.delta / dim as f64),
        ));
    }
    let last = *cfg.depths.last().unwrap();
    let rows = cfg
        .depths
        .par_iter()
        .map(|&depth| {
            let s = sample_domain(&cfg.frame, &cfg.shape, &cfg.u, depth)?;
            let ball = s.domain.mean_value_ball(cfg.c_ball)?;
            let u_b = mean_value(&s.values, &s.domain, &ball)?;
            let lhs = spec.eval(&deviation(&s.values, &s.domain.cells, u_b)?)?;
            let rhs = spec.eval(&s.grad)?;
            let ratio = side_ratio(lhs, rhs, s.domain.poincare_scale())?;
            let mut extra = vec![("u_b", u_b)];
            if cfg.b_scan && depth == last && lhs > 0.0 {
                let (b, best) = b_scan(&s.values, &s.domain.cells, &spec, u_b)?;
                extra.push(("b_scan_b", b));
                extra.push(("b_scan_norm", best));
                extra.push(("b_scan_gain", lhs / best));
            }
            Ok(Row {
                depth,
                lhs,
                rhs,
                ratio,
                extra,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut derived = john_derived(&cfg.shape, dim, cfg.c_ball);
    derived["norm"] = to_value(&spec)?;
    derived["b_scan_limit"] = json!(B_SCAN_LIMIT);
    Ok(refinement_report("poincare", to_value(cfg)?, derived, rows, false))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoincareWeakConfig {
    pub frame: Frame,
    pub shape: Shape,
    pub u: Sampler,
    /// Must equal `delta / n`.
    pub p: f64,
    pub delta: f64,
    pub depths: Vec<u32>,
    pub c_ball: f64,
}

impl Default for PoincareWeakConfig {
    fn default() -> Self {
        PoincareWeakConfig {
            frame: Frame::default(),
            shape: Shape::ball(vec![0.0, 0.0], 1.0),
            u: Sampler::affine(vec![1.0, 0.0], 0.0),
            p: 1.0,
            delta: 2.0,
            depths: vec![4, 5, 6],
            c_ball: DEFAULT_C_BALL,
        }
    }
}

/// Endpoint form: `L^{p,inf}` on the left, Choquet `L^p` of the gradient on
/// the right, `p = delta / n`.
pub fn poincare_weak_check(cfg: &PoincareWeakConfig) -> Result<ExperimentReport> {
    check_frame(&cfg.frame, sampler_dim(&cfg.u))?;
    check_depths(&cfg.depths)?;
    let dim = cfg.frame.dim();
    check_delta(cfg.delta, dim)?;
    if !is_endpoint(cfg.p, dim, cfg.delta) {
        return Err(param("p", cfg.p, format!("p = delta/n = {}", cfg.delta / dim as f64)));
    }
    let left = NormSpec::Lorentz {
        p: cfg.p,
        q: LorentzQ::Infinity,
        delta: cfg.delta,
    };
    let right = NormSpec::Strong {
        p: cfg.p,
        delta: cfg.delta,
    };
    let rows = cfg
        .depths
        .par_iter()
        .map(|&depth| {
            let s = sample_domain(&cfg.frame, &cfg.shape, &cfg.u, depth)?;
            let ball = s.domain.mean_value_ball(cfg.c_ball)?;
            let u_b = mean_value(&s.values, &s.domain, &ball)?;
            let lhs = left.eval(&deviation(&s.values, &s.domain.cells, u_b)?)?;
            let rhs = right.eval(&s.grad)?;
            Ok(Row {
                depth,
                lhs,
                rhs,
                ratio: side_ratio(lhs, rhs, s.domain.poincare_scale())?,
                extra: vec![("u_b", u_b)],
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut derived = john_derived(&cfg.shape, dim, cfg.c_ball);
    derived["left"] = to_value(&left)?;
    derived["right"] = to_value(&right)?;
    Ok(refinement_report("poincare_weak", to_value(cfg)?, derived, rows, false))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoincareSobolevConfig {
    pub frame: Frame,
    pub shape: Shape,
    pub u: Sampler,
    pub mu: f64,
    pub delta: f64,
    pub p: f64,
    /// Ignored at the endpoint `p = delta / n`.
    pub q: LorentzQ,
    pub depths: Vec<u32>,
    pub c_ball: f64,
}

impl Default for PoincareSobolevConfig {
    fn default() -> Self {
        PoincareSobolevConfig {
            frame: Frame::default(),
            shape: Shape::ball(vec![0.0, 0.0], 1.0),
            u: Sampler::affine(vec![1.0, 0.0], 0.0),
            mu: 0.0,
            delta: 2.0,
            p: 1.5,
            q: LorentzQ::Finite(6.0),
            depths: vec![4, 5, 6],
            c_ball: DEFAULT_C_BALL,
        }
    }
}

/// `||u - u_B||` in `L^{p(delta-mu p)/(delta-p), q}(H^{delta - mu p})` over
/// `||grad u||` in `L^{p, q(delta-p)/(delta-mu p)}(H^delta)`; at `p = delta/n`
/// the left index becomes `inf` and the right norm is Choquet `L^p`.
pub fn poincare_sobolev_check(cfg: &PoincareSobolevConfig) -> Result<ExperimentReport> {
    check_frame(&cfg.frame, sampler_dim(&cfg.u))?;
    check_depths(&cfg.depths)?;
    let dim = cfg.frame.dim();
    let (branch, left, right) = fractional_specs(dim, 1.0, cfg.mu, cfg.delta, cfg.p, cfg.q)?;
    let rows = cfg
        .depths
        .par_iter()
        .map(|&depth| {
            let s = sample_domain(&cfg.frame, &cfg.shape, &cfg.u, depth)?;
            let ball = s.domain.mean_value_ball(cfg.c_ball)?;
            let u_b = mean_value(&s.values, &s.domain, &ball)?;
            let lhs = left.eval(&deviation(&s.values, &s.domain.cells, u_b)?)?;
            let rhs = right.eval(&s.grad)?;
            Ok(Row {
                depth,
                lhs,
                rhs,
                ratio: side_ratio(lhs, rhs, 1.0)?,
                extra: vec![("u_b", u_b)],
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut derived = john_derived(&cfg.shape, dim, cfg.c_ball);
    derived["branch"] = to_value(&branch)?;
    derived["left"] = to_value(&left)?;
    derived["right"] = to_value(&right)?;
    Ok(refinement_report("poincare_sobolev", to_value(cfg)?, derived, rows, false))
}

/// Family of the compactly supported estimate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompactForm {
    /// `||u||_{L^{p,q}} <= C diam ||grad u||_{L^{p,q}}`, weak form at `p = delta/n`.
    Diameter,
    /// Sobolev exponents as in the Poincaré–Sobolev check, no diameter factor.
    Sobolev,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompactSupportConfig {
    pub frame: Frame,
    pub shape: Shape,
    pub u: Sampler,
    pub form: CompactForm,
    /// Used by the Sobolev form only.
    pub mu: f64,
    pub delta: f64,
    pub p: f64,
    pub q: LorentzQ,
    pub depths: Vec<u32>,
    /// Cells between the support of `u` and the outside of the domain.
    pub margin_cells: usize,
}

impl Default for CompactSupportConfig {
    fn default() -> Self {
        CompactSupportConfig {
            frame: Frame::default(),
            shape: Shape::ball(vec![0.0, 0.0], 1.0),
            u: Sampler::bump(vec![0.0, 0.0], 0.5),
            form: CompactForm::Diameter,
            mu: 0.0,
            delta: 2.0,
            p: 1.5,
            q: LorentzQ::Finite(1.5),
            depths: vec![4, 5, 6],
            margin_cells: 2,
        }
    }
}

/// Every nonzero cell must have its whole `margin`-cell neighborhood inside
/// the domain.
fn check_margin(values: &[f64], cells: &CellSet, margin: usize) -> Result<()> {
    let grid = cells.grid();
    let dim = grid.dim();
    let n = grid.cells_per_axis() as i64;
    let m = margin as i64;
    let width = (2 * m + 1) as usize;
    let offsets = width.pow(dim as u32);
    for (i, &v) in values.iter().enumerate() {
        if v == 0.0 {
            continue;
        }
        let idx = grid.multi_index(i);
        for k in 0..offsets {
            let mut rest = k;
            let mut nb = Vec::with_capacity(dim);
            for &c in &idx {
                let off = (rest % width) as i64 - m;
                rest /= width;
                let j = c as i64 + off;
                if j < 0 || j >= n {
                    return Err(Error::SupportTouchesBoundary);
                }
                nb.push(j as usize);
            }
            if !cells.contains(grid.flat_index(&nb)) {
                return Err(Error::SupportTouchesBoundary);
            }
        }
    }
    Ok(())
}

/// `||u|| / (diam ||grad u||)` or the Sobolev-exponent ratio for `u`
/// supported strictly inside the domain.
pub fn compact_support_check(cfg: &CompactSupportConfig) -> Result<ExperimentReport> {
    check_frame(&cfg.frame, sampler_dim(&cfg.u))?;
    check_depths(&cfg.depths)?;
    let dim = cfg.frame.dim();
    let (branch, left, right) = match cfg.form {
        CompactForm::Diameter => plain_specs(dim, cfg.delta, cfg.p, cfg.q)?,
        CompactForm::Sobolev => fractional_specs(dim, 1.0, cfg.mu, cfg.delta, cfg.p, cfg.q)?,
    };
    let scale = match cfg.form {
        CompactForm::Diameter => cfg.shape.diameter(),
        CompactForm::Sobolev => 1.0,
    };
    let rows = cfg
        .depths
        .par_iter()
        .map(|&depth| {
            let s = sample_domain(&cfg.frame, &cfg.shape, &cfg.u, depth)?;
            check_margin(&s.values, &s.domain.cells, cfg.margin_cells)?;
            let lhs = left.eval(&deviation(&s.values, &s.domain.cells, 0.0)?)?;
            let rhs = right.eval(&s.grad)?;
            Ok(Row {
                depth,
                lhs,
                rhs,
                ratio: side_ratio(lhs, rhs, scale)?,
                extra: Vec::new(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let derived = json!({
        "branch": branch,
        "left": left,
        "right": right,
        "scale": scale,
    });
    Ok(refinement_report("compact_support", to_value(cfg)?, derived, rows, false))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoincareRadiiConfig {
    pub u: Sampler,
    pub radii: Vec<f64>,
    pub p: f64,
    pub q: LorentzQ,
    pub delta: f64,
    pub depths: Vec<u32>,
    pub c_ball: f64,
}

impl Default for PoincareRadiiConfig {
    fn default() -> Self {
        PoincareRadiiConfig {
            u: Sampler::affine(vec![1.0, 0.0], 0.0),
            radii: vec![1.0, 2.0, 4.0],
            p: 1.5,
            q: LorentzQ::Finite(1.5),
            delta: 2.0,
            depths: vec![4, 5, 6],
            c_ball: DEFAULT_C_BALL,
        }
    }
}

/// Poincaré ratios on centered balls of several radii, each in the frame
/// `[-k, k)^n`. Recorded without asserting a trend in `k`; passes when every
/// radius passes its own refinement check.
pub fn poincare_radii(cfg: &PoincareRadiiConfig) -> Result<ExperimentReport> {
    let dim = sampler_dim(&cfg.u).unwrap_or(2);
    let mut series = Vec::new();
    let mut failures = Vec::new();
    for &k in &cfg.radii {
        let sub = PoincareConfig {
            frame: Frame::centered(dim, k),
            shape: Shape::ball(vec![0.0; dim], k),
            u: cfg.u.clone(),
            p: cfg.p,
            q: cfg.q,
            delta: cfg.delta,
            depths: cfg.depths.clone(),
            c_ball: cfg.c_ball,
            b_scan: false,
        };
        let r = poincare_check(&sub)?;
        for s in r.series {
            series.push(point(format!("k{k}.{}", s.label), s.value));
        }
        if !r.verdict.pass {
            failures.push(format!("radius {k}: {}", r.verdict.detail));
        }
    }
    let verdict = Verdict {
        pass: failures.is_empty(),
        detail: if failures.is_empty() {
            "every radius refines stably".into()
        } else {
            failures.join("; ")
        },
    };
    Ok(ExperimentReport::new("poincare_radii", to_value(cfg)?, json!({}), series, verdict))
}

// ---------------------------------------------------------------------------
// operator checks

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RieszCheckConfig {
    pub frame: Frame,
    pub f: Sampler,
    pub alpha: f64,
    pub mu: f64,
    pub delta: f64,
    pub p: f64,
    /// Ignored at the endpoint `p = delta / n`.
    pub q: LorentzQ,
    pub depths: Vec<u32>,
}

impl Default for RieszCheckConfig {
    fn default() -> Self {
        RieszCheckConfig {
            frame: Frame::default(),
            f: Sampler::ball_indicator(vec![0.0, 0.0], 0.5),
            alpha: 1.0,
            mu: 0.0,
            delta: 2.0,
            p: 1.5,
            q: LorentzQ::Finite(6.0),
            depths: vec![4, 5, 6],
        }
    }
}

/// `||I_alpha f||` in `L^{p(delta-mu p)/(delta-p alpha), q}(H^{delta-mu p})`
/// over `||f||` in `L^{p, q(delta-p alpha)/(delta-mu p)}(H^delta)`, weak form
/// at `p = delta/n`. The potential is evaluated on the grid.
pub fn riesz_boundedness_check(cfg: &RieszCheckConfig) -> Result<ExperimentReport> {
    check_frame(&cfg.frame, sampler_dim(&cfg.f))?;
    check_depths(&cfg.depths)?;
    let dim = cfg.frame.dim();
    check_alpha(dim, cfg.alpha)?;
    let (branch, left, right) = fractional_specs(dim, cfg.alpha, cfg.mu, cfg.delta, cfg.p, cfg.q)?;
    let rp = RieszParams::new(dim, cfg.alpha)?;
    let rows = cfg
        .depths
        .par_iter()
        .map(|&depth| {
            let grid = cfg.frame.grid(depth)?;
            let f = sample(&cfg.f, &grid)?;
            let lhs = left.eval(&riesz(&f, &rp)?)?;
            let rhs = right.eval(&f)?;
            Ok(Row {
                depth,
                lhs,
                rhs,
                ratio: side_ratio(lhs, rhs, 1.0)?,
                extra: Vec::new(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let derived = json!({
        "branch": branch,
        "left": left,
        "right": right,
        "c_alpha": rp.c_alpha,
    });
    Ok(refinement_report("riesz", to_value(cfg)?, derived, rows, false))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaximalCheckConfig {
    pub frame: Frame,
    pub f: Sampler,
    pub delta: f64,
    pub mu: f64,
    pub p: f64,
    pub s: LorentzQ,
    pub r: LorentzQ,
    pub depths: Vec<u32>,
}

impl Default for MaximalCheckConfig {
    fn default() -> Self {
        MaximalCheckConfig {
            frame: Frame::default(),
            f: Sampler::ball_indicator(vec![0.0, 0.0], 0.5),
            delta: 2.0,
            mu: 0.0,
            p: 1.5,
            s: LorentzQ::Finite(1.5),
            r: LorentzQ::Finite(1.5),
            depths: vec![4, 5, 6],
        }
    }
}

fn maximal_specs(cfg: &MaximalCheckConfig, dim: usize) -> Result<(NormSpec, NormSpec)> {
    let n = dim as f64;
    check_delta(cfg.delta, dim)?;
    if !(cfg.mu >= 0.0 && cfg.mu < n) {
        return Err(param("mu", cfg.mu, format!("0 <= mu < {n}")));
    }
    let p_hi = if cfg.mu == 0.0 { f64::INFINITY } else { cfg.delta / cfg.mu };
    if !(cfg.p > cfg.delta / n && cfg.p < p_hi) {
        return Err(param("p", cfg.p, format!("delta/n < p < delta/mu, i.e. ({}, {p_hi})", cfg.delta / n)));
    }
    let r = match cfg.r {
        LorentzQ::Finite(r) if r > cfg.delta / n && r.is_finite() => r,
        other => {
            return Err(param("r", other.as_f64(), format!("delta/n = {} < r < inf", cfg.delta / n)))
        }
    };
    match cfg.s {
        LorentzQ::Finite(s) if s > 0.0 && s <= r => {}
        other => return Err(param("s", other.as_f64(), format!("0 < s <= r = {r}"))),
    }
    Ok((
        NormSpec::Lorentz {
            p: cfg.p,
            q: cfg.r,
            delta: cfg.delta - cfg.mu * cfg.p,
        },
        NormSpec::Lorentz {
            p: cfg.p,
            q: cfg.s,
            delta: cfg.delta,
        },
    ))
}

/// `||M_mu f||_{L^{p,r}(H^{delta-mu p})} / ||f||_{L^{p,s}(H^delta)}` per depth.
pub fn maximal_inequality_check(cfg: &MaximalCheckConfig) -> Result<ExperimentReport> {
    check_frame(&cfg.frame, sampler_dim(&cfg.f))?;
    check_depths(&cfg.depths)?;
    let dim = cfg.frame.dim();
    let (left, right) = maximal_specs(cfg, dim)?;
    let mp = MaximalParams::new(cfg.mu);
    let rows = cfg
        .depths
        .par_iter()
        .map(|&depth| {
            let grid = cfg.frame.grid(depth)?;
            let f = sample(&cfg.f, &grid)?;
            let lhs = left.eval(&maximal(&f, &mp)?)?;
            let rhs = right.eval(&f)?;
            Ok(Row {
                depth,
                lhs,
                rhs,
                ratio: side_ratio(lhs, rhs, 1.0)?,
                extra: Vec::new(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let derived = json!({ "left": left, "right": right });
    Ok(refinement_report("maximal", to_value(cfg)?, derived, rows, false))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HedbergCheckConfig {
    pub frame: Frame,
    pub f: Sampler,
    pub hedberg: HedbergParams,
    pub depths: Vec<u32>,
}

impl Default for HedbergCheckConfig {
    fn default() -> Self {
        HedbergCheckConfig {
            frame: Frame::default(),
            f: Sampler::ball_indicator(vec![0.0, 0.0], 0.5),
            hedberg: HedbergParams {
                alpha: 1.0,
                mu: 0.0,
                p: 1.5,
                q: LorentzQ::Finite(6.0),
                delta: 2.0,
            },
            depths: vec![5, 6, 7],
        }
    }
}

/// Empirical Hedberg constant `sup_x` of the pointwise ratio, per depth; it
/// must stay within [`HEDBERG_BAND`] between consecutive depths.
pub fn hedberg_check(cfg: &HedbergCheckConfig) -> Result<ExperimentReport> {
    check_frame(&cfg.frame, sampler_dim(&cfg.f))?;
    check_depths(&cfg.depths)?;
    let branch = cfg.hedberg.branch(cfg.frame.dim())?;
    let rows = cfg
        .depths
        .par_iter()
        .map(|&depth| {
            let grid = cfg.frame.grid(depth)?;
            let f = sample(&cfg.f, &grid)?;
            let field = hedberg_field(&f, &cfg.hedberg)?;
            let x = grid.cell_center(field.argmax);
            let mut extra = vec![("norm", field.norm)];
            const AXES: [&str; 3] = ["argmax_x0", "argmax_x1", "argmax_x2"];
            for (k, v) in x.iter().enumerate() {
                extra.push((AXES[k], *v));
            }
            Ok(Row {
                depth,
                lhs: field.sup,
                rhs: 1.0,
                ratio: field.sup,
                extra,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let derived = json!({
        "branch": branch,
        "theta": cfg.hedberg.theta(),
        "kappa": cfg.hedberg.kappa(),
    });
    Ok(refinement_report("hedberg", to_value(cfg)?, derived, rows, true))
}

// ---------------------------------------------------------------------------
// sharpness

/// A sharpness sweep: the slope fit and its report.
#[derive(Clone, Debug, PartialEq)]
pub struct SharpnessRun {
    pub fit: SlopeFit,
    pub report: ExperimentReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SharpnessPoincareConfig {
    pub frame: Frame,
    pub depth: u32,
    pub delta: f64,
    pub mu: f64,
    pub p: f64,
    pub s: f64,
    pub q: LorentzQ,
    /// Second index of the gradient norm; any positive value is admissible.
    pub q_grad: LorentzQ,
    pub eta: f64,
    pub eps_list: Vec<f64>,
    /// `u_eps = |x|^eta` on `eps <= |x| < outer`.
    pub outer: f64,
}

impl Default for SharpnessPoincareConfig {
    fn default() -> Self {
        SharpnessPoincareConfig {
            frame: Frame::default(),
            depth: 8,
            delta: 2.0,
            mu: 0.0,
            p: 1.05,
            s: 4.0,
            q: LorentzQ::Finite(4.0),
            q_grad: LorentzQ::Finite(64.0),
            eta: -0.8,
            eps_list: vec![0.25, 0.125, 0.0625, 0.03125],
            outer: 1.0,
        }
    }
}

fn check_eps(eps: &[f64], outer: f64, frame: &Frame) -> Result<()> {
    if eps.len() < 4 {
        return Err(Error::Invalid(format!("need at least 4 eps values, got {}", eps.len())));
    }
    if let Some(&e) = eps.iter().find(|&&e| !(e > 0.0 && e < outer)) {
        return Err(param("eps", e, format!("0 < eps < outer = {outer}")));
    }
    if !(outer > 0.0 && frame.contains_ball(outer)) {
        return Err(param("outer", outer, "ball B(0, outer) inside the frame"));
    }
    Ok(())
}

/// `max / min - 1`.
fn variation(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    max / min - 1.0
}

fn sharpness_series(
    eps: &[f64],
    left: &[f64],
    right: &[f64],
    fit: &SlopeFit,
    predicted: f64,
    right_variation: f64,
) -> Vec<SeriesPoint> {
    let mut series = Vec::new();
    for ((e, l), r) in eps.iter().zip(left).zip(right) {
        series.push(point(format!("eps={e}.left"), *l));
        series.push(point(format!("eps={e}.right"), *r));
    }
    series.push(point("slope", fit.slope));
    series.push(point("intercept", fit.intercept));
    series.push(point("r_squared", fit.r_squared));
    series.push(point("predicted_slope", predicted));
    series.push(point("right_variation", right_variation));
    series
}

/// Sweep `u_eps = |x|^eta 1_{eps <= |x| < outer}`: fit the decay of
/// `||u_eps||_{L^{s,q}(H^{delta-mu p})}` in `eps` and track
/// `||grad u_eps||_{L^{p,q_grad}(H^delta)}`.
pub fn sharpness_poincare(cfg: &SharpnessPoincareConfig) -> Result<SharpnessRun> {
    check_frame(&cfg.frame, None)?;
    let dim = cfg.frame.dim();
    check_delta(cfg.delta, dim)?;
    if !(cfg.mu >= 0.0 && cfg.mu < 1.0) {
        return Err(param("mu", cfg.mu, "0 <= mu < 1"));
    }
    if !(cfg.p > 0.0 && cfg.p < cfg.delta) {
        return Err(param("p", cfg.p, format!("0 < p < delta = {}", cfg.delta)));
    }
    let s_floor = poincare_sobolev_exponent(cfg.delta, cfg.mu, cfg.p);
    if !(cfg.s > s_floor && cfg.s.is_finite()) {
        return Err(param("s", cfg.s, format!("s > p (delta - mu p)/(delta - p) = {s_floor}")));
    }
    let window = sharpness_poincare_window(cfg.delta, cfg.mu, cfg.p, cfg.s);
    if !window.contains(cfg.eta) {
        return Err(param("eta", cfg.eta, format!("eta in {window}")));
    }
    cfg.q.validate()?;
    cfg.q_grad.validate()?;
    check_eps(&cfg.eps_list, cfg.outer, &cfg.frame)?;
    let left = NormSpec::Lorentz {
        p: cfg.s,
        q: cfg.q,
        delta: cfg.delta - cfg.mu * cfg.p,
    };
    let right = NormSpec::Lorentz {
        p: cfg.p,
        q: cfg.q_grad,
        delta: cfg.delta,
    };
    let grid = cfg.frame.grid(cfg.depth)?;
    let origin = vec![0.0; dim];
    let pairs = cfg
        .eps_list
        .par_iter()
        .map(|&eps| {
            let u = Sampler::radial_power(origin.clone(), cfg.eta).truncated(origin.clone(), eps, cfg.outer);
            let l = left.eval(&sample(&u, &grid)?)?;
            let r = right.eval(&gradient_magnitude(&u, &grid)?)?;
            Ok((l, r))
        })
        .collect::<Result<Vec<_>>>()?;
    let (lv, rv): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let fit = fit_slope(&cfg.eps_list, &lv)?;
    let predicted = sharpness_poincare_slope(cfg.delta, cfg.mu, cfg.p, cfg.s, cfg.eta);
    let var = variation(&rv);
    let slope_ok = (fit.slope - predicted).abs() <= SLOPE_TOL;
    let var_ok = var < VARIATION_LIMIT;
    let verdict = Verdict {
        pass: slope_ok && var_ok,
        detail: format!(
            "slope {:.4} vs predicted {predicted:.4} (tolerance {SLOPE_TOL}): {}; gradient norm variation {:.4} (limit {VARIATION_LIMIT}): {}",
            fit.slope,
            if slope_ok { "ok" } else { "FAIL" },
            var,
            if var_ok { "ok" } else { "FAIL" },
        ),
    };
    let series = sharpness_series(&cfg.eps_list, &lv, &rv, &fit, predicted, var);
    let derived = json!({ "window": window, "left": left, "right": right });
    let report = ExperimentReport::new("sharpness_poincare", to_value(cfg)?, derived, series, verdict);
    Ok(SharpnessRun { fit, report })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SharpnessRieszConfig {
    pub frame: Frame,
    pub depth: u32,
    pub delta: f64,
    pub mu: f64,
    pub alpha: f64,
    pub p: f64,
    pub s: f64,
    pub q: LorentzQ,
    /// Second index of the norm of `f_eps`; any positive value is admissible.
    pub q_tilde: LorentzQ,
    pub eta: f64,
    pub eps_list: Vec<f64>,
    /// `f_eps = |x|^eta` on `eps <= |x| < outer`.
    pub outer: f64,
}

impl Default for SharpnessRieszConfig {
    fn default() -> Self {
        SharpnessRieszConfig {
            frame: Frame::default(),
            depth: 9,
            delta: 2.0,
            mu: 0.0,
            alpha: 0.5,
            p: 1.2,
            s: 4.0,
            q: LorentzQ::Finite(8.0),
            q_tilde: LorentzQ::Finite(5.6),
            eta: -1.3,
            eps_list: vec![0.125, 0.0625, 0.03125, 0.015625],
            outer: 1.0,
        }
    }
}

/// Sweep `f_eps = |x|^eta 1_{eps <= |x| < outer}`: fit the growth of
/// `||I_alpha f_eps||_{L^{s,q}(H^{delta-mu p})}` in `eps` and track
/// `||f_eps||_{L^{p,q_tilde}(H^delta)}`. The verdict asks for a decay
/// exponent at most the predicted one (plus tolerance).
pub fn sharpness_riesz(cfg: &SharpnessRieszConfig) -> Result<SharpnessRun> {
    check_frame(&cfg.frame, None)?;
    let dim = cfg.frame.dim();
    check_alpha(dim, cfg.alpha)?;
    check_delta(cfg.delta, dim)?;
    if !(cfg.mu >= 0.0 && cfg.mu < cfg.alpha) {
        return Err(param("mu", cfg.mu, format!("0 <= mu < alpha = {}", cfg.alpha)));
    }
    let n = dim as f64;
    if !(cfg.p > cfg.delta / n && cfg.p < cfg.delta / cfg.alpha) {
        return Err(param(
            "p",
            cfg.p,
            format!("delta/n < p < delta/alpha, i.e. ({}, {})", cfg.delta / n, cfg.delta / cfg.alpha),
        ));
    }
    let s_floor = riesz_exponent(cfg.delta, cfg.mu, cfg.p, cfg.alpha);
    if !(cfg.s > s_floor && cfg.s.is_finite()) {
        return Err(param("s", cfg.s, format!("s > p (delta - mu p)/(delta - p alpha) = {s_floor}")));
    }
    let window = sharpness_riesz_window(cfg.delta, cfg.mu, cfg.p, cfg.s, cfg.alpha);
    if !window.contains(cfg.eta) {
        return Err(param("eta", cfg.eta, format!("eta in {window}")));
    }
    cfg.q.validate()?;
    cfg.q_tilde.validate()?;
    check_eps(&cfg.eps_list, cfg.outer, &cfg.frame)?;
    let left = NormSpec::Lorentz {
        p: cfg.s,
        q: cfg.q,
        delta: cfg.delta - cfg.mu * cfg.p,
    };
    let right = NormSpec::Lorentz {
        p: cfg.p,
        q: cfg.q_tilde,
        delta: cfg.delta,
    };
    let grid = cfg.frame.grid(cfg.depth)?;
    let rp = RieszParams::new(dim, cfg.alpha)?;
    let origin = vec![0.0; dim];
    let pairs = cfg
        .eps_list
        .par_iter()
        .map(|&eps| {
            let f = Sampler::radial_power(origin.clone(), cfg.eta).truncated(origin.clone(), eps, cfg.outer);
            let f = sample(&f, &grid)?;
            let l = left.eval(&riesz(&f, &rp)?)?;
            let r = right.eval(&f)?;
            Ok((l, r))
        })
        .collect::<Result<Vec<_>>>()?;
    let (lv, rv): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let fit = fit_slope(&cfg.eps_list, &lv)?;
    let predicted = sharpness_riesz_slope(cfg.delta, cfg.mu, cfg.p, cfg.s, cfg.alpha, cfg.eta);
    let var = variation(&rv);
    let slope_ok = fit.slope <= predicted + SLOPE_TOL;
    let var_ok = var < VARIATION_LIMIT;
    let verdict = Verdict {
        pass: slope_ok && var_ok,
        detail: format!(
            "slope {:.4} <= predicted {predicted:.4} + {SLOPE_TOL}: {}; norm of f_eps variation {:.4} (limit {VARIATION_LIMIT}): {}",
            fit.slope,
            if slope_ok { "ok" } else { "FAIL" },
            var,
            if var_ok { "ok" } else { "FAIL" },
        ),
    };
    let series = sharpness_series(&cfg.eps_list, &lv, &rv, &fit, predicted, var);
    let derived = json!({ "window": window, "left": left, "right": right, "c_alpha": rp.c_alpha });
    let report = ExperimentReport::new("sharpness_riesz", to_value(cfg)?, derived, series, verdict);
    Ok(SharpnessRun { fit, report })
}

// ---------------------------------------------------------------------------
// interpolation family

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InterpFamilyConfig {
    pub frame: Frame,
    pub pair: InterpPair,
    /// Consecutive depths compared for refinement stability.
    pub depths: Vec<u32>,
    pub count: usize,
    pub seed: u64,
}

impl Default for InterpFamilyConfig {
    fn default() -> Self {
        InterpFamilyConfig {
            frame: Frame::default(),
            pair: InterpPair {
                p0: 1.0,
                p1: 3.0,
                delta: 1.5,
                eta: 0.4,
                q: 2.0,
            },
            depths: vec![5, 6],
            count: 50,
            seed: 20_240_607,
        }
    }
}

/// Seeded mix of ball indicators, bumps, truncated radial powers and
/// truncated affine functions, all supported in `[-0.9, 0.9]^dim`.
pub fn interp_family(dim: usize, count: usize, seed: u64) -> Vec<Sampler> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|k| {
            let center: Vec<f64> = (0..dim).map(|_| rng.gen_range(-0.4..0.4)).collect();
            match k % 4 {
                0 => Sampler::ball_indicator(center, rng.gen_range(0.15..0.5)),
                1 => Sampler::new(Profile::Bump {
                    center,
                    radius: rng.gen_range(0.2..0.5),
                    height: rng.gen_range(0.5..2.0),
                }),
                2 => {
                    let inner = rng.gen_range(0.05..0.15);
                    let outer = rng.gen_range(0.3..0.5);
                    Sampler::new(Profile::RadialPower {
                        center: center.clone(),
                        exponent: rng.gen_range(-0.8..-0.1),
                        coeff: rng.gen_range(0.5..2.0),
                    })
                    .truncated(center, inner, outer)
                }
                _ => {
                    let coeffs: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
                    let offset = rng.gen_range(-1.0..1.0);
                    let outer = rng.gen_range(0.3..0.5);
                    Sampler::affine(coeffs, offset).truncated(center, 0.0, outer)
                }
            }
        })
        .collect()
}

/// Ratio of the interpolation norm to the direct Lorentz norm over a seeded
/// family, at consecutive depths.
pub fn interp_family_check(cfg: &InterpFamilyConfig) -> Result<ExperimentReport> {
    check_frame(&cfg.frame, None)?;
    cfg.pair.validate()?;
    let dim = cfg.frame.dim();
    check_delta(cfg.pair.delta, dim)?;
    if cfg.depths.len() < 2 || cfg.depths.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Invalid(format!(
            "need at least 2 strictly increasing depths, got {:?}",
            cfg.depths
        )));
    }
    if cfg.count == 0 {
        return Err(Error::Invalid("empty family".into()));
    }
    if !cfg.frame.contains_ball(0.9) {
        return Err(Error::Invalid("frame must contain [-0.9, 0.9]^dim".into()));
    }
    let family = interp_family(dim, cfg.count, cfg.seed);
    let grids = cfg
        .depths
        .iter()
        .map(|&d| cfg.frame.grid(d))
        .collect::<Result<Vec<_>>>()?;
    // ratios[k][j]: function k at depth j
    let ratios = family
        .par_iter()
        .map(|u| {
            grids
                .iter()
                .map(|g| Ok(interpolation_norm(&sample(u, g)?, &cfg.pair)?.ratio))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let mut series = Vec::new();
    let mut max_change: f64 = 0.0;
    let mut failures = Vec::new();
    for (k, rs) in ratios.iter().enumerate() {
        for (j, r) in rs.iter().enumerate() {
            series.push(point(format!("f{k}.d{}.ratio", cfg.depths[j]), *r));
            if !(r.is_finite() && *r > 0.0) {
                failures.push(format!("function {k} has ratio {r} at depth {}", cfg.depths[j]));
            }
        }
        for w in rs.windows(2) {
            max_change = max_change.max((w[1] / w[0] - 1.0).abs());
        }
    }
    let finest: Vec<f64> = ratios.iter().map(|rs| *rs.last().unwrap()).collect();
    let lo = finest.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = finest.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let spread = hi / lo;
    series.push(point("ratio_min", lo));
    series.push(point("ratio_max", hi));
    series.push(point("spread", spread));
    series.push(point("max_refinement_change", max_change));
    if !(spread <= INTERP_SPREAD_LIMIT) {
        failures.push(format!("spread {spread:.4} > {INTERP_SPREAD_LIMIT}"));
    }
    if !(max_change <= INTERP_REFINE_TOL) {
        failures.push(format!("refinement change {max_change:.4} > {INTERP_REFINE_TOL}"));
    }
    let verdict = Verdict {
        pass: failures.is_empty(),
        detail: if failures.is_empty() {
            format!("ratios in [{lo:.4}, {hi:.4}], spread {spread:.4}, refinement change {max_change:.4}")
        } else {
            failures.join("; ")
        },
    };
    let derived = json!({
        "p": cfg.pair.p(),
        "indicator_ratio": indicator_ratio(&cfg.pair),
        "family": family,
    });
    Ok(ExperimentReport::new("interp_family", to_value(cfg)?, derived, series, verdict))
}

// ---------------------------------------------------------------------------
// self test

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelftestConfig {
    pub seed: u64,
    /// Random instances per family.
    pub samples: usize,
}

impl Default for SelftestConfig {
    fn default() -> Self {
        SelftestConfig {
            seed: 7,
            samples: 100,
        }
    }
}

fn random_set(grid: &DyadicGrid, rng: &mut ChaCha8Rng) -> CellSet {
    let density = rng.gen_range(0.05..0.95);
    let occ = (0..grid.num_cells()).map(|_| rng.gen_bool(density)).collect();
    CellSet::from_occupancy(grid, occ).expect("occupancy sized to the grid")
}

fn random_function(grid: &DyadicGrid, rng: &mut ChaCha8Rng) -> Result<GridFunction> {
    let levels: Vec<f64> = (0..4).map(|_| rng.gen_range(0.1..3.0)).collect();
    let values = (0..grid.num_cells())
        .map(|_| {
            if rng.gen_bool(0.4) {
                0.0
            } else {
                levels[rng.gen_range(0..levels.len())]
            }
        })
        .collect();
    GridFunction::new(grid, values)
}

fn rel_err(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Quick identity suite: cover DP against brute force, `delta = n`
/// coincidence with Lebesgue measure, strong subadditivity, `L^{p,p} = L^p`
/// and the factor-2 bound on the Choquet integral of a sum.
pub fn selftest(cfg: &SelftestConfig) -> Result<ExperimentReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let g1 = make_grid(1, 4, 1.0, &[0.0])?;
    let g2 = make_grid(2, 3, 1.0, &[0.0, 0.0])?;
    let g3 = make_grid(2, 4, 1.0, &[0.0, 0.0])?;

    let mut oracle_err: f64 = 0.0;
    for (grid, deltas) in [(&g1, vec![0.5, 1.0]), (&g2, vec![0.5, 1.0, 1.5, 2.0])] {
        for _ in 0..cfg.samples {
            let set = random_set(grid, &mut rng);
            let brute = content_oracle_multi(&set, &deltas)?;
            for (d, b) in deltas.iter().zip(brute) {
                oracle_err = oracle_err.max(rel_err(content_value(&set, *d)?, b));
            }
        }
    }
    let mut measure_err: f64 = 0.0;
    let mut min_slack = f64::INFINITY;
    for _ in 0..cfg.samples {
        let a = random_set(&g3, &mut rng);
        let b = random_set(&g3, &mut rng);
        measure_err = measure_err.max(rel_err(content_value(&a, 2.0)?, a.measure()));
        let delta = rng.gen_range(0.2..2.0);
        let rep = strong_subadditivity_check(&a, &b, &ContentParams::new(delta))?;
        min_slack = min_slack.min(rep.slack);
    }
    let mut lorentz_err: f64 = 0.0;
    let mut sum_ratio: f64 = 0.0;
    for _ in 0..cfg.samples {
        let f = random_function(&g3, &mut rng)?;
        let g = random_function(&g3, &mut rng)?;
        let delta = rng.gen_range(0.2..2.0);
        let dist = distribution(&f, delta)?;
        for p in [0.7, 1.0, 1.5, 2.0] {
            lorentz_err = lorentz_err.max(rel_err(dist.lorentz(p, LorentzQ::Finite(p))?, dist.p_norm(p)?));
        }
        let lhs = choquet_integral(&f.add(&g)?, delta)?;
        let rhs = choquet_integral(&f, delta)? + choquet_integral(&g, delta)?;
        if rhs > 0.0 {
            sum_ratio = sum_ratio.max(lhs / rhs);
        }
    }
    let checks = [
        ("oracle_max_rel_err", oracle_err, oracle_err <= 1e-12),
        ("measure_max_rel_err", measure_err, measure_err <= 1e-12),
        ("subadditivity_min_slack", min_slack, min_slack >= -1e-12),
        ("lorentz_pp_max_rel_err", lorentz_err, lorentz_err <= 1e-12),
        ("sum_integral_max_ratio", sum_ratio, sum_ratio <= 2.0),
    ];
    let series = checks.iter().map(|(l, v, _)| point(*l, *v)).collect();
    let failed: Vec<&str> = checks.iter().filter(|c| !c.2).map(|c| c.0).collect();
    let verdict = Verdict {
        pass: failed.is_empty(),
        detail: if failed.is_empty() {
            "all identities hold".into()
        } else {
            format!("failed: {}", failed.join(", "))
        },
    };
    Ok(ExperimentReport::new("selftest", to_value(cfg)?, json!({}), series, verdict))
}

// ---------------------------------------------------------------------------
// dispatch by name

/// Experiment names accepted by [`run_named`].
pub const EXPERIMENTS: &[&str] = &[
    "poincare",
    "poincare_weak",
    "poincare_sobolev",
    "poincare_radii",
    "compact_support",
    "riesz",
    "maximal",
    "hedberg",
    "sharpness_poincare",
    "sharpness_riesz",
    "interp_family",
    "selftest",
];

fn typed<T: DeserializeOwned>(config: Value) -> Result<T> {
    Ok(serde_json::from_value(config)?)
}

/// Run an experiment from a JSON config; missing keys take their defaults.
pub fn run_named(name: &str, config: Value) -> Result<ExperimentReport> {
    match name {
        "poincare" => poincare_check(&typed(config)?),
        "poincare_weak" => poincare_weak_check(&typed(config)?),
        "poincare_sobolev" => poincare_sobolev_check(&typed(config)?),
        "poincare_radii" => poincare_radii(&typed(config)?),
        "compact_support" => compact_support_check(&typed(config)?),
        "riesz" => riesz_boundedness_check(&typed(config)?),
        "maximal" => maximal_inequality_check(&typed(config)?),
        "hedberg" => hedberg_check(&typed(config)?),
        "sharpness_poincare" => Ok(sharpness_poincare(&typed(config)?)?.report),
        "sharpness_riesz" => Ok(sharpness_riesz(&typed(config)?)?.report),
        "interp_family" => interp_family_check(&typed(config)?),
        "selftest" => selftest(&typed(config)?),
        other => Err(Error::Invalid(format!(
            "unknown experiment `{other}`; expected one of {}",
            EXPERIMENTS.join(", ")
        ))),
    }
}

/// Fully resolved default config of an experiment.
pub fn default_config(name: &str) -> Result<Value> {
    match name {
        "poincare" => to_value(&PoincareConfig::default()),
        "poincare_weak" => to_value(&PoincareWeakConfig::default()),
        "poincare_sobolev" => to_value(&PoincareSobolevConfig::default()),
        "poincare_radii" => to_value(&PoincareRadiiConfig::default()),
        "compact_support" => to_value(&CompactSupportConfig::default()),
        "riesz" => to_value(&RieszCheckConfig::default()),
        "maximal" => to_value(&MaximalCheckConfig::default()),
        "hedberg" => to_value(&HedbergCheckConfig::default()),
        "sharpness_poincare" => to_value(&SharpnessPoincareConfig::default()),
        "sharpness_riesz" => to_value(&SharpnessRieszConfig::default()),
        "interp_family" => to_value(&InterpFamilyConfig::default()),
        "selftest" => to_value(&SelftestConfig::default()),
        other => Err(Error::Invalid(format!("unknown experiment `{other}`"))),
    }
}
