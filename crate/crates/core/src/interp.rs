//! K-functional of the pair `(L^{p0}(H^delta), L^{p1}(H^delta))` and the
//! resulting real-interpolation quasi-norm.
//!
//! Splittings are restricted to level truncations `f = (f - c)_+ + min(f, c)`
//! with `c` in `{0, values of f, inf}`. Each `c` gives a line
//! `t -> A_c + t B_c`; their lower envelope is an upper bound for `K`.
//! Both norms of a truncation follow from the distribution of `f` itself.

use serde::{Deserialize, Serialize};

use crate::choquet::{distribution, LorentzQ, StepDistribution};
use crate::error::{param, Error, Result};
use crate::grid::GridFunction;

/// Points of the reported geometric `t` grid.
pub const T_GRID_POINTS: usize = 64;
/// Relative size of each neglected tail when choosing the reported `t` range.
pub const TAIL_RTOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterpPair {
    pub p0: f64,
    pub p1: f64,
    pub delta: f64,
    pub eta: f64,
    pub q: f64,
}

impl InterpPair {
    pub fn validate(&self) -> Result<()> {
        if !(self.p0 > 0.0) {
            return Err(param("p0", self.p0, "p0 > 0"));
        }
        if !(self.p1 > self.p0 && self.p1.is_finite()) {
            return Err(param("p1", self.p1, "p0 < p1 < inf"));
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(param("eta", self.eta, "0 < eta < 1"));
        }
        if !(self.q > self.p0 && self.q.is_finite()) {
            return Err(param("q", self.q, "p0 < q < inf"));
        }
        Ok(())
    }

    /// `1/p = (1 - eta)/p0 + eta/p1`.
    pub fn p(&self) -> f64 {
        1.0 / ((1.0 - self.eta) / self.p0 + self.eta / self.p1)
    }
}

/// One truncation level: `K(t) <= a + t b`.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Line {
    a: f64,
    b: f64,
}

/// `||(f - c)_+||_{p0}` from the distribution of `f`.
fn upper_part(dist: &StepDistribution, c: f64, p0: f64) -> f64 {
    let mut lo = 0.0f64;
    let mut s = 0.0;
    for (&v, &h) in dist.thresholds.iter().zip(&dist.plateaus) {
        if v > c {
            let from = lo.max(c) - c;
            s += ((v - c).powf(p0) - from.powf(p0)) * h;
        }
        lo = v;
    }
    s.powf(1.0 / p0)
}

/// `||min(f, c)||_{p1}` from the distribution of `f`.
fn lower_part(dist: &StepDistribution, c: f64, p1: f64) -> f64 {
    let mut lo = 0.0f64;
    let mut s = 0.0;
    for (&v, &h) in dist.thresholds.iter().zip(&dist.plateaus) {
        s += (v.min(c).powf(p1) - lo.min(c).powf(p1)) * h;
        lo = v;
    }
    s.powf(1.0 / p1)
}

fn truncation_lines(dist: &StepDistribution, pair: &InterpPair) -> Vec<Line> {
    let levels = std::iter::once(0.0)
        .chain(dist.thresholds.iter().copied())
        .chain(std::iter::once(f64::INFINITY));
    levels
        .map(|c| Line {
            a: upper_part(dist, c, pair.p0),
            b: lower_part(dist, c, pair.p1),
        })
        .collect()
}

/// Lower envelope of the truncation lines as `(breakpoints, lines)`, with
/// `lines[k]` active on `[breakpoints[k-1], breakpoints[k]]`, ordered by
/// increasing `t` (decreasing slope).
fn envelope(lines: &[Line]) -> (Vec<f64>, Vec<Line>) {
    let mut sorted = lines.to_vec();
    // large slope first, ties by smaller intercept
    sorted.sort_by(|x, y| y.b.total_cmp(&x.b).then(x.a.total_cmp(&y.a)));
    sorted.dedup_by(|later, kept| later.b == kept.b);
    let mut hull: Vec<Line> = Vec::new();
    let cross = |l: &Line, m: &Line| (m.a - l.a) / (l.b - m.b);
    for line in sorted {
        // a steeper line with no smaller intercept is never below
        while let Some(last) = hull.last() {
            if line.a <= last.a {
                hull.pop();
                continue;
            }
            if hull.len() >= 2 {
                let prev = hull[hull.len() - 2];
                if cross(&prev, &line) <= cross(&prev, last) {
                    hull.pop();
                    continue;
                }
            }
            break;
        }
        hull.push(line);
    }
    let breaks = hull.windows(2).map(|w| cross(&w[0], &w[1])).collect();
    (breaks, hull)
}

/// Upper bound on `K(t, f)` from the truncation family.
pub fn k_functional_upper(f: &GridFunction, pair: &InterpPair, t: f64) -> Result<f64> {
    pair.validate()?;
    if !(t > 0.0 && t.is_finite()) {
        return Err(param("t", t, "t > 0"));
    }
    let dist = distribution(f, pair.delta)?;
    Ok(k_from_lines(&truncation_lines(&dist, pair), t))
}

fn k_from_lines(lines: &[Line], t: f64) -> f64 {
    lines
        .iter()
        .map(|l| l.a + t * l.b)
        .fold(f64::INFINITY, f64::min)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterpReport {
    /// `(t, K(t))` on the reported geometric grid.
    pub k_values: Vec<(f64, f64)>,
    pub interp_norm: f64,
    /// `||f||_{L^{p,q}(H^delta)}` with `p` from the pair.
    pub direct_norm: f64,
    pub ratio: f64,
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub(crate) fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let k = k as f64;
                let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else { p1 };
            let pn1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pn1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

/// `int_a^b t^(-eta q - 1) (A + t B)^q dt`, in `u = ln t`, split so each
/// panel spans at most a factor 2 in `t`.
fn middle_piece(line: &Line, a: f64, b: f64, eta: f64, q: f64, nodes: &[(f64, f64)]) -> f64 {
    let (ua, ub) = (a.ln(), b.ln());
    let panels = ((ub - ua) / std::f64::consts::LN_2).ceil().max(1.0) as usize;
    let width = (ub - ua) / panels as f64;
    let mut total = 0.0;
    for k in 0..panels {
        let lo = ua + k as f64 * width;
        let mid = lo + width / 2.0;
        for &(x, w) in nodes {
            let u = mid + x * width / 2.0;
            let t = u.exp();
            total += w * width / 2.0 * (t.powf(-eta) * (line.a + t * line.b)).powf(q);
        }
    }
    total
}

/// `[int_0^inf (t^-eta K(t))^q dt/t]^(1/q)` for the envelope `K`.
///
/// The envelope is linear between breakpoints, so each piece is integrated
/// by Gauss–Legendre in `ln t`; the outer pieces `K = t B` and `K = A` have
/// closed forms.
pub fn interpolation_norm(f: &GridFunction, pair: &InterpPair) -> Result<InterpReport> {
    pair.validate()?;
    let dist = distribution(f, pair.delta)?;
    let direct_norm = dist.lorentz(pair.p(), LorentzQ::Finite(pair.q))?;
    if dist.is_zero() {
        return Ok(InterpReport {
            k_values: Vec::new(),
            interp_norm: 0.0,
            direct_norm,
            ratio: 0.0,
        });
    }
    let lines = truncation_lines(&dist, pair);
    let (breaks, hull) = envelope(&lines);
    let (eta, q) = (pair.eta, pair.q);
    let first = hull[0];
    let last = hull[hull.len() - 1];
    if first.a != 0.0 || last.b != 0.0 || breaks.is_empty() {
        return Err(Error::TailCriterion(
            "envelope does not start at K = tB and end at K = A".into(),
        ));
    }
    let nodes = gauss_legendre(20);
    let mut total = first.b.powf(q) * breaks[0].powf((1.0 - eta) * q) / ((1.0 - eta) * q);
    for (k, line) in hull.iter().enumerate().skip(1).take(hull.len() - 2) {
        total += middle_piece(line, breaks[k - 1], breaks[k], eta, q, &nodes);
    }
    let t_last = breaks[breaks.len() - 1];
    total += last.a.powf(q) * t_last.powf(-eta * q) / (eta * q);
    let interp_norm = total.powf(1.0 / q);

    // reported grid: tails beyond [t_min, t_max] each below TAIL_RTOL
    let t_min = (TAIL_RTOL * total * (1.0 - eta) * q / first.b.powf(q))
        .powf(1.0 / ((1.0 - eta) * q))
        .min(breaks[0]);
    let t_max = (last.a.powf(q) / (eta * q * TAIL_RTOL * total))
        .powf(1.0 / (eta * q))
        .max(t_last);
    if !(t_min > 0.0 && t_max.is_finite() && t_min < t_max) {
        return Err(Error::TailCriterion(format!(
            "t range [{t_min}, {t_max}] is degenerate"
        )));
    }
    let step = (t_max / t_min).ln() / (T_GRID_POINTS - 1) as f64;
    let k_values = (0..T_GRID_POINTS)
        .map(|i| {
            let t = t_min * (step * i as f64).exp();
            (t, k_from_lines(&hull, t))
        })
        .collect();
    Ok(InterpReport {
        k_values,
        interp_norm,
        direct_norm,
        ratio: interp_norm / direct_norm,
    })
}

/// `interp / lorentz` for any indicator: `(1 / (eta (1 - eta) p))^(1/q)`.
pub fn indicator_ratio(pair: &InterpPair) -> f64 {
    (1.0 / (pair.eta * (1.0 - pair.eta) * pair.p())).powf(1.0 / pair.q)
}
