//! Choquet integrals and Choquet–Lorentz quasi-norms.
//!
//! Every quantity here is an integral of a function of
//! `h(lambda) = H^delta({f > lambda})`. For a grid function `h` is a step
//! function, so all integrals reduce to finite sums over its jumps.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::content::{check_delta, ContentTree};
use crate::error::{param, Result};
use crate::grid::GridFunction;

/// Relative gap below which two sampled values count as one threshold.
pub const MERGE_RTOL: f64 = 1e-12;

/// Second Lorentz index: a positive real or infinity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LorentzQ {
    Finite(f64),
    Infinity,
}

impl LorentzQ {
    pub fn is_finite(self) -> bool {
        matches!(self, LorentzQ::Finite(_))
    }

    /// `q` as an `f64`, with `f64::INFINITY` for the infinite index.
    pub fn as_f64(self) -> f64 {
        match self {
            LorentzQ::Finite(q) => q,
            LorentzQ::Infinity => f64::INFINITY,
        }
    }

    pub fn from_f64(q: f64) -> Self {
        if q == f64::INFINITY {
            LorentzQ::Infinity
        } else {
            LorentzQ::Finite(q)
        }
    }

    /// Multiply a finite index by `nu`; infinity stays infinite.
    pub fn scale(self, nu: f64) -> Self {
        match self {
            LorentzQ::Finite(q) => LorentzQ::Finite(q * nu),
            LorentzQ::Infinity => LorentzQ::Infinity,
        }
    }

    pub(crate) fn validate(self) -> Result<()> {
        match self {
            LorentzQ::Finite(q) if !(q.is_finite() && q > 0.0) => {
                Err(param("q", q, "0 < q < inf, or q = inf"))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for LorentzQ {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LorentzQ::Finite(q) => write!(f, "{q}"),
            LorentzQ::Infinity => write!(f, "inf"),
        }
    }
}

impl std::str::FromStr for LorentzQ {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "∞" => Ok(LorentzQ::Infinity),
            t => t
                .parse::<f64>()
                .map(LorentzQ::from_f64)
                .map_err(|e| format!("invalid q {s:?}: {e}")),
        }
    }
}

impl Serialize for LorentzQ {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            LorentzQ::Finite(q) => s.serialize_f64(*q),
            LorentzQ::Infinity => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for LorentzQ {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Str(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(q) => Ok(LorentzQ::from_f64(q)),
            Repr::Str(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LorentzExponents {
    pub p: f64,
    pub q: LorentzQ,
    pub delta: f64,
}

impl LorentzExponents {
    pub fn new(p: f64, q: LorentzQ, delta: f64) -> Self {
        LorentzExponents { p, q, delta }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        check_p(self.p)?;
        self.q.validate()?;
        check_delta(self.delta, dim)
    }
}

fn check_p(p: f64) -> Result<()> {
    if p.is_finite() && p > 0.0 {
        Ok(())
    } else {
        Err(param("p", p, "0 < p < inf"))
    }
}

/// `lambda -> h(lambda)` as a step function.
///
/// `thresholds[j]` is the `(j+1)`-th distinct positive value `v_{j+1}`;
/// `plateaus[j]` is `h` on `[v_j, v_{j+1})` with `v_0 = 0`. Past the last
/// threshold `h` vanishes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepDistribution {
    pub thresholds: Vec<f64>,
    pub plateaus: Vec<f64>,
}

/// Cells of `f`'s support grouped by value, ascending. Consecutive values
/// closer than [`MERGE_RTOL`] share a group; the group level is its maximum.
fn level_groups(f: &GridFunction) -> Vec<(f64, Vec<usize>)> {
    let mut cells: Vec<usize> = f.support().cells().collect();
    let vals = f.values();
    cells.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]).then(a.cmp(&b)));
    let mut groups: Vec<(f64, Vec<usize>)> = Vec::new();
    for c in cells {
        let v = vals[c];
        match groups.last_mut() {
            Some((level, members)) if v - *level <= MERGE_RTOL * v => {
                *level = v;
                members.push(c);
            }
            _ => groups.push((v, vec![c])),
        }
    }
    groups
}

/// Exact distribution of `f` with respect to the dyadic content.
///
/// Superlevel sets shrink as `lambda` grows, so one [`ContentTree`] is
/// built for the support and cells are removed level by level.
pub fn distribution(f: &GridFunction, delta: f64) -> Result<StepDistribution> {
    let groups = level_groups(f);
    let mut tree = ContentTree::new(&f.support(), delta)?;
    let mut thresholds = Vec::with_capacity(groups.len());
    let mut plateaus = Vec::with_capacity(groups.len());
    for (level, cells) in groups {
        plateaus.push(tree.value());
        thresholds.push(level);
        for c in cells {
            tree.remove(c);
        }
    }
    Ok(StepDistribution {
        thresholds,
        plateaus,
    })
}

/// Distribution of `f` with respect to Lebesgue measure.
pub fn lebesgue_distribution(f: &GridFunction) -> StepDistribution {
    let groups = level_groups(f);
    let vol = f.grid().cell_volume();
    let mut remaining: usize = groups.iter().map(|(_, c)| c.len()).sum();
    let mut thresholds = Vec::with_capacity(groups.len());
    let mut plateaus = Vec::with_capacity(groups.len());
    for (level, cells) in groups {
        plateaus.push(remaining as f64 * vol);
        thresholds.push(level);
        remaining -= cells.len();
    }
    StepDistribution {
        thresholds,
        plateaus,
    }
}

impl StepDistribution {
    pub fn is_zero(&self) -> bool {
        self.thresholds.is_empty()
    }

    /// `h(lambda)` with the strict superlevel convention.
    pub fn eval(&self, lambda: f64) -> f64 {
        if lambda < 0.0 {
            return self.plateaus.first().copied().unwrap_or(0.0);
        }
        let j = self.thresholds.partition_point(|&t| t <= lambda);
        self.plateaus.get(j).copied().unwrap_or(0.0)
    }

    /// Iterator over `(v_j, v_{j+1}, h_j)`.
    fn steps(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        let lower = std::iter::once(0.0).chain(self.thresholds.iter().copied());
        lower
            .zip(&self.thresholds)
            .zip(&self.plateaus)
            .map(|((a, &b), &h)| (a, b, h))
    }

    /// `int_0^inf h(lambda) d lambda`.
    pub fn choquet_integral(&self) -> f64 {
        self.steps().map(|(a, b, h)| (b - a) * h).sum()
    }

    /// `[p int lambda^(p-1) h d lambda]^(1/p)`.
    pub fn p_norm(&self, p: f64) -> Result<f64> {
        check_p(p)?;
        let s: f64 = self
            .steps()
            .map(|(a, b, h)| (b.powf(p) - a.powf(p)) * h)
            .sum();
        Ok(s.powf(1.0 / p))
    }

    /// Lorentz quasi-norm `L^{p,q}` of the distribution.
    pub fn lorentz(&self, p: f64, q: LorentzQ) -> Result<f64> {
        check_p(p)?;
        q.validate()?;
        Ok(match q {
            LorentzQ::Finite(q) => {
                let s: f64 = self
                    .steps()
                    .map(|(a, b, h)| (b.powf(q) - a.powf(q)) * h.powf(q / p))
                    .sum();
                (p / q * s).powf(1.0 / q)
            }
            LorentzQ::Infinity => self
                .steps()
                .map(|(_, b, h)| b * h.powf(1.0 / p))
                .fold(0.0, f64::max),
        })
    }

    /// Dyadic-sum quasi-norm `[sum_i 2^(iq) h(2^i)^(q/p)]^(1/q)`, or the
    /// supremum over `i` for `q = inf`.
    ///
    /// Indices with `2^i >= max f` contribute nothing; those below the
    /// smallest threshold form a geometric tail summed in closed form.
    pub fn lorentz_dyadic(&self, p: f64, q: LorentzQ) -> Result<f64> {
        check_p(p)?;
        q.validate()?;
        let (Some(&v1), Some(&vmax)) = (self.thresholds.first(), self.thresholds.last()) else {
            return Ok(0.0);
        };
        let h0 = self.plateaus[0];
        // largest i with 2^i < v1
        let mut i_lo = v1.log2().floor() as i32;
        while exp2i(i_lo) >= v1 {
            i_lo -= 1;
        }
        while exp2i(i_lo + 1) < v1 {
            i_lo += 1;
        }
        let body = (i_lo + 1..).take_while(|&i| exp2i(i) < vmax);
        Ok(match q {
            LorentzQ::Finite(q) => {
                let tail = h0.powf(q / p) * exp2i(i_lo).powf(q) / (1.0 - (-q).exp2());
                let s: f64 = body
                    .map(|i| {
                        let lam = exp2i(i);
                        lam.powf(q) * self.eval(lam).powf(q / p)
                    })
                    .sum();
                (tail + s).powf(1.0 / q)
            }
            LorentzQ::Infinity => body
                .map(|i| {
                    let lam = exp2i(i);
                    lam * self.eval(lam).powf(1.0 / p)
                })
                .fold(exp2i(i_lo) * h0.powf(1.0 / p), f64::max),
        })
    }
}

fn exp2i(i: i32) -> f64 {
    f64::from(i).exp2()
}

pub fn choquet_integral(f: &GridFunction, delta: f64) -> Result<f64> {
    Ok(distribution(f, delta)?.choquet_integral())
}

pub fn choquet_p_norm(f: &GridFunction, p: f64, delta: f64) -> Result<f64> {
    check_p(p)?;
    distribution(f, delta)?.p_norm(p)
}

pub fn lorentz_norm(f: &GridFunction, exps: &LorentzExponents) -> Result<f64> {
    exps.validate(f.grid().dim())?;
    distribution(f, exps.delta)?.lorentz(exps.p, exps.q)
}

pub fn lorentz_norm_dyadic(f: &GridFunction, exps: &LorentzExponents) -> Result<f64> {
    exps.validate(f.grid().dim())?;
    distribution(f, exps.delta)?.lorentz_dyadic(exps.p, exps.q)
}

/// Classical Lorentz norm with respect to Lebesgue measure.
pub fn lebesgue_lorentz_norm(f: &GridFunction, p: f64, q: LorentzQ) -> Result<f64> {
    lebesgue_distribution(f).lorentz(p, q)
}

/// Range `[lo, hi]` of `dyadic / lorentz` over all nonzero functions.
pub fn dyadic_comparability_bounds(p: f64, q: LorentzQ) -> (f64, f64) {
    match q {
        LorentzQ::Finite(q) => (
            (p / q * (q.exp2() - 1.0)).powf(-1.0 / q),
            (p / q * (1.0 - (-q).exp2())).powf(-1.0 / q),
        ),
        LorentzQ::Infinity => (0.5, 1.0),
    }
}

/// `C` in `||f||_{p,r} <= C ||f||_{p,s}` for `s <= r`.
pub fn second_index_embedding_constant(p: f64, s: LorentzQ, r: LorentzQ) -> f64 {
    match s {
        LorentzQ::Infinity => 1.0,
        LorentzQ::Finite(s) => (s / p).powf(1.0 / s - 1.0 / r.as_f64()),
    }
}

/// `C` in `||f||_{L^{p,q}(dx)} <= C ||f||_{L^{p delta/dim, q}(H^delta)}`.
///
/// Follows from `|S| <= H^delta(S)^(dim/delta)` for every cell set.
pub fn lebesgue_embedding_constant(dim: usize, delta: f64, q: LorentzQ) -> f64 {
    match q {
        LorentzQ::Finite(q) => (dim as f64 / delta).powf(1.0 / q),
        LorentzQ::Infinity => 1.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::content::content_value;
    use crate::grid::{make_grid, CellSet, DyadicGrid};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
    }

    fn grid() -> DyadicGrid {
        make_grid(2, 4, 1.0, &[0.0, 0.0]).unwrap()
    }

    /// Random function with at most `levels` distinct positive values.
    fn random_step(g: &DyadicGrid, seed: u64, levels: usize) -> GridFunction {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let heights: Vec<f64> = (0..levels).map(|_| rng.gen_range(0.05..5.0)).collect();
        let vals = (0..g.num_cells())
            .map(|_| {
                if rng.gen_bool(0.4) {
                    0.0
                } else {
                    heights[rng.gen_range(0..levels)]
                }
            })
            .collect();
        GridFunction::new(g, vals).unwrap()
    }

    /// Gauss–Legendre nodes and weights on [-1, 1] (8 points).
    const GL8: [(f64, f64); 8] = [
        (-0.960_289_856_497_536_3, 0.101_228_536_290_376_26),
        (-0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
        (-0.525_532_409_916_329, 0.313_706_645_877_887_3),
        (-0.183_434_642_495_649_8, 0.362_683_783_378_362),
        (0.183_434_642_495_649_8, 0.362_683_783_378_362),
        (0.525_532_409_916_329, 0.313_706_645_877_887_3),
        (0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
        (0.960_289_856_497_536_3, 0.101_228_536_290_376_26),
    ];

    /// `int_0^max weight(lambda) H({f > lambda}) d lambda` by quadrature,
    /// evaluating the content of each superlevel set afresh. Panels break at
    /// the raw values of `f` and are graded geometrically towards 0.
    fn quad_oracle(f: &GridFunction, delta: f64, weight: impl Fn(f64) -> f64) -> f64 {
        let mut breaks: Vec<f64> = f.values().iter().copied().filter(|&v| v > 0.0).collect();
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        let mut edges = vec![0.0];
        let first = breaks[0];
        for k in (1..=60).rev() {
            edges.push(first * 0.5f64.powi(k));
        }
        for &b in &breaks {
            // geometric refinement so that every panel has ratio <= 1.25
            let a = *edges.last().unwrap();
            let pieces = ((b / a).ln() / 1.25f64.ln()).ceil().max(1.0) as i32;
            for k in 1..=pieces {
                edges.push(a * (b / a).powf(f64::from(k) / f64::from(pieces)));
            }
            *edges.last_mut().unwrap() = b;
        }
        let mut total = 0.0;
        for w in edges.windows(2) {
            let (a, b) = (w[0], w[1]);
            let mid = 0.5 * (a + b);
            let h = content_value(&f.superlevel(mid), delta).unwrap();
            let s: f64 = GL8
                .iter()
                .map(|&(x, wt)| wt * weight(mid + 0.5 * (b - a) * x))
                .sum();
            total += h * 0.5 * (b - a) * s;
        }
        total
    }

    #[test]
    fn indicator_distribution_and_norms() {
        let g = grid();
        let s = CellSet::from_cells(&g, [0, 5, 17, 200]).unwrap();
        let f = GridFunction::indicator(&s, 1.0).unwrap();
        let h = content_value(&s, 1.3).unwrap();
        let d = distribution(&f, 1.3).unwrap();
        assert_eq!(d.thresholds, vec![1.0]);
        assert_eq!(d.plateaus, vec![h]);
        assert_eq!(d.eval(0.999), h);
        assert_eq!(d.eval(1.0), 0.0);
        assert!(close(choquet_integral(&f, 1.3).unwrap(), h, 1e-15));
        let f3 = GridFunction::indicator(&s, 3.0).unwrap();
        assert!(close(choquet_integral(&f3, 1.3).unwrap(), 3.0 * h, 1e-15));
        assert!(close(choquet_p_norm(&f, 2.5, 1.3).unwrap(), h.powf(0.4), 1e-14));
        let e = LorentzExponents::new(1.7, LorentzQ::Finite(3.0), 1.3);
        let expect = (1.7f64 / 3.0).powf(1.0 / 3.0) * h.powf(1.0 / 1.7);
        assert!(close(lorentz_norm(&f, &e).unwrap(), expect, 1e-14));
        let e = LorentzExponents::new(1.7, LorentzQ::Infinity, 1.3);
        assert!(close(lorentz_norm(&f, &e).unwrap(), h.powf(1.0 / 1.7), 1e-14));
        // dyadic sum: terms i <= -1
        let e = LorentzExponents::new(1.7, LorentzQ::Finite(3.0), 1.3);
        let expect = (h.powf(3.0 / 1.7) * 2f64.powi(-3) / (1.0 - 2f64.powi(-3))).powf(1.0 / 3.0);
        assert!(close(lorentz_norm_dyadic(&f, &e).unwrap(), expect, 1e-14));
    }

    #[test]
    fn zero_function() {
        let g = grid();
        let z = GridFunction::zeros(&g);
        let d = distribution(&z, 1.0).unwrap();
        assert!(d.is_zero());
        assert_eq!(d.eval(0.0), 0.0);
        assert_eq!(choquet_integral(&z, 1.0).unwrap(), 0.0);
        let e = LorentzExponents::new(2.0, LorentzQ::Finite(1.0), 1.0);
        assert_eq!(lorentz_norm(&z, &e).unwrap(), 0.0);
        assert_eq!(lorentz_norm_dyadic(&z, &e).unwrap(), 0.0);
    }

    #[test]
    fn two_level_layer_cake() {
        let g = grid();
        let s1 = CellSet::from_cells(&g, [3, 4]).unwrap();
        let s2 = CellSet::from_cells(&g, [3, 4, 100, 101, 250]).unwrap();
        let delta = 0.8;
        let mut vals = vec![0.0; g.num_cells()];
        for c in s2.cells() {
            vals[c] = if s1.contains(c) { 2.0 } else { 1.0 };
        }
        let f = GridFunction::new(&g, vals).unwrap();
        let h1 = content_value(&s1, delta).unwrap();
        let h2 = content_value(&s2, delta).unwrap();
        let d = distribution(&f, delta).unwrap();
        assert_eq!(d.plateaus, vec![h2, h1]);
        assert!(close(choquet_integral(&f, delta).unwrap(), h1 + h2, 1e-15));
    }

    #[test]
    fn nearly_equal_values_merge() {
        let g = make_grid(1, 2, 1.0, &[0.0]).unwrap();
        let f = GridFunction::new(&g, vec![1.0, 1.0 + 1e-15, 2.0, 0.0]).unwrap();
        let d = distribution(&f, 1.0).unwrap();
        assert_eq!(d.thresholds, vec![1.0 + 1e-15, 2.0]);
    }

    #[test]
    fn lebesgue_matches_full_delta() {
        let g = grid();
        for seed in 0..20 {
            let f = random_step(&g, seed, 4);
            for q in [LorentzQ::Finite(0.7), LorentzQ::Finite(2.0), LorentzQ::Infinity] {
                let a = lebesgue_lorentz_norm(&f, 1.4, q).unwrap();
                let b = lorentz_norm(&f, &LorentzExponents::new(1.4, q, 2.0)).unwrap();
                assert!(close(a, b, 1e-12), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn invalid_exponents() {
        let g = grid();
        let f = random_step(&g, 1, 2);
        assert!(choquet_p_norm(&f, 0.0, 1.0).is_err());
        assert!(lorentz_norm(&f, &LorentzExponents::new(1.0, LorentzQ::Finite(-1.0), 1.0)).is_err());
        assert!(lorentz_norm(&f, &LorentzExponents::new(1.0, LorentzQ::Finite(1.0), 3.0)).is_err());
    }

    #[test]
    fn q_serde() {
        let e: LorentzExponents = serde_json::from_str(r#"{"p":2,"q":"inf","delta":1}"#).unwrap();
        assert_eq!(e.q, LorentzQ::Infinity);
        let e: LorentzExponents = serde_json::from_str(r#"{"p":2,"q":1.5,"delta":1}"#).unwrap();
        assert_eq!(e.q, LorentzQ::Finite(1.5));
        assert_eq!(serde_json::to_string(&LorentzQ::Infinity).unwrap(), "\"inf\"");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn p_norm_matches_quadrature(seed in any::<u64>(), p in prop::sample::select(vec![0.5, 1.0, 1.5, 2.0, 3.0]), delta in 0.3f64..2.0) {
            let g = make_grid(2, 3, 1.0, &[0.0, 0.0]).unwrap();
            let f = random_step(&g, seed, 3);
            prop_assume!(f.max_value() > 0.0);
            let exact = choquet_p_norm(&f, p, delta).unwrap().powf(p);
            let quad = quad_oracle(&f, delta, |l| p * l.powf(p - 1.0));
            prop_assert!(close(exact, quad, 1e-8), "{exact} vs {quad}");
        }

        #[test]
        fn norm_identities(seed in any::<u64>(), p in 0.3f64..4.0, q in 0.3f64..4.0, delta in 0.2f64..2.0) {
            let g = grid();
            let f = random_step(&g, seed, 5);
            let d = distribution(&f, delta).unwrap();
            // q = p reduces to the p-norm
            prop_assert!(close(d.lorentz(p, LorentzQ::Finite(p)).unwrap(), d.p_norm(p).unwrap(), 1e-12));
            // p = 1 is the Choquet integral
            prop_assert!(close(d.p_norm(1.0).unwrap(), d.choquet_integral(), 1e-12));
            // substitution identity
            let fp = f.powf(p).unwrap();
            prop_assert!(close(d.p_norm(p).unwrap().powf(p), choquet_integral(&fp, delta).unwrap(), 1e-10));
            // power identity
            for nu in [0.5, 2.0, 3.0] {
                let lhs = lorentz_norm(&f.powf(nu).unwrap(), &LorentzExponents::new(p, LorentzQ::Finite(q), delta)).unwrap();
                let rhs = d.lorentz(nu * p, LorentzQ::Finite(nu * q)).unwrap().powf(nu);
                prop_assert!(close(lhs, rhs, 1e-10), "nu {nu}: {lhs} vs {rhs}");
                let lhs = lorentz_norm(&f.powf(nu).unwrap(), &LorentzExponents::new(p, LorentzQ::Infinity, delta)).unwrap();
                let rhs = d.lorentz(nu * p, LorentzQ::Infinity).unwrap().powf(nu);
                prop_assert!(close(lhs, rhs, 1e-10));
            }
            // homogeneity
            let c = 3.7;
            let dc = distribution(&f.scale(c).unwrap(), delta).unwrap();
            for qq in [LorentzQ::Finite(q), LorentzQ::Infinity] {
                prop_assert!(close(dc.lorentz(p, qq).unwrap(), c * d.lorentz(p, qq).unwrap(), 1e-12));
            }
            prop_assert!(close(dc.choquet_integral(), c * d.choquet_integral(), 1e-12));
        }

        #[test]
        fn dyadic_comparability(seed in any::<u64>(), p in 0.3f64..4.0, q in prop::sample::select(vec![0.5, 1.0, 2.0, 5.0, f64::INFINITY]), delta in 0.2f64..2.0) {
            let g = grid();
            let f = random_step(&g, seed, 6);
            prop_assume!(f.max_value() > 0.0);
            let q = LorentzQ::from_f64(q);
            let d = distribution(&f, delta).unwrap();
            let ratio = d.lorentz_dyadic(p, q).unwrap() / d.lorentz(p, q).unwrap();
            let (lo, hi) = dyadic_comparability_bounds(p, q);
            prop_assert!(ratio >= lo * (1.0 - 1e-12) && ratio <= hi * (1.0 + 1e-12), "{lo} {ratio} {hi}");
        }

        #[test]
        fn monotone_and_embeddings(seed in any::<u64>(), p in 0.3f64..4.0, s in 0.3f64..4.0, t in 0.0f64..4.0, delta in 0.2f64..2.0) {
            let g = grid();
            let f = random_step(&g, seed, 5);
            let gfun = f.add(&random_step(&g, seed ^ 0xabc, 3)).unwrap();
            let df = distribution(&f, delta).unwrap();
            let dg = distribution(&gfun, delta).unwrap();
            let r = LorentzQ::Finite(s + t);
            for q in [LorentzQ::Finite(s), r, LorentzQ::Infinity] {
                prop_assert!(df.lorentz(p, q).unwrap() <= dg.lorentz(p, q).unwrap() * (1.0 + 1e-12));
            }
            let sf = df.lorentz(p, LorentzQ::Finite(s)).unwrap();
            for big in [r, LorentzQ::Infinity] {
                let c = second_index_embedding_constant(p, LorentzQ::Finite(s), big);
                prop_assert!(df.lorentz(p, big).unwrap() <= c * sf * (1.0 + 1e-12));
            }
            // sum bound for the Choquet integral
            let sum = choquet_integral(&f.add(&gfun).unwrap(), delta).unwrap();
            prop_assert!(sum <= 2.0 * (df.choquet_integral() + dg.choquet_integral()) * (1.0 + 1e-12));
            // Lebesgue embedding
            for q in [LorentzQ::Finite(s), LorentzQ::Infinity] {
                let leb = lebesgue_lorentz_norm(&f, p, q).unwrap();
                let cap = df.lorentz(p * delta / 2.0, q).unwrap();
                prop_assert!(leb <= lebesgue_embedding_constant(2, delta, q) * cap * (1.0 + 1e-12));
            }
        }
    }
}
