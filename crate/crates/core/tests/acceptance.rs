//! Acceptance criteria, one test each. Every test prints a single
//! `[PASS]`/`[FAIL]` line straight to stdout so the summary survives output
//! capture.

use std::io::Write;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use capnorm::choquet::{choquet_integral, distribution, dyadic_comparability_bounds, LorentzQ};
use capnorm::content::{content_oracle_multi, content_value, strong_subadditivity_check, ContentParams};
use capnorm::grid::{make_grid, CellSet, DyadicGrid, GridFunction, Sampler};
use capnorm::operators::HedbergParams;
use capnorm::verify::{self, ExperimentReport};
use capnorm::Error;

fn line(id: u32, name: &str, pass: bool, detail: &str) {
    let tag = if pass { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    writeln!(out, "[{tag}] criterion {id:>2} {name}: {detail}").unwrap();
}

fn finish(id: u32, name: &str, failures: &[String], detail: &str) {
    line(id, name, failures.is_empty(), detail);
    assert!(failures.is_empty(), "criterion {id}: {failures:#?}");
}

fn rel_err(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

fn random_set(grid: &DyadicGrid, rng: &mut ChaCha8Rng) -> CellSet {
    let density = rng.gen_range(0.05..0.95);
    let occ = (0..grid.num_cells()).map(|_| rng.gen_bool(density)).collect();
    CellSet::from_occupancy(grid, occ).unwrap()
}

fn random_step(grid: &DyadicGrid, rng: &mut ChaCha8Rng) -> GridFunction {
    let levels: Vec<f64> = (0..rng.gen_range(1..6)).map(|_| rng.gen_range(0.05..4.0)).collect();
    let zero = rng.gen_range(0.0..0.7);
    let values = (0..grid.num_cells())
        .map(|_| {
            if rng.gen_bool(zero) {
                0.0
            } else {
                levels[rng.gen_range(0..levels.len())]
            }
        })
        .collect();
    GridFunction::new(grid, values).unwrap()
}

fn ratio_summary(report: &ExperimentReport, depths: &[u32]) -> String {
    depths
        .iter()
        .map(|d| format!("{:.4}", report.value(&format!("d{d}.ratio")).unwrap_or(f64::NAN)))
        .collect::<Vec<_>>()
        .join("/")
}

/// Record a stability-check outcome: passing verdict over at least three depths.
fn check_report(
    failures: &mut Vec<String>,
    summary: &mut Vec<String>,
    label: &str,
    report: capnorm::Result<ExperimentReport>,
    depths: &[u32],
) {
    match report {
        Ok(r) => {
            if depths.len() < 3 {
                failures.push(format!("{label}: fewer than 3 depths"));
            }
            if !r.verdict.pass {
                failures.push(format!("{label}: {}", r.verdict.detail));
            }
            summary.push(format!("{label} {}", ratio_summary(&r, depths)));
        }
        Err(e) => failures.push(format!("{label}: error {e}")),
    }
}

#[test]
fn c01_oracle_equivalence() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut worst: f64 = 0.0;
    let mut cases = 0usize;

    // 1D: every subset of every grid up to depth 4
    for depth in 1..=4 {
        let grid = make_grid(1, depth, 1.0, &[0.0]).unwrap();
        let n = grid.num_cells();
        for mask in 0u32..(1 << n) {
            let occ = (0..n).map(|i| mask >> i & 1 == 1).collect();
            let set = CellSet::from_occupancy(&grid, occ).unwrap();
            let deltas = [0.5, 1.0];
            let brute = content_oracle_multi(&set, &deltas).unwrap();
            for (d, b) in deltas.iter().zip(brute) {
                worst = worst.max(rel_err(content_value(&set, *d).unwrap(), b));
                cases += 1;
            }
        }
    }
    // 2D depth 3
    let grid = make_grid(2, 3, 1.0, &[0.0, 0.0]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let deltas = [0.5, 1.0, 1.5, 2.0];
    for _ in 0..200 {
        let set = random_set(&grid, &mut rng);
        let brute = content_oracle_multi(&set, &deltas).unwrap();
        for (d, b) in deltas.iter().zip(brute) {
            worst = worst.max(rel_err(content_value(&set, *d).unwrap(), b));
            cases += 1;
        }
    }
    let elapsed = start.elapsed();
    if worst > 1e-12 {
        failures.push(format!("max relative error {worst:e}"));
    }
    if elapsed > Duration::from_secs(120) {
        failures.push(format!("took {elapsed:?}"));
    }
    finish(
        1,
        "dynamic program matches exhaustive covers",
        &failures,
        &format!("{cases} cases, max rel err {worst:.1e}, {:.1}s", elapsed.as_secs_f64()),
    );
}

#[test]
fn c02_full_dimension_is_measure() {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let grids = [
        make_grid(1, 6, 2.0, &[-1.0]).unwrap(),
        make_grid(2, 4, 1.0, &[0.0, 0.0]).unwrap(),
        make_grid(2, 5, 3.0, &[-1.5, 0.0]).unwrap(),
    ];
    let mut worst: f64 = 0.0;
    for k in 0..500 {
        let grid = &grids[k % grids.len()];
        let set = random_set(grid, &mut rng);
        let dim = grid.dim() as f64;
        worst = worst.max(rel_err(content_value(&set, dim).unwrap(), set.measure()));
    }
    let failures = if worst <= 1e-12 {
        vec![]
    } else {
        vec![format!("max relative error {worst:e}")]
    };
    finish(2, "content at delta = n equals measure", &failures, &format!("500 sets, max rel err {worst:.1e}"));
}

#[test]
fn c03_strong_subadditivity() {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let grids = [
        make_grid(1, 6, 1.0, &[0.0]).unwrap(),
        make_grid(2, 4, 1.0, &[0.0, 0.0]).unwrap(),
    ];
    let mut min_slack = f64::INFINITY;
    for k in 0..500 {
        let grid = &grids[k % 2];
        let a = random_set(grid, &mut rng);
        let b = random_set(grid, &mut rng);
        let delta = rng.gen_range(0.05..=grid.dim() as f64);
        let rep = strong_subadditivity_check(&a, &b, &ContentParams::new(delta)).unwrap();
        min_slack = min_slack.min(rep.slack);
    }
    let failures = if min_slack >= -1e-12 {
        vec![]
    } else {
        vec![format!("slack {min_slack:e}")]
    };
    finish(3, "strong subadditivity", &failures, &format!("500 pairs, min slack {min_slack:.3e}"));
}

#[test]
fn c04_norm_identities() {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let grid = make_grid(2, 4, 2.0, &[-1.0, -1.0]).unwrap();
    let mut failures = Vec::new();
    let (mut pp_err, mut pow_err): (f64, f64) = (0.0, 0.0);
    let (mut cmp_lo, mut cmp_hi) = (f64::INFINITY, 0.0f64);
    let qs = [
        LorentzQ::Finite(0.5),
        LorentzQ::Finite(1.0),
        LorentzQ::Finite(3.0),
        LorentzQ::Infinity,
    ];
    for _ in 0..100 {
        let f = random_step(&grid, &mut rng);
        let delta = rng.gen_range(0.3..=2.0);
        let dist = distribution(&f, delta).unwrap();
        for p in [0.7, 1.0, 1.5, 2.0] {
            let a = dist.lorentz(p, LorentzQ::Finite(p)).unwrap();
            pp_err = pp_err.max(rel_err(a, dist.p_norm(p).unwrap()));
        }
        let p = rng.gen_range(0.5..3.0);
        for q in qs {
            for nu in [0.5, 2.0, 3.0] {
                let lhs = distribution(&f.powf(nu).unwrap(), delta).unwrap().lorentz(p, q).unwrap();
                let rhs = dist.lorentz(nu * p, q.scale(nu)).unwrap().powf(nu);
                pow_err = pow_err.max(rel_err(lhs, rhs));
            }
            let plain = dist.lorentz(p, q).unwrap();
            if plain > 0.0 {
                let ratio = dist.lorentz_dyadic(p, q).unwrap() / plain;
                let (lo, hi) = dyadic_comparability_bounds(p, q);
                if ratio < lo * (1.0 - 1e-12) || ratio > hi * (1.0 + 1e-12) {
                    failures.push(format!("dyadic ratio {ratio} outside [{lo}, {hi}] at p={p}, q={q}"));
                }
                cmp_lo = cmp_lo.min(ratio / lo);
                cmp_hi = cmp_hi.max(ratio / hi);
            }
        }
    }
    if pp_err > 1e-12 {
        failures.push(format!("L^(p,p) vs L^p rel err {pp_err:e}"));
    }
    if pow_err > 1e-10 {
        failures.push(format!("power identity rel err {pow_err:e}"));
    }
    finish(
        4,
        "norm identities",
        &failures,
        &format!(
            "L^(p,p)=L^p err {pp_err:.1e}, power identity err {pow_err:.1e}, dyadic/bound in [{cmp_lo:.3}, {cmp_hi:.3}] of [lo, hi]"
        ),
    );
}

#[test]
fn c05_choquet_integral_of_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let grids = [
        make_grid(1, 6, 1.0, &[0.0]).unwrap(),
        make_grid(2, 4, 1.0, &[0.0, 0.0]).unwrap(),
    ];
    let mut worst: f64 = 0.0;
    for k in 0..200 {
        let grid = &grids[k % 2];
        let f = random_step(grid, &mut rng);
        let g = random_step(grid, &mut rng);
        let delta = rng.gen_range(0.05..=grid.dim() as f64);
        let lhs = choquet_integral(&f.add(&g).unwrap(), delta).unwrap();
        let rhs = choquet_integral(&f, delta).unwrap() + choquet_integral(&g, delta).unwrap();
        if rhs > 0.0 {
            worst = worst.max(lhs / rhs);
        }
    }
    let failures = if worst <= 2.0 {
        vec![]
    } else {
        vec![format!("ratio {worst}")]
    };
    finish(5, "integral of a sum at most twice the sum", &failures, &format!("200 pairs, max ratio {worst:.4}"));
}

#[test]
fn c06_maximal_inequality() {
    let start = Instant::now();
    let tuples = [
        (2.0, 0.0, 1.5, 1.5, 1.5),
        (2.0, 0.5, 1.5, 1.0, 1.5),
        (1.5, 0.0, 1.0, 1.0, 1.0),
    ];
    let functions = [
        ("ball", Sampler::ball_indicator(vec![0.0, 0.0], 0.5)),
        (
            "power",
            Sampler::radial_power(vec![0.0, 0.0], -0.5).truncated(vec![0.0, 0.0], 0.1, 1.0),
        ),
        ("bump", Sampler::bump(vec![0.0, 0.0], 0.6)),
    ];
    let depths = vec![4, 5, 6, 7];
    let mut failures = Vec::new();
    let mut summary = Vec::new();
    for (delta, mu, p, s, r) in tuples {
        for (name, f) in &functions {
            let cfg = verify::MaximalCheckConfig {
                f: f.clone(),
                delta,
                mu,
                p,
                s: LorentzQ::Finite(s),
                r: LorentzQ::Finite(r),
                depths: depths.clone(),
                ..Default::default()
            };
            let label = format!("({delta},{mu},{p},{s},{r}) {name}");
            check_report(
                &mut failures,
                &mut summary,
                &label,
                verify::maximal_inequality_check(&cfg),
                &depths,
            );
        }
    }
    let elapsed = start.elapsed();
    if elapsed > Duration::from_secs(600) {
        failures.push(format!("took {elapsed:?}"));
    }
    eprintln!("{}", summary.join("\n"));
    finish(
        6,
        "maximal inequality stable under refinement",
        &failures,
        &format!("9 cases over depths 4-7, {:.1}s", elapsed.as_secs_f64()),
    );
}

#[test]
fn c07_hedberg() {
    let mut failures = Vec::new();
    let mut summary = Vec::new();
    let base = verify::HedbergCheckConfig::default();
    let endpoint = verify::HedbergCheckConfig {
        hedberg: HedbergParams { p: 1.0, ..base.hedberg },
        ..base.clone()
    };
    for (label, cfg) in [("p=1.5", &base), ("p=1 endpoint", &endpoint)] {
        match verify::hedberg_check(cfg) {
            Ok(r) => {
                if cfg.depths.len() < 3 {
                    failures.push(format!("{label}: fewer than 3 depths"));
                }
                if !r.verdict.pass {
                    failures.push(format!("{label}: {}", r.verdict.detail));
                }
                let sups: Vec<String> = cfg
                    .depths
                    .iter()
                    .map(|d| format!("{:.3}", r.value(&format!("d{d}.ratio")).unwrap_or(f64::NAN)))
                    .collect();
                summary.push(format!("{label} sup {}", sups.join("/")));
            }
            Err(e) => failures.push(format!("{label}: error {e}")),
        }
    }
    finish(7, "Hedberg constant stable", &failures, &summary.join("; "));
}

#[test]
fn c08_examples() {
    let origin = || vec![0.0, 0.0];
    let depths = vec![4, 5, 6];
    let mut failures = Vec::new();
    let mut summary = Vec::new();

    let poincare = [
        ("affine", verify::PoincareConfig { b_scan: false, ..Default::default() }),
        (
            "|x|^0.5",
            verify::PoincareConfig {
                u: Sampler::radial_power(origin(), 0.5),
                delta: 1.5,
                p: 1.2,
                q: LorentzQ::Finite(1.2),
                b_scan: false,
                ..Default::default()
            },
        ),
        (
            "constant",
            verify::PoincareConfig {
                u: Sampler::constant(2.0),
                b_scan: false,
                ..Default::default()
            },
        ),
    ];
    for (name, cfg) in &poincare {
        let label = format!("poincare {name}");
        check_report(&mut failures, &mut summary, &label, verify::poincare_check(cfg), &cfg.depths);
    }

    let weak = [
        ("affine", verify::PoincareWeakConfig::default()),
        (
            "|x|^0.6",
            verify::PoincareWeakConfig {
                u: Sampler::radial_power(origin(), 0.6),
                delta: 1.0,
                p: 0.5,
                ..Default::default()
            },
        ),
        (
            "constant",
            verify::PoincareWeakConfig {
                u: Sampler::constant(-1.0),
                ..Default::default()
            },
        ),
    ];
    for (name, cfg) in &weak {
        let label = format!("weak {name}");
        check_report(&mut failures, &mut summary, &label, verify::poincare_weak_check(cfg), &cfg.depths);
    }

    let sobolev = [
        ("p=1.5 q=6", verify::PoincareSobolevConfig::default()),
        (
            "mu=0.5 p=1.2 q=2.1",
            verify::PoincareSobolevConfig {
                mu: 0.5,
                p: 1.2,
                q: LorentzQ::Finite(2.1),
                ..Default::default()
            },
        ),
        (
            "constant",
            verify::PoincareSobolevConfig {
                u: Sampler::constant(1.0),
                ..Default::default()
            },
        ),
    ];
    for (name, cfg) in &sobolev {
        let label = format!("sobolev {name}");
        check_report(&mut failures, &mut summary, &label, verify::poincare_sobolev_check(cfg), &cfg.depths);
    }
    // the second index must clear its floor
    let low_q = verify::PoincareSobolevConfig {
        mu: 0.5,
        p: 1.2,
        q: LorentzQ::Finite(1.7),
        ..Default::default()
    };
    match verify::poincare_sobolev_check(&low_q) {
        Err(Error::Parameter { name, .. }) if name == "q" => {}
        other => failures.push(format!("sobolev q=1.7 should be rejected, got {other:?}")),
    }

    for form in [verify::CompactForm::Diameter, verify::CompactForm::Sobolev] {
        for p in [1.5, 1.0] {
            // the Sobolev form needs q above its floor (4 at p = 1.5)
            let q = match form {
                verify::CompactForm::Sobolev => LorentzQ::Finite(6.0),
                verify::CompactForm::Diameter => LorentzQ::Finite(1.5),
            };
            let cfg = verify::CompactSupportConfig {
                form,
                p,
                q,
                ..Default::default()
            };
            let label = format!("compact {form:?} p={p}");
            check_report(&mut failures, &mut summary, &label, verify::compact_support_check(&cfg), &cfg.depths);
        }
    }
    let zero = verify::CompactSupportConfig {
        u: Sampler::constant(0.0),
        ..Default::default()
    };
    check_report(&mut failures, &mut summary, "compact zero", verify::compact_support_check(&zero), &zero.depths);
    let touching = verify::CompactSupportConfig {
        u: Sampler::bump(origin(), 1.2),
        ..Default::default()
    };
    match verify::compact_support_check(&touching) {
        Err(Error::SupportTouchesBoundary) => summary.push("compact touching: rejected".into()),
        other => failures.push(format!("support touching the boundary accepted: {other:?}")),
    }

    let riesz = [
        ("p=1.5", verify::RieszCheckConfig::default()),
        (
            "p=1 endpoint",
            verify::RieszCheckConfig {
                p: 1.0,
                ..Default::default()
            },
        ),
        (
            "f=0",
            verify::RieszCheckConfig {
                f: Sampler::constant(0.0),
                ..Default::default()
            },
        ),
    ];
    for (name, cfg) in &riesz {
        let label = format!("riesz {name}");
        check_report(&mut failures, &mut summary, &label, verify::riesz_boundedness_check(cfg), &cfg.depths);
    }

    assert_eq!(depths.len(), 3);
    eprintln!("{}", summary.join("\n"));
    finish(8, "listed examples", &failures, &format!("{} runs, all with >= 3 depths", summary.len()));
}

#[test]
fn c09_sharpness_poincare() {
    let start = Instant::now();
    let run = verify::sharpness_poincare(&verify::SharpnessPoincareConfig::default()).unwrap();
    let elapsed = start.elapsed();
    let mut failures = Vec::new();
    if !run.report.verdict.pass {
        failures.push(run.report.verdict.detail.clone());
    }
    if elapsed > Duration::from_secs(900) {
        failures.push(format!("took {elapsed:?}"));
    }
    finish(
        9,
        "gradient sharpness slope",
        &failures,
        &format!("{} ({:.1}s)", run.report.verdict.detail, elapsed.as_secs_f64()),
    );
}

#[test]
fn c10_sharpness_riesz() {
    let run = verify::sharpness_riesz(&verify::SharpnessRieszConfig::default()).unwrap();
    let failures = if run.report.verdict.pass {
        vec![]
    } else {
        vec![run.report.verdict.detail.clone()]
    };
    finish(10, "Riesz sharpness slope", &failures, &run.report.verdict.detail);
}

#[test]
fn c11_interpolation_family() {
    let report = verify::interp_family_check(&verify::InterpFamilyConfig::default()).unwrap();
    let failures = if report.verdict.pass {
        vec![]
    } else {
        vec![report.verdict.detail.clone()]
    };
    finish(11, "interpolation norm equivalence", &failures, &report.verdict.detail);
}

#[test]
fn c12_reproducible_reports() {
    let mut failures = Vec::new();
    for name in verify::EXPERIMENTS {
        let config = verify::default_config(name).unwrap();
        let a = verify::run_named(name, config.clone()).unwrap().to_json().unwrap();
        let b = verify::run_named(name, config).unwrap().to_json().unwrap();
        if a != b {
            failures.push(format!("{name}: reports differ"));
        }
        let replay = ExperimentReport::from_json(&a).unwrap();
        let c = verify::run_named(name, replay.params["config"].clone())
            .unwrap()
            .to_json()
            .unwrap();
        if c != a {
            failures.push(format!("{name}: replay from embedded config differs"));
        }
    }
    finish(
        12,
        "byte-identical reports",
        &failures,
        &format!("{} experiments run three times each", verify::EXPERIMENTS.len()),
    );
}
