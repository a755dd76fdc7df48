//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Exits 0 after reporting unless `TOPT_ACCEPTANCE_STRICT=1`, in which case
//! any failure makes the process exit 1. `TOPT_ACCEPTANCE_ONLY=1,5,7` runs a
//! subset.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::path::{Path, PathBuf};
use std::time::Instant;

use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use topt_cli::commands::{execute_run, execute_verify_order, thread_budget, RunOutcome};
use topt_cli::RunConfig;
use topt_core::flow::{evaluate, filtered_sensitivity};
use topt_core::smoothing::{filter_sensitivity, heat_smooth};
use topt_core::transport::{w2_entropic, w2_exact, SinkhornOptions};
use topt_core::{
    DiscreteMeasure, ElasticProblem, FlowParams, HeatProblem, KappaParams, LameParameters, Mesh,
    P1Space, SolverOptions, StateProblem,
};

// Tolerances and gates.
const MASS_TOL: f64 = 1e-8;
const MASS_RUNTIME_SECS: f64 = 120.0;
const DISSIPATION_REL_TOL: f64 = 1e-6;
const DISSIPATION_STEPS: usize = 200;
const FD_STEP: f64 = 1e-4;
const FD_DIRECTIONS: usize = 5;
const FD_REL_TOL: f64 = 1e-3;
const STRIP_RATIO: (f64, f64) = (3.5, 4.5);
const STRIP_J_TOL: f64 = 1e-3;
const ORACLE_TOL: f64 = 1e-10;
const DMP_FIELDS: usize = 100;
const SLOPE_BAND: (f64, f64) = (0.3, 1.2);
const ORDER_RUNTIME_SECS: f64 = 300.0;
const OT_INSTANCES: usize = 50;
const OT_MAX_POINTS: usize = 16;
const OT_REL_TOL: f64 = 0.01;
const METRIC_TOL: f64 = 1e-9;
const SEPARATION_RATIO: f64 = 10.0;

struct Report {
    failures: usize,
    total: usize,
}

impl Report {
    fn line(&mut self, id: &str, pass: bool, text: String) {
        self.total += 1;
        if !pass {
            self.failures += 1;
        }
        println!("{} [{id}] {text}", if pass { "PASS" } else { "FAIL" });
    }
}

fn presets() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../presets")
}

fn work_dir() -> PathBuf {
    Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance")
}

fn main() {
    let only: Option<Vec<String>> = std::env::var("TOPT_ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').map(|s| s.trim().to_string()).collect());
    let wanted = |id: &str| only.as_ref().is_none_or(|o| o.iter().any(|x| x == id));
    let mut report = Report {
        failures: 0,
        total: 0,
    };

    let runs = if wanted("1") || wanted("2") || wanted("8") {
        preset_runs(if wanted("8") { None } else { Some("heat_d2_e2") })
    } else {
        Vec::new()
    };
    if wanted("1") {
        criterion_mass(&mut report, &runs);
    }
    if wanted("2") {
        criterion_dissipation(&mut report, &runs);
    }
    if wanted("3") {
        criterion_sensitivity(&mut report);
    }
    if wanted("4") {
        criterion_strip(&mut report);
    }
    if wanted("5") {
        criterion_oracles(&mut report);
    }
    if wanted("6") {
        criterion_order(&mut report);
    }
    if wanted("7") {
        criterion_transport(&mut report);
    }
    if wanted("8") {
        criterion_presets(&mut report, &runs);
    }

    println!(
        "acceptance: {} of {} criteria passed",
        report.total - report.failures,
        report.total
    );
    let strict = std::env::var("TOPT_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if strict && report.failures > 0 {
        std::process::exit(1);
    }
}

type PresetRun = (String, Result<RunOutcome, String>);

/// Runs the shipped heat and elastic presets (or only `single`).
fn preset_runs(single: Option<&str>) -> Vec<PresetRun> {
    let names: Vec<String> = ["heat", "elastic"]
        .iter()
        .flat_map(|k| {
            ["2", "3", "4"].into_iter().flat_map(move |d| {
                ["2", "3", "4"]
                    .into_iter()
                    .map(move |e| format!("{k}_d{d}_e{e}"))
            })
        })
        .filter(|n| single.is_none_or(|s| s == n))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_budget(None))
        .build()
        .unwrap();
    pool.install(|| {
        names
            .par_iter()
            .map(|name| {
                let result = RunConfig::load(&presets().join(format!("{name}.json")))
                    .and_then(|c| execute_run(&c, &work_dir().join(name)))
                    .map_err(|e| format!("{e:#}"));
                (name.clone(), result)
            })
            .collect()
    })
}

fn find<'a>(runs: &'a [PresetRun], name: &str) -> Option<&'a RunOutcome> {
    runs.iter()
        .find(|(n, _)| n == name)
        .and_then(|(_, r)| r.as_ref().ok())
        .filter(|o| o.failure.is_none())
}

fn criterion_mass(report: &mut Report, runs: &[PresetRun]) {
    let Some(o) = find(runs, "heat_d2_e2") else {
        report.line("1", false, "mass conservation: heat_d2_e2 did not complete".into());
        return;
    };
    let err = o.history.max_abs_log_mass_error();
    let steps = o.history.len() - 1;
    report.line(
        "1",
        err < MASS_TOL && steps == 500 && o.seconds < MASS_RUNTIME_SECS,
        format!(
            "mass conservation: max |log(m_i/m_0)| = {err:.2e} (< {MASS_TOL:e}) over {steps} steps, {:.1} s (< {MASS_RUNTIME_SECS} s)",
            o.seconds
        ),
    );
}

fn criterion_dissipation(report: &mut Report, runs: &[PresetRun]) {
    let Some(o) = find(runs, "heat_d2_e2") else {
        report.line("2", false, "objective decrease: heat_d2_e2 did not complete".into());
        return;
    };
    let j = o.history.objectives();
    let violations = o
        .history
        .dissipation_violations(DISSIPATION_REL_TOL, DISSIPATION_STEPS);
    let decreased = j[j.len() - 1] < j[0];
    let first = violations
        .first()
        .map_or(String::new(), |s| format!(", first at step {s}"));
    report.line(
        "2",
        violations.is_empty() && decreased,
        format!(
            "objective decrease: {} increases beyond {DISSIPATION_REL_TOL:e}*J0 in steps 1-{DISSIPATION_STEPS}{first}; J0 = {:.6e}, J_final = {:.6e}",
            violations.len(),
            j[0],
            j[j.len() - 1]
        ),
    );
}

fn fd_error<P: StateProblem>(prob: &P, rho: &[f64], seed: u64) -> f64 {
    let params = FlowParams::new(1e-2, 0.0, 0.0, 1e-3, 1);
    let j = |r: &[f64]| evaluate(prob, r, &params, None).unwrap().state.objective;
    let eval = evaluate(prob, rho, &params, None).unwrap();
    let s = filtered_sensitivity(prob, rho, &eval, &params).unwrap();
    let lumped = prob.space().lumped_areas();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..FD_DIRECTIONS {
        let psi: Vec<f64> = (0..rho.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let at = |t: f64| -> Vec<f64> { rho.iter().zip(&psi).map(|(r, p)| r + t * p).collect() };
        let fd = (j(&at(FD_STEP)) - j(&at(-FD_STEP))) / (2.0 * FD_STEP);
        let assembled: f64 = (0..rho.len()).map(|i| lumped[i] * s[i] * psi[i]).sum();
        worst = worst.max((fd - assembled).abs() / assembled.abs());
    }
    worst
}

fn criterion_sensitivity(report: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let heat = HeatProblem::new(
        heat_space(8, 0.375, 0.625),
        KappaParams::heat_default(),
        0.5,
        0.0,
    )
    .unwrap();
    let rho: Vec<f64> = (0..heat.space().node_count())
        .map(|_| rng.gen_range(0.5..1.5))
        .collect();
    let e_heat = fd_error(&heat, &rho, 31);

    let elastic = ElasticProblem::new(
        cantilever_space(8, 4, 0.25, 0.75),
        KappaParams::elastic_default(),
        LameParameters::new(15.0 / 26.0, 5.0 / 13.0).unwrap(),
        [0.0, 0.0],
        [0.0, -1.0],
    )
    .unwrap();
    let rho: Vec<f64> = (0..elastic.space().node_count())
        .map(|_| rng.gen_range(1.0..3.0))
        .collect();
    let e_elastic = fd_error(&elastic, &rho, 32);
    report.line(
        "3",
        e_heat < FD_REL_TOL && e_elastic < FD_REL_TOL,
        format!(
            "sensitivity vs centred FD (step {FD_STEP:e}, {FD_DIRECTIONS} directions): heat 8x8 {e_heat:.2e}, elastic 8x4 {e_elastic:.2e} (< {FD_REL_TOL:e}); sensitivity_scale = -0.5"
        ),
    );
}

fn strip(n: usize) -> (f64, f64) {
    const RULE: [(f64, f64, f64); 2] = [
        (0.445_948_490_915_965, 0.108_103_018_168_070, 0.223_381_589_678_011),
        (0.091_576_213_509_771, 0.816_847_572_980_459, 0.109_951_743_655_322),
    ];
    let space = heat_space(n, 0.0, 1.0);
    let prob = HeatProblem::new(space.clone(), KappaParams::unit(), 1.0, 0.0).unwrap();
    let state = prob.solve_state(&vec![1.0; space.node_count()]).unwrap();
    let mesh = space.mesh();
    let mut err2 = 0.0;
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let p = tri.map(|i| mesh.nodes()[i]);
        let area = mesh.signed_area(t).abs();
        for &(a, b, w) in &RULE {
            for lam in [[a, a, b], [a, b, a], [b, a, a]] {
                let x: f64 = (0..3).map(|k| lam[k] * p[k][0]).sum();
                let uh: f64 = (0..3).map(|k| lam[k] * state.u.values[tri[k]]).sum();
                err2 += w * area * (uh - (x - 0.5 * x * x)).powi(2);
            }
        }
    }
    (err2.sqrt(), state.objective)
}

fn criterion_strip(report: &mut Report) {
    let runs: Vec<(f64, f64)> = [8, 16, 32, 64].iter().map(|&n| strip(n)).collect();
    let ratios: Vec<f64> = runs.windows(2).map(|w| w[0].0 / w[1].0).collect();
    let j = runs[3].1;
    let ok = ratios
        .iter()
        .all(|r| (STRIP_RATIO.0..=STRIP_RATIO.1).contains(r))
        && (j - 1.0 / 6.0).abs() < STRIP_J_TOL;
    report.line(
        "4",
        ok,
        format!(
            "manufactured strip: L2 ratios {:.3?} in [{}, {}], J(64x64) = {j:.6} (|J - 1/6| = {:.1e} < {STRIP_J_TOL:e})",
            ratios,
            STRIP_RATIO.0,
            STRIP_RATIO.1,
            (j - 1.0 / 6.0).abs()
        ),
    );
}

fn criterion_oracles(report: &mut Report) {
    let mesh = Mesh::rectangle(1.0, 1.0, 8, 8).unwrap();
    let space = P1Space::new(mesh.clone());
    let opts = SolverOptions::robust().with_tol(1e-13);
    let m = dense_mass(&mesh);
    let l = lumped(&m);
    let k1 = dense_stiffness(&mesh, &vec![1.0; space.triangle_count()]);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut field = |lo: f64, hi: f64| -> Vec<f64> {
        (0..space.node_count()).map(|_| rng.gen_range(lo..hi)).collect()
    };

    let mut worst_smooth = 0.0f64;
    let mut worst_filter = 0.0f64;
    for p in [1e-4, 1e-3, 1e-2] {
        let f = field(-1.0, 2.0);
        let dense = dense_solve(&(&l + &k1 * p), &(&l * to_dvec(&f)));
        let (x, _) = heat_smooth(&space, &f, p, &opts).unwrap();
        worst_smooth = worst_smooth.max(max_abs_diff(&x, dense.as_slice()));

        let s = field(-5.0, 5.0);
        let w = field(0.01, 4.0);
        let k = dense_stiffness(&mesh, &element_average(&mesh, &w));
        let dense = dense_solve(&(&m + &k * p), &(&m * to_dvec(&s)));
        let (y, _) = filter_sensitivity(&space, &s, &w, p, &opts).unwrap();
        worst_filter = worst_filter.max(max_abs_diff(&y, dense.as_slice()));
    }

    let mut dmp_violations = 0;
    for _ in 0..DMP_FIELDS {
        let delta = 10f64.powf(rng.gen_range(-5.0..0.0));
        let f: Vec<f64> = (0..space.node_count())
            .map(|_| rng.gen_range(-2.0..3.0))
            .collect();
        let lo = f.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = f.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let (x, _) = heat_smooth(&space, &f, delta, &opts).unwrap();
        if x.iter().any(|v| *v < lo - 1e-12 || *v > hi + 1e-12) {
            dmp_violations += 1;
        }
    }
    report.line(
        "5",
        worst_smooth < ORACLE_TOL && worst_filter < ORACLE_TOL && dmp_violations == 0,
        format!(
            "dense oracles 8x8: heat_smooth {worst_smooth:.1e}, filter {worst_filter:.1e} (< {ORACLE_TOL:e}); maximum principle violated in {dmp_violations} of {DMP_FIELDS} random fields"
        ),
    );
}

fn criterion_order(report: &mut Report) {
    let path = presets().join("verify_order.json");
    let start = Instant::now();
    let result = RunConfig::load(&path)
        .and_then(|c| execute_verify_order(&c, &work_dir().join("verify_order")));
    let secs = start.elapsed().as_secs_f64();
    match result {
        Ok(r) => {
            let in_band = (SLOPE_BAND.0..=SLOPE_BAND.1).contains(&r.slope);
            report.line(
                "6",
                r.monotone() && in_band && secs < ORDER_RUNTIME_SECS,
                format!(
                    "filter order 16x16: E = [{}] at eta = {:?}; monotone = {}, slope = {:.4} (band [{}, {}]), {secs:.1} s",
                    r.errors
                        .iter()
                        .map(|e| format!("{e:.4e}"))
                        .collect::<Vec<_>>()
                        .join(", "),
                    r.etas,
                    r.monotone(),
                    r.slope,
                    SLOPE_BAND.0,
                    SLOPE_BAND.1
                ),
            );
        }
        Err(e) => report.line("6", false, format!("filter order: {e:#}")),
    }
}

fn random_measure(rng: &mut ChaCha8Rng) -> DiscreteMeasure {
    let n = rng.gen_range(1..=OT_MAX_POINTS);
    let points = (0..n)
        .map(|_| [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)])
        .collect();
    let weights = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
    DiscreteMeasure::new(points, weights).unwrap()
}

fn criterion_transport(report: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let opts = SinkhornOptions::default();
    let mut worst_rel = 0.0f64;
    let mut worst_sym = 0.0f64;
    let mut worst_tri = f64::NEG_INFINITY;
    let mut errors = 0;
    for _ in 0..OT_INSTANCES {
        let (a, b, c) = (
            random_measure(&mut rng),
            random_measure(&mut rng),
            random_measure(&mut rng),
        );
        let w = |x: &DiscreteMeasure, y: &DiscreteMeasure| w2_exact(x, y).unwrap().0;
        let exact = w(&a, &b);
        match w2_entropic(&a, &b, &opts) {
            Ok(approx) if exact > 0.0 => {
                worst_rel = worst_rel.max((approx - exact).abs() / exact)
            }
            Ok(_) => {}
            Err(_) => errors += 1,
        }
        worst_sym = worst_sym.max((exact - w(&b, &a)).abs());
        worst_tri = worst_tri.max(w(&a, &c) - exact - w(&b, &c));
    }
    report.line(
        "7",
        worst_rel < OT_REL_TOL && errors == 0 && worst_sym < METRIC_TOL && worst_tri <= METRIC_TOL,
        format!(
            "transport, {OT_INSTANCES} instances of <= {OT_MAX_POINTS} points: entropic vs exact worst {worst_rel:.2e} (< {OT_REL_TOL}), {errors} Sinkhorn failures; symmetry {worst_sym:.1e}, triangle excess {worst_tri:.1e} (<= {METRIC_TOL:e})"
        ),
    );
}

fn criterion_presets(report: &mut Report, runs: &[PresetRun]) {
    let mut ok = 0;
    for (name, result) in runs {
        let detail = match result {
            Err(e) => format!("setup error: {e}"),
            Ok(o) => {
                let files = [
                    "history.csv",
                    "final.vtk",
                    "objective.svg",
                    "mass_error.svg",
                ]
                .iter()
                .all(|f| o.output.join(f).is_file());
                let min = o.final_rho.iter().copied().fold(f64::INFINITY, f64::min);
                let max = o.final_rho.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let separated = max > SEPARATION_RATIO * min.max(0.0);
                let steps = o.history.len() - 1;
                let pass = o.failure.is_none() && files && separated;
                if pass {
                    ok += 1;
                }
                format!(
                    "{} after {steps} steps in {:.1} s; artifacts {}; rho in [{min:.3e}, {max:.3e}]{}; J {:.4e} -> {:.4e}; {} negative node-steps{}",
                    if o.failure.is_none() { "completed" } else { "stopped" },
                    o.seconds,
                    if files { "present" } else { "missing" },
                    if min > 0.0 {
                        format!(", max/min = {:.1}", max / min)
                    } else {
                        String::new()
                    },
                    o.history.records[0].objective,
                    o.history.records[steps].objective,
                    o.history.total_negativity_events(),
                    o.failure.as_deref().map_or(String::new(), |f| format!("; error: {f}"))
                )
            }
        };
        println!("       {name}: {detail}");
    }
    report.line(
        "8",
        ok == 18 && runs.len() == 18,
        format!(
            "presets: {ok} of 18 completed with history/VTK/SVG and max rho > {SEPARATION_RATIO} * max(min rho, 0)"
        ),
    );
}
