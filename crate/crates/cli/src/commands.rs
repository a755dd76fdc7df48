//! The four subcommands, usable as library functions.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use anyhow::{bail, ensure, Context, Result};
use rayon::prelude::*;
use topt_core::flow::{evaluate, verify_eta_order, OrderOptions, OrderReport};
use topt_core::transport::{
    nodal_measure, w2_entropic, w2_exact, SinkhornOptions, EXACT_SUPPORT_LIMIT,
};
use topt_core::{
    run_flow, ElasticProblem, FlowHistory, HeatProblem, LameParameters, Mesh, P1Space,
    StateProblem, TransportMethod,
};

use crate::config::{resolved, Initial, Load, ProblemKind, RunConfig};
use crate::io::{density_csv, history_csv, vtk, DensityFile};
use crate::plot::{line_plot, Axes, Series};

/// Caps worker threads when set to a positive integer.
pub const THREADS_ENV: &str = "TOPT_THREADS";

pub enum Problem {
    Heat(HeatProblem),
    Elastic(ElasticProblem),
}

impl Problem {
    pub fn build(config: &RunConfig) -> Result<Self> {
        let d = config.domain;
        let mesh = Mesh::rectangle(d.lx, d.ly, d.nx, d.ny)?
            .tag_boundary(&config.boundary)
            .context("boundary")?;
        let space = Arc::new(P1Space::new(mesh));
        Ok(match (config.problem, config.sources.f, config.sources.g) {
            (ProblemKind::Heat, Load::Scalar(f), Load::Scalar(g)) => {
                Self::Heat(HeatProblem::new(space, config.material, f, g)?)
            }
            (ProblemKind::Elastic, Load::Vector(f), Load::Vector(g)) => {
                let lame = config.lame.context("elastic problems need `lame`")?;
                let lame = LameParameters::new(lame.lambda1, lame.lambda2)?;
                Self::Elastic(ElasticProblem::new(space, config.material, lame, f, g)?)
            }
            _ => bail!("sources do not match the problem kind"),
        })
    }

    pub fn state(&self) -> &dyn StateProblem {
        match self {
            Self::Heat(p) => p,
            Self::Elastic(p) => p,
        }
    }
}

pub fn initial_density(config: &RunConfig, space: &P1Space) -> Result<Vec<f64>> {
    match &config.initial {
        Initial::Constant(c) => Ok(vec![*c; space.node_count()]),
        Initial::File(path) => {
            let file = DensityFile::read(path)?;
            Ok(file.on_mesh(space.mesh())?.to_vec())
        }
    }
}

/// Where a run writes when neither `--out` nor `output` is given.
pub fn default_output(config_path: &Path) -> PathBuf {
    let stem = config_path
        .file_stem()
        .map_or("run".into(), |s| s.to_string_lossy().into_owned());
    PathBuf::from("runs").join(stem)
}

pub fn output_dir(config: &RunConfig, config_path: &Path, cli: Option<&Path>) -> PathBuf {
    cli.map(Path::to_path_buf)
        .or_else(|| config.output.clone())
        .unwrap_or_else(|| default_output(config_path))
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub output: PathBuf,
    pub history: FlowHistory,
    pub final_rho: Vec<f64>,
    /// Solver failure that stopped the run early.
    pub failure: Option<String>,
    pub seconds: f64,
}

/// Runs the flow and writes every artifact into `out`. Setup errors return
/// `Err` before anything is written; solver failures still flush the partial
/// history and are reported in [`RunOutcome::failure`].
pub fn execute_run(config: &RunConfig, out: &Path) -> Result<RunOutcome> {
    let problem = Problem::build(config)?;
    let prob = problem.state();
    let space = prob.space();
    let rho0 = initial_density(config, space)?;

    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    fs::write(
        out.join("resolved-config.json"),
        resolved(config, out).pretty_json(),
    )?;

    let start = Instant::now();
    let (rho, history, failure) = match run_flow(prob, &rho0, &config.flow) {
        Ok((rho, history)) => (rho, history, None),
        Err(f) => (f.rho, f.history, Some(f.error.to_string())),
    };
    let seconds = start.elapsed().as_secs_f64();

    let mesh = space.mesh();
    fs::write(out.join("history.csv"), history_csv(&history.records))?;
    fs::write(out.join("final_density.csv"), density_csv(mesh, &rho))?;
    let state = if failure.is_none() {
        evaluate(prob, &rho, &config.flow, None).ok().map(|e| e.state.u)
    } else {
        None
    };
    fs::write(out.join("final.vtk"), vtk(mesh, &rho, state.as_ref()))?;
    write_history_plots(out, &history)?;

    Ok(RunOutcome {
        output: out.to_path_buf(),
        history,
        final_rho: rho,
        failure,
        seconds,
    })
}

fn write_history_plots(out: &Path, history: &FlowHistory) -> Result<()> {
    let steps = |f: fn(&topt_core::FlowRecord) -> f64| -> Vec<(f64, f64)> {
        history.records.iter().map(|r| (r.step as f64, f(r))).collect()
    };
    fs::write(
        out.join("objective.svg"),
        line_plot(
            &Axes {
                title: "Objective",
                xlabel: "step",
                ylabel: "J",
                ..Default::default()
            },
            &[Series::line("J", steps(|r| r.objective))],
        ),
    )?;
    fs::write(
        out.join("mass_error.svg"),
        line_plot(
            &Axes {
                title: "Logarithmic relative mass error",
                xlabel: "step",
                ylabel: "log(m_i / m_0)",
                ..Default::default()
            },
            &[Series::line("log(m_i/m_0)", steps(|r| r.log_rel_mass_error))],
        ),
    )?;
    Ok(())
}

/// Thread budget: `requested` (or all cores) capped by `TOPT_THREADS`.
pub fn thread_budget(requested: Option<usize>) -> usize {
    let cap = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|n| *n > 0);
    let base = requested.unwrap_or_else(|| {
        std::thread::available_parallelism().map_or(1, |n| n.get())
    });
    cap.map_or(base, |c| base.min(c)).max(1)
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub delta: f64,
    pub eta: f64,
    pub tau: f64,
    pub dir: String,
    pub outcome: std::result::Result<RunOutcome, String>,
}

impl SweepRow {
    pub fn succeeded(&self) -> bool {
        matches!(&self.outcome, Ok(o) if o.failure.is_none())
    }
}

pub const SUMMARY_HEADER: &str = "delta,eta,tau,dir,status,steps,initial_objective,final_objective,max_abs_log_mass_error,min_rho,max_rho,negativity_events,seconds,message";

/// Subdirectory name of one sweep entry, e.g. `d1e-2_e1e-3`.
pub fn pair_dir(delta: f64, eta: f64) -> String {
    format!("d{delta:e}_e{eta:e}")
}

/// Runs every `(delta, eta)` pair of the config's sweep section concurrently
/// and writes `summary.csv` to `out`.
pub fn execute_sweep(config: &RunConfig, out: &Path, jobs: Option<usize>) -> Result<Vec<SweepRow>> {
    let sweep = config
        .sweep
        .as_ref()
        .context("config has no `sweep` section")?;
    let pairs: Vec<(f64, f64, f64)> = sweep
        .deltas
        .iter()
        .flat_map(|&d| sweep.etas.iter().map(move |&e| (d, e)))
        .map(|(d, e)| (d, e, sweep.tau_for(d, e, config.flow.tau)))
        .collect();
    // Validate every pair before any output exists.
    for &(d, e, t) in &pairs {
        config.with_pair(d, e, t).validate()?;
    }
    fs::create_dir_all(out)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_budget(jobs))
        .build()?;
    let rows: Vec<SweepRow> = pool.install(|| {
        pairs
            .par_iter()
            .map(|&(delta, eta, tau)| {
                let dir = pair_dir(delta, eta);
                let outcome = execute_run(&config.with_pair(delta, eta, tau), &out.join(&dir))
                    .map_err(|e| format!("{e:#}"));
                SweepRow {
                    delta,
                    eta,
                    tau,
                    dir,
                    outcome,
                }
            })
            .collect()
    });
    fs::write(out.join("summary.csv"), summary_csv(&rows))?;
    Ok(rows)
}

pub fn summary_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from(SUMMARY_HEADER);
    s.push('\n');
    for r in rows {
        let line = match &r.outcome {
            Ok(o) => {
                let h = &o.history.records;
                let (first, last) = (h.first(), h.last());
                let status = if o.failure.is_some() { "failed" } else { "ok" };
                format!(
                    "{},{},{},{},{status},{},{},{},{},{},{},{},{:.3},{}",
                    r.delta,
                    r.eta,
                    r.tau,
                    r.dir,
                    last.map_or(0, |l| l.step),
                    first.map_or(f64::NAN, |f| f.objective),
                    last.map_or(f64::NAN, |l| l.objective),
                    o.history.max_abs_log_mass_error(),
                    o.final_rho.iter().copied().fold(f64::INFINITY, f64::min),
                    o.final_rho.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                    o.history.total_negativity_events(),
                    o.seconds,
                    csv_text(o.failure.as_deref().unwrap_or("")),
                )
            }
            Err(e) => format!(
                "{},{},{},{},error,0,,,,,,,,{}",
                r.delta,
                r.eta,
                r.tau,
                r.dir,
                csv_text(e)
            ),
        };
        s.push_str(&line);
        s.push('\n');
    }
    s
}

fn csv_text(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Runs the filter-order study and writes `order.csv`, `order.svg` and
/// `order.json` to `out`.
pub fn execute_verify_order(config: &RunConfig, out: &Path) -> Result<OrderReport> {
    let spec = config
        .order
        .as_ref()
        .context("config has no `order` section")?;
    let problem = Problem::build(config)?;
    let prob = problem.state();
    let rho0 = initial_density(config, prob.space())?;
    let opts = OrderOptions {
        eta_ref: spec.eta_ref,
        max_cells: spec.max_cells,
        method: spec.method,
    };
    let report = verify_eta_order(prob, &config.flow, &spec.etas, &rho0, &opts)?;

    fs::create_dir_all(out)?;
    fs::write(
        out.join("resolved-config.json"),
        resolved(config, out).pretty_json(),
    )?;
    let mut csv = String::from("eta,error,fitted\n");
    for ((eta, e), f) in report.etas.iter().zip(&report.errors).zip(&report.fitted) {
        csv.push_str(&format!("{eta},{e},{f}\n"));
    }
    fs::write(out.join("order.csv"), csv)?;
    fs::write(
        out.join("order.json"),
        serde_json::to_string_pretty(&report)?,
    )?;

    let measured: Vec<(f64, f64)> = report
        .etas
        .iter()
        .copied()
        .zip(report.errors.iter().copied())
        .collect();
    let fit: Vec<(f64, f64)> = report
        .etas
        .iter()
        .map(|&eta| (eta, (report.slope * eta.ln() + report.intercept).exp()))
        .collect();
    let legend = format!("fit, slope {:.3}", report.slope);
    fs::write(
        out.join("order.svg"),
        line_plot(
            &Axes {
                title: "Filtering error against the reference flow",
                xlabel: "eta",
                ylabel: "E(eta) = max_t W2",
                log_x: true,
                log_y: true,
            },
            &[
                Series {
                    label: "E(eta)",
                    points: measured,
                    markers: true,
                    dashed: false,
                },
                Series {
                    label: &legend,
                    points: fit,
                    markers: false,
                    dashed: true,
                },
            ],
        ),
    )?;
    Ok(report)
}

/// The structured mesh whose nodes are `points`, with the row-major node
/// order [`Mesh::rectangle`] produces.
pub fn infer_mesh(points: &[[f64; 2]]) -> Result<Mesh> {
    ensure!(points.len() >= 4, "too few points for a rectangle mesh");
    let row = points.iter().take_while(|p| p[1] == points[0][1]).count();
    ensure!(row >= 2 && points.len() % row == 0, "points do not form a structured grid");
    let (nx, ny) = (row - 1, points.len() / row - 1);
    let last = points[points.len() - 1];
    let mesh = Mesh::rectangle(last[0], last[1], nx, ny)?;
    let tol = 1e-9 * mesh.diameter();
    ensure!(
        points
            .iter()
            .zip(mesh.nodes())
            .all(|(p, q)| (p[0] - q[0]).abs() <= tol && (p[1] - q[1]).abs() <= tol),
        "points do not form a structured rectangle mesh"
    );
    Ok(mesh)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct W2Result {
    pub distance: f64,
    pub method: TransportMethod,
    pub support: (usize, usize),
}

pub fn execute_w2(
    a: &Path,
    b: &Path,
    coarsen: Option<usize>,
    method: Option<TransportMethod>,
) -> Result<W2Result> {
    let fa = DensityFile::read(a)?;
    let fb = DensityFile::read(b)?;
    ensure!(
        fa.same_points(&fb),
        "mesh mismatch: {} and {} are not on the same nodes",
        a.display(),
        b.display()
    );
    let mesh = infer_mesh(&fa.points)?;
    let (lx, ly) = (mesh.lx(), mesh.ly());
    let space = P1Space::new(mesh);
    let measure = |rho: &[f64]| -> Result<_> {
        let m = nodal_measure(&space, rho)?.measure.pruned();
        Ok(match coarsen {
            Some(k) => m.coarsen(lx, ly, k, k)?,
            None => m,
        })
    };
    let (mu, nu) = (measure(&fa.rho)?, measure(&fb.rho)?);
    let fits = mu.len().max(nu.len()) <= EXACT_SUPPORT_LIMIT;
    let method = method.unwrap_or(if fits {
        TransportMethod::Exact
    } else {
        TransportMethod::Entropic
    });
    let distance = match method {
        TransportMethod::Exact => {
            ensure!(
                fits,
                "supports of {} and {} atoms exceed {EXACT_SUPPORT_LIMIT}; use --coarsen or --method entropic",
                mu.len(),
                nu.len()
            );
            w2_exact(&mu, &nu)?.0
        }
        TransportMethod::Entropic => w2_entropic(&mu, &nu, &SinkhornOptions::default())?,
    };
    Ok(W2Result {
        distance,
        method,
        support: (mu.len(), nu.len()),
    })
}
