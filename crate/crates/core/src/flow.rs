//! Time stepping of the filtered Wasserstein gradient flow.
//!
//! One step from `rho`:
//!
//! 1. `rho_t = heat_smooth(rho, delta)`
//! 2. solve the state with `kappa(rho_t)` and form the sensitivity `S`
//! 3. `S_d = heat_smooth(S, delta)`, `rho_bar = heat_smooth(rho, epsilon)`
//! 4. `S_eta = filter_sensitivity(S_d, rho_bar, eta)`
//! 5. solve `M rho_next = M rho - tau K(rho) S_eta`
//!
//! Step 5 is the weak form of `d rho/dt = div(rho grad S_eta)` with the
//! transport term taken explicitly at the old density. Testing with the
//! constant function shows `1^T M rho` is conserved exactly.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linsys::{solve_spd_from, SolverOptions};
use crate::physics::{StateProblem, StateSolution};
use crate::smoothing::{filter_sensitivity, heat_smooth, SmoothingParams};
use crate::transport::{
    nodal_measure, w2_entropic, w2_exact, DiscreteMeasure, SinkhornOptions, TransportMethod,
    EXACT_SUPPORT_LIMIT,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowParams {
    pub delta: f64,
    pub epsilon: f64,
    pub eta: f64,
    pub tau: f64,
    pub steps: usize,
    #[serde(default = "default_floor")]
    pub density_floor: f64,
    /// Cadence of saved densities for the error-order study.
    #[serde(default = "default_checkpoint_every")]
    pub checkpoint_every: usize,
}

/// Density floor for material-law evaluation inside the flow. Bounds the
/// coefficient contrast of the `variant = decaying` law to about `5e8`, which
/// the state solvers resolve in double precision.
pub const FLOW_DENSITY_FLOOR: f64 = 1e-3;

fn default_floor() -> f64 {
    FLOW_DENSITY_FLOOR
}

fn default_checkpoint_every() -> usize {
    10
}

impl FlowParams {
    pub fn new(delta: f64, epsilon: f64, eta: f64, tau: f64, steps: usize) -> Self {
        Self {
            delta,
            epsilon,
            eta,
            tau,
            steps,
            density_floor: FLOW_DENSITY_FLOOR,
            checkpoint_every: default_checkpoint_every(),
        }
    }

    pub fn smoothing(&self) -> SmoothingParams {
        SmoothingParams {
            delta: self.delta,
            epsilon: self.epsilon,
            eta: self.eta,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.smoothing().validate()?;
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(invalid(
                "tau",
                format!("must be positive, got {}", self.tau),
            ));
        }
        if !(self.density_floor > 0.0 && self.density_floor.is_finite()) {
            return Err(invalid("density_floor", "must be positive"));
        }
        if self.checkpoint_every == 0 {
            return Err(invalid("checkpoint_every", "must be at least 1"));
        }
        Ok(())
    }
}

/// State of the flow after `step` updates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowRecord {
    pub step: usize,
    /// `J` evaluated at the smoothed density `heat_smooth(rho, delta)`.
    pub objective: f64,
    /// `1^T M rho`.
    pub total_mass: f64,
    /// `log(m_i / m_0)`.
    pub log_rel_mass_error: f64,
    pub min_rho: f64,
    pub max_rho: f64,
    pub cg_iters_state: usize,
    /// Nodes with `rho < 0`.
    pub negativity_events: usize,
    /// Elements whose smoothed density was raised to the floor for `kappa`.
    pub clamped_elements: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FlowHistory {
    pub records: Vec<FlowRecord>,
}

impl FlowHistory {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn objectives(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.objective).collect()
    }

    pub fn max_abs_log_mass_error(&self) -> f64 {
        self.records
            .iter()
            .map(|r| r.log_rel_mass_error.abs())
            .fold(0.0, f64::max)
    }

    /// Steps `i <= upto` with `J_i > J_{i-1} + rel_tol * J_0`.
    pub fn dissipation_violations(&self, rel_tol: f64, upto: usize) -> Vec<usize> {
        let Some(first) = self.records.first() else {
            return Vec::new();
        };
        let tol = rel_tol * first.objective.abs();
        self.records
            .windows(2)
            .filter(|w| w[1].step <= upto && w[1].objective > w[0].objective + tol)
            .map(|w| w[1].step)
            .collect()
    }

    pub fn total_negativity_events(&self) -> usize {
        self.records.iter().map(|r| r.negativity_events).sum()
    }
}

/// Error of a run together with everything computed before it.
#[derive(Debug)]
pub struct FlowFailure {
    pub error: Error,
    pub history: FlowHistory,
    /// Last density that was successfully produced.
    pub rho: Vec<f64>,
}

impl fmt::Display for FlowFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "flow stopped after {} recorded states: {}",
            self.history.len(),
            self.error
        )
    }
}

impl std::error::Error for FlowFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

/// Tolerances of the auxiliary solves (smoothing, filter, mass matrix).
/// Tight because the mass solve carries the conservation property.
const AUX_SOLVER: SolverOptions = SolverOptions::robust().with_tol(1e-13);

/// Smoothed density and state belonging to one iterate.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub rho_smoothed: Vec<f64>,
    pub state: StateSolution,
}

/// Steps 1 and 2: smooth the density and solve the state.
pub fn evaluate<P: StateProblem + ?Sized>(
    prob: &P,
    rho: &[f64],
    params: &FlowParams,
    guess: Option<&[f64]>,
) -> Result<Evaluation> {
    let (rho_smoothed, _) = heat_smooth(prob.space(), rho, params.delta, &AUX_SOLVER)?;
    let state = prob.solve_state_with(&rho_smoothed, params.density_floor, guess)?;
    Ok(Evaluation {
        rho_smoothed,
        state,
    })
}

/// Filtered descent direction `S_eta` for an evaluated iterate.
pub fn filtered_sensitivity<P: StateProblem + ?Sized>(
    prob: &P,
    rho: &[f64],
    eval: &Evaluation,
    params: &FlowParams,
) -> Result<Vec<f64>> {
    let space = prob.space();
    let s = prob.sensitivity_with(&eval.rho_smoothed, &eval.state, params.density_floor)?;
    let (s_delta, _) = heat_smooth(space, &s, params.delta, &AUX_SOLVER)?;
    let (mut rho_bar, _) = heat_smooth(space, rho, params.epsilon, &AUX_SOLVER)?;
    for r in &mut rho_bar {
        *r = r.max(params.density_floor);
    }
    let (s_eta, _) = filter_sensitivity(space, &s_delta, &rho_bar, params.eta, &AUX_SOLVER)?;
    Ok(s_eta)
}

/// Remaining steps of one update given the evaluation of `rho`.
pub fn advance<P: StateProblem + ?Sized>(
    prob: &P,
    rho: &[f64],
    eval: &Evaluation,
    params: &FlowParams,
) -> Result<Vec<f64>> {
    let space = prob.space();
    let s_eta = filtered_sensitivity(prob, rho, eval, params)?;
    let weight = space.element_average(rho)?;
    let transport = space.weighted_laplacian_apply(&weight, &s_eta)?;
    if transport.iter().all(|t| *t == 0.0) {
        return Ok(rho.to_vec());
    }
    let mut rhs = space.mass().matvec(rho)?;
    for (b, t) in rhs.iter_mut().zip(&transport) {
        *b -= params.tau * t;
    }
    let (next, _) = solve_spd_from(space.mass(), &rhs, Some(rho), &AUX_SOLVER)?;
    Ok(next)
}

/// One full update. Returns the new density and the evaluation of the input.
pub fn flow_step<P: StateProblem + ?Sized>(
    prob: &P,
    rho: &[f64],
    params: &FlowParams,
) -> Result<(Vec<f64>, Evaluation)> {
    params.validate()?;
    let eval = evaluate(prob, rho, params, None)?;
    let next = advance(prob, rho, &eval, params)?;
    Ok((next, eval))
}

fn record<P: StateProblem + ?Sized>(
    prob: &P,
    step: usize,
    rho: &[f64],
    eval: &Evaluation,
    m0: f64,
) -> FlowRecord {
    let total_mass = prob.space().integrate(rho);
    FlowRecord {
        step,
        objective: eval.state.objective,
        total_mass,
        log_rel_mass_error: (total_mass / m0).ln(),
        min_rho: rho.iter().copied().fold(f64::INFINITY, f64::min),
        max_rho: rho.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        cg_iters_state: eval.state.report.iterations,
        negativity_events: rho.iter().filter(|r| **r < 0.0).count(),
        clamped_elements: eval.state.clamped_elements,
    }
}

/// Runs `params.steps` updates from `rho0`. The history holds one record per
/// iterate including the initial one.
pub fn run_flow<P: StateProblem + ?Sized>(
    prob: &P,
    rho0: &[f64],
    params: &FlowParams,
) -> std::result::Result<(Vec<f64>, FlowHistory), FlowFailure> {
    run_flow_observed(prob, rho0, params, |_, _| {})
}

/// [`run_flow`] calling `observer(record, rho)` after every recorded iterate.
pub fn run_flow_observed<P, F>(
    prob: &P,
    rho0: &[f64],
    params: &FlowParams,
    mut observer: F,
) -> std::result::Result<(Vec<f64>, FlowHistory), FlowFailure>
where
    P: StateProblem + ?Sized,
    F: FnMut(&FlowRecord, &[f64]),
{
    let mut history = FlowHistory::default();
    let fail = |error, history, rho: &[f64]| FlowFailure {
        error,
        history,
        rho: rho.to_vec(),
    };
    if let Err(e) = params.validate() {
        return Err(fail(e, history, rho0));
    }
    let space = prob.space();
    if rho0.len() != space.node_count() {
        let e = Error::DimensionMismatch {
            expected: space.node_count(),
            found: rho0.len(),
        };
        return Err(fail(e, history, rho0));
    }
    let m0 = space.integrate(rho0);
    if !(m0 > 0.0) {
        return Err(fail(Error::ZeroMass, history, rho0));
    }

    let mut rho = rho0.to_vec();
    let mut eval = match evaluate(prob, &rho, params, None) {
        Ok(e) => e,
        Err(e) => return Err(fail(e, history, &rho)),
    };
    let first = record(prob, 0, &rho, &eval, m0);
    observer(&first, &rho);
    history.records.push(first);

    for step in 1..=params.steps {
        let next = match advance(prob, &rho, &eval, params) {
            Ok(r) => r,
            Err(e) => return Err(fail(e, history, &rho)),
        };
        let next_eval = match evaluate(prob, &next, params, Some(&eval.state.u.values)) {
            Ok(e) => e,
            Err(e) => return Err(fail(e, history, &next)),
        };
        rho = next;
        eval = next_eval;
        let rec = record(prob, step, &rho, &eval, m0);
        observer(&rec, &rho);
        history.records.push(rec);
    }
    Ok((rho, history))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderOptions {
    /// Stand-in for the unfiltered flow.
    pub eta_ref: f64,
    /// Grid resolution cap for coarsening before exact transport.
    pub max_cells: usize,
    pub method: TransportMethod,
}

impl Default for OrderOptions {
    fn default() -> Self {
        Self {
            eta_ref: 1e-6,
            max_cells: 24,
            method: TransportMethod::Exact,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderReport {
    pub etas: Vec<f64>,
    /// `E(eta)`: largest W2 distance to the reference over checkpoints.
    pub errors: Vec<f64>,
    /// Whether each point entered the least-squares fit.
    pub fitted: Vec<bool>,
    pub slope: f64,
    pub intercept: f64,
    pub checkpoints: Vec<usize>,
}

impl OrderReport {
    /// `E` strictly increasing with `eta`.
    pub fn monotone(&self) -> bool {
        let mut pairs: Vec<(f64, f64)> = self
            .etas
            .iter()
            .copied()
            .zip(self.errors.iter().copied())
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        pairs.windows(2).all(|w| w[1].1 > w[0].1)
    }
}

/// Runs the flow for every `eta` and for `opts.eta_ref`, then measures the
/// W2 distance to the reference trajectory at each checkpoint and fits
/// `log E = slope * log eta + intercept`.
pub fn verify_eta_order<P: StateProblem + ?Sized>(
    prob: &P,
    base: &FlowParams,
    etas: &[f64],
    rho0: &[f64],
    opts: &OrderOptions,
) -> Result<OrderReport> {
    base.validate()?;
    if etas.len() < 3 {
        return Err(Error::DegenerateFit(format!(
            "need at least 3 filter strengths, got {}",
            etas.len()
        )));
    }
    if etas.iter().any(|e| !(*e > 0.0 && e.is_finite())) || etas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(invalid("etas", "must be positive and strictly decreasing"));
    }
    if !(opts.eta_ref > 0.0) || opts.eta_ref > etas[etas.len() - 1] {
        return Err(invalid(
            "eta_ref",
            "must be positive and not above the smallest eta",
        ));
    }

    let cadence = base.checkpoint_every;
    let trajectory = |eta: f64| -> Result<Vec<Vec<f64>>> {
        let params = FlowParams { eta, ..*base };
        let mut saved = Vec::new();
        run_flow_observed(prob, rho0, &params, |rec, rho| {
            if rec.step % cadence == 0 || rec.step == params.steps {
                saved.push(rho.to_vec());
            }
        })
        .map_err(|f| f.error)?;
        Ok(saved)
    };

    let runs: Vec<Result<Vec<Vec<f64>>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = std::iter::once(opts.eta_ref)
            .chain(etas.iter().copied())
            .map(|eta| scope.spawn(move || trajectory(eta)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("flow worker panicked"))
            .collect()
    });
    let mut runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    let reference = runs.remove(0);

    let space = prob.space();
    let to_measure = |rho: &[f64]| -> Result<DiscreteMeasure> {
        let m = nodal_measure(space, rho)?.measure.pruned();
        if m.len() <= EXACT_SUPPORT_LIMIT && opts.method == TransportMethod::Exact {
            return Ok(m);
        }
        let mesh = space.mesh();
        let cells_x = opts.max_cells.min(mesh.nx());
        let cells_y = opts.max_cells.min(mesh.ny());
        m.coarsen(mesh.lx(), mesh.ly(), cells_x, cells_y)
    };
    let distance = |a: &DiscreteMeasure, b: &DiscreteMeasure| -> Result<f64> {
        match opts.method {
            TransportMethod::Exact => Ok(w2_exact(a, b)?.0),
            TransportMethod::Entropic => w2_entropic(a, b, &SinkhornOptions::default()),
        }
    };
    let reference: Vec<DiscreteMeasure> = reference
        .iter()
        .map(|r| to_measure(r))
        .collect::<Result<_>>()?;

    let mut errors = Vec::with_capacity(etas.len());
    for (&eta, run) in etas.iter().zip(&runs) {
        if eta == opts.eta_ref {
            errors.push(0.0);
            continue;
        }
        let mut worst: f64 = 0.0;
        for (rho, reference) in run.iter().zip(&reference) {
            worst = worst.max(distance(&to_measure(rho)?, reference)?);
        }
        errors.push(worst);
    }

    let fitted: Vec<bool> = errors.iter().map(|e| *e > 0.0).collect();
    let points: Vec<(f64, f64)> = etas
        .iter()
        .zip(&errors)
        .filter(|(_, e)| **e > 0.0)
        .map(|(eta, e)| (eta.ln(), e.ln()))
        .collect();
    if points.len() < 3 {
        return Err(Error::DegenerateFit(format!(
            "only {} filter strengths with positive error",
            points.len()
        )));
    }
    let (slope, intercept) = least_squares_line(&points);
    let checkpoints = (0..=base.steps)
        .filter(|s| s % cadence == 0 || *s == base.steps)
        .collect();
    Ok(OrderReport {
        etas: etas.to_vec(),
        errors,
        fitted,
        slope,
        intercept,
        checkpoints,
    })
}

/// Ordinary least squares `y = slope * x + intercept`.
pub fn least_squares_line(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}
