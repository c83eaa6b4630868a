//! End-to-end synthesis: one centralized LP over all subsystems, or projected
//! gradient descent on the contract potential with one small LP per subsystem.

use std::fmt;
use std::fs;
use std::path::Path;
use std::time::Instant;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::contracts::{
    add_guarantee_containment, check_correctness, extract_solution, initial_params, potential, rci_columns,
    satisfy_component, AugmentedDisturbance, Channel, ContractError, ContractParams, ContractTemplate,
    CorrectnessReport, Potential,
};
use crate::lpcore::{LinExpr, LinearProgram, LpError, LpStatus, SolveOptions};
use crate::sysmodel::{Mode, ModelError, Network};
use crate::viability::{
    add_hard_containment, build_finite_tube, build_rci_tube, finite_viable, rci, FiniteProblem, GrowthMode, RciProblem,
    Solution, ViabilityError,
};

/// Advice attached to failed runs.
pub const RETRY_HINT: &str = "increase k or the reduction order and try again";

/// Hint attached to runs stopped by their time budget.
pub const TIME_OUT_HINT: &str = "time out";

#[derive(Debug, Error)]
pub enum SynthesisError {
    #[error(transparent)]
    Contract(#[from] ContractError),
    #[error(transparent)]
    Viability(#[from] ViabilityError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {message}")]
    Format { path: String, message: String },
    #[error("invalid configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Correct,
    Failed,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Correct => "correct",
            Status::Failed => "failed",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Centralized,
    Compositional,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Centralized => "centralized",
            Method::Compositional => "compositional",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DescentConfig {
    /// Initial step `δ` (reset every iteration when the line search is on).
    pub delta: f64,
    pub max_iters: usize,
    pub tol_v: f64,
    /// Tube columns: `T(0)` columns in finite mode; chain depth `ceil(k / n_i)` in infinite mode.
    pub k: usize,
    /// Boxing order for the assumed disturbance; `None` keeps it exact.
    pub reduction_order: Option<usize>,
    pub line_search: bool,
    /// `None` starts at `α^max / 2`; otherwise uniform in `[0, α^max]` on active entries.
    pub seed: Option<u64>,
    /// Wall-clock budget in seconds for the whole run.
    pub time_limit: Option<f64>,
}

impl Default for DescentConfig {
    fn default() -> Self {
        Self {
            delta: 1.0,
            max_iters: 500,
            tol_v: 1e-6,
            k: 4,
            reduction_order: Some(1),
            line_search: true,
            seed: None,
            time_limit: None,
        }
    }
}

impl DescentConfig {
    fn validate(&self) -> Result<(), SynthesisError> {
        if !(self.delta > 0.0) {
            return Err(SynthesisError::Config(format!("step must be positive, got {}", self.delta)));
        }
        if !(self.tol_v > 0.0) {
            return Err(SynthesisError::Config(format!("tolerance must be positive, got {}", self.tol_v)));
        }
        if self.k == 0 {
            return Err(SynthesisError::Config("k must be at least 1".into()));
        }
        if self.reduction_order == Some(0) {
            return Err(SynthesisError::Config("reduction order must be at least 1".into()));
        }
        Ok(())
    }
}

const ARMIJO_C: f64 = 1e-4;
const BACKTRACK: f64 = 0.5;
const MIN_STEP: f64 = 1e-10;

/// Element-wise clamp onto `[lo, hi]`.
pub fn project_box(alpha: &[f64], lo: &[f64], hi: &[f64]) -> Vec<f64> {
    alpha.iter().zip(lo).zip(hi).map(|((&a, &l), &h)| a.max(l).min(h)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub potential: f64,
    pub grad_norm: f64,
    /// Step taken after this evaluation (0 when none).
    pub step: f64,
    pub solver_seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    /// Solver time only, excluding program construction.
    pub solver_seconds: f64,
    pub wall_seconds: f64,
    pub bounds_seconds: f64,
    pub descent_seconds: f64,
    pub extraction_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub status: Status,
    pub method: Method,
    pub mode: Mode,
    pub horizon: usize,
    pub k: usize,
    pub reduction_order: Option<usize>,
    #[serde(with = "crate::serde_util::finite_or_null")]
    pub potential: f64,
    pub iterations: usize,
    pub timings: Timings,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub hint: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub correctness: Option<CorrectnessReport>,
}

#[derive(Debug, Clone)]
pub struct SynthesisResult {
    pub report: Report,
    pub params: ContractParams,
    /// One per subsystem when `status = correct`; empty otherwise.
    pub solutions: Vec<Solution>,
    pub trace: Vec<TraceRow>,
}

impl SynthesisResult {
    pub fn is_correct(&self) -> bool {
        self.report.status == Status::Correct
    }
}

fn inf_norm_active(g: &[f64], mask: &[bool]) -> f64 {
    g.iter().zip(mask).filter(|(_, a)| **a).map(|(v, _)| v * v).sum::<f64>().sqrt()
}

fn eval_or_inf(
    network: &Network,
    template: &ContractTemplate,
    params: &ContractParams,
    cfg: &DescentConfig,
) -> Result<Option<Potential>, SynthesisError> {
    match potential(network, template, params, cfg.k, cfg.reduction_order) {
        Ok(p) => Ok(Some(p)),
        Err(ContractError::Infeasible { .. }) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

type Step = (ContractParams, Option<Potential>, f64);

/// Backtracking along `dir` with projection onto the box. The predicted decrease is
/// the largest of `g · (candidate - alpha)` over the supplied subgradients.
#[allow(clippy::too_many_arguments)]
fn line_search(
    network: &Network,
    template: &ContractTemplate,
    params: &ContractParams,
    dir: &[f64],
    bundle: &[Vec<f64>],
    value: f64,
    lo: &[f64],
    hi: &[f64],
    cfg: &DescentConfig,
    timings: &mut Timings,
) -> Result<Option<Step>, SynthesisError> {
    let mut delta = cfg.delta;
    loop {
        let stepped: Vec<f64> = params.alpha.iter().zip(dir).map(|(a, d)| a + delta * d).collect();
        let cand_alpha = project_box(&stepped, lo, hi);
        let moved: f64 = cand_alpha.iter().zip(&params.alpha).map(|(c, a)| (c - a).abs()).fold(0.0, f64::max);
        if moved == 0.0 {
            return Ok(None);
        }
        let cand = params.with_alpha(cand_alpha);
        let cand_pot = eval_or_inf(network, template, &cand, cfg)?;
        if !cfg.line_search {
            return Ok(Some((cand, cand_pot, delta)));
        }
        if let Some(cp) = &cand_pot {
            timings.solver_seconds += cp.solve_seconds;
            let decrease = bundle
                .iter()
                .map(|g| g.iter().zip(&cand.alpha).zip(&params.alpha).map(|((g, c), a)| g * (c - a)).sum::<f64>())
                .fold(f64::NEG_INFINITY, f64::max);
            if cp.value <= value + ARMIJO_C * decrease {
                return Ok(Some((cand, cand_pot, delta)));
            }
        }
        delta *= BACKTRACK;
        if delta < MIN_STEP {
            return Ok(None);
        }
    }
}

const MAX_SAMPLES: usize = 32;
const SAMPLE_RADII: [f64; 5] = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6];

/// Fallback step when the plain gradient stalls: gather subgradients at random points
/// in a small box around `alpha`, then take the direction in `[-1, 1]^n` minimizing the
/// worst directional derivative over them. Retries with smaller boxes.
#[allow(clippy::too_many_arguments)]
fn sampled_descent(
    network: &Network,
    template: &ContractTemplate,
    params: &ContractParams,
    grad: &[f64],
    value: f64,
    mask: &[bool],
    lo: &[f64],
    hi: &[f64],
    cfg: &DescentConfig,
    timings: &mut Timings,
    seed: u64,
) -> Result<Option<Step>, SynthesisError> {
    let active: Vec<usize> = (0..mask.len()).filter(|&r| mask[r]).collect();
    if active.is_empty() {
        return Ok(None);
    }
    let scale = active.iter().map(|&r| hi[r] - lo[r]).fold(0.0, f64::max).max(1e-12);
    let samples = (active.len() + 1).min(MAX_SAMPLES);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for radius in SAMPLE_RADII.map(|r| r * scale) {
        let mut bundle = vec![grad.to_vec()];
        for _ in 0..samples {
            let mut alpha = params.alpha.clone();
            for &r in &active {
                alpha[r] += radius * rng.gen_range(-1.0..=1.0);
            }
            let alpha = project_box(&alpha, lo, hi);
            if let Some(p) = eval_or_inf(network, template, &params.with_alpha(alpha), cfg)? {
                timings.solver_seconds += p.solve_seconds;
                bundle.push(p.grad.iter().zip(mask).map(|(g, a)| if *a { *g } else { 0.0 }).collect());
            }
        }
        let Some(dir) = bundle_direction(params, &bundle, &active, lo, hi)? else {
            continue;
        };
        if let Some(step) = line_search(network, template, params, &dir, &bundle, value, lo, hi, cfg, timings)? {
            return Ok(Some(step));
        }
    }
    Ok(None)
}

/// `argmin_d max_j g_j · d` over feasible directions with `|d_r| <= 1`; `None` when no
/// direction decreases all of them.
fn bundle_direction(
    params: &ContractParams,
    bundle: &[Vec<f64>],
    active: &[usize],
    lo: &[f64],
    hi: &[f64],
) -> Result<Option<Vec<f64>>, SynthesisError> {
    let mut lp = LinearProgram::new();
    let d: Vec<_> = active
        .iter()
        .map(|&r| {
            let a = params.alpha[r];
            let down = if a <= lo[r] + 1e-12 { 0.0 } else { -1.0 };
            let up = if a >= hi[r] - 1e-12 { 0.0 } else { 1.0 };
            lp.add_var(down, up)
        })
        .collect();
    let t = LinExpr::var(lp.add_free_var());
    lp.add_objective(&t, 1.0);
    for g in bundle {
        let mut slope = LinExpr::zero();
        for (&r, &v) in active.iter().zip(&d) {
            slope.add_term(v, g[r]);
        }
        lp.add_le(&slope, &t);
    }
    let sol = lp.solve()?;
    if !sol.is_optimal() || sol.eval(&t) > -1e-9 {
        return Ok(None);
    }
    let mut dir = vec![0.0; params.alpha.len()];
    for (&r, &v) in active.iter().zip(&d) {
        dir[r] = sol.value(v);
    }
    Ok(Some(dir))
}

/// Solutions meeting the guarantees exactly at `params`, plus their certificate.
fn extract_all(
    network: &Network,
    template: &ContractTemplate,
    params: &ContractParams,
    k: usize,
    reduction: Option<usize>,
) -> Result<Option<(Vec<Solution>, CorrectnessReport, f64)>, SynthesisError> {
    let mut solutions = Vec::with_capacity(network.len());
    let mut seconds = 0.0;
    for i in 0..network.len() {
        match satisfy_component(network, template, params, i, k, reduction)? {
            Some(s) => {
                seconds += s.solve_seconds();
                solutions.push(s);
            }
            None => return Ok(None),
        }
    }
    let report = check_correctness(network, template, params, &solutions)?;
    Ok(Some((solutions, report, seconds)))
}

/// Projected gradient descent on the contract potential.
pub fn compositional_synthesize(
    network: &Network,
    template: &ContractTemplate,
    cfg: &DescentConfig,
) -> Result<SynthesisResult, SynthesisError> {
    cfg.validate()?;
    let wall = Instant::now();
    let mut timings = Timings::default();

    let t0 = Instant::now();
    let base = initial_params(network, template)?;
    timings.bounds_seconds = t0.elapsed().as_secs_f64();
    let mask = base.active_mask();
    let lo = base.lower_bounds();
    let hi = base.alpha_max.clone();
    let mut params = match cfg.seed {
        None => base.with_fraction(0.5),
        Some(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let alpha = (0..base.len()).map(|r| if mask[r] { rng.gen_range(0.0..=hi[r]) } else { hi[r] }).collect();
            base.with_alpha(alpha)
        }
    };

    let mut trace = Vec::new();
    let t_descent = Instant::now();
    let mut current = eval_or_inf(network, template, &params, cfg)?;
    let mut outcome: Option<(Vec<Solution>, CorrectnessReport)> = None;
    let mut iterations = 0;
    let mut timed_out = false;
    let over_budget = |start: &Instant| cfg.time_limit.is_some_and(|l| start.elapsed().as_secs_f64() > l);

    while iterations < cfg.max_iters {
        let Some(pot) = current.take() else {
            // The per-subsystem tube itself is infeasible for this k.
            break;
        };
        timings.solver_seconds += pot.solve_seconds;
        let grad: Vec<f64> = pot.grad.iter().zip(&mask).map(|(g, a)| if *a { *g } else { 0.0 }).collect();
        let mut row = TraceRow {
            iteration: iterations,
            potential: pot.value,
            grad_norm: inf_norm_active(&grad, &mask),
            step: 0.0,
            solver_seconds: pot.solve_seconds,
        };

        if pot.value <= cfg.tol_v {
            let t_ex = Instant::now();
            // The descent's own tubes usually certify already; otherwise re-solve with
            // the guarantees as hard constraints.
            let own: Vec<Solution> = pot.components.iter().map(|c| c.solution.clone()).collect();
            let report = check_correctness(network, template, &params, &own)?;
            if report.correct {
                timings.extraction_seconds += t_ex.elapsed().as_secs_f64();
                trace.push(row);
                outcome = Some((own, report));
                break;
            }
            let extracted = extract_all(network, template, &params, cfg.k, cfg.reduction_order)?;
            timings.extraction_seconds += t_ex.elapsed().as_secs_f64();
            if let Some((solutions, report, secs)) = extracted {
                timings.solver_seconds += secs;
                if report.correct {
                    trace.push(row);
                    outcome = Some((solutions, report));
                    break;
                }
            }
        }
        if over_budget(&wall) {
            trace.push(row);
            timed_out = true;
            break;
        }

        let dir: Vec<f64> = grad.iter().map(|g| -g).collect();
        let mut step = line_search(network, template, &params, &dir, std::slice::from_ref(&grad), pot.value, &lo, &hi, cfg, &mut timings)?;
        if step.is_none() && cfg.line_search {
            // At a kink the dual subgradient need not be a descent direction. Look for one
            // that decreases every subgradient sampled around the current point.
            let seed = cfg.seed.unwrap_or(0).wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ iterations as u64;
            step = sampled_descent(network, template, &params, &grad, pot.value, &mask, &lo, &hi, cfg, &mut timings, seed)?;
        }
        iterations += 1;
        match step {
            Some((p, cp, delta)) => {
                row.step = delta;
                trace.push(row);
                params = p;
                current = cp;
            }
            None => {
                // No descent direction left: stationary at a positive value.
                trace.push(row);
                break;
            }
        }
    }
    timings.descent_seconds = t_descent.elapsed().as_secs_f64();
    timings.wall_seconds = wall.elapsed().as_secs_f64();

    // After the iteration cap, the last accepted candidate was evaluated but not traced.
    let final_v = match (&current, &outcome) {
        (Some(p), None) => p.value,
        _ => trace.last().map(|r| r.potential).unwrap_or(f64::INFINITY),
    };
    let (status, solutions, correctness, hint) = match outcome {
        Some((s, r)) => (Status::Correct, s, Some(r), None),
        None => {
            let hint = if timed_out { TIME_OUT_HINT } else { RETRY_HINT };
            (Status::Failed, Vec::new(), None, Some(hint.to_string()))
        }
    };
    Ok(SynthesisResult {
        report: Report {
            status,
            method: Method::Compositional,
            mode: network.mode,
            horizon: network.horizon,
            k: cfg.k,
            reduction_order: cfg.reduction_order,
            potential: final_v,
            iterations,
            timings,
            hint,
            correctness,
        },
        params,
        solutions,
        trace,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CentralizedConfig {
    pub k: usize,
    pub time_limit: Option<f64>,
}

impl Default for CentralizedConfig {
    fn default() -> Self {
        Self { k: 4, time_limit: None }
    }
}

/// Single LP over all subsystems, tubes and contract parameters together.
///
/// With default templates the hard state/input containments are replaced by the
/// terminal containment and `α <= 1`; otherwise `α <= α^max` and the hard
/// containments are kept. Minimizes the sum of state parameters.
pub fn centralized_synthesize(
    network: &Network,
    template: &ContractTemplate,
    cfg: &CentralizedConfig,
) -> Result<SynthesisResult, SynthesisError> {
    if cfg.k == 0 {
        return Err(SynthesisError::Config("k must be at least 1".into()));
    }
    let wall = Instant::now();
    let mut timings = Timings::default();
    let t0 = Instant::now();
    let layout = initial_params(network, template)?;
    timings.bounds_seconds = t0.elapsed().as_secs_f64();
    let default = template.is_default_for(network);
    let steps = network.steps();

    let mut lp = LinearProgram::new();
    let alpha_vars: Vec<LinExpr> =
        layout.alpha_max.iter().map(|&m| LinExpr::var(lp.add_var(0.0, if default { 1.0 } else { m }))).collect();
    for b in layout.blocks.iter().filter(|b| b.channel == Channel::State) {
        for r in b.range() {
            lp.add_objective(&alpha_vars[r], 1.0);
        }
    }
    let alpha_of = |r: usize| alpha_vars[r].clone();

    let mut tubes = Vec::with_capacity(network.len());
    for (i, s) in network.subsystems.iter().enumerate() {
        let dist: Vec<_> = (0..steps)
            .map(|t| AugmentedDisturbance::build(network, template, &layout, i, t).symbolic(&alpha_of, None, &layout.alpha))
            .collect();
        let tube = match network.mode {
            Mode::Finite => {
                let a: Vec<&Array2<f64>> = (0..steps).map(|t| s.a_at(t)).collect();
                let b: Vec<&Array2<f64>> = (0..steps).map(|t| s.b_at(t)).collect();
                build_finite_tube(&mut lp, &a, &b, &dist, cfg.k, GrowthMode::Growing, s.initial.as_ref())?
            }
            Mode::Infinite => {
                let kk = rci_columns(cfg.k, s.state_dim(), dist[0].num_columns());
                build_rci_tube(&mut lp, s.a_at(0), s.b_at(0), &dist[0], kk, false)?
            }
        };
        for t in 0..steps {
            for ch in [Channel::State, Channel::Input] {
                let inner = match ch {
                    Channel::State => tube.omega(t, 1.0),
                    Channel::Input => tube.theta(t, 1.0),
                };
                if inner.dim() == 0 {
                    continue;
                }
                let alpha: Vec<LinExpr> = layout.block(i, t, ch).range().map(alpha_of).collect();
                add_guarantee_containment(&mut lp, &inner, template.get(i, t, ch), &alpha, None).map_err(ContractError::from)?;
                if !default {
                    let bound = match ch {
                        Channel::State => s.x_at(t),
                        Channel::Input => s.u_at(t),
                    };
                    add_hard_containment(&mut lp, &inner, bound).map_err(ContractError::from)?;
                }
            }
        }
        if network.mode == Mode::Finite {
            add_hard_containment(&mut lp, &tube.omega(steps, 1.0), s.x_at(steps)).map_err(ContractError::from)?;
        }
        tubes.push(tube);
    }

    let sol = lp.solve_with(&SolveOptions { time_limit: cfg.time_limit })?;
    timings.solver_seconds = sol.solve_seconds;
    let mut params = layout.clone();
    let (status, solutions, correctness, hint) = match sol.status {
        LpStatus::Optimal => {
            params.alpha = alpha_vars.iter().map(|a| sol.eval(a).max(0.0)).collect();
            let solutions: Vec<Solution> =
                tubes.iter().enumerate().map(|(i, tube)| extract_solution(network, i, tube, &sol)).collect();
            let t_ex = Instant::now();
            let report = check_correctness(network, template, &params, &solutions)?;
            timings.extraction_seconds = t_ex.elapsed().as_secs_f64();
            if report.correct {
                (Status::Correct, solutions, Some(report), None)
            } else {
                (Status::Failed, Vec::new(), Some(report), Some("solution failed certification".to_string()))
            }
        }
        LpStatus::TimeLimit => (Status::Failed, Vec::new(), None, Some(TIME_OUT_HINT.to_string())),
        _ => (Status::Failed, Vec::new(), None, Some(RETRY_HINT.to_string())),
    };
    timings.wall_seconds = wall.elapsed().as_secs_f64();
    Ok(SynthesisResult {
        report: Report {
            status,
            method: Method::Centralized,
            mode: network.mode,
            horizon: network.horizon,
            k: cfg.k,
            reduction_order: None,
            potential: if status == Status::Correct { 0.0 } else { f64::INFINITY },
            iterations: 1,
            timings,
            hint,
            correctness,
        },
        params,
        solutions,
        trace: Vec::new(),
    })
}

/// Outcome of the monolithic method: one viable set for the aggregated state.
#[derive(Debug, Clone)]
pub struct DenseResult {
    pub feasible: bool,
    pub timed_out: bool,
    pub solution: Option<Solution>,
    pub solver_seconds: f64,
    pub wall_seconds: f64,
}

/// Viable sets and a centralized controller for the whole network as one system.
pub fn centralized_dense(network: &Network, k: usize, time_limit: Option<f64>) -> Result<DenseResult, SynthesisError> {
    let wall = Instant::now();
    let outcome = match network.mode {
        Mode::Infinite => {
            let agg = network.aggregate(0);
            let n = agg.a.nrows();
            let problem = RciProblem { a: agg.a, b: agg.b, disturbance: agg.d, state: agg.x, input: agg.u };
            let kk = rci_columns(k, n.div_ceil(network.len().max(1)), problem.disturbance.without_zero_generators().num_generators());
            rci_timed(&problem, kk, time_limit).map(|(s, secs, to)| (s.map(Solution::Infinite), secs, to))?
        }
        Mode::Finite => {
            let h = network.horizon;
            let aggs: Vec<_> = (0..=h).map(|t| network.aggregate(t)).collect();
            let problem = FiniteProblem {
                a: aggs[..h].iter().map(|g| g.a.clone()).collect(),
                b: aggs[..h].iter().map(|g| g.b.clone()).collect(),
                disturbance: aggs[..h].iter().map(|g| g.d.clone()).collect(),
                state: aggs.iter().map(|g| g.x.clone()).collect(),
                input: aggs[..h].iter().map(|g| g.u.clone()).collect(),
                initial: None,
            };
            let start = Instant::now();
            let s = finite_viable(&problem, k, GrowthMode::Growing)?;
            let secs = s.as_ref().map(|s| s.solve_seconds).unwrap_or(start.elapsed().as_secs_f64());
            (s.map(Solution::Finite), secs, false)
        }
    };
    let (solution, solver_seconds, timed_out) = outcome;
    Ok(DenseResult {
        feasible: solution.is_some(),
        timed_out,
        solution,
        solver_seconds,
        wall_seconds: wall.elapsed().as_secs_f64(),
    })
}

fn rci_timed(
    problem: &RciProblem,
    k: usize,
    time_limit: Option<f64>,
) -> Result<(Option<crate::viability::RciSolution>, f64, bool), SynthesisError> {
    if time_limit.is_none() {
        let start = Instant::now();
        let s = rci(problem, k, 0.0, true)?;
        let secs = s.as_ref().map(|s| s.solve_seconds).unwrap_or(start.elapsed().as_secs_f64());
        return Ok((s, secs, false));
    }
    match crate::viability::rci_with_options(problem, k, &SolveOptions { time_limit })? {
        crate::viability::Attempt::Solved(s) => {
            let secs = s.solve_seconds;
            Ok((Some(s), secs, false))
        }
        crate::viability::Attempt::Infeasible(secs) => Ok((None, secs, false)),
        crate::viability::Attempt::TimedOut(secs) => Ok((None, secs, true)),
    }
}

// ---------------------------------------------------------------------------
// Result directories

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SynthesisError + '_ {
    move |source| SynthesisError::Io { path: path.display().to_string(), source }
}

fn write(path: &Path, text: &str) -> Result<(), SynthesisError> {
    fs::write(path, text).map_err(io_err(path))
}

fn read(path: &Path) -> Result<String, SynthesisError> {
    fs::read_to_string(path).map_err(io_err(path))
}

pub fn trace_csv(trace: &[TraceRow]) -> String {
    let mut out = String::from("iteration,potential,grad_norm,step,solver_seconds\n");
    for r in trace {
        out.push_str(&format!("{},{},{},{},{}\n", r.iteration, r.potential, r.grad_norm, r.step, r.solver_seconds));
    }
    out
}

fn solution_file(id: &str) -> String {
    let safe: String = id.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect();
    format!("solution_{safe}.json")
}

/// Writes `network.json`, `params.json`, `report.json`, `trace.csv` and one
/// `solution_<id>.json` per subsystem.
pub fn write_result_dir(dir: impl AsRef<Path>, network: &Network, result: &SynthesisResult) -> Result<(), SynthesisError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    write(&dir.join("network.json"), &network.to_json())?;
    write(&dir.join("params.json"), &result.params.to_json())?;
    let report = serde_json::to_string_pretty(&result.report).expect("report serializes");
    write(&dir.join("report.json"), &report)?;
    write(&dir.join("trace.csv"), &trace_csv(&result.trace))?;
    for (s, sol) in network.subsystems.iter().zip(&result.solutions) {
        let text = serde_json::to_string_pretty(sol).expect("solution serializes");
        write(&dir.join(solution_file(&s.id)), &text)?;
    }
    Ok(())
}

/// A result directory read back from disk.
#[derive(Debug, Clone)]
pub struct StoredResult {
    pub network: Network,
    pub template: ContractTemplate,
    pub report: Report,
    pub params: ContractParams,
    pub solutions: Vec<Solution>,
}

pub fn load_result_dir(dir: impl AsRef<Path>) -> Result<StoredResult, SynthesisError> {
    let dir = dir.as_ref();
    let network = Network::from_json(&read(&dir.join("network.json"))?)?;
    let template = ContractTemplate::from_network(&network)?;
    let report_path = dir.join("report.json");
    let report: Report = serde_json::from_str(&read(&report_path)?)
        .map_err(|e| SynthesisError::Format { path: report_path.display().to_string(), message: e.to_string() })?;
    let layout = ContractParams::layout(&network, &template);
    let params = layout.load_values(&read(&dir.join("params.json"))?)?;
    let mut solutions = Vec::new();
    if report.status == Status::Correct {
        for s in &network.subsystems {
            let path = dir.join(solution_file(&s.id));
            let sol: Solution = serde_json::from_str(&read(&path)?)
                .map_err(|e| SynthesisError::Format { path: path.display().to_string(), message: e.to_string() })?;
            solutions.push(sol);
        }
    }
    Ok(StoredResult { network, template, report, params, solutions })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contracts::default_template;
    use crate::geom::Zonotope;
    use crate::sysmodel::{Coupling, Subsystem};
    use ndarray::{array, Array1};

    fn z(c: Array1<f64>, g: Array2<f64>) -> Zonotope {
        Zonotope::new(c, g).unwrap()
    }

    fn scalar_pair(a: f64, mode: Mode) -> Network {
        let sub = |id: &str, j: usize| Subsystem {
            id: id.into(),
            a: vec![array![[1.0]]],
            b: vec![array![[1.0]]],
            couplings: vec![Coupling { neighbor: j, a: vec![array![[a]]], b: vec![array![[0.0]]] }],
            x: vec![z(array![0.0], array![[1.0]])],
            u: vec![z(array![0.0], array![[1.0]])],
            d: vec![z(array![0.0], array![[0.1]])],
            template_x: None,
            template_u: None,
            initial: None,
        };
        let net = Network { mode: Mode::Infinite, horizon: 1, subsystems: vec![sub("a", 1), sub("b", 0)] };
        net.with_mode(mode, 3).unwrap()
    }

    #[test]
    fn projection_clamps() {
        let lo = [0.0, 0.0, 0.0];
        let hi = [1.0, 1.0, 2.0];
        assert_eq!(project_box(&[0.5, -0.3, 3.0], &lo, &hi), vec![0.5, 0.0, 2.0]);
    }

    #[test]
    fn compositional_converges_on_coupled_pair() {
        let net = scalar_pair(0.5, Mode::Infinite);
        let tpl = default_template(&net);
        let cfg = DescentConfig { k: 1, ..DescentConfig::default() };
        let res = compositional_synthesize(&net, &tpl, &cfg).unwrap();
        assert!(res.is_correct(), "{:?}", res.report);
        assert!(res.report.potential <= 1e-6);
        let vs: Vec<f64> = res.trace.iter().map(|r| r.potential).collect();
        assert!(vs.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }

    #[test]
    fn compositional_is_deterministic() {
        let net = scalar_pair(0.5, Mode::Finite);
        let tpl = default_template(&net);
        let cfg = DescentConfig { k: 1, ..DescentConfig::default() };
        let a = compositional_synthesize(&net, &tpl, &cfg).unwrap();
        let b = compositional_synthesize(&net, &tpl, &cfg).unwrap();
        assert_eq!(a.trace.iter().map(|r| r.potential).collect::<Vec<_>>(), b.trace.iter().map(|r| r.potential).collect::<Vec<_>>());
        assert_eq!(a.params, b.params);
    }

    #[test]
    fn centralized_both_modes() {
        for mode in [Mode::Infinite, Mode::Finite] {
            let net = scalar_pair(0.5, mode);
            let tpl = default_template(&net);
            let res = centralized_synthesize(&net, &tpl, &CentralizedConfig { k: 1, time_limit: None }).unwrap();
            assert!(res.is_correct(), "{mode}: {:?}", res.report);
        }
    }

    #[test]
    fn oversized_coupling_fails_with_hint() {
        let net = scalar_pair(3.0, Mode::Infinite);
        let tpl = default_template(&net);
        let res = centralized_synthesize(&net, &tpl, &CentralizedConfig { k: 1, time_limit: None }).unwrap();
        assert_eq!(res.report.status, Status::Failed);
        let cfg = DescentConfig { k: 1, max_iters: 30, ..DescentConfig::default() };
        let res = compositional_synthesize(&net, &tpl, &cfg).unwrap();
        assert_eq!(res.report.status, Status::Failed);
        assert_eq!(res.report.hint.as_deref(), Some(RETRY_HINT));
        assert!(res.report.potential > 1e-6);
    }

    #[test]
    fn dense_method_matches_on_pair() {
        let net = scalar_pair(0.5, Mode::Infinite);
        let d = centralized_dense(&net, 1, None).unwrap();
        assert!(d.feasible);
    }

    #[test]
    fn result_dir_round_trip() {
        let net = scalar_pair(0.5, Mode::Infinite);
        let tpl = default_template(&net);
        let res = centralized_synthesize(&net, &tpl, &CentralizedConfig { k: 1, time_limit: None }).unwrap();
        let dir = std::env::temp_dir().join(format!("contract-synth-result-{}", std::process::id()));
        write_result_dir(&dir, &net, &res).unwrap();
        let back = load_result_dir(&dir).unwrap();
        assert_eq!(back.params, res.params);
        let json = |v: &[Solution]| serde_json::to_string(v).unwrap();
        assert_eq!(json(&back.solutions), json(&res.solutions));
        assert_eq!(back.report, res.report);
        fs::remove_dir_all(&dir).ok();
    }
}
