//! Closed-loop execution of synthesized controllers and Monte Carlo verification.
//!
//! Each subsystem's controller reads only its own state and its own solution. The
//! plant update uses the full coupled recursion.

use std::fmt::Write as _;

use ndarray::linalg::general_mat_vec_mul;
use ndarray::{Array1, Array2, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{PointLocator, Zonotope};
use crate::sysmodel::{Mode, Network};
use crate::viability::Solution;

/// Membership tolerance used by the verifier, in the infinity norm.
pub const VERIFY_TOL: f64 = 1e-6;

/// Vertex patterns are enumerated exhaustively up to this many generators.
const MAX_ENUMERATED_GENERATORS: usize = 12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RuntimeError {
    #[error("expected {expected} solutions, got {found}")]
    SolutionCount { expected: usize, found: usize },
    #[error("subsystem {subsystem}: {what}")]
    Mismatch { subsystem: usize, what: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationKind {
    /// State left `Ω_i(t)`, so the controller is undefined.
    ViableSet,
    /// State left `X_i(t)`.
    StateBound,
    /// Input left `U_i(t)`.
    InputBound,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub subsystem: usize,
    pub t: usize,
    pub kind: ViolationKind,
    /// Infinity-norm distance reported by the membership solver.
    pub residual: f64,
}

/// Repeated membership queries against one zonotope. Axis-aligned boxes (square
/// diagonal generators) are answered in closed form.
#[derive(Debug, Clone)]
struct SetLocator {
    center: Vec<f64>,
    locator: PointLocator,
    offset: Vec<f64>,
    diagonal: Option<Vec<f64>>,
    witness: Vec<f64>,
}

impl SetLocator {
    fn new(z: &Zonotope) -> Self {
        let g = z.generators();
        let is_box = g.is_square()
            && g.indexed_iter().all(|((r, c), v)| if r == c { *v != 0.0 } else { *v == 0.0 });
        Self {
            center: z.center().to_vec(),
            locator: PointLocator::new(g),
            offset: vec![0.0; z.dim()],
            diagonal: is_box.then(|| g.diag().to_vec()),
            witness: vec![0.0; g.ncols()],
        }
    }

    fn locate(&mut self, x: &Array1<f64>) -> (&[f64], f64) {
        for ((o, xv), c) in self.offset.iter_mut().zip(x).zip(&self.center) {
            *o = xv - c;
        }
        if let Some(diag) = &self.diagonal {
            let mut residual = 0.0_f64;
            for ((w, o), g) in self.witness.iter_mut().zip(&self.offset).zip(diag) {
                *w = (o / g).clamp(-1.0, 1.0);
                residual = residual.max((o - g * *w).abs());
            }
            return (&self.witness, residual);
        }
        self.locator.locate(&self.offset)
    }
}

/// Online controller of one subsystem: `u = ū(t) + M(t) ζ` with `x = x̄(t) + T(t) ζ`.
#[derive(Debug, Clone)]
pub struct Controller {
    solution: Solution,
    sets: Vec<SetLocator>,
    /// `(ū(t), M(t))` per control step, with the invariant-set scaling folded in.
    maps: Vec<(Array1<f64>, Array2<f64>)>,
}

impl Controller {
    pub fn new(solution: Solution) -> Self {
        let count = match &solution {
            Solution::Finite(s) => s.horizon() + 1,
            Solution::Infinite(_) => 1,
        };
        let sets = (0..count).map(|t| SetLocator::new(&solution.omega(t))).collect();
        let maps = match &solution {
            Solution::Finite(s) => s.ubar.iter().cloned().zip(s.m.iter().cloned()).collect(),
            Solution::Infinite(s) => vec![(s.ubar.clone(), &s.m * s.scale())],
        };
        Self { solution, sets, maps }
    }

    pub fn solution(&self) -> &Solution {
        &self.solution
    }

    fn set_index(&self, t: usize) -> usize {
        t.min(self.sets.len() - 1)
    }

    /// Residual of `x` against `Ω(t)`; zero when inside.
    pub fn residual(&mut self, t: usize, x: &Array1<f64>) -> f64 {
        let s = self.set_index(t);
        self.sets[s].locate(x).1
    }

    /// Control input for local state `x`; `Err(residual)` when `x` is outside `Ω(t)`.
    pub fn control(&mut self, t: usize, x: &Array1<f64>) -> Result<Array1<f64>, f64> {
        self.control_with_residual(t, x).map(|(u, _)| u)
    }

    fn control_with_residual(&mut self, t: usize, x: &Array1<f64>) -> Result<(Array1<f64>, f64), f64> {
        let mut u = Array1::zeros(self.maps[0].0.len());
        self.control_into(t, x, &mut u).map(|r| (u, r))
    }

    /// Writes the input into `u` and returns the membership residual.
    fn control_into(&mut self, t: usize, x: &Array1<f64>, u: &mut Array1<f64>) -> Result<f64, f64> {
        let s = self.set_index(t);
        let (zeta, residual) = self.sets[s].locate(x);
        if residual > VERIFY_TOL {
            return Err(residual);
        }
        let (ubar, m) = &self.maps[t.min(self.maps.len() - 1)];
        u.assign(ubar);
        general_mat_vec_mul(1.0, m, &ArrayView1::from(zeta), 1.0, u);
        Ok(residual)
    }
}

/// One controller per subsystem.
#[derive(Debug, Clone)]
pub struct ControllerBank {
    controllers: Vec<Controller>,
    /// Number of control steps the solutions cover; `None` in infinite mode.
    horizon: Option<usize>,
}

impl ControllerBank {
    pub fn new(network: &Network, solutions: &[Solution]) -> Result<Self, RuntimeError> {
        if solutions.len() != network.len() {
            return Err(RuntimeError::SolutionCount { expected: network.len(), found: solutions.len() });
        }
        for (i, (s, sol)) in network.subsystems.iter().zip(solutions).enumerate() {
            let mismatch = |what: String| RuntimeError::Mismatch { subsystem: i, what };
            match (network.mode, sol) {
                (Mode::Finite, Solution::Finite(v)) if v.horizon() != network.horizon => {
                    return Err(mismatch(format!("solution horizon {} vs network horizon {}", v.horizon(), network.horizon)));
                }
                (Mode::Finite, Solution::Infinite(_)) | (Mode::Infinite, Solution::Finite(_)) => {
                    return Err(mismatch(format!("solution kind does not match {} mode", network.mode)));
                }
                _ => {}
            }
            if sol.omega(0).dim() != s.state_dim() {
                return Err(mismatch(format!("state dimension {} vs {}", sol.omega(0).dim(), s.state_dim())));
            }
            if sol.theta(0).dim() != s.input_dim() {
                return Err(mismatch(format!("input dimension {} vs {}", sol.theta(0).dim(), s.input_dim())));
            }
        }
        let horizon = (network.mode == Mode::Finite).then_some(network.horizon);
        Ok(Self { controllers: solutions.iter().cloned().map(Controller::new).collect(), horizon })
    }

    pub fn len(&self) -> usize {
        self.controllers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.controllers.is_empty()
    }

    pub fn horizon(&self) -> Option<usize> {
        self.horizon
    }

    pub fn controller(&self, i: usize) -> &Controller {
        &self.controllers[i]
    }

    /// Decentralized evaluation: only `x_i` and subsystem `i`'s own solution are read.
    pub fn control(&mut self, i: usize, t: usize, x_i: &Array1<f64>) -> Result<Array1<f64>, f64> {
        self.controllers[i].control(t, x_i)
    }

    pub fn omega(&self, i: usize, t: usize) -> Zonotope {
        self.controllers[i].solution.omega(t)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    pub inputs: Vec<Array1<f64>>,
    pub next: Vec<Array1<f64>>,
    /// Worst membership residual of the current states in their viable sets.
    pub residual: f64,
}

/// `x_i⁺ = A_ii x_i + B_ii u_i + Σ_j (A_ij x_j + B_ij u_j) + d_i` for given inputs.
pub fn plant_update(
    network: &Network,
    t: usize,
    states: &[Array1<f64>],
    inputs: &[Array1<f64>],
    disturbances: &[Array1<f64>],
) -> Vec<Array1<f64>> {
    let mut next: Vec<Array1<f64>> = network.subsystems.iter().map(|s| Array1::zeros(s.state_dim())).collect();
    plant_update_into(network, t, states, inputs, disturbances, &mut next);
    next
}

fn plant_update_into(
    network: &Network,
    t: usize,
    states: &[Array1<f64>],
    inputs: &[Array1<f64>],
    disturbances: &[Array1<f64>],
    next: &mut [Array1<f64>],
) {
    for (i, s) in network.subsystems.iter().enumerate() {
        let y = &mut next[i];
        y.assign(&disturbances[i]);
        general_mat_vec_mul(1.0, s.a_at(t), &states[i], 1.0, y);
        general_mat_vec_mul(1.0, s.b_at(t), &inputs[i], 1.0, y);
        for c in &s.couplings {
            general_mat_vec_mul(1.0, &c.a[t.min(c.a.len() - 1)], &states[c.neighbor], 1.0, y);
            general_mat_vec_mul(1.0, &c.b[t.min(c.b.len() - 1)], &inputs[c.neighbor], 1.0, y);
        }
    }
}

/// Controller evaluation plus plant update into caller-owned buffers; returns the
/// worst viable-set residual.
fn step_into(
    network: &Network,
    bank: &mut ControllerBank,
    states: &[Array1<f64>],
    t: usize,
    disturbances: &[Array1<f64>],
    inputs: &mut [Array1<f64>],
    next: &mut [Array1<f64>],
) -> Result<f64, Violation> {
    let mut worst = 0.0_f64;
    for (i, x) in states.iter().enumerate() {
        match bank.controllers[i].control_into(t, x, &mut inputs[i]) {
            Ok(r) => worst = worst.max(r),
            Err(residual) => return Err(Violation { subsystem: i, t, kind: ViolationKind::ViableSet, residual }),
        }
    }
    plant_update_into(network, t, states, inputs, disturbances, next);
    Ok(worst)
}

/// Evaluates every local controller, then advances the coupled plant one step.
pub fn step(
    network: &Network,
    bank: &mut ControllerBank,
    states: &[Array1<f64>],
    t: usize,
    disturbances: &[Array1<f64>],
) -> Result<StepOutput, Violation> {
    let mut inputs: Vec<Array1<f64>> = network.subsystems.iter().map(|s| Array1::zeros(s.input_dim())).collect();
    let mut next: Vec<Array1<f64>> = network.subsystems.iter().map(|s| Array1::zeros(s.state_dim())).collect();
    let residual = step_into(network, bank, states, t, disturbances, &mut inputs, &mut next)?;
    Ok(StepOutput { inputs, next, residual })
}

/// Recorded closed-loop run. `states[i]` has one more entry than `inputs[i]` unless
/// the run stopped at a violation.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<Vec<Array1<f64>>>,
    pub inputs: Vec<Vec<Array1<f64>>>,
    pub disturbances: Vec<Vec<Array1<f64>>>,
    pub violation: Option<Violation>,
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.inputs.first().map_or(0, Vec::len)
    }

    /// Largest deviation of the recorded states from the coupled recursion.
    pub fn recursion_residual(&self, network: &Network) -> f64 {
        let mut worst = 0.0_f64;
        for t in 0..self.steps() {
            let at = |seq: &Vec<Vec<Array1<f64>>>| seq.iter().map(|s| s[t].clone()).collect::<Vec<_>>();
            let next = plant_update(network, t, &at(&self.states), &at(&self.inputs), &at(&self.disturbances));
            for (i, x) in next.iter().enumerate() {
                if let Some(rec) = self.states[i].get(t + 1) {
                    worst = worst.max((x - rec).iter().fold(0.0_f64, |m, v| m.max(v.abs())));
                }
            }
        }
        worst
    }

    /// One row per `(t, i)`: `t,subsystem,x0..,u0..,d0..`, padded with empty cells
    /// to the widest subsystem. The final state row has empty inputs.
    pub fn to_csv(&self) -> String {
        let nx = self.states.iter().filter_map(|s| s.first()).map(|x| x.len()).max().unwrap_or(0);
        let nu = self.inputs.iter().filter_map(|s| s.first()).map(|u| u.len()).max().unwrap_or(0);
        let nd = self.disturbances.iter().filter_map(|s| s.first()).map(|d| d.len()).max().unwrap_or(0);
        let mut out = String::from("t,subsystem");
        for (prefix, n) in [("x", nx), ("u", nu), ("d", nd)] {
            for c in 0..n {
                let _ = write!(out, ",{prefix}{c}");
            }
        }
        out.push('\n');
        let rows = self.states.iter().map(Vec::len).max().unwrap_or(0);
        let cells = |out: &mut String, v: Option<&Array1<f64>>, n: usize| {
            for c in 0..n {
                match v.and_then(|v| v.get(c)) {
                    Some(x) => {
                        let _ = write!(out, ",{x}");
                    }
                    None => out.push(','),
                }
            }
        };
        for t in 0..rows {
            for i in 0..self.states.len() {
                let Some(x) = self.states[i].get(t) else { continue };
                let _ = write!(out, "{t},{i}");
                cells(&mut out, Some(x), nx);
                cells(&mut out, self.inputs[i].get(t), nu);
                cells(&mut out, self.disturbances[i].get(t), nd);
                out.push('\n');
            }
        }
        out
    }
}

/// How sample points are drawn from a zonotope.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplePattern {
    /// `ζ` uniform in the unit cube.
    Uniform,
    /// `ζ` with entries in `{-1, 1}`.
    Vertex,
}

fn draw(z: &Zonotope, pattern: SamplePattern, rng: &mut ChaCha8Rng) -> Array1<f64> {
    match pattern {
        SamplePattern::Uniform => z.sample(rng),
        SamplePattern::Vertex => z.sample_sign_pattern(rng),
    }
}

fn draw_into(z: &Zonotope, pattern: SamplePattern, rng: &mut ChaCha8Rng, out: &mut Array1<f64>) {
    out.assign(z.center());
    let g = z.generators();
    for j in 0..g.ncols() {
        let w: f64 = match pattern {
            SamplePattern::Uniform => rng.gen_range(-1.0..=1.0),
            SamplePattern::Vertex => {
                if rng.gen::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
        };
        out.scaled_add(w, &g.column(j));
    }
}

/// Vertex number `index` (bits of `index` pick the signs).
fn enumerated_vertex(z: &Zonotope, index: usize) -> Array1<f64> {
    let zeta = Array1::from_shape_fn(z.num_generators(), |j| if (index >> j) & 1 == 1 { 1.0 } else { -1.0 });
    z.point_at(zeta.view())
}

/// Runs the closed loop from `initial` for `steps` steps, checking `Ω_i(t)`,
/// `X_i(t)` and `U_i(t)` along the way. `disturbance(i, t)` supplies `d_i(t)`.
pub fn simulate(
    network: &Network,
    bank: &mut ControllerBank,
    initial: Vec<Array1<f64>>,
    steps: usize,
    mut disturbance: impl FnMut(usize, usize) -> Array1<f64>,
) -> Trajectory {
    let n = network.len();
    let mut traj = Trajectory {
        states: initial.iter().map(|x| vec![x.clone()]).collect(),
        inputs: vec![Vec::new(); n],
        disturbances: vec![Vec::new(); n],
        violation: None,
    };
    let mut bounds = BoundCheckers::new(network);
    let fill = |i: usize, t: usize, out: &mut Array1<f64>| out.assign(&disturbance(i, t));
    let run = run_closed_loop(network, bank, &mut bounds, initial, steps, fill, |u, d, next| {
        for i in 0..n {
            traj.inputs[i].push(u[i].clone());
            traj.disturbances[i].push(d[i].clone());
            traj.states[i].push(next[i].clone());
        }
    });
    traj.violation = run.violation;
    traj
}

struct RunOutcome {
    violation: Option<Violation>,
    /// Per `t`, the worst residual of a state against its `Ω_i(t)`.
    residuals: Vec<f64>,
}

fn run_closed_loop(
    network: &Network,
    bank: &mut ControllerBank,
    bounds: &mut BoundCheckers,
    initial: Vec<Array1<f64>>,
    steps: usize,
    mut disturbance: impl FnMut(usize, usize, &mut Array1<f64>),
    mut observe: impl FnMut(&[Array1<f64>], &[Array1<f64>], &[Array1<f64>]),
) -> RunOutcome {
    let zeros = |dims: &mut dyn Iterator<Item = usize>| dims.map(Array1::zeros).collect::<Vec<Array1<f64>>>();
    let mut states = initial;
    let mut next = zeros(&mut network.subsystems.iter().map(|s| s.state_dim()));
    let mut d = zeros(&mut network.subsystems.iter().map(|s| s.state_dim()));
    let mut inputs = zeros(&mut network.subsystems.iter().map(|s| s.input_dim()));
    let mut residuals = Vec::with_capacity(steps + 1);
    for t in 0..=steps {
        if let Some(v) = bounds.check_states(network, t, &states) {
            return RunOutcome { violation: Some(v), residuals };
        }
        if t == steps {
            // Terminal state: only membership in the last set is required.
            let mut worst = 0.0_f64;
            for (i, x) in states.iter().enumerate() {
                let residual = bank.controllers[i].residual(t, x);
                worst = worst.max(residual);
                if residual > VERIFY_TOL {
                    residuals.push(worst);
                    let v = Violation { subsystem: i, t, kind: ViolationKind::ViableSet, residual };
                    return RunOutcome { violation: Some(v), residuals };
                }
            }
            residuals.push(worst);
            break;
        }
        for (i, di) in d.iter_mut().enumerate() {
            disturbance(i, t, di);
        }
        match step_into(network, bank, &states, t, &d, &mut inputs, &mut next) {
            Ok(residual) => {
                residuals.push(residual);
                if let Some(v) = bounds.check_inputs(t, &inputs) {
                    return RunOutcome { violation: Some(v), residuals };
                }
                observe(&inputs, &d, &next);
                std::mem::swap(&mut states, &mut next);
            }
            Err(v) => {
                residuals.push(v.residual);
                return RunOutcome { violation: Some(v), residuals };
            }
        }
    }
    RunOutcome { violation: None, residuals }
}

/// Membership checks against `X_i(t)` and `U_i(t)`, built once per distinct set.
struct BoundCheckers {
    state: Vec<Vec<SetLocator>>,
    input: Vec<Vec<SetLocator>>,
}

impl BoundCheckers {
    fn new(network: &Network) -> Self {
        let build = |sets: &Vec<Zonotope>| sets.iter().map(SetLocator::new).collect();
        Self {
            state: network.subsystems.iter().map(|s| build(&s.x)).collect(),
            input: network.subsystems.iter().map(|s| build(&s.u)).collect(),
        }
    }

    fn check(sets: &mut [Vec<SetLocator>], t: usize, values: &[Array1<f64>], kind: ViolationKind) -> Option<Violation> {
        for (i, v) in values.iter().enumerate() {
            let idx = t.min(sets[i].len() - 1);
            let residual = sets[i][idx].locate(v).1;
            if residual > VERIFY_TOL {
                return Some(Violation { subsystem: i, t, kind, residual });
            }
        }
        None
    }

    fn check_states(&mut self, network: &Network, t: usize, states: &[Array1<f64>]) -> Option<Violation> {
        // Finite-mode bounds exist for 0..=h; the terminal set is X(h).
        let t_bound = if network.mode == Mode::Finite { t.min(network.horizon) } else { t };
        Self::check(&mut self.state, t_bound, states, ViolationKind::StateBound)
    }

    fn check_inputs(&mut self, t: usize, inputs: &[Array1<f64>]) -> Option<Violation> {
        Self::check(&mut self.input, t, inputs, ViolationKind::InputBound)
    }
}

/// Outcome of [`verify_invariance`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub samples: usize,
    pub steps: usize,
    pub seed: u64,
    /// Trajectories with at least one violation.
    pub violations: usize,
    /// Earliest violating trajectory and what it hit.
    pub first_violation: Option<(usize, Violation)>,
    /// Per `t`, the worst residual of any recorded state against its `Ω_i(t)`.
    pub margins: Vec<f64>,
    /// No samples were drawn, so the pass says nothing.
    pub vacuous: bool,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

struct Tally {
    first: Option<(usize, Violation)>,
    violations: usize,
    margins: Vec<f64>,
}

impl Tally {
    fn empty(len: usize) -> Self {
        Self { first: None, violations: 0, margins: vec![0.0; len] }
    }

    fn merge(mut self, other: Tally) -> Tally {
        self.violations += other.violations;
        self.first = match (self.first, other.first) {
            (Some(a), Some(b)) => Some(if a.0 <= b.0 { a } else { b }),
            (a, b) => a.or(b),
        };
        for (m, o) in self.margins.iter_mut().zip(other.margins) {
            *m = m.max(o);
        }
        self
    }
}

/// Simulates `num_samples` independent closed-loop trajectories and counts
/// violations. Even trajectories sample initial states and disturbances uniformly
/// in `ζ`; odd ones use `±1` patterns, enumerating all initial vertices when a set
/// has at most 12 generators. Finite-mode runs cover the horizon; infinite-mode
/// runs take `num_steps` steps. Deterministic in `seed` regardless of thread count.
pub fn verify_invariance(
    network: &Network,
    solutions: &[Solution],
    num_samples: usize,
    num_steps: usize,
    seed: u64,
) -> Result<VerificationReport, RuntimeError> {
    let bank = ControllerBank::new(network, solutions)?;
    let steps = bank.horizon().unwrap_or(num_steps);
    let len = steps + 1;
    let tally = (0..num_samples)
        .into_par_iter()
        .map_init(
            || bank.clone(),
            |bank, j| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(j as u64);
                let pattern = if j % 2 == 0 { SamplePattern::Uniform } else { SamplePattern::Vertex };
                let initial: Vec<Array1<f64>> = (0..network.len())
                    .map(|i| {
                        let omega = bank.omega(i, 0);
                        if pattern == SamplePattern::Vertex && omega.num_generators() <= MAX_ENUMERATED_GENERATORS {
                            enumerated_vertex(&omega, (j / 2) % (1usize << omega.num_generators()))
                        } else {
                            draw(&omega, pattern, &mut rng)
                        }
                    })
                    .collect();
                let mut bounds = BoundCheckers::new(network);
                let run = run_closed_loop(
                    network,
                    bank,
                    &mut bounds,
                    initial,
                    steps,
                    |i, t, out| draw_into(network.subsystems[i].d_at(t), pattern, &mut rng, out),
                    |_, _, _| {},
                );
                let mut tally = Tally::empty(len);
                for (m, r) in tally.margins.iter_mut().zip(run.residuals) {
                    *m = r;
                }
                if let Some(v) = run.violation {
                    tally.violations = 1;
                    tally.first = Some((j, v));
                }
                tally
            },
        )
        .reduce(|| Tally::empty(len), Tally::merge);
    Ok(VerificationReport {
        samples: num_samples,
        steps,
        seed,
        violations: tally.violations,
        first_violation: tally.first,
        margins: if num_samples == 0 { Vec::new() } else { tally.margins },
        vacuous: num_samples == 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sysmodel::Subsystem;
    use crate::viability::{rci, RciProblem};
    use ndarray::{arr1, arr2, Array2};

    fn scalar_network(coupling: f64) -> Network {
        let sub = |neighbor: usize| Subsystem {
            id: format!("s{neighbor}"),
            a: vec![arr2(&[[1.0]])],
            b: vec![arr2(&[[1.0]])],
            couplings: vec![crate::sysmodel::Coupling {
                neighbor,
                a: vec![arr2(&[[coupling]])],
                b: vec![Array2::zeros((1, 1))],
            }],
            x: vec![Zonotope::new(arr1(&[0.0]), arr2(&[[1.0]])).unwrap()],
            u: vec![Zonotope::new(arr1(&[0.0]), arr2(&[[1.0]])).unwrap()],
            d: vec![Zonotope::new(arr1(&[0.0]), arr2(&[[0.1]])).unwrap()],
            template_x: None,
            template_u: None,
            initial: None,
        };
        Network { mode: Mode::Infinite, horizon: 0, subsystems: vec![sub(1), sub(0)] }
    }

    /// Deadbeat RCI set of `x⁺ = x + u + d` with `|d| <= 0.1`: `Ω = [-0.1, 0.1]`, `u = -x`.
    fn deadbeat() -> Solution {
        let problem = RciProblem {
            a: arr2(&[[1.0]]),
            b: arr2(&[[1.0]]),
            disturbance: Zonotope::new(arr1(&[0.0]), arr2(&[[0.1]])).unwrap(),
            state: Zonotope::new(arr1(&[0.0]), arr2(&[[1.0]])).unwrap(),
            input: Zonotope::new(arr1(&[0.0]), arr2(&[[1.0]])).unwrap(),
        };
        Solution::Infinite(rci(&problem, 1, 0.0, true).unwrap().unwrap())
    }

    #[test]
    fn centers_map_to_centers() {
        let net = scalar_network(0.0);
        let sols = vec![deadbeat(), deadbeat()];
        let mut bank = ControllerBank::new(&net, &sols).unwrap();
        let x = vec![arr1(&[0.0]), arr1(&[0.0])];
        let out = step(&net, &mut bank, &x, 0, &[arr1(&[0.0]), arr1(&[0.0])]).unwrap();
        assert_eq!(out.next, x);
    }

    #[test]
    fn uncoupled_run_is_clean_and_satisfies_recursion() {
        let net = scalar_network(0.0);
        let sols = vec![deadbeat(), deadbeat()];
        let report = verify_invariance(&net, &sols, 64, 50, 7).unwrap();
        assert!(report.passed(), "{report:?}");
        assert!(!report.vacuous);
        let mut bank = ControllerBank::new(&net, &sols).unwrap();
        let traj = simulate(&net, &mut bank, vec![arr1(&[0.1]), arr1(&[-0.05])], 20, |i, t| {
            arr1(&[if (i + t) % 2 == 0 { 0.1 } else { -0.1 }])
        });
        assert!(traj.violation.is_none());
        assert!(traj.recursion_residual(&net) <= 1e-10);
    }

    #[test]
    fn unmodelled_coupling_is_caught() {
        let net = scalar_network(0.5);
        let sols = vec![deadbeat(), deadbeat()];
        let report = verify_invariance(&net, &sols, 32, 20, 1).unwrap();
        assert!(report.violations > 0);
        assert!(report.first_violation.is_some());
    }

    #[test]
    fn zero_samples_is_vacuous() {
        let net = scalar_network(0.0);
        let report = verify_invariance(&net, &[deadbeat(), deadbeat()], 0, 10, 0).unwrap();
        assert!(report.vacuous && report.passed() && report.margins.is_empty());
    }

    #[test]
    fn deterministic_in_seed() {
        let net = scalar_network(0.3);
        let sols = vec![deadbeat(), deadbeat()];
        let a = verify_invariance(&net, &sols, 40, 10, 99).unwrap();
        let b = verify_invariance(&net, &sols, 40, 10, 99).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn box_fast_path_matches_general_solver() {
        use rand::Rng;
        let boxed = Zonotope::new(arr1(&[0.5, -1.0]), arr2(&[[2.0, 0.0], [0.0, -0.5]])).unwrap();
        let mut fast = SetLocator::new(&boxed);
        assert!(fast.diagonal.is_some());
        let mut general = PointLocator::new(boxed.generators());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let x = arr1(&[rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..1.0)]);
            let (_, r_fast) = fast.locate(&x);
            let offset: Vec<f64> = (&x - boxed.center()).to_vec();
            let (_, r_general) = general.locate(&offset);
            assert_eq!(r_fast <= VERIFY_TOL, r_general <= VERIFY_TOL, "{x}");
        }
    }

    #[test]
    fn wrong_solution_count() {
        let net = scalar_network(0.0);
        assert!(matches!(ControllerBank::new(&net, &[deadbeat()]), Err(RuntimeError::SolutionCount { .. })));
    }

    #[test]
    fn csv_has_one_row_per_state() {
        let net = scalar_network(0.0);
        let mut bank = ControllerBank::new(&net, &[deadbeat(), deadbeat()]).unwrap();
        let traj = simulate(&net, &mut bank, vec![arr1(&[0.0]), arr1(&[0.0])], 3, |_, _| arr1(&[0.05]));
        let csv = traj.to_csv();
        assert_eq!(csv.lines().next(), Some("t,subsystem,x0,u0,d0"));
        assert_eq!(csv.lines().count(), 1 + 2 * 4);
        assert!(csv.lines().last().unwrap().ends_with(",,"));
    }
}
