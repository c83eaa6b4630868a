//! Viable sets of a single linear system under a zonotopic disturbance.
//!
//! Finite horizon: a tube `Ω(t) = Z(x̄(t), T(t))` with inputs
//! `Θ(t) = Z(ū(t), M(t))` such that
//! `[A(t) T(t) + B(t) M(t), G^d(t)] = T(t+1)` and
//! `A(t) x̄(t) + B(t) ū(t) + d̄(t) = x̄(t+1)`. Each step appends the disturbance
//! generators, so `T(t)` has `k + Σ_{s<t} p(s)` columns. The fixed-k variant
//! keeps `k` columns by requiring `[A T + B M, G^d] = [0, T(t+1)]` column-wise.
//!
//! Infinite horizon: `[A T + B M, G^d] = [E, T]` with `Z(0, E) ⊆ Z(0, β G^d)`;
//! `Ω = Z(x̄, T / (1 - β))` is robust control invariant. With `E = 0, β = 0`
//! the pairing forces a deadbeat chain from each disturbance generator.
//!
//! The controller maps a state to any coordinate vector `ζ` with
//! `x = x̄ + T ζ`, `|ζ|_inf <= 1`, and returns `ū + M ζ`.

use std::fmt;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{contains_point_with_tol, encode_containment, GeomError, SymZonotope, Zonotope};
use crate::lpcore::{LinExpr, LinearProgram, LpError, LpSolution, LpStatus, SolveOptions};
use crate::serde_util;

/// Relative tolerance for locating a state inside a viable set.
pub const CONTROL_TOL: f64 = 1e-7;

#[derive(Debug, Error)]
pub enum ViabilityError {
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("k must be at least 1")]
    InvalidK,
    #[error("beta must lie in [0, 1), got {0}")]
    InvalidBeta(f64),
    #[error("state is outside the viable set at t = {t} (residual {residual:.3e})")]
    OutOfSet { t: usize, residual: f64 },
    #[error("time {t} is outside the horizon {horizon}")]
    TimeIndex { t: usize, horizon: usize },
    #[error("solver stopped early: {0:?}")]
    Incomplete(LpStatus),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum GrowthMode {
    #[default]
    Growing,
    FixedK,
}

impl fmt::Display for GrowthMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GrowthMode::Growing => "growing",
            GrowthMode::FixedK => "fixed-k",
        })
    }
}

/// A disturbance zonotope whose generator entries may be affine in LP variables.
#[derive(Debug, Clone)]
pub struct SymDisturbance {
    pub center: Array1<f64>,
    /// `columns[c][row]`.
    pub columns: Vec<Vec<LinExpr>>,
}

impl SymDisturbance {
    pub fn from_zonotope(z: &Zonotope) -> Self {
        Self {
            center: z.center().clone(),
            columns: z
                .generators()
                .columns()
                .into_iter()
                .filter(|c| c.iter().any(|v| *v != 0.0))
                .map(|c| c.iter().map(|&v| LinExpr::constant(v)).collect())
                .collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn num_columns(&self) -> usize {
        self.columns.len()
    }
}

/// Finite-horizon viable tube.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViableSolution {
    #[serde(with = "serde_util::vectors")]
    pub xbar: Vec<Array1<f64>>,
    #[serde(rename = "T", with = "serde_util::mats")]
    pub t: Vec<Array2<f64>>,
    #[serde(with = "serde_util::vectors")]
    pub ubar: Vec<Array1<f64>>,
    #[serde(rename = "M", with = "serde_util::mats")]
    pub m: Vec<Array2<f64>>,
    pub growth: GrowthMode,
    pub k: usize,
    #[serde(skip)]
    pub solve_seconds: f64,
}

impl ViableSolution {
    pub fn horizon(&self) -> usize {
        self.m.len()
    }

    pub fn omega(&self, t: usize) -> Zonotope {
        Zonotope::new(self.xbar[t].clone(), self.t[t].clone()).expect("finite solution")
    }

    pub fn theta(&self, t: usize) -> Zonotope {
        Zonotope::new(self.ubar[t].clone(), self.m[t].clone()).expect("finite solution")
    }

    /// `ū(t) + M(t) ζ` for a caller-supplied witness.
    pub fn control_from_witness(&self, t: usize, zeta: &Array1<f64>) -> Array1<f64> {
        &self.ubar[t] + &self.m[t].dot(zeta)
    }

    pub fn control(&self, t: usize, x: &Array1<f64>) -> Result<Array1<f64>, ViabilityError> {
        if t >= self.horizon() {
            return Err(ViabilityError::TimeIndex { t, horizon: self.horizon() });
        }
        let mem = contains_point_with_tol(&self.omega(t), x, CONTROL_TOL)?;
        if !mem.inside {
            return Err(ViabilityError::OutOfSet { t, residual: mem.residual });
        }
        Ok(self.control_from_witness(t, &mem.witness))
    }
}

/// Robust control invariant set `Ω = Z(x̄, T / (1 - β))` with inputs `Θ = Z(ū, M / (1 - β))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RciSolution {
    #[serde(with = "serde_util::vector")]
    pub xbar: Array1<f64>,
    #[serde(rename = "T", with = "serde_util::mat")]
    pub t: Array2<f64>,
    #[serde(with = "serde_util::vector")]
    pub ubar: Array1<f64>,
    #[serde(rename = "M", with = "serde_util::mat")]
    pub m: Array2<f64>,
    pub beta: f64,
    #[serde(rename = "E", with = "serde_util::mat")]
    pub e: Array2<f64>,
    pub k: usize,
    #[serde(skip)]
    pub solve_seconds: f64,
}

impl RciSolution {
    pub fn scale(&self) -> f64 {
        1.0 / (1.0 - self.beta)
    }

    pub fn omega(&self) -> Zonotope {
        Zonotope::new(self.xbar.clone(), &self.t * self.scale()).expect("finite solution")
    }

    pub fn theta(&self) -> Zonotope {
        Zonotope::new(self.ubar.clone(), &self.m * self.scale()).expect("finite solution")
    }

    /// `ζ` is a coordinate vector of `Ω`, i.e. `x = x̄ + T ζ / (1 - β)`.
    pub fn control_from_witness(&self, zeta: &Array1<f64>) -> Array1<f64> {
        &self.ubar + &(self.m.dot(zeta) * self.scale())
    }

    pub fn control(&self, x: &Array1<f64>) -> Result<Array1<f64>, ViabilityError> {
        let mem = contains_point_with_tol(&self.omega(), x, CONTROL_TOL)?;
        if !mem.inside {
            return Err(ViabilityError::OutOfSet { t: 0, residual: mem.residual });
        }
        Ok(self.control_from_witness(&mem.witness))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Solution {
    Finite(ViableSolution),
    Infinite(RciSolution),
}

impl Solution {
    /// `Ω(t)`; the invariant set for every `t` in infinite mode.
    pub fn omega(&self, t: usize) -> Zonotope {
        match self {
            Solution::Finite(s) => s.omega(t),
            Solution::Infinite(s) => s.omega(),
        }
    }

    pub fn theta(&self, t: usize) -> Zonotope {
        match self {
            Solution::Finite(s) => s.theta(t),
            Solution::Infinite(s) => s.theta(),
        }
    }

    pub fn control_from_witness(&self, t: usize, zeta: &Array1<f64>) -> Array1<f64> {
        match self {
            Solution::Finite(s) => s.control_from_witness(t, zeta),
            Solution::Infinite(s) => s.control_from_witness(zeta),
        }
    }

    pub fn solve_seconds(&self) -> f64 {
        match self {
            Solution::Finite(s) => s.solve_seconds,
            Solution::Infinite(s) => s.solve_seconds,
        }
    }
}

/// `u = ū(t) + M(t) ζ(x)`; errors when `x` lies outside `Ω(t)`.
pub fn extract_controller(sol: &Solution, t: usize, x: &Array1<f64>) -> Result<Array1<f64>, ViabilityError> {
    match sol {
        Solution::Finite(s) => s.control(t, x),
        Solution::Infinite(s) => s.control(x),
    }
}

// ---------------------------------------------------------------------------
// Tube construction shared with the contract and synthesis programs

/// LP handles for a tube: centers and generator columns as affine expressions.
#[derive(Debug, Clone)]
pub(crate) struct Tube {
    pub xbar: Vec<Vec<LinExpr>>,
    /// `t_cols[t][c][row]`.
    pub t_cols: Vec<Vec<Vec<LinExpr>>>,
    pub ubar: Vec<Vec<LinExpr>>,
    pub m_cols: Vec<Vec<Vec<LinExpr>>>,
    /// `E` columns of the infinite-horizon pairing, when free.
    pub e_cols: Vec<Vec<LinExpr>>,
    pub k: usize,
}

impl Tube {
    pub fn omega(&self, t: usize, scale: f64) -> SymZonotope {
        SymZonotope { center: self.xbar[t].clone(), generators: self.t_cols[t].clone() }.scale_generators(scale)
    }

    pub fn theta(&self, t: usize, scale: f64) -> SymZonotope {
        SymZonotope { center: self.ubar[t].clone(), generators: self.m_cols[t].clone() }.scale_generators(scale)
    }

    /// Adds `weight · Σ |entry|` over every non-constant entry of every `T(t)`.
    pub fn add_abs_objective(&self, lp: &mut LinearProgram, weight: f64) {
        for cols in &self.t_cols {
            for col in cols {
                for e in col {
                    if e.is_constant() {
                        continue;
                    }
                    let a = lp.add_var(0.0, f64::INFINITY);
                    let av = LinExpr::var(a);
                    lp.add_le(e, &av);
                    lp.add_le(&(-e.clone()), &av);
                    lp.add_objective(&av, weight);
                }
            }
        }
    }

    fn eval_vec(sol: &LpSolution, v: &[LinExpr]) -> Array1<f64> {
        Array1::from_iter(v.iter().map(|e| sol.eval(e)))
    }

    fn eval_cols(sol: &LpSolution, cols: &[Vec<LinExpr>], rows: usize) -> Array2<f64> {
        Array2::from_shape_fn((rows, cols.len()), |(i, j)| sol.eval(&cols[j][i]))
    }

    pub fn extract_finite(&self, sol: &LpSolution, n: usize, m: usize, growth: GrowthMode) -> ViableSolution {
        ViableSolution {
            xbar: self.xbar.iter().map(|v| Self::eval_vec(sol, v)).collect(),
            t: self.t_cols.iter().map(|c| Self::eval_cols(sol, c, n)).collect(),
            ubar: self.ubar.iter().map(|v| Self::eval_vec(sol, v)).collect(),
            m: self.m_cols.iter().map(|c| Self::eval_cols(sol, c, m)).collect(),
            growth,
            k: self.k,
            solve_seconds: sol.solve_seconds,
        }
    }

    pub fn extract_rci(&self, sol: &LpSolution, n: usize, m: usize, beta: f64) -> RciSolution {
        RciSolution {
            xbar: Self::eval_vec(sol, &self.xbar[0]),
            t: Self::eval_cols(sol, &self.t_cols[0], n),
            ubar: Self::eval_vec(sol, &self.ubar[0]),
            m: Self::eval_cols(sol, &self.m_cols[0], m),
            beta,
            e: Self::eval_cols(sol, &self.e_cols, n),
            k: self.k,
            solve_seconds: sol.solve_seconds,
        }
    }
}

fn var_col(lp: &mut LinearProgram, rows: usize) -> Vec<LinExpr> {
    lp.add_free_vars(rows).into_iter().map(LinExpr::var).collect()
}

fn const_vec(v: &Array1<f64>) -> Vec<LinExpr> {
    v.iter().map(|&x| LinExpr::constant(x)).collect()
}

/// `A t + B m` for one column.
fn propagate(a: &Array2<f64>, b: &Array2<f64>, tcol: &[LinExpr], mcol: &[LinExpr]) -> Vec<LinExpr> {
    (0..a.nrows())
        .map(|r| {
            let mut e = LinExpr::zero();
            for (c, x) in tcol.iter().enumerate() {
                let coef = a[[r, c]];
                if coef != 0.0 {
                    e.add_scaled(x, coef);
                }
            }
            for (c, u) in mcol.iter().enumerate() {
                let coef = b[[r, c]];
                if coef != 0.0 {
                    e.add_scaled(u, coef);
                }
            }
            e.compact()
        })
        .collect()
}

fn add_center_step(lp: &mut LinearProgram, a: &Array2<f64>, b: &Array2<f64>, x: &[LinExpr], u: &[LinExpr], d: &Array1<f64>, next: &[LinExpr]) {
    let lhs = propagate(a, b, x, u);
    for r in 0..lhs.len() {
        let mut e = lhs[r].clone();
        e.constant += d[r];
        lp.add_equal(&e, &next[r]);
    }
}

/// Column-wise `left[c] == right[c]`, where a `None` entry on the right is a zero column.
fn add_pairing(lp: &mut LinearProgram, left: &[Vec<LinExpr>], right: &[Option<&Vec<LinExpr>>], rows: usize) {
    debug_assert_eq!(left.len(), right.len());
    for (l, r) in left.iter().zip(right) {
        for i in 0..rows {
            match r {
                Some(col) => {
                    lp.add_equal(&l[i], &col[i]);
                }
                None => {
                    lp.add_equal(&l[i], &LinExpr::zero());
                }
            }
        }
    }
}

fn check_dynamics(a: &[&Array2<f64>], b: &[&Array2<f64>], dist: &[SymDisturbance]) -> Result<(usize, usize), ViabilityError> {
    if a.is_empty() || a.len() != b.len() || a.len() != dist.len() {
        return Err(ViabilityError::Dimension(format!(
            "{} dynamics, {} input matrices, {} disturbance sets",
            a.len(),
            b.len(),
            dist.len()
        )));
    }
    let n = a[0].nrows();
    let m = b[0].ncols();
    for t in 0..a.len() {
        if a[t].dim() != (n, n) || b[t].dim() != (n, m) || dist[t].dim() != n {
            return Err(ViabilityError::Dimension(format!("step {t} does not match n = {n}, m = {m}")));
        }
        if dist[t].columns.iter().any(|c| c.len() != n) {
            return Err(ViabilityError::Dimension(format!("disturbance column at step {t}")));
        }
    }
    Ok((n, m))
}

/// Builds the finite-horizon tube equalities; no containments, no objective.
pub(crate) fn build_finite_tube(
    lp: &mut LinearProgram,
    a: &[&Array2<f64>],
    b: &[&Array2<f64>],
    dist: &[SymDisturbance],
    k: usize,
    growth: GrowthMode,
    initial: Option<&Zonotope>,
) -> Result<Tube, ViabilityError> {
    let (n, m) = check_dynamics(a, b, dist)?;
    let h = a.len();
    let (x0, t0): (Vec<LinExpr>, Vec<Vec<LinExpr>>) = match initial {
        Some(z) => {
            if z.dim() != n {
                return Err(ViabilityError::Dimension(format!("initial set has dimension {}", z.dim())));
            }
            let mut cols: Vec<Vec<LinExpr>> = z.generators().columns().into_iter().map(|c| const_vec(&c.to_owned())).collect();
            if growth == GrowthMode::FixedK {
                if cols.len() > k {
                    return Err(ViabilityError::Dimension(format!("initial set has {} generators but k = {k}", cols.len())));
                }
                cols.resize(k, vec![LinExpr::zero(); n]);
            }
            (const_vec(z.center()), cols)
        }
        None => {
            if k == 0 {
                return Err(ViabilityError::InvalidK);
            }
            (var_col(lp, n), (0..k).map(|_| var_col(lp, n)).collect())
        }
    };
    let k = t0.len();
    let mut tube = Tube { xbar: vec![x0], t_cols: vec![t0], ubar: Vec::new(), m_cols: Vec::new(), e_cols: Vec::new(), k };

    for t in 0..h {
        let l = tube.t_cols[t].len();
        let ubar = var_col(lp, m);
        let mcols: Vec<Vec<LinExpr>> = (0..l).map(|_| var_col(lp, m)).collect();
        let next_x = var_col(lp, n);
        add_center_step(lp, a[t], b[t], &tube.xbar[t], &ubar, &dist[t].center, &next_x);

        let prop: Vec<Vec<LinExpr>> = (0..l).map(|c| propagate(a[t], b[t], &tube.t_cols[t][c], &mcols[c])).collect();
        let next_cols = match growth {
            GrowthMode::Growing => {
                let mut cols = Vec::with_capacity(l + dist[t].num_columns());
                for pc in &prop {
                    let v = var_col(lp, n);
                    for r in 0..n {
                        lp.add_equal(&pc[r], &v[r]);
                    }
                    cols.push(v);
                }
                cols.extend(dist[t].columns.iter().cloned());
                cols
            }
            GrowthMode::FixedK => {
                let cols: Vec<Vec<LinExpr>> = (0..k).map(|_| var_col(lp, n)).collect();
                let p = dist[t].num_columns();
                let mut left = prop;
                left.extend(dist[t].columns.iter().cloned());
                let right: Vec<Option<&Vec<LinExpr>>> = std::iter::repeat(None).take(p).chain(cols.iter().map(Some)).collect();
                add_pairing(lp, &left, &right, n);
                cols
            }
        };
        tube.ubar.push(ubar);
        tube.m_cols.push(mcols);
        tube.xbar.push(next_x);
        tube.t_cols.push(next_cols);
    }
    Ok(tube)
}

/// Builds `[A T + B M, G^d] = [E, T]` and the center fixed point. With
/// `free_e = false`, `E` is the zero block.
pub(crate) fn build_rci_tube(
    lp: &mut LinearProgram,
    a: &Array2<f64>,
    b: &Array2<f64>,
    dist: &SymDisturbance,
    k: usize,
    free_e: bool,
) -> Result<Tube, ViabilityError> {
    let (n, m) = check_dynamics(&[a], &[b], std::slice::from_ref(dist))?;
    if k == 0 {
        return Err(ViabilityError::InvalidK);
    }
    let xbar = var_col(lp, n);
    let ubar = var_col(lp, m);
    let tcols: Vec<Vec<LinExpr>> = (0..k).map(|_| var_col(lp, n)).collect();
    let mcols: Vec<Vec<LinExpr>> = (0..k).map(|_| var_col(lp, m)).collect();
    add_center_step(lp, a, b, &xbar, &ubar, &dist.center, &xbar);

    let p = dist.num_columns();
    let e_cols: Vec<Vec<LinExpr>> = if free_e { (0..p).map(|_| var_col(lp, n)).collect() } else { Vec::new() };
    let mut left: Vec<Vec<LinExpr>> = (0..k).map(|c| propagate(a, b, &tcols[c], &mcols[c])).collect();
    left.extend(dist.columns.iter().cloned());
    let right: Vec<Option<&Vec<LinExpr>>> = if free_e {
        e_cols.iter().map(Some).chain(tcols.iter().map(Some)).collect()
    } else {
        std::iter::repeat(None).take(p).chain(tcols.iter().map(Some)).collect()
    };
    add_pairing(lp, &left, &right, n);
    Ok(Tube { xbar: vec![xbar], t_cols: vec![tcols], ubar: vec![ubar], m_cols: vec![mcols], e_cols, k })
}

pub(crate) fn unit_bounds(count: usize) -> Vec<LinExpr> {
    vec![LinExpr::constant(1.0); count]
}

pub(crate) fn add_hard_containment(
    lp: &mut LinearProgram,
    inner: &SymZonotope,
    outer: &Zonotope,
) -> Result<(), GeomError> {
    encode_containment(lp, inner, &const_vec(outer.center()), outer.generators(), &unit_bounds(outer.num_generators()), None)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Single-system problems

/// Data for the finite-horizon problem of one system.
#[derive(Debug, Clone)]
pub struct FiniteProblem {
    /// `A(t)`, `t = 0..h-1`.
    pub a: Vec<Array2<f64>>,
    pub b: Vec<Array2<f64>>,
    /// Assumed disturbance `W(t)`, `t = 0..h-1`.
    pub disturbance: Vec<Zonotope>,
    /// Guarantee sets `𝒳(t)`, `t = 0..h`.
    pub state: Vec<Zonotope>,
    /// Guarantee sets `𝒰(t)`, `t = 0..h-1`.
    pub input: Vec<Zonotope>,
    /// Optional fixed `Ω(0)`.
    pub initial: Option<Zonotope>,
}

impl FiniteProblem {
    pub fn horizon(&self) -> usize {
        self.a.len()
    }

    fn check(&self) -> Result<(), ViabilityError> {
        let h = self.horizon();
        if self.state.len() != h + 1 || self.input.len() != h || self.disturbance.len() != h {
            return Err(ViabilityError::Dimension(format!(
                "horizon {h} needs {} state sets and {h} input/disturbance sets",
                h + 1
            )));
        }
        Ok(())
    }
}

/// Finite-horizon viable tube minimizing the sum of absolute entries of all `T(t)`.
/// `Ok(None)` means the program is infeasible for this `k`.
pub fn finite_viable(problem: &FiniteProblem, k: usize, growth: GrowthMode) -> Result<Option<ViableSolution>, ViabilityError> {
    problem.check()?;
    let mut lp = LinearProgram::new();
    let a: Vec<&Array2<f64>> = problem.a.iter().collect();
    let b: Vec<&Array2<f64>> = problem.b.iter().collect();
    let dist: Vec<SymDisturbance> = problem.disturbance.iter().map(SymDisturbance::from_zonotope).collect();
    let tube = build_finite_tube(&mut lp, &a, &b, &dist, k, growth, problem.initial.as_ref())?;
    for t in 0..=problem.horizon() {
        add_hard_containment(&mut lp, &tube.omega(t, 1.0), &problem.state[t])?;
    }
    for t in 0..problem.horizon() {
        add_hard_containment(&mut lp, &tube.theta(t, 1.0), &problem.input[t])?;
    }
    tube.add_abs_objective(&mut lp, 1.0);
    let sol = lp.solve()?;
    let (n, m) = (problem.a[0].nrows(), problem.b[0].ncols());
    match sol.status {
        LpStatus::Optimal => Ok(Some(tube.extract_finite(&sol, n, m, growth))),
        LpStatus::Infeasible => Ok(None),
        other => Err(ViabilityError::Incomplete(other)),
    }
}

/// Tries `k = k_start, 2 k_start, …` up to `k_cap`; returns the first satisfiable tube.
pub fn finite_viable_escalating(
    problem: &FiniteProblem,
    growth: GrowthMode,
    k_start: usize,
    k_cap: usize,
) -> Result<Option<ViableSolution>, ViabilityError> {
    let mut k = k_start.max(1);
    loop {
        if let Some(sol) = finite_viable(problem, k, growth)? {
            return Ok(Some(sol));
        }
        if k >= k_cap {
            return Ok(None);
        }
        k = (2 * k).min(k_cap);
    }
}

/// Data for the infinite-horizon problem of one time-invariant system.
#[derive(Debug, Clone)]
pub struct RciProblem {
    pub a: Array2<f64>,
    pub b: Array2<f64>,
    pub disturbance: Zonotope,
    pub state: Zonotope,
    pub input: Zonotope,
}

/// Robust control invariant set with `k` generator columns and a fixed `β`.
///
/// `simplified = true` fixes `E = 0` and ignores `beta` (it must still be valid).
/// `Ok(None)` means the program is infeasible.
pub fn rci(problem: &RciProblem, k: usize, beta: f64, simplified: bool) -> Result<Option<RciSolution>, ViabilityError> {
    match rci_attempt(problem, k, beta, simplified, &SolveOptions::default())? {
        Attempt::Solved(s) => Ok(Some(s)),
        Attempt::Infeasible(_) => Ok(None),
        Attempt::TimedOut(_) => Err(ViabilityError::Incomplete(LpStatus::TimeLimit)),
    }
}

/// Outcome of a solve under a time limit; the payloads carry solver seconds.
#[derive(Debug, Clone)]
pub enum Attempt {
    Solved(RciSolution),
    Infeasible(f64),
    TimedOut(f64),
}

/// [`rci`] in the simplified form under solver options.
pub fn rci_with_options(problem: &RciProblem, k: usize, opts: &SolveOptions) -> Result<Attempt, ViabilityError> {
    rci_attempt(problem, k, 0.0, true, opts)
}

fn rci_attempt(problem: &RciProblem, k: usize, beta: f64, simplified: bool, opts: &SolveOptions) -> Result<Attempt, ViabilityError> {
    if !(0.0..1.0).contains(&beta) {
        return Err(ViabilityError::InvalidBeta(beta));
    }
    let beta = if simplified { 0.0 } else { beta };
    let mut lp = LinearProgram::new();
    let dist = SymDisturbance::from_zonotope(&problem.disturbance);
    let tube = build_rci_tube(&mut lp, &problem.a, &problem.b, &dist, k, !simplified)?;
    let s = 1.0 / (1.0 - beta);
    if !simplified {
        // Z(0, E) ⊆ Z(0, β G^d)
        let n = problem.a.nrows();
        let inner = SymZonotope { center: vec![LinExpr::zero(); n], generators: tube.e_cols.clone() };
        let gd = problem.disturbance.without_zero_generators();
        let outer = gd.generators() * beta;
        let zero = vec![LinExpr::zero(); n];
        encode_containment(&mut lp, &inner, &zero, &outer, &unit_bounds(outer.ncols()), None)?;
    }
    add_hard_containment(&mut lp, &tube.omega(0, s), &problem.state)?;
    add_hard_containment(&mut lp, &tube.theta(0, s), &problem.input)?;
    tube.add_abs_objective(&mut lp, 1.0);
    let sol = lp.solve_with(opts)?;
    match sol.status {
        LpStatus::Optimal => Ok(Attempt::Solved(tube.extract_rci(&sol, problem.a.nrows(), problem.b.ncols(), beta))),
        LpStatus::Infeasible => Ok(Attempt::Infeasible(sol.solve_seconds)),
        LpStatus::TimeLimit => Ok(Attempt::TimedOut(sol.solve_seconds)),
        other => Err(ViabilityError::Incomplete(other)),
    }
}

/// Grid search over `β ∈ {0, 0.1, …, 0.9}`; returns the first feasible set.
pub fn rci_beta_search(problem: &RciProblem, k: usize) -> Result<Option<RciSolution>, ViabilityError> {
    for step in 0..10 {
        let beta = step as f64 / 10.0;
        if let Some(sol) = rci(problem, k, beta, false)? {
            return Ok(Some(sol));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::containment_lp;
    use ndarray::array;

    fn z1(c: f64, g: f64) -> Zonotope {
        Zonotope::new(array![c], array![[g]]).unwrap()
    }

    fn scalar_problem(h: usize, w: Zonotope, x: Zonotope, u: Zonotope) -> FiniteProblem {
        FiniteProblem {
            a: vec![array![[1.0]]; h],
            b: vec![array![[1.0]]; h],
            disturbance: vec![w; h],
            state: vec![x; h + 1],
            input: vec![u; h],
            initial: None,
        }
    }

    #[test]
    fn scalar_integrator_without_disturbance() {
        let p = scalar_problem(2, Zonotope::point(array![0.0]), z1(0.0, 1.0), z1(0.0, 1.0));
        let sol = finite_viable(&p, 1, GrowthMode::Growing).unwrap().unwrap();
        assert_eq!(sol.t.len(), 3);
        for t in 0..2 {
            // T(t+1) = T(t) + M(t)
            let r = &sol.t[t + 1] - &(&sol.t[t] + &sol.m[t]);
            assert!(r.iter().all(|v| v.abs() < 1e-9));
        }
        // the objective drives the tube to a point
        assert!(sol.t.iter().all(|m| m.iter().all(|v| v.abs() < 1e-9)));
    }

    #[test]
    fn oversized_disturbance_is_unsatisfiable() {
        let p = scalar_problem(2, z1(0.0, 5.0), z1(0.0, 1.0), z1(0.0, 0.1));
        assert!(finite_viable(&p, 1, GrowthMode::Growing).unwrap().is_none());
        assert!(finite_viable(&p, 4, GrowthMode::FixedK).unwrap().is_none());
    }

    #[test]
    fn growing_tube_column_counts_and_recursion() {
        let h = 3;
        let p = FiniteProblem {
            a: vec![array![[1.0, 1.0], [0.0, 1.0]]; h],
            b: vec![array![[0.0], [1.0]]; h],
            disturbance: vec![Zonotope::new(array![0.1, 0.0], array![[0.1, 0.0], [0.0, 0.05]]).unwrap(); h],
            state: vec![Zonotope::new(array![0.0, 0.0], 3.0 * Array2::eye(2)).unwrap(); h + 1],
            input: vec![z1(0.0, 2.0); h],
            initial: Some(Zonotope::new(array![0.5, 0.0], array![[0.2], [0.1]]).unwrap()),
        };
        let sol = finite_viable(&p, 1, GrowthMode::Growing).unwrap().unwrap();
        for t in 0..=h {
            assert_eq!(sol.t[t].ncols(), 1 + 2 * t);
        }
        for t in 0..h {
            let stacked = p.a[t].dot(&sol.t[t]) + p.b[t].dot(&sol.m[t]);
            let next = &sol.t[t + 1];
            let l = sol.t[t].ncols();
            for i in 0..2 {
                for c in 0..l {
                    assert!((stacked[[i, c]] - next[[i, c]]).abs() < 1e-7);
                }
                for c in 0..2 {
                    assert!((p.disturbance[t].generators()[[i, c]] - next[[i, l + c]]).abs() < 1e-12);
                }
            }
            let center = p.a[t].dot(&sol.xbar[t]) + p.b[t].dot(&sol.ubar[t]) + p.disturbance[t].center();
            assert!((center - &sol.xbar[t + 1]).iter().all(|v| v.abs() < 1e-9));
            assert!(containment_lp(&sol.omega(t), &p.state[t]).unwrap().feasible);
            assert!(containment_lp(&sol.theta(t), &p.input[t]).unwrap().feasible);
        }
        assert_eq!(sol.omega(0), p.initial.clone().unwrap());
    }

    #[test]
    fn fixed_k_pairing_holds() {
        let h = 4;
        let p = FiniteProblem {
            a: vec![array![[1.0, 1.0], [0.0, 1.0]]; h],
            b: vec![array![[0.0], [1.0]]; h],
            disturbance: vec![Zonotope::new(array![0.0, 0.0], 0.1 * Array2::eye(2)).unwrap(); h],
            state: vec![Zonotope::new(array![0.0, 0.0], 2.0 * Array2::eye(2)).unwrap(); h + 1],
            input: vec![z1(0.0, 3.0); h],
            initial: None,
        };
        let sol = finite_viable(&p, 4, GrowthMode::FixedK).unwrap().unwrap();
        for t in 0..h {
            let prop = p.a[t].dot(&sol.t[t]) + p.b[t].dot(&sol.m[t]);
            let gd = p.disturbance[t].generators();
            // [prop, G^d] = [0_{2x2}, T(t+1)]
            let mut left = Array2::zeros((2, 6));
            left.slice_mut(ndarray::s![.., ..4]).assign(&prop);
            left.slice_mut(ndarray::s![.., 4..]).assign(gd);
            let mut right = Array2::zeros((2, 6));
            right.slice_mut(ndarray::s![.., 2..]).assign(&sol.t[t + 1]);
            assert!((left - right).iter().all(|v| v.abs() < 1e-7));
        }
    }

    #[test]
    fn controller_center_and_scalar_cases() {
        let sol = ViableSolution {
            xbar: vec![array![0.0], array![0.0]],
            t: vec![array![[1.0]], array![[0.0]]],
            ubar: vec![array![0.0]],
            m: vec![array![[-1.0]]],
            growth: GrowthMode::Growing,
            k: 1,
            solve_seconds: 0.0,
        };
        let u = sol.control(0, &array![0.7]).unwrap();
        assert!((u[0] + 0.7).abs() < 1e-12);
        assert!(sol.control(0, &array![0.0]).unwrap()[0].abs() < 1e-12);
        assert!(matches!(sol.control(0, &array![1.5]), Err(ViabilityError::OutOfSet { .. })));
        assert!(matches!(sol.control(1, &array![0.0]), Err(ViabilityError::TimeIndex { .. })));
    }

    #[test]
    fn rci_integrator_simplified() {
        let p = RciProblem {
            a: array![[1.0]],
            b: array![[1.0]],
            disturbance: z1(0.0, 0.1),
            state: z1(0.0, 1.0),
            input: z1(0.0, 1.0),
        };
        let sol = rci(&p, 1, 0.0, true).unwrap().unwrap();
        assert!((sol.t[[0, 0]].abs() - 0.1).abs() < 1e-9);
        assert!((sol.m[[0, 0]] + sol.t[[0, 0]]).abs() < 1e-9);
        assert!(sol.e.is_empty());
    }

    #[test]
    fn rci_contraction_needs_beta() {
        let p = RciProblem {
            a: array![[0.5]],
            b: Array2::zeros((1, 0)),
            disturbance: z1(0.0, 0.5),
            state: z1(0.0, 1.0),
            input: Zonotope::point(Array1::zeros(0)),
        };
        for k in 1..=4 {
            assert!(rci(&p, k, 0.0, true).unwrap().is_none(), "k = {k}");
        }
        let sol = rci(&p, 1, 0.5, false).unwrap().unwrap();
        let omega = sol.omega();
        assert!((omega.interval_radius()[0] - 1.0).abs() < 1e-9);
        assert!(rci(&p, 1, 0.4, false).unwrap().is_none());
        assert_eq!(rci_beta_search(&p, 1).unwrap().unwrap().beta, 0.5);
        assert!(matches!(rci(&p, 1, 1.0, false), Err(ViabilityError::InvalidBeta(_))));
    }

    #[test]
    fn beta_scaling_doubles_the_set() {
        let sol = RciSolution {
            xbar: array![0.0],
            t: array![[0.3]],
            ubar: array![0.0],
            m: array![[-0.3]],
            beta: 0.5,
            e: Array2::zeros((1, 1)),
            k: 1,
            solve_seconds: 0.0,
        };
        assert!((sol.omega().generators()[[0, 0]] - 0.6).abs() < 1e-15);
        assert!((sol.theta().generators()[[0, 0]] + 0.6).abs() < 1e-15);
        let u = sol.control(&array![0.6]).unwrap();
        assert!((u[0] + 0.6).abs() < 1e-12);
    }

    #[test]
    fn solutions_serialize() {
        let sol = Solution::Infinite(RciSolution {
            xbar: array![0.0, 1.0],
            t: array![[0.3, 0.0], [0.0, 0.1]],
            ubar: array![0.5],
            m: array![[-0.3, 0.2]],
            beta: 0.0,
            e: Array2::zeros((2, 0)),
            k: 2,
            solve_seconds: 0.0,
        });
        let text = serde_json::to_string(&sol).unwrap();
        assert!(text.contains(r#""kind":"infinite""#));
        let back: Solution = serde_json::from_str(&text).unwrap();
        assert_eq!(back, sol);
    }
}
