//! Linear program builder with named rows, backed by HiGHS.
//!
//! Every program is a minimization. Rows are `expr (<=|>=|=) rhs` and may carry a
//! name so that callers can look up the multiplier of a specific row after solving.
//!
//! Dual sign convention: for a `<=` row the reported dual is `-d(opt)/d(rhs)` and
//! for `>=` and `=` rows it is `d(opt)/d(rhs)`. Both inequality kinds therefore
//! have nonnegative duals at an optimum. [`LpSolution::sensitivity`] returns the
//! raw derivative `d(opt)/d(rhs)` for any row kind.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};
use std::time::Instant;

use highs::{HighsModelStatus, RowProblem, Sense as HighsSense};
use thiserror::Error;

/// Absolute feasibility tolerance used when re-checking solutions.
pub const FEAS_TOL: f64 = 1e-7;

/// Programs with fewer variables plus rows than this skip presolve, which costs
/// more than it saves at that size.
const PRESOLVE_MIN_SIZE: usize = 2000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("duplicate constraint name `{0}`")]
    DuplicateName(String),
    #[error("non-finite coefficient in `{0}`")]
    NonFinite(String),
    #[error("variable index {0} is not declared in this program")]
    UnknownVariable(usize),
    #[error("solver failure: {0}")]
    Solver(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RowId(usize);

impl RowId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

/// Affine expression `sum(coef * var) + constant`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinExpr {
    pub terms: Vec<(Var, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self { terms: Vec::new(), constant: c }
    }

    pub fn var(v: Var) -> Self {
        Self { terms: vec![(v, 1.0)], constant: 0.0 }
    }

    pub fn term(v: Var, coef: f64) -> Self {
        Self { terms: vec![(v, coef)], constant: 0.0 }
    }

    pub fn add_term(&mut self, v: Var, coef: f64) {
        if coef != 0.0 {
            self.terms.push((v, coef));
        }
    }

    /// `self += coef * other`
    pub fn add_scaled(&mut self, other: &LinExpr, coef: f64) {
        if coef == 0.0 {
            return;
        }
        self.terms.extend(other.terms.iter().map(|&(v, c)| (v, c * coef)));
        self.constant += coef * other.constant;
    }

    pub fn scaled(&self, coef: f64) -> LinExpr {
        let mut out = LinExpr::zero();
        out.add_scaled(self, coef);
        out
    }

    pub fn is_constant(&self) -> bool {
        self.terms.iter().all(|&(_, c)| c == 0.0)
    }

    /// Merges repeated variables and drops zero coefficients, keeping first-seen order.
    pub fn compact(&self) -> LinExpr {
        let mut order: Vec<Var> = Vec::with_capacity(self.terms.len());
        let mut acc: HashMap<Var, f64> = HashMap::with_capacity(self.terms.len());
        for &(v, c) in &self.terms {
            match acc.get_mut(&v) {
                Some(x) => *x += c,
                None => {
                    acc.insert(v, c);
                    order.push(v);
                }
            }
        }
        let terms = order
            .into_iter()
            .filter_map(|v| {
                let c = acc[&v];
                (c != 0.0).then_some((v, c))
            })
            .collect();
        LinExpr { terms, constant: self.constant }
    }

    pub fn eval(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, c)| c * values[v.0]).sum::<f64>() + self.constant
    }
}

impl From<Var> for LinExpr {
    fn from(v: Var) -> Self {
        LinExpr::var(v)
    }
}

impl From<f64> for LinExpr {
    fn from(c: f64) -> Self {
        LinExpr::constant(c)
    }
}

impl AddAssign<&LinExpr> for LinExpr {
    fn add_assign(&mut self, rhs: &LinExpr) {
        self.add_scaled(rhs, 1.0);
    }
}

impl Add<&LinExpr> for LinExpr {
    type Output = LinExpr;
    fn add(mut self, rhs: &LinExpr) -> LinExpr {
        self += rhs;
        self
    }
}

impl Sub<&LinExpr> for LinExpr {
    type Output = LinExpr;
    fn sub(mut self, rhs: &LinExpr) -> LinExpr {
        self.add_scaled(rhs, -1.0);
        self
    }
}

impl Mul<f64> for &LinExpr {
    type Output = LinExpr;
    fn mul(self, rhs: f64) -> LinExpr {
        self.scaled(rhs)
    }
}

impl Neg for LinExpr {
    type Output = LinExpr;
    fn neg(self) -> LinExpr {
        self.scaled(-1.0)
    }
}

#[derive(Debug, Clone)]
struct VarInfo {
    name: Option<String>,
    lower: f64,
    upper: f64,
    cost: f64,
}

#[derive(Debug, Clone)]
struct Row {
    name: Option<String>,
    terms: Vec<(Var, f64)>,
    sense: Sense,
    rhs: f64,
}

/// A minimization LP. Built once, solved any number of times.
#[derive(Debug, Clone, Default)]
pub struct LinearProgram {
    vars: Vec<VarInfo>,
    rows: Vec<Row>,
    names: HashMap<String, RowId>,
    objective_constant: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    TimeLimit,
}

#[derive(Debug, Clone, Default)]
pub struct SolveOptions {
    /// Wall-clock limit handed to the solver.
    pub time_limit: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub objective: f64,
    primal: Vec<f64>,
    /// Raw `d(opt)/d(rhs)` per row.
    row_sensitivity: Vec<f64>,
    /// Reduced costs per variable (`d(opt)/d(bound)` of the active bound).
    reduced_costs: Vec<f64>,
    senses: Vec<Sense>,
    /// Seconds spent inside the solver call only.
    pub solve_seconds: f64,
}

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn add_var(&mut self, lower: f64, upper: f64) -> Var {
        self.vars.push(VarInfo { name: None, lower, upper, cost: 0.0 });
        Var(self.vars.len() - 1)
    }

    pub fn add_free_var(&mut self) -> Var {
        self.add_var(f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn add_named_var(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> Var {
        let v = self.add_var(lower, upper);
        self.vars[v.0].name = Some(name.into());
        v
    }

    pub fn add_free_vars(&mut self, count: usize) -> Vec<Var> {
        (0..count).map(|_| self.add_free_var()).collect()
    }

    pub fn var_bounds(&self, v: Var) -> (f64, f64) {
        (self.vars[v.0].lower, self.vars[v.0].upper)
    }

    /// Adds `coef * expr` to the objective.
    pub fn add_objective(&mut self, expr: &LinExpr, coef: f64) {
        for &(v, c) in &expr.terms {
            self.vars[v.0].cost += coef * c;
        }
        self.objective_constant += coef * expr.constant;
    }

    pub fn objective_of(&self, values: &[f64]) -> f64 {
        self.vars.iter().zip(values).map(|(v, x)| v.cost * x).sum::<f64>() + self.objective_constant
    }

    /// Adds `expr sense rhs`; the constant part of `expr` moves to the right-hand side.
    pub fn add_constraint(&mut self, expr: &LinExpr, sense: Sense, rhs: f64) -> RowId {
        let e = expr.compact();
        self.rows.push(Row { name: None, terms: e.terms, sense, rhs: rhs - e.constant });
        RowId(self.rows.len() - 1)
    }

    pub fn add_named_constraint(
        &mut self,
        name: impl Into<String>,
        expr: &LinExpr,
        sense: Sense,
        rhs: f64,
    ) -> Result<RowId, LpError> {
        let name = name.into();
        if self.names.contains_key(&name) {
            return Err(LpError::DuplicateName(name));
        }
        let id = self.add_constraint(expr, sense, rhs);
        self.rows[id.0].name = Some(name.clone());
        self.names.insert(name, id);
        Ok(id)
    }

    /// `lhs == rhs` for two affine expressions.
    pub fn add_equal(&mut self, lhs: &LinExpr, rhs: &LinExpr) -> RowId {
        let diff = lhs.clone() - rhs;
        self.add_constraint(&diff, Sense::Eq, 0.0)
    }

    /// `lhs <= rhs` for two affine expressions.
    pub fn add_le(&mut self, lhs: &LinExpr, rhs: &LinExpr) -> RowId {
        let diff = lhs.clone() - rhs;
        self.add_constraint(&diff, Sense::Le, 0.0)
    }

    pub fn row_by_name(&self, name: &str) -> Option<RowId> {
        self.names.get(name).copied()
    }

    pub fn row_rhs(&self, row: RowId) -> f64 {
        self.rows[row.0].rhs
    }

    pub fn set_row_rhs(&mut self, row: RowId, rhs: f64) {
        self.rows[row.0].rhs = rhs;
    }

    fn validate(&self) -> Result<(), LpError> {
        for (i, v) in self.vars.iter().enumerate() {
            if !v.cost.is_finite() || v.lower.is_nan() || v.upper.is_nan() {
                return Err(LpError::NonFinite(format!("variable {i}")));
            }
        }
        for (i, r) in self.rows.iter().enumerate() {
            if !r.rhs.is_finite() || r.terms.iter().any(|(_, c)| !c.is_finite()) {
                let label = r.name.clone().unwrap_or_else(|| format!("row {i}"));
                return Err(LpError::NonFinite(label));
            }
            if let Some(&(v, _)) = r.terms.iter().find(|(v, _)| v.0 >= self.vars.len()) {
                return Err(LpError::UnknownVariable(v.0));
            }
        }
        Ok(())
    }

    pub fn solve(&self) -> Result<LpSolution, LpError> {
        self.solve_with(&SolveOptions::default())
    }

    pub fn solve_with(&self, opts: &SolveOptions) -> Result<LpSolution, LpError> {
        self.validate()?;
        let senses: Vec<Sense> = self.rows.iter().map(|r| r.sense).collect();

        if self.vars.is_empty() {
            // Only constant rows: feasibility is decided by the right-hand sides.
            let feasible = self.rows.iter().all(|r| match r.sense {
                Sense::Le => 0.0 <= r.rhs + FEAS_TOL,
                Sense::Ge => 0.0 >= r.rhs - FEAS_TOL,
                Sense::Eq => r.rhs.abs() <= FEAS_TOL,
            });
            return Ok(LpSolution {
                status: if feasible { LpStatus::Optimal } else { LpStatus::Infeasible },
                objective: self.objective_constant,
                primal: Vec::new(),
                row_sensitivity: vec![0.0; self.rows.len()],
                reduced_costs: Vec::new(),
                senses,
                solve_seconds: 0.0,
            });
        }

        let presolve = self.vars.len() + self.rows.len() >= PRESOLVE_MIN_SIZE;
        let (mut outcome, mut seconds) = self.run_highs(opts, presolve)?;
        if let RawOutcome::Ambiguous = outcome {
            // Presolve could not tell infeasible from unbounded; rerun without it.
            let (rerun, more) = self.run_highs(opts, false)?;
            outcome = rerun;
            seconds += more;
        }
        match outcome {
            RawOutcome::Optimal { primal, row_duals, col_duals } => Ok(LpSolution {
                status: LpStatus::Optimal,
                objective: self.objective_of(&primal),
                primal,
                row_sensitivity: row_duals,
                reduced_costs: col_duals,
                senses,
                solve_seconds: seconds,
            }),
            RawOutcome::Status(st) => Ok(LpSolution {
                status: st,
                objective: f64::NAN,
                primal: Vec::new(),
                row_sensitivity: Vec::new(),
                reduced_costs: Vec::new(),
                senses,
                solve_seconds: seconds,
            }),
            RawOutcome::Ambiguous => Err(LpError::Solver("infeasible or unbounded".into())),
        }
    }

    fn run_highs(&self, opts: &SolveOptions, presolve: bool) -> Result<(RawOutcome, f64), LpError> {
        let mut pb = RowProblem::default();
        let cols: Vec<highs::Col> = self
            .vars
            .iter()
            .map(|v| pb.add_column(v.cost, v.lower..=v.upper))
            .collect();
        for r in &self.rows {
            let factors = r.terms.iter().map(|&(v, c)| (cols[v.0], c));
            match r.sense {
                Sense::Le => pb.add_row(..=r.rhs, factors),
                Sense::Ge => pb.add_row(r.rhs.., factors),
                Sense::Eq => pb.add_row(r.rhs..=r.rhs, factors),
            }
        }
        let mut model = pb
            .try_optimise(HighsSense::Minimise)
            .map_err(|e| LpError::Solver(format!("{e:?}")))?;
        model.make_quiet();
        let set = |model: &mut highs::Model, k: &str, v: &str| {
            model
                .try_set_option(k, v)
                .map_err(|e| LpError::Solver(format!("option {k}: {e:?}")))
        };
        set(&mut model, "presolve", if presolve { "on" } else { "off" })?;
        set(&mut model, "solver", "simplex")?;
        model
            .try_set_option("threads", 1)
            .map_err(|e| LpError::Solver(format!("threads: {e:?}")))?;
        if let Some(limit) = opts.time_limit {
            model
                .try_set_option("time_limit", limit)
                .map_err(|e| LpError::Solver(format!("time_limit: {e:?}")))?;
        }
        let start = Instant::now();
        let solved = model
            .try_solve()
            .map_err(|e| LpError::Solver(format!("{e:?}")))?;
        let seconds = start.elapsed().as_secs_f64();
        let outcome = match solved.status() {
            HighsModelStatus::Optimal | HighsModelStatus::ModelEmpty => {
                let sol = solved.get_solution();
                RawOutcome::Optimal {
                    primal: sol.columns().to_vec(),
                    row_duals: sol.dual_rows().to_vec(),
                    col_duals: sol.dual_columns().to_vec(),
                }
            }
            HighsModelStatus::Infeasible => RawOutcome::Status(LpStatus::Infeasible),
            HighsModelStatus::Unbounded => RawOutcome::Status(LpStatus::Unbounded),
            HighsModelStatus::UnboundedOrInfeasible => {
                if presolve {
                    RawOutcome::Ambiguous
                } else {
                    RawOutcome::Status(LpStatus::Infeasible)
                }
            }
            HighsModelStatus::ReachedTimeLimit => RawOutcome::Status(LpStatus::TimeLimit),
            other => return Err(LpError::Solver(format!("solver ended with {other:?}"))),
        };
        Ok((outcome, seconds))
    }

    /// Writes the program in CPLEX LP text format.
    pub fn to_lp_format(&self) -> String {
        let vname = |v: Var| -> String {
            match &self.vars[v.0].name {
                Some(n) => sanitize(n),
                None => format!("x{}", v.0),
            }
        };
        let mut out = String::new();
        let _ = writeln!(out, "\\ generated by contract-synth");
        let _ = writeln!(out, "Minimize");
        let mut obj = String::from(" obj:");
        for (i, v) in self.vars.iter().enumerate() {
            if v.cost != 0.0 {
                let _ = write!(obj, " {:+} {}", v.cost, vname(Var(i)));
            }
        }
        if self.objective_constant != 0.0 {
            let _ = write!(obj, " {:+}", self.objective_constant);
        }
        let _ = writeln!(out, "{obj}");
        let _ = writeln!(out, "Subject To");
        for (i, r) in self.rows.iter().enumerate() {
            let name = r.name.as_deref().map(sanitize).unwrap_or_else(|| format!("r{i}"));
            let mut line = format!(" {name}:");
            if r.terms.is_empty() {
                let _ = write!(line, " 0 x0");
            }
            for &(v, c) in &r.terms {
                let _ = write!(line, " {:+} {}", c, vname(v));
            }
            let op = match r.sense {
                Sense::Le => "<=",
                Sense::Ge => ">=",
                Sense::Eq => "=",
            };
            let _ = writeln!(out, "{line} {op} {}", r.rhs);
        }
        let _ = writeln!(out, "Bounds");
        for (i, v) in self.vars.iter().enumerate() {
            let n = vname(Var(i));
            match (v.lower.is_finite(), v.upper.is_finite()) {
                (false, false) => {
                    let _ = writeln!(out, " {n} free");
                }
                (true, false) => {
                    let _ = writeln!(out, " {n} >= {}", v.lower);
                }
                (false, true) => {
                    let _ = writeln!(out, " -inf <= {n} <= {}", v.upper);
                }
                (true, true) => {
                    let _ = writeln!(out, " {} <= {n} <= {}", v.lower, v.upper);
                }
            }
        }
        let _ = writeln!(out, "End");
        out
    }

    /// Largest violation of rows and bounds at `values`.
    pub fn max_violation(&self, values: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for r in &self.rows {
            let lhs: f64 = r.terms.iter().map(|&(v, c)| c * values[v.0]).sum();
            let viol = match r.sense {
                Sense::Le => lhs - r.rhs,
                Sense::Ge => r.rhs - lhs,
                Sense::Eq => (lhs - r.rhs).abs(),
            };
            worst = worst.max(viol);
        }
        for (v, x) in self.vars.iter().zip(values) {
            worst = worst.max(v.lower - x).max(x - v.upper);
        }
        worst
    }

    /// KKT residual of a primal/dual pair: primal feasibility, dual sign
    /// feasibility, stationarity and complementary slackness, as a single max.
    pub fn kkt_residual(&self, sol: &LpSolution) -> f64 {
        if sol.status != LpStatus::Optimal {
            return f64::INFINITY;
        }
        let x = &sol.primal;
        let y = &sol.row_sensitivity;
        let mut worst = self.max_violation(x);
        // reduced cost: c - A^T y
        let mut reduced: Vec<f64> = self.vars.iter().map(|v| v.cost).collect();
        for (r, &yr) in self.rows.iter().zip(y) {
            for &(v, c) in &r.terms {
                reduced[v.0] -= c * yr;
            }
            let lhs: f64 = r.terms.iter().map(|&(v, c)| c * x[v.0]).sum();
            let slack = (lhs - r.rhs).abs();
            match r.sense {
                Sense::Le => {
                    worst = worst.max(yr); // must be <= 0 in raw form
                    worst = worst.max((yr * slack).abs());
                }
                Sense::Ge => {
                    worst = worst.max(-yr);
                    worst = worst.max((yr * slack).abs());
                }
                Sense::Eq => {}
            }
        }
        for ((v, &d), &xv) in self.vars.iter().zip(&reduced).zip(x) {
            let at_lower = v.lower.is_finite() && (xv - v.lower).abs() <= FEAS_TOL;
            let at_upper = v.upper.is_finite() && (v.upper - xv).abs() <= FEAS_TOL;
            let viol = if at_lower && at_upper {
                0.0
            } else if at_lower {
                (-d).max(0.0)
            } else if at_upper {
                d.max(0.0)
            } else {
                d.abs()
            };
            worst = worst.max(viol);
        }
        worst
    }

    /// Objective of the dual program evaluated at the solver's multipliers.
    pub fn dual_objective(&self, sol: &LpSolution) -> f64 {
        let mut total = self.objective_constant;
        for (r, &yr) in self.rows.iter().zip(&sol.row_sensitivity) {
            total += r.rhs * yr;
        }
        for ((v, &d), &xv) in self.vars.iter().zip(&sol.reduced_costs).zip(&sol.primal) {
            if d > 0.0 && v.lower.is_finite() {
                total += d * v.lower;
            } else if d < 0.0 && v.upper.is_finite() {
                total += d * v.upper;
            } else {
                total += d * xv;
            }
        }
        total
    }
}

enum RawOutcome {
    Optimal { primal: Vec<f64>, row_duals: Vec<f64>, col_duals: Vec<f64> },
    Status(LpStatus),
    Ambiguous,
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '.' { c } else { '_' })
        .collect()
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    pub fn value(&self, v: Var) -> f64 {
        self.primal[v.0]
    }

    pub fn eval(&self, e: &LinExpr) -> f64 {
        e.eval(&self.primal)
    }

    pub fn primal(&self) -> &[f64] {
        &self.primal
    }

    /// Dual multiplier under the crate convention (see module docs).
    pub fn dual(&self, row: RowId) -> f64 {
        let raw = self.row_sensitivity[row.0];
        match self.senses[row.0] {
            Sense::Le => -raw,
            Sense::Ge | Sense::Eq => raw,
        }
    }

    /// `d(opt)/d(rhs)` of the row.
    pub fn sensitivity(&self, row: RowId) -> f64 {
        self.row_sensitivity[row.0]
    }

    pub fn reduced_cost(&self, v: Var) -> f64 {
        self.reduced_costs[v.0]
    }

    pub fn dual_by_name(&self, lp: &LinearProgram, name: &str) -> Option<f64> {
        if !self.is_optimal() {
            return None;
        }
        lp.row_by_name(name).map(|r| self.dual(r))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bound_row_has_unit_dual() {
        let mut lp = LinearProgram::new();
        let x = lp.add_free_var();
        lp.add_objective(&LinExpr::var(x), 1.0);
        let r = lp.add_named_constraint("lb", &LinExpr::var(x), Sense::Ge, 3.0).unwrap();
        let sol = lp.solve().unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.value(x) - 3.0).abs() < 1e-12);
        assert!((sol.dual(r) - 1.0).abs() < 1e-12);
        assert!((sol.dual_by_name(&lp, "lb").unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn variable_bound_reduced_cost() {
        let mut lp = LinearProgram::new();
        let x = lp.add_var(3.0, f64::INFINITY);
        lp.add_objective(&LinExpr::var(x), 1.0);
        let sol = lp.solve().unwrap();
        assert!((sol.value(x) - 3.0).abs() < 1e-12);
        assert!((sol.reduced_cost(x) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn contradictory_equalities_are_infeasible() {
        let mut lp = LinearProgram::new();
        let x = lp.add_free_var();
        lp.add_constraint(&LinExpr::var(x), Sense::Eq, 1.0);
        lp.add_constraint(&LinExpr::var(x), Sense::Eq, 2.0);
        assert_eq!(lp.solve().unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn unbounded_is_a_status() {
        let mut lp = LinearProgram::new();
        let x = lp.add_free_var();
        lp.add_objective(&LinExpr::var(x), 1.0);
        lp.add_constraint(&LinExpr::var(x), Sense::Le, 1.0);
        assert_eq!(lp.solve().unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn le_rows_have_nonnegative_duals() {
        // min -x - y  s.t. x + 2y <= 4, 3x + y <= 6
        let mut lp = LinearProgram::new();
        let x = lp.add_var(0.0, f64::INFINITY);
        let y = lp.add_var(0.0, f64::INFINITY);
        let obj = LinExpr::var(x) + &LinExpr::var(y);
        lp.add_objective(&obj, -1.0);
        let mut e1 = LinExpr::var(x);
        e1.add_term(y, 2.0);
        let mut e2 = LinExpr::term(x, 3.0);
        e2.add_term(y, 1.0);
        let r1 = lp.add_constraint(&e1, Sense::Le, 4.0);
        let r2 = lp.add_constraint(&e2, Sense::Le, 6.0);
        let sol = lp.solve().unwrap();
        assert!(sol.dual(r1) >= 0.0 && sol.dual(r2) >= 0.0);
        assert!((sol.dual(r1) + sol.sensitivity(r1)).abs() < 1e-12);
        assert!(lp.kkt_residual(&sol) < 1e-9);
        assert!((lp.dual_objective(&sol) - sol.objective).abs() < 1e-9);
    }

    #[test]
    fn duplicate_names_rejected() {
        let mut lp = LinearProgram::new();
        let x = lp.add_free_var();
        lp.add_named_constraint("a", &LinExpr::var(x), Sense::Le, 1.0).unwrap();
        assert!(matches!(
            lp.add_named_constraint("a", &LinExpr::var(x), Sense::Le, 1.0),
            Err(LpError::DuplicateName(_))
        ));
    }

    #[test]
    fn constant_only_program() {
        let mut lp = LinearProgram::new();
        lp.add_constraint(&LinExpr::constant(1.0), Sense::Le, 2.0);
        assert_eq!(lp.solve().unwrap().status, LpStatus::Optimal);
        lp.add_constraint(&LinExpr::constant(1.0), Sense::Eq, 2.0);
        assert_eq!(lp.solve().unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn lp_text_dump_mentions_rows() {
        let mut lp = LinearProgram::new();
        let x = lp.add_named_var("alpha[0]", 0.0, 1.0);
        lp.add_objective(&LinExpr::var(x), 2.0);
        lp.add_named_constraint("pin", &LinExpr::var(x), Sense::Eq, 0.5).unwrap();
        let text = lp.to_lp_format();
        assert!(text.contains("pin: +1 alpha_0_ = 0.5"));
        assert!(text.contains("0 <= alpha_0_ <= 1"));
    }
}
