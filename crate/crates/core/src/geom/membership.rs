//! Point membership `x ∈ Z(c, G)`, i.e. feasibility of `G z = x - c`, `|z|_inf <= 1`.
//!
//! The fast route is a dense bounded-variable phase-one simplex (Bland's rule,
//! so it terminates on degenerate instances). It is cheap enough to run inside
//! Monte Carlo loops. `contains_point_lp` answers the same question through the
//! general LP solver and serves as an independent check.

use ndarray::{Array1, Array2};

use super::{check_dim, GeomError, Zonotope};
use crate::lpcore::{LinExpr, LinearProgram, LpStatus};

/// Default absolute residual tolerance, relative to `1 + |x - c|_inf`.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Membership {
    pub inside: bool,
    /// Best coordinate vector found, always inside the unit cube.
    pub witness: Array1<f64>,
    /// `|G z - (x - c)|_inf` at the witness.
    pub residual: f64,
}

pub fn contains_point(z: &Zonotope, x: &Array1<f64>) -> Result<Membership, GeomError> {
    contains_point_with_tol(z, x, MEMBERSHIP_TOL)
}

pub fn contains_point_with_tol(z: &Zonotope, x: &Array1<f64>, tol: f64) -> Result<Membership, GeomError> {
    check_dim("membership point", z.dim(), x.len())?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(GeomError::NonFinite("membership point"));
    }
    let r = x - z.center();
    let scale = 1.0 + r.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let mut loc = PointLocator::new(z.generators());
    let (w, residual) = loc.locate(r.as_slice().expect("contiguous"));
    Ok(Membership { inside: residual <= tol * scale, witness: Array1::from(w.to_vec()), residual })
}

/// Same test through the general LP solver; minimizes the total residual.
pub fn contains_point_lp(z: &Zonotope, x: &Array1<f64>) -> Result<Membership, GeomError> {
    check_dim("membership point", z.dim(), x.len())?;
    let n = z.dim();
    let p = z.num_generators();
    let mut lp = LinearProgram::new();
    let zeta: Vec<_> = (0..p).map(|_| lp.add_var(-1.0, 1.0)).collect();
    let mut slack_sum = LinExpr::zero();
    for i in 0..n {
        let (sp, sm) = (lp.add_var(0.0, f64::INFINITY), lp.add_var(0.0, f64::INFINITY));
        slack_sum.add_term(sp, 1.0);
        slack_sum.add_term(sm, 1.0);
        let mut lhs = LinExpr::zero();
        for (j, &v) in zeta.iter().enumerate() {
            lhs.add_term(v, z.generators()[[i, j]]);
        }
        lhs.add_term(sp, 1.0);
        lhs.add_term(sm, -1.0);
        lp.add_equal(&lhs, &LinExpr::constant(x[i] - z.center()[i]));
    }
    lp.add_objective(&slack_sum, 1.0);
    let sol = lp.solve()?;
    if sol.status != LpStatus::Optimal {
        return Err(GeomError::Lp(crate::lpcore::LpError::Solver(format!("membership LP ended with {:?}", sol.status))));
    }
    let witness = Array1::from_iter(zeta.iter().map(|&v| sol.value(v).clamp(-1.0, 1.0)));
    let r = x - z.center();
    let residual = (z.generators().dot(&witness) - &r).iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let scale = 1.0 + r.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    Ok(Membership { inside: residual <= 1e-7 * scale, witness, residual })
}

const PIVOT_TOL: f64 = 1e-11;
const COST_TOL: f64 = 1e-12;

/// Reusable solver for repeated membership queries against one generator matrix.
///
/// Minimizes `|G z - r|_1` over the unit cube with a dense bounded-variable
/// phase-one simplex. Columns are the `p` cube coordinates followed by `n`
/// artificials, one per row, signed so that they start non-negative with every
/// `z` at `-1`. All buffers are allocated once.
#[derive(Debug, Clone)]
pub struct PointLocator {
    n: usize,
    p: usize,
    /// Row-major `n × p`.
    g: Vec<f64>,
    tab: Vec<f64>,
    value: Vec<f64>,
    at_upper: Vec<bool>,
    is_basic: Vec<bool>,
    basis: Vec<usize>,
    row_buf: Vec<f64>,
    witness: Vec<f64>,
}

impl PointLocator {
    pub fn new(g: &Array2<f64>) -> Self {
        let (n, p) = g.dim();
        let cols = n + p;
        Self {
            n,
            p,
            g: g.iter().copied().collect(),
            tab: vec![0.0; n * cols],
            value: vec![0.0; cols],
            at_upper: vec![false; cols],
            is_basic: vec![false; cols],
            basis: vec![0; n],
            row_buf: vec![0.0; cols],
            witness: vec![0.0; p],
        }
    }

    pub fn num_generators(&self) -> usize {
        self.p
    }

    /// Finds `z` in the unit cube minimizing `|G z - r|_1`; returns the witness
    /// and the residual `|G z - r|_inf`.
    pub fn locate(&mut self, r: &[f64]) -> (&[f64], f64) {
        let (n, p) = (self.n, self.p);
        debug_assert_eq!(r.len(), n);
        if p == 0 || n == 0 {
            let res = r.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            return (&self.witness, res);
        }
        let cols = p + n;
        let upper = |j: usize| if j >= p { f64::INFINITY } else { 1.0 };
        let lower = |j: usize| if j >= p { 0.0 } else { -1.0 };
        let cost = |j: usize| if j >= p { 1.0 } else { 0.0 };

        self.value[..p].fill(-1.0);
        self.at_upper.fill(false);
        self.is_basic.fill(false);
        self.tab.fill(0.0);
        for i in 0..n {
            let grow = &self.g[i * p..(i + 1) * p];
            let start = r[i] + grow.iter().sum::<f64>();
            let sign = if start < 0.0 { -1.0 } else { 1.0 };
            let trow = &mut self.tab[i * cols..(i + 1) * cols];
            for j in 0..p {
                trow[j] = sign * grow[j];
            }
            trow[p + i] = 1.0;
            self.value[p + i] = start.abs();
            self.basis[i] = p + i;
            self.is_basic[p + i] = true;
        }

        let max_iter = 50 * (cols + n) + 1000;
        for _ in 0..max_iter {
            let infeas: f64 = self.basis.iter().filter(|&&b| b >= p).map(|&b| self.value[b]).sum();
            if infeas <= 1e-14 {
                break;
            }
            // Bland: first nonbasic column with an improving reduced cost.
            let mut entering = None;
            for j in 0..cols {
                if self.is_basic[j] {
                    continue;
                }
                let mut d = cost(j);
                for i in 0..n {
                    if self.basis[i] >= p {
                        d -= self.tab[i * cols + j];
                    }
                }
                let dir = if self.at_upper[j] { -1.0 } else { 1.0 };
                if d * dir < -COST_TOL {
                    entering = Some((j, dir));
                    break;
                }
            }
            let Some((q, dir)) = entering else { break };

            // Entering moves by dir * theta; basic i moves by -dir * theta * tab[i, q].
            let mut theta = upper(q) - lower(q);
            let mut leave: Option<(usize, bool)> = None;
            for i in 0..n {
                let rate = -dir * self.tab[i * cols + q];
                if rate.abs() <= PIVOT_TOL {
                    continue;
                }
                let b = self.basis[i];
                let (limit, to_upper) = if rate > 0.0 {
                    ((upper(b) - self.value[b]) / rate, true)
                } else {
                    ((lower(b) - self.value[b]) / rate, false)
                };
                let limit = limit.max(0.0);
                let better = match leave {
                    None => limit < theta,
                    Some((li, _)) => limit < theta || (limit == theta && self.basis[i] < self.basis[li]),
                };
                if better {
                    theta = limit;
                    leave = Some((i, to_upper));
                }
            }
            if !theta.is_finite() {
                break;
            }
            self.value[q] += dir * theta;
            for i in 0..n {
                let b = self.basis[i];
                self.value[b] -= dir * theta * self.tab[i * cols + q];
            }
            match leave {
                None => {
                    self.at_upper[q] = !self.at_upper[q];
                    self.value[q] = if self.at_upper[q] { upper(q) } else { lower(q) };
                }
                Some((row, to_upper)) => {
                    let out = self.basis[row];
                    self.value[out] = if to_upper { upper(out) } else { lower(out) };
                    self.at_upper[out] = to_upper;
                    self.is_basic[out] = false;
                    self.is_basic[q] = true;
                    self.basis[row] = q;
                    let piv = self.tab[row * cols + q];
                    for j in 0..cols {
                        self.row_buf[j] = self.tab[row * cols + j] / piv;
                    }
                    self.tab[row * cols..(row + 1) * cols].copy_from_slice(&self.row_buf);
                    for i in 0..n {
                        if i == row {
                            continue;
                        }
                        let f = self.tab[i * cols + q];
                        if f != 0.0 {
                            let trow = &mut self.tab[i * cols..(i + 1) * cols];
                            for (t, pv) in trow.iter_mut().zip(&self.row_buf) {
                                *t -= f * pv;
                            }
                        }
                    }
                }
            }
        }
        for j in 0..p {
            self.witness[j] = self.value[j].clamp(-1.0, 1.0);
        }
        let mut res = 0.0_f64;
        for i in 0..n {
            let grow = &self.g[i * p..(i + 1) * p];
            let gz: f64 = grow.iter().zip(&self.witness).map(|(a, b)| a * b).sum();
            res = res.max((gz - r[i]).abs());
        }
        (&self.witness, res)
    }
}
