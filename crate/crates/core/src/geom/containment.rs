//! Linear encodings of zonotope containment.
//!
//! `Z(c1, G1) ⊆ Z(c2, G2)` holds whenever there are `Γ`, `γ` with
//! `G1 = G2 Γ`, `c2 - c1 = G2 γ` and every row of `[Γ, γ]` having absolute sum
//! at most one. Row bounds may be affine expressions (a scaling parameter, a
//! slack), which is how the weighted variant and the Hausdorff encoding are
//! expressed. Absolute values use split variables `Γ = Γ⁺ - Γ⁻`.

use ndarray::{Array1, Array2};

use super::{check_dim, GeomError, Zonotope};
use crate::lpcore::{LinExpr, LinearProgram, LpStatus, RowId, Var};

/// Absolute tolerance on containment certificates.
pub const CONTAINMENT_TOL: f64 = 1e-7;

/// A zonotope whose center and generator entries are affine in LP variables.
#[derive(Debug, Clone)]
pub struct SymZonotope {
    pub center: Vec<LinExpr>,
    /// Column-major: `generators[j][i]` is entry `(i, j)`.
    pub generators: Vec<Vec<LinExpr>>,
}

impl SymZonotope {
    pub fn from_constant(z: &Zonotope) -> Self {
        let center = z.center().iter().map(|&v| LinExpr::constant(v)).collect();
        let generators = z
            .generators()
            .columns()
            .into_iter()
            .map(|col| col.iter().map(|&v| LinExpr::constant(v)).collect())
            .collect();
        Self { center, generators }
    }

    /// Center and `cols` generator columns backed by fresh free variables.
    pub fn variables(lp: &mut LinearProgram, dim: usize, cols: usize) -> (Self, Vec<Var>, Vec<Vec<Var>>) {
        let c = lp.add_free_vars(dim);
        let g: Vec<Vec<Var>> = (0..cols).map(|_| lp.add_free_vars(dim)).collect();
        let sym = Self {
            center: c.iter().map(|&v| LinExpr::var(v)).collect(),
            generators: g.iter().map(|col| col.iter().map(|&v| LinExpr::var(v)).collect()).collect(),
        };
        (sym, c, g)
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn num_generators(&self) -> usize {
        self.generators.len()
    }

    /// Scales every generator entry by `factor`, center untouched.
    pub fn scale_generators(&self, factor: f64) -> Self {
        Self {
            center: self.center.clone(),
            generators: self
                .generators
                .iter()
                .map(|col| col.iter().map(|e| e.scaled(factor)).collect())
                .collect(),
        }
    }

    /// Numeric zonotope at a primal point.
    pub fn evaluate(&self, values: &[f64]) -> Zonotope {
        let n = self.dim();
        let c = Array1::from_shape_fn(n, |i| self.center[i].eval(values));
        let g = Array2::from_shape_fn((n, self.num_generators()), |(i, j)| self.generators[j][i].eval(values));
        Zonotope::new(c, g).expect("finite primal values")
    }
}

/// Handles into the rows and variables created by one containment encoding.
#[derive(Debug, Clone)]
pub struct ContainmentRows {
    /// `Γ` entries as expressions (`s × r`, row-major over outer generators).
    pub gamma: Vec<Vec<LinExpr>>,
    /// `γ` entries (length `s`).
    pub gamma_center: Vec<LinExpr>,
    /// One `<=` row per outer generator: `row_sum(|[Γ, γ]|) - bound <= 0`.
    pub norm_rows: Vec<RowId>,
    /// One `<=` row per coordinate for the slack ball, when requested.
    pub slack_rows: Vec<RowId>,
}

/// Adds rows certifying `inner ⊆ Z(outer_center, outer_generators) ⊕ Z(0, slack · I)`
/// where the row sums of `[Γ, γ]` are bounded by `row_bounds` (one per outer
/// generator). The bounds and the slack only ever appear on the right of `<=` rows.
pub fn encode_containment(
    lp: &mut LinearProgram,
    inner: &SymZonotope,
    outer_center: &[LinExpr],
    outer_generators: &Array2<f64>,
    row_bounds: &[LinExpr],
    slack: Option<&LinExpr>,
) -> Result<ContainmentRows, GeomError> {
    let n = inner.dim();
    check_dim("outer center", n, outer_center.len())?;
    check_dim("outer generators", n, outer_generators.nrows())?;
    let s = outer_generators.ncols();
    check_dim("containment row bounds", s, row_bounds.len())?;
    for col in &inner.generators {
        check_dim("inner generator", n, col.len())?;
    }

    // Columns of the inner generator matrix that are identically zero need Γ = 0.
    let active: Vec<usize> = (0..inner.num_generators())
        .filter(|&j| inner.generators[j].iter().any(|e| !(e.is_constant() && e.constant == 0.0)))
        .collect();

    let split = |lp: &mut LinearProgram| -> (Var, Var) { (lp.add_var(0.0, f64::INFINITY), lp.add_var(0.0, f64::INFINITY)) };

    // gamma_split[k][c]: c indexes active columns, last entry is the center column.
    let cols = active.len() + 1;
    let gamma_split: Vec<Vec<(Var, Var)>> = (0..s).map(|_| (0..cols).map(|_| split(lp)).collect()).collect();
    let slack_split: Option<Vec<Vec<(Var, Var)>>> =
        slack.map(|_| (0..n).map(|_| (0..cols).map(|_| split(lp)).collect()).collect());

    let diff = |(p, m): (Var, Var)| -> LinExpr {
        let mut e = LinExpr::var(p);
        e.add_term(m, -1.0);
        e
    };

    for i in 0..n {
        for (c, j) in active.iter().map(Some).chain(std::iter::once(None)).enumerate() {
            // lhs: inner generator entry, or outer_center - inner_center for the center column.
            let lhs = match j {
                Some(&j) => inner.generators[j][i].clone(),
                None => outer_center[i].clone() - &inner.center[i],
            };
            let mut rhs = LinExpr::zero();
            for (k, gk) in gamma_split.iter().enumerate() {
                let coef = outer_generators[[i, k]];
                if coef != 0.0 {
                    rhs.add_scaled(&diff(gk[c]), coef);
                }
            }
            if let Some(ss) = &slack_split {
                rhs += &diff(ss[i][c]);
            }
            lp.add_equal(&lhs, &rhs);
        }
    }

    let mut norm_rows = Vec::with_capacity(s);
    for (k, gk) in gamma_split.iter().enumerate() {
        let mut sum = LinExpr::zero();
        for &(p, m) in gk {
            sum.add_term(p, 1.0);
            sum.add_term(m, 1.0);
        }
        norm_rows.push(lp.add_le(&sum, &row_bounds[k]));
    }
    let mut slack_rows = Vec::new();
    if let (Some(ss), Some(d)) = (&slack_split, slack) {
        for row in ss {
            let mut sum = LinExpr::zero();
            for &(p, m) in row {
                sum.add_term(p, 1.0);
                sum.add_term(m, 1.0);
            }
            slack_rows.push(lp.add_le(&sum, d));
        }
    }

    let r = inner.num_generators();
    let mut gamma = vec![vec![LinExpr::zero(); r]; s];
    let mut gamma_center = Vec::with_capacity(s);
    for (k, gk) in gamma_split.iter().enumerate() {
        for (c, &j) in active.iter().enumerate() {
            gamma[k][j] = diff(gk[c]);
        }
        gamma_center.push(diff(gk[cols - 1]));
    }
    Ok(ContainmentRows { gamma, gamma_center, norm_rows, slack_rows })
}

/// Weighted containment `Z(c1, G1) ⊆ Z(c2, C2 Diag(α))` with `α` symbolic: the
/// scaling parameters only bound the row sums of `[Γ, γ]`.
pub fn weighted_containment_rows(
    lp: &mut LinearProgram,
    inner: &Zonotope,
    outer_center: &Array1<f64>,
    template: &Array2<f64>,
    alpha: &[LinExpr],
) -> Result<ContainmentRows, GeomError> {
    check_dim("weighted containment", inner.dim(), outer_center.len())?;
    let c: Vec<LinExpr> = outer_center.iter().map(|&v| LinExpr::constant(v)).collect();
    encode_containment(lp, &SymZonotope::from_constant(inner), &c, template, alpha, None)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContainmentCertificate {
    /// `Γ`, `s × r`.
    pub gamma_matrix: Array2<f64>,
    /// `γ`, length `s`.
    pub gamma_vector: Array1<f64>,
    pub feasible: bool,
    /// Smallest achievable max row sum of `|[Γ, γ]|`; containment is certified when `<= 1`.
    pub scale: f64,
}

/// Sufficient containment test `inner ⊆ outer`.
///
/// Minimizes the largest row sum of `[Γ, γ]`; the certificate is feasible when
/// that optimum is at most `1 + CONTAINMENT_TOL`. An infeasible equality system
/// (outer too thin in some direction) also reports `feasible = false`.
pub fn containment_lp(inner: &Zonotope, outer: &Zonotope) -> Result<ContainmentCertificate, GeomError> {
    check_dim("containment", outer.dim(), inner.dim())?;
    let mut lp = LinearProgram::new();
    let rho = lp.add_var(0.0, f64::INFINITY);
    lp.add_objective(&LinExpr::var(rho), 1.0);
    let s = outer.num_generators();
    let bounds = vec![LinExpr::var(rho); s];
    let oc: Vec<LinExpr> = outer.center().iter().map(|&v| LinExpr::constant(v)).collect();
    let rows = encode_containment(&mut lp, &SymZonotope::from_constant(inner), &oc, outer.generators(), &bounds, None)?;
    let sol = lp.solve()?;
    let r = inner.num_generators();
    match sol.status {
        LpStatus::Optimal => {
            let gm = Array2::from_shape_fn((s, r), |(k, j)| sol.eval(&rows.gamma[k][j]));
            let gv = Array1::from_shape_fn(s, |k| sol.eval(&rows.gamma_center[k]));
            let scale = sol.value(rho);
            Ok(ContainmentCertificate {
                gamma_matrix: gm,
                gamma_vector: gv,
                feasible: scale <= 1.0 + CONTAINMENT_TOL,
                scale,
            })
        }
        LpStatus::Infeasible => Ok(ContainmentCertificate {
            gamma_matrix: Array2::zeros((s, r)),
            gamma_vector: Array1::zeros(s),
            feasible: false,
            scale: f64::INFINITY,
        }),
        other => Err(GeomError::Lp(crate::lpcore::LpError::Solver(format!("containment LP ended with {other:?}")))),
    }
}

/// Directed Hausdorff distance (infinity norm) from `inner` to `outer` under the
/// containment encoding: the least `d` with `inner ⊆ outer ⊕ Z(0, d I)`.
pub fn directed_hausdorff(outer: &Zonotope, inner: &Zonotope) -> Result<f64, GeomError> {
    check_dim("hausdorff", outer.dim(), inner.dim())?;
    let mut lp = LinearProgram::new();
    let d = lp.add_var(0.0, f64::INFINITY);
    lp.add_objective(&LinExpr::var(d), 1.0);
    let bounds = vec![LinExpr::constant(1.0); outer.num_generators()];
    let oc: Vec<LinExpr> = outer.center().iter().map(|&v| LinExpr::constant(v)).collect();
    encode_containment(
        &mut lp,
        &SymZonotope::from_constant(inner),
        &oc,
        outer.generators(),
        &bounds,
        Some(&LinExpr::var(d)),
    )?;
    let sol = lp.solve()?;
    match sol.status {
        LpStatus::Optimal => Ok(sol.value(d).max(0.0)),
        other => Err(GeomError::Lp(crate::lpcore::LpError::Solver(format!("hausdorff LP ended with {other:?}")))),
    }
}
