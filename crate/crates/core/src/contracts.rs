//! Parametric assume-guarantee contracts.
//!
//! Subsystem `i` guarantees `x_i(t) ∈ Z(c̄, C Diag(α^x_i(t)))` and
//! `u_i(t) ∈ Z(c̄, C Diag(α^u_i(t)))`. In return it may assume its coupling
//! disturbance lies in the Minkowski sum of its neighbors' guarantees mapped
//! through `A_ij`, `B_ij`, plus its own `D_i`. Every generator of that sum is a
//! constant column scaled by one `α` entry, so the viability program stays
//! linear when `α` is a variable.
//!
//! The potential `V_i(α)` is the optimal total Hausdorff slack by which the
//! subsystem's viable tube overflows its own guarantees. `α` enters the program
//! only through pinning equalities `α = α̂`, whose duals are `∂V_i / ∂α̂`.

use std::collections::BTreeMap;
use std::fmt;
use std::time::Instant;

use ndarray::{Array1, Array2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{
    boxing_keep_set, containment_lp, directed_hausdorff, encode_containment, scale_generators, GeomError, Zonotope,
};
use crate::lpcore::{LinExpr, LinearProgram, LpError, LpStatus, Sense};
use crate::sysmodel::{Mode, Network};
use crate::viability::{
    add_hard_containment, build_finite_tube, build_rci_tube, GrowthMode, Solution, SymDisturbance, Tube,
    ViabilityError,
};

#[derive(Debug, Error)]
pub enum ContractError {
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Viability(#[from] ViabilityError),
    #[error("subsystem {subsystem}: {what}")]
    Dimension { subsystem: String, what: String },
    #[error("template for subsystem {subsystem}, t = {t}, channel {channel} cannot be placed inside its bound")]
    TemplateNotContainable { subsystem: String, t: usize, channel: Channel },
    #[error("viability program of subsystem {subsystem} is infeasible")]
    Infeasible { subsystem: String },
    #[error("solver stopped early on subsystem {subsystem}: {status:?}")]
    Incomplete { subsystem: String, status: LpStatus },
    #[error("parameter file: {0}")]
    Params(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Channel {
    #[serde(rename = "x")]
    State,
    #[serde(rename = "u")]
    Input,
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Channel::State => "x",
            Channel::Input => "u",
        })
    }
}

/// Guarantee templates `Z(c̄, C)` for every subsystem and guarantee step.
#[derive(Debug, Clone, PartialEq)]
pub struct ContractTemplate {
    /// `state[i][t]`, `t < network.steps()`.
    pub state: Vec<Vec<Zonotope>>,
    pub input: Vec<Vec<Zonotope>>,
}

impl ContractTemplate {
    pub fn get(&self, i: usize, t: usize, channel: Channel) -> &Zonotope {
        match channel {
            Channel::State => &self.state[i][t],
            Channel::Input => &self.input[i][t],
        }
    }

    /// Uses per-subsystem templates from the network file, falling back to the bounds.
    pub fn from_network(network: &Network) -> Result<Self, ContractError> {
        let steps = network.steps();
        let mut state = Vec::with_capacity(network.len());
        let mut input = Vec::with_capacity(network.len());
        for s in &network.subsystems {
            let pick = |custom: &Option<Vec<Zonotope>>, fallback: &dyn Fn(usize) -> Zonotope| -> Vec<Zonotope> {
                (0..steps)
                    .map(|t| match custom {
                        Some(v) if !v.is_empty() => v[t.min(v.len() - 1)].clone(),
                        _ => fallback(t),
                    })
                    .collect()
            };
            let xs = pick(&s.template_x, &|t| s.x_at(t).clone());
            let us = pick(&s.template_u, &|t| s.u_at(t).clone());
            for (t, z) in xs.iter().enumerate() {
                if z.dim() != s.state_dim() {
                    return Err(ContractError::Dimension {
                        subsystem: s.id.clone(),
                        what: format!("state template at t = {t} has dimension {}", z.dim()),
                    });
                }
            }
            for (t, z) in us.iter().enumerate() {
                if z.dim() != s.input_dim() {
                    return Err(ContractError::Dimension {
                        subsystem: s.id.clone(),
                        what: format!("input template at t = {t} has dimension {}", z.dim()),
                    });
                }
            }
            state.push(xs);
            input.push(us);
        }
        Ok(Self { state, input })
    }

    /// True when every template coincides with its hard bound.
    pub fn is_default_for(&self, network: &Network) -> bool {
        network.subsystems.iter().enumerate().all(|(i, s)| {
            (0..network.steps()).all(|t| &self.state[i][t] == s.x_at(t) && &self.input[i][t] == s.u_at(t))
        })
    }
}

/// Templates equal to the hard bounds `X_i(t)`, `U_i(t)`.
pub fn default_template(network: &Network) -> ContractTemplate {
    let steps = network.steps();
    ContractTemplate {
        state: network.subsystems.iter().map(|s| (0..steps).map(|t| s.x_at(t).clone()).collect()).collect(),
        input: network.subsystems.iter().map(|s| (0..steps).map(|t| s.u_at(t).clone()).collect()).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamBlock {
    pub subsystem: usize,
    pub t: usize,
    pub channel: Channel,
    pub offset: usize,
    pub len: usize,
    /// Some other subsystem couples through this block. Inactive blocks stay at `α^max`.
    pub active: bool,
}

impl ParamBlock {
    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len
    }
}

/// All contract parameters flattened into one vector, blocks ordered by
/// (subsystem, t, channel).
#[derive(Debug, Clone, PartialEq)]
pub struct ContractParams {
    pub ids: Vec<String>,
    pub steps: usize,
    pub blocks: Vec<ParamBlock>,
    pub alpha: Vec<f64>,
    pub alpha_max: Vec<f64>,
}

impl ContractParams {
    /// Layout with `α = 0` and `α^max = 1`; see [`alpha_max`] for real bounds.
    pub fn layout(network: &Network, template: &ContractTemplate) -> Self {
        let steps = network.steps();
        let mut blocks = Vec::new();
        let mut offset = 0;
        for (i, _) in network.subsystems.iter().enumerate() {
            for t in 0..steps {
                for channel in [Channel::State, Channel::Input] {
                    let len = template.get(i, t, channel).num_generators();
                    let active = network.subsystems.iter().any(|s| {
                        s.coupling_from(i).is_some_and(|c| {
                            let m = match channel {
                                Channel::State => &c.a[t.min(c.a.len() - 1)],
                                Channel::Input => &c.b[t.min(c.b.len() - 1)],
                            };
                            m.iter().any(|v| *v != 0.0)
                        })
                    });
                    blocks.push(ParamBlock { subsystem: i, t, channel, offset, len, active });
                    offset += len;
                }
            }
        }
        Self {
            ids: network.subsystems.iter().map(|s| s.id.clone()).collect(),
            steps,
            blocks,
            alpha: vec![0.0; offset],
            alpha_max: vec![1.0; offset],
        }
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }

    pub fn block(&self, i: usize, t: usize, channel: Channel) -> &ParamBlock {
        let c = match channel {
            Channel::State => 0,
            Channel::Input => 1,
        };
        &self.blocks[(i * self.steps + t) * 2 + c]
    }

    pub fn slice(&self, i: usize, t: usize, channel: Channel) -> &[f64] {
        &self.alpha[self.block(i, t, channel).range()]
    }

    /// Per-entry activity flags.
    pub fn active_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.len()];
        for b in &self.blocks {
            for r in b.range() {
                mask[r] = b.active;
            }
        }
        mask
    }

    pub fn num_active(&self) -> usize {
        self.active_mask().iter().filter(|a| **a).count()
    }

    /// Lower projection bound: 0 for active entries, `α^max` for fixed ones.
    pub fn lower_bounds(&self) -> Vec<f64> {
        self.active_mask().iter().zip(&self.alpha_max).map(|(&a, &m)| if a { 0.0 } else { m }).collect()
    }

    /// `α = factor · α^max` on active entries, `α^max` elsewhere.
    pub fn with_fraction(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for (r, a) in self.active_mask().into_iter().enumerate() {
            out.alpha[r] = if a { factor * self.alpha_max[r] } else { self.alpha_max[r] };
        }
        out
    }

    pub fn with_alpha(&self, alpha: Vec<f64>) -> Self {
        assert_eq!(alpha.len(), self.len());
        Self { alpha, ..self.clone() }
    }

    /// `(subsystem id, t, channel, index within block)` of a flat index.
    pub fn describe(&self, r: usize) -> (String, usize, Channel, usize) {
        let b = self.blocks.iter().find(|b| b.range().contains(&r)).expect("index in range");
        (self.ids[b.subsystem].clone(), b.t, b.channel, r - b.offset)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ParamsFile::from(self)).expect("params serialize")
    }

    /// Reads values into this layout; every block must be present with matching length.
    pub fn load_values(&self, text: &str) -> Result<Self, ContractError> {
        let file: ParamsFile = serde_json::from_str(text).map_err(|e| ContractError::Params(e.to_string()))?;
        let mut out = self.clone();
        let mut seen = vec![false; self.blocks.len()];
        for e in file.entries {
            let i = self
                .ids
                .iter()
                .position(|id| *id == e.subsystem)
                .ok_or_else(|| ContractError::Params(format!("unknown subsystem {}", e.subsystem)))?;
            if e.t >= self.steps {
                return Err(ContractError::Params(format!("t = {} out of range", e.t)));
            }
            let bi = self.blocks.iter().position(|b| b.subsystem == i && b.t == e.t && b.channel == e.channel).unwrap();
            let b = &self.blocks[bi];
            if e.alpha.len() != b.len || e.alpha_max.len() != b.len {
                return Err(ContractError::Params(format!(
                    "block ({}, {}, {}) expects {} entries",
                    e.subsystem, e.t, e.channel, b.len
                )));
            }
            out.alpha[b.range()].copy_from_slice(&e.alpha);
            out.alpha_max[b.range()].copy_from_slice(&e.alpha_max);
            seen[bi] = true;
        }
        if let Some(bi) = seen.iter().position(|s| !s) {
            let b = &self.blocks[bi];
            return Err(ContractError::Params(format!(
                "missing block ({}, {}, {})",
                self.ids[b.subsystem], b.t, b.channel
            )));
        }
        Ok(out)
    }
}

#[derive(Serialize, Deserialize)]
struct ParamsFile {
    entries: Vec<ParamsEntry>,
}

#[derive(Serialize, Deserialize)]
struct ParamsEntry {
    subsystem: String,
    t: usize,
    channel: Channel,
    active: bool,
    alpha: Vec<f64>,
    alpha_max: Vec<f64>,
}

impl From<&ContractParams> for ParamsFile {
    fn from(p: &ContractParams) -> Self {
        ParamsFile {
            entries: p
                .blocks
                .iter()
                .map(|b| ParamsEntry {
                    subsystem: p.ids[b.subsystem].clone(),
                    t: b.t,
                    channel: b.channel,
                    active: b.active,
                    alpha: p.alpha[b.range()].to_vec(),
                    alpha_max: p.alpha_max[b.range()].to_vec(),
                })
                .collect(),
        }
    }
}

fn hard_bound(network: &Network, i: usize, t: usize, channel: Channel) -> &Zonotope {
    let s = &network.subsystems[i];
    match channel {
        Channel::State => s.x_at(t),
        Channel::Input => s.u_at(t),
    }
}

fn const_vec(v: &Array1<f64>) -> Vec<LinExpr> {
    v.iter().map(|&x| LinExpr::constant(x)).collect()
}

/// Largest per-generator scalings keeping `Z(c̄, C Diag(α))` inside one bound.
///
/// Two stages: first the largest uniform scaling `τ`, then the largest `Σ α`
/// subject to `α >= τ`. Returns `None` when not even `α = 0` fits.
pub fn alpha_max_block(template: &Zonotope, bound: &Zonotope) -> Result<Option<Vec<f64>>, ContractError> {
    let s = template.num_generators();
    if template == bound {
        return Ok(Some(vec![1.0; s]));
    }
    let zero_cols: Vec<bool> = template.generators().columns().into_iter().map(|c| c.iter().all(|v| *v == 0.0)).collect();
    let build = |lp: &mut LinearProgram| -> Result<Vec<LinExpr>, ContractError> {
        let alpha: Vec<LinExpr> =
            (0..s).map(|c| if zero_cols[c] { LinExpr::constant(1.0) } else { LinExpr::var(lp.add_var(0.0, f64::INFINITY)) }).collect();
        let inner = crate::geom::SymZonotope {
            center: const_vec(template.center()),
            generators: (0..s)
                .map(|c| template.generators().column(c).iter().map(|&g| alpha[c].scaled(g).compact()).collect())
                .collect(),
        };
        add_hard_containment(lp, &inner, bound)?;
        Ok(alpha)
    };

    let mut lp = LinearProgram::new();
    let alpha = build(&mut lp)?;
    let tau = lp.add_var(0.0, f64::INFINITY);
    for a in alpha.iter().filter(|a| !a.is_constant()) {
        lp.add_le(&LinExpr::var(tau), a);
    }
    lp.add_objective(&LinExpr::var(tau), -1.0);
    let sol = lp.solve()?;
    let tau_star = match sol.status {
        LpStatus::Optimal => sol.value(tau),
        LpStatus::Infeasible => return Ok(None),
        LpStatus::Unbounded => f64::INFINITY,
        other => return Err(ContractError::Lp(LpError::Solver(format!("alpha bound LP ended with {other:?}")))),
    };
    if !tau_star.is_finite() {
        // Only zero columns: any scaling fits.
        return Ok(Some(vec![1.0; s]));
    }

    let mut lp = LinearProgram::new();
    let alpha = build(&mut lp)?;
    let floor = tau_star * (1.0 - 1e-9);
    for a in alpha.iter().filter(|a| !a.is_constant()) {
        lp.add_constraint(a, Sense::Ge, floor);
        lp.add_objective(a, -1.0);
    }
    let sol = lp.solve()?;
    if !sol.is_optimal() {
        return Ok(Some(alpha.iter().map(|a| if a.is_constant() { 1.0 } else { floor }).collect()));
    }
    Ok(Some(alpha.iter().map(|a| sol.eval(a).max(0.0)).collect()))
}

/// `α^max` for every block of the layout.
pub fn alpha_max(network: &Network, template: &ContractTemplate, layout: &ContractParams) -> Result<Vec<f64>, ContractError> {
    let mut out = vec![0.0; layout.len()];
    for b in &layout.blocks {
        if b.len == 0 {
            continue;
        }
        let tpl = template.get(b.subsystem, b.t, b.channel);
        let bound = hard_bound(network, b.subsystem, b.t, b.channel);
        match alpha_max_block(tpl, bound)? {
            Some(v) => out[b.range()].copy_from_slice(&v),
            None => {
                return Err(ContractError::TemplateNotContainable {
                    subsystem: network.subsystems[b.subsystem].id.clone(),
                    t: b.t,
                    channel: b.channel,
                })
            }
        }
    }
    Ok(out)
}

/// Layout with computed `α^max` and `α = α^max`.
pub fn initial_params(network: &Network, template: &ContractTemplate) -> Result<ContractParams, ContractError> {
    let mut p = ContractParams::layout(network, template);
    p.alpha_max = alpha_max(network, template, &p)?;
    p.alpha = p.alpha_max.clone();
    Ok(p)
}

/// `𝒳_i(t, α)` or `𝒰_i(t, α)` at the current parameters.
pub fn guarantee_set(template: &ContractTemplate, params: &ContractParams, i: usize, t: usize, channel: Channel) -> Zonotope {
    let tpl = template.get(i, t, channel);
    let alpha = Array1::from(params.slice(i, t, channel).to_vec());
    scale_generators(tpl, alpha.view()).expect("nonnegative parameters")
}

/// The disturbance subsystem `i` may assume at step `t`, with each coupling
/// generator tied to the `α` entry that scales it.
#[derive(Debug, Clone)]
pub struct AugmentedDisturbance {
    pub center: Array1<f64>,
    /// `(flat α index, constant column)`: neighbors ascending, state before input.
    pub scaled: Vec<(usize, Array1<f64>)>,
    /// Generators of `D_i(t)`.
    pub fixed: Array2<f64>,
}

impl AugmentedDisturbance {
    pub fn build(network: &Network, template: &ContractTemplate, layout: &ContractParams, i: usize, t: usize) -> Self {
        let s = &network.subsystems[i];
        let d = s.d_at(t);
        let mut center = d.center().clone();
        let mut scaled = Vec::new();
        for c in &s.couplings {
            let j = c.neighbor;
            let tt = t.min(layout.steps - 1);
            for (channel, m) in [(Channel::State, &c.a[t.min(c.a.len() - 1)]), (Channel::Input, &c.b[t.min(c.b.len() - 1)])] {
                if m.iter().all(|v| *v == 0.0) {
                    continue;
                }
                let tpl = template.get(j, tt, channel);
                center += &m.dot(tpl.center());
                let block = layout.block(j, tt, channel);
                let mapped = m.dot(tpl.generators());
                for (col, r) in mapped.columns().into_iter().zip(block.range()) {
                    if col.iter().any(|v| *v != 0.0) {
                        scaled.push((r, col.to_owned()));
                    }
                }
            }
        }
        Self { center, scaled, fixed: d.generators().clone() }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn num_generators(&self) -> usize {
        self.scaled.len() + self.fixed.ncols()
    }

    pub fn evaluate(&self, alpha: &[f64]) -> Zonotope {
        let n = self.dim();
        let mut g = Array2::zeros((n, self.num_generators()));
        for (c, (r, col)) in self.scaled.iter().enumerate() {
            g.column_mut(c).assign(&(col * alpha[*r]));
        }
        for (c, col) in self.fixed.columns().into_iter().enumerate() {
            g.column_mut(self.scaled.len() + c).assign(&col);
        }
        Zonotope::new(self.center.clone(), g).expect("finite disturbance")
    }

    /// Symbolic disturbance with `α` supplied by `alpha_expr`. With a reduction
    /// order, the columns outside the keep set (ranked at `alpha_hat`) are boxed;
    /// the box half-widths are linear in `α`.
    pub(crate) fn symbolic(&self, alpha_expr: &dyn Fn(usize) -> LinExpr, reduction: Option<usize>, alpha_hat: &[f64]) -> SymDisturbance {
        let n = self.dim();
        let scaled_col = |(r, col): &(usize, Array1<f64>)| -> Vec<LinExpr> {
            let a = alpha_expr(*r);
            col.iter().map(|&v| a.scaled(v).compact()).collect()
        };
        let fixed_cols: Vec<usize> = (0..self.fixed.ncols()).filter(|&c| self.fixed.column(c).iter().any(|v| *v != 0.0)).collect();
        let p = self.scaled.len() + fixed_cols.len();
        let reduce = matches!(reduction, Some(o) if p > o.max(1) * n);
        if !reduce {
            let mut columns: Vec<Vec<LinExpr>> = self.scaled.iter().map(scaled_col).collect();
            columns.extend(fixed_cols.iter().map(|&c| const_vec(&self.fixed.column(c).to_owned())));
            return SymDisturbance { center: self.center.clone(), columns };
        }
        let order = reduction.unwrap().max(1);
        let numeric = self.evaluate(alpha_hat);
        let all_nonzero: Vec<usize> = (0..self.scaled.len()).chain(fixed_cols.iter().map(|c| self.scaled.len() + c)).collect();
        let sub = numeric.generators().select(ndarray::Axis(1), &all_nonzero);
        let kept_local = boxing_keep_set(&sub, (order - 1) * n);
        let kept: Vec<usize> = kept_local.iter().map(|&k| all_nonzero[k]).collect();

        let mut columns = Vec::with_capacity(kept.len() + n);
        let mut radius: Vec<LinExpr> = vec![LinExpr::zero(); n];
        for &c in &all_nonzero {
            let is_kept = kept.contains(&c);
            if c < self.scaled.len() {
                let entry = &self.scaled[c];
                if is_kept {
                    columns.push(scaled_col(entry));
                } else {
                    let a = alpha_expr(entry.0);
                    for row in 0..n {
                        let w = entry.1[row].abs();
                        if w != 0.0 {
                            radius[row].add_scaled(&a, w);
                        }
                    }
                }
            } else {
                let col = self.fixed.column(c - self.scaled.len());
                if is_kept {
                    columns.push(const_vec(&col.to_owned()));
                } else {
                    for row in 0..n {
                        radius[row].constant += col[row].abs();
                    }
                }
            }
        }
        for (row, r) in radius.into_iter().enumerate() {
            let r = r.compact();
            if r.is_constant() && r.constant == 0.0 {
                continue;
            }
            let mut col = vec![LinExpr::zero(); n];
            col[row] = r;
            columns.push(col);
        }
        SymDisturbance { center: self.center.clone(), columns }
    }
}

/// `W_i(α, t)` at the current parameters, columns in bookkeeping order.
pub fn augmented_disturbance(network: &Network, template: &ContractTemplate, params: &ContractParams, i: usize, t: usize) -> Zonotope {
    AugmentedDisturbance::build(network, template, params, i, t).evaluate(&params.alpha)
}

/// Number of tube columns for the invariant-set pairing: whole chains of the
/// disturbance columns, `ceil(k / n)` deep.
pub(crate) fn rci_columns(k: usize, n: usize, p: usize) -> usize {
    let q = k.div_ceil(n.max(1)).max(1);
    (q * p).max(1)
}

/// Containment of `inner` in the guarantee `Z(c̄, C Diag(α)) ⊕ Z(0, d I)`.
pub(crate) fn add_guarantee_containment(
    lp: &mut LinearProgram,
    inner: &crate::geom::SymZonotope,
    template: &Zonotope,
    alpha: &[LinExpr],
    slack: Option<&LinExpr>,
) -> Result<(), GeomError> {
    encode_containment(lp, inner, &const_vec(template.center()), template.generators(), alpha, slack)?;
    Ok(())
}

/// How the per-subsystem program treats the guarantee containments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum ComponentKind {
    /// Slacked containments, objective = total slack.
    Potential,
    /// Exact containments, objective = total absolute generator entries.
    Hard,
}

pub(crate) struct ComponentLp {
    pub lp: LinearProgram,
    pub tube: Tube,
    pub pins: Vec<(usize, crate::lpcore::RowId)>,
    pub slack_x: Vec<LinExpr>,
    pub slack_u: Vec<LinExpr>,
}

pub(crate) fn build_component(
    network: &Network,
    template: &ContractTemplate,
    params: &ContractParams,
    i: usize,
    k: usize,
    reduction: Option<usize>,
    kind: ComponentKind,
) -> Result<ComponentLp, ContractError> {
    let s = &network.subsystems[i];
    let steps = network.steps();
    let mut lp = LinearProgram::new();

    let augs: Vec<AugmentedDisturbance> = (0..steps).map(|t| AugmentedDisturbance::build(network, template, params, i, t)).collect();
    let mut touched: Vec<usize> = Vec::new();
    for t in 0..steps {
        for ch in [Channel::State, Channel::Input] {
            touched.extend(params.block(i, t, ch).range());
        }
    }
    for aug in &augs {
        touched.extend(aug.scaled.iter().map(|(r, _)| *r));
    }
    touched.sort_unstable();
    touched.dedup();

    let mut alpha_vars: BTreeMap<usize, LinExpr> = BTreeMap::new();
    let mut pins = Vec::with_capacity(touched.len());
    for &r in &touched {
        let v = lp.add_free_var();
        let row = lp.add_named_constraint(format!("pin_{r}"), &LinExpr::var(v), Sense::Eq, params.alpha[r])?;
        alpha_vars.insert(r, LinExpr::var(v));
        pins.push((r, row));
    }
    let alpha_of = |r: usize| alpha_vars[&r].clone();
    let dist: Vec<SymDisturbance> = augs.iter().map(|aug| aug.symbolic(&alpha_of, reduction, &params.alpha)).collect();

    let tube = match network.mode {
        Mode::Finite => {
            let a: Vec<&Array2<f64>> = (0..steps).map(|t| s.a_at(t)).collect();
            let b: Vec<&Array2<f64>> = (0..steps).map(|t| s.b_at(t)).collect();
            build_finite_tube(&mut lp, &a, &b, &dist, k, GrowthMode::Growing, s.initial.as_ref())?
        }
        Mode::Infinite => {
            let kk = rci_columns(k, s.state_dim(), dist[0].num_columns());
            build_rci_tube(&mut lp, s.a_at(0), s.b_at(0), &dist[0], kk, false)?
        }
    };

    let mut slack_x = Vec::new();
    let mut slack_u = Vec::new();
    for t in 0..steps {
        for ch in [Channel::State, Channel::Input] {
            let tpl = template.get(i, t, ch);
            let inner = match ch {
                Channel::State => tube.omega(t, 1.0),
                Channel::Input => tube.theta(t, 1.0),
            };
            if inner.dim() == 0 {
                continue;
            }
            let alpha: Vec<LinExpr> = params.block(i, t, ch).range().map(&alpha_of).collect();
            let slack = match kind {
                ComponentKind::Potential => {
                    let d = LinExpr::var(lp.add_var(0.0, f64::INFINITY));
                    lp.add_objective(&d, 1.0);
                    Some(d)
                }
                ComponentKind::Hard => None,
            };
            add_guarantee_containment(&mut lp, &inner, tpl, &alpha, slack.as_ref())?;
            if let Some(d) = slack {
                match ch {
                    Channel::State => slack_x.push(d),
                    Channel::Input => slack_u.push(d),
                }
            }
        }
    }
    if network.mode == Mode::Finite {
        add_hard_containment(&mut lp, &tube.omega(steps, 1.0), s.x_at(steps))?;
    }
    if kind == ComponentKind::Hard {
        tube.add_abs_objective(&mut lp, 1.0);
    }
    Ok(ComponentLp { lp, tube, pins, slack_x, slack_u })
}

pub(crate) fn extract_solution(network: &Network, i: usize, tube: &Tube, sol: &crate::lpcore::LpSolution) -> Solution {
    let s = &network.subsystems[i];
    match network.mode {
        Mode::Finite => Solution::Finite(tube.extract_finite(sol, s.state_dim(), s.input_dim(), GrowthMode::Growing)),
        Mode::Infinite => Solution::Infinite(tube.extract_rci(sol, s.state_dim(), s.input_dim(), 0.0)),
    }
}

/// Value and gradient of one subsystem's potential.
#[derive(Debug, Clone)]
pub struct PotentialEval {
    pub subsystem: usize,
    pub value: f64,
    /// Flat `α` indices this component reads, ascending.
    pub touched: Vec<usize>,
    /// `∂V_i / ∂α` for each touched index.
    pub grad: Vec<f64>,
    pub solution: Solution,
    pub slack_x: Vec<f64>,
    pub slack_u: Vec<f64>,
    pub solve_seconds: f64,
}

/// `V_i(α)` with its gradient from the pinning duals.
pub fn potential_component(
    network: &Network,
    template: &ContractTemplate,
    params: &ContractParams,
    i: usize,
    k: usize,
    reduction: Option<usize>,
) -> Result<PotentialEval, ContractError> {
    let c = build_component(network, template, params, i, k, reduction, ComponentKind::Potential)?;
    let sol = c.lp.solve()?;
    let id = network.subsystems[i].id.clone();
    match sol.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => return Err(ContractError::Infeasible { subsystem: id }),
        status => return Err(ContractError::Incomplete { subsystem: id, status }),
    }
    let slack_x: Vec<f64> = c.slack_x.iter().map(|d| sol.eval(d).max(0.0)).collect();
    let slack_u: Vec<f64> = c.slack_u.iter().map(|d| sol.eval(d).max(0.0)).collect();
    Ok(PotentialEval {
        subsystem: i,
        value: slack_x.iter().sum::<f64>() + slack_u.iter().sum::<f64>(),
        touched: c.pins.iter().map(|(r, _)| *r).collect(),
        grad: c.pins.iter().map(|(_, row)| sol.dual(*row)).collect(),
        solution: extract_solution(network, i, &c.tube, &sol),
        slack_x,
        slack_u,
        solve_seconds: sol.solve_seconds,
    })
}

/// Viable tube meeting the guarantees exactly at the given parameters, or `None`.
pub fn satisfy_component(
    network: &Network,
    template: &ContractTemplate,
    params: &ContractParams,
    i: usize,
    k: usize,
    reduction: Option<usize>,
) -> Result<Option<Solution>, ContractError> {
    let c = build_component(network, template, params, i, k, reduction, ComponentKind::Hard)?;
    let sol = c.lp.solve()?;
    match sol.status {
        LpStatus::Optimal => {
            let mut s = extract_solution(network, i, &c.tube, &sol);
            match &mut s {
                Solution::Finite(f) => f.solve_seconds = sol.solve_seconds,
                Solution::Infinite(r) => r.solve_seconds = sol.solve_seconds,
            }
            Ok(Some(s))
        }
        LpStatus::Infeasible => Ok(None),
        status => Err(ContractError::Incomplete { subsystem: network.subsystems[i].id.clone(), status }),
    }
}

#[derive(Debug, Clone)]
pub struct Potential {
    pub value: f64,
    /// Gradient over the flat `α` vector.
    pub grad: Vec<f64>,
    pub components: Vec<PotentialEval>,
    /// Sum of solver times over components.
    pub solve_seconds: f64,
    pub wall_seconds: f64,
}

/// `V(α) = Σ_i V_i(α)`, evaluating subsystems in parallel and summing in index order.
pub fn potential(
    network: &Network,
    template: &ContractTemplate,
    params: &ContractParams,
    k: usize,
    reduction: Option<usize>,
) -> Result<Potential, ContractError> {
    let start = Instant::now();
    let evals: Vec<Result<PotentialEval, ContractError>> =
        (0..network.len()).into_par_iter().map(|i| potential_component(network, template, params, i, k, reduction)).collect();
    let mut value = 0.0;
    let mut grad = vec![0.0; params.len()];
    let mut solve_seconds = 0.0;
    let mut components = Vec::with_capacity(evals.len());
    for e in evals {
        let e = e?;
        value += e.value;
        for (r, g) in e.touched.iter().zip(&e.grad) {
            grad[*r] += g;
        }
        solve_seconds += e.solve_seconds;
        components.push(e);
    }
    Ok(Potential { value, grad, components, solve_seconds, wall_seconds: start.elapsed().as_secs_f64() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Margin {
    pub subsystem: String,
    pub t: usize,
    pub channel: Channel,
    /// Directed Hausdorff distance from the set to its guarantee; 0 when certified.
    pub margin: f64,
    pub certified: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectnessReport {
    pub correct: bool,
    pub margins: Vec<Margin>,
    /// Every `Z(c̄, C Diag(α))` lies inside its hard bound.
    pub guarantees_valid: bool,
    /// Finite horizon: every `Ω_i(h) ⊆ X_i(h)`.
    pub terminal_ok: bool,
}

impl CorrectnessReport {
    pub fn max_margin(&self) -> f64 {
        self.margins.iter().map(|m| m.margin).fold(0.0, f64::max)
    }
}

/// Certifies `Ω_i(t) ⊆ 𝒳_i(t, α)` and `Θ_i(t) ⊆ 𝒰_i(t, α)` for every subsystem and step.
pub fn check_correctness(
    network: &Network,
    template: &ContractTemplate,
    params: &ContractParams,
    solutions: &[Solution],
) -> Result<CorrectnessReport, ContractError> {
    let mut margins = Vec::new();
    let mut guarantees_valid = true;
    for (i, s) in network.subsystems.iter().enumerate() {
        for t in 0..network.steps() {
            for ch in [Channel::State, Channel::Input] {
                let inner = match ch {
                    Channel::State => solutions[i].omega(t),
                    Channel::Input => solutions[i].theta(t),
                };
                if inner.dim() == 0 {
                    continue;
                }
                let outer = guarantee_set(template, params, i, t, ch);
                let certified = containment_lp(&inner, &outer)?.feasible;
                let margin = if certified { 0.0 } else { directed_hausdorff(&outer, &inner)?.max(f64::MIN_POSITIVE) };
                margins.push(Margin { subsystem: s.id.clone(), t, channel: ch, margin, certified });
                if !containment_lp(&outer, hard_bound(network, i, t, ch))?.feasible {
                    guarantees_valid = false;
                }
            }
        }
    }
    let mut terminal_ok = true;
    if network.mode == Mode::Finite {
        let h = network.horizon;
        for (i, s) in network.subsystems.iter().enumerate() {
            if !containment_lp(&solutions[i].omega(h), s.x_at(h))?.feasible {
                terminal_ok = false;
            }
        }
    }
    let correct = margins.iter().all(|m| m.certified) && guarantees_valid && terminal_ok;
    Ok(CorrectnessReport { correct, margins, guarantees_valid, terminal_ok })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sysmodel::{Coupling, Subsystem};
    use ndarray::array;

    fn z(c: Array1<f64>, g: Array2<f64>) -> Zonotope {
        Zonotope::new(c, g).unwrap()
    }

    /// Two scalar integrators `x_i+ = x_i + u_i + a x_j + d_i` in infinite mode.
    fn scalar_pair(a: f64) -> Network {
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
        Network { mode: Mode::Infinite, horizon: 1, subsystems: vec![sub("a", 1), sub("b", 0)] }
    }

    #[test]
    fn alpha_max_examples() {
        let x = z(array![0.0, 0.0], Array2::eye(2));
        assert_eq!(alpha_max_block(&x, &x).unwrap().unwrap(), vec![1.0, 1.0]);
        let big = z(array![0.0, 0.0], 2.0 * Array2::eye(2));
        let v = alpha_max_block(&x, &big).unwrap().unwrap();
        assert!((v[0] - 2.0).abs() < 1e-7 && (v[1] - 2.0).abs() < 1e-7);
        let diag = z(array![0.0, 0.0], array![[1.0], [1.0]]);
        let v = alpha_max_block(&diag, &x).unwrap().unwrap();
        assert!((v[0] - 1.0).abs() < 1e-7);
        let off = z(array![5.0, 0.0], Array2::eye(2));
        assert!(alpha_max_block(&off, &x).unwrap().is_none());
    }

    #[test]
    fn layout_marks_inactive_input_channels() {
        let net = scalar_pair(0.2);
        let tpl = default_template(&net);
        let p = initial_params(&net, &tpl).unwrap();
        assert_eq!(p.len(), 4);
        assert!(p.block(0, 0, Channel::State).active);
        assert!(!p.block(0, 0, Channel::Input).active);
        assert_eq!(p.num_active(), 2);
        assert_eq!(p.alpha_max, vec![1.0; 4]);
        let half = p.with_fraction(0.5);
        assert_eq!(half.alpha, vec![0.5, 1.0, 0.5, 1.0]);
        assert_eq!(half.lower_bounds(), vec![0.0, 1.0, 0.0, 1.0]);
    }

    #[test]
    fn params_json_round_trip() {
        let net = scalar_pair(0.2);
        let tpl = default_template(&net);
        let p = initial_params(&net, &tpl).unwrap().with_fraction(0.3);
        let back = p.layout_clone().load_values(&p.to_json()).unwrap();
        assert_eq!(back, p);
        assert!(p.load_values(r#"{"entries": []}"#).is_err());
    }

    impl ContractParams {
        fn layout_clone(&self) -> Self {
            let mut p = self.clone();
            p.alpha.iter_mut().for_each(|a| *a = 0.0);
            p
        }
    }

    #[test]
    fn augmented_disturbance_without_neighbors_is_d() {
        let mut net = scalar_pair(0.0);
        net.subsystems[0].couplings.clear();
        let tpl = default_template(&net);
        let p = initial_params(&net, &tpl).unwrap();
        let w = augmented_disturbance(&net, &tpl, &p, 0, 0);
        assert_eq!(&w, net.subsystems[0].d_at(0));
    }

    #[test]
    fn augmented_disturbance_zero_alpha_shifts_center() {
        let mut net = scalar_pair(0.5);
        net.subsystems[1].x = vec![z(array![2.0], array![[3.0]])];
        let tpl = default_template(&net);
        let p = initial_params(&net, &tpl).unwrap().with_alpha(vec![0.0; 4]);
        let w = augmented_disturbance(&net, &tpl, &p, 0, 0).without_zero_generators();
        assert_eq!(w, z(array![1.0], array![[0.1]]));
    }

    #[test]
    fn case_one_style_columns() {
        // Subsystem 1 of a three-subsystem chain reads both neighbors' states.
        let a12 = array![[0.1, 0.01], [0.1, 0.01]];
        let a13 = array![[0.8, 0.1], [0.8, 0.1]];
        let base = |id: &str, couplings: Vec<Coupling>| Subsystem {
            id: id.into(),
            a: vec![array![[1.0, 1.1], [0.0, 1.0]]],
            b: vec![array![[0.0], [0.1]]],
            couplings,
            x: vec![z(Array1::zeros(2), Array2::eye(2))],
            u: vec![z(array![0.0], array![[10.0]])],
            d: vec![z(Array1::zeros(2), 0.05 * Array2::eye(2))],
            template_x: None,
            template_u: None,
            initial: None,
        };
        let zero_b = vec![Array2::zeros((2, 1))];
        let net = Network {
            mode: Mode::Infinite,
            horizon: 1,
            subsystems: vec![
                base(
                    "1",
                    vec![
                        Coupling { neighbor: 1, a: vec![a12.clone()], b: zero_b.clone() },
                        Coupling { neighbor: 2, a: vec![a13.clone()], b: zero_b.clone() },
                    ],
                ),
                base("2", vec![]),
                base("3", vec![]),
            ],
        };
        let tpl = default_template(&net);
        let p = initial_params(&net, &tpl).unwrap().with_alpha(vec![0.0, 0.0, 0.0, 0.5, 0.25, 0.0, 2.0, 4.0, 0.0]);
        let w = augmented_disturbance(&net, &tpl, &p, 0, 0);
        let expected = array![
            [0.05, 0.0025, 1.6, 0.4, 0.05, 0.0],
            [0.05, 0.0025, 1.6, 0.4, 0.0, 0.05]
        ];
        assert!((w.generators() - &expected).iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn boxing_half_widths_follow_alpha() {
        let aug = AugmentedDisturbance {
            center: array![0.0, 0.0],
            scaled: vec![(0, array![1.0, -2.0]), (1, array![0.5, 0.5])],
            fixed: array![[0.1, 0.0], [0.0, 0.1]],
        };
        let alpha = [0.5, 2.0];
        let mut lp = LinearProgram::new();
        let v: Vec<_> = (0..2).map(|_| lp.add_free_var()).collect();
        let sym = aug.symbolic(&|r| LinExpr::var(v[r]), Some(1), &alpha);
        assert_eq!(sym.columns.len(), 2);
        let vals = [0.5, 2.0];
        let r0 = sym.columns[0][0].eval(&vals);
        let r1 = sym.columns[1][1].eval(&vals);
        assert!((r0 - (0.5 + 1.0 + 0.1)).abs() < 1e-12);
        assert!((r1 - (1.0 + 1.0 + 0.1)).abs() < 1e-12);
        let unreduced = aug.symbolic(&|r| LinExpr::var(v[r]), None, &alpha);
        assert_eq!(unreduced.columns.len(), 4);
    }

    #[test]
    fn decoupled_component_is_zero_with_zero_gradient() {
        let net = scalar_pair(0.0);
        let tpl = default_template(&net);
        let p = initial_params(&net, &tpl).unwrap().with_fraction(0.8);
        let e = potential_component(&net, &tpl, &p, 0, 1, Some(1)).unwrap();
        assert!(e.value.abs() < 1e-9);
        assert!(e.grad.iter().all(|g| g.abs() < 1e-9));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let net = scalar_pair(0.6);
        let tpl = default_template(&net);
        let p = initial_params(&net, &tpl).unwrap().with_alpha(vec![0.12, 1.0, 0.5, 1.0]);
        let e = potential_component(&net, &tpl, &p, 0, 1, None).unwrap();
        // Ω_0 = [-(0.1 + 0.6 α_b), ...] must fit α_a = 0.12: V = 0.1 + 0.3 - 0.12
        assert!((e.value - 0.28).abs() < 1e-8, "{}", e.value);
        let eps = 1e-5;
        for (pos, &r) in e.touched.iter().enumerate() {
            let mut up = p.alpha.clone();
            up[r] += eps;
            let mut dn = p.alpha.clone();
            dn[r] -= eps;
            let vu = potential_component(&net, &tpl, &p.with_alpha(up), 0, 1, None).unwrap().value;
            let vd = potential_component(&net, &tpl, &p.with_alpha(dn), 0, 1, None).unwrap().value;
            let fd = (vu - vd) / (2.0 * eps);
            assert!((fd - e.grad[pos]).abs() <= 1e-3 * fd.abs().max(1.0), "index {r}: fd {fd} vs {}", e.grad[pos]);
        }
        let total = potential(&net, &tpl, &p, 1, None).unwrap();
        assert_eq!(total.components.len(), 2);
        assert!(total.grad[2] > 0.0);
    }

    #[test]
    fn correctness_reports_shift_margin() {
        let net = Network {
            mode: Mode::Infinite,
            horizon: 1,
            subsystems: vec![Subsystem {
                id: "s".into(),
                a: vec![array![[0.0]]],
                b: vec![array![[1.0]]],
                couplings: vec![],
                x: vec![z(array![0.0], array![[2.0]])],
                u: vec![z(array![0.0], array![[1.0]])],
                d: vec![Zonotope::point(array![0.0])],
                template_x: None,
                template_u: None,
                initial: None,
            }],
        };
        let tpl = default_template(&net);
        let p = initial_params(&net, &tpl).unwrap();
        let sol = |ubar: f64| {
            Solution::Infinite(crate::viability::RciSolution {
                xbar: array![0.0],
                t: array![[2.0]],
                ubar: array![ubar],
                m: array![[1.0]],
                beta: 0.0,
                e: Array2::zeros((1, 0)),
                k: 1,
                solve_seconds: 0.0,
            })
        };
        let ok = check_correctness(&net, &tpl, &p, &[sol(0.0)]).unwrap();
        assert!(ok.correct && ok.max_margin() == 0.0);
        let bad = check_correctness(&net, &tpl, &p, &[sol(0.5)]).unwrap();
        assert!(!bad.correct);
        let m = bad.margins.iter().find(|m| m.channel == Channel::Input).unwrap();
        assert!((m.margin - 0.5).abs() < 1e-7);
    }
}
