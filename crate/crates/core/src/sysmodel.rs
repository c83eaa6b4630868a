//! Networks of coupled discrete-time linear subsystems
//!
//! `x_i(t+1) = A_ii(t) x_i(t) + B_ii(t) u_i(t) + Σ_j [A_ij(t) x_j(t) + B_ij(t) u_j(t)] + d_i(t)`
//!
//! with zonotopic state, input and disturbance bounds. Every time-indexed field
//! is expanded on load, so a finite-horizon network with horizon `h` stores `h`
//! dynamics/input/disturbance entries and `h + 1` state bounds; an infinite-mode
//! network stores exactly one of each.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::Zonotope;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("subsystem {subsystem}, t = {t}: {what} has shape {found}, expected {expected}")]
    Dimension { subsystem: String, t: usize, what: String, expected: String, found: String },
    #[error("subsystem {subsystem}: {what} lists {found} entries, expected 1 or {expected}")]
    SeriesLength { subsystem: String, what: String, expected: usize, found: usize },
    #[error("subsystem {subsystem}: coupling references unknown subsystem {target}")]
    UnknownCoupling { subsystem: String, target: String },
    #[error("subsystem {0}: coupling to itself")]
    SelfCoupling(String),
    #[error("subsystem {subsystem}: duplicate coupling to {target}")]
    DuplicateCoupling { subsystem: String, target: String },
    #[error("duplicate subsystem id {0}")]
    DuplicateId(String),
    #[error("finite mode needs a horizon of at least 1")]
    Horizon,
    #[error("network has no subsystems")]
    Empty,
    #[error("subsystem {subsystem}: {what}")]
    Invalid { subsystem: String, what: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Finite,
    Infinite,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Finite => "finite",
            Mode::Infinite => "infinite",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Coupling {
    /// Index of the neighbour `j` in `Network::subsystems`.
    pub neighbor: usize,
    /// `A_ij(t)`, `n_i × n_j`.
    pub a: Vec<Array2<f64>>,
    /// `B_ij(t)`, `n_i × m_j`; all zero when the config omits it.
    pub b: Vec<Array2<f64>>,
}

impl Coupling {
    pub fn has_state_coupling(&self) -> bool {
        self.a.iter().any(|m| m.iter().any(|v| *v != 0.0))
    }

    pub fn has_input_coupling(&self) -> bool {
        self.b.iter().any(|m| m.iter().any(|v| *v != 0.0))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Subsystem {
    pub id: String,
    pub a: Vec<Array2<f64>>,
    pub b: Vec<Array2<f64>>,
    /// Sorted by neighbour index.
    pub couplings: Vec<Coupling>,
    pub x: Vec<Zonotope>,
    pub u: Vec<Zonotope>,
    pub d: Vec<Zonotope>,
    /// Optional guarantee templates; the hard bounds are used when absent.
    pub template_x: Option<Vec<Zonotope>>,
    pub template_u: Option<Vec<Zonotope>>,
    /// Optional fixed initial set (finite mode).
    pub initial: Option<Zonotope>,
}

impl Subsystem {
    pub fn state_dim(&self) -> usize {
        self.a[0].nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b[0].ncols()
    }

    pub fn coupling_from(&self, j: usize) -> Option<&Coupling> {
        self.couplings.iter().find(|c| c.neighbor == j)
    }

    /// Dynamics at `t`; infinite-mode networks hold one entry for all `t`.
    pub fn a_at(&self, t: usize) -> &Array2<f64> {
        &self.a[t.min(self.a.len() - 1)]
    }

    pub fn b_at(&self, t: usize) -> &Array2<f64> {
        &self.b[t.min(self.b.len() - 1)]
    }

    pub fn x_at(&self, t: usize) -> &Zonotope {
        &self.x[t.min(self.x.len() - 1)]
    }

    pub fn u_at(&self, t: usize) -> &Zonotope {
        &self.u[t.min(self.u.len() - 1)]
    }

    pub fn d_at(&self, t: usize) -> &Zonotope {
        &self.d[t.min(self.d.len() - 1)]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub mode: Mode,
    /// Horizon `h`; 1 in infinite mode.
    pub horizon: usize,
    pub subsystems: Vec<Subsystem>,
}

impl Network {
    pub fn len(&self) -> usize {
        self.subsystems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subsystems.is_empty()
    }

    /// Number of dynamics steps stored (`h` finite, 1 infinite).
    pub fn steps(&self) -> usize {
        match self.mode {
            Mode::Finite => self.horizon,
            Mode::Infinite => 1,
        }
    }

    pub fn total_state_dim(&self) -> usize {
        self.subsystems.iter().map(Subsystem::state_dim).sum()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.subsystems.iter().position(|s| s.id == id)
    }

    /// Subsystems `i` that read `j`'s state (`A_ij ≠ 0`) or input (`B_ij ≠ 0`).
    pub fn dependents(&self, j: usize) -> (Vec<usize>, Vec<usize>) {
        let mut state = Vec::new();
        let mut input = Vec::new();
        for (i, s) in self.subsystems.iter().enumerate() {
            if let Some(c) = s.coupling_from(j) {
                if c.has_state_coupling() {
                    state.push(i);
                }
                if c.has_input_coupling() {
                    input.push(i);
                }
            }
        }
        (state, input)
    }

    /// Re-interprets the network in the other mode. Finite → infinite keeps the
    /// first entry of every series; infinite → finite repeats it over `horizon`.
    pub fn with_mode(&self, mode: Mode, horizon: usize) -> Result<Network, ModelError> {
        if mode == self.mode && (mode == Mode::Infinite || horizon == self.horizon) {
            return Ok(self.clone());
        }
        let steps = if mode == Mode::Finite { horizon } else { 1 };
        if steps == 0 {
            return Err(ModelError::Horizon);
        }
        let take = |v: &Vec<Array2<f64>>, n: usize| (0..n).map(|t| v[t.min(v.len() - 1)].clone()).collect::<Vec<_>>();
        let takez = |v: &Vec<Zonotope>, n: usize| (0..n).map(|t| v[t.min(v.len() - 1)].clone()).collect::<Vec<_>>();
        let x_len = if mode == Mode::Finite { horizon + 1 } else { 1 };
        let subsystems = self
            .subsystems
            .iter()
            .map(|s| Subsystem {
                id: s.id.clone(),
                a: take(&s.a, steps),
                b: take(&s.b, steps),
                couplings: s
                    .couplings
                    .iter()
                    .map(|c| Coupling { neighbor: c.neighbor, a: take(&c.a, steps), b: take(&c.b, steps) })
                    .collect(),
                x: takez(&s.x, x_len),
                u: takez(&s.u, steps),
                d: takez(&s.d, steps),
                template_x: s.template_x.as_ref().map(|v| takez(v, x_len)),
                template_u: s.template_u.as_ref().map(|v| takez(v, steps)),
                initial: s.initial.clone(),
            })
            .collect();
        Ok(Network { mode, horizon: if mode == Mode::Finite { horizon } else { 1 }, subsystems })
    }

    /// The whole network as one system at time `t`: block matrices and product sets.
    pub fn aggregate(&self, t: usize) -> Aggregate {
        let offs_x = offsets(self.subsystems.iter().map(Subsystem::state_dim));
        let offs_u = offsets(self.subsystems.iter().map(Subsystem::input_dim));
        let (n, m) = (*offs_x.last().unwrap(), *offs_u.last().unwrap());
        let mut a = Array2::zeros((n, n));
        let mut b = Array2::zeros((n, m));
        for (i, s) in self.subsystems.iter().enumerate() {
            let (r0, r1) = (offs_x[i], offs_x[i + 1]);
            a.slice_mut(ndarray::s![r0..r1, offs_x[i]..offs_x[i + 1]]).assign(s.a_at(t));
            b.slice_mut(ndarray::s![r0..r1, offs_u[i]..offs_u[i + 1]]).assign(s.b_at(t));
            for c in &s.couplings {
                let j = c.neighbor;
                a.slice_mut(ndarray::s![r0..r1, offs_x[j]..offs_x[j + 1]]).assign(&c.a[t.min(c.a.len() - 1)]);
                b.slice_mut(ndarray::s![r0..r1, offs_u[j]..offs_u[j + 1]]).assign(&c.b[t.min(c.b.len() - 1)]);
            }
        }
        Aggregate {
            a,
            b,
            x: product(self.subsystems.iter().map(|s| s.x_at(t))),
            u: product(self.subsystems.iter().map(|s| s.u_at(t))),
            d: product(self.subsystems.iter().map(|s| s.d_at(t))),
            state_offsets: offs_x,
            input_offsets: offs_u,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&NetworkFile::from(self)).expect("network serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ModelError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|source| ModelError::Io { path: path.display().to_string(), source })
    }

    pub fn from_json(text: &str) -> Result<Network, ModelError> {
        let file: NetworkFile = serde_json::from_str(text)?;
        file.into_network()
    }
}

#[derive(Debug, Clone)]
pub struct Aggregate {
    pub a: Array2<f64>,
    pub b: Array2<f64>,
    pub x: Zonotope,
    pub u: Zonotope,
    pub d: Zonotope,
    pub state_offsets: Vec<usize>,
    pub input_offsets: Vec<usize>,
}

fn offsets(dims: impl Iterator<Item = usize>) -> Vec<usize> {
    let mut out = vec![0];
    for d in dims {
        out.push(out.last().unwrap() + d);
    }
    out
}

/// Cartesian product: stacked centers, block-diagonal generators.
fn product<'a>(sets: impl Iterator<Item = &'a Zonotope>) -> Zonotope {
    let sets: Vec<&Zonotope> = sets.collect();
    let n: usize = sets.iter().map(|z| z.dim()).sum();
    let p: usize = sets.iter().map(|z| z.num_generators()).sum();
    let mut c = Array1::zeros(n);
    let mut g = Array2::zeros((n, p));
    let (mut r, mut k) = (0, 0);
    for z in sets {
        c.slice_mut(ndarray::s![r..r + z.dim()]).assign(z.center());
        g.slice_mut(ndarray::s![r..r + z.dim(), k..k + z.num_generators()]).assign(z.generators());
        r += z.dim();
        k += z.num_generators();
    }
    Zonotope::new(c, g).expect("finite blocks")
}

pub fn load_network(path: impl AsRef<Path>) -> Result<Network, ModelError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ModelError::Io { path: path.display().to_string(), source })?;
    Network::from_json(&text)
}

// ---------------------------------------------------------------------------
// JSON schema

/// Subsystem ids may be written as strings or integers.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum Id {
    Str(String),
    Num(i64),
}

impl Id {
    fn into_string(self) -> String {
        match self {
            Id::Str(s) => s,
            Id::Num(n) => n.to_string(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum Series<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone + PartialEq> Series<T> {
    fn collapse(values: &[T]) -> Self {
        if values.len() == 1 || values.windows(2).all(|w| w[0] == w[1]) {
            Series::One(values[0].clone())
        } else {
            Series::Many(values.to_vec())
        }
    }

    fn expand(self, len: usize, subsystem: &str, what: &str) -> Result<Vec<T>, ModelError> {
        match self {
            Series::One(v) => Ok(vec![v; len]),
            Series::Many(v) if v.len() == len => Ok(v),
            Series::Many(v) if v.len() == 1 => Ok(vec![v[0].clone(); len]),
            Series::Many(v) => Err(ModelError::SeriesLength {
                subsystem: subsystem.to_string(),
                what: what.to_string(),
                expected: len,
                found: v.len(),
            }),
        }
    }
}

type Rows = Vec<Vec<f64>>;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CouplingFile {
    #[serde(alias = "from")]
    to: Id,
    #[serde(rename = "A", default, skip_serializing_if = "Option::is_none")]
    a: Option<Series<Rows>>,
    #[serde(rename = "B", default, skip_serializing_if = "Option::is_none")]
    b: Option<Series<Rows>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TemplateFile {
    #[serde(rename = "X", default, skip_serializing_if = "Option::is_none")]
    x: Option<Series<Zonotope>>,
    #[serde(rename = "U", default, skip_serializing_if = "Option::is_none")]
    u: Option<Series<Zonotope>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SubsystemFile {
    id: Id,
    #[serde(rename = "A")]
    a: Series<Rows>,
    #[serde(rename = "B")]
    b: Series<Rows>,
    #[serde(default)]
    couplings: Vec<CouplingFile>,
    #[serde(rename = "X")]
    x: Series<Zonotope>,
    #[serde(rename = "U")]
    u: Series<Zonotope>,
    #[serde(rename = "D")]
    d: Series<Zonotope>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    template: Option<TemplateFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    initial: Option<Zonotope>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct NetworkFile {
    mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    horizon: Option<usize>,
    subsystems: Vec<SubsystemFile>,
}

fn rows_to_matrix(rows: &Rows, cols_hint: usize) -> Result<Array2<f64>, String> {
    let n = rows.len();
    let m = rows.first().map_or(cols_hint, Vec::len);
    let mut out = Array2::zeros((n, m));
    for (i, r) in rows.iter().enumerate() {
        if r.len() != m {
            return Err(format!("ragged rows ({} vs {})", r.len(), m));
        }
        for (j, v) in r.iter().enumerate() {
            if !v.is_finite() {
                return Err("non-finite entry".into());
            }
            out[[i, j]] = *v;
        }
    }
    Ok(out)
}

fn matrix_to_rows(m: &Array2<f64>) -> Rows {
    m.outer_iter().map(|r| r.to_vec()).collect()
}

fn shape(m: &Array2<f64>) -> String {
    format!("{}x{}", m.nrows(), m.ncols())
}

impl From<&Network> for NetworkFile {
    fn from(net: &Network) -> Self {
        let rows = |v: &Vec<Array2<f64>>| Series::collapse(&v.iter().map(matrix_to_rows).collect::<Vec<_>>());
        NetworkFile {
            mode: net.mode,
            horizon: (net.mode == Mode::Finite).then_some(net.horizon),
            subsystems: net
                .subsystems
                .iter()
                .map(|s| SubsystemFile {
                    id: Id::Str(s.id.clone()),
                    a: rows(&s.a),
                    b: rows(&s.b),
                    couplings: s
                        .couplings
                        .iter()
                        .map(|c| CouplingFile {
                            to: Id::Str(net.subsystems[c.neighbor].id.clone()),
                            a: Some(rows(&c.a)),
                            b: c.has_input_coupling().then(|| rows(&c.b)),
                        })
                        .collect(),
                    x: Series::collapse(&s.x),
                    u: Series::collapse(&s.u),
                    d: Series::collapse(&s.d),
                    template: (s.template_x.is_some() || s.template_u.is_some()).then(|| TemplateFile {
                        x: s.template_x.as_ref().map(|v| Series::collapse(v)),
                        u: s.template_u.as_ref().map(|v| Series::collapse(v)),
                    }),
                    initial: s.initial.clone(),
                })
                .collect(),
        }
    }
}

impl NetworkFile {
    fn into_network(self) -> Result<Network, ModelError> {
        if self.subsystems.is_empty() {
            return Err(ModelError::Empty);
        }
        let horizon = match self.mode {
            Mode::Finite => self.horizon.filter(|h| *h >= 1).ok_or(ModelError::Horizon)?,
            Mode::Infinite => 1,
        };
        let steps = if self.mode == Mode::Finite { horizon } else { 1 };
        let x_len = if self.mode == Mode::Finite { horizon + 1 } else { 1 };

        let ids: Vec<String> = self.subsystems.iter().map(|s| s.id.clone().into_string()).collect();
        let mut index = HashMap::new();
        for (i, id) in ids.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(ModelError::DuplicateId(id.clone()));
            }
        }

        let dim_err = |sub: &str, t: usize, what: String, expected: String, found: String| ModelError::Dimension {
            subsystem: sub.to_string(),
            t,
            what,
            expected,
            found,
        };
        let to_mats = |series: Series<Rows>, sub: &str, what: &str, cols_hint: usize| -> Result<Vec<Array2<f64>>, ModelError> {
            series
                .expand(steps, sub, what)?
                .iter()
                .enumerate()
                .map(|(t, r)| {
                    rows_to_matrix(r, cols_hint).map_err(|e| dim_err(sub, t, what.to_string(), "rectangular".into(), e))
                })
                .collect()
        };

        // First pass: own dynamics and bounds, which fix n_i and m_i.
        let mut subs = Vec::with_capacity(ids.len());
        let mut raw_couplings = Vec::with_capacity(ids.len());
        for (sf, id) in self.subsystems.into_iter().zip(&ids) {
            let a = to_mats(sf.a, id, "A", 0)?;
            let n = a[0].nrows();
            if n == 0 {
                return Err(ModelError::Invalid { subsystem: id.clone(), what: "state dimension is zero".into() });
            }
            let b = to_mats(sf.b, id, "B", 0)?;
            let m = b[0].ncols();
            for t in 0..steps {
                if a[t].dim() != (n, n) {
                    return Err(dim_err(id, t, "A".into(), format!("{n}x{n}"), shape(&a[t])));
                }
                if b[t].dim() != (n, m) {
                    return Err(dim_err(id, t, "B".into(), format!("{n}x{m}"), shape(&b[t])));
                }
            }
            let x = sf.x.expand(x_len, id, "X")?;
            let u = sf.u.expand(steps, id, "U")?;
            let d = sf.d.expand(steps, id, "D")?;
            let check = |zs: &[Zonotope], dim: usize, what: &str| -> Result<(), ModelError> {
                for (t, z) in zs.iter().enumerate() {
                    if z.dim() != dim {
                        return Err(dim_err(id, t, what.into(), format!("dimension {dim}"), format!("dimension {}", z.dim())));
                    }
                }
                Ok(())
            };
            check(&x, n, "X")?;
            check(&u, m, "U")?;
            check(&d, n, "D")?;
            let (template_x, template_u) = match sf.template {
                Some(tf) => {
                    let tx = tf.x.map(|s| s.expand(x_len, id, "template X")).transpose()?;
                    let tu = tf.u.map(|s| s.expand(steps, id, "template U")).transpose()?;
                    if let Some(tx) = &tx {
                        check(tx, n, "template X")?;
                    }
                    if let Some(tu) = &tu {
                        check(tu, m, "template U")?;
                    }
                    (tx, tu)
                }
                None => (None, None),
            };
            if let Some(init) = &sf.initial {
                if init.dim() != n {
                    return Err(dim_err(id, 0, "initial".into(), format!("dimension {n}"), format!("dimension {}", init.dim())));
                }
            }
            raw_couplings.push(sf.couplings);
            subs.push(Subsystem { id: id.clone(), a, b, couplings: Vec::new(), x, u, d, template_x, template_u, initial: sf.initial });
        }

        // Second pass: couplings, now that every neighbour's dimensions are known.
        let dims: Vec<(usize, usize)> = subs.iter().map(|s| (s.state_dim(), s.input_dim())).collect();
        for (i, raw) in raw_couplings.into_iter().enumerate() {
            let id = ids[i].clone();
            let (n_i, _) = dims[i];
            let mut couplings: Vec<Coupling> = Vec::with_capacity(raw.len());
            for cf in raw {
                let target = cf.to.into_string();
                let j = *index
                    .get(&target)
                    .ok_or_else(|| ModelError::UnknownCoupling { subsystem: id.clone(), target: target.clone() })?;
                if j == i {
                    return Err(ModelError::SelfCoupling(id.clone()));
                }
                if couplings.iter().any(|c| c.neighbor == j) {
                    return Err(ModelError::DuplicateCoupling { subsystem: id.clone(), target });
                }
                let (n_j, m_j) = dims[j];
                let a = match cf.a {
                    Some(s) => to_mats(s, &id, &format!("A_{id},{target}"), n_j)?,
                    None => vec![Array2::zeros((n_i, n_j)); steps],
                };
                let b = match cf.b {
                    Some(s) => to_mats(s, &id, &format!("B_{id},{target}"), m_j)?,
                    None => vec![Array2::zeros((n_i, m_j)); steps],
                };
                for t in 0..steps {
                    if a[t].dim() != (n_i, n_j) {
                        return Err(dim_err(&id, t, format!("A_{id},{target}"), format!("{n_i}x{n_j}"), shape(&a[t])));
                    }
                    if b[t].dim() != (n_i, m_j) {
                        return Err(dim_err(&id, t, format!("B_{id},{target}"), format!("{n_i}x{m_j}"), shape(&b[t])));
                    }
                }
                couplings.push(Coupling { neighbor: j, a, b });
            }
            couplings.sort_by_key(|c| c.neighbor);
            subs[i].couplings = couplings;
        }
        Ok(Network { mode: self.mode, horizon, subsystems: subs })
    }
}

// ---------------------------------------------------------------------------
// Random benchmark networks

/// Shape of the random benchmark networks; the defaults are the standard benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RandomNetworkParams {
    pub field: f64,
    pub radius: f64,
    #[serde(rename = "A", with = "crate::serde_util::rows")]
    pub a: Array2<f64>,
    #[serde(rename = "B", with = "crate::serde_util::rows")]
    pub b: Array2<f64>,
    /// Coupling pattern, scaled by `λ / (1 + dist)`.
    #[serde(with = "crate::serde_util::rows")]
    pub coupling: Array2<f64>,
    #[serde(rename = "X")]
    pub x: Zonotope,
    #[serde(rename = "U")]
    pub u: Zonotope,
    #[serde(rename = "D")]
    pub d: Zonotope,
    /// `(total state dimension, λ)` pairs for benchmark sweeps.
    pub schedule: Vec<(usize, f64)>,
}

impl Default for RandomNetworkParams {
    fn default() -> Self {
        Self {
            field: 100.0,
            radius: 10.0,
            a: ndarray::array![[1.0, 1.2], [0.0, 1.0]],
            b: ndarray::array![[0.0], [0.2]],
            coupling: Array2::ones((2, 2)),
            x: Zonotope::new(Array1::zeros(2), ndarray::array![[10.0, 0.0, 10.0], [0.0, 10.0, -10.0]]).expect("finite"),
            u: Zonotope::new(Array1::zeros(1), ndarray::array![[10.0]]).expect("finite"),
            d: Zonotope::new(Array1::zeros(2), 0.2 * Array2::<f64>::eye(2)).expect("finite"),
            schedule: vec![
                (10, 1.0),
                (20, 0.1),
                (40, 0.1),
                (60, 0.1),
                (80, 0.1),
                (100, 0.1),
                (200, 0.05),
                (400, 0.05),
                (500, 0.05),
                (1000, 0.01),
                (2000, 0.001),
                (4000, 0.001),
                (10000, 0.0001),
                (20000, 0.00001),
            ],
        }
    }
}

impl RandomNetworkParams {
    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    /// `λ` paired with a total state dimension in the schedule, if listed.
    pub fn lambda_for(&self, total_dim: usize) -> Option<f64> {
        self.schedule.iter().find(|(d, _)| *d == total_dim).map(|(_, l)| *l)
    }

    fn validate(&self) -> Result<(), ModelError> {
        let n = self.a.nrows();
        let ok = self.a.ncols() == n
            && self.b.nrows() == n
            && self.coupling.dim() == (n, n)
            && self.x.dim() == n
            && self.d.dim() == n
            && self.u.dim() == self.b.ncols();
        if ok {
            Ok(())
        } else {
            Err(ModelError::Invalid { subsystem: "template".into(), what: "inconsistent dimensions".into() })
        }
    }
}

/// Points uniform in a square field; neighbours are strictly closer than the radius
/// and couple with `A_ij = λ / (1 + dist) · ones(2, 2)`.
pub fn random_network(num_subsystems: usize, lambda: f64, seed: u64) -> Network {
    random_network_with(num_subsystems, lambda, seed, &RandomNetworkParams::default()).expect("default template is valid")
}

pub fn random_points(num: usize, seed: u64, field: f64) -> Vec<[f64; 2]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..num).map(|_| [rng.gen_range(0.0..=field), rng.gen_range(0.0..=field)]).collect()
}

pub fn random_network_with(
    num_subsystems: usize,
    lambda: f64,
    seed: u64,
    params: &RandomNetworkParams,
) -> Result<Network, ModelError> {
    params.validate()?;
    let points = random_points(num_subsystems, seed, params.field);
    Ok(network_from_points(&points, lambda, params))
}

pub fn network_from_points(points: &[[f64; 2]], lambda: f64, params: &RandomNetworkParams) -> Network {
    let n = params.a.nrows();
    let m = params.b.ncols();
    let subsystems = points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let couplings = points
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .filter_map(|(j, q)| {
                    let dist = (p[0] - q[0]).hypot(p[1] - q[1]);
                    (dist < params.radius).then(|| Coupling {
                        neighbor: j,
                        a: vec![&params.coupling * (lambda / (1.0 + dist))],
                        b: vec![Array2::zeros((n, m))],
                    })
                })
                .collect();
            Subsystem {
                id: (i + 1).to_string(),
                a: vec![params.a.clone()],
                b: vec![params.b.clone()],
                couplings,
                x: vec![params.x.clone()],
                u: vec![params.u.clone()],
                d: vec![params.d.clone()],
                template_x: None,
                template_u: None,
                initial: None,
            }
        })
        .collect();
    Network { mode: Mode::Infinite, horizon: 1, subsystems }
}
