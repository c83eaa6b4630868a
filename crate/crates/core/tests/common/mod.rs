//! Random instances and independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

use contract_synth::geom::Zonotope;
use contract_synth::sysmodel::{load_network, Coupling, Mode, Network, Subsystem};
use ndarray::{array, Array1, Array2, Axis};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn config(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

pub fn load_config(name: &str) -> Network {
    load_network(config(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn zono(c: Array1<f64>, g: Array2<f64>) -> Zonotope {
    Zonotope::new(c, g).expect("finite entries")
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-scale..=scale))
}

pub fn random_zonotope(rng: &mut ChaCha8Rng, n: usize, p: usize, spread: f64) -> Zonotope {
    let c = Array1::from_shape_fn(n, |_| rng.gen_range(-spread..=spread));
    zono(c, random_matrix(rng, n, p, 1.0))
}

/// Two or three double-integrator-like subsystems (`n_i = 2`, `m_i = 1`) with
/// random dense state couplings. Finite networks use a horizon of 2 or 3.
pub fn small_network(seed: u64, mode: Mode) -> Network {
    let mut r = rng(seed);
    let count = r.gen_range(2..=3);
    let horizon = match mode {
        Mode::Finite => r.gen_range(2..=3),
        Mode::Infinite => 1,
    };
    let coupling_scale = r.gen_range(0.02..0.3);
    let subsystems = (0..count)
        .map(|i| {
            let a = array![[r.gen_range(0.8..1.1), r.gen_range(0.2..1.0)], [0.0, r.gen_range(0.8..1.1)]];
            let b = array![[0.0], [r.gen_range(0.2..1.0)]];
            let x = zono(Array1::zeros(2), Array2::from_diag(&array![r.gen_range(2.0..5.0), r.gen_range(2.0..5.0)]));
            let u = zono(Array1::zeros(1), array![[r.gen_range(1.0..4.0)]]);
            let d = zono(Array1::zeros(2), r.gen_range(0.02..0.1) * Array2::<f64>::eye(2));
            let mut couplings = Vec::new();
            for j in (0..count).filter(|&j| j != i) {
                if r.gen_bool(0.7) {
                    let aij = random_matrix(&mut r, 2, 2, coupling_scale);
                    couplings.push(Coupling { neighbor: j, a: vec![aij; horizon], b: vec![Array2::zeros((2, 1)); horizon] });
                }
            }
            let steps = match mode {
                Mode::Finite => horizon,
                Mode::Infinite => 1,
            };
            Subsystem {
                id: format!("s{i}"),
                a: vec![a; steps],
                b: vec![b; steps],
                couplings,
                x: vec![x; steps + usize::from(mode == Mode::Finite)],
                u: vec![u; steps],
                d: vec![d; steps],
                template_x: None,
                template_u: None,
                initial: None,
            }
        })
        .collect();
    let net = Network { mode, horizon, subsystems };
    // Round trip through the loader so every instance is validated.
    Network::from_json(&net.to_json()).expect("generated network is valid")
}

// ---------------------------------------------------------------------------
// Exact halfspace description of planar and spatial zonotopes

/// Facet normals of a zonotope in dimension 2 or 3: perpendiculars of single
/// generators (2-D) or cross products of generator pairs (3-D).
pub fn facet_normals(g: &Array2<f64>) -> Vec<Array1<f64>> {
    let cols: Vec<Array1<f64>> = g.columns().into_iter().map(|c| c.to_owned()).filter(|c| c.iter().any(|v| *v != 0.0)).collect();
    let mut normals = Vec::new();
    match g.nrows() {
        1 => normals.push(array![1.0]),
        2 => {
            for c in &cols {
                normals.push(array![-c[1], c[0]]);
            }
            normals.push(array![1.0, 0.0]);
            normals.push(array![0.0, 1.0]);
        }
        3 => {
            for (a, ca) in cols.iter().enumerate() {
                for cb in &cols[a + 1..] {
                    normals.push(array![
                        ca[1] * cb[2] - ca[2] * cb[1],
                        ca[2] * cb[0] - ca[0] * cb[2],
                        ca[0] * cb[1] - ca[1] * cb[0]
                    ]);
                }
            }
            for e in 0..3 {
                let mut n = Array1::zeros(3);
                n[e] = 1.0;
                normals.push(n);
            }
        }
        n => panic!("halfspace oracle supports dimensions 1 to 3, got {n}"),
    }
    normals.into_iter().filter(|n| n.dot(n) > 1e-20).collect()
}

/// Largest normalized violation of the halfspaces `|n·(x - c)| <= Σ|n·g|`;
/// nonpositive exactly when `x` lies in the zonotope (for full-dimensional sets).
pub fn halfspace_violation(z: &Zonotope, x: &Array1<f64>) -> f64 {
    let d = x - z.center();
    facet_normals(z.generators())
        .iter()
        .map(|n| {
            let scale = n.dot(n).sqrt();
            let support: f64 = z.generators().columns().into_iter().map(|g| n.dot(&g).abs()).sum();
            (n.dot(&d).abs() - support) / scale
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Infinity-norm distance from `x` to a zonotope in 1-D or 2-D: the least `t`
/// with `x ∈ Z ⊕ t·B∞`, read off the exact halfspaces of `[G, tI]`.
pub fn inf_distance(z: &Zonotope, x: &Array1<f64>) -> f64 {
    let n = z.dim();
    let d = x - z.center();
    let with_box = ndarray::concatenate![Axis(1), z.generators().view(), Array2::<f64>::eye(n).view()];
    facet_normals(&with_box)
        .iter()
        .map(|nrm| {
            let support: f64 = z.generators().columns().into_iter().map(|g| nrm.dot(&g).abs()).sum();
            let box_support: f64 = nrm.iter().map(|v| v.abs()).sum();
            (nrm.dot(&d).abs() - support) / box_support
        })
        .fold(0.0, f64::max)
}

/// Grid of `ζ ∈ [-1, 1]^p` with `steps + 1` points per axis, endpoints included.
pub fn zeta_grid(p: usize, steps: usize) -> Vec<Array1<f64>> {
    let axis: Vec<f64> = (0..=steps).map(|s| -1.0 + 2.0 * s as f64 / steps as f64).collect();
    let mut out = vec![Array1::zeros(p)];
    for k in 0..p {
        out = out
            .into_iter()
            .flat_map(|z| {
                axis.iter().map(move |&v| {
                    let mut z = z.clone();
                    z[k] = v;
                    z
                })
            })
            .collect();
    }
    out
}

/// Sup over a `ζ`-grid of the inner set of the distance to the outer set.
pub fn grid_hausdorff(outer: &Zonotope, inner: &Zonotope, steps: usize) -> f64 {
    zeta_grid(inner.num_generators(), steps)
        .iter()
        .map(|z| inf_distance(outer, &inner.point_at(z.view())))
        .fold(0.0, f64::max)
}

// ---------------------------------------------------------------------------
// Vertex enumeration for small linear programs

/// Solves `M y = r` by Gaussian elimination with partial pivoting.
pub fn solve_square(m: &Array2<f64>, r: &Array1<f64>) -> Option<Array1<f64>> {
    let n = m.nrows();
    let mut a = m.clone();
    let mut b = r.clone();
    for col in 0..n {
        let piv = (col..n).max_by(|&x, &y| a[[x, col]].abs().total_cmp(&a[[y, col]].abs()))?;
        if a[[piv, col]].abs() < 1e-10 {
            return None;
        }
        for k in 0..n {
            a.swap([col, k], [piv, k]);
        }
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[[row, col]] / a[[col, col]];
            for k in col..n {
                a[[row, k]] -= f * a[[col, k]];
            }
            b[row] -= f * b[col];
        }
    }
    let mut y = Array1::zeros(n);
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[[row, k]] * y[k]).sum();
        y[row] = (b[row] - s) / a[[row, row]];
    }
    Some(y)
}

/// `min c·x` over the bounded polytope `A x <= b` by visiting every basic
/// solution; `None` when no vertex is feasible.
pub fn vertex_enumeration_min(c: &Array1<f64>, a: &Array2<f64>, b: &Array1<f64>) -> Option<f64> {
    let n = c.len();
    let m = a.nrows();
    let mut best: Option<f64> = None;
    let mut subset: Vec<usize> = (0..n).collect();
    loop {
        let rows = Array2::from_shape_fn((n, n), |(r, k)| a[[subset[r], k]]);
        let rhs = Array1::from_shape_fn(n, |r| b[subset[r]]);
        if let Some(x) = solve_square(&rows, &rhs) {
            if (0..m).all(|r| a.row(r).dot(&x) <= b[r] + 1e-9) {
                let v = c.dot(&x);
                best = Some(best.map_or(v, |bv: f64| bv.min(v)));
            }
        }
        // Next n-subset in lexicographic order.
        let mut pos = n;
        while pos > 0 && subset[pos - 1] == m - n + pos - 1 {
            pos -= 1;
        }
        if pos == 0 {
            return best;
        }
        subset[pos - 1] += 1;
        for q in pos..n {
            subset[q] = subset[q - 1] + 1;
        }
    }
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / lx.len() as f64;
    let my = ly.iter().sum::<f64>() / ly.len() as f64;
    let cov: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let var: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    cov / var
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub mod suite;

/// Infinity-norm distance from `x` to a zonotope of any shape (flat ones
/// included): minimize `t` with `|x - c - G ζ|_∞ <= t`, `|ζ|_∞ <= 1`.
pub fn inf_distance_any(z: &Zonotope, x: &Array1<f64>) -> f64 {
    use contract_synth::lpcore::{LinExpr, LinearProgram, Sense};
    let mut lp = LinearProgram::new();
    let t = lp.add_var(0.0, f64::INFINITY);
    let zeta: Vec<_> = (0..z.num_generators()).map(|_| lp.add_var(-1.0, 1.0)).collect();
    lp.add_objective(&LinExpr::var(t), 1.0);
    for i in 0..z.dim() {
        let mut e = LinExpr::constant(z.center()[i] - x[i]);
        for (k, v) in zeta.iter().enumerate() {
            e.add_term(*v, z.generators()[[i, k]]);
        }
        let mut upper = e.clone();
        upper.add_term(t, -1.0);
        lp.add_constraint(&upper, Sense::Le, 0.0);
        let mut lower = e.scaled(-1.0);
        lower.add_term(t, -1.0);
        lp.add_constraint(&lower, Sense::Le, 0.0);
    }
    lp.solve().expect("distance LP solves").objective
}
