//! Randomized comparisons of the geometry and LP layers against independent oracles.

use contract_synth::geom::{containment_lp, directed_hausdorff, order_reduce_box, Zonotope};
use contract_synth::lpcore::{LinExpr, LinearProgram, LpStatus, Sense};
use ndarray::{Array1, Array2};
use rand::Rng;

use super::{grid_hausdorff, halfspace_violation, random_matrix, random_zonotope, rng, vertex_enumeration_min, zono};

#[derive(Debug, Default)]
pub struct Outcome {
    pub checked: usize,
    pub failures: Vec<String>,
    pub note: String,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.failures.is_empty() && self.checked > 0
    }

    pub fn summary(&self) -> String {
        let mut s = format!("{} checked, {} failed", self.checked, self.failures.len());
        if !self.note.is_empty() {
            s.push_str(&format!(", {}", self.note));
        }
        if let Some(f) = self.failures.first() {
            s.push_str(&format!("; first: {f}"));
        }
        s
    }
}

/// Every certified containment is checked on 1000 points of the inner set
/// (half uniform in `ζ`, half sign patterns) against the outer halfspaces.
pub fn containment_vs_sampling(seed: u64, pairs: usize) -> Outcome {
    let mut r = rng(seed);
    let mut out = Outcome::default();
    let mut certified = 0;
    for pair in 0..pairs {
        let n = r.gen_range(2..=3);
        let p1 = r.gen_range(1..=4);
        let inner = random_zonotope(&mut r, n, p1, 0.3);
        let outer_p = r.gen_range(n..=5);
        let mut outer = random_zonotope(&mut r, n, outer_p, 0.3);
        let grow = r.gen_range(0.5..3.0);
        outer = zono(outer.center().clone(), outer.generators() * grow);
        let cert = containment_lp(&inner, &outer).expect("containment LP solves");
        out.checked += 1;
        if !cert.feasible {
            continue;
        }
        certified += 1;
        let scale = 1.0 + outer.generators().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        for s in 0..1000 {
            let x = if s % 2 == 0 { inner.sample(&mut r) } else { inner.sample_sign_pattern(&mut r) };
            let v = halfspace_violation(&outer, &x);
            if v > 1e-7 * scale {
                out.failures.push(format!("pair {pair}: certified but point {x} is outside by {v:e}"));
                break;
            }
        }
    }
    out.note = format!("{certified} certified");
    if certified == 0 {
        out.failures.push("no pair was certified; the check is vacuous".into());
    }
    out
}

/// Directed Hausdorff distances in 1-D and 2-D against the sup of exact point
/// distances over a `ζ`-grid (which contains every vertex of the inner set).
pub fn hausdorff_vs_grid(seed: u64, instances: usize) -> Outcome {
    let mut r = rng(seed);
    let mut out = Outcome::default();
    let steps = 20;
    let mut worst: f64 = 0.0;
    for inst in 0..instances {
        let n = if inst % 2 == 0 { 1 } else { 2 };
        let (po, pi) = (r.gen_range(1..=3), r.gen_range(1..=3));
        let outer = random_zonotope(&mut r, n, po, 1.0);
        let inner = random_zonotope(&mut r, n, pi, 1.5);
        let lp = directed_hausdorff(&outer, &inner).expect("hausdorff LP solves");
        let oracle = grid_hausdorff(&outer, &inner, steps);
        // Spacing of neighbouring grid points in the infinity norm.
        let grid_step = 2.0 / steps as f64 * inner.interval_radius().iter().fold(0.0_f64, |m, v| m.max(*v));
        let tol = grid_step.max(1e-4);
        worst = worst.max((lp - oracle).abs());
        out.checked += 1;
        if (lp - oracle).abs() > tol {
            out.failures.push(format!("instance {inst} ({n}-D): LP {lp:.6} vs grid {oracle:.6} (tolerance {tol:.2e})"));
        }
    }
    out.note = format!("max gap {worst:.2e}");
    out
}

/// Boxing equals the analytic interval hull `Diag(Σ_k |G[:, k]|)` exactly.
pub fn box_vs_interval_hull(seed: u64, instances: usize) -> Outcome {
    let mut r = rng(seed);
    let mut out = Outcome::default();
    for inst in 0..instances {
        let n = r.gen_range(1..=5);
        let p = r.gen_range(0..=8);
        let z = random_zonotope(&mut r, n, p, 2.0);
        let boxed = order_reduce_box(&z);
        let mut radius = Array1::<f64>::zeros(n);
        for i in 0..n {
            for k in 0..p {
                radius[i] += z.generators()[[i, k]].abs();
            }
        }
        out.checked += 1;
        if boxed.center() != z.center() || boxed.generators() != Array2::from_diag(&radius) {
            out.failures.push(format!("instance {inst}: {boxed:?} differs from the interval hull {radius}"));
        }
    }
    out
}

fn box_constrained_program(r: &mut rand_chacha::ChaCha8Rng) -> (Array1<f64>, Array2<f64>, Array1<f64>) {
    let n = r.gen_range(1..=4);
    let extra = r.gen_range(1..=5);
    let c = Array1::from_shape_fn(n, |_| r.gen_range(-1.0..=1.0));
    let mut a = Array2::zeros((extra + 2 * n, n));
    let mut b = Array1::zeros(extra + 2 * n);
    a.slice_mut(ndarray::s![..extra, ..]).assign(&random_matrix(r, extra, n, 1.0));
    for k in 0..extra {
        b[k] = r.gen_range(-2.0..=3.0);
    }
    for k in 0..n {
        a[[extra + 2 * k, k]] = 1.0;
        a[[extra + 2 * k + 1, k]] = -1.0;
        b[extra + 2 * k] = 10.0;
        b[extra + 2 * k + 1] = 10.0;
    }
    (c, a, b)
}

/// `min c·x` over random bounded polytopes with at most four variables, through
/// the LP layer and through enumeration of all basic solutions.
pub fn lp_vs_vertex_enumeration(seed: u64, programs: usize) -> Outcome {
    let mut r = rng(seed);
    let mut out = Outcome::default();
    let mut infeasible = 0;
    for prog in 0..programs {
        let (c, a, b) = box_constrained_program(&mut r);
        let mut lp = LinearProgram::new();
        let x = lp.add_free_vars(c.len());
        let mut obj = LinExpr::zero();
        for (v, &ck) in x.iter().zip(c.iter()) {
            obj.add_term(*v, ck);
        }
        lp.add_objective(&obj, 1.0);
        for (row, &rhs) in a.rows().into_iter().zip(b.iter()) {
            let mut e = LinExpr::zero();
            for (v, &coef) in x.iter().zip(row.iter()) {
                e.add_term(*v, coef);
            }
            lp.add_constraint(&e, Sense::Le, rhs);
        }
        let sol = lp.solve().expect("LP solves");
        let oracle = vertex_enumeration_min(&c, &a, &b);
        out.checked += 1;
        match (sol.status, oracle) {
            (LpStatus::Optimal, Some(v)) if (sol.objective - v).abs() <= 1e-6 * (1.0 + v.abs()) => {}
            (LpStatus::Infeasible, None) => infeasible += 1,
            (status, oracle) => out.failures.push(format!(
                "program {prog}: solver {status:?} objective {:.9} vs enumeration {oracle:?}",
                sol.objective
            )),
        }
    }
    out.note = format!("{infeasible} infeasible");
    out
}

/// The whole suite with fixed seeds.
pub fn run_all() -> Vec<(&'static str, Outcome)> {
    vec![
        ("containment vs 1000-point sampling", containment_vs_sampling(11, 200)),
        ("directed Hausdorff vs grid", hausdorff_vs_grid(12, 100)),
        ("boxing vs interval hull", box_vs_interval_hull(13, 200)),
        ("LP vs vertex enumeration", lp_vs_vertex_enumeration(14, 20)),
    ]
}

pub fn inner_in_outer(inner: &Zonotope, outer: &Zonotope) -> bool {
    containment_lp(inner, outer).expect("containment LP solves").feasible
}
