//! Vertex enumeration for planar zonotopes (zonogons).

use ndarray::Array2;

use super::{GeomError, Zonotope};

/// Counter-clockwise vertices, starting at the vertex with the largest `y`
/// (ties broken by largest `x`). A segment yields two vertices, a point one.
pub fn polygon_vertices_2d(z: &Zonotope) -> Result<Vec<[f64; 2]>, GeomError> {
    if z.dim() != 2 {
        return Err(GeomError::NotPlanar(z.dim()));
    }
    let c = [z.center()[0], z.center()[1]];
    let scale = z.generators().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let eps = 1e-12 * scale.max(1.0);

    // Orient every generator into the half-plane of angles [0, pi).
    let mut gens: Vec<[f64; 2]> = z
        .generators()
        .columns()
        .into_iter()
        .filter_map(|col| {
            let (x, y) = (col[0], col[1]);
            if x.abs() <= eps && y.abs() <= eps {
                None
            } else if y < 0.0 || (y == 0.0 && x < 0.0) {
                Some([-x, -y])
            } else {
                Some([x, y])
            }
        })
        .collect();
    gens.sort_by(|a, b| a[1].atan2(a[0]).total_cmp(&b[1].atan2(b[0])));

    // Merge parallel generators.
    let mut merged: Vec<[f64; 2]> = Vec::with_capacity(gens.len());
    for g in gens {
        if let Some(last) = merged.last_mut() {
            let cross = last[0] * g[1] - last[1] * g[0];
            let norms = (last[0].hypot(last[1])) * g[0].hypot(g[1]);
            if cross.abs() <= 1e-12 * norms {
                last[0] += g[0];
                last[1] += g[1];
                continue;
            }
        }
        merged.push(g);
    }
    if merged.is_empty() {
        return Ok(vec![c]);
    }

    // Start at the lowest (then leftmost) vertex and walk counter-clockwise.
    let mut p = [c[0], c[1]];
    for g in &merged {
        p[0] -= g[0];
        p[1] -= g[1];
    }
    let mut verts = Vec::with_capacity(2 * merged.len());
    for sign in [2.0, -2.0] {
        for g in &merged {
            verts.push(p);
            p[0] += sign * g[0];
            p[1] += sign * g[1];
        }
    }
    if merged.len() == 1 {
        verts.truncate(2);
    }
    let tie = 1e-12 * (1.0 + scale);
    let start = (0..verts.len())
        .reduce(|best, i| {
            let (b, v) = (verts[best], verts[i]);
            if v[1] > b[1] + tie || ((v[1] - b[1]).abs() <= tie && v[0] > b[0]) {
                i
            } else {
                best
            }
        })
        .unwrap_or(0);
    verts.rotate_left(start);
    Ok(verts)
}

/// `x,y` CSV with a header, closing the ring by repeating the first vertex.
pub fn vertices_csv(vertices: &[[f64; 2]]) -> String {
    let mut out = String::from("x,y\n");
    for v in vertices.iter().chain(vertices.first()) {
        out.push_str(&format!("{},{}\n", v[0], v[1]));
    }
    out
}

/// Shoelace area of a simple polygon.
pub fn polygon_area(vertices: &[[f64; 2]]) -> f64 {
    let n = vertices.len();
    let twice: f64 = (0..n)
        .map(|i| {
            let (a, b) = (vertices[i], vertices[(i + 1) % n]);
            a[0] * b[1] - a[1] * b[0]
        })
        .sum();
    0.5 * twice.abs()
}

/// Closed-form zonogon area `4 Σ_{j<k} |det[g_j, g_k]|` (unit-cube coordinates).
pub fn zonogon_area(g: &Array2<f64>) -> f64 {
    let p = g.ncols();
    let mut acc = 0.0;
    for j in 0..p {
        for k in (j + 1)..p {
            acc += (g[[0, j]] * g[[1, k]] - g[[1, j]] * g[[0, k]]).abs();
        }
    }
    4.0 * acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array1};

    #[test]
    fn unit_square_order() {
        let z = Zonotope::new(array![0.0, 0.0], Array2::eye(2)).unwrap();
        let v = polygon_vertices_2d(&z).unwrap();
        assert_eq!(v, vec![[1.0, 1.0], [-1.0, 1.0], [-1.0, -1.0], [1.0, -1.0]]);
        assert_eq!(vertices_csv(&v).lines().count(), 6);
    }

    #[test]
    fn segment_and_point() {
        let seg = Zonotope::new(array![0.0, 0.0], array![[1.0], [0.0]]).unwrap();
        assert_eq!(polygon_vertices_2d(&seg).unwrap(), vec![[1.0, 0.0], [-1.0, 0.0]]);
        let p = Zonotope::point(array![2.0, 3.0]);
        assert_eq!(polygon_vertices_2d(&p).unwrap(), vec![[2.0, 3.0]]);
    }

    #[test]
    fn hexagon_is_counter_clockwise_and_convex() {
        let z = Zonotope::new(array![1.0, -1.0], array![[1.0, 0.0, 0.5], [0.0, 1.0, 0.5]]).unwrap();
        let v = polygon_vertices_2d(&z).unwrap();
        assert_eq!(v.len(), 6);
        for i in 0..6 {
            let (a, b, c) = (v[i], v[(i + 1) % 6], v[(i + 2) % 6]);
            let cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]);
            assert!(cross > 0.0);
        }
        assert!((polygon_area(&v) - zonogon_area(z.generators())).abs() < 1e-12);
    }

    #[test]
    fn parallel_generators_merge() {
        let z = Zonotope::new(Array1::zeros(2), array![[1.0, -2.0, 0.0], [1.0, -2.0, 1.0]]).unwrap();
        assert_eq!(polygon_vertices_2d(&z).unwrap().len(), 4);
    }

    #[test]
    fn rejects_non_planar() {
        let z = Zonotope::new(Array1::zeros(3), Array2::eye(3)).unwrap();
        assert!(matches!(polygon_vertices_2d(&z), Err(GeomError::NotPlanar(3))));
    }
}
