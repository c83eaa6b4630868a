//! Zonotopes `Z(c, G) = { c + G z : |z|_inf <= 1 }` and the set operations the
//! synthesis pipeline needs.
//!
//! A zonotope with zero generators is the singleton `{c}`; zero columns are kept
//! as-is. Nothing in this module special-cases either.

mod containment;
mod membership;
mod polygon;

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lpcore::LpError;

pub use containment::{
    containment_lp, directed_hausdorff, encode_containment, weighted_containment_rows,
    ContainmentCertificate, ContainmentRows, SymZonotope, CONTAINMENT_TOL,
};
pub use membership::{contains_point, contains_point_lp, contains_point_with_tol, Membership, PointLocator, MEMBERSHIP_TOL};
pub use polygon::{polygon_area, polygon_vertices_2d, vertices_csv, zonogon_area};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeomError {
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch { what: &'static str, expected: usize, found: usize },
    #[error("negative scaling factor {value} at generator {index}")]
    NegativeScale { index: usize, value: f64 },
    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),
    #[error("operation requires a planar zonotope, got dimension {0}")]
    NotPlanar(usize),
    #[error(transparent)]
    Lp(#[from] LpError),
}

pub(crate) fn check_dim(what: &'static str, expected: usize, found: usize) -> Result<(), GeomError> {
    if expected == found {
        Ok(())
    } else {
        Err(GeomError::DimensionMismatch { what, expected, found })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ZonotopeRepr", into = "ZonotopeRepr")]
pub struct Zonotope {
    center: Array1<f64>,
    generators: Array2<f64>,
}

/// JSON shape: generators are row-major, one inner array per state coordinate.
#[derive(Serialize, Deserialize)]
struct ZonotopeRepr {
    center: Vec<f64>,
    #[serde(default)]
    generators: Vec<Vec<f64>>,
}

impl TryFrom<ZonotopeRepr> for Zonotope {
    type Error = GeomError;

    fn try_from(r: ZonotopeRepr) -> Result<Self, Self::Error> {
        let n = r.center.len();
        let p = r.generators.first().map_or(0, Vec::len);
        if !r.generators.is_empty() {
            check_dim("generator rows", n, r.generators.len())?;
        }
        let mut g = Array2::zeros((n, p));
        for (i, row) in r.generators.iter().enumerate() {
            check_dim("generator row length", p, row.len())?;
            for (j, v) in row.iter().enumerate() {
                g[[i, j]] = *v;
            }
        }
        Zonotope::new(Array1::from(r.center), g)
    }
}

impl From<Zonotope> for ZonotopeRepr {
    fn from(z: Zonotope) -> Self {
        ZonotopeRepr {
            center: z.center.to_vec(),
            generators: z.generators.outer_iter().map(|r| r.to_vec()).collect(),
        }
    }
}

impl Zonotope {
    pub fn new(center: Array1<f64>, generators: Array2<f64>) -> Result<Self, GeomError> {
        check_dim("generator rows", center.len(), generators.nrows())?;
        if center.iter().any(|v| !v.is_finite()) {
            return Err(GeomError::NonFinite("center"));
        }
        if generators.iter().any(|v| !v.is_finite()) {
            return Err(GeomError::NonFinite("generators"));
        }
        Ok(Self { center, generators })
    }

    /// The singleton `{c}`.
    pub fn point(center: Array1<f64>) -> Self {
        let n = center.len();
        Self { center, generators: Array2::zeros((n, 0)) }
    }

    /// Axis-aligned box with the given half-widths.
    pub fn from_box(center: Array1<f64>, radius: &Array1<f64>) -> Result<Self, GeomError> {
        check_dim("box radius", center.len(), radius.len())?;
        Self::new(center, Array2::from_diag(&radius.mapv(f64::abs)))
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn num_generators(&self) -> usize {
        self.generators.ncols()
    }

    /// `p / n`; zero for the zero-dimensional zonotope.
    pub fn order(&self) -> f64 {
        if self.dim() == 0 {
            0.0
        } else {
            self.num_generators() as f64 / self.dim() as f64
        }
    }

    pub fn center(&self) -> &Array1<f64> {
        &self.center
    }

    pub fn generators(&self) -> &Array2<f64> {
        &self.generators
    }

    /// `c + G z` for a coordinate vector `z`.
    pub fn point_at(&self, z: ArrayView1<f64>) -> Array1<f64> {
        &self.center + &self.generators.dot(&z)
    }

    /// Row sums of `|G|`: the half-widths of the interval hull. Summed column by
    /// column so the result does not depend on ndarray's reduction order.
    pub fn interval_radius(&self) -> Array1<f64> {
        let mut r = Array1::zeros(self.dim());
        for col in self.generators.columns() {
            r.zip_mut_with(&col, |acc, g| *acc += g.abs());
        }
        r
    }

    /// Uniform `z` in the unit cube mapped through the generators.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Array1<f64> {
        let z = Array1::from_shape_fn(self.num_generators(), |_| rng.gen_range(-1.0..=1.0));
        self.point_at(z.view())
    }

    /// A random vertex-pattern point (`z` in `{-1, 1}^p`).
    pub fn sample_sign_pattern<R: Rng + ?Sized>(&self, rng: &mut R) -> Array1<f64> {
        let z = Array1::from_shape_fn(self.num_generators(), |_| if rng.gen::<bool>() { 1.0 } else { -1.0 });
        self.point_at(z.view())
    }

    /// Scales every generator by `factor` about the center.
    pub fn scale_about_center(&self, factor: f64) -> Zonotope {
        Zonotope { center: self.center.clone(), generators: &self.generators * factor }
    }

    /// Drops generator columns whose entries are all exactly zero.
    pub fn without_zero_generators(&self) -> Zonotope {
        let keep: Vec<usize> = (0..self.num_generators())
            .filter(|&j| self.generators.column(j).iter().any(|v| *v != 0.0))
            .collect();
        let g = self.generators.select(Axis(1), &keep);
        Zonotope { center: self.center.clone(), generators: g }
    }
}

/// `A Z + b`.
pub fn affine_map(a: ArrayView2<f64>, b: ArrayView1<f64>, z: &Zonotope) -> Result<Zonotope, GeomError> {
    check_dim("affine map columns", z.dim(), a.ncols())?;
    check_dim("affine offset", a.nrows(), b.len())?;
    Zonotope::new(a.dot(&z.center) + b, a.dot(&z.generators))
}

/// `A Z` (no offset).
pub fn linear_map(a: ArrayView2<f64>, z: &Zonotope) -> Result<Zonotope, GeomError> {
    let b = Array1::zeros(a.nrows());
    affine_map(a, b.view(), z)
}

pub fn minkowski_sum(z1: &Zonotope, z2: &Zonotope) -> Result<Zonotope, GeomError> {
    check_dim("minkowski sum", z1.dim(), z2.dim())?;
    let n = z1.dim();
    let (p1, p2) = (z1.num_generators(), z2.num_generators());
    let mut g = Array2::zeros((n, p1 + p2));
    g.slice_mut(s![.., ..p1]).assign(&z1.generators);
    g.slice_mut(s![.., p1..]).assign(&z2.generators);
    Zonotope::new(&z1.center + &z2.center, g)
}

/// `Z(c, G Diag(alpha))`.
pub fn scale_generators(z: &Zonotope, alpha: ArrayView1<f64>) -> Result<Zonotope, GeomError> {
    check_dim("generator scaling", z.num_generators(), alpha.len())?;
    if let Some((index, &value)) = alpha.iter().enumerate().find(|(_, v)| **v < 0.0) {
        return Err(GeomError::NegativeScale { index, value });
    }
    let mut g = z.generators.clone();
    for (mut col, a) in g.columns_mut().into_iter().zip(alpha.iter()) {
        col *= *a;
    }
    Zonotope::new(z.center.clone(), g)
}

/// Interval hull `Z(c, Diag(sum_k |G[:, k]|))`; order exactly one.
pub fn order_reduce_box(z: &Zonotope) -> Zonotope {
    Zonotope { center: z.center.clone(), generators: Array2::from_diag(&z.interval_radius()) }
}

/// Boxing reduction to a target order: the `(order - 1) n` generators with the
/// largest `|g|_1 - |g|_inf` are kept and the rest are replaced by their interval
/// hull. Returns the kept column indices alongside the reduced zonotope.
pub fn order_reduce_box_to(z: &Zonotope, order: usize) -> (Zonotope, Vec<usize>) {
    let n = z.dim();
    let p = z.num_generators();
    let order = order.max(1);
    if p <= order * n {
        return (z.clone(), (0..p).collect());
    }
    let keep_count = (order - 1) * n;
    let kept = boxing_keep_set(&z.generators, keep_count);
    let mut boxed_radius = Array1::<f64>::zeros(n);
    for j in (0..p).filter(|j| !kept.contains(j)) {
        boxed_radius += &z.generators.column(j).mapv(f64::abs);
    }
    let mut g = Array2::zeros((n, keep_count + n));
    for (c, &j) in kept.iter().enumerate() {
        g.column_mut(c).assign(&z.generators.column(j));
    }
    g.slice_mut(s![.., keep_count..]).assign(&Array2::from_diag(&boxed_radius));
    (Zonotope { center: z.center.clone(), generators: g }, kept)
}

/// Indices of the `keep` generators ranked highest by `|g|_1 - |g|_inf`, ties by index.
pub(crate) fn boxing_keep_set(g: &Array2<f64>, keep: usize) -> Vec<usize> {
    let mut score: Vec<(usize, f64)> = g
        .columns()
        .into_iter()
        .enumerate()
        .map(|(j, col)| {
            let l1: f64 = col.iter().map(|v| v.abs()).sum();
            let linf = col.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            (j, l1 - linf)
        })
        .collect();
    score.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut kept: Vec<usize> = score.into_iter().take(keep).map(|(j, _)| j).collect();
    kept.sort_unstable();
    kept
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn z(c: Array1<f64>, g: Array2<f64>) -> Zonotope {
        Zonotope::new(c, g).unwrap()
    }

    #[test]
    fn affine_identity_and_scaling() {
        let src = z(array![1.0, 2.0], Array2::eye(2));
        let out = affine_map(Array2::eye(2).view(), array![0.0, 0.0].view(), &src).unwrap();
        assert_eq!(out, src);

        let unit = z(array![0.0, 0.0], Array2::eye(2));
        let out = affine_map(array![[2.0, 0.0], [0.0, 3.0]].view(), array![1.0, 0.0].view(), &unit).unwrap();
        assert_eq!(out.center(), &array![1.0, 0.0]);
        assert_eq!(out.generators(), &array![[2.0, 0.0], [0.0, 3.0]]);
    }

    #[test]
    fn affine_projection_matches_vertex_hull() {
        let unit = z(array![0.0, 0.0], Array2::eye(2));
        let out = affine_map(array![[1.0, 1.0]].view(), array![0.0].view(), &unit).unwrap();
        assert_eq!(out.generators(), &array![[1.0, 1.0]]);
        // hull of the images of the four corners
        let images: Vec<f64> = [(-1.0, -1.0), (-1.0, 1.0), (1.0, -1.0), (1.0, 1.0)]
            .iter()
            .map(|(a, b)| a + b)
            .collect();
        let lo = images.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = images.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let r = out.interval_radius()[0];
        assert_eq!((out.center()[0] - r, out.center()[0] + r), (lo, hi));
    }

    #[test]
    fn affine_rejects_bad_shapes() {
        let unit = z(array![0.0, 0.0], Array2::eye(2));
        assert!(matches!(
            affine_map(Array2::eye(3).view(), array![0.0, 0.0, 0.0].view(), &unit),
            Err(GeomError::DimensionMismatch { .. })
        ));
        assert!(affine_map(Array2::eye(2).view(), array![0.0].view(), &unit).is_err());
    }

    #[test]
    fn minkowski_examples() {
        let a = z(array![0.0], array![[1.0]]);
        let b = z(array![0.0], array![[2.0]]);
        let s = minkowski_sum(&a, &b).unwrap();
        assert_eq!(s.generators(), &array![[1.0, 2.0]]);
        assert_eq!(s.interval_radius()[0], 3.0);

        let c = z(array![1.0, -1.0], array![[1.0, 0.5], [0.0, 2.0]]);
        let id = Zonotope::point(array![0.0, 0.0]);
        assert_eq!(minkowski_sum(&c, &id).unwrap(), c);

        let s = minkowski_sum(&z(array![1.0], array![[1.0]]), &z(array![2.0], array![[0.5]])).unwrap();
        assert_eq!(s.center(), &array![3.0]);
        let r = s.interval_radius()[0];
        assert_eq!((3.0 - r, 3.0 + r), (1.5, 4.5));
        assert!(minkowski_sum(&a, &c).is_err());
    }

    #[test]
    fn scaling_examples() {
        let g = array![[1.0, 2.0], [3.0, -1.0]];
        let base = z(array![0.5, 0.0], g.clone());
        assert_eq!(scale_generators(&base, array![1.0, 1.0].view()).unwrap(), base);
        let zero = scale_generators(&base, array![0.0, 0.0].view()).unwrap();
        assert!(zero.generators().iter().all(|v| *v == 0.0));
        assert_eq!(zero.center(), base.center());

        let unit = z(array![0.0, 0.0], Array2::eye(2));
        let out = scale_generators(&unit, array![2.0, 0.5].view()).unwrap();
        assert_eq!(out.generators(), &array![[2.0, 0.0], [0.0, 0.5]]);
        assert!(matches!(
            scale_generators(&unit, array![1.0, -0.1].view()),
            Err(GeomError::NegativeScale { index: 1, .. })
        ));
        assert!(scale_generators(&unit, array![1.0].view()).is_err());
    }

    #[test]
    fn boxing_examples() {
        let unit = z(array![0.0, 0.0], Array2::eye(2));
        assert_eq!(order_reduce_box(&unit), unit);
        let rot = z(array![0.0, 0.0], array![[1.0, 1.0], [1.0, -1.0]]);
        assert_eq!(order_reduce_box(&rot).generators(), &array![[2.0, 0.0], [0.0, 2.0]]);
        let one_d = z(array![5.0], array![[1.0, -2.0, 0.5]]);
        let b = order_reduce_box(&one_d);
        assert_eq!(b.center(), &array![5.0]);
        assert_eq!(b.generators(), &array![[3.5]]);
        assert_eq!(b.order(), 1.0);
    }

    #[test]
    fn boxing_to_higher_order_keeps_largest_non_axis_generators() {
        let g = array![[1.0, 0.1, 3.0, 0.0, 1.0], [1.0, 0.0, 0.0, 0.2, -2.0]];
        let zz = z(array![0.0, 0.0], g);
        let (red, kept) = order_reduce_box_to(&zz, 2);
        assert_eq!(red.num_generators(), 4);
        assert_eq!(kept, vec![0, 4]);
        assert_eq!(red.interval_radius(), zz.interval_radius());
        let (same, _) = order_reduce_box_to(&zz, 3);
        assert_eq!(same, zz);
    }

    #[test]
    fn json_round_trip_and_singleton() {
        let zz = z(array![1.0, 2.0], array![[1.0, 0.0, 2.0], [0.0, 1.0, -1.0]]);
        let text = serde_json::to_string(&zz).unwrap();
        assert_eq!(text, r#"{"center":[1.0,2.0],"generators":[[1.0,0.0,2.0],[0.0,1.0,-1.0]]}"#);
        let back: Zonotope = serde_json::from_str(&text).unwrap();
        assert_eq!(back, zz);

        let p: Zonotope = serde_json::from_str(r#"{"center":[3.0],"generators":[[]]}"#).unwrap();
        assert_eq!(p.num_generators(), 0);
        let p: Zonotope = serde_json::from_str(r#"{"center":[3.0, 1.0]}"#).unwrap();
        assert_eq!(p.num_generators(), 0);
        assert!(serde_json::from_str::<Zonotope>(r#"{"center":[3.0],"generators":[[1.0],[2.0]]}"#).is_err());
    }
}
