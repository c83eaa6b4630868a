//! Row-major JSON encodings for ndarray values.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub(crate) fn to_rows(m: &Array2<f64>) -> Vec<Vec<f64>> {
    m.outer_iter().map(|r| r.to_vec()).collect()
}

pub(crate) fn from_rows(rows: Vec<Vec<f64>>, ncols_if_empty: usize) -> Result<Array2<f64>, String> {
    let n = rows.len();
    let m = rows.first().map_or(ncols_if_empty, Vec::len);
    if rows.iter().any(|r| r.len() != m) {
        return Err("ragged matrix rows".into());
    }
    Array2::from_shape_vec((n, m), rows.into_iter().flatten().collect()).map_err(|e| e.to_string())
}

/// Matrices serialize as `{"rows": r, "cols": c, "data": [[...], ...]}` so that
/// `n × 0` and `0 × k` shapes survive a round trip.
#[derive(Serialize, Deserialize)]
struct MatFile {
    rows: usize,
    cols: usize,
    data: Vec<Vec<f64>>,
}

pub(crate) mod mat {
    use super::*;

    pub fn serialize<S: Serializer>(m: &Array2<f64>, s: S) -> Result<S::Ok, S::Error> {
        MatFile { rows: m.nrows(), cols: m.ncols(), data: to_rows(m) }.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Array2<f64>, D::Error> {
        let f = MatFile::deserialize(d)?;
        if f.rows == 0 || f.cols == 0 {
            return Ok(Array2::zeros((f.rows, f.cols)));
        }
        let m = from_rows(f.data, f.cols).map_err(serde::de::Error::custom)?;
        if m.dim() != (f.rows, f.cols) {
            return Err(serde::de::Error::custom("matrix shape does not match its data"));
        }
        Ok(m)
    }
}

pub(crate) mod mats {
    use super::*;

    #[derive(Serialize, Deserialize)]
    struct Wrap(#[serde(with = "super::mat")] Array2<f64>);

    pub fn serialize<S: Serializer>(v: &[Array2<f64>], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|m| Wrap(m.clone())))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Array2<f64>>, D::Error> {
        Ok(Vec::<Wrap>::deserialize(d)?.into_iter().map(|w| w.0).collect())
    }
}

pub(crate) mod vector {
    use super::*;

    pub fn serialize<S: Serializer>(v: &Array1<f64>, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Array1<f64>, D::Error> {
        Ok(Array1::from(Vec::<f64>::deserialize(d)?))
    }
}

pub(crate) mod vectors {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[Array1<f64>], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|x| x.to_vec()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Array1<f64>>, D::Error> {
        Ok(Vec::<Vec<f64>>::deserialize(d)?.into_iter().map(Array1::from).collect())
    }
}

/// Non-finite floats as `null`, read back as `+inf`.
pub mod finite_or_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

/// Plain nested row arrays, for hand-written files.
pub mod rows {
    use super::*;

    pub fn serialize<S: Serializer>(m: &Array2<f64>, s: S) -> Result<S::Ok, S::Error> {
        to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Array2<f64>, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        from_rows(rows, 0).map_err(serde::de::Error::custom)
    }
}
