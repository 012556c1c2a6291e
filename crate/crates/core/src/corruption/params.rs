//! Per-kind hyperparameters at each of the four severity levels.

use serde::ser::{Serialize, SerializeMap, Serializer};

use super::{CorruptionKind, Severity};

#[derive(Debug, Clone, PartialEq)]
pub enum ParamValue {
    Scalar(f64),
    List(Vec<f64>),
}

impl Serialize for ParamValue {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            ParamValue::Scalar(v) => serializer.serialize_f64(*v),
            ParamValue::List(vs) => vs.serialize(serializer),
        }
    }
}

/// Named parameters for one kind, in table column order.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    entries: Vec<(&'static str, ParamValue)>,
}

impl ParamVector {
    fn scalars(names: &[&'static str], values: &[f64]) -> Self {
        debug_assert_eq!(names.len(), values.len());
        Self {
            entries: names
                .iter()
                .zip(values)
                .map(|(n, v)| (*n, ParamValue::Scalar(*v)))
                .collect(),
        }
    }

    pub fn entries(&self) -> &[(&'static str, ParamValue)] {
        &self.entries
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.iter().map(|(n, _)| *n).collect()
    }

    pub fn scalar(&self, name: &str) -> Option<f64> {
        self.entries.iter().find_map(|(n, v)| match v {
            ParamValue::Scalar(x) if *n == name => Some(*x),
            _ => None,
        })
    }

    pub fn list(&self, name: &str) -> Option<&[f64]> {
        self.entries.iter().find_map(|(n, v)| match v {
            ParamValue::List(xs) if *n == name => Some(xs.as_slice()),
            _ => None,
        })
    }

    /// Positional scalar access for kernels; panics on a table/arity bug.
    pub(crate) fn at(&self, index: usize) -> f64 {
        match &self.entries[index].1 {
            ParamValue::Scalar(v) => *v,
            ParamValue::List(_) => panic!("parameter {index} is a list"),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.entries.iter().all(|(_, v)| match v {
            ParamValue::Scalar(x) => x.is_finite(),
            ParamValue::List(xs) => xs.iter().all(|x| x.is_finite()),
        })
    }
}

impl Serialize for ParamVector {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.entries.len()))?;
        for (name, value) in &self.entries {
            map.serialize_entry(name, value)?;
        }
        map.end()
    }
}

const C7: [&str; 7] = ["c1", "c2", "c3", "c4", "c5", "c6", "c7"];

pub(crate) fn lookup(kind: CorruptionKind, severity: Severity) -> ParamVector {
    use CorruptionKind::*;
    let i = severity.index();
    let one = |name: &'static str, row: [f64; 4]| ParamVector::scalars(&[name], &[row[i]]);
    match kind {
        GaussianNoise => one("sigma", [0.13, 0.22, 0.31, 0.40]),
        ShotNoise => one("c", [17.25, 31.50, 45.75, 59.43]),
        ImpulseNoise => one("c", [0.09, 0.15, 0.21, 0.27]),
        SpeckleNoise => one("c", [0.26, 0.38, 0.49, 0.60]),
        DefocusBlur => ParamVector::scalars(
            &["radius", "alias_blur"],
            &[[4.75, 0.20], [6.50, 0.30], [8.25, 0.40], [9.93, 0.50]][i],
        ),
        GlassBlur => ParamVector::scalars(
            &["sigma", "max_delta", "iterations"],
            &[
                [0.90, 1.0, 2.0],
                [1.10, 2.0, 2.0],
                [1.30, 3.0, 2.0],
                [1.49, 3.0, 2.0],
            ][i],
        ),
        MotionBlur => ParamVector::scalars(
            &["radius", "sigma"],
            &[[12.50, 6.00], [15.00, 9.00], [17.50, 12.00], [19.90, 14.88]][i],
        ),
        ZoomBlur => {
            let rows: [&[f64]; 4] = [
                &[1.00, 1.01, 1.03, 1.04, 1.06, 1.07, 1.09, 1.10],
                &[1.00, 1.02, 1.04, 1.06, 1.08, 1.10, 1.12, 1.14, 1.16],
                &[1.00, 1.02, 1.05, 1.07, 1.10, 1.12, 1.15, 1.17, 1.20],
                &[1.00, 1.03, 1.06, 1.09, 1.12, 1.15, 1.18, 1.21, 1.24],
            ];
            ParamVector {
                entries: vec![("zoom_factors", ParamValue::List(rows[i].to_vec()))],
            }
        }
        GaussianBlur => one("sigma", [2.25, 3.50, 4.75, 5.95]),
        Snow => ParamVector::scalars(
            &C7,
            &[
                [0.21, 0.30, 3.38, 0.59, 10.50, 5.00, 0.94],
                [0.33, 0.30, 3.75, 0.68, 11.00, 6.00, 1.08],
                [0.44, 0.30, 4.12, 0.76, 11.50, 7.00, 1.21],
                [0.55, 0.30, 4.48, 0.85, 11.98, 7.96, 1.34],
            ][i],
        ),
        Frost => ParamVector::scalars(
            &C7[..2],
            &[[0.90, 0.49], [0.80, 0.57], [0.70, 0.66], [0.60, 0.75]][i],
        ),
        Fog => ParamVector::scalars(
            &C7[..2],
            &[[1.88, 1.85], [2.25, 1.70], [2.62, 1.55], [2.98, 1.41]][i],
        ),
        Spatter => ParamVector::scalars(
            &C7[..6],
            &[
                [0.66, 0.33, 1.75, 0.68, 0.82, 0.00],
                [0.66, 0.35, 2.50, 0.67, 1.05, 0.00],
                [0.67, 0.38, 3.25, 0.67, 1.27, 0.00],
                [0.67, 0.40, 3.97, 0.66, 1.49, 0.00],
            ][i],
        ),
        Brightness => one("c", [0.20, 0.30, 0.40, 0.50]),
        Contrast => one("c", [0.31, 0.23, 0.14, 0.05]),
        Saturate => ParamVector::scalars(
            &C7[..2],
            &[[5.22, 0.05], [10.15, 0.10], [15.07, 0.15], [19.80, 0.20]][i],
        ),
        Elastic => ParamVector::scalars(
            &C7[..3],
            &[
                [0.80, 4.80, 2.16],
                [1.60, 3.20, 1.76],
                [2.40, 1.60, 1.36],
                [3.17, 0.06, 0.98],
            ][i],
        ),
        Pixelate => one("c", [0.46, 0.33, 0.19, 0.06]),
        Jpeg => one("quality", [20.0, 16.0, 12.0, 7.0]),
    }
}
