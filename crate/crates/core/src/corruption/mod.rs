//! Severity-parameterized common corruptions.
//!
//! Nineteen kinds across noise, blur, weather, photometric and digital families.
//! Kernel semantics follow the usual common-corruptions definitions; parameter
//! values come from a fixed four-level table ([`resolve_params`]). Every kernel
//! is a pure function of `(image, spec)`: randomness is drawn from
//! [`CounterRng`](crate::rng::CounterRng) keyed by seed, kind and sample index.

mod edges;
mod filters;
mod fractal;
mod kernels;
mod params;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::image::Image;

pub use params::{ParamValue, ParamVector};

#[derive(Debug, Error, PartialEq)]
pub enum CorruptionError {
    #[error("unsupported severity {0}; expected one of 0.25, 0.5, 0.75, 0.99")]
    UnsupportedSeverity(f64),
    #[error("unknown corruption kind `{0}`")]
    UnknownKind(String),
    #[error("{kind} needs at least {min}x{min} pixels, image is {width}x{height}")]
    ImageTooSmall {
        kind: CorruptionKind,
        width: usize,
        height: usize,
        min: usize,
    },
    #[error("jpeg round trip failed: {0}")]
    EncodeFailure(String),
}

/// The four evaluated severity levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Severity {
    Quarter,
    Half,
    ThreeQuarters,
    Max,
}

impl Severity {
    pub const ALL: [Severity; 4] = [
        Severity::Quarter,
        Severity::Half,
        Severity::ThreeQuarters,
        Severity::Max,
    ];

    pub fn from_f64(value: f64) -> Result<Self, CorruptionError> {
        Self::ALL
            .into_iter()
            .find(|s| s.value() == value)
            .ok_or(CorruptionError::UnsupportedSeverity(value))
    }

    pub fn value(self) -> f64 {
        match self {
            Severity::Quarter => 0.25,
            Severity::Half => 0.5,
            Severity::ThreeQuarters => 0.75,
            Severity::Max => 0.99,
        }
    }

    pub(crate) fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value())
    }
}

impl Serialize for Severity {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_f64(self.value())
    }
}

impl<'de> Deserialize<'de> for Severity {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let v = f64::deserialize(deserializer)?;
        Severity::from_f64(v).map_err(serde::de::Error::custom)
    }
}

macro_rules! kinds {
    ($($variant:ident => $name:literal),+ $(,)?) => {
        /// Corruption kinds, in table order.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum CorruptionKind { $($variant),+ }

        impl CorruptionKind {
            pub const ALL: [CorruptionKind; 19] = [$(CorruptionKind::$variant),+];

            pub fn name(self) -> &'static str {
                match self { $(CorruptionKind::$variant => $name),+ }
            }
        }

        impl FromStr for CorruptionKind {
            type Err = CorruptionError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s.trim() {
                    $($name => Ok(CorruptionKind::$variant),)+
                    other => Err(CorruptionError::UnknownKind(other.to_string())),
                }
            }
        }
    };
}

kinds! {
    GaussianNoise => "gaussian_noise",
    ShotNoise => "shot_noise",
    ImpulseNoise => "impulse_noise",
    SpeckleNoise => "speckle_noise",
    DefocusBlur => "defocus_blur",
    GlassBlur => "glass_blur",
    MotionBlur => "motion_blur",
    ZoomBlur => "zoom_blur",
    GaussianBlur => "gaussian_blur",
    Snow => "snow",
    Frost => "frost",
    Fog => "fog",
    Spatter => "spatter",
    Brightness => "brightness",
    Contrast => "contrast",
    Saturate => "saturate",
    Elastic => "elastic",
    Pixelate => "pixelate",
    Jpeg => "jpeg",
}

impl CorruptionKind {
    pub(crate) fn index(self) -> u64 {
        self as u64
    }

    /// Kinds whose output depends on the seed.
    pub fn is_stochastic(self) -> bool {
        use CorruptionKind::*;
        matches!(
            self,
            GaussianNoise
                | ShotNoise
                | ImpulseNoise
                | SpeckleNoise
                | GlassBlur
                | MotionBlur
                | Snow
                | Frost
                | Fog
                | Spatter
                | Elastic
        )
    }
}

impl fmt::Display for CorruptionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl Serialize for CorruptionKind {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for CorruptionKind {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CorruptionSpec {
    pub kind: CorruptionKind,
    pub severity: Severity,
    pub seed: u64,
}

impl CorruptionSpec {
    pub fn new(kind: CorruptionKind, severity: f64, seed: u64) -> Result<Self, CorruptionError> {
        Ok(Self {
            kind,
            severity: Severity::from_f64(severity)?,
            seed,
        })
    }

    /// `kind@severity`, the per-corruption key used for normalization.
    pub fn label(&self) -> String {
        format!("{}@{}", self.kind, self.severity)
    }
}

impl fmt::Display for CorruptionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}#{}", self.kind, self.severity, self.seed)
    }
}

/// Exact table parameters for `kind` at `severity`; no interpolation.
pub fn resolve_params(kind: CorruptionKind, severity: f64) -> Result<ParamVector, CorruptionError> {
    Ok(params::lookup(kind, Severity::from_f64(severity)?))
}

/// Like [`resolve_params`], parsing the kind name first.
pub fn resolve_params_by_name(kind: &str, severity: f64) -> Result<ParamVector, CorruptionError> {
    resolve_params(kind.parse()?, severity)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CatalogEntry {
    pub kind: CorruptionKind,
    pub severities: [Severity; 4],
}

/// All 19 kinds in table order, each with the four supported severities.
pub fn corruption_catalog() -> Vec<CatalogEntry> {
    CorruptionKind::ALL
        .iter()
        .map(|&kind| CatalogEntry {
            kind,
            severities: Severity::ALL,
        })
        .collect()
}

/// Applies `spec` to `image`, returning a new image of the same shape.
pub fn apply_corruption(image: &Image, spec: &CorruptionSpec) -> Result<Image, CorruptionError> {
    let params = params::lookup(spec.kind, spec.severity);
    let min = kernels::min_side(spec.kind, &params);
    if image.width() < min || image.height() < min {
        return Err(CorruptionError::ImageTooSmall {
            kind: spec.kind,
            width: image.width(),
            height: image.height(),
            min,
        });
    }
    kernels::apply(image, spec, &params)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resolve_examples() {
        let p = resolve_params(CorruptionKind::GaussianNoise, 0.25).unwrap();
        assert_eq!(p.scalar("sigma"), Some(0.13));
        let p = resolve_params(CorruptionKind::Jpeg, 0.99).unwrap();
        assert_eq!(p.scalar("quality"), Some(7.0));
        assert_eq!(
            resolve_params(CorruptionKind::GaussianNoise, 0.30),
            Err(CorruptionError::UnsupportedSeverity(0.30))
        );
        let snow = resolve_params(CorruptionKind::Snow, 0.5).unwrap();
        let values: Vec<f64> = (0..7).map(|i| snow.at(i)).collect();
        assert_eq!(values, [0.33, 0.30, 3.75, 0.68, 11.00, 6.00, 1.08]);
        assert_eq!(snow.names(), ["c1", "c2", "c3", "c4", "c5", "c6", "c7"]);
    }

    #[test]
    fn unknown_kind() {
        assert_eq!(
            resolve_params_by_name("adversarial", 0.25),
            Err(CorruptionError::UnknownKind("adversarial".into()))
        );
    }

    #[test]
    fn catalog_shape() {
        let cat = corruption_catalog();
        assert_eq!(cat.len(), 19);
        assert_eq!(cat[0].kind, CorruptionKind::GaussianNoise);
        assert_eq!(cat[18].kind, CorruptionKind::Jpeg);
        for entry in &cat {
            let levels: Vec<f64> = entry.severities.iter().map(|s| s.value()).collect();
            assert_eq!(levels, [0.25, 0.5, 0.75, 0.99]);
        }
        assert_eq!(cat, corruption_catalog());
    }

    #[test]
    fn kind_names_round_trip() {
        for kind in CorruptionKind::ALL {
            assert_eq!(kind.name().parse::<CorruptionKind>().unwrap(), kind);
        }
    }

    #[test]
    fn params_serialize_in_column_order() {
        let p = resolve_params(CorruptionKind::DefocusBlur, 0.99).unwrap();
        assert_eq!(
            serde_json::to_string(&p).unwrap(),
            r#"{"radius":9.93,"alias_blur":0.5}"#
        );
        let z = resolve_params(CorruptionKind::ZoomBlur, 0.25).unwrap();
        assert_eq!(z.list("zoom_factors").unwrap().len(), 8);
    }
}
