//! Age bins and per-(gender, bin) counts.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::manifest::{DatasetManifest, Gender};
use super::DatasetError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AgeBin {
    Infant,
    Toddler,
    Child,
    Teen,
    YoungAdult,
    Adult,
    MiddleAge,
    Senior,
}

impl AgeBin {
    pub const ALL: [AgeBin; 8] = [
        AgeBin::Infant,
        AgeBin::Toddler,
        AgeBin::Child,
        AgeBin::Teen,
        AgeBin::YoungAdult,
        AgeBin::Adult,
        AgeBin::MiddleAge,
        AgeBin::Senior,
    ];

    /// Inclusive bounds.
    pub fn range(self) -> (u32, u32) {
        match self {
            AgeBin::Infant => (0, 2),
            AgeBin::Toddler => (3, 6),
            AgeBin::Child => (7, 12),
            AgeBin::Teen => (13, 20),
            AgeBin::YoungAdult => (21, 32),
            AgeBin::Adult => (33, 43),
            AgeBin::MiddleAge => (44, 53),
            AgeBin::Senior => (54, 100),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            AgeBin::Infant => "0-2",
            AgeBin::Toddler => "3-6",
            AgeBin::Child => "7-12",
            AgeBin::Teen => "13-20",
            AgeBin::YoungAdult => "21-32",
            AgeBin::Adult => "33-43",
            AgeBin::MiddleAge => "44-53",
            AgeBin::Senior => "54-100",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for AgeBin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for AgeBin {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AgeBin::ALL
            .into_iter()
            .find(|b| b.label() == s)
            .ok_or_else(|| format!("unknown age bin `{s}`"))
    }
}

impl Serialize for AgeBin {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.label())
    }
}

impl<'de> Deserialize<'de> for AgeBin {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        String::deserialize(deserializer)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

pub fn assign_age_bin(age: i64) -> Result<AgeBin, DatasetError> {
    if !(0..=100).contains(&age) {
        return Err(DatasetError::OutOfRange(age));
    }
    let age = age as u32;
    Ok(AgeBin::ALL
        .into_iter()
        .find(|b| b.range().1 >= age)
        .expect("bins tile 0..=100"))
}

/// Counts for one gender, always holding all eight bins.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct CellCounts(BTreeMap<AgeBin, u64>);

impl Default for CellCounts {
    fn default() -> Self {
        Self(AgeBin::ALL.into_iter().map(|b| (b, 0)).collect())
    }
}

impl<'de> Deserialize<'de> for CellCounts {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let given = BTreeMap::<AgeBin, u64>::deserialize(deserializer)?;
        let mut counts = CellCounts::default();
        counts.0.extend(given);
        Ok(counts)
    }
}

impl CellCounts {
    pub fn get(&self, bin: AgeBin) -> u64 {
        self.0[&bin]
    }

    pub fn set(&mut self, bin: AgeBin, n: u64) {
        self.0.insert(bin, n);
    }

    pub fn total(&self) -> u64 {
        self.0.values().sum()
    }
}

/// Serialized as `{"male": {"0-2": n, ...}, "female": {...}, "unknown_gender": n}`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Demographics {
    #[serde(default)]
    pub male: CellCounts,
    #[serde(default)]
    pub female: CellCounts,
    /// Records without a binary gender label; never matched.
    #[serde(default)]
    pub unknown_gender: u64,
}

impl Demographics {
    /// Counts for `male` or `female`; `unknown` has no cells.
    pub fn cells(&self, gender: Gender) -> Option<&CellCounts> {
        match gender {
            Gender::Male => Some(&self.male),
            Gender::Female => Some(&self.female),
            Gender::Unknown => None,
        }
    }

    pub fn get(&self, gender: Gender, bin: AgeBin) -> u64 {
        self.cells(gender).map_or(0, |c| c.get(bin))
    }

    pub fn set(&mut self, gender: Gender, bin: AgeBin, n: u64) {
        match gender {
            Gender::Male => self.male.set(bin, n),
            Gender::Female => self.female.set(bin, n),
            Gender::Unknown => {}
        }
    }

    pub fn total(&self) -> u64 {
        self.male.total() + self.female.total() + self.unknown_gender
    }

    /// Every gendered cell of `self` is at most the same cell of `other`.
    pub fn le_cellwise(&self, other: &Demographics) -> bool {
        [Gender::Male, Gender::Female].into_iter().all(|g| {
            AgeBin::ALL
                .into_iter()
                .all(|b| self.get(g, b) <= other.get(g, b))
        })
    }
}

/// Every record needs an age in `[0, 100]`; gender `unknown` is tallied
/// separately.
pub fn measure_demographics(manifest: &DatasetManifest) -> Result<Demographics, DatasetError> {
    let mut d = Demographics::default();
    for r in manifest.records() {
        let age = r.age.ok_or_else(|| DatasetError::MissingLabel {
            id: r.id.clone(),
            label: "age",
        })?;
        let bin = assign_age_bin(i64::from(age))?;
        if r.gender == Gender::Unknown {
            d.unknown_gender += 1;
        } else {
            let n = d.get(r.gender, bin);
            d.set(r.gender, bin, n + 1);
        }
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bin_assignment() {
        let cases = [(2, "0-2"), (21, "21-32"), (33, "33-43"), (32, "21-32"), (0, "0-2"), (100, "54-100")];
        for (age, label) in cases {
            assert_eq!(assign_age_bin(age).unwrap().label(), label);
        }
        assert!(matches!(assign_age_bin(101), Err(DatasetError::OutOfRange(101))));
        assert!(matches!(assign_age_bin(-1), Err(DatasetError::OutOfRange(-1))));
    }

    #[test]
    fn bins_tile_range() {
        let mut next = 0;
        for b in AgeBin::ALL {
            let (lo, hi) = b.range();
            assert_eq!(lo, next);
            assert_eq!(b.label(), format!("{lo}-{hi}"));
            next = hi + 1;
        }
        assert_eq!(next, 101);
    }

    #[test]
    fn json_shape() {
        let mut d = Demographics::default();
        d.set(Gender::Male, AgeBin::Adult, 55);
        let v = serde_json::to_value(&d).unwrap();
        assert_eq!(v["male"]["33-43"], 55);
        assert_eq!(v["female"].as_object().unwrap().len(), 8);
        let keys: Vec<&String> = v["male"].as_object().unwrap().keys().collect();
        assert_eq!(keys.len(), 8);
        let back: Demographics = serde_json::from_value(v).unwrap();
        assert_eq!(back, d);
        let partial: Demographics = serde_json::from_str(r#"{"male":{"0-2":3}}"#).unwrap();
        assert_eq!(partial.get(Gender::Male, AgeBin::Infant), 3);
        assert_eq!(partial.total(), 3);
        assert!(serde_json::from_str::<Demographics>(r#"{"male":{"0-3":3}}"#).is_err());
    }
}
