use std::fmt;
use std::str::FromStr;

use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};

use crate::Scalar;

use super::PfeaError;

macro_rules! features {
    ($($variant:ident => $name:literal, $selected:literal;)*) => {
        /// One column of the power-model feature table.
        #[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub enum Feature {
            $($variant,)*
        }

        impl Feature {
            /// Every feature, in column order.
            pub const ALL: [Feature; N_FEATURES] = [$(Feature::$variant,)*];

            pub fn name(self) -> &'static str {
                match self {
                    $(Feature::$variant => $name,)*
                }
            }

            /// Whether the feature survives correlation pruning and is fed to
            /// the shipped power models.
            pub fn is_selected(self) -> bool {
                match self {
                    $(Feature::$variant => $selected,)*
                }
            }
        }
    };
}

pub const N_FEATURES: usize = 32;

features! {
    AvgCompLat => "avg_comp_lat", true;
    AvgGlobLat => "avg_glob_lat", true;
    AvgMiscLat => "avg_misc_lat", false;
    AvgSharLat => "avg_shar_lat", true;
    Branch => "branch", true;
    CompInstKernel => "comp_inst_kernel", true;
    CompInstSm => "comp_inst_sm", false;
    CompLatSm => "comp_lat_sm", false;
    GlobInstKernel => "glob_inst_kernel", true;
    GlobInstSm => "glob_inst_sm", false;
    GlobLatSm => "glob_lat_sm", false;
    GlobLoadSm => "glob_load_sm", true;
    GlobStoreSm => "glob_store_sm", true;
    MiscInstKernel => "misc_inst_kernel", true;
    MiscInstSm => "misc_inst_sm", false;
    MiscLatSm => "misc_lat_sm", false;
    SharInstKernel => "shar_inst_kernel", false;
    SharInstSm => "shar_inst_sm", false;
    SharLatSm => "shar_lat_sm", false;
    SmActive => "sm_active", false;
    NWarps => "n_warps", false;
    Waves => "waves", false;
    TotalThreads => "total_threads", false;
    InstIssueCycles => "inst_issue_cycles", true;
    CachePenalty => "cache_penalty", true;
    GlbPenalty => "glb_penalty", false;
    ShPenalty => "sh_penalty", false;
    Occupancy => "occupancy", true;
    RegThread => "reg_thread", true;
    ShmemBlock => "shmem_block", true;
    BlockSize => "block_size", true;
    GridSize => "grid_size", false;
}

impl Feature {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn selected() -> impl Iterator<Item = Feature> {
        Feature::ALL.into_iter().filter(|f| f.is_selected())
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Feature {
    type Err = PfeaError;

    fn from_str(s: &str) -> Result<Self, PfeaError> {
        Feature::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| PfeaError::UnknownFeature(s.to_string()))
    }
}

/// Values for all features of one kernel launch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FeatureVector<T> {
    values: [T; N_FEATURES],
}

impl<T: Scalar> Default for FeatureVector<T> {
    fn default() -> Self {
        FeatureVector {
            values: [T::zero(); N_FEATURES],
        }
    }
}

impl<T: Scalar> FeatureVector<T> {
    pub fn from_values(values: [T; N_FEATURES]) -> Self {
        FeatureVector { values }
    }

    pub fn values(&self) -> &[T; N_FEATURES] {
        &self.values
    }

    pub fn get(&self, f: Feature) -> T {
        self.values[f.index()]
    }

    pub fn set(&mut self, f: Feature, v: T) {
        self.values[f.index()] = v;
    }

    pub fn by_name(&self, name: &str) -> Option<T> {
        name.parse::<Feature>().ok().map(|f| self.get(f))
    }

    /// The selected features, in column order.
    pub fn selected(&self) -> Vec<(Feature, T)> {
        Feature::selected().map(|f| (f, self.get(f))).collect()
    }
}

impl<T: Scalar> Serialize for FeatureVector<T> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(Some(N_FEATURES))?;
        for f in Feature::ALL {
            m.serialize_entry(f.name(), &self.get(f))?;
        }
        m.end()
    }
}

/// Column appended when rows carry a measured power label.
pub const POWER_COLUMN: &str = "power_w";

/// One row per vector under a header of every feature name, plus
/// `power_w` when labels are given.
pub fn features_to_csv<T: Scalar>(
    vs: &[FeatureVector<T>],
    labels: Option<&[T]>,
) -> Result<String, PfeaError> {
    if let Some(l) = labels {
        if l.len() != vs.len() {
            return Err(PfeaError::Csv(format!(
                "{} feature rows but {} labels",
                vs.len(),
                l.len()
            )));
        }
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<&str> = Feature::ALL.iter().map(|f| f.name()).collect();
    if labels.is_some() {
        header.push(POWER_COLUMN);
    }
    w.write_record(&header).map_err(|e| PfeaError::Csv(e.to_string()))?;
    for (i, v) in vs.iter().enumerate() {
        let mut row: Vec<String> = v.values.iter().map(|x| x.to_string()).collect();
        if let Some(l) = labels {
            row.push(l[i].to_string());
        }
        w.write_record(&row).map_err(|e| PfeaError::Csv(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| PfeaError::Csv(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Inverse of [`features_to_csv`]. The header must list every feature in
/// column order, optionally followed by `power_w`.
#[allow(clippy::type_complexity)]
pub fn features_from_csv<T: Scalar>(
    text: &str,
) -> Result<(Vec<FeatureVector<T>>, Option<Vec<T>>), PfeaError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| PfeaError::Csv(e.to_string()))?.clone();
    let labelled = header.len() == N_FEATURES + 1 && &header[N_FEATURES] == POWER_COLUMN;
    if header.len() != N_FEATURES + usize::from(labelled) {
        return Err(PfeaError::Csv(format!(
            "expected {N_FEATURES} feature columns, found {}",
            header.len()
        )));
    }
    for (f, h) in Feature::ALL.iter().zip(header.iter()) {
        if f.name() != h {
            return Err(PfeaError::Csv(format!("column `{h}` where `{f}` was expected")));
        }
    }
    let mut vs = Vec::new();
    let mut labels = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| PfeaError::Csv(e.to_string()))?;
        let parse = |i: usize| -> Result<T, PfeaError> {
            rec[i].parse::<f64>().map(T::lit).map_err(|_| {
                PfeaError::Csv(format!("row {}: `{}` is not a number", row + 2, &rec[i]))
            })
        };
        let mut v = FeatureVector::default();
        for i in 0..N_FEATURES {
            v.values[i] = parse(i)?;
        }
        vs.push(v);
        if labelled {
            labels.push(parse(N_FEATURES)?);
        }
    }
    Ok((vs, labelled.then_some(labels)))
}
