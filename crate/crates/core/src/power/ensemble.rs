use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::pfea::{Feature, FeatureVector};
use crate::Scalar;

use super::PowerError;

pub const ENSEMBLE_SCHEMA_VERSION: u32 = 1;

/// One tree node. Internal nodes send `x < threshold` left.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged, bound = "T: Scalar")]
pub enum Node<T> {
    Split {
        feature: usize,
        threshold: T,
        left: usize,
        right: usize,
    },
    Leaf {
        leaf: T,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Tree<T> {
    /// Node 0 is the root.
    pub nodes: Vec<Node<T>>,
}

impl<T: Scalar> Tree<T> {
    pub fn eval(&self, x: &[T]) -> T {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { leaf } => return *leaf,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[*feature] < *threshold { *left } else { *right },
            }
        }
    }

    /// Thresholds used on each feature index.
    pub fn thresholds(&self) -> impl Iterator<Item = (usize, T)> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            Node::Split {
                feature, threshold, ..
            } => Some((*feature, *threshold)),
            Node::Leaf { .. } => None,
        })
    }
}

/// Per-feature min-max scaling applied before tree traversal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Scaling<T> {
    pub min: Vec<T>,
    pub max: Vec<T>,
}

/// Self-contained gradient-boosted or bagged regression ensemble.
/// Shrinkage and averaging are folded into the leaf values, so the
/// prediction is `base_score + sum of leaves`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", deny_unknown_fields)]
pub struct TreeEnsemble<T> {
    pub schema_version: u32,
    /// Free-form provenance note.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub base_score: T,
    pub feature_manifest: Vec<String>,
    pub scaling: Scaling<T>,
    pub trees: Vec<Tree<T>>,
    /// Total split gain per manifest feature.
    pub gains: Vec<T>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Scalar")]
pub struct Importance<T> {
    pub rank: usize,
    pub feature: String,
    pub gain: T,
    pub share: T,
}

impl<T: Scalar> TreeEnsemble<T> {
    pub fn from_json(text: &str) -> Result<Self, PowerError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let e: Self = serde_path_to_error::deserialize(de).map_err(|err| PowerError::Schema {
            field: err.path().to_string(),
            message: err.inner().to_string(),
        })?;
        e.validate()?;
        Ok(e)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("ensemble serializes")
    }

    fn schema(field: impl Into<String>, message: impl Into<String>) -> PowerError {
        PowerError::Schema {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn validate(&self) -> Result<(), PowerError> {
        if self.schema_version != ENSEMBLE_SCHEMA_VERSION {
            return Err(Self::schema(
                "schema_version",
                format!("expected {ENSEMBLE_SCHEMA_VERSION}, found {}", self.schema_version),
            ));
        }
        let unknown: Vec<String> = self
            .feature_manifest
            .iter()
            .filter(|n| n.parse::<Feature>().is_err())
            .cloned()
            .collect();
        if !unknown.is_empty() {
            return Err(PowerError::ManifestMismatch { unknown });
        }
        let n = self.feature_manifest.len();
        for (field, len) in [
            ("scaling.min", self.scaling.min.len()),
            ("scaling.max", self.scaling.max.len()),
            ("gains", self.gains.len()),
        ] {
            if len != n {
                return Err(Self::schema(field, format!("{len} entries for {n} manifest features")));
            }
        }
        let finite = |v: &T| v.is_finite();
        if !self.base_score.is_finite()
            || !self.scaling.min.iter().all(finite)
            || !self.scaling.max.iter().all(finite)
            || !self.gains.iter().all(finite)
        {
            return Err(Self::schema("", "non-finite number"));
        }
        if let Some(i) = (0..n).find(|&i| self.scaling.max[i] < self.scaling.min[i]) {
            return Err(Self::schema(format!("scaling.max[{i}]"), "below scaling.min"));
        }
        for (t, tree) in self.trees.iter().enumerate() {
            check_tree(tree, n).map_err(|(node, msg)| {
                Self::schema(format!("trees[{t}].nodes[{node}]"), msg)
            })?;
        }
        Ok(())
    }

    /// Min-max scaled copy of a row in manifest order.
    pub fn scale(&self, row: &[T]) -> Vec<T> {
        row.iter()
            .enumerate()
            .map(|(i, &x)| {
                let (lo, hi) = (self.scaling.min[i], self.scaling.max[i]);
                if hi > lo {
                    (x - lo) / (hi - lo)
                } else {
                    T::zero()
                }
            })
            .collect()
    }

    /// Prediction for raw (unscaled) inputs in manifest order.
    pub fn predict_row(&self, row: &[T]) -> Result<T, PowerError> {
        if row.len() != self.feature_manifest.len() {
            return Err(PowerError::RowLength {
                expected: self.feature_manifest.len(),
                got: row.len(),
            });
        }
        let x = self.scale(row);
        Ok(self.base_score + self.trees.iter().map(|t| t.eval(&x)).sum::<T>())
    }

    /// Mean power in watts for a feature vector.
    pub fn predict_power(&self, fv: &FeatureVector<T>) -> Result<T, PowerError> {
        let row = self
            .feature_manifest
            .iter()
            .map(|n| fv.by_name(n).ok_or_else(|| PowerError::MissingFeature(n.clone())))
            .collect::<Result<Vec<T>, _>>()?;
        self.predict_row(&row)
    }

    /// Prediction from a name-to-value map.
    pub fn predict_map(&self, values: &BTreeMap<String, T>) -> Result<T, PowerError> {
        let row = self
            .feature_manifest
            .iter()
            .map(|n| values.get(n).copied().ok_or_else(|| PowerError::MissingFeature(n.clone())))
            .collect::<Result<Vec<T>, _>>()?;
        self.predict_row(&row)
    }

    /// Features ranked by total gain, ties in manifest order. Features with
    /// zero gain are left out.
    pub fn importance_report(&self, k: usize) -> Result<Vec<Importance<T>>, PowerError> {
        if k > self.feature_manifest.len() {
            return Err(PowerError::TopK {
                k,
                available: self.feature_manifest.len(),
            });
        }
        let total: T = self.gains.iter().copied().filter(|g| *g > T::zero()).sum();
        let mut idx: Vec<usize> = (0..self.gains.len()).filter(|&i| self.gains[i] > T::zero()).collect();
        idx.sort_by(|&a, &b| {
            self.gains[b]
                .partial_cmp(&self.gains[a])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        Ok(idx
            .into_iter()
            .take(k)
            .enumerate()
            .map(|(r, i)| Importance {
                rank: r + 1,
                feature: self.feature_manifest[i].clone(),
                gain: self.gains[i],
                share: self.gains[i] / total,
            })
            .collect())
    }
}

/// Checks child indices and that every node is reached from the root by
/// exactly one path.
fn check_tree<T: Scalar>(tree: &Tree<T>, n_features: usize) -> Result<(), (usize, String)> {
    if tree.nodes.is_empty() {
        return Err((0, "tree has no nodes".into()));
    }
    let mut seen = vec![false; tree.nodes.len()];
    let mut stack = vec![0usize];
    while let Some(i) = stack.pop() {
        if seen[i] {
            return Err((i, "node reached twice".into()));
        }
        seen[i] = true;
        match &tree.nodes[i] {
            Node::Leaf { leaf } if !leaf.is_finite() => return Err((i, "non-finite leaf".into())),
            Node::Leaf { .. } => {}
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                if *feature >= n_features {
                    return Err((i, format!("feature {feature} outside the manifest")));
                }
                if !threshold.is_finite() {
                    return Err((i, "non-finite threshold".into()));
                }
                for &c in [left, right] {
                    if c >= tree.nodes.len() {
                        return Err((i, format!("child {c} does not exist")));
                    }
                    stack.push(c);
                }
            }
        }
    }
    if let Some(i) = seen.iter().position(|s| !s) {
        return Err((i, "unreachable node".into()));
    }
    Ok(())
}

pub fn load_ensemble<T: Scalar>(path: &Path) -> Result<TreeEnsemble<T>, PowerError> {
    let text = std::fs::read_to_string(path).map_err(|e| PowerError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    TreeEnsemble::from_json(&text)
}

/// Oracle pairs exported next to an ensemble: raw inputs in manifest order
/// and the prediction the exporter computed for them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TestVectors<T> {
    pub schema_version: u32,
    pub feature_manifest: Vec<String>,
    pub vectors: Vec<TestVector<T>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TestVector<T> {
    pub input: Vec<T>,
    pub prediction: T,
}

impl<T: Scalar> TestVectors<T> {
    pub fn from_json(text: &str) -> Result<Self, PowerError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|err| PowerError::Schema {
            field: err.path().to_string(),
            message: err.inner().to_string(),
        })
    }

    /// Largest relative error of `e` against the stored predictions.
    pub fn max_relative_error(&self, e: &TreeEnsemble<T>) -> Result<T, PowerError> {
        if self.feature_manifest != e.feature_manifest {
            return Err(PowerError::Schema {
                field: "feature_manifest".into(),
                message: "differs from the ensemble manifest".into(),
            });
        }
        let mut worst = T::zero();
        for v in &self.vectors {
            let got = e.predict_row(&v.input)?;
            let err = (got - v.prediction).abs() / v.prediction.abs().max(T::one());
            worst = worst.max(err);
        }
        Ok(worst)
    }
}
