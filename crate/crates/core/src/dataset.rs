use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major feature matrix with class ids and source-group ids per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub groups: Vec<String>,
    pub class_names: Vec<String>,
}

impl Dataset {
    pub fn new(
        features: Vec<Vec<f64>>,
        labels: Vec<usize>,
        groups: Vec<String>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        let ds = Self {
            features,
            labels,
            groups,
            class_names,
        };
        ds.validate()?;
        Ok(ds)
    }

    /// Dataset where every row is its own group.
    pub fn ungrouped(features: Vec<Vec<f64>>, labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        let groups = (0..labels.len()).map(|i| format!("row{i}")).collect();
        let names = (0..n_classes).map(|c| format!("class_{c:02}")).collect();
        Self::new(features, labels, groups, names)
    }

    fn validate(&self) -> Result<()> {
        let n = self.features.len();
        let c = self.class_names.len();
        if c < 2 {
            return Err(Error::InvalidDataset(format!("need at least 2 classes, got {c}")));
        }
        if n < c {
            return Err(Error::InvalidDataset(format!("{n} rows for {c} classes")));
        }
        if self.labels.len() != n || self.groups.len() != n {
            return Err(Error::InvalidDataset("labels/groups not aligned with rows".into()));
        }
        let d = self.features[0].len();
        if d == 0 {
            return Err(Error::InvalidDataset("zero-dimensional features".into()));
        }
        for row in &self.features {
            if row.len() != d {
                return Err(Error::Shape {
                    expected: d,
                    got: row.len(),
                });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidDataset("non-finite feature value".into()));
            }
        }
        if let Some(&bad) = self.labels.iter().find(|&&l| l >= c) {
            return Err(Error::InvalidDataset(format!(
                "label {bad} out of range for {c} classes"
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features[0].len()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    /// Rows picked by index (duplicates allowed), keeping the class list.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        Self::new(
            indices.iter().map(|&i| self.features[i].clone()).collect(),
            indices.iter().map(|&i| self.labels[i]).collect(),
            indices.iter().map(|&i| self.groups[i].clone()).collect(),
            self.class_names.clone(),
        )
    }

    pub fn class_names_of_rows(&self) -> Vec<&str> {
        self.labels.iter().map(|&l| self.class_names[l].as_str()).collect()
    }
}

/// Per-dimension z-scoring fitted on training rows. Constant dimensions are
/// mapped to zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
    pub active: Vec<bool>,
}

impl Standardizer {
    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let n = rows.len() as f64;
        let d = rows[0].len();
        let mut mean = vec![0.0; d];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for r in rows {
            for j in 0..d {
                var[j] += (r[j] - mean[j]).powi(2);
            }
        }
        let scale: Vec<f64> = var.iter().map(|v| (v / n).sqrt()).collect();
        let active: Vec<bool> = scale
            .iter()
            .zip(&mean)
            .map(|(s, m)| *s > 1e-12 * m.abs().max(1.0))
            .collect();
        let dropped = active.iter().filter(|a| !**a).count();
        if dropped > 0 {
            log::warn!("{dropped} zero-variance feature dimension(s) dropped");
        }
        Self { mean, scale, active }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn transform(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(j, v)| {
                if self.active[j] {
                    (v - self.mean[j]) / self.scale[j]
                } else {
                    0.0
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(matches!(
            Dataset::ungrouped(vec![vec![0.0], vec![1.0]], vec![0, 0], 1),
            Err(Error::InvalidDataset(_))
        ));
        assert!(Dataset::ungrouped(vec![vec![0.0], vec![1.0]], vec![0, 2], 2).is_err());
        assert!(Dataset::ungrouped(vec![vec![0.0], vec![f64::NAN]], vec![0, 1], 2).is_err());
        assert!(Dataset::ungrouped(vec![vec![0.0], vec![1.0, 2.0]], vec![0, 1], 2).is_err());
        assert!(Dataset::ungrouped(vec![vec![0.0]], vec![0], 2).is_err());
    }

    #[test]
    fn standardizer_drops_constant_dims() {
        let s = Standardizer::fit(&[vec![1.0, 5.0], vec![3.0, 5.0]]);
        assert_eq!(s.active, vec![true, false]);
        assert_eq!(s.transform(&[2.0, 9.0]), vec![0.0, 0.0]);
        assert_eq!(s.transform(&[3.0, 5.0]), vec![1.0, 0.0]);
    }
}
