//! Point clouds as discrete probability measures on the plane, plus dataset
//! containers and validation.
//!
//! A landmark annotation (or segmentation contour) is a finite set of planar
//! points carrying nonnegative weights that sum to one. Ordered clouds keep a
//! fixed semantic index per point (keypoints); unordered clouds are treated as
//! permutation-invariant multisets (contours).

use crate::error::{Error, Result};

/// Absolute tolerance on the weight-sum invariant.
pub const WEIGHT_SUM_TOL: f64 = 1e-9;

/// A discrete probability measure supported on planar points.
///
/// Immutable after construction; duplicate support points are allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<[f64; 2]>,
    weights: Vec<f64>,
    ordered: bool,
}

impl PointCloud {
    /// Build a cloud with explicit weights. Checks all invariants.
    pub fn new(points: Vec<[f64; 2]>, weights: Vec<f64>, ordered: bool) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyPoints);
        }
        if points.len() != weights.len() {
            return Err(Error::WeightCountMismatch {
                points: points.len(),
                weights: weights.len(),
            });
        }
        for (index, p) in points.iter().enumerate() {
            if !p[0].is_finite() || !p[1].is_finite() {
                return Err(Error::NonFiniteCoordinate {
                    index,
                    x: p[0],
                    y: p[1],
                });
            }
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(Error::BadWeights {
                reason: format!("negative or non-finite weight {w}"),
            });
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::BadWeights {
                reason: format!("weights sum to {sum}, expected 1"),
            });
        }
        Ok(Self {
            points,
            weights,
            ordered,
        })
    }

    /// Build the uniform measure over `points`: every weight is `1/s`.
    pub fn uniform(points: Vec<[f64; 2]>, ordered: bool) -> Result<Self> {
        let s = points.len();
        if s == 0 {
            return Err(Error::EmptyPoints);
        }
        let w = 1.0 / s as f64;
        Self::new(points, vec![w; s], ordered)
    }

    /// Build without invariant checks. Intended for deserialization paths
    /// that report problems through [`validate_dataset`] instead of failing.
    pub fn new_unchecked(points: Vec<[f64; 2]>, weights: Vec<f64>, ordered: bool) -> Self {
        Self {
            points,
            weights,
            ordered,
        }
    }

    /// Number of support points `s`.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn ordered(&self) -> bool {
        self.ordered
    }

    /// True when every weight equals `1/s` up to [`WEIGHT_SUM_TOL`].
    pub fn is_uniform(&self) -> bool {
        let w = 1.0 / self.len() as f64;
        self.weights.iter().all(|x| (x - w).abs() <= WEIGHT_SUM_TOL)
    }

    /// Weighted mean of the support.
    pub fn mean(&self) -> [f64; 2] {
        let mut m = [0.0, 0.0];
        for (p, w) in self.points.iter().zip(&self.weights) {
            m[0] += w * p[0];
            m[1] += w * p[1];
        }
        m
    }

    /// Largest pairwise distance between support points.
    pub fn diameter(&self) -> f64 {
        let mut d2: f64 = 0.0;
        for i in 0..self.points.len() {
            for j in (i + 1)..self.points.len() {
                d2 = d2.max(sq_dist(self.points[i], self.points[j]));
            }
        }
        d2.sqrt()
    }

    /// The cloud shifted by `t`, weights and flag unchanged.
    pub fn translate(&self, t: [f64; 2]) -> Self {
        Self {
            points: self
                .points
                .iter()
                .map(|p| [p[0] + t[0], p[1] + t[1]])
                .collect(),
            weights: self.weights.clone(),
            ordered: self.ordered,
        }
    }

    /// Same weights and flag on a new support.
    pub fn with_points(&self, points: Vec<[f64; 2]>) -> Result<Self> {
        Self::new(points, self.weights.clone(), self.ordered)
    }
}

pub fn sq_dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy
}

/// A collection of clouds sharing the ordered flag.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    clouds: Vec<PointCloud>,
    ordered: bool,
    uniform_cardinality: Option<usize>,
}

impl Dataset {
    /// Build a dataset, enforcing N >= 1 and a shared ordered flag.
    /// `uniform_cardinality` is derived: `Some(s)` iff all members have `s` points.
    pub fn new(clouds: Vec<PointCloud>) -> Result<Self> {
        if clouds.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let ordered = clouds[0].ordered();
        if clouds.iter().any(|c| c.ordered() != ordered) {
            return Err(Error::MixedOrderedFlags);
        }
        let s = clouds[0].len();
        let uniform_cardinality = clouds.iter().all(|c| c.len() == s).then_some(s);
        Ok(Self {
            clouds,
            ordered,
            uniform_cardinality,
        })
    }

    /// Number of member clouds `N`.
    pub fn len(&self) -> usize {
        self.clouds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clouds.is_empty()
    }

    pub fn clouds(&self) -> &[PointCloud] {
        &self.clouds
    }

    pub fn cloud(&self, i: usize) -> &PointCloud {
        &self.clouds[i]
    }

    pub fn ordered(&self) -> bool {
        self.ordered
    }

    pub fn uniform_cardinality(&self) -> Option<usize> {
        self.uniform_cardinality
    }

    /// Diameter of the union of all supports. Scale reference for tolerances.
    pub fn diameter(&self) -> f64 {
        let pts: Vec<[f64; 2]> = self
            .clouds
            .iter()
            .flat_map(|c| c.points().iter().copied())
            .collect();
        let mut d2: f64 = 0.0;
        for i in 0..pts.len() {
            for j in (i + 1)..pts.len() {
                d2 = d2.max(sq_dist(pts[i], pts[j]));
            }
        }
        d2.sqrt()
    }

    pub fn into_clouds(self) -> Vec<PointCloud> {
        self.clouds
    }
}

/// One broken invariant. `cloud = None` marks a dataset-level rule.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub cloud: Option<usize>,
    pub rule: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.cloud {
            Some(i) => write!(f, "cloud {}: {}", i, self.rule),
            None => write!(f, "dataset: {}", self.rule),
        }
    }
}

/// Check every invariant over a raw collection of clouds. Returns an empty
/// list iff the collection forms a valid [`Dataset`]. Violations are data,
/// not failures.
pub fn validate_dataset(clouds: &[PointCloud]) -> Vec<Violation> {
    let mut out = Vec::new();
    if clouds.is_empty() {
        out.push(Violation {
            cloud: None,
            rule: "dataset is empty".into(),
        });
        return out;
    }
    for (i, c) in clouds.iter().enumerate() {
        let mut push = |rule: String| {
            out.push(Violation {
                cloud: Some(i),
                rule,
            })
        };
        if c.points.is_empty() {
            push("point list is empty".into());
            continue;
        }
        if c.points.len() != c.weights.len() {
            push(format!(
                "{} points but {} weights",
                c.points.len(),
                c.weights.len()
            ));
            continue;
        }
        for (j, p) in c.points.iter().enumerate() {
            if !p[0].is_finite() || !p[1].is_finite() {
                push(format!("non-finite coordinate at point {j}"));
            }
        }
        if c.weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            push("negative or non-finite weight".into());
        } else {
            let sum: f64 = c.weights.iter().sum();
            if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
                push(format!("weights sum to {sum}, expected 1"));
            }
        }
    }
    let ordered = clouds[0].ordered();
    if clouds.iter().any(|c| c.ordered() != ordered) {
        out.push(Violation {
            cloud: None,
            rule: "mixed ordered and unordered clouds".into(),
        });
    }
    out
}
