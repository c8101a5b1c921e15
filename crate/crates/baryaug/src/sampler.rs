//! End-to-end barycentric oversampling: build the W2 neighborhood graph,
//! enumerate maximal cliques, then draw cliques with vertex-balanced
//! probabilities and emit weighted barycenters at uniform simplex
//! coordinates. Also provides the classical geometric baseline
//! (random rotation/scaling about the centroid).
//!
//! All randomness flows through counter-based substreams keyed by
//! `(master_seed, sample_index)`, so generation is reproducible and
//! independent of execution order or thread count.

use crate::barycenter::{
    free_support_barycenter, ordered_barycenter, sample_dirichlet, BarycenterParams,
    BarycentricCoordinates,
};
use crate::complex::{cknn_graph, knn_graph_with, maximal_cliques, CliqueComplex, CliqueOptions};
use crate::error::{Error, Result};
use crate::measures::{Dataset, PointCloud};
use crate::ot::{pairwise_matrix, DistanceMatrix, OtMethod};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Graph construction choice; the shared `k` lives in [`AugmentationConfig`].
#[derive(Debug, Clone, PartialEq)]
pub enum GraphVariant {
    Knn { mutual: bool },
    Cknn { delta: f64 },
}

#[derive(Debug, Clone)]
pub struct AugmentationConfig {
    /// Nearest-neighbor parameter of the graph stage.
    pub k: usize,
    /// Number of synthetic samples to draw.
    pub n_aug: usize,
    pub graph: GraphVariant,
    pub ot: OtMethod,
    pub cliques: CliqueOptions,
    pub barycenter: BarycenterParams,
    /// Use the coordinate-wise closed form when the dataset is ordered with
    /// a common cardinality. Off by default: the solver path is the true OT
    /// barycenter, the closed form an explicit opt-in.
    pub ordered_fast_path: bool,
    /// Optional frame `[x_min, y_min, x_max, y_max]`. Samples with any
    /// point outside are kept but flagged, never rejected.
    pub bounding_box: Option<[f64; 4]>,
    pub master_seed: u64,
    pub parallel: bool,
}

impl Default for AugmentationConfig {
    fn default() -> Self {
        Self {
            k: 15,
            n_aug: 7000,
            graph: GraphVariant::Knn { mutual: false },
            ot: OtMethod::exact(),
            cliques: CliqueOptions::default(),
            barycenter: BarycenterParams::default(),
            ordered_fast_path: false,
            bounding_box: None,
            master_seed: 0,
            parallel: true,
        }
    }
}

impl AugmentationConfig {
    fn validate(&self, n: usize) -> Result<()> {
        if self.n_aug == 0 {
            return Err(Error::EmptySampleRequest);
        }
        if self.k == 0 {
            return Err(Error::KOutOfRange { k: self.k, n });
        }
        if n <= self.k {
            return Err(Error::DatasetTooSmall {
                need: self.k,
                got: n,
            });
        }
        Ok(())
    }
}

/// A synthetic cloud with full provenance.
#[derive(Debug, Clone)]
pub struct AugmentedSample {
    pub cloud: PointCloud,
    /// Vertices of the maximal clique the sample was drawn from.
    pub clique_vertices: Vec<usize>,
    pub lambda: BarycentricCoordinates,
    /// Substream id: the sample index under the run's master seed.
    pub seed: u64,
    /// Set when a bounding box was configured and some point falls outside.
    pub outside_bbox: bool,
}

/// Per-sample deterministic generator.
pub fn substream(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// Clique sampling distribution of the vertex-balanced multinomial:
/// `P(sigma) = (sum_{i in sigma} p_i) / N`. The normalizer is the vertex
/// count because summing `p_i` over all cliques containing `i` gives 1 per
/// vertex.
pub fn clique_probabilities(complex: &CliqueComplex) -> Result<Vec<f64>> {
    if complex.is_empty() {
        return Err(Error::EmptyComplex);
    }
    let n = complex.n_vertices() as f64;
    let p = complex.vertex_weights();
    Ok(complex
        .cliques()
        .iter()
        .map(|c| c.iter().map(|&v| p[v]).sum::<f64>() / n)
        .collect())
}

fn cumulative(probs: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    probs
        .iter()
        .map(|p| {
            acc += p;
            acc
        })
        .collect()
}

fn draw_index(cdf: &[f64], u: f64) -> usize {
    cdf.partition_point(|&c| c <= u).min(cdf.len() - 1)
}

/// Build the neighborhood graph and clique complex for a dataset under a
/// config. Exposed so callers can reuse a cached distance matrix.
pub fn build_complex(
    matrix: &DistanceMatrix,
    cfg: &AugmentationConfig,
) -> Result<CliqueComplex> {
    let graph = match cfg.graph {
        GraphVariant::Knn { mutual } => knn_graph_with(matrix, cfg.k, mutual)?,
        GraphVariant::Cknn { delta } => cknn_graph(matrix, cfg.k, delta)?,
    };
    maximal_cliques(&graph, &cfg.cliques)
}

/// Algorithm orchestration: pairwise matrix, graph, cliques, then `n_aug`
/// barycenter draws. Deterministic given `master_seed`.
pub fn augment(d: &Dataset, cfg: &AugmentationConfig) -> Result<Vec<AugmentedSample>> {
    cfg.validate(d.len())?;
    let matrix = pairwise_matrix(d, &cfg.ot, cfg.parallel)?;
    augment_with_matrix(d, &matrix, cfg)
}

/// As [`augment`], reusing a precomputed distance matrix (cache path).
pub fn augment_with_matrix(
    d: &Dataset,
    matrix: &DistanceMatrix,
    cfg: &AugmentationConfig,
) -> Result<Vec<AugmentedSample>> {
    cfg.validate(d.len())?;
    if matrix.n() != d.len() {
        return Err(Error::BadMatrix {
            reason: format!("matrix n = {} but dataset N = {}", matrix.n(), d.len()),
        });
    }
    let complex = build_complex(matrix, cfg)?;
    let probs = clique_probabilities(&complex)?;
    let cdf = cumulative(&probs);

    let closed_form = cfg.ordered_fast_path
        && d.ordered()
        && d.uniform_cardinality().is_some()
        && d.clouds().iter().all(|c| c.is_uniform());

    let sample_one = |index: usize| -> Result<AugmentedSample> {
        let mut rng = substream(cfg.master_seed, index as u64);
        let clique_id = draw_index(&cdf, rng.random::<f64>());
        let clique = complex.clique(clique_id);
        let lambda = sample_dirichlet(clique.len(), &mut rng)?;
        let members: Vec<PointCloud> = clique.iter().map(|&v| d.cloud(v).clone()).collect();
        let cloud = if closed_form {
            ordered_barycenter(&members, &lambda)?
        } else {
            free_support_barycenter(&members, &lambda, &cfg.barycenter)?.cloud
        };
        let outside_bbox = cfg.bounding_box.is_some_and(|[x0, y0, x1, y1]| {
            cloud
                .points()
                .iter()
                .any(|p| p[0] < x0 || p[0] > x1 || p[1] < y0 || p[1] > y1)
        });
        Ok(AugmentedSample {
            cloud,
            clique_vertices: clique.to_vec(),
            lambda,
            seed: index as u64,
            outside_bbox,
        })
    };

    if cfg.parallel {
        (0..cfg.n_aug)
            .into_par_iter()
            .map(sample_one)
            .collect::<Result<Vec<_>>>()
    } else {
        (0..cfg.n_aug).map(sample_one).collect()
    }
}

/// Geometric baseline: each output is a uniformly chosen input, transformed
/// about its centroid with probability `prob` by a rotation
/// `U(-rot_max, rot_max)` and scaling `U(1 - scale_max, 1 + scale_max)`,
/// identity copy otherwise.
pub fn geometric_augment(
    d: &Dataset,
    scale_max: f64,
    rot_max: f64,
    prob: f64,
    n_aug: usize,
    seed: u64,
) -> Result<Vec<PointCloud>> {
    if !(0.0..=1.0).contains(&prob) || !prob.is_finite() {
        return Err(Error::BadProbability(prob));
    }
    if scale_max < 0.0 || !scale_max.is_finite() {
        return Err(Error::BadParameter {
            name: "scale_max",
            reason: format!("must be >= 0, got {scale_max}"),
        });
    }
    if rot_max < 0.0 || !rot_max.is_finite() {
        return Err(Error::BadParameter {
            name: "rot_max",
            reason: format!("must be >= 0, got {rot_max}"),
        });
    }
    if n_aug == 0 {
        return Err(Error::EmptySampleRequest);
    }
    let out = (0..n_aug)
        .map(|index| {
            let mut rng = substream(seed, index as u64);
            let pick = rng.random_range(0..d.len());
            let cloud = d.cloud(pick);
            if rng.random::<f64>() >= prob {
                return cloud.clone();
            }
            let theta = -rot_max + 2.0 * rot_max * rng.random::<f64>();
            let scale = 1.0 - scale_max + 2.0 * scale_max * rng.random::<f64>();
            let (sin, cos) = theta.sin_cos();
            let c = cloud.mean();
            let points = cloud
                .points()
                .iter()
                .map(|p| {
                    let dx = p[0] - c[0];
                    let dy = p[1] - c[1];
                    [
                        c[0] + scale * (cos * dx - sin * dy),
                        c[1] + scale * (sin * dx + cos * dy),
                    ]
                })
                .collect();
            PointCloud::new_unchecked(points, cloud.weights().to_vec(), cloud.ordered())
        })
        .collect();
    Ok(out)
}
