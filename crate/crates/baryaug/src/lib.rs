//! Oversampling for point-cloud annotation datasets (landmarks, contours) by
//! sampling weighted Wasserstein barycenters inside maximal cliques of a
//! W2 nearest-neighbor graph, so synthetic samples stay near the submanifold
//! spanned by the originals.
//!
//! Pipeline: pairwise W2 matrix -> kNN/ckNN graph -> maximal cliques ->
//! clique draw + Dirichlet barycentric coordinates -> free-support barycenter.
//! Evaluation utilities (set-level W2, kNN KL estimate, covering-bound
//! verifier) and Gaussian heatmap rendering round out the toolkit.

pub mod barycenter;
pub mod complex;
pub mod error;
pub mod eval;
pub mod formats;
pub mod heatmap;
pub mod measures;
pub mod ot;
pub mod sampler;

pub use barycenter::{
    free_support_barycenter, ordered_barycenter, sample_dirichlet, BarycenterParams,
    BarycenterResult, BarycentricCoordinates, InitStrategy,
};
pub use complex::{
    cknn_graph, knn_graph, knn_graph_with, maximal_cliques, CliqueComplex, CliqueOptions,
    GraphRule, NeighborhoodGraph,
};
pub use eval::{knn_kl, meta_w2, verify_covering_bound, CoveringCheck, EvalReport};
pub use error::{Error, ErrorKind, Result};
pub use heatmap::{render, render_unordered, render_unordered_with, render_with, Heatmap, Normalization};
pub use measures::{validate_dataset, Dataset, PointCloud, Violation};
pub use sampler::{
    augment, augment_with_matrix, clique_probabilities, geometric_augment, AugmentationConfig,
    AugmentedSample, GraphVariant,
};
pub use ot::{
    ordered_l2,
    union_diameter_sq,
    pairwise_matrix, w2_exact, w2_exact_capped, w2_sinkhorn, DistanceMatrix, OtMethod,
    SinkhornParams, TransportPlan,
};
