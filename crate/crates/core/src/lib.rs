pub mod data;
pub mod error;
pub mod estimation;
pub mod evaluation;
pub mod experiments;
pub mod hierarchy;
pub mod io;
pub mod partition;
pub mod quadrature;
pub mod rng;
pub mod selection;
pub mod simulate;
pub mod stability;

pub use data::ResponseMatrix;
pub use error::{Error, Result};
pub use estimation::{fit_mml, irf, log_marginal_likelihood, FitConfig, RaschFit};
pub use evaluation::{
    hit_false_rates, item_correlations, mean_conditional_covariance, mean_off_diagonal, roc_curve,
    ConditionalCovariance, EvalCurve,
};
pub use hierarchy::{
    agglomerate, cut_k, euclidean_item_distances, hcluster_marginal, Dendrogram, DistanceMatrix,
    HeightMode, Linkage, MergeStep,
};
pub use partition::Partition;
pub use quadrature::{gauss_hermite_rule, QuadratureRule};
pub use selection::{
    change_sequence, fusion_homogeneity, select, select_sequence, select_with_anchor, Criterion,
    SelectionTrace,
};
pub use simulate::{gen_rasch, permute_items, preset, Scenario};
pub use stability::{
    misfit_scores, order_density, pairwise_similarity, similarity_to_distance, subsample_orders,
    MisfitReport, OrderAlgorithm, OrderMatrix, SimilarityMatrix,
};
