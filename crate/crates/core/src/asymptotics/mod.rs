//! Asymptotic distribution of the sample statistics and its first-order
//! propagation to the identified model.

mod bounds;
mod chi2;
mod covariance;
mod maps;
mod svd;

pub use bounds::{
    bound_dof, fnorm_bounds, transfer_function_variance, transfer_sensitivity, FNormBounds,
};
pub use chi2::{chi2_cdf, chi2_quantile};
pub use covariance::{
    asymptotic_covariance, asymptotic_covariance_lags, AsymptoticCovariance,
    DEFAULT_QUADRATURE_POINTS,
};
pub use maps::{
    dare_perturbation_chain, delta_p1_map, perturbation_maps, propagated_norm_sq,
    realization_jacobians, DareChain, PerturbationMaps, RealizationJacobians,
};
pub use svd::{svd_perturbation_maps, svd_perturbation_maps_subspace};
