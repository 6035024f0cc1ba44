pub mod estimate;
pub mod exponent;
pub mod integrals;
pub mod probability;
pub mod proposal;

pub use estimate::{Accumulator, Method, MomentEstimate};
pub use exponent::inner_exponent;
pub use integrals::{
    asy_cov, asy_cov_events, asy_cov_kl, asy_cov_matrix, asy_var_quadratic, expected_count_intensity,
    expected_event_intensity, finite_window_cross_moment, finite_window_cross_moment_events, sigma_total_partial,
    CovarianceMatrix, MomentOptions,
};
pub use probability::{event_probability, joint_event_probability, p_phi_g, p_phi_k, ClusterEvent};
