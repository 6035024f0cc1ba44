pub mod birth_time;
pub mod difference;
pub mod distance;
pub mod envelope;
pub mod functional;
pub mod gamma;
pub mod mecke;
pub mod poincare;
pub mod tail;

pub use birth_time::{birth_time_variance, BIRTH_TIME_VOLUME_CAP};
pub use difference::{difference, fresh_id, second_difference, DifferenceContext, DifferenceSample, Overlay};
pub use distance::{empirical_distance, kolmogorov_distance, wasserstein_distance, DistanceKind};
pub use envelope::{dominator_window_ratio, fourth_moment_profile};
pub use functional::{FunctionalSpec, Statistic};
pub use gamma::{
    fourth_moment_bound, gamma_terms, FourthMomentCheck, GammaTerms, NestedBudget, Standardization,
    StandardizationSource,
};
pub use mecke::{mecke_check, MeckeCheck};
pub use poincare::poincare_bound;
pub use tail::{cluster_tail, ClusterTail};
