pub mod connection;
pub mod graph;
pub mod marks;
pub mod points;
pub mod window;

pub use connection::{ConnectionFunction, DEFAULT_EPS_TRUNC};
pub use graph::{build_coupled, build_rcm, RcmGraph};
pub use marks::{derive_seed, Marks, PairMarkSource};
pub use points::{lex_cmp, sample_poisson, PointSet};
pub use window::{Shape, Window};

/// Sampling padding around a window: `(k_max + 1)` times the interaction
/// range. The flag is true when phi has unbounded support (truncated).
pub fn default_padding(phi: &ConnectionFunction, k_max: usize, eps_trunc: f64) -> (f64, bool) {
    let range = phi.interaction_range(eps_trunc);
    ((k_max as f64 + 1.0) * range, !phi.has_compact_support())
}

/// `m_phi = integral of phi over R^d`.
pub fn m_phi(phi: &ConnectionFunction, dim: usize) -> f64 {
    phi.m_phi(dim)
}
