use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::difference::{fresh_id, Overlay};
use crate::census::components::Components;
use crate::error::{RcmError, Result};
use crate::model::connection::{ConnectionFunction, DEFAULT_EPS_TRUNC};
use crate::model::graph::build_rcm;
use crate::model::marks::{derive_seed, PairMarkSource};
use crate::model::points::sample_poisson;
use crate::model::window::Window;
use crate::moments::estimate::{monte_carlo_vec, MomentEstimate};

/// Bracketing estimates of `q_{phi,m}`, the probability that the finite
/// components joined by an added origin have total order at least `m`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterTail {
    pub m: usize,
    /// Components that reach the sampling boundary count as too small.
    pub lower: MomentEstimate,
    /// Components that reach the sampling boundary count as large enough.
    pub upper: MomentEstimate,
    pub radius: f64,
}

/// Simulates the process on a ball of radius `(m + 2)` interaction ranges
/// around the origin, so every component of order below `m` attached to the
/// origin is seen whole.
pub fn cluster_tail(phi: &ConnectionFunction, beta: f64, dim: usize, m: usize, samples: u64, seed: u64) -> Result<ClusterTail> {
    phi.validate()?;
    if m == 0 {
        return Err(RcmError::InvalidParameter("m must be at least 1".into()));
    }
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(RcmError::InvalidParameter(format!("intensity must be positive, got {beta}")));
    }
    if samples < 2 {
        return Err(RcmError::BudgetTooSmall("need at least two samples".into()));
    }
    let range = phi.interaction_range(DEFAULT_EPS_TRUNC);
    let radius = (m as f64 + 2.0) * range;
    let center = Window::centered_ball(dim, 0.0)?;
    let origin = vec![0.0; dim];
    let acc = monte_carlo_vec(samples, seed, 2, |rng: &mut ChaCha8Rng, out| {
        let s: u64 = rng.random();
        let pts = sample_poisson(&center, radius, beta, derive_seed(s, 0)).expect("valid intensity");
        let g = build_rcm(pts, *phi, PairMarkSource::new(derive_seed(s, 1))).expect("valid graph");
        let comps = Components::of(&g);
        let ov = Overlay::new(&g, g.marks(), &[(fresh_id(&origin), &origin)]).expect("origin is fresh");
        let region = g.points().region().expect("sampled region");
        let mut labels: Vec<usize> = ov.neighbors(ov.node(0)).iter().map(|&v| comps.label(v)).collect();
        labels.sort_unstable();
        labels.dedup();
        let mut total = 0usize;
        let mut open = false;
        for c in labels {
            let members = comps.members(c);
            if members.iter().any(|&v| region.depth(g.points().point(v as usize)) < range) {
                open = true;
            } else {
                total += members.len();
            }
        }
        out[0] = f64::from(u8::from(total >= m));
        out[1] = f64::from(u8::from(total >= m || open));
    });
    Ok(ClusterTail {
        m,
        lower: acc[0].estimate(radius),
        upper: acc[1].estimate(radius),
        radius,
    })
}
