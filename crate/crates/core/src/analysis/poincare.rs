use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::analysis::difference::DifferenceContext;
use crate::analysis::functional::FunctionalSpec;
use crate::error::{RcmError, Result};
use crate::moments::estimate::{monte_carlo, MomentEstimate};

/// Monte Carlo estimate of `beta * int E (Delta_x F)^2 dx`, an upper bound
/// on `Var F`. Each of the `n_outer` samples is probed at `n_points`
/// uniform points of the region where `Delta_x F` can be nonzero.
pub fn poincare_bound(spec: &FunctionalSpec, n_outer: u64, n_points: usize, seed: u64) -> Result<MomentEstimate> {
    spec.validate()?;
    if n_outer < 2 || n_points == 0 {
        return Err(RcmError::BudgetTooSmall(
            "need at least two samples and one probe point per sample".into(),
        ));
    }
    let domain = spec.domain();
    let acc = monte_carlo(n_outer, seed, |rng: &mut ChaCha8Rng| {
        let g = spec.sample_graph(rng.random()).expect("validated spec");
        let ctx = DifferenceContext::new(spec, &g).expect("matching graph");
        let mut sum = 0.0;
        for _ in 0..n_points {
            let x = domain.sample_uniform(rng);
            let d = ctx.difference(&x).expect("fresh point");
            sum += d * d;
        }
        sum / n_points as f64
    });
    Ok(acc.estimate(spec.reach()).scaled(spec.beta * domain.volume()))
}
