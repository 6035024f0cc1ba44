//! Numerical checks of how difference operators decay away from the
//! window, and of the boundary integral of the dominator.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::analysis::difference::DifferenceContext;
use crate::analysis::functional::FunctionalSpec;
use crate::error::{RcmError, Result};
use crate::model::connection::ConnectionFunction;
use crate::model::window::{unit_ball_volume, Window};
use crate::moments::estimate::{monte_carlo, MomentEstimate};
use crate::quad;

/// `E (Delta_x F)^4` at points `x` placed at the given distances from the
/// window along the first axis.
pub fn fourth_moment_profile(spec: &FunctionalSpec, distances: &[f64], samples: u64, seed: u64) -> Result<Vec<MomentEstimate>> {
    spec.validate()?;
    if samples < 2 {
        return Err(RcmError::BudgetTooSmall("need at least two samples".into()));
    }
    let far = distances.iter().fold(0.0f64, |m, &d| m.max(d));
    if distances.iter().any(|d| !(*d >= 0.0) || !d.is_finite()) {
        return Err(RcmError::InvalidParameter("distances must be finite and nonnegative".into()));
    }
    let extra = (far - spec.reach()).max(0.0) + spec.range();
    Ok(distances
        .iter()
        .enumerate()
        .map(|(i, &d)| {
            let mut x = spec.window.center().to_vec();
            x[0] += spec.window.extent() + d;
            let acc = monte_carlo(samples, crate::model::marks::derive_seed(seed, i as u64), |rng: &mut ChaCha8Rng| {
                let g = spec.sample_graph_padded(rng.random(), extra).expect("validated spec");
                let ctx = DifferenceContext::new(spec, &g).expect("matching graph");
                ctx.difference(&x).expect("fresh point").powi(4)
            });
            acc.estimate(d)
        })
        .collect())
}

/// `(1 / vol W) int dominator(d(x, W))^alpha dx`, using the Steiner formula
/// for the volume of the parallel sets of W.
pub fn dominator_window_ratio(phi: &ConnectionFunction, window: &Window, alpha: f64) -> Result<f64> {
    phi.validate()?;
    if !(alpha > 0.0) {
        return Err(RcmError::InvalidParameter(format!("alpha must be positive, got {alpha}")));
    }
    let vol = window.volume();
    if !(vol > 0.0) {
        return Err(RcmError::InvalidParameter("window must have positive volume".into()));
    }
    let d = window.dim();
    let iv = window.intrinsic_volumes();
    // d/dt vol(W + tB) = sum_j j kappa_j V_{d-j}(W) t^{j-1}
    let surface = |t: f64| -> f64 {
        (1..=d)
            .map(|j| j as f64 * unit_ball_volume(j) * iv[d - j] * t.powi(j as i32 - 1))
            .sum()
    };
    let f = |t: f64| phi.dominator(t).powf(alpha) * surface(t);
    let outside = match phi.support_radius() {
        Some(r) => quad::integrate(f, 0.0, r, 1e-13, 1e-12),
        None => quad::integrate_to_infinity(f, 0.0, 1e-13, 1e-12),
    };
    Ok(1.0 + outside / vol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::functional::Statistic;
    use crate::census::report::CountMode;

    #[test]
    fn compact_support_profile_vanishes_beyond_reach() {
        let phi = ConnectionFunction::gilbert(1.0).unwrap();
        let s = FunctionalSpec::new(
            Statistic::CountOrder {
                k: 2,
                mode: CountMode::Lexmin,
            },
            Window::centered_box(2, 2.0).unwrap(),
            phi,
            1.0,
        )
        .unwrap();
        let p = fourth_moment_profile(&s, &[0.0, 0.5, 1.5, 2.05, 3.0], 2000, 1).unwrap();
        assert!(p[0].value > 0.0);
        assert_eq!(p[3].value, 0.0);
        assert_eq!(p[4].value, 0.0);
    }

    #[test]
    fn window_ratio_closed_form_and_decay() {
        let phi = ConnectionFunction::gilbert(1.0).unwrap();
        let w = Window::centered_box(2, 2.0).unwrap();
        // (16 + 4 * 4 * 1 + pi) / 16
        let exact = (16.0 + 16.0 + std::f64::consts::PI) / 16.0;
        assert!((dominator_window_ratio(&phi, &w, 1.0).unwrap() - exact).abs() < 1e-12);
        let g = ConnectionFunction::gaussian(1.0).unwrap();
        let h: Vec<f64> = [2.0, 4.0, 8.0, 16.0]
            .iter()
            .map(|&e| dominator_window_ratio(&g, &Window::centered_box(2, e).unwrap(), 2.0 / 3.0).unwrap() - 1.0)
            .collect();
        assert!(h.windows(2).all(|p| p[1] < p[0] && p[1] > 0.0));
    }
}
