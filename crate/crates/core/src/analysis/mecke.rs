//! Monte Carlo check of the Mecke formula
//! `E sum_{x in eta} h(x, xi) = beta * int E h(x, xi + delta_x) dx`
//! for `h(x, xi)` = contribution of the component of `x` divided by its
//! order, so that the left side is `E F`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::difference::fresh_id;
use crate::analysis::functional::{FunctionalSpec, Statistic};
use crate::census::components::Components;
use crate::error::{RcmError, Result};
use crate::model::graph::RcmGraph;
use crate::model::marks::derive_seed;
use crate::moments::estimate::{monte_carlo, MomentEstimate};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeckeCheck {
    /// `E sum_{x in eta} h(x, xi)`.
    pub lhs: MomentEstimate,
    /// `beta * int E h(x, xi + delta_x) dx`.
    pub rhs: MomentEstimate,
}

impl MeckeCheck {
    /// `|lhs - rhs|` in units of the combined standard error.
    pub fn z_score(&self) -> f64 {
        let se = self.lhs.std_error.hypot(self.rhs.std_error);
        let diff = (self.lhs.value - self.rhs.value).abs();
        if se == 0.0 {
            if diff == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            diff / se
        }
    }
}

/// `h(x, xi)` for the point of `graph` with index `v`.
fn h(spec: &FunctionalSpec, graph: &RcmGraph, comps: &Components, v: usize) -> f64 {
    if spec.statistic == Statistic::PointCount {
        return f64::from(u8::from(spec.window.contains(graph.points().point(v))));
    }
    let members: Vec<usize> = comps.members(comps.label(v)).iter().map(|&u| u as usize).collect();
    let pts = graph.points();
    let info = spec
        .frame(graph)
        .inspect(&members, |u| pts.point(u), |a, b| graph.has_edge(a, b));
    spec.contribution(&info) / members.len() as f64
}

/// Estimates both sides of the Mecke formula from `n` samples each.
pub fn mecke_check(spec: &FunctionalSpec, n: u64, seed: u64) -> Result<MeckeCheck> {
    spec.validate()?;
    if n < 2 {
        return Err(RcmError::BudgetTooSmall("need at least two samples per side".into()));
    }
    let lhs = monte_carlo(n, derive_seed(seed, 0), |rng: &mut ChaCha8Rng| {
        let g = spec.sample_graph(rng.random()).expect("validated spec");
        let comps = Components::of(&g);
        (0..g.len()).map(|v| h(spec, &g, &comps, v)).sum()
    });
    let domain = spec.domain();
    let rhs = monte_carlo(n, derive_seed(seed, 1), |rng: &mut ChaCha8Rng| {
        let g = spec.sample_graph(rng.random()).expect("validated spec");
        let x = domain.sample_uniform(rng);
        let id = fresh_id(&x);
        let g2 = g.with_extra_points(&[(id, x)]).expect("fresh point inside the region");
        let v = g2.points().index_of(id).expect("inserted point");
        h(spec, &g2, &Components::of(&g2), v)
    });
    Ok(MeckeCheck {
        lhs: lhs.estimate(0.0),
        rhs: rhs.estimate(spec.reach()).scaled(spec.beta * domain.volume()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::census::report::CountMode;
    use crate::model::{ConnectionFunction, Window};

    fn spec(statistic: Statistic) -> FunctionalSpec {
        FunctionalSpec::new(
            statistic,
            Window::centered_box(2, 2.0).unwrap(),
            ConnectionFunction::gilbert(1.0).unwrap(),
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn holds_for_several_statistics() {
        for st in [
            Statistic::PointCount,
            Statistic::CountOrder {
                k: 1,
                mode: CountMode::Lexmin,
            },
            Statistic::CountOrder {
                k: 2,
                mode: CountMode::Inside,
            },
            Statistic::TotalComponents,
        ] {
            let c = mecke_check(&spec(st.clone()), 4000, 11).unwrap();
            assert!(c.z_score() < 4.0, "{st:?}: {c:?}");
        }
    }
}
