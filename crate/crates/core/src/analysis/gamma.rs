//! Monte Carlo estimates of the normal-approximation terms gamma_1..gamma_6
//! and of the fourth-moment bound, for a standardized functional.
//!
//! Inner moments at fixed points are estimated from `inner` independent
//! samples split into two halves; products of two inner means use one half
//! each, so squared or multiplied conditional means are unbiased before the
//! outer root is taken.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::difference::DifferenceContext;
use crate::analysis::functional::FunctionalSpec;
use crate::error::{RcmError, Result};
use crate::model::graph::RcmGraph;
use crate::model::window::{Shape, Window};
use crate::moments::estimate::{monte_carlo_vec, Accumulator, MomentEstimate};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StandardizationSource {
    Analytic,
    Pilot,
}

/// Mean and standard deviation used to standardize a functional.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: f64,
    pub sd: f64,
    pub source: StandardizationSource,
    pub pilot_replicates: u64,
}

impl Standardization {
    pub fn analytic(mean: f64, variance: f64) -> Result<Self> {
        Self::checked(mean, variance, StandardizationSource::Analytic, 0)
    }

    /// Sample mean and variance of `n` independent evaluations.
    pub fn pilot(spec: &FunctionalSpec, n: usize, seed: u64) -> Result<Self> {
        if n < 2 {
            return Err(RcmError::BudgetTooSmall("a pilot run needs at least two replicates".into()));
        }
        let v = spec.sample_values(n, seed)?;
        let mut acc = Accumulator::default();
        v.iter().for_each(|&x| acc.push(x));
        Self::checked(acc.mean(), acc.variance(), StandardizationSource::Pilot, n as u64)
    }

    fn checked(mean: f64, variance: f64, source: StandardizationSource, pilot_replicates: u64) -> Result<Self> {
        if !(variance > 0.0) || !variance.is_finite() || !mean.is_finite() {
            return Err(RcmError::NotStandardized(format!(
                "cannot standardize with mean {mean} and variance {variance}"
            )));
        }
        Ok(Standardization {
            mean,
            sd: variance.sqrt(),
            source,
            pilot_replicates,
        })
    }

    pub fn apply(&self, v: f64) -> f64 {
        (v - self.mean) / self.sd
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NestedBudget {
    /// Outer integration points.
    pub outer: u64,
    /// Samples per outer point for inner moments (split in two halves).
    pub inner: usize,
}

impl NestedBudget {
    fn check(&self) -> Result<()> {
        if self.outer < 2 {
            return Err(RcmError::BudgetTooSmall("need at least two outer draws".into()));
        }
        if self.inner < 4 {
            return Err(RcmError::BudgetTooSmall(format!(
                "split-sample inner moments need at least 4 replicates, got {}",
                self.inner
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaTerms {
    /// gamma_1 .. gamma_6.
    pub terms: [MomentEstimate; 6],
    /// Empirical `E F^4` used in gamma_4.
    pub fourth_moment: MomentEstimate,
}

impl GammaTerms {
    /// `gamma_1 + gamma_2 + gamma_3`, bounding the Wasserstein distance.
    pub fn wasserstein_bound(&self) -> MomentEstimate {
        self.terms[0].plus(&self.terms[1]).plus(&self.terms[2])
    }

    /// Sum of all six terms, bounding the Kolmogorov distance.
    pub fn kolmogorov_bound(&self) -> MomentEstimate {
        self.terms[3..]
            .iter()
            .fold(self.wasserstein_bound(), |acc, t| acc.plus(t))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourthMomentCheck {
    pub bound: MomentEstimate,
    pub empirical: MomentEstimate,
}

/// Geometry of the integration domains.
struct Domains {
    /// Where `Delta_x F` can be nonzero.
    single: Window,
    /// Where the anchor of a pair term can sit.
    anchor: Window,
    /// Distance within which a second difference can be nonzero.
    reach: f64,
    /// Extra padding of the sampling region.
    extra: f64,
}

impl Domains {
    fn of(spec: &FunctionalSpec) -> Self {
        let reach = spec.pair_reach();
        Domains {
            single: spec.domain(),
            anchor: spec.window.padded(spec.reach() + reach),
            reach,
            extra: 2.0 * reach,
        }
    }

    fn ball_volume(&self, dim: usize) -> f64 {
        crate::model::window::unit_ball_volume(dim) * self.reach.powi(dim as i32)
    }

    fn near(&self, center: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
        Window::new(Shape::Ball, center.to_vec(), self.reach)
            .expect("finite center")
            .sample_uniform(rng)
    }
}

fn graphs(spec: &FunctionalSpec, dom: &Domains, n: usize, rng: &mut ChaCha8Rng) -> Vec<RcmGraph> {
    (0..n)
        .map(|_| spec.sample_graph_padded(rng.random(), dom.extra).expect("validated spec"))
        .collect()
}

/// Split-sample product of the means of `a` over the first half and `b`
/// over the second half.
fn split_product(a: &[f64], b: &[f64]) -> f64 {
    let h = a.len() / 2;
    let ma = a[..h].iter().sum::<f64>() / h as f64;
    let mb = b[h..2 * h].iter().sum::<f64>() / h as f64;
    ma * mb
}

fn sqrt_estimate(e: &MomentEstimate) -> MomentEstimate {
    let v = e.value.max(0.0).sqrt();
    MomentEstimate {
        value: v,
        std_error: if v > 0.0 { e.std_error / (2.0 * v) } else { e.std_error.sqrt() },
        ..*e
    }
}

fn zero(reach: f64) -> MomentEstimate {
    MomentEstimate {
        truncation_radius: reach,
        ..MomentEstimate::closed_form(0.0)
    }
}

fn pilot_fourth_moment(spec: &FunctionalSpec, st: &Standardization, n: u64, seed: u64) -> Result<MomentEstimate> {
    let v = spec.sample_values(n as usize, seed)?;
    let mut acc = Accumulator::default();
    v.iter().for_each(|&x| acc.push(st.apply(x).powi(4)));
    Ok(acc.estimate(0.0))
}

/// Single-point moments: `[E|D|^3, E D^4]` integrated over the domain.
fn single_moments(spec: &FunctionalSpec, st: &Standardization, dom: &Domains, n: u64, seed: u64) -> [MomentEstimate; 2] {
    let acc = monte_carlo_vec(n, seed, 2, |rng, out| {
        let x = dom.single.sample_uniform(rng);
        let g = spec.sample_graph_padded(rng.random(), dom.extra).expect("validated spec");
        let d = DifferenceContext::new(spec, &g)
            .expect("matching graph")
            .difference(&x)
            .expect("fresh point")
            / st.sd;
        out[0] = d.abs().powi(3);
        out[1] = d.powi(4);
    });
    let w = spec.beta * dom.single.volume();
    [acc[0].estimate(spec.reach()).scaled(w), acc[1].estimate(spec.reach()).scaled(w)]
}

/// Nested single-point moments: `[E_x (E D_x^4)^{3/4}, E_x (E D_x^4)^{1/2}]`
/// integrated over the domain.
fn nested_single(spec: &FunctionalSpec, st: &Standardization, dom: &Domains, b: &NestedBudget, seed: u64) -> [MomentEstimate; 2] {
    let acc = monte_carlo_vec(b.outer, seed, 2, |rng, out| {
        let x = dom.single.sample_uniform(rng);
        let d4: Vec<f64> = graphs(spec, dom, b.inner, rng)
            .iter()
            .map(|g| {
                let ctx = DifferenceContext::new(spec, g).expect("matching graph");
                (ctx.difference(&x).expect("fresh point") / st.sd).powi(4)
            })
            .collect();
        let sq = split_product(&d4, &d4).max(0.0);
        out[0] = sq.powf(3.0 / 8.0);
        out[1] = sq.powf(0.25);
    });
    let w = spec.beta * dom.single.volume();
    [acc[0].estimate(spec.reach()).scaled(w), acc[1].estimate(spec.reach()).scaled(w)]
}

/// Estimates gamma_1..gamma_6 for `(F - mean) / sd`.
pub fn gamma_terms(spec: &FunctionalSpec, st: &Standardization, budget: &NestedBudget, seed: u64) -> Result<GammaTerms> {
    spec.validate()?;
    budget.check()?;
    let dom = Domains::of(spec);
    let dim = spec.dim();
    let beta = spec.beta;
    let seeds: Vec<u64> = (0..6).map(|i| crate::model::marks::derive_seed(seed, i)).collect();

    let [g3, d4] = single_moments(spec, st, &dom, budget.outer, seeds[0]);
    let [n34, _] = nested_single(spec, st, &dom, budget, seeds[1]);
    let fourth = pilot_fourth_moment(spec, st, budget.outer, seeds[2])?;

    let (g1, g2, g6) = if dom.reach == 0.0 {
        (zero(0.0), zero(0.0), zero(0.0))
    } else {
        let pair_w = beta.powi(3) * dom.anchor.volume() * dom.ball_volume(dim).powi(2);
        // gamma_1 (nested) and gamma_2 (single sample per point) share the
        // anchor x3 and the two partners x1, x2
        let triple = monte_carlo_vec(budget.outer, seeds[3], 2, |rng, out| {
            let x3 = dom.anchor.sample_uniform(rng);
            let x1 = dom.near(&x3, rng);
            let x2 = dom.near(&x3, rng);
            let mut a = Vec::with_capacity(budget.inner);
            let mut b = Vec::with_capacity(budget.inner);
            for g in graphs(spec, &dom, budget.inner, rng) {
                let ctx = DifferenceContext::new(spec, &g).expect("matching graph");
                let s13 = ctx.second_difference(&x1, &x3).expect("fresh points");
                let s23 = ctx.second_difference(&x2, &x3).expect("fresh points");
                let dx1 = s13.dx / st.sd;
                let dx2 = ctx.difference(&x2).expect("fresh point") / st.sd;
                a.push((dx1 * dx2).powi(2));
                b.push((s13.dxy * s23.dxy / (st.sd * st.sd)).powi(2));
            }
            out[0] = split_product(&a, &b).max(0.0).sqrt();
            out[1] = b.iter().sum::<f64>() / b.len() as f64;
        });
        let g1 = sqrt_estimate(&triple[0].estimate(dom.reach).scaled(pair_w)).scaled(2.0);
        let g2 = sqrt_estimate(&triple[1].estimate(dom.reach).scaled(pair_w));
        let pair = monte_carlo_vec(budget.outer, seeds[4], 1, |rng, out| {
            let x1 = dom.anchor.sample_uniform(rng);
            let x2 = dom.near(&x1, rng);
            let mut a = Vec::with_capacity(budget.inner);
            let mut b = Vec::with_capacity(budget.inner);
            for g in graphs(spec, &dom, budget.inner, rng) {
                let ctx = DifferenceContext::new(spec, &g).expect("matching graph");
                let s = ctx.second_difference(&x1, &x2).expect("fresh points");
                a.push((s.dx / st.sd).powi(4));
                b.push((s.dxy / st.sd).powi(4));
            }
            let mean_b = b.iter().sum::<f64>() / b.len() as f64;
            out[0] = 6.0 * split_product(&a, &b).max(0.0).sqrt() + 3.0 * mean_b;
        });
        let w6 = beta * beta * dom.anchor.volume() * dom.ball_volume(dim);
        let g6 = sqrt_estimate(&pair[0].estimate(dom.reach).scaled(w6));
        (g1, g2, g6)
    };

    let root4 = fourth.value.max(0.0).powf(0.25);
    let g4 = MomentEstimate {
        value: 0.5 * root4 * n34.value,
        std_error: 0.5 * (root4 * n34.std_error).hypot(if root4 > 0.0 {
            n34.value * fourth.std_error / (4.0 * root4.powi(3))
        } else {
            0.0
        }),
        ..n34
    };
    let g5 = sqrt_estimate(&d4);
    Ok(GammaTerms {
        terms: [g1, g2, g3, g4, g5, g6],
        fourth_moment: fourth,
    })
}

/// Right-hand side of
/// `E F^4 <= max{256 [int (E D_x^4)^{1/2} beta dx]^2, 4 int E D_x^4 beta dx + 2}`
/// together with the empirical `E F^4`.
pub fn fourth_moment_bound(
    spec: &FunctionalSpec,
    st: &Standardization,
    budget: &NestedBudget,
    seed: u64,
) -> Result<FourthMomentCheck> {
    spec.validate()?;
    budget.check()?;
    let dom = Domains::of(spec);
    let [_, d4] = single_moments(spec, st, &dom, budget.outer, crate::model::marks::derive_seed(seed, 0));
    let [_, root] = nested_single(spec, st, &dom, budget, crate::model::marks::derive_seed(seed, 1));
    let empirical = pilot_fourth_moment(spec, st, budget.outer, crate::model::marks::derive_seed(seed, 2))?;
    let first = MomentEstimate {
        value: 256.0 * root.value * root.value,
        std_error: 512.0 * root.value * root.std_error,
        ..root
    };
    let second = MomentEstimate {
        value: 4.0 * d4.value + 2.0,
        std_error: 4.0 * d4.std_error,
        ..d4
    };
    let bound = if first.value >= second.value { first } else { second };
    Ok(FourthMomentCheck { bound, empirical })
}
