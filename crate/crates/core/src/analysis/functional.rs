use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::census::canon::{enumerate_classes, GraphClass, K_MAX};
use crate::census::components::Components;
use crate::census::report::{check_weights, ComponentInfo, CountMode, Frame};
use crate::error::{RcmError, Result};
use crate::model::connection::{ConnectionFunction, DEFAULT_EPS_TRUNC};
use crate::model::graph::{build_rcm, RcmGraph};
use crate::model::marks::{derive_seed, PairMarkSource};
use crate::model::points::sample_poisson;
use crate::model::window::Window;

/// The statistic a functional computes from one sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Statistic {
    /// Components isomorphic to `class`.
    CountClass { class: GraphClass, mode: CountMode },
    /// Components with exactly `k` vertices.
    CountOrder { k: usize, mode: CountMode },
    /// `sum_i a_i * (components isomorphic to classes[i])`.
    Weighted {
        a: Vec<f64>,
        classes: Vec<GraphClass>,
        #[serde(default = "lexmin")]
        mode: CountMode,
    },
    /// Finite components with every vertex in the window.
    TotalComponents,
    /// Number of points in the window.
    PointCount,
}

fn lexmin() -> CountMode {
    CountMode::Lexmin
}

impl Statistic {
    pub fn validate(&self) -> Result<()> {
        match self {
            Statistic::CountOrder { k, .. } if *k == 0 || *k > K_MAX => {
                Err(RcmError::OrderTooLarge { order: *k, cap: K_MAX })
            }
            Statistic::Weighted { a, classes, .. } => check_weights(a, classes),
            _ => Ok(()),
        }
    }

    /// Largest component order the statistic looks at; 0 when it ignores
    /// component structure.
    pub fn order(&self) -> usize {
        match self {
            Statistic::CountClass { class, .. } => class.order(),
            Statistic::CountOrder { k, .. } => *k,
            Statistic::Weighted { classes, .. } => classes.iter().map(|c| c.order()).max().unwrap_or(1),
            Statistic::TotalComponents => 1,
            Statistic::PointCount => 0,
        }
    }

    /// `(|a|_inf, classes)` when the statistic is a weighted lexmin count of
    /// classes, the form covered by the per-sample difference bounds.
    pub fn as_class_sum(&self) -> Option<(f64, Vec<GraphClass>)> {
        match self {
            Statistic::CountClass {
                class,
                mode: CountMode::Lexmin,
            } => Some((1.0, vec![*class])),
            Statistic::CountOrder {
                k,
                mode: CountMode::Lexmin,
            } => Some((1.0, enumerate_classes(*k).ok()?)),
            Statistic::Weighted {
                a,
                classes,
                mode: CountMode::Lexmin,
            } => Some((a.iter().fold(0.0f64, |m, v| m.max(v.abs())), classes.clone())),
            _ => None,
        }
    }

    pub fn label(&self) -> String {
        let mode = |m: &CountMode| match m {
            CountMode::Lexmin => "",
            CountMode::Inside => "~",
        };
        match self {
            Statistic::CountClass { class, mode: m } => format!("eta{}[{class}]", mode(m)),
            Statistic::CountOrder { k, mode: m } => format!("eta{}_{k}", mode(m)),
            Statistic::Weighted { classes, mode: m, .. } => {
                let ids: Vec<String> = classes.iter().map(|c| c.id()).collect();
                format!("S{}[{}]", mode(m), ids.join("+"))
            }
            Statistic::TotalComponents => "alpha".into(),
            Statistic::PointCount => "eta".into(),
        }
    }
}

/// A functional `F = f(xi)` of the edge-marked process: a statistic
/// evaluated in a window of an RCM with connection function `phi` and
/// intensity `beta`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionalSpec {
    pub statistic: Statistic,
    pub window: Window,
    pub phi: ConnectionFunction,
    pub beta: f64,
}

impl FunctionalSpec {
    pub fn new(statistic: Statistic, window: Window, phi: ConnectionFunction, beta: f64) -> Result<Self> {
        let spec = FunctionalSpec {
            statistic,
            window,
            phi,
            beta,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        self.statistic.validate()?;
        self.phi.validate()?;
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return Err(RcmError::InvalidParameter(format!(
                "intensity must be positive, got {}",
                self.beta
            )));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.window.dim()
    }

    /// Interaction range used for edge search (truncated for unbounded phi).
    pub fn range(&self) -> f64 {
        self.phi.interaction_range(DEFAULT_EPS_TRUNC)
    }

    /// Orders up to which components are classified.
    pub fn k_max(&self) -> usize {
        self.statistic.order().max(1)
    }

    /// How far outside the window an added point can change `F`.
    pub fn reach(&self) -> f64 {
        let r = self.range();
        match &self.statistic {
            Statistic::PointCount => 0.0,
            Statistic::TotalComponents => r,
            Statistic::CountClass { mode, .. } | Statistic::CountOrder { mode, .. } | Statistic::Weighted { mode, .. } => {
                match mode {
                    CountMode::Inside => r,
                    CountMode::Lexmin => self.statistic.order() as f64 * r,
                }
            }
        }
    }

    /// How far apart two added points can be while still interacting in
    /// a second difference. Unbounded for the total component count, where
    /// it is truncated at `(K_MAX + 1)` ranges.
    pub fn pair_reach(&self) -> f64 {
        let r = self.range();
        match &self.statistic {
            Statistic::PointCount => 0.0,
            Statistic::TotalComponents => (K_MAX as f64 + 1.0) * r,
            s => (s.order() as f64 + 1.0) * r,
        }
    }

    /// Region where `Delta_x F` can be nonzero.
    pub fn domain(&self) -> Window {
        self.window.padded(self.reach())
    }

    /// Padding of the sampling region around the window: enough that every
    /// point of [`FunctionalSpec::domain`] is classified as in the infinite
    /// model.
    pub fn padding(&self) -> f64 {
        self.reach() + (self.k_max() as f64 + 1.0) * self.range()
    }

    /// Samples the RCM on the window grown by `extra + padding()`.
    pub fn sample_graph_padded(&self, seed: u64, extra: f64) -> Result<RcmGraph> {
        let pts = sample_poisson(&self.window, self.padding() + extra, self.beta, derive_seed(seed, 0))?;
        build_rcm(pts, self.phi, PairMarkSource::new(derive_seed(seed, 1)))
    }

    pub fn sample_graph(&self, seed: u64) -> Result<RcmGraph> {
        self.sample_graph_padded(seed, 0.0)
    }

    /// Value contributed by one component.
    pub fn contribution(&self, info: &ComponentInfo) -> f64 {
        match &self.statistic {
            Statistic::CountClass { class, mode } => {
                if info.counted(*mode) && info.class == Some(*class) {
                    1.0
                } else {
                    0.0
                }
            }
            Statistic::CountOrder { k, mode } => {
                if info.counted(*mode) && info.order == *k {
                    1.0
                } else {
                    0.0
                }
            }
            Statistic::Weighted { a, classes, mode } => {
                if !info.counted(*mode) {
                    return 0.0;
                }
                match info.class {
                    Some(c) => classes.iter().position(|g| *g == c).map(|i| a[i]).unwrap_or(0.0),
                    None => 0.0,
                }
            }
            Statistic::TotalComponents => {
                if info.counted(CountMode::Inside) {
                    1.0
                } else {
                    0.0
                }
            }
            Statistic::PointCount => 0.0,
        }
    }

    pub(crate) fn frame<'a>(&'a self, graph: &'a RcmGraph) -> Frame<'a> {
        Frame::for_graph(graph, &self.window, self.k_max())
    }

    /// Per-component contributions, indexed like `comps`.
    pub(crate) fn contributions(&self, graph: &RcmGraph, comps: &Components) -> Vec<f64> {
        if self.statistic == Statistic::PointCount {
            return vec![0.0; comps.count()];
        }
        let frame = self.frame(graph);
        let pts = graph.points();
        let mut buf = Vec::new();
        comps
            .iter()
            .map(|members| {
                buf.clear();
                buf.extend(members.iter().map(|&v| v as usize));
                let info = frame.inspect(&buf, |v| pts.point(v), |a, b| graph.has_edge(a, b));
                self.contribution(&info)
            })
            .collect()
    }

    /// `f(xi)` for a sampled graph.
    pub fn evaluate(&self, graph: &RcmGraph) -> Result<f64> {
        if graph.points().dim() != self.dim() {
            return Err(RcmError::DimensionMismatch {
                expected: self.dim(),
                found: graph.points().dim(),
            });
        }
        if self.statistic == Statistic::PointCount {
            return Ok(graph.points().count_in(&self.window) as f64);
        }
        let comps = Components::of(graph);
        Ok(self.contributions(graph, &comps).iter().sum())
    }

    /// `F` on `n` independent samples; replicate `i` uses seed
    /// `derive_seed(seed, i)`, so the output does not depend on threading.
    pub fn sample_values(&self, n: usize, seed: u64) -> Result<Vec<f64>> {
        self.validate()?;
        (0..n)
            .into_par_iter()
            .map(|i| {
                let g = self.sample_graph(derive_seed(seed, i as u64))?;
                self.evaluate(&g)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::census::report::census;

    fn spec(statistic: Statistic) -> FunctionalSpec {
        FunctionalSpec::new(
            statistic,
            Window::centered_box(2, 3.0).unwrap(),
            ConnectionFunction::gilbert(1.0).unwrap(),
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn evaluation_matches_census() {
        let edge = GraphClass::edge();
        let specs = [
            spec(Statistic::CountOrder {
                k: 2,
                mode: CountMode::Lexmin,
            }),
            spec(Statistic::CountClass {
                class: edge,
                mode: CountMode::Inside,
            }),
            spec(Statistic::TotalComponents),
            spec(Statistic::PointCount),
            spec(Statistic::Weighted {
                a: vec![2.0, -1.0],
                classes: vec![GraphClass::vertex(), GraphClass::path(3).unwrap()],
                mode: CountMode::Lexmin,
            }),
        ];
        for seed in 0..20 {
            let g = specs[4].sample_graph(seed).unwrap();
            let r = census(&g, &specs[0].window, 3).unwrap();
            let v: Vec<f64> = specs.iter().map(|s| s.evaluate(&g).unwrap()).collect();
            assert_eq!(v[0], r.count_order(2, CountMode::Lexmin) as f64);
            assert_eq!(v[1], r.count_class(&edge, CountMode::Inside) as f64);
            assert_eq!(v[2], r.total_inside as f64);
            assert_eq!(v[3], r.points_in_window as f64);
            let w = 2.0 * r.count_class(&GraphClass::vertex(), CountMode::Lexmin) as f64
                - r.count_class(&GraphClass::path(3).unwrap(), CountMode::Lexmin) as f64;
            assert_eq!(v[4], w);
        }
    }

    #[test]
    fn sample_values_are_reproducible() {
        let s = spec(Statistic::TotalComponents);
        let a = s.sample_values(16, 4).unwrap();
        let b = s.sample_values(16, 4).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().any(|&v| v != a[0]));
    }

    #[test]
    fn validation_and_serde() {
        assert!(FunctionalSpec::new(
            Statistic::CountOrder {
                k: 9,
                mode: CountMode::Lexmin
            },
            Window::centered_box(2, 1.0).unwrap(),
            ConnectionFunction::gilbert(1.0).unwrap(),
            1.0
        )
        .is_err());
        let s = spec(Statistic::Weighted {
            a: vec![1.0],
            classes: vec![GraphClass::edge()],
            mode: CountMode::Lexmin,
        });
        let text = serde_json::to_string(&s).unwrap();
        let back: FunctionalSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);
        assert_eq!(s.reach(), 2.0);
        assert_eq!(s.padding(), 5.0);
    }
}
