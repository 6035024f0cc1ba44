use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::census::canon::{GraphClass, K_MAX};
use crate::census::components::Components;
use crate::error::{RcmError, Result};
use crate::model::graph::RcmGraph;
use crate::model::points::lex_cmp;
use crate::model::window::Window;

/// How a component is attributed to a window.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountMode {
    /// Lexicographic minimum lies in the window.
    Lexmin,
    /// Every vertex lies in the window.
    Inside,
}

/// What the census needs to know about one component.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ComponentInfo {
    pub order: usize,
    pub lexmin_in_window: bool,
    pub meets_window: bool,
    pub all_inside: bool,
    pub touches_boundary: bool,
    pub class: Option<GraphClass>,
}

impl ComponentInfo {
    pub fn counted(&self, mode: CountMode) -> bool {
        !self.touches_boundary
            && match mode {
                CountMode::Lexmin => self.lexmin_in_window,
                CountMode::Inside => self.all_inside,
            }
    }
}

/// Window, sampling region and range used to classify components.
#[derive(Clone, Copy, Debug)]
pub struct Frame<'a> {
    pub window: &'a Window,
    pub region: Option<&'a Window>,
    pub range: f64,
    pub k_max: usize,
}

impl<'a> Frame<'a> {
    pub fn for_graph(graph: &'a RcmGraph, window: &'a Window, k_max: usize) -> Self {
        Frame {
            window,
            region: graph.points().region(),
            range: graph.interaction_range(),
            k_max: k_max.min(K_MAX),
        }
    }

    /// True when an unseen point outside the region could attach to `x`.
    #[inline]
    pub fn near_boundary(&self, x: &[f64]) -> bool {
        match self.region {
            Some(r) => r.depth(x) < self.range,
            None => false,
        }
    }

    /// Classifies the component with the given vertices. `coord` maps a
    /// vertex to its position, `adjacent` tests edges inside the component.
    pub fn inspect<'c, C, A>(&self, vertices: &[usize], coord: C, adjacent: A) -> ComponentInfo
    where
        C: Fn(usize) -> &'c [f64],
        A: Fn(usize, usize) -> bool,
    {
        let mut lexmin = vertices[0];
        let mut meets = false;
        let mut all_inside = true;
        let mut boundary = false;
        for &v in vertices {
            let x = coord(v);
            if lex_cmp(x, coord(lexmin)) == std::cmp::Ordering::Less {
                lexmin = v;
            }
            if self.window.contains(x) {
                meets = true;
            } else {
                all_inside = false;
            }
            boundary |= self.near_boundary(x);
        }
        let order = vertices.len();
        let lexmin_in_window = self.window.contains(coord(lexmin));
        let class = if !boundary && lexmin_in_window && order <= self.k_max {
            let mut rows = [0u8; K_MAX];
            for a in 1..order {
                for b in 0..a {
                    if adjacent(vertices[a], vertices[b]) {
                        rows[a] |= 1 << b;
                        rows[b] |= 1 << a;
                    }
                }
            }
            Some(GraphClass::from_rows(order, &rows).expect("components are connected"))
        } else {
            None
        };
        ComponentInfo {
            order,
            lexmin_in_window,
            meets_window: meets,
            all_inside,
            touches_boundary: boundary,
            class,
        }
    }
}

/// Component counts of one sample in one window.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CensusReport {
    pub k_max: usize,
    /// `eta_G(W)` for classes of order at most `k_max`.
    pub lexmin_by_class: BTreeMap<GraphClass, u64>,
    /// `eta_k(W)` for every order seen.
    pub lexmin_by_order: BTreeMap<usize, u64>,
    /// `eta~_G(W)`.
    pub inside_by_class: BTreeMap<GraphClass, u64>,
    /// `eta~_k(W)`.
    pub inside_by_order: BTreeMap<usize, u64>,
    /// Finite components with every vertex in W, any order.
    pub total_inside: u64,
    /// Components meeting W but too close to the sampling boundary to be
    /// classified; excluded from every other count.
    pub boundary_touching: u64,
    pub points_in_window: u64,
}

impl CensusReport {
    pub(crate) fn add(&mut self, info: &ComponentInfo) {
        if info.touches_boundary {
            if info.meets_window {
                self.boundary_touching += 1;
            }
            return;
        }
        if info.lexmin_in_window {
            *self.lexmin_by_order.entry(info.order).or_default() += 1;
            if let Some(c) = info.class {
                *self.lexmin_by_class.entry(c).or_default() += 1;
            }
        }
        if info.all_inside {
            self.total_inside += 1;
            *self.inside_by_order.entry(info.order).or_default() += 1;
            if let Some(c) = info.class {
                *self.inside_by_class.entry(c).or_default() += 1;
            }
        }
    }

    pub fn count_class(&self, class: &GraphClass, mode: CountMode) -> u64 {
        let map = match mode {
            CountMode::Lexmin => &self.lexmin_by_class,
            CountMode::Inside => &self.inside_by_class,
        };
        map.get(class).copied().unwrap_or(0)
    }

    pub fn count_order(&self, k: usize, mode: CountMode) -> u64 {
        let map = match mode {
            CountMode::Lexmin => &self.lexmin_by_order,
            CountMode::Inside => &self.inside_by_order,
        };
        map.get(&k).copied().unwrap_or(0)
    }

    /// Components of order at most `m`.
    pub fn count_up_to(&self, m: usize, mode: CountMode) -> u64 {
        (1..=m).map(|k| self.count_order(k, mode)).sum()
    }
}

/// Checks `a` and `classes` for a weighted count.
pub fn check_weights(a: &[f64], classes: &[GraphClass]) -> Result<()> {
    if a.len() != classes.len() {
        return Err(RcmError::DimensionMismatch {
            expected: classes.len(),
            found: a.len(),
        });
    }
    if a.is_empty() || a.iter().all(|&v| v == 0.0) {
        return Err(RcmError::InvalidParameter("weight vector must be nonzero".into()));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(RcmError::InvalidParameter("weights must be finite".into()));
    }
    for (i, c) in classes.iter().enumerate() {
        if classes[..i].contains(c) {
            return Err(RcmError::InvalidParameter(format!("class {c} repeated")));
        }
    }
    Ok(())
}

/// `sum_i a_i * eta_{G_i}(W)` in the given counting mode.
pub fn weighted_count(report: &CensusReport, a: &[f64], classes: &[GraphClass], mode: CountMode) -> Result<f64> {
    check_weights(a, classes)?;
    for c in classes {
        if c.order() > report.k_max {
            return Err(RcmError::OrderTooLarge {
                order: c.order(),
                cap: report.k_max,
            });
        }
    }
    Ok(a.iter()
        .zip(classes)
        .map(|(w, c)| w * report.count_class(c, mode) as f64)
        .sum())
}

/// Counts the components of `graph` in `window` by class (orders up to
/// `k_max`) and by order, in both counting modes.
pub fn census(graph: &RcmGraph, window: &Window, k_max: usize) -> Result<CensusReport> {
    census_with(graph, &Components::of(graph), window, k_max)
}

/// As [`census`], but refuses to run when phi has unbounded support and the
/// sample carries no sampling region reaching one interaction range past W.
pub fn census_strict(graph: &RcmGraph, window: &Window, k_max: usize) -> Result<CensusReport> {
    if graph.truncated() {
        let ok = graph
            .points()
            .region()
            .map(|r| r.inradius() >= window.inradius() + graph.interaction_range())
            .unwrap_or(false);
        if !ok {
            return Err(RcmError::InvalidParameter(
                "strict census needs a sampling region padded by the interaction range".into(),
            ));
        }
    }
    census(graph, window, k_max)
}

pub(crate) fn census_with(graph: &RcmGraph, comps: &Components, window: &Window, k_max: usize) -> Result<CensusReport> {
    if k_max == 0 || k_max > K_MAX {
        return Err(RcmError::OrderTooLarge { order: k_max, cap: K_MAX });
    }
    if window.dim() != graph.points().dim() {
        return Err(RcmError::DimensionMismatch {
            expected: graph.points().dim(),
            found: window.dim(),
        });
    }
    let frame = Frame::for_graph(graph, window, k_max);
    let pts = graph.points();
    let mut report = CensusReport {
        k_max,
        points_in_window: pts.count_in(window) as u64,
        ..Default::default()
    };
    let mut buf = Vec::new();
    for members in comps.iter() {
        buf.clear();
        buf.extend(members.iter().map(|&v| v as usize));
        let info = frame.inspect(&buf, |v| pts.point(v), |a, b| graph.has_edge(a, b));
        report.add(&info);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::census::canon::enumerate_classes;
    use crate::model::{build_rcm, sample_poisson, ConnectionFunction, PairMarkSource, PointSet};

    fn gilbert() -> ConnectionFunction {
        ConnectionFunction::gilbert(1.0).unwrap()
    }

    #[test]
    fn single_point() {
        let pts = PointSet::from_points(2, vec![vec![0.0, 0.0]]).unwrap();
        let g = build_rcm(pts, gilbert(), PairMarkSource::new(1)).unwrap();
        let w = Window::centered_box(2, 1.0).unwrap();
        let r = census(&g, &w, 4).unwrap();
        assert_eq!(r.count_order(1, CountMode::Lexmin), 1);
        assert_eq!(r.count_order(1, CountMode::Inside), 1);
        assert_eq!(r.total_inside, 1);
        assert_eq!(r.count_class(&GraphClass::vertex(), CountMode::Lexmin), 1);
    }

    #[test]
    fn straddling_edge() {
        let pts = PointSet::from_points(2, vec![vec![0.8, 0.0], vec![1.5, 0.0]]).unwrap();
        let g = build_rcm(pts, gilbert(), PairMarkSource::new(1)).unwrap();
        let w = Window::centered_box(2, 1.0).unwrap();
        let r = census(&g, &w, 4).unwrap();
        assert_eq!(r.count_order(2, CountMode::Lexmin), 1);
        assert_eq!(r.count_order(2, CountMode::Inside), 0);
        assert_eq!(r.total_inside, 0);
    }

    #[test]
    fn identities_on_random_samples() {
        let w = Window::centered_box(2, 5.0).unwrap();
        for seed in 0..50 {
            let pts = sample_poisson(&w, 9.0, 1.0, seed).unwrap();
            let g = build_rcm(pts, gilbert(), PairMarkSource::new(seed)).unwrap();
            let r = census(&g, &w, 8).unwrap();
            assert_eq!(r.total_inside, r.inside_by_order.values().sum::<u64>());
            for k in 1..=8 {
                for mode in [CountMode::Lexmin, CountMode::Inside] {
                    let by_class: u64 = enumerate_classes(k).unwrap().iter().map(|c| r.count_class(c, mode)).sum();
                    assert_eq!(by_class, r.count_order(k, mode));
                }
            }
        }
    }

    #[test]
    fn weighted_count_checks() {
        let mut r = CensusReport {
            k_max: 3,
            ..Default::default()
        };
        r.lexmin_by_class.insert(GraphClass::vertex(), 5);
        r.lexmin_by_class.insert(GraphClass::edge(), 2);
        let v = weighted_count(&r, &[2.0, -1.0], &[GraphClass::vertex(), GraphClass::edge()], CountMode::Lexmin).unwrap();
        assert_eq!(v, 8.0);
        assert!(weighted_count(&r, &[0.0], &[GraphClass::vertex()], CountMode::Lexmin).is_err());
        assert!(weighted_count(&r, &[1.0, 1.0], &[GraphClass::vertex(), GraphClass::vertex()], CountMode::Lexmin).is_err());
    }

    #[test]
    fn json_round_trip() {
        let w = Window::centered_box(2, 3.0).unwrap();
        let pts = sample_poisson(&w, 5.0, 1.0, 3).unwrap();
        let g = build_rcm(pts, gilbert(), PairMarkSource::new(3)).unwrap();
        let r = census(&g, &w, 5).unwrap();
        let s = serde_json::to_string(&r).unwrap();
        assert_eq!(serde_json::from_str::<CensusReport>(&s).unwrap(), r);
    }

    #[test]
    fn strict_mode_needs_padding() {
        let w = Window::centered_box(2, 3.0).unwrap();
        let phi = ConnectionFunction::gaussian(0.5).unwrap();
        let pts = sample_poisson(&w, 0.0, 1.0, 3).unwrap();
        let g = build_rcm(pts, phi, PairMarkSource::new(3)).unwrap();
        assert!(census_strict(&g, &w, 3).is_err());
        let pts = sample_poisson(&w, 4.0, 1.0, 3).unwrap();
        let g = build_rcm(pts, phi, PairMarkSource::new(3)).unwrap();
        assert!(census_strict(&g, &w, 3).is_ok());
    }
}
