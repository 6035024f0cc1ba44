//! First and second difference operators computed locally: the base
//! components are found once per sample, and inserting fresh points only
//! re-inspects the components the new points attach to.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::analysis::functional::{FunctionalSpec, Statistic};
use crate::census::components::Components;
use crate::error::{RcmError, Result};
use crate::model::graph::RcmGraph;
use crate::model::marks::{mix64, Marks};

/// Reserved negative id of an inserted point, derived from its
/// coordinates so that its marks do not depend on insertion order.
pub fn fresh_id(x: &[f64]) -> i64 {
    let h = x.iter().fold(0x51_7cc1_b727_220a_u64, |h, c| mix64(h ^ c.to_bits()));
    -1 - (h >> 2) as i64
}

/// The four coupled evaluations behind a second difference.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DifferenceSample {
    pub base: f64,
    pub with_x: f64,
    pub with_y: f64,
    pub with_xy: f64,
    pub dx: f64,
    pub dy: f64,
    pub dxy: f64,
}

impl DifferenceSample {
    fn from_values(base: f64, with_x: f64, with_y: f64, with_xy: f64) -> Self {
        DifferenceSample {
            base,
            with_x,
            with_y,
            with_xy,
            dx: with_x - base,
            dy: with_y - base,
            dxy: with_xy - with_x - with_y + base,
        }
    }
}

/// A graph plus a few inserted points, with the edges they create.
pub struct Overlay<'a> {
    graph: &'a RcmGraph,
    extras: Vec<Vec<f64>>,
    /// Base neighbors of each inserted point, ascending.
    links: Vec<Vec<u32>>,
    /// Edges among inserted points.
    inner: Vec<(usize, usize)>,
}

impl<'a> Overlay<'a> {
    pub fn new(graph: &'a RcmGraph, marks: &dyn Marks, extras: &[(i64, &[f64])]) -> Result<Self> {
        let pts = graph.points();
        let d = pts.dim();
        let phi = graph.phi();
        let range2 = graph.interaction_range().powi(2);
        let mut links = Vec::with_capacity(extras.len());
        for (e, &(id, x)) in extras.iter().enumerate() {
            if x.len() != d {
                return Err(RcmError::DimensionMismatch { expected: d, found: x.len() });
            }
            if let Some(region) = pts.region() {
                if !region.contains(x) {
                    return Err(RcmError::InvalidParameter("inserted point lies outside the sampling region".into()));
                }
            }
            for &(_, y) in &extras[..e] {
                if x == y {
                    return Err(RcmError::PointsNotDistinct);
                }
            }
            let mut nb = Vec::new();
            for j in 0..pts.len() {
                let q = pts.point(j);
                let d2: f64 = x.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum();
                if d2 == 0.0 {
                    return Err(RcmError::DuplicatePoint(pts.len() + e, j));
                }
                if d2 <= range2 && marks.mark(id, pts.id(j)) <= phi.eval_radial(d2.sqrt()) {
                    nb.push(j as u32);
                }
            }
            links.push(nb);
        }
        let mut inner = Vec::new();
        for a in 0..extras.len() {
            for b in a + 1..extras.len() {
                let (xa, xb) = (extras[a].1, extras[b].1);
                let d2: f64 = xa.iter().zip(xb).map(|(p, q)| (p - q) * (p - q)).sum();
                if d2 <= range2 && marks.mark(extras[a].0, extras[b].0) <= phi.eval_radial(d2.sqrt()) {
                    inner.push((a, b));
                }
            }
        }
        Ok(Overlay {
            graph,
            extras: extras.iter().map(|(_, x)| x.to_vec()).collect(),
            links,
            inner,
        })
    }

    fn n(&self) -> usize {
        self.graph.len()
    }

    /// Position of overlay node `v` (inserted points follow the base).
    pub fn coord(&self, v: usize) -> &[f64] {
        let n = self.n();
        if v < n {
            self.graph.points().point(v)
        } else {
            &self.extras[v - n]
        }
    }

    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        let n = self.n();
        match (a < n, b < n) {
            (true, true) => self.graph.has_edge(a, b),
            (true, false) => self.links[b - n].binary_search(&(a as u32)).is_ok(),
            (false, true) => self.links[a - n].binary_search(&(b as u32)).is_ok(),
            (false, false) => {
                let (p, q) = ((a - n).min(b - n), (a - n).max(b - n));
                self.inner.contains(&(p, q))
            }
        }
    }

    /// Neighbors of overlay node `v`.
    pub fn neighbors(&self, v: usize) -> Vec<usize> {
        let n = self.n();
        let mut out = Vec::new();
        if v < n {
            out.extend(self.graph.neighbors(v).iter().map(|&u| u as usize));
            for (e, l) in self.links.iter().enumerate() {
                if l.binary_search(&(v as u32)).is_ok() {
                    out.push(n + e);
                }
            }
        } else {
            let e = v - n;
            out.extend(self.links[e].iter().map(|&u| u as usize));
            for &(p, q) in &self.inner {
                if p == e {
                    out.push(n + q);
                } else if q == e {
                    out.push(n + p);
                }
            }
        }
        out
    }

    pub fn degree(&self, e: usize) -> usize {
        self.neighbors(self.n() + e).len()
    }

    /// Node of inserted point `e`.
    pub fn node(&self, e: usize) -> usize {
        self.n() + e
    }

    /// Is a node satisfying `target` reachable from `start` by a path of at
    /// most `max_edges` edges?
    pub fn reaches<T: Fn(usize) -> bool>(&self, start: usize, max_edges: usize, target: T) -> bool {
        if target(start) {
            return true;
        }
        let mut dist = std::collections::HashMap::new();
        dist.insert(start, 0usize);
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            let dv = dist[&v];
            if dv == max_edges {
                continue;
            }
            for u in self.neighbors(v) {
                if dist.contains_key(&u) {
                    continue;
                }
                if target(u) {
                    return true;
                }
                dist.insert(u, dv + 1);
                queue.push_back(u);
            }
        }
        false
    }
}

/// A sample prepared for repeated difference evaluations.
pub struct DifferenceContext<'a> {
    spec: &'a FunctionalSpec,
    graph: &'a RcmGraph,
    marks: &'a dyn Marks,
    comps: Components,
    contrib: Vec<f64>,
    base: f64,
}

impl<'a> DifferenceContext<'a> {
    /// Uses the graph's own pair marks for the inserted points.
    pub fn new(spec: &'a FunctionalSpec, graph: &'a RcmGraph) -> Result<Self> {
        Self::with_marks(spec, graph, graph.marks())
    }

    /// Uses `marks` for every pair involving an inserted point; they must
    /// agree with the marks the graph was built from.
    pub fn with_marks(spec: &'a FunctionalSpec, graph: &'a RcmGraph, marks: &'a dyn Marks) -> Result<Self> {
        if graph.points().dim() != spec.dim() {
            return Err(RcmError::DimensionMismatch {
                expected: spec.dim(),
                found: graph.points().dim(),
            });
        }
        if *graph.phi() != spec.phi {
            return Err(RcmError::InvalidParameter("graph and functional use different connection functions".into()));
        }
        let comps = Components::of(graph);
        let contrib = spec.contributions(graph, &comps);
        let base = if spec.statistic == Statistic::PointCount {
            graph.points().count_in(&spec.window) as f64
        } else {
            contrib.iter().sum()
        };
        Ok(DifferenceContext {
            spec,
            graph,
            marks,
            comps,
            contrib,
            base,
        })
    }

    pub fn value(&self) -> f64 {
        self.base
    }

    pub fn graph(&self) -> &RcmGraph {
        self.graph
    }

    pub fn overlay(&self, extras: &[(i64, &[f64])]) -> Result<Overlay<'a>> {
        Overlay::new(self.graph, self.marks, extras)
    }

    /// `f(xi_A) - f(xi)` for the inserted points `A`.
    pub fn delta(&self, extras: &[(i64, &[f64])]) -> Result<f64> {
        let ov = self.overlay(extras)?;
        Ok(self.delta_on(&ov))
    }

    fn delta_on(&self, ov: &Overlay) -> f64 {
        if self.spec.statistic == Statistic::PointCount {
            return ov.extras.iter().filter(|x| self.spec.window.contains(x)).count() as f64;
        }
        let n = self.graph.len();
        let e = ov.extras.len();
        // local nodes: inserted points 0..e, then touched base components
        let mut touched: Vec<usize> = ov
            .links
            .iter()
            .flatten()
            .map(|&v| self.comps.label(v as usize))
            .collect();
        touched.sort_unstable();
        touched.dedup();
        let mut parent: Vec<usize> = (0..e + touched.len()).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        let join = |p: &mut Vec<usize>, a: usize, b: usize| {
            let (ra, rb) = (find(p, a), find(p, b));
            if ra != rb {
                p[ra.max(rb)] = ra.min(rb);
            }
        };
        for (i, l) in ov.links.iter().enumerate() {
            for &v in l {
                let c = touched.binary_search(&self.comps.label(v as usize)).unwrap();
                join(&mut parent, i, e + c);
            }
        }
        for &(a, b) in &ov.inner {
            join(&mut parent, a, b);
        }
        let frame = self.spec.frame(self.graph);
        let mut total = 0.0;
        let mut buf = Vec::new();
        for i in 0..e {
            if find(&mut parent, i) != i {
                continue;
            }
            // i is the root of a new component (roots are the smallest index)
            buf.clear();
            for j in 0..e {
                if find(&mut parent, j) == i {
                    buf.push(n + j);
                }
            }
            for (c, &label) in touched.iter().enumerate() {
                if find(&mut parent, e + c) == i {
                    buf.extend(self.comps.members(label).iter().map(|&v| v as usize));
                }
            }
            let info = frame.inspect(&buf, |v| ov.coord(v), |a, b| ov.adjacent(a, b));
            total += self.spec.contribution(&info);
        }
        for &label in &touched {
            total -= self.contrib[label];
        }
        total
    }

    /// `Delta_x F`.
    pub fn difference(&self, x: &[f64]) -> Result<f64> {
        self.delta(&[(fresh_id(x), x)])
    }

    /// All four coupled evaluations for the pair `(x, y)`.
    pub fn second_difference(&self, x: &[f64], y: &[f64]) -> Result<DifferenceSample> {
        let dx = self.delta(&[(fresh_id(x), x)])?;
        let dy = self.delta(&[(fresh_id(y), y)])?;
        let dxy = self.delta(&[(fresh_id(x), x), (fresh_id(y), y)])?;
        Ok(DifferenceSample::from_values(self.base, self.base + dx, self.base + dy, self.base + dxy))
    }

    /// `(Delta_x F, bound)` for the first-order per-sample bound
    /// `|a|_inf (deg(x) + 1) 1{x reaches W in at most k edges}` in `Gamma(eta_x)`.
    pub fn first_difference_bound(&self, x: &[f64]) -> Result<(f64, f64)> {
        let (a_inf, k) = self.class_sum()?;
        let ov = self.overlay(&[(fresh_id(x), x)])?;
        let delta = self.delta_on(&ov);
        let bound = a_inf * (ov.degree(0) as f64 + 1.0) * f64::from(u8::from(self.reaches_window(&ov, 0, k)));
        Ok((delta, bound))
    }

    /// `(Delta^2_{x,y} F, bound)` for the second-order per-sample bound
    /// `|a|_inf (2 deg(y, Gamma(eta_y)) + 3) 1{x reaches y in k+1 edges in Gamma(eta_{x,y})}
    /// 1{x reaches W in k edges in Gamma(eta_x) or y does in Gamma(eta_y)}`.
    pub fn second_difference_bound(&self, x: &[f64], y: &[f64]) -> Result<(DifferenceSample, f64)> {
        let (a_inf, k) = self.class_sum()?;
        let ox = self.overlay(&[(fresh_id(x), x)])?;
        let oy = self.overlay(&[(fresh_id(y), y)])?;
        let oxy = self.overlay(&[(fresh_id(x), x), (fresh_id(y), y)])?;
        let (dx, dy, dxy) = (self.delta_on(&ox), self.delta_on(&oy), self.delta_on(&oxy));
        let sample = DifferenceSample::from_values(self.base, self.base + dx, self.base + dy, self.base + dxy);
        let y_node = oxy.node(1);
        let linked = oxy.reaches(oxy.node(0), k + 1, |v| v == y_node);
        let near = self.reaches_window(&ox, 0, k) || self.reaches_window(&oy, 0, k);
        let bound = if linked && near {
            a_inf * (2.0 * oy.degree(0) as f64 + 3.0)
        } else {
            0.0
        };
        Ok((sample, bound))
    }

    fn class_sum(&self) -> Result<(f64, usize)> {
        let (a_inf, classes) = self.spec.statistic.as_class_sum().ok_or_else(|| {
            RcmError::InvalidParameter("difference bounds apply to weighted lexmin class counts".into())
        })?;
        let k = classes.iter().map(|c| c.order()).max().unwrap_or(1);
        Ok((a_inf, k))
    }

    fn reaches_window(&self, ov: &Overlay, e: usize, k: usize) -> bool {
        let w = &self.spec.window;
        ov.reaches(ov.node(e), k, |v| w.contains(ov.coord(v)))
    }
}

/// `Delta_x F` on one sample.
pub fn difference(spec: &FunctionalSpec, graph: &RcmGraph, x: &[f64]) -> Result<f64> {
    DifferenceContext::new(spec, graph)?.difference(x)
}

/// The coupled evaluations for `Delta^2_{x,y} F` on one sample.
pub fn second_difference(spec: &FunctionalSpec, graph: &RcmGraph, x: &[f64], y: &[f64]) -> Result<DifferenceSample> {
    DifferenceContext::new(spec, graph)?.second_difference(x, y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::census::canon::GraphClass;
    use crate::census::report::CountMode;
    use crate::model::{ConnectionFunction, PairMarkSource, PointSet, Window};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn statistics() -> Vec<Statistic> {
        vec![
            Statistic::CountOrder {
                k: 1,
                mode: CountMode::Lexmin,
            },
            Statistic::CountOrder {
                k: 3,
                mode: CountMode::Inside,
            },
            Statistic::CountClass {
                class: GraphClass::path(3).unwrap(),
                mode: CountMode::Lexmin,
            },
            Statistic::Weighted {
                a: vec![1.5, -2.0],
                classes: vec![GraphClass::edge(), GraphClass::complete(3).unwrap()],
                mode: CountMode::Lexmin,
            },
            Statistic::TotalComponents,
            Statistic::PointCount,
        ]
    }

    fn spec(statistic: Statistic, phi: ConnectionFunction) -> FunctionalSpec {
        FunctionalSpec::new(statistic, Window::centered_box(2, 2.0).unwrap(), phi, 1.2).unwrap()
    }

    fn point(rng: &mut ChaCha8Rng, w: &Window) -> Vec<f64> {
        w.sample_uniform(rng)
    }

    #[test]
    fn local_differences_match_full_recomputation() {
        let phis = [
            ConnectionFunction::gilbert(1.0).unwrap(),
            ConnectionFunction::scaled_indicator(0.6, 1.2).unwrap(),
            ConnectionFunction::gaussian(0.6).unwrap(),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for phi in phis {
            for stat in statistics() {
                let s = spec(stat, phi);
                let dom = s.domain();
                for seed in 0..15 {
                    let g = s.sample_graph(seed).unwrap();
                    let ctx = DifferenceContext::new(&s, &g).unwrap();
                    assert_eq!(ctx.value(), s.evaluate(&g).unwrap());
                    let x = point(&mut rng, &dom);
                    let y = point(&mut rng, &dom);
                    let ds = ctx.second_difference(&x, &y).unwrap();
                    let gx = g.with_extra_points(&[(fresh_id(&x), x.clone())]).unwrap();
                    let gy = g.with_extra_points(&[(fresh_id(&y), y.clone())]).unwrap();
                    let gxy = g.with_extra_points(&[(fresh_id(&x), x.clone()), (fresh_id(&y), y.clone())]).unwrap();
                    let eps = 1e-12;
                    assert!((ds.with_x - s.evaluate(&gx).unwrap()).abs() < eps);
                    assert!((ds.with_y - s.evaluate(&gy).unwrap()).abs() < eps);
                    assert!((ds.with_xy - s.evaluate(&gxy).unwrap()).abs() < eps);
                    assert_eq!(ds.dxy, ds.with_xy - ds.with_x - ds.with_y + ds.base);
                    let sw = ctx.second_difference(&y, &x).unwrap();
                    assert!((sw.dxy - ds.dxy).abs() < eps);
                }
            }
        }
    }

    #[test]
    fn trivial_cases() {
        let g1 = ConnectionFunction::gilbert(1.0).unwrap();
        let s = spec(
            Statistic::CountOrder {
                k: 1,
                mode: CountMode::Lexmin,
            },
            g1,
        );
        let empty = crate::model::build_rcm(
            PointSet::from_points(2, vec![]).unwrap().with_region(s.window.padded(s.padding())),
            g1,
            PairMarkSource::new(0),
        )
        .unwrap();
        assert_eq!(difference(&s, &empty, &[0.5, 0.5]).unwrap(), 1.0);
        let g = s.sample_graph(1).unwrap();
        let far = [s.window.extent() + s.padding() - 0.01, 0.0];
        assert_eq!(difference(&s, &g, &far).unwrap(), 0.0);
        let p = g.points().point(0).to_vec();
        assert!(matches!(difference(&s, &g, &p), Err(RcmError::DuplicatePoint(..))));
        assert!(second_difference(&s, &g, &[0.1, 0.1], &[0.1, 0.1]).is_err());
    }

    #[test]
    fn separated_insertions_do_not_interact() {
        let g1 = ConnectionFunction::gilbert(0.5).unwrap();
        let s = spec(Statistic::TotalComponents, g1);
        let pts = PointSet::from_points(2, vec![vec![-1.0, -1.0], vec![1.0, 1.0]])
            .unwrap()
            .with_region(s.window.padded(s.padding()));
        let g = crate::model::build_rcm(pts, g1, PairMarkSource::new(0)).unwrap();
        let ds = second_difference(&s, &g, &[-1.2, -1.0], &[1.2, 1.0]).unwrap();
        assert_eq!(ds.dx, 0.0);
        assert_eq!(ds.dxy, 0.0);
    }

    #[test]
    fn linearity_of_weighted_counts() {
        let g1 = ConnectionFunction::gilbert(1.0).unwrap();
        let (c1, c2) = (GraphClass::edge(), GraphClass::path(3).unwrap());
        let s = spec(
            Statistic::Weighted {
                a: vec![2.0, -0.5],
                classes: vec![c1, c2],
                mode: CountMode::Lexmin,
            },
            g1,
        );
        let s1 = spec(Statistic::CountClass { class: c1, mode: CountMode::Lexmin }, g1);
        let s2 = spec(Statistic::CountClass { class: c2, mode: CountMode::Lexmin }, g1);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for seed in 0..30 {
            let g = s.sample_graph(seed).unwrap();
            let x = point(&mut rng, &s.domain());
            let d = difference(&s, &g, &x).unwrap();
            let d1 = difference(&s1, &g, &x).unwrap();
            let d2 = difference(&s2, &g, &x).unwrap();
            assert_eq!(d, 2.0 * d1 - 0.5 * d2);
        }
    }

    #[test]
    fn per_sample_bounds_hold() {
        let phi = ConnectionFunction::scaled_indicator(0.7, 1.0).unwrap();
        let s = spec(
            Statistic::CountOrder {
                k: 2,
                mode: CountMode::Lexmin,
            },
            phi,
        );
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for seed in 0..200 {
            let g = s.sample_graph(seed).unwrap();
            let ctx = DifferenceContext::new(&s, &g).unwrap();
            let x = point(&mut rng, &s.domain());
            let (d, b) = ctx.first_difference_bound(&x).unwrap();
            assert!(d.abs() <= b);
            let off: f64 = rng.random_range(-1.5..1.5);
            let y = vec![x[0] + off, x[1] - 0.5 * off];
            if let Ok((ds, b2)) = ctx.second_difference_bound(&x, &y) {
                assert!(ds.dxy.abs() <= b2);
            }
        }
        let t = spec(Statistic::TotalComponents, phi);
        let g = t.sample_graph(0).unwrap();
        assert!(DifferenceContext::new(&t, &g).unwrap().first_difference_bound(&[0.0, 0.0]).is_err());
    }
}
