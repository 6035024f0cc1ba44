use std::cmp::Ordering;

use crate::error::{RcmError, Result};
use crate::model::connection::{distance, ConnectionFunction, DEFAULT_EPS_TRUNC};
use crate::model::marks::{Marks, PairMarkSource};
use crate::model::points::{lex_cmp, PointSet};

/// Random connection model graph: a point set, a connection function and
/// the edges `{i, j}` with `mark(i, j) <= phi(x_i - x_j)`.
#[derive(Clone, Debug)]
pub struct RcmGraph {
    points: PointSet,
    phi: ConnectionFunction,
    marks: PairMarkSource,
    adjacency: Vec<Vec<u32>>,
    range: f64,
    truncated: bool,
}

/// Candidate pairs `(i, j)`, `i < j`, at distance at most `range`.
pub(crate) fn close_pairs(points: &PointSet, range: f64) -> Vec<(u32, u32)> {
    let n = points.len();
    let d = points.dim();
    let mut out = Vec::new();
    if n < 2 {
        return out;
    }
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for p in points.iter() {
        for a in 0..d {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let dims: Vec<usize> = (0..d)
        .map(|a| ((hi[a] - lo[a]) / range).floor() as usize + 1)
        .collect();
    let total = dims.iter().try_fold(1usize, |acc, &m| acc.checked_mul(m));
    let cap = (4 * n).max(1024);
    let range2 = range * range;
    match total {
        Some(cells) if cells <= cap && d <= 6 => {
            let cell_of = |p: &[f64]| -> usize {
                let mut idx = 0usize;
                for a in (0..d).rev() {
                    let c = (((p[a] - lo[a]) / range).floor() as usize).min(dims[a] - 1);
                    idx = idx * dims[a] + c;
                }
                idx
            };
            let mut counts = vec![0usize; cells + 1];
            let owner: Vec<usize> = points.iter().map(cell_of).collect();
            for &c in &owner {
                counts[c + 1] += 1;
            }
            for c in 0..cells {
                counts[c + 1] += counts[c];
            }
            let starts = counts.clone();
            let mut fill = counts;
            let mut members = vec![0u32; n];
            for (i, &c) in owner.iter().enumerate() {
                members[fill[c]] = i as u32;
                fill[c] += 1;
            }
            let offsets = 3usize.pow(d as u32);
            let mut coord = vec![0usize; d];
            for i in 0..n {
                let p = points.point(i);
                for a in 0..d {
                    coord[a] = (((p[a] - lo[a]) / range).floor() as usize).min(dims[a] - 1);
                }
                'offset: for o in 0..offsets {
                    let mut rem = o;
                    let mut idx = 0usize;
                    for a in (0..d).rev() {
                        let step = rem % 3;
                        rem /= 3;
                        let c = coord[a] as isize + step as isize - 1;
                        if c < 0 || c >= dims[a] as isize {
                            continue 'offset;
                        }
                        idx = idx * dims[a] + c as usize;
                    }
                    for &j in &members[starts[idx]..starts[idx + 1]] {
                        if (j as usize) > i {
                            let q = points.point(j as usize);
                            let d2: f64 = p.iter().zip(q).map(|(x, y)| (x - y) * (x - y)).sum();
                            if d2 <= range2 {
                                out.push((i as u32, j));
                            }
                        }
                    }
                }
            }
            out.sort_unstable();
        }
        _ => {
            // sweep along the first coordinate (points are lex-sorted)
            for i in 0..n {
                let p = points.point(i);
                for j in (i + 1)..n {
                    let q = points.point(j);
                    if q[0] - p[0] > range {
                        break;
                    }
                    let d2: f64 = p.iter().zip(q).map(|(x, y)| (x - y) * (x - y)).sum();
                    if d2 <= range2 {
                        out.push((i as u32, j as u32));
                    }
                }
            }
        }
    }
    out
}

fn adjacency_from_edges(n: usize, edges: impl Iterator<Item = (u32, u32)>) -> Vec<Vec<u32>> {
    let mut adj = vec![Vec::new(); n];
    for (i, j) in edges {
        adj[i as usize].push(j);
        adj[j as usize].push(i);
    }
    for list in &mut adj {
        list.sort_unstable();
    }
    adj
}

fn check_inputs(points: &PointSet, phi: &ConnectionFunction) -> Result<()> {
    phi.validate()?;
    for w in (1..points.len()).map(|i| (i - 1, i)) {
        if lex_cmp(points.point(w.0), points.point(w.1)) != Ordering::Less {
            return Err(RcmError::DuplicatePoint(w.0, w.1));
        }
    }
    Ok(())
}

/// Builds the RCM with the default truncation level for unbounded phi.
pub fn build_rcm(points: PointSet, phi: ConnectionFunction, marks: PairMarkSource) -> Result<RcmGraph> {
    RcmGraph::build(points, phi, marks, DEFAULT_EPS_TRUNC)
}

/// Builds `(Gamma_phi, Gamma_psi)` on the same points and marks.
pub fn build_coupled(
    points: PointSet,
    phi: ConnectionFunction,
    psi: ConnectionFunction,
    marks: PairMarkSource,
) -> Result<(RcmGraph, RcmGraph)> {
    phi.check_domination(&psi)?;
    check_inputs(&points, &phi)?;
    let range = phi.interaction_range(DEFAULT_EPS_TRUNC);
    let candidates = close_pairs(&points, range);
    let mut phi_edges = Vec::new();
    let mut psi_edges = Vec::new();
    for &(i, j) in &candidates {
        let (a, b) = (i as usize, j as usize);
        let dist = distance(points.point(a), points.point(b));
        let m = marks.mark(points.id(a), points.id(b));
        if m <= phi.eval_radial(dist) {
            phi_edges.push((i, j));
        }
        if m <= psi.eval_radial(dist) {
            psi_edges.push((i, j));
        }
    }
    let n = points.len();
    let g_phi = RcmGraph {
        adjacency: adjacency_from_edges(n, phi_edges.into_iter()),
        points: points.clone(),
        phi,
        marks,
        range,
        truncated: !phi.has_compact_support(),
    };
    let g_psi = RcmGraph {
        adjacency: adjacency_from_edges(n, psi_edges.into_iter()),
        points,
        phi: psi,
        marks,
        range,
        truncated: !psi.has_compact_support(),
    };
    Ok((g_phi, g_psi))
}

impl RcmGraph {
    pub fn build(points: PointSet, phi: ConnectionFunction, marks: PairMarkSource, eps_trunc: f64) -> Result<Self> {
        let mut g = Self::build_with(points, phi, &marks, eps_trunc)?;
        g.marks = marks;
        Ok(g)
    }

    /// Builds with an arbitrary mark assignment (e.g. layered marks).
    pub fn build_with<M: Marks>(points: PointSet, phi: ConnectionFunction, marks: &M, eps_trunc: f64) -> Result<Self> {
        check_inputs(&points, &phi)?;
        let range = phi.interaction_range(eps_trunc);
        let edges = close_pairs(&points, range).into_iter().filter(|&(i, j)| {
            let (a, b) = (i as usize, j as usize);
            marks.mark(points.id(a), points.id(b)) <= phi.eval_between(points.point(a), points.point(b))
        });
        let adjacency = adjacency_from_edges(points.len(), edges);
        Ok(RcmGraph {
            points,
            phi,
            marks: PairMarkSource::new(0),
            adjacency,
            range,
            truncated: !phi.has_compact_support(),
        })
    }

    pub fn points(&self) -> &PointSet {
        &self.points
    }

    pub fn phi(&self) -> &ConnectionFunction {
        &self.phi
    }

    pub fn marks(&self) -> &PairMarkSource {
        &self.marks
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Radius beyond which no edge is considered.
    pub fn interaction_range(&self) -> f64 {
        self.range
    }

    /// True when phi has unbounded support and pairs beyond the
    /// interaction range were dropped.
    pub fn truncated(&self) -> bool {
        self.truncated
    }

    #[inline]
    pub fn neighbors(&self, i: usize) -> &[u32] {
        &self.adjacency[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency[i].binary_search(&(j as u32)).is_ok()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Edges as `(i, j)` index pairs with `i < j`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(i, nb)| nb.iter().filter(move |&&j| (j as usize) > i).map(move |&j| (i, j as usize)))
    }

    /// Edges as id pairs `(min id, max id)`, sorted.
    pub fn edge_ids(&self) -> Vec<(i64, i64)> {
        let mut out: Vec<(i64, i64)> = self
            .edges()
            .map(|(i, j)| {
                let (a, b) = (self.points.id(i), self.points.id(j));
                (a.min(b), a.max(b))
            })
            .collect();
        out.sort_unstable();
        out
    }

    /// The graph on the points plus `extra`, reusing every existing mark and
    /// drawing marks involving the new points from this graph's source.
    pub fn with_extra_points(&self, extra: &[(i64, Vec<f64>)]) -> Result<RcmGraph> {
        let marks = self.marks;
        let mut g = self.with_extra_points_marked(extra, &marks)?;
        g.marks = marks;
        Ok(g)
    }

    pub fn with_extra_points_marked<M: Marks>(&self, extra: &[(i64, Vec<f64>)], marks: &M) -> Result<RcmGraph> {
        let d = self.points.dim();
        let n = self.points.len();
        let mut tagged: Vec<(i64, Vec<f64>)> = Vec::with_capacity(n + extra.len());
        for i in 0..n {
            tagged.push((self.points.id(i), self.points.point(i).to_vec()));
        }
        tagged.extend(extra.iter().cloned());
        let mut new_points = PointSet::from_tagged(d, tagged)?.with_meta(self.points.seed(), self.points.beta());
        if let Some(r) = self.points.region() {
            new_points = new_points.with_region(r.clone());
        }
        // map old index -> new index; points keep relative order
        let mut old_to_new = Vec::with_capacity(n);
        let mut extra_idx = Vec::with_capacity(extra.len());
        {
            let mut k = 0usize;
            for new_i in 0..new_points.len() {
                if k < n && new_points.id(new_i) == self.points.id(k) {
                    old_to_new.push(new_i as u32);
                    k += 1;
                } else {
                    extra_idx.push(new_i);
                }
            }
        }
        let mut adjacency = vec![Vec::new(); new_points.len()];
        for i in 0..n {
            adjacency[old_to_new[i] as usize] = self.adjacency[i].iter().map(|&j| old_to_new[j as usize]).collect();
        }
        let range2 = self.range * self.range;
        for (t, &xi) in extra_idx.iter().enumerate() {
            let x = new_points.point(xi).to_vec();
            let xid = new_points.id(xi);
            for j in 0..new_points.len() {
                if j == xi || (extra_idx[..t].contains(&j)) {
                    continue;
                }
                let q = new_points.point(j);
                let d2: f64 = x.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum();
                if d2 > range2 {
                    continue;
                }
                if marks.mark(xid, new_points.id(j)) <= self.phi.eval_radial(d2.sqrt()) {
                    adjacency[xi].push(j as u32);
                    adjacency[j].push(xi as u32);
                }
            }
        }
        for list in &mut adjacency {
            list.sort_unstable();
            list.dedup();
        }
        Ok(RcmGraph {
            points: new_points,
            phi: self.phi,
            marks: self.marks,
            adjacency,
            range: self.range,
            truncated: self.truncated,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::points::sample_poisson;
    use crate::model::window::Window;

    fn two_points(dist: f64) -> PointSet {
        PointSet::from_points(2, vec![vec![0.0, 0.0], vec![dist, 0.0]]).unwrap()
    }

    #[test]
    fn gilbert_pairs_are_deterministic() {
        let g1 = ConnectionFunction::gilbert(1.0).unwrap();
        for seed in 0..20 {
            let near = build_rcm(two_points(0.5), g1, PairMarkSource::new(seed)).unwrap();
            assert_eq!(near.edge_count(), 1);
            let far = build_rcm(two_points(2.0), g1, PairMarkSource::new(seed)).unwrap();
            assert_eq!(far.edge_count(), 0);
        }
    }

    #[test]
    fn scaled_indicator_edge_frequency() {
        // binomial oracle: 10^4 independent pairs, p = 0.5, 3 sd = 0.015
        let phi = ConnectionFunction::scaled_indicator(0.5, 1.0).unwrap();
        let pts = two_points(0.5);
        let hits = (0..10_000u64)
            .filter(|&s| build_rcm(pts.clone(), phi, PairMarkSource::new(s)).unwrap().edge_count() == 1)
            .count();
        let freq = hits as f64 / 10_000.0;
        assert!((freq - 0.5).abs() <= 0.015, "freq = {freq}");
    }

    #[test]
    fn grid_search_matches_brute_force() {
        let w = Window::centered_box(2, 8.0).unwrap();
        let pts = sample_poisson(&w, 1.0, 1.5, 5).unwrap();
        let fast = close_pairs(&pts, 1.0);
        let mut slow = Vec::new();
        for i in 0..pts.len() {
            for j in (i + 1)..pts.len() {
                if distance(pts.point(i), pts.point(j)) <= 1.0 {
                    slow.push((i as u32, j as u32));
                }
            }
        }
        assert_eq!(fast, slow);
        // 3-d, ball region
        let b = Window::centered_ball(3, 3.0).unwrap();
        let pts = sample_poisson(&b, 0.0, 2.0, 11).unwrap();
        let fast = close_pairs(&pts, 0.9);
        let mut slow = Vec::new();
        for i in 0..pts.len() {
            for j in (i + 1)..pts.len() {
                if distance(pts.point(i), pts.point(j)) <= 0.9 {
                    slow.push((i as u32, j as u32));
                }
            }
        }
        assert_eq!(fast, slow);
    }

    #[test]
    fn adjacency_symmetric_no_loops() {
        let w = Window::centered_box(2, 6.0).unwrap();
        let pts = sample_poisson(&w, 0.0, 1.0, 3).unwrap();
        let g = build_rcm(pts, ConnectionFunction::exponential(0.6).unwrap(), PairMarkSource::new(8)).unwrap();
        assert!(g.truncated());
        for i in 0..g.len() {
            for &j in g.neighbors(i) {
                assert_ne!(j as usize, i);
                assert!(g.has_edge(j as usize, i));
            }
        }
    }

    #[test]
    fn coupled_identical_when_equal() {
        let w = Window::centered_box(2, 5.0).unwrap();
        let pts = sample_poisson(&w, 0.0, 1.0, 21).unwrap();
        let phi = ConnectionFunction::scaled_indicator(0.7, 1.2).unwrap();
        let (a, b) = build_coupled(pts, phi, phi, PairMarkSource::new(2)).unwrap();
        assert_eq!(a.edge_ids(), b.edge_ids());
    }

    #[test]
    fn coupled_rejects_undominated() {
        let pts = two_points(0.5);
        let phi = ConnectionFunction::scaled_indicator(0.5, 1.0).unwrap();
        let psi = ConnectionFunction::gilbert(1.0).unwrap();
        assert!(matches!(
            build_coupled(pts, phi, psi, PairMarkSource::new(1)),
            Err(RcmError::DominationFailed { .. })
        ));
    }

    #[test]
    fn extra_points_reuse_marks() {
        let w = Window::centered_box(2, 4.0).unwrap();
        let pts = sample_poisson(&w, 0.0, 1.0, 4).unwrap();
        let phi = ConnectionFunction::scaled_indicator(0.6, 1.5).unwrap();
        let g = build_rcm(pts.clone(), phi, PairMarkSource::new(77)).unwrap();
        let gx = g.with_extra_points(&[(-1, vec![0.1234, -0.4321])]).unwrap();
        // rebuilding from scratch with the same ids gives the same graph
        let mut tagged: Vec<(i64, Vec<f64>)> = (0..pts.len()).map(|i| (pts.id(i), pts.point(i).to_vec())).collect();
        tagged.push((-1, vec![0.1234, -0.4321]));
        let full = build_rcm(PointSet::from_tagged(2, tagged).unwrap(), phi, PairMarkSource::new(77)).unwrap();
        assert_eq!(gx.edge_ids(), full.edge_ids());
        let old: Vec<_> = g.edge_ids();
        let kept: Vec<_> = gx.edge_ids().into_iter().filter(|e| e.0 >= 0).collect();
        assert_eq!(old, kept);
    }
}
