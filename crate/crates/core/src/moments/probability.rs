//! Exact probabilities of labeled-graph events on a fixed point tuple,
//! by enumeration of edge subsets.

use std::cmp::Ordering;

use crate::census::canon::{
    canonical_code, class_table, enumerate_classes, n_pairs, rows_connected, rows_from_mask, slot, GraphClass, K_MAX,
    TABLE_CAP,
};
use crate::error::{RcmError, Result};
use crate::model::connection::ConnectionFunction;
use crate::model::points::lex_cmp;

/// Largest order for the joint (two-threshold) enumeration.
pub const JOINT_CAP: usize = 5;

/// Which clusters an event accepts: one class, or any connected graph of
/// the given order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClusterEvent {
    Class(GraphClass),
    Connected(usize),
}

impl ClusterEvent {
    pub fn order(&self) -> usize {
        match self {
            ClusterEvent::Class(g) => g.order(),
            ClusterEvent::Connected(k) => *k,
        }
    }

    /// Class index in `enumerate_classes(k)` accepted by this event.
    fn accepts(&self, idx: Option<u16>, classes: &[GraphClass]) -> bool {
        match (self, idx) {
            (_, None) => false,
            (ClusterEvent::Connected(_), Some(_)) => true,
            (ClusterEvent::Class(g), Some(i)) => classes[i as usize] == *g,
        }
    }

    pub(crate) fn check(&self, cap: usize) -> Result<()> {
        let k = self.order();
        if k == 0 || k > cap {
            return Err(RcmError::OrderTooLarge { order: k, cap });
        }
        Ok(())
    }
}

fn pair_probs(points: &[&[f64]], phi: &ConnectionFunction) -> Vec<f64> {
    let k = points.len();
    let mut p = vec![0.0; n_pairs(k)];
    for j in 1..k {
        for i in 0..j {
            p[slot(i, j)] = phi.eval_between(points[i], points[j]);
        }
    }
    p
}

/// Products `prod_{s in mask} p_s * prod_{s not in mask} (1 - p_s)` over all
/// masks, built from two half tables.
fn subset_weights(p: &[f64], mut visit: impl FnMut(u32, f64)) {
    let np = p.len();
    let lo_bits = np / 2;
    let hi_bits = np - lo_bits;
    let half = |offset: usize, bits: usize| -> Vec<f64> {
        let mut t = vec![1.0; 1 << bits];
        for m in 0..(1usize << bits) {
            let mut w = 1.0;
            for b in 0..bits {
                let q = p[offset + b];
                w *= if m >> b & 1 == 1 { q } else { 1.0 - q };
            }
            t[m] = w;
        }
        t
    };
    let lo = half(0, lo_bits);
    let hi = half(lo_bits, hi_bits);
    for (h, &wh) in hi.iter().enumerate() {
        if wh == 0.0 {
            continue;
        }
        for (l, &wl) in lo.iter().enumerate() {
            let w = wh * wl;
            if w != 0.0 {
                visit(((h << lo_bits) | l) as u32, w);
            }
        }
    }
}

/// `P(Gamma_phi(x) ~= G)` for every class `G` of order `k = x.len()`,
/// indexed like `enumerate_classes(k)`. No ordering condition.
pub fn class_distribution(points: &[&[f64]], phi: &ConnectionFunction) -> Result<Vec<f64>> {
    let k = points.len();
    if k == 0 || k > TABLE_CAP {
        return Err(RcmError::OrderTooLarge { order: k, cap: TABLE_CAP });
    }
    let classes = enumerate_classes(k)?;
    let mut out = vec![0.0; classes.len()];
    if k == 1 {
        out[0] = 1.0;
        return Ok(out);
    }
    let table = class_table(k);
    subset_weights(&pair_probs(points, phi), |mask, w| {
        if let Some(i) = table[mask as usize] {
            out[i as usize] += w;
        }
    });
    Ok(out)
}

/// `P(Gamma_phi(x) in event)`, no ordering condition.
pub fn event_probability(points: &[&[f64]], phi: &ConnectionFunction, event: &ClusterEvent) -> Result<f64> {
    if event.order() != points.len() {
        return Err(RcmError::DimensionMismatch {
            expected: event.order(),
            found: points.len(),
        });
    }
    let k = points.len();
    if k > TABLE_CAP {
        return event_probability_sparse(points, phi, event);
    }
    let dist = class_distribution(points, phi)?;
    Ok(match event {
        ClusterEvent::Connected(_) => dist.iter().sum(),
        ClusterEvent::Class(g) => {
            let classes = enumerate_classes(g.order())?;
            let i = classes.binary_search(g).map_err(|_| RcmError::BadClassId(g.id()))?;
            dist[i]
        }
    })
}

/// Largest number of pairs with `0 < phi < 1` enumerated for orders above
/// the lookup-table cap.
pub const FREE_PAIR_CAP: usize = 15;

/// Enumerates only the pairs whose edge is random; pairs with `phi = 0` or
/// `phi = 1` are fixed.
fn event_probability_sparse(points: &[&[f64]], phi: &ConnectionFunction, event: &ClusterEvent) -> Result<f64> {
    let k = points.len();
    if k > K_MAX {
        return Err(RcmError::OrderTooLarge { order: k, cap: K_MAX });
    }
    let p = pair_probs(points, phi);
    let mut forced = 0u32;
    let mut free = Vec::new();
    for (s, &q) in p.iter().enumerate() {
        if q >= 1.0 {
            forced |= 1 << s;
        } else if q > 0.0 {
            free.push(s);
        }
    }
    if free.len() > FREE_PAIR_CAP {
        return Err(RcmError::OrderTooLarge { order: k, cap: TABLE_CAP });
    }
    let mut total = 0.0;
    for sub in 0u32..(1 << free.len()) {
        let mut mask = forced;
        let mut w = 1.0;
        for (b, &s) in free.iter().enumerate() {
            if sub >> b & 1 == 1 {
                mask |= 1 << s;
                w *= p[s];
            } else {
                w *= 1.0 - p[s];
            }
        }
        let rows = rows_from_mask(k, mask);
        if !rows_connected(k, &rows) {
            continue;
        }
        let hit = match event {
            ClusterEvent::Connected(_) => true,
            ClusterEvent::Class(g) => canonical_code(k, &rows) == g.canon(),
        };
        if hit {
            total += w;
        }
    }
    Ok(total)
}

/// `P(Gamma_phi(x) in a, Gamma_psi(x) in b)` under shared marks, `psi <= phi`.
/// Each pair lands in one of three bands: mark below psi, between psi and
/// phi, or above phi.
pub fn joint_event_probability(
    points: &[&[f64]],
    phi: &ConnectionFunction,
    psi: &ConnectionFunction,
    a: &ClusterEvent,
    b: &ClusterEvent,
) -> Result<f64> {
    let k = points.len();
    a.check(JOINT_CAP)?;
    b.check(JOINT_CAP)?;
    if a.order() != k || b.order() != k {
        return Ok(0.0);
    }
    if k == 1 {
        return Ok(1.0);
    }
    let classes = enumerate_classes(k)?;
    let table = class_table(k);
    let pf = pair_probs(points, phi);
    let ps = pair_probs(points, psi);
    let np = pf.len();
    let mut total = 0.0;
    for mf in 0u32..(1 << np) {
        if !a.accepts(table[mf as usize], &classes) {
            continue;
        }
        // psi-edges are a submask of the phi-edges
        let mut ms = mf;
        loop {
            if b.accepts(table[ms as usize], &classes) {
                let mut w = 1.0;
                for s in 0..np {
                    let f = pf[s];
                    let g = ps[s].min(f);
                    w *= if ms >> s & 1 == 1 {
                        g
                    } else if mf >> s & 1 == 1 {
                        f - g
                    } else {
                        1.0 - f
                    };
                    if w == 0.0 {
                        break;
                    }
                }
                total += w;
            }
            if ms == 0 {
                break;
            }
            ms = (ms - 1) & mf;
        }
    }
    Ok(total)
}

fn strictly_sorted(points: &[&[f64]]) -> bool {
    points.windows(2).all(|w| lex_cmp(w[0], w[1]) == Ordering::Less)
}

/// `p_{phi,G}(x_1, ..., x_k) = 1{x_1 < ... < x_k} P(Gamma_phi(x) ~= G)`.
pub fn p_phi_g(x: &[Vec<f64>], phi: &ConnectionFunction, class: &GraphClass) -> Result<f64> {
    let refs: Vec<&[f64]> = x.iter().map(|v| v.as_slice()).collect();
    if refs.len() != class.order() {
        return Err(RcmError::DimensionMismatch {
            expected: class.order(),
            found: refs.len(),
        });
    }
    if !strictly_sorted(&refs) {
        return Ok(0.0);
    }
    event_probability(&refs, phi, &ClusterEvent::Class(*class))
}

/// `p_{phi,k}(x_1, ..., x_k) = 1{x_1 < ... < x_k} P(Gamma_phi(x) connected)`.
pub fn p_phi_k(x: &[Vec<f64>], phi: &ConnectionFunction) -> Result<f64> {
    let refs: Vec<&[f64]> = x.iter().map(|v| v.as_slice()).collect();
    if refs.is_empty() {
        return Err(RcmError::EmptyInput);
    }
    if !strictly_sorted(&refs) {
        return Ok(0.0);
    }
    event_probability(&refs, phi, &ClusterEvent::Connected(refs.len()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::marks::{Marks, PairMarkSource};
    use approx::assert_relative_eq;

    fn refs(x: &[Vec<f64>]) -> Vec<&[f64]> {
        x.iter().map(|v| v.as_slice()).collect()
    }

    #[test]
    fn trivial_cases() {
        let g1 = ConnectionFunction::gilbert(1.0).unwrap();
        assert_eq!(p_phi_g(&[vec![3.0, 4.0]], &g1, &GraphClass::vertex()).unwrap(), 1.0);
        let x = vec![vec![0.0, 0.0], vec![1.0, 0.0]];
        assert_eq!(p_phi_g(&x, &g1, &GraphClass::edge()).unwrap(), 1.0);
        let rev = vec![vec![1.0, 0.0], vec![0.0, 0.0]];
        assert_eq!(p_phi_g(&rev, &g1, &GraphClass::edge()).unwrap(), 0.0);
        let phi = ConnectionFunction::scaled_indicator(0.3, 1.0).unwrap();
        assert_relative_eq!(p_phi_k(&x, &phi).unwrap(), 0.3, epsilon = 1e-15);
    }

    #[test]
    fn distribution_sums_to_connection_probability() {
        let phi = ConnectionFunction::exponential(0.8).unwrap();
        let x = vec![vec![0.0, 0.0], vec![0.5, 0.2], vec![0.9, -0.3], vec![1.4, 0.1]];
        let dist = class_distribution(&refs(&x), &phi).unwrap();
        // brute force over all 64 subsets
        let p = pair_probs(&refs(&x), &phi);
        let mut connected = 0.0;
        for mask in 0u32..64 {
            let rows = crate::census::canon::rows_from_mask(4, mask);
            if crate::census::canon::rows_connected(4, &rows) {
                let mut w = 1.0;
                for s in 0..6 {
                    w *= if mask >> s & 1 == 1 { p[s] } else { 1.0 - p[s] };
                }
                connected += w;
            }
        }
        assert_relative_eq!(dist.iter().sum::<f64>(), connected, epsilon = 1e-14);
    }

    #[test]
    fn path_probability_matches_mark_frequency() {
        let g1 = ConnectionFunction::gilbert(1.0).unwrap();
        let x = vec![vec![0.0, 0.0], vec![0.5, 0.0], vec![1.6, 0.0]];
        let path = GraphClass::path(3).unwrap();
        assert_eq!(p_phi_g(&x, &g1, &path).unwrap(), 0.0);
        let x = vec![vec![0.0, 0.0], vec![0.5, 0.0], vec![0.75, 0.3]];
        let phi = ConnectionFunction::scaled_indicator(0.6, 1.0).unwrap();
        let exact = p_phi_g(&x, &phi, &path).unwrap();
        assert_relative_eq!(exact, 3.0 * 0.36 * 0.4, epsilon = 1e-14);
        let pts = crate::model::PointSet::from_points(2, x.clone()).unwrap();
        let n = 100_000u64;
        let hits = (0..n)
            .filter(|&s| {
                let g = crate::model::build_rcm(pts.clone(), phi, PairMarkSource::new(s)).unwrap();
                g.edge_count() == 2
            })
            .count();
        let freq = hits as f64 / n as f64;
        let se = (exact * (1.0 - exact) / n as f64).sqrt();
        assert!((freq - exact).abs() < 3.0 * se, "freq {freq} exact {exact}");
    }

    #[test]
    fn joint_probability_properties() {
        let phi = ConnectionFunction::scaled_indicator(0.8, 1.0).unwrap();
        let psi = ConnectionFunction::scaled_indicator(0.4, 1.0).unwrap();
        let x = vec![vec![0.0, 0.0], vec![0.5, 0.0], vec![0.2, 0.4]];
        let r = refs(&x);
        let path = ClusterEvent::Class(GraphClass::path(3).unwrap());
        let tri = ClusterEvent::Class(GraphClass::complete(3).unwrap());
        // same threshold: distinct classes are exclusive
        assert_eq!(joint_event_probability(&r, &phi, &phi, &path, &tri).unwrap(), 0.0);
        let same = joint_event_probability(&r, &phi, &phi, &path, &path).unwrap();
        assert_relative_eq!(same, event_probability(&r, &phi, &path).unwrap(), epsilon = 1e-14);
        // summing over phi-classes gives the psi marginal
        let conn3 = ClusterEvent::Connected(3);
        let marg = joint_event_probability(&r, &phi, &psi, &conn3, &tri).unwrap();
        assert_relative_eq!(marg, event_probability(&r, &psi, &tri).unwrap(), epsilon = 1e-14);
        let both = joint_event_probability(&r, &phi, &psi, &conn3, &conn3).unwrap();
        assert_relative_eq!(both, event_probability(&r, &psi, &conn3).unwrap(), epsilon = 1e-14);
        // order mismatch gives zero
        assert_eq!(
            joint_event_probability(&r, &phi, &psi, &ClusterEvent::Connected(2), &conn3).unwrap(),
            0.0
        );
    }

    #[test]
    fn joint_matches_mark_simulation() {
        let phi = ConnectionFunction::scaled_indicator(0.8, 1.0).unwrap();
        let psi = ConnectionFunction::scaled_indicator(0.3, 1.0).unwrap();
        let x = vec![vec![0.0, 0.0], vec![0.5, 0.0], vec![0.2, 0.4]];
        let r = refs(&x);
        let tri = ClusterEvent::Class(GraphClass::complete(3).unwrap());
        let path = ClusterEvent::Class(GraphClass::path(3).unwrap());
        let exact = joint_event_probability(&r, &phi, &psi, &tri, &path).unwrap();
        let n = 200_000u64;
        let mut hits = 0u64;
        for s in 0..n {
            let m = PairMarkSource::new(s);
            let marks = [m.mark(0, 1), m.mark(0, 2), m.mark(1, 2)];
            let nf = marks.iter().filter(|&&v| v <= 0.8).count();
            let ns = marks.iter().filter(|&&v| v <= 0.3).count();
            if nf == 3 && ns == 2 {
                hits += 1;
            }
        }
        let freq = hits as f64 / n as f64;
        // all three phi-edges, exactly two below psi
        assert_relative_eq!(exact, 3.0 * 0.3 * 0.3 * 0.5, epsilon = 1e-14);
        let se = (exact * (1.0 - exact) / n as f64).sqrt();
        assert!((freq - exact).abs() < 3.0 * se);
    }
}
