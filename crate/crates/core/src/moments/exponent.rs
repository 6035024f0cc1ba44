//! The exponent `beta * int (prod_i (1 - phi_i(x_i - y)) - 1) dy` of the
//! void probability around a finite cluster, where each cluster point may
//! carry its own connection function.
//!
//! Exact routes: one point (`-beta m_phi`), all-Gaussian clusters (expand
//! the product; each term is a Gaussian integral), and indicator kinds in
//! the plane (the integrand is piecewise constant on a disk arrangement and
//! Green's theorem turns its integral into a sum over circle arcs).
//! Everything else goes through nested adaptive quadrature.

use std::f64::consts::PI;

use crate::error::{RcmError, Result};
use crate::model::connection::{ConnectionFunction, DEFAULT_EPS_TRUNC};
use crate::quad::integrate_with_breaks;

/// Largest coordinate span accepted by the quadrature route.
pub const QUADRATURE_SPAN_CAP: f64 = 1e4;

/// `int (prod (1 - p_i 1{|y - c_i| <= r_i}) - 1) dy` in the plane.
pub(crate) fn disk_union_integral(disks: &[(f64, f64, f64, f64)]) -> f64 {
    // (cx, cy, r, p); merge coincident circles first
    let mut merged: Vec<(f64, f64, f64, f64)> = Vec::with_capacity(disks.len());
    for &(x, y, r, p) in disks {
        if p <= 0.0 || r <= 0.0 {
            continue;
        }
        let tol = 1e-12 * (1.0 + r);
        if let Some(m) = merged
            .iter_mut()
            .find(|m| (m.0 - x).abs() <= tol && (m.1 - y).abs() <= tol && (m.2 - r).abs() <= tol)
        {
            m.3 = 1.0 - (1.0 - m.3) * (1.0 - p);
        } else {
            merged.push((x, y, r, p));
        }
    }
    let n = merged.len();
    let mut total = 0.0;
    let mut angles: Vec<f64> = Vec::with_capacity(2 * n);
    for i in 0..n {
        let (a, b, r, p) = merged[i];
        angles.clear();
        for (j, &(xj, yj, rj, _)) in merged.iter().enumerate() {
            if j == i {
                continue;
            }
            let (dx, dy) = (xj - a, yj - b);
            let dist = dx.hypot(dy);
            if dist >= r + rj || dist <= (r - rj).abs() {
                continue;
            }
            let base = dy.atan2(dx);
            let c = ((r * r + dist * dist - rj * rj) / (2.0 * r * dist)).clamp(-1.0, 1.0);
            let alpha = c.acos();
            for t in [base - alpha, base + alpha] {
                angles.push(t.rem_euclid(2.0 * PI));
            }
        }
        angles.sort_by(|u, v| u.total_cmp(v));
        let arcs: Vec<(f64, f64)> = if angles.is_empty() {
            vec![(0.0, 2.0 * PI)]
        } else {
            let m = angles.len();
            (0..m)
                .map(|s| {
                    let lo = angles[s];
                    let hi = if s + 1 < m { angles[s + 1] } else { angles[0] + 2.0 * PI };
                    (lo, hi)
                })
                .collect()
        };
        for (t1, t2) in arcs {
            if t2 - t1 <= 0.0 {
                continue;
            }
            let mid = 0.5 * (t1 + t2);
            let (mx, my) = (a + r * mid.cos(), b + r * mid.sin());
            let mut outside = 1.0;
            for (j, &(xj, yj, rj, pj)) in merged.iter().enumerate() {
                if j != i && (mx - xj).hypot(my - yj) < rj {
                    outside *= 1.0 - pj;
                }
            }
            let jump = -p * outside;
            let area = 0.5 * (r * r * (t2 - t1) + a * r * (t2.sin() - t1.sin()) - b * r * (t2.cos() - t1.cos()));
            total += jump * area;
        }
    }
    total
}

/// `int (prod (1 - exp(-|y - c_i|^2 / s_i^2)) - 1) dy` in `R^d`, by expanding
/// the product over nonempty subsets.
pub(crate) fn gaussian_void_integral(dim: usize, centers: &[&[f64]], s: &[f64]) -> f64 {
    let k = centers.len();
    let mut total = 0.0;
    let mut c = vec![0.0; dim];
    for subset in 1u32..(1 << k) {
        let mut wsum = 0.0;
        c.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..k {
            if subset >> i & 1 == 1 {
                let w = 1.0 / (s[i] * s[i]);
                wsum += w;
                for a in 0..dim {
                    c[a] += w * centers[i][a];
                }
            }
        }
        c.iter_mut().for_each(|v| *v /= wsum);
        let mut spread = 0.0;
        for i in 0..k {
            if subset >> i & 1 == 1 {
                let w = 1.0 / (s[i] * s[i]);
                let d2: f64 = (0..dim).map(|a| (centers[i][a] - c[a]).powi(2)).sum();
                spread += w * d2;
            }
        }
        let term = (PI / wsum).powf(dim as f64 / 2.0) * (-spread).exp();
        if subset.count_ones() % 2 == 1 {
            total -= term;
        } else {
            total += term;
        }
    }
    total
}

/// Nested adaptive quadrature of `prod (1 - phi_i(y - c_i)) - 1` over the
/// bounding box of the centers grown by each function's interaction range.
pub(crate) fn void_integral_by_quadrature(
    dim: usize,
    centers: &[&[f64]],
    funcs: &[ConnectionFunction],
    eps_trunc: f64,
    rel_tol: f64,
) -> Result<f64> {
    let ranges: Vec<f64> = funcs.iter().map(|f| f.interaction_range(eps_trunc)).collect();
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for (c, &r) in centers.iter().zip(&ranges) {
        for a in 0..dim {
            lo[a] = lo[a].min(c[a] - r);
            hi[a] = hi[a].max(c[a] + r);
        }
    }
    if (0..dim).any(|a| hi[a] - lo[a] > QUADRATURE_SPAN_CAP) {
        return Err(RcmError::TruncationCap {
            radius: (0..dim).map(|a| hi[a] - lo[a]).fold(0.0, f64::max),
            cap: QUADRATURE_SPAN_CAP,
        });
    }
    // scale of the answer, for an absolute tolerance
    let scale: f64 = funcs.iter().map(|f| f.m_phi(dim)).fold(0.0, f64::max);
    let abs_tol = rel_tol * scale;
    Ok(nested(&[], dim, centers, funcs, &ranges, &lo, &hi, abs_tol, rel_tol))
}

#[allow(clippy::too_many_arguments)]
fn nested(
    prefix: &[f64],
    dim: usize,
    centers: &[&[f64]],
    funcs: &[ConnectionFunction],
    ranges: &[f64],
    lo: &[f64],
    hi: &[f64],
    abs_tol: f64,
    rel_tol: f64,
) -> f64 {
    let axis = prefix.len();
    // breakpoints: where the remaining sphere of an indicator meets this axis,
    // and the center coordinate for smooth kinds
    let mut breaks = Vec::new();
    for (c, (f, &r)) in centers.iter().zip(funcs.iter().zip(ranges)) {
        let used: f64 = (0..axis).map(|a| (prefix[a] - c[a]).powi(2)).sum();
        let rem = r * r - used;
        if rem > 0.0 {
            let h = rem.sqrt();
            if f.has_compact_support() {
                breaks.push(c[axis] - h);
                breaks.push(c[axis] + h);
            } else {
                breaks.push(c[axis]);
            }
        }
    }
    let inner_abs = abs_tol / (hi[axis] - lo[axis]).max(1.0);
    integrate_with_breaks(
        |t| {
            let mut y = Vec::with_capacity(dim);
            y.extend_from_slice(prefix);
            y.push(t);
            if axis + 1 == dim {
                let mut prod = 1.0;
                for (c, f) in centers.iter().zip(funcs) {
                    prod *= 1.0 - f.eval_between(&y, c);
                }
                prod - 1.0
            } else {
                nested(&y, dim, centers, funcs, ranges, lo, hi, inner_abs, rel_tol)
            }
        },
        lo[axis],
        hi[axis],
        &breaks,
        abs_tol,
        rel_tol,
    )
}

/// Exponent for a cluster whose `i`-th point uses `funcs[i]`.
pub fn void_exponent_mixed(dim: usize, centers: &[&[f64]], funcs: &[ConnectionFunction], beta: f64) -> Result<f64> {
    if centers.is_empty() {
        return Ok(0.0);
    }
    if centers.len() != funcs.len() {
        return Err(RcmError::DimensionMismatch {
            expected: centers.len(),
            found: funcs.len(),
        });
    }
    if centers.len() == 1 {
        return Ok(-beta * funcs[0].m_phi(dim));
    }
    if dim == 2 && funcs.iter().all(|f| f.indicator_parts().is_some()) {
        let disks: Vec<(f64, f64, f64, f64)> = centers
            .iter()
            .zip(funcs)
            .map(|(c, f)| {
                let (p, r) = f.indicator_parts().unwrap();
                (c[0], c[1], r, p)
            })
            .collect();
        return Ok(beta * disk_union_integral(&disks));
    }
    if funcs.iter().all(|f| matches!(f, ConnectionFunction::Gaussian { .. })) {
        let s: Vec<f64> = funcs
            .iter()
            .map(|f| match f {
                ConnectionFunction::Gaussian { s } => *s,
                _ => unreachable!(),
            })
            .collect();
        return Ok(beta * gaussian_void_integral(dim, centers, &s));
    }
    Ok(beta * void_integral_by_quadrature(dim, centers, funcs, DEFAULT_EPS_TRUNC, 1e-7)?)
}

/// `beta * int (prod_i (1 - phi(x_i - y)) - 1) dy`.
pub fn inner_exponent(x: &[Vec<f64>], phi: &ConnectionFunction, beta: f64) -> Result<f64> {
    if x.is_empty() {
        return Err(RcmError::EmptyInput);
    }
    let dim = x[0].len();
    if let Some(p) = x.iter().find(|p| p.len() != dim) {
        return Err(RcmError::DimensionMismatch {
            expected: dim,
            found: p.len(),
        });
    }
    let refs: Vec<&[f64]> = x.iter().map(|v| v.as_slice()).collect();
    let funcs = vec![*phi; refs.len()];
    void_exponent_mixed(dim, &refs, &funcs, beta)
}
