use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{RcmError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceKind {
    Kolmogorov,
    Wasserstein,
}

fn sorted(samples: &[f64]) -> Result<Vec<f64>> {
    if samples.len() < 2 {
        return Err(RcmError::EmptyInput);
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(RcmError::InvalidParameter("samples must be finite".into()));
    }
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// `sup_t |F_n(t) - Phi(t)|` for the empirical CDF of `samples`, evaluated
/// on both sides of every jump (ties jump together).
pub fn kolmogorov_distance(samples: &[f64]) -> Result<f64> {
    let v = sorted(samples)?;
    let n = v.len() as f64;
    let normal = Normal::standard();
    let mut best = 0.0f64;
    let mut i = 0;
    while i < v.len() {
        let mut j = i;
        while j < v.len() && v[j] == v[i] {
            j += 1;
        }
        let p = normal.cdf(v[i]);
        best = best.max((p - i as f64 / n).abs()).max((j as f64 / n - p).abs());
        i = j;
    }
    Ok(best)
}

/// `int_a^b |c - z| phi(z) dz` in closed form.
fn abs_moment(c: f64, a: f64, b: f64, mass: f64) -> f64 {
    let normal = Normal::standard();
    let pdf = |z: f64| if z.is_finite() { normal.pdf(z) } else { 0.0 };
    // int_a^b (z - c) phi = phi(a) - phi(b) - c (Phi(b) - Phi(a))
    let above = |a: f64, b: f64, m: f64| pdf(a) - pdf(b) - c * m;
    if c <= a {
        above(a, b, mass)
    } else if c >= b {
        -above(a, b, mass)
    } else {
        let pc = normal.cdf(c);
        let left = (pc - normal.cdf(a)).max(0.0);
        let right = (normal.cdf(b) - pc).max(0.0);
        -above(a, c, left) + above(c, b, right)
    }
}

/// `int_0^1 |F_n^{-1}(u) - Phi^{-1}(u)| du`, computed exactly over the
/// `n` quantile cells.
pub fn wasserstein_distance(samples: &[f64]) -> Result<f64> {
    let v = sorted(samples)?;
    let n = v.len();
    let normal = Normal::standard();
    let cut = |i: usize| -> f64 {
        if i == 0 {
            f64::NEG_INFINITY
        } else if i == n {
            f64::INFINITY
        } else {
            normal.inverse_cdf(i as f64 / n as f64)
        }
    };
    let mass = 1.0 / n as f64;
    Ok((0..n).map(|i| abs_moment(v[i], cut(i), cut(i + 1), mass)).sum())
}

pub fn empirical_distance(samples: &[f64], kind: DistanceKind) -> Result<f64> {
    match kind {
        DistanceKind::Kolmogorov => kolmogorov_distance(samples),
        DistanceKind::Wasserstein => wasserstein_distance(samples),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn normals(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn normal_samples_are_close() {
        let v = normals(10_000, 1);
        // DKW at 99%: sqrt(ln(2/0.01) / (2n))
        assert!(kolmogorov_distance(&v).unwrap() < 0.025);
        assert!(wasserstein_distance(&v).unwrap() < 0.05);
    }

    #[test]
    fn point_mass_at_zero() {
        let v = vec![0.0; 10];
        assert!((kolmogorov_distance(&v).unwrap() - 0.5).abs() < 1e-15);
        // E|N| = sqrt(2 / pi)
        assert!((wasserstein_distance(&v).unwrap() - (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn shifts_separate() {
        let v = normals(2000, 2);
        let d: Vec<f64> = [0.0, 1.0, 3.0, 10.0]
            .iter()
            .map(|c| kolmogorov_distance(&v.iter().map(|x| x + c).collect::<Vec<_>>()).unwrap())
            .collect();
        assert!(d.windows(2).all(|w| w[1] > w[0]));
        assert!(d[3] > 0.999);
        let w = wasserstein_distance(&v.iter().map(|x| x + 10.0).collect::<Vec<_>>()).unwrap();
        assert!((w - 10.0).abs() < 0.1);
    }

    #[test]
    fn errors() {
        assert!(matches!(kolmogorov_distance(&[]), Err(RcmError::EmptyInput)));
        assert!(matches!(wasserstein_distance(&[1.0]), Err(RcmError::EmptyInput)));
        assert!(kolmogorov_distance(&[0.0, f64::NAN]).is_err());
    }

    fn brute_kolmogorov(v: &[f64]) -> f64 {
        let normal = Normal::standard();
        let n = v.len() as f64;
        let mut best = 0.0f64;
        for &t in v {
            let below = v.iter().filter(|&&x| x < t).count() as f64 / n;
            let upto = v.iter().filter(|&&x| x <= t).count() as f64 / n;
            let p = normal.cdf(t);
            best = best.max((p - below).abs()).max((upto - p).abs());
        }
        best
    }

    fn quadrature_wasserstein(v: &[f64]) -> f64 {
        let mut s = v.to_vec();
        s.sort_by(f64::total_cmp);
        let normal = Normal::standard();
        let m = 200_000;
        (0..m)
            .map(|i| {
                let u = (i as f64 + 0.5) / m as f64;
                let q = s[((u * s.len() as f64) as usize).min(s.len() - 1)];
                (q - normal.inverse_cdf(u)).abs()
            })
            .sum::<f64>()
            / m as f64
    }

    proptest! {
        #[test]
        fn matches_brute_force(raw in prop::collection::vec(-30i32..30, 2..40)) {
            let v: Vec<f64> = raw.iter().map(|&k| k as f64 / 10.0).collect();
            prop_assert!((kolmogorov_distance(&v).unwrap() - brute_kolmogorov(&v)).abs() < 1e-14);
            let w = wasserstein_distance(&v).unwrap();
            prop_assert!((w - quadrature_wasserstein(&v)).abs() < 2e-3, "{} vs {}", w, quadrature_wasserstein(&v));
        }
    }
}
