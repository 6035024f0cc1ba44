use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::model::marks::derive_seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ClosedForm,
    Quadrature,
    MonteCarlo,
}

/// A numerical value with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n_samples: u64,
    pub truncation_radius: f64,
    pub method: Method,
}

impl MomentEstimate {
    pub fn closed_form(value: f64) -> Self {
        MomentEstimate {
            value,
            std_error: 0.0,
            n_samples: 0,
            truncation_radius: 0.0,
            method: Method::ClosedForm,
        }
    }

    pub fn quadrature(value: f64, truncation_radius: f64) -> Self {
        MomentEstimate {
            value,
            std_error: 0.0,
            n_samples: 0,
            truncation_radius,
            method: Method::Quadrature,
        }
    }

    /// Sum of independent estimates.
    pub fn plus(&self, other: &MomentEstimate) -> MomentEstimate {
        let method = if self.method == Method::MonteCarlo || other.method == Method::MonteCarlo {
            Method::MonteCarlo
        } else if self.method == Method::Quadrature || other.method == Method::Quadrature {
            Method::Quadrature
        } else {
            Method::ClosedForm
        };
        MomentEstimate {
            value: self.value + other.value,
            std_error: self.std_error.hypot(other.std_error),
            n_samples: self.n_samples + other.n_samples,
            truncation_radius: self.truncation_radius.max(other.truncation_radius),
            method,
        }
    }

    pub fn scaled(&self, c: f64) -> MomentEstimate {
        MomentEstimate {
            value: c * self.value,
            std_error: c.abs() * self.std_error,
            ..*self
        }
    }
}

/// Running mean and sum of squared deviations.
#[derive(Clone, Copy, Debug, Default)]
pub struct Accumulator {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Accumulator {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&self, other: &Accumulator) -> Accumulator {
        if self.n == 0 {
            return *other;
        }
        if other.n == 0 {
            return *self;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        Accumulator {
            n,
            mean: self.mean + d * other.n as f64 / n as f64,
            m2: self.m2 + other.m2 + d * d * (self.n as f64 * other.n as f64) / n as f64,
        }
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn std_error(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }
}

/// Number of independent streams a Monte Carlo budget is split into. Fixed,
/// so results do not depend on the number of worker threads.
pub const SHARDS: u64 = 64;

/// Averages `draw` over `n` samples split across [`SHARDS`] seeded streams,
/// merged in shard order.
pub fn monte_carlo<F>(n: u64, seed: u64, draw: F) -> Accumulator
where
    F: Fn(&mut ChaCha8Rng) -> f64 + Sync,
{
    let shards: Vec<Accumulator> = (0..SHARDS)
        .into_par_iter()
        .map(|s| {
            let count = n / SHARDS + u64::from(s < n % SHARDS);
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, s));
            let mut acc = Accumulator::default();
            for _ in 0..count {
                acc.push(draw(&mut rng));
            }
            acc
        })
        .collect();
    shards.iter().fold(Accumulator::default(), |a, b| a.merge(b))
}

/// As [`monte_carlo`] for vector-valued draws of fixed length `m`.
pub fn monte_carlo_vec<F>(n: u64, seed: u64, m: usize, draw: F) -> Vec<Accumulator>
where
    F: Fn(&mut ChaCha8Rng, &mut [f64]) + Sync,
{
    let shards: Vec<Vec<Accumulator>> = (0..SHARDS)
        .into_par_iter()
        .map(|s| {
            let count = n / SHARDS + u64::from(s < n % SHARDS);
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, s));
            let mut acc = vec![Accumulator::default(); m];
            let mut buf = vec![0.0; m];
            for _ in 0..count {
                buf.iter_mut().for_each(|v| *v = 0.0);
                draw(&mut rng, &mut buf);
                for (a, &v) in acc.iter_mut().zip(&buf) {
                    a.push(v);
                }
            }
            acc
        })
        .collect();
    let mut out = vec![Accumulator::default(); m];
    for shard in &shards {
        for (o, a) in out.iter_mut().zip(shard) {
            *o = o.merge(a);
        }
    }
    out
}

impl Accumulator {
    pub fn estimate(&self, truncation_radius: f64) -> MomentEstimate {
        MomentEstimate {
            value: self.mean(),
            std_error: self.std_error(),
            n_samples: self.n,
            truncation_radius,
            method: Method::MonteCarlo,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;

    #[test]
    fn accumulator_matches_two_pass() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 * 0.1).collect();
        let mut a = Accumulator::default();
        let mut b = Accumulator::default();
        for (i, &x) in xs.iter().enumerate() {
            if i % 3 == 0 {
                a.push(x)
            } else {
                b.push(x)
            }
        }
        let m = a.merge(&b);
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
        assert_relative_eq!(m.mean(), mean, epsilon = 1e-12);
        assert_relative_eq!(m.variance(), var, epsilon = 1e-10);
    }

    #[test]
    fn uniform_mean_and_determinism() {
        let f = |rng: &mut ChaCha8Rng| rng.random::<f64>();
        let a = monte_carlo(100_000, 5, f);
        let b = monte_carlo(100_000, 5, f);
        assert_eq!(a.mean(), b.mean());
        assert!((a.mean() - 0.5).abs() < 3.0 * a.std_error());
        assert_relative_eq!(a.std_error(), (1.0f64 / 12.0 / 1e5).sqrt(), max_relative = 0.02);
        assert_eq!(a.count(), 100_000);
    }

    #[test]
    fn thread_count_does_not_matter() {
        let f = |rng: &mut ChaCha8Rng| rng.random::<f64>().powi(3);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| monte_carlo(10_001, 9, f));
        let b = four.install(|| monte_carlo(10_001, 9, f));
        assert_eq!(a.mean().to_bits(), b.mean().to_bits());
        assert_eq!(a.variance().to_bits(), b.variance().to_bits());
    }
}
