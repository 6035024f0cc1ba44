//! Importance-sampling proposals for cluster integrals.
//!
//! A cluster of `k` points is drawn by picking a uniform random labeled tree
//! on `[k]` and placing the points along it from a fixed root, each edge an
//! independent displacement with radial density proportional to the cube
//! root of the dominator. The density of the mixture over trees is
//! `k^{-(k-2)}` times a cofactor of the weighted Laplacian.

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::census::canon::K_MAX;
use crate::model::connection::ConnectionFunction;
use crate::model::window::unit_ball_volume;

/// Displacement law of one tree edge.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Radial {
    /// Uniform on the ball of radius `r`.
    Ball { r: f64 },
    /// Independent centered normals with standard deviation `sd`.
    Normal { sd: f64 },
    /// Density proportional to `exp(-|z| / a)`.
    Laplace { a: f64 },
}

fn unit_direction<R: Rng + ?Sized>(dim: usize, rng: &mut R, out: &mut [f64]) {
    loop {
        let mut n2 = 0.0;
        for v in out.iter_mut().take(dim) {
            let g: f64 = StandardNormal.sample(rng);
            *v = g;
            n2 += g * g;
        }
        if n2 > 1e-300 {
            let inv = 1.0 / n2.sqrt();
            out.iter_mut().take(dim).for_each(|v| *v *= inv);
            return;
        }
    }
}

impl Radial {
    /// Density proportional to the cube root of phi's dominator.
    pub fn for_phi(phi: &ConnectionFunction) -> Radial {
        match *phi {
            ConnectionFunction::Gilbert { r } | ConnectionFunction::ScaledIndicator { r, .. } => Radial::Ball { r },
            ConnectionFunction::Gaussian { s } => Radial::Normal { sd: s * 1.5f64.sqrt() },
            ConnectionFunction::Exponential { theta } => Radial::Laplace { a: 3.0 * theta },
        }
    }

    pub fn scaled(&self, f: f64) -> Radial {
        match *self {
            Radial::Ball { r } => Radial::Ball { r: r * f },
            Radial::Normal { sd } => Radial::Normal { sd: sd * f },
            Radial::Laplace { a } => Radial::Laplace { a: a * f },
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, dim: usize, rng: &mut R, out: &mut [f64]) {
        match *self {
            Radial::Ball { r } => {
                unit_direction(dim, rng, out);
                let u: f64 = rng.random();
                let t = r * u.powf(1.0 / dim as f64);
                out.iter_mut().take(dim).for_each(|v| *v *= t);
            }
            Radial::Normal { sd } => {
                for v in out.iter_mut().take(dim) {
                    let g: f64 = StandardNormal.sample(rng);
                    *v = sd * g;
                }
            }
            Radial::Laplace { a } => {
                unit_direction(dim, rng, out);
                let t = Gamma::new(dim as f64, a).expect("valid gamma").sample(rng);
                out.iter_mut().take(dim).for_each(|v| *v *= t);
            }
        }
    }

    pub fn density(&self, dim: usize, z: &[f64]) -> f64 {
        let n2: f64 = z.iter().map(|v| v * v).sum();
        match *self {
            Radial::Ball { r } => {
                if n2 <= r * r {
                    1.0 / (unit_ball_volume(dim) * r.powi(dim as i32))
                } else {
                    0.0
                }
            }
            Radial::Normal { sd } => {
                let v = sd * sd;
                (2.0 * std::f64::consts::PI * v).powf(-(dim as f64) / 2.0) * (-n2 / (2.0 * v)).exp()
            }
            Radial::Laplace { a } => {
                let fact: f64 = (1..=dim).map(|i| i as f64).product();
                (-n2.sqrt() / a).exp() / (unit_ball_volume(dim) * fact * a.powi(dim as i32))
            }
        }
    }

    /// Nominal length scale, used to report truncation radii.
    pub fn reach(&self) -> f64 {
        match *self {
            Radial::Ball { r } => r,
            Radial::Normal { sd } => 5.0 * sd,
            Radial::Laplace { a } => 10.0 * a,
        }
    }
}

/// Uniform random labeled tree on `[k]` as a parent array rooted at 0.
fn random_tree<R: Rng + ?Sized>(k: usize, rng: &mut R) -> [usize; K_MAX] {
    let mut parent = [usize::MAX; K_MAX];
    if k <= 1 {
        return parent;
    }
    let mut adj = [[false; K_MAX]; K_MAX];
    if k == 2 {
        adj[0][1] = true;
        adj[1][0] = true;
    } else {
        // Pruefer decoding
        let seq: Vec<usize> = (0..k - 2).map(|_| rng.random_range(0..k)).collect();
        let mut degree = [1usize; K_MAX];
        for &s in &seq {
            degree[s] += 1;
        }
        for &s in &seq {
            let leaf = (0..k).find(|&v| degree[v] == 1).expect("a leaf exists");
            adj[leaf][s] = true;
            adj[s][leaf] = true;
            degree[leaf] -= 1;
            degree[s] -= 1;
        }
        let rest: Vec<usize> = (0..k).filter(|&v| degree[v] == 1).collect();
        adj[rest[0]][rest[1]] = true;
        adj[rest[1]][rest[0]] = true;
    }
    let mut stack = vec![0usize];
    let mut seen = [false; K_MAX];
    seen[0] = true;
    while let Some(v) = stack.pop() {
        for u in 0..k {
            if adj[v][u] && !seen[u] {
                seen[u] = true;
                parent[u] = v;
                stack.push(u);
            }
        }
    }
    parent
}

/// Determinant of a small dense matrix (row-major, `n x n`).
fn det(n: usize, m: &mut [f64]) -> f64 {
    let mut d = 1.0;
    for c in 0..n {
        let mut piv = c;
        for r in (c + 1)..n {
            if m[r * n + c].abs() > m[piv * n + c].abs() {
                piv = r;
            }
        }
        if m[piv * n + c] == 0.0 {
            return 0.0;
        }
        if piv != c {
            for j in 0..n {
                m.swap(c * n + j, piv * n + j);
            }
            d = -d;
        }
        let p = m[c * n + c];
        d *= p;
        for r in (c + 1)..n {
            let f = m[r * n + c] / p;
            if f != 0.0 {
                for j in c..n {
                    m[r * n + j] -= f * m[c * n + j];
                }
            }
        }
    }
    d
}

/// Tree-mixture proposal for clusters of `k` points in `R^dim`.
#[derive(Clone, Copy, Debug)]
pub struct TreeProposal {
    pub k: usize,
    pub dim: usize,
    pub radial: Radial,
}

impl TreeProposal {
    pub fn new(k: usize, dim: usize, radial: Radial) -> Self {
        assert!((1..=K_MAX).contains(&k));
        TreeProposal { k, dim, radial }
    }

    /// Fills `out` (`k * dim` coordinates) with a cluster rooted at `root`.
    pub fn sample<R: Rng + ?Sized>(&self, root: &[f64], rng: &mut R, out: &mut [f64]) {
        let (k, d) = (self.k, self.dim);
        out[..d].copy_from_slice(&root[..d]);
        if k == 1 {
            return;
        }
        let parent = random_tree(k, rng);
        // place in an order where parents come first
        let mut placed = [false; K_MAX];
        placed[0] = true;
        let mut z = [0.0; 8];
        let mut remaining = k - 1;
        while remaining > 0 {
            for v in 1..k {
                if !placed[v] && placed[parent[v]] {
                    self.radial.sample(d, rng, &mut z[..d]);
                    for a in 0..d {
                        out[v * d + a] = out[parent[v] * d + a] + z[a];
                    }
                    placed[v] = true;
                    remaining -= 1;
                }
            }
        }
    }

    /// Density of the non-root points given the root.
    pub fn density(&self, pts: &[f64]) -> f64 {
        let (k, d) = (self.k, self.dim);
        if k == 1 {
            return 1.0;
        }
        let n = k - 1;
        let mut lap = [0.0; (K_MAX - 1) * (K_MAX - 1)];
        let mut z = [0.0; 8];
        for i in 0..k {
            for j in (i + 1)..k {
                for a in 0..d {
                    z[a] = pts[i * d + a] - pts[j * d + a];
                }
                let w = self.radial.density(d, &z[..d]);
                if w == 0.0 {
                    continue;
                }
                // vertex 0 removed: indices shift by one
                if i > 0 {
                    lap[(i - 1) * n + (i - 1)] += w;
                }
                lap[(j - 1) * n + (j - 1)] += w;
                if i > 0 {
                    lap[(i - 1) * n + (j - 1)] -= w;
                    lap[(j - 1) * n + (i - 1)] -= w;
                }
            }
        }
        let trees = (k as f64).powi(k as i32 - 2);
        det(n, &mut lap[..n * n]).max(0.0) / trees
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn radial_densities_integrate_to_one() {
        for radial in [Radial::Ball { r: 1.3 }, Radial::Normal { sd: 0.7 }, Radial::Laplace { a: 0.4 }] {
            for dim in [1usize, 2, 3] {
                // surface area of the unit sphere times int t^{d-1} g(t) dt
                let surface = dim as f64 * unit_ball_volume(dim);
                let f = |t: f64| {
                    let mut z = vec![0.0; dim];
                    z[0] = t;
                    surface * t.powi(dim as i32 - 1) * radial.density(dim, &z)
                };
                let v = match radial {
                    Radial::Ball { r } => crate::quad::integrate(f, 0.0, r, 1e-12, 1e-12),
                    _ => crate::quad::integrate_to_infinity(f, 0.0, 1e-12, 1e-10),
                };
                assert_relative_eq!(v, 1.0, epsilon = 1e-7);
            }
        }
    }

    #[test]
    fn sampled_norms_have_right_mean() {
        // E|Z| for the ball: r d / (d + 1); for the Laplace law: d a
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut z = [0.0; 3];
        let n = 100_000;
        let mut s_ball = 0.0;
        let mut s_lap = 0.0;
        for _ in 0..n {
            Radial::Ball { r: 2.0 }.sample(3, &mut rng, &mut z);
            s_ball += crate::model::connection::norm(&z);
            Radial::Laplace { a: 0.5 }.sample(3, &mut rng, &mut z);
            s_lap += crate::model::connection::norm(&z);
        }
        assert_relative_eq!(s_ball / n as f64, 1.5, max_relative = 0.01);
        assert_relative_eq!(s_lap / n as f64, 1.5, max_relative = 0.01);
    }

    #[test]
    fn tree_mixture_density_is_normalized() {
        // integrate the k = 3 density over R^{2 x 2} by sampling from a wide
        // normal and averaging density / normal density
        let prop = TreeProposal::new(3, 2, Radial::Normal { sd: 0.5 });
        let wide = Radial::Normal { sd: 1.5 };
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 200_000;
        let mut acc = 0.0;
        let mut pts = [0.0; 6];
        for _ in 0..n {
            wide.sample(2, &mut rng, &mut pts[2..4]);
            wide.sample(2, &mut rng, &mut pts[4..6]);
            let q = wide.density(2, &pts[2..4]) * wide.density(2, &pts[4..6]);
            acc += prop.density(&pts) / q;
        }
        assert_relative_eq!(acc / n as f64, 1.0, max_relative = 0.02);
    }

    #[test]
    fn two_point_density_is_edge_density() {
        let prop = TreeProposal::new(2, 2, Radial::Ball { r: 1.0 });
        let pts = [0.0, 0.0, 0.3, 0.4];
        assert_relative_eq!(prop.density(&pts), 1.0 / std::f64::consts::PI, epsilon = 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut out = [0.0; 8];
        let p4 = TreeProposal::new(4, 2, Radial::Ball { r: 1.0 });
        for _ in 0..1000 {
            p4.sample(&[0.5, 0.5], &mut rng, &mut out);
            assert_eq!(&out[..2], &[0.5, 0.5]);
            assert!(p4.density(&out) > 0.0);
        }
    }
}
