//! Monte Carlo evaluation of the cluster integrals behind expected
//! component counts and their (asymptotic) covariances.
//!
//! All integrals are symmetrized: the ordering indicator
//! `1{x_1 < ... < x_k}` is dropped and compensated by `1/k!` (or by
//! `1/(k-1)!` when the first point is pinned as the minimum), so the
//! integrands are symmetric and can be sampled with tree proposals.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::census::canon::{enumerate_classes, GraphClass, K_MAX, TABLE_CAP};
use crate::error::{RcmError, Result};
use crate::model::connection::{ConnectionFunction, DEFAULT_EPS_TRUNC};
use crate::model::marks::derive_seed;
use crate::model::points::lex_cmp;
use crate::model::window::Window;
use crate::moments::estimate::{monte_carlo, MomentEstimate};
use crate::moments::exponent::void_exponent_mixed;
use crate::moments::probability::{event_probability, joint_event_probability, ClusterEvent, JOINT_CAP};
use crate::moments::proposal::{Radial, TreeProposal};

/// Default number of proposal samples per integral.
pub const DEFAULT_SAMPLES: u64 = 1_000_000;

/// Largest dimension handled by the cluster samplers.
pub const MAX_DIM: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentOptions {
    pub dim: usize,
    pub samples: u64,
    pub seed: u64,
}

impl MomentOptions {
    pub fn new(dim: usize) -> Self {
        MomentOptions {
            dim,
            samples: DEFAULT_SAMPLES,
            seed: 0,
        }
    }

    pub fn with_samples(mut self, samples: u64) -> Self {
        self.samples = samples;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.dim > MAX_DIM {
            return Err(RcmError::InvalidParameter(format!(
                "dimension must be in 1..={MAX_DIM}, got {}",
                self.dim
            )));
        }
        if self.samples < 2 {
            return Err(RcmError::BudgetTooSmall("at least two Monte Carlo samples are needed".into()));
        }
        Ok(())
    }
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(RcmError::InvalidParameter(format!("intensity must be positive, got {beta}")));
    }
    Ok(())
}

fn chunks(pts: &[f64], dim: usize) -> Vec<&[f64]> {
    pts.chunks_exact(dim).collect()
}

fn exponent_of(dim: usize, pts: &[&[f64]], phi: &ConnectionFunction, beta: f64) -> f64 {
    let funcs = vec![*phi; pts.len()];
    void_exponent_mixed(dim, pts, &funcs, beta).expect("exponent on a valid cluster")
}

/// `rho` with `E eta_event(W) = rho * vol(W)`:
/// `beta^k / k! * int P(Gamma(0, x_2..x_k) in event) exp(E(0, x_2..x_k))`.
pub fn expected_event_intensity(
    event: &ClusterEvent,
    phi: &ConnectionFunction,
    beta: f64,
    opts: &MomentOptions,
) -> Result<MomentEstimate> {
    opts.validate()?;
    check_beta(beta)?;
    phi.validate()?;
    event.check(K_MAX)?;
    let k = event.order();
    let dim = opts.dim;
    if k == 1 {
        return Ok(MomentEstimate::closed_form(beta * (-beta * phi.m_phi(dim)).exp()));
    }
    let prop = TreeProposal::new(k, dim, Radial::for_phi(phi));
    let origin = vec![0.0; dim];
    let acc = monte_carlo(opts.samples, opts.seed, |rng: &mut ChaCha8Rng| {
        let mut pts = vec![0.0; k * dim];
        prop.sample(&origin, rng, &mut pts);
        let refs = chunks(&pts, dim);
        let p = event_probability(&refs, phi, event).expect("order checked");
        if p == 0.0 {
            return 0.0;
        }
        let dens = prop.density(&pts);
        if dens == 0.0 {
            return 0.0;
        }
        p * exponent_of(dim, &refs, phi, beta).exp() / dens
    });
    let scale = beta.powi(k as i32) / factorial(k);
    Ok(acc
        .estimate((k - 1) as f64 * prop.radial.reach().max(phi.interaction_range(DEFAULT_EPS_TRUNC)))
        .scaled(scale))
}

/// `rho_G` with `E eta_G(W) = rho_G * vol(W)`.
pub fn expected_count_intensity(
    class: &GraphClass,
    phi: &ConnectionFunction,
    beta: f64,
    opts: &MomentOptions,
) -> Result<MomentEstimate> {
    expected_event_intensity(&ClusterEvent::Class(*class), phi, beta, opts)
}

/// Cross part of the asymptotic covariance: cluster one at the origin
/// (phi, event `a`), cluster two anywhere (psi, event `b`).
fn cross_term(
    a: &ClusterEvent,
    b: &ClusterEvent,
    phi: &ConnectionFunction,
    psi: &ConnectionFunction,
    beta: f64,
    opts: &MomentOptions,
    seed: u64,
) -> MomentEstimate {
    let (k, l, dim) = (a.order(), b.order(), opts.dim);
    let p1 = TreeProposal::new(k, dim, Radial::for_phi(phi));
    let p2 = TreeProposal::new(l, dim, Radial::for_phi(psi));
    let anchor = Radial::for_phi(phi).scaled((k + l) as f64);
    let origin = vec![0.0; dim];
    let acc = monte_carlo(opts.samples, seed, |rng: &mut ChaCha8Rng| {
        let mut c1 = vec![0.0; k * dim];
        let mut c2 = vec![0.0; l * dim];
        let mut d = vec![0.0; dim];
        p1.sample(&origin, rng, &mut c1);
        anchor.sample(dim, rng, &mut d);
        p2.sample(&d, rng, &mut c2);
        let r1 = chunks(&c1, dim);
        let r2 = chunks(&c2, dim);
        let pa = event_probability(&r1, phi, a).expect("order checked");
        if pa == 0.0 {
            return 0.0;
        }
        let pb = event_probability(&r2, psi, b).expect("order checked");
        if pb == 0.0 {
            return 0.0;
        }
        let dens = p1.density(&c1) * anchor.density(dim, &d) * p2.density(&c2);
        if dens == 0.0 {
            return 0.0;
        }
        let mut no_cross = 1.0;
        for x in &r1 {
            for y in &r2 {
                no_cross *= 1.0 - phi.eval_between(x, y);
            }
        }
        let e1 = exponent_of(dim, &r1, phi, beta);
        let e2 = exponent_of(dim, &r2, psi, beta);
        let mut all = r1.clone();
        all.extend_from_slice(&r2);
        let mut funcs = vec![*phi; k];
        funcs.extend(std::iter::repeat_n(*psi, l));
        let joint = void_exponent_mixed(dim, &all, &funcs, beta).expect("exponent on a valid cluster");
        let q = no_cross * joint.exp() - (e1 + e2).exp();
        pa * pb * q / dens
    });
    let scale = beta.powi((k + l) as i32) / (factorial(k) * factorial(l));
    acc.estimate(anchor.reach()).scaled(scale)
}

/// Diagonal part (`k = l`): one cluster, both events on it.
fn diagonal_term(
    a: &ClusterEvent,
    b: &ClusterEvent,
    phi: &ConnectionFunction,
    psi: &ConnectionFunction,
    beta: f64,
    opts: &MomentOptions,
    seed: u64,
) -> MomentEstimate {
    let (k, dim) = (a.order(), opts.dim);
    if k == 1 {
        return MomentEstimate::closed_form(beta * (-beta * phi.m_phi(dim)).exp());
    }
    let prop = TreeProposal::new(k, dim, Radial::for_phi(phi));
    let origin = vec![0.0; dim];
    let acc = monte_carlo(opts.samples, seed, |rng: &mut ChaCha8Rng| {
        let mut pts = vec![0.0; k * dim];
        prop.sample(&origin, rng, &mut pts);
        let refs = chunks(&pts, dim);
        let p = joint_event_probability(&refs, phi, psi, a, b).expect("orders checked");
        if p == 0.0 {
            return 0.0;
        }
        let dens = prop.density(&pts);
        if dens == 0.0 {
            return 0.0;
        }
        p * exponent_of(dim, &refs, phi, beta).exp() / dens
    });
    let scale = beta.powi(k as i32) / factorial(k);
    acc.estimate((k - 1) as f64 * prop.radial.reach()).scaled(scale)
}

/// Asymptotic covariance of the counts of two cluster events, `psi <= phi`.
pub fn asy_cov_events(
    a: &ClusterEvent,
    b: &ClusterEvent,
    phi: &ConnectionFunction,
    psi: &ConnectionFunction,
    beta: f64,
    opts: &MomentOptions,
) -> Result<MomentEstimate> {
    opts.validate()?;
    check_beta(beta)?;
    phi.check_domination(psi)?;
    a.check(TABLE_CAP)?;
    b.check(TABLE_CAP)?;
    let cross = cross_term(a, b, phi, psi, beta, opts, derive_seed(opts.seed, 1));
    if a.order() != b.order() {
        return Ok(cross);
    }
    a.check(JOINT_CAP)?;
    let diag = diagonal_term(a, b, phi, psi, beta, opts, derive_seed(opts.seed, 2));
    Ok(cross.plus(&diag))
}

/// `sigma_{phi,psi}(G, H)`.
pub fn asy_cov(
    g: &GraphClass,
    h: &GraphClass,
    phi: &ConnectionFunction,
    psi: &ConnectionFunction,
    beta: f64,
    opts: &MomentOptions,
) -> Result<MomentEstimate> {
    asy_cov_events(&ClusterEvent::Class(*g), &ClusterEvent::Class(*h), phi, psi, beta, opts)
}

/// `sigma^{(k,l)}_{phi,psi}`: covariance of the numbers of `k`- and
/// `l`-components.
pub fn asy_cov_kl(
    k: usize,
    l: usize,
    phi: &ConnectionFunction,
    psi: &ConnectionFunction,
    beta: f64,
    opts: &MomentOptions,
) -> Result<MomentEstimate> {
    asy_cov_events(&ClusterEvent::Connected(k), &ClusterEvent::Connected(l), phi, psi, beta, opts)
}

/// Symmetric matrix of asymptotic covariances with standard errors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovarianceMatrix {
    pub labels: Vec<String>,
    pub values: Vec<Vec<f64>>,
    pub std_errors: Vec<Vec<f64>>,
}

impl CovarianceMatrix {
    pub fn size(&self) -> usize {
        self.values.len()
    }

    /// Smallest eigenvalue and its first-order propagated error, treating
    /// the upper-triangle entries as independent.
    pub fn min_eigenvalue(&self) -> (f64, f64) {
        let m = self.size();
        let mat = nalgebra::DMatrix::from_fn(m, m, |i, j| self.values[i][j]);
        let eig = nalgebra::SymmetricEigen::new(mat);
        let (idx, &lam) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("nonempty matrix");
        let v = eig.eigenvectors.column(idx);
        let mut var = 0.0;
        for i in 0..m {
            for j in i..m {
                let c = if i == j { 1.0 } else { 2.0 };
                var += (c * v[i] * v[j] * self.std_errors[i][j]).powi(2);
            }
        }
        (lam, var.sqrt())
    }
}

/// Pairwise `sigma_{phi,phi}(G_i, G_j)` for distinct events.
pub fn asy_cov_matrix(
    events: &[ClusterEvent],
    phi: &ConnectionFunction,
    beta: f64,
    opts: &MomentOptions,
) -> Result<CovarianceMatrix> {
    let m = events.len();
    if m == 0 {
        return Err(RcmError::EmptyInput);
    }
    let mut values = vec![vec![0.0; m]; m];
    let mut errors = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in i..m {
            let o = opts.with_seed(derive_seed(opts.seed, (i * m + j) as u64 + 100));
            let est = asy_cov_events(&events[i], &events[j], phi, phi, beta, &o)?;
            values[i][j] = est.value;
            values[j][i] = est.value;
            errors[i][j] = est.std_error;
            errors[j][i] = est.std_error;
        }
    }
    let labels = events
        .iter()
        .map(|e| match e {
            ClusterEvent::Class(g) => g.id(),
            ClusterEvent::Connected(k) => format!("k{k}"),
        })
        .collect();
    Ok(CovarianceMatrix {
        labels,
        values,
        std_errors: errors,
    })
}

/// `sum_{i,j} a_i a_j sigma_{phi,phi}(G_i, G_j)`.
pub fn asy_var_quadratic(
    a: &[f64],
    classes: &[GraphClass],
    phi: &ConnectionFunction,
    beta: f64,
    opts: &MomentOptions,
) -> Result<MomentEstimate> {
    crate::census::report::check_weights(a, classes)?;
    let events: Vec<ClusterEvent> = classes.iter().map(|g| ClusterEvent::Class(*g)).collect();
    let cov = asy_cov_matrix(&events, phi, beta, opts)?;
    Ok(quadratic_form(a, &cov))
}

pub(crate) fn quadratic_form(a: &[f64], cov: &CovarianceMatrix) -> MomentEstimate {
    let m = a.len();
    let mut value = 0.0;
    let mut var = 0.0;
    for i in 0..m {
        for j in 0..m {
            value += a[i] * a[j] * cov.values[i][j];
        }
        for j in i..m {
            let c = if i == j { 1.0 } else { 2.0 };
            var += (c * a[i] * a[j] * cov.std_errors[i][j]).powi(2);
        }
    }
    MomentEstimate {
        value,
        std_error: var.sqrt(),
        n_samples: 0,
        truncation_radius: 0.0,
        method: crate::moments::estimate::Method::MonteCarlo,
    }
}

/// Partial sums `S_n = sum_{i,j <= n} sigma^{(i,j)}` for `n = 1..=m`.
pub fn sigma_total_partial(
    m: usize,
    phi: &ConnectionFunction,
    beta: f64,
    opts: &MomentOptions,
) -> Result<Vec<MomentEstimate>> {
    if m == 0 || m > JOINT_CAP {
        return Err(RcmError::OrderTooLarge { order: m, cap: JOINT_CAP });
    }
    let mut table = vec![vec![MomentEstimate::closed_form(0.0); m + 1]; m + 1];
    for i in 1..=m {
        for j in i..=m {
            let o = opts.with_seed(derive_seed(opts.seed, (i * 16 + j) as u64));
            table[i][j] = asy_cov_kl(i, j, phi, phi, beta, &o)?;
        }
    }
    let mut out = Vec::with_capacity(m);
    let mut running = MomentEstimate::closed_form(0.0);
    for n in 1..=m {
        running = running.plus(&table[n][n]);
        for i in 1..n {
            running = running.plus(&table[i][n].scaled(2.0));
        }
        out.push(running);
    }
    Ok(out)
}

/// `E eta_{phi,G}(W) eta_{psi,H}(W)` for a finite window: the distinct-
/// cluster term plus, when the orders agree, the shared-cluster term.
pub fn finite_window_cross_moment_events(
    a: &ClusterEvent,
    b: &ClusterEvent,
    phi: &ConnectionFunction,
    psi: &ConnectionFunction,
    window: &Window,
    beta: f64,
    opts: &MomentOptions,
) -> Result<MomentEstimate> {
    opts.validate()?;
    check_beta(beta)?;
    phi.check_domination(psi)?;
    a.check(TABLE_CAP)?;
    b.check(TABLE_CAP)?;
    let dim = opts.dim;
    if window.dim() != dim {
        return Err(RcmError::DimensionMismatch {
            expected: dim,
            found: window.dim(),
        });
    }
    let vol = window.volume();
    if vol == 0.0 {
        return Ok(MomentEstimate::closed_form(0.0));
    }
    let (k, l) = (a.order(), b.order());
    let p1 = TreeProposal::new(k, dim, Radial::for_phi(phi));
    let p2 = TreeProposal::new(l, dim, Radial::for_phi(psi));
    let first_is_min = |pts: &[&[f64]]| pts[1..].iter().all(|p| lex_cmp(pts[0], p) == std::cmp::Ordering::Less);
    let acc = monte_carlo(opts.samples, derive_seed(opts.seed, 1), |rng: &mut ChaCha8Rng| {
        let mut c1 = vec![0.0; k * dim];
        let mut c2 = vec![0.0; l * dim];
        let x1 = window.sample_uniform(rng);
        let x2 = window.sample_uniform(rng);
        p1.sample(&x1, rng, &mut c1);
        p2.sample(&x2, rng, &mut c2);
        let r1 = chunks(&c1, dim);
        let r2 = chunks(&c2, dim);
        if !first_is_min(&r1) || !first_is_min(&r2) {
            return 0.0;
        }
        let pa = event_probability(&r1, phi, a).expect("order checked");
        let pb = event_probability(&r2, psi, b).expect("order checked");
        if pa * pb == 0.0 {
            return 0.0;
        }
        let dens = p1.density(&c1) * p2.density(&c2) / (vol * vol);
        if dens == 0.0 {
            return 0.0;
        }
        let mut no_cross = 1.0;
        for x in &r1 {
            for y in &r2 {
                no_cross *= 1.0 - phi.eval_between(x, y);
            }
        }
        if no_cross == 0.0 {
            return 0.0;
        }
        let mut all = r1.clone();
        all.extend_from_slice(&r2);
        let mut funcs = vec![*phi; k];
        funcs.extend(std::iter::repeat_n(*psi, l));
        let joint = void_exponent_mixed(dim, &all, &funcs, beta).expect("exponent on a valid cluster");
        pa * pb * no_cross * joint.exp() / dens
    });
    let scale = beta.powi((k + l) as i32) / (factorial(k - 1) * factorial(l - 1));
    let reach = (k + l) as f64 * Radial::for_phi(phi).reach();
    let distinct = acc.estimate(reach).scaled(scale);
    if k != l {
        return Ok(distinct);
    }
    a.check(JOINT_CAP)?;
    let shared = monte_carlo(opts.samples, derive_seed(opts.seed, 2), |rng: &mut ChaCha8Rng| {
        let mut c = vec![0.0; k * dim];
        let x1 = window.sample_uniform(rng);
        p1.sample(&x1, rng, &mut c);
        let r = chunks(&c, dim);
        if !first_is_min(&r) {
            return 0.0;
        }
        let p = joint_event_probability(&r, phi, psi, a, b).expect("orders checked");
        if p == 0.0 {
            return 0.0;
        }
        let dens = p1.density(&c) / vol;
        if dens == 0.0 {
            return 0.0;
        }
        p * exponent_of(dim, &r, phi, beta).exp() / dens
    });
    let shared = shared.estimate(reach).scaled(beta.powi(k as i32) / factorial(k - 1));
    Ok(distinct.plus(&shared))
}

/// `E eta_{phi,G}(W) eta_{psi,H}(W)`.
pub fn finite_window_cross_moment(
    g: &GraphClass,
    h: &GraphClass,
    phi: &ConnectionFunction,
    psi: &ConnectionFunction,
    window: &Window,
    beta: f64,
    opts: &MomentOptions,
) -> Result<MomentEstimate> {
    finite_window_cross_moment_events(
        &ClusterEvent::Class(*g),
        &ClusterEvent::Class(*h),
        phi,
        psi,
        window,
        beta,
        opts,
    )
}

/// Classes of order `k` that occur with positive probability somewhere on
/// a probe: `p_{phi,G} > 0` on clusters drawn from the tree proposal.
pub fn occurring_classes(k: usize, phi: &ConnectionFunction, dim: usize, probes: usize, seed: u64) -> Result<Vec<GraphClass>> {
    let classes = enumerate_classes(k)?;
    if k > TABLE_CAP {
        return Err(RcmError::OrderTooLarge { order: k, cap: TABLE_CAP });
    }
    let prop = TreeProposal::new(k, dim, Radial::for_phi(phi));
    let mut seen = vec![false; classes.len()];
    let mut rng = <ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
    let origin = vec![0.0; dim];
    let mut pts = vec![0.0; k * dim];
    for _ in 0..probes {
        // shrink half the probes toward the origin so dense configurations appear
        let shrink: f64 = if rng.random::<bool>() { rng.random::<f64>() } else { 1.0 };
        prop.sample(&origin, &mut rng, &mut pts);
        pts.iter_mut().for_each(|v| *v *= shrink);
        let dist = crate::moments::probability::class_distribution(&chunks(&pts, dim), phi)?;
        for (s, p) in seen.iter_mut().zip(&dist) {
            *s |= *p > 0.0;
        }
    }
    Ok(classes.into_iter().zip(seen).filter(|(_, s)| *s).map(|(c, _)| c).collect())
}
