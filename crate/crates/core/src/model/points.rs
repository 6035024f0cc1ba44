use std::cmp::Ordering;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{RcmError, Result};
use crate::model::window::Window;

/// Lexicographic order on R^d: coordinates compared left to right.
#[inline]
pub fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    Ordering::Equal
}

/// A finite point configuration in R^d, sorted lexicographically, each
/// point carrying a stable integer id used to key pair marks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointSet {
    dim: usize,
    coords: Vec<f64>,
    ids: Vec<i64>,
    seed: u64,
    region: Option<Window>,
    beta: f64,
}

/// Draws a Poisson count with the given mean.
pub(crate) fn poisson_count<R: rand::Rng + ?Sized>(mean: f64, rng: &mut R) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    let dist = Poisson::new(mean).expect("finite positive Poisson mean");
    dist.sample(rng) as usize
}

/// Homogeneous Poisson process of intensity `beta` on `window` grown by
/// `padding`. Deterministic in `seed`; ids are the sorted positions.
pub fn sample_poisson(window: &Window, padding: f64, beta: f64, seed: u64) -> Result<PointSet> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(RcmError::InvalidParameter(format!("intensity must be positive, got {beta}")));
    }
    if !(padding >= 0.0) || !padding.is_finite() {
        return Err(RcmError::InvalidParameter(format!("padding must be nonnegative, got {padding}")));
    }
    let region = window.padded(padding);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = poisson_count(beta * region.volume(), &mut rng);
    let points: Vec<Vec<f64>> = (0..n).map(|_| region.sample_uniform(&mut rng)).collect();
    let mut set = PointSet::from_points(region.dim(), points)?;
    set.seed = seed;
    set.region = Some(region);
    set.beta = beta;
    Ok(set)
}

impl PointSet {
    /// Sorts the points and assigns ids `0..n`.
    pub fn from_points(dim: usize, points: Vec<Vec<f64>>) -> Result<Self> {
        let tagged = points.into_iter().enumerate().map(|(i, p)| (i as i64, p)).collect();
        let mut set = PointSet::from_tagged(dim, tagged)?;
        set.ids = (0..set.len() as i64).collect();
        Ok(set)
    }

    /// Builds a set from `(id, point)` pairs, keeping the given ids.
    pub fn from_tagged(dim: usize, mut tagged: Vec<(i64, Vec<f64>)>) -> Result<Self> {
        if dim == 0 {
            return Err(RcmError::InvalidParameter("dimension must be >= 1".into()));
        }
        for (_, p) in &tagged {
            if p.len() != dim {
                return Err(RcmError::DimensionMismatch {
                    expected: dim,
                    found: p.len(),
                });
            }
            if p.iter().any(|c| !c.is_finite()) {
                return Err(RcmError::InvalidParameter("point coordinates must be finite".into()));
            }
        }
        tagged.sort_by(|a, b| lex_cmp(&a.1, &b.1));
        for (i, w) in tagged.windows(2).enumerate() {
            if lex_cmp(&w[0].1, &w[1].1) == Ordering::Equal {
                return Err(RcmError::DuplicatePoint(i, i + 1));
            }
        }
        let mut seen: Vec<i64> = tagged.iter().map(|t| t.0).collect();
        seen.sort_unstable();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(RcmError::InvalidParameter("point ids must be unique".into()));
        }
        let ids = tagged.iter().map(|t| t.0).collect();
        let coords = tagged.into_iter().flat_map(|t| t.1).collect();
        Ok(PointSet {
            dim,
            coords,
            ids,
            seed: 0,
            region: None,
            beta: 0.0,
        })
    }

    pub fn with_region(mut self, region: Window) -> Self {
        self.region = Some(region);
        self
    }

    pub fn with_meta(mut self, seed: u64, beta: f64) -> Self {
        self.seed = seed;
        self.beta = beta;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn id(&self, i: usize) -> i64 {
        self.ids[i]
    }

    pub fn ids(&self) -> &[i64] {
        &self.ids
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// The padded sampling region, if the set came from a sampler.
    pub fn region(&self) -> Option<&Window> {
        self.region.as_ref()
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn count_in(&self, window: &Window) -> usize {
        self.iter().filter(|p| window.contains(p)).count()
    }

    /// Position of the point with the given id.
    pub fn index_of(&self, id: i64) -> Option<usize> {
        self.ids.iter().position(|&i| i == id)
    }
}
