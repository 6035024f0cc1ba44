//! Nested Monte Carlo for the birth-time variance representation
//! `Var F = int int_0^1 int E[ E[f(xi + x) - f(xi + x without x) | past_t]^2 ] dM dt beta dx`.
//!
//! Every point carries a birth time and a mark block; the mark of a pair
//! is drawn from the block of its younger point. Conditioning on the past
//! fixes the marks among old points and between `x` and old points; the
//! future brings its own blocks.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::analysis::difference::{fresh_id, DifferenceContext};
use crate::analysis::functional::FunctionalSpec;
use crate::error::{RcmError, Result};
use crate::model::connection::DEFAULT_EPS_TRUNC;
use crate::model::graph::RcmGraph;
use crate::model::marks::{block_mark, Marks};
use crate::model::points::{poisson_count, PointSet};
use crate::model::window::Window;
use crate::moments::estimate::{monte_carlo, MomentEstimate};

/// Largest window volume accepted by [`birth_time_variance`].
pub const BIRTH_TIME_VOLUME_CAP: f64 = 27.0;

/// Pair marks from birth-ordered mark blocks.
struct BirthMarks {
    births: Vec<f64>,
    blocks: Vec<u64>,
    x_id: i64,
    x_birth: f64,
    x_block: u64,
}

impl BirthMarks {
    fn lookup(&self, id: i64) -> (f64, u64) {
        if id == self.x_id {
            (self.x_birth, self.x_block)
        } else {
            (self.births[id as usize], self.blocks[id as usize])
        }
    }
}

impl Marks for BirthMarks {
    fn mark(&self, a: i64, b: i64) -> f64 {
        let (ta, ma) = self.lookup(a);
        let (tb, mb) = self.lookup(b);
        if ta > tb {
            block_mark(ma, b)
        } else {
            block_mark(mb, a)
        }
    }
}

fn add_points(
    region: &Window,
    mean: f64,
    times: (f64, f64),
    rng: &mut ChaCha8Rng,
    tagged: &mut Vec<(i64, Vec<f64>)>,
    marks: &mut BirthMarks,
) {
    let n = poisson_count(mean, rng);
    for _ in 0..n {
        let id = tagged.len() as i64;
        tagged.push((id, region.sample_uniform(rng)));
        marks.births.push(times.0 + (times.1 - times.0) * rng.random::<f64>());
        marks.blocks.push(rng.random());
    }
}

/// Estimates `Var F` through the birth-time representation. Each of the
/// `outer` draws picks `(x, t, M)` and a past; the conditional mean given
/// the past is estimated from `inner` independent futures and squared by
/// the split-sample product of the two half means.
pub fn birth_time_variance(spec: &FunctionalSpec, outer: u64, inner: usize, seed: u64) -> Result<MomentEstimate> {
    spec.validate()?;
    let volume = spec.window.volume();
    if volume > BIRTH_TIME_VOLUME_CAP {
        return Err(RcmError::WindowTooLarge {
            volume,
            cap: BIRTH_TIME_VOLUME_CAP,
        });
    }
    if inner < 4 {
        return Err(RcmError::BudgetTooSmall(format!(
            "split-sample debiasing needs at least 4 inner replicates, got {inner}"
        )));
    }
    if outer < 2 {
        return Err(RcmError::BudgetTooSmall("need at least two outer draws".into()));
    }
    let domain = spec.domain();
    let region = spec.window.padded(spec.padding());
    let mass = spec.beta * region.volume();
    let half = inner / 2;
    let acc = monte_carlo(outer, seed, |rng: &mut ChaCha8Rng| {
        let x = domain.sample_uniform(rng);
        let t: f64 = rng.random();
        let mut past = Vec::new();
        let mut marks = BirthMarks {
            births: Vec::new(),
            blocks: Vec::new(),
            x_id: fresh_id(&x),
            x_birth: t,
            x_block: rng.random(),
        };
        add_points(&region, mass * t, (0.0, t), rng, &mut past, &mut marks);
        let n_past = past.len();
        let mut sums = [0.0, 0.0];
        for r in 0..2 * half {
            let mut tagged = past.clone();
            marks.births.truncate(n_past);
            marks.blocks.truncate(n_past);
            add_points(&region, mass * (1.0 - t), (t, 1.0), rng, &mut tagged, &mut marks);
            let pts = PointSet::from_tagged(region.dim(), tagged)
                .expect("distinct uniform points")
                .with_region(region.clone());
            let g = RcmGraph::build_with(pts, spec.phi, &marks, DEFAULT_EPS_TRUNC).expect("valid graph");
            let ctx = DifferenceContext::with_marks(spec, &g, &marks).expect("matching graph");
            sums[r / half] += ctx.difference(&x).expect("fresh point");
        }
        (sums[0] / half as f64) * (sums[1] / half as f64)
    });
    Ok(acc.estimate(spec.reach()).scaled(spec.beta * domain.volume()))
}
