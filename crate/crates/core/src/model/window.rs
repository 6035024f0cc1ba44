use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{RcmError, Result};

/// Volume of the d-dimensional unit ball.
pub fn unit_ball_volume(dim: usize) -> f64 {
    let half = dim as f64 / 2.0;
    std::f64::consts::PI.powf(half) / gamma(half + 1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Box,
    Ball,
}

/// A convex observation window: an axis-aligned cube (`extent` is the
/// half-side) or a Euclidean ball (`extent` is the radius).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Window {
    shape: Shape,
    center: Vec<f64>,
    extent: f64,
}

impl Window {
    pub fn new(shape: Shape, center: Vec<f64>, extent: f64) -> Result<Self> {
        if center.is_empty() {
            return Err(RcmError::InvalidParameter("window dimension must be >= 1".into()));
        }
        if !(extent >= 0.0) || !extent.is_finite() {
            return Err(RcmError::InvalidParameter(format!(
                "window extent must be finite and nonnegative, got {extent}"
            )));
        }
        if center.iter().any(|c| !c.is_finite()) {
            return Err(RcmError::InvalidParameter("window center must be finite".into()));
        }
        Ok(Window {
            shape,
            center,
            extent,
        })
    }

    /// Cube `[-extent, extent]^dim`.
    pub fn centered_box(dim: usize, extent: f64) -> Result<Self> {
        Window::new(Shape::Box, vec![0.0; dim], extent)
    }

    pub fn centered_ball(dim: usize, extent: f64) -> Result<Self> {
        Window::new(Shape::Ball, vec![0.0; dim], extent)
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn extent(&self) -> f64 {
        self.extent
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// Inradius r(W); equal to the extent for both shapes.
    pub fn inradius(&self) -> f64 {
        self.extent
    }

    pub fn volume(&self) -> f64 {
        let d = self.dim() as i32;
        match self.shape {
            Shape::Box => (2.0 * self.extent).powi(d),
            Shape::Ball => unit_ball_volume(self.dim()) * self.extent.powi(d),
        }
    }

    /// Window grown by `padding` (Minkowski sum with a ball for balls, a
    /// cube of the same half-side growth for boxes).
    pub fn padded(&self, padding: f64) -> Window {
        Window {
            shape: self.shape,
            center: self.center.clone(),
            extent: self.extent + padding.max(0.0),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self.shape {
            Shape::Box => x
                .iter()
                .zip(&self.center)
                .all(|(xi, ci)| (xi - ci).abs() <= self.extent),
            Shape::Ball => self.radial_distance(x) <= self.extent,
        }
    }

    fn radial_distance(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(&self.center)
            .map(|(xi, ci)| (xi - ci) * (xi - ci))
            .sum::<f64>()
            .sqrt()
    }

    /// Euclidean distance d(x, W); zero inside the window.
    pub fn distance(&self, x: &[f64]) -> f64 {
        match self.shape {
            Shape::Box => x
                .iter()
                .zip(&self.center)
                .map(|(xi, ci)| {
                    let excess = ((xi - ci).abs() - self.extent).max(0.0);
                    excess * excess
                })
                .sum::<f64>()
                .sqrt(),
            Shape::Ball => (self.radial_distance(x) - self.extent).max(0.0),
        }
    }

    /// Signed distance from `x` to the boundary, positive inside.
    pub fn depth(&self, x: &[f64]) -> f64 {
        match self.shape {
            Shape::Box => {
                let inside = x
                    .iter()
                    .zip(&self.center)
                    .map(|(xi, ci)| self.extent - (xi - ci).abs())
                    .fold(f64::INFINITY, f64::min);
                if inside >= 0.0 {
                    inside
                } else {
                    -self.distance(x)
                }
            }
            Shape::Ball => self.extent - self.radial_distance(x),
        }
    }

    /// Uniform point in the window.
    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let d = self.dim();
        match self.shape {
            Shape::Box => self
                .center
                .iter()
                .map(|c| c + self.extent * (2.0 * rng.random::<f64>() - 1.0))
                .collect(),
            Shape::Ball => loop {
                let u: Vec<f64> = (0..d).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect();
                if u.iter().map(|v| v * v).sum::<f64>() <= 1.0 {
                    break u
                        .iter()
                        .zip(&self.center)
                        .map(|(ui, ci)| ci + self.extent * ui)
                        .collect();
                }
            },
        }
    }

    /// Lower and upper corners of the bounding cube.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        let lo = self.center.iter().map(|c| c - self.extent).collect();
        let hi = self.center.iter().map(|c| c + self.extent).collect();
        (lo, hi)
    }

    /// Intrinsic volumes V_0..V_d.
    pub fn intrinsic_volumes(&self) -> Vec<f64> {
        let d = self.dim();
        (0..=d)
            .map(|j| {
                let binom = binomial(d, j);
                match self.shape {
                    Shape::Box => binom * (2.0 * self.extent).powi(j as i32),
                    Shape::Ball => {
                        binom * unit_ball_volume(d) / unit_ball_volume(d - j)
                            * self.extent.powi(j as i32)
                    }
                }
            })
            .collect()
    }
}

pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}
