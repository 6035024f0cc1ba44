use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{RcmError, Result};
use crate::model::window::unit_ball_volume;
use crate::quad;

/// Default tail level for truncating unbounded connection functions.
pub const DEFAULT_EPS_TRUNC: f64 = 1e-6;

/// Translation-invariant, isotropic connection function on R^d.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConnectionFunction {
    /// `1{|x| <= r}`
    Gilbert { r: f64 },
    /// `p * 1{|x| <= r}`
    ScaledIndicator { p: f64, r: f64 },
    /// `exp(-|x| / theta)`
    Exponential { theta: f64 },
    /// `exp(-|x|^2 / s^2)`
    Gaussian { s: f64 },
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(RcmError::InvalidParameter(format!("{name} must be positive and finite, got {v}")))
    }
}

impl ConnectionFunction {
    pub fn gilbert(r: f64) -> Result<Self> {
        let phi = ConnectionFunction::Gilbert { r };
        phi.validate()?;
        Ok(phi)
    }

    pub fn scaled_indicator(p: f64, r: f64) -> Result<Self> {
        let phi = ConnectionFunction::ScaledIndicator { p, r };
        phi.validate()?;
        Ok(phi)
    }

    pub fn exponential(theta: f64) -> Result<Self> {
        let phi = ConnectionFunction::Exponential { theta };
        phi.validate()?;
        Ok(phi)
    }

    pub fn gaussian(s: f64) -> Result<Self> {
        let phi = ConnectionFunction::Gaussian { s };
        phi.validate()?;
        Ok(phi)
    }

    /// Rejects parameters for which `m_phi` is not in `(0, inf)`.
    pub fn validate(&self) -> Result<()> {
        match *self {
            ConnectionFunction::Gilbert { r } => positive("r", r),
            ConnectionFunction::ScaledIndicator { p, r } => {
                positive("r", r)?;
                if p == 0.0 {
                    return Err(RcmError::DegenerateConnection(0.0));
                }
                if !(p > 0.0 && p <= 1.0) {
                    return Err(RcmError::InvalidParameter(format!("p must lie in (0, 1], got {p}")));
                }
                Ok(())
            }
            ConnectionFunction::Exponential { theta } => positive("theta", theta),
            ConnectionFunction::Gaussian { s } => positive("s", s),
        }
    }

    /// phi as a function of the distance |x|.
    #[inline]
    pub fn eval_radial(&self, t: f64) -> f64 {
        match *self {
            ConnectionFunction::Gilbert { r } => {
                if t <= r {
                    1.0
                } else {
                    0.0
                }
            }
            ConnectionFunction::ScaledIndicator { p, r } => {
                if t <= r {
                    p
                } else {
                    0.0
                }
            }
            ConnectionFunction::Exponential { theta } => (-t / theta).exp(),
            ConnectionFunction::Gaussian { s } => (-(t * t) / (s * s)).exp(),
        }
    }

    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.eval_radial(norm(x))
    }

    /// phi evaluated at `a - b`.
    #[inline]
    pub fn eval_between(&self, a: &[f64], b: &[f64]) -> f64 {
        self.eval_radial(distance(a, b))
    }

    /// Monotone radial dominator with `phi(x) <= dominator(|x|)`.
    pub fn dominator(&self, t: f64) -> f64 {
        match *self {
            ConnectionFunction::Gilbert { r } | ConnectionFunction::ScaledIndicator { r, .. } => {
                if t <= r {
                    1.0
                } else {
                    0.0
                }
            }
            _ => self.eval_radial(t),
        }
    }

    pub fn support_radius(&self) -> Option<f64> {
        match *self {
            ConnectionFunction::Gilbert { r } | ConnectionFunction::ScaledIndicator { r, .. } => Some(r),
            _ => None,
        }
    }

    pub fn has_compact_support(&self) -> bool {
        self.support_radius().is_some()
    }

    /// Is phi an indicator-type function (a constant times a ball indicator)?
    pub fn indicator_parts(&self) -> Option<(f64, f64)> {
        match *self {
            ConnectionFunction::Gilbert { r } => Some((1.0, r)),
            ConnectionFunction::ScaledIndicator { p, r } => Some((p, r)),
            _ => None,
        }
    }

    /// Smallest radius beyond which the dominator is at most `eps`; the
    /// support radius for compactly supported kinds.
    pub fn interaction_range(&self, eps: f64) -> f64 {
        match *self {
            ConnectionFunction::Gilbert { r } | ConnectionFunction::ScaledIndicator { r, .. } => r,
            ConnectionFunction::Exponential { theta } => theta * (1.0 / eps).ln(),
            ConnectionFunction::Gaussian { s } => s * (1.0 / eps).ln().sqrt(),
        }
    }

    /// m_phi = integral of phi over R^d. Closed form for indicator kinds,
    /// radial quadrature otherwise.
    pub fn m_phi(&self, dim: usize) -> f64 {
        if let Some((p, r)) = self.indicator_parts() {
            return p * unit_ball_volume(dim) * r.powi(dim as i32);
        }
        let surface = dim as f64 * unit_ball_volume(dim);
        let scale = match *self {
            ConnectionFunction::Exponential { theta } => theta,
            ConnectionFunction::Gaussian { s } => s,
            _ => unreachable!(),
        };
        let d = dim as i32;
        // integrate in units of the length scale
        let radial = quad::integrate_to_infinity(
            |u| u.powi(d - 1) * self.eval_radial(u * scale),
            0.0,
            1e-15,
            1e-12,
        );
        surface * radial * scale.powi(d)
    }

    /// Integral of `dominator(|x|)^(1/3)` over R^d (finite for all kinds).
    pub fn dominator_cube_root_integral(&self, dim: usize) -> f64 {
        let kd = unit_ball_volume(dim);
        let d = dim as i32;
        match *self {
            ConnectionFunction::Gilbert { r } | ConnectionFunction::ScaledIndicator { r, .. } => {
                kd * r.powi(d)
            }
            ConnectionFunction::Exponential { theta } => {
                let factorial: f64 = (1..=dim).map(|i| i as f64).product();
                kd * factorial * (3.0 * theta).powi(d)
            }
            ConnectionFunction::Gaussian { s } => {
                std::f64::consts::PI.powf(dim as f64 / 2.0) * (3.0f64.sqrt() * s).powi(d)
            }
        }
    }

    /// Does `psi <= self` hold pointwise? Kind-specific analytic check
    /// confirmed on a radial probe grid.
    pub fn dominates(&self, psi: &ConnectionFunction) -> bool {
        use ConnectionFunction::*;
        let analytic = match (*self, *psi) {
            (Gilbert { r: rf }, Gilbert { r: rp }) => rp <= rf,
            (Gilbert { r: rf }, ScaledIndicator { r: rp, .. }) => rp <= rf,
            (ScaledIndicator { p: pf, r: rf }, ScaledIndicator { p: pp, r: rp }) => {
                rp <= rf && pp <= pf
            }
            (ScaledIndicator { p: pf, r: rf }, Gilbert { r: rp }) => rp <= rf && pf >= 1.0,
            (Exponential { theta: tf }, Exponential { theta: tp }) => tp <= tf,
            (Gaussian { s: sf }, Gaussian { s: sp }) => sp <= sf,
            (Exponential { .. }, ScaledIndicator { p, r }) | (Gaussian { .. }, ScaledIndicator { p, r }) => {
                p <= self.eval_radial(r)
            }
            (Exponential { .. }, Gilbert { r }) | (Gaussian { .. }, Gilbert { r }) => {
                self.eval_radial(r) >= 1.0
            }
            _ => false,
        };
        if !analytic {
            return false;
        }
        let reach = self.interaction_range(DEFAULT_EPS_TRUNC).max(psi.interaction_range(DEFAULT_EPS_TRUNC));
        (0..=4000).all(|i| {
            let t = reach * 1.5 * i as f64 / 4000.0;
            psi.eval_radial(t) <= self.eval_radial(t) + 1e-15
        })
    }

    /// Validates `psi <= self`, both nondegenerate.
    pub fn check_domination(&self, psi: &ConnectionFunction) -> Result<()> {
        self.validate()?;
        psi.validate()?;
        if self.dominates(psi) {
            Ok(())
        } else {
            Err(RcmError::DominationFailed {
                phi: self.to_string(),
                psi: psi.to_string(),
            })
        }
    }
}

impl fmt::Display for ConnectionFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ConnectionFunction::Gilbert { r } => write!(f, "gilbert(r={r})"),
            ConnectionFunction::ScaledIndicator { p, r } => write!(f, "scaled_indicator(p={p}, r={r})"),
            ConnectionFunction::Exponential { theta } => write!(f, "exponential(theta={theta})"),
            ConnectionFunction::Gaussian { s } => write!(f, "gaussian(s={s})"),
        }
    }
}

#[inline]
pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[inline]
pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}
