//! Scenario documents: one JSON object per experiment.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::functional::Statistic;
use crate::error::{RcmError, Result};
use crate::model::connection::{ConnectionFunction, DEFAULT_EPS_TRUNC};
use crate::model::window::{Shape, Window};
use crate::moments::integrals::MAX_DIM;
use crate::moments::probability::JOINT_CAP;

/// How ladder values are read.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LadderUnits {
    /// Multiples of the interaction range of `phi`.
    #[default]
    Range,
    /// Window inradius in absolute length units.
    Absolute,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StandardizationChoice {
    /// Closed-form or quadrature mean and variance where they exist, pilot
    /// runs otherwise.
    #[default]
    Analytic,
    Pilot,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Budgets {
    /// Proposal samples per moment integral.
    pub mc_samples: u64,
    /// Outer draws for the Poincare, birth-time and gamma estimators.
    pub outer: u64,
    /// Inner replicates per outer draw.
    pub inner: usize,
    /// Probe points per sample in the Poincare estimator.
    pub probe_points: usize,
    /// Replicates of a pilot standardization run.
    pub pilot_replicates: usize,
    /// Largest `m` of the total-component partial sums.
    pub partial_sum_cap: usize,
    /// Also estimate gamma_1..gamma_6 and the fourth-moment bound in `bounds`.
    pub gamma: bool,
}

impl Default for Budgets {
    fn default() -> Self {
        Budgets {
            mc_samples: 1_000_000,
            outer: 2000,
            inner: 8,
            probe_points: 4,
            pilot_replicates: 1000,
            partial_sum_cap: 3,
            gamma: false,
        }
    }
}

fn default_name() -> String {
    "scenario".into()
}

fn default_shape() -> Shape {
    Shape::Box
}

fn default_ladder() -> Vec<f64> {
    vec![5.0, 10.0, 20.0, 40.0]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default = "default_name")]
    pub name: String,
    pub dim: usize,
    pub beta: f64,
    pub phi: ConnectionFunction,
    /// Dominated connection function for coupled samples.
    #[serde(default)]
    pub psi: Option<ConnectionFunction>,
    #[serde(default = "default_shape")]
    pub shape: Shape,
    /// Window inradii `r(W)`, strictly increasing.
    #[serde(default = "default_ladder")]
    pub ladder: Vec<f64>,
    #[serde(default)]
    pub ladder_units: LadderUnits,
    #[serde(default)]
    pub statistics: Vec<Statistic>,
    pub replicates: usize,
    #[serde(default)]
    pub seed_base: u64,
    #[serde(default)]
    pub budgets: Budgets,
    #[serde(default)]
    pub standardization: StandardizationChoice,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

fn check_phi(path: &str, phi: &ConnectionFunction, dim: usize) -> Result<()> {
    match phi.validate() {
        Ok(()) => {}
        Err(RcmError::DegenerateConnection(m)) => return Err(RcmError::DegenerateConnection(m)),
        Err(e) => {
            let m = phi.m_phi(dim);
            // zero or infinite scale parameters give a degenerate m_phi
            if m == 0.0 || m.is_infinite() {
                return Err(RcmError::DegenerateConnection(m));
            }
            return Err(RcmError::config(path, e.to_string()));
        }
    }
    let m = phi.m_phi(dim);
    if !(m > 0.0 && m.is_finite()) {
        return Err(RcmError::DegenerateConnection(m));
    }
    Ok(())
}

impl Scenario {
    /// Parses a scenario; errors name the offending field.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let scenario: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            RcmError::config(path, e.into_inner().to_string())
        })?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| RcmError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.dim > MAX_DIM {
            return Err(RcmError::config("dim", format!("must be in 1..={MAX_DIM}, got {}", self.dim)));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(RcmError::config("beta", format!("must be positive and finite, got {}", self.beta)));
        }
        check_phi("phi", &self.phi, self.dim)?;
        if let Some(psi) = &self.psi {
            check_phi("psi", psi, self.dim)?;
            if !self.phi.dominates(psi) {
                return Err(RcmError::config("psi", format!("{psi} is not dominated by {}", self.phi)));
            }
        }
        if self.ladder.is_empty() {
            return Err(RcmError::config("ladder", "needs at least one rung"));
        }
        for (i, w) in self.ladder.iter().enumerate() {
            if !(*w > 0.0 && w.is_finite()) {
                return Err(RcmError::config(format!("ladder[{i}]"), format!("must be positive, got {w}")));
            }
            if i > 0 && *w <= self.ladder[i - 1] {
                return Err(RcmError::config(format!("ladder[{i}]"), "rungs must be strictly increasing"));
            }
        }
        if self.replicates < 2 {
            return Err(RcmError::config("replicates", format!("must be at least 2, got {}", self.replicates)));
        }
        for (i, s) in self.statistics.iter().enumerate() {
            s.validate().map_err(|e| RcmError::config(format!("statistics[{i}]"), e.to_string()))?;
        }
        let b = &self.budgets;
        if b.mc_samples < 2 {
            return Err(RcmError::config("budgets.mc_samples", "must be at least 2"));
        }
        if b.outer < 2 {
            return Err(RcmError::config("budgets.outer", "must be at least 2"));
        }
        if b.inner < 4 {
            return Err(RcmError::config("budgets.inner", "split-sample estimates need at least 4"));
        }
        if b.probe_points == 0 {
            return Err(RcmError::config("budgets.probe_points", "must be at least 1"));
        }
        if b.pilot_replicates < 2 {
            return Err(RcmError::config("budgets.pilot_replicates", "must be at least 2"));
        }
        if b.partial_sum_cap == 0 || b.partial_sum_cap > JOINT_CAP {
            return Err(RcmError::config(
                "budgets.partial_sum_cap",
                format!("must be in 1..={JOINT_CAP}, got {}", b.partial_sum_cap),
            ));
        }
        Ok(())
    }

    /// Length unit of the ladder.
    pub fn ladder_unit(&self) -> f64 {
        match self.ladder_units {
            LadderUnits::Range => self.phi.interaction_range(DEFAULT_EPS_TRUNC),
            LadderUnits::Absolute => 1.0,
        }
    }

    /// Windows of the ladder, centered at the origin.
    pub fn windows(&self) -> Result<Vec<Window>> {
        let unit = self.ladder_unit();
        self.ladder
            .iter()
            .map(|w| Window::new(self.shape, vec![0.0; self.dim], w * unit))
            .collect()
    }

    /// The scenario with `seed_base` replaced.
    pub fn with_seed(&self, seed: u64) -> Scenario {
        Scenario {
            seed_base: seed,
            ..self.clone()
        }
    }

    /// Hex digest identifying the scenario (including its seed) and the
    /// command run on it.
    pub fn hash(&self, command: &str) -> String {
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(self).expect("scenario serializes"));
        h.update([0u8]);
        h.update(command.as_bytes());
        hex::encode(&h.finalize()[..8])
    }
}
