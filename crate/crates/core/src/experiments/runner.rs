//! Replicate ladders and the per-command analyses run on them.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::birth_time::{birth_time_variance, BIRTH_TIME_VOLUME_CAP};
use crate::analysis::distance::{kolmogorov_distance, wasserstein_distance};
use crate::analysis::functional::{FunctionalSpec, Statistic};
use crate::analysis::gamma::{fourth_moment_bound, gamma_terms, NestedBudget, Standardization};
use crate::analysis::poincare::poincare_bound;
use crate::census::components::Components;
use crate::census::report::CountMode;
use crate::error::{RcmError, Result};
use crate::experiments::config::{Scenario, StandardizationChoice};
use crate::experiments::stats::{covariance, mean, min_eigenvalue, ols, variance, SlopeFit};
use crate::model::graph::{build_coupled, build_rcm, RcmGraph};
use crate::model::marks::{derive_seed, PairMarkSource};
use crate::model::points::sample_poisson;
use crate::model::window::Window;
use crate::moments::estimate::MomentEstimate;
use crate::moments::integrals::{
    asy_cov_events, asy_cov_matrix, asy_var_quadratic, expected_count_intensity, expected_event_intensity,
    sigma_total_partial, CovarianceMatrix, MomentOptions,
};
use crate::moments::probability::ClusterEvent;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Sample,
    Census,
    Expectation,
    Covariance,
    Clt,
    Bounds,
    Total,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Sample => "sample",
            Command::Census => "census",
            Command::Expectation => "expectation",
            Command::Covariance => "covariance",
            Command::Clt => "clt",
            Command::Bounds => "bounds",
            Command::Total => "total",
        }
    }
}

/// Identifies the run that produced a record.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub scenario_hash: String,
    pub seed_base: u64,
    pub version: String,
}

/// Asymptotic per-volume mean and variance of one statistic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: String,
    pub intensity: Option<MomentEstimate>,
    pub variance: Option<MomentEstimate>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Predictions {
    pub statistics: Vec<Prediction>,
    pub covariance: Option<CovarianceMatrix>,
    /// `S_m = sum_{i,j <= m} sigma^{(i,j)}` for `m = 1..=cap`.
    pub partial_sums: Vec<MomentEstimate>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatisticRecord {
    pub label: String,
    pub mean: f64,
    pub mean_se: f64,
    pub variance: f64,
    pub variance_se: f64,
    pub mean_per_volume: f64,
    pub variance_per_volume: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovarianceRecord {
    pub labels: Vec<String>,
    /// Empirical covariance divided by the window volume.
    pub empirical: Vec<Vec<f64>>,
    pub empirical_se: Vec<Vec<f64>>,
    /// `(empirical - analytic) / |analytic|`.
    pub relative_deviation: Vec<Vec<f64>>,
    /// `sqrt(se_empirical^2 + se_analytic^2)`.
    pub combined_se: Vec<Vec<f64>>,
    pub empirical_min_eigenvalue: f64,
    pub analytic_min_eigenvalue: f64,
    pub analytic_min_eigenvalue_se: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceRecord {
    pub label: String,
    pub standardization: Standardization,
    pub kolmogorov: f64,
    pub wasserstein: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundRecord {
    pub label: String,
    pub term: String,
    pub value: f64,
    pub std_error: f64,
    pub budget: u64,
    pub truncation_radius: f64,
    pub scenario_id: String,
    /// The empirical quantity the bound is compared with.
    pub empirical: Option<f64>,
    pub empirical_se: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TotalRecord {
    pub variance_per_volume: f64,
    pub variance_per_volume_se: f64,
    /// Relative change against the previous rung.
    pub relative_change: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RungRecord {
    #[serde(flatten)]
    pub provenance: Provenance,
    pub index: usize,
    pub inradius: f64,
    pub volume: f64,
    pub replicates: usize,
    pub statistics: Vec<StatisticRecord>,
    pub covariance: Option<CovarianceRecord>,
    pub distances: Vec<DistanceRecord>,
    pub bounds: Vec<BoundRecord>,
    pub total: Option<TotalRecord>,
}

impl RungRecord {
    pub fn dir_name(&self) -> String {
        format!("r{}", self.index)
    }
}

/// OLS fit of `log d_K` against `log vol(W)` over the ladder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateRecord {
    #[serde(flatten)]
    pub provenance: Provenance,
    pub label: String,
    pub fit: Option<SlopeFit>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    #[serde(flatten)]
    pub provenance: Provenance,
    pub command: Command,
    pub scenario: Scenario,
    pub predictions: Predictions,
    pub rungs: Vec<RungRecord>,
    pub rates: Vec<RateRecord>,
}

/// Values of the configured statistics on one replicate.
#[derive(Clone, Debug, PartialEq)]
pub struct ReplicateRow {
    pub replicate: usize,
    pub seed: u64,
    pub points_in_window: usize,
    pub values: Vec<f64>,
}

/// A drawn sample, kept by the `sample` command.
#[derive(Clone, Debug)]
pub struct SampleTable {
    pub graph: RcmGraph,
    pub window: Window,
    /// Edges of the coupled `psi` graph, as point indices.
    pub psi_edges: Option<Vec<(usize, usize)>>,
}

/// Per-replicate data behind one rung.
#[derive(Clone, Debug)]
pub struct RungTables {
    pub rows: Vec<ReplicateRow>,
    pub sample: Option<SampleTable>,
}

/// Summary records plus the raw tables they were computed from.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub result: ExperimentResult,
    pub tables: Vec<RungTables>,
}

fn replicate_seed(seed_base: u64, rung: usize, i: usize) -> u64 {
    derive_seed(derive_seed(seed_base, 1 + rung as u64), i as u64)
}

struct Rung<'a> {
    scenario: &'a Scenario,
    window: Window,
    specs: Vec<FunctionalSpec>,
    padding: f64,
}

impl<'a> Rung<'a> {
    fn new(scenario: &'a Scenario, window: Window) -> Result<Self> {
        let specs = scenario
            .statistics
            .iter()
            .map(|s| FunctionalSpec::new(s.clone(), window.clone(), scenario.phi, scenario.beta))
            .collect::<Result<Vec<_>>>()?;
        let base = FunctionalSpec::new(Statistic::PointCount, window.clone(), scenario.phi, scenario.beta)?;
        let padding = specs.iter().map(|s| s.padding()).fold(base.padding() + base.range(), f64::max);
        Ok(Rung {
            scenario,
            window,
            specs,
            padding,
        })
    }

    fn graph(&self, seed: u64) -> Result<RcmGraph> {
        let pts = sample_poisson(&self.window, self.padding, self.scenario.beta, derive_seed(seed, 0))?;
        build_rcm(pts, self.scenario.phi, PairMarkSource::new(derive_seed(seed, 1)))
    }

    fn row(&self, replicate: usize, seed: u64) -> Result<ReplicateRow> {
        let g = self.graph(seed)?;
        let comps = Components::of(&g);
        let values = self
            .specs
            .iter()
            .map(|s| {
                if s.statistic == Statistic::PointCount {
                    g.points().count_in(&self.window) as f64
                } else {
                    s.contributions(&g, &comps).iter().sum()
                }
            })
            .collect();
        Ok(ReplicateRow {
            replicate,
            seed,
            points_in_window: g.points().count_in(&self.window),
            values,
        })
    }

    fn rows(&self, n: usize, rung: usize) -> Result<Vec<ReplicateRow>> {
        let seed_base = self.scenario.seed_base;
        (0..n)
            .into_par_iter()
            .map(|i| self.row(i, replicate_seed(seed_base, rung, i)))
            .collect()
    }
}

fn column(rows: &[ReplicateRow], j: usize) -> Vec<f64> {
    rows.iter().map(|r| r.values[j]).collect()
}

fn options(scenario: &Scenario, salt: u64) -> MomentOptions {
    MomentOptions::new(scenario.dim)
        .with_samples(scenario.budgets.mc_samples)
        .with_seed(derive_seed(scenario.seed_base, salt))
}

fn event_of(statistic: &Statistic) -> Option<ClusterEvent> {
    match statistic {
        Statistic::CountClass { class, .. } => Some(ClusterEvent::Class(*class)),
        Statistic::CountOrder { k, .. } => Some(ClusterEvent::Connected(*k)),
        _ => None,
    }
}

/// Order caps of the moment integrals surface as "no prediction".
fn optional(r: Result<MomentEstimate>) -> Result<Option<MomentEstimate>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(RcmError::OrderTooLarge { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

fn predict_intensity(scenario: &Scenario, statistic: &Statistic, salt: u64) -> Result<Option<MomentEstimate>> {
    let (phi, beta) = (&scenario.phi, scenario.beta);
    let opts = options(scenario, salt);
    match statistic {
        Statistic::PointCount => Ok(Some(MomentEstimate::closed_form(beta))),
        Statistic::CountClass { class, .. } => optional(expected_count_intensity(class, phi, beta, &opts)),
        Statistic::CountOrder { k, .. } => {
            optional(expected_event_intensity(&ClusterEvent::Connected(*k), phi, beta, &opts))
        }
        Statistic::Weighted { a, classes, .. } => {
            let mut total = MomentEstimate::closed_form(0.0);
            for (i, (w, g)) in a.iter().zip(classes).enumerate() {
                let o = opts.with_seed(derive_seed(opts.seed, i as u64));
                match optional(expected_count_intensity(g, phi, beta, &o))? {
                    Some(rho) => total = total.plus(&rho.scaled(*w)),
                    None => return Ok(None),
                }
            }
            Ok(Some(total))
        }
        Statistic::TotalComponents => Ok(None),
    }
}

fn predict_variance(scenario: &Scenario, statistic: &Statistic, salt: u64) -> Result<Option<MomentEstimate>> {
    let (phi, beta) = (&scenario.phi, scenario.beta);
    let opts = options(scenario, salt);
    match statistic {
        Statistic::PointCount => Ok(Some(MomentEstimate::closed_form(beta))),
        Statistic::Weighted { a, classes, .. } => optional(asy_var_quadratic(a, classes, phi, beta, &opts)),
        Statistic::TotalComponents => Ok(None),
        s => {
            let e = event_of(s).expect("class or order count");
            optional(asy_cov_events(&e, &e, phi, phi, beta, &opts))
        }
    }
}

/// Whether `rho * vol(W)` is the exact finite-window mean: lexmin counting
/// keeps every component whose lexmin point is in `W`.
fn mean_is_exact(statistic: &Statistic) -> bool {
    match statistic {
        Statistic::PointCount => true,
        Statistic::CountClass { mode, .. } | Statistic::CountOrder { mode, .. } | Statistic::Weighted { mode, .. } => {
            *mode == CountMode::Lexmin
        }
        Statistic::TotalComponents => false,
    }
}

fn statistic_record(label: String, v: &[f64], volume: f64) -> StatisticRecord {
    let n = v.len() as f64;
    let (var, var_se) = variance(v);
    let m = mean(v);
    StatisticRecord {
        label,
        mean: m,
        mean_se: (var / n).sqrt(),
        variance: var,
        variance_se: var_se,
        mean_per_volume: m / volume,
        variance_per_volume: var / volume,
    }
}

fn standardization(
    scenario: &Scenario,
    spec: &FunctionalSpec,
    prediction: Option<&Prediction>,
    seed: u64,
) -> Result<Standardization> {
    let volume = spec.window.volume();
    if scenario.standardization == StandardizationChoice::Analytic && mean_is_exact(&spec.statistic) {
        if let Some(Prediction {
            intensity: Some(rho),
            variance: Some(sigma),
            ..
        }) = prediction
        {
            return Standardization::analytic(rho.value * volume, sigma.value * volume);
        }
    }
    Standardization::pilot(spec, scenario.budgets.pilot_replicates, seed)
}

fn distance_record(spec: &FunctionalSpec, st: Standardization, v: &[f64]) -> Result<DistanceRecord> {
    let z: Vec<f64> = v.iter().map(|x| st.apply(*x)).collect();
    Ok(DistanceRecord {
        label: spec.statistic.label(),
        standardization: st,
        kolmogorov: kolmogorov_distance(&z)?,
        wasserstein: wasserstein_distance(&z)?,
    })
}

fn bound_record(
    label: &str,
    term: &str,
    est: &MomentEstimate,
    budget: u64,
    scenario_id: &str,
    empirical: Option<(f64, f64)>,
) -> BoundRecord {
    BoundRecord {
        label: label.to_string(),
        term: term.to_string(),
        value: est.value,
        std_error: est.std_error,
        budget,
        truncation_radius: est.truncation_radius,
        scenario_id: scenario_id.to_string(),
        empirical: empirical.map(|e| e.0),
        empirical_se: empirical.map(|e| e.1),
    }
}

/// Sample mean of `F^4` for standardized values, with its standard error.
fn fourth_moment(z: &[f64]) -> (f64, f64) {
    let f4: Vec<f64> = z.iter().map(|x| x.powi(4)).collect();
    let (v, _) = variance(&f4);
    (mean(&f4), (v / f4.len() as f64).sqrt())
}

fn predictions(scenario: &Scenario, command: Command) -> Result<Predictions> {
    let mut out = Predictions::default();
    let want_mean = matches!(command, Command::Expectation | Command::Covariance | Command::Clt);
    let want_var = matches!(command, Command::Clt) && scenario.standardization == StandardizationChoice::Analytic;
    if command == Command::Covariance {
        let events = scenario
            .statistics
            .iter()
            .enumerate()
            .map(|(i, s)| {
                event_of(s).ok_or_else(|| {
                    RcmError::config(format!("statistics[{i}]"), "covariance needs class or order counts")
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if events.is_empty() {
            return Err(RcmError::config("statistics", "covariance needs at least one statistic"));
        }
        if scenario.replicates < events.len() + 1 {
            return Err(RcmError::config(
                "replicates",
                format!("{} statistics need at least {} replicates", events.len(), events.len() + 1),
            ));
        }
        let mut cov = asy_cov_matrix(&events, &scenario.phi, scenario.beta, &options(scenario, 3))?;
        cov.labels = scenario.statistics.iter().map(|s| s.label()).collect();
        out.covariance = Some(cov);
    }
    if command == Command::Total {
        if !scenario.statistics.contains(&Statistic::TotalComponents) {
            return Err(RcmError::config("statistics", "total needs a total_components statistic"));
        }
        out.partial_sums =
            sigma_total_partial(scenario.budgets.partial_sum_cap, &scenario.phi, scenario.beta, &options(scenario, 4))?;
    }
    for (i, s) in scenario.statistics.iter().enumerate() {
        let salt = 1000 + 10 * i as u64;
        let intensity = if want_mean { predict_intensity(scenario, s, salt)? } else { None };
        let variance = match &out.covariance {
            Some(cov) => Some(MomentEstimate {
                value: cov.values[i][i],
                std_error: cov.std_errors[i][i],
                ..MomentEstimate::closed_form(0.0)
            }),
            None if want_var => predict_variance(scenario, s, salt + 1)?,
            None => None,
        };
        out.statistics.push(Prediction {
            label: s.label(),
            intensity,
            variance,
        });
    }
    Ok(out)
}

fn covariance_record(rows: &[ReplicateRow], volume: f64, analytic: &CovarianceMatrix) -> CovarianceRecord {
    let m = analytic.size();
    let cols: Vec<Vec<f64>> = (0..m).map(|j| column(rows, j)).collect();
    let mut empirical = vec![vec![0.0; m]; m];
    let mut empirical_se = vec![vec![0.0; m]; m];
    let mut relative_deviation = vec![vec![0.0; m]; m];
    let mut combined_se = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in 0..m {
            let (c, se) = covariance(&cols[i], &cols[j]);
            empirical[i][j] = c / volume;
            empirical_se[i][j] = se / volume;
            let a = analytic.values[i][j];
            relative_deviation[i][j] = (empirical[i][j] - a) / a.abs();
            combined_se[i][j] = empirical_se[i][j].hypot(analytic.std_errors[i][j]);
        }
    }
    let (lam, lam_se) = analytic.min_eigenvalue();
    CovarianceRecord {
        labels: analytic.labels.clone(),
        empirical_min_eigenvalue: min_eigenvalue(&empirical),
        empirical,
        empirical_se,
        relative_deviation,
        combined_se,
        analytic_min_eigenvalue: lam,
        analytic_min_eigenvalue_se: lam_se,
    }
}

fn bounds_for(
    scenario: &Scenario,
    spec: &FunctionalSpec,
    values: &[f64],
    prediction: Option<&Prediction>,
    hash: &str,
    seed: u64,
) -> Result<Vec<BoundRecord>> {
    let b = &scenario.budgets;
    let label = spec.statistic.label();
    let (var, var_se) = variance(values);
    let mut out = Vec::new();
    let p = poincare_bound(spec, b.outer, b.probe_points, derive_seed(seed, 0))?;
    out.push(bound_record(&label, "poincare", &p, b.outer, hash, Some((var, var_se))));
    if spec.window.volume() <= BIRTH_TIME_VOLUME_CAP {
        let bt = birth_time_variance(spec, b.outer, b.inner, derive_seed(seed, 1))?;
        out.push(bound_record(&label, "birth_time", &bt, b.outer, hash, Some((var, var_se))));
    }
    if b.gamma {
        let st = standardization(scenario, spec, prediction, derive_seed(seed, 2))?;
        let budget = NestedBudget {
            outer: b.outer,
            inner: b.inner,
        };
        let z: Vec<f64> = values.iter().map(|x| st.apply(*x)).collect();
        let g = gamma_terms(spec, &st, &budget, derive_seed(seed, 3))?;
        for (i, t) in g.terms.iter().enumerate() {
            out.push(bound_record(&label, &format!("gamma_{}", i + 1), t, b.outer, hash, None));
        }
        let dw = wasserstein_distance(&z)?;
        let dk = kolmogorov_distance(&z)?;
        out.push(bound_record(&label, "wasserstein_bound", &g.wasserstein_bound(), b.outer, hash, Some((dw, 0.0))));
        out.push(bound_record(&label, "kolmogorov_bound", &g.kolmogorov_bound(), b.outer, hash, Some((dk, 0.0))));
        let fm = fourth_moment_bound(spec, &st, &budget, derive_seed(seed, 4))?;
        out.push(bound_record(&label, "fourth_moment", &fm.bound, b.outer, hash, Some(fourth_moment(&z))));
    }
    Ok(out)
}

fn sample_table(scenario: &Scenario, rung: &Rung, seed: u64) -> Result<SampleTable> {
    let graph = rung.graph(seed)?;
    let psi_edges = match scenario.psi {
        Some(psi) => {
            let pts = sample_poisson(&rung.window, rung.padding, scenario.beta, derive_seed(seed, 0))?;
            let marks = PairMarkSource::new(derive_seed(seed, 1));
            let (_, g_psi) = build_coupled(pts, scenario.phi, psi, marks)?;
            Some(g_psi.edges().collect())
        }
        None => None,
    };
    Ok(SampleTable {
        graph,
        window: rung.window.clone(),
        psi_edges,
    })
}

/// Runs `command` on every rung of the scenario's ladder.
pub fn run_scenario(scenario: &Scenario, command: Command) -> Result<Experiment> {
    scenario.validate()?;
    let hash = scenario.hash(command.name());
    let provenance = Provenance {
        scenario_hash: hash.clone(),
        seed_base: scenario.seed_base,
        version: VERSION.to_string(),
    };
    let predictions = predictions(scenario, command)?;
    let mut rungs = Vec::new();
    let mut tables = Vec::new();
    let mut previous_total: Option<f64> = None;
    for (index, window) in scenario.windows()?.into_iter().enumerate() {
        let rung = Rung::new(scenario, window)?;
        let volume = rung.window.volume();
        let n = if command == Command::Sample { 1 } else { scenario.replicates };
        let rows = rung.rows(n, index)?;
        let statistics = if command == Command::Sample {
            Vec::new()
        } else {
            rung.specs
                .iter()
                .enumerate()
                .map(|(j, s)| statistic_record(s.statistic.label(), &column(&rows, j), volume))
                .collect()
        };
        let mut record = RungRecord {
            provenance: provenance.clone(),
            index,
            inradius: rung.window.inradius(),
            volume,
            replicates: n,
            statistics,
            covariance: None,
            distances: Vec::new(),
            bounds: Vec::new(),
            total: None,
        };
        let rung_seed = derive_seed(scenario.seed_base, 10_000 + index as u64);
        match command {
            Command::Covariance => {
                let cov = predictions.covariance.as_ref().expect("covariance predicted");
                record.covariance = Some(covariance_record(&rows, volume, cov));
            }
            Command::Clt | Command::Total => {
                for (j, spec) in rung.specs.iter().enumerate() {
                    if command == Command::Total && spec.statistic != Statistic::TotalComponents {
                        continue;
                    }
                    let st = standardization(
                        scenario,
                        spec,
                        predictions.statistics.get(j),
                        derive_seed(rung_seed, j as u64),
                    )?;
                    record.distances.push(distance_record(spec, st, &column(&rows, j))?);
                }
            }
            Command::Bounds => {
                for (j, spec) in rung.specs.iter().enumerate() {
                    let b = bounds_for(
                        scenario,
                        spec,
                        &column(&rows, j),
                        predictions.statistics.get(j),
                        &hash,
                        derive_seed(rung_seed, j as u64),
                    )?;
                    record.bounds.extend(b);
                }
            }
            _ => {}
        }
        if command == Command::Total {
            let j = scenario
                .statistics
                .iter()
                .position(|s| *s == Statistic::TotalComponents)
                .expect("checked in predictions");
            let (var, se) = variance(&column(&rows, j));
            let v = var / volume;
            record.total = Some(TotalRecord {
                variance_per_volume: v,
                variance_per_volume_se: se / volume,
                relative_change: previous_total.map(|p| (v - p).abs() / p),
            });
            previous_total = Some(v);
        }
        let sample = if command == Command::Sample {
            Some(sample_table(scenario, &rung, rows[0].seed)?)
        } else {
            None
        };
        rungs.push(record);
        tables.push(RungTables { rows, sample });
    }
    let rates = if command == Command::Clt {
        rate_records(scenario, &rungs, &provenance)
    } else {
        Vec::new()
    };
    Ok(Experiment {
        result: ExperimentResult {
            provenance,
            command,
            scenario: scenario.clone(),
            predictions,
            rungs,
            rates,
        },
        tables,
    })
}

fn rate_records(scenario: &Scenario, rungs: &[RungRecord], provenance: &Provenance) -> Vec<RateRecord> {
    scenario
        .statistics
        .iter()
        .enumerate()
        .map(|(j, s)| {
            let mut x = Vec::new();
            let mut y = Vec::new();
            for r in rungs {
                let dk = r.distances[j].kolmogorov;
                if dk > 0.0 {
                    x.push(r.volume.ln());
                    y.push(dk.ln());
                }
            }
            RateRecord {
                provenance: provenance.clone(),
                label: s.label(),
                fit: ols(&x, &y),
            }
        })
        .collect()
}
