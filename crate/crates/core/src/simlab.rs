//! Simulation study: the two convolution models, their alternatives, and
//! empirical level and power tables.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{DistributionSpec, IndependentPair, JointSampler, ReferenceMeasureSpec, RngStream, StreamRng};
use crate::nullmodel::{compute_coefficients, default_method, NullCoefficients, NullSpec, DEFAULT_MAX_DEGREE};
use crate::teststat::{PreparedTest, TestConfig};

/// Two-sided 97.5% standard normal quantile.
pub const Z_975: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ScenarioName {
    Mod1,
    Mod2,
    Alt1,
    Alt2,
    Alt3,
    Alt4,
    Alt5,
    Alt6,
    Custom,
}

impl ScenarioName {
    /// The built-in grid in reporting order.
    pub const DEFAULT_GRID: [ScenarioName; 8] = [
        Self::Mod1,
        Self::Alt1,
        Self::Alt2,
        Self::Alt3,
        Self::Mod2,
        Self::Alt4,
        Self::Alt5,
        Self::Alt6,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Mod1 => "Mod1",
            Self::Mod2 => "Mod2",
            Self::Alt1 => "Alt1",
            Self::Alt2 => "Alt2",
            Self::Alt3 => "Alt3",
            Self::Alt4 => "Alt4",
            Self::Alt5 => "Alt5",
            Self::Alt6 => "Alt6",
            Self::Custom => "Custom",
        }
    }
}

impl fmt::Display for ScenarioName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let all = [
            Self::Mod1,
            Self::Mod2,
            Self::Alt1,
            Self::Alt2,
            Self::Alt3,
            Self::Alt4,
            Self::Alt5,
            Self::Alt6,
            Self::Custom,
        ];
        all.into_iter()
            .find(|n| n.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::UnknownScenario(s.to_string()))
    }
}

/// How a scenario generates observations of `X`.
#[derive(Debug, Clone)]
pub enum DataLaw {
    /// `X = Y + Z` from a joint sampler of `(Y, Z)`.
    Sum(Arc<dyn JointSampler>),
    /// `X` drawn directly.
    Direct(DistributionSpec),
}

impl DataLaw {
    pub fn convolution(y: DistributionSpec, z: DistributionSpec) -> Self {
        Self::Sum(Arc::new(IndependentPair { y, z }))
    }

    pub fn sample(&self, stream: RngStream, n: usize) -> Vec<f64> {
        match self {
            Self::Sum(sampler) => {
                let mut rng: StreamRng = stream.rng();
                (0..n)
                    .map(|_| {
                        let (y, z) = sampler.sample_pair(&mut rng);
                        y + z
                    })
                    .collect()
            }
            Self::Direct(dist) => dist.sample(stream, n),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Self::Sum(s) => s.label(),
            Self::Direct(d) => format!("{d:?}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioSpec {
    pub name: ScenarioName,
    pub data_law: DataLaw,
    pub null_under_test: NullSpec,
    pub truth_is_null: bool,
}

impl ScenarioSpec {
    pub fn custom(null_under_test: NullSpec, data_law: DataLaw, truth_is_null: bool) -> Self {
        Self {
            name: ScenarioName::Custom,
            data_law,
            null_under_test,
            truth_is_null,
        }
    }

    /// Draws of `X` for replication `stream_index`.
    pub fn sample(&self, master_seed: u64, stream_index: u64, n: usize) -> Vec<f64> {
        self.data_law.sample(RngStream::new(master_seed, stream_index), n)
    }
}

fn exp(mean: f64) -> DistributionSpec {
    DistributionSpec::Exponential { mean }
}

fn chi2(df: f64) -> DistributionSpec {
    DistributionSpec::ChiSquared { df }
}

fn poisson(mean: f64) -> DistributionSpec {
    DistributionSpec::Poisson { mean }
}

fn geometric(mean: f64) -> DistributionSpec {
    DistributionSpec::Geometric { mean }
}

/// Null of the continuous model: `Y ~ Exp(1)`, `Z ~ chi2(1)`, exponential reference.
pub fn mod1_null(max_degree: usize) -> Result<NullSpec> {
    NullSpec::new(exp(1.0), chi2(1.0), ReferenceMeasureSpec::Exponential1, max_degree)
}

/// Null of the discrete model: `Y ~ Poisson(1)`, `Z ~ Geometric(mean 1)`,
/// geometric reference with `p = 0.5`.
pub fn mod2_null(max_degree: usize) -> Result<NullSpec> {
    NullSpec::new(
        poisson(1.0),
        geometric(1.0),
        ReferenceMeasureSpec::Geometric { p: 0.5 },
        max_degree,
    )
}

/// Fully parameterized built-in scenario. Alternatives are tested against the
/// null of their parent model.
pub fn build_scenario(name: ScenarioName) -> Result<ScenarioSpec> {
    build_scenario_with_degree(name, DEFAULT_MAX_DEGREE)
}

pub fn build_scenario_with_degree(name: ScenarioName, max_degree: usize) -> Result<ScenarioSpec> {
    use ScenarioName::*;
    let (data_law, continuous) = match name {
        Mod1 => (DataLaw::convolution(exp(1.0), chi2(1.0)), true),
        Alt1 => (
            DataLaw::Direct(DistributionSpec::mixture(0.5, exp(2.0), chi2(2.0))),
            true,
        ),
        Alt2 => (DataLaw::convolution(exp(1.0), exp(1.0)), true),
        Alt3 => (DataLaw::convolution(chi2(1.0), chi2(1.0)), true),
        Mod2 => (DataLaw::convolution(poisson(1.0), geometric(1.0)), false),
        Alt4 => (
            DataLaw::Direct(DistributionSpec::mixture(0.5, poisson(2.0), geometric(2.0))),
            false,
        ),
        Alt5 => (DataLaw::convolution(poisson(1.0), poisson(1.0)), false),
        Alt6 => (DataLaw::convolution(geometric(1.0), geometric(1.0)), false),
        Custom => {
            return Err(Error::UnknownScenario(
                "Custom has no built-in parameters; use ScenarioSpec::custom".into(),
            ))
        }
    };
    let null_under_test = if continuous {
        mod1_null(max_degree)?
    } else {
        mod2_null(max_degree)?
    };
    Ok(ScenarioSpec {
        name,
        data_law,
        null_under_test,
        truth_is_null: matches!(name, Mod1 | Mod2),
    })
}

// ---------------------------------------------------------------------------

/// Wilson score interval for `successes` out of `trials` at normal quantile `z`.
pub fn wilson_interval(successes: usize, trials: usize, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0).min(p), (center + half).min(1.0).max(p))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub scenario: String,
    pub n: usize,
    pub reps: usize,
    pub rejections: usize,
    /// Replications whose data fell outside the reference support.
    pub errors: usize,
    pub rejection_rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// `order_counts[k-1]` = number of replications with `S_n = k`.
    pub order_counts: Vec<usize>,
    pub used_k_max: usize,
    pub critical_value: f64,
    pub master_seed: u64,
    pub config: TestConfig,
    /// Wall-clock time; `None` when timing is not recorded.
    pub seconds: Option<f64>,
}

impl SimReport {
    /// Fraction of completed replications that selected order one.
    pub fn order_one_rate(&self) -> f64 {
        let done: usize = self.order_counts.iter().sum();
        if done == 0 {
            return f64::NAN;
        }
        self.order_counts[0] as f64 / done as f64
    }

    pub fn ci_half_width(&self) -> f64 {
        0.5 * (self.ci_high - self.ci_low)
    }
}

/// Replicate the test `reps` times on fresh samples of size `n`; replication
/// `r` draws from stream `r` of `master_seed`.
pub fn run_replications(
    scenario: &ScenarioSpec,
    n: usize,
    reps: usize,
    config: &TestConfig,
    master_seed: u64,
) -> Result<SimReport> {
    let null = &scenario.null_under_test;
    let coeffs = compute_coefficients(null, null.basis().max_degree(), default_method(null))?;
    run_replications_with_coefficients(scenario, n, reps, config, master_seed, &coeffs)
}

pub fn run_replications_with_coefficients(
    scenario: &ScenarioSpec,
    n: usize,
    reps: usize,
    config: &TestConfig,
    master_seed: u64,
    coeffs: &NullCoefficients,
) -> Result<SimReport> {
    if reps == 0 {
        return Err(Error::InvalidConfig("reps must be at least 1".into()));
    }
    let start = Instant::now();
    let prepared = PreparedTest::with_coefficients(&scenario.null_under_test, config, n, coeffs.clone())?;
    let outcomes: Vec<Result<Option<(bool, usize)>>> = (0..reps as u64)
        .into_par_iter()
        .map(|r| {
            let data = scenario.sample(master_seed, r, n);
            match prepared.apply(&data) {
                Ok(res) => Ok(Some((res.reject, res.s_n))),
                Err(Error::DataDomain { .. }) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect();
    let mut rejections = 0;
    let mut errors = 0;
    let mut order_counts = vec![0; prepared.k_max()];
    for o in outcomes {
        match o? {
            Some((reject, s)) => {
                rejections += reject as usize;
                order_counts[s - 1] += 1;
            }
            None => errors += 1,
        }
    }
    let (ci_low, ci_high) = wilson_interval(rejections, reps, Z_975);
    Ok(SimReport {
        scenario: scenario.name.to_string(),
        n,
        reps,
        rejections,
        errors,
        rejection_rate: rejections as f64 / reps as f64,
        ci_low,
        ci_high,
        order_counts,
        used_k_max: prepared.k_max(),
        critical_value: prepared.critical_value(),
        master_seed,
        config: *config,
        seconds: Some(start.elapsed().as_secs_f64()),
    })
}

/// Rejection rates over `scenarios x n_grid`, scenario-major. Coefficients are
/// computed once per scenario.
pub fn level_power_table(
    scenarios: &[ScenarioSpec],
    n_grid: &[usize],
    reps: usize,
    config: &TestConfig,
    master_seed: u64,
) -> Result<Vec<SimReport>> {
    let mut rows = Vec::with_capacity(scenarios.len() * n_grid.len());
    for scenario in scenarios {
        if n_grid.is_empty() {
            continue;
        }
        let null = &scenario.null_under_test;
        let coeffs = compute_coefficients(null, null.basis().max_degree(), default_method(null))?;
        for &n in n_grid {
            rows.push(run_replications_with_coefficients(
                scenario,
                n,
                reps,
                config,
                master_seed,
                &coeffs,
            )?);
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::teststat::Calibration;

    #[test]
    fn names_round_trip() {
        for name in ScenarioName::DEFAULT_GRID {
            assert_eq!(name.as_str().parse::<ScenarioName>().unwrap(), name);
        }
        assert_eq!("alt3".parse::<ScenarioName>().unwrap(), ScenarioName::Alt3);
        assert!("Alt7".parse::<ScenarioName>().is_err());
        assert!(build_scenario(ScenarioName::Custom).is_err());
    }

    #[test]
    fn models_are_null_alternatives_are_not() {
        for name in ScenarioName::DEFAULT_GRID {
            let s = build_scenario_with_degree(name, 6).unwrap();
            assert_eq!(s.truth_is_null, matches!(name, ScenarioName::Mod1 | ScenarioName::Mod2));
        }
    }

    fn sample_mean_var(s: &ScenarioSpec, n: usize) -> (f64, f64) {
        let x = s.sample(3, 0, n);
        let m = x.iter().sum::<f64>() / n as f64;
        let v = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1) as f64;
        (m, v)
    }

    #[test]
    fn scenario_moments() {
        let n = 200_000;
        // Alt1 mean 2 like Mod1; variance differs (Mod1: 1 + 2 = 3, Alt1: 0.5*8 + 0.5*8 - 4 = 4)
        let (m, v) = sample_mean_var(&build_scenario_with_degree(ScenarioName::Alt1, 4).unwrap(), n);
        assert!((m - 2.0).abs() < 0.03 && (v - 4.0).abs() < 0.1, "{m} {v}");
        let (m, v) = sample_mean_var(&build_scenario_with_degree(ScenarioName::Mod1, 4).unwrap(), n);
        assert!((m - 2.0).abs() < 0.03 && (v - 3.0).abs() < 0.1, "{m} {v}");
        // Alt5 is Poisson(2)
        let (m, v) = sample_mean_var(&build_scenario_with_degree(ScenarioName::Alt5, 4).unwrap(), n);
        assert!((m - 2.0).abs() < 0.02 && (v - 2.0).abs() < 0.05, "{m} {v}");
        let s = build_scenario_with_degree(ScenarioName::Alt5, 4).unwrap();
        let x = s.sample(3, 1, n);
        let zeros = x.iter().filter(|v| **v == 0.0).count() as f64 / n as f64;
        assert!((zeros - (-2f64).exp()).abs() < 0.004);
    }

    #[test]
    fn wilson_examples() {
        let (lo, hi) = wilson_interval(0, 10, Z_975);
        assert_eq!(lo, 0.0);
        assert!((hi - 0.2775).abs() < 1e-3);
        let (lo, hi) = wilson_interval(50, 100, Z_975);
        assert!((lo - 0.4038).abs() < 1e-3 && (hi - 0.5962).abs() < 1e-3);
    }

    #[test]
    fn single_replication_and_empty_grid() {
        let s = build_scenario_with_degree(ScenarioName::Mod1, 8).unwrap();
        let c = TestConfig::asymptotic();
        let r = run_replications(&s, 30, 1, &c, 5).unwrap();
        assert!(r.rejection_rate == 0.0 || r.rejection_rate == 1.0);
        assert!(r.ci_low <= r.rejection_rate && r.rejection_rate <= r.ci_high);
        assert!(level_power_table(&[s.clone()], &[], 10, &c, 1).unwrap().is_empty());
        assert!(level_power_table(&[], &[50], 10, &c, 1).unwrap().is_empty());
        assert!(run_replications(&s, 30, 0, &c, 5).is_err());
    }

    #[test]
    fn reports_are_reproducible() {
        let s = build_scenario_with_degree(ScenarioName::Alt2, 10).unwrap();
        let c = TestConfig {
            calibration: Calibration::MonteCarlo { reps: 200, seed: 4 },
            ..TestConfig::default()
        };
        let mut a = run_replications(&s, 50, 100, &c, 17).unwrap();
        let mut b = run_replications(&s, 50, 100, &c, 17).unwrap();
        a.seconds = None;
        b.seconds = None;
        assert_eq!(a, b);
    }

    #[test]
    fn out_of_support_data_counts_as_error() {
        let null = mod2_null(6).unwrap();
        // continuous data under a discrete null: almost surely non-integer
        let s = ScenarioSpec::custom(null, DataLaw::Direct(exp(1.0)), false);
        let r = run_replications(&s, 20, 10, &TestConfig::asymptotic(), 1).unwrap();
        assert_eq!(r.errors, 10);
        assert_eq!(r.rejections, 0);
        assert_eq!(r.rejection_rate, 0.0);
    }
}
