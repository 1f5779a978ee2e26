//! Command-line front end and file formats.
//!
//! Configuration is a TOML document with optional `[null]`, `[test]` and
//! `[sim]` sections; unknown keys are rejected and the parsed document (with
//! defaults filled in) is echoed into every output.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Error;
use crate::measures::{DistributionSpec, ReferenceMeasureSpec};
use crate::nullmodel::{
    compute_coefficients, default_method, duplicated_noise_null, eigen_floor_diagnostics, CoefficientMethod,
    EigenDiagnostics, NullCoefficients, NullSpec, DEFAULT_MAX_DEGREE,
};
use crate::simlab::{self, DataLaw, ScenarioName, ScenarioSpec, SimReport};
use crate::teststat::{Calibration, KMaxPolicy, PreparedTest, TestConfig, TestResult};

pub const COEFFICIENT_FORMAT: &str = "deconv-gof/coefficients/v1";
pub const CSV_HEADER: [&str; 7] = ["scenario", "n", "reps", "reject_rate", "ci_low", "ci_high", "seconds"];

// ---------------------------------------------------------------------------
// errors and exit codes

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureKind {
    Usage,
    Data,
    Numerical,
    Io,
}

#[derive(Debug)]
pub struct CliError {
    pub kind: FailureKind,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            kind: FailureKind::Usage,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self {
            kind: FailureKind::Data,
            message: message.into(),
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self {
            kind: FailureKind::Io,
            message: message.into(),
        }
    }

    /// 2 usage, 3 data, 4 numerical, 1 other I/O.
    pub fn exit_code(&self) -> i32 {
        match self.kind {
            FailureKind::Usage => 2,
            FailureKind::Data => 3,
            FailureKind::Numerical => 4,
            FailureKind::Io => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let kind = match e {
            Error::EmptyData | Error::DataDomain { .. } => FailureKind::Data,
            Error::InvalidConfig(_)
            | Error::UnknownScenario(_)
            | Error::InvalidDistribution(_)
            | Error::InvalidNull(_)
            | Error::BasisMismatch(_)
            | Error::MethodUnavailable { .. }
            | Error::DegreeOverflow { .. }
            | Error::Domain(_)
            | Error::Dimension(_) => FailureKind::Usage,
            Error::QuadratureFailure { .. }
            | Error::BasisInconsistency { .. }
            | Error::NotPositiveSemidefinite { .. }
            | Error::NotSymmetric(_)
            | Error::RankZero { .. } => FailureKind::Numerical,
        };
        Self {
            kind,
            message: e.to_string(),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

// ---------------------------------------------------------------------------
// configuration document

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum DependenceKind {
    Independent,
    /// `Y = Z`, both with the `z` law.
    DuplicatedNoise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NullSection {
    pub y: DistributionSpec,
    pub z: DistributionSpec,
    pub dependence: DependenceKind,
    pub reference: ReferenceMeasureSpec,
    pub max_degree: usize,
    pub u_split: f64,
    /// Coefficient route; the default picks closed forms when available.
    pub method: Option<CoefficientMethod>,
}

impl Default for NullSection {
    fn default() -> Self {
        Self {
            y: DistributionSpec::Exponential { mean: 1.0 },
            z: DistributionSpec::ChiSquared { df: 1.0 },
            dependence: DependenceKind::Independent,
            reference: ReferenceMeasureSpec::Exponential1,
            max_degree: DEFAULT_MAX_DEGREE,
            u_split: 0.5,
            method: None,
        }
    }
}

impl NullSection {
    pub fn build(&self) -> CliResult<NullSpec> {
        let null = match self.dependence {
            DependenceKind::Independent => {
                NullSpec::new(self.y.clone(), self.z.clone(), self.reference, self.max_degree)?
            }
            DependenceKind::DuplicatedNoise => {
                if self.y != self.z {
                    return Err(CliError::usage("duplicated_noise dependence requires y and z to be the same law"));
                }
                duplicated_noise_null(self.z.clone(), self.reference, self.max_degree)?
            }
        };
        Ok(null.with_u_split(self.u_split)?)
    }

    pub fn method_for(&self, null: &NullSpec) -> CoefficientMethod {
        self.method.unwrap_or_else(|| default_method(null))
    }

    /// SHA-256 of the canonical JSON form; keys caches of coefficients.
    pub fn content_hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("null section serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum CalibrationKind {
    Asymptotic,
    Mc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AutoTag {
    Auto,
}

/// `"auto"` or a fixed order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KMaxSetting {
    Fixed(usize),
    Auto(AutoTag),
}

impl std::str::FromStr for KMaxSetting {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Self::Auto(AutoTag::Auto));
        }
        s.parse::<usize>()
            .map(Self::Fixed)
            .map_err(|_| format!("expected 'auto' or a positive integer, got '{s}'"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TestSection {
    pub alpha: f64,
    pub kmax: KMaxSetting,
    pub calibration: CalibrationKind,
    /// Monte Carlo calibration replications.
    pub reps: usize,
    /// Calibration seed.
    pub seed: u64,
    pub eigen_condition_cap: f64,
}

impl Default for TestSection {
    fn default() -> Self {
        let d = TestConfig::default();
        let (reps, seed) = match d.calibration {
            Calibration::MonteCarlo { reps, seed } => (reps, seed),
            Calibration::AsymptoticChi2_1 => (2000, 0),
        };
        Self {
            alpha: d.alpha,
            kmax: KMaxSetting::Auto(AutoTag::Auto),
            calibration: CalibrationKind::Mc,
            reps,
            seed,
            eigen_condition_cap: d.eigen_condition_cap,
        }
    }
}

impl TestSection {
    pub fn to_config(&self, u_split: f64) -> CliResult<TestConfig> {
        let config = TestConfig {
            alpha: self.alpha,
            kmax_policy: match self.kmax {
                KMaxSetting::Auto(_) => KMaxPolicy::Auto,
                KMaxSetting::Fixed(k) => KMaxPolicy::Fixed(k),
            },
            calibration: match self.calibration {
                CalibrationKind::Asymptotic => Calibration::AsymptoticChi2_1,
                CalibrationKind::Mc => Calibration::MonteCarlo {
                    reps: self.reps,
                    seed: self.seed,
                },
            },
            eigen_condition_cap: self.eigen_condition_cap,
            u_split,
        };
        config.validate()?;
        Ok(config)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSection {
    /// Scenario names; `Custom` tests the `[null]` section against `custom_data`
    /// (or against its own law when `custom_data` is absent).
    pub scenarios: Vec<String>,
    pub n: Vec<usize>,
    /// Replications per cell.
    pub reps: usize,
    pub seed: u64,
    pub max_degree: usize,
    pub custom_data: Option<DistributionSpec>,
}

impl Default for SimSection {
    fn default() -> Self {
        Self {
            scenarios: ScenarioName::DEFAULT_GRID.iter().map(|s| s.to_string()).collect(),
            n: vec![50, 100, 500],
            reps: 2000,
            seed: 1,
            max_degree: DEFAULT_MAX_DEGREE,
            custom_data: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub null: NullSection,
    pub test: TestSection,
    pub sim: SimSection,
}

impl RunConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::usage(format!("invalid configuration: {e}")))
    }

    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = fs::read_to_string(p)
                    .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", p.display())))?;
                Self::parse(&text)
            }
        }
    }

    pub fn test_config(&self) -> CliResult<TestConfig> {
        self.test.to_config(self.null.u_split)
    }
}

// ---------------------------------------------------------------------------
// data files

/// One observation per line; blank lines and `#` comments are ignored.
pub fn parse_data(text: &str) -> CliResult<Vec<f64>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let v: f64 = content
            .parse()
            .map_err(|_| CliError::data(format!("line {}: cannot parse '{content}' as a number", i + 1)))?;
        if !v.is_finite() {
            return Err(CliError::data(format!("line {}: value '{content}' is not finite", i + 1)));
        }
        out.push(v);
    }
    Ok(out)
}

pub fn read_data(path: &Path) -> CliResult<Vec<f64>> {
    let text =
        fs::read_to_string(path).map_err(|e| CliError::data(format!("cannot read data {}: {e}", path.display())))?;
    parse_data(&text)
}

pub fn format_data(values: &[f64]) -> String {
    let mut s = String::new();
    for v in values {
        s.push_str(&format!("{v}\n"));
    }
    s
}

// ---------------------------------------------------------------------------
// documents

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientDocument {
    pub format: String,
    pub null_hash: String,
    pub null: NullSection,
    pub coefficients: NullCoefficients,
    pub diagnostics: EigenDiagnostics,
    pub basis_provenance: Vec<String>,
}

impl CoefficientDocument {
    pub fn build(section: &NullSection, k: Option<usize>, condition_cap: f64) -> CliResult<Self> {
        let null = section.build()?;
        let k = k.unwrap_or(section.max_degree);
        let coefficients = compute_coefficients(&null, k, section.method_for(&null))?;
        let diagnostics = eigen_floor_diagnostics(&coefficients, condition_cap);
        Ok(Self {
            format: COEFFICIENT_FORMAT.to_string(),
            null_hash: section.content_hash(),
            null: section.clone(),
            coefficients,
            diagnostics,
            basis_provenance: null.basis().provenance().to_vec(),
        })
    }

    /// Load a cache and check it belongs to `section`.
    pub fn load_for(path: &Path, section: &NullSection) -> CliResult<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read coefficient cache {}: {e}", path.display())))?;
        let doc: Self = serde_json::from_str(&text)
            .map_err(|e| CliError::usage(format!("invalid coefficient cache {}: {e}", path.display())))?;
        if doc.format != COEFFICIENT_FORMAT {
            return Err(CliError::usage(format!("unsupported coefficient format '{}'", doc.format)));
        }
        let expected = section.content_hash();
        if doc.null_hash != expected || doc.null.content_hash() != expected {
            return Err(CliError::usage(format!(
                "stale coefficient cache {}: built for null {}, current null is {}",
                path.display(),
                doc.null_hash,
                expected
            )));
        }
        let c = &doc.coefficients;
        if c.k == 0 || c.alphas.len() != c.k || c.sigma.len() != c.k * c.k {
            return Err(CliError::usage("coefficient cache has inconsistent dimensions"));
        }
        Ok(doc)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSource {
    pub method: String,
    pub k: usize,
    pub null_hash: String,
    /// `computed` or the cache path.
    pub origin: String,
    pub basis_provenance: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestDocument {
    pub data: String,
    pub result: TestResult,
    pub kmax_rule: String,
    pub coefficients: CoefficientSource,
    pub config: RunConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationDocument {
    pub n: usize,
    pub used_k_max: usize,
    pub critical_value: f64,
    pub alpha: f64,
    pub calibration: Calibration,
    pub config: RunConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationDocument {
    pub rows: Vec<SimReport>,
    pub config: RunConfig,
}

pub const KMAX_RULE: &str = "clamp(ceil(2 ln n), 3, 15) capped by the eigenvalue condition floor";

// ---------------------------------------------------------------------------
// command line

#[derive(Debug, Parser)]
#[command(name = "deconv-gof", version, about = "Smooth goodness-of-fit test for the hidden component of X = Y + Z")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Default)]
pub struct TestOverrides {
    /// Nominal level.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Maximum order: `auto` or an integer.
    #[arg(long)]
    pub kmax: Option<KMaxSetting>,
    #[arg(long, value_enum)]
    pub calibration: Option<CalibrationKind>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the test on a data file.
    Test {
        /// One observation per line.
        data: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Calibration seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Calibration replications.
        #[arg(long)]
        reps: Option<usize>,
        /// Coefficient document written by `coeffs`.
        #[arg(long)]
        coeffs_cache: Option<PathBuf>,
        #[command(flatten)]
        overrides: TestOverrides,
    },
    /// Compute and write the null coefficients.
    Coeffs {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Order; defaults to the configured maximum degree.
        #[arg(long)]
        k: Option<usize>,
    },
    /// Critical value for samples of size `n`.
    Calibrate {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        coeffs_cache: Option<PathBuf>,
        #[command(flatten)]
        overrides: TestOverrides,
    },
    /// Level and power table; writes CSV to `--out` and JSON next to it.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "simulation.csv")]
        out: PathBuf,
        /// Master seed of the replications.
        #[arg(long)]
        seed: Option<u64>,
        /// Replications per cell.
        #[arg(long)]
        reps: Option<usize>,
        /// Comma-separated scenario names.
        #[arg(long, value_delimiter = ',')]
        scenarios: Option<Vec<String>>,
        /// Comma-separated sample sizes.
        #[arg(long = "n", value_delimiter = ',')]
        n_grid: Option<Vec<usize>>,
        /// Record wall-clock seconds (otherwise written as NA).
        #[arg(long)]
        timing: bool,
        #[command(flatten)]
        overrides: TestOverrides,
    },
    /// Draw a sample from a scenario and write it as a data file.
    Generate {
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        stream: u64,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn apply_overrides(config: &mut RunConfig, o: &TestOverrides) {
    if let Some(a) = o.alpha {
        config.test.alpha = a;
    }
    if let Some(k) = o.kmax {
        config.test.kmax = k;
    }
    if let Some(c) = o.calibration {
        config.test.calibration = c;
    }
}

fn write_output(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| CliError::io(format!("cannot write {}: {e}", p.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .map_err(|e| CliError::io(format!("cannot write to stdout: {e}")))
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("documents serialize");
    s.push('\n');
    s
}

/// Coefficients from a cache (validated against the null) or computed fresh.
fn obtain_coefficients(
    config: &RunConfig,
    null: &NullSpec,
    cache: Option<&Path>,
) -> CliResult<(NullCoefficients, CoefficientSource)> {
    match cache {
        Some(path) => {
            let doc = CoefficientDocument::load_for(path, &config.null)?;
            let source = CoefficientSource {
                method: doc.coefficients.method.to_string(),
                k: doc.coefficients.k,
                null_hash: doc.null_hash.clone(),
                origin: path.display().to_string(),
                basis_provenance: doc.basis_provenance.clone(),
            };
            Ok((doc.coefficients, source))
        }
        None => {
            let method = config.null.method_for(null);
            let coeffs = compute_coefficients(null, null.basis().max_degree(), method)?;
            let source = CoefficientSource {
                method: method.to_string(),
                k: coeffs.k,
                null_hash: config.null.content_hash(),
                origin: "computed".into(),
                basis_provenance: null.basis().provenance().to_vec(),
            };
            Ok((coeffs, source))
        }
    }
}

pub fn cmd_test(
    data_path: &Path,
    mut config: RunConfig,
    cache: Option<&Path>,
) -> CliResult<TestDocument> {
    let data = read_data(data_path)?;
    if data.is_empty() {
        return Err(Error::EmptyData.into());
    }
    config.test.to_config(config.null.u_split)?;
    let null = config.null.build()?;
    crate::teststat::check_data(&data, &null)?;
    let (coeffs, source) = obtain_coefficients(&config, &null, cache)?;
    let test_config = config.test_config()?;
    let result = PreparedTest::with_coefficients(&null, &test_config, data.len(), coeffs)?.apply(&data)?;
    // normalize the echo: kmax and calibration exactly as applied
    config.test.kmax = match test_config.kmax_policy {
        KMaxPolicy::Auto => KMaxSetting::Auto(AutoTag::Auto),
        KMaxPolicy::Fixed(k) => KMaxSetting::Fixed(k),
    };
    Ok(TestDocument {
        data: data_path.display().to_string(),
        result,
        kmax_rule: KMAX_RULE.into(),
        coefficients: source,
        config,
    })
}

pub fn cmd_coeffs(config: &RunConfig, k: Option<usize>) -> CliResult<CoefficientDocument> {
    if k == Some(0) {
        return Err(CliError::usage("k must be at least 1"));
    }
    CoefficientDocument::build(&config.null, k, config.test.eigen_condition_cap)
}

pub fn cmd_calibrate(config: &RunConfig, n: usize, cache: Option<&Path>) -> CliResult<CalibrationDocument> {
    let test_config = config.test_config()?;
    let null = config.null.build()?;
    let (coeffs, _) = obtain_coefficients(config, &null, cache)?;
    let prepared = PreparedTest::with_coefficients(&null, &test_config, n, coeffs)?;
    Ok(CalibrationDocument {
        n,
        used_k_max: prepared.k_max(),
        critical_value: prepared.critical_value(),
        alpha: test_config.alpha,
        calibration: test_config.calibration,
        config: config.clone(),
    })
}

/// Scenario list for the `[sim]` section.
pub fn scenarios_from_config(config: &RunConfig) -> CliResult<Vec<ScenarioSpec>> {
    let mut out = Vec::new();
    for name in &config.sim.scenarios {
        let parsed: ScenarioName = name.parse()?;
        if parsed == ScenarioName::Custom {
            let null = config.null.build()?;
            let (law, truth) = match &config.sim.custom_data {
                Some(d) => {
                    d.validate()?;
                    (DataLaw::Direct(d.clone()), false)
                }
                None => (DataLaw::Sum(null.sampler()), true),
            };
            out.push(ScenarioSpec::custom(null, law, truth));
        } else {
            out.push(simlab::build_scenario_with_degree(parsed, config.sim.max_degree)?);
        }
    }
    Ok(out)
}

pub fn cmd_simulate(config: &RunConfig, timing: bool) -> CliResult<SimulationDocument> {
    let test_config = config.test_config()?;
    if config.sim.reps == 0 {
        return Err(CliError::usage("sim.reps must be at least 1"));
    }
    let scenarios = scenarios_from_config(config)?;
    let mut rows = simlab::level_power_table(&scenarios, &config.sim.n, config.sim.reps, &test_config, config.sim.seed)?;
    if !timing {
        rows.iter_mut().for_each(|r| r.seconds = None);
    }
    Ok(SimulationDocument {
        rows,
        config: config.clone(),
    })
}

/// The CSV table: fixed header, '.' decimals, '\n' line endings.
pub fn simulation_csv(rows: &[SimReport]) -> CliResult<String> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let err = |e: csv::Error| CliError::io(format!("csv: {e}"));
    w.write_record(CSV_HEADER).map_err(err)?;
    for r in rows {
        w.write_record([
            r.scenario.clone(),
            r.n.to_string(),
            r.reps.to_string(),
            r.rejection_rate.to_string(),
            r.ci_low.to_string(),
            r.ci_high.to_string(),
            r.seconds.map_or_else(|| "NA".to_string(), |s| format!("{s:.3}")),
        ])
        .map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::io(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn cmd_generate(config: &RunConfig, scenario: &str, n: usize, seed: u64, stream: u64) -> CliResult<Vec<f64>> {
    let mut c = config.clone();
    c.sim.scenarios = vec![scenario.to_string()];
    let spec = scenarios_from_config(&c)?.remove(0);
    Ok(spec.sample(seed, stream, n))
}

/// Parse arguments, dispatch, and return the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(command: Command) -> CliResult<()> {
    match command {
        Command::Test {
            data,
            config,
            out,
            seed,
            reps,
            coeffs_cache,
            overrides,
        } => {
            let mut cfg = RunConfig::load(config.as_deref())?;
            apply_overrides(&mut cfg, &overrides);
            if let Some(s) = seed {
                cfg.test.seed = s;
            }
            if let Some(r) = reps {
                cfg.test.reps = r;
            }
            let doc = cmd_test(&data, cfg, coeffs_cache.as_deref())?;
            write_output(out.as_deref(), &to_json(&doc))
        }
        Command::Coeffs { config, out, k } => {
            let cfg = RunConfig::load(config.as_deref())?;
            let doc = cmd_coeffs(&cfg, k)?;
            write_output(out.as_deref(), &to_json(&doc))
        }
        Command::Calibrate {
            n,
            config,
            out,
            seed,
            reps,
            coeffs_cache,
            overrides,
        } => {
            let mut cfg = RunConfig::load(config.as_deref())?;
            apply_overrides(&mut cfg, &overrides);
            if let Some(s) = seed {
                cfg.test.seed = s;
            }
            if let Some(r) = reps {
                cfg.test.reps = r;
            }
            let doc = cmd_calibrate(&cfg, n, coeffs_cache.as_deref())?;
            write_output(out.as_deref(), &to_json(&doc))
        }
        Command::Simulate {
            config,
            out,
            seed,
            reps,
            scenarios,
            n_grid,
            timing,
            overrides,
        } => {
            let mut cfg = RunConfig::load(config.as_deref())?;
            apply_overrides(&mut cfg, &overrides);
            if let Some(s) = seed {
                cfg.sim.seed = s;
            }
            if let Some(r) = reps {
                cfg.sim.reps = r;
            }
            if let Some(s) = scenarios {
                cfg.sim.scenarios = s;
            }
            if let Some(n) = n_grid {
                cfg.sim.n = n;
            }
            let doc = cmd_simulate(&cfg, timing)?;
            write_output(Some(&out), &simulation_csv(&doc.rows)?)?;
            write_output(Some(&out.with_extension("json")), &to_json(&doc))
        }
        Command::Generate {
            scenario,
            n,
            seed,
            stream,
            config,
            out,
        } => {
            let cfg = RunConfig::load(config.as_deref())?;
            let values = cmd_generate(&cfg, &scenario, n, seed, stream)?;
            let header = format!("# scenario {scenario}, n {n}, seed {seed}, stream {stream}\n");
            write_output(out.as_deref(), &(header + &format_data(&values)))
        }
    }
}
