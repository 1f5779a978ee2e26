//! The data-driven statistic `T_{S_n}` and its calibration.
//!
//! `b_j = n^{-1/2} sum_i (Q_j(X_i) m(X_i) - alpha_j)`, `T_k = b_k' Sigma_k^{-1} b_k`,
//! `S_n = min argmax_{1<=k<=k(n)} (T_k - k ln n)`.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma_lr, gamma_ur};

use crate::error::{Error, Result};
use crate::measures::RngStream;
use crate::nullmodel::{
    compute_coefficients, default_method, eigen_floor_diagnostics, CoefficientMethod, EigenDiagnostics,
    NullCoefficients, NullSpec,
};

/// Calibration draws use stream indices starting here, so they never collide
/// with replication streams (which start at 0) under the same master seed.
pub const CALIBRATION_STREAM_OFFSET: u64 = 1 << 62;

/// Hard bounds of the automatic `k(n)` rule.
pub const KMAX_FLOOR: usize = 3;
pub const KMAX_CEILING: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KMaxPolicy {
    Auto,
    Fixed(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Calibration {
    /// Critical value from the chi-squared(1) limit.
    AsymptoticChi2_1,
    /// Empirical quantile of `T_{S_n}` over `reps` simulated null samples.
    MonteCarlo { reps: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestConfig {
    pub alpha: f64,
    pub kmax_policy: KMaxPolicy,
    pub calibration: Calibration,
    pub eigen_condition_cap: f64,
    pub u_split: f64,
}

impl Default for TestConfig {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            kmax_policy: KMaxPolicy::Auto,
            calibration: Calibration::MonteCarlo {
                reps: 2000,
                seed: 20_240_917,
            },
            eigen_condition_cap: 1e12,
            u_split: 0.5,
        }
    }
}

impl TestConfig {
    pub fn asymptotic() -> Self {
        Self {
            calibration: Calibration::AsymptoticChi2_1,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidConfig(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if let KMaxPolicy::Fixed(k) = self.kmax_policy {
            if k == 0 {
                return Err(Error::InvalidConfig("fixed k must be at least 1".into()));
            }
        }
        if let Calibration::MonteCarlo { reps, .. } = self.calibration {
            if reps < 100 {
                return Err(Error::InvalidConfig(format!(
                    "Monte Carlo calibration needs at least 100 replications, got {reps}"
                )));
            }
        }
        if !(self.eigen_condition_cap > 1.0) {
            return Err(Error::InvalidConfig("eigen condition cap must exceed 1".into()));
        }
        if !(self.u_split > 0.0 && self.u_split < 1.0) {
            return Err(Error::InvalidConfig("u split must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// Outcome of one test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub n: usize,
    /// `T_1 .. T_{k(n)}`.
    pub t_sequence: Vec<f64>,
    /// Selected order (1-based).
    pub s_n: usize,
    pub t_stat: f64,
    pub critical_value: f64,
    pub p_value: f64,
    pub reject: bool,
    /// `lambda_min(Sigma_k)` for `k = 1..=used_k_max`.
    pub lambdas: Vec<f64>,
    pub used_k_max: usize,
    /// Number of components kept by the nested whitening.
    pub retained_rank: usize,
}

// ---------------------------------------------------------------------------

/// Reject observations outside the reference support.
pub fn check_data(data: &[f64], null: &NullSpec) -> Result<()> {
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    let bad: Vec<usize> = data
        .iter()
        .enumerate()
        .filter(|(_, x)| !null.reference().contains(**x))
        .map(|(i, _)| i)
        .collect();
    if !bad.is_empty() {
        return Err(Error::DataDomain {
            count: bad.len(),
            indices: bad.into_iter().take(20).collect(),
        });
    }
    Ok(())
}

fn bhat_unchecked(data: &[f64], null: &NullSpec, alphas: &[f64]) -> Vec<f64> {
    let k = alphas.len();
    let mut acc = vec![0.0; k];
    let mut q = [0.0; crate::orthopoly::DEGREE_CAP];
    for &x in data {
        null.weighted_basis(x, &mut q[..k]);
        for j in 0..k {
            acc[j] += q[j] - alphas[j];
        }
    }
    let scale = 1.0 / (data.len() as f64).sqrt();
    acc.iter_mut().for_each(|v| *v *= scale);
    acc
}

/// `b_1 .. b_k`, centered per observation.
pub fn compute_bhat(data: &[f64], null: &NullSpec, coeffs: &NullCoefficients, k: usize) -> Result<Vec<f64>> {
    if k == 0 || k > coeffs.k {
        return Err(Error::Dimension(format!("k = {k} must lie in 1..={}", coeffs.k)));
    }
    check_data(data, null)?;
    Ok(bhat_unchecked(data, null, &coeffs.alphas[..k]))
}

fn check_symmetric(sigma: &DMatrix<f64>) -> Result<()> {
    if sigma.nrows() != sigma.ncols() {
        return Err(Error::Dimension(format!("{}x{} matrix is not square", sigma.nrows(), sigma.ncols())));
    }
    let asym = (sigma - sigma.transpose()).amax();
    if asym > 1e-12 * sigma.amax().max(1.0) {
        return Err(Error::NotSymmetric(asym));
    }
    Ok(())
}

/// Pseudo-inverse square root restricted to eigenvalues above
/// `lambda_max / condition_cap`.
#[derive(Debug, Clone)]
pub struct InverseRoot {
    pub matrix: DMatrix<f64>,
    pub rank: usize,
}

pub fn inv_sqrt_psd(sigma: &DMatrix<f64>, condition_cap: f64) -> Result<InverseRoot> {
    check_symmetric(sigma)?;
    let eig = SymmetricEigen::new(sigma.clone());
    let max = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let floor = max / condition_cap;
    if !(max > 0.0) {
        return Err(Error::RankZero { floor });
    }
    let mut rank = 0;
    let inv_roots = eig.eigenvalues.map(|l| {
        if l > floor {
            rank += 1;
            1.0 / l.sqrt()
        } else {
            0.0
        }
    });
    let r = &eig.eigenvectors * DMatrix::from_diagonal(&inv_roots) * eig.eigenvectors.transpose();
    Ok(InverseRoot {
        matrix: (&r + r.transpose()) * 0.5,
        rank,
    })
}

/// Cholesky factor of `Sigma` built column by column; a column whose Schur
/// pivot falls below `lambda_max / cap` is dropped. Because the factor of
/// `Sigma_k` is the leading block of the factor of `Sigma_K`, one forward
/// solve yields every nested `T_k` as a running sum of squares.
#[derive(Debug, Clone)]
pub struct NestedWhitener {
    lower: DMatrix<f64>,
    kept: Vec<bool>,
}

impl NestedWhitener {
    pub fn new(sigma: &DMatrix<f64>, condition_cap: f64) -> Result<Self> {
        check_symmetric(sigma)?;
        let k = sigma.nrows();
        let max = SymmetricEigen::new(sigma.clone())
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        let floor = max / condition_cap;
        if !(max > 0.0) {
            return Err(Error::RankZero { floor });
        }
        let mut lower = DMatrix::zeros(k, k);
        let mut kept = vec![false; k];
        for j in 0..k {
            let mut d = sigma[(j, j)];
            for l in 0..j {
                d -= lower[(j, l)] * lower[(j, l)];
            }
            if d <= floor {
                continue;
            }
            kept[j] = true;
            let root = d.sqrt();
            lower[(j, j)] = root;
            for i in j + 1..k {
                let mut s = sigma[(i, j)];
                for l in 0..j {
                    s -= lower[(i, l)] * lower[(j, l)];
                }
                lower[(i, j)] = s / root;
            }
        }
        if kept.iter().all(|k| !k) {
            return Err(Error::RankZero { floor });
        }
        Ok(Self { lower, kept })
    }

    pub fn dim(&self) -> usize {
        self.kept.len()
    }

    pub fn rank(&self) -> usize {
        self.kept.iter().filter(|k| **k).count()
    }

    /// `T_1 .. T_len` for a vector `b` of length at most `dim`.
    pub fn t_sequence(&self, b: &[f64]) -> Vec<f64> {
        let k = b.len().min(self.dim());
        let mut w = vec![0.0; k];
        let mut out = Vec::with_capacity(k);
        let mut total = 0.0;
        for j in 0..k {
            if self.kept[j] {
                let mut s = b[j];
                for l in 0..j {
                    s -= self.lower[(j, l)] * w[l];
                }
                w[j] = s / self.lower[(j, j)];
                total += w[j] * w[j];
            }
            out.push(total);
        }
        out
    }
}

/// `T_k` for every nested `k <= len(bhat)`; nondecreasing by construction.
pub fn t_sequence(bhat: &[f64], sigma: &DMatrix<f64>, condition_cap: f64) -> Result<Vec<f64>> {
    if sigma.nrows() < bhat.len() {
        return Err(Error::Dimension(format!(
            "b has {} components but Sigma is {}x{}",
            bhat.len(),
            sigma.nrows(),
            sigma.ncols()
        )));
    }
    let k = bhat.len();
    let block = sigma.view((0, 0), (k, k)).into_owned();
    Ok(NestedWhitener::new(&block, condition_cap)?.t_sequence(bhat))
}

/// Smallest maximizer (1-based) of `T_k - k ln n`.
pub fn select_order(t_sequence: &[f64], n: usize) -> usize {
    let penalty = (n.max(2) as f64).ln();
    let mut best_k = 1;
    let mut best = f64::NEG_INFINITY;
    for (i, t) in t_sequence.iter().enumerate() {
        let v = t - (i + 1) as f64 * penalty;
        // values equal up to rounding count as ties, which keep the smaller k
        if i == 0 || v > best + 1e-12 * best.abs().max(1.0) {
            best = v;
            best_k = i + 1;
        }
    }
    best_k
}

/// `k(n) = clamp(ceil(2 ln n), 3, 15)`, further capped by the usable order of
/// the eigenvalue diagnostics.
pub fn default_kmax(n: usize, diagnostics: Option<&EigenDiagnostics>) -> usize {
    let raw = (2.0 * (n.max(2) as f64).ln()).ceil() as usize;
    let k = raw.clamp(KMAX_FLOOR, KMAX_CEILING);
    match diagnostics {
        Some(d) => k.min(d.usable_k).max(1),
        None => k,
    }
}

/// Chi-squared CDF: regularized lower incomplete gamma at `(df/2, x/2)`.
pub fn chi2_cdf(x: f64, df: u32) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x.is_infinite() {
        return 1.0;
    }
    gamma_lr(0.5 * df as f64, 0.5 * x)
}

/// Upper tail `1 - chi2_cdf(x, df)` without cancellation.
pub fn chi2_sf(x: f64, df: u32) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x.is_infinite() {
        return 0.0;
    }
    gamma_ur(0.5 * df as f64, 0.5 * x)
}

/// Inverse of [`chi2_cdf`] by bisection.
pub fn chi2_quantile(p: f64, df: u32) -> f64 {
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let mut hi = df.max(1) as f64;
    while chi2_cdf(hi, df) < p {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if chi2_cdf(mid, df) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

// ---------------------------------------------------------------------------

/// Everything that depends on the null and `n` but not on the data:
/// coefficients, `k(n)`, the whitener and the critical value.
#[derive(Debug, Clone)]
pub struct PreparedTest {
    null: NullSpec,
    config: TestConfig,
    n: usize,
    coeffs: NullCoefficients,
    diagnostics: EigenDiagnostics,
    k_max: usize,
    whitener: NestedWhitener,
    critical_value: f64,
    /// Sorted calibration statistics (Monte Carlo mode only).
    calibration_sample: Option<Vec<f64>>,
}

impl PreparedTest {
    /// Compute coefficients with the default route and calibrate.
    pub fn new(null: &NullSpec, config: &TestConfig, n: usize) -> Result<Self> {
        config.validate()?;
        let null = null.clone().with_u_split(config.u_split)?;
        let k = null.basis().max_degree();
        let coeffs = compute_coefficients(&null, k, default_method(&null))?;
        Self::with_coefficients(&null, config, n, coeffs)
    }

    /// Calibrate against precomputed (for example cached) coefficients.
    pub fn with_coefficients(null: &NullSpec, config: &TestConfig, n: usize, coeffs: NullCoefficients) -> Result<Self> {
        config.validate()?;
        if n < 2 {
            return Err(Error::InvalidConfig(format!("sample size must be at least 2, got {n}")));
        }
        let null = null.clone().with_u_split(config.u_split)?;
        let diagnostics = eigen_floor_diagnostics(&coeffs, config.eigen_condition_cap);
        let k_max = match config.kmax_policy {
            KMaxPolicy::Auto => default_kmax(n, Some(&diagnostics)).min(coeffs.k),
            KMaxPolicy::Fixed(k) => {
                if k > coeffs.k {
                    return Err(Error::InvalidConfig(format!(
                        "fixed k = {k} exceeds the {} available coefficients",
                        coeffs.k
                    )));
                }
                k
            }
        };
        let coeffs = coeffs.truncate(k_max)?;
        let whitener = NestedWhitener::new(&coeffs.sigma_matrix(), config.eigen_condition_cap)?;
        let mut prepared = Self {
            null,
            config: *config,
            n,
            coeffs,
            diagnostics,
            k_max,
            whitener,
            critical_value: f64::NAN,
            calibration_sample: None,
        };
        match config.calibration {
            Calibration::AsymptoticChi2_1 => {
                prepared.critical_value = chi2_quantile(1.0 - config.alpha, 1);
            }
            Calibration::MonteCarlo { reps, seed } => {
                let mut sample: Vec<f64> = (0..reps as u64)
                    .into_par_iter()
                    .map(|r| {
                        let data = prepared
                            .null
                            .sample_x(RngStream::new(seed, CALIBRATION_STREAM_OFFSET + r), n);
                        prepared.selected_statistic(&data).1
                    })
                    .collect();
                sample.sort_by(|a, b| a.total_cmp(b));
                let idx = ((1.0 - config.alpha) * reps as f64).ceil() as usize;
                prepared.critical_value = sample[idx.clamp(1, reps) - 1];
                prepared.calibration_sample = Some(sample);
            }
        }
        Ok(prepared)
    }

    pub fn null(&self) -> &NullSpec {
        &self.null
    }

    pub fn config(&self) -> &TestConfig {
        &self.config
    }

    pub fn coefficients(&self) -> &NullCoefficients {
        &self.coeffs
    }

    pub fn diagnostics(&self) -> &EigenDiagnostics {
        &self.diagnostics
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn critical_value(&self) -> f64 {
        self.critical_value
    }

    pub fn sample_size(&self) -> usize {
        self.n
    }

    pub fn calibration_sample(&self) -> Option<&[f64]> {
        self.calibration_sample.as_deref()
    }

    /// `(T sequence, T_{S_n}, S_n)` for data already known to be in range.
    fn selected_statistic(&self, data: &[f64]) -> (Vec<f64>, f64, usize) {
        let b = bhat_unchecked(data, &self.null, &self.coeffs.alphas);
        let t = self.whitener.t_sequence(&b);
        let s = select_order(&t, data.len());
        let stat = t[s - 1];
        (t, stat, s)
    }

    /// Run the prepared test on a sample (its size may differ from the one
    /// used for calibration, but then `k(n)` and the critical value refer to
    /// the prepared size).
    pub fn apply(&self, data: &[f64]) -> Result<TestResult> {
        check_data(data, &self.null)?;
        let (t_sequence, t_stat, s_n) = self.selected_statistic(data);
        let p_value = match &self.calibration_sample {
            None => chi2_sf(t_stat, 1),
            Some(sample) => {
                // count of calibration statistics >= t_stat
                let below = sample.partition_point(|v| *v < t_stat);
                (1 + sample.len() - below) as f64 / (sample.len() + 1) as f64
            }
        };
        Ok(TestResult {
            n: data.len(),
            t_sequence,
            s_n,
            t_stat,
            critical_value: self.critical_value,
            p_value,
            reject: t_stat > self.critical_value,
            lambdas: self.diagnostics.lambda_min[..self.k_max].to_vec(),
            used_k_max: self.k_max,
            retained_rank: self.whitener.rank(),
        })
    }
}

/// Critical value of `T_{S_n}` at level `config.alpha` for samples of size `n`.
pub fn critical_value(config: &TestConfig, null: &NullSpec, n: usize, coeffs: &NullCoefficients) -> Result<f64> {
    Ok(PreparedTest::with_coefficients(null, config, n, coeffs.clone())?.critical_value)
}

/// Full test: coefficients, statistic, order selection, calibration, decision.
pub fn run_test(data: &[f64], null: &NullSpec, config: &TestConfig) -> Result<TestResult> {
    check_data(data, null)?;
    PreparedTest::new(null, config, data.len())?.apply(data)
}

/// Like [`run_test`] with explicit coefficients (a cache, or a non-default route).
pub fn run_test_with_coefficients(
    data: &[f64],
    null: &NullSpec,
    config: &TestConfig,
    coeffs: NullCoefficients,
) -> Result<TestResult> {
    check_data(data, null)?;
    PreparedTest::with_coefficients(null, config, data.len(), coeffs)?.apply(data)
}

/// The route [`run_test`] uses for this null.
pub fn coefficient_route(null: &NullSpec) -> CoefficientMethod {
    default_method(null)
}
