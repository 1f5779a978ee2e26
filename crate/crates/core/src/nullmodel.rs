//! Null coefficients `alpha_j = E[Q_j(X) m(X)]` and covariance
//! `Sigma_ij = E[Q_i(X) Q_j(X) m(X)^2] - alpha_i alpha_j` under `X = Y + Z`.
//!
//! Three routes are available:
//!
//! * closed form: the addition theorems reduce every expectation over
//!   `Y + Z` to products of one-dimensional expectations (Laguerre and
//!   Meixner), or to products of moments (shifted Legendre);
//! * quadrature: nested one-dimensional engines on `(y, z)`;
//! * Monte Carlo: averages over joint draws (the only route when `Y` and `Z`
//!   are dependent).
//!
//! Coefficients are always computed up to the basis degree cap and truncated,
//! so order `k - 1` objects are exact sub-objects of order `k`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{
    self, density_m, DistributionSpec, DuplicatedNoise, IndependentPair, JointSampler,
    ReferenceMeasureSpec, RngStream, StreamRng,
};
use crate::orthopoly::{
    binomial, certify_orthonormality, shifted_legendre_monomials, AdditionSplit, BasisDefinition,
    BasisTable, PolynomialFamilySpec, SplitFamily,
};

/// Eigenvalues of `Sigma` in `(-PSD_CLIP_TOLERANCE, 0)` are clipped to zero;
/// anything more negative is an error.
pub const PSD_CLIP_TOLERANCE: f64 = 1e-10;

/// Default polynomial degree cap of a null model's basis.
pub const DEFAULT_MAX_DEGREE: usize = 15;

/// Default Monte Carlo size of the coefficient oracle.
pub const DEFAULT_MC_SAMPLES: usize = 1_000_000;

/// How `Y` and `Z` are coupled.
#[derive(Clone)]
pub enum Dependence {
    Independent,
    Joint(Arc<dyn JointSampler>),
}

impl fmt::Debug for Dependence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Independent => write!(f, "Independent"),
            Self::Joint(s) => write!(f, "Joint({})", s.label()),
        }
    }
}

/// The null hypothesis `f = f0` for the hidden component together with the
/// known noise law, their coupling and the reference measure.
#[derive(Debug, Clone)]
pub struct NullSpec {
    y_law: DistributionSpec,
    z_law: DistributionSpec,
    dependence: Dependence,
    reference: ReferenceMeasureSpec,
    basis: Arc<BasisTable>,
    u_split: f64,
}

/// Basis family paired with a reference measure.
pub fn family_for_reference(reference: &ReferenceMeasureSpec, max_degree: usize) -> Result<PolynomialFamilySpec> {
    match *reference {
        ReferenceMeasureSpec::Exponential1 => PolynomialFamilySpec::laguerre(1.0, max_degree),
        ReferenceMeasureSpec::Uniform01 => PolynomialFamilySpec::shifted_legendre(max_degree),
        ReferenceMeasureSpec::Geometric { p } => PolynomialFamilySpec::meixner(p, max_degree),
    }
}

fn check_basis_matches(reference: &ReferenceMeasureSpec, basis: &BasisTable) -> Result<()> {
    let expected = family_for_reference(reference, basis.max_degree())?;
    let got = basis.family();
    let shape_ok = match reference {
        ReferenceMeasureSpec::Uniform01 => true,
        _ => (got.shape - expected.shape).abs() < 1e-15,
    };
    if got.kind != expected.kind || !shape_ok {
        return Err(Error::BasisMismatch(format!(
            "reference {reference:?} needs {:?}(shape {}), basis is {:?}(shape {})",
            expected.kind, expected.shape, got.kind, got.shape
        )));
    }
    Ok(())
}

impl NullSpec {
    /// Independent null with a freshly certified basis of degree `max_degree`.
    pub fn new(
        y_law: DistributionSpec,
        z_law: DistributionSpec,
        reference: ReferenceMeasureSpec,
        max_degree: usize,
    ) -> Result<Self> {
        reference.validate()?;
        let basis = certify_orthonormality(family_for_reference(&reference, max_degree)?)?;
        Self::with_basis(y_law, z_law, reference, Arc::new(basis))
    }

    /// Independent null reusing an already certified basis.
    pub fn with_basis(
        y_law: DistributionSpec,
        z_law: DistributionSpec,
        reference: ReferenceMeasureSpec,
        basis: Arc<BasisTable>,
    ) -> Result<Self> {
        y_law.validate()?;
        z_law.validate()?;
        reference.validate()?;
        check_basis_matches(&reference, &basis)?;
        let spec = Self {
            y_law,
            z_law,
            dependence: Dependence::Independent,
            reference,
            basis,
            u_split: 0.5,
        };
        spec.check_support()?;
        Ok(spec)
    }

    /// Replace the coupling of `Y` and `Z`.
    pub fn with_dependence(mut self, dependence: Dependence) -> Self {
        self.dependence = dependence;
        self
    }

    /// Split point `u` of the addition theorems (`v = 1 - u`).
    pub fn with_u_split(mut self, u: f64) -> Result<Self> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::InvalidNull(format!("u split must lie in (0, 1), got {u}")));
        }
        self.u_split = u;
        Ok(self)
    }

    fn check_support(&self) -> Result<()> {
        let (sy, sz) = (self.y_law.support(), self.z_law.support());
        let lower = sy.lower + sz.lower;
        let upper = sy.upper + sz.upper;
        let ok = match self.reference {
            ReferenceMeasureSpec::Exponential1 => lower >= 0.0,
            ReferenceMeasureSpec::Uniform01 => lower >= 0.0 && upper <= 1.0,
            ReferenceMeasureSpec::Geometric { .. } => {
                lower >= 0.0 && sy.integer_valued && sz.integer_valued
            }
        };
        if !ok {
            return Err(Error::InvalidNull(format!(
                "support of Y + Z ([{lower}, {upper}]) is not contained in the support of {:?}",
                self.reference
            )));
        }
        Ok(())
    }

    pub fn y_law(&self) -> &DistributionSpec {
        &self.y_law
    }

    pub fn z_law(&self) -> &DistributionSpec {
        &self.z_law
    }

    pub fn dependence(&self) -> &Dependence {
        &self.dependence
    }

    pub fn reference(&self) -> &ReferenceMeasureSpec {
        &self.reference
    }

    pub fn basis(&self) -> &BasisTable {
        &self.basis
    }

    pub fn basis_arc(&self) -> Arc<BasisTable> {
        Arc::clone(&self.basis)
    }

    pub fn u_split(&self) -> f64 {
        self.u_split
    }

    pub fn is_independent(&self) -> bool {
        matches!(self.dependence, Dependence::Independent)
    }

    /// Sampler of `(Y, Z)` under the null.
    pub fn sampler(&self) -> Arc<dyn JointSampler> {
        match &self.dependence {
            Dependence::Independent => Arc::new(IndependentPair {
                y: self.y_law.clone(),
                z: self.z_law.clone(),
            }),
            Dependence::Joint(s) => Arc::clone(s),
        }
    }

    /// `n` draws of `X = Y + Z` under the null from one stream.
    pub fn sample_x(&self, stream: RngStream, n: usize) -> Vec<f64> {
        let sampler = self.sampler();
        let mut rng: StreamRng = stream.rng();
        (0..n)
            .map(|_| {
                let (y, z) = sampler.sample_pair(&mut rng);
                y + z
            })
            .collect()
    }

    /// Orthonormal `Q_1(x) m(x), ..., Q_k(x) m(x)` written into `out[..k]`.
    pub fn weighted_basis(&self, x: f64, out: &mut [f64]) {
        let k = out.len();
        let m = density_m(&self.reference, x);
        let mut vals = [0.0; crate::orthopoly::DEGREE_CAP + 1];
        self.basis.values(x, &mut vals[..=k]);
        for j in 0..k {
            out[j] = vals[j + 1] * m;
        }
    }
}

/// A perfectly dependent null, `Y = Z ~ z_law` (useful for exercising the
/// dependent path).
pub fn duplicated_noise_null(z_law: DistributionSpec, reference: ReferenceMeasureSpec, max_degree: usize) -> Result<NullSpec> {
    let null = NullSpec::new(z_law.clone(), z_law.clone(), reference, max_degree)?;
    Ok(null.with_dependence(Dependence::Joint(Arc::new(DuplicatedNoise { z: z_law }))))
}

// ---------------------------------------------------------------------------

/// Route used to compute null coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CoefficientMethod {
    ClosedForm,
    Quadrature,
    MonteCarlo { samples: usize, seed: u64 },
}

impl fmt::Display for CoefficientMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::ClosedForm => write!(f, "closed_form"),
            Self::Quadrature => write!(f, "quadrature"),
            Self::MonteCarlo { samples, seed } => write!(f, "monte_carlo(n={samples}, seed={seed})"),
        }
    }
}

/// Default route: closed form for independent nulls, Monte Carlo otherwise.
pub fn default_method(null: &NullSpec) -> CoefficientMethod {
    if null.is_independent() {
        CoefficientMethod::ClosedForm
    } else {
        CoefficientMethod::MonteCarlo {
            samples: DEFAULT_MC_SAMPLES,
            seed: 0,
        }
    }
}

/// `alpha_1..alpha_k` and `Sigma_k` under the null.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullCoefficients {
    pub k: usize,
    pub alphas: Vec<f64>,
    /// Row-major `k x k`.
    pub sigma: Vec<f64>,
    pub method: CoefficientMethod,
    /// Smallest eigenvalue of `Sigma_k`.
    pub min_eigen: f64,
    /// Magnitude of the most negative eigenvalue clipped to zero (0 if none).
    pub psd_clip: f64,
    /// Monte Carlo standard errors of the alphas, when applicable.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_stderr: Option<Vec<f64>>,
}

impl NullCoefficients {
    pub fn sigma_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.k, self.k, &self.sigma)
    }

    pub fn sigma_entry(&self, i: usize, j: usize) -> f64 {
        self.sigma[i * self.k + j]
    }

    /// Leading order-`k` sub-object.
    pub fn truncate(&self, k: usize) -> Result<NullCoefficients> {
        if k == 0 || k > self.k {
            return Err(Error::Dimension(format!("cannot truncate order {} to {k}", self.k)));
        }
        let mut sigma = Vec::with_capacity(k * k);
        for i in 0..k {
            sigma.extend_from_slice(&self.sigma[i * self.k..i * self.k + k]);
        }
        let min_eigen = min_eigenvalue(&DMatrix::from_row_slice(k, k, &sigma));
        Ok(NullCoefficients {
            k,
            alphas: self.alphas[..k].to_vec(),
            sigma,
            method: self.method,
            min_eigen,
            psd_clip: self.psd_clip,
            alpha_stderr: self.alpha_stderr.as_ref().map(|s| s[..k].to_vec()),
        })
    }
}

fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return f64::NAN;
    }
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

/// First and second weighted moments of the basis under the null:
/// `alpha[i] = E[Q_{i+1} m]`, `second[i*k + j] = E[Q_{i+1} Q_{j+1} m^2]`.
#[derive(Debug, Clone)]
pub struct RawMoments {
    pub k: usize,
    pub alphas: Vec<f64>,
    pub second: Vec<f64>,
    pub alpha_stderr: Option<Vec<f64>>,
    pub second_stderr: Option<Vec<f64>>,
}

/// Weighted basis moments by the requested route at order `k`.
pub fn raw_moments(null: &NullSpec, k: usize, method: CoefficientMethod) -> Result<RawMoments> {
    if k == 0 || k > null.basis.max_degree() {
        return Err(Error::Dimension(format!(
            "order k = {k} must lie in 1..={}",
            null.basis.max_degree()
        )));
    }
    match method {
        CoefficientMethod::ClosedForm => {
            if !null.is_independent() {
                return Err(Error::MethodUnavailable {
                    method: method.to_string(),
                    reason: "closed forms need independent Y and Z".into(),
                });
            }
            closed_form_moments(null, k)
        }
        CoefficientMethod::Quadrature => {
            if !null.is_independent() {
                return Err(Error::MethodUnavailable {
                    method: method.to_string(),
                    reason: "the product quadrature needs independent Y and Z".into(),
                });
            }
            quadrature_moments(null, k)
        }
        CoefficientMethod::MonteCarlo { samples, seed } => monte_carlo_moments(null, k, samples, seed),
    }
}

fn quadrature_moments(null: &NullSpec, k: usize) -> Result<RawMoments> {
    let dim = k + k * k;
    let f = |y: f64, z: f64, out: &mut [f64]| {
        let x = y + z;
        let mut q = [0.0; crate::orthopoly::DEGREE_CAP];
        null.weighted_basis(x, &mut q[..k]);
        out[..k].copy_from_slice(&q[..k]);
        for i in 0..k {
            for j in 0..k {
                out[k + i * k + j] = q[i] * q[j];
            }
        }
    };
    let v = measures::expect_conv_vec(&null.y_law, &null.z_law, dim, &f, 1e-11)?;
    Ok(RawMoments {
        k,
        alphas: v[..k].to_vec(),
        second: v[k..].to_vec(),
        alpha_stderr: None,
        second_stderr: None,
    })
}

fn monte_carlo_moments(null: &NullSpec, k: usize, samples: usize, seed: u64) -> Result<RawMoments> {
    let dim = k + k * k;
    let f = |y: f64, z: f64, out: &mut [f64]| {
        let mut q = [0.0; crate::orthopoly::DEGREE_CAP];
        null.weighted_basis(y + z, &mut q[..k]);
        out[..k].copy_from_slice(&q[..k]);
        for i in 0..k {
            for j in 0..k {
                out[k + i * k + j] = q[i] * q[j];
            }
        }
    };
    let sampler = null.sampler();
    let est = measures::mc_expect_vec(sampler.as_ref(), dim, &f, samples, RngStream::new(seed, 0))?;
    Ok(RawMoments {
        k,
        alphas: est[..k].iter().map(|e| e.mean).collect(),
        second: est[k..].iter().map(|e| e.mean).collect(),
        alpha_stderr: Some(est[..k].iter().map(|e| e.stderr).collect()),
        second_stderr: Some(est[k..].iter().map(|e| e.stderr).collect()),
    })
}

fn closed_form_moments(null: &NullSpec, k: usize) -> Result<RawMoments> {
    match null.basis.definition() {
        BasisDefinition::LaguerreRecurrence => {
            if null.basis.family().shape != 1.0 {
                return Err(Error::MethodUnavailable {
                    method: "closed_form".into(),
                    reason: "the Laguerre split is wired for the unit-shape basis".into(),
                });
            }
            let split = AdditionSplit::new(SplitFamily::Laguerre, k, null.u_split, 1.0 - null.u_split)?;
            split_moments(null, &split, k, |x| (-x).exp(), |x| (-2.0 * x).exp())
        }
        BasisDefinition::MeixnerStandard => {
            let p = null.basis.family().shape;
            let split = AdditionSplit::new(SplitFamily::Meixner { p }, k, null.u_split, 1.0 - null.u_split)?;
            let root = (1.0 - p).sqrt();
            split_moments(
                null,
                &split,
                k,
                move |x| p.powf(x) * root,
                move |x| p.powf(2.0 * x) * (1.0 - p),
            )
        }
        BasisDefinition::ShiftedLegendre => legendre_moments(null, k),
        BasisDefinition::MeixnerTabulated => Err(Error::MethodUnavailable {
            method: "closed_form".into(),
            reason: "the addition split is defined for the standard Meixner family".into(),
        }),
    }
}

/// Closed form through an addition split.
///
/// With `E_s(x) = P~_s(x) w1(x)` and `E_(s,t)(x) = P~_s(x) P~_t(x) w2(x)`:
/// `alpha_i = f_i sum_s c_(i,s) E[E_s,u(Y)] E[E_(i-s),v(Z)]` and
/// `E[Q_i Q_j m^2] = f_i f_j sum_s sum_t c_(i,s) c_(j,t) E[E_(s,t),u(Y)] E[E_(i-s,j-t),v(Z)]`.
fn split_moments<W1, W2>(null: &NullSpec, split: &AdditionSplit, k: usize, w1: W1, w2: W2) -> Result<RawMoments>
where
    W1: Fn(f64) -> f64,
    W2: Fn(f64) -> f64,
{
    let size = k + 1;
    let dim = size + size * size;
    let side = |law: &DistributionSpec, left: bool| -> Result<Vec<f64>> {
        let f = |x: f64, out: &mut [f64]| {
            let mut vals = [0.0; crate::orthopoly::DEGREE_CAP + 1];
            if left {
                split.left_values(x, &mut vals[..size]);
            } else {
                split.right_values(x, &mut vals[..size]);
            }
            let (a, b) = (w1(x), w2(x));
            for s in 0..size {
                out[s] = vals[s] * a;
                for t in 0..size {
                    out[size + s * size + t] = vals[s] * vals[t] * b;
                }
            }
        };
        measures::expect_1d_vec(law, dim, &f, 1e-12)
    };
    let ey = side(&null.y_law, true)?;
    let ez = side(&null.z_law, false)?;
    let first = |v: &[f64], s: usize| v[s];
    let second = |v: &[f64], s: usize, t: usize| v[size + s * size + t];

    let factors: Vec<f64> = (0..=k)
        .map(|i| null.basis.addition_scale_factor(i).expect("split-capable basis"))
        .collect();

    let mut alphas = vec![0.0; k];
    for i in 1..=k {
        let sum: f64 = split
            .terms(i)
            .iter()
            .map(|t| t.coefficient * first(&ey, t.s) * first(&ez, i - t.s))
            .sum();
        alphas[i - 1] = factors[i] * sum;
    }
    let mut moments = vec![0.0; k * k];
    for i in 1..=k {
        for j in i..=k {
            let mut sum = 0.0;
            for ti in split.terms(i) {
                for tj in split.terms(j) {
                    sum += ti.coefficient
                        * tj.coefficient
                        * second(&ey, ti.s, tj.s)
                        * second(&ez, i - ti.s, j - tj.s);
                }
            }
            let v = factors[i] * factors[j] * sum;
            moments[(i - 1) * k + (j - 1)] = v;
            moments[(j - 1) * k + (i - 1)] = v;
        }
    }
    Ok(RawMoments {
        k,
        alphas,
        second: moments,
        alpha_stderr: None,
        second_stderr: None,
    })
}

/// Coefficients `C_(i,s,t)` with `Q_i(y + z) = sum_(s+t<=i) C_(i,s,t) y^s z^t`
/// for the orthonormal shifted Legendre basis; returned as `(s, t, c)` triples.
pub fn legendre_bivariate_coefficients(basis: &BasisTable, i: usize) -> Vec<(usize, usize, f64)> {
    let mono = shifted_legendre_monomials(i);
    let norm = basis.norms()[i];
    let mut out = Vec::new();
    for (m, c) in mono.iter().enumerate() {
        for s in 0..=m {
            out.push((s, m - s, c / norm * binomial(m, s)));
        }
    }
    out
}

fn legendre_moments(null: &NullSpec, k: usize) -> Result<RawMoments> {
    let top = 2 * k + 1;
    let powers = |x: f64, out: &mut [f64]| {
        let mut acc = 1.0;
        for o in out.iter_mut() {
            *o = acc;
            acc *= x;
        }
    };
    let my = measures::expect_1d_vec(&null.y_law, top, &powers, 1e-14)?;
    let mz = measures::expect_1d_vec(&null.z_law, top, &powers, 1e-14)?;
    let coeffs: Vec<Vec<(usize, usize, f64)>> = (0..=k)
        .map(|i| legendre_bivariate_coefficients(&null.basis, i))
        .collect();
    let alphas: Vec<f64> = (1..=k)
        .map(|i| coeffs[i].iter().map(|&(s, t, c)| c * my[s] * mz[t]).sum())
        .collect();
    let mut second = vec![0.0; k * k];
    for i in 1..=k {
        for j in i..=k {
            let mut sum = 0.0;
            for &(s, t, c) in &coeffs[i] {
                for &(s2, t2, c2) in &coeffs[j] {
                    sum += c * c2 * my[s + s2] * mz[t + t2];
                }
            }
            second[(i - 1) * k + (j - 1)] = sum;
            second[(j - 1) * k + (i - 1)] = sum;
        }
    }
    Ok(RawMoments {
        k,
        alphas,
        second,
        alpha_stderr: None,
        second_stderr: None,
    })
}

/// `alpha_1..alpha_k` by the requested route.
pub fn compute_alphas(null: &NullSpec, k: usize, method: CoefficientMethod) -> Result<Vec<f64>> {
    Ok(compute_coefficients(null, k, method)?.alphas)
}

/// `Sigma_k` by the requested route.
pub fn compute_sigma(null: &NullSpec, k: usize, method: CoefficientMethod) -> Result<DMatrix<f64>> {
    Ok(compute_coefficients(null, k, method)?.sigma_matrix())
}

/// Full coefficient set at order `k`. Everything is computed at the basis
/// degree cap and then truncated, which keeps orders nested exactly.
pub fn compute_coefficients(null: &NullSpec, k: usize, method: CoefficientMethod) -> Result<NullCoefficients> {
    let full = null.basis.max_degree();
    if k == 0 || k > full {
        return Err(Error::Dimension(format!("order k = {k} must lie in 1..={full}")));
    }
    let raw = raw_moments(null, full, method)?;
    let coeffs = assemble(raw, method)?;
    coeffs.truncate(k)
}

fn assemble(raw: RawMoments, method: CoefficientMethod) -> Result<NullCoefficients> {
    let k = raw.k;
    let mut sigma = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            let a = raw.second[i * k + j] - raw.alphas[i] * raw.alphas[j];
            let b = raw.second[j * k + i] - raw.alphas[j] * raw.alphas[i];
            sigma[(i, j)] = 0.5 * (a + b);
        }
    }
    let (sigma, min_eigen, psd_clip) = repair_psd(sigma)?;
    let mut row_major = Vec::with_capacity(k * k);
    for i in 0..k {
        for j in 0..k {
            row_major.push(sigma[(i, j)]);
        }
    }
    Ok(NullCoefficients {
        k,
        alphas: raw.alphas,
        sigma: row_major,
        method,
        min_eigen,
        psd_clip,
        alpha_stderr: raw.alpha_stderr,
    })
}

/// Clip eigenvalues in `(-PSD_CLIP_TOLERANCE, 0)` to zero; reject anything
/// more negative. Returns `(matrix, smallest eigenvalue, clip magnitude)`.
pub fn repair_psd(sigma: DMatrix<f64>) -> Result<(DMatrix<f64>, f64, f64)> {
    let eig = SymmetricEigen::new(sigma.clone());
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if min >= 0.0 {
        return Ok((sigma, min, 0.0));
    }
    if min <= -PSD_CLIP_TOLERANCE {
        return Err(Error::NotPositiveSemidefinite { min_eigen: min });
    }
    let clipped = eig.eigenvalues.map(|v| v.max(0.0));
    let repaired = &eig.eigenvectors * DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose();
    let repaired = (&repaired + repaired.transpose()) * 0.5;
    Ok((repaired, 0.0, -min))
}

// ---------------------------------------------------------------------------

/// Per-order eigenvalue record of the nested `Sigma_1 .. Sigma_K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenDiagnostics {
    /// `lambda_min(Sigma_k)` for `k = 1..=K`.
    pub lambda_min: Vec<f64>,
    pub lambda_max: Vec<f64>,
    /// `lambda_max / lambda_min`; `None` when `Sigma_k` is singular.
    pub condition: Vec<Option<f64>>,
    /// Largest `k` whose leading blocks all have condition number below the cap.
    pub usable_k: usize,
    pub condition_cap: f64,
}

/// Smallest eigenvalue, condition number and usable order for each nested `k`.
pub fn eigen_floor_diagnostics(coeffs: &NullCoefficients, condition_cap: f64) -> EigenDiagnostics {
    let full = coeffs.sigma_matrix();
    let mut lambda_min = Vec::with_capacity(coeffs.k);
    let mut lambda_max = Vec::with_capacity(coeffs.k);
    let mut condition = Vec::with_capacity(coeffs.k);
    let mut usable_k = 0;
    let mut still_usable = true;
    for k in 1..=coeffs.k {
        let block = full.view((0, 0), (k, k)).into_owned();
        let eig = SymmetricEigen::new(block).eigenvalues;
        let lo = eig.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let cond = (lo > 0.0).then(|| hi / lo);
        if still_usable && cond.is_some_and(|c| c < condition_cap) {
            usable_k = k;
        } else {
            still_usable = false;
        }
        lambda_min.push(lo);
        lambda_max.push(hi);
        condition.push(cond);
    }
    EigenDiagnostics {
        lambda_min,
        lambda_max,
        condition,
        usable_k,
        condition_cap,
    }
}
