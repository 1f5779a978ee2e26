//! Distributions, reference measures, RNG streams and expectation engines.
//!
//! Two deterministic engines ([`expect_1d_vec`], [`expect_conv_vec`]) and one
//! stochastic engine ([`mc_expect_vec`]) compute the same quantities by
//! independent routes, so each can serve as an oracle for the others.

use std::cell::RefCell;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma_ur, ln_gamma};

use crate::error::{Error, Result};
use crate::quadrature;

/// Probability mass left outside the truncated support of a continuous axis.
pub const TAIL_MASS: f64 = 1e-12;
/// Tail mass for discrete summation (sums are cheap, so go further).
pub const DISCRETE_TAIL_MASS: f64 = 1e-16;
/// Default absolute tolerance of the deterministic engines.
pub const DEFAULT_TOL: f64 = 1e-10;

// ---------------------------------------------------------------------------
// Reference measures

/// The probability measure `mu` with density `m` carrying the polynomial basis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ReferenceMeasureSpec {
    /// `m(x) = exp(-x)` on `[0, inf)`.
    Exponential1,
    /// `m(x) = 1` on `[0, 1]`.
    Uniform01,
    /// `m(x) = p^x (1 - p)` on the nonnegative integers.
    Geometric { p: f64 },
}

impl ReferenceMeasureSpec {
    pub fn validate(&self) -> Result<()> {
        if let Self::Geometric { p } = *self {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::Domain(format!("geometric reference p must lie in (0, 1), got {p}")));
            }
        }
        Ok(())
    }

    pub fn contains(&self, x: f64) -> bool {
        match *self {
            Self::Exponential1 => x >= 0.0 && x.is_finite(),
            Self::Uniform01 => (0.0..=1.0).contains(&x),
            Self::Geometric { .. } => x >= 0.0 && x.is_finite() && x.fract() == 0.0,
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, Self::Geometric { .. })
    }
}

/// Reference density/mass `m(x)`; zero outside the support.
pub fn density_m(reference: &ReferenceMeasureSpec, x: f64) -> f64 {
    if !reference.contains(x) {
        return 0.0;
    }
    match *reference {
        ReferenceMeasureSpec::Exponential1 => (-x).exp(),
        ReferenceMeasureSpec::Uniform01 => 1.0,
        ReferenceMeasureSpec::Geometric { p } => p.powf(x) * (1.0 - p),
    }
}

// ---------------------------------------------------------------------------
// Distributions

/// A univariate law on the natural scale.
///
/// `Geometric { mean }` has `q = mean / (1 + mean)` and `P(x) = (1 - q) q^x`
/// on `{0, 1, 2, ...}`. `ChiSquared { df }` is `Gamma { shape: df/2, scale: 2 }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DistributionSpec {
    Exponential {
        mean: f64,
    },
    Gamma {
        shape: f64,
        scale: f64,
    },
    ChiSquared {
        df: f64,
    },
    Poisson {
        mean: f64,
    },
    Geometric {
        mean: f64,
    },
    Uniform {
        #[serde(default)]
        low: f64,
        #[serde(default = "one")]
        high: f64,
    },
    Mixture {
        weight: f64,
        first: Box<DistributionSpec>,
        second: Box<DistributionSpec>,
    },
    PointMass {
        value: f64,
    },
}

fn one() -> f64 {
    1.0
}

/// Bounds of a law's support.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Support {
    pub lower: f64,
    pub upper: f64,
    /// Every atom is a nonnegative integer and there is no continuous part.
    pub integer_valued: bool,
}

impl DistributionSpec {
    pub fn uniform01() -> Self {
        Self::Uniform { low: 0.0, high: 1.0 }
    }

    pub fn mixture(weight: f64, first: DistributionSpec, second: DistributionSpec) -> Self {
        Self::Mixture {
            weight,
            first: Box::new(first),
            second: Box::new(second),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |what: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidDistribution(format!("{what} must be positive, got {v}")))
            }
        };
        match self {
            Self::Exponential { mean } => positive("exponential mean", *mean),
            Self::Gamma { shape, scale } => {
                positive("gamma shape", *shape)?;
                positive("gamma scale", *scale)
            }
            Self::ChiSquared { df } => positive("chi-squared df", *df),
            Self::Poisson { mean } => positive("poisson mean", *mean),
            Self::Geometric { mean } => positive("geometric mean", *mean),
            Self::Uniform { low, high } => {
                if low.is_finite() && high.is_finite() && low < high {
                    Ok(())
                } else {
                    Err(Error::InvalidDistribution(format!(
                        "uniform bounds must satisfy low < high, got [{low}, {high}]"
                    )))
                }
            }
            Self::Mixture {
                weight,
                first,
                second,
            } => {
                if !(0.0..=1.0).contains(weight) {
                    return Err(Error::InvalidDistribution(format!(
                        "mixture weight must lie in [0, 1], got {weight}"
                    )));
                }
                first.validate()?;
                second.validate()
            }
            Self::PointMass { value } => {
                if value.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidDistribution("point mass must be finite".into()))
                }
            }
        }
    }

    /// Gamma-family parameters `(shape, scale)` for continuous positive laws.
    fn gamma_params(&self) -> Option<(f64, f64)> {
        match *self {
            Self::Exponential { mean } => Some((1.0, mean)),
            Self::Gamma { shape, scale } => Some((shape, scale)),
            Self::ChiSquared { df } => Some((0.5 * df, 2.0)),
            _ => None,
        }
    }

    pub fn support(&self) -> Support {
        match self {
            Self::Exponential { .. } | Self::Gamma { .. } | Self::ChiSquared { .. } => Support {
                lower: 0.0,
                upper: f64::INFINITY,
                integer_valued: false,
            },
            Self::Poisson { .. } | Self::Geometric { .. } => Support {
                lower: 0.0,
                upper: f64::INFINITY,
                integer_valued: true,
            },
            Self::Uniform { low, high } => Support {
                lower: *low,
                upper: *high,
                integer_valued: false,
            },
            Self::Mixture {
                weight,
                first,
                second,
            } => {
                let (a, b) = (first.support(), second.support());
                // a component with zero weight does not contribute support
                if *weight == 1.0 {
                    return a;
                }
                if *weight == 0.0 {
                    return b;
                }
                Support {
                    lower: a.lower.min(b.lower),
                    upper: a.upper.max(b.upper),
                    integer_valued: a.integer_valued && b.integer_valued,
                }
            }
            Self::PointMass { value } => Support {
                lower: *value,
                upper: *value,
                integer_valued: *value >= 0.0 && value.fract() == 0.0,
            },
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            Self::Exponential { mean } | Self::Poisson { mean } | Self::Geometric { mean } => *mean,
            Self::Gamma { shape, scale } => shape * scale,
            Self::ChiSquared { df } => *df,
            Self::Uniform { low, high } => 0.5 * (low + high),
            Self::Mixture {
                weight,
                first,
                second,
            } => weight * first.mean() + (1.0 - weight) * second.mean(),
            Self::PointMass { value } => *value,
        }
    }

    pub fn second_moment(&self) -> f64 {
        match self {
            Self::Exponential { mean } => 2.0 * mean * mean,
            Self::Gamma { shape, scale } => shape * (shape + 1.0) * scale * scale,
            Self::ChiSquared { df } => df * (df + 2.0),
            Self::Poisson { mean } => mean + mean * mean,
            // variance m (1 + m)
            Self::Geometric { mean } => mean * (1.0 + mean) + mean * mean,
            Self::Uniform { low, high } => (low * low + low * high + high * high) / 3.0,
            Self::Mixture {
                weight,
                first,
                second,
            } => weight * first.second_moment() + (1.0 - weight) * second.second_moment(),
            Self::PointMass { value } => value * value,
        }
    }

    /// Density w.r.t. Lebesgue measure (continuous laws) or mass w.r.t.
    /// counting measure (discrete laws and atoms).
    pub fn pdf_or_pmf(&self, x: f64) -> f64 {
        match self {
            Self::Exponential { .. } | Self::Gamma { .. } | Self::ChiSquared { .. } => {
                let (shape, scale) = self.gamma_params().expect("gamma family");
                gamma_density(shape, scale, x)
            }
            Self::Poisson { mean } => {
                if x < 0.0 || x.fract() != 0.0 {
                    0.0
                } else {
                    (x * mean.ln() - mean - ln_gamma(x + 1.0)).exp()
                }
            }
            Self::Geometric { mean } => {
                if x < 0.0 || x.fract() != 0.0 {
                    0.0
                } else {
                    let q = mean / (1.0 + mean);
                    (1.0 - q) * q.powf(x)
                }
            }
            Self::Uniform { low, high } => {
                if (*low..=*high).contains(&x) {
                    1.0 / (high - low)
                } else {
                    0.0
                }
            }
            Self::Mixture {
                weight,
                first,
                second,
            } => weight * first.pdf_or_pmf(x) + (1.0 - weight) * second.pdf_or_pmf(x),
            Self::PointMass { value } => {
                if x == *value {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// One draw. ChiSquared(1) is the square of a standard normal deviate;
    /// Poisson and Geometric use inversion.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Self::Exponential { mean } => -mean * (1.0 - rng.random::<f64>()).ln(),
            Self::Gamma { shape, scale } => Gamma::new(*shape, *scale)
                .expect("validated gamma parameters")
                .sample(rng),
            Self::ChiSquared { df } => {
                if *df == 1.0 {
                    let z: f64 = rng.sample(StandardNormal);
                    z * z
                } else {
                    Gamma::new(0.5 * df, 2.0)
                        .expect("validated chi-squared df")
                        .sample(rng)
                }
            }
            Self::Poisson { mean } => {
                if *mean < 500.0 {
                    poisson_inversion(*mean, rng.random::<f64>())
                } else {
                    rand_distr::Poisson::new(*mean)
                        .expect("validated poisson mean")
                        .sample(rng)
                }
            }
            Self::Geometric { mean } => {
                let q = mean / (1.0 + mean);
                ((1.0 - rng.random::<f64>()).ln() / q.ln()).floor()
            }
            Self::Uniform { low, high } => low + (high - low) * rng.random::<f64>(),
            Self::Mixture {
                weight,
                first,
                second,
            } => {
                if rng.random::<f64>() < *weight {
                    first.draw(rng)
                } else {
                    second.draw(rng)
                }
            }
            Self::PointMass { value } => *value,
        }
    }

    /// `count` i.i.d. draws from the given stream.
    pub fn sample(&self, stream: RngStream, count: usize) -> Vec<f64> {
        let mut rng = stream.rng();
        (0..count).map(|_| self.draw(&mut rng)).collect()
    }
}

fn gamma_density(shape: f64, scale: f64, x: f64) -> f64 {
    if x < 0.0 {
        return 0.0;
    }
    if x == 0.0 {
        return if shape < 1.0 {
            f64::INFINITY
        } else if shape == 1.0 {
            1.0 / scale
        } else {
            0.0
        };
    }
    ((shape - 1.0) * x.ln() - x / scale - ln_gamma(shape) - shape * scale.ln()).exp()
}

fn poisson_inversion(mean: f64, u: f64) -> f64 {
    let mut x = 0u64;
    let mut p = (-mean).exp();
    let mut cdf = p;
    while u > cdf && p > 0.0 {
        x += 1;
        p *= mean / x as f64;
        cdf += p;
    }
    x as f64
}

/// Upper truncation point `x` with `P(X > x) <= tail` for a gamma law.
fn gamma_upper_quantile(shape: f64, scale: f64, tail: f64) -> f64 {
    let mut hi = (shape + 10.0) * scale;
    while gamma_ur(shape, hi / scale) > tail {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if gamma_ur(shape, mid / scale) > tail {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-10 * hi {
            break;
        }
    }
    hi
}

// ---------------------------------------------------------------------------
// RNG streams

/// The generator behind every [`RngStream`]: ChaCha20 keyed by the master
/// seed (through `seed_from_u64`) with the stream index as the ChaCha stream
/// id. Same `(seed, index)` reproduces bit-exactly.
pub type StreamRng = ChaCha20Rng;

/// A reproducible, independently keyed random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub master_seed: u64,
    pub stream_index: u64,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        Self {
            master_seed,
            stream_index,
        }
    }

    pub fn rng(&self) -> StreamRng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_index);
        rng
    }
}

// ---------------------------------------------------------------------------
// Deterministic expectation engines

thread_local! {
    static ENGINE_ERROR: RefCell<Option<Error>> = const { RefCell::new(None) };
}

/// `E f(Y)` for a vector-valued `f` (writes `dim` values).
///
/// Continuous gamma-family axes are integrated over `[0, q]` with upper tail
/// mass [`TAIL_MASS`]; shape < 1 uses the substitution `y = t^2`. Discrete
/// laws are summed until the remaining mass is below [`DISCRETE_TAIL_MASS`].
pub fn expect_1d_vec(
    dist: &DistributionSpec,
    dim: usize,
    f: &dyn Fn(f64, &mut [f64]),
    tol: f64,
) -> Result<Vec<f64>> {
    let mut out = vec![0.0; dim];
    match dist {
        DistributionSpec::PointMass { value } => f(*value, &mut out),
        DistributionSpec::Mixture {
            weight,
            first,
            second,
        } => {
            let a = if *weight > 0.0 {
                expect_1d_vec(first, dim, f, tol)?
            } else {
                vec![0.0; dim]
            };
            let b = if *weight < 1.0 {
                expect_1d_vec(second, dim, f, tol)?
            } else {
                vec![0.0; dim]
            };
            for i in 0..dim {
                out[i] = weight * a[i] + (1.0 - weight) * b[i];
            }
        }
        DistributionSpec::Uniform { low, high } => {
            let density = 1.0 / (high - low);
            let g = |x: f64, o: &mut [f64]| {
                f(x, o);
                o.iter_mut().for_each(|v| *v *= density);
            };
            out = quadrature::integrate_vec_with_panels(&g, *low, *high, dim, tol, 2)?.values;
        }
        DistributionSpec::Poisson { .. } | DistributionSpec::Geometric { .. } => {
            let mut term = vec![0.0; dim];
            let mut remaining = 1.0;
            let mut x = 0u64;
            loop {
                let mass = dist.pdf_or_pmf(x as f64);
                if mass > 0.0 {
                    term.iter_mut().for_each(|v| *v = 0.0);
                    f(x as f64, &mut term);
                    for (o, t) in out.iter_mut().zip(&term) {
                        *o += mass * t;
                    }
                }
                remaining -= mass;
                x += 1;
                if (x as f64 > dist.mean() && remaining < DISCRETE_TAIL_MASS && mass < DISCRETE_TAIL_MASS)
                    || x > 10_000_000
                {
                    break;
                }
            }
        }
        _ => {
            let (shape, scale) = dist.gamma_params().expect("gamma family");
            let upper = gamma_upper_quantile(shape, scale, TAIL_MASS);
            let log_norm = ln_gamma(shape) + shape * scale.ln();
            if shape < 1.0 {
                // y = t^2, dy = 2t dt: density becomes 2 t^(2 shape - 1) e^(-t^2/scale) / norm
                let g = |t: f64, o: &mut [f64]| {
                    let y = t * t;
                    let w = if t == 0.0 {
                        if shape == 0.5 {
                            2.0 * (-log_norm).exp()
                        } else {
                            0.0
                        }
                    } else {
                        2.0 * ((2.0 * shape - 1.0) * t.ln() - y / scale - log_norm).exp()
                    };
                    f(y, o);
                    o.iter_mut().for_each(|v| *v *= w);
                };
                out = quadrature::integrate_vec_with_panels(&g, 0.0, upper.sqrt(), dim, tol, 8)?.values;
            } else {
                let g = |y: f64, o: &mut [f64]| {
                    let w = gamma_density(shape, scale, y);
                    f(y, o);
                    o.iter_mut().for_each(|v| *v *= w);
                };
                out = quadrature::integrate_vec_with_panels(&g, 0.0, upper, dim, tol, 8)?.values;
            }
        }
    }
    Ok(out)
}

/// `E f(Y, Z)` for independent `Y`, `Z` by nested one-dimensional engines.
pub fn expect_conv_vec(
    dist_y: &DistributionSpec,
    dist_z: &DistributionSpec,
    dim: usize,
    f: &dyn Fn(f64, f64, &mut [f64]),
    tol: f64,
) -> Result<Vec<f64>> {
    let inner_tol = 0.25 * tol;
    let outer = |y: f64, out: &mut [f64]| {
        let g = |z: f64, o: &mut [f64]| f(y, z, o);
        match expect_1d_vec(dist_z, dim, &g, inner_tol) {
            Ok(v) => out.copy_from_slice(&v),
            Err(e) => {
                ENGINE_ERROR.with(|slot| {
                    slot.borrow_mut().get_or_insert(e);
                });
                out.iter_mut().for_each(|v| *v = 0.0);
            }
        }
    };
    ENGINE_ERROR.with(|slot| slot.borrow_mut().take());
    let result = expect_1d_vec(dist_y, dim, &outer, 0.5 * tol);
    if let Some(e) = ENGINE_ERROR.with(|slot| slot.borrow_mut().take()) {
        return Err(e);
    }
    result
}

/// Scalar form of [`expect_conv_vec`] with tolerance `tol`
/// (use [`DEFAULT_TOL`] when in doubt).
pub fn expect_conv<F>(dist_y: &DistributionSpec, dist_z: &DistributionSpec, integrand: F, tol: f64) -> Result<f64>
where
    F: Fn(f64, f64) -> f64,
{
    let g = |y: f64, z: f64, o: &mut [f64]| o[0] = integrand(y, z);
    Ok(expect_conv_vec(dist_y, dist_z, 1, &g, tol)?[0])
}

// ---------------------------------------------------------------------------
// Monte Carlo engine

/// Source of `(Y, Z)` pairs; the dependent-case hook.
pub trait JointSampler: Send + Sync + fmt::Debug {
    fn sample_pair(&self, rng: &mut StreamRng) -> (f64, f64);
    /// Short description for provenance records.
    fn label(&self) -> String;
}

/// Independent `Y ~ y`, `Z ~ z`.
#[derive(Debug, Clone)]
pub struct IndependentPair {
    pub y: DistributionSpec,
    pub z: DistributionSpec,
}

impl JointSampler for IndependentPair {
    fn sample_pair(&self, rng: &mut StreamRng) -> (f64, f64) {
        let y = self.y.draw(rng);
        let z = self.z.draw(rng);
        (y, z)
    }

    fn label(&self) -> String {
        "independent".to_string()
    }
}

/// Perfect dependence: `Z ~ z` and `Y = Z`.
#[derive(Debug, Clone)]
pub struct DuplicatedNoise {
    pub z: DistributionSpec,
}

impl JointSampler for DuplicatedNoise {
    fn sample_pair(&self, rng: &mut StreamRng) -> (f64, f64) {
        let z = self.z.draw(rng);
        (z, z)
    }

    fn label(&self) -> String {
        "duplicated_noise".to_string()
    }
}

/// Sample mean and its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
}

/// Monte Carlo means of a vector integrand over `n` joint draws.
pub fn mc_expect_vec(
    sampler: &dyn JointSampler,
    dim: usize,
    f: &dyn Fn(f64, f64, &mut [f64]),
    n: usize,
    stream: RngStream,
) -> Result<Vec<McEstimate>> {
    if n < 2 {
        return Err(Error::Domain(format!("Monte Carlo needs n >= 2, got {n}")));
    }
    let mut rng = stream.rng();
    let mut mean = vec![0.0; dim];
    let mut m2 = vec![0.0; dim];
    let mut value = vec![0.0; dim];
    for i in 0..n {
        let (y, z) = sampler.sample_pair(&mut rng);
        value.iter_mut().for_each(|v| *v = 0.0);
        f(y, z, &mut value);
        let count = (i + 1) as f64;
        for k in 0..dim {
            let delta = value[k] - mean[k];
            mean[k] += delta / count;
            m2[k] += delta * (value[k] - mean[k]);
        }
    }
    let nf = n as f64;
    Ok(mean
        .into_iter()
        .zip(m2)
        .map(|(mean, m2)| McEstimate {
            mean,
            stderr: (m2 / (nf - 1.0) / nf).sqrt(),
        })
        .collect())
}

/// Scalar form of [`mc_expect_vec`].
pub fn mc_expect<F>(sampler: &dyn JointSampler, integrand: F, n: usize, stream: RngStream) -> Result<McEstimate>
where
    F: Fn(f64, f64) -> f64,
{
    let g = |y: f64, z: f64, o: &mut [f64]| o[0] = integrand(y, z);
    Ok(mc_expect_vec(sampler, 1, &g, n, stream)?[0])
}
