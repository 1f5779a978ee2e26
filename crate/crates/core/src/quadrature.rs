//! Composite Gauss–Legendre quadrature with adaptive bisection.
//!
//! Integrands are vector valued so that a whole family of moments can share
//! one set of nodes. Convergence is judged on the max-norm of the difference
//! between a panel rule and the same rule applied to its two halves.

use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Number of nodes per panel.
pub const PANEL_ORDER: usize = 20;

const MAX_DEPTH: usize = 40;
const MAX_PANELS: usize = 20_000;

/// Nodes and weights of an `order`-point Gauss–Legendre rule on [-1, 1].
///
/// Roots are found by Newton iteration on the Legendre recurrence started
/// from the Chebyshev-like guess `cos(pi (i + 3/4) / (order + 1/2))`.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(order >= 1, "Gauss-Legendre rule needs at least one node");
    // (P_order(x), P_order'(x))
    let legendre = |x: f64| {
        let mut p0 = 1.0;
        let mut p1 = x;
        for k in 2..=order {
            let kf = k as f64;
            let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
            p0 = p1;
            p1 = p2;
        }
        (p1, order as f64 * (x * p1 - p0) / (x * x - 1.0))
    };
    let mut nodes = vec![0.0; order];
    let mut weights = vec![0.0; order];
    let nf = order as f64;
    for i in 0..order.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[order - 1 - i] = x;
        weights[i] = w;
        weights[order - 1 - i] = w;
    }
    (nodes, weights)
}

fn panel_rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(PANEL_ORDER))
}

fn apply_rule<F>(f: &F, a: f64, b: f64, dim: usize, scratch: &mut [f64], acc: &mut [f64])
where
    F: Fn(f64, &mut [f64]) + ?Sized,
{
    let (nodes, weights) = panel_rule();
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    acc.iter_mut().for_each(|v| *v = 0.0);
    for (x, w) in nodes.iter().zip(weights) {
        scratch[..dim].iter_mut().for_each(|v| *v = 0.0);
        f(mid + half * x, &mut scratch[..dim]);
        for (a, s) in acc.iter_mut().zip(scratch.iter()) {
            *a += w * half * s;
        }
    }
}

/// Result of an adaptive integration.
#[derive(Debug, Clone)]
pub struct Integral {
    pub values: Vec<f64>,
    pub error_estimate: f64,
    pub panels: usize,
}

/// Integrate a vector-valued function over `[a, b]` to tolerance `tol`,
/// measured per component relative to `max(1, |I_i|)` (max-norm over components).
///
/// `f(x, out)` must write (not accumulate) its values into `out`; the slice is
/// zeroed before every call.
pub fn integrate_vec<F>(f: &F, a: f64, b: f64, dim: usize, tol: f64) -> Result<Integral>
where
    F: Fn(f64, &mut [f64]) + ?Sized,
{
    integrate_vec_with_panels(f, a, b, dim, tol, 1)
}

/// Like [`integrate_vec`] but starting from `initial_panels` equal panels.
pub fn integrate_vec_with_panels<F>(
    f: &F,
    a: f64,
    b: f64,
    dim: usize,
    tol: f64,
    initial_panels: usize,
) -> Result<Integral>
where
    F: Fn(f64, &mut [f64]) + ?Sized,
{
    let mut total = vec![0.0; dim];
    if b <= a || dim == 0 {
        return Ok(Integral {
            values: total,
            error_estimate: 0.0,
            panels: 0,
        });
    }
    let width = b - a;
    let mut scratch = vec![0.0; dim];
    let mut coarse = vec![0.0; dim];
    let mut left = vec![0.0; dim];
    let mut right = vec![0.0; dim];

    let initial_panels = initial_panels.max(1);
    let step = width / initial_panels as f64;
    // stack of (lo, hi, depth, coarse estimate)
    let mut stack: Vec<(f64, f64, usize, Vec<f64>)> = Vec::new();
    let mut scale = vec![0.0f64; dim];
    for p in (0..initial_panels).rev() {
        let lo = a + step * p as f64;
        let hi = if p + 1 == initial_panels { b } else { lo + step };
        apply_rule(f, lo, hi, dim, &mut scratch, &mut coarse);
        for (s, c) in scale.iter_mut().zip(&coarse) {
            *s += c.abs();
        }
        stack.push((lo, hi, 0, coarse.clone()));
    }
    scale.iter_mut().for_each(|s| *s = s.max(1.0));

    let mut error_total = 0.0;
    let mut panels = 0usize;
    let mut worst_unresolved = 0.0f64;
    while let Some((lo, hi, depth, est)) = stack.pop() {
        let mid = 0.5 * (lo + hi);
        apply_rule(f, lo, mid, dim, &mut scratch, &mut left);
        apply_rule(f, mid, hi, dim, &mut scratch, &mut right);
        let mut diff = 0.0f64;
        for i in 0..dim {
            diff = diff.max((left[i] + right[i] - est[i]).abs() / scale[i]);
        }
        let local_tol = tol * (hi - lo) / width;
        panels += 1;
        if diff <= local_tol || depth >= MAX_DEPTH || panels >= MAX_PANELS {
            if diff > local_tol {
                worst_unresolved = worst_unresolved.max(diff);
            }
            for i in 0..dim {
                total[i] += left[i] + right[i];
            }
            error_total += diff;
        } else {
            stack.push((mid, hi, depth + 1, right.clone()));
            stack.push((lo, mid, depth + 1, left.clone()));
        }
    }

    if worst_unresolved > 0.0 && error_total > tol {
        return Err(Error::QuadratureFailure {
            achieved: error_total,
            target: tol,
        });
    }
    Ok(Integral {
        values: total,
        error_estimate: error_total,
        panels,
    })
}

/// Scalar convenience wrapper around [`integrate_vec`].
pub fn integrate<F>(f: F, a: f64, b: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let g = |x: f64, out: &mut [f64]| out[0] = f(x);
    Ok(integrate_vec(&g, a, b, 1, tol)?.values[0])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(PANEL_ORDER);
        // degree 2*20-1 = 39 is exact; check x^38
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(38)).sum();
        assert!((s - 2.0 / 39.0).abs() < 1e-14);
        let total: f64 = w.iter().sum();
        assert!((total - 2.0).abs() < 1e-14);
    }

    #[test]
    fn small_rules_match_tables() {
        let (x, w) = gauss_legendre(2);
        assert!((x[1] - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        assert!((w[0] - 1.0).abs() < 1e-15);
        let (x, w) = gauss_legendre(3);
        assert!(x[1].abs() < 1e-15);
        assert!((w[1] - 8.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn adaptive_handles_sharp_features() {
        let v = integrate(|x| (-x).exp(), 0.0, 60.0, 1e-12).unwrap();
        assert!((v - (1.0 - (-60f64).exp())).abs() < 1e-12);
        let v = integrate(|x| x.sqrt(), 0.0, 1.0, 1e-10).unwrap();
        assert!((v - 2.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn empty_interval_is_zero() {
        assert_eq!(integrate(|_| 1.0, 1.0, 1.0, 1e-10).unwrap(), 0.0);
    }
}
