//! Squared-Fejér-type interpolation kernels and the per-axis convolution
//! weights used to shape dual certificates.
//!
//! The kernel on one axis is the trigonometric polynomial
//! `K(τ) = Σ_n ĝ(n) e^{j2πnτ}` whose coefficients `ĝ` are the triangular
//! autocorrelation weights `g` normalized to sum to one, so `K(0) = 1`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ProblemDims;

/// `g(n) = (1/N) Σ_{k=max(n-N,-N)}^{min(n+N,N)} (1 - |k|/M)(1 - |n-k|/M)` for
/// `n ∈ [-N, N]`, returned in order of increasing `n`.
pub fn g_weights(half: usize, m: usize) -> Result<Vec<f64>> {
    if half == 0 {
        return Err(Error::Param("g weights need N >= 1".into()));
    }
    let n = half as i64;
    Ok((-n..=n).map(|i| g_at(i, half, m)).collect())
}

fn g_at(n: i64, half: usize, m: usize) -> f64 {
    let h = half as i64;
    let mf = m as f64;
    let lo = (n - h).max(-h);
    let hi = (n + h).min(h);
    let s: f64 = (lo..=hi).map(|k| (1.0 - k.abs() as f64 / mf) * (1.0 - (n - k).abs() as f64 / mf)).sum();
    s / half.max(1) as f64
}

/// Weights over an arbitrary-length axis, indexed by position `0..len`.
/// The axis is centred at `c = ⌊(len-1)/2⌋`; the half-size is `c` and the
/// full size `len`. Axes of length one or two carry flat weights.
pub fn axis_g(len: usize) -> Vec<f64> {
    let c = (len.max(1) - 1) / 2;
    if c == 0 {
        return vec![1.0; len];
    }
    (0..len).map(|i| g_at(i as i64 - c as i64, c, len)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelTable {
    /// Normalized coefficients over `n ∈ [-N, N]`.
    pub g: Vec<f64>,
    pub half_size: usize,
    pub base_t: f64,
}

impl KernelTable {
    /// Kernel of half-size `half` built from the weights of an axis of length `len`.
    pub fn new(half: usize, len: usize) -> Self {
        let g: Vec<f64> = if half == 0 {
            vec![1.0]
        } else {
            let h = half as i64;
            (-h..=h).map(|n| g_at(n, half, len)).collect()
        };
        let sum: f64 = g.iter().sum();
        Self { g: g.into_iter().map(|x| x / sum).collect(), half_size: half, base_t: half as f64 / 2.0 + 1.0 }
    }

    /// Kernel for a sample axis of odd length `M = 2N + 1`.
    pub fn for_axis(len: usize) -> Self {
        Self::new((len.max(1) - 1) / 2, len)
    }

    /// `d^order/dτ^order K(τ)`, evaluated from the Fourier sum so that `τ = 0`
    /// needs no special casing. Odd orders of this even kernel are real too.
    pub fn eval(&self, tau: f64, order: u32) -> f64 {
        let h = self.half_size as i64;
        let mut s = 0.0;
        for (i, &g) in self.g.iter().enumerate() {
            let n = (i as i64 - h) as f64;
            let w = 2.0 * PI * n;
            let arg = w * tau;
            // Re[(j w)^order e^{j arg}]
            let term = match order % 4 {
                0 => arg.cos(),
                1 => -arg.sin(),
                2 => -arg.cos(),
                _ => arg.sin(),
            };
            s += g * w.powi(order as i32) * term;
        }
        s
    }

    /// `√|K''(0)|`, the curvature scale used to normalize derivative rows.
    pub fn kappa(&self) -> f64 {
        self.eval(0.0, 2).abs().sqrt()
    }
}

/// 1-D kernel `K_N` (or a derivative of order up to 4) for `M = 2N + 1`.
pub fn fejer_sq_kernel(tau: f64, half: usize, order: u32) -> Result<f64> {
    if order > 4 {
        return Err(Error::Param(format!("kernel derivative order {order} > 4")));
    }
    Ok(KernelTable::new(half, 2 * half + 1).eval(tau, order))
}

/// Per-axis kernels `(delay, Doppler, DoA)` for the given dimensions.
pub fn axis_tables(dims: &ProblemDims) -> [KernelTable; 3] {
    [KernelTable::for_axis(dims.m), KernelTable::for_axis(dims.p), KernelTable::for_axis(dims.nr)]
}

/// Separable 3-D kernel `K(r) = K_M(τ) K_P(ν) K_{N_r}(β)` or a mixed partial
/// derivative of orders `(a, b, c)`, each at most 3.
pub fn kernel3d(r: [f64; 3], dims: &ProblemDims, orders: [u32; 3]) -> Result<f64> {
    if orders.iter().any(|&o| o > 3) {
        return Err(Error::Param(format!("kernel3d orders {orders:?} exceed 3")));
    }
    let t = axis_tables(dims);
    Ok((0..3).map(|k| t[k].eval(r[k], orders[k])).product())
}

/// The classical closed form `(sin(Tπτ) / (T sin(πτ)))⁴`.
pub fn fejer_closed(tau: f64, t: f64) -> f64 {
    let s = (PI * tau).sin();
    if s.abs() < 1e-12 {
        return 1.0;
    }
    ((t * PI * tau).sin() / (t * s)).powi(4)
}

/// Fourier coefficients of [`fejer_closed`] for integer `T`, over
/// `n ∈ [-2(T-1), 2(T-1)]`: the self-convolution of the triangle
/// `(1 - |k|/T)/T` on `|k| < T`.
pub fn fejer_closed_coefficients(t: usize) -> Vec<f64> {
    let t = t as i64;
    let tri = |k: i64| if k.abs() < t { (1.0 - k.abs() as f64 / t as f64) / t as f64 } else { 0.0 };
    let w = 2 * (t - 1);
    (-w..=w).map(|n| ((-t + 1)..t).map(|k| tri(k) * tri(n - k)).sum()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g_at_origin_for_three_samples() {
        let g = g_weights(1, 3).unwrap();
        assert!((g[1] - 17.0 / 9.0).abs() < 1e-14);
        assert!((g[0] - 4.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn g_rejects_zero_half_size() {
        assert!(g_weights(0, 1).is_err());
    }

    #[test]
    fn kernel_peak_and_slope() {
        for half in 1..6 {
            assert!((fejer_sq_kernel(0.0, half, 0).unwrap() - 1.0).abs() < 1e-12);
            assert!(fejer_sq_kernel(0.0, half, 1).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn order_above_four_rejected() {
        assert!(fejer_sq_kernel(0.1, 2, 5).is_err());
        let d = ProblemDims::new(3, 3, 3, 1, 1, 1).unwrap();
        assert!(kernel3d([0.0; 3], &d, [4, 0, 0]).is_err());
    }
}
