//! Convolution quadrature on uniform grids.
//!
//! Every memory integral in the crate has the form
//! `I(t_n) = ∫_0^{t_n} k(t_n - s) g(s) ds` with both factors sampled on the
//! same grid. The discrete sum is evaluated through an FFT for long signals
//! and directly for short ones.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

/// Quadrature rule for the convolution integrals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Quadrature {
    /// Composite trapezoid, second order.
    Trapezoid,
    /// Trapezoid plus the leading Euler-Maclaurin endpoint correction
    /// `-dt²/12 [h'(t) - h'(0)]`, fourth order for smooth data.
    #[default]
    EndCorrected,
}

const DIRECT_LIMIT: usize = 96;

/// Discrete causal convolution `s_n = Σ_{j=0}^{n} k_{n-j} g_j` for `n < len`.
pub fn causal_sum(kernel: &[f64], signal: &[f64]) -> Vec<f64> {
    assert_eq!(
        kernel.len(),
        signal.len(),
        "convolution operands differ in length"
    );
    let n = signal.len();
    if n <= DIRECT_LIMIT {
        (0..n)
            .map(|i| (0..=i).map(|j| kernel[i - j] * signal[j]).sum())
            .collect()
    } else {
        causal_sum_fft(kernel, signal)
    }
}

fn causal_sum_fft(kernel: &[f64], signal: &[f64]) -> Vec<f64> {
    let n = signal.len();
    let size = (2 * n - 1).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let forward = planner.plan_fft_forward(size);
    let inverse = planner.plan_fft_inverse(size);

    // Pack both real operands into one complex transform: z = k + i g.
    let mut z: Vec<Complex<f64>> = (0..size)
        .map(|j| {
            if j < n {
                Complex::new(kernel[j], signal[j])
            } else {
                Complex::new(0.0, 0.0)
            }
        })
        .collect();
    forward.process(&mut z);

    let mut product = vec![Complex::new(0.0, 0.0); size];
    for f in 0..size {
        let zf = z[f];
        let zr = z[(size - f) % size].conj();
        let kf = (zf + zr) * 0.5;
        let gf = (zf - zr) * Complex::new(0.0, -0.5);
        product[f] = kf * gf;
    }
    inverse.process(&mut product);

    let scale = 1.0 / size as f64;
    product[..n].iter().map(|c| c.re * scale).collect()
}

/// Second-order finite-difference derivative (central inside, one-sided
/// three-point at the ends).
pub fn derivative(values: &[f64], dt: f64) -> Vec<f64> {
    let n = values.len();
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        2 => {
            let d = (values[1] - values[0]) / dt;
            vec![d, d]
        }
        _ => {
            let mut out = vec![0.0; n];
            out[0] = (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * dt);
            for i in 1..n - 1 {
                out[i] = (values[i + 1] - values[i - 1]) / (2.0 * dt);
            }
            out[n - 1] = (3.0 * values[n - 1] - 4.0 * values[n - 2] + values[n - 3]) / (2.0 * dt);
            out
        }
    }
}

/// Second-order finite-difference second derivative (central inside,
/// four-point one-sided at the ends).
pub fn second_derivative(values: &[f64], dt: f64) -> Vec<f64> {
    let n = values.len();
    assert!(n >= 4, "second derivative needs at least 4 samples");
    let h2 = dt * dt;
    let mut out = vec![0.0; n];
    out[0] = (2.0 * values[0] - 5.0 * values[1] + 4.0 * values[2] - values[3]) / h2;
    for i in 1..n - 1 {
        out[i] = (values[i + 1] - 2.0 * values[i] + values[i - 1]) / h2;
    }
    out[n - 1] =
        (2.0 * values[n - 1] - 5.0 * values[n - 2] + 4.0 * values[n - 3] - values[n - 4]) / h2;
    out
}

/// `∫_0^{t_n} k(t_n - s) g(s) ds` for every grid point.
pub fn convolve(kernel: &[f64], signal: &[f64], dt: f64, rule: Quadrature) -> Vec<f64> {
    if rule == Quadrature::EndCorrected && kernel.len() >= 3 {
        convolve_with_derivative(kernel, &derivative(kernel, dt), signal, dt, rule)
    } else {
        convolve_with_derivative(kernel, &[], signal, dt, rule)
    }
}

/// [`convolve`] with caller-supplied samples of `k'`, used by the endpoint
/// correction. Exact derivatives keep the last samples as accurate as the
/// interior; finite differences lose an order there.
pub fn convolve_with_derivative(
    kernel: &[f64],
    kernel_derivative: &[f64],
    signal: &[f64],
    dt: f64,
    rule: Quadrature,
) -> Vec<f64> {
    let mut out = causal_sum(kernel, signal);
    let (k0, g0) = (kernel[0], signal[0]);
    for (n, v) in out.iter_mut().enumerate() {
        *v = if n == 0 {
            0.0
        } else {
            dt * (*v - 0.5 * kernel[n] * g0 - 0.5 * k0 * signal[n])
        };
    }
    if rule == Quadrature::EndCorrected && kernel.len() >= 3 {
        assert_eq!(
            kernel_derivative.len(),
            kernel.len(),
            "kernel derivative length"
        );
        let dk = kernel_derivative;
        let dg = derivative(signal, dt);
        let c = dt * dt / 12.0;
        for n in 1..out.len() {
            // h(s) = k(t_n - s) g(s)
            let h_end = -dk[0] * signal[n] + k0 * dg[n];
            let h_start = -dk[n] * g0 + kernel[n] * dg[0];
            out[n] -= c * (h_end - h_start);
        }
    }
    out
}
