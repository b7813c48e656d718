//! Real trigonometric polynomials on the unit circle.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::numeric::wrap_unit;

const TAU: f64 = 2.0 * PI;

/// `Σ_k a_k cos(2πkx) + b_k sin(2πkx)` for `k = 1..=K`; no constant term.
///
/// `cos[k-1]` and `sin[k-1]` hold the coefficients of frequency `k`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FourierField {
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
}

/// Reduce `k * j / n` to a phase in `[0, 1)` without losing precision.
#[inline]
fn grid_phase(k: usize, j: usize, n: usize) -> f64 {
    ((k as u128 * j as u128) % n as u128) as f64 / n as f64
}

impl FourierField {
    pub fn new(mut cos: Vec<f64>, mut sin: Vec<f64>) -> Self {
        let k = cos.len().max(sin.len());
        cos.resize(k, 0.0);
        sin.resize(k, 0.0);
        Self { cos, sin }
    }

    pub fn zeros(k: usize) -> Self {
        Self::new(vec![0.0; k], vec![0.0; k])
    }

    /// `c_k(x) = cos(2πkx)`.
    pub fn cos_mode(k: usize) -> Self {
        assert!(k >= 1, "frequency must be positive");
        let mut f = Self::zeros(k);
        f.cos[k - 1] = 1.0;
        f
    }

    /// `s_k(x) = sin(2πkx)`.
    pub fn sin_mode(k: usize) -> Self {
        assert!(k >= 1, "frequency must be positive");
        let mut f = Self::zeros(k);
        f.sin[k - 1] = 1.0;
        f
    }

    pub fn max_frequency(&self) -> usize {
        self.cos.len()
    }

    /// Highest frequency with a nonzero coefficient (0 for the zero field).
    pub fn degree(&self) -> usize {
        (1..=self.max_frequency())
            .rev()
            .find(|&k| self.cos[k - 1] != 0.0 || self.sin[k - 1] != 0.0)
            .unwrap_or(0)
    }

    /// `(a_k, b_k)`, zero beyond the stored range.
    pub fn coefficient(&self, k: usize) -> (f64, f64) {
        if k == 0 || k > self.max_frequency() {
            (0.0, 0.0)
        } else {
            (self.cos[k - 1], self.sin[k - 1])
        }
    }

    pub fn set(&mut self, k: usize, a: f64, b: f64) {
        assert!(k >= 1);
        if k > self.max_frequency() {
            self.cos.resize(k, 0.0);
            self.sin.resize(k, 0.0);
        }
        self.cos[k - 1] = a;
        self.sin[k - 1] = b;
    }

    fn nonzero(&self) -> impl Iterator<Item = (usize, f64, f64)> + '_ {
        (1..=self.max_frequency())
            .map(move |k| (k, self.cos[k - 1], self.sin[k - 1]))
            .filter(|&(_, a, b)| a != 0.0 || b != 0.0)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let x = wrap_unit(x);
        self.nonzero()
            .map(|(k, a, b)| {
                let th = TAU * (k as f64 * x).fract();
                a * th.cos() + b * th.sin()
            })
            .sum()
    }

    pub fn derivative_at(&self, x: f64) -> f64 {
        let x = wrap_unit(x);
        self.nonzero()
            .map(|(k, a, b)| {
                let th = TAU * (k as f64 * x).fract();
                TAU * k as f64 * (b * th.cos() - a * th.sin())
            })
            .sum()
    }

    /// Values on the grid `{j / n}`.
    pub fn sample(&self, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n];
        for (k, a, b) in self.nonzero() {
            for (j, o) in out.iter_mut().enumerate() {
                let th = TAU * grid_phase(k, j, n);
                *o += a * th.cos() + b * th.sin();
            }
        }
        out
    }

    pub fn derivative(&self) -> FourierField {
        let mut d = FourierField::zeros(self.max_frequency());
        for (k, a, b) in self.nonzero() {
            let w = TAU * k as f64;
            d.cos[k - 1] = w * b;
            d.sin[k - 1] = -w * a;
        }
        d
    }

    /// `‖v‖₂² = ½ Σ (a_k² + b_k²)` on `L²(λ)`.
    pub fn l2_norm(&self) -> f64 {
        (0.5 * self.cos.iter().chain(&self.sin).map(|c| c * c).sum::<f64>()).sqrt()
    }

    pub fn dot(&self, other: &Self) -> f64 {
        let k = self.max_frequency().min(other.max_frequency());
        0.5 * (0..k)
            .map(|i| self.cos[i] * other.cos[i] + self.sin[i] * other.sin[i])
            .sum::<f64>()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            cos: self.cos.iter().map(|c| c * s).collect(),
            sin: self.sin.iter().map(|c| c * s).collect(),
        }
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: f64, other: &Self) -> Self {
        let k = self.max_frequency().max(other.max_frequency());
        let mut out = Self::zeros(k);
        for i in 1..=k {
            let (a0, b0) = self.coefficient(i);
            let (a1, b1) = other.coefficient(i);
            out.cos[i - 1] = a0 + s * a1;
            out.sin[i - 1] = b0 + s * b1;
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        self.axpy(1.0, other)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.axpy(-1.0, other)
    }

    /// Sup norm bound `Σ |a_k| + |b_k|`.
    pub fn abs_coefficient_sum(&self) -> f64 {
        self.nonzero().map(|(_, a, b)| a.abs() + b.abs()).sum()
    }
}

/// Trigonometric interpolant of real samples on `{j / n}`.
///
/// For even `n` the Nyquist mode carries half weight, so the interpolant is
/// the real part of the symmetric DFT inversion and is exact on the grid.
#[derive(Debug, Clone)]
pub struct TrigInterpolant {
    pub mean: f64,
    pub field: FourierField,
    n: usize,
}

impl TrigInterpolant {
    pub fn new(samples: &[f64]) -> Self {
        let n = samples.len();
        assert!(n >= 1, "need at least one sample");
        let mut buf: Vec<Complex64> = samples.iter().map(|&s| Complex64::new(s, 0.0)).collect();
        let fft: Arc<dyn rustfft::Fft<f64>> = FftPlanner::new().plan_fft_forward(n);
        fft.process(&mut buf);
        let nf = n as f64;
        let half = n / 2;
        let mut field = FourierField::zeros(half);
        for k in 1..=half {
            let c = buf[k];
            if 2 * k == n {
                field.cos[k - 1] = c.re / nf;
            } else {
                field.cos[k - 1] = 2.0 * c.re / nf;
                field.sin[k - 1] = -2.0 * c.im / nf;
            }
        }
        Self {
            mean: buf[0].re / nf,
            field,
            n,
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Dense evaluation by a stable rotation recurrence.
    pub fn eval(&self, x: f64) -> f64 {
        let th = TAU * wrap_unit(x);
        let step = Complex64::new(th.cos(), th.sin());
        let mut z = Complex64::new(1.0, 0.0);
        let mut acc = self.mean;
        for k in 1..=self.field.max_frequency() {
            z *= step;
            // Renormalise periodically so the modulus does not drift.
            if k % 64 == 0 {
                let th_k = TAU * (k as f64 * wrap_unit(x)).fract();
                z = Complex64::new(th_k.cos(), th_k.sin());
            }
            acc += self.field.cos[k - 1] * z.re + self.field.sin[k - 1] * z.im;
        }
        acc
    }

    pub fn derivative_at(&self, x: f64) -> f64 {
        self.field.derivative_at(x)
    }
}

/// Periodic interpolation kernel for `n` equispaced nodes: the cardinal
/// function of the node at 0 evaluated at offset `s`.
pub fn periodic_sinc(n: usize, s: f64) -> f64 {
    let s = s - s.round();
    if s.abs() < 1e-15 {
        return 1.0;
    }
    let nf = n as f64;
    if n % 2 == 0 {
        (PI * nf * s).sin() / (nf * (PI * s).tan())
    } else {
        (PI * nf * s).sin() / (nf * (PI * s).sin())
    }
}

/// Spectral derivative of periodic grid samples.
pub fn spectral_derivative(samples: &[f64]) -> Vec<f64> {
    let n = samples.len();
    let mut d = TrigInterpolant::new(samples).field.derivative();
    if n % 2 == 0 {
        // The half-weighted Nyquist cosine differentiates to a sine that vanishes on the grid.
        let h = n / 2;
        d.cos[h - 1] = 0.0;
        d.sin[h - 1] = 0.0;
    }
    d.sample(n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_evaluate() {
        let c = FourierField::cos_mode(3);
        assert!((c.eval(1.0 / 6.0) + 1.0).abs() < 1e-14);
        let s = FourierField::sin_mode(1);
        assert!((s.eval(0.25) - 1.0).abs() < 1e-15);
        assert!((s.derivative_at(0.0) - TAU).abs() < 1e-12);
    }

    #[test]
    fn norm_matches_grid() {
        let f = FourierField::new(vec![0.3, 0.0, -1.2], vec![0.5, 2.0]);
        let g = f.sample(64);
        let q = (g.iter().map(|x| x * x).sum::<f64>() / 64.0).sqrt();
        assert!((q - f.l2_norm()).abs() < 1e-12);
    }

    #[test]
    fn interpolant_recovers_coefficients() {
        let f = FourierField::new(vec![0.0, 1.0, 0.0, 0.25], vec![0.5, 0.0, -0.75]);
        let s: Vec<f64> = f.sample(32).iter().map(|v| v + 0.125).collect();
        let t = TrigInterpolant::new(&s);
        assert!((t.mean - 0.125).abs() < 1e-14);
        for k in 1..=4 {
            let (a, b) = f.coefficient(k);
            let (a2, b2) = t.field.coefficient(k);
            assert!((a - a2).abs() < 1e-13 && (b - b2).abs() < 1e-13);
        }
        for &x in &[0.013, 0.5, 0.777] {
            assert!((t.eval(x) - f.eval(x) - 0.125).abs() < 1e-12);
        }
    }

    #[test]
    fn sinc_is_cardinal() {
        let n = 16;
        for m in 0..n {
            let s = m as f64 / n as f64;
            let w = periodic_sinc(n, s);
            assert!((w - if m == 0 { 1.0 } else { 0.0 }).abs() < 1e-14);
        }
        // Weights interpolate a smooth mode exactly.
        let f = FourierField::new(vec![0.0, 1.0], vec![0.3]);
        let g = f.sample(n);
        let x = 0.3141;
        let v: f64 = (0..n)
            .map(|m| g[m] * periodic_sinc(n, x - m as f64 / n as f64))
            .sum();
        assert!((v - f.eval(x)).abs() < 1e-13);
    }

    #[test]
    fn spectral_derivative_of_mode() {
        let f = FourierField::cos_mode(5);
        let d = spectral_derivative(&f.sample(64));
        let e = f.derivative().sample(64);
        for (a, b) in d.iter().zip(&e) {
            assert!((a - b).abs() < 1e-10);
        }
    }
}
