use std::f64::consts::PI;

use rustfft::num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::fourier::{spectral_derivative, FourierField, TrigInterpolant};
use crate::numeric::{compensated_sum, grid_mean, periodic_lerp, wrap_unit, NeumaierSum};

use super::push::PiecewiseAffineMap;

/// Mean-zero tolerance for membership in `L²₀`.
pub const MEAN_ZERO_TOL: f64 = 1e-10;

/// One affine piece of a (possibly discontinuous) field on `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffinePiece {
    pub start: f64,
    pub end: f64,
    pub left: f64,
    pub right: f64,
}

impl AffinePiece {
    #[inline]
    pub fn slope(&self) -> f64 {
        (self.right - self.left) / (self.end - self.start)
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        self.left + (self.right - self.left) * (x - self.start) / (self.end - self.start)
    }
}

/// Contiguous affine pieces covering `[0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseAffine {
    pub pieces: Vec<AffinePiece>,
}

impl PiecewiseAffine {
    pub fn new(pieces: Vec<AffinePiece>) -> Result<Self> {
        if pieces.is_empty() || pieces[0].start != 0.0 {
            return Err(Error::Invalid("pieces must start at 0".into()));
        }
        for w in pieces.windows(2) {
            if w[0].end != w[1].start {
                return Err(Error::Invalid(format!(
                    "pieces not contiguous at {} / {}",
                    w[0].end, w[1].start
                )));
            }
        }
        if pieces.iter().any(|p| !(p.end > p.start)) {
            return Err(Error::Invalid("empty affine piece".into()));
        }
        if (pieces[pieces.len() - 1].end - 1.0).abs() > 1e-15 {
            return Err(Error::Invalid("pieces must end at 1".into()));
        }
        Ok(Self { pieces })
    }

    fn locate(&self, x: f64) -> &AffinePiece {
        let i = self
            .pieces
            .partition_point(|p| p.start <= x)
            .saturating_sub(1);
        &self.pieces[i]
    }

    pub fn eval(&self, x: f64) -> f64 {
        let x = wrap_unit(x);
        self.locate(x).eval(x)
    }

    pub fn slope_at(&self, x: f64) -> f64 {
        self.locate(wrap_unit(x)).slope()
    }

    pub fn mean(&self) -> f64 {
        compensated_sum(
            self.pieces
                .iter()
                .map(|p| 0.5 * (p.end - p.start) * (p.left + p.right)),
        )
    }

    pub fn l2_norm_sq(&self) -> f64 {
        compensated_sum(self.pieces.iter().map(|p| {
            (p.end - p.start) * (p.left * p.left + p.left * p.right + p.right * p.right) / 3.0
        }))
    }

    /// Exact Fourier coefficients `(a_k, b_k)` for `k = 1..=kmax`.
    pub fn fourier(&self, kmax: usize) -> FourierField {
        let mut f = FourierField::zeros(kmax);
        for k in 1..=kmax {
            let w = 2.0 * PI * k as f64;
            let mut re = NeumaierSum::new();
            let mut im = NeumaierSum::new();
            for p in &self.pieces {
                let s = p.slope();
                let prim = |x: f64, vx: f64| -> C64 {
                    // ∫ v e^{-iwx} dx = v e^{-iwx}/(-iw) + s e^{-iwx}/w²
                    let th = w * (x - x.floor());
                    let e = C64::new(th.cos(), -th.sin());
                    e * C64::new(0.0, vx / w) + e * (s / (w * w))
                };
                let z = prim(p.end, p.right) - prim(p.start, p.left);
                re.add(z.re);
                im.add(z.im);
            }
            f.cos[k - 1] = 2.0 * re.value();
            f.sin[k - 1] = -2.0 * im.value();
        }
        f
    }

    pub fn shifted(&self, c: f64) -> Self {
        Self {
            pieces: self
                .pieces
                .iter()
                .map(|p| AffinePiece {
                    left: p.left + c,
                    right: p.right + c,
                    ..*p
                })
                .collect(),
        }
    }
}

/// A vector field on the circle.
///
/// Always carries samples on the grid `{j / N}`; optionally an exact
/// trigonometric or piecewise-affine description that takes precedence
/// for evaluation.
#[derive(Debug, Clone)]
pub struct TangentField {
    pub samples: Vec<f64>,
    pub fourier: Option<FourierField>,
    pub pieces: Option<PiecewiseAffine>,
    pub lambda_mean: f64,
}

impl TangentField {
    pub fn from_fourier(f: FourierField, n: usize) -> Self {
        Self {
            samples: f.sample(n),
            fourier: Some(f),
            pieces: None,
            lambda_mean: 0.0,
        }
    }

    pub fn from_samples(samples: Vec<f64>) -> Self {
        let lambda_mean = grid_mean(&samples);
        Self {
            samples,
            fourier: None,
            pieces: None,
            lambda_mean,
        }
    }

    pub fn from_pieces(p: PiecewiseAffine, n: usize) -> Self {
        let samples = (0..n).map(|j| p.eval(j as f64 / n as f64)).collect();
        let lambda_mean = p.mean();
        Self {
            samples,
            fourier: None,
            pieces: Some(p),
            lambda_mean,
        }
    }

    pub fn zero(n: usize) -> Self {
        Self::from_fourier(FourierField::default(), n)
    }

    pub fn grid_len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_mean_zero(&self) -> bool {
        self.lambda_mean.abs() <= MEAN_ZERO_TOL
    }

    pub fn eval(&self, x: f64) -> f64 {
        if let Some(f) = &self.fourier {
            f.eval(x)
        } else if let Some(p) = &self.pieces {
            p.eval(x)
        } else {
            periodic_lerp(&self.samples, x)
        }
    }

    pub fn derivative_at(&self, x: f64) -> f64 {
        if let Some(f) = &self.fourier {
            f.derivative_at(x)
        } else if let Some(p) = &self.pieces {
            p.slope_at(x)
        } else {
            let n = self.samples.len();
            let s = wrap_unit(x) * n as f64;
            let j = (s.floor() as usize).min(n - 1);
            (self.samples[(j + 1) % n] - self.samples[j]) * n as f64
        }
    }

    /// `v′` on the grid: exact for trig and affine data, centered differences otherwise.
    pub fn derivative_samples(&self) -> Vec<f64> {
        let n = self.samples.len();
        if let Some(f) = &self.fourier {
            return f.derivative().sample(n);
        }
        if let Some(p) = &self.pieces {
            return (0..n).map(|j| p.slope_at(j as f64 / n as f64)).collect();
        }
        (0..n)
            .map(|j| {
                (self.samples[(j + 1) % n] - self.samples[(j + n - 1) % n]) * n as f64 / 2.0
            })
            .collect()
    }

    /// Spectral derivative of the grid samples.
    pub fn spectral_derivative_samples(&self) -> Vec<f64> {
        spectral_derivative(&self.samples)
    }

    /// Smallest value of `v′` seen by the displacement map at its nodes.
    pub fn min_derivative(&self) -> f64 {
        if let Some(p) = &self.pieces {
            return p.pieces.iter().map(|q| q.slope()).fold(f64::INFINITY, f64::min);
        }
        if self.fourier.is_some() {
            return self
                .derivative_samples()
                .into_iter()
                .fold(f64::INFINITY, f64::min);
        }
        let n = self.samples.len();
        (0..n)
            .map(|j| (self.samples[(j + 1) % n] - self.samples[j]) * n as f64)
            .fold(f64::INFINITY, f64::min)
    }

    /// Location and value of `1 + t v′` at its minimum over the displacement cells.
    pub fn min_jacobian(&self, t: f64) -> (f64, f64) {
        let n = self.samples.len();
        let mut best = (0.0, f64::INFINITY);
        if let Some(p) = &self.pieces {
            for q in &p.pieces {
                let j = 1.0 + t * q.slope();
                if j < best.1 {
                    best = (q.start, j);
                }
            }
            return best;
        }
        let d = self.derivative_samples();
        for (j, dv) in d.iter().enumerate() {
            let jac = 1.0 + t * dv;
            if jac < best.1 {
                best = (j as f64 / n as f64, jac);
            }
        }
        if self.fourier.is_none() {
            for j in 0..n {
                let jac = 1.0 + t * (self.samples[(j + 1) % n] - self.samples[j]) * n as f64;
                if jac < best.1 {
                    best = (j as f64 / n as f64, jac);
                }
            }
        }
        best
    }

    /// `‖v‖` in `L²(λ)`.
    pub fn l2_norm(&self) -> f64 {
        if let Some(f) = &self.fourier {
            f.l2_norm()
        } else if let Some(p) = &self.pieces {
            p.l2_norm_sq().sqrt()
        } else {
            grid_mean(&self.samples.iter().map(|x| x * x).collect::<Vec<_>>()).sqrt()
        }
    }

    /// Fourier coefficients up to `kmax`; exact for trig and affine data.
    pub fn fourier_coefficients(&self, kmax: usize) -> FourierField {
        if let Some(f) = &self.fourier {
            let mut g = FourierField::zeros(kmax);
            for k in 1..=kmax {
                let (a, b) = f.coefficient(k);
                g.cos[k - 1] = a;
                g.sin[k - 1] = b;
            }
            g
        } else if let Some(p) = &self.pieces {
            p.fourier(kmax)
        } else {
            let t = TrigInterpolant::new(&self.samples);
            let mut g = FourierField::zeros(kmax);
            for k in 1..=kmax {
                let (a, b) = t.field.coefficient(k);
                g.cos[k - 1] = a;
                g.sin[k - 1] = b;
            }
            g
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            samples: self.samples.iter().map(|x| x * s).collect(),
            fourier: self.fourier.as_ref().map(|f| f.scale(s)),
            pieces: self.pieces.as_ref().map(|p| PiecewiseAffine {
                pieces: p
                    .pieces
                    .iter()
                    .map(|q| AffinePiece {
                        left: q.left * s,
                        right: q.right * s,
                        ..*q
                    })
                    .collect(),
            }),
            lambda_mean: self.lambda_mean * s,
        }
    }

    /// `self + s * other`; keeps the trig description when both have one.
    pub fn axpy(&self, s: f64, other: &Self) -> Result<Self> {
        if self.grid_len() != other.grid_len() {
            return Err(Error::Invalid(format!(
                "grid sizes differ: {} vs {}",
                self.grid_len(),
                other.grid_len()
            )));
        }
        if let (Some(f), Some(g)) = (&self.fourier, &other.fourier) {
            return Ok(Self::from_fourier(f.axpy(s, g), self.grid_len()));
        }
        let samples: Vec<f64> = self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| a + s * b)
            .collect();
        Ok(Self {
            samples,
            fourier: None,
            pieces: None,
            lambda_mean: self.lambda_mean + s * other.lambda_mean,
        })
    }

    /// `Id + t v` as a piecewise-affine circle map.
    ///
    /// Exact for piecewise-affine fields; otherwise interpolates the exact
    /// displacement between the grid nodes.
    /// The same field on a grid of `m` nodes; exact data is kept, bare samples
    /// are reinterpolated.
    pub fn resampled(&self, m: usize) -> Self {
        if let Some(p) = &self.pieces {
            return Self::from_pieces(p.clone(), m);
        }
        if let Some(f) = &self.fourier {
            return Self::from_fourier(f.clone(), m);
        }
        Self::from_samples((0..m).map(|j| periodic_lerp(&self.samples, j as f64 / m as f64)).collect())
    }

    pub fn displacement(&self, t: f64) -> PiecewiseAffineMap {
        if let Some(p) = &self.pieces {
            let cells = p
                .pieces
                .iter()
                .map(|q| (q.start, q.end, q.start + t * q.left, q.end + t * q.right))
                .collect();
            return PiecewiseAffineMap::new_unchecked(cells);
        }
        let n = self.grid_len();
        let ys: Vec<f64> = (0..n).map(|j| j as f64 / n as f64 + t * self.samples[j]).collect();
        let cells = (0..n)
            .map(|j| {
                let a = j as f64 / n as f64;
                let b = (j + 1) as f64 / n as f64;
                let yb = if j + 1 == n { ys[0] + 1.0 } else { ys[j + 1] };
                (a, b, ys[j], yb)
            })
            .collect();
        PiecewiseAffineMap::new_unchecked(cells)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tent() -> PiecewiseAffine {
        PiecewiseAffine::new(vec![
            AffinePiece { start: 0.0, end: 0.5, left: 0.25, right: -0.25 },
            AffinePiece { start: 0.5, end: 1.0, left: -0.25, right: 0.25 },
        ])
        .unwrap()
    }

    #[test]
    fn piecewise_norms_are_exact() {
        let p = tent();
        assert!(p.mean().abs() < 1e-17);
        // ∫ (1/4 - x)^2 over [0, 1/2] twice = 1/48
        assert!((p.l2_norm_sq() - 1.0 / 48.0).abs() < 1e-16);
    }

    #[test]
    fn piecewise_fourier_matches_quadrature() {
        let p = tent();
        let f = p.fourier(6);
        let m = 1 << 14;
        for k in 1..=6 {
            let mut a = 0.0;
            let mut b = 0.0;
            for j in 0..m {
                let x = (j as f64 + 0.5) / m as f64;
                a += 2.0 * p.eval(x) * (2.0 * PI * k as f64 * x).cos() / m as f64;
                b += 2.0 * p.eval(x) * (2.0 * PI * k as f64 * x).sin() / m as f64;
            }
            let (ea, eb) = f.coefficient(k);
            assert!((a - ea).abs() < 1e-8, "k={k}: {a} vs {ea}");
            assert!((b - eb).abs() < 1e-8, "k={k}: {b} vs {eb}");
        }
    }

    #[test]
    fn fourier_field_samples_agree() {
        let f = FourierField::new(vec![0.5, 0.0, 0.1], vec![0.0, -0.3]);
        let v = TangentField::from_fourier(f.clone(), 256);
        for (j, s) in v.samples.iter().enumerate() {
            assert!((s - f.eval(j as f64 / 256.0)).abs() < 1e-10);
        }
        assert!(v.is_mean_zero());
    }

    #[test]
    fn displacement_wraps_last_cell() {
        let v = TangentField::from_fourier(FourierField::cos_mode(1), 8);
        let m = v.displacement(0.1);
        let last = m.cells.last().unwrap();
        assert!((last.3 - (1.0 + 0.1)).abs() < 1e-15);
    }
}
