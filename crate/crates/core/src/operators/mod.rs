//! The derivative of `Φ_#` at the invariant measure and related operators.
//!
//! `𝓛̃ v(x) = Σ_{Φ(y)=x} ρ(y)/ρ(x) v(y)`, `𝒞 v = v − ∫v / (ρ ∫1/ρ)` and
//! `𝓛 = 𝒞 𝓛̃`; in the model case `ρ ≡ 1` this is `𝓛_d`, acting on Fourier
//! coefficients by `𝓛_d c_{dk} = d c_k`.

mod eigen;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use eigen::{fixed_point_residual, general_eigenfunctions, EigenFamily, EigenField, EIGEN_QUADRATURE};

use crate::dynamics::{eval_map, grid_preimages, inverse_branches, ExpandingMapSpec, InvariantDensity};
use crate::error::{Error, Result};
use crate::fourier::{periodic_sinc, FourierField, TrigInterpolant};
use crate::measures::TangentField;
use crate::numeric::{grid_mean, periodic_cubic, periodic_lerp, wrap_unit};

/// Mean-zero tolerance accepted by [`apply_derivative`].
pub const DERIVATIVE_MEAN_TOL: f64 = 1e-8;

/// Anything that can be evaluated pointwise on the circle.
pub trait Field: Sync {
    fn value(&self, x: f64) -> f64;

    /// Values on the grid `{j / n}`.
    fn sample(&self, n: usize) -> Vec<f64> {
        (0..n).into_par_iter().map(|j| self.value(j as f64 / n as f64)).collect()
    }
}

impl Field for FourierField {
    fn value(&self, x: f64) -> f64 {
        self.eval(x)
    }

    fn sample(&self, n: usize) -> Vec<f64> {
        FourierField::sample(self, n)
    }
}

impl Field for TangentField {
    fn value(&self, x: f64) -> f64 {
        self.eval(x)
    }

    fn sample(&self, n: usize) -> Vec<f64> {
        if n == self.grid_len() {
            self.samples.clone()
        } else {
            (0..n).into_par_iter().map(|j| self.eval(j as f64 / n as f64)).collect()
        }
    }
}

/// A closure viewed as a field.
pub struct FnField<F>(pub F);

impl<F: Fn(f64) -> f64 + Sync> Field for FnField<F> {
    fn value(&self, x: f64) -> f64 {
        (self.0)(x)
    }
}

/// How grid samples are evaluated between nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interpolation {
    Linear,
    Cubic,
    /// Trigonometric interpolation; exact for trig polynomials below Nyquist.
    Spectral,
}

/// Periodic grid samples with an interpolation rule.
#[derive(Debug, Clone)]
pub struct GridField {
    samples: Vec<f64>,
    mode: Interpolation,
    trig: Option<TrigInterpolant>,
}

impl GridField {
    pub fn new(samples: Vec<f64>, mode: Interpolation) -> Self {
        let trig = (mode == Interpolation::Spectral).then(|| TrigInterpolant::new(&samples));
        Self { samples, mode, trig }
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }
}

impl Field for GridField {
    fn value(&self, x: f64) -> f64 {
        match self.mode {
            Interpolation::Linear => periodic_lerp(&self.samples, x),
            Interpolation::Cubic => periodic_cubic(&self.samples, x),
            Interpolation::Spectral => self.trig.as_ref().expect("built with interpolant").eval(x),
        }
    }
}

/// Sine or cosine family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Cos,
    Sin,
}

/// `𝓛_d` on Fourier data: output `a_k = d · a_{dk}`, `b_k = d · b_{dk}`.
pub fn apply_ld_fourier(v: &FourierField, d: usize) -> Result<FourierField> {
    if d < 2 {
        return Err(Error::Domain(format!("degree {d} must be at least 2")));
    }
    let kmax = v.max_frequency() / d;
    let mut out = FourierField::zeros(kmax);
    let df = d as f64;
    for k in 1..=kmax {
        let (a, b) = v.coefficient(d * k);
        out.cos[k - 1] = df * a;
        out.sin[k - 1] = df * b;
    }
    Ok(out)
}

/// `𝓛̃ f (x) = Σ_{Φ(y)=x} ρ(y)/ρ(x) f(y)` at a single point.
pub fn tilde_l_at(map: &ExpandingMapSpec, rho: &InvariantDensity, f: &dyn Field, x: f64) -> Result<f64> {
    let rx = rho.eval(x);
    let ys = inverse_branches(map, x)?;
    Ok(ys.iter().map(|&y| rho.eval(y) * f.value(y)).sum::<f64>() / rx)
}

/// `𝓛̃ v` on the grid `{j / n}`, evaluating `v` pointwise at preimages.
pub fn apply_tilde_l(
    map: &ExpandingMapSpec,
    rho: &InvariantDensity,
    v: &dyn Field,
    n: usize,
) -> Result<Vec<f64>> {
    let pre = grid_preimages(map, n)?;
    let uniform = rho.samples.iter().all(|&s| s == 1.0);
    Ok(pre
        .par_iter()
        .enumerate()
        .map(|(j, ys)| {
            if uniform {
                ys.iter().map(|&(y, _)| v.value(y)).sum::<f64>()
            } else {
                let rx = rho.eval(j as f64 / n as f64);
                ys.iter().map(|&(y, _)| rho.eval(y) * v.value(y)).sum::<f64>() / rx
            }
        })
        .collect())
}

/// `𝓛̃` applied to grid samples, interpolated with `mode`.
pub fn apply_tilde_l_samples(
    map: &ExpandingMapSpec,
    rho: &InvariantDensity,
    v: &[f64],
    mode: Interpolation,
) -> Result<Vec<f64>> {
    let g = GridField::new(v.to_vec(), mode);
    apply_tilde_l(map, rho, &g, v.len())
}

/// `c = ∫v λ / ∫(1/ρ) λ` so that `𝒞 v = v − c/ρ`.
pub fn centering_constant(rho_samples: &[f64], v: &[f64]) -> f64 {
    let inv: Vec<f64> = rho_samples.iter().map(|r| 1.0 / r).collect();
    grid_mean(v) / grid_mean(&inv)
}

/// `𝒞 v = v − ∫v / (ρ ∫ 1/ρ)` on the grid of `v`.
pub fn centering(rho: &InvariantDensity, v: &[f64]) -> Vec<f64> {
    let r = rho.resample(v.len());
    let c = centering_constant(&r, v);
    v.iter().zip(&r).map(|(vi, ri)| vi - c / ri).collect()
}

/// `𝓛 v = 𝒞 𝓛̃ v` for a λ-mean-zero field given by grid samples.
pub fn apply_derivative(
    map: &ExpandingMapSpec,
    rho: &InvariantDensity,
    v: &[f64],
    mode: Interpolation,
) -> Result<Vec<f64>> {
    let m = grid_mean(v);
    if m.abs() > DERIVATIVE_MEAN_TOL {
        return Err(Error::Domain(format!("field has λ-mean {m:e}, expected 0")));
    }
    let lv = apply_tilde_l_samples(map, rho, v, mode)?;
    Ok(centering(rho, &lv))
}

/// `𝓛 v` for a pointwise field, on the grid `{j / n}`.
pub fn apply_derivative_field(
    map: &ExpandingMapSpec,
    rho: &InvariantDensity,
    v: &dyn Field,
    n: usize,
) -> Result<Vec<f64>> {
    let lv = apply_tilde_l(map, rho, v, n)?;
    Ok(centering(rho, &lv))
}

/// `𝓛* u = Φ′ · u∘Φ` on the grid `{j / n}`.
pub fn apply_adjoint(map: &ExpandingMapSpec, u: &dyn Field, n: usize) -> Vec<f64> {
    (0..n)
        .into_par_iter()
        .map(|j| {
            let x = j as f64 / n as f64;
            map.derivative(x) * u.value(eval_map(map, x))
        })
        .collect()
}

/// `⟨f, g⟩` in `L²(ρλ)` by the periodic trapezoid rule.
pub fn inner_rho(rho_samples: &[f64], f: &[f64], g: &[f64]) -> f64 {
    let prod: Vec<f64> = f
        .iter()
        .zip(g)
        .zip(rho_samples)
        .map(|((a, b), r)| a * b * r)
        .collect();
    grid_mean(&prod)
}

/// `Σ_{ℓ=0}^{L} (α/d)^ℓ c_{k0 d^ℓ}` (or the sine analogue).
///
/// `𝓛_d` maps it to `α · out − α (α/d)^L c_{k0 d^L}`.
pub fn model_eigenfunction(
    d: usize,
    alpha: f64,
    k0: usize,
    l: usize,
    k_max: usize,
    parity: Parity,
) -> Result<FourierField> {
    if d < 2 {
        return Err(Error::Domain(format!("degree {d} must be at least 2")));
    }
    if !(alpha.abs() < d as f64) {
        return Err(Error::Domain(format!("|alpha| = {} must be below d = {d}", alpha.abs())));
    }
    if k0 == 0 || k0 % d == 0 {
        return Err(Error::Domain(format!("seed frequency {k0} must be positive and not divisible by {d}")));
    }
    let top = (d as u128).checked_pow(l as u32).and_then(|p| p.checked_mul(k0 as u128));
    match top {
        Some(t) if t <= k_max as u128 => {}
        _ => {
            return Err(Error::Domain(format!(
                "frequency {k0}·{d}^{l} exceeds the limit {k_max}"
            )))
        }
    }
    let top = k0 * d.pow(l as u32);
    let mut f = FourierField::zeros(top);
    let r = alpha / d as f64;
    let mut k = k0;
    let mut w = 1.0;
    for level in 0..=l {
        match parity {
            Parity::Cos => f.cos[k - 1] = w,
            Parity::Sin => f.sin[k - 1] = w,
        }
        if level < l {
            k *= d;
            w *= r;
        }
    }
    Ok(f)
}

/// `(sup_x 𝓛̃ⁿ 1(x))^{1/n}` over a grid of [`RG_GRID`] points, summing over
/// all `dⁿ` preimages exactly.
pub fn estimate_rg(map: &ExpandingMapSpec, rho: &InvariantDensity, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain("iteration count must be at least 1".into()));
    }
    let sup = (0..RG_GRID)
        .into_par_iter()
        .map(|j| -> Result<f64> {
            let x = j as f64 / RG_GRID as f64;
            let mut level = vec![x];
            for _ in 0..n {
                let mut next = Vec::with_capacity(level.len() * map.degree());
                for &z in &level {
                    next.extend(inverse_branches(map, z)?);
                }
                level = next;
            }
            Ok(level.iter().map(|&y| rho.eval(y)).sum::<f64>() / rho.eval(x))
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(sup.powf(1.0 / n as f64))
}

/// Grid used by [`estimate_rg`].
pub const RG_GRID: usize = 512;

/// Dense `N × N` discretization of `𝓛̃` acting on grid samples.
#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    pub n: usize,
    pub entries: DMatrix<f64>,
}

impl OperatorMatrix {
    /// Row `j` holds the interpolation weights of the preimages of `j / N`,
    /// scaled by `ρ(y)/ρ(x)`.
    pub fn tilde_l(map: &ExpandingMapSpec, rho: &InvariantDensity, n: usize, mode: Interpolation) -> Result<Self> {
        if n < 4 {
            return Err(Error::Domain(format!("matrix size {n} too small")));
        }
        if mode == Interpolation::Cubic {
            return Err(Error::Domain("cubic weights are not assembled; use linear or spectral".into()));
        }
        let pre = grid_preimages(map, n)?;
        let rows: Vec<Vec<f64>> = pre
            .par_iter()
            .enumerate()
            .map(|(j, ys)| {
                let mut row = vec![0.0; n];
                let rx = rho.eval(j as f64 / n as f64);
                for &(y, _) in ys {
                    let w = rho.eval(y) / rx;
                    match mode {
                        Interpolation::Spectral => {
                            for (m, r) in row.iter_mut().enumerate() {
                                *r += w * periodic_sinc(n, y - m as f64 / n as f64);
                            }
                        }
                        _ => {
                            let s = wrap_unit(y) * n as f64;
                            let i = (s.floor() as usize).min(n - 1);
                            let f = s - i as f64;
                            row[i] += w * (1.0 - f);
                            row[(i + 1) % n] += w * f;
                        }
                    }
                }
                row
            })
            .collect();
        let entries = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        Ok(Self { n, entries })
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let x = nalgebra::DVector::from_column_slice(v);
        (&self.entries * x).iter().copied().collect()
    }

    /// Applies the matrix to every column of `batch`.
    pub fn apply_batch(&self, batch: &DMatrix<f64>) -> DMatrix<f64> {
        &self.entries * batch
    }

    /// All eigenvalues (complex), from a dense Schur decomposition.
    pub fn eigenvalues(&self) -> Vec<(f64, f64)> {
        self.entries
            .clone()
            .complex_eigenvalues()
            .iter()
            .map(|z| (z.re, z.im))
            .collect()
    }
}
