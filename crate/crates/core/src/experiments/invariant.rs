use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{ExpandingMapSpec, InvariantDensity};
use crate::error::{Error, Result};
use crate::measures::{exp_map, push_forward, CircleMeasure, TangentField};
use crate::operators::{
    estimate_rg, fixed_point_residual, general_eigenfunctions, model_eigenfunction, EigenFamily, Field, Parity,
};
use crate::transport::wasserstein;

use super::report::{Check, SlopeReport};

/// Relative residual `‖𝓛v − v‖ / ‖v‖` accepted for an input eigenfield.
pub const EIGEN_RESIDUAL_TOL: f64 = 1e-4;

/// Iterations used for the `R_g` estimate in spectrum reports.
pub const RG_ITERATIONS: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftRow {
    pub a: f64,
    /// `W_2(Φ^k_# F(a), F(a))` for `k = 1..=K`.
    pub drift: Vec<f64>,
    /// `Σ_{ℓ=1}^{k} L^{ℓ−1} W_2(Φ_# F(a), F(a))`.
    pub bound: Vec<f64>,
}

impl DriftRow {
    pub fn within_bound(&self) -> bool {
        self.drift
            .iter()
            .zip(&self.bound)
            .all(|(d, b)| *d <= b * (1.0 + 1e-9) + 1e-15)
    }

    pub fn max_drift(&self) -> f64 {
        self.drift.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NearlyInvariantReport {
    /// `(|a|, W_2(Φ_# F(a), F(a)))`.
    pub distances: SlopeReport,
    /// `(|a|, W_2(Φ_# F(a), F(a)) / |a|)`.
    pub ratios: Vec<(f64, f64)>,
    /// Ratio at the largest `|a|` over the ratio at the smallest.
    pub decrease_factor: f64,
    pub drift: Vec<DriftRow>,
    /// Lipschitz constant `max Φ′` of `Φ_#` used in the bound.
    pub lipschitz: f64,
    pub eps: f64,
    /// Largest sampled `|a|` below which every sampled drift is at most `eps |a|`.
    pub radius: Option<f64>,
    pub residuals: Vec<f64>,
    pub eta: f64,
}

impl Check for NearlyInvariantReport {
    fn passes(&self) -> bool {
        self.distances.passes() && self.drift.iter().all(DriftRow::within_bound)
    }
}

/// `F(a) = ρλ + η Σ a_i v_i` along the diagonal direction `a = |a| (1, …, 1)/√n`.
pub fn family_member(rho: &InvariantDensity, fields: &[TangentField], eta: f64, a: f64) -> Result<CircleMeasure> {
    let c = eta * a / (fields.len() as f64).sqrt();
    let mut w = fields[0].scaled(c);
    for v in &fields[1..] {
        w = w.axpy(c, v)?;
    }
    exp_map(&rho.measure(), &w, 1.0)
}

/// Settings of a nearly-invariant family run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyParams {
    pub eta: f64,
    /// Sampled `|a|`.
    pub a_list: Vec<f64>,
    /// Drift table depth `K`.
    pub k_steps: usize,
    /// Drift tolerance defining the reported radius.
    pub eps: f64,
    /// Grid on which the fields displace mass.
    pub grid: usize,
    /// Transport resolution.
    pub n: usize,
}

/// `W(Φ_# F(a), F(a)) = o(|a|)` and the `K`-step drift table.
///
/// Fields are evaluated pointwise to certify `𝓛 v_i = v_i`, then sampled on
/// `params.grid` to build `F(a)`.
pub fn nearly_invariant_family(
    map: &ExpandingMapSpec,
    rho: &InvariantDensity,
    fields: &[&dyn Field],
    params: &FamilyParams,
) -> Result<NearlyInvariantReport> {
    let FamilyParams { eta, ref a_list, k_steps, eps, grid, n } = *params;
    if fields.is_empty() || fields.len() > 4 {
        return Err(Error::Domain(format!("need 1 to 4 fields, got {}", fields.len())));
    }
    if a_list.len() < 2 || a_list.iter().any(|&a| !(a > 0.0)) {
        return Err(Error::Domain("need at least two positive |a| values".into()));
    }
    if k_steps == 0 {
        return Err(Error::Domain("drift table needs K ≥ 1".into()));
    }
    if grid < 2 {
        return Err(Error::Domain(format!("field grid {grid} is too small")));
    }
    let residuals = fields
        .iter()
        .map(|v| fixed_point_residual(map, rho, *v))
        .collect::<Result<Vec<_>>>()?;
    if let Some((i, r)) = residuals.iter().enumerate().find(|(_, &r)| !(r <= EIGEN_RESIDUAL_TOL)) {
        return Err(Error::Domain(format!("field {i} is not fixed by 𝓛: relative residual {r:e}")));
    }
    let fields: Vec<TangentField> = fields
        .iter()
        .map(|v| TangentField::from_samples(v.sample(grid)))
        .collect();
    let lipschitz = map.max_derivative();
    let rows: Vec<(f64, f64, DriftRow)> = a_list
        .par_iter()
        .map(|&a| -> Result<(f64, f64, DriftRow)> {
            let f = family_member(rho, &fields, eta, a)?;
            let mut cur = f.clone();
            let mut drift = Vec::with_capacity(k_steps);
            for _ in 0..k_steps {
                cur = push_forward(&cur, map)?;
                drift.push(wasserstein(&cur, &f, 2.0, n)?.cost);
            }
            let one = drift[0];
            let bound = (1..=k_steps)
                .map(|k| (1..=k).map(|l| lipschitz.powi(l as i32 - 1)).sum::<f64>() * one)
                .collect();
            Ok((a, one, DriftRow { a, drift, bound }))
        })
        .collect::<Result<_>>()?;
    let floor = {
        let base = rho.measure();
        wasserstein(&push_forward(&base, map)?, &base, 2.0, n)?.cost
    };
    let distances = SlopeReport::with_floor(rows.iter().map(|r| (r.0, r.1)).collect(), floor, 1.2, None, false);
    let ratios: Vec<(f64, f64)> = distances.samples.iter().map(|&(a, d)| (a, d / a)).collect();
    let decrease_factor = ratios[0].1 / ratios[ratios.len() - 1].1;
    let mut drift: Vec<DriftRow> = rows.into_iter().map(|r| r.2).collect();
    drift.sort_by(|x, y| y.a.total_cmp(&x.a));
    let mut radius = None;
    for row in drift.iter().rev() {
        if row.max_drift() <= eps * row.a {
            radius = Some(row.a);
        } else {
            break;
        }
    }
    Ok(NearlyInvariantReport {
        distances,
        ratios,
        decrease_factor,
        drift,
        lipschitz,
        eps,
        radius,
        residuals,
        eta,
    })
}

/// `Σ_{ℓ=0}^{L} d^{−ℓ} c_{k0 d^ℓ}` (or sines) with the largest `L` such that
/// `k0 d^L ≤ kmax`.
pub fn lacunary_field(d: usize, k0: usize, kmax: usize, parity: Parity) -> Result<crate::fourier::FourierField> {
    let mut l = 0;
    while k0 * d.pow(l as u32 + 1) <= kmax {
        l += 1;
    }
    model_eigenfunction(d, 1.0, k0, l, kmax, parity)
}

/// `‖P v‖ / ‖v‖` for the `L²(λ)` projection of grid samples onto the span of
/// the lacunary fields with seeds `k0 ≤ max_seed`, `d ∤ k0`, truncated at `n/8`.
pub fn lacunary_overlap(samples: &[f64], d: usize, max_seed: usize) -> Result<f64> {
    let n = samples.len();
    let kmax = n / 8;
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for k0 in (1..=max_seed.min(kmax)).filter(|k| k % d != 0) {
        for parity in [Parity::Cos, Parity::Sin] {
            basis.push(lacunary_field(d, k0, kmax, parity)?.sample(n));
        }
    }
    if basis.is_empty() {
        return Err(Error::Domain(format!("no lacunary seeds below {max_seed} on a grid of {n}")));
    }
    let b = DMatrix::from_fn(n, basis.len(), |i, j| basis[j][i]);
    let v = DVector::from_column_slice(samples);
    let gram = b.transpose() * &b;
    let rhs = b.transpose() * &v;
    let coef = gram
        .cholesky()
        .ok_or_else(|| Error::Numeric("lacunary Gram matrix is not positive definite".into()))?
        .solve(&rhs);
    let proj = &b * coef;
    Ok(proj.norm() / v.norm())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSummary {
    pub seed: String,
    pub residual: f64,
    pub lambda_mean: f64,
    pub norm: f64,
    /// Projection onto the lacunary family; model maps only.
    pub overlap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub degree: usize,
    pub epsilon: f64,
    pub min_derivative: f64,
    pub density_residual: f64,
    pub rg: f64,
    pub requested: usize,
    pub truncation: usize,
    pub fields: Vec<FieldSummary>,
    pub gram_determinant: f64,
    pub min_pairwise_determinant: f64,
}

impl Check for SpectrumReport {
    fn passes(&self) -> bool {
        self.fields.len() == self.requested
            && self.fields.iter().all(|f| {
                f.residual <= 1e-4 && f.lambda_mean.abs() <= 1e-8 && f.overlap.is_none_or(|o| o >= 0.99)
            })
            && self.min_pairwise_determinant >= 1e-6
            && self.rg >= self.min_derivative - 0.05
    }
}

/// Eigenfields, their certificates and `R_g` for one map.
pub fn spectrum_report(
    map: &ExpandingMapSpec,
    rho: &InvariantDensity,
    n: usize,
    count: usize,
) -> Result<(SpectrumReport, EigenFamily)> {
    let fam = general_eigenfunctions(map, rho, n, count)?;
    let fields = fam
        .fields
        .iter()
        .map(|f| -> Result<FieldSummary> {
            let overlap = if map.is_model() {
                Some(lacunary_overlap(&f.samples, map.degree(), 4 * count + 8)?)
            } else {
                None
            };
            Ok(FieldSummary {
                seed: f.seed.clone(),
                residual: f.residual,
                lambda_mean: f.lambda_mean,
                norm: f.norm,
                overlap,
            })
        })
        .collect::<Result<_>>()?;
    let report = SpectrumReport {
        degree: map.degree(),
        epsilon: map.epsilon(),
        min_derivative: map.min_derivative(),
        density_residual: rho.residual,
        rg: estimate_rg(map, rho, RG_ITERATIONS)?,
        requested: count,
        truncation: fam.truncation,
        fields,
        gram_determinant: fam.gram_determinant,
        min_pairwise_determinant: fam.min_pairwise_determinant,
    };
    Ok((report, fam))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lacunary_overlap_of_members_is_one() {
        let f = lacunary_field(2, 3, 128, Parity::Sin).unwrap();
        assert!((lacunary_overlap(&f.sample(1024), 2, 5).unwrap() - 1.0).abs() < 1e-12);
        let c2 = crate::fourier::FourierField::cos_mode(2).sample(1024);
        assert!(lacunary_overlap(&c2, 2, 5).unwrap() < 0.9);
    }

    #[test]
    fn non_eigen_fields_are_rejected() {
        let map = ExpandingMapSpec::model(2).unwrap();
        let rho = InvariantDensity::uniform(256);
        let v = crate::fourier::FourierField::cos_mode(1);
        let params = FamilyParams { eta: 1e-2, a_list: vec![1e-1, 1e-2], k_steps: 2, eps: 0.1, grid: 1024, n: 1024 };
        let r = nearly_invariant_family(&map, &rho, &[&v], &params);
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    #[test]
    fn zero_amplitude_is_invariant() {
        let map = ExpandingMapSpec::model(2).unwrap();
        let rho = InvariantDensity::uniform(256);
        let f = model_eigenfunction(2, 1.0, 1, 14, 1 << 14, Parity::Cos).unwrap();
        let v = TangentField::from_fourier(f, 1 << 15);
        let mu = family_member(&rho, &[v], 1e-2, 0.0).unwrap();
        let d = wasserstein(&push_forward(&mu, &map).unwrap(), &mu, 2.0, 4096).unwrap().cost;
        assert!(d < 1e-15);
    }
}
