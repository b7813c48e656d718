use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{ExpandingMapSpec, InvariantDensity};
use crate::error::{Error, Result};
use crate::measures::{convex_sum, exp_map, push_forward, CircleMeasure, TangentField};
use crate::operators::{apply_derivative_field, apply_ld_fourier, DERIVATIVE_MEAN_TOL};
use crate::transport::wasserstein;

use super::report::{Check, SlopeReport};
#[cfg(test)]
use super::report::Verdict;

/// Slope separating `o(t)` from linear decay.
pub const SUPERLINEAR_SLOPE: f64 = 1.3;

/// Grid on which `𝓛 v` is tabulated when no closed form is available.
pub const DERIVATIVE_GRID: usize = 1 << 14;

fn check_t_list(t_list: &[f64]) -> Result<()> {
    if t_list.len() < 4 {
        return Err(Error::Domain(format!("need at least 4 values of t, got {}", t_list.len())));
    }
    if let Some(t) = t_list.iter().find(|&&t| !(t > 0.0 && t <= 0.2)) {
        return Err(Error::Domain(format!("t = {t} outside (0, 0.2]")));
    }
    let hi = t_list.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = t_list.iter().copied().fold(f64::INFINITY, f64::min);
    if hi / lo < 100.0 * (1.0 - 1e-12) {
        return Err(Error::Domain(format!("t range [{lo}, {hi}] spans less than 2 decades")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivativeReport {
    /// `W_2(Φ_#(ρλ + t v), ρλ + t 𝓛v)`.
    pub main: SlopeReport,
    /// `W_2(ρλ + t v, ρλ)`.
    pub control: SlopeReport,
    /// `‖𝓛v‖` in `L²(λ)`.
    pub derivative_norm: f64,
    pub resolution: usize,
}

impl Check for DerivativeReport {
    fn passes(&self) -> bool {
        self.main.passes() && self.control.passes()
    }
}

/// `𝓛 v` as a tangent field; exact on Fourier data in the model case.
pub fn derivative_field(map: &ExpandingMapSpec, rho: &InvariantDensity, v: &TangentField) -> Result<TangentField> {
    let uniform = rho.samples.iter().all(|&s| s == 1.0);
    if let (true, true, Some(f)) = (map.is_model(), uniform, &v.fourier) {
        return Ok(TangentField::from_fourier(apply_ld_fourier(f, map.degree())?, v.grid_len()));
    }
    let m = v.grid_len().max(DERIVATIVE_GRID);
    Ok(TangentField::from_samples(apply_derivative_field(map, rho, v, m)?))
}

/// Certifies `W(Φ_#(ρλ + t v), ρλ + t 𝓛v) = o(t)` by a log-log slope.
pub fn derivative_slope_check(
    map: &ExpandingMapSpec,
    rho: &InvariantDensity,
    v: &TangentField,
    t_list: &[f64],
    n: usize,
) -> Result<DerivativeReport> {
    check_t_list(t_list)?;
    if v.lambda_mean.abs() > DERIVATIVE_MEAN_TOL {
        return Err(Error::Domain(format!("field has λ-mean {:e}, expected 0", v.lambda_mean)));
    }
    let lv = derivative_field(map, rho, v)?;
    let base = rho.measure();
    let base_floor = wasserstein(&push_forward(&base, map)?, &base, 2.0, n)?.cost;
    // Halving the grid of both fields bounds their interpolation error.
    let v_coarse = v.resampled((v.grid_len() / 2).max(1));
    let lv_coarse = lv.resampled((lv.grid_len() / 2).max(1));
    let rows: Vec<(f64, f64, f64, f64)> = t_list
        .par_iter()
        .map(|&t| -> Result<(f64, f64, f64, f64)> {
            let moved = exp_map(&base, v, t)?;
            let lhs = push_forward(&moved, map)?;
            let rhs = exp_map(&base, &lv, t)?;
            let main = wasserstein(&lhs, &rhs, 2.0, n)?.cost;
            let control = wasserstein(&moved, &base, 2.0, n)?.cost;
            let floor = base_floor
                + wasserstein(&lhs, &push_forward(&exp_map(&base, &v_coarse, t)?, map)?, 2.0, n)?.cost
                + wasserstein(&rhs, &exp_map(&base, &lv_coarse, t)?, 2.0, n)?.cost;
            Ok((t, main, control, floor))
        })
        .collect::<Result<_>>()?;
    let floors: Vec<f64> = rows.iter().map(|r| r.3).collect();
    Ok(DerivativeReport {
        main: SlopeReport::new(rows.iter().map(|r| (r.0, r.1)).collect(), floors.clone(), SUPERLINEAR_SLOPE, None, true),
        control: SlopeReport::new(rows.iter().map(|r| (r.0, r.2)).collect(), floors, 0.9, Some(1.1), false),
        derivative_norm: lv.l2_norm(),
        resolution: n,
    })
}

/// Certifies `W(ρλ + t Σα_i v_i, Σα_i (ρλ + t v_i)) = o(t)`.
pub fn convex_split_check(
    rho: &InvariantDensity,
    fields: &[(f64, TangentField)],
    t_list: &[f64],
    n: usize,
) -> Result<SlopeReport> {
    check_t_list(t_list)?;
    if fields.is_empty() {
        return Err(Error::Domain("no fields given".into()));
    }
    let total: f64 = fields.iter().map(|f| f.0).sum();
    if (total - 1.0).abs() > 1e-12 || fields.iter().any(|f| !(f.0 > 0.0)) {
        return Err(Error::Domain(format!("weights must be positive and sum to 1, got {total}")));
    }
    let mut sum = fields[0].1.scaled(fields[0].0);
    for (a, v) in &fields[1..] {
        sum = sum.axpy(*a, v)?;
    }
    let base = rho.measure();
    let at = |t: f64| -> Result<f64> {
        let lhs = exp_map(&base, &sum, t)?;
        let parts = fields
            .iter()
            .map(|(a, v)| Ok((*a, exp_map(&base, v, t)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(wasserstein(&lhs, &convex_sum(&parts)?, 2.0, n)?.cost)
    };
    let samples: Vec<(f64, f64)> = t_list
        .par_iter()
        .map(|&t| Ok((t, at(t)?)))
        .collect::<Result<_>>()?;
    let floor = at(0.0)?;
    Ok(SlopeReport::with_floor(samples, floor, SUPERLINEAR_SLOPE, None, true))
}

/// One `W_p` evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WassersteinReport {
    pub p: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub cost: f64,
    pub shift: Option<usize>,
}

impl Check for WassersteinReport {
    fn passes(&self) -> bool {
        self.cost.is_finite() && self.cost >= 0.0
    }
}

pub fn wasserstein_report(mu: &CircleMeasure, nu: &CircleMeasure, p: f64, n: usize) -> Result<WassersteinReport> {
    let r = wasserstein(mu, nu, p, n)?;
    Ok(WassersteinReport { p, n, cost: r.cost, shift: r.shift })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSample {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub euclidean: f64,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BilipschitzReport {
    pub pairs: Vec<PairSample>,
    /// Smallest and largest `W_2(E(a), E(b)) / |a − b|` over pairs with `a ≠ b`.
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    /// Smallest singular value of the Gram matrix of the fields in `L²(μ)`.
    pub sigma_min: f64,
    /// `(Σ ‖v_i‖²)^{1/2}` in `L²(μ)`.
    pub norm_bound: f64,
    /// Largest `W_2(E(a), E(a))` over coincident pairs.
    pub coincident_max: f64,
    pub eta: f64,
}

impl BilipschitzReport {
    fn ratios(&self) -> impl Iterator<Item = f64> + '_ {
        self.pairs
            .iter()
            .filter(|p| p.euclidean > 0.0)
            .map(|p| p.distance / p.euclidean)
    }
}

impl Check for BilipschitzReport {
    fn passes(&self) -> bool {
        let lo = self.ratios().fold(f64::INFINITY, f64::min);
        let hi = self.ratios().fold(f64::NEG_INFINITY, f64::max);
        let ratios_ok = self.ratios().next().is_none()
            || (lo >= 0.1 * self.sigma_min && hi <= 2.0 * self.norm_bound);
        ratios_ok && self.coincident_max <= 1e-12
    }
}

/// `count` random pairs in the ball `B^dim(0, eta)`.
pub fn random_ball_pairs(dim: usize, eta: f64, count: usize, seed: u64) -> Vec<(Vec<f64>, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let point = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        let g: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        let r = eta * rng.random::<f64>().powf(1.0 / dim as f64);
        g.iter().map(|x| x * r / norm).collect()
    };
    (0..count).map(|_| (point(&mut rng), point(&mut rng))).collect()
}

/// Empirical bi-Lipschitz constants of `E(a) = μ + Σ a_i v_i`.
pub fn bilipschitz_check(
    mu: &CircleMeasure,
    fields: &[TangentField],
    eta: f64,
    pairs: &[(Vec<f64>, Vec<f64>)],
    n: usize,
) -> Result<BilipschitzReport> {
    if fields.is_empty() {
        return Err(Error::Domain("no fields given".into()));
    }
    if !mu.atomic.is_empty() {
        return Err(Error::Domain("bi-Lipschitz check needs an atomless measure".into()));
    }
    let dim = fields.len();
    let grid = fields[0].grid_len();
    if let Some((a, b)) = pairs.iter().find(|(a, b)| a.len() != dim || b.len() != dim) {
        return Err(Error::Domain(format!("pair of lengths {}/{} for {dim} fields", a.len(), b.len())));
    }
    let radius = |a: &[f64]| a.iter().map(|x| x * x).sum::<f64>().sqrt();
    if let Some((a, b)) = pairs.iter().find(|(a, b)| radius(a) > eta * (1.0 + 1e-12) || radius(b) > eta * (1.0 + 1e-12)) {
        return Err(Error::Domain(format!("pair ({a:?}, {b:?}) leaves the ball of radius {eta}")));
    }
    let field_at = |a: &[f64]| -> Result<TangentField> {
        let mut s = TangentField::zero(grid);
        for (ai, v) in a.iter().zip(fields) {
            s = s.axpy(*ai, v)?;
        }
        Ok(s)
    };
    let pairs_out: Vec<PairSample> = pairs
        .par_iter()
        .map(|(a, b)| -> Result<PairSample> {
            let ea = exp_map(mu, &field_at(a)?, 1.0)?;
            let eb = exp_map(mu, &field_at(b)?, 1.0)?;
            let euclidean = radius(&a.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<_>>());
            Ok(PairSample {
                a: a.clone(),
                b: b.clone(),
                euclidean,
                distance: wasserstein(&ea, &eb, 2.0, n)?.cost,
            })
        })
        .collect::<Result<_>>()?;

    // Gram matrix in L²(μ) by the midpoint rule on the field grid.
    let m = grid.max(4096);
    let xs: Vec<f64> = (0..m).map(|j| (j as f64 + 0.5) / m as f64).collect();
    let dens: Vec<f64> = xs.iter().map(|&x| mu.density.eval(x)).collect();
    let vals: Vec<Vec<f64>> = fields.iter().map(|v| xs.iter().map(|&x| v.eval(x)).collect()).collect();
    let gram = DMatrix::from_fn(dim, dim, |i, j| {
        vals[i].iter().zip(&vals[j]).zip(&dens).map(|((a, b), r)| a * b * r).sum::<f64>() / m as f64
    });
    let sigma_min = SymmetricEigen::new(gram.clone())
        .eigenvalues
        .iter()
        .map(|e| e.abs())
        .fold(f64::INFINITY, f64::min);
    let norm_bound = gram.diagonal().sum().sqrt();

    let mut report = BilipschitzReport {
        lower: None,
        upper: None,
        sigma_min,
        norm_bound,
        coincident_max: pairs_out
            .iter()
            .filter(|p| p.euclidean == 0.0)
            .map(|p| p.distance)
            .fold(0.0, f64::max),
        eta,
        pairs: pairs_out,
    };
    if report.ratios().next().is_some() {
        report.lower = Some(report.ratios().fold(f64::INFINITY, f64::min));
        report.upper = Some(report.ratios().fold(f64::NEG_INFINITY, f64::max));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier::FourierField;

    #[test]
    fn t_list_validation() {
        assert!(check_t_list(&[1e-1, 1e-2, 1e-3]).is_err());
        assert!(check_t_list(&[1e-1, 5e-2, 3e-2, 2e-2]).is_err());
        assert!(check_t_list(&[0.3, 1e-2, 1e-3, 1e-4]).is_err());
        assert!(check_t_list(&[1e-1, 1e-2, 1e-3, 1e-4]).is_ok());
    }

    #[test]
    fn single_field_split_is_zero() {
        let rho = InvariantDensity::uniform(256);
        let v = TangentField::from_fourier(FourierField::cos_mode(1), 1024);
        let r = convex_split_check(&rho, &[(1.0, v)], &[1e-1, 1e-2, 1e-3, 1e-4], 1024).unwrap();
        assert!(r.is_within_floor());
        assert_eq!(r.verdict, Verdict::Pass);
    }

    #[test]
    fn ball_pairs_stay_inside() {
        let pairs = random_ball_pairs(3, 0.01, 20, 7);
        assert_eq!(pairs, random_ball_pairs(3, 0.01, 20, 7));
        for (a, b) in pairs {
            assert!(a.iter().map(|x| x * x).sum::<f64>().sqrt() <= 0.01);
            assert!(b.iter().map(|x| x * x).sum::<f64>().sqrt() <= 0.01);
        }
    }
}
