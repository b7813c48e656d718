use serde::{Deserialize, Serialize};

use crate::dynamics::ExpandingMapSpec;
use crate::error::{Error, Result};
use crate::measures::{exp_map, push_forward, AffinePiece, AtomicPart, CircleMeasure, PiecewiseAffine, StepDensity, TangentField};
use crate::operators::apply_ld_fourier;
use crate::transport::wasserstein;

use super::report::Check;

/// Fourier modes inspected for `𝓛_2 v = 0`.
pub const SAWTOOTH_MODES: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleReport {
    pub k: usize,
    pub l2_norm: f64,
    /// `1/(4k√3)`.
    pub expected_norm: f64,
    /// Largest `|coefficient|` of `𝓛_2 v`.
    pub ld_sup: f64,
    /// `W_2` between the computed `Φ_{2#}(λ + v)` and `½λ + Σ (1/2k) δ_{(i−½)/k}`.
    pub closed_form_distance: f64,
    /// `W_2(λ, Φ_{2#}(λ + v))`.
    pub distance: f64,
    /// `1/(16k)`.
    pub lower_bound: f64,
    /// `distance / ‖v‖₂`, at least `√3/4`.
    pub ratio: f64,
    pub resolution: usize,
}

impl CounterexampleReport {
    pub fn norm_ok(&self) -> bool {
        (self.l2_norm - self.expected_norm).abs() <= 1e-10
    }

    pub fn kernel_ok(&self) -> bool {
        self.ld_sup <= 1e-8
    }

    pub fn closed_form_ok(&self) -> bool {
        self.closed_form_distance <= 1e-6
    }

    pub fn bound_ok(&self) -> bool {
        self.distance >= self.lower_bound
    }

    pub fn ratio_ok(&self) -> bool {
        self.ratio >= 3f64.sqrt() / 4.0
    }
}

impl Check for CounterexampleReport {
    fn passes(&self) -> bool {
        self.norm_ok() && self.kernel_ok() && self.closed_form_ok() && self.bound_ok() && self.ratio_ok()
    }
}

/// The `2k`-piece sawtooth: slope −1 from `1/(4k)` on each of the first `k`
/// cells of width `1/(2k)`, slope +1 from `−1/(4k)` on the last `k`.
pub fn sawtooth(k: usize) -> Result<PiecewiseAffine> {
    if k == 0 {
        return Err(Error::Domain("k must be positive".into()));
    }
    let h = 1.0 / (4 * k) as f64;
    let pieces = (0..2 * k)
        .map(|i| {
            let start = i as f64 / (2 * k) as f64;
            let end = if i + 1 == 2 * k { 1.0 } else { (i + 1) as f64 / (2 * k) as f64 };
            if i < k {
                AffinePiece { start, end, left: h, right: -h }
            } else {
                AffinePiece { start, end, left: -h, right: h }
            }
        })
        .collect();
    PiecewiseAffine::new(pieces)
}

/// `½λ + Σ_{i=1}^{k} (1/2k) δ_{(i−½)/k}`.
pub fn sawtooth_image(k: usize) -> Result<CircleMeasure> {
    let w = 1.0 / (2 * k) as f64;
    let atoms = AtomicPart::from_raw((1..=k).map(|i| ((i as f64 - 0.5) / k as f64, w)));
    CircleMeasure::new(atoms, StepDensity::uniform().scaled(0.5))
}

/// A field with `𝓛_2 v = 0` and `‖v‖₂ → 0` whose push-forward stays
/// `~‖v‖₂` away from `λ`.
pub fn non_frechet_counterexample(k: usize, n: usize) -> Result<CounterexampleReport> {
    if k < 2 {
        return Err(Error::Domain(format!("k = {k} must be at least 2")));
    }
    let v = sawtooth(k)?;
    let l2_norm = v.l2_norm_sq().sqrt();
    let coeffs = v.fourier(SAWTOOTH_MODES);
    let ld = apply_ld_fourier(&coeffs, 2)?;
    let ld_sup = ld.cos.iter().chain(&ld.sin).fold(0.0f64, |m, c| m.max(c.abs()));
    let field = TangentField::from_pieces(v, 4 * k);
    let map = ExpandingMapSpec::model(2)?;
    let mu = push_forward(&exp_map(&CircleMeasure::lebesgue(), &field, 1.0)?, &map)?;
    let closed_form_distance = wasserstein(&mu, &sawtooth_image(k)?, 2.0, n)?.cost;
    let distance = wasserstein(&CircleMeasure::lebesgue(), &mu, 2.0, n)?.cost;
    Ok(CounterexampleReport {
        k,
        l2_norm,
        expected_norm: 1.0 / (4.0 * k as f64 * 3f64.sqrt()),
        ld_sup,
        closed_form_distance,
        distance,
        lower_bound: 1.0 / (16 * k) as f64,
        ratio: distance / l2_norm,
        resolution: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sawtooth_is_mean_zero_and_antiperiodic() {
        let v = sawtooth(4).unwrap();
        assert!(v.mean().abs() < 1e-17);
        for j in 0..64 {
            let x = j as f64 / 128.0;
            assert!((v.eval(x) + v.eval(x + 0.5)).abs() < 1e-15);
        }
    }

    #[test]
    fn image_mass() {
        let m = sawtooth_image(8).unwrap();
        assert!((m.mass() - 1.0).abs() < 1e-15);
        assert_eq!(m.atomic.len(), 8);
    }
}
