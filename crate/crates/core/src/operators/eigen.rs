//! Fixed points of `𝓛` for a general expanding map.
//!
//! `K u = (u∘Φ)/Φ′` is a right inverse of `𝓛̃` whenever `ρ` is invariant,
//! and `‖K‖_∞ ≤ 1/min Φ′`. For a trig seed `h`, `g = h − K 𝓛̃ h` lies in
//! `ker 𝓛̃`, so `u = Σ_{ℓ=0}^{L} K^ℓ g` satisfies `𝓛̃ u − u = −K^L g`.
//! λ-means use `∫ K^ℓ g = ∫ g · Q^ℓ 1` with `Q w = Σ_{Φ(y)=x} w(y)/Φ′(y)²`,
//! which only integrates smooth functions.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{eval_map, grid_preimages, inverse_branches, ExpandingMapSpec, InvariantDensity};
use crate::error::{Error, Result};
use crate::fourier::FourierField;
use crate::measures::TangentField;
use crate::numeric::{grid_mean, periodic_cubic};

use super::{tilde_l_at, Field, Parity};

/// Size of the tables and quadrature grids.
pub const EIGEN_QUADRATURE: usize = 1 << 16;

/// Target for the neglected tail `(min Φ′)^{-L}`.
const TAIL_TOL: f64 = 1e-6;

/// Relative residual a returned field must meet.
const RESIDUAL_TOL: f64 = 1e-4;

/// Smallest accepted `1 − cos²` between two returned fields.
const PAIRWISE_DET_TOL: f64 = 1e-6;

/// Irrational offset of the quadrature nodes, avoiding dyadic aliasing of
/// `g ∘ Φ^ℓ` on the grid.
const QUAD_SHIFT: f64 = 0.618_033_988_749_894_8;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EigenField {
    /// Values on `{j / n}`.
    pub samples: Vec<f64>,
    pub lambda_mean: f64,
    /// `‖𝓛v − v‖ / ‖v‖` in `L²(ρλ)`.
    pub residual: f64,
    /// `‖v‖` in `L²(ρλ)`.
    pub norm: f64,
    /// Seeds and weights the field was built from, e.g. `"cos1 - 0.3*sin2"`.
    pub seed: String,
    pub map: ExpandingMapSpec,
    /// Number of `K` powers summed.
    pub truncation: usize,
    /// `g` on the [`EIGEN_QUADRATURE`] grid; empty after deserialization.
    #[serde(skip)]
    pub kernel: Vec<f64>,
}

/// `Σ_{ℓ=0}^{L} g(Φ^ℓ x) / (Φ^ℓ)′(x)`.
fn kernel_eval(map: &ExpandingMapSpec, g: &[f64], l: usize, x: f64) -> f64 {
    let mut z = x;
    let mut w = 1.0;
    let mut acc = 0.0;
    for level in 0..=l {
        acc += w * periodic_cubic(g, z);
        if level < l {
            w /= map.derivative(z);
            z = eval_map(map, z);
        }
    }
    acc
}

/// Exact through the kernel when present, cubic interpolation of the samples otherwise.
impl Field for EigenField {
    fn value(&self, x: f64) -> f64 {
        if self.kernel.is_empty() {
            periodic_cubic(&self.samples, x)
        } else {
            kernel_eval(&self.map, &self.kernel, self.truncation, x)
        }
    }
}

/// Shifted quadrature nodes with `ρ` and preimages.
struct Nodes {
    x: Vec<f64>,
    rho: Vec<f64>,
    pre: Vec<Vec<f64>>,
    inv_rho_mean: f64,
}

impl Nodes {
    fn new(map: &ExpandingMapSpec, rho: &InvariantDensity) -> Result<Self> {
        let gq = EIGEN_QUADRATURE;
        let x: Vec<f64> = (0..gq).map(|j| (j as f64 + QUAD_SHIFT) / gq as f64).collect();
        let rho_x: Vec<f64> = x.iter().map(|&x| rho.eval(x)).collect();
        let pre = x.par_iter().map(|&x| inverse_branches(map, x)).collect::<Result<_>>()?;
        let inv_rho_mean = grid_mean(&rho_x.iter().map(|r| 1.0 / r).collect::<Vec<_>>());
        Ok(Self { x, rho: rho_x, pre, inv_rho_mean })
    }

    /// `(v, 𝓛̃v − v)` at the nodes, evaluating `v` at the exact preimages.
    fn values_and_defect(&self, rho: &InvariantDensity, v: &dyn Field) -> (Vec<f64>, Vec<f64>) {
        let values: Vec<f64> = self.x.par_iter().map(|&x| v.value(x)).collect();
        let diff = self
            .pre
            .par_iter()
            .enumerate()
            .map(|(j, ys)| {
                let s: f64 = ys.iter().map(|&y| rho.eval(y) * v.value(y)).sum();
                s / self.rho[j] - values[j]
            })
            .collect();
        (values, diff)
    }

    /// `‖𝒞(𝓛̃v − v) ‖ / ‖v‖` in `L²(ρλ)`, given `∫𝓛̃v λ`.
    fn relative_residual(&self, values: &[f64], diff: &[f64], lv_mean: f64) -> (f64, f64) {
        let c = lv_mean / self.inv_rho_mean;
        let res: Vec<f64> = diff.iter().zip(&self.rho).map(|(d, r)| d - c / r).collect();
        let norm = self.norm(values);
        (self.norm(&res) / norm, norm)
    }

    fn norm(&self, f: &[f64]) -> f64 {
        grid_mean(&f.iter().zip(&self.rho).map(|(a, r)| a * a * r).collect::<Vec<_>>()).sqrt()
    }
}

/// Relative residual `‖𝓛v − v‖ / ‖v‖` in `L²(ρλ)` for a λ-mean-zero field,
/// with `𝓛̃v` evaluated through exact preimages on shifted nodes.
pub fn fixed_point_residual(map: &ExpandingMapSpec, rho: &InvariantDensity, v: &dyn Field) -> Result<f64> {
    let nodes = Nodes::new(map, rho)?;
    let (values, diff) = nodes.values_and_defect(rho, v);
    let lv_mean = grid_mean(&values) + grid_mean(&diff);
    Ok(nodes.relative_residual(&values, &diff, lv_mean).0)
}

impl EigenField {
    pub fn to_tangent_field(&self) -> TangentField {
        TangentField {
            samples: self.samples.clone(),
            fourier: None,
            pieces: None,
            lambda_mean: self.lambda_mean,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EigenFamily {
    pub fields: Vec<EigenField>,
    pub requested: usize,
    /// Number of `K` powers summed.
    pub truncation: usize,
    /// Determinant of the Gram matrix of the normalized fields.
    pub gram_determinant: f64,
    pub min_pairwise_determinant: f64,
    /// Fewer fields than requested were found.
    pub degenerate: bool,
}

/// Kernel element `g` of `𝓛̃`, tabulated on the grid, with its `u`-mean data.
struct Kernel {
    g: Vec<f64>,
    /// `∫ g · Q^ℓ 1` for `ℓ = 0..=L`.
    level_means: Vec<f64>,
    label: String,
}

impl Kernel {
    fn combine(parts: &[(f64, &Kernel)]) -> Kernel {
        let n = parts[0].1.g.len();
        let levels = parts[0].1.level_means.len();
        let mut g = vec![0.0; n];
        let mut level_means = vec![0.0; levels];
        let mut label = String::new();
        for &(c, k) in parts {
            for (a, b) in g.iter_mut().zip(&k.g) {
                *a += c * b;
            }
            for (a, b) in level_means.iter_mut().zip(&k.level_means) {
                *a += c * b;
            }
            if c.abs() <= 1e-12 {
                continue;
            }
            if label.is_empty() {
                label = if c == 1.0 { k.label.clone() } else { format!("{c}*{}", k.label) };
            } else {
                label.push_str(&format!(" {} {:.6}*{}", if c < 0.0 { '-' } else { '+' }, c.abs(), k.label));
            }
        }
        Kernel { g, level_means, label }
    }

    fn mean(&self) -> f64 {
        self.level_means.iter().sum()
    }

    fn eval(&self, map: &ExpandingMapSpec, l: usize, x: f64) -> f64 {
        kernel_eval(map, &self.g, l, x)
    }
}

struct KernelField<'a> {
    map: &'a ExpandingMapSpec,
    kern: &'a Kernel,
    l: usize,
}

impl Field for KernelField<'_> {
    fn value(&self, x: f64) -> f64 {
        self.kern.eval(self.map, self.l, x)
    }
}

fn seed_field(k: usize, parity: Parity) -> (FourierField, String) {
    match parity {
        Parity::Cos => (FourierField::cos_mode(k), format!("cos{k}")),
        Parity::Sin => (FourierField::sin_mode(k), format!("sin{k}")),
    }
}

/// Up to `count` independent λ-mean-zero fields `v` with `𝓛 v = v`,
/// sampled on `{j / n}`.
pub fn general_eigenfunctions(
    map: &ExpandingMapSpec,
    rho: &InvariantDensity,
    n: usize,
    count: usize,
) -> Result<EigenFamily> {
    if count == 0 || count > 8 {
        return Err(Error::Domain(format!("count {count} must be between 1 and 8")));
    }
    if n < 512 {
        return Err(Error::Domain(format!("grid size {n} must be at least 512")));
    }
    let m = map.min_derivative();
    let l = (TAIL_TOL.ln() / (1.0 / m).ln()).ceil() as usize;
    let gq = EIGEN_QUADRATURE;
    let table_pre = grid_preimages(map, gq)?;

    // Q^ℓ 1 on the table grid.
    let mut q_levels: Vec<Vec<f64>> = vec![vec![1.0; gq]];
    for _ in 0..l {
        let prev = q_levels.last().unwrap();
        let next: Vec<f64> = table_pre
            .par_iter()
            .map(|ys| ys.iter().map(|&(y, w)| periodic_cubic(prev, y) * w * w).sum())
            .collect();
        q_levels.push(next);
    }

    let build = |h: &FourierField, label: String| -> Result<Option<Kernel>> {
        let g: Vec<f64> = (0..gq)
            .into_par_iter()
            .map(|j| -> Result<f64> {
                let x = j as f64 / gq as f64;
                let lh = tilde_l_at(map, rho, h, eval_map(map, x))?;
                Ok(h.eval(x) - lh / map.derivative(x))
            })
            .collect::<Result<_>>()?;
        let rms = grid_mean(&g.iter().map(|v| v * v).collect::<Vec<_>>()).sqrt();
        if rms <= 1e-8 * h.l2_norm() {
            return Ok(None);
        }
        let level_means = q_levels
            .iter()
            .map(|q| grid_mean(&g.iter().zip(q).map(|(a, b)| a * b).collect::<Vec<_>>()))
            .collect();
        Ok(Some(Kernel { g, level_means, label }))
    };

    // Candidate kernels from the seeds cos1, sin1, cos2, sin2, ...
    let mut kernels: Vec<Kernel> = Vec::new();
    let mut k = 1;
    while kernels.len() < count + 2 && k <= 4 * count + 8 {
        for parity in [Parity::Cos, Parity::Sin] {
            let (h, label) = seed_field(k, parity);
            if let Some(kern) = build(&h, label)? {
                kernels.push(kern);
            }
        }
        k += 1;
    }

    // λ-mean centering `v_i = u_i − α_i u_0` around the candidate with largest mean.
    let means: Vec<f64> = kernels.iter().map(Kernel::mean).collect();
    let (i0, m0) = means
        .iter()
        .enumerate()
        .fold((0, 0.0f64), |acc, (i, &v)| if v.abs() > acc.1.abs() { (i, v) } else { acc });
    let centred: Vec<Kernel> = if m0.abs() <= 1e-10 {
        kernels.iter().map(|k| Kernel::combine(&[(1.0, k)])).collect()
    } else {
        kernels
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != i0)
            .map(|(i, k)| Kernel::combine(&[(1.0, k), (-means[i] / m0, &kernels[i0])]))
            .collect()
    };

    let nodes = Nodes::new(map, rho)?;

    struct Evaluated {
        kernel: Kernel,
        values: Vec<f64>,
        norm: f64,
        residual: f64,
        mean: f64,
    }

    let evaluate = |kern: Kernel| -> Evaluated {
        let (values, diff) = nodes.values_and_defect(rho, &KernelField { map, kern: &kern, l });
        let mean = kern.mean();
        let (residual, norm) = nodes.relative_residual(&values, &diff, mean + grid_mean(&diff));
        Evaluated { kernel: kern, values, norm, residual, mean }
    };

    let mut accepted: Vec<Evaluated> = Vec::new();
    let mut pairwise_min = 1.0f64;
    for kern in centred {
        if accepted.len() == count {
            break;
        }
        let ev = evaluate(kern);
        if !(ev.residual <= RESIDUAL_TOL) || !ev.norm.is_finite() || ev.norm == 0.0 {
            continue;
        }
        let mut worst = 1.0f64;
        for a in &accepted {
            let c = inner(&a.values, &ev.values, &nodes.rho) / (a.norm * ev.norm);
            worst = worst.min(1.0 - c * c);
        }
        if worst < PAIRWISE_DET_TOL {
            continue;
        }
        pairwise_min = pairwise_min.min(worst);
        accepted.push(ev);
    }

    let r = accepted.len();
    let gram = DMatrix::from_fn(r, r, |i, j| {
        inner(&accepted[i].values, &accepted[j].values, &nodes.rho) / (accepted[i].norm * accepted[j].norm)
    });
    let gram_determinant = if r == 0 { 0.0 } else { gram.determinant() };

    let fields = accepted
        .into_iter()
        .map(|ev| {
            let samples: Vec<f64> = (0..n)
                .into_par_iter()
                .map(|j| ev.kernel.eval(map, l, j as f64 / n as f64))
                .collect();
            EigenField {
                samples,
                lambda_mean: ev.mean,
                residual: ev.residual,
                norm: ev.norm,
                seed: ev.kernel.label,
                map: map.clone(),
                truncation: l,
                kernel: ev.kernel.g,
            }
        })
        .collect::<Vec<_>>();
    Ok(EigenFamily {
        degenerate: fields.len() < count,
        fields,
        requested: count,
        truncation: l,
        gram_determinant,
        min_pairwise_determinant: if r < 2 { 1.0 } else { pairwise_min },
    })
}

fn inner(f: &[f64], g: &[f64], rho: &[f64]) -> f64 {
    grid_mean(&f.iter().zip(g).zip(rho).map(|((a, b), r)| a * b * r).collect::<Vec<_>>())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argument_checks() {
        let m = ExpandingMapSpec::model(2).unwrap();
        let rho = InvariantDensity::uniform(512);
        assert!(general_eigenfunctions(&m, &rho, 512, 9).is_err());
        assert!(general_eigenfunctions(&m, &rho, 256, 2).is_err());
    }

    #[test]
    fn model_fields_are_lacunary() {
        let m = ExpandingMapSpec::model(2).unwrap();
        let rho = InvariantDensity::uniform(1024);
        let fam = general_eigenfunctions(&m, &rho, 1024, 2).unwrap();
        assert_eq!(fam.fields.len(), 2);
        assert_eq!(fam.fields[0].seed, "cos1");
        assert_eq!(fam.fields[1].seed, "sin1");
        let lac = super::super::model_eigenfunction(2, 1.0, 1, 14, 1 << 14, Parity::Cos)
            .unwrap()
            .sample(1024);
        let v = &fam.fields[0].samples;
        let err = v.iter().zip(&lac).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-4, "{err}");
        assert!(fam.fields.iter().all(|f| f.residual <= 1e-4 && f.lambda_mean.abs() <= 1e-8));
    }
}
