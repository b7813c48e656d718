//! Small numerical helpers shared across modules.

/// Compensated (Neumaier) accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(it: I) -> f64 {
    let mut s = NeumaierSum::new();
    for x in it {
        s.add(x);
    }
    s.value()
}

/// Mean of samples on a uniform periodic grid, i.e. the trapezoid rule on the circle.
pub fn grid_mean(samples: &[f64]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    compensated_sum(samples.iter().copied()) / samples.len() as f64
}

/// Least-squares slope of `log y` against `log x`. `None` unless every
/// coordinate is strictly positive and at least two distinct abscissae exist.
pub fn log_log_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 || points.iter().any(|&(x, y)| !(x > 0.0) || !(y > 0.0)) {
        return None;
    }
    let n = points.len() as f64;
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    slope.is_finite().then_some(slope)
}

/// One value per decade from `from` down (or up) to `to`, both included.
/// `decades(1e-1, 1e-4)` gives `[1e-1, 1e-2, 1e-3, 1e-4]`.
pub fn decades(from: f64, to: f64) -> Vec<f64> {
    let a = from.log10();
    let b = to.log10();
    let steps = (b - a).abs().round() as usize;
    if steps == 0 {
        return vec![from];
    }
    (0..=steps)
        .map(|i| 10f64.powf(a + (b - a) * i as f64 / steps as f64))
        .collect()
}

/// Reduce to `[0, 1)`, never returning exactly `1.0`.
#[inline]
pub fn wrap_unit(x: f64) -> f64 {
    let r = x.rem_euclid(1.0);
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Linear interpolation of periodic samples on the grid `{j / n}`.
#[inline]
pub fn periodic_lerp(samples: &[f64], x: f64) -> f64 {
    let n = samples.len();
    let s = wrap_unit(x) * n as f64;
    let j = (s.floor() as usize).min(n - 1);
    let f = s - j as f64;
    let a = samples[j];
    let b = samples[(j + 1) % n];
    a + (b - a) * f
}

/// Four-point Lagrange interpolation of periodic samples on `{j / n}`.
#[inline]
pub fn periodic_cubic(samples: &[f64], x: f64) -> f64 {
    let n = samples.len();
    if n < 4 {
        return periodic_lerp(samples, x);
    }
    let s = wrap_unit(x) * n as f64;
    let j = (s.floor() as usize).min(n - 1);
    let f = s - j as f64;
    let p0 = samples[(j + n - 1) % n];
    let p1 = samples[j];
    let p2 = samples[(j + 1) % n];
    let p3 = samples[(j + 2) % n];
    let w0 = -f * (f - 1.0) * (f - 2.0) / 6.0;
    let w1 = (f + 1.0) * (f - 1.0) * (f - 2.0) / 2.0;
    let w2 = -(f + 1.0) * f * (f - 2.0) / 2.0;
    let w3 = (f + 1.0) * f * (f - 1.0) / 6.0;
    w0 * p0 + w1 * p1 + w2 * p2 + w3 * p3
}
