//! Acceptance suite: one line per criterion, non-zero exit on any failure.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use circle_ot::dynamics::{invariant_density, ExpandingMapSpec, InvariantDensity};
use circle_ot::experiments::{
    atomless_scan, cantor_report, derivative_slope_check, in_a_k, lacunary_field, mdim_separated_sets,
    nearly_invariant_family, non_frechet_counterexample, spectrum_report, Check, FamilyParams,
};
use circle_ot::fourier::FourierField;
use circle_ot::measures::{exp_map, push_forward, AffinePiece, AtomicPart, CircleMeasure, PiecewiseAffine, TangentField};
use circle_ot::operators::{
    apply_adjoint, apply_derivative_field, apply_ld_fourier, apply_tilde_l, estimate_rg, inner_rho, Field, Parity,
};
use circle_ot::transport::{brute_force_wasserstein, wasserstein};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

const N: usize = 4096;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn configured_maps() -> Vec<ExpandingMapSpec> {
    [(2, 0.0), (3, 0.0), (5, 0.0), (2, 0.1), (2, 0.2), (2, 0.3), (3, 0.5)]
        .iter()
        .map(|&(d, e)| ExpandingMapSpec::new(d, e).unwrap())
        .collect()
}

fn density(map: &ExpandingMapSpec) -> InvariantDensity {
    if map.is_model() {
        InvariantDensity::uniform(N)
    } else {
        invariant_density(map, N, 1e-12, 500).unwrap()
    }
}

fn random_trig(rng: &mut ChaCha8Rng, k: usize) -> FourierField {
    let mut c = || (0..k).map(|_| StandardNormal.sample(&mut *rng)).collect::<Vec<f64>>();
    let cos = c();
    FourierField::new(cos, c())
}

fn oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let n = rng.random_range(1..=8);
        let w = 1.0 / n as f64;
        let mut atoms = || AtomicPart::from_raw((0..n).map(|_| (rng.random::<f64>(), w)).collect::<Vec<_>>());
        let (a, b) = (atoms(), atoms());
        for p in [1.0, 2.0, 3.0] {
            let fast = wasserstein(&CircleMeasure::from_atoms(a.clone()), &CircleMeasure::from_atoms(b.clone()), p, n)
                .map_err(|e| e.to_string())?
                .cost;
            let exact = brute_force_wasserstein(&a, &b, p).map_err(|e| e.to_string())?.cost;
            let rel = (fast - exact).abs() / exact.max(1e-300);
            worst = worst.max(rel);
            ensure(rel <= 1e-9, || format!("n = {n}, p = {p}: {fast} vs {exact}"))?;
        }
    }
    Ok(format!("600 comparisons, worst relative error {worst:.1e}"))
}

fn first_order_metric() -> Outcome {
    let v = TangentField::from_fourier(FourierField::cos_mode(1), N);
    let lam = CircleMeasure::lebesgue();
    let mut worst = 0.0f64;
    for t in [1e-1, 1e-2, 1e-3] {
        let d = wasserstein(&lam, &exp_map(&lam, &v, t).unwrap(), 2.0, N).unwrap().cost;
        let rel = (d / t - 0.5f64.sqrt()).abs() / 0.5f64.sqrt();
        worst = worst.max(rel);
        ensure(rel <= 1e-2, || format!("t = {t}: W/t = {}", d / t))?;
    }
    Ok(format!("worst relative deviation from 1/√2: {worst:.2e}"))
}

fn fourier_action() -> Outcome {
    for d in [2usize, 3, 5] {
        for k in 1..=256 {
            for (f, parity) in [(FourierField::cos_mode(k), 0), (FourierField::sin_mode(k), 1)] {
                let out = apply_ld_fourier(&f, d).unwrap();
                let expected = if k % d == 0 {
                    let m = k / d;
                    let e = if parity == 0 { FourierField::cos_mode(m) } else { FourierField::sin_mode(m) };
                    e.scale(d as f64)
                } else {
                    FourierField::zeros(0)
                };
                ensure(out.sub(&expected).abs_coefficient_sum() == 0.0, || format!("d = {d}, k = {k}"))?;
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for d in [2usize, 3, 5] {
        let map = ExpandingMapSpec::model(d).unwrap();
        for _ in 0..10 {
            let f = random_trig(&mut rng, 40);
            let grid = apply_tilde_l(&map, &InvariantDensity::uniform(1024), &f, 1024).unwrap();
            let exact = apply_ld_fourier(&f, d).unwrap().sample(1024);
            let err = grid.iter().zip(&exact).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            worst = worst.max(err);
            ensure(err <= 1e-6, || format!("d = {d}: grid/Fourier gap {err:e}"))?;
        }
    }
    Ok(format!("coefficient identities exact for k ≤ 256; grid gap {worst:.1e}"))
}

fn derivative() -> Outcome {
    let ts = [1e-1, 1e-2, 1e-3, 1e-4];
    let model = ExpandingMapSpec::model(2).unwrap();
    let mut cases = vec![
        (model.clone(), "c2", FourierField::cos_mode(2)),
        (model, "s3", FourierField::sin_mode(3)),
    ];
    for eps in [0.2, 0.3] {
        let map = ExpandingMapSpec::new(2, eps).unwrap();
        cases.push((map.clone(), "c1", FourierField::cos_mode(1)));
        cases.push((map, "s2", FourierField::sin_mode(2)));
    }
    let mut lines = Vec::new();
    for (map, name, f) in cases {
        let rho = density(&map);
        let r = derivative_slope_check(&map, &rho, &TangentField::from_fourier(f, N), &ts, N).unwrap();
        let label = format!("eps={} {name}", map.epsilon());
        ensure(r.passes(), || format!("{label}: main {:?}, control {:?}", r.main, r.control))?;
        let main = if r.main.is_within_floor() { "floor".to_string() } else { format!("{:.2}", r.main.fitted_slope.unwrap()) };
        lines.push(format!("{label} main {main} control {:.2}", r.control.fitted_slope.unwrap()));
    }
    Ok(lines.join("; "))
}

fn counterexample() -> Outcome {
    let mut lines = Vec::new();
    for k in [4, 8, 16] {
        let r = non_frechet_counterexample(k, N).unwrap();
        ensure(r.norm_ok(), || format!("k = {k}: ‖v‖ = {} vs {}", r.l2_norm, r.expected_norm))?;
        ensure(r.kernel_ok(), || format!("k = {k}: 𝓛v sup {:e}", r.ld_sup))?;
        ensure(r.closed_form_ok(), || format!("k = {k}: closed form gap {:e}", r.closed_form_distance))?;
        ensure(r.bound_ok(), || format!("k = {k}: W = {} < {}", r.distance, r.lower_bound))?;
        lines.push(format!("k={k} W/‖v‖={:.3}", r.ratio));
    }
    Ok(lines.join(", "))
}

fn adjoint() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    for (d, eps) in [(2, 0.0), (3, 0.0), (2, 0.2), (2, 0.3), (3, 0.5)] {
        let map = ExpandingMapSpec::new(d, eps).unwrap();
        let rho = density(&map);
        let r = rho.resample(N);
        for _ in 0..50 {
            let (v, u) = (random_trig(&mut rng, 6), random_trig(&mut rng, 6));
            let lv = apply_derivative_field(&map, &rho, &v, N).unwrap();
            let lhs = inner_rho(&r, &lv, &u.sample(N));
            let rhs = inner_rho(&r, &v.sample(N), &apply_adjoint(&map, &u, N));
            worst = worst.max((lhs - rhs).abs());
            ensure((lhs - rhs).abs() <= 1e-6, || format!("d = {d}, eps = {eps}: {lhs} vs {rhs}"))?;
        }
    }
    Ok(format!("250 pairs, worst gap {worst:.1e}"))
}

fn invariant() -> Outcome {
    let model = invariant_density(&ExpandingMapSpec::model(2).unwrap(), N, 1e-12, 500).unwrap();
    ensure(model.residual <= 1e-12, || format!("model residual {:e}", model.residual))?;
    let flat = model.samples.iter().fold(0.0f64, |m, s| m.max((s - 1.0).abs()));
    ensure(flat <= 1e-12, || format!("model density deviates from 1 by {flat:e}"))?;
    let map = ExpandingMapSpec::new(2, 0.3).unwrap();
    let rho = invariant_density(&map, N, 1e-12, 500).unwrap();
    ensure(rho.residual <= 1e-8, || format!("eps = 0.3 residual {:e}", rho.residual))?;
    let base = rho.measure();
    let w = wasserstein(&push_forward(&base, &map).unwrap(), &base, 2.0, N).unwrap().cost;
    ensure(w <= 1e-4, || format!("W2(Φ#ρλ, ρλ) = {w:e}"))?;
    Ok(format!("model residual {:.1e}; eps=0.3 residual {:.1e}, W2 {w:.1e}", model.residual, rho.residual))
}

fn eigenfields() -> Outcome {
    let mut lines = Vec::new();
    for map in configured_maps() {
        let rho = density(&map);
        let (r, _) = spectrum_report(&map, &rho, N, 2).unwrap();
        let label = format!("d={} eps={}", map.degree(), map.epsilon());
        ensure(r.fields.len() >= 2, || format!("{label}: {} fields", r.fields.len()))?;
        for f in &r.fields {
            ensure(f.residual <= 1e-4 && f.lambda_mean.abs() <= 1e-8, || format!("{label}: {f:?}"))?;
            ensure(f.overlap.is_none_or(|o| o >= 0.99), || format!("{label}: overlap {:?}", f.overlap))?;
        }
        ensure(r.min_pairwise_determinant >= 1e-6, || format!("{label}: dependent fields"))?;
        let worst = r.fields.iter().map(|f| f.residual).fold(0.0, f64::max);
        lines.push(format!("{label} residual {worst:.0e}"));
    }
    Ok(lines.join(", "))
}

fn nearly_invariant() -> Outcome {
    let a_list = vec![1e-1, 1e-2, 1e-3];
    let mut lines = Vec::new();
    let model = ExpandingMapSpec::model(2).unwrap();
    let f1 = lacunary_field(2, 1, 1 << 14, Parity::Cos).unwrap();
    let f2 = lacunary_field(2, 1, 1 << 14, Parity::Sin).unwrap();
    let params = FamilyParams { eta: 1e-2, a_list: a_list.clone(), k_steps: 3, eps: 0.1, grid: 1 << 17, n: N };
    let mut runs = vec![(
        "model",
        nearly_invariant_family(&model, &InvariantDensity::uniform(N), &[&f1, &f2], &params).unwrap(),
    )];
    for (label, eps) in [("eps=0.1", 0.1), ("eps=0.3", 0.3)] {
        let map = ExpandingMapSpec::new(2, eps).unwrap();
        let rho = density(&map);
        let (_, fam) = spectrum_report(&map, &rho, N, 2).unwrap();
        let fields: Vec<&dyn Field> = fam.fields.iter().map(|f| f as &dyn Field).collect();
        let params = FamilyParams { grid: 1 << 15, ..params.clone() };
        runs.push((label, nearly_invariant_family(&map, &rho, &fields, &params).unwrap()));
    }
    for (label, r) in runs {
        ensure(r.decrease_factor >= 3.0, || format!("{label}: ratio decrease {}", r.decrease_factor))?;
        ensure(r.drift.iter().all(|row| row.drift.len() == 3 && row.within_bound()), || {
            format!("{label}: drift {:?}", r.drift)
        })?;
        lines.push(format!("{label} decrease ×{:.1}", r.decrease_factor));
    }
    Ok(lines.join(", "))
}

fn separated_sets() -> Outcome {
    let mut lines = Vec::new();
    for k in [2, 3] {
        for p in [1.0, 2.0] {
            for n in [1, 2] {
                let r = mdim_separated_sets(2, k, 1, p, n, 0).unwrap();
                let label = format!("k={k} p={p} n={n}");
                ensure(r.passes(), || format!("{label}: {r:?}"))?;
                ensure(r.branching.iter().all(|&b| b == (1 << (k - 1)) + 1), || format!("{label}: {:?}", r.branching))?;
                ensure(r.in_a_k && r.preimages_exact, || format!("{label}: A_k membership"))?;
                lines.push(format!("{label} |S|={}", r.set_size));
            }
        }
    }
    ensure(!in_a_k(&AtomicPart::from_raw([(0.99, 1.0)]), 2, 2), || "A_k accepts an outside measure".into())?;
    Ok(lines.join(", "))
}

fn atom_scans() -> Outcome {
    let cantor = cantor_report(6, 200, N).unwrap();
    ensure(cantor.passes(), || format!("Cantor fraction {}", cantor.scan.fraction))?;
    let ts: Vec<f64> = (1..=200).map(|j| j as f64 / 200.0).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let v = TangentField::from_fourier(random_trig(&mut rng, 3), N);
        let r = atomless_scan(&CircleMeasure::lebesgue(), &v, &ts, N).unwrap();
        worst = worst.max(r.fraction);
        ensure(r.passes(), || format!("trig field fraction {}", r.fraction))?;
    }
    let saw = PiecewiseAffine::new(vec![AffinePiece { start: 0.0, end: 1.0, left: 0.5, right: -0.5 }]).unwrap();
    let v = TangentField::from_pieces(saw, N);
    let grid: Vec<f64> = (1..=10).map(|j| j as f64 / 10.0).collect();
    let r = atomless_scan(&CircleMeasure::lebesgue(), &v, &grid, N).unwrap();
    let hits = r.detected_at();
    ensure(hits == vec![1.0], || format!("sawtooth atoms at {hits:?}"))?;
    let fold = r.samples.last().unwrap();
    ensure((fold.mass - 1.0).abs() <= 1e-9, || format!("fold atom mass {}", fold.mass))?;
    Ok(format!(
        "Cantor fraction {:.3}, trig worst {worst:.3}, sawtooth atom at t=1 mass {:.3}",
        cantor.scan.fraction, fold.mass
    ))
}

fn rg() -> Outcome {
    let mut lines = Vec::new();
    for map in configured_maps() {
        let rho = density(&map);
        let r = estimate_rg(&map, &rho, 8).unwrap();
        let label = format!("d={} eps={}", map.degree(), map.epsilon());
        ensure(r >= map.min_derivative() - 0.05, || format!("{label}: R_g = {r} < min Φ′ {}", map.min_derivative()))?;
        if map.is_model() {
            ensure((r - map.degree() as f64).abs() <= 1e-6, || format!("{label}: R_g = {r}"))?;
        }
        lines.push(format!("{label} {r:.3}"));
    }
    Ok(lines.join(", "))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("oracle equivalence", oracle),
        ("first-order metric", first_order_metric),
        ("Fourier action", fourier_action),
        ("Gateaux derivative", derivative),
        ("non-Frechet counterexample", counterexample),
        ("adjoint identity", adjoint),
        ("invariant density", invariant),
        ("eigenfields", eigenfields),
        ("nearly-invariant family", nearly_invariant),
        ("separated sets", separated_sets),
        ("atomless scans", atom_scans),
        ("R_g bound", rg),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name} ({secs:.1}s): {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name} ({secs:.1}s): {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {}/12 passed", 12 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
