//! Acceptance suite: one test per criterion, each printing a pass/fail line
//! (run with `--nocapture` to see them as they complete). The tests share a
//! mutex so runtime budgets are measured with the whole machine available.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use ringcov::covariance::CovarianceModel;
use ringcov::covariance::{check_psd, CovarianceEngine, CovarianceFamily};
use ringcov::field::{
    empirical_variogram, krige, krige_with, simulate_ensemble, simulate_unconditional,
    NoiseLattice, SampleSet, SolverPath,
};
use ringcov::fit::{fit_wls, FitBounds, FitInit, FitOptions};
use ringcov::kernel::{discretize, normalize, SmoothKernelParams, StepKernel};
use ringcov::oracle::{mc_cap_intersection, quad_covariance, QuadratureSpec};
use ringcov::sphere::{cap_area, cap_intersection_area, uniform_point, Radians, UnitVec3};
use ringcov::tabulate::{tabulate, tabulate_kernel};
use std::f64::consts::PI;
use std::sync::Mutex;
use std::time::Instant;

static GATE: Mutex<()> = Mutex::new(());

fn rad(v: f64) -> Radians {
    Radians::new(v)
}

struct Criterion {
    name: &'static str,
    started: Instant,
    time_limit_s: f64,
    _guard: std::sync::MutexGuard<'static, ()>,
}

impl Criterion {
    fn start(name: &'static str, time_limit_s: f64) -> Self {
        let guard = GATE.lock().unwrap_or_else(|p| p.into_inner());
        Criterion {
            name,
            started: Instant::now(),
            time_limit_s,
            _guard: guard,
        }
    }

    /// Prints the verdict line and enforces the tolerance and time budget.
    fn finish(self, pass: bool, detail: &str) {
        let elapsed = self.started.elapsed().as_secs_f64();
        let in_time = elapsed <= self.time_limit_s;
        println!(
            "{}: {}: {} ({elapsed:.1}s of {:.0}s budget)",
            self.name,
            if pass && in_time { "PASS" } else { "FAIL" },
            detail,
            self.time_limit_s
        );
        assert!(pass, "{} failed: {detail}", self.name);
        assert!(
            in_time,
            "{} exceeded its time budget: {elapsed:.1}s > {}s",
            self.name, self.time_limit_s
        );
    }
}

fn smooth_params(mu: f64, nu: f64, range: f64) -> SmoothKernelParams {
    SmoothKernelParams::new(mu, nu, rad(range)).unwrap()
}

fn normalized_kernel(mu: f64, nu: f64, range: f64, n: usize) -> StepKernel {
    normalize(&discretize(&smooth_params(mu, nu, range), n).unwrap()).unwrap()
}

/// The shape set of the covariance-curve family used throughout: μ = 1 with
/// ν spanning three decades.
const NU_SET: [f64; 7] = [0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0];

#[test]
fn criterion_1_geometry_exactness() {
    let c = Criterion::start("criterion 1 (geometry exactness)", 5.0);
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst_symmetry = 0.0f64;
    let mut worst_complement = 0.0f64;
    for _ in 0..10_000 {
        let r0: f64 = rng.gen_range(0.0..PI);
        let r1: f64 = rng.gen_range(0.0..PI);
        let d: f64 = rng.gen_range(0.0..PI);
        let direct = cap_intersection_area(rad(r0), rad(r1), rad(d)).unwrap();
        let swapped = cap_intersection_area(rad(r1), rad(r0), rad(d)).unwrap();
        worst_symmetry = worst_symmetry.max((direct - swapped).abs());
        if r0 > PI / 2.0 {
            let reduced = cap_area(rad(r1)).unwrap()
                - cap_intersection_area(rad(PI - r0), rad(r1), rad(PI - d)).unwrap();
            worst_complement = worst_complement.max((direct - reduced).abs());
        }
        if r1 > PI / 2.0 {
            let reduced = cap_area(rad(r0)).unwrap()
                - cap_intersection_area(rad(r0), rad(PI - r1), rad(PI - d)).unwrap();
            worst_complement = worst_complement.max((direct - reduced).abs());
        }
    }
    let mut worst_lune = 0.0f64;
    for i in 0..=1000 {
        let d = (PI - 1e-3) * i as f64 / 1000.0;
        let lune = cap_intersection_area(rad(PI / 2.0), rad(PI / 2.0), rad(d)).unwrap();
        worst_lune = worst_lune.max((lune - 2.0 * (PI - d)).abs());
    }
    let pass = worst_symmetry <= 1e-12 && worst_complement <= 1e-12 && worst_lune <= 1e-12;
    c.finish(
        pass,
        &format!(
            "symmetry {worst_symmetry:.2e}, complement {worst_complement:.2e}, lune {worst_lune:.2e}, all ≤ 1e-12"
        ),
    );
}

#[test]
fn criterion_2_monte_carlo_agreement() {
    let c = Criterion::start("criterion 2 (Monte-Carlo agreement)", 120.0);
    let master_seed = 2024;
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    let triples: Vec<(f64, f64, f64)> = (0..100)
        .map(|_| {
            (
                rng.gen_range(0.0..PI),
                rng.gen_range(0.0..PI),
                rng.gen_range(0.0..PI),
            )
        })
        .collect();
    let deviations: Vec<f64> = triples
        .par_iter()
        .enumerate()
        .map(|(i, &(r0, r1, d))| {
            let analytic = cap_intersection_area(rad(r0), rad(r1), rad(d)).unwrap();
            let (mc, _) = mc_cap_intersection(
                rad(r0),
                rad(r1),
                rad(d),
                10_000_000,
                master_seed + 1000 + i as u64,
            )
            .unwrap();
            (analytic - mc).abs()
        })
        .collect();
    let worst = deviations.iter().cloned().fold(0.0f64, f64::max);
    c.finish(
        worst <= 5e-3,
        &format!("100 triples at 1e7 samples, max |analytic − MC| = {worst:.2e} ≤ 5e-3"),
    );
}

#[test]
fn criterion_3_covariance_oracle_agreement() {
    let c = Criterion::start("criterion 3 (covariance oracle agreement)", 300.0);
    let kernels: Vec<StepKernel> = NU_SET
        .iter()
        .map(|&nu| normalized_kernel(1.0, nu, PI, 4096))
        .collect();
    let family = CovarianceFamily::new(&kernels).unwrap();
    let grid: Vec<f64> = (0..256).map(|i| PI * i as f64 / 255.0).collect();
    let closed_form = family.values(&grid);

    let mut worst = 0.0f64;
    let mut worst_nu = NU_SET[0];
    for (k, &nu) in NU_SET.iter().enumerate() {
        let params = smooth_params(1.0, nu, PI);
        let quad: Vec<f64> = grid
            .par_iter()
            .map(|&d| quad_covariance(&params, rad(d), QuadratureSpec::DEFAULT).unwrap())
            .collect();
        for (i, q) in quad.iter().enumerate() {
            let dev = (closed_form[i][k] - q).abs();
            if dev > worst {
                worst = dev;
                worst_nu = nu;
            }
        }
    }
    c.finish(
        worst <= 1e-3,
        &format!(
            "7 shapes, n = 4096 vs 512x1024 quadrature on 256 distances: max dev {worst:.2e} (ν = {worst_nu}) ≤ 1e-3"
        ),
    );
}

#[test]
fn criterion_4_curve_family_properties() {
    let c = Criterion::start("criterion 4 (curve family reproduction)", 60.0);
    let kernels: Vec<StepKernel> = NU_SET
        .iter()
        .map(|&nu| normalized_kernel(1.0, nu, PI, 64))
        .collect();
    let family = CovarianceFamily::new(&kernels).unwrap();
    let grid: Vec<f64> = (0..1024).map(|i| PI * i as f64 / 1023.0).collect();
    let curves = family.values(&grid);

    let mut pass = true;
    let mut detail = String::new();
    for (k, &nu) in NU_SET.iter().enumerate() {
        let at_zero = curves[0][k];
        let at_pi = curves[1023][k];
        let mut monotone = true;
        for i in 1..grid.len() {
            if curves[i][k] > curves[i - 1][k] + 1e-12 {
                monotone = false;
            }
        }
        let ok = (at_zero - 1.0).abs() <= 1e-12 && at_pi == 0.0 && monotone;
        if !ok {
            pass = false;
            detail = format!("ν = {nu}: C(0) = {at_zero}, C(π) = {at_pi}, monotone = {monotone}");
        }
    }
    if pass {
        detail =
            "7 curves with n = 64: C(0) = 1 ± 1e-12, C(π) = 0, nonincreasing on 1024 points".into();
    }
    c.finish(pass, &detail);
}

#[test]
fn criterion_5_positive_semidefiniteness() {
    let c = Criterion::start("criterion 5 (positive semidefiniteness)", 60.0);
    // Ten tabulated kernels spanning shapes and ranges, five point seeds each.
    let shapes = [
        (1.0, 0.125, PI),
        (1.0, 0.5, PI),
        (1.0, 1.0, 2.0),
        (1.0, 4.0, 1.0),
        (0.5, 1.0, 1.5),
        (2.0, 2.0, 2.5),
        (1.5, 0.7, 0.8),
        (3.0, 1.0, PI),
        (1.0, 8.0, 2.0 * PI),
        (0.8, 3.0, 4.0),
    ];
    let tabulated: Vec<_> = shapes
        .par_iter()
        .map(|&(mu, nu, range)| tabulate(&smooth_params(mu, nu, range), 24, 16).unwrap())
        .collect();
    let mut worst_ratio = f64::NEG_INFINITY;
    let mut pass = true;
    for (t_idx, t) in tabulated.iter().enumerate() {
        for seed in 0..5u64 {
            let report = check_psd(t, 200, 500 + 17 * t_idx as u64 + seed).unwrap();
            let ratio = report.lambda_min / report.lambda_max;
            worst_ratio = worst_ratio.max(-ratio);
            if !report.passes() {
                pass = false;
            }
        }
    }
    c.finish(
        pass,
        &format!("50 Gram matrices of 200 points: worst −λ_min/λ_max = {worst_ratio:.2e} ≤ 1e-10"),
    );
}

#[test]
fn criterion_6_tabulation_fidelity() {
    let c = Criterion::start("criterion 6 (tabulation fidelity)", 300.0);
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let mu = rng.gen_range(0.4f64..3.0);
        let nu = rng.gen_range(0.2f64..5.0);
        let range = rng.gen_range(0.3..2.0 * PI);
        let n_steps = rng.gen_range(4..=40);
        let kernel = normalized_kernel(mu, nu, range, n_steps);
        let t = tabulate_kernel(&kernel, 16).unwrap();
        let engine = CovarianceEngine::new(&kernel).unwrap();
        let seed: u64 = rng.gen();
        let deviations: Vec<f64> = (0..100_000u64)
            .into_par_iter()
            .map(|i| {
                let mut point_rng = ChaCha8Rng::seed_from_u64(seed ^ i);
                let d: f64 = point_rng.gen_range(0.0..PI);
                let tab = t.evaluate(rad(d)).unwrap();
                let exact = engine.value(d);
                (tab - exact).abs()
            })
            .collect();
        worst = worst.max(deviations.into_iter().fold(0.0f64, f64::max));
    }
    c.finish(
        worst <= 1e-9,
        &format!("10 random kernels, 1e5 audit points each: max |evaluate − closed form| = {worst:.2e} ≤ 1e-9"),
    );
}

fn kriging_model(nugget: f64, psill: f64, range: f64) -> CovarianceModel {
    let t = tabulate(&smooth_params(1.0, 2.0, range), 32, 16).unwrap();
    CovarianceModel::new(nugget, psill, t).unwrap()
}

#[test]
fn criterion_7_kriging_properties() {
    let c = Criterion::start("criterion 7 (kriging properties)", 120.0);
    let mut detail = Vec::new();
    let mut pass = true;

    // Exact interpolation with zero nugget.
    let model = kriging_model(0.0, 1.0, 1.2);
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let locs: Vec<UnitVec3> = (0..100).map(|_| uniform_point(&mut rng)).collect();
    let vals: Vec<f64> = (0..100).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let samples = SampleSet::new(locs.clone(), vals.clone()).unwrap();
    let out = krige(&model, &samples, &locs[..20]).unwrap();
    let max_interp = out
        .iter()
        .zip(&vals)
        .map(|(&(p, _), &z)| (p - z).abs())
        .fold(0.0f64, f64::max);
    pass &= max_interp <= 1e-8;
    detail.push(format!("interpolation {max_interp:.1e}"));

    // Weight sums via constant-field reproduction.
    let model = kriging_model(0.2, 0.8, 1.0);
    let constant = SampleSet::new(locs.clone(), vec![4.0; 100]).unwrap();
    let targets: Vec<UnitVec3> = (0..30).map(|_| uniform_point(&mut rng)).collect();
    let out = krige(&model, &constant, &targets).unwrap();
    let max_weight_defect = out
        .iter()
        .map(|&(p, _)| (p / 4.0 - 1.0).abs())
        .fold(0.0f64, f64::max);
    pass &= max_weight_defect <= 1e-10;
    detail.push(format!("Σλ−1 {max_weight_defect:.1e}"));

    // Far field: mean prediction, variance sill·(1 + 1/n).
    let model = kriging_model(0.25, 0.75, 0.3);
    let ring: Vec<UnitVec3> = (0..12)
        .map(|i| UnitVec3::from_lonlat_deg(30.0 * i as f64, 25.0).unwrap())
        .collect();
    let ring_vals: Vec<f64> = (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mean = ring_vals.iter().sum::<f64>() / 12.0;
    let far_samples = SampleSet::new(ring, ring_vals).unwrap();
    let far_target = [UnitVec3::from_lonlat_deg(0.0, -80.0).unwrap()];
    let (pred, var) = krige(&model, &far_samples, &far_target).unwrap()[0];
    let mean_err = (pred - mean).abs();
    let var_err = (var - 1.0 * (1.0 + 1.0 / 12.0)).abs();
    pass &= mean_err <= 1e-8 && var_err <= 1e-8;
    detail.push(format!("far-field {mean_err:.1e}/{var_err:.1e}"));

    // Sparse and dense paths agree at n = 500.
    let model = kriging_model(0.1, 0.9, 0.5);
    let locs: Vec<UnitVec3> = (0..500).map(|_| uniform_point(&mut rng)).collect();
    let vals: Vec<f64> = (0..500).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let samples = SampleSet::new(locs, vals).unwrap();
    let targets: Vec<UnitVec3> = (0..40).map(|_| uniform_point(&mut rng)).collect();
    let dense = krige_with(&model, &samples, &targets, SolverPath::Dense).unwrap();
    let sparse = krige_with(&model, &samples, &targets, SolverPath::Sparse).unwrap();
    let path_dev = dense
        .iter()
        .zip(&sparse)
        .map(|(&(pd, vd), &(ps, vs))| (pd - ps).abs().max((vd - vs).abs()))
        .fold(0.0f64, f64::max);
    pass &= path_dev <= 1e-8;
    detail.push(format!("sparse/dense {path_dev:.1e}"));

    c.finish(pass, &detail.join(", "));
}

#[test]
fn criterion_8_simulation_consistency() {
    let c = Criterion::start("criterion 8 (simulation consistency)", 600.0);
    let kernel = normalized_kernel(1.0, 2.0, 1.0, 64);
    let engine = CovarianceEngine::new(&kernel).unwrap();
    let lattice = NoiseLattice::fibonacci(20_000, 808).unwrap();

    // Twenty target pairs at lags spanning the support (and one beyond).
    let mut rng = ChaCha8Rng::seed_from_u64(809);
    let lags: Vec<f64> = (0..20).map(|i| 0.05 + 1.15 * i as f64 / 19.0).collect();
    let mut targets = Vec::with_capacity(40);
    for &lag in &lags {
        let p1 = uniform_point(&mut rng);
        // Random tangent direction at p1.
        let helper = uniform_point(&mut rng);
        let dot = helper.dot(p1);
        let tx = helper.x() - dot * p1.x();
        let ty = helper.y() - dot * p1.y();
        let tz = helper.z() - dot * p1.z();
        let tangent = UnitVec3::new(tx, ty, tz).unwrap();
        let p2 = UnitVec3::new(
            lag.cos() * p1.x() + lag.sin() * tangent.x(),
            lag.cos() * p1.y() + lag.sin() * tangent.y(),
            lag.cos() * p1.z() + lag.sin() * tangent.z(),
        )
        .unwrap();
        targets.push(p1);
        targets.push(p2);
    }

    let realizations = simulate_ensemble(&kernel, &lattice, &targets, 2000);
    let r = realizations.len() as f64;

    // Per-target variance within 1 ± 0.1.
    let mut worst_var_dev = 0.0f64;
    for t in 0..targets.len() {
        let mean: f64 = realizations.iter().map(|f| f[t]).sum::<f64>() / r;
        let var: f64 = realizations
            .iter()
            .map(|f| (f[t] - mean) * (f[t] - mean))
            .sum::<f64>()
            / (r - 1.0);
        worst_var_dev = worst_var_dev.max((var - 1.0).abs());
    }

    // Empirical covariance per lag within 3 standard errors for ≥ 18 of 20.
    let mut in_band = 0;
    for (k, &lag) in lags.iter().enumerate() {
        let expected = engine.value(lag);
        let products: Vec<f64> = realizations
            .iter()
            .map(|f| f[2 * k] * f[2 * k + 1])
            .collect();
        let mean: f64 = products.iter().sum::<f64>() / r;
        let sd: f64 = (products
            .iter()
            .map(|p| (p - mean) * (p - mean))
            .sum::<f64>()
            / (r - 1.0))
            .sqrt();
        let se = sd / r.sqrt();
        if (mean - expected).abs() <= 3.0 * se {
            in_band += 1;
        }
    }

    let pass = worst_var_dev <= 0.1 && in_band >= 18;
    c.finish(
        pass,
        &format!(
            "N = 20000, 2000 realizations: {in_band}/20 lags within 3 SE, worst variance deviation {worst_var_dev:.3}"
        ),
    );
}

#[test]
fn criterion_9_fit_recovery() {
    let c = Criterion::start("criterion 9 (fit recovery)", 600.0);
    let true_range: f64 = 1.0;
    let true_psill: f64 = 1.0;
    let true_nugget: f64 = 0.1;
    let kernel = normalized_kernel(1.0, 2.0, true_range, 64);

    let recovered: Vec<(f64, f64)> = (0..20u64)
        .into_par_iter()
        .map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(9000 + seed);
            let locs: Vec<UnitVec3> = (0..500).map(|_| uniform_point(&mut rng)).collect();
            let lattice = NoiseLattice::fibonacci(20_000, 9100 + seed).unwrap();
            let smooth = simulate_unconditional(&kernel, &lattice, &locs);
            let values: Vec<f64> = smooth
                .iter()
                .map(|y| {
                    let noise: f64 = rng.gen_range(-1.0..1.0f64);
                    // Uniform noise scaled to variance = nugget.
                    true_psill.sqrt() * y + (3.0 * true_nugget).sqrt() * noise
                })
                .collect();
            let samples = SampleSet::new(locs, values).unwrap();
            let variogram = empirical_variogram(&samples, 15, rad(1.5)).unwrap();
            let variance = {
                let vals = samples.values();
                let m = vals.iter().sum::<f64>() / vals.len() as f64;
                vals.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (vals.len() - 1) as f64
            };
            let init = FitInit {
                range: 0.75,
                mu: 1.0,
                nu: 1.0,
                partial_sill: variance,
                nugget: 0.05 * variance,
            };
            let (_, report) = fit_wls(
                &variogram,
                &init,
                &FitBounds::default(),
                &FitOptions::default(),
            )
            .unwrap();
            (report.range, report.partial_sill)
        })
        .collect();

    let mut ranges: Vec<f64> = recovered.iter().map(|r| r.0).collect();
    let mut sills: Vec<f64> = recovered.iter().map(|r| r.1).collect();
    ranges.sort_by(|a, b| a.partial_cmp(b).unwrap());
    sills.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median_range = 0.5 * (ranges[9] + ranges[10]);
    let median_sill = 0.5 * (sills[9] + sills[10]);

    let range_err = (median_range - true_range).abs() / true_range;
    let sill_err = (median_sill - true_psill).abs() / true_psill;
    let pass = range_err <= 0.25 && sill_err <= 0.25;
    c.finish(
        pass,
        &format!(
            "20 synthetic datasets: median range {median_range:.3} (err {:.0}%), median sill {median_sill:.3} (err {:.0}%), both ≤ 25%",
            100.0 * range_err,
            100.0 * sill_err
        ),
    );
}
