//! Weighted-least-squares variogram fitting with a derivative-free simplex.
//!
//! The model semivariogram is `γ(d) = nugget + psill·(1 − C(d; range, μ, ν))`
//! with C the closed-form step-kernel covariance, so the covariance module
//! stays the single source of C. Shape parameters and both sills are
//! optimized on log scale; the search is plain Nelder–Mead with a few
//! deterministic restarts around the incumbent.

use crate::covariance::{CovarianceEngine, CovarianceModel};
use crate::error::{Error, Result};
use crate::field::BinnedVariogram;
use crate::kernel::{discretize, normalize, SmoothKernelParams};
use crate::sphere::Radians;
use crate::tabulate::tabulate;
use std::f64::consts::PI;

/// Starting point for the fit.
#[derive(Debug, Clone, Copy)]
pub struct FitInit {
    pub range: f64,
    pub mu: f64,
    pub nu: f64,
    pub partial_sill: f64,
    pub nugget: f64,
}

/// Box constraints applied inside the objective (violations cost +∞).
#[derive(Debug, Clone, Copy)]
pub struct FitBounds {
    pub range: (f64, f64),
    pub mu: (f64, f64),
    pub nu: (f64, f64),
    /// Lower bound keeping the nugget positive on log scale.
    pub min_nugget: f64,
}

impl Default for FitBounds {
    fn default() -> Self {
        FitBounds {
            range: (1e-3, 2.0 * PI),
            mu: (0.05, 20.0),
            nu: (0.05, 20.0),
            min_nugget: 1e-10,
        }
    }
}

/// Knobs for the optimizer itself.
#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    /// Kernel steps used while optimizing (the final model is re-tabulated).
    pub search_steps: usize,
    /// Kernel steps of the returned tabulated model.
    pub final_steps: usize,
    pub nodes_per_interval: usize,
    pub max_iterations: usize,
    pub restarts: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            search_steps: 32,
            final_steps: 64,
            nodes_per_interval: 16,
            max_iterations: 400,
            restarts: 3,
        }
    }
}

/// Fitted parameters and diagnostics.
#[derive(Debug, Clone)]
pub struct FitReport {
    pub range: f64,
    pub mu: f64,
    pub nu: f64,
    pub partial_sill: f64,
    pub nugget: f64,
    pub objective: f64,
    pub n_evaluations: usize,
    /// Best objective seen so far, one entry per simplex iteration across
    /// all restarts; nonincreasing by construction.
    pub best_history: Vec<f64>,
}

/// Weighted least squares on the binned variogram: minimizes
/// `Σ_b count_b·(γ̂_b − γ_model(d̄_b))²` over (range, μ, ν, psill, nugget).
/// Deterministic given the data and the starting point.
pub fn fit_wls(
    variogram: &BinnedVariogram,
    init: &FitInit,
    bounds: &FitBounds,
    options: &FitOptions,
) -> Result<(CovarianceModel, FitReport)> {
    let bins: Vec<(f64, f64, f64)> = variogram
        .counts()
        .iter()
        .zip(variogram.mean_distance())
        .zip(variogram.semivariance())
        .filter(|((&c, _), _)| c > 0)
        .map(|((&c, &d), &g)| (c as f64, d, g))
        .collect();
    if bins.len() < 4 {
        return Err(Error::Fit(format!(
            "need at least 4 non-empty variogram bins, got {}",
            bins.len()
        )));
    }

    let mut n_evaluations = 0usize;
    let mut objective = |x: &[f64]| -> f64 {
        n_evaluations += 1;
        let range = x[0].exp();
        let mu = x[1].exp();
        let nu = x[2].exp();
        let psill = x[3].exp();
        let nugget = x[4].exp();
        if range < bounds.range.0
            || range > bounds.range.1
            || mu < bounds.mu.0
            || mu > bounds.mu.1
            || nu < bounds.nu.0
            || nu > bounds.nu.1
            || !psill.is_finite()
            || !nugget.is_finite()
        {
            return f64::INFINITY;
        }
        let params = match SmoothKernelParams::new(mu, nu, Radians::new(range)) {
            Ok(p) => p,
            Err(_) => return f64::INFINITY,
        };
        let kernel = match discretize(&params, options.search_steps).and_then(|k| normalize(&k)) {
            Ok(k) => k,
            Err(_) => return f64::INFINITY,
        };
        let engine = match CovarianceEngine::new(&kernel) {
            Ok(e) => e,
            Err(_) => return f64::INFINITY,
        };
        let mut total = 0.0;
        for &(count, d, gamma_hat) in &bins {
            let c = engine.value(d.min(PI));
            let gamma_model = nugget + psill * (1.0 - c);
            let residual = gamma_hat - gamma_model;
            total += count * residual * residual;
        }
        if total.is_finite() {
            total
        } else {
            f64::INFINITY
        }
    };

    let x0 = [
        init.range.max(bounds.range.0).min(bounds.range.1).ln(),
        init.mu.max(bounds.mu.0).min(bounds.mu.1).ln(),
        init.nu.max(bounds.nu.0).min(bounds.nu.1).ln(),
        init.partial_sill.max(1e-12).ln(),
        init.nugget.max(bounds.min_nugget).ln(),
    ];

    let mut best_x = x0.to_vec();
    let mut best_f = objective(&best_x);
    let mut history = vec![best_f];
    let mut step = 0.4;
    for _restart in 0..=options.restarts {
        let run = nelder_mead(
            &mut objective,
            &best_x,
            step,
            options.max_iterations,
            1e-12,
            &mut history,
        );
        if run.1 < best_f {
            best_x = run.0;
            best_f = run.1;
        }
        step *= 0.5;
    }
    if !best_f.is_finite() {
        return Err(Error::Fit(
            "objective is not finite anywhere the search looked".into(),
        ));
    }

    let range = best_x[0].exp();
    let mu = best_x[1].exp();
    let nu = best_x[2].exp();
    let partial_sill = best_x[3].exp().max(1e-12);
    let nugget = best_x[4].exp();
    let nugget = if nugget <= bounds.min_nugget * 1.01 {
        0.0
    } else {
        nugget
    };

    let params = SmoothKernelParams::new(mu, nu, Radians::new(range))?;
    let structure = tabulate(&params, options.final_steps, options.nodes_per_interval)?;
    let model = CovarianceModel::new(nugget, partial_sill, structure)?;
    let report = FitReport {
        range,
        mu,
        nu,
        partial_sill,
        nugget,
        objective: best_f,
        n_evaluations,
        best_history: history,
    };
    Ok((model, report))
}

/// Standard Nelder–Mead (reflection 1, expansion 2, contraction 1/2,
/// shrink 1/2). Appends the best-so-far objective to `history` once per
/// iteration and returns the best vertex.
fn nelder_mead(
    f: &mut impl FnMut(&[f64]) -> f64,
    x0: &[f64],
    step: f64,
    max_iterations: usize,
    tol: f64,
    history: &mut Vec<f64>,
) -> (Vec<f64>, f64) {
    let dim = x0.len();
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(dim + 1);
    simplex.push(x0.to_vec());
    for i in 0..dim {
        let mut v = x0.to_vec();
        v[i] += step;
        simplex.push(v);
    }
    let mut scores: Vec<f64> = simplex.iter().map(|v| f(v)).collect();
    let mut best_so_far = scores.iter().cloned().fold(f64::INFINITY, f64::min);

    for _ in 0..max_iterations {
        let mut order: Vec<usize> = (0..=dim).collect();
        order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap());
        let best = order[0];
        let worst = order[dim];
        let second_worst = order[dim - 1];

        best_so_far = best_so_far.min(scores[best]);
        history.push(best_so_far);

        if scores[worst] - scores[best] <= tol * (scores[best].abs() + tol) {
            break;
        }

        // Centroid of all but the worst vertex.
        let mut centroid = vec![0.0; dim];
        for &i in &order[..dim] {
            for k in 0..dim {
                centroid[k] += simplex[i][k];
            }
        }
        centroid.iter_mut().for_each(|c| *c /= dim as f64);

        let blend = |a: f64| -> Vec<f64> {
            (0..dim)
                .map(|k| centroid[k] + a * (simplex[worst][k] - centroid[k]))
                .collect()
        };

        let reflected = blend(-1.0);
        let f_reflected = f(&reflected);
        if f_reflected < scores[best] {
            let expanded = blend(-2.0);
            let f_expanded = f(&expanded);
            if f_expanded < f_reflected {
                simplex[worst] = expanded;
                scores[worst] = f_expanded;
            } else {
                simplex[worst] = reflected;
                scores[worst] = f_reflected;
            }
            continue;
        }
        if f_reflected < scores[second_worst] {
            simplex[worst] = reflected;
            scores[worst] = f_reflected;
            continue;
        }
        let contracted = if f_reflected < scores[worst] {
            blend(-0.5)
        } else {
            blend(0.5)
        };
        let f_contracted = f(&contracted);
        if f_contracted < scores[worst].min(f_reflected) {
            simplex[worst] = contracted;
            scores[worst] = f_contracted;
            continue;
        }
        // Shrink toward the best vertex.
        let anchor = simplex[best].clone();
        for i in 0..=dim {
            if i == best {
                continue;
            }
            for k in 0..dim {
                simplex[i][k] = anchor[k] + 0.5 * (simplex[i][k] - anchor[k]);
            }
            scores[i] = f(&simplex[i]);
        }
    }

    let mut best = 0;
    for i in 1..=dim {
        if scores[i] < scores[best] {
            best = i;
        }
    }
    best_so_far = best_so_far.min(scores[best]);
    history.push(best_so_far);
    (simplex[best].clone(), scores[best])
}
