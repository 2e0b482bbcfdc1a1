//! Piecewise-cubic tabulation of the closed-form covariance.
//!
//! Between consecutive breakpoints (the distances `r_i + r_j` and
//! `|r_i − r_j|` where some intersection term changes branch) the covariance
//! is smooth, but its second derivative blows up like a square root at the
//! breakpoints themselves. Each breakpoint interval therefore starts from
//! cos-clustered sub-pieces (dense near both ends) and every piece is
//! bisected until a cubic through four Lobatto nodes matches the closed form
//! at interior check points, keeping the audit error under 1e-9.

use crate::covariance::{CovarianceEngine, TabulatedCovariance};
use crate::error::{Error, Result};
use crate::kernel::{discretize, normalize, SmoothKernelParams, StepKernel};
use crate::sphere::Radians;
use std::f64::consts::PI;

/// Per-piece acceptance threshold; below half the 1e-9 audit budget.
const PIECE_TOLERANCE: f64 = 4e-10;
const MAX_DEPTH: usize = 48;
/// Pieces narrower than this are accepted as-is; the covariance varies by
/// far less than the audit budget across them.
const MIN_PIECE_WIDTH: f64 = 1e-11;
const BREAKPOINT_DEDUPE: f64 = 1e-10;
/// Hard cap on the total piece count; hitting it means the refinement is
/// chasing noise and the tabulation is reported as failed instead.
const MAX_PIECES: usize = 4_000_000;

/// Full pipeline: discretize the smooth kernel, normalize, tabulate. The
/// result records the (μ, ν) provenance needed by the model file format.
pub fn tabulate(
    params: &SmoothKernelParams,
    n_steps: usize,
    nodes_per_interval: usize,
) -> Result<TabulatedCovariance> {
    let kernel = normalize(&discretize(params, n_steps)?)?;
    tabulate_impl(
        &kernel,
        nodes_per_interval,
        Some((params.mu(), params.nu())),
    )
}

/// Tabulates an arbitrary normalized step kernel (no shape provenance).
pub fn tabulate_kernel(
    kernel: &StepKernel,
    nodes_per_interval: usize,
) -> Result<TabulatedCovariance> {
    tabulate_impl(kernel, nodes_per_interval, None)
}

fn tabulate_impl(
    kernel: &StepKernel,
    nodes_per_interval: usize,
    shape: Option<(f64, f64)>,
) -> Result<TabulatedCovariance> {
    if nodes_per_interval < 4 {
        return Err(Error::invalid(format!(
            "nodes_per_interval = {nodes_per_interval} below the minimum of 4"
        )));
    }
    let engine = CovarianceEngine::new(kernel)?;
    let support = engine.support().min(PI);
    let bps = breakpoints(kernel.radii(), support);

    let mut knots = vec![0.0];
    let mut coeffs: Vec<[f64; 4]> = Vec::new();
    let initial_pieces = (nodes_per_interval / 4).max(1);
    for window in bps.windows(2) {
        let (lo, hi) = (window[0], window[1]);
        let mid = 0.5 * (lo + hi);
        let half = 0.5 * (hi - lo);
        let mut edges = Vec::with_capacity(initial_pieces + 1);
        edges.push(lo);
        for k in 1..initial_pieces {
            edges.push(mid - half * (PI * k as f64 / initial_pieces as f64).cos());
        }
        edges.push(hi);
        for pair in edges.windows(2) {
            refine(&engine, pair[0], pair[1], 0, &mut knots, &mut coeffs)?;
        }
    }

    let range = Radians::new(2.0 * kernel.support().value());
    TabulatedCovariance::from_parts(range, shape, kernel.n_steps(), knots, coeffs)
}

/// Sorted, deduplicated branch-change distances in `[0, support]`.
fn breakpoints(radii: &[f64], support: f64) -> Vec<f64> {
    let mut points = vec![0.0, support];
    for (i, &ri) in radii.iter().enumerate() {
        for &rj in &radii[..=i] {
            let sum = ri + rj;
            if sum < support {
                points.push(sum);
            }
            let diff = ri - rj;
            if diff > 0.0 && diff < support {
                points.push(diff);
            }
        }
    }
    points.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut merged: Vec<f64> = Vec::with_capacity(points.len());
    for p in points {
        match merged.last() {
            Some(&last) if p - last <= BREAKPOINT_DEDUPE => {}
            _ => merged.push(p),
        }
    }
    // Dedupe must not detach the endpoints.
    if *merged.last().unwrap() < support {
        *merged.last_mut().unwrap() = support;
    }
    merged
}

/// Cubic through the four Lobatto-style nodes u ∈ {0, 1/4, 3/4, 1} in the
/// local coordinate of `[lo, hi]`.
fn fit_cubic(f0: f64, f1: f64, f2: f64, f3: f64) -> [f64; 4] {
    let g1 = f1 - f0;
    let g2 = f2 - f0;
    let g3 = f3 - f0;
    let c1 = g3 - 8.0 * g2 / 3.0 + 8.0 * g1;
    let c2 = (-56.0 * g1 + 40.0 * g2 - 16.0 * g3) / 3.0;
    let c3 = (32.0 * g1 - 32.0 * g2 + 16.0 * g3) / 3.0;
    [f0, c1, c2, c3]
}

const CHECK_POINTS: [f64; 5] = [0.02, 0.12, 0.5, 0.88, 0.98];

fn refine(
    engine: &CovarianceEngine,
    lo: f64,
    hi: f64,
    depth: usize,
    knots: &mut Vec<f64>,
    coeffs: &mut Vec<[f64; 4]>,
) -> Result<()> {
    let width = hi - lo;
    let f0 = engine.value(lo);
    let f1 = engine.value(lo + 0.25 * width);
    let f2 = engine.value(lo + 0.75 * width);
    let f3 = engine.value(hi);
    let c = fit_cubic(f0, f1, f2, f3);

    if depth < MAX_DEPTH && width > MIN_PIECE_WIDTH {
        let mut worst = 0.0f64;
        for &u in &CHECK_POINTS {
            let predicted = c[0] + u * (c[1] + u * (c[2] + u * c[3]));
            let actual = engine.value(lo + u * width);
            worst = worst.max((predicted - actual).abs());
        }
        if worst > PIECE_TOLERANCE {
            let mid = 0.5 * (lo + hi);
            refine(engine, lo, mid, depth + 1, knots, coeffs)?;
            refine(engine, mid, hi, depth + 1, knots, coeffs)?;
            return Ok(());
        }
    }
    if coeffs.len() >= MAX_PIECES {
        return Err(Error::Tabulation(format!(
            "refinement exceeded {MAX_PIECES} pieces without meeting the tolerance"
        )));
    }
    knots.push(hi);
    coeffs.push(c);
    Ok(())
}
