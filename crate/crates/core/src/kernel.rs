//! Zonal kernels: the smooth two-parameter family, its step-function
//! discretization, and unit-variance normalization.
//!
//! A kernel of radius `range/2` convolved with itself produces a covariance
//! with range `range`, so `SmoothKernelParams` carries the covariance range
//! and exposes the kernel radius as half of it.

use crate::error::{Error, Result};
use crate::sphere::{cap_area_unchecked, Radians};
use std::f64::consts::PI;

/// Shape and scale of the smooth kernel `(1 − h^μ)^ν` on `h ∈ [0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothKernelParams {
    mu: f64,
    nu: f64,
    range: Radians,
}

impl SmoothKernelParams {
    /// Both shape parameters must be positive; the covariance range must lie
    /// in `(0, 2π]` so the kernel radius stays within the maximum disk
    /// radius π. Ranges above π are allowed but the covariance then has no
    /// zero on the sphere.
    pub fn new(mu: f64, nu: f64, range: Radians) -> Result<Self> {
        if !(mu.is_finite() && mu > 0.0) {
            return Err(Error::invalid(format!(
                "shape parameter mu = {mu}; μ > 0 is required"
            )));
        }
        if !(nu.is_finite() && nu > 0.0) {
            return Err(Error::invalid(format!(
                "shape parameter nu = {nu}; ν > 0 is required"
            )));
        }
        let r = range.value();
        if !(r.is_finite() && r > 0.0 && r <= 2.0 * PI) {
            return Err(Error::invalid(format!(
                "covariance range {r} outside (0, 2π]"
            )));
        }
        Ok(SmoothKernelParams { mu, nu, range })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn range(&self) -> Radians {
        self.range
    }

    /// Kernel radius on the sphere: half the covariance range.
    pub fn kernel_radius(&self) -> Radians {
        Radians::new(0.5 * self.range.value())
    }

    /// Kernel value at spherical distance `d` from the center (unnormalized).
    pub fn value_at(&self, d: Radians) -> f64 {
        let h = d.value() / self.kernel_radius().value();
        smooth_kernel_value(h, self.mu, self.nu)
    }
}

/// The smooth kernel family: `(1 − h^μ)^ν` for `h < 1`, zero otherwise.
#[inline]
pub fn smooth_kernel_value(h: f64, mu: f64, nu: f64) -> f64 {
    debug_assert!(h >= 0.0, "normalized distance h = {h}");
    if h < 1.0 {
        (1.0 - h.powf(mu)).powf(nu)
    } else {
        0.0
    }
}

/// A zonal step kernel: value `levels[j]` on the ring between `radii[j-1]`
/// and `radii[j]` (with an implicit inner radius of zero), zero beyond the
/// last radius.
#[derive(Debug, Clone, PartialEq)]
pub struct StepKernel {
    /// Strictly increasing outer ring radii in `(0, π]`, radians.
    radii: Vec<f64>,
    /// Kernel value on each ring.
    levels: Vec<f64>,
}

impl StepKernel {
    pub fn new(radii: Vec<f64>, levels: Vec<f64>) -> Result<Self> {
        if radii.is_empty() || radii.len() != levels.len() {
            return Err(Error::invalid(
                "step kernel needs equal, nonzero numbers of radii and levels",
            ));
        }
        let mut prev = 0.0;
        for &r in &radii {
            if !(r.is_finite() && r > prev && r <= PI) {
                return Err(Error::invalid(format!(
                    "radii must increase strictly within (0, π]; got {r} after {prev}"
                )));
            }
            prev = r;
        }
        if levels.iter().any(|a| !a.is_finite()) {
            return Err(Error::invalid("step kernel levels must be finite"));
        }
        Ok(StepKernel { radii, levels })
    }

    pub fn n_steps(&self) -> usize {
        self.radii.len()
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    /// Differences `b_j = a_j − a_{j+1}` with `b_n = a_n`; the disk-indicator
    /// weights of the ring representation.
    pub fn diffs(&self) -> Vec<f64> {
        let n = self.levels.len();
        let mut b = Vec::with_capacity(n);
        for j in 0..n - 1 {
            b.push(self.levels[j] - self.levels[j + 1]);
        }
        b.push(self.levels[n - 1]);
        b
    }

    /// Largest radius with nonzero kernel value.
    pub fn support(&self) -> Radians {
        Radians::new(*self.radii.last().unwrap())
    }

    /// Kernel value at spherical distance `d` from the center.
    pub fn value_at(&self, d: Radians) -> f64 {
        let d = d.value();
        // First ring whose outer radius exceeds d.
        let idx = self.radii.partition_point(|&r| r <= d);
        if idx < self.radii.len() {
            self.levels[idx]
        } else {
            0.0
        }
    }

    /// Surface integral of the squared kernel, `Σ a_k²·(D(r_k) − D(r_{k−1}))`.
    pub fn squared_norm(&self) -> f64 {
        let mut total = 0.0;
        let mut prev_area = 0.0;
        for (&r, &a) in self.radii.iter().zip(&self.levels) {
            let area = cap_area_unchecked(r);
            total += a * a * (area - prev_area);
            prev_area = area;
        }
        total
    }

    /// Whether the unit-variance constraint holds to within `tol`.
    pub fn is_normalized(&self, tol: f64) -> bool {
        (self.squared_norm() - 1.0).abs() <= tol
    }
}

/// Approximates the smooth kernel by `n_steps` rings of equal width in
/// normalized distance, each carrying the kernel's midpoint value. The
/// result is not yet normalized.
pub fn discretize(params: &SmoothKernelParams, n_steps: usize) -> Result<StepKernel> {
    if n_steps == 0 {
        return Err(Error::invalid("n_steps must be at least 1"));
    }
    let radius = params.kernel_radius().value();
    let n = n_steps as f64;
    let mut radii = Vec::with_capacity(n_steps);
    let mut levels = Vec::with_capacity(n_steps);
    for j in 1..=n_steps {
        radii.push(radius * (j as f64 / n));
        let h_mid = (j as f64 - 0.5) / n;
        levels.push(smooth_kernel_value(h_mid, params.mu(), params.nu()));
    }
    StepKernel::new(radii, levels)
}

/// Rescales every level by one common factor so that the unit-variance
/// constraint holds. Idempotent; an all-zero kernel cannot be normalized.
pub fn normalize(kernel: &StepKernel) -> Result<StepKernel> {
    let ssq = kernel.squared_norm();
    if ssq == 0.0 {
        return Err(Error::DegenerateKernel);
    }
    if !ssq.is_finite() {
        return Err(Error::invalid(format!("squared norm {ssq} is not finite")));
    }
    let scale = 1.0 / ssq.sqrt();
    let levels = kernel.levels.iter().map(|a| a * scale).collect();
    StepKernel::new(kernel.radii.clone(), levels)
}
