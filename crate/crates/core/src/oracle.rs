//! Independent brute-force references used by tests and the `validate`
//! command: surface quadrature of the smooth-kernel convolution integral and
//! Monte-Carlo estimation of cap-intersection areas.
//!
//! These deliberately avoid the closed-form intersection machinery so they
//! can stand as oracles for it.

use crate::error::{Error, Result};
use crate::kernel::{smooth_kernel_value, SmoothKernelParams};
use crate::sphere::{Radians, SPHERE_AREA};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

/// Tensor-grid resolution for the convolution quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuadratureSpec {
    pub n_theta: usize,
    pub n_phi: usize,
}

impl QuadratureSpec {
    pub const MIN_NODES: usize = 16;

    /// Default resolution; enough for ~1e-6 self-normalization.
    pub const DEFAULT: QuadratureSpec = QuadratureSpec {
        n_theta: 512,
        n_phi: 1024,
    };

    pub fn new(n_theta: usize, n_phi: usize) -> Result<Self> {
        if n_theta < Self::MIN_NODES || n_phi < Self::MIN_NODES {
            return Err(Error::invalid(format!(
                "quadrature grid {n_theta}x{n_phi} below minimum {0}x{0}",
                Self::MIN_NODES
            )));
        }
        Ok(QuadratureSpec { n_theta, n_phi })
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`, by Newton iteration on the
/// Legendre recurrence.
pub(crate) fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 2);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // Tricomi-style initial guess.
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        for _ in 0..100 {
            let (p, d) = legendre_and_derivative(n, x);
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_and_derivative(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p_prev = 1.0;
    let mut p = x;
    for k in 2..=n {
        let kf = k as f64;
        let p_next = ((2.0 * kf - 1.0) * x * p - (kf - 1.0) * p_prev) / kf;
        p_prev = p;
        p = p_next;
    }
    let d = n as f64 * (x * p - p_prev) / (x * x - 1.0);
    (p, d)
}

/// Covariance of the *smooth* kernel at separation `d`, by direct surface
/// quadrature of the convolution integral.
///
/// Kernel one sits at `(1, 0, 0)`, kernel two at `(cos d, sin d, 0)`.
/// Gauss–Legendre handles the colatitude θ about the first center (restricted
/// to the kernel support, where the integrand lives), a uniform midpoint rule
/// handles the azimuth φ, and the integrand carries the `sin θ` surface
/// weight. The kernel is normalized by the same θ-rule, so `d = 0` returns 1
/// up to rounding.
pub fn quad_covariance(
    params: &SmoothKernelParams,
    d: Radians,
    spec: QuadratureSpec,
) -> Result<f64> {
    QuadratureSpec::new(spec.n_theta, spec.n_phi)?;
    let d = d.value();
    if !(0.0..=PI).contains(&d) {
        return Err(Error::invalid(format!("separation {d} outside [0, π]")));
    }
    let radius = params.kernel_radius().value().min(PI);
    let (mu, nu) = (params.mu(), params.nu());

    let (gl_nodes, gl_weights) = gauss_legendre(spec.n_theta);
    // Map [-1, 1] onto [0, radius].
    let half = 0.5 * radius;
    let theta: Vec<f64> = gl_nodes.iter().map(|x| half * (x + 1.0)).collect();
    let w_theta: Vec<f64> = gl_weights.iter().map(|w| w * half).collect();

    let k1: Vec<f64> = theta
        .iter()
        .map(|t| smooth_kernel_value(t / radius, mu, nu))
        .collect();
    let sin_theta: Vec<f64> = theta.iter().map(|t| t.sin()).collect();
    let cos_theta: Vec<f64> = theta.iter().map(|t| t.cos()).collect();

    // Self-consistent normalization: ∮ k² ds by the same θ-rule.
    let norm_sq: f64 = (0..spec.n_theta)
        .map(|i| 2.0 * PI * w_theta[i] * k1[i] * k1[i] * sin_theta[i])
        .sum();

    let (sin_d, cos_d) = d.sin_cos();
    // Chord threshold for points inside the second kernel's support.
    let chord_limit_sq = {
        let s = (0.5 * radius).sin();
        4.0 * s * s
    };
    let d_phi = 2.0 * PI / spec.n_phi as f64;
    let phi_trig: Vec<(f64, f64)> = (0..spec.n_phi)
        .map(|j| ((j as f64 + 0.5) * d_phi).sin_cos())
        .collect();

    let mut total = 0.0;
    for i in 0..spec.n_theta {
        if k1[i] == 0.0 {
            continue;
        }
        let (st, ct) = (sin_theta[i], cos_theta[i]);
        let dx = ct - cos_d;
        let dx_sq = dx * dx;
        let mut slice = 0.0;
        for &(sp, cp) in &phi_trig {
            // s' = (cos θ, sin θ cos φ, sin θ sin φ); chord to (cos d, sin d, 0).
            let dy = st * cp - sin_d;
            let dz = st * sp;
            let chord_sq = dx_sq + dy * dy + dz * dz;
            if chord_sq >= chord_limit_sq {
                continue;
            }
            let dist = 2.0 * (0.5 * chord_sq.sqrt()).clamp(0.0, 1.0).asin();
            slice += smooth_kernel_value(dist / radius, mu, nu);
        }
        total += w_theta[i] * k1[i] * st * slice * d_phi;
    }
    Ok(total / norm_sq)
}

/// Monte-Carlo estimate of the intersection area of two spherical caps, with
/// its binomial standard error. Uniform sampling over the whole sphere,
/// seeded and deterministic.
pub fn mc_cap_intersection(
    r0: Radians,
    r1: Radians,
    d: Radians,
    n_samples: u64,
    seed: u64,
) -> Result<(f64, f64)> {
    let (r0, r1, d) = (r0.value(), r1.value(), d.value());
    for (name, v) in [("r0", r0), ("r1", r1), ("d", d)] {
        if !(0.0..=PI).contains(&v) {
            return Err(Error::invalid(format!("{name} = {v} outside [0, π]")));
        }
    }
    if n_samples < 100_000 {
        return Err(Error::invalid(format!(
            "n_samples = {n_samples} below the 1e5 minimum"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Cap A at the north pole, cap B at colatitude d in the x-z plane.
    let cos_r0 = r0.cos();
    let cos_r1 = r1.cos();
    let (sin_d, cos_d) = d.sin_cos();
    let mut hits: u64 = 0;
    for _ in 0..n_samples {
        let z: f64 = rng.gen_range(-1.0..=1.0);
        let phi: f64 = rng.gen_range(0.0..(2.0 * PI));
        if z < cos_r0 {
            continue;
        }
        let s = (1.0 - z * z).max(0.0).sqrt();
        let dot_b = s * phi.cos() * sin_d + z * cos_d;
        if dot_b >= cos_r1 {
            hits += 1;
        }
    }
    let p = hits as f64 / n_samples as f64;
    let estimate = SPHERE_AREA * p;
    let std_error = SPHERE_AREA * (p * (1.0 - p) / n_samples as f64).sqrt();
    Ok((estimate, std_error))
}
