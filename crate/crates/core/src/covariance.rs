//! Closed-form covariance of a normalized step kernel and its tabulated,
//! fast-to-evaluate form.
//!
//! The covariance at separation `d` is the double sum over ring weights
//! `b_j` of exact cap-intersection areas:
//! `Σ_j b_j²·I(r_j, r_j, d) + 2·Σ_{j1} Σ_{j2<j1} b_{j1}·b_{j2}·I(r_{j1}, r_{j2}, d)`.
//!
//! For each row the inner sum splits into three zones by radius: disjoint
//! pairs contribute nothing, fully contained pairs contribute the smaller
//! cap's area (folded into a prefix sum, O(log n) per row), and only the
//! band of genuinely intersecting pairs pays for the closed-form evaluation.

use crate::error::{Error, Result};
use crate::kernel::StepKernel;
use crate::linalg::{jacobi_eigenvalues, Accumulator};
use crate::sphere::spherical_distance;
use crate::sphere::{pair_intersection, uniform_point, CapGeom, Radians, SeparationGeom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::f64::consts::PI;

/// How far from exact unit variance a kernel may drift before the covariance
/// operations reject it as unnormalized.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

/// Covariance of a normalized step kernel at spherical distance `d`.
pub fn covariance_at(kernel: &StepKernel, d: Radians) -> Result<f64> {
    let engine = CovarianceEngine::new(kernel)?;
    let d = d.value();
    if !(0.0..=PI).contains(&d) {
        return Err(Error::invalid(format!("distance {d} outside [0, π]")));
    }
    Ok(engine.value(d))
}

/// Reusable evaluator of the closed-form covariance: per-radius trig is
/// hoisted out so repeated evaluations only pay for the double sum.
pub struct CovarianceEngine {
    caps: Vec<CapGeom>,
    radii: Vec<f64>,
    diffs: Vec<f64>,
    /// prefix[j] = Σ_{m ≤ j} b_m · cap_area(r_m).
    prefix: Vec<f64>,
    support: f64,
}

impl CovarianceEngine {
    /// Fails with a contract error if the kernel is not normalized.
    pub fn new(kernel: &StepKernel) -> Result<Self> {
        if !kernel.is_normalized(NORMALIZATION_TOLERANCE) {
            return Err(Error::Contract(format!(
                "kernel is not normalized: ∮k² = {}",
                kernel.squared_norm()
            )));
        }
        let radii = kernel.radii().to_vec();
        let diffs = kernel.diffs();
        let caps: Vec<CapGeom> = radii.iter().map(|&r| CapGeom::new(r)).collect();
        let mut prefix = Vec::with_capacity(radii.len());
        let mut acc = Accumulator::default();
        for (cap, &b) in caps.iter().zip(&diffs) {
            acc.add(b * cap.area);
            prefix.push(acc.total());
        }
        let support = 2.0 * radii.last().unwrap();
        Ok(CovarianceEngine {
            caps,
            radii,
            diffs,
            prefix,
            support,
        })
    }

    /// Distance beyond which the covariance is identically zero (may exceed
    /// π for ranges above π, in which case there is no zero on the sphere).
    pub fn support(&self) -> f64 {
        self.support
    }

    /// Closed-form covariance at distance `d ∈ [0, π]`.
    pub fn value(&self, d: f64) -> f64 {
        debug_assert!((0.0..=PI).contains(&d), "distance {d}");
        if d >= self.support {
            return 0.0;
        }
        let sep = SeparationGeom::new(d);
        let n = self.radii.len();
        let mut total = Accumulator::default();
        for j1 in 0..n {
            let b1 = self.diffs[j1];
            let r1 = self.radii[j1];
            let diag = pair_intersection(&self.caps[j1], &self.caps[j1], &sep);
            total.add(b1 * b1 * diag);
            if j1 == 0 {
                continue;
            }
            // Zones over j2 < j1 (so r2 ≤ r1): radii at or below `cut` are
            // either disjoint from cap j1 or contained in it.
            let contain_cut = r1 - d;
            let disjoint_cut = d - r1;
            let cut = contain_cut.max(disjoint_cut);
            let zone = self.radii[..j1].partition_point(|&r2| r2 <= cut);
            let mut off = Accumulator::default();
            if contain_cut >= disjoint_cut && zone > 0 {
                off.add(self.prefix[zone - 1]);
            }
            for j2 in zone..j1 {
                off.add(self.diffs[j2] * pair_intersection(&self.caps[j1], &self.caps[j2], &sep));
            }
            total.add(2.0 * b1 * off.total());
        }
        total.total()
    }

    /// Evaluates many distances in parallel; output order matches input and
    /// does not depend on the number of threads.
    pub fn values(&self, distances: &[f64]) -> Vec<f64> {
        distances.par_iter().map(|&d| self.value(d)).collect()
    }
}

/// Evaluates several kernels that share one radius grid in a single pass:
/// each intersection area is computed once and reused for every member's
/// weighted sum. This is how a family of covariance curves for a fixed range
/// and step count is produced at the cost of roughly one curve.
pub struct CovarianceFamily {
    caps: Vec<CapGeom>,
    radii: Vec<f64>,
    /// diffs[k][j]: ring weight j of member k.
    diffs: Vec<Vec<f64>>,
    /// prefix[k][j] = Σ_{m ≤ j} b_m · cap_area(r_m) for member k.
    prefix: Vec<Vec<f64>>,
    support: f64,
}

impl CovarianceFamily {
    /// All kernels must be normalized and carry bit-identical radii.
    pub fn new(kernels: &[StepKernel]) -> Result<Self> {
        let first = kernels
            .first()
            .ok_or_else(|| Error::invalid("family needs at least one kernel"))?;
        let radii = first.radii().to_vec();
        let mut diffs = Vec::with_capacity(kernels.len());
        let mut prefix = Vec::with_capacity(kernels.len());
        let caps: Vec<CapGeom> = radii.iter().map(|&r| CapGeom::new(r)).collect();
        for kernel in kernels {
            if kernel.radii() != radii.as_slice() {
                return Err(Error::Contract(
                    "family members must share the same radii".into(),
                ));
            }
            if !kernel.is_normalized(NORMALIZATION_TOLERANCE) {
                return Err(Error::Contract(format!(
                    "kernel is not normalized: ∮k² = {}",
                    kernel.squared_norm()
                )));
            }
            let b = kernel.diffs();
            let mut acc = Accumulator::default();
            let mut pref = Vec::with_capacity(radii.len());
            for (cap, &w) in caps.iter().zip(&b) {
                acc.add(w * cap.area);
                pref.push(acc.total());
            }
            diffs.push(b);
            prefix.push(pref);
        }
        let support = 2.0 * radii.last().unwrap();
        Ok(CovarianceFamily {
            caps,
            radii,
            diffs,
            prefix,
            support,
        })
    }

    pub fn len(&self) -> usize {
        self.diffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diffs.is_empty()
    }

    /// Covariance of every member at distance `d`.
    pub fn value(&self, d: f64) -> Vec<f64> {
        debug_assert!((0.0..=PI).contains(&d), "distance {d}");
        let m = self.diffs.len();
        if d >= self.support {
            return vec![0.0; m];
        }
        let sep = SeparationGeom::new(d);
        let n = self.radii.len();
        let mut totals = vec![Accumulator::default(); m];
        let mut off = vec![0.0f64; m];
        for j1 in 0..n {
            let r1 = self.radii[j1];
            let diag = pair_intersection(&self.caps[j1], &self.caps[j1], &sep);
            for (total, diffs) in totals.iter_mut().zip(&self.diffs) {
                let b1 = diffs[j1];
                total.add(b1 * b1 * diag);
            }
            if j1 == 0 {
                continue;
            }
            let contain_cut = r1 - d;
            let disjoint_cut = d - r1;
            let cut = contain_cut.max(disjoint_cut);
            let zone = self.radii[..j1].partition_point(|&r2| r2 <= cut);
            if contain_cut >= disjoint_cut && zone > 0 {
                for (slot, prefix) in off.iter_mut().zip(&self.prefix) {
                    *slot = prefix[zone - 1];
                }
            } else {
                off.iter_mut().for_each(|v| *v = 0.0);
            }
            for j2 in zone..j1 {
                let area = pair_intersection(&self.caps[j1], &self.caps[j2], &sep);
                if area != 0.0 {
                    for (slot, diffs) in off.iter_mut().zip(&self.diffs) {
                        *slot += diffs[j2] * area;
                    }
                }
            }
            for ((total, diffs), slot) in totals.iter_mut().zip(&self.diffs).zip(&off) {
                total.add(2.0 * diffs[j1] * slot);
            }
        }
        totals.iter().map(|t| t.total()).collect()
    }

    /// Family curves over a grid, in parallel; `result[i][k]` is member `k`
    /// at `distances[i]`.
    pub fn values(&self, distances: &[f64]) -> Vec<Vec<f64>> {
        distances.par_iter().map(|&d| self.value(d)).collect()
    }
}

/// Piecewise-cubic tabulation of the covariance: knots partition
/// `[0, min(support, π)]` and each interval carries power-basis coefficients
/// in the local coordinate `u = (d − knot)/(width)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedCovariance {
    range: Radians,
    shape: Option<(f64, f64)>,
    n_steps: usize,
    /// C(d) = 0 exactly for d at or beyond this (infinite when the range
    /// exceeds π and the covariance has no zero on the sphere).
    zero_from: f64,
    knots: Vec<f64>,
    coeffs: Vec<[f64; 4]>,
}

impl TabulatedCovariance {
    pub(crate) fn from_parts(
        range: Radians,
        shape: Option<(f64, f64)>,
        n_steps: usize,
        knots: Vec<f64>,
        coeffs: Vec<[f64; 4]>,
    ) -> Result<Self> {
        if knots.len() != coeffs.len() + 1 || coeffs.is_empty() {
            return Err(Error::Tabulation(
                "knot and coefficient counts are inconsistent".into(),
            ));
        }
        if knots[0] != 0.0 {
            return Err(Error::Tabulation("first knot must be 0".into()));
        }
        if knots.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Tabulation("knots must increase strictly".into()));
        }
        let support = 2.0 * 0.5 * range.value();
        let zero_from = if support <= PI {
            support
        } else {
            f64::INFINITY
        };
        let last = *knots.last().unwrap();
        if (last - support.min(PI)).abs() > 1e-9 {
            return Err(Error::Tabulation(format!(
                "last knot {last} does not reach the support {}",
                support.min(PI)
            )));
        }
        Ok(TabulatedCovariance {
            range,
            shape,
            n_steps,
            zero_from,
            knots,
            coeffs,
        })
    }

    pub fn range(&self) -> Radians {
        self.range
    }

    /// Shape parameters (μ, ν) when the tabulation came from the smooth
    /// kernel family.
    pub fn shape(&self) -> Option<(f64, f64)> {
        self.shape
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn coefficients(&self) -> &[[f64; 4]] {
        &self.coeffs
    }

    /// Piecewise-cubic covariance value. Exactly zero at and beyond the
    /// support; interpolation overshoot beyond `[0, 1]` larger than 1e-9 is
    /// reported as a tabulation error rather than clamped away.
    pub fn evaluate(&self, d: Radians) -> Result<f64> {
        let d = d.value();
        if !(0.0..=PI).contains(&d) {
            return Err(Error::invalid(format!("distance {d} outside [0, π]")));
        }
        if d >= self.zero_from {
            return Ok(0.0);
        }
        let last = self.coeffs.len() - 1;
        let idx = match self.knots.binary_search_by(|k| k.partial_cmp(&d).unwrap()) {
            Ok(i) => i.min(last),
            Err(i) => (i - 1).min(last),
        };
        let width = self.knots[idx + 1] - self.knots[idx];
        let u = (d - self.knots[idx]) / width;
        let c = &self.coeffs[idx];
        let value = c[0] + u * (c[1] + u * (c[2] + u * c[3]));
        if value < 0.0 {
            if value < -1e-9 {
                return Err(Error::Tabulation(format!(
                    "tabulated value {value} at d = {d} overshoots below 0"
                )));
            }
            return Ok(0.0);
        }
        if value > 1.0 {
            if value > 1.0 + 1e-9 {
                return Err(Error::Tabulation(format!(
                    "tabulated value {value} at d = {d} overshoots above 1"
                )));
            }
            return Ok(1.0);
        }
        Ok(value)
    }
}

/// Extreme eigenvalues of a Gram matrix built from the tabulated covariance
/// on `n_points` uniform random points.
#[derive(Debug, Clone, Copy)]
pub struct PsdReport {
    pub n_points: usize,
    pub lambda_min: f64,
    pub lambda_max: f64,
}

impl PsdReport {
    /// Passes when the most negative eigenvalue is within eigensolver noise
    /// of zero relative to the largest.
    pub fn passes(&self) -> bool {
        self.lambda_min >= -1e-10 * self.lambda_max
    }
}

/// Samples `n_points` uniform points (seeded), assembles the Gram matrix via
/// `evaluate`, and returns its extreme eigenvalues.
pub fn check_psd(t: &TabulatedCovariance, n_points: usize, seed: u64) -> Result<PsdReport> {
    if n_points < 2 {
        return Err(Error::invalid("check_psd needs at least 2 points"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<_> = (0..n_points).map(|_| uniform_point(&mut rng)).collect();
    let mut gram = vec![0.0; n_points * n_points];
    let diag = t.evaluate(Radians::ZERO)?;
    for i in 0..n_points {
        gram[i * n_points + i] = diag;
        for j in 0..i {
            let d = spherical_distance(points[i], points[j]);
            let v = t.evaluate(d)?;
            gram[i * n_points + j] = v;
            gram[j * n_points + i] = v;
        }
    }
    let eigenvalues = jacobi_eigenvalues(&gram, n_points);
    Ok(PsdReport {
        n_points,
        lambda_min: *eigenvalues.first().unwrap(),
        lambda_max: *eigenvalues.last().unwrap(),
    })
}

/// A fitted covariance model: nugget, partial sill, and the tabulated
/// correlation structure.
#[derive(Debug, Clone)]
pub struct CovarianceModel {
    nugget: f64,
    partial_sill: f64,
    structure: TabulatedCovariance,
}

impl CovarianceModel {
    pub fn new(nugget: f64, partial_sill: f64, structure: TabulatedCovariance) -> Result<Self> {
        if !(nugget.is_finite() && nugget >= 0.0) {
            return Err(Error::invalid(format!("nugget {nugget} must be ≥ 0")));
        }
        if !(partial_sill.is_finite() && partial_sill > 0.0) {
            return Err(Error::invalid(format!(
                "partial sill {partial_sill} must be > 0"
            )));
        }
        Ok(CovarianceModel {
            nugget,
            partial_sill,
            structure,
        })
    }

    pub fn nugget(&self) -> f64 {
        self.nugget
    }

    pub fn partial_sill(&self) -> f64 {
        self.partial_sill
    }

    /// Total sill: model value at zero separation.
    pub fn sill(&self) -> f64 {
        self.nugget + self.partial_sill
    }

    pub fn structure(&self) -> &TabulatedCovariance {
        &self.structure
    }

    pub fn range(&self) -> Radians {
        self.structure.range()
    }

    /// Model covariance: the nugget contributes only at `d = 0`.
    pub fn value(&self, d: Radians) -> Result<f64> {
        let c = self.partial_sill * self.structure.evaluate(d)?;
        Ok(if d.value() == 0.0 { self.nugget + c } else { c })
    }
}
