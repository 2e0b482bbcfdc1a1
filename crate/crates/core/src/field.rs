//! Geostatistics on the sphere: empirical variograms, ordinary kriging with
//! compact-support sparsity, and unconditional simulation by convolving the
//! step kernel with white noise on a quasi-uniform lattice.

use crate::covariance::CovarianceModel;
use crate::error::{Error, Result};
use crate::kernel::StepKernel;
use crate::linalg::{conjugate_gradient, Cholesky, CsrMatrix};
use crate::sphere::{spherical_distance, Radians, UnitVec3, SPHERE_AREA};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use std::f64::consts::PI;

/// Point observations: unit-sphere locations with one value each.
#[derive(Debug, Clone)]
pub struct SampleSet {
    locations: Vec<UnitVec3>,
    values: Vec<f64>,
}

impl SampleSet {
    pub fn new(locations: Vec<UnitVec3>, values: Vec<f64>) -> Result<Self> {
        if locations.is_empty() || locations.len() != values.len() {
            return Err(Error::invalid(
                "sample set needs equal, nonzero numbers of locations and values",
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("sample values must be finite"));
        }
        Ok(SampleSet { locations, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn locations(&self) -> &[UnitVec3] {
        &self.locations
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Classical binned semivariogram estimate.
#[derive(Debug, Clone)]
pub struct BinnedVariogram {
    pub(crate) edges: Vec<f64>,
    pub(crate) mean_distance: Vec<f64>,
    pub(crate) semivariance: Vec<f64>,
    pub(crate) counts: Vec<u64>,
}

impl BinnedVariogram {
    pub fn n_bins(&self) -> usize {
        self.counts.len()
    }

    /// Bin edges in radians, `n_bins + 1` of them.
    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    /// Mean pair distance per bin (zero for empty bins).
    pub fn mean_distance(&self) -> &[f64] {
        &self.mean_distance
    }

    /// Estimated semivariance γ̂ per bin (zero for empty bins).
    pub fn semivariance(&self) -> &[f64] {
        &self.semivariance
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn n_non_empty(&self) -> usize {
        self.counts.iter().filter(|&&c| c > 0).count()
    }
}

/// Classical estimator: γ̂(bin) = half the mean squared value difference over
/// the point pairs falling in the bin. Bins are uniform on `[0, max_lag]`;
/// pairs beyond `max_lag` are ignored and empty bins keep a zero count.
pub fn empirical_variogram(
    samples: &SampleSet,
    n_bins: usize,
    max_lag: Radians,
) -> Result<BinnedVariogram> {
    if samples.len() < 2 {
        return Err(Error::invalid(
            "variogram estimation needs at least 2 samples",
        ));
    }
    if n_bins == 0 {
        return Err(Error::invalid("n_bins must be at least 1"));
    }
    let max_lag = max_lag.value();
    if !(max_lag > 0.0 && max_lag <= PI) {
        return Err(Error::invalid(format!("max_lag {max_lag} outside (0, π]")));
    }
    let mut sum_sq = vec![0.0f64; n_bins];
    let mut sum_d = vec![0.0f64; n_bins];
    let mut counts = vec![0u64; n_bins];
    let locs = samples.locations();
    let vals = samples.values();
    for i in 0..locs.len() {
        for j in (i + 1)..locs.len() {
            let d = spherical_distance(locs[i], locs[j]).value();
            if d > max_lag {
                continue;
            }
            let bin = ((d / max_lag) * n_bins as f64) as usize;
            let bin = bin.min(n_bins - 1);
            let dz = vals[i] - vals[j];
            sum_sq[bin] += dz * dz;
            sum_d[bin] += d;
            counts[bin] += 1;
        }
    }
    let edges = (0..=n_bins)
        .map(|k| max_lag * k as f64 / n_bins as f64)
        .collect();
    let mut semivariance = vec![0.0; n_bins];
    let mut mean_distance = vec![0.0; n_bins];
    for b in 0..n_bins {
        if counts[b] > 0 {
            semivariance[b] = 0.5 * sum_sq[b] / counts[b] as f64;
            mean_distance[b] = sum_d[b] / counts[b] as f64;
        }
    }
    Ok(BinnedVariogram {
        edges,
        mean_distance,
        semivariance,
        counts,
    })
}

/// Quasi-uniform white-noise discretization: Fibonacci-spiral nodes, each
/// representing an equal cell of area `4π/N`. The seed drives the noise
/// draws, not the placement.
#[derive(Debug, Clone)]
pub struct NoiseLattice {
    nodes: Vec<UnitVec3>,
    seed: u64,
}

impl NoiseLattice {
    pub const MIN_NODES: usize = 100;

    pub fn fibonacci(n_nodes: usize, seed: u64) -> Result<Self> {
        if n_nodes < Self::MIN_NODES {
            return Err(Error::invalid(format!(
                "noise lattice needs at least {} nodes, got {n_nodes}",
                Self::MIN_NODES
            )));
        }
        // Golden-angle spiral with midpoint z-placement.
        let golden = PI * (3.0 - 5.0f64.sqrt());
        let n = n_nodes as f64;
        let nodes = (0..n_nodes)
            .map(|i| {
                let z = 1.0 - (2.0 * i as f64 + 1.0) / n;
                let s = (1.0 - z * z).max(0.0).sqrt();
                let phi = golden * i as f64;
                UnitVec3::new(s * phi.cos(), s * phi.sin(), z).expect("lattice node")
            })
            .collect();
        Ok(NoiseLattice { nodes, seed })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[UnitVec3] {
        &self.nodes
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Area represented by each node.
    pub fn cell_weight(&self) -> f64 {
        SPHERE_AREA / self.nodes.len() as f64
    }
}

/// Kernel weights from every target to every lattice node, shared across
/// realizations.
fn convolution_weights(
    kernel: &StepKernel,
    lattice: &NoiseLattice,
    targets: &[UnitVec3],
) -> Vec<Vec<f64>> {
    let scale = lattice.cell_weight().sqrt();
    targets
        .par_iter()
        .map(|&t| {
            lattice
                .nodes()
                .iter()
                .map(|&node| scale * kernel.value_at(spherical_distance(t, node)))
                .collect()
        })
        .collect()
}

/// One unconditional realization: `Y(t) = √(4π/N)·Σ_i k(dist(t, nodeᵢ))·ξᵢ`
/// with iid standard normal ξ drawn from the lattice seed. For a normalized
/// kernel the field variance tends to 1 as the lattice refines.
pub fn simulate_unconditional(
    kernel: &StepKernel,
    lattice: &NoiseLattice,
    targets: &[UnitVec3],
) -> Vec<f64> {
    simulate_ensemble(kernel, lattice, targets, 1)
        .pop()
        .unwrap()
}

/// Multiple independent realizations; realization `r` uses ChaCha stream `r`
/// of the lattice seed, so any prefix of the ensemble is reproducible
/// regardless of thread count.
pub fn simulate_ensemble(
    kernel: &StepKernel,
    lattice: &NoiseLattice,
    targets: &[UnitVec3],
    n_realizations: usize,
) -> Vec<Vec<f64>> {
    let weights = convolution_weights(kernel, lattice, targets);
    let n_nodes = lattice.len();
    (0..n_realizations)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(lattice.seed());
            rng.set_stream(r as u64);
            let noise: Vec<f64> = (0..n_nodes)
                .map(|_| StandardNormal.sample(&mut rng))
                .collect();
            weights
                .iter()
                .map(|w| w.iter().zip(&noise).map(|(wi, xi)| wi * xi).sum())
                .collect()
        })
        .collect()
}

/// Which factorization `krige_with` uses for the kriging system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverPath {
    /// Dense Cholesky up to `DENSE_LIMIT` samples, sparse above.
    Auto,
    Dense,
    Sparse,
}

/// Sample count beyond which the automatic path switches to the sparse
/// solver.
pub const DENSE_LIMIT: usize = 2000;

/// Ordinary kriging of `targets` from `samples` under `model`.
///
/// Solves the constrained system per target; the covariance matrix drops
/// entries at or beyond the range (compact support), the diagonal carries
/// `nugget + 1e-12·sill` on top of the sill to tame duplicate points, and
/// the weights satisfy Σλ = 1. Returns `(prediction, variance)` per target.
pub fn krige(
    model: &CovarianceModel,
    samples: &SampleSet,
    targets: &[UnitVec3],
) -> Result<Vec<(f64, f64)>> {
    krige_with(model, samples, targets, SolverPath::Auto)
}

pub fn krige_with(
    model: &CovarianceModel,
    samples: &SampleSet,
    targets: &[UnitVec3],
    path: SolverPath,
) -> Result<Vec<(f64, f64)>> {
    let n = samples.len();
    let sill = model.sill();
    let range = model.range().value();
    let locs = samples.locations();
    let values = samples.values();

    let dense = match path {
        SolverPath::Auto => n <= DENSE_LIMIT,
        SolverPath::Dense => true,
        SolverPath::Sparse => false,
    };

    // Right-hand sides: covariance from each target to the samples.
    let rhs: Vec<Vec<f64>> = targets
        .par_iter()
        .map(|&t| {
            locs.iter()
                .map(|&p| {
                    let d = spherical_distance(t, p);
                    if d.value() >= range {
                        Ok(0.0)
                    } else {
                        model.value(d)
                    }
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let diagonal = sill + 1e-12 * sill;
    type Solver = Box<dyn Fn(&[f64]) -> Result<Vec<f64>> + Sync>;
    let solver: Solver = if dense {
        let mut gram = vec![0.0; n * n];
        for i in 0..n {
            gram[i * n + i] = diagonal;
            for j in 0..i {
                let d = spherical_distance(locs[i], locs[j]);
                let v = if d.value() >= range {
                    0.0
                } else {
                    model.value(d)?
                };
                gram[i * n + j] = v;
                gram[j * n + i] = v;
            }
        }
        let factor = Cholesky::factor(&gram, n)
            .map_err(|e| Error::Singular(format!("{e} (n = {n}, nugget = {})", model.nugget())))?;
        Box::new(move |b: &[f64]| Ok(factor.solve(b)))
    } else {
        let rows: Vec<Vec<(usize, f64)>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut row = Vec::new();
                for j in 0..n {
                    if i == j {
                        row.push((j, diagonal));
                        continue;
                    }
                    let d = spherical_distance(locs[i], locs[j]);
                    if d.value() < range {
                        let v = model.value(d)?;
                        if v != 0.0 {
                            row.push((j, v));
                        }
                    }
                }
                Ok(row)
            })
            .collect::<Result<Vec<_>>>()?;
        let csr = CsrMatrix::from_rows(&rows);
        Box::new(move |b: &[f64]| {
            conjugate_gradient(&csr, b, 1e-13, 20 * n.max(100))
                .map_err(|e| Error::Singular(format!("{e} (sparse path, n = {n})")))
        })
    };

    // Unbiasedness via two SPD solves: K w1 = 1 shared, K a = c per target.
    let w1 = solver(&vec![1.0; n])?;
    let w1_sum: f64 = w1.iter().sum();
    if !(w1_sum.is_finite() && w1_sum > 0.0) {
        return Err(Error::Singular(format!(
            "degenerate unbiasedness normalization 1ᵀK⁻¹1 = {w1_sum} (n = {n})"
        )));
    }

    rhs.par_iter()
        .map(|c| {
            let a = solver(c)?;
            let a_sum: f64 = a.iter().sum();
            let multiplier = (a_sum - 1.0) / w1_sum;
            let mut prediction = 0.0;
            let mut lambda_dot_c = 0.0;
            for i in 0..n {
                let lambda = a[i] - multiplier * w1[i];
                prediction += lambda * values[i];
                lambda_dot_c += lambda * c[i];
            }
            let variance = sill - lambda_dot_c - multiplier;
            Ok((prediction, variance))
        })
        .collect()
}
