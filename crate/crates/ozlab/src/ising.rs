//! Monte Carlo and transfer-matrix engines for finite-range Ising
//! ferromagnets: cluster sampling, two-point correlation measurement with
//! binning errors, exact strip and chain oracles, and asymptotic-form
//! fitting of the measured decay.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::Point;
use crate::stats::BinningAccumulator;

/// Finite-range ferromagnetic couplings on `Z^d` at inverse temperature
/// `beta`.
#[derive(Clone, Debug)]
pub struct IsingModel {
    pub dim: usize,
    /// Coupling vectors with their strengths; stores both `v` and `-v`.
    pub couplings: Vec<(Point, f64)>,
    pub beta: f64,
    /// Optional safety bound keeping runs away from the critical point.
    pub beta_bound: Option<f64>,
}

/// Default safety bound for the square-lattice nearest-neighbour model.
pub const DEFAULT_BETA_BOUND_2D_NN: f64 = 0.42;

impl IsingModel {
    /// Validate and build a model from one representative per coupling
    /// pair; the mirror image is filled in automatically.
    pub fn new(dim: usize, couplings: Vec<(Point, f64)>, beta: f64) -> Result<Self> {
        if dim < 1 {
            return Err(Error::domain("dimension must be at least 1"));
        }
        if beta < 0.0 {
            return Err(Error::domain(format!("beta must be nonnegative, got {beta}")));
        }
        let mut full: Vec<(Point, f64)> = Vec::new();
        for (v, j) in couplings {
            if v.dim() != dim {
                return Err(Error::DimensionMismatch {
                    left: v.dim(),
                    right: dim,
                });
            }
            if v.is_zero() {
                return Err(Error::domain("self-coupling J_0 is not allowed"));
            }
            if j < 0.0 {
                return Err(Error::domain(format!(
                    "ferromagnetic couplings must be nonnegative; J{:?} = {j}",
                    v.0
                )));
            }
            if j == 0.0 {
                continue;
            }
            for w in [v.clone(), v.scale(-1)] {
                match full.iter_mut().find(|(u, _)| *u == w) {
                    Some((_, existing)) => {
                        if *existing != j {
                            return Err(Error::domain(format!(
                                "couplings must satisfy J[v] == J[-v]; got {existing} and {j} at {:?}",
                                w.0
                            )));
                        }
                    }
                    None => full.push((w, j)),
                }
            }
        }
        if full.is_empty() {
            return Err(Error::domain("at least one positive coupling is required"));
        }
        full.sort_by(|a, b| a.0.cmp(&b.0));
        let is_2d_nn = dim == 2 && full.iter().all(|(v, _)| v.l1_norm() == 1);
        Ok(IsingModel {
            dim,
            couplings: full,
            beta,
            beta_bound: if is_2d_nn {
                Some(DEFAULT_BETA_BOUND_2D_NN)
            } else {
                None
            },
        })
    }

    /// Nearest-neighbour model with unit coupling.
    pub fn nearest_neighbour(dim: usize, beta: f64) -> Result<Self> {
        let couplings = (0..dim).map(|a| (Point::unit(dim, a), 1.0)).collect();
        IsingModel::new(dim, couplings, beta)
    }

    pub fn range(&self) -> i64 {
        self.couplings
            .iter()
            .map(|(v, _)| v.0.iter().map(|c| c.abs()).max().unwrap_or(0))
            .max()
            .unwrap_or(0)
    }

    fn is_nearest_neighbour(&self) -> bool {
        self.couplings.iter().all(|(v, _)| v.l1_norm() == 1)
    }

    fn nn_coupling(&self) -> Option<f64> {
        if !self.is_nearest_neighbour() {
            return None;
        }
        Some(self.couplings[0].1)
    }
}

/// Periodic spin configuration.
#[derive(Clone, Debug)]
pub struct SpinLattice {
    pub extents: Vec<usize>,
    pub spins: Vec<i8>,
    strides: Vec<usize>,
}

impl SpinLattice {
    /// All-up start on a periodic box.
    pub fn all_up(extents: &[usize], range: i64) -> Result<Self> {
        if extents.is_empty() || extents.iter().any(|&e| e == 0) {
            return Err(Error::domain("lattice extents must be positive"));
        }
        let min_extent = (2 * range + 1) as usize;
        if extents.iter().any(|&e| e < min_extent) {
            return Err(Error::domain(format!(
                "extents {extents:?} too small for coupling range {range}; need at least {min_extent}"
            )));
        }
        let mut strides = vec![0usize; extents.len()];
        let mut acc = 1usize;
        for (s, &e) in strides.iter_mut().zip(extents) {
            *s = acc;
            acc *= e;
        }
        Ok(SpinLattice {
            extents: extents.to_vec(),
            spins: vec![1; acc],
            strides,
        })
    }

    pub fn n_sites(&self) -> usize {
        self.spins.len()
    }

    /// Site index displaced by `v`, with periodic wrapping.
    pub fn shifted_index(&self, site: usize, v: &Point) -> usize {
        let mut idx = 0usize;
        for (axis, (&stride, &extent)) in self.strides.iter().zip(&self.extents).enumerate() {
            let coord = (site / stride) % extent;
            let shifted = (coord as i64 + v.0[axis]).rem_euclid(extent as i64) as usize;
            idx += shifted * stride;
        }
        idx
    }

    /// Precomputed shift table for a displacement.
    fn shift_table(&self, v: &Point) -> Vec<u32> {
        (0..self.n_sites())
            .map(|site| self.shifted_index(site, v) as u32)
            .collect()
    }
}

/// Single-cluster Monte Carlo sampler: bonds along coupling vector `v`
/// activate with probability `1 - exp(-2 beta J_v)` between aligned
/// spins, and the grown cluster is flipped. Deterministic for a fixed
/// seed.
pub struct WolffSampler {
    pub model: IsingModel,
    pub lattice: SpinLattice,
    rng: ChaCha8Rng,
    bond_probabilities: Vec<f64>,
    neighbour_tables: Vec<Vec<u32>>,
    stack: Vec<u32>,
    in_cluster: Vec<bool>,
    pub clusters_done: u64,
}

impl WolffSampler {
    pub fn new(model: IsingModel, extents: &[usize], seed: u64) -> Result<Self> {
        if let Some(bound) = model.beta_bound {
            if model.beta > bound {
                return Err(Error::domain(format!(
                    "beta {} exceeds the configured safety bound {bound}",
                    model.beta
                )));
            }
        }
        if extents.len() != model.dim {
            return Err(Error::DimensionMismatch {
                left: extents.len(),
                right: model.dim,
            });
        }
        let lattice = SpinLattice::all_up(extents, model.range())?;
        let bond_probabilities = model
            .couplings
            .iter()
            .map(|(_, j)| 1.0 - (-2.0 * model.beta * j).exp())
            .collect();
        let neighbour_tables = model
            .couplings
            .iter()
            .map(|(v, _)| lattice.shift_table(v))
            .collect();
        let n = lattice.n_sites();
        Ok(WolffSampler {
            model,
            lattice,
            rng: ChaCha8Rng::seed_from_u64(seed),
            bond_probabilities,
            neighbour_tables,
            stack: Vec::with_capacity(n),
            in_cluster: vec![false; n],
            clusters_done: 0,
        })
    }

    /// Grow and flip one cluster; returns its size.
    pub fn update(&mut self) -> usize {
        let n = self.lattice.n_sites();
        let seed_site = self.rng.gen_range(0..n);
        let seed_spin = self.lattice.spins[seed_site];
        self.stack.clear();
        self.stack.push(seed_site as u32);
        self.in_cluster[seed_site] = true;
        let mut members: Vec<u32> = vec![seed_site as u32];
        while let Some(site) = self.stack.pop() {
            for (table, &p) in self.neighbour_tables.iter().zip(&self.bond_probabilities) {
                let neighbour = table[site as usize] as usize;
                if self.in_cluster[neighbour] || self.lattice.spins[neighbour] != seed_spin {
                    continue;
                }
                if self.rng.gen::<f64>() < p {
                    self.in_cluster[neighbour] = true;
                    self.stack.push(neighbour as u32);
                    members.push(neighbour as u32);
                }
            }
        }
        for &m in &members {
            self.lattice.spins[m as usize] = -seed_spin;
            self.in_cluster[m as usize] = false;
        }
        self.clusters_done += 1;
        members.len()
    }

    pub fn run(&mut self, updates: u64) {
        for _ in 0..updates {
            self.update();
        }
    }
}

/// Measured two-point correlation at one displacement.
#[derive(Clone, Debug, Serialize)]
pub struct CorrelationEstimate {
    pub displacement: Point,
    pub mean: f64,
    pub stderr: f64,
    pub tau_int: f64,
    pub n_samples: u64,
}

/// Translation-averaged correlation measurement over a sample stream.
///
/// Runs `burn_in` cluster updates, then takes `n_samples` measurements
/// separated by `thin` updates. Errors carry the binning analysis and
/// the integrated autocorrelation time of the measured series.
pub fn measure_correlation(
    sampler: &mut WolffSampler,
    displacements: &[Point],
    n_samples: u64,
    thin: u64,
    burn_in: u64,
) -> Result<Vec<CorrelationEstimate>> {
    if n_samples < 100 {
        return Err(Error::data(format!(
            "need at least 100 decorrelated samples, requested {n_samples}"
        )));
    }
    if thin == 0 {
        return Err(Error::domain("thinning interval must be positive"));
    }
    let tables: Vec<Vec<u32>> = displacements
        .iter()
        .map(|v| sampler.lattice.shift_table(v))
        .collect();
    let mut accumulators: Vec<BinningAccumulator> =
        displacements.iter().map(|_| BinningAccumulator::new()).collect();
    sampler.run(burn_in);
    let n_sites = sampler.lattice.n_sites() as f64;
    for _ in 0..n_samples {
        sampler.run(thin);
        let spins = &sampler.lattice.spins;
        for (table, acc) in tables.iter().zip(accumulators.iter_mut()) {
            let mut sum: i64 = 0;
            for (site, &shifted) in table.iter().enumerate() {
                sum += (spins[site] * spins[shifted as usize]) as i64;
            }
            acc.push(sum as f64 / n_sites);
        }
    }
    Ok(displacements
        .iter()
        .zip(&accumulators)
        .map(|(v, acc)| CorrelationEstimate {
            displacement: v.clone(),
            mean: acc.mean(),
            stderr: acc.stderr(),
            tau_int: acc.tau_int(),
            n_samples,
        })
        .collect())
}

/// Exact two-point function of the infinite nearest-neighbour chain.
pub fn exact_1d(model: &IsingModel, x: i64) -> Result<f64> {
    if model.dim != 1 {
        return Err(Error::unsupported("exact chain formula needs d = 1"));
    }
    let j = model
        .nn_coupling()
        .ok_or_else(|| Error::unsupported("exact chain formula needs nearest-neighbour couplings"))?;
    Ok((model.beta * j).tanh().powi(x.unsigned_abs() as i32))
}

/// Inverse correlation length of an infinite strip of width `W` with
/// periodic transverse boundary, from the two leading transfer-matrix
/// eigenvalues, plus bond energies for oracle use.
#[derive(Clone, Debug, Serialize)]
pub struct StripSpectrum {
    pub width: usize,
    pub xi_inverse: f64,
    pub lambda_ratio: f64,
    /// nearest-neighbour correlation along / across the strip
    pub bond_longitudinal: f64,
    pub bond_transverse: f64,
}

pub const STRIP_WIDTH_CAP: usize = 14;

/// Power-iteration transfer-matrix solve for the 2D nearest-neighbour
/// model on a periodic strip.
pub fn strip_transfer_matrix(model: &IsingModel, width: usize) -> Result<StripSpectrum> {
    if model.dim != 2 {
        return Err(Error::unsupported("strip transfer matrix needs d = 2"));
    }
    let j = model.nn_coupling().ok_or_else(|| {
        Error::unsupported("strip transfer matrix supports nearest-neighbour couplings only")
    })?;
    if width < 2 {
        return Err(Error::domain("strip width must be at least 2"));
    }
    if width > STRIP_WIDTH_CAP {
        return Err(Error::resource(format!(
            "strip width {width} exceeds the cap {STRIP_WIDTH_CAP} (state space 2^W)"
        )));
    }
    let k = model.beta * j;
    let dim = 1usize << width;

    // diagonal of intra-column bonds, and its square root
    let mut d_sqrt = vec![0.0f64; dim];
    for (s, v) in d_sqrt.iter_mut().enumerate() {
        let mut e = 0i64;
        for i in 0..width {
            let a = 1 - 2 * ((s >> i) & 1) as i64;
            let b = 1 - 2 * ((s >> ((i + 1) % width)) & 1) as i64;
            e += a * b;
        }
        *v = (0.5 * k * e as f64).exp();
    }

    // inter-column factor K2^{tensor W}: apply by per-site sweeps
    let (kp, km) = (k.exp(), (-k).exp());
    let apply_a = |v: &mut Vec<f64>, scratch: &mut Vec<f64>| {
        for i in 0..width {
            let bit = 1usize << i;
            scratch.resize(v.len(), 0.0);
            for s in 0..dim {
                if s & bit == 0 {
                    let up = v[s];
                    let down = v[s | bit];
                    scratch[s] = kp * up + km * down;
                    scratch[s | bit] = km * up + kp * down;
                }
            }
            std::mem::swap(v, scratch);
        }
    };
    let apply_t = |v: &mut Vec<f64>, scratch: &mut Vec<f64>| {
        for (x, d) in v.iter_mut().zip(&d_sqrt) {
            *x *= d;
        }
        apply_a(v, scratch);
        for (x, d) in v.iter_mut().zip(&d_sqrt) {
            *x *= d;
        }
    };

    let normalize = |v: &mut [f64]| -> f64 {
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        for x in v.iter_mut() {
            *x /= norm;
        }
        norm
    };

    let power_iterate = |v0: Vec<f64>| -> (f64, Vec<f64>) {
        let mut v = v0;
        let mut scratch = vec![0.0; dim];
        normalize(&mut v);
        let mut lambda = 0.0;
        for _ in 0..4000 {
            apply_t(&mut v, &mut scratch);
            let next = normalize(&mut v);
            if (next - lambda).abs() <= 1e-14 * next {
                lambda = next;
                break;
            }
            lambda = next;
        }
        (lambda, v)
    };

    // even sector: uniform start; odd sector: magnetization-weighted start
    let (lambda_even, v_even) = power_iterate(vec![1.0; dim]);
    let odd_start: Vec<f64> = (0..dim)
        .map(|s| (width as i64 - 2 * (s.count_ones() as i64)) as f64)
        .collect();
    let (lambda_odd, _) = power_iterate(odd_start);

    // bond observables in the dominant state
    let mut transverse = 0.0;
    for (s, v) in v_even.iter().enumerate() {
        let a = 1 - 2 * ((s >> 0) & 1) as i64;
        let b = 1 - 2 * ((s >> 1) & 1) as i64;
        transverse += v * v * (a * b) as f64;
    }
    let mut sv: Vec<f64> = v_even
        .iter()
        .enumerate()
        .map(|(s, v)| v * (1 - 2 * (s & 1) as i64) as f64)
        .collect();
    let mut scratch = vec![0.0; dim];
    apply_t(&mut sv, &mut scratch);
    let mut longitudinal = 0.0;
    for (s, (x, v)) in sv.iter().zip(&v_even).enumerate() {
        longitudinal += x * v * (1 - 2 * (s & 1) as i64) as f64;
    }
    longitudinal /= lambda_even;

    Ok(StripSpectrum {
        width,
        xi_inverse: (lambda_even / lambda_odd).ln(),
        lambda_ratio: lambda_odd / lambda_even,
        bond_longitudinal: longitudinal,
        bond_transverse: transverse,
    })
}

/// Aitken extrapolation of a three-term strip sequence, for oracle use.
pub fn aitken_extrapolate(u: [f64; 3]) -> f64 {
    let d1 = u[1] - u[0];
    let d2 = u[2] - u[1];
    let dd = d2 - d1;
    if dd.abs() < 1e-300 {
        return u[2];
    }
    u[2] - d2 * d2 / dd
}

/// One fitted asymptotic form `g = psi * |x|^{-p} * exp(-xi |x|)`.
#[derive(Clone, Debug, Serialize)]
pub struct FitResult {
    pub log_psi: f64,
    pub p: f64,
    pub xi: f64,
    pub sigma_log_psi: f64,
    pub sigma_p: f64,
    pub sigma_xi: f64,
    pub chi2_dof: f64,
    pub p_fixed: bool,
}

/// Asymptotic-decay fit of measured correlations along one direction.
#[derive(Clone, Debug, Serialize)]
pub struct OzFit {
    pub direction: Vec<i64>,
    pub window: (f64, f64),
    pub n_points: usize,
    pub unconstrained: FitResult,
    pub constrained: FitResult,
}

/// Weighted least squares of `log g = log psi - p log|x| - xi |x|`, free
/// and with `p` pinned at `(d - 1) / 2`.
///
/// Estimates must be positive with relative error below 30% inside the
/// window; weights are inverse variances of `log g` by the delta method.
/// Noiseless inputs (zero stderr) get unit weights and residual-scaled
/// covariances.
pub fn oz_fit(
    estimates: &[CorrelationEstimate],
    direction: &Point,
    dim: usize,
    window: (f64, f64),
) -> Result<OzFit> {
    if direction.is_zero() {
        return Err(Error::domain("fit direction must be nonzero"));
    }
    let step = direction.euclid_norm();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut sigmas = Vec::new();
    for est in estimates {
        // keep displacements that are positive multiples of the direction
        let k = match multiple_of(&est.displacement, direction) {
            Some(k) if k >= 1 => k,
            _ => continue,
        };
        let r = k as f64 * step;
        if r < window.0 || r > window.1 {
            continue;
        }
        if est.mean <= 0.0 {
            return Err(Error::data(format!(
                "nonpositive estimate {} at {:?} inside the fit window",
                est.mean, est.displacement.0
            )));
        }
        if est.stderr > 0.0 && est.stderr / est.mean > 0.30 {
            return Err(Error::data(format!(
                "relative error {:.0}% at {:?} exceeds 30%",
                100.0 * est.stderr / est.mean,
                est.displacement.0
            )));
        }
        xs.push(r);
        ys.push(est.mean.ln());
        sigmas.push(if est.stderr > 0.0 {
            est.stderr / est.mean
        } else {
            0.0
        });
    }
    if xs.len() < 6 {
        return Err(Error::data(format!(
            "need at least 6 displacements in the window, found {}",
            xs.len()
        )));
    }
    let noiseless = sigmas.iter().all(|&s| s == 0.0);
    let weights: Vec<f64> = if noiseless {
        vec![1.0; xs.len()]
    } else {
        sigmas.iter().map(|&s| 1.0 / (s * s)).collect()
    };

    let unconstrained = fit_linear(&xs, &ys, &weights, None, noiseless)?;
    let p_pin = (dim as f64 - 1.0) / 2.0;
    let constrained = fit_linear(&xs, &ys, &weights, Some(p_pin), noiseless)?;
    Ok(OzFit {
        direction: direction.0.clone(),
        window,
        n_points: xs.len(),
        unconstrained,
        constrained,
    })
}

fn multiple_of(x: &Point, direction: &Point) -> Option<i64> {
    let mut k: Option<i64> = None;
    for (&xi, &di) in x.0.iter().zip(&direction.0) {
        if di == 0 {
            if xi != 0 {
                return None;
            }
            continue;
        }
        if xi % di != 0 {
            return None;
        }
        let ki = xi / di;
        match k {
            None => k = Some(ki),
            Some(prev) if prev != ki => return None,
            _ => {}
        }
    }
    k
}

fn fit_linear(
    xs: &[f64],
    ys: &[f64],
    weights: &[f64],
    p_fixed: Option<f64>,
    scale_by_residuals: bool,
) -> Result<FitResult> {
    let n = xs.len();
    // columns: 1, -log r, -r (the middle column drops when p is pinned)
    let cols: Vec<Vec<f64>> = match p_fixed {
        None => vec![
            vec![1.0; n],
            xs.iter().map(|&r| -r.ln()).collect(),
            xs.iter().map(|&r| -r).collect(),
        ],
        Some(_) => vec![vec![1.0; n], xs.iter().map(|&r| -r).collect()],
    };
    let rhs: Vec<f64> = match p_fixed {
        None => ys.to_vec(),
        Some(p) => ys
            .iter()
            .zip(xs)
            .map(|(&y, &r)| y + p * r.ln())
            .collect(),
    };
    let m = cols.len();
    let mut ata = vec![vec![0.0f64; m]; m];
    let mut atb = vec![0.0f64; m];
    for i in 0..m {
        for j in 0..m {
            ata[i][j] = cols[i]
                .iter()
                .zip(&cols[j])
                .zip(weights)
                .map(|((a, b), w)| w * a * b)
                .sum();
        }
        atb[i] = cols[i]
            .iter()
            .zip(&rhs)
            .zip(weights)
            .map(|((a, y), w)| w * a * y)
            .sum();
    }
    let inv = invert(&ata).ok_or_else(|| {
        Error::Fit("normal equations are singular; the design is ill-conditioned".to_string())
    })?;
    let mut params = vec![0.0f64; m];
    for i in 0..m {
        for j in 0..m {
            params[i] += inv[i][j] * atb[j];
        }
    }
    let mut chi2 = 0.0;
    for i in 0..n {
        let mut fit = 0.0;
        for (c, p) in cols.iter().zip(&params) {
            fit += c[i] * p;
        }
        let r = rhs[i] - fit;
        chi2 += weights[i] * r * r;
    }
    let dof = (n - m).max(1) as f64;
    let cov_scale = if scale_by_residuals { chi2 / dof } else { 1.0 };
    let sigma: Vec<f64> = (0..m)
        .map(|i| (inv[i][i].max(0.0) * cov_scale).sqrt())
        .collect();
    Ok(match p_fixed {
        None => FitResult {
            log_psi: params[0],
            p: params[1],
            xi: params[2],
            sigma_log_psi: sigma[0],
            sigma_p: sigma[1],
            sigma_xi: sigma[2],
            chi2_dof: chi2 / dof,
            p_fixed: false,
        },
        Some(p) => FitResult {
            log_psi: params[0],
            p,
            xi: params[1],
            sigma_log_psi: sigma[0],
            sigma_p: 0.0,
            sigma_xi: sigma[1],
            chi2_dof: chi2 / dof,
            p_fixed: true,
        },
    })
}

fn invert(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let m = a.len();
    let mut aug: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..m).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for col in 0..m {
        let pivot_row = (col..m).max_by(|&i, &j| aug[i][col].abs().total_cmp(&aug[j][col].abs()))?;
        if aug[pivot_row][col].abs() < 1e-300 {
            return None;
        }
        aug.swap(col, pivot_row);
        let pivot = aug[col][col];
        for x in aug[col].iter_mut() {
            *x /= pivot;
        }
        for row in 0..m {
            if row != col {
                let f = aug[row][col];
                if f != 0.0 {
                    for j in 0..2 * m {
                        let v = aug[col][j];
                        aug[row][j] -= f * v;
                    }
                }
            }
        }
    }
    Some(aug.into_iter().map(|r| r[m..].to_vec()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(coords: &[i64]) -> Point {
        Point(coords.to_vec())
    }

    #[test]
    fn model_validation() {
        assert!(IsingModel::new(2, vec![(pt(&[1, 0]), 1.0)], -0.1).is_err());
        assert!(IsingModel::new(2, vec![(pt(&[0, 0]), 1.0)], 0.3).is_err());
        assert!(IsingModel::new(2, vec![(pt(&[1, 0]), -1.0)], 0.3).is_err());
        assert!(IsingModel::new(2, vec![], 0.3).is_err());
        let m = IsingModel::nearest_neighbour(2, 0.3).unwrap();
        assert_eq!(m.couplings.len(), 4);
        assert_eq!(m.range(), 1);
        assert_eq!(m.beta_bound, Some(DEFAULT_BETA_BOUND_2D_NN));
    }

    #[test]
    fn beta_bound_enforced() {
        let m = IsingModel::nearest_neighbour(2, 0.44).unwrap();
        assert!(matches!(
            WolffSampler::new(m, &[16, 16], 1),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn lattice_extent_check() {
        let m = IsingModel::new(2, vec![(pt(&[2, 0]), 0.5), (pt(&[0, 1]), 1.0)], 0.1).unwrap();
        assert_eq!(m.range(), 2);
        assert!(SpinLattice::all_up(&[4, 8], m.range()).is_err());
        assert!(SpinLattice::all_up(&[5, 8], m.range()).is_ok());
    }

    #[test]
    fn wolff_deterministic_for_fixed_seed() {
        let m = IsingModel::nearest_neighbour(2, 0.3).unwrap();
        let mut a = WolffSampler::new(m.clone(), &[16, 16], 42).unwrap();
        let mut b = WolffSampler::new(m, &[16, 16], 42).unwrap();
        a.run(500);
        b.run(500);
        assert_eq!(a.lattice.spins, b.lattice.spins);
    }

    #[test]
    fn wolff_different_seeds_differ() {
        let m = IsingModel::nearest_neighbour(2, 0.3).unwrap();
        let mut a = WolffSampler::new(m.clone(), &[16, 16], 42).unwrap();
        let mut b = WolffSampler::new(m, &[16, 16], 43).unwrap();
        a.run(500);
        b.run(500);
        assert_ne!(a.lattice.spins, b.lattice.spins);
    }

    #[test]
    fn infinite_temperature_uncorrelated() {
        let m = IsingModel::new(2, vec![(pt(&[1, 0]), 1.0), (pt(&[0, 1]), 1.0)], 0.0).unwrap();
        let mut s = WolffSampler::new(m, &[16, 16], 7).unwrap();
        let displacements = vec![pt(&[1, 0]), pt(&[2, 1]), pt(&[0, 3])];
        let est = measure_correlation(&mut s, &displacements, 2000, 256, 20_000).unwrap();
        for e in est {
            assert!(
                e.mean.abs() <= 3.0 * e.stderr + 1e-12,
                "{:?}: {} +- {}",
                e.displacement.0,
                e.mean,
                e.stderr
            );
        }
    }

    #[test]
    fn chain_matches_exact_formula() {
        let m = IsingModel::nearest_neighbour(1, 0.6).unwrap();
        let mut s = WolffSampler::new(m.clone(), &[128], 12).unwrap();
        let displacements: Vec<Point> = (1..=6).map(|k| pt(&[k])).collect();
        let est = measure_correlation(&mut s, &displacements, 4000, 32, 4_000).unwrap();
        for e in &est {
            let exact = exact_1d(&m, e.displacement.0[0]).unwrap();
            assert!(
                (e.mean - exact).abs() <= 3.0 * e.stderr,
                "x={:?}: {} vs {} (sigma {})",
                e.displacement.0,
                e.mean,
                exact,
                e.stderr
            );
        }
    }

    #[test]
    fn correlation_symmetry_under_negation() {
        let m = IsingModel::nearest_neighbour(2, 0.3).unwrap();
        let mut s = WolffSampler::new(m, &[24, 24], 3).unwrap();
        let est = measure_correlation(
            &mut s,
            &[pt(&[3, 1]), pt(&[-3, -1])],
            1000,
            32,
            10_000,
        )
        .unwrap();
        // translation averaging over a periodic box makes the estimator
        // at v and -v identical configurations by configuration
        assert_eq!(est[0].mean, est[1].mean);
    }

    #[test]
    fn griffiths_nonnegative_within_errors() {
        let m = IsingModel::nearest_neighbour(2, 0.25).unwrap();
        let mut s = WolffSampler::new(m, &[24, 24], 5).unwrap();
        let displacements: Vec<Point> = (1..=6).map(|k| pt(&[k, 0])).collect();
        let est = measure_correlation(&mut s, &displacements, 2000, 16, 10_000).unwrap();
        for e in est {
            assert!(e.mean >= -3.0 * e.stderr);
            assert!(e.stderr > 0.0);
            assert!(e.mean <= 1.0);
        }
    }

    #[test]
    fn exact_1d_values() {
        let m = IsingModel::nearest_neighbour(1, 0.6).unwrap();
        assert_eq!(exact_1d(&m, 0).unwrap(), 1.0);
        let g3 = exact_1d(&m, 3).unwrap();
        assert!((g3 - 0.6f64.tanh().powi(3)).abs() < 1e-15);
        assert!((g3 - 0.1549).abs() < 1e-4);
        let cold = IsingModel::nearest_neighbour(1, 10.0).unwrap();
        assert!((exact_1d(&cold, 1).unwrap() - 1.0).abs() < 1e-8);
        assert!((exact_1d(&cold, 5).unwrap() - 1.0).abs() < 5e-8);
    }

    #[test]
    fn exact_1d_matches_ring_enumeration() {
        // brute force over 2^12 ring configurations
        let beta = 0.6f64;
        let l = 12usize;
        let mut z = 0.0;
        let mut corr = vec![0.0f64; 4];
        for config in 0u32..(1 << l) {
            let spin = |i: usize| 1.0 - 2.0 * ((config >> (i % l)) & 1) as f64;
            let mut energy = 0.0;
            for i in 0..l {
                energy += spin(i) * spin(i + 1);
            }
            let w = (beta * energy).exp();
            z += w;
            for (x, c) in corr.iter_mut().enumerate() {
                *c += w * spin(0) * spin(x);
            }
        }
        // exact ring formula: (t^x + t^(L-x)) / (1 + t^L)
        let t = beta.tanh();
        for (x, c) in corr.iter().enumerate() {
            let ring = (t.powi(x as i32) + t.powi((l - x) as i32)) / (1.0 + t.powi(l as i32));
            assert!(((c / z) - ring).abs() < 1e-12, "x={x}");
        }
        // infinite-chain formula within the finite-size correction
        let m = IsingModel::nearest_neighbour(1, beta).unwrap();
        for x in 1..=3i64 {
            let finite = corr[x as usize] / z;
            let infinite = exact_1d(&m, x).unwrap();
            assert!((finite - infinite).abs() < 2.0 * t.powi((l as i32) - 2 * x as i32));
        }
    }

    #[test]
    fn strip_small_beta_matches_high_temperature_decay() {
        // leading high-temperature behaviour -log tanh(beta) + o(1)
        let m = IsingModel::nearest_neighbour(2, 0.01).unwrap();
        let s = strip_transfer_matrix(&m, 10).unwrap();
        let leading = -(0.01f64.tanh().ln());
        assert!(
            (s.xi_inverse - leading).abs() / leading < 0.01,
            "{} vs {leading}",
            s.xi_inverse
        );
        // and the exact on-axis rate at a moderate coupling
        let m2 = IsingModel::nearest_neighbour(2, 0.05).unwrap();
        let s2 = strip_transfer_matrix(&m2, 10).unwrap();
        let exact = (1.0f64 / 0.05f64.tanh()).ln() - 2.0 * 0.05;
        assert!((s2.xi_inverse - exact).abs() < 1e-4);
    }

    #[test]
    fn strip_width_two_matches_torus_enumeration() {
        // brute force on a 2 x 6 torus against the same quantity computed
        // with the transfer matrix (finite length: trace formulas)
        let beta = 0.3f64;
        let (w, l) = (2usize, 6usize);
        let mut z = 0.0;
        let mut g3 = 0.0;
        for config in 0u32..(1 << (w * l)) {
            let spin = |x: usize, y: usize| {
                1.0 - 2.0 * ((config >> ((x % l) * w + (y % w))) & 1) as f64
            };
            let mut energy = 0.0;
            for x in 0..l {
                for y in 0..w {
                    energy += spin(x, y) * (spin(x + 1, y) + spin(x, y + 1));
                }
            }
            let weight = (beta * energy).exp();
            z += weight;
            g3 += weight * spin(0, 0) * spin(3, 0);
        }
        g3 /= z;
        // transfer-matrix value of the same correlation on the torus
        let dim = 1usize << w;
        let mut t = vec![vec![0.0f64; dim]; dim];
        for s1 in 0..dim {
            for s2 in 0..dim {
                let sp = |s: usize, i: usize| 1.0 - 2.0 * ((s >> (i % w)) & 1) as f64;
                let mut e = 0.0;
                // transverse bonds counted once per column; width-2 strips
                // see both vertical neighbours as the same bond pair
                for i in 0..w {
                    e += 0.5 * (sp(s1, i) * sp(s1, (i + 1) % w)
                        + sp(s2, i) * sp(s2, (i + 1) % w));
                    e += sp(s1, i) * sp(s2, i);
                }
                t[s1][s2] = (beta * e).exp();
            }
        }
        let mat_pow = |a: &Vec<Vec<f64>>, k: usize| -> Vec<Vec<f64>> {
            let mut out = a.clone();
            for _ in 1..k {
                let mut next = vec![vec![0.0; dim]; dim];
                for i in 0..dim {
                    for kk in 0..dim {
                        for j in 0..dim {
                            next[i][j] += out[i][kk] * a[kk][j];
                        }
                    }
                }
                out = next;
            }
            out
        };
        let t3 = mat_pow(&t, 3);
        let mut num = 0.0;
        let mut den = 0.0;
        let t_l = mat_pow(&t, l);
        for s1 in 0..dim {
            den += t_l[s1][s1];
            for s2 in 0..dim {
                let sp0 = 1.0 - 2.0 * (s1 & 1) as f64;
                let sp3 = 1.0 - 2.0 * (s2 & 1) as f64;
                num += sp0 * t3[s1][s2] * sp3 * t3[s2][s1];
            }
        }
        assert!(
            (g3 - num / den).abs() < 1e-10,
            "brute {g3} vs transfer {}",
            num / den
        );
    }

    #[test]
    fn strip_sequence_converges_and_is_monotone() {
        let m = IsingModel::nearest_neighbour(2, 0.35).unwrap();
        let xs: Vec<f64> = [10, 12, 14]
            .iter()
            .map(|&w| strip_transfer_matrix(&m, w).unwrap().xi_inverse)
            .collect();
        assert!((xs[1] - xs[2]).abs() < (xs[0] - xs[1]).abs());
        // known closed form for the on-axis rate at high temperature
        let exact = (1.0f64 / 0.35f64.tanh()).ln() - 2.0 * 0.35;
        assert!((xs[2] - exact).abs() < 1e-3, "{} vs {exact}", xs[2]);
    }

    #[test]
    fn strip_caps_and_unsupported() {
        let m = IsingModel::nearest_neighbour(2, 0.3).unwrap();
        assert!(matches!(
            strip_transfer_matrix(&m, 15),
            Err(Error::Resource(_))
        ));
        let long_range =
            IsingModel::new(2, vec![(pt(&[1, 0]), 1.0), (pt(&[1, 1]), 0.5)], 0.2).unwrap();
        assert!(matches!(
            strip_transfer_matrix(&long_range, 6),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn oz_fit_recovers_synthetic_truth() {
        use rand::Rng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        let (psi, p, xi) = (0.9f64, 0.5f64, 0.4f64);
        let estimates: Vec<CorrelationEstimate> = (8..=40)
            .map(|k| {
                let r = k as f64;
                let clean = psi * r.powf(-p) * (-xi * r).exp();
                let noisy = clean * (1.0 + 0.01 * (rng.gen::<f64>() - 0.5));
                CorrelationEstimate {
                    displacement: pt(&[k, 0]),
                    mean: noisy,
                    stderr: 0.01 * clean,
                    tau_int: 0.5,
                    n_samples: 1000,
                }
            })
            .collect();
        let fit = oz_fit(&estimates, &pt(&[1, 0]), 2, (8.0, 40.0)).unwrap();
        assert!((fit.unconstrained.p - p).abs() < 0.03, "p {}", fit.unconstrained.p);
        assert!(
            (fit.unconstrained.xi - xi).abs() < 0.005,
            "xi {}",
            fit.unconstrained.xi
        );
        assert!(fit.constrained.p_fixed);
        // constrained and unconstrained rates agree within joint errors
        let combined =
            (fit.unconstrained.sigma_xi.powi(2) + fit.constrained.sigma_xi.powi(2)).sqrt();
        assert!((fit.unconstrained.xi - fit.constrained.xi).abs() < 2.0 * combined.max(1e-6));
    }

    #[test]
    fn oz_fit_guards() {
        let mk = |mean: f64, k: i64| CorrelationEstimate {
            displacement: pt(&[k, 0]),
            mean,
            stderr: 0.001,
            tau_int: 0.5,
            n_samples: 100,
        };
        let few: Vec<_> = (8..12).map(|k| mk(0.1, k)).collect();
        assert!(matches!(
            oz_fit(&few, &pt(&[1, 0]), 2, (8.0, 12.0)),
            Err(Error::Data(_))
        ));
        let mut with_negative: Vec<_> = (8..20).map(|k| mk(0.1, k)).collect();
        with_negative[3].mean = -0.5;
        assert!(matches!(
            oz_fit(&with_negative, &pt(&[1, 0]), 2, (8.0, 20.0)),
            Err(Error::Data(_))
        ));
        let mut noisy: Vec<_> = (8..20).map(|k| mk(0.1, k)).collect();
        noisy[2].stderr = 0.05;
        assert!(matches!(
            oz_fit(&noisy, &pt(&[1, 0]), 2, (8.0, 20.0)),
            Err(Error::Data(_))
        ));
    }
}
