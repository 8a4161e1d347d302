//! Multi-epoch uplink pilot training and reduced-dimensionality LMMSE
//! channel estimation.
//!
//! Since the RIS has more elements than the array has antennas, each UE
//! repeats its pilot over `Q = ceil(N_R / N_A)` epochs, each under a
//! different random RIS training configuration. The stacked observations
//! see the channel through the stacked matrix `H_tr` (one `H P_tr^(q)`
//! block per epoch), whose singular values decay quickly; estimation is
//! carried out in the subspace spanned by its `S` dominant right singular
//! vectors.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::channel::ChannelSet;
use crate::error::{Result, SimError};
use crate::rng::complex_gaussian_matrix;
use crate::scenario::{RisMode, ScenarioConfig};
use crate::{CMatrix, CVector, C64};

/// Real orthogonal pilot book with round-robin assignment.
#[derive(Debug, Clone)]
pub struct PilotBook {
    /// `tau_p x tau_p` matrix; column `m` is pilot `m` with squared norm
    /// `tau_p`.
    pub pilots: DMatrix<f64>,
    /// Pilot index assigned to each UE (`k mod tau_p`).
    pub assignment: Vec<usize>,
    /// Uplink training power per UE, watts.
    pub powers: Vec<f64>,
}

impl PilotBook {
    /// Build the book: a scaled orthonormal basis, reused round-robin
    /// when there are more UEs than sequences.
    pub fn new(tau_p: usize, k_users: usize, powers: Vec<f64>) -> Self {
        assert!(tau_p >= 1);
        assert_eq!(powers.len(), k_users);
        let pilots = DMatrix::from_fn(tau_p, tau_p, |r, c| {
            if r == c {
                (tau_p as f64).sqrt()
            } else {
                0.0
            }
        });
        let assignment = (0..k_users).map(|k| k % tau_p).collect();
        PilotBook {
            pilots,
            assignment,
            powers,
        }
    }

    /// Uniform-power helper.
    pub fn uniform(tau_p: usize, k_users: usize, power: f64) -> Self {
        PilotBook::new(tau_p, k_users, vec![power; k_users])
    }

    pub fn tau_p(&self) -> usize {
        self.pilots.nrows()
    }

    /// Pilot inner product `rho_{j,k}`.
    pub fn cross_correlation(&self, j: usize, k: usize) -> f64 {
        self.pilots
            .column(self.assignment[j])
            .dot(&self.pilots.column(self.assignment[k]))
    }

    /// Indices of the UEs sharing UE `k`'s pilot, `k` included.
    pub fn copilot_set(&self, k: usize) -> Vec<usize> {
        let pilot = self.assignment[k];
        (0..self.assignment.len())
            .filter(|&j| self.assignment[j] == pilot)
            .collect()
    }

    /// Estimate proportionality constant for co-pilot UEs:
    /// `c_{k,j} = (beta_k / beta_j) sqrt(eta_k / eta_j)`.
    pub fn copilot_scaling(&self, betas: &[f64], k: usize, j: usize) -> f64 {
        (betas[k] / betas[j]) * (self.powers[k] / self.powers[j]).sqrt()
    }
}

/// The `Q` diagonal RIS configurations used during training.
#[derive(Debug, Clone)]
pub struct TrainingConfigs {
    /// Diagonal of each epoch's configuration, amplitude included.
    pub diags: Vec<CVector>,
    /// Common per-element amplitude (1 for a passive surface).
    pub amplitude: f64,
}

/// Random-phase training configurations.
///
/// For an active RIS the common amplitude is set so the reflected-plus-
/// injected-noise power during training doubles (a 3 dB boost spread
/// uniformly over the elements) relative to the passive configuration
/// with the same phases; the power expression has the same form as the
/// RIS power constraint.
pub fn make_training_configs<R: Rng + ?Sized>(
    config: &ScenarioConfig,
    betas: &[f64],
    rng: &mut R,
) -> TrainingConfigs {
    let q = config.training_epochs();
    let n_r = config.n_ris;
    let amplitude = match config.ris_mode {
        RisMode::Passive => 1.0,
        RisMode::Active => {
            let incident: f64 = betas.iter().map(|&b| config.uplink_pilot_power * b).sum();
            let denom = incident + config.sigma_r2();
            if denom > 0.0 && incident > 0.0 {
                (2.0 * incident / denom).sqrt()
            } else {
                1.0
            }
        }
    };
    let diags = (0..q)
        .map(|_| {
            CVector::from_fn(n_r, |_, _| {
                let phase = rng.gen::<f64>() * 2.0 * std::f64::consts::PI;
                C64::new(phase.cos(), phase.sin()) * amplitude
            })
        })
        .collect();
    TrainingConfigs { diags, amplitude }
}

/// Truncated singular basis of the stacked training matrix.
#[derive(Debug, Clone)]
pub struct TrainingBasis {
    /// Stacked matrix `H_tr`, `(Q N_A) x N_R`.
    pub stacked: CMatrix,
    /// Left singular vectors of the retained subspace, `(Q N_A) x S`.
    pub u: CMatrix,
    /// Retained singular values, descending.
    pub singular_values: DVector<f64>,
    /// Right singular vectors of the retained subspace, `N_R x S`.
    pub v: CMatrix,
    /// Numerical rank of the stacked matrix.
    pub rank: usize,
    /// Retained dimension `S`.
    pub retained: usize,
    /// Fraction of squared-singular-value energy actually captured.
    pub energy_fraction: f64,
    /// Per-epoch reflected Gram `H P^(q) (P^(q))^H H^H`, `N_A x N_A`.
    pub epoch_grams: Vec<CMatrix>,
    /// `Z = U^H blkdiag(epoch grams) U`, `S x S`.
    pub dynamic_noise_core: CMatrix,
}

/// Stack the per-epoch effective channels and truncate their SVD at the
/// requested energy fraction (strictly below the numerical rank).
pub fn build_training_basis(
    coupling: &CMatrix,
    configs: &TrainingConfigs,
    energy_fraction: f64,
) -> Result<TrainingBasis> {
    let n_a = coupling.nrows();
    let n_r = coupling.ncols();
    let q = configs.diags.len();
    let mut stacked = CMatrix::zeros(q * n_a, n_r);
    let mut epoch_grams = Vec::with_capacity(q);
    for (qi, diag) in configs.diags.iter().enumerate() {
        let block = crate::metrics::scaled_coupling(coupling, diag);
        epoch_grams.push(&block * block.adjoint());
        stacked.rows_mut(qi * n_a, n_a).copy_from(&block);
    }

    let svd = stacked.clone().svd(true, true);
    let u_full = svd.u.as_ref().expect("svd requested u");
    let v_t = svd.v_t.as_ref().expect("svd requested v_t");
    let sv = &svd.singular_values;

    // Descending order of the singular triplets.
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[b].partial_cmp(&sv[a]).unwrap());

    let smax = sv[order[0]];
    if smax <= 0.0 {
        return Err(SimError::RankDeficient);
    }
    let tol = smax * (q * n_a).max(n_r) as f64 * f64::EPSILON;
    let rank = order.iter().filter(|&&i| sv[i] > tol).count();

    let total_energy: f64 = sv.iter().map(|s| s * s).sum();
    let mut retained = rank;
    let mut acc = 0.0;
    for (count, &i) in order.iter().enumerate() {
        acc += sv[i] * sv[i];
        if acc / total_energy >= energy_fraction {
            retained = count + 1;
            break;
        }
    }
    // The truncation must stay strictly inside the rank when possible.
    if retained >= rank {
        retained = (rank - 1).max(1);
    }

    let mut u = CMatrix::zeros(q * n_a, retained);
    let mut v = CMatrix::zeros(n_r, retained);
    let mut singular_values = DVector::zeros(retained);
    for (col, &i) in order.iter().take(retained).enumerate() {
        u.column_mut(col).copy_from(&u_full.column(i));
        v.column_mut(col).copy_from(&v_t.row(i).adjoint());
        singular_values[col] = sv[i];
    }
    let captured: f64 = singular_values.iter().map(|s| s * s).sum();

    let dynamic_noise_core = dynamic_core(&u, &epoch_grams, n_a);

    Ok(TrainingBasis {
        stacked,
        u,
        singular_values,
        v,
        rank,
        retained,
        energy_fraction: captured / total_energy,
        epoch_grams,
        dynamic_noise_core,
    })
}

/// Basis for the no-RIS baseline (`H = P = I`): the stacked matrix is the
/// identity, so the subspace machinery reduces to classic full-dimension
/// LMMSE with `S = N_A`.
pub fn identity_basis(n: usize) -> TrainingBasis {
    let eye = CMatrix::identity(n, n);
    TrainingBasis {
        stacked: eye.clone(),
        u: eye.clone(),
        singular_values: DVector::from_element(n, 1.0),
        v: eye.clone(),
        rank: n,
        retained: n,
        energy_fraction: 1.0,
        epoch_grams: vec![eye.clone()],
        dynamic_noise_core: eye,
    }
}

fn dynamic_core(u: &CMatrix, epoch_grams: &[CMatrix], n_a: usize) -> CMatrix {
    let s = u.ncols();
    let mut z = CMatrix::zeros(s, s);
    for (qi, gram) in epoch_grams.iter().enumerate() {
        let block = u.rows(qi * n_a, n_a);
        z += block.adjoint() * gram * block;
    }
    z
}

/// Simulate the uplink training phase and return the stacked projected
/// observation of every UE.
///
/// Epoch `q` produces the raw `N_A x tau_p` array observation
/// `Y = sum_k sqrt(eta_k) (H P^(q) h_k) phi_k^T + delta H P^(q) N_ris + N`,
/// which is then projected on each UE's pilot. Co-pilot UEs therefore
/// share their projected observations exactly, noise included.
pub fn simulate_training<R: Rng + ?Sized>(
    channels: &ChannelSet,
    configs: &TrainingConfigs,
    pilots: &PilotBook,
    sigma_a2: f64,
    sigma_r2: f64,
    delta: f64,
    rng: &mut R,
) -> Vec<CVector> {
    let n_a = channels.coupling.nrows();
    let n_r = channels.coupling.ncols();
    let tau_p = pilots.tau_p();
    let k_users = channels.h.len();
    let q_epochs = configs.diags.len();

    let mut stacked: Vec<CVector> = vec![CVector::zeros(q_epochs * n_a); k_users];
    for (qi, diag) in configs.diags.iter().enumerate() {
        let mut observation = CMatrix::zeros(n_a, tau_p);
        for k in 0..k_users {
            let composite =
                crate::channel::composite_channel(&channels.coupling, diag, &channels.h[k])
                    .expect("dimensions fixed by construction");
            let gain = C64::new(pilots.powers[k].sqrt(), 0.0);
            let pilot = pilots.pilots.column(pilots.assignment[k]);
            for t in 0..tau_p {
                let weight = gain * pilot[t];
                for a in 0..n_a {
                    observation[(a, t)] += composite[a] * weight;
                }
            }
        }
        if delta > 0.0 {
            let ris_noise = complex_gaussian_matrix(rng, n_r, tau_p, sigma_r2);
            let reflected = crate::metrics::scaled_coupling(&channels.coupling, diag) * ris_noise;
            observation += reflected * C64::new(delta, 0.0);
        }
        observation += complex_gaussian_matrix(rng, n_a, tau_p, sigma_a2);

        for (k, target) in stacked.iter_mut().enumerate() {
            let pilot = pilots.pilots.column(pilots.assignment[k]);
            for a in 0..n_a {
                let mut acc = C64::new(0.0, 0.0);
                for t in 0..tau_p {
                    acc += observation[(a, t)] * pilot[t];
                }
                target[qi * n_a + a] = acc;
            }
        }
    }
    stacked
}

/// Statistical side of the estimator: per-UE filter and covariances.
/// These depend only on the basis, the pilot book and the large-scale
/// gains, never on a specific observation.
#[derive(Debug, Clone)]
pub struct EstimatorStats {
    /// LMMSE filter in the reduced space, `S x S`, one per UE.
    pub weights: Vec<CMatrix>,
    /// Estimate covariance `R_est`, `N_R x N_R`, one per UE.
    pub r_est: Vec<CMatrix>,
    /// Error covariance `beta I - R_est`, one per UE.
    pub r_err: Vec<CMatrix>,
}

/// Assemble the per-UE LMMSE filters and covariances.
pub fn estimator_stats(
    basis: &TrainingBasis,
    pilots: &PilotBook,
    betas: &[f64],
    sigma_a2: f64,
    sigma_r2: f64,
    delta: f64,
) -> Result<EstimatorStats> {
    let s = basis.retained;
    let tau_p = pilots.tau_p() as f64;
    let k_users = betas.len();
    let n_r = basis.v.nrows();

    let mut weights = Vec::with_capacity(k_users);
    let mut r_est = Vec::with_capacity(k_users);
    let mut r_err = Vec::with_capacity(k_users);

    for k in 0..k_users {
        // sum_j rho_{j,k}^2 eta_j beta_j: rho is tau_p on the co-pilot
        // set and zero elsewhere.
        let copilot_energy: f64 = pilots
            .copilot_set(k)
            .iter()
            .map(|&j| tau_p * tau_p * pilots.powers[j] * betas[j])
            .sum();

        let mut r_yy = CMatrix::zeros(s, s);
        for i in 0..s {
            let sv = basis.singular_values[i];
            r_yy[(i, i)] = C64::new(copilot_energy * sv * sv + sigma_a2 * tau_p, 0.0);
        }
        if delta > 0.0 {
            r_yy += &basis.dynamic_noise_core * C64::new(delta * sigma_r2 * tau_p, 0.0);
        }
        // Jitter keeps a nearly-degenerate spectrum invertible.
        let jitter = 1e-12 * r_yy.trace().re / s as f64;
        for i in 0..s {
            r_yy[(i, i)] += C64::new(jitter, 0.0);
        }

        let inv = r_yy.try_inverse().ok_or(SimError::SingularCovariance)?;

        // R_{v y} = tau_p sqrt(eta_k) beta_k Lambda^H (real diagonal).
        let mut r_vy = CMatrix::zeros(s, s);
        for i in 0..s {
            r_vy[(i, i)] = C64::new(
                tau_p * pilots.powers[k].sqrt() * betas[k] * basis.singular_values[i],
                0.0,
            );
        }

        let w = &r_vy * &inv;
        let core = &w * r_vy.adjoint();
        let est = &basis.v * &core * basis.v.adjoint();
        let mut err = CMatrix::identity(n_r, n_r) * C64::new(betas[k], 0.0);
        err -= &est;

        weights.push(w);
        r_est.push(est);
        r_err.push(err);
    }

    Ok(EstimatorStats {
        weights,
        r_est,
        r_err,
    })
}

/// Apply the reduced-dimensionality LMMSE filter to one stacked
/// observation: `h_hat = V W U^H y`.
pub fn lmmse_estimate(
    y_k: &CVector,
    basis: &TrainingBasis,
    stats: &EstimatorStats,
    k: usize,
) -> CVector {
    let reduced = basis.u.adjoint() * y_k;
    &basis.v * (&stats.weights[k] * reduced)
}

/// Channel estimates plus everything needed to reason about them.
#[derive(Debug, Clone)]
pub struct EstimateSet {
    /// Per-UE channel estimates, length `N_R`.
    pub estimates: Vec<CVector>,
    /// Statistical covariances and filters.
    pub stats: EstimatorStats,
    /// Co-pilot index sets, one per UE, including the UE itself.
    pub copilot_sets: Vec<Vec<usize>>,
    /// Large-scale gains the estimator assumed.
    pub betas: Vec<f64>,
    /// Training powers the estimator assumed.
    pub powers: Vec<f64>,
}

impl EstimateSet {
    /// `c_{k,j}` such that `h_hat_k = c_{k,j} h_hat_j` for co-pilot UEs.
    pub fn copilot_scaling(&self, k: usize, j: usize) -> f64 {
        (self.betas[k] / self.betas[j]) * (self.powers[k] / self.powers[j]).sqrt()
    }
}

/// Estimate every UE from the stacked observations.
pub fn lmmse_estimate_all(
    ys: &[CVector],
    basis: &TrainingBasis,
    stats: &EstimatorStats,
    pilots: &PilotBook,
    betas: &[f64],
) -> EstimateSet {
    let estimates = ys
        .iter()
        .enumerate()
        .map(|(k, y)| lmmse_estimate(y, basis, stats, k))
        .collect();
    let copilot_sets = (0..betas.len()).map(|k| pilots.copilot_set(k)).collect();
    EstimateSet {
        estimates,
        stats: stats.clone(),
        copilot_sets,
        betas: betas.to_vec(),
        powers: pilots.powers.clone(),
    }
}
