//! Precoding and spectral-efficiency evaluation: perfect-CSI SINR, the
//! genie upper bound, and the hardening lower bound in Monte Carlo and
//! closed form.
//!
//! Two conjugate-beamforming variants coexist on purpose. Simulations use
//! the normalized precoder `w_k = conj(H P h_hat_k) / ||H P h_hat_k||`;
//! the closed-form hardening bound assumes the unnormalized variant, and
//! mixing them silently would invalidate the closed-form comparison, so
//! the precoder set carries its kind.

use nalgebra::DMatrix;

use crate::error::{Result, SimError};
use crate::estimation::EstimatorStats;
use crate::power::SinrCoefficients;
use crate::{CMatrix, CVector, C64};

/// Which conjugate-beamforming variant a precoder set uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrecoderKind {
    /// `w_k = conj(H P h_k) / ||H P h_k||` (used in simulations).
    Normalized,
    /// `w_k = conj(H P h_k)` (assumed by the closed-form bound).
    Unnormalized,
}

/// Conjugate-beamforming precoders, one per UE.
#[derive(Debug, Clone)]
pub struct Precoders {
    pub w: Vec<CVector>,
    pub kind: PrecoderKind,
}

impl Precoders {
    /// `||w_k||^2` for the power-control budget.
    pub fn squared_norms(&self) -> Vec<f64> {
        self.w.iter().map(|w| w.norm_squared()).collect()
    }
}

/// Evaluation mode tag carried by an [`SEReport`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeMode {
    PerfectCsi,
    UpperBound,
    HardeningMc,
    HardeningClosedForm,
}

/// Per-UE SINR and spectral efficiency.
#[derive(Debug, Clone)]
pub struct SEReport {
    pub sinr: Vec<f64>,
    pub se: Vec<f64>,
    pub mode: SeMode,
    pub prelog: f64,
}

/// `SE_k = prelog * log2(1 + sinr_k)`.
pub fn se_from_sinr(sinr: Vec<f64>, prelog: f64, mode: SeMode) -> SEReport {
    let se = sinr.iter().map(|g| prelog * (1.0 + g).log2()).collect();
    SEReport {
        sinr,
        se,
        mode,
        prelog,
    }
}

/// Build conjugate-beamforming precoders from channel vectors (estimates
/// in any realistic run, true channels for genie benchmarks).
pub fn make_precoders(
    coupling: &CMatrix,
    scaled_diag: &CVector,
    channels: &[CVector],
    kind: PrecoderKind,
) -> Result<Precoders> {
    let mut w = Vec::with_capacity(channels.len());
    for (k, h) in channels.iter().enumerate() {
        let composite = crate::channel::composite_channel(coupling, scaled_diag, h)?;
        let conj = composite.map(|z| z.conj());
        match kind {
            PrecoderKind::Unnormalized => w.push(conj),
            PrecoderKind::Normalized => {
                let norm = conj.norm();
                if norm == 0.0 {
                    return Err(SimError::ZeroEstimate(k));
                }
                w.push(conj / C64::new(norm, 0.0));
            }
        }
    }
    Ok(Precoders { w, kind })
}

/// Cross-link matrix `T[(j, k)] = h_bar_k^T w_j` (composite channel of UE
/// `k` against UE `j`'s precoder).
pub fn link_matrix(
    coupling: &CMatrix,
    scaled_diag: &CVector,
    true_channels: &[CVector],
    precoders: &Precoders,
) -> CMatrix {
    let k_users = true_channels.len();
    let composites: Vec<CVector> = true_channels
        .iter()
        .map(|h| {
            crate::channel::composite_channel(coupling, scaled_diag, h)
                .expect("dimensions fixed by construction")
        })
        .collect();
    CMatrix::from_fn(k_users, k_users, |j, k| {
        // Plain transpose product, no conjugation on the channel side.
        composites[k]
            .iter()
            .zip(precoders.w[j].iter())
            .map(|(h, w)| h * w)
            .sum()
    })
}

/// `||h_k^T P||^2 = sum_i |h_{k,i}|^2 |p_i|^2` per UE, the gain seen by
/// the dynamic noise injected at the surface.
pub fn ris_noise_gains(scaled_diag: &CVector, true_channels: &[CVector]) -> Vec<f64> {
    true_channels
        .iter()
        .map(|h| {
            h.iter()
                .zip(scaled_diag.iter())
                .map(|(hi, pi)| hi.norm_sqr() * pi.norm_sqr())
                .sum()
        })
        .collect()
}

/// Instantaneous downlink SINR under perfect CSI:
/// `gamma_k = eta_k |h_bar_k^T w_k|^2 /
///   (sum_{j != k} eta_j |h_bar_k^T w_j|^2 + delta ||h_k^T P||^2 sigma_R^2 + sigma_k^2)`.
#[allow(clippy::too_many_arguments)]
pub fn sinr_perfect_csi(
    coupling: &CMatrix,
    scaled_diag: &CVector,
    true_channels: &[CVector],
    precoders: &Precoders,
    eta: &[f64],
    sigma_r2: f64,
    sigma_k2: &[f64],
    delta: f64,
) -> Vec<f64> {
    let t = link_matrix(coupling, scaled_diag, true_channels, precoders);
    let gains = ris_noise_gains(scaled_diag, true_channels);
    let k_users = true_channels.len();
    (0..k_users)
        .map(|k| {
            let mut denom = delta * gains[k] * sigma_r2 + sigma_k2[k];
            for j in 0..k_users {
                if j != k {
                    denom += eta[j] * t[(j, k)].norm_sqr();
                }
            }
            eta[k] * t[(k, k)].norm_sqr() / denom
        })
        .collect()
}

/// SINR coefficients of the perfect-CSI expression for max-min power
/// control (the precoders stay fixed while the powers move).
#[allow(clippy::too_many_arguments)]
pub fn perfect_csi_coefficients(
    coupling: &CMatrix,
    scaled_diag: &CVector,
    true_channels: &[CVector],
    precoders: &Precoders,
    sigma_r2: f64,
    sigma_k2: &[f64],
    delta: f64,
    budget: f64,
) -> SinrCoefficients {
    let t = link_matrix(coupling, scaled_diag, true_channels, precoders);
    let gains = ris_noise_gains(scaled_diag, true_channels);
    let k_users = true_channels.len();
    let mut b = DMatrix::zeros(k_users, k_users);
    for j in 0..k_users {
        for k in 0..k_users {
            if j != k {
                b[(j, k)] = t[(j, k)].norm_sqr();
            }
        }
    }
    SinrCoefficients {
        a: (0..k_users).map(|k| t[(k, k)].norm_sqr()).collect(),
        b,
        c: gains.iter().map(|g| delta * g * sigma_r2).collect(),
        noise: sigma_k2.to_vec(),
        precoder_norms: precoders.squared_norms(),
        budget,
    }
}

/// Statistical terms of the hardening decomposition.
#[derive(Debug, Clone)]
pub struct HardeningTerms {
    /// Deterministic desired signal `DS_k = E[h_bar_k^T w_k]`.
    pub ds: Vec<C64>,
    /// Beamforming-gain uncertainty `E|BU_k|^2`.
    pub bu: Vec<f64>,
    /// Multi-user interference `ui[(j, k)] = E|UI_{k,j}|^2`, zero diagonal.
    pub ui: DMatrix<f64>,
    /// Dynamic-noise power `E|z_k|^2` (before the active-RIS flag).
    pub dyn_noise: Vec<f64>,
    /// Trials behind a Monte Carlo estimate (0 for the closed form).
    pub n_trials: usize,
}

impl HardeningTerms {
    /// SINR coefficients of the hardening bound for max-min power control.
    pub fn coefficients(
        &self,
        delta: f64,
        sigma_k2: &[f64],
        precoder_norms: Vec<f64>,
        budget: f64,
    ) -> SinrCoefficients {
        let k_users = self.ds.len();
        let mut b = self.ui.clone();
        for k in 0..k_users {
            b[(k, k)] = self.bu[k];
        }
        SinrCoefficients {
            a: self.ds.iter().map(|d| d.norm_sqr()).collect(),
            b,
            c: self.dyn_noise.iter().map(|z| delta * z).collect(),
            noise: sigma_k2.to_vec(),
            precoder_norms,
            budget,
        }
    }

    /// Hardening-bound SINR at a fixed power allocation.
    pub fn sinr(&self, eta: &[f64], delta: f64, sigma_k2: &[f64]) -> Vec<f64> {
        let k_users = self.ds.len();
        (0..k_users)
            .map(|k| {
                let mut denom = eta[k] * self.bu[k] + delta * self.dyn_noise[k] + sigma_k2[k];
                for (j, &eta_j) in eta.iter().enumerate().take(k_users) {
                    if j != k {
                        denom += eta_j * self.ui[(j, k)];
                    }
                }
                eta[k] * self.ds[k].norm_sqr() / denom
            })
            .collect()
    }
}

/// Streaming accumulator for the Monte Carlo hardening terms.
///
/// Feed it one link matrix (and the dynamic-noise gains) per independent
/// fading/estimation draw; `finalize` produces the term estimates with an
/// unbiased variance for the beamforming uncertainty.
#[derive(Debug, Clone)]
pub struct HardeningAccumulator {
    k_users: usize,
    n: usize,
    sum_diag: Vec<C64>,
    sum_diag_sq: Vec<f64>,
    sum_off_sq: DMatrix<f64>,
    sum_ris_gain: Vec<f64>,
}

impl HardeningAccumulator {
    pub fn new(k_users: usize) -> Self {
        HardeningAccumulator {
            k_users,
            n: 0,
            sum_diag: vec![C64::new(0.0, 0.0); k_users],
            sum_diag_sq: vec![0.0; k_users],
            sum_off_sq: DMatrix::zeros(k_users, k_users),
            sum_ris_gain: vec![0.0; k_users],
        }
    }

    pub fn push(&mut self, link: &CMatrix, ris_gains: &[f64]) {
        self.n += 1;
        for k in 0..self.k_users {
            self.sum_diag[k] += link[(k, k)];
            self.sum_diag_sq[k] += link[(k, k)].norm_sqr();
            self.sum_ris_gain[k] += ris_gains[k];
            for j in 0..self.k_users {
                if j != k {
                    self.sum_off_sq[(j, k)] += link[(j, k)].norm_sqr();
                }
            }
        }
    }

    pub fn n_trials(&self) -> usize {
        self.n
    }

    pub fn finalize(&self, sigma_r2: f64) -> HardeningTerms {
        let n = self.n as f64;
        assert!(self.n >= 2, "need at least two trials");
        let ds: Vec<C64> = self.sum_diag.iter().map(|s| s / n).collect();
        let bu: Vec<f64> = (0..self.k_users)
            .map(|k| (self.sum_diag_sq[k] - n * ds[k].norm_sqr()) / (n - 1.0))
            .collect();
        let ui = &self.sum_off_sq / n;
        let dyn_noise = self.sum_ris_gain.iter().map(|g| sigma_r2 * g / n).collect();
        HardeningTerms {
            ds,
            bu,
            ui,
            dyn_noise,
            n_trials: self.n,
        }
    }
}

/// `P_bar = P H^T H^* P^*` for the applied (scaled) diagonal; Hermitian
/// by construction.
pub fn p_bar(coupling: &CMatrix, scaled_diag: &CVector) -> CMatrix {
    let w = coupling.transpose() * coupling.map(|z| z.conj());
    let n = scaled_diag.len();
    CMatrix::from_fn(n, n, |r, c| {
        scaled_diag[r] * w[(r, c)] * scaled_diag[c].conj()
    })
}

/// Closed-form hardening terms for a channel-independent RIS
/// configuration, Rayleigh channels and unnormalized conjugate
/// beamforming on the LMMSE estimates.
pub fn hardening_closed_form(
    coupling: &CMatrix,
    scaled_diag: &CVector,
    stats: &EstimatorStats,
    copilot_sets: &[Vec<usize>],
    copilot_scaling: &dyn Fn(usize, usize) -> f64,
    betas: &[f64],
    sigma_r2: f64,
) -> HardeningTerms {
    let k_users = betas.len();
    let pb = p_bar(coupling, scaled_diag);
    let pb_h = pb.adjoint();
    let surface_power: f64 = scaled_diag.iter().map(|z| z.norm_sqr()).sum();

    // tr(P_bar R_est_j^*) and P_bar R_est_j^* P_bar^H traces.
    let r_conj: Vec<CMatrix> = stats.r_est.iter().map(|r| r.map(|z| z.conj())).collect();
    let ds: Vec<C64> = r_conj.iter().map(|r| (&pb * r).trace()).collect();
    let spread: Vec<f64> = r_conj
        .iter()
        .map(|r| (&pb * r * &pb_h).trace().re)
        .collect();

    let mut ui = DMatrix::zeros(k_users, k_users);
    let mut bu = vec![0.0; k_users];
    for k in 0..k_users {
        bu[k] = betas[k] * spread[k];
        for j in 0..k_users {
            if j == k {
                continue;
            }
            let mut term = betas[k] * spread[j];
            if copilot_sets[k].contains(&j) {
                let c = copilot_scaling(j, k);
                term += c * c * ds[k].norm_sqr();
            }
            ui[(j, k)] = term;
        }
    }
    let dyn_noise = betas.iter().map(|b| sigma_r2 * b * surface_power).collect();

    HardeningTerms {
        ds,
        bu,
        ui,
        dyn_noise,
        n_trials: 0,
    }
}
