//! Favourable-propagation and channel-hardening diagnostics.
//!
//! For composite channels `H P h` with Rayleigh `h`, both the
//! cross-correlation metric and the hardening metric collapse to the same
//! eigenvalue functional `sum(lambda^2) / (sum(lambda))^2` of
//! `P^H H^H H P`, bounded below by `1/N_A`. The Monte Carlo estimator here
//! is an independent check of that closed form.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;

use crate::error::{Result, SimError};
use crate::rng::complex_gaussian_vector;
use crate::{CMatrix, CVector};

/// Report of the variance metrics for one `(H, P)` pair.
#[derive(Debug, Clone)]
pub struct FpHardeningReport {
    /// `f[k][j]`: variance of the normalized inner product between the
    /// composite channels of UEs `k` and `j`; the diagonal holds the
    /// hardening metric.
    pub f_cross: DMatrix<f64>,
    /// Hardening metric per UE (diagonal of `f_cross`).
    pub f_self: Vec<f64>,
    /// Closed-form eigenvalue functional for the same `(H, P)`.
    pub closed_form_value: f64,
    /// Cauchy-Schwarz floor `1/N_A`.
    pub lower_bound: f64,
    /// Number of Monte Carlo trials behind the estimates.
    pub n_trials: usize,
}

/// Nonzero eigenvalues of `P^H H^H H P`, computed from the `N_A x N_A`
/// Gram matrix of `H P` (the two share their nonzero spectrum).
fn composite_gram_eigenvalues(coupling: &CMatrix, ris_diag: &CVector) -> Vec<f64> {
    let a = scaled_coupling(coupling, ris_diag);
    let gram = &a * a.adjoint();
    let eig = SymmetricEigen::new(gram);
    eig.eigenvalues.iter().map(|l| l.max(0.0)).collect()
}

/// `H * diag(p)`.
pub(crate) fn scaled_coupling(coupling: &CMatrix, ris_diag: &CVector) -> CMatrix {
    let mut a = coupling.clone();
    for (j, mut col) in a.column_iter_mut().enumerate() {
        col *= ris_diag[j];
    }
    a
}

/// Closed-form favourable-propagation / hardening metric
/// `sum(lambda^2) / (sum(lambda))^2`.
pub fn fp_hardening_closed(coupling: &CMatrix, ris_diag: &CVector) -> Result<f64> {
    let eig = composite_gram_eigenvalues(coupling, ris_diag);
    let sum: f64 = eig.iter().sum();
    let sum_sq: f64 = eig.iter().map(|l| l * l).sum();
    if sum <= 0.0 {
        return Err(SimError::DegenerateChannel);
    }
    Ok(sum_sq / (sum * sum))
}

/// Monte Carlo estimate of the variance metrics over i.i.d. Rayleigh
/// draws for `k_users` UEs (the large-scale gains cancel and are taken
/// as 1).
pub fn fp_hardening_mc<R: Rng + ?Sized>(
    coupling: &CMatrix,
    ris_diag: &CVector,
    k_users: usize,
    n_trials: usize,
    rng: &mut R,
) -> Result<FpHardeningReport> {
    assert!(n_trials >= 2, "need at least two trials for a variance");
    let n_a = coupling.nrows();
    let n_r = coupling.ncols();
    let a = scaled_coupling(coupling, ris_diag);

    // Accumulators: per-user energy moments and per-pair inner products.
    let mut sum_energy = vec![0.0f64; k_users];
    let mut sum_energy_sq = vec![0.0f64; k_users];
    let mut sum_cross = DMatrix::from_element(k_users, k_users, crate::C64::new(0.0, 0.0));
    let mut sum_cross_sq = DMatrix::<f64>::zeros(k_users, k_users);

    let mut composites: Vec<CVector> = vec![CVector::zeros(n_a); k_users];
    for _ in 0..n_trials {
        for comp in composites.iter_mut() {
            let h = complex_gaussian_vector(rng, n_r, 1.0);
            *comp = &a * h;
        }
        for k in 0..k_users {
            let e = composites[k].norm_squared();
            sum_energy[k] += e;
            sum_energy_sq[k] += e * e;
            for j in (k + 1)..k_users {
                let x = composites[k].dotc(&composites[j]);
                sum_cross[(k, j)] += x;
                sum_cross_sq[(k, j)] += x.norm_sqr();
            }
        }
    }

    let n = n_trials as f64;
    let mean_energy: Vec<f64> = sum_energy.iter().map(|s| s / n).collect();
    let mut f_cross = DMatrix::<f64>::zeros(k_users, k_users);
    let mut f_self = vec![0.0f64; k_users];
    for k in 0..k_users {
        // Unbiased sample variance of the energy.
        let var = (sum_energy_sq[k] - sum_energy[k] * sum_energy[k] / n) / (n - 1.0);
        f_self[k] = var / (mean_energy[k] * mean_energy[k]);
        f_cross[(k, k)] = f_self[k];
        for j in (k + 1)..k_users {
            let mean = sum_cross[(k, j)] / n;
            let var = (sum_cross_sq[(k, j)] - n * mean.norm_sqr()) / (n - 1.0);
            let f = var / (mean_energy[k] * mean_energy[j]);
            f_cross[(k, j)] = f;
            f_cross[(j, k)] = f;
        }
    }

    Ok(FpHardeningReport {
        f_cross,
        f_self,
        closed_form_value: fp_hardening_closed(coupling, ris_diag)?,
        lower_bound: 1.0 / n_a as f64,
        n_trials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{complex_gaussian_matrix, stream_rng};
    use crate::C64;

    fn unit_diag(n: usize) -> CVector {
        CVector::from_element(n, C64::new(1.0, 0.0))
    }

    #[test]
    fn legacy_mimo_closed_form_is_one_over_na() {
        for n_a in [4usize, 16] {
            let f = fp_hardening_closed(&CMatrix::identity(n_a, n_a), &unit_diag(n_a)).unwrap();
            assert!((f - 1.0 / n_a as f64).abs() < 1e-14, "N_A={n_a}: {f}");
        }
    }

    #[test]
    fn rank_one_composite_gives_one() {
        // One active antenna: a single nonzero eigenvalue.
        let mut rng = stream_rng(11, 0);
        let h = complex_gaussian_matrix(&mut rng, 1, 6, 1.0);
        let p = complex_gaussian_vector(&mut rng, 6, 1.0);
        let f = fp_hardening_closed(&h, &p).unwrap();
        assert!((f - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_channel_is_degenerate() {
        let h = CMatrix::zeros(3, 5);
        assert!(matches!(
            fp_hardening_closed(&h, &unit_diag(5)),
            Err(SimError::DegenerateChannel)
        ));
    }

    #[test]
    fn closed_form_is_scale_invariant_in_p() {
        let mut rng = stream_rng(12, 0);
        let h = complex_gaussian_matrix(&mut rng, 4, 9, 1.0);
        let p = complex_gaussian_vector(&mut rng, 9, 1.0);
        let f1 = fp_hardening_closed(&h, &p).unwrap();
        let f2 = fp_hardening_closed(&h, &(&p * C64::new(3.7, 0.0))).unwrap();
        let f3 = fp_hardening_closed(&h, &(&p * C64::new(0.0, -0.2))).unwrap();
        assert!((f1 - f2).abs() < 1e-12);
        assert!((f1 - f3).abs() < 1e-12);
    }

    #[test]
    fn lemma_floor_holds_on_random_draws() {
        let mut rng = stream_rng(13, 0);
        for _ in 0..200 {
            let h = complex_gaussian_matrix(&mut rng, 4, 8, 1.0);
            let p = complex_gaussian_vector(&mut rng, 8, 1.0);
            let f = fp_hardening_closed(&h, &p).unwrap();
            assert!(f >= 0.25 - 1e-12, "violated: {f}");
        }
    }

    #[test]
    fn monte_carlo_matches_closed_form() {
        let mut rng = stream_rng(14, 0);
        let h = complex_gaussian_matrix(&mut rng, 4, 8, 1.0);
        let p = complex_gaussian_vector(&mut rng, 8, 1.0);
        let report = fp_hardening_mc(&h, &p, 2, 100_000, &mut rng).unwrap();
        let cf = report.closed_form_value;
        for k in 0..2 {
            let rel = (report.f_self[k] - cf).abs() / cf;
            assert!(rel < 0.02, "self {k}: rel {rel}");
        }
        let rel = (report.f_cross[(0, 1)] - cf).abs() / cf;
        assert!(rel < 0.02, "cross: rel {rel}");
    }

    #[test]
    fn legacy_mimo_mc_hits_one_over_sixteen() {
        let n_a = 16;
        let mut rng = stream_rng(15, 0);
        let report = fp_hardening_mc(
            &CMatrix::identity(n_a, n_a),
            &unit_diag(n_a),
            2,
            40_000,
            &mut rng,
        )
        .unwrap();
        for f in &report.f_self {
            assert!((f - 1.0 / 16.0).abs() / (1.0 / 16.0) < 0.05, "got {f}");
        }
    }
}
