//! Large-scale fading, UE placement and random channel realizations.
//!
//! UE-side propagation is rich scattering: `h_k = sqrt(beta_k) g_k` with
//! `g_k ~ CN(0, I)`. Geometry reaches the UE side only through the 3D
//! distance inside the log-distance path loss.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Result, SimError};
use crate::rng::complex_gaussian_vector;
use crate::scenario::ScenarioConfig;
use crate::{CMatrix, CVector};

/// One dropped UE: where it is and how strong its link is.
#[derive(Debug, Clone, Copy)]
pub struct UeDrop {
    /// Azimuth inside the served sector, radians.
    pub angle: f64,
    /// Horizontal distance from the RIS center, meters.
    pub horizontal_distance: f64,
    /// 3D distance used by the path loss, meters.
    pub distance_3d: f64,
    /// Large-scale power gain, linear.
    pub beta: f64,
}

/// Channels of every UE for one fading realization.
#[derive(Debug, Clone)]
pub struct ChannelSet {
    /// Deterministic RIS-to-array coupling matrix, `N_A x N_R`.
    pub coupling: CMatrix,
    /// Large-scale gains, linear, one per UE.
    pub beta: Vec<f64>,
    /// UE-to-RIS channels `h_k = sqrt(beta_k) g_k`, length `N_R`.
    pub h: Vec<CVector>,
    /// Unit-variance small-scale vectors `g_k`.
    pub g: Vec<CVector>,
}

/// Log-distance path loss (urban-microcell NLOS shape):
/// `PL_dB = 35.3 log10(d) + 22.4 + 21.3 log10(f_c / 1 GHz)`,
/// plus optional log-normal shadowing. Returns the linear power gain.
pub fn path_loss<R: Rng + ?Sized>(distance_3d: f64, config: &ScenarioConfig, rng: &mut R) -> f64 {
    debug_assert!(distance_3d > 0.0);
    let mut pl_db =
        35.3 * distance_3d.log10() + 22.4 + 21.3 * (config.carrier_frequency / 1e9).log10();
    if config.shadowing.enabled {
        let z: f64 = rng.sample(StandardNormal);
        pl_db += config.shadowing.sigma_db * z;
    }
    10f64.powf(-pl_db / 10.0)
}

/// Drop `K` UEs uniformly in angle and radius over the served annulus and
/// evaluate their large-scale gains.
pub fn draw_ue_positions<R: Rng + ?Sized>(config: &ScenarioConfig, rng: &mut R) -> Vec<UeDrop> {
    let p = &config.ue_placement;
    let dz = config.ris_height - p.height;
    (0..config.ue_count)
        .map(|_| {
            let angle = (rng.gen::<f64>() - 0.5) * p.sector_width;
            let r = p.min_distance + rng.gen::<f64>() * (p.max_distance - p.min_distance);
            let d3 = (r * r + dz * dz).sqrt();
            let beta = path_loss(d3, config, rng);
            UeDrop {
                angle,
                horizontal_distance: r,
                distance_3d: d3,
                beta,
            }
        })
        .collect()
}

/// Draw one Rayleigh realization for every UE and attach the coupling
/// matrix.
pub fn draw_channels<R: Rng + ?Sized>(
    coupling: &CMatrix,
    betas: &[f64],
    rng: &mut R,
) -> ChannelSet {
    let n_ris = coupling.ncols();
    let g: Vec<CVector> = betas
        .iter()
        .map(|_| complex_gaussian_vector(rng, n_ris, 1.0))
        .collect();
    let h: Vec<CVector> = betas
        .iter()
        .zip(&g)
        .map(|(&b, gk)| gk * crate::C64::new(b.sqrt(), 0.0))
        .collect();
    ChannelSet {
        coupling: coupling.clone(),
        beta: betas.to_vec(),
        h,
        g,
    }
}

/// Composite uplink channel `H P h_k` for a diagonal RIS response given by
/// `ris_diag`.
pub fn composite_channel(coupling: &CMatrix, ris_diag: &CVector, h_k: &CVector) -> Result<CVector> {
    if coupling.ncols() != ris_diag.len() || ris_diag.len() != h_k.len() {
        return Err(SimError::DimensionMismatch(format!(
            "coupling is {}x{}, ris diagonal {}, channel {}",
            coupling.nrows(),
            coupling.ncols(),
            ris_diag.len(),
            h_k.len()
        )));
    }
    let reflected = CVector::from_fn(h_k.len(), |i, _| ris_diag[i] * h_k[i]);
    Ok(coupling * reflected)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use crate::C64;

    fn no_shadow_cfg() -> ScenarioConfig {
        ScenarioConfig::desk()
    }

    #[test]
    fn path_loss_fixture_at_100m() {
        let cfg = no_shadow_cfg();
        let mut rng = stream_rng(0, 0);
        let beta = path_loss(100.0, &cfg, &mut rng);
        // 35.3*2 + 22.4 + 21.3*log10(1.9) = 98.9374517 dB.
        let pl_db = -10.0 * beta.log10();
        assert!((pl_db - 98.937_451_700_295).abs() < 1e-9, "got {pl_db}");
        assert!((beta - 1.277_188_001_64e-10).abs() < 1e-20);
    }

    #[test]
    fn doubling_distance_adds_ten_point_six_db() {
        let cfg = no_shadow_cfg();
        let mut rng = stream_rng(0, 0);
        let b1 = path_loss(50.0, &cfg, &mut rng);
        let b2 = path_loss(100.0, &cfg, &mut rng);
        let slope = 10.0 * (b1 / b2).log10();
        assert!((slope - 10.626_358_846_9).abs() < 1e-8, "got {slope}");
    }

    #[test]
    fn shadowing_is_seed_deterministic() {
        let mut cfg = no_shadow_cfg();
        cfg.shadowing.enabled = true;
        let a = path_loss(120.0, &cfg, &mut stream_rng(9, 4));
        let b = path_loss(120.0, &cfg, &mut stream_rng(9, 4));
        let c = path_loss(120.0, &cfg, &mut stream_rng(9, 5));
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn ue_drops_respect_the_annulus() {
        let cfg = no_shadow_cfg();
        let mut rng = stream_rng(2, 0);
        for ue in draw_ue_positions(&cfg, &mut rng) {
            assert!(ue.angle.abs() <= 0.5 * cfg.ue_placement.sector_width);
            assert!(ue.horizontal_distance >= cfg.ue_placement.min_distance);
            assert!(ue.horizontal_distance <= cfg.ue_placement.max_distance);
            assert!(ue.distance_3d > ue.horizontal_distance);
            assert!(ue.beta > 0.0);
        }
    }

    #[test]
    fn channel_energy_matches_beta() {
        // Sample mean of |h|^2 / N_R over many draws approaches beta.
        let cfg = no_shadow_cfg();
        let coupling = CMatrix::identity(4, 4);
        let betas = [2.5e-9];
        let mut rng = stream_rng(5, 0);
        let trials = 10_000;
        let mut acc = 0.0;
        for _ in 0..trials {
            let ch = draw_channels(&coupling, &betas, &mut rng);
            acc += ch.h[0].norm_squared() / 4.0;
        }
        let _ = cfg;
        acc /= trials as f64;
        assert!(
            (acc - betas[0]).abs() / betas[0] < 0.03,
            "relative error {}",
            (acc - betas[0]).abs() / betas[0]
        );
    }

    #[test]
    fn zero_beta_gives_zero_channel() {
        let coupling = CMatrix::identity(3, 3);
        let ch = draw_channels(&coupling, &[0.0], &mut stream_rng(0, 0));
        assert!(ch.h[0].iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn draws_are_bit_identical_for_equal_seeds() {
        let coupling = CMatrix::identity(6, 6);
        let a = draw_channels(&coupling, &[1.0, 2.0], &mut stream_rng(3, 7));
        let b = draw_channels(&coupling, &[1.0, 2.0], &mut stream_rng(3, 7));
        assert_eq!(a.h, b.h);
        assert_eq!(a.g, b.g);
    }

    #[test]
    fn identity_reduction_returns_the_channel() {
        let n = 5;
        let coupling = CMatrix::identity(n, n);
        let p = CVector::from_element(n, C64::new(1.0, 0.0));
        let h = complex_gaussian_vector(&mut stream_rng(1, 0), n, 1.0);
        let out = composite_channel(&coupling, &p, &h).unwrap();
        assert!((out - &h).norm() < 1e-15);
    }

    #[test]
    fn composite_is_linear_in_the_ris_diagonal() {
        let mut rng = stream_rng(4, 0);
        let coupling = crate::rng::complex_gaussian_matrix(&mut rng, 3, 6, 1.0);
        let p = complex_gaussian_vector(&mut rng, 6, 1.0);
        let h = complex_gaussian_vector(&mut rng, 6, 1.0);
        let c = C64::new(-0.3, 1.7);
        let base = composite_channel(&coupling, &p, &h).unwrap();
        let scaled = composite_channel(&coupling, &(&p * c), &h).unwrap();
        assert!((scaled - base * c).norm() < 1e-12);
    }

    #[test]
    fn composite_matches_naive_triple_loop() {
        let mut rng = stream_rng(8, 0);
        let coupling = crate::rng::complex_gaussian_matrix(&mut rng, 4, 7, 1.0);
        let p = complex_gaussian_vector(&mut rng, 7, 1.0);
        let h = complex_gaussian_vector(&mut rng, 7, 1.0);
        let fast = composite_channel(&coupling, &p, &h).unwrap();
        let mut slow = CVector::zeros(4);
        for i in 0..4 {
            for j in 0..7 {
                slow[i] += coupling[(i, j)] * p[j] * h[j];
            }
        }
        assert!((&fast - &slow).norm() / slow.norm() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let coupling = CMatrix::identity(3, 4);
        let p = CVector::zeros(5);
        let h = CVector::zeros(4);
        assert!(composite_channel(&coupling, &p, &h).is_err());
    }
}
