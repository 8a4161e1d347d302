//! Campaign orchestration: Monte Carlo drops, experiment sweeps and CSV
//! emission.
//!
//! A drop is one UE placement with everything that follows (training,
//! estimation, RIS configuration, power control, SE). Drop `d` of arm `a`
//! always draws from the ChaCha stream `(a << 32) | d` of the campaign
//! seed, so outputs are byte-identical regardless of how drops are
//! scheduled across threads. Experiments that compare configurations
//! sample-by-sample reuse the same stream ids across arms to stay paired.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{draw_channels, draw_ue_positions, ChannelSet, UeDrop};
use crate::error::{Result, SimError};
use crate::estimation::{
    build_training_basis, estimator_stats, identity_basis, lmmse_estimate_all,
    make_training_configs, simulate_training, EstimateSet, EstimatorStats, PilotBook,
    TrainingBasis, TrainingConfigs,
};
use crate::geometry::{build_coupling_matrix, build_geometry, SystemGeometry};
use crate::power::{maxmin_bisection, PowerAllocation};
use crate::ris::{
    optimize_active_direction, optimize_passive, quantize_config, random_direction, random_phases,
    ris_power_scale, CostContext, RisConfig,
};
use crate::rng::stream_rng;
use crate::scenario::{PhaseBits, RisMode, ScenarioConfig};
use crate::se::{
    link_matrix, make_precoders, perfect_csi_coefficients, ris_noise_gains, se_from_sinr,
    HardeningAccumulator, PrecoderKind, SEReport, SeMode,
};
use crate::{CMatrix, CVector};

/// Bisection tolerance on the SINR (linear scale).
pub const POWER_TOLERANCE: f64 = 1e-4;
/// Passive sweep limit.
pub const MAX_SWEEPS: usize = 100;
/// Projected-gradient iteration limit.
pub const MAX_GRADIENT_ITERS: usize = 2000;
/// Relative objective-decrease tolerance for both optimizers.
pub const OPTIMIZER_TOLERANCE: f64 = 1e-6;
/// Phase grid used by the passive search when the hardware is not
/// quantized.
pub const CONTINUOUS_GRID: usize = 256;

/// How the RIS is configured in a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RisPolicy {
    /// Uniform random phases (channel independent).
    Random,
    /// Cross-correlation minimization on the LMMSE estimates.
    OptimizedEstimates,
    /// Cross-correlation minimization on the true channels (genie
    /// benchmarks with perfect CSI).
    OptimizedTrue,
    /// `P = I`: the no-RIS legacy baseline.
    Identity,
}

/// Campaign experiment selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    /// Perfect-CSI SE CDFs: active vs passive vs legacy MIMO.
    CdfCompare,
    /// Hardening-bound min-SE versus the power split.
    EpsilonSweep,
    /// Perfect-CSI SE CDFs under phase quantization.
    QuantizationSweep,
    /// Hardening-bound SE: optimized vs random RIS configuration.
    RisPolicyCompare,
    /// Perfect-CSI SE CDFs of legacy MIMO at several array sizes.
    LegacyMimoBaseline,
}

impl Experiment {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "cdf_compare" => Ok(Experiment::CdfCompare),
            "epsilon_sweep" => Ok(Experiment::EpsilonSweep),
            "quantization_sweep" => Ok(Experiment::QuantizationSweep),
            "ris_policy_compare" => Ok(Experiment::RisPolicyCompare),
            "legacy_mimo_baseline" => Ok(Experiment::LegacyMimoBaseline),
            other => Err(SimError::Parse(format!("unknown experiment {other:?}"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Experiment::CdfCompare => "cdf_compare",
            Experiment::EpsilonSweep => "epsilon_sweep",
            Experiment::QuantizationSweep => "quantization_sweep",
            Experiment::RisPolicyCompare => "ris_policy_compare",
            Experiment::LegacyMimoBaseline => "legacy_mimo_baseline",
        }
    }
}

/// A full campaign description; the manifest serializes exactly this.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Campaign {
    pub scenario: ScenarioConfig,
    pub experiment: Experiment,
    pub n_drops: usize,
    /// Inner fading/estimation draws per drop (expectation-type
    /// quantities; perfect-CSI experiments emit one sample set per draw).
    pub n_fading_per_drop: usize,
    /// Experiment-specific sweep values; empty selects the defaults.
    #[serde(default)]
    pub sweep: Vec<String>,
    pub seed: u64,
    /// Power split used by active arms of comparison experiments.
    #[serde(default = "default_active_split")]
    pub active_power_split: f64,
}

fn default_active_split() -> f64 {
    0.2
}

impl Campaign {
    pub fn new(scenario: ScenarioConfig, experiment: Experiment) -> Self {
        let seed = scenario.rng_seed;
        Campaign {
            scenario,
            experiment,
            n_drops: 50,
            n_fading_per_drop: 1,
            sweep: Vec::new(),
            seed,
            active_power_split: default_active_split(),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("campaign serialization cannot fail")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| SimError::Parse(e.to_string()))
    }

    fn sweep_or(&self, defaults: &[&str]) -> Vec<String> {
        if self.sweep.is_empty() {
            defaults.iter().map(|s| s.to_string()).collect()
        } else {
            self.sweep.clone()
        }
    }
}

/// Per-scenario precomputation shared by every drop.
#[derive(Debug, Clone)]
pub struct ScenarioContext {
    pub config: ScenarioConfig,
    pub geometry: Option<SystemGeometry>,
    pub coupling: CMatrix,
    pub legacy: bool,
}

impl ScenarioContext {
    /// Validate the scenario and build its geometry and coupling matrix.
    pub fn new(config: ScenarioConfig) -> Result<Self> {
        let config = config.validated()?;
        let geometry = build_geometry(&config)?;
        let coupling = build_coupling_matrix(&geometry, &config);
        Ok(ScenarioContext {
            config,
            geometry: Some(geometry),
            coupling,
            legacy: false,
        })
    }

    /// Legacy MIMO baseline: `n` active antennas, identity coupling, no
    /// surface.
    pub fn legacy(base: &ScenarioConfig, n_antennas: usize) -> Result<Self> {
        let mut config = base.clone();
        config.n_active = n_antennas;
        config.n_ris = n_antennas;
        config.ris_mode = RisMode::Passive;
        config.power_split = 0.0;
        config.phase_bits = PhaseBits::Continuous;
        let config = config.validated()?;
        Ok(ScenarioContext {
            coupling: CMatrix::identity(n_antennas, n_antennas),
            config,
            geometry: None,
            legacy: true,
        })
    }

    fn sigma_k2_vec(&self) -> Vec<f64> {
        vec![self.config.sigma_k2(); self.config.ue_count]
    }

    fn budget(&self) -> f64 {
        (1.0 - self.config.power_split) * self.config.power_budget
    }
}

/// Everything drawn once per drop: placement, channels, training state
/// and estimates.
#[derive(Debug, Clone)]
pub struct DropContext {
    pub ue_drops: Vec<UeDrop>,
    pub betas: Vec<f64>,
    pub pilots: PilotBook,
    pub tr_configs: TrainingConfigs,
    pub basis: TrainingBasis,
    pub stats: EstimatorStats,
    pub channels: ChannelSet,
    pub estimates: EstimateSet,
}

impl DropContext {
    /// Draw a drop: placement, fading, training configurations, the
    /// truncated basis and the LMMSE estimates.
    pub fn generate(sctx: &ScenarioContext, rng: &mut ChaCha8Rng) -> Result<Self> {
        let cfg = &sctx.config;
        let ue_drops = draw_ue_positions(cfg, rng);
        let betas: Vec<f64> = ue_drops.iter().map(|u| u.beta).collect();
        let pilots = PilotBook::uniform(cfg.pilot_length, cfg.ue_count, cfg.uplink_pilot_power);
        let channels = draw_channels(&sctx.coupling, &betas, rng);
        let (tr_configs, basis) = if sctx.legacy {
            let n = cfg.n_active;
            (
                TrainingConfigs {
                    diags: vec![CVector::from_element(n, crate::C64::new(1.0, 0.0))],
                    amplitude: 1.0,
                },
                identity_basis(n),
            )
        } else {
            let tr = make_training_configs(cfg, &betas, rng);
            let basis = build_training_basis(&sctx.coupling, &tr, cfg.svd_energy_fraction)?;
            (tr, basis)
        };
        let stats = estimator_stats(
            &basis,
            &pilots,
            &betas,
            cfg.sigma_a2(),
            cfg.sigma_r2(),
            cfg.delta(),
        )?;
        let ys = simulate_training(
            &channels,
            &tr_configs,
            &pilots,
            cfg.sigma_a2(),
            cfg.sigma_r2(),
            cfg.delta(),
            rng,
        );
        let estimates = lmmse_estimate_all(&ys, &basis, &stats, &pilots, &betas);
        Ok(DropContext {
            ue_drops,
            betas,
            pilots,
            tr_configs,
            basis,
            stats,
            channels,
            estimates,
        })
    }

    /// Fresh fading and training noise under this drop's placement and
    /// training basis.
    pub fn redraw_fading(
        &self,
        sctx: &ScenarioContext,
        rng: &mut ChaCha8Rng,
    ) -> (ChannelSet, EstimateSet) {
        let cfg = &sctx.config;
        let channels = draw_channels(&sctx.coupling, &self.betas, rng);
        let ys = simulate_training(
            &channels,
            &self.tr_configs,
            &self.pilots,
            cfg.sigma_a2(),
            cfg.sigma_r2(),
            cfg.delta(),
            rng,
        );
        let estimates =
            lmmse_estimate_all(&ys, &self.basis, &self.stats, &self.pilots, &self.betas);
        (channels, estimates)
    }
}

/// Configure the surface from the given channel vectors under a policy.
pub fn derive_ris(
    sctx: &ScenarioContext,
    source: &[CVector],
    policy: RisPolicy,
    rng: &mut ChaCha8Rng,
) -> RisConfig {
    let cfg = &sctx.config;
    let n = cfg.n_ris;
    let finish_active = |mut c: RisConfig| {
        c.omega_ris = ris_power_scale(
            &c.diag,
            &sctx.coupling,
            cfg.power_split,
            cfg.power_budget,
            cfg.sigma_r2(),
        );
        c
    };
    match policy {
        RisPolicy::Identity => RisConfig::identity(n),
        RisPolicy::Random => {
            let mut c = match cfg.ris_mode {
                RisMode::Passive => RisConfig::passive(random_phases(n, rng)),
                RisMode::Active => RisConfig::active(random_direction(n, rng), 1.0),
            };
            c.phase_bits = cfg.phase_bits;
            let c = quantize_config(&c);
            match cfg.ris_mode {
                RisMode::Passive => c,
                RisMode::Active => finish_active(c),
            }
        }
        RisPolicy::OptimizedEstimates | RisPolicy::OptimizedTrue => {
            let ctx = CostContext::new(&sctx.coupling, source);
            match cfg.ris_mode {
                RisMode::Passive => {
                    let (grid, init) = match cfg.phase_bits {
                        PhaseBits::Bits(b) => (
                            1usize << b,
                            crate::ris::quantize_phases(&random_phases(n, rng), b),
                        ),
                        PhaseBits::Continuous => (CONTINUOUS_GRID, random_phases(n, rng)),
                    };
                    let mut seed_cfg = RisConfig::passive(init);
                    seed_cfg.phase_bits = cfg.phase_bits;
                    let (out, _) =
                        optimize_passive(&ctx, &seed_cfg, grid, MAX_SWEEPS, OPTIMIZER_TOLERANCE);
                    out
                }
                RisMode::Active => {
                    let init = random_direction(n, rng);
                    let (dir, _) = optimize_active_direction(
                        &ctx,
                        &init,
                        MAX_GRADIENT_ITERS,
                        OPTIMIZER_TOLERANCE,
                    );
                    let mut c = RisConfig::active(dir, 1.0);
                    c.phase_bits = cfg.phase_bits;
                    let c = quantize_config(&c);
                    finish_active(c)
                }
            }
        }
    }
}

/// Perfect-CSI evaluation of one realization: true-channel precoders,
/// max-min power control, Shannon SE.
pub fn evaluate_pcsi(
    sctx: &ScenarioContext,
    channels: &ChannelSet,
    ris: &RisConfig,
) -> Result<(SEReport, PowerAllocation)> {
    let cfg = &sctx.config;
    let scaled = ris.scaled_diag();
    let precoders = make_precoders(
        &sctx.coupling,
        &scaled,
        &channels.h,
        PrecoderKind::Normalized,
    )?;
    let coeffs = perfect_csi_coefficients(
        &sctx.coupling,
        &scaled,
        &channels.h,
        &precoders,
        cfg.sigma_r2(),
        &sctx.sigma_k2_vec(),
        cfg.delta(),
        sctx.budget(),
    );
    let alloc = maxmin_bisection(&coeffs, 0.0, None, POWER_TOLERANCE)?;
    let sinr = coeffs.sinr(&alloc.eta);
    Ok((
        se_from_sinr(sinr, cfg.effective_prelog(), SeMode::PerfectCsi),
        alloc,
    ))
}

/// Hardening-bound evaluation of one drop by Monte Carlo over fading and
/// estimation noise, with normalized conjugate beamforming.
///
/// Channel-independent policies fix the surface once; the optimized
/// policy re-derives it from each inner draw's estimates, matching the
/// numerical-evaluation route for channel-dependent configurations.
pub fn evaluate_lb(
    sctx: &ScenarioContext,
    dctx: &DropContext,
    policy: RisPolicy,
    n_fading: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(SEReport, PowerAllocation)> {
    let cfg = &sctx.config;
    let k_users = cfg.ue_count;
    let fixed_ris = match policy {
        RisPolicy::Random | RisPolicy::Identity => {
            Some(derive_ris(sctx, &dctx.estimates.estimates, policy, rng))
        }
        _ => None,
    };
    let mut acc = HardeningAccumulator::new(k_users);
    for _ in 0..n_fading.max(2) {
        let (channels, estimates) = dctx.redraw_fading(sctx, rng);
        let ris = match &fixed_ris {
            Some(r) => r.clone(),
            None => derive_ris(sctx, &estimates.estimates, policy, rng),
        };
        let scaled = ris.scaled_diag();
        let precoders = make_precoders(
            &sctx.coupling,
            &scaled,
            &estimates.estimates,
            PrecoderKind::Normalized,
        )?;
        let link = link_matrix(&sctx.coupling, &scaled, &channels.h, &precoders);
        let gains = ris_noise_gains(&scaled, &channels.h);
        acc.push(&link, &gains);
    }
    let terms = acc.finalize(cfg.sigma_r2());
    let coeffs = terms.coefficients(
        cfg.delta(),
        &sctx.sigma_k2_vec(),
        vec![1.0; k_users],
        sctx.budget(),
    );
    let alloc = maxmin_bisection(&coeffs, 0.0, None, POWER_TOLERANCE)?;
    let sinr = coeffs.sinr(&alloc.eta);
    Ok((
        se_from_sinr(sinr, cfg.effective_prelog(), SeMode::HardeningMc),
        alloc,
    ))
}

/// Genie upper bound for one drop: the fading-averaged Shannon SE with
/// estimate-based precoders and perfect-CSI SINR evaluation, at a fixed
/// power allocation.
///
/// Returns the report plus the per-UE standard error of the averaged
/// `log2(1 + gamma)` (in bit/s/Hz, pre-log applied).
pub fn evaluate_ub(
    sctx: &ScenarioContext,
    dctx: &DropContext,
    policy: RisPolicy,
    eta: &[f64],
    n_fading: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(SEReport, Vec<f64>)> {
    let cfg = &sctx.config;
    let k_users = cfg.ue_count;
    let sigma_k2 = sctx.sigma_k2_vec();
    let fixed_ris = match policy {
        RisPolicy::Random | RisPolicy::Identity => {
            Some(derive_ris(sctx, &dctx.estimates.estimates, policy, rng))
        }
        _ => None,
    };
    let mut sum = vec![0.0f64; k_users];
    let mut sum_sq = vec![0.0f64; k_users];
    let n = n_fading.max(2);
    for _ in 0..n {
        let (channels, estimates) = dctx.redraw_fading(sctx, rng);
        let ris = match &fixed_ris {
            Some(r) => r.clone(),
            None => derive_ris(sctx, &estimates.estimates, policy, rng),
        };
        let scaled = ris.scaled_diag();
        let precoders = make_precoders(
            &sctx.coupling,
            &scaled,
            &estimates.estimates,
            PrecoderKind::Normalized,
        )?;
        let gamma = crate::se::sinr_perfect_csi(
            &sctx.coupling,
            &scaled,
            &channels.h,
            &precoders,
            eta,
            cfg.sigma_r2(),
            &sigma_k2,
            cfg.delta(),
        );
        for k in 0..k_users {
            let rate = (1.0 + gamma[k]).log2();
            sum[k] += rate;
            sum_sq[k] += rate * rate;
        }
    }
    let prelog = cfg.effective_prelog();
    let mut stderr = Vec::with_capacity(k_users);
    let mut se = Vec::with_capacity(k_users);
    let mut sinr = Vec::with_capacity(k_users);
    for k in 0..k_users {
        let mean = sum[k] / n as f64;
        let var = (sum_sq[k] - n as f64 * mean * mean) / (n as f64 - 1.0);
        stderr.push(prelog * (var.max(0.0) / n as f64).sqrt());
        se.push(prelog * mean);
        sinr.push(2f64.powf(mean) - 1.0);
    }
    Ok((
        SEReport {
            sinr,
            se,
            mode: SeMode::UpperBound,
            prelog,
        },
        stderr,
    ))
}

/// Per-UE SE bundle produced by one drop of the full pipeline.
#[derive(Debug, Clone)]
pub struct DropOutputs {
    pub pcsi: SEReport,
    pub lb: SEReport,
}

impl DropOutputs {
    pub fn min_se_pcsi(&self) -> f64 {
        self.pcsi.se.iter().fold(f64::INFINITY, |m, &x| m.min(x))
    }

    pub fn min_se_lb(&self) -> f64 {
        self.lb.se.iter().fold(f64::INFINITY, |m, &x| m.min(x))
    }
}

/// The full per-drop pipeline: placement, training, estimation, RIS
/// optimization on the estimates, power control and both SE reports.
pub fn run_drop(
    sctx: &ScenarioContext,
    n_fading: usize,
    rng: &mut ChaCha8Rng,
) -> Result<DropOutputs> {
    let dctx = DropContext::generate(sctx, rng)?;
    let policy = if sctx.legacy {
        RisPolicy::Identity
    } else {
        RisPolicy::OptimizedEstimates
    };
    let ris = derive_ris(sctx, &dctx.estimates.estimates, policy, rng);
    let (pcsi, _) = evaluate_pcsi(sctx, &dctx.channels, &ris)?;
    let (lb, _) = evaluate_lb(sctx, &dctx, policy, n_fading, rng)?;
    Ok(DropOutputs { pcsi, lb })
}

/// Empirical CDF of SE samples with its provenance.
#[derive(Debug, Clone)]
pub struct CdfTable {
    /// Sorted SE samples, bit/s/Hz.
    pub se: Vec<f64>,
    /// Curve label used in file names and summaries.
    pub label: String,
}

impl CdfTable {
    pub fn from_samples(mut se: Vec<f64>, label: impl Into<String>) -> Self {
        se.sort_by(|a, b| a.partial_cmp(b).unwrap());
        CdfTable {
            se,
            label: label.into(),
        }
    }

    /// CDF ordinate of the `i`-th sorted sample: `(i + 1) / n`.
    pub fn ordinate(&self, i: usize) -> f64 {
        (i + 1) as f64 / self.se.len() as f64
    }

    pub fn median(&self) -> f64 {
        let n = self.se.len();
        if n == 0 {
            return f64::NAN;
        }
        if n % 2 == 1 {
            self.se[n / 2]
        } else {
            0.5 * (self.se[n / 2 - 1] + self.se[n / 2])
        }
    }
}

fn fmt9(x: f64) -> String {
    format!("{x:.8e}")
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(contents.as_bytes())?;
    Ok(())
}

fn write_cdf(path: &Path, table: &CdfTable) -> Result<()> {
    let mut out = String::from("se_bps_hz,cdf\n");
    for (i, se) in table.se.iter().enumerate() {
        out.push_str(&fmt9(*se));
        out.push(',');
        out.push_str(&fmt9(table.ordinate(i)));
        out.push('\n');
    }
    write_file(path, &out)
}

fn write_rows(path: &Path, header: &str, rows: &[(String, f64)]) -> Result<()> {
    let mut out = String::from(header);
    out.push('\n');
    for (key, value) in rows {
        out.push_str(key);
        out.push(',');
        out.push_str(&fmt9(*value));
        out.push('\n');
    }
    write_file(path, &out)
}

/// Structured results of a campaign, alongside the files written.
#[derive(Debug, Clone)]
pub enum ExperimentOutcome {
    /// Median SE per arm label.
    Medians(BTreeMap<String, f64>),
    /// `(epsilon, mean over drops of the per-drop min UE SE)`.
    EpsilonCurve(Vec<(f64, f64)>),
    /// `(random, optimized)` per-drop min-SE pairs.
    PolicyPairs(Vec<(f64, f64)>),
}

#[derive(Debug, Clone)]
pub struct CampaignResult {
    pub files: Vec<PathBuf>,
    pub outcome: ExperimentOutcome,
}

fn stream(arm: u64, drop: u64) -> u64 {
    (arm << 32) | drop
}

fn min_of(values: &[f64]) -> f64 {
    values.iter().fold(f64::INFINITY, |m, &x| m.min(x))
}

/// Perfect-CSI SE samples of one arm (K per fading draw, `n_fading`
/// draws per drop).
///
/// The SE is always evaluated with true channels; the policy decides
/// what the RIS optimizer sees (estimates go through the full training
/// pipeline).
fn pcsi_arm_samples(
    sctx: &ScenarioContext,
    campaign: &Campaign,
    arm: u64,
    policy: RisPolicy,
) -> Result<Vec<f64>> {
    let per_drop: Result<Vec<Vec<f64>>> = (0..campaign.n_drops as u64)
        .into_par_iter()
        .map(|d| one_pcsi_drop(sctx, campaign, arm, policy, d).map_err(|e| e.in_drop(d)))
        .collect();
    Ok(per_drop?.into_iter().flatten().collect())
}

fn one_pcsi_drop(
    sctx: &ScenarioContext,
    campaign: &Campaign,
    arm: u64,
    policy: RisPolicy,
    d: u64,
) -> Result<Vec<f64>> {
    let mut rng = stream_rng(campaign.seed, stream(arm, d));
    let cfg = &sctx.config;
    let mut samples = Vec::with_capacity(cfg.ue_count * campaign.n_fading_per_drop);
    if policy == RisPolicy::OptimizedEstimates {
        let dctx = DropContext::generate(sctx, &mut rng)?;
        for fading in 0..campaign.n_fading_per_drop.max(1) {
            let (channels, estimates) = if fading == 0 {
                (dctx.channels.clone(), dctx.estimates.clone())
            } else {
                dctx.redraw_fading(sctx, &mut rng)
            };
            let ris = derive_ris(sctx, &estimates.estimates, policy, &mut rng);
            let (report, _) = evaluate_pcsi(sctx, &channels, &ris)?;
            samples.extend(report.se);
        }
    } else {
        let ue_drops = draw_ue_positions(cfg, &mut rng);
        let betas: Vec<f64> = ue_drops.iter().map(|u| u.beta).collect();
        for _ in 0..campaign.n_fading_per_drop.max(1) {
            let channels = draw_channels(&sctx.coupling, &betas, &mut rng);
            let ris = derive_ris(sctx, &channels.h, policy, &mut rng);
            let (report, _) = evaluate_pcsi(sctx, &channels, &ris)?;
            samples.extend(report.se);
        }
    }
    Ok(samples)
}

fn run_cdf_compare(campaign: &Campaign, out_dir: &Path) -> Result<CampaignResult> {
    let base = campaign.scenario.clone().validated()?;
    let mut passive_cfg = base.clone();
    passive_cfg.ris_mode = RisMode::Passive;
    passive_cfg.power_split = 0.0;
    let mut active_cfg = base.clone();
    active_cfg.ris_mode = RisMode::Active;
    active_cfg.power_split = campaign.active_power_split;

    let arms: Vec<(String, ScenarioContext, RisPolicy)> = vec![
        (
            "passive".into(),
            ScenarioContext::new(passive_cfg)?,
            RisPolicy::OptimizedTrue,
        ),
        (
            "active".into(),
            ScenarioContext::new(active_cfg)?,
            RisPolicy::OptimizedTrue,
        ),
        (
            format!("legacy{}", base.n_active),
            ScenarioContext::legacy(&base, base.n_active)?,
            RisPolicy::Identity,
        ),
    ];

    let mut files = Vec::new();
    let mut medians = BTreeMap::new();
    let mut summary_rows = Vec::new();
    for (arm_idx, (label, sctx, policy)) in arms.iter().enumerate() {
        let samples = pcsi_arm_samples(sctx, campaign, arm_idx as u64, *policy)?;
        let table = CdfTable::from_samples(samples, label.clone());
        let path = out_dir.join(format!("cdf_pcsi_{label}.csv"));
        write_cdf(&path, &table)?;
        files.push(path);
        medians.insert(label.clone(), table.median());
        summary_rows.push((label.clone(), table.median()));
    }
    let summary = out_dir.join("summary.csv");
    write_rows(&summary, "mode,median_se_bps_hz", &summary_rows)?;
    files.push(summary);
    Ok(CampaignResult {
        files,
        outcome: ExperimentOutcome::Medians(medians),
    })
}

fn run_quantization_sweep(campaign: &Campaign, out_dir: &Path) -> Result<CampaignResult> {
    let values = campaign.sweep_or(&["3", "4", "continuous"]);
    let mut files = Vec::new();
    let mut medians = BTreeMap::new();
    let mut rows = Vec::new();
    for value in &values {
        let mut cfg = campaign.scenario.clone();
        cfg.phase_bits = if value == "continuous" {
            PhaseBits::Continuous
        } else {
            PhaseBits::Bits(
                value
                    .parse()
                    .map_err(|_| SimError::Parse(format!("bad N_Q value {value:?}")))?,
            )
        };
        let sctx = ScenarioContext::new(cfg)?;
        // Same stream for every arm: the draws pair sample-by-sample. The
        // optimizer sees the channel estimates, as in the full pipeline.
        let samples = pcsi_arm_samples(&sctx, campaign, 0, RisPolicy::OptimizedEstimates)?;
        let label = format!("nq_{value}");
        let table = CdfTable::from_samples(samples, label.clone());
        let path = out_dir.join(format!("cdf_pcsi_{label}.csv"));
        write_cdf(&path, &table)?;
        files.push(path);
        medians.insert(value.clone(), table.median());
        rows.push((value.clone(), table.median()));
    }
    let summary = out_dir.join("quantization_sweep.csv");
    write_rows(&summary, "n_q,median_se_bps_hz", &rows)?;
    files.push(summary);
    Ok(CampaignResult {
        files,
        outcome: ExperimentOutcome::Medians(medians),
    })
}

fn run_legacy_baseline(campaign: &Campaign, out_dir: &Path) -> Result<CampaignResult> {
    let base = campaign.scenario.clone().validated()?;
    let defaults = [
        base.n_active.to_string(),
        (2 * base.n_active).to_string(),
        (4 * base.n_active).to_string(),
    ];
    let values = campaign.sweep_or(&defaults.iter().map(|s| s.as_str()).collect::<Vec<_>>());
    let mut files = Vec::new();
    let mut medians = BTreeMap::new();
    let mut rows = Vec::new();
    for (arm_idx, value) in values.iter().enumerate() {
        let n: usize = value
            .parse()
            .map_err(|_| SimError::Parse(format!("bad antenna count {value:?}")))?;
        let sctx = ScenarioContext::legacy(&base, n)?;
        let samples = pcsi_arm_samples(&sctx, campaign, arm_idx as u64, RisPolicy::Identity)?;
        let label = format!("legacy{n}");
        let table = CdfTable::from_samples(samples, label.clone());
        let path = out_dir.join(format!("cdf_pcsi_{label}.csv"));
        write_cdf(&path, &table)?;
        files.push(path);
        medians.insert(value.clone(), table.median());
        rows.push((value.clone(), table.median()));
    }
    let summary = out_dir.join("legacy_baseline.csv");
    write_rows(&summary, "n_antennas,median_se_bps_hz", &rows)?;
    files.push(summary);
    Ok(CampaignResult {
        files,
        outcome: ExperimentOutcome::Medians(medians),
    })
}

fn run_policy_compare(campaign: &Campaign, out_dir: &Path) -> Result<CampaignResult> {
    let sctx = ScenarioContext::new(campaign.scenario.clone())?;
    let n_fading = campaign.n_fading_per_drop.max(2);
    let per_drop: Result<Vec<(Vec<f64>, Vec<f64>)>> = (0..campaign.n_drops as u64)
        .into_par_iter()
        .map(|d| {
            let run = || -> Result<(Vec<f64>, Vec<f64>)> {
                let mut rng = stream_rng(campaign.seed, stream(0, d));
                let dctx = DropContext::generate(&sctx, &mut rng)?;
                let (random, _) = evaluate_lb(&sctx, &dctx, RisPolicy::Random, n_fading, &mut rng)?;
                let (optimized, _) = evaluate_lb(
                    &sctx,
                    &dctx,
                    RisPolicy::OptimizedEstimates,
                    n_fading,
                    &mut rng,
                )?;
                Ok((random.se, optimized.se))
            };
            run().map_err(|e| e.in_drop(d))
        })
        .collect();
    let per_drop = per_drop?;

    let mut random_samples = Vec::new();
    let mut optimized_samples = Vec::new();
    let mut pairs = Vec::new();
    let mut pair_rows = Vec::new();
    for (d, (random, optimized)) in per_drop.iter().enumerate() {
        random_samples.extend_from_slice(random);
        optimized_samples.extend_from_slice(optimized);
        let pair = (min_of(random), min_of(optimized));
        pair_rows.push((format!("{d},{}", fmt9(pair.0)), pair.1));
        pairs.push(pair);
    }

    let mut files = Vec::new();
    for (label, samples) in [("random", random_samples), ("optimized", optimized_samples)] {
        let table = CdfTable::from_samples(samples, label);
        let path = out_dir.join(format!("cdf_lb_{label}.csv"));
        write_cdf(&path, &table)?;
        files.push(path);
    }
    let pair_path = out_dir.join("min_se_per_drop.csv");
    write_rows(
        &pair_path,
        "drop,random_min_se_bps_hz,optimized_min_se_bps_hz",
        &pair_rows,
    )?;
    files.push(pair_path);
    Ok(CampaignResult {
        files,
        outcome: ExperimentOutcome::PolicyPairs(pairs),
    })
}

fn parse_epsilons(values: &[String]) -> Result<Vec<f64>> {
    values
        .iter()
        .map(|v| {
            v.parse::<f64>()
                .map_err(|_| SimError::Parse(format!("bad epsilon {v:?}")))
                .and_then(|e| {
                    if (0.0..1.0).contains(&e) {
                        Ok(e)
                    } else {
                        Err(SimError::Parse(format!("epsilon {e} outside [0, 1)")))
                    }
                })
        })
        .collect()
}

fn active_sweep_drop(
    campaign: &Campaign,
    active_ctx: &ScenarioContext,
    positive: &[f64],
    n_fading: usize,
    d: u64,
) -> Result<Vec<f64>> {
    let cfg = &active_ctx.config;
    let k_users = cfg.ue_count;
    let mut rng = stream_rng(campaign.seed, stream(1, d));
    let dctx = DropContext::generate(active_ctx, &mut rng)?;
    let mut accs: Vec<HardeningAccumulator> = positive
        .iter()
        .map(|_| HardeningAccumulator::new(k_users))
        .collect();
    for _ in 0..n_fading {
        let (channels, estimates) = dctx.redraw_fading(active_ctx, &mut rng);
        let ctx = CostContext::new(&active_ctx.coupling, &estimates.estimates);
        let init = random_direction(cfg.n_ris, &mut rng);
        let (dir, _) =
            optimize_active_direction(&ctx, &init, MAX_GRADIENT_ITERS, OPTIMIZER_TOLERANCE);
        let mut unit = RisConfig::active(dir, 1.0);
        unit.phase_bits = cfg.phase_bits;
        let unit = quantize_config(&unit);
        let precoders = make_precoders(
            &active_ctx.coupling,
            &unit.diag,
            &estimates.estimates,
            PrecoderKind::Normalized,
        )?;
        let link = link_matrix(&active_ctx.coupling, &unit.diag, &channels.h, &precoders);
        let gains = ris_noise_gains(&unit.diag, &channels.h);
        let trace = crate::ris::reflected_trace(&unit.diag, &active_ctx.coupling);
        for (ei, &eps) in positive.iter().enumerate() {
            let omega =
                eps * cfg.power_budget / ((1.0 - eps) * cfg.power_budget * trace + cfg.sigma_r2());
            // Normalized precoders are scale invariant, so the
            // link scales by sqrt(omega) and the injected-noise
            // gain by omega.
            let scaled_link = &link * crate::C64::new(omega.sqrt(), 0.0);
            let scaled_gains: Vec<f64> = gains.iter().map(|g| g * omega).collect();
            accs[ei].push(&scaled_link, &scaled_gains);
        }
    }
    let sigma_k2 = active_ctx.sigma_k2_vec();
    positive
        .iter()
        .zip(accs.iter())
        .map(|(&eps, acc)| {
            let terms = acc.finalize(cfg.sigma_r2());
            let coeffs = terms.coefficients(
                1.0,
                &sigma_k2,
                vec![1.0; k_users],
                (1.0 - eps) * cfg.power_budget,
            );
            let alloc = maxmin_bisection(&coeffs, 0.0, None, POWER_TOLERANCE)?;
            let sinr = coeffs.sinr(&alloc.eta);
            let report = se_from_sinr(sinr, cfg.effective_prelog(), SeMode::HardeningMc);
            Ok(min_of(&report.se))
        })
        .collect()
}

/// Minimum-SE versus the power split, hardening bound with the surface
/// optimized on estimates.
///
/// All strictly positive splits share one Monte Carlo pass per drop: the
/// optimized direction, the estimates and the link statistics do not
/// depend on `epsilon`, only the amplitude scale does, so the per-split
/// terms are exact rescalings accumulated side by side. The zero split
/// runs the passive pipeline (an active surface with no power budget is
/// normalized to passive).
fn run_epsilon_sweep(campaign: &Campaign, out_dir: &Path) -> Result<CampaignResult> {
    let eps_values = parse_epsilons(&campaign.sweep_or(&[
        "0", "0.1", "0.2", "0.3", "0.4", "0.5", "0.6", "0.7", "0.8", "0.9",
    ]))?;
    let positive: Vec<f64> = eps_values.iter().copied().filter(|&e| e > 0.0).collect();
    let n_fading = campaign.n_fading_per_drop.max(2);

    let mut passive_cfg = campaign.scenario.clone();
    passive_cfg.ris_mode = RisMode::Passive;
    passive_cfg.power_split = 0.0;
    let passive_ctx = ScenarioContext::new(passive_cfg)?;

    // The active context carries a positive split only to mark the mode;
    // the per-split scaling below never reads it.
    let mut active_cfg = campaign.scenario.clone();
    active_cfg.ris_mode = RisMode::Active;
    active_cfg.power_split = positive.first().copied().unwrap_or(0.5);
    let active_ctx = ScenarioContext::new(active_cfg)?;

    let needs_passive = eps_values.contains(&0.0);
    let passive_min: Vec<f64> = if needs_passive {
        let results: Result<Vec<f64>> = (0..campaign.n_drops as u64)
            .into_par_iter()
            .map(|d| {
                let run = || -> Result<f64> {
                    let mut rng = stream_rng(campaign.seed, stream(0, d));
                    let dctx = DropContext::generate(&passive_ctx, &mut rng)?;
                    let (report, _) = evaluate_lb(
                        &passive_ctx,
                        &dctx,
                        RisPolicy::OptimizedEstimates,
                        n_fading,
                        &mut rng,
                    )?;
                    Ok(min_of(&report.se))
                };
                run().map_err(|e| e.in_drop(d))
            })
            .collect();
        results?
    } else {
        Vec::new()
    };

    let active_min: Vec<Vec<f64>> = if positive.is_empty() {
        Vec::new()
    } else {
        let results: Result<Vec<Vec<f64>>> = (0..campaign.n_drops as u64)
            .into_par_iter()
            .map(|d| {
                active_sweep_drop(campaign, &active_ctx, &positive, n_fading, d)
                    .map_err(|e| e.in_drop(d))
            })
            .collect();
        results?
    };

    let mut rows = Vec::new();
    let mut curve = Vec::new();
    for &eps in &eps_values {
        let mean = if eps == 0.0 {
            passive_min.iter().sum::<f64>() / passive_min.len().max(1) as f64
        } else {
            let idx = positive.iter().position(|&e| e == eps).unwrap();
            active_min.iter().map(|drop| drop[idx]).sum::<f64>() / active_min.len().max(1) as f64
        };
        rows.push((format!("{eps}"), mean));
        curve.push((eps, mean));
    }
    let path = out_dir.join("epsilon_sweep.csv");
    write_rows(&path, "epsilon,min_se_bps_hz", &rows)?;
    Ok(CampaignResult {
        files: vec![path],
        outcome: ExperimentOutcome::EpsilonCurve(curve),
    })
}

/// Run a campaign, writing CSVs and a manifest into `out_dir`.
pub fn run_campaign(campaign: &Campaign, out_dir: &Path) -> Result<CampaignResult> {
    campaign.scenario.clone().validated()?;
    if campaign.seed > i64::MAX as u64 {
        return Err(SimError::InvalidConfig(
            "campaign seed must fit in a TOML integer (<= 2^63 - 1)".into(),
        ));
    }
    if campaign.n_drops == 0 {
        return Err(SimError::InvalidConfig("n_drops must be >= 1".into()));
    }
    std::fs::create_dir_all(out_dir)?;
    let mut result = match campaign.experiment {
        Experiment::CdfCompare => run_cdf_compare(campaign, out_dir)?,
        Experiment::EpsilonSweep => run_epsilon_sweep(campaign, out_dir)?,
        Experiment::QuantizationSweep => run_quantization_sweep(campaign, out_dir)?,
        Experiment::RisPolicyCompare => run_policy_compare(campaign, out_dir)?,
        Experiment::LegacyMimoBaseline => run_legacy_baseline(campaign, out_dir)?,
    };
    let manifest_path = out_dir.join("manifest.toml");
    write_file(&manifest_path, &campaign.to_toml())?;
    result.files.push(manifest_path);
    Ok(result)
}
