//! Independent brute-force oracles behind the `oracle` subcommand.
//!
//! Each oracle recomputes a quantity the library also produces, through a
//! deliberately different route (direct formula evaluation, exhaustive
//! enumeration, dense grids, finite differences, Monte Carlo), and prints
//! both sides so fixtures can be checked or regenerated by hand.

use anyhow::bail;
use nalgebra::DMatrix;
use rand::Rng;

use ris_mimo_core::channel::{draw_channels, path_loss};
use ris_mimo_core::estimation::{
    build_training_basis, estimator_stats, lmmse_estimate, lmmse_estimate_all,
    make_training_configs, simulate_training, PilotBook,
};
use ris_mimo_core::geometry::{active_spacing, build_coupling_matrix, build_geometry};
use ris_mimo_core::power::{maxmin_bisection, SinrCoefficients};
use ris_mimo_core::ris::{
    active_gradient, cross_corr_cost, optimize_passive, quantize_phases, random_direction,
    random_phases, CostContext, RisConfig,
};
use ris_mimo_core::rng::{complex_gaussian_matrix, complex_gaussian_vector, stream_rng};
use ris_mimo_core::scenario::ScenarioConfig;
use ris_mimo_core::se::{
    hardening_closed_form, link_matrix, make_precoders, ris_noise_gains, HardeningAccumulator,
    PrecoderKind,
};
use ris_mimo_core::{CMatrix, CVector, C64};

const NAMES: &[(&str, &str)] = &[
    (
        "spacing",
        "directional antenna-spacing formula at full scale",
    ),
    ("path-loss", "log-distance path loss fixture at 100 m"),
    (
        "coupling-rank",
        "98%-energy rank of the coupling and training matrices",
    ),
    (
        "lmmse",
        "reduced LMMSE vs a from-scratch textbook estimator",
    ),
    (
        "passive-exhaustive",
        "sweep search vs full enumeration on a tiny surface",
    ),
    (
        "gradient-fd",
        "analytic gradient vs central finite differences",
    ),
    (
        "maxmin-grid",
        "bisection max-min vs a dense budget-simplex grid",
    ),
    ("hardening", "closed-form hardening terms vs Monte Carlo"),
];

pub fn run(name: &str) -> anyhow::Result<()> {
    match name {
        "list" => {
            for (n, what) in NAMES {
                println!("{n:<20} {what}");
            }
            Ok(())
        }
        "spacing" => spacing(),
        "path-loss" => path_loss_fixture(),
        "coupling-rank" => coupling_rank(),
        "lmmse" => lmmse_oracle(),
        "passive-exhaustive" => passive_exhaustive(),
        "gradient-fd" => gradient_fd(),
        "maxmin-grid" => maxmin_grid(),
        "hardening" => hardening(),
        other => bail!("unknown oracle {other:?}; try `ris-mimo oracle list`"),
    }
}

fn spacing() -> anyhow::Result<()> {
    let lam = 299_792_458.0 / 1.9e9;
    let direct = (63.0 * lam / 2.0 - 10.0 * lam * (std::f64::consts::PI / 10.0).tan()) / 15.0;
    let library = active_spacing(
        16,
        64,
        lam / 2.0,
        5.0 * lam,
        std::f64::consts::PI / 5.0,
        lam,
    )?;
    println!("direct evaluation  d_A = {direct:.15} m");
    println!("library            d_A = {library:.15} m");
    println!("difference         {:.3e}", (direct - library).abs());
    Ok(())
}

fn path_loss_fixture() -> anyhow::Result<()> {
    let cfg = ScenarioConfig::desk();
    let direct = 35.3 * 100f64.log10() + 22.4 + 21.3 * 1.9f64.log10();
    let beta = path_loss(100.0, &cfg, &mut stream_rng(0, 0));
    println!("direct evaluation  PL = {direct:.12} dB");
    println!("library            PL = {:.12} dB", -10.0 * beta.log10());
    println!("linear gain        beta = {beta:.12e}");
    Ok(())
}

fn rank_at_energy(singular_values: &[f64], fraction: f64) -> usize {
    let total: f64 = singular_values.iter().map(|s| s * s).sum();
    let mut acc = 0.0;
    for (i, s) in singular_values.iter().enumerate() {
        acc += s * s;
        if acc / total >= fraction {
            return i + 1;
        }
    }
    singular_values.len()
}

fn coupling_rank() -> anyhow::Result<()> {
    let mut cfg = ScenarioConfig::paper();
    cfg.rng_seed = 1;
    let geom = build_geometry(&cfg)?;
    let coupling = build_coupling_matrix(&geom, &cfg);
    let mut sv: Vec<f64> = coupling
        .clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let s98 = rank_at_energy(&sv, 0.98);
    println!(
        "coupling matrix    {}x{}",
        coupling.nrows(),
        coupling.ncols()
    );
    println!("sigma_1/sigma_8    {:.3e}", sv[0] / sv[7]);
    println!("rank at 98% energy S = {s98} (of at most {})", sv.len());

    let mut rng = stream_rng(cfg.rng_seed, 0);
    let betas = vec![1e-10; cfg.ue_count];
    let tr = make_training_configs(&cfg, &betas, &mut rng);
    let basis = build_training_basis(&coupling, &tr, cfg.svd_energy_fraction)?;
    println!(
        "training basis     rank {} retained S = {} energy {:.4} (seed {}, stream 0)",
        basis.rank, basis.retained, basis.energy_fraction, cfg.rng_seed
    );
    Ok(())
}

fn lmmse_oracle() -> anyhow::Result<()> {
    // Small instance: assemble raw-observable covariances from first
    // principles and compare against the reduced-basis estimator.
    let n_a = 2;
    let n_r = 4;
    let tau_p = 3;
    let k_users = 2;
    let coupling = complex_gaussian_matrix(&mut stream_rng(14, 0), n_a, n_r, 1.0);
    let mut cfg = ScenarioConfig::desk();
    cfg.n_active = n_a;
    cfg.n_ris = n_r;
    let betas = [1.3, 0.6];
    let configs = make_training_configs(&cfg, &betas, &mut stream_rng(15, 0));
    let pilots = PilotBook::uniform(tau_p, k_users, 0.5);
    let (sigma_a2, sigma_r2, delta) = (0.05, 0.0, 0.0);
    let basis = build_training_basis(&coupling, &configs, 0.999)?;
    let stats = estimator_stats(&basis, &pilots, &betas, sigma_a2, sigma_r2, delta)?;
    let channels = draw_channels(&coupling, &betas, &mut stream_rng(16, 0));
    let ys = simulate_training(
        &channels,
        &configs,
        &pilots,
        sigma_a2,
        sigma_r2,
        delta,
        &mut stream_rng(16, 1),
    );

    let mut worst: f64 = 0.0;
    for k in 0..k_users {
        let copilot_energy: f64 = pilots
            .copilot_set(k)
            .iter()
            .map(|&j| (tau_p as f64).powi(2) * pilots.powers[j] * betas[j])
            .sum();
        let dim = basis.stacked.nrows();
        let mut r_yy_full =
            &basis.stacked * basis.stacked.adjoint() * C64::new(copilot_energy, 0.0);
        for i in 0..dim {
            r_yy_full[(i, i)] += C64::new(tau_p as f64 * sigma_a2, 0.0);
        }
        let r_hy = basis.stacked.adjoint()
            * C64::new(tau_p as f64 * pilots.powers[k].sqrt() * betas[k], 0.0);
        let r_vy = basis.v.adjoint() * &r_hy * &basis.u;
        let r_yy = basis.u.adjoint() * &r_yy_full * &basis.u;
        let reduced = basis.u.adjoint() * &ys[k];
        let textbook = &basis.v * (&r_vy * r_yy.try_inverse().unwrap() * reduced);
        let fast = lmmse_estimate(&ys[k], &basis, &stats, k);
        let rel = (&fast - &textbook).norm() / textbook.norm();
        worst = worst.max(rel);
        println!("UE {k}: relative gap to textbook LMMSE = {rel:.3e}");
    }
    println!("worst case {worst:.3e} (gate 1e-10)");
    Ok(())
}

fn passive_exhaustive() -> anyhow::Result<()> {
    let n_r = 4;
    let grid = 16usize;
    let mut rng = stream_rng(51, 0);
    let coupling = complex_gaussian_matrix(&mut rng, 2, n_r, 1.0);
    let channels: Vec<CVector> = (0..2)
        .map(|_| complex_gaussian_vector(&mut rng, n_r, 1.0))
        .collect();
    let ctx = CostContext::new(&coupling, &channels);

    let phases: Vec<C64> = (0..grid)
        .map(|m| C64::from_polar(1.0, 2.0 * std::f64::consts::PI * m as f64 / grid as f64))
        .collect();
    let mut global = f64::INFINITY;
    for a in 0..grid {
        for b in 0..grid {
            for c in 0..grid {
                for d in 0..grid {
                    let p = CVector::from_vec(vec![phases[a], phases[b], phases[c], phases[d]]);
                    global = global.min(cross_corr_cost(&p, &ctx));
                }
            }
        }
    }
    let init = RisConfig::passive(quantize_phases(
        &random_phases(n_r, &mut stream_rng(51, 9)),
        4,
    ));
    let (_, trace) = optimize_passive(&ctx, &init, grid, 50, 1e-9);
    let reached = trace.last().copied().unwrap();
    println!("enumerated optimum ({} configs): {global:.6e}", grid.pow(4));
    println!("sweep search reached:            {reached:.6e}");
    println!("ratio: {:.4}", reached / global);
    Ok(())
}

fn gradient_fd() -> anyhow::Result<()> {
    let mut rng = stream_rng(32, 0);
    let coupling = complex_gaussian_matrix(&mut rng, 3, 5, 1.0);
    let channels: Vec<CVector> = (0..3)
        .map(|_| complex_gaussian_vector(&mut rng, 5, 1.0))
        .collect();
    let ctx = CostContext::new(&coupling, &channels);
    let p = random_direction(5, &mut rng);
    let g = active_gradient(&p, &ctx);
    let eps = 1e-6;
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let d = complex_gaussian_vector(&mut rng, 5, 1.0).normalize();
        let fp = cross_corr_cost(&(&p + &d * C64::new(eps, 0.0)), &ctx);
        let fm = cross_corr_cost(&(&p - &d * C64::new(eps, 0.0)), &ctx);
        let fd = (fp - fm) / (2.0 * eps);
        let an = g.dotc(&d).re;
        worst = worst.max((fd - an).abs() / an.abs());
    }
    println!("worst relative error over 20 directions: {worst:.3e} (gate 1e-5)");
    Ok(())
}

fn maxmin_grid() -> anyhow::Result<()> {
    let mut worst: f64 = 0.0;
    for seed in 0..5u64 {
        let mut rng = stream_rng(500 + seed, 0);
        let a: Vec<f64> = (0..2).map(|_| 0.2 + rng.gen::<f64>()).collect();
        let mut b = DMatrix::zeros(2, 2);
        b[(0, 1)] = 0.2 * rng.gen::<f64>();
        b[(1, 0)] = 0.2 * rng.gen::<f64>();
        let coeffs = SinrCoefficients {
            a,
            b,
            c: vec![0.0, 0.0],
            noise: vec![0.05, 0.08],
            precoder_norms: vec![1.0, 1.3],
            budget: 2.0,
        };
        let alloc = maxmin_bisection(&coeffs, 0.0, None, 1e-6)?;
        let mut grid_best = 0.0f64;
        for i in 1..10_000 {
            let x = i as f64 / 10_000.0;
            let eta = [
                x * coeffs.budget / coeffs.precoder_norms[0],
                (1.0 - x) * coeffs.budget / coeffs.precoder_norms[1],
            ];
            let s = coeffs.sinr(&eta);
            grid_best = grid_best.max(s[0].min(s[1]));
        }
        let rel = (alloc.t_star - grid_best).abs() / grid_best;
        worst = worst.max(rel);
        println!(
            "seed {seed}: bisection {:.6e} grid {grid_best:.6e} rel {rel:.2e}",
            alloc.t_star
        );
    }
    println!("worst relative gap {worst:.2e} (gate 1e-2)");
    Ok(())
}

fn hardening() -> anyhow::Result<()> {
    let n_a = 3;
    let n_r = 6;
    let k_users = 2;
    let mut cfg = ScenarioConfig::desk();
    cfg.n_active = n_a;
    cfg.n_ris = n_r;
    let coupling = complex_gaussian_matrix(&mut stream_rng(209, 0), n_a, n_r, 1.0);
    let betas = [1.2, 0.5];
    let (sigma_a2, sigma_r2, delta) = (0.05, 0.0, 0.0);
    let tr_configs = make_training_configs(&cfg, &betas, &mut stream_rng(209, 1));
    let pilots = PilotBook::uniform(4, k_users, 0.5);
    let basis = build_training_basis(&coupling, &tr_configs, 0.98)?;
    let stats = estimator_stats(&basis, &pilots, &betas, sigma_a2, sigma_r2, delta)?;
    let scaled_p = random_phases(n_r, &mut stream_rng(209, 2));
    let copilot_sets: Vec<Vec<usize>> = (0..k_users).map(|k| pilots.copilot_set(k)).collect();
    let scaling = |j: usize, k: usize| pilots.copilot_scaling(&betas, j, k);
    let closed = hardening_closed_form(
        &coupling,
        &scaled_p,
        &stats,
        &copilot_sets,
        &scaling,
        &betas,
        sigma_r2,
    );

    let mut acc = HardeningAccumulator::new(k_users);
    let mut rng = stream_rng(209, 3);
    for _ in 0..20_000 {
        let channels = draw_channels(&coupling, &betas, &mut rng);
        let ys = simulate_training(
            &channels,
            &tr_configs,
            &pilots,
            sigma_a2,
            sigma_r2,
            delta,
            &mut rng,
        );
        let est = lmmse_estimate_all(&ys, &basis, &stats, &pilots, &betas);
        let prec = make_precoders(
            &coupling,
            &scaled_p,
            &est.estimates,
            PrecoderKind::Unnormalized,
        )?;
        acc.push(
            &link_matrix(&coupling, &scaled_p, &channels.h, &prec),
            &ris_noise_gains(&scaled_p, &channels.h),
        );
    }
    let mc = acc.finalize(sigma_r2);
    for k in 0..k_users {
        println!(
            "UE {k}: DS closed {:.4e} mc {:.4e} | BU closed {:.4e} mc {:.4e}",
            closed.ds[k].norm(),
            mc.ds[k].norm(),
            closed.bu[k],
            mc.bu[k]
        );
        for j in 0..k_users {
            if j != k {
                println!(
                    "      UI[{j},{k}] closed {:.4e} mc {:.4e}",
                    closed.ui[(j, k)],
                    mc.ui[(j, k)]
                );
            }
        }
    }
    let _ = CMatrix::zeros(1, 1);
    Ok(())
}
