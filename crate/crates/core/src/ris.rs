//! RIS configuration: cross-correlation cost, per-element grid search for
//! passive surfaces, projected gradient on the unit sphere for active
//! ones, power-budget amplitude scaling and phase quantization.
//!
//! The cost being minimized is the sum of squared cross-correlations
//! between composite channel vectors, written as quadratic forms
//! `|p^H Q_{k,k'} p|^2` in the RIS diagonal `p`. The optimizers consume a
//! [`CostContext`] built from whatever channel vectors the caller supplies
//! (estimates in any realistic run); they have no access to anything else.

use rand::Rng;

use crate::scenario::{PhaseBits, RisMode};
use crate::{CMatrix, CVector, C64};

/// Diagonal RIS response.
///
/// `diag` holds the unit-scale direction: unit-modulus entries for a
/// passive surface, a unit-norm vector for an active one. The applied
/// diagonal is `sqrt(omega_ris) * diag` (with `omega_ris = 1` when
/// passive).
#[derive(Debug, Clone)]
pub struct RisConfig {
    pub diag: CVector,
    pub mode: RisMode,
    /// Active-RIS power scale; 1 for passive surfaces.
    pub omega_ris: f64,
    pub phase_bits: PhaseBits,
}

impl RisConfig {
    pub fn passive(diag: CVector) -> Self {
        RisConfig {
            diag,
            mode: RisMode::Passive,
            omega_ris: 1.0,
            phase_bits: PhaseBits::Continuous,
        }
    }

    pub fn active(direction: CVector, omega_ris: f64) -> Self {
        RisConfig {
            diag: direction,
            mode: RisMode::Active,
            omega_ris,
            phase_bits: PhaseBits::Continuous,
        }
    }

    /// All-ones passive configuration (used by the no-RIS baseline).
    pub fn identity(n: usize) -> Self {
        RisConfig::passive(CVector::from_element(n, C64::new(1.0, 0.0)))
    }

    /// Uniform random phases; unit modulus per element.
    pub fn random_passive<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        RisConfig::passive(random_phases(n, rng))
    }

    /// The diagonal actually applied by the surface.
    pub fn scaled_diag(&self) -> CVector {
        if self.mode == RisMode::Active {
            &self.diag * C64::new(self.omega_ris.sqrt(), 0.0)
        } else {
            self.diag.clone()
        }
    }
}

/// Unit-modulus vector of i.i.d. uniform phases.
pub fn random_phases<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CVector {
    CVector::from_fn(n, |_, _| {
        let phase = rng.gen::<f64>() * 2.0 * std::f64::consts::PI;
        C64::new(phase.cos(), phase.sin())
    })
}

/// Uniform random point on the complex unit sphere (phases only), used to
/// initialize the active-RIS search.
pub fn random_direction<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CVector {
    let p = random_phases(n, rng);
    &p / C64::new((n as f64).sqrt(), 0.0)
}

/// Precomputed quadratic forms `Q_{k,k'} = diag(h_k)^H H^H H diag(h_k')`
/// for every UE pair `k < k'`.
#[derive(Debug, Clone)]
pub struct CostContext {
    /// One matrix per pair, `N_R x N_R`.
    pub q: Vec<CMatrix>,
    /// The `(k, k')` pair behind each entry of `q`.
    pub pairs: Vec<(usize, usize)>,
    n_ris: usize,
}

impl CostContext {
    /// Build from the coupling matrix and per-UE channel vectors (true
    /// channels or estimates, at the caller's choice).
    pub fn new(coupling: &CMatrix, channels: &[CVector]) -> Self {
        let n_ris = coupling.ncols();
        let gram = coupling.adjoint() * coupling;
        let k = channels.len();
        let mut q = Vec::with_capacity(k.saturating_sub(1) * k / 2);
        let mut pairs = Vec::with_capacity(q.capacity());
        for a in 0..k {
            for b in (a + 1)..k {
                let mut m = gram.clone();
                for r in 0..n_ris {
                    let left = channels[a][r].conj();
                    for c in 0..n_ris {
                        m[(r, c)] = left * m[(r, c)] * channels[b][c];
                    }
                }
                q.push(m);
                pairs.push((a, b));
            }
        }
        CostContext { q, pairs, n_ris }
    }

    pub fn n_ris(&self) -> usize {
        self.n_ris
    }
}

/// Sum of squared composite-channel cross-correlations
/// `sum_{k<k'} |p^H Q_{k,k'} p|^2`.
pub fn cross_corr_cost(p: &CVector, ctx: &CostContext) -> f64 {
    ctx.q
        .iter()
        .map(|q| {
            let qp = q * p;
            p.dotc(&qp).norm_sqr()
        })
        .sum()
}

/// Gradient of [`cross_corr_cost`] with respect to the conjugate
/// coordinates: `2 sum [(p^H Q p)^* Q p + (p^H Q p) Q^H p]`, so that the
/// derivative along a direction `d` is `Re(g^H d)`.
pub fn active_gradient(p: &CVector, ctx: &CostContext) -> CVector {
    let mut grad = CVector::zeros(p.len());
    for q in &ctx.q {
        let qp = q * p;
        let qhp = q.adjoint() * p;
        let u = p.dotc(&qp);
        grad += (qp * u.conj() + qhp * u) * C64::new(2.0, 0.0);
    }
    grad
}

/// Cost history of an optimizer run, one entry per committed state.
pub type CostTrace = Vec<f64>;

/// Per-element exhaustive phase search with cyclic sweeps.
///
/// Every element update evaluates the grid phases plus the element's
/// current phase, so the recorded cost never increases even when the
/// initial point is off-grid. The search stops when a full sweep improves
/// the cost by less than `tol` (relative) or after `max_sweeps`.
pub fn optimize_passive(
    ctx: &CostContext,
    init: &RisConfig,
    grid_size: usize,
    max_sweeps: usize,
    tol: f64,
) -> (RisConfig, CostTrace) {
    let n = ctx.n_ris();
    let mut p = init.diag.clone();
    let mut cost = cross_corr_cost(&p, ctx);
    let mut trace = vec![cost];
    if ctx.q.is_empty() || n == 0 {
        return (RisConfig::passive(p), trace);
    }

    let grid: Vec<C64> = (0..grid_size)
        .map(|m| {
            let phase = 2.0 * std::f64::consts::PI * m as f64 / grid_size as f64;
            C64::new(phase.cos(), phase.sin())
        })
        .collect();

    // Maintained quadratic-form values, one per pair.
    let mut values: Vec<C64> = ctx
        .q
        .iter()
        .map(|q| {
            let qp = q * &p;
            p.dotc(&qp)
        })
        .collect();

    for _ in 0..max_sweeps {
        let sweep_start = cost;
        for i in 0..n {
            // With |x| = 1 the element's own quadratic term is constant,
            // so v(x) = c0 + conj(x) a + x b per pair.
            let n_pairs = ctx.q.len();
            let mut lin_a = Vec::with_capacity(n_pairs);
            let mut lin_b = Vec::with_capacity(n_pairs);
            let mut consts = Vec::with_capacity(n_pairs);
            for (idx, q) in ctx.q.iter().enumerate() {
                let mut a = C64::new(0.0, 0.0);
                let mut b = C64::new(0.0, 0.0);
                for m in 0..n {
                    if m != i {
                        a += q[(i, m)] * p[m];
                        b += p[m].conj() * q[(m, i)];
                    }
                }
                let pi = p[i];
                let c0 = values[idx] - pi.conj() * a - b * pi;
                lin_a.push(a);
                lin_b.push(b);
                consts.push(c0);
            }

            let eval = |x: C64| -> f64 {
                (0..n_pairs)
                    .map(|idx| (consts[idx] + x.conj() * lin_a[idx] + x * lin_b[idx]).norm_sqr())
                    .sum()
            };

            let mut best_x = p[i];
            let mut best_cost = eval(p[i]);
            for &x in &grid {
                let c = eval(x);
                if c < best_cost {
                    best_cost = c;
                    best_x = x;
                }
            }

            if best_x != p[i] {
                // Gate the move on the exactly recomputed cost so the
                // recorded trace is monotone by construction.
                let mut candidate = p.clone();
                candidate[i] = best_x;
                let exact = cross_corr_cost(&candidate, ctx);
                if exact < cost {
                    p = candidate;
                    cost = exact;
                    for idx in 0..n_pairs {
                        values[idx] =
                            consts[idx] + best_x.conj() * lin_a[idx] + best_x * lin_b[idx];
                    }
                }
            }
            trace.push(cost);
        }
        let drop = sweep_start - cost;
        if drop <= tol * sweep_start.max(f64::MIN_POSITIVE) {
            break;
        }
    }

    let mut out = init.clone();
    out.diag = p;
    out.mode = RisMode::Passive;
    out.omega_ris = 1.0;
    (out, trace)
}

/// Projected gradient descent on the unit sphere for the active-RIS
/// direction.
///
/// Each iteration takes a backtracking step along the negative gradient
/// and renormalizes; the step is committed only if it strictly decreases
/// the cost. The accepted step size seeds the next line search.
pub fn optimize_active_direction(
    ctx: &CostContext,
    init: &CVector,
    max_iters: usize,
    tol: f64,
) -> (CVector, CostTrace) {
    let mut p = init.normalize();
    let mut cost = cross_corr_cost(&p, ctx);
    let mut trace = vec![cost];
    if ctx.q.is_empty() {
        return (p, trace);
    }

    let mut step = 1.0f64;
    for _ in 0..max_iters {
        let grad = active_gradient(&p, ctx);
        let gnorm = grad.norm();
        if gnorm == 0.0 {
            break;
        }
        // Scale the trial step by the gradient norm so the first
        // backtrack probes a unit-scale move on the sphere.
        let mut alpha = step / gnorm;
        let mut accepted = false;
        for _ in 0..30 {
            let candidate = (&p - &grad * C64::new(alpha, 0.0)).normalize();
            let c = cross_corr_cost(&candidate, ctx);
            if c < cost {
                let rel_drop = (cost - c) / cost.max(f64::MIN_POSITIVE);
                p = candidate;
                cost = c;
                trace.push(cost);
                step = (alpha * gnorm * 2.0).min(1e6);
                accepted = true;
                if rel_drop < tol {
                    return (p.normalize(), trace);
                }
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    (p.normalize(), trace)
}

/// Power scale of the active RIS under the split `epsilon`:
/// `omega = eps P_B / ((1 - eps) P_B tr(P H^T H^* P^H) + sigma_R^2)`
/// for a unit-norm direction `p_tilde`.
pub fn ris_power_scale(
    p_tilde: &CVector,
    coupling: &CMatrix,
    epsilon: f64,
    power_budget: f64,
    sigma_r2: f64,
) -> f64 {
    if epsilon == 0.0 {
        return 0.0;
    }
    let trace = reflected_trace(p_tilde, coupling);
    epsilon * power_budget / ((1.0 - epsilon) * power_budget * trace + sigma_r2)
}

/// `tr(P H^T H^* P^H) = sum_i |p_i|^2 ||H(:, i)||^2`.
pub fn reflected_trace(p: &CVector, coupling: &CMatrix) -> f64 {
    (0..p.len())
        .map(|i| p[i].norm_sqr() * coupling.column(i).norm_squared())
        .sum()
}

/// Snap every phase to the nearest of `2^bits` uniform grid points,
/// preserving amplitudes.
pub fn quantize_phases(diag: &CVector, bits: u32) -> CVector {
    let levels = (1u64 << bits) as f64;
    let step = 2.0 * std::f64::consts::PI / levels;
    diag.map(|z| {
        let r = z.norm();
        if r == 0.0 {
            return z;
        }
        let idx = (z.arg().rem_euclid(2.0 * std::f64::consts::PI) / step).round() % levels;
        let phase = idx * step;
        C64::new(r * phase.cos(), r * phase.sin())
    })
}

/// Apply the scenario's quantization constraint to a configuration.
pub fn quantize_config(config: &RisConfig) -> RisConfig {
    match config.phase_bits {
        PhaseBits::Continuous => config.clone(),
        PhaseBits::Bits(b) => {
            let mut out = config.clone();
            out.diag = quantize_phases(&config.diag, b);
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::composite_channel;
    use crate::rng::{complex_gaussian_matrix, complex_gaussian_vector, stream_rng};
    use std::f64::consts::PI;

    fn random_ctx(
        seed: u64,
        n_a: usize,
        n_r: usize,
        k: usize,
    ) -> (CMatrix, Vec<CVector>, CostContext) {
        let mut rng = stream_rng(seed, 0);
        let coupling = complex_gaussian_matrix(&mut rng, n_a, n_r, 1.0);
        let channels: Vec<CVector> = (0..k)
            .map(|_| complex_gaussian_vector(&mut rng, n_r, 1.0))
            .collect();
        let ctx = CostContext::new(&coupling, &channels);
        (coupling, channels, ctx)
    }

    #[test]
    fn single_user_cost_is_zero() {
        let (_, _, ctx) = random_ctx(30, 3, 5, 1);
        let p = random_phases(5, &mut stream_rng(30, 1));
        assert_eq!(cross_corr_cost(&p, &ctx), 0.0);
        assert_eq!(active_gradient(&p, &ctx).norm(), 0.0);
    }

    #[test]
    fn orthogonal_composites_cost_zero() {
        let coupling = CMatrix::identity(2, 2);
        let e1 = CVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
        let e2 = CVector::from_vec(vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0)]);
        let ctx = CostContext::new(&coupling, &[e1, e2]);
        let p = CVector::from_element(2, C64::new(1.0, 0.0));
        assert!(cross_corr_cost(&p, &ctx) < 1e-30);
    }

    #[test]
    fn quadratic_form_matches_direct_evaluation() {
        let (coupling, channels, ctx) = random_ctx(31, 3, 6, 3);
        let p = random_phases(6, &mut stream_rng(31, 1));
        let direct: f64 = (0..3usize)
            .flat_map(|a| ((a + 1)..3).map(move |b| (a, b)))
            .map(|(a, b)| {
                let ha = composite_channel(&coupling, &p, &channels[a]).unwrap();
                let hb = composite_channel(&coupling, &p, &channels[b]).unwrap();
                ha.dotc(&hb).norm_sqr()
            })
            .sum();
        let quad = cross_corr_cost(&p, &ctx);
        assert!((direct - quad).abs() / direct < 1e-10, "{direct} vs {quad}");
    }

    #[test]
    fn gradient_matches_central_differences() {
        let (_, _, ctx) = random_ctx(32, 3, 5, 3);
        let p = random_direction(5, &mut stream_rng(32, 1));
        let g = active_gradient(&p, &ctx);
        let eps = 1e-6;
        let mut rng = stream_rng(32, 2);
        for trial in 0..20 {
            let d = complex_gaussian_vector(&mut rng, 5, 1.0).normalize();
            let fp = cross_corr_cost(&(&p + &d * C64::new(eps, 0.0)), &ctx);
            let fm = cross_corr_cost(&(&p - &d * C64::new(eps, 0.0)), &ctx);
            let fd = (fp - fm) / (2.0 * eps);
            let analytic = g.dotc(&d).re;
            let rel = (fd - analytic).abs() / analytic.abs();
            assert!(rel < 1e-5, "direction {trial}: rel {rel}");
        }
    }

    #[test]
    fn cost_is_degree_four_homogeneous() {
        let (_, _, ctx) = random_ctx(33, 2, 4, 2);
        let p = random_direction(4, &mut stream_rng(33, 1));
        let f1 = cross_corr_cost(&p, &ctx);
        let c = 1.7f64;
        let f2 = cross_corr_cost(&(&p * C64::new(c, 0.0)), &ctx);
        assert!((f2 - c.powi(4) * f1).abs() / f2 < 1e-12);
    }

    #[test]
    fn passive_search_is_monotone_and_unit_modulus() {
        for seed in 0..10 {
            let (_, _, ctx) = random_ctx(40 + seed, 3, 8, 3);
            let init = RisConfig::random_passive(8, &mut stream_rng(40 + seed, 9));
            let (out, trace) = optimize_passive(&ctx, &init, 64, 30, 1e-6);
            for w in trace.windows(2) {
                assert!(w[1] <= w[0], "trace increased: {} -> {}", w[0], w[1]);
            }
            assert!(trace.last().unwrap() <= &trace[0]);
            for z in out.diag.iter() {
                assert!((z.norm() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_user_passive_returns_init() {
        let (_, _, ctx) = random_ctx(50, 3, 6, 1);
        let init = RisConfig::random_passive(6, &mut stream_rng(50, 9));
        let (out, trace) = optimize_passive(&ctx, &init, 32, 10, 1e-6);
        assert_eq!(out.diag, init.diag);
        assert_eq!(trace, vec![0.0]);
    }

    #[test]
    fn tiny_passive_instance_matches_exhaustive_search() {
        let n_r = 4;
        let grid = 16usize;
        let (_, _, ctx) = random_ctx(51, 2, n_r, 2);

        // Brute force over all grid^4 on-grid configurations.
        let phases: Vec<C64> = (0..grid)
            .map(|m| {
                let phi = 2.0 * PI * m as f64 / grid as f64;
                C64::new(phi.cos(), phi.sin())
            })
            .collect();
        let mut global = f64::INFINITY;
        let mut idx = [0usize; 4];
        'outer: loop {
            let p = CVector::from_fn(n_r, |i, _| phases[idx[i]]);
            global = global.min(cross_corr_cost(&p, &ctx));
            let mut carry = 0;
            loop {
                idx[carry] += 1;
                if idx[carry] < grid {
                    break;
                }
                idx[carry] = 0;
                carry += 1;
                if carry == 4 {
                    break 'outer;
                }
            }
        }

        // Start the sweep search on-grid so the admissible sets coincide.
        let init = RisConfig::passive(quantize_phases(
            &random_phases(n_r, &mut stream_rng(51, 9)),
            4,
        ));
        let (_, trace) = optimize_passive(&ctx, &init, grid, 50, 1e-9);
        let reached = *trace.last().unwrap();
        let gap = if global > 0.0 {
            reached / global
        } else {
            f64::NAN
        };
        assert!(
            reached <= 1.05 * global + 1e-12 * trace[0],
            "local search gap {gap}: {reached} vs global {global}"
        );
    }

    #[test]
    fn projected_gradient_is_monotone_and_stays_on_sphere() {
        for seed in 0..10 {
            let (_, _, ctx) = random_ctx(60 + seed, 3, 8, 3);
            let init = random_direction(8, &mut stream_rng(60 + seed, 9));
            let (out, trace) = optimize_active_direction(&ctx, &init, 500, 1e-8);
            for w in trace.windows(2) {
                assert!(w[1] <= w[0]);
            }
            assert!((out.norm() - 1.0).abs() < 1e-12);
            assert!(trace.last().unwrap() <= &trace[0]);
        }
    }

    #[test]
    fn stationary_init_is_returned_unchanged() {
        let (_, _, ctx) = random_ctx(70, 3, 5, 1);
        let init = random_direction(5, &mut stream_rng(70, 9));
        let (out, _) = optimize_active_direction(&ctx, &init, 100, 1e-8);
        assert!((out - init.normalize()).norm() < 1e-15);
    }

    #[test]
    fn projected_gradient_beats_random_sampling_on_tiny_instance() {
        let (_, _, ctx) = random_ctx(71, 2, 3, 2);
        let init = random_direction(3, &mut stream_rng(71, 9));
        let (_, trace) = optimize_active_direction(&ctx, &init, 2000, 1e-10);
        let reached = *trace.last().unwrap();
        let mut rng = stream_rng(71, 10);
        let mut best = f64::INFINITY;
        for _ in 0..100_000 {
            let p = complex_gaussian_vector(&mut rng, 3, 1.0).normalize();
            best = best.min(cross_corr_cost(&p, &ctx));
        }
        assert!(
            reached <= best * 1.001 + 1e-15,
            "pgd {reached} vs sampled best {best}"
        );
    }

    #[test]
    fn power_scale_satisfies_the_budget_identity() {
        let mut rng = stream_rng(72, 0);
        let coupling = complex_gaussian_matrix(&mut rng, 3, 6, 1.0);
        let p = random_direction(6, &mut rng);
        let (eps, pb, sr2) = (0.37, 12.0, 2.5e-13);
        let omega = ris_power_scale(&p, &coupling, eps, pb, sr2);
        let lhs = (1.0 - eps) * pb * omega * reflected_trace(&p, &coupling) + sr2 * omega;
        assert!((lhs - eps * pb).abs() / (eps * pb) < 1e-12);
    }

    #[test]
    fn power_scale_edge_cases() {
        let coupling = CMatrix::identity(1, 1);
        let p = CVector::from_element(1, C64::new(1.0, 0.0));
        assert_eq!(ris_power_scale(&p, &coupling, 0.0, 12.0, 1e-13), 0.0);
        // tr = 1, sigma -> 0, eps = 0.5 gives omega = 1.
        let omega = ris_power_scale(&p, &coupling, 0.5, 12.0, 0.0);
        assert!((omega - 1.0).abs() < 1e-15);
    }

    #[test]
    fn quantization_snaps_to_nearest_grid_point() {
        let z = C64::from_polar(1.0, 0.4 * PI);
        let snapped = quantize_phases(&CVector::from_element(1, z), 1)[0];
        assert!(
            (snapped - C64::new(1.0, 0.0)).norm() < 1e-12,
            "got {snapped}"
        );

        let on_grid = C64::from_polar(2.0, PI);
        let kept = quantize_phases(&CVector::from_element(1, on_grid), 1)[0];
        assert!((kept - on_grid).norm() < 1e-12);
    }

    #[test]
    fn quantization_error_is_bounded_and_amplitude_preserving() {
        let mut rng = stream_rng(73, 0);
        for bits in [1u32, 2, 3, 4, 6] {
            let bound = PI / (1u64 << bits) as f64;
            let v = complex_gaussian_vector(&mut rng, 64, 1.0);
            let q = quantize_phases(&v, bits);
            for (orig, snap) in v.iter().zip(q.iter()) {
                assert!((orig.norm() - snap.norm()).abs() < 1e-12);
                let mut err = (orig.arg() - snap.arg()).abs();
                if err > PI {
                    err = 2.0 * PI - err;
                }
                assert!(err <= bound + 1e-12, "bits {bits}: error {err} > {bound}");
            }
        }
    }
}
