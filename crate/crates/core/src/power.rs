//! Max-min SINR power control by bisection over linear feasibility
//! solves.
//!
//! Every SINR in the pipeline fits the pattern
//! `gamma_k = eta_k a_k / (sum_j eta_j b_{j,k} + c_k + sigma_k^2)`,
//! whether the coefficients come from an instantaneous realization or
//! from the hardening bound. For a fixed target `t` the equal-SINR system
//! `(I - t A) eta = t v` (with `A[(k,j)] = b_{j,k} / a_k` and
//! `v_k = (c_k + sigma_k^2) / a_k`) has a positive solution exactly when
//! the target is achievable, and that solution is the componentwise-
//! minimal power vector; feasibility then reduces to positivity plus the
//! budget check, with no external solver involved.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SimError};

/// Coefficients of the generic downlink SINR for every UE.
#[derive(Debug, Clone)]
pub struct SinrCoefficients {
    /// Desired-signal gains `a_k > 0`.
    pub a: Vec<f64>,
    /// Interference couplings: `b[(j, k)]` multiplies `eta_j` in UE `k`'s
    /// denominator. The diagonal carries the beamforming-uncertainty term
    /// of the hardening bound and is zero under perfect CSI.
    pub b: DMatrix<f64>,
    /// Dynamic-noise terms (already scaled by the active-RIS flag; zero
    /// when passive).
    pub c: Vec<f64>,
    /// Receiver noise powers `sigma_k^2`, watts.
    pub noise: Vec<f64>,
    /// Squared precoder norms `||w_k||^2`.
    pub precoder_norms: Vec<f64>,
    /// Array power budget `(1 - eps) P_B`, watts.
    pub budget: f64,
}

impl SinrCoefficients {
    pub fn k_users(&self) -> usize {
        self.a.len()
    }

    /// SINR of every UE at the allocation `eta`.
    pub fn sinr(&self, eta: &[f64]) -> Vec<f64> {
        let k_users = self.k_users();
        (0..k_users)
            .map(|k| {
                let mut denom = self.c[k] + self.noise[k];
                for (j, &eta_j) in eta.iter().enumerate().take(k_users) {
                    denom += eta_j * self.b[(j, k)];
                }
                eta[k] * self.a[k] / denom
            })
            .collect()
    }

    /// Array power consumed by `eta`.
    pub fn budget_used(&self, eta: &[f64]) -> f64 {
        eta.iter()
            .zip(&self.precoder_norms)
            .map(|(e, n)| e * n)
            .sum()
    }

    /// Largest conceivable SINR: the best UE alone with the full budget
    /// and no interference or dynamic noise.
    pub fn sinr_upper_bound(&self) -> f64 {
        (0..self.k_users())
            .map(|k| self.a[k] * self.budget / (self.precoder_norms[k] * self.noise[k]))
            .fold(0.0, f64::max)
    }
}

/// Outcome of the max-min search.
#[derive(Debug, Clone)]
pub struct PowerAllocation {
    /// Power per UE, watts; meets the budget with equality.
    pub eta: Vec<f64>,
    /// Bisection value: every UE's SINR is at least `t_star`.
    pub t_star: f64,
    /// Whether a feasible allocation was found at all.
    pub feasible: bool,
    /// `(target, feasible)` per bisection step, for monotonicity checks.
    pub trace: Vec<(f64, bool)>,
}

/// Try to support the SINR target `t` for every UE.
///
/// Returns the minimal-power solution scaled up to budget equality (the
/// scaling can only raise SINRs), or `None` when the target cannot be
/// met inside the budget.
pub fn feasibility_check(t: f64, coeffs: &SinrCoefficients) -> Result<Option<Vec<f64>>> {
    let k_users = coeffs.k_users();
    for (k, &a) in coeffs.a.iter().enumerate() {
        if a <= 0.0 {
            return Err(SimError::IllPosed(k));
        }
    }
    if t <= 0.0 {
        // Any positive allocation works; hand back an equal split on the
        // budget boundary.
        let eta: Vec<f64> = (0..k_users)
            .map(|k| coeffs.budget / (k_users as f64 * coeffs.precoder_norms[k]))
            .collect();
        return Ok(Some(eta));
    }

    let mut system = DMatrix::<f64>::identity(k_users, k_users);
    let mut rhs = DVector::<f64>::zeros(k_users);
    for k in 0..k_users {
        for j in 0..k_users {
            system[(k, j)] -= t * coeffs.b[(j, k)] / coeffs.a[k];
        }
        rhs[k] = t * (coeffs.c[k] + coeffs.noise[k]) / coeffs.a[k];
    }
    let lu = system.lu();
    let Some(eta) = lu.solve(&rhs) else {
        return Ok(None);
    };
    if eta.iter().any(|&e| !e.is_finite() || e <= 0.0) {
        return Ok(None);
    }
    let eta: Vec<f64> = eta.iter().copied().collect();
    let used = coeffs.budget_used(&eta);
    if used > coeffs.budget * (1.0 + 1e-12) {
        return Ok(None);
    }
    // Positive equality solutions hit the target exactly; this guards the
    // numerics, not the algebra.
    let ok = coeffs.sinr(&eta).iter().all(|&g| g >= t * (1.0 - 1e-9));
    if !ok {
        return Ok(None);
    }
    let scale = coeffs.budget / used;
    Ok(Some(eta.iter().map(|e| e * scale).collect()))
}

/// Bisection search for the max-min SINR (with the feasibility program
/// above as the inner step).
///
/// `t_max` is expanded by doubling until infeasible, the bracket is
/// narrowed below `nu` and then refined further so the returned
/// allocation is balanced to solver precision.
pub fn maxmin_bisection(
    coeffs: &SinrCoefficients,
    t_min: f64,
    t_max: Option<f64>,
    nu: f64,
) -> Result<PowerAllocation> {
    let mut trace = Vec::new();
    let mut lo = t_min.max(0.0);
    let Some(mut best) = feasibility_check(lo, coeffs)? else {
        trace.push((lo, false));
        return Err(SimError::Infeasible(lo));
    };
    trace.push((lo, true));

    let mut hi = t_max
        .unwrap_or_else(|| coeffs.sinr_upper_bound() * 2.0)
        .max(lo + 1.0);
    for _ in 0..200 {
        match feasibility_check(hi, coeffs)? {
            Some(eta) => {
                trace.push((hi, true));
                lo = hi;
                best = eta;
                hi *= 2.0;
            }
            None => {
                trace.push((hi, false));
                break;
            }
        }
    }

    let mut iters = 0usize;
    while hi - lo >= nu || (hi - lo) > 1e-13 * hi {
        iters += 1;
        if iters > 300 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        match feasibility_check(mid, coeffs)? {
            Some(eta) => {
                trace.push((mid, true));
                lo = mid;
                best = eta;
            }
            None => {
                trace.push((mid, false));
                hi = mid;
            }
        }
    }

    Ok(PowerAllocation {
        eta: best,
        t_star: lo,
        feasible: true,
        trace,
    })
}
