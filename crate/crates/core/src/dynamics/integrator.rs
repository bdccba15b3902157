//! Dormand–Prince 5(4) with PI step-size control.

use serde::{Deserialize, Serialize};

use super::{rhs_inf_norm, NetworkModel, NetworkState, POSITIVITY_SLACK};
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub t_max: f64,
    /// Stop once `‖rhs‖∞` falls to this value.
    pub steady_state_tol: f64,
    pub max_steps: usize,
    /// Record every `sample_stride`-th accepted step; `0` keeps only the endpoints.
    pub sample_stride: usize,
    /// Upper bound on the step size, if any.
    pub max_step: Option<f64>,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            abs_tol: 1e-10,
            t_max: 5000.0,
            steady_state_tol: 1e-9,
            max_steps: 5_000_000,
            sample_stride: 100,
            max_step: None,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("rel_tol", self.rel_tol),
            ("abs_tol", self.abs_tol),
            ("t_max", self.t_max),
            ("steady_state_tol", self.steady_state_tol),
        ];
        for (name, x) in positive {
            if !(x > 0.0 && x.is_finite()) {
                return Err(invalid(format!(
                    "{name} must be positive and finite, got {x}"
                )));
            }
        }
        if let Some(h) = self.max_step {
            if h.is_nan() || h <= 0.0 {
                return Err(invalid(format!("max_step must be positive, got {h}")));
            }
        }
        if self.max_steps == 0 {
            return Err(invalid("max_steps must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationResult {
    pub final_state: NetworkState,
    pub converged: bool,
    pub convergence_time: Option<f64>,
    /// `‖rhs‖∞` at the final state.
    pub final_rhs_norm: f64,
    pub trajectory: Vec<NetworkState>,
    /// Set when an accepted state had an entry below `−10·abs_tol`.
    pub positivity_violation: bool,
    /// Entries in `[−10·abs_tol, 0)` reset to zero.
    pub clamped_entries: usize,
    pub min_entry: f64,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

// Dormand–Prince tableau; the models are autonomous so the nodes c_i are not needed.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

// PI controller (Hairer & Wanner constants).
const SAFETY: f64 = 0.9;
const BETA: f64 = 0.04;
const EXPO: f64 = 0.2 - 0.75 * BETA;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

struct Rhs<'a, M> {
    model: &'a M,
    n: usize,
}

impl<M: NetworkModel> Rhs<'_, M> {
    fn eval(&self, y: &[f64], dy: &mut [f64]) {
        let (u, v) = y.split_at(self.n);
        let (du, dv) = dy.split_at_mut(self.n);
        self.model.rhs(u, v, du, dv);
    }
}

/// Fraction of `h·steady_state_tol` allowed as local error per step.
pub const STEADY_STATE_ERROR_FRACTION: f64 = 0.1;

fn rms_norm(x: &[f64], y: &[f64], cfg: &IntegratorConfig) -> f64 {
    rms_norm_capped(x, y, cfg, f64::INFINITY)
}

fn rms_norm_capped(x: &[f64], y: &[f64], cfg: &IntegratorConfig, cap: f64) -> f64 {
    let s: f64 = x
        .iter()
        .zip(y)
        .map(|(e, y)| {
            let sc = (cfg.abs_tol + cfg.rel_tol * y.abs()).min(cap);
            (e / sc) * (e / sc)
        })
        .sum();
    (s / x.len() as f64).sqrt()
}

fn initial_step<M: NetworkModel>(f: &Rhs<M>, y: &[f64], dy: &[f64], cfg: &IntegratorConfig) -> f64 {
    let d0 = rms_norm(y, y, cfg);
    let d1 = rms_norm(dy, y, cfg);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    let y1: Vec<f64> = y.iter().zip(dy).map(|(y, d)| y + h0 * d).collect();
    let mut dy1 = vec![0.0; y.len()];
    f.eval(&y1, &mut dy1);
    let diff: Vec<f64> = dy1.iter().zip(dy).map(|(a, b)| a - b).collect();
    let d2 = rms_norm(&diff, y, cfg) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1)
}

fn to_state(t: f64, y: &[f64], n: usize) -> NetworkState {
    NetworkState {
        t,
        u: y[..n].to_vec(),
        v: y[n..].to_vec(),
    }
}

/// Integrate from `init` until steady state, `t_max` or `max_steps`.
pub fn integrate(
    model: &impl NetworkModel,
    init: &NetworkState,
    cfg: &IntegratorConfig,
) -> Result<SimulationResult> {
    integrate_observed(model, init, cfg, |_| {})
}

/// As [`integrate`], calling `observer` with the initial state and after every accepted step.
pub fn integrate_observed(
    model: &impl NetworkModel,
    init: &NetworkState,
    cfg: &IntegratorConfig,
    mut observer: impl FnMut(&NetworkState),
) -> Result<SimulationResult> {
    cfg.validate()?;
    let n = model.n_nodes();
    for len in [init.u.len(), init.v.len()] {
        if len != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: len,
            });
        }
    }
    if init.u.iter().chain(&init.v).any(|x| !x.is_finite()) {
        return Err(Error::NonFiniteState { t: init.t });
    }

    let f = Rhs { model, n };
    let dim = 2 * n;
    let mut t = init.t;
    let t_end = init.t + cfg.t_max;
    let mut y: Vec<f64> = init.u.iter().chain(&init.v).copied().collect();
    let mut k1 = vec![0.0; dim];
    f.eval(&y, &mut k1);

    let floor = -POSITIVITY_SLACK * cfg.abs_tol;
    let mut result = SimulationResult {
        final_state: init.clone(),
        converged: false,
        convergence_time: None,
        final_rhs_norm: 0.0,
        trajectory: vec![init.clone()],
        positivity_violation: init.min_entry() < floor,
        clamped_entries: 0,
        min_entry: init.min_entry(),
        accepted_steps: 0,
        rejected_steps: 0,
    };
    observer(init);

    let mut rhs_norm = rhs_inf_norm(&k1[..n], &k1[n..]);
    if rhs_norm <= cfg.steady_state_tol {
        result.converged = true;
        result.convergence_time = Some(t);
        result.final_rhs_norm = rhs_norm;
        return Ok(result);
    }

    let (mut k2, mut k3, mut k4, mut k5, mut k6, mut k7) = (
        vec![0.0; dim],
        vec![0.0; dim],
        vec![0.0; dim],
        vec![0.0; dim],
        vec![0.0; dim],
        vec![0.0; dim],
    );
    let mut tmp = vec![0.0; dim];
    let mut y_new = vec![0.0; dim];
    let mut err_vec = vec![0.0; dim];
    let mut scale_ref = vec![0.0; dim];

    let mut h = initial_step(&f, &y, &k1, cfg);
    if let Some(hmax) = cfg.max_step {
        h = h.min(hmax);
    }
    let mut err_old: f64 = 1e-4;
    let mut last_rejected = false;
    let mut since_sample = 0usize;

    while t < t_end && result.accepted_steps < cfg.max_steps {
        if let Some(hmax) = cfg.max_step {
            h = h.min(hmax);
        }
        if t + h > t_end {
            h = t_end - t;
        }
        if h < 1e-14 * t.abs().max(1.0) {
            return Err(Error::StepSizeUnderflow { t, h });
        }

        for i in 0..dim {
            tmp[i] = y[i] + h * A21 * k1[i];
        }
        f.eval(&tmp, &mut k2);
        for i in 0..dim {
            tmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        f.eval(&tmp, &mut k3);
        for i in 0..dim {
            tmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        f.eval(&tmp, &mut k4);
        for i in 0..dim {
            tmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        f.eval(&tmp, &mut k5);
        for i in 0..dim {
            tmp[i] =
                y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        f.eval(&tmp, &mut k6);
        for i in 0..dim {
            y_new[i] =
                y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        f.eval(&y_new, &mut k7);
        for i in 0..dim {
            err_vec[i] =
                h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            scale_ref[i] = y[i].abs().max(y_new[i].abs());
        }
        // Without the cap, stiff components near the stability limit of the step keep
        // ‖rhs‖∞ hovering around tolerance/h and the steady-state test never fires.
        let cap = (STEADY_STATE_ERROR_FRACTION * h * cfg.steady_state_tol).max(1e-15);
        let err = rms_norm_capped(&err_vec, &scale_ref, cfg, cap);

        if !err.is_finite() {
            if y_new.iter().chain(&k7).any(|x| !x.is_finite()) && h <= 1e-10 * t.abs().max(1.0) {
                return Err(Error::NonFiniteState { t });
            }
            h *= FAC_MIN;
            last_rejected = true;
            result.rejected_steps += 1;
            continue;
        }

        let fac11 = err.powf(EXPO);
        if err <= 1.0 {
            let mut fac = fac11 / err_old.powf(BETA);
            fac = (fac / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
            let mut h_new = h / fac;
            if last_rejected {
                h_new = h_new.min(h);
            }
            err_old = err.max(1e-4);
            last_rejected = false;

            t += h;
            std::mem::swap(&mut y, &mut y_new);
            std::mem::swap(&mut k1, &mut k7);
            result.accepted_steps += 1;

            let mut clamped = false;
            for x in y.iter_mut() {
                if *x < 0.0 {
                    result.min_entry = result.min_entry.min(*x);
                    if *x >= floor {
                        *x = 0.0;
                        result.clamped_entries += 1;
                        clamped = true;
                    } else {
                        result.positivity_violation = true;
                    }
                }
            }
            if clamped {
                f.eval(&y, &mut k1);
            }
            if y.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFiniteState { t });
            }

            let state = to_state(t, &y, n);
            observer(&state);
            since_sample += 1;
            if cfg.sample_stride > 0 && since_sample >= cfg.sample_stride {
                result.trajectory.push(state);
                since_sample = 0;
            }

            rhs_norm = rhs_inf_norm(&k1[..n], &k1[n..]);
            if rhs_norm <= cfg.steady_state_tol {
                result.converged = true;
                result.convergence_time = Some(t);
                break;
            }
            h = h_new;
        } else {
            h /= (fac11 / SAFETY).min(1.0 / FAC_MIN);
            last_rejected = true;
            result.rejected_steps += 1;
        }
    }

    let final_state = to_state(t, &y, n);
    if result.trajectory.last().map(|s| s.t) != Some(t) {
        result.trajectory.push(final_state.clone());
    }
    result.min_entry = result.min_entry.min(final_state.min_entry());
    result.final_state = final_state;
    result.final_rhs_norm = rhs_norm;
    Ok(result)
}
