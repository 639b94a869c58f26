use super::{ApfcMode, ApfcParams};

/// Integrator, filter and switch state of the active PFC controller.
#[derive(Debug, Clone, PartialEq)]
pub struct ApfcState {
    /// Integral part of the voltage controller output (pu).
    pub integral: f64,
    /// Lag-filtered rectified grid voltage (V).
    pub u_g_filtered: f64,
    pub switch_on: bool,
    /// Boost inductance (H).
    pub l_d: f64,
    /// Rated peak input current (A), the base of the controller's per-unit output.
    pub i_base: f64,
}

impl ApfcState {
    /// Starts at the rated operating point (controller output 1 pu, zero error).
    pub fn new(l_d: f64, i_base: f64) -> Self {
        Self {
            integral: 1.0,
            u_g_filtered: 0.0,
            switch_on: false,
            l_d,
            i_base,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApfcOutput {
    pub i_ref: f64,
    /// Voltage controller output (pu).
    pub pi: f64,
    /// Duty cycle in averaged mode.
    pub duty: Option<f64>,
    /// Switch command in switched mode.
    pub switch_on: Option<bool>,
}

pub const MAX_DUTY: f64 = 0.97;

/// One controller sample: PI on the DC-link voltage, current reference shaped by the
/// filtered rectified grid voltage, then either a duty cycle or a hysteresis command.
pub fn apfc_update(
    params: &ApfcParams,
    u_g: f64,
    u_d: f64,
    i_d: f64,
    dt: f64,
    state: &mut ApfcState,
) -> ApfcOutput {
    let u_abs = u_g.abs();
    let alpha = 1.0 - (-dt / params.t_f).exp();
    state.u_g_filtered += alpha * (u_abs - state.u_g_filtered);

    let e = params.u_d_ref - u_d;
    let unclamped = params.k_p * e + state.integral;
    let winding_up = (unclamped >= params.i_ref_max_pu && e > 0.0) || (unclamped <= 0.0 && e < 0.0);
    if !winding_up {
        state.integral += params.k_i * e * dt;
    }
    let pi = (params.k_p * e + state.integral).clamp(0.0, params.i_ref_max_pu);
    let i_ref = pi * state.i_base * params.k_pu * state.u_g_filtered;

    match params.mode {
        ApfcMode::Averaged => {
            let duty = if u_d > 1e-3 * params.u_d_ref {
                let v_needed = u_abs - state.l_d * (i_ref - i_d) / params.tau_track;
                (1.0 - v_needed / u_d).clamp(0.0, MAX_DUTY)
            } else {
                0.0
            };
            ApfcOutput {
                i_ref,
                pi,
                duty: Some(duty),
                switch_on: None,
            }
        }
        ApfcMode::Switched => {
            let band = params.band_pu * state.i_base;
            if i_d < i_ref - band {
                state.switch_on = true;
            } else if i_d > i_ref + band {
                state.switch_on = false;
            }
            if i_ref <= 0.0 {
                state.switch_on = false;
            }
            ApfcOutput {
                i_ref,
                pi,
                duty: None,
                switch_on: Some(state.switch_on),
            }
        }
    }
}
