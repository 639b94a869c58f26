//! Power-electronic load models: rectifier front ends with none, passive or active
//! PFC, a DC link feeding a constant-power resistance, and switch-off supervision.

mod apfc;
mod build;
mod cpl;

pub use apfc::{apfc_update, ApfcOutput, ApfcState};
pub use build::{build_pel, delta_bank, PelHandle};
pub use cpl::{constant_power_load, CplHandle, COLLAPSE_HOLD, COLLAPSE_VOLTAGE_PU, SHUNT_Q_PU};

use std::f64::consts::SQRT_2;

use crate::error::{invalid, Result};

pub const NOMINAL_FREQUENCY: f64 = 50.0;

/// Lowest load resistance as a fraction of the load's impedance base. Keeps
/// `u_d^2 / p_r` away from zero when the link is fully discharged.
pub const R_FLOOR_PU: f64 = 1e-3;

/// Margin above the switch-off threshold that the link must regain before the load
/// reconnects, in per unit of the peak base voltage. Without it the load chatters
/// on and off while a slowly recharging link crosses the threshold.
pub const RECONNECT_HYSTERESIS_PU: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PfcKind {
    None,
    Passive1ph,
    Active1ph,
    Passive3ph,
}

impl PfcKind {
    pub fn phases(self) -> usize {
        if self == PfcKind::Passive3ph {
            3
        } else {
            1
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PfcKind::None => "none",
            PfcKind::Passive1ph => "passive-1ph",
            PfcKind::Active1ph => "active-1ph",
            PfcKind::Passive3ph => "passive-3ph",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "none" => PfcKind::None,
            "passive-1ph" | "passive" => PfcKind::Passive1ph,
            "active-1ph" | "active" => PfcKind::Active1ph,
            "passive-3ph" => PfcKind::Passive3ph,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ApfcMode {
    /// Boost switch replaced by its switching-cycle average.
    Averaged,
    /// Real switch under hysteresis current control.
    Switched,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApfcParams {
    /// Reciprocal of the grid peak voltage (1/V).
    pub k_pu: f64,
    /// Time constant of the lag filtering the measured grid voltage (s).
    pub t_f: f64,
    /// Proportional gain, per unit of rated peak input current per volt of error.
    pub k_p: f64,
    /// Integral gain, per unit of rated peak input current per volt-second.
    pub k_i: f64,
    pub f_s: f64,
    pub u_d_ref: f64,
    pub mode: ApfcMode,
    /// Upper limit of the voltage controller output, per unit of rated peak input current.
    pub i_ref_max_pu: f64,
    /// Hysteresis half-band, per unit of rated peak input current.
    pub band_pu: f64,
    /// Time constant of the averaged current tracking (s).
    pub tau_track: f64,
}

impl ApfcParams {
    pub fn pel3() -> Self {
        Self {
            k_pu: 1.0 / (230.0 * SQRT_2),
            t_f: 0.5e-3,
            k_p: 0.08,
            k_i: 0.15,
            f_s: 165e3,
            u_d_ref: 390.0,
            mode: ApfcMode::Averaged,
            i_ref_max_pu: 3.0,
            band_pu: 0.1,
            tau_track: 25e-6,
        }
    }

    pub fn validate(&self, u_base: f64) -> Result<()> {
        if !(self.t_f > 0.0) {
            return Err(invalid("controller.t_f", "must be positive"));
        }
        if !(self.f_s > 0.0) {
            return Err(invalid("controller.f_s", "must be positive"));
        }
        if !(self.u_d_ref > SQRT_2 * u_base) {
            return Err(invalid(
                "controller.u_d_ref",
                format!(
                    "{} V is not above the grid peak voltage {:.2} V",
                    self.u_d_ref,
                    SQRT_2 * u_base
                ),
            ));
        }
        for (f, v) in [
            ("controller.k_pu", self.k_pu),
            ("controller.i_ref_max_pu", self.i_ref_max_pu),
            ("controller.band_pu", self.band_pu),
            ("controller.tau_track", self.tau_track),
        ] {
            if !(v > 0.0) {
                return Err(invalid(f, "must be positive"));
            }
        }
        if !(self.k_p >= 0.0 && self.k_i >= 0.0) {
            return Err(invalid("controller.k_p", "gains must not be negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PelSpec {
    pub label: String,
    pub pfc_kind: PfcKind,
    pub p_r: f64,
    /// RMS base voltage across the load's terminals (phase voltage for three-phase loads).
    pub u_base: f64,
    pub x_cd_pu: f64,
    pub x_ld_pu: Option<f64>,
    /// Switch-off threshold in per unit of `sqrt(2) u_base`.
    pub u_off: f64,
    pub r_l_min: Option<f64>,
    pub reconnect_delay: Option<f64>,
    pub controller: Option<ApfcParams>,
}

impl PelSpec {
    /// The four fitted load models by label (`PEL-1` to `PEL-4`).
    pub fn preset(label: &str) -> Option<Self> {
        let base = |kind, p_r, x_cd_pu, x_ld_pu, u_off| PelSpec {
            label: label.to_string(),
            pfc_kind: kind,
            p_r,
            u_base: 230.0,
            x_cd_pu,
            x_ld_pu,
            u_off,
            r_l_min: None,
            reconnect_delay: None,
            controller: None,
        };
        Some(match label {
            "PEL-1" => base(PfcKind::None, 60.0, 0.058, None, 0.0),
            "PEL-2" => base(PfcKind::Passive1ph, 230.0, 0.06, Some(0.034), 0.65),
            "PEL-3" => PelSpec {
                controller: Some(ApfcParams::pel3()),
                ..base(PfcKind::Active1ph, 360.0, 0.1, Some(0.0007), 0.1)
            },
            "PEL-4" => PelSpec {
                r_l_min: Some(63.11),
                ..base(PfcKind::Passive3ph, 3000.0, 0.361, Some(0.0125), 0.0)
            },
            _ => return None,
        })
    }

    pub const PRESETS: [&'static str; 4] = ["PEL-1", "PEL-2", "PEL-3", "PEL-4"];

    pub fn validate(&self) -> Result<()> {
        if !(self.p_r > 0.0 && self.p_r.is_finite()) {
            return Err(invalid("p_r", "must be positive"));
        }
        if !(self.u_base > 0.0) {
            return Err(invalid("u_base", "must be positive"));
        }
        if !(self.x_cd_pu > 0.0) {
            return Err(invalid("x_cd_pu", "must be positive"));
        }
        if !(0.0..=1.0).contains(&self.u_off) {
            return Err(invalid("u_off", "must lie in [0, 1]"));
        }
        if let Some(r) = self.r_l_min {
            if !(r > 0.0) {
                return Err(invalid("r_l_min", "must be positive when present"));
            }
        }
        if let Some(d) = self.reconnect_delay {
            if !(d >= 0.0) {
                return Err(invalid("reconnect_delay", "must not be negative"));
            }
        }
        let needs_ld = self.pfc_kind != PfcKind::None;
        match (needs_ld, self.x_ld_pu) {
            (true, None) => {
                return Err(invalid(
                    "x_ld_pu",
                    format!("required for pfc kind {}", self.pfc_kind.name()),
                ))
            }
            (false, Some(_)) => return Err(invalid("x_ld_pu", "not used without PFC")),
            (true, Some(x)) if !(x > 0.0) => return Err(invalid("x_ld_pu", "must be positive")),
            _ => {}
        }
        match (self.pfc_kind == PfcKind::Active1ph, &self.controller) {
            (true, None) => return Err(invalid("controller", "required for active PFC")),
            (false, Some(_)) => {
                return Err(invalid("controller", "only used with active PFC"))
            }
            (true, Some(c)) => c.validate(self.u_base)?,
            _ => {}
        }
        Ok(())
    }

    pub fn z_base(&self) -> f64 {
        self.u_base * self.u_base / self.p_r
    }

    /// Switch-off voltage in volts.
    pub fn u_off_volts(&self) -> f64 {
        self.u_off * SQRT_2 * self.u_base
    }

    pub fn c_d(&self) -> f64 {
        crate::sizing::cd_from_pu(self.x_cd_pu, self.p_r, self.u_base, NOMINAL_FREQUENCY)
    }

    pub fn l_d(&self) -> Option<f64> {
        self.x_ld_pu
            .map(|x| crate::sizing::ld_from_pu(x, self.p_r, self.u_base, NOMINAL_FREQUENCY))
    }

    /// Peak input current at rated power and base voltage.
    pub fn rated_peak_current(&self) -> f64 {
        SQRT_2 * self.p_r / self.u_base
    }

    /// DC-link voltage the model starts from.
    pub fn initial_dc_voltage(&self) -> f64 {
        match (self.pfc_kind, &self.controller) {
            (PfcKind::Active1ph, Some(c)) => c.u_d_ref,
            (PfcKind::Passive3ph, _) => SQRT_2 * 3f64.sqrt() * self.u_base,
            _ => SQRT_2 * self.u_base,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DcLinkState {
    pub u_d: f64,
    pub connected: bool,
    pub t_disconnect: Option<f64>,
}

impl DcLinkState {
    pub fn connected(u_d: f64) -> Self {
        Self {
            u_d,
            connected: true,
            t_disconnect: None,
        }
    }
}

/// Equivalent resistance of the downstream converter; infinite when switched off.
pub fn load_resistance(u_d: f64, spec: &PelSpec, state: &DcLinkState) -> f64 {
    if !state.connected || u_d < spec.u_off_volts() {
        return f64::INFINITY;
    }
    let r = u_d * u_d / spec.p_r;
    r.max(spec.r_l_min.unwrap_or(0.0))
        .max(R_FLOOR_PU * spec.z_base())
}

/// Switch-off and reconnection logic, evaluated once per step.
pub fn disconnect_supervisor(state: DcLinkState, u_d: f64, spec: &PelSpec, t: f64) -> DcLinkState {
    let u_off = spec.u_off_volts();
    let mut next = DcLinkState { u_d, ..state };
    if spec.u_off <= 0.0 {
        next.connected = true;
        return next;
    }
    if state.connected {
        if u_d < u_off {
            next.connected = false;
            next.t_disconnect = Some(t);
        }
    } else if u_d >= u_off + RECONNECT_HYSTERESIS_PU * SQRT_2 * spec.u_base {
        let delay = spec.reconnect_delay.unwrap_or(0.0);
        let since = state.t_disconnect.map_or(f64::INFINITY, |t0| t - t0);
        if since >= delay {
            next.connected = true;
        }
    }
    next
}

/// Rescales a model to another rated power and base voltage with unchanged per-unit behavior.
pub fn scale_to_power(spec: &PelSpec, p_target: f64, u_target: f64) -> Result<PelSpec> {
    if !(p_target > 0.0) {
        return Err(invalid("p_target", "must be positive"));
    }
    if !(u_target > 0.0) {
        return Err(invalid("u_target", "must be positive"));
    }
    let ku = u_target / spec.u_base;
    let kz = (u_target * u_target / p_target) / spec.z_base();
    let mut out = spec.clone();
    out.p_r = p_target;
    out.u_base = u_target;
    out.r_l_min = spec.r_l_min.map(|r| r * kz);
    out.controller = spec.controller.map(|c| ApfcParams {
        k_pu: c.k_pu / ku,
        k_p: c.k_p / ku,
        k_i: c.k_i / ku,
        u_d_ref: c.u_d_ref * ku,
        ..c
    });
    Ok(out)
}
