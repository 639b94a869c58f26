//! Component sizing and per-unit conversions for rectifier front ends.
//!
//! Capacitor sizing follows the hold-up requirement, passive inductor sizing uses a
//! per-unit reactance on the load's own base, and the boost inductor of an active PFC
//! stage is bounded below by the allowed current ripple.

use std::f64::consts::{PI, SQRT_2};

use crate::error::{invalid, Result};

/// Hold-up based sizing of the DC-link capacitor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HoldupSizingInput {
    /// Rated power (W).
    pub p_r: f64,
    /// Hold-up time (s).
    pub t_hold: f64,
    /// Efficiency (fraction).
    pub eta: f64,
    /// Nominal phase RMS voltage (V).
    pub u_nom: f64,
    /// Minimum RMS voltage for normal operation (V).
    pub u_min: f64,
}

impl HoldupSizingInput {
    pub fn with_power(p_r: f64) -> Self {
        Self {
            p_r,
            ..Self::default()
        }
    }
}

impl Default for HoldupSizingInput {
    fn default() -> Self {
        Self {
            p_r: 0.0,
            t_hold: 23e-3,
            eta: 0.95,
            u_nom: 230.0,
            u_min: 150.0,
        }
    }
}

/// Inputs for the boost inductor of an active PFC stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoostSizingInput {
    pub u_nom: f64,
    pub duty: f64,
    pub f_s: f64,
    pub p_r: f64,
    pub eta: f64,
    /// Minimum RMS input voltage (V).
    pub u_g_min: f64,
    pub pf: f64,
}

impl Default for BoostSizingInput {
    /// Worst-case duty 0.5 and universal-input design assumptions.
    fn default() -> Self {
        Self {
            u_nom: 230.0,
            duty: 0.5,
            f_s: 165e3,
            p_r: 360.0,
            eta: 0.95,
            u_g_min: 85.0,
            pf: 0.99,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridImpedanceTarget {
    pub p_r: f64,
    pub u_base: f64,
    /// Impedance magnitude in per unit of `u_base^2 / p_r`.
    pub z_pu: f64,
    pub x_over_r: f64,
}

impl GridImpedanceTarget {
    /// 0.1 pu with X/R = 0.4 on a 230 V base.
    pub fn low_voltage(p_r: f64) -> Self {
        Self {
            p_r,
            u_base: 230.0,
            z_pu: 0.1,
            x_over_r: 0.4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridImpedance {
    pub r: f64,
    pub l: f64,
    pub x: f64,
}

fn check_positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(field, format!("must be positive, got {v}")))
    }
}

/// `C_d = 2 P_r t_hold / (eta (U_nom^2 - U_min^2))`.
pub fn size_cd_holdup(input: &HoldupSizingInput) -> Result<f64> {
    if !(input.u_min < input.u_nom) {
        return Err(invalid("u_min", "must be below u_nom"));
    }
    if !(input.eta > 0.0 && input.eta <= 1.0) {
        return Err(invalid("eta", "must lie in (0, 1]"));
    }
    check_positive("t_hold", input.t_hold)?;
    if input.p_r < 0.0 {
        return Err(invalid("p_r", "must not be negative"));
    }
    Ok(2.0 * input.p_r * input.t_hold
        / (input.eta * (input.u_nom * input.u_nom - input.u_min * input.u_min)))
}

/// Capacitance whose reactance at `f` equals `x_cd_pu` on the base `u_nom^2 / p_r`.
pub fn cd_from_pu(x_cd_pu: f64, p_r: f64, u_nom: f64, f: f64) -> f64 {
    p_r / (x_cd_pu * 2.0 * PI * f * u_nom * u_nom)
}

pub fn pu_from_cd(c_d: f64, p_r: f64, u_nom: f64, f: f64) -> f64 {
    p_r / (c_d * 2.0 * PI * f * u_nom * u_nom)
}

/// Inductance whose reactance at `f` equals `x_ld_pu` on the base `u_nom^2 / p_r`.
pub fn ld_from_pu(x_ld_pu: f64, p_r: f64, u_nom: f64, f: f64) -> f64 {
    x_ld_pu * u_nom * u_nom / (2.0 * PI * f * p_r)
}

pub fn pu_from_ld(l_d: f64, p_r: f64, u_nom: f64, f: f64) -> f64 {
    2.0 * PI * f * l_d * p_r / (u_nom * u_nom)
}

/// Peak-to-peak inductor ripple taken as 40 % of the maximum input current.
pub fn ripple_current(p_r: f64, eta: f64, u_g_min: f64, pf: f64) -> f64 {
    0.4 * SQRT_2 * p_r / (eta * u_g_min * pf)
}

/// Smallest admissible boost inductance `U_nom D (1 - D) / (I_ripple f_s)`.
pub fn boost_ld_min(u_nom: f64, duty: f64, i_ripple: f64, f_s: f64) -> Result<f64> {
    if !(i_ripple > 0.0) {
        return Err(invalid("i_ripple", "must be positive"));
    }
    check_positive("f_s", f_s)?;
    if !(0.0..=1.0).contains(&duty) {
        return Err(invalid("duty", "must lie in [0, 1]"));
    }
    Ok(u_nom * duty * (1.0 - duty) / (i_ripple * f_s))
}

/// Boost inductance bound evaluated from a full design input.
pub fn boost_ld_for(input: &BoostSizingInput) -> Result<f64> {
    if !(input.duty > 0.0 && input.duty < 1.0) {
        return Err(invalid("duty", "must lie strictly between 0 and 1"));
    }
    if !(input.pf > 0.0 && input.pf <= 1.0) {
        return Err(invalid("pf", "must lie in (0, 1]"));
    }
    for (f, v) in [
        ("u_nom", input.u_nom),
        ("f_s", input.f_s),
        ("p_r", input.p_r),
        ("eta", input.eta),
        ("u_g_min", input.u_g_min),
    ] {
        check_positive(f, v)?;
    }
    let ripple = ripple_current(input.p_r, input.eta, input.u_g_min, input.pf);
    boost_ld_min(input.u_nom, input.duty, ripple, input.f_s)
}

/// Series R-L realizing a target impedance magnitude and X/R ratio.
pub fn solve_grid_impedance(target: &GridImpedanceTarget, f: f64) -> Result<GridImpedance> {
    check_positive("z_pu", target.z_pu)?;
    check_positive("x_over_r", target.x_over_r)?;
    check_positive("p_r", target.p_r)?;
    check_positive("u_base", target.u_base)?;
    let z = target.z_pu * target.u_base * target.u_base / target.p_r;
    let r = z / (1.0 + target.x_over_r * target.x_over_r).sqrt();
    let x = r * target.x_over_r;
    Ok(GridImpedance {
        r,
        l: x / (2.0 * PI * f),
        x,
    })
}

/// Harmonic-emission class bookkeeping for single-phase equipment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HarmonicClass {
    /// Below 75 W: no harmonic limits, no PFC needed.
    Unregulated,
    /// 75 W to 600 W.
    ClassD,
    /// Above the class D range; the applicable limits depend on the application.
    Other,
}

pub fn classify(p_r: f64) -> HarmonicClass {
    if p_r < 75.0 {
        HarmonicClass::Unregulated
    } else if p_r <= 600.0 {
        HarmonicClass::ClassD
    } else {
        HarmonicClass::Other
    }
}
