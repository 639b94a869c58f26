mod common;

use std::f64::consts::SQRT_2;

use common::*;
use pelsim::loads::{
    disconnect_supervisor, load_resistance, DcLinkState, PelSpec, RECONNECT_HYSTERESIS_PU,
    R_FLOOR_PU,
};
use proptest::prelude::*;

#[test]
fn full_interruption_follows_constant_power_discharge() {
    let d = discharge_oracle();
    assert!(d.compared > 100);
    assert!(d.max_err <= tol::DISCHARGE, "{}", d.max_err);
}

#[test]
fn switched_off_load_draws_nothing() {
    let spec = preset("PEL-2");
    let off = DcLinkState { connected: false, ..DcLinkState::connected(300.0) };
    assert!(load_resistance(300.0, &spec, &off).is_infinite());
    assert!(load_resistance(0.5 * spec.u_off_volts(), &spec, &DcLinkState::connected(0.0)).is_infinite());
}

#[test]
fn supervisor_hysteresis_and_delay() {
    let mut spec = preset("PEL-2");
    spec.reconnect_delay = Some(0.05);
    let u_off = spec.u_off_volts();
    let band = RECONNECT_HYSTERESIS_PU * SQRT_2 * spec.u_base;
    let s = disconnect_supervisor(DcLinkState::connected(u_off), u_off - 1.0, &spec, 1.0);
    assert!(!s.connected);
    assert_eq!(s.t_disconnect, Some(1.0));
    // Inside the band: stays off.
    assert!(!disconnect_supervisor(s, u_off + 0.5 * band, &spec, 2.0).connected);
    // Above the band but too early.
    assert!(!disconnect_supervisor(s, u_off + 2.0 * band, &spec, 1.01).connected);
    assert!(disconnect_supervisor(s, u_off + 2.0 * band, &spec, 1.06).connected);
}

#[test]
fn loads_without_threshold_never_switch_off() {
    let spec = preset("PEL-1");
    assert!(disconnect_supervisor(DcLinkState::connected(1.0), 0.0, &spec, 0.0).connected);
}

proptest! {
    #[test]
    fn resistance_draws_rated_power_above_its_floors(label in 0usize..4, k in 0.7f64..1.6) {
        let spec = PelSpec::preset(PelSpec::PRESETS[label]).unwrap();
        let u = k * SQRT_2 * spec.u_base;
        let r = load_resistance(u, &spec, &DcLinkState::connected(u));
        prop_assume!(r.is_finite());
        let floor = spec.r_l_min.unwrap_or(0.0).max(R_FLOOR_PU * spec.z_base());
        if r > floor {
            prop_assert!(rel(u * u / r, spec.p_r) < 1e-12);
        } else {
            prop_assert!(u * u / r <= spec.p_r * (1.0 + 1e-12));
        }
    }

    #[test]
    fn resistance_is_monotone_in_voltage(label in 0usize..4, a in 0.7f64..1.5, d in 0.0f64..0.5) {
        let spec = PelSpec::preset(PelSpec::PRESETS[label]).unwrap();
        let s = DcLinkState::connected(0.0);
        let u = a * SQRT_2 * spec.u_base;
        prop_assert!(load_resistance(u + d * spec.u_base, &spec, &s) >= load_resistance(u, &spec, &s));
    }
}
