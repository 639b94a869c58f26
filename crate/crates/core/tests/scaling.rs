mod common;

use common::*;
use pelsim::analysis::compare_series;
use pelsim::loads::{scale_to_power, PelSpec};
use proptest::prelude::*;

#[test]
fn megawatt_copy_of_pel1_matches_in_per_unit() {
    let (a, b) = scaling_pair("PEL-1");
    let c = compare_series(&a.fundamentals, &b.fundamentals).unwrap();
    assert!(c.rmse_p <= tol::SCALING_RMS && c.rmse_q <= tol::SCALING_RMS, "{c:?}");
}

#[test]
fn nonpositive_targets_are_rejected() {
    assert!(scale_to_power(&preset("PEL-1"), 0.0, 230.0).is_err());
    assert!(scale_to_power(&preset("PEL-1"), 1.0, -1.0).is_err());
}

proptest! {
    #[test]
    fn per_unit_parameters_survive_scaling(
        label in 0usize..4,
        p in 1.0f64..1e9,
        u in 100.0f64..4e5,
    ) {
        let spec = PelSpec::preset(PelSpec::PRESETS[label]).unwrap();
        let s = scale_to_power(&spec, p, u).unwrap();
        s.validate().unwrap();
        prop_assert_eq!(s.x_cd_pu, spec.x_cd_pu);
        prop_assert_eq!(s.u_off, spec.u_off);
        let kz = s.z_base() / spec.z_base();
        if let (Some(a), Some(b)) = (spec.r_l_min, s.r_l_min) {
            prop_assert!(rel(b / kz, a) < 1e-12);
        }
        prop_assert!(rel(s.c_d() * kz, spec.c_d()) < 1e-12);
        prop_assert!(rel(s.initial_dc_voltage() / u, spec.initial_dc_voltage() / spec.u_base) < 1e-12);
        let back = scale_to_power(&s, spec.p_r, spec.u_base).unwrap();
        prop_assert!(rel(back.c_d(), spec.c_d()) < 1e-9);
    }
}
