mod common;

use common::*;
use pelsim::analysis::ReactiveSign;
use pelsim::scenario::simulate;

#[test]
fn steady_state_power_and_reactive_sign() {
    for (label, sign) in EXPECTED_Q {
        let r = steady(label);
        let (p, q) = last_period_pq(&r.fundamentals, 0.02);
        assert!(rel(p, preset(label).p_r) <= tol::STEADY_P, "{label}: P {p}");
        let got = if q < 0.0 { ReactiveSign::Capacitive } else { ReactiveSign::Inductive };
        assert_eq!(got, sign, "{label}: Q {q}");
        if label == "PEL-3" {
            assert!(p / p.hypot(q) >= tol::PEL3_PF);
        }
    }
}

#[test]
fn uncontrolled_rectifier_recharge_peak() {
    let r = simulate(&bench("PEL-1", 0.6, T_FAULT)).unwrap();
    let m = r.metrics.unwrap();
    assert!(m.restored);
    assert!((tol::PEAK_BAND.0..=tol::PEAK_BAND.1).contains(&m.p_peak), "{}", m.p_peak);
    assert!(m.t_recover.is_some());
}

#[test]
fn interruption_leaves_pel1_without_power() {
    let m = simulate(&bench("PEL-1", 1.0, T_FAULT)).unwrap().metrics.unwrap();
    assert!(!m.restored);
    assert!(m.dip_depth > 0.9);
}

#[test]
fn passive_pfc_switches_off_in_deep_sags() {
    let shallow = simulate(&bench("PEL-2", 0.2, T_FAULT)).unwrap().metrics.unwrap();
    let deep = simulate(&bench("PEL-2", 0.6, T_FAULT)).unwrap().metrics.unwrap();
    assert!(shallow.disconnects.is_empty());
    assert!(!deep.disconnects.is_empty());
}

#[test]
fn every_partial_sag_dips_then_peaks() {
    for du in [0.2, 0.4, 0.6, 0.8] {
        let m = simulate(&bench("PEL-1", du, T_FAULT)).unwrap().metrics.unwrap();
        assert!(m.dip_depth > 0.0, "du {du}");
        assert!(m.p_peak > 1.0, "du {du}: {}", m.p_peak);
        if m.restored {
            assert!(m.p_peak >= m.p_intermediate);
        }
    }
}

#[test]
fn fault_duration_only_matters_after_the_shorter_fault() {
    let a = simulate(&bench("PEL-1", 0.6, 0.1)).unwrap();
    let b = simulate(&bench("PEL-1", 0.6, 0.16)).unwrap();
    let t_split = pelsim::grid::SagProfile::default().t_start + 0.1;
    let k = a.waveforms.time.partition_point(|&t| t <= t_split);
    for name in ["u_load", "i_load", "u_d"] {
        let (x, y) = (a.waveforms.channel(name).unwrap(), b.waveforms.channel(name).unwrap());
        assert!(x[..k] == y[..k], "{name} differs before {t_split} s");
    }
    let (ma, mb) = (a.metrics.unwrap(), b.metrics.unwrap());
    assert!(ma.restored && mb.restored);
    assert!(rel(mb.p_peak, ma.p_peak) < 0.2, "{} vs {}", ma.p_peak, mb.p_peak);
}
