mod common;

use std::f64::consts::SQRT_2;
use std::sync::Arc;

use common::*;
use num_complex::Complex64;
use pelsim::analysis::fundamental_pq;
use pelsim::circuit::{self, Netlist, NodeId, ProbeKind, Sine, SolverConfig};
use pelsim::fourbus::*;
use pelsim::loads::{constant_power_load, SHUNT_Q_PU};

const CPL: FourBusLoad = FourBusLoad::ConstantPower { q_ratio: 0.0 };

fn short(mut spec: FourBusSpec, t_end: f64) -> FourBusSpec {
    spec.solver.t_end = t_end;
    spec
}

#[test]
fn fault_and_trip_follow_the_schedule() {
    let spec = short(FourBusSpec::standard(CPL), 0.35);
    let mut built = build_fourbus(&spec).unwrap();
    built.netlist.probe("i_fault", ProbeKind::BranchCurrent(built.fault_switches[0]));
    built.netlist.probe("i_cb", ProbeKind::BranchCurrent(built.line_breakers[0]));
    let out = circuit::run(built.netlist, spec.solver.clone()).unwrap();
    let w = &out.waveforms;
    let (i_f, i_cb) = (w.channel("i_fault").unwrap(), w.channel("i_cb").unwrap());
    let i_rated = SQRT_2 * spec.p_load / (3f64.sqrt() * spec.u_base);
    let peak = |lo: f64, hi: f64, x: &[f64]| {
        w.time
            .iter()
            .zip(x)
            .filter(|(&t, _)| t > lo && t < hi)
            .map(|(_, v)| v.abs())
            .fold(0.0, f64::max)
    };
    let eps = 1e-4 * i_rated;
    assert!(peak(0.0, spec.t_fault - 1e-4, i_f) < eps);
    assert!(peak(spec.t_fault + 1e-3, spec.t_clear(), i_f) > 0.5 * i_rated);
    assert!(peak(spec.t_clear() + 1e-3, 0.35, i_f) < eps);
    assert!(peak(0.0, spec.t_fault, i_cb) > 0.1 * i_rated);
    assert!(peak(spec.t_clear() + 1e-3, 0.35, i_cb) < eps);
}

#[test]
fn schedule_must_be_ordered() {
    let bad = EventSchedule {
        events: vec![
            Event { t: 0.2, action: Action::TripLine },
            Event { t: 0.1, action: Action::ApplyFault { r_fault: 1.0 } },
        ],
    };
    assert!(bad.validate().is_err());
    assert!(FourBusSpec::standard(CPL).schedule().validate().is_ok());
}

#[test]
fn pre_fault_voltage_matches_the_phasor_solution() {
    let spec = short(FourBusSpec::standard(CPL), 0.1);
    let r = run_fourbus(&spec).unwrap();
    let u_phase = spec.u_base / 3f64.sqrt();
    let w = 2.0 * std::f64::consts::PI * spec.frequency;
    let c_shunt = SHUNT_Q_PU * spec.p_load / 3.0 / (w * u_phase * u_phase);
    let mut v = u_phase;
    for _ in 0..200 {
        let y = Complex64::new(spec.p_load / 3.0 / (v * v), w * c_shunt);
        v = load_bus_voltage(&spec, true, y).norm();
    }
    let emt = r.u_pre_fault(spec.t_fault, 0.02);
    assert!(rel(emt, v / u_phase) < 2e-3, "{emt} vs {}", v / u_phase);
}

#[test]
fn nose_point_is_lower_with_one_line() {
    let spec = FourBusSpec::standard(CPL);
    let both = max_transfer(&spec, true).unwrap();
    let one = max_transfer(&spec, false).unwrap();
    assert!(one.p_max < both.p_max);
    assert!((0.5..1.0).contains(&one.u_at_max));
}

#[test]
fn cpl_beyond_post_fault_limit_collapses() {
    let (_, r) = fourbus_case(CPL, CPL_FACTOR);
    assert!(r.collapsed);
    assert!(recovers(&r).is_none());
    assert!(r.diagnostics.iter().any(|d| d.message.contains("collapse")));
}

fn cpl_bench(amplitude: f64, p: f64, q: f64) -> (f64, f64, f64) {
    let mut net = Netlist::new();
    let n = net.node("n");
    net.voltage_source(
        "V",
        n,
        NodeId::GROUND,
        Arc::new(Sine { amplitude, frequency: 50.0, phase: 0.0 }),
    )
    .unwrap();
    let h = constant_power_load(&mut net, "cpl", p, q, &[n], 230.0, 50.0).unwrap();
    net.probe("u", ProbeKind::NodeVoltage(n));
    net.probe("i", ProbeKind::BranchCurrent(h.sense[0]));
    let cfg = SolverConfig { dt: 10e-6, t_end: 0.1, ..SolverConfig::default() };
    let w = circuit::run(net, cfg).unwrap().waveforms;
    let f = fundamental_pq(&w.time, w.channel("u").unwrap(), w.channel("i").unwrap(), 50.0, 1e5, p)
        .unwrap();
    let (pp, qq) = last_period_pq(&f, 0.02);
    (pp, qq, pp.hypot(qq) / (amplitude / SQRT_2))
}

#[test]
fn halving_the_voltage_doubles_the_cpl_current() {
    let (p, q) = (1000.0, 300.0);
    let u = SQRT_2 * 230.0;
    let (p1, q1, i1) = cpl_bench(u, p, q);
    let (p2, q2, i2) = cpl_bench(0.5 * u, p, q);
    let s_ref = p.hypot(q);
    for (pp, qq, k) in [(p1, q1, 1.0), (p2, q2, 0.25)] {
        assert!(rel(pp, p) < 1e-3, "P {pp}");
        let q_expected = q - SHUNT_Q_PU * s_ref * k;
        assert!((qq - q_expected).abs() < 1e-3 * s_ref, "Q {qq} vs {q_expected}");
    }
    let ratio = i2 / i1;
    let expected = 2.0 * p.hypot(q - 0.25 * SHUNT_Q_PU * s_ref) / p.hypot(q - SHUNT_Q_PU * s_ref);
    assert!(rel(ratio, expected) < 1e-3, "{ratio} vs {expected}");
}

#[test]
fn config_file_round_trip() {
    let spec = parse_fourbus(
        "p_load = 600e6\n[fault]\nr_fault = 5.0\nclearing_time = 0.08\n[load]\nkind = \"constant_power\"\nq = 0.1\n",
    )
    .unwrap();
    assert_eq!(spec.p_load, 600e6);
    assert_eq!(spec.r_fault, 5.0);
    assert_eq!(spec.load, FourBusLoad::ConstantPower { q_ratio: 0.1 });
    assert!(parse_fourbus("p_load = 1.0\n[load]\nkind = \"wind\"\n").is_err());
    assert!(parse_fourbus("p_load = 1.0\n[load]\nkind = \"constant_power\"\np = 3.0\n").is_err());
}
