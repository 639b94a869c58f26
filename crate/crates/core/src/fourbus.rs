//! Four-bus short-term voltage-stability network: stiff source, step-up transformer,
//! two parallel lines, step-down transformer and an aggregate load. A three-phase fault
//! in the middle of the upper line is cleared by tripping that line.
//!
//! All quantities are referred to the transmission voltage; transformers appear as
//! their short-circuit reactances.

use std::f64::consts::{PI, SQRT_2};
use std::sync::Arc;

use num_complex::Complex64;
use serde::Deserialize;

use crate::analysis::{fundamental_rms, samples_per_period, FundamentalSeries};
use crate::circuit::{
    self, BranchId, Commands, Controller, Diagnostic, Dc, ElementKind, Netlist, NodeId,
    ProbeKind, Sine, SolverConfig, StepView, WaveformSet,
};
use crate::error::{invalid, Result};
use crate::grid::{series_impedance_branch as series_rl, PHASE_SHIFTS};
use crate::loads::{
    build_pel, constant_power_load, delta_bank, scale_to_power, PelSpec, PfcKind,
};
use crate::scenario::config::{config_err, parse_toml, LoadSection};
use crate::scenario::load_fundamentals;

/// Breaker and fault-switch leakage (S).
const SWITCH_G_OFF: f64 = 1e-9;
/// Closed breaker resistance (ohms).
const BREAKER_R_ON: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub enum FourBusLoad {
    /// Three copies of a single-phase model in delta, each carrying a third of `p_load`.
    DeltaBank(PelSpec),
    /// One three-phase model carrying `p_load`.
    ThreePhase(PelSpec),
    /// Constant-power load with the given reactive-to-active ratio.
    ConstantPower { q_ratio: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FourBusSpec {
    pub s_base: f64,
    /// Line-to-line RMS voltage (V).
    pub u_base: f64,
    pub frequency: f64,
    /// Source voltage (pu of `u_base`).
    pub u_source_pu: f64,
    pub line_r: f64,
    pub line_x_l: f64,
    /// Capacitive reactance of each half of the line shunt (ohms).
    pub line_x_c_half: f64,
    pub t1_rating: f64,
    pub t1_u_k: f64,
    pub t2_rating: f64,
    pub t2_u_k: f64,
    pub r_fault: f64,
    /// Fault position along the upper line (fraction from the sending end).
    pub fault_location: f64,
    /// Time at which the fault is applied (s after the start of recording).
    pub t_fault: f64,
    /// Fault duration until the upper line is tripped (s).
    pub clearing_time: f64,
    pub p_load: f64,
    pub load: FourBusLoad,
    pub solver: SolverConfig,
}

impl FourBusSpec {
    /// Test system with the first scenario's load and fault resistance.
    pub fn standard(load: FourBusLoad) -> Self {
        let dt = if fourbus_needs_fine_step(&load) { 1e-6 } else { 10e-6 };
        Self {
            s_base: 100e6,
            u_base: 380e3,
            frequency: 50.0,
            u_source_pu: 1.0,
            line_r: 9.6,
            line_x_l: 64.0,
            line_x_c_half: 1334.63,
            t1_rating: 1.2e9,
            t1_u_k: 0.15,
            t2_rating: 600e6,
            t2_u_k: 0.15,
            r_fault: 17.0,
            fault_location: 0.5,
            t_fault: 0.1,
            clearing_time: 0.1,
            p_load: 500e6,
            load,
            solver: SolverConfig {
                dt,
                t_end: 1.5,
                settle: 0.5,
                decimation: (100e-6 / dt).round().max(1.0) as usize,
                ..SolverConfig::default()
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (f, v) in [
            ("s_base", self.s_base),
            ("u_base", self.u_base),
            ("frequency", self.frequency),
            ("u_source_pu", self.u_source_pu),
            ("line_x_l", self.line_x_l),
            ("line_x_c_half", self.line_x_c_half),
            ("t1_rating", self.t1_rating),
            ("t1_u_k", self.t1_u_k),
            ("t2_rating", self.t2_rating),
            ("t2_u_k", self.t2_u_k),
            ("r_fault", self.r_fault),
            ("p_load", self.p_load),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(f, "must be positive"));
            }
        }
        if !(self.line_r >= 0.0) {
            return Err(invalid("line_r", "must not be negative"));
        }
        if !(self.fault_location > 0.0 && self.fault_location < 1.0) {
            return Err(invalid("fault_location", "must lie strictly between 0 and 1"));
        }
        if !(self.clearing_time > 0.0) {
            return Err(invalid("clearing_time", "must be positive"));
        }
        if !(self.t_fault >= 0.0) {
            return Err(invalid("t_fault", "must not be negative"));
        }
        match &self.load {
            FourBusLoad::DeltaBank(s) => {
                s.validate()?;
                if s.pfc_kind.phases() != 1 {
                    return Err(invalid("load", "a delta bank needs a single-phase model"));
                }
            }
            FourBusLoad::ThreePhase(s) => {
                s.validate()?;
                if s.pfc_kind != PfcKind::Passive3ph {
                    return Err(invalid("load", "a three-phase load needs a three-phase model"));
                }
            }
            FourBusLoad::ConstantPower { q_ratio } => {
                if !q_ratio.is_finite() {
                    return Err(invalid("load.q_ratio", "must be finite"));
                }
            }
        }
        self.solver.validate()
    }

    fn omega(&self) -> f64 {
        2.0 * PI * self.frequency
    }

    pub fn x_t1(&self) -> f64 {
        self.t1_u_k * self.u_base * self.u_base / self.t1_rating
    }

    pub fn x_t2(&self) -> f64 {
        self.t2_u_k * self.u_base * self.u_base / self.t2_rating
    }

    pub fn t_clear(&self) -> f64 {
        self.t_fault + self.clearing_time
    }

    /// Load model actually placed in the network (scaled to `p_load`).
    pub fn scaled_load(&self) -> Result<Option<PelSpec>> {
        Ok(match &self.load {
            FourBusLoad::DeltaBank(s) => Some(scale_to_power(s, self.p_load / 3.0, self.u_base)?),
            FourBusLoad::ThreePhase(s) => {
                Some(scale_to_power(s, self.p_load, self.u_base / 3f64.sqrt())?)
            }
            FourBusLoad::ConstantPower { .. } => None,
        })
    }

    /// Fault on, then line trip, as an ordered schedule.
    pub fn schedule(&self) -> EventSchedule {
        EventSchedule {
            events: vec![
                Event {
                    t: self.t_fault,
                    action: Action::ApplyFault {
                        r_fault: self.r_fault,
                    },
                },
                Event {
                    t: self.t_clear(),
                    action: Action::TripLine,
                },
            ],
        }
    }
}

fn fourbus_needs_fine_step(load: &FourBusLoad) -> bool {
    matches!(load, FourBusLoad::DeltaBank(s) | FourBusLoad::ThreePhase(s) if s.controller.is_some())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Action {
    ApplyFault { r_fault: f64 },
    /// Opens both breakers of the faulted line and removes the fault.
    TripLine,
    /// Closes the line breakers again.
    Reconnect,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub t: f64,
    pub action: Action,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EventSchedule {
    pub events: Vec<Event>,
}

impl EventSchedule {
    pub fn validate(&self) -> Result<()> {
        for w in self.events.windows(2) {
            if !(w[1].t > w[0].t) {
                return Err(invalid(
                    "events",
                    format!("times must increase strictly ({} after {})", w[1].t, w[0].t),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Clone)]
struct Breakers {
    schedule: Vec<Event>,
    next: usize,
    fault: Vec<BranchId>,
    line: Vec<BranchId>,
    log: Vec<(f64, String)>,
}

impl Controller for Breakers {
    fn update(&mut self, view: &StepView<'_>, cmd: &mut Commands<'_>) {
        // Switch states written here act on the solve for t + dt.
        while let Some(ev) = self.schedule.get(self.next) {
            if view.t + view.dt < ev.t - 0.5 * view.dt {
                break;
            }
            match ev.action {
                Action::ApplyFault { .. } => {
                    for &b in &self.fault {
                        cmd.set_switch(b, true);
                    }
                }
                Action::TripLine => {
                    for &b in self.fault.iter().chain(&self.line) {
                        cmd.set_switch(b, false);
                    }
                }
                Action::Reconnect => {
                    for &b in &self.line {
                        cmd.set_switch(b, true);
                    }
                }
            }
            self.log.push((ev.t, format!("{:?}", ev.action)));
            self.next += 1;
        }
    }

    fn internal(&self, key: &str) -> Option<f64> {
        match key {
            "events_done" => Some(self.next as f64),
            _ => None,
        }
    }

    fn diagnostics(&self) -> Vec<Diagnostic> {
        self.log
            .iter()
            .map(|(t, m)| Diagnostic {
                source: "schedule".into(),
                t: *t,
                message: m.clone(),
            })
            .collect()
    }

    fn clone_box(&self) -> Box<dyn Controller> {
        Box::new(self.clone())
    }
}

/// Handles of the elements the study inspects after building.
#[derive(Debug, Clone)]
pub struct FourBusNet {
    pub netlist: Netlist,
    pub schedule: EventSchedule,
    /// Controller index of the constant-power load, if any.
    pub cpl: Option<usize>,
    pub fault_switches: Vec<BranchId>,
    pub line_breakers: Vec<BranchId>,
}

pub fn build_fourbus(spec: &FourBusSpec) -> Result<FourBusNet> {
    spec.validate()?;
    let schedule = spec.schedule();
    schedule.validate()?;
    if spec.p_load > max_transfer(spec, true)?.p_max {
        log::warn!(
            "load {:.0} MW exceeds the pre-fault maximum transfer; expect collapse",
            spec.p_load / 1e6
        );
    }
    let mut net = Netlist::new();
    let w = spec.omega();
    let u_phase = spec.u_base / 3f64.sqrt();
    let c_half = 1.0 / (w * spec.line_x_c_half);
    let l_line = spec.line_x_l / w;
    let loc = spec.fault_location;
    let tags = ["a", "b", "c"];

    let mut fault = Vec::new();
    let mut line = Vec::new();
    let mut bus4 = Vec::new();
    let mut sense = Vec::new();
    for (k, tag) in tags.iter().enumerate() {
        let n = |net: &mut Netlist, s: &str| net.node(&format!("{s}_{tag}"));
        let (g, b2, b3, b4s, b4) = (
            n(&mut net, "gen"),
            n(&mut net, "bus2"),
            n(&mut net, "bus3"),
            n(&mut net, "bus4s"),
            n(&mut net, "bus4"),
        );
        net.add(
            &format!("src_{tag}"),
            g,
            NodeId::GROUND,
            ElementKind::VoltageSource {
                waveform: Arc::new(Sine {
                    amplitude: SQRT_2 * u_phase * spec.u_source_pu,
                    frequency: spec.frequency,
                    phase: PHASE_SHIFTS[k],
                }),
            },
        )?;
        net.inductor(&format!("t1_{tag}"), g, b2, spec.x_t1() / w)?;

        // Lower line, always in service.
        series_rl(&mut net, &format!("line2_{tag}"), b2, b3, spec.line_r, l_line)?;
        net.capacitor(&format!("line2_{tag}.c1"), b2, NodeId::GROUND, c_half, 0.0)?;
        net.capacitor(&format!("line2_{tag}.c2"), b3, NodeId::GROUND, c_half, 0.0)?;

        // Upper line with breakers at both ends and the fault point in between.
        let (s1, mid, s2) = (
            n(&mut net, "line1s"),
            n(&mut net, "line1m"),
            n(&mut net, "line1r"),
        );
        let breaker = ElementKind::Switch {
            r_on: BREAKER_R_ON,
            g_off: SWITCH_G_OFF,
            closed: true,
        };
        line.push(net.add(&format!("cb1_{tag}"), b2, s1, breaker.clone())?);
        line.push(net.add(&format!("cb2_{tag}"), s2, b3, breaker)?);
        series_rl(&mut net, &format!("line1a_{tag}"), s1, mid, loc * spec.line_r, loc * l_line)?;
        series_rl(
            &mut net,
            &format!("line1b_{tag}"),
            mid,
            s2,
            (1.0 - loc) * spec.line_r,
            (1.0 - loc) * l_line,
        )?;
        net.capacitor(&format!("line1_{tag}.c1"), s1, NodeId::GROUND, c_half, 0.0)?;
        net.capacitor(&format!("line1_{tag}.c2"), s2, NodeId::GROUND, c_half, 0.0)?;
        fault.push(net.add(
            &format!("fault_{tag}"),
            mid,
            NodeId::GROUND,
            ElementKind::Switch {
                r_on: spec.r_fault,
                g_off: SWITCH_G_OFF.min(1e-7 / spec.r_fault),
                closed: false,
            },
        )?);

        net.inductor(&format!("t2_{tag}"), b3, b4s, spec.x_t2() / w)?;
        sense.push(net.add(
            &format!("sense_{tag}"),
            b4s,
            b4,
            ElementKind::VoltageSource {
                waveform: Arc::new(Dc(0.0)),
            },
        )?);
        bus4.push(b4);
    }

    let mut cpl = None;
    match (&spec.load, spec.scaled_load()?) {
        (FourBusLoad::DeltaBank(_), Some(s)) => {
            delta_bank(&mut net, "load", &s, [bus4[0], bus4[1], bus4[2]])?;
        }
        (FourBusLoad::ThreePhase(_), Some(s)) => {
            build_pel(&mut net, "load", &s, &bus4)?;
        }
        (FourBusLoad::ConstantPower { q_ratio }, _) => {
            let h = constant_power_load(
                &mut net,
                "load",
                spec.p_load,
                q_ratio * spec.p_load,
                &bus4,
                u_phase,
                spec.frequency,
            )?;
            cpl = Some(h.controller);
        }
        _ => unreachable!("scaled_load matches the load kind"),
    }
    for (k, tag) in tags.iter().enumerate() {
        net.probe(format!("u_load_{tag}"), ProbeKind::NodeVoltage(bus4[k]));
    }
    for (k, tag) in tags.iter().enumerate() {
        net.probe(format!("i_load_{tag}"), ProbeKind::BranchCurrent(sense[k]));
    }
    if let Some(c) = cpl {
        net.probe(
            "collapsed",
            ProbeKind::Internal {
                controller: c,
                key: "collapsed",
            },
        );
    }
    net.add_controller(Box::new(Breakers {
        schedule: schedule.events.clone(),
        next: 0,
        fault: fault.clone(),
        line: line.clone(),
        log: Vec::new(),
    }));
    Ok(FourBusNet {
        netlist: net,
        schedule,
        cpl,
        fault_switches: fault,
        line_breakers: line,
    })
}

/// Nose point of the load bus PV curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaxTransfer {
    /// Largest three-phase power a resistive load can draw (W).
    pub p_max: f64,
    /// Load-bus voltage at that point (pu).
    pub u_at_max: f64,
}

/// Load-bus voltage phasor (phase, V) for a per-phase load admittance, from the
/// positive-sequence equivalent of the network.
pub fn load_bus_voltage(spec: &FourBusSpec, both_lines: bool, y_load: Complex64) -> Complex64 {
    let j = Complex64::i();
    let e = Complex64::new(spec.u_source_pu * spec.u_base / 3f64.sqrt(), 0.0);
    let lines = if both_lines { 2.0 } else { 1.0 };
    let z_line = Complex64::new(spec.line_r, spec.line_x_l) / lines;
    let y_shunt = j * lines / spec.line_x_c_half;
    let y_t1 = 1.0 / (j * spec.x_t1());
    let y_t2 = 1.0 / (j * spec.x_t2());
    let y_line = 1.0 / z_line;
    // Nodal equations for buses 2, 3, 4.
    let mut a = [
        [y_t1 + y_shunt + y_line, -y_line, Complex64::new(0.0, 0.0)],
        [-y_line, y_line + y_shunt + y_t2, -y_t2],
        [Complex64::new(0.0, 0.0), -y_t2, y_t2 + y_load],
    ];
    let mut rhs = [y_t1 * e, Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)];
    // Gaussian elimination; the matrix is diagonally dominant for passive loads.
    for c in 0..3 {
        for r in c + 1..3 {
            let f = a[r][c] / a[c][c];
            for k in c..3 {
                a[r][k] = a[r][k] - f * a[c][k];
            }
            rhs[r] = rhs[r] - f * rhs[c];
        }
    }
    let mut x = [Complex64::new(0.0, 0.0); 3];
    for r in (0..3).rev() {
        let mut s = rhs[r];
        for k in r + 1..3 {
            s -= a[r][k] * x[k];
        }
        x[r] = s / a[r][r];
    }
    x[2]
}

/// Maximum power transfer to a resistive load, found by sweeping the load conductance.
pub fn max_transfer(spec: &FourBusSpec, both_lines: bool) -> Result<MaxTransfer> {
    let u_phase = spec.u_base / 3f64.sqrt();
    let g_ref = spec.s_base / (spec.u_base * spec.u_base);
    let power = |g: f64| {
        let v = load_bus_voltage(spec, both_lines, Complex64::new(g, 0.0));
        (3.0 * g * v.norm_sqr(), v.norm() / u_phase)
    };
    // Coarse logarithmic sweep, then two linear refinements around the best point.
    let scan = |best: &mut (f64, f64, f64), lo: f64, hi: f64, n: usize, log: bool| {
        for k in 0..=n {
            let s = k as f64 / n as f64;
            let g = if log { lo * (hi / lo).powf(s) } else { lo + (hi - lo) * s };
            let (p, u) = power(g);
            if p > best.0 {
                *best = (p, u, g);
            }
        }
    };
    let mut best = (0.0, 0.0, 0.0);
    scan(&mut best, 1e-3 * g_ref, 1e3 * g_ref, 4000, true);
    for _ in 0..2 {
        let g = best.2;
        scan(&mut best, 0.99 * g, 1.01 * g, 2000, false);
    }
    if !(best.0 > 0.0) {
        return Err(invalid("fourbus", "no power transfer found"));
    }
    Ok(MaxTransfer {
        p_max: best.0,
        u_at_max: best.1,
    })
}

#[derive(Debug, Clone)]
pub struct FourBusResult {
    pub waveforms: WaveformSet,
    pub fundamentals: FundamentalSeries,
    /// Mean fundamental RMS of the three phase voltages at the load bus (pu), on the
    /// time grid `fundamentals.t`.
    pub u_load_pu: Vec<f64>,
    pub collapsed: bool,
    pub diagnostics: Vec<Diagnostic>,
    pub t_clear: f64,
}

impl FourBusResult {
    /// Mean load-bus voltage over the last cycle before the fault (pu).
    pub fn u_pre_fault(&self, t_fault: f64, period: f64) -> f64 {
        mean_between(&self.fundamentals.t, &self.u_load_pu, t_fault - period, t_fault)
    }

    /// Time after clearing from which the load-bus voltage stays above `level` to the
    /// end of the run; `None` if it never settles there.
    pub fn voltage_recovery_time(&self, level: f64) -> Option<f64> {
        let t = &self.fundamentals.t;
        let last_low = t
            .iter()
            .zip(&self.u_load_pu)
            .rposition(|(&t, &u)| t >= self.t_clear && u <= level);
        match last_low {
            None => Some(0.0),
            Some(k) if k + 1 < t.len() => Some(t[k + 1] - self.t_clear),
            Some(_) => None,
        }
    }
}

fn mean_between(t: &[f64], x: &[f64], a: f64, b: f64) -> f64 {
    let (s, n) = t
        .iter()
        .zip(x)
        .filter(|(&t, _)| t >= a && t < b)
        .fold((0.0, 0usize), |(s, n), (_, &v)| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

pub fn run_fourbus(spec: &FourBusSpec) -> Result<FourBusResult> {
    let built = build_fourbus(spec)?;
    let out = circuit::run(built.netlist, spec.solver.clone())?;
    let w = out.waveforms;
    let fundamentals = load_fundamentals(&w, spec.frequency, spec.p_load)?;
    let fs = spec.solver.output_rate();
    let n = samples_per_period(spec.frequency, fs)?;
    let u_peak = SQRT_2 * spec.u_base / 3f64.sqrt();
    let phases: Vec<Vec<f64>> = ["a", "b", "c"]
        .iter()
        .map(|t| fundamental_rms(w.channel(&format!("u_load_{t}")).expect("probed"), n))
        .collect();
    let u_load_pu = (n - 1..w.len())
        .map(|k| phases.iter().map(|p| p[k]).sum::<f64>() / 3.0 * SQRT_2 / u_peak)
        .collect();
    let collapsed = w
        .channel("collapsed")
        .and_then(|c| c.last())
        .is_some_and(|&v| v > 0.5);
    Ok(FourBusResult {
        waveforms: w,
        fundamentals,
        u_load_pu,
        collapsed,
        diagnostics: out.diagnostics,
        t_clear: spec.t_clear(),
    })
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct NetworkSection {
    pub s_base: Option<f64>,
    pub u_base: Option<f64>,
    pub frequency: Option<f64>,
    pub u_source_pu: Option<f64>,
    pub line_r: Option<f64>,
    pub line_x_l: Option<f64>,
    pub line_x_c_half: Option<f64>,
    pub t1_rating: Option<f64>,
    pub t1_u_k: Option<f64>,
    pub t2_rating: Option<f64>,
    pub t2_u_k: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct FaultSection {
    pub r_fault: Option<f64>,
    pub location: Option<f64>,
    pub t_fault: Option<f64>,
    pub clearing_time: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct FourBusSolverSection {
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    pub settle: Option<f64>,
    pub decimation: Option<usize>,
}

/// `fourbus` configuration file.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FourBusFile {
    pub name: Option<String>,
    #[serde(default)]
    pub network: NetworkSection,
    #[serde(default)]
    pub fault: FaultSection,
    /// Total load power (W).
    pub p_load: f64,
    /// Load model; `kind` selects `delta_bank`, `pel` (three-phase model) or
    /// `constant_power` (then `q` is the reactive-to-active ratio).
    pub load: LoadSection,
    #[serde(default)]
    pub solver: FourBusSolverSection,
}

pub fn parse_fourbus(text: &str) -> Result<FourBusSpec> {
    let f: FourBusFile = parse_toml(text)?;
    let load = match f.load.kind.as_deref().unwrap_or("delta_bank") {
        "delta_bank" => FourBusLoad::DeltaBank(f.load.pel_spec()?),
        "pel" => FourBusLoad::ThreePhase(f.load.pel_spec()?),
        "constant_power" => {
            if f.load.p.is_some() {
                return Err(config_err("load.p", "use the top-level p_load"));
            }
            FourBusLoad::ConstantPower {
                q_ratio: f.load.q.unwrap_or(0.0),
            }
        }
        o => {
            return Err(config_err(
                "load.kind",
                format!("unknown kind `{o}` (delta_bank, pel, constant_power)"),
            ))
        }
    };
    let mut s = FourBusSpec::standard(load);
    s.p_load = f.p_load;
    let n = &f.network;
    macro_rules! set {
        ($src:expr => $($f:ident),*) => {$(
            if let Some(v) = $src.$f { s.$f = v; }
        )*};
    }
    set!(n => s_base, u_base, frequency, u_source_pu, line_r, line_x_l, line_x_c_half,
        t1_rating, t1_u_k, t2_rating, t2_u_k);
    set!(f.fault => r_fault, t_fault, clearing_time);
    if let Some(v) = f.fault.location {
        s.fault_location = v;
    }
    let sv = &f.solver;
    if let Some(v) = sv.dt {
        s.solver.dt = v;
        if sv.decimation.is_none() {
            s.solver.decimation = (100e-6 / v).round().max(1.0) as usize;
        }
    }
    if let Some(v) = sv.t_end {
        s.solver.t_end = v;
    }
    if let Some(v) = sv.settle {
        s.solver.settle = v;
    }
    if let Some(v) = sv.decimation {
        s.solver.decimation = v;
    }
    s.validate().map_err(|e| match e {
        crate::error::Error::InvalidSpec { field, reason } => config_err(field, reason),
        o => o,
    })?;
    Ok(s)
}
