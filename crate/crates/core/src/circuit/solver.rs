use super::control::{Commands, Controller, Diagnostic, StepView};
use super::linalg::DenseLu;
use super::{BranchElement, BranchId, ElementKind, Netlist, NodeId, Probe, ProbeKind, SolverConfig, WaveformSet};
use crate::error::{Error, Result};

/// Step fraction used to pin capacitor voltages and inductor currents in the initial solve.
/// Small enough to pin firmly, large enough that off-state conductances survive rounding.
const INIT_DT_FRACTION: f64 = 1e-3;
/// Diode-iteration passes that flip every inconsistent device before falling back to
/// flipping one device per pass.
const BULK_FLIP_PASSES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Method {
    Trapezoidal,
    BackwardEuler,
    /// Backward Euler with a vanishing step: capacitors act as voltage sources and
    /// inductors as current sources at their initial values.
    Initial,
}

/// Running energy accounts since the start of recording (J).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EnergyLedger {
    /// Energy delivered by independent voltage sources.
    pub source_in: f64,
    /// Energy dissipated in resistors, diodes, switches and variable resistors.
    pub dissipated: f64,
    /// Energy absorbed by controlled current sources and transformers.
    pub controlled: f64,
    pub stored_start: f64,
    pub stored_now: f64,
}

impl EnergyLedger {
    pub fn residual(&self) -> f64 {
        self.source_in - self.dissipated - self.controlled - (self.stored_now - self.stored_start)
    }

    /// Residual relative to the energy delivered by the sources.
    pub fn relative_residual(&self) -> f64 {
        let scale = self.source_in.abs().max(self.dissipated.abs()).max(f64::MIN_POSITIVE);
        self.residual().abs() / scale
    }
}

/// Snapshot of the solver state at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub time: f64,
    /// Indexed by node; entry 0 is ground.
    pub node_voltages: Vec<f64>,
    pub inductor_currents: Vec<(BranchId, f64)>,
    pub capacitor_voltages: Vec<(BranchId, f64)>,
    /// Conduction state of every diode and switch.
    pub conduction: Vec<(BranchId, bool)>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub waveforms: WaveformSet,
    pub diagnostics: Vec<Diagnostic>,
    pub energy: EnergyLedger,
    /// Largest number of solves needed by any step.
    pub max_iterations: usize,
}

/// A netlist discretized for fixed-step modified nodal analysis.
pub struct DiscretizedSystem {
    node_names: Vec<String>,
    branches: Vec<BranchElement>,
    probes: Vec<Probe>,
    controllers: Vec<Box<dyn Controller>>,
    config: SolverConfig,
    dim: usize,
    /// Extra MNA unknown per branch (voltage sources and transformers).
    extra: Vec<Option<usize>>,
    diodes: Vec<usize>,

    values: Vec<f64>,
    prev_values: Vec<f64>,
    diode_on: Vec<bool>,
    hist_v: Vec<f64>,
    hist_i: Vec<f64>,
    node_v: Vec<f64>,
    power: Vec<f64>,

    step_index: usize,
    be_next: bool,

    a: Vec<f64>,
    a_factored: Vec<f64>,
    have_lu: bool,
    lu: DenseLu,
    rhs: Vec<f64>,
    x: Vec<f64>,
    scratch_v: Vec<f64>,
    scratch_i: Vec<f64>,

    energy: EnergyLedger,
    recording: bool,
    max_iterations: usize,
}

impl DiscretizedSystem {
    /// Builds the MNA structure and computes a consistent initial solution.
    pub fn assemble(netlist: Netlist, config: SolverConfig) -> Result<Self> {
        config.validate()?;
        let parts = netlist.into_parts();
        check_connectivity(&parts.node_names, &parts.branches)?;
        for p in &parts.probes {
            if let ProbeKind::Internal { controller, .. } = p.kind {
                if controller >= parts.controllers.len() {
                    return Err(Error::InvalidNetlist(format!(
                        "probe `{}` references unknown controller #{controller}",
                        p.name
                    )));
                }
            }
        }

        let n_nodes = parts.node_names.len() - 1;
        let mut dim = n_nodes;
        let mut extra = Vec::with_capacity(parts.branches.len());
        let mut diodes = Vec::new();
        let mut values = Vec::with_capacity(parts.branches.len());
        for (k, b) in parts.branches.iter().enumerate() {
            match &b.kind {
                ElementKind::VoltageSource { .. } | ElementKind::IdealTransformer { .. } => {
                    extra.push(Some(dim));
                    dim += 1;
                }
                _ => extra.push(None),
            }
            if matches!(b.kind, ElementKind::Diode { .. }) {
                diodes.push(k);
            }
            values.push(match &b.kind {
                ElementKind::Switch { closed, .. } => {
                    if *closed {
                        1.0
                    } else {
                        0.0
                    }
                }
                ElementKind::CurrentSource { amps } => *amps,
                ElementKind::VariableResistor { ohms, .. } => *ohms,
                ElementKind::IdealTransformer { ratio, .. } => *ratio,
                ElementKind::VoltageSource { .. } => 1.0,
                _ => 0.0,
            });
        }
        let nb = parts.branches.len();
        let mut hist_v = vec![0.0; nb];
        let mut hist_i = vec![0.0; nb];
        for (k, b) in parts.branches.iter().enumerate() {
            match b.kind {
                ElementKind::Capacitor {
                    initial_voltage, ..
                } => hist_v[k] = initial_voltage,
                ElementKind::Inductor {
                    initial_current, ..
                } => hist_i[k] = initial_current,
                _ => {}
            }
        }

        let mut sys = Self {
            node_names: parts.node_names,
            branches: parts.branches,
            probes: parts.probes,
            controllers: parts.controllers,
            dim,
            extra,
            diodes,
            prev_values: values.clone(),
            values,
            diode_on: vec![false; nb],
            hist_v,
            hist_i,
            node_v: vec![0.0; n_nodes + 1],
            power: vec![0.0; nb],
            step_index: 0,
            be_next: true,
            a: vec![0.0; dim * dim],
            a_factored: vec![f64::NAN; dim * dim],
            have_lu: false,
            lu: DenseLu::new(dim),
            rhs: vec![0.0; dim],
            x: vec![0.0; dim],
            scratch_v: vec![0.0; nb],
            scratch_i: vec![0.0; nb],
            energy: EnergyLedger::default(),
            recording: false,
            max_iterations: 0,
            config,
        };
        let t0 = sys.time();
        sys.solve_step(Method::Initial, t0)?;
        sys.commit(Method::Initial, t0);
        if sys.config.settle_steps() == 0 {
            sys.start_recording();
        }
        Ok(sys)
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    /// Time of the last accepted solution.
    pub fn time(&self) -> f64 {
        (self.step_index as f64 - self.config.settle_steps() as f64) * self.config.dt
    }

    pub fn node_voltage(&self, n: NodeId) -> f64 {
        self.node_v[n.0]
    }

    pub fn branch_current(&self, b: BranchId) -> f64 {
        self.hist_i[b.0]
    }

    pub fn branch_voltage(&self, b: BranchId) -> f64 {
        self.hist_v[b.0]
    }

    pub fn energy(&self) -> EnergyLedger {
        self.energy
    }

    pub fn state(&self) -> StateVector {
        let mut s = StateVector {
            time: self.time(),
            node_voltages: self.node_v.clone(),
            inductor_currents: Vec::new(),
            capacitor_voltages: Vec::new(),
            conduction: Vec::new(),
        };
        for (k, b) in self.branches.iter().enumerate() {
            let id = BranchId(k);
            match b.kind {
                ElementKind::Inductor { .. } => s.inductor_currents.push((id, self.hist_i[k])),
                ElementKind::Capacitor { .. } => s.capacitor_voltages.push((id, self.hist_v[k])),
                ElementKind::Diode { .. } => s.conduction.push((id, self.diode_on[k])),
                ElementKind::Switch { .. } => s.conduction.push((id, self.values[k] > 0.5)),
                _ => {}
            }
        }
        s
    }

    /// Advances the solution by one time step.
    pub fn step(&mut self) -> Result<()> {
        let dt = self.config.dt;
        {
            let view = StepView {
                t: self.time(),
                dt,
                node_v: &self.node_v,
                branch_v: &self.hist_v,
                branch_i: &self.hist_i,
            };
            let mut cmd = Commands {
                values: &mut self.values,
            };
            for c in self.controllers.iter_mut() {
                c.update(&view, &mut cmd);
            }
        }
        let commanded_change = self.commanded_discontinuity();
        let method = if self.be_next {
            Method::BackwardEuler
        } else {
            Method::Trapezoidal
        };
        let start_states: Vec<bool> = self.diodes.iter().map(|&k| self.diode_on[k]).collect();
        let t_next = (self.step_index as f64 + 1.0 - self.config.settle_steps() as f64) * dt;
        self.solve_step(method, t_next)?;
        let diode_change = self
            .diodes
            .iter()
            .zip(&start_states)
            .any(|(&k, &s)| self.diode_on[k] != s);
        self.step_index += 1;
        self.commit(method, t_next);
        self.be_next = diode_change || commanded_change;
        self.prev_values.copy_from_slice(&self.values);
        if self.step_index == self.config.settle_steps() {
            self.start_recording();
        }
        Ok(())
    }

    fn start_recording(&mut self) {
        self.recording = true;
        let stored = self.stored_energy();
        self.energy = EnergyLedger {
            stored_start: stored,
            stored_now: stored,
            ..Default::default()
        };
    }

    fn commanded_discontinuity(&self) -> bool {
        self.branches.iter().enumerate().any(|(k, b)| match b.kind {
            ElementKind::Switch { .. } => (self.values[k] > 0.5) != (self.prev_values[k] > 0.5),
            ElementKind::VariableResistor { .. } => {
                self.values[k].is_finite() != self.prev_values[k].is_finite()
            }
            _ => false,
        })
    }

    fn stored_energy(&self) -> f64 {
        self.branches
            .iter()
            .enumerate()
            .map(|(k, b)| match b.kind {
                ElementKind::Capacitor { farads, .. } => 0.5 * farads * self.hist_v[k].powi(2),
                ElementKind::Inductor { henries, .. } => 0.5 * henries * self.hist_i[k].powi(2),
                _ => 0.0,
            })
            .sum()
    }

    fn row(n: NodeId) -> Option<usize> {
        if n.0 == 0 {
            None
        } else {
            Some(n.0 - 1)
        }
    }

    /// Companion conductance and history current so that `i = g * v + j`.
    fn companion(&self, k: usize, method: Method) -> (f64, f64) {
        let dt = self.config.dt;
        let b = &self.branches[k];
        match b.kind {
            ElementKind::Resistor { ohms } => (1.0 / ohms, 0.0),
            ElementKind::Inductor { henries, .. } => match method {
                Method::Trapezoidal => {
                    let g = dt / (2.0 * henries);
                    (g, self.hist_i[k] + g * self.hist_v[k])
                }
                Method::BackwardEuler => (dt / henries, self.hist_i[k]),
                Method::Initial => (dt * INIT_DT_FRACTION / henries, self.hist_i[k]),
            },
            ElementKind::Capacitor { farads, .. } => match method {
                Method::Trapezoidal => {
                    let g = 2.0 * farads / dt;
                    (g, -(g * self.hist_v[k] + self.hist_i[k]))
                }
                Method::BackwardEuler => {
                    let g = farads / dt;
                    (g, -g * self.hist_v[k])
                }
                Method::Initial => {
                    let g = farads / (dt * INIT_DT_FRACTION);
                    (g, -g * self.hist_v[k])
                }
            },
            ElementKind::Diode { r_on, g_off } => {
                if self.diode_on[k] {
                    (1.0 / r_on, 0.0)
                } else {
                    (g_off, 0.0)
                }
            }
            ElementKind::Switch { r_on, g_off, .. } => {
                if self.values[k] > 0.5 {
                    (1.0 / r_on, 0.0)
                } else {
                    (g_off, 0.0)
                }
            }
            ElementKind::VariableResistor { g_off, .. } => {
                let ohms = self.values[k];
                if ohms.is_finite() {
                    (1.0 / ohms, 0.0)
                } else {
                    (g_off, 0.0)
                }
            }
            ElementKind::CurrentSource { .. } => (0.0, self.values[k]),
            ElementKind::VoltageSource { .. } | ElementKind::IdealTransformer { .. } => (0.0, 0.0),
        }
    }

    fn stamp(&mut self, method: Method, t: f64) {
        let dim = self.dim;
        self.a.iter_mut().for_each(|v| *v = 0.0);
        self.rhs.iter_mut().for_each(|v| *v = 0.0);
        for k in 0..self.branches.len() {
            let (from, to) = (self.branches[k].from, self.branches[k].to);
            let (ra, rb) = (Self::row(from), Self::row(to));
            if let Some(e) = self.extra[k] {
                match &self.branches[k].kind {
                    ElementKind::VoltageSource { waveform } => {
                        if let Some(a) = ra {
                            self.a[a * dim + e] += 1.0;
                            self.a[e * dim + a] += 1.0;
                        }
                        if let Some(b) = rb {
                            self.a[b * dim + e] -= 1.0;
                            self.a[e * dim + b] -= 1.0;
                        }
                        self.rhs[e] = self.values[k] * waveform.value(t);
                    }
                    ElementKind::IdealTransformer {
                        sec_pos, sec_neg, ..
                    } => {
                        let ratio = self.values[k];
                        let terms = [
                            (ra, 1.0),
                            (rb, -1.0),
                            (Self::row(*sec_pos), -ratio),
                            (Self::row(*sec_neg), ratio),
                        ];
                        for (r, c) in terms {
                            if let Some(r) = r {
                                self.a[r * dim + e] += c;
                                self.a[e * dim + r] += c;
                            }
                        }
                    }
                    _ => unreachable!(),
                }
                continue;
            }
            let (g, j) = self.companion(k, method);
            if let Some(a) = ra {
                self.a[a * dim + a] += g;
                self.rhs[a] -= j;
            }
            if let Some(b) = rb {
                self.a[b * dim + b] += g;
                self.rhs[b] += j;
            }
            if let (Some(a), Some(b)) = (ra, rb) {
                self.a[a * dim + b] -= g;
                self.a[b * dim + a] -= g;
            }
        }
    }

    fn unknown_name(&self, idx: usize) -> String {
        if idx < self.node_names.len() - 1 {
            self.node_names[idx + 1].clone()
        } else {
            let k = self.extra.iter().position(|e| *e == Some(idx)).unwrap_or(0);
            format!("current of `{}`", self.branches[k].name)
        }
    }

    fn solve_linear(&mut self, t: f64) -> Result<()> {
        if !self.have_lu || self.a != self.a_factored {
            if let Err(col) = self.lu.factor(&self.a) {
                self.have_lu = false;
                return Err(Error::Singular {
                    unknown: self.unknown_name(col),
                    t,
                });
            }
            self.a_factored.copy_from_slice(&self.a);
            self.have_lu = true;
        }
        self.lu.solve(&self.rhs, &mut self.x);
        Ok(())
    }

    fn voltage_of(&self, n: NodeId) -> f64 {
        Self::row(n).map_or(0.0, |r| self.x[r])
    }

    /// Solves one step including the diode state iteration.
    fn solve_step(&mut self, method: Method, t: f64) -> Result<()> {
        let max_iter = self.config.max_switch_iterations;
        let mut visited: Vec<Vec<bool>> = Vec::new();
        let mut single = false;
        for iter in 1..=max_iter {
            self.stamp(method, t);
            self.solve_linear(t)?;
            let vscale = self.x[..self.node_names.len() - 1]
                .iter()
                .fold(1.0_f64, |m, v| m.max(v.abs()));
            let tol = self.config.newton_tolerance * vscale;
            let mut worst: Option<(usize, f64)> = None;
            let mut flips = Vec::new();
            for &k in &self.diodes {
                let b = &self.branches[k];
                let v = self.voltage_of(b.from) - self.voltage_of(b.to);
                let violation = if self.diode_on[k] { -v - tol } else { v - tol };
                if violation > 0.0 {
                    flips.push(k);
                    if worst.map_or(true, |(_, w)| violation > w) {
                        worst = Some((k, violation));
                    }
                }
            }
            if flips.is_empty() {
                self.max_iterations = self.max_iterations.max(iter);
                return Ok(());
            }
            if !single {
                let state: Vec<bool> = self.diodes.iter().map(|&k| self.diode_on[k]).collect();
                if visited.contains(&state) || iter > BULK_FLIP_PASSES {
                    single = true;
                } else {
                    visited.push(state);
                }
            }
            if single {
                let (k, _) = worst.expect("non-empty flips");
                self.diode_on[k] = !self.diode_on[k];
            } else {
                for k in flips {
                    self.diode_on[k] = !self.diode_on[k];
                }
            }
        }
        let inconsistent: Vec<&str> = self
            .diodes
            .iter()
            .map(|&k| self.branches[k].name.as_str())
            .take(4)
            .collect();
        Err(Error::SwitchIteration {
            t,
            iterations: max_iter,
            detail: format!("diodes involved include {}", inconsistent.join(", ")),
        })
    }

    /// Stores the accepted solution, branch quantities and energy terms.
    fn commit(&mut self, method: Method, _t: f64) {
        for n in 1..self.node_v.len() {
            self.node_v[n] = self.x[n - 1];
        }
        for k in 0..self.branches.len() {
            let b = &self.branches[k];
            let v = self.node_v[b.from.0] - self.node_v[b.to.0];
            let i = match self.extra[k] {
                Some(e) => self.x[e],
                None => {
                    let (g, j) = self.companion(k, method);
                    g * v + j
                }
            };
            self.scratch_v[k] = v;
            self.scratch_i[k] = i;
        }
        if method == Method::Initial {
            // The initial solve only pins storage states; keep their prescribed values.
            for (k, b) in self.branches.iter().enumerate() {
                match b.kind {
                    ElementKind::Capacitor {
                        initial_voltage, ..
                    } => self.scratch_v[k] = initial_voltage,
                    ElementKind::Inductor {
                        initial_current, ..
                    } => self.scratch_i[k] = initial_current,
                    _ => {}
                }
            }
        }
        std::mem::swap(&mut self.hist_v, &mut self.scratch_v);
        std::mem::swap(&mut self.hist_i, &mut self.scratch_i);

        let half_dt = 0.5 * self.config.dt;
        let mut source = 0.0;
        let mut dissipated = 0.0;
        let mut controlled = 0.0;
        for (k, b) in self.branches.iter().enumerate() {
            let mut p = self.hist_v[k] * self.hist_i[k];
            if let ElementKind::IdealTransformer {
                sec_pos, sec_neg, ..
            } = b.kind
            {
                let v_sec = self.node_v[sec_pos.0] - self.node_v[sec_neg.0];
                p -= self.values[k] * self.hist_i[k] * v_sec;
            }
            let e = half_dt * (p + self.power[k]);
            self.power[k] = p;
            match b.kind {
                ElementKind::VoltageSource { .. } => source -= e,
                ElementKind::Resistor { .. }
                | ElementKind::Diode { .. }
                | ElementKind::Switch { .. }
                | ElementKind::VariableResistor { .. } => dissipated += e,
                ElementKind::CurrentSource { .. } | ElementKind::IdealTransformer { .. } => {
                    controlled += e
                }
                ElementKind::Inductor { .. } | ElementKind::Capacitor { .. } => {}
            }
        }
        if self.recording && method != Method::Initial {
            self.energy.source_in += source;
            self.energy.dissipated += dissipated;
            self.energy.controlled += controlled;
            self.energy.stored_now = self.stored_energy();
        }
    }

    fn probe_value(&self, p: &Probe) -> f64 {
        match p.kind {
            ProbeKind::NodeVoltage(n) => self.node_v[n.0],
            ProbeKind::Voltage(a, b) => self.node_v[a.0] - self.node_v[b.0],
            ProbeKind::BranchCurrent(b) => self.hist_i[b.0],
            ProbeKind::BranchVoltage(b) => self.hist_v[b.0],
            ProbeKind::Internal { controller, key } => self.controllers[controller]
                .internal(key)
                .unwrap_or(f64::NAN),
        }
    }

    fn diagnostics(&self) -> Vec<Diagnostic> {
        self.controllers.iter().flat_map(|c| c.diagnostics()).collect()
    }

    /// Runs the whole configured interval and returns the decimated probe record.
    pub fn run(mut self) -> Result<RunOutput> {
        let settle = self.config.settle_steps();
        let steps = self.config.run_steps();
        let dec = self.config.decimation;
        while self.step_index < settle {
            self.step()?;
        }
        let n_out = steps / dec + 1;
        let mut time = Vec::with_capacity(n_out);
        let mut data: Vec<Vec<f64>> = vec![Vec::with_capacity(n_out); self.probes.len()];
        let record = |sys: &Self, time: &mut Vec<f64>, data: &mut Vec<Vec<f64>>| {
            time.push(sys.time());
            for (p, d) in sys.probes.iter().zip(data.iter_mut()) {
                d.push(sys.probe_value(p));
            }
        };
        record(&self, &mut time, &mut data);
        for s in 1..=steps {
            self.step()?;
            if s % dec == 0 {
                record(&self, &mut time, &mut data);
            }
        }
        let waveforms = WaveformSet {
            time,
            channels: self
                .probes
                .iter()
                .map(|p| p.name.clone())
                .zip(data)
                .collect(),
        };
        Ok(RunOutput {
            waveforms,
            diagnostics: self.diagnostics(),
            energy: self.energy,
            max_iterations: self.max_iterations,
        })
    }
}

/// Assembles and runs a netlist.
pub fn run(netlist: Netlist, config: SolverConfig) -> Result<RunOutput> {
    DiscretizedSystem::assemble(netlist, config)?.run()
}

fn check_connectivity(names: &[String], branches: &[BranchElement]) -> Result<()> {
    let mut parent: Vec<usize> = (0..names.len()).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let union = |p: &mut Vec<usize>, a: NodeId, b: NodeId| {
        let (ra, rb) = (find(p, a.0), find(p, b.0));
        if ra != rb {
            p[ra.max(rb)] = ra.min(rb);
        }
    };
    for b in branches {
        match &b.kind {
            ElementKind::CurrentSource { .. } => {}
            ElementKind::IdealTransformer {
                sec_pos, sec_neg, ..
            } => {
                union(&mut parent, b.from, b.to);
                union(&mut parent, *sec_pos, *sec_neg);
            }
            _ => union(&mut parent, b.from, b.to),
        }
    }
    for n in 1..names.len() {
        if find(&mut parent, n) != find(&mut parent, 0) {
            return Err(Error::FloatingNode {
                node: names[n].clone(),
            });
        }
    }
    Ok(())
}
