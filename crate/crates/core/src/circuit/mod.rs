//! Fixed-step nodal EMT solver.
//!
//! Inductors and capacitors are discretized with trapezoidal companion models.
//! Diodes and switches are two-state resistors; the diode conduction pattern is
//! found per step by iterating solve/re-evaluate until it is self-consistent.
//! Everything that changes during a run (switch commands, variable resistances,
//! source gains, controlled currents) is written by [`Controller`]s once per
//! step from the previously accepted state.

mod control;
mod linalg;
mod solver;

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

pub use control::{Commands, Controller, Diagnostic, StepView};
pub use solver::{run, DiscretizedSystem, EnergyLedger, RunOutput, StateVector};

use crate::error::{Error, Result};

/// Default on-resistance of an ideal diode or switch.
pub const DEFAULT_R_ON: f64 = 1e-3;
/// Default off-conductance of an ideal diode or switch.
pub const DEFAULT_G_OFF: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub(crate) usize);

impl NodeId {
    pub const GROUND: NodeId = NodeId(0);

    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BranchId(pub(crate) usize);

impl BranchId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Time function driving an independent voltage source.
pub trait Waveform: Send + Sync + fmt::Debug {
    fn value(&self, t: f64) -> f64;
}

#[derive(Debug, Clone, Copy)]
pub struct Sine {
    pub amplitude: f64,
    pub frequency: f64,
    pub phase: f64,
}

impl Waveform for Sine {
    fn value(&self, t: f64) -> f64 {
        self.amplitude * (std::f64::consts::TAU * self.frequency * t + self.phase).sin()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Dc(pub f64);

impl Waveform for Dc {
    fn value(&self, _t: f64) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone)]
pub enum ElementKind {
    Resistor {
        ohms: f64,
    },
    Inductor {
        henries: f64,
        initial_current: f64,
    },
    Capacitor {
        farads: f64,
        initial_voltage: f64,
    },
    /// Anode is the `from` terminal.
    Diode {
        r_on: f64,
        g_off: f64,
    },
    /// State is written by a controller.
    Switch {
        r_on: f64,
        g_off: f64,
        closed: bool,
    },
    /// `from` is the positive terminal. The emitted value is `gain * waveform(t)`.
    VoltageSource {
        waveform: Arc<dyn Waveform>,
    },
    /// Current flowing from `from` through the source into `to`; written by a controller.
    CurrentSource {
        amps: f64,
    },
    /// Resistance written by a controller; `f64::INFINITY` realizes an open branch with
    /// conductance `g_off`.
    VariableResistor {
        ohms: f64,
        g_off: f64,
    },
    /// Ideal transformer with controllable ratio: `v(from,to) = ratio * v(sec_pos,sec_neg)`.
    /// The branch current is the primary current; the secondary injects `ratio * i`
    /// into `sec_pos`.
    IdealTransformer {
        sec_pos: NodeId,
        sec_neg: NodeId,
        ratio: f64,
    },
}

impl ElementKind {
    pub fn label(&self) -> &'static str {
        match self {
            ElementKind::Resistor { .. } => "resistor",
            ElementKind::Inductor { .. } => "inductor",
            ElementKind::Capacitor { .. } => "capacitor",
            ElementKind::Diode { .. } => "diode",
            ElementKind::Switch { .. } => "switch",
            ElementKind::VoltageSource { .. } => "voltage source",
            ElementKind::CurrentSource { .. } => "current source",
            ElementKind::VariableResistor { .. } => "variable resistor",
            ElementKind::IdealTransformer { .. } => "ideal transformer",
        }
    }
}

/// One two-terminal element. Current is counted from `from` through the element to `to`.
#[derive(Debug, Clone)]
pub struct BranchElement {
    pub name: String,
    pub from: NodeId,
    pub to: NodeId,
    pub kind: ElementKind,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProbeKind {
    NodeVoltage(NodeId),
    Voltage(NodeId, NodeId),
    BranchCurrent(BranchId),
    BranchVoltage(BranchId),
    /// Internal state published by the controller at the given index.
    Internal { controller: usize, key: &'static str },
}

#[derive(Debug, Clone)]
pub struct Probe {
    pub name: String,
    pub kind: ProbeKind,
}

/// Circuit description: nodes, elements, probes and the controllers that drive them.
pub struct Netlist {
    node_names: Vec<String>,
    node_index: HashMap<String, NodeId>,
    branches: Vec<BranchElement>,
    branch_index: HashMap<String, BranchId>,
    probes: Vec<Probe>,
    controllers: Vec<Box<dyn Controller>>,
}

impl Clone for Netlist {
    fn clone(&self) -> Self {
        Self {
            node_names: self.node_names.clone(),
            node_index: self.node_index.clone(),
            branches: self.branches.clone(),
            branch_index: self.branch_index.clone(),
            probes: self.probes.clone(),
            controllers: self.controllers.iter().map(|c| c.clone_box()).collect(),
        }
    }
}

impl fmt::Debug for Netlist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Netlist")
            .field("nodes", &self.node_names)
            .field("branches", &self.branches)
            .field("probes", &self.probes)
            .field("controllers", &self.controllers.len())
            .finish()
    }
}

impl Default for Netlist {
    fn default() -> Self {
        Self::new()
    }
}

impl Netlist {
    pub fn new() -> Self {
        let mut node_index = HashMap::new();
        node_index.insert("0".to_string(), NodeId::GROUND);
        Self {
            node_names: vec!["0".to_string()],
            node_index,
            branches: Vec::new(),
            branch_index: HashMap::new(),
            probes: Vec::new(),
            controllers: Vec::new(),
        }
    }

    /// Returns the node with this name, creating it if needed. `"0"` and `"gnd"` are ground.
    pub fn node(&mut self, name: &str) -> NodeId {
        if name == "gnd" {
            return NodeId::GROUND;
        }
        if let Some(&id) = self.node_index.get(name) {
            return id;
        }
        let id = NodeId(self.node_names.len());
        self.node_names.push(name.to_string());
        self.node_index.insert(name.to_string(), id);
        id
    }

    pub fn find_node(&self, name: &str) -> Option<NodeId> {
        if name == "gnd" {
            return Some(NodeId::GROUND);
        }
        self.node_index.get(name).copied()
    }

    pub fn node_name(&self, id: NodeId) -> &str {
        &self.node_names[id.0]
    }

    pub fn node_count(&self) -> usize {
        self.node_names.len()
    }

    pub fn branches(&self) -> &[BranchElement] {
        &self.branches
    }

    pub fn branch(&self, id: BranchId) -> &BranchElement {
        &self.branches[id.0]
    }

    pub fn find_branch(&self, name: &str) -> Option<BranchId> {
        self.branch_index.get(name).copied()
    }

    pub fn probes(&self) -> &[Probe] {
        &self.probes
    }

    pub fn controller_count(&self) -> usize {
        self.controllers.len()
    }

    /// Adds an element after validating its parameters and terminals.
    pub fn add(
        &mut self,
        name: impl Into<String>,
        from: NodeId,
        to: NodeId,
        kind: ElementKind,
    ) -> Result<BranchId> {
        let name = name.into();
        if self.branch_index.contains_key(&name) {
            return Err(Error::InvalidNetlist(format!("duplicate branch name `{name}`")));
        }
        for n in [from, to] {
            if n.0 >= self.node_names.len() {
                return Err(Error::InvalidNetlist(format!(
                    "branch `{name}` references unknown node #{}",
                    n.0
                )));
            }
        }
        if from == to {
            return Err(Error::InvalidNetlist(format!(
                "branch `{name}` connects node `{}` to itself",
                self.node_names[from.0]
            )));
        }
        validate_kind(&name, &kind, self.node_names.len())?;
        let id = BranchId(self.branches.len());
        self.branch_index.insert(name.clone(), id);
        self.branches.push(BranchElement {
            name,
            from,
            to,
            kind,
        });
        Ok(id)
    }

    pub fn resistor(&mut self, name: &str, a: NodeId, b: NodeId, ohms: f64) -> Result<BranchId> {
        self.add(name, a, b, ElementKind::Resistor { ohms })
    }

    pub fn inductor(&mut self, name: &str, a: NodeId, b: NodeId, henries: f64) -> Result<BranchId> {
        self.add(
            name,
            a,
            b,
            ElementKind::Inductor {
                henries,
                initial_current: 0.0,
            },
        )
    }

    pub fn capacitor(
        &mut self,
        name: &str,
        a: NodeId,
        b: NodeId,
        farads: f64,
        initial_voltage: f64,
    ) -> Result<BranchId> {
        self.add(
            name,
            a,
            b,
            ElementKind::Capacitor {
                farads,
                initial_voltage,
            },
        )
    }

    pub fn diode(
        &mut self,
        name: &str,
        anode: NodeId,
        cathode: NodeId,
        r_on: f64,
        g_off: f64,
    ) -> Result<BranchId> {
        self.add(name, anode, cathode, ElementKind::Diode { r_on, g_off })
    }

    pub fn voltage_source(
        &mut self,
        name: &str,
        pos: NodeId,
        neg: NodeId,
        waveform: Arc<dyn Waveform>,
    ) -> Result<BranchId> {
        self.add(name, pos, neg, ElementKind::VoltageSource { waveform })
    }

    pub fn probe(&mut self, name: impl Into<String>, kind: ProbeKind) {
        self.probes.push(Probe {
            name: name.into(),
            kind,
        });
    }

    /// Registers a controller and returns its index (used by internal-state probes).
    pub fn add_controller(&mut self, controller: Box<dyn Controller>) -> usize {
        self.controllers.push(controller);
        self.controllers.len() - 1
    }

    pub(crate) fn into_parts(self) -> NetlistParts {
        NetlistParts {
            node_names: self.node_names,
            branches: self.branches,
            probes: self.probes,
            controllers: self.controllers,
        }
    }
}

pub(crate) struct NetlistParts {
    pub node_names: Vec<String>,
    pub branches: Vec<BranchElement>,
    pub probes: Vec<Probe>,
    pub controllers: Vec<Box<dyn Controller>>,
}

fn positive(name: &str, what: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidNetlist(format!(
            "branch `{name}`: {what} must be positive and finite, got {v}"
        )))
    }
}

fn switch_ratio(name: &str, r_on: f64, g_off: f64) -> Result<()> {
    positive(name, "on-resistance", r_on)?;
    positive(name, "off-conductance", g_off)?;
    if g_off * r_on > 1e-6 {
        return Err(Error::InvalidNetlist(format!(
            "branch `{name}`: off-conductance {g_off} S is not at least 1e6 below 1/r_on"
        )));
    }
    Ok(())
}

fn validate_kind(name: &str, kind: &ElementKind, nodes: usize) -> Result<()> {
    match kind {
        ElementKind::Resistor { ohms } => positive(name, "resistance", *ohms),
        ElementKind::Inductor { henries, .. } => positive(name, "inductance", *henries),
        ElementKind::Capacitor { farads, .. } => positive(name, "capacitance", *farads),
        ElementKind::Diode { r_on, g_off } | ElementKind::Switch { r_on, g_off, .. } => {
            switch_ratio(name, *r_on, *g_off)
        }
        ElementKind::VoltageSource { .. } | ElementKind::CurrentSource { .. } => Ok(()),
        ElementKind::VariableResistor { ohms, g_off } => {
            positive(name, "off-conductance", *g_off)?;
            if *ohms > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidNetlist(format!(
                    "branch `{name}`: resistance must be positive, got {ohms}"
                )))
            }
        }
        ElementKind::IdealTransformer {
            sec_pos, sec_neg, ..
        } => {
            if sec_pos.0 >= nodes || sec_neg.0 >= nodes || sec_pos == sec_neg {
                Err(Error::InvalidNetlist(format!(
                    "branch `{name}`: invalid secondary terminals"
                )))
            } else {
                Ok(())
            }
        }
    }
}

/// Integration and iteration settings for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Fixed time step (s).
    pub dt: f64,
    /// End of the recorded interval (s); recording starts at t = 0.
    pub t_end: f64,
    /// Unrecorded pre-roll before t = 0 (s), used to reach steady state.
    pub settle: f64,
    /// Cap on solves per step during the diode state iteration.
    pub max_switch_iterations: usize,
    /// Relative tolerance for the diode consistency checks.
    pub newton_tolerance: f64,
    /// Record every `decimation`-th step.
    pub decimation: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            dt: 1e-6,
            t_end: 0.0,
            settle: 0.0,
            max_switch_iterations: 50,
            newton_tolerance: 1e-9,
            decimation: 1,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(crate::error::invalid("solver.dt", "must be positive"));
        }
        if !(self.t_end >= 0.0) || !(self.settle >= 0.0) {
            return Err(crate::error::invalid(
                "solver.t_end",
                "t_end and settle must be non-negative",
            ));
        }
        if self.max_switch_iterations < 1 {
            return Err(crate::error::invalid(
                "solver.max_switch_iterations",
                "must be at least 1",
            ));
        }
        if self.decimation < 1 {
            return Err(crate::error::invalid("solver.decimation", "must be at least 1"));
        }
        if !(self.newton_tolerance > 0.0) {
            return Err(crate::error::invalid(
                "solver.newton_tolerance",
                "must be positive",
            ));
        }
        Ok(())
    }

    pub(crate) fn settle_steps(&self) -> usize {
        (self.settle / self.dt).round() as usize
    }

    pub(crate) fn run_steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }

    /// Output sample rate (Hz).
    pub fn output_rate(&self) -> f64 {
        1.0 / (self.dt * self.decimation as f64)
    }
}

/// Uniformly sampled named channels.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WaveformSet {
    pub time: Vec<f64>,
    pub channels: Vec<(String, Vec<f64>)>,
}

impl WaveformSet {
    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }

    pub fn channel(&self, name: &str) -> Option<&[f64]> {
        self.channels
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.channels.iter().map(|(n, _)| n.as_str())
    }

    /// Sample rate implied by the first two timestamps.
    pub fn sample_rate(&self) -> Option<f64> {
        if self.time.len() < 2 {
            return None;
        }
        Some(1.0 / (self.time[1] - self.time[0]))
    }

    pub fn push_channel(&mut self, name: impl Into<String>, values: Vec<f64>) {
        self.channels.push((name.into(), values));
    }
}
