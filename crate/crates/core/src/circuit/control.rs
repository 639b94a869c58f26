use super::{BranchId, NodeId};

/// Read-only view of the last accepted solution, handed to controllers.
pub struct StepView<'a> {
    /// Time of the accepted solution (s).
    pub t: f64,
    /// Step about to be taken (s).
    pub dt: f64,
    pub(crate) node_v: &'a [f64],
    pub(crate) branch_v: &'a [f64],
    pub(crate) branch_i: &'a [f64],
}

impl StepView<'_> {
    pub fn voltage(&self, node: NodeId) -> f64 {
        self.node_v[node.0]
    }

    pub fn between(&self, a: NodeId, b: NodeId) -> f64 {
        self.node_v[a.0] - self.node_v[b.0]
    }

    pub fn branch_voltage(&self, b: BranchId) -> f64 {
        self.branch_v[b.0]
    }

    pub fn current(&self, b: BranchId) -> f64 {
        self.branch_i[b.0]
    }
}

/// Write access to the controllable parameters of the netlist for the coming step.
pub struct Commands<'a> {
    pub(crate) values: &'a mut [f64],
}

impl Commands<'_> {
    /// Resistance of a variable resistor; `f64::INFINITY` opens it.
    pub fn set_resistance(&mut self, b: BranchId, ohms: f64) {
        self.values[b.0] = ohms;
    }

    pub fn set_switch(&mut self, b: BranchId, closed: bool) {
        self.values[b.0] = if closed { 1.0 } else { 0.0 };
    }

    /// Multiplier applied to a voltage source's waveform.
    pub fn set_gain(&mut self, b: BranchId, gain: f64) {
        self.values[b.0] = gain;
    }

    pub fn set_current(&mut self, b: BranchId, amps: f64) {
        self.values[b.0] = amps;
    }

    pub fn set_ratio(&mut self, b: BranchId, ratio: f64) {
        self.values[b.0] = ratio;
    }
}

/// Notable condition raised by a controller during a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub source: String,
    pub t: f64,
    pub message: String,
}

/// Sampled-data logic evaluated once per step, before the step is solved.
pub trait Controller: Send {
    fn update(&mut self, view: &StepView<'_>, cmd: &mut Commands<'_>);

    /// Named internal state for probing.
    fn internal(&self, _key: &str) -> Option<f64> {
        None
    }

    fn diagnostics(&self) -> Vec<Diagnostic> {
        Vec::new()
    }

    fn clone_box(&self) -> Box<dyn Controller>;
}
