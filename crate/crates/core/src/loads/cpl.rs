use num_complex::Complex64;

use crate::analysis::SlidingPhasor;
use crate::circuit::{
    BranchId, Commands, Controller, Dc, Diagnostic, ElementKind, Netlist, NodeId, StepView,
};
use crate::error::{invalid, Result};

use std::f64::consts::{PI, SQRT_2};
use std::sync::Arc;

/// Fundamental voltage (pu) below which the drawn current stops growing.
pub const COLLAPSE_VOLTAGE_PU: f64 = 0.05;
/// Shunt capacitance at each load node as reactive power in per unit of the phase load.
/// A bare current source behind a series inductance leaves the node voltage undefined;
/// the capacitor makes the model well posed wherever it is connected.
pub const SHUNT_Q_PU: f64 = 0.01;
/// Off-conductance of the load conductance relative to the load's admittance base.
const G_OFF_PU: f64 = 1e-6;
/// Continuous time at the current cap after which the run counts as collapsed (s).
pub const COLLAPSE_HOLD: f64 = 0.2;

#[derive(Debug, Clone)]
pub struct CplHandle {
    /// Zero-volt ammeters carrying the total current into each node's load.
    pub sense: Vec<BranchId>,
    /// Conductance carrying the active part, one per node.
    pub conductances: Vec<BranchId>,
    /// Current source carrying the reactive part, one per node.
    pub sources: Vec<BranchId>,
    pub controller: usize,
}

#[derive(Clone)]
struct ConstantPower {
    name: String,
    s_phase: Complex64,
    nodes: Vec<NodeId>,
    conductances: Vec<BranchId>,
    sources: Vec<BranchId>,
    v_floor: f64,
    frequency: f64,
    phasors: Vec<SlidingPhasor>,
    capped_since: Option<f64>,
    collapsed_at: Option<f64>,
}

impl ConstantPower {
    fn init(&mut self, dt: f64) {
        let n = 1.0 / (self.frequency * dt);
        let n = n.round().max(1.0) as usize;
        self.phasors = vec![SlidingPhasor::new(n); self.nodes.len()];
    }
}

impl Controller for ConstantPower {
    fn update(&mut self, view: &StepView<'_>, cmd: &mut Commands<'_>) {
        if self.phasors.is_empty() {
            self.init(view.dt);
        }
        let mut capped = false;
        for k in 0..self.nodes.len() {
            let ph = &mut self.phasors[k];
            ph.push(view.voltage(self.nodes[k]));
            if !ph.is_full() {
                continue;
            }
            let mut v = ph.phasor();
            let mag = v.norm();
            if mag < self.v_floor {
                capped = true;
                v = if mag > 0.0 {
                    v * (self.v_floor / mag)
                } else {
                    Complex64::new(self.v_floor, 0.0)
                };
            }
            // Peak phasors: I = 2·conj(S)·V/|V|², split into G·V and a quadrature part.
            let m2 = v.norm_sqr();
            let g = 2.0 * self.s_phase.re / m2;
            cmd.set_resistance(self.conductances[k], if g > 0.0 { 1.0 / g } else { f64::INFINITY });
            let i_q = Complex64::new(0.0, -2.0 * self.s_phase.im / m2) * v;
            let n = ph.len();
            let theta = 2.0 * PI * ph.next_index() as f64 / n as f64;
            cmd.set_current(self.sources[k], (i_q * Complex64::from_polar(1.0, theta)).re);
        }
        if capped {
            let since = *self.capped_since.get_or_insert(view.t);
            if view.t - since >= COLLAPSE_HOLD && self.collapsed_at.is_none() {
                self.collapsed_at = Some(view.t);
            }
        } else {
            self.capped_since = None;
        }
    }

    fn internal(&self, key: &str) -> Option<f64> {
        match key {
            "collapsed" => Some(if self.collapsed() { 1.0 } else { 0.0 }),
            "capped" => Some(if self.capped_since.is_some() { 1.0 } else { 0.0 }),
            _ => None,
        }
    }

    fn diagnostics(&self) -> Vec<Diagnostic> {
        let t = self.collapsed_at.or(self.capped_since);
        match t {
            Some(t) => vec![Diagnostic {
                source: self.name.clone(),
                t,
                message: "constant-power collapse".to_string(),
            }],
            None => Vec::new(),
        }
    }

    fn clone_box(&self) -> Box<dyn Controller> {
        Box::new(self.clone())
    }
}

impl ConstantPower {
    fn collapsed(&self) -> bool {
        self.collapsed_at.is_some()
    }
}

/// Load drawing `p + jq` at the fundamental, split equally over `nodes`
/// (each measured against ground). `u_base` is the nominal RMS voltage of one node.
pub fn constant_power_load(
    net: &mut Netlist,
    name: &str,
    p: f64,
    q: f64,
    nodes: &[NodeId],
    u_base: f64,
    frequency: f64,
) -> Result<CplHandle> {
    if !(p >= 0.0) {
        return Err(invalid("p", "must not be negative"));
    }
    if nodes.is_empty() {
        return Err(invalid("nodes", "at least one phase node required"));
    }
    if !(u_base > 0.0 && frequency > 0.0) {
        return Err(invalid("u_base", "voltage base and frequency must be positive"));
    }
    let tags = ["a", "b", "c"];
    let mut sources = Vec::new();
    let mut conductances = Vec::new();
    let mut sense = Vec::new();
    let s_ref = Complex64::new(p, q).norm().max(f64::MIN_POSITIVE) / nodes.len() as f64;
    let z_ref = u_base * u_base / s_ref;
    let c_shunt = SHUNT_Q_PU * s_ref / (2.0 * PI * frequency * u_base * u_base);
    for (k, &n) in nodes.iter().enumerate() {
        let tag = tags.get(k).map_or_else(|| k.to_string(), |s| s.to_string());
        let x = net.node(&format!("{name}.x_{tag}"));
        sense.push(net.add(
            &format!("{name}.sense_{tag}"),
            n,
            x,
            ElementKind::VoltageSource {
                waveform: Arc::new(Dc(0.0)),
            },
        )?);
        net.capacitor(&format!("{name}.c_{tag}"), x, NodeId::GROUND, c_shunt, 0.0)?;
        let r0 = if p > 0.0 {
            u_base * u_base * nodes.len() as f64 / p
        } else {
            f64::INFINITY
        };
        conductances.push(net.add(
            &format!("{name}.g_{tag}"),
            x,
            NodeId::GROUND,
            ElementKind::VariableResistor {
                ohms: r0,
                g_off: G_OFF_PU / z_ref,
            },
        )?);
        sources.push(net.add(
            &format!("{name}.i_{tag}"),
            x,
            NodeId::GROUND,
            ElementKind::CurrentSource { amps: 0.0 },
        )?);
    }
    let controller = net.add_controller(Box::new(ConstantPower {
        name: name.to_string(),
        s_phase: Complex64::new(p, q) / nodes.len() as f64,
        nodes: nodes.to_vec(),
        conductances: conductances.clone(),
        sources: sources.clone(),
        v_floor: COLLAPSE_VOLTAGE_PU * SQRT_2 * u_base,
        frequency,
        phasors: Vec::new(),
        capped_since: None,
        collapsed_at: None,
    }));
    Ok(CplHandle {
        sense,
        conductances,
        sources,
        controller,
    })
}
