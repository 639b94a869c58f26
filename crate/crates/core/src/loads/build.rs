use crate::circuit::{
    BranchId, Commands, Controller, Diagnostic, Dc, ElementKind, Netlist, NodeId, ProbeKind,
    StepView,
};
use crate::error::{invalid, Result};
use std::sync::Arc;

use super::{
    apfc_update, disconnect_supervisor, load_resistance, ApfcMode, ApfcState, DcLinkState,
    PelSpec, PfcKind,
};

/// Semiconductor on-resistance and off-conductance relative to the load's impedance
/// base, so that scaled models stay scaled copies of each other.
const R_ON_PU: f64 = 1e-6;
const G_OFF_PU: f64 = 1e-6;

/// Elements and controller of one built load.
#[derive(Debug, Clone)]
pub struct PelHandle {
    pub name: String,
    pub spec: PelSpec,
    pub terminals: Vec<NodeId>,
    /// Zero-volt ammeters carrying the current into each terminal.
    pub sense: Vec<BranchId>,
    pub c_d: BranchId,
    pub r_l: BranchId,
    pub controller: usize,
}

impl PelHandle {
    /// Adds probes `<prefix>u_load`, `<prefix>i_load`, `<prefix>u_d` and `<prefix>connected`.
    /// Three-phase loads get `_a`, `_b`, `_c` suffixes on voltage (to ground) and current.
    pub fn add_probes(&self, net: &mut Netlist, prefix: &str) {
        if self.terminals.len() == 2 {
            net.probe(
                format!("{prefix}u_load"),
                ProbeKind::Voltage(self.terminals[0], self.terminals[1]),
            );
            net.probe(format!("{prefix}i_load"), ProbeKind::BranchCurrent(self.sense[0]));
        } else {
            for (k, s) in ["_a", "_b", "_c"].iter().enumerate() {
                net.probe(
                    format!("{prefix}u_load{s}"),
                    ProbeKind::NodeVoltage(self.terminals[k]),
                );
            }
            for (k, s) in ["_a", "_b", "_c"].iter().enumerate() {
                net.probe(format!("{prefix}i_load{s}"), ProbeKind::BranchCurrent(self.sense[k]));
            }
        }
        net.probe(format!("{prefix}u_d"), ProbeKind::BranchVoltage(self.c_d));
        net.probe(
            format!("{prefix}connected"),
            ProbeKind::Internal {
                controller: self.controller,
                key: "connected",
            },
        );
    }

    /// Adds a probe of a named controller state such as `i_ref` or `r_l`.
    pub fn probe_internal(&self, net: &mut Netlist, name: &str, key: &'static str) {
        net.probe(
            name.to_string(),
            ProbeKind::Internal {
                controller: self.controller,
                key,
            },
        );
    }
}

#[derive(Clone)]
struct Apfc {
    inductor: BranchId,
    actuator: BranchId,
    input: (NodeId, NodeId),
    state: ApfcState,
    i_ref: f64,
    duty: f64,
    pi: f64,
}

#[derive(Clone)]
struct PelController {
    name: String,
    spec: PelSpec,
    c_d: BranchId,
    r_l: BranchId,
    link: DcLinkState,
    /// Link voltage at the previous update, for the midpoint estimate.
    u_prev: f64,
    r: f64,
    apfc: Option<Apfc>,
    events: Vec<(f64, bool)>,
}

impl Controller for PelController {
    fn update(&mut self, view: &StepView<'_>, cmd: &mut Commands<'_>) {
        let u_d = view.branch_voltage(self.c_d);
        let next = disconnect_supervisor(self.link, u_d, &self.spec, view.t);
        if next.connected != self.link.connected {
            self.events.push((view.t, next.connected));
        }
        self.link = next;
        // R_l is set from t_n but draws power at t_{n+1}; extrapolate u_d one step.
        let u_next = (2.0 * u_d - self.u_prev).max(0.0);
        self.u_prev = u_d;
        self.r = load_resistance(u_next, &self.spec, &self.link);
        cmd.set_resistance(self.r_l, self.r);

        if let Some(a) = self.apfc.as_mut() {
            let params = self.spec.controller.as_ref().expect("validated active spec");
            let u_g = view.between(a.input.0, a.input.1);
            let i_d = view.current(a.inductor);
            let out = apfc_update(params, u_g, u_d, i_d, view.dt, &mut a.state);
            a.i_ref = out.i_ref;
            a.pi = out.pi;
            if let Some(d) = out.duty {
                a.duty = d;
                cmd.set_ratio(a.actuator, 1.0 - d);
            }
            if let Some(on) = out.switch_on {
                a.duty = if on { 1.0 } else { 0.0 };
                cmd.set_switch(a.actuator, on);
            }
        }
    }

    fn internal(&self, key: &str) -> Option<f64> {
        let a = self.apfc.as_ref();
        match key {
            "u_d" => Some(self.link.u_d),
            "connected" => Some(if self.link.connected { 1.0 } else { 0.0 }),
            "r_l" => Some(self.r),
            "i_ref" => a.map(|a| a.i_ref),
            "duty" => a.map(|a| a.duty),
            "pi" => a.map(|a| a.pi),
            _ => None,
        }
    }

    fn diagnostics(&self) -> Vec<Diagnostic> {
        self.events
            .iter()
            .map(|&(t, on)| Diagnostic {
                source: self.name.clone(),
                t,
                message: if on { "reconnected" } else { "switched off" }.to_string(),
            })
            .collect()
    }

    fn clone_box(&self) -> Box<dyn Controller> {
        Box::new(self.clone())
    }
}

/// Adds a load model between `terminals` (two for single-phase, three for three-phase).
pub fn build_pel(
    net: &mut Netlist,
    name: &str,
    spec: &PelSpec,
    terminals: &[NodeId],
) -> Result<PelHandle> {
    spec.validate()?;
    let phases = spec.pfc_kind.phases();
    let expected = if phases == 3 { 3 } else { 2 };
    if terminals.len() != expected {
        return Err(invalid(
            "terminals",
            format!(
                "{} load needs {expected} terminals, got {}",
                spec.pfc_kind.name(),
                terminals.len()
            ),
        ));
    }
    let z = spec.z_base();
    let (r_on, g_off) = (R_ON_PU * z, G_OFF_PU / z);
    let diode = ElementKind::Diode { r_on, g_off };
    let n = |net: &mut Netlist, s: &str| net.node(&format!("{name}.{s}"));

    let mut inputs = Vec::new();
    let mut sense = Vec::new();
    let tag = ["a", "b", "c"];
    let sensed = if phases == 3 { 3 } else { 1 };
    for (k, &t) in terminals.iter().enumerate() {
        if k < sensed {
            let inp = n(net, &format!("in_{}", tag[k]));
            sense.push(net.add(
                &format!("{name}.sense_{}", tag[k]),
                t,
                inp,
                ElementKind::VoltageSource {
                    waveform: Arc::new(Dc(0.0)),
                },
            )?);
            inputs.push(inp);
        } else {
            inputs.push(t);
        }
    }

    let p = n(net, "p");
    let neg = n(net, "n");
    for (k, &inp) in inputs.iter().enumerate() {
        net.add(&format!("{name}.d_up_{}", tag[k]), inp, p, diode.clone())?;
        net.add(&format!("{name}.d_dn_{}", tag[k]), neg, inp, diode.clone())?;
    }

    let u0 = spec.initial_dc_voltage();
    let c_value = spec.c_d();
    let mut apfc = None;
    let out = match spec.pfc_kind {
        PfcKind::None => p,
        PfcKind::Passive1ph | PfcKind::Passive3ph => {
            let o = n(net, "o");
            net.inductor(&format!("{name}.l_d"), p, o, spec.l_d().expect("validated"))?;
            o
        }
        PfcKind::Active1ph => {
            let params = spec.controller.expect("validated");
            let x = n(net, "x");
            let o = n(net, "o");
            let l_d = spec.l_d().expect("validated");
            let inductor = net.inductor(&format!("{name}.l_d"), p, x, l_d)?;
            net.add(&format!("{name}.d_pre"), p, o, diode.clone())?;
            let actuator = match params.mode {
                ApfcMode::Averaged => net.add(
                    &format!("{name}.boost"),
                    x,
                    neg,
                    ElementKind::IdealTransformer {
                        sec_pos: o,
                        sec_neg: neg,
                        ratio: 1.0,
                    },
                )?,
                ApfcMode::Switched => {
                    net.add(&format!("{name}.d_boost"), x, o, diode.clone())?;
                    net.add(
                        &format!("{name}.s"),
                        x,
                        neg,
                        ElementKind::Switch {
                            r_on,
                            g_off,
                            closed: false,
                        },
                    )?
                }
            };
            apfc = Some(Apfc {
                inductor,
                actuator,
                input: (inputs[0], inputs[1]),
                state: ApfcState::new(l_d, spec.rated_peak_current()),
                i_ref: 0.0,
                duty: 0.0,
                pi: 0.0,
            });
            o
        }
    };
    let c_d = net.capacitor(&format!("{name}.c_d"), out, neg, c_value, u0)?;
    let r0 = load_resistance(u0, spec, &DcLinkState::connected(u0));
    let r_l = net.add(
        &format!("{name}.r_l"),
        out,
        neg,
        ElementKind::VariableResistor { ohms: r0, g_off },
    )?;
    let controller = net.add_controller(Box::new(PelController {
        name: name.to_string(),
        spec: spec.clone(),
        c_d,
        r_l,
        link: DcLinkState::connected(u0),
        u_prev: u0,
        r: r0,
        apfc,
        events: Vec::new(),
    }));
    Ok(PelHandle {
        name: name.to_string(),
        spec: spec.clone(),
        terminals: terminals.to_vec(),
        sense,
        c_d,
        r_l,
        controller,
    })
}

/// Three single-phase models across the line-to-line pairs ab, bc, ca.
pub fn delta_bank(
    net: &mut Netlist,
    name: &str,
    spec: &PelSpec,
    lines: [NodeId; 3],
) -> Result<[PelHandle; 3]> {
    if spec.pfc_kind.phases() != 1 {
        return Err(invalid(
            "pfc_kind",
            "a delta bank needs a single-phase load model",
        ));
    }
    let [a, b, c] = lines;
    Ok([
        build_pel(net, &format!("{name}.ab"), spec, &[a, b])?,
        build_pel(net, &format!("{name}.bc"), spec, &[b, c])?,
        build_pel(net, &format!("{name}.ca"), spec, &[c, a])?,
    ])
}
