//! Supply side of the test bench: programmable sag source, the amplifier's current
//! fold-back, and series R-L branches for transformers and grid impedances.

use std::f64::consts::{PI, SQRT_2};
use std::sync::Arc;

use crate::circuit::{
    BranchId, Commands, Controller, Diagnostic, ElementKind, Netlist, NodeId, StepView, Waveform,
};
use crate::error::{invalid, Result};

/// Rectangular RMS envelope: `u_pre` outside the fault window, `u_pre (1 - delta_u)` inside.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SagProfile {
    pub u_pre: f64,
    pub delta_u: f64,
    pub t_start: f64,
    pub t_fault: f64,
    pub frequency: f64,
    pub phase: f64,
}

impl Default for SagProfile {
    fn default() -> Self {
        Self {
            u_pre: 230.0,
            delta_u: 0.0,
            t_start: 0.04,
            t_fault: 0.1,
            frequency: 50.0,
            phase: 0.0,
        }
    }
}

impl SagProfile {
    pub fn sag(delta_u: f64, t_fault: f64) -> Self {
        Self {
            delta_u,
            t_fault,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.delta_u) {
            return Err(invalid(
                "delta_u",
                format!("depth {} out of [0, 1]", self.delta_u),
            ));
        }
        if !(self.t_fault >= 0.0) {
            return Err(invalid("t_fault", "must not be negative"));
        }
        if !(self.u_pre >= 0.0 && self.u_pre.is_finite()) {
            return Err(invalid("u_pre", "must be a finite non-negative voltage"));
        }
        if !(self.frequency > 0.0) {
            return Err(invalid("frequency", "must be positive"));
        }
        if !self.t_start.is_finite() || !self.phase.is_finite() {
            return Err(invalid("t_start", "must be finite"));
        }
        Ok(())
    }

    pub fn t_clear(&self) -> f64 {
        self.t_start + self.t_fault
    }

    pub fn in_fault(&self, t: f64) -> bool {
        t >= self.t_start && t < self.t_clear()
    }

    pub fn rms(&self, t: f64) -> f64 {
        if self.in_fault(t) {
            self.u_pre * (1.0 - self.delta_u)
        } else {
            self.u_pre
        }
    }

    pub fn period(&self) -> f64 {
        1.0 / self.frequency
    }
}

/// Instantaneous source voltage of the sag profile.
pub fn sag_voltage(profile: &SagProfile, t: f64) -> f64 {
    sag_voltage_shifted(profile, 0.0, t)
}

fn sag_voltage_shifted(profile: &SagProfile, shift: f64, t: f64) -> f64 {
    SQRT_2 * profile.rms(t) * (2.0 * PI * profile.frequency * t + profile.phase + shift).sin()
}

/// Phase shifts of a positive-sequence three-phase set.
pub const PHASE_SHIFTS: [f64; 3] = [0.0, -2.0 * PI / 3.0, 2.0 * PI / 3.0];

/// [`SagProfile`] as a solver waveform, optionally shifted for a three-phase set.
#[derive(Debug, Clone)]
pub struct SagWaveform {
    pub profile: SagProfile,
    pub shift: f64,
}

impl Waveform for SagWaveform {
    fn value(&self, t: f64) -> f64 {
        sag_voltage_shifted(&self.profile, self.shift, t)
    }
}

/// Current protection of the power amplifier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmplifierSpec {
    pub i_max_peak: f64,
    /// Amplitude reduction per ampere above the limit (V/A). Zero gives an ideal source.
    pub foldback_gain: f64,
    /// Rate at which the amplitude returns once the current is back under the limit (V/s).
    pub recovery_rate: f64,
}

impl AmplifierSpec {
    /// Stiff source without any current protection.
    pub fn ideal() -> Self {
        Self {
            i_max_peak: 30.0,
            foldback_gain: 0.0,
            recovery_rate: 10e3,
        }
    }

    /// Laboratory amplifier with the fold-back protection switched on.
    pub fn laboratory() -> Self {
        Self {
            foldback_gain: 5.0,
            ..Self::ideal()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.i_max_peak > 0.0) {
            return Err(invalid("i_max_peak", "must be positive"));
        }
        if !(self.foldback_gain >= 0.0) {
            return Err(invalid("foldback_gain", "must not be negative"));
        }
        if !(self.recovery_rate > 0.0) {
            return Err(invalid("recovery_rate", "must be positive"));
        }
        Ok(())
    }
}

impl Default for AmplifierSpec {
    fn default() -> Self {
        Self::ideal()
    }
}

#[derive(Clone)]
struct Foldback {
    name: String,
    branch: BranchId,
    profile: SagProfile,
    spec: AmplifierSpec,
    droop: f64,
    gain: f64,
    first_active: Option<f64>,
    active_steps: u64,
}

impl Controller for Foldback {
    fn update(&mut self, view: &StepView<'_>, cmd: &mut Commands<'_>) {
        let excess = (view.current(self.branch).abs() - self.spec.i_max_peak).max(0.0);
        let demanded = self.spec.foldback_gain * excess;
        if demanded >= self.droop {
            self.droop = demanded;
        } else {
            self.droop = (self.droop - self.spec.recovery_rate * view.dt).max(demanded);
        }
        let t_next = view.t + view.dt;
        let peak = SQRT_2 * self.profile.rms(t_next);
        self.gain = if self.droop > 0.0 && peak > 0.0 {
            (1.0 - self.droop / peak).max(0.0)
        } else {
            1.0
        };
        if excess > 0.0 {
            self.active_steps += 1;
            self.first_active.get_or_insert(view.t);
        }
        cmd.set_gain(self.branch, self.gain);
    }

    fn internal(&self, key: &str) -> Option<f64> {
        match key {
            "droop" => Some(self.droop),
            "gain" => Some(self.gain),
            _ => None,
        }
    }

    fn diagnostics(&self) -> Vec<Diagnostic> {
        self.first_active
            .map(|t| Diagnostic {
                source: self.name.clone(),
                t,
                message: format!(
                    "current limit exceeded, output reduced on {} steps",
                    self.active_steps
                ),
            })
            .into_iter()
            .collect()
    }

    fn clone_box(&self) -> Box<dyn Controller> {
        Box::new(self.clone())
    }
}

/// Adds the amplifier output between `pos` and `neg`.
///
/// With a non-zero fold-back gain a controller reduces the emitted amplitude while
/// `|i|` exceeds the limit; the returned controller index is `None` for an ideal source.
pub fn amplifier_source(
    net: &mut Netlist,
    name: &str,
    pos: NodeId,
    neg: NodeId,
    profile: &SagProfile,
    shift: f64,
    spec: &AmplifierSpec,
) -> Result<(BranchId, Option<usize>)> {
    profile.validate()?;
    spec.validate()?;
    let waveform = Arc::new(SagWaveform {
        profile: *profile,
        shift,
    });
    let branch = net.add(name, pos, neg, ElementKind::VoltageSource { waveform })?;
    if spec.foldback_gain == 0.0 {
        return Ok((branch, None));
    }
    let ctrl = net.add_controller(Box::new(Foldback {
        name: name.to_string(),
        branch,
        profile: *profile,
        spec: *spec,
        droop: 0.0,
        gain: 1.0,
        first_active: None,
        active_steps: 0,
    }));
    Ok((branch, Some(ctrl)))
}

/// Adds a series R-L between `a` and `b`, with an internal node when both parts are present.
pub fn series_impedance_branch(
    net: &mut Netlist,
    name: &str,
    a: NodeId,
    b: NodeId,
    r: f64,
    l: f64,
) -> Result<()> {
    if !(r >= 0.0 && l >= 0.0) {
        return Err(invalid(name, "series resistance and inductance must not be negative"));
    }
    match (r > 0.0, l > 0.0) {
        (false, false) => Err(invalid(
            name,
            "series branch with zero resistance and zero inductance",
        )),
        (true, false) => net.resistor(&format!("{name}.r"), a, b, r).map(drop),
        (false, true) => net.inductor(&format!("{name}.l"), a, b, l).map(drop),
        (true, true) => {
            let mid = net.node(&format!("{name}.m"));
            net.resistor(&format!("{name}.r"), a, mid, r)?;
            net.inductor(&format!("{name}.l"), mid, b, l)?;
            Ok(())
        }
    }
}

/// One phase of a unity-ratio transformer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformerPhase {
    /// Sum of both winding resistances (Ω).
    pub r_w: f64,
    /// Sum of both leakage inductances (H).
    pub l_w: f64,
    pub r_fe: f64,
    pub l_m: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransformerSpec {
    pub phases: Vec<TransformerPhase>,
    /// Adds the iron-loss resistance and magnetizing inductance on the source side.
    pub magnetizing: bool,
}

impl TransformerSpec {
    /// Single-phase laboratory transformer "B".
    pub fn single_phase_b() -> Self {
        Self {
            phases: vec![TransformerPhase {
                r_w: 0.311,
                l_w: 0.472e-3,
                r_fe: 225.11,
                l_m: 1.29,
            }],
            magnetizing: false,
        }
    }

    /// Three-phase laboratory transformer "C".
    pub fn three_phase_c() -> Self {
        let p = |r_w, l_w, r_fe, l_m| TransformerPhase {
            r_w,
            l_w,
            r_fe,
            l_m,
        };
        Self {
            phases: vec![
                p(0.082, 0.221e-3, 192.39, 1.25),
                p(0.079, 0.226e-3, 532.39, 2.45),
                p(0.080, 0.223e-3, 203.09, 1.27),
            ],
            magnetizing: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !matches!(self.phases.len(), 1 | 3) {
            return Err(invalid("transformer", "phase count must be 1 or 3"));
        }
        for p in &self.phases {
            if !(p.r_w > 0.0 && p.l_w > 0.0 && p.r_fe > 0.0 && p.l_m > 0.0) {
                return Err(invalid("transformer", "all parameters must be positive"));
            }
        }
        Ok(())
    }

    /// Adds phase `k` between `primary` and `secondary`; the magnetizing branch returns to `neutral`.
    pub fn add_phase(
        &self,
        net: &mut Netlist,
        name: &str,
        k: usize,
        primary: NodeId,
        secondary: NodeId,
        neutral: NodeId,
    ) -> Result<()> {
        let p = self
            .phases
            .get(k)
            .ok_or_else(|| invalid("transformer", format!("no phase {k}")))?;
        series_impedance_branch(net, name, primary, secondary, p.r_w, p.l_w)?;
        if self.magnetizing {
            net.resistor(&format!("{name}.rfe"), primary, neutral, p.r_fe)?;
            net.inductor(&format!("{name}.lm"), primary, neutral, p.l_m)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridImpedanceSpec {
    pub r_grid: f64,
    pub l_grid: f64,
}

impl GridImpedanceSpec {
    /// Impedances realized in the laboratory for the first three loads.
    pub fn laboratory(label: &str) -> Option<Self> {
        let (r_grid, l_grid) = match label {
            "PEL-1" => (81.4, 107.73e-3),
            "PEL-2" => (22.8, 29.71e-3),
            "PEL-3" => (14.4, 20.81e-3),
            _ => return None,
        };
        Some(Self { r_grid, l_grid })
    }

    pub fn add(&self, net: &mut Netlist, name: &str, a: NodeId, b: NodeId) -> Result<()> {
        series_impedance_branch(net, name, a, b, self.r_grid, self.l_grid)
    }
}

impl From<crate::sizing::GridImpedance> for GridImpedanceSpec {
    fn from(g: crate::sizing::GridImpedance) -> Self {
        Self {
            r_grid: g.r,
            l_grid: g.l,
        }
    }
}
