//! TOML scenario files. Every section mirrors one domain type field by field; unknown
//! keys are errors. The grammar is described in the README.

use serde::de::DeserializeOwned;
use serde::Deserialize;

use super::{bench_solver, LoadChoice, Scenario};
use crate::error::{Error, Result};
use crate::grid::{AmplifierSpec, GridImpedanceSpec, SagProfile, TransformerSpec};
use crate::loads::{scale_to_power, ApfcMode, ApfcParams, PelSpec, PfcKind};

/// Controller states that can be recorded through `outputs.probes`.
pub const INTERNAL_KEYS: [&str; 6] = ["i_ref", "duty", "pi", "r_l", "connected", "u_d"];

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SourceSection {
    pub u_pre: Option<f64>,
    pub delta_u: Option<f64>,
    pub t_start: Option<f64>,
    pub t_fault: Option<f64>,
    pub frequency: Option<f64>,
    pub phase: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct AmplifierSection {
    /// `ideal` (default) or `laboratory`.
    pub preset: Option<String>,
    pub i_max_peak: Option<f64>,
    pub foldback_gain: Option<f64>,
    pub recovery_rate: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct TransformerSection {
    /// `auto` (default), `B`, `C` or `none`.
    pub kind: Option<String>,
    pub magnetizing: Option<bool>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct GridImpedanceSection {
    /// Laboratory branch of a load label (`PEL-1` to `PEL-3`).
    pub preset: Option<String>,
    pub r_grid: Option<f64>,
    pub l_grid: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ControllerSection {
    pub k_pu: Option<f64>,
    pub t_f: Option<f64>,
    pub k_p: Option<f64>,
    pub k_i: Option<f64>,
    pub f_s: Option<f64>,
    pub u_d_ref: Option<f64>,
    /// `averaged` or `switched`.
    pub mode: Option<String>,
    pub i_ref_max_pu: Option<f64>,
    pub band_pu: Option<f64>,
    pub tau_track: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct LoadSection {
    /// `pel` (default), `delta_bank` or `constant_power`.
    pub kind: Option<String>,
    pub preset: Option<String>,
    pub label: Option<String>,
    pub pfc_kind: Option<String>,
    pub p_r: Option<f64>,
    pub u_base: Option<f64>,
    pub x_cd_pu: Option<f64>,
    pub x_ld_pu: Option<f64>,
    pub u_off: Option<f64>,
    pub r_l_min: Option<f64>,
    pub reconnect_delay: Option<f64>,
    /// Rescale the model to this rated power (W) ...
    pub scale_p: Option<f64>,
    /// ... and base voltage (V).
    pub scale_u: Option<f64>,
    /// Constant-power load demand (W, var).
    pub p: Option<f64>,
    pub q: Option<f64>,
    pub controller: Option<ControllerSection>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    pub settle: Option<f64>,
    pub decimation: Option<usize>,
    pub max_switch_iterations: Option<usize>,
    pub newton_tolerance: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputsSection {
    /// Extra controller states to record (see [`INTERNAL_KEYS`]).
    #[serde(default)]
    pub probes: Vec<String>,
    /// Output directory; the CLI's `--out` takes precedence.
    pub dir: Option<String>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub depths: Option<Vec<f64>>,
    pub durations: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: Option<String>,
    #[serde(default)]
    pub source: SourceSection,
    #[serde(default)]
    pub amplifier: AmplifierSection,
    #[serde(default)]
    pub transformer: TransformerSection,
    pub grid_impedance: Option<GridImpedanceSection>,
    pub load: LoadSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub outputs: OutputsSection,
    #[serde(default)]
    pub sweep: SweepSection,
}

pub(crate) fn config_err(path: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Config {
        path: path.into(),
        message: message.into(),
    }
}

/// Deserializes TOML text, reporting the dotted path of the offending key.
pub fn parse_toml<T: DeserializeOwned>(text: &str) -> Result<T> {
    let de = toml::Deserializer::new(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let msg = inner.message().to_string();
        let at = inner
            .span()
            .map(|s| format!(" (line {})", 1 + text[..s.start].matches('\n').count()))
            .unwrap_or_default();
        config_err(if path == "." { String::new() } else { path }, format!("{msg}{at}"))
    })
}

/// Re-labels a validation error with the section it came from.
fn within(section: &'static str) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::InvalidSpec { field, reason } => config_err(
            if field.starts_with(section) {
                field
            } else {
                format!("{section}.{field}")
            },
            reason,
        ),
        other => other,
    }
}

impl SourceSection {
    pub fn profile(&self) -> Result<SagProfile> {
        let d = SagProfile::default();
        let p = SagProfile {
            u_pre: self.u_pre.unwrap_or(d.u_pre),
            delta_u: self.delta_u.unwrap_or(d.delta_u),
            t_start: self.t_start.unwrap_or(d.t_start),
            t_fault: self.t_fault.unwrap_or(d.t_fault),
            frequency: self.frequency.unwrap_or(d.frequency),
            phase: self.phase.unwrap_or(d.phase),
        };
        p.validate().map_err(within("source"))?;
        Ok(p)
    }
}

impl AmplifierSection {
    fn spec(&self) -> Result<AmplifierSpec> {
        let base = match self.preset.as_deref() {
            None | Some("ideal") => AmplifierSpec::ideal(),
            Some("laboratory") => AmplifierSpec::laboratory(),
            Some(o) => {
                return Err(config_err(
                    "amplifier.preset",
                    format!("unknown preset `{o}` (ideal, laboratory)"),
                ))
            }
        };
        let a = AmplifierSpec {
            i_max_peak: self.i_max_peak.unwrap_or(base.i_max_peak),
            foldback_gain: self.foldback_gain.unwrap_or(base.foldback_gain),
            recovery_rate: self.recovery_rate.unwrap_or(base.recovery_rate),
        };
        a.validate().map_err(within("amplifier"))?;
        Ok(a)
    }
}

impl ControllerSection {
    fn params(&self) -> Result<ApfcParams> {
        let d = ApfcParams::pel3();
        let mode = match self.mode.as_deref() {
            None => d.mode,
            Some("averaged") => ApfcMode::Averaged,
            Some("switched") => ApfcMode::Switched,
            Some(o) => {
                return Err(config_err(
                    "load.controller.mode",
                    format!("unknown mode `{o}` (averaged, switched)"),
                ))
            }
        };
        Ok(ApfcParams {
            k_pu: self.k_pu.unwrap_or(d.k_pu),
            t_f: self.t_f.unwrap_or(d.t_f),
            k_p: self.k_p.unwrap_or(d.k_p),
            k_i: self.k_i.unwrap_or(d.k_i),
            f_s: self.f_s.unwrap_or(d.f_s),
            u_d_ref: self.u_d_ref.unwrap_or(d.u_d_ref),
            mode,
            i_ref_max_pu: self.i_ref_max_pu.unwrap_or(d.i_ref_max_pu),
            band_pu: self.band_pu.unwrap_or(d.band_pu),
            tau_track: self.tau_track.unwrap_or(d.tau_track),
        })
    }
}

impl LoadSection {
    /// The load model described by the section: a preset with field overrides, or a
    /// full definition.
    pub fn pel_spec(&self) -> Result<PelSpec> {
        let mut spec = match &self.preset {
            Some(p) => PelSpec::preset(p).ok_or_else(|| {
                config_err(
                    "load.preset",
                    format!("unknown preset `{p}` ({})", PelSpec::PRESETS.join(", ")),
                )
            })?,
            None => {
                let kind = self
                    .pfc_kind
                    .as_deref()
                    .ok_or_else(|| config_err("load.pfc_kind", "required without a preset"))?;
                let need = |v: Option<f64>, f: &str| {
                    v.ok_or_else(|| config_err(format!("load.{f}"), "required without a preset"))
                };
                PelSpec {
                    label: self.label.clone().unwrap_or_else(|| "custom".into()),
                    pfc_kind: parse_kind(kind)?,
                    p_r: need(self.p_r, "p_r")?,
                    u_base: self.u_base.unwrap_or(230.0),
                    x_cd_pu: need(self.x_cd_pu, "x_cd_pu")?,
                    x_ld_pu: None,
                    u_off: self.u_off.unwrap_or(0.0),
                    r_l_min: None,
                    reconnect_delay: None,
                    controller: None,
                }
            }
        };
        if let Some(l) = &self.label {
            spec.label = l.clone();
        }
        if let Some(k) = &self.pfc_kind {
            spec.pfc_kind = parse_kind(k)?;
        }
        macro_rules! set {
            ($($f:ident),*) => {$(
                if let Some(v) = self.$f { spec.$f = v; }
            )*};
        }
        set!(p_r, u_base, x_cd_pu, u_off);
        macro_rules! set_opt {
            ($($f:ident),*) => {$(
                if self.$f.is_some() { spec.$f = self.$f; }
            )*};
        }
        set_opt!(x_ld_pu, r_l_min, reconnect_delay);
        if let Some(c) = &self.controller {
            if spec.pfc_kind != PfcKind::Active1ph {
                return Err(config_err(
                    "load.controller",
                    "only an active-1ph load takes a controller",
                ));
            }
            let mut params = c.params()?;
            if self.preset.is_some() && c.k_pu.is_none() {
                params.k_pu = 1.0 / (spec.u_base * std::f64::consts::SQRT_2);
            }
            spec.controller = Some(params);
        } else if spec.pfc_kind == PfcKind::Active1ph && spec.controller.is_none() {
            spec.controller = Some(ApfcParams::pel3());
        }
        spec.validate().map_err(within("load"))?;
        match (self.scale_p, self.scale_u) {
            (None, None) => Ok(spec),
            (p, u) => scale_to_power(&spec, p.unwrap_or(spec.p_r), u.unwrap_or(spec.u_base))
                .map_err(within("load")),
        }
    }

    fn choice(&self) -> Result<LoadChoice> {
        match self.kind.as_deref().unwrap_or("pel") {
            "pel" | "delta_bank" => {
                for (f, v) in [("p", self.p), ("q", self.q)] {
                    if v.is_some() {
                        return Err(config_err(
                            format!("load.{f}"),
                            "only for kind = \"constant_power\"",
                        ));
                    }
                }
                let spec = self.pel_spec()?;
                Ok(if self.kind.as_deref() == Some("delta_bank") {
                    LoadChoice::DeltaBank(spec)
                } else {
                    LoadChoice::Pel(spec)
                })
            }
            "constant_power" => {
                if self.preset.is_some() || self.pfc_kind.is_some() || self.controller.is_some() {
                    return Err(config_err(
                        "load.kind",
                        "a constant-power load takes only `p` and `q`",
                    ));
                }
                let p = self
                    .p
                    .ok_or_else(|| config_err("load.p", "required for a constant-power load"))?;
                Ok(LoadChoice::ConstantPower {
                    p,
                    q: self.q.unwrap_or(0.0),
                })
            }
            o => Err(config_err(
                "load.kind",
                format!("unknown kind `{o}` (pel, delta_bank, constant_power)"),
            )),
        }
    }
}

fn parse_kind(s: &str) -> Result<PfcKind> {
    PfcKind::parse(s).ok_or_else(|| {
        config_err(
            "load.pfc_kind",
            format!("unknown kind `{s}` (none, passive-1ph, active-1ph, passive-3ph)"),
        )
    })
}

impl ScenarioFile {
    pub fn to_scenario(&self) -> Result<Scenario> {
        let source = self.source.profile()?;
        let load = self.load.choice()?;
        let mut sc = Scenario::bench(load, source);
        if let Some(n) = &self.name {
            sc.name = n.clone();
        }
        sc.amplifier = self.amplifier.spec()?;

        let magnetizing = self.transformer.magnetizing.unwrap_or(false);
        let pick = |t: TransformerSpec| TransformerSpec { magnetizing, ..t };
        sc.transformer = match self.transformer.kind.as_deref().unwrap_or("auto") {
            "auto" => sc.transformer.map(pick),
            "B" | "b" => Some(pick(TransformerSpec::single_phase_b())),
            "C" | "c" => Some(pick(TransformerSpec::three_phase_c())),
            "none" => None,
            o => {
                return Err(config_err(
                    "transformer.kind",
                    format!("unknown kind `{o}` (auto, B, C, none)"),
                ))
            }
        };

        sc.grid_impedance = match &self.grid_impedance {
            None => None,
            Some(g) => {
                let base = match &g.preset {
                    Some(l) => GridImpedanceSpec::laboratory(l).ok_or_else(|| {
                        config_err(
                            "grid_impedance.preset",
                            format!("no laboratory branch for `{l}` (PEL-1, PEL-2, PEL-3)"),
                        )
                    })?,
                    None => GridImpedanceSpec {
                        r_grid: 0.0,
                        l_grid: 0.0,
                    },
                };
                Some(GridImpedanceSpec {
                    r_grid: g.r_grid.unwrap_or(base.r_grid),
                    l_grid: g.l_grid.unwrap_or(base.l_grid),
                })
            }
        };

        let s = &self.solver;
        let mut solver = bench_solver(sc.load.switched());
        if let Some(v) = s.dt {
            solver.dt = v;
        }
        if let Some(v) = s.t_end {
            solver.t_end = v;
        }
        if let Some(v) = s.settle {
            solver.settle = v;
        }
        if let Some(v) = s.decimation {
            solver.decimation = v;
        }
        if let Some(v) = s.max_switch_iterations {
            solver.max_switch_iterations = v;
        }
        if let Some(v) = s.newton_tolerance {
            solver.newton_tolerance = v;
        }
        sc.solver = solver;

        for (k, p) in self.outputs.probes.iter().enumerate() {
            let key = INTERNAL_KEYS
                .iter()
                .find(|&&k| k == p)
                .ok_or_else(|| {
                    config_err(
                        format!("outputs.probes[{k}]"),
                        format!("unknown probe `{p}` ({})", INTERNAL_KEYS.join(", ")),
                    )
                })?;
            if !matches!(sc.load, LoadChoice::Pel(_)) {
                return Err(config_err(
                    format!("outputs.probes[{k}]"),
                    "controller probes need kind = \"pel\"",
                ));
            }
            sc.internal_probes.push((p.clone(), key));
        }

        sc.validate().map_err(|e| match e {
            Error::InvalidSpec { field, reason } => config_err(field, reason),
            other => other,
        })?;
        Ok(sc)
    }

    pub fn sweep_lists(&self) -> (Vec<f64>, Vec<f64>) {
        (
            self.sweep
                .depths
                .clone()
                .unwrap_or_else(|| super::STANDARD_DEPTHS.to_vec()),
            self.sweep
                .durations
                .clone()
                .unwrap_or_else(|| super::STANDARD_DURATIONS.to_vec()),
        )
    }
}

/// Parses and validates a scenario file.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    parse_toml::<ScenarioFile>(text)?.to_scenario()
}
