//! Laboratory bench scenarios: sag source, transformer, optional grid impedance and
//! one load, plus the depth × duration sweep.

pub mod config;

use rayon::prelude::*;

use crate::analysis::{fundamental_pq, response_metrics, FundamentalSeries, ResponseMetrics};
use crate::circuit::{self, Diagnostic, EnergyLedger, Netlist, NodeId, SolverConfig, WaveformSet};
use crate::error::{invalid, Result};
use crate::grid::{
    amplifier_source, AmplifierSpec, GridImpedanceSpec, SagProfile, TransformerSpec, PHASE_SHIFTS,
};
use crate::loads::{build_pel, constant_power_load, delta_bank, ApfcMode, PelSpec};

pub use config::{parse_scenario, ScenarioFile};

#[derive(Debug, Clone, PartialEq)]
pub enum LoadChoice {
    Pel(PelSpec),
    /// Three single-phase models in delta; the spec's base voltage is line-to-line.
    DeltaBank(PelSpec),
    /// Three-phase constant-power load (total `p`, `q`).
    ConstantPower { p: f64, q: f64 },
}

impl LoadChoice {
    pub fn phases(&self) -> usize {
        match self {
            LoadChoice::Pel(s) => s.pfc_kind.phases(),
            LoadChoice::DeltaBank(_) | LoadChoice::ConstantPower { .. } => 3,
        }
    }

    /// Power base for per-unit results.
    pub fn p_base(&self) -> f64 {
        match self {
            LoadChoice::Pel(s) => s.p_r,
            LoadChoice::DeltaBank(s) => 3.0 * s.p_r,
            LoadChoice::ConstantPower { p, .. } => *p,
        }
    }

    fn switched(&self) -> bool {
        let spec = match self {
            LoadChoice::Pel(s) | LoadChoice::DeltaBank(s) => s,
            LoadChoice::ConstantPower { .. } => return false,
        };
        spec.controller.is_some_and(|c| c.mode == ApfcMode::Switched)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub source: SagProfile,
    pub amplifier: AmplifierSpec,
    pub transformer: Option<TransformerSpec>,
    pub grid_impedance: Option<GridImpedanceSpec>,
    pub load: LoadChoice,
    pub solver: SolverConfig,
    /// Extra controller states to record, as (probe name, key).
    pub internal_probes: Vec<(String, &'static str)>,
}

/// Solver settings used for bench runs: 100 kHz output, 0.4 s unrecorded pre-roll.
pub fn bench_solver(switched: bool) -> SolverConfig {
    let (dt, decimation) = if switched { (0.25e-6, 40) } else { (1e-6, 10) };
    SolverConfig {
        dt,
        t_end: 0.5,
        settle: 0.4,
        decimation,
        ..SolverConfig::default()
    }
}

impl Scenario {
    /// Bench with a stiff source, the matching laboratory transformer and no grid impedance.
    pub fn bench(load: LoadChoice, source: SagProfile) -> Self {
        let transformer = Some(if load.phases() == 3 {
            TransformerSpec::three_phase_c()
        } else {
            TransformerSpec::single_phase_b()
        });
        let solver = bench_solver(load.switched());
        Self {
            name: "bench".into(),
            source,
            amplifier: AmplifierSpec::ideal(),
            transformer,
            grid_impedance: None,
            load,
            solver,
            internal_probes: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.source.validate()?;
        self.amplifier.validate()?;
        if let Some(t) = &self.transformer {
            t.validate()?;
            if t.phases.len() != self.load.phases() {
                return Err(invalid(
                    "transformer",
                    format!(
                        "{}-phase transformer with a {}-phase load",
                        t.phases.len(),
                        self.load.phases()
                    ),
                ));
            }
        }
        if let Some(g) = &self.grid_impedance {
            if !(g.r_grid >= 0.0 && g.l_grid >= 0.0) || g.r_grid + g.l_grid == 0.0 {
                return Err(invalid("grid_impedance", "needs a non-zero R or L"));
            }
        }
        match &self.load {
            LoadChoice::Pel(s) => s.validate()?,
            LoadChoice::DeltaBank(s) => {
                s.validate()?;
                if s.pfc_kind.phases() != 1 {
                    return Err(invalid("load", "delta bank needs a single-phase model"));
                }
            }
            LoadChoice::ConstantPower { p, .. } => {
                if !(*p > 0.0) {
                    return Err(invalid("load.p", "must be positive"));
                }
            }
        }
        self.solver.validate()
    }

    /// Same scenario with another sag depth and duration.
    pub fn with_sag(&self, delta_u: f64, t_fault: f64) -> Self {
        let mut s = self.clone();
        s.source.delta_u = delta_u;
        s.source.t_fault = t_fault;
        s
    }
}

/// Builds the bench netlist. Probes follow the waveform CSV schema.
pub fn build_bench(sc: &Scenario) -> Result<Netlist> {
    sc.validate()?;
    let mut net = Netlist::new();
    let phases = sc.load.phases();
    let tags = ["a", "b", "c"];
    let mut load_nodes = Vec::new();
    for k in 0..phases {
        let sfx = if phases == 1 {
            String::new()
        } else {
            format!("_{}", tags[k])
        };
        let s = net.node(&format!("src{sfx}"));
        amplifier_source(
            &mut net,
            &format!("amp{sfx}"),
            s,
            NodeId::GROUND,
            &sc.source,
            PHASE_SHIFTS[k],
            &sc.amplifier,
        )?;
        let mut at = s;
        if let Some(t) = &sc.transformer {
            let next = net.node(&format!("sec{sfx}"));
            t.add_phase(&mut net, &format!("tr{sfx}"), k, at, next, NodeId::GROUND)?;
            at = next;
        }
        if let Some(g) = &sc.grid_impedance {
            let next = net.node(&format!("load{sfx}"));
            g.add(&mut net, &format!("zg{sfx}"), at, next)?;
            at = next;
        }
        load_nodes.push(at);
    }
    match &sc.load {
        LoadChoice::Pel(spec) => {
            let terms = if phases == 1 {
                vec![load_nodes[0], NodeId::GROUND]
            } else {
                load_nodes.clone()
            };
            let h = build_pel(&mut net, "load", spec, &terms)?;
            h.add_probes(&mut net, "");
            for (name, key) in &sc.internal_probes {
                h.probe_internal(&mut net, name, key);
            }
        }
        LoadChoice::DeltaBank(spec) => {
            let hs = delta_bank(&mut net, "bank", spec, [load_nodes[0], load_nodes[1], load_nodes[2]])?;
            for (h, leg) in hs.iter().zip(["ab", "bc", "ca"]) {
                h.add_probes(&mut net, &format!("{leg}."));
            }
        }
        LoadChoice::ConstantPower { p, q } => {
            let h = constant_power_load(
                &mut net,
                "cpl",
                *p,
                *q,
                &load_nodes,
                sc.source.u_pre,
                sc.source.frequency,
            )?;
            for (k, &n) in load_nodes.iter().enumerate() {
                net.probe(
                    format!("u_load_{}", tags[k]),
                    circuit::ProbeKind::NodeVoltage(n),
                );
            }
            for (k, &b) in h.sense.iter().enumerate() {
                net.probe(
                    format!("i_load_{}", tags[k]),
                    circuit::ProbeKind::BranchCurrent(b),
                );
            }
        }
    }
    Ok(net)
}

#[derive(Debug, Clone)]
pub struct SimResult {
    pub waveforms: WaveformSet,
    pub fundamentals: FundamentalSeries,
    /// Present when the recorded interval extends past the fault clearing.
    pub metrics: Option<ResponseMetrics>,
    pub diagnostics: Vec<Diagnostic>,
    pub energy: EnergyLedger,
}

/// (voltage, current) channel pairs whose fundamental powers add up to the load's total.
fn power_channels(set: &WaveformSet) -> Vec<(String, String)> {
    let names: Vec<&str> = set.names().collect();
    let mut out = Vec::new();
    for n in &names {
        if let Some(rest) = n.strip_suffix("u_load").map(|p| (p, "")).or_else(|| {
            ["_a", "_b", "_c"]
                .iter()
                .find_map(|s| n.strip_suffix(&format!("u_load{s}")[..]).map(|p| (p, *s)))
        }) {
            let (prefix, sfx) = rest;
            let i = format!("{prefix}i_load{sfx}");
            if names.contains(&i.as_str()) {
                out.push((n.to_string(), i));
            }
        }
    }
    out
}

/// Total fundamental P/Q of all load channels in a waveform set.
pub fn load_fundamentals(set: &WaveformSet, f0: f64, p_base: f64) -> Result<FundamentalSeries> {
    let fs = set
        .sample_rate()
        .ok_or_else(|| invalid("waveforms", "need at least two samples"))?;
    let fs = (fs * 1e3).round() / 1e3;
    let parts = power_channels(set)
        .iter()
        .map(|(u, i)| {
            fundamental_pq(
                &set.time,
                set.channel(u).expect("listed"),
                set.channel(i).expect("listed"),
                f0,
                fs,
                p_base,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    FundamentalSeries::sum(&parts, p_base)
}

/// Connection trace on the fundamental series' time grid: true while every load is on.
fn connection_trace(set: &WaveformSet, skip: usize) -> Option<Vec<bool>> {
    let chans: Vec<&[f64]> = set
        .channels
        .iter()
        .filter(|(n, _)| n.ends_with("connected"))
        .map(|(_, v)| v.as_slice())
        .collect();
    if chans.is_empty() {
        return None;
    }
    Some(
        (skip..set.len())
            .map(|k| chans.iter().all(|c| c[k] > 0.5))
            .collect(),
    )
}

pub fn simulate(sc: &Scenario) -> Result<SimResult> {
    let net = build_bench(sc)?;
    let out = circuit::run(net, sc.solver.clone())?;
    let f0 = sc.source.frequency;
    let fundamentals = load_fundamentals(&out.waveforms, f0, sc.load.p_base())?;
    let skip = out.waveforms.len() - fundamentals.len();
    let conn = connection_trace(&out.waveforms, skip);
    let covers = fundamentals
        .t
        .last()
        .is_some_and(|&t| t >= sc.source.t_clear());
    let metrics = if covers {
        Some(response_metrics(&fundamentals, &sc.source, conn.as_deref())?)
    } else {
        None
    };
    Ok(SimResult {
        waveforms: out.waveforms,
        fundamentals,
        metrics,
        diagnostics: out.diagnostics,
        energy: out.energy,
    })
}

#[derive(Debug, Clone)]
pub struct SweepCell {
    pub delta_u: f64,
    pub t_fault: f64,
    pub outcome: std::result::Result<SimResult, String>,
}

/// One independent simulation per (depth, duration) pair, run in parallel.
/// Failed cells keep their error message; the others are unaffected.
pub fn run_sag_matrix(sc: &Scenario, depths: &[f64], durations: &[f64]) -> Result<Vec<SweepCell>> {
    if depths.is_empty() || durations.is_empty() {
        return Err(invalid("sweep", "depth and duration lists must not be empty"));
    }
    let cells: Vec<(f64, f64)> = durations
        .iter()
        .flat_map(|&d| depths.iter().map(move |&u| (u, d)))
        .collect();
    Ok(cells
        .par_iter()
        .map(|&(delta_u, t_fault)| SweepCell {
            delta_u,
            t_fault,
            outcome: simulate(&sc.with_sag(delta_u, t_fault)).map_err(|e| e.to_string()),
        })
        .collect())
}

/// Sag depths 0.2 to 1.0 pu in steps of 0.2.
pub const STANDARD_DEPTHS: [f64; 5] = [0.2, 0.4, 0.6, 0.8, 1.0];
/// Fault durations of the laboratory sweep (s).
pub const STANDARD_DURATIONS: [f64; 2] = [0.1, 0.16];

pub fn pel_bench(label: &str, delta_u: f64, t_fault: f64) -> Result<Scenario> {
    let spec = PelSpec::preset(label).ok_or_else(|| invalid("load", format!("unknown preset {label}")))?;
    Ok(Scenario::bench(LoadChoice::Pel(spec), SagProfile::sag(delta_u, t_fault)))
}
