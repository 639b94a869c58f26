//! Command-line front end: sizing calculators, bench simulations, sag sweeps, the
//! four-bus study and post-processing of recorded CSV files.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::analysis::csvio::{
    ingest_waveform_csv, read_fundamentals, write_fundamentals, write_summary, write_waveforms,
    CsvSchema, SummaryRow,
};
use crate::analysis::{compare_series, fundamental_pq, response_metrics, FundamentalSeries};
use crate::error::{Error, Result};
use crate::fourbus::{max_transfer, parse_fourbus, run_fourbus, FourBusLoad};
use crate::grid::SagProfile;
use crate::scenario::config::parse_toml;
use crate::scenario::{run_sag_matrix, simulate, ScenarioFile};
use crate::sizing::{
    boost_ld_for, classify, ld_from_pu, pu_from_cd, size_cd_holdup, solve_grid_impedance,
    BoostSizingInput, GridImpedanceTarget, HoldupSizingInput,
};

#[derive(Debug, Parser)]
#[command(name = "pelsim", version, about = "Power-electronic load simulator")]
pub struct Cli {
    /// Output directory (overrides `outputs.dir` of the config).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Time step override (s).
    #[arg(long, global = true)]
    pub dt: Option<f64>,
    /// Accepted for scripting; every run is deterministic.
    #[arg(long, global = true)]
    pub seedless: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Component sizing with the formulas used.
    Size(SizeArgs),
    /// Single bench scenario: waveforms, fundamentals and metrics as CSV.
    Simulate { config: PathBuf },
    /// Depth × duration sag matrix with a metrics summary.
    Sweep { config: PathBuf },
    /// Four-bus short-term voltage stability study.
    Fourbus { config: PathBuf },
    /// Response metrics of a recorded waveform or fundamentals file.
    Analyze(AnalyzeArgs),
    /// Error metrics of the second fundamentals file against the first.
    Compare { reference: PathBuf, candidate: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PfcArg {
    None,
    Passive,
    Active,
}

#[derive(Debug, Args)]
pub struct SizeArgs {
    /// Rated power (W).
    #[arg(long)]
    pub pr: f64,
    #[arg(long, value_enum, default_value_t = PfcArg::None)]
    pub pfc: PfcArg,
    /// Hold-up time (s).
    #[arg(long, default_value_t = 23e-3)]
    pub t_hold: f64,
    #[arg(long, default_value_t = 0.95)]
    pub eta: f64,
    #[arg(long, default_value_t = 230.0)]
    pub u_nom: f64,
    #[arg(long, default_value_t = 150.0)]
    pub u_min: f64,
    #[arg(long, default_value_t = 50.0)]
    pub frequency: f64,
    /// Per-unit reactance of the passive PFC inductor.
    #[arg(long, default_value_t = 0.03)]
    pub x_ld: f64,
    /// Boost switching frequency (Hz).
    #[arg(long, default_value_t = 165e3)]
    pub f_s: f64,
    #[arg(long, default_value_t = 0.5)]
    pub duty: f64,
    /// Minimum RMS input voltage of the boost stage (V).
    #[arg(long, default_value_t = 85.0)]
    pub u_g_min: f64,
    #[arg(long, default_value_t = 0.99)]
    pub pf: f64,
    /// Grid impedance magnitude on the load base (pu).
    #[arg(long, default_value_t = 0.1)]
    pub z_pu: f64,
    #[arg(long, default_value_t = 0.4)]
    pub x_over_r: f64,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    pub csv: PathBuf,
    /// Sag start (s).
    #[arg(long, default_value_t = 0.04)]
    pub t_start: f64,
    /// Sag duration (s).
    #[arg(long, default_value_t = 0.1)]
    pub t_fault: f64,
    #[arg(long, default_value_t = 50.0)]
    pub frequency: f64,
    /// Power base (W); taken from the file when it holds fundamentals.
    #[arg(long)]
    pub p_base: Option<f64>,
    /// Voltage column of a waveform file.
    #[arg(long, default_value = "u_load")]
    pub u: String,
    /// Current column of a waveform file.
    #[arg(long, default_value = "i_load")]
    pub i: String,
    /// Sample rate of a waveform file (Hz).
    #[arg(long, default_value_t = 100e3)]
    pub fs: f64,
}

/// Parses `args` (including the program name) and runs the command. Returns the exit
/// status: 0 on success, 1 on a failed run, 2 on a usage error.
pub fn dispatch<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match &cli.command {
        Command::Size(a) => size(a, &mut out),
        Command::Simulate { config } => simulate_cmd(cli, config, &mut out),
        Command::Sweep { config } => sweep_cmd(cli, config, &mut out),
        Command::Fourbus { config } => fourbus_cmd(cli, config, &mut out),
        Command::Analyze(a) => analyze(a, &mut out),
        Command::Compare {
            reference,
            candidate,
        } => {
            let a = read_fundamentals(reference, None)?;
            let b = read_fundamentals(candidate, None)?;
            let c = compare_series(&a, &b)?;
            writeln!(out, "samples = {}", c.samples)?;
            writeln!(out, "rmse_p_pu = {:.6}", c.rmse_p)?;
            writeln!(out, "rmse_q_pu = {:.6}", c.rmse_q)?;
            writeln!(out, "peak_error_pu = {:.6}", c.peak_error)?;
            Ok(())
        }
    }
}

fn size(a: &SizeArgs, out: &mut impl Write) -> Result<()> {
    let hold = HoldupSizingInput {
        p_r: a.pr,
        t_hold: a.t_hold,
        eta: a.eta,
        u_nom: a.u_nom,
        u_min: a.u_min,
    };
    let c_d = size_cd_holdup(&hold)?;
    writeln!(out, "class: {:?}", classify(a.pr))?;
    writeln!(
        out,
        "C_d = 2*P_r*t_hold / (eta*(U_nom^2 - U_min^2)) = 2*{}*{} / ({}*({}^2 - {}^2)) = {:.1} uF (x_Cd = {:.4} pu)",
        a.pr,
        a.t_hold,
        a.eta,
        a.u_nom,
        a.u_min,
        c_d * 1e6,
        pu_from_cd(c_d, a.pr, a.u_nom, a.frequency)
    )?;
    match a.pfc {
        PfcArg::None => {}
        PfcArg::Passive => {
            let l = ld_from_pu(a.x_ld, a.pr, a.u_nom, a.frequency);
            writeln!(
                out,
                "L_d = x_Ld*U_nom^2 / (2*pi*f*P_r) = {}*{}^2 / (2*pi*{}*{}) = {:.2} mH",
                a.x_ld,
                a.u_nom,
                a.frequency,
                a.pr,
                l * 1e3
            )?;
        }
        PfcArg::Active => {
            let input = BoostSizingInput {
                u_nom: a.u_nom,
                duty: a.duty,
                f_s: a.f_s,
                p_r: a.pr,
                eta: a.eta,
                u_g_min: a.u_g_min,
                pf: a.pf,
            };
            let l = boost_ld_for(&input)?;
            writeln!(
                out,
                "dI = 0.4*sqrt(2)*P_r / (eta*U_g,min*PF); L_d >= U_nom*D*(1-D) / (dI*f_s) = {:.3} mH",
                l * 1e3
            )?;
        }
    }
    let target = GridImpedanceTarget {
        p_r: a.pr,
        u_base: a.u_nom,
        z_pu: a.z_pu,
        x_over_r: a.x_over_r,
    };
    let g = solve_grid_impedance(&target, a.frequency)?;
    writeln!(
        out,
        "Z_grid = z*U^2/P_r, R = Z/sqrt(1+(X/R)^2), L = X/(2*pi*f): R = {:.2} Ohm, L = {:.2} mH",
        g.r,
        g.l * 1e3
    )?;
    Ok(())
}

fn read_config(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Config {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

fn out_dir(cli: &Cli, configured: Option<&str>) -> Result<PathBuf> {
    let dir = cli
        .out
        .clone()
        .or_else(|| configured.map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn load_scenario(cli: &Cli, config: &Path) -> Result<(ScenarioFile, crate::scenario::Scenario)> {
    let file: ScenarioFile = parse_toml(&read_config(config)?)?;
    let mut sc = file.to_scenario()?;
    if let Some(dt) = cli.dt {
        sc.solver.dt = dt;
        sc.validate()?;
    }
    Ok((file, sc))
}

fn simulate_cmd(cli: &Cli, config: &Path, out: &mut impl Write) -> Result<()> {
    let (file, sc) = load_scenario(cli, config)?;
    let dir = out_dir(cli, file.outputs.dir.as_deref())?;
    let r = simulate(&sc)?;
    write_waveforms(&dir.join("waveforms.csv"), &r.waveforms)?;
    write_fundamentals(&dir.join("fundamentals.csv"), &r.fundamentals)?;
    for d in &r.diagnostics {
        writeln!(out, "{:.4} s {}: {}", d.t, d.source, d.message)?;
    }
    if let Some(m) = r.metrics {
        write_summary(
            &dir.join("metrics.csv"),
            &[SummaryRow {
                delta_u: sc.source.delta_u,
                t_fault: sc.source.t_fault,
                metrics: m.clone(),
            }],
        )?;
        writeln!(
            out,
            "{}: pf_pre {:.3} ({}), restored {}, peak P {:.2} pu, disconnects {}",
            sc.name,
            m.pf_pre,
            m.q_sign_pre.label(),
            m.restored,
            m.p_peak,
            m.disconnects.len()
        )?;
    }
    writeln!(
        out,
        "energy residual {:.2e} (relative), output in {}",
        r.energy.relative_residual(),
        dir.display()
    )?;
    Ok(())
}

fn sweep_cmd(cli: &Cli, config: &Path, out: &mut impl Write) -> Result<()> {
    let (file, sc) = load_scenario(cli, config)?;
    let dir = out_dir(cli, file.outputs.dir.as_deref())?;
    let (depths, durations) = file.sweep_lists();
    let cells = run_sag_matrix(&sc, &depths, &durations)?;
    let mut rows = Vec::new();
    let mut failed = 0;
    for c in &cells {
        let tag = format!("du{}_tf{}", c.delta_u, c.t_fault);
        match &c.outcome {
            Ok(r) => {
                write_fundamentals(&dir.join(format!("{tag}_fundamentals.csv")), &r.fundamentals)?;
                match &r.metrics {
                    Some(m) => rows.push(SummaryRow {
                        delta_u: c.delta_u,
                        t_fault: c.t_fault,
                        metrics: m.clone(),
                    }),
                    None => writeln!(out, "{tag}: run ends before the sag is cleared")?,
                }
            }
            Err(e) => {
                failed += 1;
                writeln!(out, "{tag}: failed: {e}")?;
            }
        }
    }
    write_summary(&dir.join("summary.csv"), &rows)?;
    for r in &rows {
        writeln!(
            out,
            "du {:.2} tf {:.2}: restored {}, peak P {:.2} pu, disconnects {}",
            r.delta_u,
            r.t_fault,
            r.metrics.restored,
            r.metrics.p_peak,
            r.metrics.disconnects.len()
        )?;
    }
    if failed > 0 {
        return Err(Error::Analysis(format!("{failed} of {} cells failed", cells.len())));
    }
    Ok(())
}

fn fourbus_cmd(cli: &Cli, config: &Path, out: &mut impl Write) -> Result<()> {
    let text = read_config(config)?;
    let mut spec = parse_fourbus(&text)?;
    if let Some(dt) = cli.dt {
        spec.solver.dt = dt;
        spec.validate()?;
    }
    let dir = out_dir(cli, None)?;
    let pre = max_transfer(&spec, true)?;
    let post = max_transfer(&spec, false)?;
    writeln!(
        out,
        "maximum transfer: {:.1} MW at {:.3} pu (both lines), {:.1} MW at {:.3} pu (one line)",
        pre.p_max / 1e6,
        pre.u_at_max,
        post.p_max / 1e6,
        post.u_at_max
    )?;
    let r = run_fourbus(&spec)?;
    write_waveforms(&dir.join("waveforms.csv"), &r.waveforms)?;
    write_fundamentals(&dir.join("fundamentals.csv"), &r.fundamentals)?;
    let mut w = std::io::BufWriter::new(fs::File::create(dir.join("voltage.csv"))?);
    writeln!(w, "t,u_load_pu")?;
    for (t, u) in r.fundamentals.t.iter().zip(&r.u_load_pu) {
        writeln!(w, "{t},{u}")?;
    }
    w.flush()?;
    for d in &r.diagnostics {
        writeln!(out, "{:.4} s {}: {}", d.t, d.source, d.message)?;
    }
    let period = 1.0 / spec.frequency;
    writeln!(
        out,
        "pre-fault load voltage {:.3} pu; {}",
        r.u_pre_fault(spec.t_fault, period),
        match r.voltage_recovery_time(0.9) {
            Some(t) => format!("above 0.9 pu from {t:.3} s after clearing"),
            None => "load voltage does not recover above 0.9 pu".to_string(),
        }
    )?;
    if matches!(spec.load, FourBusLoad::ConstantPower { .. }) {
        writeln!(out, "constant-power collapse: {}", r.collapsed)?;
    }
    Ok(())
}

fn analyze(a: &AnalyzeArgs, out: &mut impl Write) -> Result<()> {
    let header = csv::Reader::from_path(&a.csv)?.headers()?.clone();
    let series: FundamentalSeries = if header.iter().any(|h| h == "p1") {
        read_fundamentals(&a.csv, a.p_base)?
    } else {
        let p_base = a
            .p_base
            .ok_or_else(|| Error::Analysis("--p-base is required for waveform files".into()))?;
        let set = ingest_waveform_csv(&a.csv, &CsvSchema::new("t", &[&a.u, &a.i]), a.fs)?;
        fundamental_pq(
            &set.time,
            set.channel(&a.u).expect("ingested"),
            set.channel(&a.i).expect("ingested"),
            a.frequency,
            a.fs,
            p_base,
        )?
    };
    let profile = SagProfile {
        t_start: a.t_start,
        t_fault: a.t_fault,
        frequency: a.frequency,
        ..SagProfile::default()
    };
    let m = response_metrics(&series, &profile, None)?;
    writeln!(out, "pf_pre = {:.4} ({})", m.pf_pre, m.q_sign_pre.label())?;
    writeln!(out, "p_pre_pu = {:.4}", m.p_pre_pu)?;
    writeln!(out, "dip_depth_pu = {:.4}", m.dip_depth)?;
    writeln!(out, "restored = {}", m.restored)?;
    writeln!(out, "p_intermediate_pu = {:.4}", m.p_intermediate)?;
    writeln!(out, "p_peak_pu = {:.4}", m.p_peak)?;
    writeln!(out, "q_peak_pu = {:.4}", m.q_peak)?;
    match m.t_recover {
        Some(t) => writeln!(out, "t_recover_s = {t:.4}")?,
        None => writeln!(out, "t_recover_s = none")?,
    }
    Ok(())
}
