//! Command-line front end: one subcommand per module, CSV/JSON outputs and
//! a run manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::chip_model::{characterize_trap, TABLE_HEADER};
use crate::classical_sim::{integrate, perturbation_response, ramp_time_scan, ForceModel, Perturbation, TRAJECTORY_HEADER};
use crate::config::{resolve, RunConfig};
use crate::error::{Error, Result};
use crate::figures::{range_values, reproduce, Check, FigureId, FigureOptions};
use crate::gpe_sim::{simulate_transport, GpeSequenceSettings, GpeSettings, GroundStateSettings, PotentialMode, OBSERVABLES_HEADER};
use crate::mode_analysis::{analyze_series, cylindrical_approximation, mode_frequencies, SpectrumOptions};
use crate::output::{read_csv, write_atomic, write_csv, write_json};
use crate::scaling_sim::SCALING_HEADER;
use crate::scenario::Scenario;
use crate::sequence::{optimize_hold_and_lens, run_sequence, run_sequence_with, Engine, SequencePlan, TransportStage, SCAN_HEADER};
use crate::sta_design::{design_ramp, steps_for, TrajectoryAnsatz, DEFAULT_DT, SCHEDULE_HEADER};
use crate::units::{MILLIGAUSS, MM, MS, PICOKELVIN, UM, US};

#[derive(Debug, Parser)]
#[command(name = "atomchip-sta", version, about = "Atom-chip transport, scaling and matter-wave lensing simulations")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Configuration file; falls back to $ATOMCHIP_STA_CONFIG, then the default preset.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Shipped preset name (quantus_z, quantus_dkc).
    #[arg(long, global = true, conflicts_with = "config")]
    pub preset: Option<String>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads for sweeps; 1 gives bitwise-reproducible output.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AnsatzArg {
    Poly9,
    Chirped,
    Linear,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelArg {
    Harmonic,
    Anharmonic,
}

impl From<ModelArg> for ForceModel {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Harmonic => ForceModel::Harmonic,
            ModelArg::Anharmonic => ForceModel::Anharmonic,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GpeModeArg {
    Harmonic,
    Anharmonic,
    Rotating,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EngineArg {
    Scaling,
    Gpe,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Trap position, frequencies, anharmonicity and tilt over the bias sweep.
    TrapTables,
    /// Reverse-engineer the trap schedule for a transport trajectory.
    DesignRamp(DesignRampArgs),
    /// Centre-of-mass transport with RK4.
    SimulateClassical(ClassicalArgs),
    /// Scaling-equation run of the configured transport and lensing sequence.
    SimulateScaling(ScalingArgs),
    /// Mean-field transport on a grid.
    SimulateGpe(GpeArgs),
    /// Spectrum and mode labels of a size series.
    AnalyzeModes(ModesArgs),
    /// Scan hold and lens durations for the lowest expansion temperature.
    DkcOptimize(DkcArgs),
    /// Emit the data behind one figure and check its headline numbers.
    Reproduce {
        /// fig3 to fig8
        figure: String,
        /// Grid for the mean-field part of fig6, as NX,NY,NZ.
        #[arg(long, value_parser = parse_grid)]
        grid: Option<[usize; 3]>,
    },
}

#[derive(Debug, Args)]
pub struct DesignRampArgs {
    #[arg(long, value_enum, default_value = "chirped")]
    pub ansatz: AnsatzArg,
    #[arg(long)]
    pub tf_ms: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub a: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub b: Option<f64>,
    #[arg(long)]
    pub zi_mm: Option<f64>,
    #[arg(long)]
    pub zf_mm: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ClassicalArgs {
    #[arg(long, value_enum, default_value = "anharmonic")]
    pub model: ModelArg,
    #[arg(long, default_value_t = 150.0)]
    pub hold_ms: f64,
    /// Ramp durations a:b:step in ms.
    #[arg(long)]
    pub scan_tf: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub delta_bias_mg: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub delta_tf_ms: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ScalingArgs {
    #[arg(long)]
    pub hold_ms: Option<f64>,
    #[arg(long)]
    pub lens_ms: Option<f64>,
    /// Release the weak axis at rest at its equilibrium size.
    #[arg(long)]
    pub adiabatic_weak_axis: bool,
}

#[derive(Debug, Args)]
pub struct GpeArgs {
    #[arg(long, value_enum, default_value = "harmonic")]
    pub mode: GpeModeArg,
    #[arg(long, value_parser = parse_grid, default_value = "32,32,32")]
    pub grid: [usize; 3],
    /// Fixed time step; adaptive when absent.
    #[arg(long)]
    pub dt_us: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub hold_ms: f64,
    /// Write the co-moving wavefunction at every output time.
    #[arg(long)]
    pub snapshots: bool,
}

#[derive(Debug, Args)]
pub struct ModesArgs {
    /// Observables CSV with a time column `t_s` or `t_hold_s`.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = "dX_m")]
    pub column: String,
    /// Ignore samples before this time (s).
    #[arg(long, default_value_t = 0.0)]
    pub from_s: f64,
}

#[derive(Debug, Args)]
pub struct DkcArgs {
    #[arg(long, default_value = "10:70:0.2")]
    pub hold_range_ms: String,
    #[arg(long, default_value = "2.84:6.84:0.25")]
    pub lens_range_ms: String,
    #[arg(long, value_enum, default_value = "scaling")]
    pub engine: EngineArg,
}

fn parse_grid(s: &str) -> std::result::Result<[usize; 3], String> {
    let parts: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>().map_err(|e| format!("bad grid size '{p}': {e}")))
        .collect::<std::result::Result<_, _>>()?;
    <[usize; 3]>::try_from(parts).map_err(|_| "grid must be NX,NY,NZ".to_string())
}

/// `a:b:step` in milliseconds, returned in seconds.
pub fn parse_range_ms(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<f64> = s
        .split(':')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Usage(format!("bad range '{s}': {e}")))?;
    match parts.as_slice() {
        [a, b, step] => range_values(a * MS, b * MS, step * MS),
        _ => Err(Error::Usage(format!("range '{s}' must be a:b:step"))),
    }
}

/// Provenance record written next to every run's outputs.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub arguments: Vec<String>,
    /// Numeric inputs converted to SI.
    pub inputs_si: BTreeMap<String, Value>,
    pub config_source: String,
    pub config_hash: String,
    pub version: String,
    pub started_unix_s: f64,
    pub finished_unix_s: f64,
    pub outputs: Vec<String>,
    pub checks: Vec<Check>,
}

fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64())
}

struct Session {
    out: PathBuf,
    outputs: Vec<String>,
    inputs: BTreeMap<String, Value>,
    checks: Vec<Check>,
}

impl Session {
    fn csv<R: AsRef<[f64]>>(&mut self, name: &str, header: &[&str], rows: &[R]) -> Result<()> {
        write_csv(&self.out.join(name), header, rows)?;
        self.outputs.push(name.into());
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        write_json(&self.out.join(name), value)?;
        self.outputs.push(name.into());
        Ok(())
    }

    fn input(&mut self, key: &str, value: impl Serialize) {
        self.inputs.insert(key.into(), json!(value));
    }
}

/// Parses `args`, runs the subcommand and returns the process exit code:
/// 0 on success, 1 when a check fails, 2 on usage errors, 3 on other errors.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args: Vec<std::ffi::OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let arguments = args.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    match execute(&cli, arguments) {
        Ok(manifest) => {
            for c in &manifest.checks {
                println!("{c}");
            }
            if manifest.checks.iter().all(|c| c.pass) {
                0
            } else {
                1
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Usage(_) => 2,
                _ => 3,
            }
        }
    }
}

/// Runs one parsed invocation and writes its manifest.
pub fn execute(cli: &Cli, arguments: Vec<String>) -> Result<RunManifest> {
    let started = unix_now();
    if let Some(n) = cli.global.workers {
        if n == 0 {
            return Err(Error::Usage("--workers must be at least 1".into()));
        }
        // A global pool can only be installed once per process.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let cfg = resolve(cli.global.config.as_deref(), cli.global.preset.as_deref())?;
    let mut s = Session {
        out: cli.global.out.clone(),
        outputs: Vec::new(),
        inputs: BTreeMap::new(),
        checks: Vec::new(),
    };
    if let Some(n) = cli.global.workers {
        s.input("workers", n);
    }
    let name = match &cli.command {
        Command::TrapTables => {
            trap_tables_cmd(&cfg, &mut s)?;
            "trap-tables"
        }
        Command::DesignRamp(a) => {
            design_ramp_cmd(&cfg, a, &mut s)?;
            "design-ramp"
        }
        Command::SimulateClassical(a) => {
            classical_cmd(&cfg, a, &mut s)?;
            "simulate-classical"
        }
        Command::SimulateScaling(a) => {
            scaling_cmd(&cfg, a, &mut s)?;
            "simulate-scaling"
        }
        Command::SimulateGpe(a) => {
            gpe_cmd(&cfg, a, &mut s)?;
            "simulate-gpe"
        }
        Command::AnalyzeModes(a) => {
            modes_cmd(&cfg, a, &mut s)?;
            "analyze-modes"
        }
        Command::DkcOptimize(a) => {
            dkc_cmd(&cfg, a, &mut s)?;
            "dkc-optimize"
        }
        Command::Reproduce { figure, grid } => {
            reproduce_cmd(&cfg, figure, *grid, &mut s)?;
            "reproduce"
        }
    };
    let manifest = RunManifest {
        subcommand: name.into(),
        arguments,
        inputs_si: s.inputs,
        config_source: cfg.source.clone(),
        config_hash: cfg.hash.clone(),
        version: env!("CARGO_PKG_VERSION").into(),
        started_unix_s: started,
        finished_unix_s: unix_now(),
        outputs: s.outputs,
        checks: s.checks,
    };
    let text = serde_json::to_string_pretty(&manifest)?;
    write_atomic(&cli.global.out.join("manifest.json"), format!("{text}\n").as_bytes())?;
    Ok(manifest)
}

fn trap_tables_cmd(cfg: &RunConfig, s: &mut Session) -> Result<()> {
    let sc = cfg.scenario()?;
    s.input("bias_min_T", cfg.transport.sweep_bias_min);
    s.input("bias_max_T", cfg.transport.sweep_bias_max);
    s.csv("trap_tables.csv", &TABLE_HEADER, &sc.tables.csv_rows())?;
    let endpoints = [cfg.transport.initial_bias, sc.final_bias]
        .iter()
        .map(|&b| characterize_trap(&cfg.chip.with_bias(b), &cfg.species))
        .collect::<Result<Vec<_>>>()?;
    s.json("trap_summary.json", &json!({ "fits": sc.landscape(), "endpoints": endpoints }))
}

fn design_ramp_cmd(cfg: &RunConfig, a: &DesignRampArgs, s: &mut Session) -> Result<()> {
    let sc = cfg.scenario()?;
    let z_i = a.zi_mm.map_or_else(|| sc.z_i(), |z| Ok(z * MM))?;
    let z_f = match a.zf_mm {
        Some(z) => z * MM,
        None => sc.z_f()?,
    };
    let t_f = a.tf_ms.map_or(cfg.transport.duration, |t| t * MS);
    let (ca, cb) = (a.a.unwrap_or(cfg.transport.chirp_a), a.b.unwrap_or(cfg.transport.chirp_b));
    let ansatz = match a.ansatz {
        AnsatzArg::Poly9 => TrajectoryAnsatz::polynomial9(z_i, z_f, t_f),
        AnsatzArg::Chirped => TrajectoryAnsatz::chirped(z_i, z_f, t_f, ca, cb),
        AnsatzArg::Linear => TrajectoryAnsatz::linear(z_i, z_f, t_f),
    };
    let steps = a.steps.unwrap_or_else(|| steps_for(t_f, DEFAULT_DT));
    s.input("ansatz", a.ansatz);
    s.input("z_i_m", z_i);
    s.input("z_f_m", z_f);
    s.input("t_f_s", t_f);
    s.input("chirp_a", ca);
    s.input("chirp_b", cb);
    s.input("steps", steps);
    let schedule = design_ramp(&ansatz, sc.landscape(), steps)?;
    s.csv("schedule.csv", &SCHEDULE_HEADER, &schedule.csv_rows())?;
    s.json("schedule_summary.json", &schedule.summary())
}

fn classical_cmd(cfg: &RunConfig, a: &ClassicalArgs, s: &mut Session) -> Result<()> {
    let sc = cfg.scenario()?;
    let l = sc.landscape();
    let model = ForceModel::from(a.model);
    let hold = a.hold_ms * MS;
    s.input("model", a.model);
    s.input("hold_s", hold);
    let template = cfg.chirped(&sc)?;
    let schedule = design_ramp(&template, l, steps_for(template.t_f, DEFAULT_DT))?;
    let run = integrate(&schedule, model, hold, l)?;
    s.csv("trajectory.csv", &TRAJECTORY_HEADER, &run.csv_rows())?;
    let mut metrics = json!({ "metrics": run.metrics, "substeps": run.substeps });
    if let Some(range) = &a.scan_tf {
        let tfs = parse_range_ms(range)?;
        s.input("scan_tf_s", &tfs);
        let scan = ramp_time_scan(&template, &tfs, l, model, hold, DEFAULT_DT)?;
        let rows: Vec<[f64; 5]> = tfs
            .iter()
            .zip(&scan)
            .map(|(t, m)| [*t, m.residual_amplitude, m.max_offset, m.max_deviation, m.anharmonicity_pct])
            .collect();
        s.csv(
            "tf_scan.csv",
            &["tf_s", "residual_m", "max_offset_m", "max_deviation_m", "anharmonicity_pct"],
            &rows,
        )?;
    }
    for (name, p) in [
        ("bias", a.delta_bias_mg.map(|d| Perturbation::Bias(d * MILLIGAUSS))),
        ("timing", a.delta_tf_ms.map(|d| Perturbation::Timing(d * MS))),
    ] {
        let Some(p) = p else { continue };
        s.input(&format!("{name}_perturbation_si"), p);
        let r = perturbation_response(&schedule, l, model, p, hold)?;
        let rows: Vec<[f64; 2]> = r.deviation.iter().map(|&(t, d)| [t, d]).collect();
        s.csv(&format!("{name}_response.csv"), &["t_s", "deviation_m"], &rows)?;
        metrics[format!("{name}_residual_m")] = json!(r.residual);
    }
    s.json("metrics.json", &metrics)
}

fn stage_for(cfg: &RunConfig) -> Result<(Scenario, TransportStage)> {
    let sc = cfg.scenario()?;
    let template = cfg.chirped(&sc)?;
    let schedule = design_ramp(&template, sc.landscape(), steps_for(template.t_f, DEFAULT_DT))?;
    let stage = TransportStage::new(&schedule, sc.landscape(), &sc.species)?;
    Ok((sc, stage))
}

fn scaling_cmd(cfg: &RunConfig, a: &ScalingArgs, s: &mut Session) -> Result<()> {
    let (_, stage) = stage_for(cfg)?;
    let mut plan = cfg.plan;
    plan.engine = Engine::Scaling;
    if let Some(h) = a.hold_ms {
        plan.hold = h * MS;
    }
    if let Some(l) = a.lens_ms {
        plan.lens.duration = l * MS;
    }
    plan.adiabatic_weak_axis = a.adiabatic_weak_axis;
    s.input("plan", plan);
    let report = run_sequence(&stage, &plan)?;
    let rows: Vec<[f64; 7]> = report
        .times
        .iter()
        .zip(&report.radii)
        .map(|(&t, r)| {
            let l: [f64; 3] = std::array::from_fn(|k| r[k] / stage.r0[k]);
            [t, l[0], l[1], l[2], r[0], r[1], r[2]]
        })
        .collect();
    s.csv("scaling.csv", &SCALING_HEADER, &rows)?;
    s.json("temperature.json", &temperature_summary(&report))
}

fn temperature_summary(report: &crate::sequence::SequenceReport) -> Value {
    json!({
        "T_pK": report.temperature.t3d / PICOKELVIN,
        "T1d_pK": report.temperature.t1d.map(|t| t / PICOKELVIN),
        "rates_um_s": report.rates.map(|r| r / UM),
        "rate_fit_residual_um": report.rate_residual.map(|r| r / UM),
    })
}

fn gpe_cmd(cfg: &RunConfig, a: &GpeArgs, s: &mut Session) -> Result<()> {
    let sc = cfg.scenario()?;
    let l = sc.landscape();
    let (mode, frame_model) = match a.mode {
        GpeModeArg::Harmonic => (PotentialMode::HarmonicFixed, ForceModel::Harmonic),
        GpeModeArg::Anharmonic => (PotentialMode::AnharmonicFixed, ForceModel::Anharmonic),
        GpeModeArg::Rotating => (PotentialMode::AnharmonicRotating, ForceModel::Anharmonic),
    };
    let settings = GpeSettings {
        mode,
        grid_n: a.grid,
        fixed_dt: a.dt_us.map(|d| d * US),
        ..GpeSettings::default()
    };
    let hold = a.hold_ms * MS;
    s.input("mode", a.mode);
    s.input("grid", a.grid);
    s.input("fixed_dt_s", settings.fixed_dt);
    s.input("hold_s", hold);
    let template = cfg.chirped(&sc)?;
    let schedule = design_ramp(&template, l, steps_for(template.t_f, DEFAULT_DT))?;
    let snap_dir = s.out.join("snapshots");
    if a.snapshots {
        std::fs::create_dir_all(&snap_dir)?;
    }
    let run = simulate_transport(
        &schedule,
        l,
        &sc.species,
        hold,
        frame_model,
        &settings,
        &GroundStateSettings::default(),
        a.snapshots.then_some(snap_dir.as_path()),
    )?;
    s.csv("observables.csv", &OBSERVABLES_HEADER, &run.csv_rows())?;
    if a.snapshots {
        s.outputs.push("snapshots/".into());
    }
    let spacing = run.grid.spacing()[2];
    let offset = run.observables.iter().map(|o| o.z_offset.abs()).fold(0.0, f64::max);
    let norm = run.observables.iter().map(|o| (o.norm - 1.0).abs()).fold(0.0, f64::max);
    s.json(
        "gpe_summary.json",
        &json!({
            "grid_spacing_m": run.grid.spacing(),
            "ground_iterations": run.ground_iterations,
            "ground_energy": run.ground_energy,
            "max_com_offset_m": offset,
            "max_norm_drift": norm,
        }),
    )?;
    if matches!(a.mode, GpeModeArg::Harmonic) {
        s.checks.push(Check::new("centre of mass follows the classical path", offset / spacing, "grid spacings", 0.0, 1.0));
    }
    s.checks.push(Check::new("norm drift", norm, "", 0.0, 1e-8));
    Ok(())
}

fn modes_cmd(cfg: &RunConfig, a: &ModesArgs, s: &mut Session) -> Result<()> {
    let table = read_csv(&a.input)?;
    let time = table
        .column("t_s")
        .or_else(|| table.column("t_hold_s"))
        .ok_or_else(|| Error::InvalidInput("input has no t_s or t_hold_s column".into()))?;
    let values = table
        .column(&a.column)
        .ok_or_else(|| Error::InvalidInput(format!("input has no column '{}'", a.column)))?;
    let (t, v): (Vec<f64>, Vec<f64>) = time.into_iter().zip(values).filter(|(t, _)| *t >= a.from_s).unzip();
    if t.len() < 2 {
        return Err(Error::SeriesTooShort(format!("{} samples after {} s", t.len(), a.from_s)));
    }
    let dt = (t[t.len() - 1] - t[0]) / (t.len() - 1) as f64;
    s.input("input", a.input.display().to_string());
    s.input("column", &a.column);
    s.input("from_s", a.from_s);
    s.input("sample_interval_s", dt);
    let sc = cfg.scenario()?;
    let omega = sc.landscape().omega2(sc.z_f()?).map(f64::sqrt);
    let (eta, perp) = cylindrical_approximation(omega);
    let modes = mode_frequencies(eta, perp)?;
    let spectrum = analyze_series(&v, dt, None, Some(&modes), &SpectrumOptions::default())?;
    s.csv("spectrum.csv", &["freq_Hz", "log_magnitude"], &spectrum.csv_rows())?;
    s.json(
        "peaks.json",
        &json!({ "eta": eta, "omega_perp_rad_s": perp, "modes": modes, "peaks": spectrum.peaks }),
    )
}

fn dkc_cmd(cfg: &RunConfig, a: &DkcArgs, s: &mut Session) -> Result<()> {
    let (_, stage) = stage_for(cfg)?;
    let holds = parse_range_ms(&a.hold_range_ms)?;
    let lenses = parse_range_ms(&a.lens_range_ms)?;
    s.input("hold_range_s", &holds);
    s.input("lens_range_s", &lenses);
    s.input("engine", a.engine);
    let template = SequencePlan {
        engine: Engine::Scaling,
        ..cfg.plan
    };
    let scan = optimize_hold_and_lens(&stage, &template, &holds, &lenses)?;
    s.csv("t_map.csv", &SCAN_HEADER, &scan.csv_rows())?;
    let best = match a.engine {
        EngineArg::Scaling => run_sequence(&stage, &scan.best)?,
        EngineArg::Gpe => run_sequence_with(
            &stage,
            &SequencePlan {
                engine: Engine::Gpe,
                ..scan.best
            },
            &GpeSequenceSettings::default(),
        )?,
    };
    s.json(
        "best_plan.json",
        &json!({
            "hold_ms": scan.best.hold / MS,
            "lens_ms": scan.best.lens.duration / MS,
            "scan_T_pK": scan.best_temperature / PICOKELVIN,
            "engine": a.engine,
            "result": temperature_summary(&best),
            "plan": scan.best,
        }),
    )
}

fn reproduce_cmd(cfg: &RunConfig, figure: &str, grid: Option<[usize; 3]>, s: &mut Session) -> Result<()> {
    let id: FigureId = figure.parse()?;
    let mut options = FigureOptions::default();
    if let Some(g) = grid {
        options.gpe_grid = g;
    }
    s.input("figure", id);
    s.input("gpe_grid", options.gpe_grid);
    let bundle = reproduce(id, cfg, &options)?;
    let dir = Path::new(&id.to_string()).to_path_buf();
    for t in &bundle.tables {
        let header: Vec<&str> = t.header.iter().map(String::as_str).collect();
        s.csv(&dir.join(&t.file).to_string_lossy(), &header, &t.rows)?;
    }
    s.json(&dir.join("summary.json").to_string_lossy(), &json!({ "summary": bundle.summary, "checks": bundle.checks }))?;
    s.checks.extend(bundle.checks);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges_parse_in_milliseconds() {
        let v = parse_range_ms("2:3:0.5").unwrap();
        assert_eq!(v.len(), 3);
        assert!((v[2] - 3e-3).abs() < 1e-15);
        assert!(matches!(parse_range_ms("2:3"), Err(Error::Usage(_))));
        assert!(matches!(parse_range_ms("a:b:c"), Err(Error::Usage(_))));
    }

    #[test]
    fn grids_parse() {
        assert_eq!(parse_grid("64,32,16").unwrap(), [64, 32, 16]);
        assert!(parse_grid("64,32").is_err());
    }

    #[test]
    fn command_line_is_well_formed() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn unknown_figure_is_a_usage_error() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().to_string_lossy().into_owned();
        assert_eq!(run_from(["atomchip-sta", "--out", &out, "reproduce", "fig2"]), 2);
    }
}
