//! End-to-end pipelines behind each published figure, with their headline
//! checks.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use serde_json::json;

use crate::classical_sim::{integrate, perturbation_response, ramp_time_scan, ForceModel, Perturbation, TRAJECTORY_HEADER};
use crate::config::{RunConfig, TransportEnd};
use crate::error::{Error, Result};
use crate::gpe_sim::{simulate_transport, GpeSettings, GroundStateSettings, PotentialMode};
use crate::mode_analysis::{analyze_series, cylindrical_approximation, mode_frequencies, phase_relation, ModeLabel, SpectrumOptions};
use crate::scaling_sim::{integrate_scaling, FrequencySegment, TrapFrequencySchedule};
use crate::scenario::{Scenario, LENSING_Z_F};
use crate::sequence::{optimize_hold_and_lens, run_sequence, SequencePlan, TransportStage, SAMPLE_INTERVAL, SCAN_HEADER, SEQUENCE_HEADER};
use crate::sta_design::{design_ramp, steps_for, TrajectoryAnsatz, DEFAULT_DT, SCHEDULE_HEADER};
use crate::units::{MILLIGAUSS, MS, PICOKELVIN, UM};

const HOLD: f64 = 150.0 * MS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FigureId {
    Fig3,
    Fig4,
    Fig5,
    Fig6,
    Fig7,
    Fig8,
}

impl FromStr for FigureId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "fig3" => Self::Fig3,
            "fig4" => Self::Fig4,
            "fig5" => Self::Fig5,
            "fig6" => Self::Fig6,
            "fig7" => Self::Fig7,
            "fig8" => Self::Fig8,
            other => return Err(Error::Usage(format!("unknown figure id '{other}' (expected fig3 to fig8)"))),
        })
    }
}

impl fmt::Display for FigureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = match self {
            Self::Fig3 => 3,
            Self::Fig4 => 4,
            Self::Fig5 => 5,
            Self::Fig6 => 6,
            Self::Fig7 => 7,
            Self::Fig8 => 8,
        };
        write!(f, "fig{n}")
    }
}

/// A headline number and its accepted interval.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub unit: String,
    pub min: f64,
    pub max: f64,
    pub pass: bool,
}

impl Check {
    pub fn new(name: &str, value: f64, unit: &str, min: f64, max: f64) -> Self {
        Self {
            name: name.into(),
            value,
            unit: unit.into(),
            min,
            max,
            pass: value >= min && value <= max,
        }
    }

    pub fn around(name: &str, value: f64, unit: &str, centre: f64, tolerance: f64) -> Self {
        Self::new(name, value, unit, centre - tolerance, centre + tolerance)
    }

    pub fn flag(name: &str, ok: bool) -> Self {
        Self::new(name, if ok { 1.0 } else { 0.0 }, "bool", 1.0, 1.0)
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.pass { "PASS" } else { "FAIL" };
        if self.unit == "bool" {
            write!(f, "{verdict} {}", self.name)
        } else {
            write!(
                f,
                "{verdict} {}: {} {} (accepted [{}, {}])",
                self.name,
                short(self.value),
                self.unit,
                short(self.min),
                short(self.max)
            )
        }
    }
}

fn short(x: f64) -> String {
    if x == 0.0 || !x.is_finite() || (1e-3..1e5).contains(&x.abs()) {
        format!("{x:.4}")
    } else {
        format!("{x:.3e}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataTable {
    pub file: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl DataTable {
    fn new<R: AsRef<[f64]>>(file: &str, header: &[&str], rows: &[R]) -> Self {
        Self {
            file: file.into(),
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: rows.iter().map(|r| r.as_ref().to_vec()).collect(),
        }
    }
}

/// Everything needed to replot one figure.
#[derive(Debug, Clone)]
pub struct FigureBundle {
    pub id: FigureId,
    pub tables: Vec<DataTable>,
    pub summary: serde_json::Value,
    pub checks: Vec<Check>,
}

impl FigureBundle {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Knobs for the expensive figures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FigureOptions {
    /// Grid of the mean-field run behind the size comparison.
    pub gpe_grid: [usize; 3],
    pub hold_range: (f64, f64, f64),
    pub lens_range: (f64, f64, f64),
}

impl Default for FigureOptions {
    fn default() -> Self {
        Self {
            gpe_grid: [32, 32, 32],
            hold_range: (10.0 * MS, 70.0 * MS, 0.2 * MS),
            lens_range: (2.84 * MS, 6.84 * MS, 0.25 * MS),
        }
    }
}

/// Inclusive arithmetic range `start, start + step, ...` up to `end`.
pub fn range_values(start: f64, end: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(end >= start) {
        return Err(Error::Usage(format!("invalid range {start}:{end}:{step}")));
    }
    let n = ((end - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|k| start + k as f64 * step).collect())
}

pub fn reproduce(id: FigureId, cfg: &RunConfig, options: &FigureOptions) -> Result<FigureBundle> {
    let scenario = cfg.scenario()?;
    match id {
        FigureId::Fig3 => transport_figure(cfg, &scenario),
        FigureId::Fig4 => duration_figure(cfg, &scenario),
        FigureId::Fig5 => robustness_figure(cfg, &scenario),
        FigureId::Fig6 => size_figure(cfg, &scenario, options),
        FigureId::Fig7 => mode_figure(cfg, &scenario),
        FigureId::Fig8 => {
            // Lensing follows a shorter transport unless the configuration
            // already names an end point.
            let sc = match cfg.transport.end {
                TransportEnd::Position(_) => scenario,
                TransportEnd::Bias(_) => scenario.ending_at(LENSING_Z_F),
            };
            lensing_figure(cfg, &sc, options)
        }
    }
}

fn chirped_schedule(cfg: &RunConfig, sc: &Scenario, t_f: f64) -> Result<crate::sta_design::RampSchedule> {
    let ansatz = cfg.chirped(sc)?.with_duration(t_f);
    design_ramp(&ansatz, sc.landscape(), steps_for(t_f, DEFAULT_DT))
}

fn transport_figure(cfg: &RunConfig, sc: &Scenario) -> Result<FigureBundle> {
    let l = sc.landscape();
    let schedule = chirped_schedule(cfg, sc, cfg.transport.duration)?;
    let anh = integrate(&schedule, ForceModel::Anharmonic, HOLD, l)?;
    let harm = integrate(&schedule, ForceModel::Harmonic, HOLD, l)?;
    let m = anh.metrics;
    Ok(FigureBundle {
        id: FigureId::Fig3,
        tables: vec![
            DataTable::new("schedule.csv", &SCHEDULE_HEADER, &schedule.csv_rows()),
            DataTable::new("trajectory_anharmonic.csv", &TRAJECTORY_HEADER, &anh.csv_rows()),
            DataTable::new("trajectory_harmonic.csv", &TRAJECTORY_HEADER, &harm.csv_rows()),
        ],
        summary: json!({
            "chi_max": schedule.chi_max,
            "anharmonic": m,
            "harmonic": harm.metrics,
        }),
        checks: vec![
            Check::around("anharmonic residual", m.residual_amplitude / UM, "um", 0.7, 0.3),
            Check::around("max offset", m.max_offset / UM, "um", 14.0, 4.0),
        ],
    })
}

fn duration_figure(cfg: &RunConfig, sc: &Scenario) -> Result<FigureBundle> {
    let l = sc.landscape();
    let (zi, zf) = (sc.z_i()?, sc.z_f()?);
    let tf = cfg.transport.duration;
    let durations = range_values(30.0 * MS, 150.0 * MS, 5.0 * MS)?;
    let chirped = cfg.chirped(sc)?;
    let plain = TrajectoryAnsatz::chirped(zi, zf, tf, 0.0, 0.0);
    let mut rows = Vec::with_capacity(durations.len());
    let scans = [&chirped, &plain].map(|a| ramp_time_scan(a, &durations, l, ForceModel::Anharmonic, HOLD, DEFAULT_DT));
    let [with_chirp, without] = scans;
    let (with_chirp, without) = (with_chirp?, without?);
    for ((t, a), b) in durations.iter().zip(&with_chirp).zip(&without) {
        rows.push([t / MS, a.residual_amplitude, b.residual_amplitude, a.max_offset, b.max_offset]);
    }
    let residual = |a: &TrajectoryAnsatz| -> Result<f64> {
        let s = design_ramp(a, l, steps_for(tf, DEFAULT_DT))?;
        Ok(integrate(&s, ForceModel::Anharmonic, HOLD, l)?.metrics.residual_amplitude)
    };
    let no_chirp = residual(&plain)?;
    let linear = residual(&TrajectoryAnsatz::linear(zi, zf, tf))?;
    Ok(FigureBundle {
        id: FigureId::Fig4,
        tables: vec![DataTable::new(
            "duration_scan.csv",
            &["tf_ms", "residual_chirped_m", "residual_plain_m", "offset_chirped_m", "offset_plain_m"],
            &rows,
        )],
        summary: json!({ "no_chirp_residual_um": no_chirp / UM, "linear_residual_um": linear / UM }),
        checks: vec![
            Check::around("no-chirp residual", no_chirp / UM, "um", 6.0, 2.0),
            Check::new("linear-ramp residual", linear / UM, "um", 50.0, 200.0),
        ],
    })
}

fn robustness_figure(cfg: &RunConfig, sc: &Scenario) -> Result<FigureBundle> {
    let l = sc.landscape();
    let schedule = chirped_schedule(cfg, sc, cfg.transport.duration)?;
    let mut bias_rows = Vec::new();
    for db in range_values(-2.0, 2.0, 0.5)? {
        let mut row = vec![db];
        for model in [ForceModel::Harmonic, ForceModel::Anharmonic] {
            let r = perturbation_response(&schedule, l, model, Perturbation::Bias(db * MILLIGAUSS), HOLD)?;
            row.push(r.residual);
        }
        bias_rows.push(row);
    }
    let mut timing_rows = Vec::new();
    for dt in range_values(-2.0, 2.0, 0.5)? {
        let r = perturbation_response(&schedule, l, ForceModel::Anharmonic, Perturbation::Timing(dt * MS), HOLD)?;
        timing_rows.push([dt, r.residual]);
    }
    let one_mg = bias_rows.iter().find(|r| (r[0] - 1.0).abs() < 1e-9).map_or(f64::NAN, |r| r[2]);
    let timing = timing_rows
        .iter()
        .filter(|r| (r[0].abs() - 1.0).abs() < 1e-9)
        .map(|r| r[1])
        .fold(0.0, f64::max);
    Ok(FigureBundle {
        id: FigureId::Fig5,
        tables: vec![
            DataTable::new("bias_response.csv", &["dB_mG", "residual_harmonic_m", "residual_anharmonic_m"], &bias_rows),
            DataTable::new("timing_response.csv", &["dtf_ms", "residual_m"], &timing_rows),
        ],
        summary: json!({ "bias_1mG_um": one_mg / UM, "timing_1ms_um": timing / UM }),
        checks: vec![
            Check::around("1 mG bias residual", one_mg / UM, "um", 0.5, 0.25),
            Check::new("1 ms timing residual", timing / UM, "um", 0.0, 2.0),
        ],
    })
}

/// Mean-field widths against the scaling solution started from the same
/// initial widths, harmonic traps, transport plus 100 ms hold.
pub fn width_comparison(cfg: &RunConfig, sc: &Scenario, grid: [usize; 3]) -> Result<(Vec<[f64; 7]>, f64)> {
    let l = sc.landscape();
    let hold = 100.0 * MS;
    let schedule = chirped_schedule(cfg, sc, cfg.transport.duration)?;
    let settings = GpeSettings {
        mode: PotentialMode::HarmonicFixed,
        grid_n: grid,
        ..GpeSettings::default()
    };
    let run = simulate_transport(
        &schedule,
        l,
        &sc.species,
        hold,
        ForceModel::Harmonic,
        &settings,
        &GroundStateSettings::default(),
        None,
    )?;
    let omega0_sq = l.omega2(schedule.z_i());
    let scaling = integrate_scaling(
        &TrapFrequencySchedule::new(
            omega0_sq,
            vec![
                FrequencySegment::transport(&schedule, l),
                FrequencySegment::constant("hold", hold, l.omega2(schedule.z_f())),
            ],
        )?,
        settings.output_interval,
    )?;
    let w0 = run.observables[0].widths;
    let mut rows = Vec::with_capacity(run.observables.len());
    let (mut sum, mut count) = (0.0, 0usize);
    for (o, s) in run.observables.iter().zip(&scaling.states) {
        let predicted: [f64; 3] = std::array::from_fn(|a| s.lambda[a] * w0[a]);
        for a in 0..3 {
            sum += (o.widths[a] / predicted[a] - 1.0).powi(2);
            count += 1;
        }
        rows.push([o.t, o.widths[0], o.widths[1], o.widths[2], predicted[0], predicted[1], predicted[2]]);
    }
    Ok((rows, (sum / count.max(1) as f64).sqrt()))
}

fn size_figure(cfg: &RunConfig, sc: &Scenario, options: &FigureOptions) -> Result<FigureBundle> {
    let (rows, rms) = width_comparison(cfg, sc, options.gpe_grid)?;
    Ok(FigureBundle {
        id: FigureId::Fig6,
        tables: vec![DataTable::new(
            "widths.csv",
            &["t_s", "dX_gpe_m", "dY_gpe_m", "dZ_gpe_m", "dX_scaling_m", "dY_scaling_m", "dZ_scaling_m"],
            &rows,
        )],
        summary: json!({ "rms_relative_difference": rms, "grid": options.gpe_grid }),
        checks: vec![Check::new("scaling vs GPE widths, RMS", 100.0 * rms, "%", 0.0, 5.0)],
    })
}

/// Size oscillations in the final trap after a transport of duration `t_f`,
/// with the strong axes made degenerate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HoldOscillation {
    pub t_f: f64,
    pub times: Vec<f64>,
    /// Radii relative to their value at the end of the transport.
    pub relative: Vec<[f64; 3]>,
    pub eta: f64,
    pub omega_perp: f64,
}

impl HoldOscillation {
    pub fn excursion(&self, axis: usize) -> f64 {
        self.relative.iter().map(|r| (r[axis] - 1.0).abs()).fold(0.0, f64::max)
    }

    pub fn axis(&self, axis: usize) -> Vec<f64> {
        self.relative.iter().map(|r| r[axis]).collect()
    }
}

pub const MODE_HOLD: f64 = 500.0 * MS;

pub fn hold_oscillation(cfg: &RunConfig, sc: &Scenario, t_f: f64) -> Result<HoldOscillation> {
    let l = sc.landscape();
    let schedule = chirped_schedule(cfg, sc, t_f)?;
    let transport = FrequencySegment::transport(&schedule, l).cylindrical();
    let hold = FrequencySegment::constant("hold", MODE_HOLD, l.omega2(schedule.z_f())).cylindrical();
    let w0 = l.omega2(schedule.z_i());
    let p = (0.5 * (w0[1].sqrt() + w0[2].sqrt())).powi(2);
    let run = integrate_scaling(&TrapFrequencySchedule::new([w0[0], p, p], vec![transport, hold.clone()])?, SAMPLE_INTERVAL)?;
    let span = run.span("hold").expect("hold segment present").clone();
    let start = *run
        .states
        .iter()
        .find(|s| s.t >= span.start - 1e-12)
        .expect("state at end of transport");
    let (times, relative) = run
        .window(span.start, span.end)
        .map(|s| (s.t - span.start, std::array::from_fn(|a| s.lambda[a] / start.lambda[a])))
        .unzip();
    let (eta, omega_perp) = cylindrical_approximation(hold.profile.at(0.0).map(f64::sqrt));
    Ok(HoldOscillation {
        t_f,
        times,
        relative,
        eta,
        omega_perp,
    })
}

fn mode_figure(cfg: &RunConfig, sc: &Scenario) -> Result<FigureBundle> {
    let fast = hold_oscillation(cfg, sc, cfg.transport.duration)?;
    let slow = hold_oscillation(cfg, sc, 10.0 * cfg.transport.duration)?;
    let table = mode_frequencies(slow.eta, slow.omega_perp)?;
    let opts = SpectrumOptions::default();
    let slowest = table.hz(ModeLabel::DipoleX);
    let mut tables = Vec::new();
    let mut spectra = Vec::new();
    for (name, osc) in [("fast", &fast), ("slow", &slow)] {
        let rows: Vec<[f64; 4]> = osc
            .times
            .iter()
            .zip(&osc.relative)
            .map(|(&t, r)| [t, r[0], r[1], r[2]])
            .collect();
        tables.push(DataTable::new(&format!("sizes_{name}.csv"), &["t_hold_s", "Rx_rel", "Ry_rel", "Rz_rel"], &rows));
        for (axis, label) in [(0, "x"), (1, "y")] {
            let spec = analyze_series(&osc.axis(axis), SAMPLE_INTERVAL, Some(slowest), Some(&table), &opts)?;
            tables.push(DataTable::new(&format!("spectrum_{name}_{label}.csv"), &["freq_Hz", "log_magnitude"], &spec.csv_rows()));
            spectra.push(((name, label), spec));
        }
    }
    let slow_x = &spectra[2].1;
    let dominant = slow_x.dominant().copied();
    let q1 = table.hz(ModeLabel::Q1);
    let dominant_hz = dominant.map_or(f64::NAN, |p| p.frequency_hz);
    let single = slow_x.peaks.len() == 1
        || slow_x.peaks.get(1).is_none_or(|p| slow_x.peaks[0].log_magnitude - p.log_magnitude >= 1.0);
    let phase = phase_relation(&slow.axis(0), &slow.axis(1), SAMPLE_INTERVAL, dominant_hz)?;
    let slow_excursion = (0..3).map(|a| slow.excursion(a)).fold(0.0, f64::max);
    let summary = json!({
        "eta": slow.eta,
        "omega_perp_rad_s": slow.omega_perp,
        "modes_hz": ModeLabel::ALL.iter().map(|&m| (m.to_string(), table.hz(m))).collect::<std::collections::BTreeMap<_, _>>(),
        "peaks": spectra.iter().map(|((n, a), s)| json!({ "ramp": n, "axis": a, "peaks": s.peaks })).collect::<Vec<_>>(),
        "slow_phase_cosine": phase,
        "slow_excursion_pct": 100.0 * slow_excursion,
        "fast_weak_axis_excursion_pct": 100.0 * fast.excursion(0),
    });
    Ok(FigureBundle {
        id: FigureId::Fig7,
        tables,
        summary,
        checks: vec![
            Check::flag("slow ramp: single dominant peak", single),
            Check::around("slow ramp: dominant peak / Q1", dominant_hz / q1, "ratio", 1.0, 0.05),
            Check::new("slow ramp: weak/strong phase cosine", phase, "cos", -1.0, 0.0),
            Check::around("slow ramp: size excursion", 100.0 * slow_excursion, "%", 1.0, 0.5),
            Check::around("fast ramp: weak-axis excursion", 100.0 * fast.excursion(0), "%", 70.0, 20.0),
        ],
    })
}

fn lensing_figure(cfg: &RunConfig, sc: &Scenario, options: &FigureOptions) -> Result<FigureBundle> {
    let schedule = chirped_schedule(cfg, sc, cfg.transport.duration)?;
    let stage = TransportStage::new(&schedule, sc.landscape(), &sc.species)?;
    let plan = cfg.plan;
    let preset = run_sequence(&stage, &plan)?;
    let counterfactual = run_sequence(
        &stage,
        &SequencePlan {
            adiabatic_weak_axis: true,
            ..plan
        },
    )?;
    let mut tables = vec![DataTable::new("sequence.csv", &SEQUENCE_HEADER, &preset.csv_rows())];
    for (name, hold) in [("early", plan.hold - 2.0 * MS), ("late", plan.hold + 2.0 * MS)] {
        let r = run_sequence(&stage, &SequencePlan { hold, ..plan })?;
        tables.push(DataTable::new(&format!("sequence_{name}.csv"), &SEQUENCE_HEADER, &r.csv_rows()));
    }
    let (h0, h1, hs) = options.hold_range;
    let (l0, l1, ls) = options.lens_range;
    let scan = optimize_hold_and_lens(&stage, &plan, &range_values(h0, h1, hs)?, &range_values(l0, l1, ls)?)?;
    tables.push(DataTable::new("t_map.csv", &SCAN_HEADER, &scan.csv_rows()));
    let worst = scan.neighbourhood(0.5 * MS).map(|c| c.temperature).fold(0.0, f64::max);
    let t = preset.temperature;
    let interior = scan.best.hold > h0 + 0.5 * hs && scan.best.hold < h1 - 0.5 * hs;
    let ratio_yz = t.t1d[1].max(t.t1d[2]) / t.t1d[1].min(t.t1d[2]);
    Ok(FigureBundle {
        id: FigureId::Fig8,
        tables,
        summary: json!({
            "T_pK": t.t3d / PICOKELVIN,
            "T1d_pK": t.t1d.map(|v| v / PICOKELVIN),
            "rates_um_s": preset.rates.map(|v| v / UM),
            "adiabatic_x_T_pK": counterfactual.temperature.t3d / PICOKELVIN,
            "best_hold_ms": scan.best.hold / MS,
            "best_lens_ms": scan.best.lens.duration / MS,
            "best_T_pK": scan.best_temperature / PICOKELVIN,
            "worst_within_0p5ms_pK": worst / PICOKELVIN,
        }),
        checks: vec![
            Check::new("preset T_3d", t.t3d / PICOKELVIN, "pK", 1.1, 4.4),
            Check::flag("T_x exceeds T_y and T_z", t.t1d[0] > t.t1d[1] && t.t1d[0] > t.t1d[2]),
            Check::new("T_y / T_z", ratio_yz, "ratio", 1.0, 2.0),
            Check::new("adiabatic-x T_3d", counterfactual.temperature.t3d / PICOKELVIN, "pK", 100.0, f64::INFINITY),
            Check::new("worst T within 0.5 ms of optimum", worst / PICOKELVIN, "pK", 0.0, 40.0),
            Check::flag("optimal hold interior to scan", interior),
        ],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn figure_ids_round_trip() {
        for id in [FigureId::Fig3, FigureId::Fig4, FigureId::Fig5, FigureId::Fig6, FigureId::Fig7, FigureId::Fig8] {
            assert_eq!(id.to_string().parse::<FigureId>().unwrap(), id);
        }
        assert!(matches!("fig9".parse::<FigureId>(), Err(Error::Usage(_))));
    }

    #[test]
    fn ranges_include_end_points() {
        let v = range_values(10.0, 11.0, 0.25).unwrap();
        assert_eq!(v.len(), 5);
        assert!((v[4] - 11.0).abs() < 1e-12);
        assert!(range_values(1.0, 0.0, 0.1).is_err());
        assert_eq!(range_values(2.0, 2.0, 1.0).unwrap(), vec![2.0]);
    }

    #[test]
    fn check_bounds_are_inclusive() {
        assert!(Check::new("x", 1.0, "u", 1.0, 2.0).pass);
        assert!(!Check::around("x", 1.31, "u", 1.0, 0.3).pass);
        assert!(!Check::flag("f", false).pass);
    }
}
