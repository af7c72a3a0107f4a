//! Centre-of-mass dynamics along the transport axis.
//!
//! Integrates `z'' = -w^2(z_t) (z - z_t) (1 + (z - z_t)/L3(z_t))` with the
//! trap position taken from a [`RampSchedule`] (cubic Hermite between grid
//! points) and the trap parameters from the fitted landscape. After the
//! ramp the trap is frozen at its final parameters.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chip_model::TrapLandscape;
use crate::error::{Error, Result};
use crate::ode::{frozen_oscillator_drift, rk4_step, HermiteSeries};
use crate::sta_design::{design_ramp, evaluate_trajectory, steps_for, AnsatzKind, RampSchedule, TrajectoryAnsatz};
use crate::units::{MILLIGAUSS, MS};

/// Energy drift per period tolerated in the frozen-trap step check.
pub const MAX_DRIFT_PER_PERIOD: f64 = 1e-9;
const MAX_SUBSTEPS: usize = 64;

pub const TRAJECTORY_HEADER: [&str; 4] = ["t_s", "z_m", "v_m_s", "z_t_m"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForceModel {
    Harmonic,
    Anharmonic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassicalState {
    pub t: f64,
    pub z: f64,
    pub v: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub z: f64,
    pub v: f64,
    pub z_t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransportMetrics {
    /// Largest `|z - z_t|` during the ramp.
    pub max_offset: f64,
    /// Half peak-to-peak of `z - z_f` over the hold.
    pub residual_amplitude: f64,
    /// Largest `|z - z_f|` over the hold.
    pub max_deviation: f64,
    /// Largest `100 |z - z_t| / |L3|` during the ramp.
    pub anharmonicity_pct: f64,
    pub ramp_tf: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicalRun {
    pub samples: Vec<TrajectorySample>,
    pub metrics: TransportMetrics,
    /// RK4 substeps per schedule interval.
    pub substeps: usize,
}

impl ClassicalRun {
    pub fn csv_rows(&self) -> Vec<[f64; 4]> {
        self.samples.iter().map(|s| [s.t, s.z, s.v, s.z_t]).collect()
    }

    pub fn final_state(&self) -> ClassicalState {
        let s = self.samples.last().expect("non-empty run");
        ClassicalState { t: s.t, z: s.z, v: s.v }
    }
}

/// Smallest power-of-two subdivision of `dt` meeting the drift bound at
/// angular frequency `omega`.
pub fn choose_substeps(omega: f64, dt: f64) -> Result<usize> {
    let mut sub = 1;
    loop {
        let drift = frozen_oscillator_drift(omega, dt / sub as f64);
        if drift <= MAX_DRIFT_PER_PERIOD {
            return Ok(sub);
        }
        if sub >= MAX_SUBSTEPS {
            return Err(Error::StepTooLarge { drift });
        }
        sub *= 2;
    }
}

/// Trap position and parameters along a (possibly time-stretched) ramp.
struct TrapPath<'a> {
    position: HermiteSeries,
    landscape: &'a TrapLandscape,
    stretch: f64,
    t_end: f64,
}

impl TrapPath<'_> {
    fn z_t(&self, t: f64) -> f64 {
        self.position.eval((t / self.stretch).min(self.position.t_end()))
    }

    fn in_ramp(&self, t: f64) -> bool {
        t <= self.t_end
    }
}

/// Acceleration of the centre of mass at `z` in a trap centred at `z_t`.
pub fn acceleration(landscape: &TrapLandscape, model: ForceModel, z: f64, z_t: f64) -> f64 {
    let d = z - z_t;
    let w2 = landscape.omega2_z.eval(z_t);
    match model {
        ForceModel::Harmonic => -w2 * d,
        ForceModel::Anharmonic => -w2 * d * (1.0 + d / landscape.l3.eval(z_t)),
    }
}

fn half_peak_to_peak(values: impl Iterator<Item = f64>) -> f64 {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if lo.is_finite() {
        0.5 * (hi - lo)
    } else {
        0.0
    }
}

fn run_path(path: &TrapPath, model: ForceModel, dt: f64, hold_time: f64, omega_max: f64) -> Result<ClassicalRun> {
    let substeps = choose_substeps(omega_max, dt)?;
    let h = dt / substeps as f64;
    let landscape = path.landscape;
    let z_f = path.z_t(path.t_end);
    let rhs = |t: f64, y: &[f64; 2]| [y[1], acceleration(landscape, model, y[0], path.z_t(t))];

    let ramp_intervals = (path.t_end / dt).round() as usize;
    let hold_intervals = (hold_time / dt).round() as usize;
    let mut y = [path.z_t(0.0), 0.0];
    let mut samples = Vec::with_capacity(ramp_intervals + hold_intervals + 1);
    samples.push(TrajectorySample {
        t: 0.0,
        z: y[0],
        v: y[1],
        z_t: y[0],
    });
    let t_ramp = |k: usize| if k == ramp_intervals { path.t_end } else { k as f64 * dt };
    let ramp_h = path.t_end / ramp_intervals.max(1) as f64;
    for k in 0..ramp_intervals {
        let t0 = t_ramp(k);
        let hh = ramp_h / substeps as f64;
        for s in 0..substeps {
            y = rk4_step(&rhs, t0 + s as f64 * hh, &y, hh);
        }
        let t = t_ramp(k + 1);
        samples.push(TrajectorySample {
            t,
            z: y[0],
            v: y[1],
            z_t: path.z_t(t),
        });
    }
    for k in 0..hold_intervals {
        let t0 = path.t_end + k as f64 * dt;
        for s in 0..substeps {
            y = rk4_step(&rhs, t0 + s as f64 * h, &y, h);
        }
        samples.push(TrajectorySample {
            t: path.t_end + (k + 1) as f64 * dt,
            z: y[0],
            v: y[1],
            z_t: z_f,
        });
    }
    if samples.iter().any(|s| !s.z.is_finite() || !s.v.is_finite()) {
        return Err(Error::NotConverged {
            iterations: samples.len(),
            detail: "trajectory diverged".into(),
        });
    }

    let ramp = samples.iter().filter(|s| path.in_ramp(s.t));
    let (max_offset, anharmonicity) = ramp.fold((0.0_f64, 0.0_f64), |(o, a), s| {
        let d = (s.z - s.z_t).abs();
        (o.max(d), a.max(100.0 * d / landscape.l3.eval(s.z_t).abs()))
    });
    let hold: Vec<&TrajectorySample> = samples.iter().filter(|s| s.t >= path.t_end).collect();
    let max_deviation = hold.iter().map(|s| (s.z - z_f).abs()).fold(0.0, f64::max);
    let omega_f = landscape.omega2_z.eval(z_f).sqrt();
    let periods = hold_time * omega_f / (2.0 * std::f64::consts::PI);
    let residual_amplitude = if periods >= 1.0 {
        if periods < 3.0 {
            log::warn!("hold covers only {periods:.1} final-trap periods");
        }
        half_peak_to_peak(hold.iter().map(|s| s.z - z_f))
    } else {
        let last = samples.last().expect("non-empty");
        ((last.z - z_f).powi(2) + (last.v / omega_f).powi(2)).sqrt()
    };
    Ok(ClassicalRun {
        samples,
        metrics: TransportMetrics {
            max_offset,
            residual_amplitude,
            max_deviation,
            anharmonicity_pct: anharmonicity,
            ramp_tf: path.t_end,
        },
        substeps,
    })
}

/// Integrates the centre-of-mass motion through the ramp and a hold of
/// `hold_time` in the final trap.
pub fn integrate(
    schedule: &RampSchedule,
    model: ForceModel,
    hold_time: f64,
    landscape: &TrapLandscape,
) -> Result<ClassicalRun> {
    if !(hold_time >= 0.0) {
        return Err(Error::Validation("hold time must be non-negative".into()));
    }
    let path = TrapPath {
        position: schedule.trap_position(),
        landscape,
        stretch: 1.0,
        t_end: schedule.t_f(),
    };
    let omega_max = schedule.omega_z.iter().copied().fold(0.0, f64::max);
    run_path(&path, model, schedule.dt, hold_time, omega_max)
}

/// Designs and integrates one ramp per duration in `tf_values`.
pub fn ramp_time_scan(
    template: &TrajectoryAnsatz,
    tf_values: &[f64],
    landscape: &TrapLandscape,
    model: ForceModel,
    hold_time: f64,
    dt: f64,
) -> Result<Vec<TransportMetrics>> {
    if let Some(&bad) = tf_values.iter().find(|&&t| !(t >= 10.0 * MS)) {
        return Err(Error::Validation(format!("ramp duration {bad} s is below 10 ms")));
    }
    tf_values
        .par_iter()
        .map(|&tf| {
            let schedule = design_ramp(&template.with_duration(tf), landscape, steps_for(tf, dt))?;
            integrate(&schedule, model, hold_time, landscape).map(|r| r.metrics)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Perturbation {
    /// Static offset added to the bias waveform (T).
    Bias(f64),
    /// Waveform replayed over `t_f + delta` (s).
    Timing(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationResponse {
    /// Largest deviation from the unperturbed final position during the hold.
    pub residual: f64,
    /// `(t, deviation)` samples.
    pub deviation: Vec<(f64, f64)>,
}

/// Trap position reached when the bias at position `z` is offset by `db`.
fn shifted_position(landscape: &TrapLandscape, z: f64, db: f64) -> f64 {
    let target = landscape.bias.eval(z) + db;
    let mut x = z;
    for _ in 0..6 {
        let step = (landscape.bias.eval(x) - target) / landscape.bias.derivative(x);
        x -= step;
        if step.abs() < 1e-16 * x.abs() {
            break;
        }
    }
    x
}

/// First-order response of the final position to a bias offset, or the
/// full response to a mis-timed ramp.
pub fn perturbation_response(
    schedule: &RampSchedule,
    landscape: &TrapLandscape,
    model: ForceModel,
    perturbation: Perturbation,
    hold_time: f64,
) -> Result<PerturbationResponse> {
    let span = (schedule.z_f() - schedule.z_i()).abs();
    match perturbation {
        Perturbation::Bias(db) => {
            if db.abs() > 50.0 * MILLIGAUSS {
                return Err(Error::PerturbationTooLarge(format!(
                    "bias offset {:.3} mG exceeds 50 mG",
                    db / MILLIGAUSS
                )));
            }
            if schedule.ansatz.kind == AnsatzKind::Linear {
                return Err(Error::InvalidInput(
                    "perturbation analysis needs a reverse-engineered schedule".into(),
                ));
            }
            bias_response(schedule, landscape, model, db, hold_time, span)
        }
        Perturbation::Timing(dtf) => {
            if dtf.abs() > 5.0 * MS {
                return Err(Error::PerturbationTooLarge(format!(
                    "timing error {:.3} ms exceeds 5 ms",
                    dtf / MS
                )));
            }
            let t_end = schedule.t_f() + dtf;
            let path = TrapPath {
                position: schedule.trap_position(),
                landscape,
                stretch: t_end / schedule.t_f(),
                t_end,
            };
            let omega_max = schedule.omega_z.iter().copied().fold(0.0, f64::max);
            let run = run_path(&path, model, schedule.dt, hold_time, omega_max)?;
            let z_f = schedule.z_f();
            let deviation: Vec<(f64, f64)> = run.samples.iter().map(|s| (s.t, s.z - s.z_t)).collect();
            let residual = run
                .samples
                .iter()
                .filter(|s| s.t >= t_end)
                .map(|s| (s.z - z_f).abs())
                .fold(0.0, f64::max);
            if residual > 0.1 * span {
                return Err(Error::PerturbationTooLarge(format!("deviation {residual:.3e} m")));
            }
            Ok(PerturbationResponse { residual, deviation })
        }
    }
}

fn bias_response(
    schedule: &RampSchedule,
    landscape: &TrapLandscape,
    model: ForceModel,
    db: f64,
    hold_time: f64,
    span: f64,
) -> Result<PerturbationResponse> {
    let position = schedule.trap_position();
    let t_f = schedule.t_f();
    let z_f = schedule.z_f();
    let ansatz = schedule.ansatz;
    let reference = |t: f64| -> (f64, f64) {
        if t >= t_f {
            (z_f, z_f)
        } else {
            let za = evaluate_trajectory(&ansatz, t).map(|d| d[0]).unwrap_or(z_f);
            (za, position.eval(t))
        }
    };
    let rhs = |t: f64, y: &[f64; 2]| {
        let (za, zt) = reference(t);
        let w2 = landscape.omega2_z.eval(zt);
        let zs = shifted_position(landscape, zt, db);
        let dzt = zs - zt;
        let dw2 = landscape.omega2_z.eval(zs) - w2;
        let d = za - zt;
        let mut acc = -w2 * (y[0] - dzt) - dw2 * d;
        if model == ForceModel::Anharmonic {
            // Cubic term linearised about the unperturbed path.
            acc -= 2.0 * w2 / landscape.l3.eval(zt) * d * (y[0] - dzt);
        }
        [y[1], acc]
    };
    let omega_max = schedule.omega_z.iter().copied().fold(0.0, f64::max);
    let dt = schedule.dt;
    let substeps = choose_substeps(omega_max, dt)?;
    let h = dt / substeps as f64;
    let total = schedule.times.len() - 1 + (hold_time / dt).round() as usize;
    let mut y = [0.0, 0.0];
    let mut deviation = Vec::with_capacity(total + 1);
    deviation.push((0.0, 0.0));
    let mut residual = 0.0_f64;
    let mut peak = 0.0_f64;
    for k in 0..total {
        let t0 = k as f64 * dt;
        for s in 0..substeps {
            y = rk4_step(&rhs, t0 + s as f64 * h, &y, h);
        }
        let t = (k + 1) as f64 * dt;
        deviation.push((t, y[0]));
        peak = peak.max(y[0].abs());
        if t >= t_f - 0.5 * dt {
            residual = residual.max(y[0].abs());
        }
    }
    if !(peak <= 0.1 * span) {
        return Err(Error::PerturbationTooLarge(format!(
            "deviation {peak:.3e} m exceeds a tenth of the transport distance"
        )));
    }
    Ok(PerturbationResponse { residual, deviation })
}
