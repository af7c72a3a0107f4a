//! Thomas–Fermi size dynamics via the Castin–Dum scaling equations
//!
//! `l_a'' + w_a^2(t) l_a = w_a^2(0) / (l_a l_x l_y l_z)`, starting from
//! `l = 1`, `l' = 0`. The equations are integrated segment by segment with
//! RK4; a free-flight segment simply has `w = 0`.

use serde::{Deserialize, Serialize};

use crate::chip_model::{AtomSpecies, TrapLandscape};
use crate::error::{Error, Result};
use crate::ode::{rk4_step, HermiteSeries};
use crate::sta_design::RampSchedule;
use crate::units::{hz_to_rad, BOLTZMANN, HBAR};

pub const TRAP_STEP: f64 = 5e-6;
pub const FREE_STEP: f64 = 50e-6;
/// Duration of the late-time window used for asymptotic expansion rates.
pub const RATE_WINDOW: f64 = 20e-3;
pub const COLLAPSE_THRESHOLD: f64 = 1e-6;

pub const SCALING_HEADER: [&str; 7] = ["t_s", "lambda_x", "lambda_y", "lambda_z", "Rx_m", "Ry_m", "Rz_m"];

/// Squared trap frequencies over one segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum OmegaProfile {
    Constant([f64; 3]),
    /// Per-axis Hermite series in segment-local time.
    Series(Box<[HermiteSeries; 3]>),
}

impl OmegaProfile {
    pub fn at(&self, t: f64) -> [f64; 3] {
        match self {
            Self::Constant(w2) => *w2,
            Self::Series(s) => [s[0].eval(t), s[1].eval(t), s[2].eval(t)],
        }
    }

    fn is_free(&self) -> bool {
        matches!(self, Self::Constant(w) if w.iter().all(|&v| v == 0.0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencySegment {
    pub label: String,
    pub duration: f64,
    pub profile: OmegaProfile,
}

impl FrequencySegment {
    pub fn constant(label: &str, duration: f64, omega2: [f64; 3]) -> Self {
        Self {
            label: label.into(),
            duration,
            profile: OmegaProfile::Constant(omega2),
        }
    }

    pub fn free(label: &str, duration: f64) -> Self {
        Self::constant(label, duration, [0.0; 3])
    }

    /// Harmonic trap with frequencies given in Hz.
    pub fn harmonic_hz(label: &str, duration: f64, nu: [f64; 3]) -> Self {
        Self::constant(label, duration, nu.map(|n| hz_to_rad(n).powi(2)))
    }

    /// Trap frequencies followed along a transport schedule.
    pub fn transport(schedule: &RampSchedule, landscape: &TrapLandscape) -> Self {
        let n = schedule.z_t.len();
        let mut values: [Vec<f64>; 3] = Default::default();
        let mut slopes: [Vec<f64>; 3] = Default::default();
        for k in 0..n {
            let z = schedule.z_t[k];
            let w2 = landscape.omega2(z);
            let dw = landscape.omega2_slope(z);
            for a in 0..3 {
                values[a].push(w2[a]);
                slopes[a].push(dw[a] * schedule.zt_dot[k]);
            }
        }
        let [vx, vy, vz] = values;
        let [sx, sy, sz] = slopes;
        Self {
            label: "transport".into(),
            duration: schedule.t_f(),
            profile: OmegaProfile::Series(Box::new([
                HermiteSeries::new(0.0, schedule.dt, vx, sx),
                HermiteSeries::new(0.0, schedule.dt, vy, sy),
                HermiteSeries::new(0.0, schedule.dt, vz, sz),
            ])),
        }
    }
}

/// `(w_y + w_z) / 2` squared.
fn mean_transverse_sq(wy2: f64, wz2: f64) -> f64 {
    (0.5 * (wy2.sqrt() + wz2.sqrt())).powi(2)
}

impl FrequencySegment {
    /// The same segment with both strong axes set to their mean frequency.
    pub fn cylindrical(&self) -> Self {
        let profile = match &self.profile {
            OmegaProfile::Constant(w2) => {
                let p = mean_transverse_sq(w2[1], w2[2]);
                OmegaProfile::Constant([w2[0], p, p])
            }
            OmegaProfile::Series(s) => {
                let [x, y, z] = &**s;
                let (values, slopes): (Vec<f64>, Vec<f64>) = y
                    .values
                    .iter()
                    .zip(&z.values)
                    .zip(y.slopes.iter().zip(&z.slopes))
                    .map(|((&a, &b), (&da, &db))| {
                        let (wa, wb) = (a.sqrt(), b.sqrt());
                        let w = 0.5 * (wa + wb);
                        // d(w^2)/dt = 2 w (wa' + wb') / 2 with wa' = (wa^2)' / (2 wa).
                        (w * w, w * (da / (2.0 * wa) + db / (2.0 * wb)))
                    })
                    .unzip();
                let p = HermiteSeries::new(y.t0, y.dt, values, slopes);
                OmegaProfile::Series(Box::new([x.clone(), p.clone(), p]))
            }
        };
        Self {
            label: self.label.clone(),
            duration: self.duration,
            profile,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrapFrequencySchedule {
    /// Squared frequencies of the trap holding the initial condensate.
    pub omega0_sq: [f64; 3],
    pub segments: Vec<FrequencySegment>,
}

impl TrapFrequencySchedule {
    pub fn new(omega0_sq: [f64; 3], segments: Vec<FrequencySegment>) -> Result<Self> {
        let s = Self { omega0_sq, segments };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(&w) = self.omega0_sq.iter().find(|&&w| !(w > 0.0)) {
            return Err(Error::NonPositiveFrequency(w.max(0.0).sqrt()));
        }
        for seg in &self.segments {
            if !(seg.duration >= 0.0) {
                return Err(Error::Validation(format!("segment {} has negative duration", seg.label)));
            }
            if let OmegaProfile::Constant(w) = &seg.profile {
                if w.iter().any(|&v| !(v >= 0.0)) {
                    return Err(Error::Validation(format!("segment {} has negative omega^2", seg.label)));
                }
            }
        }
        Ok(())
    }

    pub fn total_duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingState {
    pub t: f64,
    pub lambda: [f64; 3],
    pub lambda_dot: [f64; 3],
}

impl ScalingState {
    pub fn initial() -> Self {
        Self {
            t: 0.0,
            lambda: [1.0; 3],
            lambda_dot: [0.0; 3],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentSpan {
    pub label: String,
    pub start: f64,
    pub end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRun {
    pub states: Vec<ScalingState>,
    pub spans: Vec<SegmentSpan>,
}

impl ScalingRun {
    pub fn last(&self) -> &ScalingState {
        self.states.last().expect("non-empty run")
    }

    /// States inside `[start, end]`.
    pub fn window(&self, start: f64, end: f64) -> impl Iterator<Item = &ScalingState> {
        self.states.iter().filter(move |s| s.t >= start - 1e-12 && s.t <= end + 1e-12)
    }

    pub fn span(&self, label: &str) -> Option<&SegmentSpan> {
        self.spans.iter().find(|s| s.label == label)
    }

    pub fn csv_rows(&self, r0: [f64; 3]) -> Vec<[f64; 7]> {
        self.states
            .iter()
            .map(|s| {
                [
                    s.t,
                    s.lambda[0],
                    s.lambda[1],
                    s.lambda[2],
                    s.lambda[0] * r0[0],
                    s.lambda[1] * r0[1],
                    s.lambda[2] * r0[2],
                ]
            })
            .collect()
    }
}

/// Right-hand side for state `[l_x, l_y, l_z, l_x', l_y', l_z']`.
fn scaling_rhs(omega0_sq: [f64; 3], w2: [f64; 3], y: &[f64; 6]) -> [f64; 6] {
    let prod = y[0] * y[1] * y[2];
    [
        y[3],
        y[4],
        y[5],
        -w2[0] * y[0] + omega0_sq[0] / (y[0] * prod),
        -w2[1] * y[1] + omega0_sq[1] / (y[1] * prod),
        -w2[2] * y[2] + omega0_sq[2] / (y[2] * prod),
    ]
}

/// Integrates from the stationary initial condition.
pub fn integrate_scaling(schedule: &TrapFrequencySchedule, output_interval: f64) -> Result<ScalingRun> {
    integrate_scaling_from(schedule, ScalingState::initial(), output_interval)
}

/// Integrates from an arbitrary state; `output_interval` sets the sampling
/// cadence (segment ends are always recorded).
pub fn integrate_scaling_from(
    schedule: &TrapFrequencySchedule,
    start: ScalingState,
    output_interval: f64,
) -> Result<ScalingRun> {
    schedule.validate()?;
    let w0 = schedule.omega0_sq;
    let mut y = [
        start.lambda[0],
        start.lambda[1],
        start.lambda[2],
        start.lambda_dot[0],
        start.lambda_dot[1],
        start.lambda_dot[2],
    ];
    let mut t = start.t;
    let mut states = vec![start];
    let mut spans = Vec::with_capacity(schedule.segments.len());
    for seg in &schedule.segments {
        let seg_start = t;
        if seg.duration > 0.0 {
            let base = if seg.profile.is_free() { FREE_STEP } else { TRAP_STEP };
            let n = (seg.duration / base).ceil().max(1.0) as usize;
            let h = seg.duration / n as f64;
            let stride = ((output_interval / h).round() as usize).max(1);
            let profile = &seg.profile;
            let rhs = |s: f64, y: &[f64; 6]| scaling_rhs(w0, profile.at(s), y);
            for k in 0..n {
                y = rk4_step(&rhs, k as f64 * h, &y, h);
                if let Some(&l) = y[..3].iter().find(|&&l| !(l >= COLLAPSE_THRESHOLD)) {
                    return Err(Error::CollapseDetected {
                        t: seg_start + (k + 1) as f64 * h,
                        lambda: l,
                    });
                }
                if (k + 1) % stride == 0 || k + 1 == n {
                    states.push(ScalingState {
                        t: seg_start + (k + 1) as f64 * h,
                        lambda: [y[0], y[1], y[2]],
                        lambda_dot: [y[3], y[4], y[5]],
                    });
                }
            }
            t = seg_start + seg.duration;
            if let Some(last) = states.last_mut() {
                last.t = t;
            }
        }
        spans.push(SegmentSpan {
            label: seg.label.clone(),
            start: seg_start,
            end: t,
        });
    }
    Ok(ScalingRun { states, spans })
}

/// Conserved quantity of the scaling equations in a constant trap.
pub fn scaling_invariant(state: &ScalingState, omega2: [f64; 3], omega0_sq: [f64; 3]) -> f64 {
    let prod: f64 = state.lambda.iter().product();
    (0..3)
        .map(|a| (state.lambda_dot[a].powi(2) + omega2[a] * state.lambda[a].powi(2)) / (2.0 * omega0_sq[a]))
        .sum::<f64>()
        + 1.0 / prod
}

/// Thomas–Fermi radii of the ground state in a harmonic trap with angular
/// frequencies `omega0`.
pub fn initial_tf_radii(species: &AtomSpecies, omega0: [f64; 3]) -> Result<[f64; 3]> {
    if let Some(&w) = omega0.iter().find(|&&w| !(w > 0.0)) {
        return Err(Error::NonPositiveFrequency(w));
    }
    let wbar = (omega0[0] * omega0[1] * omega0[2]).cbrt();
    let a_osc = (HBAR / (species.mass * wbar)).sqrt();
    let tf_parameter = species.atom_number * species.a_s / a_osc;
    if tf_parameter < 100.0 {
        log::warn!("N a_s / a_osc = {tf_parameter:.1}: Thomas-Fermi radii are only indicative");
    }
    let base = a_osc * (15.0 * tf_parameter).powf(0.2);
    Ok(omega0.map(|w| base * wbar / w))
}

/// Gaussian-equivalent widths `R / sqrt(7)`.
pub fn widths_from_radii(radii: [f64; 3]) -> [f64; 3] {
    radii.map(|r| r / 7f64.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Temperatures {
    /// K
    pub t3d: f64,
    /// K, per axis
    pub t1d: [f64; 3],
}

/// Expansion temperature from width growth rates (m/s):
/// `3/2 k_B T = m/2 sum rate^2` and `k_B T_a = m rate_a^2`.
pub fn expansion_temperature(mass: f64, width_rates: [f64; 3]) -> Temperatures {
    let sum: f64 = width_rates.iter().map(|r| r * r).sum();
    Temperatures {
        t3d: mass * sum / (3.0 * BOLTZMANN),
        t1d: width_rates.map(|r| mass * r * r / BOLTZMANN),
    }
}

/// Same temperature from Thomas–Fermi radius growth rates:
/// `k_B T = m/21 sum (dR/dt)^2`.
pub fn expansion_temperature_from_radii(mass: f64, radius_rates: [f64; 3]) -> f64 {
    mass / 21.0 * radius_rates.iter().map(|r| r * r).sum::<f64>() / BOLTZMANN
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CloudObservables {
    pub r_tf: [f64; 3],
    pub widths: [f64; 3],
    pub expansion_rates: [f64; 3],
    pub temperature: f64,
    pub temperature_1d: [f64; 3],
}

/// Instantaneous cloud observables for `state` given initial radii `r0`.
pub fn observe(state: &ScalingState, r0: [f64; 3], mass: f64) -> CloudObservables {
    let r_tf: [f64; 3] = std::array::from_fn(|a| state.lambda[a] * r0[a]);
    let rates: [f64; 3] = std::array::from_fn(|a| state.lambda_dot[a] * r0[a] / 7f64.sqrt());
    let temps = expansion_temperature(mass, rates);
    CloudObservables {
        r_tf,
        widths: widths_from_radii(r_tf),
        expansion_rates: rates,
        temperature: temps.t3d,
        temperature_1d: temps.t1d,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub rates: [f64; 3],
    /// RMS residual of the linear fits (m).
    pub residual: [f64; 3],
}

/// Straight-line fit of each width over the samples with `t >= t_start`.
pub fn asymptotic_rates(times: &[f64], widths: &[[f64; 3]], t_start: f64) -> Result<RateFit> {
    let idx: Vec<usize> = (0..times.len()).filter(|&i| times[i] >= t_start).collect();
    if idx.len() < 3 {
        return Err(Error::SeriesTooShort(format!(
            "{} samples in the rate window, need 3",
            idx.len()
        )));
    }
    let n = idx.len() as f64;
    let tm = idx.iter().map(|&i| times[i]).sum::<f64>() / n;
    let stt: f64 = idx.iter().map(|&i| (times[i] - tm).powi(2)).sum();
    let mut rates = [0.0; 3];
    let mut residual = [0.0; 3];
    for a in 0..3 {
        let wm = idx.iter().map(|&i| widths[i][a]).sum::<f64>() / n;
        let stw: f64 = idx.iter().map(|&i| (times[i] - tm) * (widths[i][a] - wm)).sum();
        let slope = stw / stt;
        rates[a] = slope;
        let ss: f64 = idx
            .iter()
            .map(|&i| (widths[i][a] - wm - slope * (times[i] - tm)).powi(2))
            .sum();
        residual[a] = (ss / n).sqrt();
    }
    Ok(RateFit { rates, residual })
}
