//! Transport, hold, release and delta-kick collimation.
//!
//! A [`TransportStage`] integrates the size dynamics of the transport once;
//! plans then branch from its end state so hold/lens scans only pay for the
//! segments they change.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chip_model::{AtomSpecies, TrapLandscape};
use crate::error::{Error, Result};
use crate::gpe_sim::{self, GpeSequenceSettings};
use crate::scaling_sim::{
    asymptotic_rates, expansion_temperature, initial_tf_radii, integrate_scaling, integrate_scaling_from,
    FrequencySegment, ScalingRun, ScalingState, SegmentSpan, Temperatures, TrapFrequencySchedule, RATE_WINDOW,
};
use crate::sta_design::RampSchedule;
use crate::units::{hz_to_rad, MS};

/// Sampling interval of reported size series.
pub const SAMPLE_INTERVAL: f64 = 0.5e-3;
pub const MIN_FREE_BEFORE_LENS: f64 = 10e-3;

pub const LENS_FREQUENCIES_HZ: [f64; 3] = [1.7, 7.2, 7.2];
pub const LENS_DURATION: f64 = 4.84e-3;
pub const LENS_WIRE_CURRENT: f64 = 0.1;
pub const LENS_BIAS: f64 = 0.12e-4;
pub const PRESET_HOLD: f64 = 31.4e-3;
pub const PRESET_FREE1: f64 = 100e-3;
pub const PRESET_FREE2: f64 = 500e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LensPulse {
    pub frequencies_hz: [f64; 3],
    pub duration: f64,
    /// Chip settings that realise the lens trap; informational.
    pub wire_current: f64,
    pub bias: f64,
}

impl Default for LensPulse {
    fn default() -> Self {
        Self {
            frequencies_hz: LENS_FREQUENCIES_HZ,
            duration: LENS_DURATION,
            wire_current: LENS_WIRE_CURRENT,
            bias: LENS_BIAS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    Scaling,
    Gpe,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SequencePlan {
    pub hold: f64,
    pub free1: f64,
    pub lens: LensPulse,
    pub free2: f64,
    pub engine: Engine,
    /// Counterfactual: at release the weak axis is put at rest at its
    /// equilibrium size in the hold trap.
    pub adiabatic_weak_axis: bool,
}

impl Default for SequencePlan {
    fn default() -> Self {
        Self {
            hold: PRESET_HOLD,
            free1: PRESET_FREE1,
            lens: LensPulse::default(),
            free2: PRESET_FREE2,
            engine: Engine::Scaling,
            adiabatic_weak_axis: false,
        }
    }
}

impl SequencePlan {
    pub fn validate(&self) -> Result<()> {
        for (name, d) in [
            ("hold", self.hold),
            ("free1", self.free1),
            ("lens", self.lens.duration),
            ("free2", self.free2),
        ] {
            if !(d >= 0.0) {
                return Err(Error::Validation(format!("{name} duration must be non-negative, got {d}")));
            }
        }
        if self.lens.frequencies_hz.iter().any(|&f| !(f > 0.0)) {
            return Err(Error::Validation("lens frequencies must be positive".into()));
        }
        Ok(())
    }

    /// Time from release of the hold trap to the end of the sequence.
    pub fn post_release(&self) -> f64 {
        self.free1 + self.lens.duration + self.free2
    }

    pub fn total_after_transport(&self) -> f64 {
        self.hold + self.post_release()
    }
}

/// Size dynamics of a transport ramp, shared by every plan that follows it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportStage {
    pub omega0_sq: [f64; 3],
    pub hold_omega2: [f64; 3],
    /// Thomas–Fermi radii in the initial trap.
    pub r0: [f64; 3],
    pub transport: FrequencySegment,
    pub run: ScalingRun,
    pub species: AtomSpecies,
    pub schedule: RampSchedule,
    pub landscape: TrapLandscape,
}

impl TransportStage {
    pub fn new(schedule: &RampSchedule, landscape: &TrapLandscape, species: &AtomSpecies) -> Result<Self> {
        let omega0_sq = landscape.omega2(schedule.z_i());
        let hold_omega2 = landscape.omega2(schedule.z_f());
        let r0 = initial_tf_radii(species, omega0_sq.map(f64::sqrt))?;
        let transport = FrequencySegment::transport(schedule, landscape);
        let run = integrate_scaling(
            &TrapFrequencySchedule::new(omega0_sq, vec![transport.clone()])?,
            SAMPLE_INTERVAL,
        )?;
        Ok(Self {
            omega0_sq,
            hold_omega2,
            r0,
            transport,
            run,
            species: *species,
            schedule: schedule.clone(),
            landscape: landscape.clone(),
        })
    }

    pub fn end_state(&self) -> ScalingState {
        *self.run.last()
    }

    pub fn transport_duration(&self) -> f64 {
        self.transport.duration
    }

    /// Weak-axis equilibrium scaling factor in the hold trap.
    fn weak_axis_equilibrium(&self, state: &ScalingState) -> f64 {
        // Solve w_f^2 l_x = w_0^2 / (l_x^2 l_y l_z) for l_x.
        let (ly, lz) = (state.lambda[1], state.lambda[2]);
        (self.omega0_sq[0] / (self.hold_omega2[0] * ly * lz)).cbrt()
    }

    fn schedule(&self, segments: Vec<FrequencySegment>) -> Result<TrapFrequencySchedule> {
        TrapFrequencySchedule::new(self.omega0_sq, segments)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceReport {
    pub times: Vec<f64>,
    /// Thomas–Fermi radii, m.
    pub radii: Vec<[f64; 3]>,
    /// Width growth rates at the end of the sequence, m/s.
    pub rates: [f64; 3],
    /// RMS residual of the asymptotic linear fit, or zero for instantaneous rates.
    pub rate_residual: [f64; 3],
    pub temperature: Temperatures,
    pub timeline: Vec<SegmentSpan>,
    pub final_state: ScalingState,
}

impl SequenceReport {
    pub fn csv_rows(&self) -> Vec<[f64; 4]> {
        self.times
            .iter()
            .zip(&self.radii)
            .map(|(&t, r)| [t, r[0], r[1], r[2]])
            .collect()
    }
}

pub const SEQUENCE_HEADER: [&str; 4] = ["t_s", "Rx_m", "Ry_m", "Rz_m"];

fn post_transport_segments(stage: &TransportStage, plan: &SequencePlan) -> (Vec<FrequencySegment>, Vec<FrequencySegment>) {
    let lens_w2 = plan.lens.frequencies_hz.map(|f| hz_to_rad(f).powi(2));
    (
        vec![FrequencySegment::constant("hold", plan.hold, stage.hold_omega2)],
        vec![
            FrequencySegment::free("free1", plan.free1),
            FrequencySegment::constant("lens", plan.lens.duration, lens_w2),
            FrequencySegment::free("free2", plan.free2),
        ],
    )
}

fn release_rates(stage: &TransportStage, run: &ScalingRun, plan: &SequencePlan) -> Result<([f64; 3], [f64; 3])> {
    let end = run.last();
    if plan.free2 >= RATE_WINDOW && plan.lens.duration + plan.free1 + plan.free2 > 0.0 {
        let t_start = end.t - RATE_WINDOW;
        let (times, widths): (Vec<f64>, Vec<[f64; 3]>) = run
            .window(t_start, end.t)
            .map(|s| (s.t, std::array::from_fn(|a| s.lambda[a] * stage.r0[a] / 7f64.sqrt())))
            .unzip();
        let fit = asymptotic_rates(&times, &widths, t_start)?;
        Ok((fit.rates, fit.residual))
    } else {
        Ok((
            std::array::from_fn(|a| end.lambda_dot[a] * stage.r0[a] / 7f64.sqrt()),
            [0.0; 3],
        ))
    }
}

/// Runs `plan` after the transport captured in `stage`.
pub fn run_sequence(stage: &TransportStage, plan: &SequencePlan) -> Result<SequenceReport> {
    plan.validate()?;
    if plan.free1 < MIN_FREE_BEFORE_LENS && plan.lens.duration > 0.0 {
        log::warn!(
            "lens applied after only {:.1} ms of expansion (LensBeforeExpansion)",
            plan.free1 / MS
        );
    }
    run_sequence_with(stage, plan, &GpeSequenceSettings::default())
}

/// Runs `plan` with explicit GPE engine settings (ignored by the scaling engine).
pub fn run_sequence_with(stage: &TransportStage, plan: &SequencePlan, gpe: &GpeSequenceSettings) -> Result<SequenceReport> {
    plan.validate()?;
    match plan.engine {
        Engine::Scaling => run_scaling(stage, plan),
        Engine::Gpe => gpe_sim::run_sequence_gpe(stage, plan, gpe),
    }
}

fn run_scaling(stage: &TransportStage, plan: &SequencePlan) -> Result<SequenceReport> {
    let (hold, release) = post_transport_segments(stage, plan);
    let held = integrate_scaling_from(&stage.schedule(hold)?, stage.end_state(), SAMPLE_INTERVAL)?;
    let mut release_state = *held.last();
    if plan.adiabatic_weak_axis {
        release_state.lambda[0] = stage.weak_axis_equilibrium(&release_state);
        release_state.lambda_dot[0] = 0.0;
    }
    let released = integrate_scaling_from(&stage.schedule(release)?, release_state, SAMPLE_INTERVAL)?;
    let (rates, rate_residual) = release_rates(stage, &released, plan)?;

    let mut states: Vec<ScalingState> = stage.run.states.clone();
    states.extend_from_slice(&held.states[1..]);
    states.extend_from_slice(&released.states[1..]);
    let mut timeline = stage.run.spans.clone();
    timeline.extend(held.spans.iter().cloned());
    timeline.extend(released.spans.iter().cloned());
    let radii = states
        .iter()
        .map(|s| std::array::from_fn(|a| s.lambda[a] * stage.r0[a]))
        .collect();
    Ok(SequenceReport {
        times: states.iter().map(|s| s.t).collect(),
        radii,
        rates,
        rate_residual,
        temperature: expansion_temperature(stage.species.mass, rates),
        timeline,
        final_state: *released.last(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanCell {
    pub hold: f64,
    pub lens: f64,
    /// K
    pub temperature: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoldLensScan {
    pub cells: Vec<ScanCell>,
    pub best: SequencePlan,
    pub best_temperature: f64,
}

impl HoldLensScan {
    pub fn csv_rows(&self) -> Vec<[f64; 3]> {
        self.cells
            .iter()
            .map(|c| [c.hold / MS, c.lens / MS, c.temperature / crate::units::PICOKELVIN])
            .collect()
    }

    /// Cells whose hold and lens both lie within `radius` of the optimum.
    pub fn neighbourhood(&self, radius: f64) -> impl Iterator<Item = &ScanCell> {
        let (h, l) = (self.best.hold, self.best.lens.duration);
        self.cells
            .iter()
            .filter(move |c| (c.hold - h).abs() <= radius + 1e-12 && (c.lens - l).abs() <= radius + 1e-12)
    }
}

pub const SCAN_HEADER: [&str; 3] = ["hold_ms", "lens_ms", "T_pK"];

/// Grid search over hold and lens durations with the scaling engine. Ties
/// go to the shorter sequence, then the shorter hold.
pub fn optimize_hold_and_lens(
    stage: &TransportStage,
    template: &SequencePlan,
    holds: &[f64],
    lenses: &[f64],
) -> Result<HoldLensScan> {
    if holds.is_empty() || lenses.is_empty() {
        return Err(Error::InvalidInput("hold and lens ranges must be non-empty".into()));
    }
    template.validate()?;
    let rows: Vec<Vec<ScanCell>> = holds
        .par_iter()
        .map(|&hold| -> Result<Vec<ScanCell>> {
            let held = integrate_scaling_from(
                &stage.schedule(vec![FrequencySegment::constant("hold", hold, stage.hold_omega2)])?,
                stage.end_state(),
                SAMPLE_INTERVAL,
            )?;
            let mut release_state = *held.last();
            if template.adiabatic_weak_axis {
                release_state.lambda[0] = stage.weak_axis_equilibrium(&release_state);
                release_state.lambda_dot[0] = 0.0;
            }
            lenses
                .iter()
                .map(|&lens| {
                    let plan = SequencePlan {
                        hold,
                        lens: LensPulse {
                            duration: lens,
                            ..template.lens
                        },
                        ..*template
                    };
                    plan.validate()?;
                    let (_, release) = post_transport_segments(stage, &plan);
                    let run = integrate_scaling_from(&stage.schedule(release)?, release_state, SAMPLE_INTERVAL)?;
                    let (rates, _) = release_rates(stage, &run, &plan)?;
                    Ok(ScanCell {
                        hold,
                        lens,
                        temperature: expansion_temperature(stage.species.mass, rates).t3d,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let cells: Vec<ScanCell> = rows.into_iter().flatten().collect();
    let best = cells
        .iter()
        .min_by(|a, b| {
            a.temperature
                .total_cmp(&b.temperature)
                .then((a.hold + a.lens).total_cmp(&(b.hold + b.lens)))
                .then(a.hold.total_cmp(&b.hold))
        })
        .copied()
        .expect("non-empty grid");
    Ok(HoldLensScan {
        cells,
        best: SequencePlan {
            hold: best.hold,
            lens: LensPulse {
                duration: best.lens,
                ..template.lens
            },
            ..*template
        },
        best_temperature: best.temperature,
    })
}

/// Relative peak-to-peak variation below which a series counts as static.
pub const MIN_OSCILLATION: f64 = 1e-4;

/// Candidate release times: weak-axis size maxima located by a parabola
/// through each local maximum, delayed by `lag`.
pub fn release_timing_hint(times: &[f64], sizes: &[f64], lag: f64) -> Result<Vec<f64>> {
    if times.len() != sizes.len() || times.len() < 3 {
        return Err(Error::NoOscillation);
    }
    let (lo, hi) = sizes
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &s| (lo.min(s), hi.max(s)));
    let scale = sizes.iter().map(|s| s.abs()).sum::<f64>() / sizes.len() as f64;
    if !(hi - lo > MIN_OSCILLATION * scale) {
        return Err(Error::NoOscillation);
    }
    let mut hints = Vec::new();
    for k in 1..sizes.len() - 1 {
        let (a, b, c) = (sizes[k - 1], sizes[k], sizes[k + 1]);
        if b > a && b >= c {
            let h = 0.5 * (times[k + 1] - times[k - 1]);
            let curvature = a - 2.0 * b + c;
            let shift = if curvature < 0.0 { 0.5 * (a - c) / curvature } else { 0.0 };
            hints.push(times[k] + shift * h + lag);
        }
    }
    if hints.is_empty() {
        return Err(Error::NoOscillation);
    }
    Ok(hints)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hints_follow_sinusoid_maxima() {
        // Maxima at 10, 50 and 90 ms.
        let times: Vec<f64> = (0..=1000).map(|k| k as f64 * 1e-4).collect();
        let sizes: Vec<f64> = times
            .iter()
            .map(|&t| 1.0 + 0.2 * (2.0 * std::f64::consts::PI * (t - 0.01) / 0.04).cos())
            .collect();
        let hints = release_timing_hint(&times, &sizes, 1e-3).unwrap();
        assert_eq!(hints.len(), 3);
        for (h, m) in hints.iter().zip([0.011, 0.051, 0.091]) {
            assert!((h - m).abs() < 1e-6, "{h}");
        }
    }

    #[test]
    fn constant_series_has_no_hint() {
        let times: Vec<f64> = (0..100).map(|k| k as f64).collect();
        let sizes = vec![2.0; 100];
        assert!(matches!(release_timing_hint(&times, &sizes, 0.0), Err(Error::NoOscillation)));
    }

    #[test]
    fn plan_validation() {
        let mut p = SequencePlan::default();
        assert!(p.validate().is_ok());
        p.free1 = -1.0;
        assert!(p.validate().is_err());
        let p = SequencePlan {
            lens: LensPulse {
                frequencies_hz: [0.0, 7.2, 7.2],
                ..LensPulse::default()
            },
            ..SequencePlan::default()
        };
        assert!(p.validate().is_err());
    }
}
