//! Mean-field dynamics of the condensate.
//!
//! The Gross–Pitaevskii equation is solved with a second-order split-step
//! Fourier method on a grid that rides with a classical centre-of-mass
//! trajectory and stretches with the scaling solution (see [`solver`]).
//! Ground states come from imaginary-time propagation.

pub mod frame;
pub mod grid;
pub mod observables;
pub mod potential;
pub mod solver;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use frame::{comoving_frame, lab_frame, FramePoint, FrameTransform};
pub use grid::{Fft3, GridSpec, WaveFunction};
pub use observables::{moments, rotate_widths, rotated_widths, widths, Moments};
pub use potential::{potential_array, DriveSegment, PotentialMode, TrapDrive, TrapSnapshot};
pub use solver::{
    chemical_potential_estimate, cloud_radii, ground_state, EnergyParts, GpeObservables, GpeSettings, GroundState,
    GroundStateSettings, Propagator, ScaledState, OBSERVABLES_HEADER,
};

use crate::chip_model::{AtomSpecies, TrapLandscape};
use crate::classical_sim::{integrate, ForceModel};
use crate::error::{Error, Result};
use crate::scaling_sim::{asymptotic_rates, expansion_temperature, SegmentSpan, RATE_WINDOW};
use crate::sequence::{SequencePlan, SequenceReport, TransportStage};
use crate::sta_design::RampSchedule;
use crate::units::hz_to_rad;

/// Result of a transport run.
#[derive(Debug, Clone)]
pub struct GpeRun {
    pub grid: GridSpec,
    pub ground_energy: EnergyParts,
    pub ground_iterations: usize,
    pub observables: Vec<GpeObservables>,
    pub final_state: ScaledState,
    pub frame: FrameTransform,
}

impl GpeRun {
    pub fn csv_rows(&self) -> Vec<[f64; 10]> {
        self.observables.iter().map(GpeObservables::csv_row).collect()
    }
}

/// Ground state of the initial trap of `drive`, on a grid sized from the
/// Thomas–Fermi estimate.
pub fn initial_state(
    drive: &TrapDrive,
    species: &AtomSpecies,
    settings: &GpeSettings,
    ground: &GroundStateSettings,
) -> Result<(ScaledState, GroundState)> {
    let trap = drive.trap_at(0.0).effective(settings.mode);
    let coupling = species.interaction_strength();
    let radii = cloud_radii(species.mass, coupling, trap.omega2.map(f64::sqrt));
    let grid = GridSpec::covering(settings.grid_n, radii, settings.extent_factor)?;
    let gs = ground_state(&grid, species.mass, coupling, &trap, ground)?;
    Ok((ScaledState::from_ground_state(gs.psi.clone(), trap.omega2, 0.0), gs))
}

/// Transport along `schedule` and a hold, in a frame riding on the classical
/// trajectory computed with `frame_model`. Snapshots of the co-moving
/// wavefunction are written to `snapshot_dir` at every output time when given.
pub fn simulate_transport(
    schedule: &RampSchedule,
    landscape: &TrapLandscape,
    species: &AtomSpecies,
    hold: f64,
    frame_model: ForceModel,
    settings: &GpeSettings,
    ground: &GroundStateSettings,
    snapshot_dir: Option<&Path>,
) -> Result<GpeRun> {
    let drive = TrapDrive::transport(schedule, landscape);
    let classical = integrate(schedule, frame_model, hold, landscape)?;
    let frame = FrameTransform::from_classical(&classical, schedule, landscape, frame_model, species.mass);
    let (mut state, gs) = initial_state(&drive, species, settings, ground)?;
    let mut prop = Propagator::new(&state, species.mass, species.interaction_strength(), &drive, &frame, *settings);
    let mass = species.mass;
    let mut count = 0usize;
    let observables = prop.run(&mut state, schedule.t_f() + hold, |obs, st| {
        if let Some(dir) = snapshot_dir {
            st.comoving(mass)
                .write_snapshot(&dir.join(format!("psi_{count:05}.bin")), obs.t)?;
        }
        count += 1;
        Ok(())
    })?;
    Ok(GpeRun {
        grid: state.phi.grid,
        ground_energy: gs.energy,
        ground_iterations: gs.iterations,
        observables,
        final_state: state,
        frame,
    })
}

/// GPE engine settings for whole sequences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpeSequenceSettings {
    pub gpe: GpeSettings,
    pub ground: GroundStateSettings,
}

impl Default for GpeSequenceSettings {
    fn default() -> Self {
        Self {
            gpe: GpeSettings {
                grid_n: [64, 32, 32],
                extent_factor: 12.0,
                ..GpeSettings::default()
            },
            ground: GroundStateSettings::default(),
        }
    }
}

/// Transport, hold, free flight, lens and free flight with the GPE. Traps
/// switch instantaneously; the lens is centred on the cloud.
pub fn run_sequence_gpe(
    stage: &TransportStage,
    plan: &SequencePlan,
    settings: &GpeSequenceSettings,
) -> Result<SequenceReport> {
    if plan.adiabatic_weak_axis {
        return Err(Error::InvalidInput(
            "the adiabatic weak-axis counterfactual is only available with the scaling engine".into(),
        ));
    }
    let species = &stage.species;
    let schedule = &stage.schedule;
    let landscape = &stage.landscape;
    let mut drive = TrapDrive::transport(schedule, landscape);
    let hold_trap = TrapSnapshot::from_landscape(landscape, schedule.z_f());
    drive.push("hold", plan.hold, DriveSegment::Static(hold_trap));
    drive.push("free1", plan.free1, DriveSegment::Static(TrapSnapshot::free()));
    let lens = TrapSnapshot::centred(plan.lens.frequencies_hz.map(|f| hz_to_rad(f).powi(2)));
    drive.push("lens", plan.lens.duration, DriveSegment::Static(lens));
    drive.push("free2", plan.free2, DriveSegment::Static(TrapSnapshot::free()));

    let model = match settings.gpe.mode {
        PotentialMode::HarmonicFixed => ForceModel::Harmonic,
        _ => ForceModel::Anharmonic,
    };
    let classical = integrate(schedule, model, plan.hold, landscape)?;
    let frame = FrameTransform::from_classical(&classical, schedule, landscape, model, species.mass);
    let (mut state, _) = initial_state(&drive, species, &settings.gpe, &settings.ground)?;
    let mut prop = Propagator::new(
        &state,
        species.mass,
        species.interaction_strength(),
        &drive,
        &frame,
        settings.gpe,
    );
    let obs = prop.run(&mut state, drive.end(), |_, _| Ok(()))?;

    let end = drive.end();
    let (rates, rate_residual) = if plan.free2 >= RATE_WINDOW {
        let t_start = end - RATE_WINDOW;
        let (times, widths): (Vec<f64>, Vec<[f64; 3]>) =
            obs.iter().filter(|o| o.t >= t_start - 1e-12).map(|o| (o.t, o.widths)).unzip();
        let fit = asymptotic_rates(&times, &widths, t_start - 1e-12)?;
        (fit.rates, fit.residual)
    } else {
        let n = obs.len();
        let (a, b) = (&obs[n - 2], &obs[n - 1]);
        (std::array::from_fn(|k| (b.widths[k] - a.widths[k]) / (b.t - a.t)), [0.0; 3])
    };
    let timeline = drive
        .pieces
        .iter()
        .map(|p| SegmentSpan {
            label: p.label.clone(),
            start: p.start,
            end: p.start + p.duration,
        })
        .collect();
    Ok(SequenceReport {
        times: obs.iter().map(|o| o.t).collect(),
        radii: obs.iter().map(|o| o.widths.map(|w| w * 7f64.sqrt())).collect(),
        rates,
        rate_residual,
        temperature: expansion_temperature(species.mass, rates),
        timeline,
        final_state: crate::scaling_sim::ScalingState {
            t: state.t,
            lambda: state.lambda,
            lambda_dot: state.lambda_dot,
        },
    })
}
