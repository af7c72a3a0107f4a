//! Named operating points of the Z-wire transport and lensing sequence.

use serde::{Deserialize, Serialize};

use crate::chip_model::{trap_tables, AtomSpecies, ChipConfig, TrapLandscape, TrapTables};
use crate::error::{Error, Result};
use crate::pade::DEFAULT_TOLERANCE;
use crate::sta_design::{TrajectoryAnsatz, CHIRP_A, CHIRP_B};
use crate::units::{GAUSS, MM, MS};

pub const WIRE_CURRENT: f64 = 5.0;
pub const INITIAL_BIAS: f64 = 21.5 * GAUSS;
pub const FINAL_BIAS: f64 = 4.5 * GAUSS;
pub const TRANSPORT_TIME: f64 = 75.0 * MS;
/// End point of the transport that precedes delta-kick collimation.
pub const LENSING_Z_F: f64 = 1.35 * MM;

pub const SWEEP_BIAS_MIN: f64 = 4.0 * GAUSS;
pub const SWEEP_BIAS_MAX: f64 = 25.0 * GAUSS;
pub const SWEEP_SAMPLES: usize = 46;

/// Chip, species and fitted trap landscape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub chip: ChipConfig,
    pub species: AtomSpecies,
    pub tables: TrapTables,
    pub initial_bias: f64,
    pub final_bias: f64,
    /// Explicit end point of the transport; overrides `final_bias`.
    pub final_position: Option<f64>,
}

impl Scenario {
    pub fn build(chip: &ChipConfig, species: &AtomSpecies) -> Result<Self> {
        Self::build_with(chip, species, SWEEP_BIAS_MIN, SWEEP_BIAS_MAX, SWEEP_SAMPLES)
    }

    pub fn build_with(
        chip: &ChipConfig,
        species: &AtomSpecies,
        bias_min: f64,
        bias_max: f64,
        samples: usize,
    ) -> Result<Self> {
        let tables = trap_tables(chip, species, bias_min, bias_max, samples, DEFAULT_TOLERANCE)?;
        Ok(Self {
            chip: chip.clone(),
            species: *species,
            tables,
            initial_bias: INITIAL_BIAS,
            final_bias: FINAL_BIAS,
            final_position: None,
        })
    }

    /// The shipped Z wire with Rb-87.
    pub fn quantus() -> Result<Self> {
        Self::build(&ChipConfig::z_wire(WIRE_CURRENT, INITIAL_BIAS), &AtomSpecies::rb87())
    }

    pub fn landscape(&self) -> &TrapLandscape {
        &self.tables.landscape
    }

    fn position_for(&self, bias: f64) -> Result<f64> {
        self.landscape().z_of_bias(bias).ok_or_else(|| {
            Error::Validation(format!("bias {:.3} G outside the fitted sweep", bias / GAUSS))
        })
    }

    pub fn z_i(&self) -> Result<f64> {
        self.position_for(self.initial_bias)
    }

    pub fn z_f(&self) -> Result<f64> {
        match self.final_position {
            Some(z) => Ok(z),
            None => self.position_for(self.final_bias),
        }
    }

    /// Same chip and tables, transport ending at `z_f`.
    pub fn ending_at(&self, z_f: f64) -> Self {
        Self {
            final_position: Some(z_f),
            ..self.clone()
        }
    }

    pub fn chirped(&self, t_f: f64) -> Result<TrajectoryAnsatz> {
        Ok(TrajectoryAnsatz::chirped(self.z_i()?, self.z_f()?, t_f, CHIRP_A, CHIRP_B))
    }
}
