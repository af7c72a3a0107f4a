use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{characterize_trap, AtomSpecies, ChipConfig, TrapCharacterization};
use crate::error::{Error, Result};
use crate::pade::{fit_pade_auto, PadeFit, DEFAULT_ORDERS};
use crate::units::{GAUSS, MM};

pub const TABLE_HEADER: [&str; 7] = [
    "B_bias_G", "z_t_mm", "nu_x_Hz", "nu_y_Hz", "nu_z_Hz", "L3_mm", "theta_deg",
];

/// Rational fits of every trap quantity against the trap distance `z_t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrapLandscape {
    /// Bias field (T).
    pub bias: PadeFit,
    /// Squared angular frequencies along the weak, transverse and vertical
    /// eigen-axes (rad²/s²).
    pub omega2_x: PadeFit,
    pub omega2_y: PadeFit,
    pub omega2_z: PadeFit,
    /// Cubic length (m).
    pub l3: PadeFit,
    /// Tilt angle (rad).
    pub theta: PadeFit,
}

impl TrapLandscape {
    pub fn domain(&self) -> (f64, f64) {
        self.omega2_z.domain
    }

    pub fn omega2(&self, z: f64) -> [f64; 3] {
        [self.omega2_x.eval(z), self.omega2_y.eval(z), self.omega2_z.eval(z)]
    }

    /// `d omega^2 / d z_t` per axis.
    pub fn omega2_slope(&self, z: f64) -> [f64; 3] {
        [
            self.omega2_x.derivative(z),
            self.omega2_y.derivative(z),
            self.omega2_z.derivative(z),
        ]
    }

    /// Trap distance producing bias `b` (T), if inside the fitted range.
    pub fn z_of_bias(&self, b: f64) -> Option<f64> {
        self.bias.invert(b)
    }

    pub fn fits(&self) -> [(&'static str, &PadeFit); 6] {
        [
            ("bias", &self.bias),
            ("omega2_x", &self.omega2_x),
            ("omega2_y", &self.omega2_y),
            ("omega2_z", &self.omega2_z),
            ("l3", &self.l3),
            ("theta", &self.theta),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrapTables {
    /// Sorted by decreasing bias, i.e. increasing distance.
    pub rows: Vec<TrapCharacterization>,
    pub landscape: TrapLandscape,
}

impl TrapTables {
    /// Rows in the CSV layout of [`TABLE_HEADER`].
    pub fn csv_rows(&self) -> Vec<[f64; 7]> {
        self.rows
            .iter()
            .map(|r| {
                [
                    r.bias / GAUSS,
                    r.z_t / MM,
                    r.nu_x,
                    r.nu_y,
                    r.nu_z,
                    r.l3 / MM,
                    r.theta.to_degrees(),
                ]
            })
            .collect()
    }
}

/// Sweeps the bias between `bias_min` and `bias_max` (T), characterizes the
/// trap at each value and fits every quantity against `z_t`.
///
/// Samples are uniform in `1/B`, which is close to uniform in distance.
pub fn trap_tables(
    config: &ChipConfig,
    species: &AtomSpecies,
    bias_min: f64,
    bias_max: f64,
    n_samples: usize,
    tolerance: f64,
) -> Result<TrapTables> {
    if n_samples < 20 {
        return Err(Error::InsufficientSamples {
            needed: 20,
            got: n_samples,
        });
    }
    let (lo, hi) = (0.1 * GAUSS, 50.0 * GAUSS);
    if !(bias_min >= lo && bias_max <= hi && bias_min < bias_max) {
        return Err(Error::Validation(format!(
            "bias range [{}, {}] G must be increasing and inside [0.1, 50] G",
            bias_min / GAUSS,
            bias_max / GAUSS
        )));
    }
    let inv_hi = 1.0 / bias_min;
    let inv_lo = 1.0 / bias_max;
    let rows: Vec<TrapCharacterization> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let inv = inv_lo + (inv_hi - inv_lo) * i as f64 / (n_samples - 1) as f64;
            characterize_trap(&config.with_bias(1.0 / inv), species)
        })
        .collect::<Result<_>>()?;
    if rows.windows(2).any(|w| !(w[1].z_t > w[0].z_t)) {
        return Err(Error::Validation(
            "trap distance is not monotone in the bias over the requested range".into(),
        ));
    }

    let fit = |value: &dyn Fn(&TrapCharacterization) -> f64| -> Result<PadeFit> {
        let samples: Vec<(f64, f64)> = rows.iter().map(|r| (r.z_t, value(r))).collect();
        fit_pade_auto(&samples, &DEFAULT_ORDERS, tolerance)
    };
    let w2 = |nu: f64| (2.0 * std::f64::consts::PI * nu).powi(2);
    let landscape = TrapLandscape {
        bias: fit(&|r| r.bias)?,
        omega2_x: fit(&|r| w2(r.nu_x))?,
        omega2_y: fit(&|r| w2(r.nu_y))?,
        omega2_z: fit(&|r| w2(r.nu_z))?,
        l3: fit(&|r| r.l3)?,
        theta: fit(&|r| r.theta)?,
    };
    if !landscape.bias.is_strictly_monotone() {
        return Err(Error::Validation("bias fit is not monotone in z_t".into()));
    }
    Ok(TrapTables { rows, landscape })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn too_few_samples() {
        let cfg = ChipConfig::z_wire(5.0, 10.0 * GAUSS);
        let err = trap_tables(&cfg, &AtomSpecies::rb87(), 4.0 * GAUSS, 25.0 * GAUSS, 1, 1e-4).unwrap_err();
        assert!(matches!(err, Error::InsufficientSamples { got: 1, .. }));
    }

    #[test]
    fn range_outside_limits() {
        let cfg = ChipConfig::z_wire(5.0, 10.0 * GAUSS);
        assert!(trap_tables(&cfg, &AtomSpecies::rb87(), 4.0 * GAUSS, 60.0 * GAUSS, 30, 1e-4).is_err());
    }
}
