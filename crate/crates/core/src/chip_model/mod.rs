//! Magnetostatics of a thin-wire Z trap and the trap landscape derived
//! from it.
//!
//! The chip lies in the plane `Z = 0` with the atoms at `Z > 0`. Wires are
//! infinitely thin straight segments; the field of each is the closed-form
//! finite-segment Biot–Savart result.

mod characterize;
mod tables;

pub use characterize::{characterize_trap, hessian, TrapCharacterization};
pub use tables::{trap_tables, TrapLandscape, TrapTables, TABLE_HEADER};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{BOHR_MAGNETON, BOHR_RADIUS, GAUSS, MM, MU_0, RB87_MASS};

/// Closest approach to a wire axis at which the field is still evaluated.
pub const MIN_WIRE_DISTANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WireSegment {
    pub start: [f64; 3],
    pub end: [f64; 3],
    pub current: f64,
}

impl WireSegment {
    pub fn new(start: [f64; 3], end: [f64; 3], current: f64) -> Result<Self> {
        let seg = Self {
            start,
            end,
            current,
        };
        seg.validate()?;
        Ok(seg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.start == self.end {
            return Err(Error::Validation("wire segment has zero length".into()));
        }
        if !self.current.is_finite() {
            return Err(Error::Validation("wire current must be finite".into()));
        }
        if self.start.iter().chain(&self.end).any(|c| !c.is_finite()) {
            return Err(Error::Validation("wire end points must be finite".into()));
        }
        Ok(())
    }

    pub fn length(&self) -> f64 {
        (Vector3::from(self.end) - Vector3::from(self.start)).norm()
    }

    /// Field of this segment alone at `point`.
    pub fn field_at(&self, point: &Vector3<f64>) -> Result<Vector3<f64>> {
        let a = Vector3::from(self.start);
        let b = Vector3::from(self.end);
        let l = b - a;
        let r1 = point - a;
        let r2 = point - b;
        let c = l.cross(&r1);
        let c2 = c.norm_squared();
        let distance = c2.sqrt() / l.norm();
        if distance < MIN_WIRE_DISTANCE {
            return Err(Error::PointOnWire { distance });
        }
        let projection = l.dot(&r1) / r1.norm() - l.dot(&r2) / r2.norm();
        Ok(c * (MU_0 * self.current / (4.0 * std::f64::consts::PI) * projection / c2))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChipConfig {
    pub segments: Vec<WireSegment>,
    pub bias_direction: [f64; 3],
    /// Tesla.
    pub bias_magnitude: f64,
}

impl ChipConfig {
    pub fn new(segments: Vec<WireSegment>, bias_direction: [f64; 3], bias_magnitude: f64) -> Result<Self> {
        let cfg = Self {
            segments,
            bias_direction,
            bias_magnitude,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// The Z wire: a 4 mm central conductor along X with 16 mm leads
    /// leaving towards -Y from the -X end and +Y from the +X end, carrying
    /// `current` and immersed in a bias field along +Y.
    pub fn z_wire(current: f64, bias: f64) -> Self {
        let p0 = [-2.0 * MM, -16.0 * MM, 0.0];
        let p1 = [-2.0 * MM, 0.0, 0.0];
        let p2 = [2.0 * MM, 0.0, 0.0];
        let p3 = [2.0 * MM, 16.0 * MM, 0.0];
        Self {
            segments: vec![
                WireSegment { start: p0, end: p1, current },
                WireSegment { start: p1, end: p2, current },
                WireSegment { start: p2, end: p3, current },
            ],
            bias_direction: [0.0, 1.0, 0.0],
            bias_magnitude: bias,
        }
    }

    pub fn with_bias(&self, bias: f64) -> Self {
        Self {
            bias_magnitude: bias,
            ..self.clone()
        }
    }

    pub fn with_current(&self, current: f64) -> Self {
        let mut cfg = self.clone();
        for s in &mut cfg.segments {
            s.current = current;
        }
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        if self.segments.is_empty() {
            return Err(Error::Validation("chip needs at least one wire segment".into()));
        }
        for s in &self.segments {
            s.validate()?;
        }
        for (i, w) in self.segments.windows(2).enumerate() {
            let gap = (Vector3::from(w[0].end) - Vector3::from(w[1].start)).norm();
            if gap > 1e-12 {
                return Err(Error::Validation(format!(
                    "segments {i} and {} are not connected (gap {gap:.3e} m)",
                    i + 1
                )));
            }
        }
        let n = Vector3::from(self.bias_direction).norm();
        if (n - 1.0).abs() > 1e-12 {
            return Err(Error::Validation(format!("bias direction norm is {n}, expected 1")));
        }
        if !(self.bias_magnitude >= 0.0) || !self.bias_magnitude.is_finite() {
            return Err(Error::Validation(format!(
                "bias magnitude must be finite and non-negative, got {} G",
                self.bias_magnitude / GAUSS
            )));
        }
        Ok(())
    }

    pub fn bias_vector(&self) -> Vector3<f64> {
        Vector3::from(self.bias_direction) * self.bias_magnitude
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtomSpecies {
    pub mass: f64,
    pub g_f: f64,
    pub m_f: f64,
    pub mu_b: f64,
    pub a_s: f64,
    pub atom_number: f64,
}

impl AtomSpecies {
    /// Rb-87 in |F=2, m_F=2>, a_s = 98 a0, 1e5 atoms.
    pub fn rb87() -> Self {
        Self {
            mass: RB87_MASS,
            g_f: 0.5,
            m_f: 2.0,
            mu_b: BOHR_MAGNETON,
            a_s: 98.0 * BOHR_RADIUS,
            atom_number: 1e5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.g_f * self.m_f > 0.0) {
            return Err(Error::Validation("m_F g_F must be positive (low-field seeker)".into()));
        }
        if !(self.mass > 0.0 && self.a_s > 0.0 && self.atom_number > 0.0 && self.mu_b > 0.0) {
            return Err(Error::Validation(
                "mass, scattering length, atom number and magneton must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Contact coupling `g N` with `g = 4 pi hbar^2 a_s / m`.
    pub fn interaction_strength(&self) -> f64 {
        4.0 * std::f64::consts::PI * crate::units::HBAR.powi(2) * self.a_s / self.mass * self.atom_number
    }

    pub fn magnetic_moment(&self) -> f64 {
        self.m_f * self.g_f * self.mu_b
    }
}

/// Total field (wires plus bias) at `point`.
pub fn field_at(config: &ChipConfig, point: [f64; 3]) -> Result<[f64; 3]> {
    field_vec(config, &Vector3::from(point)).map(Into::into)
}

pub(crate) fn field_vec(config: &ChipConfig, p: &Vector3<f64>) -> Result<Vector3<f64>> {
    let mut b = config.bias_vector();
    for s in &config.segments {
        b += s.field_at(p)?;
    }
    Ok(b)
}

/// Zeeman potential `m_F g_F mu_B |B|`.
pub fn potential_at(config: &ChipConfig, species: &AtomSpecies, point: [f64; 3]) -> Result<f64> {
    potential_vec(config, species, &Vector3::from(point))
}

pub(crate) fn potential_vec(config: &ChipConfig, species: &AtomSpecies, p: &Vector3<f64>) -> Result<f64> {
    Ok(species.magnetic_moment() * field_vec(config, p)?.norm())
}
