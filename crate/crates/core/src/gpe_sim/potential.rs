use serde::{Deserialize, Serialize};

use super::grid::GridSpec;
use crate::chip_model::TrapLandscape;
use crate::ode::HermiteSeries;
use crate::sta_design::RampSchedule;

/// Which terms of the trap potential are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialMode {
    HarmonicFixed,
    AnharmonicFixed,
    AnharmonicRotating,
}

/// Trap parameters at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapSnapshot {
    /// Squared angular frequencies along the weak, transverse and vertical
    /// eigen-axes.
    pub omega2: [f64; 3],
    /// Vertical trap position; `None` centres the trap on the moving frame.
    pub z_t: Option<f64>,
    pub l3: f64,
    pub theta: f64,
}

impl TrapSnapshot {
    pub fn free() -> Self {
        Self::centred([0.0; 3])
    }

    pub fn centred(omega2: [f64; 3]) -> Self {
        Self {
            omega2,
            z_t: None,
            l3: f64::INFINITY,
            theta: 0.0,
        }
    }

    pub fn harmonic(omega2: [f64; 3], z_t: f64) -> Self {
        Self {
            omega2,
            z_t: Some(z_t),
            l3: f64::INFINITY,
            theta: 0.0,
        }
    }

    pub fn from_landscape(landscape: &TrapLandscape, z_t: f64) -> Self {
        Self {
            omega2: landscape.omega2(z_t),
            z_t: Some(z_t),
            l3: landscape.l3.eval(z_t),
            theta: landscape.theta.eval(z_t),
        }
    }

    /// Drops the terms `mode` does not include.
    pub fn effective(&self, mode: PotentialMode) -> Self {
        let mut s = *self;
        if mode != PotentialMode::AnharmonicRotating {
            s.theta = 0.0;
        }
        if mode == PotentialMode::HarmonicFixed {
            s.l3 = f64::INFINITY;
        }
        s
    }

    pub fn is_free(&self) -> bool {
        self.omega2.iter().all(|&w| w == 0.0)
    }

    /// `(w_X^2, w_Y^2, w_XY)` of the tilted transverse quadratic form.
    pub fn transverse_form(&self) -> (f64, f64, f64) {
        let (s, c) = self.theta.sin_cos();
        let [wx, wy, _] = self.omega2;
        (wx * c * c + wy * s * s, wx * s * s + wy * c * c, (wx - wy) * c * s)
    }

    /// Potential at lab position `(x, y, z)`, with `z_frame` standing in for a
    /// trap centred on the frame.
    pub fn potential(&self, mass: f64, x: f64, y: f64, z: f64, z_frame: f64) -> f64 {
        let (wxx, wyy, wxy) = self.transverse_form();
        let d = z - self.z_t.unwrap_or(z_frame);
        0.5 * mass
            * (wxx * x * x + wyy * y * y + 2.0 * wxy * x * y + self.omega2[2] * d * d * (1.0 + 2.0 * d / (3.0 * self.l3)))
    }

    pub fn max_omega(&self) -> f64 {
        self.omega2.iter().fold(0.0_f64, |m, &w| m.max(w)).sqrt()
    }
}

/// Potential sampled on `grid` placed at lab offset `origin`.
pub fn potential_array(grid: &GridSpec, mass: f64, trap: &TrapSnapshot, origin: [f64; 3]) -> Vec<f64> {
    let [xs, ys, zs] = [0, 1, 2].map(|a| grid.coordinates(a));
    let mut v = Vec::with_capacity(grid.len());
    for &z in &zs {
        for &y in &ys {
            for &x in &xs {
                v.push(trap.potential(mass, x + origin[0], y + origin[1], z + origin[2], origin[2]));
            }
        }
    }
    v
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DriveSegment {
    /// Trap follows the schedule; parameters from the landscape.
    Transport { position: HermiteSeries },
    Static(TrapSnapshot),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrivePiece {
    pub label: String,
    pub start: f64,
    pub duration: f64,
    pub segment: DriveSegment,
}

/// Piecewise trap history. After the last piece the final trap persists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrapDrive {
    pub landscape: Option<TrapLandscape>,
    pub pieces: Vec<DrivePiece>,
}

impl TrapDrive {
    pub fn constant(trap: TrapSnapshot) -> Self {
        Self {
            landscape: None,
            pieces: vec![DrivePiece {
                label: "static".into(),
                start: 0.0,
                duration: 0.0,
                segment: DriveSegment::Static(trap),
            }],
        }
    }

    /// Transport along `schedule` followed by the final trap.
    pub fn transport(schedule: &RampSchedule, landscape: &TrapLandscape) -> Self {
        let mut d = Self {
            landscape: Some(landscape.clone()),
            pieces: Vec::new(),
        };
        d.push(
            "transport",
            schedule.t_f(),
            DriveSegment::Transport {
                position: schedule.trap_position(),
            },
        );
        d
    }

    pub fn end(&self) -> f64 {
        self.pieces.last().map(|p| p.start + p.duration).unwrap_or(0.0)
    }

    pub fn push(&mut self, label: &str, duration: f64, segment: DriveSegment) {
        let start = self.end();
        self.pieces.push(DrivePiece {
            label: label.into(),
            start,
            duration,
            segment,
        });
    }

    /// Trap at the end of the last piece.
    pub fn final_trap(&self) -> TrapSnapshot {
        self.trap_at(self.end())
    }

    pub fn trap_at(&self, t: f64) -> TrapSnapshot {
        let piece = self
            .pieces
            .iter()
            .find(|p| t < p.start + p.duration)
            .or(self.pieces.last())
            .expect("drive has at least one piece");
        match &piece.segment {
            DriveSegment::Static(trap) => *trap,
            DriveSegment::Transport { position } => {
                let landscape = self.landscape.as_ref().expect("transport drive carries its landscape");
                TrapSnapshot::from_landscape(landscape, position.eval(t - piece.start))
            }
        }
    }

    /// Start times of every piece, used as mandatory step boundaries.
    pub fn boundaries(&self) -> Vec<f64> {
        self.pieces.iter().map(|p| p.start + p.duration).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn limits_reduce_bitwise_to_harmonic() {
        let g = GridSpec::new([16, 16, 16], [1e-4, 1e-5, 1e-5]).unwrap();
        let base = TrapSnapshot {
            omega2: [8.5e3, 1.5e7, 1.49e7],
            z_t: Some(1.2e-3),
            l3: f64::INFINITY,
            theta: 0.0,
        };
        let origin = [0.0, 0.0, 1.2e-3 + 3e-6];
        let m = 1.44e-25;
        let harmonic = potential_array(&g, m, &base.effective(PotentialMode::HarmonicFixed), origin);
        for mode in [PotentialMode::AnharmonicFixed, PotentialMode::AnharmonicRotating] {
            let v = potential_array(&g, m, &base.effective(mode), origin);
            assert!(v.iter().zip(&harmonic).all(|(a, b)| a.to_bits() == b.to_bits()));
        }
    }

    #[test]
    fn tilted_form_preserves_eigenvalues() {
        let t = TrapSnapshot {
            omega2: [1.0, 4.0, 9.0],
            z_t: Some(0.0),
            l3: f64::INFINITY,
            theta: 0.3,
        };
        let (a, b, c) = t.transverse_form();
        assert!((a + b - 5.0).abs() < 1e-12);
        assert!((a * b - c * c - 4.0).abs() < 1e-12);
    }
}
