use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::grid::WaveFunction;
use crate::chip_model::TrapLandscape;
use crate::classical_sim::{acceleration, ClassicalRun, ForceModel};
use crate::ode::HermiteSeries;
use crate::sta_design::RampSchedule;
use crate::units::HBAR;

/// Frame position, wavevector and phase at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FramePoint {
    pub r_a: [f64; 3],
    pub k_a: [f64; 3],
    pub phi_a: f64,
    /// Vertical acceleration of the frame.
    pub accel: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum FrameKind {
    Fixed(FramePoint),
    Classical {
        position: HermiteSeries,
        trap: HermiteSeries,
        landscape: TrapLandscape,
        model: ForceModel,
        /// Times and accumulated phases at the classical samples.
        times: Vec<f64>,
        phases: Vec<f64>,
        /// Trap frozen until here, free flight afterwards.
        release: f64,
    },
}

/// Co-moving frame following a classical trajectory along Z; X and Y stay
/// at zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameTransform {
    mass: f64,
    kind: FrameKind,
}

impl FrameTransform {
    pub fn fixed(mass: f64, point: FramePoint) -> Self {
        Self {
            mass,
            kind: FrameKind::Fixed(point),
        }
    }

    pub fn at_rest(mass: f64, z: f64) -> Self {
        Self::fixed(
            mass,
            FramePoint {
                r_a: [0.0, 0.0, z],
                k_a: [0.0; 3],
                phi_a: 0.0,
                accel: 0.0,
            },
        )
    }

    /// Frame riding on `run`, integrated with `model` through `schedule`.
    /// Beyond the last sample the frame moves ballistically.
    pub fn from_classical(
        run: &ClassicalRun,
        schedule: &RampSchedule,
        landscape: &TrapLandscape,
        model: ForceModel,
        mass: f64,
    ) -> Self {
        let s = &run.samples;
        let dt = s[1].t - s[0].t;
        let position = HermiteSeries::new(
            s[0].t,
            dt,
            s.iter().map(|p| p.z).collect(),
            s.iter().map(|p| p.v).collect(),
        );
        let mut phases = Vec::with_capacity(s.len());
        let mut acc = 0.0;
        phases.push(0.0);
        for w in s.windows(2) {
            acc += 0.25 * mass / HBAR * (w[0].v * w[0].v + w[1].v * w[1].v) * (w[1].t - w[0].t);
            phases.push(acc);
        }
        Self {
            mass,
            kind: FrameKind::Classical {
                position,
                trap: schedule.trap_position(),
                landscape: landscape.clone(),
                model,
                times: s.iter().map(|p| p.t).collect(),
                phases,
                release: s.last().expect("non-empty run").t,
            },
        }
    }

    pub fn at(&self, t: f64) -> FramePoint {
        match &self.kind {
            FrameKind::Fixed(p) => *p,
            FrameKind::Classical {
                position,
                trap,
                landscape,
                model,
                times,
                phases,
                release,
            } => {
                let k_of = |v: f64| [0.0, 0.0, self.mass * v / HBAR];
                if t > *release {
                    let (z, v) = position.eval_with_slope(*release);
                    let tau = t - release;
                    return FramePoint {
                        r_a: [0.0, 0.0, z + v * tau],
                        k_a: k_of(v),
                        phi_a: phases.last().copied().unwrap_or(0.0) + 0.5 * self.mass * v * v / HBAR * tau,
                        accel: 0.0,
                    };
                }
                let (z, v) = position.eval_with_slope(t);
                let dt = position.dt;
                let k = (((t - times[0]) / dt).floor().max(0.0) as usize).min(times.len() - 2);
                let u = ((t - times[k]) / dt).clamp(0.0, 1.0);
                FramePoint {
                    r_a: [0.0, 0.0, z],
                    k_a: k_of(v),
                    phi_a: phases[k] + u * (phases[k + 1] - phases[k]),
                    accel: acceleration(landscape, *model, z, trap.eval(t)),
                }
            }
        }
    }
}

fn apply_frame_phase(psi: &mut WaveFunction, p: &FramePoint, sign: f64) {
    let [xs, ys, zs] = [0, 1, 2].map(|a| psi.grid.coordinates(a));
    let o = psi.origin;
    let mut idx = 0;
    for &z in &zs {
        for &y in &ys {
            for &x in &xs {
                let arg = p.k_a[0] * (x + o[0]) + p.k_a[1] * (y + o[1]) + p.k_a[2] * (z + o[2]) + p.phi_a;
                psi.data[idx] *= Complex64::from_polar(1.0, sign * arg);
                idx += 1;
            }
        }
    }
}

/// Lab-frame wavefunction from a co-moving one at time `t`.
pub fn lab_frame(psi: &WaveFunction, frame: &FrameTransform, t: f64) -> WaveFunction {
    let p = frame.at(t);
    let mut out = psi.clone();
    apply_frame_phase(&mut out, &p, 1.0);
    out.origin = std::array::from_fn(|a| psi.origin[a] + p.r_a[a]);
    out
}

/// Inverse of [`lab_frame`].
pub fn comoving_frame(psi: &WaveFunction, frame: &FrameTransform, t: f64) -> WaveFunction {
    let p = frame.at(t);
    let mut out = psi.clone();
    out.origin = std::array::from_fn(|a| psi.origin[a] - p.r_a[a]);
    apply_frame_phase(&mut out, &p, -1.0);
    out
}

#[cfg(test)]
mod tests {
    use super::super::grid::{Fft3, GridSpec};
    use super::*;
    use crate::units::RB87_MASS;

    fn blob() -> WaveFunction {
        let g = GridSpec::new([32, 16, 64], [20e-6, 10e-6, 40e-6]).unwrap();
        let mut psi = WaveFunction::from_fn(g, |x, y, z| {
            Complex64::new((-(x * x + y * y) / 8e-12 - z * z / 3.2e-11).exp(), 0.0)
        });
        psi.normalize();
        psi
    }

    fn kicked() -> FrameTransform {
        FrameTransform::fixed(
            RB87_MASS,
            FramePoint {
                r_a: [0.0, 0.0, 1.3e-3],
                k_a: [0.0, 0.0, 4.0e5],
                phi_a: 2.1,
                accel: 0.0,
            },
        )
    }

    #[test]
    fn resting_frame_at_origin_is_identity() {
        let psi = blob();
        let lab = lab_frame(&psi, &FrameTransform::at_rest(RB87_MASS, 0.0), 0.0);
        assert_eq!(lab, psi);
    }

    #[test]
    fn comoving_inverts_lab() {
        let psi = blob();
        let frame = kicked();
        let back = comoving_frame(&lab_frame(&psi, &frame, 0.0), &frame, 0.0);
        assert_eq!(back.origin, psi.origin);
        let peak = psi.data.iter().map(|c| c.norm()).fold(0.0, f64::max);
        let err = back.data.iter().zip(&psi.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-14 * peak, "{:e}", err / peak);
    }

    #[test]
    fn lab_momentum_carries_frame_wavevector() {
        let psi = blob();
        let lab = lab_frame(&psi, &kicked(), 0.0);
        assert!((lab.origin[2] - 1.3e-3).abs() < 1e-18);
        let mut spec = lab.data.clone();
        Fft3::new(&lab.grid).forward(&mut spec);
        let kz = lab.grid.wavenumbers(2);
        let [nx, ny, _] = lab.grid.n;
        let (mut w, mut s) = (0.0, 0.0);
        for (idx, c) in spec.iter().enumerate() {
            let d = c.norm_sqr();
            w += d * kz[idx / (nx * ny)];
            s += d;
        }
        assert!((w / s / 4.0e5 - 1.0).abs() < 1e-6, "{}", w / s);
    }
}
