//! Split-step propagation in a frame that follows the centre of mass and
//! expands with the scaling solution `lambda(t)`.
//!
//! With `x = lambda * rho` and the quadratic phase `m lambda' x^2 / (2 hbar
//! lambda)` removed, the field `phi(rho)` obeys
//! `i hbar phi' = [sum -hbar^2 d^2/(2 m lambda^2) + (1/P)(sum m w0^2 rho^2 / 2 + g |phi|^2) + W] phi`
//! where `P = lambda_x lambda_y lambda_z` and `W` is whatever the true
//! potential adds beyond its axis-aligned harmonic part. The transformation
//! is exact; it only keeps the field compact on a fixed grid.

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::frame::{FramePoint, FrameTransform};
use super::grid::{Fft3, GridSpec, WaveFunction};
use super::observables::{moments, rotate_widths};
use super::potential::{PotentialMode, TrapDrive, TrapSnapshot};
use crate::error::{Error, Result};
use crate::ode::rk4_step;
use crate::units::HBAR;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpeSettings {
    pub mode: PotentialMode,
    pub grid_n: [usize; 3],
    /// Grid side length in units of the initial Thomas–Fermi radius.
    pub extent_factor: f64,
    /// Upper bound on the real-time step.
    pub dt_max: f64,
    /// Constant step instead of the adaptive choice.
    pub fixed_dt: Option<f64>,
    /// Bound on `dt * mu_eff / hbar`.
    pub mu_fraction: f64,
    /// Bound on `dt` as a fraction of the fastest oscillation period.
    pub period_fraction: f64,
    pub output_interval: f64,
    /// Largest boundary-to-peak density ratio before the run aborts.
    pub overflow_ratio: f64,
}

impl Default for GpeSettings {
    fn default() -> Self {
        Self {
            mode: PotentialMode::HarmonicFixed,
            grid_n: [64, 64, 64],
            extent_factor: 6.0,
            dt_max: 250e-6,
            fixed_dt: None,
            mu_fraction: 0.1,
            period_fraction: 1.0 / 40.0,
            output_interval: 0.5e-3,
            overflow_ratio: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundStateSettings {
    /// First imaginary-time step; defaults to `0.2 hbar / mu`.
    pub dt: Option<f64>,
    /// Relative chemical-potential change per step that counts as converged.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Step refinements after the first convergence, each dividing dt by 4.
    pub refinements: usize,
    pub check_every: usize,
}

impl Default for GroundStateSettings {
    fn default() -> Self {
        Self {
            dt: None,
            tolerance: 1e-10,
            max_iterations: 40_000,
            refinements: 1,
            check_every: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyParts {
    pub kinetic: f64,
    pub potential: f64,
    pub interaction: f64,
}

impl EnergyParts {
    pub fn total(&self) -> f64 {
        self.kinetic + self.potential + self.interaction
    }

    pub fn chemical_potential(&self) -> f64 {
        self.kinetic + self.potential + 2.0 * self.interaction
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundState {
    pub psi: WaveFunction,
    pub energy: EnergyParts,
    pub iterations: usize,
    pub final_dt: f64,
    /// Energy at each convergence check.
    pub energy_history: Vec<f64>,
}

/// Field in the scaled frame together with the scaling factors.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledState {
    pub t: f64,
    pub phi: WaveFunction,
    pub lambda: [f64; 3],
    pub lambda_dot: [f64; 3],
    /// Reference squared frequencies of the scaling equations.
    pub omega0_sq: [f64; 3],
}

impl ScaledState {
    pub fn from_ground_state(psi: WaveFunction, omega0_sq: [f64; 3], t: f64) -> Self {
        Self {
            t,
            phi: psi,
            lambda: [1.0; 3],
            lambda_dot: [0.0; 3],
            omega0_sq,
        }
    }

    fn scale_product(&self) -> f64 {
        self.lambda.iter().product()
    }

    /// Wavefunction in the co-moving (unscaled) frame.
    pub fn comoving(&self, mass: f64) -> WaveFunction {
        let grid = self.phi.grid.scaled(self.lambda);
        let [xs, ys, zs] = [0, 1, 2].map(|a| grid.coordinates(a));
        let amp = self.scale_product().powf(-0.5);
        let c: [f64; 3] = std::array::from_fn(|a| mass * self.lambda_dot[a] / (2.0 * HBAR * self.lambda[a]));
        let mut data = Vec::with_capacity(grid.len());
        let mut idx = 0;
        for &z in &zs {
            for &y in &ys {
                for &x in &xs {
                    let phase = c[0] * x * x + c[1] * y * y + c[2] * z * z;
                    data.push(self.phi.data[idx] * Complex64::from_polar(amp, phase));
                    idx += 1;
                }
            }
        }
        WaveFunction {
            grid,
            origin: self.phi.origin,
            data,
        }
    }
}

/// Snapshot of the observables written to the GPE CSV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpeObservables {
    pub t: f64,
    /// Lab-frame centre of mass along Z.
    pub z_atoms: f64,
    /// Offset of the centre of mass from the frame.
    pub z_offset: f64,
    pub widths: [f64; 3],
    pub rotated: [f64; 3],
    pub norm: f64,
    pub energy: f64,
    pub lambda: [f64; 3],
}

impl GpeObservables {
    pub fn csv_row(&self) -> [f64; 10] {
        [
            self.t,
            self.z_atoms,
            self.widths[0],
            self.widths[1],
            self.widths[2],
            self.rotated[0],
            self.rotated[1],
            self.rotated[2],
            self.norm,
            self.energy,
        ]
    }
}

pub const OBSERVABLES_HEADER: [&str; 10] = [
    "t_s", "Za_m", "dX_m", "dY_m", "dZ_m", "dx_m", "dy_m", "dz_m", "norm", "energy_J",
];

/// Thomas–Fermi chemical potential, or the zero-point energy without
/// interactions.
pub fn chemical_potential_estimate(mass: f64, coupling: f64, omega: [f64; 3]) -> f64 {
    let wbar = (omega[0] * omega[1] * omega[2]).cbrt();
    let zero_point = 0.5 * HBAR * omega.iter().sum::<f64>();
    if coupling <= 0.0 {
        return zero_point;
    }
    let a_osc = (HBAR / (mass * wbar)).sqrt();
    // gN = 4 pi hbar^2 N a_s / m
    let n_as = coupling * mass / (4.0 * std::f64::consts::PI * HBAR * HBAR);
    (0.5 * HBAR * wbar * (15.0 * n_as / a_osc).powf(0.4)).max(zero_point)
}

/// Extent of the cloud used to size grids: Thomas–Fermi radii, or twice the
/// oscillator length for a weakly interacting gas.
pub fn cloud_radii(mass: f64, coupling: f64, omega: [f64; 3]) -> [f64; 3] {
    let mu = chemical_potential_estimate(mass, coupling, omega);
    std::array::from_fn(|a| {
        let tf = (2.0 * mu / (mass * omega[a] * omega[a])).sqrt();
        tf.max(2.0 * (HBAR / (mass * omega[a])).sqrt())
    })
}

struct Workspace {
    grid: GridSpec,
    fft: Fft3,
    rho: [Vec<f64>; 3],
    k2: [Vec<f64>; 3],
    k: [Vec<f64>; 3],
}

impl Workspace {
    fn new(grid: GridSpec) -> Self {
        Self {
            grid,
            fft: Fft3::new(&grid),
            rho: [0, 1, 2].map(|a| grid.coordinates(a)),
            k: [0, 1, 2].map(|a| grid.wavenumbers(a)),
            k2: [0, 1, 2].map(|a| grid.wavenumbers(a).iter().map(|k| k * k).collect()),
        }
    }

    /// Multiplies by `f_x(i) f_y(j) f_z(k)` in spectral space.
    fn apply_separable_spectral(&mut self, data: &mut [Complex64], f: [Vec<Complex64>; 3]) {
        self.fft.forward(data);
        let [nx, ny, nz] = self.grid.n;
        let mut idx = 0;
        for k in 0..nz {
            for j in 0..ny {
                let fyz = f[1][j] * f[2][k];
                for i in 0..nx {
                    data[idx] *= f[0][i] * fyz;
                    idx += 1;
                }
            }
        }
        self.fft.inverse(data);
    }

    /// Energy of a scaled-frame field; `lab_potential` takes co-moving
    /// coordinates.
    fn energy(
        &mut self,
        phi: &WaveFunction,
        mass: f64,
        coupling: f64,
        lambda: [f64; 3],
        lambda_dot: [f64; 3],
        lab_potential: impl Fn(f64, f64, f64) -> f64,
    ) -> EnergyParts {
        let dv = self.grid.cell_volume();
        let n = self.grid.len() as f64;
        let [nx, ny, nz] = self.grid.n;
        let mut spec = phi.data.clone();
        self.fft.forward(&mut spec);
        let mut kin = [0.0; 3];
        let mut idx = 0;
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    let d = spec[idx].norm_sqr();
                    kin[0] += d * self.k2[0][i];
                    kin[1] += d * self.k2[1][j];
                    kin[2] += d * self.k2[2][k];
                    idx += 1;
                }
            }
        }
        let mut kinetic = 0.0;
        for a in 0..3 {
            kinetic += HBAR * HBAR / (2.0 * mass * lambda[a] * lambda[a]) * kin[a] * dv / n;
        }
        for a in 0..3 {
            if lambda_dot[a] == 0.0 {
                continue;
            }
            let mut deriv = spec.clone();
            let mut idx = 0;
            for k in 0..nz {
                for j in 0..ny {
                    for i in 0..nx {
                        let ka = [self.k[0][i], self.k[1][j], self.k[2][k]][a];
                        deriv[idx] *= Complex64::new(0.0, ka / n);
                        idx += 1;
                    }
                }
            }
            self.fft.inverse(&mut deriv);
            let (mut rho2, mut cross) = (0.0, 0.0);
            let mut idx = 0;
            for k in 0..nz {
                for j in 0..ny {
                    for i in 0..nx {
                        let r = [self.rho[0][i], self.rho[1][j], self.rho[2][k]][a];
                        let p = phi.data[idx];
                        rho2 += r * r * p.norm_sqr();
                        cross += r * (p.conj() * deriv[idx]).im;
                        idx += 1;
                    }
                }
            }
            kinetic += 0.5 * mass * lambda_dot[a] * lambda_dot[a] * rho2 * dv
                + HBAR * lambda_dot[a] / lambda[a] * cross * dv;
        }
        let product: f64 = lambda.iter().product();
        let (mut pot, mut int) = (0.0, 0.0);
        let mut idx = 0;
        for k in 0..nz {
            let z = lambda[2] * self.rho[2][k];
            for j in 0..ny {
                let y = lambda[1] * self.rho[1][j];
                for i in 0..nx {
                    let x = lambda[0] * self.rho[0][i];
                    let d = phi.data[idx].norm_sqr();
                    pot += lab_potential(x, y, z) * d;
                    int += d * d;
                    idx += 1;
                }
            }
        }
        EnergyParts {
            kinetic,
            potential: pot * dv,
            interaction: 0.5 * coupling / product * int * dv,
        }
    }
}

fn initial_guess(grid: &GridSpec, mass: f64, coupling: f64, omega: [f64; 3], v: &[f64]) -> WaveFunction {
    let mu = chemical_potential_estimate(mass, coupling, omega);
    let mut psi = if coupling > 0.0 {
        let mut psi = WaveFunction::zeros(*grid);
        for (p, &vv) in psi.data.iter_mut().zip(v) {
            *p = Complex64::new(((mu - vv).max(0.0) / coupling).sqrt() + 1e-3 * (mu / coupling).sqrt() * (-(vv / mu).min(50.0)).exp(), 0.0);
        }
        psi
    } else {
        let s: [f64; 3] = std::array::from_fn(|a| (HBAR / (2.0 * mass * omega[a])).sqrt());
        WaveFunction::from_fn(*grid, |x, y, z| {
            Complex64::new((-(x * x) / (4.0 * s[0] * s[0]) - y * y / (4.0 * s[1] * s[1]) - z * z / (4.0 * s[2] * s[2])).exp(), 0.0)
        })
    };
    psi.normalize();
    psi
}

/// Stationary state of `trap` (centred on the grid) by imaginary-time
/// propagation. `coupling` is `g N`.
pub fn ground_state(
    grid: &GridSpec,
    mass: f64,
    coupling: f64,
    trap: &TrapSnapshot,
    settings: &GroundStateSettings,
) -> Result<GroundState> {
    grid.validate()?;
    if trap.omega2.iter().any(|&w| !(w > 0.0)) {
        return Err(Error::NonPositiveFrequency(trap.omega2.iter().cloned().fold(f64::INFINITY, f64::min)));
    }
    let trap = TrapSnapshot { z_t: None, ..*trap };
    let omega = trap.omega2.map(f64::sqrt);
    let v = super::potential::potential_array(grid, mass, &trap, [0.0; 3]);
    let mut ws = Workspace::new(*grid);
    let mut psi = initial_guess(grid, mass, coupling, omega, &v);
    let dv = grid.cell_volume();
    let mu_est = chemical_potential_estimate(mass, coupling, omega);
    let mut dt = settings.dt.unwrap_or(0.2 * HBAR / mu_est);
    let n = grid.len() as f64;

    let energy_of = |ws: &mut Workspace, psi: &WaveFunction| {
        ws.energy(psi, mass, coupling, [1.0; 3], [0.0; 3], |x, y, z| trap.potential(mass, x, y, z, 0.0))
    };
    let mut energy = energy_of(&mut ws, &psi);
    let mut history = vec![energy.total()];
    let mut saved = psi.clone();
    let mut level = 0;
    let mut iterations = 0;
    let check = settings.check_every.max(1);
    loop {
        let kin: [Vec<Complex64>; 3] = std::array::from_fn(|a| {
            ws.k2[a]
                .iter()
                .map(|k2| Complex64::new((-dt * HBAR * k2 / (2.0 * mass)).exp() / if a == 0 { n } else { 1.0 }, 0.0))
                .collect()
        });
        for _ in 0..check {
            for (p, &vv) in psi.data.iter_mut().zip(&v) {
                *p *= (-(vv + coupling * p.norm_sqr()) * dt / (2.0 * HBAR)).exp();
            }
            ws.apply_separable_spectral(&mut psi.data, kin.clone());
            // The nonlinear half-step must see a unit-norm density.
            psi.normalize();
            for (p, &vv) in psi.data.iter_mut().zip(&v) {
                *p *= (-(vv + coupling * p.norm_sqr()) * dt / (2.0 * HBAR)).exp();
            }
            let s = (psi.data.iter().map(|c| c.norm_sqr()).sum::<f64>() * dv).sqrt();
            psi.data.iter_mut().for_each(|c| *c /= s);
        }
        iterations += check;
        let next = energy_of(&mut ws, &psi);
        if next.total() > energy.total() + 1e-12 * energy.total().abs() && level == 0 && iterations > check {
            // Splitting error dominates: restart the block with a smaller step.
            psi = saved.clone();
            dt *= 0.5;
            continue;
        }
        let change = (next.chemical_potential() - energy.chemical_potential()).abs()
            / next.chemical_potential().abs()
            / check as f64;
        energy = next;
        history.push(energy.total());
        saved = psi.clone();
        if change < settings.tolerance {
            if level >= settings.refinements {
                return Ok(GroundState {
                    psi,
                    energy,
                    iterations,
                    final_dt: dt,
                    energy_history: history,
                });
            }
            level += 1;
            dt *= 0.25;
        }
        if iterations >= settings.max_iterations {
            return Err(Error::NotConverged {
                iterations,
                detail: format!("relative chemical-potential change {change:.2e} per step"),
            });
        }
    }
}

/// Real-time propagation in the scaled co-moving frame.
pub struct Propagator<'a> {
    mass: f64,
    coupling: f64,
    drive: &'a TrapDrive,
    frame: &'a FrameTransform,
    settings: GpeSettings,
    /// Chemical potential of the initial state.
    mu0: f64,
    ws: Workspace,
}

impl<'a> Propagator<'a> {
    pub fn new(
        state: &ScaledState,
        mass: f64,
        coupling: f64,
        drive: &'a TrapDrive,
        frame: &'a FrameTransform,
        settings: GpeSettings,
    ) -> Self {
        let mu0 = chemical_potential_estimate(mass, coupling, state.omega0_sq.map(f64::sqrt));
        Self {
            mass,
            coupling,
            drive,
            frame,
            settings,
            mu0,
            ws: Workspace::new(state.phi.grid),
        }
    }

    fn trap(&self, t: f64) -> TrapSnapshot {
        self.drive.trap_at(t).effective(self.settings.mode)
    }

    fn scaling_rhs(&self, t: f64, y: &[f64; 6], w0: [f64; 3]) -> [f64; 6] {
        let w2 = self.trap(t).omega2;
        let prod = y[0] * y[1] * y[2];
        [
            y[3],
            y[4],
            y[5],
            -w2[0] * y[0] + w0[0] / (y[0] * prod),
            -w2[1] * y[1] + w0[1] / (y[1] * prod),
            -w2[2] * y[2] + w0[2] / (y[2] * prod),
        ]
    }

    fn step_size(&self, state: &ScaledState, t: f64) -> f64 {
        if let Some(dt) = self.settings.fixed_dt {
            return dt;
        }
        let p = state.scale_product();
        let trap = self.trap(t);
        let scaled = (0..3)
            .map(|a| state.omega0_sq[a].sqrt() / (state.lambda[a] * p.sqrt()))
            .fold(0.0, f64::max);
        let omega = scaled.max(trap.max_omega());
        let by_period = self.settings.period_fraction * 2.0 * std::f64::consts::PI / omega;
        let by_mu = self.settings.mu_fraction * HBAR * p / self.mu0;
        self.settings.dt_max.min(by_period).min(by_mu)
    }

    /// Multiplies by `exp(-i tau H_pot / hbar)`, with the trap taken at
    /// `t_trap` (a left limit when flushing at a switch).
    fn potential_step(&self, state: &mut ScaledState, tau: f64, t_trap: f64) {
        let t = state.t;
        let trap = self.trap(t_trap);
        let frame: FramePoint = self.frame.at(t);
        let m = self.mass;
        let lam = state.lambda;
        let p = state.scale_product();
        let d = frame.r_a[2] - trap.z_t.unwrap_or(frame.r_a[2]);
        let (wxx, wyy, wxy) = trap.transverse_form();
        let [wx, wy, wz] = trap.omega2;
        let w0 = state.omega0_sq;
        let rho = &self.ws.rho;
        let hx: Vec<f64> = rho[0]
            .iter()
            .map(|&r| {
                let x = lam[0] * r;
                0.5 * m * w0[0] / p * r * r + 0.5 * m * (wxx - wx) * x * x
            })
            .collect();
        let hy: Vec<f64> = rho[1]
            .iter()
            .map(|&r| {
                let y = lam[1] * r;
                0.5 * m * w0[1] / p * r * r + 0.5 * m * (wyy - wy) * y * y
            })
            .collect();
        let cubic = 2.0 / (3.0 * trap.l3);
        let hz: Vec<f64> = rho[2]
            .iter()
            .map(|&r| {
                let z = lam[2] * r;
                let anharm = cubic * ((z + d).powi(3) - d.powi(3));
                0.5 * m * w0[2] / p * r * r + 0.5 * m * wz * (2.0 * z * d + anharm) + m * frame.accel * z
            })
            .collect();
        let cross = m * wxy * lam[0] * lam[1];
        let g = self.coupling / p;
        let scale = -tau / HBAR;
        let [nx, ny, nz] = state.phi.grid.n;
        let mut idx = 0;
        for k in 0..nz {
            for j in 0..ny {
                let base = hy[j] + hz[k];
                let cy = cross * rho[1][j];
                for i in 0..nx {
                    let c = &mut state.phi.data[idx];
                    let v = hx[i] + base + cy * rho[0][i] + g * c.norm_sqr();
                    let (s, co) = (scale * v).sin_cos();
                    *c *= Complex64::new(co, s);
                    idx += 1;
                }
            }
        }
    }

    fn kinetic_step(&mut self, state: &mut ScaledState, lambda_mid: [f64; 3], tau: f64) {
        let n = state.phi.grid.len() as f64;
        let f: [Vec<Complex64>; 3] = std::array::from_fn(|a| {
            let c = -tau * HBAR / (2.0 * self.mass * lambda_mid[a] * lambda_mid[a]);
            self.ws.k2[a]
                .iter()
                .map(|k2| Complex64::from_polar(if a == 0 { 1.0 / n } else { 1.0 }, c * k2))
                .collect()
        });
        self.ws.apply_separable_spectral(&mut state.phi.data, f);
    }

    /// Advances the scaling factors by `dt`, returning their midpoint values.
    fn advance_scaling(&self, state: &mut ScaledState, dt: f64) -> [f64; 3] {
        let w0 = state.omega0_sq;
        let mut y = [
            state.lambda[0],
            state.lambda[1],
            state.lambda[2],
            state.lambda_dot[0],
            state.lambda_dot[1],
            state.lambda_dot[2],
        ];
        let f = |t: f64, y: &[f64; 6]| self.scaling_rhs(t, y, w0);
        y = rk4_step(&f, state.t, &y, 0.5 * dt);
        let mid = [y[0], y[1], y[2]];
        y = rk4_step(&f, state.t + 0.5 * dt, &y, 0.5 * dt);
        state.lambda = [y[0], y[1], y[2]];
        state.lambda_dot = [y[3], y[4], y[5]];
        mid
    }

    pub fn observe(&mut self, state: &ScaledState) -> Result<GpeObservables> {
        let t = state.t;
        let mo = moments(&state.phi);
        if mo.boundary > self.settings.overflow_ratio * mo.peak {
            return Err(Error::GridOverflow {
                t,
                ratio: mo.boundary / mo.peak,
            });
        }
        let lam = state.lambda;
        let var: [f64; 3] = std::array::from_fn(|a| mo.variance[a] * lam[a] * lam[a]);
        let cov = mo.covariance_xy * lam[0] * lam[1];
        let trap = self.trap(t);
        let frame = self.frame.at(t);
        let m = self.mass;
        let energy = self
            .ws
            .energy(&state.phi, m, self.coupling, lam, state.lambda_dot, |x, y, z| {
                trap.potential(m, x, y, z + frame.r_a[2], frame.r_a[2])
            });
        let z_offset = lam[2] * mo.mean[2];
        Ok(GpeObservables {
            t,
            z_atoms: frame.r_a[2] + z_offset,
            z_offset,
            widths: var.map(|v| v.max(0.0).sqrt()),
            rotated: rotate_widths(var, cov, trap.theta),
            norm: mo.norm,
            energy: energy.total(),
            lambda: lam,
        })
    }

    /// Propagates to `t_end`, calling `observer` at every output time.
    pub fn run(
        &mut self,
        state: &mut ScaledState,
        t_end: f64,
        mut observer: impl FnMut(&GpeObservables, &ScaledState) -> Result<()>,
    ) -> Result<Vec<GpeObservables>> {
        let interval = self.settings.output_interval;
        let t0 = state.t;
        let mut events: Vec<f64> = self
            .drive
            .boundaries()
            .into_iter()
            .filter(|&b| b > t0 + 1e-12 && b < t_end - 1e-12)
            .collect();
        let n_out = ((t_end - t0) / interval - 1e-9).ceil().max(0.0) as usize;
        events.extend((1..n_out).map(|k| t0 + k as f64 * interval));
        events.push(t_end);
        events.sort_by(f64::total_cmp);
        events.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        let outputs: Vec<f64> = (1..n_out).map(|k| t0 + k as f64 * interval).chain([t_end]).collect();

        let first = self.observe(state)?;
        observer(&first, state)?;
        let mut series = vec![first];
        let boundaries = self.drive.boundaries();
        let mut pending = 0.0;
        let mut out_idx = 0;
        for &event in &events {
            while event - state.t > 1e-12 {
                let mut dt = self.step_size(state, state.t);
                let remaining = event - state.t;
                if remaining <= dt * (1.0 + 1e-9) {
                    dt = remaining;
                } else if remaining < 2.0 * dt {
                    dt = 0.5 * remaining;
                }
                self.potential_step(state, pending + 0.5 * dt, state.t);
                let t_start = state.t;
                let mid = self.advance_scaling(state, dt);
                self.kinetic_step(state, mid, dt);
                state.t = if (event - (t_start + dt)).abs() < 1e-12 { event } else { t_start + dt };
                pending = 0.5 * dt;
            }
            if boundaries.iter().any(|b| (b - event).abs() < 1e-12) {
                self.potential_step(state, pending, event - 1e-9);
                pending = 0.0;
            }
            if out_idx < outputs.len() && (outputs[out_idx] - event).abs() < 1e-12 {
                self.potential_step(state, pending, event);
                pending = 0.0;
                let obs = self.observe(state)?;
                observer(&obs, state)?;
                series.push(obs);
                out_idx += 1;
            }
        }
        if pending > 0.0 {
            self.potential_step(state, pending, state.t);
        }
        Ok(series)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::{BOHR_RADIUS, RB87_MASS};
    use std::f64::consts::PI;

    const OMEGA: [f64; 3] = [2.0 * PI * 30.0, 2.0 * PI * 40.0, 2.0 * PI * 50.0];

    fn coupling(atoms: f64) -> f64 {
        4.0 * PI * HBAR * HBAR * 98.0 * BOHR_RADIUS / RB87_MASS * atoms
    }

    fn solve(atoms: f64, n: usize) -> (GridSpec, GroundState) {
        let g = coupling(atoms);
        let grid = GridSpec::covering([n; 3], cloud_radii(RB87_MASS, g, OMEGA), 6.0).unwrap();
        let trap = TrapSnapshot::centred(OMEGA.map(|w| w * w));
        let gs = ground_state(&grid, RB87_MASS, g, &trap, &GroundStateSettings::default()).unwrap();
        (grid, gs)
    }

    fn static_drive() -> TrapDrive {
        TrapDrive::constant(TrapSnapshot::centred(OMEGA.map(|w| w * w)))
    }

    #[test]
    fn ideal_gas_ground_state_is_the_oscillator_gaussian() {
        // Oracle: sigma = sqrt(hbar / 2 m w), E = hbar sum(w) / 2.
        let (_, gs) = solve(0.0, 32);
        let w = super::super::observables::widths(&gs.psi);
        for a in 0..3 {
            let want = (HBAR / (2.0 * RB87_MASS * OMEGA[a])).sqrt();
            assert!((w[a] / want - 1.0).abs() < 1e-3, "axis {a}: {} vs {want}", w[a]);
        }
        let e0 = 0.5 * HBAR * OMEGA.iter().sum::<f64>();
        assert!((gs.energy.total() / e0 - 1.0).abs() < 1e-3);
    }

    #[test]
    fn interacting_ground_state_obeys_virial_relation() {
        let (_, gs) = solve(2e4, 32);
        let e = gs.energy;
        let virial = 2.0 * e.kinetic - 2.0 * e.potential + 3.0 * e.interaction;
        assert!(virial.abs() < 0.01 * e.total(), "virial {virial:e} vs E {:e}", e.total());
    }

    #[test]
    fn strong_interaction_approaches_thomas_fermi_radii() {
        // Oracle: <x^2> = R^2 / 7 for the inverted-parabola profile.
        let atoms = 1e5;
        let omega = [12.5, 50.0, 49.5].map(|f| 2.0 * PI * f);
        let g = coupling(atoms);
        let radii = cloud_radii(RB87_MASS, g, omega);
        let grid = GridSpec::covering([32; 3], radii, 6.0).unwrap();
        let trap = TrapSnapshot::centred(omega.map(|w| w * w));
        let gs = ground_state(&grid, RB87_MASS, g, &trap, &GroundStateSettings::default()).unwrap();
        let w = super::super::observables::widths(&gs.psi);
        for a in 0..3 {
            let r = w[a] * 7f64.sqrt();
            assert!((r / radii[a] - 1.0).abs() < 0.05, "axis {a}: {r} vs {}", radii[a]);
        }
    }

    #[test]
    fn ground_state_is_stationary_in_real_time() {
        let (_, gs) = solve(2e4, 32);
        let drive = static_drive();
        let frame = FrameTransform::at_rest(RB87_MASS, 0.0);
        let mut state = ScaledState::from_ground_state(gs.psi, OMEGA.map(|w| w * w), 0.0);
        let mut prop = Propagator::new(&state, RB87_MASS, coupling(2e4), &drive, &frame, GpeSettings::default());
        let obs = prop.run(&mut state, 20e-3, |_, _| Ok(())).unwrap();
        let (first, last) = (obs[0], obs[obs.len() - 1]);
        for a in 0..3 {
            let drift = (last.widths[a] / first.widths[a] - 1.0).abs();
            assert!(drift < 1e-3, "axis {a}: width drift {drift:e}");
            assert!((state.lambda[a] - 1.0).abs() < 1e-12);
        }
        assert!((last.norm - 1.0).abs() < 1e-10);
        assert!((last.energy / first.energy - 1.0).abs() < 1e-3);
    }

    #[test]
    fn ideal_gas_free_expansion_matches_analytic_widths() {
        // Oracle: sigma(t) = sigma0 sqrt(1 + w^2 t^2) for a released oscillator
        // ground state.
        let (_, gs) = solve(0.0, 32);
        let mut drive = static_drive();
        drive.pieces[0].segment = super::super::potential::DriveSegment::Static(TrapSnapshot::free());
        let frame = FrameTransform::at_rest(RB87_MASS, 0.0);
        let mut state = ScaledState::from_ground_state(gs.psi, OMEGA.map(|w| w * w), 0.0);
        let mut prop = Propagator::new(&state, RB87_MASS, 0.0, &drive, &frame, GpeSettings::default());
        let t = 15e-3;
        let obs = prop.run(&mut state, t, |_, _| Ok(())).unwrap();
        let last = obs[obs.len() - 1];
        for a in 0..3 {
            let s0 = (HBAR / (2.0 * RB87_MASS * OMEGA[a])).sqrt();
            let want = s0 * (1.0 + (OMEGA[a] * t).powi(2)).sqrt();
            assert!((last.widths[a] / want - 1.0).abs() < 2e-3, "axis {a}: {} vs {want}", last.widths[a]);
        }
    }

    #[test]
    fn splitting_is_second_order() {
        let g = coupling(2e4);
        let radii = cloud_radii(RB87_MASS, g, OMEGA);
        let grid = GridSpec::covering([32; 3], radii, 6.0).unwrap();
        let mut psi = WaveFunction::from_fn(grid, |x, y, z| {
            let u = [(x - 0.2 * radii[0]) / radii[0], y / radii[1], z / radii[2]];
            Complex64::new((-u.iter().map(|v| v * v).sum::<f64>() / 0.3).exp(), 0.0)
        });
        psi.normalize();
        let drive = static_drive();
        let frame = FrameTransform::at_rest(RB87_MASS, 0.0);
        let run = |dt: f64| {
            let mut state = ScaledState::from_ground_state(psi.clone(), OMEGA.map(|w| w * w), 0.0);
            let settings = GpeSettings {
                fixed_dt: Some(dt),
                output_interval: 1.0,
                overflow_ratio: 1.0,
                ..GpeSettings::default()
            };
            let mut prop = Propagator::new(&state, RB87_MASS, g, &drive, &frame, settings);
            prop.run(&mut state, 2e-3, |_, _| Ok(())).unwrap();
            state.phi
        };
        let dist = |a: &WaveFunction, b: &WaveFunction| {
            a.data.iter().zip(&b.data).map(|(p, q)| (p - q).norm_sqr()).sum::<f64>().sqrt()
        };
        let (a, b, c) = (run(40e-6), run(20e-6), run(10e-6));
        let ratio = dist(&a, &b) / dist(&b, &c);
        assert!((3.5..4.5).contains(&ratio), "convergence ratio {ratio}");
    }
}
