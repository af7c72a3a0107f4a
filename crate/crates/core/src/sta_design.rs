//! Shortcut-to-adiabaticity ramp design.
//!
//! A centre-of-mass trajectory `z_a(t)` is prescribed (order-9 polynomial or
//! chirped sine, both satisfying the ten boundary conditions of a
//! transport that starts and ends at rest in a stationary trap), and the
//! trap trajectory is recovered pointwise from Newton's equation
//! `z_a'' + w^2(z_t) (z_a - z_t) = 0` with `w^2 = N/D` a rational fit.
//! Multiplying out gives a polynomial in `z_t`; for a (1,2) fit it is a
//! quadratic.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chip_model::TrapLandscape;
use crate::error::{Error, Result};
use crate::ode::HermiteSeries;
use crate::pade::PadeFit;
use crate::units::GAUSS;

/// Chirp parameters that keep the anharmonicity ratio near 3 %.
pub const CHIRP_A: f64 = -1.37;
pub const CHIRP_B: f64 = 0.780;
/// Default schedule time step.
pub const DEFAULT_DT: f64 = 10e-6;

pub const SCHEDULE_HEADER: [&str; 6] = ["t_s", "z_a_m", "z_t_m", "omega_z_rad_s", "B_bias_G", "chi"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnsatzKind {
    Polynomial9,
    ChirpedSine,
    /// Trap moved at constant speed; not a shortcut, kept as a reference.
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryAnsatz {
    pub kind: AnsatzKind,
    pub z_i: f64,
    pub z_f: f64,
    pub t_f: f64,
    pub chirp_a: f64,
    pub chirp_b: f64,
}

impl TrajectoryAnsatz {
    pub fn polynomial9(z_i: f64, z_f: f64, t_f: f64) -> Self {
        Self {
            kind: AnsatzKind::Polynomial9,
            z_i,
            z_f,
            t_f,
            chirp_a: 0.0,
            chirp_b: 0.0,
        }
    }

    pub fn chirped(z_i: f64, z_f: f64, t_f: f64, a: f64, b: f64) -> Self {
        Self {
            kind: AnsatzKind::ChirpedSine,
            z_i,
            z_f,
            t_f,
            chirp_a: a,
            chirp_b: b,
        }
    }

    pub fn linear(z_i: f64, z_f: f64, t_f: f64) -> Self {
        Self {
            kind: AnsatzKind::Linear,
            z_i,
            z_f,
            t_f,
            chirp_a: 0.0,
            chirp_b: 0.0,
        }
    }

    pub fn with_duration(&self, t_f: f64) -> Self {
        Self { t_f, ..*self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_f > 0.0) || !self.t_f.is_finite() {
            return Err(Error::Validation(format!("ramp duration must be positive, got {}", self.t_f)));
        }
        if self.z_f == self.z_i {
            return Err(Error::Validation("start and end positions coincide".into()));
        }
        if self.kind == AnsatzKind::ChirpedSine && (1.0 + self.chirp_a + self.chirp_b).abs() < 1e-12 {
            return Err(Error::Validation("chirp parameters satisfy 1 + a + b = 0".into()));
        }
        Ok(())
    }
}

/// Order-9 polynomial `126u^5 - 420u^6 + 540u^7 - 315u^8 + 70u^9`.
const POLY9: [f64; 10] = [0.0, 0.0, 0.0, 0.0, 0.0, 126.0, -420.0, 540.0, -315.0, 70.0];

fn poly_derivs(coeffs: &[f64], u: f64) -> [f64; 5] {
    let mut c = coeffs.to_vec();
    let mut out = [0.0; 5];
    for slot in &mut out {
        *slot = c.iter().rev().fold(0.0, |acc, &a| acc * u + a);
        c = c.iter().enumerate().skip(1).map(|(k, &a)| k as f64 * a).collect();
        if c.is_empty() {
            c.push(0.0);
        }
    }
    out
}

/// `z_a` and its first four time derivatives at `t`.
pub fn evaluate_trajectory(ansatz: &TrajectoryAnsatz, t: f64) -> Result<[f64; 5]> {
    let tf = ansatz.t_f;
    if !(t >= 0.0 && t <= tf) {
        return Err(Error::OutOfDomain { t, t_f: tf });
    }
    let u = t / tf;
    let dz = ansatz.z_f - ansatz.z_i;
    Ok(match ansatz.kind {
        AnsatzKind::Polynomial9 => {
            let p = poly_derivs(&POLY9, u);
            [
                ansatz.z_i + dz * p[0],
                dz * p[1] / tf,
                dz * p[2] / tf.powi(2),
                dz * p[3] / tf.powi(3),
                dz * p[4] / tf.powi(4),
            ]
        }
        AnsatzKind::ChirpedSine => {
            let (a, b) = (ansatz.chirp_a, ansatz.chirp_b);
            let c = 2.0 * std::f64::consts::PI / (1.0 + a + b);
            let v = c * (u + a * u * u + b * u * u * u);
            let v1 = c * (1.0 + 2.0 * a * u + 3.0 * b * u * u) / tf;
            let v2 = c * (2.0 * a + 6.0 * b * u) / tf.powi(2);
            let v3 = 6.0 * b * c / tf.powi(3);
            let (s1, c1) = v.sin_cos();
            let (s2, c2) = (2.0 * v).sin_cos();
            let f0 = 6.0 * v - 8.0 * s1 + s2;
            let f1 = 6.0 - 8.0 * c1 + 2.0 * c2;
            let f2 = 8.0 * s1 - 4.0 * s2;
            let f3 = 8.0 * c1 - 8.0 * c2;
            let f4 = -8.0 * s1 + 16.0 * s2;
            let k = dz / (12.0 * std::f64::consts::PI);
            [
                ansatz.z_i + k * f0,
                k * f1 * v1,
                k * (f2 * v1 * v1 + f1 * v2),
                k * (f3 * v1.powi(3) + 3.0 * f2 * v1 * v2 + f1 * v3),
                k * (f4 * v1.powi(4) + 6.0 * f3 * v1 * v1 * v2 + f2 * (3.0 * v2 * v2 + 4.0 * v1 * v3)),
            ]
        }
        AnsatzKind::Linear => [ansatz.z_i + dz * u, dz / tf, 0.0, 0.0, 0.0],
    })
}

/// Sampled transport schedule on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RampSchedule {
    pub ansatz: TrajectoryAnsatz,
    pub dt: f64,
    pub times: Vec<f64>,
    pub z_a: Vec<f64>,
    pub za_ddot: Vec<f64>,
    pub z_t: Vec<f64>,
    /// Exact time derivative of `z_t` (implicit differentiation).
    pub zt_dot: Vec<f64>,
    pub omega_z: Vec<f64>,
    pub bias: Vec<f64>,
    pub chi: Vec<f64>,
    pub chi_max: Option<f64>,
    /// Largest `|z_a'' + w^2 (z_a - z_t)|` over the grid.
    pub newton_residual: f64,
}

impl RampSchedule {
    pub fn t_f(&self) -> f64 {
        self.ansatz.t_f
    }

    pub fn z_i(&self) -> f64 {
        self.z_t[0]
    }

    pub fn z_f(&self) -> f64 {
        *self.z_t.last().expect("non-empty schedule")
    }

    pub fn trap_position(&self) -> HermiteSeries {
        HermiteSeries::new(0.0, self.dt, self.z_t.clone(), self.zt_dot.clone())
    }

    pub fn csv_rows(&self) -> Vec<[f64; 6]> {
        (0..self.times.len())
            .map(|k| {
                [
                    self.times[k],
                    self.z_a[k],
                    self.z_t[k],
                    self.omega_z[k],
                    self.bias[k] / GAUSS,
                    self.chi.get(k).copied().unwrap_or(f64::NAN),
                ]
            })
            .collect()
    }

    pub fn summary(&self) -> RampSummary {
        RampSummary {
            chi_max: self.chi_max.unwrap_or(f64::NAN),
            bias_start_g: self.bias[0] / GAUSS,
            bias_end_g: self.bias.last().copied().unwrap_or(f64::NAN) / GAUSS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RampSummary {
    pub chi_max: f64,
    #[serde(rename = "bias_start_G")]
    pub bias_start_g: f64,
    #[serde(rename = "bias_end_G")]
    pub bias_end_g: f64,
}

fn horner(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * x + a)
}

/// Real roots of `sum c_k x^k` via the companion matrix.
fn real_roots(c: &[f64]) -> Vec<f64> {
    let mut deg = c.len() - 1;
    let scale = c.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    while deg > 0 && c[deg].abs() <= 1e-14 * scale {
        deg -= 1;
    }
    if deg == 0 {
        return Vec::new();
    }
    if deg == 1 {
        return vec![-c[0] / c[1]];
    }
    let mut m = DMatrix::<f64>::zeros(deg, deg);
    for i in 1..deg {
        m[(i, i - 1)] = 1.0;
    }
    for i in 0..deg {
        m[(i, deg - 1)] = -c[i] / c[deg];
    }
    m.complex_eigenvalues()
        .iter()
        .filter(|z| z.im.abs() <= 1e-7 * z.re.abs().max(1e-3))
        .map(|z| z.re)
        .collect()
}

/// Recovers the trap trajectory for `ansatz` from Newton's equation.
pub fn reverse_engineer(
    ansatz: &TrajectoryAnsatz,
    omega2_fit: &PadeFit,
    bias_fit: &PadeFit,
    n_steps: usize,
) -> Result<RampSchedule> {
    ansatz.validate()?;
    if n_steps < 2 {
        return Err(Error::InsufficientSamples {
            needed: 2,
            got: n_steps,
        });
    }
    if ansatz.kind == AnsatzKind::Linear {
        return linear_schedule(ansatz, omega2_fit, bias_fit, n_steps);
    }
    let dt = ansatz.t_f / n_steps as f64;
    let num = &omega2_fit.numerator;
    let den = &omega2_fit.denominator;
    let (p, q) = omega2_fit.orders();
    let degree = q.max(p + 1);
    let s = omega2_fit.domain.1.abs().max(omega2_fit.domain.0.abs());
    let floor = 0.01 * (ansatz.z_f - ansatz.z_i).abs() + 1e-9;

    let n = n_steps + 1;
    let mut out = RampSchedule {
        ansatz: *ansatz,
        dt,
        times: Vec::with_capacity(n),
        z_a: Vec::with_capacity(n),
        za_ddot: Vec::with_capacity(n),
        z_t: Vec::with_capacity(n),
        zt_dot: Vec::with_capacity(n),
        omega_z: Vec::with_capacity(n),
        bias: Vec::with_capacity(n),
        chi: Vec::new(),
        chi_max: None,
        newton_residual: 0.0,
    };
    let mut prev = ansatz.z_i;
    let mut prev_step = 0.0_f64;
    let mut max_acc = 0.0_f64;
    let mut max_res = 0.0_f64;
    let mut roundoff = 0.0_f64;
    for k in 0..n {
        let t = if k == n_steps { ansatz.t_f } else { k as f64 * dt };
        let [za, zd, zdd, zddd, _] = evaluate_trajectory(ansatz, t)?;
        // F(z) = zdd D(z) + N(z) (za - z), coefficients in the scaled variable z/s.
        let mut c = vec![0.0; degree + 1];
        for (k, &d) in den.iter().enumerate() {
            c[k] += zdd * d;
        }
        for (k, &a) in num.iter().enumerate() {
            c[k] += za * a;
            c[k + 1] -= a;
        }
        if p == 1 && q == 2 {
            let disc = c[1] * c[1] - 4.0 * c[2] * c[0];
            if disc < 0.0 {
                return Err(Error::NegativeDiscriminant { t });
            }
        }
        let scaled: Vec<f64> = c.iter().enumerate().map(|(k, v)| v * s.powi(k as i32)).collect();
        let roots: Vec<f64> = real_roots(&scaled).into_iter().map(|r| r * s).collect();
        if roots.is_empty() {
            return Err(Error::NegativeDiscriminant { t });
        }
        let window = (10.0 * prev_step).max(floor);
        let mut z = *roots
            .iter()
            .min_by(|a, b| (*a - prev).abs().total_cmp(&(*b - prev).abs()))
            .expect("non-empty");
        if (z - prev).abs() > window {
            return Err(Error::RootJump { t });
        }
        let dc: Vec<f64> = c.iter().enumerate().skip(1).map(|(k, v)| k as f64 * v).collect();
        for _ in 0..4 {
            let f = horner(&c, z);
            let df = horner(&dc, z);
            if df == 0.0 {
                break;
            }
            let step = f / df;
            z -= step;
            if step.abs() <= 1e-16 * z.abs() {
                break;
            }
        }
        if !omega2_fit.contains(z) || !bias_fit.contains(z) {
            return Err(Error::Validation(format!(
                "trap position {z:.6e} m at t = {t:.6e} s leaves the fitted range"
            )));
        }
        let nv = horner(num, z);
        let dv = horner(den, z);
        let w2 = nv / dv;
        if !(w2 > 0.0) {
            return Err(Error::NonPositiveFrequency(w2));
        }
        let dn = omega2_fit.numerator.iter().enumerate().skip(1).rev().fold(0.0, |acc, (k, &a)| acc * z + k as f64 * a);
        let dd = omega2_fit.denominator.iter().enumerate().skip(1).rev().fold(0.0, |acc, (k, &a)| acc * z + k as f64 * a);
        let fz = zdd * dd + dn * (za - z) - nv;
        let zt_dot = -(dv * zddd + nv * zd) / fz;

        max_acc = max_acc.max(zdd.abs());
        max_res = max_res.max((zdd + w2 * (za - z)).abs());
        roundoff = roundoff.max(8.0 * f64::EPSILON * w2 * z.abs());
        if k > 0 {
            prev_step = (z - prev).abs();
        }
        prev = z;
        out.times.push(t);
        out.z_a.push(za);
        out.za_ddot.push(zdd);
        out.z_t.push(z);
        out.zt_dot.push(zt_dot);
        out.omega_z.push(w2.sqrt());
        out.bias.push(bias_fit.eval(z));
    }
    out.newton_residual = max_res;
    if max_res > 1e-6 * max_acc + roundoff {
        return Err(Error::IllConditioned(format!(
            "Newton residual {max_res:.3e} exceeds 1e-6 of the peak acceleration {max_acc:.3e}"
        )));
    }
    Ok(out)
}

fn linear_schedule(
    ansatz: &TrajectoryAnsatz,
    omega2_fit: &PadeFit,
    bias_fit: &PadeFit,
    n_steps: usize,
) -> Result<RampSchedule> {
    let dt = ansatz.t_f / n_steps as f64;
    let speed = (ansatz.z_f - ansatz.z_i) / ansatz.t_f;
    let times: Vec<f64> = (0..=n_steps)
        .map(|k| if k == n_steps { ansatz.t_f } else { k as f64 * dt })
        .collect();
    let z_t: Vec<f64> = times.iter().map(|&t| evaluate_trajectory(ansatz, t).map(|d| d[0])).collect::<Result<_>>()?;
    let omega_z = z_t
        .iter()
        .map(|&z| {
            let w2 = omega2_fit.eval(z);
            if w2 > 0.0 {
                Ok(w2.sqrt())
            } else {
                Err(Error::NonPositiveFrequency(w2))
            }
        })
        .collect::<Result<_>>()?;
    Ok(RampSchedule {
        ansatz: *ansatz,
        dt,
        z_a: z_t.clone(),
        za_ddot: vec![0.0; times.len()],
        zt_dot: vec![speed; times.len()],
        bias: z_t.iter().map(|&z| bias_fit.eval(z)).collect(),
        omega_z,
        z_t,
        times,
        chi: Vec::new(),
        chi_max: None,
        newton_residual: f64::NAN,
    })
}

/// `|z_a - z_t| / |L3(z_t)|` along the schedule.
pub fn chi_profile(schedule: &RampSchedule, l3_fit: &PadeFit) -> (Vec<f64>, f64) {
    let chi: Vec<f64> = schedule
        .z_a
        .iter()
        .zip(&schedule.z_t)
        .map(|(&za, &zt)| ((za - zt) / l3_fit.eval(zt)).abs())
        .collect();
    let max = chi.iter().copied().fold(0.0, f64::max);
    (chi, max)
}

/// Reverse-engineers `ansatz` against the landscape and attaches the
/// anharmonicity profile.
pub fn design_ramp(ansatz: &TrajectoryAnsatz, landscape: &TrapLandscape, n_steps: usize) -> Result<RampSchedule> {
    let mut schedule = reverse_engineer(ansatz, &landscape.omega2_z, &landscape.bias, n_steps)?;
    let (chi, max) = chi_profile(&schedule, &landscape.l3);
    schedule.chi = chi;
    schedule.chi_max = Some(max);
    Ok(schedule)
}

/// Number of grid intervals for duration `t_f` at step `dt`.
pub fn steps_for(t_f: f64, dt: f64) -> usize {
    ((t_f / dt).round() as usize).max(2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChirpScan {
    pub best_a: f64,
    pub best_b: f64,
    pub chi_max: f64,
    /// `(a, b, chi_max)` per cell; infeasible cells carry `inf`.
    pub cells: Vec<(f64, f64, f64)>,
}

/// Grid search over chirp parameters minimising the peak anharmonicity.
pub fn optimize_chirp(
    template: &TrajectoryAnsatz,
    landscape: &TrapLandscape,
    a_values: &[f64],
    b_values: &[f64],
    n_steps: usize,
) -> Result<ChirpScan> {
    let grid: Vec<(f64, f64)> = a_values
        .iter()
        .flat_map(|&a| b_values.iter().map(move |&b| (a, b)))
        .collect();
    if grid.is_empty() {
        return Err(Error::InvalidInput("empty chirp grid".into()));
    }
    let cells: Vec<(f64, f64, f64)> = grid
        .par_iter()
        .map(|&(a, b)| {
            let ansatz = TrajectoryAnsatz::chirped(template.z_i, template.z_f, template.t_f, a, b);
            let chi = design_ramp(&ansatz, landscape, n_steps)
                .ok()
                .and_then(|s| s.chi_max)
                .unwrap_or(f64::INFINITY);
            (a, b, chi)
        })
        .collect();
    let best = cells
        .iter()
        .copied()
        .min_by(|x, y| x.2.total_cmp(&y.2).then(x.0.total_cmp(&y.0)).then(x.1.total_cmp(&y.1)))
        .expect("non-empty grid");
    if !best.2.is_finite() {
        return Err(Error::NotConverged {
            iterations: cells.len(),
            detail: "no feasible chirp on the grid".into(),
        });
    }
    Ok(ChirpScan {
        best_a: best.0,
        best_b: best.1,
        chi_max: best.2,
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pade::fit_pade;

    const ZI: f64 = 0.45e-3;
    const ZF: f64 = 1.65e-3;
    const TF: f64 = 0.075;

    fn all_kinds() -> [TrajectoryAnsatz; 4] {
        [
            TrajectoryAnsatz::polynomial9(ZI, ZF, TF),
            TrajectoryAnsatz::chirped(ZI, ZF, TF, CHIRP_A, CHIRP_B),
            TrajectoryAnsatz::chirped(ZI, ZF, TF, 0.0, 0.0),
            TrajectoryAnsatz::linear(ZI, ZF, TF),
        ]
    }

    #[test]
    fn polynomial_boundaries_and_midpoint() {
        let a = TrajectoryAnsatz::polynomial9(ZI, ZF, TF);
        let start = evaluate_trajectory(&a, 0.0).unwrap();
        let end = evaluate_trajectory(&a, TF).unwrap();
        assert_eq!(start, [ZI, 0.0, 0.0, 0.0, 0.0]);
        assert!((end[0] - ZF).abs() < 1e-18);
        let dz = ZF - ZI;
        for n in 1..5 {
            assert!(end[n].abs() < 1e-10 * dz / TF.powi(n as i32), "order {n}: {}", end[n]);
        }
        let mid = evaluate_trajectory(&a, TF / 2.0).unwrap();
        assert!((mid[0] - 0.5 * (ZI + ZF)).abs() < 1e-18);
    }

    #[test]
    fn chirped_boundaries() {
        for (a, b) in [(0.0, 0.0), (CHIRP_A, CHIRP_B)] {
            let an = TrajectoryAnsatz::chirped(ZI, ZF, TF, a, b);
            let start = evaluate_trajectory(&an, 0.0).unwrap();
            let end = evaluate_trajectory(&an, TF).unwrap();
            let dz = ZF - ZI;
            assert!((start[0] - ZI).abs() < 1e-18);
            assert!((end[0] - ZF).abs() < 1e-15);
            for n in 1..5 {
                let scale = dz / TF.powi(n as i32);
                assert!(start[n].abs() < 1e-10 * scale);
                assert!(end[n].abs() < 1e-10 * scale, "a={a} order {n}: {}", end[n] / scale);
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        for an in all_kinds() {
            for &t in &[0.011, 0.03, 0.052, 0.07] {
                let h = 1e-6;
                let m = evaluate_trajectory(&an, t - h).unwrap();
                let p = evaluate_trajectory(&an, t + h).unwrap();
                let c = evaluate_trajectory(&an, t).unwrap();
                for n in 0..4 {
                    let fd = (p[n] - m[n]) / (2.0 * h);
                    let scale = c[n + 1].abs().max(1e-3 * (ZF - ZI) / TF.powi(n as i32 + 1));
                    assert!((fd - c[n + 1]).abs() < 1e-6 * scale, "{:?} t={t} n={n}", an.kind);
                }
            }
        }
    }

    #[test]
    fn outside_domain() {
        let a = TrajectoryAnsatz::polynomial9(ZI, ZF, TF);
        assert!(matches!(evaluate_trajectory(&a, -1e-9), Err(Error::OutOfDomain { .. })));
        assert!(matches!(evaluate_trajectory(&a, TF * 1.001), Err(Error::OutOfDomain { .. })));
    }

    fn quadratic_trap() -> (PadeFit, PadeFit) {
        // w^2 = (a + b z)/(1 + c z + d z^2), bias = 1e-2/(1 + 1e4 z)
        let (a, b, c, d) = (3.0e7, -1.0e10, 900.0, 2.0e6);
        let samples: Vec<(f64, f64)> = (0..40)
            .map(|i| {
                let z = 0.3e-3 + 1.6e-3 * i as f64 / 39.0;
                (z, (a + b * z) / (1.0 + c * z + d * z * z))
            })
            .collect();
        let w2 = fit_pade(&samples, 1, 2).unwrap();
        let bias: Vec<(f64, f64)> = samples.iter().map(|&(z, _)| (z, 1e-2 / (1.0 + 1e4 * z))).collect();
        (w2, fit_pade(&bias, 0, 1).unwrap())
    }

    #[test]
    fn static_trajectory_stays_put() {
        let (w2, bias) = quadratic_trap();
        let mut a = TrajectoryAnsatz::polynomial9(ZI, ZF, TF);
        a.z_f = ZI + 1e-15;
        let s = reverse_engineer(&a, &w2, &bias, 100).unwrap();
        for &z in &s.z_t {
            assert!((z - ZI).abs() < 2e-15);
        }
        let (chi, max) = chi_profile(&s, &bias);
        assert!(chi.iter().all(|&c| c < 1e-12) && max < 1e-12);
    }

    #[test]
    fn quadratic_case_obeys_newton() {
        let (w2, bias) = quadratic_trap();
        let a = TrajectoryAnsatz::chirped(ZI, 1.2e-3, 0.1, CHIRP_A, CHIRP_B);
        let s = reverse_engineer(&a, &w2, &bias, 10_000).unwrap();
        let peak = s.za_ddot.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        for k in 0..s.times.len() {
            let r = s.za_ddot[k] + w2.eval(s.z_t[k]) * (s.z_a[k] - s.z_t[k]);
            assert!(r.abs() < 1e-6 * peak);
        }
        assert!((s.z_f() - 1.2e-3).abs() < 1e-12);
    }

    #[test]
    fn aggressive_ramp_has_no_real_root() {
        let (w2, bias) = quadratic_trap();
        let a = TrajectoryAnsatz::polynomial9(ZI, 1.6e-3, 1e-3);
        let err = reverse_engineer(&a, &w2, &bias, 1000).unwrap_err();
        assert!(
            matches!(err, Error::NegativeDiscriminant { .. } | Error::RootJump { .. } | Error::Validation(_)),
            "{err}"
        );
    }
}
