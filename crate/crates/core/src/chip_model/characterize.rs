use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

use super::{potential_vec, AtomSpecies, ChipConfig};
use crate::error::{Error, Result};
use crate::units::MM;

/// Local trap parameters at the field minimum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapCharacterization {
    /// Distance of the minimum from the chip plane, m.
    pub z_t: f64,
    pub nu_x: f64,
    pub nu_y: f64,
    pub nu_z: f64,
    /// Cubic anharmonicity length along the strong vertical axis, m. Signed:
    /// negative when the potential softens away from the chip.
    pub l3: f64,
    /// Angle of the weak eigen-axis to X in the chip plane, rad.
    pub theta: f64,
    /// Bias field magnitude, T.
    pub bias: f64,
    /// Full position of the minimum, m.
    pub position: [f64; 3],
}

impl TrapCharacterization {
    pub fn omega2(&self) -> [f64; 3] {
        [self.nu_x, self.nu_y, self.nu_z].map(|nu| (2.0 * std::f64::consts::PI * nu).powi(2))
    }
}

fn finite_step(z: f64) -> f64 {
    (1e-4 * z).max(1e-7)
}

/// Central-difference Hessian of the potential at `p` with step `h`.
pub fn hessian(config: &ChipConfig, species: &AtomSpecies, p: [f64; 3], h: f64) -> Result<Matrix3<f64>> {
    let p = Vector3::from(p);
    let v = |q: Vector3<f64>| potential_vec(config, species, &q);
    let e = [Vector3::x(), Vector3::y(), Vector3::z()];
    let v0 = v(p)?;
    let mut m = Matrix3::zeros();
    for i in 0..3 {
        let hi = e[i] * h;
        m[(i, i)] = (v(p + hi)? - 2.0 * v0 + v(p - hi)?) / (h * h);
        for j in 0..i {
            let hj = e[j] * h;
            let hij = (v(p + hi + hj)? - v(p + hi - hj)? - v(p - hi + hj)? + v(p - hi - hj)?) / (4.0 * h * h);
            m[(i, j)] = hij;
            m[(j, i)] = hij;
        }
    }
    Ok(m)
}

fn gradient(config: &ChipConfig, species: &AtomSpecies, p: &Vector3<f64>, h: f64) -> Result<Vector3<f64>> {
    let mut g = Vector3::zeros();
    for i in 0..3 {
        let mut d = Vector3::zeros();
        d[i] = h;
        g[i] = (potential_vec(config, species, &(p + d))? - potential_vec(config, species, &(p - d))?) / (2.0 * h);
    }
    Ok(g)
}

fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    const R: f64 = 0.618_033_988_749_894_8;
    let mut c = b - R * (b - a);
    let mut d = a + R * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - R * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + R * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Geometric grid along the vertical line through the origin.
fn line_search(config: &ChipConfig, species: &AtomSpecies) -> Result<f64> {
    const N: usize = 600;
    let (lo, hi) = (0.02 * MM, 20.0 * MM);
    let zs: Vec<f64> = (0..N).map(|i| lo * (hi / lo).powf(i as f64 / (N - 1) as f64)).collect();
    let vs: Vec<f64> = zs
        .iter()
        .map(|&z| potential_vec(config, species, &Vector3::new(0.0, 0.0, z)))
        .collect::<Result<_>>()?;
    let k = vs
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(k, _)| k)
        .unwrap_or(0);
    if k == 0 || k == N - 1 {
        return Err(Error::NoTrapFound(format!(
            "potential along the vertical axis is monotone between {:.3} and {:.1} mm",
            lo / MM,
            hi / MM
        )));
    }
    let f = |z: f64| potential_vec(config, species, &Vector3::new(0.0, 0.0, z)).unwrap_or(f64::INFINITY);
    Ok(golden_section(f, zs[k - 1], zs[k + 1], 1e-12 * zs[k]))
}

/// Locates the trap minimum below the central wire and extracts the local
/// harmonic frequencies, tilt and cubic length from the potential Hessian.
pub fn characterize_trap(config: &ChipConfig, species: &AtomSpecies) -> Result<TrapCharacterization> {
    config.validate()?;
    species.validate()?;
    let z0 = line_search(config, species)?;
    let mut p = Vector3::new(0.0, 0.0, z0);

    let v_at = |q: &Vector3<f64>| potential_vec(config, species, q).unwrap_or(f64::INFINITY);
    let spans = [0.5 * z0, 0.1 * z0, 0.1 * z0];
    for _ in 0..2 {
        for axis in 0..3 {
            let c = p[axis];
            let best = golden_section(
                |s| {
                    let mut q = p;
                    q[axis] = s;
                    v_at(&q)
                },
                c - spans[axis],
                c + spans[axis],
                1e-10 * z0,
            );
            p[axis] = best;
        }
    }

    let mut converged = false;
    for _ in 0..50 {
        let h = finite_step(p.z);
        let g = gradient(config, species, &p, h)?;
        if g.norm() < 1e-30 {
            converged = true;
            break;
        }
        let hm = hessian(config, species, p.into(), h)?;
        let Some(step) = hm.lu().solve(&(-g)) else {
            break;
        };
        p += step;
        if step.norm() < 1e-14 * p.z.abs() {
            converged = true;
            break;
        }
    }
    if !converged || !(p.z > 0.0) {
        return Err(Error::NoTrapFound(format!(
            "Newton refinement did not converge near z = {:.4} mm",
            z0 / MM
        )));
    }

    let h = finite_step(p.z);
    let hm = hessian(config, species, p.into(), h)?;
    let eig = SymmetricEigen::new(hm);
    if eig.eigenvalues.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::NoTrapFound("Hessian at the minimum is not positive definite".into()));
    }
    let iz = (0..3)
        .max_by(|&a, &b| eig.eigenvectors[(2, a)].abs().total_cmp(&eig.eigenvectors[(2, b)].abs()))
        .expect("three eigenvectors");
    let rest: Vec<usize> = (0..3).filter(|&i| i != iz).collect();
    let (ix, iy) = if eig.eigenvalues[rest[0]] <= eig.eigenvalues[rest[1]] {
        (rest[0], rest[1])
    } else {
        (rest[1], rest[0])
    };
    let nu = |i: usize| (eig.eigenvalues[i] / species.mass).sqrt() / (2.0 * std::f64::consts::PI);

    let vx = eig.eigenvectors.column(ix);
    let mut theta = vx[1].atan2(vx[0]);
    let half = std::f64::consts::FRAC_PI_2;
    if theta > half {
        theta -= std::f64::consts::PI;
    } else if theta <= -half {
        theta += std::f64::consts::PI;
    }

    let mut ez: Vector3<f64> = eig.eigenvectors.column(iz).into();
    if ez.z < 0.0 {
        ez = -ez;
    }
    let f = |s: f64| potential_vec(config, species, &(p + ez * s));
    let third = (f(2.0 * h)? - 2.0 * f(h)? + 2.0 * f(-h)? - f(-2.0 * h)?) / (2.0 * h * h * h);
    let l3 = 2.0 * eig.eigenvalues[iz] / third;

    Ok(TrapCharacterization {
        z_t: p.z,
        nu_x: nu(ix),
        nu_y: nu(iy),
        nu_z: nu(iz),
        l3,
        theta,
        bias: config.bias_magnitude,
        position: p.into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::{GAUSS, UM};

    fn rb() -> AtomSpecies {
        AtomSpecies::rb87()
    }

    #[test]
    fn initial_trap() {
        let c = characterize_trap(&ChipConfig::z_wire(5.0, 21.5 * GAUSS), &rb()).unwrap();
        assert!((c.z_t / MM - 0.4527).abs() < 2e-3, "{}", c.z_t / MM);
        assert!((c.nu_x - 14.65).abs() < 0.1, "{}", c.nu_x);
        assert!((c.nu_y - 615.3).abs() < 2.0 && (c.nu_z - 617.6).abs() < 2.0);
        assert!(c.position[0].abs() < 1e-9 && c.position[1].abs() < 1e-9);
        assert!(c.l3 < 0.0 && (c.l3.abs() / MM - 0.154).abs() < 0.01);
    }

    #[test]
    fn final_trap() {
        let c = characterize_trap(&ChipConfig::z_wire(5.0, 4.5 * GAUSS), &rb()).unwrap();
        assert!((c.z_t / MM - 1.654).abs() < 5e-3);
        assert!((c.theta.to_degrees().abs() - 13.52).abs() < 0.1);
        assert!(c.nu_x <= c.nu_y && c.nu_x <= c.nu_z);
        assert!(c.theta.abs() < std::f64::consts::FRAC_PI_4);
    }

    #[test]
    fn no_bias_no_trap() {
        let err = characterize_trap(&ChipConfig::z_wire(5.0, 0.0), &rb()).unwrap_err();
        assert!(matches!(err, Error::NoTrapFound(_)));
    }

    #[test]
    fn hessian_is_symmetric() {
        let cfg = ChipConfig::z_wire(5.0, 10.0 * GAUSS);
        let c = characterize_trap(&cfg, &rb()).unwrap();
        let h = finite_step(c.z_t);
        let hm = hessian(&cfg, &rb(), c.position, h).unwrap();
        let norm = hm.norm();
        for i in 0..3 {
            for j in 0..3 {
                assert!((hm[(i, j)] - hm[(j, i)]).abs() < 1e-8 * norm);
            }
        }
    }

    fn check_local_model(bias_gauss: f64, radius: f64) {
        let cfg = ChipConfig::z_wire(5.0, bias_gauss * GAUSS);
        let sp = rb();
        let c = characterize_trap(&cfg, &sp).unwrap();
        let p0 = Vector3::from(c.position);
        let v0 = potential_vec(&cfg, &sp, &p0).unwrap();
        let w2 = c.omega2();
        let (s, co) = c.theta.sin_cos();
        let ex = Vector3::new(co, s, 0.0);
        let ey = Vector3::new(-s, co, 0.0);
        let ez = Vector3::z();
        for d in [
            Vector3::new(1.0, 0.0, 0.0),
            Vector3::new(0.0, 1.0, 0.0),
            Vector3::new(0.0, 0.0, 1.0),
            Vector3::new(0.0, 0.0, -1.0),
            Vector3::new(0.5, -0.4, 0.6),
        ] {
            let d = d * radius;
            let (x, y, z) = (d.dot(&ex), d.dot(&ey), d.dot(&ez));
            let model = 0.5 * sp.mass * (w2[0] * x * x + w2[1] * y * y + w2[2] * z * z * (1.0 + 2.0 * z / (3.0 * c.l3)));
            let actual = potential_vec(&cfg, &sp, &(p0 + d)).unwrap() - v0;
            assert!((model / actual - 1.0).abs() < 0.02, "{bias_gauss} G {d:?}: {model} vs {actual}");
        }
    }

    #[test]
    fn local_model_reproduces_potential() {
        check_local_model(4.5, 10.0 * UM);
        check_local_model(10.0, 10.0 * UM);
        // The tight initial trap turns quartic beyond a few microns.
        check_local_model(21.5, 4.0 * UM);
    }
}
