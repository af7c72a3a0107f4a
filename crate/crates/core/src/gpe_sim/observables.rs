use serde::{Deserialize, Serialize};

use super::grid::WaveFunction;

/// First and second moments of `|psi|^2` in grid coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub norm: f64,
    pub mean: [f64; 3],
    pub variance: [f64; 3],
    pub covariance_xy: f64,
    /// Peak density and largest density on the outermost grid shell.
    pub peak: f64,
    pub boundary: f64,
}

pub fn moments(psi: &WaveFunction) -> Moments {
    let g = &psi.grid;
    let [xs, ys, zs] = [0, 1, 2].map(|a| g.coordinates(a));
    let [nx, ny, nz] = g.n;
    let (mut s0, mut s1, mut s2, mut sxy) = (0.0, [0.0; 3], [0.0; 3], 0.0);
    let (mut peak, mut boundary) = (0.0_f64, 0.0_f64);
    let mut idx = 0;
    for (k, &z) in zs.iter().enumerate() {
        for (j, &y) in ys.iter().enumerate() {
            for (i, &x) in xs.iter().enumerate() {
                let d = psi.data[idx].norm_sqr();
                idx += 1;
                s0 += d;
                s1[0] += d * x;
                s1[1] += d * y;
                s1[2] += d * z;
                s2[0] += d * x * x;
                s2[1] += d * y * y;
                s2[2] += d * z * z;
                sxy += d * x * y;
                peak = peak.max(d);
                if i == 0 || j == 0 || k == 0 || i == nx - 1 || j == ny - 1 || k == nz - 1 {
                    boundary = boundary.max(d);
                }
            }
        }
    }
    let dv = g.cell_volume();
    let mean: [f64; 3] = std::array::from_fn(|a| s1[a] / s0);
    Moments {
        norm: s0 * dv,
        mean,
        variance: std::array::from_fn(|a| s2[a] / s0 - mean[a] * mean[a]),
        covariance_xy: sxy / s0 - mean[0] * mean[1],
        peak,
        boundary,
    }
}

/// Widths along axes rotated by `theta` in the XY plane, from the lab-axis
/// variances and XY covariance.
pub fn rotate_widths(variance: [f64; 3], covariance_xy: f64, theta: f64) -> [f64; 3] {
    let (s, c) = theta.sin_cos();
    let vx = variance[0] * c * c + 2.0 * covariance_xy * c * s + variance[1] * s * s;
    let vy = variance[0] * s * s - 2.0 * covariance_xy * c * s + variance[1] * c * c;
    [vx.max(0.0).sqrt(), vy.max(0.0).sqrt(), variance[2].max(0.0).sqrt()]
}

/// `(dx, dy, dz)` of a normalised wavefunction along the trap eigen-axes.
pub fn rotated_widths(psi: &WaveFunction, theta: f64) -> [f64; 3] {
    let m = moments(psi);
    rotate_widths(m.variance, m.covariance_xy, theta)
}

/// Lab-axis standard deviations.
pub fn widths(psi: &WaveFunction) -> [f64; 3] {
    moments(psi).variance.map(|v| v.max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::super::grid::GridSpec;
    use super::*;
    use rustfft::num_complex::Complex64;

    fn gaussian(sx: f64, sy: f64, sz: f64, theta: f64) -> WaveFunction {
        let g = GridSpec::new([64, 64, 32], [24.0, 24.0, 12.0]).unwrap();
        let (s, c) = theta.sin_cos();
        let mut psi = WaveFunction::from_fn(g, |x, y, z| {
            let u = c * x + s * y;
            let v = -s * x + c * y;
            Complex64::new((-(u * u) / (4.0 * sx * sx) - v * v / (4.0 * sy * sy) - z * z / (4.0 * sz * sz)).exp(), 0.0)
        });
        psi.normalize();
        psi
    }

    #[test]
    fn zero_angle_is_identity() {
        let psi = gaussian(1.5, 1.0, 0.8, 0.4);
        let w = widths(&psi);
        let r = rotated_widths(&psi, 0.0);
        for a in 0..3 {
            assert!((w[a] - r[a]).abs() < 1e-14);
        }
    }

    #[test]
    fn recovers_principal_widths() {
        // Oracle: analytic second moments of a rotated Gaussian.
        let theta = 0.37;
        let psi = gaussian(2.0, 0.9, 0.8, theta);
        let r = rotated_widths(&psi, theta);
        for (got, want) in r.iter().zip([2.0, 0.9, 0.8]) {
            assert!((got / want - 1.0).abs() < 1e-6, "{got} vs {want}");
        }
    }

    #[test]
    fn product_state_has_no_covariance() {
        let psi = gaussian(1.4, 0.9, 0.8, 0.0);
        let m = moments(&psi);
        assert!(m.covariance_xy.abs() < 1e-14);
        let theta = 0.6_f64;
        let r = rotated_widths(&psi, theta);
        let (s, c) = theta.sin_cos();
        let expect = (m.variance[0] * c * c + m.variance[1] * s * s).sqrt();
        assert!((r[0] - expect).abs() < 1e-14);
    }
}
