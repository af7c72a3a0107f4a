//! Fixed-step RK4 and cubic Hermite interpolation on uniform grids.

use serde::{Deserialize, Serialize};

/// One classical fourth-order Runge–Kutta step of `y' = f(t, y)`.
pub fn rk4_step<const N: usize>(
    f: &impl Fn(f64, &[f64; N]) -> [f64; N],
    t: f64,
    y: &[f64; N],
    h: f64,
) -> [f64; N] {
    let axpy = |a: &[f64; N], s: f64, b: &[f64; N]| -> [f64; N] {
        std::array::from_fn(|i| a[i] + s * b[i])
    };
    let k1 = f(t, y);
    let k2 = f(t + 0.5 * h, &axpy(y, 0.5 * h, &k1));
    let k3 = f(t + 0.5 * h, &axpy(y, 0.5 * h, &k2));
    let k4 = f(t + h, &axpy(y, h, &k3));
    std::array::from_fn(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
}

/// Samples `values` with exact `slopes` on the grid `t0 + k dt`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HermiteSeries {
    pub t0: f64,
    pub dt: f64,
    pub values: Vec<f64>,
    pub slopes: Vec<f64>,
}

impl HermiteSeries {
    pub fn new(t0: f64, dt: f64, values: Vec<f64>, slopes: Vec<f64>) -> Self {
        assert_eq!(values.len(), slopes.len());
        assert!(values.len() >= 2 && dt > 0.0);
        Self {
            t0,
            dt,
            values,
            slopes,
        }
    }

    pub fn t_end(&self) -> f64 {
        self.t0 + self.dt * (self.values.len() - 1) as f64
    }

    /// Value and derivative at `t`; clamps to the end values outside the grid.
    pub fn eval_with_slope(&self, t: f64) -> (f64, f64) {
        let n = self.values.len();
        let s = (t - self.t0) / self.dt;
        if s <= 0.0 {
            return (self.values[0], self.slopes[0]);
        }
        if s >= (n - 1) as f64 {
            return (self.values[n - 1], self.slopes[n - 1]);
        }
        let k = (s.floor() as usize).min(n - 2);
        let u = s - k as f64;
        let (y0, y1) = (self.values[k], self.values[k + 1]);
        let (m0, m1) = (self.slopes[k] * self.dt, self.slopes[k + 1] * self.dt);
        let u2 = u * u;
        let u3 = u2 * u;
        let h00 = 2.0 * u3 - 3.0 * u2 + 1.0;
        let h10 = u3 - 2.0 * u2 + u;
        let h01 = -2.0 * u3 + 3.0 * u2;
        let h11 = u3 - u2;
        let value = h00 * y0 + h10 * m0 + h01 * y1 + h11 * m1;
        let d00 = 6.0 * u2 - 6.0 * u;
        let d10 = 3.0 * u2 - 4.0 * u + 1.0;
        let d01 = -d00;
        let d11 = 3.0 * u2 - 2.0 * u;
        let slope = (d00 * y0 + d10 * m0 + d01 * y1 + d11 * m1) / self.dt;
        (value, slope)
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.eval_with_slope(t).0
    }
}

/// Relative energy drift of RK4 over one period of a frozen oscillator
/// sampled with step `h`.
pub fn frozen_oscillator_drift(omega: f64, h: f64) -> f64 {
    let period = 2.0 * std::f64::consts::PI / omega;
    let steps = (period / h).ceil() as usize;
    let w2 = omega * omega;
    let f = |_: f64, y: &[f64; 2]| [y[1], -w2 * y[0]];
    let energy = |y: &[f64; 2]| 0.5 * y[1] * y[1] + 0.5 * w2 * y[0] * y[0];
    let mut y = [1.0, 0.0];
    let e0 = energy(&y);
    for k in 0..steps {
        y = rk4_step(&f, k as f64 * h, &y, h);
    }
    (energy(&y) - e0).abs() / e0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rk4_exponential() {
        let f = |_: f64, y: &[f64; 1]| [y[0]];
        let mut y = [1.0];
        let h = 1e-3;
        for k in 0..1000 {
            y = rk4_step(&f, k as f64 * h, &y, h);
        }
        assert!((y[0] - 1f64.exp()).abs() < 1e-12);
    }

    #[test]
    fn hermite_reproduces_cubic() {
        let g = |t: f64| 1.0 - 2.0 * t + 0.5 * t * t * t;
        let dg = |t: f64| -2.0 + 1.5 * t * t;
        let dt = 0.1;
        let values = (0..11).map(|k| g(k as f64 * dt)).collect();
        let slopes = (0..11).map(|k| dg(k as f64 * dt)).collect();
        let s = HermiteSeries::new(0.0, dt, values, slopes);
        for &t in &[0.03, 0.456, 0.999] {
            let (v, d) = s.eval_with_slope(t);
            assert!((v - g(t)).abs() < 1e-13);
            assert!((d - dg(t)).abs() < 1e-12);
        }
        assert_eq!(s.eval(-1.0), g(0.0));
        assert!((s.eval(5.0) - g(1.0)).abs() < 1e-15);
    }

    #[test]
    fn drift_scales_as_fifth_power() {
        let w = 2.0 * std::f64::consts::PI * 600.0;
        let d1 = frozen_oscillator_drift(w, 10e-6);
        let d2 = frozen_oscillator_drift(w, 5e-6);
        assert!(d1 > 1e-9 && d2 < 1e-9);
        let ratio = d1 / d2;
        assert!(ratio > 25.0 && ratio < 40.0, "{ratio}");
    }
}
