//! Rational (Padé-form) least-squares fits `N(z) / D(z)` with `D(0) = 1`.
//!
//! Fitting runs in a scaled variable `x = z / s` for conditioning: a
//! linearised solve (`N - y D = 0`), a few Sanathanan–Koerner reweightings,
//! and a Levenberg–Marquardt polish on the relative residuals. Stored
//! coefficients are in the caller's units.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of grid points used to certify that the denominator has no root
/// on the fit domain.
const POLE_CHECK_POINTS: usize = 4001;

/// Default relative residual target for automatic order selection.
pub const DEFAULT_TOLERANCE: f64 = 1e-4;

/// Orders tried (in order) by [`fit_pade_auto`].
pub const DEFAULT_ORDERS: [(usize, usize); 7] =
    [(1, 2), (2, 2), (2, 3), (3, 3), (3, 4), (4, 4), (5, 5)];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PadeFit {
    /// `a_0 .. a_p`
    pub numerator: Vec<f64>,
    /// `1, b_1 .. b_q`
    pub denominator: Vec<f64>,
    pub domain: (f64, f64),
    /// Largest relative deviation over the fitted samples (absolute if every
    /// sample is zero).
    pub max_residual: f64,
}

fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

fn horner_deriv(coeffs: &[f64], x: f64) -> f64 {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .rev()
        .fold(0.0, |acc, (k, &c)| acc * x + k as f64 * c)
}

impl PadeFit {
    pub fn orders(&self) -> (usize, usize) {
        (self.numerator.len() - 1, self.denominator.len() - 1)
    }

    pub fn eval(&self, z: f64) -> f64 {
        horner(&self.numerator, z) / horner(&self.denominator, z)
    }

    pub fn derivative(&self, z: f64) -> f64 {
        let n = horner(&self.numerator, z);
        let d = horner(&self.denominator, z);
        let dn = horner_deriv(&self.numerator, z);
        let dd = horner_deriv(&self.denominator, z);
        (dn * d - n * dd) / (d * d)
    }

    pub fn denominator_at(&self, z: f64) -> f64 {
        horner(&self.denominator, z)
    }

    pub fn contains(&self, z: f64) -> bool {
        let span = self.domain.1 - self.domain.0;
        z >= self.domain.0 - 1e-9 * span && z <= self.domain.1 + 1e-9 * span
    }

    /// Checks that the fit is strictly monotone on its domain (dense sampling).
    pub fn is_strictly_monotone(&self) -> bool {
        let n = 2000;
        let (lo, hi) = self.domain;
        let mut sign = 0.0;
        let mut prev = self.eval(lo);
        for i in 1..=n {
            let z = lo + (hi - lo) * i as f64 / n as f64;
            let v = self.eval(z);
            let s = (v - prev).signum();
            if v == prev {
                return false;
            }
            if sign == 0.0 {
                sign = s;
            } else if s != sign {
                return false;
            }
            prev = v;
        }
        true
    }

    /// Solves `eval(z) = target` on the fit domain. Requires monotonicity.
    pub fn invert(&self, target: f64) -> Option<f64> {
        let (mut lo, mut hi) = self.domain;
        let mut flo = self.eval(lo) - target;
        let fhi = self.eval(hi) - target;
        if flo == 0.0 {
            return Some(lo);
        }
        if fhi == 0.0 {
            return Some(hi);
        }
        if flo.signum() == fhi.signum() {
            return None;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let fm = self.eval(mid) - target;
            if fm == 0.0 || (hi - lo) < 1e-15 * mid.abs().max(1e-300) {
                return Some(mid);
            }
            if fm.signum() == flo.signum() {
                lo = mid;
                flo = fm;
            } else {
                hi = mid;
            }
        }
        Some(0.5 * (lo + hi))
    }
}

/// Scaled-variable working representation.
struct Scaled {
    x: Vec<f64>,
    y: Vec<f64>,
    w: Vec<f64>,
}

fn residuals(s: &Scaled, num: &[f64], den: &[f64]) -> Vec<f64> {
    s.x.iter()
        .zip(&s.y)
        .zip(&s.w)
        .map(|((&x, &y), &w)| w * (horner(num, x) / horner(den, x) - y))
        .collect()
}

fn split(params: &[f64], p: usize) -> (Vec<f64>, Vec<f64>) {
    let num = params[..=p].to_vec();
    let mut den = vec![1.0];
    den.extend_from_slice(&params[p + 1..]);
    (num, den)
}

fn pole_location(den: &[f64], lo: f64, hi: f64) -> Option<f64> {
    let d0 = horner(den, lo);
    let mut scale = d0.abs();
    let mut values = Vec::with_capacity(POLE_CHECK_POINTS);
    for i in 0..POLE_CHECK_POINTS {
        let x = lo + (hi - lo) * i as f64 / (POLE_CHECK_POINTS - 1) as f64;
        let d = horner(den, x);
        scale = scale.max(d.abs());
        values.push((x, d));
    }
    values
        .into_iter()
        .find(|&(_, d)| d.signum() != d0.signum() || d.abs() <= 1e-10 * scale)
        .map(|(x, _)| x)
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

/// Weighted linear least squares for the linearised problem
/// `N(x) - y D(x) = 0`, each row divided by `extra[i]`.
fn linearised(s: &Scaled, p: usize, q: usize, extra: &[f64]) -> Result<Vec<f64>> {
    let n = s.x.len();
    let cols = p + 1 + q;
    let mut a = DMatrix::<f64>::zeros(n, cols);
    let mut rhs = DVector::<f64>::zeros(n);
    for i in 0..n {
        let wi = s.w[i] / extra[i];
        let mut xp = 1.0;
        for k in 0..=p {
            a[(i, k)] = wi * xp;
            xp *= s.x[i];
        }
        let mut xp = s.x[i];
        for k in 1..=q {
            a[(i, p + k)] = -wi * s.y[i] * xp;
            xp *= s.x[i];
        }
        rhs[i] = wi * s.y[i];
    }
    // Column equilibration before the SVD.
    let norms: Vec<f64> = (0..cols)
        .map(|j| a.column(j).norm().max(f64::MIN_POSITIVE))
        .collect();
    for j in 0..cols {
        let nj = norms[j];
        a.column_mut(j).scale_mut(1.0 / nj);
    }
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smax > 0.0) || smin / smax < 1e-13 {
        return Err(Error::IllConditioned(format!(
            "singular value ratio {:.3e} for orders ({p},{q})",
            if smax > 0.0 { smin / smax } else { 0.0 }
        )));
    }
    let sol = svd
        .solve(&rhs, 0.0)
        .map_err(|e| Error::IllConditioned(e.to_string()))?;
    Ok((0..cols).map(|j| sol[j] / norms[j]).collect())
}

fn levenberg_marquardt(s: &Scaled, p: usize, params: &mut Vec<f64>, lo: f64, hi: f64) {
    let n = s.x.len();
    let cols = params.len();
    let (num, den) = split(params, p);
    let mut cost = sum_sq(&residuals(s, &num, &den));
    let mut lambda = 1e-3;
    for _ in 0..300 {
        let (num, den) = split(params, p);
        let r = residuals(s, &num, &den);
        let mut jac = DMatrix::<f64>::zeros(n, cols);
        for i in 0..n {
            let x = s.x[i];
            let nv = horner(&num, x);
            let dv = horner(&den, x);
            let mut xp = 1.0;
            for k in 0..=p {
                jac[(i, k)] = s.w[i] * xp / dv;
                xp *= x;
            }
            let mut xp = x;
            for k in 1..den.len() {
                jac[(i, p + k)] = -s.w[i] * nv * xp / (dv * dv);
                xp *= x;
            }
        }
        let jt = jac.transpose();
        let jtj = &jt * &jac;
        let g = &jt * DVector::from_vec(r.clone());
        let mut improved = false;
        for _ in 0..12 {
            let mut m = jtj.clone();
            for d in 0..cols {
                m[(d, d)] += lambda * jtj[(d, d)].max(1e-300);
            }
            let Some(step) = m.lu().solve(&(-&g)) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = params.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let (tn, td) = split(&trial, p);
            if pole_location(&td, lo, hi).is_some() {
                lambda *= 10.0;
                continue;
            }
            let tc = sum_sq(&residuals(s, &tn, &td));
            if tc.is_finite() && tc < cost {
                let rel = (cost - tc) / cost.max(1e-300);
                *params = trial;
                cost = tc;
                lambda = (lambda * 0.3).max(1e-12);
                improved = true;
                if rel < 1e-14 {
                    return;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            return;
        }
    }
}

/// Least-squares Padé fit of orders `(num_order, den_order)`.
pub fn fit_pade(samples: &[(f64, f64)], num_order: usize, den_order: usize) -> Result<PadeFit> {
    let needed = num_order + den_order + 1;
    if samples.len() < needed {
        return Err(Error::InsufficientSamples {
            needed,
            got: samples.len(),
        });
    }
    if samples.windows(2).any(|w| !(w[1].0 > w[0].0)) {
        return Err(Error::InvalidInput(
            "sample abscissae must be distinct and sorted ascending".into(),
        ));
    }
    if samples.iter().any(|(z, y)| !z.is_finite() || !y.is_finite()) {
        return Err(Error::InvalidInput("non-finite sample".into()));
    }
    let scale = samples
        .iter()
        .map(|(z, _)| z.abs())
        .fold(0.0_f64, f64::max)
        .max(f64::MIN_POSITIVE);
    let ymax = samples.iter().map(|(_, y)| y.abs()).fold(0.0_f64, f64::max);
    let relative = samples.iter().all(|(_, y)| *y != 0.0);
    let s = Scaled {
        x: samples.iter().map(|(z, _)| z / scale).collect(),
        y: samples.iter().map(|(_, y)| *y).collect(),
        w: samples
            .iter()
            .map(|(_, y)| {
                if relative {
                    1.0 / y.abs()
                } else if ymax > 0.0 {
                    1.0 / ymax
                } else {
                    1.0
                }
            })
            .collect(),
    };
    let lo = s.x[0];
    let hi = s.x[s.x.len() - 1];

    let ones = vec![1.0; s.x.len()];
    let mut params = linearised(&s, num_order, den_order, &ones)?;
    if den_order > 0 {
        let mut best = params.clone();
        let (n0, d0) = split(&params, num_order);
        let mut best_cost = if pole_location(&d0, lo, hi).is_none() {
            sum_sq(&residuals(&s, &n0, &d0))
        } else {
            f64::INFINITY
        };
        for _ in 0..6 {
            let (_, den) = split(&params, num_order);
            let extra: Vec<f64> = s.x.iter().map(|&x| horner(&den, x).abs().max(1e-12)).collect();
            let Ok(next) = linearised(&s, num_order, den_order, &extra) else {
                break;
            };
            params = next;
            let (nn, dd) = split(&params, num_order);
            if pole_location(&dd, lo, hi).is_none() {
                let c = sum_sq(&residuals(&s, &nn, &dd));
                if c < best_cost {
                    best_cost = c;
                    best = params.clone();
                }
            }
        }
        params = best;
        let (_, dd) = split(&params, num_order);
        if let Some(at) = pole_location(&dd, lo, hi) {
            return Err(Error::PolesInDomain { at: at * scale });
        }
        levenberg_marquardt(&s, num_order, &mut params, lo, hi);
    }

    let (num, den) = split(&params, num_order);
    if let Some(at) = pole_location(&den, lo, hi) {
        return Err(Error::PolesInDomain { at: at * scale });
    }
    let numerator: Vec<f64> = num
        .iter()
        .enumerate()
        .map(|(k, c)| c / scale.powi(k as i32))
        .collect();
    let denominator: Vec<f64> = den
        .iter()
        .enumerate()
        .map(|(k, c)| c / scale.powi(k as i32))
        .collect();
    let mut fit = PadeFit {
        numerator,
        denominator,
        domain: (samples[0].0, samples[samples.len() - 1].0),
        max_residual: 0.0,
    };
    fit.max_residual = samples
        .iter()
        .map(|&(z, y)| {
            let v = fit.eval(z);
            if relative {
                ((v - y) / y).abs()
            } else if ymax > 0.0 {
                (v - y).abs() / ymax
            } else {
                (v - y).abs()
            }
        })
        .fold(0.0, f64::max);
    Ok(fit)
}

/// Tries `orders` in sequence and returns the first fit whose residual is
/// below `tolerance`; falls back to the best fit found.
pub fn fit_pade_auto(
    samples: &[(f64, f64)],
    orders: &[(usize, usize)],
    tolerance: f64,
) -> Result<PadeFit> {
    let mut best: Option<PadeFit> = None;
    let mut last_err = None;
    for &(p, q) in orders {
        match fit_pade(samples, p, q) {
            Ok(fit) => {
                if fit.max_residual < tolerance {
                    return Ok(fit);
                }
                if best.as_ref().is_none_or(|b| fit.max_residual < b.max_residual) {
                    best = Some(fit);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    match best {
        Some(fit) => {
            log::warn!(
                "no Padé order met tolerance {tolerance:.1e}; best residual {:.3e} at orders {:?}",
                fit.max_residual,
                fit.orders()
            );
            Ok(fit)
        }
        None => Err(last_err.unwrap_or(Error::InsufficientSamples { needed: 1, got: 0 })),
    }
}
