//! Low-lying collective modes of a cigar-shaped condensate and their
//! identification in simulated size oscillations.

use std::f64::consts::PI;
use std::fmt;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModeLabel {
    DipolePerp,
    DipoleX,
    Q1,
    Q2,
    Scissors,
    Monopole,
}

impl ModeLabel {
    pub const ALL: [ModeLabel; 6] = [
        Self::DipolePerp,
        Self::DipoleX,
        Self::Q1,
        Self::Q2,
        Self::Scissors,
        Self::Monopole,
    ];
}

impl fmt::Display for ModeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::DipolePerp => "D_perp",
            Self::DipoleX => "D_x",
            Self::Q1 => "Q1",
            Self::Q2 => "Q2",
            Self::Scissors => "Sc_xy",
            Self::Monopole => "M",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeTable {
    pub eta: f64,
    pub omega_perp: f64,
    pub delta: f64,
    /// Angular frequencies in `ModeLabel::ALL` order.
    pub frequencies: [(ModeLabel, f64); 6],
}

impl ModeTable {
    pub fn omega(&self, label: ModeLabel) -> f64 {
        self.frequencies
            .iter()
            .find(|(l, _)| *l == label)
            .map(|(_, w)| *w)
            .expect("every label is tabulated")
    }

    pub fn hz(&self, label: ModeLabel) -> f64 {
        self.omega(label) / (2.0 * PI)
    }
}

/// Mode frequencies of a cylindrical trap with aspect ratio `eta` and
/// radial angular frequency `omega_perp`.
pub fn mode_frequencies(eta: f64, omega_perp: f64) -> Result<ModeTable> {
    if !(eta > 0.0) || !(omega_perp > 0.0) {
        return Err(Error::InvalidInput(format!(
            "aspect ratio and radial frequency must be positive (eta = {eta}, omega_perp = {omega_perp})"
        )));
    }
    let e2 = eta * eta;
    let disc = 9.0 * e2 * e2 - 16.0 * e2 + 16.0;
    debug_assert!(disc > 0.0);
    let delta = disc.sqrt();
    let branch = |sign: f64| (2.0 + 1.5 * e2 + sign * 0.5 * delta).sqrt() * omega_perp;
    Ok(ModeTable {
        eta,
        omega_perp,
        delta,
        frequencies: [
            (ModeLabel::DipolePerp, omega_perp),
            (ModeLabel::DipoleX, eta * omega_perp),
            (ModeLabel::Q1, branch(1.0)),
            (ModeLabel::Q2, 2f64.sqrt() * omega_perp),
            (ModeLabel::Scissors, (1.0 + e2).sqrt() * omega_perp),
            (ModeLabel::Monopole, branch(-1.0)),
        ],
    })
}

/// Cylindrical approximation of a trap with weak axis first:
/// `omega_perp = (w_y + w_z)/2`, `eta = w_x / omega_perp`.
pub fn cylindrical_approximation(omega: [f64; 3]) -> (f64, f64) {
    let perp = 0.5 * (omega[1] + omega[2]);
    (omega[0] / perp, perp)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumOptions {
    pub zero_padding: usize,
    /// Minimum topographic prominence of a peak, in decades.
    pub prominence: f64,
    /// Peaks more than this many decades below the maximum are ignored.
    pub dynamic_range: f64,
    /// Matching window in refined (zero-padded) bins.
    pub match_bins: f64,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        Self {
            zero_padding: 4,
            prominence: 0.5,
            dynamic_range: 3.0,
            match_bins: 3.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub frequency_hz: f64,
    /// log10 of the interpolated magnitude.
    pub log_magnitude: f64,
    pub mode: Option<ModeLabel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub frequencies: Vec<f64>,
    pub log_magnitude: Vec<f64>,
    /// Sorted by decreasing magnitude.
    pub peaks: Vec<Peak>,
    /// Spacing of the zero-padded frequency grid, Hz.
    pub bin_width: f64,
    /// Relative mismatch between spectral and time-domain energy.
    pub parseval_error: f64,
}

impl Spectrum {
    pub fn dominant(&self) -> Option<&Peak> {
        self.peaks.first()
    }

    pub fn csv_rows(&self) -> Vec<[f64; 2]> {
        self.frequencies
            .iter()
            .zip(&self.log_magnitude)
            .map(|(&f, &m)| [f, m])
            .collect()
    }
}

fn hann(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|k| 0.5 - 0.5 * (2.0 * PI * k as f64 / (n - 1) as f64).cos())
        .collect()
}

fn detrended(values: &[f64]) -> Vec<f64> {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    values.iter().map(|v| v - mean).collect()
}

/// Upper bound of the Hann sidelobe magnitude `d` raw bins from a unit peak.
fn leakage_envelope(d: f64) -> f64 {
    (0.5 / (d * d * d)).min(1.0)
}

fn prominence(mags: &[f64], k: usize) -> f64 {
    let h = mags[k];
    let mut left = h;
    for &m in mags[..k].iter().rev() {
        if m > h {
            break;
        }
        left = left.min(m);
    }
    let mut right = h;
    for &m in &mags[k + 1..] {
        if m > h {
            break;
        }
        right = right.min(m);
    }
    h - left.max(right)
}

/// Windowed, zero-padded magnitude spectrum of a uniformly sampled series
/// with peaks labelled from `modes`. `slowest_hz` enforces a minimum of four
/// periods of the slowest mode of interest.
pub fn analyze_series(
    values: &[f64],
    sample_interval: f64,
    slowest_hz: Option<f64>,
    modes: Option<&ModeTable>,
    options: &SpectrumOptions,
) -> Result<Spectrum> {
    if !(sample_interval > 0.0) {
        return Err(Error::InvalidInput("sample interval must be positive".into()));
    }
    let n = values.len();
    if n < 16 {
        return Err(Error::SeriesTooShort(format!("{n} samples, need at least 16")));
    }
    let duration = n as f64 * sample_interval;
    if let Some(f) = slowest_hz {
        if duration * f < 4.0 {
            return Err(Error::SeriesTooShort(format!(
                "{:.1} ms covers {:.2} periods of {f:.3} Hz, need 4",
                duration * 1e3,
                duration * f
            )));
        }
    }
    let window = hann(n);
    let signal: Vec<f64> = detrended(values).iter().zip(&window).map(|(v, w)| v * w).collect();
    let m = n * options.zero_padding.max(1);
    let mut buf: Vec<Complex64> = signal.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    buf.resize(m, Complex64::new(0.0, 0.0));
    FftPlanner::new().plan_fft_forward(m).process(&mut buf);

    let time_energy: f64 = signal.iter().map(|v| v * v).sum();
    let spec_energy: f64 = buf.iter().map(|c| c.norm_sqr()).sum::<f64>() / m as f64;
    let parseval_error = if time_energy > 0.0 {
        (spec_energy / time_energy - 1.0).abs()
    } else {
        spec_energy
    };

    let half = m / 2 + 1;
    let bin_width = 1.0 / (m as f64 * sample_interval);
    let frequencies: Vec<f64> = (0..half).map(|k| k as f64 * bin_width).collect();
    let floor = f64::MIN_POSITIVE;
    let log_magnitude: Vec<f64> = buf[..half].iter().map(|c| c.norm().max(floor).log10()).collect();

    let top = log_magnitude.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut peaks = Vec::new();
    for k in 1..half - 1 {
        let (a, b, c) = (log_magnitude[k - 1], log_magnitude[k], log_magnitude[k + 1]);
        if !(b > a && b >= c) || b < top - options.dynamic_range {
            continue;
        }
        if prominence(&log_magnitude, k) < options.prominence {
            continue;
        }
        let curvature = a - 2.0 * b + c;
        let shift = if curvature < 0.0 { 0.5 * (a - c) / curvature } else { 0.0 };
        let frequency_hz = (k as f64 + shift) * bin_width;
        let log_peak = b - 0.25 * (a - c) * shift;
        let mode = modes.and_then(|t| {
            t.frequencies
                .iter()
                .map(|&(l, w)| (l, (w / (2.0 * PI) - frequency_hz).abs()))
                .filter(|&(_, d)| d <= options.match_bins * bin_width)
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .map(|(l, _)| l)
        });
        peaks.push(Peak {
            frequency_hz,
            log_magnitude: log_peak,
            mode,
        });
    }
    peaks.sort_by(|a, b| b.log_magnitude.total_cmp(&a.log_magnitude));
    let raw_bin = 1.0 / duration;
    let mut kept: Vec<Peak> = Vec::with_capacity(peaks.len());
    for p in peaks {
        let masked = kept.iter().any(|q| {
            let d = (p.frequency_hz - q.frequency_hz).abs() / raw_bin;
            d < 2.0 || p.log_magnitude < q.log_magnitude + leakage_envelope(d).log10() + 0.5
        });
        if !masked {
            kept.push(p);
        }
    }
    let peaks = kept;
    Ok(Spectrum {
        frequencies,
        log_magnitude,
        peaks,
        bin_width,
        parseval_error,
    })
}

/// Cosine of the phase difference between two series at `frequency_hz`.
/// Negative values mean the oscillations are out of phase.
pub fn phase_relation(a: &[f64], b: &[f64], sample_interval: f64, frequency_hz: f64) -> Result<f64> {
    if a.len() != b.len() || a.len() < 16 {
        return Err(Error::SeriesTooShort("phase relation needs two equal series of 16+ samples".into()));
    }
    let window = hann(a.len());
    let project = |s: &[f64]| -> Complex64 {
        detrended(s)
            .iter()
            .zip(&window)
            .enumerate()
            .map(|(k, (v, w))| Complex64::from_polar(v * w, -2.0 * PI * frequency_hz * k as f64 * sample_interval))
            .sum()
    };
    let (pa, pb) = (project(a), project(b));
    let denom = pa.norm() * pb.norm();
    if denom == 0.0 {
        return Ok(0.0);
    }
    Ok((pa * pb.conj()).re / denom)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn isotropic_limit() {
        let t = mode_frequencies(1.0, 1.0).unwrap();
        assert!((t.delta - 3.0).abs() < 1e-15);
        assert!((t.omega(ModeLabel::Q1) - 5f64.sqrt()).abs() < 1e-15);
        assert!((t.omega(ModeLabel::Monopole) - 2f64.sqrt()).abs() < 1e-15);
        assert!((t.omega(ModeLabel::Scissors) - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(t.omega(ModeLabel::Q2), 2f64.sqrt());
    }

    #[test]
    fn cigar_trap_values() {
        // Oracle: direct evaluation plus the small-eta limit of the lower branch.
        let t = mode_frequencies(0.25, 1.0).unwrap();
        assert!((t.omega(ModeLabel::Q1) - 2.0081).abs() < 1e-4);
        assert!((t.omega(ModeLabel::Monopole) - 0.3937).abs() < 1e-4);
        assert!((t.omega(ModeLabel::Scissors) - 1.0308).abs() < 1e-4);
        let small = mode_frequencies(1e-3, 1.0).unwrap();
        assert!((small.omega(ModeLabel::Monopole) / 1e-3 - 2.5f64.sqrt()).abs() < 1e-5);
        assert_eq!(t.omega(ModeLabel::DipoleX), 0.25);
    }

    #[test]
    fn rejects_non_positive() {
        assert!(mode_frequencies(0.0, 1.0).is_err());
        assert!(mode_frequencies(0.5, -1.0).is_err());
    }

    #[test]
    fn single_sinusoid() {
        let dt = 1.0 / 2000.0;
        let x: Vec<f64> = (0..2000).map(|k| (2.0 * PI * 50.0 * k as f64 * dt).sin()).collect();
        let s = analyze_series(&x, dt, Some(10.0), None, &SpectrumOptions::default()).unwrap();
        assert_eq!(s.peaks.len(), 1);
        assert!((s.peaks[0].frequency_hz - 50.0).abs() < s.bin_width);
        assert!(s.parseval_error < 1e-9);
        assert!(analyze_series(&x[..200], dt, Some(10.0), None, &SpectrumOptions::default()).is_err());
    }

    #[test]
    fn sidelobes_stay_below_one_percent() {
        let dt = 1e-3;
        let n = 1000;
        let f0 = 100.0;
        let x: Vec<f64> = (0..n).map(|k| (2.0 * PI * f0 * k as f64 * dt).cos()).collect();
        let s = analyze_series(&x, dt, None, None, &SpectrumOptions::default()).unwrap();
        let peak = 10f64.powf(s.peaks[0].log_magnitude);
        let raw_bin = 1.0 / (n as f64 * dt);
        for (f, m) in s.frequencies.iter().zip(&s.log_magnitude) {
            if (f - f0).abs() >= 3.0 * raw_bin && *f < 400.0 {
                assert!(10f64.powf(*m) < 0.01 * peak, "{f}");
            }
        }
    }

    #[test]
    fn phase_sign() {
        let dt = 1e-3;
        let a: Vec<f64> = (0..1000).map(|k| (2.0 * PI * 20.0 * k as f64 * dt).sin()).collect();
        let b: Vec<f64> = a.iter().map(|v| -0.3 * v).collect();
        assert!(phase_relation(&a, &b, dt, 20.0).unwrap() < -0.99);
        assert!(phase_relation(&a, &a, dt, 20.0).unwrap() > 0.99);
    }
}
