use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform grid centred on the origin, x index fastest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n: [usize; 3],
    /// Full side lengths, m.
    pub extent: [f64; 3],
}

impl GridSpec {
    pub fn new(n: [usize; 3], extent: [f64; 3]) -> Result<Self> {
        let g = Self { n, extent };
        g.validate()?;
        Ok(g)
    }

    /// Grid whose extent is `factor` times `radii` along each axis.
    pub fn covering(n: [usize; 3], radii: [f64; 3], factor: f64) -> Result<Self> {
        Self::new(n, std::array::from_fn(|a| factor * radii[a]))
    }

    pub fn validate(&self) -> Result<()> {
        for a in 0..3 {
            if self.n[a] < 16 || !self.n[a].is_power_of_two() {
                return Err(Error::Validation(format!(
                    "grid size {} along axis {a} must be a power of two of at least 16",
                    self.n[a]
                )));
            }
            if !(self.extent[a] > 0.0) || !self.extent[a].is_finite() {
                return Err(Error::Validation(format!("grid extent along axis {a} must be positive")));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.n.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self) -> [f64; 3] {
        std::array::from_fn(|a| self.extent[a] / self.n[a] as f64)
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().iter().product()
    }

    pub fn coordinates(&self, axis: usize) -> Vec<f64> {
        let n = self.n[axis];
        let h = self.extent[axis] / n as f64;
        (0..n).map(|j| (j as f64 - (n / 2) as f64) * h).collect()
    }

    /// Angular wavenumbers in FFT order.
    pub fn wavenumbers(&self, axis: usize) -> Vec<f64> {
        let n = self.n[axis];
        let dk = 2.0 * std::f64::consts::PI / self.extent[axis];
        (0..n)
            .map(|j| if j < n / 2 { j as f64 } else { j as f64 - n as f64 } * dk)
            .collect()
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.n[0] * (j + self.n[1] * k)
    }

    pub fn scaled(&self, factors: [f64; 3]) -> Self {
        Self {
            n: self.n,
            extent: std::array::from_fn(|a| self.extent[a] * factors[a]),
        }
    }
}

/// Complex field on a grid whose centre sits at `origin` (lab coordinates).
#[derive(Debug, Clone, PartialEq)]
pub struct WaveFunction {
    pub grid: GridSpec,
    pub origin: [f64; 3],
    pub data: Vec<Complex64>,
}

impl WaveFunction {
    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            grid,
            origin: [0.0; 3],
            data: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn(f64, f64, f64) -> Complex64) -> Self {
        let [xs, ys, zs] = [0, 1, 2].map(|a| grid.coordinates(a));
        let mut data = Vec::with_capacity(grid.len());
        for &z in &zs {
            for &y in &ys {
                for &x in &xs {
                    data.push(f(x, y, z));
                }
            }
        }
        Self {
            grid,
            origin: [0.0; 3],
            data,
        }
    }

    pub fn norm_squared(&self) -> f64 {
        self.data.iter().map(|c| c.norm_sqr()).sum::<f64>() * self.grid.cell_volume()
    }

    pub fn normalize(&mut self) {
        let s = self.norm_squared().sqrt();
        if s > 0.0 {
            let inv = 1.0 / s;
            self.data.iter_mut().for_each(|c| *c *= inv);
        }
    }

    /// Little-endian dump: three u32 sizes, three f64 extents, f64 time,
    /// then interleaved (re, im) pairs.
    pub fn write_snapshot(&self, path: &Path, time: f64) -> Result<()> {
        let mut bytes = Vec::with_capacity(12 + 32 + 16 * self.data.len());
        for &n in &self.grid.n {
            bytes.extend_from_slice(&(n as u32).to_le_bytes());
        }
        for &e in &self.grid.extent {
            bytes.extend_from_slice(&e.to_le_bytes());
        }
        bytes.extend_from_slice(&time.to_le_bytes());
        for c in &self.data {
            bytes.extend_from_slice(&c.re.to_le_bytes());
            bytes.extend_from_slice(&c.im.to_le_bytes());
        }
        let mut file = std::fs::File::create(path)?;
        file.write_all(&bytes)?;
        Ok(())
    }

    pub fn read_snapshot(path: &Path) -> Result<(Self, f64)> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        let bad = || Error::InvalidInput(format!("{} is not a wavefunction snapshot", path.display()));
        if bytes.len() < 44 {
            return Err(bad());
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes")) as usize;
        let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().expect("8 bytes"));
        let n = [u32_at(0), u32_at(4), u32_at(8)];
        let extent = [f64_at(12), f64_at(20), f64_at(28)];
        let time = f64_at(36);
        let grid = GridSpec::new(n, extent)?;
        if bytes.len() != 44 + 16 * grid.len() {
            return Err(bad());
        }
        let data = (0..grid.len())
            .map(|k| Complex64::new(f64_at(44 + 16 * k), f64_at(52 + 16 * k)))
            .collect();
        Ok((
            Self {
                grid,
                origin: [0.0; 3],
                data,
            },
            time,
        ))
    }
}

/// Unnormalised 3D FFT built from batched 1D transforms.
pub struct Fft3 {
    n: [usize; 3],
    forward: [Arc<dyn Fft<f64>>; 3],
    inverse: [Arc<dyn Fft<f64>>; 3],
    lines: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl Fft3 {
    pub fn new(grid: &GridSpec) -> Self {
        let mut planner = FftPlanner::new();
        let forward = grid.n.map(|n| planner.plan_fft_forward(n));
        let inverse = grid.n.map(|n| planner.plan_fft_inverse(n));
        let scratch_len = forward
            .iter()
            .chain(inverse.iter())
            .map(|f| f.get_inplace_scratch_len())
            .max()
            .unwrap_or(0);
        Self {
            n: grid.n,
            forward,
            inverse,
            lines: vec![Complex64::new(0.0, 0.0); grid.len()],
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
        }
    }

    pub fn forward(&mut self, data: &mut [Complex64]) {
        self.transform(data, true);
    }

    /// Inverse transform without the `1/N` factor.
    pub fn inverse(&mut self, data: &mut [Complex64]) {
        self.transform(data, false);
    }

    fn transform(&mut self, data: &mut [Complex64], forward: bool) {
        let [nx, ny, nz] = self.n;
        let plans = if forward { &self.forward } else { &self.inverse };
        plans[0].process_with_scratch(data, &mut self.scratch);

        // y lines: transpose each z-plane so y is contiguous.
        for k in 0..nz {
            let plane = &mut data[k * nx * ny..(k + 1) * nx * ny];
            let lines = &mut self.lines[..nx * ny];
            for j in 0..ny {
                for i in 0..nx {
                    lines[i * ny + j] = plane[j * nx + i];
                }
            }
            plans[1].process_with_scratch(lines, &mut self.scratch);
            for j in 0..ny {
                for i in 0..nx {
                    plane[j * nx + i] = lines[i * ny + j];
                }
            }
        }

        // z lines: gather per (i, j) column, one y-row at a time.
        let row = nx * ny;
        for j in 0..ny {
            let lines = &mut self.lines[..nx * nz];
            for k in 0..nz {
                let src = &data[k * row + j * nx..k * row + (j + 1) * nx];
                for (i, v) in src.iter().enumerate() {
                    lines[i * nz + k] = *v;
                }
            }
            plans[2].process_with_scratch(lines, &mut self.scratch);
            for k in 0..nz {
                let dst = &mut data[k * row + j * nx..k * row + (j + 1) * nx];
                for (i, v) in dst.iter_mut().enumerate() {
                    *v = lines[i * nz + k];
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_validation() {
        assert!(GridSpec::new([16, 32, 64], [1.0; 3]).is_ok());
        assert!(GridSpec::new([8, 32, 64], [1.0; 3]).is_err());
        assert!(GridSpec::new([24, 32, 64], [1.0; 3]).is_err());
        assert!(GridSpec::new([16, 16, 16], [1.0, 0.0, 1.0]).is_err());
    }

    #[test]
    fn fft_round_trip_and_plane_wave() {
        let g = GridSpec::new([16, 32, 16], [1.0, 2.0, 3.0]).unwrap();
        let k = [g.wavenumbers(0)[3], g.wavenumbers(1)[30], g.wavenumbers(2)[1]];
        let psi = WaveFunction::from_fn(g, |x, y, z| Complex64::from_polar(1.0, k[0] * x + k[1] * y + k[2] * z));
        let mut d = psi.data.clone();
        let mut fft = Fft3::new(&g);
        fft.forward(&mut d);
        let peak = g.index(3, 30, 1);
        let total: f64 = d.iter().map(|c| c.norm_sqr()).sum();
        assert!((d[peak].norm_sqr() / total - 1.0).abs() < 1e-12);
        fft.inverse(&mut d);
        let n = g.len() as f64;
        for (a, b) in d.iter().zip(&psi.data) {
            assert!((a / n - b).norm() < 1e-12);
        }
    }

    #[test]
    fn snapshot_round_trip() {
        let g = GridSpec::new([16, 16, 16], [1e-5, 2e-5, 3e-5]).unwrap();
        let psi = WaveFunction::from_fn(g, |x, y, z| Complex64::new(x * 1e5, y * z * 1e10));
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("snap.bin");
        psi.write_snapshot(&p, 0.25).unwrap();
        assert_eq!(std::fs::metadata(&p).unwrap().len(), 44 + 16 * 4096);
        let (back, t) = WaveFunction::read_snapshot(&p).unwrap();
        assert_eq!(t, 0.25);
        assert_eq!(back.grid, g);
        assert_eq!(back.data, psi.data);
    }
}
