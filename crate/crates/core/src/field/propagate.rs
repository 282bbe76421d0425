use super::{ComplexField, FieldError, GridSpec};
use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};
use std::cell::RefCell;
use std::sync::Arc;

/// Largest fraction of spectral power allowed outside the sampled band.
pub const MAX_LOST_FRACTION: f64 = 1e-9;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(n: usize, dir: FftDirection) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft(n, dir))
}

fn transpose(data: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            data.swap(i * n + j, j * n + i);
        }
    }
}

/// Transform every row, transpose, transform again. The result is indexed
/// `[fx][fy]` for a forward transform of `[y][x]` data.
fn fft2(data: &mut [Complex64], n: usize, dir: FftDirection) {
    let f = plan(n, dir);
    f.process(data);
    transpose(data, n);
    f.process(data);
}

fn freq(k: usize, n: usize, pitch: f64) -> f64 {
    let k = if k < n / 2 { k as f64 } else { k as f64 - n as f64 };
    k / (n as f64 * pitch)
}

/// Forward spectrum of a field, kept so that several distances can be
/// evaluated from a single transform.
#[derive(Debug, Clone)]
pub struct AngularSpectrum {
    grid: GridSpec,
    spectrum: Vec<Complex64>,
    total: f64,
}

impl AngularSpectrum {
    pub fn new(field: &ComplexField) -> Result<Self, FieldError> {
        let n = field.grid.n;
        let mut spectrum = field.values.clone();
        fft2(&mut spectrum, n, FftDirection::Forward);
        let total: f64 = spectrum.iter().map(|v| v.norm_sqr()).sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(FieldError::ZeroPower);
        }
        Ok(Self {
            grid: field.grid,
            spectrum,
            total,
        })
    }

    /// Half-width of the band in which the sampled transfer function is
    /// free of phase aliasing at distance `z`.
    pub fn band_limit(&self, z: f64) -> f64 {
        let g = &self.grid;
        let df = 1.0 / g.window();
        1.0 / (g.wavelength * ((2.0 * df * z).powi(2) + 1.0).sqrt())
    }

    /// Spectral power fraction outside the band at distance `z`.
    pub fn lost_fraction(&self, z: f64) -> f64 {
        let g = &self.grid;
        let n = g.n;
        let lim = self.band_limit(z);
        let inv_l2 = 1.0 / (g.wavelength * g.wavelength);
        let mut lost = 0.0;
        for u in 0..n {
            let fx = freq(u, n, g.pitch);
            for v in 0..n {
                let fy = freq(v, n, g.pitch);
                if fx.abs() > lim || fy.abs() > lim || fx * fx + fy * fy >= inv_l2 {
                    lost += self.spectrum[u * n + v].norm_sqr();
                }
            }
        }
        lost / self.total
    }

    /// Field at distance `z`, up to the constant phase `e^{ikz}`.
    pub fn propagate(&self, z: f64) -> Result<ComplexField, FieldError> {
        let g = self.grid;
        let n = g.n;
        if z == 0.0 {
            let mut values = self.spectrum.clone();
            inverse(&mut values, n);
            return Ok(ComplexField { grid: g, values });
        }
        let lost = self.lost_fraction(z);
        if lost > MAX_LOST_FRACTION {
            return Err(FieldError::AliasingRisk {
                lost_fraction: lost,
                distance: z,
            });
        }
        let lim = self.band_limit(z);
        let inv_l = 1.0 / g.wavelength;
        let two_pi_z = 2.0 * std::f64::consts::PI * z;
        let mut values = self.spectrum.clone();
        for u in 0..n {
            let fx = freq(u, n, g.pitch);
            for v in 0..n {
                let fy = freq(v, n, g.pitch);
                let f2 = fx * fx + fy * fy;
                let idx = u * n + v;
                if fx.abs() > lim || fy.abs() > lim || f2 >= inv_l * inv_l {
                    values[idx] = Complex64::new(0.0, 0.0);
                    continue;
                }
                // kz − k written to avoid cancellation
                let dk = -f2 / ((inv_l * inv_l - f2).sqrt() + inv_l);
                values[idx] *= Complex64::from_polar(1.0, two_pi_z * dk);
            }
        }
        inverse(&mut values, n);
        Ok(ComplexField { grid: g, values })
    }
}

fn inverse(values: &mut [Complex64], n: usize) {
    fft2(values, n, FftDirection::Inverse);
    let s = 1.0 / (n * n) as f64;
    values.iter_mut().for_each(|v| *v *= s);
}

/// Band-limited angular-spectrum propagation over `z` metres.
pub fn propagate(field: &ComplexField, z: f64) -> Result<ComplexField, FieldError> {
    AngularSpectrum::new(field)?.propagate(z)
}
