use super::{FieldError, GridSpec};
use crate::state::PoincareState;
use num_complex::Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Charge {
    Plus,
    Minus,
}

impl Charge {
    pub fn sign(self) -> f64 {
        match self {
            Charge::Plus => 1.0,
            Charge::Minus => -1.0,
        }
    }
}

/// Complex transverse field sampled on a [`GridSpec`], row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    pub grid: GridSpec,
    pub values: Vec<Complex64>,
}

impl ComplexField {
    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            grid,
            values: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn(f64, f64) -> Complex64) -> Self {
        let n = grid.n;
        let mut values = Vec::with_capacity(n * n);
        for row in 0..n {
            let y = grid.y(row);
            for col in 0..n {
                values.push(f(grid.x(col), y));
            }
        }
        Self { grid, values }
    }

    /// `∫|E|² dA` on the grid.
    pub fn power(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.pitch * self.grid.pitch
    }

    pub fn normalized(mut self) -> Result<Self, FieldError> {
        let p = self.power();
        if !(p > 0.0 && p.is_finite()) {
            return Err(FieldError::ZeroPower);
        }
        let s = 1.0 / p.sqrt();
        self.values.iter_mut().for_each(|v| *v *= s);
        Ok(self)
    }

    /// `∫ conj(a)·b dA`.
    pub fn overlap(&self, other: &ComplexField) -> Complex64 {
        let acc: Complex64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.conj() * b)
            .sum();
        acc * self.grid.pitch * self.grid.pitch
    }

    /// Pointwise product, used for applying thin masks.
    pub fn multiply(&self, mask: &ComplexField) -> ComplexField {
        ComplexField {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&mask.values)
                .map(|(a, b)| a * b)
                .collect(),
        }
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: Complex64, other: &ComplexField, b: Complex64) -> ComplexField {
        ComplexField {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(u, v)| a * u + b * v)
                .collect(),
        }
    }

    /// Central `m × m` window. The crop keeps the pitch and re-centres so
    /// that the optical axis stays at pixel `(m/2, m/2)`.
    pub fn crop_center(&self, m: usize, grid: GridSpec) -> ComplexField {
        let n = self.grid.n;
        let off = n / 2 - m / 2;
        let mut values = Vec::with_capacity(m * m);
        for row in 0..m {
            let start = (row + off) * n + off;
            values.extend_from_slice(&self.values[start..start + m]);
        }
        ComplexField { grid, values }
    }
}

/// Non-negative intensity samples on a grid, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityImage {
    pub grid: GridSpec,
    pub pixels: Vec<f64>,
}

impl IntensityImage {
    pub fn new(grid: GridSpec, pixels: Vec<f64>) -> Result<Self, FieldError> {
        if pixels.len() != grid.len() {
            return Err(FieldError::InvalidImage(format!(
                "expected {} pixels, got {}",
                grid.len(),
                pixels.len()
            )));
        }
        if let Some(p) = pixels.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
            return Err(FieldError::InvalidImage(format!(
                "pixel value {p} is not a non-negative number"
            )));
        }
        Ok(Self { grid, pixels })
    }

    pub fn n(&self) -> usize {
        self.grid.n
    }

    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * self.grid.n + col]
    }

    pub fn peak(&self) -> f64 {
        self.pixels.iter().cloned().fold(0.0, f64::max)
    }

    pub fn total_power(&self) -> f64 {
        self.pixels.iter().sum::<f64>() * self.grid.pitch * self.grid.pitch
    }

    pub fn has_signal(&self) -> bool {
        self.pixels.iter().any(|&p| p > 0.0)
    }
}

/// Unit-power `LG_{0,±1}` at the waist: `(x ± iy)/w0 · exp(−r²/w0²)`.
pub fn lg_field(grid: &GridSpec, charge: Charge) -> ComplexField {
    let w = grid.waist;
    let s = charge.sign();
    ComplexField::from_fn(*grid, |x, y| {
        let g = (-(x * x + y * y) / (w * w)).exp();
        Complex64::new(x / w, s * y / w) * g
    })
    .normalized()
    .expect("LG mode has power on a valid grid")
}

/// Unit-power first-order HG mode with its lobe axis at angle `alpha` from `+x`.
pub fn hg_field(grid: &GridSpec, alpha: f64) -> ComplexField {
    let w = grid.waist;
    let (sa, ca) = alpha.sin_cos();
    ComplexField::from_fn(*grid, |x, y| {
        let g = (-(x * x + y * y) / (w * w)).exp();
        Complex64::new((x * ca + y * sa) / w * g, 0.0)
    })
    .normalized()
    .expect("HG mode has power on a valid grid")
}

/// Both unit-power LG modes for one grid, reused across superpositions.
#[derive(Debug, Clone)]
pub struct LgBasis {
    pub plus: ComplexField,
    pub minus: ComplexField,
}

impl LgBasis {
    pub fn new(grid: &GridSpec) -> Self {
        Self {
            plus: lg_field(grid, Charge::Plus),
            minus: lg_field(grid, Charge::Minus),
        }
    }

    pub fn superpose(&self, state: &PoincareState) -> ComplexField {
        let a = state.amplitudes();
        self.plus
            .combine(a.c_plus(), &self.minus, a.c_minus())
            .normalized()
            .expect("orthonormal basis keeps unit power")
    }
}

/// `cos(θ/2)·LG+ + e^{iφ} sin(θ/2)·LG−`, unit power.
pub fn superpose(grid: &GridSpec, state: &PoincareState) -> ComplexField {
    LgBasis::new(grid).superpose(state)
}

/// `|E|²` per pixel.
pub fn intensity(field: &ComplexField) -> IntensityImage {
    IntensityImage {
        grid: field.grid,
        pixels: field.values.iter().map(|v| v.norm_sqr()).collect(),
    }
}
