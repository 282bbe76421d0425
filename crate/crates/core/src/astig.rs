//! Astigmatic mode conversion on the Poincaré sphere.
//!
//! A converter whose eigenmodes are the HG modes at `β/2` and `(β+π)/2`
//! retards the second by π/2. In the matrix picture this is
//! [`mc_unitary`]; on the sphere it is a −π/2 rotation about the equatorial
//! axis `(cos β, sin β, 0)` ([`bloch_rotate`]). Throughout, `β` is the
//! Poincaré-frame angle; the physical converter axis sits at `β/2`.

use crate::state::{
    amplitudes, bloch_to_state, wrap_pi, wrap_two_pi, PoincareState, StateVector2, UnitVector3,
};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4, PI};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AstigError {
    /// At the poles every converter orientation yields an HG mode.
    #[error("state is at a pole: any converter angle satisfies the equal-modulus condition")]
    PoleDegenerate,
    #[error("reading ({beta_mc} rad, {alpha_hg} rad) admits no state on either branch")]
    NoValidBranch { beta_mc: f64, alpha_hg: f64 },
}

/// Dense 2×2 complex matrix, row major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexMatrix2 {
    pub m: [[Complex64; 2]; 2],
}

impl ComplexMatrix2 {
    pub fn new(m11: Complex64, m12: Complex64, m21: Complex64, m22: Complex64) -> Self {
        Self {
            m: [[m11, m12], [m21, m22]],
        }
    }

    pub fn identity() -> Self {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        Self::new(one, zero, zero, one)
    }

    pub fn apply(&self, v: [Complex64; 2]) -> [Complex64; 2] {
        [
            self.m[0][0] * v[0] + self.m[0][1] * v[1],
            self.m[1][0] * v[0] + self.m[1][1] * v[1],
        ]
    }

    pub fn mul(&self, o: &ComplexMatrix2) -> ComplexMatrix2 {
        let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = self.m[i][0] * o.m[0][j] + self.m[i][1] * o.m[1][j];
            }
        }
        ComplexMatrix2 { m: out }
    }

    pub fn adjoint(&self) -> ComplexMatrix2 {
        ComplexMatrix2::new(
            self.m[0][0].conj(),
            self.m[1][0].conj(),
            self.m[0][1].conj(),
            self.m[1][1].conj(),
        )
    }

    pub fn det(&self) -> Complex64 {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    /// Largest entry-wise deviation of `M†M` from the identity.
    pub fn unitarity_error(&self) -> f64 {
        let p = self.adjoint().mul(self);
        let id = ComplexMatrix2::identity();
        let mut worst: f64 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                worst = worst.max((p.m[i][j] - id.m[i][j]).norm());
            }
        }
        worst
    }
}

/// `MC(β) = (e^{iπ/4}/√2) [[1, i e^{−iβ}], [i e^{iβ}, 1]]`.
pub fn mc_unitary(beta: f64) -> ComplexMatrix2 {
    let pre = Complex64::from_polar(FRAC_1_SQRT_2, FRAC_PI_4);
    let i = Complex64::i();
    ComplexMatrix2::new(
        pre,
        pre * i * Complex64::from_polar(1.0, -beta),
        pre * i * Complex64::from_polar(1.0, beta),
        pre,
    )
}

/// Image of `s` under the converter at Poincaré angle `beta`, global phase stripped.
pub fn apply_mc(s: &PoincareState, beta: f64) -> PoincareState {
    let a = amplitudes(s);
    let out = mc_unitary(beta).apply([a.c_plus(), a.c_minus()]);
    StateVector2::new(out[0], out[1])
        .expect("unitary image of a normalized state")
        .to_state()
}

/// Right-handed rotation of `v` by `angle` about the unit `axis` (Rodrigues).
pub fn rotate_about(v: &UnitVector3, axis: [f64; 3], angle: f64) -> UnitVector3 {
    let (s, c) = angle.sin_cos();
    let [ux, uy, uz] = axis;
    let [x, y, z] = v.to_array();
    let cross = [uy * z - uz * y, uz * x - ux * z, ux * y - uy * x];
    let dot = ux * x + uy * y + uz * z;
    UnitVector3::new(
        x * c + cross[0] * s + ux * dot * (1.0 - c),
        y * c + cross[1] * s + uy * dot * (1.0 - c),
        z * c + cross[2] * s + uz * dot * (1.0 - c),
    )
    .expect("rotation preserves the norm")
}

/// Equatorial converter axis `(cos β, sin β, 0)`.
pub fn converter_axis(beta: f64) -> [f64; 3] {
    [beta.cos(), beta.sin(), 0.0]
}

/// The converter as a sphere rotation: −π/2 about `(cos β, sin β, 0)`.
/// Pinned so that the north pole maps to `+y` at `β = 0`, matching [`apply_mc`].
pub fn bloch_rotate(n: &UnitVector3, beta: f64) -> UnitVector3 {
    rotate_about(n, converter_axis(beta), -FRAC_PI_2)
}

/// Inverse of [`bloch_rotate`].
pub fn bloch_rotate_inv(n: &UnitVector3, beta: f64) -> UnitVector3 {
    rotate_about(n, converter_axis(beta), FRAC_PI_2)
}

/// Converter angle and resulting HG lobe orientation at the equal-modulus setting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Method1Reading {
    /// Poincaré-frame converter angle in `[0, 2π)`; the lens axis is at half of it.
    pub beta_mc: f64,
    /// HG lobe-axis orientation w.r.t. the horizontal, in `[0, π)`.
    pub alpha_hg: f64,
}

impl Method1Reading {
    pub fn new(beta_mc: f64, alpha_hg: f64) -> Self {
        Self {
            beta_mc: wrap_two_pi(beta_mc),
            alpha_hg: wrap_pi(alpha_hg),
        }
    }
}

/// Forward model of the visibility-maximization method on the `β = φ` branch:
/// `β_MC = φ`, `α_HG = (φ − θ)/2 + π/4 (mod π)`.
pub fn method1_predict(s: &PoincareState) -> Result<Method1Reading, AstigError> {
    if s.theta() < 1e-9 || s.theta() > PI - 1e-9 {
        return Err(AstigError::PoleDegenerate);
    }
    Ok(Method1Reading::new(
        s.phi(),
        (s.phi() - s.theta()) / 2.0 + FRAC_PI_4,
    ))
}

/// Inverts a reading. The primary branch gives `θ = β − 2α + π/2 (mod 2π)`;
/// when that falls outside `[0, π]` the reading came from the `β = φ + π`
/// setting, which yields `θ = 2π − θ_red` and `φ = β − π`.
pub fn method1_invert(r: &Method1Reading) -> Result<PoincareState, AstigError> {
    let bad = AstigError::NoValidBranch {
        beta_mc: r.beta_mc,
        alpha_hg: r.alpha_hg,
    };
    if !(r.beta_mc.is_finite() && r.alpha_hg.is_finite()) {
        return Err(bad);
    }
    let reduced = wrap_two_pi(r.beta_mc - 2.0 * r.alpha_hg + FRAC_PI_2);
    let (theta, phi) = if reduced <= PI {
        (reduced, r.beta_mc)
    } else {
        (2.0 * PI - reduced, r.beta_mc + PI)
    };
    PoincareState::new(theta, phi).map_err(|_| bad)
}

/// Signed modulus imbalance `|row₁|² − |row₂|²` of `MC(β)|θ,φ⟩`, which equals
/// the z component of the rotated Bloch vector.
pub fn equal_modulus_signed(s: &PoincareState, beta: f64) -> f64 {
    let a = amplitudes(s);
    let out = mc_unitary(beta).apply([a.c_plus(), a.c_minus()]);
    out[0].norm_sqr() - out[1].norm_sqr()
}

/// `| |row₁|² − |row₂|² |`, zero iff `β ≡ φ (mod π)` or the state is a pole.
pub fn equal_modulus_residual(s: &PoincareState, beta: f64) -> f64 {
    equal_modulus_signed(s, beta).abs()
}

/// Closed form of [`equal_modulus_residual`]: `sin θ |sin(φ − β)|`.
pub fn equal_modulus_closed_form(s: &PoincareState, beta: f64) -> f64 {
    (s.theta().sin() * (s.phi() - beta).sin()).abs()
}

/// Bloch z of the converted state (convenience for `bloch_to_state`).
pub fn converted_bloch(s: &PoincareState, beta: f64) -> UnitVector3 {
    bloch_rotate(&s.to_bloch(), beta)
}

/// State after the converter, via the rotation picture.
pub fn apply_rotation(s: &PoincareState, beta: f64) -> PoincareState {
    bloch_to_state(&converted_bloch(s, beta))
}
