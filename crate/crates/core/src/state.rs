//! Poincaré-sphere representation of two-dimensional OAM superpositions.
//!
//! A state `cos(θ/2)|LG₊⟩ + e^{iφ} sin(θ/2)|LG₋⟩` is carried either as its
//! sphere coordinates ([`PoincareState`]), its complex amplitudes
//! ([`StateVector2`]) or its Bloch vector ([`UnitVector3`]). Angles are radians
//! internally; the serialized form uses degrees.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};
use thiserror::Error;

/// `|z|` above `1 - POLE_EPS` is treated as a pole, where φ carries no information.
pub const POLE_EPS: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StateError {
    #[error("theta = {0} rad is outside [0, π]")]
    ThetaOutOfRange(f64),
    #[error("non-finite angle or component")]
    NonFinite,
    #[error("zero-norm vector cannot be normalized")]
    ZeroNorm,
}

/// Reduce an angle to `[0, 2π)`.
pub fn wrap_two_pi(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Reduce an angle to `[0, π)`.
pub fn wrap_pi(a: f64) -> f64 {
    let r = a.rem_euclid(PI);
    if r >= PI {
        0.0
    } else {
        r
    }
}

/// Signed difference `a - b` reduced to `(-π, π]`.
pub fn angle_diff(a: f64, b: f64) -> f64 {
    let d = wrap_two_pi(a - b);
    if d > PI {
        d - TAU
    } else {
        d
    }
}

/// Signed difference of two line orientations (period π), reduced to `(-π/2, π/2]`.
pub fn axis_diff(a: f64, b: f64) -> f64 {
    let d = wrap_pi(a - b);
    if d > PI / 2.0 {
        d - PI
    } else {
        d
    }
}

/// Sphere coordinates `(θ, φ)` of a pure superposition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "StateRecord", try_from = "StateRecord")]
pub struct PoincareState {
    theta: f64,
    phi: f64,
    degenerate_phi: bool,
}

impl PoincareState {
    /// Builds a state, normalizing φ into `[0, 2π)`. θ must lie in `[0, π]`
    /// (a round-off excursion of 1e-12 is clamped).
    pub fn new(theta: f64, phi: f64) -> Result<Self, StateError> {
        if !theta.is_finite() || !phi.is_finite() {
            return Err(StateError::NonFinite);
        }
        if !(-1e-12..=PI + 1e-12).contains(&theta) {
            return Err(StateError::ThetaOutOfRange(theta));
        }
        let theta = theta.clamp(0.0, PI);
        Ok(Self {
            theta,
            phi: wrap_two_pi(phi),
            degenerate_phi: theta.cos().abs() > 1.0 - POLE_EPS,
        })
    }

    pub fn from_degrees(theta_deg: f64, phi_deg: f64) -> Result<Self, StateError> {
        Self::new(theta_deg.to_radians(), phi_deg.to_radians())
    }

    pub fn north() -> Self {
        Self::new(0.0, 0.0).expect("valid")
    }

    pub fn south() -> Self {
        Self::new(PI, 0.0).expect("valid")
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn theta_deg(&self) -> f64 {
        self.theta.to_degrees()
    }

    pub fn phi_deg(&self) -> f64 {
        self.phi.to_degrees()
    }

    /// True at the poles, where φ is reported but physically meaningless.
    pub fn degenerate_phi(&self) -> bool {
        self.degenerate_phi
    }

    pub fn to_bloch(&self) -> UnitVector3 {
        state_to_bloch(self)
    }

    pub fn amplitudes(&self) -> StateVector2 {
        amplitudes(self)
    }
}

/// Serialized form of a [`PoincareState`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateRecord {
    pub theta_deg: f64,
    pub phi_deg: f64,
    #[serde(default)]
    pub degenerate_phi: bool,
}

impl From<PoincareState> for StateRecord {
    fn from(s: PoincareState) -> Self {
        Self {
            theta_deg: s.theta_deg(),
            phi_deg: s.phi_deg(),
            degenerate_phi: s.degenerate_phi,
        }
    }
}

impl TryFrom<StateRecord> for PoincareState {
    type Error = StateError;

    fn try_from(r: StateRecord) -> Result<Self, Self::Error> {
        PoincareState::from_degrees(r.theta_deg, r.phi_deg)
    }
}

/// Unit-norm amplitude pair on the `(LG₊, LG₋)` basis with the global phase
/// fixed: `c_plus` real and non-negative, or `c_minus` real and non-negative
/// when `|c_plus|` vanishes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateVector2 {
    c_plus: Complex64,
    c_minus: Complex64,
}

impl StateVector2 {
    /// Normalizes the pair and strips the global phase.
    pub fn new(c_plus: Complex64, c_minus: Complex64) -> Result<Self, StateError> {
        if !(c_plus.is_finite() && c_minus.is_finite()) {
            return Err(StateError::NonFinite);
        }
        let norm = (c_plus.norm_sqr() + c_minus.norm_sqr()).sqrt();
        if norm == 0.0 {
            return Err(StateError::ZeroNorm);
        }
        let (p, m) = (c_plus / norm, c_minus / norm);
        let phase = if p.norm() > 1e-12 {
            Complex64::from_polar(1.0, -p.arg())
        } else {
            Complex64::from_polar(1.0, -m.arg())
        };
        let (mut p, mut m) = (p * phase, m * phase);
        if p.norm() > 1e-12 {
            p.im = 0.0;
        } else {
            m.im = 0.0;
        }
        Ok(Self {
            c_plus: p,
            c_minus: m,
        })
    }

    pub fn c_plus(&self) -> Complex64 {
        self.c_plus
    }

    pub fn c_minus(&self) -> Complex64 {
        self.c_minus
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector2) -> Complex64 {
        self.c_plus.conj() * other.c_plus + self.c_minus.conj() * other.c_minus
    }

    pub fn to_bloch(&self) -> UnitVector3 {
        let cross = self.c_plus.conj() * self.c_minus;
        UnitVector3::new(
            2.0 * cross.re,
            2.0 * cross.im,
            self.c_plus.norm_sqr() - self.c_minus.norm_sqr(),
        )
        .expect("amplitudes are normalized")
    }

    pub fn to_state(&self) -> PoincareState {
        bloch_to_state(&self.to_bloch())
    }
}

/// A point on the unit sphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitVector3 {
    x: f64,
    y: f64,
    z: f64,
}

impl UnitVector3 {
    /// Normalizes `(x, y, z)` onto the sphere.
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self, StateError> {
        let n = (x * x + y * y + z * z).sqrt();
        if !n.is_finite() {
            return Err(StateError::NonFinite);
        }
        if n < 1e-300 {
            return Err(StateError::ZeroNorm);
        }
        Ok(Self {
            x: x / n,
            y: y / n,
            z: z / n,
        })
    }

    pub fn from_array(v: [f64; 3]) -> Result<Self, StateError> {
        Self::new(v[0], v[1], v[2])
    }

    pub const X: UnitVector3 = UnitVector3 { x: 1.0, y: 0.0, z: 0.0 };
    pub const Y: UnitVector3 = UnitVector3 { x: 0.0, y: 1.0, z: 0.0 };
    pub const Z: UnitVector3 = UnitVector3 { x: 0.0, y: 0.0, z: 1.0 };

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn to_array(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn dot(&self, o: &UnitVector3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    /// Raw (unnormalized) cross product.
    pub fn cross(&self, o: &UnitVector3) -> [f64; 3] {
        [
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        ]
    }

    pub fn neg(&self) -> UnitVector3 {
        UnitVector3 {
            x: -self.x,
            y: -self.y,
            z: -self.z,
        }
    }

    /// Longitude about the z axis in `[0, 2π)`.
    pub fn longitude(&self) -> f64 {
        wrap_two_pi(self.y.atan2(self.x))
    }

    /// Normalized sum of a set of points; `None` if they cancel.
    pub fn mean_direction(points: &[UnitVector3]) -> Option<UnitVector3> {
        let s = points.iter().fold([0.0; 3], |acc, p| {
            [acc[0] + p.x, acc[1] + p.y, acc[2] + p.z]
        });
        UnitVector3::from_array(s).ok()
    }
}

/// `(sin θ cos φ, sin θ sin φ, cos θ)`.
pub fn state_to_bloch(s: &PoincareState) -> UnitVector3 {
    let (st, ct) = s.theta.sin_cos();
    let (sp, cp) = s.phi.sin_cos();
    UnitVector3 {
        x: st * cp,
        y: st * sp,
        z: ct,
    }
}

/// Inverse of [`state_to_bloch`]. At the poles φ is set to 0 and flagged.
pub fn bloch_to_state(n: &UnitVector3) -> PoincareState {
    let z = n.z.clamp(-1.0, 1.0);
    if z.abs() > 1.0 - POLE_EPS {
        let theta = if z > 0.0 { 0.0 } else { PI };
        return PoincareState {
            theta,
            phi: 0.0,
            degenerate_phi: true,
        };
    }
    // atan2 of the transverse part is better conditioned than acos near the poles.
    let theta = (n.x.hypot(n.y)).atan2(z);
    PoincareState {
        theta,
        phi: wrap_two_pi(n.y.atan2(n.x)),
        degenerate_phi: false,
    }
}

/// `(cos(θ/2), e^{iφ} sin(θ/2))`.
pub fn amplitudes(s: &PoincareState) -> StateVector2 {
    let (sh, ch) = (s.theta / 2.0).sin_cos();
    StateVector2 {
        c_plus: Complex64::new(ch, 0.0),
        c_minus: Complex64::from_polar(sh, s.phi),
    }
}

/// Squared overlap `|⟨a|b⟩|² = (1 + n_a·n_b)/2`.
pub fn fidelity(a: &PoincareState, b: &PoincareState) -> f64 {
    fidelity_bloch(&a.to_bloch(), &b.to_bloch())
}

pub fn fidelity_bloch(a: &UnitVector3, b: &UnitVector3) -> f64 {
    ((1.0 + a.dot(b)) / 2.0).clamp(0.0, 1.0)
}

/// Great-circle distance `arccos(a·b)`, evaluated as `atan2(|a×b|, a·b)`
/// so that small angles keep full precision.
pub fn spherical_distance(a: &UnitVector3, b: &UnitVector3) -> f64 {
    let c = a.cross(b);
    (c[0].hypot(c[1]).hypot(c[2])).atan2(a.dot(b))
}
