use crate::state::PoincareState;

/// Labelled target state, angles in degrees.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePoint {
    pub label: String,
    pub theta_deg: f64,
    pub phi_deg: f64,
}

impl SamplePoint {
    fn new(label: impl Into<String>, theta_deg: f64, phi_deg: f64) -> Self {
        Self {
            label: label.into(),
            theta_deg,
            phi_deg,
        }
    }

    pub fn state(&self) -> PoincareState {
        PoincareState::from_degrees(self.theta_deg, self.phi_deg).expect("sample angles in range")
    }
}

/// A–E: the φ = 0 meridian from pole to pole in 45° steps.
pub fn meridian_sequence() -> Vec<SamplePoint> {
    ["A", "B", "C", "D", "E"]
        .iter()
        .enumerate()
        .map(|(k, l)| SamplePoint::new(*l, 45.0 * k as f64, 0.0))
        .collect()
}

/// D1–D8: the θ = 135° parallel in 45° steps of φ.
pub fn parallel_sequence() -> Vec<SamplePoint> {
    (0..8)
        .map(|k| SamplePoint::new(format!("D{}", k + 1), 135.0, 45.0 * k as f64))
        .collect()
}

/// The 26 tomography targets: points 1–5 walk the φ = 0 meridian, then
/// θ ∈ {45°, 90°, 135°} for each φ from 45° to 315°.
pub fn table_targets() -> Vec<SamplePoint> {
    [0.0, 45.0, 90.0, 135.0, 180.0]
        .iter()
        .map(|&t| (t, 0.0))
        .chain((1..8).flat_map(|k| {
            let phi = 45.0 * k as f64;
            [45.0, 90.0, 135.0].map(|t| (t, phi))
        }))
        .enumerate()
        .map(|(i, (t, p))| SamplePoint::new((i + 1).to_string(), t, p))
        .collect()
}
