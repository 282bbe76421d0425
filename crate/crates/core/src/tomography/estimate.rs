use super::loci::{closest_approach, intersect_loci, measurement_locus, overlap_midpoint};
use super::{HalfGreatCircle, MeasurementKind, TomographyError};
use crate::analysis::{ImageReading, PixelPoint};
use crate::state::{
    angle_diff, bloch_to_state, fidelity_bloch, spherical_distance, PoincareState, UnitVector3,
};
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;

pub const VISIBILITY_THRESHOLD: f64 = 0.34;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    BlindSpot,
    NarrowTriangle,
    Centroid,
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Branch::BlindSpot => "blind_spot",
            Branch::NarrowTriangle => "narrow_triangle",
            Branch::Centroid => "centroid",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimateOptions {
    /// Readings with `v ≤ visibility_threshold` are discarded.
    pub visibility_threshold: f64,
    /// Half-arc membership tolerance, radians.
    pub membership_tol: f64,
    /// Per-reading orientation uncertainty used for blind-spot error bars.
    pub alpha_tolerance: f64,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        Self::noiseless()
    }
}

impl EstimateOptions {
    pub fn noiseless() -> Self {
        Self {
            visibility_threshold: VISIBILITY_THRESHOLD,
            membership_tol: 1e-6,
            alpha_tolerance: 0.5f64.to_radians(),
        }
    }

    pub fn noisy() -> Self {
        Self {
            visibility_threshold: VISIBILITY_THRESHOLD,
            membership_tol: 2f64.to_radians(),
            alpha_tolerance: 2f64.to_radians(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TriangleEstimate {
    pub vertices: [UnitVector3; 3],
    pub branch: Branch,
    pub estimate: UnitVector3,
    pub state: PoincareState,
    pub err_theta: f64,
    /// `None` when the estimate sits inside a z cap, where φ is ill-defined.
    pub err_phi: Option<f64>,
    pub fidelity_vs_target: Option<f64>,
    /// Largest change of the target fidelity over the spread points.
    pub d_fidelity: Option<f64>,
    /// A closest-approach or overlap substitute replaced at least one intersection.
    pub fallback: bool,
    /// Index of the reading removed by the visibility gate.
    pub gated: Option<usize>,
}

/// Polar cap where `v = sin θ` stays at or below the threshold:
/// `(θ_cap, 2π(1 − cos θ_cap))`.
pub fn visibility_threshold_cap() -> (f64, f64) {
    cap_for(VISIBILITY_THRESHOLD)
}

pub fn cap_for(threshold: f64) -> (f64, f64) {
    let theta = threshold.clamp(0.0, 1.0).asin();
    (theta, 2.0 * PI * (1.0 - theta.cos()))
}

/// Noiseless reading of `s` under `kind`, straight from the sphere geometry.
pub fn exact_reading(kind: MeasurementKind, s: &PoincareState) -> ImageReading {
    let r = kind.rotate(&s.to_bloch());
    let alpha = (r.longitude() / 2.0).rem_euclid(PI);
    let v = r.x().hypot(r.y()).min(1.0);
    ImageReading {
        alpha,
        visibility: v,
        eta_min: (alpha + FRAC_PI_2).rem_euclid(PI),
        com: PixelPoint { col: 0.0, row: 0.0 },
        low_visibility: v < VISIBILITY_THRESHOLD,
    }
}

enum Meet {
    Point(UnitVector3, bool),
    Coplanar,
}

fn meet(a: &HalfGreatCircle, b: &HalfGreatCircle, tol: f64) -> Meet {
    match intersect_loci(a, b, tol) {
        Ok(p) => Meet::Point(p, false),
        Err(TomographyError::NoIntersection) => Meet::Point(closest_approach(a, b), true),
        Err(_) => Meet::Coplanar,
    }
}

fn midpoint(a: &UnitVector3, b: &UnitVector3) -> UnitVector3 {
    UnitVector3::new(a.x() + b.x(), a.y() + b.y(), a.z() + b.z()).unwrap_or(*a)
}

fn in_z_cap(n: &UnitVector3, cap: f64) -> bool {
    n.z().abs() >= cap.cos()
}

/// Method II estimate from the three standard readings.
pub fn estimate_state(
    readings: &[(MeasurementKind, ImageReading); 3],
    target: Option<&PoincareState>,
    opts: &EstimateOptions,
) -> Result<TriangleEstimate, TomographyError> {
    for i in 0..3 {
        for j in (i + 1)..3 {
            if readings[i].0.same_as(&readings[j].0) {
                return Err(TomographyError::InvalidReadings(
                    "the three readings must come from distinct measurements".into(),
                ));
            }
        }
    }
    if readings
        .iter()
        .any(|(_, r)| !(r.alpha.is_finite() && r.visibility.is_finite()))
    {
        return Err(TomographyError::InvalidReadings("non-finite reading".into()));
    }
    let tol = opts.membership_tol;
    let loci: Vec<HalfGreatCircle> = readings
        .iter()
        .map(|(k, r)| measurement_locus(*k, r.alpha))
        .collect();
    let gated: Vec<usize> = (0..3)
        .filter(|&i| readings[i].1.visibility <= opts.visibility_threshold)
        .collect();
    if gated.len() >= 2 {
        return Err(TomographyError::TooManyBlind {
            dropped: gated.len(),
        });
    }

    let (branch, estimate, vertices, spread, fallback) = if let Some(&g) = gated.first() {
        let keep: Vec<usize> = (0..3).filter(|&i| i != g).collect();
        let (a, b) = (loci[keep[0]], loci[keep[1]]);
        let (p, fb) = match meet(&a, &b, tol) {
            Meet::Point(p, fb) => (p, fb),
            Meet::Coplanar => (overlap_midpoint(&a, &b), true),
        };
        let mut spread = vec![p];
        for (idx, which) in [(keep[0], 0), (keep[1], 1)] {
            for sign in [-1.0, 1.0] {
                let (k, r) = readings[idx];
                let moved = measurement_locus(k, r.alpha + sign * opts.alpha_tolerance);
                let pair = if which == 0 { (moved, b) } else { (a, moved) };
                if let Meet::Point(q, _) = meet(&pair.0, &pair.1, tol) {
                    spread.push(q);
                }
            }
        }
        (Branch::BlindSpot, p, [p, p, p], spread, fb)
    } else {
        let pairs = [(0, 1), (1, 2), (2, 0)];
        let meets: Vec<Meet> = pairs
            .iter()
            .map(|&(i, j)| meet(&loci[i], &loci[j], tol))
            .collect();
        let coplanar: Vec<usize> = (0..3)
            .filter(|&i| matches!(meets[i], Meet::Coplanar))
            .collect();
        let mut fb = meets.iter().any(|m| matches!(m, Meet::Point(_, true)));
        match coplanar.len() {
            0 => {
                let v: Vec<UnitVector3> = meets
                    .iter()
                    .map(|m| match m {
                        Meet::Point(p, _) => *p,
                        Meet::Coplanar => unreachable!(),
                    })
                    .collect();
                let vertices = [v[0], v[1], v[2]];
                let mut sides: Vec<(f64, usize)> = (0..3)
                    .map(|i| (spherical_distance(&v[i], &v[(i + 1) % 3]), i))
                    .collect();
                sides.sort_by(|x, y| x.0.total_cmp(&y.0));
                let centroid = || UnitVector3::mean_direction(&v).unwrap_or(v[0]);
                // vertices closer than the reading tolerance are indistinguishable
                if sides[2].0 < opts.alpha_tolerance.max(1e-9) {
                    (Branch::Centroid, centroid(), vertices, v, fb)
                } else if sides[0].0 < 0.5 * sides[1].0 {
                    // the far vertex comes from a grazing intersection; the
                    // estimate and its spread live on the shortest side
                    let i = sides[0].1;
                    let (a, b) = (v[i], v[(i + 1) % 3]);
                    (Branch::NarrowTriangle, midpoint(&a, &b), vertices, vec![a, b], fb)
                } else {
                    (Branch::Centroid, centroid(), vertices, v, fb)
                }
            }
            1 => {
                let c = coplanar[0];
                let point = |k: usize| match meets[k] {
                    Meet::Point(p, _) => p,
                    Meet::Coplanar => unreachable!(),
                };
                let (g0, g1) = ((c + 1) % 3, (c + 2) % 3);
                let est = midpoint(&point(g0), &point(g1));
                let (i, j) = pairs[c];
                let third = loci[i].project(&loci[j].project(&est));
                let mut vertices = [third; 3];
                vertices[g0] = point(g0);
                vertices[g1] = point(g1);
                (
                    Branch::NarrowTriangle,
                    est,
                    vertices,
                    vec![point(g0), point(g1)],
                    fb,
                )
            }
            _ => {
                let (i, j) = pairs[coplanar[0]];
                let p = overlap_midpoint(&loci[i], &loci[j]);
                fb = true;
                (Branch::NarrowTriangle, p, [p, p, p], vec![p], fb)
            }
        }
    };

    let state = bloch_to_state(&estimate);
    let (cap, _) = cap_for(opts.visibility_threshold);
    let err_theta = spread
        .iter()
        .map(|p| (bloch_to_state(p).theta() - state.theta()).abs())
        .fold(0.0, f64::max);
    let err_phi = if in_z_cap(&estimate, cap) {
        None
    } else {
        Some(
            spread
                .iter()
                .map(|p| angle_diff(bloch_to_state(p).phi(), state.phi()).abs())
                .fold(0.0, f64::max),
        )
    };
    let (fidelity_vs_target, d_fidelity) = match target {
        Some(t) => {
            let tn = t.to_bloch();
            let f = fidelity_bloch(&tn, &estimate);
            let d = spread
                .iter()
                .map(|p| (fidelity_bloch(&tn, p) - f).abs())
                .fold(0.0, f64::max);
            (Some(f), Some(d))
        }
        None => (None, None),
    };
    Ok(TriangleEstimate {
        vertices,
        branch,
        estimate,
        state,
        err_theta,
        err_phi,
        fidelity_vs_target,
        d_fidelity,
        fallback,
        gated: gated.first().copied(),
    })
}
