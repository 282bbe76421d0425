use super::{MeasurementKind, TomographyError};
use crate::state::{angle_diff, spherical_distance, wrap_two_pi, UnitVector3};
use std::f64::consts::PI;

fn unit(v: [f64; 3]) -> Option<UnitVector3> {
    UnitVector3::from_array(v).ok()
}

fn add(a: &UnitVector3, b: &UnitVector3, s: f64, t: f64) -> [f64; 3] {
    [
        s * a.x() + t * b.x(),
        s * a.y() + t * b.y(),
        s * a.z() + t * b.z(),
    ]
}

/// Points whose rotated longitude equals `longitude`. The arc runs from
/// `pole = R⁻¹(+z)` through `mid = R⁻¹(cos λ, sin λ, 0)` to `−pole`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfGreatCircle {
    pub kind: MeasurementKind,
    pub longitude: f64,
    pub pole: UnitVector3,
    pub mid: UnitVector3,
    /// Unit normal `pole × mid` of the containing plane.
    pub normal: UnitVector3,
}

impl HalfGreatCircle {
    /// Longitude test in the rotated frame; points within 1e-9 of the
    /// endpoints are excluded since their longitude is undefined.
    pub fn contains(&self, n: &UnitVector3, tol: f64) -> bool {
        let r = self.kind.rotate(n);
        if r.x().hypot(r.y()) < 1e-9 {
            return false;
        }
        angle_diff(r.longitude(), self.longitude).abs() < tol
    }

    /// `pole·cos t + mid·sin t`, `t ∈ [0, π]`.
    pub fn point_at(&self, t: f64) -> UnitVector3 {
        let (s, c) = t.sin_cos();
        unit(add(&self.pole, &self.mid, c, s)).expect("orthonormal frame")
    }

    /// Closest point of the arc to `n`.
    pub fn project(&self, n: &UnitVector3) -> UnitVector3 {
        let t = n.dot(&self.mid).atan2(n.dot(&self.pole));
        // a point "behind" the pole projects onto the nearer endpoint
        let t = if t < 0.0 {
            if t > -PI / 2.0 {
                0.0
            } else {
                PI
            }
        } else {
            t
        };
        self.point_at(t)
    }

    pub fn distance_to(&self, n: &UnitVector3) -> f64 {
        spherical_distance(n, &self.project(n))
    }

    fn on_arc(&self, p: &UnitVector3, tol: f64) -> bool {
        p.dot(&self.mid) > -tol.sin()
    }
}

pub fn measurement_locus(kind: MeasurementKind, alpha: f64) -> HalfGreatCircle {
    let longitude = wrap_two_pi(2.0 * alpha);
    let pole = kind.rotate_inv(&UnitVector3::Z);
    let (s, c) = longitude.sin_cos();
    let mid = kind.rotate_inv(&UnitVector3::new(c, s, 0.0).expect("unit"));
    let normal = unit(pole.cross(&mid)).expect("pole ⟂ mid");
    HalfGreatCircle {
        kind,
        longitude,
        pole,
        mid,
        normal,
    }
}

/// Point common to both half-arcs.
///
/// Fails with `DegenerateOverlap` for loci of the same kind, for coplanar
/// arcs, and when both antipodal candidates pass the arc test; with
/// `NoIntersection` when neither does.
pub fn intersect_loci(
    a: &HalfGreatCircle,
    b: &HalfGreatCircle,
    tol: f64,
) -> Result<UnitVector3, TomographyError> {
    if a.kind.same_as(&b.kind) {
        return Err(TomographyError::DegenerateOverlap);
    }
    let c = a.normal.cross(&b.normal);
    let len = c[0].hypot(c[1]).hypot(c[2]);
    if len < tol.sin().max(1e-12) {
        return Err(TomographyError::DegenerateOverlap);
    }
    let c = unit(c).expect("non-zero");
    let ok = |p: &UnitVector3| a.on_arc(p, tol) && b.on_arc(p, tol);
    match (ok(&c), ok(&c.neg())) {
        (true, true) => Err(TomographyError::DegenerateOverlap),
        (true, false) => Ok(c),
        (false, true) => Ok(c.neg()),
        (false, false) => Err(TomographyError::NoIntersection),
    }
}

/// Midpoint of the shortest geodesic joining the two arcs.
pub fn closest_approach(a: &HalfGreatCircle, b: &HalfGreatCircle) -> UnitVector3 {
    let mut pairs = Vec::with_capacity(4);
    for e in [a.pole, a.pole.neg()] {
        pairs.push((e, b.project(&e)));
    }
    for e in [b.pole, b.pole.neg()] {
        pairs.push((a.project(&e), e));
    }
    let (p, q) = pairs
        .into_iter()
        .min_by(|x, y| spherical_distance(&x.0, &x.1).total_cmp(&spherical_distance(&y.0, &y.1)))
        .expect("four candidates");
    unit(add(&p, &q, 1.0, 1.0)).unwrap_or(p)
}

/// Centre of the common stretch of two coplanar arcs.
pub(crate) fn overlap_midpoint(a: &HalfGreatCircle, b: &HalfGreatCircle) -> UnitVector3 {
    // angle of b's midpoint within a's (pole, mid) frame, measured from mid
    let gamma = angle_diff(
        b.mid.dot(&a.mid).atan2(b.mid.dot(&a.pole)),
        PI / 2.0,
    );
    a.point_at(PI / 2.0 + gamma / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::astig::bloch_rotate;
    use crate::state::PoincareState;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    fn v(x: f64, y: f64, z: f64) -> UnitVector3 {
        UnitVector3::new(x, y, z).unwrap()
    }

    fn conv(beta: f64) -> MeasurementKind {
        MeasurementKind::Converter { beta }
    }

    /// Exact reading of `n` under `kind`: half the rotated longitude.
    fn alpha_of(kind: MeasurementKind, n: &UnitVector3) -> f64 {
        kind.rotate(n).longitude() / 2.0
    }

    #[test]
    fn direct_zero_is_the_phi0_meridian() {
        let l = measurement_locus(MeasurementKind::Direct, 0.0);
        assert!(l.contains(&v(1.0, 0.0, 0.0), 1e-6));
        assert!(!l.contains(&v(-1.0, 0.0, 0.0), 1e-6));
        assert!(l.contains(&v(1.0, 0.0, 2.0), 1e-6));
        assert!(!l.contains(&UnitVector3::Z, 1e-6));
    }

    #[test]
    fn converter0_loci_end_at_y_poles() {
        for k in 0..12 {
            let l = measurement_locus(conv(0.0), k as f64 * PI / 12.0);
            assert!(spherical_distance(&l.pole, &v(0.0, -1.0, 0.0)) < 1e-12);
            // brute force: points on the arc approach ±y at its ends
            assert!(spherical_distance(&l.point_at(0.0), &v(0.0, -1.0, 0.0)) < 1e-12);
            assert!(spherical_distance(&l.point_at(PI), &v(0.0, 1.0, 0.0)) < 1e-12);
            assert!(l.contains(&l.point_at(0.7), 1e-9));
        }
    }

    #[test]
    fn constructed_intersection() {
        let d = measurement_locus(MeasurementKind::Direct, 0.0);
        let c = measurement_locus(conv(0.0), alpha_of(conv(0.0), &UnitVector3::X));
        let p = intersect_loci(&d, &c, 1e-6).unwrap();
        assert!(spherical_distance(&p, &UnitVector3::X) < 1e-12);
        // mesh check: the only mesh point on both arcs is near (1, 0, 0)
        let step = 0.1f64.to_radians();
        let mut best = (f64::INFINITY, UnitVector3::Z);
        for i in 0..=1800 {
            let pt = d.point_at(i as f64 * step);
            let dist = c.distance_to(&pt);
            if dist < best.0 {
                best = (dist, pt);
            }
        }
        assert!(spherical_distance(&best.1, &UnitVector3::X) < step);
    }

    #[test]
    fn same_kind_is_rejected() {
        let a = measurement_locus(MeasurementKind::Direct, 0.1);
        let b = measurement_locus(MeasurementKind::Direct, 0.9);
        assert_eq!(intersect_loci(&a, &b, 1e-6), Err(TomographyError::DegenerateOverlap));
    }

    #[test]
    fn coplanar_pair_is_degenerate_and_overlap_midpoint_lies_on_both() {
        // state on the yz great circle: direct and converter-0 loci share a plane
        let n = v(0.0, 0.6, 0.8);
        let a = measurement_locus(MeasurementKind::Direct, alpha_of(MeasurementKind::Direct, &n));
        let b = measurement_locus(conv(0.0), alpha_of(conv(0.0), &n));
        assert_eq!(intersect_loci(&a, &b, 1e-6), Err(TomographyError::DegenerateOverlap));
        let m = overlap_midpoint(&a, &b);
        assert!(a.distance_to(&m) < 1e-12 && b.distance_to(&m) < 1e-12);
        assert!(a.distance_to(&n) < 1e-12 && b.distance_to(&n) < 1e-12);
    }

    #[test]
    fn near_miss_has_closest_approach() {
        let d = measurement_locus(MeasurementKind::Direct, 0.0);
        // the converter-0 locus through −x is the x ≤ 0 half of the xy plane
        let c = measurement_locus(conv(0.0), alpha_of(conv(0.0), &v(-1.0, 0.0, 0.0)));
        assert_eq!(intersect_loci(&d, &c, 1e-6), Err(TomographyError::NoIntersection));
        let m = closest_approach(&d, &c);
        let gap = d.distance_to(&m) + c.distance_to(&m);
        let best = (0..=360)
            .map(|i| c.distance_to(&d.point_at(i as f64 * PI / 360.0)))
            .fold(f64::INFINITY, f64::min);
        assert!((gap - best).abs() < 1e-2);
    }

    #[test]
    fn pole_preimages_match_rotation() {
        for beta in [0.0, FRAC_PI_2] {
            let l = measurement_locus(conv(beta), 0.3);
            let r = bloch_rotate(&l.pole, beta);
            assert!(spherical_distance(&r, &UnitVector3::Z) < 1e-12);
        }
    }

    fn generic_state() -> impl Strategy<Value = PoincareState> {
        (0.5..(PI - 0.5), 0.0..(2.0 * PI))
            .prop_map(|(t, p)| PoincareState::new(t, p).unwrap())
            .prop_filter("away from the coordinate planes", |s| {
                let n = s.to_bloch();
                n.x().abs() > 0.2 && n.y().abs() > 0.2 && n.z().abs() > 0.2
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn state_lies_on_its_loci_and_pairs_meet_there(s in generic_state()) {
            let n = s.to_bloch();
            let loci: Vec<_> = MeasurementKind::standard()
                .iter()
                .map(|k| measurement_locus(*k, alpha_of(*k, &n)))
                .collect();
            for l in &loci {
                prop_assert!(l.contains(&n, 1e-9));
            }
            for (i, j) in [(0, 1), (1, 2), (0, 2)] {
                let p = intersect_loci(&loci[i], &loci[j], 1e-6).unwrap();
                prop_assert!(spherical_distance(&p, &n) < 1e-6);
            }
        }
    }
}
