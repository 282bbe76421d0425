//! Lobe orientation and visibility of a two-lobe intensity pattern.
//!
//! Pipeline: floor subtraction, center of mass, line integrals through the
//! center of mass at `n_samples` angles, nodal-line angle and visibility from
//! that curve, then the axis joining the centers of mass on either side of
//! the nodal line.

use crate::field::IntensityImage;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("image has no positive intensity")]
    EmptyImage,
    #[error("invalid analysis option: {0}")]
    InvalidOption(String),
}

pub const MIN_SAMPLES: usize = 90;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalysisOptions {
    pub n_samples: usize,
    /// Readings below this visibility are flagged.
    pub visibility_threshold: f64,
    /// Quantile subtracted from every pixel before analysis.
    pub floor_quantile: f64,
    /// Half-width of the band around the nodal line excluded from both sides.
    pub exclusion_px: f64,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            n_samples: 360,
            visibility_threshold: 0.34,
            floor_quantile: 0.01,
            exclusion_px: 0.5,
        }
    }
}

impl AnalysisOptions {
    pub fn validate(&self) -> Result<(), AnalysisError> {
        if self.n_samples < MIN_SAMPLES {
            return Err(AnalysisError::InvalidOption(format!(
                "n_samples = {} is below {MIN_SAMPLES}",
                self.n_samples
            )));
        }
        if !(0.0..=1.0).contains(&self.visibility_threshold) {
            return Err(AnalysisError::InvalidOption(
                "visibility_threshold must lie in [0, 1]".into(),
            ));
        }
        if !(0.0..0.5).contains(&self.floor_quantile) {
            return Err(AnalysisError::InvalidOption(
                "floor_quantile must lie in [0, 0.5)".into(),
            ));
        }
        if !(self.exclusion_px >= 0.0) {
            return Err(AnalysisError::InvalidOption(
                "exclusion_px must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Real-valued pixel position; `col` grows rightwards, `row` downwards.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelPoint {
    pub col: f64,
    pub row: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineScanCurve {
    etas: Vec<f64>,
    sums: Vec<f64>,
}

impl LineScanCurve {
    /// Uniform sampling `η_k = kπ/n`.
    pub fn new(sums: Vec<f64>) -> Result<Self, AnalysisError> {
        let n = sums.len();
        if n < MIN_SAMPLES {
            return Err(AnalysisError::InvalidOption(format!(
                "curve has {n} samples, need at least {MIN_SAMPLES}"
            )));
        }
        if sums.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(AnalysisError::InvalidOption(
                "curve sums must be finite and non-negative".into(),
            ));
        }
        let etas = (0..n).map(|k| k as f64 * PI / n as f64).collect();
        Ok(Self { etas, sums })
    }

    pub fn etas(&self) -> &[f64] {
        &self.etas
    }

    pub fn sums(&self) -> &[f64] {
        &self.sums
    }

    pub fn len(&self) -> usize {
        self.sums.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sums.is_empty()
    }

    fn step(&self) -> f64 {
        PI / self.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "ReadingRecord", from = "ReadingRecord")]
pub struct ImageReading {
    /// Lobe axis w.r.t. `+x`, in `[0, π)`.
    pub alpha: f64,
    pub visibility: f64,
    /// Nodal-line angle in `[0, π)`.
    pub eta_min: f64,
    pub com: PixelPoint,
    pub low_visibility: bool,
}

#[derive(Serialize, Deserialize)]
struct ReadingRecord {
    alpha_deg: f64,
    visibility: f64,
    eta_min_deg: f64,
    com_px: [f64; 2],
    #[serde(default)]
    low_visibility: bool,
}

impl From<ImageReading> for ReadingRecord {
    fn from(r: ImageReading) -> Self {
        Self {
            alpha_deg: r.alpha.to_degrees(),
            visibility: r.visibility,
            eta_min_deg: r.eta_min.to_degrees(),
            com_px: [r.com.col, r.com.row],
            low_visibility: r.low_visibility,
        }
    }
}

impl From<ReadingRecord> for ImageReading {
    fn from(r: ReadingRecord) -> Self {
        Self {
            alpha: r.alpha_deg.to_radians().rem_euclid(PI),
            visibility: r.visibility,
            eta_min: r.eta_min_deg.to_radians().rem_euclid(PI),
            com: PixelPoint {
                col: r.com_px[0],
                row: r.com_px[1],
            },
            low_visibility: r.low_visibility,
        }
    }
}

pub fn center_of_mass(img: &IntensityImage) -> Result<PixelPoint, AnalysisError> {
    let n = img.n();
    let (mut w, mut sc, mut sr) = (0.0, 0.0, 0.0);
    for row in 0..n {
        for col in 0..n {
            let p = img.pixels[row * n + col];
            w += p;
            sc += p * col as f64;
            sr += p * row as f64;
        }
    }
    if !(w > 0.0) {
        return Err(AnalysisError::EmptyImage);
    }
    Ok(PixelPoint {
        col: sc / w,
        row: sr / w,
    })
}

/// Central second moments `(⟨x²⟩, ⟨xy⟩, ⟨y²⟩)` about `com` in px², with `x`
/// to the right and `y` up.
pub fn second_moments(img: &IntensityImage, com: PixelPoint) -> Result<[f64; 3], AnalysisError> {
    let n = img.n();
    let (mut w, mut xx, mut xy, mut yy) = (0.0, 0.0, 0.0, 0.0);
    for row in 0..n {
        let dy = com.row - row as f64;
        for col in 0..n {
            let p = img.pixels[row * n + col];
            let dx = col as f64 - com.col;
            w += p;
            xx += p * dx * dx;
            xy += p * dx * dy;
            yy += p * dy * dy;
        }
    }
    if !(w > 0.0) {
        return Err(AnalysisError::EmptyImage);
    }
    Ok([xx / w, xy / w, yy / w])
}

fn bilinear(img: &IntensityImage, col: f64, row: f64) -> f64 {
    let n = img.n();
    let c0 = col.floor();
    let r0 = row.floor();
    let (fc, fr) = (col - c0, row - r0);
    let (c0, r0) = (c0 as isize, r0 as isize);
    let at = |r: isize, c: isize| -> f64 {
        if r < 0 || c < 0 || r as usize >= n || c as usize >= n {
            0.0
        } else {
            img.pixels[r as usize * n + c as usize]
        }
    };
    (1.0 - fr) * ((1.0 - fc) * at(r0, c0) + fc * at(r0, c0 + 1))
        + fr * ((1.0 - fc) * at(r0 + 1, c0) + fc * at(r0 + 1, c0 + 1))
}

/// [`bilinear`] with a branch-light path for interior points.
#[inline]
fn interior_bilinear(img: &IntensityImage, col: f64, row: f64) -> f64 {
    let n = img.n();
    if !(col >= 0.0 && row >= 0.0 && col < (n - 1) as f64 && row < (n - 1) as f64) {
        return bilinear(img, col, row);
    }
    // truncation is floor for non-negative values
    let (c0, r0) = (col as usize, row as usize);
    let (fc, fr) = (col - c0 as f64, row - r0 as f64);
    let i = r0 * n + c0;
    let p = &img.pixels[i..i + n + 2];
    (1.0 - fr) * ((1.0 - fc) * p[0] + fc * p[1]) + fr * ((1.0 - fc) * p[n] + fc * p[n + 1])
}

/// Line integrals through `com` along `η_k = kπ/n_samples`, measured
/// counter-clockwise from `+x` with `y` up.
///
/// Every chord has the same half-length: the distance from `com` to the
/// nearest border minus one pixel.
pub fn line_scan(img: &IntensityImage, com: PixelPoint, n_samples: usize) -> LineScanCurve {
    let n = img.n() as f64;
    let radius = [com.col, com.row, n - 1.0 - com.col, n - 1.0 - com.row]
        .into_iter()
        .fold(f64::INFINITY, f64::min)
        - 1.0;
    let steps = radius.max(0.0).floor() as i64;
    let sums = (0..n_samples)
        .map(|k| {
            let eta = k as f64 * PI / n_samples as f64;
            let (s, c) = eta.sin_cos();
            (-steps..=steps)
                .map(|j| {
                    let t = j as f64;
                    interior_bilinear(img, com.col + t * c, com.row - t * s)
                })
                .sum::<f64>()
        })
        .collect();
    LineScanCurve::new(sums).unwrap_or_else(|_| LineScanCurve {
        etas: (0..n_samples)
            .map(|k| k as f64 * PI / n_samples as f64)
            .collect(),
        sums: vec![0.0; n_samples],
    })
}

/// Discrete minimum refined by a parabola through it and its two periodic
/// neighbours.
pub fn nodal_orientation(curve: &LineScanCurve) -> f64 {
    let s = curve.sums();
    let n = s.len();
    let (k, _) = s
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |best, (i, &v)| {
            if v < best.1 {
                (i, v)
            } else {
                best
            }
        });
    let ym = s[(k + n - 1) % n];
    let y0 = s[k];
    let yp = s[(k + 1) % n];
    let denom = ym - 2.0 * y0 + yp;
    let delta = if denom > 0.0 {
        (0.5 * (ym - yp) / denom).clamp(-0.5, 0.5)
    } else {
        0.0
    };
    ((k as f64 + delta) * curve.step()).rem_euclid(PI)
}

/// `(max − min)/(max + min)` over the sampled curve.
pub fn visibility(curve: &LineScanCurve) -> f64 {
    let max = curve.sums().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = curve.sums().iter().cloned().fold(f64::INFINITY, f64::min);
    if !(max + min > 0.0) {
        return 0.0;
    }
    ((max - min) / (max + min)).clamp(0.0, 1.0)
}

fn subtract_floor(img: &IntensityImage, quantile: f64) -> IntensityImage {
    if quantile <= 0.0 {
        return img.clone();
    }
    let mut sorted = img.pixels.clone();
    let idx = ((sorted.len() - 1) as f64 * quantile).floor() as usize;
    let (_, floor, _) = sorted.select_nth_unstable_by(idx, |a, b| a.total_cmp(b));
    let floor = *floor;
    IntensityImage {
        grid: img.grid,
        pixels: img.pixels.iter().map(|p| (p - floor).max(0.0)).collect(),
    }
}

/// Full pipeline with default options.
pub fn mode_orientation(img: &IntensityImage) -> Result<ImageReading, AnalysisError> {
    mode_orientation_with(img, &AnalysisOptions::default())
}

pub fn mode_orientation_with(
    img: &IntensityImage,
    opts: &AnalysisOptions,
) -> Result<ImageReading, AnalysisError> {
    opts.validate()?;
    let img = subtract_floor(img, opts.floor_quantile);
    let com = center_of_mass(&img)?;
    let curve = line_scan(&img, com, opts.n_samples);
    let eta_min = nodal_orientation(&curve);
    let v = visibility(&curve);

    // signed distance to the nodal line, x right and y up
    let (s, c) = eta_min.sin_cos();
    let n = img.n();
    let mut acc = [[0.0f64; 3]; 2];
    for row in 0..n {
        let dy = com.row - row as f64;
        for (col, &p) in img.pixels[row * n..(row + 1) * n].iter().enumerate() {
            let dx = col as f64 - com.col;
            let d = -s * dx + c * dy;
            // pixels within the exclusion band count for neither side
            let w = [
                p * f64::from(u8::from(d > opts.exclusion_px)),
                p * f64::from(u8::from(d < -opts.exclusion_px)),
            ];
            for (a, w) in acc.iter_mut().zip(w) {
                a[0] += w;
                a[1] += w * dx;
                a[2] += w * dy;
            }
        }
    }
    let alpha = if acc[0][0] > 0.0 && acc[1][0] > 0.0 {
        let dx = acc[0][1] / acc[0][0] - acc[1][1] / acc[1][0];
        let dy = acc[0][2] / acc[0][0] - acc[1][2] / acc[1][0];
        dy.atan2(dx).rem_euclid(PI)
    } else {
        (eta_min + PI / 2.0).rem_euclid(PI)
    };
    Ok(ImageReading {
        alpha: if alpha >= PI { 0.0 } else { alpha },
        visibility: v,
        eta_min,
        com,
        low_visibility: v < opts.visibility_threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{hg_field, intensity, lg_field, superpose, Charge, GridSpec};
    use crate::state::{axis_diff, PoincareState};
    use proptest::prelude::*;

    fn grid() -> GridSpec {
        GridSpec::default()
    }

    fn state_img(theta_deg: f64, phi_deg: f64) -> IntensityImage {
        let s = PoincareState::from_degrees(theta_deg, phi_deg).unwrap();
        intensity(&superpose(&grid(), &s))
    }

    fn axis_err_deg(a: f64, b_deg: f64) -> f64 {
        axis_diff(a, b_deg.to_radians()).abs().to_degrees()
    }

    /// Resample `img` rotated counter-clockwise by `delta` about the grid center.
    fn rotate(img: &IntensityImage, delta: f64) -> IntensityImage {
        let n = img.n();
        let c = img.grid.center() as f64;
        let (s, co) = delta.sin_cos();
        let mut out = vec![0.0; n * n];
        for row in 0..n {
            for col in 0..n {
                let x = col as f64 - c;
                let y = c - row as f64;
                let xs = co * x + s * y;
                let ys = -s * x + co * y;
                out[row * n + col] = bilinear(img, c + xs, c - ys);
            }
        }
        IntensityImage::new(img.grid, out).unwrap()
    }

    #[test]
    fn com_of_single_pixel() {
        let g = grid();
        let mut px = vec![0.0; g.len()];
        px[40 * g.n + 99] = 3.0;
        let c = center_of_mass(&IntensityImage::new(g, px).unwrap()).unwrap();
        assert_eq!((c.col, c.row), (99.0, 40.0));
    }

    #[test]
    fn com_of_doughnut_is_center() {
        let img = intensity(&lg_field(&grid(), Charge::Plus));
        let c = center_of_mass(&img).unwrap();
        let m = grid().center() as f64;
        assert!((c.col - m).abs() < 0.1 && (c.row - m).abs() < 0.1);
    }

    #[test]
    fn com_of_two_lobes_is_midpoint() {
        let g = grid();
        let mut px = vec![0.0; g.len()];
        px[50 * g.n + 60] = 1.0;
        px[90 * g.n + 160] = 1.0;
        let c = center_of_mass(&IntensityImage::new(g, px).unwrap()).unwrap();
        assert_eq!((c.col, c.row), (110.0, 70.0));
    }

    #[test]
    fn moments_of_hg_follow_the_lobe_axis() {
        // lobes along 30°: the major axis of the moment tensor points there
        let img = intensity(&hg_field(&grid(), 30f64.to_radians()));
        let com = center_of_mass(&img).unwrap();
        let [xx, xy, yy] = second_moments(&img, com).unwrap();
        let axis = 0.5 * (2.0 * xy).atan2(xx - yy);
        assert!(axis_err_deg(axis, 30.0) < 1e-6);
        let doughnut = intensity(&lg_field(&grid(), Charge::Plus));
        let [a, b, c] = second_moments(&doughnut, center_of_mass(&doughnut).unwrap()).unwrap();
        assert!((a - c).abs() < 1e-9 * a && b.abs() < 1e-9 * a);
    }

    #[test]
    fn empty_image_is_rejected() {
        let img = IntensityImage::new(grid(), vec![0.0; grid().len()]).unwrap();
        assert_eq!(center_of_mass(&img), Err(AnalysisError::EmptyImage));
        assert_eq!(mode_orientation(&img), Err(AnalysisError::EmptyImage));
    }

    #[test]
    fn uniform_image_gives_flat_curve() {
        let g = grid();
        let img = IntensityImage::new(g, vec![1.0; g.len()]).unwrap();
        let com = center_of_mass(&img).unwrap();
        let curve = line_scan(&img, com, 360);
        let max = curve.sums().iter().cloned().fold(0.0, f64::max);
        let min = curve.sums().iter().cloned().fold(f64::INFINITY, f64::min);
        assert!((max - min) / max < 1e-3);
        assert_eq!(visibility(&curve), (max - min) / (max + min));
    }

    #[test]
    fn hg0_nodal_line_is_vertical() {
        let img = intensity(&hg_field(&grid(), 0.0));
        let com = center_of_mass(&img).unwrap();
        let eta = nodal_orientation(&line_scan(&img, com, 360));
        assert!(axis_err_deg(eta, 90.0) < 0.5);
    }

    #[test]
    fn hg30_nodal_line() {
        let img = intensity(&hg_field(&grid(), 30f64.to_radians()));
        let com = center_of_mass(&img).unwrap();
        let eta = nodal_orientation(&line_scan(&img, com, 360));
        assert!(axis_err_deg(eta, 120.0) < 0.5);
    }

    #[test]
    fn doughnut_curve_is_flat() {
        let img = intensity(&lg_field(&grid(), Charge::Minus));
        let com = center_of_mass(&img).unwrap();
        let curve = line_scan(&img, com, 360);
        let max = curve.sums().iter().cloned().fold(0.0, f64::max);
        let min = curve.sums().iter().cloned().fold(f64::INFINITY, f64::min);
        assert!((max - min) / max < 0.01);
    }

    #[test]
    fn parabolic_refinement_beats_nearest_sample() {
        let n = 90;
        let step = PI / n as f64;
        let mut worst_ratio: f64 = 0.0;
        for i in 0..20 {
            let truth = (0.37 + i as f64 * 0.131) % PI;
            let sums: Vec<f64> = (0..n)
                .map(|k| 1.0 + 0.8 * (2.0 * (k as f64 * step - truth) + PI).cos())
                .collect();
            let curve = LineScanCurve::new(sums.clone()).unwrap();
            let kmin = (0..n)
                .min_by(|a, b| sums[*a].total_cmp(&sums[*b]))
                .unwrap();
            let coarse = axis_diff(kmin as f64 * step, truth).abs();
            let fine = axis_diff(nodal_orientation(&curve), truth).abs();
            if coarse > 0.1 * step {
                worst_ratio = worst_ratio.max(fine / coarse);
            }
        }
        assert!(worst_ratio <= 0.5, "ratio {worst_ratio}");
    }

    #[test]
    fn visibility_bounds() {
        let flat = LineScanCurve::new(vec![2.0; 100]).unwrap();
        assert_eq!(visibility(&flat), 0.0);
        let mut s = vec![1.0; 100];
        s[3] = 0.0;
        assert_eq!(visibility(&LineScanCurve::new(s).unwrap()), 1.0);
    }

    #[test]
    fn curve_needs_enough_samples() {
        assert!(LineScanCurve::new(vec![1.0; 89]).is_err());
    }

    #[test]
    fn visibility_follows_sin_theta() {
        for t in [30.0, 90.0, 150.0] {
            let r = mode_orientation(&state_img(t, 0.0)).unwrap();
            let want = f64::sin(t.to_radians());
            assert!((r.visibility - want).abs() < 0.03, "θ={t}: {}", r.visibility);
        }
    }

    #[test]
    fn hg0_alpha_is_zero() {
        let r = mode_orientation(&intensity(&hg_field(&grid(), 0.0))).unwrap();
        assert!(axis_err_deg(r.alpha, 0.0) < 0.5);
        assert!(r.visibility > 0.95);
        assert!(!r.low_visibility);
    }

    #[test]
    fn equator_state_alpha_is_half_phase() {
        let r = mode_orientation(&state_img(90.0, 70.0)).unwrap();
        assert!(axis_err_deg(r.alpha, 35.0) < 0.5);
        for phi in (0..360).step_by(20) {
            let r = mode_orientation(&state_img(90.0, phi as f64)).unwrap();
            assert!(axis_err_deg(r.alpha, phi as f64 / 2.0) < 0.5, "φ={phi}");
        }
    }

    #[test]
    fn doughnut_is_flagged() {
        let r = mode_orientation(&intensity(&lg_field(&grid(), Charge::Plus))).unwrap();
        assert!(r.visibility < 0.1);
        assert!(r.low_visibility);
    }

    #[test]
    fn alpha_is_perpendicular_to_nodal_line() {
        let r = mode_orientation(&state_img(60.0, 200.0)).unwrap();
        assert!(axis_err_deg(r.alpha, r.eta_min.to_degrees() + 90.0) < 0.5);
    }

    #[test]
    fn rotation_equivariance() {
        let base = intensity(&hg_field(&grid(), 0.2));
        let a0 = mode_orientation(&base).unwrap().alpha;
        for d in (10..=170).step_by(20) {
            let delta = (d as f64).to_radians();
            let r = mode_orientation(&rotate(&base, delta)).unwrap();
            assert!(r.visibility > 0.5);
            assert!(
                axis_diff(r.alpha, a0 + delta).abs().to_degrees() < 1.0,
                "δ={d}: {}",
                r.alpha.to_degrees()
            );
        }
    }

    #[test]
    fn reading_json_record() {
        let r = ImageReading {
            alpha: 0.5,
            visibility: 0.9,
            eta_min: 0.5 + PI / 2.0,
            com: PixelPoint {
                col: 128.0,
                row: 127.5,
            },
            low_visibility: false,
        };
        let j = serde_json::to_value(r).unwrap();
        assert!((j["alpha_deg"].as_f64().unwrap() - 0.5f64.to_degrees()).abs() < 1e-12);
        assert_eq!(j["com_px"][1].as_f64().unwrap(), 127.5);
        let back: ImageReading = serde_json::from_value(j).unwrap();
        assert!((back.alpha - 0.5).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn alpha_invariant_to_scale_and_background(
            alpha in 0.0..PI, scale in 0.1f64..50.0, bg in 0.0f64..0.05,
        ) {
            let img = intensity(&hg_field(&grid(), alpha));
            let a0 = mode_orientation(&img).unwrap().alpha;
            let peak = img.peak();
            let px = img.pixels.iter().map(|p| scale * (p + bg * peak)).collect();
            let r = mode_orientation(&IntensityImage::new(img.grid, px).unwrap()).unwrap();
            prop_assert!(axis_diff(r.alpha, a0).abs().to_degrees() < 1.0);
            prop_assert!((0.0..=1.0).contains(&r.visibility));
        }
    }
}
