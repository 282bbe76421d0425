use super::{ImageSource, TomographyError};
use crate::analysis::{mode_orientation_with, AnalysisOptions, ImageReading};
use crate::astig::{equal_modulus_residual, method1_invert, Method1Reading};
use crate::state::{angle_diff, axis_diff, wrap_two_pi, PoincareState};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, TAU};

/// Largest allowed gap in the converter-angle grid.
pub const MAX_BETA_STEP: f64 = 2.0 * PI / 180.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Method1Options {
    pub analysis: AnalysisOptions,
    /// Visibility spread below which the scan is treated as β-independent.
    pub flat_spread: f64,
    /// Direct-image visibility below which a flat scan is read as a pole.
    pub pole_visibility: f64,
}

impl Default for Method1Options {
    fn default() -> Self {
        Self {
            analysis: AnalysisOptions::default(),
            flat_spread: 0.02,
            pole_visibility: 0.34,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub beta: f64,
    pub visibility: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Method1Result {
    pub reading: Method1Reading,
    pub state: PoincareState,
    pub curve: Vec<ScanPoint>,
    /// The scan was flat and the direct image showed no lobes.
    pub pole: bool,
    /// `equal_modulus_residual(state, β_MC)`.
    pub residual: f64,
}

/// `n` equally spaced angles covering `[0, 2π)` with spacing at most `step`.
pub fn beta_grid(step: f64) -> Vec<f64> {
    let n = (TAU / step - 1e-9).ceil().max(1.0) as usize;
    (0..n).map(|k| k as f64 * TAU / n as f64).collect()
}

fn check_grid(betas: &[f64]) -> Result<(), TomographyError> {
    let bad = |m: &str| Err(TomographyError::InvalidBetaGrid(m.into()));
    if betas.len() < 3 {
        return bad("need at least three angles");
    }
    if betas.iter().any(|b| !(0.0..TAU).contains(b)) {
        return bad("angles must lie in [0, 2π)");
    }
    if betas.windows(2).any(|w| w[1] <= w[0]) {
        return bad("angles must be strictly increasing");
    }
    let wrap = betas[0] + TAU - betas[betas.len() - 1];
    let gap = betas
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(wrap, f64::max);
    if gap > MAX_BETA_STEP + 1e-9 {
        return Err(TomographyError::InvalidBetaGrid(format!(
            "largest step {:.3}° exceeds 2°",
            gap.to_degrees()
        )));
    }
    Ok(())
}

fn read(
    src: &dyn ImageSource,
    beta: f64,
    opts: &AnalysisOptions,
) -> Result<ImageReading, TomographyError> {
    Ok(mode_orientation_with(&src.converted(beta)?, opts)?)
}

/// Scans the converter over `betas`, locates the visibility maximum and
/// inverts the reading taken there.
pub fn method1_scan(
    source: &dyn ImageSource,
    betas: &[f64],
    opts: &Method1Options,
) -> Result<Method1Result, TomographyError> {
    check_grid(betas)?;
    let curve: Vec<ScanPoint> = betas
        .par_iter()
        .map(|&beta| {
            read(source, beta, &opts.analysis).map(|r| ScanPoint {
                beta,
                visibility: r.visibility,
                alpha: r.alpha,
            })
        })
        .collect::<Result<_, _>>()?;

    let vmax = curve.iter().map(|p| p.visibility).fold(f64::NEG_INFINITY, f64::max);
    let vmin = curve.iter().map(|p| p.visibility).fold(f64::INFINITY, f64::min);
    if vmax - vmin < opts.flat_spread {
        let direct = mode_orientation_with(&source.direct()?, &opts.analysis)?;
        if direct.visibility < opts.pole_visibility {
            // LG+ converts to lobes at 45°, LG− to lobes at 135°
            let witness = read(source, 0.0, &opts.analysis)?;
            let north = axis_diff(witness.alpha, FRAC_PI_4).abs()
                < axis_diff(witness.alpha, 3.0 * FRAC_PI_4).abs();
            let state = if north {
                PoincareState::north()
            } else {
                PoincareState::south()
            };
            return Ok(Method1Result {
                reading: Method1Reading::new(0.0, witness.alpha),
                state,
                curve,
                pole: true,
                residual: 0.0,
            });
        }
    }

    let n = curve.len();
    let k = (0..n)
        .max_by(|&a, &b| curve[a].visibility.total_cmp(&curve[b].visibility))
        .expect("non-empty grid");
    let (lo, mid, hi) = (
        &curve[(k + n - 1) % n],
        &curve[k],
        &curve[(k + 1) % n],
    );
    let h = 0.5 * (angle_diff(hi.beta, lo.beta).abs());
    let denom = lo.visibility - 2.0 * mid.visibility + hi.visibility;
    let delta = if denom < 0.0 {
        (0.5 * (lo.visibility - hi.visibility) / denom * h).clamp(-h, h)
    } else {
        0.0
    };
    let peak = wrap_two_pi(mid.beta + delta);
    let candidates = if source.any_angle() {
        [peak, wrap_two_pi(peak + PI)]
            .map(|b| read(source, b, &opts.analysis).map(|r| (b, r.alpha)))
    } else {
        // recorded scans: stay on the grid
        let opposite = (0..n)
            .min_by(|&a, &b| {
                let da = angle_diff(curve[a].beta, mid.beta + PI).abs();
                da.total_cmp(&angle_diff(curve[b].beta, mid.beta + PI).abs())
            })
            .expect("non-empty grid");
        [mid, &curve[opposite]].map(|p| Ok((p.beta, p.alpha)))
    };

    // v(β) has period π; the primary inversion branch singles out one peak
    let mut best: Option<(Method1Reading, f64)> = None;
    for c in candidates {
        let (beta, alpha) = c?;
        let reading = Method1Reading::new(beta, alpha);
        let reduced = wrap_two_pi(beta - 2.0 * alpha + FRAC_PI_2);
        let excess = (reduced - PI).max(0.0).min(TAU - reduced);
        if best.is_none_or(|(_, e)| excess < e) {
            best = Some((reading, excess));
        }
    }
    let reading = best.expect("two candidates").0;
    let state = method1_invert(&reading)?;
    Ok(Method1Result {
        reading,
        state,
        curve,
        pole: false,
        residual: equal_modulus_residual(&state, reading.beta_mc),
    })
}
