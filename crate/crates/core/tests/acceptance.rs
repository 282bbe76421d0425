//! Acceptance suite. Runs without the libtest harness so the verdict lines
//! are always printed; exits non-zero if any criterion fails.

use num_complex::Complex64;
use oam_tomo::analysis::{center_of_mass, mode_orientation};
use oam_tomo::astig::{
    equal_modulus_residual, equal_modulus_signed, mc_unitary, method1_invert, method1_predict,
};
use oam_tomo::field::{hg_field, intensity, GridSpec, IntensityImage, TiltedLensSim};
use oam_tomo::harness::{
    meridian_sequence, parallel_sequence, scan_noiseless, scan_noisy_errors, standard_readings,
    table_readings, table_run, table_targets, RunConfig, Session,
};
use oam_tomo::state::{angle_diff, axis_diff};
use oam_tomo::tomography::{
    calibrate_tilt, estimate_state, mask_for, visibility_threshold_cap, Branch, MeasurementKind,
};
use oam_tomo::{apply_mc, bloch_rotate, PoincareState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, TAU};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

type Outcome = Result<String, String>;

fn check(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(elapsed: Duration, limit_s: f64, what: &str) -> Result<(), String> {
    check(
        elapsed.as_secs_f64() < limit_s,
        format!("{what} took {:.1} s, limit {limit_s} s", elapsed.as_secs_f64()),
    )
}

fn session() -> Session {
    Session::new(RunConfig::default()).expect("default config")
}

// Oracles written directly from the conventions: |θ,φ⟩ = (cos θ/2, e^{iφ} sin θ/2),
// Bloch vector (2 Re c₁*c₂, 2 Im c₁*c₂, |c₁|² − |c₂|²).

fn bloch_of(c: [Complex64; 2]) -> [f64; 3] {
    let p = c[0].conj() * c[1];
    [2.0 * p.re, 2.0 * p.im, c[0].norm_sqr() - c[1].norm_sqr()]
}

fn rodrigues(v: [f64; 3], k: [f64; 3], angle: f64) -> [f64; 3] {
    let (s, c) = angle.sin_cos();
    let kv = [
        k[1] * v[2] - k[2] * v[1],
        k[2] * v[0] - k[0] * v[2],
        k[0] * v[1] - k[1] * v[0],
    ];
    let kd = k[0] * v[0] + k[1] * v[1] + k[2] * v[2];
    std::array::from_fn(|i| v[i] * c + kv[i] * s + k[i] * kd * (1.0 - c))
}

fn bloch_angles(theta: f64, phi: f64) -> [f64; 3] {
    [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn criterion_1() -> Outcome {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut worst_rot, mut worst_unit) = (0.0f64, 0.0f64);
    for _ in 0..1000 {
        let theta = rng.random_range(0.0..PI);
        let phi = rng.random_range(0.0..TAU);
        let beta = rng.random_range(0.0..TAU);
        let s = PoincareState::new(theta, phi).unwrap();
        let amp = [
            Complex64::new((theta / 2.0).cos(), 0.0),
            Complex64::from_polar((theta / 2.0).sin(), phi),
        ];
        let m = mc_unitary(beta);
        let out = [
            m.m[0][0] * amp[0] + m.m[0][1] * amp[1],
            m.m[1][0] * amp[0] + m.m[1][1] * amp[1],
        ];
        let want = rodrigues(bloch_angles(theta, phi), [beta.cos(), beta.sin(), 0.0], -FRAC_PI_2);
        let via_matrix = bloch_of(out);
        let via_lib = bloch_rotate(&s.to_bloch(), beta).to_array();
        let via_state = apply_mc(&s, beta).to_bloch().to_array();
        for got in [via_matrix, via_lib, via_state] {
            for i in 0..3 {
                worst_rot = worst_rot.max((got[i] - want[i]).abs());
            }
        }
        // M†M − I, entry by entry
        for i in 0..2 {
            for j in 0..2 {
                let mut acc = Complex64::new(0.0, 0.0);
                for k in 0..2 {
                    acc += m.m[k][i].conj() * m.m[k][j];
                }
                let id = if i == j { 1.0 } else { 0.0 };
                worst_unit = worst_unit.max((acc - id).norm());
            }
        }
    }
    check(worst_rot < 1e-9, format!("rotation mismatch {worst_rot:.2e}"))?;
    check(worst_unit < 1e-12, format!("unitarity error {worst_unit:.2e}"))?;
    within(t0.elapsed(), 1.0, "1000 cases")?;
    Ok(format!(
        "max rotation mismatch {worst_rot:.1e}, max unitarity error {worst_unit:.1e}, {:.0} ms",
        t0.elapsed().as_secs_f64() * 1e3
    ))
}

fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let mut fa = f(a);
    while b - a > 1e-13 {
        let m = 0.5 * (a + b);
        let fm = f(m);
        if (fm > 0.0) == (fa > 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

fn criterion_2() -> Outcome {
    let (mut worst_rt, mut worst_root, mut count) = (0.0f64, 0.0f64, 0);
    for ti in 1..12 {
        for pi in 0..24 {
            let theta = (15.0 * ti as f64).to_radians();
            let phi = (15.0 * pi as f64).to_radians();
            let s = PoincareState::new(theta, phi).unwrap();
            let r = method1_predict(&s).map_err(|e| e.to_string())?;
            // closed forms written out here
            let want_alpha = ((phi - theta) / 2.0 + FRAC_PI_4).rem_euclid(PI);
            worst_rt = worst_rt
                .max(angle_diff(r.beta_mc, phi).abs())
                .max(axis_diff(r.alpha_hg, want_alpha).abs());
            let back = method1_invert(&r).map_err(|e| e.to_string())?;
            worst_rt = worst_rt
                .max((back.theta() - theta).abs())
                .max(angle_diff(back.phi(), phi).abs());
            let again = method1_predict(&back).map_err(|e| e.to_string())?;
            worst_rt = worst_rt
                .max(angle_diff(again.beta_mc, r.beta_mc).abs())
                .max(axis_diff(again.alpha_hg, r.alpha_hg).abs());
            for zero in [phi, phi + PI] {
                let root = bisect(|b| equal_modulus_signed(&s, b), zero - 0.3, zero + 0.3);
                worst_root = worst_root.max(angle_diff(root, zero).abs());
                count += 1;
            }
            // no other zeros: the residual stays away from 0 elsewhere
            for k in 0..360 {
                let b = (k as f64 + 0.5).to_radians();
                let d = angle_diff(b, phi).abs().min(angle_diff(b, phi + PI).abs());
                if d > 0.05 {
                    let floor = theta.sin() * d.sin() * 0.5;
                    check(
                        equal_modulus_residual(&s, b) > floor,
                        format!("spurious zero near β={b:.3} for ({theta:.3}, {phi:.3})"),
                    )?;
                }
            }
        }
    }
    check(worst_rt < 1e-9, format!("roundtrip error {worst_rt:.2e} rad"))?;
    check(worst_root < 1e-6, format!("root error {worst_root:.2e} rad"))?;
    Ok(format!(
        "roundtrip error {worst_rt:.1e} rad over 264 states, {count} zeros located within {worst_root:.1e} rad"
    ))
}

fn line_alpha(theta_deg: f64, phi_deg: f64) -> f64 {
    ((phi_deg - theta_deg) / 2.0 + 45.0).rem_euclid(180.0)
}

fn criterion_3() -> Outcome {
    let s = session();
    let mut points = meridian_sequence();
    points.extend(parallel_sequence());
    let rows = scan_noiseless(&s, &points).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for r in &rows {
        let want = line_alpha(r.theta_t, r.phi_t).to_radians();
        let err = axis_diff(r.alpha_hg.to_radians(), want).abs().to_degrees();
        check(err < 1.0, format!("{}: α_HG off the line by {err:.2}°", r.label))?;
        worst = worst.max(err);
    }

    let t0 = Instant::now();
    let seeds = 100;
    let errs = scan_noisy_errors(&s, &points, 0.05, seeds).map_err(|e| e.to_string())?;
    let dt: Vec<f64> = errs.iter().flatten().map(|e| e.0.to_degrees()).collect();
    let dp: Vec<f64> = errs.iter().flatten().filter_map(|e| e.1).map(f64::to_degrees).collect();
    let rms = |v: &[f64]| (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt();
    let (rt, rp) = (rms(&dt), rms(&dp));
    check(dt.len() == points.len() * seeds, "missing noisy scans")?;
    check((3.0..=20.0).contains(&rt), format!("noisy Δθ = {rt:.2}° outside [3°, 20°]"))?;
    check((3.0..=20.0).contains(&rp), format!("noisy Δφ = {rp:.2}° outside [3°, 20°]"))?;
    Ok(format!(
        "noiseless max |α_HG − line| = {worst:.3}° over {} points; σ_rel = 0.05 over {seeds} seeds: \
         RMS Δθ = {rt:.2}°, RMS Δφ = {rp:.2}° ({:.0} s)",
        rows.len(),
        t0.elapsed().as_secs_f64()
    ))
}

fn criterion_4() -> Outcome {
    let t0 = Instant::now();
    let s = session();
    let mut worst = 0.0f64;
    for k in 1..18 {
        let theta = 10.0 * k as f64;
        let st = PoincareState::from_degrees(theta, 0.0).unwrap();
        let r = mode_orientation(&s.source(st, None).direct().map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
        let err = (r.visibility - theta.to_radians().sin()).abs();
        check(err <= 0.03, format!("θ={theta}°: v={:.4}", r.visibility))?;
        worst = worst.max(err);
    }
    let (cap, sr) = visibility_threshold_cap();
    let want_cap = 0.34f64.asin();
    let want_sr = TAU * (1.0 - want_cap.cos());
    check((cap - want_cap).abs() < 1e-12, "cap angle")?;
    check((cap.to_degrees() - 19.88).abs() < 0.01, format!("cap {:.4}°", cap.to_degrees()))?;
    check((sr - want_sr).abs() < 1e-12 && (sr - 0.375).abs() <= 0.005, format!("cap {sr:.4} sr"))?;
    check((sr - 0.38).abs() < 0.01, "cap solid angle not consistent with 0.38 sr")?;
    within(t0.elapsed(), 30.0, "visibility law")?;
    Ok(format!(
        "max |v − sin θ| = {worst:.4}; cap {:.3}°, {sr:.4} sr; {:.1} s",
        cap.to_degrees(),
        t0.elapsed().as_secs_f64()
    ))
}

fn criterion_5() -> Outcome {
    let t0 = Instant::now();
    let s = session();
    let points = table_targets();
    check(points.len() == 26, "26 targets")?;
    let readings = table_readings(&s, &points).map_err(|e| e.to_string())?;
    let (rows, _) = table_run(&s, &points, &readings, 0.0, 1).map_err(|e| e.to_string())?;
    let (mut min_f, mut max_err) = (1.0f64, 0.0f64);
    for (p, r) in points.iter().zip(&rows) {
        let t = bloch_angles(p.theta_deg.to_radians(), p.phi_deg.to_radians());
        let e = bloch_angles(r.theta_e.to_radians(), r.phi_e.to_radians());
        let f = (1.0 + dot(t, e)) / 2.0;
        let d = dot(t, e).clamp(-1.0, 1.0).acos().to_degrees();
        check(f >= 0.9995, format!("point {}: fidelity {f:.6}", p.label))?;
        check(d < 1.0, format!("point {}: angular error {d:.3}°", p.label))?;
        check(
            (r.fidelity.unwrap() - f).abs() < 1e-5,
            format!("point {}: reported fidelity disagrees", p.label),
        )?;
        min_f = min_f.min(f);
        max_err = max_err.max(d);
    }
    let (_, noisy) =
        table_run(&s, &points, &readings, 2f64.to_radians(), 100).map_err(|e| e.to_string())?;
    check(noisy.seeds == 100, "100 seeds")?;
    check(
        (0.985..=0.999).contains(&noisy.mean_fidelity),
        format!("noisy mean fidelity {:.4}", noisy.mean_fidelity),
    )?;
    let dphi = noisy.mean_d_phi_deg.unwrap_or(f64::NAN);
    check(noisy.mean_d_theta_deg <= 6.0, format!("mean Δθ {:.2}°", noisy.mean_d_theta_deg))?;
    check(dphi <= 4.0, format!("mean Δφ {dphi:.2}°"))?;
    within(t0.elapsed(), 300.0, "table reproduction")?;
    Ok(format!(
        "noiseless min fidelity {min_f:.6}, max error {max_err:.3}°; α-noise 2° × 100 seeds: \
         fidelity {:.4} ± {:.4}, mean Δθ {:.2}°, Δφ {dphi:.2}°; {:.1} s",
        noisy.mean_fidelity,
        noisy.sd_fidelity,
        noisy.mean_d_theta_deg,
        t0.elapsed().as_secs_f64()
    ))
}

fn branch_of(s: &Session, theta: f64, phi: f64) -> Result<Branch, String> {
    let st = PoincareState::from_degrees(theta, phi).unwrap();
    let src = s.source(st, None);
    let r = standard_readings(src.as_ref(), s.config()).map_err(|e| e.to_string())?;
    let e = estimate_state(&r, Some(&st), &s.config().estimate_options(false))
        .map_err(|e| e.to_string())?;
    check(
        e.fidelity_vs_target.unwrap() > 0.9999,
        format!("({theta}, {phi}) fidelity {:.6}", e.fidelity_vs_target.unwrap()),
    )?;
    Ok(e.branch)
}

fn criterion_6() -> Outcome {
    let s = session();
    for t in [0.0, 180.0] {
        let b = branch_of(&s, t, 0.0)?;
        check(b == Branch::BlindSpot, format!("pole θ={t}: {b}"))?;
    }
    let mut narrow = 0;
    for t in [30.0, 45.0, 60.0, 100.0, 135.0, 150.0] {
        let b = branch_of(&s, t, 0.0)?;
        check(
            matches!(b, Branch::NarrowTriangle | Branch::BlindSpot),
            format!("meridian θ={t}: {b}"),
        )?;
        narrow += usize::from(b == Branch::NarrowTriangle);
    }
    let b = branch_of(&s, 135.0, 95.0)?;
    check(b == Branch::Centroid, format!("(135°, 95°): {b}"))?;
    check(narrow > 0, "no narrow triangle on the meridian")?;
    Ok(format!(
        "poles blind_spot; φ=0 meridian {narrow}/6 narrow_triangle, rest blind_spot; (135°, 95°) centroid"
    ))
}

fn criterion_7() -> Outcome {
    let t0 = Instant::now();
    let cfg = RunConfig::default();
    check(
        cfg.lens.focal_mm == 336.0 && cfg.lens.tilt_deg == 27.0 && cfg.grid.wavelength_nm == 633.0,
        "default lens",
    )?;
    let sim = TiltedLensSim::new(cfg.lens_grid_spec()?, cfg.grid.n).map_err(|e| e.to_string())?;
    let lens = cfg.lens_spec();
    let cal = calibrate_tilt(&sim, &lens).map_err(|e| e.to_string())?;
    let abs = session();
    let north = PoincareState::north();
    let want = mode_orientation(&abs.source(north, None).converted(0.0).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    check(cal.visibility > 0.9, format!("LG+ visibility {:.3}", cal.visibility))?;
    let a45 = axis_diff(cal.alpha, FRAC_PI_4).abs().to_degrees();
    check(a45 <= 3.0, format!("LG+ lobes at {:.2}°", cal.alpha.to_degrees()))?;
    let a_abs = axis_diff(cal.alpha, want.alpha).abs().to_degrees();
    check(a_abs <= 3.0, format!("LG+ physical vs abstract {a_abs:.2}°"))?;

    // 30° grid of states, each converter angle on a 30° grid plus the direct image
    let mut kinds = vec![MeasurementKind::Direct];
    kinds.extend((0..12).map(|k| MeasurementKind::Converter {
        beta: (30.0 * k as f64).to_radians(),
    }));
    let mut states = vec![PoincareState::north(), PoincareState::south()];
    for t in 1..6 {
        for p in 0..12 {
            states.push(PoincareState::from_degrees(30.0 * t as f64, 30.0 * p as f64).unwrap());
        }
    }
    let (mut worst, mut compared) = (0.0f64, 0);
    for kind in kinds {
        let basis = match kind {
            MeasurementKind::Direct => sim.camera_basis(&lens.untilted(), cal.plane_offset),
            MeasurementKind::Converter { beta } => {
                sim.camera_basis(&mask_for(&lens, beta), cal.plane_offset)
            }
        }
        .map_err(|e| e.to_string())?;
        for st in &states {
            let a = mode_orientation(&abs.source(*st, None).image(kind).map_err(|e| e.to_string())?)
                .map_err(|e| e.to_string())?;
            if a.visibility < 0.34 {
                continue;
            }
            let p = mode_orientation(&basis.image(st)).map_err(|e| e.to_string())?;
            let d = axis_diff(p.alpha, a.alpha).abs().to_degrees();
            check(
                d <= 3.0,
                format!(
                    "({:.0}°, {:.0}°) {}: physical {:.2}° vs abstract {:.2}°",
                    st.theta_deg(),
                    st.phi_deg(),
                    kind.file_tag(),
                    p.alpha.to_degrees(),
                    a.alpha.to_degrees()
                ),
            )?;
            worst = worst.max(d);
            compared += 1;
        }
    }
    within(t0.elapsed(), 120.0, "physical path")?;
    Ok(format!(
        "calibrated plane {:+.2} mm: LG+ v = {:.3}, α = {:.2}°; {compared} image pairs, max Δα = {worst:.2}°; {:.1} s",
        cal.plane_offset * 1e3,
        cal.visibility,
        cal.alpha.to_degrees(),
        t0.elapsed().as_secs_f64()
    ))
}

/// Counter-clockwise rotation by `delta` about the grid center, bilinear.
fn rotated(img: &IntensityImage, delta: f64) -> IntensityImage {
    let n = img.n();
    let c = img.grid.center() as f64;
    let (s, co) = delta.sin_cos();
    let at = |r: isize, q: isize| -> f64 {
        if r < 0 || q < 0 || r >= n as isize || q >= n as isize {
            0.0
        } else {
            img.pixels[r as usize * n + q as usize]
        }
    };
    let mut out = vec![0.0; n * n];
    for row in 0..n {
        for col in 0..n {
            let (x, y) = (col as f64 - c, c - row as f64);
            let (xs, ys) = (co * x + s * y, -s * x + co * y);
            let (fc, fr) = (c + xs, c - ys);
            let (c0, r0) = (fc.floor(), fr.floor());
            let (u, v) = (fc - c0, fr - r0);
            let (c0, r0) = (c0 as isize, r0 as isize);
            out[row * n + col] = (1.0 - v) * ((1.0 - u) * at(r0, c0) + u * at(r0, c0 + 1))
                + v * ((1.0 - u) * at(r0 + 1, c0) + u * at(r0 + 1, c0 + 1));
        }
    }
    IntensityImage::new(img.grid, out).unwrap()
}

fn criterion_8() -> Outcome {
    let g = GridSpec::default();
    check(g.n == 256, "n = 256")?;
    let mut worst_hg = 0.0f64;
    for k in 0..36 {
        let a = (5.0 * k as f64).to_radians();
        let r = mode_orientation(&intensity(&hg_field(&g, a))).map_err(|e| e.to_string())?;
        worst_hg = worst_hg.max(axis_diff(r.alpha, a).abs().to_degrees());
    }
    check(worst_hg <= 0.5, format!("HG orientation error {worst_hg:.3}°"))?;

    let s = session();
    let base = s
        .source(PoincareState::from_degrees(60.0, 40.0).unwrap(), None)
        .direct()
        .map_err(|e| e.to_string())?;
    let a0 = mode_orientation(&base).map_err(|e| e.to_string())?.alpha;
    let mut worst_rot = 0.0f64;
    for d in [15.0, 40.0, 75.0, 120.0, 160.0] {
        let delta = f64::to_radians(d);
        let a = mode_orientation(&rotated(&base, delta)).map_err(|e| e.to_string())?.alpha;
        worst_rot = worst_rot.max(axis_diff(a, a0 + delta).abs().to_degrees());
    }
    check(worst_rot <= 1.0, format!("rotation equivariance error {worst_rot:.3}°"))?;

    // point masses symmetric about (100.5, 60.5), and an HG image about the grid center
    let mut px = vec![0.0; g.n * g.n];
    for (r, c, w) in [(50, 90, 1.0), (71, 111, 1.0), (50, 111, 2.5), (71, 90, 2.5), (60, 100, 0.7), (61, 101, 0.7)] {
        px[r * g.n + c] = w;
    }
    let com = center_of_mass(&IntensityImage::new(g, px).unwrap()).map_err(|e| e.to_string())?;
    let e1 = (com.col - 100.5).abs().max((com.row - 60.5).abs());
    let hg = intensity(&hg_field(&g, 0.7));
    let com = center_of_mass(&hg).map_err(|e| e.to_string())?;
    let c = g.center() as f64;
    let e2 = (com.col - c).abs().max((com.row - c).abs());
    check(e1 < 1e-9 && e2 < 1e-9, format!("COM errors {e1:.1e}, {e2:.1e} px"))?;
    Ok(format!(
        "HG orientation max error {worst_hg:.3}°; rotation equivariance {worst_rot:.3}°; COM exact to {:.1e} px",
        e1.max(e2)
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("rotation equivalence", criterion_1),
        ("Method I closed forms", criterion_2),
        ("scan reproduction", criterion_3),
        ("visibility law", criterion_4),
        ("table reproduction", criterion_5),
        ("branch coverage", criterion_6),
        ("physical path", criterion_7),
        ("orientation analysis", criterion_8),
    ];
    let only: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let n = i + 1;
        if !only.is_empty() && !only.contains(&n) {
            continue;
        }
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("criterion {n} ({name}): PASS: {detail}"),
            Err(why) => {
                failed += 1;
                println!("criterion {n} ({name}): FAIL: {why}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
