//! Acceptance criteria, one check per criterion, run in order.
//!
//! This binary has its own `main` so every criterion prints a pass/fail
//! line in plain `cargo test` output. Positional arguments select criteria
//! by name prefix, e.g. `cargo test --test acceptance -- c9 c10`.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::process::ExitCode;
use std::sync::OnceLock;
use std::time::Instant;

use aysense::aoa::estimate_aoa;
use aysense::classify::{evaluate, train, LabeledDataset, Mode, Network, NetworkSpec, Tensor};
use aysense::commands;
use aysense::config::PipelineConfig;
use aysense::detect::{detect_candidates, detect_frame, AmpMatrix, DetectConfig};
use aysense::fusion::{fuse_decisions, ApRegistration, DETECTION_RADIUS};
use aysense::io::SceneFile;
use aysense::microdoppler::{doppler_resolution, extract_stream};
use aysense::pipeline::{
    frame_count, fused_positions, run_e2e, run_tracking, step_count, synthetic_activity_dataset, truth_positions,
    truth_track_points, union_positions, ActivityDatasetSpec, ApTracks,
};
use aysense::rng::{stream, Purpose};
use aysense::scenesim::{
    synth_cir_frame, Activity, ActivitySegment, Codebook, Scatterer, Scene, SceneSource, StaticReflector, Subject,
    Waypoint,
};
use aysense::source::FrameSource;
use aysense::track::{
    measurement, measurement_jacobian, predict, transition, update, Observation, TrackState, Tracker, TrackerConfig,
};
use aysense::waveform::{
    build_trn_unit, estimate_cir, golay_pair, propagate, tap_to_distance, RadioConfig, SPEED_OF_LIGHT,
};
use nalgebra::{Matrix4, Vector4};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{ChiSquared, ContinuousCDF};

const ROOM: [f64; 2] = [6.1, 7.7];

/// Result of one criterion: verdict plus the measured numbers.
struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn cgauss(rng: &mut ChaCha8Rng, std: f64) -> Complex64 {
    let s = std / 2f64.sqrt();
    Complex64::new(gauss(rng) * s, gauss(rng) * s)
}

// ---------------------------------------------------------------- C1–C4

/// Aperiodic autocorrelation at `lag ≥ 0`, computed directly.
fn autocorr(seq: &[i8], lag: usize) -> i64 {
    (0..seq.len() - lag).map(|i| seq[i] as i64 * seq[i + lag] as i64).sum()
}

fn c1_golay() -> Outcome {
    let start = Instant::now();
    let mut bad = Vec::new();
    let mut n = 2;
    while n <= 1024 {
        let pair = golay_pair(n).unwrap();
        for lag in 0..n {
            let s = autocorr(pair.ga(), lag) + autocorr(pair.gb(), lag);
            let want = if lag == 0 { 2 * n as i64 } else { 0 };
            if s != want {
                bad.push((n, lag, s));
            }
        }
        n *= 2;
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(bad.is_empty() && secs < 1.0, format!("N = 2..1024, {} bad lags, {secs:.3} s", bad.len()))
}

fn c2_cir_round_trip() -> Outcome {
    let start = Instant::now();
    let pair = golay_pair(128).unwrap();
    let unit = build_trn_unit(&pair);
    let mut rng = stream(2, Purpose::Trial, 100, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let taps = rng.gen_range(1..=64);
        let h: Vec<Complex64> = (0..taps).map(|_| cgauss(&mut rng, 1.0)).collect();
        let est = estimate_cir(&propagate(&unit, &h), &pair, taps).unwrap();
        let err: f64 = est.iter().zip(&h).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        let norm: f64 = h.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        worst = worst.max(err / norm);
    }
    // 20 dB: per-sample received signal power over per-sample noise power.
    let mut hits = 0;
    for _ in 0..1000 {
        let d = rng.gen_range(0..64);
        let mut h = vec![Complex64::new(0.0, 0.0); 64];
        h[d] = Complex64::from_polar(1.0, rng.gen_range(0.0..std::f64::consts::TAU));
        let noise_std = 10f64.powf(-20.0 / 20.0);
        let rx: Vec<Complex64> = propagate(&unit, &h).into_iter().map(|z| z + cgauss(&mut rng, noise_std)).collect();
        let est = estimate_cir(&rx, &pair, 64).unwrap();
        let peak = (0..64).max_by(|&a, &b| est[a].norm().total_cmp(&est[b].norm())).unwrap();
        hits += usize::from(peak == d);
    }
    let secs = start.elapsed().as_secs_f64();
    let rate = hits as f64 / 1000.0;
    outcome(
        worst <= 1e-9 && rate >= 0.99 && secs < 30.0,
        format!("worst relative error {worst:.2e}, peak tap correct {:.1}%, {secs:.2} s", rate * 100.0),
    )
}

fn c3_tap_spacing() -> Outcome {
    let cfg = RadioConfig::default();
    let spacing = SPEED_OF_LIGHT / (4.0 * cfg.bandwidth_hz);
    let mut worst: f64 = 0.0;
    for l in 0..cfg.taps {
        let step = tap_to_distance(l + 1, &cfg) - tap_to_distance(l, &cfg);
        // one rounding in each distance and one in the difference
        let ulp = f64::EPSILON * tap_to_distance(l + 1, &cfg);
        worst = worst.max((step - spacing).abs() / ulp);
    }
    let cm = (spacing * 1e4).round() / 100.0;
    outcome(
        worst <= 2.0 && cm == 4.26,
        format!("spacing {:.6} m ({cm} cm), worst step deviation {worst:.2} ulp", spacing),
    )
}

fn c4_doppler() -> Outcome {
    let cfg = PipelineConfig::default();
    let (dv, vmax) = doppler_resolution(&cfg.radio, &cfg.stft);
    outcome(
        (0.135..=0.145).contains(&dv) && (4.4..=4.7).contains(&vmax),
        format!("Δv = {dv:.4} m/s, v_max = {vmax:.3} m/s"),
    )
}

// ---------------------------------------------------------------- C5

fn c5_tones() -> Outcome {
    let mut cfg = PipelineConfig::default();
    cfg.md.t_window = 40;
    cfg.md.overlap = 0;
    let (dv, _) = doppler_resolution(&cfg.radio, &cfg.stft);
    let codebook = cfg.codebook.build().unwrap();
    let ap = cfg.aps[0];
    let (mut ok, mut total) = (0, 0);
    let mut worst: f64 = 0.0;
    for v in [-4.0, -2.0, -0.5, 0.5, 2.0, 4.0] {
        // Radial motion along boresight, receding for v > 0.
        let dur = 0.6;
        let y0 = if v > 0.0 { 1.0 } else { 1.0 - v * dur };
        let from = [ap.position[0], ap.position[1] + y0];
        let to = [from[0], from[1] + v * dur];
        let mut s = Subject::new(1, Activity::Walking, vec![
            Waypoint { position: from, t: 0.0 },
            Waypoint { position: to, t: dur },
        ]);
        s.body = Some(vec![Scatterer::rigid([0.0, 0.0], 1.0)]);
        let mut scene = Scene::empty(ROOM, vec![ap]);
        scene.subjects.push(s.clone());
        let frames = frame_count(dur, &cfg.radio);
        let points = truth_track_points(&s, &ap, step_count(frames, cfg.stft.sigma), &cfg);
        let mut src = SceneSource::new(scene, codebook.clone(), cfg.radio.clone(), 0, 5, frames).unwrap();
        for spec in extract_stream(&mut src, &codebook, &points, &cfg.stft, &cfg.md).unwrap() {
            for c in 0..spec.cols {
                let col = spec.column(c);
                let row = (0..col.len()).max_by(|&a, &b| col[a].total_cmp(&col[b])).unwrap();
                let err = (spec.velocity_axis[row] - v).abs();
                worst = worst.max(err);
                ok += usize::from(err <= dv);
                total += 1;
            }
        }
    }
    outcome(
        total > 0 && ok == total,
        format!("{ok}/{total} columns within one bin, worst {:.3} m/s (Δv {dv:.4})", worst),
    )
}

// ---------------------------------------------------------------- C6

fn c6_aoa() -> Outcome {
    let cfg = PipelineConfig::default();
    let codebook = cfg.codebook.build().unwrap();
    let ap = cfg.aps[0];
    let mut rng = stream(6, Purpose::Trial, 101, 0);
    let (mut sum, mut missed) = (0.0, 0);
    let n = 500;
    for i in 0..n {
        let r = rng.gen_range(1.0..5.0);
        let th: f64 = rng.gen_range(-40.0..40.0);
        let pos = ap.to_room([r * th.to_radians().cos(), r * th.to_radians().sin()]);
        let mut scene = Scene::empty(ROOM, vec![ap]);
        scene.static_reflectors.push(StaticReflector {
            position: pos,
            reflectivity: rng.gen_range(0.5..2.0),
        });
        let clean = synth_cir_frame(&scene, 0, &codebook, &cfg.radio, 0, i).unwrap();
        // 20 dB: strongest entry power over per-entry noise power.
        let peak = clean.data().iter().map(|z| z.norm()).fold(0.0, f64::max);
        scene.noise_std = peak / 10.0;
        let frame = synth_cir_frame(&scene, 0, &codebook, &cfg.radio, 0, i).unwrap();
        let amp = AmpMatrix::new(
            frame.taps(),
            frame.patterns(),
            frame.data().iter().map(|z| z.norm()).collect(),
        )
        .unwrap();
        let cands = detect_frame(&amp, &cfg.radio.tap_distances(), &cfg.detect);
        let truth = ap.polar(pos).1;
        match cands.iter().max_by(|a, b| a.strength.total_cmp(&b.strength)) {
            Some(c) => sum += (estimate_aoa(c, &codebook).unwrap() - truth).abs(),
            None => {
                missed += 1;
                sum += 90.0;
            }
        }
    }
    let mae = sum / n as f64;
    outcome(mae <= 3.0, format!("mean |error| {mae:.2}° over {n} scenes, {missed} undetected"))
}

// ---------------------------------------------------------------- C7

/// Peaks by scanning each maximal run of equal values.
fn peak_oracle(h: &[f64]) -> Vec<usize> {
    let mut out = Vec::new();
    let mut a = 0;
    while a < h.len() {
        let mut b = a;
        while b + 1 < h.len() && h[b + 1] == h[a] {
            b += 1;
        }
        if a > 0 && b + 1 < h.len() && h[a - 1] < h[a] && h[b + 1] < h[a] {
            out.push(a);
        }
        a = b + 1;
    }
    out
}

fn decision_oracle(per_ap: &[(u32, Vec<f64>)]) -> (usize, u32, f64) {
    let mut all: Vec<(f64, u32, usize)> = per_ap
        .iter()
        .flat_map(|(a, v)| v.iter().enumerate().map(move |(j, &p)| (p, *a, j)))
        .collect();
    all.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    (all[0].2, all[0].1, all[0].0)
}

fn c7_oracles() -> Outcome {
    let mut rng = stream(7, Purpose::Trial, 102, 0);
    let mut det_bad = 0;
    for _ in 0..1000 {
        let n = rng.gen_range(0..40);
        // Coarse levels make plateaus and exact ties common.
        let levels = rng.gen_range(2..8);
        let h: Vec<f64> = (0..n).map(|_| rng.gen_range(0..levels) as f64 * 0.01).collect();
        let distances: Vec<f64> = (0..n).map(|i| i as f64 * 0.05).collect();
        let cfg = DetectConfig {
            alpha_max: rng.gen_range(0.05..1.0),
            alpha_mean: rng.gen_range(0.1..2.5),
            alpha_abs: rng.gen_range(1e-4..0.05),
            ..DetectConfig::default()
        };
        let peaks = peak_oracle(&h);
        let th = if peaks.is_empty() {
            cfg.alpha_abs
        } else {
            let max = peaks.iter().map(|&i| h[i]).fold(f64::MIN, f64::max);
            let mean = peaks.iter().map(|&i| h[i]).sum::<f64>() / peaks.len() as f64;
            [cfg.alpha_max * max, cfg.alpha_mean * mean, cfg.alpha_abs].into_iter().fold(f64::MIN, f64::max)
        };
        let want: Vec<(usize, f64, f64)> =
            peaks.into_iter().filter(|&i| h[i] >= th).map(|i| (i, distances[i], h[i])).collect();
        let got: Vec<(usize, f64, f64)> =
            detect_candidates(&h, &distances, &cfg).iter().map(|c| (c.tap, c.distance, c.strength)).collect();
        det_bad += usize::from(got != want);
    }
    let mut fuse_bad = 0;
    for _ in 0..1000 {
        let n_ap = rng.gen_range(1..5);
        let k = rng.gen_range(1..6);
        let mut ids: Vec<u32> = (0..8).collect();
        let per_ap: Vec<(u32, Vec<f64>)> = (0..n_ap)
            .map(|_| {
                let id = ids.remove(rng.gen_range(0..ids.len()));
                let raw: Vec<f64> = (0..k).map(|_| rng.gen_range(0..4) as f64).collect();
                let s: f64 = raw.iter().sum::<f64>().max(1.0);
                (id, raw.iter().map(|r| r / s).collect())
            })
            .collect();
        let d = fuse_decisions(&per_ap).unwrap();
        fuse_bad += usize::from((d.label, d.source_ap, d.confidence) != decision_oracle(&per_ap));
    }
    outcome(
        det_bad == 0 && fuse_bad == 0,
        format!("detection mismatches {det_bad}/1000, decision-fusion mismatches {fuse_bad}/1000"),
    )
}

// ---------------------------------------------------------------- C8

fn jacobian_error(rng: &mut ChaCha8Rng) -> f64 {
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let r = rng.gen_range(0.3..8.0);
        let a: f64 = rng.gen_range(-3.1..3.1);
        let x = Vector4::new(r * a.cos(), r * a.sin(), rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
        let j = measurement_jacobian(&x).unwrap();
        for c in 0..4 {
            let eps = 1e-6;
            let mut xp = x;
            let mut xm = x;
            xp[c] += eps;
            xm[c] -= eps;
            let (zp, zm) = (measurement(&xp), measurement(&xm));
            let mut dz = zp - zm;
            dz[1] = (dz[1] + std::f64::consts::PI).rem_euclid(std::f64::consts::TAU) - std::f64::consts::PI;
            for row in 0..2 {
                worst = worst.max((j[(row, c)] - dz[row] / (2.0 * eps)).abs());
            }
        }
    }
    worst
}

/// Position RMSE of the confirmed track over steps after `burn_in`, for
/// noiseless range/azimuth observations of constant-velocity targets.
fn noiseless_cv_rmse(rng: &mut ChaCha8Rng) -> f64 {
    let cfg = TrackerConfig::default();
    let (mut se, mut n) = (0.0, 0usize);
    let burn_in = 100;
    for _ in 0..20 {
        let mut p: [f64; 2] = [rng.gen_range(2.0..4.0), rng.gen_range(-1.0..1.0)];
        let v = [rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5)];
        let mut tracker = Tracker::new(cfg.clone()).unwrap();
        for t in 0..400u64 {
            let obs = Observation {
                d: p[0].hypot(p[1]),
                theta: p[1].atan2(p[0]).to_degrees(),
                t,
            };
            let confirmed = tracker.step(&[obs], t).unwrap();
            if t >= burn_in {
                let est = confirmed.first().map(|tr| tr.state.position()).unwrap_or([f64::INFINITY; 2]);
                se += dist(est, p).powi(2);
                n += 1;
            }
            p = [p[0] + v[0] * cfg.dt, p[1] + v[1] * cfg.dt];
        }
    }
    (se / n as f64).sqrt()
}

/// Mean NEES over `runs` at the last of `steps` steps, with the truth
/// drawn from the filter's own model.
fn final_anees(rng: &mut ChaCha8Rng, runs: usize, steps: usize) -> f64 {
    let cfg = TrackerConfig::default();
    let dt = cfg.dt;
    let (a, b, c) = (dt.powi(3) / 3.0, dt.powi(2) / 2.0, dt);
    let mut q = Matrix4::zeros();
    for axis in 0..2 {
        q[(axis, axis)] = a * cfg.q;
        q[(axis, axis + 2)] = b * cfg.q;
        q[(axis + 2, axis)] = b * cfg.q;
        q[(axis + 2, axis + 2)] = c * cfg.q;
    }
    let lq = q.cholesky().unwrap().l();
    let rt = cfg.r_theta_deg;
    let observe = |x: &Vector4<f64>, rng: &mut ChaCha8Rng, t: u64| {
        let z = measurement(x);
        Observation {
            d: z[0] + cfg.r_d * gauss(rng),
            theta: z[1].to_degrees() + rt * gauss(rng),
            t,
        }
    };
    let mut total = 0.0;
    for _ in 0..runs {
        let v = [cfg.birth_velocity_std * gauss(rng), cfg.birth_velocity_std * gauss(rng)];
        let mut x = Vector4::new(4.0, rng.gen_range(-1.0..1.0), v[0], v[1]);
        let mut est: TrackState = cfg.birth_state(&observe(&x, rng, 0));
        let f = transition(dt);
        for t in 1..steps as u64 {
            let w = lq * Vector4::new(gauss(rng), gauss(rng), gauss(rng), gauss(rng));
            x = f * x + w;
            est = predict(&est, dt, &cfg).unwrap();
            est = update(&est, &observe(&x, rng, t), &cfg).unwrap();
        }
        let e = est.x - x;
        total += (e.transpose() * est.p.try_inverse().unwrap() * e)[0];
    }
    total / runs as f64
}

fn c8_ekf() -> Outcome {
    let mut rng = stream(8, Purpose::Trial, 103, 0);
    let jac = jacobian_error(&mut rng);
    let rmse = noiseless_cv_rmse(&mut rng);
    let runs = 200;
    let anees = final_anees(&mut rng, runs, 100);
    let chi = ChiSquared::new(4.0 * runs as f64).unwrap();
    let (lo, hi) = (chi.inverse_cdf(0.025) / runs as f64, chi.inverse_cdf(0.975) / runs as f64);
    outcome(
        jac <= 1e-6 && rmse <= 0.02 && (lo..=hi).contains(&anees),
        format!(
            "Jacobian error {jac:.1e}, noiseless RMSE {:.2} cm, ANEES {anees:.3} in [{lo:.3}, {hi:.3}]",
            rmse * 100.0
        ),
    )
}

// ---------------------------------------------------------------- shared scene plumbing

fn walker(id: u32, from: [f64; 2], to: [f64; 2], t0: f64, speed: f64, gait: f64) -> Subject {
    let t1 = t0 + dist(from, to) / speed;
    let mut s = Subject::new(id, Activity::Walking, vec![
        Waypoint { position: from, t: t0 },
        Waypoint { position: to, t: t1 },
    ]);
    s.gait_hz = Some(gait);
    s
}

/// Tracks of every registered AP that is part of the scene.
fn track_scene(scene: &Scene, cfg: &PipelineConfig, codebook: &Codebook, duration: f64, seed: u64) -> Vec<ApTracks> {
    let frames = frame_count(duration, &cfg.radio);
    cfg.aps
        .iter()
        .map(|ap| {
            let i = scene.aps.iter().position(|a| a.id == ap.id).unwrap();
            let mut src = SceneSource::new(scene.clone(), codebook.clone(), cfg.radio.clone(), i, seed, frames).unwrap();
            run_tracking(&mut src, codebook, ap, cfg).unwrap()
        })
        .collect()
}

fn one_ap(cfg: &PipelineConfig) -> PipelineConfig {
    let mut c = cfg.clone();
    c.aps.truncate(1);
    c
}

// ---------------------------------------------------------------- C9

/// Per-track sequences of the nearest subject within the detection radius.
fn identity_swaps(tracks: &ApTracks, truth: &[Vec<(u32, [f64; 2])>]) -> usize {
    let mut seen: BTreeMap<u32, BTreeSet<u32>> = BTreeMap::new();
    for (t, step) in tracks.steps.iter().enumerate() {
        for e in step {
            let nearest = truth[t]
                .iter()
                .map(|(id, p)| (dist(*p, e.position), *id))
                .filter(|(d, _)| *d <= DETECTION_RADIUS)
                .min_by(|a, b| a.0.total_cmp(&b.0));
            if let Some((_, id)) = nearest {
                seen.entry(e.id).or_default().insert(id);
            }
        }
    }
    seen.values().filter(|s| s.len() > 1).count()
}

fn per_subject_coverage(positions: &[Vec<[f64; 2]>], truth: &[Vec<(u32, [f64; 2])>]) -> BTreeMap<u32, f64> {
    let mut counts: BTreeMap<u32, (usize, usize)> = BTreeMap::new();
    for (est, gt) in positions.iter().zip(truth) {
        for (id, p) in gt {
            let c = counts.entry(*id).or_default();
            c.1 += 1;
            c.0 += usize::from(est.iter().any(|e| dist(*e, *p) <= DETECTION_RADIUS));
        }
    }
    counts.into_iter().map(|(id, (h, n))| (id, h as f64 / n as f64)).collect()
}

fn rate(positions: &[Vec<[f64; 2]>], truth: &[Vec<(u32, [f64; 2])>]) -> f64 {
    let gt: Vec<Vec<[f64; 2]>> = truth.iter().map(|s| s.iter().map(|p| p.1).collect()).collect();
    aysense::fusion::detection_rate(positions, &gt).unwrap()
}

fn parallel_walk(seed: u64, cfg: &PipelineConfig) -> (Scene, f64) {
    let mut rng = stream(seed, Purpose::SceneLayout, 900, 0);
    let xa = rng.gen_range(1.1..1.7);
    let y0 = rng.gen_range(1.4..2.0);
    let len = rng.gen_range(3.0..3.6);
    let speed = rng.gen_range(0.8..1.2);
    let mut scene = Scene::empty(ROOM, cfg.aps.clone());
    scene.noise_std = 2e-3;
    scene.cfo_range_hz = 40.0;
    for (id, x) in [(1, xa), (2, xa + 1.5)] {
        let gait = rng.gen_range(1.2..1.8);
        scene.subjects.push(walker(id, [x, y0], [x, y0 + len], 0.1, speed, gait));
    }
    (scene, 0.1 + len / speed + 0.3)
}

fn crowd(seed: u64, cfg: &PipelineConfig) -> (Scene, f64) {
    let mut rng = stream(seed, Purpose::SceneLayout, 901, 0);
    let mut scene = Scene::empty(ROOM, cfg.aps.clone());
    scene.noise_std = 2e-3;
    scene.cfo_range_hz = 40.0;
    let duration = 5.0;
    let pick = |rng: &mut ChaCha8Rng| [rng.gen_range(0.6..5.5), rng.gen_range(1.2..6.5)];
    for id in 1..=5 {
        let mut t = 0.1 + 0.05 * id as f64;
        let mut p = pick(&mut rng);
        let mut wps = vec![Waypoint { position: p, t }];
        while t < duration {
            let q = pick(&mut rng);
            t += dist(p, q) / rng.gen_range(0.6..1.2);
            wps.push(Waypoint { position: q, t });
            p = q;
        }
        let mut s = Subject::new(id, Activity::Walking, wps);
        s.gait_hz = Some(rng.gen_range(1.2..1.8));
        scene.subjects.push(s);
    }
    (scene, duration)
}

fn c9_multi_subject() -> Outcome {
    let cfg = PipelineConfig::default();
    let codebook = cfg.codebook.build().unwrap();
    let single = one_ap(&cfg);
    let mut clean = 0;
    let mut worst_cover: f64 = 1.0;
    for seed in 0..100 {
        let (scene, duration) = parallel_walk(seed, &cfg);
        let tracks = &track_scene(&scene, &single, &codebook, duration, seed)[0];
        let truth = truth_positions(&scene, tracks.steps.len() as u64, &cfg);
        let swaps = identity_swaps(tracks, &truth);
        let cover = per_subject_coverage(&tracks.positions(), &truth);
        let min_cover = cover.values().cloned().fold(1.0, f64::min);
        worst_cover = worst_cover.min(min_cover);
        clean += usize::from(swaps == 0 && min_cover >= 0.75);
    }
    let mut increased = 0;
    let mut gains = Vec::new();
    for seed in 0..20 {
        let (scene, duration) = crowd(seed, &cfg);
        let per_ap = track_scene(&scene, &cfg, &codebook, duration, seed);
        let truth = truth_positions(&scene, per_ap[0].steps.len() as u64, &cfg);
        let r1 = rate(&per_ap[0].positions(), &truth);
        let ru = rate(&union_positions(&per_ap), &truth);
        gains.push((r1, ru));
        increased += usize::from(ru > r1);
    }
    let mean1 = gains.iter().map(|g| g.0).sum::<f64>() / gains.len() as f64;
    let meanu = gains.iter().map(|g| g.1).sum::<f64>() / gains.len() as f64;
    outcome(
        clean >= 90 && increased == 20,
        format!(
            "parallel walk: {clean}/100 seeds swap-free with both subjects tracked ≥ 75% (worst coverage {:.2}); \
             5 subjects: rate rises with AP 2 in {increased}/20 seeds (mean {mean1:.3} → {meanu:.3})",
            worst_cover
        ),
    )
}

// ---------------------------------------------------------------- C10

/// Mean distance from the truth to the nearest estimate within the pairing
/// radius, over the steps that have one.
fn mean_error(positions: &[Vec<[f64; 2]>], truth: &[Vec<(u32, [f64; 2])>], radius: f64) -> Option<f64> {
    let errs: Vec<f64> = positions
        .iter()
        .zip(truth)
        .filter_map(|(est, gt)| {
            let p = gt.first()?.1;
            est.iter().map(|e| dist(*e, p)).filter(|d| *d <= radius).min_by(f64::total_cmp)
        })
        .collect();
    (!errs.is_empty()).then(|| errs.iter().sum::<f64>() / errs.len() as f64)
}

fn c10_position_fusion() -> Outcome {
    let cfg = PipelineConfig::default();
    let codebook = cfg.codebook.build().unwrap();
    let radius = cfg.fusion.pairing_radius;
    let (mut wins, mut single_sum, mut fused_sum) = (0, 0.0, 0.0);
    let seeds = 20;
    for seed in 0..seeds {
        // Between and in front of the APs, where their views differ most.
        let mut rng = stream(seed, Purpose::SceneLayout, 902, 0);
        let centre = [(cfg.aps[0].position[0] + cfg.aps[1].position[0]) / 2.0, 1.3];
        let pos = [centre[0] + rng.gen_range(-0.2..0.2), centre[1] + rng.gen_range(-0.2..0.2)];
        let mut scene = Scene::empty(ROOM, cfg.aps.clone());
        scene.noise_std = 2e-3;
        scene.cfo_range_hz = 40.0;
        let mut s = Subject::stationary(1, Activity::Sitting, pos, 0.1);
        s.gait_hz = Some(rng.gen_range(0.4..0.6));
        scene.subjects.push(s);
        let duration = 6.0;
        let per_ap = track_scene(&scene, &cfg, &codebook, duration, seed);
        let truth = truth_positions(&scene, per_ap[0].steps.len() as u64, &cfg);
        let singles: Vec<Option<f64>> = per_ap.iter().map(|a| mean_error(&a.positions(), &truth, radius)).collect();
        let fused = mean_error(&fused_positions(&per_ap, &cfg), &truth, radius);
        if let (Some(a), Some(b), Some(f)) = (singles[0], singles[1], fused) {
            let single = (a + b) / 2.0;
            single_sum += single;
            fused_sum += f;
            wins += usize::from(f <= single);
        }
    }
    let need = (0.95 * seeds as f64).ceil() as usize;
    outcome(
        wins >= need,
        format!(
            "averaged ≤ single-AP error in {wins}/{seeds} seeds (mean {:.1} cm → {:.1} cm)",
            single_sum / seeds as f64 * 100.0,
            fused_sum / seeds as f64 * 100.0
        ),
    )
}

// ---------------------------------------------------------------- C11

fn c11_gradients() -> Outcome {
    let start = Instant::now();
    let spec = NetworkSpec {
        input_h: 16,
        input_w: 16,
        filters: vec![2, 2],
        dense: 8,
        n_classes: 3,
        dropout_blocks: 0.5,
        dropout_dense: 0.2,
    };
    let mut net = Network::<f64>::new(spec, 11).unwrap();
    let mut rng = stream(11, Purpose::Trial, 104, 0);
    for (m, v) in net.running_stats_mut() {
        m.iter_mut().for_each(|x| *x = rng.gen_range(-0.3..0.3));
        v.iter_mut().for_each(|x| *x = rng.gen_range(0.5..2.0));
    }
    for p in net.params_mut() {
        p.iter_mut().for_each(|v| *v += rng.gen_range(-0.1..0.1));
    }
    let data = (0..3 * 16 * 16).map(|_| rng.gen_range(0.0..1.0)).collect();
    let x = Tensor::new(vec![3, 1, 16, 16], data).unwrap();
    let labels = [0, 2, 1];
    // Dropout off and batch norm on running statistics.
    let mode = Mode::EVAL;
    let (_, grads, _) = net.loss_and_grads(&x, &labels, mode, None).unwrap();
    let eps = 1e-4;
    let (mut worst, mut count): (f64, usize) = (0.0, 0);
    for i in 0..net.params().len() {
        for j in 0..net.params()[i].len() {
            let orig = net.params()[i][j];
            net.params_mut()[i][j] = orig + eps;
            let lp = net.loss_and_grads(&x, &labels, mode, None).unwrap().0;
            net.params_mut()[i][j] = orig - eps;
            let lm = net.loss_and_grads(&x, &labels, mode, None).unwrap().0;
            net.params_mut()[i][j] = orig;
            let fd = (lp - lm) / (2.0 * eps);
            let g = grads[i][j];
            worst = worst.max((g - fd).abs() / g.abs().max(fd.abs()).max(1e-7));
            count += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-4 && secs < 120.0,
        format!("{count} parameters, worst relative error {worst:.2e}, {secs:.1} s"),
    )
}

// ---------------------------------------------------------------- C12

const ACTIVITIES: [Activity; 3] = [Activity::Walking, Activity::Sitting, Activity::Waving];

fn dataset_spec(scenes_per_class: usize, split: u64) -> ActivityDatasetSpec {
    ActivityDatasetSpec {
        activities: ACTIVITIES.to_vec(),
        scenes_per_class,
        windows_per_scene: 10,
        noise_std: 2e-3,
        cfo_range_hz: 40.0,
        split,
    }
}

struct Trained {
    net: Network<f32>,
    train_accuracy: f64,
    held_out_accuracy: f64,
    held_out: usize,
    secs: f64,
}

/// The activity model, trained once and shared by the criteria that need it.
fn trained() -> &'static Trained {
    static MODEL: OnceLock<Trained> = OnceLock::new();
    MODEL.get_or_init(|| {
        let start = Instant::now();
        let cfg = PipelineConfig::default();
        let data: LabeledDataset = synthetic_activity_dataset(&dataset_spec(6, 0), &cfg, 1).unwrap();
        let test = synthetic_activity_dataset(&dataset_spec(2, 1), &cfg, 1).unwrap();
        let spec = NetworkSpec::standard(data.rows, data.cols, data.n_classes());
        let mut net = Network::<f32>::new(spec, cfg.train.seed).unwrap();
        train(&mut net, &data, &cfg.train).unwrap();
        let (train_accuracy, _) = evaluate(&net, &data).unwrap();
        let (held_out_accuracy, _) = evaluate(&net, &test).unwrap();
        Trained {
            net,
            train_accuracy,
            held_out_accuracy,
            held_out: test.len(),
            secs: start.elapsed().as_secs_f64(),
        }
    })
}

fn c12_classification() -> Outcome {
    let cfg = PipelineConfig::default();
    let m = trained();
    outcome(
        m.train_accuracy >= 0.9 && m.held_out_accuracy >= 0.8 && m.secs < 600.0,
        format!(
            "60/class, {} epochs at lr {:e}: train {:.1}%, held-out {:.1}% of {}, {:.0} s",
            cfg.train.epochs,
            cfg.train.lr,
            m.train_accuracy * 100.0,
            m.held_out_accuracy * 100.0,
            m.held_out,
            m.secs
        ),
    )
}

// ---------------------------------------------------------------- C13

struct Swap {
    scene: Scene,
    duration: f64,
    switch_s: f64,
    /// (subject id, class before, class after) as label indices.
    classes: Vec<(u32, usize, usize)>,
}

fn label(a: Activity) -> usize {
    ACTIVITIES.iter().position(|b| *b == a).unwrap()
}

/// S1 paces 2 m away from the APs and part of the way back, then waves.
/// S2 sits, then paces 1.8 m towards the APs and back. Both stay within
/// 1.5 to 4 m of the APs, where the activity set was drawn.
fn activity_swap(seed: u64, cfg: &PipelineConfig) -> Swap {
    let mut rng = stream(seed, Purpose::SceneLayout, 903, 0);
    let switch_s = 4.0;
    let duration = 8.0;
    let a = [rng.gen_range(1.2..1.7), rng.gen_range(1.3..1.7)];
    let b = [a[0], a[1] + 2.0];
    let speed = rng.gen_range(0.8..1.0);
    let turn = 0.1 + 2.0 / speed;
    let back = (switch_s - turn) * speed / 2.0;
    let stop = [a[0], b[1] + (a[1] - b[1]) * back];
    let mut s1 = Subject::new(1, Activity::Walking, vec![
        Waypoint { position: a, t: 0.1 },
        Waypoint { position: b, t: turn },
        Waypoint { position: stop, t: switch_s },
    ]);
    s1.schedule.push(ActivitySegment {
        start_s: switch_s,
        activity: Activity::Waving,
    });
    s1.gait_hz = Some(rng.gen_range(1.3..1.7));
    let seat = [rng.gen_range(3.5..4.0), rng.gen_range(3.0..3.6)];
    let near = [seat[0], seat[1] - 1.8];
    let speed = rng.gen_range(0.8..1.0);
    let mut s2 = Subject::new(2, Activity::Sitting, vec![
        Waypoint { position: seat, t: 0.1 },
        Waypoint { position: seat, t: switch_s },
        Waypoint { position: near, t: switch_s + 1.8 / speed },
        Waypoint { position: seat, t: switch_s + 3.6 / speed },
    ]);
    s2.schedule.push(ActivitySegment {
        start_s: switch_s,
        activity: Activity::Walking,
    });
    s2.gait_hz = Some(rng.gen_range(1.3..1.7));
    let mut scene = Scene::empty(ROOM, cfg.aps.clone());
    scene.noise_std = 2e-3;
    scene.cfo_range_hz = 40.0;
    scene.subjects = vec![s1, s2];
    Swap {
        scene,
        duration,
        switch_s,
        classes: vec![
            (1, label(Activity::Walking), label(Activity::Waving)),
            (2, label(Activity::Sitting), label(Activity::Walking)),
        ],
    }
}

fn c13_end_to_end() -> Outcome {
    let cfg = PipelineConfig::default();
    let codebook = cfg.codebook.build().unwrap();
    let net = &trained().net;
    let seeds = 20;
    let (mut passed, mut maintained, mut switched) = (0, 0, 0);
    for seed in 0..seeds {
        let sw = activity_swap(seed, &cfg);
        let frames = frame_count(sw.duration, &cfg.radio);
        let mut sources: Vec<(ApRegistration, SceneSource)> = cfg
            .aps
            .iter()
            .enumerate()
            .map(|(i, ap)| {
                (*ap, SceneSource::new(sw.scene.clone(), codebook.clone(), cfg.radio.clone(), i, seed, frames).unwrap())
            })
            .collect();
        let mut refs: Vec<(ApRegistration, &mut dyn FrameSource)> =
            sources.iter_mut().map(|(a, s)| (*a, s as &mut dyn FrameSource)).collect();
        let out = run_e2e(&mut refs, &codebook, &cfg, net).unwrap();
        let steps = out.tracks[0].steps.len() as u64;
        let truth = truth_positions(&sw.scene, steps, &cfg);
        let fused = fused_positions(&out.tracks, &cfg);
        let switch_step = (sw.switch_s / cfg.step_s()).ceil() as u64;

        let mut all_kept = true;
        let mut all_switched = true;
        for &(id, before, after) in &sw.classes {
            // Maintained: matched at ≥ 90% of the steps after first confirmation.
            let matched: Vec<bool> = (0..steps as usize)
                .map(|t| {
                    let p = truth[t].iter().find(|e| e.0 == id).map(|e| e.1);
                    p.is_some_and(|p| fused[t].iter().any(|e| dist(*e, p) <= DETECTION_RADIUS))
                })
                .collect();
            let kept = match matched.iter().position(|m| *m) {
                Some(first) => {
                    let rest = &matched[first..];
                    rest.iter().filter(|m| **m).count() as f64 / rest.len() as f64 >= 0.9
                }
                None => false,
            };
            all_kept &= kept;
            // This subject's window decisions, in end-step order.
            let timeline: Vec<(u64, usize)> = out
                .decisions
                .iter()
                .filter(|d| {
                    let p = truth[d.t_end as usize].iter().find(|e| e.0 == id).map(|e| e.1);
                    p.is_some_and(|p| dist(d.position, p) <= DETECTION_RADIUS)
                })
                .map(|d| (d.t_end, d.decision.label))
                .collect();
            // The first window of the new class once the old one was seen
            // must lie within ±3 windows of the first window ending after
            // the switch. Windows straddling the switch may hold either.
            let anchor = timeline.iter().position(|(t, _)| *t >= switch_step);
            let first_after = timeline
                .iter()
                .position(|(_, l)| *l == before)
                .and_then(|j| (j + 1..timeline.len()).find(|&i| timeline[i].1 == after));
            let changes = match (anchor, first_after) {
                (Some(w0), Some(i)) => (i as i64 - w0 as i64).abs() <= 3,
                _ => false,
            };
            all_switched &= changes;
        }
        maintained += usize::from(all_kept);
        switched += usize::from(all_switched);
        passed += usize::from(all_kept && all_switched);
    }
    let need = (0.8 * seeds as f64).ceil() as usize;
    outcome(
        passed >= need,
        format!(
            "{passed}/{seeds} seeds pass (tracks maintained in {maintained}, class switch within ±3 windows in {switched})"
        ),
    )
}

// ---------------------------------------------------------------- C14

/// Every file below `dir` with its bytes, keyed by relative path.
fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

/// Runs every command twice into separate trees and compares them.
fn run_all_commands(root: &Path, seed: u64) -> BTreeMap<String, Vec<u8>> {
    let mut cfg = PipelineConfig::default();
    cfg.train.epochs = 2;
    cfg.train.seed = seed;
    let (scene, duration) = parallel_walk(seed, &cfg);
    let scene = SceneFile::from_scene(&scene, duration.min(2.5));
    let sim = root.join("sim");
    let captures = commands::simulate(&scene, &cfg, seed, &sim).unwrap();
    let tracks = root.join("track");
    commands::track(&captures, &cfg, Some(&scene), &tracks).unwrap();
    commands::mud(&captures, &tracks, &cfg, &root.join("mud")).unwrap();
    let mut spec = dataset_spec(1, 0);
    spec.windows_per_scene = 2;
    let manifest = commands::dataset(&spec, &cfg, seed, &root.join("data")).unwrap();
    let checkpoint = root.join("model").join("net.bin");
    commands::train_cmd(&manifest, &cfg, &checkpoint).unwrap();
    commands::eval_cmd(&manifest, &checkpoint, &root.join("eval")).unwrap();
    let (net, labels) = commands::load_model(&checkpoint).unwrap();
    commands::e2e(&scene, &cfg, &net, &labels, seed, &root.join("e2e")).unwrap();
    snapshot(root)
}

fn c14_determinism(suite_start: Instant) -> Outcome {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let c = tempfile::tempdir().unwrap();
    let first = run_all_commands(a.path(), 3);
    let second = run_all_commands(b.path(), 3);
    let other = run_all_commands(c.path(), 4);
    let differing: Vec<&String> = first.keys().filter(|k| first.get(*k) != second.get(*k)).collect();
    let same_files = first.keys().eq(second.keys());
    let seed_matters = first.get("sim/ap1.cir") != other.get("sim/ap1.cir");
    let secs = suite_start.elapsed().as_secs_f64();
    outcome(
        same_files && differing.is_empty() && seed_matters && secs < 900.0,
        format!(
            "{} files from simulate/track/mud/dataset/train/eval/e2e, {} differ between runs; \
             acceptance run {secs:.0} s",
            first.len(),
            differing.len()
        ),
    )
}

fn main() -> ExitCode {
    let suite_start = Instant::now();
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let criteria: Vec<(&str, &str, Box<dyn Fn() -> Outcome>)> = vec![
        ("c1", "Golay complementarity", Box::new(c1_golay)),
        ("c2", "CIR round trip", Box::new(c2_cir_round_trip)),
        ("c3", "distance mapping", Box::new(c3_tap_spacing)),
        ("c4", "Doppler formulas", Box::new(c4_doppler)),
        ("c5", "tone localization", Box::new(c5_tones)),
        ("c6", "angle of arrival", Box::new(c6_aoa)),
        ("c7", "detection and fusion oracles", Box::new(c7_oracles)),
        ("c8", "EKF", Box::new(c8_ekf)),
        ("c9", "multi-subject tracking", Box::new(c9_multi_subject)),
        ("c10", "position fusion", Box::new(c10_position_fusion)),
        ("c11", "CNN gradients", Box::new(c11_gradients)),
        ("c12", "synthetic classification", Box::new(c12_classification)),
        ("c13", "end to end", Box::new(c13_end_to_end)),
        ("c14", "determinism", Box::new(move || c14_determinism(suite_start))),
    ];
    let mut failed = Vec::new();
    for (key, name, run) in &criteria {
        if !filters.is_empty() && !filters.iter().any(|f| f == key) {
            continue;
        }
        let start = Instant::now();
        let o = run();
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!(
            "{verdict} {:>3} {name}: {} [{:.1} s]",
            key.to_uppercase(),
            o.detail,
            start.elapsed().as_secs_f64()
        );
        if !o.pass {
            failed.push(*key);
        }
    }
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("failed: {}", failed.join(", "));
        ExitCode::FAILURE
    }
}
