//! Orchestration of the per-AP stages and their fusion.
//!
//! One tracking step spans σ packets: step `t` processes packet `tσ`. The
//! tracking pass reads only those packets (plus the background window), so
//! it is cheap on random-access sources. The µD pass reads every packet.

use std::collections::BTreeMap;

use crate::aoa::estimate_aoa;
use crate::classify::{LabeledDataset, Mode, Network, Tensor};
use crate::config::{DecisionFusion, PipelineConfig, PositionFusion};
use crate::detect::{detect_frame, subtract_background, BackgroundEstimator, BackgroundMode};
use crate::fusion::{fuse_decisions, fuse_track_sets, ApRegistration, FusedDecision};
use crate::microdoppler::{extract_stream, preprocess, Spectrogram, TrackPoint};
use crate::rng::{stream, Purpose};
use crate::scenesim::{Activity, Codebook, Scene, SceneSource, Subject, Waypoint};
use crate::source::FrameSource;
use crate::track::{Observation, Tracker};
use crate::waveform::RadioConfig;
use crate::{Error, Result};

/// One confirmed track at one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackEstimate {
    pub t: u64,
    pub id: u32,
    /// AP-local position and velocity.
    pub local: [f64; 2],
    pub local_velocity: [f64; 2],
    /// Room-frame position and velocity.
    pub position: [f64; 2],
    pub velocity: [f64; 2],
}

/// Tracking output of one AP: the confirmed tracks at every step.
#[derive(Debug, Clone, PartialEq)]
pub struct ApTracks {
    pub ap: ApRegistration,
    pub steps: Vec<Vec<TrackEstimate>>,
}

impl ApTracks {
    pub fn track_points(&self) -> Vec<TrackPoint> {
        self.steps
            .iter()
            .flatten()
            .map(|e| TrackPoint {
                t: e.t,
                id: e.id,
                position: e.local,
            })
            .collect()
    }

    /// Room-frame positions of the confirmed tracks, per step.
    pub fn positions(&self) -> Vec<Vec<[f64; 2]>> {
        self.steps
            .iter()
            .map(|s| s.iter().map(|e| e.position).collect())
            .collect()
    }

    pub fn at(&self, t: u64, id: u32) -> Option<&TrackEstimate> {
        self.steps.get(t as usize)?.iter().find(|e| e.id == id)
    }
}

/// Tracking steps covering `frames` packets: every t with tσ < frames.
pub fn step_count(frames: u64, sigma: usize) -> u64 {
    frames.div_ceil(sigma as u64)
}

/// Packets in a capture of `duration_s`, rounded down.
pub fn frame_count(duration_s: f64, radio: &RadioConfig) -> u64 {
    // The small slack keeps exact multiples of T_c from rounding down.
    (duration_s / radio.packet_interval_s * (1.0 + 1e-12)).floor() as u64
}

/// Background removal, detection, AoA and tracking over a whole source.
pub fn run_tracking(
    src: &mut dyn FrameSource,
    codebook: &Codebook,
    ap: &ApRegistration,
    cfg: &PipelineConfig,
) -> Result<ApTracks> {
    let radio = src.radio().clone();
    if codebook.len() != radio.patterns {
        return Err(Error::invalid(
            "codebook size differs from the capture's pattern count",
        ));
    }
    let frames = src.frame_count();
    let sigma = cfg.stft.sigma as u64;
    let distances = radio.tap_distances();
    let mut bg = BackgroundEstimator::new(&cfg.detect);
    let sliding = cfg.detect.background == BackgroundMode::Sliding;
    if !sliding {
        for k in 0..frames.min(cfg.detect.k_static as u64) {
            bg.push(&src.frame(k)?)?;
        }
    }
    let mut tracker = Tracker::new(cfg.tracker.clone())?;
    let mut steps = Vec::new();
    for t in 0..step_count(frames, cfg.stft.sigma) {
        let frame = src.frame(t * sigma)?;
        if sliding {
            bg.push(&frame)?;
        }
        let mut obs = Vec::new();
        if bg.is_ready() || (!sliding && frames > 0) {
            let fg = subtract_background(&frame, &bg.profile()?)?;
            for c in detect_frame(&fg, &distances, &cfg.detect) {
                // An all-zero power row has no direction; skip it.
                if let Ok(theta) = estimate_aoa(&c, codebook) {
                    obs.push(Observation {
                        d: c.distance,
                        theta,
                        t,
                    });
                }
            }
        }
        let confirmed = tracker.step(&obs, t)?;
        steps.push(
            confirmed
                .iter()
                .map(|tr| {
                    let local = tr.state.position();
                    let local_velocity = tr.state.velocity();
                    TrackEstimate {
                        t,
                        id: tr.id,
                        local,
                        local_velocity,
                        position: ap.to_room(local),
                        velocity: ap.rotate_to_room(local_velocity),
                    }
                })
                .collect(),
        );
    }
    Ok(ApTracks { ap: *ap, steps })
}

/// Preprocessed µD spectrograms of every confirmed track of one AP.
pub fn run_md(
    src: &mut dyn FrameSource,
    codebook: &Codebook,
    tracks: &ApTracks,
    cfg: &PipelineConfig,
) -> Result<Vec<Spectrogram>> {
    spectrograms_along(src, codebook, &tracks.track_points(), cfg)
}

/// Preprocessed spectrograms along arbitrary AP-local track points.
pub fn spectrograms_along(
    src: &mut dyn FrameSource,
    codebook: &Codebook,
    points: &[TrackPoint],
    cfg: &PipelineConfig,
) -> Result<Vec<Spectrogram>> {
    let raw = extract_stream(src, codebook, points, &cfg.stft, &cfg.md)?;
    Ok(raw.iter().map(|s| preprocess(s, &cfg.md)).collect())
}

/// Step of the last column of a spectrogram.
pub fn window_end(spec: &Spectrogram) -> u64 {
    spec.t0 + spec.cols as u64 - 1
}

/// Class probabilities of each spectrogram, in input order.
pub fn classify_spectrograms(net: &Network<f32>, specs: &[Spectrogram]) -> Result<Vec<Vec<f64>>> {
    let ns = net.spec();
    let k = ns.n_classes;
    let mut out = Vec::with_capacity(specs.len());
    for chunk in specs.chunks(16) {
        let mut data = Vec::with_capacity(chunk.len() * ns.input_h * ns.input_w);
        for s in chunk {
            if s.rows != ns.input_h || s.cols != ns.input_w {
                return Err(Error::invalid(format!(
                    "spectrogram is {}x{}, network expects {}x{}",
                    s.rows, s.cols, ns.input_h, ns.input_w
                )));
            }
            data.extend(s.values.iter().map(|&v| v as f32));
        }
        let input = Tensor::new(vec![chunk.len(), 1, ns.input_h, ns.input_w], data)?;
        let probs = net.forward(&input, Mode::EVAL, None)?;
        out.extend(
            probs
                .data()
                .chunks(k)
                .map(|p| p.iter().map(|&v| v as f64).collect()),
        );
    }
    Ok(out)
}

/// Decision for one subject at the end step of one spectrogram window.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowDecision {
    pub t_end: u64,
    pub position: [f64; 2],
    /// (AP id, track id) of the tracks combined into this subject.
    pub members: Vec<(u32, u32)>,
    /// Class probabilities per contributing AP.
    pub probabilities: Vec<(u32, Vec<f64>)>,
    pub decision: FusedDecision,
}

/// Groups the per-AP windows by end step, pairs the tracks across APs at
/// that step and fuses their positions and classifier outputs.
pub fn fuse_windows(
    per_ap: &[(ApTracks, Vec<Spectrogram>, Vec<Vec<f64>>)],
    cfg: &PipelineConfig,
) -> Result<Vec<WindowDecision>> {
    // t_end → ap index → [(track id, position, probabilities)]
    type Entry<'a> = (u32, [f64; 2], &'a Vec<f64>);
    let mut by_end: BTreeMap<u64, Vec<Vec<Entry>>> = BTreeMap::new();
    for (a, (tracks, specs, probs)) in per_ap.iter().enumerate() {
        if specs.len() != probs.len() {
            return Err(Error::invalid("one probability vector per spectrogram"));
        }
        for (s, p) in specs.iter().zip(probs) {
            let te = window_end(s);
            let est = tracks.at(te, s.subject).ok_or_else(|| {
                Error::invalid(format!("track {} has no estimate at step {te}", s.subject))
            })?;
            by_end
                .entry(te)
                .or_insert_with(|| vec![Vec::new(); per_ap.len()])[a]
                .push((s.subject, est.position, p));
        }
    }
    let mut out = Vec::new();
    for (te, entries) in by_end {
        let sets: Vec<(u32, Vec<(u32, [f64; 2])>)> = per_ap
            .iter()
            .zip(&entries)
            .map(|((tr, _, _), es)| (tr.ap.id, es.iter().map(|e| (e.0, e.1)).collect()))
            .collect();
        for f in fuse_track_sets(&sets, cfg.fusion.pairing_radius) {
            let probabilities: Vec<(u32, Vec<f64>)> = f
                .members
                .iter()
                .map(|&(ap, id)| {
                    let a = per_ap.iter().position(|p| p.0.ap.id == ap).unwrap();
                    let e = entries[a].iter().find(|e| e.0 == id).unwrap();
                    (ap, e.2.clone())
                })
                .collect();
            let decision = match cfg.fusion.decisions {
                DecisionFusion::Max => fuse_decisions(&probabilities)?,
                DecisionFusion::Single => fuse_decisions(&probabilities[..1])?,
            };
            let position = match cfg.fusion.positions {
                PositionFusion::Average => f.position,
                PositionFusion::Single => {
                    let (ap, id) = f.members[0];
                    let a = per_ap.iter().position(|p| p.0.ap.id == ap).unwrap();
                    entries[a].iter().find(|e| e.0 == id).unwrap().1
                }
            };
            out.push(WindowDecision {
                t_end: te,
                position,
                members: f.members,
                probabilities,
                decision,
            });
        }
    }
    Ok(out)
}

/// Room-frame positions of the subjects at every step after cross-AP
/// pairing, combined per the fusion config.
pub fn fused_positions(per_ap: &[ApTracks], cfg: &PipelineConfig) -> Vec<Vec<[f64; 2]>> {
    let steps = per_ap.iter().map(|a| a.steps.len()).min().unwrap_or(0);
    (0..steps)
        .map(|t| {
            let sets: Vec<(u32, Vec<(u32, [f64; 2])>)> = per_ap
                .iter()
                .map(|a| (a.ap.id, a.steps[t].iter().map(|e| (e.id, e.position)).collect()))
                .collect();
            fuse_track_sets(&sets, cfg.fusion.pairing_radius)
                .into_iter()
                .map(|f| match cfg.fusion.positions {
                    PositionFusion::Average => f.position,
                    PositionFusion::Single => {
                        let (ap, id) = f.members[0];
                        let a = per_ap.iter().find(|a| a.ap.id == ap).unwrap();
                        a.at(t as u64, id).unwrap().position
                    }
                })
                .collect()
        })
        .collect()
}

/// Every AP's confirmed tracks pooled, per step.
pub fn union_positions(per_ap: &[ApTracks]) -> Vec<Vec<[f64; 2]>> {
    let steps = per_ap.iter().map(|a| a.steps.len()).min().unwrap_or(0);
    (0..steps)
        .map(|t| per_ap.iter().flat_map(|a| a.steps[t].iter().map(|e| e.position)).collect())
        .collect()
}

/// Everything an end-to-end run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct E2eOutput {
    pub tracks: Vec<ApTracks>,
    pub spectrograms: Vec<Vec<Spectrogram>>,
    pub decisions: Vec<WindowDecision>,
}

/// Tracking, µD extraction and classification on every AP, then fusion.
/// APs are processed in the given order and merged by that order.
pub fn run_e2e(
    sources: &mut [(ApRegistration, &mut dyn FrameSource)],
    codebook: &Codebook,
    cfg: &PipelineConfig,
    net: &Network<f32>,
) -> Result<E2eOutput> {
    let mut per_ap = Vec::with_capacity(sources.len());
    for (ap, src) in sources.iter_mut() {
        let tracks = run_tracking(*src, codebook, ap, cfg)?;
        let specs = run_md(*src, codebook, &tracks, cfg)?;
        let probs = classify_spectrograms(net, &specs)?;
        per_ap.push((tracks, specs, probs));
    }
    let decisions = fuse_windows(&per_ap, cfg)?;
    let (tracks, spectrograms) = per_ap.into_iter().map(|(t, s, _)| (t, s)).unzip();
    Ok(E2eOutput {
        tracks,
        spectrograms,
        decisions,
    })
}

/// True torso positions `(subject id, room position)` of the present
/// subjects at every tracking step.
pub fn truth_positions(scene: &Scene, steps: u64, cfg: &PipelineConfig) -> Vec<Vec<(u32, [f64; 2])>> {
    let dt = cfg.step_s();
    (0..steps)
        .map(|t| {
            let time = t as f64 * dt;
            scene
                .subjects
                .iter()
                .filter(|s| s.is_present(time))
                .map(|s| (s.id, s.kinematics(time).0))
                .collect()
        })
        .collect()
}

/// Track points that follow a subject's true torso in the frame of `ap`.
pub fn truth_track_points(subject: &Subject, ap: &ApRegistration, steps: u64, cfg: &PipelineConfig) -> Vec<TrackPoint> {
    let dt = cfg.step_s();
    (0..steps)
        .filter_map(|t| {
            let time = t as f64 * dt;
            subject.is_present(time).then(|| TrackPoint {
                t,
                id: subject.id,
                position: ap.to_local(subject.kinematics(time).0),
            })
        })
        .collect()
}

/// Parameters of a synthetic single-subject activity dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivityDatasetSpec {
    pub activities: Vec<Activity>,
    /// Independent scenes per activity, each at its own random position.
    pub scenes_per_class: usize,
    /// Consecutive (overlapping) windows taken from each scene.
    pub windows_per_scene: usize,
    pub noise_std: f64,
    pub cfo_range_hz: f64,
    /// Distinguishes datasets drawn with the same root seed.
    pub split: u64,
}

impl ActivityDatasetSpec {
    /// Scene length that yields exactly `windows_per_scene` windows.
    pub fn scene_steps(&self, cfg: &PipelineConfig) -> u64 {
        let cols = cfg.md.t_window + (self.windows_per_scene.max(1) - 1) * cfg.md.hop();
        cfg.stft.lag() + cols as u64
    }
}

/// A random single-subject scene in front of the first configured AP.
///
/// The subject stands 1.5 to 4.5 m from the AP within ±30° of boresight.
/// Walkers and runners pace back and forth along a random heading; the
/// others stay put.
pub fn activity_scene(activity: Activity, duration_s: f64, cfg: &PipelineConfig, spec: &ActivityDatasetSpec, seed: u64, index: u64) -> Result<Scene> {
    use rand::Rng;
    let ap = *cfg
        .aps
        .first()
        .ok_or_else(|| Error::invalid("no AP registered"))?;
    let mut rng = stream(seed, Purpose::SceneLayout, spec.split, index);
    let room = [6.1, 7.7];
    let inside = |p: [f64; 2]| p[0] > 0.3 && p[0] < room[0] - 0.3 && p[1] > 0.5 && p[1] < room[1] - 0.3;
    let local = |r: f64, deg: f64| {
        let (s, c) = deg.to_radians().sin_cos();
        ap.to_room([r * c, r * s])
    };
    let start = loop {
        let p = local(rng.gen_range(1.5..4.5), rng.gen_range(-30.0..30.0));
        if inside(p) {
            break p;
        }
    };
    let gait = activity.gait_hz() * rng.gen_range(0.85..1.15);
    let mut subject = match activity {
        Activity::Walking | Activity::Running => {
            let speed = if activity == Activity::Walking {
                rng.gen_range(0.7..1.3)
            } else {
                rng.gen_range(1.8..2.6)
            };
            // Pace between `start` and a point up to 2 m away.
            let end = loop {
                let h: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                let len = rng.gen_range(1.2..2.0);
                let p = [start[0] + len * h.cos(), start[1] + len * h.sin()];
                let (r, th) = ap.polar(p);
                if inside(p) && (1.2..5.0).contains(&r) && th.abs() < 40.0 {
                    break p;
                }
            };
            let leg = (end[0] - start[0]).hypot(end[1] - start[1]) / speed;
            let mut wps = Vec::new();
            let mut t = 0.0;
            let mut at_start = true;
            while t <= duration_s + leg {
                wps.push(Waypoint {
                    position: if at_start { start } else { end },
                    t,
                });
                at_start = !at_start;
                t += leg;
            }
            Subject::new(1, activity, wps)
        }
        _ => Subject::stationary(1, activity, start, 0.0),
    };
    subject.gait_hz = Some(gait);
    subject.reflectivity_scale = rng.gen_range(0.8..1.2);
    let mut scene = Scene::empty(room, cfg.aps.clone());
    scene.noise_std = spec.noise_std;
    scene.cfo_range_hz = spec.cfo_range_hz;
    scene.subjects.push(subject);
    scene.validate()?;
    Ok(scene)
}

/// Spectrograms of scripted single-subject scenes, labelled by activity
/// index in `spec.activities`. Windows follow the subject's true position
/// as seen by the first configured AP.
pub fn synthetic_activity_dataset(spec: &ActivityDatasetSpec, cfg: &PipelineConfig, seed: u64) -> Result<LabeledDataset> {
    cfg.validate()?;
    let codebook = cfg.codebook.build()?;
    let steps = spec.scene_steps(cfg);
    let frames = (steps - 1) * cfg.stft.sigma as u64 + cfg.stft.m as u64;
    let duration = frames as f64 * cfg.radio.packet_interval_s;
    let (dv, _) = crate::microdoppler::doppler_resolution(&cfg.radio, &cfg.stft);
    let band = crate::microdoppler::static_bins(dv, cfg.md.static_band);
    let rows = cfg.stft.m - (2 * band as usize + 1);
    let names = spec.activities.iter().map(|a| a.name().to_string()).collect();
    let mut data = LabeledDataset::new(rows, cfg.md.t_window, names);
    for (label, &act) in spec.activities.iter().enumerate() {
        for i in 0..spec.scenes_per_class {
            let index = (label * spec.scenes_per_class + i) as u64;
            let scene = activity_scene(act, duration, cfg, spec, seed, index)?;
            let ap = scene.aps[0];
            let points = truth_track_points(&scene.subjects[0], &ap, steps, cfg);
            let scene_seed = seed ^ (spec.split << 32) ^ index;
            let mut src = SceneSource::new(scene, codebook.clone(), cfg.radio.clone(), 0, scene_seed, frames)?;
            for s in spectrograms_along(&mut src, &codebook, &points, cfg)? {
                data.push_spectrogram(&s, label)?;
            }
        }
    }
    Ok(data)
}
