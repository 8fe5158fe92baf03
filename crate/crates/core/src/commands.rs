//! The file-level commands behind the command-line tool.
//!
//! Each command reads and writes files only through its arguments and
//! draws randomness only from the seed it is given, so rerunning it with
//! the same inputs reproduces its outputs byte for byte.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::classify::{evaluate, read_checkpoint, train, write_checkpoint, EpochStats, Network, NetworkSpec};
use crate::config::PipelineConfig;
use crate::fusion::detection_rate;
use crate::io::tables::{create, open};
use crate::io::{
    read_manifest, read_tracks_csv, write_capture_file, write_confusion_csv, write_dataset,
    write_decisions_csv, write_positions_csv, write_spectrogram_csv, write_spectrogram_pgm,
    write_tracks_csv, CaptureReader, SceneFile,
};
use crate::microdoppler::{doppler_axis, static_bins, doppler_resolution, Spectrogram, TrackPoint};
use crate::pipeline::{
    fused_positions, frame_count, run_e2e, run_tracking, spectrograms_along, step_count,
    synthetic_activity_dataset, truth_positions, union_positions, window_end, ActivityDatasetSpec,
    ApTracks, E2eOutput,
};
use crate::scenesim::{Codebook, SceneSource};
use crate::source::FrameSource;
use crate::{Error, Result};

pub fn load_config(path: Option<&Path>) -> Result<PipelineConfig> {
    match path {
        None => Ok(PipelineConfig::default()),
        Some(p) => {
            let text = read_text(p)?;
            PipelineConfig::from_toml_str(&text)
                .map_err(|e| Error::format(format!("{}: {e}", p.display())))
        }
    }
}

pub fn load_scene(path: &Path) -> Result<SceneFile> {
    let text = read_text(path)?;
    SceneFile::from_toml_str(&text).map_err(|e| Error::format(format!("{}: {e}", path.display())))
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })
}

pub fn capture_name(ap_id: u32) -> String {
    format!("ap{ap_id}.cir")
}

pub fn tracks_name(ap_id: u32) -> String {
    format!("tracks_ap{ap_id}.csv")
}

/// Writes one capture per AP of the scene (`ap<id>.cir`) plus the
/// normalized scene as `scene.toml`.
pub fn simulate(scene: &SceneFile, cfg: &PipelineConfig, seed: u64, out: &Path) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let codebook = cfg.codebook.build()?;
    let frames = frame_count(scene.duration_s, &cfg.radio);
    std::fs::create_dir_all(out)?;
    let mut paths = Vec::new();
    for (i, ap) in scene.aps.iter().enumerate() {
        let mut src = SceneSource::new(scene.scene(), codebook.clone(), cfg.radio.clone(), i, seed, frames)?;
        let path = out.join(capture_name(ap.id));
        write_capture_file(&path, &mut src, ap.id, codebook.fingerprint())?;
        paths.push(path);
    }
    let mut w = create(&out.join("scene.toml"))?;
    w.write_all(scene.to_toml_string().as_bytes())?;
    w.flush()?;
    Ok(paths)
}

fn open_capture(path: &Path, codebook: &Codebook, cfg: &PipelineConfig) -> Result<CaptureReader<std::io::BufReader<std::fs::File>>> {
    let r = CaptureReader::open(path).map_err(|e| Error::format(format!("{}: {e}", path.display())))?;
    let h = r.header();
    if h.codebook_hash != codebook.fingerprint() {
        return Err(Error::invalid(format!(
            "{}: codebook hash {:016x} does not match the configured codebook {:016x}",
            path.display(),
            h.codebook_hash,
            codebook.fingerprint()
        )));
    }
    if r.radio().taps != cfg.radio.taps || r.radio().patterns != cfg.radio.patterns {
        return Err(Error::invalid(format!(
            "{}: capture shape {}x{} differs from the configured radio",
            path.display(),
            h.taps,
            h.patterns
        )));
    }
    Ok(r)
}

/// Detection rates against ground truth: per AP, the pooled union and the
/// fused positions.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionReport {
    pub per_ap: Vec<(u32, f64)>,
    pub union: f64,
    pub fused: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackOutput {
    pub tracks: Vec<ApTracks>,
    pub fused: Vec<Vec<[f64; 2]>>,
    pub report: Option<DetectionReport>,
}

/// Tracks every capture, fuses them in AP-id order and writes
/// `tracks_ap<id>.csv`, `fused.csv` and, with ground truth,
/// `detection.csv`.
pub fn track(captures: &[PathBuf], cfg: &PipelineConfig, truth: Option<&SceneFile>, out: &Path) -> Result<TrackOutput> {
    cfg.validate()?;
    if captures.is_empty() {
        return Err(Error::invalid("no capture given"));
    }
    let codebook = cfg.codebook.build()?;
    let mut tracks = Vec::new();
    for path in captures {
        let mut r = open_capture(path, &codebook, cfg)?;
        let ap = *cfg.registration(r.header().ap_id)?;
        tracks.push(run_tracking(&mut r, &codebook, &ap, cfg)?);
    }
    tracks.sort_by_key(|t| t.ap.id);
    if tracks.windows(2).any(|w| w[0].ap.id == w[1].ap.id) {
        return Err(Error::invalid("two captures from the same AP"));
    }
    let fused = fused_positions(&tracks, cfg);
    std::fs::create_dir_all(out)?;
    for t in &tracks {
        let mut w = create(&out.join(tracks_name(t.ap.id)))?;
        write_tracks_csv(&mut w, t)?;
        w.flush()?;
    }
    let mut w = create(&out.join("fused.csv"))?;
    write_positions_csv(&mut w, &fused)?;
    w.flush()?;
    let report = match truth {
        None => None,
        Some(scene) => {
            let steps = tracks.iter().map(|t| t.steps.len()).min().unwrap_or(0);
            let gt: Vec<Vec<[f64; 2]>> = truth_positions(&scene.scene(), steps as u64, cfg)
                .into_iter()
                .map(|s| s.into_iter().map(|(_, p)| p).collect())
                .collect();
            let mut per_ap = Vec::new();
            for t in &tracks {
                per_ap.push((t.ap.id, detection_rate(&t.positions()[..steps], &gt)?));
            }
            let report = DetectionReport {
                per_ap,
                union: detection_rate(&union_positions(&tracks), &gt)?,
                fused: detection_rate(&fused, &gt)?,
            };
            let mut w = csv_file(&out.join("detection.csv"))?;
            w.write_record(["source", "detection_rate"]).map_err(csv_io)?;
            for (ap, r) in &report.per_ap {
                w.write_record([format!("ap{ap}"), r.to_string()]).map_err(csv_io)?;
            }
            w.write_record(["union".to_string(), report.union.to_string()]).map_err(csv_io)?;
            w.write_record(["fused".to_string(), report.fused.to_string()]).map_err(csv_io)?;
            w.flush()?;
            Some(report)
        }
    };
    Ok(TrackOutput {
        tracks,
        fused,
        report,
    })
}

fn csv_file(path: &Path) -> Result<csv::Writer<std::io::BufWriter<std::fs::File>>> {
    Ok(csv::Writer::from_writer(create(path)?))
}

fn csv_io(e: csv::Error) -> Error {
    Error::format(format!("csv: {e}"))
}

fn spectrogram_stem(ap: u32, spec: &Spectrogram) -> String {
    format!("ap{ap}_track{}_t{}", spec.subject, window_end(spec))
}

fn write_spectrogram_files(dir: &Path, ap: u32, specs: &[Spectrogram]) -> Result<Vec<PathBuf>> {
    let mut paths = Vec::new();
    for s in specs {
        let stem = spectrogram_stem(ap, s);
        let csv_path = dir.join(format!("{stem}.csv"));
        let mut w = create(&csv_path)?;
        write_spectrogram_csv(&mut w, s)?;
        w.flush()?;
        let mut w = create(&dir.join(format!("{stem}.pgm")))?;
        write_spectrogram_pgm(&mut w, s)?;
        w.flush()?;
        paths.push(csv_path);
    }
    Ok(paths)
}

/// Extracts the µD spectrograms of every track window. `tracks_dir` holds
/// the `tracks_ap<id>.csv` files written by [`track`]; each capture is
/// paired with the file of its AP. Writes `ap<a>_track<i>_t<end>.csv`
/// and `.pgm` per window.
pub fn mud(captures: &[PathBuf], tracks_dir: &Path, cfg: &PipelineConfig, out: &Path) -> Result<Vec<(u32, Vec<Spectrogram>)>> {
    cfg.validate()?;
    let codebook = cfg.codebook.build()?;
    std::fs::create_dir_all(out)?;
    let mut all = Vec::new();
    for path in captures {
        let mut r = open_capture(path, &codebook, cfg)?;
        let ap = *cfg.registration(r.header().ap_id)?;
        let rows = read_tracks_csv(open(&tracks_dir.join(tracks_name(ap.id)))?)?;
        let points: Vec<TrackPoint> = rows
            .iter()
            .map(|row| TrackPoint {
                t: row.t,
                id: row.id,
                position: ap.to_local(row.position),
            })
            .collect();
        let specs = spectrograms_along(&mut r, &codebook, &points, cfg)?;
        write_spectrogram_files(out, ap.id, &specs)?;
        all.push((ap.id, specs));
    }
    all.sort_by_key(|(ap, _)| *ap);
    Ok(all)
}

/// Synthetic single-subject activity dataset written as per-sample CSVs
/// and `manifest.csv`.
pub fn dataset(spec: &ActivityDatasetSpec, cfg: &PipelineConfig, seed: u64, out: &Path) -> Result<PathBuf> {
    let data = synthetic_activity_dataset(spec, cfg, seed)?;
    let axis = preprocessed_axis(cfg);
    write_dataset(out, &data, &axis)
}

/// Velocity of each row kept after static-band removal.
pub fn preprocessed_axis(cfg: &PipelineConfig) -> Vec<f64> {
    let (dv, _) = doppler_resolution(&cfg.radio, &cfg.stft);
    let band = static_bins(dv, cfg.md.static_band);
    doppler_axis(&cfg.radio, &cfg.stft)
        .into_iter()
        .filter(|v| (v / dv).round().abs() as i64 > band)
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub history: Vec<EpochStats>,
    pub train_accuracy: f64,
}

/// Trains the standard network on a manifest and writes the checkpoint to
/// `checkpoint` and the per-epoch loss to `train_log.csv` beside it.
pub fn train_cmd(manifest: &Path, cfg: &PipelineConfig, checkpoint: &Path) -> Result<TrainReport> {
    cfg.validate()?;
    let data = read_manifest(manifest)?;
    let spec = NetworkSpec::standard(data.rows, data.cols, data.n_classes());
    let mut net = Network::<f32>::new(spec, cfg.train.seed)?;
    let history = train(&mut net, &data, &cfg.train)?;
    let (train_accuracy, _) = evaluate(&net, &data)?;
    if let Some(dir) = checkpoint.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut w = create(checkpoint)?;
    write_checkpoint(&net, &data.label_names, &mut w)?;
    w.flush()?;
    let log = checkpoint.with_file_name("train_log.csv");
    let mut w = csv_file(&log)?;
    w.write_record(["epoch", "loss"]).map_err(csv_io)?;
    for h in &history {
        w.write_record([h.epoch.to_string(), h.loss.to_string()]).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(TrainReport {
        history,
        train_accuracy,
    })
}

pub fn load_model(checkpoint: &Path) -> Result<(Network<f32>, Vec<String>)> {
    read_checkpoint(open(checkpoint)?).map_err(|e| Error::format(format!("{}: {e}", checkpoint.display())))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub accuracy: f64,
    pub labels: Vec<String>,
    pub confusion: Vec<Vec<usize>>,
}

/// Accuracy of a checkpoint on a manifest; writes `confusion.csv` and
/// `accuracy.txt` into `out`. Manifest labels are matched to the model's
/// by name.
pub fn eval_cmd(manifest: &Path, checkpoint: &Path, out: &Path) -> Result<EvalReport> {
    let (net, labels) = load_model(checkpoint)?;
    let mut data = read_manifest(manifest)?;
    let remap: Vec<usize> = data
        .label_names
        .iter()
        .map(|l| {
            labels
                .iter()
                .position(|m| m == l)
                .ok_or_else(|| Error::invalid(format!("label {l:?} unknown to the model")))
        })
        .collect::<Result<_>>()?;
    for s in &mut data.samples {
        s.label = remap[s.label];
    }
    data.label_names = labels.clone();
    let (accuracy, confusion) = evaluate(&net, &data)?;
    std::fs::create_dir_all(out)?;
    let mut w = create(&out.join("confusion.csv"))?;
    write_confusion_csv(&mut w, &labels, &confusion)?;
    w.flush()?;
    let mut w = create(&out.join("accuracy.txt"))?;
    writeln!(w, "{accuracy}")?;
    w.flush()?;
    Ok(EvalReport {
        accuracy,
        labels,
        confusion,
    })
}

/// Simulates the scene for every configured AP, then runs tracking, µD
/// extraction, classification and fusion. Writes per-AP track CSVs,
/// spectrograms under `mud/` and the fused `decisions.csv`.
pub fn e2e(scene: &SceneFile, cfg: &PipelineConfig, net: &Network<f32>, labels: &[String], seed: u64, out: &Path) -> Result<E2eOutput> {
    cfg.validate()?;
    let codebook = cfg.codebook.build()?;
    let frames = frame_count(scene.duration_s, &cfg.radio);
    let sim = scene.scene();
    let mut registered: Vec<_> = cfg.aps.clone();
    registered.sort_by_key(|a| a.id);
    let mut sources = Vec::new();
    for ap in &registered {
        let i = sim
            .aps
            .iter()
            .position(|a| a.id == ap.id)
            .ok_or_else(|| Error::invalid(format!("AP {} is not part of the scene", ap.id)))?;
        sources.push((*ap, SceneSource::new(sim.clone(), codebook.clone(), cfg.radio.clone(), i, seed, frames)?));
    }
    let mut refs: Vec<(_, &mut dyn FrameSource)> = sources
        .iter_mut()
        .map(|(ap, s)| (*ap, s as &mut dyn FrameSource))
        .collect();
    let result = run_e2e(&mut refs, &codebook, cfg, net)?;
    std::fs::create_dir_all(out.join("mud"))?;
    for (t, specs) in result.tracks.iter().zip(&result.spectrograms) {
        let mut w = create(&out.join(tracks_name(t.ap.id)))?;
        write_tracks_csv(&mut w, t)?;
        w.flush()?;
        write_spectrogram_files(&out.join("mud"), t.ap.id, specs)?;
    }
    let mut w = create(&out.join("decisions.csv"))?;
    write_decisions_csv(&mut w, labels, &result.decisions)?;
    w.flush()?;
    Ok(result)
}

/// Number of tracking steps a capture of `frames` packets yields.
pub fn steps_for(frames: u64, cfg: &PipelineConfig) -> u64 {
    step_count(frames, cfg.stft.sigma)
}

/// Groups decisions by their first member, in the order they appear.
pub fn timelines(out: &E2eOutput) -> BTreeMap<(u32, u32), Vec<(u64, usize)>> {
    let mut map: BTreeMap<(u32, u32), Vec<(u64, usize)>> = BTreeMap::new();
    for d in &out.decisions {
        if let Some(&key) = d.members.first() {
            map.entry(key).or_default().push((d.t_end, d.decision.label));
        }
    }
    map
}
