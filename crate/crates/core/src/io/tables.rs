//! CSV and PGM exports, and the dataset manifest.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::classify::LabeledDataset;
use crate::microdoppler::Spectrogram;
use crate::pipeline::{ApTracks, WindowDecision};
use crate::{Error, Result};

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::format(format!("csv: {other:?}")),
    }
}

/// Shortest round-trip formatting keeps CSVs exact and diff-able.
fn num(v: f64) -> String {
    format!("{v}")
}

/// `t,id,x,y,vx,vy` in the room frame, one row per confirmed track and
/// step.
pub fn write_tracks_csv<W: Write>(w: W, tracks: &ApTracks) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["t", "id", "x", "y", "vx", "vy"])
        .map_err(csv_err)?;
    for e in tracks.steps.iter().flatten() {
        out.write_record([
            e.t.to_string(),
            e.id.to_string(),
            num(e.position[0]),
            num(e.position[1]),
            num(e.velocity[0]),
            num(e.velocity[1]),
        ])
        .map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

/// One row of a tracks CSV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackRow {
    pub t: u64,
    pub id: u32,
    pub position: [f64; 2],
    pub velocity: [f64; 2],
}

pub fn read_tracks_csv<R: Read>(r: R) -> Result<Vec<TrackRow>> {
    let mut rd = csv::Reader::from_reader(r);
    let headers = rd.headers().map_err(csv_err)?.clone();
    if headers.iter().collect::<Vec<_>>() != ["t", "id", "x", "y", "vx", "vy"] {
        return Err(Error::format("tracks CSV must have columns t,id,x,y,vx,vy"));
    }
    let mut rows = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let bad = || Error::format(format!("tracks CSV row {}: malformed value", i + 2));
        let f = |j: usize| rec[j].parse::<f64>().map_err(|_| bad());
        rows.push(TrackRow {
            t: rec[0].parse().map_err(|_| bad())?,
            id: rec[1].parse().map_err(|_| bad())?,
            position: [f(2)?, f(3)?],
            velocity: [f(4)?, f(5)?],
        });
    }
    Ok(rows)
}

/// Header `velocity` then the tracking step of every column; one row per
/// velocity bin, lowest velocity first.
pub fn write_spectrogram_csv<W: Write>(w: W, spec: &Spectrogram) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["velocity".to_string()];
    header.extend((0..spec.cols).map(|c| (spec.t0 + c as u64).to_string()));
    out.write_record(&header).map_err(csv_err)?;
    for r in 0..spec.rows {
        let mut row = vec![num(spec.velocity_axis[r])];
        row.extend((0..spec.cols).map(|c| num(spec.get(r, c))));
        out.write_record(&row).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_spectrogram_csv<R: Read>(r: R, subject: u32) -> Result<Spectrogram> {
    let mut rd = csv::Reader::from_reader(r);
    let headers = rd.headers().map_err(csv_err)?.clone();
    if headers.get(0) != Some("velocity") || headers.len() < 2 {
        return Err(Error::format("spectrogram CSV must start with a velocity column"));
    }
    let t0: u64 = headers[1]
        .parse()
        .map_err(|_| Error::format("spectrogram CSV header must list step indices"))?;
    let cols = headers.len() - 1;
    let mut axis = Vec::new();
    let mut values = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(csv_err)?;
        let parse = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| Error::format(format!("spectrogram CSV: bad number {s:?}")))
        };
        axis.push(parse(&rec[0])?);
        for v in rec.iter().skip(1) {
            values.push(parse(v)?);
        }
    }
    Ok(Spectrogram {
        rows: axis.len(),
        cols,
        values,
        velocity_axis: axis,
        t0,
        subject,
    })
}

/// 8-bit binary PGM, highest velocity on the top row, values in [0, 1]
/// mapped to 0..=255.
pub fn write_spectrogram_pgm<W: Write>(mut w: W, spec: &Spectrogram) -> Result<()> {
    write!(w, "P5\n{} {}\n255\n", spec.cols, spec.rows)?;
    let mut bytes = Vec::with_capacity(spec.rows * spec.cols);
    for r in (0..spec.rows).rev() {
        for c in 0..spec.cols {
            bytes.push((spec.get(r, c).clamp(0.0, 1.0) * 255.0).round() as u8);
        }
    }
    w.write_all(&bytes)?;
    Ok(())
}

/// Square matrix with a header row and column of label names; rows are
/// true classes, columns predictions.
pub fn write_confusion_csv<W: Write>(w: W, labels: &[String], confusion: &[Vec<usize>]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["true\\predicted".to_string()];
    header.extend(labels.iter().cloned());
    out.write_record(&header).map_err(csv_err)?;
    for (l, row) in labels.iter().zip(confusion) {
        let mut rec = vec![l.clone()];
        rec.extend(row.iter().map(|c| c.to_string()));
        out.write_record(&rec).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

/// `t_end,x,y,label,confidence,source_ap,members` with members as
/// `ap:track` joined by `;`.
pub fn write_decisions_csv<W: Write>(w: W, labels: &[String], decisions: &[WindowDecision]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["t_end", "x", "y", "label", "confidence", "source_ap", "members"])
        .map_err(csv_err)?;
    for d in decisions {
        let name = labels
            .get(d.decision.label)
            .cloned()
            .unwrap_or_else(|| d.decision.label.to_string());
        let members = d
            .members
            .iter()
            .map(|(a, t)| format!("{a}:{t}"))
            .collect::<Vec<_>>()
            .join(";");
        out.write_record([
            d.t_end.to_string(),
            num(d.position[0]),
            num(d.position[1]),
            name,
            num(d.decision.confidence),
            d.decision.source_ap.to_string(),
            members,
        ])
        .map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

/// `t,x,y` of the fused subject positions.
pub fn write_positions_csv<W: Write>(w: W, steps: &[Vec<[f64; 2]>]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["t", "x", "y"]).map_err(csv_err)?;
    for (t, ps) in steps.iter().enumerate() {
        for p in ps {
            out.write_record([t.to_string(), num(p[0]), num(p[1])])
                .map_err(csv_err)?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })
}

pub fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })
}

/// A dataset manifest: CSV with columns `file,label`, paths relative to
/// the manifest. Label indices follow the order of first appearance.
pub fn read_manifest(path: &Path) -> Result<LabeledDataset> {
    let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut rd = csv::Reader::from_reader(open(path)?);
    let headers = rd.headers().map_err(csv_err)?.clone();
    if headers.iter().collect::<Vec<_>>() != ["file", "label"] {
        return Err(Error::format("manifest must have columns file,label"));
    }
    let mut entries: Vec<(PathBuf, String)> = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(csv_err)?;
        entries.push((dir.join(&rec[0]), rec[1].to_string()));
    }
    let mut labels: Vec<String> = Vec::new();
    for (_, l) in &entries {
        if !labels.contains(l) {
            labels.push(l.clone());
        }
    }
    let mut data: Option<LabeledDataset> = None;
    for (file, l) in entries {
        let spec = read_spectrogram_csv(open(&file)?, 0)
            .map_err(|e| Error::format(format!("{}: {e}", file.display())))?;
        let d = data.get_or_insert_with(|| LabeledDataset::new(spec.rows, spec.cols, labels.clone()));
        let label = labels.iter().position(|x| *x == l).unwrap();
        d.push_spectrogram(&spec, label)
            .map_err(|e| Error::format(format!("{}: {e}", file.display())))?;
    }
    data.ok_or_else(|| Error::format("manifest lists no samples"))
}

/// Writes every sample as `sample_<i>.csv` next to `manifest.csv` in `dir`.
pub fn write_dataset(dir: &Path, data: &LabeledDataset, axis: &[f64]) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let manifest = dir.join("manifest.csv");
    let mut m = csv::Writer::from_writer(create(&manifest)?);
    m.write_record(["file", "label"]).map_err(csv_err)?;
    for (i, s) in data.samples.iter().enumerate() {
        let name = format!("sample_{i:04}.csv");
        let spec = Spectrogram {
            values: s.values.clone(),
            rows: data.rows,
            cols: data.cols,
            velocity_axis: axis.to_vec(),
            t0: 0,
            subject: 0,
        };
        let mut w = create(&dir.join(&name))?;
        write_spectrogram_csv(&mut w, &spec)?;
        w.flush()?;
        m.write_record([name.as_str(), data.label_names[s.label].as_str()])
            .map_err(csv_err)?;
    }
    m.flush()?;
    Ok(manifest)
}
