//! File formats: CIR captures, scene descriptions, and CSV/PGM outputs.

pub mod capture;
pub mod scenefile;
pub mod tables;

pub use capture::{write_capture, write_capture_file, CaptureHeader, CaptureReader};
pub use scenefile::{SceneFile, SubjectSpec};
pub use tables::{
    read_manifest, read_spectrogram_csv, read_tracks_csv, write_confusion_csv,
    write_dataset, write_decisions_csv, write_positions_csv, write_spectrogram_csv,
    write_spectrogram_pgm, write_tracks_csv, TrackRow,
};
