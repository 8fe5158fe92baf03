//! Joint communication and radar sensing with 60 GHz 802.11ay training
//! fields: CIR estimation, multi-person tracking, micro-Doppler
//! extraction and activity classification.

pub mod aoa;
pub mod classify;
pub mod commands;
pub mod config;
pub mod detect;
pub mod error;
pub mod fusion;
pub mod io;
pub mod microdoppler;
pub mod pipeline;
pub mod rng;
pub mod scenesim;
pub mod source;
pub mod track;
pub mod waveform;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/overview.md")]
    mod book_overview {}
    #[doc = include_str!("../../../book/src/waveform.md")]
    mod book_waveform {}
    #[doc = include_str!("../../../book/src/scenes.md")]
    mod book_scenes {}
    #[doc = include_str!("../../../book/src/detection.md")]
    mod book_detection {}
    #[doc = include_str!("../../../book/src/tracking.md")]
    mod book_tracking {}
    #[doc = include_str!("../../../book/src/microdoppler.md")]
    mod book_microdoppler {}
    #[doc = include_str!("../../../book/src/classifier.md")]
    mod book_classifier {}
    #[doc = include_str!("../../../book/src/fusion.md")]
    mod book_fusion {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod book_cli {}
}
