//! Random-access CIR frame streams.

use crate::waveform::{CirFrame, RadioConfig};
use crate::{Error, Result};

/// A finite stream of CIR frames of one AP, addressed by packet index.
///
/// Implementations may synthesize or read frames on demand; callers must
/// not assume that repeated reads are cheap.
pub trait FrameSource {
    fn radio(&self) -> &RadioConfig;
    fn frame_count(&self) -> u64;
    fn frame(&mut self, k: u64) -> Result<CirFrame>;
}

/// Frames held in memory; frame `i` of the vector is packet `i`.
#[derive(Debug, Clone)]
pub struct VecSource {
    radio: RadioConfig,
    frames: Vec<CirFrame>,
}

impl VecSource {
    pub fn new(radio: RadioConfig, frames: Vec<CirFrame>) -> Result<Self> {
        for (i, f) in frames.iter().enumerate() {
            if f.taps() != radio.taps || f.patterns() != radio.patterns {
                return Err(Error::invalid(format!(
                    "frame {i} is {}x{}, radio expects {}x{}",
                    f.taps(),
                    f.patterns(),
                    radio.taps,
                    radio.patterns
                )));
            }
        }
        Ok(Self { radio, frames })
    }

    pub fn frames(&self) -> &[CirFrame] {
        &self.frames
    }
}

impl FrameSource for VecSource {
    fn radio(&self) -> &RadioConfig {
        &self.radio
    }

    fn frame_count(&self) -> u64 {
        self.frames.len() as u64
    }

    fn frame(&mut self, k: u64) -> Result<CirFrame> {
        let mut f = self
            .frames
            .get(k as usize)
            .cloned()
            .ok_or_else(|| Error::invalid(format!("frame {k} beyond stream end")))?;
        f.k = k;
        Ok(f)
    }
}

/// Read every frame of a source into memory.
pub fn collect_frames(src: &mut dyn FrameSource) -> Result<Vec<CirFrame>> {
    (0..src.frame_count()).map(|k| src.frame(k)).collect()
}
