//! Binary CIR capture files.
//!
//! Little-endian, a 60-byte header followed by the frames:
//!
//! ```text
//! "AYCIR1"        6 bytes
//! version         u16 (= 1)
//! carrier_hz      f64
//! bandwidth_hz    f64
//! packet_s        f64
//! taps            u32
//! patterns        u32
//! frame_count     u64
//! ap_id           u32
//! codebook_hash   u64
//! frames          frame_count × taps × patterns × (re f32, im f32), tap-major
//! ```
//!
//! Samples are stored as f32; frames read back as the nearest f64 of each
//! stored value. The header carries no oversampling factor, so readers
//! assume two samples per symbol.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::source::FrameSource;
use crate::waveform::{CirFrame, RadioConfig};
use crate::{Error, Result};

pub const CAPTURE_MAGIC: &[u8; 6] = b"AYCIR1";
pub const CAPTURE_VERSION: u16 = 1;
pub const HEADER_LEN: u64 = 60;

#[derive(Debug, Clone, PartialEq)]
pub struct CaptureHeader {
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    pub packet_interval_s: f64,
    pub taps: u32,
    pub patterns: u32,
    pub frame_count: u64,
    pub ap_id: u32,
    pub codebook_hash: u64,
}

impl CaptureHeader {
    pub fn new(radio: &RadioConfig, frame_count: u64, ap_id: u32, codebook_hash: u64) -> Self {
        Self {
            carrier_hz: radio.carrier_hz,
            bandwidth_hz: radio.bandwidth_hz,
            packet_interval_s: radio.packet_interval_s,
            taps: radio.taps as u32,
            patterns: radio.patterns as u32,
            frame_count,
            ap_id,
            codebook_hash,
        }
    }

    pub fn radio(&self) -> RadioConfig {
        RadioConfig {
            carrier_hz: self.carrier_hz,
            bandwidth_hz: self.bandwidth_hz,
            packet_interval_s: self.packet_interval_s,
            taps: self.taps as usize,
            patterns: self.patterns as usize,
            ..RadioConfig::default()
        }
    }

    pub fn frame_bytes(&self) -> u64 {
        self.taps as u64 * self.patterns as u64 * 8
    }

    /// Total file length the header implies.
    pub fn file_len(&self) -> u64 {
        HEADER_LEN + self.frame_count * self.frame_bytes()
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        let mut b = Vec::with_capacity(HEADER_LEN as usize);
        b.extend_from_slice(CAPTURE_MAGIC);
        b.extend_from_slice(&CAPTURE_VERSION.to_le_bytes());
        b.extend_from_slice(&self.carrier_hz.to_le_bytes());
        b.extend_from_slice(&self.bandwidth_hz.to_le_bytes());
        b.extend_from_slice(&self.packet_interval_s.to_le_bytes());
        b.extend_from_slice(&self.taps.to_le_bytes());
        b.extend_from_slice(&self.patterns.to_le_bytes());
        b.extend_from_slice(&self.frame_count.to_le_bytes());
        b.extend_from_slice(&self.ap_id.to_le_bytes());
        b.extend_from_slice(&self.codebook_hash.to_le_bytes());
        debug_assert_eq!(b.len() as u64, HEADER_LEN);
        w.write_all(&b)?;
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut b = [0u8; HEADER_LEN as usize];
        r.read_exact(&mut b).map_err(|e| match e.kind() {
            std::io::ErrorKind::UnexpectedEof => Error::format("capture header is truncated"),
            _ => Error::Io(e),
        })?;
        if &b[..6] != CAPTURE_MAGIC {
            return Err(Error::format("not a CIR capture (bad magic)"));
        }
        let u16_at = |o: usize| u16::from_le_bytes(b[o..o + 2].try_into().unwrap());
        let u32_at = |o: usize| u32::from_le_bytes(b[o..o + 4].try_into().unwrap());
        let u64_at = |o: usize| u64::from_le_bytes(b[o..o + 8].try_into().unwrap());
        let f64_at = |o: usize| f64::from_le_bytes(b[o..o + 8].try_into().unwrap());
        let version = u16_at(6);
        if version != CAPTURE_VERSION {
            return Err(Error::format(format!(
                "unsupported capture version {version}"
            )));
        }
        let h = Self {
            carrier_hz: f64_at(8),
            bandwidth_hz: f64_at(16),
            packet_interval_s: f64_at(24),
            taps: u32_at(32),
            patterns: u32_at(36),
            frame_count: u64_at(40),
            ap_id: u32_at(48),
            codebook_hash: u64_at(52),
        };
        h.radio()
            .validate()
            .map_err(|e| Error::format(format!("capture header: {e}")))?;
        Ok(h)
    }
}

fn encode_frame(frame: &CirFrame, out: &mut Vec<u8>) {
    out.clear();
    for z in frame.data() {
        out.extend_from_slice(&(z.re as f32).to_le_bytes());
        out.extend_from_slice(&(z.im as f32).to_le_bytes());
    }
}

/// Writes the header, then every frame of `src`.
pub fn write_capture<W: Write>(
    w: &mut W,
    src: &mut dyn FrameSource,
    ap_id: u32,
    codebook_hash: u64,
) -> Result<CaptureHeader> {
    let header = CaptureHeader::new(src.radio(), src.frame_count(), ap_id, codebook_hash);
    header.write_to(w)?;
    let mut buf = Vec::with_capacity(header.frame_bytes() as usize);
    for k in 0..header.frame_count {
        let f = src.frame(k)?;
        if f.taps() != header.taps as usize || f.patterns() != header.patterns as usize {
            return Err(Error::invalid(format!("frame {k} does not match the radio shape")));
        }
        encode_frame(&f, &mut buf);
        w.write_all(&buf)?;
    }
    Ok(header)
}

pub fn write_capture_file(
    path: &Path,
    src: &mut dyn FrameSource,
    ap_id: u32,
    codebook_hash: u64,
) -> Result<CaptureHeader> {
    let mut w = BufWriter::new(File::create(path)?);
    let h = write_capture(&mut w, src, ap_id, codebook_hash)?;
    w.flush()?;
    Ok(h)
}

/// Random-access reader over a capture.
#[derive(Debug)]
pub struct CaptureReader<R> {
    inner: R,
    header: CaptureHeader,
    radio: RadioConfig,
    buf: Vec<u8>,
    /// Index of the frame the stream position points at.
    cursor: Option<u64>,
}

impl CaptureReader<BufReader<File>> {
    pub fn open(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| {
            Error::Io(std::io::Error::new(
                e.kind(),
                format!("{}: {e}", path.display()),
            ))
        })?;
        let len = file.metadata()?.len();
        let r = Self::new(BufReader::with_capacity(1 << 16, file))?;
        if len != r.header.file_len() {
            return Err(Error::format(format!(
                "capture is {len} bytes, header implies {}",
                r.header.file_len()
            )));
        }
        Ok(r)
    }
}

impl<R: Read + Seek> CaptureReader<R> {
    pub fn new(mut inner: R) -> Result<Self> {
        inner.seek(SeekFrom::Start(0))?;
        let header = CaptureHeader::read_from(&mut inner)?;
        Ok(Self {
            radio: header.radio(),
            buf: vec![0; header.frame_bytes() as usize],
            header,
            inner,
            cursor: Some(0),
        })
    }

    pub fn header(&self) -> &CaptureHeader {
        &self.header
    }
}

impl<R: Read + Seek> FrameSource for CaptureReader<R> {
    fn radio(&self) -> &RadioConfig {
        &self.radio
    }

    fn frame_count(&self) -> u64 {
        self.header.frame_count
    }

    fn frame(&mut self, k: u64) -> Result<CirFrame> {
        if k >= self.header.frame_count {
            return Err(Error::invalid(format!(
                "frame {k} beyond capture end {}",
                self.header.frame_count
            )));
        }
        if self.cursor != Some(k) {
            self.inner
                .seek(SeekFrom::Start(HEADER_LEN + k * self.header.frame_bytes()))?;
        }
        self.cursor = None;
        self.inner.read_exact(&mut self.buf).map_err(|e| match e.kind() {
            std::io::ErrorKind::UnexpectedEof => Error::format("capture is truncated"),
            _ => Error::Io(e),
        })?;
        self.cursor = Some(k + 1);
        let data = self
            .buf
            .chunks_exact(8)
            .map(|c| {
                let re = f32::from_le_bytes(c[..4].try_into().unwrap());
                let im = f32::from_le_bytes(c[4..].try_into().unwrap());
                Complex64::new(re as f64, im as f64)
            })
            .collect();
        CirFrame::from_vec(k, self.radio.taps, self.radio.patterns, data)
            .map_err(|e| Error::format(format!("frame {k}: {e}")))
    }
}
