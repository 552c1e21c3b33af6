//! Minimal RIFF/WAVE header reading and silent PCM16 writing.

use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum WavError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("malformed WAV header: {0}")]
    Malformed(String),
    #[error("unsupported WAV codec 0x{0:04X}")]
    UnsupportedCodec(u16),
}

const PCM: u16 = 1;
const IEEE_FLOAT: u16 = 3;
const EXTENSIBLE: u16 = 0xFFFE;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WavInfo {
    pub format: u16,
    pub channels: u16,
    pub sample_rate: u32,
    pub bits_per_sample: u16,
    pub block_align: u16,
    /// Sample frames in the data chunk (one sample per channel each).
    pub frames: u64,
}

impl WavInfo {
    pub fn duration(&self) -> f64 {
        self.frames as f64 / self.sample_rate as f64
    }
}

fn u16_at(b: &[u8], i: usize) -> u16 {
    u16::from_le_bytes([b[i], b[i + 1]])
}

fn u32_at(b: &[u8], i: usize) -> u32 {
    u32::from_le_bytes([b[i], b[i + 1], b[i + 2], b[i + 3]])
}

pub fn parse_wav(bytes: &[u8]) -> Result<WavInfo, WavError> {
    let bad = |m: &str| WavError::Malformed(m.to_owned());
    if bytes.len() < 12 {
        return Err(bad("file shorter than RIFF header"));
    }
    if &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(bad("missing RIFF/WAVE magic"));
    }
    let mut fmt: Option<(u16, u16, u32, u16, u16)> = None;
    let mut pos = 12;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32_at(bytes, pos + 4) as usize;
        let body = pos + 8;
        if id == b"fmt " {
            if size < 16 || body + 16 > bytes.len() {
                return Err(bad("truncated fmt chunk"));
            }
            let mut format = u16_at(bytes, body);
            if format == EXTENSIBLE {
                if size < 40 || body + 40 > bytes.len() {
                    return Err(bad("truncated extensible fmt chunk"));
                }
                // Sub-format GUID starts at offset 24; its first two bytes are the codec.
                format = u16_at(bytes, body + 24);
            }
            if format != PCM && format != IEEE_FLOAT {
                return Err(WavError::UnsupportedCodec(format));
            }
            fmt = Some((
                format,
                u16_at(bytes, body + 2),
                u32_at(bytes, body + 4),
                u16_at(bytes, body + 12),
                u16_at(bytes, body + 14),
            ));
        } else if id == b"data" {
            let (format, channels, sample_rate, block_align, bits) =
                fmt.ok_or_else(|| bad("data chunk before fmt chunk"))?;
            if channels == 0 || sample_rate == 0 || block_align == 0 {
                return Err(bad("zero channels, sample rate, or block align"));
            }
            let available = bytes.len() - body;
            let data_len = size.min(available);
            return Ok(WavInfo {
                format,
                channels,
                sample_rate,
                bits_per_sample: bits,
                block_align,
                frames: (data_len / block_align as usize) as u64,
            });
        }
        pos = body + size + (size & 1);
    }
    Err(bad(if fmt.is_some() { "no data chunk" } else { "no fmt chunk" }))
}

pub fn read_wav_info(path: &Path) -> Result<WavInfo, WavError> {
    let bytes = fs::read(path).map_err(|source| WavError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_wav(&bytes)
}

/// Duration in seconds: data-chunk frames over sample rate.
pub fn read_wav_duration(path: &Path) -> Result<f64, WavError> {
    read_wav_info(path).map(|i| i.duration())
}

/// Canonical 44-byte-header PCM WAV around raw little-endian sample bytes.
pub fn pcm_wav_bytes(sample_rate: u32, channels: u16, bits: u16, data: &[u8]) -> Vec<u8> {
    let block_align = channels * bits / 8;
    let mut out = Vec::with_capacity(44 + data.len());
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data.len() as u32).to_le_bytes());
    out.extend_from_slice(b"WAVEfmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&PCM.to_le_bytes());
    out.extend_from_slice(&channels.to_le_bytes());
    out.extend_from_slice(&sample_rate.to_le_bytes());
    out.extend_from_slice(&(sample_rate * block_align as u32).to_le_bytes());
    out.extend_from_slice(&block_align.to_le_bytes());
    out.extend_from_slice(&bits.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data.len() as u32).to_le_bytes());
    out.extend_from_slice(data);
    out
}

/// Mono 16-bit silence of `seconds`, rounded to the nearest sample.
pub fn silent_wav(sample_rate: u32, seconds: f64) -> Vec<u8> {
    let frames = (seconds * sample_rate as f64).round().max(0.0) as usize;
    pcm_wav_bytes(sample_rate, 1, 16, &vec![0u8; frames * 2])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_arithmetic() {
        assert_eq!(parse_wav(&silent_wav(16_000, 3.0)).unwrap().frames, 48_000);
        assert_eq!(parse_wav(&silent_wav(16_000, 3.0)).unwrap().duration(), 3.0);
        assert_eq!(parse_wav(&silent_wav(44_100, 1.0)).unwrap().duration(), 1.0);
    }

    #[test]
    fn stereo_frames() {
        let w = pcm_wav_bytes(8_000, 2, 16, &vec![0u8; 16_000 * 4]);
        assert_eq!(parse_wav(&w).unwrap().duration(), 2.0);
    }

    #[test]
    fn errors() {
        let w = silent_wav(16_000, 0.1);
        assert!(matches!(parse_wav(&w[..20]), Err(WavError::Malformed(_))));
        assert!(matches!(parse_wav(b"RIFX0000WAVE"), Err(WavError::Malformed(_))));
        let mut alaw = w.clone();
        alaw[20] = 6;
        assert!(matches!(parse_wav(&alaw), Err(WavError::UnsupportedCodec(6))));
    }
}
