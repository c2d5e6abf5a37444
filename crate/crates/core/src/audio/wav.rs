//! Minimal RIFF/WAVE reader and writer.
//!
//! Reads PCM 16-bit and IEEE float 32-bit, mono or stereo (stereo is
//! averaged down to mono). Writes 16-bit PCM mono.

use std::fs;
use std::path::Path;

use super::{AudioClip, AudioError};

const FORMAT_PCM: u16 = 1;
const FORMAT_IEEE_FLOAT: u16 = 3;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

fn malformed(chunk: &str, reason: impl Into<String>) -> AudioError {
    AudioError::Decode { chunk: chunk.to_string(), reason: reason.into() }
}

fn u16_le(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn u32_le(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

#[derive(Debug, Clone, Copy)]
struct Format {
    tag: u16,
    channels: u16,
    sample_rate: u32,
    bits: u16,
}

pub fn decode_wav(path: impl AsRef<Path>) -> Result<AudioClip, AudioError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| AudioError::Read { path: path.display().to_string(), source })?;
    decode_wav_bytes(&bytes)
}

pub fn decode_wav_bytes(bytes: &[u8]) -> Result<AudioClip, AudioError> {
    if bytes.len() < 12 {
        return Err(malformed("RIFF", "file shorter than the 12-byte RIFF header"));
    }
    if &bytes[0..4] != b"RIFF" {
        return Err(malformed("RIFF", "missing 'RIFF' magic"));
    }
    if &bytes[8..12] != b"WAVE" {
        return Err(malformed("RIFF", "form type is not 'WAVE'"));
    }

    let mut format: Option<Format> = None;
    let mut data: Option<&[u8]> = None;
    let mut pos = 12;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let name = String::from_utf8_lossy(id).into_owned();
        let size = u32_le(bytes, pos + 4) as usize;
        let body_start = pos + 8;
        let body_end = body_start.checked_add(size).filter(|&end| end <= bytes.len()).ok_or_else(|| {
            malformed(&name, format!("declared size {size} exceeds remaining {} bytes", bytes.len() - body_start))
        })?;
        let body = &bytes[body_start..body_end];
        match id {
            b"fmt " => format = Some(parse_fmt(body)?),
            b"data" => data = Some(body),
            _ => {}
        }
        // chunks are word aligned
        pos = body_end + (size & 1);
    }

    let format = format.ok_or_else(|| malformed("fmt ", "chunk not found"))?;
    let data = data.ok_or_else(|| malformed("data", "chunk not found"))?;

    let bytes_per_sample = (format.bits / 8) as usize;
    let frame_bytes = bytes_per_sample * format.channels as usize;
    if data.len() % frame_bytes != 0 {
        return Err(malformed(
            "data",
            format!("length {} is not a multiple of the {frame_bytes}-byte frame", data.len()),
        ));
    }

    let decode_one: fn(&[u8]) -> f64 = match (format.tag, format.bits) {
        (FORMAT_PCM, 16) => |b| i16::from_le_bytes([b[0], b[1]]) as f64 / 32768.0,
        (FORMAT_IEEE_FLOAT, 32) => |b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
        _ => unreachable!("validated in parse_fmt"),
    };

    let channels = format.channels as usize;
    let mut samples = Vec::with_capacity(data.len() / frame_bytes);
    for frame in data.chunks_exact(frame_bytes) {
        let sum: f64 = frame.chunks_exact(bytes_per_sample).map(decode_one).sum();
        let s = sum / channels as f64;
        if !s.is_finite() {
            return Err(malformed("data", "non-finite float sample"));
        }
        samples.push(s);
    }

    AudioClip::new(samples, format.sample_rate)
}

fn parse_fmt(body: &[u8]) -> Result<Format, AudioError> {
    if body.len() < 16 {
        return Err(malformed("fmt ", format!("chunk is {} bytes, need at least 16", body.len())));
    }
    let mut tag = u16_le(body, 0);
    let channels = u16_le(body, 2);
    let sample_rate = u32_le(body, 4);
    let bits = u16_le(body, 14);
    if tag == FORMAT_EXTENSIBLE {
        if body.len() < 26 {
            return Err(malformed("fmt ", "extensible format without sub-format GUID"));
        }
        tag = u16_le(body, 24);
    }
    if channels == 0 || channels > 2 {
        return Err(AudioError::UnsupportedFormat(format!("{channels} channels (mono or stereo only)")));
    }
    if sample_rate == 0 {
        return Err(malformed("fmt ", "sample rate is zero"));
    }
    match (tag, bits) {
        (FORMAT_PCM, 16) | (FORMAT_IEEE_FLOAT, 32) => {}
        (FORMAT_PCM, b) => {
            return Err(AudioError::UnsupportedFormat(format!("{b}-bit PCM")));
        }
        (FORMAT_IEEE_FLOAT, b) => {
            return Err(AudioError::UnsupportedFormat(format!("{b}-bit float")));
        }
        (t, _) => {
            return Err(AudioError::UnsupportedFormat(format!("format tag {t:#06x}")));
        }
    }
    Ok(Format { tag, channels, sample_rate, bits })
}

/// Quantize to 16-bit: clamp to [-1, 1], scale by 32768, round half away
/// from zero, saturate at the i16 range.
fn quantize(sample: f64) -> i16 {
    let scaled = (sample.clamp(-1.0, 1.0) * 32768.0).round();
    scaled.clamp(i16::MIN as f64, i16::MAX as f64) as i16
}

pub fn encode_wav_bytes(clip: &AudioClip) -> Vec<u8> {
    let data_len = clip.samples.len() * 2;
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&FORMAT_PCM.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&clip.sample_rate.to_le_bytes());
    out.extend_from_slice(&(clip.sample_rate * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for &s in &clip.samples {
        out.extend_from_slice(&quantize(s).to_le_bytes());
    }
    out
}

pub fn encode_wav(clip: &AudioClip, path: impl AsRef<Path>) -> Result<(), AudioError> {
    let path = path.as_ref();
    fs::write(path, encode_wav_bytes(clip))
        .map_err(|source| AudioError::Write { path: path.display().to_string(), source })
}
