//! PDWF: a compact little-endian container for one waveform.
//!
//! ```text
//! magic     4 bytes  "PDWF"
//! version   u16      1
//! phase     u8
//! label     u8       0 | 1 | 255 (unlabeled)
//! rate      f64      sample rate in Hz
//! id_len    u32
//! id        id_len bytes of UTF-8
//! n         u64
//! samples   n x f32
//! ```
//!
//! Samples are widened to `f64` on read. Values that are not representable
//! as `f32` are rounded on write.

use std::path::Path;

use super::{Result, Waveform, WaveformError};

pub const PDWF_MAGIC: [u8; 4] = *b"PDWF";
pub const PDWF_VERSION: u16 = 1;

const LABEL_UNLABELED: u8 = 255;

pub fn encode_pdwf(waveform: &Waveform) -> Result<Vec<u8>> {
    waveform.validate()?;
    let id = waveform.id.as_bytes();
    let id_len = u32::try_from(id.len())
        .map_err(|_| WaveformError::Invalid("id too long".to_string()))?;
    let mut buf = Vec::with_capacity(28 + id.len() + 4 * waveform.samples.len());
    buf.extend_from_slice(&PDWF_MAGIC);
    buf.extend_from_slice(&PDWF_VERSION.to_le_bytes());
    buf.push(waveform.phase);
    buf.push(match waveform.label {
        Some(false) => 0,
        Some(true) => 1,
        None => LABEL_UNLABELED,
    });
    buf.extend_from_slice(&waveform.sample_rate_hz.to_le_bytes());
    buf.extend_from_slice(&id_len.to_le_bytes());
    buf.extend_from_slice(id);
    buf.extend_from_slice(&(waveform.samples.len() as u64).to_le_bytes());
    for &v in &waveform.samples {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
    Ok(buf)
}

struct Reader<'a> {
    bytes: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() < n {
            return Err(WaveformError::Truncated);
        }
        let (head, tail) = self.bytes.split_at(n);
        self.bytes = tail;
        Ok(head)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }
}

pub fn decode_pdwf(bytes: &[u8]) -> Result<Waveform> {
    if bytes.len() >= 4 && bytes[..4] != PDWF_MAGIC {
        return Err(WaveformError::NotPdwf);
    }
    let mut r = Reader { bytes };
    r.take(4)?;
    let version = u16::from_le_bytes(r.array()?);
    if version != PDWF_VERSION {
        return Err(WaveformError::UnsupportedVersion(version));
    }
    let [phase, label_byte] = r.array()?;
    let label = match label_byte {
        0 => Some(false),
        1 => Some(true),
        LABEL_UNLABELED => None,
        other => return Err(WaveformError::Invalid(format!("label byte {other}"))),
    };
    let sample_rate_hz = f64::from_le_bytes(r.array()?);
    let id_len = u32::from_le_bytes(r.array()?) as usize;
    let id = std::str::from_utf8(r.take(id_len)?)
        .map_err(|_| WaveformError::Invalid("id is not UTF-8".to_string()))?
        .to_string();
    let n = u64::from_le_bytes(r.array()?);
    let n = usize::try_from(n).map_err(|_| WaveformError::Truncated)?;
    let payload = r.take(n.checked_mul(4).ok_or(WaveformError::Truncated)?)?;
    let samples = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("chunk of 4")) as f64)
        .collect();
    Waveform::new(id, phase, label, sample_rate_hz, samples)
}

pub fn write_waveform_binary(waveform: &Waveform, path: &Path) -> Result<()> {
    std::fs::write(path, encode_pdwf(waveform)?)?;
    Ok(())
}

pub fn read_waveform_binary(path: &Path) -> Result<Waveform> {
    decode_pdwf(&std::fs::read(path)?)
}
