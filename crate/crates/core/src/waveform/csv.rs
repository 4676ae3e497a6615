use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{Result, Waveform, WaveformError};

pub const CSV_HEADER: &str = "id,phase,label,sample_rate_hz,n_samples";

/// Reads every waveform from a CSV corpus.
///
/// The file is a header line followed by pairs of rows: a metadata row and a
/// row of comma-separated samples. A zero-length file is rejected with
/// "no waveforms"; a header-only file is an empty corpus.
pub fn read_waveforms_csv(path: &Path) -> Result<Vec<Waveform>> {
    let text = std::fs::read_to_string(path)?;
    parse_waveforms_csv(&text)
}

pub(crate) fn parse_waveforms_csv(text: &str) -> Result<Vec<Waveform>> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty());

    let (line_no, header) = lines.next().ok_or(WaveformError::NoWaveforms)?;
    if header.trim() != CSV_HEADER {
        return Err(parse_err(line_no, format!("expected header {CSV_HEADER:?}")));
    }

    let mut out = Vec::new();
    while let Some((meta_line, meta)) = lines.next() {
        let fields: Vec<&str> = meta.split(',').map(str::trim).collect();
        if fields.len() != 5 {
            return Err(parse_err(
                meta_line,
                format!("metadata row needs 5 fields, found {}", fields.len()),
            ));
        }
        let id = fields[0].to_string();
        let phase: u8 = fields[1]
            .parse()
            .map_err(|_| parse_err(meta_line, format!("bad phase {:?}", fields[1])))?;
        let label = match fields[2] {
            "0" => Some(false),
            "1" => Some(true),
            "-" => None,
            other => return Err(parse_err(meta_line, format!("bad label {other:?}"))),
        };
        let sample_rate_hz: f64 = fields[3]
            .parse()
            .map_err(|_| parse_err(meta_line, format!("bad sample rate {:?}", fields[3])))?;
        let n: usize = fields[4]
            .parse()
            .map_err(|_| parse_err(meta_line, format!("bad sample count {:?}", fields[4])))?;

        let (data_line, data) = lines
            .next()
            .ok_or_else(|| parse_err(meta_line, format!("missing sample row for {id}")))?;
        let mut samples = Vec::with_capacity(n);
        for (k, tok) in data.split(',').enumerate() {
            let v: f64 = tok
                .trim()
                .parse()
                .map_err(|_| parse_err(data_line, format!("bad sample {k}: {tok:?}")))?;
            if !v.is_finite() {
                return Err(parse_err(data_line, format!("non-finite sample {k}")));
            }
            samples.push(v);
        }
        if samples.len() != n {
            return Err(parse_err(
                data_line,
                format!("expected {n} samples, found {}", samples.len()),
            ));
        }
        let w = Waveform {
            id,
            phase,
            label,
            sample_rate_hz,
            samples,
        };
        w.validate()
            .map_err(|e| parse_err(meta_line, e.to_string()))?;
        out.push(w);
    }
    Ok(out)
}

/// Writes waveforms with 17 significant digits per sample, enough to
/// reproduce every `f64` exactly on read.
pub fn write_waveforms_csv(waveforms: &[Waveform], path: &Path) -> Result<()> {
    for w in waveforms {
        w.validate()?;
    }
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "{CSV_HEADER}")?;
    for w in waveforms {
        let label = match w.label {
            Some(true) => "1",
            Some(false) => "0",
            None => "-",
        };
        writeln!(
            out,
            "{},{},{},{},{}",
            w.id,
            w.phase,
            label,
            format_f64(w.sample_rate_hz),
            w.samples.len()
        )?;
        for (k, v) in w.samples.iter().enumerate() {
            if k > 0 {
                out.write_all(b",")?;
            }
            write!(out, "{}", format_f64(*v))?;
        }
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Scientific notation with 17 significant digits.
pub(crate) fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_err(line: usize, message: String) -> WaveformError {
    WaveformError::Parse { line, message }
}
