//! File formats. Frequencies on disk are ordinary Hz; in memory rad/s.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cavity::TransmissionScan;
use crate::cooling::SweepPoint;
use crate::error::{Error, Result};
use crate::scalar::{angular, ordinary};
use crate::specgen::{PsdTrace, TimeTrace};
use crate::Real;

/// Size of the JSON header in front of a binary time trace, bytes.
pub const TRACE_HEADER_LEN: usize = 80;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn parse_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

/// Lowercase hex SHA-256 of a file's bytes.
pub fn sha256_file(path: &Path) -> Result<String> {
    let mut f = File::open(path).map_err(io_err(path))?;
    let mut h = Sha256::new();
    let mut buf = [0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf).map_err(io_err(path))?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex::encode(h.finalize()))
}

// `# key=value` lines and the remaining CSV body.
fn split_metadata(text: &str) -> (Vec<(String, String)>, String) {
    let mut meta = Vec::new();
    let mut body = String::new();
    for line in text.lines() {
        let t = line.trim();
        if let Some(rest) = t.strip_prefix('#') {
            if let Some((k, v)) = rest.split_once('=') {
                meta.push((k.trim().to_string(), v.trim().to_string()));
            }
        } else if !t.is_empty() {
            body.push_str(line);
            body.push('\n');
        }
    }
    (meta, body)
}

fn meta_value<'a>(meta: &'a [(String, String)], key: &str) -> Option<&'a str> {
    meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
}

fn parse_meta<V: std::str::FromStr>(path: &Path, meta: &[(String, String)], key: &str) -> Result<Option<V>> {
    meta_value(meta, key)
        .map(|v| v.parse::<V>().map_err(|_| parse_err(path, format!("metadata `{key}` = `{v}` is not a number"))))
        .transpose()
}

// Two numeric columns after a header row.
fn read_two_columns(path: &Path, body: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(body.as_bytes());
    let headers = rdr.headers().map_err(|e| parse_err(path, e.to_string()))?.clone();
    if headers.len() < 2 {
        return Err(parse_err(path, "expected a header row with two columns"));
    }
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| parse_err(path, e.to_string()))?;
        let num = |j: usize| -> Result<f64> {
            let field = rec.get(j).unwrap_or("");
            field
                .parse::<f64>()
                .map_err(|_| parse_err(path, format!("row {}: column `{}` = `{field}` is not a number", i + 2, &headers[j])))
        };
        a.push(num(0)?);
        b.push(num(1)?);
    }
    if a.is_empty() {
        return Err(parse_err(path, "no data rows"));
    }
    Ok((a, b))
}

/// Reads a PSD CSV (`freq_hz, psd_sn_units`) with optional `# n_avg=`,
/// `# rbw_hz=` and `# het_freq_hz=` lines. A missing n_avg is taken as 1;
/// a missing rbw as the mean grid spacing.
pub fn read_psd_csv<T: Real>(path: &Path) -> Result<PsdTrace<T>> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let (meta, body) = split_metadata(&text);
    let (f, s) = read_two_columns(path, &body)?;
    let n_avg = match parse_meta::<usize>(path, &meta, "n_avg")? {
        Some(n) => n,
        None => {
            log::warn!("{}: no n_avg metadata, assuming 1", path.display());
            1
        }
    };
    let rbw_hz = match parse_meta::<f64>(path, &meta, "rbw_hz")? {
        Some(r) => r,
        None if f.len() > 1 => (f[f.len() - 1] - f[0]) / (f.len() - 1) as f64,
        None => return Err(parse_err(path, "single-row spectrum needs `# rbw_hz=`")),
    };
    let het = parse_meta::<f64>(path, &meta, "het_freq_hz")?;
    let psd = PsdTrace {
        freq: f.iter().map(|&v| angular(T::of(v))).collect(),
        psd: s.into_iter().map(T::of).collect(),
        n_avg,
        resolution_bw: angular(T::of(rbw_hz)),
        het_freq: het.map(|h| angular(T::of(h))),
    };
    psd.validate().map_err(|e| parse_err(path, e.to_string()))?;
    Ok(psd)
}

pub fn write_psd_csv<T: Real>(path: &Path, psd: &PsdTrace<T>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).map_err(io_err(path))?);
    let mut head = format!(
        "# n_avg={}\n# rbw_hz={}\n",
        psd.n_avg,
        ordinary(psd.resolution_bw).as_f64()
    );
    if let Some(h) = psd.het_freq {
        head.push_str(&format!("# het_freq_hz={}\n", ordinary(h).as_f64()));
    }
    w.write_all(head.as_bytes()).map_err(io_err(path))?;
    let mut c = csv::Writer::from_writer(w);
    let csv_err = |e: csv::Error| parse_err(path, e.to_string());
    c.write_record(["freq_hz", "psd_sn_units"]).map_err(csv_err)?;
    for (f, s) in psd.freq.iter().zip(&psd.psd) {
        c.write_record([ordinary(*f).as_f64().to_string(), s.as_f64().to_string()])
            .map_err(csv_err)?;
    }
    c.flush().map_err(io_err(path))
}

/// Reads a transmission scan (`freq_hz, value`); `# scan_id=` and
/// `# fsr_hz=` are optional. The scan id defaults to the file stem.
pub fn read_scan_csv<T: Real>(path: &Path) -> Result<TransmissionScan<T>> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let (meta, body) = split_metadata(&text);
    let (f, p) = read_two_columns(path, &body)?;
    let id = meta_value(&meta, "scan_id")
        .map(str::to_string)
        .unwrap_or_else(|| path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default());
    let mut scan = TransmissionScan::new(f.iter().map(|&v| angular(T::of(v))).collect(), p.into_iter().map(T::of).collect(), id)
        .map_err(|e| parse_err(path, e.to_string()))?;
    scan.fsr = parse_meta::<f64>(path, &meta, "fsr_hz")?.map(|v| angular(T::of(v)));
    Ok(scan)
}

pub fn write_scan_csv<T: Real>(path: &Path, scan: &TransmissionScan<T>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).map_err(io_err(path))?);
    let mut head = format!("# scan_id={}\n", scan.scan_id);
    if let Some(f) = scan.fsr {
        head.push_str(&format!("# fsr_hz={}\n", ordinary(f).as_f64()));
    }
    w.write_all(head.as_bytes()).map_err(io_err(path))?;
    let mut c = csv::Writer::from_writer(w);
    let csv_err = |e: csv::Error| parse_err(path, e.to_string());
    c.write_record(["freq_hz", "value"]).map_err(csv_err)?;
    for (f, p) in scan.detuning_grid.iter().zip(&scan.transmitted_power) {
        c.write_record([ordinary(*f).as_f64().to_string(), p.as_f64().to_string()])
            .map_err(csv_err)?;
    }
    c.flush().map_err(io_err(path))
}

/// Sweep table `delta_hz, n_low, n_high, n_ultimate, stable_flag`; unstable
/// rows leave the occupations empty.
pub fn write_sweep_csv<T: Real>(path: &Path, points: &[SweepPoint<T>]) -> Result<()> {
    let mut c = csv::Writer::from_path(path).map_err(|e| parse_err(path, e.to_string()))?;
    let csv_err = |e: csv::Error| parse_err(path, e.to_string());
    c.write_record(["delta_hz", "n_low", "n_high", "n_ultimate", "stable_flag"])
        .map_err(csv_err)?;
    let cell = |v: Option<T>| v.map(|x| x.as_f64().to_string()).unwrap_or_default();
    for p in points {
        c.write_record([
            ordinary(p.delta).as_f64().to_string(),
            cell(p.n_low),
            cell(p.n_high),
            cell(p.n_ultimate),
            u8::from(p.stable).to_string(),
        ])
        .map_err(csv_err)?;
    }
    c.flush().map_err(io_err(path))
}

#[derive(Serialize, Deserialize)]
struct TraceHeader {
    dt: f64,
    seed: u64,
    hash: String,
}

/// Binary trace: an 80-byte space-padded JSON header {dt, seed, hash}
/// followed by little-endian f64 samples.
pub fn write_time_trace<T: Real>(path: &Path, trace: &TimeTrace<T>) -> Result<()> {
    trace.validate()?;
    let header = serde_json::to_string(&TraceHeader {
        dt: trace.dt.as_f64(),
        seed: trace.seed,
        hash: trace.model_hash.clone(),
    })?;
    if header.len() > TRACE_HEADER_LEN {
        return Err(Error::domain(
            "write_time_trace",
            format!("header of {} bytes exceeds {TRACE_HEADER_LEN}", header.len()),
        ));
    }
    let mut w = BufWriter::new(File::create(path).map_err(io_err(path))?);
    let mut head = header.into_bytes();
    head.resize(TRACE_HEADER_LEN, b' ');
    w.write_all(&head).map_err(io_err(path))?;
    for s in &trace.samples {
        w.write_all(&s.as_f64().to_le_bytes()).map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_time_trace<T: Real>(path: &Path) -> Result<TimeTrace<T>> {
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    if bytes.len() < TRACE_HEADER_LEN || (bytes.len() - TRACE_HEADER_LEN) % 8 != 0 {
        return Err(parse_err(path, "not a time trace: bad length"));
    }
    let head = std::str::from_utf8(&bytes[..TRACE_HEADER_LEN]).map_err(|_| parse_err(path, "header is not UTF-8"))?;
    let h: TraceHeader = serde_json::from_str(head.trim_end()).map_err(|e| parse_err(path, format!("header: {e}")))?;
    let samples = bytes[TRACE_HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| T::of(f64::from_le_bytes(c.try_into().expect("8-byte chunk"))))
        .collect();
    let trace = TimeTrace {
        dt: T::of(h.dt),
        samples,
        seed: h.seed,
        model_hash: h.hash,
    };
    trace.validate().map_err(|e| parse_err(path, e.to_string()))?;
    Ok(trace)
}

/// `dir/name`, creating `dir` when missing.
pub fn artifact_path(dir: &Path, name: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    Ok(dir.join(name))
}
