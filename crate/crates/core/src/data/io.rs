//! FXDS binary container and CSV readers/writers.
//!
//! FXDS layout (little-endian): `"FXDS"`, version `u32 = 1`, count, channels,
//! height, width, class_count (all `u32`), then `count × channels × height ×
//! width` `f32` pixels instance-major, then `count` `u8` labels.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::Dataset;

const MAGIC: &[u8; 4] = b"FXDS";
const VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 6 * 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetFormat {
    Fxds,
    Csv,
}

impl FromStr for DatasetFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fxds" => Ok(DatasetFormat::Fxds),
            "csv" => Ok(DatasetFormat::Csv),
            other => Err(Error::Dataset(format!("unknown dataset format {other:?}"))),
        }
    }
}

impl DatasetFormat {
    /// Guesses the format from a file extension, defaulting to FXDS.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => DatasetFormat::Csv,
            _ => DatasetFormat::Fxds,
        }
    }
}

/// Reads a dataset. CSV files carry no image geometry, so `shape` gives
/// `(channels, height, width)`; without it each row is a `1 × 1 × P` sample.
pub fn load_dataset(
    path: &Path,
    format: DatasetFormat,
    shape: Option<(usize, usize, usize)>,
) -> Result<Dataset> {
    match format {
        DatasetFormat::Fxds => read_fxds(path),
        DatasetFormat::Csv => read_csv(path, shape, None),
    }
}

pub fn encode_fxds(dataset: &Dataset) -> Result<Vec<u8>> {
    let (c, h, w) = dataset.shape();
    if dataset.class_count() > 256 {
        return Err(Error::Dataset(format!(
            "FXDS stores u8 labels; {} classes do not fit",
            dataset.class_count()
        )));
    }
    let mut out = Vec::with_capacity(HEADER_LEN + dataset.samples().len() * 4 + dataset.len());
    out.extend_from_slice(MAGIC);
    for v in [
        VERSION,
        dataset.len() as u32,
        c as u32,
        h as u32,
        w as u32,
        dataset.class_count() as u32,
    ] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in dataset.samples() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend(dataset.labels().iter().map(|&l| l as u8));
    Ok(out)
}

pub fn decode_fxds(bytes: &[u8]) -> Result<Dataset> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Dataset(format!(
            "FXDS header needs {HEADER_LEN} bytes, file has {}",
            bytes.len()
        )));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::Dataset(format!(
            "bad magic {:?}, expected \"FXDS\"",
            &bytes[..4]
        )));
    }
    let field =
        |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize;
    let version = field(0);
    if version != VERSION as usize {
        return Err(Error::Dataset(format!(
            "unsupported FXDS version {version}"
        )));
    }
    let (count, c, h, w, classes) = (field(1), field(2), field(3), field(4), field(5));
    let pixels = count
        .checked_mul(c)
        .and_then(|v| v.checked_mul(h))
        .and_then(|v| v.checked_mul(w))
        .ok_or_else(|| Error::Dataset("FXDS dimensions overflow".into()))?;
    let expected = HEADER_LEN + pixels * 4 + count;
    if bytes.len() != expected {
        return Err(Error::Dataset(format!(
            "FXDS payload size mismatch: header describes {count} samples of {c}x{h}x{w} \
             ({expected} bytes total) but file has {} bytes",
            bytes.len()
        )));
    }
    let body = &bytes[HEADER_LEN..];
    let samples = body[..pixels * 4]
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    let labels = body[pixels * 4..].iter().map(|&l| l as usize).collect();
    Dataset::new((c, h, w), classes, samples, labels)
}

pub fn write_fxds(path: &Path, dataset: &Dataset) -> Result<()> {
    let bytes = encode_fxds(dataset)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_fxds(path: &Path) -> Result<Dataset> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_fxds(&bytes)
}

/// Writes `label,p0,p1,...` rows.
pub fn write_csv(path: &Path, dataset: &Dataset) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    let mut header = vec!["label".to_string()];
    header.extend((0..dataset.sample_dim()).map(|i| format!("p{i}")));
    w.write_record(&header)?;
    for i in 0..dataset.len() {
        let mut row = vec![dataset.label(i).to_string()];
        row.extend(dataset.sample(i).iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.into_inner()
        .map_err(|e| Error::io(path, e.into_error()))?
        .flush()
        .map_err(|e| Error::io(path, e))
}

/// Reads `label,p0,p1,...` rows. The class count defaults to `max label + 1`.
pub fn read_csv(
    path: &Path,
    shape: Option<(usize, usize, usize)>,
    class_count: Option<usize>,
) -> Result<Dataset> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.kind() {
        csv::ErrorKind::Io(_) => Error::Dataset(format!("{}: {e}", path.display())),
        _ => Error::Csv(e),
    })?;
    let header = reader.headers()?.clone();
    if header.get(0) != Some("label") {
        return Err(Error::Dataset("CSV header must start with `label`".into()));
    }
    for (i, name) in header.iter().skip(1).enumerate() {
        if name != format!("p{i}") {
            return Err(Error::Dataset(format!(
                "CSV column {} is {name:?}, expected p{i}",
                i + 1
            )));
        }
    }
    let dim = header.len() - 1;
    let shape = shape.unwrap_or((1, 1, dim));
    if shape.0 * shape.1 * shape.2 != dim {
        return Err(Error::Dataset(format!(
            "CSV has {dim} pixel columns but shape {shape:?} needs {}",
            shape.0 * shape.1 * shape.2
        )));
    }
    let mut samples = Vec::new();
    let mut labels = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Dataset(format!("CSV row {}: {e}", row + 1)))?;
        let label: usize = record[0].trim().parse().map_err(|_| {
            Error::Dataset(format!("CSV row {}: bad label {:?}", row + 1, &record[0]))
        })?;
        labels.push(label);
        for field in record.iter().skip(1) {
            let v: f32 = field
                .trim()
                .parse()
                .map_err(|_| Error::Dataset(format!("CSV row {}: bad pixel {field:?}", row + 1)))?;
            samples.push(v);
        }
    }
    let classes = class_count.unwrap_or_else(|| labels.iter().max().map_or(0, |m| m + 1));
    Dataset::new(shape, classes, samples, labels)
}
