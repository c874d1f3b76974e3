use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::federation::RoundMetrics;

/// One JSON Lines record per completed round.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsRecord {
    pub round: usize,
    pub loss_local_c: f64,
    pub loss_local_r: f64,
    pub loss_global_c: f64,
    pub loss_global_r: f64,
    pub loss_total: f64,
    pub mean_angle_deg: Option<f64>,
    pub wall_ms: u64,
}

impl From<&RoundMetrics> for MetricsRecord {
    fn from(m: &RoundMetrics) -> Self {
        MetricsRecord {
            round: m.round,
            loss_local_c: m.losses.local_c,
            loss_local_r: m.losses.local_r,
            loss_global_c: m.losses.global_c,
            loss_global_r: m.losses.global_r,
            loss_total: m.loss_total,
            mean_angle_deg: m.mean_angle_deg,
            wall_ms: m.wall_ms,
        }
    }
}

/// Appends records to a JSONL file, flushing after each one.
pub struct MetricsSink {
    path: PathBuf,
    out: BufWriter<File>,
}

impl MetricsSink {
    pub fn create(path: &Path) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        Ok(MetricsSink {
            path: path.to_path_buf(),
            out: BufWriter::new(file),
        })
    }

    pub fn write(&mut self, record: &MetricsRecord) -> Result<()> {
        let line = serde_json::to_string(record)?;
        writeln!(self.out, "{line}")
            .and_then(|_| self.out.flush())
            .map_err(|e| Error::io(&self.path, e))
    }
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    BufReader::new(file)
        .lines()
        .map(|line| {
            let line = line.map_err(|e| Error::io(path, e))?;
            Ok(serde_json::from_str(&line)?)
        })
        .collect()
}
