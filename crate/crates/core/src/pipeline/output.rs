//! CSV exports for external plotting. Every file is written to a temporary
//! sibling and renamed into place.

use std::fs;
use std::path::{Path, PathBuf};

use crate::spectral::ClusterLabels;

use super::experiment::AbcReport;
use super::{read_file, PipelineError, Result, Variant};

/// Cluster labels of one spectral variant, with entity keys in map order.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterExport {
    pub variant: Variant,
    pub labels: ClusterLabels,
    pub keys: Vec<String>,
}

impl ClusterExport {
    pub fn file_name(&self) -> String {
        format!("clusters_{}_{}.csv", self.variant, self.labels.k())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("key,label\n");
        for (key, label) in self.keys.iter().zip(self.labels.labels()) {
            out.push_str(&format!("{key},{label}\n"));
        }
        out
    }
}

fn io_err(path: &Path, source: std::io::Error) -> PipelineError {
    PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes `contents` to `path` via a temporary file in the same directory.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let name = path
        .file_name()
        .ok_or_else(|| io_err(path, std::io::Error::other("path has no file name")))?;
    let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
    fs::write(&tmp, contents).map_err(|e| io_err(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| io_err(path, e))
}

/// Writes `curves_<label>.csv` per variant, `abc_report.csv`, and one
/// `clusters_<variant>_<k>.csv` per cluster export. Returns the written paths.
pub fn emit_outputs(report: &AbcReport, clusters: &[ClusterExport], dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let mut summary = String::from("variant,k,abc\n");
    for v in &report.variants {
        let mut curves = String::from("t,actual_mean,predicted_mean\n");
        for (t, (a, p)) in v
            .actual_mean
            .values()
            .iter()
            .zip(v.predicted_mean.values())
            .enumerate()
        {
            curves.push_str(&format!("{},{a},{p}\n", t + 1));
        }
        let path = dir.join(format!("curves_{}.csv", v.label));
        write_atomic(&path, &curves)?;
        written.push(path);
        let k = v.k.map(|k| k.to_string()).unwrap_or_default();
        summary.push_str(&format!("{},{k},{}\n", v.variant, v.abc));
    }
    let path = dir.join("abc_report.csv");
    write_atomic(&path, &summary)?;
    written.push(path);
    for c in clusters {
        let path = dir.join(c.file_name());
        write_atomic(&path, &c.to_csv())?;
        written.push(path);
    }
    Ok(written)
}

/// Reads a curves CSV back into `(actual_mean, predicted_mean)` columns.
pub fn read_curves_csv(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let text = read_file(path)?;
    let bad = |m: String| PipelineError::Dataset(format!("{}: {m}", path.display()));
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| bad(e.to_string()))?;
    if header.iter().collect::<Vec<_>>() != ["t", "actual_mean", "predicted_mean"] {
        return Err(bad("unexpected header".into()));
    }
    let (mut actual, mut predicted) = (Vec::new(), Vec::new());
    for rec in reader.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let num = |i: usize| {
            rec.get(i)
                .and_then(|c| c.parse::<f64>().ok())
                .ok_or_else(|| bad(format!("bad value in {rec:?}")))
        };
        actual.push(num(1)?);
        predicted.push(num(2)?);
    }
    Ok((actual, predicted))
}
