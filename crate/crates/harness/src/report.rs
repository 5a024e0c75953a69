//! Result files.
//!
//! ```text
//! <out>/config.txt                    resolved configuration
//! <out>/checkpoints/<model>.ckpt      trained heads
//! <out>/cache/<model>.features        cached training features
//! <out>/logs/<model>.train.csv        epoch,loss,accuracy
//! <out>/whitebox/<model>.<attack>.csv epsilon,accuracy
//! <out>/adversarial/<source>.fgsm.<i>.bin
//! <out>/transfer.csv                  source,target,epsilon,accuracy
//! <out>/metrics.csv                   kind,seed,meyer_wallach,expressibility_kl,samples
//! <out>/manifest.txt
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use qrobust_core::attacks::RobustnessCurve;
use qrobust_core::metrics::MetricReport;
use qrobust_core::AttackKind;
use sha2::{Digest, Sha256};

use crate::error::{HarnessError, Result};
use crate::train::EpochStats;

#[derive(Debug, Clone, PartialEq)]
pub struct TransferRow {
    pub source: String,
    pub target: String,
    pub epsilon: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn config(&self) -> PathBuf {
        self.root.join("config.txt")
    }

    pub fn checkpoint(&self, model: &str) -> PathBuf {
        self.root.join("checkpoints").join(format!("{model}.ckpt"))
    }

    pub fn feature_cache(&self, model: &str) -> PathBuf {
        self.root.join("cache").join(format!("{model}.features"))
    }

    pub fn train_log(&self, model: &str) -> PathBuf {
        self.root.join("logs").join(format!("{model}.train.csv"))
    }

    pub fn curve(&self, model: &str, attack: AttackKind) -> PathBuf {
        self.root
            .join("whitebox")
            .join(format!("{model}.{attack}.csv"))
    }

    pub fn batch(&self, source: &str, eps_index: usize) -> PathBuf {
        self.root
            .join("adversarial")
            .join(format!("{source}.fgsm.{eps_index}.bin"))
    }

    pub fn transfer(&self) -> PathBuf {
        self.root.join("transfer.csv")
    }

    pub fn metrics(&self) -> PathBuf {
        self.root.join("metrics.csv")
    }

    pub fn manifest(&self) -> PathBuf {
        self.root.join("manifest.txt")
    }
}

pub(crate) fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)
            .map_err(|e| HarnessError::io(format!("create {}", dir.display()), e))?;
    }
    Ok(())
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    ensure_parent(path)?;
    fs::write(path, bytes).map_err(|e| HarnessError::io(format!("write {}", path.display()), e))
}

fn write_rows(
    path: &Path,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<()> {
    let csv_err = |source| HarnessError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(&row).map_err(csv_err)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| HarnessError::Runtime(format!("csv {}: {e}", path.display())))?;
    write_file(path, &bytes)
}

fn read_rows(path: &Path, header: &[&str]) -> Result<Vec<csv::StringRecord>> {
    let csv_err = |source| HarnessError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    if r.headers().map_err(csv_err)? != header {
        return Err(HarnessError::Runtime(format!(
            "{}: unexpected header",
            path.display()
        )));
    }
    r.records().map(|rec| rec.map_err(csv_err)).collect()
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, path: &Path) -> Result<T> {
    rec.get(i).and_then(|s| s.parse().ok()).ok_or_else(|| {
        HarnessError::Runtime(format!("{}: bad field {i} in {rec:?}", path.display()))
    })
}

pub fn write_curve(path: &Path, curve: &RobustnessCurve) -> Result<()> {
    write_rows(
        path,
        &["epsilon", "accuracy"],
        curve
            .points
            .iter()
            .map(|(e, a)| vec![e.to_string(), a.to_string()]),
    )
}

pub fn read_curve(path: &Path) -> Result<Vec<(f64, f64)>> {
    read_rows(path, &["epsilon", "accuracy"])?
        .iter()
        .map(|r| Ok((field(r, 0, path)?, field(r, 1, path)?)))
        .collect()
}

pub fn write_transfer(path: &Path, rows: &[TransferRow]) -> Result<()> {
    write_rows(
        path,
        &["source", "target", "epsilon", "accuracy"],
        rows.iter().map(|r| {
            vec![
                r.source.clone(),
                r.target.clone(),
                r.epsilon.to_string(),
                r.accuracy.to_string(),
            ]
        }),
    )
}

pub fn read_transfer(path: &Path) -> Result<Vec<TransferRow>> {
    read_rows(path, &["source", "target", "epsilon", "accuracy"])?
        .iter()
        .map(|r| {
            Ok(TransferRow {
                source: field(r, 0, path)?,
                target: field(r, 1, path)?,
                epsilon: field(r, 2, path)?,
                accuracy: field(r, 3, path)?,
            })
        })
        .collect()
}

pub fn write_metrics(path: &Path, reports: &[MetricReport]) -> Result<()> {
    let mut text = String::from(MetricReport::CSV_HEADER);
    text.push('\n');
    for r in reports {
        text.push_str(&r.csv_row());
        text.push('\n');
    }
    write_file(path, text.as_bytes())
}

/// `(kind, meyer_wallach, expressibility_kl)` per row.
pub fn read_metrics(path: &Path) -> Result<Vec<(String, f64, f64)>> {
    let header: Vec<&str> = MetricReport::CSV_HEADER.split(',').collect();
    read_rows(path, &header)?
        .iter()
        .map(|r| Ok((field(r, 0, path)?, field(r, 2, path)?, field(r, 3, path)?)))
        .collect()
}

pub fn write_train_log(path: &Path, log: &[EpochStats]) -> Result<()> {
    write_rows(
        path,
        &["epoch", "loss", "accuracy"],
        log.iter().map(|s| {
            vec![
                s.epoch.to_string(),
                s.loss.to_string(),
                s.accuracy.to_string(),
            ]
        }),
    )
}

pub fn read_train_log(path: &Path) -> Result<Vec<EpochStats>> {
    read_rows(path, &["epoch", "loss", "accuracy"])?
        .iter()
        .map(|r| {
            Ok(EpochStats {
                epoch: field(r, 0, path)?,
                loss: field(r, 1, path)?,
                accuracy: field(r, 2, path)?,
            })
        })
        .collect()
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes =
        fs::read(path).map_err(|e| HarnessError::io(format!("read {}", path.display()), e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}
