use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::metrics::Metrics;
use super::train::{EpochRecord, FoldReport};
use super::HarnessError;
use crate::model::save_checkpoint;

/// `epoch,train_loss,val_acc` rows.
pub fn history_csv(history: &[EpochRecord]) -> String {
    let mut s = String::from("epoch,train_loss,val_acc\n");
    for r in history {
        let _ = writeln!(s, "{},{},{}", r.epoch, r.train_loss, r.val_acc);
    }
    s
}

/// Square count matrix, rows are true classes, with a header row of
/// predicted-class columns.
pub fn confusion_csv(m: &Metrics) -> String {
    let c = m.confusion.len();
    let mut s = String::from("true\\pred");
    for j in 0..c {
        let _ = write!(s, ",{j}");
    }
    s.push('\n');
    for (i, row) in m.confusion.iter().enumerate() {
        let _ = write!(s, "{i}");
        for v in row {
            let _ = write!(s, ",{v}");
        }
        s.push('\n');
    }
    s
}

/// `key = value` lines.
pub fn format_manifest(entries: &[(String, String)]) -> String {
    entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
}

/// Write `metrics.csv`, `confusion.csv`, `best.ckpt` and `manifest.txt` for
/// one fold into `dir`.
pub fn write_fold_outputs(dir: &Path, report: &FoldReport, manifest: &[(String, String)]) -> Result<(), HarnessError> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("metrics.csv"), history_csv(&report.result.history))?;
    fs::write(dir.join("confusion.csv"), confusion_csv(&report.test))?;
    save_checkpoint(&report.result.model, &dir.join("best.ckpt"))?;
    let mut entries = manifest.to_vec();
    entries.push(("fold_id".into(), report.result.fold_id.to_string()));
    entries.push(("best_epoch".into(), report.result.best_epoch.map_or("none".into(), |e| e.to_string())));
    entries.push(("best_val_acc".into(), report.result.best_val_acc.map_or("none".into(), |a| a.to_string())));
    entries.push(("test_acc".into(), report.test.accuracy.to_string()));
    fs::write(dir.join("manifest.txt"), format_manifest(&entries))?;
    Ok(())
}
