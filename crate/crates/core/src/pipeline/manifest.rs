//! Cohort manifest CSV: `patient_id,volume_path,mask_path,survival_days,event`.
//! Relative paths resolve against the manifest's own directory.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::survival::SurvivalRecord;

pub const MANIFEST_HEADER: &str = "patient_id,volume_path,mask_path,survival_days,event";

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRow {
    pub patient_id: String,
    pub volume_path: String,
    pub mask_path: String,
    pub survival_days: f64,
    pub event: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CohortManifest {
    pub rows: Vec<ManifestRow>,
    /// Directory relative paths are resolved against.
    pub base_dir: PathBuf,
}

impl CohortManifest {
    pub fn parse(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::format("header", "empty manifest"))?;
        if header.trim() != MANIFEST_HEADER {
            return Err(Error::format("header", format!("expected `{MANIFEST_HEADER}`")));
        }
        let mut seen = HashSet::new();
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            let lineno = i + 2;
            let cells: Vec<&str> = line.split(',').map(str::trim).collect();
            let [id, vol, mask, days, event] = cells.as_slice() else {
                return Err(Error::format("row", format!("line {lineno}: expected 5 cells")));
            };
            if id.is_empty() || !seen.insert(id.to_string()) {
                return Err(Error::format("patient_id", format!("line {lineno}: empty or duplicate id `{id}`")));
            }
            let survival_days: f64 = days
                .parse()
                .ok()
                .filter(|d: &f64| *d >= 0.0 && d.is_finite())
                .ok_or_else(|| Error::format("survival_days", format!("line {lineno}: `{days}`")))?;
            let event = match *event {
                "0" => false,
                "1" => true,
                other => return Err(Error::format("event", format!("line {lineno}: `{other}` is not 0 or 1"))),
            };
            rows.push(ManifestRow {
                patient_id: id.to_string(),
                volume_path: vol.to_string(),
                mask_path: mask.to_string(),
                survival_days,
                event,
            });
        }
        Ok(CohortManifest {
            rows,
            base_dir: base_dir.into(),
        })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, base)
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("{MANIFEST_HEADER}\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.patient_id, r.volume_path, r.mask_path, r.survival_days, r.event as u8
            );
        }
        out
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn resolve(&self, p: &str) -> PathBuf {
        let p = Path::new(p);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn records(&self) -> Vec<SurvivalRecord> {
        self.rows
            .iter()
            .map(|r| SurvivalRecord {
                patient_id: r.patient_id.clone(),
                time_days: r.survival_days,
                event: r.event,
            })
            .collect()
    }
}
