//! Per-patient SRF/DRF feature table and its CSV form:
//! `patient_id,kind,<41 feature columns>`, all SRF rows first.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::texture::{DescriptorKind, FeatureVector41, FEATURE_COUNT, FEATURE_NAMES};

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub patient_id: String,
    pub srf: FeatureVector41,
    pub drf: FeatureVector41,
}

impl FeatureRow {
    pub fn get(&self, kind: DescriptorKind) -> &FeatureVector41 {
        match kind {
            DescriptorKind::Srf => &self.srf,
            DescriptorKind::Drf => &self.drf,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeatureTable {
    pub rows: Vec<FeatureRow>,
}

impl FeatureTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, kind: DescriptorKind, feature: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r.get(kind)[feature]).collect()
    }

    /// Patients × 41 design matrix for one descriptor kind.
    pub fn matrix(&self, kind: DescriptorKind) -> Vec<Vec<f64>> {
        self.rows.iter().map(|r| r.get(kind).0.to_vec()).collect()
    }

    /// Patients × 82 matrix: the 41 SRF columns followed by the 41 DRF columns.
    pub fn combined_matrix(&self) -> Vec<Vec<f64>> {
        self.rows
            .iter()
            .map(|r| r.srf.0.iter().chain(r.drf.0.iter()).copied().collect())
            .collect()
    }

    pub fn header() -> String {
        let mut h = String::from("patient_id,kind");
        for name in FEATURE_NAMES {
            h.push(',');
            h.push_str(name);
        }
        h
    }

    pub fn to_csv(&self) -> String {
        let mut out = Self::header();
        out.push('\n');
        for kind in DescriptorKind::ALL {
            for row in &self.rows {
                let _ = write!(out, "{},{}", row.patient_id, kind);
                for v in row.get(kind).0 {
                    let _ = write!(out, ",{v}");
                }
                out.push('\n');
            }
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::format("header", "empty feature table"))?;
        if header.trim() != Self::header() {
            return Err(Error::format("header", "feature table columns do not match the descriptor order"));
        }
        let mut order: Vec<String> = Vec::new();
        let mut srf: std::collections::HashMap<String, FeatureVector41> = Default::default();
        let mut drf: std::collections::HashMap<String, FeatureVector41> = Default::default();
        for (lineno, line) in lines.enumerate() {
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != FEATURE_COUNT + 2 {
                return Err(Error::format(
                    "row",
                    format!("line {} has {} cells, expected {}", lineno + 2, cells.len(), FEATURE_COUNT + 2),
                ));
            }
            let id = cells[0].to_string();
            let kind: DescriptorKind = cells[1].parse()?;
            let mut values = [0.0; FEATURE_COUNT];
            for (dst, cell) in values.iter_mut().zip(&cells[2..]) {
                *dst = cell
                    .parse()
                    .map_err(|_| Error::format("row", format!("line {}: bad number `{cell}`", lineno + 2)))?;
            }
            let target = match kind {
                DescriptorKind::Srf => &mut srf,
                DescriptorKind::Drf => &mut drf,
            };
            if target.insert(id.clone(), FeatureVector41(values)).is_some() {
                return Err(Error::format("patient_id", format!("duplicate {kind} row for `{id}`")));
            }
            if kind == DescriptorKind::Srf {
                order.push(id);
            }
        }
        if srf.len() != drf.len() {
            return Err(Error::format("kind", "SRF and DRF row counts differ"));
        }
        let rows = order
            .into_iter()
            .map(|id| {
                let d = drf
                    .remove(&id)
                    .ok_or_else(|| Error::format("patient_id", format!("`{id}` has no DRF row")))?;
                Ok(FeatureRow {
                    srf: srf[&id],
                    drf: d,
                    patient_id: id,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(FeatureTable { rows })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(&text)
    }
}
