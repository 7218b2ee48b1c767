//! Cohort-level stages: feature extraction, univariate screening, and
//! classification with validation of the predicted groups.

use rayon::prelude::*;

use crate::conv3d::{downsample_mask, forward_features, init_seeded_weights, load_weights, NetworkSpec, NetworkWeights};
use crate::error::{Error, Result};
use crate::learn::{
    chisquare_auc_compare, cross_validate, oob_importance, train_forest, AucComparison, CvReport, ImportanceReport,
};
use crate::survival::{
    align_records, feature_screen, impute_censored, km_estimate, logrank_test, median, median_split, KmCurve,
    LogRankResult, ScreeningTable, SurvivalRecord,
};
use crate::table::{FeatureRow, FeatureTable};
use crate::texture::{compute_drf, feature_vector, DescriptorKind};
use crate::volume_io::{
    apply_mask, conform, normalize_gray_levels, read_mask, read_volume, resample_isotropic, Dims, RoiMask,
    Volume, VolumeFormat,
};

use super::config::{RunConfig, WeightsSource};
use super::manifest::{CohortManifest, ManifestRow};

pub fn load_network(config: &RunConfig, spec: &NetworkSpec) -> Result<NetworkWeights> {
    match &config.weights {
        WeightsSource::File(p) => load_weights(p, spec),
        WeightsSource::Seeded(s) => Ok(init_seeded_weights(*s, spec)),
        WeightsSource::MasterSeed => Ok(init_seeded_weights(config.seed, spec)),
    }
}

/// Resample, normalize, conform, then zero everything outside the ROI.
pub fn preprocess(vol: &Volume, mask: &RoiMask, config: &RunConfig) -> Result<(Volume, RoiMask)> {
    let (vol, mask) = resample_isotropic(vol, mask, config.target_spacing)?;
    let vol = normalize_gray_levels(&vol, config.gray_levels)?;
    let (vol, mask) = conform(&vol, &mask, config.input_size)?;
    if mask.is_empty() {
        return Err(Error::Region("ROI is empty after conforming".into()));
    }
    Ok((apply_mask(&vol, &mask)?, mask))
}

fn uniform_factor(input: Dims, out: Dims) -> Result<usize> {
    let f = input[0] / out[0].max(1);
    if (0..3).any(|a| out[a] * f != input[a]) {
        return Err(Error::Shape(format!("layer dims {out:?} are not a uniform reduction of {input:?}")));
    }
    Ok(f)
}

/// SRF and DRF of one preprocessed patient.
pub fn patient_features(
    patient_id: &str,
    vol: &Volume,
    mask: &RoiMask,
    weights: &NetworkWeights,
    spec: &NetworkSpec,
    matrix_levels: usize,
) -> Result<FeatureRow> {
    let srf = feature_vector(vol.data(), mask, matrix_levels)?;
    let (l1, l2) = forward_features(vol, weights, spec)?;
    let m1 = downsample_mask(mask, uniform_factor(vol.dims(), l1.dims())?)?;
    let m2 = downsample_mask(mask, uniform_factor(vol.dims(), l2.dims())?)?;
    let drf = compute_drf(&l1, &l2, &m1, &m2, matrix_levels)?;
    Ok(FeatureRow {
        patient_id: patient_id.to_string(),
        srf,
        drf,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatientError {
    pub patient_id: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Extraction {
    pub table: FeatureTable,
    /// Patients excluded from the table, in manifest order.
    pub errors: Vec<PatientError>,
}

fn extract_row(row: &ManifestRow, manifest: &CohortManifest, config: &RunConfig, weights: &NetworkWeights, spec: &NetworkSpec) -> Result<FeatureRow> {
    let vp = manifest.resolve(&row.volume_path);
    let mp = manifest.resolve(&row.mask_path);
    let vol = read_volume(&vp, VolumeFormat::from_path(&vp))?;
    let mask = read_mask(&mp, VolumeFormat::from_path(&mp))?;
    let (vol, mask) = preprocess(&vol, &mask, config)?;
    patient_features(&row.patient_id, &vol, &mask, weights, spec, config.matrix_levels)
}

/// Per-patient extraction in parallel. A failing patient lands in the error
/// ledger and the rest of the cohort continues.
pub fn extract_cohort_features(manifest: &CohortManifest, config: &RunConfig) -> Result<Extraction> {
    let spec = NetworkSpec::default();
    spec.output_dims(config.input_size)?;
    let weights = load_network(config, &spec)?;
    let results: Vec<Result<FeatureRow>> = manifest
        .rows
        .par_iter()
        .map(|row| extract_row(row, manifest, config, &weights, &spec))
        .collect();
    let mut table = FeatureTable::default();
    let mut errors = Vec::new();
    for (row, res) in manifest.rows.iter().zip(results) {
        match res {
            Ok(r) => table.rows.push(r),
            Err(e) => errors.push(PatientError {
                patient_id: row.patient_id.clone(),
                message: e.to_string(),
            }),
        }
    }
    Ok(Extraction { table, errors })
}

/// Two KM curves compared by a log-rank test. Group A is listed first.
#[derive(Debug, Clone, PartialEq)]
pub struct KmComparison {
    pub name: String,
    pub group_labels: [String; 2],
    pub curves: [KmCurve; 2],
    pub sizes: [usize; 2],
    pub logrank: Option<LogRankResult>,
}

fn compare_groups(name: String, labels: [&str; 2], records: &[&SurvivalRecord], in_a: &[bool]) -> Result<KmComparison> {
    let a: Vec<SurvivalRecord> = records.iter().zip(in_a).filter(|(_, &g)| g).map(|(r, _)| (*r).clone()).collect();
    let b: Vec<SurvivalRecord> = records.iter().zip(in_a).filter(|(_, &g)| !g).map(|(r, _)| (*r).clone()).collect();
    let curve = |g: &[SurvivalRecord]| -> Result<KmCurve> {
        if g.is_empty() {
            Ok(KmCurve {
                points: Vec::new(),
                median_survival: None,
                max_time: 0.0,
            })
        } else {
            km_estimate(g)
        }
    };
    let logrank = if a.is_empty() || b.is_empty() {
        None
    } else {
        Some(logrank_test(&a, &b)?)
    };
    Ok(KmComparison {
        name,
        group_labels: [labels[0].to_string(), labels[1].to_string()],
        curves: [curve(&a)?, curve(&b)?],
        sizes: [a.len(), b.len()],
        logrank,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Univariate {
    pub screening: ScreeningTable,
    /// High vs low KM comparison for each significant feature.
    pub km: Vec<KmComparison>,
}

pub fn run_univariate(table: &FeatureTable, records: &[SurvivalRecord]) -> Result<Univariate> {
    let screening = feature_screen(table, records)?;
    let aligned = align_records(table, records)?;
    let mut km = Vec::new();
    for row in screening.significant() {
        let split = median_split(&table.column(row.kind, row.feature))?;
        km.push(compare_groups(
            format!("{}_{}", row.kind, row.feature_name()),
            ["high", "low"],
            &aligned,
            &split.high,
        )?);
    }
    Ok(Univariate { screening, km })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub patient_ids: Vec<String>,
    /// Median of the imputed survival times.
    pub label_threshold: f64,
    /// `true` = long-term survivor (imputed time at or above the median).
    pub labels: Vec<bool>,
    pub drf: CvReport,
    pub srf: CvReport,
    /// DRF as classifier A, SRF as B.
    pub comparison: AucComparison,
    /// Over the 82 combined columns, SRF first.
    pub importance: ImportanceReport,
    /// Predicted short vs long groups, DRF then SRF.
    pub predicted_groups: Vec<KmComparison>,
}

impl Classification {
    pub fn cv(&self, kind: DescriptorKind) -> &CvReport {
        match kind {
            DescriptorKind::Srf => &self.srf,
            DescriptorKind::Drf => &self.drf,
        }
    }
}

pub fn run_classification(table: &FeatureTable, records: &[SurvivalRecord], config: &RunConfig) -> Result<Classification> {
    let aligned: Vec<SurvivalRecord> = align_records(table, records)?.into_iter().cloned().collect();
    let imputed = impute_censored(&aligned)?;
    let times: Vec<f64> = imputed.iter().map(|r| r.time_days).collect();
    let label_threshold = median(&times);
    let labels: Vec<bool> = times.iter().map(|&t| t >= label_threshold).collect();

    let mut params = config.forest.clone();
    params.seed = config.seed;
    let drf = cross_validate(&table.matrix(DescriptorKind::Drf), &labels, &params, config.folds)?;
    let srf = cross_validate(&table.matrix(DescriptorKind::Srf), &labels, &params, config.folds)?;
    let comparison = chisquare_auc_compare(&drf.predicted, &srf.predicted, &labels)?;

    let combined = table.combined_matrix();
    let model = train_forest(&combined, &labels, &params)?;
    let importance = oob_importance(&model, &combined, &labels, config.seed)?;

    let refs: Vec<&SurvivalRecord> = aligned.iter().collect();
    let mut predicted_groups = Vec::new();
    for (kind, cv) in [(DescriptorKind::Drf, &drf), (DescriptorKind::Srf, &srf)] {
        let short: Vec<bool> = cv.predicted.iter().map(|&p| !p).collect();
        predicted_groups.push(compare_groups(format!("predicted_{kind}"), ["short", "long"], &refs, &short)?);
    }
    Ok(Classification {
        patient_ids: table.rows.iter().map(|r| r.patient_id.clone()).collect(),
        label_threshold,
        labels,
        drf,
        srf,
        comparison,
        importance,
        predicted_groups,
    })
}
