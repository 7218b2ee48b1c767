//! Univariate survival analysis: censoring imputation, median splits,
//! Kaplan-Meier curves, two-group log-rank tests with an O/E hazard ratio,
//! Holm step-down correction, and the per-feature screen built on them.

use std::collections::HashMap;

use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::table::FeatureTable;
use crate::texture::{DescriptorKind, FEATURE_COUNT, FEATURE_NAMES};

/// Family-wise significance level of the feature screen.
pub const SIGNIFICANCE_LEVEL: f64 = 0.05;
const Z_975: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalRecord {
    pub patient_id: String,
    pub time_days: f64,
    /// `true` for death, `false` for alive at last visit (censored).
    pub event: bool,
}

impl SurvivalRecord {
    pub fn new(patient_id: impl Into<String>, time_days: f64, event: bool) -> Result<Self> {
        if !(time_days >= 0.0) || !time_days.is_finite() {
            return Err(Error::Argument(format!("survival time must be >= 0, got {time_days}")));
        }
        Ok(SurvivalRecord {
            patient_id: patient_id.into(),
            time_days,
            event,
        })
    }
}

/// Replaces each censored time by the mean time of the deaths at or after
/// it. A censored record with no later death keeps its own time. Event flags
/// are left untouched.
pub fn impute_censored(records: &[SurvivalRecord]) -> Result<Vec<SurvivalRecord>> {
    if records.is_empty() {
        return Err(Error::Argument("no survival records".into()));
    }
    let deaths: Vec<f64> = records.iter().filter(|r| r.event).map(|r| r.time_days).collect();
    Ok(records
        .iter()
        .map(|r| {
            if r.event {
                return r.clone();
            }
            let later: Vec<f64> = deaths.iter().copied().filter(|&t| t >= r.time_days).collect();
            let time_days = if later.is_empty() {
                r.time_days
            } else {
                later.iter().sum::<f64>() / later.len() as f64
            };
            SurvivalRecord {
                time_days,
                ..r.clone()
            }
        })
        .collect())
}

/// Sample median of a non-empty slice (mean of the middle two for even n).
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MedianSplit {
    pub threshold: f64,
    /// `true` = high group (value ≥ threshold).
    pub high: Vec<bool>,
}

/// Splits at the sample median: `value < threshold` is low, otherwise high.
/// A split leaving either group empty is reported as [`Error::DegenerateSplit`].
pub fn median_split(values: &[f64]) -> Result<MedianSplit> {
    if values.len() < 2 {
        return Err(Error::Argument(format!("median split needs >= 2 values, got {}", values.len())));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Argument("median split on non-finite values".into()));
    }
    let threshold = median(values);
    let high: Vec<bool> = values.iter().map(|&v| v >= threshold).collect();
    let n_high = high.iter().filter(|&&h| h).count();
    if n_high == 0 || n_high == values.len() {
        return Err(Error::DegenerateSplit(threshold));
    }
    Ok(MedianSplit { threshold, high })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KmPoint {
    pub time: f64,
    pub survival: f64,
    /// Subjects at risk just before `time`.
    pub at_risk: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KmCurve {
    /// One point per distinct death time, ascending.
    pub points: Vec<KmPoint>,
    pub median_survival: Option<f64>,
    /// Largest observed time (event or censoring); the curve is flat after
    /// the last point up to here.
    pub max_time: f64,
}

impl KmCurve {
    /// S(t), right-continuous.
    pub fn survival_at(&self, t: f64) -> f64 {
        self.points
            .iter()
            .take_while(|p| p.time <= t)
            .last()
            .map_or(1.0, |p| p.survival)
    }
}

/// Product-limit estimator.
pub fn km_estimate(records: &[SurvivalRecord]) -> Result<KmCurve> {
    if records.is_empty() {
        return Err(Error::Argument("Kaplan-Meier needs at least one record".into()));
    }
    let mut sorted: Vec<(f64, bool)> = records.iter().map(|r| (r.time_days, r.event)).collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let max_time = sorted.last().map_or(0.0, |r| r.0);

    let mut points = Vec::new();
    let mut survival = 1.0;
    let mut at_risk = sorted.len();
    let mut i = 0;
    while i < sorted.len() {
        let t = sorted[i].0;
        let mut deaths = 0;
        let mut leaving = 0;
        while i < sorted.len() && sorted[i].0 == t {
            deaths += sorted[i].1 as usize;
            leaving += 1;
            i += 1;
        }
        if deaths > 0 {
            // (n − d)/n rather than 1 − d/n keeps simple fractions exact
            survival *= (at_risk - deaths) as f64 / at_risk as f64;
            points.push(KmPoint {
                time: t,
                survival,
                at_risk,
            });
        }
        at_risk -= leaving;
    }
    let median_survival = points.iter().find(|p| p.survival <= 0.5).map(|p| p.time);
    Ok(KmCurve {
        points,
        median_survival,
        max_time,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HazardRatio {
    pub ratio: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogRankResult {
    pub chi2: f64,
    pub p_value: f64,
    /// Observed deaths in groups A and B.
    pub observed: [f64; 2],
    /// Expected deaths under equal hazards.
    pub expected: [f64; 2],
    pub variance: f64,
    /// Hazard of A relative to B; `None` when undefined (a group without
    /// observed or expected deaths).
    pub hazard: Option<HazardRatio>,
}

/// Upper tail of the chi-square distribution with one degree of freedom.
pub fn chi2_sf_1df(x: f64) -> f64 {
    if x <= 0.0 {
        1.0
    } else {
        erfc((x / 2.0).sqrt()).clamp(0.0, 1.0)
    }
}

/// Two-group log-rank test. Deaths tied at a time share one risk-table row;
/// subjects censored at that time are still at risk for it.
pub fn logrank_test(group_a: &[SurvivalRecord], group_b: &[SurvivalRecord]) -> Result<LogRankResult> {
    if group_a.is_empty() || group_b.is_empty() {
        return Err(Error::Argument("log-rank test needs two non-empty groups".into()));
    }
    let mut all: Vec<(f64, bool, bool)> = group_a
        .iter()
        .map(|r| (r.time_days, r.event, true))
        .chain(group_b.iter().map(|r| (r.time_days, r.event, false)))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut n_a = group_a.len() as f64;
    let mut n = all.len() as f64;
    let (mut o_a, mut o_b, mut e_a, mut e_b, mut var) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let mut i = 0;
    while i < all.len() {
        let t = all[i].0;
        let (mut d, mut d_a, mut leave, mut leave_a) = (0.0, 0.0, 0.0, 0.0);
        while i < all.len() && all[i].0 == t {
            let (_, event, in_a) = all[i];
            if event {
                d += 1.0;
                if in_a {
                    d_a += 1.0;
                }
            }
            leave += 1.0;
            if in_a {
                leave_a += 1.0;
            }
            i += 1;
        }
        if d > 0.0 {
            let frac_a = n_a / n;
            o_a += d_a;
            o_b += d - d_a;
            e_a += d * frac_a;
            e_b += d * (1.0 - frac_a);
            if n > 1.0 {
                var += d * frac_a * (1.0 - frac_a) * (n - d) / (n - 1.0);
            }
        }
        n -= leave;
        n_a -= leave_a;
    }

    let chi2 = if var > 0.0 { (o_a - e_a).powi(2) / var } else { 0.0 };
    let hazard = (o_a > 0.0 && o_b > 0.0 && e_a > 0.0 && e_b > 0.0).then(|| {
        let ratio = (o_a / e_a) / (o_b / e_b);
        let half = Z_975 * (1.0 / e_a + 1.0 / e_b).sqrt();
        HazardRatio {
            ratio,
            ci_low: (ratio.ln() - half).exp(),
            ci_high: (ratio.ln() + half).exp(),
        }
    });
    Ok(LogRankResult {
        chi2,
        p_value: chi2_sf_1df(chi2),
        observed: [o_a, o_b],
        expected: [e_a, e_b],
        variance: var,
        hazard,
    })
}

/// Holm step-down adjusted p-values, returned in input order.
pub fn holm_bonferroni(p_values: &[f64]) -> Result<Vec<f64>> {
    if p_values.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::Argument("p-values must lie in [0, 1]".into()));
    }
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p_values[a].total_cmp(&p_values[b]).then(a.cmp(&b)));
    let mut adjusted = vec![0.0; m];
    let mut running = 0.0f64;
    for (rank, &idx) in order.iter().enumerate() {
        let candidate = ((m - rank) as f64 * p_values[idx]).min(1.0);
        running = running.max(candidate);
        adjusted[idx] = running;
    }
    Ok(adjusted)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScreeningRow {
    pub kind: DescriptorKind,
    pub feature: usize,
    pub raw_p: f64,
    pub holm_p: f64,
    pub neg_log10_p: f64,
    pub significant: bool,
    /// Median threshold used for the split; `None` for degenerate columns.
    pub threshold: Option<f64>,
    pub logrank: Option<LogRankResult>,
}

impl ScreeningRow {
    pub fn feature_name(&self) -> &'static str {
        FEATURE_NAMES[self.feature]
    }
}

/// One row per (kind, feature), SRF rows first, each block in descriptor order.
#[derive(Debug, Clone, PartialEq)]
pub struct ScreeningTable {
    pub rows: Vec<ScreeningRow>,
}

impl ScreeningTable {
    pub fn significant(&self) -> impl Iterator<Item = &ScreeningRow> {
        self.rows.iter().filter(|r| r.significant)
    }
}

/// Aligns records to the table's patient order; orphans on either side are a join error.
pub fn align_records<'a>(
    table: &FeatureTable,
    records: &'a [SurvivalRecord],
) -> Result<Vec<&'a SurvivalRecord>> {
    let by_id: HashMap<&str, &SurvivalRecord> =
        records.iter().map(|r| (r.patient_id.as_str(), r)).collect();
    let mut orphans: Vec<String> = table
        .rows
        .iter()
        .filter(|r| !by_id.contains_key(r.patient_id.as_str()))
        .map(|r| r.patient_id.clone())
        .collect();
    if table.rows.len() != records.len() || !orphans.is_empty() {
        let in_table: std::collections::HashSet<&str> =
            table.rows.iter().map(|r| r.patient_id.as_str()).collect();
        orphans.extend(
            records
                .iter()
                .filter(|r| !in_table.contains(r.patient_id.as_str()))
                .map(|r| r.patient_id.clone()),
        );
        if !orphans.is_empty() {
            return Err(Error::Join(orphans));
        }
    }
    Ok(table.rows.iter().map(|r| by_id[r.patient_id.as_str()]).collect())
}

/// Median split, log-rank test, and Holm correction for all 82 columns.
pub fn feature_screen(table: &FeatureTable, records: &[SurvivalRecord]) -> Result<ScreeningTable> {
    let aligned = align_records(table, records)?;
    let mut rows = Vec::with_capacity(2 * FEATURE_COUNT);
    for kind in DescriptorKind::ALL {
        for feature in 0..FEATURE_COUNT {
            let column = table.column(kind, feature);
            let (threshold, logrank) = match median_split(&column) {
                Ok(split) => {
                    let (mut high, mut low) = (Vec::new(), Vec::new());
                    for (r, &h) in aligned.iter().zip(&split.high) {
                        if h {
                            high.push((*r).clone());
                        } else {
                            low.push((*r).clone());
                        }
                    }
                    (Some(split.threshold), Some(logrank_test(&high, &low)?))
                }
                Err(Error::DegenerateSplit(_)) => (None, None),
                Err(e) => return Err(e),
            };
            let raw_p = logrank.as_ref().map_or(1.0, |l| l.p_value);
            rows.push(ScreeningRow {
                kind,
                feature,
                raw_p,
                holm_p: 0.0,
                neg_log10_p: -raw_p.max(f64::MIN_POSITIVE).log10(),
                significant: false,
                threshold,
                logrank,
            });
        }
    }
    let raw: Vec<f64> = rows.iter().map(|r| r.raw_p).collect();
    for (row, holm) in rows.iter_mut().zip(holm_bonferroni(&raw)?) {
        row.holm_p = holm;
        row.significant = holm < SIGNIFICANCE_LEVEL;
    }
    Ok(ScreeningTable { rows })
}
