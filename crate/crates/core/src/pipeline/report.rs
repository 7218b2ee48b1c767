//! File outputs of a run: CSV tables, KM step-curve SVGs, and a JSON run
//! manifest. Everything is a pure function of the results, so reruns with
//! the same inputs produce identical bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::survival::{KmCurve, ScreeningTable};
use crate::texture::{DescriptorKind, FEATURE_COUNT, FEATURE_NAMES};

use super::config::RunConfig;
use super::study::{Classification, Extraction, KmComparison, Univariate};

/// Results to write; absent stages are skipped.
#[derive(Debug, Clone, Copy)]
pub struct RunResults<'a> {
    pub config: &'a RunConfig,
    pub extraction: Option<&'a Extraction>,
    pub univariate: Option<&'a Univariate>,
    pub classification: Option<&'a Classification>,
}

fn write_file(dir: &Path, name: &str, contents: &str, written: &mut Vec<String>) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    written.push(name.to_string());
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| x.to_string())
}

pub fn screening_csv(s: &ScreeningTable) -> String {
    let mut out = String::from("kind,feature,raw_p,holm_p,neg_log10_p,significant,threshold,hazard_ratio,ci_low,ci_high\n");
    for r in &s.rows {
        let hz = r.logrank.as_ref().and_then(|l| l.hazard);
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.kind,
            r.feature_name(),
            r.raw_p,
            r.holm_p,
            r.neg_log10_p,
            r.significant as u8,
            opt(r.threshold),
            opt(hz.map(|h| h.ratio)),
            opt(hz.map(|h| h.ci_low)),
            opt(hz.map(|h| h.ci_high)),
        );
    }
    out
}

/// One row per (kind, feature) cell of the heatmap, SRF block first.
pub fn heatmap_csv(s: &ScreeningTable) -> String {
    let mut out = String::from("kind,feature,neg_log10_p\n");
    for r in &s.rows {
        let _ = writeln!(out, "{},{},{}", r.kind, r.feature_name(), r.neg_log10_p);
    }
    out
}

pub fn km_csv(c: &KmComparison) -> String {
    let mut out = String::from("group,time,survival,at_risk\n");
    for (label, curve) in c.group_labels.iter().zip(&c.curves) {
        let _ = writeln!(out, "{label},0,1,");
        for p in &curve.points {
            let _ = writeln!(out, "{label},{},{},{}", p.time, p.survival, p.at_risk);
        }
    }
    out
}

const SVG_W: f64 = 640.0;
const SVG_H: f64 = 400.0;
const MARGIN: [f64; 4] = [60.0, 20.0, 30.0, 50.0]; // left, right, top, bottom
const COLORS: [&str; 2] = ["#c0392b", "#2471a3"];

fn step_points(curve: &KmCurve, t_max: f64) -> Vec<(f64, f64)> {
    let mut pts = vec![(0.0, 1.0)];
    let mut s = 1.0;
    for p in &curve.points {
        pts.push((p.time, s));
        pts.push((p.time, p.survival));
        s = p.survival;
    }
    pts.push((t_max, s));
    pts
}

/// Kaplan-Meier step curves with axes, labels and a legend.
pub fn km_svg(c: &KmComparison) -> String {
    let t_max = c.curves.iter().map(|k| k.max_time).fold(0.0, f64::max).max(1.0);
    let pw = SVG_W - MARGIN[0] - MARGIN[1];
    let ph = SVG_H - MARGIN[2] - MARGIN[3];
    let sx = |t: f64| MARGIN[0] + t / t_max * pw;
    let sy = |s: f64| MARGIN[2] + (1.0 - s) * ph;
    let mut o = String::new();
    let _ = writeln!(
        o,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_W}" height="{SVG_H}" viewBox="0 0 {SVG_W} {SVG_H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(o, r#"<title>{}</title>"#, c.name);
    let (x0, y0, x1, y1) = (sx(0.0), sy(0.0), sx(t_max), sy(1.0));
    let _ = writeln!(o, r#"<path d="M{x0:.2},{y1:.2} V{y0:.2} H{x1:.2}" fill="none" stroke="black"/>"#);
    for i in 0..=4 {
        let s = i as f64 / 4.0;
        let _ = writeln!(
            o,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{s}</text>"#,
            x0 - 6.0,
            sy(s) + 4.0
        );
        let t = t_max * s;
        let _ = writeln!(
            o,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{:.0}</text>"#,
            sx(t),
            y0 + 16.0,
            t
        );
    }
    let _ = writeln!(
        o,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">Time (days)</text>"#,
        MARGIN[0] + pw / 2.0,
        SVG_H - 8.0
    );
    let _ = writeln!(
        o,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">Survival probability</text>"#,
        MARGIN[2] + ph / 2.0,
        MARGIN[2] + ph / 2.0
    );
    for (g, (curve, label)) in c.curves.iter().zip(&c.group_labels).enumerate() {
        let pts: Vec<String> = step_points(curve, t_max)
            .iter()
            .map(|&(t, s)| format!("{:.2},{:.2}", sx(t), sy(s)))
            .collect();
        let _ = writeln!(
            o,
            r#"<polyline class="km-{label}" points="{}" fill="none" stroke="{}" stroke-width="2"/>"#,
            pts.join(" "),
            COLORS[g]
        );
        let ly = MARGIN[2] + 14.0 + 16.0 * g as f64;
        let lx = SVG_W - MARGIN[1] - 150.0;
        let _ = writeln!(
            o,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{}" stroke-width="2"/>"#,
            lx + 20.0,
            COLORS[g]
        );
        let _ = writeln!(
            o,
            r#"<text x="{:.2}" y="{:.2}">{label} (n={})</text>"#,
            lx + 26.0,
            ly + 4.0,
            c.sizes[g]
        );
    }
    if let Some(lr) = &c.logrank {
        let hr = lr.hazard.map_or("HR n/a".to_string(), |h| {
            format!("HR={:.2}; CI={:.2}-{:.2}", h.ratio, h.ci_low, h.ci_high)
        });
        let _ = writeln!(
            o,
            r#"<text x="{:.2}" y="{:.2}">p={:.3e}; {hr}</text>"#,
            MARGIN[0] + 8.0,
            y0 - 8.0,
            lr.p_value
        );
    }
    o.push_str("</svg>\n");
    o
}

fn logrank_summary_csv(groups: &[KmComparison]) -> String {
    let mut out = String::from("name,group_a,group_b,n_a,n_b,median_a,median_b,chi2,p_value,hazard_ratio,ci_low,ci_high\n");
    for c in groups {
        let lr = c.logrank.as_ref();
        let hz = lr.and_then(|l| l.hazard);
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            c.name,
            c.group_labels[0],
            c.group_labels[1],
            c.sizes[0],
            c.sizes[1],
            opt(c.curves[0].median_survival),
            opt(c.curves[1].median_survival),
            opt(lr.map(|l| l.chi2)),
            opt(lr.map(|l| l.p_value)),
            opt(hz.map(|h| h.ratio)),
            opt(hz.map(|h| h.ci_low)),
            opt(hz.map(|h| h.ci_high)),
        );
    }
    out
}

pub fn auc_summary_csv(c: &Classification) -> String {
    let k = c.drf.fold_aucs.len();
    let mut out = String::from("kind,mean_auc");
    for f in 1..=k {
        let _ = write!(out, ",fold_{f}");
    }
    out.push('\n');
    for kind in [DescriptorKind::Drf, DescriptorKind::Srf] {
        let cv = c.cv(kind);
        let _ = write!(out, "{kind},{}", cv.mean_auc);
        for a in &cv.fold_aucs {
            let _ = write!(out, ",{a}");
        }
        out.push('\n');
    }
    out
}

fn comparison_csv(c: &Classification) -> String {
    let cmp = &c.comparison;
    format!(
        "only_drf_correct,only_srf_correct,statistic,p_value,low_expected_count,degenerate\n{},{},{},{},{},{}\n",
        cmp.discordant[0], cmp.discordant[1], cmp.statistic, cmp.p_value, cmp.low_expected_count as u8, cmp.degenerate as u8
    )
}

fn cv_csv(c: &Classification, kind: DescriptorKind) -> String {
    let cv = c.cv(kind);
    let mut out = String::from("patient_id,fold,score,predicted_long,label_long\n");
    for (i, id) in c.patient_ids.iter().enumerate() {
        let _ = writeln!(
            out,
            "{id},{},{},{},{}",
            cv.folds[i] + 1,
            cv.scores[i],
            cv.predicted[i] as u8,
            c.labels[i] as u8
        );
    }
    out
}

/// Importance rows sorted by descending importance; ties keep column order.
pub fn importance_csv(c: &Classification) -> String {
    let imp = &c.importance;
    let mut order: Vec<usize> = (0..imp.importance.len()).collect();
    order.sort_by(|&a, &b| imp.importance[b].total_cmp(&imp.importance[a]).then(a.cmp(&b)));
    let mut out = String::from("rank,kind,feature,importance,mean_drop,std_drop,predictive\n");
    for (rank, &j) in order.iter().enumerate() {
        let kind = if j < FEATURE_COUNT { DescriptorKind::Srf } else { DescriptorKind::Drf };
        let _ = writeln!(
            out,
            "{},{kind},{},{},{},{},{}",
            rank + 1,
            FEATURE_NAMES[j % FEATURE_COUNT],
            imp.importance[j],
            imp.mean_drop[j],
            imp.std_drop[j],
            imp.is_predictive(j) as u8
        );
    }
    out
}

fn errors_csv(e: &Extraction) -> String {
    let mut out = String::from("patient_id,error\n");
    for pe in &e.errors {
        let msg = pe.message.replace(['\n', '\r'], " ").replace('"', "'");
        let _ = writeln!(out, "{},\"{msg}\"", pe.patient_id);
    }
    out
}

fn num(v: f64) -> Value {
    serde_json::Number::from_f64(v).map_or(Value::Null, Value::Number)
}

fn run_manifest(r: &RunResults, files: &[String]) -> String {
    let mut cfg = Map::new();
    for (k, v) in r.config.describe() {
        cfg.insert(k.to_string(), Value::String(v));
    }
    let mut m = Map::new();
    m.insert("tool".into(), json!("deeprad"));
    m.insert(
        "versions".into(),
        json!({
            "deeprad": env!("CARGO_PKG_VERSION"),
            "feature_count": FEATURE_COUNT,
            "features_csv": "1",
        }),
    );
    m.insert("seed".into(), json!(r.config.seed));
    m.insert("config".into(), Value::Object(cfg));
    if let Some(e) = r.extraction {
        m.insert(
            "extraction".into(),
            json!({ "patients": e.table.len(), "failed": e.errors.len() }),
        );
    }
    if let Some(u) = r.univariate {
        m.insert(
            "screening".into(),
            json!({ "rows": u.screening.rows.len(), "significant": u.screening.significant().count() }),
        );
    }
    if let Some(c) = r.classification {
        let groups: Vec<Value> = c
            .predicted_groups
            .iter()
            .map(|g| json!({ "name": g.name, "p_value": g.logrank.as_ref().map(|l| num(l.p_value)) }))
            .collect();
        m.insert(
            "classification".into(),
            json!({
                "label_threshold_days": num(c.label_threshold),
                "drf_mean_auc": num(c.drf.mean_auc),
                "srf_mean_auc": num(c.srf.mean_auc),
                "comparison_p": num(c.comparison.p_value),
                "predicted_groups": groups,
            }),
        );
    }
    m.insert("files".into(), json!(files));
    let mut s = serde_json::to_string_pretty(&Value::Object(m)).expect("serializable");
    s.push('\n');
    s
}

/// Writes every artifact for the stages present and returns the file names.
pub fn emit_reports(results: &RunResults, out_dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = out_dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut w = Vec::new();
    if let Some(e) = results.extraction {
        write_file(dir, "features.csv", &e.table.to_csv(), &mut w)?;
        write_file(dir, "extraction_errors.csv", &errors_csv(e), &mut w)?;
    }
    if let Some(u) = results.univariate {
        write_file(dir, "screening.csv", &screening_csv(&u.screening), &mut w)?;
        write_file(dir, "heatmap.csv", &heatmap_csv(&u.screening), &mut w)?;
        write_file(dir, "km_significant_summary.csv", &logrank_summary_csv(&u.km), &mut w)?;
        for c in &u.km {
            write_file(dir, &format!("km_{}.csv", c.name), &km_csv(c), &mut w)?;
            write_file(dir, &format!("km_{}.svg", c.name), &km_svg(c), &mut w)?;
        }
    }
    if let Some(c) = results.classification {
        write_file(dir, "auc_summary.csv", &auc_summary_csv(c), &mut w)?;
        write_file(dir, "auc_comparison.csv", &comparison_csv(c), &mut w)?;
        write_file(dir, "cv_drf.csv", &cv_csv(c, DescriptorKind::Drf), &mut w)?;
        write_file(dir, "cv_srf.csv", &cv_csv(c, DescriptorKind::Srf), &mut w)?;
        write_file(dir, "importance.csv", &importance_csv(c), &mut w)?;
        write_file(dir, "predicted_groups.csv", &logrank_summary_csv(&c.predicted_groups), &mut w)?;
        for g in &c.predicted_groups {
            write_file(dir, &format!("km_{}.csv", g.name), &km_csv(g), &mut w)?;
            write_file(dir, &format!("km_{}.svg", g.name), &km_svg(g), &mut w)?;
        }
    }
    let manifest = run_manifest(results, &w);
    write_file(dir, "run_manifest.json", &manifest, &mut w)?;
    Ok(w.into_iter().map(|n| dir.join(n)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::survival::KmPoint;

    fn flat(n: usize) -> KmCurve {
        KmCurve {
            points: Vec::new(),
            median_survival: None,
            max_time: n as f64,
        }
    }

    #[test]
    fn flat_curve_is_one_horizontal_line_at_top() {
        let c = KmComparison {
            name: "flat".into(),
            group_labels: ["a".into(), "b".into()],
            curves: [flat(10), flat(10)],
            sizes: [2, 2],
            logrank: None,
        };
        let svg = km_svg(&c);
        let top = format!("{:.2}", MARGIN[2]);
        let line = svg.lines().find(|l| l.contains("km-a")).unwrap();
        let pts = line.split("points=\"").nth(1).unwrap().split('"').next().unwrap();
        for p in pts.split(' ') {
            assert_eq!(p.split(',').nth(1).unwrap(), top);
        }
        assert!(svg.contains("Time (days)") && svg.contains("Survival probability"));
        assert_eq!(svg.matches("<polyline").count(), 2);
    }

    #[test]
    fn step_points_drop_vertically() {
        let c = KmCurve {
            points: vec![KmPoint {
                time: 2.0,
                survival: 0.5,
                at_risk: 2,
            }],
            median_survival: Some(2.0),
            max_time: 4.0,
        };
        assert_eq!(step_points(&c, 4.0), vec![(0.0, 1.0), (2.0, 1.0), (2.0, 0.5), (4.0, 0.5)]);
    }
}
