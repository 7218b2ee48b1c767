use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use deeprad::pipeline::{
    extract_cohort_features, generate_synthetic_cohort, CohortManifest, RunConfig, SynthSpec, MANIFEST_HEADER,
};
use deeprad::table::FeatureTable;

fn synth(dir: &Path, n: usize, seed: u64) -> CohortManifest {
    let spec = SynthSpec {
        n_patients: n,
        dims: [16; 3],
        seed,
        ..SynthSpec::default()
    };
    generate_synthetic_cohort(&spec, dir).unwrap().manifest
}

fn small_config(manifest: &Path, out: &Path) -> RunConfig {
    let mut c = RunConfig::default();
    c.set("manifest", manifest.to_str().unwrap()).unwrap();
    c.set("out", out.to_str().unwrap()).unwrap();
    c.set("input_size", "16").unwrap();
    c.set("trees", "25").unwrap();
    c
}

fn deeprad(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_deeprad")).args(args).output().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn two_patients_give_two_rows_per_kind() {
    let dir = tempfile::tempdir().unwrap();
    let m = synth(dir.path(), 2, 1);
    let ex = extract_cohort_features(&m, &small_config(&dir.path().join("manifest.csv"), dir.path())).unwrap();
    assert!(ex.errors.is_empty());
    assert_eq!(ex.table.len(), 2);
    let csv = ex.table.to_csv();
    assert_eq!(csv.lines().filter(|l| l.split(',').nth(1) == Some("SRF")).count(), 2);
    assert_eq!(csv.lines().filter(|l| l.split(',').nth(1) == Some("DRF")).count(), 2);
    assert_eq!(FeatureTable::from_csv(&csv).unwrap(), ex.table);
}

#[test]
fn same_images_under_two_ids_give_identical_rows() {
    let dir = tempfile::tempdir().unwrap();
    let m = synth(dir.path(), 1, 2);
    let r = &m.rows[0];
    let text = format!(
        "{MANIFEST_HEADER}\na,{v},{k},100,1\nb,{v},{k},200,0\n",
        v = r.volume_path,
        k = r.mask_path
    );
    let dup = CohortManifest::parse(&text, dir.path()).unwrap();
    let ex = extract_cohort_features(&dup, &small_config(Path::new("unused"), dir.path())).unwrap();
    assert_eq!(ex.table.rows[0].srf, ex.table.rows[1].srf);
    assert_eq!(ex.table.rows[0].drf, ex.table.rows[1].drf);
}

#[test]
fn corrupt_volume_is_ledgered_and_the_rest_continue() {
    let dir = tempfile::tempdir().unwrap();
    let m = synth(dir.path(), 4, 3);
    fs::write(m.resolve(&m.rows[2].volume_path), b"not a volume").unwrap();
    let manifest = dir.path().join("manifest.csv");
    let ex = extract_cohort_features(&m, &small_config(&manifest, dir.path())).unwrap();
    assert_eq!(ex.table.len(), 3);
    assert_eq!(ex.errors.len(), 1);
    assert_eq!(ex.errors[0].patient_id, m.rows[2].patient_id);

    let out = dir.path().join("out");
    let o = deeprad(&["extract", "--manifest", path(&manifest), "--out", path(&out), "--input-size", "16"]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    let ledger = fs::read_to_string(out.join("extraction_errors.csv")).unwrap();
    assert_eq!(ledger.lines().count(), 2);
    assert!(ledger.lines().nth(1).unwrap().starts_with(&m.rows[2].patient_id));
}

#[test]
fn cli_exit_codes_and_stage_chaining() {
    let dir = tempfile::tempdir().unwrap();
    let cohort = dir.path().join("cohort");
    let o = deeprad(&["synth", "--out", path(&cohort), "--n", "24", "--dims", "16", "--seed", "5"]);
    assert_eq!(o.status.code(), Some(0));
    let manifest = cohort.join("manifest.csv");
    let out = dir.path().join("out");
    let common = ["--manifest", path(&manifest), "--out", path(&out), "--input-size", "16", "--trees", "20"];

    let o = deeprad(&[&["run-all"], &common[..]].concat());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("DRF mean AUC"));
    for f in ["features.csv", "screening.csv", "heatmap.csv", "auc_summary.csv", "importance.csv", "run_manifest.json"] {
        assert!(out.join(f).exists(), "{f}");
    }

    let o = deeprad(&[&["screen"], &common[..]].concat());
    assert_eq!(o.status.code(), Some(0));
    let o = deeprad(&[&["classify"], &common[..]].concat());
    assert_eq!(o.status.code(), Some(0));

    let o = deeprad(&["run-all", "--manifest", path(&dir.path().join("missing.csv")), "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));

    // a manifest that lost a patient no longer joins with the feature table
    let text = fs::read_to_string(&manifest).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    let dropped = lines[3].split(',').next().unwrap().to_string();
    let short: String = lines.iter().enumerate().filter(|(i, _)| *i != 3).map(|(_, l)| format!("{l}\n")).collect();
    let short_path = cohort.join("short.csv");
    fs::write(&short_path, short).unwrap();
    let o = deeprad(&["screen", "--manifest", path(&short_path), "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("unmatched ids") && err.contains(&dropped), "{err}");
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), 3, 4);
    let manifest = dir.path().join("manifest.csv");
    let out = dir.path().join("out");
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# small run\ninput_size = 16\nmatrix_levels=8\nseed=3\n").unwrap();
    let o = deeprad(&["extract", "--config", path(&cfg), "--manifest", path(&manifest), "--out", path(&out), "--seed", "9"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let run: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("run_manifest.json")).unwrap()).unwrap();
    assert_eq!(run["seed"], 9);
    assert_eq!(run["config"]["matrix_levels"], "8");
    assert_eq!(run["config"]["input_size"], "16,16,16");

    fs::write(&cfg, "bogus=1\n").unwrap();
    let o = deeprad(&["extract", "--config", path(&cfg), "--manifest", path(&manifest)]);
    assert_eq!(o.status.code(), Some(1));
}
