use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use deeprad::pipeline::{
    emit_reports, extract_cohort_features, generate_synthetic_cohort, run_classification, run_univariate,
    CohortManifest, RunConfig, RunResults, SynthSpec,
};
use deeprad::survival::SurvivalRecord;
use deeprad::table::FeatureTable;
use deeprad::{Error, Result};

#[derive(Parser)]
#[command(name = "deeprad", version, about = "Radiomic and deep texture descriptors for survival studies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract SRF and DRF for every patient in a manifest.
    Extract(RunArgs),
    /// Median-split log-rank screen of all 82 feature columns.
    Screen(StageArgs),
    /// Cross-validated forests on DRF and SRF, importance, and group validation.
    Classify(StageArgs),
    /// Write a synthetic cohort (volumes, masks, manifest).
    Synth(SynthArgs),
    /// Extract, screen, classify, and write all reports.
    RunAll(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Weight file; without it filters are drawn from the seed.
    #[arg(long)]
    weights: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    trees: Option<usize>,
    /// N or X,Y,Z.
    #[arg(long)]
    input_size: Option<String>,
    /// key=value settings file; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct StageArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Feature table; defaults to features.csv in the output directory.
    #[arg(long)]
    features: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 64)]
    dims: usize,
    #[arg(long, default_value_t = 0.06)]
    censoring: f64,
    #[arg(long, default_value_t = 300.0)]
    median_short: f64,
    #[arg(long, default_value_t = 600.0)]
    median_long: f64,
    /// Smoothing sigma (voxels) of the short-survival class.
    #[arg(long, default_value_t = SynthSpec::default().length_scales[0])]
    length_short: f64,
    #[arg(long, default_value_t = SynthSpec::default().length_scales[1])]
    length_long: f64,
    /// Exponent tying length-scale to survival time; 0 ties texture to class only.
    #[arg(long)]
    coupling: Option<f64>,
}

impl RunArgs {
    fn config(&self) -> Result<RunConfig> {
        let mut c = RunConfig::default();
        if let Some(p) = &self.config {
            c.apply_file(p)?;
        }
        let mut set = |k: &str, v: Option<String>| v.map_or(Ok(()), |v| c.set(k, &v));
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
        set("manifest", path(&self.manifest))?;
        set("weights", path(&self.weights))?;
        set("seed", self.seed.map(|s| s.to_string()))?;
        set("out", path(&self.out))?;
        set("folds", self.folds.map(|s| s.to_string()))?;
        set("trees", self.trees.map(|s| s.to_string()))?;
        set("input_size", self.input_size.clone())?;
        Ok(c)
    }
}

/// Patient ids listed in an extraction error ledger next to `features`.
fn failed_ids(features: &Path) -> HashSet<String> {
    let ledger = features.with_file_name("extraction_errors.csv");
    fs::read_to_string(ledger)
        .map(|t| {
            t.lines()
                .skip(1)
                .filter_map(|l| l.split(',').next())
                .map(str::to_string)
                .collect()
        })
        .unwrap_or_default()
}

fn surviving(records: Vec<SurvivalRecord>, failed: &HashSet<String>) -> Vec<SurvivalRecord> {
    records.into_iter().filter(|r| !failed.contains(&r.patient_id)).collect()
}

enum Outcome {
    Complete,
    Partial(usize),
}

fn run(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Synth(a) => {
            let spec = SynthSpec {
                n_patients: a.n,
                dims: [a.dims; 3],
                medians_days: [a.median_short, a.median_long],
                length_scales: [a.length_short, a.length_long],
                censoring_fraction: a.censoring,
                survival_coupling: a.coupling,
                seed: a.seed,
                ..SynthSpec::default()
            };
            let cohort = generate_synthetic_cohort(&spec, &a.out)?;
            println!("wrote {} patients to {}", cohort.manifest.rows.len(), a.out.display());
            Ok(Outcome::Complete)
        }
        Command::Extract(a) => {
            let config = a.config()?;
            let manifest = CohortManifest::read(&config.manifest)?;
            let ex = extract_cohort_features(&manifest, &config)?;
            let results = RunResults {
                config: &config,
                extraction: Some(&ex),
                univariate: None,
                classification: None,
            };
            emit_reports(&results, &config.out_dir)?;
            report_extraction(&ex.errors);
            Ok(partial(ex.errors.len()))
        }
        Command::Screen(a) => {
            let config = a.run.config()?;
            let (table, records) = load_stage_inputs(&a, &config)?;
            let uni = run_univariate(&table, &records)?;
            println!("{} significant after Holm correction", uni.screening.significant().count());
            let results = RunResults {
                config: &config,
                extraction: None,
                univariate: Some(&uni),
                classification: None,
            };
            emit_reports(&results, &config.out_dir)?;
            Ok(Outcome::Complete)
        }
        Command::Classify(a) => {
            let config = a.run.config()?;
            let (table, records) = load_stage_inputs(&a, &config)?;
            let cls = run_classification(&table, &records, &config)?;
            print_classification(&cls);
            let results = RunResults {
                config: &config,
                extraction: None,
                univariate: None,
                classification: Some(&cls),
            };
            emit_reports(&results, &config.out_dir)?;
            Ok(Outcome::Complete)
        }
        Command::RunAll(a) => {
            let config = a.config()?;
            let manifest = CohortManifest::read(&config.manifest)?;
            let ex = extract_cohort_features(&manifest, &config)?;
            report_extraction(&ex.errors);
            let failed: HashSet<String> = ex.errors.iter().map(|e| e.patient_id.clone()).collect();
            let records = surviving(manifest.records(), &failed);
            let uni = run_univariate(&ex.table, &records)?;
            println!("{} significant after Holm correction", uni.screening.significant().count());
            let cls = run_classification(&ex.table, &records, &config)?;
            print_classification(&cls);
            let results = RunResults {
                config: &config,
                extraction: Some(&ex),
                univariate: Some(&uni),
                classification: Some(&cls),
            };
            emit_reports(&results, &config.out_dir)?;
            Ok(partial(ex.errors.len()))
        }
    }
}

fn partial(failures: usize) -> Outcome {
    if failures == 0 {
        Outcome::Complete
    } else {
        Outcome::Partial(failures)
    }
}

fn load_stage_inputs(a: &StageArgs, config: &RunConfig) -> Result<(FeatureTable, Vec<SurvivalRecord>)> {
    let features = a.features.clone().unwrap_or_else(|| config.out_dir.join("features.csv"));
    let table = FeatureTable::read(&features)?;
    let manifest = CohortManifest::read(&config.manifest)?;
    Ok((table, surviving(manifest.records(), &failed_ids(&features))))
}

fn report_extraction(errors: &[deeprad::pipeline::PatientError]) {
    for e in errors {
        eprintln!("patient {}: {}", e.patient_id, e.message);
    }
}

fn print_classification(c: &deeprad::pipeline::Classification) {
    println!("DRF mean AUC {:.4}", c.drf.mean_auc);
    println!("SRF mean AUC {:.4}", c.srf.mean_auc);
    println!("DRF vs SRF chi-square p = {:.4}", c.comparison.p_value);
    for g in &c.predicted_groups {
        if let Some(lr) = &g.logrank {
            println!("{}: log-rank p = {:.3e}", g.name, lr.p_value);
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(Outcome::Complete) => ExitCode::SUCCESS,
        Ok(Outcome::Partial(n)) => {
            eprintln!("{n} patient(s) failed; see extraction_errors.csv");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::Join(ids) = &e {
                eprintln!("unmatched ids: {}", ids.join(", "));
            }
            ExitCode::from(1)
        }
    }
}
