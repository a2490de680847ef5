//! `respira`: generate or ingest trials, estimate breathing rates, and run
//! the classification experiments.
//!
//! Exit codes: 0 success, 1 skipped folds under `--strict`, 2 any error.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use respira::dataset::{
    convert_table, generate_cohort, load_manifest, write_manifest, write_trial, BreathingType,
    Channel, CohortSpec, ColumnMapping, DatasetManifest, ManifestEntry, Sex, SubjectMeta, TrialMeta,
};
use respira::models::ModelKind;
use respira::pipeline::{self, IncludeBr, RunConfig, SplitterConfig};
use respira::preprocess::drop_nan_rows;
use respira::spectral::{br_consensus, periodogram, CONSENSUS_CHANNELS, DEFAULT_BAND};

#[derive(Parser)]
#[command(name = "respira", version, about = "Breathing-type classification from respiratory signals")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic cohort as trial CSVs plus a manifest.
    Generate(GenerateArgs),
    /// Convert a foreign table into a canonical trial and add it to a manifest.
    Ingest(IngestArgs),
    /// Print per-trial breathing-rate estimates as CSV.
    Br(BrArgs),
    /// Run the feature extraction and cross-validation experiments.
    Run(RunArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Cohort spec (JSON); defaults to 30 subjects × 3 trials.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct IngestArgs {
    /// Delimited source table.
    #[arg(long)]
    table: PathBuf,
    /// Column mapping (JSON).
    #[arg(long)]
    mapping: PathBuf,
    /// Manifest to create or extend; the trial CSV goes to `trials/` beside it.
    #[arg(long)]
    manifest: PathBuf,
    /// Text file of inspiratory start indices, one per line.
    #[arg(long)]
    insp_indices: Option<PathBuf>,
    #[arg(long)]
    subject_id: String,
    #[arg(long, value_enum)]
    sex: SexArg,
    #[arg(long)]
    age: u32,
    #[arg(long)]
    height_cm: f64,
    #[arg(long)]
    weight_kg: f64,
    #[arg(long)]
    smoker_or_vaper: bool,
    #[arg(long)]
    asthmatic: bool,
    #[arg(long = "type", value_enum)]
    breathing_type: TypeArg,
    #[arg(long)]
    peep: f64,
    #[arg(long)]
    fs: f64,
    /// Provenance recorded when a new manifest is created.
    #[arg(long, default_value = "ingested recordings")]
    provenance: String,
    /// Replace an existing entry for the same subject and breathing type.
    #[arg(long)]
    replace: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum SexArg {
    M,
    F,
}

#[derive(Clone, Copy, ValueEnum)]
enum TypeArg {
    Normal,
    Panting,
    Deep,
}

impl From<TypeArg> for BreathingType {
    fn from(t: TypeArg) -> Self {
        match t {
            TypeArg::Normal => BreathingType::Normal,
            TypeArg::Panting => BreathingType::Panting,
            TypeArg::Deep => BreathingType::Deep,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ChannelArg {
    Pressure,
    Flow,
    TidalVolume,
    ChestCirc,
    AbdomenCirc,
}

impl From<ChannelArg> for Channel {
    fn from(c: ChannelArg) -> Self {
        match c {
            ChannelArg::Pressure => Channel::Pressure,
            ChannelArg::Flow => Channel::Flow,
            ChannelArg::TidalVolume => Channel::TidalVolume,
            ChannelArg::ChestCirc => Channel::ChestCirc,
            ChannelArg::AbdomenCirc => Channel::AbdomenCirc,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Forest,
    Logreg,
    Svm,
}

impl From<ModelArg> for ModelKind {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Forest => ModelKind::Forest,
            ModelArg::Logreg => ModelKind::Logreg,
            ModelArg::Svm => ModelKind::Svm,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum IncludeBrArg {
    Yes,
    No,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitterArg {
    Loocv,
    Kfold,
}

#[derive(Args)]
struct BrArgs {
    /// Manifest or cohort spec.
    #[arg(long)]
    input: PathBuf,
    /// Trial id (`<subject>_<type>`).
    #[arg(long)]
    trial: Option<String>,
    #[arg(long)]
    subject: Option<String>,
    #[arg(long = "type", value_enum)]
    breathing_type: Option<TypeArg>,
    #[arg(long, default_value_t = DEFAULT_BAND.0)]
    br_band_lo: f64,
    #[arg(long, default_value_t = DEFAULT_BAND.1)]
    br_band_hi: f64,
    /// Also write each selected trial's periodograms as CSV into this directory.
    #[arg(long)]
    dump_spectrum: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// Manifest or cohort spec.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 10.0)]
    window_s: f64,
    #[arg(long, default_value_t = 0.5)]
    overlap: f64,
    #[arg(long, default_value_t = DEFAULT_BAND.0)]
    br_band_lo: f64,
    #[arg(long, default_value_t = DEFAULT_BAND.1)]
    br_band_hi: f64,
    /// Channel the breathing-rate feature is computed from.
    #[arg(long, value_enum, default_value = "tidal-volume")]
    br_signal: ChannelArg,
    #[arg(long, value_enum, default_value = "yes")]
    include_br: IncludeBrArg,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "forest,logreg,svm")]
    models: Vec<ModelArg>,
    #[arg(long, value_enum, default_value = "kfold")]
    splitter: SplitterArg,
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// Plain shuffled folds instead of per-class stratification.
    #[arg(long)]
    unstratified: bool,
    /// Also evaluate leave-one-subject-out.
    #[arg(long)]
    group_by_subject: bool,
    /// Skip per-fold standardization.
    #[arg(long)]
    no_scaling: bool,
    /// Grid-search forest size and depth.
    #[arg(long)]
    tune: bool,
    /// Save models trained on all instances under `models/`.
    #[arg(long)]
    save_models: bool,
    /// Exit with status 1 when any fold was skipped.
    #[arg(long)]
    strict: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Ingest(a) => cmd_ingest(a),
        Command::Br(a) => cmd_br(a),
        Command::Run(a) => cmd_run(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn cmd_generate(args: GenerateArgs) -> Result<ExitCode> {
    let spec = match &args.spec {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str::<CohortSpec>(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => CohortSpec::default(),
    };
    let trials = generate_cohort(&spec)?;
    let trial_dir = args.out.join("trials");
    fs::create_dir_all(&trial_dir).with_context(|| format!("creating {}", trial_dir.display()))?;
    let mut entries = Vec::with_capacity(trials.len());
    for t in &trials {
        let path = trial_dir.join(format!("{}.csv", t.trial_id()));
        write_trial(t, &path)?;
        entries.push(ManifestEntry {
            path,
            meta: t.meta.clone(),
        });
    }
    let manifest_path = args.out.join("manifest.json");
    write_manifest(
        &DatasetManifest {
            provenance: spec.provenance.clone(),
            entries,
        },
        &manifest_path,
    )?;
    println!("wrote {} trials and {}", trials.len(), manifest_path.display());
    Ok(ExitCode::SUCCESS)
}

fn read_indices(path: &Path) -> Result<Vec<usize>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.split_whitespace()
        .map(|s| s.parse::<usize>().with_context(|| format!("bad index `{s}` in {}", path.display())))
        .collect()
}

fn cmd_ingest(args: IngestArgs) -> Result<ExitCode> {
    let mapping: ColumnMapping = serde_json::from_str(
        &fs::read_to_string(&args.mapping).with_context(|| format!("reading {}", args.mapping.display()))?,
    )
    .with_context(|| format!("parsing {}", args.mapping.display()))?;
    let meta = TrialMeta {
        subject: SubjectMeta {
            subject_id: args.subject_id.clone(),
            sex: match args.sex {
                SexArg::M => Sex::M,
                SexArg::F => Sex::F,
            },
            age: args.age,
            height_cm: args.height_cm,
            weight_kg: args.weight_kg,
            smoker_or_vaper: args.smoker_or_vaper,
            asthmatic: args.asthmatic,
        },
        breathing_type: args.breathing_type.into(),
        peep_cmh2o: args.peep,
        nominal_fs: args.fs,
        duration_s: None,
    };
    let extra = match &args.insp_indices {
        Some(p) => read_indices(p)?,
        None => Vec::new(),
    };
    let table = fs::File::open(&args.table).with_context(|| format!("opening {}", args.table.display()))?;
    let record = convert_table(table, &mapping, meta, &extra)?;

    let mut manifest = if args.manifest.exists() {
        load_manifest(&args.manifest)?
    } else {
        DatasetManifest {
            provenance: args.provenance.clone(),
            entries: Vec::new(),
        }
    };
    let key = (record.meta.subject.subject_id.clone(), record.meta.breathing_type);
    let existing = manifest
        .entries
        .iter()
        .position(|e| (e.meta.subject.subject_id.clone(), e.meta.breathing_type) == key);
    if existing.is_some() && !args.replace {
        bail!(
            "manifest already has a {} trial for subject {}; pass --replace to overwrite",
            key.1,
            key.0
        );
    }
    let base = args.manifest.parent().map(Path::to_path_buf).unwrap_or_default();
    let trial_dir = base.join("trials");
    fs::create_dir_all(&trial_dir).with_context(|| format!("creating {}", trial_dir.display()))?;
    let path = trial_dir.join(format!("{}.csv", record.trial_id()));
    write_trial(&record, &path)?;
    let entry = ManifestEntry {
        path: path.clone(),
        meta: record.meta.clone(),
    };
    match existing {
        Some(i) => manifest.entries[i] = entry,
        None => manifest.entries.push(entry),
    }
    write_manifest(&manifest, &args.manifest)?;
    println!(
        "wrote {} ({} rows, {} inspiratory starts)",
        path.display(),
        record.len(),
        record.insp_starts.len()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_br(args: BrArgs) -> Result<ExitCode> {
    let band = (args.br_band_lo, args.br_band_hi);
    let data = pipeline::load_input(&args.input)?;
    let wanted_type: Option<BreathingType> = args.breathing_type.map(Into::into);
    let selected: Vec<_> = data
        .trials
        .iter()
        .filter(|t| args.trial.as_ref().is_none_or(|id| &t.trial_id() == id))
        .filter(|t| args.subject.as_ref().is_none_or(|s| &t.meta.subject.subject_id == s))
        .filter(|t| wanted_type.is_none_or(|b| t.meta.breathing_type == b))
        .collect();
    if selected.is_empty() {
        bail!("no trial matches the selection");
    }
    if let Some(dir) = &args.dump_spectrum {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }

    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    writeln!(out, "trial_id,pressure_bpm,flow_bpm,tidal_volume_bpm,consensus_bpm,max_pairwise_diff_bpm")?;
    for t in selected {
        let clean = drop_nan_rows(t).with_context(|| t.trial_id())?;
        let c = br_consensus(&clean, band).with_context(|| t.trial_id())?;
        writeln!(
            out,
            "{},{:.4},{:.4},{:.4},{:.4},{:.4}",
            t.trial_id(),
            c.pressure.bpm,
            c.flow.bpm,
            c.tidal_volume.bpm,
            c.consensus_bpm,
            c.max_pairwise_diff_bpm
        )?;
        if let Some(dir) = &args.dump_spectrum {
            for ch in CONSENSUS_CHANNELS {
                let spectrum = periodogram(clean.channel(ch), clean.meta.nominal_fs)?;
                let path = dir.join(format!("{}_{}.csv", t.trial_id(), ch.name()));
                let file = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
                spectrum.write_csv(std::io::BufWriter::new(file))?;
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_run(args: RunArgs) -> Result<ExitCode> {
    let config = RunConfig {
        input: args.input,
        window_s: args.window_s,
        overlap: args.overlap,
        br_band_hz: (args.br_band_lo, args.br_band_hi),
        br_signal: args.br_signal.into(),
        include_br: match args.include_br {
            IncludeBrArg::Yes => IncludeBr::Yes,
            IncludeBrArg::No => IncludeBr::No,
            IncludeBrArg::Both => IncludeBr::Both,
        },
        models: args.models.into_iter().map(Into::into).collect(),
        splitter: match args.splitter {
            SplitterArg::Loocv => SplitterConfig::Loocv,
            SplitterArg::Kfold => SplitterConfig::Kfold { k: args.k },
        },
        stratified: !args.unstratified,
        group_by_subject: args.group_by_subject,
        scaling: !args.no_scaling,
        tune: args.tune,
        save_models: args.save_models,
        seed: args.seed,
        out_dir: args.out,
    };
    let outcome = pipeline::run(&config)?;
    let r = &outcome.report;
    println!(
        "{} trials, {} windows, {} features",
        r.dataset.n_trials,
        r.dataset.n_windows,
        r.dataset.feature_names.len()
    );
    for e in &r.evaluations {
        let auc = e.cv.roc.as_ref().map_or("n/a".to_string(), |roc| format!("{:.3}", roc.macro_auc));
        println!(
            "{:<28} accuracy {:.4} ± {:.4}  macro AUC {auc}",
            e.id, e.cv.accuracy_mean, e.cv.accuracy_std
        );
    }
    for w in &r.warnings {
        eprintln!("warning: {w}");
    }
    println!("wrote {} files to {}", outcome.written.len(), config.out_dir.display());
    if args.strict && r.flags.skipped_folds > 0 {
        eprintln!("{} folds were skipped (--strict)", r.flags.skipped_folds);
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}
