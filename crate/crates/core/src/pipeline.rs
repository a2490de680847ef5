//! End-to-end batch run: load, clean, window, featurize, cross-validate,
//! then emit the report, CSV exports and SVG plots.
//!
//! Everything is computed in memory first and written in one final stage,
//! so a failing run leaves no partial output behind.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{
    generate_cohort, load_manifest, load_trial, BreathingType, Channel, CohortSpec, DatasetError,
    TrialRecord,
};
use crate::eval::{
    cross_validate, group_splits, kfold_splits, loocv_splits, CvOptions, CvReport, EvalError, Split,
};
use crate::features::{assemble_matrix_with, FeatureError, FeatureMatrix};
use crate::eval::cross_validate_xy;
use crate::matrix::Matrix;
use crate::models::{
    ForestParams, Learner, ModelBundle, ModelError, ModelKind, ModelSpec, Predictor,
};
use crate::preprocess::{drop_nan_rows, segment_windows, zscore_apply, zscore_fit, PreprocessError};
use crate::spectral::{br_consensus, DEFAULT_BAND};
use crate::svg::{self, Chart, Panel, Series};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    Features(#[from] FeatureError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, PipelineError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IncludeBr {
    Yes,
    No,
    Both,
}

impl IncludeBr {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "yes" | "true" => Some(IncludeBr::Yes),
            "no" | "false" => Some(IncludeBr::No),
            "both" => Some(IncludeBr::Both),
            _ => None,
        }
    }

    /// Variants to evaluate, without the breathing-rate column first.
    pub fn variants(self) -> Vec<bool> {
        match self {
            IncludeBr::Yes => vec![true],
            IncludeBr::No => vec![false],
            IncludeBr::Both => vec![false, true],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SplitterConfig {
    Loocv,
    Kfold { k: usize },
}

/// Fully resolved run configuration; echoed verbatim into `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// A dataset manifest, or a cohort spec for an in-memory synthetic cohort.
    pub input: PathBuf,
    pub window_s: f64,
    pub overlap: f64,
    pub br_band_hz: (f64, f64),
    pub br_signal: Channel,
    pub include_br: IncludeBr,
    pub models: Vec<ModelKind>,
    pub splitter: SplitterConfig,
    pub stratified: bool,
    /// Adds a leave-one-subject-out evaluation next to the main splitter.
    pub group_by_subject: bool,
    /// Standardize features with a scaler fitted on each training fold.
    pub scaling: bool,
    /// Grid-search forest size and depth by cross-validated accuracy.
    pub tune: bool,
    /// Train every model on all instances and save the bundles.
    pub save_models: bool,
    pub seed: u64,
    pub out_dir: PathBuf,
}

impl RunConfig {
    pub fn new(input: impl Into<PathBuf>, out_dir: impl Into<PathBuf>, seed: u64) -> Self {
        RunConfig {
            input: input.into(),
            window_s: 10.0,
            overlap: 0.5,
            br_band_hz: DEFAULT_BAND,
            br_signal: Channel::TidalVolume,
            include_br: IncludeBr::Yes,
            models: ModelKind::ALL.to_vec(),
            splitter: SplitterConfig::Kfold { k: 5 },
            stratified: true,
            group_by_subject: false,
            scaling: true,
            tune: false,
            save_models: false,
            seed,
            out_dir: out_dir.into(),
        }
    }

    /// Checks everything that does not depend on the data.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if self.models.is_empty() {
            return bad("at least one model is required".into());
        }
        let mut seen = self.models.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.models.len() {
            return bad("models listed more than once".into());
        }
        if !(self.window_s > 0.0 && self.window_s.is_finite()) {
            return bad(format!("window_s must be > 0, got {}", self.window_s));
        }
        if !(0.0..1.0).contains(&self.overlap) {
            return bad(format!("overlap must lie in [0, 1), got {}", self.overlap));
        }
        let (lo, hi) = self.br_band_hz;
        if !(lo > 0.0 && lo < hi && hi.is_finite()) {
            return bad(format!("breathing-rate band ({lo}, {hi}) must satisfy 0 < lo < hi"));
        }
        if let SplitterConfig::Kfold { k } = self.splitter {
            if k < 2 {
                return bad(format!("k must be >= 2, got {k}"));
            }
        }
        if !self.input.is_file() {
            return bad(format!("input {} is not a readable file", self.input.display()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputKind {
    Manifest,
    Synthetic,
}

#[derive(Debug, Clone)]
pub struct LoadedData {
    pub kind: InputKind,
    pub provenance: String,
    pub trials: Vec<TrialRecord>,
}

/// Loads a manifest (JSON with a `trials` array) or generates the cohort
/// described by a cohort spec.
pub fn load_input(path: &Path) -> Result<LoadedData> {
    let text = fs::read_to_string(path).map_err(|source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| DatasetError::SchemaViolation(format!("{}: {e}", path.display())))?;
    if value.get("trials").is_some() {
        let manifest = load_manifest(path)?;
        let trials = manifest
            .entries
            .iter()
            .map(|e| load_trial(&e.path, e.meta.clone()))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(LoadedData {
            kind: InputKind::Manifest,
            provenance: manifest.provenance,
            trials,
        })
    } else {
        let spec: CohortSpec = serde_json::from_value(value)
            .map_err(|e| DatasetError::InvalidSpec(e.to_string()))?;
        Ok(LoadedData {
            kind: InputKind::Synthetic,
            provenance: spec.provenance.clone(),
            trials: generate_cohort(&spec)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialBr {
    pub trial_id: String,
    pub pressure_bpm: f64,
    pub flow_bpm: f64,
    pub tidal_volume_bpm: f64,
    pub consensus_bpm: f64,
    pub max_pairwise_diff_bpm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub input_kind: InputKind,
    pub provenance: String,
    pub n_trials: usize,
    pub n_subjects: usize,
    pub n_windows: usize,
    /// Window count per breathing type, keyed by name.
    pub class_counts: BTreeMap<String, usize>,
    pub feature_names: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunFlags {
    /// Trials shorter than one window.
    pub zero_window_trials: Vec<String>,
    /// Trials with fewer than two finite rows.
    pub dropped_trials: Vec<String>,
    pub nan_rows_removed: usize,
    /// Windows spanning fewer than two cycles at their estimated rate.
    pub low_cycle_windows: usize,
    pub stratification_degraded: bool,
    pub skipped_folds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
/// Forest size and depth picked for one trained outer fold, in fold order,
/// with the inner-CV accuracy that selected it (`None` when the training
/// rows were too few for inner folds and the defaults were kept).
pub struct TuningRow {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub inner_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tuning: Option<Vec<TuningRow>>,
    #[serde(flatten)]
    pub cv: CvReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub tool: String,
    pub version: String,
    pub config: RunConfig,
    pub dataset: DatasetSummary,
    pub flags: RunFlags,
    pub breathing_rates: Vec<TrialBr>,
    pub evaluations: Vec<Evaluation>,
    pub warnings: Vec<String>,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// In-memory results of a run, ready to be written.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub report: RunReport,
    /// `(relative path, contents)` in write order.
    pub files: Vec<(PathBuf, Vec<u8>)>,
}

const FOREST_GRID_TREES: [usize; 3] = [50, 100, 200];
const FOREST_GRID_DEPTH: [Option<usize>; 3] = [Some(5), Some(10), None];

fn splitter_label(config: &RunConfig, stratified: bool) -> String {
    match config.splitter {
        SplitterConfig::Loocv => "loocv".into(),
        SplitterConfig::Kfold { k } => format!(
            "kfold(k={k}, {})",
            if stratified { "stratified" } else { "unstratified" }
        ),
    }
}

fn splitter_tag(config: &RunConfig) -> String {
    match config.splitter {
        SplitterConfig::Loocv => "loocv".into(),
        SplitterConfig::Kfold { k } => format!("kfold{k}"),
    }
}

/// Runs the whole pipeline without touching the file system beyond reading
/// the input.
pub fn execute(config: &RunConfig) -> Result<RunArtifacts> {
    config.validate()?;
    for kind in &config.models {
        kind.default_spec().validate()?;
    }
    let data = load_input(&config.input)?;
    if data.trials.is_empty() {
        return Err(PipelineError::Config("input contains no trials".into()));
    }

    let mut flags = RunFlags::default();
    let mut warnings = Vec::new();
    let mut cleaned = Vec::with_capacity(data.trials.len());
    for t in &data.trials {
        match drop_nan_rows(t) {
            Ok(c) => {
                flags.nan_rows_removed += t.len() - c.len();
                cleaned.push(c);
            }
            Err(PreprocessError::AllRowsDropped(_)) => flags.dropped_trials.push(t.trial_id()),
            Err(e) => return Err(e.into()),
        }
    }

    let mut breathing_rates = Vec::with_capacity(cleaned.len());
    for t in &cleaned {
        match br_consensus(t, config.br_band_hz) {
            Ok(c) => breathing_rates.push(TrialBr {
                trial_id: t.trial_id(),
                pressure_bpm: c.pressure.bpm,
                flow_bpm: c.flow.bpm,
                tidal_volume_bpm: c.tidal_volume.bpm,
                consensus_bpm: c.consensus_bpm,
                max_pairwise_diff_bpm: c.max_pairwise_diff_bpm,
            }),
            Err(e) => warnings.push(format!("{}: no breathing-rate estimate: {e}", t.trial_id())),
        }
    }

    let mut windows = Vec::new();
    for t in &cleaned {
        let w = segment_windows(t, config.window_s, config.overlap)?;
        if w.is_empty() {
            flags.zero_window_trials.push(t.trial_id());
        }
        windows.extend(w);
    }
    if windows.is_empty() {
        return Err(PipelineError::Config(format!(
            "no trial is long enough for a {} s window",
            config.window_s
        )));
    }

    let variants = config.include_br.variants();
    let full = assemble_matrix_with(
        &windows,
        variants.contains(&true),
        config.br_band_hz,
        config.br_signal,
    )?;
    flags.low_cycle_windows = full.low_cycle_rows.len();
    let n = full.len();
    let labels = full.labels();

    let mut splitters: Vec<(String, String, Vec<Split>)> = Vec::new();
    match config.splitter {
        SplitterConfig::Loocv => {
            splitters.push(("loocv".into(), splitter_label(config, false), loocv_splits(n)?))
        }
        SplitterConfig::Kfold { k } => {
            let folds = kfold_splits(&labels, k, config.seed, config.stratified)?;
            if config.stratified && !folds.stratified {
                flags.stratification_degraded = true;
                warnings.push(format!(
                    "some class has fewer than {k} instances; folds were not stratified"
                ));
            }
            splitters.push((splitter_tag(config), splitter_label(config, folds.stratified), folds.splits));
        }
    }
    if config.group_by_subject {
        let groups = full.groups();
        splitters.push(("loso".into(), "leave-one-subject-out".into(), group_splits(&groups)?));
    }

    let mut evaluations = Vec::new();
    let mut matrices: Vec<(bool, FeatureMatrix)> = Vec::new();
    for &with_br in &variants {
        let m = if with_br { full.clone() } else { full.without_br() };
        for (tag, label, splits) in &splitters {
            let options = CvOptions {
                scaling: config.scaling,
                seed: config.seed,
                splitter: label.clone(),
            };
            for &kind in &config.models {
                let spec = kind.default_spec();
                let hyper = serde_json::to_value(&spec).expect("spec serializes");
                let (cv, tuning) = if config.tune && kind == ModelKind::Forest {
                    let tuned = TunedForest {
                        chosen: RefCell::new(Vec::new()),
                    };
                    let hyper = serde_json::json!({"kind": "forest", "tuned": true,
                        "grid": {"n_trees": FOREST_GRID_TREES, "max_depth": FOREST_GRID_DEPTH},
                        "inner_folds": INNER_FOLDS});
                    let cv = cross_validate(&tuned, hyper, &m, splits, &options)?;
                    (cv, Some(tuned.chosen.into_inner()))
                } else {
                    (cross_validate(&spec, hyper, &m, splits, &options)?, None)
                };
                flags.skipped_folds += cv.skipped_folds();
                evaluations.push(Evaluation {
                    id: format!("{}_{}_{}", kind, if with_br { "br" } else { "nobr" }, tag),
                    tuning,
                    cv,
                });
            }
        }
        matrices.push((with_br, m));
    }

    let mut files: Vec<(PathBuf, Vec<u8>)> = Vec::new();
    let mut feature_csv = Vec::new();
    full.write_csv(&mut feature_csv).expect("in-memory write");
    files.push(("features.csv".into(), feature_csv));

    for e in &evaluations {
        if let Some(roc) = &e.cv.roc {
            for curve in &roc.curves {
                let class = class_name(curve.positive_class);
                let mut buf = Vec::new();
                curve.write_csv(&mut buf).expect("in-memory write");
                files.push((PathBuf::from(format!("roc/{}_{class}.csv", e.id)), buf));
            }
        }
    }
    files.extend(roc_charts(config, &evaluations));
    files.extend(signal_charts(&cleaned));

    if config.save_models {
        for (with_br, m) in &matrices {
            for &kind in &config.models {
                let spec = evaluations
                    .iter()
                    .find(|e| e.cv.model == kind.name() && e.cv.includes_br == *with_br)
                    .and_then(|e| serde_json::from_value::<ModelSpec>(e.cv.hyperparams.clone()).ok())
                    .unwrap_or_else(|| kind.default_spec());
                let bundle = train_bundle(&spec, m, config.scaling, config.seed)?;
                let name = format!("models/{}_{}.json", kind, if *with_br { "br" } else { "nobr" });
                files.push((name.into(), bundle.to_json().into_bytes()));
            }
        }
    }

    let mut subjects: Vec<&str> = data.trials.iter().map(|t| t.meta.subject.subject_id.as_str()).collect();
    subjects.sort_unstable();
    subjects.dedup();
    let mut class_counts = BTreeMap::new();
    for t in BreathingType::ALL {
        class_counts.insert(t.name().to_string(), labels.iter().filter(|&&l| l == t.code()).count());
    }
    for e in &evaluations {
        warnings.extend(e.cv.warnings.iter().map(|w| format!("{}: {w}", e.id)));
    }

    let report = RunReport {
        tool: "respira".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: config.clone(),
        dataset: DatasetSummary {
            input_kind: data.kind,
            provenance: data.provenance,
            n_trials: data.trials.len(),
            n_subjects: subjects.len(),
            n_windows: n,
            class_counts,
            feature_names: full.feature_names.clone(),
        },
        flags,
        breathing_rates,
        evaluations,
        warnings,
    };
    files.insert(0, ("report.json".into(), report.to_json().into_bytes()));
    Ok(RunArtifacts { report, files })
}

/// Fits the model on every instance, with the scaler (if any) fitted on the
/// same rows, for predict-only reuse.
pub fn train_bundle(spec: &ModelSpec, matrix: &FeatureMatrix, scaling: bool, seed: u64) -> Result<ModelBundle> {
    let mut x = matrix.to_matrix();
    let scaler = if scaling {
        let s = zscore_fit(&x)?;
        x = zscore_apply(&s, &x)?;
        Some(s)
    } else {
        None
    };
    let model = spec.train(&x, &matrix.labels(), BreathingType::COUNT, seed)?;
    Ok(ModelBundle::new(model, scaler, matrix.feature_names.clone()))
}

const INNER_FOLDS: usize = 3;

/// Forest learner that grid-searches size and depth by stratified inner CV
/// on the rows it is given, then refits the winner on all of them. Only the
/// outer training rows ever reach `fit`, so test rows never steer the choice.
struct TunedForest {
    chosen: RefCell<Vec<TuningRow>>,
}

impl TunedForest {
    fn select(&self, x: &Matrix, y: &[usize], n_classes: usize, seed: u64) -> (ForestParams, Option<f64>) {
        let Ok(inner) = kfold_splits(y, INNER_FOLDS, seed, true) else {
            return (ForestParams::default(), None);
        };
        let options = CvOptions {
            scaling: false,
            seed,
            splitter: "inner".into(),
        };
        let mut best: Option<(f64, ForestParams)> = None;
        for &n_trees in &FOREST_GRID_TREES {
            for &max_depth in &FOREST_GRID_DEPTH {
                let params = ForestParams {
                    n_trees,
                    max_depth,
                    ..ForestParams::default()
                };
                let spec = ModelSpec::Forest(params.clone());
                let Ok(r) = cross_validate_xy(&spec, serde_json::Value::Null, x, y, n_classes, &inner.splits, &options)
                else {
                    continue;
                };
                if best.as_ref().is_none_or(|(acc, _)| r.accuracy_mean > *acc) {
                    best = Some((r.accuracy_mean, params));
                }
            }
        }
        match best {
            Some((acc, params)) => (params, Some(acc)),
            None => (ForestParams::default(), None),
        }
    }
}

impl Learner for TunedForest {
    fn name(&self) -> String {
        ModelKind::Forest.name().to_string()
    }

    fn fit(
        &self,
        x: &Matrix,
        y: &[usize],
        n_classes: usize,
        seed: u64,
    ) -> std::result::Result<Box<dyn Predictor>, ModelError> {
        let (params, inner_accuracy) = self.select(x, y, n_classes, seed);
        self.chosen.borrow_mut().push(TuningRow {
            n_trees: params.n_trees,
            max_depth: params.max_depth,
            inner_accuracy,
        });
        ModelSpec::Forest(params).fit(x, y, n_classes, seed)
    }
}

fn class_name(code: usize) -> &'static str {
    BreathingType::from_code(code).map_or("unknown", BreathingType::name)
}

fn roc_charts(config: &RunConfig, evaluations: &[Evaluation]) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    for &kind in &config.models {
        for class in BreathingType::ALL {
            let mut panel = Panel::new(format!("{} vs rest", class.name()), "true positive rate");
            panel.y_range = Some((0.0, 1.0));
            panel.diagonal = true;
            for e in evaluations.iter().filter(|e| e.cv.model == kind.name()) {
                let Some(roc) = &e.cv.roc else { continue };
                let Some(curve) = roc.curves.get(class.code()) else { continue };
                panel.series.push(Series {
                    label: format!(
                        "{} {} AUC {:.3}",
                        if e.cv.includes_br { "with BR" } else { "no BR" },
                        e.cv.splitter,
                        roc.aucs[class.code()]
                    ),
                    points: curve.points.clone(),
                });
            }
            if panel.series.is_empty() {
                continue;
            }
            let mut chart = Chart::new(format!("ROC: {} / {}", kind, class.name()), "false positive rate");
            chart.x_range = Some((0.0, 1.0));
            chart.width = 820.0;
            chart.panel_height = 420.0;
            chart.panels.push(panel);
            out.push((
                PathBuf::from(format!("roc_{}_{}.svg", kind, class.name())),
                svg::render(&chart).into_bytes(),
            ));
        }
    }
    out
}

/// Multi-channel plots for the first subject's trials plus a per-class
/// tidal-volume overlay.
fn signal_charts(trials: &[TrialRecord]) -> Vec<(PathBuf, Vec<u8>)> {
    let Some(first) = trials.first() else {
        return Vec::new();
    };
    let subject = &first.meta.subject.subject_id;
    let mine: Vec<&TrialRecord> = trials.iter().filter(|t| &t.meta.subject.subject_id == subject).collect();
    let mut out = Vec::new();
    for t in &mine {
        let mut chart = Chart::new(format!("Trial {}", t.trial_id()), "time (s)");
        for c in Channel::ALL {
            let mut panel = Panel::new(c.name(), c.unit());
            panel.series.push(Series {
                label: c.name().into(),
                points: t.time.iter().copied().zip(t.channel(c).iter().copied()).collect(),
            });
            chart.panels.push(panel);
        }
        chart.panel_height = 140.0;
        let name = format!("signals_{}.svg", sanitize(&t.trial_id()));
        out.push((PathBuf::from(name), svg::render(&chart).into_bytes()));
    }

    let mut panel = Panel::new(format!("subject {subject}"), "tidal volume (L)");
    for t in &mine {
        let t0 = t.time[0];
        panel.series.push(Series {
            label: t.meta.breathing_type.name().into(),
            points: t
                .time
                .iter()
                .zip(&t.tidal_volume)
                .map(|(&x, &v)| (x - t0, v))
                .take_while(|&(x, _)| x <= 30.0)
                .collect(),
        });
    }
    let mut chart = Chart::new("Tidal volume by breathing type", "time since trial start (s)");
    chart.panels.push(panel);
    chart.panel_height = 360.0;
    out.push(("vtidal_compare.svg".into(), svg::render(&chart).into_bytes()));
    out
}

fn sanitize(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

/// Writes every artifact under `out_dir`, creating directories as needed.
/// Returns the written paths.
pub fn write_artifacts(artifacts: &RunArtifacts, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| PipelineError::Io { path, source }
    };
    fs::create_dir_all(out_dir).map_err(io(out_dir))?;
    let mut written = Vec::with_capacity(artifacts.files.len());
    for (rel, bytes) in &artifacts.files {
        let path = out_dir.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(io(parent))?;
        }
        fs::write(&path, bytes).map_err(io(&path))?;
        written.push(path);
    }
    Ok(written)
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: RunReport,
    pub written: Vec<PathBuf>,
}

/// [`execute`] followed by [`write_artifacts`] into `config.out_dir`.
pub fn run(config: &RunConfig) -> Result<RunOutcome> {
    let artifacts = execute(config)?;
    let written = write_artifacts(&artifacts, &config.out_dir)?;
    Ok(RunOutcome {
        report: artifacts.report,
        written,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn include_br_parsing_and_order() {
        assert_eq!(IncludeBr::parse("both"), Some(IncludeBr::Both));
        assert_eq!(IncludeBr::parse("maybe"), None);
        assert_eq!(IncludeBr::Both.variants(), vec![false, true]);
    }

    #[test]
    fn config_validation() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("spec.json");
        fs::write(&input, "{}").unwrap();
        let ok = RunConfig::new(&input, dir.path().join("out"), 1);
        ok.validate().unwrap();

        let mut c = ok.clone();
        c.models.clear();
        assert!(c.validate().is_err());
        let mut c = ok.clone();
        c.models = vec![ModelKind::Forest, ModelKind::Forest];
        assert!(c.validate().is_err());
        let mut c = ok.clone();
        c.overlap = 1.0;
        assert!(c.validate().is_err());
        let mut c = ok.clone();
        c.splitter = SplitterConfig::Kfold { k: 1 };
        assert!(c.validate().is_err());
        let mut c = ok.clone();
        c.br_band_hz = (0.5, 0.1);
        assert!(c.validate().is_err());
        let mut c = ok;
        c.input = dir.path().join("missing.json");
        assert!(c.validate().is_err());
    }

    #[test]
    fn small_synthetic_run() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("spec.json");
        fs::write(&input, r#"{"n_subjects": 4, "seed": 5}"#).unwrap();
        let mut config = RunConfig::new(&input, dir.path().join("out"), 9);
        config.models = vec![ModelKind::Forest, ModelKind::Logreg];
        config.include_br = IncludeBr::Both;
        config.splitter = SplitterConfig::Kfold { k: 3 };
        config.group_by_subject = true;
        let a = execute(&config).unwrap();
        let r = &a.report;
        assert_eq!(r.dataset.n_trials, 12);
        assert_eq!(r.dataset.n_windows, 4 * (12 + 6 + 12));
        // 2 BR variants × 2 splitters × 2 models
        assert_eq!(r.evaluations.len(), 8);
        assert!(r.evaluations.iter().all(|e| e.cv.accuracy_mean >= 0.0 && e.cv.accuracy_mean <= 1.0));
        let names: Vec<String> = a.files.iter().map(|(p, _)| p.to_string_lossy().into_owned()).collect();
        assert_eq!(names[0], "report.json");
        for want in ["features.csv", "roc_forest_normal.svg", "roc_logreg_deep.svg", "vtidal_compare.svg", "signals_S01_panting.svg"] {
            assert!(names.iter().any(|n| n == want), "missing {want}");
        }
        let b = execute(&config).unwrap();
        assert_eq!(a.files, b.files);
    }
}
