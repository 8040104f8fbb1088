use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use biomarker_lab::eval::{self, compute_metrics, loocv, BenchmarkEntry, Dataset};
use biomarker_lab::explain::{rank_features, read_shap_csv, write_ranking_csv, write_shap_csv, ShapSpace};
use biomarker_lab::features::{extract_all, read_participant_csv, write_daily_csv, write_participant_csv, ParticipantFeatureVector};
use biomarker_lab::ingest::{self, coverage_report, segment_days, write_error_report, write_sensor_csv, SensorKind};
use biomarker_lab::labeling::{cohort_summary, read_labels_csv, read_ucla_csv, write_labels_csv};
use biomarker_lab::models::{ModelDocument, ModelKind, MODEL_FORMAT_VERSION};
use biomarker_lab::report::{comparison_markdown, descriptives_markdown, importance_markdown};
use biomarker_lab::stats::{compare_groups, write_comparison_csv, write_normality_csv, CompareParams};
use biomarker_lab::synthcohort::{generate, write_cohort, CohortConfig, MANIFEST_FILE, UCLA_FILE};
use biomarker_lab::Category;
use serde::Serialize;

use crate::config::RunConfig;
use crate::manifest::{RunManifest, StageLog};
use crate::Invalid;

pub const INGEST_DIR: &str = "ingest";
pub const FEATURES_DAILY: &str = "features_daily.csv";
pub const FEATURES_PARTICIPANT: &str = "features_participant.csv";
pub const LABELS: &str = "labels.csv";
pub const DESCRIPTIVES_MD: &str = "descriptives.md";
pub const COMPARISON_MD: &str = "group_comparison.md";
pub const CLASSIFICATION_MD: &str = "classification_table.md";
pub const REPORT_MD: &str = "report.md";

pub struct Ctx {
    pub cfg: RunConfig,
    pub out: PathBuf,
    pub dump_preprocessed: bool,
    pub manifest: RunManifest,
}

/// Fails with the path named when a required input is absent.
fn require(path: &Path) -> Result<&Path, Invalid> {
    if path.exists() {
        Ok(path)
    } else {
        Err(Invalid(format!("missing input: {}", path.display())))
    }
}

fn open(path: &Path) -> anyhow::Result<BufReader<File>> {
    require(path)?;
    Ok(BufReader::new(File::open(path).with_context(|| format!("cannot open {}", path.display()))?))
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    Ok(BufWriter::new(File::create(path).with_context(|| format!("cannot create {}", path.display()))?))
}

fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    let mut w = create(path)?;
    w.write_all(text.as_bytes())?;
    w.flush()?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    write_text(path, &(serde_json::to_string_pretty(value)? + "\n"))
}

fn shap_file(kind: ModelKind) -> String {
    format!("shap_values_{}.csv", kind.as_str())
}

fn importance_stem(kind: ModelKind) -> String {
    format!("importance_{}", kind.as_str())
}

impl Ctx {
    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn finish(&mut self, log: StageLog) -> anyhow::Result<()> {
        log.finish(&self.out, &mut self.manifest)
    }

    /// Validates raw sensor files and rewrites them in canonical form.
    pub fn ingest(&mut self, input: &Path) -> anyhow::Result<()> {
        let mut log = StageLog::start("ingest");
        require(input)?;
        let data = ingest::read_dir(input)?;
        for kind in &data.kinds {
            log.input(&input.join(kind.file_name()));
        }
        let dir = self.path(INGEST_DIR);
        for kind in SensorKind::ALL {
            let path = dir.join(kind.file_name());
            let mut w = create(&path)?;
            write_sensor_csv(&mut w, kind, &data.events)?;
            w.flush()?;
            log.output(&path);
        }
        let path = dir.join("ingest_errors.jsonl");
        let mut w = create(&path)?;
        write_error_report(&mut w, &data.rejected)?;
        w.flush()?;
        log.output(&path);
        let windows = segment_days(&data.events, self.cfg.features.utc_offset_minutes)?;
        let path = dir.join("coverage.csv");
        let mut w = csv::Writer::from_writer(create(&path)?);
        for row in coverage_report(&windows) {
            w.serialize(row)?;
        }
        w.flush()?;
        log.output(&path);
        log::info!(
            "{} events kept, {} rows rejected, {} duplicates removed",
            data.events.len(),
            data.rejected.len(),
            data.duplicates_removed
        );
        self.finish(log)
    }

    pub fn extract(&mut self) -> anyhow::Result<()> {
        let mut log = StageLog::start("extract");
        let dir = self.path(INGEST_DIR);
        require(&dir)?;
        let data = ingest::read_dir(&dir)?;
        for kind in &data.kinds {
            log.input(&dir.join(kind.file_name()));
        }
        let extracted = extract_all(&data.events, &self.cfg.features)?;
        let daily: Vec<_> = extracted.iter().flat_map(|p| p.daily.iter().cloned()).collect();
        let vectors: Vec<_> = extracted.iter().map(|p| p.vector.clone()).collect();
        let path = self.path(FEATURES_DAILY);
        write_daily_csv(create(&path)?, &daily)?;
        log.output(&path);
        let path = self.path(FEATURES_PARTICIPANT);
        write_participant_csv(create(&path)?, &vectors)?;
        log.output(&path);
        #[derive(Serialize)]
        struct Quality<'a> {
            participant_id: &'a str,
            days: usize,
            significant_places: usize,
            unclosed_episodes: usize,
        }
        let quality: Vec<Quality> = extracted
            .iter()
            .map(|p| Quality {
                participant_id: &p.vector.participant_id,
                days: p.daily.len(),
                significant_places: p.places.len(),
                unclosed_episodes: p.quality.unclosed_episodes,
            })
            .collect();
        let path = self.path("extract_quality.json");
        write_json(&path, &quality)?;
        log.output(&path);
        log::info!("{} participants, {} participant-days", vectors.len(), daily.len());
        self.finish(log)
    }

    pub fn label(&mut self, input: &Path) -> anyhow::Result<()> {
        let mut log = StageLog::start("label");
        let src = input.join(UCLA_FILE);
        let (assessments, rejected) = read_ucla_csv(open(&src)?, UCLA_FILE)?;
        log.input(&src);
        if !rejected.is_empty() {
            log::warn!("{} questionnaire rows rejected", rejected.len());
        }
        let summary = cohort_summary(&assessments)?;
        let path = self.path(LABELS);
        write_labels_csv(create(&path)?, &assessments)?;
        log.output(&path);
        let path = self.path("label_errors.jsonl");
        let mut w = create(&path)?;
        write_error_report(&mut w, &rejected)?;
        w.flush()?;
        log.output(&path);
        let path = self.path("ucla_summary.json");
        write_json(&path, &summary)?;
        log.output(&path);
        let path = self.path(DESCRIPTIVES_MD);
        write_text(&path, &descriptives_markdown(&summary))?;
        log.output(&path);
        self.finish(log)
    }

    fn load_vectors(&self, log: &mut StageLog) -> anyhow::Result<Vec<ParticipantFeatureVector>> {
        let path = self.path(FEATURES_PARTICIPANT);
        let v = read_participant_csv(open(&path)?)?;
        log.input(&path);
        Ok(v)
    }

    fn load_labels(&self, log: &mut StageLog) -> anyhow::Result<BTreeMap<String, Category>> {
        let path = self.path(LABELS);
        let rows = read_labels_csv(open(&path)?).map_err(|e| Invalid(format!("{}: {e}", path.display())))?;
        log.input(&path);
        Ok(rows.into_iter().map(|r| (r.participant_id, r.category)).collect())
    }

    fn load_dataset(&self, log: &mut StageLog) -> anyhow::Result<Dataset> {
        let vectors = self.load_vectors(log)?;
        let labels = self.load_labels(log)?;
        let data = Dataset::from_vectors(&vectors, &labels);
        let unlabeled = vectors.len() - data.len();
        if unlabeled > 0 {
            log::warn!("{unlabeled} participants have features but no label");
        }
        Ok(data)
    }

    pub fn stats(&mut self) -> anyhow::Result<()> {
        let mut log = StageLog::start("stats");
        let vectors = self.load_vectors(&mut log)?;
        let labels = self.load_labels(&mut log)?;
        let s = &self.cfg.stats;
        let params = CompareParams {
            group_a: s.group_a,
            group_b: s.group_b,
            resamples: s.resamples,
            seed: self.cfg.seed,
            correction: s.correction,
        };
        let cmp = compare_groups(&vectors, &labels, &params)?;
        let path = self.path("group_comparison.csv");
        write_comparison_csv(create(&path)?, &cmp.rows)?;
        log.output(&path);
        let path = self.path("normality.csv");
        write_normality_csv(create(&path)?, &cmp.normality)?;
        log.output(&path);
        let path = self.path(COMPARISON_MD);
        write_text(&path, &comparison_markdown(&cmp.rows, s.group_a.display_name(), s.group_b.display_name()))?;
        log.output(&path);
        log::info!("{} of {} features significant", cmp.rows.iter().filter(|r| r.significant).count(), cmp.rows.len());
        self.finish(log)
    }

    /// Fits every model on all labeled participants.
    pub fn train(&mut self) -> anyhow::Result<()> {
        let mut log = StageLog::start("train");
        let data = self.load_dataset(&mut log)?;
        for spec in self.cfg.roster() {
            let (params, trained, stats) = eval::train_full(&data, &spec, &self.cfg.eval, self.cfg.seed)?;
            let doc = ModelDocument {
                format_version: MODEL_FORMAT_VERSION,
                params,
                seed: self.cfg.seed,
                feature_names: data.feature_names.clone(),
                classes: data.class_names.clone(),
                trained,
            };
            let path = self.path(&format!("models/{}.json", spec.kind.as_str()));
            write_text(&path, &(doc.to_json()? + "\n"))?;
            log.output(&path);
            let path = self.path(&format!("models/{}_preprocess.json", spec.kind.as_str()));
            write_json(&path, &stats)?;
            log.output(&path);
        }
        self.finish(log)
    }

    fn dump_matrices(&self, entry: &BenchmarkEntry, data: &Dataset, log: &mut StageLog) -> anyhow::Result<()> {
        for f in &entry.folds {
            let Some(m) = &f.matrices else { continue };
            let base = format!("preprocessed/{}/{}", entry.kind.as_str(), f.held_out_participant);
            let path = self.path(&format!("{base}_train.csv"));
            eval::write_matrix_csv(create(&path)?, &data.feature_names, &m.train_ids, &m.train_x, Some(&m.train_y))?;
            log.output(&path);
            let ids: Vec<Option<String>> = m.test_ids.iter().cloned().map(Some).collect();
            let path = self.path(&format!("{base}_test.csv"));
            eval::write_matrix_csv(create(&path)?, &data.feature_names, &ids, &m.test_x, None)?;
            log.output(&path);
        }
        Ok(())
    }

    /// Leave-one-participant-out benchmark of every model.
    pub fn evaluate(&mut self) -> anyhow::Result<()> {
        let mut log = StageLog::start("evaluate");
        let data = self.load_dataset(&mut log)?;
        let mut cfg = self.cfg.eval.clone();
        cfg.keep_matrices |= self.dump_preprocessed;
        let mut entries = Vec::new();
        for spec in self.cfg.roster() {
            let folds = loocv(&data, &spec, &cfg, self.cfg.seed)?;
            let metrics = compute_metrics(spec.kind.label(), &folds, &data.class_names)?;
            log::info!("{}: accuracy {:.2}", spec.kind.label(), metrics.overall_accuracy);
            let mut entry = BenchmarkEntry { kind: spec.kind, folds, metrics };
            if self.dump_preprocessed {
                self.dump_matrices(&entry, &data, &mut log)?;
            }
            for f in &mut entry.folds {
                f.matrices = None;
            }
            if let Some(m) = eval::pooled_shap(&entry, &data) {
                let path = self.path(&shap_file(entry.kind));
                write_shap_csv(create(&path)?, &m)?;
                log.output(&path);
            }
            entries.push(entry);
        }
        let path = self.path("predictions.csv");
        eval::write_predictions_csv(create(&path)?, &entries, &data.class_names)?;
        log.output(&path);
        let path = self.path("metrics.json");
        write_json(&path, &entries.iter().map(|e| &e.metrics).collect::<Vec<_>>())?;
        log.output(&path);
        let path = self.path("folds.json");
        let folds: BTreeMap<&str, _> = entries.iter().map(|e| (e.kind.as_str(), &e.folds)).collect();
        write_json(&path, &folds)?;
        log.output(&path);
        let path = self.path(CLASSIFICATION_MD);
        write_text(&path, &eval::classification_table(&entries))?;
        log.output(&path);
        self.finish(log)
    }

    fn tree_models(&self) -> Vec<ModelKind> {
        self.cfg.models.iter().copied().filter(|k| k.is_tree_model()).collect()
    }

    /// Ranks features by mean |SHAP| from the held-out attributions.
    pub fn explain(&mut self) -> anyhow::Result<()> {
        let mut log = StageLog::start("explain");
        for kind in self.tree_models() {
            let space = if kind == ModelKind::Gbt { ShapSpace::Margin } else { ShapSpace::Probability };
            let path = self.path(&shap_file(kind));
            let m = read_shap_csv(open(&path)?, kind, space)?;
            log.input(&path);
            let ranking = rank_features(&m)?;
            let stem = importance_stem(kind);
            let path = self.path(&format!("{stem}.csv"));
            write_ranking_csv(create(&path)?, &ranking)?;
            log.output(&path);
            let path = self.path(&format!("{stem}.md"));
            write_text(&path, &importance_markdown(&ranking, kind.label(), self.cfg.explain.top_k))?;
            log.output(&path);
        }
        self.finish(log)
    }

    /// Concatenates the rendered tables into one document.
    pub fn report(&mut self) -> anyhow::Result<()> {
        let mut log = StageLog::start("report");
        let mut sections = vec![
            ("UCLA scores and loneliness categories".to_string(), DESCRIPTIVES_MD.to_string()),
            (
                format!(
                    "{} vs {}: participant-level features",
                    self.cfg.stats.group_a.display_name(),
                    self.cfg.stats.group_b.display_name()
                ),
                COMPARISON_MD.to_string(),
            ),
            ("Classification, leave-one-participant-out".to_string(), CLASSIFICATION_MD.to_string()),
        ];
        for kind in self.tree_models() {
            sections.push((format!("Feature importance: {}", kind.label()), format!("{}.md", importance_stem(kind))));
        }
        let mut doc = String::from("# Loneliness biomarker report\n");
        for (title, file) in sections {
            let path = self.path(&file);
            let body = fs::read_to_string(require(&path)?).with_context(|| format!("cannot read {}", path.display()))?;
            log.input(&path);
            doc.push_str(&format!("\n## {title}\n\n{}", body.trim_end()));
            doc.push('\n');
        }
        let path = self.path(REPORT_MD);
        write_text(&path, &doc)?;
        log.output(&path);
        self.finish(log)
    }

    pub fn synth(&mut self, cohort: &CohortConfig) -> anyhow::Result<()> {
        let mut log = StageLog::start("synth");
        cohort.validate()?;
        let generated = generate(cohort)?;
        write_cohort(&generated, &self.out)?;
        for f in SensorKind::ALL.iter().map(|k| k.file_name()).chain([UCLA_FILE, MANIFEST_FILE]) {
            log.output(&self.path(f));
        }
        log::info!("{} participants, {} events", cohort.total(), generated.events.len());
        self.finish(log)
    }

    pub fn pipeline(&mut self, input: &Path) -> anyhow::Result<()> {
        self.ingest(input)?;
        self.extract()?;
        self.label(input)?;
        self.stats()?;
        self.train()?;
        self.evaluate()?;
        self.explain()?;
        self.report()
    }
}
