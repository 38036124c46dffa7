//! File-based orchestration of the stages, one work directory per run.
//!
//! Each stage reads the artifacts of earlier stages from the work directory,
//! writes its own atomically and records the checksums of both in
//! `manifest.json`. A stage refuses to run on inputs whose checksum no longer
//! matches the chain unless forced.

mod config;
mod demo;
mod manifest;
mod svg;

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use log::{info, warn};
use serde::Serialize;

pub use config::{PipelineConfig, ProjectorChoice};
pub use demo::{synthetic_corpus, DEMO_CORPUS_SIZE};
pub use manifest::{files, producer_of, PipelineManifest, Stage, StageRecord, Workdir};
pub use svg::{render_scatter, ColorValues};

use crate::cascade::{read_verdicts_csv, run_cascade, write_verdicts_csv, CascadeInput, CascadeReport};
use crate::error::{Error, Result};
use crate::gateway::{embed_batch, EmbeddingCache, InferenceBackend, ScoreCache};
use crate::io;
use crate::manifold::{project, read_projection_csv, twonn_estimate, write_projection_csv, Projection};
use crate::model::{
    validate_corpus, DocumentRecord, EmbeddingVector, FilterVerdict, PositionalDictionary, RegionAssignment,
    ScoreVector, ValidationReport,
};
use crate::partition::{kmeans_fit_best, label_documents, DensityCoreLabeler};
use crate::semantics::{
    band_profile, centrality_histogram, describe_text_stats, read_scores_csv, render_profile_markdown,
    score_corpus, select_population, write_scores_csv, HistogramPopulation, ProfilePopulation,
};

const REGION_HEADER: [&str; 3] = ["doc_id", "region_id", "density_core"];

/// A configured pipeline bound to one work directory.
pub struct Pipeline {
    workdir: Workdir,
    config: PipelineConfig,
    force: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntrinsicDimension {
    pub dimension: f64,
    pub n_valid: usize,
    pub n_points: usize,
}

impl Pipeline {
    pub fn new(workdir: impl AsRef<Path>, config: PipelineConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            workdir: Workdir::new(workdir.as_ref())?,
            config,
            force: false,
        })
    }

    /// Run even if upstream checksums no longer match the manifest.
    pub fn force(mut self, force: bool) -> Self {
        self.force = force;
        self
    }

    pub fn workdir(&self) -> &Workdir {
        &self.workdir
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    fn begin(&self, stage: Stage, inputs: &[&str]) -> Result<PipelineManifest> {
        let manifest = self.workdir.load_manifest()?;
        if self.force {
            warn!("{stage}: skipping checksum verification");
        }
        self.workdir.require(&manifest, inputs, self.force)?;
        info!("{stage}: starting");
        Ok(manifest)
    }

    fn finish(&self, mut manifest: PipelineManifest, stage: Stage, inputs: &[&str], outputs: &[&str]) -> Result<()> {
        manifest.tool_version = env!("CARGO_PKG_VERSION").to_owned();
        manifest.stages.insert(
            stage,
            StageRecord {
                inputs: self.workdir.checksums(inputs)?,
                outputs: self.workdir.checksums(outputs)?,
            },
        );
        self.workdir.save_manifest(&manifest)?;
        info!("{stage}: done");
        Ok(())
    }

    fn corpus(&self) -> Result<Vec<DocumentRecord>> {
        io::read_jsonl(&self.workdir.path(files::CORPUS))
    }

    fn dictionary(&self) -> Result<PositionalDictionary> {
        let dict = match &self.config.dictionary {
            Some(path) => io::read_json::<PositionalDictionary>(path)?,
            None => PositionalDictionary::ai_news(),
        };
        dict.validate()?;
        Ok(dict)
    }

    /// Identifies the vectors a backend produces; a cache built by another
    /// backend or seed is never reused.
    fn embedding_model_id(&self) -> String {
        let b = self.config.backend_config();
        match b.kind {
            crate::gateway::BackendKind::Mock => format!("{}@mock-seed{}-dim{}", b.model_name, b.seed, b.mock_dim),
            crate::gateway::BackendKind::Remote => b.model_name,
        }
    }

    pub fn ingest(&self, source: &Path) -> Result<ValidationReport> {
        let manifest = self.begin(Stage::Ingest, &[])?;
        let docs = io::read_jsonl(source)?;
        let report = validate_corpus(&docs);
        if !report.duplicates.is_empty() {
            let shown: Vec<&str> = report.duplicates.iter().take(10).map(String::as_str).collect();
            return Err(Error::Data(format!(
                "{} duplicate doc_id(s), e.g. {}",
                report.duplicates.len(),
                shown.join(", ")
            )));
        }
        if !report.empty.is_empty() {
            warn!("{} documents have no text", report.empty.len());
        }
        io::write_jsonl(&self.workdir.path(files::CORPUS), &docs)?;
        io::write_json(&self.workdir.path(files::VALIDATION), &report)?;
        let mut manifest = manifest;
        manifest.corpus_path = Some(files::CORPUS.to_owned());
        manifest.source_sha256 = Some(io::sha256_file(source)?);
        self.finish(manifest, Stage::Ingest, &[], &[files::CORPUS, files::VALIDATION])?;
        Ok(report)
    }

    pub fn embed(&self) -> Result<usize> {
        let backend = self.config.backend_config().build()?;
        self.embed_with(backend.as_ref())
    }

    /// Embeds every corpus document not yet in the cache. The cache is saved
    /// even when the backend fails so a rerun resumes where this one stopped.
    pub fn embed_with(&self, backend: &dyn InferenceBackend) -> Result<usize> {
        let inputs = [files::CORPUS];
        let mut manifest = self.begin(Stage::Embed, &inputs)?;
        let docs = self.corpus()?;
        let path = self.workdir.path(files::EMBEDDINGS);
        let cache = EmbeddingCache::load_or_new(&path, &self.embedding_model_id())?;
        let before = cache.len();
        let outcome = embed_batch(&docs, backend, &self.config.backend_config(), &cache);
        if cache.len() > before || !path.exists() {
            cache.save(&path)?;
        }
        outcome?;
        manifest.cache_paths = vec![files::EMBEDDINGS.to_owned(), files::SCORE_CACHE.to_owned()];
        manifest.models.insert("embedding".into(), serde_json::json!({
            "backend": self.config.backend,
            "model_id": self.embedding_model_id(),
        }));
        self.finish(manifest, Stage::Embed, &inputs, &[files::EMBEDDINGS, files::EMBEDDINGS_SIDECAR])?;
        Ok(cache.len() - before)
    }

    pub fn score(&self) -> Result<usize> {
        let backend = self.config.backend_config().build()?;
        self.score_with(backend.as_ref())
    }

    pub fn score_with(&self, backend: &dyn InferenceBackend) -> Result<usize> {
        let inputs = [files::CORPUS];
        let mut manifest = self.begin(Stage::Score, &inputs)?;
        let docs = self.corpus()?;
        let dict = self.dictionary()?;
        let descriptor = serde_json::json!({
            "backend": self.config.backend,
            "model_id": self.embedding_model_id(),
        });
        let cache_path = self.workdir.path(files::SCORE_CACHE);
        let mut cache = if manifest.models.get("scoring") == Some(&descriptor) {
            ScoreCache::load_or_default(&cache_path)?
        } else {
            ScoreCache::default()
        };
        let before = cache.len();
        let outcome = score_corpus(&docs, &dict, backend, &self.config.backend_config(), &mut cache);
        cache.save(&cache_path)?;
        manifest.models.insert("scoring".into(), descriptor);
        if outcome.is_err() {
            // Record the descriptor so the partial cache is reused on resume.
            self.workdir.save_manifest(&manifest)?;
        }
        let scores = outcome?;
        io::write_json(&self.workdir.path(files::DICTIONARY), &dict)?;
        write_scores_csv(&self.workdir.path(files::SCORES), &dict, &scores)?;
        manifest.dictionary_path = Some(files::DICTIONARY.to_owned());
        self.finish(
            manifest,
            Stage::Score,
            &inputs,
            &[files::DICTIONARY, files::SCORES, files::SCORE_CACHE],
        )?;
        Ok(cache.len() - before)
    }

    pub fn project(&self) -> Result<IntrinsicDimension> {
        let inputs = [files::CORPUS, files::EMBEDDINGS, files::EMBEDDINGS_SIDECAR];
        let mut manifest = self.begin(Stage::Project, &inputs)?;
        let docs = self.corpus()?;
        let cache = EmbeddingCache::load(&self.workdir.path(files::EMBEDDINGS))?;
        let embeddings = docs
            .iter()
            .map(|d| {
                let v = cache.get(&d.doc_id).ok_or_else(|| Error::MissingStage {
                    stage: Stage::Embed.name().to_owned(),
                    path: self.workdir.path(files::EMBEDDINGS),
                })?;
                EmbeddingVector::new(d.doc_id.clone(), v)
            })
            .collect::<Result<Vec<_>>>()?;
        let spec5 = self.config.projector_spec(5);
        let spec2 = self.config.projector_spec(2);
        let p5 = project(&embeddings, &spec5)?;
        let p2 = project(&embeddings, &spec2)?;
        write_projection_csv(&self.workdir.path(files::PROJECTION_5D), &p5)?;
        write_projection_csv(&self.workdir.path(files::PROJECTION_2D), &p2)?;

        let est = twonn_estimate(&p5.points)?;
        let intrinsic = IntrinsicDimension {
            dimension: est.dimension,
            n_valid: est.n_valid,
            n_points: p5.points.len(),
        };
        io::write_json(&self.workdir.path(files::INTRINSIC_DIM), &intrinsic)?;

        manifest.projection_paths = vec![files::PROJECTION_5D.to_owned(), files::PROJECTION_2D.to_owned()];
        manifest.models.insert("projector_5d".into(), serde_json::to_value(&spec5)?);
        manifest.models.insert("projector_2d".into(), serde_json::to_value(&spec2)?);
        self.finish(
            manifest,
            Stage::Project,
            &inputs,
            &[files::PROJECTION_5D, files::PROJECTION_2D, files::INTRINSIC_DIM],
        )?;
        Ok(intrinsic)
    }

    fn projections(&self) -> Result<(Projection, Projection)> {
        let p5 = read_projection_csv(&self.workdir.path(files::PROJECTION_5D))?;
        let p2 = read_projection_csv(&self.workdir.path(files::PROJECTION_2D))?;
        if p5.doc_ids != p2.doc_ids {
            return Err(Error::Data("5D and 2D projections list different documents".into()));
        }
        if p2.points.dim() != 2 {
            return Err(Error::Data(format!("{} must have two coordinates", files::PROJECTION_2D)));
        }
        Ok((p5, p2))
    }

    /// K-Means regions on the 5D projection and density-core membership on
    /// the 2D map.
    pub fn partition(&self) -> Result<Vec<RegionAssignment>> {
        let inputs = [files::PROJECTION_5D, files::PROJECTION_2D];
        let mut manifest = self.begin(Stage::Partition, &inputs)?;
        let (p5, p2) = self.projections()?;
        let km = self.config.kmeans_config();
        let fit = kmeans_fit_best(&p5.points, &km, self.config.kmeans_restarts)?;
        let core = self.config.density_labeler().label(&p2.points)?;
        let regions: Vec<RegionAssignment> = p5
            .doc_ids
            .iter()
            .zip(&fit.labels)
            .zip(&core)
            .map(|((id, &region_id), &density_core)| RegionAssignment {
                doc_id: id.clone(),
                region_id,
                density_core,
            })
            .collect();
        io::write_json(&self.workdir.path(files::KMEANS), &fit.model)?;
        write_regions_csv(&self.workdir.path(files::REGIONS), &regions)?;
        manifest.models.insert("kmeans".into(), serde_json::to_value(km)?);
        manifest.models.insert("density".into(), serde_json::to_value(self.config.density_labeler())?);
        self.finish(manifest, Stage::Partition, &inputs, &[files::KMEANS, files::REGIONS])?;
        Ok(regions)
    }

    pub fn prune(&self) -> Result<CascadeReport> {
        let inputs = [files::PROJECTION_2D, files::KMEANS, files::REGIONS];
        let mut manifest = self.begin(Stage::Prune, &inputs)?;
        let p2 = read_projection_csv(&self.workdir.path(files::PROJECTION_2D))?;
        let model: crate::partition::KMeansModel = io::read_json(&self.workdir.path(files::KMEANS))?;
        let regions = read_regions_csv(&self.workdir.path(files::REGIONS))?;
        let labels = label_documents(
            &regions.iter().map(|r| r.doc_id.clone()).collect::<Vec<_>>(),
            &regions.iter().map(|r| r.density_core).collect::<Vec<_>>(),
        );
        let input = CascadeInput::align(p2.doc_ids, p2.points, &labels, &regions, model.k)?;
        let cfg = self.config.cascade_config();
        let outcome = run_cascade(&input, &cfg)?;
        write_verdicts_csv(&self.workdir.path(files::VERDICTS), &outcome.verdicts)?;
        io::write_json(&self.workdir.path(files::CASCADE_REPORT), &outcome.report)?;
        manifest.cascade = Some(cfg);
        self.finish(manifest, Stage::Prune, &inputs, &[files::VERDICTS, files::CASCADE_REPORT])?;
        Ok(outcome.report)
    }

    pub fn profile(&self) -> Result<()> {
        let inputs = [files::CORPUS, files::DICTIONARY, files::SCORES, files::VERDICTS];
        let manifest = self.begin(Stage::Profile, &inputs)?;
        let docs = self.corpus()?;
        let dict: PositionalDictionary = io::read_json(&self.workdir.path(files::DICTIONARY))?;
        let scores = read_scores_csv(&self.workdir.path(files::SCORES))?;
        let verdicts = read_verdicts_csv(&self.workdir.path(files::VERDICTS))?;
        let z = self.config.z_cut;

        for (population, json, md) in [
            (ProfilePopulation::All, files::PROFILE_ALL_JSON, files::PROFILE_ALL_MD),
            (ProfilePopulation::RetainedOnly, files::PROFILE_RETAINED_JSON, files::PROFILE_RETAINED_MD),
        ] {
            let selected = select_population(&scores, population, Some(&verdicts))?;
            let profile = band_profile(&selected, &dict, population, z)?;
            io::write_json(&self.workdir.path(json), &profile)?;
            io::write_atomic(&self.workdir.path(md), render_profile_markdown(&profile, &dict).as_bytes())?;
        }

        let mut outputs = vec![
            files::PROFILE_ALL_JSON,
            files::PROFILE_ALL_MD,
            files::PROFILE_RETAINED_JSON,
            files::PROFILE_RETAINED_MD,
        ];
        if scores.iter().all(|s| s.centrality().is_some()) {
            let hist = centrality_histogram(
                &scores,
                Some(&verdicts),
                self.config.histogram_bin_width,
                &[
                    HistogramPopulation::All,
                    HistogramPopulation::OutliersRemoved,
                    HistogramPopulation::NoiseRemoved,
                ],
            )?;
            io::write_json(&self.workdir.path(files::CENTRALITY_HISTOGRAM), &hist)?;
            outputs.push(files::CENTRALITY_HISTOGRAM);
        }

        let terms: Vec<&str> = self.config.mention_terms.iter().map(String::as_str).collect();
        if !terms.is_empty() {
            let stats = describe_text_stats(&docs, &terms)?;
            io::write_json(
                &self.workdir.path(files::TEXT_STATS),
                &serde_json::json!({
                    "terms": terms,
                    "char_count": stats.char_count,
                    "mention_count": stats.mention_count,
                }),
            )?;
            outputs.push(files::TEXT_STATS);
        }
        self.finish(manifest, Stage::Profile, &inputs, &outputs)
    }

    /// Valid `color_by` values for the current dictionary.
    pub fn color_options(dict: &PositionalDictionary, with_centrality: bool) -> Vec<String> {
        let mut opts = vec!["region".to_owned(), "retained".to_owned()];
        opts.extend(dict.dim_ids().map(str::to_owned));
        if with_centrality {
            opts.push(crate::gateway::CENTRALITY_DIM_ID.to_owned());
        }
        opts
    }

    pub fn map(&self) -> Result<()> {
        let inputs = [files::PROJECTION_2D, files::REGIONS, files::VERDICTS, files::DICTIONARY, files::SCORES];
        let manifest = self.begin(Stage::Map, &inputs)?;
        let dict: PositionalDictionary = io::read_json(&self.workdir.path(files::DICTIONARY))?;
        let scores = read_scores_csv(&self.workdir.path(files::SCORES))?;
        let with_centrality = scores.iter().all(|s| s.centrality().is_some());
        let options = Self::color_options(&dict, with_centrality);
        let color_by = self.config.color_by.as_str();
        if !options.iter().any(|o| o == color_by) {
            return Err(Error::Parameter(format!(
                "unknown color_by {color_by:?}; valid values: {}",
                options.join(", ")
            )));
        }

        let p2 = read_projection_csv(&self.workdir.path(files::PROJECTION_2D))?;
        let regions = read_regions_csv(&self.workdir.path(files::REGIONS))?;
        let verdicts = read_verdicts_csv(&self.workdir.path(files::VERDICTS))?;
        let region_of: HashMap<&str, usize> = regions.iter().map(|r| (r.doc_id.as_str(), r.region_id)).collect();
        let verdict_of: HashMap<&str, &FilterVerdict> = verdicts.iter().map(|v| (v.doc_id(), v)).collect();
        let score_of: HashMap<&str, &ScoreVector> = scores.iter().map(|s| (s.doc_id(), s)).collect();

        let dim_ids: Vec<&str> = dict.dim_ids().collect();
        let mut header: Vec<String> = ["doc_id", "x", "y", "region_id", "retained"].map(String::from).to_vec();
        header.extend(dim_ids.iter().map(|d| (*d).to_owned()));
        if with_centrality {
            header.push(crate::gateway::CENTRALITY_DIM_ID.to_owned());
        }

        let missing = |what: &str, id: &str| Error::Data(format!("no {what} for {id}"));
        let mut xy = Vec::with_capacity(p2.doc_ids.len());
        let mut region_col = Vec::with_capacity(p2.doc_ids.len());
        let mut retained_col = Vec::with_capacity(p2.doc_ids.len());
        let mut score_col = Vec::with_capacity(p2.doc_ids.len());
        let bytes = io::csv_bytes(&header, |w| {
            for (id, row) in p2.doc_ids.iter().zip(p2.points.rows()) {
                let region = *region_of.get(id.as_str()).ok_or_else(|| missing("region", id))?;
                let verdict = verdict_of.get(id.as_str()).ok_or_else(|| missing("verdict", id))?;
                let sv = score_of.get(id.as_str()).ok_or_else(|| missing("scores", id))?;
                let mut rec = vec![
                    id.clone(),
                    row[0].to_string(),
                    row[1].to_string(),
                    region.to_string(),
                    verdict.retained().to_string(),
                ];
                for d in &dim_ids {
                    rec.push(sv.score(d).ok_or_else(|| missing(d, id))?.to_string());
                }
                if let Some(c) = sv.centrality() {
                    rec.push(c.to_string());
                }
                w.write_record(&rec)?;
                xy.push([row[0], row[1]]);
                region_col.push(region);
                retained_col.push(verdict.retained());
                score_col.push(match color_by {
                    "region" | "retained" => 0.0,
                    "centrality" => sv.centrality().unwrap_or(0.0),
                    d => sv.score(d).unwrap_or(0.0),
                });
            }
            Ok(())
        })?;
        io::write_atomic(&self.workdir.path(files::MAP_CSV), &bytes)?;

        let colors = match color_by {
            "region" => ColorValues::Region(&region_col),
            "retained" => ColorValues::Retained(&retained_col),
            "centrality" => ColorValues::Score {
                values: &score_col,
                low: &dict.centrality_anchor,
                high: dict.centrality_target.as_deref().unwrap_or("target"),
            },
            d => {
                let dim = dict.dimension(d).expect("validated above");
                ColorValues::Score {
                    values: &score_col,
                    low: &dim.low_pole,
                    high: &dim.high_pole,
                }
            }
        };
        let title = format!("{} documents, colored by {color_by}", p2.doc_ids.len());
        let svg = render_scatter(&title, &p2.doc_ids, &xy, &colors);
        io::write_atomic(&self.workdir.path(files::MAP_SVG), svg.as_bytes())?;
        self.finish(manifest, Stage::Map, &inputs, &[files::MAP_CSV, files::MAP_SVG])
    }

    /// Every stage from `ingest` to `map`, using the configured backend.
    pub fn run_all(&self, source: &Path) -> Result<CascadeReport> {
        self.ingest(source)?;
        self.embed()?;
        self.score()?;
        self.project()?;
        self.partition()?;
        let report = self.prune()?;
        self.profile()?;
        self.map()?;
        Ok(report)
    }
}

pub fn write_regions_csv(path: &Path, regions: &[RegionAssignment]) -> Result<()> {
    let bytes = io::csv_bytes(&REGION_HEADER.map(String::from), |w| {
        for r in regions {
            w.write_record([r.doc_id.as_str(), &r.region_id.to_string(), &r.density_core.to_string()])?;
        }
        Ok(())
    })?;
    io::write_atomic(path, &bytes)
}

pub fn read_regions_csv(path: &Path) -> Result<Vec<RegionAssignment>> {
    let mut rdr = csv::Reader::from_path(path)?;
    if rdr.headers()?.iter().ne(REGION_HEADER) {
        return Err(Error::Ingestion(format!("{}: header must be {}", path.display(), REGION_HEADER.join(","))));
    }
    rdr.deserialize().map(|r| r.map_err(Error::from)).collect()
}

/// Per-stage checksums of every artifact, for comparing two runs.
pub fn artifact_checksums(workdir: &Workdir) -> Result<BTreeMap<String, String>> {
    let mut names: Vec<String> = std::fs::read_dir(workdir.root())
        .map_err(|e| Error::io(workdir.root(), e))?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_file())
        .filter_map(|e| e.file_name().into_string().ok())
        .collect();
    names.sort();
    names
        .into_iter()
        .map(|n| {
            let sha = workdir.checksum(&n)?;
            Ok((n, sha))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regions_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        let regions = vec![
            RegionAssignment { doc_id: "a".into(), region_id: 3, density_core: true },
            RegionAssignment { doc_id: "b,c".into(), region_id: 0, density_core: false },
        ];
        write_regions_csv(&path, &regions).unwrap();
        assert_eq!(read_regions_csv(&path).unwrap(), regions);
    }

    #[test]
    fn color_options_include_dimensions() {
        let dict = PositionalDictionary::ai_news();
        let opts = Pipeline::color_options(&dict, true);
        assert_eq!(opts.len(), 2 + dict.dimensions.len() + 1);
        assert!(opts.contains(&"urgency".to_owned()));
    }
}
