//! Stage bookkeeping: which files each stage read and wrote, by checksum.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cascade::CascadeConfig;
use crate::error::{Error, Result};
use crate::io;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Ingest,
    Embed,
    Score,
    Project,
    Partition,
    Prune,
    Profile,
    Map,
}

impl Stage {
    pub const ALL: [Stage; 8] = [
        Stage::Ingest,
        Stage::Embed,
        Stage::Score,
        Stage::Project,
        Stage::Partition,
        Stage::Prune,
        Stage::Profile,
        Stage::Map,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Embed => "embed",
            Stage::Score => "score",
            Stage::Project => "project",
            Stage::Partition => "partition",
            Stage::Prune => "prune",
            Stage::Profile => "profile",
            Stage::Map => "map",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Standard artifact names inside a work directory.
pub mod files {
    pub const CORPUS: &str = "corpus.jsonl";
    pub const VALIDATION: &str = "validation.json";
    pub const EMBEDDINGS: &str = "embeddings.tsig";
    pub const EMBEDDINGS_SIDECAR: &str = "embeddings.tsig.json";
    pub const DICTIONARY: &str = "dictionary.json";
    pub const SCORE_CACHE: &str = "score_cache.csv";
    pub const SCORES: &str = "scores.csv";
    pub const PROJECTION_5D: &str = "projection_5d.csv";
    pub const PROJECTION_2D: &str = "projection_2d.csv";
    pub const INTRINSIC_DIM: &str = "intrinsic_dimension.json";
    pub const KMEANS: &str = "kmeans.json";
    pub const REGIONS: &str = "regions.csv";
    pub const VERDICTS: &str = "verdicts.csv";
    pub const CASCADE_REPORT: &str = "cascade_report.json";
    pub const PROFILE_ALL_JSON: &str = "profile_all.json";
    pub const PROFILE_ALL_MD: &str = "profile_all.md";
    pub const PROFILE_RETAINED_JSON: &str = "profile_retained.json";
    pub const PROFILE_RETAINED_MD: &str = "profile_retained.md";
    pub const CENTRALITY_HISTOGRAM: &str = "centrality_histogram.json";
    pub const TEXT_STATS: &str = "text_stats.json";
    pub const MAP_CSV: &str = "map.csv";
    pub const MAP_SVG: &str = "map.svg";
    pub const MANIFEST: &str = "manifest.json";
}

/// The stage that writes `file`, for the chained artifacts.
pub fn producer_of(file: &str) -> Option<Stage> {
    use files::*;
    Some(match file {
        CORPUS | VALIDATION => Stage::Ingest,
        EMBEDDINGS | EMBEDDINGS_SIDECAR => Stage::Embed,
        DICTIONARY | SCORES | SCORE_CACHE => Stage::Score,
        PROJECTION_5D | PROJECTION_2D | INTRINSIC_DIM => Stage::Project,
        KMEANS | REGIONS => Stage::Partition,
        VERDICTS | CASCADE_REPORT => Stage::Prune,
        _ => return None,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    /// Relative path to SHA-256 of every file the stage read.
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PipelineManifest {
    pub tool_version: String,
    pub corpus_path: Option<String>,
    /// Checksum of the file handed to `ingest`.
    pub source_sha256: Option<String>,
    pub cache_paths: Vec<String>,
    pub projection_paths: Vec<String>,
    /// Backend, projector and partition settings, keyed by role.
    pub models: BTreeMap<String, serde_json::Value>,
    pub dictionary_path: Option<String>,
    pub cascade: Option<CascadeConfig>,
    pub stages: BTreeMap<Stage, StageRecord>,
}

/// A pipeline work directory and its manifest.
#[derive(Debug, Clone)]
pub struct Workdir {
    root: PathBuf,
}

impl Workdir {
    pub fn new(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        std::fs::create_dir_all(&root).map_err(|e| Error::io(&root, e))?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, file: &str) -> PathBuf {
        self.root.join(file)
    }

    pub fn load_manifest(&self) -> Result<PipelineManifest> {
        let path = self.path(files::MANIFEST);
        if path.exists() {
            io::read_json(&path)
        } else {
            Ok(PipelineManifest {
                tool_version: env!("CARGO_PKG_VERSION").to_owned(),
                ..PipelineManifest::default()
            })
        }
    }

    pub fn save_manifest(&self, manifest: &PipelineManifest) -> Result<()> {
        io::write_json(&self.path(files::MANIFEST), manifest)
    }

    pub fn checksum(&self, file: &str) -> Result<String> {
        io::sha256_file(&self.path(file))
    }

    pub fn checksums(&self, names: &[&str]) -> Result<BTreeMap<String, String>> {
        names
            .iter()
            .map(|n| Ok(((*n).to_owned(), self.checksum(n)?)))
            .collect()
    }

    /// Checks that `inputs` exist and, unless `force`, that they and every
    /// file upstream of them still carry the checksums the manifest recorded.
    pub fn require(&self, manifest: &PipelineManifest, inputs: &[&str], force: bool) -> Result<()> {
        for file in inputs {
            let path = self.path(file);
            if !path.exists() {
                let stage = producer_of(file).map_or("ingest", Stage::name);
                return Err(Error::MissingStage {
                    stage: stage.to_owned(),
                    path,
                });
            }
        }
        if force {
            return Ok(());
        }
        let mut hashes = HashMap::new();
        let mut checked = Vec::new();
        for file in inputs {
            self.verify_chain(manifest, file, &mut hashes, &mut checked)?;
        }
        Ok(())
    }

    fn hash_cached(&self, file: &str, hashes: &mut HashMap<String, String>) -> Result<Option<String>> {
        if let Some(h) = hashes.get(file) {
            return Ok(Some(h.clone()));
        }
        if !self.path(file).exists() {
            return Ok(None);
        }
        let h = self.checksum(file)?;
        hashes.insert(file.to_owned(), h.clone());
        Ok(Some(h))
    }

    fn verify_chain(
        &self,
        manifest: &PipelineManifest,
        file: &str,
        hashes: &mut HashMap<String, String>,
        checked: &mut Vec<Stage>,
    ) -> Result<()> {
        let Some(stage) = producer_of(file) else {
            return Ok(());
        };
        let stale = |stage: Stage, file: &str| Error::StaleInput {
            stage: stage.name().to_owned(),
            path: self.path(file),
        };
        let record = manifest.stages.get(&stage).ok_or_else(|| stale(stage, file))?;
        let recorded = record.outputs.get(file).ok_or_else(|| stale(stage, file))?;
        if self.hash_cached(file, hashes)?.as_ref() != Some(recorded) {
            return Err(stale(stage, file));
        }
        if checked.contains(&stage) {
            return Ok(());
        }
        checked.push(stage);
        for (input, sha) in &record.inputs {
            if self.hash_cached(input, hashes)?.as_ref() != Some(sha) {
                return Err(stale(stage, input));
            }
            self.verify_chain(manifest, input, hashes, checked)?;
        }
        Ok(())
    }
}
