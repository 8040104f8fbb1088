use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use biomarker_lab::eval::ModelSpec;
use biomarker_lab::rng::PRNG_ID;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

pub const RUN_MANIFEST: &str = "run_manifest.json";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub seconds: f64,
    /// Path to sha256 of every file read.
    pub inputs: BTreeMap<String, String>,
    /// Output path relative to the output directory, to sha256.
    pub outputs: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub prng: String,
    /// sha256 of the effective configuration serialized as compact JSON.
    pub config_hash: String,
    pub seed: u64,
    pub config: RunConfig,
    /// Resolved search spaces.
    pub roster: Vec<ModelSpec>,
    pub stages: BTreeMap<String, StageRecord>,
}

pub fn sha256_file(path: &Path) -> anyhow::Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn config_hash(cfg: &RunConfig) -> String {
    let json = serde_json::to_vec(cfg).expect("config serializes");
    hex::encode(Sha256::digest(&json))
}

impl RunManifest {
    pub fn new(cfg: &RunConfig) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            prng: PRNG_ID.into(),
            config_hash: config_hash(cfg),
            seed: cfg.seed,
            config: cfg.clone(),
            roster: cfg.roster(),
            stages: BTreeMap::new(),
        }
    }

    /// The manifest already in `out`, kept only when it was produced under
    /// the same configuration; stale stage records are dropped otherwise.
    pub fn open(out: &Path, cfg: &RunConfig) -> Self {
        let fresh = Self::new(cfg);
        std::fs::read_to_string(out.join(RUN_MANIFEST))
            .ok()
            .and_then(|s| serde_json::from_str::<RunManifest>(&s).ok())
            .filter(|m| m.config_hash == fresh.config_hash && m.version == fresh.version)
            .unwrap_or(fresh)
    }

    pub fn save(&self, out: &Path) -> anyhow::Result<()> {
        let path = out.join(RUN_MANIFEST);
        std::fs::write(&path, serde_json::to_string_pretty(self)? + "\n")
            .with_context(|| format!("cannot write {}", path.display()))
    }
}

/// Files touched by one stage, digested when the stage finishes.
pub struct StageLog {
    pub name: &'static str,
    started: Instant,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
}

impl StageLog {
    pub fn start(name: &'static str) -> Self {
        log::info!("stage {name}");
        Self { name, started: Instant::now(), inputs: Vec::new(), outputs: Vec::new() }
    }

    pub fn input(&mut self, path: &Path) {
        self.inputs.push(path.to_path_buf());
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.to_path_buf());
    }

    pub fn finish(self, out: &Path, manifest: &mut RunManifest) -> anyhow::Result<()> {
        let mut rec = StageRecord { seconds: self.started.elapsed().as_secs_f64(), ..Default::default() };
        for p in &self.inputs {
            rec.inputs.insert(p.display().to_string(), sha256_file(p)?);
        }
        for p in &self.outputs {
            let rel = p.strip_prefix(out).unwrap_or(p);
            rec.outputs.insert(rel.display().to_string(), sha256_file(p)?);
        }
        manifest.stages.insert(self.name.to_string(), rec);
        manifest.save(out)
    }
}
