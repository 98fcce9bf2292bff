//! Pipeline configuration file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use traitcooc::ablation::RemovalMethod;
use traitcooc::datasets::{Language, TraitType};
use traitcooc::embeddings::{CbowHyperparams, TrainMode};
use traitcooc::probing::{LinearSvmParams, DEFAULT_FOLDS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
    /// Base seed; every stage seed is derived from it.
    pub seed: u64,
    #[serde(default = "default_methods")]
    pub methods: Vec<String>,
    #[serde(default = "default_trait_types")]
    pub trait_types: Vec<TraitType>,
    /// Optional "word<TAB>lemma" table for inflected dataset words.
    #[serde(default)]
    pub lemmas: Option<PathBuf>,
    /// "lemma<TAB>pos" lexicon for the negatives noun check.
    pub lexicon: PathBuf,
    pub datasets: Vec<DatasetSpec>,
    pub corpora: Vec<CorpusSpec>,
    #[serde(default)]
    pub embeddings: CbowHyperparams,
    #[serde(default)]
    pub train_mode: TrainModeSpec,
    #[serde(default)]
    pub probe: ProbeSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub name: String,
    /// Feature-norm file, built with `heuristics`.
    #[serde(default)]
    pub norms: Option<PathBuf>,
    #[serde(default)]
    pub heuristics: Option<PathBuf>,
    /// Prebuilt subset files by trait type, used instead of `norms`.
    #[serde(default)]
    pub subsets: BTreeMap<TraitType, PathBuf>,
    /// English-source translation table applied after the build.
    #[serde(default)]
    pub translation: Option<PathBuf>,
    #[serde(default)]
    pub translate_to: Option<Language>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusSpec {
    pub name: String,
    pub path: PathBuf,
    #[serde(default = "default_ratio")]
    pub split_ratio: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainModeSpec {
    #[default]
    Sequential,
    /// Lock-free updates on `--jobs` threads.
    Parallel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeSpec {
    pub folds: usize,
    pub c: f64,
    pub max_epochs: usize,
    pub tol: f64,
}

impl Default for ProbeSpec {
    fn default() -> Self {
        let svm = LinearSvmParams::default();
        ProbeSpec {
            folds: DEFAULT_FOLDS,
            c: svm.c,
            max_epochs: svm.max_epochs,
            tol: svm.tol,
        }
    }
}

impl ProbeSpec {
    pub fn svm(&self) -> LinearSvmParams {
        LinearSvmParams {
            c: self.c,
            max_epochs: self.max_epochs,
            tol: self.tol,
        }
    }
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn default_methods() -> Vec<String> {
    RemovalMethod::STANDARD.iter().map(|m| m.to_string()).collect()
}

fn default_trait_types() -> Vec<TraitType> {
    TraitType::ALL.to_vec()
}

fn default_ratio() -> f64 {
    traitcooc::corpus::split::DEFAULT_RATIO
}

/// Characters allowed in dataset and corpus names; they become directories.
fn valid_name(name: &str) -> bool {
    !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    /// Reads `path`, resolves relative paths against its directory and
    /// validates the result.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg = Self::from_toml(&text).with_context(|| format!("parsing {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.out_dir);
        fix(&mut self.lexicon);
        if let Some(p) = &mut self.lemmas {
            fix(p);
        }
        for d in &mut self.datasets {
            for p in [&mut d.norms, &mut d.heuristics, &mut d.translation].into_iter().flatten() {
                fix(p);
            }
            d.subsets.values_mut().for_each(fix);
        }
        for c in &mut self.corpora {
            fix(&mut c.path);
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut paths: Vec<(&str, &Path)> = vec![("lexicon", &self.lexicon)];
        if let Some(p) = &self.lemmas {
            paths.push(("lemmas", p));
        }
        if self.datasets.is_empty() {
            bail!("no datasets configured");
        }
        if self.corpora.is_empty() {
            bail!("no corpora configured");
        }
        if self.trait_types.is_empty() {
            bail!("no trait types configured");
        }
        self.removal_methods()?;
        for d in &self.datasets {
            if !valid_name(&d.name) {
                bail!("dataset name {:?} must be ASCII letters, digits, '-' or '_'", d.name);
            }
            match (&d.norms, &d.heuristics, d.subsets.is_empty()) {
                (Some(n), Some(h), true) => {
                    paths.push(("norms", n));
                    paths.push(("heuristics", h));
                }
                (None, None, false) => {
                    for t in &self.trait_types {
                        let p = d
                            .subsets
                            .get(t)
                            .with_context(|| format!("dataset {}: no subset file for {t}", d.name))?;
                        paths.push(("subset", p));
                    }
                }
                _ => bail!("dataset {}: give either norms and heuristics, or subsets", d.name),
            }
            match (&d.translation, d.translate_to) {
                (Some(t), Some(_)) => paths.push(("translation", t)),
                (None, None) => {}
                _ => bail!("dataset {}: translation and translate_to go together", d.name),
            }
        }
        for c in &self.corpora {
            if !valid_name(&c.name) {
                bail!("corpus name {:?} must be ASCII letters, digits, '-' or '_'", c.name);
            }
            paths.push(("corpus", &c.path));
        }
        for group in [self.datasets.iter().map(|d| &d.name).collect::<Vec<_>>(), self.corpora.iter().map(|c| &c.name).collect()] {
            let mut names = group.clone();
            names.sort();
            if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
                bail!("name {:?} is used twice", w[0]);
            }
        }
        for (what, p) in paths {
            if !p.exists() {
                bail!("{what} file {} does not exist", p.display());
            }
        }
        if self.probe.folds < 2 {
            bail!("probe.folds must be at least 2");
        }
        self.embeddings.validate()?;
        Ok(())
    }

    pub fn removal_methods(&self) -> Result<Vec<RemovalMethod>> {
        let mut out = Vec::new();
        for m in &self.methods {
            let m: RemovalMethod = m.parse()?;
            if out.contains(&m) {
                bail!("method {m} is listed twice");
            }
            out.push(m);
        }
        if out.is_empty() {
            bail!("no removal methods configured");
        }
        Ok(out)
    }

    pub fn train_mode(&self, jobs: usize) -> TrainMode {
        match self.train_mode {
            TrainModeSpec::Sequential => TrainMode::Sequential,
            TrainModeSpec::Parallel => TrainMode::Parallel { threads: jobs.max(1) },
        }
    }

    /// Digest of the canonical serialisation, recorded in the manifest.
    pub fn digest(&self) -> String {
        let text = toml::to_string(self).expect("config serialises");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}

/// Stage seed derived from the base seed and the stage's coordinates.
pub fn derive_seed(base: u64, parts: &[&str]) -> u64 {
    let mut h = Sha256::new();
    h.update(base.to_le_bytes());
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p.as_bytes());
    }
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

/// File stem for a method: `window:5` becomes `window-5`.
pub fn method_stem(method: RemovalMethod) -> String {
    method.to_string().replace(':', "-")
}
