//! The experiment stages and their on-disk layout.
//!
//! Each stage reads the outputs of the one before it from the output
//! directory, so stages can be rerun on their own. Work is split into units
//! (one per dataset, corpus, ablation cell or model) recorded in the
//! manifest; a unit whose parameters and input digests are unchanged and
//! whose outputs are intact is skipped.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use traitcooc::ablation::{ablate_split, parse_removal_table, removal_table, AblationReport, RemovalMethod};
use traitcooc::corpus::split::split_file;
use traitcooc::corpus::{CorpusSplit, SplitAssigner, SplitCounts};
use traitcooc::datasets::{
    apply_translation, build_subsets, load_subset, min_concept_cut, parse_feature_norms, save_subset,
    HeuristicConfig, LemmaMap, TraitSubset, TraitType, TranslationTable,
};
use traitcooc::embeddings::{load_vectors, params_path, save_model, train_cbow, CorpusForms, TrainMode, WordVectors};
use traitcooc::probing::{
    binary_probe, intersect_concepts, multiclass_probe, sample_negatives, union_vocab, Lexicon, ProbeKind,
    ProbeResult,
};

use crate::config::{derive_seed, method_stem, PipelineConfig};
use crate::manifest::{PendingUnit, RunManifest};
use crate::results::write_results;

#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: &Path) -> Self {
        Layout { root: root.to_path_buf() }
    }

    pub fn dataset_dir(&self, ds: &str) -> PathBuf {
        self.root.join("datasets").join(ds)
    }

    pub fn subset(&self, ds: &str, t: TraitType) -> PathBuf {
        self.dataset_dir(ds).join(format!("{t}.tsv"))
    }

    pub fn multilabel(&self, ds: &str, t: TraitType) -> PathBuf {
        self.dataset_dir(ds).join(format!("{t}.multilabel.tsv"))
    }

    pub fn summary(&self, ds: &str) -> PathBuf {
        self.dataset_dir(ds).join("summary.txt")
    }

    pub fn corpus_dir(&self, c: &str) -> PathBuf {
        self.root.join("corpora").join(c)
    }

    pub fn split_info(&self, c: &str) -> PathBuf {
        self.corpus_dir(c).join("split.json")
    }

    pub fn ablated(&self, c: &str, ds: &str, t: TraitType, m: RemovalMethod) -> PathBuf {
        self.root.join("ablated").join(c).join(ds).join(t.as_str()).join(format!("{}.conllu", method_stem(m)))
    }

    pub fn cell_report(&self, c: &str, ds: &str, t: TraitType, m: RemovalMethod) -> PathBuf {
        self.ablated(c, ds, t, m).with_extension("removal.csv")
    }

    pub fn removal_table(&self, c: &str, ds: &str) -> PathBuf {
        self.root.join("ablated").join(c).join(ds).join("removal.csv")
    }

    pub fn with_model(&self, c: &str, t: TraitType) -> PathBuf {
        self.root.join("models").join(c).join("with").join(format!("{t}.vec"))
    }

    pub fn without_model(&self, c: &str, ds: &str, t: TraitType, m: RemovalMethod) -> PathBuf {
        self.root.join("models").join(c).join(ds).join(t.as_str()).join(format!("{}.vec", method_stem(m)))
    }

    pub fn results(&self) -> PathBuf {
        self.root.join("results").join("results.csv")
    }

    pub fn report_dir(&self) -> PathBuf {
        self.root.join("report")
    }
}

/// What `split` records beside the two corpus parts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitInfo {
    pub seed: u64,
    pub ratio: f64,
    pub main_sentences: u64,
    pub reserve_sentences: u64,
    pub rejected: u64,
}

impl SplitInfo {
    fn corpus_split(&self, dir: &Path) -> CorpusSplit {
        CorpusSplit {
            main: dir.join("main.conllu"),
            reserve: dir.join("reserve.conllu"),
            seed: self.seed,
            ratio: self.ratio,
            counts: SplitCounts {
                main: self.main_sentences,
                reserve: self.reserve_sentences,
            },
            rejected: self.rejected,
        }
    }
}

/// One trained model and what it was trained on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelEntry {
    pub key: String,
    pub corpus: PathBuf,
    pub output: PathBuf,
    pub seed: u64,
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(())
}

pub struct Pipeline {
    pub cfg: PipelineConfig,
    pub layout: Layout,
    pub manifest: RunManifest,
    jobs: usize,
    pool: rayon::ThreadPool,
    lemmas: LemmaMap,
    methods: Vec<RemovalMethod>,
}

impl Pipeline {
    pub fn new(cfg: PipelineConfig, jobs: usize) -> Result<Self> {
        cfg.validate()?;
        let layout = Layout::new(&cfg.out_dir);
        std::fs::create_dir_all(&layout.root).with_context(|| format!("creating {}", layout.root.display()))?;
        let manifest = RunManifest::load_or_new(&layout.root, cfg.digest())?;
        let jobs = jobs.max(1);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?;
        let lemmas = match &cfg.lemmas {
            Some(p) => LemmaMap::load(p)?,
            None => LemmaMap::default(),
        };
        let methods = cfg.removal_methods()?;
        Ok(Pipeline {
            cfg,
            layout,
            manifest,
            jobs,
            pool,
            lemmas,
            methods,
        })
    }

    fn lemma_inputs(&self) -> Vec<PathBuf> {
        self.cfg.lemmas.iter().cloned().collect()
    }

    /// All (dataset, trait type, method) combinations in configuration order.
    fn cells(&self) -> Vec<(&str, &str, TraitType, RemovalMethod)> {
        let mut out = Vec::new();
        for c in &self.cfg.corpora {
            for d in &self.cfg.datasets {
                for &t in &self.cfg.trait_types {
                    for &m in &self.methods {
                        out.push((c.name.as_str(), d.name.as_str(), t, m));
                    }
                }
            }
        }
        out
    }

    fn commit_all(&mut self, done: Vec<(PendingUnit, Vec<PathBuf>)>) -> Result<()> {
        for (unit, outputs) in done {
            if !unit.fresh {
                self.manifest.commit(&self.layout.root, unit, &outputs)?;
            }
        }
        self.manifest.save(&self.layout.root)
    }

    /// Builds every configured dataset and returns its summary lines.
    pub fn build_datasets(&mut self) -> Result<Vec<String>> {
        let mut done = Vec::new();
        let mut lines = Vec::new();
        for d in &self.cfg.datasets {
            let mut inputs: Vec<PathBuf> = [&d.norms, &d.heuristics, &d.translation].into_iter().flatten().cloned().collect();
            inputs.extend(self.cfg.trait_types.iter().filter_map(|t| d.subsets.get(t).cloned()));
            let params = (&self.cfg.trait_types, d.translate_to);
            let unit = self.manifest.prepare(&self.layout.root, &format!("build-dataset/{}", d.name), &params, &inputs)?;
            let summary = self.layout.summary(&d.name);
            if unit.fresh {
                log::info!("dataset {} is up to date", d.name);
                let text = std::fs::read_to_string(&summary)?;
                lines.extend(text.lines().map(|l| format!("{}\t{l}", d.name)));
                continue;
            }

            let mut built: Vec<(TraitSubset, Option<TraitSubset>)> = Vec::new();
            if let (Some(norms), Some(heur)) = (&d.norms, &d.heuristics) {
                let hcfg = HeuristicConfig::load(heur)?;
                let file = File::open(norms).with_context(|| format!("opening {}", norms.display()))?;
                let parsed = parse_feature_norms(BufReader::new(file), &hcfg.columns)
                    .with_context(|| format!("reading {}", norms.display()))?;
                for (line, why) in &parsed.rejected {
                    log::warn!("{}:{line}: {why}", norms.display());
                }
                if parsed.records.is_empty() {
                    bail!("dataset {}: {} holds no feature-norm records", d.name, norms.display());
                }
                let mut by_type: HashMap<TraitType, _> =
                    build_subsets(parsed.records, &hcfg)?.into_iter().map(|b| (b.subset.trait_type, b)).collect();
                for t in &self.cfg.trait_types {
                    let b = by_type
                        .remove(t)
                        .with_context(|| format!("dataset {}: {} configures no heuristic for {t}", d.name, heur.display()))?;
                    for note in &b.diagnostics {
                        log::info!("{}/{t}: {note}", d.name);
                    }
                    built.push((b.subset, Some(b.multilabel)));
                }
            } else {
                for t in &self.cfg.trait_types {
                    let subset = load_subset(&d.subsets[t])?;
                    if subset.trait_type != *t {
                        bail!("dataset {}: {} holds {} pairs, expected {t}", d.name, d.subsets[t].display(), subset.trait_type);
                    }
                    built.push((subset, None));
                }
            }
            if let (Some(path), Some(lang)) = (&d.translation, d.translate_to) {
                let table = TranslationTable::load(path)?;
                for (single, multi) in &mut built {
                    let (s, notes) = apply_translation(single, &table, lang)?;
                    for n in notes {
                        log::info!("{}/{}: {n}", d.name, single.trait_type);
                    }
                    *single = s;
                    if let Some(m) = multi {
                        *m = apply_translation(m, &table, lang)?.0;
                    }
                }
            }
            for (single, _) in &built {
                if single.is_empty() {
                    bail!("dataset {}: {} subset is empty", d.name, single.trait_type);
                }
            }

            let mut outputs = Vec::new();
            std::fs::create_dir_all(self.layout.dataset_dir(&d.name))?;
            let mut text = String::new();
            for (single, multi) in &built {
                let p = self.layout.subset(&d.name, single.trait_type);
                save_subset(&p, single)?;
                outputs.push(p);
                if let Some(m) = multi {
                    let p = self.layout.multilabel(&d.name, single.trait_type);
                    save_subset(&p, m)?;
                    outputs.push(p);
                }
                text.push_str(&format!("{}\n", single.summary()));
            }
            write_file(&summary, &text)?;
            outputs.push(summary);
            lines.extend(text.lines().map(|l| format!("{}\t{l}", d.name)));
            done.push((unit, outputs));
        }
        self.commit_all(done)?;
        Ok(lines)
    }

    /// Splits every corpus into main and reserve parts.
    pub fn split(&mut self) -> Result<Vec<SplitInfo>> {
        let mut done = Vec::new();
        let mut infos = Vec::new();
        for c in &self.cfg.corpora {
            let seed = derive_seed(self.cfg.seed, &["split", &c.name]);
            let params = (seed, c.split_ratio);
            let unit = self.manifest.prepare(&self.layout.root, &format!("split/{}", c.name), &params, &[c.path.clone()])?;
            let dir = self.layout.corpus_dir(&c.name);
            let info_path = self.layout.split_info(&c.name);
            if unit.fresh {
                log::info!("corpus {} is already split", c.name);
                infos.push(serde_json::from_str(&std::fs::read_to_string(&info_path)?)?);
                continue;
            }
            std::fs::create_dir_all(&dir)?;
            let assigner = SplitAssigner::new(c.split_ratio, seed)?;
            let split = split_file(&c.path, &dir.join("main.conllu"), &dir.join("reserve.conllu"), &assigner)
                .with_context(|| format!("splitting corpus {}", c.name))?;
            if split.rejected > 0 {
                log::warn!("corpus {}: {} sentence block(s) rejected", c.name, split.rejected);
            }
            let info = SplitInfo {
                seed,
                ratio: c.split_ratio,
                main_sentences: split.counts.main,
                reserve_sentences: split.counts.reserve,
                rejected: split.rejected,
            };
            log::info!(
                "corpus {}: {} main, {} reserve sentences",
                c.name,
                info.main_sentences,
                info.reserve_sentences
            );
            write_file(&info_path, serde_json::to_string_pretty(&info)? + "\n")?;
            done.push((unit, vec![split.main, split.reserve, info_path]));
            infos.push(info);
        }
        self.commit_all(done)?;
        Ok(infos)
    }

    fn load_split(&self, corpus: &str) -> Result<CorpusSplit> {
        let path = self.layout.split_info(corpus);
        let text = std::fs::read_to_string(&path)
            .with_context(|| format!("corpus {corpus} has not been split (no {})", path.display()))?;
        let info: SplitInfo = serde_json::from_str(&text)?;
        Ok(info.corpus_split(&self.layout.corpus_dir(corpus)))
    }

    /// Splits where needed, then ablates every cell. Writes one removal table
    /// per (corpus, dataset) and returns all reports in cell order.
    pub fn ablate(&mut self) -> Result<Vec<AblationReport>> {
        self.split()?;
        let mut splits = HashMap::new();
        for c in &self.cfg.corpora {
            splits.insert(c.name.clone(), self.load_split(&c.name)?);
        }
        for d in &self.cfg.datasets {
            for &t in &self.cfg.trait_types {
                let p = self.layout.subset(&d.name, t);
                if !p.exists() {
                    bail!("dataset {} has no {t} subset ({}); run build-dataset first", d.name, p.display());
                }
            }
        }
        let cells = self.cells();
        let outcomes: Vec<Result<(PendingUnit, Vec<PathBuf>, AblationReport)>> = self.pool.install(|| {
            cells
                .par_iter()
                .map(|&(c, ds, t, m)| {
                    let split = &splits[c];
                    let subset_path = self.layout.subset(ds, t);
                    let seed = derive_seed(self.cfg.seed, &["ablate", c, ds, t.as_str(), &m.to_string()]);
                    let mut inputs = vec![split.main.clone(), split.reserve.clone(), subset_path.clone()];
                    inputs.extend(self.lemma_inputs());
                    let key = format!("ablate/{c}/{ds}/{t}/{m}");
                    let unit = self.manifest.prepare(&self.layout.root, &key, &(seed, m.to_string()), &inputs)?;
                    let out = self.layout.ablated(c, ds, t, m);
                    let report_path = self.layout.cell_report(c, ds, t, m);
                    if unit.fresh {
                        let text = std::fs::read_to_string(&report_path)?;
                        let report = parse_removal_table(&text)?.pop().context("empty cell report")?;
                        return Ok((unit, vec![], report));
                    }
                    ensure_parent(&out)?;
                    let subset = load_subset(&subset_path)?;
                    let report = ablate_split(split, &subset, &self.lemmas, m, seed, &out)
                        .with_context(|| format!("ablating {c}/{ds}/{t}/{m}"))?;
                    write_file(&report_path, removal_table(std::slice::from_ref(&report)))?;
                    Ok((unit, vec![out, report_path], report))
                })
                .collect()
        });
        let mut done = Vec::new();
        let mut reports = Vec::new();
        let mut first_err = None;
        for o in outcomes {
            match o {
                Ok((unit, outputs, report)) => {
                    done.push((unit, outputs));
                    reports.push(report);
                }
                Err(e) => {
                    first_err.get_or_insert(e);
                }
            }
        }
        self.commit_all(done)?;
        if let Some(e) = first_err {
            return Err(e);
        }
        let per_table = self.cfg.trait_types.len() * self.methods.len();
        for (i, chunk) in reports.chunks(per_table).enumerate() {
            let c = &self.cfg.corpora[i / self.cfg.datasets.len()].name;
            let ds = &self.cfg.datasets[i % self.cfg.datasets.len()].name;
            write_file(&self.layout.removal_table(c, ds), removal_table(chunk))?;
        }
        Ok(reports)
    }

    /// Every model the train stage produces: one with-model per (corpus,
    /// trait type) and one without-model per ablation cell. A cell's
    /// without-model shares its with-model's training seed.
    pub fn model_plan(&self) -> Vec<ModelEntry> {
        let mut out = Vec::new();
        for c in &self.cfg.corpora {
            for &t in &self.cfg.trait_types {
                out.push(ModelEntry {
                    key: format!("train/{}/with/{t}", c.name),
                    corpus: self.layout.corpus_dir(&c.name).join("main.conllu"),
                    output: self.layout.with_model(&c.name, t),
                    seed: derive_seed(self.cfg.seed, &["train", &c.name, t.as_str()]),
                });
            }
        }
        for (c, ds, t, m) in self.cells() {
            out.push(ModelEntry {
                key: format!("train/{c}/{ds}/{t}/{m}"),
                corpus: self.layout.ablated(c, ds, t, m),
                output: self.layout.without_model(c, ds, t, m),
                seed: derive_seed(self.cfg.seed, &["train", c, t.as_str()]),
            });
        }
        out
    }

    fn train_one(&self, entry: &ModelEntry, mode: TrainMode) -> Result<(PendingUnit, Vec<PathBuf>)> {
        let params = traitcooc::embeddings::CbowHyperparams {
            seed: entry.seed,
            ..self.cfg.embeddings.clone()
        };
        let mode_tag = format!("{mode:?}");
        let unit = self.manifest.prepare(&self.layout.root, &entry.key, &(&params, &mode_tag), &[entry.corpus.clone()])?;
        let log_path = entry.output.with_extension("log.csv");
        let outputs = vec![entry.output.clone(), params_path(&entry.output), log_path.clone()];
        if unit.fresh {
            return Ok((unit, outputs));
        }
        let (model, log) = train_cbow(&CorpusForms::new(&entry.corpus), &params, mode)
            .with_context(|| format!("training {}", entry.key))?;
        if !model.all_finite() {
            bail!("{}: training produced non-finite weights", entry.key);
        }
        ensure_parent(&entry.output)?;
        save_model(&entry.output, &model)?;
        let mut buf = Vec::new();
        log.write_csv(&mut buf)?;
        write_file(&log_path, buf)?;
        log::info!("{}: {} words, final epoch loss {:?}", entry.key, model.vocab.len(), log.epoch_mean_loss.last());
        Ok((unit, outputs))
    }

    /// Trains all models of [`Pipeline::model_plan`].
    pub fn train(&mut self) -> Result<Vec<ModelEntry>> {
        let plan = self.model_plan();
        let missing: Vec<String> = plan
            .iter()
            .filter(|e| !e.corpus.exists())
            .map(|e| format!("{} needs {}", e.key.trim_start_matches("train/"), e.corpus.display()))
            .collect();
        if !missing.is_empty() {
            bail!("missing training corpora (run split/ablate first):\n  {}", missing.join("\n  "));
        }
        let mode = self.cfg.train_mode(self.jobs);
        let outcomes: Vec<Result<(PendingUnit, Vec<PathBuf>)>> = match mode {
            TrainMode::Sequential => self.pool.install(|| plan.par_iter().map(|e| self.train_one(e, mode)).collect()),
            TrainMode::Parallel { .. } => plan.iter().map(|e| self.train_one(e, mode)).collect(),
        };
        let mut done = Vec::new();
        let mut first_err = None;
        for o in outcomes {
            match o {
                Ok(d) => done.push(d),
                Err(e) => {
                    first_err.get_or_insert(e);
                }
            }
        }
        self.commit_all(done)?;
        match first_err {
            Some(e) => Err(e),
            None => Ok(plan),
        }
    }

    fn probe_cell(
        &self,
        (c, ds, t, m): (&str, &str, TraitType, RemovalMethod),
        with: &WordVectors,
        lexicon: &Lexicon,
    ) -> Result<Vec<ProbeResult>> {
        let subset = load_subset(&self.layout.subset(ds, t))?;
        let without_path = self.layout.without_model(c, ds, t, m);
        let without = load_vectors(&without_path)?;
        let (kept, notes) = intersect_concepts(with, &without, &subset, &self.lemmas, m)?;
        for n in notes {
            log::info!("{c}/{ds}/{t}/{m}: {n}");
        }
        let k = self.cfg.probe.folds;
        let svm = self.cfg.probe.svm();
        let seed = |what: &str| derive_seed(self.cfg.seed, &["probe", c, ds, t.as_str(), &m.to_string(), what]);
        let row = |probe, with_cooc, score: traitcooc::probing::CvScore, seed| ProbeResult {
            probe,
            corpus: c.to_string(),
            dataset: ds.to_string(),
            trait_type: t,
            method: m,
            with_cooc,
            folds: score.folds,
            mean: score.mean,
            n: score.n,
            seed,
        };
        let mut out = Vec::with_capacity(4);

        let multi = min_concept_cut(kept.clone(), k);
        let multi_seed = seed("multiclass");
        for (flag, v) in [(true, with), (false, &without)] {
            let score = multiclass_probe(v, &multi, &self.lemmas, k, &svm, multi_seed)?;
            out.push(row(ProbeKind::Multiclass, flag, score, multi_seed));
        }

        let all_concepts: HashSet<&str> = subset.concepts().into_iter().collect();
        let vocab: Vec<String> =
            union_vocab(with, &without).into_iter().filter(|w| !all_concepts.contains(w.as_str())).collect();
        let negatives = sample_negatives(&vocab, lexicon, &kept, kept.len(), seed("negatives"))?;
        let binary_seed = seed("binary");
        for (flag, v) in [(true, with), (false, &without)] {
            let (score, notes) = binary_probe(v, &kept, &negatives, &self.lemmas, k, &svm, binary_seed)?;
            for n in notes {
                log::debug!("{c}/{ds}/{t}/{m}: {n}");
            }
            out.push(row(ProbeKind::Binary, flag, score, binary_seed));
        }
        Ok(out)
    }

    /// Runs both probes on both models of every cell and writes the results
    /// CSV: four rows per cell (two probes, with and without).
    pub fn probe(&mut self) -> Result<Vec<ProbeResult>> {
        let cells = self.cells();
        let mut inputs = vec![self.cfg.lexicon.clone()];
        inputs.extend(self.lemma_inputs());
        for e in self.model_plan() {
            if !e.output.exists() {
                bail!("model {} is missing ({}); run train first", e.key.trim_start_matches("train/"), e.output.display());
            }
            inputs.push(e.output);
        }
        for d in &self.cfg.datasets {
            for &t in &self.cfg.trait_types {
                inputs.push(self.layout.subset(&d.name, t));
            }
        }
        let results_path = self.layout.results();
        let params = (&self.cfg.probe, self.cfg.seed);
        let unit = self.manifest.prepare(&self.layout.root, "probe", &params, &inputs)?;
        if unit.fresh {
            log::info!("probe results are up to date");
            return crate::results::load_results(&results_path);
        }

        let lexicon = Lexicon::load(&self.cfg.lexicon)?;
        let mut with_models = HashMap::new();
        for c in &self.cfg.corpora {
            for &t in &self.cfg.trait_types {
                with_models.insert((c.name.as_str(), t), load_vectors(&self.layout.with_model(&c.name, t))?);
            }
        }
        let per_cell: Vec<Result<Vec<ProbeResult>>> = self.pool.install(|| {
            cells
                .par_iter()
                .map(|&cell| {
                    self.probe_cell(cell, &with_models[&(cell.0, cell.2)], &lexicon)
                        .with_context(|| format!("probing {}/{}/{}/{}", cell.0, cell.1, cell.2, cell.3))
                })
                .collect()
        });
        let mut rows = Vec::new();
        for r in per_cell {
            rows.extend(r?);
        }
        ensure_parent(&results_path)?;
        let mut buf = Vec::new();
        write_results(&mut buf, &rows)?;
        write_file(&results_path, buf)?;
        self.manifest.commit(&self.layout.root, unit, &[results_path])?;
        self.manifest.save(&self.layout.root)?;
        Ok(rows)
    }
}
