use std::collections::BTreeMap;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use earsight::classifier::{classify, EmbeddingProvider, TemplateProvider, TemplateStore};
use earsight::config::{load_geometry, RunConfig};
use earsight::features::{featurize_dir, load_samples, phase_matrix, FeatureIndex};
use earsight::fusion::{dataset_metrics, pseudo_bbox, select_box, threshold_map, BBox, CandidateSet, LocalizationMap};
use earsight::model::{evaluate, train, Checkpoint, JerryNet};
use earsight::pipeline::{
    load_event, read_script, replay_script, ClassicalPerception, CycleMachine, ModelPerception, Perception,
};
use earsight::sim::io::{list_wavs, manifest_path, read_manifest, read_wav, write_dataset, WavEncoding};
use earsight::sim::make_dataset_with;
use earsight::stats::{read_runs_csv, report};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::{Cli, Command, DoaMethod, Encoding};

const SIM: &str = "array-sim";
const FEATURES: &str = "phase-features";
const DOA: &str = "doa-model";
const CLASSIFIER: &str = "classifier";
const FUSION: &str = "fusion";
const LOOP: &str = "pipeline-loop";
const STATS: &str = "eval-stats";
const CLI: &str = "cli";

#[derive(Debug, Serialize)]
pub(crate) struct Failure {
    module: &'static str,
    operation: &'static str,
    message: String,
    #[serde(skip)]
    usage: bool,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            module: CLI,
            operation: "parse-arguments",
            message: message.into(),
            usage: true,
        }
    }

    pub(crate) fn report(&self) -> i32 {
        if self.usage {
            eprintln!("error: {}\n\nFor more information, try '--help'.", self.message);
            2
        } else {
            eprintln!("{}", serde_json::to_string(self).expect("diagnostic serializes"));
            1
        }
    }
}

trait At<T> {
    fn at(self, module: &'static str, operation: &'static str) -> Result<T, Failure>;
}

impl<T, E: std::fmt::Display> At<T> for Result<T, E> {
    fn at(self, module: &'static str, operation: &'static str) -> Result<T, Failure> {
        self.map_err(|e| Failure {
            module,
            operation,
            message: e.to_string(),
            usage: false,
        })
    }
}

/// Flag first, then the config's `[paths]` entry.
fn pick(flag: Option<PathBuf>, fallback: &Option<PathBuf>, name: &str) -> Result<PathBuf, Failure> {
    flag.or_else(|| fallback.clone())
        .ok_or_else(|| Failure::usage(format!("--{name} is required (or set it under [paths] in the config)")))
}

fn emit<T: Serialize>(value: &T) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).at(CLI, "write-output")?;
    match writeln!(io::stdout().lock(), "{text}") {
        Err(e) if e.kind() == io::ErrorKind::BrokenPipe => Ok(()),
        r => r.at(CLI, "write-output"),
    }
}

pub(crate) fn execute(cli: Cli) -> Result<(), Failure> {
    let cfg = match &cli.config {
        Some(path) => RunConfig::load(path).at(CLI, "load-config")?,
        None => RunConfig::default(),
    };
    match cli.command {
        Command::Simulate(a) => {
            let mut ds = cfg.dataset.clone();
            ds.per_class = a.per_class.unwrap_or(ds.per_class);
            ds.seed = a.seed.unwrap_or(ds.seed);
            ds.duration_s = a.duration.unwrap_or(ds.duration_s);
            ds.sample_rate = a.sample_rate.unwrap_or(ds.sample_rate);
            if let Some(e) = a.encoding {
                ds.encoding = match e {
                    Encoding::Pcm16 => WavEncoding::Pcm16,
                    Encoding::Float32 => WavEncoding::Float32,
                };
            }
            let sim = if a.noiseless {
                cfg.sim.clone().noiseless()
            } else {
                cfg.sim.clone()
            };
            let out = pick(a.out, &cfg.paths.data, "out")?;
            let clips = make_dataset_with(
                &cfg.geometry,
                &sim,
                ds.per_class,
                ds.duration_s,
                ds.sample_rate,
                ds.seed,
            )
            .at(SIM, "make-dataset")?;
            write_dataset(&out, &clips, ds.encoding).at(SIM, "write-dataset")?;
            emit(&json!({ "clips": clips.len(), "out": out, "seed": ds.seed }))
        }
        Command::Featurize(a) => {
            let data = pick(a.data, &cfg.paths.data, "data")?;
            let out = pick(a.out, &cfg.paths.features, "out")?;
            let rep = featurize_dir(&data, &out, &cfg.stft).at(FEATURES, "featurize")?;
            for (path, err) in &rep.failures {
                Failure {
                    module: FEATURES,
                    operation: "featurize",
                    message: format!("{}: {err}", path.display()),
                    usage: false,
                }
                .report();
            }
            emit(&json!({ "written": rep.written, "failed": rep.failures.len(), "out": out }))?;
            if rep.failures.is_empty() {
                Ok(())
            } else {
                Err(format!(
                    "{} of {} files failed",
                    rep.failures.len(),
                    rep.failures.len() + rep.written
                ))
                .at(FEATURES, "featurize")
            }
        }
        Command::Train(a) => {
            let data = pick(a.data, &cfg.paths.features, "data")?;
            let out = pick(a.out, &cfg.paths.checkpoint, "out")?;
            let mut tc = cfg.train.clone();
            tc.epochs = a.epochs.unwrap_or(tc.epochs);
            tc.seed = a.seed.unwrap_or(tc.seed);
            tc.learning_rate = a.lr.unwrap_or(tc.learning_rate);
            tc.validate().at(DOA, "train")?;
            let (index, samples) = load_samples(&data).at(DOA, "load-features")?;
            let [_, num_bins, num_frames] = samples[0].input.shape();
            let net = JerryNet::new(cfg.model.clone(), num_bins, num_frames).at(DOA, "build-network")?;
            let (params, history) = train(&net, &samples, &tc).at(DOA, "train")?;
            let ck = Checkpoint {
                config: cfg.model.clone(),
                features: index.features,
                num_bins,
                num_frames,
                params,
            };
            ck.write(&out).at(DOA, "write-checkpoint")?;
            if let Some(h) = &a.history {
                history.write_csv(h).at(DOA, "write-history")?;
            }
            emit(&json!({ "checkpoint": out, "clips": samples.len(), "final": history.last() }))
        }
        Command::Eval(a) => {
            let model = pick(a.model, &cfg.paths.checkpoint, "model")?;
            let data = pick(a.data, &cfg.paths.features, "data")?;
            let ck = Checkpoint::read(&model).at(DOA, "load-checkpoint")?;
            let index = FeatureIndex::read(&data).at(DOA, "load-features")?;
            ck.check_features(&index.features).at(DOA, "evaluate")?;
            let (_, samples) = load_samples(&data).at(DOA, "load-features")?;
            let net = ck.network().at(DOA, "build-network")?;
            emit(&evaluate(&net, &ck.params, &samples).at(DOA, "evaluate")?)
        }
        Command::Predict(a) => {
            let model = pick(a.model, &cfg.paths.checkpoint, "model")?;
            let ck = Checkpoint::read(&model).at(DOA, "load-checkpoint")?;
            let clip = read_wav(&a.clip).at(DOA, "load-clip")?;
            if clip.sample_rate() != ck.features.sample_rate {
                return Err(format!(
                    "clip sample rate {} Hz differs from the model's {} Hz",
                    clip.sample_rate(),
                    ck.features.sample_rate
                ))
                .at(DOA, "predict");
            }
            let pm = phase_matrix(&clip, &ck.features.stft).at(FEATURES, "phase-matrix")?;
            let pred = ck
                .network()
                .and_then(|n| n.forward(&ck.params, &pm))
                .at(DOA, "predict")?;
            let probs: BTreeMap<String, f64> = earsight::Direction::ALL
                .iter()
                .zip(&pred.probs)
                .map(|(d, p)| (d.label().to_string(), *p))
                .collect();
            emit(&json!({ "direction": pred.argmax, "probs": probs }))
        }
        Command::Classify(a) => {
            let mut cc = cfg.classifier.clone();
            cc.threshold = a.threshold.unwrap_or(cc.threshold);
            let provider = provider(&cfg, a.templates)?;
            let clip = read_wav(&a.clip).at(CLASSIFIER, "load-clip")?;
            emit(&classify(provider.as_ref(), &clip, &cc).at(CLASSIFIER, "classify")?)
        }
        Command::FitTemplates(a) => {
            let data = pick(a.data, &cfg.paths.data, "data")?;
            let out = pick(a.out, &cfg.paths.templates, "out")?;
            let mut embeddings = Vec::new();
            for wav in list_wavs(&data).at(CLASSIFIER, "fit-templates")? {
                let Some(class) = read_manifest(&manifest_path(&wav)).ok().and_then(|m| m.sound_class) else {
                    continue;
                };
                let clip = read_wav(&wav).at(CLASSIFIER, "load-clip")?;
                embeddings.push((class, cfg.embedding.mel.embed(&clip).at(CLASSIFIER, "embed")?));
            }
            let count = embeddings.len();
            let store = TemplateStore::fit(embeddings).at(CLASSIFIER, "fit-templates")?;
            store.write(&out).at(CLASSIFIER, "write-templates")?;
            emit(&json!({ "templates": out, "classes": store.classes().collect::<Vec<_>>(), "clips": count }))
        }
        Command::Fuse(a) => {
            let map = LocalizationMap::read(&a.map).at(FUSION, "load-map")?;
            let boxes = CandidateSet::read_jsonl(&a.boxes).at(FUSION, "load-boxes")?;
            let width = a.width.unwrap_or(map.width() as u32);
            let height = a.height.unwrap_or(map.height() as u32);
            let set = CandidateSet::new(boxes, width, height).at(FUSION, "load-boxes")?;
            let mut gate = cfg.fusion.gate;
            gate.enabled |= a.gate;
            let tau = a.tau.unwrap_or(cfg.fusion.tau);
            emit(&select_box(&set, &map, tau, a.doa, &gate).at(FUSION, "select-box")?)
        }
        Command::LocMetrics(a) => {
            let tau = a.tau.unwrap_or(cfg.fusion.tau);
            let success = a.success_iou.unwrap_or(cfg.fusion.success_iou);
            let text = fs::read_to_string(&a.gt).at(FUSION, "load-ground-truth")?;
            let mut pairs = Vec::new();
            for (n, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
                let gt: GroundTruth = serde_json::from_str(line)
                    .map_err(|e| format!("{} line {}: {e}", a.gt.display(), n + 1))
                    .at(FUSION, "load-ground-truth")?;
                let map = LocalizationMap::read(&a.pred.join(&gt.map)).at(FUSION, "load-map")?;
                pairs.push((pseudo_bbox(&threshold_map(&map, tau)), gt.bbox));
            }
            emit(&dataset_metrics(&pairs, success).at(FUSION, "dataset-metrics")?)
        }
        Command::Loop(a) => {
            let script = match (&a.events, &a.replay) {
                (Some(events), _) => read_script(events).at(LOOP, "load-events")?,
                (None, Some(dir)) => replay_script(dir, a.window).at(LOOP, "load-events")?,
                (None, None) => return Err(Failure::usage("one of --events or --replay is required")),
            };
            let provider = provider(&cfg, a.templates)?;
            let mut perception: Box<dyn Perception> = match a.doa_method {
                DoaMethod::Cnn => {
                    let model = pick(a.model, &cfg.paths.checkpoint, "model")?;
                    let ck = Checkpoint::read(&model).at(LOOP, "load-checkpoint")?;
                    Box::new(ModelPerception::new(ck, provider, cfg.classifier.clone()).at(LOOP, "load-checkpoint")?)
                }
                DoaMethod::Classical => {
                    let geometry = match &a.geometry {
                        Some(p) => load_geometry(p).at(LOOP, "load-geometry")?,
                        None => cfg.geometry.clone(),
                    };
                    Box::new(
                        ClassicalPerception::new(geometry, cfg.stft, provider, cfg.classifier.clone())
                            .at(LOOP, "build-perception")?,
                    )
                }
            };
            let mut sink: Box<dyn Write> = match &a.out {
                Some(p) => Box::new(BufWriter::new(fs::File::create(p).at(LOOP, "write-records")?)),
                None => Box::new(BufWriter::new(io::stdout().lock())),
            };
            let mut machine = CycleMachine::new(cfg.cycle.clone(), cfg.fusion.clone());
            for line in &script {
                let event = load_event(line).at(LOOP, "load-event")?;
                for record in machine.step(line.t, event, perception.as_mut()) {
                    serde_json::to_writer(&mut sink, &record).at(LOOP, "write-records")?;
                    writeln!(sink).at(LOOP, "write-records")?;
                }
            }
            sink.flush().at(LOOP, "write-records")
        }
        Command::Stats(a) => {
            let groups = read_runs_csv(&a.runs).at(STATS, "read-runs")?;
            emit(&report(&groups, a.alpha).at(STATS, "report")?)
        }
    }
}

#[derive(Deserialize)]
struct GroundTruth {
    map: PathBuf,
    #[serde(flatten)]
    bbox: BBox,
}

fn provider(cfg: &RunConfig, templates: Option<PathBuf>) -> Result<Box<dyn EmbeddingProvider>, Failure> {
    if let Some(external) = &cfg.embedding.external {
        return Ok(Box::new(external.clone()));
    }
    let path = pick(templates, &cfg.paths.templates, "templates")?;
    let store = TemplateStore::read(Path::new(&path)).at(CLASSIFIER, "load-templates")?;
    Ok(Box::new(
        TemplateProvider::new(cfg.embedding.mel, store).at(CLASSIFIER, "load-templates")?,
    ))
}
