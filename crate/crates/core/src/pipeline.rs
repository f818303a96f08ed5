//! End-to-end transfer: question collection, transfer, retrieval-backed
//! answering, entity folding and infilling, with a per-task trace.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::Write;
use std::sync::Arc;
use std::time::Instant;

use log::{debug, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backends::Backends;
use crate::error::{Error, Result};
use crate::infill::{apply_infill, plan_infill, plan_replacements, InfillPlan};
use crate::io::Prediction;
use crate::questions::{build_transferred_set, collect_pairs, QuestionEntityPair, TransferredQuestion};
use crate::retrieval::{build_index, VectorIndex};
use crate::saqa::{answer_all, check_candidate, fold_entity_map, AnswerCandidate, EntityMap, Retrieval};
use crate::scalar::Scalar;
use crate::seed::task_seed;
use crate::types::{Corpus, CorpusSet, PipelineConfig, TransferTask};

/// Everything one task went through. `timings` holds milliseconds per stage
/// and is the only field that varies between identical runs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PipelineTrace {
    pub task_id: String,
    pub generated_pairs: Vec<QuestionEntityPair>,
    pub transferred: Vec<TransferredQuestion>,
    pub retrievals: Vec<Retrieval>,
    pub candidates: Vec<AnswerCandidate>,
    pub entity_map: EntityMap,
    pub plan: InfillPlan,
    pub output: String,
    pub timings: BTreeMap<String, f64>,
    pub warnings: Vec<String>,
}

impl PipelineTrace {
    fn new(task_id: &str) -> Self {
        PipelineTrace {
            task_id: task_id.to_string(),
            ..Default::default()
        }
    }

    fn warn(&mut self, msg: String) {
        warn!("{}: {msg}", self.task_id);
        self.warnings.push(msg);
    }

    /// The trace with its timing field cleared, for reproducibility checks.
    pub fn without_timings(&self) -> PipelineTrace {
        PipelineTrace {
            timings: BTreeMap::new(),
            ..self.clone()
        }
    }

    /// Cross-stage invariants: the output is the plan applied to the
    /// source, candidates answer transferred questions, and map keys are
    /// generated entities.
    pub fn check(&self, source_text: &str) -> Result<()> {
        if apply_infill(source_text, &self.plan)? != self.output {
            return Err(Error::Precondition("trace output differs from its plan".into()));
        }
        let questions: HashSet<&str> = self.transferred.iter().map(|q| q.question.as_str()).collect();
        if let Some(c) = self.candidates.iter().find(|c| !questions.contains(c.question.as_str())) {
            return Err(Error::Precondition(format!(
                "candidate answers an untracked question {:?}",
                c.question
            )));
        }
        let entities: HashSet<&str> = self.generated_pairs.iter().map(|p| p.entity.as_str()).collect();
        if let Some((k, _)) = self.entity_map.iter().find(|(k, _)| !entities.contains(k)) {
            return Err(Error::Precondition(format!(
                "entity map key {k:?} was never generated"
            )));
        }
        Ok(())
    }
}

/// A failed task together with whatever the trace held when it stopped.
#[derive(Debug)]
pub struct TransferFailure {
    pub error: Error,
    pub trace: Box<PipelineTrace>,
}

impl std::fmt::Display for TransferFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "task {}: {}", self.trace.task_id, self.error)
    }
}

impl std::error::Error for TransferFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

fn timed<T>(timings: &mut BTreeMap<String, f64>, stage: &str, f: impl FnOnce() -> T) -> T {
    let t0 = Instant::now();
    let out = f();
    timings.insert(stage.to_string(), t0.elapsed().as_secs_f64() * 1e3);
    out
}

/// Runs one task. `index` must be built over `corpus`, which must be the
/// task's corpus.
pub fn run_transfer<S: Scalar>(
    task: &TransferTask,
    config: &PipelineConfig,
    backends: &Backends,
    corpus: &Corpus,
    index: &VectorIndex<S>,
    skip_on_error: bool,
) -> std::result::Result<(String, PipelineTrace), TransferFailure> {
    let mut trace = PipelineTrace::new(&task.task_id);
    match transfer_into(task, config, backends, corpus, index, skip_on_error, &mut trace) {
        Ok(()) => Ok((trace.output.clone(), trace)),
        Err(error) => Err(TransferFailure {
            error,
            trace: Box::new(trace),
        }),
    }
}

fn transfer_into<S: Scalar>(
    task: &TransferTask,
    config: &PipelineConfig,
    backends: &Backends,
    corpus: &Corpus,
    index: &VectorIndex<S>,
    skip_on_error: bool,
    trace: &mut PipelineTrace,
) -> Result<()> {
    config.validate()?;
    task.validate()?;
    if task.corpus_ref != corpus.corpus_ref() {
        return Err(Error::Precondition(format!(
            "task corpus {:?} but corpus {:?} supplied",
            task.corpus_ref,
            corpus.corpus_ref()
        )));
    }
    let seed = task_seed(config.rng_seed, &task.task_id);

    let pairs = timed(&mut trace.timings, "collect_pairs", || {
        collect_pairs(task, config, seed, backends.qg.as_ref())
    })?;
    trace.generated_pairs = pairs;

    let plan = if trace.generated_pairs.is_empty() {
        trace.warn("no question/entity pairs survived filtering; topic-only substitution".into());
        timed(&mut trace.timings, "plan_infill", || {
            plan_replacements(&task.source_text, &[], &task.source_topic, &task.target_topic)
        })
        .0
    } else {
        let transferred = timed(&mut trace.timings, "transfer", || {
            build_transferred_set(&trace.generated_pairs, task)
        })?;
        trace.transferred = transferred;

        let pass = timed(&mut trace.timings, "answer", || {
            answer_all(
                &trace.transferred,
                index,
                corpus,
                config,
                backends.embed.as_ref(),
                backends.qa.as_ref(),
                skip_on_error,
            )
        })?;
        trace.retrievals = pass.retrievals;
        trace.candidates = pass.candidates;
        for w in pass.warnings {
            trace.warn(w);
        }
        for c in &trace.candidates {
            check_candidate(c, corpus, config)?;
        }

        trace.entity_map = timed(&mut trace.timings, "fold", || fold_entity_map(&trace.candidates));
        let (plan, warnings) = timed(&mut trace.timings, "plan_infill", || {
            plan_infill(
                &task.source_text,
                &trace.entity_map,
                &task.source_topic,
                &task.target_topic,
            )
        });
        for w in warnings {
            trace.warn(w);
        }
        plan
    };
    trace.plan = plan;
    trace.output = timed(&mut trace.timings, "apply_infill", || apply_infill(&task.source_text, &trace.plan))?;
    trace.check(&task.source_text)
}

#[derive(Debug, Clone, Default)]
pub struct BatchOptions {
    pub skip_on_error: bool,
    /// Worker threads; `None` uses the global rayon pool.
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskFailure {
    pub task_id: String,
    pub message: String,
}

#[derive(Debug, Default)]
pub struct BatchResult {
    /// Successful predictions in input order.
    pub predictions: Vec<Prediction>,
    /// One trace per task that reached the pipeline, in input order;
    /// failed tasks keep their partial trace.
    pub traces: Vec<PipelineTrace>,
    pub failures: Vec<TaskFailure>,
    /// Distinct indices built for this batch.
    pub index_builds: usize,
}

impl BatchResult {
    pub fn succeeded(&self) -> bool {
        self.failures.is_empty()
    }
}

enum TaskOutcome {
    Done(Prediction, PipelineTrace),
    Failed(TaskFailure, Option<PipelineTrace>),
}

/// Builds one index per distinct corpus reference among `tasks`.
pub fn build_indices<S: Scalar>(
    tasks: &[TransferTask],
    corpora: &CorpusSet,
    backends: &Backends,
) -> HashMap<String, std::result::Result<Arc<VectorIndex<S>>, String>> {
    let mut refs: Vec<&str> = tasks.iter().map(|t| t.corpus_ref.as_str()).collect();
    refs.sort_unstable();
    refs.dedup();
    refs.into_par_iter()
        .map(|r| {
            let built = corpora
                .require(r)
                .and_then(|c| build_index::<S>(c, backends.embed.as_ref()))
                .map(Arc::new)
                .map_err(|e| e.to_string());
            (r.to_string(), built)
        })
        .collect()
}

/// Runs every task; failures are collected, never fatal to the batch.
pub fn run_batch<S: Scalar>(
    tasks: &[TransferTask],
    corpora: &CorpusSet,
    config: &PipelineConfig,
    backends: &Backends,
    opts: &BatchOptions,
) -> Result<BatchResult> {
    config.validate()?;
    let work = || {
        let indices = build_indices::<S>(tasks, corpora, backends);
        debug!("built {} index(es)", indices.len());
        let outcomes: Vec<TaskOutcome> = tasks
            .par_iter()
            .map(|task| run_one(task, corpora, &indices, config, backends, opts.skip_on_error))
            .collect();
        (indices.len(), outcomes)
    };
    let (index_builds, outcomes) = match opts.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?
            .install(work),
        None => work(),
    };

    let mut result = BatchResult {
        index_builds,
        ..Default::default()
    };
    for outcome in outcomes {
        match outcome {
            TaskOutcome::Done(p, t) => {
                result.predictions.push(p);
                result.traces.push(t);
            }
            TaskOutcome::Failed(f, t) => {
                warn!("{}: {}", f.task_id, f.message);
                result.failures.push(f);
                result.traces.extend(t);
            }
        }
    }
    Ok(result)
}

fn run_one<S: Scalar>(
    task: &TransferTask,
    corpora: &CorpusSet,
    indices: &HashMap<String, std::result::Result<Arc<VectorIndex<S>>, String>>,
    config: &PipelineConfig,
    backends: &Backends,
    skip_on_error: bool,
) -> TaskOutcome {
    let fail = |message: String| {
        TaskOutcome::Failed(
            TaskFailure {
                task_id: task.task_id.clone(),
                message,
            },
            None,
        )
    };
    let corpus = match corpora.require(&task.corpus_ref) {
        Ok(c) => c,
        Err(e) => return fail(e.to_string()),
    };
    let index = match &indices[&task.corpus_ref] {
        Ok(i) => i,
        Err(e) => return fail(format!("index build failed: {e}")),
    };
    match run_transfer(task, config, backends, corpus, index, skip_on_error) {
        Ok((prediction, trace)) => TaskOutcome::Done(
            Prediction {
                task_id: task.task_id.clone(),
                prediction,
            },
            trace,
        ),
        Err(f) => TaskOutcome::Failed(
            TaskFailure {
                task_id: task.task_id.clone(),
                message: f.error.to_string(),
            },
            Some(*f.trace),
        ),
    }
}

/// One JSON object per trace.
pub fn write_traces<W: Write>(w: W, traces: &[PipelineTrace]) -> Result<()> {
    crate::io::write_jsonl(w, traces)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::{QgRequest, QgResponse, QuestionGenerator};

    fn task(id: &str, source: &str, ts: &str, tt: &str, corpus: &str) -> TransferTask {
        TransferTask {
            task_id: id.into(),
            source_text: source.into(),
            source_topic: ts.into(),
            target_topic: tt.into(),
            corpus_ref: corpus.into(),
            reference_text: None,
        }
    }

    struct Silent;

    impl QuestionGenerator for Silent {
        fn generate_pairs(&self, _: &QgRequest) -> Result<QgResponse> {
            Ok(QgResponse { pairs: Vec::new() })
        }
    }

    #[test]
    fn mandela_party() {
        let corpus = Corpus::new(
            "mandela",
            ["the party of mandela is anc .", "the birthplace of mandela is mvezo ."],
        )
        .unwrap();
        let index = build_index::<f32>(&corpus, &crate::backends::HashEmbedder::default()).unwrap();
        let t = task("t", "the party of stalin is communist party .", "stalin", "mandela", "mandela");
        let (out, trace) =
            run_transfer(&t, &PipelineConfig::default(), &Backends::reference(), &corpus, &index, false)
                .unwrap();
        assert_eq!(out, "the party of mandela is anc .");
        assert_eq!(trace.entity_map.get("communist party").unwrap().answer, "anc");
        assert!(trace.warnings.is_empty());
        trace.check(&t.source_text).unwrap();
    }

    #[test]
    fn silent_generator_degrades_to_topic_swap() {
        let corpus = Corpus::new("c", ["the party of mandela is anc ."]).unwrap();
        let index = build_index::<f64>(&corpus, &crate::backends::HashEmbedder::default()).unwrap();
        let backends = Backends {
            qg: Arc::new(Silent),
            ..Backends::reference()
        };
        let t = task("t", "Stalin led the party.", "Stalin", "Mandela", "c");
        let (out, trace) =
            run_transfer(&t, &PipelineConfig::default(), &backends, &corpus, &index, false).unwrap();
        assert_eq!(out, "Mandela led the party.");
        assert_eq!(trace.warnings.len(), 1);
    }

    #[test]
    fn same_topic_over_source_facts_is_fixed_point() {
        let source = "the party of stalin is communist party . the birthplace of stalin is gori .";
        let corpus = Corpus::new(
            "stalin",
            ["the party of stalin is communist party .", "the birthplace of stalin is gori ."],
        )
        .unwrap();
        let index = build_index::<f32>(&corpus, &crate::backends::HashEmbedder::default()).unwrap();
        let t = task("t", source, "stalin", "stalin", "stalin");
        let (out, _) =
            run_transfer(&t, &PipelineConfig::default(), &Backends::reference(), &corpus, &index, false)
                .unwrap();
        assert_eq!(out, source);
    }

    #[test]
    fn shared_corpus_builds_once_and_order_is_kept() {
        let corpora: CorpusSet = [Corpus::new("m", ["the party of mandela is anc ."]).unwrap()]
            .into_iter()
            .collect();
        let tasks = [
            task("b", "the party of stalin is communist .", "stalin", "mandela", "m"),
            task("a", "the party of lenin is bolshevik .", "lenin", "mandela", "m"),
        ];
        let r = run_batch::<f32>(
            &tasks,
            &corpora,
            &PipelineConfig::default(),
            &Backends::reference(),
            &BatchOptions::default(),
        )
        .unwrap();
        assert_eq!(r.index_builds, 1);
        let ids: Vec<&str> = r.predictions.iter().map(|p| p.task_id.as_str()).collect();
        assert_eq!(ids, ["b", "a"]);
        assert!(r.predictions.iter().all(|p| p.prediction == "the party of mandela is anc ."));
    }

    #[test]
    fn empty_batch_and_unknown_corpus() {
        let cfg = PipelineConfig::default();
        let r = run_batch::<f32>(&[], &CorpusSet::new(), &cfg, &Backends::reference(), &BatchOptions::default())
            .unwrap();
        assert!(r.succeeded() && r.predictions.is_empty() && r.index_builds == 0);

        let tasks = [task("x", "a b", "a", "c", "missing")];
        let r = run_batch::<f32>(&tasks, &CorpusSet::new(), &cfg, &Backends::reference(), &BatchOptions::default())
            .unwrap();
        assert_eq!(r.failures.len(), 1);
        assert!(r.predictions.is_empty());
    }
}
