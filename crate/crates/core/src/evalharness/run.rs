use super::{
    compute_metrics, episode_seed, EpisodeRun, MetricsError, MetricsReport, ScenarioSpec,
    ShiftSpec, SuiteSpec,
};
use crate::critic::{Critic, LmCritic, OracleCritic, PerceptionBackend};
use crate::engine::{ground, Components, EngineConfig};
use crate::fixtures::world;
use crate::lmclient::{CountingLm, LanguageModel, ReplayCache};
use crate::planner::{HeuristicPlanner, Lexicon};
use crate::retriever::Retriever;
use crate::skilldb::SkillDatabase;
use crate::worldsim::{
    apply_shift, ground_truth_plan, quantify_shift, Environment, Magnitude, ShiftKind, WorldState,
};
use rayon::prelude::*;
use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

/// Where generator and task-retriever answers come from.
#[derive(Clone)]
pub enum PlannerBackend {
    /// The deterministic heuristic planner, built per episode for the
    /// episode's world.
    Heuristic,
    Lm(Arc<dyn LanguageModel>),
}

#[derive(Clone)]
pub enum CriticBackend {
    Oracle,
    Lm {
        lm: Arc<dyn LanguageModel>,
        perception: Arc<dyn PerceptionBackend>,
    },
}

/// Shared pieces of a suite run.
pub struct Harness {
    pub retriever: Retriever,
    /// Reset state of the world the database was built in.
    pub training_world: WorldState,
    pub planner: PlannerBackend,
    pub critic: CriticBackend,
    /// When set, planner calls go through this cache's store and mode.
    pub cache: Option<Arc<ReplayCache>>,
    /// Engine settings; the mode comes from each scenario.
    pub engine: EngineConfig,
    shifted: Mutex<HashMap<ShiftKey, Result<WorldState, String>>>,
    planner_calls: Arc<AtomicUsize>,
}

type ShiftKey = (String, ShiftKind, Option<Magnitude>, u64);

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("scenario {id}: {message}")]
    InvalidScenario { id: String, message: String },
    #[error("cannot build a thread pool: {0}")]
    Pool(String),
    #[error("cannot write {path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

pub struct SuiteOutput {
    pub runs: Vec<EpisodeRun>,
    pub report: MetricsReport,
}

impl Harness {
    /// Heuristic planner, oracle critic, no cache, default engine settings.
    pub fn new(retriever: Retriever, training_world: WorldState) -> Self {
        Self {
            retriever,
            training_world,
            planner: PlannerBackend::Heuristic,
            critic: CriticBackend::Oracle,
            cache: None,
            engine: EngineConfig::default(),
            shifted: Mutex::default(),
            planner_calls: Arc::default(),
        }
    }

    /// Shifted worlds are memoized, so modes that share a shift seed share
    /// the world and the generator runs once.
    fn shifted_world(
        &self,
        base: &WorldState,
        shift: &ShiftSpec,
        seed: u64,
    ) -> Result<WorldState, String> {
        let key = (base.name.clone(), shift.kind, shift.magnitude, seed);
        if let Some(hit) = self.shifted.lock().expect("shift memo").get(&key) {
            return hit.clone();
        }
        let made = apply_shift(base, shift.kind, shift.magnitude, seed, self.db())
            .map(|o| o.state)
            .map_err(|e| e.to_string());
        self.shifted
            .lock()
            .expect("shift memo")
            .insert(key, made.clone());
        made
    }

    fn db(&self) -> &Arc<SkillDatabase> {
        self.retriever.db()
    }

    /// Calls that reached a planner backend, cache hits excluded.
    pub fn planner_calls(&self) -> usize {
        self.planner_calls.load(Ordering::SeqCst)
    }

    pub fn check(&self, spec: &ScenarioSpec) -> Result<(), HarnessError> {
        let bad = |message: String| HarnessError::InvalidScenario {
            id: spec.id.clone(),
            message,
        };
        if spec.instruction.trim().is_empty() {
            return Err(bad("instruction is empty".into()));
        }
        if world(&spec.base_world).is_none() {
            return Err(bad(format!("unknown world {:?}", spec.base_world)));
        }
        if let Some(r) = &spec.task.reference_skill {
            if self.db().find_semantic(r).is_none() {
                return Err(bad(format!("reference skill {r:?} is not in the database")));
            }
        }
        Ok(())
    }

    fn planner_for(&self, state: &WorldState) -> Arc<dyn LanguageModel> {
        let inner: Arc<dyn LanguageModel> = match &self.planner {
            PlannerBackend::Heuristic => Arc::new(HeuristicPlanner::new(Lexicon::for_world(state))),
            PlannerBackend::Lm(lm) => lm.clone(),
        };
        let inner: Arc<dyn LanguageModel> =
            Arc::new(CountingLm::with_counter(inner, self.planner_calls.clone()));
        match &self.cache {
            Some(cache) => Arc::new(cache.rebind(inner)),
            None => inner,
        }
    }

    /// Runs one scenario under one seed.
    pub fn run_episode(&self, spec: &ScenarioSpec, seed: u64) -> EpisodeRun {
        let db = self.db().clone();
        let mut run = EpisodeRun {
            scenario: spec.id.clone(),
            seed,
            mode: spec.mode,
            instruction_type: spec.instruction_type,
            shift: spec.shift_label(),
            degree: crate::worldsim::ShiftDegree::None,
            goal_count: spec.task.goal_conditions.len(),
            ground_truth: spec.task.ground_truth_sequence.clone(),
            trace: None,
            error: None,
        };
        let Some(base) = world(&spec.base_world) else {
            run.error = Some(format!("unknown world {:?}", spec.base_world));
            return run;
        };
        let episode = episode_seed(seed, &spec.id);
        let mut state = match &spec.shift {
            Some(s) => match self.shifted_world(&base, s, s.seed.unwrap_or(episode)) {
                Ok(state) => state,
                Err(e) => {
                    run.error = Some(e);
                    return run;
                }
            },
            None => base,
        };
        state.rng_seed = episode;
        run.degree = quantify_shift(&self.training_world, &state, &db).degree;
        if let Some(r) = &spec.task.reference_skill {
            match ground_truth_plan(&state, &db, r) {
                Ok((prims, _)) => run.ground_truth = prims.iter().map(|p| p.to_string()).collect(),
                Err(e) => {
                    run.error = Some(e.to_string());
                    return run;
                }
            }
        }
        let planner = self.planner_for(&state);
        let oracle = OracleCritic { db: &db };
        let lm_critic;
        let critic: &dyn Critic = match &self.critic {
            CriticBackend::Oracle => &oracle,
            CriticBackend::Lm { lm, perception } => {
                lm_critic = LmCritic {
                    lm: lm.as_ref(),
                    perception: perception.as_ref(),
                };
                &lm_critic
            }
        };
        let parts = Components {
            retriever: &self.retriever,
            planner: planner.as_ref(),
            critic,
            training_reset: Some(&self.training_world),
        };
        let config = EngineConfig {
            mode: spec.mode,
            ..self.engine.clone()
        };
        let mut env = Environment::new(
            state,
            spec.task.goal_conditions.clone(),
            spec.task.step_budget,
        );
        run.trace = Some(ground(&spec.instruction, &mut env, &parts, &config, None));
        run
    }
}

fn write_trace(dir: &Path, run: &EpisodeRun) -> Result<(), HarnessError> {
    let Some(trace) = &run.trace else {
        return Ok(());
    };
    let folder = dir.join(&run.scenario).join(run.seed.to_string());
    let path = folder.join("trace.jsonl");
    let io = |e: std::io::Error| HarnessError::Io {
        path: path.clone(),
        message: e.to_string(),
    };
    std::fs::create_dir_all(&folder).map_err(io)?;
    std::fs::write(&path, trace.to_jsonl()).map_err(io)
}

/// Runs every scenario under every seed with up to `parallelism` workers.
/// Setup failures are recorded per episode and the suite carries on. With
/// `trace_dir`, traces go to `<trace_dir>/<scenario>/<seed>/trace.jsonl`.
pub fn run_suite(
    suite: &SuiteSpec,
    harness: &Harness,
    parallelism: usize,
    trace_dir: Option<&Path>,
) -> Result<SuiteOutput, HarnessError> {
    for s in &suite.scenarios {
        harness.check(s)?;
    }
    let jobs: Vec<(&ScenarioSpec, u64)> = suite
        .scenarios
        .iter()
        .flat_map(|s| suite.seeds.iter().map(move |seed| (s, *seed)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .map_err(|e| HarnessError::Pool(e.to_string()))?;
    let runs: Vec<EpisodeRun> = pool.install(|| {
        jobs.par_iter()
            .map(|(spec, seed)| harness.run_episode(spec, *seed))
            .collect()
    });
    if let Some(dir) = trace_dir {
        for r in &runs {
            write_trace(dir, r)?;
        }
    }
    let report = compute_metrics(&runs)?;
    Ok(SuiteOutput { runs, report })
}
