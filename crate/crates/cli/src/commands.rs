use crate::config::{language_model, load_world, CliConfig, CriticConfig, LmConfig};
use crate::{BootstrapArgs, EvalArgs, GroundArgs};
use anyhow::{bail, Context, Result};
use groundwork::bootstrap::{
    build_hierarchy, level1_entries, BootstrapConfig, BootstrapLms, ChainerLm, SummarizerLm,
};
use groundwork::critic::{Critic, LmCritic, OracleCritic};
use groundwork::engine::{ground as run_ground, Components, EngineConfig, Outcome, TraceStep};
use groundwork::evalharness::{
    ci_suite, degree_suite, run_suite, shift_suite, CriticBackend, Harness, PlannerBackend,
    ScenarioSpec, SuiteSpec,
};
use groundwork::lmclient::{CacheMode, LanguageModel, ReplayCache, Tag};
use groundwork::planner::{HeuristicPlanner, Lexicon};
use groundwork::skilldb::{save_observations, SkillDatabase, SkillId, SkillRecord, Violation};
use groundwork::worldsim::{apply_shift, Environment, Magnitude};
use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

/// Parses a database file line by line, reporting every malformed line.
fn read_db(file: &Path) -> Result<(SkillDatabase, HashMap<SkillId, usize>), Vec<String>> {
    let text =
        std::fs::read_to_string(file).map_err(|e| vec![format!("{}: {e}", file.display())])?;
    let mut entries = Vec::new();
    let mut lines = HashMap::new();
    let mut errors = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<SkillRecord>(line) {
            Ok(r) => {
                lines.entry(SkillId::new(r.level, r.index)).or_insert(i + 1);
                entries.push(r.into());
            }
            Err(e) => errors.push(format!("{}:{}: parse: {e}", file.display(), i + 1)),
        }
    }
    if !errors.is_empty() {
        return Err(errors);
    }
    Ok((SkillDatabase::new_unchecked(entries), lines))
}

fn violation_id(v: &Violation) -> Option<SkillId> {
    match v {
        Violation::InvalidId { id }
        | Violation::DuplicateId { id }
        | Violation::EmptySemantic { id }
        | Violation::DuplicateSemantic { id, .. }
        | Violation::Level1Plan { id }
        | Violation::EmptyPlan { id }
        | Violation::DanglingReference { id, .. }
        | Violation::LevelSkip { id, .. } => Some(*id),
        Violation::MissingLevel { .. } => None,
    }
}

fn stats_table(db: &SkillDatabase) -> String {
    let stats = db.stats();
    let mut out = String::from("level  entries  mean plan length\n");
    for (level, n) in &stats.levels {
        let mean = stats.mean_plan_len.get(level).copied().unwrap_or(0.0);
        let _ = writeln!(out, "{level:>5}  {n:>7}  {mean:>16.2}");
    }
    let _ = writeln!(out, "total  {:>7}", stats.total);
    out
}

pub fn db_validate(file: &Path) -> Result<ExitCode> {
    let (db, lines) = match read_db(file) {
        Ok(x) => x,
        Err(errors) => {
            for e in errors {
                println!("{e}");
            }
            return Ok(ExitCode::from(1));
        }
    };
    let violations = db.violations();
    if violations.is_empty() {
        println!("{}: ok", file.display());
        print!("{}", stats_table(&db));
        return Ok(ExitCode::SUCCESS);
    }
    for v in &violations {
        match violation_id(v).and_then(|id| lines.get(&id)) {
            Some(line) => println!("{}:{line}: {}: {v}", file.display(), v.rule()),
            None => println!("{}: {}: {v}", file.display(), v.rule()),
        }
    }
    println!("{} violation(s)", violations.len());
    Ok(ExitCode::from(1))
}

pub fn db_stats(file: &Path) -> Result<ExitCode> {
    match read_db(file) {
        Ok((db, _)) => {
            print!("{}", stats_table(&db));
            Ok(ExitCode::SUCCESS)
        }
        Err(errors) => {
            for e in errors {
                println!("{e}");
            }
            Ok(ExitCode::from(1))
        }
    }
}

fn cached(cache: Option<&Arc<ReplayCache>>, lm: Arc<dyn LanguageModel>) -> Arc<dyn LanguageModel> {
    match cache {
        Some(c) => Arc::new(c.rebind(lm)),
        None => lm,
    }
}

fn critic_lm(config: &CliConfig) -> Result<Option<Arc<dyn LanguageModel>>> {
    match &config.critic {
        CriticConfig::Oracle {} => Ok(None),
        CriticConfig::Lm {
            lm: LmConfig::Heuristic {},
            ..
        } => bail!("the heuristic backend cannot act as critic"),
        CriticConfig::Lm { lm, .. } => language_model(lm),
    }
}

fn step_line(s: &TraceStep) -> String {
    let verdict = match &s.verdict {
        None => "-".to_string(),
        Some(v) if v.is_executable() => "E".to_string(),
        Some(v) => format!("NE ({})", v.feedback.as_deref().unwrap_or("no feedback")),
    };
    let action = if let Some(r) = &s.refinement {
        format!("refine: {r}")
    } else if let Some(e) = &s.execution {
        let status = if e.success { "executed" } else { "failed" };
        format!("{status}: {}", e.primitives.join(", "))
    } else {
        "stop".to_string()
    };
    format!(
        "{:>3} d{} [{}] -> {} | {} | {}",
        s.step, s.frame.depth, s.frame.instruction, s.generated, verdict, action
    )
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read {what} {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("invalid {what} {}", path.display()))
}

pub fn ground(config: &CliConfig, args: &GroundArgs) -> Result<ExitCode> {
    let spec: ScenarioSpec = read_json(&args.scenario, "scenario")?;
    let base = args.scenario.parent().unwrap_or(Path::new("."));
    let retriever = config.retriever()?;
    let db = retriever.db().clone();
    let training = config.training_world()?;
    let mut state = load_world(&spec.base_world, base)?;
    if let Some(shift) = &spec.shift {
        let seed = shift.seed.or(args.seed).unwrap_or(0);
        state = apply_shift(&state, shift.kind, shift.magnitude, seed, &db)?.state;
    }
    if let Some(seed) = args.seed {
        state.rng_seed = seed;
    }
    let instruction = args
        .instruction
        .clone()
        .unwrap_or_else(|| spec.instruction.clone());
    let engine = EngineConfig {
        mode: args.mode.unwrap_or(spec.mode),
        k: args.k.unwrap_or(config.engine.k),
        ..config.engine.clone()
    };

    let cache = config.cache()?;
    let planner_lm = match language_model(&config.planner)? {
        Some(lm) => lm,
        None => Arc::new(HeuristicPlanner::new(Lexicon::for_world(&state))),
    };
    let planner = cached(cache.as_ref(), planner_lm);
    let critic_lm = critic_lm(config)?.map(|lm| cached(cache.as_ref(), lm));
    let perception = config.perception();
    let oracle = OracleCritic { db: &db };
    let lm_critic;
    let critic: &dyn Critic = match &critic_lm {
        None => &oracle,
        Some(lm) => {
            lm_critic = LmCritic {
                lm: lm.as_ref(),
                perception: perception.as_ref(),
            };
            &lm_critic
        }
    };
    let parts = Components {
        retriever: &retriever,
        planner: planner.as_ref(),
        critic,
        training_reset: Some(&training),
    };
    let mut env = Environment::new(
        state,
        spec.task.goal_conditions.clone(),
        spec.task.step_budget,
    );
    let mut print = |s: &TraceStep| println!("{}", step_line(s));
    let trace = run_ground(&instruction, &mut env, &parts, &engine, Some(&mut print));
    config.save_cache(cache.as_deref())?;

    let path = args.trace.clone().unwrap_or_else(|| {
        config
            .trace_dir
            .clone()
            .unwrap_or_else(|| PathBuf::from("."))
            .join(format!("{}.trace.jsonl", spec.id))
    });
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    std::fs::write(&path, trace.to_jsonl())
        .with_context(|| format!("cannot write trace {}", path.display()))?;

    let f = &trace.footer;
    let c = &f.counters;
    let outcome = match &f.outcome {
        Outcome::Done => "done".to_string(),
        Outcome::BudgetExhausted { reason } => format!("budget exhausted ({reason:?})"),
        Outcome::Error { message } => format!("error: {message}"),
    };
    println!(
        "outcome: {outcome}; goals {}/{}; generated {}, executed {}, not executable {} (domain {})",
        f.goals_met, f.goals_total, c.generated, c.executed_ok, c.ne_all, c.ne_domain
    );
    println!("trace: {}", path.display());
    Ok(match f.outcome {
        Outcome::Done => ExitCode::SUCCESS,
        Outcome::BudgetExhausted { .. } => ExitCode::from(2),
        Outcome::Error { .. } => ExitCode::from(1),
    })
}

fn builtin_suite(name: &str) -> Option<SuiteSpec> {
    let shift = |m| shift_suite(m, &groundwork::engine::Mode::ALL);
    match name {
        "ci" => Some(ci_suite()),
        "shift-small" => Some(shift(Magnitude::Small)),
        "shift-medium" => Some(shift(Magnitude::Medium)),
        "shift-large" => Some(shift(Magnitude::Large)),
        "degree" => Some(degree_suite()),
        _ => None,
    }
}

pub fn eval(config: &CliConfig, args: &EvalArgs) -> Result<ExitCode> {
    let mut suite = match builtin_suite(&args.suite) {
        Some(s) => s,
        None => read_json(Path::new(&args.suite), "suite")?,
    };
    if let Some(seeds) = &config.seeds {
        suite.seeds = seeds.clone();
    }
    let mut harness = Harness::new(config.retriever()?, config.training_world()?);
    let cache = config.cache()?;
    if let Some(lm) = language_model(&config.planner)? {
        harness.planner = PlannerBackend::Lm(lm);
    }
    if let Some(lm) = critic_lm(config)? {
        harness.critic = CriticBackend::Lm {
            lm: cached(cache.as_ref(), lm),
            perception: config.perception(),
        };
    }
    harness.cache = cache.clone();
    harness.engine = config.engine.clone();
    let trace_dir = args
        .out
        .as_ref()
        .map(|d| d.join("traces"))
        .or_else(|| config.trace_dir.clone());
    let parallel = args.parallel.or(config.parallel).unwrap_or(1);
    let out = run_suite(&suite, &harness, parallel, trace_dir.as_deref())?;
    config.save_cache(cache.as_deref())?;

    println!(
        "suite {}: {} scenarios, {} episodes",
        suite.name, out.report.scenarios, out.report.episodes
    );
    print!("{}", out.report.render());
    println!("report sha256 {}", out.report.digest());
    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        let path = dir.join("report.json");
        std::fs::write(&path, out.report.to_json())
            .with_context(|| format!("cannot write {}", path.display()))?;
    }
    for e in &out.report.errors {
        eprintln!("episode {}/{} failed: {}", e.scenario, e.seed, e.message);
    }
    Ok(if out.report.errors.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

pub fn bootstrap(config: &CliConfig, args: &BootstrapArgs) -> Result<ExitCode> {
    let world = load_world(&args.world, Path::new("."))?;
    let defaults = BootstrapConfig::default();
    let settings = BootstrapConfig {
        levels: args.levels,
        episodes_per_level: args.episodes.unwrap_or(defaults.episodes_per_level),
        max_steps: args.max_steps.unwrap_or(defaults.max_steps),
        seed: args.seed.unwrap_or(defaults.seed),
        ..defaults
    };
    let cache = config.cache()?;
    let (chainer, summarizer): (Arc<dyn LanguageModel>, Arc<dyn LanguageModel>) =
        match language_model(&config.planner)? {
            Some(lm) => (lm.clone(), lm),
            None => (Arc::new(ChainerLm), Arc::new(SummarizerLm)),
        };
    let chainer = cached(cache.as_ref(), chainer);
    let summarizer = cached(cache.as_ref(), summarizer);
    let lms = BootstrapLms {
        chainer: chainer.as_ref(),
        summarizer: summarizer.as_ref(),
    };
    let embedder = config.embedder()?;
    let out = build_hierarchy(
        &world,
        level1_entries(&world),
        &lms,
        embedder.as_ref(),
        &settings,
    )?;
    config.save_cache(cache.as_deref())?;

    println!("level  episodes  successful  too short  rejected  duplicates  entries");
    for r in &out.manifest.levels {
        println!(
            "{:>5}  {:>8}  {:>10}  {:>9}  {:>8}  {:>10}  {:>7}",
            r.level,
            r.episodes,
            r.successful,
            r.too_short,
            r.rejected_summaries,
            r.duplicates,
            r.entries
        );
    }
    out.db
        .save(&args.out)
        .with_context(|| format!("cannot write database {}", args.out.display()))?;
    if let Some(p) = &args.observations {
        save_observations(p, &out.observations)
            .with_context(|| format!("cannot write {}", p.display()))?;
    }
    if let Some(p) = &args.manifest {
        let text = serde_json::to_string_pretty(&out.manifest)?;
        std::fs::write(p, text).with_context(|| format!("cannot write {}", p.display()))?;
    }
    print!("{}", stats_table(&out.db));
    println!("database sha256 {}", out.manifest.db_digest);
    let violations = out.db.violations();
    for v in &violations {
        println!("violation: {}: {v}", v.rule());
    }
    Ok(if violations.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn load_cache(file: &Path) -> Result<ReplayCache> {
    let store = ReplayCache::store(CacheMode::Strict);
    store
        .import(file)
        .with_context(|| format!("cannot load cache {}", file.display()))?;
    Ok(store)
}

pub fn cache_stats(file: &Path) -> Result<ExitCode> {
    let store = load_cache(file)?;
    let mut groups: BTreeMap<(String, Tag), usize> = BTreeMap::new();
    for e in store.entries() {
        *groups.entry((e.backend, e.tag)).or_default() += 1;
    }
    println!("entries: {}", store.stats().entries);
    for ((backend, tag), n) in groups {
        println!("{n:>7}  {tag:<10}  {backend}");
    }
    Ok(ExitCode::SUCCESS)
}

pub fn cache_import(into: &Path, from: &[PathBuf]) -> Result<ExitCode> {
    let store = ReplayCache::store(CacheMode::Replay);
    if into.exists() {
        store
            .import(into)
            .with_context(|| format!("cannot load cache {}", into.display()))?;
    }
    let before = store.stats().entries;
    for f in from {
        let n = store
            .import(f)
            .with_context(|| format!("cannot import {}", f.display()))?;
        println!("{}: {n} entries read", f.display());
    }
    store
        .export(into)
        .with_context(|| format!("cannot write cache {}", into.display()))?;
    println!(
        "{}: {} new, {} total",
        into.display(),
        store.stats().entries - before,
        store.stats().entries
    );
    Ok(ExitCode::SUCCESS)
}

pub fn cache_export(
    from: &Path,
    to: &Path,
    backend: Option<&str>,
    tag: Option<&str>,
) -> Result<ExitCode> {
    let tag: Option<Tag> = tag
        .map(|t| serde_json::from_value(serde_json::Value::String(t.to_string())))
        .transpose()
        .context("unknown tag; expected generator, retriever, critic, chainer or summarizer")?;
    let source = load_cache(from)?;
    let target = ReplayCache::store(CacheMode::Replay);
    for e in source.entries() {
        if backend.is_some_and(|b| b != e.backend) || tag.is_some_and(|t| t != e.tag) {
            continue;
        }
        target.record(e)?;
    }
    target
        .export(to)
        .with_context(|| format!("cannot write cache {}", to.display()))?;
    println!("{}: {} entries", to.display(), target.stats().entries);
    Ok(ExitCode::SUCCESS)
}
