//! Operator configuration: which database, embedder, planner, critic and
//! cache a command runs with. Relative paths resolve against the directory
//! of the config file.

use anyhow::{bail, Context, Result};
use groundwork::critic::{HttpPerception, OraclePerception, PerceptionBackend};
use groundwork::engine::EngineConfig;
use groundwork::fixtures::{household_database, world};
use groundwork::lmclient::{
    CacheMode, FnLm, HttpChatConfig, HttpChatLm, LanguageModel, LmError, ReplayCache, RuleSpec,
    ScriptedLm,
};
use groundwork::retriever::{Embedder, HashEmbedder, HttpEmbedder, Retriever};
use groundwork::skilldb::SkillDatabase;
use groundwork::worldsim::WorldState;
use serde::Deserialize;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CliConfig {
    /// Skill database file; the built-in household database when absent.
    pub db: Option<PathBuf>,
    /// Built-in world name or world JSON file the database was built in.
    pub training_world: Option<String>,
    pub embedder: EmbedderConfig,
    pub planner: LmConfig,
    pub critic: CriticConfig,
    pub cache: Option<CacheConfig>,
    pub engine: EngineConfig,
    /// Overrides the seeds of evaluated suites.
    pub seeds: Option<Vec<u64>>,
    pub parallel: Option<usize>,
    pub trace_dir: Option<PathBuf>,
    #[serde(skip)]
    pub base: PathBuf,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EmbedderConfig {
    Hash {
        #[serde(default = "default_dim")]
        dim: usize,
    },
    Http {
        endpoint: String,
        dim: usize,
        /// Environment variable holding the API key.
        api_key_env: Option<String>,
        #[serde(default = "default_timeout")]
        timeout_secs: u64,
    },
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        EmbedderConfig::Hash { dim: default_dim() }
    }
}

fn default_dim() -> usize {
    HashEmbedder::default().dim()
}

fn default_timeout() -> u64 {
    60
}

// Unit-like variants are empty structs so extra keys are rejected.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LmConfig {
    /// Deterministic planner built per world; planner role only.
    Heuristic {},
    /// Regex rules from a JSON file.
    Scripted { rules: PathBuf, id: Option<String> },
    Http {
        base_url: String,
        model: String,
        api_key_env: Option<String>,
        timeout_secs: Option<u64>,
        max_retries: Option<u32>,
    },
    /// Answers come only from the cache; `backend` names the backend the
    /// entries were recorded against.
    Replay { backend: String },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CriticConfig {
    Oracle {},
    Lm {
        lm: LmConfig,
        #[serde(default)]
        perception: PerceptionConfig,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PerceptionConfig {
    Oracle {},
    Http {
        endpoint: String,
        #[serde(default = "default_timeout")]
        timeout_secs: u64,
    },
}

impl Default for LmConfig {
    fn default() -> Self {
        LmConfig::Heuristic {}
    }
}

impl Default for CriticConfig {
    fn default() -> Self {
        CriticConfig::Oracle {}
    }
}

impl Default for PerceptionConfig {
    fn default() -> Self {
        PerceptionConfig::Oracle {}
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CacheConfig {
    pub path: PathBuf,
    #[serde(default = "default_cache_mode")]
    pub mode: CacheMode,
}

fn default_cache_mode() -> CacheMode {
    CacheMode::Replay
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

fn resolve_lm(base: &Path, lm: &mut LmConfig) {
    if let LmConfig::Scripted { rules, .. } = lm {
        resolve(base, rules);
    }
}

impl CliConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self {
                base: PathBuf::from("."),
                ..Default::default()
            });
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let mut config: CliConfig = serde_json::from_str(&text)
            .with_context(|| format!("invalid config {}", path.display()))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        for p in [&mut config.db, &mut config.trace_dir]
            .into_iter()
            .flatten()
        {
            resolve(&base, p);
        }
        if let Some(c) = &mut config.cache {
            resolve(&base, &mut c.path);
        }
        resolve_lm(&base, &mut config.planner);
        if let CriticConfig::Lm { lm, .. } = &mut config.critic {
            resolve_lm(&base, lm);
        }
        config.base = base;
        Ok(config)
    }

    pub fn database(&self) -> Result<Arc<SkillDatabase>> {
        match &self.db {
            Some(p) => {
                Ok(Arc::new(SkillDatabase::load(p).with_context(|| {
                    format!("cannot load database {}", p.display())
                })?))
            }
            None => Ok(household_database()),
        }
    }

    pub fn training_world(&self) -> Result<WorldState> {
        load_world(
            self.training_world.as_deref().unwrap_or("house"),
            &self.base,
        )
    }

    pub fn embedder(&self) -> Result<Arc<dyn Embedder>> {
        Ok(match &self.embedder {
            EmbedderConfig::Hash { dim } => Arc::new(HashEmbedder::new(*dim)),
            EmbedderConfig::Http {
                endpoint,
                dim,
                api_key_env,
                timeout_secs,
            } => {
                let key = api_key_env.as_deref().map(secret).transpose()?;
                Arc::new(HttpEmbedder::new(
                    endpoint,
                    *dim,
                    key,
                    Duration::from_secs(*timeout_secs),
                ))
            }
        })
    }

    pub fn retriever(&self) -> Result<Retriever> {
        Ok(Retriever::new(self.database()?, self.embedder()?)?)
    }

    /// The cache store, loaded from its file when the file exists.
    pub fn cache(&self) -> Result<Option<Arc<ReplayCache>>> {
        let Some(c) = &self.cache else {
            return Ok(None);
        };
        let store = ReplayCache::store(c.mode);
        if c.path.exists() {
            store
                .import(&c.path)
                .with_context(|| format!("cannot load cache {}", c.path.display()))?;
        } else if c.mode == CacheMode::Strict {
            bail!("strict cache file {} does not exist", c.path.display());
        }
        Ok(Some(Arc::new(store)))
    }

    /// Writes recorded entries back unless the cache is read-only.
    pub fn save_cache(&self, store: Option<&ReplayCache>) -> Result<()> {
        if let (Some(c), Some(store)) = (&self.cache, store) {
            if c.mode != CacheMode::Strict {
                store
                    .export(&c.path)
                    .with_context(|| format!("cannot write cache {}", c.path.display()))?;
            }
        }
        Ok(())
    }

    pub fn perception(&self) -> Arc<dyn PerceptionBackend> {
        match &self.critic {
            CriticConfig::Lm {
                perception:
                    PerceptionConfig::Http {
                        endpoint,
                        timeout_secs,
                    },
                ..
            } => Arc::new(HttpPerception::new(
                endpoint,
                Duration::from_secs(*timeout_secs),
            )),
            _ => Arc::new(OraclePerception),
        }
    }
}

/// Reads a secret from the environment; secrets never come from flags or
/// config values.
fn secret(var: &str) -> Result<String> {
    std::env::var(var).with_context(|| format!("environment variable {var} is not set"))
}

/// A live backend for `lm`, or `None` for the heuristic planner, which is
/// built per world by the caller.
pub fn language_model(lm: &LmConfig) -> Result<Option<Arc<dyn LanguageModel>>> {
    Ok(match lm {
        LmConfig::Heuristic {} => None,
        LmConfig::Scripted { rules, id } => {
            let text = std::fs::read_to_string(rules)
                .with_context(|| format!("cannot read rules {}", rules.display()))?;
            let specs: Vec<RuleSpec> = serde_json::from_str(&text)
                .with_context(|| format!("invalid rules {}", rules.display()))?;
            let id = id.clone().unwrap_or_else(|| {
                rules
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "scripted".into())
            });
            Some(Arc::new(ScriptedLm::from_specs(&id, &specs)?))
        }
        LmConfig::Http {
            base_url,
            model,
            api_key_env,
            timeout_secs,
            max_retries,
        } => {
            let mut c = HttpChatConfig::new(base_url, model);
            if let Some(v) = api_key_env {
                c.api_key_env = v.clone();
            }
            if let Some(t) = timeout_secs {
                c.timeout_secs = *t;
            }
            if let Some(r) = max_retries {
                c.max_retries = *r;
            }
            Some(Arc::new(HttpChatLm::new(c)))
        }
        LmConfig::Replay { backend } => {
            let name = backend.clone();
            Some(Arc::new(FnLm::new(backend, move |_| {
                Err(LmError::Transport(format!(
                    "{name} is replay-only and has no live model"
                )))
            })))
        }
    })
}

/// A built-in world name, or a path to a world JSON file.
pub fn load_world(spec: &str, base: &Path) -> Result<WorldState> {
    if let Some(w) = world(spec) {
        return Ok(w);
    }
    let mut path = PathBuf::from(spec);
    resolve(base, &mut path);
    if !path.exists() {
        bail!("{spec:?} is neither a built-in world nor a file");
    }
    let text = std::fs::read_to_string(&path)
        .with_context(|| format!("cannot read world {}", path.display()))?;
    let w: WorldState =
        serde_json::from_str(&text).with_context(|| format!("invalid world {}", path.display()))?;
    w.check()
        .with_context(|| format!("inconsistent world {}", path.display()))?;
    Ok(w)
}
