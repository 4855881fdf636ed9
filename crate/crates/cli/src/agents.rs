//! Agent specs: `random`, `rollout:<simulations>` or a checkpoint path.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use maple_core::agent::Agent;
use maple_core::game::GameSpec;
use maple_core::nn::{checkpoint, Network};
use maple_core::search::SearchConfig;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("bad agent `{0}`: rollout needs a positive simulation count, as in rollout:200")]
    Spec(String),
    #[error("{path}: {message}")]
    Load { path: String, message: String },
}

/// Loaded networks keyed by path, shared read-only between games.
#[derive(Default)]
pub struct NetCache(Mutex<HashMap<PathBuf, Arc<Network>>>);

impl NetCache {
    pub fn get(&self, path: &Path) -> Result<Arc<Network>, AgentError> {
        if let Some(net) = self.0.lock().unwrap().get(path) {
            return Ok(Arc::clone(net));
        }
        let net = Arc::new(
            checkpoint::load(path)
                .map_err(|e| AgentError::Load { path: path.display().to_string(), message: e.to_string() })?
                .network,
        );
        self.0.lock().unwrap().insert(path.to_path_buf(), Arc::clone(&net));
        Ok(net)
    }
}

pub fn load_network(path: &Path, game: &GameSpec) -> Result<Arc<Network>, AgentError> {
    let net = NetCache::default().get(path)?;
    check(&net, path, game)?;
    Ok(net)
}

fn check(net: &Network, path: &Path, game: &GameSpec) -> Result<(), AgentError> {
    net.check_game(game).map_err(|message| AgentError::Load { path: path.display().to_string(), message })
}

/// Builds the agent named by `spec`; checkpoints play with `search`.
pub fn parse_agent(spec: &str, game: &GameSpec, search: &SearchConfig, cache: &NetCache) -> Result<Agent, AgentError> {
    if spec == "random" {
        return Ok(Agent::Random);
    }
    if let Some(n) = spec.strip_prefix("rollout:") {
        return match n.parse::<u32>() {
            Ok(simulations) if simulations > 0 => Ok(Agent::Rollout { simulations }),
            _ => Err(AgentError::Spec(spec.to_string())),
        };
    }
    if spec == "rollout" {
        return Err(AgentError::Spec(spec.to_string()));
    }
    let path = Path::new(spec);
    let net = cache.get(path)?;
    check(&net, path, game)?;
    Ok(Agent::Search { net, config: search.clone() })
}
