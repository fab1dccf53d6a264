//! Pick agents behind a single ranking interface.
//!
//! An agent scores every card of the current pack given the seat's
//! collection and the global pick number. The pick is the highest score;
//! exact ties go to the lowest card index, so the choice depends only on the
//! pack's contents and never on slot order.

mod bayes;
mod draftsim;
mod nnet;
mod random;
mod raredraft;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

pub use bayes::{BayesCounts, BayesModel};
pub use draftsim::{BonusCap, DraftsimAgent, DraftsimParams, MulticolorOffColors, NoisyDraftsimAgent, Phase};
pub use nnet::NNetModel;
pub use random::RandomAgent;
pub use raredraft::RaredraftAgent;

use crate::card::{CardId, CardSet, Collection};
use crate::error::{Error, Result};
use crate::rng::StreamRng;

/// What an agent sees when asked to pick.
#[derive(Debug, Clone, Copy)]
pub struct PickContext<'a> {
    pub pack: &'a [CardId],
    pub collection: &'a Collection,
    /// 1-based pick index over the whole draft (1..=45).
    pub global_pick: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentRanking {
    /// One score per pack slot, aligned with the pack.
    pub scores: Vec<f64>,
    pub chosen: CardId,
}

impl AgentRanking {
    pub fn from_scores(pack: &[CardId], scores: Vec<f64>) -> Result<Self> {
        if pack.is_empty() {
            return Err(Error::Invalid("cannot rank an empty pack".into()));
        }
        if pack.len() != scores.len() {
            return Err(Error::Shape(format!(
                "{} scores for a pack of {}",
                scores.len(),
                pack.len()
            )));
        }
        let mut best = 0;
        for i in 1..pack.len() {
            let (s, b) = (scores[i], scores[best]);
            if s > b || (s == b && pack[i] < pack[best]) || (b.is_nan() && !s.is_nan()) {
                best = i;
            }
        }
        Ok(AgentRanking {
            chosen: pack[best],
            scores,
        })
    }
}

pub trait Agent: Send + Sync {
    fn name(&self) -> String;

    /// Seed mixed into the caller-provided random stream.
    fn seed(&self) -> u64 {
        0
    }

    /// Set code of a trained model, if the agent carries one.
    fn set_code(&self) -> Option<&str> {
        None
    }

    fn rank(&self, ctx: &PickContext<'_>, rng: &mut StreamRng) -> Result<AgentRanking>;
}

/// Parsed agent specification, e.g. `random:7`, `draftsim`, `bayes:model.bin`.
#[derive(Debug, Clone, PartialEq)]
pub enum AgentSpec {
    Random { seed: u64 },
    Raredraft { seed: u64 },
    Draftsim,
    NoisyDraftsim { noise: f64, seed: u64 },
    Bayes { model: String },
    NNet { model: String },
}

impl FromStr for AgentSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let unknown = || Error::UnknownAgent(s.to_string());
        let (kind, rest) = match s.split_once(':') {
            Some((k, r)) => (k, Some(r)),
            None => (s, None),
        };
        let seed = |r: Option<&str>| -> Result<u64> {
            r.map_or(Ok(0), |v| v.parse().map_err(|_| unknown()))
        };
        let model = |r: Option<&str>| -> Result<String> {
            r.filter(|m| !m.is_empty()).map(str::to_string).ok_or_else(unknown)
        };
        Ok(match kind {
            "random" => AgentSpec::Random { seed: seed(rest)? },
            "raredraft" => AgentSpec::Raredraft { seed: seed(rest)? },
            "draftsim" if rest.is_none() => AgentSpec::Draftsim,
            "noisy-draftsim" => {
                let r = rest.ok_or_else(unknown)?;
                let (noise, s) = match r.split_once(':') {
                    Some((n, s)) => (n, Some(s)),
                    None => (r, None),
                };
                let noise: f64 = noise.parse().map_err(|_| unknown())?;
                if !(0.0..=1.0).contains(&noise) {
                    return Err(unknown());
                }
                AgentSpec::NoisyDraftsim {
                    noise,
                    seed: seed(s)?,
                }
            }
            "bayes" => AgentSpec::Bayes { model: model(rest)? },
            "nnet" => AgentSpec::NNet { model: model(rest)? },
            _ => return Err(unknown()),
        })
    }
}

impl fmt::Display for AgentSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AgentSpec::Random { seed } => write!(f, "random:{seed}"),
            AgentSpec::Raredraft { seed } => write!(f, "raredraft:{seed}"),
            AgentSpec::Draftsim => write!(f, "draftsim"),
            AgentSpec::NoisyDraftsim { noise, seed } => write!(f, "noisy-draftsim:{noise}:{seed}"),
            AgentSpec::Bayes { model } => write!(f, "bayes:{model}"),
            AgentSpec::NNet { model } => write!(f, "nnet:{model}"),
        }
    }
}

/// Builds agents from specs, resolving model references by name.
#[derive(Clone)]
pub struct AgentCatalog {
    set: Arc<CardSet>,
    bayes: HashMap<String, Arc<BayesModel>>,
    nnet: HashMap<String, Arc<NNetModel>>,
}

impl AgentCatalog {
    pub fn new(set: Arc<CardSet>) -> Self {
        AgentCatalog {
            set,
            bayes: HashMap::new(),
            nnet: HashMap::new(),
        }
    }

    pub fn set(&self) -> &Arc<CardSet> {
        &self.set
    }

    pub fn add_bayes(&mut self, name: impl Into<String>, model: Arc<BayesModel>) -> Result<()> {
        self.check_set(&model.set_code, model.set_size())?;
        self.bayes.insert(name.into(), model);
        Ok(())
    }

    pub fn add_nnet(&mut self, name: impl Into<String>, model: Arc<NNetModel>) -> Result<()> {
        self.check_set(&model.set_code, model.set_size())?;
        self.nnet.insert(name.into(), model);
        Ok(())
    }

    fn check_set(&self, code: &str, size: usize) -> Result<()> {
        if code != self.set.code || size != self.set.len() {
            return Err(Error::SetMismatch {
                expected: self.set.code.clone(),
                found: code.to_string(),
            });
        }
        Ok(())
    }

    pub fn model_names(&self) -> (Vec<String>, Vec<String>) {
        let mut b: Vec<_> = self.bayes.keys().cloned().collect();
        let mut n: Vec<_> = self.nnet.keys().cloned().collect();
        b.sort();
        n.sort();
        (b, n)
    }

    pub fn build(&self, spec: &AgentSpec) -> Result<Arc<dyn Agent>> {
        let set = Arc::clone(&self.set);
        Ok(match spec {
            AgentSpec::Random { seed } => Arc::new(RandomAgent::new(*seed)),
            AgentSpec::Raredraft { seed } => Arc::new(RaredraftAgent::new(set, *seed)),
            AgentSpec::Draftsim => Arc::new(DraftsimAgent::new(set, DraftsimParams::default())),
            AgentSpec::NoisyDraftsim { noise, seed } => Arc::new(NoisyDraftsimAgent::new(
                DraftsimAgent::new(set, DraftsimParams::default()),
                *noise,
                *seed,
            )),
            AgentSpec::Bayes { model } => self
                .bayes
                .get(model)
                .cloned()
                .map(|m| m as Arc<dyn Agent>)
                .ok_or_else(|| Error::UnknownAgent(spec.to_string()))?,
            AgentSpec::NNet { model } => self
                .nnet
                .get(model)
                .cloned()
                .map(|m| m as Arc<dyn Agent>)
                .ok_or_else(|| Error::UnknownAgent(spec.to_string()))?,
        })
    }

    pub fn build_str(&self, spec: &str) -> Result<Arc<dyn Agent>> {
        self.build(&spec.parse()?)
    }
}
