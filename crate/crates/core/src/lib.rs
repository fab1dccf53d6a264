//! Booster draft simulation, human-emulating pick agents, and the tooling to
//! train and evaluate them against recorded pick logs.
//!
//! The crate is organised bottom-up:
//!
//! * [`card`]: cards, sets, packs and collections.
//! * [`engine`]: seeded pack generation and the 8-seat draft state machine.
//! * [`dataset`]: the JSONL log format, validation, splitting and CSV import.
//! * [`agents`]: RandomBot, RaredraftBot, DraftsimBot, BayesBot and NNetBot.
//! * [`nn`]: the dense network used by NNetBot, with backprop and Adam.
//! * [`training`]: count accumulation and network training.
//! * [`model_io`]: the versioned binary model container.
//! * [`eval`]: top-one accuracy reports and bootstrap comparisons.
//! * [`synergy`]: co-draft statistics and the 2D synergy embedding.
//! * [`service`]: live drafts of one human seat against seven agents.

pub mod agents;
pub mod card;
pub mod dataset;
pub mod engine;
mod error;
pub mod eval;
pub mod model_io;
pub mod nn;
pub mod rng;
pub mod service;
pub mod synergy;
pub mod training;

pub use agents::{Agent, AgentCatalog, AgentRanking, AgentSpec, PickContext};
pub use card::{load_set, Card, CardId, CardSet, Collection, ColorVector, Pack, Rarity};
pub use dataset::{DraftLog, LogHeader, PickEvent, SeatKind};
pub use engine::{DraftState, PackRecipe};
pub use error::{Error, Result};
