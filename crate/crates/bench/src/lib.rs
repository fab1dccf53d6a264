//! Shared fixtures for the benchmarks.

use std::sync::Arc;

use draftlab_core::agents::{Agent, DraftsimAgent, DraftsimParams, NoisyDraftsimAgent};
use draftlab_core::engine::simulate_corpus;
use draftlab_core::{CardSet, DraftLog};

pub fn desk() -> Arc<CardSet> {
    Arc::new(CardSet::desk())
}

/// Human-marked drafts played by slightly noisy draftsim agents.
pub fn corpus(set: &Arc<CardSet>, drafts: usize, seed: u64) -> Vec<DraftLog> {
    let agent: Arc<dyn Agent> = Arc::new(NoisyDraftsimAgent::new(
        DraftsimAgent::new(Arc::clone(set), DraftsimParams::default()),
        0.1,
        seed,
    ));
    simulate_corpus(set, &vec![agent; 8], drafts, seed, &[0, 1, 2, 3, 4, 5, 6, 7])
        .expect("simulated corpus")
}
