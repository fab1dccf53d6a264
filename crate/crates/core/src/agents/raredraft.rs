use std::sync::Arc;

use super::random::{lookup, random_ranks};
use super::{Agent, AgentRanking, PickContext};
use crate::card::{CardSet, Collection, NUM_COLORS};
use crate::error::Result;
use crate::rng::StreamRng;

/// Takes the rarest card; among equally rare cards prefers the collection's
/// most common color, then chooses at random.
#[derive(Debug, Clone)]
pub struct RaredraftAgent {
    set: Arc<CardSet>,
    seed: u64,
}

impl RaredraftAgent {
    pub fn new(set: Arc<CardSet>, seed: u64) -> Self {
        RaredraftAgent { set, seed }
    }

    /// Most common color among collected cards (multiplicity-weighted).
    /// Ties resolve in WUBRG order; `None` when no colored card is held.
    pub fn dominant_color(&self, collection: &Collection) -> Option<usize> {
        let mut counts = [0u32; NUM_COLORS];
        for (card, n) in collection.iter() {
            for color in self.set.card(card).colors.colors() {
                counts[color] += n;
            }
        }
        let best = (0..NUM_COLORS).max_by_key(|&i| (counts[i], std::cmp::Reverse(i)))?;
        (counts[best] > 0).then_some(best)
    }
}

impl Agent for RaredraftAgent {
    fn name(&self) -> String {
        "RaredraftBot".into()
    }

    fn seed(&self) -> u64 {
        self.seed
    }

    fn rank(&self, ctx: &PickContext<'_>, rng: &mut StreamRng) -> Result<AgentRanking> {
        let color = self.dominant_color(ctx.collection);
        let jitter = random_ranks(ctx.pack, rng);
        let width = jitter.len() as f64;
        let scores = ctx
            .pack
            .iter()
            .map(|&id| {
                let card = self.set.card(id);
                let on_color = color.is_some_and(|c| card.colors.has(c));
                // rarity dominates, then color match, then a random rank in [0, 1)
                card.rarity as u8 as f64 * 4.0
                    + if on_color { 2.0 } else { 0.0 }
                    + lookup(&jitter, id) / width
            })
            .collect();
        AgentRanking::from_scores(ctx.pack, scores)
    }
}
