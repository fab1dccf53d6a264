use rand::seq::SliceRandom;

use super::{Agent, AgentRanking, PickContext};
use crate::card::CardId;
use crate::error::Result;
use crate::rng::StreamRng;

/// Uniformly random ranking of the distinct cards in the pack.
#[derive(Debug, Clone)]
pub struct RandomAgent {
    seed: u64,
}

impl RandomAgent {
    pub fn new(seed: u64) -> Self {
        RandomAgent { seed }
    }
}

/// Random permutation ranks keyed by card identity, sorted by card index.
pub(crate) fn random_ranks(pack: &[CardId], rng: &mut StreamRng) -> Vec<(CardId, f64)> {
    let mut distinct = pack.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    let mut ranks: Vec<f64> = (0..distinct.len()).map(|r| r as f64).collect();
    ranks.shuffle(rng);
    distinct.into_iter().zip(ranks).collect()
}

pub(crate) fn lookup(table: &[(CardId, f64)], card: CardId) -> f64 {
    let i = table
        .binary_search_by_key(&card, |&(c, _)| c)
        .expect("card present in rank table");
    table[i].1
}

impl Agent for RandomAgent {
    fn name(&self) -> String {
        "RandomBot".into()
    }

    fn seed(&self) -> u64 {
        self.seed
    }

    fn rank(&self, ctx: &PickContext<'_>, rng: &mut StreamRng) -> Result<AgentRanking> {
        let table = random_ranks(ctx.pack, rng);
        let scores = ctx.pack.iter().map(|&c| lookup(&table, c)).collect();
        AgentRanking::from_scores(ctx.pack, scores)
    }
}
