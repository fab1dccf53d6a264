//! Expert-strength heuristic with a color bias that grows with commitment.
//!
//! `rating(c) = strength(c) + colorbias(c)`. A card's *pull* is how far its
//! strength exceeds the floor; a color's *commitment* is the summed pull of
//! collected cards of that color. Early picks (speculation) reward colors in
//! proportion to commitment; once two colors pass the commit threshold, or
//! the phase-switch pick arrives, the bot drafts strictly in its two primary
//! colors.

use std::sync::Arc;

use rand::Rng;

use super::random::{lookup, random_ranks};
use super::{Agent, AgentRanking, PickContext};
use crate::card::{Card, CardSet, Collection, NUM_COLORS};
use crate::error::Result;
use crate::rng::StreamRng;

/// How the single-color speculation bonus combines commitment with the cap.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BonusCap {
    /// `min(slope * commit, cap)`: the bonus saturates at the cap.
    Min,
    /// `max(slope * commit, cap)`: the formula as literally printed.
    LiteralMax,
}

/// Which colors count as "off" for the 2–3 color speculation bonus.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MulticolorOffColors {
    /// The card's own colors are split into on (among the two most committed
    /// colors) and off (the rest).
    CardColors,
    /// Every card color is on; every color the card lacks is off.
    OtherColors,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DraftsimParams {
    pub strength_floor: f64,
    pub commit_slope: f64,
    pub speculation_cap: f64,
    pub multicolor_penalty: f64,
    pub commit_threshold: f64,
    pub oncolor_bonus: f64,
    pub offcolor_symbol_penalty: f64,
    pub phase_switch_pick: usize,
    pub bonus_cap: BonusCap,
    pub multicolor_off: MulticolorOffColors,
}

impl Default for DraftsimParams {
    fn default() -> Self {
        DraftsimParams {
            strength_floor: 2.0,
            commit_slope: 0.257,
            speculation_cap: 0.9,
            multicolor_penalty: 0.6,
            commit_threshold: 3.5,
            oncolor_bonus: 2.0,
            offcolor_symbol_penalty: 1.0,
            phase_switch_pick: 19,
            bonus_cap: BonusCap::Min,
            multicolor_off: MulticolorOffColors::CardColors,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Speculation,
    Committed { primary: [usize; 2] },
}

#[derive(Debug, Clone)]
pub struct DraftsimAgent {
    set: Arc<CardSet>,
    params: DraftsimParams,
}

impl DraftsimAgent {
    pub fn new(set: Arc<CardSet>, params: DraftsimParams) -> Self {
        DraftsimAgent { set, params }
    }

    pub fn params(&self) -> &DraftsimParams {
        &self.params
    }

    pub fn pull(&self, card: &Card) -> f64 {
        (card.strength - self.params.strength_floor).max(0.0)
    }

    pub fn color_commit(&self, collection: &Collection) -> [f64; NUM_COLORS] {
        let mut commit = [0.0; NUM_COLORS];
        for (id, n) in collection.iter() {
            let card = self.set.card(id);
            let pull = self.pull(card) * n as f64;
            for color in card.colors.colors() {
                commit[color] += pull;
            }
        }
        commit
    }

    /// Colors ordered by descending commitment, ties in WUBRG order.
    fn by_commitment(commit: &[f64; NUM_COLORS]) -> [usize; NUM_COLORS] {
        let mut order = [0, 1, 2, 3, 4];
        order.sort_by(|&a, &b| commit[b].total_cmp(&commit[a]).then(a.cmp(&b)));
        order
    }

    pub fn phase(&self, commit: &[f64; NUM_COLORS], global_pick: usize) -> Phase {
        let committed = commit
            .iter()
            .filter(|&&c| c > self.params.commit_threshold)
            .count();
        if committed >= 2 || global_pick >= self.params.phase_switch_pick {
            let order = Self::by_commitment(commit);
            Phase::Committed {
                primary: [order[0], order[1]],
            }
        } else {
            Phase::Speculation
        }
    }

    fn single_bonus(&self, commit: f64) -> f64 {
        let scaled = self.params.commit_slope * commit;
        match self.params.bonus_cap {
            BonusCap::Min => scaled.min(self.params.speculation_cap),
            BonusCap::LiteralMax => scaled.max(self.params.speculation_cap),
        }
    }

    pub fn color_bias(&self, card: &Card, commit: &[f64; NUM_COLORS], phase: Phase) -> f64 {
        let colors = card.colors;
        match phase {
            Phase::Speculation => {
                let bonus: Vec<f64> = commit.iter().map(|&c| self.single_bonus(c)).collect();
                match colors.num_colors() {
                    0 => bonus.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                    1 => bonus[colors.colors().next().unwrap()],
                    2 | 3 => {
                        let (on, off): (Vec<usize>, Vec<usize>) = match self.params.multicolor_off {
                            MulticolorOffColors::CardColors => {
                                let order = Self::by_commitment(commit);
                                let top: Vec<usize> =
                                    order[..2].iter().copied().filter(|&c| commit[c] > 0.0).collect();
                                colors.colors().partition(|c| top.contains(c))
                            }
                            MulticolorOffColors::OtherColors => {
                                (0..NUM_COLORS).partition(|&c| colors.has(c))
                            }
                        };
                        on.iter().map(|&c| bonus[c]).sum::<f64>()
                            - off.iter().map(|&c| bonus[c]).sum::<f64>()
                            - self.params.multicolor_penalty
                    }
                    _ => 0.0,
                }
            }
            Phase::Committed { primary } => {
                let off_symbols: u32 = (0..NUM_COLORS)
                    .filter(|c| !primary.contains(c))
                    .map(|c| colors.get(c) as u32)
                    .sum();
                if off_symbols == 0 {
                    self.params.oncolor_bonus
                } else {
                    -self.params.offcolor_symbol_penalty * (off_symbols - 1) as f64
                }
            }
        }
    }

    pub fn rating(&self, card: &Card, commit: &[f64; NUM_COLORS], phase: Phase) -> f64 {
        card.strength + self.color_bias(card, commit, phase)
    }

    pub fn scores(&self, ctx: &PickContext<'_>) -> Vec<f64> {
        let commit = self.color_commit(ctx.collection);
        let phase = self.phase(&commit, ctx.global_pick);
        ctx.pack
            .iter()
            .map(|&id| self.rating(self.set.card(id), &commit, phase))
            .collect()
    }
}

impl Agent for DraftsimAgent {
    fn name(&self) -> String {
        "DraftsimBot".into()
    }

    fn rank(&self, ctx: &PickContext<'_>, _rng: &mut StreamRng) -> Result<AgentRanking> {
        AgentRanking::from_scores(ctx.pack, self.scores(ctx))
    }
}

/// DraftsimBot that picks uniformly at random with probability `noise`.
/// Used to generate human-like synthetic corpora.
#[derive(Debug, Clone)]
pub struct NoisyDraftsimAgent {
    inner: DraftsimAgent,
    noise: f64,
    seed: u64,
}

impl NoisyDraftsimAgent {
    pub fn new(inner: DraftsimAgent, noise: f64, seed: u64) -> Self {
        NoisyDraftsimAgent { inner, noise, seed }
    }
}

impl Agent for NoisyDraftsimAgent {
    fn name(&self) -> String {
        format!("NoisyDraftsimBot({})", self.noise)
    }

    fn seed(&self) -> u64 {
        self.seed
    }

    fn rank(&self, ctx: &PickContext<'_>, rng: &mut StreamRng) -> Result<AgentRanking> {
        if rng.random_bool(self.noise) {
            let table = random_ranks(ctx.pack, rng);
            let scores = ctx.pack.iter().map(|&c| lookup(&table, c)).collect();
            AgentRanking::from_scores(ctx.pack, scores)
        } else {
            AgentRanking::from_scores(ctx.pack, self.inner.scores(ctx))
        }
    }
}
