//! Booster generation and the 8-seat draft state machine.
//!
//! Each seat opens a 15-card pack, picks one card and passes the rest to a
//! neighbour. Packs 1 and 3 travel left (seat `k` to seat `k + 1`), pack 2
//! travels right. After three packs every seat holds 45 cards.

use std::sync::Arc;

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;

use crate::agents::{Agent, PickContext};
use crate::card::{CardId, CardSet, Collection, Pack, Rarity};
use crate::dataset::{DraftLog, PickEvent, SeatKind};
use crate::error::{Error, Result};
use crate::rng::{self, StreamRng};

pub const SEATS: usize = 8;
pub const PACK_SIZE: usize = 15;
pub const PACKS_PER_DRAFT: usize = 3;
pub const TOTAL_PICKS: usize = PACK_SIZE * PACKS_PER_DRAFT;

/// Pack size presented at a 1-based global pick.
pub fn pack_size_at(global_pick: usize) -> usize {
    PACK_SIZE + 1 - ((global_pick - 1) % PACK_SIZE + 1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PackRecipe {
    pub commons: usize,
    pub uncommons: usize,
    pub rare_slots: usize,
    pub mythic_probability: f64,
    /// Lets basic lands fill common slots.
    pub include_basics: bool,
}

impl Default for PackRecipe {
    fn default() -> Self {
        PackRecipe {
            commons: 11,
            uncommons: 3,
            rare_slots: 1,
            mythic_probability: 1.0 / 8.0,
            include_basics: false,
        }
    }
}

impl PackRecipe {
    pub fn size(&self) -> usize {
        self.commons + self.uncommons + self.rare_slots
    }
}

/// Card pools per rarity, resolved once per set.
#[derive(Debug, Clone)]
pub struct PackGenerator {
    recipe: PackRecipe,
    commons: Vec<CardId>,
    uncommons: Vec<CardId>,
    rares: Vec<CardId>,
    mythics: Vec<CardId>,
}

impl PackGenerator {
    pub fn new(set: &CardSet, recipe: PackRecipe) -> Result<Self> {
        if recipe.size() != PACK_SIZE {
            return Err(Error::Config(format!(
                "pack recipe has {} slots, expected {PACK_SIZE}",
                recipe.size()
            )));
        }
        let mut commons = set.ids_of_rarity(Rarity::Common);
        if recipe.include_basics {
            commons.extend(set.ids_of_rarity(Rarity::Basic));
        }
        let gen = PackGenerator {
            commons,
            uncommons: set.ids_of_rarity(Rarity::Uncommon),
            rares: set.ids_of_rarity(Rarity::Rare),
            mythics: set.ids_of_rarity(Rarity::Mythic),
            recipe,
        };
        let need = |pool: &[CardId], n: usize, name: &str| {
            if pool.len() < n {
                Err(Error::Config(format!(
                    "set {} has {} {name} cards, packs need {n}",
                    set.code,
                    pool.len()
                )))
            } else {
                Ok(())
            }
        };
        need(&gen.commons, gen.recipe.commons, "common")?;
        need(&gen.uncommons, gen.recipe.uncommons, "uncommon")?;
        need(&gen.rares, gen.recipe.rare_slots, "rare")?;
        need(&gen.mythics, gen.recipe.rare_slots, "mythic")?;
        Ok(gen)
    }

    pub fn recipe(&self) -> &PackRecipe {
        &self.recipe
    }

    pub fn generate<R: Rng + ?Sized>(&self, rng: &mut R) -> Pack {
        let mut cards = Vec::with_capacity(PACK_SIZE);
        let mut draw = |pool: &[CardId], n: usize, rng: &mut R| {
            cards.extend(index::sample(rng, pool.len(), n).into_iter().map(|i| pool[i]));
        };
        draw(&self.commons, self.recipe.commons, rng);
        draw(&self.uncommons, self.recipe.uncommons, rng);
        let mythic_slots = (0..self.recipe.rare_slots)
            .filter(|_| rng.random_bool(self.recipe.mythic_probability))
            .count();
        draw(&self.rares, self.recipe.rare_slots - mythic_slots, rng);
        draw(&self.mythics, mythic_slots, rng);
        Pack(cards)
    }
}

/// One booster drawn under `recipe`.
pub fn generate_pack<R: Rng + ?Sized>(set: &CardSet, recipe: &PackRecipe, rng: &mut R) -> Result<Pack> {
    Ok(PackGenerator::new(set, recipe.clone())?.generate(rng))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PassDirection {
    Left,
    Right,
}

impl PassDirection {
    pub fn for_pack(pack_number: usize) -> Self {
        if pack_number.is_multiple_of(2) {
            PassDirection::Right
        } else {
            PassDirection::Left
        }
    }

    /// Seat receiving the pack currently held by `seat`.
    pub fn target(self, seat: usize) -> usize {
        match self {
            PassDirection::Left => (seat + 1) % SEATS,
            PassDirection::Right => (seat + SEATS - 1) % SEATS,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeatState {
    pub collection: Collection,
    pub pack: Pack,
    /// Seat that opened the pack currently held here.
    pub pack_origin: usize,
}

#[derive(Debug, Clone)]
pub struct DraftState {
    set: Arc<CardSet>,
    generator: PackGenerator,
    seats: Vec<SeatState>,
    pack_number: usize,
    pick_in_pack: usize,
    finished: bool,
    seed: u64,
    rng: StreamRng,
}

impl DraftState {
    pub fn new(set: Arc<CardSet>, seed: u64) -> Result<Self> {
        Self::with_recipe(set, seed, PackRecipe::default())
    }

    pub fn with_recipe(set: Arc<CardSet>, seed: u64, recipe: PackRecipe) -> Result<Self> {
        let generator = PackGenerator::new(&set, recipe)?;
        let mut rng = rng::stream(seed);
        let seats = (0..SEATS)
            .map(|k| SeatState {
                collection: Collection::empty(set.len()),
                pack: generator.generate(&mut rng),
                pack_origin: k,
            })
            .collect();
        Ok(DraftState {
            set,
            generator,
            seats,
            pack_number: 1,
            pick_in_pack: 1,
            finished: false,
            seed,
            rng,
        })
    }

    pub fn set(&self) -> &Arc<CardSet> {
        &self.set
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn seats(&self) -> &[SeatState] {
        &self.seats
    }

    pub fn seat(&self, k: usize) -> &SeatState {
        &self.seats[k]
    }

    pub fn pack_number(&self) -> usize {
        self.pack_number
    }

    pub fn pick_in_pack(&self) -> usize {
        self.pick_in_pack
    }

    /// 1-based pick about to be made. After the final pick this stays at 45.
    pub fn global_pick(&self) -> usize {
        (self.pack_number - 1) * PACK_SIZE + self.pick_in_pack
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    pub fn direction(&self) -> PassDirection {
        PassDirection::for_pack(self.pack_number)
    }

    /// Applies one pick per seat, then passes or opens new packs.
    ///
    /// The state is untouched when any pick is illegal.
    pub fn step(&mut self, picks: &[CardId]) -> Result<()> {
        if self.finished {
            return Err(Error::DraftFinished);
        }
        if picks.len() != SEATS {
            return Err(Error::Invalid(format!("expected {SEATS} picks, got {}", picks.len())));
        }
        for (seat, (&card, state)) in picks.iter().zip(&self.seats).enumerate() {
            if !state.pack.contains(card) {
                return Err(Error::IllegalPick { seat, card });
            }
        }
        for (state, &card) in self.seats.iter_mut().zip(picks) {
            state.pack.take(card);
            state.collection.add(card)?;
        }

        if self.pick_in_pack == PACK_SIZE {
            if self.pack_number == PACKS_PER_DRAFT {
                self.finished = true;
                return Ok(());
            }
            self.pack_number += 1;
            self.pick_in_pack = 1;
            for (k, seat) in self.seats.iter_mut().enumerate() {
                seat.pack = self.generator.generate(&mut self.rng);
                seat.pack_origin = k;
            }
        } else {
            let dir = self.direction();
            let mut incoming: Vec<Option<(Pack, usize)>> = vec![None; SEATS];
            for (k, seat) in self.seats.iter_mut().enumerate() {
                incoming[dir.target(k)] = Some((std::mem::take(&mut seat.pack), seat.pack_origin));
            }
            for (seat, slot) in self.seats.iter_mut().zip(incoming) {
                let (pack, origin) = slot.expect("rotation is a permutation");
                seat.pack = pack;
                seat.pack_origin = origin;
            }
            self.pick_in_pack += 1;
        }
        Ok(())
    }

    pub fn packs_opened(&self) -> usize {
        self.pack_number * SEATS
    }

    pub fn cards_in_packs(&self) -> usize {
        self.seats.iter().map(|s| s.pack.len()).sum()
    }

    pub fn cards_in_collections(&self) -> usize {
        self.seats.iter().map(|s| s.collection.total() as usize).sum()
    }
}

/// Fresh draft: eight opened packs, empty collections.
pub fn new_draft(set: Arc<CardSet>, seed: u64) -> Result<DraftState> {
    DraftState::new(set, seed)
}

/// Random stream used by the agent at `seat` in a draft seeded with `seed`.
pub fn seat_stream(seed: u64, seat: usize, agent_seed: u64) -> StreamRng {
    rng::stream(rng::derive(rng::derive(seed, seat as u64), agent_seed))
}

/// Runs a full draft with one agent per seat. All seats are logged as bots.
pub fn run_bot_draft(
    set: &Arc<CardSet>,
    agents: &[&dyn Agent],
    seed: u64,
    draft_id: &str,
) -> Result<Vec<DraftLog>> {
    if agents.len() != SEATS {
        return Err(Error::Invalid(format!(
            "a draft needs {SEATS} agents, got {}",
            agents.len()
        )));
    }
    let mut state = DraftState::new(Arc::clone(set), seed)?;
    let mut streams: Vec<StreamRng> = agents
        .iter()
        .enumerate()
        .map(|(k, a)| seat_stream(seed, k, a.seed()))
        .collect();
    let mut logs: Vec<DraftLog> = (0..SEATS)
        .map(|k| DraftLog {
            draft_id: draft_id.to_string(),
            seat: k as u8,
            set_code: set.code.clone(),
            seat_kind: SeatKind::Bot,
            events: Vec::with_capacity(TOTAL_PICKS),
        })
        .collect();
    while !state.is_finished() {
        let global_pick = state.global_pick();
        let mut picks = Vec::with_capacity(SEATS);
        for (k, agent) in agents.iter().enumerate() {
            let seat = state.seat(k);
            let ctx = PickContext {
                pack: seat.pack.cards(),
                collection: &seat.collection,
                global_pick,
            };
            let ranking = agent.rank(&ctx, &mut streams[k])?;
            logs[k].events.push(PickEvent {
                global_pick: global_pick as u8,
                pack: seat.pack.cards().to_vec(),
                picked: ranking.chosen,
            });
            picks.push(ranking.chosen);
        }
        state.step(&picks)?;
    }
    Ok(logs)
}

/// Simulates `drafts` independent drafts in parallel.
///
/// Draft `d` uses seed `derive(seed, d)` and id `sim-{seed}-{d}`; seats listed
/// in `human_seats` are marked human.
pub fn simulate_corpus(
    set: &Arc<CardSet>,
    agents: &[Arc<dyn Agent>],
    drafts: usize,
    seed: u64,
    human_seats: &[usize],
) -> Result<Vec<DraftLog>> {
    if drafts == 0 {
        return Err(Error::Invalid("number of drafts must be positive".into()));
    }
    let refs: Vec<&dyn Agent> = agents.iter().map(|a| a.as_ref()).collect();
    let per_draft: Vec<Vec<DraftLog>> = (0..drafts)
        .into_par_iter()
        .map(|d| {
            let mut logs = run_bot_draft(
                set,
                &refs,
                rng::derive(seed, d as u64),
                &format!("sim-{seed}-{d}"),
            )?;
            for &k in human_seats {
                logs[k].seat_kind = SeatKind::Human;
            }
            Ok(logs)
        })
        .collect::<Result<_>>()?;
    Ok(per_draft.into_iter().flatten().collect())
}
