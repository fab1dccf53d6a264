#![allow(dead_code, clippy::needless_range_loop, clippy::type_complexity)]

use std::sync::Arc;

use draftlab_core::agents::{Agent, AgentRanking, DraftsimAgent, DraftsimParams, NoisyDraftsimAgent};
use draftlab_core::card::{Card, ColorVector, NUM_COLORS};
use draftlab_core::engine::{pack_size_at, simulate_corpus, TOTAL_PICKS};
use draftlab_core::rng::{self, StreamRng};
use draftlab_core::{CardSet, Collection, DraftLog, PickContext, PickEvent, Rarity, SeatKind};
use rand::seq::SliceRandom;
use rand::Rng;

pub const ALL_SEATS: [usize; 8] = [0, 1, 2, 3, 4, 5, 6, 7];

pub fn desk() -> Arc<CardSet> {
    Arc::new(CardSet::desk())
}

/// Ten cards, two per color, named `T0`..`T9`.
pub fn toy_set() -> CardSet {
    let cards = (0..10)
        .map(|i| {
            let mut colors = [0u8; NUM_COLORS];
            colors[i % NUM_COLORS] = 1;
            Card {
                index: i,
                name: format!("T{i}"),
                rarity: if i < 7 { Rarity::Common } else { Rarity::Uncommon },
                colors: ColorVector::new(colors[0], colors[1], colors[2], colors[3], colors[4]),
                strength: 1.0 + 0.3 * i as f64,
            }
        })
        .collect();
    CardSet::new("TOY", cards).unwrap()
}

/// Seat logs with packs drawn with replacement from the set and uniformly
/// random picks; follows the 45-pick size schedule.
pub fn random_logs(set: &CardSet, drafts: usize, seed: u64) -> Vec<DraftLog> {
    let mut stream = rng::stream(seed);
    let mut logs = Vec::new();
    for d in 0..drafts {
        for seat in 0..8u8 {
            let events = (1..=TOTAL_PICKS)
                .map(|p| {
                    let pack: Vec<usize> = (0..pack_size_at(p))
                        .map(|_| stream.random_range(0..set.len()))
                        .collect();
                    let picked = pack[stream.random_range(0..pack.len())];
                    PickEvent {
                        global_pick: p as u8,
                        pack,
                        picked,
                    }
                })
                .collect();
            logs.push(DraftLog {
                draft_id: format!("toy-{d}"),
                seat,
                set_code: set.code.clone(),
                seat_kind: SeatKind::Human,
                events,
            });
        }
    }
    logs
}

pub fn noisy_draftsim_corpus(set: &Arc<CardSet>, drafts: usize, noise: f64, seed: u64) -> Vec<DraftLog> {
    let agents: Vec<Arc<dyn Agent>> = (0..8)
        .map(|k| {
            Arc::new(NoisyDraftsimAgent::new(
                DraftsimAgent::new(Arc::clone(set), DraftsimParams::default()),
                noise,
                rng::derive(seed, k),
            )) as Arc<dyn Agent>
        })
        .collect();
    simulate_corpus(set, &agents, drafts, seed, &ALL_SEATS).unwrap()
}

/// Deterministic collection-dependent picker. Within the commonest rarity
/// present in the pack, cards of the collection's dominant color come first;
/// remaining ties follow a fixed random priority.
pub struct RuleAgent {
    set: Arc<CardSet>,
    /// Lower is better.
    priority: Vec<usize>,
}

impl RuleAgent {
    pub fn new(set: Arc<CardSet>, seed: u64) -> Self {
        let mut order: Vec<usize> = (0..set.len()).collect();
        order.shuffle(&mut rng::stream(seed));
        let mut priority = vec![0; set.len()];
        for (rank, &card) in order.iter().enumerate() {
            priority[card] = rank;
        }
        RuleAgent { set, priority }
    }

    pub fn dominant(&self, collection: &Collection) -> Option<usize> {
        let mut counts = [0u32; NUM_COLORS];
        for (card, n) in collection.iter() {
            for c in self.set.card(card).colors.colors() {
                counts[c] += n;
            }
        }
        let best = (0..NUM_COLORS).max_by_key(|&i| (counts[i], std::cmp::Reverse(i)))?;
        (counts[best] > 0).then_some(best)
    }
}

fn commonness(r: Rarity) -> f64 {
    match r {
        Rarity::Basic | Rarity::Common => 3.0,
        Rarity::Uncommon => 2.0,
        Rarity::Rare => 1.0,
        Rarity::Mythic => 0.0,
    }
}

impl Agent for RuleAgent {
    fn name(&self) -> String {
        "RuleBot".into()
    }

    fn rank(&self, ctx: &PickContext<'_>, _rng: &mut StreamRng) -> draftlab_core::Result<AgentRanking> {
        let dominant = self.dominant(ctx.collection);
        let scores = ctx
            .pack
            .iter()
            .map(|&c| {
                let card = self.set.card(c);
                let on = dominant.is_some_and(|d| card.colors.has(d));
                let base = (self.set.len() - self.priority[c]) as f64;
                commonness(card.rarity) * 10_000.0 + if on { 1000.0 } else { 0.0 } + base
            })
            .collect();
        AgentRanking::from_scores(ctx.pack, scores)
    }
}

/// Seat 0 follows a [`RuleAgent`] and is the only human seat;
/// the other seats draft at random, so what seat 0 sees does not depend on
/// the rule.
pub fn rule_corpus(set: &Arc<CardSet>, drafts: usize, seed: u64) -> Vec<DraftLog> {
    use draftlab_core::agents::RandomAgent;
    let mut agents: Vec<Arc<dyn Agent>> = vec![Arc::new(RuleAgent::new(Arc::clone(set), 99))];
    for k in 1..8 {
        agents.push(Arc::new(RandomAgent::new(rng::derive(seed, k))));
    }
    simulate_corpus(set, &agents, drafts, seed, &[0]).unwrap()
}

/// Brute-force Bayes counts, straight from the definitions, as
/// `[m_pair, m_win, n_pair, n_pick]` nested `Vec<Vec<u64>>`.
pub struct BruteCounts {
    pub m_pair: Vec<Vec<u64>>,
    pub m_win: Vec<Vec<u64>>,
    pub n_pair: Vec<Vec<u64>>,
    pub n_pick: Vec<Vec<u64>>,
}

pub fn brute_counts(logs: &[DraftLog], s: usize) -> BruteCounts {
    let z = || vec![vec![0u64; s]; s];
    let mut out = BruteCounts {
        m_pair: z(),
        m_win: z(),
        n_pair: z(),
        n_pick: z(),
    };
    for log in logs {
        let mut held: Vec<usize> = Vec::new();
        for e in &log.events {
            if e.global_pick == 1 {
                for &j in &e.pack {
                    if j != e.picked {
                        out.m_pair[e.picked][j] += 1;
                        out.m_pair[j][e.picked] += 1;
                        out.m_win[e.picked][j] += 1;
                    }
                }
            }
            for &i in &e.pack {
                for &j in &held {
                    out.n_pair[i][j] += 1;
                }
            }
            for &j in &held {
                out.n_pick[e.picked][j] += 1;
            }
            held.push(e.picked);
        }
    }
    out
}

/// Per-term score of card `i`: pairwise log preferences at pick 1, else the
/// collection-weighted sum of smoothed log pick ratios.
pub fn brute_score(c: &BruteCounts, i: usize, held: &[usize], first_pick: bool) -> f64 {
    let s = c.m_pair.len();
    if first_pick {
        let mut total = 0.0;
        for j in 0..s {
            if j != i {
                total += ((c.m_win[i][j] as f64 + 1.0) / (c.m_pair[i][j] as f64 + 2.0)).ln();
            }
        }
        total
    } else {
        let mut total = 0.0;
        for &j in held {
            total += ((c.n_pick[i][j] as f64 + 1.0) / (c.n_pair[i][j] as f64 + 2.0)).ln();
        }
        total
    }
}

pub fn harmonic(n: usize) -> f64 {
    (1..=n).map(|k| 1.0 / k as f64).sum()
}

pub mod gradcheck {
    use draftlab_core::nn::{leaky_relu, leaky_relu_grad, softmax_cross_entropy, BatchNorm, Dense, Matrix, Network};
    use draftlab_core::rng;
    use rand::Rng;

    pub const STEP: f64 = 1e-6;

    pub fn rel_error(analytic: f64, numeric: f64) -> f64 {
        let scale = analytic.abs().max(numeric.abs());
        if scale < 1e-7 {
            (analytic - numeric).abs()
        } else {
            (analytic - numeric).abs() / scale
        }
    }

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix<f64> {
        let mut r = rng::stream(seed);
        Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| r.random_range(-1.5..1.5)).collect())
    }

    fn central<F: FnMut(f64) -> f64>(x0: f64, mut f: F) -> f64 {
        (f(x0 + STEP) - f(x0 - STEP)) / (2.0 * STEP)
    }

    fn weighted(y: &Matrix<f64>, w: &Matrix<f64>) -> f64 {
        y.data.iter().zip(&w.data).map(|(a, b)| a * b).sum()
    }

    /// Worst relative error of `Dense` gradients against `L = sum(y * R)`.
    pub fn dense() -> f64 {
        let mut r = rng::stream(1);
        let mut layer = Dense::<f64>::he_uniform(5, 4, &mut r);
        layer.bias = (0..4).map(|i| 0.1 * i as f64).collect();
        let x = random_matrix(6, 5, 2);
        let w = random_matrix(6, 4, 3);
        let (dw, db, dx) = layer.backward(&x, &w);
        let mut worst: f64 = 0.0;
        for k in 0..layer.weight.data.len() {
            let x0 = layer.weight.data[k];
            let n = central(x0, |v| {
                let mut l = layer.clone();
                l.weight.data[k] = v;
                weighted(&l.forward(&x), &w)
            });
            worst = worst.max(rel_error(dw.data[k], n));
        }
        for k in 0..layer.bias.len() {
            let n = central(layer.bias[k], |v| {
                let mut l = layer.clone();
                l.bias[k] = v;
                weighted(&l.forward(&x), &w)
            });
            worst = worst.max(rel_error(db[k], n));
        }
        for k in 0..x.data.len() {
            let n = central(x.data[k], |v| {
                let mut xx = x.clone();
                xx.data[k] = v;
                weighted(&layer.forward(&xx), &w)
            });
            worst = worst.max(rel_error(dx.data[k], n));
        }
        worst
    }

    /// Worst relative error of training-mode batchnorm gradients.
    pub fn batchnorm() -> f64 {
        let mut bn = BatchNorm::<f64>::new(3);
        bn.scale = vec![0.7, 1.3, -0.4];
        bn.shift = vec![0.2, -0.1, 0.5];
        let x = random_matrix(7, 3, 4);
        let w = random_matrix(7, 3, 5);
        let (_, cache) = bn.forward_train(&x);
        let (dscale, dshift, dx) = bn.backward(&cache, &w);
        let loss = |bn: &BatchNorm<f64>, x: &Matrix<f64>| weighted(&bn.forward_train(x).0, &w);
        let mut worst: f64 = 0.0;
        for k in 0..3 {
            let n = central(bn.scale[k], |v| {
                let mut b = bn.clone();
                b.scale[k] = v;
                loss(&b, &x)
            });
            worst = worst.max(rel_error(dscale[k], n));
            let n = central(bn.shift[k], |v| {
                let mut b = bn.clone();
                b.shift[k] = v;
                loss(&b, &x)
            });
            worst = worst.max(rel_error(dshift[k], n));
        }
        for k in 0..x.data.len() {
            let n = central(x.data[k], |v| {
                let mut xx = x.clone();
                xx.data[k] = v;
                loss(&bn, &xx)
            });
            worst = worst.max(rel_error(dx.data[k], n));
        }
        worst
    }

    pub fn leaky() -> f64 {
        let mut worst: f64 = 0.0;
        for &x in &[-2.0, -0.3, -1e-3, 1e-3, 0.4, 3.0] {
            let n = central(x, |v| leaky_relu(v, 0.01));
            worst = worst.max(rel_error(leaky_relu_grad(x, 0.01), n));
        }
        worst
    }

    pub fn cross_entropy() -> f64 {
        let logits = random_matrix(5, 6, 6);
        let targets = [0, 3, 5, 1, 1];
        let out = softmax_cross_entropy(&logits, &targets).unwrap();
        let mut worst: f64 = 0.0;
        for k in 0..logits.data.len() {
            let n = central(logits.data[k], |v| {
                let mut l = logits.clone();
                l.data[k] = v;
                softmax_cross_entropy(&l, &targets).unwrap().loss
            });
            worst = worst.max(rel_error(out.grad.data[k], n));
        }
        worst
    }

    /// Whole network with dropout on; every forward pass reuses one dropout
    /// seed so the loss is a deterministic function of the parameters.
    pub fn network() -> f64 {
        let mut init = rng::stream(7);
        let net = Network::<f64>::new(6, 5, 4, 3, 0.01, 0.3, &mut init);
        let x = random_matrix(8, 6, 8);
        let targets = [0, 1, 2, 3, 3, 2, 1, 0];
        let loss = |n: &Network<f64>| n.loss_and_grad(&x, &targets, &mut rng::stream(9)).unwrap().0.loss;
        let (_, grads, _) = net.loss_and_grad(&x, &targets, &mut rng::stream(9)).unwrap();
        let mut worst: f64 = 0.0;
        let shapes: Vec<usize> = net.params().iter().map(|p| p.len()).collect();
        for (t, &len) in shapes.iter().enumerate() {
            for k in 0..len {
                let x0 = net.params()[t][k];
                let n = central(x0, |v| {
                    let mut nn = net.clone();
                    nn.params_mut()[t][k] = v;
                    loss(&nn)
                });
                worst = worst.max(rel_error(grads.tensors[t][k], n));
            }
        }
        worst
    }
}

/// One log per collection; each event offers only the card taken.
pub fn collection_logs(set: &CardSet, collections: &[Vec<usize>]) -> Vec<DraftLog> {
    collections
        .iter()
        .enumerate()
        .map(|(d, cards)| DraftLog {
            draft_id: format!("c{d}"),
            seat: 0,
            set_code: set.code.clone(),
            seat_kind: SeatKind::Human,
            events: cards
                .iter()
                .enumerate()
                .map(|(k, &c)| PickEvent {
                    global_pick: k as u8 + 1,
                    pack: vec![c],
                    picked: c,
                })
                .collect(),
        })
        .collect()
}

/// Collections drawn from one of two disjoint halves of the toy set.
pub fn two_cluster_collections(n: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut r = rng::stream(seed);
    (0..n)
        .map(|_| {
            let base = if r.random_bool(0.5) { 0 } else { 5 };
            let mut cards: Vec<usize> = (base..base + 5).filter(|_| r.random_bool(0.6)).collect();
            if cards.is_empty() {
                cards.push(base);
            }
            cards
        })
        .collect()
}

/// Membership frequencies recounted with plain sets: `(kept, p, p_pair, s, d)`.
pub fn brute_synergy(logs: &[DraftLog], size: usize) -> (Vec<usize>, Vec<f64>, Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<Vec<f64>>) {
    use std::collections::BTreeSet;
    let sets: Vec<BTreeSet<usize>> = logs.iter().map(|l| l.events.iter().map(|e| e.picked).collect()).collect();
    let n = sets.len() as f64;
    let kept: Vec<usize> = (0..size).filter(|c| sets.iter().any(|s| s.contains(c))).collect();
    let p: Vec<f64> = kept.iter().map(|c| sets.iter().filter(|s| s.contains(c)).count() as f64 / n).collect();
    let k = kept.len();
    let mut pp = vec![vec![0.0; k]; k];
    let mut s = vec![vec![0.0; k]; k];
    for a in 0..k {
        for b in 0..k {
            pp[a][b] = sets.iter().filter(|x| x.contains(&kept[a]) && x.contains(&kept[b])).count() as f64 / n;
            s[a][b] = pp[a][b] / (p[a] * p[b]);
        }
    }
    let max = s.iter().flatten().copied().fold(0.0, f64::max);
    let d = s.iter().map(|row| row.iter().map(|v| 1.0 - v / max).collect()).collect();
    (kept, p, pp, s, d)
}

/// Largest absolute gap between the model's Q entries and scores and the
/// brute-force values, over every event of `logs`.
pub fn bayes_max_deviation(model: &draftlab_core::agents::BayesModel, brute: &BruteCounts, logs: &[DraftLog], size: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..size {
        for j in 0..size {
            let q = ((brute.n_pick[i][j] as f64 + 1.0) / (brute.n_pair[i][j] as f64 + 2.0)).ln();
            worst = worst.max((model.q_at(i, j) - q).abs());
        }
    }
    for log in logs {
        let mut held = Vec::new();
        let mut collection = Collection::empty(size);
        for e in &log.events {
            let ctx = PickContext {
                pack: &e.pack,
                collection: &collection,
                global_pick: e.global_pick as usize,
            };
            let scores = model.scores(&ctx).unwrap();
            for (slot, &card) in e.pack.iter().enumerate() {
                let want = brute_score(brute, card, &held, e.global_pick == 1);
                worst = worst.max((scores[slot] - want).abs());
            }
            held.push(e.picked);
            collection.add(e.picked).unwrap();
        }
    }
    worst
}

/// Steps one random-pick draft to the end, checking conservation, the
/// pack-size schedule, rotation and pass direction before every step.
pub fn check_engine_draft(seed: u64) -> Result<(), String> {
    use draftlab_core::agents::RandomAgent;
    use draftlab_core::engine::{PassDirection, PACK_SIZE, SEATS};
    use draftlab_core::DraftState;

    let set = desk();
    let mut state = DraftState::new(Arc::clone(&set), seed).map_err(|e| e.to_string())?;
    let agent = RandomAgent::new(seed ^ 1);
    let mut r = rng::stream(seed);
    let ensure = |ok: bool, what: &str, p: usize| if ok { Ok(()) } else { Err(format!("seed {seed} pick {p}: {what}")) };
    loop {
        let p = state.global_pick();
        ensure(state.packs_opened() == SEATS * state.pack_number(), "packs opened", p)?;
        ensure(
            state.cards_in_packs() + state.cards_in_collections() == PACK_SIZE * state.packs_opened(),
            "conservation",
            p,
        )?;
        ensure(state.cards_in_collections() == SEATS * (p - 1), "collection total", p)?;
        ensure(p == (state.pack_number() - 1) * PACK_SIZE + state.pick_in_pack(), "pick numbering", p)?;
        let dir = PassDirection::for_pack(state.pack_number());
        ensure((dir == PassDirection::Right) == (state.pack_number() == 2), "pass direction", p)?;
        let rotations = state.pick_in_pack() - 1;
        let mut picks = Vec::with_capacity(SEATS);
        for k in 0..SEATS {
            let seat = state.seat(k);
            ensure(seat.pack.len() == pack_size_at(p), "pack size schedule", p)?;
            ensure(seat.pack.len() == 16 - state.pick_in_pack(), "pack size by pick in pack", p)?;
            let origin = match dir {
                PassDirection::Left => (k + SEATS - rotations % SEATS) % SEATS,
                PassDirection::Right => (k + rotations) % SEATS,
            };
            ensure(seat.pack_origin == origin, "rotation", p)?;
            if rotations == SEATS {
                ensure(seat.pack_origin == k, "pack back at origin after 8 passes", p)?;
            }
            let ctx = PickContext {
                pack: seat.pack.cards(),
                collection: &seat.collection,
                global_pick: p,
            };
            picks.push(agent.rank(&ctx, &mut r).map_err(|e| e.to_string())?.chosen);
        }
        state.step(&picks).map_err(|e| e.to_string())?;
        if state.is_finished() {
            break;
        }
    }
    ensure(state.cards_in_packs() == 0, "packs empty at the end", 45)?;
    ensure(
        (0..SEATS).all(|k| state.seat(k).collection.total() == TOTAL_PICKS as u32),
        "45 cards per seat",
        45,
    )
}
