//! Naive Bayes ranking from pick co-occurrence counts.
//!
//! First picks use pairwise preference counts: `m[i][j]` counts first-pick
//! events where `i` and `j` shared a pack with one of them taken, and
//! `m_win[i][j]` those where `i` was the one taken. Later picks use
//! pack/collection counts: `n[i][j]` counts `i` in the pack while `j` is
//! collected, `n_pick[i][j]` the subset where `i` was then picked. With
//! `Q[i][j] = ln((n_pick + 1) / (n + 2))` the score of pack card `i` is
//! `(Q · c)[i]` for collection count vector `c`.

use super::{Agent, AgentRanking, PickContext};
use crate::card::CardId;
use crate::dataset::DraftLog;
use crate::error::{Error, Result};
use crate::rng::StreamRng;

/// Square count matrices, row-major, indexed `[i * size + j]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BayesCounts {
    pub size: usize,
    pub m_pair: Vec<u64>,
    pub m_win: Vec<u64>,
    pub n_pair: Vec<u64>,
    pub n_pick: Vec<u64>,
}

impl BayesCounts {
    pub fn new(size: usize) -> Self {
        let z = vec![0; size * size];
        BayesCounts {
            size,
            m_pair: z.clone(),
            m_win: z.clone(),
            n_pair: z.clone(),
            n_pick: z,
        }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> usize {
        i * self.size + j
    }

    /// Accumulates every pick event of one (already validated) log.
    pub fn add_log(&mut self, log: &DraftLog) -> Result<()> {
        let size = self.size;
        log.replay(size, |view| {
            let e = view.event;
            let picked = e.picked;
            if e.global_pick == 1 {
                // same-identity pairs carry no preference
                for &j in e.pack.iter().filter(|&&j| j != picked) {
                    let (ij, ji) = (self.at(picked, j), self.at(j, picked));
                    self.m_pair[ij] += 1;
                    self.m_pair[ji] += 1;
                    self.m_win[ij] += 1;
                }
            }
            for &i in &e.pack {
                for (j, c) in view.collection.iter() {
                    let k = self.at(i, j);
                    self.n_pair[k] += c as u64;
                }
            }
            for (j, c) in view.collection.iter() {
                let k = self.at(picked, j);
                self.n_pick[k] += c as u64;
            }
            Ok(())
        })
    }

    pub fn merge(mut self, other: &BayesCounts) -> Result<Self> {
        if self.size != other.size {
            return Err(Error::Shape(format!(
                "cannot merge counts of size {} and {}",
                self.size, other.size
            )));
        }
        for (a, b) in [
            (&mut self.m_pair, &other.m_pair),
            (&mut self.m_win, &other.m_win),
            (&mut self.n_pair, &other.n_pair),
            (&mut self.n_pick, &other.n_pick),
        ] {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        Ok(self)
    }

    pub fn is_empty(&self) -> bool {
        self.n_pair.iter().all(|&c| c == 0) && self.m_pair.iter().all(|&c| c == 0)
    }
}

/// Additive (Beta(1,1)) smoothing of a success ratio, in log space.
#[inline]
pub(crate) fn smoothed_log_ratio(hits: u64, trials: u64) -> f64 {
    ((hits as f64 + 1.0) / (trials as f64 + 2.0)).ln()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BayesModel {
    pub set_code: String,
    pub counts: BayesCounts,
    pub first_pick_scores: Vec<f64>,
    /// Row-major `size x size` log-ratio matrix.
    pub q: Vec<f64>,
}

impl BayesModel {
    pub fn from_counts(set_code: impl Into<String>, counts: BayesCounts) -> Self {
        let s = counts.size;
        let mut q = vec![0.0; s * s];
        for (k, slot) in q.iter_mut().enumerate() {
            *slot = smoothed_log_ratio(counts.n_pick[k], counts.n_pair[k]);
        }
        let first_pick_scores = (0..s)
            .map(|i| {
                (0..s)
                    .filter(|&j| j != i)
                    .map(|j| {
                        let k = counts.at(i, j);
                        smoothed_log_ratio(counts.m_win[k], counts.m_pair[k])
                    })
                    .sum()
            })
            .collect();
        BayesModel {
            set_code: set_code.into(),
            counts,
            first_pick_scores,
            q,
        }
    }

    pub fn set_size(&self) -> usize {
        self.counts.size
    }

    pub fn q_at(&self, i: usize, j: usize) -> f64 {
        self.q[i * self.counts.size + j]
    }

    /// Smoothed pairwise preference `P(i > j)`.
    pub fn preference(&self, i: usize, j: usize) -> f64 {
        let k = self.counts.at(i, j);
        (self.counts.m_win[k] as f64 + 1.0) / (self.counts.m_pair[k] as f64 + 2.0)
    }

    /// Scores of `pack` cards under the collection vector: first-pick scores
    /// at pick 1, otherwise rows of `Q · c`.
    pub fn scores(&self, ctx: &PickContext<'_>) -> Result<Vec<f64>> {
        let s = self.set_size();
        if ctx.collection.set_size() != s {
            return Err(Error::Shape(format!(
                "collection over {} cards, model over {s}",
                ctx.collection.set_size()
            )));
        }
        if let Some(&bad) = ctx.pack.iter().find(|&&c| c >= s) {
            return Err(Error::Shape(format!("pack card {bad} outside model of {s} cards")));
        }
        if ctx.global_pick == 1 {
            return Ok(ctx.pack.iter().map(|&i| self.first_pick_scores[i]).collect());
        }
        let held: Vec<(CardId, f64)> = ctx.collection.iter().map(|(j, c)| (j, c as f64)).collect();
        Ok(ctx
            .pack
            .iter()
            .map(|&i| {
                let row = &self.q[i * s..(i + 1) * s];
                held.iter().map(|&(j, c)| row[j] * c).sum()
            })
            .collect())
    }
}

impl Agent for BayesModel {
    fn name(&self) -> String {
        "BayesBot".into()
    }

    fn set_code(&self) -> Option<&str> {
        Some(&self.set_code)
    }

    fn rank(&self, ctx: &PickContext<'_>, _rng: &mut StreamRng) -> Result<AgentRanking> {
        AgentRanking::from_scores(ctx.pack, self.scores(ctx)?)
    }
}
