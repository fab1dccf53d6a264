//! Top-one accuracy of an agent against recorded picks, broken down by pick
//! number and by the strength of the card that was actually taken, plus
//! draft-level bootstrap comparisons between agents.

use std::collections::BTreeMap;
use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agents::{Agent, PickContext};
use crate::card::CardSet;
use crate::dataset::DraftLog;
use crate::engine::TOTAL_PICKS;
use crate::error::{Error, Result};
use crate::rng;

pub const STRENGTH_BIN_WIDTH: f64 = 0.5;
pub const STRENGTH_BINS: usize = 10;

/// Bin `[k/2, (k+1)/2)`; the last bin is closed so 5.0 lands in it.
pub fn strength_bin(strength: f64) -> usize {
    ((strength / STRENGTH_BIN_WIDTH).floor().max(0.0) as usize).min(STRENGTH_BINS - 1)
}

/// Card indices in each strength bin.
pub fn strength_bins(set: &CardSet) -> Vec<Vec<usize>> {
    let mut bins = vec![Vec::new(); STRENGTH_BINS];
    for c in set.cards() {
        bins[strength_bin(c.strength)].push(c.index);
    }
    bins
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub correct: u64,
    pub total: u64,
}

impl Tally {
    pub fn accuracy(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.correct as f64 / self.total as f64
        }
    }

    fn add(&mut self, other: &Tally) {
        self.correct += other.correct;
        self.total += other.total;
    }

    fn record(&mut self, hit: bool) {
        self.correct += hit as u64;
        self.total += 1;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PickAccuracy {
    pub pick: usize,
    pub correct: u64,
    pub total: u64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinAccuracy {
    pub lower: f64,
    pub upper: f64,
    pub correct: u64,
    pub total: u64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DraftScore {
    pub draft_id: String,
    pub correct: u64,
    pub total: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub agent: String,
    pub set_code: String,
    /// Hash of the evaluated (draft, seat, picks) sequence.
    pub corpus: String,
    pub n_events: u64,
    pub n_correct: u64,
    pub overall_accuracy: f64,
    /// Mean of per-draft accuracies.
    pub draft_mean_accuracy: f64,
    pub per_pick: Vec<PickAccuracy>,
    pub per_strength_bin: Vec<BinAccuracy>,
    /// Sorted by draft id; seats of one draft are summed.
    pub per_draft: Vec<DraftScore>,
}

struct LogTally {
    per_pick: Vec<Tally>,
    per_bin: Vec<Tally>,
}

impl LogTally {
    fn new() -> Self {
        LogTally {
            per_pick: vec![Tally::default(); TOTAL_PICKS],
            per_bin: vec![Tally::default(); STRENGTH_BINS],
        }
    }

    fn total(&self) -> Tally {
        let mut t = Tally::default();
        self.per_pick.iter().for_each(|p| t.add(p));
        t
    }
}

/// Per-log RNG stream, independent of evaluation order.
fn log_stream(agent_seed: u64, log: &DraftLog) -> rng::StreamRng {
    rng::stream(rng::derive(
        rng::derive(agent_seed, rng::hash_str(&log.draft_id)),
        log.seat as u64,
    ))
}

fn score_log(agent: &dyn Agent, log: &DraftLog, set: &CardSet) -> Result<LogTally> {
    let mut tally = LogTally::new();
    let mut stream = log_stream(agent.seed(), log);
    log.replay(set.len(), |view| {
        let ctx = PickContext {
            pack: &view.event.pack,
            collection: view.collection,
            global_pick: view.event.global_pick as usize,
        };
        let ranking = agent.rank(&ctx, &mut stream)?;
        let hit = ranking.chosen == view.event.picked;
        let pick = view.event.global_pick as usize;
        if !(1..=TOTAL_PICKS).contains(&pick) {
            return Err(Error::Validation {
                draft_id: log.draft_id.clone(),
                pick,
                message: "global pick out of range".into(),
            });
        }
        tally.per_pick[pick - 1].record(hit);
        tally.per_bin[strength_bin(set.card(view.event.picked).strength)].record(hit);
        Ok(())
    })?;
    Ok(tally)
}

pub fn corpus_fingerprint(logs: &[&DraftLog]) -> String {
    let mut h = rng::hash_str("corpus");
    for log in logs {
        h = rng::derive(h, rng::hash_str(&log.draft_id));
        h = rng::derive(h, log.seat as u64);
        for e in &log.events {
            h = rng::derive(h, e.picked as u64);
        }
    }
    format!("{h:016x}")
}

/// Scores `agent` on every pick event of `logs` (only human seats when
/// `human_only`). Logs are processed in parallel; the result is identical
/// for any thread count.
pub fn evaluate(agent: &dyn Agent, logs: &[DraftLog], set: &CardSet, human_only: bool) -> Result<EvalReport> {
    if let Some(code) = agent.set_code() {
        if code != set.code {
            return Err(Error::SetMismatch {
                expected: set.code.clone(),
                found: code.to_string(),
            });
        }
    }
    let selected: Vec<&DraftLog> = logs.iter().filter(|l| !human_only || l.is_human()).collect();
    if selected.is_empty() {
        return Err(Error::Empty("no logs to evaluate".into()));
    }
    if let Some(l) = selected.iter().find(|l| l.set_code != set.code) {
        return Err(Error::SetMismatch {
            expected: set.code.clone(),
            found: l.set_code.clone(),
        });
    }
    let tallies: Vec<LogTally> = selected
        .par_iter()
        .map(|log| score_log(agent, log, set))
        .collect::<Result<_>>()?;

    let mut per_pick = vec![Tally::default(); TOTAL_PICKS];
    let mut per_bin = [Tally::default(); STRENGTH_BINS];
    let mut per_draft: BTreeMap<&str, Tally> = BTreeMap::new();
    for (log, t) in selected.iter().zip(&tallies) {
        per_pick.iter_mut().zip(&t.per_pick).for_each(|(a, b)| a.add(b));
        per_bin.iter_mut().zip(&t.per_bin).for_each(|(a, b)| a.add(b));
        per_draft.entry(&log.draft_id).or_default().add(&t.total());
    }
    let mut overall = Tally::default();
    per_pick.iter().for_each(|p| overall.add(p));
    let draft_mean_accuracy =
        per_draft.values().map(Tally::accuracy).sum::<f64>() / per_draft.len() as f64;

    Ok(EvalReport {
        agent: agent.name(),
        set_code: set.code.clone(),
        corpus: corpus_fingerprint(&selected),
        n_events: overall.total,
        n_correct: overall.correct,
        overall_accuracy: overall.accuracy(),
        draft_mean_accuracy,
        per_pick: per_pick
            .iter()
            .enumerate()
            .map(|(i, t)| PickAccuracy {
                pick: i + 1,
                correct: t.correct,
                total: t.total,
                accuracy: t.accuracy(),
            })
            .collect(),
        per_strength_bin: per_bin
            .iter()
            .enumerate()
            .map(|(i, t)| BinAccuracy {
                lower: i as f64 * STRENGTH_BIN_WIDTH,
                upper: (i + 1) as f64 * STRENGTH_BIN_WIDTH,
                correct: t.correct,
                total: t.total,
                accuracy: t.accuracy(),
            })
            .collect(),
        per_draft: per_draft
            .into_iter()
            .map(|(id, t)| DraftScore {
                draft_id: id.to_string(),
                correct: t.correct,
                total: t.total,
            })
            .collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub low: f64,
    pub high: f64,
}

impl Interval {
    pub fn contains(&self, v: f64) -> bool {
        self.low <= v && v <= self.high
    }

    /// Strictly above `other`, with no overlap.
    pub fn above(&self, other: &Interval) -> bool {
        self.low > other.high
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSummary {
    pub agent: String,
    pub accuracy: f64,
    pub ci: Interval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairDifference {
    pub a: String,
    pub b: String,
    /// Accuracy of `a` minus accuracy of `b`.
    pub difference: f64,
    pub ci: Interval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub resamples: usize,
    pub seed: u64,
    pub confidence: f64,
    /// Highest accuracy first.
    pub ranked: Vec<AgentSummary>,
    pub differences: Vec<PairDifference>,
}

impl Comparison {
    pub fn summary(&self, agent: &str) -> Option<&AgentSummary> {
        self.ranked.iter().find(|s| s.agent == agent)
    }

    pub fn difference(&self, a: &str, b: &str) -> Option<PairDifference> {
        self.differences.iter().find_map(|d| {
            if d.a == a && d.b == b {
                Some(d.clone())
            } else if d.a == b && d.b == a {
                Some(PairDifference {
                    a: a.to_string(),
                    b: b.to_string(),
                    difference: -d.difference,
                    ci: Interval {
                        low: -d.ci.high,
                        high: -d.ci.low,
                    },
                })
            } else {
                None
            }
        })
    }
}

pub const DEFAULT_RESAMPLES: usize = 1000;

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn interval(mut samples: Vec<f64>) -> Interval {
    samples.sort_by(f64::total_cmp);
    Interval {
        low: percentile(&samples, 0.025),
        high: percentile(&samples, 0.975),
    }
}

/// Ranks agents and attaches 95% percentile-bootstrap intervals, resampling
/// whole drafts. Pairwise differences reuse the same resamples so they are
/// paired.
pub fn compare_agents(reports: &[EvalReport], resamples: usize, seed: u64) -> Result<Comparison> {
    if reports.len() < 2 {
        return Err(Error::Invalid("comparison needs at least two reports".into()));
    }
    if resamples == 0 {
        return Err(Error::Config("resamples must be positive".into()));
    }
    let mut names: Vec<&str> = reports.iter().map(|r| r.agent.as_str()).collect();
    names.sort_unstable();
    if names.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Invalid("report agent labels must be distinct".into()));
    }
    let base = &reports[0];
    for r in &reports[1..] {
        let same_drafts = r.per_draft.len() == base.per_draft.len()
            && r.per_draft
                .iter()
                .zip(&base.per_draft)
                .all(|(x, y)| x.draft_id == y.draft_id && x.total == y.total);
        if r.corpus != base.corpus || !same_drafts {
            return Err(Error::Invalid(format!(
                "reports for {} and {} cover different corpora",
                base.agent, r.agent
            )));
        }
    }
    let n = base.per_draft.len();
    let totals: Vec<u64> = base.per_draft.iter().map(|d| d.total).collect();
    let mut stream = rng::stream(seed);
    let mut samples = vec![Vec::with_capacity(resamples); reports.len()];
    for _ in 0..resamples {
        let idx: Vec<usize> = (0..n).map(|_| stream.random_range(0..n)).collect();
        let total: u64 = idx.iter().map(|&i| totals[i]).sum();
        for (k, r) in reports.iter().enumerate() {
            let correct: u64 = idx.iter().map(|&i| r.per_draft[i].correct).sum();
            samples[k].push(correct as f64 / total as f64);
        }
    }
    let mut differences = Vec::new();
    for a in 0..reports.len() {
        for b in a + 1..reports.len() {
            let diff: Vec<f64> = samples[a].iter().zip(&samples[b]).map(|(x, y)| x - y).collect();
            differences.push(PairDifference {
                a: reports[a].agent.clone(),
                b: reports[b].agent.clone(),
                difference: reports[a].overall_accuracy - reports[b].overall_accuracy,
                ci: interval(diff),
            });
        }
    }
    let mut ranked: Vec<AgentSummary> = reports
        .iter()
        .zip(samples)
        .map(|(r, s)| AgentSummary {
            agent: r.agent.clone(),
            accuracy: r.overall_accuracy,
            ci: interval(s),
        })
        .collect();
    ranked.sort_by(|x, y| y.accuracy.total_cmp(&x.accuracy));
    Ok(Comparison {
        resamples,
        seed,
        confidence: 0.95,
        ranked,
        differences,
    })
}

pub fn write_report_json<W: Write>(out: W, report: &EvalReport) -> Result<()> {
    serde_json::to_writer_pretty(out, report)?;
    Ok(())
}

pub fn write_per_pick_csv<W: Write>(out: W, report: &EvalReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["agent", "pick", "correct", "total", "accuracy"])?;
    for p in &report.per_pick {
        w.write_record([
            report.agent.clone(),
            p.pick.to_string(),
            p.correct.to_string(),
            p.total.to_string(),
            p.accuracy.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_strength_csv<W: Write>(out: W, report: &EvalReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["agent", "lower", "upper", "correct", "total", "accuracy"])?;
    for b in &report.per_strength_bin {
        w.write_record([
            report.agent.clone(),
            b.lower.to_string(),
            b.upper.to_string(),
            b.correct.to_string(),
            b.total.to_string(),
            b.accuracy.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_comparison_csv<W: Write>(out: W, cmp: &Comparison) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["agent", "other", "accuracy", "ci_low", "ci_high"])?;
    for s in &cmp.ranked {
        w.write_record([
            s.agent.clone(),
            String::new(),
            s.accuracy.to_string(),
            s.ci.low.to_string(),
            s.ci.high.to_string(),
        ])?;
    }
    for d in &cmp.differences {
        w.write_record([
            d.a.clone(),
            d.b.clone(),
            d.difference.to_string(),
            d.ci.low.to_string(),
            d.ci.high.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
