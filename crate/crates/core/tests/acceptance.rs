//! Acceptance checks. Prints one PASS/FAIL/SKIP line per criterion and exits
//! nonzero if any criterion fails.

#![allow(clippy::needless_range_loop)]

mod common;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use common::gradcheck;
use draftlab_core::agents::{DraftsimAgent, DraftsimParams, RandomAgent, RaredraftAgent};
use draftlab_core::dataset::{load_logs, split_dataset};
use draftlab_core::engine::{pack_size_at, PackGenerator};
use draftlab_core::eval::{compare_agents, evaluate, EvalReport};
use draftlab_core::nn::{softmax_cross_entropy, Matrix, TrainConfig};
use draftlab_core::synergy::{cooccurrence, embed_2d, pearson_r};
use draftlab_core::training::{train_bayes, train_nnet};
use draftlab_core::{load_set, rng, Agent, CardSet, DraftLog, PackRecipe, Rarity};
use rand::Rng;

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

type Check = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn pct(v: f64) -> String {
    format!("{:.2}%", 100.0 * v)
}

fn labeled(mut r: EvalReport, label: &str) -> EvalReport {
    r.agent = label.to_string();
    r
}

/// Reports of the five agents on one held-out corpus, Bayes and NNet
/// trained on the matching training corpus.
struct AgentSuite {
    reports: Vec<EvalReport>,
    train_time: Duration,
}

fn run_suite(set: &Arc<CardSet>, train: &[DraftLog], test: &[DraftLog], config: &TrainConfig) -> Result<AgentSuite, String> {
    let started = Instant::now();
    let bayes = train_bayes(train, set, true).map_err(|e| e.to_string())?;
    let nnet = train_nnet(train, set, config, None, true, |_| {}).map_err(|e| e.to_string())?.model;
    let train_time = started.elapsed();
    let agents: Vec<(&str, Box<dyn Agent>)> = vec![
        ("random", Box::new(RandomAgent::new(1))),
        ("raredraft", Box::new(RaredraftAgent::new(Arc::clone(set), 2))),
        ("draftsim", Box::new(DraftsimAgent::new(Arc::clone(set), DraftsimParams::default()))),
        ("bayes", Box::new(bayes)),
        ("nnet", Box::new(nnet)),
    ];
    let reports = agents
        .iter()
        .map(|(label, a)| evaluate(a.as_ref(), test, set, true).map(|r| labeled(r, label)))
        .collect::<draftlab_core::Result<Vec<_>>>()
        .map_err(|e| e.to_string())?;
    Ok(AgentSuite { reports, train_time })
}

fn report<'a>(reports: &'a [EvalReport], label: &str) -> &'a EvalReport {
    reports.iter().find(|r| r.agent == label).expect("report present")
}

fn random_closed_form(random: &EvalReport, drafts: usize) -> Check {
    let expected = common::harmonic(15) / 15.0;
    let got = random.overall_accuracy;
    ensure(
        (got - expected).abs() <= 0.01,
        format!("{drafts} drafts: {} vs closed form {}", pct(got), pct(expected)),
    )
}

/// Two-sided binomial bound, simultaneous at 99% over the 42 unforced picks.
const PER_PICK_Z: f64 = 3.49;

fn forced_picks(suite: &[EvalReport], random: &EvalReport) -> Check {
    for r in suite.iter().chain(std::iter::once(random)) {
        for pick in [15, 30, 45] {
            let p = &r.per_pick[pick - 1];
            if p.correct != p.total || p.total == 0 {
                return Err(format!("{} scores {} at forced pick {pick}", r.agent, pct(p.accuracy)));
            }
        }
    }
    let mut worst_z: f64 = 0.0;
    for p in &random.per_pick {
        let size = pack_size_at(p.pick) as f64;
        let expected = 1.0 / size;
        if size == 1.0 {
            continue;
        }
        let sd = (expected * (1.0 - expected) / p.total as f64).sqrt();
        let z = (p.accuracy - expected).abs() / sd;
        worst_z = worst_z.max(z);
        if z > PER_PICK_Z {
            return Err(format!(
                "random pick {}: {} vs {} (z = {z:.2})",
                p.pick,
                pct(p.accuracy),
                pct(expected)
            ));
        }
    }
    ensure(
        true,
        format!(
            "picks 15/30/45 at 100% for {} agents; random per-pick max |z| = {worst_z:.2} (bound {PER_PICK_Z})",
            suite.len()
        ),
    )
}

fn pack_composition(set: &CardSet) -> Check {
    let gen = PackGenerator::new(set, PackRecipe::default()).map_err(|e| e.to_string())?;
    let mut r = rng::stream(2024);
    let packs = 10_000;
    let mut mythic = 0usize;
    for n in 0..packs {
        let pack = gen.generate(&mut r);
        let count = |rarity: Rarity| pack.cards().iter().filter(|&&c| set.card(c).rarity == rarity).count();
        let (c, u, ra, m) = (
            count(Rarity::Common),
            count(Rarity::Uncommon),
            count(Rarity::Rare),
            count(Rarity::Mythic),
        );
        if pack.len() != 15 || c != 11 || u != 3 || ra + m != 1 {
            return Err(format!("pack {n} has {c}/{u}/{} of {}", ra + m, pack.len()));
        }
        let mut ids = pack.cards().to_vec();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() != 15 {
            return Err(format!("pack {n} repeats a card"));
        }
        mythic += m;
    }
    let frac = mythic as f64 / packs as f64;
    ensure(
        (frac - 0.125).abs() <= 0.01,
        format!("{packs} packs all 11/3/1; mythic rare-slot fraction {frac:.4}"),
    )
}

fn bayes_oracle() -> Check {
    let set = common::toy_set();
    let logs = common::random_logs(&set, 50, 3);
    let model = train_bayes(&logs, &set, true).map_err(|e| e.to_string())?;
    let brute = common::brute_counts(&logs, set.len());
    let worst = common::bayes_max_deviation(&model, &brute, &logs, set.len());
    let events: usize = logs.iter().map(|l| l.events.len()).sum();
    ensure(worst <= 1e-9, format!("{events} pick events, max deviation {worst:.2e}"))
}

fn gradient_check() -> Check {
    let checks = [
        ("dense", gradcheck::dense()),
        ("batchnorm", gradcheck::batchnorm()),
        ("leaky relu", gradcheck::leaky()),
        ("cross-entropy", gradcheck::cross_entropy()),
        ("network", gradcheck::network()),
    ];
    let worst = checks.iter().map(|c| c.1).fold(0.0, f64::max);
    let mut uniform_gap: f64 = 0.0;
    for s in [40usize, 265] {
        let out = softmax_cross_entropy(&Matrix::<f32>::zeros(4, s), &[0, 1, 2, s - 1]).map_err(|e| e.to_string())?;
        uniform_gap = uniform_gap.max((out.loss - (s as f64).ln()).abs());
    }
    let detail = checks
        .iter()
        .map(|(n, e)| format!("{n} {e:.1e}"))
        .collect::<Vec<_>>()
        .join(", ");
    ensure(
        worst <= 1e-4 && uniform_gap <= 1e-6,
        format!("max rel error {worst:.1e} ({detail}); uniform-logit loss gap {uniform_gap:.1e}"),
    )
}

fn learnable_rule(set: &Arc<CardSet>) -> Check {
    let started = Instant::now();
    let logs = common::rule_corpus(set, 3000, 31);
    let (train, test) = split_dataset(logs, 0.8, 5).map_err(|e| e.to_string())?;
    let config = TrainConfig {
        epochs: 20,
        ..TrainConfig::default()
    };
    let suite = run_suite(set, &train, &test, &config)?;
    let elapsed = started.elapsed();
    let (nnet, bayes, rare) = (
        report(&suite.reports, "nnet").overall_accuracy,
        report(&suite.reports, "bayes").overall_accuracy,
        report(&suite.reports, "raredraft").overall_accuracy,
    );
    ensure(
        nnet >= 0.95 && bayes >= 0.80 && nnet > rare && bayes > rare && elapsed < Duration::from_secs(300),
        format!(
            "nnet {} (20 epochs), bayes {}, raredraft {}; {:.1}s total, {:.1}s training",
            pct(nnet),
            pct(bayes),
            pct(rare),
            elapsed.as_secs_f64(),
            suite.train_time.as_secs_f64()
        ),
    )
}

fn desk_ordering(reports: &[EvalReport]) -> Check {
    let cmp = compare_agents(reports, 1000, 77).map_err(|e| e.to_string())?;
    let summary = |a: &str| {
        let s = cmp.summary(a).expect("summary");
        format!("{a} {} [{}, {}]", pct(s.accuracy), pct(s.ci.low), pct(s.ci.high))
    };
    let mut failures = Vec::new();
    for (hi, lo) in [("raredraft", "random"), ("bayes", "raredraft"), ("nnet", "raredraft")] {
        let d = cmp.difference(hi, lo).expect("difference");
        if d.ci.low <= 0.0 {
            failures.push(format!("{hi} - {lo} CI [{:.4}, {:.4}] includes 0", d.ci.low, d.ci.high));
        }
        let (h, l) = (cmp.summary(hi).unwrap(), cmp.summary(lo).unwrap());
        if !h.ci.above(&l.ci) {
            failures.push(format!("{hi} CI overlaps {lo} CI"));
        }
    }
    let detail = ["random", "raredraft", "draftsim", "bayes", "nnet"]
        .iter()
        .map(|a| summary(a))
        .collect::<Vec<_>>()
        .join("; ");
    if failures.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{}; {detail}", failures.join("; ")))
    }
}

fn synergy() -> Check {
    let set = common::toy_set();
    let logs = common::collection_logs(&set, &[vec![0, 1], vec![0, 1], vec![0, 2], vec![2]]);
    let m = cooccurrence(&logs, &set, false).map_err(|e| e.to_string())?;
    let p = [0.75, 0.5, 0.5];
    let s = [[4.0 / 3.0, 4.0 / 3.0, 2.0 / 3.0], [4.0 / 3.0, 2.0, 0.0], [2.0 / 3.0, 0.0, 2.0]];
    let mut gap: f64 = 0.0;
    for i in 0..3 {
        gap = gap.max((m.p[i] - p[i]).abs());
        for j in 0..3 {
            gap = gap.max((m.s[m.at(i, j)] - s[i][j]).abs());
            gap = gap.max((m.d[m.at(i, j)] - (1.0 - s[i][j] / 2.0)).abs());
        }
    }
    if m.cards != [0, 1, 2] || gap > 1e-12 {
        return Err(format!("hand-counted corpus off by {gap:.1e}"));
    }

    let mut r = rng::stream(8);
    let n = 15;
    let pts: Vec<[f64; 2]> = (0..n).map(|_| [r.random_range(0.0..10.0), r.random_range(0.0..10.0)]).collect();
    let dist = |a: [f64; 2], b: [f64; 2]| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
    let d: Vec<f64> = (0..n).flat_map(|i| pts.iter().map(move |&q| (i, q))).map(|(i, q)| dist(pts[i], q)).collect();
    let e = embed_2d(&d, n, 1, 5000).map_err(|e| e.to_string())?;
    if e.r < 0.999 {
        return Err(format!("planar distances embed with r = {:.5}", e.r));
    }

    let mut worst: f64 = 0.0;
    for trial in 0..200 {
        let coords: Vec<[f64; 2]> = (0..n).map(|_| [r.random_range(-5.0..5.0), r.random_range(-5.0..5.0)]).collect();
        let angle: f64 = r.random_range(0.0..std::f64::consts::TAU);
        let (c, sn) = (angle.cos(), angle.sin());
        let (tx, ty): (f64, f64) = (r.random_range(-100.0..100.0), r.random_range(-100.0..100.0));
        let flip = trial % 2 == 0;
        let moved: Vec<[f64; 2]> = coords
            .iter()
            .map(|&[x, y]| {
                let y = if flip { -y } else { y };
                [c * x - sn * y + tx, sn * x + c * y + ty]
            })
            .collect();
        worst = worst.max((pearson_r(&d, &coords) - pearson_r(&d, &moved)).abs());
    }
    ensure(
        worst <= 1e-9,
        format!("P/S/D exact; planar r = {:.6} in {} iterations; rigid-transform gap {worst:.1e}", e.r, e.iterations),
    )
}

fn engine_conservation() -> Check {
    for seed in 0..100u64 {
        common::check_engine_draft(rng::derive(0xD2AF7, seed))?;
    }
    Ok("100 seeded drafts: conservation, pack sizes, rotation and pack-2 reversal hold".into())
}

fn find_logs(dir: &Path, stem: &str) -> Option<PathBuf> {
    [format!("{stem}.jsonl"), format!("{stem}.jsonl.gz")]
        .iter()
        .map(|f| dir.join(f))
        .find(|p| p.exists())
}

/// Values published for the real M19 corpus, in percent.
const TABLE2: [(&str, f64); 5] = [
    ("random", 22.15),
    ("raredraft", 30.53),
    ("draftsim", 44.54),
    ("bayes", 43.35),
    ("nnet", 48.67),
];

fn m19_reproduction() -> Outcome {
    let Some(dir) = std::env::var_os("DRAFTLAB_M19_DIR").map(PathBuf::from) else {
        return Outcome::Skip("set DRAFTLAB_M19_DIR to a directory holding set.json, train.jsonl and test.jsonl".into());
    };
    let run = || -> Check {
        let set = Arc::new(load_set(dir.join("set.json")).map_err(|e| e.to_string())?);
        let train_path = find_logs(&dir, "train").ok_or("train.jsonl missing")?;
        let test_path = find_logs(&dir, "test").ok_or("test.jsonl missing")?;
        let train = load_logs(train_path, &set).map_err(|e| e.to_string())?.logs;
        let test = load_logs(test_path, &set).map_err(|e| e.to_string())?.logs;
        let suite = run_suite(&set, &train, &test, &TrainConfig::default())?;
        let mut ok = true;
        let mut parts = Vec::new();
        for (agent, target) in TABLE2 {
            let got = 100.0 * report(&suite.reports, agent).overall_accuracy;
            ok &= (got - target).abs() <= 3.0;
            parts.push(format!("{agent} {got:.2}% (target {target:.2}%)"));
        }
        ensure(ok, parts.join("; "))
    };
    match run() {
        Ok(d) => Outcome::Pass(d),
        Err(d) => Outcome::Fail(d),
    }
}

fn main() -> ExitCode {
    let set = common::desk();
    let mut results: Vec<(&str, Outcome)> = Vec::new();
    let from = |c: Check| match c {
        Ok(d) => Outcome::Pass(d),
        Err(d) => Outcome::Fail(d),
    };

    let random_drafts = 1000;
    let random_corpus = common::noisy_draftsim_corpus(&set, random_drafts, 0.3, 101);
    let random = evaluate(&RandomAgent::new(9), &random_corpus, &set, true).map(|r| labeled(r, "random"));
    drop(random_corpus);

    let desk = common::noisy_draftsim_corpus(&set, 500, 0.3, 202);
    let suite = split_dataset(desk, 0.8, 3)
        .map_err(|e| e.to_string())
        .and_then(|(train, test)| run_suite(&set, &train, &test, &TrainConfig::default()));

    results.push((
        "random-agent closed form",
        from(random.as_ref().map_err(|e| e.to_string()).and_then(|r| random_closed_form(r, random_drafts))),
    ));
    results.push((
        "forced picks and random per-pick curve",
        from(match (&suite, &random) {
            (Ok(s), Ok(r)) => forced_picks(&s.reports, r),
            (Err(e), _) => Err(e.clone()),
            (_, Err(e)) => Err(e.to_string()),
        }),
    ));
    results.push(("pack composition", from(pack_composition(&set))));
    results.push(("bayes oracle equivalence", from(bayes_oracle())));
    results.push(("nnet gradient check", from(gradient_check())));
    results.push(("learnable-rule recovery", from(learnable_rule(&set))));
    results.push((
        "desk-scale ordering",
        from(suite.as_ref().map_err(|e| e.clone()).and_then(|s| desk_ordering(&s.reports))),
    ));
    results.push(("synergy", from(synergy())));
    results.push(("engine conservation", from(engine_conservation())));
    results.push(("m19 table reproduction", m19_reproduction()));

    let mut failed = 0;
    for (name, outcome) in &results {
        match outcome {
            Outcome::Pass(d) => println!("PASS  {name}: {d}"),
            Outcome::Fail(d) => {
                failed += 1;
                println!("FAIL  {name}: {d}");
            }
            Outcome::Skip(d) => println!("SKIP  {name}: {d}"),
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
