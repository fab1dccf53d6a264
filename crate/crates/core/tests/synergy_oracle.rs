#![allow(clippy::needless_range_loop)]

mod common;

use std::sync::Arc;

use common::{brute_synergy, collection_logs, toy_set, two_cluster_collections};
use draftlab_core::agents::RandomAgent;
use draftlab_core::engine::simulate_corpus;
use draftlab_core::rng;
use draftlab_core::synergy::{cooccurrence, embed_2d, export_plot_data, pearson_r, read_plot_data};
use draftlab_core::Agent;
use proptest::prelude::*;
use rand::Rng;

#[test]
fn hand_counted_three_card_corpus() {
    let set = toy_set();
    let logs = collection_logs(&set, &[vec![0, 1], vec![0, 1], vec![0, 2], vec![2]]);
    let m = cooccurrence(&logs, &set, false).unwrap();
    assert_eq!(m.cards, vec![0, 1, 2]);
    assert_eq!(m.dropped, (3..10).collect::<Vec<_>>());
    assert_eq!(m.collections, 4);
    let close = |a: f64, b: f64| assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    close(m.p[0], 0.75);
    close(m.p[1], 0.5);
    close(m.p[2], 0.5);
    close(m.p_pair[m.at(0, 1)], 0.5);
    close(m.p_pair[m.at(0, 2)], 0.25);
    close(m.p_pair[m.at(1, 2)], 0.0);
    let s = [[4.0 / 3.0, 4.0 / 3.0, 2.0 / 3.0], [4.0 / 3.0, 2.0, 0.0], [2.0 / 3.0, 0.0, 2.0]];
    for i in 0..3 {
        for j in 0..3 {
            close(m.s[m.at(i, j)], s[i][j]);
            close(m.d[m.at(i, j)], 1.0 - s[i][j] / 2.0);
        }
    }
}

#[test]
fn matrices_match_recount() {
    let set = Arc::new(toy_set());
    let logs = common::random_logs(&set, 30, 12);
    let m = cooccurrence(&logs, &set, false).unwrap();
    let (kept, p, pp, s, d) = brute_synergy(&logs, set.len());
    assert_eq!(m.cards, kept);
    for a in 0..kept.len() {
        assert!((m.p[a] - p[a]).abs() < 1e-12);
        for b in 0..kept.len() {
            assert!((m.p_pair[m.at(a, b)] - pp[a][b]).abs() < 1e-12);
            assert!((m.p_pair[m.at(a, b)] - m.p_pair[m.at(b, a)]).abs() < 1e-15);
            assert!(m.p_pair[m.at(a, b)] <= p[a].min(p[b]) + 1e-15);
            assert!((m.s[m.at(a, b)] - s[a][b]).abs() < 1e-9);
            assert!((m.d[m.at(a, b)] - d[a][b]).abs() < 1e-12);
            assert!((0.0..=1.0).contains(&m.d[m.at(a, b)]));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn r_is_invariant_under_rigid_transforms(
        seed in any::<u64>(),
        angle in 0.0f64..std::f64::consts::TAU,
        tx in -50.0f64..50.0,
        ty in -50.0f64..50.0,
        reflect in any::<bool>(),
    ) {
        let n = 9;
        let mut r = rng::stream(seed);
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let v: f64 = r.random_range(0.0..1.0);
                d[i * n + j] = v;
                d[j * n + i] = v;
            }
        }
        let coords: Vec<[f64; 2]> = (0..n).map(|_| [r.random_range(-3.0..3.0), r.random_range(-3.0..3.0)]).collect();
        let (c, s) = (angle.cos(), angle.sin());
        let moved: Vec<[f64; 2]> = coords
            .iter()
            .map(|&[x, y]| {
                let y = if reflect { -y } else { y };
                [c * x - s * y + tx, s * x + c * y + ty]
            })
            .collect();
        let (a, b) = (pearson_r(&d, &coords), pearson_r(&d, &moved));
        prop_assert!((-1.0..=1.0).contains(&a));
        prop_assert!((a - b).abs() < 1e-9, "{a} vs {b}");
    }
}

#[test]
fn two_clusters_embed_well() {
    let set = toy_set();
    let logs = collection_logs(&set, &two_cluster_collections(400, 3));
    let m = cooccurrence(&logs, &set, false).unwrap();
    let e = embed_2d(&m.d, m.len(), 1, 5000).unwrap();
    assert!(e.r >= 0.7, "{}", e.r);
    assert!(e.coords.iter().flatten().all(|v| v.is_finite()));

    let mut buf = Vec::new();
    export_plot_data(&mut buf, &m, &e, &set).unwrap();
    let rows = read_plot_data(&buf[..]).unwrap();
    assert_eq!(rows.len(), 10);
    for (row, xy) in rows.iter().zip(&e.coords) {
        assert_eq!(row.x, xy[0]);
        assert_eq!(row.y, xy[1]);
    }
}

/// Largest |S - 1| over off-diagonal pairs of cards held by at least
/// `min_p` of the collections, for independent random drafting.
pub fn independent_synergy_deviation(drafts: usize, min_p: f64) -> (f64, usize) {
    let set = common::desk();
    let agents: Vec<Arc<dyn Agent>> = (0..8).map(|k| Arc::new(RandomAgent::new(k)) as Arc<dyn Agent>).collect();
    let logs = simulate_corpus(&set, &agents, drafts, 23, &[]).unwrap();
    let m = cooccurrence(&logs, &set, false).unwrap();
    let mut worst: f64 = 0.0;
    let mut pairs = 0;
    for a in 0..m.len() {
        for b in a + 1..m.len() {
            if m.p[a] >= min_p && m.p[b] >= min_p {
                worst = worst.max((m.s[m.at(a, b)] - 1.0).abs());
                pairs += 1;
            }
        }
    }
    (worst, pairs)
}

#[test]
fn independent_drafting_gives_unit_synergy() {
    let (worst, pairs) = independent_synergy_deviation(300, 0.2);
    assert!(pairs > 100, "{pairs}");
    assert!(worst < 0.1, "{worst}");
}
