//! Co-draft statistics over final collections and a 2D embedding of the
//! resulting card distances.

use std::io::{Read, Write};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::card::{CardId, CardSet};
use crate::dataset::DraftLog;
use crate::error::{Error, Result};
use crate::rng;

/// Matrices over the cards that appear in at least one collection.
/// Square matrices are row-major over `cards`.
#[derive(Debug, Clone, PartialEq)]
pub struct SynergyMatrices {
    pub cards: Vec<CardId>,
    /// Cards of the set that were never drafted.
    pub dropped: Vec<CardId>,
    pub collections: usize,
    /// Fraction of collections holding at least one copy.
    pub p: Vec<f64>,
    pub p_pair: Vec<f64>,
    pub s: Vec<f64>,
    pub d: Vec<f64>,
}

impl SynergyMatrices {
    pub fn len(&self) -> usize {
        self.cards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cards.is_empty()
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> usize {
        i * self.cards.len() + j
    }

    /// Position of a set card in the matrices, if it was kept.
    pub fn position(&self, card: CardId) -> Option<usize> {
        self.cards.binary_search(&card).ok()
    }
}

struct Counts {
    single: Vec<u64>,
    pair: Vec<u64>,
    n: usize,
}

impl Counts {
    fn new(s: usize) -> Self {
        Counts {
            single: vec![0; s],
            pair: vec![0; s * s],
            n: 0,
        }
    }

    fn merge(mut self, other: Counts) -> Counts {
        self.single.iter_mut().zip(other.single).for_each(|(a, b)| *a += b);
        self.pair.iter_mut().zip(other.pair).for_each(|(a, b)| *a += b);
        self.n += other.n;
        self
    }
}

/// Membership frequencies over the final collections of `logs`.
pub fn cooccurrence(logs: &[DraftLog], set: &CardSet, human_only: bool) -> Result<SynergyMatrices> {
    let selected: Vec<&DraftLog> = logs.iter().filter(|l| !human_only || l.is_human()).collect();
    if selected.is_empty() {
        return Err(Error::Empty("no collections to count".into()));
    }
    if let Some(l) = selected.iter().find(|l| l.set_code != set.code) {
        return Err(Error::SetMismatch {
            expected: set.code.clone(),
            found: l.set_code.clone(),
        });
    }
    let size = set.len();
    let counts = selected
        .par_iter()
        .try_fold(
            || Counts::new(size),
            |mut acc, log| {
                let present: Vec<CardId> = log.final_collection(size)?.iter().map(|(c, _)| c).collect();
                for &i in &present {
                    acc.single[i] += 1;
                    for &j in &present {
                        acc.pair[i * size + j] += 1;
                    }
                }
                acc.n += 1;
                Ok::<_, Error>(acc)
            },
        )
        .try_reduce(|| Counts::new(size), |a, b| Ok(a.merge(b)))?;

    let (cards, dropped): (Vec<CardId>, Vec<CardId>) = (0..size).partition(|&c| counts.single[c] > 0);
    if !dropped.is_empty() {
        log::warn!("{} cards never drafted; left out of the synergy matrices", dropped.len());
    }
    let n = counts.n as f64;
    let k = cards.len();
    let p: Vec<f64> = cards.iter().map(|&c| counts.single[c] as f64 / n).collect();
    let mut p_pair = vec![0.0; k * k];
    let mut s = vec![0.0; k * k];
    for (a, &ca) in cards.iter().enumerate() {
        for (b, &cb) in cards.iter().enumerate() {
            let pij = counts.pair[ca * size + cb] as f64 / n;
            p_pair[a * k + b] = pij;
            s[a * k + b] = pij / (p[a] * p[b]);
        }
    }
    let max = s.iter().copied().fold(0.0, f64::max);
    let d = s
        .iter()
        .map(|&v| if max > 0.0 { 1.0 - v / max } else { 1.0 })
        .collect();
    Ok(SynergyMatrices {
        cards,
        dropped,
        collections: counts.n,
        p,
        p_pair,
        s,
        d,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub coords: Vec<[f64; 2]>,
    /// Pearson correlation between target and embedded distances, off-diagonal pairs.
    pub r: f64,
    pub iterations: usize,
    /// `r` after every accepted step, starting with the initial value.
    pub history: Vec<f64>,
}

pub const EMBED_MAX_ITERS: usize = 5000;
pub const EMBED_TOLERANCE: f64 = 1e-6;

fn check_distances(d: &[f64], n: usize) -> Result<()> {
    if d.len() != n * n {
        return Err(Error::Shape(format!("distance matrix has {} entries, expected {}", d.len(), n * n)));
    }
    if let Some(v) = d.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("distance matrix entry {v}")));
    }
    for i in 0..n {
        for j in i + 1..n {
            if (d[i * n + j] - d[j * n + i]).abs() > 1e-12 {
                return Err(Error::Invalid(format!("distance matrix not symmetric at ({i}, {j})")));
            }
        }
    }
    Ok(())
}

fn upper_pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |i| (i + 1..n).map(move |j| (i, j)))
}

fn euclid(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Pearson correlation between `d` and the distances of `coords`, over
/// pairs `i < j`. Returns 0 when either side has no variance.
pub fn pearson_r(d: &[f64], coords: &[[f64; 2]]) -> f64 {
    let n = coords.len();
    let target: Vec<f64> = upper_pairs(n).map(|(i, j)| d[i * n + j]).collect();
    let actual: Vec<f64> = upper_pairs(n).map(|(i, j)| euclid(coords[i], coords[j])).collect();
    correlation(&target, &actual)
}

fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let m = a.len() as f64;
    if a.is_empty() {
        return 0.0;
    }
    let (ma, mb) = (a.iter().sum::<f64>() / m, b.iter().sum::<f64>() / m);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (da, db) = (x - ma, y - mb);
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if saa <= 0.0 || sbb <= 0.0 {
        0.0
    } else {
        sab / (saa * sbb).sqrt()
    }
}

fn gradient(d: &[f64], coords: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let n = coords.len();
    let pairs: Vec<(usize, usize)> = upper_pairs(n).collect();
    let m = pairs.len() as f64;
    let target: Vec<f64> = pairs.iter().map(|&(i, j)| d[i * n + j]).collect();
    let actual: Vec<f64> = pairs.iter().map(|&(i, j)| euclid(coords[i], coords[j])).collect();
    let (mt, ma) = (target.iter().sum::<f64>() / m, actual.iter().sum::<f64>() / m);
    let a: Vec<f64> = target.iter().map(|v| v - mt).collect();
    let b: Vec<f64> = actual.iter().map(|v| v - ma).collect();
    let saa: f64 = a.iter().map(|v| v * v).sum();
    let sbb: f64 = b.iter().map(|v| v * v).sum();
    let mut g = vec![[0.0; 2]; n];
    if saa <= 0.0 || sbb <= 0.0 {
        return g;
    }
    let r = a.iter().zip(&b).map(|(x, y)| x * y).sum::<f64>() / (saa * sbb).sqrt();
    for (k, &(i, j)) in pairs.iter().enumerate() {
        let dr_de = a[k] / (saa * sbb).sqrt() - r * b[k] / sbb;
        let e = actual[k].max(1e-12);
        for c in 0..2 {
            let de = (coords[i][c] - coords[j][c]) / e;
            g[i][c] += dr_de * de;
            g[j][c] -= dr_de * de;
        }
    }
    g
}

/// Places `n` points in the plane so their Euclidean distances correlate
/// as strongly as possible with `d` (an `n x n` row-major matrix).
///
/// Full-gradient ascent with an adaptive step: grown after an improving
/// step, halved after a rejected one. Stops after `iters` iterations, at
/// [`EMBED_MAX_ITERS`], or once an accepted step improves `r` by less than
/// [`EMBED_TOLERANCE`].
pub fn embed_2d(d: &[f64], n: usize, seed: u64, iters: usize) -> Result<Embedding> {
    check_distances(d, n)?;
    let mut stream = rng::stream(seed);
    let mut coords: Vec<[f64; 2]> = (0..n)
        .map(|_| [stream.random_range(-1.0..1.0), stream.random_range(-1.0..1.0)])
        .collect();
    let mut r = pearson_r(d, &coords);
    let mut history = vec![r];
    let mut step = 0.1;
    let mut iterations = 0;
    while iterations < iters.min(EMBED_MAX_ITERS) {
        iterations += 1;
        let g = gradient(d, &coords);
        let norm = g.iter().map(|v| v[0] * v[0] + v[1] * v[1]).sum::<f64>().sqrt();
        if norm == 0.0 {
            break;
        }
        let candidate: Vec<[f64; 2]> = coords
            .iter()
            .zip(&g)
            .map(|(x, gv)| [x[0] + step * gv[0] / norm, x[1] + step * gv[1] / norm])
            .collect();
        let r_new = pearson_r(d, &candidate);
        if r_new > r {
            let gain = r_new - r;
            coords = candidate;
            r = r_new;
            history.push(r);
            step *= 1.2;
            if gain < EMBED_TOLERANCE {
                break;
            }
        } else {
            step *= 0.5;
            if step < 1e-12 {
                break;
            }
        }
    }
    Ok(Embedding {
        coords,
        r,
        iterations,
        history,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotRow {
    pub name: String,
    pub color_class: String,
    pub x: f64,
    pub y: f64,
}

/// One CSV row per embedded card: `name,color_class,x,y`.
pub fn export_plot_data<W: Write>(
    out: W,
    matrices: &SynergyMatrices,
    embedding: &Embedding,
    set: &CardSet,
) -> Result<()> {
    if embedding.coords.len() != matrices.len() {
        return Err(Error::Shape(format!(
            "embedding has {} points for {} cards",
            embedding.coords.len(),
            matrices.len()
        )));
    }
    let mut w = csv::Writer::from_writer(out);
    for (&card, xy) in matrices.cards.iter().zip(&embedding.coords) {
        let c = set.card(card);
        w.serialize(PlotRow {
            name: c.name.clone(),
            color_class: c.colors.class(),
            x: xy[0],
            y: xy[1],
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_plot_data<R: Read>(input: R) -> Result<Vec<PlotRow>> {
    csv::Reader::from_reader(input)
        .deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}
