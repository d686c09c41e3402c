//! Pairwise preference datasets over ranked trajectories.
//!
//! Labels come from ground-truth returns: a stored pair `(i, j)` always
//! means the first trajectory is strictly worse. Pairs with exactly equal
//! returns are never stored (the strict labeling rule is undefined for
//! them), and sampling is with replacement, so repeated pairs carry
//! multiplicity.
//!
//! Dataset file format: a JSON header line
//! `{"scheme":...,"delta_pair"|"m":...,"seed":...,"n_pairs":...}` followed
//! by one `{"i":..,"j":..,"split":"train"|"val"}` line per pair, first
//! worse than second by position.

use crate::datagen::Trajectory;
use crate::error::{Error, Result};
use crate::rng;
use rand::Rng;
use serde::Deserialize;
use std::collections::HashMap;
use std::fmt::Write as _;

pub const DEFAULT_N_PAIRS: usize = 2000;
pub const DEFAULT_DELTA_PAIR: usize = 60;
pub const DEFAULT_VAL_FRAC: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
}

/// One labeled comparison: trajectory `first` is preferred less than
/// `second` (ids into the trajectory store).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PrefPair {
    pub first: u32,
    pub second: u32,
    pub split: Split,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionScheme {
    DeltaPair { delta: usize },
    AllPairs { m: usize },
}

#[derive(Debug, Clone)]
pub struct PreferenceDataset {
    pub scheme: SelectionScheme,
    pub seed: u64,
    pub pairs: Vec<PrefPair>,
}

impl PreferenceDataset {
    pub fn split_pairs(&self, split: Split) -> impl Iterator<Item = &PrefPair> {
        self.pairs.iter().filter(move |p| p.split == split)
    }

    pub fn count(&self, split: Split) -> usize {
        self.split_pairs(split).count()
    }

    /// Checks label soundness against a trajectory store: every stored pair
    /// must have strictly increasing return.
    pub fn validate_against(&self, trajs: &[Trajectory]) -> Result<()> {
        let by_id: HashMap<u32, &Trajectory> = trajs.iter().map(|t| (t.id, t)).collect();
        for p in &self.pairs {
            let a = by_id
                .get(&p.first)
                .ok_or_else(|| Error::invalid(format!("pair references unknown id {}", p.first)))?;
            let b = by_id
                .get(&p.second)
                .ok_or_else(|| Error::invalid(format!("pair references unknown id {}", p.second)))?;
            if !(a.ret < b.ret) {
                return Err(Error::invalid(format!(
                    "pair ({}, {}) is not strictly ordered by return",
                    p.first, p.second
                )));
            }
        }
        Ok(())
    }
}

/// Indices into `trajs` in ascending ground-truth return order, ties broken
/// by trajectory id. Dense rank = position in this order.
pub fn rank(trajs: &[Trajectory]) -> Vec<usize> {
    assert!(!trajs.is_empty(), "rank needs a non-empty set");
    let mut order: Vec<usize> = (0..trajs.len()).collect();
    order.sort_by(|&a, &b| {
        trajs[a]
            .ret
            .total_cmp(&trajs[b].ret)
            .then(trajs[a].id.cmp(&trajs[b].id))
    });
    order
}

/// All unordered index pairs that `delta_pair_sample` would accept:
/// nonidentical, at least `delta` dense ranks apart, returns not tied.
/// Pairs are reported as `(lower_rank_position, higher_rank_position)` in
/// rank order.
pub fn enumerate_valid_pairs(trajs: &[Trajectory], delta: usize) -> Vec<(usize, usize)> {
    let order = rank(trajs);
    let mut out = Vec::new();
    for lo in 0..order.len() {
        for hi in (lo + 1)..order.len() {
            if hi - lo >= delta && trajs[order[lo]].ret != trajs[order[hi]].ret {
                out.push((order[lo], order[hi]));
            }
        }
    }
    out
}

/// Rejection-samples `n_pairs` comparisons with replacement. A draw is
/// accepted when the two trajectories are nonidentical, their dense ranks
/// differ by at least `delta`, and their returns differ; the worse one is
/// stored first. Split tags start as `Train`; apply [`split`] afterwards.
pub fn delta_pair_sample(
    trajs: &[Trajectory],
    delta: usize,
    n_pairs: usize,
    seed: u64,
) -> Result<PreferenceDataset> {
    if trajs.is_empty() {
        return Err(Error::invalid("empty trajectory set"));
    }
    if n_pairs == 0 {
        return Err(Error::invalid("n_pairs must be >= 1"));
    }
    if enumerate_valid_pairs(trajs, delta).is_empty() {
        return Err(Error::invalid(format!(
            "no valid pair exists with delta_pair = {delta} over {} trajectories",
            trajs.len()
        )));
    }
    let order = rank(trajs);
    let mut rank_of = vec![0usize; trajs.len()];
    for (r, &idx) in order.iter().enumerate() {
        rank_of[idx] = r;
    }

    let mut rng = rng::stream(seed, &[0xde17a]);
    let mut pairs = Vec::with_capacity(n_pairs);
    while pairs.len() < n_pairs {
        let a = rng.random_range(0..trajs.len());
        let b = rng.random_range(0..trajs.len());
        if a == b {
            continue;
        }
        let (ra, rb) = (rank_of[a], rank_of[b]);
        if ra.abs_diff(rb) < delta || trajs[a].ret == trajs[b].ret {
            continue;
        }
        let (lo, hi) = if trajs[a].ret < trajs[b].ret { (a, b) } else { (b, a) };
        pairs.push(PrefPair {
            first: trajs[lo].id,
            second: trajs[hi].id,
            split: Split::Train,
        });
    }
    Ok(PreferenceDataset {
        scheme: SelectionScheme::DeltaPair { delta },
        seed,
        pairs,
    })
}

/// Picks `m` trajectories at evenly spaced ranks (`round(k*(N-1)/(m-1))`)
/// and emits every pair among them, worse first. Tied-return pairs are
/// skipped.
pub fn all_pairs_select(trajs: &[Trajectory], m: usize, seed: u64) -> Result<PreferenceDataset> {
    if m < 2 || m > trajs.len() {
        return Err(Error::invalid(format!(
            "m must lie in [2, {}], got {m}",
            trajs.len()
        )));
    }
    let order = rank(trajs);
    let n = order.len();
    let picks: Vec<usize> = (0..m)
        .map(|k| {
            let pos = (k as f64) * ((n - 1) as f64) / ((m - 1) as f64);
            order[pos.round() as usize]
        })
        .collect();
    let mut pairs = Vec::with_capacity(m * (m - 1) / 2);
    for x in 0..m {
        for y in (x + 1)..m {
            let (a, b) = (picks[x], picks[y]);
            if trajs[a].ret == trajs[b].ret {
                continue;
            }
            let (lo, hi) = if trajs[a].ret < trajs[b].ret { (a, b) } else { (b, a) };
            pairs.push(PrefPair {
                first: trajs[lo].id,
                second: trajs[hi].id,
                split: Split::Train,
            });
        }
    }
    Ok(PreferenceDataset {
        scheme: SelectionScheme::AllPairs { m },
        seed,
        pairs,
    })
}

/// Tags `round(val_frac * n)` uniformly random pairs as validation.
pub fn split(dataset: &mut PreferenceDataset, val_frac: f64, seed: u64) -> Result<()> {
    if !(val_frac > 0.0 && val_frac < 1.0) {
        return Err(Error::invalid("val_frac must lie in (0, 1)"));
    }
    let n = dataset.pairs.len();
    let n_val = (val_frac * n as f64).round() as usize;
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = rng::stream(seed, &[0x5b117]);
    // Fisher-Yates.
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        idx.swap(i, j);
    }
    for p in &mut dataset.pairs {
        p.split = Split::Train;
    }
    for &i in idx.iter().take(n_val) {
        dataset.pairs[i].split = Split::Val;
    }
    Ok(())
}

pub fn dataset_to_string(ds: &PreferenceDataset) -> String {
    let mut out = String::new();
    match ds.scheme {
        SelectionScheme::DeltaPair { delta } => writeln!(
            out,
            "{{\"scheme\":\"delta_pair\",\"delta_pair\":{delta},\"seed\":{},\"n_pairs\":{}}}",
            ds.seed,
            ds.pairs.len()
        )
        .unwrap(),
        SelectionScheme::AllPairs { m } => writeln!(
            out,
            "{{\"scheme\":\"all_pairs\",\"m\":{m},\"seed\":{},\"n_pairs\":{}}}",
            ds.seed,
            ds.pairs.len()
        )
        .unwrap(),
    }
    for p in &ds.pairs {
        let split = match p.split {
            Split::Train => "train",
            Split::Val => "val",
        };
        writeln!(out, "{{\"i\":{},\"j\":{},\"split\":\"{split}\"}}", p.first, p.second).unwrap();
    }
    out
}

#[derive(Deserialize)]
struct HeaderLine {
    scheme: String,
    delta_pair: Option<usize>,
    m: Option<usize>,
    seed: u64,
    n_pairs: usize,
}

#[derive(Deserialize)]
struct PairLine {
    i: u32,
    j: u32,
    split: Split,
}

pub fn dataset_from_str(text: &str) -> Result<PreferenceDataset> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::parse("preference dataset", "empty file"))?;
    let h: HeaderLine = serde_json::from_str(header)
        .map_err(|e| Error::parse("preference dataset header", e.to_string()))?;
    let scheme = match h.scheme.as_str() {
        "delta_pair" => SelectionScheme::DeltaPair {
            delta: h
                .delta_pair
                .ok_or_else(|| Error::parse("preference dataset header", "missing delta_pair"))?,
        },
        "all_pairs" => SelectionScheme::AllPairs {
            m: h.m
                .ok_or_else(|| Error::parse("preference dataset header", "missing m"))?,
        },
        other => {
            return Err(Error::parse(
                "preference dataset header",
                format!("unknown scheme '{other}'"),
            ))
        }
    };
    let mut pairs = Vec::with_capacity(h.n_pairs);
    for (lineno, line) in lines.enumerate() {
        let p: PairLine = serde_json::from_str(line)
            .map_err(|e| Error::parse("preference dataset", format!("pair line {}: {e}", lineno + 1)))?;
        if p.i == p.j {
            return Err(Error::parse(
                "preference dataset",
                format!("pair line {}: identical ids", lineno + 1),
            ));
        }
        pairs.push(PrefPair {
            first: p.i,
            second: p.j,
            split: p.split,
        });
    }
    if pairs.len() != h.n_pairs {
        return Err(Error::parse(
            "preference dataset",
            format!("header says {} pairs, found {}", h.n_pairs, pairs.len()),
        ));
    }
    Ok(PreferenceDataset {
        scheme,
        seed: h.seed,
        pairs,
    })
}
