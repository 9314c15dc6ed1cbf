#![allow(dead_code)]

use std::path::PathBuf;

use irvtree::dist::{BucketDomain, DiscreteDist};
use irvtree::domain::{enumerate_rankings, Ranking};
use irvtree::engine::{project, ElectionModel, RoundTables};
use irvtree::tabulator::TallyMap;
use irvtree::CandidateId;
use rand::Rng;

pub fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data")
        .join(name)
}

pub fn domain(b: u64) -> BucketDomain {
    BucketDomain::new(b).unwrap()
}

/// Rankings a collapsed first-round model can carry (no empty, no full-length).
pub fn model_rankings(n: usize) -> Vec<Ranking> {
    enumerate_rankings(n, Some(n.saturating_sub(1).max(1)))
        .into_iter()
        .filter(|r| !r.is_empty())
        .collect()
}

/// Random distribution with `width` buckets starting at `offset`.
pub fn random_dist<R: Rng>(
    rng: &mut R,
    dom: BucketDomain,
    offset: usize,
    width: usize,
) -> DiscreteDist {
    let w: Vec<f64> = (0..width).map(|_| rng.gen_range(0.05..1.0)).collect();
    DiscreteDist::from_weights(dom, offset, w).unwrap()
}

pub fn random_model<R: Rng>(
    rng: &mut R,
    n: usize,
    max_offset: usize,
    max_width: usize,
) -> ElectionModel {
    let dom = domain(1);
    let cols: Vec<_> = model_rankings(n)
        .into_iter()
        .map(|r| {
            let off = rng.gen_range(0..=max_offset);
            let w = rng.gen_range(1..=max_width);
            (r, random_dist(rng, dom, off, w))
        })
        .collect();
    ElectionModel::new(n, dom, cols).unwrap()
}

/// Random three-candidate model with joint state count at most `max_states`.
pub fn bounded_model<R: Rng>(rng: &mut R, max_states: u128) -> ElectionModel {
    loop {
        let m = random_model(rng, 3, 6, 4);
        let states: u128 = m
            .iter()
            .filter(|(r, _)| !r.is_empty())
            .map(|(_, f)| f.support_size() as u128)
            .product();
        if states <= max_states {
            return m;
        }
    }
}

fn spans(t: &RoundTables) -> Vec<(usize, usize)> {
    let mut v: Vec<(usize, usize)> = t
        .remaining()
        .iter()
        .map(|c| (t.tau(c).support_start(), t.tau(c).support_end()))
        .collect();
    v.sort();
    v
}

/// True when in every reachable round the first-place supports of the
/// standing candidates occupy disjoint bucket intervals.
pub fn all_rounds_disjoint(m: &ElectionModel) -> bool {
    if m.remaining().len() < 2 {
        return true;
    }
    let t = RoundTables::new(m).unwrap();
    let s = spans(&t);
    if s.windows(2).any(|w| w[1].0 < w[0].1) {
        return false;
    }
    m.remaining()
        .iter()
        .all(|c| all_rounds_disjoint(&project(m, c).unwrap()))
}

/// Random three-candidate model whose eliminations never overlap.
pub fn disjoint_model<R: Rng>(rng: &mut R) -> ElectionModel {
    let dom = domain(1);
    loop {
        let cols: Vec<_> = model_rankings(3)
            .into_iter()
            .map(|r| {
                let base = rng.gen_range(0..12) * 40;
                let w = rng.gen_range(1..=4);
                (r, random_dist(rng, dom, base, w))
            })
            .collect();
        let m = ElectionModel::new(3, dom, cols).unwrap();
        if all_rounds_disjoint(&m) {
            return m;
        }
    }
}

/// Random ballots over `n` candidates, full-length rankings included.
pub fn random_tally<R: Rng>(rng: &mut R, n: usize, max_count: u64) -> TallyMap {
    let mut t = TallyMap::new(n);
    for r in enumerate_rankings(n, None) {
        if rng.gen_bool(0.6) {
            t.add(r, rng.gen_range(0..=max_count)).unwrap();
        }
    }
    t
}

pub fn id(i: usize) -> CandidateId {
    CandidateId::from(i)
}
