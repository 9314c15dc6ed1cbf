//! Deterministic IRV tabulation of concrete ballot counts.
//!
//! Rounds always run to completion: a candidate holding a majority is not
//! declared early, and the last round holds a single candidate.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{collapse_full_rankings, CandidateId, CandidateSet, Ranking, MAX_CANDIDATES};
use crate::error::{Error, Result};

/// Vote counts per ranking.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TallyMap {
    num_candidates: usize,
    counts: BTreeMap<Ranking, u64>,
}

impl TallyMap {
    pub fn new(num_candidates: usize) -> Self {
        assert!((1..=MAX_CANDIDATES).contains(&num_candidates));
        TallyMap {
            num_candidates,
            counts: BTreeMap::new(),
        }
    }

    pub fn from_counts(
        num_candidates: usize,
        counts: impl IntoIterator<Item = (Ranking, u64)>,
    ) -> Result<Self> {
        let mut t = TallyMap::new(num_candidates);
        for (r, c) in counts {
            t.add(r, c)?;
        }
        Ok(t)
    }

    /// Add `count` ballots with ranking `r`.
    pub fn add(&mut self, r: Ranking, count: u64) -> Result<()> {
        if !r.is_valid_for(self.num_candidates) {
            return Err(Error::Validation(format!(
                "ranking {r:?} names a candidate outside 0..{}",
                self.num_candidates
            )));
        }
        *self.counts.entry(r).or_insert(0) += count;
        Ok(())
    }

    pub fn num_candidates(&self) -> usize {
        self.num_candidates
    }

    pub fn get(&self, r: &Ranking) -> u64 {
        self.counts.get(r).copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Ranking, u64)> {
        self.counts.iter().map(|(r, &c)| (r, c))
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn collapse_full_rankings(&self) -> TallyMap {
        TallyMap {
            num_candidates: self.num_candidates,
            counts: collapse_full_rankings(
                self.counts.iter().map(|(r, &c)| (r.clone(), c)),
                self.num_candidates,
                |a, b| a + b,
            ),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TiePolicy {
    /// Every candidate tied for last is eliminated together.
    EliminateAll,
    /// One tied candidate, chosen uniformly with a seeded generator.
    UniformRandom { seed: u64 },
    /// Abort with [`Error::Tie`].
    Error,
}

impl Default for TiePolicy {
    fn default() -> Self {
        TiePolicy::UniformRandom { seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FirstPlaceTotals {
    pub totals: BTreeMap<CandidateId, u64>,
    pub exhausted: u64,
}

/// Credit each ballot to its highest-ranked remaining candidate.
pub fn first_place_totals(t: &TallyMap, remaining: CandidateSet) -> FirstPlaceTotals {
    let mut totals: BTreeMap<CandidateId, u64> = remaining.iter().map(|c| (c, 0)).collect();
    let mut exhausted = 0;
    for (r, c) in t.iter() {
        match r.top_among(remaining) {
            Some(top) => *totals.get_mut(&top).unwrap() += c,
            None => exhausted += c,
        }
    }
    FirstPlaceTotals { totals, exhausted }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub remaining: CandidateSet,
    pub top_totals: BTreeMap<CandidateId, u64>,
    pub exhausted: u64,
    pub eliminated: CandidateSet,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IrvOutcome {
    pub rounds: Vec<RoundRecord>,
    /// `None` when the final candidates were eliminated together.
    pub winner: Option<CandidateId>,
}

pub fn run_irv(t: &TallyMap, tie_policy: TiePolicy) -> Result<IrvOutcome> {
    let mut rng = match tie_policy {
        TiePolicy::UniformRandom { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
        _ => None,
    };
    let mut remaining = CandidateSet::full(t.num_candidates());
    let mut rounds = Vec::new();
    loop {
        let FirstPlaceTotals { totals, exhausted } = first_place_totals(t, remaining);
        if remaining.len() == 1 {
            let winner = remaining.iter().next();
            rounds.push(RoundRecord {
                remaining,
                top_totals: totals,
                exhausted,
                eliminated: CandidateSet::EMPTY,
            });
            return Ok(IrvOutcome { rounds, winner });
        }
        let min = *totals.values().min().expect("remaining is non-empty");
        let tied: CandidateSet = totals
            .iter()
            .filter(|(_, &v)| v == min)
            .map(|(&c, _)| c)
            .collect();
        let eliminated = if tied.len() == 1 {
            tied
        } else {
            match tie_policy {
                TiePolicy::EliminateAll => tied,
                TiePolicy::UniformRandom { .. } => {
                    let rng = rng.as_mut().unwrap();
                    let pick = rng.gen_range(0..tied.len());
                    CandidateSet::EMPTY.with(tied.iter().nth(pick).unwrap())
                }
                TiePolicy::Error => {
                    return Err(Error::Tie {
                        tied: tied.iter().map(|c| c.index()).collect(),
                    })
                }
            }
        };
        rounds.push(RoundRecord {
            remaining,
            top_totals: totals,
            exhausted,
            eliminated,
        });
        remaining = CandidateSet::from_bits(remaining.bits() & !eliminated.bits());
        if remaining.is_empty() {
            return Ok(IrvOutcome {
                rounds,
                winner: None,
            });
        }
    }
}

/// Rankings laid out for repeated tabulation with varying counts; used by
/// the oracles, which tabulate millions of joint states.
#[derive(Clone, Debug)]
pub(crate) struct CompiledBallots {
    n: usize,
    rankings: Vec<Vec<u8>>,
}

impl CompiledBallots {
    pub(crate) fn new(n: usize, rankings: &[Ranking]) -> Self {
        CompiledBallots {
            n,
            rankings: rankings
                .iter()
                .map(|r| r.entries().iter().map(|c| c.0).collect())
                .collect(),
        }
    }

    fn totals(&self, counts: &[u64], remaining: u64, out: &mut [u64; MAX_CANDIDATES]) {
        out[..self.n].iter_mut().for_each(|x| *x = 0);
        for (r, &c) in self.rankings.iter().zip(counts) {
            if c == 0 {
                continue;
            }
            if let Some(&top) = r.iter().find(|&&x| remaining & (1u64 << x) != 0) {
                out[top as usize] += c;
            }
        }
    }

    /// Mask of the candidates tied for the fewest first-place votes.
    fn lowest(&self, counts: &[u64], remaining: u64) -> u64 {
        let mut totals = [0u64; MAX_CANDIDATES];
        self.totals(counts, remaining, &mut totals);
        let mut min = u64::MAX;
        let mut tied = 0u64;
        let mut bits = remaining;
        while bits != 0 {
            let i = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            let v = totals[i];
            if v < min {
                min = v;
                tied = 1u64 << i;
            } else if v == min {
                tied |= 1u64 << i;
            }
        }
        tied
    }

    /// Adds `weight` times each candidate's win share to `out`, where exact
    /// ties for last split the weight evenly across elimination branches.
    pub(crate) fn add_win_shares(&self, counts: &[u64], weight: f64, out: &mut [f64]) {
        self.shares_from(counts, CandidateSet::full(self.n).bits(), weight, out);
    }

    fn shares_from(&self, counts: &[u64], remaining: u64, weight: f64, out: &mut [f64]) {
        let mut remaining = remaining;
        loop {
            if remaining.count_ones() == 1 {
                out[remaining.trailing_zeros() as usize] += weight;
                return;
            }
            let tied = self.lowest(counts, remaining);
            if tied.count_ones() == 1 {
                remaining &= !tied;
                continue;
            }
            let w = weight / tied.count_ones() as f64;
            let mut bits = tied;
            while bits != 0 {
                let i = bits.trailing_zeros();
                bits &= bits - 1;
                self.shares_from(counts, remaining & !(1u64 << i), w, out);
            }
            return;
        }
    }

    /// Winner with ties for last broken uniformly at random.
    pub(crate) fn winner_random<R: Rng>(&self, counts: &[u64], rng: &mut R) -> usize {
        let mut remaining = CandidateSet::full(self.n).bits();
        while remaining.count_ones() > 1 {
            let tied = self.lowest(counts, remaining);
            let out = if tied.count_ones() == 1 {
                tied
            } else {
                let pick = rng.gen_range(0..tied.count_ones());
                let mut bits = tied;
                for _ in 0..pick {
                    bits &= bits - 1;
                }
                1u64 << bits.trailing_zeros()
            };
            remaining &= !out;
        }
        remaining.trailing_zeros() as usize
    }
}
