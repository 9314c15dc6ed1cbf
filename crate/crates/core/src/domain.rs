//! Candidates, rankings and elimination orders.
//!
//! Candidates are identified by a small index that is stable within one
//! election. Codes and display names only matter when reading or writing
//! text, which is what [`Roster`] is for.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper bound on candidates per election; [`CandidateSet`] is a 64-bit mask.
pub const MAX_CANDIDATES: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CandidateId(pub u8);

impl CandidateId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl From<usize> for CandidateId {
    fn from(i: usize) -> Self {
        assert!(i < MAX_CANDIDATES, "candidate index {i} out of range");
        CandidateId(i as u8)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    pub index: CandidateId,
    pub code: String,
    pub display_name: String,
}

/// A set of candidates stored as a bitmask.
#[derive(Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CandidateSet(u64);

impl CandidateSet {
    pub const EMPTY: CandidateSet = CandidateSet(0);

    /// All of the first `n` candidates.
    pub fn full(n: usize) -> Self {
        assert!(n <= MAX_CANDIDATES);
        if n == MAX_CANDIDATES {
            CandidateSet(u64::MAX)
        } else {
            CandidateSet((1u64 << n) - 1)
        }
    }

    pub fn from_bits(bits: u64) -> Self {
        CandidateSet(bits)
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn contains(self, c: CandidateId) -> bool {
        self.0 & (1u64 << c.0) != 0
    }

    pub fn with(self, c: CandidateId) -> Self {
        CandidateSet(self.0 | (1u64 << c.0))
    }

    pub fn without(self, c: CandidateId) -> Self {
        CandidateSet(self.0 & !(1u64 << c.0))
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn is_subset(self, other: CandidateSet) -> bool {
        self.0 & !other.0 == 0
    }

    /// Members in increasing index order.
    pub fn iter(self) -> impl Iterator<Item = CandidateId> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                None
            } else {
                let i = bits.trailing_zeros();
                bits &= bits - 1;
                Some(CandidateId(i as u8))
            }
        })
    }

    /// Every non-empty subset, in increasing order of the subset mask.
    pub fn non_empty_subsets(self) -> impl Iterator<Item = CandidateSet> {
        let full = self.0;
        let mut sub: u64 = 0;
        let mut done = full == 0;
        std::iter::from_fn(move || {
            if done {
                return None;
            }
            // next submask of `full` in increasing order
            sub = (sub.wrapping_sub(full)) & full;
            if sub == 0 {
                done = true;
                None
            } else {
                Some(CandidateSet(sub))
            }
        })
    }
}

impl FromIterator<CandidateId> for CandidateSet {
    fn from_iter<I: IntoIterator<Item = CandidateId>>(iter: I) -> Self {
        iter.into_iter().fold(CandidateSet::EMPTY, |s, c| s.with(c))
    }
}

impl fmt::Debug for CandidateSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter().map(|c| c.0)).finish()
    }
}

/// An ordered list of distinct candidates; the empty ranking stands for an
/// exhausted ballot.
///
/// Rankings order by length first, then lexicographically by index.
#[derive(Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Ranking(Vec<CandidateId>);

impl Ranking {
    pub fn empty() -> Self {
        Ranking(Vec::new())
    }

    pub fn new(entries: Vec<CandidateId>) -> Result<Self> {
        let mut seen = CandidateSet::EMPTY;
        for &c in &entries {
            if c.index() >= MAX_CANDIDATES || seen.contains(c) {
                return Err(Error::Validation(format!(
                    "ranking {:?} repeats candidate {}",
                    entries.iter().map(|c| c.0).collect::<Vec<_>>(),
                    c.0
                )));
            }
            seen = seen.with(c);
        }
        Ok(Ranking(entries))
    }

    /// Build from raw indices; panics on repeats. Handy in tests.
    pub fn from_indices(idx: &[usize]) -> Self {
        Ranking::new(idx.iter().map(|&i| CandidateId::from(i)).collect())
            .expect("indices must be distinct")
    }

    pub fn entries(&self) -> &[CandidateId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn first_choice(&self) -> Option<CandidateId> {
        self.0.first().copied()
    }

    /// The ranking with `a` deleted; a no-op if `a` is absent.
    pub fn remove_candidate(&self, a: CandidateId) -> Ranking {
        Ranking(self.0.iter().copied().filter(|&c| c != a).collect())
    }

    /// Highest-ranked entry that is still in `remaining`.
    pub fn top_among(&self, remaining: CandidateSet) -> Option<CandidateId> {
        self.0.iter().copied().find(|&c| remaining.contains(c))
    }

    pub fn candidates(&self) -> CandidateSet {
        self.0.iter().copied().collect()
    }

    pub fn truncated(&self, len: usize) -> Ranking {
        Ranking(self.0[..len.min(self.0.len())].to_vec())
    }

    pub fn is_valid_for(&self, n: usize) -> bool {
        self.0.iter().all(|c| c.index() < n)
    }
}

impl Ord for Ranking {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0
            .len()
            .cmp(&other.0.len())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Ranking {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Ranking {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "∅");
        }
        for c in &self.0 {
            // A, B, C, ... for debugging; real codes live in the roster
            if c.0 < 26 {
                write!(f, "{}", (b'A' + c.0) as char)?;
            } else {
                write!(f, "[{}]", c.0)?;
            }
        }
        Ok(())
    }
}

/// Candidates eliminated so far, first entry eliminated first.
#[derive(Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct EliminationOrder(Vec<CandidateId>);

impl EliminationOrder {
    pub fn root() -> Self {
        EliminationOrder(Vec::new())
    }

    pub fn then(&self, a: CandidateId) -> Self {
        debug_assert!(!self.0.contains(&a));
        let mut v = self.0.clone();
        v.push(a);
        EliminationOrder(v)
    }

    pub fn eliminated(&self) -> &[CandidateId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_set(&self) -> CandidateSet {
        self.0.iter().copied().collect()
    }
}

impl Ord for EliminationOrder {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0
            .len()
            .cmp(&other.0.len())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for EliminationOrder {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for EliminationOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", Ranking(self.0.clone()))
    }
}

/// All subset permutations of `n` candidates with at most `max_len` entries,
/// ordered by length and then lexicographically.
pub fn enumerate_rankings(n: usize, max_len: Option<usize>) -> Vec<Ranking> {
    assert!((1..=MAX_CANDIDATES).contains(&n), "need 1..=64 candidates");
    let max_len = max_len.unwrap_or(n);
    assert!(max_len <= n, "max_len exceeds candidate count");

    fn extend(n: usize, len: usize, prefix: &mut Vec<CandidateId>, out: &mut Vec<Ranking>) {
        if prefix.len() == len {
            out.push(Ranking(prefix.clone()));
            return;
        }
        for i in 0..n {
            let c = CandidateId::from(i);
            if !prefix.contains(&c) {
                prefix.push(c);
                extend(n, len, prefix, out);
                prefix.pop();
            }
        }
    }

    let mut out = Vec::new();
    for len in 0..=max_len {
        extend(n, len, &mut Vec::with_capacity(len), &mut out);
    }
    out
}

/// Number of subset permutations of an `n`-set: `n! * sum_{k=0}^{n} 1/k!`.
pub fn subset_permutation_count(n: usize) -> u128 {
    // sum over k of n!/(n-k)!
    let mut total: u128 = 0;
    let mut falling: u128 = 1;
    for k in 0..=n {
        total += falling;
        falling *= (n - k) as u128;
    }
    total
}

/// Merge every full-length ranking `v1..vn` into `v1..v(n-1)`.
///
/// Values landing on the same key are combined with `merge`.
pub fn collapse_full_rankings<V>(
    entries: impl IntoIterator<Item = (Ranking, V)>,
    n: usize,
    mut merge: impl FnMut(V, V) -> V,
) -> BTreeMap<Ranking, V> {
    let mut out: BTreeMap<Ranking, V> = BTreeMap::new();
    for (r, v) in entries {
        let key = if n >= 1 && r.len() >= n {
            r.truncated(n - 1)
        } else {
            r
        };
        match out.remove(&key) {
            Some(prev) => {
                out.insert(key, merge(prev, v));
            }
            None => {
                out.insert(key, v);
            }
        }
    }
    out
}

/// Candidate codes and names for one election.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Roster {
    candidates: Vec<Candidate>,
}

impl Roster {
    pub fn new(candidates: Vec<(String, String)>) -> Result<Self> {
        if candidates.is_empty() {
            return Err(Error::Validation("no candidates".into()));
        }
        if candidates.len() > MAX_CANDIDATES {
            return Err(Error::Validation(format!(
                "{} candidates exceeds the limit of {MAX_CANDIDATES}",
                candidates.len()
            )));
        }
        let mut out = Vec::with_capacity(candidates.len());
        for (i, (code, display_name)) in candidates.into_iter().enumerate() {
            if code.is_empty() || code == "-" {
                return Err(Error::Validation(format!(
                    "invalid candidate code {code:?}"
                )));
            }
            if out.iter().any(|c: &Candidate| c.code == code) {
                return Err(Error::Validation(format!(
                    "duplicate candidate code {code:?}"
                )));
            }
            out.push(Candidate {
                index: CandidateId::from(i),
                code,
                display_name,
            });
        }
        Ok(Roster { candidates: out })
    }

    /// Roster whose display names equal the codes.
    pub fn from_codes<S: AsRef<str>>(codes: &[S]) -> Result<Self> {
        Roster::new(
            codes
                .iter()
                .map(|c| (c.as_ref().to_string(), c.as_ref().to_string()))
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn candidates(&self) -> &[Candidate] {
        &self.candidates
    }

    pub fn code(&self, c: CandidateId) -> &str {
        &self.candidates[c.index()].code
    }

    pub fn lookup(&self, code: &str) -> Option<CandidateId> {
        self.candidates
            .iter()
            .find(|c| c.code == code)
            .map(|c| c.index)
    }

    /// Parse concatenated codes ("GF"); empty or "-" is the empty ranking.
    /// Matches the longest code at each position.
    pub fn parse_ranking(&self, text: &str) -> Result<Ranking> {
        let text = text.trim();
        if text.is_empty() || text == "-" {
            return Ok(Ranking::empty());
        }
        let mut rest = text;
        let mut entries = Vec::new();
        while !rest.is_empty() {
            let best = self
                .candidates
                .iter()
                .filter(|c| rest.starts_with(c.code.as_str()))
                .max_by_key(|c| c.code.len())
                .ok_or_else(|| {
                    Error::Validation(format!("unknown candidate code in ranking {text:?}"))
                })?;
            entries.push(best.index);
            rest = &rest[best.code.len()..];
        }
        Ranking::new(entries)
    }

    pub fn format_ranking(&self, r: &Ranking) -> String {
        if r.is_empty() {
            return "-".to_string();
        }
        r.entries().iter().map(|&c| self.code(c)).collect()
    }

    pub fn format_set(&self, s: CandidateSet) -> String {
        s.iter().map(|c| self.code(c)).collect::<Vec<_>>().join(",")
    }
}
