//! Elimination probabilities, round projection and the win-vector recursion.
//!
//! A round is described by an [`ElectionModel`]: one independent vote-total
//! distribution per ranking over the candidates still standing. From it we
//! get each candidate's first-place distribution (`tau`), the probability
//! that exactly a given set of candidates shares the lowest bucket, and from
//! those the elimination probabilities. Projecting the model past an
//! elimination gives the next round, and the win vector is the
//! elimination-weighted average of the next rounds' win vectors.

mod tree;

use std::collections::BTreeMap;

use crate::dist::{cdf, convolve_many, survival, BucketDomain, ConvolveStrategy, DiscreteDist};
use crate::domain::{collapse_full_rankings, CandidateId, CandidateSet, Ranking, MAX_CANDIDATES};
use crate::error::{Error, Result};
use crate::tabulator::TallyMap;

pub use tree::{win_vector, win_vector_memoized, EliminationTree, TreeNode, WinVector};

/// Strategy used for every convolution inside the engine.
pub const ENGINE_STRATEGY: ConvolveStrategy = ConvolveStrategy::Auto;

#[derive(Clone, Debug, PartialEq)]
pub struct ElectionModel {
    num_candidates: usize,
    remaining: CandidateSet,
    domain: BucketDomain,
    dists: BTreeMap<Ranking, DiscreteDist>,
}

impl ElectionModel {
    /// Build a first-round model over candidates `0..num_candidates`.
    ///
    /// Full-length rankings are folded into their `n-1` prefix. Rankings
    /// without an entry are a point mass at zero; the empty ranking is
    /// always present.
    pub fn new(
        num_candidates: usize,
        domain: BucketDomain,
        dists: impl IntoIterator<Item = (Ranking, DiscreteDist)>,
    ) -> Result<Self> {
        if num_candidates == 0 || num_candidates > MAX_CANDIDATES {
            return Err(Error::Validation(format!(
                "candidate count {num_candidates} outside 1..={MAX_CANDIDATES}"
            )));
        }
        let mut checked = Vec::new();
        for (r, f) in dists {
            if !r.is_valid_for(num_candidates) {
                return Err(Error::Validation(format!(
                    "ranking {r:?} names a candidate outside 0..{num_candidates}"
                )));
            }
            if f.domain() != domain {
                return Err(Error::DomainMismatch {
                    left: domain.bucket_size(),
                    right: f.bucket_size(),
                });
            }
            checked.push((r, f));
        }
        let mut merge_err = None;
        let mut dists =
            collapse_full_rankings(checked, num_candidates, |a, b| {
                match convolve_many([&a, &b], ENGINE_STRATEGY) {
                    Ok(d) => d,
                    Err(e) => {
                        merge_err.get_or_insert(e);
                        a
                    }
                }
            });
        if let Some(e) = merge_err {
            return Err(e);
        }
        dists
            .entry(Ranking::empty())
            .or_insert_with(|| DiscreteDist::point(domain, 0));
        Ok(ElectionModel {
            num_candidates,
            remaining: CandidateSet::full(num_candidates),
            domain,
            dists,
        })
    }

    /// Every ranking known exactly: a point mass at the bucket holding its count.
    pub fn from_tally(t: &TallyMap, domain: BucketDomain) -> Result<Self> {
        ElectionModel::new(
            t.num_candidates(),
            domain,
            t.iter()
                .map(|(r, c)| (r.clone(), DiscreteDist::point_at_votes(domain, c))),
        )
    }

    pub fn num_candidates(&self) -> usize {
        self.num_candidates
    }

    /// Candidates still standing in this round.
    pub fn remaining(&self) -> CandidateSet {
        self.remaining
    }

    pub fn domain(&self) -> BucketDomain {
        self.domain
    }

    pub fn dist(&self, r: &Ranking) -> Option<&DiscreteDist> {
        self.dists.get(r)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Ranking, &DiscreteDist)> {
        self.dists.iter()
    }

    pub fn len(&self) -> usize {
        self.dists.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dists.is_empty()
    }

    /// Same model with candidate `i` renamed to `perm[i]`.
    pub fn relabeled(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.num_candidates {
            return Err(Error::Validation("permutation length mismatch".into()));
        }
        let map = |c: CandidateId| CandidateId::from(perm[c.index()]);
        let dists = self
            .dists
            .iter()
            .map(|(r, f)| {
                Ranking::new(r.entries().iter().map(|&c| map(c)).collect()).map(|r| (r, f.clone()))
            })
            .collect::<Result<BTreeMap<_, _>>>()?;
        Ok(ElectionModel {
            num_candidates: self.num_candidates,
            remaining: self.remaining.iter().map(map).collect(),
            domain: self.domain,
            dists,
        })
    }
}

/// Distribution of `a`'s first-place total: the convolution of every
/// ranking that lists `a` first.
pub fn compute_tau(model: &ElectionModel, a: CandidateId) -> Result<DiscreteDist> {
    if !model.remaining.contains(a) {
        return Err(Error::Precondition(format!(
            "candidate {} is not standing in this round",
            a.index()
        )));
    }
    let parts: Vec<&DiscreteDist> = model
        .dists
        .iter()
        .filter(|(r, _)| r.first_choice() == Some(a))
        .map(|(_, f)| f)
        .collect();
    if parts.is_empty() {
        return Ok(DiscreteDist::point(model.domain, 0));
    }
    convolve_many(parts, ENGINE_STRATEGY)
}

/// First-place distributions for one round with their cumulative forms.
#[derive(Clone, Debug)]
pub struct RoundTables {
    remaining: CandidateSet,
    tau: BTreeMap<CandidateId, DiscreteDist>,
    kappa: BTreeMap<CandidateId, Vec<f64>>,
    /// `1 - kappa`, accumulated from the upper tail.
    above: BTreeMap<CandidateId, Vec<f64>>,
}

impl RoundTables {
    pub fn new(model: &ElectionModel) -> Result<Self> {
        let mut tau = BTreeMap::new();
        let mut kappa = BTreeMap::new();
        let mut above = BTreeMap::new();
        for a in model.remaining.iter() {
            let t = compute_tau(model, a)?;
            kappa.insert(a, cdf(&t));
            above.insert(a, survival(&t));
            tau.insert(a, t);
        }
        Ok(RoundTables {
            remaining: model.remaining,
            tau,
            kappa,
            above,
        })
    }

    pub fn remaining(&self) -> CandidateSet {
        self.remaining
    }

    pub fn tau(&self, a: CandidateId) -> &DiscreteDist {
        &self.tau[&a]
    }

    /// `kappa(a)[k]`, with the value 1 past the end of the stored vector.
    pub fn kappa(&self, a: CandidateId, k: usize) -> f64 {
        self.kappa[&a].get(k).copied().unwrap_or(1.0)
    }

    fn above(&self, a: CandidateId, k: usize) -> f64 {
        self.above[&a].get(k).copied().unwrap_or(0.0)
    }
}

/// Probability that exactly the candidates in `s` share the lowest
/// first-place bucket: `sum_k prod_{i in S} tau_i(k) * prod_{j not in S} (1 - kappa_j(k))`.
pub fn tie_set_prob(tables: &RoundTables, s: CandidateSet) -> Result<f64> {
    if s.is_empty() || !s.is_subset(tables.remaining) {
        return Err(Error::Precondition(
            "tie set must be a non-empty subset of the standing candidates".into(),
        ));
    }
    let members: Vec<&DiscreteDist> = s.iter().map(|a| tables.tau(a)).collect();
    let others: Vec<CandidateId> = tables
        .remaining
        .iter()
        .filter(|&c| !s.contains(c))
        .collect();
    let lo = members.iter().map(|t| t.support_start()).max().unwrap();
    let hi = members.iter().map(|t| t.support_end()).min().unwrap();
    let mut total = 0.0;
    for k in lo..hi {
        let mut term: f64 = members.iter().map(|t| t.prob(k)).product();
        if term == 0.0 {
            continue;
        }
        for &j in &others {
            term *= tables.above(j, k);
        }
        total += term;
    }
    Ok(total)
}

/// `(S, P(exactly S tied for lowest))` for every non-empty subset, in mask order.
pub fn tie_set_probs(tables: &RoundTables) -> Result<Vec<(CandidateSet, f64)>> {
    tables
        .remaining
        .non_empty_subsets()
        .map(|s| tie_set_prob(tables, s).map(|p| (s, p)))
        .collect()
}

/// Elimination probability of each standing candidate: every tie set
/// containing the candidate contributes its probability divided by its size.
pub fn elimination_probs(tables: &RoundTables) -> Result<BTreeMap<CandidateId, f64>> {
    if tables.remaining.len() < 2 {
        return Err(Error::Precondition(
            "elimination needs at least two standing candidates".into(),
        ));
    }
    let mut out: BTreeMap<CandidateId, f64> = tables.remaining.iter().map(|c| (c, 0.0)).collect();
    for (s, p) in tie_set_probs(tables)? {
        let share = p / s.len() as f64;
        for a in s.iter() {
            *out.get_mut(&a).unwrap() += share;
        }
    }
    Ok(out)
}

/// The next round after eliminating `a`: each ranking's distribution is the
/// convolution of every ranking that becomes it once `a` is removed.
pub fn project(model: &ElectionModel, a: CandidateId) -> Result<ElectionModel> {
    if !model.remaining.contains(a) {
        return Err(Error::Precondition(format!(
            "candidate {} is not standing in this round",
            a.index()
        )));
    }
    let mut groups: BTreeMap<Ranking, Vec<&DiscreteDist>> = BTreeMap::new();
    for (r, f) in &model.dists {
        groups.entry(r.remove_candidate(a)).or_default().push(f);
    }
    let dists = groups
        .into_iter()
        .map(|(r, fs)| convolve_many(fs, ENGINE_STRATEGY).map(|f| (r, f)))
        .collect::<Result<BTreeMap<_, _>>>()?;
    Ok(ElectionModel {
        num_candidates: model.num_candidates,
        remaining: model.remaining.without(a),
        domain: model.domain,
        dists,
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    fn dom(b: u64) -> BucketDomain {
        BucketDomain::new(b).unwrap()
    }

    fn col(mass: &[f64]) -> DiscreteDist {
        DiscreteDist::from_weights(dom(100), 0, mass.to_vec()).unwrap()
    }

    fn r(idx: &[usize]) -> Ranking {
        Ranking::from_indices(idx)
    }

    /// The three-candidate worked example (bucket size 100).
    pub(crate) fn abc_forecast() -> ElectionModel {
        let cols = [
            (r(&[0]), col(&[0.50, 0.50])),
            (r(&[1]), col(&[0.10, 0.30, 0.30, 0.20, 0.10])),
            (r(&[2]), col(&[0.02, 0.33, 0.21, 0.20, 0.15, 0.09])),
            (r(&[0, 1]), col(&[0.01, 0.17, 0.34, 0.25, 0.13, 0.10])),
            (r(&[0, 2]), col(&[0.50, 0.40, 0.07, 0.03])),
            (r(&[1, 0]), col(&[0.0, 0.0, 0.45, 0.31, 0.20, 0.04])),
            (r(&[1, 2]), col(&[0.0, 0.10, 0.30, 0.27, 0.19, 0.14])),
            (r(&[2, 0]), col(&[0.09, 0.17, 0.37, 0.21, 0.10, 0.06])),
            (r(&[2, 1]), col(&[0.17, 0.75, 0.08])),
        ];
        ElectionModel::new(3, dom(100), cols).unwrap()
    }

    #[test]
    fn abc_forecast_tie_sets() {
        let m = abc_forecast();
        let t = RoundTables::new(&m).unwrap();
        let set = |idx: &[u8]| {
            idx.iter()
                .map(|&i| CandidateId(i))
                .collect::<CandidateSet>()
        };
        let printed = [
            (set(&[0]), 0.672),
            (set(&[1]), 0.016),
            (set(&[2]), 0.167),
            (set(&[0, 1]), 0.018),
            (set(&[0, 2]), 0.112),
            (set(&[1, 2]), 0.005),
            (set(&[0, 1, 2]), 0.007),
        ];
        for (s, want) in printed {
            let got = tie_set_prob(&t, s).unwrap();
            assert!((got - want).abs() <= 0.002, "{s:?}: {got}");
        }
        let e = elimination_probs(&t).unwrap();
        for (c, want) in [(0u8, 0.740), (1, 0.031), (2, 0.229)] {
            assert!((e[&CandidateId(c)] - want).abs() <= 0.002);
        }
        let total: f64 = e.values().sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn abc_forecast_projection_after_a() {
        let m = abc_forecast();
        let pa = project(&m, CandidateId(0)).unwrap();
        let empty = pa.dist(&Ranking::empty()).unwrap();
        assert!((empty.prob(0) - 0.5).abs() < 1e-12);
        assert!((empty.prob(1) - 0.5).abs() < 1e-12);
        let fb = pa.dist(&r(&[1])).unwrap();
        assert!((fb.prob_at_votes(700) - 0.20).abs() < 0.005);
        let fc = pa.dist(&r(&[2])).unwrap();
        assert!((fc.prob_at_votes(500) - 0.19).abs() < 0.005);
        assert!(!pa.remaining().contains(CandidateId(0)));
        let t = RoundTables::new(&pa).unwrap();
        let e = elimination_probs(&t).unwrap();
        assert!((e[&CandidateId(1)] - 0.090).abs() <= 0.002);
        assert!((e[&CandidateId(2)] - 0.909).abs() <= 0.002);
    }

    #[test]
    fn tau_of_lone_point_mass() {
        let m = ElectionModel::new(
            2,
            dom(100),
            [(r(&[1]), DiscreteDist::point_at_votes(dom(100), 200))],
        )
        .unwrap();
        let tb = compute_tau(&m, CandidateId(1)).unwrap();
        assert_eq!(tb, DiscreteDist::point_at_votes(dom(100), 200));
        let ta = compute_tau(&m, CandidateId(0)).unwrap();
        assert_eq!(ta, DiscreteDist::point(dom(100), 0));
    }

    #[test]
    fn disjoint_supports_are_decisive() {
        let m = ElectionModel::new(
            2,
            dom(1),
            [
                (
                    r(&[0]),
                    DiscreteDist::from_weights(dom(1), 0, vec![1.0, 1.0]).unwrap(),
                ),
                (
                    r(&[1]),
                    DiscreteDist::from_weights(dom(1), 5, vec![1.0, 2.0]).unwrap(),
                ),
            ],
        )
        .unwrap();
        let t = RoundTables::new(&m).unwrap();
        let a = CandidateSet::EMPTY.with(CandidateId(0));
        let b = CandidateSet::EMPTY.with(CandidateId(1));
        assert_eq!(tie_set_prob(&t, a).unwrap(), 1.0);
        assert_eq!(tie_set_prob(&t, b).unwrap(), 0.0);
        assert_eq!(tie_set_prob(&t, a.with(CandidateId(1))).unwrap(), 0.0);
    }

    #[test]
    fn identical_candidates_split_evenly() {
        let f = DiscreteDist::from_weights(dom(1), 0, vec![0.2, 0.5, 0.3]).unwrap();
        let m = ElectionModel::new(2, dom(1), [(r(&[0]), f.clone()), (r(&[1]), f)]).unwrap();
        let e = elimination_probs(&RoundTables::new(&m).unwrap()).unwrap();
        assert!((e[&CandidateId(0)] - 0.5).abs() < 1e-9);
        assert!((e[&CandidateId(1)] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn projecting_a_zero_candidate_changes_nothing_else() {
        let f = DiscreteDist::from_weights(dom(1), 2, vec![0.2, 0.8]).unwrap();
        let zero = DiscreteDist::point(dom(1), 0);
        let m = ElectionModel::new(
            3,
            dom(1),
            [
                (r(&[0]), zero.clone()),
                (r(&[0, 1]), zero),
                (r(&[1]), f.clone()),
                (r(&[2, 1]), f.clone()),
            ],
        )
        .unwrap();
        let p = project(&m, CandidateId(0)).unwrap();
        assert_eq!(p.dist(&r(&[1])), Some(&f));
        assert_eq!(p.dist(&r(&[2, 1])), Some(&f));
        assert_eq!(
            p.dist(&Ranking::empty()),
            Some(&DiscreteDist::point(dom(1), 0))
        );
    }

    #[test]
    fn model_rejects_foreign_domains_and_collapses() {
        let bad = ElectionModel::new(2, dom(10), [(r(&[0]), DiscreteDist::point(dom(5), 1))]);
        assert!(matches!(bad, Err(Error::DomainMismatch { .. })));
        let m = ElectionModel::new(
            3,
            dom(1),
            [
                (r(&[0, 1, 2]), DiscreteDist::point_at_votes(dom(1), 100)),
                (r(&[0, 1]), DiscreteDist::point_at_votes(dom(1), 50)),
            ],
        )
        .unwrap();
        assert!(m.dist(&r(&[0, 1, 2])).is_none());
        assert_eq!(m.dist(&r(&[0, 1])).unwrap().prob_at_votes(150), 1.0);
    }

    #[test]
    fn tau_mean_is_sum_of_means() {
        let m = abc_forecast();
        for a in 0..3u8 {
            let tau = compute_tau(&m, CandidateId(a)).unwrap();
            let want: f64 = m
                .iter()
                .filter(|(r, _)| r.first_choice() == Some(CandidateId(a)))
                .map(|(_, f)| f.mean_buckets())
                .sum();
            assert!((tau.mean_buckets() - want).abs() < 1e-6);
        }
    }
}
