mod common;

use common::*;
use irvtree::dist::{cdf, convolve, convolve_fft, convolve_naive, ConvolveStrategy};
use irvtree::domain::{enumerate_rankings, CandidateSet, Ranking, Roster};
use irvtree::engine::{project, win_vector, win_vector_memoized};
use irvtree::ingest::{
    parse_cvr, replay, tally_prefix, write_cvr, Ballot, CastVoteRecord, ReplayScenario,
};
use irvtree::models::{partial_count_model, recount_model, PartialCountParams, RecountParams};
use irvtree::oracle::exhaustive_win_probs;
use irvtree::tabulator::{run_irv, TiePolicy};
use irvtree::WinVector;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn removal_drops_only_the_candidate(n in 1usize..6, pick in 0usize..1000, a in 0usize..6) {
        let all = enumerate_rankings(n, None);
        let r = &all[pick % all.len()];
        let a = id(a % n);
        let out = r.remove_candidate(a);
        prop_assert!(!out.entries().contains(&a));
        let kept: Vec<_> = r.entries().iter().copied().filter(|&c| c != a).collect();
        prop_assert_eq!(out.entries(), &kept[..]);
    }

    #[test]
    fn fft_matches_naive(seed: u64, la in 1usize..600, lb in 1usize..600) {
        let mut g = rng(seed);
        let (oa, ob) = (g.gen_range(0..50), g.gen_range(0..50));
        let f = random_dist(&mut g, domain(1), oa, la);
        let h = random_dist(&mut g, domain(1), ob, lb);
        let a = convolve_naive(&f, &h).unwrap();
        let b = convolve_fft(&f, &h).unwrap();
        prop_assert_eq!(a.support_start(), b.support_start());
        for k in 0..a.len().max(b.len()) {
            prop_assert!((a.prob(k) - b.prob(k)).abs() <= 1e-9);
        }
    }

    #[test]
    fn convolution_is_associative_and_adds_means(seed: u64) {
        let mut g = rng(seed);
        let pick = |g: &mut ChaCha8Rng| {
            let (w, off) = (g.gen_range(1..400), g.gen_range(0..20));
            random_dist(g, domain(5), off, w)
        };
        let (f, h, k) = (pick(&mut g), pick(&mut g), pick(&mut g));
        let s = ConvolveStrategy::Auto;
        let left = convolve(&convolve(&f, &h, s).unwrap(), &k, s).unwrap();
        let right = convolve(&f, &convolve(&h, &k, s).unwrap(), s).unwrap();
        for i in 0..left.len().max(right.len()) {
            prop_assert!((left.prob(i) - right.prob(i)).abs() <= 1e-9);
        }
        let fh = convolve(&f, &h, s).unwrap();
        let want = f.mean_votes() + h.mean_votes();
        prop_assert!((fh.mean_votes() - want).abs() <= 1e-6 * want.max(1.0));
        prop_assert!((fh.total() - 1.0).abs() <= 1e-9);
        prop_assert!(fh.iter().all(|(_, p)| p >= 0.0));
    }

    #[test]
    fn cdf_rises_to_one(seed: u64, w in 1usize..300) {
        let mut g = rng(seed);
        let f = random_dist(&mut g, domain(1), 3, w);
        let c = cdf(&f);
        prop_assert!(c.windows(2).all(|p| p[1] >= p[0]));
        prop_assert!((c.last().unwrap() - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn collapse_keeps_the_count(seed: u64, n in 2usize..=5) {
        let mut g = rng(seed);
        let t = random_tally(&mut g, n, 40);
        let c = t.collapse_full_rankings();
        let p = TiePolicy::UniformRandom { seed };
        let a = run_irv(&t, p).unwrap();
        let b = run_irv(&c, p).unwrap();
        prop_assert_eq!(a.winner, b.winner);
        // The last round differs by design: full rankings still count there.
        prop_assert_eq!(&a.rounds[..n - 1], &b.rounds[..n - 1]);
    }

    #[test]
    fn rounds_conserve_ballots(seed: u64, n in 1usize..=5) {
        let mut g = rng(seed);
        let t = random_tally(&mut g, n, 40);
        let out = run_irv(&t, TiePolicy::UniformRandom { seed }).unwrap();
        for r in &out.rounds {
            prop_assert_eq!(r.top_totals.values().sum::<u64>() + r.exhausted, t.total());
        }
    }

    #[test]
    fn untied_elections_take_n_rounds(seed: u64, n in 1usize..=5) {
        let mut g = rng(seed);
        let t = random_tally(&mut g, n, 1000);
        if let Ok(out) = run_irv(&t, TiePolicy::Error) {
            prop_assert_eq!(out.rounds.len(), n);
            prop_assert!(out.winner.is_some());
        }
    }

    #[test]
    fn tree_conserves_probability(seed: u64, n in 2usize..=4) {
        let mut g = rng(seed);
        let m = random_model(&mut g, n, 8, 6);
        let tree = win_vector_memoized(&m).unwrap();
        for node in &tree.nodes {
            prop_assert!((node.win.total() - 1.0).abs() <= 1e-6);
            if !node.children.is_empty() {
                let s: f64 = node.children.iter().map(|&c| tree.nodes[c].edge_weight).sum();
                prop_assert!((s - 1.0).abs() <= 1e-6);
            }
        }
    }

    #[test]
    fn relabeling_permutes_the_win_vector(seed: u64, n in 2usize..=4) {
        let mut g = rng(seed);
        let m = random_model(&mut g, n, 8, 5);
        let mut perm: Vec<usize> = (0..n).collect();
        rand::seq::SliceRandom::shuffle(&mut perm[..], &mut g);
        let w = win_vector_memoized(&m).unwrap();
        let wp = win_vector_memoized(&m.relabeled(&perm).unwrap()).unwrap();
        for i in 0..n {
            prop_assert!((w.win().0[i] - wp.win().0[perm[i]]).abs() <= 1e-9);
        }
    }

    #[test]
    fn projection_order_does_not_matter(seed: u64, n in 3usize..=4) {
        let mut g = rng(seed);
        let m = random_model(&mut g, n, 8, 5);
        let (a, b) = (id(0), id(n - 1));
        let ab = project(&project(&m, a).unwrap(), b).unwrap();
        let ba = project(&project(&m, b).unwrap(), a).unwrap();
        prop_assert_eq!(ab.remaining(), ba.remaining());
        prop_assert_eq!(ab.len(), ba.len());
        for (r, f) in ab.iter() {
            let h = ba.dist(r).unwrap();
            for k in 0..f.len().max(h.len()) {
                prop_assert!((f.prob(k) - h.prob(k)).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn memoized_matches_plain(seed: u64) {
        let mut g = rng(seed);
        let m = random_model(&mut g, 4, 8, 4);
        let a = win_vector(&m).unwrap();
        let b = win_vector_memoized(&m).unwrap();
        prop_assert!(a.win().max_abs_diff(b.win()) <= 1e-9);
        prop_assert_eq!(a.nodes.len(), b.nodes.len());
    }

    #[test]
    fn engine_is_deterministic(seed: u64) {
        let mut g = rng(seed);
        let m = random_model(&mut g, 3, 40, 30);
        let a = win_vector_memoized(&m).unwrap();
        let b = win_vector_memoized(&m).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn exhaustive_weight_is_one(seed: u64) {
        let mut g = rng(seed);
        let m = bounded_model(&mut g, 20_000);
        let rep = exhaustive_win_probs(&m, 20_000).unwrap();
        prop_assert!((rep.total_weight - 1.0).abs() <= 1e-9);
        prop_assert!((rep.win_probs.total() - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn recount_models_are_valid(seed: u64) {
        let mut g = rng(seed);
        let t = random_tally(&mut g, 3, 3000);
        let m = recount_model(&t, &RecountParams::default()).unwrap();
        prop_assert_eq!(m.domain().bucket_size(), 1);
        for (r, f) in m.iter() {
            prop_assert!((f.total() - 1.0).abs() <= 1e-9);
            let c = t.collapse_full_rankings().get(r) as f64;
            prop_assert!((f.mean_votes() - c * (1.0 + RecountParams::default().mean_shift)).abs() <= 0.5);
        }
    }

    #[test]
    fn partial_count_models_are_valid(seed: u64, frac in 0.05f64..1.0) {
        let mut g = rng(seed);
        let t = random_tally(&mut g, 3, 200);
        prop_assume!(t.total() > 0);
        let m = partial_count_model(&t, &PartialCountParams::new(frac, 10)).unwrap();
        for (_, f) in m.iter() {
            prop_assert_eq!(f.bucket_size(), m.domain().bucket_size());
            prop_assert!((f.total() - 1.0).abs() <= 1e-9);
        }
    }
}

fn near_deterministic(seed: u64) -> Option<(irvtree::ElectionModel, WinVector)> {
    let mut g = rng(seed);
    let m = bounded_model(&mut g, 50_000);
    let tree = win_vector_memoized(&m).unwrap();
    let sure = tree.leaves().any(|l| l.path_prob >= 0.999);
    sure.then(|| (m, tree.win().clone()))
}

#[test]
fn near_deterministic_models_match_the_oracle() {
    let mut checked = 0;
    for seed in 0..4000u64 {
        if let Some((m, w)) = near_deterministic(seed) {
            let rep = exhaustive_win_probs(&m, 50_000).unwrap();
            assert!(
                w.max_abs_diff(&rep.win_probs) <= 1e-3,
                "seed {seed}: {w:?} vs {:?}",
                rep.win_probs
            );
            checked += 1;
            if checked == 25 {
                break;
            }
        }
    }
    assert!(
        checked >= 5,
        "only {checked} near-deterministic models found"
    );
}

#[test]
fn uniform_tie_breaking_is_uniform() {
    // A and B tie for last; whichever survives takes the other's transfers and beats C.
    let roster = Roster::from_codes(&["A", "B", "C"]).unwrap();
    let mut t = irvtree::TallyMap::new(3);
    for (r, c) in [("AB", 10), ("BA", 10), ("C", 15)] {
        t.add(roster.parse_ranking(r).unwrap(), c).unwrap();
    }
    let n = 4000u64;
    let a_wins = (0..n)
        .filter(|&seed| {
            run_irv(&t, TiePolicy::UniformRandom { seed })
                .unwrap()
                .winner
                == Some(id(0))
        })
        .count() as f64;
    let p = a_wins / n as f64;
    let sigma = (0.25 / n as f64).sqrt();
    assert!((p - 0.5).abs() <= 3.0 * sigma, "{p}");
}

fn sample_cvr(seed: u64) -> CastVoteRecord {
    let mut g = rng(seed);
    let roster = Roster::from_codes(&["A", "B", "C"]).unwrap();
    let all = enumerate_rankings(3, None);
    let ballots = (0..g.gen_range(1..200))
        .map(|i| Ballot {
            ballot_id: format!("b{i}"),
            precinct_portion: format!("P{}", g.gen_range(0..6)),
            ranking: all[g.gen_range(0..all.len())].clone(),
        })
        .collect();
    CastVoteRecord { roster, ballots }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn prefix_tallies_grow(seed: u64, x in 0.0f64..=1.0, y in 0.0f64..=1.0) {
        let cvr = sample_cvr(seed);
        let order = ReplayScenario::shuffled(&cvr, 0.1, seed).unwrap().precinct_order;
        let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
        let (a, _) = tally_prefix(&cvr, &order, lo).unwrap();
        let (b, _) = tally_prefix(&cvr, &order, hi).unwrap();
        for (r, c) in a.iter() {
            prop_assert!(c <= b.get(r));
        }
        let (full, f) = tally_prefix(&cvr, &order, 1.0).unwrap();
        prop_assert_eq!(full.total(), cvr.len() as u64);
        prop_assert_eq!(f, 1.0);
    }

    #[test]
    fn cvr_round_trips(seed: u64) {
        let cvr = sample_cvr(seed);
        let mut buf = Vec::new();
        write_cvr(&cvr, &mut buf).unwrap();
        let back = parse_cvr(&buf[..], &cvr.roster).unwrap();
        prop_assert_eq!(back, cvr);
    }

    #[test]
    fn replay_ends_on_the_irv_winner(seed: u64) {
        let cvr = sample_cvr(seed);
        let full = cvr.full_tally();
        let Ok(out) = run_irv(&full, TiePolicy::Error) else { return Ok(()) };
        let sc = ReplayScenario::shuffled(&cvr, 0.25, seed).unwrap();
        let points = replay(&cvr, &sc, &PartialCountParams::new(1.0, 5)).unwrap();
        let last = points.last().unwrap();
        prop_assert_eq!(last.fraction, 1.0);
        prop_assert_eq!(&last.win, &WinVector::indicator(3, out.winner.unwrap()));
    }
}

#[test]
fn ranking_counts_match_closed_form() {
    for (n, want) in [(1, 2), (2, 5), (3, 16), (4, 65), (5, 326), (6, 1957)] {
        assert_eq!(enumerate_rankings(n, None).len(), want);
    }
    let collapsed: Vec<Ranking> = enumerate_rankings(3, Some(2));
    assert_eq!(collapsed.len(), 10);
    assert!(collapsed
        .iter()
        .all(|r| r.candidates() != CandidateSet::full(3)));
}
