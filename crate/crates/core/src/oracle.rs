//! Ground truth for the engine by brute force.
//!
//! Both estimators draw each ranking's bucket independently and tabulate
//! the joint outcome with bucket indices as vote counts, so two candidates
//! in the same bucket are exactly tied. The exhaustive oracle splits tied
//! branches evenly; Monte Carlo breaks ties at random.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{CandidateSet, Ranking};
use crate::engine::{win_vector_memoized, ElectionModel, WinVector};
use crate::error::{Error, Result};
use crate::tabulator::CompiledBallots;

pub const DEFAULT_MAX_STATES: u128 = 100_000_000;

/// Samples per Monte Carlo chunk; each chunk has its own random stream.
pub const MC_CHUNK: u64 = 1 << 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleMethod {
    Exhaustive,
    MonteCarlo,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub method: OracleMethod,
    pub win_probs: WinVector,
    /// Joint states enumerated, or samples drawn.
    pub samples_or_states: u128,
    /// Per-candidate standard error; zero for exhaustive enumeration.
    pub std_error: Vec<f64>,
    /// Total probability visited; 1 up to rounding for exhaustive runs.
    pub total_weight: f64,
    pub engine_win: WinVector,
    pub max_abs_gap_vs_engine: f64,
    pub seed: Option<u64>,
}

/// Sampling view of a first-round model: per ranking, its non-zero buckets
/// with probabilities and cumulative probabilities.
#[derive(Clone, Debug)]
pub struct JointSampler {
    rankings: Vec<Ranking>,
    buckets: Vec<Vec<u64>>,
    probs: Vec<Vec<f64>>,
    cumulative: Vec<Vec<f64>>,
}

impl JointSampler {
    /// Exhausted ballots never affect the outcome, so the empty ranking is skipped.
    pub fn new(model: &ElectionModel) -> Result<Self> {
        if model.remaining() != CandidateSet::full(model.num_candidates()) {
            return Err(Error::Precondition(
                "oracles take first-round models only".into(),
            ));
        }
        let mut s = JointSampler {
            rankings: Vec::new(),
            buckets: Vec::new(),
            probs: Vec::new(),
            cumulative: Vec::new(),
        };
        for (r, f) in model.iter().filter(|(r, _)| !r.is_empty()) {
            let (b, p): (Vec<u64>, Vec<f64>) = f
                .iter()
                .filter(|&(_, p)| p > 0.0)
                .map(|(k, p)| (k as u64, p))
                .unzip();
            let mut acc = 0.0;
            let c = p
                .iter()
                .map(|x| {
                    acc += x;
                    acc
                })
                .collect();
            s.rankings.push(r.clone());
            s.buckets.push(b);
            s.probs.push(p);
            s.cumulative.push(c);
        }
        Ok(s)
    }

    pub fn rankings(&self) -> &[Ranking] {
        &self.rankings
    }

    pub fn state_count(&self) -> u128 {
        self.buckets
            .iter()
            .fold(1u128, |acc, b| acc.saturating_mul(b.len() as u128))
    }

    /// One joint draw of every ranking's bucket, written to `out`.
    pub fn sample<R: Rng>(&self, rng: &mut R, out: &mut [u64]) {
        for (i, cum) in self.cumulative.iter().enumerate() {
            let u: f64 = rng.gen::<f64>() * cum[cum.len() - 1];
            let j = cum.partition_point(|&c| c <= u).min(cum.len() - 1);
            out[i] = self.buckets[i][j];
        }
    }
}

fn engine_gap(model: &ElectionModel, win: &WinVector) -> Result<(WinVector, f64)> {
    let engine = win_vector_memoized(model)?.win().clone();
    let gap = engine.max_abs_diff(win);
    Ok((engine, gap))
}

/// Exact win probabilities under independent draws, by enumerating every
/// joint bucket assignment.
pub fn exhaustive_win_probs(model: &ElectionModel, max_states: u128) -> Result<OracleReport> {
    let sampler = JointSampler::new(model)?;
    let states = sampler.state_count();
    if states > max_states {
        return Err(Error::StateSpaceTooLarge {
            states,
            limit: max_states,
        });
    }
    let n = model.num_candidates();
    let ballots = CompiledBallots::new(n, sampler.rankings());
    let k = sampler.rankings.len();
    let mut win = vec![0.0; n];
    let mut total_weight = 0.0;

    // Odometer over joint states; weight[i] is the product of the first i draws.
    let mut idx = vec![0usize; k];
    let mut counts = vec![0u64; k];
    let mut weight = vec![1.0f64; k + 1];
    for i in 0..k {
        counts[i] = sampler.buckets[i][0];
        weight[i + 1] = weight[i] * sampler.probs[i][0];
    }
    loop {
        let w = weight[k];
        total_weight += w;
        ballots.add_win_shares(&counts, w, &mut win);

        let mut pos = k;
        loop {
            if pos == 0 {
                let win = WinVector(win);
                let (engine_win, gap) = engine_gap(model, &win)?;
                return Ok(OracleReport {
                    method: OracleMethod::Exhaustive,
                    win_probs: win,
                    samples_or_states: states,
                    std_error: vec![0.0; n],
                    total_weight,
                    engine_win,
                    max_abs_gap_vs_engine: gap,
                    seed: None,
                });
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < sampler.buckets[pos].len() {
                break;
            }
            idx[pos] = 0;
        }
        for i in pos..k {
            counts[i] = sampler.buckets[i][idx[i]];
            weight[i + 1] = weight[i] * sampler.probs[i][idx[i]];
        }
    }
}

/// Win frequencies over `n` independent joint draws. Results depend only on
/// `(n, seed)`, not on the number of worker threads.
pub fn mc_win_probs(model: &ElectionModel, n: u64, seed: u64) -> Result<OracleReport> {
    if n == 0 {
        return Err(Error::Precondition(
            "sample count must be at least 1".into(),
        ));
    }
    let sampler = JointSampler::new(model)?;
    let nc = model.num_candidates();
    let ballots = CompiledBallots::new(nc, sampler.rankings());
    let chunks = n.div_ceil(MC_CHUNK);
    let per_chunk: Vec<Vec<u64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c);
            let len = MC_CHUNK.min(n - c * MC_CHUNK);
            let mut wins = vec![0u64; nc];
            let mut counts = vec![0u64; sampler.rankings.len()];
            for _ in 0..len {
                sampler.sample(&mut rng, &mut counts);
                wins[ballots.winner_random(&counts, &mut rng)] += 1;
            }
            wins
        })
        .collect();
    let mut wins = vec![0u64; nc];
    for chunk in &per_chunk {
        for (w, c) in wins.iter_mut().zip(chunk) {
            *w += c;
        }
    }
    let p: Vec<f64> = wins.iter().map(|&w| w as f64 / n as f64).collect();
    let std_error = p
        .iter()
        .map(|&x| (x * (1.0 - x) / n as f64).sqrt())
        .collect();
    let win = WinVector(p);
    let (engine_win, gap) = engine_gap(model, &win)?;
    Ok(OracleReport {
        method: OracleMethod::MonteCarlo,
        win_probs: win,
        samples_or_states: n as u128,
        std_error,
        total_weight: 1.0,
        engine_win,
        max_abs_gap_vs_engine: gap,
        seed: Some(seed),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{BucketDomain, DiscreteDist};
    use crate::tabulator::{run_irv, TallyMap, TiePolicy};

    fn r(idx: &[usize]) -> Ranking {
        Ranking::from_indices(idx)
    }

    fn two_candidate_hand_example() -> ElectionModel {
        let d = BucketDomain::new(100).unwrap();
        ElectionModel::new(
            2,
            d,
            [
                (
                    r(&[0]),
                    DiscreteDist::from_weights(d, 0, vec![1.0, 1.0]).unwrap(),
                ),
                (r(&[1]), DiscreteDist::point(d, 1)),
            ],
        )
        .unwrap()
    }

    #[test]
    fn hand_enumerated_two_states() {
        let rep = exhaustive_win_probs(&two_candidate_hand_example(), DEFAULT_MAX_STATES).unwrap();
        assert_eq!(rep.samples_or_states, 2);
        assert!((rep.win_probs.0[0] - 0.25).abs() < 1e-12);
        assert!((rep.win_probs.0[1] - 0.75).abs() < 1e-12);
        assert!((rep.total_weight - 1.0).abs() < 1e-12);
    }

    #[test]
    fn monte_carlo_matches_hand_example() {
        let m = two_candidate_hand_example();
        let rep = mc_win_probs(&m, 100_000, 7).unwrap();
        let se = rep.std_error[0];
        assert!(
            (rep.win_probs.0[0] - 0.25).abs() <= 3.0 * se,
            "{:?}",
            rep.win_probs
        );
    }

    #[test]
    fn point_masses_give_the_tabulated_winner() {
        let t = TallyMap::from_counts(
            3,
            [(r(&[0]), 5), (r(&[1, 0]), 3), (r(&[2]), 4), (r(&[2, 1]), 3)],
        )
        .unwrap();
        let m = ElectionModel::from_tally(&t, BucketDomain::new(1).unwrap()).unwrap();
        let winner = run_irv(&t, TiePolicy::Error).unwrap().winner.unwrap();
        let want = WinVector::indicator(3, winner);
        let ex = exhaustive_win_probs(&m, 10).unwrap();
        assert_eq!(ex.win_probs, want);
        assert_eq!(ex.max_abs_gap_vs_engine, 0.0);
        let mc = mc_win_probs(&m, 1000, 1).unwrap();
        assert_eq!(mc.win_probs, want);
        assert!(mc.std_error.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn refuses_oversized_state_space() {
        let m = crate::engine::tests::abc_forecast();
        let err = exhaustive_win_probs(&m, 1000).unwrap_err();
        assert!(matches!(err, Error::StateSpaceTooLarge { states, .. } if states > 1000));
    }

    #[test]
    fn monte_carlo_is_reproducible() {
        let m = crate::engine::tests::abc_forecast();
        let a = mc_win_probs(&m, 200_000, 42).unwrap();
        let b = mc_win_probs(&m, 200_000, 42).unwrap();
        assert_eq!(a.win_probs, b.win_probs);
        let c = mc_win_probs(&m, 200_000, 43).unwrap();
        assert_ne!(a.win_probs, c.win_probs);
    }

    #[test]
    fn abc_forecast_exhaustive_against_monte_carlo() {
        let m = crate::engine::tests::abc_forecast();
        let ex = exhaustive_win_probs(&m, DEFAULT_MAX_STATES).unwrap();
        assert!((ex.total_weight - 1.0).abs() < 1e-9);
        assert!((ex.win_probs.total() - 1.0).abs() < 1e-9);
        let mc = mc_win_probs(&m, 1_000_000, 5).unwrap();
        for c in 0..3 {
            let se = mc.std_error[c].max(1e-6);
            assert!((mc.win_probs.0[c] - ex.win_probs.0[c]).abs() <= 3.0 * se);
        }
    }

    #[test]
    fn standard_error_shrinks_with_samples() {
        let m = two_candidate_hand_example();
        let a = mc_win_probs(&m, 50_000, 3).unwrap();
        let b = mc_win_probs(&m, 100_000, 3).unwrap();
        let ratio = b.std_error[0] / a.std_error[0];
        assert!(
            (ratio - std::f64::consts::FRAC_1_SQRT_2).abs() < 0.02,
            "{ratio}"
        );
    }

    #[test]
    fn disjoint_ranking_sums_are_uncorrelated() {
        let m = crate::engine::tests::abc_forecast();
        let s = JointSampler::new(&m).unwrap();
        let pos = |rank: &[usize]| s.rankings().iter().position(|x| *x == r(rank)).unwrap();
        let left = [pos(&[0]), pos(&[0, 1])];
        let right = [pos(&[1]), pos(&[2, 0])];
        let n = 200_000;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut buf = vec![0u64; s.rankings().len()];
        let (mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for _ in 0..n {
            s.sample(&mut rng, &mut buf);
            let x: f64 = left.iter().map(|&i| buf[i] as f64).sum();
            let y: f64 = right.iter().map(|&i| buf[i] as f64).sum();
            sx += x;
            sy += y;
            sxx += x * x;
            syy += y * y;
            sxy += x * y;
        }
        let nf = n as f64;
        let cov = sxy / nf - (sx / nf) * (sy / nf);
        let vx = sxx / nf - (sx / nf).powi(2);
        let vy = syy / nf - (sy / nf).powi(2);
        let rho = cov / (vx * vy).sqrt();
        assert!(rho.abs() <= 3.0 / nf.sqrt(), "{rho}");
    }

    #[test]
    fn sampler_respects_the_marginals() {
        let m = crate::engine::tests::abc_forecast();
        let s = JointSampler::new(&m).unwrap();
        let i = s.rankings().iter().position(|x| *x == r(&[0])).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut buf = vec![0u64; s.rankings().len()];
        let n = 100_000;
        let ones = (0..n)
            .filter(|_| {
                s.sample(&mut rng, &mut buf);
                buf[i] == 1
            })
            .count() as f64;
        assert!((ones / n as f64 - 0.5).abs() < 3.0 * (0.25 / n as f64).sqrt());
        assert!(!s.rankings().contains(&Ranking::empty()));
    }
}
