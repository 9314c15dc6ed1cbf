//! Cast vote records, precinct-ordered partial tallies and election-night
//! replays.
//!
//! CVR files are comma-separated with header
//! `ballot_id,precinct_portion,rank1,...,rankK`. Within a row, marks are read
//! in rank order: a blank cell, `undervote`, `overvote` or a cell naming
//! several candidates (`A|B`) ends the ranking, and a repeated candidate is
//! skipped.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{CandidateId, Ranking, Roster};
use crate::engine::{win_vector_memoized, WinVector};
use crate::error::{Error, Result};
use crate::models::{partial_count_model, PartialCountParams};
use crate::tabulator::TallyMap;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ballot {
    pub ballot_id: String,
    pub precinct_portion: String,
    pub ranking: Ranking,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CastVoteRecord {
    pub roster: Roster,
    pub ballots: Vec<Ballot>,
}

impl CastVoteRecord {
    pub fn len(&self) -> usize {
        self.ballots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ballots.is_empty()
    }

    /// Precinct portions in sorted order.
    pub fn precincts(&self) -> Vec<String> {
        self.ballots
            .iter()
            .map(|b| b.precinct_portion.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    pub fn full_tally(&self) -> TallyMap {
        let mut t = TallyMap::new(self.roster.len());
        for b in &self.ballots {
            t.add(b.ranking.clone(), 1)
                .expect("ballots are validated at parse time");
        }
        t
    }
}

fn is_terminator(cell: &str) -> bool {
    cell.is_empty()
        || cell.eq_ignore_ascii_case("undervote")
        || cell.eq_ignore_ascii_case("overvote")
        || cell.contains('|')
}

pub fn parse_cvr(source: impl Read, roster: &Roster) -> Result<CastVoteRecord> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(source);
    let header = rdr
        .headers()
        .map_err(|e| Error::parse(1, e.to_string()))?
        .clone();
    if header.len() < 3 || &header[0] != "ballot_id" || &header[1] != "precinct_portion" {
        return Err(Error::parse(
            1,
            "header must be ballot_id,precinct_portion,rank1,...",
        ));
    }
    let mut ballots = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            Error::parse(line, e.to_string())
        })?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        if rec.len() < 2 {
            return Err(Error::parse(line, "missing ballot_id or precinct_portion"));
        }
        let mut seen: Vec<CandidateId> = Vec::new();
        for cell in rec.iter().skip(2) {
            if is_terminator(cell) {
                break;
            }
            let c = roster
                .lookup(cell)
                .ok_or_else(|| Error::parse(line, format!("unknown candidate code {cell:?}")))?;
            if !seen.contains(&c) {
                seen.push(c);
            }
        }
        ballots.push(Ballot {
            ballot_id: rec[0].to_string(),
            precinct_portion: rec[1].to_string(),
            ranking: Ranking::new(seen)?,
        });
    }
    Ok(CastVoteRecord {
        roster: roster.clone(),
        ballots,
    })
}

/// Candidate codes in order of first appearance among the marks.
pub fn infer_cvr_roster(source: impl Read) -> Result<Roster> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(source);
    let mut codes: Vec<String> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            Error::parse(line, e.to_string())
        })?;
        for cell in rec.iter().skip(2) {
            if is_terminator(cell) {
                break;
            }
            if !codes.iter().any(|c| c == cell) {
                codes.push(cell.to_string());
            }
        }
    }
    Roster::from_codes(&codes)
}

pub fn write_cvr(cvr: &CastVoteRecord, out: impl Write) -> Result<()> {
    let k = cvr
        .ballots
        .iter()
        .map(|b| b.ranking.len())
        .max()
        .unwrap_or(0)
        .max(1);
    let mut w = csv::WriterBuilder::new().flexible(false).from_writer(out);
    let mut header = vec!["ballot_id".to_string(), "precinct_portion".to_string()];
    header.extend((1..=k).map(|i| format!("rank{i}")));
    w.write_record(&header).map_err(csv_io)?;
    for b in &cvr.ballots {
        let mut row = vec![b.ballot_id.clone(), b.precinct_portion.clone()];
        row.extend(
            b.ranking
                .entries()
                .iter()
                .map(|&c| cvr.roster.code(c).to_string()),
        );
        row.resize(k + 2, String::new());
        w.write_record(&row).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Counts whole precinct portions in `order` until at least `fraction` of
/// all ballots are in. Returns the collapsed tally and the fraction reached.
pub fn tally_prefix(
    cvr: &CastVoteRecord,
    order: &[String],
    fraction: f64,
) -> Result<(TallyMap, f64)> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::Validation(format!(
            "fraction {fraction} outside [0, 1]"
        )));
    }
    check_order(cvr, order)?;
    let mut by_precinct: BTreeMap<&str, Vec<&Ranking>> = BTreeMap::new();
    for b in &cvr.ballots {
        by_precinct
            .entry(&b.precinct_portion)
            .or_default()
            .push(&b.ranking);
    }
    let total = cvr.ballots.len();
    let target = fraction * total as f64;
    let mut tally = TallyMap::new(cvr.roster.len());
    let mut counted = 0usize;
    for p in order {
        if counted as f64 >= target - 1e-9 {
            break;
        }
        for r in &by_precinct[p.as_str()] {
            tally.add((*r).clone(), 1)?;
        }
        counted += by_precinct[p.as_str()].len();
    }
    let reached = if total == 0 {
        0.0
    } else {
        counted as f64 / total as f64
    };
    Ok((tally.collapse_full_rankings(), reached))
}

fn check_order(cvr: &CastVoteRecord, order: &[String]) -> Result<()> {
    let mut sorted = order.to_vec();
    sorted.sort();
    if sorted != cvr.precincts() {
        return Err(Error::Validation(
            "precinct order is not a permutation of the record's precinct portions".into(),
        ));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplayScenario {
    pub precinct_order: Vec<String>,
    pub step: f64,
    pub seed: u64,
}

impl ReplayScenario {
    /// Precinct portions in an order shuffled by `seed`.
    pub fn shuffled(cvr: &CastVoteRecord, step: f64, seed: u64) -> Result<Self> {
        check_step(step)?;
        let mut order = cvr.precincts();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        Ok(ReplayScenario {
            precinct_order: order,
            step,
            seed,
        })
    }

    /// `step, 2*step, ..., 1`, the last point clamped to 1.
    pub fn fractions(&self) -> Vec<f64> {
        let n = (1.0 / self.step - 1e-9).ceil().max(1.0) as usize;
        (1..=n)
            .map(|i| if i == n { 1.0 } else { i as f64 * self.step })
            .collect()
    }
}

fn check_step(step: f64) -> Result<()> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::Validation(format!(
            "step must be in (0, 1], got {step}"
        )));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplayPoint {
    pub fraction: f64,
    /// Share of ballots actually counted after whole precincts.
    pub counted: f64,
    pub win: WinVector,
}

/// Win probabilities after each step of counting. Before any ballot is
/// counted every candidate gets an equal share.
pub fn replay(
    cvr: &CastVoteRecord,
    scenario: &ReplayScenario,
    params: &PartialCountParams,
) -> Result<Vec<ReplayPoint>> {
    check_step(scenario.step)?;
    check_order(cvr, &scenario.precinct_order)?;
    let n = cvr.roster.len();
    scenario
        .fractions()
        .into_par_iter()
        .map(|x| {
            let (tally, counted) = tally_prefix(cvr, &scenario.precinct_order, x)?;
            let win = if counted == 0.0 {
                WinVector(vec![1.0 / n as f64; n])
            } else {
                let p = PartialCountParams {
                    fraction_counted: counted,
                    ..*params
                };
                win_vector_memoized(&partial_count_model(&tally, &p)?)?
                    .win()
                    .clone()
            };
            Ok(ReplayPoint {
                fraction: x,
                counted,
                win,
            })
        })
        .collect()
}

/// Replay series as CSV: `fraction,<codes>` or, for three candidates in
/// ternary mode, `fraction,pA,pB,pC`. A leading comment records the scenario.
pub fn write_replay_csv(
    points: &[ReplayPoint],
    roster: &Roster,
    scenario: &ReplayScenario,
    ternary: bool,
    mut out: impl Write,
) -> Result<()> {
    writeln!(out, "# seed={} step={}", scenario.seed, scenario.step)?;
    if ternary {
        if roster.len() != 3 {
            return Err(Error::Validation(
                "ternary output needs exactly three candidates".into(),
            ));
        }
        writeln!(out, "fraction,pA,pB,pC")?;
    } else {
        let codes: Vec<&str> = roster
            .candidates()
            .iter()
            .map(|c| c.code.as_str())
            .collect();
        writeln!(out, "fraction,{}", codes.join(","))?;
    }
    for p in points {
        let cells: Vec<String> = p.win.as_slice().iter().map(|x| x.to_string()).collect();
        writeln!(out, "{:.6},{}", p.fraction, cells.join(","))?;
    }
    Ok(())
}
