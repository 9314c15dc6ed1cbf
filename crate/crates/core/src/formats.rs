//! Text formats: distribution tables, tally files, configuration files and
//! tree exports.
//!
//! Distribution tables and tallies are comma-separated. Lines starting with
//! `#` are comments, except two directives:
//!
//! ```text
//! # candidates: A=Alice, B=Bob, C
//! # bucket_size = 100
//! ```
//!
//! Without a candidates directive the roster is inferred from the
//! single-character codes in the rankings, in order of first appearance.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};

use log::warn;
use serde::Serialize;

use crate::dist::{BucketDomain, DiscreteDist};
use crate::domain::{Ranking, Roster};
use crate::engine::{ElectionModel, EliminationTree};
use crate::error::{Error, Result};
use crate::tabulator::TallyMap;

/// Columns whose mass is off from 1 by more than this are rejected.
pub const COLUMN_SUM_TOLERANCE: f64 = 0.05;

#[derive(Debug, Default)]
struct Directives {
    candidates: Option<Vec<(String, String)>>,
    bucket_size: Option<u64>,
}

fn parse_directive(line: &str, lineno: usize, d: &mut Directives) -> Result<()> {
    let body = line.trim_start_matches('#').trim();
    if let Some(rest) = body.strip_prefix("candidates:") {
        let list = rest
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|item| match item.split_once('=') {
                Some((c, n)) => (c.trim().to_string(), n.trim().to_string()),
                None => (item.to_string(), item.to_string()),
            })
            .collect();
        d.candidates = Some(list);
    } else if let Some(rest) = body.strip_prefix("bucket_size") {
        let v = rest.trim_start().trim_start_matches(['=', ':']).trim();
        let b = v
            .parse::<u64>()
            .map_err(|_| Error::parse(lineno, format!("bad bucket_size {v:?}")))?;
        d.bucket_size = Some(b);
    }
    Ok(())
}

/// Splits the input into directives and data lines with 1-based line numbers.
fn read_lines(source: impl Read) -> Result<(Directives, Vec<(usize, String)>)> {
    let mut d = Directives::default();
    let mut data = Vec::new();
    for (i, line) in BufReader::new(source).lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        if t.starts_with('#') {
            parse_directive(t, i + 1, &mut d)?;
        } else {
            data.push((i + 1, t.to_string()));
        }
    }
    Ok((d, data))
}

fn split_fields(line: &str) -> Vec<String> {
    line.split(',').map(|s| s.trim().to_string()).collect()
}

fn infer_roster<'a>(rankings: impl IntoIterator<Item = &'a str>) -> Result<Roster> {
    let mut codes: Vec<String> = Vec::new();
    for r in rankings {
        if r == "-" {
            continue;
        }
        for ch in r.chars() {
            let c = ch.to_string();
            if !codes.contains(&c) {
                codes.push(c);
            }
        }
    }
    Roster::from_codes(&codes)
}

fn resolve_roster<'a>(
    d: &Directives,
    given: Option<&Roster>,
    rankings: impl IntoIterator<Item = &'a str>,
) -> Result<Roster> {
    match (given, &d.candidates) {
        (Some(r), _) => Ok(r.clone()),
        (None, Some(list)) => Roster::new(list.clone()),
        (None, None) => infer_roster(rankings),
    }
}

fn resolve_bucket(d: &Directives, flag: Option<u64>) -> Result<BucketDomain> {
    match (flag, d.bucket_size) {
        (Some(a), Some(b)) if a != b => Err(Error::Validation(format!(
            "bucket size {a} conflicts with the file's bucket_size = {b}"
        ))),
        (Some(b), _) | (None, Some(b)) => BucketDomain::new(b),
        (None, None) => Err(Error::Validation(
            "bucket size not given: use a bucket_size directive or flag".into(),
        )),
    }
}

/// A parsed distribution table: one probability column per ranking.
#[derive(Clone, Debug)]
pub struct DistributionTable {
    pub roster: Roster,
    pub domain: BucketDomain,
    pub columns: Vec<(Ranking, DiscreteDist)>,
}

impl DistributionTable {
    pub fn to_model(&self) -> Result<ElectionModel> {
        ElectionModel::new(self.roster.len(), self.domain, self.columns.clone())
    }
}

/// Reads a table with header `votes,<ranking>,...` and one row per bucket
/// lower edge. `.` or an empty cell is zero. Columns whose sum is within
/// [`COLUMN_SUM_TOLERANCE`] of 1 are renormalized.
pub fn parse_distribution_table(
    source: impl Read,
    bucket_size: Option<u64>,
    roster: Option<&Roster>,
) -> Result<DistributionTable> {
    let (d, lines) = read_lines(source)?;
    let mut it = lines.into_iter();
    let (hline, header) = it
        .next()
        .ok_or_else(|| Error::parse(0, "empty distribution table"))?;
    let header = split_fields(&header);
    if header.len() < 2 || !header[0].eq_ignore_ascii_case("votes") {
        return Err(Error::parse(hline, "header must be votes,<ranking>,..."));
    }
    let names = &header[1..];
    let roster = resolve_roster(&d, roster, names.iter().map(String::as_str))?;
    let domain = resolve_bucket(&d, bucket_size)?;
    let rankings = names
        .iter()
        .map(|n| {
            roster
                .parse_ranking(n)
                .map_err(|e| Error::parse(hline, e.to_string()))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut cols: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); names.len()];
    for (lineno, line) in it {
        let f = split_fields(&line);
        if f.len() > names.len() + 1 {
            return Err(Error::parse(lineno, "more cells than header columns"));
        }
        let votes: u64 = f[0]
            .parse()
            .map_err(|_| Error::parse(lineno, format!("bad vote count {:?}", f[0])))?;
        if !votes.is_multiple_of(domain.bucket_size()) {
            return Err(Error::parse(
                lineno,
                format!(
                    "{votes} is not a multiple of the bucket size {}",
                    domain.bucket_size()
                ),
            ));
        }
        let bucket = domain.bucket_of(votes);
        for (j, cell) in f.iter().enumerate().skip(1) {
            if cell.is_empty() || cell == "." {
                continue;
            }
            let p: f64 = cell
                .parse()
                .map_err(|_| Error::parse(lineno, format!("bad probability {cell:?}")))?;
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::parse(
                    lineno,
                    format!("probability {p} outside [0, 1]"),
                ));
            }
            *cols[j - 1].entry(bucket).or_insert(0.0) += p;
        }
    }

    let mut columns = Vec::with_capacity(names.len());
    for ((name, r), col) in names.iter().zip(rankings).zip(cols) {
        let total: f64 = col.values().sum();
        if (total - 1.0).abs() > COLUMN_SUM_TOLERANCE {
            return Err(Error::InvalidDistribution(format!(
                "column {name} sums to {total:.4}"
            )));
        }
        if (total - 1.0).abs() > 1e-9 {
            warn!("column {name} sums to {total:.4}; renormalizing");
        }
        let start = *col.keys().next().unwrap();
        let end = *col.keys().next_back().unwrap();
        let mut w = vec![0.0; end - start + 1];
        for (k, p) in col {
            w[k - start] = p;
        }
        columns.push((r, DiscreteDist::from_weights(domain, start, w)?));
    }
    Ok(DistributionTable {
        roster,
        domain,
        columns,
    })
}

/// Writes a model in the format read by [`parse_distribution_table`].
pub fn write_distribution_table(
    model: &ElectionModel,
    roster: &Roster,
    mut out: impl Write,
) -> Result<()> {
    let cols: Vec<_> = model.iter().filter(|(r, _)| !r.is_empty()).collect();
    let codes = roster
        .candidates()
        .iter()
        .map(|c| format!("{}={}", c.code, c.display_name))
        .collect::<Vec<_>>()
        .join(", ");
    writeln!(out, "# candidates: {codes}")?;
    writeln!(out, "# bucket_size = {}", model.domain().bucket_size())?;
    let mut header = String::from("votes");
    for (r, _) in &cols {
        write!(header, ",{}", roster.format_ranking(r)).unwrap();
    }
    writeln!(out, "{header}")?;
    let end = cols.iter().map(|(_, f)| f.support_end()).max().unwrap_or(1);
    for k in 0..end {
        let mut row = model.domain().lower_edge(k).to_string();
        for (_, f) in &cols {
            let p = f.prob(k);
            if p == 0.0 {
                row.push_str(",.");
            } else {
                write!(row, ",{p}").unwrap();
            }
        }
        writeln!(out, "{row}")?;
    }
    Ok(())
}

/// Reads `ranking,count` lines; a leading `ranking,count` header is optional.
pub fn parse_tally(source: impl Read, roster: Option<&Roster>) -> Result<(Roster, TallyMap)> {
    let (d, lines) = read_lines(source)?;
    let mut rows = Vec::with_capacity(lines.len());
    for (lineno, line) in lines {
        let f = split_fields(&line);
        if f.len() != 2 {
            return Err(Error::parse(lineno, "expected ranking,count"));
        }
        if f[0].eq_ignore_ascii_case("ranking") && f[1].eq_ignore_ascii_case("count") {
            continue;
        }
        let count: u64 = f[1]
            .parse()
            .map_err(|_| Error::parse(lineno, format!("bad count {:?}", f[1])))?;
        rows.push((lineno, f[0].clone(), count));
    }
    let roster = resolve_roster(&d, roster, rows.iter().map(|(_, r, _)| r.as_str()))?;
    let mut tally = TallyMap::new(roster.len());
    for (lineno, text, count) in rows {
        let r = roster
            .parse_ranking(&text)
            .map_err(|e| Error::parse(lineno, e.to_string()))?;
        tally.add(r, count)?;
    }
    Ok((roster, tally))
}

pub fn write_tally(tally: &TallyMap, roster: &Roster, mut out: impl Write) -> Result<()> {
    writeln!(out, "ranking,count")?;
    for (r, c) in tally.iter() {
        writeln!(out, "{},{c}", roster.format_ranking(r))?;
    }
    Ok(())
}

/// `key = value` lines; `#` starts a comment. Keys may use `-` or `_`.
pub fn parse_config(source: impl Read) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, line) in BufReader::new(source).lines().enumerate() {
        let line = line?;
        let body = line.split('#').next().unwrap().trim();
        if body.is_empty() {
            continue;
        }
        let (k, v) = body
            .split_once('=')
            .ok_or_else(|| Error::parse(i + 1, "expected key = value"))?;
        out.insert(k.trim().replace('-', "_"), v.trim().to_string());
    }
    Ok(out)
}

#[derive(Serialize)]
struct JsonNode {
    eliminated: Vec<String>,
    remaining: Vec<String>,
    edge_weight: f64,
    path_prob: f64,
    win: BTreeMap<String, f64>,
    children: Vec<usize>,
}

#[derive(Serialize)]
struct JsonTree<'a> {
    candidates: Vec<&'a str>,
    win: BTreeMap<String, f64>,
    nodes: Vec<JsonNode>,
}

fn win_map(roster: &Roster, win: &[f64]) -> BTreeMap<String, f64> {
    roster
        .candidates()
        .iter()
        .map(|c| (c.code.clone(), win[c.index.index()]))
        .collect()
}

/// The tree as a JSON document, nodes in pre-order with child indices.
pub fn tree_to_json(tree: &EliminationTree, roster: &Roster) -> Result<String> {
    let nodes = tree
        .nodes
        .iter()
        .map(|n| JsonNode {
            eliminated: n
                .order
                .eliminated()
                .iter()
                .map(|&c| roster.code(c).to_string())
                .collect(),
            remaining: n
                .remaining
                .iter()
                .map(|c| roster.code(c).to_string())
                .collect(),
            edge_weight: n.edge_weight,
            path_prob: n.path_prob,
            win: win_map(roster, n.win.as_slice()),
            children: n.children.clone(),
        })
        .collect();
    let doc = JsonTree {
        candidates: roster
            .candidates()
            .iter()
            .map(|c| c.code.as_str())
            .collect(),
        win: win_map(roster, tree.win().as_slice()),
        nodes,
    };
    serde_json::to_string_pretty(&doc).map_err(|e| Error::Validation(e.to_string()))
}

/// Percentage with one decimal, e.g. `67.3%`.
pub fn percent(p: f64) -> String {
    format!("{:.1}%", 100.0 * p)
}

/// Graphviz rendering: nodes labelled by standing candidates, edges by the
/// probability of reaching the child, line width proportional to it.
pub fn tree_to_dot(tree: &EliminationTree, roster: &Roster) -> String {
    let mut s = String::from("digraph elimination {\n  rankdir=LR;\n  node [shape=circle];\n");
    for (i, n) in tree.nodes.iter().enumerate() {
        writeln!(s, "  n{i} [label=\"{}\"];", roster.format_set(n.remaining)).unwrap();
    }
    for (i, n) in tree.nodes.iter().enumerate() {
        for &c in &n.children {
            let p = tree.nodes[c].path_prob;
            writeln!(
                s,
                "  n{i} -> n{c} [label=\"{}\", penwidth={:.3}];",
                percent(p),
                (5.0 * p).max(0.1)
            )
            .unwrap();
        }
    }
    s.push_str("}\n");
    s
}
