//! Command-line front end.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::domain::{CandidateId, Roster};
use crate::engine::{win_vector_memoized, ElectionModel, EliminationTree};
use crate::error::{Error, Result};
use crate::formats::{
    parse_config, parse_distribution_table, parse_tally, percent, tree_to_dot, tree_to_json,
};
use crate::ingest::{infer_cvr_roster, parse_cvr, replay, write_replay_csv, ReplayScenario};
use crate::models::{partial_count_model, recount_model, PartialCountParams, RecountParams};
use crate::oracle::{exhaustive_win_probs, mc_win_probs, OracleReport, DEFAULT_MAX_STATES};
use crate::tabulator::{run_irv, IrvOutcome, TallyMap, TiePolicy};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
    Csv,
    Dot,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum TieArg {
    EliminateAll,
    Random,
    Error,
}

#[derive(Debug, Parser)]
#[command(
    name = "irvtree",
    version,
    about = "Win probabilities and elimination trees for instant-runoff elections"
)]
pub struct Cli {
    /// Output format
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Write output to this file instead of standard output
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
    /// Defaults from a `key = value` file; command-line flags take precedence
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the IRV count on a tally or cast vote record
    Tabulate(TabulateArgs),
    /// Win probabilities from a distribution table, or from a partial tally with --fraction
    Predict(ModelArgs),
    /// Win probabilities after a recount of a tally
    Recount(RecountArgs),
    /// Replay a cast vote record precinct by precinct
    Replay(ReplayArgs),
    /// Brute-force check of the engine on a distribution table
    Oracle(OracleArgs),
    /// Elimination tree only
    Tree(ModelArgs),
}

#[derive(Debug, Args)]
pub struct Roles {
    /// Candidate codes, optionally with names: "G=Groh,F=Fields,N=Nelson"
    #[arg(long)]
    pub candidates: Option<String>,
}

#[derive(Debug, Args)]
pub struct TabulateArgs {
    pub input: PathBuf,
    /// Input is a cast vote record rather than a tally
    #[arg(long)]
    pub cvr: bool,
    #[arg(long, value_enum)]
    pub tie_policy: Option<TieArg>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub roles: Roles,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    pub input: PathBuf,
    #[arg(long)]
    pub bucket_size: Option<u64>,
    /// Treat the input as a tally covering this fraction of all ballots
    #[arg(long)]
    pub fraction: Option<f64>,
    #[arg(long)]
    pub dispersion: Option<f64>,
    #[command(flatten)]
    pub roles: Roles,
}

#[derive(Debug, Args)]
pub struct RecountArgs {
    pub input: PathBuf,
    #[arg(long, allow_negative_numbers = true)]
    pub mean_shift: Option<f64>,
    #[arg(long)]
    pub sd_shift: Option<f64>,
    #[arg(long)]
    pub trunc_z: Option<f64>,
    #[command(flatten)]
    pub roles: Roles,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    pub input: PathBuf,
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub bucket_size: Option<u64>,
    #[arg(long)]
    pub dispersion: Option<f64>,
    /// Three-candidate output as fraction,pA,pB,pC
    #[arg(long)]
    pub ternary: bool,
    #[command(flatten)]
    pub roles: Roles,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    pub input: PathBuf,
    #[arg(long)]
    pub bucket_size: Option<u64>,
    /// Monte Carlo sample count; exhaustive enumeration when absent
    #[arg(long)]
    pub samples: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub max_states: Option<u128>,
    #[command(flatten)]
    pub roles: Roles,
}

/// Flag value, else config value, else default.
struct Settings(BTreeMap<String, String>);

impl Settings {
    fn get<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T> {
        Ok(self.opt(flag, key)?.unwrap_or(default))
    }

    fn opt<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>> {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.0.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::Validation(format!("config value {key} = {v:?} is invalid"))),
        }
    }

    fn string(&self, flag: Option<String>, key: &str) -> Option<String> {
        flag.or_else(|| self.0.get(key).cloned())
    }
}

fn open(path: &Path) -> Result<File> {
    File::open(path)
        .map_err(|e| Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn roster_arg(spec: Option<String>) -> Result<Option<Roster>> {
    let Some(spec) = spec else { return Ok(None) };
    let list = spec
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|item| match item.split_once('=') {
            Some((c, n)) => (c.trim().to_string(), n.trim().to_string()),
            None => (item.to_string(), item.to_string()),
        })
        .collect();
    Roster::new(list).map(Some)
}

fn load_table(
    path: &Path,
    bucket: Option<u64>,
    roster: Option<&Roster>,
) -> Result<(Roster, ElectionModel)> {
    let t = parse_distribution_table(open(path)?, bucket, roster)?;
    let m = t.to_model()?;
    Ok((t.roster, m))
}

fn load_tally(path: &Path, roster: Option<&Roster>) -> Result<(Roster, TallyMap)> {
    parse_tally(open(path)?, roster)
}

/// Parses arguments from the process and runs; returns the exit status.
pub fn main_entry() -> i32 {
    let cli = Cli::parse();
    match run(&cli, &mut io::stdout().lock()) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Runs a parsed command, writing to `--output` if given, else to `stdout`.
pub fn run(cli: &Cli, stdout: &mut dyn Write) -> Result<()> {
    let settings = Settings(match &cli.config {
        Some(p) => parse_config(open(p)?)?,
        None => BTreeMap::new(),
    });
    let format = match cli.format {
        Some(f) => f,
        None => match settings.0.get("format").map(String::as_str) {
            None => Format::Text,
            Some(v) => Format::from_str(v, true)
                .map_err(|_| Error::Validation(format!("unknown format {v:?}")))?,
        },
    };
    let text = match &cli.command {
        Command::Tabulate(a) => cmd_tabulate(a, &settings, format)?,
        Command::Predict(a) => cmd_predict(a, &settings, format, true)?,
        Command::Tree(a) => cmd_predict(a, &settings, format, false)?,
        Command::Recount(a) => cmd_recount(a, &settings, format)?,
        Command::Replay(a) => cmd_replay(a, &settings, format)?,
        Command::Oracle(a) => cmd_oracle(a, &settings, format)?,
    };
    match &cli.output {
        Some(p) => std::fs::write(p, text)?,
        None => stdout.write_all(text.as_bytes())?,
    }
    Ok(())
}

fn tie_policy(a: &TabulateArgs, s: &Settings) -> Result<TiePolicy> {
    let seed = s.get(a.seed, "seed", 0)?;
    let arg = match a.tie_policy {
        Some(t) => t,
        None => match s.0.get("tie_policy") {
            None => TieArg::Random,
            Some(v) => TieArg::from_str(v, true)
                .map_err(|_| Error::Validation(format!("unknown tie policy {v:?}")))?,
        },
    };
    Ok(match arg {
        TieArg::EliminateAll => TiePolicy::EliminateAll,
        TieArg::Random => TiePolicy::UniformRandom { seed },
        TieArg::Error => TiePolicy::Error,
    })
}

fn cmd_tabulate(a: &TabulateArgs, s: &Settings, format: Format) -> Result<String> {
    let roster = roster_arg(s.string(a.roles.candidates.clone(), "candidates"))?;
    let (roster, tally) = if a.cvr {
        let roster = match roster {
            Some(r) => r,
            None => infer_cvr_roster(open(&a.input)?)?,
        };
        let cvr = parse_cvr(open(&a.input)?, &roster)?;
        let t = cvr.full_tally();
        (roster, t)
    } else {
        load_tally(&a.input, roster.as_ref())?
    };
    let outcome = run_irv(&tally, tie_policy(a, s)?).inspect_err(|e| {
        if let Error::Tie { tied } = e {
            let codes: Vec<&str> = tied
                .iter()
                .map(|&i| roster.code(CandidateId(i as u8)))
                .collect();
            eprintln!("tied candidates: {}", codes.join(", "));
        }
    })?;
    render_outcome(&outcome, &roster, format)
}

#[derive(Serialize)]
struct RoundView {
    round: usize,
    totals: BTreeMap<String, u64>,
    exhausted: u64,
    eliminated: Vec<String>,
}

fn render_outcome(o: &IrvOutcome, roster: &Roster, format: Format) -> Result<String> {
    let rounds: Vec<RoundView> = o
        .rounds
        .iter()
        .enumerate()
        .map(|(i, r)| RoundView {
            round: i + 1,
            totals: r
                .top_totals
                .iter()
                .map(|(&c, &v)| (roster.code(c).to_string(), v))
                .collect(),
            exhausted: r.exhausted,
            eliminated: r
                .eliminated
                .iter()
                .map(|c| roster.code(c).to_string())
                .collect(),
        })
        .collect();
    let winner = o.winner.map(|w| roster.code(w).to_string());
    let mut s = String::new();
    match format {
        Format::Json => {
            s = json(&serde_json::json!({ "rounds": rounds, "winner": winner }))?;
        }
        Format::Csv => {
            s.push_str("round,candidate,votes,exhausted,eliminated\n");
            for (r, rec) in rounds.iter().zip(&o.rounds) {
                for (&c, &v) in &rec.top_totals {
                    let out = rec.eliminated.contains(c);
                    writeln!(
                        s,
                        "{},{},{v},{},{out}",
                        r.round,
                        roster.code(c),
                        r.exhausted
                    )
                    .unwrap();
                }
            }
        }
        Format::Text | Format::Dot => {
            for (r, rec) in rounds.iter().zip(&o.rounds) {
                let totals: Vec<String> = rec
                    .top_totals
                    .iter()
                    .map(|(&c, v)| format!("{} {v}", roster.code(c)))
                    .collect();
                write!(
                    s,
                    "Round {}: {}, exhausted {}",
                    r.round,
                    totals.join(", "),
                    r.exhausted
                )
                .unwrap();
                if !r.eliminated.is_empty() {
                    write!(s, "; eliminated {}", r.eliminated.join(", ")).unwrap();
                }
                s.push('\n');
            }
            match &winner {
                Some(w) => writeln!(s, "Winner: {w}").unwrap(),
                None => writeln!(s, "Winner: none").unwrap(),
            }
        }
    }
    Ok(s)
}

fn json<T: Serialize>(v: &T) -> Result<String> {
    serde_json::to_string_pretty(v)
        .map(|mut s| {
            s.push('\n');
            s
        })
        .map_err(|e| Error::Validation(e.to_string()))
}

fn cmd_predict(a: &ModelArgs, s: &Settings, format: Format, with_win: bool) -> Result<String> {
    let roster = roster_arg(s.string(a.roles.candidates.clone(), "candidates"))?;
    let bucket = s.opt(a.bucket_size, "bucket_size")?;
    let (roster, model) = match s.opt(a.fraction, "fraction")? {
        None => load_table(&a.input, bucket, roster.as_ref())?,
        Some(fraction) => {
            let (roster, tally) = load_tally(&a.input, roster.as_ref())?;
            let bucket = bucket.ok_or_else(|| {
                Error::Validation("--bucket-size is required with --fraction".into())
            })?;
            let p = PartialCountParams {
                fraction_counted: fraction,
                dispersion: s.get(
                    a.dispersion,
                    "dispersion",
                    PartialCountParams::DEFAULT_DISPERSION,
                )?,
                bucket_size: bucket,
            };
            let m = partial_count_model(&tally, &p)?;
            (roster, m)
        }
    };
    let tree = win_vector_memoized(&model)?;
    render_tree(&tree, &roster, format, with_win)
}

fn cmd_recount(a: &RecountArgs, s: &Settings, format: Format) -> Result<String> {
    let roster = roster_arg(s.string(a.roles.candidates.clone(), "candidates"))?;
    let (roster, tally) = load_tally(&a.input, roster.as_ref())?;
    let d = RecountParams::default();
    let p = RecountParams {
        mean_shift: s.get(a.mean_shift, "mean_shift", d.mean_shift)?,
        sd_shift: s.get(a.sd_shift, "sd_shift", d.sd_shift)?,
        trunc_z: s.get(a.trunc_z, "trunc_z", d.trunc_z)?,
    };
    let tree = win_vector_memoized(&recount_model(&tally, &p)?)?;
    render_tree(&tree, &roster, format, true)
}

fn win_lines(roster: &Roster, win: &[f64]) -> String {
    let mut s = String::new();
    for c in roster.candidates() {
        writeln!(s, "{:<8} {:>6}", c.code, percent(win[c.index.index()])).unwrap();
    }
    s
}

fn render_tree(
    tree: &EliminationTree,
    roster: &Roster,
    format: Format,
    with_win: bool,
) -> Result<String> {
    Ok(match format {
        Format::Json => {
            let mut s = tree_to_json(tree, roster)?;
            s.push('\n');
            s
        }
        Format::Dot => tree_to_dot(tree, roster),
        Format::Csv => {
            let mut s = String::new();
            if with_win {
                s.push_str("candidate,win\n");
                for c in roster.candidates() {
                    writeln!(s, "{},{}", c.code, tree.win().get(c.index)).unwrap();
                }
            } else {
                s.push_str("eliminated,remaining,edge_weight,path_prob\n");
                for n in &tree.nodes {
                    let order: String = n
                        .order
                        .eliminated()
                        .iter()
                        .map(|&c| roster.code(c))
                        .collect();
                    let rem: String = n.remaining.iter().map(|c| roster.code(c)).collect();
                    writeln!(s, "{order},{rem},{},{}", n.edge_weight, n.path_prob).unwrap();
                }
            }
            s
        }
        Format::Text => {
            let mut s = String::new();
            if with_win {
                s.push_str("Win probabilities\n");
                s.push_str(&win_lines(roster, tree.win().as_slice()));
                s.push_str("\nElimination tree\n");
            }
            text_tree(tree, roster, 0, 0, &mut s);
            s
        }
    })
}

fn text_tree(tree: &EliminationTree, roster: &Roster, idx: usize, depth: usize, out: &mut String) {
    let n = &tree.nodes[idx];
    let label = roster.format_set(n.remaining);
    if depth == 0 {
        writeln!(out, "{label}").unwrap();
    } else {
        writeln!(
            out,
            "{}{label}  {}",
            "  ".repeat(depth),
            percent(n.path_prob)
        )
        .unwrap();
    }
    for &c in &n.children {
        text_tree(tree, roster, c, depth + 1, out);
    }
}

fn cmd_replay(a: &ReplayArgs, s: &Settings, format: Format) -> Result<String> {
    let roster = match roster_arg(s.string(a.roles.candidates.clone(), "candidates"))? {
        Some(r) => r,
        None => infer_cvr_roster(open(&a.input)?)?,
    };
    let cvr = parse_cvr(open(&a.input)?, &roster)?;
    let step = s.get(a.step, "step", 0.005)?;
    let seed = s.get(a.seed, "seed", 0)?;
    let bucket = s
        .opt(a.bucket_size, "bucket_size")?
        .ok_or_else(|| Error::Validation("--bucket-size is required for replay".into()))?;
    let params = PartialCountParams {
        fraction_counted: 1.0,
        dispersion: s.get(
            a.dispersion,
            "dispersion",
            PartialCountParams::DEFAULT_DISPERSION,
        )?,
        bucket_size: bucket,
    };
    let scenario = ReplayScenario::shuffled(&cvr, step, seed)?;
    let points = replay(&cvr, &scenario, &params)?;
    match format {
        Format::Json => json(&serde_json::json!({ "scenario": scenario, "points": points })),
        _ => {
            let mut buf = Vec::new();
            write_replay_csv(&points, &roster, &scenario, a.ternary, &mut buf)?;
            Ok(String::from_utf8(buf).expect("csv output is utf-8"))
        }
    }
}

fn cmd_oracle(a: &OracleArgs, s: &Settings, format: Format) -> Result<String> {
    let roster = roster_arg(s.string(a.roles.candidates.clone(), "candidates"))?;
    let (roster, model) = load_table(
        &a.input,
        s.opt(a.bucket_size, "bucket_size")?,
        roster.as_ref(),
    )?;
    let report = match s.opt(a.samples, "samples")? {
        Some(n) => mc_win_probs(&model, n, s.get(a.seed, "seed", 0)?)?,
        None => exhaustive_win_probs(
            &model,
            s.get(a.max_states, "max_states", DEFAULT_MAX_STATES)?,
        )?,
    };
    render_oracle(&report, &roster, format)
}

fn render_oracle(r: &OracleReport, roster: &Roster, format: Format) -> Result<String> {
    match format {
        Format::Json => json(r),
        Format::Csv => {
            let mut s = String::from("candidate,oracle,std_error,engine\n");
            for c in roster.candidates() {
                let i = c.index.index();
                writeln!(
                    s,
                    "{},{},{},{}",
                    c.code, r.win_probs.0[i], r.std_error[i], r.engine_win.0[i]
                )
                .unwrap();
            }
            Ok(s)
        }
        Format::Text | Format::Dot => {
            let mut s = String::new();
            match r.seed {
                Some(seed) => writeln!(
                    s,
                    "Monte Carlo: {} samples, seed {seed}",
                    r.samples_or_states
                ),
                None => writeln!(
                    s,
                    "Exhaustive: {} joint states, total weight {:.12}",
                    r.samples_or_states, r.total_weight
                ),
            }
            .unwrap();
            writeln!(
                s,
                "{:<8} {:>10} {:>10} {:>10}",
                "", "oracle", "std err", "engine"
            )
            .unwrap();
            for c in roster.candidates() {
                let i = c.index.index();
                writeln!(
                    s,
                    "{:<8} {:>10.6} {:>10.6} {:>10.6}",
                    c.code, r.win_probs.0[i], r.std_error[i], r.engine_win.0[i]
                )
                .unwrap();
            }
            writeln!(s, "max |engine - oracle| = {:.6}", r.max_abs_gap_vs_engine).unwrap();
            Ok(s)
        }
    }
}
