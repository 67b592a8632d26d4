//! Command-line front end.
//!
//! Exit status is 0 when every check in the report passed, 1 when any failed,
//! and 2 for usage errors.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::analysis::{complexity_profile, max_exponent_factor, Rational};
use crate::certificate::{builtin_certificate, parse_certificate, replay, ReplayOptions, StepStatus};
use crate::error::{Error, Result};
use crate::limits::{
    compute_constants, conjecture_scan, exponent_transfer_demo, image_prefix, letter_frequencies, role_order,
    scan_tables, FrequencyMethod, DEFAULT_TOLERANCE,
};
use crate::search::{
    cache_gc, discard_initial_block, enumerate_return_words_partial, longest_avoiding_cached, AvoidanceSpec,
    SearchCache, DEFAULT_RETURN_CAP, DEFAULT_SEARCH_CAP,
};
use crate::structure::{enumerate_cases, table_row, tables, verify_tables, CaseId, Orientation, TableId};
use crate::word::{fixed_point_prefix, Letter, Morphism, Word};

pub const CACHE_ENV: &str = "WORDBENCH_CACHE";

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "wordbench", version, about = "Checks for ternary words with factor complexity 2n+1")]
pub struct Cli {
    #[command(flatten)]
    pub config: RunConfig,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct RunConfig {
    /// Repetitions of exponent at least this value are forbidden.
    #[arg(long, global = true, default_value = "5/2", value_parser = parse_threshold)]
    pub threshold: Rational,
    /// Search depth limit.
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    pub cap: Option<u64>,
    /// Persistent search cache file.
    #[arg(long, global = true, env = CACHE_ENV)]
    pub cache: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Prefix of the fixed point of a morphism.
    Fixpoint {
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, default_value = "[01,2,02]")]
        morphism: Morphism,
        #[arg(long, default_value = "0", value_parser = parse_letter)]
        seed: Letter,
    },
    /// Largest exponent of a factor of a word, or of a prefix of G.
    Critexp {
        #[arg(long, conflicts_with = "prefix")]
        word: Option<Word>,
        #[arg(long, default_value_t = 20_000)]
        prefix: usize,
    },
    /// Factor counts C(1..=n_max) of a prefix of G or of a morphic image of G.
    Complexity {
        #[arg(long, default_value_t = 30)]
        n_max: usize,
        #[arg(long, default_value_t = 4000)]
        prefix: usize,
        #[arg(long)]
        morphism: Option<Morphism>,
        /// Apply the letter-reversed morphism.
        #[arg(long, requires = "morphism")]
        reverse: bool,
    },
    /// Longest word avoiding the forbidden factors and the threshold.
    Longest {
        #[arg(long, value_delimiter = ',', value_parser = parse_forbid_item)]
        forbid: Vec<Vec<Word>>,
    },
    /// Return words of x under the forbidden factors.
    Returns {
        #[arg(long, value_delimiter = ',', value_parser = parse_forbid_item)]
        forbid: Vec<Vec<Word>>,
        #[arg(long)]
        x: Word,
    },
    /// Justifies dropping a block that can only occur first.
    Discard {
        #[arg(long, value_delimiter = ',', required = true)]
        blocks: Vec<Word>,
        #[arg(long)]
        r: Word,
    },
    /// Checks the construction hypotheses for every table row.
    Tables,
    /// Enumerates strongly connected five-edge digraphs up to permutation.
    Cases,
    /// Replays a case-analysis certificate.
    Replay {
        /// `builtin` or a path to a certificate file.
        #[arg(long, default_value = "builtin")]
        cert: String,
        /// Report flagged steps as failures.
        #[arg(long)]
        strict: bool,
        /// Skip the searches marked slow and assume their conclusions.
        #[arg(long)]
        skip_slow: bool,
    },
    /// Complexity and exponent scan of table morphism images (evidence only).
    Scan {
        /// A table id such as g9 or h11; all rows when omitted.
        #[arg(long)]
        table: Option<TableId>,
        #[arg(long, default_value_t = 30)]
        n_max: usize,
        #[arg(long, default_value_t = 10_000)]
        prefix: usize,
        /// Also push a near-critical repetition of G through each morphism.
        #[arg(long)]
        transfer: Option<f64>,
    },
    /// λ and μ.
    Constants {
        #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
        tolerance: f64,
    },
    /// Letter frequencies of G.
    Freq {
        /// Count letters in a prefix of this length instead of using the eigenvector.
        #[arg(long)]
        empirical: Option<usize>,
    },
    /// Removes cache records written under an older hashing scheme.
    CacheGc,
}

fn parse_threshold(s: &str) -> std::result::Result<Rational, String> {
    let t: Rational = s.parse().map_err(|e: Error| e.to_string())?;
    if t <= Rational::integer(1) {
        return Err(format!("threshold must exceed 1, got {t}"));
    }
    Ok(t)
}

fn parse_letter(s: &str) -> std::result::Result<Letter, String> {
    let mut chars = s.chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) => Letter::from_char(c).map_err(|e| e.to_string()),
        _ => Err(format!("expected a single letter 0, 1 or 2, got {s:?}")),
    }
}

/// A word, or a case name `T1`..`T7` standing for its omitted length-2 words.
fn parse_forbid_item(s: &str) -> std::result::Result<Vec<Word>, String> {
    if let Ok(case) = s.parse::<CaseId>() {
        return Ok(case.omitted().into_iter().collect());
    }
    let w: Word = s.parse().map_err(|e: Error| e.to_string())?;
    if w.is_empty() {
        return Err("forbidden words must be nonempty".into());
    }
    Ok(vec![w])
}

/// Parses `args` (including the program name), runs the command and writes
/// the report to `out`. Returns the exit status.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let target: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = write!(target, "{}", e.render());
            return code;
        }
    };
    match execute(&cli) {
        Ok(report) => {
            let text = match cli.config.format {
                Format::Text => report.text,
                Format::Json => serde_json::to_string_pretty(&report.json).expect("reports serialize") + "\n",
            };
            let _ = out.write_all(text.as_bytes());
            if report.passed {
                EXIT_OK
            } else {
                EXIT_FAILURE
            }
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_FAILURE
        }
    }
}

struct Report {
    passed: bool,
    text: String,
    json: serde_json::Value,
}

impl Report {
    fn new(passed: bool, text: String, json: impl Serialize) -> Report {
        Report { passed, text, json: serde_json::to_value(json).expect("reports serialize") }
    }
}

fn open_cache(config: &RunConfig) -> Result<Option<SearchCache>> {
    config.cache.as_ref().map(SearchCache::open).transpose()
}

fn spec_from(forbid: &[Vec<Word>], threshold: Rational) -> Result<AvoidanceSpec> {
    AvoidanceSpec::new(forbid.iter().flatten().cloned(), threshold)
}

fn cap_or(config: &RunConfig, default: usize) -> usize {
    config.cap.map_or(default, |c| c as usize)
}

fn execute(cli: &Cli) -> Result<Report> {
    let config = &cli.config;
    match &cli.command {
        Command::Fixpoint { n, morphism, seed } => {
            let w = fixed_point_prefix(morphism, *seed, *n)?;
            Ok(Report::new(true, format!("{w}\n"), serde_json::json!({ "morphism": morphism.to_string(), "prefix": w })))
        }
        Command::Critexp { word, prefix } => {
            let w = match word {
                Some(w) => w.clone(),
                None => fixed_point_prefix(&Morphism::gamma(), Letter::ZERO, *prefix)?,
            };
            let (exponent, witness) = max_exponent_factor(&w)?;
            let factor = witness.factor(&w);
            let shown = if factor.len() <= 80 { factor.to_string() } else { format!("of length {}", factor.len()) };
            let text = format!(
                "max exponent {exponent} ≈ {:.7} period {} start {} factor {shown}\n",
                exponent.to_f64(),
                witness.period,
                witness.start
            );
            let json = serde_json::json!({
                "length": w.len(), "max_exponent": exponent, "decimal": exponent.to_f64(),
                "start": witness.start, "period": witness.period, "factor": factor,
            });
            Ok(Report::new(true, text, json))
        }
        Command::Complexity { n_max, prefix, morphism, reverse } => {
            let w = match morphism {
                None => fixed_point_prefix(&Morphism::gamma(), Letter::ZERO, *prefix)?,
                Some(m) => {
                    let orientation = if *reverse { Orientation::Reverse } else { Orientation::Forward };
                    image_prefix(m, orientation, *prefix)?
                }
            };
            let profile = complexity_profile(&w, *n_max)?;
            let ok_up_to = profile.matches_2n_plus_1_up_to();
            let mut text = String::new();
            for e in &profile.entries {
                let mark = if e.count == 2 * e.n + 1 && e.stabilized { "ok" } else { "FAIL" };
                text += &format!("{:>4} {:>6} {}{}\n", e.n, e.count, mark, if e.stabilized { "" } else { " unstable" });
            }
            text += &format!("C(n) = 2n+1 up to n = {ok_up_to} of {n_max}\n");
            Ok(Report::new(ok_up_to == *n_max, text, &profile))
        }
        Command::Longest { forbid } => {
            let spec = spec_from(forbid, config.threshold)?;
            let cache = open_cache(config)?;
            let outcome = longest_avoiding_cached(&spec, cap_or(config, DEFAULT_SEARCH_CAP), cache.as_ref())?;
            Ok(Report::new(true, format!("{outcome}\n"), &outcome))
        }
        Command::Returns { forbid, x } => {
            let spec = spec_from(forbid, config.threshold)?;
            let found = enumerate_return_words_partial(x, &spec, cap_or(config, DEFAULT_RETURN_CAP))?;
            let blocks: Vec<String> = found.blocks.iter().map(Word::to_string).collect();
            let text = format!("{} {}\n", found.status, blocks.join(","));
            Ok(Report::new(true, text, serde_json::json!({ "status": found.status, "blocks": blocks })))
        }
        Command::Discard { blocks, r } => match discard_initial_block(blocks, r, config.threshold) {
            Ok(j) => {
                let text = format!(
                    "pass suffix={} follower={} context={} repetition={} exponent={}\n",
                    j.suffix,
                    j.follower,
                    j.context,
                    j.repetition,
                    j.witness.exponent()
                );
                let json = serde_json::json!({
                    "status": "pass", "suffix": j.suffix, "follower": j.follower, "context": j.context,
                    "repetition": j.repetition, "exponent": j.witness.exponent(),
                });
                Ok(Report::new(true, text, json))
            }
            Err(e @ Error::NotJustified { .. }) => Ok(Report::new(
                false,
                format!("fail {e}\n"),
                serde_json::json!({ "status": "fail", "reason": e.to_string() }),
            )),
            Err(e) => Err(e),
        },
        Command::Tables => {
            let report = verify_tables();
            let mut text = String::new();
            for row in &report.rows {
                text += &format!("{:<4} {:<40} {}", row.id.to_string(), row.morphism, if row.passed { "pass" } else { "fail" });
                if !row.passed {
                    text += &format!("  {}", row.diagnostics.join("; "));
                }
                text.push('\n');
            }
            Ok(Report::new(report.all_passed(), text, &report))
        }
        Command::Cases => {
            let report = enumerate_cases()?;
            let nontrivial = report.nontrivial_stabilizers();
            let mut text = format!(
                "{} five-edge subsets, {} strongly connected, {} orbits\n",
                report.five_edge_subsets,
                report.strongly_connected,
                report.orbits.len()
            );
            for o in &report.orbits {
                let omitted: Vec<String> = o.case.omitted().iter().map(Word::to_string).collect();
                text += &format!(
                    "{} omits {:<14} orbit {} stabilizer {}\n",
                    o.case,
                    omitted.join(","),
                    o.orbit_size,
                    o.stabilizer_size
                );
            }
            if !nontrivial.is_empty() {
                let names: Vec<String> = nontrivial.iter().map(CaseId::to_string).collect();
                text += &format!("fail: nontrivial automorphisms in {}\n", names.join(","));
            }
            Ok(Report::new(report.orbits.len() == 7 && nontrivial.is_empty(), text, &report))
        }
        Command::Replay { cert, strict, skip_slow } => {
            let certificate = if cert == "builtin" {
                builtin_certificate()
            } else {
                parse_certificate(&std::fs::read_to_string(cert)?)?
            };
            let cache = open_cache(config)?;
            let opts = ReplayOptions { strict: *strict, skip_slow: *skip_slow, ..ReplayOptions::default() };
            let report = replay(&certificate, &opts, cache.as_ref());
            let mut text = String::new();
            for e in report.entries.iter().filter(|e| e.status != StepStatus::Pass) {
                text += &format!("{} {} #{} {}", e.status, e.path, e.step_index, e.kind);
                if let Some(c) = &e.claimed {
                    text += &format!(" claimed={c}");
                }
                if let Some(m) = &e.measured {
                    text += &format!(" measured={m}");
                }
                if let Some(d) = &e.detail {
                    text += &format!(" ({d})");
                }
                text.push('\n');
            }
            let s = &report.summary;
            text += &format!(
                "steps {} pass {} fail {} flag {} skipped {}; contradictions {}; morphism leaves {} ({} distinct rows)\n",
                s.steps,
                s.pass,
                s.fail,
                s.flag,
                s.skipped,
                s.contradictions,
                s.morphism_leaves,
                s.distinct_tables.len()
            );
            if !s.unclosed.is_empty() {
                text += &format!("unclosed: {}\n", s.unclosed.join(" "));
            }
            Ok(Report::new(report.is_success(), text, &report))
        }
        Command::Scan { table, n_max, prefix, transfer } => {
            let rows = match table {
                Some(id) => {
                    let row = table_row(*id).ok_or_else(|| Error::Parse(format!("no table row {id}")))?;
                    let report = conjecture_scan(&role_order(&row), id.kind.orientation(), *n_max, *prefix)?;
                    vec![(row, report)]
                }
                None => scan_tables(*n_max, *prefix)?,
            };
            let mut text = String::new();
            let mut json = Vec::new();
            let mut passed = true;
            for (row, r) in &rows {
                passed &= r.passed();
                text += &format!(
                    "{:<4} {:<40} C(n)=2n+1 up to {:>3}  max exponent {} ≈ {:.6}  mu gap {:+.6}  {}\n",
                    row.id.to_string(),
                    r.morphism,
                    r.complexity_ok_up_to,
                    r.max_exponent,
                    r.max_exponent.to_f64(),
                    r.mu_gap,
                    if r.passed() { "evidence" } else { "FAIL" }
                );
                let mut entry = serde_json::to_value(r).expect("reports serialize");
                entry["table"] = serde_json::Value::String(row.id.to_string());
                if let Some(eps) = transfer {
                    let t = exponent_transfer_demo(&role_order(row), *eps, 20_000)?;
                    passed &= t.passed;
                    text += &format!(
                        "     transfer: |uuu'|/|u| = {} -> image ratio {} >= bound {:.6}: {}\n",
                        t.source_exponent,
                        t.image_ratio,
                        t.lower_bound,
                        if t.passed { "pass" } else { "FAIL" }
                    );
                    entry["transfer"] = serde_json::to_value(&t).expect("reports serialize");
                }
                json.push(entry);
            }
            if table.is_none() {
                text += &format!("{} rows scanned (evidence, not proof)\n", tables().len());
            }
            Ok(Report::new(passed, text, json))
        }
        Command::Constants { tolerance } => {
            let c = compute_constants(*tolerance);
            let ok = c.cubic_residual < 1e-12 && c.newton_agreement < 1e-12;
            let text = format!(
                "lambda {:.15}\nmu     {:.15}\ncubic residual {:.1e}, newton agreement {:.1e}\n",
                c.lambda, c.mu, c.cubic_residual, c.newton_agreement
            );
            Ok(Report::new(ok, text, c))
        }
        Command::Freq { empirical } => {
            let method = match empirical {
                Some(n) => FrequencyMethod::Empirical(*n),
                None => FrequencyMethod::Eigenvector,
            };
            let f = letter_frequencies(method)?;
            let text = format!("rho0 {:.10}\nrho1 {:.10}\nrho2 {:.10}\n", f.rho[0], f.rho[1], f.rho[2]);
            Ok(Report::new(true, text, f))
        }
        Command::CacheGc => {
            let path = config
                .cache
                .as_ref()
                .ok_or_else(|| Error::Io(format!("no cache path; pass --cache or set {CACHE_ENV}")))?;
            let evicted = cache_gc(path)?;
            Ok(Report::new(true, format!("evicted {evicted}\n"), serde_json::json!({ "evicted": evicted })))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(std::iter::once("wordbench").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn fixpoint_prefix() {
        assert_eq!(run_args(&["fixpoint", "--n", "9"]), (0, "012020102\n".into(), String::new()));
    }

    #[test]
    fn forbid_accepts_case_names() {
        let (code, by_name, _) = run_args(&["longest", "--forbid", "T1,010", "--cap", "50"]);
        assert_eq!(code, 0);
        let (_, by_words, _) = run_args(&["longest", "--forbid", "11,12,21,22,010", "--cap", "50"]);
        assert_eq!(by_name, by_words);
        assert!(by_name.starts_with("exhausted "), "{by_name}");
    }

    #[test]
    fn usage_errors_exit_2() {
        let (code, _, err) = run_args(&["longest", "--forbid", "0x1"]);
        assert_eq!(code, EXIT_USAGE);
        assert!(err.contains("--forbid"), "{err}");
        assert_eq!(run_args(&["longest", "--threshold", "1"]).0, EXIT_USAGE);
        assert_eq!(run_args(&["longest", "--cap", "0"]).0, EXIT_USAGE);
        assert_eq!(run_args(&["frobnicate"]).0, EXIT_USAGE);
        assert_eq!(run_args(&["--help"]).0, EXIT_OK);
    }

    #[test]
    fn discard_status() {
        let (code, out, _) = run_args(&["discard", "--blocks", "0012,001012,0012012,001012012", "--r", "0012"]);
        assert_eq!(code, 0, "{out}");
        assert!(out.contains("context=0120012001"), "{out}");
        let (code, _, _) = run_args(&["discard", "--blocks", "01,02", "--r", "01"]);
        assert_eq!(code, EXIT_FAILURE);
    }

    #[test]
    fn json_output_parses() {
        let (code, out, _) = run_args(&["--format", "json", "returns", "--forbid", "T3,101", "--x", "2"]);
        assert_eq!(code, 0);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["blocks"], serde_json::json!(["20", "201", "2010"]));
    }

    #[test]
    fn cache_is_transparent() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.tsv");
        let path = path.to_str().unwrap();
        let args = ["longest", "--forbid", "T7,0120", "--cache", path];
        let cold = run_args(&args);
        let warm = run_args(&args);
        assert_eq!(cold, warm);
        assert_eq!(run_args(&["cache-gc", "--cache", path]).1, "evicted 0\n");
    }
}
