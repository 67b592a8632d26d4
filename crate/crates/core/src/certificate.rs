//! Case-analysis certificates and their replay.
//!
//! A certificate is a tree of cases. Each node adds omitted words to the
//! context inherited from its parent and lists the steps that either split the
//! case further, reach a contradiction, reach a table morphism, or point at
//! another node that covers it. Replay re-runs every step against the search and
//! structure modules and reports pass, fail or flag per step.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{word_exponent, Rational};
use crate::error::{Error, Result};
use crate::search::{
    discard_initial_block, enumerate_return_words_partial, prove_all_contained, AvoidanceSpec, SearchCache,
    SearchStatus, DEFAULT_RETURN_CAP,
};
use crate::structure::{assign_roles, check, enumerate_cases, table_row, CaseId, Orientation, TableId};
use crate::word::{conjugate_left, conjugate_right, Letter, Word};

pub const CERTIFICATE_JSON: &str = include_str!("../data/certificate.json");
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Certificate {
    pub format: u32,
    #[serde(default = "default_threshold")]
    pub threshold: Rational,
    pub cases: Vec<CaseNode>,
}

fn default_threshold() -> Rational {
    Rational::FIVE_HALVES
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseNode {
    pub case: String,
    #[serde(default)]
    pub omits: Vec<Word>,
    pub steps: Vec<Step>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<CaseNode>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Step {
    #[serde(flatten)]
    pub kind: StepKind,
    /// Known discrepancy between the text and the tables. A flagged step that
    /// passes is reported as a flag, or as a failure in strict mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flag: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundMode {
    Exact,
    AtMost,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepKind {
    /// Longest word avoiding the context plus one candidate, for each candidate.
    SearchBound {
        candidates: Vec<Word>,
        bound: usize,
        mode: BoundMode,
        #[serde(default, skip_serializing_if = "std::ops::Not::not")]
        slow: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cap: Option<usize>,
    },
    ConcludeContains { words: Vec<Word> },
    /// More than `2n+1` length-`n` words are known to occur.
    Pigeonhole { n: usize },
    /// The known length-`n` words plus all alternatives exceed `2n+1`, so one
    /// alternative is omitted; one child per alternative.
    OmitSplit { n: usize, alternatives: Vec<Word> },
    /// Exactly `2n+1` length-`n` words are known to occur, so `omitted` does not.
    DeduceOmitted { n: usize, contained: Vec<Word>, omitted: Word },
    /// Every one-letter extension of `word` on `direction` is excluded.
    ExtensionOmit { word: Word, direction: Side },
    ReturnWords {
        x: Word,
        blocks: Vec<Word>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cap: Option<usize>,
    },
    DiscardBlock {
        r: Word,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        witness: Option<Word>,
    },
    /// `left` moves `piece` from the front of every block to its end; `right`
    /// moves it from the end to the front.
    Roll { direction: Side, piece: Word },
    Invoke { orientation: Orientation, table: TableId },
    CaseEnumeration,
    Contradiction,
    MorphismReached { table: TableId },
    CoveredBy { path: String },
}

impl StepKind {
    pub fn name(&self) -> &'static str {
        match self {
            StepKind::SearchBound { .. } => "search_bound",
            StepKind::ConcludeContains { .. } => "conclude_contains",
            StepKind::Pigeonhole { .. } => "pigeonhole",
            StepKind::OmitSplit { .. } => "omit_split",
            StepKind::DeduceOmitted { .. } => "deduce_omitted",
            StepKind::ExtensionOmit { .. } => "extension_omit",
            StepKind::ReturnWords { .. } => "return_words",
            StepKind::DiscardBlock { .. } => "discard_block",
            StepKind::Roll { .. } => "roll",
            StepKind::Invoke { .. } => "invoke",
            StepKind::CaseEnumeration => "case_enumeration",
            StepKind::Contradiction => "contradiction",
            StepKind::MorphismReached { .. } => "morphism_reached",
            StepKind::CoveredBy { .. } => "covered_by",
        }
    }

    pub fn is_terminal(&self) -> bool {
        matches!(self, StepKind::Contradiction | StepKind::MorphismReached { .. } | StepKind::CoveredBy { .. })
    }

    pub fn is_slow(&self) -> bool {
        matches!(self, StepKind::SearchBound { slow: true, .. })
    }
}

pub fn builtin_certificate() -> Certificate {
    parse_certificate(CERTIFICATE_JSON).expect("shipped certificate is valid")
}

pub fn parse_certificate(text: &str) -> Result<Certificate> {
    if text.trim().is_empty() {
        return Err(schema("line 1 column 1", "empty certificate"));
    }
    let cert: Certificate = serde_json::from_str(text)
        .map_err(|e| schema(&format!("line {} column {}", e.line(), e.column()), &e.to_string()))?;
    validate(&cert)?;
    Ok(cert)
}

fn schema(location: &str, message: &str) -> Error {
    Error::Schema { location: location.to_string(), message: message.to_string() }
}

fn join(words: &[Word]) -> String {
    words.iter().map(Word::to_string).collect::<Vec<_>>().join(",")
}

fn join_set(words: &BTreeSet<Word>) -> String {
    words.iter().map(Word::to_string).collect::<Vec<_>>().join(",")
}

/// Context a node starts from: everything its ancestors omitted or deduced
/// before splitting, plus its own `omits`.
pub fn entry_contexts(cert: &Certificate) -> BTreeMap<String, BTreeSet<Word>> {
    fn walk(node: &CaseNode, prefix: &str, inherited: &BTreeSet<Word>, out: &mut BTreeMap<String, BTreeSet<Word>>) {
        let path = child_path(prefix, &node.case);
        let mut ctx = inherited.clone();
        ctx.extend(node.omits.iter().cloned());
        out.insert(path.clone(), ctx.clone());
        for step in &node.steps {
            match &step.kind {
                StepKind::DeduceOmitted { omitted, .. } => {
                    ctx.insert(omitted.clone());
                }
                StepKind::ExtensionOmit { word, .. } => {
                    ctx.insert(word.clone());
                }
                _ => {}
            }
        }
        for child in &node.children {
            walk(child, &path, &ctx, out);
        }
    }
    let mut out = BTreeMap::new();
    for node in &cert.cases {
        walk(node, "", &BTreeSet::new(), &mut out);
    }
    out
}

fn child_path(prefix: &str, case: &str) -> String {
    if prefix.is_empty() {
        case.to_string()
    } else {
        format!("{prefix}/{case}")
    }
}

fn validate(cert: &Certificate) -> Result<()> {
    if cert.format != FORMAT_VERSION {
        return Err(schema("format", &format!("unsupported format {}, expected {FORMAT_VERSION}", cert.format)));
    }
    if cert.threshold <= Rational::integer(1) {
        return Err(schema("threshold", "threshold must exceed 1"));
    }
    if cert.cases.is_empty() {
        return Err(schema("cases", "certificate has no cases"));
    }
    let contexts = entry_contexts(cert);
    let mut labels = BTreeSet::new();
    for node in &cert.cases {
        if !labels.insert(&node.case) {
            return Err(schema(&node.case, "duplicate top-level case"));
        }
        validate_node(cert, node, "", &contexts)?;
    }
    Ok(())
}

fn validate_node(
    cert: &Certificate,
    node: &CaseNode,
    prefix: &str,
    contexts: &BTreeMap<String, BTreeSet<Word>>,
) -> Result<()> {
    let path = child_path(prefix, &node.case);
    if node.case.is_empty() || node.case.contains('/') {
        return Err(schema(&path, "case label must be nonempty and must not contain '/'"));
    }
    if node.omits.iter().any(|w| w.is_empty()) {
        return Err(schema(&path, "omitted words must be nonempty"));
    }
    if node.steps.is_empty() {
        return Err(schema(&path, "case has no steps"));
    }
    let mut ctx = AvoidanceSpec::new(contexts[&path].iter().cloned(), cert.threshold)
        .map_err(|e| schema(&path, &e.to_string()))?;
    let last = node.steps.len() - 1;
    let mut split: Option<&[Word]> = None;

    for (i, step) in node.steps.iter().enumerate() {
        let at = format!("{path} step {i}");
        let fail = |m: String| Err(schema(&at, &m));
        let check_words = |words: &[Word], ctx: &AvoidanceSpec| -> Result<()> {
            match words.iter().find(|w| w.is_empty() || !ctx.avoided_by(w)) {
                Some(w) => Err(schema(&at, &format!("word {w:?} violates the case context"))),
                None => Ok(()),
            }
        };
        if step.kind.is_terminal() && i != last {
            return fail(format!("{} must be the last step", step.kind.name()));
        }
        match &step.kind {
            StepKind::SearchBound { candidates, .. } => {
                if candidates.is_empty() {
                    return fail("search has no candidates".into());
                }
                check_words(candidates, &ctx)?;
            }
            StepKind::ConcludeContains { words } => check_words(words, &ctx)?,
            StepKind::Pigeonhole { n } if *n == 0 => return fail("pigeonhole length must be positive".into()),
            StepKind::Pigeonhole { .. } => {}
            StepKind::OmitSplit { n, alternatives } => {
                if alternatives.is_empty() {
                    return fail("omit_split names no alternatives".into());
                }
                if i != last {
                    return fail("omit_split must be the last step".into());
                }
                if let Some(w) = alternatives.iter().find(|w| w.len() != *n) {
                    return fail(format!("alternative {w} does not have length {n}"));
                }
                check_words(alternatives, &ctx)?;
                split = Some(alternatives);
            }
            StepKind::DeduceOmitted { n, contained, omitted } => {
                if let Some(w) = contained.iter().chain([omitted]).find(|w| w.len() != *n) {
                    return fail(format!("{w} does not have length {n}"));
                }
                check_words(contained, &ctx)?;
                ctx = ctx.with_forbidden([omitted.clone()]);
            }
            StepKind::ExtensionOmit { word, .. } => {
                check_words(std::slice::from_ref(word), &ctx)?;
                ctx = ctx.with_forbidden([word.clone()]);
            }
            StepKind::ReturnWords { x, blocks, .. } => {
                check_words(std::slice::from_ref(x), &ctx)?;
                check_words(blocks, &ctx)?;
            }
            StepKind::DiscardBlock { r, .. } => check_words(std::slice::from_ref(r), &ctx)?,
            StepKind::Roll { piece, .. } if piece.is_empty() => return fail("roll piece is empty".into()),
            StepKind::Roll { .. } => {}
            StepKind::Invoke { table, .. } | StepKind::MorphismReached { table } => {
                if table_row(*table).is_none() {
                    return fail(format!("no table row {table}"));
                }
            }
            StepKind::CaseEnumeration | StepKind::Contradiction => {}
            StepKind::CoveredBy { path: target } => {
                if !contexts.contains_key(target) {
                    return fail(format!("covered_by names unknown case {target}"));
                }
            }
        }
    }

    match split {
        Some(alternatives) => {
            let labels: BTreeSet<&str> = node.children.iter().map(|c| c.case.as_str()).collect();
            let expected: BTreeSet<String> = alternatives.iter().map(Word::to_string).collect();
            let expected: BTreeSet<&str> = expected.iter().map(String::as_str).collect();
            if labels != expected || labels.len() != node.children.len() {
                return Err(schema(&path, "children must be exactly one case per split alternative"));
            }
            for c in &node.children {
                if !c.omits.iter().any(|w| w.to_string() == c.case) {
                    return Err(schema(&child_path(&path, &c.case), "child must omit its split alternative"));
                }
            }
        }
        None => {
            if !node.children.is_empty() {
                return Err(schema(&path, "children are only allowed after omit_split"));
            }
            if !node.steps[last].kind.is_terminal() {
                return Err(schema(&path, "case must end with a terminal step or an omit_split"));
            }
        }
    }
    for c in &node.children {
        validate_node(cert, c, &path, contexts)?;
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepStatus {
    Pass,
    Fail,
    Flag,
    Skipped,
}

impl fmt::Display for StepStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StepStatus::Pass => "pass",
            StepStatus::Fail => "fail",
            StepStatus::Flag => "flag",
            StepStatus::Skipped => "skipped",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepReport {
    pub path: String,
    #[serde(rename = "step-index")]
    pub step_index: usize,
    pub kind: String,
    pub status: StepStatus,
    pub measured: Option<String>,
    pub claimed: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ReplaySummary {
    pub steps: usize,
    pub pass: usize,
    pub fail: usize,
    pub flag: usize,
    pub skipped: usize,
    pub contradictions: usize,
    pub morphism_leaves: usize,
    pub distinct_tables: Vec<TableId>,
    /// Top-level cases whose subtree is not closed.
    pub unclosed: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ReplayReport {
    pub entries: Vec<StepReport>,
    pub summary: ReplaySummary,
}

impl ReplayReport {
    pub fn failures(&self) -> impl Iterator<Item = &StepReport> {
        self.entries.iter().filter(|e| e.status == StepStatus::Fail)
    }

    pub fn is_success(&self) -> bool {
        self.summary.fail == 0
    }

    /// The step list as a JSON array.
    pub fn entries_json(&self) -> String {
        serde_json::to_string_pretty(&self.entries).expect("report serializes")
    }
}

#[derive(Clone, Debug)]
pub struct ReplayOptions {
    pub skip_slow: bool,
    pub strict: bool,
    /// Search cap is `bound + cap_margin` unless the step sets its own.
    pub cap_margin: usize,
    pub return_cap: usize,
    pub parallel: bool,
}

impl Default for ReplayOptions {
    fn default() -> ReplayOptions {
        ReplayOptions { skip_slow: false, strict: false, cap_margin: 20, return_cap: DEFAULT_RETURN_CAP, parallel: true }
    }
}

#[derive(Clone)]
struct State {
    ctx: AvoidanceSpec,
    proven: BTreeSet<Word>,
    blocks: Option<Vec<Word>>,
    invoked: Option<TableId>,
    pigeonhole: bool,
    sound: bool,
}

enum Terminal {
    Split,
    Done(bool),
    Covered { target: String, contains: bool, entry: usize },
    Missing,
}

struct NodeResult {
    path: String,
    sound: bool,
    terminal: Terminal,
    entries: Vec<StepReport>,
    children: Vec<NodeResult>,
}

struct Outcome {
    status: StepStatus,
    sound: bool,
    measured: Option<String>,
    claimed: Option<String>,
    detail: Option<String>,
}

impl Outcome {
    fn new(ok: bool, measured: impl Into<Option<String>>, claimed: impl Into<Option<String>>) -> Outcome {
        Outcome {
            status: if ok { StepStatus::Pass } else { StepStatus::Fail },
            sound: ok,
            measured: measured.into(),
            claimed: claimed.into(),
            detail: None,
        }
    }

    fn detail(mut self, d: impl Into<String>) -> Outcome {
        self.detail = Some(d.into());
        self
    }
}

struct Replayer<'a> {
    cert: &'a Certificate,
    opts: &'a ReplayOptions,
    cache: Option<&'a SearchCache>,
    contexts: BTreeMap<String, BTreeSet<Word>>,
}

pub fn replay(cert: &Certificate, opts: &ReplayOptions, cache: Option<&SearchCache>) -> ReplayReport {
    let r = Replayer { cert, opts, cache, contexts: entry_contexts(cert) };
    let empty = AvoidanceSpec::new([], cert.threshold).expect("threshold validated at parse time");
    let roots: Vec<NodeResult> = r.map(&cert.cases, |node| {
        let mut state = State {
            ctx: empty.clone(),
            proven: BTreeSet::new(),
            blocks: None,
            invoked: None,
            pigeonhole: false,
            sound: true,
        };
        if let Ok(case) = node.case.parse::<CaseId>() {
            state.proven.extend(case.present());
            state.proven.extend(Letter::ALL.map(|l| Word::from_letters(vec![l])));
        }
        r.node(node, "", state)
    });
    finish(roots)
}

impl Replayer<'_> {
    fn map<T: Send, F>(&self, nodes: &[CaseNode], f: F) -> Vec<T>
    where
        F: Fn(&CaseNode) -> T + Sync + Send,
    {
        if self.opts.parallel {
            nodes.par_iter().map(f).collect()
        } else {
            nodes.iter().map(f).collect()
        }
    }

    fn node(&self, node: &CaseNode, prefix: &str, mut state: State) -> NodeResult {
        let path = child_path(prefix, &node.case);
        state.ctx = state.ctx.with_forbidden(node.omits.iter().cloned());
        state.blocks = None;
        state.invoked = None;
        state.pigeonhole = false;
        state.sound = true;
        let mut entries = Vec::new();
        let mut terminal = Terminal::Missing;
        let mut split: Option<BTreeSet<Word>> = None;

        for (i, step) in node.steps.iter().enumerate() {
            let mut out = self.step(&step.kind, &mut state, &mut split);
            if let StepKind::CoveredBy { path: target } = &step.kind {
                terminal = Terminal::Covered { target: target.clone(), contains: out.sound, entry: i };
            }
            match &step.kind {
                StepKind::Contradiction | StepKind::MorphismReached { .. } => terminal = Terminal::Done(out.sound),
                StepKind::OmitSplit { .. } => terminal = Terminal::Split,
                _ => {}
            }
            if let Some(reason) = &step.flag {
                let table_only = matches!(step.kind, StepKind::Invoke { .. }) && out.sound;
                if out.status == StepStatus::Pass || (out.status == StepStatus::Fail && table_only) {
                    out.status = if self.opts.strict { StepStatus::Fail } else { StepStatus::Flag };
                    out.detail = Some(match out.detail {
                        Some(d) => format!("{reason}; {d}"),
                        None => reason.clone(),
                    });
                }
            }
            state.sound &= out.sound;
            entries.push(StepReport {
                path: path.clone(),
                step_index: i,
                kind: step.kind.name().to_string(),
                status: out.status,
                measured: out.measured,
                claimed: out.claimed,
                detail: out.detail,
            });
        }

        let children = self.map(&node.children, |child| self.node(child, &path, state.clone()));
        NodeResult { path, sound: state.sound, terminal, entries, children }
    }

    fn step(&self, kind: &StepKind, state: &mut State, split: &mut Option<BTreeSet<Word>>) -> Outcome {
        let threshold = self.cert.threshold;
        match kind {
            StepKind::SearchBound { candidates, bound, mode, slow, cap } => {
                let claimed = match mode {
                    BoundMode::Exact => format!("{bound}"),
                    BoundMode::AtMost => format!("<= {bound}"),
                };
                if *slow && self.opts.skip_slow {
                    state.proven.extend(candidates.iter().cloned());
                    return Outcome {
                        status: StepStatus::Skipped,
                        sound: true,
                        measured: None,
                        claimed: Some(claimed),
                        detail: Some("slow search skipped; its candidates are assumed contained".into()),
                    };
                }
                let cap = cap.unwrap_or(bound + self.opts.cap_margin);
                let outcomes = match prove_all_contained(&state.ctx, candidates, cap, self.cache) {
                    Ok(o) => o,
                    Err(e) => return Outcome::new(false, None, claimed).detail(e.to_string()),
                };
                let exhausted = outcomes.iter().all(|o| o.is_exhausted());
                let max = outcomes.iter().map(|o| o.max_length).max().unwrap_or(0);
                if exhausted {
                    state.proven.extend(candidates.iter().cloned());
                }
                let ok = exhausted
                    && match mode {
                        BoundMode::Exact => max == *bound,
                        BoundMode::AtMost => max <= *bound,
                    };
                let measured = if exhausted { format!("{max}") } else { format!(">= {cap}") };
                let mut out = Outcome::new(ok, measured, claimed);
                out.sound = exhausted;
                if !ok {
                    let per: Vec<String> = candidates
                        .iter()
                        .zip(&outcomes)
                        .map(|(c, o)| match o.status {
                            SearchStatus::Exhausted => format!("{c}:{}", o.max_length),
                            SearchStatus::CapReached => format!("{c}:>={cap}"),
                        })
                        .collect();
                    out = out.detail(per.join(" "));
                }
                out
            }
            StepKind::ConcludeContains { words } => {
                let missing: Vec<Word> = words.iter().filter(|w| !state.proven.contains(*w)).cloned().collect();
                let out = Outcome::new(missing.is_empty(), None, join(words));
                if missing.is_empty() {
                    out
                } else {
                    out.detail(format!("not established: {}", join(&missing)))
                }
            }
            StepKind::Pigeonhole { n } => {
                let count = state.proven.iter().filter(|w| w.len() == *n).count();
                let ok = count > 2 * n + 1;
                state.pigeonhole |= ok;
                Outcome::new(ok, format!("{count}"), format!("> {}", 2 * n + 1))
            }
            StepKind::OmitSplit { n, alternatives } => {
                let mut union: BTreeSet<Word> = state.proven.iter().filter(|w| w.len() == *n).cloned().collect();
                let known = union.len();
                union.extend(alternatives.iter().cloned());
                *split = Some(alternatives.iter().cloned().collect());
                Outcome::new(union.len() > 2 * n + 1, format!("{}", union.len()), format!("> {}", 2 * n + 1))
                    .detail(format!("{known} length-{n} words established"))
            }
            StepKind::DeduceOmitted { n, contained, omitted } => {
                let distinct: BTreeSet<&Word> = contained.iter().collect();
                let unproven: Vec<Word> =
                    contained.iter().filter(|w| !state.proven.contains(*w)).cloned().collect();
                let ok = distinct.len() == 2 * n + 1 && unproven.is_empty() && !distinct.contains(omitted);
                state.ctx = state.ctx.with_forbidden([omitted.clone()]);
                let out = Outcome::new(
                    ok,
                    format!("{} established of {}", distinct.len() - unproven.len(), distinct.len()),
                    format!("{} words, {omitted} omitted", 2 * n + 1),
                );
                if unproven.is_empty() {
                    out
                } else {
                    out.detail(format!("not established: {}", join(&unproven)))
                }
            }
            StepKind::ExtensionOmit { word, direction } => {
                let open: Vec<Word> = Letter::ALL
                    .iter()
                    .map(|&l| match direction {
                        Side::Right => word.concat(&[l]),
                        Side::Left => Word::from_letters(vec![l]).concat(word),
                    })
                    .filter(|w| state.ctx.avoided_by(w))
                    .collect();
                state.ctx = state.ctx.with_forbidden([word.clone()]);
                let out = Outcome::new(open.is_empty(), None, format!("{word} omitted"));
                if open.is_empty() {
                    out
                } else {
                    out.detail(format!("admissible extensions: {}", join(&open)))
                }
            }
            StepKind::ReturnWords { x, blocks, cap } => {
                let expected: BTreeSet<Word> = blocks.iter().cloned().collect();
                let occurs = x.len() == 1 || state.proven.iter().any(|p| x.is_factor_of(p));
                let found = match enumerate_return_words_partial(x, &state.ctx, cap.unwrap_or(self.opts.return_cap)) {
                    Ok(f) => f,
                    Err(e) => return Outcome::new(false, None, join_set(&expected)).detail(e.to_string()),
                };
                let complete = found.status == SearchStatus::Exhausted;
                let ok = occurs && complete && found.blocks == expected;
                state.blocks = Some(if complete { found.blocks.iter().cloned().collect() } else { blocks.clone() });
                let mut out = Outcome::new(ok, join_set(&found.blocks), join_set(&expected));
                if !occurs {
                    out = out.detail(format!("{x} is not known to occur"));
                } else if !complete {
                    out = out.detail("enumeration reached its cap");
                }
                out
            }
            StepKind::DiscardBlock { r, witness } => {
                let Some(blocks) = state.blocks.as_mut() else {
                    return Outcome::new(false, None, None).detail("no block set to discard from");
                };
                match discard_initial_block(blocks, r, threshold) {
                    Ok(j) => {
                        blocks.retain(|b| b != r);
                        let witness_ok = witness.as_ref().is_none_or(|w| {
                            w.is_factor_of(&j.context) && word_exponent(w).is_ok_and(|e| e >= threshold)
                        });
                        let out = Outcome::new(
                            witness_ok,
                            j.repetition.to_string(),
                            witness.as_ref().map(Word::to_string),
                        )
                        .detail(format!("context {}", j.context));
                        out
                    }
                    Err(e) => {
                        blocks.retain(|b| b != r);
                        Outcome::new(false, None, witness.as_ref().map(Word::to_string)).detail(e.to_string())
                    }
                }
            }
            StepKind::Roll { direction, piece } => {
                let Some(blocks) = state.blocks.as_mut() else {
                    return Outcome::new(false, None, None).detail("no block set to roll");
                };
                let rolled = match direction {
                    Side::Left => conjugate_left(blocks, piece),
                    Side::Right => conjugate_right(blocks, piece),
                };
                match rolled {
                    Ok(next) => {
                        *blocks = next;
                        Outcome::new(true, join(blocks), None)
                    }
                    Err(e) => Outcome::new(false, None, None).detail(e.to_string()),
                }
            }
            StepKind::Invoke { orientation, table } => {
                let Some(blocks) = state.blocks.as_ref() else {
                    return Outcome::new(false, None, table.to_string()).detail("no block set");
                };
                let row = table_row(*table).expect("table ids validated at parse time");
                let current: BTreeSet<Word> = blocks.iter().cloned().collect();
                let same = current == row.image_set();
                let (hyp, diagnostics) = match assign_roles(blocks, *orientation) {
                    Ok(rt) => {
                        let c = check(&rt);
                        (c.passed, c.diagnostics)
                    }
                    Err(e) => (false, vec![e.to_string()]),
                };
                if hyp {
                    state.invoked = Some(*table);
                }
                let mut out = Outcome::new(hyp && same, join_set(&current), format!("{table} {}", row.morphism));
                out.sound = hyp;
                let mut notes = diagnostics;
                if !same {
                    notes.push(format!("block set differs from table row {table}"));
                }
                if !notes.is_empty() {
                    out = out.detail(notes.join("; "));
                }
                out
            }
            StepKind::CaseEnumeration => match enumerate_cases() {
                Ok(report) => {
                    let nontrivial: Vec<String> =
                        report.nontrivial_stabilizers().iter().map(CaseId::to_string).collect();
                    Outcome::new(true, format!("{} orbits", report.orbits.len()), "7 orbits".to_string()).detail(
                        format!(
                            "{} strongly connected digraphs; nontrivial stabilizers: {}",
                            report.strongly_connected,
                            if nontrivial.is_empty() { "none".into() } else { nontrivial.join(",") }
                        ),
                    )
                }
                Err(e) => Outcome::new(false, None, "7 orbits".to_string()).detail(e.to_string()),
            },
            StepKind::Contradiction => {
                let out = Outcome::new(state.pigeonhole, None, None);
                if state.pigeonhole {
                    out
                } else {
                    out.detail("no pigeonhole step closed this case")
                }
            }
            StepKind::MorphismReached { table } => {
                let ok = state.invoked == Some(*table);
                let out = Outcome::new(ok, state.invoked.map(|t| t.to_string()), table.to_string());
                if ok {
                    out
                } else {
                    out.detail("no successful invoke of this table row")
                }
            }
            StepKind::CoveredBy { path } => {
                let target = &self.contexts[path];
                let uncovered: Vec<Word> = target
                    .iter()
                    .filter(|u| !state.ctx.forbidden().iter().any(|v| v.is_factor_of(u)))
                    .cloned()
                    .collect();
                let out = Outcome::new(uncovered.is_empty(), None, path.clone());
                if uncovered.is_empty() {
                    out
                } else {
                    out.detail(format!("not implied by this case: {}", join(&uncovered)))
                }
            }
        }
    }
}

fn finish(roots: Vec<NodeResult>) -> ReplayReport {
    let mut index: BTreeMap<String, &NodeResult> = BTreeMap::new();
    fn collect<'a>(n: &'a NodeResult, index: &mut BTreeMap<String, &'a NodeResult>) {
        index.insert(n.path.clone(), n);
        for c in &n.children {
            collect(c, index);
        }
    }
    for r in &roots {
        collect(r, &mut index);
    }

    let mut closure = Closure { index: &index, memo: BTreeMap::new(), stack: Vec::new(), cycles: BTreeMap::new() };
    let paths: Vec<String> = index.keys().cloned().collect();
    for p in &paths {
        closure.closed(p);
    }

    let mut entries = Vec::new();
    fn flatten(n: &NodeResult, closure: &Closure, entries: &mut Vec<StepReport>) {
        let mut own = n.entries.clone();
        if let Terminal::Covered { target, contains, entry } = &n.terminal {
            let e = &mut own[*entry];
            let target_closed = closure.memo.get(target).copied().unwrap_or(false);
            if e.status == StepStatus::Pass && !target_closed {
                e.status = StepStatus::Fail;
                e.detail = Some(match closure.cycles.get(&n.path) {
                    Some(cycle) => format!("cyclic reference: {}", cycle.join(" -> ")),
                    None => format!("{target} is not closed"),
                });
            }
            if *contains && target_closed {
                e.measured = Some("closed".into());
            }
        }
        entries.extend(own);
        for c in &n.children {
            flatten(c, closure, entries);
        }
    }
    for r in &roots {
        flatten(r, &closure, &mut entries);
    }

    let mut summary = ReplaySummary { steps: entries.len(), ..ReplaySummary::default() };
    let mut tables = BTreeSet::new();
    for e in &entries {
        match e.status {
            StepStatus::Pass => summary.pass += 1,
            StepStatus::Fail => summary.fail += 1,
            StepStatus::Flag => summary.flag += 1,
            StepStatus::Skipped => summary.skipped += 1,
        }
        if e.status != StepStatus::Fail {
            match e.kind.as_str() {
                "contradiction" => summary.contradictions += 1,
                "morphism_reached" => {
                    summary.morphism_leaves += 1;
                    if let Some(t) = e.claimed.as_ref().and_then(|c| c.parse::<TableId>().ok()) {
                        tables.insert(t);
                    }
                }
                _ => {}
            }
        }
    }
    summary.distinct_tables = tables.into_iter().collect();
    summary.unclosed = roots.iter().filter(|r| !closure.memo[&r.path]).map(|r| r.path.clone()).collect();
    ReplayReport { entries, summary }
}

struct Closure<'a> {
    index: &'a BTreeMap<String, &'a NodeResult>,
    memo: BTreeMap<String, bool>,
    stack: Vec<String>,
    /// For covering nodes whose target depends on them: the cycle found.
    cycles: BTreeMap<String, Vec<String>>,
}

impl Closure<'_> {
    /// Every closure condition is a conjunction, so a node that depends on
    /// itself is not closed.
    fn closed(&mut self, path: &str) -> bool {
        if let Some(&c) = self.memo.get(path) {
            return c;
        }
        if let Some(pos) = self.stack.iter().position(|p| p == path) {
            let mut cycle: Vec<String> = self.stack[pos..].to_vec();
            cycle.push(path.to_string());
            for p in &self.stack[pos..] {
                self.cycles.entry(p.clone()).or_insert_with(|| cycle.clone());
            }
            return false;
        }
        let Some(node) = self.index.get(path).copied() else {
            return false;
        };
        self.stack.push(path.to_string());
        let result = node.sound
            && match &node.terminal {
                Terminal::Split => {
                    // visit every child, not just up to the first open one
                    let kids: Vec<String> = node.children.iter().map(|c| c.path.clone()).collect();
                    kids.iter().filter(|k| !self.closed(k)).count() == 0
                }
                Terminal::Done(ok) => *ok,
                Terminal::Covered { target, contains, .. } => {
                    let t = target.clone();
                    *contains && self.closed(&t)
                }
                Terminal::Missing => false,
            };
        self.stack.pop();
        self.memo.insert(path.to_string(), result);
        result
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_step(case: &str, omits: &str, steps: &str) -> String {
        let omits: Vec<String> = omits.split_whitespace().map(|w| format!("\"{w}\"")).collect();
        format!(
            r#"{{"format": 1, "cases": [{{"case": "{case}", "omits": [{}], "steps": [{steps}]}}]}}"#,
            omits.join(",")
        )
    }

    fn quick() -> ReplayOptions {
        ReplayOptions { parallel: false, ..ReplayOptions::default() }
    }

    #[test]
    fn empty_and_malformed_files_are_rejected() {
        assert!(matches!(parse_certificate(""), Err(Error::Schema { .. })));
        assert!(matches!(parse_certificate("  \n"), Err(Error::Schema { .. })));
        let err = parse_certificate("{\"format\": 1,\n \"cases\": [}").unwrap_err();
        match err {
            Error::Schema { location, .. } => assert!(location.starts_with("line 2"), "{location}"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_certificate(r#"{"format": 1, "cases": []}"#), Err(Error::Schema { .. })));
    }

    #[test]
    fn split_without_alternatives_is_rejected() {
        let text = one_step("T7", "10 11 21 22", r#"{"kind": "omit_split", "n": 4, "alternatives": []}"#);
        let err = parse_certificate(&text).unwrap_err();
        assert!(matches!(&err, Error::Schema { message, .. } if message.contains("no alternatives")), "{err}");
    }

    #[test]
    fn words_must_avoid_their_context() {
        let text = one_step(
            "T7",
            "10 11 21 22",
            r#"{"kind": "search_bound", "candidates": ["0110"], "bound": 3, "mode": "exact"},
               {"kind": "contradiction"}"#,
        );
        let err = parse_certificate(&text).unwrap_err();
        assert!(matches!(&err, Error::Schema { location, .. } if location == "T7 step 0"), "{err}");
    }

    #[test]
    fn terminal_must_close_the_case() {
        let text = one_step(
            "T7",
            "10 11 21 22",
            r#"{"kind": "search_bound", "candidates": ["0120"], "bound": 3, "mode": "exact"}"#,
        );
        assert!(parse_certificate(&text).is_err());
    }

    #[test]
    fn single_search_reports_measured_value() {
        let step = |bound: usize| {
            one_step(
                "T7",
                "10 11 21 22",
                &format!(
                    r#"{{"kind": "search_bound", "candidates": ["0120"], "bound": {bound}, "mode": "exact"}},
                       {{"kind": "pigeonhole", "n": 4}}, {{"kind": "contradiction"}}"#
                ),
            )
        };
        let measured = crate::search::longest_avoiding(
            &AvoidanceSpec::five_halves(["10", "11", "21", "22", "0120"].map(Word::lit)).unwrap(),
            100,
        )
        .max_length;
        let report = replay(&parse_certificate(&step(measured)).unwrap(), &quick(), None);
        assert_eq!(report.entries[0].status, StepStatus::Pass);
        let report = replay(&parse_certificate(&step(measured - 1)).unwrap(), &quick(), None);
        assert_eq!(report.entries[0].status, StepStatus::Fail);
        assert_eq!(report.entries[0].measured.as_deref(), Some(measured.to_string().as_str()));
        // one established length-4 word is not enough for a contradiction
        assert_eq!(report.entries[1].status, StepStatus::Fail);
        assert_eq!(report.summary.unclosed, vec!["T7".to_string()]);
    }

    #[test]
    fn morphism_leaf_replays() {
        let text = one_step(
            "T3",
            "00 11 21 22 101",
            r#"{"kind": "return_words", "x": "2", "blocks": ["20", "201", "2010"]},
               {"kind": "invoke", "orientation": "forward", "table": "g9"},
               {"kind": "morphism_reached", "table": "g9"}"#,
        );
        let report = replay(&parse_certificate(&text).unwrap(), &quick(), None);
        assert!(report.is_success(), "{report:?}");
        assert_eq!(report.summary.morphism_leaves, 1);
        assert!(report.summary.unclosed.is_empty());
    }

    #[test]
    fn flags_become_failures_in_strict_mode() {
        let text = one_step(
            "T3",
            "00 11 21 22 202",
            r#"{"kind": "return_words", "x": "1", "blocks": ["10", "120", "1020"]},
               {"kind": "roll", "direction": "left", "piece": "1", "flag": "test"},
               {"kind": "invoke", "orientation": "reverse", "table": "h11"},
               {"kind": "morphism_reached", "table": "h11"}"#,
        );
        let cert = parse_certificate(&text).unwrap();
        let lax = replay(&cert, &quick(), None);
        assert_eq!(lax.entries[1].status, StepStatus::Flag);
        assert!(lax.is_success());
        let strict = replay(&cert, &ReplayOptions { strict: true, ..quick() }, None);
        assert_eq!(strict.entries[1].status, StepStatus::Fail);
    }

    #[test]
    fn cyclic_coverage_fails() {
        let text = r#"{"format": 1, "cases": [
            {"case": "A", "omits": ["11"], "steps": [{"kind": "covered_by", "path": "B"}]},
            {"case": "B", "omits": ["11"], "steps": [{"kind": "covered_by", "path": "A"}]}]}"#;
        let report = replay(&parse_certificate(text).unwrap(), &quick(), None);
        assert_eq!(report.summary.fail, 2);
        assert!(report.entries[0].detail.as_deref().unwrap().contains("cyclic"));
    }

    #[test]
    fn builtin_shape() {
        let cert = builtin_certificate();
        let labels: Vec<&str> = cert.cases.iter().map(|c| c.case.as_str()).collect();
        assert_eq!(labels, ["letters", "T1", "T2", "T3", "T4", "T5", "T6", "T7"]);
        let leaves = |node: &CaseNode| -> Vec<TableId> {
            fn go(n: &CaseNode, out: &mut Vec<TableId>) {
                for s in &n.steps {
                    if let StepKind::MorphismReached { table } = s.kind {
                        out.push(table);
                    }
                }
                n.children.iter().for_each(|c| go(c, out));
            }
            let mut out = Vec::new();
            go(node, &mut out);
            out
        };
        let all: Vec<TableId> = cert.cases.iter().flat_map(leaves).collect();
        let distinct: BTreeSet<TableId> = all.iter().copied().collect();
        assert_eq!(distinct.len(), 35);
        assert_eq!(all.len(), 36, "one reverse row is reached twice");
        let t6 = &cert.cases[6];
        let contradictions = t6
            .children
            .iter()
            .filter(|c| c.steps.iter().any(|s| s.kind == StepKind::Contradiction))
            .count();
        assert_eq!(contradictions, 4);
    }

    #[test]
    fn round_trip_through_json() {
        let cert = builtin_certificate();
        let text = serde_json::to_string(&cert).unwrap();
        assert_eq!(parse_certificate(&text).unwrap(), cert);
    }
}
