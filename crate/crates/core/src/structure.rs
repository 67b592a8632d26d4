//! Digraph case classification, role assignment for block triples and the
//! hypothesis checks that let a block triple be lifted to a morphism of `G`.
//!
//! A word with five length-2 factors walks a five-edge digraph on {0,1,2}.
//! Up to renaming letters there are seven strongly connected such digraphs;
//! [`CaseId`] names them by their omitted factor sets `T1..T7`.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::word::{common_prefix_len, common_suffix_len, derive_next, Letter, Morphism, Permutation, Word};

const OMITTED: [[&str; 4]; 7] = [
    ["11", "12", "21", "22"],
    ["00", "12", "21", "22"],
    ["00", "11", "21", "22"],
    ["02", "10", "21", "22"],
    ["02", "11", "21", "22"],
    ["02", "10", "11", "22"],
    ["10", "11", "21", "22"],
];

/// Directed graph on {0,1,2} with an edge `xy` for each length-2 factor `xy`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TwoFactorDigraph {
    edges: BTreeSet<(Letter, Letter)>,
}

impl TwoFactorDigraph {
    pub fn new(edges: impl IntoIterator<Item = (Letter, Letter)>) -> TwoFactorDigraph {
        TwoFactorDigraph { edges: edges.into_iter().collect() }
    }

    pub fn from_words<'a>(words: impl IntoIterator<Item = &'a Word>) -> Result<TwoFactorDigraph> {
        let mut edges = BTreeSet::new();
        for w in words {
            if w.len() != 2 {
                return Err(Error::Parse(format!("{w} is not a length-2 word")));
            }
            edges.insert((w[0], w[1]));
        }
        Ok(TwoFactorDigraph { edges })
    }

    pub fn edges(&self) -> &BTreeSet<(Letter, Letter)> {
        &self.edges
    }

    pub fn words(&self) -> BTreeSet<Word> {
        self.edges.iter().map(|&(x, y)| Word::from_letters(vec![x, y])).collect()
    }

    pub fn permute(&self, sigma: &Permutation) -> TwoFactorDigraph {
        TwoFactorDigraph::new(self.edges.iter().map(|&(x, y)| (sigma.apply_letter(x), sigma.apply_letter(y))))
    }

    fn reachable_from(&self, start: Letter, reverse: bool) -> [bool; 3] {
        let mut seen = [false; 3];
        let mut stack = vec![start];
        seen[start.index()] = true;
        while let Some(v) = stack.pop() {
            for &(x, y) in &self.edges {
                let (from, to) = if reverse { (y, x) } else { (x, y) };
                if from == v && !seen[to.index()] {
                    seen[to.index()] = true;
                    stack.push(to);
                }
            }
        }
        seen
    }

    pub fn is_strongly_connected(&self) -> bool {
        let root = Letter::ZERO;
        self.reachable_from(root, false).iter().all(|&b| b) && self.reachable_from(root, true).iter().all(|&b| b)
    }
}

/// One of the seven digraph cases, `1..=7`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct CaseId(u8);

impl CaseId {
    pub fn new(index: u8) -> Result<CaseId> {
        if (1..=7).contains(&index) {
            Ok(CaseId(index))
        } else {
            Err(Error::Parse(format!("case index {index} is not in 1..=7")))
        }
    }

    pub fn all() -> [CaseId; 7] {
        [1, 2, 3, 4, 5, 6, 7].map(CaseId)
    }

    pub fn index(self) -> u8 {
        self.0
    }

    /// The omitted length-2 factors `T_i`.
    pub fn omitted(self) -> BTreeSet<Word> {
        OMITTED[self.0 as usize - 1].iter().map(|s| Word::lit(s)).collect()
    }

    /// The present length-2 factors `S_i`, the complement of `T_i`.
    pub fn present(self) -> BTreeSet<Word> {
        let omitted = self.omitted();
        all_words(2).into_iter().filter(|w| !omitted.contains(w)).collect()
    }

    pub fn digraph(self) -> TwoFactorDigraph {
        TwoFactorDigraph::from_words(&self.present()).expect("length-2 words")
    }
}

impl fmt::Display for CaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "T{}", self.0)
    }
}

impl FromStr for CaseId {
    type Err = Error;

    fn from_str(s: &str) -> Result<CaseId> {
        let digits = s.strip_prefix('T').ok_or_else(|| Error::Parse(format!("case name {s:?} must look like T3")))?;
        let index: u8 = digits.parse().map_err(|_| Error::Parse(format!("bad case name {s:?}")))?;
        CaseId::new(index)
    }
}

impl TryFrom<String> for CaseId {
    type Error = Error;

    fn try_from(s: String) -> Result<CaseId> {
        s.parse()
    }
}

impl From<CaseId> for String {
    fn from(c: CaseId) -> String {
        c.to_string()
    }
}

/// All `3^n` words of length `n` in lexicographic order.
pub fn all_words(n: usize) -> Vec<Word> {
    let mut out = vec![Word::new()];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|w| Letter::ALL.map(|l| w.concat(&[l])))
            .collect();
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Classification {
    /// `sigma` maps the given factor set onto `S_case`.
    Case { sigma: Permutation, case: CaseId },
    NotEligible(String),
}

pub fn canonical_case(length2_factors: &BTreeSet<Word>) -> Classification {
    let graph = match TwoFactorDigraph::from_words(length2_factors) {
        Ok(g) => g,
        Err(e) => return Classification::NotEligible(e.to_string()),
    };
    if graph.edges().len() != 5 {
        return Classification::NotEligible(format!("{} length-2 factors instead of 5", graph.edges().len()));
    }
    if !graph.is_strongly_connected() {
        return Classification::NotEligible("digraph is not strongly connected".into());
    }
    for case in CaseId::all() {
        let target = case.digraph();
        for sigma in Permutation::all() {
            if graph.permute(&sigma) == target {
                return Classification::Case { sigma, case };
            }
        }
    }
    Classification::NotEligible("strongly connected but matches no listed case".into())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct OrbitSummary {
    pub case: CaseId,
    pub orbit_size: usize,
    pub stabilizer_size: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CaseReport {
    pub five_edge_subsets: usize,
    pub strongly_connected: usize,
    pub orbits: Vec<OrbitSummary>,
}

impl CaseReport {
    pub fn nontrivial_stabilizers(&self) -> Vec<CaseId> {
        self.orbits.iter().filter(|o| o.stabilizer_size != 1).map(|o| o.case).collect()
    }
}

/// Groups all strongly connected five-edge digraphs into permutation orbits and
/// checks that the orbits are exactly the seven cases. Stabilizer sizes are
/// reported rather than enforced: `S1` is fixed by swapping 1 and 2.
pub fn enumerate_cases() -> Result<CaseReport> {
    let pairs: Vec<(Letter, Letter)> =
        Letter::ALL.iter().flat_map(|&x| Letter::ALL.map(|y| (x, y))).collect();
    let mut subsets = 0;
    let mut connected = Vec::new();
    for mask in 0u32..(1 << 9) {
        if mask.count_ones() != 5 {
            continue;
        }
        subsets += 1;
        let g = TwoFactorDigraph::new((0..9).filter(|i| mask >> i & 1 == 1).map(|i| pairs[i]));
        if g.is_strongly_connected() {
            connected.push(g);
        }
    }

    let mut remaining: BTreeSet<TwoFactorDigraph> = connected.iter().cloned().collect();
    let mut orbits = Vec::new();
    while let Some(g) = remaining.iter().next().cloned() {
        let orbit: BTreeSet<TwoFactorDigraph> = Permutation::all().iter().map(|s| g.permute(s)).collect();
        for h in &orbit {
            remaining.remove(h);
        }
        let cases: Vec<CaseId> = CaseId::all().into_iter().filter(|c| orbit.contains(&c.digraph())).collect();
        let [case] = cases[..] else {
            return Err(Error::StructureMismatch(format!(
                "orbit of {:?} contains {} listed cases",
                g.words(),
                cases.len()
            )));
        };
        let rep = case.digraph();
        let stabilizer = Permutation::all().iter().filter(|s| rep.permute(s) == rep).count();
        orbits.push(OrbitSummary { case, orbit_size: orbit.len(), stabilizer_size: stabilizer });
    }
    orbits.sort_by_key(|o| o.case);

    if orbits.len() != 7 {
        return Err(Error::StructureMismatch(format!("{} orbits instead of 7", orbits.len())));
    }
    Ok(CaseReport { five_edge_subsets: subsets, strongly_connected: connected.len(), orbits })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    Forward,
    Reverse,
}

impl fmt::Display for Orientation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Orientation::Forward => "forward",
            Orientation::Reverse => "reverse",
        })
    }
}

/// Blocks labelled by length: `b` shortest, `a` middle, `c` longest.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RoleTriple {
    pub a: Word,
    pub b: Word,
    pub c: Word,
    pub orientation: Orientation,
}

impl RoleTriple {
    /// The morphism `[a, b, c]` used by the corollaries.
    pub fn morphism(&self) -> Morphism {
        Morphism::new([self.a.clone(), self.b.clone(), self.c.clone()]).expect("role blocks are nonempty")
    }

    pub fn reversed(&self) -> RoleTriple {
        let orientation = match self.orientation {
            Orientation::Forward => Orientation::Reverse,
            Orientation::Reverse => Orientation::Forward,
        };
        RoleTriple { a: self.a.reversed(), b: self.b.reversed(), c: self.c.reversed(), orientation }
    }
}

pub fn assign_roles(images: &[Word], orientation: Orientation) -> Result<RoleTriple> {
    let [x, y, z] = images else {
        return Err(Error::AmbiguousRoles(format!("expected 3 blocks, got {}", images.len())));
    };
    let mut sorted = [x, y, z];
    sorted.sort_by_key(|w| w.len());
    if sorted[0].len() == sorted[1].len() || sorted[1].len() == sorted[2].len() || sorted[0].is_empty() {
        return Err(Error::AmbiguousRoles(format!("{x}, {y}, {z}")));
    }
    Ok(RoleTriple { b: sorted[0].clone(), a: sorted[1].clone(), c: sorted[2].clone(), orientation })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct HypothesisCheck {
    pub passed: bool,
    pub diagnostics: Vec<String>,
}

impl HypothesisCheck {
    fn from_diagnostics(diagnostics: Vec<String>) -> HypothesisCheck {
        HypothesisCheck { passed: diagnostics.is_empty(), diagnostics }
    }
}

type Affix = fn(&Word, &[Letter]) -> bool;

fn chain_conditions(rt: &RoleTriple, forward: bool) -> Vec<String> {
    let (a, b, c) = (&rt.a, &rt.b, &rt.c);
    let (rel, contains): (&str, Affix) =
        if forward { ("prefix", Word::is_prefix_of) } else { ("suffix", Word::is_suffix_of) };
    let mut out = Vec::new();
    if !contains(b, a) {
        out.push(format!("b={b} is not a {rel} of a={a}"));
    }
    if !contains(a, c) {
        out.push(format!("a={a} is not a {rel} of c={c}"));
    }
    if 2 * b.len() < c.len() {
        out.push(format!("2|b|={} < |c|={}", 2 * b.len(), c.len()));
    }
    let shared = if forward { common_suffix_len(b, c) } else { common_prefix_len(b, c) };
    if 2 * shared < b.len() {
        let what = if forward { "suffix" } else { "prefix" };
        out.push(format!("longest common {what} of b and c has length {shared}, need at least {}/2", b.len()));
    }
    out
}

/// Hypotheses of the forward construction: `b` prefix of `a` prefix of `c`,
/// `2|b| ≥ |c|`, and `b`, `c` share a suffix `s` with `2|s| ≥ |b|`.
pub fn check_forward(rt: &RoleTriple) -> HypothesisCheck {
    let mut diagnostics = Vec::new();
    if rt.orientation != Orientation::Forward {
        diagnostics.push("triple is oriented for the reverse construction".to_string());
    }
    diagnostics.extend(chain_conditions(rt, true));
    HypothesisCheck::from_diagnostics(diagnostics)
}

/// Mirror image of [`check_forward`]: suffix chain and a common prefix.
pub fn check_reverse(rt: &RoleTriple) -> HypothesisCheck {
    let mut diagnostics = Vec::new();
    if rt.orientation != Orientation::Reverse {
        diagnostics.push("triple is oriented for the forward construction".to_string());
    }
    diagnostics.extend(chain_conditions(rt, false));
    HypothesisCheck::from_diagnostics(diagnostics)
}

pub fn check(rt: &RoleTriple) -> HypothesisCheck {
    match rt.orientation {
        Orientation::Forward => check_forward(rt),
        Orientation::Reverse => check_reverse(rt),
    }
}

/// Applies `derive_next` to `[a,b,c]` and re-checks the forward hypotheses on
/// `A=cab, B=ca, C=caba`. Also confirms the explicit witness suffix `S = s·a`,
/// where `s` is the longest common suffix of `b` and `c`.
pub fn closure_under_derivation(rt: &RoleTriple) -> Result<bool> {
    if !check_forward(rt).passed {
        return Ok(false);
    }
    let next = derive_next(&rt.morphism())?;
    let [big_a, big_b, big_c] = next.images().clone();
    let roles = RoleTriple { a: big_a, b: big_b, c: big_c, orientation: Orientation::Forward };
    let s_len = common_suffix_len(&rt.b, &rt.c);
    let s = rt.b.slice(rt.b.len() - s_len, rt.b.len());
    let explicit = s.concat(&rt.a);
    let explicit_ok = explicit.is_suffix_of(&roles.b) && explicit.is_suffix_of(&roles.c) && 2 * explicit.len() >= roles.b.len();
    Ok(explicit_ok && check_forward(&roles).passed)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TableKind {
    /// Rows for the forward construction.
    G,
    /// Rows for the reverse construction.
    H,
}

impl TableKind {
    pub fn orientation(self) -> Orientation {
        match self {
            TableKind::G => Orientation::Forward,
            TableKind::H => Orientation::Reverse,
        }
    }
}

/// Table row reference such as `g14` or `h3`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct TableId {
    pub kind: TableKind,
    pub index: u8,
}

impl fmt::Display for TableId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let k = match self.kind {
            TableKind::G => 'g',
            TableKind::H => 'h',
        };
        write!(f, "{k}{}", self.index)
    }
}

impl FromStr for TableId {
    type Err = Error;

    fn from_str(s: &str) -> Result<TableId> {
        let bad = || Error::Parse(format!("table id {s:?} must look like g3 or h12"));
        let kind = match s.chars().next() {
            Some('g') => TableKind::G,
            Some('h') => TableKind::H,
            _ => return Err(bad()),
        };
        let index: u8 = s[1..].parse().map_err(|_| bad())?;
        if index == 0 {
            return Err(bad());
        }
        Ok(TableId { kind, index })
    }
}

impl TryFrom<String> for TableId {
    type Error = Error;

    fn try_from(s: String) -> Result<TableId> {
        s.parse()
    }
}

impl From<TableId> for String {
    fn from(t: TableId) -> String {
        t.to_string()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TableRow {
    pub id: TableId,
    /// Images in the column order of the data file.
    pub morphism: Morphism,
}

impl TableRow {
    pub fn roles(&self) -> Result<RoleTriple> {
        assign_roles(self.morphism.images(), self.id.kind.orientation())
    }

    pub fn image_set(&self) -> BTreeSet<Word> {
        self.morphism.images().iter().cloned().collect()
    }
}

pub const TABLES_TSV: &str = include_str!("../data/tables.tsv");

/// Parses `kind TAB index TAB [img0,img1,img2]` lines; `#` starts a comment.
pub fn parse_tables(text: &str) -> Result<Vec<TableRow>> {
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |m: &str| Error::Parse(format!("table line {}: {m}", lineno + 1));
        let fields: Vec<&str> = line.split('\t').collect();
        let [kind, index, images] = fields[..] else {
            return Err(bad("expected 3 tab-separated fields"));
        };
        let id: TableId = format!("{kind}{index}").parse().map_err(|_| bad("bad kind or index"))?;
        let morphism: Morphism = images.parse().map_err(|e: Error| bad(&e.to_string()))?;
        rows.push(TableRow { id, morphism });
    }
    Ok(rows)
}

pub fn tables() -> Vec<TableRow> {
    parse_tables(TABLES_TSV).expect("embedded table data parses")
}

pub fn table_row(id: TableId) -> Option<TableRow> {
    tables().into_iter().find(|r| r.id == id)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RowCheck {
    pub id: TableId,
    pub morphism: String,
    pub passed: bool,
    pub diagnostics: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TableReport {
    pub rows: Vec<RowCheck>,
}

impl TableReport {
    pub fn passed(&self, kind: TableKind) -> (usize, usize) {
        let rows: Vec<&RowCheck> = self.rows.iter().filter(|r| r.id.kind == kind).collect();
        (rows.iter().filter(|r| r.passed).count(), rows.len())
    }

    pub fn all_passed(&self) -> bool {
        self.rows.iter().all(|r| r.passed)
    }
}

pub fn verify_rows(rows: &[TableRow]) -> TableReport {
    let rows = rows
        .iter()
        .map(|row| {
            let (passed, diagnostics) = match row.roles() {
                Ok(rt) => {
                    let c = check(&rt);
                    (c.passed, c.diagnostics)
                }
                Err(e) => (false, vec![e.to_string()]),
            };
            RowCheck { id: row.id, morphism: row.morphism.to_string(), passed, diagnostics }
        })
        .collect();
    TableReport { rows }
}

pub fn verify_tables() -> TableReport {
    verify_rows(&tables())
}
