//! Exhaustive pruned backtracking over {0,1,2}.
//!
//! Every search walks the tree of words that avoid an [`AvoidanceSpec`] in
//! lexicographic order (0 < 1 < 2). A word is extended one letter at a time and
//! rejected as soon as the new letter completes a forbidden factor or a suffix
//! whose exponent reaches the threshold. Since both properties are closed under
//! taking factors, checking only the new suffix at each step is enough.

mod cache;
mod matcher;

use std::collections::BTreeSet;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use cache::{cache_gc, spec_hash, SearchCache, HASH_VERSION};
pub use matcher::{FactorMatcher, StateId};

use crate::analysis::{contains_power_geq, Rational, RepetitionWitness};
use crate::error::{Error, Result};
use crate::word::{common_prefix_len, common_suffix_len, Letter, Word};

pub const DEFAULT_SEARCH_CAP: usize = 200;
pub const DEFAULT_RETURN_CAP: usize = 80;

/// A set of forbidden factors together with a repetition threshold `t`:
/// a word avoids the spec when it has no forbidden factor and no factor of
/// exponent `≥ t`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct AvoidanceSpec {
    forbidden: BTreeSet<Word>,
    threshold: Rational,
}

impl AvoidanceSpec {
    pub fn new(forbidden: impl IntoIterator<Item = Word>, threshold: Rational) -> Result<AvoidanceSpec> {
        if threshold <= Rational::integer(1) {
            return Err(Error::InvalidSpec(format!("threshold {threshold} must exceed 1")));
        }
        let forbidden: BTreeSet<Word> = forbidden.into_iter().collect();
        if forbidden.iter().any(|w| w.is_empty()) {
            return Err(Error::InvalidSpec("forbidden words must be nonempty".into()));
        }
        Ok(AvoidanceSpec { forbidden, threshold })
    }

    /// Forbidden words with the default threshold 5/2.
    pub fn five_halves(forbidden: impl IntoIterator<Item = Word>) -> Result<AvoidanceSpec> {
        AvoidanceSpec::new(forbidden, Rational::FIVE_HALVES)
    }

    pub fn forbidden(&self) -> &BTreeSet<Word> {
        &self.forbidden
    }

    pub fn threshold(&self) -> Rational {
        self.threshold
    }

    pub fn with_forbidden(&self, extra: impl IntoIterator<Item = Word>) -> AvoidanceSpec {
        let mut forbidden = self.forbidden.clone();
        forbidden.extend(extra.into_iter().filter(|w| !w.is_empty()));
        AvoidanceSpec { forbidden, threshold: self.threshold }
    }

    /// Full (non-incremental) check.
    pub fn avoided_by(&self, w: &[Letter]) -> bool {
        !self.forbidden.iter().any(|f| f.is_factor_of(w)) && contains_power_geq(w, self.threshold).is_none()
    }

    /// Stable textual form used for hashing: `threshold;sorted,forbidden,words`.
    pub fn canonical(&self) -> String {
        let words: Vec<String> = self.forbidden.iter().map(Word::to_string).collect();
        format!("{};{}", self.threshold, words.join(","))
    }
}

/// Incremental extension check shared by all searches.
struct Extender {
    matcher: FactorMatcher,
    /// `min_len[p]`: shortest suffix length with period `p` that reaches the threshold.
    min_len: Vec<usize>,
}

impl Extender {
    fn new(spec: &AvoidanceSpec, max_len: usize) -> Extender {
        let min_len = (0..=max_len + 1)
            .map(|p| spec.threshold.min_length_for_period(p).max(p + 1))
            .collect();
        Extender { matcher: FactorMatcher::new(&spec.forbidden), min_len }
    }

    /// `w` ends with the letter just appended; `state` is the matcher state before it.
    #[inline]
    fn extend(&self, w: &[Letter], state: StateId) -> Option<StateId> {
        let n = w.len();
        let next = self.matcher.step(state, w[n - 1]);
        if self.matcher.is_match(next) || self.power_suffix(w) {
            None
        } else {
            Some(next)
        }
    }

    #[inline]
    fn power_suffix(&self, w: &[Letter]) -> bool {
        let n = w.len();
        let last = n - 1;
        for p in 1..n {
            let need = self.min_len[p];
            if need > n {
                return false;
            }
            // Compare from the end, where mismatches usually show up first.
            let mut ok = true;
            for k in 0..need - p {
                if w[last - k] != w[last - k - p] {
                    ok = false;
                    break;
                }
            }
            if ok {
                return true;
            }
        }
        false
    }

    /// Runs `w` from scratch; `None` if some prefix already violates the spec.
    fn run(&self, w: &[Letter]) -> Option<StateId> {
        let mut state = FactorMatcher::START;
        for n in 1..=w.len() {
            state = self.extend(&w[..n], state)?;
        }
        Some(state)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SearchStatus {
    /// The whole tree was explored; `max_length` is exact.
    Exhausted,
    /// Some word reached the cap; only `max_length ≥ cap` is known.
    CapReached,
}

impl fmt::Display for SearchStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SearchStatus::Exhausted => "exhausted",
            SearchStatus::CapReached => "cap-reached",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub status: SearchStatus,
    pub max_length: usize,
    /// First deepest word in lexicographic order.
    pub witness: Word,
}

impl SearchOutcome {
    pub fn is_exhausted(&self) -> bool {
        self.status == SearchStatus::Exhausted
    }
}

impl fmt::Display for SearchOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} witness={}", self.status, self.max_length, self.witness)
    }
}

/// Length of the longest word avoiding `spec`, by depth-first search up to `cap`.
pub fn longest_avoiding(spec: &AvoidanceSpec, cap: usize) -> SearchOutcome {
    let cap = cap.max(1);
    let ext = Extender::new(spec, cap);
    let mut word: Vec<Letter> = Vec::with_capacity(cap);
    let mut states: Vec<StateId> = Vec::with_capacity(cap + 1);
    let mut next: Vec<u8> = Vec::with_capacity(cap + 1);
    states.push(FactorMatcher::START);
    next.push(0);
    let mut best: Vec<Letter> = Vec::new();

    loop {
        let depth = word.len();
        let candidate = next[depth];
        if candidate == 3 {
            if depth == 0 {
                break;
            }
            word.pop();
            states.pop();
            next.pop();
            continue;
        }
        next[depth] += 1;
        word.push(Letter::ALL[candidate as usize]);
        match ext.extend(&word, states[depth]) {
            Some(state) => {
                if word.len() > best.len() {
                    best.clear();
                    best.extend_from_slice(&word);
                    if best.len() >= cap {
                        return SearchOutcome {
                            status: SearchStatus::CapReached,
                            max_length: cap,
                            witness: Word::from_letters(best),
                        };
                    }
                }
                states.push(state);
                next.push(0);
            }
            None => {
                word.pop();
            }
        }
    }
    SearchOutcome { status: SearchStatus::Exhausted, max_length: best.len(), witness: Word::from_letters(best) }
}

/// [`longest_avoiding`] through an optional persistent cache.
pub fn longest_avoiding_cached(spec: &AvoidanceSpec, cap: usize, cache: Option<&SearchCache>) -> Result<SearchOutcome> {
    let Some(cache) = cache else {
        return Ok(longest_avoiding(spec, cap));
    };
    let key = spec_hash(spec, cap);
    if let Some(hit) = cache.get(&key) {
        return Ok(hit);
    }
    let outcome = longest_avoiding(spec, cap);
    cache.put(&key, &outcome)?;
    Ok(outcome)
}

/// For each `u`, bounds the longest word avoiding `spec ∪ {u}`. When that search
/// is exhausted, every infinite word avoiding `spec` contains `u`.
pub fn prove_all_contained(
    spec: &AvoidanceSpec,
    words: &[Word],
    cap: usize,
    cache: Option<&SearchCache>,
) -> Result<Vec<SearchOutcome>> {
    if let Some(bad) = words.iter().find(|u| !spec.avoided_by(u)) {
        return Err(Error::ListedWordViolatesSpec(bad.to_string()));
    }
    words
        .par_iter()
        .map(|u| longest_avoiding_cached(&spec.with_forbidden([u.clone()]), cap, cache))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReturnWords {
    pub status: SearchStatus,
    /// Words `r` such that `r·x` starts and ends with `x`, contains exactly two
    /// occurrences of `x` and avoids the spec.
    pub blocks: BTreeSet<Word>,
}

/// Complete enumeration of return words of `x` under `spec`; `cap` bounds `|r·x|`.
/// `status` is `CapReached` when some branch was cut off, in which case the
/// block set may be incomplete.
pub fn enumerate_return_words_partial(x: &Word, spec: &AvoidanceSpec, cap: usize) -> Result<ReturnWords> {
    if x.is_empty() || !spec.avoided_by(x) {
        return Err(Error::ListedWordViolatesSpec(x.to_string()));
    }
    let ext = Extender::new(spec, cap.max(x.len()));
    let start_state = ext.run(x).ok_or_else(|| Error::ListedWordViolatesSpec(x.to_string()))?;
    let base = x.len();
    let mut word: Vec<Letter> = x.letters().to_vec();
    let mut states = vec![start_state];
    let mut next: Vec<u8> = vec![0];
    let mut blocks = BTreeSet::new();
    let mut status = SearchStatus::Exhausted;

    loop {
        let depth = word.len() - base;
        let candidate = next[depth];
        if candidate == 3 {
            if depth == 0 {
                break;
            }
            word.pop();
            states.pop();
            next.pop();
            continue;
        }
        next[depth] += 1;
        word.push(Letter::ALL[candidate as usize]);
        let Some(state) = ext.extend(&word, states[depth]) else {
            word.pop();
            continue;
        };
        if word.ends_with(x) {
            blocks.insert(Word::from(&word[..word.len() - base]));
            word.pop();
            continue;
        }
        if word.len() >= cap {
            status = SearchStatus::CapReached;
            word.pop();
            continue;
        }
        states.push(state);
        next.push(0);
    }
    Ok(ReturnWords { status, blocks })
}

/// Like [`enumerate_return_words_partial`] but fails unless the enumeration is complete.
pub fn enumerate_return_words(x: &Word, spec: &AvoidanceSpec, cap: usize) -> Result<BTreeSet<Word>> {
    let found = enumerate_return_words_partial(x, spec, cap)?;
    match found.status {
        SearchStatus::Exhausted => Ok(found.blocks),
        SearchStatus::CapReached => Err(Error::CapReached { cap }),
    }
}

/// Why a block can occur at most once in a concatenation of `blocks`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DiscardJustification {
    /// Longest common suffix of all blocks.
    pub suffix: Word,
    /// Longest common prefix of `r·r` and of every other block.
    pub follower: Word,
    /// `suffix · r · follower`, which must occur around any later use of `r`.
    pub context: Word,
    pub witness: RepetitionWitness,
    /// The repetition itself, a factor of `context`.
    pub repetition: Word,
}

/// Checks that the block `r` can only be the first block of a factorization.
///
/// Every block ends with the common suffix `s`, possibly empty. A non-initial `r` is preceded by
/// some block, hence by `s`, and followed either by another block `b ≠ r` or by
/// `r` and a further block; in both cases by the common prefix `q` of `r·r` and
/// the other blocks. A repetition inside `s·r·q` rules the second use out.
pub fn discard_initial_block(blocks: &[Word], r: &Word, threshold: Rational) -> Result<DiscardJustification> {
    let fail = |reason: String| Err(Error::NotJustified { block: r.to_string(), reason });
    if !blocks.contains(r) {
        return fail("not one of the blocks".into());
    }
    let suffix_len = blocks
        .iter()
        .map(|b| common_suffix_len(b, &blocks[0]))
        .min()
        .unwrap_or(0);
    let suffix = Word::from(&blocks[0][blocks[0].len() - suffix_len..]);
    let rr = r.concat(r);
    let follower_len = blocks
        .iter()
        .filter(|b| *b != r)
        .map(|b| common_prefix_len(b, &rr))
        .min()
        .unwrap_or(rr.len());
    let follower = Word::from(&rr[..follower_len]);
    let context = suffix.concat(r).concat(&follower);
    match contains_power_geq(&context, threshold) {
        Some(witness) => Ok(DiscardJustification {
            repetition: witness.factor(&context),
            suffix,
            follower,
            context,
            witness,
        }),
        None => fail(format!("context {context} has no factor of exponent ≥ {threshold}")),
    }
}
