//! Aho-Corasick automaton over the ternary alphabet.
//!
//! The search engine keeps one automaton state per depth, so checking whether
//! the appended letter completes a forbidden factor is a single table lookup.

use std::collections::VecDeque;

use crate::word::{Letter, Word};

pub type StateId = u32;

#[derive(Clone, Debug)]
pub struct FactorMatcher {
    /// Full transition table, `goto[state][letter]`.
    goto: Vec<[StateId; 3]>,
    /// Some pattern ends at this state (directly or through a failure link).
    accept: Vec<bool>,
}

impl FactorMatcher {
    pub const START: StateId = 0;

    #[allow(clippy::needless_range_loop)]
    pub fn new<'a>(patterns: impl IntoIterator<Item = &'a Word>) -> FactorMatcher {
        const NONE: StateId = StateId::MAX;
        let mut goto: Vec<[StateId; 3]> = vec![[NONE; 3]];
        let mut accept = vec![false];
        for pat in patterns {
            let mut s = 0usize;
            for &l in pat.letters() {
                let next = goto[s][l.index()];
                s = if next == NONE {
                    goto.push([NONE; 3]);
                    accept.push(false);
                    let id = goto.len() - 1;
                    goto[s][l.index()] = id as StateId;
                    id
                } else {
                    next as usize
                };
            }
            accept[s] = true;
        }

        let mut fail = vec![0 as StateId; goto.len()];
        let mut queue = VecDeque::new();
        for a in 0..3 {
            match goto[0][a] {
                NONE => goto[0][a] = 0,
                t => {
                    fail[t as usize] = 0;
                    queue.push_back(t);
                }
            }
        }
        while let Some(s) = queue.pop_front() {
            let s = s as usize;
            accept[s] |= accept[fail[s] as usize];
            for a in 0..3 {
                let t = goto[s][a];
                if t == NONE {
                    goto[s][a] = goto[fail[s] as usize][a];
                } else {
                    fail[t as usize] = goto[fail[s] as usize][a];
                    queue.push_back(t);
                }
            }
        }
        FactorMatcher { goto, accept }
    }

    #[inline]
    pub fn step(&self, state: StateId, letter: Letter) -> StateId {
        self.goto[state as usize][letter.index()]
    }

    /// A forbidden factor ends at the letter that led into `state`.
    #[inline]
    pub fn is_match(&self, state: StateId) -> bool {
        self.accept[state as usize]
    }

    /// Feeds `w` from the start state; `None` as soon as a pattern occurs.
    pub fn run(&self, w: &[Letter]) -> Option<StateId> {
        let mut s = Self::START;
        for &l in w {
            s = self.step(s, l);
            if self.is_match(s) {
                return None;
            }
        }
        Some(s)
    }

    pub fn state_count(&self) -> usize {
        self.goto.len()
    }
}
