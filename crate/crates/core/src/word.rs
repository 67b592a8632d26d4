//! Finite words over the ternary alphabet, morphisms, alphabet permutations
//! and fixed-point prefixes.

use std::fmt;
use std::ops::Deref;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A letter of {0,1,2}.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(transparent)]
pub struct Letter(u8);

impl Letter {
    pub const ZERO: Letter = Letter(0);
    pub const ONE: Letter = Letter(1);
    pub const TWO: Letter = Letter(2);
    pub const ALL: [Letter; 3] = [Letter::ZERO, Letter::ONE, Letter::TWO];

    pub fn new(value: u8) -> Result<Letter> {
        if value < 3 {
            Ok(Letter(value))
        } else {
            Err(Error::InvalidLetter(char::from(b'0'.wrapping_add(value))))
        }
    }

    pub fn from_char(c: char) -> Result<Letter> {
        match c {
            '0' => Ok(Letter::ZERO),
            '1' => Ok(Letter::ONE),
            '2' => Ok(Letter::TWO),
            other => Err(Error::InvalidLetter(other)),
        }
    }

    #[inline]
    pub fn value(self) -> u8 {
        self.0
    }

    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn to_char(self) -> char {
        char::from(b'0' + self.0)
    }
}

impl fmt::Display for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A finite word, serialized as a string over `'0'`, `'1'`, `'2'`.
#[derive(Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Word(Vec<Letter>);

impl Word {
    pub fn new() -> Word {
        Word(Vec::new())
    }

    pub fn from_letters(letters: Vec<Letter>) -> Word {
        Word(letters)
    }

    /// Panics on characters outside `012`; meant for literals in tables and tests.
    pub fn lit(s: &str) -> Word {
        s.parse().unwrap_or_else(|e| panic!("bad word literal {s:?}: {e}"))
    }

    pub fn letters(&self) -> &[Letter] {
        &self.0
    }

    pub fn into_letters(self) -> Vec<Letter> {
        self.0
    }

    pub fn push(&mut self, letter: Letter) {
        self.0.push(letter);
    }

    pub fn extend_from(&mut self, other: &[Letter]) {
        self.0.extend_from_slice(other);
    }

    pub fn concat(&self, other: &[Letter]) -> Word {
        let mut letters = Vec::with_capacity(self.len() + other.len());
        letters.extend_from_slice(&self.0);
        letters.extend_from_slice(other);
        Word(letters)
    }

    pub fn truncate(&mut self, len: usize) {
        self.0.truncate(len);
    }

    pub fn slice(&self, start: usize, end: usize) -> Word {
        Word(self.0[start..end].to_vec())
    }

    /// Number of occurrences of `letter`.
    pub fn count(&self, letter: Letter) -> usize {
        self.0.iter().filter(|&&l| l == letter).count()
    }

    pub fn is_prefix_of(&self, other: &[Letter]) -> bool {
        other.starts_with(&self.0)
    }

    pub fn is_suffix_of(&self, other: &[Letter]) -> bool {
        other.ends_with(&self.0)
    }

    /// True when `self` occurs as a contiguous factor of `other`.
    pub fn is_factor_of(&self, other: &[Letter]) -> bool {
        self.is_empty() || other.windows(self.len()).any(|w| w == self.0.as_slice())
    }

    pub fn reversed(&self) -> Word {
        let mut letters = self.0.clone();
        letters.reverse();
        Word(letters)
    }
}

impl Deref for Word {
    type Target = [Letter];

    fn deref(&self) -> &[Letter] {
        &self.0
    }
}

impl From<&[Letter]> for Word {
    fn from(letters: &[Letter]) -> Word {
        Word(letters.to_vec())
    }
}

impl FromStr for Word {
    type Err = Error;

    fn from_str(s: &str) -> Result<Word> {
        s.chars().map(Letter::from_char).collect::<Result<Vec<_>>>().map(Word)
    }
}

impl TryFrom<String> for Word {
    type Error = Error;

    fn try_from(s: String) -> Result<Word> {
        s.parse()
    }
}

impl From<Word> for String {
    fn from(w: Word) -> String {
        w.to_string()
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: String = self.0.iter().map(|l| l.to_char()).collect();
        f.write_str(&s)
    }
}

impl fmt::Debug for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Word({self})")
    }
}

/// Writes a letter slice as a `012` string.
pub fn letters_to_string(letters: &[Letter]) -> String {
    letters.iter().map(|l| l.to_char()).collect()
}

pub fn reverse_word(w: &[Letter]) -> Word {
    let mut letters = w.to_vec();
    letters.reverse();
    Word(letters)
}

/// Length of the longest common prefix of two words.
pub fn common_prefix_len(a: &[Letter], b: &[Letter]) -> usize {
    a.iter().zip(b).take_while(|(x, y)| x == y).count()
}

/// Length of the longest common suffix of two words.
pub fn common_suffix_len(a: &[Letter], b: &[Letter]) -> usize {
    a.iter().rev().zip(b.iter().rev()).take_while(|(x, y)| x == y).count()
}

/// A non-erasing morphism on {0,1,2}*, written `[h(0),h(1),h(2)]`.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Morphism {
    images: [Word; 3],
}

impl Morphism {
    pub fn new(images: [Word; 3]) -> Result<Morphism> {
        if let Some(i) = images.iter().position(|w| w.is_empty()) {
            return Err(Error::ErasingMorphism(i as u8));
        }
        Ok(Morphism { images })
    }

    pub fn identity() -> Morphism {
        Morphism::lit("[0,1,2]")
    }

    /// `γ = [01,2,02]`.
    pub fn gamma() -> Morphism {
        Morphism::lit("[01,2,02]")
    }

    pub fn lit(s: &str) -> Morphism {
        s.parse().unwrap_or_else(|e| panic!("bad morphism literal {s:?}: {e}"))
    }

    pub fn images(&self) -> &[Word; 3] {
        &self.images
    }

    pub fn image(&self, letter: Letter) -> &Word {
        &self.images[letter.index()]
    }

    pub fn max_image_len(&self) -> usize {
        self.images.iter().map(|w| w.len()).max().unwrap_or(0)
    }

    pub fn apply(&self, w: &[Letter]) -> Word {
        apply_morphism(self, w)
    }
}

impl fmt::Display for Morphism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c] = &self.images;
        write!(f, "[{a},{b},{c}]")
    }
}

impl fmt::Debug for Morphism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Morphism{self}")
    }
}

impl FromStr for Morphism {
    type Err = Error;

    fn from_str(s: &str) -> Result<Morphism> {
        let bad = || Error::Parse(format!("morphism must look like [01,2,02], got {s:?}"));
        let inner = s
            .trim()
            .strip_prefix('[')
            .and_then(|t| t.strip_suffix(']'))
            .ok_or_else(bad)?;
        let parts: Vec<&str> = inner.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(bad());
        }
        Morphism::new([parts[0].parse()?, parts[1].parse()?, parts[2].parse()?])
    }
}

impl TryFrom<String> for Morphism {
    type Error = Error;

    fn try_from(s: String) -> Result<Morphism> {
        s.parse()
    }
}

impl From<Morphism> for String {
    fn from(m: Morphism) -> String {
        m.to_string()
    }
}

pub fn apply_morphism(m: &Morphism, w: &[Letter]) -> Word {
    let len = w.iter().map(|&l| m.image(l).len()).sum();
    let mut out = Vec::with_capacity(len);
    for &l in w {
        out.extend_from_slice(m.image(l));
    }
    Word(out)
}

/// `compose(m1, m2)(a) = m1(m2(a))`.
pub fn compose(m1: &Morphism, m2: &Morphism) -> Morphism {
    Morphism {
        images: [0, 1, 2].map(|i| apply_morphism(m1, &m2.images[i])),
    }
}

pub fn reverse_morphism(m: &Morphism) -> Morphism {
    Morphism {
        images: [0, 1, 2].map(|i| m.images[i].reversed()),
    }
}

/// A bijection on {0,1,2}.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Permutation([Letter; 3]);

impl Permutation {
    pub fn identity() -> Permutation {
        Permutation(Letter::ALL)
    }

    pub fn new(mapping: [u8; 3]) -> Result<Permutation> {
        let mut seen = [false; 3];
        let mut out = [Letter::ZERO; 3];
        for (i, &v) in mapping.iter().enumerate() {
            let l = Letter::new(v)?;
            if seen[l.index()] {
                return Err(Error::NotAPermutation(mapping));
            }
            seen[l.index()] = true;
            out[i] = l;
        }
        Ok(Permutation(out))
    }

    /// All six permutations, identity first, in lexicographic order of their mapping.
    pub fn all() -> [Permutation; 6] {
        [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]]
            .map(|m| Permutation::new(m).expect("valid permutation"))
    }

    #[inline]
    pub fn apply_letter(&self, l: Letter) -> Letter {
        self.0[l.index()]
    }

    pub fn mapping(&self) -> [u8; 3] {
        self.0.map(Letter::value)
    }

    pub fn inverse(&self) -> Permutation {
        let mut out = [Letter::ZERO; 3];
        for (i, &l) in self.0.iter().enumerate() {
            out[l.index()] = Letter(i as u8);
        }
        Permutation(out)
    }

    /// `(self ∘ other)(x) = self(other(x))`.
    pub fn then_after(&self, other: &Permutation) -> Permutation {
        Permutation(other.0.map(|l| self.apply_letter(l)))
    }

    pub fn is_identity(&self) -> bool {
        *self == Permutation::identity()
    }

    pub fn permute_word(&self, w: &[Letter]) -> Word {
        Word(w.iter().map(|&l| self.apply_letter(l)).collect())
    }

    /// Conjugated morphism `σ·h·σ⁻¹`: maps `σ(a)` to `σ(h(a))`.
    pub fn permute_morphism(&self, m: &Morphism) -> Morphism {
        let inv = self.inverse();
        Morphism {
            images: Letter::ALL.map(|b| self.permute_word(m.image(inv.apply_letter(b)))),
        }
    }
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c] = self.0;
        write!(f, "(0->{a},1->{b},2->{c})")
    }
}

impl fmt::Debug for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Permutation{self}")
    }
}

/// The first `n` letters of the fixed point `m^ω(seed)`.
pub fn fixed_point_prefix(m: &Morphism, seed: Letter, n: usize) -> Result<Word> {
    let first = m.image(seed);
    if first.len() < 2 || first[0] != seed {
        return Err(Error::NotProlongable { morphism: m.to_string(), seed: seed.value() });
    }
    // w = m(w): the k-th letter of the prefix generated so far determines the
    // next block of the fixed point.
    let mut cur = first.letters().to_vec();
    let mut next_block = 1;
    while cur.len() < n {
        let l = cur[next_block];
        cur.extend_from_slice(m.image(l));
        next_block += 1;
    }
    cur.truncate(n);
    Ok(Word(cur))
}

/// Replaces each block `u·t` by `t·u`.
pub fn conjugate_left(blocks: &[Word], u: &[Letter]) -> Result<Vec<Word>> {
    blocks
        .iter()
        .map(|b| {
            if !b.starts_with(u) {
                return Err(Error::NotCommonPrefix { block: b.to_string(), piece: letters_to_string(u) });
            }
            let mut out = b[u.len()..].to_vec();
            out.extend_from_slice(u);
            Ok(Word(out))
        })
        .collect()
}

/// Replaces each block `t·u` by `u·t`.
pub fn conjugate_right(blocks: &[Word], u: &[Letter]) -> Result<Vec<Word>> {
    blocks
        .iter()
        .map(|b| {
            if !b.ends_with(u) {
                return Err(Error::NotCommonSuffix { block: b.to_string(), piece: letters_to_string(u) });
            }
            let mut out = u.to_vec();
            out.extend_from_slice(&b[..b.len() - u.len()]);
            Ok(Word(out))
        })
        .collect()
}

/// `γ² = [012,02,0102]`.
pub fn gamma_squared() -> Morphism {
    compose(&Morphism::gamma(), &Morphism::gamma())
}

/// For `g = [a,b,c]` returns `g' = [cab, ca, caba]`, the conjugate of `g∘γ²` by `c`.
///
/// Fails with [`Error::ConjugationIdentity`] when `g'(x)·c ≠ c·g(γ²(x))` for some
/// letter, which can only happen if the construction itself is broken.
pub fn derive_next(g: &Morphism) -> Result<Morphism> {
    let [a, b, c] = g.images();
    let cab = c.concat(a).concat(b);
    let ca = c.concat(a);
    let caba = cab.concat(a);
    let next = Morphism::new([cab, ca, caba])?;
    let outer = compose(g, &gamma_squared());
    for x in Letter::ALL {
        let lhs = next.image(x).concat(c);
        let rhs = c.concat(outer.image(x));
        if lhs != rhs {
            return Err(Error::ConjugationIdentity { morphism: g.to_string(), letter: x.value() });
        }
    }
    Ok(next)
}
