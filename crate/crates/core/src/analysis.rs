//! Periods, exponents, repetition detection and factor complexity.
//!
//! All exponent comparisons are exact: a factor of length `L` and period `p`
//! reaches the threshold `a/b` iff `L·b ≥ a·p`.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use num_integer::Integer;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::word::{Letter, Word};

/// A nonnegative rational in lowest terms.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Rational {
    num: u64,
    den: u64,
}

impl Rational {
    pub const FIVE_HALVES: Rational = Rational { num: 5, den: 2 };

    pub fn new(num: u64, den: u64) -> Result<Rational> {
        if den == 0 {
            return Err(Error::Parse(format!("zero denominator in {num}/0")));
        }
        let g = num.gcd(&den);
        Ok(Rational { num: num / g, den: den / g })
    }

    pub fn integer(n: u64) -> Rational {
        Rational { num: n, den: 1 }
    }

    /// `length / period`; panics on a zero period.
    pub fn ratio(length: usize, period: usize) -> Rational {
        Rational::new(length as u64, period as u64).expect("nonzero period")
    }

    pub fn numer(&self) -> u64 {
        self.num
    }

    pub fn denom(&self) -> u64 {
        self.den
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// Least `L` with `L/period ≥ self`, i.e. `⌈self·period⌉`.
    pub fn min_length_for_period(&self, period: usize) -> usize {
        let prod = self.num as u128 * period as u128;
        prod.div_ceil(self.den as u128) as usize
    }

    /// `length/period ≥ self`.
    #[inline]
    pub fn reached_by(&self, length: usize, period: usize) -> bool {
        length as u128 * self.den as u128 >= self.num as u128 * period as u128
    }
}

impl Ord for Rational {
    fn cmp(&self, other: &Rational) -> Ordering {
        (self.num as u128 * other.den as u128).cmp(&(other.num as u128 * self.den as u128))
    }
}

impl PartialOrd for Rational {
    fn partial_cmp(&self, other: &Rational) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

impl fmt::Debug for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

impl FromStr for Rational {
    type Err = Error;

    fn from_str(s: &str) -> Result<Rational> {
        let parse = |t: &str| {
            t.trim()
                .parse::<u64>()
                .map_err(|_| Error::Parse(format!("bad rational {s:?}")))
        };
        match s.split_once('/') {
            Some((n, d)) => Rational::new(parse(n)?, parse(d)?),
            None => Ok(Rational::integer(parse(s)?)),
        }
    }
}

impl TryFrom<String> for Rational {
    type Error = Error;

    fn try_from(s: String) -> Result<Rational> {
        s.parse()
    }
}

impl From<Rational> for String {
    fn from(r: Rational) -> String {
        r.to_string()
    }
}

/// Locates the factor `w[start .. start+length)`, which has period `period`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RepetitionWitness {
    pub start: usize,
    pub length: usize,
    pub period: usize,
}

impl RepetitionWitness {
    pub fn exponent(&self) -> Rational {
        Rational::ratio(self.length, self.period)
    }

    pub fn end(&self) -> usize {
        self.start + self.length
    }

    pub fn factor(&self, w: &[Letter]) -> Word {
        Word::from(&w[self.start..self.end()])
    }
}

/// Smallest `p ≥ 1` such that `w[i] = w[i+p]` wherever both sides exist.
pub fn minimal_period(w: &[Letter]) -> Result<usize> {
    if w.is_empty() {
        return Err(Error::EmptyWord);
    }
    // Border array; the minimal period is |w| minus the longest proper border.
    let mut border = vec![0usize; w.len() + 1];
    let mut k = 0;
    for i in 1..w.len() {
        while k > 0 && w[i] != w[k] {
            k = border[k];
        }
        if w[i] == w[k] {
            k += 1;
        }
        border[i + 1] = k;
    }
    Ok(w.len() - border[w.len()])
}

pub fn word_exponent(w: &[Letter]) -> Result<Rational> {
    let p = minimal_period(w)?;
    Ok(Rational::ratio(w.len(), p))
}

/// Witness ending at the last letter of `w` with the smallest possible period,
/// extended to the left as far as that period allows.
pub fn suffix_power_check(w: &[Letter], threshold: Rational) -> Option<RepetitionWitness> {
    let n = w.len();
    for period in 1..=n {
        let need = threshold.min_length_for_period(period).max(1);
        if need > n {
            break;
        }
        let start = n - need;
        if (start + period..n).all(|i| w[i] == w[i - period]) {
            let mut start = start;
            while start > 0 && start - 1 + period < n && w[start - 1] == w[start - 1 + period] {
                start -= 1;
            }
            return Some(RepetitionWitness { start, length: n - start, period });
        }
    }
    None
}

/// The witness with the smallest end index, ties broken by smallest period.
pub fn contains_power_geq(w: &[Letter], threshold: Rational) -> Option<RepetitionWitness> {
    (1..=w.len()).find_map(|end| suffix_power_check(&w[..end], threshold))
}

/// Largest exponent of any factor, with the first factor (by period, then end) attaining it.
pub fn max_exponent_factor(w: &[Letter]) -> Result<(Rational, RepetitionWitness)> {
    let n = w.len();
    if n == 0 {
        return Err(Error::EmptyWord);
    }
    let mut best = RepetitionWitness { start: 0, length: 1, period: 1 };
    for period in 1..n {
        // No factor with period p can exceed n/p.
        if n as u128 * best.period as u128 <= best.length as u128 * period as u128 {
            break;
        }
        let mut run = 0usize;
        for i in 0..n - period {
            if w[i] == w[i + period] {
                run += 1;
                let length = run + period;
                if length as u128 * best.period as u128 > best.length as u128 * period as u128 {
                    best = RepetitionWitness { start: i + 1 - run, length, period };
                }
            } else {
                run = 0;
            }
        }
    }
    Ok((best.exponent(), best))
}

pub fn factor_set(w: &[Letter], n: usize) -> Result<BTreeSet<Word>> {
    if n > w.len() {
        return Err(Error::LengthOutOfRange { n, len: w.len() });
    }
    if n == 0 {
        return Ok(BTreeSet::from([Word::new()]));
    }
    Ok(w.windows(n).map(Word::from).collect())
}

pub fn factor_count(w: &[Letter], n: usize) -> Result<usize> {
    if n > w.len() {
        return Err(Error::LengthOutOfRange { n, len: w.len() });
    }
    if n == 0 {
        return Ok(1);
    }
    Ok(w.windows(n).collect::<HashSet<_>>().len())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComplexityEntry {
    pub n: usize,
    pub count: usize,
    /// The first half of the prefix already has `count` factors of length `n`.
    pub stabilized: bool,
}

/// Factor counts `C(1..=n_max)` measured on a finite prefix.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComplexityProfile {
    pub entries: Vec<ComplexityEntry>,
    pub source_prefix_length: usize,
}

impl ComplexityProfile {
    pub fn count(&self, n: usize) -> Option<usize> {
        self.entries.get(n.checked_sub(1)?).map(|e| e.count)
    }

    /// Largest `m` such that `C(n) = 2n+1` and is stabilized for every `n ≤ m`.
    pub fn matches_2n_plus_1_up_to(&self) -> usize {
        self.entries
            .iter()
            .take_while(|e| e.stabilized && e.count == 2 * e.n + 1)
            .count()
    }
}

pub fn complexity_profile(prefix: &[Letter], n_max: usize) -> Result<ComplexityProfile> {
    let needed = 4 * n_max;
    if prefix.len() < needed {
        return Err(Error::PrefixTooShort { len: prefix.len(), needed });
    }
    let half = &prefix[..prefix.len() / 2];
    let entries = (1..=n_max)
        .map(|n| {
            let count = factor_count(prefix, n)?;
            let early = factor_count(half, n)?;
            Ok(ComplexityEntry { n, count, stabilized: early == count })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ComplexityProfile { entries, source_prefix_length: prefix.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::word::{fixed_point_prefix, Morphism};

    fn w(s: &str) -> Word {
        Word::lit(s)
    }

    fn r(s: &str) -> Rational {
        s.parse().unwrap()
    }

    #[test]
    fn rational_basics() {
        assert_eq!(Rational::new(10, 4).unwrap().to_string(), "5/2");
        assert_eq!(r("7/3").to_string(), "7/3");
        assert_eq!(r("2").to_string(), "2/1");
        assert!(r("5/2") > r("12/5"));
        assert!(r("5/2") == r("10/4"));
        assert!("1/0".parse::<Rational>().is_err());
        assert_eq!(Rational::FIVE_HALVES.min_length_for_period(2), 5);
        assert_eq!(Rational::FIVE_HALVES.min_length_for_period(3), 8);
    }

    #[test]
    fn minimal_periods() {
        assert_eq!(minimal_period(&w("0101")).unwrap(), 2);
        assert_eq!(minimal_period(&w("000")).unwrap(), 1);
        assert_eq!(minimal_period(&w("01202")).unwrap(), 5);
        assert_eq!(minimal_period(&[]), Err(Error::EmptyWord));
    }

    #[test]
    fn exponents() {
        assert_eq!(word_exponent(&w("01010")).unwrap(), r("5/2"));
        assert_eq!(word_exponent(&w("0120120")).unwrap(), r("7/3"));
        assert_eq!(word_exponent(&w("0")).unwrap(), r("1"));
    }

    #[test]
    fn batch_power_detection() {
        let wit = contains_power_geq(&w("0102001020010"), Rational::FIVE_HALVES).unwrap();
        assert_eq!((wit.start, wit.length, wit.period), (0, 13, 5));
        assert!(contains_power_geq(&w("012"), Rational::FIVE_HALVES).is_none());
        let wit = contains_power_geq(&w("21212"), Rational::FIVE_HALVES).unwrap();
        assert_eq!((wit.length, wit.period), (5, 2));
    }

    #[test]
    fn suffix_power_detection() {
        let word = w("0102020");
        let wit = suffix_power_check(&word, Rational::FIVE_HALVES).unwrap();
        assert_eq!(wit.factor(&word), w("02020"));
        assert_eq!(wit.period, 2);
        assert!(suffix_power_check(&w("0102011"), Rational::FIVE_HALVES).is_none());
        assert!(suffix_power_check(&[], Rational::FIVE_HALVES).is_none());
    }

    #[test]
    fn max_exponents() {
        assert_eq!(max_exponent_factor(&w("01")).unwrap().0, r("1"));
        assert_eq!(max_exponent_factor(&w("02020")).unwrap().0, r("5/2"));
        assert_eq!(max_exponent_factor(&[]).unwrap_err(), Error::EmptyWord);
        let g = fixed_point_prefix(&Morphism::gamma(), Letter::ZERO, 10_000).unwrap();
        let (e, wit) = max_exponent_factor(&g).unwrap();
        assert!(e > r("12/5") && e < r("5/2"), "got {e}");
        assert_eq!(word_exponent(&wit.factor(&g)).unwrap(), e);
    }

    #[test]
    fn factor_sets() {
        let s = factor_set(&w("012020102"), 2).unwrap();
        let expected: BTreeSet<Word> = ["01", "12", "20", "02", "10"].iter().map(|x| w(x)).collect();
        assert_eq!(s, expected);
        assert_eq!(factor_count(&w("012020102"), 2).unwrap(), 5);
        assert_eq!(factor_count(&w("000"), 1).unwrap(), 1);
        assert_eq!(factor_set(&w("000"), 1).unwrap().len(), 1);
        assert_eq!(factor_set(&w("01"), 0).unwrap().len(), 1);
        assert!(matches!(factor_count(&w("01"), 3), Err(Error::LengthOutOfRange { .. })));
        let g = fixed_point_prefix(&Morphism::gamma(), Letter::ZERO, 2000).unwrap();
        assert_eq!(factor_count(&g, 3).unwrap(), 7);
    }

    #[test]
    fn complexity_profiles() {
        let g = fixed_point_prefix(&Morphism::gamma(), Letter::ZERO, 4000).unwrap();
        let prof = complexity_profile(&g, 100).unwrap();
        assert_eq!(prof.matches_2n_plus_1_up_to(), 100);
        assert_eq!(complexity_profile(&g, 1).unwrap().count(1), Some(3));
        let zeros = Word::from_letters(vec![Letter::ZERO; 40]);
        let prof = complexity_profile(&zeros, 10).unwrap();
        assert!(prof.entries.iter().all(|e| e.count == 1));
        assert!(matches!(complexity_profile(&zeros, 11), Err(Error::PrefixTooShort { .. })));
    }
}
