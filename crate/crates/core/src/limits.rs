//! The constants λ and μ, letter frequencies of the fixed point of γ, and
//! finite-prefix scans of morphic images.
//!
//! λ is the real root of `x³ − 2x² + x − 1`, the characteristic polynomial of
//! the incidence matrix of γ = [01,2,02]. (The cubic is sometimes misprinted
//! as `x³ − 2x + x − 1`, whose real root is not 1.7548777.) The critical
//! exponent of the fixed point is μ = 2 + 1/(λ² − 1) = 2.4808627…, occasionally
//! quoted as 2.4808726.
//!
//! Scans are evidence gathered on prefixes; they never prove anything about
//! the infinite words.

use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::{complexity_profile, max_exponent_factor, word_exponent, ComplexityProfile, Rational};
use crate::error::{Error, Result};
use crate::structure::{tables, Orientation, TableRow};
use crate::word::{fixed_point_prefix, reverse_morphism, Letter, Morphism, Word};

pub const DEFAULT_TOLERANCE: f64 = 1e-13;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Constants {
    pub lambda: f64,
    pub mu: f64,
    /// `|λ_bisection − λ_newton|`.
    pub newton_agreement: f64,
    pub cubic_residual: f64,
}

pub fn cubic(x: f64) -> f64 {
    ((x - 2.0) * x + 1.0) * x - 1.0
}

fn cubic_derivative(x: f64) -> f64 {
    (3.0 * x - 4.0) * x + 1.0
}

pub fn mu_from_lambda(lambda: f64) -> f64 {
    2.0 + 1.0 / (lambda * lambda - 1.0)
}

/// Bisection on `(1, 2)`, where the cubic changes sign exactly once, checked
/// against Newton's method from 2.
pub fn compute_constants(tolerance: f64) -> Constants {
    let tolerance = tolerance.max(f64::EPSILON);
    let (mut lo, mut hi) = (1.0f64, 2.0f64);
    while hi - lo > tolerance {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if cubic(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let lambda = 0.5 * (lo + hi);

    let mut x = 2.0f64;
    for _ in 0..100 {
        let step = cubic(x) / cubic_derivative(x);
        x -= step;
        if step.abs() < 1e-16 {
            break;
        }
    }

    Constants {
        lambda,
        mu: mu_from_lambda(lambda),
        newton_agreement: (lambda - x).abs(),
        cubic_residual: cubic(lambda).abs(),
    }
}

/// `M[i][j] = |γ(j)|_i`.
pub fn incidence_matrix(m: &Morphism) -> [[u64; 3]; 3] {
    let mut out = [[0; 3]; 3];
    for (j, image) in m.images().iter().enumerate() {
        for l in Letter::ALL {
            out[l.index()][j] = image.count(l) as u64;
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FrequencyVector {
    pub rho: [f64; 3],
}

impl FrequencyVector {
    pub fn sum(&self) -> f64 {
        self.rho.iter().sum()
    }

    pub fn max_deviation(&self, other: &FrequencyVector) -> f64 {
        self.rho.iter().zip(&other.rho).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    pub fn of_word(w: &[Letter]) -> Result<FrequencyVector> {
        if w.is_empty() {
            return Err(Error::EmptyWord);
        }
        let mut counts = [0usize; 3];
        for l in w {
            counts[l.index()] += 1;
        }
        Ok(FrequencyVector { rho: counts.map(|c| c as f64 / w.len() as f64) })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FrequencyMethod {
    Eigenvector,
    Empirical(usize),
}

pub const MIN_EMPIRICAL_LENGTH: usize = 10_000;

/// The dominant eigenvector of γ's incidence matrix is `(1, 1/λ, λ−1)`;
/// normalized it is `(λ, 1, λ(λ−1)) / (λ²+1)`.
pub fn letter_frequencies(method: FrequencyMethod) -> Result<FrequencyVector> {
    match method {
        FrequencyMethod::Eigenvector => {
            let l = compute_constants(DEFAULT_TOLERANCE).lambda;
            let norm = l * l + 1.0;
            Ok(FrequencyVector { rho: [l / norm, 1.0 / norm, l * (l - 1.0) / norm] })
        }
        FrequencyMethod::Empirical(n) => {
            if n < MIN_EMPIRICAL_LENGTH {
                return Err(Error::LengthOutOfRange { n, len: MIN_EMPIRICAL_LENGTH });
            }
            FrequencyVector::of_word(&fixed_point_prefix(&Morphism::gamma(), Letter::ZERO, n)?)
        }
    }
}

/// `‖M·v − λ·v‖∞` for the unnormalized eigenvector `(1, 1/λ, λ−1)`.
pub fn eigen_residual(lambda: f64) -> f64 {
    let m = incidence_matrix(&Morphism::gamma());
    let v = [1.0, 1.0 / lambda, lambda - 1.0];
    (0..3)
        .map(|i| {
            let mv: f64 = (0..3).map(|j| m[i][j] as f64 * v[j]).sum();
            (mv - lambda * v[i]).abs()
        })
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanReport {
    pub morphism: String,
    pub orientation: Orientation,
    pub complexity_ok_up_to: usize,
    pub n_max: usize,
    pub max_exponent: Rational,
    pub below_five_halves: bool,
    pub mu_gap: f64,
    pub prefix_length: usize,
    #[serde(skip)]
    pub profile: ComplexityProfile,
    /// Always "evidence": a finite prefix proves nothing about the infinite word.
    pub status: &'static str,
}

impl ScanReport {
    pub fn passed(&self) -> bool {
        self.complexity_ok_up_to == self.n_max && self.below_five_halves
    }
}

/// The first `len` letters of `m(G)`, or of `m^R(G)` for the reverse orientation.
pub fn image_prefix(m: &Morphism, orientation: Orientation, len: usize) -> Result<Word> {
    let m = match orientation {
        Orientation::Forward => m.clone(),
        Orientation::Reverse => reverse_morphism(m),
    };
    // Every letter of G maps to at least one letter, so `len` source letters suffice.
    let source = fixed_point_prefix(&Morphism::gamma(), Letter::ZERO, len)?;
    let mut image = m.apply(&source);
    image.truncate(len);
    Ok(image)
}

pub fn conjecture_scan(m: &Morphism, orientation: Orientation, n_max: usize, prefix_len: usize) -> Result<ScanReport> {
    let needed = 4 * n_max * m.max_image_len();
    if prefix_len < needed {
        return Err(Error::PrefixTooShort { len: prefix_len, needed });
    }
    let image = image_prefix(m, orientation, prefix_len)?;
    let profile = complexity_profile(&image, n_max)?;
    let (max_exponent, _) = max_exponent_factor(&image)?;
    let mu = compute_constants(DEFAULT_TOLERANCE).mu;
    Ok(ScanReport {
        morphism: m.to_string(),
        orientation,
        complexity_ok_up_to: profile.matches_2n_plus_1_up_to(),
        n_max,
        max_exponent,
        below_five_halves: max_exponent < Rational::FIVE_HALVES,
        mu_gap: mu - max_exponent.to_f64(),
        prefix_length: image.len(),
        profile,
        status: "evidence",
    })
}

/// The row's images in role order `[a, b, c]`, or in printed order when the
/// roles cannot be assigned.
pub fn role_order(row: &TableRow) -> Morphism {
    row.roles().map(|rt| rt.morphism()).unwrap_or_else(|_| row.morphism.clone())
}

/// Scans every table row, in role order, in its own orientation.
pub fn scan_tables(n_max: usize, prefix_len: usize) -> Result<Vec<(TableRow, ScanReport)>> {
    tables()
        .par_iter()
        .map(|row| {
            let report = conjecture_scan(&role_order(row), row.id.kind.orientation(), n_max, prefix_len)?;
            Ok((row.clone(), report))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TransferReport {
    pub morphism: String,
    pub eps: f64,
    pub prefix_length: usize,
    /// `|u|` and `|uuu'|` of the repetition found in the prefix of G.
    pub period: usize,
    pub length: usize,
    pub source_exponent: Rational,
    /// Largest deviation of letter frequencies in `u` and `uuu'` from ρ.
    pub epsilon1: f64,
    /// `1 − Σ|h(a)|(ρ_a−ε₁) / Σ|h(a)|(ρ_a+ε₁)`.
    pub epsilon: f64,
    /// `(μ − eps)(1 − ε)`.
    pub lower_bound: f64,
    /// `|h(uuu')| / |h(u)|`.
    pub image_ratio: Rational,
    /// Exponent of `h(uuu')` under its own minimal period.
    pub image_exponent: Rational,
    pub passed: bool,
}

/// Pushes a near-critical repetition `uuu'` of G through `m` and checks the
/// image against the lower bound from the frequency estimate.
pub fn exponent_transfer_demo(m: &Morphism, eps: f64, prefix_len: usize) -> Result<TransferReport> {
    let constants = compute_constants(DEFAULT_TOLERANCE);
    let g = fixed_point_prefix(&Morphism::gamma(), Letter::ZERO, prefix_len)?;
    let (source_exponent, witness) = max_exponent_factor(&g)?;
    let target = constants.mu - eps;
    if source_exponent.to_f64() <= target {
        return Err(Error::NoWitnessFound(format!(
            "best repetition in a prefix of length {prefix_len} has exponent {source_exponent} ≈ {:.6}, need more than {target:.6}",
            source_exponent.to_f64()
        )));
    }
    let whole = witness.factor(&g);
    let u = whole.slice(0, witness.period);

    let rho = letter_frequencies(FrequencyMethod::Eigenvector)?;
    let epsilon1 = [&u, &whole]
        .into_iter()
        .map(|w| FrequencyVector::of_word(w).map(|f| f.max_deviation(&rho)))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let weighted = |shift: f64| -> f64 {
        Letter::ALL.iter().map(|&a| m.image(a).len() as f64 * (rho.rho[a.index()] + shift)).sum()
    };
    let epsilon = 1.0 - weighted(-epsilon1) / weighted(epsilon1);
    let lower_bound = target * (1.0 - epsilon);

    let image_u = m.apply(&u);
    let image = m.apply(&whole);
    let image_ratio = Rational::ratio(image.len(), image_u.len());
    let image_exponent = word_exponent(&image)?;
    Ok(TransferReport {
        morphism: m.to_string(),
        eps,
        prefix_length: prefix_len,
        period: witness.period,
        length: witness.length,
        source_exponent,
        epsilon1,
        epsilon,
        lower_bound,
        image_ratio,
        image_exponent,
        passed: image_ratio.to_f64() > lower_bound && image_exponent >= image_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structure::{table_row, TableId};

    #[test]
    #[allow(clippy::excessive_precision)]
    fn constants_match_known_values() {
        let c = compute_constants(DEFAULT_TOLERANCE);
        assert!((c.lambda - 1.7548777).abs() < 1e-6);
        assert!((c.lambda - 1.754_877_666_246_692_760).abs() < 1e-12);
        // 2 + 1/(λ²−1) to 20 digits, computed independently
        assert!((c.mu - 2.480_862_716_147_236_962).abs() < 1e-12);
        // the commonly quoted 2.4808726 has two digits swapped
        assert!((c.mu - 2.4808726).abs() > 5e-6);
        assert!(c.newton_agreement < 1e-12);
        assert!(c.cubic_residual < 1e-12);
        assert!((c.mu - 2.0 - 1.0 / (c.lambda * c.lambda - 1.0)).abs() < 1e-12);
        // the misprinted cubic x³ − x − 1 has a different root
        let misprint = |x: f64| x * x * x - x - 1.0;
        assert!(misprint(c.lambda).abs() > 1.0);
    }

    #[test]
    fn incidence_matrix_of_gamma() {
        assert_eq!(incidence_matrix(&Morphism::gamma()), [[1, 0, 1], [1, 0, 0], [0, 1, 1]]);
        let l = compute_constants(DEFAULT_TOLERANCE).lambda;
        assert!(eigen_residual(l) < 1e-10);
    }

    #[test]
    fn frequencies() {
        let eig = letter_frequencies(FrequencyMethod::Eigenvector).unwrap();
        assert!((eig.sum() - 1.0).abs() < 1e-12);
        for (got, want) in eig.rho.iter().zip([0.43016, 0.24512, 0.32472]) {
            assert!((got - want).abs() < 1e-5, "{got} vs {want}");
        }
        let emp = letter_frequencies(FrequencyMethod::Empirical(100_000)).unwrap();
        assert!(emp.max_deviation(&eig) < 1e-3);
        assert!(letter_frequencies(FrequencyMethod::Empirical(100)).is_err());
    }

    #[test]
    fn fixed_point_scan() {
        let r = conjecture_scan(&Morphism::identity(), Orientation::Forward, 30, 10_000).unwrap();
        assert_eq!(r.complexity_ok_up_to, 30);
        assert!(r.max_exponent > Rational::new(12, 5).unwrap());
        assert!(r.below_five_halves);
        assert!(r.mu_gap > 0.0);
        assert!(r.passed());
    }

    #[test]
    fn table_rows_scan() {
        let id = |s: &str| s.parse::<TableId>().unwrap();
        let g9 = table_row(id("g9")).unwrap();
        let r = conjecture_scan(&role_order(&g9), Orientation::Forward, 30, 10_000).unwrap();
        assert!(r.passed(), "{r:?}");
        let h11 = table_row(id("h11")).unwrap();
        let r = conjecture_scan(&role_order(&h11), Orientation::Reverse, 30, 10_000).unwrap();
        assert!(r.passed(), "{r:?}");
    }

    #[test]
    fn short_prefix_is_rejected() {
        let err = conjecture_scan(&Morphism::gamma(), Orientation::Forward, 30, 100).unwrap_err();
        assert_eq!(err, Error::PrefixTooShort { len: 100, needed: 240 });
    }

    #[test]
    fn exponent_transfer() {
        let id = exponent_transfer_demo(&Morphism::identity(), 0.05, 20_000).unwrap();
        assert!(id.source_exponent.to_f64() > 2.43);
        assert!(id.passed);
        let g = exponent_transfer_demo(&Morphism::gamma(), 0.05, 20_000).unwrap();
        assert!(g.passed, "{g:?}");
        let loose = exponent_transfer_demo(&Morphism::gamma(), 2.0, 100).unwrap();
        assert!(loose.passed);
        assert!(matches!(
            exponent_transfer_demo(&Morphism::identity(), 1e-9, 200),
            Err(Error::NoWitnessFound(_))
        ));
    }
}
