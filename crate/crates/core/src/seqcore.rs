//! Finite presentations of two-sided positive sequences.
//!
//! An [`EventuallyPeriodicSequence`] is an explicit table on `[core_lo, core_hi]`
//! with a periodic tail on each side. Every limit of windowed products
//! `(prod_{j=k}^{k+n} v_j)^{1/n}` taken under a sup/inf over `k` reduces, for
//! such a sequence, to the geometric means of the two tail periods. The
//! finite core only contributes `O(1/n)` to the log-rate.
//!
//! All products are evaluated as sums of logarithms.

use std::cmp::Ordering;
use std::fmt;

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative tolerance used to compare a floating rate against 1 when no
/// exact rational presentation is available.
pub const RATE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SequenceError {
    #[error("{what} must be nonempty")]
    Empty { what: &'static str },
    #[error("{what}[{index}] = {value} is not a positive finite real")]
    NotPositive {
        what: &'static str,
        index: usize,
        value: f64,
    },
    #[error("{what}[{index}] has an exact value that is not positive")]
    ExactNotPositive { what: &'static str, index: usize },
}

/// A positive entry of a presentation, optionally carrying its exact
/// rational value (entries written as `a/b` or decimals in configs).
#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub value: f64,
    pub exact: Option<BigRational>,
}

impl Entry {
    pub fn float(value: f64) -> Self {
        Self { value, exact: None }
    }

    pub fn rational(exact: BigRational) -> Self {
        let value = rational_to_f64(&exact);
        Self {
            value,
            exact: Some(exact),
        }
    }
}

impl From<f64> for Entry {
    fn from(value: f64) -> Self {
        Entry::float(value)
    }
}

pub fn rational_to_f64(r: &BigRational) -> f64 {
    use num_traits::ToPrimitive;
    r.to_f64().unwrap_or(f64::NAN)
}

/// Which side of the core a tail lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Negative,
    Positive,
}

/// Quantifier over the window anchor `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantifier {
    SupAllK,
    InfAllK,
    SupKInNegatives,
    InfKInNegatives,
    SupKInNaturals,
    InfKInNaturals,
}

impl Quantifier {
    fn is_sup(self) -> bool {
        matches!(
            self,
            Quantifier::SupAllK | Quantifier::SupKInNegatives | Quantifier::SupKInNaturals
        )
    }

    /// Anchor range `[lo, hi]` for the finite-horizon estimator.
    fn anchors(self, k_span: i64) -> (i64, i64) {
        match self {
            Quantifier::SupAllK | Quantifier::InfAllK => (-k_span, k_span),
            Quantifier::SupKInNegatives | Quantifier::InfKInNegatives => (-k_span, -1),
            Quantifier::SupKInNaturals | Quantifier::InfKInNaturals => (1, k_span),
        }
    }
}

/// `Forward` windows are `v_k .. v_{k+n}`, `Backward` windows `v_{k-n} .. v_k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    Backward,
}

/// Tail geometric means of a presentation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SideRate {
    pub gm_neg: f64,
    pub gm_pos: f64,
    neg_exact: Option<Ordering>,
    pos_exact: Option<Ordering>,
}

impl SideRate {
    /// Builds a rate pair with no exact information.
    pub fn new(gm_neg: f64, gm_pos: f64) -> Self {
        Self {
            gm_neg,
            gm_pos,
            neg_exact: None,
            pos_exact: None,
        }
    }

    pub fn get(&self, side: Side) -> f64 {
        match side {
            Side::Negative => self.gm_neg,
            Side::Positive => self.gm_pos,
        }
    }

    /// Compares the tail geometric mean of `side` with 1, exactly when the
    /// period was given as rationals.
    pub fn cmp_one(&self, side: Side) -> Ordering {
        let exact = match side {
            Side::Negative => self.neg_exact,
            Side::Positive => self.pos_exact,
        };
        exact.unwrap_or_else(|| cmp_one_approx(self.get(side)))
    }

    pub fn is_exact(&self, side: Side) -> bool {
        match side {
            Side::Negative => self.neg_exact.is_some(),
            Side::Positive => self.pos_exact.is_some(),
        }
    }
}

/// Compares a positive rate with 1 using [`RATE_TOLERANCE`] on its logarithm.
pub fn cmp_one_approx(rate: f64) -> Ordering {
    let l = rate.ln();
    if l.abs() <= RATE_TOLERANCE {
        Ordering::Equal
    } else if l < 0.0 {
        Ordering::Less
    } else {
        Ordering::Greater
    }
}

/// A two-sided positive sequence given by an explicit core table and two
/// periodic tails.
///
/// For `k < core_lo` the negative period is read right-to-left starting at
/// `core_lo - 1`: `v_{core_lo-1}` is the last period entry, `v_{core_lo-2}`
/// the one before it, and so on cyclically.
#[derive(Debug, Clone, PartialEq)]
pub struct EventuallyPeriodicSequence {
    core_lo: i64,
    core: Vec<f64>,
    neg_period: Vec<f64>,
    pos_period: Vec<f64>,
    neg_exact: Option<Ordering>,
    pos_exact: Option<Ordering>,
}

fn check_positive(what: &'static str, values: &[f64]) -> Result<(), SequenceError> {
    if values.is_empty() {
        return Err(SequenceError::Empty { what });
    }
    for (index, &value) in values.iter().enumerate() {
        if !(value.is_finite() && value > 0.0) {
            return Err(SequenceError::NotPositive { what, index, value });
        }
    }
    Ok(())
}

fn exact_cmp(what: &'static str, entries: &[Entry]) -> Result<Option<Ordering>, SequenceError> {
    let mut product = BigRational::one();
    for (index, e) in entries.iter().enumerate() {
        match &e.exact {
            Some(r) => {
                if !r.is_positive() {
                    return Err(SequenceError::ExactNotPositive { what, index });
                }
                product *= r;
            }
            None => return Ok(None),
        }
    }
    Ok(Some(product.cmp(&BigRational::one())))
}

impl EventuallyPeriodicSequence {
    pub fn new(
        core_lo: i64,
        core: Vec<f64>,
        neg_period: Vec<f64>,
        pos_period: Vec<f64>,
    ) -> Result<Self, SequenceError> {
        check_positive("core", &core)?;
        check_positive("neg_period", &neg_period)?;
        check_positive("pos_period", &pos_period)?;
        Ok(Self {
            core_lo,
            core,
            neg_period,
            pos_period,
            neg_exact: None,
            pos_exact: None,
        })
    }

    /// Builds a presentation from entries that may carry exact rationals.
    /// A tail whose period entries are all exact gets an exact comparison of
    /// its geometric mean against 1.
    pub fn from_entries(
        core_lo: i64,
        core: &[Entry],
        neg_period: &[Entry],
        pos_period: &[Entry],
    ) -> Result<Self, SequenceError> {
        let values = |es: &[Entry]| es.iter().map(|e| e.value).collect::<Vec<_>>();
        let mut seq = Self::new(
            core_lo,
            values(core),
            values(neg_period),
            values(pos_period),
        )?;
        exact_cmp("core", core)?;
        seq.neg_exact = exact_cmp("neg_period", neg_period)?;
        seq.pos_exact = exact_cmp("pos_period", pos_period)?;
        Ok(seq)
    }

    /// The constant sequence `v ≡ value`.
    pub fn constant(value: f64) -> Result<Self, SequenceError> {
        Self::new(0, vec![value], vec![value], vec![value])
    }

    /// `v_k = neg` for `k < 0` (so also `v_{-1}`), `v_k = pos` for `k ≥ 0`.
    pub fn two_sided(neg: f64, pos: f64) -> Result<Self, SequenceError> {
        Self::new(0, vec![pos], vec![neg], vec![pos])
    }

    pub fn core_lo(&self) -> i64 {
        self.core_lo
    }

    pub fn core_hi(&self) -> i64 {
        self.core_lo + self.core.len() as i64 - 1
    }

    pub fn core(&self) -> &[f64] {
        &self.core
    }

    pub fn neg_period(&self) -> &[f64] {
        &self.neg_period
    }

    pub fn pos_period(&self) -> &[f64] {
        &self.pos_period
    }

    pub fn period(&self, side: Side) -> &[f64] {
        match side {
            Side::Negative => &self.neg_period,
            Side::Positive => &self.pos_period,
        }
    }

    pub fn exact_tail(&self, side: Side) -> Option<Ordering> {
        match side {
            Side::Negative => self.neg_exact,
            Side::Positive => self.pos_exact,
        }
    }

    /// Overrides the exact tail comparisons. Callers deriving a sequence
    /// from an exactly presented one use this to carry the information over.
    pub fn with_exact_tails(mut self, neg: Option<Ordering>, pos: Option<Ordering>) -> Self {
        self.neg_exact = neg;
        self.pos_exact = pos;
        self
    }

    pub fn eval(&self, k: i64) -> f64 {
        let hi = self.core_hi();
        if k < self.core_lo {
            let len = self.neg_period.len() as i64;
            let back = (self.core_lo - 1 - k).rem_euclid(len);
            self.neg_period[(len - 1 - back) as usize]
        } else if k > hi {
            let len = self.pos_period.len() as i64;
            self.pos_period[(k - hi - 1).rem_euclid(len) as usize]
        } else {
            self.core[(k - self.core_lo) as usize]
        }
    }

    pub fn log_eval(&self, k: i64) -> f64 {
        self.eval(k).ln()
    }

    /// `sum_{j=k}^{k+n} ln v_j`.
    pub fn window_log_sum(&self, k: i64, n: u64) -> f64 {
        self.cumulative_log(k + n as i64 + 1) - self.cumulative_log(k)
    }

    /// Signed cumulative log-sum anchored at 0: `sum_{j=0}^{k-1} ln v_j` for
    /// `k ≥ 0` and `-sum_{j=k}^{-1} ln v_j` for `k < 0`. Runs in
    /// `O(|core| + |period|)` regardless of `|k|`.
    pub fn cumulative_log(&self, k: i64) -> f64 {
        self.log_sum_from_core_lo(k) - self.log_sum_from_core_lo(0)
    }

    // sum_{j=core_lo}^{k-1} ln v_j, negated when k < core_lo
    fn log_sum_from_core_lo(&self, k: i64) -> f64 {
        let logs = |vs: &[f64]| vs.iter().map(|v| v.ln()).collect::<Vec<_>>();
        if k >= self.core_lo {
            let in_core = ((k - self.core_lo) as usize).min(self.core.len());
            let mut acc: f64 = self.core[..in_core].iter().map(|v| v.ln()).sum();
            let beyond = k - self.core_hi() - 1;
            if beyond > 0 {
                let period = logs(&self.pos_period);
                let len = period.len() as i64;
                let full = beyond / len;
                let rest = (beyond % len) as usize;
                acc +=
                    full as f64 * period.iter().sum::<f64>() + period[..rest].iter().sum::<f64>();
            }
            acc
        } else {
            let period = logs(&self.neg_period);
            let len = period.len() as i64;
            let count = self.core_lo - k;
            let full = count / len;
            let rest = (count % len) as usize;
            let partial: f64 = period[period.len() - rest..].iter().sum();
            -(full as f64 * period.iter().sum::<f64>() + partial)
        }
    }

    /// `prod_{j=k}^{k+n} v_j`, the product of the `n + 1` values starting at `k`.
    pub fn window_product(&self, k: i64, n: u64) -> f64 {
        self.window_log_sum(k, n).exp()
    }

    /// Global `(inf, sup)` of the sequence.
    pub fn bounds(&self) -> (f64, f64) {
        let all = self
            .core
            .iter()
            .chain(&self.neg_period)
            .chain(&self.pos_period)
            .copied();
        let (lo, hi) = all.fold((f64::INFINITY, 0.0_f64), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
        debug_assert!(lo > 0.0 && hi.is_finite());
        (lo, hi)
    }

    pub fn side_rate(&self) -> SideRate {
        SideRate {
            gm_neg: geometric_mean(&self.neg_period),
            gm_pos: geometric_mean(&self.pos_period),
            neg_exact: self.neg_exact,
            pos_exact: self.pos_exact,
        }
    }

    /// Exact limit of `(Q_n)^{1/n}` where `Q_n` is the quantified window
    /// product of gap `n`.
    ///
    /// Long windows have log-rate equal to a convex combination of the two
    /// tail log-means. Which combinations are reachable depends on where the
    /// anchors sit relative to the window direction: backward windows
    /// anchored at negative `k` and forward windows anchored at positive `k`
    /// stay in one tail, every other pairing sweeps across the core.
    pub fn rate_exact(&self, quantifier: Quantifier, direction: Direction) -> f64 {
        let rates = self.side_rate();
        let one_sided = match (quantifier, direction) {
            (Quantifier::SupKInNegatives | Quantifier::InfKInNegatives, Direction::Backward) => {
                Some(rates.gm_neg)
            }
            (Quantifier::SupKInNaturals | Quantifier::InfKInNaturals, Direction::Forward) => {
                Some(rates.gm_pos)
            }
            _ => None,
        };
        one_sided.unwrap_or(if quantifier.is_sup() {
            rates.gm_neg.max(rates.gm_pos)
        } else {
            rates.gm_neg.min(rates.gm_pos)
        })
    }

    /// Finite-horizon estimate of [`rate_exact`](Self::rate_exact): the
    /// quantified window product over anchors `|k| ≤ k_span` at gap `n`,
    /// normalized by its number of factors `n + 1`.
    pub fn rate_horizon(
        &self,
        quantifier: Quantifier,
        direction: Direction,
        n: u64,
        k_span: u64,
    ) -> f64 {
        assert!(
            n >= 1 && k_span >= 1,
            "rate_horizon needs n ≥ 1 and k_span ≥ 1"
        );
        let n = n as i64;
        let (a_lo, a_hi) = quantifier.anchors(k_span as i64);
        let (start_lo, start_hi) = match direction {
            Direction::Forward => (a_lo, a_hi),
            Direction::Backward => (a_lo - n, a_hi - n),
        };
        // prefix[i] = sum of logs over [start_lo, start_lo + i)
        let total = (start_hi + n - start_lo + 1) as usize;
        let mut prefix = Vec::with_capacity(total + 1);
        prefix.push(0.0);
        let mut acc = 0.0;
        for j in start_lo..=start_hi + n {
            acc += self.log_eval(j);
            prefix.push(acc);
        }
        let sums =
            (0..=(start_hi - start_lo) as usize).map(|i| prefix[i + n as usize + 1] - prefix[i]);
        let best = if quantifier.is_sup() {
            sums.fold(f64::NEG_INFINITY, f64::max)
        } else {
            sums.fold(f64::INFINITY, f64::min)
        };
        (best / (n + 1) as f64).exp()
    }

    /// `w_k = v_{k + offset}`.
    pub fn shifted(&self, offset: i64) -> Self {
        Self {
            core_lo: self.core_lo - offset,
            ..self.clone()
        }
    }

    /// Pointwise power `v_k^e`. Exact tail comparisons flip for negative `e`.
    pub fn powf(&self, e: f64) -> Self {
        let map = |vs: &[f64]| vs.iter().map(|v| v.powf(e)).collect::<Vec<_>>();
        let flip = |o: Option<Ordering>| {
            o.map(|o| {
                if e == 0.0 {
                    Ordering::Equal
                } else if e < 0.0 {
                    o.reverse()
                } else {
                    o
                }
            })
        };
        Self {
            core_lo: self.core_lo,
            core: map(&self.core),
            neg_period: map(&self.neg_period),
            pos_period: map(&self.pos_period),
            neg_exact: flip(self.neg_exact),
            pos_exact: flip(self.pos_exact),
        }
    }

    /// Same sequence with the explicit table widened to cover `[lo, hi]`.
    pub fn expanded(&self, lo: i64, hi: i64) -> Self {
        let new_lo = self.core_lo.min(lo);
        let new_hi = self.core_hi().max(hi);
        let core = (new_lo..=new_hi).map(|k| self.eval(k)).collect();
        // Re-anchor the periods so the tails continue seamlessly.
        let neg_len = self.neg_period.len() as i64;
        let neg_period = (0..neg_len)
            .map(|i| self.eval(new_lo - neg_len + i))
            .collect();
        let pos_len = self.pos_period.len() as i64;
        let pos_period = (0..pos_len).map(|i| self.eval(new_hi + 1 + i)).collect();
        Self {
            core_lo: new_lo,
            core,
            neg_period,
            pos_period,
            neg_exact: self.neg_exact,
            pos_exact: self.pos_exact,
        }
    }

    /// Multiplies the core entry at `k` by `factor`. `k` must lie in the core.
    pub fn scale_core(&mut self, k: i64, factor: f64) {
        assert!(
            (self.core_lo..=self.core_hi()).contains(&k),
            "index {k} outside core"
        );
        self.core[(k - self.core_lo) as usize] *= factor;
    }
}

impl fmt::Display for EventuallyPeriodicSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "(..{:?}) [{}: {:?}] ({:?}..)",
            self.neg_period, self.core_lo, self.core, self.pos_period
        )
    }
}

pub fn geometric_mean(values: &[f64]) -> f64 {
    let s: f64 = values.iter().map(|v| v.ln()).sum();
    (s / values.len() as f64).exp()
}

/// Parses `"a/b"`, an integer, or a finite decimal into an exact rational.
pub fn parse_rational(text: &str) -> Option<BigRational> {
    use num_bigint::BigInt;
    let text = text.trim();
    if let Some((num, den)) = text.split_once('/') {
        let num: BigInt = num.trim().parse().ok()?;
        let den: BigInt = den.trim().parse().ok()?;
        if den.is_zero() {
            return None;
        }
        return Some(BigRational::new(num, den));
    }
    let (mantissa, exponent) = match text.split_once(['e', 'E']) {
        Some((m, e)) => (m, e.parse::<i32>().ok()?),
        None => (text, 0),
    };
    let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if frac_part.chars().any(|c| !c.is_ascii_digit()) {
        return None;
    }
    let digits: BigInt = format!("{int_part}{frac_part}").parse().ok()?;
    let scale = exponent - frac_part.len() as i32;
    let ten = BigInt::from(10);
    Some(if scale >= 0 {
        BigRational::from_integer(digits * num_traits::pow(ten, scale as usize))
    } else {
        BigRational::new(digits, num_traits::pow(ten, (-scale) as usize))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn valley() -> EventuallyPeriodicSequence {
        // ratios of mu_k = 2^{|k|}: 1/2 for k < 0, 2 for k ≥ 0
        EventuallyPeriodicSequence::two_sided(0.5, 2.0).unwrap()
    }

    /// Independent cyclic-extension oracle: walk outward from the core one
    /// step at a time.
    fn eval_by_walking(seq: &EventuallyPeriodicSequence, k: i64) -> f64 {
        if k >= seq.core_lo() && k <= seq.core_hi() {
            return seq.core()[(k - seq.core_lo()) as usize];
        }
        if k < seq.core_lo() {
            let p = seq.neg_period();
            let mut idx = p.len() - 1;
            let mut j = seq.core_lo() - 1;
            while j > k {
                idx = if idx == 0 { p.len() - 1 } else { idx - 1 };
                j -= 1;
            }
            p[idx]
        } else {
            let p = seq.pos_period();
            let mut idx = 0;
            let mut j = seq.core_hi() + 1;
            while j < k {
                idx = (idx + 1) % p.len();
                j += 1;
            }
            p[idx]
        }
    }

    #[test]
    fn eval_constant_far_left() {
        let s = EventuallyPeriodicSequence::constant(1.0).unwrap();
        assert_eq!(s.eval(-1_000_000), 1.0);
    }

    #[test]
    fn eval_reads_tails() {
        let s = EventuallyPeriodicSequence::new(0, vec![3.0], vec![2.0], vec![5.0]).unwrap();
        assert_eq!(s.eval(2), 5.0);
        let s = EventuallyPeriodicSequence::new(0, vec![3.0], vec![2.0, 4.0], vec![5.0]).unwrap();
        assert_eq!(s.eval(-1), 4.0);
        assert_eq!(s.eval(-2), 2.0);
        for k in -9..9 {
            assert_eq!(s.eval(k), eval_by_walking(&s, k));
        }
    }

    #[test]
    fn rejects_nonpositive_entries() {
        assert!(matches!(
            EventuallyPeriodicSequence::new(0, vec![1.0], vec![0.0], vec![1.0]),
            Err(SequenceError::NotPositive {
                what: "neg_period",
                ..
            })
        ));
        assert!(matches!(
            EventuallyPeriodicSequence::new(0, vec![], vec![1.0], vec![1.0]),
            Err(SequenceError::Empty { what: "core" })
        ));
        assert!(
            EventuallyPeriodicSequence::new(0, vec![f64::INFINITY], vec![1.0], vec![1.0]).is_err()
        );
    }

    #[test]
    fn window_product_examples() {
        let two = EventuallyPeriodicSequence::constant(2.0).unwrap();
        assert_relative_eq!(two.window_product(0, 3), 16.0, max_relative = 1e-12);
        // v_j = 2 for j > 0, 1/2 for j ≤ 0
        let s = EventuallyPeriodicSequence::new(0, vec![0.5], vec![0.5], vec![2.0]).unwrap();
        assert_relative_eq!(
            s.window_product(-1, 2),
            0.5 * 0.5 * 2.0,
            max_relative = 1e-12
        );
        assert_eq!(s.window_product(7, 0), s.eval(7));
    }

    #[test]
    fn window_product_does_not_overflow() {
        let s = EventuallyPeriodicSequence::constant(2.0).unwrap();
        assert_relative_eq!(
            s.window_log_sum(0, 999),
            1000.0 * 2f64.ln(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn rate_exact_examples() {
        let two = EventuallyPeriodicSequence::constant(2.0).unwrap();
        assert_relative_eq!(two.rate_exact(Quantifier::SupAllK, Direction::Forward), 2.0);
        let s = EventuallyPeriodicSequence::new(0, vec![0.5], vec![0.5], vec![2.0]).unwrap();
        assert_relative_eq!(s.rate_exact(Quantifier::SupAllK, Direction::Forward), 2.0);
        assert_relative_eq!(s.rate_exact(Quantifier::InfAllK, Direction::Forward), 0.5);
        let horizon = s.rate_horizon(Quantifier::SupAllK, Direction::Forward, 200, 200);
        assert!((horizon - 2.0).abs() < 0.02);
        let horizon = s.rate_horizon(Quantifier::InfAllK, Direction::Forward, 200, 200);
        assert!((horizon - 0.5).abs() < 0.02);

        let alt =
            EventuallyPeriodicSequence::new(0, vec![1.0], vec![1.0, 4.0], vec![1.0, 4.0]).unwrap();
        assert_relative_eq!(
            alt.rate_exact(Quantifier::SupAllK, Direction::Forward),
            2.0,
            max_relative = 1e-12
        );
        let horizon = alt.rate_horizon(Quantifier::SupAllK, Direction::Forward, 200, 400);
        assert!((horizon - 2.0).abs() < 0.02, "{horizon}");
    }

    #[test]
    fn one_sided_quantifiers_pick_their_tail() {
        let s = valley();
        assert_relative_eq!(
            s.rate_exact(Quantifier::SupKInNegatives, Direction::Backward),
            0.5
        );
        assert_relative_eq!(
            s.rate_exact(Quantifier::InfKInNaturals, Direction::Forward),
            2.0
        );
        // forward windows anchored at negative k sweep into the positive tail
        assert_relative_eq!(
            s.rate_exact(Quantifier::SupKInNegatives, Direction::Forward),
            2.0
        );
        let h = s.rate_horizon(Quantifier::SupKInNegatives, Direction::Forward, 100, 300);
        assert!((h - 2.0).abs() < 0.05);
    }

    #[test]
    fn rate_horizon_examples() {
        let two = EventuallyPeriodicSequence::constant(2.0).unwrap();
        for n in [1, 7, 50] {
            assert_relative_eq!(
                two.rate_horizon(Quantifier::InfKInNaturals, Direction::Backward, n, 10),
                2.0,
                max_relative = 1e-12
            );
        }
        let one = EventuallyPeriodicSequence::constant(1.0).unwrap();
        assert_eq!(
            one.rate_horizon(Quantifier::InfAllK, Direction::Forward, 13, 20),
            1.0
        );
        let v = valley().rate_horizon(Quantifier::SupAllK, Direction::Forward, 100, 500);
        assert!((1.9..=2.0 + 1e-12).contains(&v), "{v}");
    }

    #[test]
    fn exact_tails_from_rationals() {
        let r = |s: &str| Entry::rational(parse_rational(s).unwrap());
        let s = EventuallyPeriodicSequence::from_entries(
            0,
            &[r("1")],
            &[r("1/4"), r("4")],
            &[r("1/3"), r("3"), r("1/2")],
        )
        .unwrap();
        let rates = s.side_rate();
        assert_eq!(rates.cmp_one(Side::Negative), Ordering::Equal);
        assert_eq!(rates.cmp_one(Side::Positive), Ordering::Less);
        assert!(rates.is_exact(Side::Negative));
        // inversion flips the comparison
        let inv = s.powf(-0.5).side_rate();
        assert_eq!(inv.cmp_one(Side::Positive), Ordering::Greater);
    }

    #[test]
    fn parse_rational_forms() {
        let half = BigRational::new(1.into(), 2.into());
        assert_eq!(parse_rational("1/2"), Some(half.clone()));
        assert_eq!(parse_rational("0.5"), Some(half.clone()));
        assert_eq!(parse_rational("5e-1"), Some(half));
        assert_eq!(
            parse_rational("3"),
            Some(BigRational::from_integer(3.into()))
        );
        assert_eq!(parse_rational("1/0"), None);
        assert_eq!(parse_rational("abc"), None);
    }

    #[test]
    fn expanded_preserves_values() {
        let s =
            EventuallyPeriodicSequence::new(2, vec![3.0, 7.0], vec![2.0, 4.0, 5.0], vec![0.5, 6.0])
                .unwrap();
        let e = s.expanded(-4, 9);
        for k in -30..30 {
            assert_eq!(s.eval(k), e.eval(k), "k = {k}");
        }
        let sh = s.shifted(-1);
        for k in -30..30 {
            assert_eq!(sh.eval(k), s.eval(k - 1));
        }
    }

    fn arb_sequence() -> impl Strategy<Value = EventuallyPeriodicSequence> {
        let entries = |len| {
            prop::collection::vec(-2.0f64..2.0, len)
                .prop_map(|v| v.into_iter().map(f64::exp).collect::<Vec<_>>())
        };
        (-2i64..1, entries(1..4), entries(1..5), entries(1..5)).prop_map(|(lo, core, neg, pos)| {
            EventuallyPeriodicSequence::new(lo, core, neg, pos).unwrap()
        })
    }

    proptest! {
        #[test]
        fn window_products_are_log_additive(seq in arb_sequence(), k in -50i64..50, n in 0u64..40, m in 0u64..40) {
            let whole = seq.window_log_sum(k, n + m + 1);
            let split = seq.window_log_sum(k, n) + seq.window_log_sum(k + n as i64 + 1, m);
            prop_assert!((whole - split).abs() <= 1e-9 * (1.0 + whole.abs()));
        }

        #[test]
        fn fast_window_sum_matches_direct_loop(seq in arb_sequence(), k in -300i64..300, n in 0u64..300) {
            let direct: f64 = (k..=k + n as i64).map(|j| seq.log_eval(j)).sum();
            let fast = seq.window_log_sum(k, n);
            prop_assert!((direct - fast).abs() <= 1e-9 * (1.0 + direct.abs()));
        }

        #[test]
        fn sup_rate_dominates_inf_rate(seq in arb_sequence()) {
            let sup = seq.rate_exact(Quantifier::SupAllK, Direction::Forward);
            let inf = seq.rate_exact(Quantifier::InfAllK, Direction::Forward);
            prop_assert!(sup >= inf);
            let r = seq.side_rate();
            if r.gm_neg == r.gm_pos {
                prop_assert_eq!(sup, inf);
            }
        }

        #[test]
        fn tails_are_periodic(seq in arb_sequence(), j in 1i64..60) {
            let left = seq.core_lo() - j;
            let p = seq.neg_period().len() as i64;
            prop_assert_eq!(seq.eval(left), seq.eval(left - p));
            let right = seq.core_hi() + j;
            let q = seq.pos_period().len() as i64;
            prop_assert_eq!(seq.eval(right), seq.eval(right + q));
        }

        #[test]
        fn eval_matches_walking_oracle(seq in arb_sequence(), k in -40i64..40) {
            prop_assert_eq!(seq.eval(k), eval_by_walking(&seq, k));
        }

        #[test]
        fn horizon_agrees_with_exact_at_n_200(seq in arb_sequence()) {
            for q in [Quantifier::SupAllK, Quantifier::InfAllK] {
                let exact = seq.rate_exact(q, Direction::Forward).ln();
                let h = seq.rate_horizon(q, Direction::Forward, 200, 400).ln();
                // log-space: the core and a partial period shift the window sum
                // by at most (|core| + |period|) * 4
                prop_assert!((exact - h).abs() <= 0.05, "{} vs {}", exact, h);
            }
            let e = seq.rate_exact(Quantifier::SupKInNegatives, Direction::Backward).ln();
            let h = seq.rate_horizon(Quantifier::SupKInNegatives, Direction::Backward, 200, 400).ln();
            prop_assert!((e - h).abs() <= 0.05);
        }
    }
}
