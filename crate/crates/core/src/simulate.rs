//! Exact simulation of `T_f` and `B_w` on finitely supported vectors,
//! brute-force expansivity checks and the shadowing construction.
//!
//! Every operator handled here is a weighted permutation of a countable site
//! set, so it is stored in one normal form: chains of normalized basis vectors
//! `u_s` with `T u_k = c_k u_{k-1}` along ℤ-lines and the same along cycles.
//! For `T_f`, `u_s = χ_s / μ(s)^{1/p}` and `c_k = (μ(s_{k-1}) / μ(s_k))^{1/p}`;
//! for `B_w`, `u_k = e_k` and `c_k = w_k`. Vectors keep their coefficients in
//! the natural basis (`χ_s` or `e_k`).

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::classify::{Citation, Method, Status, Verdict, Witness};
use crate::seqcore::{EventuallyPeriodicSequence, Side};
use crate::systems::{AtomicSystem, DissipativeSystem, Orbit, Site, WeightSequence};

/// Crossing threshold of the expansivity definitions.
pub const EXPANSION_THRESHOLD: f64 = 2.0;
/// Coefficients whose norm contribution falls below this are dropped from
/// the shadowing sums; the dropped mass is added to the reported ε.
pub const PRUNE_THRESHOLD: f64 = 1e-15;
/// Largest accepted `‖T z_n − z_{n+1}‖` for a constructed orbit.
pub const ORBIT_RESIDUAL_TOLERANCE: f64 = 1e-9;

// relative slack for float comparisons against exact thresholds
const ROUNDING: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimulateError {
    #[error("the zero vector has no orbit to normalize")]
    ZeroVector,
    #[error("site {0:?} does not belong to the operator")]
    UnknownSite(Site),
    #[error("delta must be positive and finite, got {0}")]
    Delta(f64),
    #[error("pseudotrajectory length must be at least 1")]
    Length,
    #[error("samples must be at least 1")]
    Samples,
    #[error("step {index}: ‖T x_n − x_(n+1)‖ = {defect} exceeds delta")]
    Pseudotrajectory { index: i64, defect: f64 },
    #[error("no verified hyperbolic splitting: {0}")]
    NoSplitting(String),
    #[error("constructed orbit has residual {0} at some step")]
    Residual(f64),
}

/// Real or complex coefficients. Norms only see the modulus.
pub trait Scalar:
    Copy
    + fmt::Debug
    + PartialEq
    + Zero
    + Add<Output = Self>
    + Sub<Output = Self>
    + Neg<Output = Self>
    + Mul<f64, Output = Self>
{
    fn modulus(self) -> f64;
    fn from_real(x: f64) -> Self;
}

impl Scalar for f64 {
    fn modulus(self) -> f64 {
        self.abs()
    }

    fn from_real(x: f64) -> Self {
        x
    }
}

impl Scalar for Complex64 {
    fn modulus(self) -> f64 {
        self.norm()
    }

    fn from_real(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
}

/// A finitely supported vector.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseVector<S = f64> {
    coeffs: BTreeMap<Site, S>,
}

/// `Σ α_i χ_{s_i}` for a composition operator.
pub type SimpleFunction<S = f64> = SparseVector<S>;
/// `Σ x_k e_k` for a shift; sites are `Site::line(k)`.
pub type ShiftVector<S = f64> = SparseVector<S>;

impl<S: Scalar> Default for SparseVector<S> {
    fn default() -> Self {
        Self {
            coeffs: BTreeMap::new(),
        }
    }
}

impl<S: Scalar> SparseVector<S> {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn basis(site: Site) -> Self {
        let mut v = Self::zero();
        v.add_at(site, S::from_real(1.0));
        v
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (Site, S)>) -> Self {
        let mut v = Self::zero();
        for (s, a) in pairs {
            v.add_at(s, a);
        }
        v
    }

    pub fn get(&self, site: Site) -> S {
        self.coeffs.get(&site).copied().unwrap_or_else(S::zero)
    }

    pub fn add_at(&mut self, site: Site, a: S) {
        let entry = self.coeffs.entry(site).or_insert_with(S::zero);
        *entry = *entry + a;
        if entry.is_zero() {
            self.coeffs.remove(&site);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (Site, S)> + '_ {
        self.coeffs.iter().map(|(s, a)| (*s, *a))
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self::from_pairs(self.iter().map(|(s, a)| (s, a * c)))
    }

    /// Keeps only the sites accepted by `keep`.
    pub fn restricted(&self, mut keep: impl FnMut(Site) -> bool) -> Self {
        Self {
            coeffs: self
                .coeffs
                .iter()
                .filter(|(s, _)| keep(**s))
                .map(|(s, a)| (*s, *a))
                .collect(),
        }
    }

    /// Largest coefficient modulus difference against `other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (self - other)
            .iter()
            .map(|(_, a)| a.modulus())
            .fold(0.0, f64::max)
    }
}

impl<S: Scalar> Add for &SparseVector<S> {
    type Output = SparseVector<S>;

    fn add(self, rhs: Self) -> SparseVector<S> {
        let mut out = self.clone();
        for (s, a) in rhs.iter() {
            out.add_at(s, a);
        }
        out
    }
}

impl<S: Scalar> Sub for &SparseVector<S> {
    type Output = SparseVector<S>;

    fn sub(self, rhs: Self) -> SparseVector<S> {
        let mut out = self.clone();
        for (s, a) in rhs.iter() {
            out.add_at(s, -a);
        }
        out
    }
}

/// One orbit of sites in normal form.
#[derive(Debug, Clone, PartialEq)]
pub enum Chain {
    /// `T u_k = c_k u_{k-1}`.
    Line {
        component: usize,
        cell: usize,
        c: EventuallyPeriodicSequence,
    },
    /// `T u_{a_i} = c_i u_{a_{i-1}}` with indices mod `c.len()`.
    Cycle { component: usize, c: Vec<f64> },
}

impl Chain {
    fn key(&self) -> (usize, usize) {
        match self {
            Chain::Line {
                component, cell, ..
            } => (*component, *cell),
            Chain::Cycle { component, .. } => (*component, 0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Weights {
    Dissipative(DissipativeSystem),
    Atomic(AtomicSystem),
    Unit,
}

/// `T_f` or `B_w` as a weighted permutation of sites.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    p: f64,
    weights: Weights,
    chains: Vec<Chain>,
}

fn chain_from_orbit(orbit: Orbit, p: f64) -> Chain {
    match orbit {
        Orbit::Line {
            component,
            cell,
            growth,
        } => Chain::Line {
            component,
            cell,
            c: growth.shifted(-1).powf(-1.0 / p),
        },
        Orbit::Cycle {
            component,
            measures,
        } => {
            let r = measures.len();
            let c = (0..r)
                .map(|i| (measures[(i + r - 1) % r] / measures[i]).powf(1.0 / p))
                .collect();
            Chain::Cycle { component, c }
        }
    }
}

impl Operator {
    /// `T_f` of a dissipative system; sites are `Site::cell(k, j)`.
    pub fn composition(sys: &DissipativeSystem) -> Self {
        let p = sys.p();
        Self {
            p,
            chains: sys
                .orbits()
                .into_iter()
                .map(|o| chain_from_orbit(o, p))
                .collect(),
            weights: Weights::Dissipative(sys.clone()),
        }
    }

    /// `T_f` of an atomic system; sites are `Site::atom(component, k)`.
    pub fn atomic(sys: &AtomicSystem) -> Self {
        let p = sys.p();
        Self {
            p,
            chains: sys
                .orbits()
                .into_iter()
                .map(|o| chain_from_orbit(o, p))
                .collect(),
            weights: Weights::Atomic(sys.clone()),
        }
    }

    /// `B_w` on `ℓ^p(ℤ)`; sites are `Site::line(k)`.
    pub fn shift(w: &WeightSequence, p: f64) -> Self {
        Self {
            p,
            chains: vec![Chain::Line {
                component: 0,
                cell: 0,
                c: w.weights().clone(),
            }],
            weights: Weights::Unit,
        }
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn chains(&self) -> &[Chain] {
        &self.chains
    }

    pub fn is_shift(&self) -> bool {
        self.weights == Weights::Unit
    }

    fn chain(&self, site: Site) -> Result<&Chain, SimulateError> {
        self.chains
            .iter()
            .find(|c| c.key() == (site.component, site.cell))
            .ok_or(SimulateError::UnknownSite(site))
    }

    /// Reduces cycle indices mod the cycle length.
    pub fn canonical(&self, site: Site) -> Result<Site, SimulateError> {
        Ok(match self.chain(site)? {
            Chain::Cycle { c, .. } => Site {
                index: site.index.rem_euclid(c.len() as i64),
                ..site
            },
            Chain::Line { .. } => site,
        })
    }

    /// `ln ‖b_s‖^p` for the natural basis vector `b_s` (`χ_s` or `e_k`).
    pub fn log_weight(&self, site: Site) -> f64 {
        match &self.weights {
            Weights::Dissipative(sys) => sys.log_site_measure(site),
            Weights::Atomic(sys) => sys.log_site_measure(site),
            Weights::Unit => 0.0,
        }
    }

    /// `T^n u_s = e^L u_{s'}` in the normalized basis; returns `(s', L)`.
    pub fn normalized_image(&self, site: Site, n: i64) -> Result<(Site, f64), SimulateError> {
        Ok(match self.chain(site)? {
            Chain::Line { c, .. } => {
                let k = site.index;
                let log = c.cumulative_log(k + 1) - c.cumulative_log(k - n + 1);
                (
                    Site {
                        index: k - n,
                        ..site
                    },
                    log,
                )
            }
            Chain::Cycle { c, .. } => {
                let r = c.len() as i64;
                let i = site.index.rem_euclid(r);
                // the product of c over a full cycle is 1
                let log = (0..n.rem_euclid(r))
                    .map(|t| c[(i - t).rem_euclid(r) as usize].ln())
                    .sum();
                (
                    Site {
                        index: (i - n).rem_euclid(r),
                        ..site
                    },
                    log,
                )
            }
        })
    }

    /// `T^n b_s = e^L b_{s'}` in the natural basis; returns `(s', L)`.
    pub fn image(&self, site: Site, n: i64) -> Result<(Site, f64), SimulateError> {
        let site = self.canonical(site)?;
        let (to, log) = self.normalized_image(site, n)?;
        Ok((
            to,
            log + (self.log_weight(site) - self.log_weight(to)) / self.p,
        ))
    }
}

/// `T^n x` for any integer `n`; exact reindexing with one multiplier per site.
pub fn apply<S: Scalar>(
    op: &Operator,
    x: &SparseVector<S>,
    n: i64,
) -> Result<SparseVector<S>, SimulateError> {
    let mut out = SparseVector::zero();
    for (s, a) in x.iter() {
        let (to, log) = op.image(s, n)?;
        out.add_at(to, a * log.exp());
    }
    Ok(out)
}

/// `T_f^n φ = φ ∘ f^n`.
pub fn apply_composition<S: Scalar>(
    op: &Operator,
    phi: &SimpleFunction<S>,
    n: i64,
) -> Result<SimpleFunction<S>, SimulateError> {
    debug_assert!(!op.is_shift());
    apply(op, phi, n)
}

/// `B_w^n x`, with `(B_w x)_j = w_{j+1} x_{j+1}`.
pub fn apply_shift<S: Scalar>(
    op: &Operator,
    x: &ShiftVector<S>,
    n: i64,
) -> Result<ShiftVector<S>, SimulateError> {
    debug_assert!(op.is_shift());
    apply(op, x, n)
}

fn log_sum_exp(terms: impl Iterator<Item = f64>) -> f64 {
    let terms: Vec<f64> = terms.collect();
    let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

/// `‖x‖_p`.
pub fn norm<S: Scalar>(op: &Operator, x: &SparseVector<S>) -> f64 {
    let p = op.p;
    let lse = log_sum_exp(
        x.iter()
            .filter(|(_, a)| !a.is_zero())
            .map(|(s, a)| p * a.modulus().ln() + op.log_weight(s)),
    );
    (lse / p).exp()
}

/// `‖T^n x‖` for each `n` in `range`, stepping one application at a time.
pub fn orbit_norms<S: Scalar>(
    op: &Operator,
    x: &SparseVector<S>,
    range: std::ops::RangeInclusive<i64>,
) -> Result<Vec<f64>, SimulateError> {
    if x.is_empty() {
        return Err(SimulateError::ZeroVector);
    }
    let mut v = apply(op, x, *range.start())?;
    let mut out = Vec::new();
    for n in range.clone() {
        out.push(norm(op, &v));
        if n < *range.end() {
            v = apply(op, &v, 1)?;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpansivityMode {
    Positive,
    Twosided,
    UniformPositive,
    UniformTwosided,
}

/// Proof that some unit vector (or, for uniform modes, some vector at every
/// gap) never reaches norm 2.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Certificate {
    /// The normalized basis vector at `atom` has an orbit of period `period`
    /// whose norms stay at most `sup_norm`.
    Periodic {
        component: usize,
        atom: i64,
        period: usize,
        sup_norm: f64,
    },
    /// Exact supremum over all relevant `n` of the basis-vector orbit norms,
    /// computed from the eventually periodic multipliers.
    BoundedOrbit {
        component: usize,
        cell: usize,
        index: i64,
        sup_norm: f64,
    },
    /// A tail whose multipliers have geometric mean at most 1 (exactly 1 for
    /// two-sided modes): for every `n` some deep-tail basis vector has
    /// `‖T^n u‖ ≤ 1` (and `‖T^{-n} u‖ ≤ 1`).
    UniformTail {
        component: usize,
        cell: usize,
        side: String,
        rate: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BruteForceReport {
    pub verdict: Verdict,
    pub mode: ExpansivityMode,
    pub horizon: u64,
    /// Number of unit vectors tested.
    pub samples: usize,
    /// Crossing index per sample (uniform modes: the common index).
    pub witnesses: Vec<i64>,
    pub certificate: Option<Certificate>,
}

// sup over n ≥ 1 of ln ‖T^n u_k‖ (forward) or ln ‖T^{-n} u_k‖ (backward)
// along a line; None when the supremum is infinite.
fn line_log_sup(c: &EventuallyPeriodicSequence, k: i64, forward: bool) -> Option<f64> {
    let rates = c.side_rate();
    let mut acc = 0.0;
    let mut best = f64::NEG_INFINITY;
    if forward {
        if rates.cmp_one(Side::Negative).is_gt() {
            return None;
        }
        let period = c.neg_period().len() as i64;
        let into_tail = (k - (c.core_lo() - period) + 1).max(1);
        for n in 1..=into_tail + period {
            acc += c.log_eval(k - n + 1);
            best = best.max(acc);
        }
    } else {
        if rates.cmp_one(Side::Positive).is_lt() {
            return None;
        }
        let period = c.pos_period().len() as i64;
        let into_tail = (c.core_hi() + period - k).max(1);
        for n in 1..=into_tail + period {
            acc -= c.log_eval(k + n);
            best = best.max(acc);
        }
    }
    Some(best)
}

fn scan_range(c: &EventuallyPeriodicSequence, horizon: i64) -> (i64, i64) {
    let pn = c.neg_period().len() as i64;
    let pp = c.pos_period().len() as i64;
    (
        (-horizon).min(c.core_lo() - 2 * pn - 2),
        horizon.max(c.core_hi() + 2 * pp + 2),
    )
}

fn cycle_certificate(op: &Operator) -> Option<Certificate> {
    for chain in op.chains() {
        let Chain::Cycle { component, c } = chain else {
            continue;
        };
        let r = c.len();
        let atom = (0..r as i64)
            .max_by(|a, b| {
                op.log_weight(Site::atom(*component, *a))
                    .total_cmp(&op.log_weight(Site::atom(*component, *b)))
            })
            .expect("cycles are non-empty");
        let site = Site::atom(*component, atom);
        let sup = (1..=r as i64)
            .map(|n| op.normalized_image(site, n).expect("own site").1)
            .fold(f64::NEG_INFINITY, f64::max);
        let sup_norm = sup.exp();
        if sup_norm < EXPANSION_THRESHOLD {
            return Some(Certificate::Periodic {
                component: *component,
                atom,
                period: r,
                sup_norm,
            });
        }
    }
    None
}

fn basis_certificate(op: &Operator, twosided: bool, horizon: i64) -> Option<Certificate> {
    for chain in op.chains() {
        let Chain::Line { component, cell, c } = chain else {
            continue;
        };
        let (lo, hi) = scan_range(c, horizon);
        for k in lo..=hi {
            let Some(fwd) = line_log_sup(c, k, true) else {
                break;
            };
            let sup = if twosided {
                match line_log_sup(c, k, false) {
                    Some(bwd) => fwd.max(bwd),
                    None => break,
                }
            } else {
                fwd
            };
            if sup.exp() < EXPANSION_THRESHOLD {
                return Some(Certificate::BoundedOrbit {
                    component: *component,
                    cell: *cell,
                    index: k,
                    sup_norm: sup.exp(),
                });
            }
        }
    }
    None
}

// Positive mode: a tail with multiplier rate ≤ 1 keeps ‖T^n u‖ ≤ 1 at some
// deep-tail phase for every n. Two-sided mode: a tail at rate exactly 1 does
// the same for T^n and T^{-n} simultaneously.
fn uniform_tail_certificate(op: &Operator, twosided: bool) -> Option<Certificate> {
    for chain in op.chains() {
        let Chain::Line { component, cell, c } = chain else {
            continue;
        };
        let rates = c.side_rate();
        for (side, name) in [(Side::Negative, "negative"), (Side::Positive, "positive")] {
            let refutes = if twosided {
                rates.cmp_one(side).is_eq()
            } else {
                !rates.cmp_one(side).is_gt()
            };
            if refutes {
                return Some(Certificate::UniformTail {
                    component: *component,
                    cell: *cell,
                    side: name.to_owned(),
                    rate: rates.get(side),
                });
            }
        }
    }
    None
}

// a unit vector in the normalized basis: (site, |a|^p) pairs summing to 1
type Sample = Vec<(Site, f64)>;

fn sample_log_norm(op: &Operator, x: &Sample, n: i64) -> f64 {
    let p = op.p;
    let lse = log_sum_exp(
        x.iter()
            .map(|(s, w)| w.ln() + p * op.normalized_image(*s, n).expect("own site").1),
    );
    lse / p
}

fn random_site(op: &Operator, rng: &mut ChaCha8Rng, radius: i64) -> Site {
    match &op.chains[rng.gen_range(0..op.chains.len())] {
        Chain::Line {
            component, cell, ..
        } => Site {
            component: *component,
            index: rng.gen_range(-radius..=radius),
            cell: *cell,
        },
        Chain::Cycle { component, c } => Site::atom(*component, rng.gen_range(0..c.len() as i64)),
    }
}

fn draw_samples(op: &Operator, horizon: i64, random: usize, seed: u64) -> Vec<Sample> {
    let mut out: Vec<Sample> = Vec::new();
    for chain in op.chains() {
        match chain {
            Chain::Line {
                component, cell, ..
            } => {
                out.extend((-horizon..=horizon).map(|k| {
                    vec![(
                        Site {
                            component: *component,
                            index: k,
                            cell: *cell,
                        },
                        1.0,
                    )]
                }));
            }
            Chain::Cycle { component, c } => {
                out.extend((0..c.len() as i64).map(|i| vec![(Site::atom(*component, i), 1.0)]));
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = op.p;
    let wanted = out.len() + random;
    while out.len() < wanted {
        let size = rng.gen_range(1..=8);
        let mut coeffs: BTreeMap<Site, f64> = BTreeMap::new();
        for _ in 0..size {
            let s = random_site(op, &mut rng, horizon.max(1));
            *coeffs.entry(s).or_default() += rng.gen_range(-1.0..=1.0_f64);
        }
        let total: f64 = coeffs.values().map(|a| a.abs().powf(p)).sum();
        if total > 0.0 {
            out.push(
                coeffs
                    .into_iter()
                    .filter(|(_, a)| *a != 0.0)
                    .map(|(s, a)| (s, a.abs().powf(p) / total))
                    .collect(),
            );
        }
    }
    out
}

/// Evaluates the expansivity definition directly.
///
/// Tested vectors are every normalized basis vector with `|k| ≤ horizon`
/// (every atom of a cycle) plus `samples` seeded random simple functions.
/// `Fails` is only returned with a [`Certificate`]; a sample that merely does
/// not cross within the horizon leaves the verdict `Undecided`.
pub fn brute_force_expansivity(
    op: &Operator,
    mode: ExpansivityMode,
    horizon: u64,
    samples: usize,
    seed: u64,
) -> Result<BruteForceReport, SimulateError> {
    if samples == 0 {
        return Err(SimulateError::Samples);
    }
    let h = horizon as i64;
    let twosided = matches!(
        mode,
        ExpansivityMode::Twosided | ExpansivityMode::UniformTwosided
    );
    let certificate = cycle_certificate(op)
        .or_else(|| basis_certificate(op, twosided, h))
        .or_else(|| match mode {
            ExpansivityMode::UniformPositive => uniform_tail_certificate(op, false),
            ExpansivityMode::UniformTwosided => uniform_tail_certificate(op, true),
            _ => None,
        });
    let tested = draw_samples(op, h, samples, seed);
    let report = |verdict, witnesses, certificate| BruteForceReport {
        verdict,
        mode,
        horizon,
        samples: tested.len(),
        witnesses,
        certificate,
    };
    if let Some(cert) = certificate {
        let witness = match &cert {
            Certificate::Periodic { period, .. } => Some(Witness::period(*period)),
            Certificate::BoundedOrbit { index, .. } => Some(Witness::index(*index)),
            Certificate::UniformTail { rate, .. } => Some(Witness::rate(*rate)),
        };
        let mut v = Verdict::new(Status::Fails, Method::Horizon, Citation::Definition);
        v.witness = witness;
        return Ok(report(v, vec![], Some(cert)));
    }
    let cross = |x: &Sample, n: i64| {
        sample_log_norm(op, x, n) >= (EXPANSION_THRESHOLD * (1.0 - ROUNDING)).ln()
    };
    let order: Vec<i64> = (1..=h)
        .flat_map(|n| if twosided { vec![n, -n] } else { vec![n] })
        .collect();
    let witnesses: Option<Vec<i64>> = match mode {
        ExpansivityMode::Positive | ExpansivityMode::Twosided => tested
            .iter()
            .map(|x| order.iter().copied().find(|&n| cross(x, n)))
            .collect(),
        ExpansivityMode::UniformPositive | ExpansivityMode::UniformTwosided => (1..=h)
            .find(|&n| {
                tested
                    .iter()
                    .all(|x| cross(x, n) || (twosided && cross(x, -n)))
            })
            .map(|n| vec![n]),
    };
    Ok(match witnesses {
        Some(w) => {
            let worst = w.iter().map(|n| n.abs()).max().unwrap_or(0);
            let v = Verdict::new(Status::Holds, Method::Horizon, Citation::Definition)
                .with_witness(Witness::index(worst));
            report(v, w, None)
        }
        None => {
            let v = Verdict::undecided(
                Method::Horizon,
                None,
                format!(
                    "horizon exhausted: not every sample reached norm 2 within |n| <= {horizon}"
                ),
            );
            report(v, vec![], None)
        }
    })
}

/// A finite δ-pseudotrajectory `x_start, …, x_{start+len-1}` together with its
/// one-step errors `e_n = T x_n − x_{n+1}`.
///
/// The errors are kept alongside the points: along expanding directions the
/// points grow like `λ^{len}` and recovering `e_n` by subtraction would lose
/// every digit of a size-δ defect.
#[derive(Debug, Clone, PartialEq)]
pub struct Pseudotrajectory {
    pub start: i64,
    pub delta: f64,
    pub points: Vec<SparseVector<f64>>,
    pub errors: Vec<SparseVector<f64>>,
}

impl Pseudotrajectory {
    /// Builds `x_{n+1} = T x_n + η_n` from explicit perturbations.
    pub fn from_perturbations(
        op: &Operator,
        start: i64,
        x0: SparseVector<f64>,
        delta: f64,
        perturbations: Vec<SparseVector<f64>>,
    ) -> Result<Self, SimulateError> {
        if !(delta.is_finite() && delta > 0.0) {
            return Err(SimulateError::Delta(delta));
        }
        let mut points = vec![x0];
        let mut errors = Vec::with_capacity(perturbations.len());
        for eta in perturbations {
            let last = points.last().expect("non-empty");
            let next = &apply(op, last, 1)? + &eta;
            points.push(next);
            errors.push(eta.scaled(-1.0));
        }
        let pt = Self {
            start,
            delta,
            points,
            errors,
        };
        pt.validate(op)?;
        Ok(pt)
    }

    /// Accepts arbitrary points; errors are recomputed by subtraction.
    pub fn from_points(
        op: &Operator,
        start: i64,
        points: Vec<SparseVector<f64>>,
        delta: f64,
    ) -> Result<Self, SimulateError> {
        if !(delta.is_finite() && delta > 0.0) {
            return Err(SimulateError::Delta(delta));
        }
        if points.is_empty() {
            return Err(SimulateError::Length);
        }
        let errors = points
            .windows(2)
            .map(|w| Ok(&apply(op, &w[0], 1)? - &w[1]))
            .collect::<Result<Vec<_>, SimulateError>>()?;
        let pt = Self {
            start,
            delta,
            points,
            errors,
        };
        pt.validate(op)?;
        Ok(pt)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `x_n` for `n` in `start..start+len`.
    pub fn point(&self, n: i64) -> Option<&SparseVector<f64>> {
        usize::try_from(n - self.start)
            .ok()
            .and_then(|i| self.points.get(i))
    }

    pub fn validate(&self, op: &Operator) -> Result<(), SimulateError> {
        for (i, e) in self.errors.iter().enumerate() {
            let defect = norm(op, e);
            if defect > self.delta * (1.0 + ROUNDING) {
                return Err(SimulateError::Pseudotrajectory {
                    index: self.start + i as i64,
                    defect,
                });
            }
        }
        Ok(())
    }
}

/// Seeded δ-pseudotrajectory of `length` points indexed symmetrically around
/// 0. Each perturbation has norm exactly `δ` and a uniformly random direction
/// on at most four sites near the origin.
pub fn make_pseudotrajectory(
    op: &Operator,
    x0: &SparseVector<f64>,
    delta: f64,
    length: usize,
    seed: u64,
) -> Result<Pseudotrajectory, SimulateError> {
    const RADIUS: i64 = 8;
    if length == 0 {
        return Err(SimulateError::Length);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut etas = Vec::with_capacity(length - 1);
    while etas.len() + 1 < length {
        let size = rng.gen_range(1..=4);
        let mut eta = SparseVector::zero();
        for _ in 0..size {
            let s = op.canonical(random_site(op, &mut rng, RADIUS))?;
            eta.add_at(s, rng.gen_range(-1.0..=1.0));
        }
        let n = norm(op, &eta);
        if n > 0.0 {
            etas.push(eta.scaled(delta / n));
        }
    }
    Pseudotrajectory::from_perturbations(op, -((length as i64 - 1) / 2), x0.clone(), delta, etas)
}

/// `‖T^m P‖ ≤ constant · λ^m` for all `m ≥ 0` (on the unstable part, with
/// `T^{-1}` in place of `T`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Contraction {
    pub lambda: f64,
    pub constant: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum LineClass {
    Stable,
    Unstable,
    /// Indices `k ≤ k0` stable, the rest unstable.
    Split {
        k0: i64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct LineSplit {
    pub component: usize,
    pub cell: usize,
    pub class: LineClass,
}

/// Coordinate splitting `X = M ⊕ N` with `T M ⊆ M`, `T^{-1} N ⊆ N`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Splitting {
    pub lines: Vec<LineSplit>,
    pub stable: Option<Contraction>,
    pub unstable: Option<Contraction>,
}

// exp of the largest window sum (empty window allowed) of `terms` over `lo..=hi`
fn max_window_exp(lo: i64, hi: i64, term: impl Fn(i64) -> f64) -> f64 {
    let mut best = 0.0_f64;
    let mut run = 0.0_f64;
    for j in lo..=hi {
        run = (run + term(j)).max(0.0);
        best = best.max(run);
    }
    best.exp()
}

fn padded_range(c: &EventuallyPeriodicSequence) -> (i64, i64) {
    scan_range(c, 0)
}

fn stable_constant(c: &EventuallyPeriodicSequence, lambda: f64, upper: i64) -> f64 {
    let (lo, hi) = padded_range(c);
    max_window_exp(lo, hi.min(upper), |j| c.log_eval(j) - lambda.ln())
}

fn unstable_constant(c: &EventuallyPeriodicSequence, lambda: f64, lower: i64) -> f64 {
    let (lo, hi) = padded_range(c);
    max_window_exp(lo.max(lower), hi, |j| -c.log_eval(j) - lambda.ln())
}

impl Splitting {
    /// Splits every line by the tail rates of its multipliers; refuses
    /// cycles and lines with a tail at rate 1 or the wrong orientation.
    pub fn for_operator(op: &Operator) -> Result<Self, SimulateError> {
        let mut kinds = Vec::new();
        let mut lambda_s: f64 = 0.0;
        let mut lambda_u: f64 = 0.0;
        for chain in op.chains() {
            let (component, cell, c) = match chain {
                Chain::Line { component, cell, c } => (*component, *cell, c),
                Chain::Cycle { component, .. } => {
                    return Err(SimulateError::NoSplitting(format!(
                        "cycle component {component} is neither contracted nor expanded"
                    )))
                }
            };
            let r = c.side_rate();
            let (neg, pos) = (r.cmp_one(Side::Negative), r.cmp_one(Side::Positive));
            let (gn, gp) = (r.get(Side::Negative), r.get(Side::Positive));
            let class = match (neg.is_lt(), pos.is_lt(), neg.is_gt(), pos.is_gt()) {
                (true, true, _, _) => {
                    lambda_s = lambda_s.max(gn.max(gp));
                    LineClass::Stable
                }
                (_, _, true, true) => {
                    lambda_u = lambda_u.max(1.0 / gn.min(gp));
                    LineClass::Unstable
                }
                (true, _, _, true) => {
                    lambda_s = lambda_s.max(gn);
                    lambda_u = lambda_u.max(1.0 / gp);
                    LineClass::Split { k0: 0 }
                }
                _ => {
                    return Err(SimulateError::NoSplitting(format!(
                        "line ({component}, {cell}) has tail rates ({gn}, {gp}) without a hyperbolic orientation"
                    )))
                }
            };
            kinds.push((component, cell, c, class));
        }
        let mut lines = Vec::new();
        let mut c_s: f64 = 0.0;
        let mut c_u: f64 = 0.0;
        let mut any_s = false;
        let mut any_u = false;
        for (component, cell, c, class) in kinds {
            let class = match class {
                LineClass::Stable => {
                    any_s = true;
                    c_s = c_s.max(stable_constant(c, lambda_s, i64::MAX));
                    class
                }
                LineClass::Unstable => {
                    any_u = true;
                    c_u = c_u.max(unstable_constant(c, lambda_u, i64::MIN));
                    class
                }
                LineClass::Split { .. } => {
                    any_s = true;
                    any_u = true;
                    let pn = c.neg_period().len() as i64;
                    let pp = c.pos_period().len() as i64;
                    let (k0, cs, cu) = (c.core_lo() - pn - 1..=c.core_hi() + pp + 1)
                        .map(|k0| {
                            (
                                k0,
                                stable_constant(c, lambda_s, k0),
                                unstable_constant(c, lambda_u, k0 + 2),
                            )
                        })
                        .min_by(|a, b| {
                            let cost = |x: &(i64, f64, f64)| {
                                x.1 / (1.0 - lambda_s) + x.2 * lambda_u / (1.0 - lambda_u)
                            };
                            cost(a).total_cmp(&cost(b))
                        })
                        .expect("non-empty candidate range");
                    c_s = c_s.max(cs);
                    c_u = c_u.max(cu);
                    LineClass::Split { k0 }
                }
            };
            lines.push(LineSplit {
                component,
                cell,
                class,
            });
        }
        let split = Self {
            lines,
            stable: any_s.then_some(Contraction {
                lambda: lambda_s,
                constant: c_s,
            }),
            unstable: any_u.then_some(Contraction {
                lambda: lambda_u,
                constant: c_u,
            }),
        };
        if !split.verify(op, 64) {
            return Err(SimulateError::NoSplitting(
                "contraction certificate failed verification".into(),
            ));
        }
        Ok(split)
    }

    pub fn is_stable(&self, site: Site) -> bool {
        self.lines
            .iter()
            .find(|l| (l.component, l.cell) == (site.component, site.cell))
            .is_some_and(|l| match l.class {
                LineClass::Stable => true,
                LineClass::Unstable => false,
                LineClass::Split { k0 } => site.index <= k0,
            })
    }

    /// A-priori shadowing distance for a δ-pseudotrajectory.
    pub fn bound(&self, delta: f64) -> f64 {
        let s = self.stable.map_or(0.0, |c| c.constant / (1.0 - c.lambda));
        let u = self
            .unstable
            .map_or(0.0, |c| c.constant * c.lambda / (1.0 - c.lambda));
        delta * (s + u)
    }

    /// Checks the contraction certificates on every window of length up to
    /// `m_max` around the non-periodic part of each line.
    pub fn verify(&self, op: &Operator, m_max: i64) -> bool {
        let ok = |x: f64, c: Contraction, m: i64| {
            x <= c.constant * c.lambda.powi(m as i32) * (1.0 + 1e-9)
        };
        for (line, chain) in self.lines.iter().zip(op.chains()) {
            let Chain::Line { component, cell, c } = chain else {
                return false;
            };
            let (lo, hi) = padded_range(c);
            for k in lo - m_max..=hi + m_max {
                let site = Site {
                    component: *component,
                    index: k,
                    cell: *cell,
                };
                for m in 0..=m_max {
                    if self.is_stable(site) {
                        let Some(cs) = self.stable else { return false };
                        let f = op.normalized_image(site, m).map(|x| x.1.exp());
                        if !matches!(f, Ok(x) if ok(x, cs, m)) {
                            return false;
                        }
                    } else {
                        let Some(cu) = self.unstable else {
                            return false;
                        };
                        let f = op.normalized_image(site, -m).map(|x| x.1.exp());
                        if !matches!(f, Ok(x) if ok(x, cu, m)) {
                            return false;
                        }
                    }
                }
            }
            debug_assert_eq!((line.component, line.cell), (*component, *cell));
        }
        true
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShadowResult {
    /// `z_start`; its orbit shadows the pseudotrajectory.
    pub z: SparseVector<f64>,
    /// `max_n ‖z_n − x_n‖` plus the truncation slack.
    pub epsilon: f64,
    pub truncation: f64,
    pub bound: f64,
    /// Largest `‖T z_n − z_{n+1}‖` over the window.
    pub max_residual: f64,
    /// `‖z_n − x_n‖` per index.
    pub distances: Vec<f64>,
}

impl ShadowResult {
    pub fn within_bound(&self) -> bool {
        self.epsilon <= self.bound + self.truncation + ROUNDING * self.bound
    }
}

fn pruned(op: &Operator, v: SparseVector<f64>) -> (SparseVector<f64>, f64) {
    let p = op.p;
    let mut dropped = SparseVector::zero();
    let kept = v.restricted(|s| {
        let size = (v.get(s).abs().powf(p) * op.log_weight(s).exp()).powf(1.0 / p);
        if size < PRUNE_THRESHOLD {
            dropped.add_at(s, v.get(s));
            false
        } else {
            true
        }
    });
    let mass = if dropped.is_empty() {
        0.0
    } else {
        norm(op, &dropped)
    };
    (kept, mass)
}

/// Hyperbolic correction `z_n = x_n + d_n` with `d_{n+1} = T d_n + e_n`.
///
/// The stable part runs forward from `s_start = 0`, the unstable part
/// backward from `u_end = 0`; both are geometric sums of the projected
/// errors. The orbit relation is checked on `T d_n − d_{n+1} + e_n`, which
/// equals `T z_n − z_{n+1}`.
pub fn shadow(
    op: &Operator,
    pt: &Pseudotrajectory,
    split: &Splitting,
) -> Result<ShadowResult, SimulateError> {
    pt.validate(op)?;
    let len = pt.len();
    let c_s = split.stable.map_or(0.0, |c| c.constant);
    let c_u = split.unstable.map_or(0.0, |c| c.constant);
    let mut truncation = 0.0;

    let mut s = vec![SparseVector::zero(); len];
    for i in 0..len - 1 {
        let e_s = pt.errors[i].restricted(|x| split.is_stable(x));
        let (next, mass) = pruned(op, &apply(op, &s[i], 1)? + &e_s);
        truncation += c_s * mass;
        s[i + 1] = next;
    }
    let mut u = vec![SparseVector::zero(); len];
    for i in (0..len - 1).rev() {
        let e_u = pt.errors[i].restricted(|x| !split.is_stable(x));
        let (prev, mass) = pruned(op, apply(op, &(&u[i + 1] - &e_u), -1)?);
        truncation += c_u * mass;
        u[i] = prev;
    }
    let d: Vec<SparseVector<f64>> = s.iter().zip(&u).map(|(a, b)| a + b).collect();
    let distances: Vec<f64> = d.iter().map(|v| norm(op, v)).collect();
    let mut max_residual: f64 = 0.0;
    for i in 0..len - 1 {
        let r = &(&apply(op, &d[i], 1)? - &d[i + 1]) + &pt.errors[i];
        max_residual = max_residual.max(norm(op, &r));
    }
    if max_residual > ORBIT_RESIDUAL_TOLERANCE {
        return Err(SimulateError::Residual(max_residual));
    }
    let eps = distances.iter().copied().fold(0.0, f64::max);
    Ok(ShadowResult {
        z: &pt.points[0] + &d[0],
        epsilon: eps + truncation,
        truncation,
        bound: split.bound(pt.delta),
        max_residual,
        distances,
    })
}
