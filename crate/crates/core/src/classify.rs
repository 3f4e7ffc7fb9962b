//! Verdicts for the expansivity, shadowing, hyperbolicity and stability
//! properties of the three operator models.
//!
//! In the eventually periodic model every condition is a strict comparison
//! of a windowed-product rate with 1, so a [`RateProfile`] (the tail rates of
//! the measure ratios, together with their sup/inf over all anchors) is all
//! the decision procedures read. The same procedures run on an exact profile
//! and on a finite-horizon one, which is how verdicts are cross-checked.

use std::cmp::Ordering;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::seqcore::{cmp_one_approx, Direction, EventuallyPeriodicSequence, Quantifier, Side};
use crate::systems::{
    check_bounded_distortion, AtomicSystem, Component, DissipativeSystem, MeasureSequence,
    SystemError, WeightSequence,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClassifyError {
    #[error(transparent)]
    System(#[from] SystemError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Status {
    Holds,
    Fails,
    Undecided,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    Horizon,
}

/// Theorem branch a verdict rests on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Citation {
    E1,
    E2,
    E3,
    E4,
    ED1,
    ED2,
    ED3,
    ED4,
    UE1,
    UE2,
    UE3,
    HC,
    HD,
    GH,
    P41,
    SC1,
    SC2,
    W,
    C,
    #[serde(rename = "B")]
    B,
    #[serde(rename = "B-a")]
    Ba,
    #[serde(rename = "B-b")]
    Bb,
    #[serde(rename = "B-c")]
    Bc,
    OpenProblem,
    /// Direct evaluation of the definition on sampled vectors.
    #[serde(rename = "Def")]
    Definition,
}

impl fmt::Display for Citation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Citation::B => "B",
            Citation::Ba => "B-a",
            Citation::Bb => "B-b",
            Citation::Bc => "B-c",
            Citation::Definition => "Def",
            other => return write!(f, "{other:?}"),
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WitnessKind {
    /// An orbit index `n` (e.g. where `μ_{-n}` first exceeds a threshold).
    Index,
    /// The decisive rate.
    Rate,
    /// A measure value (e.g. the per-atom supremum on a cycle).
    Measure,
    /// The period of a repeating orbit.
    Period,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub kind: WitnessKind,
    pub value: f64,
}

impl Witness {
    pub fn index(n: i64) -> Self {
        Self {
            kind: WitnessKind::Index,
            value: n as f64,
        }
    }

    pub fn rate(r: f64) -> Self {
        Self {
            kind: WitnessKind::Rate,
            value: r,
        }
    }

    pub fn period(r: usize) -> Self {
        Self {
            kind: WitnessKind::Period,
            value: r as f64,
        }
    }

    pub fn measure(m: f64) -> Self {
        Self {
            kind: WitnessKind::Measure,
            value: m,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub status: Status,
    pub method: Method,
    pub citation: Option<Citation>,
    pub witness: Option<Witness>,
    /// Distance of the decisive rate from 1.
    pub margin: Option<f64>,
    pub note: Option<String>,
}

impl Verdict {
    pub fn new(status: Status, method: Method, citation: Citation) -> Self {
        Self {
            status,
            method,
            citation: Some(citation),
            witness: None,
            margin: None,
            note: None,
        }
    }

    pub fn undecided(method: Method, citation: Option<Citation>, note: impl Into<String>) -> Self {
        Self {
            status: Status::Undecided,
            method,
            citation,
            witness: None,
            margin: None,
            note: Some(note.into()),
        }
    }

    pub fn with_margin(mut self, margin: f64) -> Self {
        self.margin = Some(margin);
        self
    }

    pub fn with_witness(mut self, w: Witness) -> Self {
        self.witness = Some(w);
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    pub fn holds(&self) -> bool {
        self.status == Status::Holds
    }

    pub fn fails(&self) -> bool {
        self.status == Status::Fails
    }
}

/// A rate together with its comparison against 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rate {
    pub value: f64,
    pub vs_one: Ordering,
}

impl Rate {
    fn approx(value: f64) -> Self {
        Self {
            value,
            vs_one: cmp_one_approx(value),
        }
    }

    fn margin(&self) -> f64 {
        (self.value - 1.0).abs()
    }

    fn below_one(&self) -> Cond {
        Cond {
            holds: self.vs_one == Ordering::Less,
            margin: self.margin(),
            boundary: self.vs_one == Ordering::Equal,
        }
    }

    fn above_one(&self) -> Cond {
        Cond {
            holds: self.vs_one == Ordering::Greater,
            margin: self.margin(),
            boundary: self.vs_one == Ordering::Equal,
        }
    }
}

/// Sup and inf of one-sided windowed rates (equal in the exact profile).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SideWindows {
    pub sup: Rate,
    pub inf: Rate,
}

/// Everything the decision procedures read about a positive sequence:
/// one-sided tail rates and the all-anchor sup/inf of forward windows.
///
/// For a measure-ratio sequence `ρ` the tails are `g⁻`, `g⁺`; for a weight
/// sequence they are the tail geometric means of `|w|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateProfile {
    pub method: Method,
    pub neg: SideWindows,
    pub pos: SideWindows,
    pub inf_all: Rate,
    pub sup_all: Rate,
}

impl RateProfile {
    pub fn exact(seq: &EventuallyPeriodicSequence) -> Self {
        let rates = seq.side_rate();
        let side = |s: Side| {
            let r = Rate {
                value: rates.get(s),
                vs_one: rates.cmp_one(s),
            };
            SideWindows { sup: r, inf: r }
        };
        let neg = side(Side::Negative).sup;
        let pos = side(Side::Positive).sup;
        let (lo, hi) = if (neg.vs_one, neg.value) <= (pos.vs_one, pos.value) {
            (neg, pos)
        } else {
            (pos, neg)
        };
        Self {
            method: Method::Exact,
            neg: side(Side::Negative),
            pos: side(Side::Positive),
            inf_all: lo,
            sup_all: hi,
        }
    }

    /// Windowed estimates at gap `n` over anchors `|k| ≤ k_span`.
    pub fn horizon(seq: &EventuallyPeriodicSequence, n: u64, k_span: u64) -> Self {
        let est = |q, d| Rate::approx(seq.rate_horizon(q, d, n, k_span));
        Self {
            method: Method::Horizon,
            neg: SideWindows {
                sup: est(Quantifier::SupKInNegatives, Direction::Backward),
                inf: est(Quantifier::InfKInNegatives, Direction::Backward),
            },
            pos: SideWindows {
                sup: est(Quantifier::SupKInNaturals, Direction::Forward),
                inf: est(Quantifier::InfKInNaturals, Direction::Forward),
            },
            inf_all: est(Quantifier::InfAllK, Direction::Forward),
            sup_all: est(Quantifier::SupAllK, Direction::Forward),
        }
    }

    pub fn g_neg(&self) -> f64 {
        self.neg.sup.value
    }

    pub fn g_pos(&self) -> f64 {
        self.pos.sup.value
    }
}

/// Truth value of a rate condition with its decisive margin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cond {
    pub holds: bool,
    pub margin: f64,
    /// Some decisive rate sits exactly at 1.
    pub boundary: bool,
}

impl Cond {
    fn and(self, other: Cond) -> Cond {
        match (self.holds, other.holds) {
            (true, true) => Cond {
                holds: true,
                margin: self.margin.min(other.margin),
                boundary: false,
            },
            (false, false) => Cond {
                holds: false,
                margin: self.margin.max(other.margin),
                boundary: self.boundary && other.boundary,
            },
            (false, true) => self,
            (true, false) => other,
        }
    }

    fn or(self, other: Cond) -> Cond {
        match (self.holds, other.holds) {
            (true, true) => Cond {
                holds: true,
                margin: self.margin.max(other.margin),
                boundary: false,
            },
            (false, false) => Cond {
                holds: false,
                margin: self.margin.min(other.margin),
                boundary: self.boundary || other.boundary,
            },
            (true, false) => self,
            (false, true) => other,
        }
    }
}

/// The rate conditions every dissipative decision reduces to, stated on the
/// ratio sequence `ρ_k = μ_{k+1} / μ_k`.
pub mod conditions {
    use super::{Cond, RateProfile};

    /// `sup_{n∈ℕ} μ(f^{-n}(W)) = ∞`: `g⁻ < 1`.
    pub fn ed1(r: &RateProfile) -> Cond {
        r.neg.sup.below_one()
    }

    /// `sup_{n∈ℤ} μ(f^n(W)) = ∞`: `g⁻ < 1` or `g⁺ > 1`.
    pub fn ed2(r: &RateProfile) -> Cond {
        r.neg.sup.below_one().or(r.pos.inf.above_one())
    }

    /// `lim inf_k μ_{k+n}/μ_k = ∞`.
    pub fn ue1(r: &RateProfile) -> Cond {
        r.inf_all.above_one()
    }

    /// `lim inf_k μ_{k-n}/μ_k = ∞`.
    pub fn ue2(r: &RateProfile) -> Cond {
        r.sup_all.below_one()
    }

    /// Growth to the right on `k ≥ 0` and to the left on `k ≤ 0`.
    pub fn ue3(r: &RateProfile) -> Cond {
        r.pos.inf.above_one().and(r.neg.sup.below_one())
    }

    pub fn hc(r: &RateProfile) -> Cond {
        r.inf_all.above_one()
    }

    pub fn hd(r: &RateProfile) -> Cond {
        r.sup_all.below_one()
    }

    /// `μ` decays away from the origin on both sides: `g⁻ > 1`, `g⁺ < 1`.
    pub fn gh(r: &RateProfile) -> Cond {
        r.neg.inf.above_one().and(r.pos.sup.below_one())
    }

    /// Hypothesis of the non-structural-stability certificate.
    pub fn p41(r: &RateProfile) -> Cond {
        r.pos.inf.above_one().and(r.neg.sup.below_one())
    }

    /// Shift condition a) on the weight profile.
    pub fn shift_a(w: &RateProfile) -> Cond {
        w.sup_all.below_one()
    }

    /// Shift condition b).
    pub fn shift_b(w: &RateProfile) -> Cond {
        w.inf_all.above_one()
    }

    /// Shift condition c).
    pub fn shift_c(w: &RateProfile) -> Cond {
        w.neg.sup.below_one().and(w.pos.inf.above_one())
    }
}

fn from_cond(cond: Cond, method: Method, holds: Citation, fails: Citation) -> Verdict {
    let (status, citation) = if cond.holds {
        (Status::Holds, holds)
    } else {
        (Status::Fails, fails)
    };
    let v = Verdict::new(status, method, citation).with_margin(cond.margin);
    if cond.boundary {
        v.with_note("decisive rate equals 1; strict condition not met")
    } else {
        v
    }
}

pub fn positively_expansive(r: &RateProfile) -> Verdict {
    from_cond(conditions::ed1(r), r.method, Citation::ED1, Citation::ED1)
}

pub fn expansive(r: &RateProfile) -> Verdict {
    from_cond(conditions::ed2(r), r.method, Citation::ED2, Citation::ED2)
}

/// Uniform positive expansivity needs `μ_{k-n}/μ_k → ∞` uniformly in `k ∈ ℤ`,
/// i.e. contraction of `μ` to the right on both tails. Backward growth
/// `g⁻ < 1` alone is not enough: unit vectors supported deep in a tail with
/// `g⁺ ≥ 1` do not expand under `T^n`.
pub fn uniformly_positively_expansive(r: &RateProfile) -> Verdict {
    let v = from_cond(conditions::ue2(r), r.method, Citation::ED3, Citation::ED3);
    if v.fails() && conditions::ed1(r).holds {
        v.with_note(
            "mu(f^-n(W)) -> infinity, but atoms deep in the positive tail do not expand uniformly",
        )
    } else {
        v
    }
}

pub fn uniformly_expansive(r: &RateProfile) -> Verdict {
    let fired = [
        (conditions::ue1(r), Citation::UE1),
        (conditions::ue2(r), Citation::UE2),
        (conditions::ue3(r), Citation::UE3),
    ];
    match fired.iter().find(|(c, _)| c.holds) {
        Some((c, tag)) => Verdict::new(Status::Holds, r.method, *tag).with_margin(c.margin),
        None => {
            let c = fired[0].0.or(fired[1].0).or(fired[2].0);
            from_cond(c, r.method, Citation::ED4, Citation::ED4)
        }
    }
}

/// Shadowing, generalized hyperbolicity and hyperbolicity.
#[derive(Debug, Clone, PartialEq)]
pub struct ShadowingVerdicts {
    pub shadowing: Verdict,
    pub gh: Verdict,
    pub hyperbolic: Verdict,
}

pub fn shadowing_gh(r: &RateProfile) -> ShadowingVerdicts {
    let hc = conditions::hc(r);
    let hd = conditions::hd(r);
    let gh = conditions::gh(r);
    let hyperbolic = match (hc.holds, hd.holds) {
        (true, _) => Verdict::new(Status::Holds, r.method, Citation::HC).with_margin(hc.margin),
        (_, true) => Verdict::new(Status::Holds, r.method, Citation::HD).with_margin(hd.margin),
        _ => from_cond(hc.or(hd), r.method, Citation::SC1, Citation::SC1),
    };
    let gen = if hyperbolic.holds() {
        Verdict {
            margin: hyperbolic.margin,
            ..hyperbolic.clone()
        }
    } else if gh.holds {
        Verdict::new(Status::Holds, r.method, Citation::GH).with_margin(gh.margin)
    } else {
        from_cond(hc.or(hd).or(gh), r.method, Citation::SC2, Citation::SC2)
    };
    let mut shadowing = gen.clone();
    if shadowing.fails() {
        shadowing.citation = Some(Citation::SC2);
    }
    ShadowingVerdicts {
        shadowing,
        gh: gen,
        hyperbolic,
    }
}

/// Holds when the system is certified NOT structurally stable.
pub fn not_structurally_stable(r: &RateProfile) -> Verdict {
    from_cond(conditions::p41(r), r.method, Citation::P41, Citation::P41)
}

/// Strong structural stability:
/// shadowing ⇒ SSS; otherwise positive expansivity forces SSS ⟺ shadowing,
/// so SSS fails; otherwise the non-stability certificate; otherwise the
/// question is open.
pub fn strongly_structurally_stable(r: &RateProfile) -> Verdict {
    let sh = shadowing_gh(r);
    let pe = conditions::ed1(r);
    let p41 = conditions::p41(r);
    if sh.shadowing.holds() {
        let tag = if sh.hyperbolic.holds() || sh.gh.citation == Some(Citation::GH) {
            Citation::SC1
        } else {
            Citation::SC2
        };
        return Verdict::new(Status::Holds, r.method, tag)
            .with_margin(sh.shadowing.margin.unwrap_or(0.0));
    }
    if pe.holds {
        let shadow_margin = sh.shadowing.margin.unwrap_or(f64::INFINITY);
        return Verdict::new(Status::Fails, r.method, Citation::C)
            .with_margin(pe.margin.min(shadow_margin))
            .with_witness(Witness::rate(r.g_neg()));
    }
    if p41.holds {
        return Verdict::new(Status::Fails, r.method, Citation::P41).with_margin(p41.margin);
    }
    let shadow_margin = sh.shadowing.margin.unwrap_or(0.0);
    let mut v = Verdict::undecided(
        r.method,
        Some(Citation::OpenProblem),
        "no shadowing, not positively expansive: the converse of the shadowing criterion is open",
    )
    .with_margin(shadow_margin.min(pe.margin));
    v.citation = Some(Citation::OpenProblem);
    v
}

fn structurally_stable(
    sss: &Verdict,
    pe: &Verdict,
    hyperbolic: &Verdict,
    p41: &Verdict,
) -> Verdict {
    let method = sss.method;
    if sss.holds() {
        return Verdict {
            note: None,
            ..sss.clone()
        };
    }
    if pe.holds() && hyperbolic.fails() {
        let tag = if p41.holds() {
            Citation::P41
        } else {
            Citation::C
        };
        let margin = pe
            .margin
            .unwrap_or(0.0)
            .min(hyperbolic.margin.unwrap_or(0.0));
        return Verdict::new(Status::Fails, method, tag)
            .with_margin(margin)
            .with_note("positively expansive but not hyperbolic");
    }
    Verdict::undecided(
        method,
        Some(Citation::OpenProblem),
        "no available criterion decides structural stability here",
    )
}

pub fn classify_positively_expansive(sys: &DissipativeSystem) -> Verdict {
    let v = positively_expansive(&RateProfile::exact(sys.measures().ratio()));
    if v.holds() {
        // first n with μ_{-n} > 10⁶ μ_0
        let target = 1e6_f64.ln();
        let ms = sys.measures();
        let n = (1..=1_000_000i64)
            .find(|&n| ms.log_mu(-n) - ms.log_mu(0) > target)
            .expect("μ_{-n} diverges when g⁻ < 1");
        v.with_witness(Witness::index(n))
    } else {
        v
    }
}

pub fn classify_expansive(sys: &DissipativeSystem) -> Verdict {
    expansive(&RateProfile::exact(sys.measures().ratio()))
}

pub fn classify_uniformly_positively_expansive(sys: &DissipativeSystem) -> Verdict {
    uniformly_positively_expansive(&RateProfile::exact(sys.measures().ratio()))
}

pub fn classify_uniformly_expansive(sys: &DissipativeSystem) -> Verdict {
    uniformly_expansive(&RateProfile::exact(sys.measures().ratio()))
}

pub fn classify_shadowing_gh(sys: &DissipativeSystem) -> ShadowingVerdicts {
    shadowing_gh(&RateProfile::exact(sys.measures().ratio()))
}

pub fn classify_not_structurally_stable(sys: &DissipativeSystem) -> Verdict {
    not_structurally_stable(&RateProfile::exact(sys.measures().ratio()))
}

pub fn classify_sss(sys: &DissipativeSystem) -> Verdict {
    strongly_structurally_stable(&RateProfile::exact(sys.measures().ratio()))
}

/// Strong structural stability, shadowing and hyperbolicity of `B_w`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftVerdicts {
    pub sss: Verdict,
    pub shadowing: Verdict,
    pub hyperbolic: Verdict,
}

pub fn shift_verdicts(w: &RateProfile) -> ShiftVerdicts {
    let a = conditions::shift_a(w);
    let b = conditions::shift_b(w);
    let c = conditions::shift_c(w);
    let hyperbolic = if a.holds {
        Verdict::new(Status::Holds, w.method, Citation::Ba).with_margin(a.margin)
    } else if b.holds {
        Verdict::new(Status::Holds, w.method, Citation::Bb).with_margin(b.margin)
    } else {
        from_cond(a.or(b), w.method, Citation::B, Citation::B)
    };
    let sss = if hyperbolic.holds() {
        hyperbolic.clone()
    } else if c.holds {
        Verdict::new(Status::Holds, w.method, Citation::Bc).with_margin(c.margin)
    } else {
        from_cond(a.or(b).or(c), w.method, Citation::B, Citation::B)
    };
    ShiftVerdicts {
        shadowing: sss.clone(),
        sss,
        hyperbolic,
    }
}

pub fn classify_shift(w: &WeightSequence) -> ShiftVerdicts {
    shift_verdicts(&RateProfile::exact(w.weights()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AtomicMode {
    Positive,
    Twosided,
}

/// Every atom must have an unbounded backward (or two-sided) measure orbit.
/// A cycle keeps its atoms' orbit measures bounded by the largest atom.
pub fn classify_atomic_expansive(sys: &AtomicSystem, mode: AtomicMode) -> Verdict {
    let citation = match mode {
        AtomicMode::Positive => Citation::E1,
        AtomicMode::Twosided => Citation::E2,
    };
    let mut margin = f64::INFINITY;
    for c in sys.components() {
        match c {
            Component::Cycle(m) => {
                let sup = m.iter().copied().fold(0.0, f64::max);
                return Verdict::new(Status::Fails, Method::Exact, citation)
                    .with_witness(Witness::measure(sup))
                    .with_note("cycle atoms have bounded orbit measures");
            }
            Component::Line(ms) => {
                let r = RateProfile::exact(ms.ratio());
                let cond = match mode {
                    AtomicMode::Positive => conditions::ed1(&r),
                    AtomicMode::Twosided => conditions::ed2(&r),
                };
                if !cond.holds {
                    return Verdict::new(Status::Fails, Method::Exact, citation)
                        .with_margin(cond.margin)
                        .with_note("a line has bounded orbit measures in the required direction");
                }
                margin = margin.min(cond.margin);
            }
        }
    }
    Verdict::new(Status::Holds, Method::Exact, citation).with_margin(margin)
}

/// Orientation of a line's atoms in the uniform two-sided split.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Orientation {
    /// Every atom grows under `f^n`.
    Forward,
    /// Every atom grows under `f^{-n}`.
    Backward,
    /// Atoms with index ≥ 0 grow under `f^n`, the rest under `f^{-n}`.
    Split,
}

fn line_orientation(ms: &MeasureSequence) -> Option<(Orientation, f64)> {
    let r = RateProfile::exact(ms.ratio());
    let (u1, u2, u3) = (
        conditions::ue1(&r),
        conditions::ue2(&r),
        conditions::ue3(&r),
    );
    if u1.holds {
        Some((Orientation::Forward, u1.margin))
    } else if u2.holds {
        Some((Orientation::Backward, u2.margin))
    } else if u3.holds {
        Some((Orientation::Split, u3.margin))
    } else {
        None
    }
}

/// Uniform (positive) expansivity of an atomic system with finitely many
/// components, cross-checked on `sample_budget` random finite atom sets at
/// gap `horizon`.
pub fn classify_atomic_uniform(
    sys: &AtomicSystem,
    mode: AtomicMode,
    horizon: u64,
    sample_budget: usize,
    seed: u64,
) -> Verdict {
    let citation = match mode {
        AtomicMode::Positive => Citation::E3,
        AtomicMode::Twosided => Citation::E4,
    };
    if sys.has_cycle() {
        return Verdict::new(Status::Fails, Method::Exact, citation)
            .with_note("cycle atoms have bounded orbit measure ratios");
    }
    let mut orientations = Vec::new();
    let mut margin = f64::INFINITY;
    for c in sys.components() {
        let Component::Line(ms) = c else {
            unreachable!()
        };
        let r = RateProfile::exact(ms.ratio());
        let ok = match mode {
            AtomicMode::Positive => {
                let c = conditions::ue2(&r);
                c.holds.then_some((Orientation::Backward, c.margin))
            }
            AtomicMode::Twosided => line_orientation(ms),
        };
        match ok {
            Some((o, m)) => {
                orientations.push(o);
                margin = margin.min(m);
            }
            None => {
                return Verdict::new(Status::Fails, Method::Exact, citation)
                    .with_note("a line admits no uniform orientation")
            }
        }
    }
    if let Some(bad) = sample_contradiction(sys, &orientations, horizon, sample_budget, seed) {
        return Verdict::undecided(
            Method::Exact,
            None,
            format!("sampler contradicts the exact rule at horizon {horizon} (set #{bad})"),
        );
    }
    Verdict::new(Status::Holds, Method::Exact, citation).with_margin(margin)
}

/// Draws random finite atom sets and checks that the dominant half of each
/// expands past `2^p` at gap `horizon` in its assigned direction.
fn sample_contradiction(
    sys: &AtomicSystem,
    orientations: &[Orientation],
    horizon: u64,
    budget: usize,
    seed: u64,
) -> Option<usize> {
    const RADIUS: i64 = 10;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = horizon as i64;
    let lines: Vec<&MeasureSequence> = sys
        .components()
        .iter()
        .map(|c| match c {
            Component::Line(ms) => ms,
            Component::Cycle(_) => unreachable!(),
        })
        .collect();
    let threshold = 2f64.powf(sys.p());
    for sample in 0..budget {
        let size = rng.gen_range(1..=4);
        let mut atoms: Vec<(usize, i64)> = (0..size)
            .map(|_| {
                (
                    rng.gen_range(0..lines.len()),
                    rng.gen_range(-RADIUS..=RADIUS),
                )
            })
            .collect();
        atoms.sort_unstable();
        atoms.dedup();
        // (mass, mass after f^{-n}, mass after f^{n}) per class
        let mut fwd = (0.0, 0.0);
        let mut bwd = (0.0, 0.0);
        for &(c, k) in &atoms {
            let ms = lines[c];
            let forward_class = match orientations[c] {
                Orientation::Forward => true,
                Orientation::Backward => false,
                Orientation::Split => k >= 0,
            };
            let m = ms.mu(k);
            if forward_class {
                // ‖T^{-n} χ_a‖^p = μ(f^n(a))
                fwd.0 += m;
                fwd.1 += ms.mu(k + n);
            } else {
                bwd.0 += m;
                bwd.1 += ms.mu(k - n);
            }
        }
        let total = fwd.0 + bwd.0;
        let ok = if fwd.0 >= total / 2.0 {
            // the dominant half alone already carries the expansion
            fwd.1 / total >= threshold
        } else {
            bwd.1 / total >= threshold
        };
        if !ok {
            return Some(sample);
        }
    }
    None
}

/// The properties a report decides.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Property {
    PE,
    E,
    UPE,
    UE,
    Shadowing,
    Hyperbolic,
    GeneralizedHyperbolic,
    SSS,
    StructStable,
}

impl Property {
    pub const ALL: [Property; 9] = [
        Property::PE,
        Property::E,
        Property::UPE,
        Property::UE,
        Property::Shadowing,
        Property::Hyperbolic,
        Property::GeneralizedHyperbolic,
        Property::SSS,
        Property::StructStable,
    ];
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemKind {
    Dissipative,
    Atomic,
    Shift,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub kind: SystemKind,
    pub fingerprint: String,
    /// `(g⁻, g⁺)` of the measure ratios; for shifts, of the equivalent
    /// composition model. Absent for atomic systems.
    pub rates: Option<(f64, f64)>,
    #[serde(rename = "PE")]
    pub pe: Verdict,
    #[serde(rename = "E")]
    pub e: Verdict,
    #[serde(rename = "UPE")]
    pub upe: Verdict,
    #[serde(rename = "UE")]
    pub ue: Verdict,
    #[serde(rename = "Shadowing")]
    pub shadowing: Verdict,
    #[serde(rename = "Hyperbolic")]
    pub hyperbolic: Verdict,
    #[serde(rename = "GeneralizedHyperbolic")]
    pub gh: Verdict,
    #[serde(rename = "SSS")]
    pub sss: Verdict,
    #[serde(rename = "StructStable")]
    pub struct_stable: Verdict,
}

impl ClassificationReport {
    pub fn get(&self, p: Property) -> &Verdict {
        match p {
            Property::PE => &self.pe,
            Property::E => &self.e,
            Property::UPE => &self.upe,
            Property::UE => &self.ue,
            Property::Shadowing => &self.shadowing,
            Property::Hyperbolic => &self.hyperbolic,
            Property::GeneralizedHyperbolic => &self.gh,
            Property::SSS => &self.sss,
            Property::StructStable => &self.struct_stable,
        }
    }

    pub fn get_mut(&mut self, p: Property) -> &mut Verdict {
        match p {
            Property::PE => &mut self.pe,
            Property::E => &mut self.e,
            Property::UPE => &mut self.upe,
            Property::UE => &mut self.ue,
            Property::Shadowing => &mut self.shadowing,
            Property::Hyperbolic => &mut self.hyperbolic,
            Property::GeneralizedHyperbolic => &mut self.gh,
            Property::SSS => &mut self.sss,
            Property::StructStable => &mut self.struct_stable,
        }
    }

    pub fn status(&self, p: Property) -> Status {
        self.get(p).status
    }
}

fn fingerprint(kind: SystemKind, debug: &str) -> String {
    let digest = Sha256::digest(format!("{kind:?}:{debug}").as_bytes());
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// Full report from a rate profile of the measure ratios.
pub fn report_from_profile(
    r: &RateProfile,
    kind: SystemKind,
    fingerprint: String,
) -> ClassificationReport {
    let sh = shadowing_gh(r);
    let pe = positively_expansive(r);
    let sss = strongly_structurally_stable(r);
    let p41 = not_structurally_stable(r);
    let struct_stable = structurally_stable(&sss, &pe, &sh.hyperbolic, &p41);
    ClassificationReport {
        kind,
        fingerprint,
        rates: Some((r.g_neg(), r.g_pos())),
        e: expansive(r),
        upe: uniformly_positively_expansive(r),
        ue: uniformly_expansive(r),
        shadowing: sh.shadowing,
        hyperbolic: sh.hyperbolic,
        gh: sh.gh,
        sss,
        struct_stable,
        pe,
    }
}

/// Exact report for a dissipative system; rejects systems violating (◊).
pub fn classify_dissipative(
    sys: &DissipativeSystem,
) -> Result<ClassificationReport, ClassifyError> {
    let d = check_bounded_distortion(sys);
    if !d.ok {
        return Err(SystemError::Distortion {
            k_min: d.k_min,
            declared: sys.declared_k(),
        }
        .into());
    }
    let fp = fingerprint(SystemKind::Dissipative, &format!("{sys:?}"));
    let mut report = report_from_profile(
        &RateProfile::exact(sys.measures().ratio()),
        SystemKind::Dissipative,
        fp,
    );
    report.pe = classify_positively_expansive(sys);
    Ok(report)
}

/// The same report recomputed from windowed estimates.
pub fn classify_dissipative_horizon(
    sys: &DissipativeSystem,
    n: u64,
    k_span: u64,
) -> ClassificationReport {
    let fp = fingerprint(SystemKind::Dissipative, &format!("{sys:?}"));
    report_from_profile(
        &RateProfile::horizon(sys.measures().ratio(), n, k_span),
        SystemKind::Dissipative,
        fp,
    )
}

/// Shift report: strong structural stability, shadowing and hyperbolicity
/// from the weight conditions; the remaining properties from the isometric
/// composition model `ρ_k = w_{k+1}^{-p}`.
pub fn classify_shift_report(
    w: &WeightSequence,
    p: f64,
) -> Result<ClassificationReport, ClassifyError> {
    let model = w.dissipative_model(p)?;
    let fp = fingerprint(SystemKind::Shift, &format!("{w:?}:{p}"));
    let mut report = report_from_profile(
        &RateProfile::exact(model.measures().ratio()),
        SystemKind::Shift,
        fp,
    );
    report.pe = classify_positively_expansive(&model);
    let sv = classify_shift(w);
    for v in [
        &mut report.pe,
        &mut report.e,
        &mut report.upe,
        &mut report.ue,
        &mut report.gh,
    ] {
        v.note = Some(match v.note.take() {
            Some(n) => format!("via composition model; {n}"),
            None => "via composition model".to_owned(),
        });
    }
    let p41 = report.struct_stable.clone();
    report.struct_stable = structurally_stable(&sv.sss, &report.pe, &sv.hyperbolic, &p41);
    report.sss = sv.sss;
    report.shadowing = sv.shadowing;
    report.hyperbolic = sv.hyperbolic;
    Ok(report)
}

pub fn classify_atomic_report(
    sys: &AtomicSystem,
    horizon: u64,
    samples: usize,
    seed: u64,
) -> ClassificationReport {
    let outside = || {
        Verdict::undecided(
            Method::Exact,
            None,
            "atomic systems: only expansivity criteria are available",
        )
    };
    ClassificationReport {
        kind: SystemKind::Atomic,
        fingerprint: fingerprint(SystemKind::Atomic, &format!("{sys:?}")),
        rates: None,
        pe: classify_atomic_expansive(sys, AtomicMode::Positive),
        e: classify_atomic_expansive(sys, AtomicMode::Twosided),
        upe: classify_atomic_uniform(sys, AtomicMode::Positive, horizon, samples, seed),
        ue: classify_atomic_uniform(sys, AtomicMode::Twosided, horizon, samples, seed),
        shadowing: outside(),
        hyperbolic: outside(),
        gh: outside(),
        sss: outside(),
        struct_stable: outside(),
    }
}

/// A broken implication between two decided verdicts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub rule: String,
}

/// Checks every implication whose premise and conclusion are both decided.
pub fn implication_audit(report: &ClassificationReport) -> Vec<Violation> {
    use Property::*;
    let s = |p| report.status(p);
    let mut out = Vec::new();
    let implications = [
        (Hyperbolic, UE),
        (Hyperbolic, GeneralizedHyperbolic),
        (GeneralizedHyperbolic, Shadowing),
        (GeneralizedHyperbolic, SSS),
        (SSS, StructStable),
        (UE, E),
        (UPE, PE),
    ];
    for (a, b) in implications {
        if s(a) == Status::Holds && s(b) == Status::Fails {
            out.push(Violation {
                rule: format!("{a} => {b}"),
            });
        }
    }
    if s(PE) == Status::Holds && s(Hyperbolic) == Status::Fails && s(StructStable) == Status::Holds
    {
        out.push(Violation {
            rule: "PE and not Hyperbolic => not StructStable".into(),
        });
    }
    if s(PE) == Status::Holds && s(SSS) == Status::Holds && s(Shadowing) == Status::Fails {
        out.push(Violation {
            rule: "PE and SSS => Shadowing".into(),
        });
    }
    if s(PE) == Status::Holds && s(Shadowing) == Status::Fails && s(SSS) == Status::Holds {
        out.push(Violation {
            rule: "PE and not Shadowing => not SSS".into(),
        });
    }
    out
}
