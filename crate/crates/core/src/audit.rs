//! Seeded sweeps over random eventually periodic dissipative systems.
//!
//! Each system is classified exactly, re-classified from finite-horizon
//! window estimates, checked against the brute-force expansivity oracle and
//! run through the implication audit.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::classify::{
    classify_dissipative, conditions, implication_audit, report_from_profile, ClassificationReport,
    Cond, Property, RateProfile, Status, SystemKind, Violation,
};
use crate::seqcore::EventuallyPeriodicSequence;
use crate::simulate::{brute_force_expansivity, ExpansivityMode, Operator};
use crate::systems::{Cells, DissipativeSystem, MeasureSequence};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepConfig {
    pub count: usize,
    pub seed: u64,
    /// Window length of the horizon estimators.
    pub n: u64,
    pub k_span: u64,
    /// Verdicts are compared only when the exact decisive margin exceeds this.
    pub margin: f64,
    pub brute_horizon: u64,
    pub brute_samples: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            count: 200,
            seed: 0,
            n: 200,
            k_span: 500,
            margin: 0.05,
            brute_horizon: 40,
            brute_samples: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Disagreement {
    pub system: usize,
    pub check: String,
    pub exact: Status,
    pub other: Status,
    pub margin: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditFinding {
    pub system: usize,
    pub rule: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SweepSummary {
    pub systems: usize,
    /// Exact/horizon pairs compared and skipped for small margin.
    pub compared: usize,
    pub skipped: usize,
    pub horizon_disagreements: Vec<Disagreement>,
    pub brute_force_conflicts: Vec<Disagreement>,
    pub violations: Vec<AuditFinding>,
    /// `[holds, fails, undecided]` per property over the exact reports.
    pub status_counts: BTreeMap<String, [usize; 3]>,
}

impl SweepSummary {
    pub fn clean(&self) -> bool {
        self.horizon_disagreements.is_empty()
            && self.brute_force_conflicts.is_empty()
            && self.violations.is_empty()
    }
}

fn random_period(rng: &mut ChaCha8Rng) -> Vec<f64> {
    let len = rng.gen_range(1..=4);
    if rng.gen_bool(0.15) {
        // product exactly 1
        let r = 2f64.powi(rng.gen_range(-2..=2));
        return if len == 1 {
            vec![1.0]
        } else {
            vec![r, 1.0 / r]
        };
    }
    (0..len)
        .map(|_| rng.gen_range(-2.0..=2.0_f64).exp())
        .collect()
}

/// A random system with periods of length at most 4, log-ratios in
/// `[-2, 2]`, a core of one to three entries near the origin and, in about a third of the
/// draws, a partition of `W` into cells with a bounded wobble.
pub fn random_system(rng: &mut ChaCha8Rng) -> DissipativeSystem {
    let core_lo = rng.gen_range(-2..=0);
    let core: Vec<f64> = (0..rng.gen_range(1..=3))
        .map(|_| rng.gen_range(-2.0..=2.0_f64).exp())
        .collect();
    let neg = random_period(rng);
    let pos = random_period(rng);
    let ratio = EventuallyPeriodicSequence::new(core_lo, core, neg, pos).expect("positive entries");
    let p = [1.0, 1.5, 2.0, 3.0][rng.gen_range(0..4)];
    let mu0 = rng.gen_range(-1.0..=1.0_f64).exp();
    let measures = MeasureSequence::new(mu0, ratio).expect("positive mu0");
    if !rng.gen_bool(1.0 / 3.0) {
        return DissipativeSystem::new(p, measures).expect("valid p");
    }
    let count = rng.gen_range(2..=3);
    let raw: Vec<f64> = (0..count).map(|_| rng.gen_range(0.2..=1.0)).collect();
    let total: f64 = raw.iter().sum();
    let beta: Vec<f64> = raw.iter().map(|b| b * mu0 / total).collect();
    let mut wobble = BTreeMap::new();
    let mut k_min: f64 = 1.0;
    for k in rng.gen_range(-3..=0)..=rng.gen_range(0..=3) {
        let theta: Vec<f64> = (0..count).map(|_| rng.gen_range(0.5..=2.0)).collect();
        let mass: f64 = beta.iter().zip(&theta).map(|(b, t)| b * t).sum();
        let row: Vec<f64> = theta.iter().map(|t| t * mu0 / mass).collect();
        k_min = row.iter().fold(k_min, |m, t| m.max(*t).max(1.0 / t));
        wobble.insert(k, row);
    }
    let cells = Cells::new(beta, wobble).expect("normalized rows");
    DissipativeSystem::with_cells(p, measures, cells, k_min * 1.01).expect("consistent cells")
}

fn status(c: Cond) -> Status {
    if c.holds {
        Status::Holds
    } else {
        Status::Fails
    }
}

type Condition = fn(&RateProfile) -> Cond;

const CONDITIONS: [(&str, Condition); 9] = [
    ("ED1", conditions::ed1),
    ("ED2", conditions::ed2),
    ("UE1", conditions::ue1),
    ("UE2", conditions::ue2),
    ("UE3", conditions::ue3),
    ("HC", conditions::hc),
    ("HD", conditions::hd),
    ("GH", conditions::gh),
    ("P41", conditions::p41),
];

const BRUTE_MODES: [(Property, ExpansivityMode); 4] = [
    (Property::PE, ExpansivityMode::Positive),
    (Property::E, ExpansivityMode::Twosided),
    (Property::UPE, ExpansivityMode::UniformPositive),
    (Property::UE, ExpansivityMode::UniformTwosided),
];

pub fn run_sweep(cfg: &SweepConfig) -> SweepSummary {
    run_sweep_with(cfg, |_, _| {})
}

/// [`run_sweep`] with a hook that may alter each exact report before the
/// implication audit runs.
pub fn run_sweep_with(
    cfg: &SweepConfig,
    mut hook: impl FnMut(usize, &mut ClassificationReport),
) -> SweepSummary {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = SweepSummary {
        systems: cfg.count,
        ..Default::default()
    };
    for id in 0..cfg.count {
        let sys = random_system(&mut rng);
        audit_system(id, &sys, cfg, &mut out, &mut hook);
    }
    out
}

/// Runs every check of the sweep on one system and records the findings
/// under `id`; `cfg.seed ^ id` seeds the brute-force samples.
pub fn audit_system(
    id: usize,
    sys: &DissipativeSystem,
    cfg: &SweepConfig,
    out: &mut SweepSummary,
    hook: &mut impl FnMut(usize, &mut ClassificationReport),
) {
    let ratio = sys.measures().ratio();
    let exact = RateProfile::exact(ratio);
    let horizon = RateProfile::horizon(ratio, cfg.n, cfg.k_span);

    for (name, cond) in CONDITIONS {
        let (e, h) = (cond(&exact), cond(&horizon));
        if e.margin <= cfg.margin {
            out.skipped += 1;
            continue;
        }
        out.compared += 1;
        if e.holds != h.holds {
            out.horizon_disagreements.push(Disagreement {
                system: id,
                check: name.to_owned(),
                exact: status(e),
                other: status(h),
                margin: Some(e.margin),
            });
        }
    }

    let mut report =
        classify_dissipative(sys).expect("generated systems satisfy bounded distortion");
    let hreport = report_from_profile(
        &horizon,
        SystemKind::Dissipative,
        report.fingerprint.clone(),
    );
    for prop in Property::ALL {
        let (e, h) = (report.get(prop), hreport.get(prop));
        let decided = e.status != Status::Undecided && h.status != Status::Undecided;
        match e.margin {
            Some(m) if decided && m > cfg.margin => {
                out.compared += 1;
                if e.status != h.status {
                    out.horizon_disagreements.push(Disagreement {
                        system: id,
                        check: prop.to_string(),
                        exact: e.status,
                        other: h.status,
                        margin: e.margin,
                    });
                }
            }
            _ => out.skipped += 1,
        }
        let counts = out.status_counts.entry(prop.to_string()).or_default();
        counts[match e.status {
            Status::Holds => 0,
            Status::Fails => 1,
            Status::Undecided => 2,
        }] += 1;
    }

    let op = Operator::composition(sys);
    for (prop, mode) in BRUTE_MODES {
        let brute = brute_force_expansivity(
            &op,
            mode,
            cfg.brute_horizon,
            cfg.brute_samples,
            cfg.seed ^ id as u64,
        )
        .expect("samples ≥ 1");
        let verdict = report.status(prop);
        let conflict = matches!(
            (brute.verdict.status, verdict),
            (Status::Holds, Status::Fails) | (Status::Fails, Status::Holds)
        );
        if conflict {
            out.brute_force_conflicts.push(Disagreement {
                system: id,
                check: format!("{prop} vs {mode:?}"),
                exact: verdict,
                other: brute.verdict.status,
                margin: report.get(prop).margin,
            });
        }
    }

    hook(id, &mut report);
    out.violations.extend(
        implication_audit(&report)
            .into_iter()
            .map(|Violation { rule }| AuditFinding { system: id, rule }),
    );
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::check_bounded_distortion;

    #[test]
    fn generated_systems_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let sys = random_system(&mut rng);
            assert!(check_bounded_distortion(&sys).ok);
            let r = sys.measures().ratio();
            assert!(r.neg_period().len() <= 4 && r.pos_period().len() <= 4);
            assert!((-2..=0).contains(&r.core_lo()) && (1..=3).contains(&r.core().len()));
        }
    }

    #[test]
    fn small_sweep_is_clean() {
        let summary = run_sweep(&SweepConfig {
            count: 25,
            seed: 3,
            ..Default::default()
        });
        assert!(summary.clean(), "{summary:#?}");
        assert!(summary.compared > 0);
    }
}
