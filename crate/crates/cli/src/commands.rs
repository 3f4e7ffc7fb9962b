//! The five subcommands.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use compdyn::audit::{audit_system, run_sweep_with, SweepConfig, SweepSummary};
use compdyn::classify::{
    classify_atomic_report, classify_dissipative, classify_dissipative_horizon,
    classify_shift_report, implication_audit, Citation, ClassificationReport, Method, Property,
    Status, Verdict, Violation,
};
use compdyn::simulate::{
    make_pseudotrajectory, norm, orbit_norms, shadow as shadow_orbit, Contraction, LineSplit,
    Operator, SparseVector, Splitting, ORBIT_RESIDUAL_TOLERANCE,
};
use compdyn::systems::{
    check_bounded_distortion, derived_distortion_h, induced_weights, DissipativeSystem, Site,
};
use serde::Serialize;

use crate::canonical::{self, format_float};
use crate::config::{Kind, RawPresentation, ShiftConfig, System, SystemConfig};
use crate::{CliError, Outcome, EXIT_OK, EXIT_VIOLATION, TOOL, VERSION};

/// Horizon and sample count of the brute-force oracle on atomic systems.
pub const BRUTE_HORIZON: u64 = 40;
pub const BRUTE_SAMPLES: usize = 16;
/// Exact/horizon pairs are compared only above this decisive margin.
pub const CROSS_CHECK_MARGIN: f64 = 0.05;

fn invalid(e: impl ToString) -> CliError {
    CliError::Usage(e.to_string())
}

/// The measure model whose rates decide the system, if any.
fn measure_model(system: &System) -> Result<Option<DissipativeSystem>, CliError> {
    Ok(match system {
        System::Dissipative(s) => Some(s.clone()),
        System::Shift { weights, p } => Some(weights.dissipative_model(*p).map_err(invalid)?),
        System::Atomic(_) => None,
    })
}

fn operator(system: &System) -> Operator {
    match system {
        System::Dissipative(s) => Operator::composition(s),
        System::Atomic(s) => Operator::atomic(s),
        System::Shift { weights, p } => Operator::shift(weights, *p),
    }
}

fn report_for(system: &System, seed: u64) -> Result<ClassificationReport, CliError> {
    match system {
        System::Dissipative(s) => classify_dissipative(s).map_err(invalid),
        System::Shift { weights, p } => classify_shift_report(weights, *p).map_err(invalid),
        System::Atomic(s) => Ok(classify_atomic_report(
            s,
            BRUTE_HORIZON,
            BRUTE_SAMPLES,
            seed,
        )),
    }
}

/// Overwrites two verdicts so that `GH => Shadowing` is broken.
pub fn inject_violation(report: &mut ClassificationReport) {
    report.gh = Verdict::new(Status::Holds, Method::Exact, Citation::GH);
    report.shadowing = Verdict::new(Status::Fails, Method::Exact, Citation::SC2);
}

pub struct ClassifyOptions {
    pub json: bool,
    pub horizon: u64,
    pub k_span: u64,
    pub seed: u64,
    pub inject_violation: bool,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        Self {
            json: false,
            horizon: 200,
            k_span: 500,
            seed: 0,
            inject_violation: false,
        }
    }
}

#[derive(Debug, Serialize)]
struct Rates {
    g_neg: f64,
    g_pos: f64,
}

#[derive(Debug, Serialize)]
struct AuditResult {
    ok: bool,
    violations: Vec<String>,
}

#[derive(Debug, Serialize)]
struct CrossCheckEntry {
    property: String,
    exact: Status,
    horizon: Status,
    margin: Option<f64>,
}

#[derive(Debug, Serialize)]
struct CrossCheck {
    n: u64,
    k_span: u64,
    margin_threshold: f64,
    compared: usize,
    disagreements: Vec<CrossCheckEntry>,
}

#[derive(Debug, Serialize)]
struct BruteParams {
    horizon: u64,
    samples: usize,
}

#[derive(Debug, Serialize)]
struct Distortion {
    k_min: f64,
    declared_k: f64,
    h: f64,
    within_k_squared: bool,
}

#[derive(Debug, Serialize)]
struct ClassifyDocument {
    tool: &'static str,
    version: &'static str,
    label: String,
    kind: Kind,
    p: f64,
    fingerprint: String,
    rates: Option<Rates>,
    verdicts: BTreeMap<String, Verdict>,
    audit: AuditResult,
    horizon: Option<CrossCheck>,
    brute_force: Option<BruteParams>,
    distortion: Option<Distortion>,
    seed: u64,
}

fn cross_check(model: &DissipativeSystem, n: u64, k_span: u64) -> Result<CrossCheck, CliError> {
    let exact = classify_dissipative(model).map_err(invalid)?;
    let horizon = classify_dissipative_horizon(model, n, k_span);
    let mut out = CrossCheck {
        n,
        k_span,
        margin_threshold: CROSS_CHECK_MARGIN,
        compared: 0,
        disagreements: Vec::new(),
    };
    for prop in Property::ALL {
        let (e, h) = (exact.get(prop), horizon.get(prop));
        let decided = e.status != Status::Undecided && h.status != Status::Undecided;
        if !decided || e.margin.is_none_or(|m| m <= CROSS_CHECK_MARGIN) {
            continue;
        }
        out.compared += 1;
        if e.status != h.status {
            out.disagreements.push(CrossCheckEntry {
                property: prop.to_string(),
                exact: e.status,
                horizon: h.status,
                margin: e.margin,
            });
        }
    }
    Ok(out)
}

fn status_word(s: Status) -> &'static str {
    match s {
        Status::Holds => "Holds",
        Status::Fails => "Fails",
        Status::Undecided => "Undecided",
    }
}

fn verdict_table(doc: &ClassifyDocument) -> String {
    let mut s = String::new();
    let label = if doc.label.is_empty() {
        "-"
    } else {
        &doc.label
    };
    let _ = writeln!(
        s,
        "system       {} ({}, p = {})",
        label,
        doc.kind,
        format_float(doc.p)
    );
    let _ = writeln!(s, "fingerprint  {}", doc.fingerprint);
    if let Some(r) = &doc.rates {
        let _ = writeln!(
            s,
            "rates        g- = {}  g+ = {}",
            format_float(r.g_neg),
            format_float(r.g_pos)
        );
    }
    if let Some(d) = &doc.distortion {
        let _ = writeln!(
            s,
            "distortion   K_min = {}  declared K = {}  H = {}",
            format_float(d.k_min),
            format_float(d.declared_k),
            format_float(d.h)
        );
    }
    let _ = writeln!(s);
    let _ = writeln!(
        s,
        "{:<22} {:<10} {:<12} {:<18} {:<14} note",
        "property", "status", "citation", "witness", "margin"
    );
    for prop in Property::ALL {
        let v = &doc.verdicts[&prop.to_string()];
        let citation = v.citation.map_or("-".to_owned(), |c| c.to_string());
        let witness = v.witness.map_or("-".to_owned(), |w| {
            format!("{:?} {}", w.kind, format_float(w.value)).to_lowercase()
        });
        let margin = v.margin.map_or("-".to_owned(), format_float);
        let note = v.note.as_deref().unwrap_or("");
        let line = format!(
            "{:<22} {:<10} {:<12} {:<18} {:<14} {}",
            prop.to_string(),
            status_word(v.status),
            citation,
            witness,
            margin,
            note
        );
        let _ = writeln!(s, "{}", line.trim_end());
    }
    let _ = writeln!(s);
    if doc.audit.ok {
        let _ = writeln!(s, "audit        ok");
    } else {
        let _ = writeln!(
            s,
            "audit        {} violation(s)",
            doc.audit.violations.len()
        );
        for v in &doc.audit.violations {
            let _ = writeln!(s, "  violated: {v}");
        }
    }
    if let Some(h) = &doc.horizon {
        let _ = writeln!(
            s,
            "horizon      n = {}, k_span = {}: {} compared, {} disagreement(s)",
            h.n,
            h.k_span,
            h.compared,
            h.disagreements.len()
        );
        for d in &h.disagreements {
            let _ = writeln!(
                s,
                "  {}: exact {} vs horizon {}",
                d.property,
                status_word(d.exact),
                status_word(d.horizon)
            );
        }
    }
    if let Some(b) = &doc.brute_force {
        let _ = writeln!(
            s,
            "brute force  horizon = {}, samples = {}, seed = {}",
            b.horizon, b.samples, doc.seed
        );
    }
    s
}

pub fn classify(cfg: &SystemConfig, opts: &ClassifyOptions) -> Result<Outcome, CliError> {
    let mut report = report_for(&cfg.system, opts.seed)?;
    if opts.inject_violation {
        inject_violation(&mut report);
    }
    let violations: Vec<String> = implication_audit(&report)
        .into_iter()
        .map(|Violation { rule }| rule)
        .collect();
    let horizon = match measure_model(&cfg.system)? {
        Some(model) => Some(cross_check(&model, opts.horizon, opts.k_span)?),
        None => None,
    };
    let distortion = match &cfg.system {
        System::Dissipative(s) if s.cells().is_some() => {
            let d = derived_distortion_h(s);
            Some(Distortion {
                k_min: check_bounded_distortion(s).k_min,
                declared_k: s.declared_k(),
                h: d.h,
                within_k_squared: d.within_k_squared,
            })
        }
        _ => None,
    };
    let doc = ClassifyDocument {
        tool: TOOL,
        version: VERSION,
        label: cfg.label.clone(),
        kind: cfg.system.kind(),
        p: cfg.system.p(),
        fingerprint: report.fingerprint.clone(),
        rates: report.rates.map(|(g_neg, g_pos)| Rates { g_neg, g_pos }),
        verdicts: Property::ALL
            .iter()
            .map(|p| (p.to_string(), report.get(*p).clone()))
            .collect(),
        audit: AuditResult {
            ok: violations.is_empty(),
            violations,
        },
        horizon,
        brute_force: matches!(cfg.system, System::Atomic(_)).then_some(BruteParams {
            horizon: BRUTE_HORIZON,
            samples: BRUTE_SAMPLES,
        }),
        distortion,
        seed: opts.seed,
    };
    let stdout = if opts.json {
        canonical::to_string(&doc)
    } else {
        verdict_table(&doc)
    };
    Ok(if doc.audit.ok {
        Outcome::ok(stdout)
    } else {
        Outcome {
            stdout,
            stderr: Some(format!(
                "implication audit failed: {}",
                doc.audit.violations.join("; ")
            )),
            code: EXIT_VIOLATION,
        }
    })
}

/// Parses `k=a`, `c:k=a` (component `c`) and `k@j=a` (cell `j`) terms
/// separated by commas; coefficients refer to the natural basis vectors.
pub fn parse_vector(spec: &str) -> Result<Vec<(Site, f64)>, CliError> {
    let bad = |term: &str, why: &str| CliError::Usage(format!("vector term `{term}`: {why}"));
    let mut out = Vec::new();
    for term in spec.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let (lhs, value) = term
            .split_once('=')
            .ok_or_else(|| bad(term, "expected `index=value`"))?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| bad(term, "coefficient is not a number"))?;
        if !value.is_finite() {
            return Err(bad(term, "coefficient is not finite"));
        }
        let (component, rest) = match lhs.split_once(':') {
            Some((c, rest)) => (
                c.trim()
                    .parse::<usize>()
                    .map_err(|_| bad(term, "component is not a non-negative integer"))?,
                rest,
            ),
            None => (0, lhs),
        };
        let (index, cell) = match rest.split_once('@') {
            Some((k, j)) => (
                k,
                j.trim()
                    .parse::<usize>()
                    .map_err(|_| bad(term, "cell is not a non-negative integer"))?,
            ),
            None => (rest, 0),
        };
        let index: i64 = index
            .trim()
            .parse()
            .map_err(|_| bad(term, "index is not an integer"))?;
        out.push((
            Site {
                component,
                index,
                cell,
            },
            value,
        ));
    }
    if out.is_empty() {
        return Err(CliError::Usage("vector spec has no terms".into()));
    }
    Ok(out)
}

pub struct SimulateOptions {
    pub vector: String,
    pub from: i64,
    pub to: i64,
    pub normalize: bool,
}

/// CSV of `‖T^n x‖` for `n` in `from..=to`.
pub fn simulate(cfg: &SystemConfig, opts: &SimulateOptions) -> Result<Outcome, CliError> {
    if opts.from > opts.to {
        return Err(CliError::Usage(format!(
            "empty range {}..={}",
            opts.from, opts.to
        )));
    }
    let op = operator(&cfg.system);
    let mut pairs = Vec::new();
    for (site, a) in parse_vector(&opts.vector)? {
        pairs.push((op.canonical(site)?, a));
    }
    let mut x = SparseVector::from_pairs(pairs);
    if x.is_empty() {
        return Err(CliError::Usage("vector is zero".into()));
    }
    if opts.normalize {
        x = x.scaled(1.0 / norm(&op, &x));
    }
    let norms = orbit_norms(&op, &x, opts.from..=opts.to)?;
    let mut s = String::from("n,norm\n");
    for (n, v) in (opts.from..=opts.to).zip(norms) {
        let _ = writeln!(s, "{n},{}", format_float(v));
    }
    Ok(Outcome::ok(s))
}

pub struct ShadowOptions {
    pub json: bool,
    pub delta: f64,
    pub length: usize,
    pub seed: u64,
}

impl Default for ShadowOptions {
    fn default() -> Self {
        Self {
            json: false,
            delta: 1e-3,
            length: 201,
            seed: 0,
        }
    }
}

#[derive(Debug, Serialize)]
struct SplittingSummary {
    stable: Option<Contraction>,
    unstable: Option<Contraction>,
    lines: Vec<LineSplit>,
}

#[derive(Debug, Serialize)]
struct ShadowDocument {
    tool: &'static str,
    version: &'static str,
    label: String,
    kind: Kind,
    p: f64,
    delta: f64,
    length: usize,
    seed: u64,
    epsilon: f64,
    truncation: f64,
    bound: f64,
    max_residual: f64,
    within_bound: bool,
    splitting: SplittingSummary,
}

/// Shadows a seeded δ-pseudotrajectory started at the unit vector on
/// `f^0(W)` (or the first atom).
pub fn shadow(cfg: &SystemConfig, opts: &ShadowOptions) -> Result<Outcome, CliError> {
    let op = operator(&cfg.system);
    let split = Splitting::for_operator(&op).map_err(|e| CliError::NoSplitting(e.to_string()))?;
    let origin = SparseVector::basis(op.canonical(Site::line(0))?);
    let x0 = origin.scaled(1.0 / norm(&op, &origin));
    let pt = make_pseudotrajectory(&op, &x0, opts.delta, opts.length, opts.seed)?;
    let r = shadow_orbit(&op, &pt, &split)?;
    let ok = r.within_bound() && r.max_residual <= ORBIT_RESIDUAL_TOLERANCE;
    let doc = ShadowDocument {
        tool: TOOL,
        version: VERSION,
        label: cfg.label.clone(),
        kind: cfg.system.kind(),
        p: cfg.system.p(),
        delta: opts.delta,
        length: opts.length,
        seed: opts.seed,
        epsilon: r.epsilon,
        truncation: r.truncation,
        bound: r.bound,
        max_residual: r.max_residual,
        within_bound: r.within_bound(),
        splitting: SplittingSummary {
            stable: split.stable,
            unstable: split.unstable,
            lines: split.lines.clone(),
        },
    };
    let stdout = if opts.json {
        canonical::to_string(&doc)
    } else {
        let mut s = String::new();
        let rows = [
            ("delta", format_float(doc.delta)),
            ("length", doc.length.to_string()),
            ("seed", doc.seed.to_string()),
            ("epsilon", format_float(doc.epsilon)),
            ("truncation", format_float(doc.truncation)),
            ("bound", format_float(doc.bound)),
            ("max_residual", format_float(doc.max_residual)),
            ("within_bound", if ok { "pass" } else { "fail" }.to_owned()),
        ];
        for (k, v) in rows {
            let _ = writeln!(s, "{k:<13} {v}");
        }
        s
    };
    Ok(Outcome {
        stdout,
        stderr: (!ok).then(|| "achieved epsilon exceeds the a-priori bound".to_owned()),
        code: if ok { EXIT_OK } else { EXIT_VIOLATION },
    })
}

/// The shift config of the induced weights `w_k = (μ_{k-1}/μ_k)^{1/p}`.
pub fn reduce(cfg: &SystemConfig) -> Result<Outcome, CliError> {
    let System::Dissipative(sys) = &cfg.system else {
        return Err(CliError::Usage(format!(
            "reduce expects a dissipative config, got kind {}",
            cfg.system.kind()
        )));
    };
    let w = induced_weights(sys);
    let out = ShiftConfig {
        kind: Kind::Shift,
        label: if cfg.label.is_empty() {
            "induced shift".to_owned()
        } else {
            format!("{} (induced shift)", cfg.label)
        },
        p: sys.p(),
        weights: RawPresentation::from(w.weights()),
    };
    let value = serde_json::to_value(&out).expect("config serializes");
    let mut s = serde_json::to_string_pretty(&value).expect("value serializes");
    s.push('\n');
    Ok(Outcome::ok(s))
}

pub struct AuditOptions {
    pub json: bool,
    pub count: usize,
    pub seed: u64,
    pub horizon: u64,
    pub k_span: u64,
    pub inject_violation: bool,
}

impl Default for AuditOptions {
    fn default() -> Self {
        Self {
            json: false,
            count: 200,
            seed: 0,
            horizon: 200,
            k_span: 500,
            inject_violation: false,
        }
    }
}

#[derive(Debug, Serialize)]
struct AuditDocument {
    tool: &'static str,
    version: &'static str,
    config: SweepConfig,
    label: Option<String>,
    clean: bool,
    summary: SweepSummary,
}

fn audit_single(
    cfg: &SystemConfig,
    sweep: &SweepConfig,
    hook: &mut impl FnMut(usize, &mut ClassificationReport),
) -> Result<SweepSummary, CliError> {
    let mut out = SweepSummary {
        systems: 1,
        ..Default::default()
    };
    match measure_model(&cfg.system)? {
        Some(model) if matches!(cfg.system, System::Dissipative(_)) => {
            audit_system(0, &model, sweep, &mut out, hook);
        }
        _ => {
            let mut report = report_for(&cfg.system, sweep.seed)?;
            for prop in Property::ALL {
                let counts = out.status_counts.entry(prop.to_string()).or_default();
                counts[status_slot(report.status(prop))] += 1;
            }
            hook(0, &mut report);
            out.violations
                .extend(implication_audit(&report).into_iter().map(|v| {
                    compdyn::audit::AuditFinding {
                        system: 0,
                        rule: v.rule,
                    }
                }));
        }
    }
    Ok(out)
}

fn status_slot(s: Status) -> usize {
    match s {
        Status::Holds => 0,
        Status::Fails => 1,
        Status::Undecided => 2,
    }
}

fn audit_text(doc: &AuditDocument) -> String {
    let sm = &doc.summary;
    let mut s = String::new();
    let rows = [
        ("systems", sm.systems.to_string()),
        ("seed", doc.config.seed.to_string()),
        ("compared", sm.compared.to_string()),
        ("skipped", sm.skipped.to_string()),
        (
            "horizon disagreements",
            sm.horizon_disagreements.len().to_string(),
        ),
        (
            "brute-force conflicts",
            sm.brute_force_conflicts.len().to_string(),
        ),
        ("violations", sm.violations.len().to_string()),
    ];
    for (k, v) in rows {
        let _ = writeln!(s, "{k:<22} {v}");
    }
    let _ = writeln!(s);
    let _ = writeln!(
        s,
        "{:<22} {:>6} {:>6} {:>9}",
        "property", "holds", "fails", "undecided"
    );
    for prop in Property::ALL {
        let c = sm
            .status_counts
            .get(&prop.to_string())
            .copied()
            .unwrap_or_default();
        let _ = writeln!(
            s,
            "{:<22} {:>6} {:>6} {:>9}",
            prop.to_string(),
            c[0],
            c[1],
            c[2]
        );
    }
    for d in sm
        .horizon_disagreements
        .iter()
        .chain(&sm.brute_force_conflicts)
    {
        let _ = writeln!(
            s,
            "system {}: {} exact {} vs {}",
            d.system,
            d.check,
            status_word(d.exact),
            status_word(d.other)
        );
    }
    for v in &sm.violations {
        let _ = writeln!(s, "system {}: violated {}", v.system, v.rule);
    }
    s
}

/// Seeded sweep over random systems, or a single audit of `config`.
pub fn audit(opts: &AuditOptions, config: Option<&SystemConfig>) -> Result<Outcome, CliError> {
    if opts.count == 0 {
        return Err(CliError::Usage("--count must be at least 1".into()));
    }
    let sweep = SweepConfig {
        count: opts.count,
        seed: opts.seed,
        n: opts.horizon,
        k_span: opts.k_span,
        ..Default::default()
    };
    let inject = opts.inject_violation;
    let mut hook = |id: usize, r: &mut ClassificationReport| {
        if inject && id == 0 {
            inject_violation(r);
        }
    };
    let summary = match config {
        Some(cfg) => audit_single(cfg, &sweep, &mut hook)?,
        None => run_sweep_with(&sweep, hook),
    };
    let doc = AuditDocument {
        tool: TOOL,
        version: VERSION,
        config: sweep,
        label: config.map(|c| c.label.clone()),
        clean: summary.clean(),
        summary,
    };
    let stdout = if opts.json {
        canonical::to_string(&doc)
    } else {
        audit_text(&doc)
    };
    Ok(if doc.clean {
        Outcome::ok(stdout)
    } else {
        Outcome {
            stdout,
            stderr: Some(format!(
                "audit failed: {} violation(s), {} disagreement(s), {} conflict(s)",
                doc.summary.violations.len(),
                doc.summary.horizon_disagreements.len(),
                doc.summary.brute_force_conflicts.len()
            )),
            code: EXIT_VIOLATION,
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vector_terms() {
        let v = parse_vector("0=1, 2:-3=0.5,4@1=-2").unwrap();
        assert_eq!(
            v,
            vec![
                (Site::line(0), 1.0),
                (Site::atom(2, -3), 0.5),
                (Site::cell(4, 1), -2.0)
            ]
        );
        for bad in ["", "0", "x=1", "0=abc", "-1:0=1", "0@x=1", "0=inf"] {
            assert!(parse_vector(bad).is_err(), "{bad}");
        }
    }
}
