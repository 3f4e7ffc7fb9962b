//! Operator models: dissipative composition systems of bounded distortion,
//! atomic composition systems, and bilateral weighted backward shifts.
//!
//! Measures along an orbit of the wandering set are presented by their
//! consecutive ratios `ρ_k = μ(f^{k+1}(W)) / μ(f^k(W))`, never as raw tables.
//! Cells `B_1..B_m` partition `W`; their images scale like `μ(f^k(W))` up to
//! a finite wobble table `θ_{k,j}` (θ = 1 outside the table).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seqcore::{EventuallyPeriodicSequence, SequenceError, SideRate};

/// Relative tolerance for partition sums.
pub const PARTITION_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SystemError {
    #[error(transparent)]
    Sequence(#[from] SequenceError),
    #[error("exponent p = {0} must be a finite real ≥ 1")]
    Exponent(f64),
    #[error("mu0 = {0} must be a positive finite real")]
    Mu0(f64),
    #[error("distortion constant K = {0} must be a finite real ≥ 1")]
    DistortionConstant(f64),
    #[error("cell partition: beta must be nonempty with positive entries")]
    Beta,
    #[error("cell partition: sum of beta = {sum} differs from mu0 = {mu0}")]
    BetaSum { sum: f64, mu0: f64 },
    #[error("cell partition: wobble row k = {k} has {len} entries, expected {cells}")]
    WobbleWidth { k: i64, len: usize, cells: usize },
    #[error("cell partition: wobble entry theta[{k}][{j}] = {value} is not positive")]
    WobbleValue { k: i64, j: usize, value: f64 },
    #[error("cell partition: cells at k = {k} sum to {sum}, expected mu_k = {expected}")]
    PartitionSum { k: i64, sum: f64, expected: f64 },
    #[error("atomic system must have at least one component")]
    NoComponents,
    #[error("cycle component {0} must have at least one atom with positive finite measure")]
    Cycle(usize),
    #[error("(◊) fails: least distortion constant {k_min} exceeds declared K = {declared}")]
    Distortion { k_min: f64, declared: f64 },
}

/// A point of the site set: `component` selects an atomic component (0 for
/// dissipative systems), `index` the position along the orbit, `cell` the
/// cell of `W` (0 when the system has no cells).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Site {
    pub component: usize,
    pub index: i64,
    pub cell: usize,
}

impl Site {
    pub fn line(index: i64) -> Self {
        Self {
            component: 0,
            index,
            cell: 0,
        }
    }

    pub fn cell(index: i64, cell: usize) -> Self {
        Self {
            component: 0,
            index,
            cell,
        }
    }

    pub fn atom(component: usize, index: i64) -> Self {
        Self {
            component,
            index,
            cell: 0,
        }
    }
}

/// `μ_k = μ(f^k(W))` given by `μ_0` and the ratio presentation.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureSequence {
    mu0: f64,
    ratio: EventuallyPeriodicSequence,
}

impl MeasureSequence {
    pub fn new(mu0: f64, ratio: EventuallyPeriodicSequence) -> Result<Self, SystemError> {
        if !(mu0.is_finite() && mu0 > 0.0) {
            return Err(SystemError::Mu0(mu0));
        }
        Ok(Self { mu0, ratio })
    }

    /// `μ_k = base^k` scaled so that `μ_0 = 1`, i.e. a constant ratio.
    pub fn geometric(base: f64) -> Result<Self, SystemError> {
        Self::new(1.0, EventuallyPeriodicSequence::constant(base)?)
    }

    /// `μ_k = neg^{k}` for `k ≤ 0` and `pos^k` for `k ≥ 0`, i.e. ratios
    /// `neg` on `k < 0` and `pos` on `k ≥ 0`.
    pub fn two_sided(neg: f64, pos: f64) -> Result<Self, SystemError> {
        Self::new(1.0, EventuallyPeriodicSequence::two_sided(neg, pos)?)
    }

    pub fn mu0(&self) -> f64 {
        self.mu0
    }

    pub fn ratio(&self) -> &EventuallyPeriodicSequence {
        &self.ratio
    }

    pub fn log_mu(&self, k: i64) -> f64 {
        self.mu0.ln() + self.ratio.cumulative_log(k)
    }

    pub fn mu(&self, k: i64) -> f64 {
        self.log_mu(k).exp()
    }

    /// `(g⁻, g⁺)`: per-step growth of `μ_k` on each tail.
    pub fn side_rates(&self) -> SideRate {
        self.ratio.side_rate()
    }
}

/// Free-function form of [`MeasureSequence::side_rates`].
pub fn side_rates(ms: &MeasureSequence) -> SideRate {
    ms.side_rates()
}

/// Partition of `W` into cells with a finite distortion table.
#[derive(Debug, Clone, PartialEq)]
pub struct Cells {
    beta: Vec<f64>,
    wobble: BTreeMap<i64, Vec<f64>>,
}

impl Cells {
    pub fn new(beta: Vec<f64>, wobble: BTreeMap<i64, Vec<f64>>) -> Result<Self, SystemError> {
        if beta.is_empty() || beta.iter().any(|b| !(b.is_finite() && *b > 0.0)) {
            return Err(SystemError::Beta);
        }
        for (&k, row) in &wobble {
            if row.len() != beta.len() {
                return Err(SystemError::WobbleWidth {
                    k,
                    len: row.len(),
                    cells: beta.len(),
                });
            }
            if let Some((j, &value)) = row
                .iter()
                .enumerate()
                .find(|(_, t)| !(t.is_finite() && **t > 0.0))
            {
                return Err(SystemError::WobbleValue { k, j, value });
            }
        }
        Ok(Self { beta, wobble })
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn wobble(&self) -> &BTreeMap<i64, Vec<f64>> {
        &self.wobble
    }

    pub fn len(&self) -> usize {
        self.beta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beta.is_empty()
    }

    pub fn theta(&self, k: i64, j: usize) -> f64 {
        self.wobble.get(&k).map_or(1.0, |row| row[j])
    }

    /// `[lo, hi]` of the tabulated rows, if any.
    pub fn window(&self) -> Option<(i64, i64)> {
        let lo = *self.wobble.keys().next()?;
        let hi = *self.wobble.keys().next_back()?;
        Some((lo, hi))
    }
}

/// A dissipative composition system of bounded distortion generated by `W`.
#[derive(Debug, Clone, PartialEq)]
pub struct DissipativeSystem {
    p: f64,
    measures: MeasureSequence,
    cells: Option<Cells>,
    k_declared: f64,
}

fn check_p(p: f64) -> Result<(), SystemError> {
    if p.is_finite() && p >= 1.0 {
        Ok(())
    } else {
        Err(SystemError::Exponent(p))
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= PARTITION_TOLERANCE * a.abs().max(b.abs())
}

impl DissipativeSystem {
    /// A system without cells (`W` a single atom of the partition).
    pub fn new(p: f64, measures: MeasureSequence) -> Result<Self, SystemError> {
        check_p(p)?;
        Ok(Self {
            p,
            measures,
            cells: None,
            k_declared: 1.0,
        })
    }

    /// Validates the partition sums; the declared `k` is checked separately
    /// by [`check_bounded_distortion`].
    pub fn with_cells(
        p: f64,
        measures: MeasureSequence,
        cells: Cells,
        k_declared: f64,
    ) -> Result<Self, SystemError> {
        check_p(p)?;
        if !(k_declared.is_finite() && k_declared >= 1.0) {
            return Err(SystemError::DistortionConstant(k_declared));
        }
        let mu0 = measures.mu0();
        let sum: f64 = cells.beta.iter().sum();
        if !close(sum, mu0) {
            return Err(SystemError::BetaSum { sum, mu0 });
        }
        for (&k, row) in &cells.wobble {
            let sum: f64 = cells.beta.iter().zip(row).map(|(b, t)| b * t).sum();
            if !close(sum, mu0) {
                return Err(SystemError::PartitionSum {
                    k,
                    sum: sum / mu0 * measures.mu(k),
                    expected: measures.mu(k),
                });
            }
        }
        Ok(Self {
            p,
            measures,
            cells: Some(cells),
            k_declared,
        })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn measures(&self) -> &MeasureSequence {
        &self.measures
    }

    pub fn cells(&self) -> Option<&Cells> {
        self.cells.as_ref()
    }

    pub fn declared_k(&self) -> f64 {
        self.k_declared
    }

    pub fn cell_count(&self) -> usize {
        self.cells.as_ref().map_or(1, Cells::len)
    }

    pub fn side_rates(&self) -> SideRate {
        self.measures.side_rates()
    }

    /// `μ(f^k(B_j)) = μ_k · (β_j / μ_0) · θ_{k,j}`.
    pub fn cell_measure(&self, k: i64, j: usize) -> f64 {
        self.log_cell_measure(k, j).exp()
    }

    pub fn log_cell_measure(&self, k: i64, j: usize) -> f64 {
        let log_mu = self.measures.log_mu(k);
        match &self.cells {
            None => log_mu,
            Some(c) => log_mu + (c.beta[j] / self.measures.mu0() * c.theta(k, j)).ln(),
        }
    }

    /// Per-step growth `μ(f^{k+1}(B_j)) / μ(f^k(B_j))` of cell `j`'s orbit.
    pub fn cell_growth(&self, j: usize) -> EventuallyPeriodicSequence {
        let ratio = self.measures.ratio();
        let Some((lo, hi)) = self.cells.as_ref().and_then(Cells::window) else {
            return ratio.clone();
        };
        let cells = self.cells.as_ref().expect("window implies cells");
        let mut growth = ratio.expanded(lo - 1, hi);
        for k in lo - 1..=hi {
            growth.scale_core(k, cells.theta(k + 1, j) / cells.theta(k, j));
        }
        growth
    }

    pub fn site_measure(&self, site: Site) -> f64 {
        self.cell_measure(site.index, site.cell)
    }

    pub fn log_site_measure(&self, site: Site) -> f64 {
        self.log_cell_measure(site.index, site.cell)
    }
}

/// One component of an atomic system.
#[derive(Debug, Clone, PartialEq)]
pub enum Component {
    /// Atoms `a_0..a_{r-1}` with `f(a_i) = a_{i+1 mod r}`.
    Cycle(Vec<f64>),
    /// A two-sided orbit `f(site_k) = site_{k+1}` with atom measures `μ_k`.
    Line(MeasureSequence),
}

/// A disjoint union of finitely many cycles and ℤ-lines of atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomicSystem {
    p: f64,
    components: Vec<Component>,
}

impl AtomicSystem {
    pub fn new(p: f64, components: Vec<Component>) -> Result<Self, SystemError> {
        check_p(p)?;
        if components.is_empty() {
            return Err(SystemError::NoComponents);
        }
        for (i, c) in components.iter().enumerate() {
            if let Component::Cycle(m) = c {
                if m.is_empty() || m.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                    return Err(SystemError::Cycle(i));
                }
            }
        }
        Ok(Self { p, components })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn has_cycle(&self) -> bool {
        self.components
            .iter()
            .any(|c| matches!(c, Component::Cycle(_)))
    }

    pub fn site_measure(&self, site: Site) -> f64 {
        self.log_site_measure(site).exp()
    }

    pub fn log_site_measure(&self, site: Site) -> f64 {
        match &self.components[site.component] {
            Component::Cycle(m) => m[site.index.rem_euclid(m.len() as i64) as usize].ln(),
            Component::Line(ms) => ms.log_mu(site.index),
        }
    }
}

/// Weights of an invertible bilateral backward shift `B_w`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSequence {
    weights: EventuallyPeriodicSequence,
}

impl WeightSequence {
    /// Positivity of the presentation already forces `sup w < ∞` and
    /// `inf w > 0`.
    pub fn new(weights: EventuallyPeriodicSequence) -> Self {
        Self { weights }
    }

    pub fn constant(w: f64) -> Result<Self, SystemError> {
        Ok(Self::new(EventuallyPeriodicSequence::constant(w)?))
    }

    /// `w_k = neg` for `k ≤ 0` and `pos` for `k > 0`.
    pub fn split(neg: f64, pos: f64) -> Result<Self, SystemError> {
        Ok(Self::new(EventuallyPeriodicSequence::new(
            0,
            vec![neg],
            vec![neg],
            vec![pos],
        )?))
    }

    pub fn weights(&self) -> &EventuallyPeriodicSequence {
        &self.weights
    }

    pub fn weight(&self, k: i64) -> f64 {
        self.weights.eval(k)
    }

    /// The dissipative system (no cells, `μ_0 = 1`) whose composition
    /// operator is isometrically conjugate to this shift: `ρ_k = w_{k+1}^{-p}`.
    pub fn dissipative_model(&self, p: f64) -> Result<DissipativeSystem, SystemError> {
        let ratio = self.weights.shifted(1).powf(-p);
        DissipativeSystem::new(p, MeasureSequence::new(1.0, ratio)?)
    }
}

/// Least constant of the non-singularity condition `μ(f⁻¹(B)) ≤ c μ(B)`,
/// with the matching constant for `f` itself.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StarReport {
    /// `sup μ(f⁻¹(s)) / μ(s)`.
    pub c: f64,
    /// `‖T_f‖ ≤ c^{1/p}`.
    pub norm_bound: f64,
    /// `sup μ(f(s)) / μ(s)`, bounding `‖T_f⁻¹‖^p`.
    pub c_inverse: f64,
    pub inverse_norm_bound: f64,
}

fn star_from_growth(
    growths: &[EventuallyPeriodicSequence],
    cycle_pairs: &[f64],
    p: f64,
) -> Result<StarReport, SystemError> {
    // growth g_k = μ(site_{k+1}) / μ(site_k); μ(f⁻¹(site_k)) / μ(site_k) = 1 / g_{k-1}
    let mut c: f64 = 0.0;
    let mut c_inv: f64 = 0.0;
    for g in growths {
        let (lo, hi) = g.bounds();
        c = c.max(1.0 / lo);
        c_inv = c_inv.max(hi);
    }
    for &r in cycle_pairs {
        c = c.max(r);
        c_inv = c_inv.max(1.0 / r);
    }
    debug_assert!(c.is_finite() && c_inv.is_finite());
    Ok(StarReport {
        c,
        norm_bound: c.powf(1.0 / p),
        c_inverse: c_inv,
        inverse_norm_bound: c_inv.powf(1.0 / p),
    })
}

pub fn check_star_dissipative(sys: &DissipativeSystem) -> Result<StarReport, SystemError> {
    let growths: Vec<_> = (0..sys.cell_count()).map(|j| sys.cell_growth(j)).collect();
    star_from_growth(&growths, &[], sys.p())
}

pub fn check_star_atomic(sys: &AtomicSystem) -> Result<StarReport, SystemError> {
    let mut growths = Vec::new();
    let mut pairs = Vec::new();
    for c in sys.components() {
        match c {
            Component::Line(ms) => growths.push(ms.ratio().clone()),
            Component::Cycle(m) => {
                let r = m.len();
                // f⁻¹(a_i) = a_{i-1}
                pairs.extend((0..r).map(|i| m[(i + r - 1) % r] / m[i]));
            }
        }
    }
    star_from_growth(&growths, &pairs, sys.p())
}

/// Least `K` satisfying (◊) over all cells and tabulated `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistortionReport {
    pub ok: bool,
    pub k_min: f64,
    /// `(k, cell)` attaining `k_min`; `None` when the system is exactly
    /// proportional.
    pub witness: Option<(i64, usize)>,
}

/// For a union of cells the ratio in (◊) is a `β`-weighted mean of the
/// per-cell ratios `θ_{k,j}`, so single cells attain the extremes.
pub fn check_bounded_distortion(sys: &DissipativeSystem) -> DistortionReport {
    let mut k_min = 1.0;
    let mut witness = None;
    if let Some(cells) = sys.cells() {
        for (&k, row) in cells.wobble() {
            for (j, &theta) in row.iter().enumerate() {
                let dev = theta.max(1.0 / theta);
                if dev > k_min {
                    k_min = dev;
                    witness = Some((k, j));
                }
            }
        }
    }
    DistortionReport {
        ok: k_min <= sys.declared_k() * (1.0 + PARTITION_TOLERANCE),
        k_min,
        witness,
    }
}

/// Least `H` in (◊◊) and whether it obeys `H ≤ K_min²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedDistortion {
    pub h: f64,
    pub k_min: f64,
    pub within_k_squared: bool,
}

/// For a union of cells `μ(f^{t+s}(B)) / μ(f^s(B))` divided by the `W` ratio
/// is a mediant of the per-cell quotients `θ_{t+s,j} / θ_{s,j}`, so single
/// cells attain the extremes. Rows outside the table are all ones.
pub fn derived_distortion_h(sys: &DissipativeSystem) -> DerivedDistortion {
    let k_min = check_bounded_distortion(sys).k_min;
    let mut h: f64 = 1.0;
    if let Some(cells) = sys.cells() {
        for j in 0..cells.len() {
            let column = cells
                .wobble()
                .values()
                .map(|row| row[j])
                .chain(std::iter::once(1.0));
            let (lo, hi) = column.fold((f64::INFINITY, 0.0_f64), |(lo, hi), t| {
                (lo.min(t), hi.max(t))
            });
            h = h.max(hi / lo);
        }
    }
    DerivedDistortion {
        h,
        k_min,
        within_k_squared: h <= k_min * k_min * (1.0 + PARTITION_TOLERANCE),
    }
}

/// Weights `w_k = (μ_{k-1} / μ_k)^{1/p} = ρ_{k-1}^{-1/p}` of the shift the
/// system reduces to.
pub fn induced_weights(sys: &DissipativeSystem) -> WeightSequence {
    let w = sys.measures().ratio().shifted(-1).powf(-1.0 / sys.p());
    WeightSequence::new(w)
}

/// An orbit of `f` on the site set, with its per-step measure growth.
#[derive(Debug, Clone, PartialEq)]
pub enum Orbit {
    Line {
        component: usize,
        cell: usize,
        /// `μ(site_{k+1}) / μ(site_k)`
        growth: EventuallyPeriodicSequence,
    },
    Cycle {
        component: usize,
        measures: Vec<f64>,
    },
}

impl DissipativeSystem {
    pub fn orbits(&self) -> Vec<Orbit> {
        (0..self.cell_count())
            .map(|cell| Orbit::Line {
                component: 0,
                cell,
                growth: self.cell_growth(cell),
            })
            .collect()
    }
}

impl AtomicSystem {
    pub fn orbits(&self) -> Vec<Orbit> {
        self.components
            .iter()
            .enumerate()
            .map(|(component, c)| match c {
                Component::Line(ms) => Orbit::Line {
                    component,
                    cell: 0,
                    growth: ms.ratio().clone(),
                },
                Component::Cycle(m) => Orbit::Cycle {
                    component,
                    measures: m.clone(),
                },
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn halving() -> MeasureSequence {
        MeasureSequence::geometric(0.5).unwrap()
    }

    #[test]
    fn measures_follow_ratios() {
        let ms = halving();
        assert_relative_eq!(ms.mu(3), 0.125, max_relative = 1e-12);
        assert_relative_eq!(ms.mu(-4), 16.0, max_relative = 1e-12);
        let valley = MeasureSequence::two_sided(0.5, 2.0).unwrap();
        for k in -20..20 {
            assert_relative_eq!(
                valley.mu(k),
                2f64.powi(k.abs() as i32),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn star_constant_examples() {
        // direct ratio scan over |k| ≤ 100 gives sup μ_{k-1}/μ_k = 2
        let sys = DissipativeSystem::new(1.0, halving()).unwrap();
        let scan = (-100..=100)
            .map(|k| sys.measures().mu(k - 1) / sys.measures().mu(k))
            .fold(0.0_f64, f64::max);
        let star = check_star_dissipative(&sys).unwrap();
        assert_relative_eq!(star.c, scan, max_relative = 1e-12);
        assert_relative_eq!(star.c, 2.0, max_relative = 1e-12);

        let flat = DissipativeSystem::new(2.0, MeasureSequence::geometric(1.0).unwrap()).unwrap();
        assert_eq!(check_star_dissipative(&flat).unwrap().c, 1.0);

        let cyc = AtomicSystem::new(1.0, vec![Component::Cycle(vec![1.0, 2.0, 3.0])]).unwrap();
        let star = check_star_atomic(&cyc).unwrap();
        assert_relative_eq!(star.c, 3.0);
        assert_relative_eq!(star.c_inverse, 2.0);
    }

    fn two_cell_system(k_declared: f64) -> DissipativeSystem {
        // θ_{0,0} = 2 forces θ_{0,1} = (1 - 0.25·2) / 0.75 = 2/3
        let cells = Cells::new(
            vec![0.25, 0.75],
            BTreeMap::from([(0, vec![2.0, 2.0 / 3.0])]),
        )
        .unwrap();
        DissipativeSystem::with_cells(1.0, halving(), cells, k_declared).unwrap()
    }

    #[test]
    fn bounded_distortion_examples() {
        let plain = DissipativeSystem::new(1.0, halving()).unwrap();
        let r = check_bounded_distortion(&plain);
        assert_eq!((r.ok, r.k_min, r.witness), (true, 1.0, None));

        let r = check_bounded_distortion(&two_cell_system(2.0));
        assert!(r.ok);
        assert_relative_eq!(r.k_min, 2.0);
        assert_eq!(r.witness, Some((0, 0)));

        let r = check_bounded_distortion(&two_cell_system(1.5));
        assert!(!r.ok);
    }

    #[test]
    fn derived_distortion_examples() {
        let plain = DissipativeSystem::new(1.0, halving()).unwrap();
        assert_eq!(derived_distortion_h(&plain).h, 1.0);
        let d = derived_distortion_h(&two_cell_system(2.0));
        assert!(d.h <= 4.0 && d.within_k_squared);
        assert_relative_eq!(d.h, 2.0);
        let single = Cells::new(vec![1.0], BTreeMap::new()).unwrap();
        let sys = DissipativeSystem::with_cells(1.0, halving(), single, 1.0).unwrap();
        assert_eq!(derived_distortion_h(&sys).h, 1.0);
    }

    #[test]
    fn partition_violations_are_rejected() {
        let bad_beta = Cells::new(vec![0.5, 0.6], BTreeMap::new()).unwrap();
        assert!(matches!(
            DissipativeSystem::with_cells(1.0, halving(), bad_beta, 1.0),
            Err(SystemError::BetaSum { .. })
        ));
        let bad_row = Cells::new(vec![0.5, 0.5], BTreeMap::from([(3, vec![2.0, 0.5])])).unwrap();
        assert!(matches!(
            DissipativeSystem::with_cells(1.0, halving(), bad_row, 2.0),
            Err(SystemError::PartitionSum { k: 3, .. })
        ));
        assert!(Cells::new(vec![0.5, 0.5], BTreeMap::from([(0, vec![2.0])])).is_err());
        assert!(matches!(
            DissipativeSystem::new(0.5, halving()),
            Err(SystemError::Exponent(_))
        ));
        assert!(AtomicSystem::new(1.0, vec![]).is_err());
    }

    #[test]
    fn induced_weight_examples() {
        let w = induced_weights(&DissipativeSystem::new(1.0, halving()).unwrap());
        assert_relative_eq!(w.weight(5), 2.0, max_relative = 1e-12);
        let w = induced_weights(
            &DissipativeSystem::new(3.0, MeasureSequence::geometric(1.0).unwrap()).unwrap(),
        );
        assert_eq!(w.weight(-9), 1.0);
        let w = induced_weights(&DissipativeSystem::new(2.0, halving()).unwrap());
        assert_relative_eq!(w.weight(0), 2f64.sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn side_rate_examples() {
        let r = side_rates(&MeasureSequence::two_sided(0.5, 2.0).unwrap());
        assert_eq!((r.gm_neg, r.gm_pos), (0.5, 2.0));
        let r = side_rates(&MeasureSequence::geometric(1.0).unwrap());
        assert_eq!((r.gm_neg, r.gm_pos), (1.0, 1.0));
        let r = side_rates(&MeasureSequence::two_sided(2.0, 0.5).unwrap());
        assert_eq!((r.gm_neg, r.gm_pos), (2.0, 0.5));
    }

    #[test]
    fn cell_growth_tracks_wobble() {
        let sys = two_cell_system(2.0);
        for j in 0..2 {
            let g = sys.cell_growth(j);
            for k in -6..6 {
                let direct = sys.cell_measure(k + 1, j) / sys.cell_measure(k, j);
                assert_relative_eq!(g.eval(k), direct, max_relative = 1e-12);
            }
        }
        let star = check_star_dissipative(&sys).unwrap();
        // μ(f⁻¹(f^1 B_j)) / μ(f^1 B_j) = μ_0 θ_{0,0} / μ_1 = 4
        assert_relative_eq!(star.c, 4.0, max_relative = 1e-12);
    }

    fn arb_measures() -> impl Strategy<Value = MeasureSequence> {
        let entries = |len| {
            prop::collection::vec(-2.0f64..2.0, len)
                .prop_map(|v| v.into_iter().map(f64::exp).collect::<Vec<_>>())
        };
        (
            -3i64..3,
            entries(1..4),
            entries(1..5),
            entries(1..5),
            -1.0f64..1.0,
        )
            .prop_map(|(lo, core, neg, pos, l0)| {
                MeasureSequence::new(
                    l0.exp(),
                    EventuallyPeriodicSequence::new(lo, core, neg, pos).unwrap(),
                )
                .unwrap()
            })
    }

    proptest! {
        #[test]
        fn reconstruction_is_consistent(ms in arb_measures(), k in -1000i64..1000) {
            // log space: μ_k itself under/overflows f64 at |k| ~ 10³
            let step = ms.log_mu(k + 1) - ms.log_mu(k);
            prop_assert!((step - ms.ratio().log_eval(k)).abs() < 1e-9);
        }

        #[test]
        fn induced_weights_round_trip(ms in arb_measures(), p in 1.0f64..4.0, k in -1000i64..1000) {
            let sys = DissipativeSystem::new(p, ms).unwrap();
            let w = induced_weights(&sys).weight(k);
            let direct = (sys.measures().log_mu(k - 1) - sys.measures().log_mu(k)).exp();
            prop_assert!((w.powf(p) / direct - 1.0).abs() < 1e-12 * 10.0);
        }

        #[test]
        fn shift_model_inverts_induced_weights(ms in arb_measures(), p in 1.0f64..4.0, k in -50i64..50) {
            let sys = DissipativeSystem::new(p, ms).unwrap();
            let w = induced_weights(&sys);
            let back = w.dissipative_model(p).unwrap();
            let a = back.measures().ratio().eval(k);
            let b = sys.measures().ratio().eval(k);
            prop_assert!((a / b - 1.0).abs() < 1e-12);
        }

        #[test]
        fn h_bounded_by_k_squared(t0 in 0.2f64..0.8, t1 in 0.2f64..0.8, k0 in -4i64..4) {
            // two cells of mass 1/2 each; choose θ for cell 0 and solve for cell 1
            let beta = vec![0.5, 0.5];
            let row = |t: f64| vec![2.0 * t, 2.0 * (1.0 - t)];
            let cells = Cells::new(beta, BTreeMap::from([(k0, row(t0)), (k0 + 1, row(t1))])).unwrap();
            let sys = DissipativeSystem::with_cells(1.0, MeasureSequence::geometric(0.7).unwrap(), cells, 10.0).unwrap();
            let d = derived_distortion_h(&sys);
            prop_assert!(d.h <= d.k_min * d.k_min * (1.0 + 1e-12));
            for k in k0 - 1..=k0 + 2 {
                let total: f64 = (0..2).map(|j| sys.cell_measure(k, j)).sum();
                prop_assert!((total / sys.measures().mu(k) - 1.0).abs() < 1e-12);
            }
        }
    }
}
