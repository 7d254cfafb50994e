//! Population parameters, their validation, the exact joint distribution of
//! (X, Z1, Z2, Y) and the admissible ranges of the conditional covariances.
//!
//! Dependence is allowed only between the index test X and the first
//! reference Z1, through `xi = cov(X, Z1 | Y = 1)` and
//! `eps = cov(X, Z1 | Y = 0)`. Z2 is conditionally independent of both.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance for probability comparisons.
pub const PROB_TOL: f64 = 1e-12;

/// The nine scalars that define a population.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationSpec {
    pub se_x: f64,
    pub sp_x: f64,
    pub se_z1: f64,
    pub sp_z1: f64,
    pub se_z2: f64,
    pub sp_z2: f64,
    pub eta: f64,
    /// cov(X, Z1 | Y = 1)
    #[serde(default)]
    pub xi: f64,
    /// cov(X, Z1 | Y = 0)
    #[serde(default)]
    pub eps: f64,
}

/// One of the three tests in the setup.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Test {
    X,
    Z1,
    Z2,
}

impl PopulationSpec {
    /// The reference setting: an index test with
    /// Se = Sp = 0.90, two references with Se = 0.60 and Sp = 0.95, and a
    /// prevalence of 0.10, under conditional independence.
    pub fn baseline() -> Self {
        PopulationSpec {
            se_x: 0.9,
            sp_x: 0.9,
            se_z1: 0.6,
            sp_z1: 0.95,
            se_z2: 0.6,
            sp_z2: 0.95,
            eta: 0.1,
            xi: 0.0,
            eps: 0.0,
        }
    }

    pub fn with_covariances(mut self, xi: f64, eps: f64) -> Self {
        self.xi = xi;
        self.eps = eps;
        self
    }

    /// Same accuracies and prevalence, conditionally independent tests.
    pub fn hci(self) -> Self {
        self.with_covariances(0.0, 0.0)
    }

    pub fn is_hci(&self) -> bool {
        self.xi == 0.0 && self.eps == 0.0
    }

    pub fn sensitivity(&self, test: Test) -> f64 {
        match test {
            Test::X => self.se_x,
            Test::Z1 => self.se_z1,
            Test::Z2 => self.se_z2,
        }
    }

    pub fn specificity(&self, test: Test) -> f64 {
        match test {
            Test::X => self.sp_x,
            Test::Z1 => self.sp_z1,
            Test::Z2 => self.sp_z2,
        }
    }

    /// P(test = 1 | Y = y).
    pub fn positive_rate(&self, test: Test, diseased: bool) -> f64 {
        if diseased {
            self.sensitivity(test)
        } else {
            1.0 - self.specificity(test)
        }
    }

    /// P(test = outcome | Y = y).
    pub fn outcome_rate(&self, test: Test, outcome: bool, diseased: bool) -> f64 {
        let p = self.positive_rate(test, diseased);
        if outcome {
            p
        } else {
            1.0 - p
        }
    }

    /// P(Y = y).
    pub fn class_weight(&self, diseased: bool) -> f64 {
        if diseased {
            self.eta
        } else {
            1.0 - self.eta
        }
    }

    /// cov(X, Z1 | Y = y).
    pub fn class_covariance(&self, diseased: bool) -> f64 {
        if diseased {
            self.xi
        } else {
            self.eps
        }
    }

    /// The prevalence-weighted covariance `eta * xi + (1 - eta) * eps`, which
    /// is the shift of P(X = 1, Z1 = 1) away from its independent value.
    pub fn weighted_covariance(&self) -> f64 {
        self.eta * self.xi + (1.0 - self.eta) * self.eps
    }

    fn fields(&self) -> [(&'static str, f64); 9] {
        [
            ("se_x", self.se_x),
            ("sp_x", self.sp_x),
            ("se_z1", self.se_z1),
            ("sp_z1", self.sp_z1),
            ("se_z2", self.se_z2),
            ("sp_z2", self.sp_z2),
            ("eta", self.eta),
            ("xi", self.xi),
            ("eps", self.eps),
        ]
    }
}

/// Youden index `se + sp - 1`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct YoudenIndex(f64);

impl YoudenIndex {
    pub fn value(self) -> f64 {
        self.0
    }

    /// A test is informative when its index is strictly positive.
    pub fn is_informative(self) -> bool {
        self.0 > 0.0
    }
}

pub fn youden(se: f64, sp: f64) -> YoudenIndex {
    YoudenIndex(se + sp - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    NotFinite,
    OutOfRange,
    UninformativeIndexTest,
    BelowCovarianceBound,
    AboveCovarianceBound,
}

impl ViolationKind {
    pub fn is_covariance_bound(self) -> bool {
        matches!(
            self,
            ViolationKind::BelowCovarianceBound | ViolationKind::AboveCovarianceBound
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    pub kind: ViolationKind,
    pub message: String,
    /// The violated bound, when there is a numeric one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    /// True when the report is non-empty and every violation is a covariance
    /// bound, i.e. the spec is well formed but outside the admissible region.
    pub fn is_bounds_only(&self) -> bool {
        !self.is_empty() && self.violations.iter().all(|v| v.kind.is_covariance_bound())
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidSpec(self))
        }
    }

    fn push(&mut self, field: &str, kind: ViolationKind, message: String, bound: Option<f64>) {
        self.violations.push(Violation {
            field: field.to_string(),
            kind,
            message,
            bound,
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let messages: Vec<&str> = self.violations.iter().map(|v| v.message.as_str()).collect();
        f.write_str(&messages.join("; "))
    }
}

/// Short decimal rendering of a bound for messages (full precision is kept
/// in `Violation::bound`).
fn short(v: f64) -> String {
    let s = format!("{:.10}", v);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

fn check_ranges(spec: &PopulationSpec, report: &mut ValidationReport) {
    for (name, value) in spec.fields() {
        if !value.is_finite() {
            report.push(
                name,
                ViolationKind::NotFinite,
                format!("{name} is not finite"),
                None,
            );
        }
    }
    for (name, value) in spec.fields().into_iter().take(6) {
        if value.is_finite() && !(0.0..=1.0).contains(&value) {
            report.push(
                name,
                ViolationKind::OutOfRange,
                format!("{name} = {value} outside [0, 1]"),
                None,
            );
        }
    }
    if spec.eta.is_finite() && !(spec.eta > 0.0 && spec.eta < 1.0) {
        report.push(
            "eta",
            ViolationKind::OutOfRange,
            format!("eta = {} outside (0, 1)", spec.eta),
            None,
        );
    }
}

/// Check every population invariant. Never fails; an empty report means valid.
pub fn validate(spec: &PopulationSpec) -> ValidationReport {
    let mut report = ValidationReport::default();
    check_ranges(spec, &mut report);
    if !report.is_empty() {
        return report;
    }

    let j = youden(spec.se_x, spec.sp_x);
    if !j.is_informative() {
        report.push(
            "se_x",
            ViolationKind::UninformativeIndexTest,
            format!("J_X ≤ 0 (se_x + sp_x - 1 = {})", short(j.value())),
            None,
        );
    }

    let (xi_lo, xi_hi) = xi_box(spec);
    let (eps_lo, eps_hi) = eps_box(spec);
    for (name, value, lo, hi) in [
        ("xi", spec.xi, xi_lo, xi_hi),
        ("eps", spec.eps, eps_lo, eps_hi),
    ] {
        if value < lo - PROB_TOL {
            report.push(
                name,
                ViolationKind::BelowCovarianceBound,
                format!("{name} below lower bound {}", short(lo)),
                Some(lo),
            );
        } else if value > hi + PROB_TOL {
            report.push(
                name,
                ViolationKind::AboveCovarianceBound,
                format!("{name} above upper bound {}", short(hi)),
                Some(hi),
            );
        }
    }
    report
}

/// Outcome of one subject on (X, Z1, Z2, Y).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Outcome {
    pub x: bool,
    pub z1: bool,
    pub z2: bool,
    pub y: bool,
}

impl Outcome {
    fn index(self) -> usize {
        (self.x as usize) << 3 | (self.z1 as usize) << 2 | (self.z2 as usize) << 1 | self.y as usize
    }

    fn from_index(i: usize) -> Self {
        Outcome {
            x: i & 8 != 0,
            z1: i & 4 != 0,
            z2: i & 2 != 0,
            y: i & 1 != 0,
        }
    }

    /// All sixteen outcomes in a fixed order.
    pub fn all() -> impl Iterator<Item = Outcome> {
        (0..16).map(Outcome::from_index)
    }
}

/// Exact 16-cell table of P(X = x, Z1 = z1, Z2 = z2, Y = y).
#[derive(Debug, Clone, PartialEq)]
pub struct JointDistribution {
    cells: [f64; 16],
}

impl JointDistribution {
    /// Build the table without validating the spec. Cells can be negative
    /// when the covariances are outside the admissible box.
    pub fn from_spec_unchecked(spec: &PopulationSpec) -> Self {
        let mut cells = [0.0; 16];
        for outcome in Outcome::all() {
            let y = outcome.y;
            let pz2 = spec.outcome_rate(Test::Z2, outcome.z2, y);
            let independent = spec.outcome_rate(Test::X, outcome.x, y)
                * spec.outcome_rate(Test::Z1, outcome.z1, y);
            let sign = if outcome.x == outcome.z1 { 1.0 } else { -1.0 };
            let conditional = (independent + sign * spec.class_covariance(y)) * pz2;
            cells[outcome.index()] = spec.class_weight(y) * conditional;
        }
        JointDistribution { cells }
    }

    pub fn cell(&self, outcome: Outcome) -> f64 {
        self.cells[outcome.index()]
    }

    pub fn iter(&self) -> impl Iterator<Item = (Outcome, f64)> + '_ {
        Outcome::all().map(move |o| (o, self.cell(o)))
    }

    /// Probability of the event selected by `event`.
    pub fn probability(&self, event: impl Fn(Outcome) -> bool) -> f64 {
        self.iter().filter(|(o, _)| event(*o)).map(|(_, p)| p).sum()
    }

    pub fn total(&self) -> f64 {
        self.cells.iter().sum()
    }

    pub fn min_cell(&self) -> f64 {
        self.cells.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

pub fn joint_distribution(spec: &PopulationSpec) -> Result<JointDistribution> {
    validate(spec).into_result()?;
    Ok(JointDistribution::from_spec_unchecked(spec))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundsContext {
    /// Every joint cell in [0, 1].
    BasicJoint,
    /// Additionally keep the HCI latent class radicands non-negative on a
    /// dependent population.
    LcmHci,
    /// Additionally keep the dependence-model radicands non-negative on an
    /// HCI population.
    LcmHciBar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sense {
    AtLeast,
    AtMost,
}

/// `xi_coef * xi + eps_coef * eps (>= | <=) rhs`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HalfPlane {
    pub xi_coef: f64,
    pub eps_coef: f64,
    pub rhs: f64,
    pub sense: Sense,
}

impl HalfPlane {
    pub fn contains(&self, xi: f64, eps: f64) -> bool {
        let lhs = self.xi_coef * xi + self.eps_coef * eps;
        match self.sense {
            Sense::AtLeast => lhs >= self.rhs - PROB_TOL,
            Sense::AtMost => lhs <= self.rhs + PROB_TOL,
        }
    }
}

/// Admissible intervals for xi and eps. For the latent class contexts each
/// interval is the slice of the joint region with the other covariance at 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovarianceBounds {
    pub xi_lo: f64,
    pub xi_hi: f64,
    pub eps_lo: f64,
    pub eps_hi: f64,
    pub context: BoundsContext,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub half_plane: Option<HalfPlane>,
}

impl CovarianceBounds {
    pub fn contains_xi(&self, xi: f64) -> bool {
        xi >= self.xi_lo - PROB_TOL && xi <= self.xi_hi + PROB_TOL
    }

    pub fn contains_eps(&self, eps: f64) -> bool {
        eps >= self.eps_lo - PROB_TOL && eps <= self.eps_hi + PROB_TOL
    }
}

fn xi_box(spec: &PopulationSpec) -> (f64, f64) {
    let (a, b) = (spec.se_x, spec.se_z1);
    let lo = (-a * b).max(-(1.0 - a) * (1.0 - b));
    let hi = a.min(b) - a * b;
    (lo, hi)
}

fn eps_box(spec: &PopulationSpec) -> (f64, f64) {
    let (a, b) = (spec.sp_x, spec.sp_z1);
    let lo = (-a * b).max(-(1.0 - a) * (1.0 - b));
    let hi = a.min(b) - a * b;
    (lo, hi)
}

/// The latent class half-plane for `context`, or `None` for `BasicJoint`.
///
/// Both constraints share the quantity
/// `eta (1 - eta) (1 - se_x - sp_x)(1 - se_z1 - sp_z1)`, which is the
/// covariance of X and Z1 implied by independent tests.
pub fn lcm_half_plane(spec: &PopulationSpec, context: BoundsContext) -> Option<HalfPlane> {
    let independent_cov = spec.eta
        * (1.0 - spec.eta)
        * (1.0 - spec.se_x - spec.sp_x)
        * (1.0 - spec.se_z1 - spec.sp_z1);
    let (rhs, sense) = match context {
        BoundsContext::BasicJoint => return None,
        BoundsContext::LcmHci => (-independent_cov, Sense::AtLeast),
        BoundsContext::LcmHciBar => (independent_cov, Sense::AtMost),
    };
    Some(HalfPlane {
        xi_coef: spec.eta,
        eps_coef: 1.0 - spec.eta,
        rhs,
        sense,
    })
}

pub fn admissible_bounds(
    spec: &PopulationSpec,
    context: BoundsContext,
) -> Result<CovarianceBounds> {
    let mut report = ValidationReport::default();
    check_ranges(&spec.with_covariances(0.0, 0.0), &mut report);
    report.into_result()?;

    let (mut xi_lo, mut xi_hi) = xi_box(spec);
    let (mut eps_lo, mut eps_hi) = eps_box(spec);
    let half_plane = lcm_half_plane(spec, context);
    if let Some(hp) = half_plane {
        let xi_edge = hp.rhs / hp.xi_coef;
        let eps_edge = hp.rhs / hp.eps_coef;
        match hp.sense {
            Sense::AtLeast => {
                xi_lo = xi_lo.max(xi_edge);
                eps_lo = eps_lo.max(eps_edge);
            }
            Sense::AtMost => {
                xi_hi = xi_hi.min(xi_edge);
                eps_hi = eps_hi.min(eps_edge);
            }
        }
    }
    if xi_lo > xi_hi || eps_lo > eps_hi {
        return Err(Error::EmptyRegion(format!(
            "{context:?}: xi in [{}, {}], eps in [{}, {}]",
            short(xi_lo),
            short(xi_hi),
            short(eps_lo),
            short(eps_hi)
        )));
    }
    Ok(CovarianceBounds {
        xi_lo,
        xi_hi,
        eps_lo,
        eps_hi,
        context,
        half_plane,
    })
}

/// Whether the spec's own (xi, eps) pair is admissible in `context`, using
/// the full joint region rather than the per-axis slices.
pub fn is_jointly_feasible(spec: &PopulationSpec, context: BoundsContext) -> bool {
    let mut report = ValidationReport::default();
    check_ranges(spec, &mut report);
    if !report.is_empty() {
        return false;
    }
    let (xi_lo, xi_hi) = xi_box(spec);
    let (eps_lo, eps_hi) = eps_box(spec);
    let in_box = spec.xi >= xi_lo - PROB_TOL
        && spec.xi <= xi_hi + PROB_TOL
        && spec.eps >= eps_lo - PROB_TOL
        && spec.eps <= eps_hi + PROB_TOL;
    in_box && lcm_half_plane(spec, context).is_none_or(|hp| hp.contains(spec.xi, spec.eps))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn baseline_is_valid() {
        assert!(validate(&PopulationSpec::baseline()).is_empty());
    }

    #[test]
    fn uninformative_index_test_is_reported() {
        let spec = PopulationSpec {
            se_x: 0.4,
            sp_x: 0.5,
            ..PopulationSpec::baseline()
        };
        let report = validate(&spec);
        assert_eq!(report.violations.len(), 1);
        assert_eq!(
            report.violations[0].kind,
            ViolationKind::UninformativeIndexTest
        );
        assert!(report.violations[0].message.contains("J_X ≤ 0"));
        assert!(!report.is_bounds_only());
    }

    #[test]
    fn xi_above_box_names_bound() {
        let spec = PopulationSpec::baseline().with_covariances(0.07, 0.0);
        let report = validate(&spec);
        assert_eq!(report.violations.len(), 1);
        let v = &report.violations[0];
        assert_eq!(v.field, "xi");
        assert_eq!(v.message, "xi above upper bound 0.06");
        assert!(close(v.bound.unwrap(), 0.06, 1e-15));
        assert!(report.is_bounds_only());
    }

    #[test]
    fn prevalence_endpoints_rejected() {
        for eta in [0.0, 1.0, -0.1, f64::NAN] {
            let spec = PopulationSpec {
                eta,
                ..PopulationSpec::baseline()
            };
            assert!(!validate(&spec).is_empty(), "eta = {eta}");
        }
    }

    #[test]
    fn degenerate_reference_accuracies_admitted() {
        let spec = PopulationSpec {
            se_z1: 1.0,
            sp_z2: 1.0,
            ..PopulationSpec::baseline()
        };
        assert!(validate(&spec).is_empty());
    }

    #[test]
    fn youden_examples() {
        assert_eq!(youden(1.0, 1.0).value(), 1.0);
        assert_eq!(youden(0.0, 0.0).value(), -1.0);
        assert!(close(youden(0.9, 0.9).value(), 0.8, 1e-15));
    }

    #[test]
    fn baseline_cell_all_positive() {
        let joint = joint_distribution(&PopulationSpec::baseline()).unwrap();
        let all_pos = Outcome {
            x: true,
            z1: true,
            z2: true,
            y: true,
        };
        assert!(close(joint.cell(all_pos), 0.0324, 1e-15));
        assert!(close(joint.total(), 1.0, PROB_TOL));
    }

    #[test]
    fn covariance_shifts_concordant_cells() {
        let base = joint_distribution(&PopulationSpec::baseline()).unwrap();
        let dep =
            joint_distribution(&PopulationSpec::baseline().with_covariances(0.02, 0.0)).unwrap();
        for z2 in [false, true] {
            let o = Outcome {
                x: true,
                z1: true,
                z2,
                y: true,
            };
            let pz2 = if z2 { 0.6 } else { 0.4 };
            assert!(close(dep.cell(o) - base.cell(o), 0.1 * 0.02 * pz2, 1e-15));
        }
        assert!(close(dep.total(), 1.0, PROB_TOL));
    }

    #[test]
    fn baseline_bounds() {
        let b = admissible_bounds(&PopulationSpec::baseline(), BoundsContext::BasicJoint).unwrap();
        assert!(close(b.xi_lo, -0.04, 1e-12));
        assert!(close(b.xi_hi, 0.06, 1e-12));
        assert!(close(b.eps_lo, -0.005, 1e-12));
        assert!(close(b.eps_hi, 0.045, 1e-12));
        assert!(b.half_plane.is_none());
    }

    #[test]
    fn lcm_hci_half_plane_at_baseline() {
        let spec = PopulationSpec::baseline();
        let b = admissible_bounds(&spec, BoundsContext::LcmHci).unwrap();
        let hp = b.half_plane.unwrap();
        assert!(close(hp.rhs, -0.0396, 1e-12));
        assert_eq!(hp.sense, Sense::AtLeast);
        // -0.396 is looser than the box, so the box edge survives
        assert!(close(b.xi_lo, -0.04, 1e-12));
    }

    #[test]
    fn lcm_hci_bar_tightens_from_above() {
        let spec = PopulationSpec::baseline();
        let b = admissible_bounds(&spec, BoundsContext::LcmHciBar).unwrap();
        // 0.0396 / 0.9 = 0.044 < 0.045
        assert!(close(b.eps_hi, 0.044, 1e-12));
        assert!(close(b.xi_hi, 0.06, 1e-12));
    }

    #[test]
    fn perfect_index_test_has_no_covariance_room() {
        let spec = PopulationSpec {
            se_x: 1.0,
            sp_x: 1.0,
            ..PopulationSpec::baseline()
        };
        let b = admissible_bounds(&spec, BoundsContext::BasicJoint).unwrap();
        assert_eq!((b.xi_lo, b.xi_hi), (0.0, 0.0));
        assert_eq!((b.eps_lo, b.eps_hi), (0.0, 0.0));
    }

    #[test]
    fn joint_feasibility_checks_both_covariances() {
        let spec = PopulationSpec::baseline().with_covariances(0.06, 0.045);
        assert!(is_jointly_feasible(&spec, BoundsContext::BasicJoint));
        assert!(is_jointly_feasible(&spec, BoundsContext::LcmHci));
        // 0.1 * 0.06 + 0.9 * 0.045 = 0.0465 > 0.0396
        assert!(!is_jointly_feasible(&spec, BoundsContext::LcmHciBar));
    }

    #[test]
    fn bounds_ignore_spec_covariances() {
        let spec = PopulationSpec::baseline().with_covariances(5.0, -5.0);
        assert!(admissible_bounds(&spec, BoundsContext::BasicJoint).is_ok());
    }
}
