//! Closed-form three-test latent class estimators.
//!
//! Test 1 is the index test X, test 2 is Z1 and test 3 is Z2. The dependence
//! variant assumes the same X-Z1 covariance structure as the population model.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::methods::{MethodId, MethodResult};
use crate::population::{validate, PopulationSpec};

/// Population moments seen by a latent class model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSet {
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    pub p12: f64,
    pub p13: f64,
    pub p23: f64,
    pub p123: f64,
    pub a12: f64,
    pub a13: f64,
    pub a23: f64,
}

impl MomentSet {
    pub fn from_probabilities(
        p1: f64,
        p2: f64,
        p3: f64,
        p12: f64,
        p13: f64,
        p23: f64,
        p123: f64,
    ) -> Self {
        MomentSet {
            p1,
            p2,
            p3,
            p12,
            p13,
            p23,
            p123,
            a12: dot2(&[(p12, 1.0), (-p1, p2)]),
            a13: dot2(&[(p13, 1.0), (-p1, p3)]),
            a23: dot2(&[(p23, 1.0), (-p2, p3)]),
        }
    }

    /// Third-order residual `p123 - p1 p2 p3 - a12 p3 - a13 p2 - a23 p1`.
    ///
    /// Evaluated as `p123 - p12 p3 - p13 p2 - p23 p1 + 2 p1 p2 p3` in
    /// compensated arithmetic, since the result is often many orders of
    /// magnitude smaller than its terms.
    pub fn triple_residual(&self) -> f64 {
        let (h, l) = two_product(self.p1, self.p2);
        dot2(&[
            (self.p123, 1.0),
            (-self.p12, self.p3),
            (-self.p13, self.p2),
            (-self.p23, self.p1),
            (2.0 * h, self.p3),
            (2.0 * l, self.p3),
        ])
    }

    /// The standardized third moment V of the HCI model.
    pub fn v(&self) -> Result<f64> {
        let product = self.a12 * self.a13 * self.a23;
        if product.is_nan() || product <= 0.0 {
            return Err(Error::UndefinedEstimator(format!(
                "a12·a13·a23 = {product} is not positive"
            )));
        }
        Ok(self.triple_residual() / product.sqrt())
    }
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let t = s - a;
    (s, (a - (s - t)) + (b - t))
}

fn two_product(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

/// Sum of products accurate as if computed in twice the working precision.
fn dot2(terms: &[(f64, f64)]) -> f64 {
    let (mut s, mut c) = (0.0, 0.0);
    for &(a, b) in terms {
        let (p, e) = two_product(a, b);
        let (t, q) = two_sum(s, p);
        s = t;
        c += q + e;
    }
    s + c
}

/// Moments of the population, including its own covariances.
pub fn population_moments(spec: &PopulationSpec) -> Result<MomentSet> {
    validate(spec).into_result()?;
    let eta = spec.eta;
    let rate = |se: f64, sp: f64| eta * se + (1.0 - eta) * (1.0 - sp);
    let pair = |se_a: f64, sp_a: f64, se_b: f64, sp_b: f64| {
        eta * se_a * se_b + (1.0 - eta) * (1.0 - sp_a) * (1.0 - sp_b)
    };
    let (se1, sp1) = (spec.se_x, spec.sp_x);
    let (se2, sp2) = (spec.se_z1, spec.sp_z1);
    let (se3, sp3) = (spec.se_z2, spec.sp_z2);

    let p12 = pair(se1, sp1, se2, sp2) + spec.weighted_covariance();
    let p123 = eta * se1 * se2 * se3
        + (1.0 - eta) * (1.0 - sp1) * (1.0 - sp2) * (1.0 - sp3)
        + eta * se3 * spec.xi
        + (1.0 - eta) * (1.0 - sp3) * spec.eps;
    Ok(MomentSet::from_probabilities(
        rate(se1, sp1),
        rate(se2, sp2),
        rate(se3, sp3),
        p12,
        pair(se1, sp1, se3, sp3),
        pair(se2, sp2, se3, sp3),
        p123,
    ))
}

/// Minus-branch prevalence from a standardized third moment.
pub fn prevalence_from_w(w: f64) -> f64 {
    0.5 - (0.25 - 1.0 / (4.0 + w * w)).sqrt()
}

/// The discarded plus branch, kept for diagnostics.
pub fn prevalence_plus_branch(w: f64) -> f64 {
    0.5 + (0.25 - 1.0 / (4.0 + w * w)).sqrt()
}

pub const ETA_BRACKET: (f64, f64) = (1e-9, 0.5 - 1e-9);
const SCAN_CELLS: usize = 512;
const ETA_TOL: f64 = 1e-12;

/// Prevalence under the dependence model.
///
/// Closed form when `xi_model == eps_model`, otherwise the root of the
/// implicit equation in `ETA_BRACKET`.
pub fn solve_prevalence(m: &MomentSet, xi_model: f64, eps_model: f64) -> Result<f64> {
    if xi_model == eps_model {
        let a12 = m.a12 - eps_model;
        let product = a12 * m.a13 * m.a23;
        if product.is_nan() || product <= 0.0 {
            return Err(Error::UndefinedEstimator(format!(
                "a12·a13·a23 = {product} is not positive after removing the modelled covariance"
            )));
        }
        // V1 - p3·eps collapses to the plain triple residual
        let w = m.triple_residual() / product.sqrt();
        return Ok(prevalence_from_w(w));
    }

    let l = m.triple_residual();
    let f = |eta: f64| -> Option<f64> {
        let a12 = m.a12 - eta * xi_model - (1.0 - eta) * eps_model;
        let product = a12 * m.a13 * m.a23;
        if !(a12 > 0.0 && product > 0.0) {
            return None;
        }
        let g = ((1.0 - eta) / eta).sqrt() - (eta / (1.0 - eta)).sqrt();
        let spread = (eta * (1.0 - eta) * m.a13 * m.a23 / a12).sqrt();
        Some(product.sqrt() * g + spread * (xi_model - eps_model) - l)
    };

    let (lo, hi) = ETA_BRACKET;
    let step = (hi - lo) / SCAN_CELLS as f64;
    let mut prev: Option<(f64, f64)> = None;
    for i in 0..=SCAN_CELLS {
        let eta = if i == SCAN_CELLS {
            hi
        } else {
            lo + step * i as f64
        };
        let Some(value) = f(eta) else {
            prev = None;
            continue;
        };
        if value == 0.0 {
            return Ok(eta);
        }
        if let Some((a, fa)) = prev {
            if fa.signum() != value.signum() {
                return Ok(bisect(&f, a, fa, eta));
            }
        }
        prev = Some((eta, value));
    }
    Err(Error::NoRoot)
}

fn bisect(f: &impl Fn(f64) -> Option<f64>, mut a: f64, mut fa: f64, mut b: f64) -> f64 {
    while b - a > ETA_TOL {
        let mid = 0.5 * (a + b);
        let Some(fm) = f(mid) else { break };
        if fm == 0.0 {
            return mid;
        }
        if fm.signum() == fa.signum() {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    0.5 * (a + b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scenario {
    #[serde(rename = "Matched_HCI")]
    MatchedHci,
    #[serde(rename = "Matched_Dep")]
    MatchedDep,
    /// HCI model applied to a population with X-Z1 dependence.
    #[serde(rename = "LCM_HCI_on_dep_population")]
    HciOnDependent,
    /// Dependence model applied to a conditionally independent population.
    #[serde(rename = "LCM_Dep_on_HCI_population")]
    DepOnHci,
}

/// Which prevalence the Se/Sp expressions consume.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EtaSource {
    /// The model's own estimate.
    Estimated,
    /// The true prevalence of the population.
    #[default]
    Population,
}

/// Unclamped estimator outputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawEstimate {
    pub se1: f64,
    pub se2: f64,
    pub se3: f64,
    pub sp1: f64,
    pub sp2: f64,
    pub sp3: f64,
    pub eta_hat: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LcmEstimate {
    pub se1: f64,
    pub se2: f64,
    pub se3: f64,
    pub sp1: f64,
    pub sp2: f64,
    pub sp3: f64,
    pub eta_hat: f64,
    /// Prevalence plugged into the Se/Sp expressions.
    pub eta_used: f64,
    pub clamped: bool,
    pub scenario: Scenario,
    pub raw: RawEstimate,
}

impl LcmEstimate {
    fn from_raw(raw: RawEstimate, eta_used: f64, scenario: Scenario) -> Self {
        let values = [
            raw.se1,
            raw.se2,
            raw.se3,
            raw.sp1,
            raw.sp2,
            raw.sp3,
            raw.eta_hat,
        ];
        let clamped = values.iter().any(|v| !(0.0..=1.0).contains(v));
        let c = |v: f64| v.clamp(0.0, 1.0);
        LcmEstimate {
            se1: c(raw.se1),
            se2: c(raw.se2),
            se3: c(raw.se3),
            sp1: c(raw.sp1),
            sp2: c(raw.sp2),
            sp3: c(raw.sp3),
            eta_hat: c(raw.eta_hat),
            eta_used,
            clamped,
            scenario,
            raw,
        }
    }
}

fn check_eta(eta: f64) -> Result<f64> {
    if eta > 0.0 && eta < 1.0 {
        Ok(eta)
    } else {
        Err(Error::UndefinedEstimator(format!(
            "prevalence {eta} outside (0, 1)"
        )))
    }
}

/// Se_i and Sp_i given the three HCI-equivalent covariances.
fn accuracies(
    m: &MomentSet,
    a12: f64,
    eta: f64,
    eta_hat: f64,
    scenario: Scenario,
) -> Result<LcmEstimate> {
    let (a13, a23) = (m.a13, m.a23);
    if (a12 * a13 * a23).is_nan() || a12 * a13 * a23 <= 0.0 {
        return Err(Error::UndefinedEstimator(format!(
            "covariance product a12·a13·a23 = {} is not positive",
            a12 * a13 * a23
        )));
    }
    let up = ((1.0 - eta) / eta).sqrt();
    let down = (eta / (1.0 - eta)).sqrt();
    let r1 = (a12 * a13 / a23).sqrt();
    let r2 = (a12 * a23 / a13).sqrt();
    let r3 = (a13 * a23 / a12).sqrt();
    let raw = RawEstimate {
        se1: m.p1 + r1 * up,
        se2: m.p2 + r2 * up,
        se3: m.p3 + r3 * up,
        sp1: 1.0 - m.p1 + r1 * down,
        sp2: 1.0 - m.p2 + r2 * down,
        sp3: 1.0 - m.p3 + r3 * down,
        eta_hat,
    };
    Ok(LcmEstimate::from_raw(raw, eta, scenario))
}

/// HCI estimator using its own prevalence estimate.
pub fn lcm_hci_estimate(m: &MomentSet) -> Result<LcmEstimate> {
    lcm_hci_estimate_with_eta(m, None)
}

/// HCI estimator; `eta` replaces the estimated prevalence in Se/Sp when given.
pub fn lcm_hci_estimate_with_eta(m: &MomentSet, eta: Option<f64>) -> Result<LcmEstimate> {
    let eta_hat = prevalence_from_w(m.v()?);
    let eta_used = check_eta(eta.unwrap_or(eta_hat))?;
    accuracies(m, m.a12, eta_used, eta_hat, Scenario::MatchedHci)
}

/// Dependence estimator with the modelled X-Z1 covariances.
pub fn lcm_dep_estimate(m: &MomentSet, xi_model: f64, eps_model: f64) -> Result<LcmEstimate> {
    lcm_dep_estimate_with_eta(m, xi_model, eps_model, None)
}

pub fn lcm_dep_estimate_with_eta(
    m: &MomentSet,
    xi_model: f64,
    eps_model: f64,
    eta: Option<f64>,
) -> Result<LcmEstimate> {
    let eta_hat = solve_prevalence(m, xi_model, eps_model)?;
    let eta_used = check_eta(eta.unwrap_or(eta_hat))?;
    let a12 = m.a12 - eta_used * xi_model - (1.0 - eta_used) * eps_model;
    accuracies(m, a12, eta_used, eta_hat, Scenario::MatchedDep)
}

/// Deviations of the index test's estimates and of the prevalence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LcmDeviation {
    pub delta_se_x: f64,
    pub delta_sp_x: f64,
    pub delta_eta: f64,
    pub estimate: LcmEstimate,
}

pub fn lcm_scenario_deviation(
    spec: &PopulationSpec,
    scenario: Scenario,
    xi_model: f64,
    eps_model: f64,
) -> Result<LcmDeviation> {
    lcm_scenario_deviation_with(spec, scenario, xi_model, eps_model, EtaSource::default())
}

/// Fit the model implied by `scenario` to the population `spec`.
///
/// `HciOnDependent` and `MatchedHci` ignore the model covariances;
/// `MatchedDep` takes them from the population itself; `DepOnHci` needs a
/// population without dependence.
pub fn lcm_scenario_deviation_with(
    spec: &PopulationSpec,
    scenario: Scenario,
    xi_model: f64,
    eps_model: f64,
    eta_source: EtaSource,
) -> Result<LcmDeviation> {
    let moments = population_moments(spec)?;
    let eta = match eta_source {
        EtaSource::Estimated => None,
        EtaSource::Population => Some(spec.eta),
    };
    let mut estimate = match scenario {
        Scenario::MatchedHci | Scenario::HciOnDependent => {
            lcm_hci_estimate_with_eta(&moments, eta)?
        }
        Scenario::MatchedDep => lcm_dep_estimate_with_eta(&moments, spec.xi, spec.eps, eta)?,
        Scenario::DepOnHci => {
            if !spec.is_hci() {
                return Err(Error::Precondition(
                    "the dependence-model scenario needs a population with xi = eps = 0".into(),
                ));
            }
            lcm_dep_estimate_with_eta(&moments, xi_model, eps_model, eta)?
        }
    };
    estimate.scenario = scenario;
    Ok(LcmDeviation {
        delta_se_x: estimate.se1 - spec.se_x,
        delta_sp_x: estimate.sp1 - spec.sp_x,
        delta_eta: estimate.eta_hat - spec.eta,
        estimate,
    })
}

/// Latent class rows of a method table.
///
/// `LCM_HCI` fits the HCI model to `spec` as given. `LCM_HCIBAR` fits the
/// dependence model with covariances `(spec.xi, spec.eps)` to the same
/// population without dependence.
pub fn lcm_method_result(
    spec: &PopulationSpec,
    method: MethodId,
    eta_source: EtaSource,
) -> Result<MethodResult> {
    validate(spec).into_result()?;
    let (deviation, hci_assumed) = match method {
        MethodId::LcmHci => {
            let scenario = if spec.is_hci() {
                Scenario::MatchedHci
            } else {
                Scenario::HciOnDependent
            };
            (
                lcm_scenario_deviation_with(spec, scenario, 0.0, 0.0, eta_source)?,
                true,
            )
        }
        MethodId::LcmHciBar => {
            let population = spec.hci();
            let deviation = if spec.is_hci() {
                lcm_scenario_deviation_with(
                    &population,
                    Scenario::MatchedHci,
                    0.0,
                    0.0,
                    eta_source,
                )?
            } else {
                lcm_scenario_deviation_with(
                    &population,
                    Scenario::DepOnHci,
                    spec.xi,
                    spec.eps,
                    eta_source,
                )?
            };
            (deviation, spec.is_hci())
        }
        other => return Err(Error::UnsupportedMethod(other)),
    };
    let e = deviation.estimate;
    Ok(MethodResult {
        method,
        se: e.se1,
        sp: e.sp1,
        delta_se: deviation.delta_se_x,
        delta_sp: deviation.delta_sp_x,
        hci_assumed,
        clamped: e.clamped,
        raw_se: Some(e.raw.se1),
        raw_sp: Some(e.raw.sp1),
    })
}
