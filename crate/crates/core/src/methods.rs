//! Closed forms for the accuracy of the index test X measured against an
//! imperfect reference: a single imperfect test (IGS), the "and"/"or"
//! composites of Z1 and Z2 (CRS_A, CRS_O) and discrepant analysis (DA).
//!
//! Every function evaluates the dependence-aware expressions; with
//! `xi = eps = 0` they reduce to the conditionally independent ones.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lcm;
use crate::population::{validate, youden, PopulationSpec, PROB_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MethodId {
    #[serde(rename = "IGS")]
    Igs,
    #[serde(rename = "CRS_A")]
    CrsAnd,
    #[serde(rename = "CRS_O")]
    CrsOr,
    #[serde(rename = "DA")]
    Da,
    /// Latent class model assuming conditional independence.
    #[serde(rename = "LCM_HCI")]
    LcmHci,
    /// Latent class model with the X-Z1 dependence terms.
    #[serde(rename = "LCM_HCIBAR")]
    LcmHciBar,
}

impl MethodId {
    pub const ALL: [MethodId; 6] = [
        MethodId::Igs,
        MethodId::CrsAnd,
        MethodId::CrsOr,
        MethodId::Da,
        MethodId::LcmHci,
        MethodId::LcmHciBar,
    ];

    /// The four methods that compare X against a fixed reference.
    pub const COMPARATIVE: [MethodId; 4] = [
        MethodId::Igs,
        MethodId::CrsAnd,
        MethodId::CrsOr,
        MethodId::Da,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            MethodId::Igs => "IGS",
            MethodId::CrsAnd => "CRS_A",
            MethodId::CrsOr => "CRS_O",
            MethodId::Da => "DA",
            MethodId::LcmHci => "LCM_HCI",
            MethodId::LcmHciBar => "LCM_HCIBAR",
        }
    }

    pub fn is_lcm(self) -> bool {
        matches!(self, MethodId::LcmHci | MethodId::LcmHciBar)
    }
}

impl fmt::Display for MethodId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for MethodId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_uppercase().replace('-', "_");
        MethodId::ALL
            .into_iter()
            .find(|m| m.tag() == norm)
            .ok_or_else(|| Error::Format(format!("unknown method '{s}'")))
    }
}

/// Accuracy of X according to one method, and its deviation from the truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    pub method: MethodId,
    pub se: f64,
    pub sp: f64,
    pub delta_se: f64,
    pub delta_sp: f64,
    pub hci_assumed: bool,
    /// Latent class outputs only: some estimate was truncated to [0, 1].
    #[serde(default)]
    pub clamped: bool,
    /// Latent class outputs only: Se and Sp before truncation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_se: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_sp: Option<f64>,
}

impl MethodResult {
    pub(crate) fn comparative(
        method: MethodId,
        spec: &PopulationSpec,
        se: f64,
        sp: f64,
        delta_se: f64,
        delta_sp: f64,
    ) -> Self {
        MethodResult {
            method,
            se,
            sp,
            delta_se,
            delta_sp,
            hci_assumed: spec.is_hci(),
            clamped: false,
            raw_se: None,
            raw_sp: None,
        }
    }
}

/// The pieces of an IGS-type deviation: `delta = (imperfection + dependence) / p`.
///
/// Only IGS and the two composites split this way; DA mixes the
/// covariances into numerator and denominator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decomposition {
    /// P(reference = 1)
    pub p_positive: f64,
    /// Numerator of the HCI sensitivity deviation (never positive when J_X > 0).
    pub se_imperfection: f64,
    /// Numerator of the HCI specificity deviation.
    pub sp_imperfection: f64,
    /// Numerator added by the X-Z1 covariances, shared by Se and Sp.
    pub dependence: f64,
}

impl Decomposition {
    pub fn p_negative(&self) -> f64 {
        1.0 - self.p_positive
    }

    /// Additive dependence term of the Se deviation.
    pub fn se_dependence_term(&self) -> f64 {
        self.dependence / self.p_positive
    }

    pub fn sp_dependence_term(&self) -> f64 {
        self.dependence / self.p_negative()
    }

    /// `dependence` above which the Se deviation turns non-negative.
    pub fn se_overestimation_threshold(&self) -> f64 {
        -self.se_imperfection
    }

    pub fn sp_overestimation_threshold(&self) -> f64 {
        -self.sp_imperfection
    }
}

fn checked_reference(method: MethodId, p_positive: f64) -> Result<f64> {
    if !(p_positive > PROB_TOL && p_positive < 1.0 - PROB_TOL) {
        return Err(Error::DegenerateReference { method, p_positive });
    }
    Ok(p_positive)
}

/// Imperfection and dependence terms for IGS, CRS_A and CRS_O.
pub fn decomposition(spec: &PopulationSpec, method: MethodId) -> Result<Decomposition> {
    validate(spec).into_result()?;
    let eta = spec.eta;
    let j = youden(spec.se_x, spec.sp_x).value();
    let (se1, sp1, se2, sp2) = (spec.se_z1, spec.sp_z1, spec.se_z2, spec.sp_z2);
    let (xi, eps) = (spec.xi, spec.eps);

    let (p_positive, se_factor, sp_factor, dependence) = match method {
        MethodId::Igs => (
            eta * se1 + (1.0 - eta) * (1.0 - sp1),
            (1.0 - sp1),
            (1.0 - se1),
            eta * xi + (1.0 - eta) * eps,
        ),
        MethodId::CrsAnd => (
            eta * se1 * se2 + (1.0 - eta) * (1.0 - sp1) * (1.0 - sp2),
            (1.0 - sp1) * (1.0 - sp2),
            1.0 - se1 * se2,
            eta * se2 * xi + (1.0 - eta) * (1.0 - sp2) * eps,
        ),
        MethodId::CrsOr => (
            eta * (se1 + se2 - se1 * se2) + (1.0 - eta) * (1.0 - sp1 * sp2),
            1.0 - sp1 * sp2,
            (1.0 - se1) * (1.0 - se2),
            eta * (1.0 - se2) * xi + (1.0 - eta) * sp2 * eps,
        ),
        other => return Err(Error::UnsupportedMethod(other)),
    };
    let p_positive = checked_reference(method, p_positive)?;
    Ok(Decomposition {
        p_positive,
        se_imperfection: -(1.0 - eta) * se_factor * j,
        sp_imperfection: -eta * sp_factor * j,
        dependence,
    })
}

/// X against the single imperfect reference Z1.
pub fn igs(spec: &PopulationSpec) -> Result<MethodResult> {
    let d = decomposition(spec, MethodId::Igs)?;
    let eta = spec.eta;
    let (se_x, sp_x, se1, sp1) = (spec.se_x, spec.sp_x, spec.se_z1, spec.sp_z1);

    let se =
        (eta * se_x * se1 + (1.0 - eta) * (1.0 - sp_x) * (1.0 - sp1) + d.dependence) / d.p_positive;
    let sp = (eta * (1.0 - se_x) * (1.0 - se1) + (1.0 - eta) * sp_x * sp1 + d.dependence)
        / d.p_negative();
    let delta_se = (d.se_imperfection + d.dependence) / d.p_positive;
    let delta_sp = (d.sp_imperfection + d.dependence) / d.p_negative();
    Ok(MethodResult::comparative(
        MethodId::Igs,
        spec,
        se,
        sp,
        delta_se,
        delta_sp,
    ))
}

/// X against the composite that is positive only when Z1 and Z2 both are.
pub fn crs_and(spec: &PopulationSpec) -> Result<MethodResult> {
    let d = decomposition(spec, MethodId::CrsAnd)?;
    let eta = spec.eta;
    let (se_x, sp_x) = (spec.se_x, spec.sp_x);
    let (se1, sp1, se2, sp2) = (spec.se_z1, spec.sp_z1, spec.se_z2, spec.sp_z2);

    let se = (eta * se_x * se1 * se2
        + (1.0 - eta) * (1.0 - sp_x) * (1.0 - sp1) * (1.0 - sp2)
        + d.dependence)
        / d.p_positive;
    let sp = (eta * (1.0 - se_x) * (1.0 - se1 * se2)
        + (1.0 - eta) * sp_x * (sp1 + sp2 - sp1 * sp2)
        + d.dependence)
        / d.p_negative();
    let delta_se = (d.se_imperfection + d.dependence) / d.p_positive;
    let delta_sp = (d.sp_imperfection + d.dependence) / d.p_negative();
    Ok(MethodResult::comparative(
        MethodId::CrsAnd,
        spec,
        se,
        sp,
        delta_se,
        delta_sp,
    ))
}

/// X against the composite that is positive when either Z1 or Z2 is.
pub fn crs_or(spec: &PopulationSpec) -> Result<MethodResult> {
    let d = decomposition(spec, MethodId::CrsOr)?;
    let eta = spec.eta;
    let (se_x, sp_x) = (spec.se_x, spec.sp_x);
    let (se1, sp1, se2, sp2) = (spec.se_z1, spec.sp_z1, spec.se_z2, spec.sp_z2);

    let se = (eta * se_x * (se1 + se2 - se1 * se2)
        + (1.0 - eta) * (1.0 - sp_x) * (1.0 - sp1 * sp2)
        + d.dependence)
        / d.p_positive;
    let sp = (eta * (1.0 - se_x) * (1.0 - se1) * (1.0 - se2)
        + (1.0 - eta) * sp_x * sp1 * sp2
        + d.dependence)
        / d.p_negative();
    let delta_se = (d.se_imperfection + d.dependence) / d.p_positive;
    let delta_sp = (d.sp_imperfection + d.dependence) / d.p_negative();
    Ok(MethodResult::comparative(
        MethodId::CrsOr,
        spec,
        se,
        sp,
        delta_se,
        delta_sp,
    ))
}

/// The joint probabilities that discrepant analysis is assembled from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DaProbabilities {
    /// P(X=1, Z1=1)
    pub x1_z1: f64,
    /// P(X=1, Z1=0, Z2=1)
    pub x1_nz1_z2: f64,
    /// P(X=0, Z1=1, Z2=1)
    pub nx_z1_z2: f64,
    /// P(X=0, Z1=0)
    pub nx_nz1: f64,
    /// P(X=0, Z1=1, Z2=0)
    pub nx_z1_nz2: f64,
    /// P(X=1, Z1=0, Z2=0)
    pub x1_nz1_nz2: f64,
}

impl DaProbabilities {
    pub fn new(spec: &PopulationSpec) -> Self {
        let eta = spec.eta;
        let (se_x, sp_x) = (spec.se_x, spec.sp_x);
        let (se1, sp1, se2, sp2) = (spec.se_z1, spec.sp_z1, spec.se_z2, spec.sp_z2);
        let (xi, eps) = (spec.xi, spec.eps);
        let shared = spec.weighted_covariance();
        let via_z2_pos = eta * se2 * xi + (1.0 - eta) * (1.0 - sp2) * eps;
        let via_z2_neg = eta * (1.0 - se2) * xi + (1.0 - eta) * sp2 * eps;

        DaProbabilities {
            x1_z1: eta * se_x * se1 + (1.0 - eta) * (1.0 - sp_x) * (1.0 - sp1) + shared,
            x1_nz1_z2: eta * se_x * (1.0 - se1) * se2
                + (1.0 - eta) * (1.0 - sp_x) * sp1 * (1.0 - sp2)
                - via_z2_pos,
            nx_z1_z2: eta * (1.0 - se_x) * se1 * se2
                + (1.0 - eta) * sp_x * (1.0 - sp1) * (1.0 - sp2)
                - via_z2_pos,
            nx_nz1: eta * (1.0 - se_x) * (1.0 - se1) + (1.0 - eta) * sp_x * sp1 + shared,
            nx_z1_nz2: eta * (1.0 - se_x) * se1 * (1.0 - se2)
                + (1.0 - eta) * sp_x * (1.0 - sp1) * sp2
                - via_z2_neg,
            x1_nz1_nz2: eta * se_x * (1.0 - se1) * (1.0 - se2)
                + (1.0 - eta) * (1.0 - sp_x) * sp1 * sp2
                - via_z2_neg,
        }
    }

    /// P(Z^DA = 1)
    pub fn p_positive(&self) -> f64 {
        self.x1_z1 + self.x1_nz1_z2 + self.nx_z1_z2
    }
}

/// Discordant (X, Z1) pairs are settled by the resolver Z2.
pub fn discrepant_analysis(spec: &PopulationSpec) -> Result<MethodResult> {
    validate(spec).into_result()?;
    let p = DaProbabilities::new(spec);
    let p_pos = checked_reference(MethodId::Da, p.p_positive())?;
    let p_neg = 1.0 - p_pos;
    let (se_x, sp_x) = (spec.se_x, spec.sp_x);

    let agree_pos = p.x1_z1 + p.x1_nz1_z2;
    let agree_neg = p.nx_nz1 + p.nx_z1_nz2;
    let se = agree_pos / p_pos;
    let sp = agree_neg / p_neg;
    let delta_se = ((1.0 - se_x) * agree_pos - se_x * p.nx_z1_z2) / p_pos;
    let delta_sp = ((1.0 - sp_x) * agree_neg - sp_x * p.x1_nz1_nz2) / p_neg;
    Ok(MethodResult::comparative(
        MethodId::Da,
        spec,
        se,
        sp,
        delta_se,
        delta_sp,
    ))
}

/// A method recast as comparison against a single reference Z~.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TildeReference {
    pub method: MethodId,
    pub se_tilde: f64,
    pub sp_tilde: f64,
    /// cov(X, Z~ | Y = 1)
    pub xi_tilde: f64,
    /// cov(X, Z~ | Y = 0)
    pub eps_tilde: f64,
}

pub fn tilde_reference(spec: &PopulationSpec, method: MethodId) -> Result<TildeReference> {
    validate(spec).into_result()?;
    let (se_x, sp_x) = (spec.se_x, spec.sp_x);
    let (se1, sp1, se2, sp2) = (spec.se_z1, spec.sp_z1, spec.se_z2, spec.sp_z2);
    let (xi, eps) = (spec.xi, spec.eps);

    let (se_tilde, sp_tilde, xi_tilde, eps_tilde) = match method {
        MethodId::Igs => (se1, sp1, xi, eps),
        MethodId::CrsAnd => (
            se1 * se2,
            1.0 - (1.0 - sp1) * (1.0 - sp2),
            xi * se2,
            eps * (1.0 - sp2),
        ),
        MethodId::CrsOr => (
            1.0 - (1.0 - se1) * (1.0 - se2),
            sp1 * sp2,
            xi * (1.0 - se2),
            eps * sp2,
        ),
        MethodId::Da => {
            // Z~ = X Z1 + X (1 - Z1) Z2 + (1 - X) Z1 Z2, so P(Z~ = 1 | Y = y)
            // = r_x r_1 + c + r_2 (r_x + r_1 - 2 r_x r_1 - 2 c)
            let positive_rate = |rx: f64, r1: f64, r2: f64, c: f64| {
                rx * r1 + c + r2 * (rx + r1 - 2.0 * rx * r1 - 2.0 * c)
            };
            let se_tilde = positive_rate(se_x, se1, se2, xi);
            let sp_tilde = 1.0 - positive_rate(1.0 - sp_x, 1.0 - sp1, 1.0 - sp2, eps);
            let xi_tilde = se_x * (1.0 - se_x) * (se1 + se2 * (1.0 - 2.0 * se1))
                + xi * (1.0 - se_x - se2 + 2.0 * se_x * se2);
            let eps_tilde = sp_x * (1.0 - sp_x) * (sp1 + sp2 * (1.0 - 2.0 * sp1))
                + eps * (1.0 - sp_x - sp2 + 2.0 * sp_x * sp2);
            (se_tilde, sp_tilde, xi_tilde, eps_tilde)
        }
        other => return Err(Error::UnsupportedMethod(other)),
    };
    Ok(TildeReference {
        method,
        se_tilde,
        sp_tilde,
        xi_tilde,
        eps_tilde,
    })
}

/// Evaluate a method through the single-reference formulas applied to its
/// Z~ reference. Must agree with the method's own closed form.
pub fn unified_igs_equivalence(spec: &PopulationSpec, method: MethodId) -> Result<MethodResult> {
    let t = tilde_reference(spec, method)?;
    let eta = spec.eta;
    let (se_x, sp_x) = (spec.se_x, spec.sp_x);
    let j = youden(se_x, sp_x).value();

    let p_pos = checked_reference(method, eta * t.se_tilde + (1.0 - eta) * (1.0 - t.sp_tilde))?;
    let p_neg = 1.0 - p_pos;
    let dependence = eta * t.xi_tilde + (1.0 - eta) * t.eps_tilde;

    let se =
        (eta * se_x * t.se_tilde + (1.0 - eta) * (1.0 - sp_x) * (1.0 - t.sp_tilde) + dependence)
            / p_pos;
    let sp =
        (eta * (1.0 - se_x) * (1.0 - t.se_tilde) + (1.0 - eta) * sp_x * t.sp_tilde + dependence)
            / p_neg;
    let delta_se = (-(1.0 - eta) * (1.0 - t.sp_tilde) * j + dependence) / p_pos;
    let delta_sp = (-eta * (1.0 - t.se_tilde) * j + dependence) / p_neg;
    Ok(MethodResult::comparative(
        method, spec, se, sp, delta_se, delta_sp,
    ))
}

/// Evaluate any method on a population. The latent class tags follow the
/// conventions of [`lcm::lcm_method_result`].
pub fn evaluate(spec: &PopulationSpec, method: MethodId) -> Result<MethodResult> {
    match method {
        MethodId::Igs => igs(spec),
        MethodId::CrsAnd => crs_and(spec),
        MethodId::CrsOr => crs_or(spec),
        MethodId::Da => discrepant_analysis(spec),
        MethodId::LcmHci | MethodId::LcmHciBar => {
            lcm::lcm_method_result(spec, method, lcm::EtaSource::default())
        }
    }
}
