//! Brute-force evaluation from the 16-cell joint table.
//!
//! Nothing here uses the closed forms: every quantity is a sum of table
//! cells selected by the method's Boolean reference rule.

use crate::error::{Error, Result};
use crate::lcm::MomentSet;
use crate::methods::{MethodId, MethodResult};
use crate::population::{joint_distribution, Outcome, PopulationSpec, PROB_TOL};

/// Materialized joint table with its observable marginal.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeTable {
    pub rows: Vec<(Outcome, f64)>,
}

impl OutcomeTable {
    pub fn new(spec: &PopulationSpec) -> Result<Self> {
        let joint = joint_distribution(spec)?;
        Ok(OutcomeTable {
            rows: joint.iter().collect(),
        })
    }

    pub fn total(&self) -> f64 {
        self.rows.iter().map(|(_, p)| p).sum()
    }

    pub fn probability(&self, event: impl Fn(&Outcome) -> bool) -> f64 {
        self.rows
            .iter()
            .filter(|(o, _)| event(o))
            .map(|(_, p)| p)
            .sum()
    }

    /// P(X=x, Z1=z1, Z2=z2) summed over disease status, keyed by (x, z1, z2).
    pub fn observable(&self) -> Vec<((bool, bool, bool), f64)> {
        let mut out = Vec::with_capacity(8);
        for x in [false, true] {
            for z1 in [false, true] {
                for z2 in [false, true] {
                    let p = self.probability(|o| o.x == x && o.z1 == z1 && o.z2 == z2);
                    out.push(((x, z1, z2), p));
                }
            }
        }
        out
    }

    /// cov(A, B | Y = y) for two indicator events.
    pub fn conditional_covariance(
        &self,
        a: impl Fn(&Outcome) -> bool,
        b: impl Fn(&Outcome) -> bool,
        y: bool,
    ) -> f64 {
        let py = self.probability(|o| o.y == y);
        let pa = self.probability(|o| o.y == y && a(o)) / py;
        let pb = self.probability(|o| o.y == y && b(o)) / py;
        let pab = self.probability(|o| o.y == y && a(o) && b(o)) / py;
        pab - pa * pb
    }
}

/// The reference variable each comparative method builds from (X, Z1, Z2).
pub fn reference_rule(method: MethodId) -> Result<fn(&Outcome) -> bool> {
    Ok(match method {
        MethodId::Igs => |o: &Outcome| o.z1,
        MethodId::CrsAnd => |o: &Outcome| o.z1 && o.z2,
        MethodId::CrsOr => |o: &Outcome| o.z1 || o.z2,
        MethodId::Da => {
            |o: &Outcome| (o.x && o.z1) || (o.x && !o.z1 && o.z2) || (!o.x && o.z1 && o.z2)
        }
        other => return Err(Error::UnsupportedMethod(other)),
    })
}

pub fn oracle_method_accuracy(spec: &PopulationSpec, method: MethodId) -> Result<MethodResult> {
    let rule = reference_rule(method)?;
    let table = OutcomeTable::new(spec)?;
    let p_pos = table.probability(rule);
    if !(p_pos > PROB_TOL && p_pos < 1.0 - PROB_TOL) {
        return Err(Error::DegenerateReference {
            method,
            p_positive: p_pos,
        });
    }
    let se = table.probability(|o| o.x && rule(o)) / p_pos;
    let sp = table.probability(|o| !o.x && !rule(o)) / (1.0 - p_pos);
    Ok(MethodResult::comparative(
        method,
        spec,
        se,
        sp,
        se - spec.se_x,
        sp - spec.sp_x,
    ))
}

pub fn oracle_lcm_moments(spec: &PopulationSpec) -> Result<MomentSet> {
    let t = OutcomeTable::new(spec)?;
    Ok(MomentSet::from_probabilities(
        t.probability(|o| o.x),
        t.probability(|o| o.z1),
        t.probability(|o| o.z2),
        t.probability(|o| o.x && o.z1),
        t.probability(|o| o.x && o.z2),
        t.probability(|o| o.z1 && o.z2),
        t.probability(|o| o.x && o.z1 && o.z2),
    ))
}

/// (cov(X, Z~ | Y=1), cov(X, Z~ | Y=0)) by summation.
pub fn oracle_tilde_covariance(spec: &PopulationSpec, method: MethodId) -> Result<(f64, f64)> {
    let rule = reference_rule(method)?;
    let t = OutcomeTable::new(spec)?;
    Ok((
        t.conditional_covariance(|o| o.x, rule, true),
        t.conditional_covariance(|o| o.x, rule, false),
    ))
}

/// (P(Z~=1 | Y=1), P(Z~=0 | Y=0)) by summation.
pub fn oracle_tilde_accuracy(spec: &PopulationSpec, method: MethodId) -> Result<(f64, f64)> {
    let rule = reference_rule(method)?;
    let t = OutcomeTable::new(spec)?;
    let diseased = t.probability(|o| o.y);
    Ok((
        t.probability(|o| o.y && rule(o)) / diseased,
        t.probability(|o| !o.y && !rule(o)) / (1.0 - diseased),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn baseline_reference_methods() {
        let base = PopulationSpec::baseline();
        let igs = oracle_method_accuracy(&base, MethodId::Igs).unwrap();
        assert_close(igs.se, 39.0 / 70.0, 1e-15);
        let da = oracle_method_accuracy(&base, MethodId::Da).unwrap();
        assert_close(da.se, 0.9375, 1e-15);
    }

    #[test]
    fn table_sums_to_one() {
        let t =
            OutcomeTable::new(&PopulationSpec::baseline().with_covariances(0.05, 0.04)).unwrap();
        assert_close(t.total(), 1.0, 1e-15);
        assert_eq!(t.observable().len(), 8);
    }

    #[test]
    fn moments_by_summation() {
        let m = oracle_lcm_moments(&PopulationSpec::baseline()).unwrap();
        assert_close(m.p3, 0.105, 1e-15);
        let dep =
            oracle_lcm_moments(&PopulationSpec::baseline().with_covariances(0.02, 0.01)).unwrap();
        assert_close(dep.a13, m.a13, 1e-15);
        assert_close(dep.a23, m.a23, 1e-15);
    }

    #[test]
    fn covariance_is_recovered() {
        let spec = PopulationSpec::baseline().with_covariances(0.02, 0.0);
        let (xi, eps) = oracle_tilde_covariance(&spec, MethodId::Igs).unwrap();
        assert_close(xi, 0.02, 1e-15);
        assert_close(eps, 0.0, 1e-15);
        let (xi_da, _) = oracle_tilde_covariance(&spec, MethodId::Da).unwrap();
        assert_close(xi_da, 0.0548, 1e-15);
        let spec = PopulationSpec::baseline().with_covariances(0.03, 0.0);
        let (xi_or, _) = oracle_tilde_covariance(&spec, MethodId::CrsOr).unwrap();
        assert_close(xi_or, 0.03 * 0.4, 1e-15);
    }

    #[test]
    fn coin_flip_second_test() {
        // an uninformative Z2 leaves Se unchanged but not Sp
        let spec = PopulationSpec {
            se_z2: 0.5,
            sp_z2: 0.5,
            ..PopulationSpec::baseline()
        };
        let igs = oracle_method_accuracy(&spec, MethodId::Igs).unwrap();
        let and = oracle_method_accuracy(&spec, MethodId::CrsAnd).unwrap();
        assert_close(igs.se, and.se, 1e-15);
        assert!((igs.sp - and.sp).abs() > 1e-3);
    }

    #[test]
    fn latent_class_tags_are_unsupported() {
        assert!(oracle_method_accuracy(&PopulationSpec::baseline(), MethodId::LcmHci).is_err());
    }
}
