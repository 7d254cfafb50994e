//! Randomized verification of the closed forms against the oracle and
//! against the sign, zero and monotonicity properties of the comparative
//! methods.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lcm::population_moments;
use crate::methods::{
    decomposition, evaluate, tilde_reference, unified_igs_equivalence, MethodId, MethodResult,
    TildeReference,
};
use crate::oracle::{
    oracle_lcm_moments, oracle_method_accuracy, oracle_tilde_accuracy, oracle_tilde_covariance,
};
use crate::population::{validate, youden, PopulationSpec};
use crate::sampling::{SamplerConfig, SpecSampler};

pub const EQUIVALENCE_TOL: f64 = 1e-12;
pub const FD_STEP: f64 = 1e-4;
const FD_SLACK: f64 = 1e-14;

/// Source of the closed forms under test. Swapping it lets a deliberately
/// broken implementation show that the checks can fail.
pub trait FormulaProvider: Sync {
    fn evaluate(&self, spec: &PopulationSpec, method: MethodId) -> Result<MethodResult>;

    fn unified(&self, spec: &PopulationSpec, method: MethodId) -> Result<MethodResult> {
        unified_igs_equivalence(spec, method)
    }

    fn tilde(&self, spec: &PopulationSpec, method: MethodId) -> Result<TildeReference> {
        tilde_reference(spec, method)
    }
}

/// The library's own formulas.
#[derive(Debug, Clone, Copy, Default)]
pub struct ClosedForms;

impl FormulaProvider for ClosedForms {
    fn evaluate(&self, spec: &PopulationSpec, method: MethodId) -> Result<MethodResult> {
        evaluate(spec, method)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Field {
    SeX,
    SpX,
    SeZ1,
    SpZ1,
    SeZ2,
    SpZ2,
    Eta,
}

impl Field {
    pub fn get(self, s: &PopulationSpec) -> f64 {
        match self {
            Field::SeX => s.se_x,
            Field::SpX => s.sp_x,
            Field::SeZ1 => s.se_z1,
            Field::SpZ1 => s.sp_z1,
            Field::SeZ2 => s.se_z2,
            Field::SpZ2 => s.sp_z2,
            Field::Eta => s.eta,
        }
    }

    pub fn with(self, mut s: PopulationSpec, v: f64) -> PopulationSpec {
        match self {
            Field::SeX => s.se_x = v,
            Field::SpX => s.sp_x = v,
            Field::SeZ1 => s.se_z1 = v,
            Field::SpZ1 => s.sp_z1 = v,
            Field::SeZ2 => s.se_z2 = v,
            Field::SpZ2 => s.sp_z2 = v,
            Field::Eta => s.eta = v,
        }
        s
    }
}

/// A tabulated direction: `delta_se` (or `delta_sp`) of `method` moves with
/// `field` in the direction given by `increasing`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Monotonicity {
    pub method: MethodId,
    pub sensitivity: bool,
    pub field: Field,
    pub increasing: bool,
}

/// Directions of the HCI deviations of IGS, CRS_A and CRS_O.
pub fn monotonicity_table() -> Vec<Monotonicity> {
    let mut out = Vec::new();
    for method in [MethodId::Igs, MethodId::CrsAnd, MethodId::CrsOr] {
        for sensitivity in [true, false] {
            let mut fields = vec![
                (Field::SeX, false),
                (Field::SpX, false),
                (Field::SeZ1, true),
                (Field::SpZ1, true),
                (Field::Eta, sensitivity),
            ];
            if method != MethodId::Igs {
                fields.push((Field::SeZ2, true));
                fields.push((Field::SpZ2, true));
            }
            out.extend(fields.into_iter().map(|(field, increasing)| Monotonicity {
                method,
                sensitivity,
                field,
                increasing,
            }));
        }
    }
    out
}

/// Central difference of the tabulated deviation, or `None` when the
/// stencil leaves the interior of the valid region.
pub fn central_difference(
    provider: &dyn FormulaProvider,
    spec: &PopulationSpec,
    m: &Monotonicity,
) -> Option<f64> {
    let x = m.field.get(spec);
    if x - FD_STEP <= 0.0 || x + FD_STEP >= 1.0 {
        return None;
    }
    let at = |v: f64| -> Option<f64> {
        let s = m.field.with(*spec, v);
        if !validate(&s).is_empty() {
            return None;
        }
        let r = provider.evaluate(&s, m.method).ok()?;
        Some(if m.sensitivity {
            r.delta_se
        } else {
            r.delta_sp
        })
    };
    Some(at(x + FD_STEP)? - at(x - FD_STEP)?)
}

/// Whether a central difference agrees with the tabulated direction.
pub fn direction_holds(m: &Monotonicity, diff: f64) -> bool {
    if m.increasing {
        diff >= -FD_SLACK
    } else {
        diff <= FD_SLACK
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Failure {
    pub check: String,
    pub spec: PopulationSpec,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub samples: usize,
    pub seed: u64,
    pub checks: usize,
    /// Largest closed-form vs oracle difference seen.
    pub max_discrepancy: f64,
    pub failures: Vec<Failure>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

struct Recorder {
    checks: usize,
    max_discrepancy: f64,
    failures: Vec<Failure>,
}

impl Recorder {
    fn compare(&mut self, check: &str, spec: &PopulationSpec, got: f64, want: f64) {
        self.checks += 1;
        let diff = (got - want).abs();
        if diff.is_nan() || diff > self.max_discrepancy {
            self.max_discrepancy = if diff.is_nan() { f64::INFINITY } else { diff };
        }
        if diff.is_nan() || diff > EQUIVALENCE_TOL {
            self.fail(check, spec, format!("{got} vs {want} (|diff| = {diff:e})"));
        }
    }

    fn assert(
        &mut self,
        check: &str,
        spec: &PopulationSpec,
        ok: bool,
        detail: impl FnOnce() -> String,
    ) {
        self.checks += 1;
        if !ok {
            self.fail(check, spec, detail());
        }
    }

    fn fail(&mut self, check: &str, spec: &PopulationSpec, detail: String) {
        self.failures.push(Failure {
            check: check.to_string(),
            spec: *spec,
            detail,
        });
    }

    fn error(&mut self, check: &str, spec: &PopulationSpec, err: &Error) {
        self.checks += 1;
        self.fail(check, spec, err.to_string());
    }
}

fn compare_results(
    rec: &mut Recorder,
    check: &str,
    spec: &PopulationSpec,
    got: &MethodResult,
    want: &MethodResult,
) {
    rec.compare(&format!("{check} se"), spec, got.se, want.se);
    rec.compare(&format!("{check} sp"), spec, got.sp, want.sp);
    rec.compare(
        &format!("{check} delta_se"),
        spec,
        got.delta_se,
        want.delta_se,
    );
    rec.compare(
        &format!("{check} delta_sp"),
        spec,
        got.delta_sp,
        want.delta_sp,
    );
}

fn check_oracle(rec: &mut Recorder, provider: &dyn FormulaProvider, spec: &PopulationSpec) {
    for method in MethodId::COMPARATIVE {
        let check = format!("{method} oracle");
        match (
            provider.evaluate(spec, method),
            oracle_method_accuracy(spec, method),
        ) {
            (Ok(got), Ok(want)) => {
                compare_results(rec, &check, spec, &got, &want);
                rec.compare(
                    &format!("{method} delta_se definition"),
                    spec,
                    got.delta_se,
                    got.se - spec.se_x,
                );
                rec.compare(
                    &format!("{method} delta_sp definition"),
                    spec,
                    got.delta_sp,
                    got.sp - spec.sp_x,
                );
            }
            (Err(a), Err(b)) if a.code() == b.code() => rec.checks += 1,
            (Err(e), _) | (_, Err(e)) => rec.error(&check, spec, &e),
        }

        let oracle_tilde = oracle_tilde_covariance(spec, method)
            .and_then(|cov| oracle_tilde_accuracy(spec, method).map(|acc| (cov, acc)));
        match (provider.tilde(spec, method), oracle_tilde) {
            (Ok(t), Ok(((xi, eps), (se, sp)))) => {
                rec.compare(&format!("{method} tilde xi"), spec, t.xi_tilde, xi);
                rec.compare(&format!("{method} tilde eps"), spec, t.eps_tilde, eps);
                rec.compare(&format!("{method} tilde se"), spec, t.se_tilde, se);
                rec.compare(&format!("{method} tilde sp"), spec, t.sp_tilde, sp);
            }
            (Err(e), _) | (_, Err(e)) => rec.error(&format!("{method} tilde"), spec, &e),
        }

        if method != MethodId::Igs {
            let check = format!("{method} unified");
            match (
                provider.unified(spec, method),
                provider.evaluate(spec, method),
            ) {
                (Ok(got), Ok(want)) => compare_results(rec, &check, spec, &got, &want),
                (Err(a), Err(b)) if a.code() == b.code() => rec.checks += 1,
                (Err(e), _) | (_, Err(e)) => rec.error(&check, spec, &e),
            }
        }
    }

    match (population_moments(spec), oracle_lcm_moments(spec)) {
        (Ok(m), Ok(o)) => {
            for (name, got, want) in [
                ("p1", m.p1, o.p1),
                ("p2", m.p2, o.p2),
                ("p3", m.p3, o.p3),
                ("p12", m.p12, o.p12),
                ("p13", m.p13, o.p13),
                ("p23", m.p23, o.p23),
                ("p123", m.p123, o.p123),
            ] {
                rec.compare(&format!("moment {name}"), spec, got, want);
            }
        }
        (Err(e), _) | (_, Err(e)) => rec.error("moments", spec, &e),
    }
}

fn check_dependence_terms(
    rec: &mut Recorder,
    provider: &dyn FormulaProvider,
    spec: &PopulationSpec,
) {
    for method in [MethodId::Igs, MethodId::CrsAnd, MethodId::CrsOr] {
        let (Ok(d), Ok(dep), Ok(hci)) = (
            decomposition(spec, method),
            provider.evaluate(spec, method),
            provider.evaluate(&spec.hci(), method),
        ) else {
            continue;
        };
        rec.compare(
            &format!("{method} se dependence term"),
            spec,
            dep.delta_se - hci.delta_se,
            d.se_dependence_term(),
        );
        rec.compare(
            &format!("{method} sp dependence term"),
            spec,
            dep.delta_sp - hci.delta_sp,
            d.sp_dependence_term(),
        );
    }
}

fn check_hci_properties(rec: &mut Recorder, provider: &dyn FormulaProvider, spec: &PopulationSpec) {
    for method in [MethodId::Igs, MethodId::CrsAnd, MethodId::CrsOr] {
        let Ok(r) = provider.evaluate(spec, method) else {
            continue;
        };
        rec.assert(
            &format!("{method} delta_se <= 0"),
            spec,
            r.delta_se <= 0.0,
            || format!("delta_se = {}", r.delta_se),
        );
        rec.assert(
            &format!("{method} delta_sp <= 0"),
            spec,
            r.delta_sp <= 0.0,
            || format!("delta_sp = {}", r.delta_sp),
        );
    }
    for m in monotonicity_table() {
        if let Some(diff) = central_difference(provider, spec, &m) {
            let what = if m.sensitivity {
                "delta_se"
            } else {
                "delta_sp"
            };
            let dir = if m.increasing {
                "increasing"
            } else {
                "decreasing"
            };
            rec.assert(
                &format!("{} {what} {dir} in {:?}", m.method, m.field),
                spec,
                direction_holds(&m, diff),
                || format!("central difference {diff:e}"),
            );
        }
    }
}

/// Run every check on `samples` dependent and `samples` HCI populations.
pub fn verify(samples: usize, seed: u64) -> Result<VerifyReport> {
    verify_with(&ClosedForms, samples, seed)
}

pub fn verify_with(
    provider: &dyn FormulaProvider,
    samples: usize,
    seed: u64,
) -> Result<VerifyReport> {
    if samples == 0 {
        return Err(Error::Precondition("samples must be positive".into()));
    }
    let mut rec = Recorder {
        checks: 0,
        max_discrepancy: 0.0,
        failures: Vec::new(),
    };
    let dependent = SpecSampler::new(seed, SamplerConfig::default());
    let independent = SpecSampler::new(seed ^ 0x9e37_79b9_7f4a_7c15, SamplerConfig::hci());
    for (spec, hci_spec) in dependent.zip(independent).take(samples) {
        debug_assert!(youden(spec.se_x, spec.sp_x).is_informative());
        check_oracle(&mut rec, provider, &spec);
        check_dependence_terms(&mut rec, provider, &spec);
        check_oracle(&mut rec, provider, &hci_spec);
        check_hci_properties(&mut rec, provider, &hci_spec);
    }
    Ok(VerifyReport {
        samples,
        seed,
        checks: rec.checks,
        max_discrepancy: rec.max_discrepancy,
        failures: rec.failures,
    })
}
