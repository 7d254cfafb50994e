//! One-dimensional parameter sweeps over a base population.

mod crossover;
mod export;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lcm::{lcm_method_result, EtaSource};
use crate::methods::{evaluate, MethodId, MethodResult};
use crate::population::{is_jointly_feasible, validate, BoundsContext, PopulationSpec};

pub use crossover::{
    find_crossovers, find_pair_crossovers, find_zero_crossings, Crossover, Quantity, ZeroCrossing,
};
pub use export::{export, export_table, import, ExportFormat, SweepData, SweepTable, TableRow};

/// Default number of grid points per axis.
pub const DEFAULT_POINTS: usize = 241;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    SeZ1,
    SpZ1,
    SeZ2,
    SpZ2,
    Eta,
    Xi,
    Eps,
}

impl SweepParam {
    pub const ALL: [SweepParam; 7] = [
        SweepParam::SeZ1,
        SweepParam::SpZ1,
        SweepParam::SeZ2,
        SweepParam::SpZ2,
        SweepParam::Eta,
        SweepParam::Xi,
        SweepParam::Eps,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweepParam::SeZ1 => "se_z1",
            SweepParam::SpZ1 => "sp_z1",
            SweepParam::SeZ2 => "se_z2",
            SweepParam::SpZ2 => "sp_z2",
            SweepParam::Eta => "eta",
            SweepParam::Xi => "xi",
            SweepParam::Eps => "eps",
        }
    }

    pub fn is_covariance(self) -> bool {
        matches!(self, SweepParam::Xi | SweepParam::Eps)
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        SweepParam::ALL
            .into_iter()
            .find(|p| p.name() == norm)
            .ok_or_else(|| Error::InvalidAxis(format!("unknown parameter '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    pub parameter: SweepParam,
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
    /// Move the matching Z2 accuracy together with the Z1 one.
    #[serde(default)]
    pub linked: bool,
}

impl SweepAxis {
    pub fn new(parameter: SweepParam, lo: f64, hi: f64, points: usize) -> Self {
        SweepAxis {
            parameter,
            lo,
            hi,
            points,
            linked: false,
        }
    }

    pub fn linked(mut self, linked: bool) -> Self {
        self.linked = linked;
        self
    }

    pub fn check(&self) -> Result<()> {
        if self.points < 2 {
            return Err(Error::InvalidAxis(format!(
                "points must be at least 2, got {}",
                self.points
            )));
        }
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo < self.hi) {
            return Err(Error::InvalidAxis(format!(
                "need finite lo < hi, got [{}, {}]",
                self.lo, self.hi
            )));
        }
        if !self.parameter.is_covariance() && (self.lo < 0.0 || self.hi > 1.0) {
            return Err(Error::InvalidAxis(format!(
                "{} must stay within [0, 1], got [{}, {}]",
                self.parameter, self.lo, self.hi
            )));
        }
        if self.linked
            && !matches!(
                self.parameter,
                SweepParam::SeZ1 | SweepParam::SpZ1 | SweepParam::SeZ2 | SweepParam::SpZ2
            )
        {
            return Err(Error::InvalidAxis(format!(
                "{} cannot be linked",
                self.parameter
            )));
        }
        Ok(())
    }

    pub fn value(&self, i: usize) -> f64 {
        if i + 1 == self.points {
            self.hi
        } else {
            self.lo + (self.hi - self.lo) * i as f64 / (self.points - 1) as f64
        }
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.points).map(|i| self.value(i))
    }
}

/// What happens to the covariance that is not swept.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OtherCovariance {
    /// Keep the base population's value.
    #[default]
    Base,
    Zero,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepOptions {
    #[serde(default)]
    pub other_covariance: OtherCovariance,
    #[serde(default)]
    pub eta_source: EtaSource,
}

/// Population at one grid value.
pub fn point_spec(
    base: &PopulationSpec,
    axis: &SweepAxis,
    options: &SweepOptions,
    value: f64,
) -> PopulationSpec {
    let mut spec = *base;
    match axis.parameter {
        SweepParam::SeZ1 | SweepParam::SeZ2 => {
            if axis.linked || axis.parameter == SweepParam::SeZ1 {
                spec.se_z1 = value;
            }
            if axis.linked || axis.parameter == SweepParam::SeZ2 {
                spec.se_z2 = value;
            }
        }
        SweepParam::SpZ1 | SweepParam::SpZ2 => {
            if axis.linked || axis.parameter == SweepParam::SpZ1 {
                spec.sp_z1 = value;
            }
            if axis.linked || axis.parameter == SweepParam::SpZ2 {
                spec.sp_z2 = value;
            }
        }
        SweepParam::Eta => spec.eta = value,
        SweepParam::Xi => {
            spec.xi = value;
            if options.other_covariance == OtherCovariance::Zero {
                spec.eps = 0.0;
            }
        }
        SweepParam::Eps => {
            spec.eps = value;
            if options.other_covariance == OtherCovariance::Zero {
                spec.xi = 0.0;
            }
        }
    }
    spec
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Cell {
    Ok { result: MethodResult },
    Skipped { reason: String, message: String },
}

impl Cell {
    pub fn result(&self) -> Option<&MethodResult> {
        match self {
            Cell::Ok { result } => Some(result),
            Cell::Skipped { .. } => None,
        }
    }

    pub fn skip_reason(&self) -> Option<&str> {
        match self {
            Cell::Ok { .. } => None,
            Cell::Skipped { reason, .. } => Some(reason),
        }
    }

    fn skipped(err: &Error) -> Self {
        Cell::Skipped {
            reason: err.code().to_string(),
            message: err.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis_value: f64,
    /// One cell per method, in the order of `SweepResult::methods`.
    pub cells: Vec<Cell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub axis: SweepAxis,
    pub base: PopulationSpec,
    pub methods: Vec<MethodId>,
    #[serde(default)]
    pub options: SweepOptions,
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    /// The (axis value, result) pairs of one method, skipping gaps.
    pub fn series(&self, method: MethodId) -> Vec<(f64, MethodResult)> {
        let Some(col) = self.methods.iter().position(|m| *m == method) else {
            return Vec::new();
        };
        self.rows
            .iter()
            .filter_map(|row| row.cells[col].result().map(|r| (row.axis_value, *r)))
            .collect()
    }

    pub fn cell(&self, row: usize, method: MethodId) -> Option<&Cell> {
        let col = self.methods.iter().position(|m| *m == method)?;
        self.rows.get(row).map(|r| &r.cells[col])
    }
}

/// Evaluate one method at one population, applying the sweep's admissibility rules.
pub fn evaluate_point(
    spec: &PopulationSpec,
    method: MethodId,
    options: &SweepOptions,
) -> Result<MethodResult> {
    validate(spec).into_result()?;
    match method {
        MethodId::LcmHci | MethodId::LcmHciBar => {
            let context = if method == MethodId::LcmHci {
                BoundsContext::LcmHci
            } else {
                BoundsContext::LcmHciBar
            };
            if !is_jointly_feasible(spec, context) {
                return Err(Error::EmptyRegion(format!(
                    "(xi, eps) = ({}, {}) violates the {:?} constraint of {}",
                    spec.xi, spec.eps, context, method
                )));
            }
            lcm_method_result(spec, method, options.eta_source)
        }
        _ => evaluate(spec, method),
    }
}

fn evaluate_row(
    base: &PopulationSpec,
    axis: &SweepAxis,
    options: &SweepOptions,
    methods: &[MethodId],
    value: f64,
) -> SweepRow {
    let spec = point_spec(base, axis, options, value);
    let cells = methods
        .iter()
        .map(|m| match evaluate_point(&spec, *m, options) {
            Ok(result) => Cell::Ok { result },
            Err(err) => Cell::skipped(&err),
        })
        .collect();
    SweepRow {
        axis_value: value,
        cells,
    }
}

/// Sweep with default options, evaluating grid points in parallel.
pub fn sweep(base: &PopulationSpec, axis: &SweepAxis, methods: &[MethodId]) -> Result<SweepResult> {
    sweep_with(base, axis, methods, SweepOptions::default(), true)
}

pub fn sweep_with(
    base: &PopulationSpec,
    axis: &SweepAxis,
    methods: &[MethodId],
    options: SweepOptions,
    parallel: bool,
) -> Result<SweepResult> {
    validate(base).into_result()?;
    axis.check()?;
    if methods.is_empty() {
        return Err(Error::InvalidAxis("no methods selected".into()));
    }
    let rows = if parallel {
        (0..axis.points)
            .into_par_iter()
            .map(|i| evaluate_row(base, axis, &options, methods, axis.value(i)))
            .collect()
    } else {
        axis.values()
            .map(|v| evaluate_row(base, axis, &options, methods, v))
            .collect()
    };
    Ok(SweepResult {
        axis: *axis,
        base: *base,
        methods: methods.to_vec(),
        options,
        rows,
    })
}
