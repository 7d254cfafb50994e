use serde::{Deserialize, Serialize};

use super::{evaluate_point, point_spec, SweepResult};
use crate::methods::{MethodId, MethodResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    DeltaSe,
    DeltaSp,
    AbsDeltaSe,
    AbsDeltaSp,
}

impl Quantity {
    pub fn of(self, r: &MethodResult) -> f64 {
        match self {
            Quantity::DeltaSe => r.delta_se,
            Quantity::DeltaSp => r.delta_sp,
            Quantity::AbsDeltaSe => r.delta_se.abs(),
            Quantity::AbsDeltaSp => r.delta_sp.abs(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossover {
    pub method_a: MethodId,
    pub method_b: MethodId,
    pub axis_value: f64,
    pub quantity: Quantity,
    /// `q_a - q_b` at `axis_value`.
    pub residual: f64,
}

const RESIDUAL_TOL: f64 = 1e-9;
const WIDTH_TOL: f64 = 1e-13;
const MAX_STEPS: usize = 200;

/// Crossovers between every pair of methods in the sweep.
pub fn find_crossovers(result: &SweepResult, quantity: Quantity) -> Vec<Crossover> {
    let mut out = Vec::new();
    for (i, a) in result.methods.iter().enumerate() {
        for b in &result.methods[i + 1..] {
            out.extend(find_pair_crossovers(result, quantity, *a, *b));
        }
    }
    out
}

/// Sign changes of `q_a - q_b` between adjacent grid points, refined by
/// bisection on freshly evaluated populations.
pub fn find_pair_crossovers(
    result: &SweepResult,
    quantity: Quantity,
    method_a: MethodId,
    method_b: MethodId,
) -> Vec<Crossover> {
    if method_a == method_b {
        return Vec::new();
    }
    let (Some(col_a), Some(col_b)) = (
        result.methods.iter().position(|m| *m == method_a),
        result.methods.iter().position(|m| *m == method_b),
    ) else {
        return Vec::new();
    };

    let diff_at = |x: f64| -> Option<f64> {
        let spec = point_spec(&result.base, &result.axis, &result.options, x);
        let a = evaluate_point(&spec, method_a, &result.options).ok()?;
        let b = evaluate_point(&spec, method_b, &result.options).ok()?;
        Some(quantity.of(&a) - quantity.of(&b))
    };
    let make = |axis_value: f64, residual: f64| Crossover {
        method_a,
        method_b,
        axis_value,
        quantity,
        residual,
    };

    let grid: Vec<Option<(f64, f64)>> = result
        .rows
        .iter()
        .map(|row| {
            let a = row.cells[col_a].result()?;
            let b = row.cells[col_b].result()?;
            Some((row.axis_value, quantity.of(a) - quantity.of(b)))
        })
        .collect();

    scan(&grid, &diff_at)
        .into_iter()
        .map(|(x, r)| make(x, r))
        .collect()
}

/// A sign change of one method's quantity along the axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZeroCrossing {
    pub method: MethodId,
    pub axis_value: f64,
    pub quantity: Quantity,
    /// The quantity at `axis_value`.
    pub residual: f64,
}

/// Sign changes of a single method's quantity, refined like crossovers.
pub fn find_zero_crossings(
    result: &SweepResult,
    quantity: Quantity,
    method: MethodId,
) -> Vec<ZeroCrossing> {
    let Some(col) = result.methods.iter().position(|m| *m == method) else {
        return Vec::new();
    };
    let value_at = |x: f64| -> Option<f64> {
        let spec = point_spec(&result.base, &result.axis, &result.options, x);
        evaluate_point(&spec, method, &result.options)
            .ok()
            .map(|r| quantity.of(&r))
    };
    let grid: Vec<Option<(f64, f64)>> = result
        .rows
        .iter()
        .map(|row| {
            row.cells[col]
                .result()
                .map(|r| (row.axis_value, quantity.of(r)))
        })
        .collect();
    let make = |axis_value: f64, residual: f64| ZeroCrossing {
        method,
        axis_value,
        quantity,
        residual,
    };

    scan(&grid, &value_at)
        .into_iter()
        .map(|(x, r)| make(x, r))
        .collect()
}

/// Exact zeros on the grid, plus one refined root per bracketed sign change.
fn scan(grid: &[Option<(f64, f64)>], f: &impl Fn(f64) -> Option<f64>) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for (i, point) in grid.iter().enumerate() {
        let Some((x0, y0)) = *point else { continue };
        if y0 == 0.0 {
            // a grid zero is reported once, not again from the next bracket
            out.push((x0, 0.0));
            continue;
        }
        let Some(Some((x1, y1))) = grid.get(i + 1).copied() else {
            continue;
        };
        if y1 == 0.0 || y0.signum() == y1.signum() {
            continue;
        }
        if let Some(root) = refine(f, x0, y0, x1) {
            out.push(root);
        }
    }
    out
}

fn refine(
    f: &impl Fn(f64) -> Option<f64>,
    mut lo: f64,
    mut f_lo: f64,
    mut hi: f64,
) -> Option<(f64, f64)> {
    let mut best: Option<(f64, f64)> = None;
    for _ in 0..MAX_STEPS {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid)?;
        if best.is_none_or(|(_, r)| fm.abs() < r.abs()) {
            best = Some((mid, fm));
        }
        if (fm.abs() < RESIDUAL_TOL && hi - lo < 1e-6) || fm == 0.0 || hi - lo < WIDTH_TOL {
            break;
        }
        if fm.signum() == f_lo.signum() {
            lo = mid;
            f_lo = fm;
        } else {
            hi = mid;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::population::PopulationSpec;
    use crate::sweep::{sweep, SweepAxis, SweepParam};

    #[test]
    fn igs_and_crs_or_cross_on_unlinked_se_z1() {
        let axis = SweepAxis::new(SweepParam::SeZ1, 0.3, 0.9, 61);
        let r = sweep(
            &PopulationSpec::baseline(),
            &axis,
            &[MethodId::Igs, MethodId::CrsOr],
        )
        .unwrap();
        let c = find_crossovers(&r, Quantity::DeltaSe);
        assert_eq!(c.len(), 1);
        assert!(c[0].residual.abs() < 1e-9);
        assert!(c[0].axis_value > 0.3 && c[0].axis_value < 0.4);
    }

    #[test]
    fn same_method_never_crosses() {
        let axis = SweepAxis::new(SweepParam::Eta, 0.05, 0.3, 11);
        let r = sweep(&PopulationSpec::baseline(), &axis, &[MethodId::Da]).unwrap();
        assert!(find_pair_crossovers(&r, Quantity::DeltaSp, MethodId::Da, MethodId::Da).is_empty());
    }
}
