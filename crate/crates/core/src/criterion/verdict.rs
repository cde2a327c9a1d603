use serde::Serialize;

use crate::error::{Error, Result};

use super::geometry::{criterion_value_with_slack, symmetrize, DISK_SLACK};
use super::lhs::{lhs_oracle, LhsModel};
use super::record::GeometricRecord;
use super::DEFAULT_ORACLE_GRID;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DeltaPrimeOptions {
    /// Grid points per axis for the witness search; 0 skips it.
    pub oracle_grid: usize,
}

impl Default for DeltaPrimeOptions {
    fn default() -> Self {
        DeltaPrimeOptions { oracle_grid: DEFAULT_ORACLE_GRID }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SteeringVerdict {
    /// Criterion value at the nominal record.
    pub value: Option<f64>,
    /// Minimum over the error box.
    pub delta_prime: Option<f64>,
    pub steerable: bool,
    /// Explicit local model, searched for when the nominal value is not positive.
    pub witness: Option<LhsModel>,
    pub reason: &'static str,
}

impl SteeringVerdict {
    fn degenerate(value: Option<f64>, err: &Error) -> Self {
        SteeringVerdict {
            value,
            delta_prime: None,
            steerable: false,
            witness: None,
            reason: err.reason_code(),
        }
    }
}

pub fn delta_prime(rec: &GeometricRecord) -> SteeringVerdict {
    delta_prime_with(rec, &DeltaPrimeOptions::default())
}

const N_PARAMS: usize = 7;

fn params(rec: &GeometricRecord) -> ([f64; N_PARAMS], [f64; N_PARAMS]) {
    let e = &rec.err;
    (
        [rec.r1, rec.r2, rec.gamma1, rec.gamma2, rec.h3, rec.h4, rec.p_d],
        [e.r1, e.r2, e.gamma1, e.gamma2, e.h3, e.h4, e.p_d],
    )
}

fn perturbed(rec: &GeometricRecord, v: &[f64; N_PARAMS]) -> GeometricRecord {
    let p_d = v[6].clamp(0.0, 1.0);
    GeometricRecord {
        r1: v[0].clamp(-1.0, 1.0),
        r2: v[1].clamp(-1.0, 1.0),
        gamma1: v[2],
        gamma2: v[3],
        h3: v[4].clamp(-1.0, 1.0),
        h4: v[5].clamp(-1.0, 1.0),
        p_c: 1.0 - p_d,
        p_d,
        err: rec.err,
    }
}

/// How far `B` may move off the disk across the error box, plus rounding.
fn disk_slack(rec: &GeometricRecord, gamma: f64) -> f64 {
    let e = &rec.err;
    let shift_r = e.r1 + e.r2 + e.gamma1 + e.gamma2;
    let shift_z = e.h3 + e.h4 + 2.0 * e.p_d;
    let total = shift_r + shift_z;
    if total == 0.0 {
        return DISK_SLACK;
    }
    DISK_SLACK + (shift_r + shift_z) / gamma.sin().abs().max(1e-6) + shift_z
}

fn value_at(rec: &GeometricRecord, slack: f64) -> Result<f64> {
    let sym = symmetrize(rec)?;
    Ok(criterion_value_with_slack(&sym, slack)?.value)
}

/// Conservative steering verdict: the criterion minimized over the error box.
///
/// The box is sampled at its `2^7` corners and on the `3^7` grid of
/// `v - err/2, v, v + err/2`. Parameters are clamped to their physical ranges.
/// Any sampled point that hits a degenerate geometry forces "not steerable".
pub fn delta_prime_with(rec: &GeometricRecord, opts: &DeltaPrimeOptions) -> SteeringVerdict {
    if let Err(e) = rec.validate() {
        return SteeringVerdict::degenerate(None, &e);
    }
    let sym = match symmetrize(rec) {
        Ok(s) => s,
        Err(e) => return SteeringVerdict::degenerate(None, &e),
    };
    let slack = disk_slack(rec, sym.gamma);
    let nominal = match criterion_value_with_slack(&sym, slack) {
        Ok(cp) => cp.value,
        Err(e) => return SteeringVerdict::degenerate(None, &e),
    };

    let (v, err) = params(rec);
    let mut min = nominal;
    if err.iter().any(|&e| e > 0.0) {
        let corners = (0..1usize << N_PARAMS).map(|mask| {
            std::array::from_fn(|k| if mask >> k & 1 == 1 { v[k] + err[k] } else { v[k] - err[k] })
        });
        let interior = (0..3usize.pow(N_PARAMS as u32)).map(|code| {
            std::array::from_fn(|k| {
                let digit = (code / 3usize.pow(k as u32)) % 3;
                v[k] + (digit as f64 - 1.0) * 0.5 * err[k]
            })
        });
        for point in corners.chain(interior) {
            match value_at(&perturbed(rec, &point), slack) {
                Ok(x) => min = min.min(x),
                Err(e) => return SteeringVerdict::degenerate(Some(nominal), &e),
            }
        }
    }

    let steerable = min > 0.0;
    let witness = if nominal <= 0.0 && opts.oracle_grid > 0 {
        lhs_oracle(&sym, opts.oracle_grid)
    } else {
        None
    };
    SteeringVerdict {
        value: Some(nominal),
        delta_prime: Some(min),
        steerable,
        witness,
        reason: if steerable { "steerable" } else { "not-steerable" },
    }
}
