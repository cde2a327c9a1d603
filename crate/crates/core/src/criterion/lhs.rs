use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::quantum::Outcome;

use super::geometry::{PlanePoint, SymmetrizedRecord};
use super::record::GeometricRecord;

/// Residual accepted when checking a model against a record.
pub const MODEL_TOL: f64 = 1e-6;

/// Alice's announced outcome in the joint-measurement setting.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    /// The outcome attaining the maximal `<W>`.
    Winning,
    Other,
}

/// Deterministic answers of one hidden state to Alice's two settings.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct Response {
    pub ncs: Outcome,
    pub check: Branch,
}

impl Response {
    /// Role order used throughout: `H1 .. H4`.
    pub const ROLES: [Response; 4] = [
        Response { ncs: Outcome::Minus, check: Branch::Winning },
        Response { ncs: Outcome::Plus, check: Branch::Winning },
        Response { ncs: Outcome::Plus, check: Branch::Other },
        Response { ncs: Outcome::Minus, check: Branch::Other },
    ];
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HiddenState {
    pub point: PlanePoint,
    pub weight: f64,
    pub response: Response,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct WeightedPoint {
    pub probability: f64,
    pub point: PlanePoint,
}

/// Bob's conditional states as reproduced by a hidden-state model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConditionalPlane {
    /// `A`
    pub ncs_minus: WeightedPoint,
    /// `B`
    pub ncs_plus: WeightedPoint,
    /// `C`
    pub check_other: WeightedPoint,
    /// `D`
    pub check_win: WeightedPoint,
}

/// Local-hidden-state model restricted to the measurement plane.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LhsModel {
    pub hidden: Vec<HiddenState>,
}

impl LhsModel {
    /// Symmetric four-state model `(-x2, h3), (x2, h3), (x3, h4), (-x3, h4)`.
    pub fn symmetric(x2: f64, x3: f64, h3: f64, h4: f64, p_d: f64) -> Self {
        let p_c = 1.0 - p_d;
        let points = [
            (PlanePoint::new(-x2, h3), p_d / 2.0),
            (PlanePoint::new(x2, h3), p_d / 2.0),
            (PlanePoint::new(x3, h4), p_c / 2.0),
            (PlanePoint::new(-x3, h4), p_c / 2.0),
        ];
        LhsModel {
            hidden: points
                .iter()
                .zip(Response::ROLES)
                .map(|(&(point, weight), response)| HiddenState { point, weight, response })
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden.is_empty() {
            return Err(Error::InvalidModel("no hidden states".into()));
        }
        let mut total = 0.0;
        for h in &self.hidden {
            if !(h.weight >= -1e-12) {
                return Err(Error::InvalidModel(format!("negative weight {}", h.weight)));
            }
            if !(h.point.norm() <= 1.0 + 1e-9) {
                return Err(Error::InvalidModel(format!(
                    "hidden state outside the Bloch disk (norm {})",
                    h.point.norm()
                )));
            }
            total += h.weight;
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidModel(format!("weights sum to {total}")));
        }
        Ok(())
    }

    fn mass_center(&self, keep: impl Fn(&Response) -> bool) -> WeightedPoint {
        let mut p = 0.0;
        let mut acc = PlanePoint::default();
        for h in self.hidden.iter().filter(|h| keep(&h.response)) {
            p += h.weight;
            acc = acc.add(h.point.scale(h.weight));
        }
        let point = if p > 0.0 { acc.scale(1.0 / p) } else { acc };
        WeightedPoint { probability: p, point }
    }

    pub fn conditionals(&self) -> ConditionalPlane {
        ConditionalPlane {
            ncs_minus: self.mass_center(|r| r.ncs == Outcome::Minus),
            ncs_plus: self.mass_center(|r| r.ncs == Outcome::Plus),
            check_other: self.mass_center(|r| r.check == Branch::Other),
            check_win: self.mass_center(|r| r.check == Branch::Winning),
        }
    }

    /// Worst violation of the symmetric record's constraints.
    ///
    /// `B` must lie on `tau_N` and `A` on its mirror, each with probability 1/2;
    /// `C` and `D` must sit on the z-axis at `h4n`, `h3n` with `P_C`, `P_D`.
    pub fn symmetric_residual(&self, sym: &SymmetrizedRecord) -> f64 {
        let c = self.conditionals();
        [
            (c.ncs_plus.probability - 0.5).abs(),
            (c.ncs_minus.probability - 0.5).abs(),
            (c.ncs_plus.point.dot(sym.u()) - sym.r12).abs(),
            (c.ncs_minus.point.dot(sym.u_mirror()) - sym.r12).abs(),
            (c.check_win.probability - sym.p_d).abs(),
            (c.check_other.probability - sym.p_c).abs(),
            c.check_win.point.sub(PlanePoint::new(0.0, sym.h3n)).norm(),
            c.check_other.point.sub(PlanePoint::new(0.0, sym.h4n)).norm(),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    /// Worst violation of an unsymmetrized record's constraints.
    ///
    /// The record fixes the chords of `A`, `B`, the heights of `C`, `D`, and `P_C`, `P_D`.
    pub fn record_residual(&self, rec: &GeometricRecord) -> f64 {
        let c = self.conditionals();
        [
            (c.ncs_plus.point.dot(rec.u1()) - rec.r1).abs(),
            (c.ncs_minus.point.dot(rec.u2()) - rec.r2).abs(),
            (c.check_win.probability - rec.p_d).abs(),
            (c.check_other.probability - rec.p_c).abs(),
            (c.check_win.point.z - rec.h3).abs(),
            (c.check_other.point.z - rec.h4).abs(),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

fn grid(half_width: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![0.0];
    }
    let step = 2.0 * half_width / (n - 1) as f64;
    (0..n).map(|i| -half_width + step * i as f64).collect()
}

/// Brute-force search for a symmetric hidden-state model reproducing `sym`.
///
/// Scans `x2` in `[-a, a]` and `x3` in `[-b, b]` (`a`, `b` the half-widths of the
/// disk at heights `h3n`, `h4n`) on an `n x n` grid. A grid point is accepted when
/// `B` misses `tau_N` by at most `max(1e-6, half a grid step)`, since finer
/// agreement is not resolvable on the grid. Returns the first hit in
/// row-major order.
pub fn lhs_oracle(sym: &SymmetrizedRecord, n: usize) -> Option<LhsModel> {
    let a = (1.0 - sym.h3n * sym.h3n).max(0.0).sqrt();
    let b = (1.0 - sym.h4n * sym.h4n).max(0.0).sqrt();
    let xs2 = grid(a, n);
    let xs3 = grid(b, n);
    let (sin_g, cos_g) = sym.gamma.sin_cos();
    let z_b = sym.p_d * sym.h3n + sym.p_c * sym.h4n;
    let offset = z_b * cos_g - sym.r12;

    let spacing = |w: f64| if n < 2 { 0.0 } else { 2.0 * w / (n - 1) as f64 };
    let half_step = 0.5 * (sym.p_d * spacing(a)).max(sym.p_c * spacing(b));
    let tol = MODEL_TOL.max(half_step * sin_g.abs());

    let hit = (0..xs2.len()).into_par_iter().find_map_first(|i| {
        let s2 = sym.p_d * xs2[i];
        xs3.iter()
            .position(|&x3| ((s2 + sym.p_c * x3) * sin_g + offset).abs() <= tol)
            .map(|j| (i, j))
    })?;

    let model = LhsModel::symmetric(xs2[hit.0], xs3[hit.1], sym.h3n, sym.h4n, sym.p_d);
    if model.validate().is_ok() && model.symmetric_residual(sym) <= tol + 1e-12 {
        Some(model)
    } else {
        None
    }
}

/// Mirror-averages an LHS model of an unsymmetrized record.
///
/// Input: four hidden states carrying the roles of [`Response::ROLES`], reproducing
/// `rec`. Output, in role order:
///
/// ```text
/// H1' = (P1 H1 + P2 m(H2)) / P_D     H2' = m(H1')
/// H4' = (P4 H4 + P3 m(H3)) / P_C     H3' = m(H4')
/// ```
///
/// with `m` the reflection through the z-axis and weights `P_D/2, P_D/2, P_C/2, P_C/2`.
pub fn symmetrize_lhs_model(model: &LhsModel, rec: &GeometricRecord) -> Result<LhsModel> {
    model.validate()?;
    if model.hidden.len() != 4 {
        return Err(Error::InvalidModel(format!(
            "expected 4 hidden states, found {}",
            model.hidden.len()
        )));
    }
    let mut by_role = [None; 4];
    for h in &model.hidden {
        let k = Response::ROLES
            .iter()
            .position(|r| *r == h.response)
            .expect("every response is one of the four roles");
        if by_role[k].replace(*h).is_some() {
            return Err(Error::InvalidModel(format!("duplicate role {:?}", h.response)));
        }
    }
    let [h1, h2, h3, h4] = by_role.map(|h| h.expect("four distinct roles among four states"));

    let residual = model.record_residual(rec);
    if residual > MODEL_TOL {
        return Err(Error::InvalidModel(format!(
            "model does not reproduce the record (residual {residual:e})"
        )));
    }
    let p_d = h1.weight + h2.weight;
    let p_c = h3.weight + h4.weight;
    if p_d <= 0.0 || p_c <= 0.0 {
        return Err(Error::InvalidModel("a joint-measurement outcome has zero weight".into()));
    }

    let h1n = h1.point.scale(h1.weight).add(h2.point.mirror().scale(h2.weight)).scale(1.0 / p_d);
    let h4n = h4.point.scale(h4.weight).add(h3.point.mirror().scale(h3.weight)).scale(1.0 / p_c);
    let points = [
        (h1n, p_d / 2.0),
        (h1n.mirror(), p_d / 2.0),
        (h4n.mirror(), p_c / 2.0),
        (h4n, p_c / 2.0),
    ];
    Ok(LhsModel {
        hidden: points
            .iter()
            .zip(Response::ROLES)
            .map(|(&(point, weight), response)| HiddenState { point, weight, response })
            .collect(),
    })
}
