use std::f64::consts::{PI, TAU};

use serde::Serialize;

use crate::error::{Error, Result};

use super::record::GeometricRecord;

/// `|sin(gamma)|` at or below this makes the symmetric chord useless for locating B.
pub const GAMMA_DEGENERACY_TOL: f64 = 1e-6;
/// Default tolerance for B leaving the unit disk through rounding alone.
pub const DISK_SLACK: f64 = 1e-9;
/// Chord pairs closer than this in angle are treated as already symmetric.
const SAME_ANGLE_TOL: f64 = 1e-15;

/// Point `(x, z)` in the measurement plane.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct PlanePoint {
    pub x: f64,
    pub z: f64,
}

impl PlanePoint {
    pub const fn new(x: f64, z: f64) -> Self {
        PlanePoint { x, z }
    }

    /// Point at polar angle `a` from the z-axis on the unit circle.
    pub fn on_circle(a: f64) -> Self {
        let (s, c) = a.sin_cos();
        PlanePoint::new(s, c)
    }

    /// Reflection through the z-axis.
    pub fn mirror(self) -> Self {
        PlanePoint::new(-self.x, self.z)
    }

    pub fn dot(self, other: PlanePoint) -> f64 {
        self.x * other.x + self.z * other.z
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.z)
    }

    pub fn scale(self, k: f64) -> Self {
        PlanePoint::new(k * self.x, k * self.z)
    }

    pub fn add(self, other: PlanePoint) -> Self {
        PlanePoint::new(self.x + other.x, self.z + other.z)
    }

    pub fn sub(self, other: PlanePoint) -> Self {
        PlanePoint::new(self.x - other.x, self.z - other.z)
    }
}

/// Record after the two chords are replaced by one chord and its mirror image.
///
/// `tau_N = {p : p . (sin g, cos g) = r12}`; the mirrored chord uses `-sin g`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SymmetrizedRecord {
    pub r12: f64,
    pub gamma: f64,
    pub h3n: f64,
    pub h4n: f64,
    pub p_c: f64,
    pub p_d: f64,
    /// Largest amount by which an original chord endpoint falls outside the new cap.
    pub containment_violation: f64,
}

impl SymmetrizedRecord {
    pub fn new(r12: f64, gamma: f64, h3n: f64, h4n: f64, p_d: f64) -> Self {
        SymmetrizedRecord {
            r12,
            gamma,
            h3n,
            h4n,
            p_c: 1.0 - p_d,
            p_d,
            containment_violation: 0.0,
        }
    }

    pub fn u(&self) -> PlanePoint {
        PlanePoint::on_circle(self.gamma)
    }

    pub fn u_mirror(&self) -> PlanePoint {
        self.u().mirror()
    }
}

/// Arc `[center - half, center + half]` of the unit circle cut off by a chord.
fn cap_arc(angle: f64, r: f64) -> (f64, f64) {
    (angle, r.clamp(-1.0, 1.0).acos())
}

/// Replaces `tau1` and `tau2` by the smallest symmetric pair whose caps contain both.
///
/// `tau2` is mirrored to the positive side, and the merged arc spans both cap arcs.
/// The joint-measurement heights pass through unchanged because those
/// conditional states are already centred on the z-axis.
pub fn symmetrize(rec: &GeometricRecord) -> Result<SymmetrizedRecord> {
    let (a1, b1) = cap_arc(rec.gamma1, rec.r1);
    let (mut a2, b2) = cap_arc(rec.gamma2, rec.r2);
    // Keep the two arc centres on the same branch of the angle.
    a2 -= TAU * ((a2 - a1) / TAU).round();

    let (gamma, r12) = if (a1 - a2).abs() <= SAME_ANGLE_TOL {
        (a1, rec.r1.min(rec.r2))
    } else {
        let lo = (a1 - b1).min(a2 - b2);
        let hi = (a1 + b1).max(a2 + b2);
        let half = (hi - lo) / 2.0;
        let r12 = if half >= PI { -1.0 } else { half.cos() };
        ((lo + hi) / 2.0, r12)
    };
    if r12 <= 0.0 {
        return Err(Error::CapDegenerate(r12));
    }

    let u_n = PlanePoint::on_circle(gamma);
    let mut violation = 0.0_f64;
    for (a, b) in [(a1, b1), (a2, b2)] {
        for end in [a - b, a + b] {
            violation = violation.max(r12 - PlanePoint::on_circle(end).dot(u_n));
        }
    }

    Ok(SymmetrizedRecord {
        r12,
        gamma,
        h3n: rec.h3,
        h4n: rec.h4,
        p_c: rec.p_c,
        p_d: rec.p_d,
        containment_violation: violation.max(0.0),
    })
}

/// Plane points entering the criterion.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CriterionPoint {
    /// `|x_B| - x_G`; positive certifies steering.
    pub value: f64,
    /// Symmetric NCS point on `tau_N`, at the height of the check mass centre.
    pub b: PlanePoint,
    /// Mass centre of the extreme hidden-state points `E`, `F`.
    pub g: PlanePoint,
    pub e: PlanePoint,
    pub f: PlanePoint,
}

pub fn criterion_value(sym: &SymmetrizedRecord) -> Result<CriterionPoint> {
    criterion_value_with_slack(sym, DISK_SLACK)
}

/// As [`criterion_value`], tolerating `B` up to `slack` outside the unit disk.
///
/// Within the slack `|x_B|` is pulled back onto the circle, which can only lower the value.
pub fn criterion_value_with_slack(sym: &SymmetrizedRecord, slack: f64) -> Result<CriterionPoint> {
    let (sin_g, cos_g) = sym.gamma.sin_cos();
    if sin_g.abs() <= GAMMA_DEGENERACY_TOL {
        return Err(Error::DegenerateGamma(sin_g.abs()));
    }
    let e = PlanePoint::new((1.0 - sym.h3n * sym.h3n).max(0.0).sqrt(), sym.h3n);
    let f = PlanePoint::new((1.0 - sym.h4n * sym.h4n).max(0.0).sqrt(), sym.h4n);
    let g = e.scale(sym.p_d).add(f.scale(sym.p_c));

    let z_b = g.z;
    let mut x_b = (sym.r12 - z_b * cos_g) / sin_g;
    let excess = x_b.hypot(z_b) - 1.0;
    if excess > slack {
        return Err(Error::RecordInconsistent(excess));
    }
    if excess > 0.0 {
        x_b = x_b.signum() * (1.0 - z_b * z_b).max(0.0).sqrt();
    }
    let b = PlanePoint::new(x_b, z_b);

    Ok(CriterionPoint {
        value: x_b.abs() - g.x,
        b,
        g,
        e,
        f,
    })
}
