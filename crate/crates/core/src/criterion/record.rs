use serde::Serialize;

use crate::error::{Error, Result};
use crate::game::{GameSettings, GameTranscript};
use crate::quantum::{bloch_of, conditional_state, Outcome, TwoQubitState};

use super::geometry::PlanePoint;

/// Conditional states whose plane coordinates leave the plane by more than this are rejected.
pub const COPLANARITY_TOL: f64 = 1e-6;
/// Joint-measurement marginals below this cannot be conditioned on.
pub const MIN_SETTING_MARGINAL: f64 = 1e-9;

/// One-sigma uncertainties of a [`GeometricRecord`]. `p_c` shares the `p_d` error.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct RecordErrors {
    pub r1: f64,
    pub r2: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub h3: f64,
    pub h4: f64,
    pub p_d: f64,
}

/// Measured plane geometry feeding the `Delta'` criterion.
///
/// Chord `tau1` is `{p : p . (sin g1, cos g1) = r1}`, chord `tau2` is
/// `{p : p . (-sin g2, cos g2) = r2}`; `h3`, `h4` are z-projections of the
/// winning and other conditional states of the joint-measurement setting.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GeometricRecord {
    pub r1: f64,
    pub r2: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub h3: f64,
    pub h4: f64,
    pub p_c: f64,
    pub p_d: f64,
    pub err: RecordErrors,
}

impl GeometricRecord {
    /// Record with zero error bars.
    pub fn exact(r1: f64, r2: f64, gamma1: f64, gamma2: f64, h3: f64, h4: f64, p_d: f64) -> Self {
        GeometricRecord {
            r1,
            r2,
            gamma1,
            gamma2,
            h3,
            h4,
            p_c: 1.0 - p_d,
            p_d,
            err: RecordErrors::default(),
        }
    }

    pub fn with_errors(mut self, err: RecordErrors) -> Self {
        self.err = err;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let tol = 1.0 + 1e-9;
        for (name, v) in [("r1", self.r1), ("r2", self.r2), ("h3", self.h3), ("h4", self.h4)] {
            if !v.is_finite() || v.abs() > tol {
                return Err(Error::Domain {
                    what: name,
                    value: v,
                    domain: "[-1, 1]",
                });
            }
        }
        if !(self.gamma1.is_finite() && self.gamma2.is_finite()) {
            return Err(Error::Domain {
                what: "gamma",
                value: f64::NAN,
                domain: "finite angle",
            });
        }
        if (self.p_c + self.p_d - 1.0).abs() > 1e-9 || !(-1e-9..=tol).contains(&self.p_d) {
            return Err(Error::Domain {
                what: "p_d",
                value: self.p_d,
                domain: "[0, 1] with p_c + p_d = 1",
            });
        }
        let e = &self.err;
        for v in [e.r1, e.r2, e.gamma1, e.gamma2, e.h3, e.h4, e.p_d] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Domain {
                    what: "error bar",
                    value: v,
                    domain: "[0, inf)",
                });
            }
        }
        Ok(())
    }

    /// Unit normal of `tau1`.
    pub fn u1(&self) -> PlanePoint {
        PlanePoint::new(self.gamma1.sin(), self.gamma1.cos())
    }

    /// Unit normal of `tau2`.
    pub fn u2(&self) -> PlanePoint {
        PlanePoint::new(-self.gamma2.sin(), self.gamma2.cos())
    }
}

/// Orthonormal plane frame: z along Bob's analyzer, y normal to the plane.
struct PlaneFrame {
    x: [f64; 3],
    y: [f64; 3],
    z: [f64; 3],
}

impl PlaneFrame {
    fn new(theta_b: f64, phi_b: f64) -> Self {
        let (st, ct) = theta_b.sin_cos();
        let (sp, cp) = phi_b.sin_cos();
        PlaneFrame {
            x: [ct * cp, ct * sp, -st],
            y: [-sp, cp, 0.0],
            z: [st * cp, st * sp, ct],
        }
    }

    fn project(&self, v: [f64; 3]) -> (f64, f64, f64) {
        let dot = |a: [f64; 3]| a[0] * v[0] + a[1] * v[1] + a[2] * v[2];
        (dot(self.x), dot(self.y), dot(self.z))
    }
}

/// Maps the game onto plane geometry. Error bars start at zero.
pub fn build_geometric_record(
    rho: &TwoQubitState,
    transcript: &GameTranscript,
    s: &GameSettings,
) -> Result<GeometricRecord> {
    let m1_bloch = bloch_of(s.expected_ncs(Outcome::Plus)).to_array();
    let theta_b = transcript.theta_b_star;
    // At the poles the azimuth is free; turn the plane to contain M1.
    let phi_b = if theta_b.sin().abs() < 1e-9 && m1_bloch[0].hypot(m1_bloch[1]) > 1e-9 {
        m1_bloch[1].atan2(m1_bloch[0])
    } else {
        transcript.phi_b_star
    };
    let frame = PlaneFrame::new(theta_b, phi_b);

    let mut worst_y = 0.0_f64;
    for direction in [s.ncs_direction(), s.check_direction()] {
        for outcome in Outcome::BOTH {
            // Outcomes that never occur have no conditional state to place.
            if let Ok((_, bob)) = conditional_state(rho, direction, outcome) {
                worst_y = worst_y.max(frame.project(bloch_of(&bob).to_array()).1.abs());
            }
        }
    }
    let m1 = frame.project(m1_bloch);
    let m2 = frame.project(bloch_of(s.expected_ncs(Outcome::Minus)).to_array());
    worst_y = worst_y.max(m1.1.abs()).max(m2.1.abs());
    if worst_y >= COPLANARITY_TOL {
        return Err(Error::OutOfPlane(worst_y));
    }

    // Orient x so that M1 sits on the positive side.
    let flip = if m1.0.abs() > 1e-12 { m1.0 < 0.0 } else { m2.0 > 0.0 };
    let sx = if flip { -1.0 } else { 1.0 };
    let gamma1 = (sx * m1.0).atan2(m1.2);
    let gamma2 = (-sx * m2.0).atan2(m2.2);

    let p_d = transcript.p_d;
    let p_c = 1.0 - p_d;
    if p_d.min(p_c) < MIN_SETTING_MARGINAL {
        return Err(Error::DegenerateSetting(p_d.min(p_c)));
    }
    let h3 = (2.0 * transcript.w_max / p_d - 1.0).clamp(-1.0, 1.0);
    let h4 = (2.0 * transcript.w_other / p_c - 1.0).clamp(-1.0, 1.0);

    let record = GeometricRecord {
        r1: 1.0 - 2.0 * transcript.p_plus_err,
        r2: 1.0 - 2.0 * transcript.p_minus_err,
        gamma1,
        gamma2,
        h3,
        h4,
        p_c,
        p_d,
        err: RecordErrors::default(),
    };
    record.validate()?;
    Ok(record)
}
