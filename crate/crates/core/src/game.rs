//! The four-step steering game: NCS verification, the joint-operator scan,
//! the LHS bound `C_LHS`, and the gap `Delta = <W>_max - C_LHS`.

use std::f64::consts::{PI, TAU};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::optimize::golden_section_maximize;
use crate::quantum::{
    bloch_components, conditional_state, partial_trace_a, unnormalized_conditional, Direction,
    Mat2, Outcome, QubitState, TwoQubitState, C64,
};

pub const DEFAULT_SCAN_RESOLUTION: usize = 721;
/// Grid points for phi_B when the state forces an azimuthal scan.
pub const PHI_SCAN_RESOLUTION: usize = 72;
/// Imaginary entries above this switch on the phi_B scan.
pub const IMAGINARY_TOL: f64 = 1e-10;
/// Candidates must beat the incumbent by more than this to win a tie.
pub const TIE_TOL: f64 = 1e-12;
const ANGLE_TOL: f64 = 1e-10;
const MAX_REFINE_ROUNDS: usize = 100;

/// Alice's two settings and the pure states she announces for the first one.
#[derive(Clone, Debug)]
pub struct GameSettings {
    ncs_direction: Direction,
    check_direction: Direction,
    expected_ncs_plus: QubitState,
    expected_ncs_minus: QubitState,
    scan_resolution: usize,
}

impl GameSettings {
    pub fn new(
        ncs_direction: Direction,
        check_direction: Direction,
        expected_ncs_plus: QubitState,
        expected_ncs_minus: QubitState,
        scan_resolution: usize,
    ) -> Result<Self> {
        let overlap = ncs_direction.dot(&check_direction);
        if overlap.abs() > 1e-9 {
            return Err(Error::InvalidSettings(format!(
                "n and n_perp are not orthogonal (n . n_perp = {overlap:e})"
            )));
        }
        for (name, target) in [("plus", &expected_ncs_plus), ("minus", &expected_ncs_minus)] {
            let purity = target.purity();
            if purity < 1.0 - 1e-9 {
                return Err(Error::InvalidSettings(format!(
                    "expected NCS ({name}) is not pure (purity {purity})"
                )));
            }
        }
        if scan_resolution == 0 {
            return Err(Error::InvalidSettings("scan resolution must be positive".into()));
        }
        Ok(GameSettings {
            ncs_direction,
            check_direction,
            expected_ncs_plus,
            expected_ncs_minus,
            scan_resolution,
        })
    }

    /// rho1 protocol: Alice checks NCS along x, expecting `cos(theta)|H> +- sin(theta)|V>`,
    /// and runs the joint measurement along z.
    pub fn for_rho1(theta: f64) -> Self {
        GameSettings::new(
            Direction::x(),
            Direction::z(),
            QubitState::real_ket(theta),
            QubitState::real_ket(-theta),
            DEFAULT_SCAN_RESOLUTION,
        )
        .expect("fixed rho1 settings are valid")
    }

    /// rho2 protocol: NCS along z expecting `|H>` and `|V>`, joint measurement along x.
    pub fn for_rho2() -> Self {
        GameSettings::new(
            Direction::z(),
            Direction::x(),
            QubitState::real_ket(0.0),
            QubitState::real_ket(PI / 2.0),
            DEFAULT_SCAN_RESOLUTION,
        )
        .expect("fixed rho2 settings are valid")
    }

    pub fn with_scan_resolution(mut self, scan_resolution: usize) -> Result<Self> {
        if scan_resolution == 0 {
            return Err(Error::InvalidSettings("scan resolution must be positive".into()));
        }
        self.scan_resolution = scan_resolution;
        Ok(self)
    }

    pub fn ncs_direction(&self) -> &Direction {
        &self.ncs_direction
    }

    pub fn check_direction(&self) -> &Direction {
        &self.check_direction
    }

    pub fn expected_ncs(&self, outcome: Outcome) -> &QubitState {
        match outcome {
            Outcome::Plus => &self.expected_ncs_plus,
            Outcome::Minus => &self.expected_ncs_minus,
        }
    }

    pub fn scan_resolution(&self) -> usize {
        self.scan_resolution
    }
}

/// Detector D1/D2 probabilities for both of Alice's outcomes along `n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NcsProbabilities {
    pub p_plus: f64,
    pub p_plus_err: f64,
    pub p_minus: f64,
    pub p_minus_err: f64,
}

/// Result of maximizing `<W>` over Alice's `n_perp` outcome and Bob's axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct JointMaximum {
    pub w_max: f64,
    pub theta_b: f64,
    pub phi_b: f64,
    pub outcome: Outcome,
    /// Alice marginal of the winning outcome.
    pub p_d: f64,
    /// `<W'>` for the other outcome at the same Bob axis.
    pub w_other: f64,
}

/// `<W>_max`, `C_LHS` and their difference, without the NCS step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SteeringGap {
    pub joint: JointMaximum,
    pub c_lhs: f64,
    pub delta: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GameTranscript {
    pub p_plus: f64,
    pub p_minus: f64,
    pub p_plus_err: f64,
    pub p_minus_err: f64,
    pub w_max: f64,
    pub theta_b_star: f64,
    pub phi_b_star: f64,
    pub alice_outcome_star: Outcome,
    pub p_d: f64,
    pub w_other: f64,
    pub c_lhs: f64,
    pub delta: f64,
}

impl GameTranscript {
    pub fn from_parts(ncs: NcsProbabilities, gap: SteeringGap) -> Self {
        GameTranscript {
            p_plus: ncs.p_plus,
            p_minus: ncs.p_minus,
            p_plus_err: ncs.p_plus_err,
            p_minus_err: ncs.p_minus_err,
            w_max: gap.joint.w_max,
            theta_b_star: gap.joint.theta_b,
            phi_b_star: gap.joint.phi_b,
            alice_outcome_star: gap.joint.outcome,
            p_d: gap.joint.p_d,
            w_other: gap.joint.w_other,
            c_lhs: gap.c_lhs,
            delta: gap.joint.w_max - gap.c_lhs,
        }
    }

    pub fn ncs(&self) -> NcsProbabilities {
        NcsProbabilities {
            p_plus: self.p_plus,
            p_plus_err: self.p_plus_err,
            p_minus: self.p_minus,
            p_minus_err: self.p_minus_err,
        }
    }
}

/// Bob's analyzer state `cos(theta_b/2)|0> + sin(theta_b/2) e^{i phi_b}|1>` as a ket.
fn bob_ket(theta_b: f64, phi_b: f64) -> (f64, C64) {
    let (s, co) = (theta_b / 2.0).sin_cos();
    (co, C64::from_polar(s, phi_b))
}

/// `<n_B| m |n_B>` for a Hermitian 2x2 operator.
pub fn bob_expectation(m: &Mat2, theta_b: f64, phi_b: f64) -> f64 {
    let (a, b) = bob_ket(theta_b, phi_b);
    let value = m[(0, 0)] * a * a
        + m[(0, 1)] * b * a
        + m[(1, 0)] * b.conj() * a
        + m[(1, 1)] * b.norm_sqr();
    value.re
}

pub fn verify_ncs(rho: &TwoQubitState, s: &GameSettings) -> Result<NcsProbabilities> {
    let success = |outcome: Outcome| -> Result<f64> {
        let (_, bob) = conditional_state(rho, s.ncs_direction(), outcome)?;
        Ok(bob.overlap(s.expected_ncs(outcome)).clamp(0.0, 1.0))
    };
    let p_plus = success(Outcome::Plus)?;
    let p_minus = success(Outcome::Minus)?;
    Ok(NcsProbabilities {
        p_plus,
        p_plus_err: 1.0 - p_plus,
        p_minus,
        p_minus_err: 1.0 - p_minus,
    })
}

/// `Tr[rho (Pi_{n_perp, outcome} (x) |n_B><n_B|)]`.
pub fn w_expectation(
    rho: &TwoQubitState,
    s: &GameSettings,
    alice_outcome: Outcome,
    theta_b: f64,
    phi_b: f64,
) -> f64 {
    let tilde = unnormalized_conditional(rho, s.check_direction(), alice_outcome);
    bob_expectation(&tilde, theta_b, phi_b)
}

#[derive(Clone, Copy, Debug)]
struct AxisMaximum {
    theta: f64,
    phi: f64,
    value: f64,
}

fn grid(n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |k| TAU * k as f64 / n as f64)
}

/// Grid search plus golden-section refinement of `<n_B| m |n_B>`.
fn maximize_bob_axis(m: &Mat2, resolution: usize, scan_phi: bool) -> AxisMaximum {
    let phi_points = if scan_phi { PHI_SCAN_RESOLUTION } else { 1 };
    let mut best = AxisMaximum {
        theta: 0.0,
        phi: 0.0,
        value: f64::NEG_INFINITY,
    };
    for theta in grid(resolution) {
        for phi in grid(phi_points) {
            let value = bob_expectation(m, theta, phi);
            if value > best.value + TIE_TOL || best.value == f64::NEG_INFINITY {
                best = AxisMaximum { theta, phi, value };
            }
        }
    }

    let theta_half = TAU / resolution as f64;
    let phi_half = TAU / phi_points as f64;
    let mut refined = best;
    for _ in 0..MAX_REFINE_ROUNDS {
        let before = refined.value;
        let (theta, value) = golden_section_maximize(
            |t| bob_expectation(m, t, refined.phi),
            refined.theta - theta_half,
            refined.theta + theta_half,
            ANGLE_TOL,
        );
        if value > refined.value {
            refined.theta = theta;
            refined.value = value;
        }
        if scan_phi {
            let (phi, value) = golden_section_maximize(
                |p| bob_expectation(m, refined.theta, p),
                refined.phi - phi_half,
                refined.phi + phi_half,
                ANGLE_TOL,
            );
            if value > refined.value {
                refined.phi = phi;
                refined.value = value;
            }
        }
        if !scan_phi || refined.value - before <= 1e-15 {
            break;
        }
    }

    // Keep the grid point unless refinement beats it beyond rounding.
    if refined.value > best.value + 4.0 * f64::EPSILON * best.value.abs().max(1.0) {
        AxisMaximum {
            theta: refined.theta.rem_euclid(TAU),
            phi: refined.phi.rem_euclid(TAU),
            value: refined.value,
        }
    } else {
        best
    }
}

pub fn maximize_w(rho: &TwoQubitState, s: &GameSettings) -> JointMaximum {
    let scan_phi = rho.has_imaginary_coherence(IMAGINARY_TOL);
    let tildes = Outcome::BOTH.map(|o| unnormalized_conditional(rho, s.check_direction(), o));

    let mut winner: Option<(Outcome, AxisMaximum)> = None;
    for (outcome, tilde) in Outcome::BOTH.into_iter().zip(tildes.iter()) {
        let candidate = maximize_bob_axis(tilde, s.scan_resolution(), scan_phi);
        let better = match &winner {
            None => true,
            Some((_, incumbent)) => candidate.value > incumbent.value + TIE_TOL,
        };
        if better {
            winner = Some((outcome, candidate));
        }
    }
    let (outcome, axis) = winner.expect("two outcomes scanned");
    let other = &tildes[outcome.other().index()];
    JointMaximum {
        w_max: axis.value,
        theta_b: axis.theta,
        phi_b: axis.phi,
        outcome,
        p_d: tildes[outcome.index()].trace().re,
        w_other: bob_expectation(other, axis.theta, axis.phi),
    }
}

/// `C_LHS` by scanning Bob's axis: `max_n Tr[rho (1/2 (x) |n><n|)]`.
pub fn c_lhs(rho: &TwoQubitState, s: &GameSettings) -> f64 {
    let half_bob = partial_trace_a(rho).matrix().scale(0.5);
    let scan_phi = rho.has_imaginary_coherence(IMAGINARY_TOL);
    maximize_bob_axis(&half_bob, s.scan_resolution(), scan_phi).value
}

/// `C_LHS = (1 + |r_Bob|) / 4` from Bob's reduced Bloch vector.
pub fn c_lhs_closed_form(rho: &TwoQubitState) -> f64 {
    let (_, r) = bloch_components(partial_trace_a(rho).matrix());
    let norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
    (1.0 + norm) / 4.0
}

pub fn steering_gap(rho: &TwoQubitState, s: &GameSettings) -> SteeringGap {
    let joint = maximize_w(rho, s);
    let c_lhs = c_lhs(rho, s);
    SteeringGap {
        joint,
        c_lhs,
        delta: joint.w_max - c_lhs,
    }
}

/// Runs all four steps. Fails when either NCS outcome never occurs.
pub fn play_game(rho: &TwoQubitState, s: &GameSettings) -> Result<GameTranscript> {
    let ncs = verify_ncs(rho, s)?;
    Ok(GameTranscript::from_parts(ncs, steering_gap(rho, s)))
}

/// Closed-form `(C_LHS, <W>_max)` for rho1 with the x/z protocol, `theta` in `[0, pi/2]`.
pub fn analytic_rho1(theta: f64, eta: f64) -> (f64, f64) {
    let c = (1.0 + (2.0 * theta).cos().abs()) / 4.0;
    let weight = 0.5 + (0.5 - eta).abs();
    let w_max = if theta <= PI / 4.0 {
        weight * theta.cos().powi(2)
    } else {
        weight * theta.sin().powi(2)
    };
    (c, w_max)
}

/// One branch of the rho2 curve: `eta/2 cos^2(theta + sign theta_b/2) + (1 - eta)/4`.
pub fn analytic_rho2_branch(theta: f64, eta: f64, theta_b: f64, sign: f64) -> f64 {
    eta / 2.0 * (theta + sign * theta_b / 2.0).cos().powi(2) + (1.0 - eta) / 4.0
}

/// Closed-form `(<W>(theta_b), C_LHS)` for rho2 with the z/x protocol, larger branch.
pub fn analytic_rho2(theta: f64, eta: f64, theta_b: f64) -> (f64, f64) {
    let curve = analytic_rho2_branch(theta, eta, theta_b, 1.0)
        .max(analytic_rho2_branch(theta, eta, theta_b, -1.0));
    (curve, (1.0 + eta * (2.0 * theta).cos().abs()) / 4.0)
}
