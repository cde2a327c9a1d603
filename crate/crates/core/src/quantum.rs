//! Exact linear algebra for one and two qubits.
//!
//! Two-qubit matrices use the basis order `(HH, HV, VH, VV)` with `H = |0>`,
//! `V = |1>`, and Alice's qubit first, so the index of `|a b>` is `2a + b`.

use nalgebra::{DMatrix, Matrix2, Matrix4, Vector2, Vector4};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type Mat2 = Matrix2<C64>;
pub type Mat4 = Matrix4<C64>;

pub const HERMITIAN_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-10;
pub const EIGEN_FLOOR: f64 = -1e-10;
pub const UNIT_TOL: f64 = 1e-12;
pub const BLOCH_TOL: f64 = 1e-9;
/// Outcomes rarer than this have no normalizable conditional state.
pub const MIN_OUTCOME_PROBABILITY: f64 = 1e-12;

pub const HH: usize = 0;
pub const HV: usize = 1;
pub const VH: usize = 2;
pub const VV: usize = 3;

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn pauli_x() -> Mat2 {
    Mat2::new(c(0.0), c(1.0), c(1.0), c(0.0))
}

pub fn pauli_y() -> Mat2 {
    Mat2::new(c(0.0), C64::new(0.0, -1.0), C64::new(0.0, 1.0), c(0.0))
}

pub fn pauli_z() -> Mat2 {
    Mat2::new(c(1.0), c(0.0), c(0.0), c(-1.0))
}

pub fn kron(a: &Mat2, b: &Mat2) -> Mat4 {
    Mat4::from_fn(|i, j| a[(i / 2, j / 2)] * b[(i % 2, j % 2)])
}

fn max_antihermitian<const N: usize>(m: &nalgebra::SMatrix<C64, N, N>) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..N {
        for j in 0..N {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Eigenvalues (ascending) and eigenvectors of a Hermitian matrix.
pub(crate) fn hermitian_eigen(m: DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let eig = m.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |r, k| {
        eig.eigenvectors[(r, order[k])]
    });
    (values, vectors)
}

/// Checks the density-matrix invariants and removes rounding-level negativity.
fn validate_density<const N: usize>(
    m: nalgebra::SMatrix<C64, N, N>,
) -> Result<nalgebra::SMatrix<C64, N, N>> {
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::InvalidState("non-finite entry".into()));
    }
    let skew = max_antihermitian(&m);
    if skew > HERMITIAN_TOL {
        return Err(Error::InvalidState(format!("not Hermitian (deviation {skew:e})")));
    }
    let m = (m + m.adjoint()).scale(0.5);
    let trace = m.trace().re;
    if (trace - 1.0).abs() > TRACE_TOL {
        return Err(Error::InvalidState(format!("trace {trace} != 1")));
    }
    let (values, vectors) = hermitian_eigen(DMatrix::from_iterator(N, N, m.iter().copied()));
    let lowest = values[0];
    if lowest < EIGEN_FLOOR {
        return Err(Error::InvalidState(format!("negative eigenvalue {lowest:e}")));
    }
    if lowest >= 0.0 {
        return Ok(m);
    }
    let clamped: Vec<f64> = values.iter().map(|v| v.max(0.0)).collect();
    let total: f64 = clamped.iter().sum();
    let rebuilt = nalgebra::SMatrix::<C64, N, N>::from_fn(|i, j| {
        (0..N)
            .map(|k| vectors[(i, k)] * vectors[(j, k)].conj() * (clamped[k] / total))
            .sum()
    });
    Ok(rebuilt)
}

/// Alice's or Bob's dichotomic outcome.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Plus,
    Minus,
}

impl Outcome {
    pub const BOTH: [Outcome; 2] = [Outcome::Plus, Outcome::Minus];

    pub fn sign(self) -> f64 {
        match self {
            Outcome::Plus => 1.0,
            Outcome::Minus => -1.0,
        }
    }

    pub fn other(self) -> Outcome {
        match self {
            Outcome::Plus => Outcome::Minus,
            Outcome::Minus => Outcome::Plus,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Outcome::Plus => 0,
            Outcome::Minus => 1,
        }
    }
}

/// Unit 3-vector: a measurement axis on the Bloch sphere.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Direction([f64; 3]);

impl Direction {
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        let norm = (x * x + y * y + z * z).sqrt();
        if !norm.is_finite() || (norm - 1.0).abs() > UNIT_TOL {
            return Err(Error::NotUnit(norm));
        }
        Ok(Direction([x, y, z]))
    }

    /// Rescales a nonzero vector onto the unit sphere.
    pub fn normalized(x: f64, y: f64, z: f64) -> Result<Self> {
        let norm = (x * x + y * y + z * z).sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::NotUnit(norm));
        }
        Ok(Direction([x / norm, y / norm, z / norm]))
    }

    pub fn x() -> Self {
        Direction([1.0, 0.0, 0.0])
    }

    pub fn y() -> Self {
        Direction([0.0, 1.0, 0.0])
    }

    pub fn z() -> Self {
        Direction([0.0, 0.0, 1.0])
    }

    /// Bloch axis of `cos(theta/2)|0> + sin(theta/2) e^{i phi}|1>`.
    pub fn from_angles(theta: f64, phi: f64) -> Self {
        Direction([theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()])
    }

    pub fn components(&self) -> [f64; 3] {
        self.0
    }

    pub fn dot(&self, other: &Direction) -> f64 {
        self.0.iter().zip(other.0.iter()).map(|(a, b)| a * b).sum()
    }

    pub fn sigma(&self) -> Mat2 {
        let [x, y, z] = self.0;
        pauli_x().scale(x) + pauli_y().scale(y) + pauli_z().scale(z)
    }

    /// Projector onto the `outcome` eigenspace of `n . sigma`.
    pub fn projector(&self, outcome: Outcome) -> Mat2 {
        (Mat2::identity() + self.sigma().scale(outcome.sign())).scale(0.5)
    }
}

/// Real 3-vector in the closed unit ball.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlochVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl BlochVector {
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        let v = BlochVector { x, y, z };
        let norm = v.norm();
        if !norm.is_finite() || norm > 1.0 + BLOCH_TOL {
            return Err(Error::OutsideBlochBall(norm));
        }
        Ok(v)
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn dot(&self, d: &Direction) -> f64 {
        let [x, y, z] = d.components();
        self.x * x + self.y * y + self.z * z
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

/// Single-qubit density matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct QubitState(Mat2);

impl QubitState {
    pub fn new(matrix: Mat2) -> Result<Self> {
        validate_density(matrix).map(QubitState)
    }

    /// Pure state `alpha|0> + beta|1>`, normalized.
    pub fn from_ket(alpha: C64, beta: C64) -> Result<Self> {
        let ket = Vector2::new(alpha, beta);
        let norm = ket.norm();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::InvalidState("zero ket".into()));
        }
        let ket = ket.unscale(norm);
        Ok(QubitState(ket * ket.adjoint()))
    }

    /// `cos(theta)|H> + sin(theta)|V>`.
    pub fn real_ket(theta: f64) -> Self {
        let (s, co) = theta.sin_cos();
        QubitState::from_ket(c(co), c(s)).expect("unit ket")
    }

    /// Pure eigenstate of `n . sigma` with the given outcome.
    pub fn eigenstate(n: &Direction, outcome: Outcome) -> Self {
        QubitState(n.projector(outcome))
    }

    pub fn maximally_mixed() -> Self {
        QubitState(Mat2::identity().scale(0.5))
    }

    pub fn matrix(&self) -> &Mat2 {
        &self.0
    }

    pub fn purity(&self) -> f64 {
        (self.0 * self.0).trace().re
    }

    /// `Tr[self * other]`; for a pure `other` this is the overlap probability.
    pub fn overlap(&self, other: &QubitState) -> f64 {
        (self.0 * other.0).trace().re
    }

    pub fn bloch(&self) -> BlochVector {
        bloch_of(self)
    }
}

/// Two-qubit density matrix with a free-text label.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoQubitState {
    matrix: Mat4,
    pub label: String,
}

impl TwoQubitState {
    pub fn new(matrix: Mat4, label: impl Into<String>) -> Result<Self> {
        Ok(TwoQubitState {
            matrix: validate_density(matrix)?,
            label: label.into(),
        })
    }

    pub fn from_ket(ket: Vector4<C64>, label: impl Into<String>) -> Result<Self> {
        let norm = ket.norm();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::InvalidState("zero ket".into()));
        }
        let ket = ket.unscale(norm);
        TwoQubitState::new(ket * ket.adjoint(), label)
    }

    pub fn product(alice: &QubitState, bob: &QubitState, label: impl Into<String>) -> Result<Self> {
        TwoQubitState::new(kron(alice.matrix(), bob.matrix()), label)
    }

    pub fn matrix(&self) -> &Mat4 {
        &self.matrix
    }

    /// Whether any entry carries an imaginary part above `tol`.
    pub fn has_imaginary_coherence(&self, tol: f64) -> bool {
        self.matrix.iter().any(|z| z.im.abs() > tol)
    }
}

fn wrap_angle(theta: f64, period: f64) -> f64 {
    let w = theta.rem_euclid(period);
    if w >= period {
        0.0
    } else {
        w
    }
}

/// Projector onto `cos(theta)|HH> + sin(theta)|VV>`.
pub fn make_psi(theta: f64) -> TwoQubitState {
    let (s, co) = wrap_angle(theta, std::f64::consts::PI).sin_cos();
    let mut ket = Vector4::zeros();
    ket[HH] = c(co);
    ket[VV] = c(s);
    TwoQubitState::from_ket(ket, format!("psi({theta})")).expect("unit ket")
}

/// Projector onto `cos(theta)|VH> + sin(theta)|HV>`.
pub fn make_phi(theta: f64) -> TwoQubitState {
    let (s, co) = wrap_angle(theta, std::f64::consts::PI).sin_cos();
    let mut ket = Vector4::zeros();
    ket[VH] = c(co);
    ket[HV] = c(s);
    TwoQubitState::from_ket(ket, format!("phi({theta})")).expect("unit ket")
}

fn check_weight(eta: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::Domain {
            what: "eta",
            value: eta,
            domain: "[0, 1]",
        });
    }
    Ok(())
}

/// `eta |Psi><Psi| + (1 - eta) |Phi><Phi|`.
pub fn make_rho1(theta: f64, eta: f64) -> Result<TwoQubitState> {
    check_weight(eta)?;
    let m = make_psi(theta).matrix.scale(eta) + make_phi(theta).matrix.scale(1.0 - eta);
    TwoQubitState::new(m, format!("rho1(theta={theta}, eta={eta})"))
}

/// `eta |Psi><Psi| + (1 - eta)/2 (|HH><HH| + |VV><VV|)`.
pub fn make_rho2(theta: f64, eta: f64) -> Result<TwoQubitState> {
    check_weight(eta)?;
    let mut m = make_psi(theta).matrix.scale(eta);
    m[(HH, HH)] += c((1.0 - eta) / 2.0);
    m[(VV, VV)] += c((1.0 - eta) / 2.0);
    TwoQubitState::new(m, format!("rho2(theta={theta}, eta={eta})"))
}

/// Partial trace over Alice for an arbitrary 4x4 operator.
pub fn trace_out_alice(m: &Mat4) -> Mat2 {
    Mat2::from_fn(|b, bp| m[(b, bp)] + m[(2 + b, 2 + bp)])
}

/// Bob's reduced state `Tr_A[rho]`.
pub fn partial_trace_a(rho: &TwoQubitState) -> QubitState {
    QubitState(trace_out_alice(&rho.matrix))
}

/// Bob's unnormalized conditional state `Tr_A[(Pi_a (x) 1) rho]`.
pub fn unnormalized_conditional(rho: &TwoQubitState, n: &Direction, outcome: Outcome) -> Mat2 {
    let lifted = kron(&n.projector(outcome), &Mat2::identity());
    trace_out_alice(&(lifted * rho.matrix))
}

/// Probability of Alice's `outcome` along `n`, and Bob's normalized conditional state.
pub fn conditional_state(
    rho: &TwoQubitState,
    n: &Direction,
    outcome: Outcome,
) -> Result<(f64, QubitState)> {
    let tilde = unnormalized_conditional(rho, n, outcome);
    let p = tilde.trace().re;
    if p < MIN_OUTCOME_PROBABILITY {
        return Err(Error::OutcomeNeverOccurs {
            setting: "alice",
            outcome,
            probability: p,
        });
    }
    let normalized = (tilde + tilde.adjoint()).scale(0.5 / p);
    Ok((p, QubitState(normalized)))
}

pub fn bloch_of(q: &QubitState) -> BlochVector {
    let m = q.matrix();
    BlochVector {
        x: 2.0 * m[(0, 1)].re,
        y: -2.0 * m[(0, 1)].im,
        z: (m[(0, 0)] - m[(1, 1)]).re,
    }
}

/// Unnormalized Bloch components `(tr, x, y, z)` of any Hermitian 2x2 operator.
pub fn bloch_components(m: &Mat2) -> (f64, [f64; 3]) {
    (
        m.trace().re,
        [2.0 * m[(0, 1)].re, -2.0 * m[(0, 1)].im, (m[(0, 0)] - m[(1, 1)]).re],
    )
}

pub fn bloch_to_state(b: &BlochVector) -> Result<QubitState> {
    let norm = b.norm();
    if !norm.is_finite() || norm > 1.0 + BLOCH_TOL {
        return Err(Error::OutsideBlochBall(norm));
    }
    let m = (Mat2::identity()
        + pauli_x().scale(b.x)
        + pauli_y().scale(b.y)
        + pauli_z().scale(b.z))
    .scale(0.5);
    if norm <= 1.0 {
        Ok(QubitState(m))
    } else {
        QubitState::new(m)
    }
}
