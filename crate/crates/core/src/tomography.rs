//! Single-qubit process tomography in the Pauli operator basis `(1, X, Y, Z)`.
//!
//! A channel is `rho -> sum_ij chi_ij E_i rho E_j`. Internally a Hermitian
//! `chi` is handled through its 16 real coordinates in an orthonormal
//! Hermitian basis, and through its Pauli transfer matrix
//! `R_ab = 1/2 Tr[E_a eps(E_b)]`, which is linear in those coordinates.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector, Matrix4, SMatrix};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measurement::{sample_multinomial, stream_rng, CountRecord, Sampling};
use crate::optimize::bfgs_minimize;
use crate::quantum::{
    bloch_of, hermitian_eigen, pauli_x, pauli_y, pauli_z, Direction, Mat2, Mat4, Outcome, QubitState, C64,
};

pub const CHI_TOL: f64 = 1e-9;
/// Weight of the squared trace-preservation defect in the ML objective.
pub const TP_PENALTY: f64 = 1e4;
pub const ML_REL_TOL: f64 = 1e-10;
pub const ML_MAX_ITER: usize = 10_000;

/// `E_0 .. E_3 = 1, X, Y, Z`.
pub fn pauli_basis() -> [Mat2; 4] {
    [Mat2::identity(), pauli_x(), pauli_y(), pauli_z()]
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChiMatrix(Mat4);

impl ChiMatrix {
    /// Validates Hermiticity, unit trace and positivity (all within `1e-9`).
    pub fn new(m: Mat4) -> Result<Self> {
        if m.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::InvalidChi("non-finite entry".into()));
        }
        let skew = (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if skew > CHI_TOL {
            return Err(Error::InvalidChi(format!("not Hermitian (deviation {skew:e})")));
        }
        let m = (m + m.adjoint()).scale(0.5);
        let trace = m.trace().re;
        if (trace - 1.0).abs() > CHI_TOL {
            return Err(Error::InvalidChi(format!("trace {trace} != 1")));
        }
        let lowest = eigen4(&m).0[0];
        if lowest < -CHI_TOL {
            return Err(Error::InvalidChi(format!("negative eigenvalue {lowest:e}")));
        }
        Ok(ChiMatrix(m))
    }

    pub fn matrix(&self) -> &Mat4 {
        &self.0
    }

    pub fn identity() -> Self {
        ChiMatrix::diagonal([1.0, 0.0, 0.0, 0.0])
    }

    /// Unitary Pauli gate `E_k`, `k` in `1..=3`.
    pub fn pauli_gate(k: usize) -> Self {
        let mut d = [0.0; 4];
        d[k] = 1.0;
        ChiMatrix::diagonal(d)
    }

    /// `rho -> (1 - p) rho + p 1/2`.
    pub fn depolarizing(p: f64) -> Result<Self> {
        if !(0.0..=4.0 / 3.0).contains(&p) {
            return Err(Error::Domain {
                what: "p",
                value: p,
                domain: "[0, 4/3]",
            });
        }
        Ok(ChiMatrix::diagonal([1.0 - 0.75 * p, p / 4.0, p / 4.0, p / 4.0]))
    }

    fn diagonal(d: [f64; 4]) -> Self {
        ChiMatrix(Mat4::from_diagonal(&d.map(|v| C64::new(v, 0.0)).into()))
    }

    /// `chi_ij = sum_k c_ki conj(c_kj)` with `K_k = sum_i c_ki E_i`.
    pub fn from_kraus(kraus: &[Mat2]) -> Result<Self> {
        let basis = pauli_basis();
        let mut chi = Mat4::zeros();
        for k in kraus {
            let c: [C64; 4] = std::array::from_fn(|i| (basis[i] * k).trace() * 0.5);
            for i in 0..4 {
                for j in 0..4 {
                    chi[(i, j)] += c[i] * c[j].conj();
                }
            }
        }
        ChiMatrix::new(chi)
    }

    /// Pauli transfer matrix `R_ab = 1/2 Tr[E_a eps(E_b)]`.
    pub fn transfer_matrix(&self) -> Matrix4<f64> {
        transfer_of(&coords(&self.0))
    }

    /// Largest deviation of `sum_ij chi_ij E_j E_i` from the identity.
    pub fn trace_preservation_defect(&self) -> f64 {
        let r = self.transfer_matrix();
        (r[(0, 0)] - 1.0).abs().max(r[(0, 1)].abs()).max(r[(0, 2)].abs()).max(r[(0, 3)].abs())
    }
}

impl Serialize for ChiMatrix {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<[f64; 2]>> =
            (0..4).map(|i| (0..4).map(|j| [self.0[(i, j)].re, self.0[(i, j)].im]).collect()).collect();
        rows.serialize(serializer)
    }
}

fn eigen4(m: &Mat4) -> (Vec<f64>, DMatrix<C64>) {
    hermitian_eigen(DMatrix::from_iterator(4, 4, m.iter().copied()))
}

/// Rebuilds `sum_k f(lambda_k) v_k v_k^dagger`.
fn spectral_map(m: &Mat4, f: impl Fn(f64) -> f64) -> Mat4 {
    let (values, vectors) = eigen4(m);
    Mat4::from_fn(|i, j| (0..4).map(|k| vectors[(i, k)] * vectors[(j, k)].conj() * f(values[k])).sum())
}

pub fn apply_process(chi: &ChiMatrix, rho: &QubitState) -> Result<QubitState> {
    let basis = pauli_basis();
    let mut out = Mat2::zeros();
    for i in 0..4 {
        for j in 0..4 {
            out += basis[i] * rho.matrix() * basis[j] * chi.0[(i, j)];
        }
    }
    QubitState::new(out)
}

/// Orthonormal basis of 4x4 Hermitian matrices under the Frobenius product.
fn hermitian_basis() -> &'static [Mat4; 16] {
    static BASIS: OnceLock<[Mat4; 16]> = OnceLock::new();
    BASIS.get_or_init(|| {
        let mut out = Vec::with_capacity(16);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        for i in 0..4 {
            let mut m = Mat4::zeros();
            m[(i, i)] = C64::new(1.0, 0.0);
            out.push(m);
        }
        for i in 0..4 {
            for j in i + 1..4 {
                let mut re = Mat4::zeros();
                re[(i, j)] = C64::new(s, 0.0);
                re[(j, i)] = C64::new(s, 0.0);
                out.push(re);
                let mut im = Mat4::zeros();
                im[(i, j)] = C64::new(0.0, s);
                im[(j, i)] = C64::new(0.0, -s);
                out.push(im);
            }
        }
        out.try_into().expect("16 basis elements")
    })
}

fn coords(m: &Mat4) -> [f64; 16] {
    let basis = hermitian_basis();
    std::array::from_fn(|k| (basis[k] * m).trace().re)
}

fn from_coords(x: &[f64]) -> Mat4 {
    hermitian_basis().iter().zip(x).fold(Mat4::zeros(), |acc, (b, &v)| acc + b * C64::new(v, 0.0))
}

/// Linear map from Hermitian coordinates to the row-major transfer matrix.
fn transfer_map() -> &'static SMatrix<f64, 16, 16> {
    static MAP: OnceLock<SMatrix<f64, 16, 16>> = OnceLock::new();
    MAP.get_or_init(|| {
        let e = pauli_basis();
        let mut map = SMatrix::<f64, 16, 16>::zeros();
        for (k, b) in hermitian_basis().iter().enumerate() {
            for a in 0..4 {
                for c in 0..4 {
                    let mut out = Mat2::zeros();
                    for i in 0..4 {
                        for j in 0..4 {
                            out += e[i] * e[c] * e[j] * b[(i, j)];
                        }
                    }
                    map[(4 * a + c, k)] = 0.5 * (e[a] * out).trace().re;
                }
            }
        }
        map
    })
}

fn transfer_of(x: &[f64; 16]) -> Matrix4<f64> {
    let v = transfer_map() * SMatrix::<f64, 16, 1>::from_column_slice(x);
    Matrix4::from_fn(|a, c| v[4 * a + c])
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Observation {
    Counts(CountRecord),
    Exact { p_plus: f64 },
}

impl Observation {
    /// `(weight of +, weight of -)`.
    fn frequencies(&self) -> (f64, f64) {
        match self {
            Observation::Counts(rec) => (
                rec.get("plus").unwrap_or(0) as f64,
                rec.get("minus").unwrap_or(0) as f64,
            ),
            Observation::Exact { p_plus } => (*p_plus, 1.0 - p_plus),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TomographyConfig {
    pub input_label: &'static str,
    #[serde(skip)]
    pub input: QubitState,
    pub axis_label: &'static str,
    #[serde(skip)]
    pub axis: Direction,
    pub observation: Observation,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TomographyData {
    pub configs: Vec<TomographyConfig>,
}

/// The six Pauli eigenstates `H, V, D, A, R, L`.
pub fn probe_states() -> [(&'static str, QubitState); 6] {
    [
        ("H", QubitState::eigenstate(&Direction::z(), Outcome::Plus)),
        ("V", QubitState::eigenstate(&Direction::z(), Outcome::Minus)),
        ("D", QubitState::eigenstate(&Direction::x(), Outcome::Plus)),
        ("A", QubitState::eigenstate(&Direction::x(), Outcome::Minus)),
        ("R", QubitState::eigenstate(&Direction::y(), Outcome::Plus)),
        ("L", QubitState::eigenstate(&Direction::y(), Outcome::Minus)),
    ]
}

pub fn probe_axes() -> [(&'static str, Direction); 3] {
    [("x", Direction::x()), ("y", Direction::y()), ("z", Direction::z())]
}

/// Probes the channel with all 18 input/axis configurations.
///
/// Configuration `i` (input-major order) samples from stream `i` of the seed.
pub fn simulate_tomography(chi: &ChiMatrix, sampling: Sampling) -> Result<TomographyData> {
    let mut configs = Vec::with_capacity(18);
    for (input_label, input) in probe_states() {
        let output = apply_process(chi, &input)?;
        for (axis_label, axis) in probe_axes() {
            let p_plus = (output.matrix() * axis.projector(Outcome::Plus)).trace().re.clamp(0.0, 1.0);
            let observation = match sampling {
                Sampling::Exact => Observation::Exact { p_plus },
                Sampling::Counts { per_setting, seed } => {
                    let mut rng = stream_rng(seed, configs.len() as u64);
                    let k = sample_multinomial(&[p_plus, 1.0 - p_plus], per_setting, &mut rng)?;
                    Observation::Counts(CountRecord::new(
                        format!("{input_label}/{axis_label}"),
                        vec![("plus".into(), k[0]), ("minus".into(), k[1])],
                    ))
                }
            };
            configs.push(TomographyConfig {
                input_label,
                input: input.clone(),
                axis_label,
                axis,
                observation,
            });
        }
    }
    Ok(TomographyData { configs })
}

/// Pre-processed configuration: `v = (1, r_in)`, axis `n`, and outcome weights.
struct Datum {
    v: [f64; 4],
    n: [f64; 3],
    f_plus: f64,
    f_minus: f64,
}

fn prepare(data: &TomographyData) -> Result<(Vec<Datum>, f64)> {
    let mut out = Vec::new();
    let mut total = 0.0;
    for c in &data.configs {
        let (f_plus, f_minus) = c.observation.frequencies();
        if f_plus + f_minus <= 0.0 {
            continue;
        }
        let r = bloch_of(&c.input);
        out.push(Datum {
            v: [1.0, r.x, r.y, r.z],
            n: c.axis.components(),
            f_plus,
            f_minus,
        });
        total += f_plus + f_minus;
    }
    if out.is_empty() {
        return Err(Error::IncompleteData("no observations".into()));
    }
    Ok((out, total))
}

/// Least-squares transfer matrix with the trace-preserving first row.
fn linear_transfer(data: &[Datum]) -> Result<Matrix4<f64>> {
    let design = DMatrix::from_fn(data.len(), 12, |row, col| data[row].n[col / 4] * data[row].v[col % 4]);
    let target = DVector::from_iterator(
        data.len(),
        data.iter().map(|d| 2.0 * d.f_plus / (d.f_plus + d.f_minus) - 1.0),
    );
    let svd = design.svd(true, true);
    let largest = svd.singular_values.max();
    let rank = svd.singular_values.iter().filter(|&&s| s > 1e-9 * largest).count();
    if rank < 12 {
        return Err(Error::IncompleteData(format!("design rank {rank} < 12")));
    }
    let fit = svd.solve(&target, 1e-12).map_err(|e| Error::IncompleteData(e.to_string()))?;
    Ok(Matrix4::from_fn(|a, c| match a {
        0 => f64::from(c == 0),
        _ => fit[4 * (a - 1) + c],
    }))
}

fn transfer_to_chi(r: &Matrix4<f64>) -> Mat4 {
    let lu = transfer_map().lu();
    let x = lu
        .solve(&SMatrix::<f64, 16, 1>::from_fn(|k, _| r[(k / 4, k % 4)]))
        .expect("transfer map is invertible");
    from_coords(x.as_slice())
}

/// Clamps negative eigenvalues and renormalizes the trace.
fn project_psd(m: &Mat4) -> Mat4 {
    let clamped = spectral_map(m, |v| v.max(0.0));
    let trace = clamped.trace().re;
    clamped / C64::new(trace, 0.0)
}

/// Closest Hermitian matrix (Frobenius) whose transfer matrix has first row `(1, 0, 0, 0)`.
fn project_trace_preserving(m: &Mat4) -> Mat4 {
    let map = transfer_map();
    let a = map.fixed_rows::<4>(0).into_owned();
    let x = SMatrix::<f64, 16, 1>::from_column_slice(&coords(m));
    let residual = a * x - SMatrix::<f64, 4, 1>::new(1.0, 0.0, 0.0, 0.0);
    let gram = a * a.transpose();
    let lambda = gram.lu().solve(&residual).expect("constraint rows are independent");
    from_coords((x - a.transpose() * lambda).as_slice())
}

/// Lower-triangular factor `T` with `chi = T^dagger T`, packed as 16 reals.
fn pack_factor(chi: &Mat4) -> Vec<f64> {
    // Reverse the index order so the QR triangle comes out lower-triangular.
    let rev = |m: &Mat4| Mat4::from_fn(|i, j| m[(3 - i, 3 - j)]);
    let root = spectral_map(&rev(chi), |v| v.max(0.0).sqrt());
    let upper = root.qr().r();
    let mut t = rev(&upper);
    for i in 0..4 {
        let d = t[(i, i)];
        if d.norm() > 0.0 {
            let phase = d.conj() / d.norm();
            for j in 0..4 {
                t[(i, j)] *= phase;
            }
        }
    }
    let mut packed = Vec::with_capacity(16);
    for i in 0..4 {
        packed.push(t[(i, i)].re);
    }
    for i in 0..4 {
        for j in 0..i {
            packed.push(t[(i, j)].re);
            packed.push(t[(i, j)].im);
        }
    }
    packed
}

fn unpack_chi(t: &[f64]) -> Mat4 {
    let mut m = Mat4::zeros();
    for i in 0..4 {
        m[(i, i)] = C64::new(t[i], 0.0);
    }
    let mut k = 4;
    for i in 0..4 {
        for j in 0..i {
            m[(i, j)] = C64::new(t[k], t[k + 1]);
            k += 2;
        }
    }
    let chi = m.adjoint() * m;
    let trace = chi.trace().re;
    chi / C64::new(trace, 0.0)
}

/// Normalized negative log-likelihood plus the trace-preservation penalty.
fn objective(t: &[f64], data: &[Datum], total: f64) -> f64 {
    let chi = unpack_chi(t);
    if !chi[(0, 0)].re.is_finite() {
        return f64::INFINITY;
    }
    let r = transfer_of(&coords(&chi));
    let mut nll = 0.0;
    for d in data {
        let out: [f64; 4] = std::array::from_fn(|a| (0..4).map(|c| r[(a, c)] * d.v[c]).sum());
        let along = d.n[0] * out[1] + d.n[1] * out[2] + d.n[2] * out[3];
        for (f, p) in [(d.f_plus, 0.5 * (out[0] + along)), (d.f_minus, 0.5 * (out[0] - along))] {
            if f > 0.0 {
                nll -= f * p.max(1e-300).ln();
            }
        }
    }
    let defect = r[(0, 1)].powi(2) + r[(0, 2)].powi(2) + r[(0, 3)].powi(2);
    nll / total + TP_PENALTY * defect
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Reconstruction {
    pub chi: ChiMatrix,
    pub converged: bool,
    pub iterations: usize,
    pub objective: f64,
}

/// Linear-inversion estimate, projected onto positive matrices.
pub fn linear_inversion(data: &TomographyData) -> Result<ChiMatrix> {
    let (prepared, _) = prepare(data)?;
    let chi = project_psd(&transfer_to_chi(&linear_transfer(&prepared)?));
    ChiMatrix::new(chi)
}

/// Maximum-likelihood `chi`.
///
/// Starts from the positive linear-inversion estimate (mixed with `1e-8` of the
/// fully depolarizing map so every factor row can move), minimizes with BFGS,
/// then projects onto trace-preserving and positive matrices in that order.
pub fn reconstruct_chi(data: &TomographyData) -> Result<Reconstruction> {
    let (prepared, total) = prepare(data)?;
    let start = project_psd(&transfer_to_chi(&linear_transfer(&prepared)?));
    let mix = 1e-8;
    let start = start * C64::new(1.0 - mix, 0.0) + Mat4::identity() * C64::new(mix / 4.0, 0.0);

    let found = bfgs_minimize(|t| objective(t, &prepared, total), pack_factor(&start), ML_REL_TOL, ML_MAX_ITER);
    let chi = project_psd(&project_trace_preserving(&unpack_chi(&found.x)));
    Ok(Reconstruction {
        chi: ChiMatrix::new(chi)?,
        converged: found.converged,
        iterations: found.iterations,
        objective: found.value,
    })
}

/// `(Tr sqrt(sqrt(a) b sqrt(a)))^2`, evaluated as the squared trace norm of `sqrt(a) sqrt(b)`.
pub fn process_fidelity(a: &ChiMatrix, b: &ChiMatrix) -> f64 {
    let cut = |v: f64| if v > 1e-15 { v.sqrt() } else { 0.0 };
    let product = spectral_map(&a.0, cut) * spectral_map(&b.0, cut);
    let dm = DMatrix::from_iterator(4, 4, product.iter().copied());
    let norm: f64 = dm.singular_values().iter().sum();
    (norm * norm).clamp(0.0, 1.0)
}

/// Random trace-preserving channel with two Kraus operators from a Haar-like isometry.
pub fn random_channel(rng: &mut impl Rng) -> ChiMatrix {
    let g = DMatrix::<C64>::from_fn(4, 2, |_, _| {
        C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let q = g.qr().q();
    let k0 = Mat2::from_fn(|i, j| q[(i, j)]);
    let k1 = Mat2::from_fn(|i, j| q[(i + 2, j)]);
    ChiMatrix::from_kraus(&[k0, k1]).expect("isometry gives a valid channel")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn max_diff(a: &Mat4, b: &Mat4) -> f64 {
        (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn identity_and_x_gate() {
        let h = QubitState::eigenstate(&Direction::z(), Outcome::Plus);
        let v = QubitState::eigenstate(&Direction::z(), Outcome::Minus);
        let out = apply_process(&ChiMatrix::identity(), &h).unwrap();
        assert!((out.matrix() - h.matrix()).norm() < 1e-15);
        let out = apply_process(&ChiMatrix::pauli_gate(1), &h).unwrap();
        assert!((out.matrix() - v.matrix()).norm() < 1e-15);
    }

    #[test]
    fn depolarizing_fixes_the_maximally_mixed_state() {
        let chi = ChiMatrix::depolarizing(0.2).unwrap();
        let out = apply_process(&chi, &QubitState::maximally_mixed()).unwrap();
        assert!((out.matrix() - QubitState::maximally_mixed().matrix()).norm() < 1e-15);
    }

    #[test]
    fn rejects_invalid_chi() {
        assert!(ChiMatrix::new(Mat4::from_diagonal(&[1.5, -0.5, 0.0, 0.0].map(|v| C64::new(v, 0.0)).into())).is_err());
        assert!(ChiMatrix::new(Mat4::identity()).is_err());
    }

    #[test]
    fn transfer_matrix_of_depolarizing() {
        let r = ChiMatrix::depolarizing(0.3).unwrap().transfer_matrix();
        let expected = Matrix4::from_diagonal(&[1.0, 0.7, 0.7, 0.7].into());
        assert!((r - expected).abs().max() < 1e-14);
    }

    #[test]
    fn kraus_round_trip_matches_application() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let chi = random_channel(&mut rng);
        assert!(chi.trace_preservation_defect() < 1e-12);
        let rho = QubitState::real_ket(0.3);
        let out = apply_process(&chi, &rho).unwrap();
        assert_abs_diff_eq!(out.matrix().trace().re, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn fidelity_examples() {
        let id = ChiMatrix::identity();
        assert_abs_diff_eq!(process_fidelity(&id, &id), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(process_fidelity(&id, &ChiMatrix::pauli_gate(1)), 0.0, epsilon = 1e-12);
        let dep = ChiMatrix::depolarizing(0.0264).unwrap();
        assert_abs_diff_eq!(process_fidelity(&dep, &id), 0.9802, epsilon = 1e-12);
        assert_abs_diff_eq!(process_fidelity(&id, &dep), 0.9802, epsilon = 1e-12);
    }

    #[test]
    fn exact_reconstruction_of_gates() {
        for chi in [ChiMatrix::identity(), ChiMatrix::pauli_gate(1)] {
            let data = simulate_tomography(&chi, Sampling::Exact).unwrap();
            let rec = reconstruct_chi(&data).unwrap();
            assert!(rec.converged);
            assert!(max_diff(rec.chi.matrix(), chi.matrix()) < 1e-6);
        }
    }

    #[test]
    fn identity_exact_data_probabilities() {
        let data = simulate_tomography(&ChiMatrix::identity(), Sampling::Exact).unwrap();
        let d_x = data.configs.iter().find(|c| c.input_label == "D" && c.axis_label == "x").unwrap();
        assert_eq!(d_x.observation, Observation::Exact { p_plus: 1.0 });
    }

    #[test]
    fn incomplete_data_is_rejected() {
        let mut data = simulate_tomography(&ChiMatrix::identity(), Sampling::Exact).unwrap();
        data.configs.retain(|c| c.axis_label != "y");
        assert_eq!(reconstruct_chi(&data).unwrap_err().reason_code(), "incomplete-data");
    }

    #[test]
    fn factor_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let chi = random_channel(&mut rng);
        let back = unpack_chi(&pack_factor(chi.matrix()));
        assert!(max_diff(&back, chi.matrix()) < 1e-12);
    }
}
