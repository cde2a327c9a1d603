//! Photon-counting simulation with Poisson error bars.
//!
//! Every setting draws a multinomial sample from its own ChaCha8 stream:
//! the generator is seeded with the run seed and switched to stream `index`
//! (0 = NCS setting, 1 = joint-measurement setting), so results do not depend
//! on evaluation order or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::Serialize;

use crate::criterion::{build_geometric_record, GeometricRecord, RecordErrors};
use crate::error::{Error, Result};
use crate::game::{play_game, GameSettings, GameTranscript};
use crate::quantum::{unnormalized_conditional, Outcome, TwoQubitState};

const PROBABILITY_SUM_TOL: f64 = 1e-9;

pub const NCS_STREAM: u64 = 0;
pub const JOINT_STREAM: u64 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CountRecord {
    pub setting_label: String,
    /// `(outcome label, count)` in a fixed order.
    pub counts: Vec<(String, u64)>,
    pub total: u64,
}

impl CountRecord {
    pub fn new(setting_label: impl Into<String>, counts: Vec<(String, u64)>) -> Self {
        let total = counts.iter().map(|(_, k)| k).sum();
        CountRecord {
            setting_label: setting_label.into(),
            counts,
            total,
        }
    }

    pub fn get(&self, label: &str) -> Option<u64> {
        self.counts.iter().find(|(l, _)| l == label).map(|&(_, k)| k)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EstimatedProbability {
    pub value: f64,
    pub sigma: f64,
}

/// Generator for stream `index` of run `seed`.
pub fn stream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn validate_probabilities(probabilities: &[f64]) -> Result<()> {
    if probabilities.is_empty() {
        return Err(Error::InvalidProbabilities("empty".into()));
    }
    if let Some(p) = probabilities.iter().find(|p| !(**p >= 0.0 && p.is_finite())) {
        return Err(Error::InvalidProbabilities(format!("entry {p} is not a probability")));
    }
    let sum: f64 = probabilities.iter().sum();
    if (sum - 1.0).abs() > PROBABILITY_SUM_TOL {
        return Err(Error::InvalidProbabilities(format!("entries sum to {sum}")));
    }
    Ok(())
}

/// Multinomial draw as a chain of conditional binomials.
pub fn sample_multinomial(probabilities: &[f64], n_total: u64, rng: &mut ChaCha8Rng) -> Result<Vec<u64>> {
    validate_probabilities(probabilities)?;
    let mut counts = vec![0; probabilities.len()];
    let mut remaining_n = n_total;
    let mut remaining_p = 1.0;
    let last = probabilities.len() - 1;
    for (k, &p) in probabilities.iter().enumerate() {
        if remaining_n == 0 {
            break;
        }
        if k == last {
            counts[k] = remaining_n;
            break;
        }
        let q = if remaining_p > 0.0 { (p / remaining_p).clamp(0.0, 1.0) } else { 1.0 };
        let draw = Binomial::new(remaining_n, q)
            .map_err(|e| Error::InvalidProbabilities(e.to_string()))?
            .sample(rng);
        counts[k] = draw;
        remaining_n -= draw;
        remaining_p -= p;
    }
    Ok(counts)
}

/// Multinomial counts labelled `"0"`, `"1"`, ... for the given probabilities.
pub fn simulate_counts(probabilities: &[f64], n_total: u64, seed: u64) -> Result<CountRecord> {
    if n_total == 0 {
        return Err(Error::EmptyRecord);
    }
    let counts = sample_multinomial(probabilities, n_total, &mut stream_rng(seed, 0))?;
    Ok(CountRecord::new(
        "multinomial",
        counts.into_iter().enumerate().map(|(i, k)| (i.to_string(), k)).collect(),
    ))
}

fn poisson_sigma(k: u64, total: u64, floor: bool) -> f64 {
    let k = if floor { k.max(1) } else { k };
    (k as f64).sqrt() / total as f64
}

/// `value = k / total`, `sigma = sqrt(k) / total` per outcome, in record order.
///
/// With `pseudo_count_floor`, zero counts get the sigma of a single count.
pub fn estimate(rec: &CountRecord, pseudo_count_floor: bool) -> Result<Vec<EstimatedProbability>> {
    if rec.total == 0 {
        return Err(Error::EmptyRecord);
    }
    Ok(rec
        .counts
        .iter()
        .map(|&(_, k)| EstimatedProbability {
            value: k as f64 / rec.total as f64,
            sigma: poisson_sigma(k, rec.total, pseudo_count_floor),
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Sampling {
    /// Exact probabilities, zero error bars.
    Exact,
    Counts { per_setting: u64, seed: u64 },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct NoiseOptions {
    pub pseudo_count_floor: bool,
    /// One-sigma uncertainty assigned to both chord angles.
    pub angle_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NoisyGame {
    /// Estimated transcript; `c_lhs` stays exact.
    pub transcript: GameTranscript,
    pub record: GeometricRecord,
    /// Empty for [`Sampling::Exact`].
    pub counts: Vec<CountRecord>,
}

const NCS_LABELS: [&str; 4] = ["plus,D1", "plus,D2", "minus,D1", "minus,D2"];
const JOINT_LABELS: [&str; 4] = ["win,along", "win,orth", "other,along", "other,orth"];

fn labelled(setting: &str, labels: [&str; 4], counts: Vec<u64>) -> CountRecord {
    CountRecord::new(setting, labels.iter().map(|l| l.to_string()).zip(counts).collect())
}

/// Conditional fraction `k / k_given` with Poisson sigma `sqrt(k) / k_given`.
fn conditional(k: u64, k_given: u64, floor: bool) -> EstimatedProbability {
    EstimatedProbability {
        value: k as f64 / k_given as f64,
        sigma: poisson_sigma(k, k_given, floor),
    }
}

/// Plays the game on simulated counts and fills the record's error bars.
///
/// NCS setting: Alice along `n`, Bob's D1 on the announced state, D2 on its
/// orthogonal complement. Joint setting: Alice along `n_perp`, Bob along the
/// exact optimal axis. Heights use `h = 2 k_along / k_outcome - 1`, with
/// `sigma_h = 2 (k_along / k_outcome) sqrt(1/k_along + 1/k_outcome)`.
pub fn noisy_game(rho: &TwoQubitState, s: &GameSettings, sampling: Sampling, opts: &NoiseOptions) -> Result<NoisyGame> {
    let exact = play_game(rho, s)?;
    let mut record = build_geometric_record(rho, &exact, s)?;
    record.err.gamma1 = opts.angle_error;
    record.err.gamma2 = opts.angle_error;

    let (per_setting, seed) = match sampling {
        Sampling::Exact => {
            return Ok(NoisyGame {
                transcript: exact,
                record,
                counts: Vec::new(),
            })
        }
        Sampling::Counts { per_setting, seed } => (per_setting, seed),
    };
    if per_setting == 0 {
        return Err(Error::EmptyRecord);
    }
    let floor = opts.pseudo_count_floor;

    let alice = |o| unnormalized_conditional(rho, s.ncs_direction(), o).trace().re;
    let (q_plus, q_minus) = (alice(Outcome::Plus), alice(Outcome::Minus));
    let ncs_probs = [
        q_plus * (1.0 - exact.p_plus_err),
        q_plus * exact.p_plus_err,
        q_minus * (1.0 - exact.p_minus_err),
        q_minus * exact.p_minus_err,
    ];
    let ncs_counts = sample_multinomial(&clean(&ncs_probs), per_setting, &mut stream_rng(seed, NCS_STREAM))?;
    let p_c = 1.0 - exact.p_d;
    let joint_probs = [exact.w_max, exact.p_d - exact.w_max, exact.w_other, p_c - exact.w_other];
    let joint_counts = sample_multinomial(&clean(&joint_probs), per_setting, &mut stream_rng(seed, JOINT_STREAM))?;

    let k_plus = ncs_counts[0] + ncs_counts[1];
    let k_minus = ncs_counts[2] + ncs_counts[3];
    for (outcome, k) in [(Outcome::Plus, k_plus), (Outcome::Minus, k_minus)] {
        if k == 0 {
            return Err(Error::OutcomeNeverOccurs {
                setting: "ncs",
                outcome,
                probability: 0.0,
            });
        }
    }
    let p_plus_err = conditional(ncs_counts[1], k_plus, floor);
    let p_minus_err = conditional(ncs_counts[3], k_minus, floor);

    let k_d = joint_counts[0] + joint_counts[1];
    let k_c = joint_counts[2] + joint_counts[3];
    if k_d.min(k_c) == 0 {
        return Err(Error::DegenerateSetting(0.0));
    }
    let n = per_setting as f64;
    let p_d = EstimatedProbability {
        value: k_d as f64 / n,
        sigma: poisson_sigma(k_d, per_setting, floor),
    };
    let (h3, err_h3) = height(joint_counts[0], k_d, floor);
    let (h4, err_h4) = height(joint_counts[2], k_c, floor);

    let w_max = joint_counts[0] as f64 / n;
    let transcript = GameTranscript {
        p_plus: 1.0 - p_plus_err.value,
        p_minus: 1.0 - p_minus_err.value,
        p_plus_err: p_plus_err.value,
        p_minus_err: p_minus_err.value,
        w_max,
        p_d: p_d.value,
        w_other: joint_counts[2] as f64 / n,
        delta: w_max - exact.c_lhs,
        ..exact
    };
    record.r1 = 1.0 - 2.0 * p_plus_err.value;
    record.r2 = 1.0 - 2.0 * p_minus_err.value;
    record.h3 = h3;
    record.h4 = h4;
    record.p_d = p_d.value;
    record.p_c = 1.0 - p_d.value;
    record.err = RecordErrors {
        r1: 2.0 * p_plus_err.sigma,
        r2: 2.0 * p_minus_err.sigma,
        h3: err_h3,
        h4: err_h4,
        p_d: p_d.sigma,
        ..record.err
    };
    record.validate()?;

    Ok(NoisyGame {
        transcript,
        record,
        counts: vec![
            labelled("ncs", NCS_LABELS, ncs_counts),
            labelled("joint", JOINT_LABELS, joint_counts),
        ],
    })
}

/// Height `2 k / k_given - 1` and its propagated sigma.
fn height(k: u64, k_given: u64, floor: bool) -> (f64, f64) {
    let f = k as f64 / k_given as f64;
    let k_eff = if floor { k.max(1) } else { k } as f64;
    let kg = k_given as f64;
    // f * sqrt(1/k + 1/k_given), written to stay finite at k = 0.
    let sigma_f = (k_eff.sqrt() / kg) * (1.0 + k_eff / kg).sqrt();
    (2.0 * f - 1.0, 2.0 * sigma_f)
}

/// Clears rounding negatives and renormalizes.
fn clean(p: &[f64]) -> Vec<f64> {
    let clipped: Vec<f64> = p.iter().map(|v| v.max(0.0)).collect();
    let sum: f64 = clipped.iter().sum();
    clipped.iter().map(|v| v / sum).collect()
}
