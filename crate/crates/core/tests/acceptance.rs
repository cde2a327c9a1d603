//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits non-zero
//! if any criterion fails.

use avn_steering::criterion::{
    build_geometric_record, criterion_value, delta_prime, delta_prime_with, lhs_oracle, symmetrize,
    symmetrize_lhs_model, DeltaPrimeOptions, GeometricRecord, HiddenState, LhsModel, PlanePoint, Response,
    SymmetrizedRecord,
};
use avn_steering::game::{c_lhs, maximize_w, play_game, steering_gap, w_expectation, GameSettings};
use avn_steering::measurement::{noisy_game, NoiseOptions, Sampling};
use avn_steering::quantum::{
    bloch_of, bloch_to_state, conditional_state, make_psi, make_rho1, make_rho2, BlochVector, Direction, Mat2,
    Mat4, Outcome, TwoQubitState, C64,
};
use avn_steering::tomography::{
    process_fidelity, random_channel, reconstruct_chi, simulate_tomography, ChiMatrix,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, FRAC_PI_6, PI};
use std::time::Instant;

struct Check {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Check {
    Check { pass, detail }
}

fn linspace(a: f64, b: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| a + (b - a) * i as f64 / (n - 1) as f64)
}

fn analytic_rho1() -> Check {
    let start = Instant::now();
    let (mut dw, mut dc) = (0.0f64, 0.0f64);
    for theta in linspace(0.0, FRAC_PI_2, 46) {
        for eta in linspace(0.0, 1.0, 11) {
            let rho = make_rho1(theta, eta).unwrap();
            let s = GameSettings::for_rho1(theta);
            let c = (1.0 + (2.0 * theta).cos().abs()) / 4.0;
            let w = (0.5 + (0.5 - eta).abs()) * theta.cos().powi(2).max(theta.sin().powi(2));
            dw = dw.max((maximize_w(&rho, &s).w_max - w).abs());
            dc = dc.max((c_lhs(&rho, &s) - c).abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        dw <= 1e-6 && dc <= 1e-8 && secs < 10.0,
        format!("max |dW| = {dw:.2e}, max |dC| = {dc:.2e}, {secs:.2} s"),
    )
}

fn analytic_rho2() -> Check {
    let (mut dw, mut dc) = (0.0f64, 0.0f64);
    let s = GameSettings::for_rho2();
    for theta in [0.1, 0.4, FRAC_PI_4, 1.1, 1.5] {
        for eta in [0.0, 0.3, 0.7, 1.0] {
            let rho = make_rho2(theta, eta).unwrap();
            for theta_b in linspace(-PI, PI, 100) {
                for (o, sign) in [(Outcome::Plus, -1.0), (Outcome::Minus, 1.0)] {
                    let w = eta / 2.0 * (theta + sign * theta_b / 2.0).cos().powi(2) + (1.0 - eta) / 4.0;
                    dw = dw.max((w_expectation(&rho, &s, o, theta_b, 0.0) - w).abs());
                }
            }
            let c = (1.0 + eta * (2.0 * theta).cos().abs()) / 4.0;
            dc = dc.max((c_lhs(&rho, &s) - c).abs());
        }
    }
    verdict(dw <= 1e-9 && dc <= 1e-8, format!("max |dW| = {dw:.2e}, max |dC| = {dc:.2e}"))
}

fn ideal_bell() -> Check {
    let rho = make_psi(FRAC_PI_4);
    let s = GameSettings::for_rho1(FRAC_PI_4);
    let t = play_game(&rho, &s).unwrap();
    let ncs = [t.p_plus, t.p_plus_err, t.p_minus, t.p_minus_err];
    let ncs_ok = ncs.iter().zip([1.0, 0.0, 1.0, 0.0]).all(|(a, b)| (a - b).abs() <= 1e-12);
    let rec = build_geometric_record(&rho, &t, &s).unwrap();
    let v = delta_prime(&rec);
    let dp = v.delta_prime.unwrap_or(f64::NAN);
    verdict(
        ncs_ok && (t.delta - 0.25).abs() <= 1e-12 && (dp - 1.0).abs() <= 1e-12 && v.steerable,
        format!("NCS = {ncs:?}, delta = {}, delta' = {dp}", t.delta),
    )
}

fn known_deltas() -> Check {
    let a = play_game(&make_rho1(FRAC_PI_6, 1.0).unwrap(), &GameSettings::for_rho1(FRAC_PI_6)).unwrap().delta;
    let b = play_game(&make_rho1(FRAC_PI_4, 0.5).unwrap(), &GameSettings::for_rho1(FRAC_PI_4)).unwrap().delta;
    // |VV>: Alice's NCS outcome + never occurs, so only the joint step applies.
    let c = steering_gap(&make_rho2(FRAC_PI_2, 1.0).unwrap(), &GameSettings::for_rho2()).delta;
    verdict(
        (a - 0.375).abs() <= 1e-8 && b.abs() <= 1e-8 && c.abs() <= 1e-8,
        format!("rho1(pi/6,1) = {a:.10}, rho1(pi/4,0.5) = {b:.1e}, rho2(pi/2,1) = {c:.1e}"),
    )
}

/// Symmetrized record with `B` drawn inside the disk and a proper cap.
fn sample_record(rng: &mut ChaCha8Rng) -> SymmetrizedRecord {
    loop {
        let p_d: f64 = rng.random_range(0.05..0.95);
        let (h3, h4): (f64, f64) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let gamma: f64 = rng.random_range(0.05..PI - 0.05);
        let z_b = p_d * h3 + (1.0 - p_d) * h4;
        let x_b = rng.random_range(-1.0..1.0) * (1.0 - z_b * z_b).sqrt();
        let r12 = x_b * gamma.sin() + z_b * gamma.cos();
        if r12 > 0.01 {
            return SymmetrizedRecord::new(r12, gamma, h3, h4, p_d);
        }
    }
}

fn oracle_equivalence() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut compared, mut agree, mut positive) = (0, 0, 0);
    for _ in 0..500 {
        let sym = sample_record(&mut rng);
        let value = criterion_value(&sym).unwrap().value;
        if value.abs() <= 1e-3 {
            continue;
        }
        compared += 1;
        positive += (value > 0.0) as usize;
        if (value > 0.0) == lhs_oracle(&sym, 2001).is_none() {
            agree += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        agree == compared && secs < 60.0,
        format!("{agree}/{compared} agree ({positive} steerable-side), {secs:.1} s"),
    )
}

fn steerable_runs(n: u64) -> usize {
    let rho = make_psi(FRAC_PI_4);
    let s = GameSettings::for_rho1(FRAC_PI_4);
    let no_witness = DeltaPrimeOptions { oracle_grid: 0 };
    (0..100u64)
        .filter(|&seed| {
            noisy_game(&rho, &s, Sampling::Counts { per_setting: n, seed }, &NoiseOptions::default())
                .map(|g| delta_prime_with(&g.record, &no_witness).steerable)
                .unwrap_or(false)
        })
        .count()
}

fn noise_pipeline() -> Check {
    let large = steerable_runs(100_000);
    let small = steerable_runs(100);
    verdict(
        large >= 99 && small < 100,
        format!("n = 1e5: {large}/100 steerable; n = 100: {small}/100 steerable (needs < 100)"),
    )
}

fn tomography() -> Check {
    let identity = ChiMatrix::identity();
    let depolarizing = ChiMatrix::depolarizing(0.0264).unwrap();
    let fidelities: Vec<f64> = (0..10u64)
        .map(|seed| {
            let data = simulate_tomography(&depolarizing, Sampling::Counts { per_setting: 10_000, seed }).unwrap();
            process_fidelity(&reconstruct_chi(&data).unwrap().chi, &identity)
        })
        .collect();
    let sampled_ok = fidelities.iter().all(|f| (f - 0.9802).abs() <= 0.02);

    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let chi = random_channel(&mut rng);
        let fit = reconstruct_chi(&simulate_tomography(&chi, Sampling::Exact).unwrap()).unwrap();
        let diff = (fit.chi.matrix() - chi.matrix()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        worst = worst.max(diff);
    }
    let (lo, hi) = fidelities.iter().fold((1.0f64, 0.0f64), |(lo, hi), &f| (lo.min(f), hi.max(f)));
    verdict(
        sampled_ok && worst <= 1e-6,
        format!("fidelity to identity in [{lo:.4}, {hi:.4}] over 10 seeds; exact fits max |d chi| = {worst:.1e}"),
    )
}

fn random_state(rng: &mut ChaCha8Rng) -> TwoQubitState {
    let g = Mat4::from_fn(|_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let m = g * g.adjoint();
    TwoQubitState::new(m.unscale(m.trace().re), "random").unwrap()
}

fn min_eigenvalue(m: &Mat4) -> f64 {
    let big = nalgebra::DMatrix::from_fn(8, 8, |i, j| {
        let z = m[(i % 4, j % 4)];
        match (i < 4, j < 4) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    });
    big.symmetric_eigenvalues().min()
}

fn random_model(rng: &mut ChaCha8Rng) -> LhsModel {
    let w: Vec<f64> = (0..4).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = w.iter().sum();
    LhsModel {
        hidden: (0..4)
            .map(|k| {
                let (r, a): (f64, f64) = (rng.random_range(0.0..1.0), rng.random_range(0.0..2.0 * PI));
                let response = Response::ROLES[k];
                let x = (r.sqrt() * a.cos()).abs() * response.ncs.sign();
                HiddenState { point: PlanePoint::new(x, r.sqrt() * a.sin()), weight: w[k] / total, response }
            })
            .collect(),
    }
}

fn centre(model: &LhsModel, keep: impl Fn(&Response) -> bool) -> (f64, PlanePoint) {
    let mut p = 0.0;
    let mut acc = PlanePoint::new(0.0, 0.0);
    for h in model.hidden.iter().filter(|h| keep(&h.response)) {
        p += h.weight;
        acc = acc.add(h.point.scale(h.weight));
    }
    (p, acc.scale(1.0 / p))
}

fn invariants() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut failures = Vec::new();

    // No-signalling and PSD/trace of random states and of both families.
    for _ in 0..100 {
        let rho = random_state(&mut rng);
        let n = Direction::from_angles(rng.random_range(0.0..PI), rng.random_range(0.0..2.0 * PI));
        let marginal = Mat2::from_fn(|b, bp| rho.matrix()[(b, bp)] + rho.matrix()[(2 + b, 2 + bp)]);
        let mut sum = Mat2::zeros();
        for o in Outcome::BOTH {
            if let Ok((p, q)) = conditional_state(&rho, &n, o) {
                sum += q.matrix().scale(p);
            }
        }
        if (sum - marginal).norm() > 1e-10 {
            failures.push("no-signalling");
        }
        let (theta, eta) = (rng.random_range(0.0..FRAC_PI_2), rng.random_range(0.0..1.0));
        for m in [make_rho1(theta, eta).unwrap(), make_rho2(theta, eta).unwrap()] {
            let m = m.matrix();
            if (m.trace().re - 1.0).abs() > 1e-12 || (m - m.adjoint()).norm() > 1e-12 || min_eigenvalue(m) < -1e-12 {
                failures.push("psd/trace");
            }
        }
    }

    // Bloch round-trip.
    for _ in 0..100 {
        let (t, p, r): (f64, f64, f64) =
            (rng.random_range(0.0..PI), rng.random_range(0.0..2.0 * PI), rng.random_range(0.0..1.0));
        let b = BlochVector::new(r * t.sin() * p.cos(), r * t.sin() * p.sin(), r * t.cos()).unwrap();
        let back = bloch_of(&bloch_to_state(&b).unwrap());
        if (back.x - b.x).abs().max((back.y - b.y).abs()).max((back.z - b.z).abs()) > 1e-12 {
            failures.push("bloch round-trip");
        }
    }

    // Containment certificates against independently computed chord endpoints.
    let mut checked = 0;
    while checked < 100 {
        let (r1, r2) = (rng.random_range(0.05..1.0), rng.random_range(0.05..1.0));
        let (g1, g2): (f64, f64) = (rng.random_range(0.05..PI - 0.05), rng.random_range(0.05..PI - 0.05));
        let Ok(sym) = symmetrize(&GeometricRecord::exact(r1, r2, g1, g2, 0.5, -0.5, 0.5)) else { continue };
        checked += 1;
        let chord = |r: f64, ux: f64, uz: f64, flip: f64| {
            let s = (1.0 - r * r).sqrt();
            [(r * ux + s * uz, r * uz - s * ux), (r * ux - s * uz, r * uz + s * ux)].map(|(x, z)| (flip * x, z))
        };
        let ends = chord(r1, g1.sin(), g1.cos(), 1.0).into_iter().chain(chord(r2, -g2.sin(), g2.cos(), -1.0));
        let (ux, uz) = (sym.gamma.sin(), sym.gamma.cos());
        if ends.map(|(x, z)| x * ux + z * uz - sym.r12).any(|m| m < -1e-12) || sym.containment_violation > 1e-12 {
            failures.push("containment");
        }
    }

    // Mirror-averaged local models.
    for _ in 0..100 {
        let model = random_model(&mut rng);
        let (g1, g2): (f64, f64) = (rng.random_range(0.3..PI - 0.3), rng.random_range(0.3..PI - 0.3));
        let (p_a, a) = centre(&model, |r| r.ncs == Outcome::Minus);
        let (p_b, b) = centre(&model, |r| r.ncs == Outcome::Plus);
        let (p_d, d) = centre(&model, |r| r.check == avn_steering::criterion::Branch::Winning);
        let (_, c) = centre(&model, |r| r.check == avn_steering::criterion::Branch::Other);
        let u1 = PlanePoint::new(g1.sin(), g1.cos());
        let u2 = PlanePoint::new(-g2.sin(), g2.cos());
        let rec = GeometricRecord::exact(b.dot(u1), a.dot(u2), g1, g2, d.z, c.z, p_d);
        let Ok(sym_model) = symmetrize_lhs_model(&model, &rec) else {
            failures.push("mirror averaging: rejected a valid model");
            continue;
        };
        let (_, a_new) = centre(&sym_model, |r| r.ncs == Outcome::Minus);
        let (_, b_new) = centre(&sym_model, |r| r.ncs == Outcome::Plus);
        let expected = a.scale(p_a).add(b.mirror().scale(p_b));
        if a_new.sub(expected).norm() > 1e-9 || b_new.sub(expected.mirror()).norm() > 1e-9 {
            failures.push("mirror averaging: mass centres");
        }
        if let Ok(sym) = symmetrize(&rec) {
            if b_new.dot(sym.u()) < sym.r12 - 1e-9 || a_new.dot(sym.u_mirror()) < sym.r12 - 1e-9 {
                failures.push("mirror averaging: merged cap");
            }
            if criterion_value(&sym).map(|cp| cp.value > 1e-9).unwrap_or(false) {
                failures.push("mirror averaging: local model violates the criterion");
            }
        }
    }

    failures.dedup();
    verdict(
        failures.is_empty(),
        if failures.is_empty() {
            "no-signalling, PSD/trace, Bloch round-trip, containment, mirror averaging: 100 cases each".into()
        } else {
            format!("failed: {failures:?}")
        },
    )
}

type Criterion = (&'static str, fn() -> Check);

fn main() {
    let criteria: [Criterion; 8] = [
        ("analytic agreement, rho1", analytic_rho1),
        ("analytic agreement, rho2", analytic_rho2),
        ("ideal Bell case", ideal_bell),
        ("known gap values", known_deltas),
        ("criterion / oracle equivalence", oracle_equivalence),
        ("noise pipeline", noise_pipeline),
        ("process tomography", tomography),
        ("invariant suites", invariants),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let out = run();
        failed += !out.pass as usize;
        println!("criterion {} ({name}): {} - {}", k + 1, if out.pass { "PASS" } else { "FAIL" }, out.detail);
    }
    if failed > 0 {
        println!("{failed} of 8 criteria failed");
        std::process::exit(1);
    }
    println!("all 8 criteria passed");
}
