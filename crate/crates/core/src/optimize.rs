use nalgebra::{DMatrix, DVector};

/// Golden-section search for the maximum of `f` on `[a, b]`.
///
/// Stops once the bracket is narrower than `tol`. Returns `(x_max, f_max)`.
pub fn golden_section_maximize(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;

    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);

    while (b - a).abs() > tol {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        }
    }

    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    /// False when the iteration budget ran out first.
    pub converged: bool,
}

fn central_gradient(f: &impl Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let h = 1e-6 * x[i].abs().max(1.0);
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// BFGS with central-difference gradients and Armijo backtracking.
///
/// Stops when one step changes `f` by less than `rel_tol * max(|f|, 1)`, when
/// no descent step can be found, or after `max_iter` iterations.
pub fn bfgs_minimize(f: impl Fn(&[f64]) -> f64, x0: Vec<f64>, rel_tol: f64, max_iter: usize) -> Minimum {
    let n = x0.len();
    let mut x = x0;
    let mut fx = f(&x);
    let mut g = central_gradient(&f, &x);
    let mut h_inv = DMatrix::<f64>::identity(n, n);

    for iteration in 1..=max_iter {
        let gv = DVector::from_column_slice(&g);
        let mut d = -(&h_inv * &gv);
        let mut slope = d.dot(&gv);
        if slope >= 0.0 {
            h_inv.fill_with_identity();
            d = -gv.clone();
            slope = d.dot(&gv);
        }
        if slope == 0.0 {
            return Minimum { x, value: fx, iterations: iteration, converged: true };
        }

        let mut alpha = 1.0;
        let mut step = None;
        for _ in 0..60 {
            let trial: Vec<f64> = x.iter().zip(d.iter()).map(|(xi, di)| xi + alpha * di).collect();
            let ft = f(&trial);
            if ft <= fx + 1e-4 * alpha * slope {
                step = Some((trial, ft));
                break;
            }
            alpha *= 0.5;
        }
        let Some((x_new, f_new)) = step else {
            return Minimum { x, value: fx, iterations: iteration, converged: true };
        };

        let g_new = central_gradient(&f, &x_new);
        let s = DVector::from_iterator(n, x_new.iter().zip(&x).map(|(a, b)| a - b));
        let y = DVector::from_iterator(n, g_new.iter().zip(&g).map(|(a, b)| a - b));
        let sy = s.dot(&y);
        if sy > 1e-16 {
            let rho = 1.0 / sy;
            let left = DMatrix::identity(n, n) - (&s * y.transpose()) * rho;
            h_inv = &left * &h_inv * left.transpose() + (&s * s.transpose()) * rho;
        }

        let change = (fx - f_new).abs();
        let scale = fx.abs().max(1.0);
        x = x_new;
        fx = f_new;
        g = g_new;
        if change <= rel_tol * scale {
            return Minimum { x, value: fx, iterations: iteration, converged: true };
        }
    }
    Minimum { x, value: fx, iterations: max_iter, converged: false }
}
